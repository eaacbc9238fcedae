//! Replay backend: serves responses recorded in a transcript, keyed by the
//! exact rendered request. Re-running a pipeline against its own transcript
//! reproduces the original outputs byte for byte.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

use super::{Backend, BackendError, LlmRequest, TranscriptEntry};

pub struct ReplayBackend {
    entries: Mutex<HashMap<(String, String), VecDeque<String>>>,
}

impl ReplayBackend {
    pub fn from_transcript(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut entries: HashMap<(String, String), VecDeque<String>> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: TranscriptEntry = serde_json::from_str(line).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("transcript line {}: {e}", i + 1),
                )
            })?;
            entries
                .entry((entry.template_id, entry.request))
                .or_default()
                .push_back(entry.response);
        }
        Ok(Self {
            entries: Mutex::new(entries),
        })
    }
}

impl Backend for ReplayBackend {
    fn name(&self) -> &'static str {
        "replay"
    }

    fn send(&self, request: &LlmRequest) -> Result<String, BackendError> {
        let key = (
            request.template_id.as_str().to_string(),
            request.prompt.clone(),
        );
        let mut entries = self.entries.lock().unwrap();
        let queue = entries.get_mut(&key).ok_or_else(|| {
            BackendError::Fatal(format!(
                "no recorded response for a {} request",
                request.template_id.as_str()
            ))
        })?;
        match queue.pop_front() {
            // keep serving the last recorded response for repeated identical
            // requests so replays of retried calls stay total
            Some(resp) => {
                if queue.is_empty() {
                    queue.push_back(resp.clone());
                }
                Ok(resp)
            }
            None => Err(BackendError::Fatal(
                "recorded responses exhausted for this request".into(),
            )),
        }
    }
}
