//! Pipeline configuration: a sectioned key-value file, flag overrides, and
//! fail-fast validation. Reproducible runs are the primary artifact, so the
//! whole config hashes into the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sqlsynth_core::rng::fnv1a;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Mock,
    Http,
    Replay,
}

impl BackendKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "http" => Ok(BackendKind::Http),
            "replay" => Ok(BackendKind::Replay),
            other => bail!("unknown gateway backend `{other}` (mock|http|replay)"),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            BackendKind::Mock => "mock",
            BackendKind::Http => "http",
            BackendKind::Replay => "replay",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub db_path: PathBuf,
    pub descriptions: Option<PathBuf>,
    pub sample_k: usize,
    pub seeds: PathBuf,
    pub min_size: usize,
    pub max_size: usize,
    pub rounds: u32,
    pub semantic_per_round: usize,
    pub structural_per_round: usize,
    pub evolve_per_round: usize,
    pub demos_k: usize,
    pub temperature: f64,
    pub evolve_depth_max: usize,
    pub or_prob: f64,
    pub aggregation_prob: f64,
    pub scale_prob: f64,
    pub paraphrase_n: usize,
    pub reweight_with_accepted: bool,
    pub timeout_secs: f64,
    pub max_workers: usize,
    pub retrieval_top_n: usize,
    pub retrieval_min_ratio: f64,
    pub backend: BackendKind,
    pub transcript: Option<PathBuf>,
    pub replay_from: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub emit_sources: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            db_path: PathBuf::new(),
            descriptions: None,
            sample_k: 3,
            seeds: PathBuf::new(),
            min_size: 2,
            max_size: 6,
            rounds: 1,
            semantic_per_round: 20,
            structural_per_round: 20,
            evolve_per_round: 10,
            demos_k: 3,
            temperature: 0.7,
            evolve_depth_max: 3,
            or_prob: 0.1,
            aggregation_prob: 0.3,
            scale_prob: 0.3,
            paraphrase_n: 2,
            reweight_with_accepted: true,
            timeout_secs: 25.0,
            max_workers: 4,
            retrieval_top_n: 5,
            retrieval_min_ratio: 0.6,
            backend: BackendKind::Mock,
            transcript: None,
            replay_from: None,
            out_dir: PathBuf::new(),
            seed: 42,
            emit_sources: vec![
                "semantic".to_string(),
                "structural".to_string(),
                "evolved".to_string(),
            ],
        }
    }
}

fn parse_sections(text: &str) -> Result<BTreeMap<String, BTreeMap<String, String>>> {
    let mut out: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            out.entry(section.clone()).or_default();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`, got `{raw}`", i + 1);
        };
        if section.is_empty() {
            bail!(
                "config line {}: key `{}` appears before any [section]",
                i + 1,
                key.trim()
            );
        }
        out.entry(section.clone())
            .or_default()
            .insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

impl PipelineConfig {
    /// Loads a config file. Paths in the file resolve relative to the file's
    /// directory. Unknown keys are errors.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let sections = parse_sections(&text)?;
        let mut config = PipelineConfig::default();

        let resolve = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };

        for (section, keys) in &sections {
            for (key, value) in keys {
                config.apply_key(&format!("{section}.{key}"), value, &resolve)?;
            }
        }
        Ok(config)
    }

    /// Applies one `section.key = value` assignment (config lines and
    /// `--set` overrides share this path).
    fn apply_key(
        &mut self,
        id: &str,
        value: &str,
        resolve: &dyn Fn(&str) -> PathBuf,
    ) -> Result<()> {
        match id {
            "database.path" => self.db_path = resolve(value),
            "database.descriptions" => self.descriptions = Some(resolve(value)),
            "database.sample_k" => self.sample_k = value.parse()?,
            "seeds.path" => self.seeds = resolve(value),
            "sampling.min_size" => self.min_size = value.parse()?,
            "sampling.max_size" => self.max_size = value.parse()?,
            "synthesis.rounds" => self.rounds = value.parse()?,
            "synthesis.semantic_per_round" => self.semantic_per_round = value.parse()?,
            "synthesis.structural_per_round" => self.structural_per_round = value.parse()?,
            "synthesis.evolve_per_round" => self.evolve_per_round = value.parse()?,
            "synthesis.demos_k" => self.demos_k = value.parse()?,
            "synthesis.temperature" => self.temperature = value.parse()?,
            "synthesis.evolve_depth_max" => self.evolve_depth_max = value.parse()?,
            "synthesis.or_prob" => self.or_prob = value.parse()?,
            "synthesis.aggregation_prob" => self.aggregation_prob = value.parse()?,
            "synthesis.scale_prob" => self.scale_prob = value.parse()?,
            "synthesis.paraphrase_n" => self.paraphrase_n = value.parse()?,
            "synthesis.reweight_with_accepted" => self.reweight_with_accepted = value.parse()?,
            "verify.timeout_secs" => self.timeout_secs = value.parse()?,
            "verify.max_workers" => self.max_workers = value.parse()?,
            "retrieval.top_n" => self.retrieval_top_n = value.parse()?,
            "retrieval.min_lcs_ratio" => self.retrieval_min_ratio = value.parse()?,
            "gateway.backend" => self.backend = BackendKind::parse(value)?,
            "gateway.transcript" => self.transcript = Some(resolve(value)),
            "gateway.replay" => self.replay_from = Some(resolve(value)),
            "output.dir" => self.out_dir = resolve(value),
            "output.seed" => self.seed = value.parse()?,
            "output.emit_sources" => {
                self.emit_sources = value.split(',').map(|s| s.trim().to_string()).collect()
            }
            other => bail!("unknown config key `{other}`"),
        }
        Ok(())
    }

    /// Applies a `--set section.key=value` override; relative paths resolve
    /// against the current directory.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let Some((key, value)) = spec.split_once('=') else {
            bail!("--set expects section.key=value, got `{spec}`");
        };
        self.apply_key(key.trim(), value.trim(), &|v: &str| PathBuf::from(v))
    }

    /// Fails fast on missing paths and degenerate ranges.
    pub fn validate(&self) -> Result<()> {
        if self.db_path.as_os_str().is_empty() {
            bail!("database.path is required");
        }
        if !self.db_path.exists() {
            bail!("database path {} does not exist", self.db_path.display());
        }
        if self.seeds.as_os_str().is_empty() {
            bail!("seeds.path is required");
        }
        if !self.seeds.exists() {
            bail!("seed file {} does not exist", self.seeds.display());
        }
        if let Some(d) = &self.descriptions {
            if !d.exists() {
                bail!("description file {} does not exist", d.display());
            }
        }
        if self.backend == BackendKind::Replay {
            match &self.replay_from {
                Some(p) if p.exists() => {}
                Some(p) => bail!("replay transcript {} does not exist", p.display()),
                None => bail!("gateway.replay path is required for the replay backend"),
            }
        }
        if self.out_dir.as_os_str().is_empty() {
            bail!("output.dir is required");
        }
        if self.min_size < 1 || self.max_size < self.min_size {
            bail!(
                "sampling size range [{}, {}] is degenerate",
                self.min_size,
                self.max_size
            );
        }
        if self.rounds < 1 {
            bail!("synthesis.rounds must be at least 1");
        }
        if self.timeout_secs <= 0.0 {
            bail!("verify.timeout_secs must be positive");
        }
        if self.max_workers < 1 {
            bail!("verify.max_workers must be at least 1");
        }
        if self.demos_k < 1 {
            bail!("synthesis.demos_k must be at least 1");
        }
        Ok(())
    }

    /// Stable hash over every field, recorded in the manifest and report.
    pub fn config_hash(&self) -> String {
        let canon = format!(
            "db={};desc={:?};sample_k={};seeds={};sizes={}..{};rounds={};sem={};str={};evo={};\
             demos_k={};temp={};depth={};or={};agg={};scale={};para={};reweight={};timeout={};\
             workers={};topn={};minratio={};backend={};seed={};emit={:?}",
            self.db_path.display(),
            self.descriptions.as_ref().map(|p| p.display().to_string()),
            self.sample_k,
            self.seeds.display(),
            self.min_size,
            self.max_size,
            self.rounds,
            self.semantic_per_round,
            self.structural_per_round,
            self.evolve_per_round,
            self.demos_k,
            self.temperature,
            self.evolve_depth_max,
            self.or_prob,
            self.aggregation_prob,
            self.scale_prob,
            self.paraphrase_n,
            self.reweight_with_accepted,
            self.timeout_secs,
            self.max_workers,
            self.retrieval_top_n,
            self.retrieval_min_ratio,
            self.backend.as_str(),
            self.seed,
            self.emit_sources,
        );
        format!("{:016x}", fnv1a(canon.as_bytes()))
    }
}
