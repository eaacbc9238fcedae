//! Bundled demo database (cars: maker / production / price), seed examples,
//! and column descriptions. Used by the test suite and the CLI quickstart.

use std::path::{Path, PathBuf};

use rusqlite::Connection;

pub const CARS_SQL: &str = "\
CREATE TABLE maker (id INTEGER PRIMARY KEY, name TEXT, country TEXT);
CREATE TABLE price (id INTEGER PRIMARY KEY, price REAL);
CREATE TABLE production (
    id INTEGER PRIMARY KEY REFERENCES price(id),
    country TEXT,
    maker_id INTEGER REFERENCES maker(id)
);
INSERT INTO maker VALUES
    (1, 'Ford', 'USA'),
    (2, 'Toyota', 'Japan'),
    (3, 'Volkswagen', 'Germany'),
    (4, 'Magna', 'Canada'),
    (5, 'Fiat', 'Italy'),
    (6, 'Honda', 'Japan');
INSERT INTO price VALUES
    (1, 12500.0),
    (2, 14900.0),
    (3, 21000.0),
    (4, 9800.0),
    (5, 30500.0),
    (6, 13200.0),
    (7, 45000.0),
    (8, 11700.0);
INSERT INTO production VALUES
    (1, 'USA', 1),
    (2, 'Japan', 2),
    (3, 'Germany', 3),
    (4, 'USA', 1),
    (5, 'Germany', 3),
    (6, 'Canada', 4),
    (7, 'Italy', 5),
    (8, 'Japan', 6);
";

pub const CARS_SEEDS_JSONL: &str = r#"{"question": "List IDs of North American-manufactured vehicles under $15,000", "sql": "SELECT price.id FROM price INNER JOIN production ON price.id = production.id WHERE production.country = 'USA' AND price.price < 15000", "db_id": "cars"}
{"question": "Which makers are based in Japan?", "sql": "SELECT name FROM maker WHERE country = 'Japan'", "db_id": "cars"}
{"question": "What is the average vehicle price?", "sql": "SELECT AVG(price.price) FROM price", "db_id": "cars"}
{"question": "Name the makers whose vehicles are produced in Germany.", "sql": "SELECT maker.name FROM maker INNER JOIN production ON maker.id = production.maker_id WHERE production.country = 'Germany'", "db_id": "cars"}
{"question": "How many production records are there?", "sql": "SELECT COUNT(*) FROM production", "db_id": "cars"}
"#;

pub const CARS_DESCRIPTIONS_TSV: &str = "\
production.country\tmanufacturing country
price.price\tretail price in USD
maker.name\tmanufacturer name
maker.country\theadquarters country
";

/// Creates the cars database at `path` (overwriting any existing file).
pub fn create_cars_db(path: &Path) -> rusqlite::Result<()> {
    if path.exists() {
        let _ = std::fs::remove_file(path);
    }
    let conn = Connection::open(path)?;
    conn.execute_batch(CARS_SQL)
}

/// Writes the full fixture set (cars.db, seeds.jsonl, descriptions.tsv)
/// into `dir` and returns the database path.
pub fn write_fixture(dir: &Path) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let db = dir.join("cars.db");
    create_cars_db(&db).map_err(|e| std::io::Error::other(e.to_string()))?;
    std::fs::write(dir.join("seeds.jsonl"), CARS_SEEDS_JSONL)?;
    std::fs::write(dir.join("descriptions.tsv"), CARS_DESCRIPTIONS_TSV)?;
    Ok(db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::load_schema;

    #[test]
    fn fixture_shape() {
        let dir = tempfile::tempdir().unwrap();
        let db = write_fixture(dir.path()).unwrap();
        let schema = load_schema(&db, 3).unwrap();
        assert_eq!(schema.tables.len(), 3);
        assert_eq!(schema.column_count(), 8);
        assert_eq!(schema.foreign_keys.len(), 2);
    }
}
