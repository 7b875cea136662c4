//! Embedded SQLite store for weather series and JSON documents.
//!
//! One writer at a time: a write begins an immediate transaction and fails
//! with [`GatewayError::WriteConflict`] instead of waiting when another
//! connection holds the write lock. Readers only ever see committed data.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDateTime;
use pvtwin_core::weather::{Variable, WeatherSeries};
use rusqlite::{params, Connection, OptionalExtension, Transaction, TransactionBehavior};

use crate::error::GatewayError;
use crate::measurements::TIMESTAMP_FORMAT;

pub struct Store {
    conn: Connection,
}

/// An open write transaction; dropped without [`StoreWriter::commit`] it
/// rolls back, leaving the store unchanged.
pub struct StoreWriter<'a> {
    tx: Transaction<'a>,
}

fn series_table(name: &str) -> Result<String, GatewayError> {
    let valid = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if valid {
        Ok(format!("series_{name}"))
    } else {
        Err(GatewayError::InvalidTableName(name.to_string()))
    }
}

/// Table name for a `database/table` style locator such as
/// `measurements.sqlite/cu01`: the last path segment.
pub fn table_from_locator(locator: &str) -> &str {
    locator.rsplit('/').next().unwrap_or(locator)
}

fn variable_key(var: Variable) -> String {
    serde_json::to_value(var).unwrap().as_str().unwrap().to_string()
}

fn parse_variable(key: &str) -> Option<Variable> {
    serde_json::from_value(serde_json::Value::String(key.to_string())).ok()
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        Self::init(conn)
    }

    pub fn open_in_memory() -> Result<Self, GatewayError> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self, GatewayError> {
        conn.busy_timeout(std::time::Duration::ZERO)?;
        conn.execute_batch(
            "CREATE TABLE IF NOT EXISTS documents (
                kind TEXT NOT NULL,
                key TEXT NOT NULL,
                body TEXT NOT NULL,
                PRIMARY KEY (kind, key)
            );",
        )?;
        Ok(Self { conn })
    }

    pub fn begin_write(&mut self) -> Result<StoreWriter<'_>, GatewayError> {
        let tx = Transaction::new(&mut self.conn, TransactionBehavior::Immediate)?;
        Ok(StoreWriter { tx })
    }

    /// Writes one series in its own transaction.
    pub fn store_series(&mut self, table: &str, series: &WeatherSeries) -> Result<(), GatewayError> {
        let mut w = self.begin_write()?;
        w.store_series(table, series)?;
        w.commit()
    }

    pub fn put_document(&mut self, kind: &str, key: &str, body: &str) -> Result<(), GatewayError> {
        let mut w = self.begin_write()?;
        w.put_document(kind, key, body)?;
        w.commit()
    }

    pub fn has_table(&self, table: &str) -> Result<bool, GatewayError> {
        let name = series_table(table)?;
        Ok(self
            .conn
            .query_row(
                "SELECT 1 FROM sqlite_master WHERE type = 'table' AND name = ?1",
                [&name],
                |_| Ok(()),
            )
            .optional()?
            .is_some())
    }

    /// Rows with `start <= t < end`.
    pub fn query_series(&self, table: &str, start: NaiveDateTime, end: NaiveDateTime) -> Result<WeatherSeries, GatewayError> {
        self.select(
            table,
            Some((
                start.format(TIMESTAMP_FORMAT).to_string(),
                end.format(TIMESTAMP_FORMAT).to_string(),
            )),
        )
    }

    pub fn read_series(&self, table: &str) -> Result<WeatherSeries, GatewayError> {
        self.select(table, None)
    }

    fn select(&self, table: &str, range: Option<(String, String)>) -> Result<WeatherSeries, GatewayError> {
        if !self.has_table(table)? {
            return Err(GatewayError::TableMissing(table.to_string()));
        }
        let name = series_table(table)?;
        let (lo, hi) = range.unwrap_or_else(|| (String::new(), "\u{10FFFF}".to_string()));
        let mut stmt = self.conn.prepare(&format!(
            "SELECT ts, variable, value FROM {name} WHERE ts >= ?1 AND ts < ?2 ORDER BY ts"
        ))?;
        let mut stamps: Vec<NaiveDateTime> = Vec::new();
        let mut cells: BTreeMap<Variable, Vec<(usize, Option<f64>)>> = BTreeMap::new();
        let rows = stmt.query_map(params![lo, hi], |r| {
            Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?, r.get::<_, Option<f64>>(2)?))
        })?;
        for row in rows {
            let (ts, var, value) = row?;
            let t = NaiveDateTime::parse_from_str(&ts, TIMESTAMP_FORMAT)
                .map_err(|_| GatewayError::MalformedPayload(format!("stored timestamp {ts:?}")))?;
            if stamps.last() != Some(&t) {
                stamps.push(t);
            }
            let var = parse_variable(&var)
                .ok_or_else(|| GatewayError::MalformedPayload(format!("stored variable {var:?}")))?;
            cells.entry(var).or_default().push((stamps.len() - 1, value));
        }
        let n = stamps.len();
        let mut series = WeatherSeries::new(stamps)?;
        for (var, entries) in cells {
            let mut column = vec![None; n];
            for (i, v) in entries {
                column[i] = v;
            }
            series.set_column(var, column)?;
        }
        Ok(series)
    }

    pub fn get_document(&self, kind: &str, key: &str) -> Result<Option<String>, GatewayError> {
        Ok(self
            .conn
            .query_row(
                "SELECT body FROM documents WHERE kind = ?1 AND key = ?2",
                [kind, key],
                |r| r.get(0),
            )
            .optional()?)
    }

    /// Documents of one kind, ordered by key.
    pub fn list_documents(&self, kind: &str) -> Result<Vec<(String, String)>, GatewayError> {
        let mut stmt = self
            .conn
            .prepare("SELECT key, body FROM documents WHERE kind = ?1 ORDER BY key")?;
        let rows = stmt.query_map([kind], |r| Ok((r.get(0)?, r.get(1)?)))?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    pub fn count_documents(&self, kind: &str) -> Result<usize, GatewayError> {
        let n: i64 = self
            .conn
            .query_row("SELECT COUNT(*) FROM documents WHERE kind = ?1", [kind], |r| r.get(0))?;
        Ok(n as usize)
    }
}

impl StoreWriter<'_> {
    /// Upserts every cell of `series` (missing cells as NULL).
    pub fn store_series(&mut self, table: &str, series: &WeatherSeries) -> Result<(), GatewayError> {
        let name = series_table(table)?;
        self.tx.execute_batch(&format!(
            "CREATE TABLE IF NOT EXISTS {name} (
                ts TEXT NOT NULL,
                variable TEXT NOT NULL,
                value REAL,
                PRIMARY KEY (ts, variable)
            );"
        ))?;
        let mut stmt = self
            .tx
            .prepare(&format!("INSERT OR REPLACE INTO {name} (ts, variable, value) VALUES (?1, ?2, ?3)"))?;
        let vars: Vec<(Variable, String)> = series.variables().map(|v| (v, variable_key(v))).collect();
        for (row, t) in series.timestamps().iter().enumerate() {
            let ts = t.format(TIMESTAMP_FORMAT).to_string();
            for (var, key) in &vars {
                stmt.execute(params![ts, key, series.get(*var, row)])?;
            }
        }
        Ok(())
    }

    pub fn put_document(&mut self, kind: &str, key: &str, body: &str) -> Result<(), GatewayError> {
        self.tx.execute(
            "INSERT OR REPLACE INTO documents (kind, key, body) VALUES (?1, ?2, ?3)",
            [kind, key, body],
        )?;
        Ok(())
    }

    pub fn commit(self) -> Result<(), GatewayError> {
        Ok(self.tx.commit()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, NaiveDate};

    fn series(n: usize) -> WeatherSeries {
        let t0 = NaiveDate::from_ymd_opt(2024, 5, 9).unwrap().and_hms_opt(0, 0, 0).unwrap();
        WeatherSeries::regular(t0, 10, n)
            .with_column(Variable::Ghi, (0..n).map(|i| (i != 2).then_some(i as f64 * 1.1)).collect())
            .unwrap()
            .with_values(Variable::AmbientTemperature, vec![24.3; n])
            .unwrap()
    }

    #[test]
    fn write_then_read() {
        let mut store = Store::open_in_memory().unwrap();
        let s = series(6);
        store.store_series("cu01", &s).unwrap();
        assert_eq!(store.read_series("cu01").unwrap(), s);
        let t0 = s.timestamps()[0];
        assert_eq!(store.query_series("cu01", t0, t0 + Duration::hours(1)).unwrap().len(), 6);
        assert_eq!(store.query_series("cu01", t0, t0).unwrap().len(), 0);
        assert_eq!(
            store.query_series("cu01", t0 + Duration::minutes(10), t0 + Duration::minutes(30)).unwrap(),
            s.slice(t0 + Duration::minutes(10), t0 + Duration::minutes(30))
        );
    }

    #[test]
    fn missing_table_and_bad_names() {
        let store = Store::open_in_memory().unwrap();
        assert!(matches!(store.read_series("nope"), Err(GatewayError::TableMissing(_))));
        assert!(matches!(store.read_series("a;drop"), Err(GatewayError::InvalidTableName(_))));
        assert_eq!(table_from_locator("measurements.sqlite/cu01"), "cu01");
    }

    #[test]
    fn dropped_writer_rolls_back() {
        let mut store = Store::open_in_memory().unwrap();
        {
            let mut w = store.begin_write().unwrap();
            w.store_series("cu01", &series(3)).unwrap();
            w.put_document("offer", "2024-05-09", "{}").unwrap();
        }
        assert!(!store.has_table("cu01").unwrap());
        assert_eq!(store.get_document("offer", "2024-05-09").unwrap(), None);
    }

    #[test]
    fn documents() {
        let mut store = Store::open_in_memory().unwrap();
        store.put_document("job", "0002", "b").unwrap();
        store.put_document("job", "0001", "a").unwrap();
        store.put_document("job", "0001", "c").unwrap();
        assert_eq!(store.count_documents("job").unwrap(), 2);
        assert_eq!(
            store.list_documents("job").unwrap(),
            vec![("0001".into(), "c".into()), ("0002".into(), "b".into())]
        );
    }
}
