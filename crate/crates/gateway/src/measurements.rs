//! Measurement files in the plant's tabular layout and GHI forecast files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Cursor;
use std::path::Path;

use calamine::{Data, DataType, Reader, Xlsx};
use chrono::{Duration, NaiveDateTime, Timelike};
use pvtwin_core::weather::{Variable, WeatherSeries};

use crate::error::GatewayError;

/// Column names of a measurement file, verbatim.
pub const MEASUREMENT_HEADERS: [&str; 6] = [
    "Fecha",
    "GHI",
    "Presion",
    "Temperatura Ambiente",
    "Wind Speed",
    "Wind Direction",
];

/// Variables carried by the value columns, in header order.
pub const MEASUREMENT_VARIABLES: [Variable; 5] = [
    Variable::Ghi,
    Variable::Pressure,
    Variable::AmbientTemperature,
    Variable::WindSpeed,
    Variable::WindDirection,
];

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";
const TIMESTAMP_FORMATS: [&str; 4] = [TIMESTAMP_FORMAT, "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Csv,
    Xlsx,
}

impl FileFormat {
    /// Format implied by a file name's extension (case-insensitive).
    pub fn from_path(path: impl AsRef<Path>) -> Option<Self> {
        let ext = path.as_ref().extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "csv" => Some(Self::Csv),
            "xlsx" => Some(Self::Xlsx),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Empty,
    Text(String),
    Number(f64),
    Stamp(NaiveDateTime),
}

struct Table {
    header: Vec<String>,
    /// (1-based file line, cells)
    rows: Vec<(usize, Vec<Cell>)>,
}

fn read_csv(bytes: &[u8]) -> Result<Table, GatewayError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(GatewayError::EmptyFile);
    }
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| GatewayError::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| GatewayError::Csv(e.to_string()))?;
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let cells = record
            .iter()
            .map(|c| match c.trim() {
                "" => Cell::Empty,
                s => Cell::Text(s.to_string()),
            })
            .collect();
        rows.push((i + 2, cells));
    }
    Ok(Table { header, rows })
}

fn read_xlsx(bytes: &[u8]) -> Result<Table, GatewayError> {
    if bytes.is_empty() {
        return Err(GatewayError::EmptyFile);
    }
    let mut workbook: Xlsx<_> =
        Xlsx::new(Cursor::new(bytes)).map_err(|e| GatewayError::Spreadsheet(e.to_string()))?;
    let range = workbook
        .worksheet_range_at(0)
        .ok_or(GatewayError::EmptyFile)?
        .map_err(|e| GatewayError::Spreadsheet(e.to_string()))?;
    let mut rows = range.rows();
    let header = rows
        .next()
        .ok_or(GatewayError::EmptyFile)?
        .iter()
        .map(|c| c.as_string().unwrap_or_default().trim().to_string())
        .collect();
    let rows = rows
        .enumerate()
        .filter(|(_, r)| !r.iter().all(|c| c.is_empty()))
        .map(|(i, r)| (i + 2, r.iter().map(xlsx_cell).collect()))
        .collect();
    Ok(Table { header, rows })
}

fn xlsx_cell(c: &Data) -> Cell {
    match c {
        Data::Empty => Cell::Empty,
        Data::Int(_) | Data::Float(_) => Cell::Number(c.as_f64().unwrap()),
        Data::DateTime(_) | Data::DateTimeIso(_) => c.as_datetime().map(round_to_second).map_or(Cell::Empty, Cell::Stamp),
        Data::String(s) if s.trim().is_empty() => Cell::Empty,
        other => Cell::Text(other.as_string().unwrap_or_default().trim().to_string()),
    }
}

/// Spreadsheet serial dates carry float noise below the second.
fn round_to_second(t: NaiveDateTime) -> NaiveDateTime {
    let base = t.with_nanosecond(0).unwrap();
    if t.nanosecond() >= 500_000_000 {
        base + Duration::seconds(1)
    } else {
        base
    }
}

fn parse_stamp(row: usize, cell: &Cell) -> Result<NaiveDateTime, GatewayError> {
    match cell {
        Cell::Stamp(t) => Ok(*t),
        Cell::Text(s) => TIMESTAMP_FORMATS
            .iter()
            .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
            .ok_or_else(|| GatewayError::BadTimestamp { row, value: s.clone() }),
        Cell::Number(v) => Err(GatewayError::BadTimestamp { row, value: v.to_string() }),
        Cell::Empty => Err(GatewayError::BadTimestamp { row, value: String::new() }),
    }
}

fn parse_value(row: usize, column: &str, cell: Option<&Cell>) -> Result<Option<f64>, GatewayError> {
    match cell {
        None | Some(Cell::Empty) => Ok(None),
        Some(Cell::Number(v)) => Ok(Some(*v)),
        Some(Cell::Text(s)) => match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            Ok(_) if s.eq_ignore_ascii_case("nan") => Ok(None),
            _ => Err(GatewayError::BadValue {
                row,
                column: column.to_string(),
                value: s.clone(),
            }),
        },
        Some(Cell::Stamp(t)) => Err(GatewayError::BadValue {
            row,
            column: column.to_string(),
            value: t.to_string(),
        }),
    }
}

/// Builds a series from (stamp, values) rows: sorted, duplicates rejected,
/// and gaps in the grid materialised as rows of missing cells.
fn assemble(
    mut rows: Vec<(NaiveDateTime, Vec<Option<f64>>)>,
    variables: &[Variable],
) -> Result<WeatherSeries, GatewayError> {
    if rows.is_empty() {
        return Err(GatewayError::EmptyFile);
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(GatewayError::DuplicateStamp(w[0].0));
    }
    let start = rows[0].0;
    let step = rows.windows(2).map(|w| w[1].0 - w[0].0).min();
    let (stamps, columns) = match step {
        None => (vec![start], rows[0].1.iter().map(|v| vec![*v]).collect::<Vec<_>>()),
        Some(step) => {
            let n = ((rows.last().unwrap().0 - start).num_seconds() / step.num_seconds()) as usize + 1;
            let mut columns = vec![vec![None; n]; variables.len()];
            for (t, values) in &rows {
                let offset = (*t - start).num_seconds();
                if offset % step.num_seconds() != 0 {
                    return Err(GatewayError::OffGrid(*t));
                }
                let k = (offset / step.num_seconds()) as usize;
                for (c, v) in columns.iter_mut().zip(values) {
                    c[k] = *v;
                }
            }
            let stamps = (0..n).map(|k| start + step * k as i32).collect();
            (stamps, columns)
        }
    };
    let mut series = WeatherSeries::new(stamps)?;
    for (var, values) in variables.iter().zip(columns) {
        series.set_column(*var, values)?;
    }
    Ok(series)
}

fn read_table(bytes: &[u8], format: FileFormat) -> Result<Table, GatewayError> {
    match format {
        FileFormat::Csv => read_csv(bytes),
        FileFormat::Xlsx => read_xlsx(bytes),
    }
}

/// Parses a measurement file whose header must match
/// [`MEASUREMENT_HEADERS`] exactly.
pub fn ingest_measurements(bytes: &[u8], format: FileFormat) -> Result<WeatherSeries, GatewayError> {
    let table = read_table(bytes, format)?;
    if table.header != MEASUREMENT_HEADERS {
        return Err(GatewayError::HeaderMismatch {
            expected: MEASUREMENT_HEADERS.iter().map(|s| s.to_string()).collect(),
            found: table.header,
        });
    }
    let rows = table
        .rows
        .iter()
        .map(|(line, cells)| {
            let t = parse_stamp(*line, &cells[0])?;
            let values = MEASUREMENT_HEADERS[1..]
                .iter()
                .enumerate()
                .map(|(i, name)| parse_value(*line, name, cells.get(i + 1)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((t, values))
        })
        .collect::<Result<Vec<_>, GatewayError>>()?;
    assemble(rows, &MEASUREMENT_VARIABLES)
}

/// Writes the measurement layout; columns absent from the series are left
/// empty, other variables are dropped.
pub fn emit_measurements(series: &WeatherSeries) -> String {
    let mut out = MEASUREMENT_HEADERS.join(",");
    out.push('\n');
    for (row, t) in series.timestamps().iter().enumerate() {
        out.push_str(&t.format(TIMESTAMP_FORMAT).to_string());
        for var in MEASUREMENT_VARIABLES {
            out.push(',');
            if let Some(v) = series.get(var, row) {
                write!(out, "{v}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

/// Parses a forecast file holding a timestamp column followed by at least a
/// `GHI` column (hourly or finer resolution).
pub fn ingest_ghi_forecast(bytes: &[u8], format: FileFormat) -> Result<WeatherSeries, GatewayError> {
    let table = read_table(bytes, format)?;
    let Some(ghi_col) = table.header.iter().position(|h| h == "GHI").filter(|&i| i > 0) else {
        return Err(GatewayError::HeaderMismatch {
            expected: vec!["timestamp".into(), "GHI".into()],
            found: table.header,
        });
    };
    let rows = table
        .rows
        .iter()
        .map(|(line, cells)| {
            let t = parse_stamp(*line, &cells[0])?;
            Ok((t, vec![parse_value(*line, "GHI", cells.get(ghi_col))?]))
        })
        .collect::<Result<Vec<_>, GatewayError>>()?;
    assemble(rows, &[Variable::Ghi])
}

/// Reads a file from disk, picking the format from its extension (CSV when
/// unknown).
pub fn read_measurement_file(path: &Path) -> Result<WeatherSeries, GatewayError> {
    let bytes = std::fs::read(path).map_err(crate::error::io_error(path))?;
    ingest_measurements(&bytes, FileFormat::from_path(path).unwrap_or(FileFormat::Csv))
}

pub fn read_forecast_file(path: &Path) -> Result<WeatherSeries, GatewayError> {
    let bytes = std::fs::read(path).map_err(crate::error::io_error(path))?;
    ingest_ghi_forecast(&bytes, FileFormat::from_path(path).unwrap_or(FileFormat::Csv))
}

/// Counts of cells per variable, useful for ingestion summaries.
pub fn present_counts(series: &WeatherSeries) -> BTreeMap<Variable, usize> {
    series
        .variables()
        .map(|v| (v, series.len() - series.missing_count(v)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "Fecha,GHI,Presion,Temperatura Ambiente,Wind Speed,Wind Direction\n\
2022-02-22 05:30:00,0.36,1003.06,22.97,1.48,257.64\n\
2022-02-22 05:40:00,0.38,1003.18,22.99,1.69,274.66\n\
2022-02-22 05:50:00,0.40,1003.25,23.03,1.75,228.60\n";

    #[test]
    fn parses_sample_rows() {
        let s = ingest_measurements(SAMPLE.as_bytes(), FileFormat::Csv).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.get(Variable::Ghi, 2), Some(0.40));
        assert_eq!(s.get(Variable::WindDirection, 2), Some(228.60));
        assert_eq!(s.resolution_minutes(), Some(10));
    }

    #[test]
    fn header_must_match_verbatim() {
        let bad = SAMPLE.replacen("GHI", "Irradiance", 1);
        match ingest_measurements(bad.as_bytes(), FileFormat::Csv) {
            Err(GatewayError::HeaderMismatch { expected, found }) => {
                assert_eq!(expected[1], "GHI");
                assert_eq!(found[1], "Irradiance");
            }
            other => panic!("{other:?}"),
        }
        let lower = SAMPLE.replacen("Presion", "presion", 1);
        assert!(matches!(
            ingest_measurements(lower.as_bytes(), FileFormat::Csv),
            Err(GatewayError::HeaderMismatch { .. })
        ));
    }

    #[test]
    fn rejects_empty_and_duplicates() {
        assert!(matches!(ingest_measurements(b"", FileFormat::Csv), Err(GatewayError::EmptyFile)));
        let header_only = format!("{}\n", MEASUREMENT_HEADERS.join(","));
        assert!(matches!(
            ingest_measurements(header_only.as_bytes(), FileFormat::Csv),
            Err(GatewayError::EmptyFile)
        ));
        let dup = format!("{SAMPLE}2022-02-22 05:40:00,1,2,3,4,5\n");
        assert!(matches!(
            ingest_measurements(dup.as_bytes(), FileFormat::Csv),
            Err(GatewayError::DuplicateStamp(_))
        ));
        let bad = SAMPLE.replacen("2022-02-22 05:40:00", "22/02/2022", 1);
        assert!(matches!(
            ingest_measurements(bad.as_bytes(), FileFormat::Csv),
            Err(GatewayError::BadTimestamp { row: 3, .. })
        ));
    }

    #[test]
    fn unsorted_rows_and_gaps_are_normalised() {
        let text = "Fecha,GHI,Presion,Temperatura Ambiente,Wind Speed,Wind Direction\n\
2022-02-22 06:00:00,5,1003,23,1,10\n\
2022-02-22 05:30:00,1,1003,23,1,10\n";
        let s = ingest_measurements(text.as_bytes(), FileFormat::Csv).unwrap();
        assert_eq!(s.len(), 2);
        let text = format!("{SAMPLE}2022-02-22 06:10:00,1,2,3,4,5\n");
        let s = ingest_measurements(text.as_bytes(), FileFormat::Csv).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.missing_count(Variable::Ghi), 1);
    }

    #[test]
    fn emit_round_trips() {
        let s = ingest_measurements(SAMPLE.as_bytes(), FileFormat::Csv).unwrap();
        let text = emit_measurements(&s);
        assert!(text.starts_with("Fecha,GHI,Presion,Temperatura Ambiente,Wind Speed,Wind Direction\n"));
        assert_eq!(ingest_measurements(text.as_bytes(), FileFormat::Csv).unwrap(), s);
    }

    #[test]
    fn forecast_file_needs_ghi() {
        let s = ingest_ghi_forecast(b"timestamp,GHI\n2024-05-09 10:00:00,800\n2024-05-09 11:00:00,900\n", FileFormat::Csv).unwrap();
        assert_eq!(s.resolution_minutes(), Some(60));
        assert!(ingest_ghi_forecast(b"timestamp,DNI\n2024-05-09 10:00:00,800\n", FileFormat::Csv).is_err());
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(FileFormat::from_path("a/b.XLSX"), Some(FileFormat::Xlsx));
        assert_eq!(FileFormat::from_path("b.csv"), Some(FileFormat::Csv));
        assert_eq!(FileFormat::from_path("b.db"), None);
    }
}
