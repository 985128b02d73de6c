use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const FEATURE_COUNT: usize = 5;

/// Raw design vector in physical units.
pub type Design = [f64; FEATURE_COUNT];

/// Column order of the NASA airfoil self-noise distribution.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "frequency_hz",
    "angle_of_attack_deg",
    "chord_length_m",
    "free_stream_velocity_m_per_s",
    "suction_side_displacement_thickness_m",
];

pub const TARGET_NAME: &str = "sound_pressure_level_db";

/// One measurement: a design and its scaled sound pressure level in dB.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub x: Design,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    records: Vec<DesignRecord>,
    feature_names: [String; FEATURE_COUNT],
}

impl Dataset {
    pub fn new(records: Vec<DesignRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(row) = records
            .iter()
            .position(|r| !r.y.is_finite() || r.x.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Parse {
                row: row + 1,
                message: "non-finite value".into(),
            });
        }
        Ok(Self {
            records,
            feature_names: FEATURE_NAMES.map(String::from),
        })
    }

    pub fn records(&self) -> &[DesignRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature_names(&self) -> &[String; FEATURE_COUNT] {
        &self.feature_names
    }

    pub fn designs(&self) -> Vec<Design> {
        self.records.iter().map(|r| r.x).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y).collect()
    }

    /// Raw feature values of one column.
    pub fn feature_column(&self, j: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.x[j]).collect()
    }

    pub fn feature_matrix(&self) -> Matrix {
        Matrix::from_rows(&self.designs()).expect("fixed-width rows")
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        Dataset::new(indices.iter().map(|&i| self.records[i]).collect())
    }
}

/// On-disk layout of a dataset or design table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// Whitespace or tab separated columns, as distributed by NASA/UCI.
    #[default]
    Whitespace,
    Csv,
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "whitespace" | "tsv" | "dat" | "tab" => Ok(DataFormat::Whitespace),
            "csv" => Ok(DataFormat::Csv),
            other => Err(Error::InvalidConfig(format!(
                "unknown data format `{other}`"
            ))),
        }
    }
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataFormat::Whitespace => f.write_str("whitespace"),
            DataFormat::Csv => f.write_str("csv"),
        }
    }
}

/// Parses a numeric table with a fixed column count.
///
/// Blank lines and lines starting with `#` are skipped. A CSV file may start with a header
/// row whose cells are all non-numeric. Row numbers in errors are 1-based line numbers.
pub fn read_table<R: Read>(reader: R, format: DataFormat, columns: usize) -> Result<Vec<Vec<f64>>> {
    let rows = match format {
        DataFormat::Whitespace => read_whitespace(reader, columns)?,
        DataFormat::Csv => read_csv(reader, columns)?,
    };
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(rows)
}

fn parse_row<'a>(
    cells: impl Iterator<Item = &'a str>,
    columns: usize,
    row: usize,
) -> Result<Vec<f64>> {
    let cells: Vec<&str> = cells.collect();
    if cells.len() != columns {
        return Err(Error::Parse {
            row,
            message: format!("expected {columns} columns, found {}", cells.len()),
        });
    }
    cells
        .iter()
        .enumerate()
        .map(|(col, cell)| {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                message: format!("column {}: `{cell}` is not a number", col + 1),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse {
                    row,
                    message: format!("column {}: non-finite value", col + 1),
                })
            }
        })
        .collect()
}

fn read_whitespace<R: Read>(reader: R, columns: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            row: i + 1,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        rows.push(parse_row(trimmed.split_whitespace(), columns, i + 1)?);
    }
    Ok(rows)
}

fn read_csv<R: Read>(reader: R, columns: usize) -> Result<Vec<Vec<f64>>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row: i + 1,
            message: e.to_string(),
        })?;
        let row = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if rows.is_empty() && i == 0 && record.iter().all(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        rows.push(parse_row(record.iter(), columns, row)?);
    }
    Ok(rows)
}

pub fn parse_dataset<R: Read>(reader: R, format: DataFormat) -> Result<Dataset> {
    let rows = read_table(reader, format, FEATURE_COUNT + 1)?;
    let records = rows
        .into_iter()
        .map(|r| DesignRecord {
            x: [r[0], r[1], r[2], r[3], r[4]],
            y: r[5],
        })
        .collect();
    Dataset::new(records)
}

/// Reads a dataset file with five feature columns followed by the target column.
pub fn load_dataset(path: impl AsRef<Path>, format: DataFormat) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(file, format)
}

/// Writes rows as delimited text. `f64` values use the shortest exact representation.
pub fn write_table<W: Write>(
    mut writer: W,
    format: DataFormat,
    header: Option<&[&str]>,
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> std::io::Result<()> {
    let sep = match format {
        DataFormat::Whitespace => "\t",
        DataFormat::Csv => ",",
    };
    if let Some(h) = header {
        writeln!(writer, "# {}", h.join(sep))?;
    }
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(writer, "{}", cells.join(sep))?;
    }
    Ok(())
}

pub fn write_dataset<W: Write>(writer: W, ds: &Dataset, format: DataFormat) -> std::io::Result<()> {
    write_table(
        writer,
        format,
        None,
        ds.records().iter().map(|r| {
            let mut row = r.x.to_vec();
            row.push(r.y);
            row
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "800\t0\t0.3048\t71.3\t0.00266337\t126.201\n\
                           1000\t0\t0.3048\t71.3\t0.00266337\t125.201\n\
                           \n\
                           1250 1.5 0.2286 39.6 0.00392107 127.591\n";

    #[test]
    fn parses_fixture_exactly() {
        let ds = parse_dataset(FIXTURE.as_bytes(), DataFormat::Whitespace).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.records()[0].x, [800.0, 0.0, 0.3048, 71.3, 0.00266337]);
        assert_eq!(ds.records()[1].y, 125.201);
        assert_eq!(ds.records()[2].x[3], 39.6);
        assert_eq!(ds.records()[2].y, 127.591);
    }

    #[test]
    fn csv_with_header_parses() {
        let text = "f,a,c,u,t,spl\n800,0,0.3048,71.3,0.00266337,126.201\n";
        let ds = parse_dataset(text.as_bytes(), DataFormat::Csv).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.records()[0].y, 126.201);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            parse_dataset("".as_bytes(), DataFormat::Whitespace),
            Err(Error::EmptyDataset)
        ));
        assert!(matches!(
            parse_dataset("\n# only a comment\n".as_bytes(), DataFormat::Csv),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn wrong_column_count_reports_row() {
        let text = "1 2 3 4 5 6\n1 2 3 4 5\n";
        match parse_dataset(text.as_bytes(), DataFormat::Whitespace) {
            Err(Error::Parse { row, message }) => {
                assert_eq!(row, 2);
                assert!(message.contains("expected 6"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_is_reported() {
        let text = "1,2,3,4,5,6\n1,2,x,4,5,6\n";
        match parse_dataset(text.as_bytes(), DataFormat::Csv) {
            Err(Error::Parse { row, message }) => {
                assert_eq!(row, 2);
                assert!(message.contains("column 3"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_dataset("/definitely/not/here.dat", DataFormat::Whitespace),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn written_dataset_reads_back_identically() {
        let ds = parse_dataset(FIXTURE.as_bytes(), DataFormat::Whitespace).unwrap();
        for format in [DataFormat::Whitespace, DataFormat::Csv] {
            let mut buf = Vec::new();
            write_dataset(&mut buf, &ds, format).unwrap();
            assert_eq!(parse_dataset(buf.as_slice(), format).unwrap(), ds);
        }
    }
}
