use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VeError};
use crate::numeric::RealMatrix;

/// Aligned `T × C` observations plus the labels needed to write them back out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesDataset {
    pub name: String,
    pub values: RealMatrix,
    pub channel_names: Vec<String>,
    pub granularity: String,
    /// Raw timestamp text of each row; empty when rows were synthesized.
    #[serde(default)]
    pub timestamps: Vec<String>,
}

impl TimeSeriesDataset {
    pub fn new(name: impl Into<String>, values: RealMatrix, channel_names: Vec<String>) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(VeError::InsufficientData("dataset must have at least one row and one channel".into()));
        }
        if channel_names.len() != values.cols() {
            return Err(VeError::shape(format!(
                "{} channel names for {} channels",
                channel_names.len(),
                values.cols()
            )));
        }
        Ok(Self {
            name: name.into(),
            values,
            channel_names,
            granularity: "unknown".into(),
            timestamps: Vec::new(),
        })
    }

    /// Builds a dataset with generated channel names `v0, v1, ...`.
    pub fn unnamed(name: impl Into<String>, values: RealMatrix) -> Result<Self> {
        let names = (0..values.cols()).map(|c| format!("v{c}")).collect();
        Self::new(name, values, names)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.values.cols()
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        (0..self.len()).map(|t| self.values.get(t, c)).collect()
    }

    /// Contiguous row range, keeping channel metadata. May be empty.
    pub fn slice_rows(&self, range: Range<usize>) -> Self {
        let c = self.channels();
        let data = self.values.as_slice()[range.start * c..range.end * c].to_vec();
        let timestamps = if self.timestamps.len() == self.len() {
            self.timestamps[range.clone()].to_vec()
        } else {
            Vec::new()
        };
        Self {
            name: self.name.clone(),
            values: RealMatrix::from_vec(range.len(), c, data).expect("row slice"),
            channel_names: self.channel_names.clone(),
            granularity: self.granularity.clone(),
            timestamps,
        }
    }

    pub fn select_channels(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.channels()) {
            return Err(VeError::Index(format!("channel {bad} of {}", self.channels())));
        }
        let values = RealMatrix::from_fn(self.len(), indices.len(), |t, j| self.values.get(t, indices[j]));
        Ok(Self {
            name: self.name.clone(),
            values,
            channel_names: indices.iter().map(|&i| self.channel_names[i].clone()).collect(),
            granularity: self.granularity.clone(),
            timestamps: self.timestamps.clone(),
        })
    }

    /// Stacks rows of `other` below `self`; channel layouts must agree.
    pub fn concat_rows(&self, other: &Self) -> Result<Self> {
        if self.channels() != other.channels() {
            return Err(VeError::shape("row concatenation needs equal channel counts"));
        }
        let mut data = self.values.as_slice().to_vec();
        data.extend_from_slice(other.values.as_slice());
        let timestamps = if self.timestamps.len() == self.len() && other.timestamps.len() == other.len() {
            self.timestamps.iter().chain(&other.timestamps).cloned().collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            name: self.name.clone(),
            values: RealMatrix::from_vec(self.len() + other.len(), self.channels(), data)?,
            channel_names: self.channel_names.clone(),
            granularity: self.granularity.clone(),
            timestamps,
        })
    }

    /// Side-by-side channel concatenation of row-aligned datasets.
    pub fn concat_channels(name: impl Into<String>, parts: &[&Self]) -> Result<Self> {
        let rows = parts.first().map_or(0, |p| p.len());
        if parts.iter().any(|p| p.len() != rows) {
            return Err(VeError::shape("channel concatenation needs equal row counts"));
        }
        let total: usize = parts.iter().map(|p| p.channels()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for t in 0..rows {
            for p in parts {
                data.extend_from_slice(p.values.row(t));
            }
        }
        let names = parts
            .iter()
            .flat_map(|p| p.channel_names.iter().map(move |n| format!("{}/{}", p.name, n)))
            .collect();
        let mut out = Self::new(name, RealMatrix::from_vec(rows, total, data)?, names)?;
        out.granularity = parts.first().map(|p| p.granularity.clone()).unwrap_or_default();
        out.timestamps = parts.first().map(|p| p.timestamps.clone()).unwrap_or_default();
        Ok(out)
    }

    /// Writes `date,<channels...>` CSV; rows without timestamps get their index.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| VeError::io(format!("create {}", path.display()), e))?;
        let mut w = BufWriter::new(file);
        let io = |e| VeError::io(format!("write {}", path.display()), e);
        write!(w, "date").map_err(io)?;
        for n in &self.channel_names {
            write!(w, ",{n}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        for t in 0..self.len() {
            match self.timestamps.get(t) {
                Some(ts) if self.timestamps.len() == self.len() => write!(w, "{ts}").map_err(io)?,
                _ => write!(w, "{t}").map_err(io)?,
            }
            for &v in self.values.row(t) {
                write!(w, ",{v}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Reads a CSV whose first column is a timestamp and remaining columns are numeric.
pub fn load_csv(path: impl AsRef<Path>) -> Result<TimeSeriesDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| VeError::io(format!("open {}", path.display()), e))?;
    let parse_err = |row: usize, column: usize, message: String| VeError::Parse {
        path: path.to_path_buf(),
        row,
        column,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| parse_err(1, 0, e.to_string()))?
        .clone();
    if header.len() < 2 {
        return Err(parse_err(1, 0, "need a timestamp column and at least one value column".into()));
    }
    let channel_names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let width = channel_names.len();

    let mut values = Vec::new();
    let mut timestamps = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_err(line, 0, e.to_string()))?;
        if record.len() != width + 1 {
            return Err(parse_err(
                line,
                record.len(),
                format!("expected {} fields, found {}", width + 1, record.len()),
            ));
        }
        timestamps.push(record[0].to_string());
        for (j, cell) in record.iter().enumerate().skip(1) {
            let cell = cell.trim();
            if cell.is_empty() {
                return Err(parse_err(line, j + 1, "missing value".into()));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, j + 1, format!("not a number: {cell:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line, j + 1, format!("non-finite value {cell:?}")));
            }
            values.push(v);
        }
    }
    let rows = timestamps.len();
    if rows == 0 {
        return Err(parse_err(2, 0, "no data rows".into()));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let mut ds = TimeSeriesDataset::new(name, RealMatrix::from_vec(rows, width, values)?, channel_names)?;
    ds.granularity = infer_granularity(&timestamps);
    ds.timestamps = timestamps;
    Ok(ds)
}

/// Minutes since 1970-01-01 for `YYYY-MM-DD hh:mm[:ss]`-like text.
fn timestamp_minutes(ts: &str) -> Option<i64> {
    let nums: Vec<i64> = ts
        .split(|c: char| !c.is_ascii_digit())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().ok())
        .collect::<Option<_>>()?;
    if nums.len() < 3 {
        return None;
    }
    let (y, m, d) = (nums[0], nums[1], nums[2]);
    if !(1..=12).contains(&m) || !(1..=31).contains(&d) {
        return None;
    }
    // days_from_civil
    let y = if m <= 2 { y - 1 } else { y };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    let days = era * 146_097 + doe - 719_468;
    let h = nums.get(3).copied().unwrap_or(0);
    let min = nums.get(4).copied().unwrap_or(0);
    Some(days * 1440 + h * 60 + min)
}

fn infer_granularity(timestamps: &[String]) -> String {
    let step = match (timestamps.first(), timestamps.get(1)) {
        (Some(a), Some(b)) => timestamp_minutes(b).zip(timestamp_minutes(a)).map(|(b, a)| b - a),
        _ => None,
    };
    match step {
        Some(m) if m > 0 && m % 1440 == 0 => format!("{}day", m / 1440),
        Some(m) if m > 0 && m % 60 == 0 => format!("{}hour", m / 60),
        Some(m) if m > 0 => format!("{m}min"),
        _ => "unknown".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn minimal_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "toy.csv", "date,a,b\n2016-07-01 00:00:00,1,2\n2016-07-01 01:00:00,3.5,-4e-1\n");
        let ds = load_csv(&p).unwrap();
        assert_eq!(ds.values.shape(), (2, 2));
        assert_eq!(ds.channel_names, vec!["a", "b"]);
        assert_eq!(ds.values.as_slice(), &[1.0, 2.0, 3.5, -0.4]);
        assert_eq!(ds.granularity, "1hour");
        assert_eq!(ds.name, "toy");
    }

    #[test]
    fn ten_minute_granularity() {
        assert_eq!(
            infer_granularity(&["2020-01-01 00:10:00".into(), "2020-01-01 00:20:00".into()]),
            "10min"
        );
        assert_eq!(infer_granularity(&["x".into(), "y".into()]), "unknown");
    }

    #[test]
    fn non_numeric_cell_reports_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "bad.csv", "date,a,b\nt0,1,2\nt1,3,oops\n");
        match load_csv(&p).unwrap_err() {
            VeError::Parse { row, column, .. } => assert_eq!((row, column), (3, 3)),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn ragged_and_missing_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "ragged.csv", "date,a,b\nt0,1,2\nt1,3\n");
        assert!(matches!(load_csv(&p), Err(VeError::Parse { row: 3, .. })));
        let p = write(&dir, "missing.csv", "date,a,b\nt0,1,\n");
        assert!(matches!(load_csv(&p), Err(VeError::Parse { row: 2, column: 3, .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_csv("/nonexistent/x.csv"), Err(VeError::Io { .. })));
    }

    #[test]
    fn write_then_read_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let values = RealMatrix::from_vec(3, 2, vec![0.1, 1e-17, 2.0 / 3.0, -5.0, 1e300, 7.25]).unwrap();
        let ds = TimeSeriesDataset::unnamed("w", values.clone()).unwrap();
        let p = dir.path().join("w.csv");
        ds.write_csv(&p).unwrap();
        let back = load_csv(&p).unwrap();
        assert_eq!(back.values, values);
        assert_eq!(back.channel_names, ds.channel_names);
    }
}
