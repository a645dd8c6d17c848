//! The labeled fingerprint matrix and its CSV form.

use std::collections::{BTreeSet, HashSet};
use std::io::{Read, Write};

use thiserror::Error;

use crate::scalar::Scalar;
use crate::scan::ScanSnapshot;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("snapshot {index} has no location label")]
    UnlabeledSnapshot { index: usize },
    #[error("snapshot {index} lists MAC {mac} twice")]
    DuplicateMac { index: usize, mac: String },
    #[error("duplicate column {0}")]
    DuplicateColumn(String),
    #[error("row {row} has {found} RSSI values, expected {expected}")]
    RowWidth {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: not a number: {text:?}")]
    BadNumber {
        line: u64,
        column: String,
        text: String,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintRow<T> {
    /// dBm per access point, aligned with the dataset's columns; 0 marks "not seen".
    pub rssi: Vec<T>,
    pub x: T,
    pub y: T,
}

/// Row-per-location RSSI matrix keyed by access-point columns, with x/y labels in feet.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintDataset<T> {
    ap_columns: Vec<String>,
    rows: Vec<FingerprintRow<T>>,
}

/// RSSI value stored for an access point that was not observed.
pub const MISSING_RSSI: f64 = 0.0;

impl<T: Scalar> FingerprintDataset<T> {
    pub fn new(ap_columns: Vec<String>, rows: Vec<FingerprintRow<T>>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::new();
        for c in &ap_columns {
            if !seen.insert(c.as_str()) {
                return Err(DatasetError::DuplicateColumn(c.clone()));
            }
        }
        for (row, r) in rows.iter().enumerate() {
            if r.rssi.len() != ap_columns.len() {
                return Err(DatasetError::RowWidth {
                    row,
                    expected: ap_columns.len(),
                    found: r.rssi.len(),
                });
            }
        }
        Ok(Self { ap_columns, rows })
    }

    pub fn empty() -> Self {
        Self {
            ap_columns: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn ap_columns(&self) -> &[String] {
        &self.ap_columns
    }

    pub fn rows(&self) -> &[FingerprintRow<T>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.ap_columns.iter().position(|c| c == name)
    }

    pub fn column(&self, index: usize) -> Vec<T> {
        self.rows.iter().map(|r| r.rssi[index]).collect()
    }

    pub fn xs(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.x).collect()
    }

    pub fn ys(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.y).collect()
    }

    /// Rows at the given indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            ap_columns: self.ap_columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Keeps only the named columns, in the order given.
    /// Fails with the list of names this dataset does not carry.
    pub fn project(&self, columns: &[String]) -> Result<Self, Vec<String>> {
        let mut idx = Vec::with_capacity(columns.len());
        let mut missing = Vec::new();
        for c in columns {
            match self.column_index(c) {
                Some(i) => idx.push(i),
                None => missing.push(c.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(missing);
        }
        let rows = self
            .rows
            .iter()
            .map(|r| FingerprintRow {
                rssi: idx.iter().map(|&i| r.rssi[i]).collect(),
                x: r.x,
                y: r.y,
            })
            .collect();
        Ok(Self {
            ap_columns: columns.to_vec(),
            rows,
        })
    }

    /// Writes the header (`<columns...>,x,y`) and one line per row.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), DatasetError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
        let mut header: Vec<&str> = self.ap_columns.iter().map(String::as_str).collect();
        header.extend(["x", "y"]);
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec: Vec<String> = r.rssi.iter().map(|v| v.to_string()).collect();
            rec.push(r.x.to_string());
            rec.push(r.y.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(source);
        let mut records = rdr.records();
        let header = match records.next() {
            Some(h) => h?,
            None => return Err(DatasetError::SchemaMismatch("missing header row".into())),
        };
        let names: Vec<String> = header.iter().map(str::to_string).collect();
        let n = names.len();
        if n < 2 || names[n - 2] != "x" || names[n - 1] != "y" {
            return Err(DatasetError::SchemaMismatch(
                "last two header columns must be x,y".into(),
            ));
        }
        let ap_columns = names[..n - 2].to_vec();
        if ap_columns.iter().any(|c| c == "x" || c == "y") {
            return Err(DatasetError::SchemaMismatch("x/y appear more than once".into()));
        }
        let mut rows = Vec::new();
        for rec in records {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != n {
                return Err(DatasetError::RaggedRow {
                    line,
                    expected: n,
                    found: rec.len(),
                });
            }
            let mut values = Vec::with_capacity(n);
            for (i, cell) in rec.iter().enumerate() {
                let v: T = cell.parse().map_err(|_| DatasetError::BadNumber {
                    line,
                    column: names[i].clone(),
                    text: cell.to_string(),
                })?;
                values.push(v);
            }
            let y = values.pop().unwrap();
            let x = values.pop().unwrap();
            rows.push(FingerprintRow { rssi: values, x, y });
        }
        Self::new(ap_columns, rows)
    }
}

/// Builds the fingerprint matrix from labeled snapshots.
///
/// Columns are the sorted union of all MACs; an access point missing from a
/// snapshot is stored as 0.
pub fn build_dataset<T: Scalar>(
    samples: &[ScanSnapshot<T>],
) -> Result<FingerprintDataset<T>, DatasetError> {
    let mut universe = BTreeSet::new();
    for (index, s) in samples.iter().enumerate() {
        if s.location.is_none() {
            return Err(DatasetError::UnlabeledSnapshot { index });
        }
        if let Some(mac) = s.duplicate_mac() {
            return Err(DatasetError::DuplicateMac {
                index,
                mac: mac.to_string(),
            });
        }
        universe.extend(s.entries.iter().map(|e| e.mac.as_str()));
    }
    let ap_columns: Vec<String> = universe.into_iter().map(str::to_string).collect();
    let missing = T::lit(MISSING_RSSI);
    let rows = samples
        .iter()
        .map(|s| {
            let loc = s.location.expect("checked above");
            let mut rssi = vec![missing; ap_columns.len()];
            for e in &s.entries {
                let i = ap_columns.binary_search(&e.mac).expect("mac in universe");
                rssi[i] = T::lit(f64::from(e.rssi));
            }
            FingerprintRow {
                rssi,
                x: loc.x,
                y: loc.y,
            }
        })
        .collect();
    FingerprintDataset::new(ap_columns, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::scan::ScanEntry;

    const A: &str = "00:00:00:00:00:0A";
    const B: &str = "00:00:00:00:00:0B";

    fn labeled(entries: &[(&str, i32)], x: f64, y: f64) -> ScanSnapshot<f64> {
        ScanSnapshot::new(
            entries
                .iter()
                .map(|(m, r)| ScanEntry::new(m, "CSU Net", *r).unwrap())
                .collect(),
            Some(Point::new(x, y)),
        )
    }

    #[test]
    fn missing_access_points_become_zero() {
        let d = build_dataset(&[labeled(&[(A, -50)], 0.0, 0.0), labeled(&[(B, -60), (A, -55)], 1.0, 0.0)])
            .unwrap();
        assert_eq!(d.ap_columns(), &[A.to_string(), B.to_string()]);
        assert_eq!(d.rows()[0].rssi, vec![-50.0, 0.0]);
        assert_eq!(d.rows()[1].rssi, vec![-55.0, -60.0]);
    }

    #[test]
    fn empty_samples_give_empty_dataset() {
        let d = build_dataset::<f64>(&[]).unwrap();
        assert!(d.ap_columns().is_empty());
        assert!(d.is_empty());
    }

    #[test]
    fn full_sample_is_its_own_row() {
        let d = build_dataset(&[labeled(&[(B, -61), (A, -40)], 2.5, 3.5)]).unwrap();
        assert_eq!(d.rows()[0], FingerprintRow { rssi: vec![-40.0, -61.0], x: 2.5, y: 3.5 });
    }

    #[test]
    fn unlabeled_snapshot_rejected() {
        let s = ScanSnapshot::<f64>::new(vec![], None);
        assert!(matches!(
            build_dataset(&[s]),
            Err(DatasetError::UnlabeledSnapshot { index: 0 })
        ));
    }

    #[test]
    fn read_simple_csv() {
        let d = FingerprintDataset::<f64>::read_csv("A,B,x,y\n-50,0,3,7\n".as_bytes()).unwrap();
        assert_eq!(d.ap_columns(), &["A".to_string(), "B".to_string()]);
        assert_eq!(d.rows(), &[FingerprintRow { rssi: vec![-50.0, 0.0], x: 3.0, y: 7.0 }]);
    }

    #[test]
    fn header_without_y_is_schema_mismatch() {
        let err = FingerprintDataset::<f64>::read_csv("A,B,x\n-50,0,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::SchemaMismatch(_)));
        let err = FingerprintDataset::<f64>::read_csv("".as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::SchemaMismatch(_)));
    }

    #[test]
    fn ragged_row_rejected() {
        let err = FingerprintDataset::<f64>::read_csv("A,x,y\n-50,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::RaggedRow { line: 2, expected: 3, found: 2 }));
    }

    #[test]
    fn csv_round_trip_preserves_bits() {
        let d = FingerprintDataset::new(
            vec![A.into(), B.into()],
            vec![FingerprintRow { rssi: vec![-50.125, 0.1 + 0.2], x: 1.0 / 3.0, y: 7.0 }],
        )
        .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(FingerprintDataset::read_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn project_reports_missing_columns() {
        let d = build_dataset(&[labeled(&[(A, -50), (B, -40)], 0.0, 0.0)]).unwrap();
        let p = d.project(&[B.to_string()]).unwrap();
        assert_eq!(p.rows()[0].rssi, vec![-40.0]);
        assert_eq!(d.project(&["ZZ".to_string()]).unwrap_err(), vec!["ZZ".to_string()]);
    }
}
