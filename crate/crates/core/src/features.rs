//! Correlation-based feature selection, train/test splitting and min-max normalization.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::FingerprintDataset;
use crate::geometry::Point;
use crate::scalar::Scalar;

/// Correlation threshold used by default when selecting access-point columns.
pub const DEFAULT_PCC_THRESHOLD: f64 = 0.24;
pub const DEFAULT_TRAIN_RATIO: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("split ratio must lie in (0, 1), got {0}")]
    BadRatio(String),
    #[error("feature vector has {found} values, expected {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("sidecar: {0}")]
    Sidecar(String),
}

/// Pearson correlation coefficient. A constant input yields 0.
pub fn pearson<T: Scalar>(a: &[T], b: &[T]) -> Result<T, FeatureError> {
    if a.len() != b.len() {
        return Err(FeatureError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(FeatureError::TooFewSamples(a.len()));
    }
    let n = T::from_usize_lossy(a.len());
    let ma = a.iter().copied().sum::<T>() / n;
    let mb = b.iter().copied().sum::<T>() / n;
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == T::zero() || sbb == T::zero() {
        return Ok(T::zero());
    }
    // sqrt(s * s) == s exactly, so identical inputs give exactly 1
    let r = sab / (saa * sbb).sqrt();
    Ok(r.max(-T::one()).min(T::one()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSelection<T> {
    /// Kept access-point columns, in source order.
    pub kept_columns: Vec<String>,
    pub pcc_x: BTreeMap<String, T>,
    pub pcc_y: BTreeMap<String, T>,
    pub threshold: T,
    /// Source column order, kept or not.
    pub source_columns: Vec<String>,
}

impl<T: Scalar> FeatureSelection<T> {
    pub fn is_kept(&self, column: &str) -> bool {
        self.kept_columns.iter().any(|c| c == column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SelectOptions<T> {
    /// Drop columns where fewer than this fraction of rows saw the AP
    /// (a nonzero reading) before applying the correlation test.
    pub min_coverage: Option<T>,
}

/// Keeps each non-constant column whose |PCC| with x or with y reaches `threshold`.
pub fn select_features<T: Scalar>(
    dataset: &FingerprintDataset<T>,
    threshold: T,
) -> Result<FeatureSelection<T>, FeatureError> {
    select_features_with(dataset, threshold, SelectOptions::default())
}

pub fn select_features_with<T: Scalar>(
    dataset: &FingerprintDataset<T>,
    threshold: T,
    options: SelectOptions<T>,
) -> Result<FeatureSelection<T>, FeatureError> {
    if dataset.len() < 2 {
        return Err(FeatureError::TooFewSamples(dataset.len()));
    }
    let xs = dataset.xs();
    let ys = dataset.ys();
    let n = T::from_usize_lossy(dataset.len());
    let mut sel = FeatureSelection {
        kept_columns: Vec::new(),
        pcc_x: BTreeMap::new(),
        pcc_y: BTreeMap::new(),
        threshold,
        source_columns: dataset.ap_columns().to_vec(),
    };
    for (i, name) in dataset.ap_columns().iter().enumerate() {
        let col = dataset.column(i);
        let rx = pearson(&col, &xs)?;
        let ry = pearson(&col, &ys)?;
        sel.pcc_x.insert(name.clone(), rx);
        sel.pcc_y.insert(name.clone(), ry);
        let covered = match options.min_coverage {
            Some(min) => {
                let seen = col.iter().filter(|v| **v != T::zero()).count();
                T::from_usize_lossy(seen) / n >= min
            }
            None => true,
        };
        // A column without variation carries no position information, whatever the threshold.
        let constant = col.iter().all(|v| *v == col[0]);
        if !constant && covered && (rx.abs() >= threshold || ry.abs() >= threshold) {
            sel.kept_columns.push(name.clone());
        }
    }
    Ok(sel)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset<T> {
    pub train: FingerprintDataset<T>,
    pub test: FingerprintDataset<T>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub ratio: f64,
}

/// `round(ratio * n)` with halves rounded up.
pub fn split_count(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64 + 0.5).floor() as usize).min(n)
}

/// Seeded shuffle of `0..n`.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Seeded shuffle, then the first `round(ratio * N)` rows go to train.
pub fn split<T: Scalar>(
    dataset: &FingerprintDataset<T>,
    ratio: f64,
    seed: u64,
) -> Result<SplitDataset<T>, FeatureError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(FeatureError::BadRatio(ratio.to_string()));
    }
    if dataset.is_empty() {
        return Err(FeatureError::EmptyDataset);
    }
    let idx = shuffled_indices(dataset.len(), seed);
    let cut = split_count(dataset.len(), ratio);
    let (tr, te) = idx.split_at(cut);
    Ok(SplitDataset {
        train: dataset.subset(tr),
        test: dataset.subset(te),
        train_indices: tr.to_vec(),
        test_indices: te.to_vec(),
        seed,
        ratio,
    })
}

/// Min-max feature scaling plus one shared length scale for both coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationParams<T> {
    pub feature_min: Vec<T>,
    pub feature_max: Vec<T>,
    pub origin: Point<T>,
    /// Feet per normalized unit, on both axes.
    pub extent: T,
}

impl<T: Scalar> NormalizationParams<T> {
    /// Fits on training rows. `extent` is the larger of the x and y label
    /// spans; a dataset with a single location gets extent 1.
    pub fn fit(train: &FingerprintDataset<T>) -> Result<Self, FeatureError> {
        if train.is_empty() {
            return Err(FeatureError::EmptyDataset);
        }
        let width = train.ap_columns().len();
        let mut feature_min = vec![T::infinity(); width];
        let mut feature_max = vec![T::neg_infinity(); width];
        let (mut x0, mut x1) = (T::infinity(), T::neg_infinity());
        let (mut y0, mut y1) = (T::infinity(), T::neg_infinity());
        for r in train.rows() {
            for (j, &v) in r.rssi.iter().enumerate() {
                feature_min[j] = feature_min[j].min(v);
                feature_max[j] = feature_max[j].max(v);
            }
            x0 = x0.min(r.x);
            x1 = x1.max(r.x);
            y0 = y0.min(r.y);
            y1 = y1.max(r.y);
        }
        let span = (x1 - x0).max(y1 - y0);
        let extent = if span > T::zero() { span } else { T::one() };
        Ok(Self {
            feature_min,
            feature_max,
            origin: Point::new(x0, y0),
            extent,
        })
    }

    pub fn width(&self) -> usize {
        self.feature_min.len()
    }

    fn check_width(&self, n: usize) -> Result<(), FeatureError> {
        if n != self.width() {
            return Err(FeatureError::WidthMismatch {
                expected: self.width(),
                found: n,
            });
        }
        Ok(())
    }

    /// Maps each column's training min to 0 and max to 1; constant columns map to 0.
    pub fn normalize_features(&self, raw: &[T]) -> Result<Vec<T>, FeatureError> {
        self.check_width(raw.len())?;
        Ok(raw
            .iter()
            .zip(self.feature_min.iter().zip(&self.feature_max))
            .map(|(&v, (&lo, &hi))| {
                let span = hi - lo;
                if span > T::zero() {
                    (v - lo) / span
                } else {
                    T::zero()
                }
            })
            .collect())
    }

    pub fn denormalize_features(&self, scaled: &[T]) -> Result<Vec<T>, FeatureError> {
        self.check_width(scaled.len())?;
        Ok(scaled
            .iter()
            .zip(self.feature_min.iter().zip(&self.feature_max))
            .map(|(&u, (&lo, &hi))| lo + u * (hi - lo))
            .collect())
    }

    pub fn normalize_point(&self, p: Point<T>) -> Point<T> {
        Point::new((p.x - self.origin.x) / self.extent, (p.y - self.origin.y) / self.extent)
    }

    pub fn denormalize_point(&self, p: Point<T>) -> Point<T> {
        Point::new(p.x * self.extent + self.origin.x, p.y * self.extent + self.origin.y)
    }

    /// Converts an error measured in normalized units into feet.
    pub fn error_to_feet(&self, normalized: T) -> T {
        normalized * self.extent
    }
}

/// Feature selection and normalization stored next to (or inside) a model file.
///
/// Text layout:
///
/// ```text
/// # rssinav sidecar v1
/// threshold = 0.24
/// origin_x = 0.5
/// origin_y = 0.5
/// extent = 12
/// meta.<key> = <value>          (optional, any number)
/// column,pcc_x,pcc_y,kept,min,max
/// AA:BB:CC:DD:EE:01,0.91,-0.2,1,-71,-43
/// AA:BB:CC:DD:EE:02,0.01,0.03,0,,
/// ```
///
/// `min`/`max` are only present for kept columns; the CSV block lists every
/// source column in source order.
#[derive(Debug, Clone, PartialEq)]
pub struct Sidecar<T> {
    pub selection: FeatureSelection<T>,
    pub normalization: NormalizationParams<T>,
    pub meta: BTreeMap<String, String>,
}

const SIDECAR_MAGIC: &str = "# rssinav sidecar v1";
const STATS_HEADER: &str = "column,pcc_x,pcc_y,kept,min,max";

impl<T: Scalar> Sidecar<T> {
    pub fn new(selection: FeatureSelection<T>, normalization: NormalizationParams<T>) -> Self {
        Self {
            selection,
            normalization,
            meta: BTreeMap::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let s = &self.selection;
        let n = &self.normalization;
        let mut out = String::new();
        let _ = writeln!(out, "{SIDECAR_MAGIC}");
        let _ = writeln!(out, "threshold = {}", s.threshold);
        let _ = writeln!(out, "origin_x = {}", n.origin.x);
        let _ = writeln!(out, "origin_y = {}", n.origin.y);
        let _ = writeln!(out, "extent = {}", n.extent);
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta.{k} = {v}");
        }
        let _ = writeln!(out, "{STATS_HEADER}");
        for col in &s.source_columns {
            let px = s.pcc_x.get(col).copied().unwrap_or_else(T::zero);
            let py = s.pcc_y.get(col).copied().unwrap_or_else(T::zero);
            match s.kept_columns.iter().position(|c| c == col) {
                Some(k) => {
                    let _ = writeln!(
                        out,
                        "{col},{px},{py},1,{},{}",
                        n.feature_min[k], n.feature_max[k]
                    );
                }
                None => {
                    let _ = writeln!(out, "{col},{px},{py},0,,");
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, FeatureError> {
        let bad = |m: String| FeatureError::Sidecar(m);
        let num = |key: &str, v: &str| -> Result<T, FeatureError> {
            v.trim()
                .parse::<T>()
                .map_err(|_| FeatureError::Sidecar(format!("{key}: not a number: {v:?}")))
        };
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(SIDECAR_MAGIC) {
            return Err(bad("missing sidecar header".into()));
        }
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        let mut saw_stats = false;
        for line in lines.by_ref() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line == STATS_HEADER {
                saw_stats = true;
                break;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key = value, got {line:?}")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        if !saw_stats {
            return Err(bad("missing column statistics block".into()));
        }
        let mut take = |k: &str| kv.remove(k).ok_or_else(|| bad(format!("missing key {k}")));
        let threshold = num("threshold", &take("threshold")?)?;
        let ox = num("origin_x", &take("origin_x")?)?;
        let oy = num("origin_y", &take("origin_y")?)?;
        let extent = num("extent", &take("extent")?)?;
        if !(extent > T::zero()) {
            return Err(bad("extent must be positive".into()));
        }
        let mut meta = BTreeMap::new();
        for (k, v) in kv {
            match k.strip_prefix("meta.") {
                Some(m) => {
                    meta.insert(m.to_string(), v);
                }
                None => return Err(bad(format!("unknown key {k}"))),
            }
        }

        let mut selection = FeatureSelection {
            kept_columns: Vec::new(),
            pcc_x: BTreeMap::new(),
            pcc_y: BTreeMap::new(),
            threshold,
            source_columns: Vec::new(),
        };
        let mut feature_min = Vec::new();
        let mut feature_max = Vec::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad(format!("stats row needs 6 fields: {line:?}")));
            }
            let col = f[0].to_string();
            selection.pcc_x.insert(col.clone(), num("pcc_x", f[1])?);
            selection.pcc_y.insert(col.clone(), num("pcc_y", f[2])?);
            match f[3] {
                "1" => {
                    let lo = num("min", f[4])?;
                    let hi = num("max", f[5])?;
                    if hi < lo {
                        return Err(bad(format!("{col}: max < min")));
                    }
                    feature_min.push(lo);
                    feature_max.push(hi);
                    selection.kept_columns.push(col.clone());
                }
                "0" => {}
                other => return Err(bad(format!("kept flag must be 0 or 1, got {other:?}"))),
            }
            selection.source_columns.push(col);
        }
        Ok(Self {
            selection,
            normalization: NormalizationParams {
                feature_min,
                feature_max,
                origin: Point::new(ox, oy),
                extent,
            },
            meta,
        })
    }
}
