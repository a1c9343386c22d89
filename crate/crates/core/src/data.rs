//! LIBSVM ingestion and the deterministic half/half train-test split.
//!
//! Features are stored densely in row-major order: every dataset handled here
//! has at most a few hundred features, and the solvers only ever touch whole
//! sample rows.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Binary-labelled samples with dense features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<f64>,
    n: usize,
    d: usize,
}

impl Dataset {
    /// Builds a dataset from row-major features and ±1 labels.
    pub fn new(features: Vec<f64>, labels: Vec<f64>, d: usize) -> Result<Self> {
        let n = labels.len();
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!(
                "dataset needs n >= 1 and d >= 1, got n={n}, d={d}"
            )));
        }
        if features.len() != n * d {
            return Err(Error::Dimension(format!(
                "{} feature values for {n}x{d} dataset",
                features.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&b| b != 1.0 && b != -1.0) {
            return Err(Error::InvalidInput(format!("label {bad} is not +1 or -1")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        Ok(Self {
            features,
            labels,
            n,
            d,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Feature row `a_i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    /// Label `b_i` in {-1, +1}.
    #[inline]
    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Copies the listed rows, in order, into a new dataset.
    pub fn select(&self, rows: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(rows.len() * self.d);
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            if i >= self.n {
                return Err(Error::InvalidInput(format!(
                    "row {i} out of range for n={}",
                    self.n
                )));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset::new(features, labels, self.d)
    }

    /// Scales every feature column by its maximum absolute value. Columns
    /// that are identically zero are left untouched.
    pub fn max_abs_scaled(&self) -> Dataset {
        let mut scale = vec![0.0f64; self.d];
        for i in 0..self.n {
            for (s, v) in scale.iter_mut().zip(self.row(i)) {
                *s = s.max(v.abs());
            }
        }
        let mut features = self.features.clone();
        for row in features.chunks_mut(self.d) {
            for (v, &s) in row.iter_mut().zip(&scale) {
                if s > 0.0 {
                    *v /= s;
                }
            }
        }
        Dataset {
            features,
            labels: self.labels.clone(),
            n: self.n,
            d: self.d,
        }
    }

    /// Serializes to LIBSVM text, writing only nonzero entries. Values use the
    /// shortest round-trip representation so reparsing is exact.
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            out.push_str(if self.labels[i] > 0.0 { "+1" } else { "-1" });
            for (j, &v) in self.row(i).iter().enumerate() {
                if v != 0.0 {
                    let _ = write!(out, " {}:{}", j + 1, v);
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Parses LIBSVM sparse text (`label idx:val idx:val ...`, 1-based indices).
///
/// The feature count is the larger of `d_hint` and the largest index seen.
/// Labels `<= 0` map to -1, everything else to +1.
pub fn parse_libsvm(text: &[u8], d_hint: Option<usize>) -> Result<Dataset> {
    let text = std::str::from_utf8(text).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("input is not valid UTF-8: {e}"),
    })?;

    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("");
        let mut tokens = line.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad label '{label_tok}'"),
        })?;
        if !label.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("non-finite label '{label_tok}'"),
            });
        }

        let mut entries = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("token '{tok}' is not idx:val"),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad index '{idx_s}'"),
            })?;
            let val: f64 = val_s.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad value '{val_s}'"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "indices are 1-based; found 0".into(),
                });
            }
            if !val.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite value '{val_s}'"),
                });
            }
            if idx == last {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("duplicate index {idx}"),
                });
            }
            if idx < last {
                if entries.iter().any(|&(j, _)| j == idx - 1) {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("duplicate index {idx}"),
                    });
                }
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("index {idx} after {last}; indices must increase"),
                });
            }
            last = idx;
            max_index = max_index.max(idx);
            entries.push((idx - 1, val));
        }
        rows.push(entries);
        labels.push(if label <= 0.0 { -1.0 } else { 1.0 });
    }

    let d = max_index.max(d_hint.unwrap_or(0));
    let mut features = vec![0.0; rows.len() * d];
    for (i, entries) in rows.iter().enumerate() {
        for &(j, v) in entries {
            features[i * d + j] = v;
        }
    }
    Dataset::new(features, labels, d)
}

/// Reads a LIBSVM file, transparently decompressing `*.gz`.
pub fn load_libsvm(path: &Path, d_hint: Option<usize>) -> Result<Dataset> {
    let file = File::open(path)?;
    let mut bytes = Vec::new();
    if path.extension().is_some_and(|e| e == "gz") {
        MultiGzDecoder::new(BufReader::new(file)).read_to_end(&mut bytes)?;
    } else {
        BufReader::new(file).read_to_end(&mut bytes)?;
    }
    parse_libsvm(&bytes, d_hint)
}

/// Train/test halves plus the source row indices each one came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// Shuffles row indices with a seeded permutation; the first `ceil(n/2)`
/// become the training set.
pub fn split_half(src: &Dataset, seed: u64) -> Result<SplitPair> {
    if src.n() < 2 {
        return Err(Error::InvalidInput(format!(
            "split needs at least 2 samples, got {}",
            src.n()
        )));
    }
    let mut perm: Vec<usize> = (0..src.n()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perm.shuffle(&mut rng);
    let n_train = src.n().div_ceil(2);
    let test_rows = perm.split_off(n_train);
    let train_rows = perm;
    Ok(SplitPair {
        train: src.select(&train_rows)?,
        test: src.select(&test_rows)?,
        train_rows,
        test_rows,
    })
}
