use std::fmt::Write as _;
use std::ops::{Deref, DerefMut};
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// One real value per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(DVector<f64>);

impl ScalarField {
    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self(DVector::from_element(n, value))
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(DVector::from_vec(values))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> f64) -> Self {
        Self(DVector::from_iterator(n, (0..n).map(f)))
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn argmax(&self) -> usize {
        self.0.argmax().0
    }

    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.len() == expected {
            Ok(())
        } else {
            Err(Error::FieldLength {
                expected,
                found: self.len(),
            })
        }
    }

    /// CSV with header `vertex_index,value`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("vertex_index,value\n");
        for (i, v) in self.0.iter().enumerate() {
            writeln!(out, "{i},{v:.16e}").unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Reads `vertex_index,value` rows; header and `#` lines are skipped.
    pub fn parse_csv(text: &str, path: &Path) -> Result<Self> {
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("vertex") {
                continue;
            }
            let bad = |reason: &str| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                reason: reason.into(),
            };
            // extra columns are ignored, so a final-state table reads as its `u` column
            let mut cols = line.split(',');
            let (Some(i), Some(v)) = (cols.next(), cols.next()) else {
                return Err(bad("expected 'vertex_index,value'"));
            };
            let i: usize = i.trim().parse().map_err(|_| bad("bad vertex index"))?;
            let v: f64 = v.trim().parse().map_err(|_| bad("bad value"))?;
            entries.push((i, v));
        }
        let n = entries.len();
        let mut values = vec![f64::NAN; n];
        for (i, v) in entries {
            if i >= n || !values[i].is_nan() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 0,
                    reason: format!("vertex indices must be a permutation of 0..{n}"),
                });
            }
            values[i] = v;
        }
        Ok(Self::from_vec(values))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::parse_csv(&std::fs::read_to_string(path)?, path)
    }
}

impl Deref for ScalarField {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl DerefMut for ScalarField {
    fn deref_mut(&mut self) -> &mut DVector<f64> {
        &mut self.0
    }
}

impl From<DVector<f64>> for ScalarField {
    fn from(v: DVector<f64>) -> Self {
        Self(v)
    }
}
