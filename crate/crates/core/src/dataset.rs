//! Scored design collections, selection, and the CSV + metadata file format.
//!
//! Continuous files carry columns `x_0..x_{D-1},y`, discrete files carry
//! `t_0..t_{L-1},y`. Each CSV travels with a `<stem>.meta.toml` sidecar
//! holding `kind`, the shape keys and the total-dataset score range.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Design, DesignPoint, DesignSpace, SpaceKind};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    space: DesignSpace,
    designs: Vec<Design>,
    ys: Vec<f64>,
}

impl Dataset {
    pub fn new(space: DesignSpace, designs: Vec<Design>, ys: Vec<f64>) -> Result<Self> {
        if designs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: designs.len(),
                got: ys.len(),
            });
        }
        for d in &designs {
            space.check(d)?;
        }
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("dataset scores"));
        }
        Ok(Self { space, designs, ys })
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn designs(&self) -> &[Design] {
        &self.designs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn max_y(&self) -> Option<f64> {
        self.ys.iter().copied().max_by(f64::total_cmp)
    }

    pub fn min_y(&self) -> Option<f64> {
        self.ys.iter().copied().min_by(f64::total_cmp)
    }

    /// Same entries under a different space (e.g. refitted normalization).
    pub fn with_space(&self, space: DesignSpace) -> Result<Self> {
        Self::new(space, self.designs.clone(), self.ys.clone())
    }

    /// Entries at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            space: self.space.clone(),
            designs: indices.iter().map(|&i| self.designs[i].clone()).collect(),
            ys: indices.iter().map(|&i| self.ys[i]).collect(),
        }
    }

    /// Indices sorted by ascending score, ties kept in original order.
    fn ascending_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.ys[a].total_cmp(&self.ys[b]));
        order
    }

    /// Indices of the `floor(frac * N)` lowest-scoring entries, in original order.
    pub fn bottom_fraction_indices(&self, frac: f64) -> Result<Vec<usize>> {
        if !(frac > 0.0 && frac <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "fraction must lie in (0, 1], got {frac}"
            )));
        }
        let keep = (frac * self.len() as f64).floor() as usize;
        if keep == 0 {
            return Err(Error::Empty("bottom-fraction selection"));
        }
        let mut idx = self.ascending_order();
        idx.truncate(keep);
        idx.sort_unstable();
        Ok(idx)
    }

    pub fn select_bottom_fraction(&self, frac: f64) -> Result<Self> {
        Ok(self.subset(&self.bottom_fraction_indices(frac)?))
    }

    /// The `n` highest-scoring entries, best first; ties keep original order.
    pub fn select_top_n(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidArgument(format!(
                "top-n needs 1 <= n <= {}, got {n}",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.ys[b].total_cmp(&self.ys[a]));
        order.truncate(n);
        Ok(self.subset(&order))
    }

    /// All designs in optimization representation.
    pub fn encoded(&self) -> Vec<DesignPoint> {
        self.designs
            .iter()
            .map(|d| self.space.encode(d).expect("dataset entries conform to space"))
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let prefix = match self.space.kind() {
            SpaceKind::Discrete => "t",
            SpaceKind::Continuous => "x",
        };
        let mut header: Vec<String> = (0..self.space.raw_len())
            .map(|i| format!("{prefix}_{i}"))
            .collect();
        header.push("y".into());
        w.write_record(&header)?;
        let mut row = Vec::with_capacity(header.len());
        for (d, y) in self.designs.iter().zip(&self.ys) {
            row.clear();
            match d {
                Design::Tokens(t) => row.extend(t.iter().map(|v| v.to_string())),
                Design::Real(x) => row.extend(x.iter().map(|v| format!("{v:?}"))),
            }
            row.push(format!("{y:?}"));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a dataset CSV whose columns must match `space`.
    pub fn read_csv(path: &Path, space: &DesignSpace) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_path(path)?;
        let width = space.raw_len() + 1;
        let headers = r.headers()?.clone();
        if headers.len() != width || headers.get(width - 1) != Some("y") {
            return Err(parse_err(
                1,
                format!("expected {width} columns ending in `y`, found {}", headers.len()),
            ));
        }
        let mut designs = Vec::new();
        let mut ys = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let row = i + 1;
            let line = row + 1;
            let rec = rec?;
            if rec.len() != width {
                return Err(parse_err(
                    line,
                    format!("row {row}: expected {width} fields, found {}", rec.len()),
                ));
            }
            let design = match space {
                DesignSpace::Discrete { vocab, .. } => {
                    let mut t = Vec::with_capacity(width - 1);
                    for f in rec.iter().take(width - 1) {
                        let tok: usize = f.trim().parse().map_err(|_| {
                            parse_err(line, format!("row {row}: token `{f}` is not an integer"))
                        })?;
                        if tok >= *vocab {
                            return Err(parse_err(
                                line,
                                format!("row {row}: token {tok} out of range [0, {vocab})"),
                            ));
                        }
                        t.push(tok);
                    }
                    Design::Tokens(t)
                }
                DesignSpace::Continuous { .. } => {
                    let mut x = Vec::with_capacity(width - 1);
                    for f in rec.iter().take(width - 1) {
                        let v: f64 = f.trim().parse().map_err(|_| {
                            parse_err(line, format!("row {row}: value `{f}` is not a number"))
                        })?;
                        if !v.is_finite() {
                            return Err(parse_err(line, format!("row {row}: non-finite value")));
                        }
                        x.push(v);
                    }
                    Design::Real(x)
                }
            };
            let yf = &rec[width - 1];
            let y: f64 = yf
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_err(line, format!("row {row}: y value `{yf}` is not a number")))?;
            designs.push(design);
            ys.push(y);
        }
        Self::new(space.clone(), designs, ys)
    }
}

/// Sidecar metadata that travels with each dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub kind: SpaceKind,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub seq_len: Option<usize>,
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<usize>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    pub y_min_total: f64,
    pub y_max_total: f64,
}

impl DatasetMeta {
    pub fn new(space: &DesignSpace, y_min_total: f64, y_max_total: f64) -> Self {
        let (seq_len, vocab, dim) = match space {
            DesignSpace::Discrete { seq_len, vocab } => (Some(*seq_len), Some(*vocab), None),
            DesignSpace::Continuous { dim, .. } => (None, None, Some(*dim)),
        };
        Self {
            kind: space.kind(),
            seq_len,
            vocab,
            dim,
            y_min_total,
            y_max_total,
        }
    }

    /// The design space described by this metadata (identity normalization).
    pub fn space(&self) -> Result<DesignSpace> {
        match self.kind {
            SpaceKind::Discrete => {
                let l = self.seq_len.ok_or_else(|| Error::Metadata("missing key `L`".into()))?;
                let v = self.vocab.ok_or_else(|| Error::Metadata("missing key `V`".into()))?;
                DesignSpace::discrete(l, v)
            }
            SpaceKind::Continuous => {
                let d = self.dim.ok_or_else(|| Error::Metadata("missing key `D`".into()))?;
                DesignSpace::continuous(d)
            }
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let meta: Self = toml::from_str(&text)
            .map_err(|e| Error::Metadata(format!("{}: {}", path.display(), e.message())))?;
        if !(meta.y_min_total.is_finite() && meta.y_max_total.is_finite()) {
            return Err(Error::Metadata("score range must be finite".into()));
        }
        Ok(meta)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Metadata(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }
}

/// Path of the metadata sidecar for a dataset CSV.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.toml")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Dataset {
        let space = DesignSpace::continuous(1).unwrap();
        let designs = (0..n).map(|i| Design::Real(vec![i as f64])).collect();
        let ys = (0..n).map(|i| i as f64).collect();
        Dataset::new(space, designs, ys).unwrap()
    }

    #[test]
    fn bottom_half() {
        let d = toy(10);
        let b = d.select_bottom_fraction(0.5).unwrap();
        assert_eq!(b.ys(), &[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(d.select_bottom_fraction(1.0).unwrap(), d);
        assert!(d.select_bottom_fraction(0.05).is_err());
        assert!(d.select_bottom_fraction(0.0).is_err());
        assert!(d.select_bottom_fraction(1.5).is_err());
    }

    #[test]
    fn top_n() {
        let d = toy(10);
        assert_eq!(d.select_top_n(3).unwrap().ys(), &[9.0, 8.0, 7.0]);
        let all = d.select_top_n(10).unwrap();
        let desc: Vec<f64> = (0..10).rev().map(|i| i as f64).collect();
        assert_eq!(all.ys(), desc.as_slice());
        assert!(d.select_top_n(11).is_err());
        assert!(d.select_top_n(0).is_err());
    }

    #[test]
    fn ties_are_stable() {
        let space = DesignSpace::continuous(1).unwrap();
        let designs = (0..4).map(|i| Design::Real(vec![i as f64])).collect();
        let d = Dataset::new(space, designs, vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        let top = d.select_top_n(2).unwrap();
        assert_eq!(top.designs()[0], Design::Real(vec![0.0]));
        assert_eq!(top.designs()[1], Design::Real(vec![2.0]));
        let bottom = d.select_bottom_fraction(0.5).unwrap();
        assert_eq!(bottom.designs()[0], Design::Real(vec![0.0]));
        assert_eq!(bottom.designs()[1], Design::Real(vec![1.0]));
    }

    #[test]
    fn rejects_non_finite_scores() {
        let space = DesignSpace::continuous(1).unwrap();
        assert!(Dataset::new(space, vec![Design::Real(vec![0.0])], vec![f64::NAN]).is_err());
    }

    #[test]
    fn meta_missing_key() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.meta.toml");
        fs::write(&p, "kind = \"discrete\"\nL = 8\ny_min_total = 0.0\ny_max_total = 1.0\n").unwrap();
        let meta = DatasetMeta::read(&p).unwrap();
        assert!(meta.space().unwrap_err().to_string().contains("`V`"));
        fs::write(&p, "kind = \"continuous\"\nD = 3\ny_min_total = 0.0\n").unwrap();
        assert!(DatasetMeta::read(&p).is_err());
    }

    #[test]
    fn non_numeric_y_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let mut text = String::from("x_0,y\n");
        for i in 1..=10 {
            if i == 7 {
                text.push_str("7.0,oops\n");
            } else {
                text.push_str(&format!("{i}.0,{i}.5\n"));
            }
        }
        fs::write(&p, text).unwrap();
        let err = Dataset::read_csv(&p, &DesignSpace::continuous(1).unwrap()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 7"), "{msg}");
        assert!(msg.contains(":8:"), "{msg}");
    }

    #[test]
    fn token_range_checked_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "t_0,t_1,y\n0,1,0.5\n2,4,1.0\n").unwrap();
        let err = Dataset::read_csv(&p, &DesignSpace::discrete(2, 4).unwrap()).unwrap_err();
        assert!(err.to_string().contains("out of range"));
    }
}
