//! Design spaces and the two design representations.
//!
//! A [`Design`] lives in task units: token indices for sequence tasks, raw
//! coordinates for continuous tasks. A [`DesignPoint`] is the flat real vector
//! that proxy models consume and ascent moves: one-hot blocks of width `V` for
//! sequences, standardized coordinates for continuous spaces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound applied to every per-coordinate standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DesignSpace {
    Discrete {
        seq_len: usize,
        vocab: usize,
    },
    Continuous {
        dim: usize,
        mean: Vec<f64>,
        std: Vec<f64>,
    },
}

/// A design in task units.
#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    Tokens(Vec<usize>),
    Real(Vec<f64>),
}

/// A design in optimization representation.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint(pub Vec<f64>);

impl DesignPoint {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl DesignSpace {
    pub fn discrete(seq_len: usize, vocab: usize) -> Result<Self> {
        if seq_len < 1 || vocab < 2 {
            return Err(Error::InvalidArgument(format!(
                "discrete space needs L >= 1 and V >= 2 (got L={seq_len}, V={vocab})"
            )));
        }
        Ok(DesignSpace::Discrete { seq_len, vocab })
    }

    /// Continuous space with identity normalization.
    pub fn continuous(dim: usize) -> Result<Self> {
        Self::continuous_with_stats(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn continuous_with_stats(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::InvalidArgument("continuous space needs D >= 1".into()));
        }
        if mean.len() != std.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: std.len(),
            });
        }
        if mean.iter().chain(&std).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("normalization statistics"));
        }
        let std = std.into_iter().map(|s| s.max(STD_FLOOR)).collect();
        Ok(DesignSpace::Continuous {
            dim: mean.len(),
            mean,
            std,
        })
    }

    /// Same shape, with normalization statistics fitted to `designs`.
    ///
    /// Discrete spaces are returned unchanged.
    pub fn fitted_to(&self, designs: &[&Design]) -> Result<Self> {
        match self {
            DesignSpace::Discrete { .. } => Ok(self.clone()),
            DesignSpace::Continuous { dim, .. } => {
                if designs.is_empty() {
                    return Err(Error::Empty("designs for normalization statistics"));
                }
                let n = designs.len() as f64;
                let mut mean = vec![0.0; *dim];
                for d in designs {
                    let x = self.real_coords(d)?;
                    for (m, v) in mean.iter_mut().zip(x) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n);
                let mut var = vec![0.0; *dim];
                for d in designs {
                    let x = self.real_coords(d)?;
                    for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
                Self::continuous_with_stats(mean, std)
            }
        }
    }

    pub fn kind(&self) -> SpaceKind {
        match self {
            DesignSpace::Discrete { .. } => SpaceKind::Discrete,
            DesignSpace::Continuous { .. } => SpaceKind::Continuous,
        }
    }

    /// Length of the flat optimization representation.
    pub fn input_dim(&self) -> usize {
        match self {
            DesignSpace::Discrete { seq_len, vocab } => seq_len * vocab,
            DesignSpace::Continuous { dim, .. } => *dim,
        }
    }

    /// Number of raw columns in a dataset file (positions or coordinates).
    pub fn raw_len(&self) -> usize {
        match self {
            DesignSpace::Discrete { seq_len, .. } => *seq_len,
            DesignSpace::Continuous { dim, .. } => *dim,
        }
    }

    /// Checks that `design` has the right variant, length and value range.
    pub fn check(&self, design: &Design) -> Result<()> {
        match (self, design) {
            (DesignSpace::Discrete { seq_len, vocab }, Design::Tokens(t)) => {
                if t.len() != *seq_len {
                    return Err(Error::DimensionMismatch {
                        expected: *seq_len,
                        got: t.len(),
                    });
                }
                if let Some(bad) = t.iter().find(|&&tok| tok >= *vocab) {
                    return Err(Error::InvalidArgument(format!(
                        "token {bad} out of range [0, {vocab})"
                    )));
                }
                Ok(())
            }
            (DesignSpace::Continuous { dim, .. }, Design::Real(x)) => {
                if x.len() != *dim {
                    return Err(Error::DimensionMismatch {
                        expected: *dim,
                        got: x.len(),
                    });
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("design"));
                }
                Ok(())
            }
            _ => Err(Error::InvalidArgument(
                "design kind does not match the design space".into(),
            )),
        }
    }

    fn real_coords<'a>(&self, design: &'a Design) -> Result<&'a [f64]> {
        self.check(design)?;
        match design {
            Design::Real(x) => Ok(x),
            Design::Tokens(_) => unreachable!("checked above"),
        }
    }

    /// Maps a task-unit design into optimization representation.
    pub fn encode(&self, design: &Design) -> Result<DesignPoint> {
        self.check(design)?;
        Ok(match (self, design) {
            (DesignSpace::Discrete { seq_len, vocab }, Design::Tokens(t)) => {
                let mut x = vec![0.0; seq_len * vocab];
                for (p, &tok) in t.iter().enumerate() {
                    x[p * vocab + tok] = 1.0;
                }
                DesignPoint(x)
            }
            (DesignSpace::Continuous { mean, std, .. }, Design::Real(x)) => DesignPoint(
                x.iter()
                    .zip(mean.iter().zip(std))
                    .map(|(v, (m, s))| (v - m) / s)
                    .collect(),
            ),
            _ => unreachable!("checked above"),
        })
    }

    /// Maps an optimization-representation point back to task units.
    ///
    /// Discrete points must be hard one-hots; relaxed points are rejected.
    pub fn decode(&self, point: &DesignPoint) -> Result<Design> {
        if point.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: point.len(),
            });
        }
        match self {
            DesignSpace::Discrete { vocab, .. } => {
                let mut tokens = Vec::with_capacity(point.len() / vocab);
                for block in point.0.chunks(*vocab) {
                    tokens.push(hard_token(block).ok_or(Error::NotHard { index: 0 })?);
                }
                Ok(Design::Tokens(tokens))
            }
            DesignSpace::Continuous { mean, std, .. } => {
                if !point.is_finite() {
                    return Err(Error::NonFinite("design point"));
                }
                Ok(Design::Real(
                    point
                        .0
                        .iter()
                        .zip(mean.iter().zip(std))
                        .map(|(z, (m, s))| z * s + m)
                        .collect(),
                ))
            }
        }
    }

    /// True when `point` is a valid hard design for this space.
    pub fn is_hard(&self, point: &DesignPoint) -> bool {
        if point.len() != self.input_dim() || !point.is_finite() {
            return false;
        }
        match self {
            DesignSpace::Discrete { vocab, .. } => {
                point.0.chunks(*vocab).all(|b| hard_token(b).is_some())
            }
            DesignSpace::Continuous { .. } => true,
        }
    }
}

/// Index of the single 1.0 in an exact one-hot block, if the block is one.
fn hard_token(block: &[f64]) -> Option<usize> {
    let mut hot = None;
    for (i, &v) in block.iter().enumerate() {
        if v == 1.0 {
            if hot.is_some() {
                return None;
            }
            hot = Some(i);
        } else if v != 0.0 {
            return None;
        }
    }
    hot
}
