//! Small discrete sequence task with an exhaustive lookup table.
//!
//! `y(s) = Σ_p a·A[p, s_p] + Σ_{p<q} b·B[p, q, s_p, s_q]` with standard normal
//! `A`, `B`, where `a` and `b` give unary and pairwise terms variance 0.6 and
//! 0.4 in total.

use rand_distr::{Distribution, StandardNormal};

use super::task_rng;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::space::{Design, DesignSpace};

const LEN: usize = 8;
const VOCAB: usize = 4;
const UNARY_VAR: f64 = 0.6;
const PAIR_VAR: f64 = 0.4;

#[derive(Debug, Clone, PartialEq)]
pub struct MiniBind {
    /// `unary[p * V + a]`, already scaled.
    unary: Vec<f64>,
    /// `pairwise[((p * L + q) * V + a) * V + b]` for `p < q`, already scaled.
    pairwise: Vec<f64>,
    table: Vec<f64>,
}

impl MiniBind {
    pub const SEQ_LEN: usize = LEN;
    pub const VOCAB: usize = VOCAB;

    pub fn generate(seed: u64) -> Self {
        let mut rng = task_rng(seed, 1);
        let a = (UNARY_VAR / LEN as f64).sqrt();
        let b = (PAIR_VAR / (LEN * (LEN - 1) / 2) as f64).sqrt();
        let unary: Vec<f64> = (0..LEN * VOCAB)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                a * z
            })
            .collect();
        let mut pairwise = vec![0.0; LEN * LEN * VOCAB * VOCAB];
        for p in 0..LEN {
            for q in p + 1..LEN {
                for i in 0..VOCAB * VOCAB {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    pairwise[(p * LEN + q) * VOCAB * VOCAB + i] = b * z;
                }
            }
        }
        let mut mb = Self {
            unary,
            pairwise,
            table: Vec::new(),
        };
        let mut tokens = [0usize; LEN];
        mb.table = (0..Self::size())
            .map(|idx| {
                Self::decode_index(idx, &mut tokens);
                mb.formula(&tokens)
            })
            .collect();
        mb
    }

    /// Number of distinct sequences.
    pub fn size() -> usize {
        VOCAB.pow(LEN as u32)
    }

    pub fn space(&self) -> DesignSpace {
        DesignSpace::Discrete {
            seq_len: LEN,
            vocab: VOCAB,
        }
    }

    /// Table index of a sequence; the first position is most significant.
    pub fn index_of(tokens: &[usize]) -> usize {
        tokens.iter().fold(0, |acc, &t| acc * VOCAB + t)
    }

    fn decode_index(mut idx: usize, tokens: &mut [usize; LEN]) {
        for p in (0..LEN).rev() {
            tokens[p] = idx % VOCAB;
            idx /= VOCAB;
        }
    }

    pub fn unary(&self, p: usize, a: usize) -> f64 {
        self.unary[p * VOCAB + a]
    }

    /// Interaction between token `a` at `p` and token `b` at `q`, for `p < q`.
    pub fn pairwise(&self, p: usize, q: usize, a: usize, b: usize) -> f64 {
        self.pairwise[((p * LEN + q) * VOCAB + a) * VOCAB + b]
    }

    /// Direct evaluation of the scoring formula.
    pub fn formula(&self, tokens: &[usize]) -> f64 {
        let mut y = 0.0;
        for p in 0..LEN {
            y += self.unary(p, tokens[p]);
            for q in p + 1..LEN {
                y += self.pairwise(p, q, tokens[p], tokens[q]);
            }
        }
        y
    }

    pub fn lookup(&self, tokens: &[usize]) -> f64 {
        self.table[Self::index_of(tokens)]
    }

    /// Every sequence in table order.
    pub fn enumerate(&self) -> Result<Dataset> {
        let mut tokens = [0usize; LEN];
        let designs = (0..Self::size())
            .map(|idx| {
                Self::decode_index(idx, &mut tokens);
                Design::Tokens(tokens.to_vec())
            })
            .collect();
        Dataset::new(self.space(), designs, self.table.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_order() {
        assert_eq!(MiniBind::index_of(&[0; 8]), 0);
        assert_eq!(MiniBind::index_of(&[0, 0, 0, 0, 0, 0, 0, 1]), 1);
        assert_eq!(MiniBind::index_of(&[1, 0, 0, 0, 0, 0, 0, 0]), 4usize.pow(7));
        let mut t = [0; 8];
        MiniBind::decode_index(12345, &mut t);
        assert_eq!(MiniBind::index_of(&t), 12345);
    }

    #[test]
    fn seeded_and_roughly_unit_variance() {
        let a = MiniBind::generate(5);
        assert_eq!(a, MiniBind::generate(5));
        assert_ne!(a, MiniBind::generate(6));
        let n = a.table.len() as f64;
        let mean = a.table.iter().sum::<f64>() / n;
        let var = a.table.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
        assert!(var > 0.3 && var < 3.0, "variance {var}");
    }
}
