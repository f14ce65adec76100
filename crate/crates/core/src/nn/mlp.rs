use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EMLP";
const FORMAT_VERSION: u32 = 1;

/// Dense layer. `weights` is input-major: `weights[k * n_out + j]` connects
/// input `k` to output `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub(crate) n_in: usize,
    pub(crate) n_out: usize,
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
}

impl Layer {
    pub fn new(n_in: usize, n_out: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if n_in == 0 || n_out == 0 {
            return Err(Error::InvalidArgument("layer dimensions must be positive".into()));
        }
        if weights.len() != n_in * n_out {
            return Err(Error::DimensionMismatch {
                expected: n_in * n_out,
                got: weights.len(),
            });
        }
        if bias.len() != n_out {
            return Err(Error::DimensionMismatch {
                expected: n_out,
                got: bias.len(),
            });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameters"));
        }
        Ok(Self {
            n_in,
            n_out,
            weights,
            bias,
        })
    }

    /// Builds a layer from per-output weight rows (`rows[j][k]`).
    pub fn from_rows(rows: &[Vec<f64>], bias: Vec<f64>) -> Result<Self> {
        let n_out = rows.len();
        let n_in = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_in) {
            return Err(Error::InvalidArgument("ragged weight rows".into()));
        }
        let mut weights = vec![0.0; n_in * n_out];
        for (j, row) in rows.iter().enumerate() {
            for (k, &w) in row.iter().enumerate() {
                weights[k * n_out + j] = w;
            }
        }
        Self::new(n_in, n_out, weights, bias)
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    /// Weight from input `k` to output `j`.
    pub fn weight(&self, j: usize, k: usize) -> f64 {
        self.weights[k * self.n_out + j]
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// `out = bias + x W`, no activation.
    pub(crate) fn affine(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (k, &xk) in x.iter().enumerate() {
            if xk != 0.0 {
                axpy(xk, &self.weights[k * self.n_out..(k + 1) * self.n_out], out);
            }
        }
    }
}

/// Fully connected regressor: ReLU hidden layers, identity scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
}

impl MlpModel {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("model needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].n_out != pair[1].n_in {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].n_out,
                    got: pair[1].n_in,
                });
            }
        }
        if layers[layers.len() - 1].n_out != 1 {
            return Err(Error::InvalidArgument("output layer must have one unit".into()));
        }
        Ok(Self { layers })
    }

    /// He-initialized network with the given hidden widths.
    pub fn init<R: Rng>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for w in widths.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let scale = (2.0 / n_in as f64).sqrt();
            let weights = (0..n_in * n_out)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    z * scale
                })
                .collect();
            layers.push(Layer::new(n_in, n_out, weights, vec![0.0; n_out])?);
        }
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    /// Hidden widths, for architecture comparisons.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.n_out));
        s
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model input"));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.n_out];
            layer.affine(&a, &mut z);
            if i < last {
                z.iter_mut().for_each(relu);
            }
            a = z;
        }
        Ok(a[0])
    }

    /// Exact reverse-mode gradient of the output with respect to the input.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_and_input_gradient(x)?.1)
    }

    /// Output value and input gradient from a single forward/backward pass.
    ///
    /// ReLU derivative at a pre-activation of exactly zero is taken as 0.
    pub fn value_and_input_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.n_out];
            layer.affine(&a, &mut z);
            a = z.clone();
            if i < last {
                a.iter_mut().for_each(relu);
            }
            pre.push(z);
        }
        let value = a[0];
        let mut delta = vec![1.0];
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if i < last {
                for (d, z) in delta.iter_mut().zip(&pre[i]) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let mut prev = vec![0.0; layer.n_in];
            for (k, p) in prev.iter_mut().enumerate() {
                *p = dot(&layer.weights[k * layer.n_out..(k + 1) * layer.n_out], &delta);
            }
            delta = prev;
        }
        Ok((value, delta))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.param_count() + 8 * self.layers.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            out.extend_from_slice(&(l.n_in as u32).to_le_bytes());
            out.extend_from_slice(&(l.n_out as u32).to_le_bytes());
            for v in l.weights.iter().chain(&l.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::ModelFormat("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let n_layers = r.u32()? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let n_in = r.u32()? as usize;
            let n_out = r.u32()? as usize;
            let weights = (0..n_in * n_out).map(|_| r.f64()).collect::<Result<_>>()?;
            let bias = (0..n_out).map(|_| r.f64()).collect::<Result<_>>()?;
            layers.push(Layer::new(n_in, n_out, weights, bias)?);
        }
        if r.pos != bytes.len() {
            return Err(Error::ModelFormat("trailing bytes".into()));
        }
        Self::from_layers(layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::ModelFormat("truncated file".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[inline]
fn relu(v: &mut f64) {
    if *v <= 0.0 {
        *v = 0.0;
    }
}

#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with four independent accumulators (fixed summation order).
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear(w: &[f64], b: f64) -> MlpModel {
        MlpModel::from_layers(vec![Layer::from_rows(&[w.to_vec()], vec![b]).unwrap()]).unwrap()
    }

    #[test]
    fn zero_weights_give_zero() {
        let l1 = Layer::new(3, 4, vec![0.0; 12], vec![0.0; 4]).unwrap();
        let l2 = Layer::new(4, 1, vec![0.0; 4], vec![0.0]).unwrap();
        let m = MlpModel::from_layers(vec![l1, l2]).unwrap();
        assert_eq!(m.forward(&[1.0, -2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(m.input_gradient(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn linear_layer_dot_product() {
        let m = linear(&[1.0, 2.0], 0.0);
        assert_eq!(m.forward(&[3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(m.input_gradient(&[-7.0, 0.5]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let m = linear(&[1.0, 2.0], 0.0);
        assert!(matches!(
            m.forward(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(m.input_gradient(&[1.0, 2.0, 3.0]).is_err());
        assert!(m.forward(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn relu_kink_uses_zero_subgradient() {
        // hidden pre-activation is exactly 0 at x = 0
        let l1 = Layer::from_rows(&[vec![1.0]], vec![0.0]).unwrap();
        let l2 = Layer::from_rows(&[vec![1.0]], vec![0.0]).unwrap();
        let m = MlpModel::from_layers(vec![l1, l2]).unwrap();
        assert_eq!(m.input_gradient(&[0.0]).unwrap(), vec![0.0]);
        assert_eq!(m.input_gradient(&[0.1]).unwrap(), vec![1.0]);
    }

    #[test]
    fn serialization_is_bitwise_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = MlpModel::init(5, &[7, 3], &mut rng).unwrap();
        let back = MlpModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back.to_bytes(), m.to_bytes());
        assert_eq!(back, m);
    }

    #[test]
    fn corrupt_files_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bytes = MlpModel::init(2, &[2], &mut rng).unwrap().to_bytes();
        assert!(MlpModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(MlpModel::from_bytes(&bad).is_err());
        let mut longer = bytes;
        longer.push(0);
        assert!(MlpModel::from_bytes(&longer).is_err());
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..11).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }
}
