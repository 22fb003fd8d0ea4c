//! Dense vector arithmetic, L2 clipping, Gaussian noise and hierarchical
//! deterministic random streams.
//!
//! Every random draw in the crate goes through an [`RngStream`], a pure
//! descriptor `(root_seed, path)`. Materializing the same descriptor twice
//! yields the same generator, so results never depend on the order in which
//! clients are processed or on how many worker threads run them.

use std::ops::{Index, IndexMut};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A model parameter vector or a model update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelParams(pub Vec<f64>);

impl ModelParams {
    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.0)
    }

    /// `self + other`.
    pub fn add(&self, other: &ModelParams) -> ModelParams {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        ModelParams(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self - other`.
    pub fn sub(&self, other: &ModelParams) -> ModelParams {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        ModelParams(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: f64) -> ModelParams {
        ModelParams(self.0.iter().map(|a| a * s).collect())
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &ModelParams) {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }

    pub fn distance(&self, other: &ModelParams) -> f64 {
        self.sub(other).l2_norm()
    }
}

impl From<Vec<f64>> for ModelParams {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Index<usize> for ModelParams {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ModelParams {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Euclidean norm with Neumaier-compensated summation of the squares.
pub fn l2_norm(v: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in v {
        let sq = x * x;
        let t = sum + sq;
        if sum.abs() >= sq {
            comp += (sum - t) + sq;
        } else {
            comp += (sq - t) + sum;
        }
        sum = t;
    }
    (sum + comp).sqrt()
}

/// Scales `v` by `1 / max(1, ||v|| / bound)`.
pub fn clip(v: &ModelParams, bound: f64) -> Result<ModelParams> {
    if !(bound > 0.0) || !bound.is_finite() {
        return Err(Error::Config(format!("clip bound must be positive, got {bound}")));
    }
    let factor = (v.l2_norm() / bound).max(1.0);
    Ok(ModelParams(v.0.iter().map(|x| x / factor).collect()))
}

/// Adds independent `N(0, std^2)` noise to every coordinate. `std == 0` is the identity.
pub fn add_gaussian(v: &ModelParams, std: f64, stream: &RngStream) -> ModelParams {
    assert!(std >= 0.0, "noise std must be nonnegative");
    if std == 0.0 {
        return v.clone();
    }
    let mut rng = stream.rng();
    ModelParams(
        v.0.iter()
            .map(|x| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x + std * z
            })
            .collect(),
    )
}

/// An immutable descriptor of a reproducible random stream.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    root_seed: u64,
    path: Vec<(String, u64)>,
}

/// Builds the stream for `labels` under `root`. Pure in its inputs.
pub fn derive_stream(root: u64, labels: &[(&str, u64)]) -> RngStream {
    assert!(!labels.is_empty(), "stream path must be nonempty");
    RngStream {
        root_seed: root,
        path: labels.iter().map(|(l, i)| (l.to_string(), *i)).collect(),
    }
}

impl RngStream {
    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn path(&self) -> &[(String, u64)] {
        &self.path
    }

    /// Extends the path by one `(label, index)` segment.
    pub fn child(&self, label: &str, index: u64) -> RngStream {
        let mut path = self.path.clone();
        path.push((label.to_string(), index));
        RngStream { root_seed: self.root_seed, path }
    }

    fn seed_bytes(&self) -> [u8; 32] {
        let mut h = splitmix(self.root_seed ^ 0x5253_2d43_4c55_5354);
        for (label, idx) in &self.path {
            for b in label.bytes() {
                h = splitmix(h ^ u64::from(b));
            }
            // length delimiter keeps ("ab",1) and ("a",..) paths apart
            h = splitmix(h ^ (label.len() as u64).rotate_left(32));
            h = splitmix(h ^ *idx);
        }
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            h = splitmix(h);
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        seed
    }

    /// Materializes a fresh ChaCha12 generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha12Rng {
        ChaCha12Rng::from_seed(self.seed_bytes())
    }

    /// First 64 output bits of the stream.
    pub fn first_u64(&self) -> u64 {
        self.rng().next_u64()
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
