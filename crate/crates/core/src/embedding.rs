//! Fixed-dimension real vectors with an explicit normalization flag.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::{dot, Real};

/// Tolerance on `| ||v|| - 1 |` for a vector flagged as normalized.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding<T> {
    values: Vec<T>,
    normalized: bool,
}

impl<T: Real> Embedding<T> {
    /// Wraps raw values without rescaling them.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("embedding must have positive dimension"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding"));
        }
        Ok(Self {
            values,
            normalized: false,
        })
    }

    /// Wraps and L2-normalizes.
    pub fn unit(values: Vec<T>) -> Result<Self> {
        Self::new(values)?.into_normalized()
    }

    pub fn into_normalized(mut self) -> Result<Self> {
        if self.normalized {
            return Ok(self);
        }
        // Accumulate in f64 so f32 vectors still land within tolerance.
        let norm = self
            .values
            .iter()
            .map(|v| {
                let x = v.to_f64_lossy();
                x * x
            })
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::invalid("cannot normalize a zero vector"));
        }
        for v in &mut self.values {
            *v = T::lit(v.to_f64_lossy() / norm);
        }
        self.normalized = true;
        Ok(self)
    }

    /// Restores a vector read back from storage that was normalized when written.
    pub(crate) fn from_stored(values: Vec<T>, normalized: bool) -> Result<Self> {
        let mut e = Self::new(values)?;
        e.normalized = normalized;
        Ok(e)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> T {
        dot(&self.values, &self.values).sqrt()
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(dot(&self.values, &other.values))
    }

    /// Cosine similarity; equals [`Embedding::dot`] when both sides are normalized.
    pub fn cosine(&self, other: &Self) -> Result<T> {
        let d = self.dot(other)?;
        if self.normalized && other.normalized {
            return Ok(d);
        }
        let denom = self.norm() * other.norm();
        if denom == T::zero() {
            return Err(Error::invalid("cosine of a zero vector"));
        }
        Ok(d / denom)
    }

    pub fn cast<U: Real>(&self) -> Embedding<U> {
        Embedding {
            values: self
                .values
                .iter()
                .map(|v| U::lit(v.to_f64_lossy()))
                .collect(),
            normalized: self.normalized,
        }
    }
}

/// Deterministic unit vector derived from `(seed, key)`.
///
/// The key is hashed with SHA-256 together with the seed; the digest seeds a
/// ChaCha stream of standard normals which is then L2-normalized. Distinct
/// keys give independent directions, so the construction doubles as a
/// stand-in encoder for tests and the synthetic environment.
pub fn seeded_unit_vector<T: Real>(seed: u64, key: &[u8], dim: usize) -> Result<Embedding<T>> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((key.len() as u64).to_le_bytes());
    hasher.update(key);
    let digest = hasher.finalize();
    let mut rng_seed = [0u8; 32];
    rng_seed.copy_from_slice(&digest);
    let mut rng = ChaCha8Rng::from_seed(rng_seed);
    let values: Vec<T> = (0..dim)
        .map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            T::lit(x)
        })
        .collect();
    Embedding::unit(values)
}
