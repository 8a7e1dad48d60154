//! Partition-size vectors: the block layout underlying every uniform-block
//! matrix.

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};

/// The block sizes `(p_1, ..., p_K)` of a uniform-block layout.
///
/// Every block must have at least two rows; this is what makes the
/// coordinate representation of a uniform-block matrix unique (a 1x1 block
/// cannot separate its diagonal value `a + b` into `a` and `b`).
///
/// ```
/// use ubmat::Partition;
///
/// let p = Partition::new(vec![2, 3]).unwrap();
/// assert_eq!(p.block_count(), 2);
/// assert_eq!(p.total(), 5);
/// assert_eq!(p.offsets(), &[0, 2, 5]);
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    sizes: Vec<usize>,
    /// Cumulative offsets: offsets[k] = p_1 + ... + p_k, with offsets[0] = 0.
    offsets: Vec<usize>,
}

impl Partition {
    /// Builds a partition from block sizes, requiring K >= 1 and every
    /// p_k >= 2.
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidPartition("no blocks".into()));
        }
        if let Some((k, &pk)) = sizes.iter().enumerate().find(|(_, &pk)| pk < 2) {
            return Err(Error::InvalidPartition(format!(
                "block {} has size {}, but every block needs size >= 2",
                k + 1,
                pk
            )));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0usize);
        let mut acc = 0usize;
        for &pk in &sizes {
            acc += pk;
            offsets.push(acc);
        }
        Ok(Self { sizes, offsets })
    }

    /// Number of blocks K.
    pub fn block_count(&self) -> usize {
        self.sizes.len()
    }

    /// Total dimension p = p_1 + ... + p_K.
    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Block sizes.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Size of block `k` (0-based).
    pub fn size(&self, k: usize) -> usize {
        self.sizes[k]
    }

    /// Cumulative offsets `[0, p_1, p_1+p_2, ..., p]` (length K+1).
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Index range of block `k` within a p-vector.
    pub fn block_range(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Block sizes as floats, the diagonal of P.
    pub fn sizes_f64(&self) -> Vec<f64> {
        self.sizes.iter().map(|&p| p as f64).collect()
    }

    /// Splits a p-vector into per-block slices.
    pub fn blocks<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = &'a [f64]> + 'a {
        (0..self.block_count()).map(move |k| &x[self.block_range(k)])
    }

    /// Per-block means of a p-vector (the map `Y = C X` onto block averages).
    pub fn block_means(&self, x: &[f64]) -> Vec<f64> {
        self.blocks(x)
            .map(|b| b.iter().sum::<f64>() / b.len() as f64)
            .collect()
    }

    /// Errors unless `other` is the same partition.
    pub fn ensure_same(&self, other: &Partition) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::PartitionMismatch {
                left: self.sizes.clone(),
                right: other.sizes.clone(),
            })
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.sizes.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}
