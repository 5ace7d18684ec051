//! Dense linear-algebra kernels and the seeded random source shared by every
//! stochastic step in the crate.

use std::sync::Once;

use faer::linalg::cholesky::llt::factor::LltError;
use faer::linalg::solvers::{Llt, Solve};
use faer::{Mat, Side};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense `n × n` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            entries: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.entries[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("matrix has non-finite entries".into()));
        }
        Ok(SquareMatrix { n, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
            entries.extend_from_slice(r);
        }
        Self::from_row_major(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    /// `L · Lᵀ` for a lower-triangular `self`.
    pub fn lower_gram(&self) -> SquareMatrix {
        let n = self.n;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot(&self.row(i)[..=j], &self.row(j)[..=j]);
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }
}

/// Dot product over the common prefix of `a` and `b`.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let k = c * 4;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in chunks * 4..n {
        s += a[k] * b[k];
    }
    s
}

fn sequential_faer() {
    static INIT: Once = Once::new();
    INIT.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Cholesky factorization of a symmetric positive definite matrix, kept in
/// factored form for repeated solves.
pub struct SpdFactor {
    llt: Llt<f64>,
}

impl SpdFactor {
    /// Factors the matrix whose `(i, j)` entry is `entry(i, j)`. Only the
    /// lower triangle is read.
    pub fn from_fn(n: usize, entry: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        sequential_faer();
        let a = Mat::<f64>::from_fn(n, n, entry);
        match a.llt(Side::Lower) {
            Ok(llt) => Ok(SpdFactor { llt }),
            Err(LltError::NonPositivePivot { index }) => {
                Err(Error::NotPositiveDefinite { pivot: index })
            }
        }
    }

    pub fn factor(a: &SquareMatrix) -> Result<Self> {
        if a.entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("matrix has non-finite entries".into()));
        }
        Self::from_fn(a.n, |i, j| a.get(i, j))
    }

    pub fn n(&self) -> usize {
        self.llt.L().nrows()
    }

    pub fn lower(&self) -> SquareMatrix {
        let l = self.llt.L();
        let n = l.nrows();
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                out.set(i, j, l[(i, j)]);
            }
        }
        out
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        Ok((0..n).map(|i| x[(i, 0)]).collect())
    }
}

/// Lower-triangular Cholesky factor `L` with `L · Lᵀ = a`. Only the lower
/// triangle of `a` is read.
pub fn cholesky(a: &SquareMatrix) -> Result<SquareMatrix> {
    Ok(SpdFactor::factor(a)?.lower())
}

/// Solves `a · x = b` for symmetric positive definite `a`.
pub fn solve_spd(a: &SquareMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.n {
        return Err(Error::DimensionMismatch {
            expected: a.n,
            found: b.len(),
        });
    }
    SpdFactor::factor(a)?.solve(b)
}

pub fn euclidean(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    Ok(squared_distance(u, v).sqrt())
}

/// Squared Euclidean distance; callers guarantee equal lengths.
#[inline]
pub(crate) fn squared_distance(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, used to turn stable names into stream tags.
pub fn name_tag(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives a child seed from a parent seed and a tag. Depends only on the two
/// inputs, never on how much of the parent stream was consumed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Seeded deterministic generator. Not shared across threads: concurrent
/// work takes a [`RandomSource::child`] each.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn child(&self, tag: u64) -> RandomSource {
        RandomSource::new(derive_seed(self.seed, tag))
    }

    pub fn child_named(&self, name: &str) -> RandomSource {
        self.child(name_tag(name))
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        use rand::Rng;
        self.rng.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.rng);
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
