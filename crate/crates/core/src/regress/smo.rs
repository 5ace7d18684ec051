//! ε-insensitive support-vector regression with a linear kernel, solved in
//! the dual by sequential minimal optimization.
//!
//! The dual is written over `2n` box-constrained variables
//! `a = (α, α*)`, labels `s = (+1.., -1..)`:
//!
//! ```text
//! min ½ aᵀQa + pᵀa   s.t.  sᵀa = 0,  0 ≤ a ≤ C
//! Q_tu = s_t s_u K(i, j),  p = (ε - z, ε + z)
//! ```
//!
//! Each step picks the maximal-violating first index and a second index by
//! second-order gain, updates the pair analytically and refreshes the
//! gradient. The regression coefficients are `β = α - α*` with `Σβ = 0`.

use serde::{Deserialize, Serialize};

use super::scale;
use crate::error::{Error, Result};
use crate::features::ColumnScaler;
use crate::numeric::dot;

/// Below this size the full kernel matrix is cached.
const KERNEL_CACHE_LIMIT: usize = 4096;
/// Iterations between shrinking passes (capped by the sample count).
const SHRINK_INTERVAL: usize = 1000;
/// Floor for the curvature of a working pair.
const MIN_CURVATURE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoParams {
    pub c: f64,
    pub epsilon: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

/// Raw dual solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Maximal violating-pair gap at termination.
    pub gap: f64,
}

impl SmoSolution {
    pub fn beta(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.alpha_star)
            .map(|(a, s)| a - s)
            .collect()
    }

    /// `Σ zβ - ε Σ(α + α*) - ½ βᵀKβ`, the dual objective being maximized.
    pub fn dual_objective(&self, kernel: &dyn Fn(usize, usize) -> f64, z: &[f64], epsilon: f64) -> f64 {
        let beta = self.beta();
        let n = beta.len();
        let linear: f64 = z.iter().zip(&beta).map(|(z, b)| z * b).sum();
        let l1: f64 = self.alpha.iter().chain(&self.alpha_star).sum();
        let mut quad = 0.0;
        for i in 0..n {
            if beta[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                quad += beta[i] * beta[j] * kernel(i, j);
            }
        }
        linear - epsilon * l1 - 0.5 * quad
    }

    /// Per-sample ε-KKT violation given the model outputs `f` on the
    /// training rows (bias included).
    pub fn kkt_violations(&self, f: &[f64], z: &[f64], c: f64, epsilon: f64) -> Vec<f64> {
        let at = |v: f64| {
            if v <= 0.0 {
                Bound::Lower
            } else if v >= c {
                Bound::Upper
            } else {
                Bound::Free
            }
        };
        (0..z.len())
            .map(|i| {
                let r = z[i] - f[i];
                let a = match at(self.alpha[i]) {
                    Bound::Lower => (r - epsilon).max(0.0),
                    Bound::Upper => (epsilon - r).max(0.0),
                    Bound::Free => (r - epsilon).abs(),
                };
                let s = match at(self.alpha_star[i]) {
                    Bound::Lower => (-epsilon - r).max(0.0),
                    Bound::Upper => (r + epsilon).max(0.0),
                    Bound::Free => (r + epsilon).abs(),
                };
                a.max(s)
            })
            .collect()
    }
}

enum Bound {
    Lower,
    Upper,
    Free,
}

/// Column access to a kernel matrix.
pub trait KernelColumns {
    fn diag(&self, i: usize) -> f64;
    /// Column `j`, either borrowed from a cache or computed into `buf`.
    fn column<'a>(&'a self, j: usize, buf: &'a mut Vec<f64>) -> &'a [f64];
}

/// A fully materialized row-major kernel matrix.
pub struct CachedKernel {
    n: usize,
    entries: Vec<f64>,
}

impl CachedKernel {
    pub fn new(n: usize, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), n * n);
        CachedKernel { n, entries }
    }

    pub fn from_fn(n: usize, k: impl Fn(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = k(i, j);
            }
        }
        CachedKernel { n, entries }
    }
}

impl KernelColumns for CachedKernel {
    fn diag(&self, i: usize) -> f64 {
        self.entries[i * self.n + i]
    }

    // symmetric, so row j is column j
    fn column<'a>(&'a self, j: usize, _buf: &'a mut Vec<f64>) -> &'a [f64] {
        &self.entries[j * self.n..(j + 1) * self.n]
    }
}

/// Linear kernel evaluated on demand.
struct LinearKernel<'r> {
    rows: &'r [Vec<f64>],
}

impl KernelColumns for LinearKernel<'_> {
    fn diag(&self, i: usize) -> f64 {
        dot(&self.rows[i], &self.rows[i])
    }

    fn column<'a>(&'a self, j: usize, buf: &'a mut Vec<f64>) -> &'a [f64] {
        buf.clear();
        buf.extend(self.rows.iter().map(|r| dot(r, &self.rows[j])));
        buf
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Half {
    /// `α`, label +1
    Up,
    /// `α*`, label -1
    Down,
}

/// Solves the ε-SVR dual for targets `z` under `kernel`.
pub fn solve(z: &[f64], kernel: &impl KernelColumns, params: &SmoParams) -> Result<SmoSolution> {
    let n = z.len();
    let c = params.c;
    let eps = params.epsilon;
    let diag: Vec<f64> = (0..n).map(|i| kernel.diag(i)).collect();
    let mut ap = vec![0.0; n];
    let mut an = vec![0.0; n];
    // gradients of the two halves
    let mut gp: Vec<f64> = z.iter().map(|z| eps - z).collect();
    let mut gn: Vec<f64> = z.iter().map(|z| eps + z).collect();
    let mut buf_i = Vec::new();
    let mut buf_j = Vec::new();
    let mut iterations = 0;

    let mut active_up: Vec<usize> = (0..n).collect();
    let mut active_down: Vec<usize> = (0..n).collect();
    let mut shrunk = false;
    let mut countdown = n.min(SHRINK_INTERVAL);
    let (mut last_gmax, mut last_gmax2) = (f64::INFINITY, f64::INFINITY);

    let gap = loop {
        countdown -= 1;
        if countdown == 0 {
            countdown = n.min(SHRINK_INTERVAL);
            // drop bounded variables that cannot enter a violating pair
            active_up.retain(|&k| {
                !((ap[k] >= c && -gp[k] > last_gmax) || (ap[k] <= 0.0 && gp[k] > last_gmax2))
            });
            active_down.retain(|&k| {
                !((an[k] >= c && -gn[k] > last_gmax2) || (an[k] <= 0.0 && gn[k] > last_gmax))
            });
            shrunk = active_up.len() < n || active_down.len() < n;
        }

        // first index: maximal violation among movable variables
        let mut gmax = f64::NEG_INFINITY;
        let mut first = None;
        for &k in &active_up {
            if ap[k] < c && -gp[k] >= gmax {
                gmax = -gp[k];
                first = Some((k, Half::Up));
            }
        }
        for &k in &active_down {
            if an[k] > 0.0 && gn[k] >= gmax {
                gmax = gn[k];
                first = Some((k, Half::Down));
            }
        }
        let Some((i, hi)) = first else {
            if shrunk {
                active_up = (0..n).collect();
                active_down = (0..n).collect();
                shrunk = false;
                continue;
            }
            break 0.0;
        };
        let col_i = kernel.column(i, &mut buf_i);
        let di = diag[i];
        let curvature = |k: usize| {
            let quad = di + diag[k] - 2.0 * col_i[k];
            if quad > 0.0 {
                quad
            } else {
                MIN_CURVATURE
            }
        };

        // second index: best second-order decrease
        let mut gmax2 = f64::NEG_INFINITY;
        let mut second = None;
        let mut best = f64::INFINITY;
        for &k in &active_up {
            if ap[k] > 0.0 {
                gmax2 = gmax2.max(gp[k]);
                let gd = gmax + gp[k];
                if gd > 0.0 {
                    let obj = -gd * gd / curvature(k);
                    if obj <= best {
                        best = obj;
                        second = Some((k, Half::Up));
                    }
                }
            }
        }
        for &k in &active_down {
            if an[k] < c {
                gmax2 = gmax2.max(-gn[k]);
                let gd = gmax - gn[k];
                if gd > 0.0 {
                    let obj = -gd * gd / curvature(k);
                    if obj <= best {
                        best = obj;
                        second = Some((k, Half::Down));
                    }
                }
            }
        }
        let gap = gmax + gmax2;
        (last_gmax, last_gmax2) = (gmax, gmax2);
        let (j, hj) = match second {
            Some(pair) if gap >= params.tolerance => pair,
            _ if shrunk => {
                // confirm optimality on the full problem
                active_up = (0..n).collect();
                active_down = (0..n).collect();
                shrunk = false;
                countdown = n.min(SHRINK_INTERVAL);
                continue;
            }
            _ => break gap,
        };
        if iterations >= params.max_iterations {
            return Err(Error::Convergence {
                iterations,
                worst_violation: gap,
            });
        }
        iterations += 1;

        let col_j = kernel.column(j, &mut buf_j);
        let (mut a_i, g_i) = match hi {
            Half::Up => (ap[i], gp[i]),
            Half::Down => (an[i], gn[i]),
        };
        let (mut a_j, g_j) = match hj {
            Half::Up => (ap[j], gp[j]),
            Half::Down => (an[j], gn[j]),
        };
        let (old_i, old_j) = (a_i, a_j);
        let kij = col_i[j];
        let quad = (di + diag[j] - 2.0 * kij).max(MIN_CURVATURE);
        if hi != hj {
            let delta = (-g_i - g_j) / quad;
            let diff = a_i - a_j;
            a_i += delta;
            a_j += delta;
            if diff > 0.0 {
                if a_j < 0.0 {
                    a_j = 0.0;
                    a_i = diff;
                }
            } else if a_i < 0.0 {
                a_i = 0.0;
                a_j = -diff;
            }
            if diff > 0.0 {
                if a_i > c {
                    a_i = c;
                    a_j = c - diff;
                }
            } else if a_j > c {
                a_j = c;
                a_i = c + diff;
            }
        } else {
            let delta = (g_i - g_j) / quad;
            let sum = a_i + a_j;
            a_i -= delta;
            a_j += delta;
            if sum > c {
                if a_i > c {
                    a_i = c;
                    a_j = sum - c;
                }
            } else if a_j < 0.0 {
                a_j = 0.0;
                a_i = sum;
            }
            if sum > c {
                if a_j > c {
                    a_j = c;
                    a_i = sum - c;
                }
            } else if a_i < 0.0 {
                a_i = 0.0;
                a_j = sum;
            }
        }
        match hi {
            Half::Up => ap[i] = a_i,
            Half::Down => an[i] = a_i,
        }
        match hj {
            Half::Up => ap[j] = a_j,
            Half::Down => an[j] = a_j,
        }

        // Δβ on the two touched samples; G_up += KΔβ, G_down -= KΔβ
        let sign = |h: Half| if h == Half::Up { 1.0 } else { -1.0 };
        let bi = sign(hi) * (a_i - old_i);
        let bj = sign(hj) * (a_j - old_j);
        for (((gp, gn), ki), kj) in gp.iter_mut().zip(gn.iter_mut()).zip(col_i).zip(col_j) {
            let delta = bi * ki + bj * kj;
            *gp += delta;
            *gn -= delta;
        }
    };

    // ρ from free variables, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for k in 0..n {
        // label·gradient for α is gp, for α* it is -gn
        let (yg, a) = (gp[k], ap[k]);
        if a >= c {
            lb = lb.max(yg);
        } else if a <= 0.0 {
            ub = ub.min(yg);
        } else {
            free += 1;
            free_sum += yg;
        }
        let (yg, a) = (-gn[k], an[k]);
        if a >= c {
            ub = ub.min(yg);
        } else if a <= 0.0 {
            lb = lb.max(yg);
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };

    Ok(SmoSolution {
        alpha: ap,
        alpha_star: an,
        bias: -rho,
        iterations,
        gap,
    })
}

/// Row-major `Z Zᵀ`.
fn gram(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let d = rows.first().map_or(0, |r| r.len());
    let z = faer::Mat::<f64>::from_fn(n, d, |i, j| rows[i][j]);
    let k = &z * z.transpose();
    let mut out = Vec::with_capacity(n * n);
    // symmetric: column j doubles as row j
    for j in 0..n {
        out.extend_from_slice(k.col_as_slice(j));
    }
    out
}

/// Linear-kernel SVR on min/max-normalized inputs; targets stay in raw
/// units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoModel {
    pub scaler: ColumnScaler,
    /// Weights over normalized inputs.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub support_vectors: usize,
    pub iterations: usize,
}

impl SmoModel {
    pub fn fit(rows: &[Vec<f64>], targets: &[f64], params: &SmoParams) -> Result<Self> {
        let (scaler, zr) = scale(rows)?;
        let n = zr.len();
        let sol = if n <= KERNEL_CACHE_LIMIT {
            solve(targets, &CachedKernel::new(n, gram(&zr)), params)?
        } else {
            solve(targets, &LinearKernel { rows: &zr }, params)?
        };
        let beta = sol.beta();
        let mut weights = vec![0.0; scaler.dimension()];
        for (b, r) in beta.iter().zip(&zr) {
            if *b != 0.0 {
                for (w, x) in weights.iter_mut().zip(r) {
                    *w += b * x;
                }
            }
        }
        Ok(SmoModel {
            scaler,
            weights,
            bias: sol.bias,
            support_vectors: beta.iter().filter(|b| **b != 0.0).count(),
            iterations: sol.iterations,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.bias + dot(&self.weights, &self.scaler.transform(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(c: f64, epsilon: f64) -> SmoParams {
        SmoParams {
            c,
            epsilon,
            tolerance: 1e-3,
            max_iterations: 1_000_000,
        }
    }

    #[test]
    fn constant_targets_need_no_support_vectors() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i * 3 % 5) as f64]).collect();
        let m = SmoModel::fit(&rows, &[4.2; 8], &params(1.0, 1e-3)).unwrap();
        assert_eq!(m.support_vectors, 0);
        assert!((m.bias - 4.2).abs() < 1e-12);
        assert!((m.predict(&[100.0, -3.0]) - 4.2).abs() < 1e-12);
    }

    #[test]
    fn iteration_cap_reports_convergence_error() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64).collect();
        let mut p = params(10.0, 1e-3);
        p.max_iterations = 1;
        assert!(matches!(
            SmoModel::fit(&rows, &y, &p),
            Err(Error::Convergence { .. })
        ));
    }

    #[test]
    fn equality_constraint_and_box_hold() {
        let z: Vec<f64> = (0..15).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let x: Vec<f64> = (0..15).map(|i| i as f64 / 14.0).collect();
        let k = CachedKernel::from_fn(15, |i, j| x[i] * x[j]);
        let sol = solve(&z, &k, &params(0.5, 0.1)).unwrap();
        let beta = sol.beta();
        assert!(beta.iter().sum::<f64>().abs() < 1e-9);
        assert!(beta.iter().all(|b| b.abs() <= 0.5 + 1e-12));
    }
}
