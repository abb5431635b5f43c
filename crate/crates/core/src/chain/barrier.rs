//! Log-barrier interior-point method for small spectral-norm programs.
//!
//! Problems have the shape
//!
//! ```text
//! minimize    cᵀy
//! subject to  A y = b
//!             y_k > 0                      for k < n_pos
//!             [ t I   M(y) ]
//!             [ M(y)ᵀ t I  ]  ⪰ 0          (optional)
//! ```
//!
//! where `M(y) = M₀ + Σ_k y_k C_k` and every `C_k` is a handful of scaled
//! unit entries. The dilation block is positive semidefinite exactly when
//! `t ≥ ‖M(y)‖₂`, so minimizing `t` minimizes the spectral norm.
//!
//! Equality constraints are eliminated once through an orthonormal null-space
//! basis; each centering step is then an unconstrained damped Newton
//! iteration on `τ·cᵀy + barrier(y)`.

use crate::linalg::{self, cholesky, cholesky_inverse, Matrix};

/// `M(y) = base + Σ coef · y[var] · e_row e_colᵀ`, bounded by `y[t_var]`.
#[derive(Debug, Clone)]
pub(crate) struct NormBound {
    pub base: Matrix,
    /// `(var, row, col, coef)` entries of the `C_k`.
    pub terms: Vec<(usize, usize, usize, f64)>,
    pub t_var: usize,
}

impl NormBound {
    pub fn matrix(&self, y: &[f64]) -> Matrix {
        let mut m = self.base.clone();
        for &(k, r, c, a) in &self.terms {
            m[(r, c)] += a * y[k];
        }
        m
    }

    fn dilation(&self, y: &[f64]) -> Matrix {
        let n = self.base.rows();
        let m = self.matrix(y);
        let t = y[self.t_var];
        let mut d = Matrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            d[(i, i)] = t;
            d[(n + i, n + i)] = t;
            for j in 0..n {
                d[(i, n + j)] = m[(i, j)];
                d[(n + j, i)] = m[(i, j)];
            }
        }
        d
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub n_vars: usize,
    pub n_pos: usize,
    pub objective: Vec<f64>,
    /// Orthonormal basis of `{d : A d = 0}`, one column per free direction.
    pub null_basis: Matrix,
    pub norm_bound: Option<NormBound>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BarrierOptions {
    /// Stop once the duality-gap bound `ν/τ` falls below this.
    pub gap_tolerance: f64,
    pub growth: f64,
    pub max_newton_steps: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct BarrierOutcome {
    pub y: Vec<f64>,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum BarrierFailure {
    /// The starting point is outside the barrier domain.
    InfeasibleStart,
    /// Newton iterations ran out before the gap target was met.
    Stalled { newton_steps: usize, gap_bound: f64 },
}

/// Hook evaluated after every centering; returning `true` stops early.
pub(crate) type EarlyStop<'a> = &'a dyn Fn(&[f64]) -> bool;

impl Problem {
    fn barrier_parameter(&self) -> f64 {
        self.n_pos as f64 + self.norm_bound.as_ref().map_or(0.0, |nb| 2.0 * nb.base.rows() as f64)
    }

    /// Barrier value, or `None` outside the domain.
    fn barrier(&self, y: &[f64]) -> Option<f64> {
        let mut f = 0.0;
        for &v in &y[..self.n_pos] {
            if !(v > 0.0) {
                return None;
            }
            f -= v.ln();
        }
        if let Some(nb) = &self.norm_bound {
            let l = cholesky(&nb.dilation(y))?;
            f -= 2.0 * l.diag().iter().map(|d| d.ln()).sum::<f64>();
        }
        Some(f)
    }

    fn gradient_hessian(&self, y: &[f64]) -> Option<(Vec<f64>, Matrix)> {
        let nv = self.n_vars;
        let mut g = vec![0.0; nv];
        let mut h = Matrix::zeros(nv, nv);
        for k in 0..self.n_pos {
            g[k] = -1.0 / y[k];
            h[(k, k)] = 1.0 / (y[k] * y[k]);
        }
        if let Some(nb) = &self.norm_bound {
            let n = nb.base.rows();
            let l = cholesky(&nb.dilation(y))?;
            let gi = cholesky_inverse(&l);
            let gi2 = gi.matmul(&gi);
            // Dilation coordinates of every term: (var, a, b, coef) with the
            // symmetric pair of entries at (a, b) and (b, a).
            let terms: Vec<(usize, usize, usize, f64)> =
                nb.terms.iter().map(|&(k, r, c, a)| (k, r, n + c, a)).collect();
            for &(k, a, b, alpha) in &terms {
                g[k] -= 2.0 * alpha * gi[(a, b)];
            }
            let t = nb.t_var;
            g[t] -= gi.diag().iter().sum::<f64>();
            for (i, &(k, a, b, alpha)) in terms.iter().enumerate() {
                for &(l_var, c, d, beta) in &terms[i..] {
                    let v = 2.0 * alpha * beta * (gi[(a, d)] * gi[(b, c)] + gi[(a, c)] * gi[(b, d)]);
                    h[(k, l_var)] += v;
                    if (k, a, b) != (l_var, c, d) {
                        h[(l_var, k)] += v;
                    }
                }
                let v = 2.0 * alpha * gi2[(a, b)];
                h[(k, t)] += v;
                h[(t, k)] += v;
            }
            h[(t, t)] += gi.as_slice().iter().map(|v| v * v).sum::<f64>();
        }
        Some((g, h))
    }

    /// Largest step keeping the positive variables positive.
    fn max_positive_step(&self, y: &[f64], dy: &[f64]) -> f64 {
        let mut s = f64::INFINITY;
        for k in 0..self.n_pos {
            if dy[k] < 0.0 {
                s = s.min(-y[k] / dy[k]);
            }
        }
        s
    }

    /// Runs the barrier method from a strictly feasible `y0`.
    pub fn solve(
        &self,
        y0: &[f64],
        opts: &BarrierOptions,
        stop: Option<EarlyStop<'_>>,
    ) -> Result<BarrierOutcome, BarrierFailure> {
        let mut y = y0.to_vec();
        if self.barrier(&y).is_none() {
            return Err(BarrierFailure::InfeasibleStart);
        }
        let nu = self.barrier_parameter();
        let z = &self.null_basis;
        let r = z.cols();
        let objective_scale = {
            let c: f64 = linalg::dot(&self.objective, &y).abs();
            c.max(1e-3)
        };
        let mut tau = nu / objective_scale;
        let mut steps = 0usize;

        loop {
            // Centering.
            for _ in 0..200 {
                if r == 0 {
                    break;
                }
                let (mut g, h) = match self.gradient_hessian(&y) {
                    Some(gh) => gh,
                    None => return Err(BarrierFailure::InfeasibleStart),
                };
                for (gk, ck) in g.iter_mut().zip(&self.objective) {
                    *gk += tau * ck;
                }
                let zg = z.tr_mul_vec(&g);
                let hz = h.matmul(z);
                let mut reduced = z.transpose().matmul(&hz);
                let dz = match solve_spd_with_ridge(&mut reduced, &zg) {
                    Some(d) => d,
                    None => break,
                };
                let dy: Vec<f64> = z.mul_vec(&dz).iter().map(|v| -v).collect();
                let slope = linalg::dot(&g, &dy);
                let decrement_sq = -slope;
                steps += 1;
                if decrement_sq / 2.0 <= 1e-10 {
                    break;
                }
                let f0 = tau * linalg::dot(&self.objective, &y) + self.barrier(&y).unwrap_or(f64::INFINITY);
                let mut s = (0.99 * self.max_positive_step(&y, &dy)).min(1.0);
                let mut accepted = false;
                while s > 1e-14 {
                    let trial: Vec<f64> = y.iter().zip(&dy).map(|(a, b)| a + s * b).collect();
                    if let Some(b) = self.barrier(&trial) {
                        let f1 = tau * linalg::dot(&self.objective, &trial) + b;
                        if f1 <= f0 + 0.25 * s * slope {
                            y = trial;
                            accepted = true;
                            break;
                        }
                    }
                    s *= 0.5;
                }
                if !accepted {
                    break;
                }
                if steps >= opts.max_newton_steps {
                    return Err(BarrierFailure::Stalled {
                        newton_steps: steps,
                        gap_bound: nu / tau,
                    });
                }
            }
            let gap = nu / tau;
            if gap <= opts.gap_tolerance || stop.map_or(false, |f| f(&y)) {
                return Ok(BarrierOutcome {
                    y,
                    newton_steps: steps,
                });
            }
            tau *= opts.growth;
        }
    }
}

/// Solves `H x = g` for symmetric positive (semi)definite `H`, adding a
/// growing ridge when the plain factorization fails.
fn solve_spd_with_ridge(h: &mut Matrix, g: &[f64]) -> Option<Vec<f64>> {
    let n = h.rows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0_f64, f64::max).max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..8 {
        let mut hr = h.clone();
        for i in 0..n {
            hr[(i, i)] += ridge;
        }
        if let Some(l) = cholesky(&hr) {
            return Some(linalg::cholesky_solve(&l, g));
        }
        ridge = if ridge == 0.0 { 1e-14 * scale } else { ridge * 100.0 };
    }
    None
}

/// Least-norm solution of `A x = b` through the eigen-decomposition of `AAᵀ`.
pub(crate) fn least_norm_solution(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let aat = a.matmul(&a.transpose());
    let (vals, vecs) = linalg::symmetric_eigen(&aat).ok()?;
    let top = vals.first().copied().unwrap_or(0.0);
    let cut = 1e-12 * top.max(f64::MIN_POSITIVE);
    // u = (AAᵀ)⁺ b
    let mut u = vec![0.0; b.len()];
    for (i, &lam) in vals.iter().enumerate() {
        if lam > cut {
            let vi = vecs.col(i);
            let coef = linalg::dot(&vi, b) / lam;
            for (uj, vj) in u.iter_mut().zip(&vi) {
                *uj += coef * vj;
            }
        }
    }
    let x = a.tr_mul_vec(&u);
    let resid: f64 = a.mul_vec(&x).iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    (resid <= 1e-9).then_some(x)
}
