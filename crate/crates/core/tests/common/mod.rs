//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the numerical code under test.
#![allow(dead_code)]

use ergomix::Matrix;
use rand::Rng;

/// Singular values by one-sided Jacobi rotations on the columns.
pub fn jacobi_singular_values(m: &Matrix) -> Vec<f64> {
    let (rows, cols) = (m.rows(), m.cols());
    let mut a: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| m[(i, j)]).collect()).collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = a[p].iter().map(|x| x * x).sum();
                let beta: f64 = a[q].iter().map(|x| x * x).sum();
                let gamma: f64 = a[p].iter().zip(&a[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (x, y) = (a[p][i], a[q][i]);
                    a[p][i] = c * x - s * y;
                    a[q][i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = a.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

pub fn jacobi_norm(m: &Matrix) -> f64 {
    jacobi_singular_values(m)[0]
}

/// Γ(k/2) for positive integer k via the half-integer recursion.
pub fn gamma_half(k: u32) -> f64 {
    let (mut g, mut x) = if k % 2 == 0 { (1.0, 1.0) } else { (std::f64::consts::PI.sqrt(), 0.5) };
    while x < k as f64 / 2.0 - 1e-12 {
        g *= x;
        x += 1.0;
    }
    g
}

pub fn chi2_density(x: f64, k: u32) -> f64 {
    if x <= 0.0 {
        return if k == 2 { 0.5 } else { 0.0 };
    }
    let h = k as f64 / 2.0;
    ((h - 1.0) * x.ln() - x / 2.0 - h * 2f64.ln()).exp() / gamma_half(k)
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, eps: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive(f, a, m, left, eps / 2.0, depth - 1) + adaptive(f, m, b, right, eps / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    // Split first so narrow peaks are not missed by the initial estimate.
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            adaptive(f, lo, hi, simpson(f, lo, hi), eps / pieces as f64, 40)
        })
        .sum()
}

/// Upper tail of χ²_k by integrating the density from `x` to far out.
pub fn chi2_tail_quadrature(x: f64, k: u32) -> f64 {
    let upper = x + 40.0 * (k as f64).sqrt() + 200.0;
    integrate(&|t| chi2_density(t, k), x, upper, 1e-13)
}

/// 3×3 inverse by cofactors.
pub fn inverse3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c = |r: usize, s: usize| {
        let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
        let (s1, s2) = ((s + 1) % 3, (s + 2) % 3);
        m[r1][s1] * m[r2][s2] - m[r1][s2] * m[r2][s1]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        for s in 0..3 {
            inv[s][r] = c(r, s) / det;
        }
    }
    inv
}

fn quad3(a: &[[f64; 3]; 3], v: &[f64; 3]) -> f64 {
    (0..3).map(|i| (0..3).map(|j| v[i] * a[i][j] * v[j]).sum::<f64>()).sum()
}

/// Minimum of `(p−μ)ᵀΣ⁻¹(p−μ)` over the plane `n·μ = n·c`, found by
/// Newton iterations in an orthonormal parametrization of the plane.
pub fn plane_mahalanobis_oracle(p: [f64; 3], cov: [[f64; 3]; 3], c: [f64; 3], n: [f64; 3]) -> f64 {
    let inv = inverse3(&cov);
    let nn = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    let n = [n[0] / nn, n[1] / nn, n[2] / nn];
    let seed = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = seed[0] * n[0] + seed[1] * n[1] + seed[2] * n[2];
    let mut u = [seed[0] - d * n[0], seed[1] - d * n[1], seed[2] - d * n[2]];
    let un = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    u.iter_mut().for_each(|x| *x /= un);
    let v = [n[1] * u[2] - n[2] * u[1], n[2] * u[0] - n[0] * u[2], n[0] * u[1] - n[1] * u[0]];
    let at = |s: f64, t: f64| -> [f64; 3] { [c[0] + s * u[0] + t * v[0], c[1] + s * u[1] + t * v[1], c[2] + s * u[2] + t * v[2]] };
    let f = |s: f64, t: f64| {
        let m = at(s, t);
        quad3(&inv, &[p[0] - m[0], p[1] - m[1], p[2] - m[2]])
    };
    let (mut s, mut t) = (0.0f64, 0.0f64);
    // The objective is an exact quadratic in (s, t); finite-difference
    // Newton converges in a couple of steps, a few more polish round-off.
    for _ in 0..8 {
        let h = 1e-3 * (1.0 + s.abs() + t.abs());
        let f0 = f(s, t);
        let gs = (f(s + h, t) - f(s - h, t)) / (2.0 * h);
        let gt = (f(s, t + h) - f(s, t - h)) / (2.0 * h);
        let hss = (f(s + h, t) - 2.0 * f0 + f(s - h, t)) / (h * h);
        let htt = (f(s, t + h) - 2.0 * f0 + f(s, t - h)) / (h * h);
        let hst = (f(s + h, t + h) - f(s + h, t - h) - f(s - h, t + h) + f(s - h, t - h)) / (4.0 * h * h);
        let det = hss * htt - hst * hst;
        let ds = (htt * gs - hst * gt) / det;
        let dt = (hss * gt - hst * gs) / det;
        s -= ds;
        t -= dt;
    }
    f(s, t)
}

/// Random symmetric positive definite 3×3 matrix with eigenvalues in `[lo, hi]`.
pub fn random_spd3<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> [[f64; 3]; 3] {
    // Random rotation from a normalized quaternion.
    let mut q = [0.0f64; 4];
    loop {
        q.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        let n: f64 = q.iter().map(|x| x * x).sum::<f64>();
        if n > 1e-3 && n <= 1.0 {
            q.iter_mut().for_each(|x| *x /= n.sqrt());
            break;
        }
    }
    let [w, x, y, z] = q;
    let r = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ];
    let l: Vec<f64> = (0..3).map(|_| rng.gen_range(lo..hi)).collect();
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (0..3).map(|k| r[i][k] * l[k] * r[j][k]).sum();
        }
    }
    m
}

/// Characteristic polynomial coefficients (monic, highest first) via
/// Faddeev–LeVerrier.
pub fn char_poly(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    let mut coeffs = vec![1.0];
    let mut m = Matrix::zeros(n, n);
    for k in 1..=n {
        let mut next = a.matmul(&m);
        let c_prev = *coeffs.last().unwrap();
        for i in 0..n {
            next[(i, i)] += c_prev;
        }
        m = next;
        let am = a.matmul(&m);
        let trace: f64 = (0..n).map(|i| am[(i, i)]).sum();
        coeffs.push(-trace / k as f64);
    }
    coeffs
}

type C = (f64, f64);
fn cmul(a: C, b: C) -> C {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}
fn cdiv(a: C, b: C) -> C {
    let d = b.0 * b.0 + b.1 * b.1;
    ((a.0 * b.0 + a.1 * b.1) / d, (a.1 * b.0 - a.0 * b.1) / d)
}

/// Polynomial roots by Durand–Kerner iteration.
pub fn poly_roots(coeffs: &[f64]) -> Vec<C> {
    let n = coeffs.len() - 1;
    let eval = |z: C| coeffs.iter().fold((0.0, 0.0), |acc, &c| {
        let t = cmul(acc, z);
        (t.0 + c, t.1)
    });
    let mut roots: Vec<C> = (0..n)
        .map(|k| {
            let ang = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            (0.9 * ang.cos(), 0.9 * ang.sin())
        })
        .collect();
    for _ in 0..5000 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut den = (1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den = cmul(den, (roots[i].0 - roots[j].0, roots[i].1 - roots[j].1));
                }
            }
            let step = cdiv(eval(roots[i]), den);
            roots[i] = (roots[i].0 - step.0, roots[i].1 - step.1);
            delta = delta.max(step.0.abs() + step.1.abs());
        }
        if delta < 1e-15 {
            break;
        }
    }
    roots
}

/// Kolmogorov–Smirnov statistic of `samples` against Uniform[0, 1].
pub fn ks_uniform(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Standard normal upper tail via the complementary error function
/// (Numerical Recipes' Chebyshev fit, relative error below 1.2e-7).
pub fn normal_upper_tail(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.5 * x.abs());
    let y = t
        * (-x * x - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807 + t * (-1.13520398 + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
    let erfc = if x >= 0.0 { y } else { 2.0 - y };
    0.5 * erfc
}

/// One-sided p-value for `mean(d) > 0` from paired differences (large-sample
/// z test on the mean difference).
pub fn paired_p_value_positive(diffs: &[f64]) -> f64 {
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return if mean > 0.0 { 0.0 } else { 1.0 };
    }
    normal_upper_tail(mean / (var / n).sqrt())
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub mod grid;
