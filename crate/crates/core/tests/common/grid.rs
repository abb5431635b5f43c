//! Brute-force minimization over the feasible transition family of tiny
//! graphs, parametrized by edge flows `f_ij = P_ji w_i`.

use ergomix::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::jacobi_norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// `‖P − w𝟙ᵀ‖₂`
    Plain,
    /// `‖W^{-1/2} P W^{1/2} − qqᵀ‖₂`
    Similarity,
}

pub struct FlowFamily {
    n: usize,
    w: Vec<f64>,
    /// Directed off-diagonal edges; reversible families share one variable
    /// per unordered pair.
    edges: Vec<(usize, usize)>,
    var_of_edge: Vec<usize>,
    n_vars: usize,
    /// Pivot variables as affine functions of the free ones.
    pivots: Vec<(usize, f64, Vec<(usize, f64)>)>,
    free: Vec<usize>,
    consistent: bool,
}

impl FlowFamily {
    pub fn new(n: usize, w: &[f64], edges: &[(usize, usize)], self_loops: bool, reversible: bool) -> Self {
        let mut used = Vec::new();
        let mut var_of_edge = Vec::new();
        let mut n_vars = 0;
        let mut pair_var = std::collections::HashMap::new();
        for &(i, j) in edges {
            if i == j {
                continue;
            }
            if reversible {
                if !edges.contains(&(j, i)) {
                    continue;
                }
                let key = (i.min(j), i.max(j));
                let v = *pair_var.entry(key).or_insert_with(|| {
                    n_vars += 1;
                    n_vars - 1
                });
                used.push((i, j));
                var_of_edge.push(v);
            } else {
                used.push((i, j));
                var_of_edge.push(n_vars);
                n_vars += 1;
            }
        }
        // Equalities: conservation at each node and, without holding, full outflow.
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for node in 0..n {
            let mut a = vec![0.0; n_vars];
            for (e, &(i, j)) in used.iter().enumerate() {
                if i == node {
                    a[var_of_edge[e]] -= 1.0;
                }
                if j == node {
                    a[var_of_edge[e]] += 1.0;
                }
            }
            rows.push((a, 0.0));
            if !self_loops {
                let mut a = vec![0.0; n_vars];
                for (e, &(i, _)) in used.iter().enumerate() {
                    if i == node {
                        a[var_of_edge[e]] += 1.0;
                    }
                }
                rows.push((a, w[node]));
            }
        }
        let (pivots, free, consistent) = rref(rows, n_vars);
        Self {
            n,
            w: w.to_vec(),
            edges: used,
            var_of_edge,
            n_vars,
            pivots,
            free,
            consistent,
        }
    }

    pub fn free_dim(&self) -> usize {
        self.free.len()
    }

    /// `None` when the equalities are inconsistent.
    fn flows(&self, free_vals: &[f64]) -> Option<Vec<f64>> {
        if !self.consistent {
            return None;
        }
        let mut x = vec![0.0; self.n_vars];
        for (k, &v) in self.free.iter().enumerate() {
            x[v] = free_vals[k];
        }
        for (p, c, terms) in &self.pivots {
            x[*p] = c - terms.iter().map(|&(v, a)| a * x[v]).sum::<f64>();
        }
        Some(x)
    }

    pub fn transition(&self, free_vals: &[f64]) -> Option<Matrix> {
        let x = self.flows(free_vals)?;
        if x.iter().any(|&v| v < -1e-13) {
            return None;
        }
        let mut p = Matrix::zeros(self.n, self.n);
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            p[(j, i)] = x[self.var_of_edge[e]].max(0.0) / self.w[i];
        }
        for i in 0..self.n {
            let out: f64 = (0..self.n).filter(|&j| j != i).map(|j| p[(j, i)]).sum();
            if out > 1.0 + 1e-12 {
                return None;
            }
            p[(i, i)] = (1.0 - out).max(0.0);
        }
        Some(p)
    }

    pub fn value(&self, p: &Matrix, obj: Objective) -> f64 {
        jacobi_norm(&objective_matrix(p, &self.w, obj))
    }

    fn eval(&self, free_vals: &[f64], obj: Objective) -> f64 {
        match self.transition(free_vals) {
            Some(p) => self.value(&p, obj),
            None => f64::INFINITY,
        }
    }

    /// Grid search over the free flows followed by a shrinking pattern
    /// search around the best cells. `None` if no grid point is feasible.
    pub fn minimize(&self, obj: Objective, seed: u64) -> Option<(f64, Matrix)> {
        let d = self.free_dim();
        let hi = self.w.iter().cloned().fold(0.0, f64::max);
        let per_dim: usize = match d {
            0 => 1,
            1 => 2001,
            2 => 201,
            3 => 35,
            _ => 15,
        };
        let h = hi / (per_dim.max(2) - 1) as f64;
        let mut best: Vec<(f64, Vec<f64>)> = Vec::new();
        let total = per_dim.pow(d as u32);
        let mut pt = vec![0.0; d];
        for idx in 0..total {
            let mut r = idx;
            for v in pt.iter_mut() {
                *v = (r % per_dim) as f64 * h;
                r /= per_dim;
            }
            let f = self.eval(&pt, obj);
            if f.is_finite() {
                best.push((f, pt.clone()));
                if best.len() > 64 {
                    best.sort_by(|a, b| a.0.total_cmp(&b.0));
                    best.truncate(8);
                }
            }
        }
        best.sort_by(|a, b| a.0.total_cmp(&b.0));
        best.truncate(8);
        if best.is_empty() {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut overall = (f64::INFINITY, Vec::new());
        for (f0, x0) in best {
            let (f, x) = self.pattern_search(x0, f0, h.max(1e-3), obj, &mut rng);
            if f < overall.0 {
                overall = (f, x);
            }
        }
        let p = self.transition(&overall.1).expect("feasible optimum");
        Some((overall.0, p))
    }

    fn pattern_search(&self, mut x: Vec<f64>, mut fx: f64, mut step: f64, obj: Objective, rng: &mut ChaCha8Rng) -> (f64, Vec<f64>) {
        let d = x.len();
        if d == 0 {
            return (fx, x);
        }
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for i in 0..d {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; d];
                e[i] = s;
                dirs.push(e);
            }
            for j in i + 1..d {
                for (a, b) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    let mut e = vec![0.0; d];
                    e[i] = a;
                    e[j] = b;
                    dirs.push(e);
                }
            }
        }
        while step > 1e-7 {
            let mut improved = false;
            let mut trial_dirs = dirs.clone();
            for _ in 0..8 * d {
                let mut e: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n = e.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                e.iter_mut().for_each(|v| *v /= n);
                trial_dirs.push(e);
            }
            for e in &trial_dirs {
                let y: Vec<f64> = x.iter().zip(e).map(|(a, b)| a + step * b).collect();
                let fy = self.eval(&y, obj);
                if fy < fx - 1e-15 {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        (fx, x)
    }
}

pub fn objective_matrix(p: &Matrix, w: &[f64], obj: Objective) -> Matrix {
    let n = w.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = match obj {
                Objective::Plain => p[(i, j)] - w[i],
                Objective::Similarity => p[(i, j)] * (w[j] / w[i]).sqrt() - (w[i] * w[j]).sqrt(),
            };
        }
    }
    m
}

type Pivot = (usize, f64, Vec<(usize, f64)>);

/// Reduced row echelon form of `[A | b]`: returns each pivot variable as
/// `x_p = c − Σ a_v x_v` over free variables, plus the free variables.
fn rref(rows: Vec<(Vec<f64>, f64)>, n_vars: usize) -> (Vec<Pivot>, Vec<usize>, bool) {
    let mut m: Vec<Vec<f64>> = rows
        .into_iter()
        .map(|(mut a, b)| {
            a.push(b);
            a
        })
        .collect();
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for c in 0..n_vars {
        let Some(best) = (r..m.len()).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())) else { break };
        if m[best][c].abs() < 1e-12 {
            continue;
        }
        m.swap(r, best);
        let piv = m[r][c];
        m[r].iter_mut().for_each(|v| *v /= piv);
        for k in 0..m.len() {
            if k != r && m[k][c].abs() > 0.0 {
                let f = m[k][c];
                let row_r = m[r].clone();
                m[k].iter_mut().zip(&row_r).for_each(|(v, rv)| *v -= f * rv);
            }
        }
        pivot_cols.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    // Rows left without a pivot must read 0 = 0.
    let consistent = m[r..].iter().all(|row| row[n_vars].abs() < 1e-10);
    let free: Vec<usize> = (0..n_vars).filter(|c| !pivot_cols.contains(c)).collect();
    let pivots = pivot_cols
        .iter()
        .enumerate()
        .map(|(row, &c)| {
            let terms = free.iter().filter(|&&f| m[row][f].abs() > 1e-14).map(|&f| (f, m[row][f])).collect();
            (c, m[row][n_vars], terms)
        })
        .collect();
    (pivots, free, consistent)
}

/// Strongly connected directed graphs on three labeled nodes, as lists of
/// off-diagonal edges.
pub fn strongly_connected_triples() -> Vec<Vec<(usize, usize)>> {
    let pairs = [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)];
    let mut out = Vec::new();
    for mask in 0u32..64 {
        let edges: Vec<(usize, usize)> = pairs.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &e)| e).collect();
        let reach = |s: usize| {
            let mut seen = [false; 3];
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(u) = stack.pop() {
                for &(a, b) in &edges {
                    if a == u && !seen[b] {
                        seen[b] = true;
                        stack.push(b);
                    }
                }
            }
            seen.iter().all(|&x| x)
        };
        if (0..3).all(reach) {
            out.push(edges);
        }
    }
    out
}

/// Period-1 test for a strongly connected 3-node digraph without holding.
pub fn has_two_and_three_cycles(edges: &[(usize, usize)]) -> bool {
    let two = edges.iter().any(|&(a, b)| edges.contains(&(b, a)));
    let three = (edges.contains(&(0, 1)) && edges.contains(&(1, 2)) && edges.contains(&(2, 0)))
        || (edges.contains(&(0, 2)) && edges.contains(&(2, 1)) && edges.contains(&(1, 0)));
    two && three
}
