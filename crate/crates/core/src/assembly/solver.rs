use std::collections::VecDeque;

use super::sparse::{dot, norm, SparseOperator};
use crate::error::{LabError, Result};

/// Unknown count above which the factorization gives way to PCG.
pub const DIRECT_LIMIT: usize = 20_000;
/// Relative residual required of every solve.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Equality constraints for [`solve_spd`].
#[derive(Clone, Debug, PartialEq)]
pub enum Constraints {
    None,
    /// Prescribed values at listed indices.
    Dirichlet(Vec<(usize, f64)>),
    /// Operator is singular on constants; the right-hand side is projected
    /// onto the range and the solution has zero weighted mean.
    MeanZero(Vec<f64>),
}

/// Reverse Cuthill-McKee ordering; `perm[k]` is the original index placed at `k`.
pub fn rcm_ordering(a: &SparseOperator) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut start_candidates: Vec<usize> = (0..n).collect();
    start_candidates.sort_by_key(|&i| (degree[i], i));
    for &s in &start_candidates {
        if visited[s] {
            continue;
        }
        let root = pseudo_peripheral(a, s, &degree);
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        let mut nbrs = Vec::new();
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(a.row(v).0.iter().copied().filter(|&j| !visited[j]));
            nbrs.sort_by_key(|&j| (degree[j], j));
            for &j in &nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(a: &SparseOperator, root: usize) -> (usize, Vec<usize>) {
    let mut dist = std::collections::HashMap::new();
    dist.insert(root, 0usize);
    let mut queue = VecDeque::from([root]);
    let mut last = vec![root];
    let mut depth = 0;
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        for &j in a.row(v).0 {
            if !dist.contains_key(&j) {
                dist.insert(j, d + 1);
                queue.push_back(j);
                if d + 1 > depth {
                    depth = d + 1;
                    last.clear();
                }
                if d + 1 == depth {
                    last.push(j);
                }
            }
        }
    }
    (depth, last)
}

fn pseudo_peripheral(a: &SparseOperator, start: usize, degree: &[usize]) -> usize {
    let mut root = start;
    let (mut depth, mut last) = bfs_levels(a, root);
    for _ in 0..8 {
        let cand = *last.iter().min_by_key(|&&j| (degree[j], j)).unwrap_or(&root);
        let (d, l) = bfs_levels(a, cand);
        if d <= depth {
            break;
        }
        root = cand;
        depth = d;
        last = l;
    }
    root
}

/// Envelope (skyline) Cholesky factor `P A P^T = L L^T`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    row_start: Vec<usize>,
    data: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &SparseOperator) -> Result<Self> {
        let n = a.dim();
        let perm = rcm_ordering(a);
        let mut inv = vec![0usize; n];
        for (k, &i) in perm.iter().enumerate() {
            inv[i] = k;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (k, &i) in perm.iter().enumerate() {
            for &j in a.row(i).0 {
                first[k] = first[k].min(inv[j]);
            }
        }
        let mut row_start = Vec::with_capacity(n + 1);
        row_start.push(0);
        for k in 0..n {
            row_start.push(row_start[k] + (k - first[k] + 1));
        }
        let mut data = vec![0.0; row_start[n]];
        for (k, &i) in perm.iter().enumerate() {
            let (c, v) = a.row(i);
            for (&j, &x) in c.iter().zip(v) {
                let m = inv[j];
                if m <= k {
                    data[row_start[k] + m - first[k]] += x;
                }
            }
        }
        let scale = a.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
        for k in 0..n {
            let fk = first[k];
            let rk = row_start[k];
            for j in fk..k {
                let fj = first[j];
                let rj = row_start[j];
                let lo = fk.max(fj);
                let mut s = data[rk + j - fk];
                for t in lo..j {
                    s -= data[rk + t - fk] * data[rj + t - fj];
                }
                data[rk + j - fk] = s / data[rj + j - fj];
            }
            let mut d = data[rk + k - fk];
            for t in fk..k {
                let l = data[rk + t - fk];
                d -= l * l;
            }
            if !(d > 1e-14 * scale) {
                return Err(LabError::Singular(format!(
                    "non-positive pivot {d:e} at step {k} of {n} (operator not positive definite)"
                )));
            }
            data[rk + k - fk] = d.sqrt();
        }
        Ok(Self { perm, first, row_start, data })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for k in 0..n {
            let (fk, rk) = (self.first[k], self.row_start[k]);
            let mut s = y[k];
            for t in fk..k {
                s -= self.data[rk + t - fk] * y[t];
            }
            y[k] = s / self.data[rk + k - fk];
        }
        for k in (0..n).rev() {
            let (fk, rk) = (self.first[k], self.row_start[k]);
            y[k] /= self.data[rk + k - fk];
            let yk = y[k];
            for t in fk..k {
                y[t] -= self.data[rk + t - fk] * yk;
            }
        }
        let mut x = vec![0.0; n];
        for (k, &i) in self.perm.iter().enumerate() {
            x[i] = y[k];
        }
        x
    }
}

/// Jacobi-preconditioned conjugate gradients.
pub fn pcg(a: &SparseOperator, b: &[f64], x0: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.dim();
    let bn = norm(b);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    if bn == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let diag = a.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(LabError::Singular("non-positive diagonal entry".into()));
    }
    let mut r: Vec<f64> = a.mul_vec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = norm(&r) / bn;
    for _ in 0..max_iter {
        if res <= tol {
            return Ok(x);
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(LabError::Singular("operator not positive definite in CG".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r) / bn;
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res <= tol {
        Ok(x)
    } else {
        Err(LabError::NoConvergence { iterations: max_iter, residual: res })
    }
}

/// Reusable solver for one SPD operator: a direct factor at desk scale,
/// PCG above [`DIRECT_LIMIT`] unknowns.
#[derive(Clone, Debug)]
pub enum SpdSolver {
    Direct(SparseOperator, Cholesky),
    Iterative(SparseOperator),
}

impl SpdSolver {
    pub fn new(a: &SparseOperator) -> Result<Self> {
        if a.dim() <= DIRECT_LIMIT {
            Ok(Self::Direct(a.clone(), Cholesky::factor(a)?))
        } else {
            Ok(Self::Iterative(a.clone()))
        }
    }

    pub fn operator(&self) -> &SparseOperator {
        match self {
            Self::Direct(a, _) | Self::Iterative(a) => a,
        }
    }

    /// Solves `A x = b` to [`SOLVE_TOLERANCE`], with one refinement step
    /// on the direct path if needed.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let bn = norm(b);
        if bn == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        match self {
            Self::Direct(a, l) => {
                let mut x = l.solve(b);
                for _ in 0..3 {
                    let r: Vec<f64> = a.mul_vec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
                    let res = norm(&r) / bn;
                    if res <= SOLVE_TOLERANCE {
                        return Ok(x);
                    }
                    let dx = l.solve(&r);
                    x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
                }
                let r: Vec<f64> = a.mul_vec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
                let res = norm(&r) / bn;
                if res <= SOLVE_TOLERANCE {
                    Ok(x)
                } else {
                    Err(LabError::NoConvergence { iterations: 3, residual: res })
                }
            }
            Self::Iterative(a) => pcg(a, b, None, SOLVE_TOLERANCE, 20 * a.dim() + 1000),
        }
    }
}

/// Solves `A x = b` under equality constraints.
pub fn solve_spd(a: &SparseOperator, b: &[f64], constraints: &Constraints) -> Result<Vec<f64>> {
    let n = a.dim();
    if b.len() != n {
        return Err(LabError::InvalidArgument(format!("rhs has length {} for an operator of dimension {n}", b.len())));
    }
    match constraints {
        Constraints::None => SpdSolver::new(a)?.solve(b),
        Constraints::Dirichlet(fixed) => {
            let mut x = vec![0.0; n];
            let mut is_fixed = vec![false; n];
            for &(i, v) in fixed {
                if i >= n {
                    return Err(LabError::InvalidArgument(format!("constrained index {i} out of range")));
                }
                is_fixed[i] = true;
                x[i] = v;
            }
            let free: Vec<usize> = (0..n).filter(|&i| !is_fixed[i]).collect();
            if free.is_empty() {
                return Ok(x);
            }
            let ax = a.mul_vec(&x);
            let rhs: Vec<f64> = free.iter().map(|&i| b[i] - ax[i]).collect();
            let y = SpdSolver::new(&a.submatrix(&free))?.solve(&rhs)?;
            for (k, &i) in free.iter().enumerate() {
                x[i] = y[k];
            }
            Ok(x)
        }
        Constraints::MeanZero(weights) => {
            if weights.len() != n {
                return Err(LabError::InvalidArgument("mean-zero weights must match the dimension".into()));
            }
            if n == 0 {
                return Ok(Vec::new());
            }
            let mean_b = b.iter().sum::<f64>() / n as f64;
            let projected: Vec<f64> = b.iter().map(|v| v - mean_b).collect();
            let mut x = solve_spd(a, &projected, &Constraints::Dirichlet(vec![(0, 0.0)]))?;
            let wsum: f64 = weights.iter().sum();
            let shift = dot(weights, &x) / wsum;
            x.iter_mut().for_each(|v| *v -= shift);
            let r: Vec<f64> = a.mul_vec(&x).iter().zip(&projected).map(|(ax, bi)| bi - ax).collect();
            let scale = norm(&projected).max(f64::MIN_POSITIVE);
            if norm(&r) > 1e-8 * scale.max(norm(b)) {
                return Err(LabError::Singular(format!(
                    "mean-zero system is not singular only on constants (residual {:e})",
                    norm(&r) / scale
                )));
            }
            Ok(x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> SparseOperator {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseOperator::from_upper_triplets(n, &t)
    }

    #[test]
    fn identity_solve() {
        let x = solve_spd(&SparseOperator::identity(3), &[1.0, 0.0, 0.0], &Constraints::None).unwrap();
        assert_eq!(x, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn cholesky_matches_pcg() {
        let a = laplace_1d(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let x1 = Cholesky::factor(&a).unwrap().solve(&b);
        let x2 = pcg(&a, &b, None, 1e-13, 1000).unwrap();
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn singular_operator_is_rejected() {
        let a = SparseOperator::from_upper_triplets(2, &[(0, 0, 1.0), (0, 1, -1.0), (1, 1, 1.0)]);
        assert!(matches!(solve_spd(&a, &[1.0, -1.0], &Constraints::None), Err(LabError::Singular(_))));
        let x = solve_spd(&a, &[1.0, -1.0], &Constraints::MeanZero(vec![1.0, 1.0])).unwrap();
        assert!((x[0] + x[1]).abs() < 1e-14);
        assert!((x[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_reduction() {
        let a = laplace_1d(5);
        let x = solve_spd(&a, &[0.0; 5], &Constraints::Dirichlet(vec![(0, 1.0), (4, 5.0)])).unwrap();
        for (i, v) in x.iter().enumerate() {
            assert!((v - (1.0 + i as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = laplace_1d(30);
        let mut p = rcm_ordering(&a);
        p.sort_unstable();
        assert_eq!(p, (0..30).collect::<Vec<_>>());
    }
}
