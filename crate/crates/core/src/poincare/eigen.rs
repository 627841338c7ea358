//! Block subspace iteration with Rayleigh–Ritz for symmetric pencils.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{dot, SparseOperator};
use crate::error::{LabError, Result};

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    /// `‖A x - θ B x‖ / ‖θ B x‖`.
    pub residual: f64,
}

const BLOCK: usize = 6;
const MAX_ITER: usize = 2000;

fn b_project_out(y: &mut [f64], basis: &[(Vec<f64>, Vec<f64>)]) {
    // basis holds (q, B q) with qᵀ B q = 1
    for (q, bq) in basis {
        let c = dot(bq, y);
        y.iter_mut().zip(q).for_each(|(yi, qi)| *yi -= c * qi);
    }
}

/// Extreme eigenpair of `A x = θ B x` (`B` SPD on the iteration space),
/// iterating `X ← op(X)` where `op` amplifies the wanted end of the spectrum.
/// Iterates are kept `B`-orthogonal to `deflate`.
pub(crate) fn subspace_iteration(
    op: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    a: &SparseOperator,
    b: &SparseOperator,
    deflate: &[Vec<f64>],
    largest: bool,
) -> Result<EigenPair> {
    let n = a.dim();
    let mut fixed: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for d in deflate {
        let mut q = d.clone();
        b_project_out(&mut q, &fixed);
        let bq = b.mul_vec(&q);
        let s = dot(&q, &bq).sqrt();
        fixed.push((q.iter().map(|x| x / s).collect(), bq.iter().map(|x| x / s).collect()));
    }
    let p = BLOCK.min(n.saturating_sub(deflate.len())).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
    let mut prev = f64::NAN;
    let mut stable = 0;
    for it in 1..=MAX_ITER {
        // apply, deflate, B-orthonormalize
        let mut q: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(p);
        for xi in &x {
            let mut y = op(xi)?;
            b_project_out(&mut y, &fixed);
            b_project_out(&mut y, &q);
            b_project_out(&mut y, &fixed);
            b_project_out(&mut y, &q);
            let by = b.mul_vec(&y);
            let s = dot(&y, &by);
            if !(s > 0.0) || !s.is_finite() {
                continue;
            }
            let s = s.sqrt();
            q.push((y.iter().map(|v| v / s).collect(), by.iter().map(|v| v / s).collect()));
        }
        if q.is_empty() {
            return Err(LabError::Singular("iteration space collapsed".into()));
        }
        let k = q.len();
        let aq: Vec<Vec<f64>> = q.iter().map(|(v, _)| a.mul_vec(v)).collect();
        let proj = DMatrix::from_fn(k, k, |i, j| 0.5 * (dot(&q[i].0, &aq[j]) + dot(&q[j].0, &aq[i])));
        let eig = SymmetricEigen::new(proj);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        if largest {
            order.reverse();
        }
        x = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; n];
                for (r, (qr, _)) in q.iter().enumerate() {
                    let w = eig.eigenvectors[(r, c)];
                    v.iter_mut().zip(qr).for_each(|(vi, qi)| *vi += w * qi);
                }
                v
            })
            .collect();
        let theta = eig.eigenvalues[order[0]];
        let change = (theta - prev).abs() / theta.abs().max(f64::MIN_POSITIVE);
        prev = theta;
        stable = if change < 1e-13 { stable + 1 } else { 0 };
        if stable >= 3 {
            let v = &x[0];
            let av = a.mul_vec(v);
            let bv = b.mul_vec(v);
            let r: f64 = av.iter().zip(&bv).map(|(p, q)| (p - theta * q).powi(2)).sum::<f64>().sqrt();
            let scale = theta.abs() * dot(&bv, &bv).sqrt();
            let residual = r / scale.max(f64::MIN_POSITIVE);
            if residual < 1e-7 {
                return Ok(EigenPair { value: theta, vector: v.clone(), iterations: it, residual });
            }
        }
    }
    Err(LabError::NoConvergence { iterations: MAX_ITER, residual: prev })
}

/// Smallest eigenpair of `A x = θ B x` for dense symmetric `A` and SPD `B`.
pub fn dense_smallest(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(f64, nalgebra::DVector<f64>)> {
    let l = b.clone().cholesky().ok_or_else(|| LabError::Singular("mass matrix is not positive definite".into()))?;
    let linv = l.l().try_inverse().ok_or_else(|| LabError::Singular("triangular factor not invertible".into()))?;
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let (i, &value) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .ok_or_else(|| LabError::Singular("empty pencil".into()))?;
    let y = eig.eigenvectors.column(i).into_owned();
    Ok((value, linv.transpose() * y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::SpdSolver;

    #[test]
    fn diagonal_pencil() {
        let a = SparseOperator::diagonal_matrix(&[5.0, 2.0, 9.0, 3.0, 7.0, 11.0, 13.0, 4.0]);
        let b = SparseOperator::diagonal_matrix(&[1.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0]);
        let s = SpdSolver::new(&a).unwrap();
        let op = |x: &[f64]| s.solve(&b.mul_vec(x));
        let e = subspace_iteration(&op, &a, &b, &[], false).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
        let id = SparseOperator::identity(8);
        let big = subspace_iteration(&|x: &[f64]| Ok(a.mul_vec(x)), &a, &id, &[], true).unwrap();
        assert!((big.value - 13.0).abs() < 1e-10);
    }
}
