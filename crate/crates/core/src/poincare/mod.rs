//! Weighted Poincaré, trace and vector-field constants from constrained
//! generalized eigenproblems (p = 2), plus randomized inequality audits.

mod audit;
mod eigen;
mod rmean;

pub use audit::{inequality_audit, AuditRow, AuditTable};
pub use eigen::{dense_smallest, EigenPair};
pub use rmean::r_mean;

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::assembly::{boundary_mass, mass, stiffness, SparseOperator, SpdSolver, WeightSpec};
use crate::error::{LabError, Result};
use crate::geometry::{Mesh, PartLabel, Point};
use eigen::subspace_iteration;

/// Relative singular-value threshold for the rank of the normals of `A`.
pub const SPAN_RANK_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintDescriptor {
    MeanZero,
    ZeroTrace { part: PartLabel },
    TraceNormalization { part: PartLabel },
    NormalTrace { part: PartLabel, span_rank: usize, span_basis: Vec<Point> },
}

/// One spectral constant: `constant = eigenvalue^{-1/2}` for Poincaré-type
/// quotients and `eigenvalue^{1/2}` for the trace quotient.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub constant: f64,
    pub eigenvalue: f64,
    #[serde(skip)]
    pub minimizer: Vec<f64>,
    pub weight: WeightSpec,
    pub constraint: ConstraintDescriptor,
    pub mesh_hash: String,
    pub iterations: usize,
    pub residual: f64,
}

/// FNV-1a of the mesh text form.
pub fn mesh_hash(mesh: &Mesh) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in mesh.to_text().bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

fn estimate(
    mesh: &Mesh,
    eig: EigenPair,
    weight: WeightSpec,
    constraint: ConstraintDescriptor,
    inverse: bool,
) -> Result<SpectralEstimate> {
    if !(eig.value > 0.0) {
        return Err(LabError::Singular(format!("non-positive eigenvalue {:e}", eig.value)));
    }
    Ok(SpectralEstimate {
        constant: if inverse { eig.value.powf(-0.5) } else { eig.value.sqrt() },
        eigenvalue: eig.value,
        minimizer: eig.vector,
        weight,
        constraint,
        mesh_hash: mesh_hash(mesh),
        iterations: eig.iterations,
        residual: eig.residual,
    })
}

fn trace_ratio(a: &SparseOperator) -> f64 {
    a.diagonal().iter().sum::<f64>()
}

/// `μ̄_{2,α}(G)⁻¹`: smallest nonzero eigenvalue of the weighted stiffness
/// against the mass on mean-zero fields.
pub fn estimate_scalar_constant(mesh: &Mesh, weight: &WeightSpec) -> Result<SpectralEstimate> {
    let w = WeightSpec::new(weight.alpha, weight.part)?;
    let k = stiffness(mesh, Some(&w))?;
    let m = mass(mesh);
    let sigma = 1e-6 * trace_ratio(&k) / trace_ratio(&m);
    let solver = SpdSolver::new(&k.add_scaled(sigma, &m))?;
    let op = |x: &[f64]| solver.solve(&m.mul_vec(x));
    let ones = vec![1.0; mesh.num_vertices()];
    let eig = subspace_iteration(&op, &k, &m, &[ones], false)?;
    estimate(mesh, eig, w, ConstraintDescriptor::MeanZero, true)
}

/// Scalar constant for fields vanishing on `label`.
pub fn estimate_zero_trace_constant(mesh: &Mesh, label: PartLabel, weight: &WeightSpec) -> Result<SpectralEstimate> {
    let w = WeightSpec::new(weight.alpha, weight.part)?;
    let fixed: BTreeSet<usize> = mesh.part_vertices(label).into_iter().collect();
    if fixed.is_empty() {
        return Err(LabError::EmptyPart(label));
    }
    let free: Vec<usize> = (0..mesh.num_vertices()).filter(|i| !fixed.contains(i)).collect();
    let k = stiffness(mesh, Some(&w))?.submatrix(&free);
    let m = mass(mesh).submatrix(&free);
    let solver = SpdSolver::new(&k)?;
    let op = |x: &[f64]| solver.solve(&m.mul_vec(x));
    let mut eig = subspace_iteration(&op, &k, &m, &[], false)?;
    let mut full = vec![0.0; mesh.num_vertices()];
    for (v, &i) in eig.vector.iter().zip(&free) {
        full[i] = *v;
    }
    eig.vector = full;
    estimate(mesh, eig, w, ConstraintDescriptor::ZeroTrace { part: label }, true)
}

/// `λ_{2,α}(A)`: square root of the largest eigenvalue of the boundary mass
/// on `A` against mass plus weighted stiffness.
pub fn estimate_trace_constant(mesh: &Mesh, a_label: PartLabel, weight: &WeightSpec) -> Result<SpectralEstimate> {
    let w = WeightSpec::new(weight.alpha, weight.part)?;
    if w.part == PartLabel::Whole && w.alpha >= 0.5 {
        return Err(LabError::InvalidArgument(format!(
            "trace constant needs alpha < 1/2 for the boundary-distance weight, got {}",
            w.alpha
        )));
    }
    let ba = boundary_mass(mesh, a_label)?;
    let b = mass(mesh).add_scaled(1.0, &stiffness(mesh, Some(&w))?);
    let solver = SpdSolver::new(&b)?;
    let op = |x: &[f64]| solver.solve(&ba.mul_vec(x));
    let eig = subspace_iteration(&op, &ba, &b, &[], true)?;
    estimate(mesh, eig, w, ConstraintDescriptor::TraceNormalization { part: a_label }, false)
}

/// Unit normals of `A`, their span and per-vertex averaged normals.
#[derive(Clone, Debug)]
pub struct NormalSpan {
    pub rank: usize,
    /// Orthonormal basis of the span.
    pub basis: Vec<Point>,
    /// Averaged unit normal at each vertex of `A`.
    pub vertex_normals: Vec<(usize, Point)>,
}

pub fn normal_span(mesh: &Mesh, a_label: PartLabel) -> Result<NormalSpan> {
    let edges = mesh.part_edges(a_label);
    if edges.is_empty() {
        return Err(LabError::EmptyPart(a_label));
    }
    let mut acc = vec![Point::ORIGIN; mesh.num_vertices()];
    let mut on_a = vec![false; mesh.num_vertices()];
    let mut rows = Vec::with_capacity(2 * edges.len());
    for &e in &edges {
        let be = mesh.boundary_edges()[e];
        let n = mesh.edge_normal(&be);
        rows.extend([n.x, n.y]);
        for v in [be.a, be.b] {
            acc[v] += n;
            on_a[v] = true;
        }
    }
    let nm = DMatrix::from_row_slice(edges.len(), 2, &rows);
    let svd = nm.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let smax = svd.singular_values.max();
    let mut basis = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > SPAN_RANK_THRESHOLD * smax {
            basis.push(Point::new(vt[(i, 0)], vt[(i, 1)]));
        }
    }
    let vertex_normals = (0..mesh.num_vertices())
        .filter(|&i| on_a[i])
        .map(|i| {
            if acc[i].norm() < 1e-12 {
                return Err(LabError::InvalidMesh(format!("normals of A cancel at vertex {i}")));
            }
            Ok((i, acc[i].normalized()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NormalSpan { rank: basis.len(), basis, vertex_normals })
}

fn check_vector_weight(mesh: &Mesh, a_label: PartLabel, w: &WeightSpec) -> Result<()> {
    match w.part {
        PartLabel::Whole => {
            if w.alpha >= 0.5 {
                return Err(LabError::InvalidArgument(format!(
                    "boundary-distance weight needs alpha < 1/2 for p = 2, got {}",
                    w.alpha
                )));
            }
        }
        PartLabel::Gamma0 => {
            if a_label == PartLabel::Gamma0 || a_label == PartLabel::Whole {
                return Err(LabError::InvalidArgument("A must be disjoint from Gamma0".into()));
            }
            let a: BTreeSet<usize> = mesh.part_vertices(a_label).into_iter().collect();
            if mesh.part_vertices(PartLabel::Gamma0).iter().any(|v| a.contains(v)) {
                return Err(LabError::InvalidArgument("Gamma0 touches the closure of A".into()));
            }
        }
        PartLabel::Gamma1 => {
            return Err(LabError::InvalidArgument("vector weight must be distance to Whole or Gamma0".into()));
        }
    }
    Ok(())
}

/// Per-vertex reduced basis of fields valued in the span with zero normal
/// component at the vertices of `A`: rows of the `2n x m` prolongation.
fn reduced_basis(mesh: &Mesh, span: &NormalSpan) -> (Vec<Vec<(usize, f64)>>, usize) {
    let n = mesh.num_vertices();
    let mut normal_at = vec![None; n];
    for &(i, nv) in &span.vertex_normals {
        normal_at[i] = Some(nv);
    }
    let mut rows = vec![Vec::new(); 2 * n];
    let mut m = 0;
    for i in 0..n {
        let dirs: Vec<Point> = match (span.rank, normal_at[i]) {
            (2, None) => vec![Point::new(1.0, 0.0), Point::new(0.0, 1.0)],
            (2, Some(nv)) => vec![nv.rotate_ccw()],
            (_, None) => vec![span.basis[0]],
            (_, Some(nv)) => {
                if span.basis[0].dot(nv).abs() < SPAN_RANK_THRESHOLD {
                    vec![span.basis[0]]
                } else {
                    vec![]
                }
            }
        };
        for d in dirs {
            rows[2 * i].push((m, d.x));
            rows[2 * i + 1].push((m, d.y));
            m += 1;
        }
    }
    (rows, m)
}

/// Component-wise block operator on interleaved `(x, y)` vertex dofs.
pub fn vector_operator(a: &SparseOperator) -> SparseOperator {
    let mut t = Vec::with_capacity(2 * a.nnz());
    for (i, j, v) in a.triplets() {
        t.push((2 * i, 2 * j, v));
        t.push((2 * i + 1, 2 * j + 1, v));
    }
    SparseOperator::from_triplets(2 * a.dim(), &t)
}

/// `η_{2,α}(A, G)⁻¹` for vector fields valued in the span of the normals of
/// `A` with zero normal component on `A`.
///
/// `weight.part = Whole` is the boundary-distance form (needs `α < 1/2`);
/// `weight.part = Gamma0` is the form weighted by the distance to a part
/// disjoint from the closure of `A` (any `α ∈ [0, 1]`).
pub fn estimate_vector_constant(mesh: &Mesh, a_label: PartLabel, weight: &WeightSpec) -> Result<SpectralEstimate> {
    let w = WeightSpec::new(weight.alpha, weight.part)?;
    check_vector_weight(mesh, a_label, &w)?;
    let span = normal_span(mesh, a_label)?;
    let (rows, m) = reduced_basis(mesh, &span);
    if m == 0 {
        return Err(LabError::Singular("constraint space is trivial".into()));
    }
    let k = vector_operator(&stiffness(mesh, Some(&w))?).congruence(&rows, m);
    let ms = vector_operator(&mass(mesh)).congruence(&rows, m);
    let solver = SpdSolver::new(&k)?;
    let op = |x: &[f64]| solver.solve(&ms.mul_vec(x));
    let mut eig = subspace_iteration(&op, &k, &ms, &[], false)?;
    let mut full = vec![0.0; 2 * mesh.num_vertices()];
    for (r, row) in rows.iter().enumerate() {
        full[r] = row.iter().map(|&(c, v)| v * eig.vector[c]).sum();
    }
    eig.vector = full;
    let constraint = ConstraintDescriptor::NormalTrace { part: a_label, span_rank: span.rank, span_basis: span.basis };
    estimate(mesh, eig, w, constraint, true)
}

/// Dense brute-force counterpart of [`estimate_vector_constant`]: the
/// constraint rows are assembled explicitly, their null space is taken from
/// the eigenvectors of `CᵀC`, and the projected pencil is solved densely.
pub fn dense_vector_constant(mesh: &Mesh, a_label: PartLabel, weight: &WeightSpec) -> Result<f64> {
    let w = WeightSpec::new(weight.alpha, weight.part)?;
    let span = normal_span(mesh, a_label)?;
    let n2 = 2 * mesh.num_vertices();
    let mut c_rows: Vec<Vec<(usize, f64)>> = span
        .vertex_normals
        .iter()
        .map(|&(i, nv)| vec![(2 * i, nv.x), (2 * i + 1, nv.y)])
        .collect();
    if span.rank == 1 {
        let perp = span.basis[0].rotate_ccw();
        for i in 0..mesh.num_vertices() {
            c_rows.push(vec![(2 * i, perp.x), (2 * i + 1, perp.y)]);
        }
    }
    let mut c = DMatrix::zeros(c_rows.len(), n2);
    for (r, row) in c_rows.iter().enumerate() {
        for &(j, v) in row {
            c[(r, j)] = v;
        }
    }
    let ctc = c.transpose() * &c;
    let eig = nalgebra::SymmetricEigen::new(ctc);
    let scale = eig.eigenvalues.amax().max(1.0);
    let null: Vec<usize> = (0..n2).filter(|&i| eig.eigenvalues[i].abs() < 1e-10 * scale).collect();
    let z = DMatrix::from_fn(n2, null.len(), |r, k| eig.eigenvectors[(r, null[k])]);
    let kd = vector_operator(&stiffness(mesh, Some(&w))?).to_dense();
    let md = vector_operator(&mass(mesh)).to_dense();
    let kz = z.transpose() * kd * &z;
    let mz = z.transpose() * md * &z;
    let (value, _) = dense_smallest(&kz, &mz)?;
    Ok(value.powf(-0.5))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExplicitBound {
    pub eta_inv: f64,
    pub mu_inv: f64,
    pub trace_constant: f64,
    pub volume_ratio: f64,
    /// `μ̄⁻¹ + (|G|/|A|)^{1/2} λ (1 + μ̄⁻²)^{1/2}`.
    pub bound: f64,
    pub holds: bool,
}

/// The explicit bound on `η⁻¹` for a rank-one span, from the scalar
/// Poincaré and trace constants.
pub fn explicit_bound(mesh: &Mesh, a_label: PartLabel, weight: &WeightSpec) -> Result<ExplicitBound> {
    let span = normal_span(mesh, a_label)?;
    if span.rank != 1 {
        return Err(LabError::InvalidArgument(format!("explicit bound needs a rank-one span, got rank {}", span.rank)));
    }
    let eta_inv = estimate_vector_constant(mesh, a_label, weight)?.constant;
    let mu_inv = estimate_scalar_constant(mesh, weight)?.constant;
    let trace_constant = estimate_trace_constant(mesh, a_label, weight)?.constant;
    let volume_ratio = mesh.area() / mesh.boundary_measures(a_label)?.length;
    let bound = mu_inv + volume_ratio.sqrt() * trace_constant * (1.0 + mu_inv * mu_inv).sqrt();
    Ok(ExplicitBound { eta_inv, mu_inv, trace_constant, volume_ratio, bound, holds: eta_inv <= bound })
}

/// Rayleigh quotient `vᵀKv / vᵀMv` of a scalar field.
pub fn rayleigh_quotient(k: &SparseOperator, m: &SparseOperator, v: &[f64]) -> f64 {
    k.quad_form(v) / m.quad_form(v)
}
