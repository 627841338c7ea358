use std::sync::Arc;

use super::fem::{load_vector, stiffness, ScalarField};
use super::solver::{solve_spd, Constraints};
use crate::error::{LabError, Result};
use crate::geometry::{Mesh, PartLabel, Point};

/// Solution of `Δv = source` with Dirichlet data on one part and zero flux
/// on the rest, together with its recovered boundary flux.
#[derive(Clone, Debug)]
pub struct BvpSolution {
    pub field: ScalarField,
    pub source: f64,
    pub dirichlet: PartLabel,
    pub neumann: Option<PartLabel>,
    nodal_flux: Vec<f64>,
    residual: Vec<f64>,
}

impl BvpSolution {
    pub fn mesh(&self) -> &Arc<Mesh> {
        self.field.mesh()
    }

    /// Boundary residual `g_i = ∫ ∇v·∇φ_i + source ∫ φ_i`, the discrete
    /// functional `∫_D v_ν φ_i dS`; zero off the Dirichlet part.
    pub fn boundary_residual(&self) -> &[f64] {
        &self.residual
    }

    /// Vertex flux values `g_i / ∫_D φ_i dS` on the Dirichlet part, zero elsewhere.
    pub fn nodal_flux(&self) -> &[f64] {
        &self.nodal_flux
    }

    /// `∫_D v_ν h dS` paired variationally against the P1 field `h`.
    pub fn flux_pairing(&self, h: &[f64]) -> f64 {
        self.residual.iter().zip(h).map(|(g, x)| g * x).sum()
    }
}

fn check_labels(mesh: &Mesh, dirichlet: PartLabel, neumann: Option<PartLabel>) -> Result<()> {
    if mesh.part_edges(dirichlet).is_empty() {
        return Err(LabError::EmptyPart(dirichlet));
    }
    match neumann {
        None => {
            if mesh.boundary_edges().iter().any(|e| !dirichlet.selects(e.label)) {
                return Err(LabError::InvalidArgument(format!(
                    "Dirichlet part {dirichlet} does not cover the boundary and no zero-flux part was given"
                )));
            }
        }
        Some(nz) => {
            if dirichlet == PartLabel::Whole || nz == PartLabel::Whole || nz == dirichlet {
                return Err(LabError::InvalidArgument(format!(
                    "boundary parts {dirichlet} and {nz} are not disjoint"
                )));
            }
            if let Some(e) = mesh.boundary_edges().iter().find(|e| e.label != dirichlet && e.label != nz) {
                return Err(LabError::InvalidArgument(format!(
                    "boundary edge ({}, {}) labeled {} belongs to neither {dirichlet} nor {nz}",
                    e.a, e.b, e.label
                )));
            }
        }
    }
    Ok(())
}

/// Solves `Δv = source` in the mesh, `v = data` on `dirichlet` and
/// `v_ν = 0` on `neumann_zero` (natural condition).
pub fn solve_mixed_bvp(
    mesh: &Arc<Mesh>,
    source: f64,
    dirichlet: PartLabel,
    data: impl Fn(Point) -> f64,
    neumann_zero: Option<PartLabel>,
) -> Result<BvpSolution> {
    check_labels(mesh, dirichlet, neumann_zero)?;
    let dv = mesh.part_vertices(dirichlet);
    let fixed: Vec<(usize, f64)> = dv.iter().map(|&i| (i, data(mesh.vertices()[i]))).collect();
    solve_with_values(mesh, source, dirichlet, neumann_zero, fixed)
}

/// As [`solve_mixed_bvp`] with the Dirichlet values given per vertex.
pub(crate) fn solve_with_values(
    mesh: &Arc<Mesh>,
    source: f64,
    dirichlet: PartLabel,
    neumann_zero: Option<PartLabel>,
    fixed: Vec<(usize, f64)>,
) -> Result<BvpSolution> {
    let k = stiffness(mesh, None)?;
    let b = load_vector(mesh);
    let rhs: Vec<f64> = b.iter().map(|v| -source * v).collect();
    let values = solve_spd(&k, &rhs, &Constraints::Dirichlet(fixed))?;

    // flux recovery: g = K v + source b is the boundary functional ∫ v_ν φ_i dS
    let kv = k.mul_vec(&values);
    let g: Vec<f64> = kv.iter().zip(&b).map(|(x, bi)| x + source * bi).collect();
    let mut support = vec![0.0; mesh.num_vertices()];
    for e in mesh.part_edges(dirichlet) {
        let be = mesh.boundary_edges()[e];
        let l = mesh.edge_length(&be);
        support[be.a] += 0.5 * l;
        support[be.b] += 0.5 * l;
    }
    let mut residual = vec![0.0; mesh.num_vertices()];
    let mut nodal_flux = vec![0.0; mesh.num_vertices()];
    for i in 0..mesh.num_vertices() {
        if support[i] > 0.0 {
            residual[i] = g[i];
            nodal_flux[i] = g[i] / support[i];
        }
    }
    Ok(BvpSolution {
        field: ScalarField::new(mesh.clone(), values)?,
        source,
        dirichlet,
        neumann: neumann_zero,
        nodal_flux,
        residual,
    })
}

/// Per-edge outward normal derivative on the edges of `label`, in
/// [`Mesh::part_edges`] order. Zero-flux edges report 0.
pub fn boundary_flux(solution: &BvpSolution, label: PartLabel) -> Result<Vec<f64>> {
    let mesh = solution.mesh();
    let edges = mesh.part_edges(label);
    if edges.is_empty() {
        return Err(LabError::EmptyPart(label));
    }
    let q = &solution.nodal_flux;
    Ok(edges
        .iter()
        .map(|&e| {
            let be = mesh.boundary_edges()[e];
            if solution.dirichlet.selects(be.label) {
                0.5 * (q[be.a] + q[be.b])
            } else {
                0.0
            }
        })
        .collect())
}
