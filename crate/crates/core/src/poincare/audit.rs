//! Randomized audits of the scalar inequalities used for the vector-field
//! constants. Norms use the positive-weight edge-midpoint rule on each
//! triangle, so every inequality that holds for an arbitrary measure is
//! checked exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{estimate_scalar_constant, r_mean};
use crate::assembly::{stiffness, WeightSpec};
use crate::error::{LabError, Result};
use crate::geometry::{Mesh, PartLabel, Point};

/// Relative rounding allowance on exact inequalities.
const ROUNDING: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditRow {
    pub check: String,
    pub trials: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` observed.
    pub worst_ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditTable {
    pub seed: u64,
    pub trials: usize,
    pub alpha: f64,
    pub poincare_constant: f64,
    /// Worst `‖v - v_G‖_4 / ‖δ^α ∇v‖_2` over the trials, used as the
    /// self-calibrated constant for `r = 4 > p = 2`.
    pub calibrated_constant_r4: f64,
    pub rows: Vec<AuditRow>,
}

impl AuditTable {
    pub fn row(&self, check: &str) -> Option<&AuditRow> {
        self.rows.iter().find(|r| r.check == check)
    }

    pub fn total_violations(&self) -> usize {
        self.rows.iter().map(|r| r.violations).sum()
    }
}

/// Quadrature nodes (edge midpoints) with weights `|T|/3`, and the triangle of each node.
struct Measure {
    weights: Vec<f64>,
    triangle: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

impl Measure {
    fn new(mesh: &Mesh) -> Self {
        let mut m = Measure { weights: Vec::new(), triangle: Vec::new(), edges: Vec::new() };
        for (k, t) in mesh.triangles().iter().enumerate() {
            let a = mesh.signed_triangle_area(k) / 3.0;
            for (i, j) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                m.weights.push(a);
                m.triangle.push(k);
                m.edges.push((i, j));
            }
        }
        m
    }

    fn sample(&self, v: &[f64]) -> Vec<f64> {
        self.edges.iter().map(|&(i, j)| 0.5 * (v[i] + v[j])).collect()
    }
}

fn lp_dist(q: &[f64], w: &[f64], shift: f64, p: f64, mask: Option<&[bool]>) -> f64 {
    let mut s = 0.0;
    for (i, (&x, &wi)) in q.iter().zip(w).enumerate() {
        if mask.is_none_or(|m| m[i]) {
            s += wi * (x - shift).abs().powf(p);
        }
    }
    s.powf(1.0 / p)
}

fn mean_over(q: &[f64], w: &[f64], mask: Option<&[bool]>) -> (f64, f64) {
    let (mut s, mut a) = (0.0, 0.0);
    for (i, (&x, &wi)) in q.iter().zip(w).enumerate() {
        if mask.is_none_or(|m| m[i]) {
            s += wi * x;
            a += wi;
        }
    }
    (s / a, a)
}

fn random_field(mesh: &Mesh, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let modes: Vec<(Point, f64, f64)> = (0..6)
        .map(|_| {
            let k = Point::polar(rng.random_range(0.5..8.0), rng.random_range(0.0..std::f64::consts::TAU));
            (k, rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(-1.0..1.0))
        })
        .collect();
    let c0 = rng.random_range(-2.0..2.0);
    let noise = rng.random_range(0.0..0.2);
    mesh.vertices()
        .iter()
        .map(|&x| c0 + modes.iter().map(|&(k, ph, a)| a * (k.dot(x) + ph).cos()).sum::<f64>() + noise * rng.random_range(-1.0..1.0))
        .collect()
}

fn random_subdomain(mesh: &Mesh, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let c = mesh.vertices()[rng.random_range(0..mesh.num_vertices())];
    let diam = mesh.h() * 10.0 + mesh.area().sqrt();
    let r = rng.random_range(0.05..0.6) * diam;
    let centroid = |k: usize| {
        let t = mesh.triangle_points(k);
        (t[0] + t[1] + t[2]) * (1.0 / 3.0)
    };
    let mut inside: Vec<bool> = (0..mesh.num_triangles()).map(|k| centroid(k).distance(c) < r).collect();
    if !inside.iter().any(|&b| b) {
        let k = (0..mesh.num_triangles())
            .min_by(|&a, &b| centroid(a).distance(c).total_cmp(&centroid(b).distance(c)))
            .expect("mesh has triangles");
        inside[k] = true;
    }
    inside
}

struct Trial {
    mean_swap: (f64, f64),
    mean_swap_equal: (f64, f64),
    r_mean_form: (f64, f64),
    poincare: (f64, f64),
    sobolev_eq: (f64, f64),
    r4_ratio: f64,
    power_sum: (f64, f64),
    v4: f64,
    v2: f64,
    grad: f64,
}

/// Runs `trials` randomized checks on `mesh` with per-trial streams of `seed`.
pub fn inequality_audit(mesh: &Mesh, trials: usize, seed: u64) -> Result<AuditTable> {
    if trials < 100 {
        return Err(LabError::InvalidArgument(format!("audit needs at least 100 trials, got {trials}")));
    }
    let alpha = 0.25;
    let weight = WeightSpec::new(alpha, PartLabel::Whole)?;
    let mu_inv = estimate_scalar_constant(mesh, &weight)?.constant;
    let k = stiffness(mesh, Some(&weight))?;
    let measure = Measure::new(mesh);
    let g = mesh.area();

    let results: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let v = random_field(mesh, &mut rng);
            let q = measure.sample(&v);
            let w = &measure.weights;

            // mean swap: arbitrary F, λ and p
            let tri_mask = random_subdomain(mesh, &mut rng);
            let mask: Vec<bool> = measure.triangle.iter().map(|&k| tri_mask[k]).collect();
            let p = rng.random_range(1.0..4.0);
            let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            let lambda = rng.random_range(lo - 1.0..hi + 1.0);
            let (vf, f_area) = mean_over(&q, w, Some(&mask));
            let mean_swap = (
                lp_dist(&q, w, vf, p, None),
                (1.0 + (g / f_area).powf(1.0 / p)) * lp_dist(&q, w, lambda, p, None),
            );
            let (vg, _) = mean_over(&q, w, None);
            let mean_swap_equal = (lp_dist(&q, w, vg, 2.0, None), 2.0 * lp_dist(&q, w, vg, 2.0, None));

            // mean against the r-mean
            let r = rng.random_range(1.0..4.0);
            let lr = r_mean(&q, w, r).unwrap_or(vg);
            let r_mean_form = (lp_dist(&q, w, vg, r, None), 2.0 * lp_dist(&q, w, lr, r, None));

            // spectral Poincaré and the weighted Sobolev form with r = p = 2
            let grad = k.quad_form(&v).max(0.0).sqrt();
            let dev2 = lp_dist(&q, w, vg, 2.0, None);
            let poincare = (dev2, mu_inv * grad);
            let v2 = lp_dist(&q, w, 0.0, 2.0, None);
            let sobolev_eq = (v2, v2 + mu_inv * grad);
            let r4_ratio = lp_dist(&q, w, vg, 4.0, None) / grad;

            // power sum with exponent r/p ≥ 1
            let n = rng.random_range(2..=6);
            let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let e = rng.random_range(1.0..4.0);
            let power_sum = (xs.iter().map(|x| x.powf(e)).sum::<f64>(), xs.iter().sum::<f64>().powf(e));

            Trial {
                mean_swap,
                mean_swap_equal,
                r_mean_form,
                poincare,
                sobolev_eq,
                r4_ratio,
                power_sum,
                v4: lp_dist(&q, w, 0.0, 4.0, None),
                v2,
                grad,
            }
        })
        .collect();

    let calibrated = results.iter().map(|t| t.r4_ratio).fold(0.0, f64::max);
    let row = |name: &str, pick: &dyn Fn(&Trial) -> (f64, f64)| {
        let mut r = AuditRow { check: name.to_string(), trials, violations: 0, worst_ratio: 0.0 };
        for t in &results {
            let (lhs, rhs) = pick(t);
            if lhs > rhs * (1.0 + ROUNDING) + f64::MIN_POSITIVE {
                r.violations += 1;
            }
            if rhs > 0.0 {
                r.worst_ratio = r.worst_ratio.max(lhs / rhs);
            }
        }
        r
    };
    let gf = g.powf(0.25 - 0.5);
    let rows = vec![
        row("mean_swap", &|t| t.mean_swap),
        row("mean_swap_f_equals_g", &|t| t.mean_swap_equal),
        row("mean_vs_r_mean", &|t| t.r_mean_form),
        row("poincare_spectral", &|t| t.poincare),
        row("weighted_sobolev_r2", &|t| t.sobolev_eq),
        row("weighted_sobolev_r4_calibrated", &|t| (t.v4, gf * t.v2 + calibrated * t.grad)),
        row("power_sum", &|t| t.power_sum),
    ];
    Ok(AuditTable {
        seed,
        trials,
        alpha,
        poincare_constant: mu_inv,
        calibrated_constant_r4: calibrated,
        rows,
    })
}
