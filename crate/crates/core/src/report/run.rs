use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{ExperimentConfig, ExperimentKind};
use super::svg::{domain_outline, Plot, Series, Style};
use crate::assembly::{boundary_flux, ScalarField, WeightSpec};
use crate::cone::{cone_opening, cone_poincare_check, duality_check, mean_value_residuals, radius_grid, ConeExperiment};
use crate::error::{LabError, Result};
use crate::functionals::{stability_report, FunctionalReport};
use crate::geometry::{triangulate, Mesh, PartLabel, Point};
use crate::pfunction::p_ball_checks_n3;
use crate::poincare::{
    estimate_scalar_constant, estimate_trace_constant, estimate_vector_constant, inequality_audit, mesh_hash,
    SpectralEstimate,
};
use crate::singular::solve_punctured;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
    Missing,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) if *v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e15) => format!("{v:e}"),
            Cell::Num(v) if v.is_finite() => format!("{v}"),
            Cell::Num(v) => format!("{v}").to_lowercase(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) => json!(format!("{v}")),
            Cell::Text(s) => json!(s),
            Cell::Missing => Value::Null,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub description: String,
    /// Relative tolerance used when comparing two runs.
    pub tolerance: f64,
    /// Marks columns that identify a row rather than measure something.
    pub key: bool,
}

fn col(name: &str, description: &str, tolerance: f64) -> Column {
    Column { name: name.into(), description: description.into(), tolerance, key: false }
}

fn key(name: &str, description: &str) -> Column {
    Column { name: name.into(), description: description.into(), tolerance: 0.0, key: true }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(",");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    let m: serde_json::Map<String, Value> =
                        self.columns.iter().zip(r).map(|(c, v)| (c.name.clone(), v.json())).collect();
                    Value::Object(m)
                })
                .collect(),
        )
    }
}

/// A sweep point that failed; the other points are still reported.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointError {
    pub point: String,
    pub message: String,
}

pub struct RunOutput {
    pub kind: ExperimentKind,
    pub table: Table,
    pub summary: Value,
    pub details: Value,
    pub errors: Vec<PointError>,
    pub plots: Vec<(String, String)>,
}

pub struct RunSummary {
    pub out_dir: PathBuf,
    pub rows: usize,
    pub errors: Vec<PointError>,
}

fn mesh_of(cfg: &ExperimentConfig, h: f64) -> Result<Arc<Mesh>> {
    Ok(Arc::new(triangulate(&cfg.domain.build()?, h)?))
}

/// Cone boundary data and harmonic test fields by name; `random_harmonic`
/// draws its coefficients from `seed`.
pub fn cone_data(name: &str, mesh: &Mesh, seed: u64) -> Result<Box<dyn Fn(Point) -> f64 + Send + Sync>> {
    let (x0, phi0, phi1) = cone_opening(mesh)?;
    let theta = phi1 - phi0;
    let local = move |p: Point| {
        let d = p - x0;
        (d.norm(), (d.angle() - phi0).rem_euclid(2.0 * PI))
    };
    let saddle = move |p: Point| {
        let d = p - x0;
        d.x * d.x - d.y * d.y
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match name {
        "one" => Box::new(|_| 1.0),
        "saddle" => Box::new(saddle),
        "one_plus_saddle" => Box::new(move |p| 1.0 + saddle(p)),
        // harmonic with zero normal derivative on both sides
        "corner" => Box::new(move |p| {
            let (r, phi) = local(p);
            r.powf(PI / theta) * (PI * phi / theta).cos()
        }),
        "random_harmonic" => {
            let c: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            Box::new(move |p| {
                let (r, phi) = local(p);
                c[0] + (1..5).map(|k| c[k] * r.powf(k as f64 * PI / theta) * (k as f64 * PI * phi / theta).cos()).sum::<f64>()
            })
        }
        other => return Err(LabError::InvalidArgument(format!("unknown data `{other}`"))),
    })
}

pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match cfg.kind {
        ExperimentKind::StabilitySweep => stability_sweep(cfg),
        ExperimentKind::IdentityChecks => identity_checks(cfg),
        ExperimentKind::MeanValue => mean_value(cfg),
        ExperimentKind::ConeDuality => cone_duality(cfg),
        ExperimentKind::PoincareConstants => poincare_constants(cfg),
        ExperimentKind::InequalityAudit => audit_experiment(cfg),
    }
}

/// Runs the experiment and writes `results.json`, `results.csv`,
/// `schema.json` and `plots/*.svg` into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    let out = execute(cfg)?;
    write_outputs(cfg, &out, out_dir)?;
    Ok(RunSummary { out_dir: out_dir.to_path_buf(), rows: out.table.rows.len(), errors: out.errors })
}

pub fn write_outputs(cfg: &ExperimentConfig, out: &RunOutput, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir.join("plots"))?;
    let results = json!({
        "kind": out.kind,
        "config": cfg,
        "rows": out.table.to_json_rows(),
        "summary": out.summary,
        "details": out.details,
        "errors": out.errors,
    });
    std::fs::write(out_dir.join("results.json"), serde_json::to_string_pretty(&results)? + "\n")?;
    std::fs::write(out_dir.join("results.csv"), out.table.to_csv())?;
    let schema = json!({
        "kind": out.kind,
        "file": "results.csv",
        "columns": out.table.columns,
    });
    std::fs::write(out_dir.join("schema.json"), serde_json::to_string_pretty(&schema)? + "\n")?;
    for (name, svg) in &out.plots {
        std::fs::write(out_dir.join("plots").join(name), svg)?;
    }
    Ok(())
}

fn stability_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let results: Vec<(f64, Result<(Arc<Mesh>, FunctionalReport)>)> = cfg
        .eps
        .par_iter()
        .map(|&eps| {
            let r = (|| {
                let mesh = Arc::new(triangulate(&cfg.domain.with_perturbation(cfg.mode, eps)?.build()?, cfg.h)?);
                let report = stability_report(&solve_punctured(&mesh, 0.0)?)?;
                Ok((mesh, report))
            })();
            (eps, r)
        })
        .collect();

    let columns = vec![
        key("eps", "perturbation amplitude of the selected Fourier mode"),
        col("M_minus_1", "max boundary gradient minus one", 1e-6),
        col("D", "isoperimetric deficit P/(2 sqrt(pi |Omega|)) - 1", 1e-9),
        col("F", "Fraenkel asymmetry |Omega Δ B| / |B|", 1e-4),
        col("ratio", "F / sqrt(M - 1); empty when M - 1 is at rounding level", 1e-4),
        col("A", "strong asymmetry at the Fraenkel-optimal ball", 1e-4),
        col("mean_flux", "boundary mean of |grad u|", 1e-6),
        col("gate", "M - 1 <= 1/4", 0.0),
        col("chain_holds", "all proof-chain verdicts hold", 0.0),
        col("flux_square_identity", "relative residual of the boundary flux-square identity", 1e-3),
        col("deficit_relation", "relative residual of the deficit relation", 1e-3),
        col("h", "target mesh size", 0.0),
    ];
    let mut table = Table { columns, rows: Vec::new() };
    let mut errors = Vec::new();
    let mut details = Vec::new();
    let mut last_mesh = None;
    for (eps, r) in results {
        match r {
            Ok((mesh, rep)) => {
                let gate = rep.verdict("gate_m_minus_1_le_quarter").is_some_and(|v| v.holds);
                table.rows.push(vec![
                    eps.into(),
                    rep.m_minus_1.into(),
                    rep.deficit_d.into(),
                    rep.asymmetry_f.into(),
                    rep.ratio.into(),
                    rep.asymmetry_a.into(),
                    rep.mean_flux.into(),
                    gate.into(),
                    rep.all_verdicts_hold().into(),
                    rep.identity_residuals["flux_square_identity"].into(),
                    rep.identity_residuals["deficit_relation"].into(),
                    mesh.h().into(),
                ]);
                details.push(json!({"eps": eps, "mesh_hash": mesh_hash(&mesh), "report": rep}));
                last_mesh = Some(mesh);
            }
            Err(e) => errors.push(PointError { point: format!("eps={eps}"), message: e.to_string() }),
        }
    }
    let pts = |i: usize, j: usize| -> Vec<(f64, f64)> {
        table.rows.iter().filter_map(|r| Some((r[i].as_f64()?, r[j].as_f64()?))).collect()
    };
    let mut plots = Vec::new();
    if let Some(m) = &last_mesh {
        plots.push(("domain.svg".to_string(), domain_outline(m, "domain (largest eps)")));
    }
    let dm = pts(1, 2);
    let bound: Vec<(f64, f64)> = dm.iter().map(|&(m, _)| (m, 2.5 * m)).collect();
    plots.push((
        "deficit_vs_m_minus_1.svg".into(),
        Plot {
            title: "deficit against M - 1".into(),
            x_label: "M - 1".into(),
            y_label: "D".into(),
            series: vec![Series::new("D", dm, Style::Markers), Series::new("5/2 (M - 1)", bound, Style::Line)],
            ..Default::default()
        }
        .to_svg(),
    ));
    plots.push((
        "asymmetry_vs_eps.svg".into(),
        Plot {
            title: "asymmetry along the sweep".into(),
            x_label: "eps".into(),
            y_label: "value".into(),
            series: vec![
                Series::new("F", pts(0, 3), Style::LineMarkers),
                Series::new("sqrt(M - 1)", pts(0, 1).into_iter().map(|(e, m)| (e, m.max(0.0).sqrt())).collect(), Style::LineMarkers),
            ],
            ..Default::default()
        }
        .to_svg(),
    ));
    let all_hold = table.rows.iter().all(|r| r[8] == Cell::from(true));
    Ok(RunOutput {
        kind: cfg.kind,
        summary: json!({"points": table.rows.len(), "failed_points": errors.len(), "all_chains_hold": all_hold}),
        details: Value::Array(details),
        table,
        errors,
        plots,
    })
}

fn identity_checks(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let results: Vec<(f64, Result<(Arc<Mesh>, FunctionalReport)>)> = cfg
        .h_list
        .iter()
        .map(|&h| {
            let r = (|| {
                let mesh = mesh_of(cfg, h)?;
                let rep = stability_report(&solve_punctured(&mesh, 0.0)?)?;
                Ok((mesh, rep))
            })();
            (h, r)
        })
        .collect();
    let names = [
        "flux_square_identity",
        "deficit_relation",
        "deficit_display_gap",
        "divergence_interior",
        "m_minus_1_integral",
        "mean_flux_deviation",
    ];
    let mut columns = vec![key("h", "target mesh size"), col("M_minus_1", "max boundary gradient minus one", 1e-6)];
    for n in names {
        columns.push(col(n, "identity residual (relative unless noted in the README)", 1e-3));
    }
    let mut table = Table { columns, rows: Vec::new() };
    let mut errors = Vec::new();
    let mut first_mesh = None;
    for (h, r) in results {
        match r {
            Ok((mesh, rep)) => {
                let mut row: Vec<Cell> = vec![h.into(), rep.m_minus_1.into()];
                row.extend(names.iter().map(|n| Cell::from(rep.identity_residuals[*n])));
                table.rows.push(row);
                first_mesh.get_or_insert(mesh);
            }
            Err(e) => errors.push(PointError { point: format!("h={h}"), message: e.to_string() }),
        }
    }
    let ball = p_ball_checks_n3(1.0)?;
    let mut plots = Vec::new();
    if let Some(m) = &first_mesh {
        plots.push(("domain.svg".to_string(), domain_outline(m, "domain")));
    }
    let series = (0..3)
        .map(|j| {
            let pts = table.rows.iter().filter_map(|r| Some((r[0].as_f64()?, r[2 + j].as_f64()?))).filter(|p| p.1 > 0.0).collect();
            Series::new(names[j], pts, Style::LineMarkers)
        })
        .collect();
    plots.push((
        "convergence.svg".into(),
        Plot { title: "identity residuals".into(), x_label: "h".into(), y_label: "residual".into(), log_x: true, log_y: true, series }
            .to_svg(),
    ));
    Ok(RunOutput {
        kind: cfg.kind,
        summary: json!({"points": table.rows.len(), "failed_points": errors.len()}),
        details: json!({"ball_n3": ball}),
        table,
        errors,
        plots,
    })
}

fn mean_value(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mesh = mesh_of(cfg, cfg.h)?;
    let f = cone_data(&cfg.f, &mesh, cfg.seed)?;
    let exp = ConeExperiment::new(mesh.clone(), f)?;
    let grid = radius_grid(&mesh, cfg.radii)?;
    let res = mean_value_residuals(&exp, &grid)?;
    let v0 = res.vertex_value;
    let columns = vec![
        key("r", "radius, a fraction of the distance from x0 to Gamma0"),
        col("psi", "spherical-cap mean of v at radius r", 1e-6),
        col("solid_mean", "solid mean of v over the clipped ball", 1e-6),
        col("cap_dev", "|psi - v(x0)|", 0.5),
        col("solid_dev", "|solid_mean - v(x0)|", 0.5),
        col("max_dev", "max(cap_dev, solid_dev)", 0.5),
    ];
    let rows = res
        .table
        .iter()
        .map(|row| {
            let (a, b) = ((row.psi - v0).abs(), (row.solid_mean - v0).abs());
            vec![row.r.into(), row.psi.into(), row.solid_mean.into(), a.into(), b.into(), a.max(b).into()]
        })
        .collect();
    let table = Table { columns, rows };
    let psi: Vec<(f64, f64)> = res.table.iter().map(|r| (r.r, r.psi)).collect();
    let flat: Vec<(f64, f64)> = res.table.iter().map(|r| (r.r, v0)).collect();
    let plots = vec![
        ("domain.svg".to_string(), domain_outline(&mesh, "cone domain")),
        (
            "psi.svg".to_string(),
            Plot {
                title: format!("cap means of `{}`", cfg.f),
                x_label: "r".into(),
                y_label: "psi(r)".into(),
                series: vec![Series::new("psi", psi, Style::LineMarkers), Series::new("v(x0)", flat, Style::Line)],
                ..Default::default()
            }
            .to_svg(),
        ),
    ];
    Ok(RunOutput {
        kind: cfg.kind,
        summary: json!({
            "vertex_value": v0,
            "max_cap_dev": res.max_cap_dev,
            "solid_mean_dev": res.solid_mean_dev,
            "psi_spread": res.psi_spread,
            "coarea_residual": res.coarea_residual,
            "delta": exp.delta,
            "opening": exp.phi1 - exp.phi0,
            "mesh_h": mesh.h(),
            "mesh_hash": mesh_hash(&mesh),
        }),
        details: Value::Null,
        table,
        errors: Vec::new(),
        plots,
    })
}

fn cone_duality(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mesh = mesh_of(cfg, cfg.h)?;
    let exp = ConeExperiment::new(mesh.clone(), cone_data(&cfg.f, &mesh, cfg.seed)?)?;
    let fields = cfg
        .h_fields
        .iter()
        .map(|n| Ok(ScalarField::interpolate(mesh.clone(), cone_data(n, &mesh, cfg.seed)?)))
        .collect::<Result<Vec<_>>>()?;
    let check = duality_check(&exp, &fields)?;
    let cp = cone_poincare_check(&exp)?;
    let columns = vec![
        key("h_field", "test field name"),
        col("mean_match_dev", "|mean over the domain - mean over Gamma0| / sup|h|", 1e-4),
        col("identity_residual", "integration identity with the variational flux pairing", 1e-3),
        col("identity_edge_residual", "same identity with per-edge fluxes", 1e-3),
    ];
    let rows = cfg
        .h_fields
        .iter()
        .zip(&check.rows)
        .map(|(n, r)| {
            vec![n.as_str().into(), r.mean_match_dev.into(), r.integration_identity_residual.into(), r.integration_identity_edge_residual.into()]
        })
        .collect();
    let flux = boundary_flux(&exp.torsion, PartLabel::Gamma0)?;
    let pts: Vec<(f64, f64)> = mesh
        .part_edges(PartLabel::Gamma0)
        .iter()
        .zip(&flux)
        .map(|(&e, &q)| ((mesh.edge_midpoint(&mesh.boundary_edges()[e]) - exp.x0).angle(), q))
        .collect();
    let plots = vec![
        ("domain.svg".to_string(), domain_outline(&mesh, "cone domain")),
        (
            "torsion_flux.svg".to_string(),
            Plot {
                title: "torsion flux on Gamma0".into(),
                x_label: "angle".into(),
                y_label: "u_nu".into(),
                series: vec![Series::new("u_nu", pts, Style::Markers)],
                ..Default::default()
            }
            .to_svg(),
        ),
    ];
    Ok(RunOutput {
        kind: cfg.kind,
        summary: json!({
            "uflux_const_dev": check.uflux_const_dev,
            "torsion_flux_balance": check.torsion_flux_balance,
            "max_mean_match_dev": check.max_mean_match_dev(),
            "max_identity_residual": check.max_integration_identity_residual(),
            "cone_poincare": cp,
            "mesh_h": mesh.h(),
        }),
        details: Value::Null,
        table: Table { columns, rows },
        errors: Vec::new(),
        plots,
    })
}

fn poincare_constants(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mesh = mesh_of(cfg, cfg.h)?;
    let has_gamma1 = !mesh.part_edges(PartLabel::Gamma1).is_empty();
    let columns = vec![
        key("alpha", "exponent of the boundary-distance weight"),
        key("quantity", "scalar_mean_zero, trace_whole or vector_normal_trace"),
        col("constant", "estimated constant", 1e-4),
        col("eigenvalue", "generalized eigenvalue behind the constant", 1e-4),
        col("residual", "relative eigen-residual", 1.0),
    ];
    let mut table = Table { columns, rows: Vec::new() };
    let mut errors = Vec::new();
    let mut curves: Vec<Vec<(f64, f64)>> = vec![Vec::new(); 3];
    for &alpha in &cfg.alpha {
        let w = WeightSpec::new(alpha, PartLabel::Whole)?;
        let mut jobs: Vec<(&str, usize, Box<dyn Fn() -> Result<SpectralEstimate>>)> =
            vec![("scalar_mean_zero", 0, Box::new(|| estimate_scalar_constant(&mesh, &w)))];
        if alpha < 0.5 {
            jobs.push(("trace_whole", 1, Box::new(|| estimate_trace_constant(&mesh, PartLabel::Whole, &w))));
            if has_gamma1 {
                jobs.push(("vector_normal_trace", 2, Box::new(|| estimate_vector_constant(&mesh, PartLabel::Gamma1, &w))));
            }
        }
        for (name, idx, job) in jobs {
            match job() {
                Ok(est) => {
                    table.rows.push(vec![alpha.into(), name.into(), est.constant.into(), est.eigenvalue.into(), est.residual.into()]);
                    curves[idx].push((alpha, est.constant));
                }
                Err(e) => errors.push(PointError { point: format!("alpha={alpha} {name}"), message: e.to_string() }),
            }
        }
    }
    let names = ["scalar_mean_zero", "trace_whole", "vector_normal_trace"];
    let series = names
        .iter()
        .zip(curves)
        .filter(|(_, c)| !c.is_empty())
        .map(|(n, c)| Series::new(n, c, Style::LineMarkers))
        .collect();
    let plots = vec![
        ("domain.svg".to_string(), domain_outline(&mesh, "domain")),
        (
            "constants_vs_alpha.svg".to_string(),
            Plot { title: "Poincare-type constants".into(), x_label: "alpha".into(), y_label: "constant".into(), series, ..Default::default() }
                .to_svg(),
        ),
    ];
    Ok(RunOutput {
        kind: cfg.kind,
        summary: json!({"mesh_h": mesh.h(), "mesh_hash": mesh_hash(&mesh), "rows": table.rows.len(), "failed": errors.len()}),
        details: Value::Null,
        table,
        errors,
        plots,
    })
}

fn audit_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mesh = mesh_of(cfg, cfg.h)?;
    let audit = inequality_audit(&mesh, cfg.trials, cfg.seed)?;
    let columns = vec![
        key("check", "inequality under test"),
        col("trials", "number of random trials", 0.0),
        col("violations", "trials where lhs exceeded rhs beyond rounding", 0.0),
        col("worst_ratio", "largest lhs / rhs", 1e-9),
    ];
    let rows = audit
        .rows
        .iter()
        .map(|r| vec![r.check.as_str().into(), (r.trials as f64).into(), (r.violations as f64).into(), r.worst_ratio.into()])
        .collect();
    let pts = audit.rows.iter().enumerate().map(|(i, r)| (i as f64, r.worst_ratio)).collect();
    let plots = vec![
        ("domain.svg".to_string(), domain_outline(&mesh, "domain")),
        (
            "worst_ratio.svg".to_string(),
            Plot {
                title: "worst lhs / rhs per check (row order as in results.csv)".into(),
                x_label: "check index".into(),
                y_label: "ratio".into(),
                series: vec![Series::new("worst ratio", pts, Style::Markers)],
                ..Default::default()
            }
            .to_svg(),
        ),
    ];
    Ok(RunOutput {
        kind: cfg.kind,
        summary: json!({
            "seed": audit.seed,
            "trials": audit.trials,
            "alpha": audit.alpha,
            "poincare_constant": audit.poincare_constant,
            "calibrated_constant_r4": audit.calibrated_constant_r4,
            "total_violations": audit.total_violations(),
        }),
        details: Value::Null,
        table: Table { columns, rows },
        errors: Vec::new(),
        plots,
    })
}
