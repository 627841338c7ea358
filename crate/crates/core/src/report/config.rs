//! Flat sectioned key-value configuration.
//!
//! ```text
//! kind = mean_value
//! seed = 7
//!
//! [domain]
//! type = sector
//! angle = 1.5707963267948966
//!
//! [mesh]
//! h = 0.02
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{PartLabel, Point, PolygonalDomain};

const SECTIONS: &[(&str, &[&str])] = &[
    ("experiment", &["kind", "seed", "output"]),
    (
        "domain",
        &[
            "type", "base_radius", "cos", "sin", "n_boundary", "a", "b", "x0", "y0", "x1", "y1", "angle", "radius",
            "n_arc", "n_side", "ellipse_a", "ellipse_b", "file",
        ],
    ),
    ("mesh", &["h", "h_list"]),
    ("sweep", &["eps", "mode", "alpha", "radii", "trials"]),
    ("data", &["f", "h_fields"]),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    StabilitySweep,
    ConeDuality,
    MeanValue,
    PoincareConstants,
    InequalityAudit,
    IdentityChecks,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::StabilitySweep => "stability_sweep",
            Self::ConeDuality => "cone_duality",
            Self::MeanValue => "mean_value",
            Self::PoincareConstants => "poincare_constants",
            Self::InequalityAudit => "inequality_audit",
            Self::IdentityChecks => "identity_checks",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "stability_sweep" => Self::StabilitySweep,
            "cone_duality" => Self::ConeDuality,
            "mean_value" => Self::MeanValue,
            "poincare_constants" => Self::PoincareConstants,
            "inequality_audit" => Self::InequalityAudit,
            "identity_checks" => Self::IdentityChecks,
            other => return Err(format!("unknown experiment kind `{other}`")),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DomainSpec {
    Fourier { base_radius: f64, cos: Vec<f64>, sin: Vec<f64>, n_boundary: usize },
    Ellipse { a: f64, b: f64, n_boundary: usize },
    Rectangle { x0: f64, y0: f64, x1: f64, y1: f64 },
    /// Sector, optionally cut by the ellipse `x²/a² + y²/b² = 1` instead of the circle.
    Sector { angle: f64, radius: f64, n_arc: usize, n_side: usize, ellipse: Option<(f64, f64)> },
    Polygon { file: PathBuf },
}

impl DomainSpec {
    /// Fourier domain with the coefficient of `cos(mode θ)` replaced by `eps`.
    pub fn with_perturbation(&self, mode: usize, eps: f64) -> Result<DomainSpec> {
        match self {
            Self::Fourier { base_radius, cos, sin, n_boundary } => {
                let mut cos = cos.clone();
                if cos.len() < mode {
                    cos.resize(mode, 0.0);
                }
                cos[mode - 1] = eps;
                Ok(Self::Fourier { base_radius: *base_radius, cos, sin: sin.clone(), n_boundary: *n_boundary })
            }
            _ => Err(LabError::InvalidArgument("ε sweeps need a fourier domain".into())),
        }
    }

    pub fn build(&self) -> Result<PolygonalDomain> {
        match self {
            Self::Fourier { base_radius, cos, sin, n_boundary } => PolygonalDomain::fourier(*base_radius, cos, sin, *n_boundary),
            Self::Ellipse { a, b, n_boundary } => PolygonalDomain::ellipse(*a, *b, *n_boundary),
            Self::Rectangle { x0, y0, x1, y1 } => PolygonalDomain::rectangle(*x0, *y0, *x1, *y1),
            Self::Sector { angle, radius, n_arc, n_side, ellipse: None } => {
                PolygonalDomain::sector(*angle, *radius, *n_arc, *n_side)
            }
            Self::Sector { angle, radius: _, n_arc, n_side, ellipse: Some((a, b)) } => {
                let (a, b) = (*a, *b);
                PolygonalDomain::cone(*angle, move |phi: f64| 1.0 / ((phi.cos() / a).powi(2) + (phi.sin() / b).powi(2)).sqrt(), *n_arc, *n_side)
            }
            Self::Polygon { file } => read_polygon_file(file),
        }
    }

    pub fn is_cone(&self) -> bool {
        matches!(self, Self::Sector { .. })
    }
}

/// Reads `x y LABEL` vertex lines (the label applies to the edge leaving the
/// vertex) plus optional `origin x y` / `apex x y` lines; `#` starts a comment.
pub fn read_polygon_file(path: &Path) -> Result<PolygonalDomain> {
    let text = std::fs::read_to_string(path)?;
    parse_polygon(&text)
}

pub fn parse_polygon(text: &str) -> Result<PolygonalDomain> {
    let mut vertices = Vec::new();
    let mut labels = Vec::new();
    let (mut origin, mut apex) = (None, None);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| LabError::Config { line: i + 1, message: m };
        let tok: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("`{s}` is not a number")));
        match tok[0] {
            "origin" | "apex" => {
                if tok.len() != 3 {
                    return Err(err(format!("`{}` needs two coordinates", tok[0])));
                }
                let p = Point::new(num(tok[1])?, num(tok[2])?);
                if tok[0] == "origin" {
                    origin = Some(p);
                } else {
                    apex = Some(p);
                }
            }
            _ => {
                if tok.len() != 3 {
                    return Err(err("expected `x y LABEL`".into()));
                }
                vertices.push(Point::new(num(tok[0])?, num(tok[1])?));
                labels.push(tok[2].parse::<PartLabel>().map_err(|e| err(e.to_string()))?);
            }
        }
    }
    PolygonalDomain::new(vertices, labels, origin, apex)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub domain: DomainSpec,
    pub h: f64,
    pub h_list: Vec<f64>,
    pub eps: Vec<f64>,
    pub mode: usize,
    pub alpha: Vec<f64>,
    pub radii: usize,
    pub trials: usize,
    pub f: String,
    pub h_fields: Vec<String>,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

struct Entry {
    value: String,
    line: usize,
}

struct Raw {
    sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
    end_line: usize,
}

impl Raw {
    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|(_, m)| m.get(key))
    }

    fn missing(&self, section: &str, key: &str) -> LabError {
        LabError::Config { line: self.end_line, message: format!("missing required field `{key}` in [{section}]") }
    }

    fn required<T: FromStr>(&self, section: &str, key: &str) -> Result<T> {
        match self.get(section, key) {
            Some(e) => parse_value(e, key),
            None => Err(self.missing(section, key)),
        }
    }

    fn optional<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        match self.get(section, key) {
            Some(e) => parse_value(e, key),
            None => Ok(default),
        }
    }

    fn list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(e) = self.get(section, key) else { return Ok(None) };
        if e.value.trim().is_empty() {
            return Ok(Some(Vec::new()));
        }
        e.value
            .split(',')
            .map(|s| parse_value::<f64>(&Entry { value: s.trim().to_string(), line: e.line }, key))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn names(&self, section: &str, key: &str) -> Option<Vec<String>> {
        self.get(section, key)
            .map(|e| e.value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
    }

    fn line_of(&self, section: &str, key: &str) -> usize {
        self.get(section, key).map_or(self.end_line, |e| e.line)
    }
}

fn parse_value<T: FromStr>(e: &Entry, key: &str) -> Result<T> {
    let v = e.value.trim();
    // angles may be written as fractions of pi, e.g. `pi/2` or `2pi/3`
    if let Some(x) = parse_pi_expression(v) {
        if let Ok(t) = x.to_string().parse::<T>() {
            return Ok(t);
        }
    }
    v.parse::<T>().map_err(|_| LabError::Config { line: e.line, message: format!("invalid value `{v}` for `{key}`") })
}

fn parse_pi_expression(v: &str) -> Option<f64> {
    let (num, den) = match v.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim().parse::<f64>().ok()?),
        None => (v, 1.0),
    };
    let coef = num.strip_suffix("pi")?.trim();
    let c = if coef.is_empty() { 1.0 } else { coef.trim_end_matches('*').parse::<f64>().ok()? };
    Some(c * PI / den)
}

fn tokenize(text: &str) -> Result<Raw> {
    let mut sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)> = BTreeMap::new();
    let mut current = "experiment".to_string();
    let mut n_lines = 0;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        n_lines = line_no;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| LabError::Config { line: line_no, message: m };
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| err("unterminated section header".into()))?.trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(err(format!("unknown section [{name}]")));
            }
            if sections.get(name).is_some_and(|(l, _)| *l > 0) {
                return Err(err(format!("section [{name}] appears twice")));
            }
            sections.entry(name.to_string()).or_insert((line_no, BTreeMap::new())).0 = line_no;
            current = name.to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
        let key = key.trim();
        let known = SECTIONS.iter().find(|(s, _)| *s == current).map(|(_, k)| *k).unwrap_or(&[]);
        if !known.contains(&key) {
            return Err(err(format!("unknown key `{key}` in [{current}]")));
        }
        let sec = sections.entry(current.clone()).or_insert((0, BTreeMap::new()));
        if sec.1.contains_key(key) {
            return Err(err(format!("duplicate key `{key}` in [{current}]")));
        }
        sec.1.insert(key.to_string(), Entry { value: value.trim().to_string(), line: line_no });
    }
    Ok(Raw { sections, end_line: n_lines.max(1) })
}

fn parse_domain(raw: &Raw) -> Result<DomainSpec> {
    let ty: String = raw.required("domain", "type")?;
    let d = match ty.as_str() {
        "fourier" => DomainSpec::Fourier {
            base_radius: raw.optional("domain", "base_radius", 1.0)?,
            cos: raw.list("domain", "cos")?.unwrap_or_default(),
            sin: raw.list("domain", "sin")?.unwrap_or_default(),
            n_boundary: raw.optional("domain", "n_boundary", 512)?,
        },
        "ellipse" => DomainSpec::Ellipse {
            a: raw.required("domain", "a")?,
            b: raw.required("domain", "b")?,
            n_boundary: raw.optional("domain", "n_boundary", 512)?,
        },
        "rectangle" => DomainSpec::Rectangle {
            x0: raw.optional("domain", "x0", 0.0)?,
            y0: raw.optional("domain", "y0", 0.0)?,
            x1: raw.optional("domain", "x1", 1.0)?,
            y1: raw.optional("domain", "y1", 1.0)?,
        },
        "sector" => {
            let ea: Option<f64> = raw.get("domain", "ellipse_a").map(|e| parse_value(e, "ellipse_a")).transpose()?;
            let eb: Option<f64> = raw.get("domain", "ellipse_b").map(|e| parse_value(e, "ellipse_b")).transpose()?;
            let ellipse = match (ea, eb) {
                (Some(a), Some(b)) => Some((a, b)),
                (None, None) => None,
                (Some(_), None) => return Err(raw.missing("domain", "ellipse_b")),
                (None, Some(_)) => return Err(raw.missing("domain", "ellipse_a")),
            };
            DomainSpec::Sector {
                angle: raw.required("domain", "angle")?,
                radius: raw.optional("domain", "radius", 1.0)?,
                n_arc: raw.optional("domain", "n_arc", 64)?,
                n_side: raw.optional("domain", "n_side", 32)?,
                ellipse,
            }
        }
        "polygon" => DomainSpec::Polygon { file: PathBuf::from(raw.required::<String>("domain", "file")?) },
        other => {
            return Err(LabError::Config {
                line: raw.line_of("domain", "type"),
                message: format!("unknown domain type `{other}` (fourier, ellipse, rectangle, sector, polygon)"),
            })
        }
    };
    Ok(d)
}

/// Parses and validates a configuration; `base` resolves relative polygon paths.
pub fn parse_config(text: &str, base: Option<&Path>) -> Result<ExperimentConfig> {
    let raw = tokenize(text)?;
    let kind_s: String = raw.required("experiment", "kind")?;
    let kind = kind_s
        .parse::<ExperimentKind>()
        .map_err(|m| LabError::Config { line: raw.line_of("experiment", "kind"), message: m })?;
    let mut domain = parse_domain(&raw)?;
    if let (DomainSpec::Polygon { file }, Some(b)) = (&mut domain, base) {
        if file.is_relative() {
            *file = b.join(&*file);
        }
    }
    let h: f64 = raw.required("mesh", "h")?;
    if !(h > 0.0) {
        return Err(LabError::Config { line: raw.line_of("mesh", "h"), message: format!("h must be positive, got {h}") });
    }
    let h_list = raw.list("mesh", "h_list")?.unwrap_or_else(|| vec![h]);
    if h_list.iter().any(|&x| !(x > 0.0)) || h_list.is_empty() {
        return Err(LabError::Config { line: raw.line_of("mesh", "h_list"), message: "h_list needs positive values".into() });
    }
    let seed = raw.optional("experiment", "seed", 0u64)?;
    let output = raw.get("experiment", "output").map(|e| PathBuf::from(&e.value));
    let mut cfg = ExperimentConfig {
        kind,
        domain,
        h,
        h_list,
        eps: Vec::new(),
        mode: raw.optional("sweep", "mode", 3usize)?,
        alpha: vec![0.0],
        radii: raw.optional("sweep", "radii", 10usize)?,
        trials: raw.optional("sweep", "trials", 1000usize)?,
        f: raw.optional("data", "f", "saddle".to_string())?,
        h_fields: raw.names("data", "h_fields").unwrap_or_else(|| vec!["one".into(), "saddle".into()]),
        seed,
        output,
    };
    let needs_cone = |cfg: &ExperimentConfig, what: &str| -> Result<()> {
        if cfg.domain.is_cone() {
            Ok(())
        } else {
            Err(LabError::Config { line: raw.line_of("domain", "type"), message: format!("{what} needs a sector domain") })
        }
    };
    match kind {
        ExperimentKind::StabilitySweep => {
            cfg.eps = raw.list("sweep", "eps")?.ok_or_else(|| raw.missing("sweep", "eps"))?;
            if cfg.eps.is_empty() {
                return Err(LabError::Config { line: raw.line_of("sweep", "eps"), message: "eps list is empty".into() });
            }
            if !matches!(cfg.domain, DomainSpec::Fourier { .. }) {
                return Err(LabError::Config { line: raw.line_of("domain", "type"), message: "stability_sweep needs a fourier domain".into() });
            }
            if cfg.mode == 0 {
                return Err(LabError::Config { line: raw.line_of("sweep", "mode"), message: "mode must be at least 1".into() });
            }
        }
        ExperimentKind::MeanValue => {
            needs_cone(&cfg, "mean_value")?;
            let _: String = raw.required("data", "f")?;
            check_data_name(&cfg.f, raw.line_of("data", "f"))?;
            if cfg.radii == 0 {
                return Err(LabError::Config { line: raw.line_of("sweep", "radii"), message: "radii must be at least 1".into() });
            }
        }
        ExperimentKind::ConeDuality => {
            needs_cone(&cfg, "cone_duality")?;
            for name in &cfg.h_fields {
                check_data_name(name, raw.line_of("data", "h_fields"))?;
            }
            if cfg.h_fields.is_empty() {
                return Err(LabError::Config { line: raw.line_of("data", "h_fields"), message: "h_fields is empty".into() });
            }
        }
        ExperimentKind::PoincareConstants => {
            cfg.alpha = raw.list("sweep", "alpha")?.ok_or_else(|| raw.missing("sweep", "alpha"))?;
            if cfg.alpha.is_empty() || cfg.alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(LabError::Config { line: raw.line_of("sweep", "alpha"), message: "alpha values must lie in [0, 1]".into() });
            }
        }
        ExperimentKind::InequalityAudit => {
            if cfg.trials < 100 {
                return Err(LabError::Config { line: raw.line_of("sweep", "trials"), message: "trials must be at least 100".into() });
            }
        }
        ExperimentKind::IdentityChecks => {}
    }
    Ok(cfg)
}

/// Boundary data and test-field names for the cone experiments; all are
/// harmonic with zero normal derivative on the sides of the quarter sector.
pub const DATA_NAMES: &[&str] = &["one", "saddle", "one_plus_saddle", "corner", "random_harmonic"];

fn check_data_name(name: &str, line: usize) -> Result<()> {
    if DATA_NAMES.contains(&name) {
        Ok(())
    } else {
        Err(LabError::Config { line, message: format!("unknown data `{name}` (one of {})", DATA_NAMES.join(", ")) })
    }
}

/// Parses an inline domain spec `type=sector;angle=pi/2;n_arc=64`.
pub fn parse_domain_spec(spec: &str) -> Result<DomainSpec> {
    let mut text = String::from("[domain]\n");
    for part in spec.split(';').filter(|s| !s.trim().is_empty()) {
        text.push_str(part.trim());
        text.push('\n');
    }
    let raw = tokenize(&text)?;
    parse_domain(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_names_kind() {
        match parse_config("", None) {
            Err(LabError::Config { message, .. }) => assert!(message.contains("`kind`")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "kind = mean_value\n[domain]\ntype = sector\nangle = abc\n";
        match parse_config(text, None) {
            Err(LabError::Config { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        match parse_config("kind = mean_value\nbogus = 1\n", None) {
            Err(LabError::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_config() {
        let text = "kind = stability_sweep\nseed = 3\n[domain]\ntype = fourier\nn_boundary = 256\n[mesh]\nh = 0.05\n[sweep]\neps = 0.02, 0.05, 0.1\n";
        let c = parse_config(text, None).unwrap();
        assert_eq!(c.eps, vec![0.02, 0.05, 0.1]);
        assert_eq!(c.mode, 3);
        let d = c.domain.with_perturbation(3, 0.1).unwrap();
        assert!(matches!(d, DomainSpec::Fourier { ref cos, .. } if cos == &vec![0.0, 0.0, 0.1]));
    }

    #[test]
    fn pi_fractions() {
        let spec = parse_domain_spec("type=sector;angle=2pi/3").unwrap();
        assert!(matches!(spec, DomainSpec::Sector { angle, .. } if (angle - 2.0 * PI / 3.0).abs() < 1e-15));
    }

    #[test]
    fn polygon_text() {
        let d = parse_polygon("0 0 Gamma1\n1 0 Whole\n1 1 Whole\n0 1 Gamma1\napex 0 0\n").unwrap();
        assert_eq!(d.num_edges(), 4);
        assert!(parse_polygon("0 0\n").is_err());
    }
}
