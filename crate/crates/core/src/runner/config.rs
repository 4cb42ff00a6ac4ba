//! Run configuration: JSON parsing, defaults and validation.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::comparison::{Normalization, PointSet};

/// Identifiers of the available checks, in report order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    ConjugatePoints,
    CurvatureSymmetries,
    Example7Certification,
    FGeneric,
    FLaplacian,
    FrameOrthonormality,
    GeodesicResidual,
    LagrangeDefect,
    Manifest,
    MeanCurvature,
    RaychaudhuriResidual,
    Schwarz,
    TimelikeConvergence,
    TraceIdentity,
}

impl CheckId {
    pub const ALL: [CheckId; 14] = [
        CheckId::ConjugatePoints,
        CheckId::CurvatureSymmetries,
        CheckId::Example7Certification,
        CheckId::FGeneric,
        CheckId::FLaplacian,
        CheckId::FrameOrthonormality,
        CheckId::GeodesicResidual,
        CheckId::LagrangeDefect,
        CheckId::Manifest,
        CheckId::MeanCurvature,
        CheckId::RaychaudhuriResidual,
        CheckId::Schwarz,
        CheckId::TimelikeConvergence,
        CheckId::TraceIdentity,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CheckId::ConjugatePoints => "conjugate_points",
            CheckId::CurvatureSymmetries => "curvature_symmetries",
            CheckId::Example7Certification => "example7_certification",
            CheckId::FGeneric => "f_generic",
            CheckId::FLaplacian => "f_laplacian",
            CheckId::FrameOrthonormality => "frame_orthonormality",
            CheckId::GeodesicResidual => "geodesic_residual",
            CheckId::LagrangeDefect => "lagrange_defect",
            CheckId::Manifest => "manifest",
            CheckId::MeanCurvature => "mean_curvature",
            CheckId::RaychaudhuriResidual => "raychaudhuri_residual",
            CheckId::Schwarz => "schwarz",
            CheckId::TimelikeConvergence => "timelike_convergence",
            CheckId::TraceIdentity => "trace_identity",
        }
    }

    pub fn parse(s: &str) -> Option<CheckId> {
        CheckId::ALL.iter().copied().find(|c| c.as_str() == s)
    }

    /// One-line description shown by `list-checks`.
    pub fn description(&self) -> &'static str {
        match self {
            CheckId::ConjugatePoints => "zeros of det A for the point congruence, with the expansion blow-up at each zero",
            CheckId::CurvatureSymmetries => "Lorentzian signature, Riemann symmetries and first Bianchi identity at sample points",
            CheckId::Example7Certification => "smallest K with Ric_f >= 0 on timelike samples for f = sinh^2(Kt) on de Sitter space",
            CheckId::FGeneric => "R_f nonzero somewhere along each declared geodesic, consistent with positive Ric_f^m",
            CheckId::FLaplacian => "f-Laplacian of the distance to an apex against the finite-m and infinite-m lower bounds",
            CheckId::FrameOrthonormality => "parallel frame orthonormality, transport residual and symmetry of R(t)",
            CheckId::GeodesicResidual => "norm conservation and geodesic equation residual of declared geodesics",
            CheckId::LagrangeDefect => "(A')^T A - A^T A' vanishes for point congruences and is conserved otherwise",
            CheckId::Manifest => "re-evaluation of the scenario's expected values",
            CheckId::MeanCurvature => "evolution of H_f along the normal congruence of a hypersurface",
            CheckId::RaychaudhuriResidual => "(m,f)-Raychaudhuri identity residual and inequality slack",
            CheckId::Schwarz => "theta^2/(n-1) + f'^2/m >= (theta +- f')^2/(n+m-1) on random draws",
            CheckId::TimelikeConvergence => "Ric_f^m(v,v) >= 0 on sampled timelike directions",
            CheckId::TraceIdentity => "tr R_f = Ric_f^m(c',c') + (1/k + 1/m)((f o c)')^2 along declared geodesics",
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioSource {
    Builtin(String),
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative tolerance of the Jacobi integrator.
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    /// Sample spacing along curves.
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
}

fn default_rtol() -> f64 {
    1e-12
}
fn default_atol() -> f64 {
    1e-14
}
fn default_sample_dt() -> f64 {
    1e-3
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: default_rtol(),
            atol: default_atol(),
            sample_dt: default_sample_dt(),
        }
    }
}

/// Where curvature conditions are sampled. Without explicit `points`, the
/// scenario's reference points on the time grid `[t_min, t_max]` are used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    #[serde(default)]
    pub points: Option<PointSet>,
    #[serde(default = "default_t_min")]
    pub t_min: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_t_step")]
    pub t_step: f64,
    #[serde(default = "default_timelike")]
    pub timelike_per_point: usize,
    #[serde(default = "default_null")]
    pub null_per_point: usize,
    #[serde(default = "default_chi_max")]
    pub chi_max: f64,
    #[serde(default)]
    pub normalization: Normalization,
}

fn default_t_min() -> f64 {
    -3.0
}
fn default_t_max() -> f64 {
    3.0
}
fn default_t_step() -> f64 {
    0.1
}
fn default_timelike() -> usize {
    64
}
fn default_null() -> usize {
    16
}
fn default_chi_max() -> f64 {
    3.0
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            points: None,
            t_min: default_t_min(),
            t_max: default_t_max(),
            t_step: default_t_step(),
            timelike_per_point: default_timelike(),
            null_per_point: default_null(),
            chi_max: default_chi_max(),
            normalization: Normalization::default(),
        }
    }
}

/// A validated run configuration with all defaults filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: ScenarioSource,
    pub checks: Vec<CheckId>,
    pub tolerances: Tolerances,
    pub sample: SampleConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    scenario: Option<String>,
    #[serde(default)]
    scenario_file: Option<PathBuf>,
    #[serde(default)]
    checks: Option<Vec<String>>,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default)]
    sample: SampleConfig,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),
}

/// Parse and validate a JSON run configuration. All violations are reported together.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    // Parse to a value first so syntax errors and schema errors stay distinct.
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut errors = Vec::new();
    let mut unknown_checks = Vec::new();
    if let Some(Value::Array(items)) = value.get("checks") {
        for item in items {
            match item.as_str() {
                Some(s) if CheckId::parse(s).is_some() => {}
                Some(s) => unknown_checks.push(s.to_string()),
                None => errors.push(format!("check identifiers must be strings, got {item}")),
            }
        }
    }
    let raw: RawConfig = match serde_json::from_value(value) {
        Ok(r) => r,
        Err(e) => {
            errors.push(e.to_string());
            for c in &unknown_checks {
                errors.push(format!("unknown check {c:?}"));
            }
            return Err(ConfigError::Validation(errors));
        }
    };
    for c in &unknown_checks {
        errors.push(format!("unknown check {c:?}"));
    }
    let scenario = match (raw.scenario, raw.scenario_file) {
        (Some(name), None) => Some(ScenarioSource::Builtin(name)),
        (None, Some(path)) => Some(ScenarioSource::File(path)),
        (Some(_), Some(_)) => {
            errors.push("give either scenario or scenario_file, not both".into());
            None
        }
        (None, None) => {
            errors.push("missing scenario or scenario_file".into());
            None
        }
    };
    let t = &raw.tolerances;
    for (name, v) in [("rtol", t.rtol), ("atol", t.atol), ("sample_dt", t.sample_dt)] {
        if !(v.is_finite() && v > 0.0) {
            errors.push(format!("tolerance {name} = {v} must be positive"));
        }
    }
    let s = &raw.sample;
    if s.timelike_per_point == 0 {
        errors.push("sample.timelike_per_point must be at least 1".into());
    }
    if s.null_per_point == 0 {
        errors.push("sample.null_per_point must be at least 1".into());
    }
    if !(s.t_step.is_finite() && s.t_step > 0.0) {
        errors.push(format!("sample.t_step = {} must be positive", s.t_step));
    }
    if !(s.t_min <= s.t_max) {
        errors.push("sample.t_min must not exceed sample.t_max".into());
    }
    if !(s.chi_max.is_finite() && s.chi_max >= 0.0) {
        errors.push(format!("sample.chi_max = {} must be finite and nonnegative", s.chi_max));
    }
    if !errors.is_empty() {
        return Err(ConfigError::Validation(errors));
    }
    let mut checks: Vec<CheckId> = match raw.checks {
        Some(list) => list.iter().filter_map(|s| CheckId::parse(s)).collect(),
        None => CheckId::ALL.to_vec(),
    };
    checks.sort();
    checks.dedup();
    Ok(RunConfig {
        scenario: scenario.expect("validated"),
        checks,
        tolerances: raw.tolerances,
        sample: raw.sample,
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("lorentz-lab-out")),
        seed: raw.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(r#"{"scenario":"minkowski4","checks":["raychaudhuri_residual"]}"#).unwrap();
        assert_eq!(c.scenario, ScenarioSource::Builtin("minkowski4".into()));
        assert_eq!(c.checks, vec![CheckId::RaychaudhuriResidual]);
        assert_eq!(c.tolerances, Tolerances::default());
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn unknown_check_is_named() {
        let err = parse_config(r#"{"scenario":"de_sitter4","checks":["nosuch"]}"#).unwrap_err();
        match err {
            ConfigError::Validation(v) => assert!(v.iter().any(|e| e.contains("\"nosuch\""))),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn all_violations_are_listed() {
        let err = parse_config(r#"{"checks":["a","b"],"tolerances":{"rtol":-1}}"#).unwrap_err();
        let ConfigError::Validation(v) = err else { panic!() };
        assert_eq!(v.len(), 4, "{v:?}");
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_config("{\n  \"scenario\": }").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }));
    }

    #[test]
    fn ids_round_trip() {
        for c in CheckId::ALL {
            assert_eq!(CheckId::parse(c.as_str()), Some(c));
        }
        let mut sorted = CheckId::ALL.to_vec();
        sorted.sort_by_key(|c| c.as_str());
        assert_eq!(sorted, CheckId::ALL.to_vec());
    }
}
