//! Scenario configs: a versioned JSON document describing grid,
//! constraints, drift, blanket and an ordered experiment list, with
//! field-path validation errors and dotted-path overrides.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::blanket::{BlanketError, GaussianSystem};
use crate::core::{CoreError, Grid, Region};
use crate::dynamics::{DriftSpec, DynamicsError};
use crate::maxent::{ConstraintSet, MaxEntError, KAPPA_CAP};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(String),
    #[error("invalid JSON: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    MaxEnt(#[from] MaxEntError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Blanket(#[from] BlanketError),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points: Vec<usize>,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, ConfigError> {
        Ok(Grid::new(
            self.lower.clone(),
            self.upper.clone(),
            self.points.clone(),
        )?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintSpec {
    /// J(x) = x along one axis.
    Linear {
        #[serde(default)]
        axis: usize,
        target: f64,
        #[serde(default)]
        multiplier: f64,
    },
    /// J(x) = (x_axis - center)² / scale.
    Quadratic {
        #[serde(default)]
        axis: usize,
        center: f64,
        scale: f64,
        target: f64,
        #[serde(default)]
        multiplier: f64,
    },
    /// J(x) = ½ xᵀ A x for a symmetric matrix A.
    QuadraticForm {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        target: f64,
        #[serde(default = "one")]
        multiplier: f64,
    },
    /// κ outside the boxed region, 0 inside; pinned multiplier.
    Lariat {
        lower: Vec<f64>,
        upper: Vec<f64>,
        kappa: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    /// Row-major antisymmetric circulation matrix, dims² entries.
    #[serde(default)]
    pub q: Vec<f64>,
    pub diffusion: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlanketSpec {
    pub mean_eta: Vec<f64>,
    pub mean_b: Vec<f64>,
    pub mean_mu: Vec<f64>,
    pub cov_b: Vec<Vec<f64>>,
    pub r_eta: Vec<Vec<f64>>,
    pub r_mu: Vec<Vec<f64>>,
    pub residual_eta: Vec<Vec<f64>>,
    pub residual_mu: Vec<Vec<f64>>,
}

impl BlanketSpec {
    pub fn build(&self) -> Result<GaussianSystem, ConfigError> {
        Ok(GaussianSystem::blanketed(
            to_vector(&self.mean_eta),
            to_vector(&self.mean_b),
            to_vector(&self.mean_mu),
            to_matrix(&self.cov_b, "blanket.cov_b")?,
            to_matrix(&self.r_eta, "blanket.r_eta")?,
            to_matrix(&self.r_mu, "blanket.r_mu")?,
            to_matrix(&self.residual_eta, "blanket.residual_eta")?,
            to_matrix(&self.residual_mu, "blanket.residual_mu")?,
        )?)
    }
}

fn to_vector(v: &[f64]) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_vec(v.to_vec())
}

fn to_matrix(rows: &[Vec<f64>], field: &str) -> Result<nalgebra::DMatrix<f64>, ConfigError> {
    let nr = rows.len();
    if nr == 0 {
        return Err(invalid(field, "matrix must have at least one row"));
    }
    let nc = rows[0].len();
    if rows.iter().any(|r| r.len() != nc) {
        return Err(invalid(field, "matrix rows have unequal lengths"));
    }
    Ok(nalgebra::DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Map<String, Value>,
}

impl ExperimentSpec {
    pub fn f64_param(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| {
                invalid(format!("params.{key}"), "expected a number")
            }),
        }
    }

    pub fn usize_param(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .map(|u| u as usize)
                .ok_or_else(|| invalid(format!("params.{key}"), "expected a nonnegative integer")),
        }
    }

    pub fn bool_param(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_bool()
                .ok_or_else(|| invalid(format!("params.{key}"), "expected true or false")),
        }
    }

    pub fn seeds_param(&self) -> Result<Vec<u64>, ConfigError> {
        match self.params.get("seeds") {
            None => Ok(vec![0]),
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for v in items {
                    out.push(v.as_u64().ok_or_else(|| {
                        invalid("params.seeds", "seeds must be nonnegative integers")
                    })?);
                }
                if out.is_empty() {
                    return Err(invalid("params.seeds", "seed list must not be empty"));
                }
                Ok(out)
            }
            Some(_) => Err(invalid("params.seeds", "expected an array of integers")),
        }
    }

    pub fn vec_param(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>, ConfigError> {
        match self.params.get(key) {
            None => Ok(default),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    v.as_f64()
                        .ok_or_else(|| invalid(format!("params.{key}"), "expected numbers"))
                })
                .collect(),
            Some(_) => Err(invalid(
                format!("params.{key}"),
                "expected an array of numbers",
            )),
        }
    }
}

fn default_output_dir() -> String {
    "out".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    #[serde(default)]
    pub drift: Option<DriftConfig>,
    #[serde(default)]
    pub blanket: Option<BlanketSpec>,
    #[serde(default)]
    pub experiments: Vec<ExperimentSpec>,
}

/// Experiments that consume random seeds; their configs must carry an
/// explicit seed list so reruns are reproducible by construction.
pub const STOCHASTIC_EXPERIMENTS: &[&str] = &["langevin-sample", "trapping", "diagnostics-suite"];

impl Scenario {
    pub fn from_value(value: Value, valid_experiments: &[&str]) -> Result<Self, ConfigError> {
        let scenario: Scenario =
            serde_json::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))?;
        scenario.validate(valid_experiments)?;
        Ok(scenario)
    }

    pub fn load(path: &std::path::Path, valid_experiments: &[&str]) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{path:?}: {e}")))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Scenario::from_value(value, valid_experiments)
    }

    pub fn validate(&self, valid_experiments: &[&str]) -> Result<(), ConfigError> {
        if self.schema != 1 {
            return Err(invalid(
                "schema",
                format!("unsupported schema version {}, expected 1", self.schema),
            ));
        }
        if self.name.is_empty() {
            return Err(invalid("name", "scenario name must not be empty"));
        }
        if let Some(g) = &self.grid {
            let dims = g.lower.len();
            if dims == 0 || dims > 2 {
                return Err(invalid("grid.lower", "grids are one- or two-dimensional"));
            }
            if g.upper.len() != dims || g.points.len() != dims {
                return Err(invalid(
                    "grid",
                    "lower, upper and points must have the same length",
                ));
            }
            for a in 0..dims {
                if !(g.upper[a] > g.lower[a]) {
                    return Err(invalid(
                        format!("grid.upper[{a}]"),
                        "upper bound must exceed lower bound",
                    ));
                }
                if g.points[a] < 8 {
                    return Err(invalid(
                        format!("grid.points[{a}]"),
                        "need at least eight points per axis",
                    ));
                }
            }
        }
        let dims = self.grid.as_ref().map_or(0, |g| g.lower.len());
        for (i, c) in self.constraints.iter().enumerate() {
            if self.grid.is_none() {
                return Err(invalid(
                    format!("constraints[{i}]"),
                    "constraints need a grid",
                ));
            }
            match c {
                ConstraintSpec::Linear { axis, .. } | ConstraintSpec::Quadratic { axis, .. }
                    if *axis >= dims =>
                {
                    return Err(invalid(
                        format!("constraints[{i}].axis"),
                        format!("axis {axis} out of range for {dims} dimensions"),
                    ));
                }
                ConstraintSpec::Quadratic { scale, .. } if *scale <= 0.0 => {
                    return Err(invalid(
                        format!("constraints[{i}].scale"),
                        "scale must be > 0",
                    ));
                }
                ConstraintSpec::QuadraticForm { matrix, .. } => {
                    if matrix.len() != dims || matrix.iter().any(|r| r.len() != dims) {
                        return Err(invalid(
                            format!("constraints[{i}].matrix"),
                            format!("matrix must be {dims}x{dims}"),
                        ));
                    }
                    for r in 0..dims {
                        for col in 0..dims {
                            if (matrix[r][col] - matrix[col][r]).abs() > 1e-12 {
                                return Err(invalid(
                                    format!("constraints[{i}].matrix"),
                                    "matrix must be symmetric",
                                ));
                            }
                        }
                    }
                }
                ConstraintSpec::Lariat {
                    lower,
                    upper,
                    kappa,
                } => {
                    if lower.len() != dims || upper.len() != dims {
                        return Err(invalid(
                            format!("constraints[{i}].lower"),
                            format!("region bounds must have {dims} coordinates"),
                        ));
                    }
                    if lower.iter().zip(upper).any(|(l, u)| l >= u) {
                        return Err(invalid(
                            format!("constraints[{i}].upper"),
                            "region upper bounds must exceed lower bounds",
                        ));
                    }
                    if !(*kappa > 0.0) || *kappa > KAPPA_CAP {
                        return Err(invalid(
                            format!("constraints[{i}].kappa"),
                            format!("kappa must be in (0, {KAPPA_CAP}]"),
                        ));
                    }
                }
                _ => {}
            }
        }
        if let Some(d) = &self.drift {
            if self.grid.is_none() {
                return Err(invalid("drift", "drift needs a grid"));
            }
            if !d.q.is_empty() && d.q.len() != dims * dims {
                return Err(invalid(
                    "drift.q",
                    format!("expected {} entries for {dims} dimensions", dims * dims),
                ));
            }
            for r in 0..dims.min((d.q.len() as f64).sqrt() as usize) {
                for c in 0..dims {
                    if d.q[r * dims + c] + d.q[c * dims + r] != 0.0 {
                        return Err(invalid("drift.q", "matrix must be exactly antisymmetric"));
                    }
                }
            }
            if !(d.diffusion > 0.0) {
                return Err(invalid("drift.diffusion", "diffusion must be > 0"));
            }
        }
        if let Some(b) = &self.blanket {
            let nb = b.mean_b.len();
            if nb == 0 {
                return Err(invalid("blanket.mean_b", "blanket block must be nonempty"));
            }
            if b.cov_b.len() != nb {
                return Err(invalid(
                    "blanket.cov_b",
                    format!("expected a {nb}x{nb} matrix"),
                ));
            }
            if b.r_eta.len() != b.mean_eta.len() {
                return Err(invalid(
                    "blanket.r_eta",
                    "row count must match the external block dimension",
                ));
            }
            if b.r_mu.len() != b.mean_mu.len() {
                return Err(invalid(
                    "blanket.r_mu",
                    "row count must match the internal block dimension",
                ));
            }
        }
        for (i, e) in self.experiments.iter().enumerate() {
            if !valid_experiments.contains(&e.name.as_str()) {
                return Err(invalid(
                    format!("experiments[{i}].name"),
                    format!(
                        "unknown experiment {:?}; valid names: {}",
                        e.name,
                        valid_experiments.join(", ")
                    ),
                ));
            }
            if STOCHASTIC_EXPERIMENTS.contains(&e.name.as_str())
                && !e.params.contains_key("seeds")
            {
                return Err(invalid(
                    format!("experiments[{i}].params.seeds"),
                    "stochastic experiments need an explicit seed list",
                ));
            }
            if let Some(dt) = e.params.get("dt") {
                if dt.as_f64().map_or(true, |v| v <= 0.0) {
                    return Err(invalid(
                        format!("experiments[{i}].params.dt"),
                        "dt must be a positive number",
                    ));
                }
            }
            if let Some(steps) = e.params.get("steps") {
                if steps.as_u64().map_or(true, |v| v == 0) {
                    return Err(invalid(
                        format!("experiments[{i}].params.steps"),
                        "steps must be a positive integer",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Grid, ConfigError> {
        self.grid
            .as_ref()
            .ok_or_else(|| invalid("grid", "this experiment needs a grid"))?
            .build()
    }

    /// All configured constraints as one set on the scenario grid.
    pub fn build_constraints(&self) -> Result<ConstraintSet, ConfigError> {
        let grid = self.build_grid()?;
        if self.constraints.is_empty() {
            return Err(invalid("constraints", "at least one constraint is needed"));
        }
        let mut set = ConstraintSet::empty(grid.clone());
        for c in &self.constraints {
            match c {
                ConstraintSpec::Linear {
                    axis,
                    target,
                    multiplier,
                } => {
                    let a = *axis;
                    set.push_with_multiplier(grid.sample(|x| x[a]), *target, *multiplier)?;
                }
                ConstraintSpec::Quadratic {
                    axis,
                    center,
                    scale,
                    target,
                    multiplier,
                } => {
                    let (a, c0, s) = (*axis, *center, *scale);
                    set.push_with_multiplier(
                        grid.sample(|x| (x[a] - c0) * (x[a] - c0) / s),
                        *target,
                        *multiplier,
                    )?;
                }
                ConstraintSpec::QuadraticForm {
                    matrix,
                    target,
                    multiplier,
                } => {
                    let m = matrix.clone();
                    let field = grid.sample(|x| {
                        let mut acc = 0.0;
                        for (i, row) in m.iter().enumerate() {
                            for (j, a) in row.iter().enumerate() {
                                acc += x[i] * a * x[j];
                            }
                        }
                        acc / 2.0
                    });
                    set.push_with_multiplier(field, *target, *multiplier)?;
                }
                ConstraintSpec::Lariat {
                    lower,
                    upper,
                    kappa,
                } => {
                    let region = Region::interval(grid.clone(), lower, upper)?;
                    set.extend(&ConstraintSet::indicator_complement(&region, *kappa)?)?;
                }
            }
        }
        Ok(set)
    }

    pub fn build_drift(&self) -> Result<DriftSpec, ConfigError> {
        let cs = self.build_constraints()?;
        let dims = cs.grid().dims();
        match &self.drift {
            None => Ok(DriftSpec::gradient(cs, 1.0)?),
            Some(d) => {
                let q = if d.q.is_empty() {
                    vec![0.0; dims * dims]
                } else {
                    d.q.clone()
                };
                Ok(DriftSpec::new(cs, &q, d.diffusion)?)
            }
        }
    }

    pub fn build_blanket(&self) -> Result<GaussianSystem, ConfigError> {
        self.blanket
            .as_ref()
            .ok_or_else(|| invalid("blanket", "this experiment needs a blanket spec"))?
            .build()
    }
}

/// Apply one `path=value` override to a JSON document, creating
/// intermediate objects along dotted segments. Values parse as JSON
/// first and fall back to strings.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), ConfigError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| invalid("--set", format!("{assignment:?} is not key=value")))?;
    if path.is_empty() {
        return Err(invalid("--set", "override path must not be empty"));
    }
    let parsed: Value = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));
    let mut cursor = doc;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let last = i == segments.len() - 1;
        if let Ok(idx) = seg.parse::<usize>() {
            let arr = cursor.as_array_mut().ok_or_else(|| {
                invalid("--set", format!("segment {seg:?} indexes a non-array"))
            })?;
            if idx >= arr.len() {
                return Err(invalid("--set", format!("index {idx} out of bounds")));
            }
            if last {
                arr[idx] = parsed;
                return Ok(());
            }
            cursor = &mut arr[idx];
        } else {
            let obj = cursor.as_object_mut().ok_or_else(|| {
                invalid("--set", format!("segment {seg:?} indexes a non-object"))
            })?;
            if last {
                obj.insert(seg.to_string(), parsed);
                return Ok(());
            }
            cursor = obj
                .entry(seg.to_string())
                .or_insert_with(|| Value::Object(Default::default()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const NAMES: &[&str] = &["maxent-solve", "langevin-sample"];

    fn minimal() -> Value {
        serde_json::json!({
            "schema": 1,
            "name": "demo",
            "grid": {"lower": [0.0], "upper": [1.0], "points": [11]},
            "constraints": [{"kind": "linear", "target": 0.4}],
            "experiments": [{"name": "maxent-solve"}]
        })
    }

    #[test]
    fn minimal_scenario_validates() {
        let s = Scenario::from_value(minimal(), NAMES).unwrap();
        assert_eq!(s.name, "demo");
        assert_eq!(s.output_dir, "out");
        let cs = s.build_constraints().unwrap();
        assert_eq!(cs.len(), 1);
    }

    #[test]
    fn wrong_schema_version_points_at_field() {
        let mut v = minimal();
        v["schema"] = serde_json::json!(2);
        let err = Scenario::from_value(v, NAMES).unwrap_err();
        assert!(err.to_string().contains("schema"));
    }

    #[test]
    fn unknown_experiment_lists_valid_names() {
        let mut v = minimal();
        v["experiments"][0]["name"] = serde_json::json!("bogus");
        let err = Scenario::from_value(v, NAMES).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("experiments[0].name"));
        assert!(msg.contains("maxent-solve"));
    }

    #[test]
    fn stochastic_experiment_requires_seeds() {
        let mut v = minimal();
        v["experiments"][0]["name"] = serde_json::json!("langevin-sample");
        let err = Scenario::from_value(v, NAMES).unwrap_err();
        assert!(err.to_string().contains("params.seeds"));
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let mut v = minimal();
        apply_override(&mut v, "grid.points.0=21").unwrap();
        apply_override(&mut v, "experiments.0.params.tol=1e-8").unwrap();
        let s = Scenario::from_value(v, NAMES).unwrap();
        assert_eq!(s.grid.unwrap().points[0], 21);
        assert!((s.experiments[0].f64_param("tol", 0.0).unwrap() - 1e-8).abs() < 1e-20);
    }

    #[test]
    fn override_without_equals_is_rejected() {
        let mut v = minimal();
        assert!(apply_override(&mut v, "no-equals").is_err());
    }

    #[test]
    fn asymmetric_q_is_rejected() {
        let mut v = minimal();
        v["drift"] = serde_json::json!({"q": [0.0], "diffusion": 1.0});
        v["drift"]["q"] = serde_json::json!([0.5]);
        let err = Scenario::from_value(v, NAMES).unwrap_err();
        assert!(err.to_string().contains("drift.q"));
    }

    #[test]
    fn lariat_kappa_range_is_checked() {
        let mut v = minimal();
        v["constraints"] = serde_json::json!([
            {"kind": "lariat", "lower": [0.2], "upper": [0.8], "kappa": -1.0}
        ]);
        let err = Scenario::from_value(v, NAMES).unwrap_err();
        assert!(err.to_string().contains("kappa"));
    }
}
