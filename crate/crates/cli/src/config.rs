//! Experiment configuration: one JSON document per run.

use decoq_core::evolution::DEFAULT_EPS_S;
use decoq_core::states::DEFAULT_LEAK_TOL;
use decoq_core::ModelSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_eps_s")]
    pub eps_s: f64,
    #[serde(default = "default_leak_tol")]
    pub leak_tol: f64,
}

fn default_t_max() -> f64 {
    2.0
}

fn default_steps() -> usize {
    400
}

fn default_eps_s() -> f64 {
    DEFAULT_EPS_S
}

fn default_leak_tol() -> f64 {
    DEFAULT_LEAK_TOL
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { t_max: default_t_max(), steps: default_steps(), eps_s: default_eps_s(), leak_tol: default_leak_tol() }
    }
}

/// Vary one numeric field of the model. `parameter` is a dotted path rooted
/// at the model, e.g. `spin_boson.temperature` or `cavity_thermal.modes.0.g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parse and check a configuration document. Errors name the offending field.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| config_err(format!("malformed JSON: {e}")))?;
    match value.get("model") {
        Some(Value::Object(m)) if m.len() != 1 => {
            let keys: Vec<&str> = m.keys().map(String::as_str).collect();
            return Err(config_err(format!("model: exactly one model variant required, found {keys:?}")));
        }
        Some(Value::Object(_)) => {}
        Some(_) => return Err(config_err("model: expected an object with one model variant")),
        None => return Err(config_err("model: missing field")),
    }
    let config: ExperimentConfig = serde_path_to_error::deserialize(&value).map_err(|e| {
        let path = e.path().to_string();
        config_err(format!("{path}: {}", e.inner()))
    })?;
    config.check()?;
    Ok(config)
}

impl ExperimentConfig {
    fn check(&self) -> Result<(), CliError> {
        let run = &self.run;
        if !(run.t_max.is_finite() && run.t_max > 0.0) {
            return Err(config_err(format!("run.t_max: {} must be positive", run.t_max)));
        }
        if run.steps < decoq_core::evolution::MIN_STEPS {
            return Err(config_err(format!(
                "run.steps: {} is below the minimum of {}",
                run.steps,
                decoq_core::evolution::MIN_STEPS
            )));
        }
        if !(run.eps_s > 0.0 && run.eps_s <= 0.5) {
            return Err(config_err(format!("run.eps_s: {} outside (0, 0.5]", run.eps_s)));
        }
        if !(run.leak_tol > 0.0 && run.leak_tol < 1.0) {
            return Err(config_err(format!("run.leak_tol: {} outside (0, 1)", run.leak_tol)));
        }
        self.model.validate().map_err(|e| config_err(format!("model.{}: {e}", self.model.name())))?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(config_err("sweep.values: list is empty"));
            }
            if let Some(x) = sweep.values.iter().find(|x| !x.is_finite()) {
                return Err(config_err(format!("sweep.values: {x} is not finite")));
            }
            let model = serde_json::to_value(&self.model).expect("model serializes");
            match lookup(&model, &sweep.parameter) {
                Some(Value::Number(_)) => {}
                Some(_) => {
                    return Err(config_err(format!("sweep.parameter: {:?} is not a numeric field", sweep.parameter)))
                }
                None => return Err(config_err(format!("sweep.parameter: {:?} does not resolve", sweep.parameter))),
            }
        }
        Ok(())
    }

    /// SHA-256 of the model's canonical JSON. Keys sweep and report rows.
    pub fn model_hash(&self) -> String {
        model_hash(&self.model)
    }

    /// The model for each sweep value, in sweep order.
    pub fn sweep_models(&self) -> Result<Vec<(f64, ModelSpec)>, CliError> {
        let sweep = self.sweep.as_ref().ok_or_else(|| config_err("sweep: missing section"))?;
        let base = serde_json::to_value(&self.model).expect("model serializes");
        sweep
            .values
            .iter()
            .map(|&x| {
                let mut v = base.clone();
                let slot = lookup_mut(&mut v, &sweep.parameter)
                    .ok_or_else(|| config_err(format!("sweep.parameter: {:?} does not resolve", sweep.parameter)))?;
                *slot = if slot.is_u64() && x >= 0.0 && x.fract() == 0.0 { Value::from(x as u64) } else { Value::from(x) };
                let model: ModelSpec = serde_path_to_error::deserialize(&v)
                    .map_err(|e| config_err(format!("sweep value {x}: {}: {}", e.path(), e.inner())))?;
                model.validate().map_err(|e| config_err(format!("sweep value {x}: {e}")))?;
                Ok((x, model))
            })
            .collect()
    }
}

pub fn model_hash(model: &ModelSpec) -> String {
    let canonical = serde_json::to_vec(model).expect("model serializes");
    hex::encode(Sha256::digest(&canonical))
}

fn lookup<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(v, |cur, key| match cur {
        Value::Object(m) => m.get(key),
        Value::Array(a) => key.parse::<usize>().ok().and_then(|i| a.get(i)),
        _ => None,
    })
}

fn lookup_mut<'a>(v: &'a mut Value, path: &str) -> Option<&'a mut Value> {
    path.split('.').try_fold(v, |cur, key| match cur {
        Value::Object(m) => m.get_mut(key),
        Value::Array(a) => key.parse::<usize>().ok().and_then(move |i| a.get_mut(i)),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOCK: &str = r#"{
        "model": {"pure_dephasing": {"g": 1.0, "qubit": {"theta": 1.5707963267948966, "phi": 0.0},
                  "boson": {"kind": "fock", "n": 3, "truncation": 120}}},
        "run": {"t_max": 2.0, "steps": 400}
    }"#;

    fn err(text: &str) -> String {
        match parse_config(text) {
            Err(CliError::Config(msg)) => msg,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn defaults_fill_in() {
        let c = parse_config(FOCK).unwrap();
        assert_eq!(c.run.eps_s, 0.05);
        assert_eq!(c.run.leak_tol, 1e-6);
        assert_eq!(c.output.format, Format::Csv);
        assert!(c.sweep.is_none());
    }

    #[test]
    fn errors_carry_field_paths() {
        let bad = FOCK.replace("\"g\": 1.0", "\"g\": \"one\"");
        assert!(err(&bad).starts_with("model.pure_dephasing.g"), "{}", err(&bad));
        let typo = FOCK.replace("\"steps\"", "\"stepz\"");
        assert!(err(&typo).contains("stepz"));
        assert!(err(&FOCK.replace("400", "4")).starts_with("run.steps"));
    }

    #[test]
    fn exactly_one_model_variant() {
        assert!(err(r#"{"model": {}}"#).contains("exactly one"));
        let two = r#"{"model": {"pure_dephasing": {}, "spin_boson": {}}}"#;
        assert!(err(two).contains("exactly one"));
        assert!(err(r#"{"run": {}}"#).contains("model"));
        assert!(err("{").contains("malformed"));
    }

    #[test]
    fn sweep_paths_must_be_numeric() {
        let with = |p: &str, vals: &str| FOCK.replace("\"run\"", &format!("\"sweep\": {{\"parameter\": \"{p}\", \"values\": {vals}}}, \"run\""));
        let ok = parse_config(&with("pure_dephasing.g", "[0.5, 2.0]")).unwrap();
        let models = ok.sweep_models().unwrap();
        assert_eq!(models.len(), 2);
        match &models[1].1 {
            ModelSpec::PureDephasing(s) => assert_eq!(s.g, 2.0),
            _ => unreachable!(),
        }
        assert!(err(&with("pure_dephasing.boson.kind", "[1.0]")).contains("not a numeric"));
        assert!(err(&with("pure_dephasing.nope", "[1.0]")).contains("does not resolve"));
        assert!(err(&with("pure_dephasing.g", "[]")).contains("empty"));
    }

    #[test]
    fn hash_tracks_the_model_only() {
        let a = parse_config(FOCK).unwrap();
        let b = parse_config(&FOCK.replace("400", "800")).unwrap();
        let c = parse_config(&FOCK.replace("\"g\": 1.0", "\"g\": 2.0")).unwrap();
        assert_eq!(a.model_hash(), b.model_hash());
        assert_ne!(a.model_hash(), c.model_hash());
        assert_eq!(a.model_hash().len(), 64);
    }
}
