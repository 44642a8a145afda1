//! The three worked models: each spec compiles to an initial condition for
//! [`crate::entropy`], a time-independent generator for
//! [`crate::evolution`], and a closed-form decoherence time.

pub mod cavity;
pub mod pure_dephasing;
pub mod spin_boson;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cavity::{td_cavity, BathMode, CavityState, CavityThermalSpec};
pub use pure_dephasing::{td_pure_dephasing, PureDephasingSpec};
pub use spin_boson::{
    b2_expectation, b2_matrix_expectation, lie_transform_residual, td_spin_boson, td_spin_boson_limit,
    Denominators, LieResidual, LimitResult, Regime, SpinBosonMode, SpinBosonSpec,
};

use crate::entropy::{EntropyError, InitialCondition, TdResult};
use crate::evolution::SeriesContext;
use crate::linalg::{kron, LinalgError, QOperator};
use crate::states::{make_boson_with_tol, required_truncation, BosonKind, BosonState, BosonStateSpec, StateError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model: {0}")]
    Spec(String),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

impl ModelError {
    /// Whether the failure is a dimension cap or truncation leakage problem.
    pub fn is_capacity(&self) -> bool {
        matches!(
            self,
            ModelError::State(StateError::Truncation { .. })
                | ModelError::State(StateError::Linalg(LinalgError::Capacity { .. }))
                | ModelError::Linalg(LinalgError::Capacity { .. })
                | ModelError::Entropy(EntropyError::Linalg(LinalgError::Capacity { .. }))
                | ModelError::Entropy(EntropyError::State(StateError::Truncation { .. }))
        )
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;

pub(crate) fn spec_err(msg: impl Into<String>) -> ModelError {
    ModelError::Spec(msg.into())
}

pub(crate) fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(spec_err(format!("{name} = {x} must be finite")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    PureDephasing(PureDephasingSpec),
    CavityThermal(CavityThermalSpec),
    SpinBoson(SpinBosonSpec),
}

/// A model compiled onto a truncated composite space. Factor 0 is system `a`.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    /// Time-independent generator used for exact evolution.
    pub generator: QOperator,
    pub ic: InitialCondition,
    pub boson_factors: Vec<usize>,
    pub truncations: Vec<usize>,
    pub state_leakage: f64,
    pub warnings: Vec<String>,
}

impl BuiltModel {
    pub fn series_context(&self, model_hash: impl Into<String>, leak_tol: f64) -> SeriesContext {
        SeriesContext {
            model_hash: model_hash.into(),
            truncations: self.truncations.clone(),
            boson_factors: self.boson_factors.clone(),
            state_leakage: self.state_leakage,
            leak_tol,
            warnings: self.warnings.clone(),
        }
    }
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::PureDephasing(_) => "pure_dephasing",
            ModelSpec::CavityThermal(_) => "cavity_thermal",
            ModelSpec::SpinBoson(_) => "spin_boson",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::PureDephasing(s) => s.validate(),
            ModelSpec::CavityThermal(s) => s.validate(),
            ModelSpec::SpinBoson(s) => s.validate(),
        }
    }

    pub fn build(&self, leak_tol: f64) -> Result<BuiltModel> {
        match self {
            ModelSpec::PureDephasing(s) => s.build(leak_tol),
            ModelSpec::CavityThermal(s) => s.build(leak_tol),
            ModelSpec::SpinBoson(s) => s.build(leak_tol),
        }
    }

    /// Closed-form decoherence time of the model.
    pub fn td(&self, leak_tol: f64) -> Result<TdResult> {
        match self {
            ModelSpec::PureDephasing(s) => td_pure_dephasing(s, leak_tol),
            ModelSpec::CavityThermal(s) => td_cavity(s, leak_tol),
            ModelSpec::SpinBoson(s) => td_spin_boson(s),
        }
    }

    /// Validity warnings that apply to every result of this model.
    pub fn warnings(&self) -> Vec<String> {
        match self {
            ModelSpec::SpinBoson(s) => s.dispersive_warnings(),
            _ => Vec::new(),
        }
    }
}

/// Product of thermal mode states, the reservoir of two of the models.
pub(crate) struct ThermalBath {
    pub states: Vec<BosonState>,
    pub truncations: Vec<usize>,
    pub rho: QOperator,
}

impl ThermalBath {
    pub fn leakage(&self) -> f64 {
        self.states.iter().map(BosonState::leakage).fold(0.0, f64::max)
    }
}

/// Default per-mode truncation: enough levels for the leak tolerance, and at least `floor`.
pub(crate) fn thermal_truncation(nbar: f64, explicit: Option<usize>, floor: usize, leak_tol: f64) -> usize {
    explicit.unwrap_or_else(|| required_truncation(&BosonKind::Thermal { nbar }, leak_tol).max(floor))
}

pub(crate) fn thermal_bath(modes: &[(f64, usize)], leak_tol: f64) -> Result<ThermalBath> {
    let mut states = Vec::with_capacity(modes.len());
    for &(nbar, truncation) in modes {
        states.push(make_boson_with_tol(&BosonStateSpec::thermal(nbar, truncation), leak_tol)?);
    }
    let mut rho = states[0].rho.clone();
    for st in &states[1..] {
        rho = kron(&rho, &st.rho)?;
    }
    Ok(ThermalBath { truncations: modes.iter().map(|m| m.1).collect(), states, rho })
}
