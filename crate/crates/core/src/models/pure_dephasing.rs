//! Qubit dephased by one boson mode: `V = g σ_z (b + b†)`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{check_finite, spec_err, BuiltModel, Result};
use crate::entropy::{td_from_s2, InitialCondition, TdResult};
use crate::linalg::{QOperator, SpaceLayout};
use crate::states::{ladder_ops, make_boson_with_tol, make_qubit, pauli_ops, quadrature_stats, BosonStateSpec, QubitStateSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PureDephasingSpec {
    pub g: f64,
    pub qubit: QubitStateSpec,
    pub boson: BosonStateSpec,
}

impl PureDephasingSpec {
    pub fn validate(&self) -> Result<()> {
        check_finite("g", self.g)?;
        // g = 0 is allowed: it is the no-interaction reference case.
        if self.g < 0.0 {
            return Err(spec_err(format!("g = {} must be >= 0", self.g)));
        }
        self.qubit.validate()?;
        self.boson.validate()?;
        Ok(())
    }

    pub fn interaction(&self) -> Result<QOperator> {
        let n = self.boson.truncation;
        let layout = SpaceLayout::new(vec![2, n])?;
        Ok(QOperator::new(layout, pauli_ops().z.kronecker(&ladder_ops(n).x) * C64::new(self.g, 0.0))?)
    }

    pub fn build(&self, leak_tol: f64) -> Result<BuiltModel> {
        self.validate()?;
        let v = self.interaction()?;
        let boson = make_boson_with_tol(&self.boson, leak_tol)?;
        let ic = InitialCondition::new(make_qubit(&self.qubit)?, boson.rho.clone(), v.clone())?;
        Ok(BuiltModel {
            generator: v,
            ic,
            boson_factors: vec![1],
            truncations: vec![self.boson.truncation],
            state_leakage: boson.leakage(),
            warnings: Vec::new(),
        })
    }
}

/// `t_d = 1 / (2 g rms(b+b†) √(1 - ⟨σ_z⟩²))`, with the quadrature statistics
/// of the truncated boson state.
pub fn td_pure_dephasing(spec: &PureDephasingSpec, leak_tol: f64) -> Result<TdResult> {
    spec.validate()?;
    let boson = make_boson_with_tol(&spec.boson, leak_tol)?;
    let var = quadrature_stats(&boson.rho).variance;
    let z = spec.qubit.sigma_z_expectation();
    let s2 = 4.0 * spec.g * spec.g * var * (1.0 - z * z).max(0.0);
    Ok(td_from_s2(s2)?)
}
