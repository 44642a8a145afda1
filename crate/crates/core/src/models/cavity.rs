//! Cavity mode exchanging photons with thermally occupied reservoir modes:
//! `V(0) = Σ_j g_j (a r_j† + a† r_j)`.

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{check_finite, spec_err, thermal_bath, thermal_truncation, BuiltModel, Result};
use crate::entropy::{td_from_s2, InitialCondition, TdResult};
use crate::linalg::{QOperator, SpaceLayout};
use crate::states::{ladder_ops, make_boson_with_tol, BosonKind, BosonStateSpec};

/// Minimum reservoir truncation when none is given.
pub const MIN_BATH_TRUNCATION: usize = 12;

/// Default reservoir cutoffs keep the thermal tail this far below `leak_tol`,
/// so the truncated occupation matches the nominal one closely enough for
/// the closed form to hold at 1e-5.
const BATH_TAIL_MARGIN: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathMode {
    pub g: f64,
    pub nbar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
}

/// Initial cavity state; it has to be pure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CavityState {
    State(BosonStateSpec),
    /// Fock amplitudes as `[re, im]` pairs; normalized on construction.
    Amplitudes(Vec<C64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityThermalSpec {
    pub modes: Vec<BathMode>,
    pub cavity: CavityState,
}

impl CavityThermalSpec {
    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(spec_err("at least one reservoir mode is required"));
        }
        for (j, m) in self.modes.iter().enumerate() {
            check_finite(&format!("modes[{j}].g"), m.g)?;
            check_finite(&format!("modes[{j}].nbar"), m.nbar)?;
            if m.g <= 0.0 {
                return Err(spec_err(format!("modes[{j}].g = {} must be > 0", m.g)));
            }
            if m.nbar < 0.0 {
                return Err(spec_err(format!("modes[{j}].nbar = {} must be >= 0", m.nbar)));
            }
            if m.truncation == Some(0) {
                return Err(spec_err(format!("modes[{j}].truncation must be at least 1")));
            }
        }
        match &self.cavity {
            CavityState::State(s) => {
                s.validate()?;
                if !s.is_pure() {
                    return Err(spec_err("cavity initial state must be pure; a thermal cavity state is mixed"));
                }
            }
            CavityState::Amplitudes(a) => {
                if a.is_empty() || a.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                    return Err(spec_err("cavity amplitudes must be a non-empty list of finite numbers"));
                }
                if a.iter().map(|z| z.norm_sqr()).sum::<f64>() == 0.0 {
                    return Err(spec_err("cavity amplitudes are all zero"));
                }
            }
        }
        Ok(())
    }

    /// `γ = Σ g_j²` and `γ_T = Σ g_j² n̄_j`.
    pub fn rates(&self) -> (f64, f64) {
        let gamma = self.modes.iter().map(|m| m.g * m.g).sum();
        let gamma_t = self.modes.iter().map(|m| m.g * m.g * m.nbar).sum();
        (gamma, gamma_t)
    }

    pub fn bath_truncations(&self, leak_tol: f64) -> Vec<usize> {
        self.modes.iter().map(|m| thermal_truncation(m.nbar, m.truncation, MIN_BATH_TRUNCATION, leak_tol * BATH_TAIL_MARGIN)).collect()
    }

    /// Normalized cavity state vector and the leakage of its truncation.
    pub fn cavity_vector(&self, leak_tol: f64) -> Result<(DVector<C64>, f64)> {
        match &self.cavity {
            CavityState::State(s) => {
                let spec = match s.kind {
                    // The zero-temperature thermal state is the vacuum.
                    BosonKind::Thermal { .. } => BosonStateSpec::fock(0, s.truncation),
                    _ => *s,
                };
                let st = make_boson_with_tol(&spec, leak_tol)?;
                let v = st.vector.clone().ok_or_else(|| spec_err("cavity initial state must be pure"))?;
                Ok((v, st.leakage()))
            }
            CavityState::Amplitudes(a) => {
                let v = DVector::from_vec(a.clone());
                let norm = v.norm();
                Ok((v / C64::new(norm, 0.0), 0.0))
            }
        }
    }

    pub fn interaction(&self, cavity_dim: usize, bath: &[usize]) -> Result<QOperator> {
        let mut dims = vec![cavity_dim];
        dims.extend_from_slice(bath);
        let layout = SpaceLayout::new(dims)?;
        let a = ladder_ops(cavity_dim);
        let mut v = QOperator::zeros(&layout);
        for (j, (m, &n)) in self.modes.iter().zip(bath).enumerate() {
            let r = ladder_ops(n);
            let g = C64::new(m.g, 0.0);
            v.add_embedded(g, &[(0, &a.b), (j + 1, &r.b_dag)])?;
            v.add_embedded(g, &[(0, &a.b_dag), (j + 1, &r.b)])?;
        }
        Ok(v)
    }

    pub fn build(&self, leak_tol: f64) -> Result<BuiltModel> {
        self.validate()?;
        let truncs = self.bath_truncations(leak_tol);
        let (psi, cavity_leak) = self.cavity_vector(leak_tol)?;
        let mut dims = vec![psi.len()];
        dims.extend_from_slice(&truncs);
        SpaceLayout::new(dims.clone())?;
        let bath = thermal_bath(&self.modes.iter().zip(&truncs).map(|(m, &n)| (m.nbar, n)).collect::<Vec<_>>(), leak_tol)?;
        let v = self.interaction(psi.len(), &truncs)?;
        let ic = InitialCondition::new(psi, bath.rho.clone(), v.clone())?;
        Ok(BuiltModel {
            generator: v,
            ic,
            boson_factors: (0..dims.len()).collect(),
            truncations: dims,
            state_leakage: bath.leakage().max(cavity_leak),
            warnings: Vec::new(),
        })
    }
}

/// `⟨a†a⟩ - |⟨a⟩|²` of a truncated pure state.
pub fn number_minus_coherence(psi: &DVector<C64>) -> f64 {
    let n = psi.len();
    let mean_n: f64 = (0..n).map(|k| k as f64 * psi[k].norm_sqr()).sum();
    let mean_a: C64 = (0..n.saturating_sub(1)).map(|k| psi[k].conj() * psi[k + 1] * ((k + 1) as f64).sqrt()).sum();
    (mean_n - mean_a.norm_sqr()).max(0.0)
}

/// `t_d = 1 / (2 √((γ + 2γ_T)(⟨a†a⟩ - |⟨a⟩|²) + γ_T))`.
pub fn td_cavity(spec: &CavityThermalSpec, leak_tol: f64) -> Result<TdResult> {
    spec.validate()?;
    let (gamma, gamma_t) = spec.rates();
    let (psi, _) = spec.cavity_vector(leak_tol)?;
    let s2 = 4.0 * ((gamma + 2.0 * gamma_t) * number_minus_coherence(&psi) + gamma_t);
    Ok(td_from_s2(s2)?)
}
