//! Driven two-level system coupled dispersively to detuned boson modes.
//!
//! In the frame rotating at the drive frequency `ω_f`:
//!
//! ```text
//! H = Δ S_z + Σ Δ_k b_k†b_k + Ω σ_x + Σ g_k (b_k σ_+ + b_k† σ_-)
//! ```
//!
//! with `S_z = σ_z/2`, `Δ = Δ_G - ω_f` and `Δ_k = ω_k - ω_f`. The rotation
//! `U = exp Σ ε_k (b_k σ_+ - b_k† σ_-)` with `ε_k = g_k/(Δ_G - ω_k)` removes
//! the exchange term to first order and leaves
//!
//! ```text
//! H_eff = Δ S_z + Σ Δ_k b_k†b_k + Ω σ_x + Σ (g_k²/D_k) σ_+σ_-
//!       + [Σ c_kk' b_k†b_k' + Ω Σ (g_k/D_k)(b_k + b_k†)] σ_z
//! ```
//!
//! where `D_k = Δ_G - ω_k` and `c_kk' = g_k g_k' (1/D_k + 1/D_k')/2`. The
//! dispersive approximation sets `D_k ≈ Δ_G`.
//!
//! The dephasing analysis uses `V(0) = Ω σ_x + B̂(0) σ_z` with
//!
//! ```text
//! B̂(0) = 2Ω Σ (g_k/Δ_G)(b_k + b_k†) + Σ (g_k g_k'/Δ_G)(b_k†b_k' - n̄_k δ_kk')
//! ```
//!
//! and the local part `H0 = Δ S_z + Σ Δ_k b_k†b_k + Σ (g_k²/Δ_G) σ_+σ_-`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{check_finite, spec_err, thermal_bath, thermal_truncation, BuiltModel, Result, ThermalBath};
use crate::entropy::{td_from_s2, InitialCondition, TdResult};
use crate::linalg::{embed, kron, trace_of_product, HermitianEigen, QOperator, SpaceLayout};
use crate::states::{ladder_ops, make_qubit, pauli_ops, QubitStateSpec};

/// Dispersive couplings above this trigger a validity warning.
pub const DISPERSIVE_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinBosonMode {
    pub g: f64,
    pub omega: f64,
    /// Mean occupation; derived from `temperature` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinBosonSpec {
    pub delta: f64,
    pub delta_g: f64,
    pub omega_rabi: f64,
    pub modes: Vec<SpinBosonMode>,
    /// `kT` in frequency units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    pub qubit: QubitStateSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Strong,
    Weak,
}

/// Energy denominators in the effective Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Denominators {
    /// `Δ_G` throughout, the dispersive approximation.
    Printed,
    /// `Δ_G - ω_k`, exact to second order in `ε_k`.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitResult {
    pub result: TdResult,
    /// Whether the spec sits in the regime the limit formula assumes.
    pub regime_valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LieResidual {
    /// Operator norm of `U H U† - H_eff` on the truncated space.
    pub residual: f64,
    /// Operator norm of `H`.
    pub h_norm: f64,
}

fn bose(omega: f64, kt: f64) -> f64 {
    1.0 / (omega / kt).exp_m1()
}

impl SpinBosonSpec {
    pub fn validate(&self) -> Result<()> {
        check_finite("delta", self.delta)?;
        check_finite("delta_g", self.delta_g)?;
        check_finite("omega_rabi", self.omega_rabi)?;
        if self.delta_g == 0.0 {
            return Err(spec_err("delta_g must be nonzero"));
        }
        if self.modes.is_empty() {
            return Err(spec_err("at least one boson mode is required"));
        }
        if let Some(kt) = self.temperature {
            if !(kt.is_finite() && kt > 0.0) {
                return Err(spec_err(format!("temperature = {kt} must be positive")));
            }
        }
        for (k, m) in self.modes.iter().enumerate() {
            check_finite(&format!("modes[{k}].g"), m.g)?;
            if !(m.omega.is_finite() && m.omega > 0.0) {
                return Err(spec_err(format!("modes[{k}].omega = {} must be positive", m.omega)));
            }
            match m.nbar {
                Some(n) if !(n.is_finite() && n >= 0.0) => {
                    return Err(spec_err(format!("modes[{k}].nbar = {n} must be >= 0")));
                }
                None if self.temperature.is_none() => {
                    return Err(spec_err(format!("modes[{k}] needs nbar, or a temperature to derive it")));
                }
                _ => {}
            }
            if m.truncation == Some(0) {
                return Err(spec_err(format!("modes[{k}].truncation must be at least 1")));
            }
        }
        self.qubit.validate()?;
        Ok(())
    }

    /// `n̄_k`: explicit, or Bose-Einstein at the spec temperature.
    pub fn occupations(&self) -> Vec<f64> {
        self.modes
            .iter()
            .map(|m| m.nbar.unwrap_or_else(|| self.temperature.map_or(0.0, |kt| bose(m.omega, kt))))
            .collect()
    }

    /// `Δ_k = ω_k - ω_f`.
    pub fn detunings(&self) -> Vec<f64> {
        let omega_f = self.delta_g - self.delta;
        self.modes.iter().map(|m| m.omega - omega_f).collect()
    }

    /// `(g_k/Δ_k, g_k/Δ_G)` per mode.
    pub fn epsilons(&self) -> Vec<(f64, f64)> {
        self.modes.iter().zip(self.detunings()).map(|(m, dk)| (m.g / dk, m.g / self.delta_g)).collect()
    }

    pub fn dispersive_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (k, (e_k, e_g)) in self.epsilons().into_iter().enumerate() {
            if !(e_k.abs() <= DISPERSIVE_LIMIT) || !(e_g.abs() <= DISPERSIVE_LIMIT) {
                out.push(format!(
                    "mode {k} is not dispersive: g/Δ_k = {e_k:.4}, g/Δ_G = {e_g:.4} (limit {DISPERSIVE_LIMIT})"
                ));
            }
        }
        out
    }

    pub fn truncations(&self, leak_tol: f64) -> Vec<usize> {
        self.modes.iter().zip(self.occupations()).map(|(m, n)| thermal_truncation(n, m.truncation, 2, leak_tol)).collect()
    }

    fn layout(&self, truncs: &[usize]) -> Result<SpaceLayout> {
        let mut dims = vec![2];
        dims.extend_from_slice(truncs);
        Ok(SpaceLayout::new(dims)?)
    }

    fn bath(&self, leak_tol: f64) -> Result<ThermalBath> {
        let truncs = self.truncations(leak_tol);
        self.layout(&truncs)?;
        thermal_bath(&self.occupations().into_iter().zip(truncs).collect::<Vec<_>>(), leak_tol)
    }

    /// `B̂(0)` on the bath factors, centered with the given per-mode occupations.
    pub fn bath_operator(&self, truncs: &[usize], centers: &[f64]) -> Result<QOperator> {
        let layout = SpaceLayout::new(truncs.to_vec())?;
        let ladders: Vec<_> = truncs.iter().map(|&n| ladder_ops(n)).collect();
        let (om, dg) = (self.omega_rabi, self.delta_g);
        let mut b = QOperator::zeros(&layout);
        for (k, m) in self.modes.iter().enumerate() {
            b = &b + &(&embed(&layout, &[(k, &ladders[k].x)])? * (2.0 * om * m.g / dg));
            for (kp, mp) in self.modes.iter().enumerate() {
                let c = m.g * mp.g / dg;
                let term = if k == kp {
                    let shifted = &ladders[k].number - DMatrix::identity(truncs[k], truncs[k]) * C64::new(centers[k], 0.0);
                    embed(&layout, &[(k, &shifted)])?
                } else {
                    embed(&layout, &[(k, &ladders[k].b_dag), (kp, &ladders[kp].b)])?
                };
                b = &b + &(&term * c);
            }
        }
        Ok(b)
    }

    fn qubit_term(layout: &SpaceLayout, op: &DMatrix<C64>) -> Result<QOperator> {
        Ok(embed(layout, &[(0, op)])?)
    }

    /// Bath free term `Σ Δ_k b_k†b_k`.
    fn bath_free(&self, layout: &SpaceLayout, truncs: &[usize]) -> Result<QOperator> {
        let mut h = QOperator::zeros(layout);
        for (k, dk) in self.detunings().into_iter().enumerate() {
            h = &h + &(&embed(layout, &[(k + 1, &ladder_ops(truncs[k]).number)])? * dk);
        }
        Ok(h)
    }

    fn sz_half() -> DMatrix<C64> {
        pauli_ops().z * C64::new(0.5, 0.0)
    }

    fn upper_projector() -> DMatrix<C64> {
        let p = pauli_ops();
        &p.plus * &p.minus
    }

    /// Full rotating-frame Hamiltonian with the exchange coupling.
    pub fn hamiltonian_full(&self, truncs: &[usize]) -> Result<QOperator> {
        let layout = self.layout(truncs)?;
        let p = pauli_ops();
        let mut h = &(&Self::qubit_term(&layout, &Self::sz_half())? * self.delta) + &self.bath_free(&layout, truncs)?;
        h = &h + &(&Self::qubit_term(&layout, &p.x)? * self.omega_rabi);
        for (k, m) in self.modes.iter().enumerate() {
            let l = ladder_ops(truncs[k]);
            let ex = &embed(&layout, &[(0, &p.plus), (k + 1, &l.b)])? + &embed(&layout, &[(0, &p.minus), (k + 1, &l.b_dag)])?;
            h = &h + &(&ex * m.g);
        }
        Ok(h)
    }

    fn denominators(&self, which: Denominators) -> Vec<f64> {
        match which {
            Denominators::Printed => vec![self.delta_g; self.modes.len()],
            Denominators::Exact => self.modes.iter().map(|m| self.delta_g - m.omega).collect(),
        }
    }

    /// Effective dispersive Hamiltonian.
    pub fn hamiltonian_eff(&self, truncs: &[usize], which: Denominators) -> Result<QOperator> {
        let layout = self.layout(truncs)?;
        let p = pauli_ops();
        let d = self.denominators(which);
        let ladders: Vec<_> = truncs.iter().map(|&n| ladder_ops(n)).collect();
        let mut h = &(&Self::qubit_term(&layout, &Self::sz_half())? * self.delta) + &self.bath_free(&layout, truncs)?;
        h = &h + &(&Self::qubit_term(&layout, &p.x)? * self.omega_rabi);
        let stark: f64 = self.modes.iter().zip(&d).map(|(m, dk)| m.g * m.g / dk).sum();
        h = &h + &(&Self::qubit_term(&layout, &Self::upper_projector())? * stark);
        for (k, m) in self.modes.iter().enumerate() {
            let lin = embed(&layout, &[(0, &p.z), (k + 1, &ladders[k].x)])?;
            h = &h + &(&lin * (self.omega_rabi * m.g / d[k]));
            for (kp, mp) in self.modes.iter().enumerate() {
                let c = 0.5 * m.g * mp.g * (1.0 / d[k] + 1.0 / d[kp]);
                let term = if k == kp {
                    embed(&layout, &[(0, &p.z), (k + 1, &ladders[k].number)])?
                } else {
                    embed(&layout, &[(0, &p.z), (k + 1, &ladders[k].b_dag), (kp + 1, &ladders[kp].b)])?
                };
                h = &h + &(&term * c);
            }
        }
        Ok(h)
    }

    /// Local part `H0`.
    pub fn h0(&self, truncs: &[usize]) -> Result<QOperator> {
        let layout = self.layout(truncs)?;
        let stark: f64 = self.modes.iter().map(|m| m.g * m.g / self.delta_g).sum();
        let h = &(&Self::qubit_term(&layout, &Self::sz_half())? * self.delta) + &self.bath_free(&layout, truncs)?;
        Ok(&h + &(&Self::qubit_term(&layout, &Self::upper_projector())? * stark))
    }

    /// `V(0) = Ω σ_x + B̂(0) σ_z`.
    pub fn interaction(&self, truncs: &[usize], centers: &[f64]) -> Result<QOperator> {
        let layout = self.layout(truncs)?;
        let b = self.bath_operator(truncs, centers)?;
        let sz = QOperator::new(SpaceLayout::single(2)?, pauli_ops().z)?;
        let coupling = kron(&sz, &b)?;
        Ok(&coupling + &(&Self::qubit_term(&layout, &pauli_ops().x)? * self.omega_rabi))
    }

    /// Anti-Hermitian `S = Σ ε_k (b_k σ_+ - b_k† σ_-)` with `ε_k = g_k/(Δ_G - ω_k)`.
    pub fn lie_generator(&self, truncs: &[usize]) -> Result<QOperator> {
        let layout = self.layout(truncs)?;
        let p = pauli_ops();
        let mut s = QOperator::zeros(&layout);
        for (k, m) in self.modes.iter().enumerate() {
            let den = self.delta_g - m.omega;
            if den == 0.0 {
                return Err(spec_err(format!("mode {k} is resonant with the two-level splitting")));
            }
            let l = ladder_ops(truncs[k]);
            let gen = &embed(&layout, &[(0, &p.plus), (k + 1, &l.b)])? - &embed(&layout, &[(0, &p.minus), (k + 1, &l.b_dag)])?;
            s = &s + &(&gen * (m.g / den));
        }
        Ok(s)
    }

    /// Compiled pieces of the effective model on default truncations.
    pub fn build_eff(&self, leak_tol: f64) -> Result<SpinBosonParts> {
        self.validate()?;
        let bath = self.bath(leak_tol)?;
        let truncs = bath.truncations.clone();
        let centers: Vec<f64> = bath.states.iter().map(|s| s.mean_number()).collect();
        let b0 = self.bath_operator(&truncs, &centers)?;
        let v0 = self.interaction(&truncs, &centers)?;
        let h0 = self.h0(&truncs)?;
        let h_eff = self.hamiltonian_eff(&truncs, Denominators::Printed)?;
        let ic = InitialCondition::new(make_qubit(&self.qubit)?, bath.rho.clone(), v0.clone())?;
        Ok(SpinBosonParts { h_eff, h0, v0, b0, ic, truncations: truncs, state_leakage: bath.leakage() })
    }

    pub fn build(&self, leak_tol: f64) -> Result<BuiltModel> {
        let parts = self.build_eff(leak_tol)?;
        let mut dims = vec![2];
        dims.extend_from_slice(&parts.truncations);
        Ok(BuiltModel {
            generator: &parts.h0 + &parts.v0,
            boson_factors: (1..dims.len()).collect(),
            truncations: dims,
            state_leakage: parts.state_leakage,
            warnings: self.dispersive_warnings(),
            ic: parts.ic,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SpinBosonParts {
    /// Effective Hamiltonian with the dispersive denominators.
    pub h_eff: QOperator,
    pub h0: QOperator,
    pub v0: QOperator,
    /// `B̂(0)` on the bath factors.
    pub b0: QOperator,
    pub ic: InitialCondition,
    pub truncations: Vec<usize>,
    pub state_leakage: f64,
}

/// Thermal `⟨B̂²⟩_R` in closed form.
pub fn b2_expectation(spec: &SpinBosonSpec) -> f64 {
    let n = spec.occupations();
    let dg2 = spec.delta_g * spec.delta_g;
    let om2 = spec.omega_rabi * spec.omega_rabi;
    let linear: f64 = spec.modes.iter().zip(&n).map(|(m, nk)| m.g * m.g * (2.0 * nk + 1.0)).sum::<f64>() * 4.0 * om2 / dg2;
    let mut bilinear = 0.0;
    for (m, nk) in spec.modes.iter().zip(&n) {
        for (mp, nkp) in spec.modes.iter().zip(&n) {
            bilinear += m.g * m.g * mp.g * mp.g / dg2 * (nkp + 1.0) * nk;
        }
    }
    linear + bilinear
}

/// `tr(ρ_R B̂²)` on the truncated thermal bath.
pub fn b2_matrix_expectation(spec: &SpinBosonSpec, leak_tol: f64) -> Result<f64> {
    spec.validate()?;
    let bath = spec.bath(leak_tol)?;
    let centers: Vec<f64> = bath.states.iter().map(|s| s.mean_number()).collect();
    let b = spec.bath_operator(&bath.truncations, &centers)?;
    let rb = &bath.rho * &b;
    Ok(trace_of_product(&rb, &b)?.re)
}

/// `t_d = 1 / (2 √(⟨B̂²⟩_R (1 - ⟨σ_z⟩²)))`.
pub fn td_spin_boson(spec: &SpinBosonSpec) -> Result<TdResult> {
    spec.validate()?;
    let z = spec.qubit.sigma_z_expectation();
    Ok(td_from_s2(4.0 * b2_expectation(spec) * (1.0 - z * z).max(0.0))?)
}

/// High-temperature limit formulas with `n̄_k = kT/ω_k` and `γ = Σ g_k²/ω_k`.
pub fn td_spin_boson_limit(spec: &SpinBosonSpec, regime: Regime) -> Result<LimitResult> {
    spec.validate()?;
    let kt = spec.temperature.ok_or_else(|| spec_err("limit formulas need a temperature"))?;
    let gamma: f64 = spec.modes.iter().map(|m| m.g * m.g / m.omega).sum();
    let z = spec.qubit.sigma_z_expectation();
    let sin2 = (1.0 - z * z).max(0.0);
    let dg2 = spec.delta_g * spec.delta_g;
    // s2 = 1/t_d² for each limit form.
    let s2 = match regime {
        Regime::Strong => 32.0 * spec.omega_rabi.powi(2) * kt * gamma * sin2 / dg2,
        Regime::Weak => 4.0 * (kt * gamma).powi(2) * sin2 / dg2,
    };
    let hot = spec.modes.iter().all(|m| kt >= 10.0 * m.omega);
    let coupled: Vec<f64> = spec.modes.iter().map(|m| m.g.abs()).filter(|&g| g > 0.0).collect();
    let field_ok = match regime {
        Regime::Strong => coupled.iter().all(|&g| spec.omega_rabi.abs() >= 10.0 * g),
        Regime::Weak => coupled.iter().all(|&g| spec.omega_rabi.abs() <= 0.1 * g),
    };
    Ok(LimitResult { result: td_from_s2(s2)?, regime_valid: hot && field_ok })
}

/// `‖U H U† - H_eff‖` with exact denominators in `H_eff`.
pub fn lie_transform_residual(spec: &SpinBosonSpec, leak_tol: f64) -> Result<LieResidual> {
    spec.validate()?;
    let truncs = spec.truncations(leak_tol);
    let h = spec.hamiltonian_full(&truncs)?;
    let s = spec.lie_generator(&truncs)?;
    // U = e^S = e^{-i (iS)}, and iS is Hermitian.
    let u = HermitianEigen::new(&s.scaled(C64::new(0.0, 1.0)))?.unitary(1.0);
    let rotated = &(&u * &h) * &u.adjoint();
    let diff = &rotated - &spec.hamiltonian_eff(&truncs, Denominators::Exact)?;
    Ok(LieResidual { residual: diff.hermitian_norm()?, h_norm: h.hermitian_norm()? })
}
