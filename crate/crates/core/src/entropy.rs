//! First-order entropy `s = 1 - tr ρ²`, its second derivative at `t = 0`,
//! and decoherence time scales derived from it.
//!
//! Two independent routes evaluate `s''(0)` for a product initial state
//! `|ψ⟩⟨ψ| ⊗ ρ_R` driven by `V(0)`:
//!
//! * [`s2_direct`] differentiates the reduced state: `s'' = -2 tr(ρ̇_a² + ρ_a ρ̈_a)`
//!   with `ρ̇_a = -i tr_R[V, ρ]` and `ρ̈_a = -tr_R[V, [V, ρ]]`.
//! * [`s2_eq3`] evaluates the R-averaged operator correlation
//!   `4 ⟨ ⟨V [V, P]⟩_R - ⟨V⟩_R ⟨[V, P]⟩_R ⟩_ψ` with `P = |ψ⟩⟨ψ| ⊗ I` and
//!   `⟨X⟩_R = tr_R((I ⊗ ρ_R) X)`.
//!
//! Both exploit the rank structure of the initial state so they cost O(d²)
//! (plus O(d² d_R) for the correlation route) instead of O(d³).

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::evolution::EntropySeries;
use crate::linalg::{LinalgError, QOperator, SpaceLayout};
use crate::states::StateError;

/// `s2` at or below this counts as zero: the state commutes with `V(0)`.
pub const S2_FLOOR: f64 = 1e-12;
/// Relative noise band for negative `s2` values that get clamped to zero.
pub const S2_NOISE: f64 = 1e-10;
/// Weights below this fraction of the largest are dropped from ensembles.
const ENSEMBLE_CUTOFF: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EntropyError {
    #[error("{0}")]
    Usage(String),
    #[error("internal consistency: {0}")]
    InternalConsistency(String),
    #[error("order-{order} finite difference is not converged: error indicator {indicator:.3e} exceeds tolerance {tolerance:.3e}; refine the grid (smaller t_max/steps ratio)")]
    Precision { order: usize, estimate: f64, indicator: f64, tolerance: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    State(#[from] StateError),
}

pub type Result<T> = std::result::Result<T, EntropyError>;

/// Pure state of system `a`, state of `R`, and the interaction at `t = 0`.
#[derive(Debug, Clone)]
pub struct InitialCondition {
    psi: DVector<C64>,
    rho_r: QOperator,
    v0: QOperator,
    rho_r_diagonal: bool,
}

impl InitialCondition {
    pub fn new(psi: DVector<C64>, rho_r: QOperator, v0: QOperator) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(EntropyError::Usage(format!("|ψ| = {norm}, expected a normalized state")));
        }
        rho_r.check_density()?;
        v0.check_hermitian()?;
        let mut dims = vec![psi.len()];
        dims.extend_from_slice(rho_r.layout().dims());
        if v0.layout().dims() != dims.as_slice() {
            return Err(LinalgError::LayoutMismatch { left: v0.layout().dims().to_vec(), right: dims }.into());
        }
        let d_r = rho_r.dim();
        let m = rho_r.matrix();
        let rho_r_diagonal = (0..d_r).all(|j| (0..d_r).all(|i| i == j || m[(i, j)] == C64::new(0.0, 0.0)));
        Ok(InitialCondition { psi, rho_r, v0, rho_r_diagonal })
    }

    pub fn psi(&self) -> &DVector<C64> {
        &self.psi
    }

    pub fn rho_r(&self) -> &QOperator {
        &self.rho_r
    }

    pub fn v0(&self) -> &QOperator {
        &self.v0
    }

    pub fn layout(&self) -> &SpaceLayout {
        self.v0.layout()
    }

    pub fn dim_a(&self) -> usize {
        self.psi.len()
    }

    /// Same state and bath with a different interaction.
    pub fn with_v0(&self, v0: QOperator) -> Result<Self> {
        Self::new(self.psi.clone(), self.rho_r.clone(), v0)
    }

    /// Dense `|ψ⟩⟨ψ| ⊗ ρ_R`.
    pub fn rho0(&self) -> QOperator {
        let p = &self.psi * self.psi.adjoint();
        QOperator::new(self.layout().clone(), p.kronecker(self.rho_r.matrix())).expect("layouts checked in new")
    }

    /// Weighted eigen-ensemble of `ρ_R`: `(weights, vectors)` with vectors as columns.
    pub fn bath_ensemble(&self) -> (Vec<f64>, DMatrix<C64>) {
        let d_r = self.rho_r.dim();
        let (weights, vectors) = if self.rho_r_diagonal {
            let w: Vec<f64> = (0..d_r).map(|k| self.rho_r.matrix()[(k, k)].re).collect();
            (w, DMatrix::identity(d_r, d_r))
        } else {
            let eig = self.rho_r.hermitian_part().symmetric_eigen();
            (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
        };
        let max = weights.iter().copied().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..d_r).filter(|&k| weights[k] > ENSEMBLE_CUTOFF * max).collect();
        let w = keep.iter().map(|&k| weights[k]).collect();
        let v = DMatrix::from_fn(d_r, keep.len(), |i, j| vectors[(i, keep[j])]);
        (w, v)
    }

    /// `W` with `ρ0 = W W†`, one column per retained ensemble member.
    pub fn ensemble(&self) -> DMatrix<C64> {
        let (w, u) = self.bath_ensemble();
        let (d_a, d_r) = (self.dim_a(), self.rho_r.dim());
        DMatrix::from_fn(d_a * d_r, w.len(), |row, s| self.psi[row / d_r] * u[(row % d_r, s)] * w[s].sqrt())
    }

    /// `Y = V (ψ ⊗ I_R)`, a `d × d_R` matrix.
    fn v_on_psi(&self) -> DMatrix<C64> {
        let (d_a, d_r) = (self.dim_a(), self.rho_r.dim());
        let v = self.v0.matrix();
        let mut y = DMatrix::<C64>::zeros(d_a * d_r, d_r);
        for u in 0..d_r {
            let mut col = y.column_mut(u);
            for i in 0..d_a {
                col.axpy(self.psi[i], &v.column(i * d_r + u), C64::new(1.0, 0.0));
            }
        }
        y
    }

    /// `Y ρ_R`.
    fn times_rho_r(&self, y: &DMatrix<C64>) -> DMatrix<C64> {
        if self.rho_r_diagonal {
            let mut g = y.clone();
            for (u, mut col) in g.column_iter_mut().enumerate() {
                col *= self.rho_r.matrix()[(u, u)];
            }
            g
        } else {
            y * self.rho_r.matrix()
        }
    }

    fn noise_scale(&self) -> f64 {
        self.v0.max_abs().powi(2).max(1.0)
    }
}

/// `s = 1 - tr ρ²` for a Hermitian `ρ`.
pub fn linear_entropy(rho: &QOperator) -> f64 {
    let purity: f64 = rho.matrix().iter().map(|z| z.norm_sqr()).sum();
    (1.0 - purity).max(0.0)
}

/// First and second derivatives of the reduced state of `a` at `t = 0`.
pub fn reduced_derivatives(ic: &InitialCondition) -> (DMatrix<C64>, DMatrix<C64>) {
    let (d_a, d_r) = (ic.dim_a(), ic.rho_r.dim());
    let v = ic.v0.matrix();
    let y = ic.v_on_psi();
    let g_mat = ic.times_rho_r(&y);
    let psi = &ic.psi;

    // tr_R(V ρ0) = g ψ†
    let g = DVector::from_fn(d_a, |k, _| (0..d_r).map(|t| g_mat[(k * d_r + t, t)]).sum::<C64>());
    // tr_R(V² ρ0) = h ψ†
    let h = DVector::from_fn(d_a, |k, _| {
        (0..d_r).map(|t| v.row(k * d_r + t).transpose().dot(&g_mat.column(t))).sum::<C64>()
    });
    // tr_R(V ρ0 V)
    let vrv = DMatrix::from_fn(d_a, d_a, |k, j| {
        let mut acc = C64::new(0.0, 0.0);
        for t in 0..d_r {
            acc += y.row(k * d_r + t).dot(&g_mat.row(j * d_r + t).map(|z| z.conj()));
        }
        acc
    });
    let minus_i = C64::new(0.0, -1.0);
    let rho_dot = (&g * psi.adjoint() - psi * g.adjoint()) * minus_i;
    let rho_ddot = -(&h * psi.adjoint() - vrv * C64::new(2.0, 0.0) + psi * h.adjoint());
    (rho_dot, rho_ddot)
}

fn clamp_s2(raw: f64, ic: &InitialCondition) -> Result<f64> {
    let scale = ic.noise_scale();
    if raw.abs() <= 1e-14 * scale {
        return Ok(0.0);
    }
    if raw < 0.0 {
        if raw >= -S2_NOISE * scale {
            return Ok(0.0);
        }
        return Err(EntropyError::InternalConsistency(format!("s2 = {raw:.6e} is negative beyond noise")));
    }
    Ok(raw)
}

/// `s''(0) = -2 tr(ρ̇_a² + ρ_a ρ̈_a)` from the reduced-state derivatives.
pub fn s2_direct(ic: &InitialCondition) -> Result<f64> {
    let (rho_dot, rho_ddot) = reduced_derivatives(ic);
    let p = ic.psi() * ic.psi().adjoint();
    let raw = -2.0 * ((&rho_dot * &rho_dot).trace() + (p * rho_ddot).trace()).re;
    clamp_s2(raw, ic)
}

/// `s''(0)` from the R-averaged correlation of `V` and `[V, P]`.
pub fn s2_eq3(ic: &InitialCondition) -> Result<f64> {
    let (d_a, d_r) = (ic.dim_a(), ic.rho_r.dim());
    let d = d_a * d_r;
    let v = ic.v0.matrix();
    let rho_r = ic.rho_r.matrix();
    let psi = ic.psi();
    let p = psi * psi.adjoint();
    let idx = |k: usize, t: usize| k * d_r + t;

    // Ψ = ψ ⊗ I_R and ΠΨ with Π = P ⊗ I_R.
    let big_psi = DMatrix::from_fn(d, d_r, |row, t| if row % d_r == t { psi[row / d_r] } else { C64::new(0.0, 0.0) });
    let pi_apply = |m: &DMatrix<C64>| -> DMatrix<C64> {
        DMatrix::from_fn(d, m.ncols(), |row, c| {
            let (k, u) = (row / d_r, row % d_r);
            (0..d_a).map(|i| p[(k, i)] * m[(idx(i, u), c)]).sum()
        })
    };
    // [V, Π] Ψ; both Ψ and ΠΨ have d_a nonzeros per column.
    let comm_psi = mul_sparse_rhs(v, &pi_apply(&big_psi)) - pi_apply(&mul_sparse_rhs(v, &big_psi));

    // ⟨ψ| tr_R((I ⊗ ρ_R) V [V, Π]) |ψ⟩ = Σ_k ψ̄_k Σ_{t,u} ρ_R[t,u] (V [V, Π] Ψ)[(k,u), t]
    //                                 = Σ_k ψ̄_k Σ_u V[(k,u), :] · ([V, Π] Ψ ρ_R)[:, u]
    let folded = ic.times_rho_r(&comm_psi);
    let mut first = C64::new(0.0, 0.0);
    for k in 0..d_a {
        let acc: C64 = (0..d_r).map(|u| v.row(idx(k, u)).transpose().dot(&folded.column(u))).sum();
        first += psi[k].conj() * acc;
    }

    // ⟨V⟩_R and ⟨[V, Π]⟩_R as d_a × d_a operators.
    let r_avg = |entry: &dyn Fn(usize, usize, usize, usize) -> C64| -> DMatrix<C64> {
        DMatrix::from_fn(d_a, d_a, |k, j| {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..d_r {
                for u in 0..d_r {
                    let w = rho_r[(t, u)];
                    if w != C64::new(0.0, 0.0) {
                        acc += w * entry(k, u, j, t);
                    }
                }
            }
            acc
        })
    };
    let v_avg = r_avg(&|k, u, j, t| v[(idx(k, u), idx(j, t))]);
    let comm_avg = r_avg(&|k, u, j, t| {
        (0..d_a).map(|i| v[(idx(k, u), idx(i, t))] * p[(i, j)] - p[(k, i)] * v[(idx(i, u), idx(j, t))]).sum()
    });
    let second = (psi.adjoint() * v_avg * comm_avg * psi)[(0, 0)];
    clamp_s2(4.0 * (first - second).re, ic)
}

/// `A B` skipping the zero entries of `B`.
fn mul_sparse_rhs(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let zero = C64::new(0.0, 0.0);
    let mut out = DMatrix::<C64>::zeros(a.nrows(), b.ncols());
    for c in 0..b.ncols() {
        let mut col = out.column_mut(c);
        for k in 0..b.nrows() {
            let w = b[(k, c)];
            if w != zero {
                col.axpy(w, &a.column(k), C64::new(1.0, 0.0));
            }
        }
    }
    out
}

/// Decoherence time, or the sentinel for states that do not decohere at second order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Td {
    Finite(f64),
    Unbounded,
}

impl Td {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Td::Finite(t) => Some(t),
            Td::Unbounded => None,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, Td::Unbounded)
    }
}

impl fmt::Display for Td {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Td::Finite(t) => write!(f, "{t:.16e}"),
            Td::Unbounded => f.write_str("UNBOUNDED"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TdRepr {
    Finite(f64),
    Sentinel(String),
}

impl Serialize for Td {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Td::Finite(t) => TdRepr::Finite(t),
            Td::Unbounded => TdRepr::Sentinel("UNBOUNDED".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Td {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match TdRepr::deserialize(d)? {
            TdRepr::Finite(t) => Ok(Td::Finite(t)),
            TdRepr::Sentinel(s) if s == "UNBOUNDED" => Ok(Td::Unbounded),
            TdRepr::Sentinel(s) => Err(serde::de::Error::custom(format!("unknown td sentinel {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdResult {
    pub s2: f64,
    pub td: Td,
    pub commuting: bool,
}

/// `t_d = 1/√s2`, or unbounded when `s2` is at the floor.
pub fn td_from_s2(s2: f64) -> Result<TdResult> {
    if s2.is_nan() || s2 < -S2_NOISE {
        return Err(EntropyError::InternalConsistency(format!("s2 = {s2} is negative")));
    }
    let s2 = s2.max(0.0);
    if s2 <= S2_FLOOR {
        return Ok(TdResult { s2, td: Td::Unbounded, commuting: true });
    }
    Ok(TdResult { s2, td: Td::Finite(1.0 / s2.sqrt()), commuting: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdEstimate {
    pub value: f64,
    /// Difference between the extrapolated and the finest plain estimate.
    pub error: f64,
}

/// Acceptance band for the finite-difference error indicator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdTolerance {
    pub abs: f64,
    pub rel: f64,
}

impl FdTolerance {
    pub fn bound(&self, value: f64) -> f64 {
        self.abs + self.rel * value.abs()
    }
}

/// Finite-difference weights for derivatives up to `max_order` at `x0`
/// (Fornberg's recursion). `w[k][j]` multiplies `f(nodes[j])` for the k-th derivative.
pub fn fornberg_weights(x0: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Estimate `s^{(n)}(0)` from samples on a uniform grid starting at zero.
///
/// One-sided second-order stencils on `n + 2` points at steps `h` and `2h`,
/// combined by one Richardson step. Needs `2n + 3` samples.
pub fn fd_derivative_samples(values: &[f64], step: f64, order: usize) -> Result<FdEstimate> {
    if !(1..=4).contains(&order) {
        return Err(EntropyError::Usage(format!("derivative order {order} not in 1..=4")));
    }
    let needed = 2 * order + 3;
    if values.len() < needed {
        return Err(EntropyError::Usage(format!(
            "order-{order} estimate needs {needed} samples, series has {}",
            values.len()
        )));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(EntropyError::Usage(format!("grid step {step} must be positive")));
    }
    let points = order + 2;
    let nodes: Vec<f64> = (0..points).map(|j| j as f64).collect();
    let w = &fornberg_weights(0.0, &nodes, order)[order];
    let plain = |stride: usize| -> f64 {
        let h = step * stride as f64;
        w.iter().enumerate().map(|(j, wj)| wj * values[j * stride]).sum::<f64>() / h.powi(order as i32)
    };
    let fine = plain(1);
    let coarse = plain(2);
    let value = (4.0 * fine - coarse) / 3.0;
    Ok(FdEstimate { value, error: (value - fine).abs() })
}

/// [`fd_derivative_samples`] on a series, failing when the error indicator
/// exceeds `tol`.
pub fn fd_derivative(series: &EntropySeries, order: usize, tol: FdTolerance) -> Result<FdEstimate> {
    series.check_uniform()?;
    let est = fd_derivative_samples(&series.values, series.step(), order)?;
    let tolerance = tol.bound(est.value);
    if !(est.error <= tolerance) {
        return Err(EntropyError::Precision { order, estimate: est.value, indicator: est.error, tolerance });
    }
    Ok(est)
}
