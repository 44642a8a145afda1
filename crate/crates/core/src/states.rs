//! Spin-1/2 and single-mode bosonic states and operators.
//!
//! Qubit basis order: index 0 is the upper level |1⟩, index 1 the lower level
//! |0⟩, so `σz = diag(+1, -1)`, `σ+ = |1⟩⟨0|` and ⟨σz⟩ = cos θ for the Bloch
//! state `cos(θ/2)|1⟩ + e^{iφ} sin(θ/2)|0⟩`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, QOperator, SpaceLayout};

/// Default tolerance on the population lost by Fock-space truncation.
pub const DEFAULT_LEAK_TOL: f64 = 1e-6;
/// Search bound when looking for a truncation that satisfies the leak tolerance.
const MAX_SUGGESTED_TRUNCATION: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("invalid state spec: {0}")]
    InvalidSpec(String),
    #[error("truncation N={truncation} leaks {leakage:.3e} of the population (tolerance {tolerance:.1e}); use N >= {required}")]
    Truncation { truncation: usize, leakage: f64, tolerance: f64, required: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, StateError>;

/// Bloch-sphere angles of a pure qubit state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitStateSpec {
    pub theta: f64,
    #[serde(default)]
    pub phi: f64,
}

impl QubitStateSpec {
    pub fn new(theta: f64, phi: f64) -> Self {
        QubitStateSpec { theta, phi }
    }

    /// |+⟩, the +1 eigenstate of σx.
    pub fn plus() -> Self {
        QubitStateSpec { theta: PI / 2.0, phi: 0.0 }
    }

    /// The upper level |1⟩.
    pub fn upper() -> Self {
        QubitStateSpec { theta: 0.0, phi: 0.0 }
    }

    /// The antipodal Bloch point.
    pub fn orthogonal(&self) -> Self {
        QubitStateSpec { theta: PI - self.theta, phi: (self.phi + PI).rem_euclid(TAU) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=PI).contains(&self.theta) {
            return Err(StateError::InvalidSpec(format!("theta = {} outside [0, π]", self.theta)));
        }
        if !(0.0..TAU).contains(&self.phi) {
            return Err(StateError::InvalidSpec(format!("phi = {} outside [0, 2π)", self.phi)));
        }
        Ok(())
    }

    pub fn sigma_z_expectation(&self) -> f64 {
        self.theta.cos()
    }
}

pub fn make_qubit(spec: &QubitStateSpec) -> Result<DVector<C64>> {
    spec.validate()?;
    let (s, c) = (spec.theta / 2.0).sin_cos();
    Ok(DVector::from_vec(vec![C64::new(c, 0.0), C64::from_polar(s, spec.phi)]))
}

/// Pauli operators in the |1⟩, |0⟩ basis.
#[derive(Debug, Clone)]
pub struct Pauli {
    pub z: DMatrix<C64>,
    pub plus: DMatrix<C64>,
    pub minus: DMatrix<C64>,
    pub x: DMatrix<C64>,
    pub y: DMatrix<C64>,
}

pub fn pauli_ops() -> Pauli {
    let (o, l, i) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0));
    Pauli {
        z: DMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
        plus: DMatrix::from_row_slice(2, 2, &[o, l, o, o]),
        minus: DMatrix::from_row_slice(2, 2, &[o, o, l, o]),
        x: DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        y: DMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
    }
}

/// Truncated ladder operators on Fock levels `0..n`.
#[derive(Debug, Clone)]
pub struct Ladder {
    pub b: DMatrix<C64>,
    pub b_dag: DMatrix<C64>,
    /// Quadrature `b + b†`.
    pub x: DMatrix<C64>,
    pub number: DMatrix<C64>,
}

pub fn ladder_ops(n: usize) -> Ladder {
    let b = DMatrix::from_fn(n, n, |i, j| if j == i + 1 { C64::new((j as f64).sqrt(), 0.0) } else { C64::new(0.0, 0.0) });
    let b_dag = b.adjoint();
    let x = &b + &b_dag;
    let number = DMatrix::from_fn(n, n, |i, j| if i == j { C64::new(i as f64, 0.0) } else { C64::new(0.0, 0.0) });
    Ladder { b, b_dag, x, number }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BosonKind {
    Fock { n: usize },
    Thermal { nbar: f64 },
    /// Amplitude as `[re, im]`.
    Coherent { alpha: C64 },
    /// Positive `r` reduces the `b + b†` variance to `e^{-2r}`; negative `r`
    /// squeezes the conjugate quadrature instead.
    SqueezedVacuum { r: f64 },
}

/// Declarative single-mode state with its Fock truncation (levels `0..truncation`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BosonStateSpec {
    #[serde(flatten)]
    pub kind: BosonKind,
    pub truncation: usize,
}

impl BosonStateSpec {
    pub fn fock(n: usize, truncation: usize) -> Self {
        BosonStateSpec { kind: BosonKind::Fock { n }, truncation }
    }

    pub fn thermal(nbar: f64, truncation: usize) -> Self {
        BosonStateSpec { kind: BosonKind::Thermal { nbar }, truncation }
    }

    pub fn coherent(alpha: C64, truncation: usize) -> Self {
        BosonStateSpec { kind: BosonKind::Coherent { alpha }, truncation }
    }

    pub fn squeezed_vacuum(r: f64, truncation: usize) -> Self {
        BosonStateSpec { kind: BosonKind::SqueezedVacuum { r }, truncation }
    }

    pub fn is_pure(&self) -> bool {
        !matches!(self.kind, BosonKind::Thermal { nbar } if nbar > 0.0)
    }

    /// Mean boson number of the untruncated state.
    pub fn ideal_mean_number(&self) -> f64 {
        match self.kind {
            BosonKind::Fock { n } => n as f64,
            BosonKind::Thermal { nbar } => nbar,
            BosonKind::Coherent { alpha } => alpha.norm_sqr(),
            BosonKind::SqueezedVacuum { r } => r.sinh().powi(2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.truncation == 0 {
            return Err(StateError::InvalidSpec("truncation must be at least 1".into()));
        }
        match self.kind {
            BosonKind::Fock { .. } => Ok(()),
            BosonKind::Thermal { nbar } if nbar.is_finite() && nbar >= 0.0 => Ok(()),
            BosonKind::Thermal { nbar } => Err(StateError::InvalidSpec(format!("thermal nbar = {nbar} must be finite and >= 0"))),
            BosonKind::Coherent { alpha } if alpha.re.is_finite() && alpha.im.is_finite() => Ok(()),
            BosonKind::Coherent { .. } => Err(StateError::InvalidSpec("coherent amplitude must be finite".into())),
            BosonKind::SqueezedVacuum { r } if r.is_finite() => Ok(()),
            BosonKind::SqueezedVacuum { .. } => Err(StateError::InvalidSpec("squeezing r must be finite".into())),
        }
    }
}

/// Untruncated Fock populations/amplitudes, evaluated level by level.
enum Profile {
    Populations(Vec<f64>),
    Amplitudes(Vec<C64>),
}

fn profile(kind: &BosonKind, levels: usize) -> Profile {
    match *kind {
        BosonKind::Fock { n } => {
            Profile::Amplitudes((0..levels).map(|k| C64::new(if k == n { 1.0 } else { 0.0 }, 0.0)).collect())
        }
        BosonKind::Thermal { nbar } => {
            let x = nbar / (1.0 + nbar);
            let mut p = Vec::with_capacity(levels);
            let mut cur = 1.0 - x;
            for _ in 0..levels {
                p.push(cur);
                cur *= x;
            }
            Profile::Populations(p)
        }
        BosonKind::Coherent { alpha } => {
            let mut c = Vec::with_capacity(levels);
            let mut cur = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
            for k in 0..levels {
                if k > 0 {
                    cur = cur * alpha / (k as f64).sqrt();
                }
                c.push(cur);
            }
            Profile::Amplitudes(c)
        }
        BosonKind::SqueezedVacuum { r } => {
            let t = r.tanh();
            let mut c = vec![C64::new(0.0, 0.0); levels];
            let mut cur = 1.0 / r.cosh().sqrt();
            let mut k = 0;
            while k < levels {
                c[k] = C64::new(cur, 0.0);
                let m = (k / 2 + 1) as f64;
                cur *= -t * ((2.0 * m - 1.0) / (2.0 * m)).sqrt();
                k += 2;
            }
            Profile::Amplitudes(c)
        }
    }
}

fn captured_population(kind: &BosonKind, levels: usize) -> f64 {
    match profile(kind, levels) {
        Profile::Populations(p) => p.iter().sum(),
        Profile::Amplitudes(c) => c.iter().map(|z| z.norm_sqr()).sum(),
    }
}

/// Smallest truncation whose leakage is within `leak_tol`.
pub fn required_truncation(kind: &BosonKind, leak_tol: f64) -> usize {
    if let BosonKind::Fock { n } = kind {
        return n + 1;
    }
    // Leakage is monotone in the truncation; bisect on a doubling bracket.
    let leak = |n: usize| 1.0 - captured_population(kind, n);
    let mut hi = 1;
    while leak(hi) > leak_tol && hi < MAX_SUGGESTED_TRUNCATION {
        hi *= 2;
    }
    let mut lo = hi / 2;
    while lo + 1 < hi {
        let mid = (lo + hi) / 2;
        if leak(mid) > leak_tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi.max(1)
}

/// A constructed single-mode state on `truncation` Fock levels.
#[derive(Debug, Clone)]
pub struct BosonState {
    pub rho: QOperator,
    /// State vector when the state is pure.
    pub vector: Option<DVector<C64>>,
    /// Population captured by the truncation before renormalization.
    pub captured: f64,
}

impl BosonState {
    pub fn leakage(&self) -> f64 {
        (1.0 - self.captured).max(0.0)
    }

    /// Factor the state was multiplied by to restore unit trace.
    pub fn renormalization(&self) -> f64 {
        1.0 / self.captured
    }

    pub fn mean_number(&self) -> f64 {
        let n = self.rho.dim();
        (0..n).map(|k| k as f64 * self.rho.matrix()[(k, k)].re).sum()
    }
}

pub fn make_boson(spec: &BosonStateSpec) -> Result<BosonState> {
    make_boson_with_tol(spec, DEFAULT_LEAK_TOL)
}

pub fn make_boson_with_tol(spec: &BosonStateSpec, leak_tol: f64) -> Result<BosonState> {
    spec.validate()?;
    let n = spec.truncation;
    if let BosonKind::Fock { n: level } = spec.kind {
        if level >= n {
            return Err(StateError::Truncation { truncation: n, leakage: 1.0, tolerance: leak_tol, required: level + 1 });
        }
    }
    let layout = SpaceLayout::single(n)?;
    let (rho, vector, captured) = match profile(&spec.kind, n) {
        Profile::Populations(p) => {
            let captured: f64 = p.iter().sum();
            let diag = DVector::from_iterator(n, p.iter().map(|&x| C64::new(x / captured, 0.0)));
            (QOperator::new(layout, DMatrix::from_diagonal(&diag))?, None, captured)
        }
        Profile::Amplitudes(c) => {
            let captured: f64 = c.iter().map(|z| z.norm_sqr()).sum();
            let v = DVector::from_vec(c) / C64::new(captured.sqrt(), 0.0);
            (QOperator::projector(&layout, &v)?, Some(v), captured)
        }
    };
    let leakage = 1.0 - captured;
    if leakage > leak_tol {
        return Err(StateError::Truncation {
            truncation: n,
            leakage,
            tolerance: leak_tol,
            required: required_truncation(&spec.kind, leak_tol),
        });
    }
    // Vacuum-like thermal states are pure; expose the vector for them too.
    let vector = vector.or_else(|| {
        (rho.matrix()[(0, 0)].re == 1.0).then(|| DVector::from_fn(n, |k, _| C64::new(if k == 0 { 1.0 } else { 0.0 }, 0.0)))
    });
    Ok(BosonState { rho, vector, captured })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureStats {
    pub mean: f64,
    pub variance: f64,
}

impl QuadratureStats {
    pub fn rms(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Mean and variance of `b + b†`, computed on the truncated space.
pub fn quadrature_stats(rho: &QOperator) -> QuadratureStats {
    rotated_quadrature_stats(rho, 0.0)
}

/// Statistics of `b e^{-iφ} + b† e^{iφ}`; φ = π/2 is the conjugate quadrature.
pub fn rotated_quadrature_stats(rho: &QOperator, phase: f64) -> QuadratureStats {
    let ladder = ladder_ops(rho.dim());
    let e = C64::from_polar(1.0, phase);
    let x = &ladder.b * e.conj() + &ladder.b_dag * e;
    let expect = |op: &DMatrix<C64>| -> f64 { (rho.matrix() * op).trace().re };
    let mean = expect(&x);
    let second = expect(&(&x * &x));
    QuadratureStats { mean, variance: (second - mean * mean).max(0.0) }
}
