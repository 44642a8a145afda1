//! Exact propagation of the composite state and the entropy series it induces.
//!
//! The generator is diagonalized once. The initial state is carried as a
//! low-rank factor `W` (`ρ0 = W W†`), so each sample costs one `d x d` by
//! `d x r` product instead of a full `d³` conjugation.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::entropy::{linear_entropy, EntropyError, InitialCondition};
use crate::linalg::{partial_trace_factored, HermitianEigen, LinalgError, QOperator};

pub const MIN_STEPS: usize = 16;
pub const DEFAULT_EPS_S: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolutionError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

pub type Result<T> = std::result::Result<T, EvolutionError>;

/// Bookkeeping carried from the model into the series metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeriesContext {
    pub model_hash: String,
    pub truncations: Vec<usize>,
    /// Layout factors holding truncated boson modes.
    pub boson_factors: Vec<usize>,
    /// Largest truncation leakage of the constructed initial states.
    pub state_leakage: f64,
    pub leak_tol: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub model_hash: String,
    pub truncations: Vec<usize>,
    pub step: f64,
    pub state_leakage: f64,
    /// Largest population seen on the top two Fock levels of any mode.
    pub evolution_leakage: f64,
    /// Largest change of the composite `tr ρ²` from its initial value.
    pub purity_drift: f64,
    pub flagged: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: SeriesMeta,
}

impl EntropySeries {
    pub fn step(&self) -> f64 {
        self.meta.step
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Fails unless the grid starts at zero and is uniform with the recorded step.
    pub fn check_uniform(&self) -> std::result::Result<(), EntropyError> {
        if self.times.len() != self.values.len() {
            return Err(EntropyError::Usage(format!(
                "series has {} times but {} values",
                self.times.len(),
                self.values.len()
            )));
        }
        if self.times.first() != Some(&0.0) {
            return Err(EntropyError::Usage("series grid must start at t = 0".into()));
        }
        let h = self.step();
        let span = self.times.last().copied().unwrap_or(0.0).abs().max(h);
        for (k, &t) in self.times.iter().enumerate() {
            if (t - k as f64 * h).abs() > 1e-9 * span {
                return Err(EntropyError::Usage(format!("series grid is not uniform at sample {k}")));
            }
        }
        Ok(())
    }
}

/// Sample `s(t)` on `steps + 1` uniform points of `[0, t_max]` under the
/// time-independent `generator`.
pub fn run_entropy_series(
    generator: &QOperator,
    ic: &InitialCondition,
    t_max: f64,
    steps: usize,
    ctx: &SeriesContext,
) -> Result<EntropySeries> {
    if steps < MIN_STEPS {
        return Err(EvolutionError::Usage(format!("steps = {steps}, need at least {MIN_STEPS}")));
    }
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(EvolutionError::Usage(format!("t_max = {t_max} must be positive")));
    }
    let layout = ic.layout();
    if generator.layout() != layout {
        return Err(LinalgError::LayoutMismatch { left: generator.layout().dims().to_vec(), right: layout.dims().to_vec() }
            .into());
    }
    for &f in &ctx.boson_factors {
        if f >= layout.factors() {
            return Err(EvolutionError::Usage(format!("boson factor {f} outside the layout")));
        }
    }

    let eig = HermitianEigen::new(generator)?;
    let q = eig.vectors();
    let ensemble = ic.ensemble();
    let purity0: f64 = (ensemble.adjoint() * &ensemble).iter().map(|z| z.norm_sqr()).sum();
    let coeffs = q.adjoint() * ensemble;
    let d = layout.total();

    // Rows whose digit on a monitored factor sits on its top two levels.
    let monitors: Vec<Vec<usize>> = ctx
        .boson_factors
        .iter()
        .filter(|&&f| layout.dims()[f] >= 3)
        .map(|&f| {
            let top = layout.dims()[f] - 2;
            (0..d).filter(|&row| layout.digit(row, f) >= top).collect()
        })
        .collect();

    let step = t_max / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    let (mut leak_max, mut drift_max) = (0.0f64, 0.0f64);
    let mut phased = coeffs.clone();
    for k in 0..=steps {
        let t = k as f64 * t_max / steps as f64;
        for (row, lambda) in eig.values().iter().enumerate() {
            let phase = C64::from_polar(1.0, -lambda * t);
            for s in 0..coeffs.ncols() {
                phased[(row, s)] = coeffs[(row, s)] * phase;
            }
        }
        let m: DMatrix<C64> = q * &phased;
        let rho_a = partial_trace_factored(layout, &m, &m, &[0])?;
        times.push(t);
        values.push(linear_entropy(&rho_a).min(1.0));

        let gram = m.adjoint() * &m;
        let purity: f64 = gram.iter().map(|z| z.norm_sqr()).sum();
        drift_max = drift_max.max((purity - purity0).abs());
        if !monitors.is_empty() {
            let weight: Vec<f64> = m.row_iter().map(|r| r.iter().map(|z| z.norm_sqr()).sum()).collect();
            for rows in &monitors {
                leak_max = leak_max.max(rows.iter().map(|&r| weight[r]).sum());
            }
        }
    }

    let mut warnings = ctx.warnings.clone();
    let flagged = leak_max > ctx.leak_tol;
    if flagged {
        warnings.push(format!(
            "top-level population reached {leak_max:.3e} (> {:.1e}); increase the truncation",
            ctx.leak_tol
        ));
    }
    Ok(EntropySeries {
        times,
        values,
        meta: SeriesMeta {
            model_hash: ctx.model_hash.clone(),
            truncations: ctx.truncations.clone(),
            step,
            state_leakage: ctx.state_leakage,
            evolution_leakage: leak_max,
            purity_drift: drift_max,
            flagged,
            warnings,
        },
    })
}

/// First time the series reaches the threshold, or the sentinel when it never does.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Crossing {
    At(f64),
    NotReached,
}

impl Crossing {
    pub fn time(&self) -> Option<f64> {
        match *self {
            Crossing::At(t) => Some(t),
            Crossing::NotReached => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CrossingRepr {
    At(f64),
    Sentinel(String),
}

impl Serialize for Crossing {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Crossing::At(t) => CrossingRepr::At(t),
            Crossing::NotReached => CrossingRepr::Sentinel("NOT_REACHED".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Crossing {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match CrossingRepr::deserialize(d)? {
            CrossingRepr::At(t) => Ok(Crossing::At(t)),
            CrossingRepr::Sentinel(s) if s == "NOT_REACHED" => Ok(Crossing::NotReached),
            CrossingRepr::Sentinel(s) => Err(serde::de::Error::custom(format!("unknown crossing sentinel {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdEstimate {
    pub eps_s: f64,
    pub crossing: Crossing,
    pub warnings: Vec<String>,
}

/// Linearly interpolated first crossing of `s(t) = eps_s`.
pub fn estimate_td(series: &EntropySeries, eps_s: f64) -> Result<TdEstimate> {
    if !(eps_s > 0.0 && eps_s <= 0.5) {
        return Err(EvolutionError::Usage(format!("eps_s = {eps_s} outside (0, 0.5]")));
    }
    if series.times.len() != series.values.len() || series.times.is_empty() {
        return Err(EvolutionError::Usage("series is empty or ragged".into()));
    }
    let v = &series.values;
    let first = v.iter().position(|&s| s >= eps_s);
    let crossing = match first {
        None => Crossing::NotReached,
        Some(0) => Crossing::At(series.times[0]),
        Some(k) => {
            let (t0, t1) = (series.times[k - 1], series.times[k]);
            let frac = (eps_s - v[k - 1]) / (v[k] - v[k - 1]);
            Crossing::At(t0 + frac * (t1 - t0))
        }
    };

    let window = &v[..first.unwrap_or(v.len())];
    let mut peak = f64::NEG_INFINITY;
    let mut dip = 0.0f64;
    for &s in window {
        peak = peak.max(s);
        dip = dip.max(peak - s);
    }
    let mut warnings = Vec::new();
    if dip > eps_s / 10.0 {
        warnings.push(format!(
            "series drops by {dip:.3e} before the crossing (> eps_s/10); the crossing time is not a clean onset"
        ));
    }
    Ok(TdEstimate { eps_s, crossing, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{fd_derivative, s2_direct, FdTolerance};
    use crate::linalg::SpaceLayout;
    use crate::states::{ladder_ops, make_boson, make_qubit, pauli_ops, BosonStateSpec, QubitStateSpec};

    fn synthetic(values: Vec<f64>, step: f64) -> EntropySeries {
        EntropySeries {
            times: (0..values.len()).map(|k| k as f64 * step).collect(),
            values,
            meta: SeriesMeta {
                model_hash: String::new(),
                truncations: vec![],
                step,
                state_leakage: 0.0,
                evolution_leakage: 0.0,
                purity_drift: 0.0,
                flagged: false,
                warnings: vec![],
            },
        }
    }

    fn dephasing(qubit: QubitStateSpec, boson: BosonStateSpec, g: f64) -> (QOperator, InitialCondition, SeriesContext) {
        let n = boson.truncation;
        let layout = SpaceLayout::new(vec![2, n]).unwrap();
        let v = QOperator::new(layout, pauli_ops().z.kronecker(&ladder_ops(n).x) * C64::new(g, 0.0)).unwrap();
        let b = make_boson(&boson).unwrap();
        let ic = InitialCondition::new(make_qubit(&qubit).unwrap(), b.rho, v.clone()).unwrap();
        let ctx = SeriesContext { truncations: vec![n], boson_factors: vec![1], leak_tol: 1e-6, ..Default::default() };
        (v, ic, ctx)
    }

    #[test]
    fn crossing_of_parabola() {
        let s = synthetic((0..60).map(|k| (k as f64 * 0.01).powi(2)).collect(), 0.01);
        let est = estimate_td(&s, 0.04).unwrap();
        assert!((est.crossing.time().unwrap() - 0.2).abs() < 1e-12);
        assert!(est.warnings.is_empty());
    }

    #[test]
    fn zero_series_never_crosses() {
        let s = synthetic(vec![0.0; 40], 0.1);
        assert_eq!(estimate_td(&s, 0.05).unwrap().crossing, Crossing::NotReached);
        assert!(estimate_td(&s, 0.0).is_err());
        assert!(estimate_td(&s, 0.6).is_err());
    }

    #[test]
    fn noisy_onset_is_flagged() {
        let mut v: Vec<f64> = (0..40).map(|k| 0.001 * k as f64).collect();
        v[10] = 0.03;
        v[11] = 0.01;
        let est = estimate_td(&synthetic(v, 0.1), 0.035).unwrap();
        assert_eq!(est.warnings.len(), 1);
    }

    #[test]
    fn crossing_sentinel_round_trips() {
        assert_eq!(serde_json::to_string(&Crossing::NotReached).unwrap(), "\"NOT_REACHED\"");
        let c: Crossing = serde_json::from_str("0.25").unwrap();
        assert_eq!(c, Crossing::At(0.25));
    }

    #[test]
    fn fock_curvature_matches_s2() {
        let (v, ic, ctx) = dephasing(QubitStateSpec::plus(), BosonStateSpec::fock(3, 20), 1.0);
        let series = run_entropy_series(&v, &ic, 0.02, 20, &ctx).unwrap();
        let est = fd_derivative(&series, 2, FdTolerance { abs: 1e-6, rel: 1e-3 }).unwrap();
        let exact = s2_direct(&ic).unwrap();
        assert!((est.value - exact).abs() < 0.01 * exact);
        assert!(series.meta.purity_drift < 1e-9);
        assert!(!series.meta.flagged);
    }

    #[test]
    fn zero_coupling_series_is_zero() {
        let (v, ic, ctx) = dephasing(QubitStateSpec::plus(), BosonStateSpec::fock(3, 10), 0.0);
        let series = run_entropy_series(&v, &ic, 2.0, 32, &ctx).unwrap();
        assert!(series.values.iter().all(|&s| s.abs() < 1e-14));
    }

    #[test]
    fn grid_halving_reproduces_samples() {
        let (v, ic, ctx) = dephasing(QubitStateSpec::new(1.0, 0.4), BosonStateSpec::thermal(0.5, 16), 0.5);
        let coarse = run_entropy_series(&v, &ic, 1.0, 16, &ctx).unwrap();
        let fine = run_entropy_series(&v, &ic, 1.0, 32, &ctx).unwrap();
        for (k, s) in coarse.values.iter().enumerate() {
            assert_eq!(coarse.times[k], fine.times[2 * k]);
            assert!((s - fine.values[2 * k]).abs() < 1e-10);
        }
    }

    #[test]
    fn leakage_flags_short_truncation() {
        let (v, ic, ctx) = dephasing(QubitStateSpec::plus(), BosonStateSpec::fock(3, 6), 1.0);
        let series = run_entropy_series(&v, &ic, 2.0, 16, &ctx).unwrap();
        assert!(series.meta.flagged);
        assert!(!series.meta.warnings.is_empty());
    }

    #[test]
    fn rejects_bad_grid() {
        let (v, ic, ctx) = dephasing(QubitStateSpec::plus(), BosonStateSpec::fock(0, 4), 1.0);
        assert!(run_entropy_series(&v, &ic, 1.0, 8, &ctx).is_err());
        assert!(run_entropy_series(&v, &ic, -1.0, 16, &ctx).is_err());
    }
}
