use decoq_core::entropy::{fd_derivative_samples, FdEstimate};
use decoq_core::evolution::{estimate_td, run_entropy_series, TdEstimate, MIN_STEPS};
use decoq_core::models::{td_spin_boson_limit, PureDephasingSpec, Regime};
use decoq_core::{
    fd_derivative, s2_direct, s2_eq3, BosonStateSpec, EntropyError, EntropySeries, FdTolerance, ModelSpec,
    QubitStateSpec,
};
use rayon::prelude::*;

use crate::config::{model_hash, ExperimentConfig, RunConfig};
use crate::report::{
    loglog_slope, Differences, Limits, SeriesReport, Slopes, SweepReport, SweepRow, TdReport, ValidateReport, Verdict,
};
use crate::CliError;

/// Agreement required between the three `s2` routes.
pub const VALIDATE_TOL: f64 = 0.01;
/// The finite-difference error indicator may use half of [`VALIDATE_TOL`].
pub const VALIDATE_FD_TOL: FdTolerance = FdTolerance { abs: 1e-8, rel: 0.5 * VALIDATE_TOL };
/// Values below this are treated as zero when comparing routes.
const ZERO_FLOOR: f64 = 1e-8;

fn limits(model: &ModelSpec) -> Result<Option<Limits>, CliError> {
    match model {
        ModelSpec::SpinBoson(s) if s.temperature.is_some() => Ok(Some(Limits {
            strong: td_spin_boson_limit(s, Regime::Strong)?,
            weak: td_spin_boson_limit(s, Regime::Weak)?,
        })),
        _ => Ok(None),
    }
}

pub fn cmd_td(cfg: &ExperimentConfig) -> Result<TdReport, CliError> {
    let closed_form = cfg.model.td(cfg.run.leak_tol)?;
    let limits = limits(&cfg.model)?;
    let mut warnings = cfg.model.warnings();
    if let Some(l) = &limits {
        for (name, lim) in [("strong", &l.strong), ("weak", &l.weak)] {
            if !lim.regime_valid {
                warnings.push(format!("{name}-field limit formula is outside its regime for this spec"));
            }
        }
    }
    Ok(TdReport {
        model: cfg.model.name().into(),
        model_hash: cfg.model_hash(),
        closed_form,
        limits,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub series: EntropySeries,
    pub estimate: TdEstimate,
}

impl Simulation {
    pub fn report(&self, model: &ModelSpec) -> SeriesReport {
        SeriesReport { model: model.name().into(), estimate: self.estimate.clone(), series: self.series.clone() }
    }

    /// A run whose state crept onto the top Fock levels is a truncation failure.
    pub fn check_truncation(&self) -> Result<(), CliError> {
        if self.series.meta.flagged {
            return Err(CliError::Capacity(format!(
                "evolution leakage {:.3e} with truncations {:?}; raise the truncation of the flagged modes",
                self.series.meta.evolution_leakage, self.series.meta.truncations
            )));
        }
        Ok(())
    }
}

fn simulate_model(model: &ModelSpec, run: &RunConfig) -> Result<EntropySeries, CliError> {
    let built = model.build(run.leak_tol)?;
    let ctx = built.series_context(model_hash(model), run.leak_tol);
    Ok(run_entropy_series(&built.generator, &built.ic, run.t_max, run.steps, &ctx)?)
}

pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Simulation, CliError> {
    let series = simulate_model(&cfg.model, &cfg.run)?;
    let estimate = estimate_td(&series, cfg.run.eps_s)?;
    Ok(Simulation { series, estimate })
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale <= ZERO_FLOOR {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Compare `s2` from the direct contraction, the correlation route and the
/// curvature of the simulated series on the configured grid.
pub fn cmd_validate(cfg: &ExperimentConfig) -> Result<ValidateReport, CliError> {
    let built = cfg.model.build(cfg.run.leak_tol)?;
    let direct = s2_direct(&built.ic)?;
    let eq3 = s2_eq3(&built.ic)?;

    // Only the first few samples enter the stencils; keep the configured step.
    let step = cfg.run.t_max / cfg.run.steps as f64;
    let ctx = built.series_context(cfg.model_hash(), cfg.run.leak_tol);
    let head = run_entropy_series(&built.generator, &built.ic, step * MIN_STEPS as f64, MIN_STEPS, &ctx)?;

    let mut advice = Vec::new();
    let fd2 = match fd_derivative(&head, 2, VALIDATE_FD_TOL) {
        Ok(est) => Some(est),
        Err(e @ EntropyError::Precision { .. }) => {
            advice.push(e.to_string());
            None
        }
        Err(e) => return Err(e.into()),
    };
    let fd3: Option<FdEstimate> = fd_derivative_samples(&head.values, head.step(), 3).ok();

    let differences = Differences {
        direct_eq3: rel_diff(direct, eq3),
        direct_fd: fd2.map(|f| rel_diff(direct, f.value)),
        eq3_fd: fd2.map(|f| rel_diff(eq3, f.value)),
    };
    let worst = [Some(differences.direct_eq3), differences.direct_fd, differences.eq3_fd]
        .into_iter()
        .flatten()
        .fold(0.0, f64::max);
    if worst > VALIDATE_TOL {
        advice.push(format!("routes disagree by {worst:.3e} (> {VALIDATE_TOL})"));
    }
    let verdict = if fd2.is_some() && worst <= VALIDATE_TOL { Verdict::Pass } else { Verdict::Fail };
    Ok(ValidateReport {
        model: cfg.model.name().into(),
        model_hash: cfg.model_hash(),
        step,
        s2_direct: direct,
        s2_eq3: eq3,
        fd_order2: fd2,
        fd_order3: fd3,
        relative_differences: differences,
        tolerance: VALIDATE_TOL,
        verdict,
        advice,
    })
}

pub const FIG1_G: f64 = 1.0;
pub const FIG1_TRUNCATION: usize = 120;
pub const FIG1_T_MAX: f64 = 2.0;
pub const FIG1_STEPS: usize = 400;

/// Mean boson number shared by the three curves.
const FIG1_MEAN_N: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Curve {
    pub name: &'static str,
    pub model: ModelSpec,
    pub simulation: Simulation,
}

pub fn fig1_models() -> Vec<(&'static str, ModelSpec)> {
    let n = FIG1_TRUNCATION;
    let squeeze = FIG1_MEAN_N.sqrt().asinh();
    [
        ("fock", BosonStateSpec::fock(FIG1_MEAN_N as usize, n)),
        ("thermal", BosonStateSpec::thermal(FIG1_MEAN_N, n)),
        ("squeezed", BosonStateSpec::squeezed_vacuum(squeeze, n)),
    ]
    .into_iter()
    .map(|(name, boson)| {
        let spec = PureDephasingSpec { g: FIG1_G, qubit: QubitStateSpec::plus(), boson };
        (name, ModelSpec::PureDephasing(spec))
    })
    .collect()
}

/// Fock, thermal and squeezed-vacuum dephasing curves on one grid.
pub fn cmd_fig1() -> Result<Vec<Fig1Curve>, CliError> {
    let run = RunConfig { t_max: FIG1_T_MAX, steps: FIG1_STEPS, ..RunConfig::default() };
    fig1_models()
        .into_iter()
        .map(|(name, model)| {
            let series = simulate_model(&model, &run)?;
            let estimate = estimate_td(&series, run.eps_s)?;
            Ok(Fig1Curve { name, model, simulation: Simulation { series, estimate } })
        })
        .collect()
}

fn sweep_row(parameter: f64, model: &ModelSpec, leak_tol: f64) -> Result<SweepRow, CliError> {
    let full = model.td(leak_tol)?;
    let limits = limits(model)?;
    Ok(SweepRow {
        parameter,
        model_hash: model_hash(model),
        td_full: full.td,
        td_strong: limits.as_ref().map(|l| l.strong.result.td),
        td_weak: limits.as_ref().map(|l| l.weak.result.td),
        s2: full.s2,
    })
}

/// Closed forms across the sweep values on a pool of `workers` threads
/// (all logical cores when `None`). Rows come back in sweep order.
pub fn cmd_sweep(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<SweepReport, CliError> {
    let models = cfg.sweep_models()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(format!("worker pool: {e}")))?;
    let leak_tol = cfg.run.leak_tol;
    let rows: Vec<SweepRow> =
        pool.install(|| models.par_iter().map(|(x, m)| sweep_row(*x, m, leak_tol)).collect::<Result<_, _>>())?;

    let column = |f: fn(&SweepRow) -> Option<f64>| -> Option<f64> {
        let pts: Vec<(f64, Option<f64>)> = rows.iter().map(|r| (r.parameter, f(r))).collect();
        loglog_slope(&pts)
    };
    let slopes = Slopes {
        td_full: column(|r| r.td_full.value()),
        td_strong: column(|r| r.td_strong.and_then(|t| t.value())),
        td_weak: column(|r| r.td_weak.and_then(|t| t.value())),
    };
    let mut warnings = Vec::new();
    for (x, m) in &models {
        warnings.extend(m.warnings().into_iter().map(|w| format!("at {x}: {w}")));
    }
    Ok(SweepReport {
        model: cfg.model.name().into(),
        parameter: cfg.sweep.as_ref().map(|s| s.parameter.clone()).unwrap_or_default(),
        rows,
        slopes,
        warnings,
    })
}
