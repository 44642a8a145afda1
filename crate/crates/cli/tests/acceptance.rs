//! Acceptance run: one PASS/FAIL line per criterion, with the measured
//! quantities and runtimes. Exits non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use decoq::commands::{cmd_simulate, cmd_sweep, fig1_models, FIG1_STEPS, FIG1_T_MAX};
use decoq::config::{parse_config, ExperimentConfig, OutputConfig, RunConfig};
use decoq_core::entropy::{fd_derivative_samples, s2_direct, s2_eq3, td_from_s2};
use decoq_core::evolution::{estimate_td, run_entropy_series};
use decoq_core::models::{
    b2_expectation, b2_matrix_expectation, lie_transform_residual, td_cavity, td_pure_dephasing, td_spin_boson,
    BathMode, CavityState, CavityThermalSpec, PureDephasingSpec, SpinBosonMode, SpinBosonSpec,
};
use decoq_core::{
    fd_derivative, BosonStateSpec, FdTolerance, InitialCondition, ModelSpec, QOperator, QubitStateSpec, SpaceLayout,
    Td, C64,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<T: std::fmt::Display>(err: T) -> String {
    format!("error: {err}")
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn complex(r: &mut ChaCha8Rng) -> C64 {
    C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
}

fn simulation_config(model: ModelSpec, run: RunConfig) -> ExperimentConfig {
    ExperimentConfig { model, run, sweep: None, output: OutputConfig::default() }
}

fn dephasing(g: f64, qubit: QubitStateSpec, boson: BosonStateSpec) -> ModelSpec {
    ModelSpec::PureDephasing(PureDephasingSpec { g, qubit, boson })
}

/// Curvature of the exactly simulated series against the closed form.
fn criterion_1() -> Check {
    let expected = [28.0, 28.0, 4.0 * (7.0 - 4.0 * 3f64.sqrt())];
    let step = 1e-3;
    let mut parts = Vec::new();
    let mut ok = true;
    for ((name, model), want) in fig1_models().into_iter().zip(expected) {
        let t0 = Instant::now();
        let built = model.build(1e-6).map_err(e)?;
        let series = run_entropy_series(&built.generator, &built.ic, 16.0 * step, 16, &built.series_context("", 1e-6))
            .map_err(e)?;
        let est = fd_derivative(&series, 2, FdTolerance { abs: 1e-10, rel: 1e-3 }).map_err(e)?;
        let took = t0.elapsed();
        let err = rel(est.value, want);
        ok &= err < 0.01 && took < Duration::from_secs(10);
        parts.push(format!("{name} {:.6} vs {want:.6} (rel {err:.1e}, {})", est.value, secs(took)));
    }
    ensure(ok, parts.join("; "))
}

/// Squeezed vs Fock crossing of s = 0.05 on the figure grid.
fn criterion_2() -> Check {
    let t0 = Instant::now();
    let run = RunConfig { t_max: FIG1_T_MAX, steps: FIG1_STEPS, ..RunConfig::default() };
    let crossing = |wanted: &str| -> Result<f64, String> {
        let (_, model) = fig1_models().into_iter().find(|(n, _)| *n == wanted).expect("figure curve");
        let sim = cmd_simulate(&simulation_config(model, run.clone())).map_err(e)?;
        sim.estimate.crossing.time().ok_or_else(|| format!("{wanted} never reaches eps_s"))
    };
    let fock = crossing("fock")?;
    let squeezed = crossing("squeezed")?;
    let ratio = squeezed / fock;
    let took = t0.elapsed();
    ensure(
        rel(ratio, 9.87) <= 0.15 && took < Duration::from_secs(30),
        format!("t_fock {fock:.6}, t_squeezed {squeezed:.6}, ratio {ratio:.4} vs 9.87 ± 15% ({})", secs(took)),
    )
}

fn random_instance(r: &mut ChaCha8Rng) -> Result<InitialCondition, String> {
    let (d_a, d_r) = (r.gen_range(2..=4), r.gen_range(1..=4));
    let psi = DVector::from_fn(d_a, |_, _| complex(r));
    let psi = &psi / C64::new(psi.norm(), 0.0);
    let a = DMatrix::from_fn(d_r, d_r, |_, _| complex(r));
    let rho = &a * a.adjoint();
    let rho = &rho / rho.trace();
    let d = d_a * d_r;
    let h = DMatrix::from_fn(d, d, |_, _| complex(r));
    let v = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let rho_r = QOperator::new(SpaceLayout::single(d_r).map_err(e)?, rho).map_err(e)?;
    let v0 = QOperator::new(SpaceLayout::new(vec![d_a, d_r]).map_err(e)?, v).map_err(e)?;
    InitialCondition::new(psi, rho_r, v0).map_err(e)
}

/// Correlation route against the direct contraction.
fn criterion_3() -> Check {
    let t0 = Instant::now();
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let ic = random_instance(&mut r)?;
        let (a, b) = (s2_eq3(&ic).map_err(e)?, s2_direct(&ic).map_err(e)?);
        worst = worst.max(rel(a, b));
    }
    let took = t0.elapsed();
    ensure(
        worst <= 1e-9 && took < Duration::from_secs(10),
        format!("100 instances, worst rel diff {worst:.2e} (<= 1e-9, {})", secs(took)),
    )
}

fn random_cavity(r: &mut ChaCha8Rng) -> CavityThermalSpec {
    let n_modes = r.gen_range(1..=3);
    // Three 12-level modes fill most of the default dimension cap.
    let nbar_max = if n_modes == 3 { 0.25 } else { 0.5 };
    let modes = (0..n_modes)
        .map(|_| BathMode { g: r.gen_range(0.05..0.5), nbar: r.gen_range(0.0..=nbar_max), truncation: None })
        .collect();
    let populated = if n_modes == 3 { 1 } else { r.gen_range(1..=3) };
    let cavity = if r.gen_bool(0.5) {
        CavityState::State(BosonStateSpec::fock(r.gen_range(0..populated), populated + 1))
    } else {
        let mut amps: Vec<C64> = (0..populated).map(|_| complex(r)).collect();
        amps.push(C64::new(0.0, 0.0));
        CavityState::Amplitudes(amps)
    };
    CavityThermalSpec { modes, cavity }
}

/// Cavity closed form against the direct route, and stability of coherent light in the dark.
fn criterion_4() -> Check {
    let t0 = Instant::now();
    let mut r = rng(4);
    let mut worst = 0.0f64;
    let n = 24;
    for _ in 0..n {
        let spec = random_cavity(&mut r);
        let closed = td_cavity(&spec, 1e-6).map_err(e)?.td.value().ok_or("closed form unbounded")?;
        let ic = spec.build(1e-6).map_err(e)?.ic;
        let direct = td_from_s2(s2_direct(&ic).map_err(e)?).map_err(e)?.td.value().ok_or("direct route unbounded")?;
        worst = worst.max(rel(closed, direct));
    }
    let mut dark_ok = true;
    let mut dark_s2 = 0.0f64;
    for _ in 0..4 {
        let alpha = complex(&mut r);
        let spec = CavityThermalSpec {
            modes: vec![BathMode { g: r.gen_range(0.1..0.5), nbar: 0.0, truncation: None }],
            cavity: CavityState::State(BosonStateSpec::coherent(alpha, 30)),
        };
        dark_ok &= td_cavity(&spec, 1e-6).map_err(e)?.td == Td::Unbounded;
        let s2 = s2_direct(&spec.build(1e-6).map_err(e)?.ic).map_err(e)?;
        dark_s2 = dark_s2.max(s2.abs());
    }
    ensure(
        worst <= 1e-5 && dark_ok && dark_s2 < 1e-10,
        format!(
            "{n} instances, worst t_d rel diff {worst:.2e} (<= 1e-5); coherent T=0: UNBOUNDED {dark_ok}, max |s2| {dark_s2:.1e} ({})",
            secs(t0.elapsed())
        ),
    )
}

/// Thermal ⟨B̂²⟩ and the spin-boson t_d.
fn criterion_5() -> Check {
    let t0 = Instant::now();
    let mut r = rng(5);
    let (mut worst_b2, mut worst_td) = (0.0f64, 0.0f64);
    for i in 0..10 {
        let n_modes = 1 + i % 2;
        let modes = (0..n_modes)
            .map(|_| SpinBosonMode {
                g: r.gen_range(0.05..0.4),
                omega: r.gen_range(0.5..2.0),
                nbar: Some(r.gen_range(0.0..=1.0)),
                truncation: None,
            })
            .collect();
        let spec = SpinBosonSpec {
            delta: 0.3,
            delta_g: 10.0,
            omega_rabi: r.gen_range(0.1..1.0),
            modes,
            temperature: None,
            qubit: QubitStateSpec::new(r.gen_range(0.3..2.8), r.gen_range(0.0..6.0)),
        };
        worst_b2 = worst_b2.max(rel(b2_matrix_expectation(&spec, 1e-6).map_err(e)?, b2_expectation(&spec)));
        let closed = td_spin_boson(&spec).map_err(e)?.td.value().ok_or("closed form unbounded")?;
        let ic = spec.build(1e-6).map_err(e)?.ic;
        let direct = td_from_s2(s2_direct(&ic).map_err(e)?).map_err(e)?.td.value().ok_or("direct unbounded")?;
        worst_td = worst_td.max(rel(closed, direct));
    }
    ensure(
        worst_b2 <= 5e-3 && worst_td <= 0.01,
        format!(
            "10 instances, worst <B^2> rel diff {worst_b2:.2e} (<= 5e-3), worst t_d rel diff {worst_td:.2e} (<= 1e-2) ({})",
            secs(t0.elapsed())
        ),
    )
}

fn sweep_config(omega_rabi: f64) -> String {
    format!(
        r#"{{"model": {{"spin_boson": {{"delta": 0.0, "delta_g": 100.0, "omega_rabi": {omega_rabi},
             "modes": [{{"g": 0.1, "omega": 1.0}}], "temperature": 50.0,
             "qubit": {{"theta": 1.5707963267948966}}}}}},
           "sweep": {{"parameter": "spin_boson.temperature", "values": [50, 100, 200, 400, 800]}}}}"#
    )
}

/// Log-log temperature slopes of the limit and full formulas.
fn criterion_6() -> Check {
    let t0 = Instant::now();
    let strong = cmd_sweep(&parse_config(&sweep_config(10.0)).map_err(e)?, Some(2)).map_err(e)?;
    let weak = cmd_sweep(&parse_config(&sweep_config(0.001)).map_err(e)?, Some(2)).map_err(e)?;
    let s_lim = strong.slopes.td_strong.ok_or("no strong-limit slope")?;
    let s_full = strong.slopes.td_full.ok_or("no full slope (strong)")?;
    let w_lim = weak.slopes.td_weak.ok_or("no weak-limit slope")?;
    let w_full = weak.slopes.td_full.ok_or("no full slope (weak)")?;
    ensure(
        (s_lim + 0.5).abs() <= 0.02
            && (w_lim + 1.0).abs() <= 0.02
            && rel(s_full, s_lim) <= 0.05
            && rel(w_full, w_lim) <= 0.05,
        format!(
            "strong limit {s_lim:.4} (-0.5 ± 0.02), full {s_full:.4}; weak limit {w_lim:.4} (-1.0 ± 0.02), full {w_full:.4}; full within 5% ({})",
            secs(t0.elapsed())
        ),
    )
}

fn lie_spec(g: f64) -> SpinBosonSpec {
    SpinBosonSpec {
        delta: 0.0,
        delta_g: 10.0,
        omega_rabi: 0.1,
        modes: vec![SpinBosonMode { g, omega: 11.0, nbar: Some(0.0), truncation: Some(12) }],
        temperature: None,
        qubit: QubitStateSpec::plus(),
    }
}

/// Second-order scaling of the Lie-rotation residual.
fn criterion_7() -> Check {
    let t0 = Instant::now();
    let big = lie_transform_residual(&lie_spec(0.02), 1e-6).map_err(e)?;
    let small = lie_transform_residual(&lie_spec(0.01), 1e-6).map_err(e)?;
    let ratio = big.residual / small.residual;
    ensure(
        rel(ratio, 4.0) <= 0.25,
        format!(
            "residual {:.3e} -> {:.3e} on halving g, ratio {ratio:.3} (4 ± 25%) ({})",
            big.residual,
            small.residual,
            secs(t0.elapsed())
        ),
    )
}

fn decoq_bin(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_decoq")).args(args).env_remove("DECOQ_DIM_CAP").output().map_err(e)?;
    if !out.status.success() {
        return Err(format!("decoq {args:?} exited with {:?}", out.status.code()));
    }
    Ok(out.stdout)
}

/// Property sentinels: first derivative, orthogonal states, stable poles,
/// purity conservation, byte determinism of the CLI.
fn criterion_8() -> Check {
    let t0 = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;

    let mut s1 = 0.0f64;
    for (_, model) in fig1_models() {
        let built = model.build(1e-6).map_err(e)?;
        let series = run_entropy_series(&built.generator, &built.ic, 16.0 * 2e-5, 16, &built.series_context("", 1e-6))
            .map_err(e)?;
        s1 = s1.max(fd_derivative_samples(&series.values, series.step(), 1).map_err(e)?.value.abs());
    }
    ok &= s1 <= 1e-8;
    parts.push(format!("|s1(0)| {s1:.1e}"));

    let mut r = rng(8);
    let mut orth = 0.0f64;
    for i in 0..20 {
        let q = QubitStateSpec::new(r.gen_range(0.0..std::f64::consts::PI), r.gen_range(0.0..std::f64::consts::TAU));
        let boson = if i % 2 == 0 { BosonStateSpec::thermal(r.gen_range(0.0..3.0), 80) } else { BosonStateSpec::fock(i % 5, 10) };
        let spec = PureDephasingSpec { g: r.gen_range(0.1..2.0), qubit: q, boson };
        let perp = PureDephasingSpec { qubit: q.orthogonal(), ..spec.clone() };
        match (td_pure_dephasing(&spec, 1e-6).map_err(e)?.td, td_pure_dephasing(&perp, 1e-6).map_err(e)?.td) {
            (Td::Finite(a), Td::Finite(b)) => orth = orth.max(rel(a, b)),
            (a, b) => ok &= a == b,
        }
    }
    ok &= orth <= 1e-12;
    parts.push(format!("orthogonal t_d rel diff {orth:.1e}"));

    let run = RunConfig { t_max: 10.0, steps: 100, ..RunConfig::default() };
    let pole = |theta: f64, omega_rabi: f64| {
        ModelSpec::SpinBoson(SpinBosonSpec {
            qubit: QubitStateSpec::new(theta, 0.0),
            omega_rabi,
            modes: vec![SpinBosonMode { g: 0.3, omega: 1.0, nbar: Some(0.5), truncation: None }],
            ..lie_spec(0.0)
        })
    };
    // A driven pole still has s''(0) = 0; only the undriven pole stays pure.
    for theta in [0.0, std::f64::consts::PI] {
        ok &= pole(theta, 0.1).td(1e-6).map_err(e)?.td == Td::Unbounded;
    }
    let mut sentinel = 0.0f64;
    let mut drift = 0.0f64;
    let zero_g = dephasing(0.0, QubitStateSpec::plus(), BosonStateSpec::thermal(1.0, 40));
    for model in [pole(0.0, 0.0), pole(std::f64::consts::PI, 0.0), zero_g] {
        ok &= model.td(1e-6).map_err(e)?.td == Td::Unbounded;
        let sim = cmd_simulate(&simulation_config(model, run.clone())).map_err(e)?;
        sentinel = sentinel.max(sim.series.values.iter().copied().fold(0.0, f64::max));
        drift = drift.max(sim.series.meta.purity_drift);
    }
    ok &= sentinel <= 1e-10;
    parts.push(format!("pole/zero-coupling max s {sentinel:.1e}"));

    for (_, model) in fig1_models().into_iter().filter(|(n, _)| *n != "thermal") {
        let sim = cmd_simulate(&simulation_config(model, RunConfig::default())).map_err(e)?;
        drift = drift.max(sim.series.meta.purity_drift);
        estimate_td(&sim.series, 0.05).map_err(e)?;
    }
    ok &= drift <= 1e-9;
    parts.push(format!("purity drift {drift:.1e}"));

    let dir = tempfile::tempdir().map_err(e)?;
    let cfg = dir.path().join("fock.json");
    let model = fig1_models().remove(0).1;
    let text = serde_json::to_string(&simulation_config(model, RunConfig::default())).map_err(e)?;
    std::fs::write(&cfg, text).map_err(e)?;
    let sweep = dir.path().join("sweep.json");
    std::fs::write(&sweep, sweep_config(10.0)).map_err(e)?;
    let p = |path: &Path| path.to_str().unwrap().to_owned();
    let a = decoq_bin(&["simulate", "--config", &p(&cfg)])?;
    let b = decoq_bin(&["simulate", "--config", &p(&cfg)])?;
    let c = decoq_bin(&["sweep", "--config", &p(&sweep), "--workers", "1"])?;
    let d = decoq_bin(&["sweep", "--config", &p(&sweep), "--workers", "4"])?;
    let same = a == b && c == d;
    ok &= same;
    parts.push(format!("CLI bytes identical {same}"));

    parts.push(secs(t0.elapsed()));
    ensure(ok, parts.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("closed-form curvature vs exact series", criterion_1),
        ("figure scale separation", criterion_2),
        ("correlation route transcription", criterion_3),
        ("cavity closed form", criterion_4),
        ("spin-boson <B^2> and t_d", criterion_5),
        ("temperature scaling", criterion_6),
        ("Lie-rotation consistency", criterion_7),
        ("property suites", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {}: {name}: {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
