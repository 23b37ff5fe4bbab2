//! Acceptance gate: ten end-to-end checks, each printing a single
//! `ACCEPTANCE Cnn: PASS/FAIL` line with its measured numbers (visible
//! with `cargo test --test acceptance -- --nocapture`).
//!
//! Every check compares pipeline output against an independent reference:
//! closed-form single-spin dynamics, exact Schrödinger integration,
//! analytic channel algebra, or hand-computed matrices. Timed checks
//! assert their stated wall-clock budgets; a process-wide mutex
//! serializes the heavy sections so budgets are measured without
//! interference from concurrently running tests.

use std::f64::consts::PI;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;

use dqlab::circuit::{Circuit, Gate};
use dqlab::evolve::{
    compile_evolution, exact_evolve, evolve_trotterized, TrotterOrder, TrotterPlan,
};
use dqlab::experiment::{
    self, bundled_config, run_experiment, run_experiment_with_info, Lane,
};
use dqlab::mitigate::{self, InversionMethod};
use dqlab::models::{
    neel_state, staggered_magnetization, Polarization, PulseWaveform, QuenchModel,
    QuenchSchedule, RabiModel, RabiParams, SpinLattice,
};
use dqlab::noise::{
    apply_noisy_circuit, derive_seed, sample_counts, DeviceCalibration, EdgeCalibration,
    GateDurations, NoiseModel, QubitCalibration,
};
use dqlab::qasm;
use dqlab::qcore::{DensityMatrix, HermitianOperator, QuantumState};
use dqlab::tomo;

/// Serializes the compute-heavy sections across test threads so each
/// runtime budget is measured alone.
static HEAVY: Mutex<()> = Mutex::new(());

fn heavy_guard() -> std::sync::MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|poison| poison.into_inner())
}

fn report(name: &str, outcome: Result<String, String>) {
    match outcome {
        Ok(detail) => println!("ACCEPTANCE {name}: PASS — {detail}"),
        Err(detail) => {
            println!("ACCEPTANCE {name}: FAIL — {detail}");
            panic!("{name} failed: {detail}");
        }
    }
}

macro_rules! check {
    ($cond:expr, $($fmt:tt)+) => {
        if !($cond) {
            return Err(format!($($fmt)+));
        }
    };
}

fn within_budget(elapsed: Duration, budget: Duration) -> Result<(), String> {
    if elapsed <= budget {
        Ok(())
    } else {
        Err(format!(
            "runtime {:.2}s exceeded budget {:.0}s",
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        ))
    }
}

// ---------------------------------------------------------------------------
// C1 — single-spin discretization against the rotating-frame closed form
// ---------------------------------------------------------------------------

/// Exact excited-state probability for the driven spin with field
/// magnitude `h0`, polar angle `theta`, drive frequency `omega`, initial
/// tilt `alpha`: transform to the frame rotating with the drive, where
/// the Hamiltonian is the constant `h0 sinθ Sx + (h0 cosθ − ω) Sz`, apply
/// the axis-angle rotation formula, and transform back (the frame change
/// is diagonal, so it drops out of populations).
fn rabi_closed_form_p_down(h0: f64, theta: f64, omega: f64, alpha: f64, t: f64) -> f64 {
    let ax = h0 * theta.sin();
    let az = h0 * theta.cos() - omega;
    let rabi_freq = (ax * ax + az * az).sqrt();
    let half = rabi_freq * t / 2.0;
    let (c, s) = (half.cos(), half.sin());
    let (nx, nz) = if rabi_freq > 0.0 {
        (ax / rabi_freq, az / rabi_freq)
    } else {
        (0.0, 0.0)
    };
    // exp(-i H t) = cos(Ωt/2) I − i sin(Ωt/2) (nx σx + nz σz)
    let u10 = C64::new(0.0, -s * nx);
    let u11 = C64::new(c, s * nz);
    let psi0 = (
        C64::from((alpha / 2.0).cos()),
        C64::from((alpha / 2.0).sin()),
    );
    (u10 * psi0.0 + u11 * psi0.1).norm_sqr()
}

#[test]
fn c01_rabi_discretization_error_small_and_second_order() {
    let _guard = heavy_guard();
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        let (h0, theta, omega, alpha) = (1.0, 2.0, 1.0, 2.0 * PI / 3.0);
        let params = RabiParams::new(h0, theta, omega, alpha).map_err(|e| e.to_string())?;
        let model = RabiModel::new(params);
        let initial = model.initial_state();
        let max_err = |dt: f64| -> Result<f64, String> {
            let steps = (10.0 / dt).round() as usize;
            let plan = TrotterPlan::new(TrotterOrder::Second, dt, steps)
                .map_err(|e| e.to_string())?;
            let record = evolve_trotterized(&model, &initial, 0.0, &plan)
                .map_err(|e| e.to_string())?;
            let mut worst = 0.0f64;
            for (t, state) in record.times.iter().zip(&record.states) {
                let p = state.probabilities()[1];
                let reference = rabi_closed_form_p_down(h0, theta, omega, alpha, *t);
                worst = worst.max((p - reference).abs());
            }
            Ok(worst)
        };
        let coarse = max_err(0.05)?;
        let fine = max_err(0.025)?;
        let ratio = coarse / fine;
        check!(
            coarse < 1e-2,
            "max |P_discretized − P_closed_form| = {coarse:.3e}, bound 1e-2"
        );
        check!(
            (3.4..=4.6).contains(&ratio),
            "error ratio dt=0.05 / dt=0.025 is {ratio:.3}, outside [3.4, 4.6]"
        );
        let elapsed = started.elapsed();
        within_budget(elapsed, Duration::from_secs(1))?;
        Ok(format!(
            "max err {coarse:.3e} < 1e-2, halving ratio {ratio:.3} in [3.4, 4.6], {:.2}s",
            elapsed.as_secs_f64()
        ))
    })();
    report("C1", outcome);
}

// ---------------------------------------------------------------------------
// C2 — order-2 global error scaling on the constant-Hamiltonian dimer
// ---------------------------------------------------------------------------

/// Global-phase-insensitive l2 distance between normalized states:
/// `min_φ || a − e^{iφ} b || = sqrt(2 − 2 |⟨a|b⟩|)`.
fn phase_aligned_error(a: &QuantumState, b: &QuantumState) -> f64 {
    let overlap = a.inner(b).norm().min(1.0);
    (2.0 - 2.0 * overlap).max(0.0).sqrt()
}

#[test]
fn c02_dimer_trotter_error_scales_as_dt_squared() {
    let _guard = heavy_guard();
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        // The bare XX dimer has a single bond, so its step splits into one
        // exponential and carries no splitting error at all; a constant
        // transverse field on one site supplies the non-commuting partner
        // that makes the order-2 signature measurable.
        let mut dimer = SpinLattice::chain(2, 1.0, 0.0).map_err(|e| e.to_string())?;
        dimer
            .set_static_field(0, [1.0, 0.0, 0.0])
            .map_err(|e| e.to_string())?;
        let initial = neel_state(2).map_err(|e| e.to_string())?;
        let horizon = 2.0;
        let reference =
            exact_evolve(&dimer, &initial, 0.0, horizon, 64).map_err(|e| e.to_string())?;
        let global_err = |dt: f64| -> Result<f64, String> {
            let steps = (horizon / dt).round() as usize;
            let plan = TrotterPlan::new(TrotterOrder::Second, dt, steps)
                .map_err(|e| e.to_string())?;
            let record = evolve_trotterized(&dimer, &initial, 0.0, &plan)
                .map_err(|e| e.to_string())?;
            Ok(phase_aligned_error(
                &reference,
                record.states.last().expect("nonempty record"),
            ))
        };
        let coarse = global_err(0.2)?;
        let fine = global_err(0.1)?;
        let ratio = coarse / fine;
        check!(
            (3.4..=4.6).contains(&ratio),
            "global error ratio dt=0.2 / dt=0.1 is {ratio:.3} \
             (errors {coarse:.3e} / {fine:.3e}), outside [3.4, 4.6]"
        );
        let elapsed = started.elapsed();
        within_budget(elapsed, Duration::from_secs(1))?;
        Ok(format!(
            "global error ratio {ratio:.3} in [3.4, 4.6], {:.2}s",
            elapsed.as_secs_f64()
        ))
    })();
    report("C2", outcome);
}

// ---------------------------------------------------------------------------
// C3 — readout confusion inversion: analytic exactness, sampled closeness
// ---------------------------------------------------------------------------

#[test]
fn c03_readout_mitigation_analytic_exact_and_sampled_close() {
    let _guard = heavy_guard();
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        let n = 3;
        let mut circuit = Circuit::new(n).map_err(|e| e.to_string())?;
        for gate in [
            // Hadamard, entanglers, and an arbitrary rotation: a state
            // with support on every outcome
            Gate::U3 { theta: PI / 2.0, phi: 0.0, lambda: PI, qubit: 0 },
            Gate::Cx { control: 0, target: 1 },
            Gate::U3 { theta: 0.7, phi: 0.3, lambda: 0.1, qubit: 2 },
            Gate::Cx { control: 1, target: 2 },
            Gate::U3 { theta: 1.1, phi: 0.0, lambda: 0.4, qubit: 1 },
        ] {
            circuit.push(gate).map_err(|e| e.to_string())?;
        }
        let mut psi = QuantumState::zero(n).map_err(|e| e.to_string())?;
        circuit.apply_to_state(&mut psi).map_err(|e| e.to_string())?;
        let ideal = psi.probabilities();

        let nm = NoiseModel::readout_only(n, 0.025).map_err(|e| e.to_string())?;
        let lambda = nm.confusion();
        let observed = lambda.apply(&ideal).map_err(|e| e.to_string())?;
        let recovered =
            mitigate::mitigate_probabilities(&observed, &lambda, InversionMethod::Inverse)
                .map_err(|e| e.to_string())?;
        let analytic_dev = ideal
            .iter()
            .zip(&recovered)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0f64, f64::max);
        check!(
            analytic_dev < 1e-12,
            "analytic inversion deviates by {analytic_dev:.3e}, bound 1e-12"
        );

        let rho = DensityMatrix::from_pure(&psi);
        let hist = sample_counts(&rho, &lambda, 8192, derive_seed(77, 0))
            .map_err(|e| e.to_string())?;
        let mitigated =
            mitigate::mitigate_probabilities(&hist.frequencies(), &lambda, InversionMethod::Inverse)
                .map_err(|e| e.to_string())?;
        let tv: f64 = 0.5
            * ideal
                .iter()
                .zip(&mitigated)
                .map(|(p, q)| (p - q).abs())
                .sum::<f64>();
        check!(
            tv <= 0.03,
            "total-variation distance at 8192 shots is {tv:.4}, bound 0.03"
        );
        let elapsed = started.elapsed();
        within_budget(elapsed, Duration::from_secs(5))?;
        Ok(format!(
            "analytic dev {analytic_dev:.1e} < 1e-12, sampled TV {tv:.4} ≤ 0.03, {:.2}s",
            elapsed.as_secs_f64()
        ))
    })();
    report("C3", outcome);
}

// ---------------------------------------------------------------------------
// C4 — two-point ZNE rule and bias reduction under pure CNOT depolarizing
// ---------------------------------------------------------------------------

/// Calibration with a single noise source: every CNOT of the four-site
/// ring depolarizes at the same rate; no decoherence, no gate or readout
/// error anywhere else.
fn pure_cnot_calibration(p_cx: f64) -> DeviceCalibration {
    DeviceCalibration {
        device: "synthetic_ring".to_string(),
        date: "2021-01-01".to_string(),
        qubits: (0..4)
            .map(|q| QubitCalibration {
                qubit: q,
                t1_us: 1e12,
                t2_us: 1e12,
                u3_error: 0.0,
                readout_error: 0.0,
            })
            .collect(),
        edges: [(0, 1), (1, 2), (2, 3), (3, 0)]
            .into_iter()
            .map(|(control, target)| EdgeCalibration {
                control,
                target,
                cnot_error: p_cx,
            })
            .collect(),
        durations: GateDurations::default(),
    }
}

#[test]
fn c04_zne_two_point_rule_and_bias_reduction() {
    let _guard = heavy_guard();
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        // Dyadic inputs: every intermediate of both evaluations is exact
        // in binary floating point, so equality must be bit-for-bit.
        for (e1, e3) in [(0.75, 0.25), (-0.5, 0.125), (1.5, -2.25), (0.0, 1.0)] {
            let z = mitigate::zne_extrapolate(&[(1.0, e1), (3.0, e3)])
                .map_err(|e| e.to_string())?
                .extrapolated();
            let rule = (3.0 * e1 - e3) / 2.0;
            check!(z == rule, "two-point rule: got {z}, expected {rule} exactly");
        }
        for (e1, e3) in [(0.3141, -0.2718), (0.9999, 0.6181)] {
            let z = mitigate::zne_extrapolate(&[(1.0, e1), (3.0, e3)])
                .map_err(|e| e.to_string())?
                .extrapolated();
            let rule = (3.0 * e1 - e3) / 2.0;
            check!(
                (z - rule).abs() < 1e-14,
                "two-point rule off by {:.2e}",
                (z - rule).abs()
            );
        }

        // Pulsed four-site ring, all expectations analytic (no sampling):
        // extrapolation must beat the raw noisy value by at least 2x.
        let nm = NoiseModel::from_calibration(&pure_cnot_calibration(6.8e-3), &[0, 1, 2, 3])
            .map_err(|e| e.to_string())?;
        let mut ring = SpinLattice::ring(4, 1.0, 0.0).map_err(|e| e.to_string())?;
        ring.set_pulse(
            0,
            PulseWaveform::new(Polarization::Circular, 2.0, 1.0, 0.7, 2.0)
                .map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let initial = neel_state(4).map_err(|e| e.to_string())?;
        let mut prep = Circuit::new(4).map_err(|e| e.to_string())?;
        for qubit in [1, 3] {
            prep.push(Gate::U3 { theta: PI, phi: 0.0, lambda: PI, qubit })
                .map_err(|e| e.to_string())?;
        }
        let zero = QuantumState::zero(4).map_err(|e| e.to_string())?;
        let rho0 = apply_noisy_circuit(&DensityMatrix::from_pure(&zero), &prep, &nm)
            .map_err(|e| e.to_string())?;

        let dt = 0.4;
        let base_plan =
            TrotterPlan::new(TrotterOrder::Second, dt, 5).map_err(|e| e.to_string())?;
        let mut summary = Vec::new();
        for k in 1..=5usize {
            let t = dt * k as f64;
            let plan = TrotterPlan { n_steps: k, ..base_plan };
            let circuit = compile_evolution(&ring, 0.0, &plan).map_err(|e| e.to_string())?;
            let exact_state =
                exact_evolve(&ring, &initial, 0.0, t, 8).map_err(|e| e.to_string())?;
            let exact = staggered_magnetization(&exact_state.probabilities());
            let value_at = |c: &Circuit| -> Result<f64, String> {
                let rho = apply_noisy_circuit(&rho0, c, &nm).map_err(|e| e.to_string())?;
                Ok(staggered_magnetization(&rho.diagonal()))
            };
            let e1 = value_at(&circuit)?;
            let e3 = value_at(&circuit.fold_cnots(3).map_err(|e| e.to_string())?)?;
            let zne = mitigate::zne_extrapolate(&[(1.0, e1), (3.0, e3)])
                .map_err(|e| e.to_string())?
                .extrapolated();
            let raw_err = (e1 - exact).abs();
            let zne_err = (zne - exact).abs();
            check!(
                zne_err <= 0.5 * raw_err,
                "t={t}: ZNE error {zne_err:.4e} exceeds half of raw error {raw_err:.4e}"
            );
            summary.push(format!("{:.2}", zne_err / raw_err));
        }
        let elapsed = started.elapsed();
        within_budget(elapsed, Duration::from_secs(30))?;
        Ok(format!(
            "two-point rule exact; zne/raw error ratios [{}] all ≤ 0.5 for t ≤ 2, {:.2}s",
            summary.join(", "),
            elapsed.as_secs_f64()
        ))
    })();
    report("C4", outcome);
}

// ---------------------------------------------------------------------------
// C5 — eight-site chain: mitigation beats raw at the full horizon
// ---------------------------------------------------------------------------

#[test]
fn c05_chain_mitigated_beats_raw_at_final_time() {
    let _guard = heavy_guard();
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        let cfg = bundled_config("e4_chain").map_err(|e| e.to_string())?;
        let table = run_experiment(&cfg).map_err(|e| e.to_string())?;
        check!(
            table.failures().is_empty(),
            "lane failures: {:?}",
            table.failures()
        );
        let final_t = 7.0;
        let mut raw_errs = Vec::new();
        let mut mit_errs = Vec::new();
        for row in table.rows() {
            if (row.t - final_t).abs() < 1e-9 {
                let exact = row.exact.ok_or("missing exact value")?;
                raw_errs.push((row.noisy_raw.ok_or("missing raw value")? - exact).abs());
                mit_errs.push((row.mitigated.ok_or("missing mitigated value")? - exact).abs());
            }
        }
        check!(raw_errs.len() == 8, "expected 8 sites at t=7, got {}", raw_errs.len());
        let raw = raw_errs.iter().sum::<f64>() / raw_errs.len() as f64;
        let mitigated = mit_errs.iter().sum::<f64>() / mit_errs.len() as f64;
        let ratio = mitigated / raw;
        check!(
            mitigated < raw,
            "mean per-site error: mitigated {mitigated:.4} not below raw {raw:.4}"
        );
        check!(
            ratio <= 0.5,
            "mitigated/raw error ratio {ratio:.3} exceeds 0.5 \
             (mitigated {mitigated:.4}, raw {raw:.4})"
        );
        let elapsed = started.elapsed();
        within_budget(elapsed, Duration::from_secs(120))?;
        Ok(format!(
            "t=7 mean per-site error: mitigated {mitigated:.4} < raw {raw:.4}, \
             ratio {ratio:.3} ≤ 0.5, {:.2}s",
            elapsed.as_secs_f64()
        ))
    })();
    report("C5", outcome);
}

// ---------------------------------------------------------------------------
// C6 — fermionic quench: conservation, mitigated filling, jump ordering
// ---------------------------------------------------------------------------

#[test]
fn c06_quench_conservation_filling_and_jump_ordering() {
    let _guard = heavy_guard();
    let started = Instant::now();
    let outcome = (|| -> Result<String, String> {
        let strong_cfg = bundled_config("e5_quench").map_err(|e| e.to_string())?;
        let strong = run_experiment(&strong_cfg).map_err(|e| e.to_string())?;
        let mut weak_cfg = strong_cfg.clone();
        weak_cfg.model.u_final = Some(1.0);
        // the jump comparison reads only the ideal lanes; infinite-shot
        // tomography keeps the second run cheap without changing them
        weak_cfg.model.tomography = Some("analytic".to_string());
        let weak = run_experiment(&weak_cfg).map_err(|e| e.to_string())?;

        for (label, table) in [("U=2", &strong), ("U=1", &weak)] {
            check!(
                table.failures().is_empty(),
                "{label}: lane failures {:?}",
                table.failures()
            );
            let jump0 = table.series("fermi_jump")[0]
                .exact
                .ok_or("missing exact jump")?;
            check!(
                (jump0 - 1.0).abs() < 1e-9,
                "{label}: initial fermi_jump {jump0} differs from 1 by ≥ 1e-9"
            );
            let fill0 = table.series("filling")[0]
                .exact
                .ok_or("missing exact filling")?;
            check!(
                (fill0 - 2.0).abs() < 1e-10,
                "{label}: initial filling {fill0} differs from 2 by ≥ 1e-10"
            );
            for row in table.series("filling") {
                let exact = row.exact.ok_or("missing exact filling")?;
                let trotter = row.trotter_ideal.ok_or("missing circuit-lane filling")?;
                check!(
                    (exact - 2.0).abs() < 1e-9,
                    "{label}: exact filling {exact} drifts from 2 at t={}",
                    row.t
                );
                check!(
                    (trotter - 2.0).abs() < 1e-9,
                    "{label}: circuit-lane filling {trotter} drifts from 2 at t={}",
                    row.t
                );
            }
        }

        // mitigated filling error under the bundled device calibration
        let mut worst_fill_rel = 0.0f64;
        for row in strong.series("filling") {
            let mitigated = row.mitigated.ok_or("missing mitigated filling")?;
            worst_fill_rel = worst_fill_rel.max((mitigated - 2.0).abs() / 2.0);
        }
        check!(
            worst_fill_rel < 0.04,
            "mitigated filling relative error {worst_fill_rel:.4} ≥ 4%"
        );

        // strong quench destroys the Fermi surface strictly faster
        let strong_jump = strong.series("fermi_jump");
        let weak_jump = weak.series("fermi_jump");
        check!(strong_jump.len() == weak_jump.len(), "time grids differ");
        for (s, w) in strong_jump.iter().zip(&weak_jump).skip(1) {
            check!((s.t - w.t).abs() < 1e-12, "time grids differ");
            let js = s.exact.ok_or("missing exact jump")?;
            let jw = w.exact.ok_or("missing exact jump")?;
            check!(
                js < jw,
                "at t={}: U=2 jump {js:.6} not strictly below U=1 jump {jw:.6}",
                s.t
            );
        }
        let elapsed = started.elapsed();
        within_budget(elapsed, Duration::from_secs(180))?;
        Ok(format!(
            "jump(0)=1, filling conserved to 1e-9 in both ideal lanes, \
             mitigated filling error {:.2}% < 4%, U=2 jump strictly below U=1 \
             at all t in (0, 1], {:.2}s",
            100.0 * worst_fill_rel,
            elapsed.as_secs_f64()
        ))
    })();
    report("C6", outcome);
}

// ---------------------------------------------------------------------------
// C7 — entanglement entropy: Bell pair and quench initial state
// ---------------------------------------------------------------------------

#[test]
fn c07_entropy_bell_pair_and_quench_ground_state() {
    let outcome = (|| -> Result<String, String> {
        let inv_sqrt2 = C64::from(1.0 / 2.0f64.sqrt());
        let bell = QuantumState::from_amplitudes(
            2,
            vec![inv_sqrt2, C64::from(0.0), C64::from(0.0), inv_sqrt2],
        )
        .map_err(|e| e.to_string())?;
        let half = bell
            .to_density()
            .partial_trace(&[0])
            .map_err(|e| e.to_string())?;
        let bell_entropy = half.von_neumann_entropy();
        let ln2 = std::f64::consts::LN_2;
        check!(
            (bell_entropy - ln2).abs() < 1e-12,
            "Bell-pair entropy {bell_entropy} differs from ln 2 by ≥ 1e-12"
        );

        // direct computation from the pre-quench ground state
        let model = QuenchModel::new(
            QuenchSchedule::new(1.0, 2.0).map_err(|e| e.to_string())?,
            4,
        )
        .map_err(|e| e.to_string())?;
        let (_, ground) = model.pre_quench_ground_state();
        let direct = ground
            .to_density()
            .partial_trace(&[0, 1])
            .map_err(|e| e.to_string())?
            .von_neumann_entropy();
        check!(direct > 0.0, "ground-state bipartite entropy not positive");

        // the experiment pipeline must reproduce it at t = 0
        let mut cfg = bundled_config("e5_quench").map_err(|e| e.to_string())?;
        cfg.calibration = experiment::IDEAL_CALIBRATION.to_string();
        cfg.model.tomography = Some("analytic".to_string());
        cfg.trotter.n_steps = 1;
        let table = run_experiment(&cfg).map_err(|e| e.to_string())?;
        let reported = table.series("entropy_half")[0]
            .exact
            .ok_or("missing exact entropy")?;
        check!(
            (reported - direct).abs() < 1e-9,
            "pipeline t=0 entropy {reported} vs direct {direct}: difference ≥ 1e-9"
        );
        Ok(format!(
            "Bell entropy = ln 2 ± 1e-12; quench t=0 entropy {direct:.6} > 0 \
             matches pipeline within 1e-9"
        ))
    })();
    report("C7", outcome);
}

// ---------------------------------------------------------------------------
// C8 — tomography reconstruction and physical projection
// ---------------------------------------------------------------------------

fn random_pure_state(n: usize, rng: &mut impl rand::Rng) -> QuantumState {
    let amps: Vec<C64> = (0..1usize << n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    QuantumState::from_amplitudes(n, amps).expect("nonzero random vector")
}

#[test]
fn c08_tomography_reconstructs_random_states_and_projects_physically() {
    let _guard = heavy_guard();
    let outcome = (|| -> Result<String, String> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(42);
        let nm = NoiseModel::ideal(4).map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for trial in 0..3 {
            let psi = random_pure_state(4, &mut rng);
            let rho = DensityMatrix::from_pure(&psi);
            let ds = tomo::collect_analytic(&rho, &nm).map_err(|e| e.to_string())?;
            let mu = tomo::linear_inversion(&ds).map_err(|e| e.to_string())?;
            let reconstructed = tomo::psd_project(&mu).map_err(|e| e.to_string())?;
            let distance = reconstructed.trace_distance(&rho).map_err(|e| e.to_string())?;
            check!(
                distance < 1e-10,
                "trial {trial}: trace distance {distance:.3e} ≥ 1e-10"
            );
            worst = worst.max(distance);

            // physicality of the projection output
            let eigs = reconstructed
                .matrix()
                .clone()
                .symmetric_eigen()
                .eigenvalues;
            let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
            let trace: f64 = reconstructed.matrix().diagonal().iter().map(|z| z.re).sum();
            check!(min_eig > -1e-12, "trial {trial}: eigenvalue {min_eig:.3e} < 0");
            check!(
                (trace - 1.0).abs() < 1e-12,
                "trial {trial}: trace {trace} differs from 1"
            );
        }

        // hand-computed projection: diag(1.2, −0.2) clips to diag(1, 0)
        let mut m = nalgebra::DMatrix::<C64>::zeros(2, 2);
        m[(0, 0)] = C64::from(1.2);
        m[(1, 1)] = C64::from(-0.2);
        let mu = HermitianOperator::new(1, m).map_err(|e| e.to_string())?;
        let projected = tomo::psd_project(&mu).map_err(|e| e.to_string())?;
        let p = projected.matrix();
        let dev = (p[(0, 0)] - C64::from(1.0)).norm()
            + p[(0, 1)].norm()
            + p[(1, 0)].norm()
            + p[(1, 1)].norm();
        check!(
            dev < 1e-12,
            "diag(1.2, −0.2) should project to diag(1, 0); total deviation {dev:.3e}"
        );
        Ok(format!(
            "3 random 4-qubit states reconstructed, worst trace distance {worst:.2e} \
             < 1e-10; outputs PSD/trace-1; diag(1.2, −0.2) → diag(1, 0) exact"
        ))
    })();
    report("C8", outcome);
}

// ---------------------------------------------------------------------------
// C9 — bundled circuit listing: counts, round-trip, fuzzing
// ---------------------------------------------------------------------------

/// Deterministic pseudo-random generator for fuzz cases (no rng crate
/// features needed beyond reproducibility).
struct SplitMix(u64);

impl SplitMix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }
}

fn fuzz_case(rng: &mut SplitMix, base: &str) -> String {
    match rng.next() % 4 {
        // random printable soup
        0 => {
            let len = (rng.next() % 200) as usize;
            (0..len)
                .map(|_| (32 + (rng.next() % 95) as u8) as char)
                .collect()
        }
        // truncation of the valid listing
        1 => {
            let cut = (rng.next() as usize) % (base.len() + 1);
            base[..cut].to_string()
        }
        // byte substitutions inside the valid listing
        2 => {
            let mut bytes = base.as_bytes().to_vec();
            for _ in 0..(rng.next() % 8 + 1) {
                let idx = (rng.next() as usize) % bytes.len();
                bytes[idx] = 32 + (rng.next() % 95) as u8;
            }
            String::from_utf8_lossy(&bytes).into_owned()
        }
        // splice two halves at random offsets
        _ => {
            let a = (rng.next() as usize) % (base.len() + 1);
            let b = (rng.next() as usize) % (base.len() + 1);
            format!("{}{}", &base[..a], &base[b..])
        }
    }
}

#[test]
fn c09_qasm_listing_counts_round_trip_and_fuzz() {
    let outcome = (|| -> Result<String, String> {
        let circuit =
            qasm::parse_circuit(qasm::GROUND_STATE_PREP_QASM).map_err(|e| e.to_string())?;
        check!(circuit.n_qubits() == 4, "expected 4 qubits, got {}", circuit.n_qubits());
        check!(
            circuit.gates().len() == 36,
            "expected 36 gate statements, got {}",
            circuit.gates().len()
        );
        let (mut u3, mut u1, mut ry, mut cx) = (0, 0, 0, 0);
        for gate in circuit.gates() {
            match gate {
                Gate::U3 { .. } => u3 += 1,
                Gate::U1 { .. } => u1 += 1,
                Gate::Ry { .. } => ry += 1,
                Gate::Cx { .. } => cx += 1,
            }
        }
        check!(
            (u3, u1, ry, cx) == (22, 7, 0, 7),
            "gate mix (u3, u1, ry, cx) = ({u3}, {u1}, {ry}, {cx}), expected (22, 7, 0, 7)"
        );

        let reparsed =
            qasm::parse_circuit(&qasm::serialize(&circuit)).map_err(|e| e.to_string())?;
        check!(
            reparsed.gates().len() == circuit.gates().len(),
            "round-trip changed the gate count"
        );
        for (i, (a, b)) in circuit.gates().iter().zip(reparsed.gates()).enumerate() {
            let ok = match (a, b) {
                (
                    Gate::U3 { theta: t1, phi: p1, lambda: l1, qubit: q1 },
                    Gate::U3 { theta: t2, phi: p2, lambda: l2, qubit: q2 },
                ) => {
                    q1 == q2
                        && (t1 - t2).abs() < 1e-12
                        && (p1 - p2).abs() < 1e-12
                        && (l1 - l2).abs() < 1e-12
                }
                (
                    Gate::U1 { lambda: l1, qubit: q1 },
                    Gate::U1 { lambda: l2, qubit: q2 },
                ) => q1 == q2 && (l1 - l2).abs() < 1e-12,
                (
                    Gate::Ry { theta: t1, qubit: q1 },
                    Gate::Ry { theta: t2, qubit: q2 },
                ) => q1 == q2 && (t1 - t2).abs() < 1e-12,
                (
                    Gate::Cx { control: c1, target: t1 },
                    Gate::Cx { control: c2, target: t2 },
                ) => c1 == c2 && t1 == t2,
                _ => false,
            };
            check!(ok, "round-trip changed gate {i}: {a:?} vs {b:?}");
        }

        // the parser must return (Ok or Err), never panic, on garbage
        let mut rng = SplitMix(0xfeed_beef);
        let cases = 500;
        let mut parsed_ok = 0usize;
        for _ in 0..cases {
            let input = fuzz_case(&mut rng, qasm::GROUND_STATE_PREP_QASM);
            if qasm::parse_circuit(&input).is_ok() {
                parsed_ok += 1;
            }
        }
        Ok(format!(
            "listing: 4 qubits, 36 statements (22 u3, 7 u1, 7 cx); round-trip \
             angle-exact to 1e-12; {cases} fuzz inputs survived ({parsed_ok} parsed)"
        ))
    })();
    report("C9", outcome);
}

// ---------------------------------------------------------------------------
// C10 — reproducibility and entangling-gate accounting
// ---------------------------------------------------------------------------

#[test]
fn c10_reproducible_outputs_and_gate_accounting() {
    let _guard = heavy_guard();
    let outcome = (|| -> Result<String, String> {
        // byte-identical reruns of a bundled sampled experiment
        let cfg = bundled_config("e3_plaquette").map_err(|e| e.to_string())?;
        let (first, info1) = run_experiment_with_info(&cfg).map_err(|e| e.to_string())?;
        let (second, info2) = run_experiment_with_info(&cfg).map_err(|e| e.to_string())?;
        check!(
            first.to_csv() == second.to_csv(),
            "identical config+seed produced different CSV bytes"
        );
        let m1 = experiment::build_manifest(&first, &cfg, &info1).map_err(|e| e.to_string())?;
        let m2 = experiment::build_manifest(&second, &cfg, &info2).map_err(|e| e.to_string())?;
        check!(m1 == m2, "identical config+seed produced different manifests");
        check!(
            first.mean_abs_error(Lane::Mitigated) <= first.mean_abs_error(Lane::NoisyRaw),
            "mitigated lane should not be worse than raw on the bundled ring"
        );

        // folding arithmetic on the documented entangling-count relation
        let mut logged = Circuit::new(2).map_err(|e| e.to_string())?;
        for _ in 0..126 {
            logged
                .push(Gate::Cx { control: 0, target: 1 })
                .map_err(|e| e.to_string())?;
        }
        let folded = logged.fold_cnots(3).map_err(|e| e.to_string())?;
        check!(
            folded.count_gates().two_qubit == 378,
            "folding 126 CNOTs at stretch 3 gave {}, expected 378",
            folded.count_gates().two_qubit
        );

        // the chain experiment logs its compiled count beside the
        // externally logged 126 (documented comparison, not equality)
        let mut chain_cfg = bundled_config("e4_chain").map_err(|e| e.to_string())?;
        chain_cfg.calibration = experiment::IDEAL_CALIBRATION.to_string();
        chain_cfg.shots = 16;
        let (chain, chain_info) =
            run_experiment_with_info(&chain_cfg).map_err(|e| e.to_string())?;
        let report = chain.gate_counts();
        check!(
            report.evolution_stretch_1.two_qubit == 120,
            "compiled full-horizon entangling count {} (expected 120 with merged \
             step boundaries)",
            report.evolution_stretch_1.two_qubit
        );
        check!(
            report.evolution_stretched.map(|e| e.two_qubit) == Some(360),
            "stretched entangling count should triple to 360"
        );
        check!(
            report.reference_two_qubit_count == Some(126),
            "externally logged reference count missing from the report"
        );
        let manifest =
            experiment::build_manifest(&chain, &chain_cfg, &chain_info).map_err(|e| e.to_string())?;
        check!(
            manifest.contains("\"reference_two_qubit_count\": 126"),
            "manifest does not log the reference count"
        );
        Ok(format!(
            "rerun byte-identical; fold 126 → 378; chain compiles 120 entangling \
             gates (logged beside external count 126, stretch-3: 360)"
        ))
    })();
    report("C10", outcome);
}
