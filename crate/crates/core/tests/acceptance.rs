//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topochain::dynamics::{
    critical_times_for, default_start_cell, run_quench, time_averaged_ced,
    winding_from_critical_time, QuenchParams, SUBLATTICE_A,
};
use topochain::model::{
    bloch_hamiltonian, build_couplings, cell_bonds, realspace_hamiltonian, Boundary, ChainSpec,
    DisorderSpec,
};
use topochain::numerics::{
    eigh, evolve_schedule_observed, evolve_spectral, HermitianMatrix, StateVector, C64,
};
use topochain::pump::{prepare_pump_state, run_pump, PumpSchedule};
use topochain::topo::{
    chern_numbers, chern_numbers_with_gauge, winding_number_analytic, winding_number_integral,
    DEFAULT_WINDING_GRID,
};

const QUENCH_LENGTHS: [usize; 3] = [4, 8, 16];
const QUENCH_SEED: u64 = 20_240_601;
const PUMP_SEED: u64 = 7;

struct Outcome {
    label: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
    budget: Option<Duration>,
}

fn run<F>(label: &'static str, budget: Option<Duration>, check: F) -> Outcome
where
    F: FnOnce(&mut String) -> bool,
{
    let start = Instant::now();
    let mut detail = String::new();
    let mut passed = check(&mut detail);
    let elapsed = start.elapsed();
    if let Some(b) = budget {
        if elapsed > b {
            passed = false;
            let _ = write!(detail, " runtime {:.2?} over budget {:.0?}", elapsed, b);
        }
    }
    Outcome {
        label,
        passed,
        detail,
        elapsed,
        budget,
    }
}

fn ssh(length: usize, g0: f64, g1: f64, theta: f64) -> ChainSpec {
    ChainSpec::open(2, length / 2, g0, g1, theta).unwrap()
}

fn criterion_1(out: &mut String) -> bool {
    let mut ok = winding_number_analytic(1.0, 1.0, 0.1 * PI).unwrap() == 1
        && winding_number_analytic(1.0, 1.0, 0.9 * PI).unwrap() == 0;
    let _ = write!(out, "analytic (0.1π, 0.9π) ok={ok};");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut draws = 0;
    while draws < 200 {
        let g0 = rng.random_range(-2.0..2.0);
        let g1 = rng.random_range(-2.0..2.0);
        let theta = rng.random_range(0.0..TAU);
        let s = ssh(4, g0, g1, theta);
        let j = cell_bonds(&s, theta);
        let (lo, hi) = (j[0].abs().min(j[1].abs()), j[0].abs().max(j[1].abs()));
        if hi == 0.0 || lo / hi > 0.9 {
            continue;
        }
        draws += 1;
        let exact = winding_number_analytic(g0, g1, theta).unwrap() as f64;
        let numeric = winding_number_integral(j[0], j[1], DEFAULT_WINDING_GRID).unwrap();
        worst = worst.max((numeric - exact).abs());
    }
    ok &= worst <= 1e-6;
    let _ = write!(
        out,
        " integral vs analytic over {draws} draws max err {worst:.2e}"
    );
    ok
}

fn criterion_2(out: &mut String) -> bool {
    let decoupled = ChainSpec::open(3, 4, 0.0, 1.0, 0.0).unwrap();
    let uniform = ChainSpec::open(3, 4, 1.0, 1.0, 0.0).unwrap();
    let a = chern_numbers(&decoupled, 24, 24).unwrap().chern;
    let b = chern_numbers(&uniform, 24, 24).unwrap().chern;
    let a48 = chern_numbers(&decoupled, 48, 48).unwrap().chern;
    let b48 = chern_numbers(&uniform, 48, 48).unwrap().chern;
    let _ = write!(
        out,
        "g0=0: {a:?} (48: {a48:?}); g0=g1=1: {b:?} (48: {b48:?})"
    );
    a == vec![2, -4, 2]
        && b.iter().sum::<i32>() == 0
        && b[1] == 2
        && b[0] == -1
        && a48 == a
        && b48 == b
}

/// Offset-corrected time averages and critical-time readouts per length.
fn quench_table(theta: f64, disorder: Option<&DisorderSpec>) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let mut averages = Vec::new();
    let mut readouts = Vec::new();
    let mut edges = Vec::new();
    for &l in &QUENCH_LENGTHS {
        let s = ssh(l, 1.0, 1.0, theta);
        let run = run_quench(&s, &QuenchParams::for_chain(&s), disorder).unwrap();
        averages.push(time_averaged_ced(&run.trace).unwrap());
        edges.push(run.edge_reached());
        let t_c = critical_times_for(&s, 0).unwrap()[0];
        let cell = default_start_cell(s.cells);
        readouts.push(winding_from_critical_time(&s, t_c, cell, SUBLATTICE_A, disorder).unwrap());
    }
    (averages, readouts, edges)
}

fn spread(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min
}

fn quench_centers(out: &mut String, disorder: Option<&DisorderSpec>, tol: f64) -> bool {
    let mut ok = true;
    for (theta, target) in [(0.1 * PI, 0.5), (0.9 * PI, 0.0)] {
        let (avg, _, edges) = quench_table(theta, disorder);
        let good = avg.iter().all(|a| (a - target).abs() <= tol);
        ok &= good;
        let _ = write!(
            out,
            "θ={:.1}π avg {:?} (target {target}, edge flags {edges:?}); ",
            theta / PI,
            avg.iter().map(|a| format!("{a:.4}")).collect::<Vec<_>>()
        );
    }
    ok
}

fn critical_readout(
    out: &mut String,
    disorder: Option<&DisorderSpec>,
    tol: f64,
    agree: f64,
) -> bool {
    let mut ok = true;
    for (theta, nu) in [(0.1 * PI, 1.0), (0.9 * PI, 0.0)] {
        let (_, r, _) = quench_table(theta, disorder);
        let good = r.iter().all(|x| (x - nu).abs() <= tol) && spread(&r) <= agree;
        ok &= good;
        let _ = write!(
            out,
            "θ={:.1}π 2P(t_c) {:?} (ν={nu}, spread {:.4}); ",
            theta / PI,
            r.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>(),
            spread(&r)
        );
    }
    ok
}

fn pump_chain(cells: usize) -> ChainSpec {
    ChainSpec::open(3, cells, 1.0, 1.0, PI).unwrap()
}

const CHERN: [f64; 3] = [-1.0, 2.0, -1.0];

fn pump_residuals(cells: usize, cell: usize, omega: f64, base: f64) -> Vec<(f64, bool)> {
    let s = pump_chain(cells);
    // Same integrator step at every ramp rate.
    let steps = (4096.0 * base / omega).round() as usize;
    let schedule = PumpSchedule {
        omega,
        steps_per_cycle: steps,
        sample_every: steps / 128,
        ..PumpSchedule::default()
    };
    (1..=3)
        .map(|n| {
            let r = run_pump(&s, &schedule, cell, n, None).unwrap();
            (r.shift - CHERN[n - 1], r.adiabatic())
        })
        .collect()
}

fn criterion_6a(out: &mut String) -> bool {
    let r = pump_residuals(6, 3, 0.39, 0.39);
    let _ = write!(
        out,
        "L=18 Ω=0.39 shifts {:?}",
        r.iter()
            .zip(CHERN)
            .map(|((d, _), c)| format!("{:.4}", c + d))
            .collect::<Vec<_>>()
    );
    r.iter().all(|(d, _)| d.abs() <= 0.1)
}

fn halving(out: &mut String, cells: usize, cell: usize) -> bool {
    let full = pump_residuals(cells, cell, 0.39, 0.39);
    let half = pump_residuals(cells, cell, 0.195, 0.39);
    let mut ok = true;
    for n in 0..3 {
        let tighter = half[n].0.abs() < full[n].0.abs();
        ok &= tighter;
        let _ = write!(
            out,
            "n={}: |res| {:.4} -> {:.4}; ",
            n + 1,
            full[n].0.abs(),
            half[n].0.abs()
        );
    }
    ok
}

fn criterion_7(out: &mut String) -> bool {
    let s = pump_chain(6);
    let schedule = PumpSchedule::default();
    let mut ok = true;
    for w in [0.0, 0.05, 0.1] {
        let d = DisorderSpec::new(w, PUMP_SEED, 50).unwrap();
        for n in [1, 2] {
            let r = run_pump(&s, &schedule, 3, n, Some(&d)).unwrap();
            let good = (r.shift - CHERN[n - 1]).abs() <= 0.1;
            ok &= good;
            let _ = write!(
                out,
                "W={w} n={n}: {:.4}±{:.4}; ",
                r.shift,
                r.shift_stderr.unwrap_or(0.0)
            );
        }
    }
    ok
}

fn gell_mann_form(j: [f64; 3], k: f64) -> DMatrix<C64> {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let l1 = DMatrix::from_row_slice(3, 3, &[z, one, z, one, z, z, z, z, z]);
    let l4 = DMatrix::from_row_slice(3, 3, &[z, z, one, z, z, z, one, z, z]);
    let l5 = DMatrix::from_row_slice(3, 3, &[z, z, -i, z, z, z, i, z, z]);
    let l6 = DMatrix::from_row_slice(3, 3, &[z, z, z, z, z, one, z, one, z]);
    l1 * C64::new(j[0], 0.0)
        + l4 * C64::new(j[2] * k.cos(), 0.0)
        + l5 * C64::new(-j[2] * k.sin(), 0.0)
        + l6 * C64::new(j[1], 0.0)
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> HermitianMatrix {
    let a = DMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    HermitianMatrix::new((&a + a.adjoint()) * C64::new(0.5, 0.0)).unwrap()
}

fn trace_csv(values: &[(f64, f64)]) -> String {
    let mut s = String::from("t,ced\n");
    for (t, v) in values {
        let _ = writeln!(s, "{t:.16e},{v:.16e}");
    }
    s
}

fn criterion_8(out: &mut String) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    // Unitarity.
    let mut unitarity = 0.0f64;
    for _ in 0..20 {
        let h = random_hermitian(&mut rng, 16);
        let site = rng.random_range(0..16);
        let psi = StateVector::basis(16, site).unwrap();
        let t = rng.random_range(0.0..100.0);
        unitarity = unitarity.max((evolve_spectral(&h, &psi, t).unwrap().norm() - 1.0).abs());
    }
    let chain = pump_chain(6);
    let schedule = PumpSchedule::default();
    let start = prepare_pump_state(&chain, 3, 2).unwrap().state;
    evolve_schedule_observed(
        |t| {
            let s = chain.with_theta(schedule.theta_at(t));
            realspace_hamiltonian(&build_couplings(&s), s.sites())
        },
        &start,
        0.0,
        schedule.period(),
        512,
        |_, _, psi| {
            unitarity = unitarity.max((psi.norm() - 1.0).abs());
            Ok(())
        },
    )
    .unwrap();

    // Bloch versus real-space spectra on periodic rings.
    let mut spectral = 0.0f64;
    for (p, theta) in [(2usize, 0.3), (3, 1.1), (4, 2.5)] {
        let cells = 8;
        let s = ChainSpec::new(p, cells, 0.7, 1.0, theta, Boundary::Periodic).unwrap();
        let ring = eigh(&realspace_hamiltonian(&build_couplings(&s), s.sites()).unwrap());
        let mut bloch: Vec<f64> = (0..cells)
            .flat_map(|m| {
                let q = TAU * m as f64 / cells as f64;
                eigh(&bloch_hamiltonian(&s, q, theta).unwrap())
                    .eigenvalues
                    .iter()
                    .copied()
                    .collect::<Vec<_>>()
            })
            .collect();
        bloch.sort_by(f64::total_cmp);
        for (a, b) in ring.eigenvalues.iter().zip(&bloch) {
            spectral = spectral.max((a - b).abs());
        }
    }

    // Three-site Bloch matrix against its Gell-Mann expansion.
    let mut gell_mann = 0.0f64;
    for _ in 0..200 {
        let g0 = rng.random_range(-2.0..2.0);
        let theta = rng.random_range(0.0..TAU);
        let q = rng.random_range(0.0..TAU);
        let s = ChainSpec::open(3, 4, g0, 1.0, theta).unwrap();
        let j = cell_bonds(&s, theta);
        let h = bloch_hamiltonian(&s, q, theta).unwrap();
        let diff = h.as_matrix() - gell_mann_form([j[0], j[1], j[2]], -q);
        gell_mann = gell_mann.max(diff.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }

    // Chern numbers under random Bloch-state phases.
    let s = ChainSpec::open(3, 4, 1.0, 1.0, 0.0).unwrap();
    let reference = chern_numbers(&s, 24, 24).unwrap().chern;
    let phases: Vec<f64> = (0..24 * 24 * 3)
        .map(|_| rng.random_range(0.0..TAU))
        .collect();
    let gauged = chern_numbers_with_gauge(&s, 24, 24, |iq, it, b| phases[(it * 24 + iq) * 3 + b])
        .unwrap()
        .chern;

    // Seeded ensembles give byte-identical CSV.
    let d = DisorderSpec::new(0.2, QUENCH_SEED, 12).unwrap();
    let spec = ssh(8, 1.0, 1.0, 0.1 * PI);
    let csv = || {
        let r = run_quench(&spec, &QuenchParams::for_chain(&spec), Some(&d)).unwrap();
        trace_csv(
            &r.trace
                .times
                .iter()
                .copied()
                .zip(r.trace.signal().iter().copied())
                .collect::<Vec<_>>(),
        )
    };
    let deterministic = csv() == csv();

    let _ = write!(
        out,
        "unitarity {unitarity:.1e}, bloch/ring {spectral:.1e}, gell-mann {gell_mann:.1e}, \
         gauge {:?}=={:?}, csv identical {deterministic}",
        gauged, reference
    );
    unitarity <= 1e-9
        && spectral <= 1e-9
        && gell_mann <= 1e-12
        && gauged == reference
        && deterministic
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let disorder = DisorderSpec::new(0.2, QUENCH_SEED, 30).unwrap();
    let outcomes = vec![
        run("1 winding phase diagram", Some(secs(1)), criterion_1),
        run("2 chern sets", Some(secs(5)), criterion_2),
        run("3 quench oscillation center", Some(secs(10)), |o| {
            quench_centers(o, None, 0.05)
        }),
        run("4 critical-time readout", Some(secs(10)), |o| {
            critical_readout(o, None, 0.05, 0.02)
        }),
        run("5 disorder-robust quench", None, |o| {
            quench_centers(o, Some(&disorder), 0.1) & critical_readout(o, Some(&disorder), 0.1, 0.1)
        }),
        run("6 clean pump quantization", Some(secs(30)), criterion_6a),
        run(
            "6 halving Ω tightens residuals (L=18)",
            Some(secs(30)),
            |o| halving(o, 6, 3),
        ),
        run(
            "6 halving Ω companion on a longer chain (N=12)",
            None,
            |o| halving(o, 12, 6),
        ),
        run("7 disorder plateau", Some(secs(300)), criterion_7),
        run("8 property suites", None, criterion_8),
    ];
    let mut failed = 0;
    for o in &outcomes {
        let budget = o
            .budget
            .map(|b| format!(" / {:.0?}", b))
            .unwrap_or_default();
        println!(
            "{} criterion {} [{:.2?}{}] {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.label,
            o.elapsed,
            budget,
            o.detail.trim_end_matches([';', ' '])
        );
        failed += usize::from(!o.passed);
    }
    println!("{} passed, {} failed", outcomes.len() - failed, failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
