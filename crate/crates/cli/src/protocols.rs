//! Protocol runners. Each produces its tables, a JSON result block, and the
//! named scalar metrics a sweep collects per grid point.

use serde_json::{json, Value};
use topochain::dynamics::{
    critical_times_for, run_quench, time_averaged_ced, winding_from_critical_time, QuenchParams,
};
use topochain::ensemble::SeedManifest;
use topochain::model::{cell_bonds, ChainSpec, DisorderSpec};
use topochain::pump::{run_pump, PumpSchedule, EIGENSTATE_TOL};
use topochain::topo::{
    band_spectrum, chern_numbers, winding_number_analytic, winding_number_integral,
};

use crate::config::{
    apply_parameter, echo, BandsConfig, ChernConfig, ExperimentConfig, ModelConfig, Protocol,
    PumpConfig, QuenchConfig, Sublattice, SweepConfig, WindingConfig,
};
use crate::error::{CliError, Result};
use crate::output::{Artifacts, Cell, Summary, Table};

/// Output of one protocol run before it is written.
#[derive(Clone, Debug, Default)]
pub struct Part {
    pub trace: Option<Table>,
    pub table: Option<Table>,
    pub results: Value,
    pub diagnostics: Value,
    pub metrics: Vec<(String, Cell)>,
    pub warnings: Vec<String>,
    /// Contract violations and their sweep status keyword.
    pub violations: Vec<(String, &'static str)>,
}

pub fn run(config: &ExperimentConfig) -> Result<Artifacts> {
    let disorder = config
        .disorder
        .as_ref()
        .map(|d| d.spec(config.seed))
        .transpose()?;
    let part = run_protocol(&config.protocol, &config.model, disorder.as_ref())?;
    let manifest = match &disorder {
        Some(d) => SeedManifest::from(d),
        None => SeedManifest::from(&DisorderSpec::new(0.0, config.seed, 1)?),
    };
    Ok(Artifacts {
        trace: part.trace,
        table: part.table,
        summary: Summary {
            tool: "topochain",
            version: env!("CARGO_PKG_VERSION"),
            protocol: config.protocol.name(),
            seed_manifest: manifest,
            results: part.results,
            diagnostics: part.diagnostics,
            warnings: part.warnings,
            violations: part.violations.into_iter().map(|(m, _)| m).collect(),
        },
        echo: echo(config),
    })
}

pub fn run_protocol(
    protocol: &Protocol,
    model: &ModelConfig,
    disorder: Option<&DisorderSpec>,
) -> Result<Part> {
    match protocol {
        Protocol::Quench(q) => quench(model, q, disorder),
        Protocol::Pump(p) => pump(model, p, disorder),
        Protocol::Winding(w) => winding(model, w),
        Protocol::Chern(c) => chern(model, c),
        Protocol::Bands(b) => bands(model, b),
        Protocol::Sweep(s) => sweep(model, s, disorder),
    }
}

fn resolved<T: Copy>(v: Option<T>) -> T {
    v.expect("config resolved before running")
}

fn trapezoid_average(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len();
    if n < 2 {
        return y.first().copied().unwrap_or(0.0);
    }
    let area: f64 = (1..n)
        .map(|i| 0.5 * (y[i] + y[i - 1]) * (t[i] - t[i - 1]))
        .sum();
    area / (t[n - 1] - t[0])
}

fn quench(model: &ModelConfig, q: &QuenchConfig, disorder: Option<&DisorderSpec>) -> Result<Part> {
    let lengths = q.lengths.clone().expect("resolved");
    let starts = q.start_cells.clone().expect("resolved");
    let sublattice: Sublattice = resolved(q.sublattice);
    let (t_max, dt) = (resolved(q.t_max), resolved(q.dt));
    let s_max = resolved(q.critical_s_max);
    let base = model.chain()?;

    let mut part = Part::default();
    let mut trace_cols: Vec<(String, Vec<f64>)> = Vec::new();
    let mut times = Vec::new();
    let mut table = Table::new([
        "L",
        "start_cell",
        "sublattice",
        "time_average",
        "winding_estimate",
        "t_c",
        "critical_readout",
        "edge_arrival",
        "edge_reached",
    ]);
    let mut per_length = Vec::new();
    let mut window_drift = 0.0f64;
    if sublattice == Sublattice::B {
        part.warnings.push(
            "b-site start: the time average and critical readout do not estimate the winding number"
                .into(),
        );
    }
    for (&l, &cell) in lengths.iter().zip(&starts) {
        let spec = ChainSpec::open(2, l / 2, base.g0, base.g1, base.theta)?;
        let params = QuenchParams::with_spacing(cell, sublattice.index(), t_max, dt);
        let run = run_quench(&spec, &params, disorder)?;
        let signal = run.trace.signal().to_vec();
        let average = time_averaged_ced(&run.trace)?;
        let mid = run.trace.len() / 2;
        let half = trapezoid_average(&run.trace.times[..=mid], &signal[..=mid]);
        window_drift = window_drift.max((average - half).abs());
        let t_c = critical_times_for(&spec, s_max)?;
        let readouts = t_c
            .iter()
            .map(|&t| winding_from_critical_time(&spec, t, cell, sublattice.index(), disorder))
            .collect::<topochain::Result<Vec<f64>>>()?;
        if run.edge_reached() {
            part.warnings.push(format!(
                "L={l}: excitation can reach the chain end at t={:.3} before t_max={t_max}",
                run.edge_arrival
            ));
        }
        table.push(vec![
            l.into(),
            cell.into(),
            Cell::Text(format!("{sublattice:?}").to_lowercase()),
            average.into(),
            (2.0 * average).into(),
            t_c[0].into(),
            readouts[0].into(),
            Cell::from(run.edge_arrival.is_finite().then_some(run.edge_arrival)),
            run.edge_reached().into(),
        ]);
        part.metrics
            .push((format!("time_average_L{l}"), average.into()));
        part.metrics
            .push((format!("critical_readout_L{l}"), readouts[0].into()));
        per_length.push(json!({
            "L": l,
            "start_cell": cell,
            "time_average": average,
            "winding_estimate": 2.0 * average,
            "critical_times": t_c,
            "critical_readouts": readouts,
            "edge_arrival": run.edge_arrival.is_finite().then_some(run.edge_arrival),
            "edge_reached": run.edge_reached(),
        }));
        times = run.trace.times.clone();
        trace_cols.push((format!("ced_L{l}"), signal));
        if let Some(se) = run.trace.stderr {
            trace_cols.push((format!("stderr_L{l}"), se));
        }
    }
    let mut trace = Table::new(
        std::iter::once("t".to_string()).chain(trace_cols.iter().map(|(n, _)| n.clone())),
    );
    for (i, &t) in times.iter().enumerate() {
        let mut row = vec![Cell::Num(t)];
        row.extend(trace_cols.iter().map(|(_, c)| Cell::Num(c[i])));
        trace.push(row);
    }
    let analytic = winding_number_analytic(base.g0, base.g1, base.theta).ok();
    part.results = json!({ "winding_analytic": analytic, "lengths": per_length });
    part.diagnostics = json!({
        "time_grid": { "t_max": t_max, "dt": dt, "samples": times.len() },
        "max_half_window_drift": window_drift,
    });
    part.trace = Some(trace);
    part.table = Some(table);
    Ok(part)
}

fn schedule_of(p: &PumpConfig) -> PumpSchedule {
    PumpSchedule {
        omega: resolved(p.omega),
        phi0: resolved(p.phi0),
        cycles: resolved(p.cycles),
        steps_per_cycle: resolved(p.steps_per_cycle),
        sample_every: resolved(p.sample_every),
    }
}

fn pump(model: &ModelConfig, p: &PumpConfig, disorder: Option<&DisorderSpec>) -> Result<Part> {
    let spec = model.chain()?;
    let schedule = schedule_of(p);
    let cell = resolved(p.cell);
    let bands = p.bands.clone().expect("resolved");
    let require_adiabatic = resolved(p.require_adiabatic);

    let mut part = Part::default();
    let mut table = Table::new([
        "band",
        "shift",
        "shift_stderr",
        "chern",
        "min_band_overlap",
        "adiabatic",
        "preparation_residual",
    ]);
    let mut cols: Vec<(String, Vec<f64>)> = Vec::new();
    let mut times = Vec::new();
    let mut per_band = Vec::new();
    let mut halving = Vec::new();
    let coarse = PumpSchedule {
        steps_per_cycle: (schedule.steps_per_cycle / 2).max(1),
        sample_every: (schedule.sample_every / 2).max(1),
        ..schedule.clone()
    };
    for &n in &bands {
        let r = run_pump(&spec, &schedule, cell, n, disorder)?;
        if r.preparation_residual > EIGENSTATE_TOL {
            part.warnings.push(format!(
                "band {n}: loaded cell state is not an eigenstate of the starting chain (residual {:.3e})",
                r.preparation_residual
            ));
        }
        if !r.adiabatic() {
            let msg = format!(
                "band {n}: state left its band subspace (min overlap {:.4} < 0.9)",
                r.min_band_overlap
            );
            if require_adiabatic {
                part.violations.push((msg, "non_adiabatic"));
            } else {
                part.warnings.push(msg);
            }
        }
        if schedule.steps_per_cycle >= 2 {
            let c = run_pump(&spec, &coarse, cell, n, None)?;
            let clean = if disorder.is_some() {
                run_pump(&spec, &schedule, cell, n, None)?.shift
            } else {
                r.shift
            };
            halving.push(json!({ "band": n, "clean_shift_delta": (clean - c.shift).abs() }));
        }
        table.push(vec![
            n.into(),
            r.shift.into(),
            r.shift_stderr.into(),
            r.chern_reference.into(),
            r.min_band_overlap.into(),
            r.adiabatic().into(),
            r.preparation_residual.into(),
        ]);
        part.metrics.push((format!("shift_n{n}"), r.shift.into()));
        part.metrics
            .push((format!("stderr_n{n}"), r.shift_stderr.into()));
        part.metrics
            .push((format!("chern_n{n}"), r.chern_reference.into()));
        part.metrics
            .push((format!("min_overlap_n{n}"), r.min_band_overlap.into()));
        per_band.push(json!({
            "band": n,
            "shift": r.shift,
            "shift_stderr": r.shift_stderr,
            "chern": r.chern_reference,
            "min_band_overlap": r.min_band_overlap,
            "adiabatic": r.adiabatic(),
        }));
        times = r.trace.times.clone();
        cols.push((format!("ce_n{n}"), r.trace.values.clone()));
        if let Some(se) = r.trace.stderr {
            cols.push((format!("stderr_n{n}"), se));
        }
    }
    let mut trace =
        Table::new(std::iter::once("t".to_string()).chain(cols.iter().map(|(c, _)| c.clone())));
    for (i, &t) in times.iter().enumerate() {
        let mut row = vec![Cell::Num(t)];
        row.extend(cols.iter().map(|(_, c)| Cell::Num(c[i])));
        trace.push(row);
    }
    part.results = json!({
        "cell": cell,
        "period": schedule.period(),
        "bands": per_band,
    });
    part.diagnostics = json!({
        "steps_per_cycle": schedule.steps_per_cycle,
        "step_halving": halving,
    });
    part.trace = Some(trace);
    part.table = Some(table);
    Ok(part)
}

fn winding(model: &ModelConfig, w: &WindingConfig) -> Result<Part> {
    let spec = model.chain()?;
    let j = cell_bonds(&spec, spec.theta);
    let mut part = Part::default();
    let mut table = Table::new(["g0", "g1", "theta", "J1", "J2", "analytic", "integral"]);
    let analytic = winding_number_analytic(spec.g0, spec.g1, spec.theta);
    let integral = winding_number_integral(j[0], j[1], resolved(w.nk));
    for r in [analytic.as_ref().err(), integral.as_ref().err()]
        .into_iter()
        .flatten()
    {
        part.violations.push((r.to_string(), "critical"));
    }
    let (analytic, integral) = (analytic.ok(), integral.ok());
    table.push(vec![
        spec.g0.into(),
        spec.g1.into(),
        spec.theta.into(),
        j[0].into(),
        j[1].into(),
        analytic.into(),
        integral.into(),
    ]);
    part.metrics = vec![
        ("winding_analytic".into(), analytic.into()),
        ("winding_integral".into(), integral.into()),
    ];
    part.results = json!({ "J1": j[0], "J2": j[1], "analytic": analytic, "integral": integral });
    part.diagnostics = json!({ "nk": w.nk });
    part.table = Some(table);
    Ok(part)
}

fn chern(model: &ModelConfig, c: &ChernConfig) -> Result<Part> {
    let spec = model.chain()?;
    let (nq, nt) = (resolved(c.nq), resolved(c.ntheta));
    let mut part = Part::default();
    let mut table = Table::new(["band", "chern", "raw"]);
    match chern_numbers(&spec, nq, nt) {
        Ok(set) => {
            for (b, (&c, &raw)) in set.chern.iter().zip(&set.raw).enumerate() {
                table.push(vec![(b + 1).into(), c.into(), raw.into()]);
                part.metrics.push((format!("C{}", b + 1), c.into()));
            }
            part.metrics
                .push(("min_gap".into(), set.min_gap.gap.into()));
            let doubled = if resolved(c.check_doubled) {
                let d = chern_numbers(&spec, 2 * nq, 2 * nt)?;
                Some(d.chern == set.chern)
            } else {
                None
            };
            if doubled == Some(false) {
                part.warnings
                    .push("Chern set differs on the doubled grid".into());
            }
            part.results = json!({
                "chern": set.chern,
                "total": set.total(),
                "raw": set.raw,
                "min_gap": set.min_gap,
            });
            part.diagnostics = json!({ "nq": nq, "ntheta": nt, "doubled_grid_agrees": doubled });
        }
        Err(e @ topochain::Error::GapClosed { .. }) => {
            for b in 1..=spec.cell_size {
                part.metrics.push((format!("C{b}"), Cell::Empty));
            }
            if let topochain::Error::GapClosed { q, theta, gap } = &e {
                part.metrics.push(("min_gap".into(), (*gap).into()));
                part.results =
                    json!({ "chern": null, "gap_closed": { "q": q, "theta": theta, "gap": gap } });
            }
            part.diagnostics = json!({ "nq": nq, "ntheta": nt });
            part.violations.push((e.to_string(), "gap_closed"));
        }
        Err(e) => return Err(e.into()),
    }
    part.table = Some(table);
    Ok(part)
}

fn bands(model: &ModelConfig, b: &BandsConfig) -> Result<Part> {
    let spec = model.chain()?;
    let s = band_spectrum(&spec, resolved(b.nq), b.ntheta)?;
    let p = s.bands();
    let mut table = Table::new(
        ["q".to_string(), "theta".to_string()]
            .into_iter()
            .chain((1..=p).map(|n| format!("E{n}"))),
    );
    for it in 0..s.ntheta() {
        for iq in 0..s.nq() {
            let mut row = vec![Cell::Num(s.qs[iq]), Cell::Num(s.theta_at(it))];
            row.extend(s.energies[s.point(iq, it)].iter().map(|&e| Cell::Num(e)));
            table.push(row);
        }
    }
    let ranges: Vec<_> = (0..p).map(|n| s.band_range(n)).collect();
    let gap = s.min_gap();
    Ok(Part {
        table: Some(table),
        results: json!({ "band_ranges": ranges, "min_gap": gap }),
        diagnostics: json!({ "nq": s.nq(), "ntheta": s.ntheta() }),
        ..Part::default()
    })
}

fn sweep(model: &ModelConfig, s: &SweepConfig, disorder: Option<&DisorderSpec>) -> Result<Part> {
    let mut rows = Vec::new();
    let mut columns: Vec<String> = Vec::new();
    let mut warnings = Vec::new();
    for &value in &s.values {
        let point_model = apply_parameter(model, s.parameter, value);
        let point_disorder = match (s.parameter, disorder) {
            (crate::config::SweepParameter::W, Some(d)) => {
                Some(DisorderSpec::new(value, d.seed, d.samples)?)
            }
            (_, d) => d.cloned(),
        };
        let part = run_protocol(&s.experiment, &point_model, point_disorder.as_ref())?;
        if columns.is_empty() {
            columns = part.metrics.iter().map(|(n, _)| n.clone()).collect();
        }
        let status = part
            .violations
            .first()
            .map_or("ok", |(_, keyword)| *keyword);
        warnings.extend(
            part.warnings
                .iter()
                .map(|w| format!("{}={value}: {w}", s.parameter.column())),
        );
        rows.push((value, part.metrics, status));
    }
    let mut table = Table::new(
        std::iter::once(s.parameter.column().to_string())
            .chain(columns.iter().cloned())
            .chain(std::iter::once("status".to_string())),
    );
    let mut results = Vec::new();
    for (value, metrics, status) in rows {
        let mut row = vec![Cell::Num(value)];
        for c in &columns {
            row.push(
                metrics
                    .iter()
                    .find(|(n, _)| n == c)
                    .map_or(Cell::Empty, |(_, v)| v.clone()),
            );
        }
        row.push(status.into());
        results.push(json!({ "value": value, "status": status }));
        table.push(row);
    }
    Ok(Part {
        table: Some(table),
        results: json!({
            "parameter": s.parameter.column(),
            "experiment": s.experiment.name(),
            "points": results,
        }),
        diagnostics: json!({ "points": s.values.len() }),
        warnings,
        ..Part::default()
    })
}

/// Fails with the first contract violation of a finished run.
pub fn check_contract(artifacts: &Artifacts) -> Result<()> {
    match artifacts.summary.violations.first() {
        Some(v) => Err(CliError::Numerical(v.clone())),
        None => Ok(()),
    }
}
