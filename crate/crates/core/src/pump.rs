//! Adiabatic pumping of an entangled unit-cell state through a `θ(t)` ramp.
//!
//! At `θ = π` with `g0 = g1` the last bond of every cell vanishes and the
//! three-site cells decouple. One cell is loaded with a cell eigenstate
//! `χ_n`, then `θ(t) = Ωt + φ0` is swept through full periods
//! `T_p = 2π/Ω`. The center of excitation `Σ_x x P_x` moves by the Chern
//! number of band `n` per period.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2, TAU};

use nalgebra::DVector;
use serde::Serialize;

use crate::dynamics::EvolutionTrace;
use crate::ensemble::{run_ensemble, SeedManifest};
use crate::model::{
    build_couplings, realspace_hamiltonian, ChainSpec, CouplingProfile, DisorderSpec,
};
use crate::numerics::{eigh, evolve_schedule_observed, HermitianMatrix, StateVector, C64};
use crate::topo::{chern_numbers, DEFAULT_CHERN_GRID};
use crate::{Error, Result};

pub const DEFAULT_OMEGA: f64 = 0.39;
pub const DEFAULT_STEPS_PER_CYCLE: usize = 4096;
pub const DEFAULT_SAMPLE_EVERY: usize = 32;
/// Smallest acceptable weight of the evolving state in its band subspace.
pub const ADIABATIC_THRESHOLD: f64 = 0.9;
/// Residual below which a prepared state counts as an exact eigenstate.
pub const EIGENSTATE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PumpSchedule {
    /// Ramp rate Ω in units of `g1`.
    pub omega: f64,
    /// Initial phase φ0.
    pub phi0: f64,
    pub cycles: usize,
    pub steps_per_cycle: usize,
    /// Record the CE every this many integrator steps.
    pub sample_every: usize,
}

impl Default for PumpSchedule {
    fn default() -> Self {
        Self {
            omega: DEFAULT_OMEGA,
            phi0: PI,
            cycles: 1,
            steps_per_cycle: DEFAULT_STEPS_PER_CYCLE,
            sample_every: DEFAULT_SAMPLE_EVERY,
        }
    }
}

impl PumpSchedule {
    pub fn with_omega(omega: f64) -> Self {
        Self {
            omega,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::invalid(
                "omega",
                format!("{} must be positive", self.omega),
            ));
        }
        if !self.phi0.is_finite() {
            return Err(Error::invalid("phi0", "must be finite"));
        }
        if self.cycles == 0 || self.steps_per_cycle == 0 || self.sample_every == 0 {
            return Err(Error::invalid(
                "schedule",
                "cycles, steps_per_cycle and sample_every must be positive",
            ));
        }
        Ok(())
    }

    /// `T_p = 2π/Ω`.
    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    pub fn duration(&self) -> f64 {
        self.cycles as f64 * self.period()
    }

    pub fn total_steps(&self) -> usize {
        self.cycles * self.steps_per_cycle
    }

    pub fn theta_at(&self, t: f64) -> f64 {
        self.omega * t + self.phi0
    }
}

/// Distance of `theta` from `π` modulo `2π`.
fn distance_from_pi(theta: f64) -> f64 {
    let d = (theta - PI).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Eigenstates of an isolated three-site cell with equal bonds, amplitudes on
/// sites `(a, b, c)`: `(1, ∓√2, 1)/2` for `n = 1, 3` and `(1, 0, -1)/√2` for
/// `n = 2`, at energies `-√2 J`, `0`, `+√2 J`.
pub fn chi_state(n: usize) -> Result<StateVector> {
    let amps = match n {
        1 => [0.5, -FRAC_1_SQRT_2, 0.5],
        2 => [FRAC_1_SQRT_2, 0.0, -FRAC_1_SQRT_2],
        3 => [0.5, FRAC_1_SQRT_2, 0.5],
        _ => return Err(Error::invalid("band", format!("n = {n} not in 1..=3"))),
    };
    StateVector::from_slice(&amps.map(|a| C64::new(a, 0.0)))
}

/// Energy of `χ_n` for bond strength `j`.
pub fn chi_energy(n: usize, j: f64) -> Result<f64> {
    match n {
        1 => Ok(-SQRT_2 * j),
        2 => Ok(0.0),
        3 => Ok(SQRT_2 * j),
        _ => Err(Error::invalid("band", format!("n = {n} not in 1..=3"))),
    }
}

#[derive(Clone, Debug)]
pub struct PreparedState {
    pub state: StateVector,
    pub band: usize,
    pub cell: usize,
    /// `<psi|H|psi>` at the preparation phase.
    pub energy: f64,
    /// `||H psi - E psi||` at the preparation phase.
    pub residual: f64,
}

impl PreparedState {
    /// False when the chain is not at its isolated-cell point, in which case
    /// the pump starts from a superposition of bands.
    pub fn is_eigenstate(&self) -> bool {
        self.residual <= EIGENSTATE_TOL
    }
}

fn embed(spec: &ChainSpec, cell: usize, local: &StateVector) -> Result<StateVector> {
    let start = spec.site_index(cell, 1)?;
    let mut v = DVector::zeros(spec.sites());
    for (i, a) in local.amplitudes().iter().enumerate() {
        v[start + i] = *a;
    }
    StateVector::new(v)
}

fn prepared(
    spec: &ChainSpec,
    cell: usize,
    band: usize,
    state: StateVector,
) -> Result<PreparedState> {
    let h = realspace_hamiltonian(&build_couplings(spec), spec.sites())?;
    let energy = h.expectation(&state)?;
    let h_psi = h.apply(&state)?;
    let residual = (h_psi - state.as_vector() * C64::new(energy, 0.0)).norm();
    Ok(PreparedState {
        state,
        band,
        cell,
        energy,
        residual,
    })
}

/// Loads `χ_n` into `cell` of a three-site-per-cell chain at `spec.theta`.
pub fn prepare_pump_state(spec: &ChainSpec, cell: usize, n: usize) -> Result<PreparedState> {
    spec.validate()?;
    if spec.cell_size != 3 {
        return Err(Error::invalid(
            "p",
            format!("χ states need three-site cells, got p = {}", spec.cell_size),
        ));
    }
    let state = embed(spec, cell, &chi_state(n)?)?;
    prepared(spec, cell, n, state)
}

/// `n`-th eigenstate (ascending energy) of the isolated `p`-site cell with
/// bonds `J_1..J_{p-1}`, loaded into `cell`. Matches [`prepare_pump_state`]
/// up to a global phase for `p = 3`.
pub fn prepare_cell_eigenstate(spec: &ChainSpec, cell: usize, n: usize) -> Result<PreparedState> {
    spec.validate()?;
    let p = spec.cell_size;
    if n == 0 || n > p {
        return Err(Error::invalid("band", format!("n = {n} not in 1..={p}")));
    }
    let bonds: Vec<f64> = (1..p).map(|s| spec.coupling_at(s, spec.theta)).collect();
    let cell_h = realspace_hamiltonian(
        &CouplingProfile::new(bonds, crate::model::Boundary::Open),
        p,
    )?;
    let local = StateVector::normalized(eigh(&cell_h).vector(n - 1))?;
    let state = embed(spec, cell, &local)?;
    prepared(spec, cell, n, state)
}

/// Center of excitation `Σ_x x Σ_s |psi_{x,s}|²`.
pub fn ce_expectation(psi: &StateVector, spec: &ChainSpec) -> Result<f64> {
    if psi.len() != spec.sites() {
        return Err(Error::DimensionMismatch {
            expected: spec.sites(),
            found: psi.len(),
        });
    }
    Ok(psi
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| spec.cell_of(i) as f64 * a.norm_sqr())
        .sum())
}

#[derive(Clone, Debug, Serialize)]
pub struct PumpResult {
    /// CE samples; ensemble mean under disorder.
    pub trace: EvolutionTrace,
    /// Last minus first trace value.
    pub shift: f64,
    pub shift_stderr: Option<f64>,
    pub band: usize,
    pub cell: usize,
    /// Chern number of band `band` of the clean chain, when its gaps are open.
    pub chern_reference: Option<i32>,
    /// Smallest weight of the state in the instantaneous band-`band`
    /// subspace seen at any sample (and any realization).
    pub min_band_overlap: f64,
    pub preparation_residual: f64,
    pub ensemble: Option<SeedManifest>,
}

impl PumpResult {
    pub fn adiabatic(&self) -> bool {
        self.min_band_overlap >= ADIABATIC_THRESHOLD
    }
}

/// Weight of `psi` on the `band`-th block of `cells` eigenvectors of `h`,
/// counted in ascending energy. On a finite chain this is the instantaneous
/// band subspace, with states pushed into the gaps counted with the block
/// they belong to.
fn band_overlap(h: &HermitianMatrix, psi: &StateVector, band: usize, cells: usize) -> Result<f64> {
    let es = eigh(h);
    let coeffs = es.eigenvectors.ad_mul(psi.as_vector());
    Ok(coeffs
        .iter()
        .skip((band - 1) * cells)
        .take(cells)
        .map(|c| c.norm_sqr())
        .sum())
}

struct Realized {
    times: Vec<f64>,
    ce: Vec<f64>,
    min_overlap: f64,
}

fn pump_realization(
    spec: &ChainSpec,
    schedule: &PumpSchedule,
    initial: &StateVector,
    band: usize,
    offsets: Option<&[f64]>,
) -> Result<Realized> {
    let hamiltonian = |t: f64| -> Result<HermitianMatrix> {
        let profile = build_couplings(&spec.with_theta(schedule.theta_at(t)));
        let profile = match offsets {
            Some(d) => profile.perturbed(d)?,
            None => profile,
        };
        realspace_hamiltonian(&profile, spec.sites())
    };
    let total = schedule.total_steps();
    let mut times = Vec::new();
    let mut ce = Vec::new();
    let mut min_overlap = f64::INFINITY;
    evolve_schedule_observed(
        hamiltonian,
        initial,
        0.0,
        schedule.duration(),
        total,
        |step, t, psi| {
            if step % schedule.sample_every == 0 || step == total {
                times.push(t);
                ce.push(ce_expectation(psi, spec)?);
                let overlap = band_overlap(&hamiltonian(t)?, psi, band, spec.cells)?;
                min_overlap = min_overlap.min(overlap);
            }
            Ok(())
        },
    )?;
    Ok(Realized {
        times,
        ce,
        min_overlap,
    })
}

/// Pumps the band-`n` cell state loaded into `cell` through
/// `schedule.cycles` periods of the `θ` ramp. Under disorder the CE trace is
/// averaged over the ensemble, each realization carrying static bond offsets.
pub fn run_pump(
    spec: &ChainSpec,
    schedule: &PumpSchedule,
    cell: usize,
    n: usize,
    disorder: Option<&DisorderSpec>,
) -> Result<PumpResult> {
    spec.validate()?;
    schedule.validate()?;
    if distance_from_pi(schedule.phi0) > 1e-9 {
        return Err(Error::invalid(
            "phi0",
            format!(
                "{} must be π so that the loaded cell state is an eigenstate",
                schedule.phi0
            ),
        ));
    }
    let start = spec.with_theta(schedule.phi0);
    let prep = if spec.cell_size == 3 {
        prepare_pump_state(&start, cell, n)?
    } else {
        prepare_cell_eigenstate(&start, cell, n)?
    };
    let chern_reference = chern_numbers(spec, DEFAULT_CHERN_GRID, DEFAULT_CHERN_GRID)
        .ok()
        .map(|set| set.chern[n - 1]);
    let clean = build_couplings(spec);

    let (trace, shift_stderr, min_overlap) = match disorder {
        None => {
            let r = pump_realization(spec, schedule, &prep.state, n, None)?;
            (EvolutionTrace::new(r.times, r.ce)?, None, r.min_overlap)
        }
        Some(d) => {
            let report = run_ensemble(d, |sample| {
                let offsets = d.offsets(sample, clean.len())?;
                let r = pump_realization(spec, schedule, &prep.state, n, Some(&offsets))?;
                let mut out = r.ce;
                out.push(r.min_overlap);
                Ok(out)
            })?;
            let m = report.mean.len() - 1;
            let times = pump_sample_times(schedule);
            let min_overlap = report
                .samples
                .iter()
                .map(|s| s[m])
                .fold(f64::INFINITY, f64::min);
            let shifts: Vec<f64> = report.samples.iter().map(|s| s[m - 1] - s[0]).collect();
            let mut trace = EvolutionTrace::new(times, report.mean[..m].to_vec())?;
            trace.stderr = Some(report.stderr[..m].to_vec());
            (trace, Some(stderr_of(&shifts)), min_overlap)
        }
    };
    let shift = trace.values[trace.len() - 1] - trace.values[0];
    Ok(PumpResult {
        trace,
        shift,
        shift_stderr,
        band: n,
        cell,
        chern_reference,
        min_band_overlap: min_overlap,
        preparation_residual: prep.residual,
        ensemble: disorder.map(SeedManifest::from),
    })
}

fn pump_sample_times(schedule: &PumpSchedule) -> Vec<f64> {
    let total = schedule.total_steps();
    let dt = schedule.duration() / total as f64;
    (0..=total)
        .filter(|&s| s % schedule.sample_every == 0 || s == total)
        .map(|s| {
            if s == total {
                schedule.duration()
            } else {
                s as f64 * dt
            }
        })
        .collect()
}

fn stderr_of(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = crate::ensemble::pairwise_sum(xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    (crate::ensemble::pairwise_sum(&dev) / (n - 1.0) / n).sqrt()
}

/// One row of a disorder sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlateauPoint {
    pub strength: f64,
    pub shift: f64,
    pub stderr: f64,
    pub chern_reference: Option<i32>,
    pub min_band_overlap: f64,
}

impl PlateauPoint {
    /// Within `0.1` of the Chern number.
    pub fn on_plateau(&self) -> bool {
        self.chern_reference
            .is_some_and(|c| (self.shift - c as f64).abs() <= 0.1)
    }
}

/// Disorder-averaged pump shift for each strength in `strengths`, reusing
/// the seed and sample count of `base`.
pub fn disorder_plateau_sweep(
    spec: &ChainSpec,
    schedule: &PumpSchedule,
    cell: usize,
    n: usize,
    strengths: &[f64],
    base: &DisorderSpec,
) -> Result<Vec<PlateauPoint>> {
    if strengths.is_empty() {
        return Err(Error::invalid("W", "no disorder strengths given"));
    }
    strengths
        .iter()
        .map(|&w| {
            let d = DisorderSpec::new(w, base.seed, base.samples)?;
            let r = run_pump(spec, schedule, cell, n, Some(&d))?;
            Ok(PlateauPoint {
                strength: w,
                shift: r.shift,
                stderr: r.shift_stderr.unwrap_or(0.0),
                chern_reference: r.chern_reference,
                min_band_overlap: r.min_band_overlap,
            })
        })
        .collect()
}
