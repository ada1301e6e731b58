//! Quench dynamics of a single excitation in the two-site-per-cell chain.
//!
//! The observable is the center of excitation difference (CED),
//! `P_d = Σ_x x (P_{a_x} - P_{b_x})`. Its long-time average and its value at
//! the critical times `t_c = (2s+1)π / (4 sqrt(J1² + J2²))` equal half the
//! winding number once the CED is measured from the starting cell `x0`:
//! `Σ_x (x - x0)(P_{a_x} - P_{b_x})`, which is what [`EvolutionTrace::centered`]
//! holds.

use serde::Serialize;

use crate::ensemble::{run_ensemble, SeedManifest};
use crate::model::{
    apply_disorder, build_couplings, realspace_hamiltonian, Boundary, ChainSpec, CouplingProfile,
    DisorderSpec,
};
use crate::numerics::{eigh, EigenSystem, StateVector};
use crate::{Error, Result};

pub const DEFAULT_T_MAX: f64 = 50.0;
pub const DEFAULT_DT: f64 = 0.02;
pub const SUBLATTICE_A: usize = 1;
pub const SUBLATTICE_B: usize = 2;

/// Observable samples on a time grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    /// Raw observable (CED or CE).
    pub values: Vec<f64>,
    /// Observable measured relative to the starting cell, when defined.
    pub centered: Option<Vec<f64>>,
    /// Ensemble standard error of `centered` (or `values` when there is no
    /// centered series).
    pub stderr: Option<Vec<f64>>,
    #[serde(skip)]
    pub snapshots: Option<Vec<StateVector>>,
}

impl EvolutionTrace {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                found: values.len(),
            });
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("times", "must be strictly increasing"));
        }
        Ok(Self {
            times,
            values,
            centered: None,
            stderr: None,
            snapshots: None,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Centered series if present, raw values otherwise.
    pub fn signal(&self) -> &[f64] {
        self.centered.as_deref().unwrap_or(&self.values)
    }
}

/// `+x` on the a-site and `-x` on the b-site of cell `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct CedWeights {
    weights: Vec<f64>,
}

impl CedWeights {
    pub fn new(spec: &ChainSpec) -> Result<Self> {
        require_two_site_cell(spec)?;
        let weights = (0..spec.sites())
            .map(|i| {
                let x = spec.cell_of(i) as f64;
                if i % 2 == 0 {
                    x
                } else {
                    -x
                }
            })
            .collect();
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        if psi.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                found: psi.len(),
            });
        }
        Ok(psi
            .amplitudes()
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| w * a.norm_sqr())
            .sum())
    }

    /// `Σ_x (x - origin)(P_a - P_b)`.
    pub fn centered_expectation(&self, psi: &StateVector, origin: usize) -> Result<f64> {
        let raw = self.expectation(psi)?;
        let imbalance: f64 = psi
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if i % 2 == 0 {
                    a.norm_sqr()
                } else {
                    -a.norm_sqr()
                }
            })
            .sum();
        Ok(raw - origin as f64 * imbalance)
    }
}

fn require_two_site_cell(spec: &ChainSpec) -> Result<()> {
    if spec.cell_size != 2 {
        return Err(Error::invalid(
            "p",
            format!(
                "CED is defined for two-site cells, got p = {}",
                spec.cell_size
            ),
        ));
    }
    Ok(())
}

/// Unit excitation on `(cell, sublattice)`, both 1-based.
pub fn initial_bulk_excitation(
    spec: &ChainSpec,
    cell: usize,
    sublattice: usize,
) -> Result<StateVector> {
    let site = spec.site_index(cell, sublattice)?;
    StateVector::basis(spec.sites(), site)
}

/// `<psi|P_d|psi>`.
pub fn ced_expectation(psi: &StateVector, spec: &ChainSpec) -> Result<f64> {
    CedWeights::new(spec)?.expectation(psi)
}

/// Starting cell used when none is given: `floor(N/2) + 1`, which keeps an
/// a-site start off the left edge even for `N = 2`.
pub fn default_start_cell(cells: usize) -> usize {
    cells / 2 + 1
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuenchParams {
    pub cell: usize,
    pub sublattice: usize,
    pub t_max: f64,
    /// Number of time samples including `t = 0` and `t = t_max`.
    pub samples: usize,
    pub keep_snapshots: bool,
}

impl QuenchParams {
    /// Default start and window for `spec`: a-site of the middle cell,
    /// `t_max = 50`, spacing `0.02`.
    pub fn for_chain(spec: &ChainSpec) -> Self {
        Self::with_spacing(
            default_start_cell(spec.cells),
            SUBLATTICE_A,
            DEFAULT_T_MAX,
            DEFAULT_DT,
        )
    }

    pub fn with_spacing(cell: usize, sublattice: usize, t_max: f64, dt: f64) -> Self {
        Self {
            cell,
            sublattice,
            t_max,
            samples: (t_max / dt).round() as usize + 1,
            keep_snapshots: false,
        }
    }

    fn times(&self) -> Result<Vec<f64>> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::invalid(
                "t_max",
                format!("{} must be positive", self.t_max),
            ));
        }
        if self.samples < 2 {
            return Err(Error::invalid("samples", "need at least two time samples"));
        }
        let n = self.samples - 1;
        Ok((0..=n).map(|i| self.t_max * i as f64 / n as f64).collect())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuenchRun {
    pub trace: EvolutionTrace,
    /// Estimated time for the excitation to reach the nearest chain end,
    /// from the largest group velocity `min(|J1|, |J2|)` (cells per unit
    /// time) of the clean chain, widened by `W/2` under disorder.
    pub edge_arrival: f64,
    /// A b-site start lies outside the relation between CED and winding.
    pub b_site_start: bool,
    pub ensemble: Option<SeedManifest>,
}

impl QuenchRun {
    pub fn edge_reached(&self) -> bool {
        self.trace
            .times
            .last()
            .is_some_and(|&t| t > self.edge_arrival)
    }
}

fn check_quench_spec(spec: &ChainSpec) -> Result<()> {
    spec.validate()?;
    require_two_site_cell(spec)?;
    if spec.boundary != Boundary::Open {
        return Err(Error::invalid(
            "boundary",
            "quench dynamics runs on open chains",
        ));
    }
    Ok(())
}

fn edge_arrival(spec: &ChainSpec, cell: usize, strength: f64) -> f64 {
    let clean = build_couplings(spec);
    let j = clean.bonds();
    let v = if j.len() >= 2 {
        j[0].abs().min(j[1].abs())
    } else {
        0.0
    } + strength / 2.0;
    let distance = (cell - 1).min(spec.cells - cell) as f64;
    if distance == 0.0 {
        0.0
    } else if v == 0.0 {
        f64::INFINITY
    } else {
        distance / v
    }
}

struct Realization {
    system: EigenSystem,
    weights: CedWeights,
}

impl Realization {
    fn new(spec: &ChainSpec, profile: &CouplingProfile) -> Result<Self> {
        Ok(Self {
            system: eigh(&realspace_hamiltonian(profile, spec.sites())?),
            weights: CedWeights::new(spec)?,
        })
    }

    fn sample(&self, psi0: &StateVector, t: f64, origin: usize) -> Result<(f64, f64, StateVector)> {
        let psi = self.system.propagate(psi0, t)?;
        let raw = self.weights.expectation(&psi)?;
        let centered = self.weights.centered_expectation(&psi, origin)?;
        Ok((raw, centered, psi))
    }
}

/// Evolves a single excitation under the static chain Hamiltonian and records
/// the CED on a uniform grid. With disorder the trace is the ensemble mean.
pub fn run_quench(
    spec: &ChainSpec,
    params: &QuenchParams,
    disorder: Option<&DisorderSpec>,
) -> Result<QuenchRun> {
    check_quench_spec(spec)?;
    let psi0 = initial_bulk_excitation(spec, params.cell, params.sublattice)?;
    let times = params.times()?;
    let clean = build_couplings(spec);

    let trace = match disorder {
        None => {
            let real = Realization::new(spec, &clean)?;
            let mut values = Vec::with_capacity(times.len());
            let mut centered = Vec::with_capacity(times.len());
            let mut snapshots = params.keep_snapshots.then(Vec::new);
            for &t in &times {
                let (raw, c, psi) = real.sample(&psi0, t, params.cell)?;
                values.push(raw);
                centered.push(c);
                if let Some(s) = snapshots.as_mut() {
                    s.push(psi);
                }
            }
            let mut trace = EvolutionTrace::new(times, values)?;
            trace.centered = Some(centered);
            trace.snapshots = snapshots;
            trace
        }
        Some(d) => {
            let n = times.len();
            let report = run_ensemble(d, |sample| {
                let real = Realization::new(spec, &apply_disorder(&clean, d, sample)?)?;
                let mut out = vec![0.0; 2 * n];
                for (i, &t) in times.iter().enumerate() {
                    let (raw, c, _) = real.sample(&psi0, t, params.cell)?;
                    out[i] = raw;
                    out[n + i] = c;
                }
                Ok(out)
            })?;
            let mut trace = EvolutionTrace::new(times.clone(), report.mean[..n].to_vec())?;
            trace.centered = Some(report.mean[n..].to_vec());
            trace.stderr = Some(report.stderr[n..].to_vec());
            trace
        }
    };

    let strength = disorder.map_or(0.0, |d| d.strength);
    Ok(QuenchRun {
        trace,
        edge_arrival: edge_arrival(spec, params.cell, strength),
        b_site_start: params.sublattice == SUBLATTICE_B,
        ensemble: disorder.map(SeedManifest::from),
    })
}

/// Trapezoid time average of the trace signal (centered CED when present)
/// over its full window. Twice this value estimates the winding number.
pub fn time_averaged_ced(trace: &EvolutionTrace) -> Result<f64> {
    let y = trace.signal();
    match trace.len() {
        0 => Err(Error::invalid("trace", "empty trace")),
        1 => Ok(y[0]),
        n => {
            let t = &trace.times;
            let area: f64 = (1..n)
                .map(|i| 0.5 * (y[i] + y[i - 1]) * (t[i] - t[i - 1]))
                .sum();
            Ok(area / (t[n - 1] - t[0]))
        }
    }
}

/// `t_c(s) = (2s+1)π / (4 sqrt(J1² + J2²))` for `s = 0..=s_max`.
pub fn critical_times(j1: f64, j2: f64, s_max: usize) -> Result<Vec<f64>> {
    let r = (j1 * j1 + j2 * j2).sqrt();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::invalid("couplings", "J1 and J2 are both zero"));
    }
    Ok((0..=s_max)
        .map(|s| (2 * s + 1) as f64 * std::f64::consts::PI / (4.0 * r))
        .collect())
}

/// Critical times of the clean couplings of `spec`.
pub fn critical_times_for(spec: &ChainSpec, s_max: usize) -> Result<Vec<f64>> {
    require_two_site_cell(spec)?;
    let j = crate::model::cell_bonds(spec, spec.theta);
    critical_times(j[0], j[1], s_max)
}

/// `2 P_d(t_c)` measured from the starting cell, averaged over `disorder`
/// when given.
pub fn winding_from_critical_time(
    spec: &ChainSpec,
    t_c: f64,
    cell: usize,
    sublattice: usize,
    disorder: Option<&DisorderSpec>,
) -> Result<f64> {
    check_quench_spec(spec)?;
    let psi0 = initial_bulk_excitation(spec, cell, sublattice)?;
    let clean = build_couplings(spec);
    let centered = match disorder {
        None => Realization::new(spec, &clean)?.sample(&psi0, t_c, cell)?.1,
        Some(d) => {
            let report = run_ensemble(d, |sample| {
                let real = Realization::new(spec, &apply_disorder(&clean, d, sample)?)?;
                Ok(vec![real.sample(&psi0, t_c, cell)?.1])
            })?;
            report.mean[0]
        }
    };
    Ok(2.0 * centered)
}
