//! Band structures and topological invariants.
//!
//! The winding number of the two-band chain is available in closed form and
//! as a discretized integral of `n × ∂_q n`. Chern numbers of the
//! `p`-band chain on the synthetic `(q, θ)` torus use link variables built
//! from overlaps of neighbouring Bloch states, which is gauge invariant and
//! integer valued on any grid fine enough to resolve the curvature.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::model::{bloch_hamiltonian, ChainSpec};
use crate::numerics::{eigh, C64};
use crate::{Error, Result};

/// Smallest band gap accepted by [`chern_numbers`].
pub const MIN_CHERN_GAP: f64 = 1e-8;
/// Default grid for [`winding_number_integral`].
pub const DEFAULT_WINDING_GRID: usize = 256;
/// Default grid edge for [`chern_numbers`].
pub const DEFAULT_CHERN_GRID: usize = 24;

const CRITICAL_TOL: f64 = 1e-12;

/// `ν = (1 + sgn(g0 g1 cos θ)) / 2`.
pub fn winding_number_analytic(g0: f64, g1: f64, theta: f64) -> Result<i32> {
    let s = g0 * g1 * theta.cos();
    if s.abs() <= CRITICAL_TOL {
        return Err(Error::CriticalPoint(format!(
            "g0*g1*cos(theta) = {s:e} for g0 = {g0}, g1 = {g1}, theta = {theta}"
        )));
    }
    Ok(if s > 0.0 { 1 } else { 0 })
}

/// `(1/2π) ∮ n × ∂_q n dq` for `d = (J1 + J2 cos q, J2 sin q)`, summed on a
/// uniform periodic grid of `nk` points with the analytic derivative.
pub fn winding_number_integral(j1: f64, j2: f64, nk: usize) -> Result<f64> {
    if nk < 16 {
        return Err(Error::invalid("nk", format!("grid size {nk} < 16")));
    }
    if (j1.abs() - j2.abs()).abs() <= CRITICAL_TOL {
        return Err(Error::CriticalPoint(format!("|J1| = |J2| = {}", j1.abs())));
    }
    let dq = TAU / nk as f64;
    // n × ∂n = (d_x ∂d_y - d_y ∂d_x) / |d|^2 = J2 (J1 cos q + J2) / |d|^2
    let sum: f64 = (0..nk)
        .map(|i| {
            let (s, c) = (i as f64 * dq).sin_cos();
            let dx = j1 + j2 * c;
            let dy = j2 * s;
            j2 * (j1 * c + j2) / (dx * dx + dy * dy)
        })
        .sum();
    Ok(sum * dq / TAU)
}

/// Smallest direct gap between adjacent bands over a grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    pub gap: f64,
    /// 1-based index of the lower of the two bands.
    pub lower_band: usize,
    pub q: f64,
    pub theta: f64,
}

#[derive(Clone, Debug)]
pub struct BandSpectrum {
    pub qs: Vec<f64>,
    /// Phase grid; `None` means a single phase, `theta_fixed`.
    pub thetas: Option<Vec<f64>>,
    pub theta_fixed: f64,
    /// `energies[point][band]`, ascending per point; `point = it*nq + iq`.
    pub energies: Vec<Vec<f64>>,
    /// Bloch vectors as matrix columns, in band order.
    pub states: Vec<DMatrix<C64>>,
}

impl BandSpectrum {
    pub fn bands(&self) -> usize {
        self.energies.first().map_or(0, Vec::len)
    }

    pub fn nq(&self) -> usize {
        self.qs.len()
    }

    pub fn ntheta(&self) -> usize {
        self.thetas.as_ref().map_or(1, Vec::len)
    }

    pub fn point(&self, iq: usize, it: usize) -> usize {
        it * self.nq() + iq
    }

    pub fn theta_at(&self, it: usize) -> f64 {
        self.thetas.as_ref().map_or(self.theta_fixed, |t| t[it])
    }

    pub fn state(&self, iq: usize, it: usize, band: usize) -> DVector<C64> {
        self.states[self.point(iq, it)].column(band).into_owned()
    }

    /// `(min, max)` of band `band` (0-based) over the grid.
    pub fn band_range(&self, band: usize) -> (f64, f64) {
        self.energies
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
                (lo.min(e[band]), hi.max(e[band]))
            })
    }

    pub fn min_gap(&self) -> Option<GapReport> {
        let mut best: Option<GapReport> = None;
        for it in 0..self.ntheta() {
            for iq in 0..self.nq() {
                let e = &self.energies[self.point(iq, it)];
                for b in 0..e.len().saturating_sub(1) {
                    let gap = e[b + 1] - e[b];
                    if best.as_ref().is_none_or(|g| gap < g.gap) {
                        best = Some(GapReport {
                            gap,
                            lower_band: b + 1,
                            q: self.qs[iq],
                            theta: self.theta_at(it),
                        });
                    }
                }
            }
        }
        best
    }
}

fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| TAU * i as f64 / n as f64).collect()
}

/// Diagonalizes `h(q, θ)` on `q_i = 2πi/nq` and, when `ntheta` is given, on
/// `θ_j = 2πj/ntheta`; otherwise at `spec.theta`.
pub fn band_spectrum(spec: &ChainSpec, nq: usize, ntheta: Option<usize>) -> Result<BandSpectrum> {
    spec.validate()?;
    if nq < 2 {
        return Err(Error::invalid("nq", format!("grid size {nq} < 2")));
    }
    if let Some(nt) = ntheta {
        if nt < 2 {
            return Err(Error::invalid("ntheta", format!("grid size {nt} < 2")));
        }
    }
    let qs = uniform_grid(nq);
    let thetas = ntheta.map(uniform_grid);
    let theta_list = thetas.clone().unwrap_or_else(|| vec![spec.theta]);
    let points: Vec<(f64, f64)> = theta_list
        .iter()
        .flat_map(|&t| qs.iter().map(move |&q| (q, t)))
        .collect();
    let solved = points
        .par_iter()
        .map(|&(q, t)| bloch_hamiltonian(spec, q, t).map(|h| eigh(&h)))
        .collect::<Result<Vec<_>>>()?;
    let (energies, states) = solved
        .into_iter()
        .map(|es| (es.eigenvalues.iter().copied().collect(), es.eigenvectors))
        .unzip();
    Ok(BandSpectrum {
        qs,
        thetas,
        theta_fixed: spec.theta,
        energies,
        states,
    })
}

/// Per-band Chern numbers on the `(q, θ)` torus.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChernSet {
    pub chern: Vec<i32>,
    /// Unrounded plaquette sums divided by 2π.
    pub raw: Vec<f64>,
    pub min_gap: GapReport,
    pub nq: usize,
    pub ntheta: usize,
}

impl ChernSet {
    pub fn total(&self) -> i32 {
        self.chern.iter().sum()
    }
}

/// Chern numbers of every band of `spec` on an `nq x ntheta` grid.
pub fn chern_numbers(spec: &ChainSpec, nq: usize, ntheta: usize) -> Result<ChernSet> {
    chern_numbers_with_gauge(spec, nq, ntheta, |_, _, _| 0.0)
}

/// [`chern_numbers`] after multiplying the Bloch vector of band `b` at grid
/// point `(iq, it)` by `exp(i * gauge(iq, it, b))`. The result must not
/// depend on `gauge`.
pub fn chern_numbers_with_gauge<G>(
    spec: &ChainSpec,
    nq: usize,
    ntheta: usize,
    gauge: G,
) -> Result<ChernSet>
where
    G: Fn(usize, usize, usize) -> f64,
{
    if nq < 12 || ntheta < 12 {
        return Err(Error::invalid(
            "grid",
            format!("{nq}x{ntheta} grid; both sides must be >= 12"),
        ));
    }
    let mut spectrum = band_spectrum(spec, nq, Some(ntheta))?;
    let gap = spectrum.min_gap().expect("at least two bands");
    if gap.gap <= MIN_CHERN_GAP {
        return Err(Error::GapClosed {
            q: gap.q,
            theta: gap.theta,
            gap: gap.gap,
        });
    }
    let bands = spectrum.bands();
    for it in 0..ntheta {
        for iq in 0..nq {
            let point = spectrum.point(iq, it);
            for b in 0..bands {
                let phase = C64::from_polar(1.0, gauge(iq, it, b));
                for z in spectrum.states[point].column_mut(b).iter_mut() {
                    *z *= phase;
                }
            }
        }
    }

    let mut raw = Vec::with_capacity(bands);
    for b in 0..bands {
        let flux: Result<Vec<f64>> = (0..ntheta)
            .into_par_iter()
            .map(|it| {
                let mut row = 0.0;
                for iq in 0..nq {
                    row += plaquette_phase(&spectrum, iq, it, b)?;
                }
                Ok(row)
            })
            .collect();
        // fixed-order reduction keeps the result independent of scheduling
        raw.push(flux?.iter().sum::<f64>() / TAU);
    }
    let chern = raw.iter().map(|c| c.round() as i32).collect();
    Ok(ChernSet {
        chern,
        raw,
        min_gap: gap,
        nq,
        ntheta,
    })
}

/// `Arg[U_q(k) U_θ(k+q̂) U_q(k+θ̂)^{-1} U_θ(k)^{-1}]` for band `b`.
fn plaquette_phase(s: &BandSpectrum, iq: usize, it: usize, b: usize) -> Result<f64> {
    let (nq, nt) = (s.nq(), s.ntheta());
    let (iq1, it1) = ((iq + 1) % nq, (it + 1) % nt);
    let col = |q: usize, t: usize| s.states[s.point(q, t)].column(b);
    let u00 = col(iq, it);
    let u10 = col(iq1, it);
    let u11 = col(iq1, it1);
    let u01 = col(iq, it1);
    let links = [
        u00.dotc(&u10),
        u10.dotc(&u11),
        u01.dotc(&u11).conj(),
        u00.dotc(&u01).conj(),
    ];
    if links.iter().any(|z| z.norm() < 1e-12) {
        return Err(Error::invalid(
            "grid",
            format!(
                "vanishing overlap of neighbouring Bloch states near q = {}, theta = {}; refine the grid",
                s.qs[iq],
                s.theta_at(it)
            ),
        ));
    }
    Ok(links.iter().product::<C64>().arg())
}

/// Whether the Chern set is unchanged when both grid sides double.
pub fn chern_grid_stable(spec: &ChainSpec, nq: usize, ntheta: usize) -> Result<bool> {
    let coarse = chern_numbers(spec, nq, ntheta)?;
    let fine = chern_numbers(spec, 2 * nq, 2 * ntheta)?;
    Ok(coarse.chern == fine.chern)
}
