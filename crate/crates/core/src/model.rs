//! Chain definitions, the cosine coupling law, static coupling disorder, and
//! the real-space and Bloch Hamiltonians of the single-excitation sector.
//!
//! Sites are numbered `i = p*(x-1) + s` for cell `x in 1..=N` and sublattice
//! `s in 1..=p`; storage indices are the same minus one. Bond `k` (1-based)
//! joins site `k` to site `k+1`, and for a periodic chain bond `L` closes the
//! ring between site `L` and site `1`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{HermitianMatrix, C64};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    /// Sites per unit cell, `p >= 2`.
    pub cell_size: usize,
    /// Number of unit cells, `N >= 1`.
    pub cells: usize,
    pub g0: f64,
    pub g1: f64,
    /// Phase of the coupling law in radians.
    pub theta: f64,
    pub boundary: Boundary,
}

impl ChainSpec {
    pub fn new(
        cell_size: usize,
        cells: usize,
        g0: f64,
        g1: f64,
        theta: f64,
        boundary: Boundary,
    ) -> Result<Self> {
        let spec = Self {
            cell_size,
            cells,
            g0,
            g1,
            theta,
            boundary,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Open chain, the default for real-space dynamics.
    pub fn open(cell_size: usize, cells: usize, g0: f64, g1: f64, theta: f64) -> Result<Self> {
        Self::new(cell_size, cells, g0, g1, theta, Boundary::Open)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cell_size < 2 {
            return Err(Error::invalid(
                "p",
                format!("cell size {} < 2", self.cell_size),
            ));
        }
        if self.cells < 1 {
            return Err(Error::invalid("N", "need at least one unit cell"));
        }
        for (name, v) in [("g0", self.g0), ("g1", self.g1), ("theta", self.theta)] {
            if !v.is_finite() {
                return Err(Error::invalid(name, format!("{v} is not finite")));
            }
        }
        Ok(())
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self {
            theta,
            ..self.clone()
        }
    }

    pub fn with_boundary(&self, boundary: Boundary) -> Self {
        Self {
            boundary,
            ..self.clone()
        }
    }

    /// Total number of sites `L = p*N`.
    pub fn sites(&self) -> usize {
        self.cell_size * self.cells
    }

    pub fn bond_count(&self) -> usize {
        bond_count(self.sites(), self.boundary)
    }

    /// `J_k = g0 + g1 cos(2πk/p + θ)` at the given phase. `k` is reduced
    /// to `1..=p` first so that `J_{k+p} == J_k` holds exactly.
    pub fn coupling_at(&self, k: usize, theta: f64) -> f64 {
        let s = (k + self.cell_size - 1) % self.cell_size + 1;
        self.g0 + self.g1 * (TAU * s as f64 / self.cell_size as f64 + theta).cos()
    }

    /// Storage index of `(cell, sublattice)`, both 1-based.
    pub fn site_index(&self, cell: usize, sublattice: usize) -> Result<usize> {
        if cell == 0 || cell > self.cells {
            return Err(Error::invalid(
                "cell",
                format!("cell {cell} outside 1..={}", self.cells),
            ));
        }
        if sublattice == 0 || sublattice > self.cell_size {
            return Err(Error::invalid(
                "sublattice",
                format!("sublattice {sublattice} outside 1..={}", self.cell_size),
            ));
        }
        Ok(self.cell_size * (cell - 1) + sublattice - 1)
    }

    /// 1-based cell of a storage index.
    pub fn cell_of(&self, site: usize) -> usize {
        site / self.cell_size + 1
    }
}

fn bond_count(sites: usize, boundary: Boundary) -> usize {
    match boundary {
        Boundary::Open => sites.saturating_sub(1),
        Boundary::Periodic => sites,
    }
}

/// Concrete bond strengths, `bonds[k-1] = J_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingProfile {
    bonds: Vec<f64>,
    boundary: Boundary,
}

impl CouplingProfile {
    pub fn new(bonds: Vec<f64>, boundary: Boundary) -> Self {
        Self { bonds, boundary }
    }

    pub fn bonds(&self) -> &[f64] {
        &self.bonds
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn len(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bonds.is_empty()
    }

    /// Adds `offsets[k]` to bond `k`; lengths must agree.
    pub fn perturbed(&self, offsets: &[f64]) -> Result<Self> {
        if offsets.len() != self.bonds.len() {
            return Err(Error::DimensionMismatch {
                expected: self.bonds.len(),
                found: offsets.len(),
            });
        }
        let bonds = self.bonds.iter().zip(offsets).map(|(j, d)| j + d).collect();
        Ok(Self::new(bonds, self.boundary))
    }
}

/// Evaluates the coupling law on every bond of `spec`.
pub fn build_couplings(spec: &ChainSpec) -> CouplingProfile {
    let bonds = (1..=spec.bond_count())
        .map(|k| spec.coupling_at(k, spec.theta))
        .collect();
    CouplingProfile::new(bonds, spec.boundary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    /// Disorder strength `W` in units of `g1`.
    pub strength: f64,
    pub seed: u64,
    pub samples: usize,
}

impl DisorderSpec {
    pub fn new(strength: f64, seed: u64, samples: usize) -> Result<Self> {
        let d = Self {
            strength,
            seed,
            samples,
        };
        d.validate()?;
        Ok(d)
    }

    /// Single clean realization.
    pub fn clean() -> Self {
        Self {
            strength: 0.0,
            seed: 0,
            samples: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strength >= 0.0 && self.strength.is_finite()) {
            return Err(Error::invalid(
                "W",
                format!("strength {} must be >= 0", self.strength),
            ));
        }
        if self.samples == 0 {
            return Err(Error::invalid("samples", "need at least one sample"));
        }
        Ok(())
    }

    fn check_sample(&self, sample: usize) -> Result<()> {
        self.validate()?;
        if sample >= self.samples {
            return Err(Error::invalid(
                "sample_index",
                format!("{sample} outside 0..{}", self.samples),
            ));
        }
        Ok(())
    }

    /// `W * delta_k` for bonds `0..bonds` of realization `sample`.
    pub fn offsets(&self, sample: usize, bonds: usize) -> Result<Vec<f64>> {
        self.check_sample(sample)?;
        Ok((0..bonds)
            .map(|k| self.strength * disorder_draw(self.seed, sample, k))
            .collect())
    }
}

/// Layout of the keyed disorder stream, recorded in run manifests.
pub const DISORDER_STREAM_LAYOUT: &str =
    "ChaCha8(seed); stream = sample index; word position = 2 * bond index (0-based); delta = u53 / 2^53 - 0.5";

/// Uniform `delta` in `[-0.5, 0.5)` keyed on `(seed, sample, bond)`.
///
/// Each draw is addressed directly in the ChaCha keystream, so values do not
/// depend on how many other draws were made or in which order.
pub fn disorder_draw(seed: u64, sample: usize, bond: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample as u64);
    rng.set_word_pos(2 * bond as u128);
    rng.random::<f64>() - 0.5
}

/// Realization `sample` of the disordered profile. Zero strength returns the
/// input unchanged.
pub fn apply_disorder(
    profile: &CouplingProfile,
    disorder: &DisorderSpec,
    sample: usize,
) -> Result<CouplingProfile> {
    disorder.check_sample(sample)?;
    if disorder.strength == 0.0 {
        return Ok(profile.clone());
    }
    profile.perturbed(&disorder.offsets(sample, profile.len())?)
}

/// Single-excitation Hamiltonian of an `L`-site chain: `H[k-1][k] = J_k`,
/// zero diagonal, plus the ring-closing corner for periodic profiles.
pub fn realspace_hamiltonian(profile: &CouplingProfile, sites: usize) -> Result<HermitianMatrix> {
    let expected = bond_count(sites, profile.boundary);
    if sites == 0 || profile.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: profile.len(),
        });
    }
    let mut m = DMatrix::<f64>::zeros(sites, sites);
    for (k, &j) in profile.bonds.iter().enumerate() {
        let (a, b) = (k, (k + 1) % sites);
        if a == b {
            // a one-site ring has a self bond; it carries no hopping
            continue;
        }
        m[(a, b)] += j;
        m[(b, a)] += j;
    }
    HermitianMatrix::from_real(m)
}

/// Bloch Hamiltonian for cell quasimomentum `q` from explicit in-cell bonds
/// `J_1..J_p`: `(s, s+1) = J_s` and the corner `(p, 1)` carries `J_p e^{iq}`.
pub fn bloch_from_bonds(bonds: &[f64], q: f64) -> Result<HermitianMatrix> {
    let p = bonds.len();
    if p < 2 {
        return Err(Error::invalid("p", format!("cell size {p} < 2")));
    }
    let mut m = DMatrix::<C64>::zeros(p, p);
    for s in 0..p - 1 {
        m[(s, s + 1)] += C64::new(bonds[s], 0.0);
        m[(s + 1, s)] += C64::new(bonds[s], 0.0);
    }
    let hop = C64::from_polar(bonds[p - 1], q);
    m[(p - 1, 0)] += hop;
    m[(0, p - 1)] += hop.conj();
    HermitianMatrix::new(m)
}

/// In-cell bonds `J_1..J_p` of `spec` at phase `theta`.
pub fn cell_bonds(spec: &ChainSpec, theta: f64) -> Vec<f64> {
    (1..=spec.cell_size)
        .map(|s| spec.coupling_at(s, theta))
        .collect()
}

/// `h(q, θ)`: the `p x p` Bloch Hamiltonian of `spec` at phase `theta`.
/// For `p = 2` this is `d_x τ_x + d_y τ_y` with `d_x = J1 + J2 cos q`,
/// `d_y = J2 sin q`.
pub fn bloch_hamiltonian(spec: &ChainSpec, q: f64, theta: f64) -> Result<HermitianMatrix> {
    spec.validate()?;
    bloch_from_bonds(&cell_bonds(spec, theta), q)
}
