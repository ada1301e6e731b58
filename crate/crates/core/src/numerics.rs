//! Dense complex Hermitian kernel: eigendecomposition, spectral propagation
//! and piecewise-constant evolution under a time-dependent Hamiltonian.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;

/// Absolute tolerance on `|H_ij - conj(H_ji)|`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Absolute tolerance on `| ||psi|| - 1 |` for validated states.
pub const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(DMatrix<C64>);

impl HermitianMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::invalid("dim", "matrix must have positive dimension"));
        }
        let asym = max_asymmetry(&m);
        if asym > HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                max_asymmetry: asym,
            });
        }
        Ok(Self(m))
    }

    pub fn from_real(m: DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| C64::new(x, 0.0)))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn apply(&self, psi: &StateVector) -> Result<DVector<C64>> {
        check_dim(self.dim(), psi.len())?;
        Ok(&self.0 * psi.as_vector())
    }

    /// `<psi|H|psi>`, real for Hermitian `H`.
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        let h_psi = self.apply(psi)?;
        Ok(psi.as_vector().dotc(&h_psi).re)
    }
}

fn max_asymmetry(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Single-excitation state: one complex amplitude per site.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(DVector<C64>);

impl StateVector {
    /// Validating constructor; the amplitudes must have unit norm.
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if amplitudes.is_empty() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self(amplitudes))
    }

    pub fn from_slice(amplitudes: &[C64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(amplitudes))
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self(amplitudes / C64::new(norm, 0.0)))
    }

    /// Unit amplitude on `site` (0-based).
    pub fn basis(dim: usize, site: usize) -> Result<Self> {
        if site >= dim {
            return Err(Error::invalid(
                "site",
                format!("site {site} out of range for dimension {dim}"),
            ));
        }
        let mut v = DVector::zeros(dim);
        v[site] = C64::new(1.0, 0.0);
        Ok(Self(v))
    }

    // Propagators are unitary; their output skips the norm check.
    pub(crate) fn from_unitary_image(v: DVector<C64>) -> Self {
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn as_vector(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.0.as_slice()
    }

    /// Site occupation probabilities `|psi_i|^2`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dim(self.len(), other.len())?;
        Ok(self.0.dotc(&other.0))
    }

    /// Largest amplitude-wise distance to `other`.
    pub fn max_distance(&self, other: &StateVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Eigenvalues ascending; eigenvectors are the matching columns.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<C64>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, index: usize) -> DVector<C64> {
        self.eigenvectors.column(index).into_owned()
    }

    /// `V diag(E) V†`.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &e) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(e);
        }
        scaled * v.adjoint()
    }

    /// `V e^{-iEt} V† psi`.
    pub fn propagate(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        check_dim(self.dim(), psi.len())?;
        if t == 0.0 {
            return Ok(psi.clone());
        }
        let mut coeffs = self.eigenvectors.ad_mul(psi.as_vector());
        for (c, &e) in coeffs.iter_mut().zip(self.eigenvalues.iter()) {
            *c *= C64::from_polar(1.0, -e * t);
        }
        Ok(StateVector::from_unitary_image(&self.eigenvectors * coeffs))
    }
}

/// Full eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Degenerate eigenspaces come back in whatever orthonormal basis the solver
/// produces; no phase or basis fixing happens here.
pub fn eigh(h: &HermitianMatrix) -> EigenSystem {
    // Real symmetric input takes the real solver.
    let (values, vectors) = if h.0.iter().all(|z| z.im == 0.0) {
        let eig = h.0.map(|z| z.re).symmetric_eigen();
        (eig.eigenvalues, eig.eigenvectors.map(|x| C64::new(x, 0.0)))
    } else {
        let eig = h.0.clone().symmetric_eigen();
        (eig.eigenvalues, eig.eigenvectors)
    };
    let n = h.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| values[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &vectors.column(src));
    }
    EigenSystem {
        eigenvalues,
        eigenvectors,
    }
}

/// `e^{-iHt} psi` through the eigendecomposition of `H`.
pub fn evolve_spectral(h: &HermitianMatrix, psi: &StateVector, t: f64) -> Result<StateVector> {
    check_dim(h.dim(), psi.len())?;
    if t == 0.0 {
        return Ok(psi.clone());
    }
    eigh(h).propagate(psi, t)
}

/// Evolves `psi0` from `t0` to `t1` with the piecewise-constant midpoint
/// rule: each of the `steps` sub-intervals propagates exactly under `H`
/// evaluated at its midpoint.
pub fn evolve_schedule<F>(
    h_of_t: F,
    psi0: &StateVector,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<StateVector>
where
    F: FnMut(f64) -> Result<HermitianMatrix>,
{
    evolve_schedule_observed(h_of_t, psi0, t0, t1, steps, |_, _, _| Ok(()))
}

/// Same as [`evolve_schedule`], calling `observer(step, t, psi)` with the
/// state at the start (`step = 0`) and after every completed step.
pub fn evolve_schedule_observed<F, O>(
    mut h_of_t: F,
    psi0: &StateVector,
    t0: f64,
    t1: f64,
    steps: usize,
    mut observer: O,
) -> Result<StateVector>
where
    F: FnMut(f64) -> Result<HermitianMatrix>,
    O: FnMut(usize, f64, &StateVector) -> Result<()>,
{
    if steps == 0 {
        return Err(Error::invalid("steps", "must be at least 1"));
    }
    let dt = (t1 - t0) / steps as f64;
    let mut psi = psi0.clone();
    observer(0, t0, &psi)?;
    for step in 0..steps {
        let mid = t0 + (step as f64 + 0.5) * dt;
        let h = h_of_t(mid)?;
        check_dim(h.dim(), psi.len())?;
        psi = eigh(&h).propagate(&psi, dt)?;
        let t = if step + 1 == steps {
            t1
        } else {
            t0 + (step + 1) as f64 * dt
        };
        observer(step + 1, t, &psi)?;
    }
    Ok(psi)
}

/// Step-doubling diagnostic for [`evolve_schedule`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub steps: usize,
    /// Max amplitude difference between `steps` and `2*steps`.
    pub coarse_error: f64,
    /// Max amplitude difference between `2*steps` and `4*steps`.
    pub fine_error: f64,
}

impl ConvergenceReport {
    /// Ratio of successive errors; near 4 for a second-order rule.
    pub fn ratio(&self) -> f64 {
        self.coarse_error / self.fine_error
    }
}

pub fn schedule_convergence<F>(
    mut h_of_t: F,
    psi0: &StateVector,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<ConvergenceReport>
where
    F: FnMut(f64) -> Result<HermitianMatrix>,
{
    let a = evolve_schedule(&mut h_of_t, psi0, t0, t1, steps)?;
    let b = evolve_schedule(&mut h_of_t, psi0, t0, t1, 2 * steps)?;
    let c = evolve_schedule(&mut h_of_t, psi0, t0, t1, 4 * steps)?;
    Ok(ConvergenceReport {
        steps,
        coarse_error: a.max_distance(&b),
        fine_error: b.max_distance(&c),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn real_matrix(n: usize, rows: &[f64]) -> HermitianMatrix {
        HermitianMatrix::from_real(DMatrix::from_row_slice(n, n, rows)).unwrap()
    }

    fn random_hermitian(n: usize, vals: &[f64]) -> HermitianMatrix {
        let mut m = DMatrix::zeros(n, n);
        let mut it = vals.iter().cycle();
        for i in 0..n {
            m[(i, i)] = c(*it.next().unwrap(), 0.0);
            for j in (i + 1)..n {
                let z = c(*it.next().unwrap(), *it.next().unwrap());
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        HermitianMatrix::new(m).unwrap()
    }

    fn unit_state(n: usize, vals: &[f64]) -> StateVector {
        let v = DVector::from_iterator(n, (0..n).map(|i| c(vals[2 * i], vals[2 * i + 1])));
        StateVector::normalized(v).unwrap()
    }

    #[test]
    fn rejects_non_hermitian_with_diagnostic() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0.5, 0.), c(0., 0.)]);
        match HermitianMatrix::new(m) {
            Err(Error::NotHermitian { max_asymmetry }) => {
                assert_abs_diff_eq!(max_asymmetry, 0.5, epsilon = 1e-15)
            }
            other => panic!("unexpected {other:?}"),
        }
        let m = DMatrix::from_row_slice(2, 2, &[c(1., 1e-3), c(0., 0.), c(0., 0.), c(1., 0.)]);
        assert!(matches!(
            HermitianMatrix::new(m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn real_and_complex_paths_agree() {
        // D H D^† with a diagonal phase D is complex but isospectral.
        let n = 7;
        let real = DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (i.min(j) as f64, i.max(j) as f64);
            c((a + 1.0).sin() * (b * 0.7).cos(), 0.0)
        });
        let d = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| {
            C64::from_polar(1.0, 0.3 * i as f64)
        }));
        let twisted = HermitianMatrix::new(&d * &real * d.adjoint()).unwrap();
        let real = HermitianMatrix::new(real).unwrap();
        let (a, b) = (eigh(&real), eigh(&twisted));
        for i in 0..n {
            assert_abs_diff_eq!(a.eigenvalues[i], b.eigenvalues[i], epsilon = 1e-12);
        }
        assert!((a.reconstruct() - real.as_matrix())
            .iter()
            .all(|z| z.norm() < 1e-12));
        let psi = StateVector::basis(n, 2).unwrap();
        let ea = evolve_spectral(&real, &psi, 3.0).unwrap();
        let eb = StateVector::new(
            d.adjoint()
                * evolve_spectral(
                    &twisted,
                    &StateVector::new(&d * psi.as_vector()).unwrap(),
                    3.0,
                )
                .unwrap()
                .as_vector(),
        )
        .unwrap();
        assert!(ea.max_distance(&eb) < 1e-12);
    }

    #[test]
    fn zero_matrix_eigensystem() {
        let es = eigh(&HermitianMatrix::zeros(2));
        assert_eq!(es.eigenvalues.as_slice(), &[0.0, 0.0]);
        assert_eq!(es.eigenvectors, DMatrix::identity(2, 2));
    }

    #[test]
    fn pauli_x_times_two() {
        let es = eigh(&real_matrix(2, &[0., 2., 2., 0.]));
        assert_abs_diff_eq!(es.eigenvalues[0], -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(es.eigenvalues[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn three_site_cell_at_j_three_halves() {
        let j = 1.5;
        let es = eigh(&real_matrix(3, &[0., j, 0., j, 0., j, 0., j, 0.]));
        let expected = [-SQRT_2 * j, 0.0, SQRT_2 * j];
        for (e, x) in es.eigenvalues.iter().zip(expected) {
            assert_abs_diff_eq!(*e, x, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(es.eigenvalues[2], 2.12132, epsilon = 1e-5);
    }

    #[test]
    fn rabi_transfer_at_quarter_period() {
        let h = real_matrix(2, &[0., 1., 1., 0.]);
        let psi = StateVector::basis(2, 0).unwrap();
        let out = evolve_spectral(&h, &psi, FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(out.amplitudes()[0].norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.amplitudes()[1].re, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.amplitudes()[1].im, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn identity_propagators() {
        let h = random_hermitian(4, &[0.3, -1.2, 0.7, 0.1, 2.0, -0.4, 0.9]);
        let psi = unit_state(4, &[1., 0.5, -0.2, 0.3, 0.8, -1.0, 0.1, 0.2]);
        assert_eq!(evolve_spectral(&h, &psi, 0.0).unwrap(), psi);
        let out = evolve_spectral(&HermitianMatrix::zeros(4), &psi, 3.7).unwrap();
        assert!(out.max_distance(&psi) < 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let psi = StateVector::basis(3, 0).unwrap();
        assert!(matches!(
            evolve_spectral(&HermitianMatrix::zeros(2), &psi, 1.0),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 3
            })
        ));
    }

    #[test]
    fn state_validation() {
        assert!(StateVector::from_slice(&[c(1.0, 0.0), c(1.0, 0.0)]).is_err());
        assert!(StateVector::normalized(DVector::zeros(3)).is_err());
        assert!(StateVector::basis(3, 3).is_err());
    }

    #[test]
    fn schedule_rejects_zero_steps() {
        let psi = StateVector::basis(2, 0).unwrap();
        let r = evolve_schedule(|_| Ok(HermitianMatrix::zeros(2)), &psi, 0.0, 1.0, 0);
        assert!(matches!(
            r,
            Err(Error::InvalidParameter { name: "steps", .. })
        ));
    }

    #[test]
    fn schedule_with_constant_generator_matches_spectral() {
        let h = random_hermitian(5, &[0.3, -1.2, 0.7, 0.1, 2.0, -0.4, 0.9, 1.1]);
        let psi = unit_state(5, &[1., 0.5, -0.2, 0.3, 0.8, -1.0, 0.1, 0.2, 0.4, 0.4]);
        let exact = evolve_spectral(&h, &psi, 2.5).unwrap();
        for steps in [1, 7, 64] {
            let out = evolve_schedule(|_| Ok(h.clone()), &psi, 0.5, 3.0, steps).unwrap();
            assert!(out.max_distance(&exact) < 1e-10, "steps = {steps}");
        }
    }

    #[test]
    fn single_step_is_midpoint_propagation() {
        let h_of_t = |t: f64| real_matrix(2, &[t, 1.0, 1.0, -t]);
        let psi = StateVector::basis(2, 0).unwrap();
        let one = evolve_schedule(|t| Ok(h_of_t(t)), &psi, 0.2, 1.4, 1).unwrap();
        let mid = evolve_spectral(&h_of_t(0.8), &psi, 1.2).unwrap();
        assert!(one.max_distance(&mid) < 1e-15);
    }

    #[test]
    fn midpoint_rule_is_second_order() {
        let h_of_t = |t: f64| {
            let (s, co) = t.sin_cos();
            HermitianMatrix::new(DMatrix::from_row_slice(
                3,
                3,
                &[
                    c(co, 0.),
                    c(0.5, 0.3 * s),
                    c(0., 0.),
                    c(0.5, -0.3 * s),
                    c(-0.2, 0.),
                    c(1.0 + 0.5 * s, 0.),
                    c(0., 0.),
                    c(1.0 + 0.5 * s, 0.),
                    c(0.4 * s, 0.),
                ],
            ))
        };
        let psi = StateVector::basis(3, 0).unwrap();
        let report = schedule_convergence(h_of_t, &psi, 0.0, 4.0, 32).unwrap();
        let ratio = report.ratio();
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn observer_sees_every_step() {
        let psi = StateVector::basis(2, 0).unwrap();
        let mut times = Vec::new();
        evolve_schedule_observed(
            |_| Ok(real_matrix(2, &[0., 1., 1., 0.])),
            &psi,
            0.0,
            1.0,
            4,
            |step, t, _| {
                times.push((step, t));
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(
            times,
            vec![(0, 0.0), (1, 0.25), (2, 0.5), (3, 0.75), (4, 1.0)]
        );
    }

    proptest! {
        #[test]
        fn eigensystem_invariants(vals in prop::collection::vec(-3.0f64..3.0, 40), n in 1usize..7) {
            let h = random_hermitian(n, &vals);
            let es = eigh(&h);
            for w in es.eigenvalues.as_slice().windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            let gram = es.eigenvectors.adjoint() * &es.eigenvectors;
            let unitary_err = (gram - DMatrix::<C64>::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(unitary_err < 1e-10);
            let rec = (es.reconstruct() - h.as_matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(rec <= 1e-10 * h.max_abs().max(1.0));
        }

        #[test]
        fn propagation_is_unitary_and_conserves_energy(
            vals in prop::collection::vec(-3.0f64..3.0, 40),
            amps in prop::collection::vec(-1.0f64..1.0, 12),
            t in -20.0f64..20.0,
        ) {
            prop_assume!(amps.iter().any(|a| a.abs() > 1e-3));
            let h = random_hermitian(6, &vals);
            let psi = unit_state(6, &amps);
            let out = evolve_spectral(&h, &psi, t).unwrap();
            prop_assert!((out.norm() - 1.0).abs() < 1e-9);
            let e0 = h.expectation(&psi).unwrap();
            let e1 = h.expectation(&out).unwrap();
            prop_assert!((e0 - e1).abs() < 1e-9);
        }
    }
}
