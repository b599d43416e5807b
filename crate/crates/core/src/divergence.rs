//! Closed-form divergences between Gaussians and their marginal estimators
//! for Gaussian processes.
//!
//! For `N(mu0, S0)` and `N(mu1, S1)` the entropic 2-Wasserstein cost is
//!
//! ```text
//! W^2_eps = |mu0 - mu1|^2 + Tr S0 + Tr S1
//!         + (eps/2) log det(I + M/2) - (eps/2) Tr M,
//! M = -I + (I + (16/eps^2) S0^{1/2} S1 S0^{1/2})^{1/2}
//! ```
//!
//! Both `M` terms only depend on the eigenvalues `a_i` of
//! `(16/eps^2) S0^{1/2} S1 S0^{1/2}`, so everything is computed per
//! eigenvalue and `M` is never formed. The Sinkhorn divergence debiases
//! the cost: `S = W(0,1) - (W(0,0) + W(1,1)) / 2`.
//!
//! For Gaussian processes the covariances are replaced by scaled Gram
//! matrices over a shared index sample and the mean difference by its
//! Monte Carlo average over the same sample.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::kernels::{mean_term, Kernel, MeanFunction};
use crate::sampling::IndexSample;
use crate::specmath::{self, m_and_logdet, PairSpectra, Spectrum};

/// Values in `[-CLAMP_FLOOR, 0)` are roundoff and reported as zero.
pub const CLAMP_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianParams {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if !covariance.is_square() {
            return Err(invalid("covariance must be square"));
        }
        if mean.len() != covariance.nrows() {
            return Err(Error::DimensionMismatch {
                expected: covariance.nrows(),
                got: mean.len(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(invalid("mean has non-finite entries"));
        }
        // Validates symmetry, finiteness and the PSD floor.
        let eig = specmath::sym_eig(&covariance, false)?;
        Spectrum::from_psd_eigenvalues(eig.values, specmath::psd_tolerance(&covariance))?;
        Ok(Self { mean, covariance })
    }

    /// One-dimensional `N(mu, var)`.
    pub fn univariate(mu: f64, var: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(1, mu),
            DMatrix::from_element(1, 1, var),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }
}

/// Entropic regularization strength, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RegParam(f64);

impl RegParam {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        Ok(Self(epsilon))
    }

    pub fn epsilon(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DivergenceKind {
    EntropicW2,
    Sinkhorn,
}

/// A divergence value and its additive pieces.
///
/// `value = mean_term + trace_term + (eps/2) logdet_term - (eps/2) m_trace_term`
/// up to clamping of roundoff negatives; `raw_value` is the unclamped sum.
/// For the Sinkhorn kind the pieces are the debiased combinations
/// `x(0,1) - (x(0,0) + x(1,1)) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceResult {
    pub value: f64,
    pub raw_value: f64,
    pub trace_term: f64,
    pub logdet_term: f64,
    pub m_trace_term: f64,
    pub mean_term: f64,
    pub n_marginals: usize,
    pub epsilon: f64,
}

impl DivergenceResult {
    pub fn recombined(&self) -> f64 {
        self.mean_term
            + self.trace_term
            + 0.5 * self.epsilon * (self.logdet_term - self.m_trace_term)
    }

    fn with_mean_term(mut self, mean_term: f64, clamp: bool) -> Self {
        self.mean_term = mean_term;
        self.raw_value = self.recombined();
        self.value = if clamp {
            clamp_roundoff(self.raw_value)
        } else {
            self.raw_value
        };
        self
    }
}

fn clamp_roundoff(v: f64) -> f64 {
    if (-CLAMP_FLOOR..0.0).contains(&v) {
        0.0
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy)]
struct Pieces {
    trace: f64,
    logdet: f64,
    m_trace: f64,
}

impl Pieces {
    fn from_cross(trace: f64, cross: &Spectrum, epsilon: f64) -> Self {
        let k = 16.0 / (epsilon * epsilon);
        let (mut logdet, mut m_trace) = (0.0, 0.0);
        for &a in cross.eigenvalues() {
            let (m, l) = m_and_logdet(k * a);
            m_trace += m;
            logdet += l;
        }
        Self {
            trace,
            logdet,
            m_trace,
        }
    }

    fn debias(cross: Self, self0: Self, self1: Self) -> Self {
        Self {
            trace: cross.trace - 0.5 * (self0.trace + self1.trace),
            logdet: cross.logdet - 0.5 * (self0.logdet + self1.logdet),
            m_trace: cross.m_trace - 0.5 * (self0.m_trace + self1.m_trace),
        }
    }

    fn into_result(self, epsilon: f64, n_marginals: usize) -> DivergenceResult {
        DivergenceResult {
            value: 0.0,
            raw_value: 0.0,
            trace_term: self.trace,
            logdet_term: self.logdet,
            m_trace_term: self.m_trace,
            mean_term: 0.0,
            n_marginals,
            epsilon,
        }
    }
}

/// Spectral data of a covariance pair, independent of `eps`.
///
/// One decomposition serves every regularization strength; the experiment
/// runner evaluates all its `eps` values from a single instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpectra {
    trace0: f64,
    trace1: f64,
    spectra: PairSpectra,
}

impl CovarianceSpectra {
    pub fn new(cov0: &DMatrix<f64>, cov1: &DMatrix<f64>) -> Result<Self> {
        let mut spectra = specmath::pair_spectra(cov0, cov1)?;
        // Identical inputs share one spectrum so the debiased terms cancel exactly.
        if cov0 == cov1 {
            spectra.cross = spectra.first.squared();
        }
        Ok(Self {
            trace0: cov0.trace(),
            trace1: cov1.trace(),
            spectra,
        })
    }

    pub fn dim(&self) -> usize {
        self.spectra.first.len()
    }

    pub fn spectra(&self) -> &PairSpectra {
        &self.spectra
    }

    /// Covariance part of the entropic cost (no mean term).
    pub fn entropic(&self, reg: RegParam) -> DivergenceResult {
        let eps = reg.epsilon();
        Pieces::from_cross(self.trace0 + self.trace1, &self.spectra.cross, eps)
            .into_result(eps, self.dim())
            .with_mean_term(0.0, false)
    }

    /// Covariance part of the Sinkhorn divergence (no mean term).
    pub fn sinkhorn(&self, reg: RegParam) -> DivergenceResult {
        self.sinkhorn_pieces(reg).with_mean_term(0.0, true)
    }

    fn sinkhorn_pieces(&self, reg: RegParam) -> DivergenceResult {
        let eps = reg.epsilon();
        let cross = Pieces::from_cross(self.trace0 + self.trace1, &self.spectra.cross, eps);
        let self0 = Pieces::from_cross(2.0 * self.trace0, &self.spectra.first.squared(), eps);
        let self1 = Pieces::from_cross(2.0 * self.trace1, &self.spectra.second.squared(), eps);
        Pieces::debias(cross, self0, self1).into_result(eps, self.dim())
    }

    fn with_kind(&self, reg: RegParam, kind: DivergenceKind, mean_term: f64) -> DivergenceResult {
        match kind {
            DivergenceKind::EntropicW2 => self.entropic(reg).with_mean_term(mean_term, false),
            DivergenceKind::Sinkhorn => self.sinkhorn_pieces(reg).with_mean_term(mean_term, true),
        }
    }
}

fn check_same_dim(g0: &GaussianParams, g1: &GaussianParams) -> Result<()> {
    if g0.dim() != g1.dim() {
        return Err(Error::DimensionMismatch {
            expected: g0.dim(),
            got: g1.dim(),
        });
    }
    Ok(())
}

/// Squared 2-Wasserstein distance between two Gaussians.
pub fn w2_squared(g0: &GaussianParams, g1: &GaussianParams) -> Result<f64> {
    check_same_dim(g0, g1)?;
    let spectra = specmath::pair_spectra(&g1.covariance, &g0.covariance)?;
    let cross_root: f64 = spectra.cross.eigenvalues().iter().map(|v| v.sqrt()).sum();
    let raw = (&g0.mean - &g1.mean).norm_squared() + g0.covariance.trace() + g1.covariance.trace()
        - 2.0 * cross_root;
    Ok(clamp_roundoff(raw))
}

/// Entropic squared 2-Wasserstein cost between two Gaussians, with components.
pub fn entropic_w2_squared(
    g0: &GaussianParams,
    g1: &GaussianParams,
    reg: RegParam,
) -> Result<DivergenceResult> {
    check_same_dim(g0, g1)?;
    let spectra = CovarianceSpectra::new(&g0.covariance, &g1.covariance)?;
    let mean = (&g0.mean - &g1.mean).norm_squared();
    Ok(spectra.with_kind(reg, DivergenceKind::EntropicW2, mean))
}

/// 2-Sinkhorn divergence between two Gaussians, with components.
pub fn sinkhorn_divergence_result(
    g0: &GaussianParams,
    g1: &GaussianParams,
    reg: RegParam,
) -> Result<DivergenceResult> {
    check_same_dim(g0, g1)?;
    let spectra = CovarianceSpectra::new(&g0.covariance, &g1.covariance)?;
    let mean = (&g0.mean - &g1.mean).norm_squared();
    Ok(spectra.with_kind(reg, DivergenceKind::Sinkhorn, mean))
}

pub fn sinkhorn_divergence(g0: &GaussianParams, g1: &GaussianParams, reg: RegParam) -> Result<f64> {
    Ok(sinkhorn_divergence_result(g0, g1, reg)?.value)
}

/// Scaled Gram spectra of two kernels over one sample.
pub fn marginal_spectra(
    k0: &Kernel,
    k1: &Kernel,
    sample: &IndexSample,
) -> Result<CovarianceSpectra> {
    if sample.is_empty() {
        return Err(invalid("estimators need a nonempty sample"));
    }
    if k0.input_dim() != k1.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: k0.input_dim(),
            got: k1.input_dim(),
        });
    }
    let g0 = k0.gram(sample, true)?;
    let g1 = k1.gram(sample, true)?;
    CovarianceSpectra::new(&g0.matrix, &g1.matrix)
}

/// Estimator of the entropic cost between two covariance operators:
/// `Tr[S0 + S1] - (eps/2) F((16/eps^2) S0 S1)` with `S_i` the scaled Grams.
pub fn estimate_entropic_w2(
    k0: &Kernel,
    k1: &Kernel,
    sample: &IndexSample,
    reg: RegParam,
) -> Result<DivergenceResult> {
    Ok(marginal_spectra(k0, k1, sample)?.entropic(reg))
}

pub fn estimate_sinkhorn_result(
    k0: &Kernel,
    k1: &Kernel,
    sample: &IndexSample,
    reg: RegParam,
) -> Result<DivergenceResult> {
    covariance_part(k0, k1, sample, reg, DivergenceKind::Sinkhorn, 0.0)
}

fn covariance_part(
    k0: &Kernel,
    k1: &Kernel,
    sample: &IndexSample,
    reg: RegParam,
    kind: DivergenceKind,
    mean_term: f64,
) -> Result<DivergenceResult> {
    if kind == DivergenceKind::Sinkhorn && k0.same_as(k1) {
        if sample.is_empty() {
            return Err(invalid("estimators need a nonempty sample"));
        }
        k0.check_sample(sample)?;
        let zero = Pieces {
            trace: 0.0,
            logdet: 0.0,
            m_trace: 0.0,
        };
        return Ok(zero
            .into_result(reg.epsilon(), sample.len())
            .with_mean_term(mean_term, true));
    }
    Ok(marginal_spectra(k0, k1, sample)?.with_kind(reg, kind, mean_term))
}

/// Empirical Sinkhorn divergence between two covariance operators; the
/// cross term and both self terms share `sample`.
pub fn estimate_sinkhorn(
    k0: &Kernel,
    k1: &Kernel,
    sample: &IndexSample,
    reg: RegParam,
) -> Result<f64> {
    Ok(estimate_sinkhorn_result(k0, k1, sample, reg)?.value)
}

/// A Gaussian process on the unit cube.
#[derive(Debug, Clone)]
pub struct GaussianProcess {
    pub mean: MeanFunction,
    pub kernel: Kernel,
}

impl GaussianProcess {
    pub fn new(mean: MeanFunction, kernel: Kernel) -> Self {
        Self { mean, kernel }
    }

    pub fn centered(kernel: Kernel) -> Self {
        Self {
            mean: MeanFunction::Zero,
            kernel,
        }
    }
}

/// Divergence between two Gaussian processes from the marginals at `sample`.
///
/// The mean contribution is `||m0 - m1||^2` estimated on the same sample. For
/// the Sinkhorn kind it enters once, since the self terms have identical means.
pub fn gp_divergence(
    gp0: &GaussianProcess,
    gp1: &GaussianProcess,
    sample: &IndexSample,
    reg: RegParam,
    kind: DivergenceKind,
) -> Result<DivergenceResult> {
    if sample.is_empty() {
        return Err(invalid("estimators need a nonempty sample"));
    }
    let mean = mean_term(&gp0.mean, &gp1.mean, sample)?;
    covariance_part(&gp0.kernel, &gp1.kernel, sample, reg, kind, mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::sample_uniform;
    use approx::assert_relative_eq;

    fn n1(mu: f64, var: f64) -> GaussianParams {
        GaussianParams::univariate(mu, var).unwrap()
    }

    fn reg(e: f64) -> RegParam {
        RegParam::new(e).unwrap()
    }

    // Scalar closed form written out directly, independent of the spectral path.
    fn scalar_entropic(mu: f64, v0: f64, v1: f64, eps: f64) -> f64 {
        let a = 16.0 / (eps * eps) * v0 * v1;
        let m = -1.0 + (1.0 + a).sqrt();
        mu * mu + v0 + v1 + eps / 2.0 * (1.0 + m / 2.0).ln() - eps / 2.0 * m
    }

    #[test]
    fn w2_examples() {
        assert_eq!(w2_squared(&n1(0.0, 1.0), &n1(0.0, 1.0)).unwrap(), 0.0);
        assert_relative_eq!(
            w2_squared(&n1(0.0, 1.0), &n1(0.0, 4.0)).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            w2_squared(&n1(0.0, 2.0), &n1(3.0, 2.0)).unwrap(),
            9.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn w2_dimension_mismatch() {
        let g2 = GaussianParams::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            w2_squared(&n1(0.0, 1.0), &g2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn entropic_examples() {
        let r = entropic_w2_squared(&n1(0.0, 1.0), &n1(0.0, 1.0), reg(2.0)).unwrap();
        // 2 + ln(golden ratio) - (sqrt 5 - 1)
        let hand = 2.0 + ((1.0 + 5f64.sqrt()) / 2.0).ln() - (5f64.sqrt() - 1.0);
        assert_relative_eq!(r.value, hand, max_relative = 1e-14);
        assert!((r.value - 1.2451439).abs() < 1e-7);

        let r = entropic_w2_squared(&n1(0.0, 1.0), &n1(0.0, 4.0), reg(2.0)).unwrap();
        let hand = 5.0 + ((1.0 + 17f64.sqrt()) / 2.0).ln() - (17f64.sqrt() - 1.0);
        assert_relative_eq!(r.value, hand, max_relative = 1e-14);
        assert!((r.value - 2.8175080).abs() < 1e-7);

        for (mu, v0, v1, eps) in [(0.5, 2.0, 3.0, 0.5), (-1.0, 0.1, 7.0, 10.0)] {
            let r = entropic_w2_squared(&n1(0.0, v0), &n1(mu, v1), reg(eps)).unwrap();
            assert_relative_eq!(
                r.value,
                scalar_entropic(mu, v0, v1, eps),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn entropic_zero_covariance_is_mean_shift() {
        let g0 =
            GaussianParams::new(DVector::from_vec(vec![1.0, 2.0]), DMatrix::zeros(2, 2)).unwrap();
        let g1 =
            GaussianParams::new(DVector::from_vec(vec![-1.0, 0.0]), DMatrix::zeros(2, 2)).unwrap();
        let r = entropic_w2_squared(&g0, &g1, reg(1.0)).unwrap();
        assert_eq!(r.value, 8.0);
        assert_eq!(r.mean_term, 8.0);
    }

    #[test]
    fn entropic_rejects_bad_epsilon() {
        assert!(RegParam::new(0.0).is_err());
        assert!(RegParam::new(-2.0).is_err());
        assert!(RegParam::new(f64::INFINITY).is_err());
    }

    #[test]
    fn sinkhorn_examples() {
        assert_eq!(
            sinkhorn_divergence(&n1(0.3, 2.0), &n1(0.3, 2.0), reg(1.0)).unwrap(),
            0.0
        );
        let s = sinkhorn_divergence(&n1(0.0, 1.0), &n1(0.0, 4.0), reg(2.0)).unwrap();
        let hand = scalar_entropic(0.0, 1.0, 4.0, 2.0)
            - 0.5 * (scalar_entropic(0.0, 1.0, 1.0, 2.0) + scalar_entropic(0.0, 4.0, 4.0, 2.0));
        assert_relative_eq!(s, hand, max_relative = 1e-13);
        assert!((s - 0.9705794).abs() < 1e-7, "{s}");
        let s = sinkhorn_divergence(&n1(0.0, 1.0), &n1(0.0, 4.0), reg(1e-4)).unwrap();
        assert!((s - 1.0).abs() < 1e-3, "{s}");
    }

    #[test]
    fn component_identity() {
        let r = sinkhorn_divergence_result(&n1(1.0, 1.0), &n1(0.0, 4.0), reg(0.7)).unwrap();
        assert_relative_eq!(r.value, r.recombined(), max_relative = 1e-12);
        assert_eq!(r.trace_term, 0.0);
        assert_eq!(r.mean_term, 1.0);
        let e = entropic_w2_squared(&n1(1.0, 1.0), &n1(0.0, 4.0), reg(0.7)).unwrap();
        assert_relative_eq!(e.value, e.recombined(), max_relative = 1e-12);
        assert_eq!(e.trace_term, 5.0);
    }

    #[test]
    fn estimator_identical_kernels() {
        let k = Kernel::rbf(1.0, 0.5, 2).unwrap();
        let s = sample_uniform(40, 2, 3).unwrap();
        let r = estimate_entropic_w2(&k, &k, &s, reg(1.0)).unwrap();
        let tr = k.gram(&s, true).unwrap().trace();
        assert_relative_eq!(r.trace_term, 2.0 * tr, max_relative = 1e-15);
        assert_eq!(estimate_sinkhorn(&k, &k, &s, reg(1.0)).unwrap(), 0.0);
    }

    #[test]
    fn estimator_single_marginal() {
        let k = Kernel::rbf(1.0, 1.0, 1).unwrap();
        let s = IndexSample::explicit(&[vec![0.3]], 1).unwrap();
        let r = estimate_entropic_w2(&k, &k, &s, reg(2.0)).unwrap();
        assert_relative_eq!(
            r.value,
            scalar_entropic(0.0, 1.0, 1.0, 2.0),
            max_relative = 1e-14
        );
        assert_eq!(r.n_marginals, 1);

        let lin = Kernel::linear(1).unwrap();
        let at_one = IndexSample::explicit(&[vec![1.0]], 1).unwrap();
        assert_eq!(estimate_sinkhorn(&k, &lin, &at_one, reg(2.0)).unwrap(), 0.0);
    }

    #[test]
    fn estimator_errors() {
        let k = Kernel::rbf(1.0, 1.0, 1).unwrap();
        let empty = sample_uniform(0, 1, 0).unwrap();
        assert!(estimate_sinkhorn(&k, &k, &empty, reg(1.0)).is_err());
        let k2 = Kernel::rbf(1.0, 1.0, 2).unwrap();
        let s = sample_uniform(5, 1, 0).unwrap();
        assert!(estimate_sinkhorn(&k, &k2, &s, reg(1.0)).is_err());
    }

    #[test]
    fn gp_divergence_examples() {
        let rbf = Kernel::rbf(1.0, 1.0, 1).unwrap();
        let s = sample_uniform(10_000, 1, 21).unwrap();
        let gp = GaussianProcess::centered(rbf.clone());
        let small = sample_uniform(30, 1, 21).unwrap();
        let r = gp_divergence(&gp, &gp, &small, reg(1.0), DivergenceKind::Sinkhorn).unwrap();
        assert_eq!(r.value, 0.0);

        let one = GaussianProcess::new(MeanFunction::Constant(1.0), rbf.clone());
        let r = gp_divergence(&one, &gp, &small, reg(1.0), DivergenceKind::Sinkhorn).unwrap();
        assert_eq!(r.value, 1.0);

        let lin_mean = GaussianProcess::new(MeanFunction::custom(|x| x[0]), rbf);
        let r = gp_divergence(&lin_mean, &gp, &s, reg(1.0), DivergenceKind::Sinkhorn).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 0.02, "{}", r.value);
    }

    #[test]
    fn gp_entropic_adds_mean_to_estimator() {
        let k0 = Kernel::rbf(1.0, 1.0, 1).unwrap();
        let k1 = Kernel::linear(1).unwrap();
        let s = sample_uniform(25, 1, 4).unwrap();
        let base = estimate_entropic_w2(&k0, &k1, &s, reg(0.5)).unwrap();
        let gp0 = GaussianProcess::new(MeanFunction::Constant(2.0), k0);
        let gp1 = GaussianProcess::centered(k1);
        let r = gp_divergence(&gp0, &gp1, &s, reg(0.5), DivergenceKind::EntropicW2).unwrap();
        assert_relative_eq!(r.value, base.value + 4.0, max_relative = 1e-14);
        assert_eq!(r.mean_term, 4.0);
    }
}
