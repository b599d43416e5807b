//! Spectral primitives: symmetric eigendecomposition, PSD square roots, the
//! cross-spectrum of two PSD matrices and the trace functional
//!
//! ```text
//! F(A) = Tr[-I + (I + A)^{1/2}] - log det(1/2 + 1/2 (I + A)^{1/2})
//! ```
//!
//! evaluated eigenvalue by eigenvalue.
//!
//! Eigenvalues of a PSD input that fall in `[-tol, 0)` are roundoff and are
//! clamped to zero (and counted); anything below `-tol` is reported as a
//! [`Error::NumericalDomain`].

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::kernels::EmpiricalGram;

/// Eigenvalues of a PSD matrix, sorted descending, all nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    clamped_count: usize,
}

impl Spectrum {
    /// Sorts `values` descending and clamps entries in `[-tol, 0)` to zero.
    pub fn from_psd_eigenvalues(mut values: Vec<f64>, tol: f64) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalDomain("non-finite eigenvalue".into()));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        let mut clamped_count = 0;
        for v in values.iter_mut().rev() {
            if *v >= 0.0 {
                break;
            }
            if *v < -tol {
                return Err(Error::NumericalDomain(format!(
                    "eigenvalue {v:e} below PSD tolerance -{tol:e}"
                )));
            }
            *v = 0.0;
            clamped_count += 1;
        }
        Ok(Self {
            eigenvalues: values,
            clamped_count,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn clamped_count(&self) -> usize {
        self.clamped_count
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Every eigenvalue multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Spectrum {
        debug_assert!(factor >= 0.0);
        Spectrum {
            eigenvalues: self.eigenvalues.iter().map(|v| v * factor).collect(),
            clamped_count: self.clamped_count,
        }
    }

    /// Spectrum of `A^2` given the spectrum of `A`.
    pub fn squared(&self) -> Spectrum {
        Spectrum {
            eigenvalues: self.eigenvalues.iter().map(|v| v * v).collect(),
            clamped_count: self.clamped_count,
        }
    }
}

/// Eigenvalues (descending) and, on request, matching eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Option<DMatrix<f64>>,
}

fn check_square(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(invalid(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(invalid("matrix has non-finite entries"));
    }
    Ok(())
}

fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Default PSD tolerance, `1e-10 * n * kappa`, with `kappa` taken as the larger
/// of the trace and the largest entry.
pub fn psd_tolerance(a: &DMatrix<f64>) -> f64 {
    1e-10 * a.nrows() as f64 * scale_of(a)
}

fn scale_of(a: &DMatrix<f64>) -> f64 {
    a.trace().abs().max(max_abs(a))
}

/// Symmetric eigendecomposition. The input must be symmetric to within
/// `1e-12 * max|A_ij|`; it is symmetrized as `(A + A^T)/2` before solving.
pub fn sym_eig(a: &DMatrix<f64>, with_vectors: bool) -> Result<SymEig> {
    check_square(a)?;
    let tol_sym = 1e-12 * max_abs(a);
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > tol_sym {
                return Err(invalid(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(sym_eig_symmetrized(a, with_vectors))
}

pub(crate) fn sym_eig_symmetrized(a: &DMatrix<f64>, with_vectors: bool) -> SymEig {
    let n = a.nrows();
    if n == 0 {
        return SymEig {
            values: Vec::new(),
            vectors: with_vectors.then(|| DMatrix::zeros(0, 0)),
        };
    }
    let sym = (a + a.transpose()) * 0.5;
    if !with_vectors {
        let mut values: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(|x, y| y.total_cmp(x));
        return SymEig {
            values,
            vectors: None,
        };
    }
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    SymEig {
        values,
        vectors: Some(vectors),
    }
}

/// PSD spectrum of a symmetric matrix with the default tolerance.
pub fn psd_spectrum(a: &DMatrix<f64>) -> Result<Spectrum> {
    check_square(a)?;
    let values = sym_eig_symmetrized(a, false).values;
    Spectrum::from_psd_eigenvalues(values, psd_tolerance(a))
}

/// Principal square root of a PSD matrix with the default tolerance.
pub fn psd_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    psd_sqrt_with_tol(a, psd_tolerance(a))
}

pub fn psd_sqrt_with_tol(a: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    check_square(a)?;
    Ok(psd_sqrt_parts(a, tol)?.0)
}

/// Returns `A^{1/2}` together with the clamped spectrum of `A`.
fn psd_sqrt_parts(a: &DMatrix<f64>, tol: f64) -> Result<(DMatrix<f64>, Spectrum)> {
    let eig = sym_eig_symmetrized(a, true);
    let vectors = eig.vectors.expect("vectors requested");
    let spectrum = Spectrum::from_psd_eigenvalues(eig.values, tol)?;
    // sym_eig already sorted descending, and clamping keeps the order.
    let mut scaled = vectors.clone();
    for (mut col, &lambda) in scaled.column_iter_mut().zip(spectrum.eigenvalues()) {
        col *= lambda.sqrt();
    }
    let root = &scaled * vectors.transpose();
    Ok(((&root + root.transpose()) * 0.5, spectrum))
}

/// Spectra of two PSD matrices and of `A^{1/2} B A^{1/2}`, without the
/// `16/eps^2` factor. The last one equals the spectrum of the product `AB`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSpectra {
    pub first: Spectrum,
    pub second: Spectrum,
    pub cross: Spectrum,
}

/// Decomposes a PSD pair once so that every `eps` can be evaluated cheaply.
pub fn pair_spectra(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<PairSpectra> {
    check_square(a)?;
    check_square(b)?;
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    let n = a.nrows();
    let (root, first) = psd_sqrt_parts(a, psd_tolerance(a))?;
    let second = psd_spectrum(b)?;
    let product = &root * b * &root;
    let cross_tol = 1e-10 * n as f64 * scale_of(a) * scale_of(b);
    let cross =
        Spectrum::from_psd_eigenvalues(sym_eig_symmetrized(&product, false).values, cross_tol)?;
    Ok(PairSpectra {
        first,
        second,
        cross,
    })
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    Ok(())
}

/// Eigenvalues of `(16/eps^2) A^{1/2} B A^{1/2}` for PSD matrices.
pub fn cross_spectrum_matrices(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    epsilon: f64,
) -> Result<Spectrum> {
    check_epsilon(epsilon)?;
    Ok(pair_spectra(a, b)?.cross.scaled(16.0 / (epsilon * epsilon)))
}

/// Eigenvalues of `(16/eps^2) K0^{1/2} K1 K0^{1/2}` for two Gram matrices.
pub fn cross_spectrum(k0: &EmpiricalGram, k1: &EmpiricalGram, epsilon: f64) -> Result<Spectrum> {
    cross_spectrum_matrices(&k0.matrix, &k1.matrix, epsilon)
}

/// Per-eigenvalue pieces of the entropic closed form for `a >= 0`:
/// `m = -1 + sqrt(1 + a)` and `log(1 + m/2)`, both cancellation-safe.
#[inline]
pub(crate) fn m_and_logdet(a: f64) -> (f64, f64) {
    let s = (1.0 + a).sqrt();
    let m = a / (1.0 + s);
    (m, (0.5 * m).ln_1p())
}

#[inline]
pub(crate) fn f_unchecked(a: f64) -> f64 {
    let (m, l) = m_and_logdet(a);
    m - l
}

/// `f(a) = (-1 + sqrt(1 + a)) - log(1/2 + 1/2 sqrt(1 + a))`.
pub fn f_scalar(a: f64) -> Result<f64> {
    if a.is_nan() || a < 0.0 {
        return Err(invalid(format!("f is defined for a >= 0, got {a}")));
    }
    Ok(f_unchecked(a))
}

/// `F` evaluated on a spectrum: the sum of `f` over its eigenvalues.
pub fn f_from_spectrum(s: &Spectrum) -> f64 {
    s.eigenvalues().iter().map(|&a| f_unchecked(a)).sum()
}

/// Schatten-1 norm: the sum of singular values.
pub fn trace_norm(a: &DMatrix<f64>) -> Result<f64> {
    check_square(a)?;
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    Ok(a.clone().singular_values().sum())
}

/// Schatten-1 norm of a symmetric matrix via its eigenvalues.
pub fn trace_norm_symmetric(a: &DMatrix<f64>) -> Result<f64> {
    Ok(sym_eig(a, false)?.values.iter().map(|v| v.abs()).sum())
}

/// Hilbert-Schmidt (Frobenius) norm.
pub fn hs_norm(a: &DMatrix<f64>) -> Result<f64> {
    check_square(a)?;
    Ok(a.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(n: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(n, n, v)
    }

    #[test]
    fn eig_examples() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0]));
        assert_eq!(sym_eig(&d, false).unwrap().values, vec![3.0, 2.0, 1.0]);
        let id = DMatrix::<f64>::identity(4, 4);
        assert_eq!(sym_eig(&id, false).unwrap().values, vec![1.0; 4]);
        let v = sym_eig(&m(2, &[2.0, 1.0, 1.0, 2.0]), false).unwrap().values;
        assert_relative_eq!(v[0], 3.0, epsilon = 1e-14);
        assert_relative_eq!(v[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eig_reconstructs() {
        let a = m(3, &[4.0, 1.0, -2.0, 1.0, 3.0, 0.5, -2.0, 0.5, 1.0]);
        let e = sym_eig(&a, true).unwrap();
        let v = e.vectors.unwrap();
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(e.values));
        let r = &v * lam * v.transpose();
        assert!((r - &a).norm() <= 1e-10 * a.norm());
    }

    #[test]
    fn eig_rejects_bad_shapes() {
        assert!(sym_eig(&DMatrix::zeros(2, 3), false).is_err());
        assert!(sym_eig(&m(2, &[1.0, 2.0, 0.0, 1.0]), false).is_err());
        assert!(trace_norm(&DMatrix::zeros(1, 2)).is_err());
        assert!(hs_norm(&DMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn sqrt_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert!((psd_sqrt(&id).unwrap() - &id).norm() < 1e-14);
        let d = psd_sqrt(&m(2, &[4.0, 0.0, 0.0, 9.0])).unwrap();
        assert!((d - m(2, &[2.0, 0.0, 0.0, 3.0])).norm() < 1e-14);
        let a = m(2, &[2.0, 1.0, 1.0, 2.0]);
        let r = psd_sqrt(&a).unwrap();
        assert!((&r * &r - &a).norm() <= 1e-8 * a.norm());
    }

    #[test]
    fn sqrt_clamps_roundoff_and_rejects_indefinite() {
        let tiny = m(2, &[1.0, 0.0, 0.0, -1e-13]);
        let r = psd_sqrt(&tiny).unwrap();
        assert_eq!(r[(1, 1)], 0.0);
        assert!(matches!(
            psd_sqrt(&m(2, &[1.0, 0.0, 0.0, -1e-3])),
            Err(Error::NumericalDomain(_))
        ));
        let s = psd_spectrum(&tiny).unwrap();
        assert_eq!(s.clamped_count(), 1);
        assert_eq!(s.eigenvalues(), &[1.0, 0.0]);
    }

    #[test]
    fn cross_spectrum_examples() {
        let zero = DMatrix::zeros(3, 3);
        let k0 = m(3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.1, 0.0, 0.1, 1.0]);
        let s = cross_spectrum_matrices(&k0, &zero, 1.0).unwrap();
        assert!(s.eigenvalues().iter().all(|&v| v == 0.0));

        let one = DMatrix::from_element(1, 1, 1.0);
        let s = cross_spectrum_matrices(&one, &one, 2.0).unwrap();
        assert_relative_eq!(s.eigenvalues()[0], 4.0, max_relative = 1e-15);

        let id = DMatrix::<f64>::identity(2, 2);
        let s = cross_spectrum_matrices(&id, &id, 4.0).unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 1.0]);
    }

    #[test]
    fn cross_spectrum_errors() {
        let a = DMatrix::<f64>::identity(2, 2);
        let b = DMatrix::<f64>::identity(3, 3);
        assert!(matches!(
            cross_spectrum_matrices(&a, &b, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(cross_spectrum_matrices(&a, &a, 0.0).is_err());
        assert!(cross_spectrum_matrices(&a, &a, -1.0).is_err());
    }

    #[test]
    fn f_examples() {
        assert_eq!(f_scalar(0.0).unwrap(), 0.0);
        assert_relative_eq!(
            f_scalar(3.0).unwrap(),
            1.0 - 1.5f64.ln(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            f_scalar(8.0).unwrap(),
            2.0 - 2f64.ln(),
            max_relative = 1e-15
        );
        assert!((f_scalar(3.0).unwrap() - 0.5945349).abs() < 1e-7);
        assert!((f_scalar(8.0).unwrap() - 1.3068528).abs() < 1e-7);
        assert!(f_scalar(-1e-3).is_err());
        assert!(f_scalar(f64::NAN).is_err());
    }

    #[test]
    fn f_small_argument_leading_order() {
        // f(a) = a/4 - a^2/32 + O(a^3); reference values from 50-digit arithmetic.
        for (a, reference) in [
            (1e-14, 2.499_999_999_999_997e-15),
            (1e-10, 2.499_999_999_968_75e-11),
            (1e-6, 2.499_999_687_500_104_4e-7),
        ] {
            let v = f_scalar(a).unwrap();
            assert_relative_eq!(v, reference, max_relative = 1e-12);
            assert!((0.2499..=0.2501).contains(&(v / a)), "a={a}");
        }
    }

    #[test]
    fn f_is_monotone() {
        let mut prev = 0.0;
        let mut a = 0.0;
        while a <= 1e6 {
            let v = f_scalar(a).unwrap();
            assert!(v >= prev, "f decreased at {a}");
            prev = v;
            a = if a < 1.0 { a + 1e-3 } else { a * 1.001 };
        }
    }

    #[test]
    fn f_from_spectrum_examples() {
        let empty = Spectrum::from_psd_eigenvalues(vec![], 0.0).unwrap();
        assert_eq!(f_from_spectrum(&empty), 0.0);
        let s = Spectrum::from_psd_eigenvalues(vec![3.0, 8.0], 0.0).unwrap();
        assert!((f_from_spectrum(&s) - 1.9013877).abs() < 1e-7);
        let z = Spectrum::from_psd_eigenvalues(vec![0.0; 3], 0.0).unwrap();
        assert_eq!(f_from_spectrum(&z), 0.0);
    }

    #[test]
    fn norm_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_relative_eq!(trace_norm(&id).unwrap(), 3.0, epsilon = 1e-14);
        assert_relative_eq!(hs_norm(&id).unwrap(), 3f64.sqrt(), epsilon = 1e-14);
        let d = m(2, &[-2.0, 0.0, 0.0, 1.0]);
        assert_relative_eq!(trace_norm(&d).unwrap(), 3.0, epsilon = 1e-14);
        assert_relative_eq!(trace_norm_symmetric(&d).unwrap(), 3.0, epsilon = 1e-14);
        let x = m(2, &[0.0, 1.0, 1.0, 0.0]);
        assert_relative_eq!(trace_norm(&x).unwrap(), 2.0, epsilon = 1e-14);
        assert_relative_eq!(hs_norm(&x).unwrap(), 2f64.sqrt(), epsilon = 1e-14);
    }
}
