//! Covariance kernels and mean functions on the unit cube.
//!
//! The RBF kernel is `variance * exp(-|x - y|^2 / (2 lengthscale^2))` and the
//! linear kernel is `<x, y>`. Kernels are written in the textual form
//! `rbf:variance=1,lengthscale=1` or `linear`; the input dimension travels
//! separately.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::sampling::IndexSample;

pub type KernelFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
pub type MeanFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A user-supplied kernel. It must be symmetric and positive definite.
#[derive(Clone)]
pub struct CustomKernel {
    name: String,
    eval: Arc<KernelFn>,
}

impl CustomKernel {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum KernelFamily {
    Rbf { variance: f64, lengthscale: f64 },
    Linear,
    Custom(CustomKernel),
}

impl KernelFamily {
    pub fn rbf(variance: f64, lengthscale: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(invalid(format!(
                "rbf variance must be positive, got {variance}"
            )));
        }
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(invalid(format!(
                "rbf lengthscale must be positive, got {lengthscale}"
            )));
        }
        Ok(KernelFamily::Rbf {
            variance,
            lengthscale,
        })
    }

    /// Parses `rbf:variance=..,lengthscale=..` (both default to 1) or `linear`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, params) = match spec.split_once(':') {
            Some((n, p)) => (n.trim(), p.trim()),
            None => (spec, ""),
        };
        match name.to_ascii_lowercase().as_str() {
            "rbf" => {
                let mut variance = 1.0;
                let mut lengthscale = 1.0;
                for kv in params.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let (k, v) = kv.split_once('=').ok_or_else(|| {
                        invalid(format!("expected key=value in kernel spec, got {kv:?}"))
                    })?;
                    let v: f64 = v
                        .trim()
                        .parse()
                        .map_err(|e| invalid(format!("kernel parameter {k}: {e}")))?;
                    match k.trim() {
                        "variance" => variance = v,
                        "lengthscale" => lengthscale = v,
                        other => return Err(invalid(format!("unknown rbf parameter {other:?}"))),
                    }
                }
                KernelFamily::rbf(variance, lengthscale)
            }
            "linear" if params.is_empty() => Ok(KernelFamily::Linear),
            "linear" => Err(invalid("the linear kernel takes no parameters")),
            other => Err(invalid(format!("unknown kernel family {other:?}"))),
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::Rbf {
                variance,
                lengthscale,
            } => {
                write!(f, "rbf:variance={variance},lengthscale={lengthscale}")
            }
            KernelFamily::Linear => f.write_str("linear"),
            KernelFamily::Custom(c) => write!(f, "custom:{}", c.name),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Kernel {
    family: KernelFamily,
    input_dim: usize,
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (dim={})", self.family, self.input_dim)
    }
}

impl Kernel {
    pub fn new(family: KernelFamily, input_dim: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(invalid("kernel input dimension must be at least 1"));
        }
        if let KernelFamily::Rbf {
            variance,
            lengthscale,
        } = family
        {
            KernelFamily::rbf(variance, lengthscale)?;
        }
        Ok(Self { family, input_dim })
    }

    pub fn rbf(variance: f64, lengthscale: f64, input_dim: usize) -> Result<Self> {
        Self::new(KernelFamily::rbf(variance, lengthscale)?, input_dim)
    }

    pub fn linear(input_dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Linear, input_dim)
    }

    pub fn custom(
        name: impl Into<String>,
        input_dim: usize,
        eval: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(
            KernelFamily::Custom(CustomKernel::new(name, eval)),
            input_dim,
        )
    }

    /// Parses a kernel spec string for the given input dimension.
    pub fn parse(spec: &str, input_dim: usize) -> Result<Self> {
        Self::new(KernelFamily::parse(spec)?, input_dim)
    }

    /// True when both kernels are provably the same function: equal family
    /// parameters and dimension, or the same custom evaluator.
    pub fn same_as(&self, other: &Kernel) -> bool {
        self.input_dim == other.input_dim
            && match (&self.family, &other.family) {
                (
                    KernelFamily::Rbf {
                        variance: v0,
                        lengthscale: l0,
                    },
                    KernelFamily::Rbf {
                        variance: v1,
                        lengthscale: l1,
                    },
                ) => v0 == v1 && l0 == l1,
                (KernelFamily::Linear, KernelFamily::Linear) => true,
                (KernelFamily::Custom(a), KernelFamily::Custom(b)) => Arc::ptr_eq(&a.eval, &b.eval),
                _ => false,
            }
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        for p in [x, y] {
            if p.len() != self.input_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.input_dim,
                    got: p.len(),
                });
            }
        }
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.family {
            KernelFamily::Rbf {
                variance,
                lengthscale,
            } => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                variance * (-sq / (2.0 * lengthscale * lengthscale)).exp()
            }
            KernelFamily::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            KernelFamily::Custom(c) => (c.eval)(x, y),
        }
    }

    /// `sup |K(x, y)|` over `[0,1]^d`, with the default search settings for
    /// custom kernels.
    pub fn sup_bound(&self) -> KernelBound {
        self.sup_bound_with(&SupSearch::default())
    }

    /// Analytic for RBF (the variance) and linear (`d`, attained at the all-ones
    /// corner). Custom kernels are searched along the diagonal: for a PSD
    /// kernel `|K(x,y)| <= sqrt(K(x,x) K(y,y))`, so the supremum is a diagonal
    /// value. The search is a regular grid up to `max_grid_dim`, a Latin
    /// hypercube design above it; neither is a certified bound.
    pub fn sup_bound_with(&self, search: &SupSearch) -> KernelBound {
        match &self.family {
            KernelFamily::Rbf { variance, .. } => KernelBound {
                kappa: *variance,
                method: BoundMethod::Analytic,
            },
            KernelFamily::Linear => KernelBound {
                kappa: self.input_dim as f64,
                method: BoundMethod::Analytic,
            },
            KernelFamily::Custom(_) => {
                let d = self.input_dim;
                let diag = |x: &[f64]| self.eval_unchecked(x, x).abs();
                if d <= search.max_grid_dim {
                    let r = search.grid_resolution.max(2);
                    let mut idx = vec![0usize; d];
                    let mut x = vec![0.0; d];
                    let mut kappa = 0.0f64;
                    loop {
                        for (xi, &ii) in x.iter_mut().zip(&idx) {
                            *xi = ii as f64 / (r - 1) as f64;
                        }
                        kappa = kappa.max(diag(&x));
                        // odometer increment
                        let mut axis = 0;
                        while axis < d {
                            idx[axis] += 1;
                            if idx[axis] < r {
                                break;
                            }
                            idx[axis] = 0;
                            axis += 1;
                        }
                        if axis == d {
                            break;
                        }
                    }
                    KernelBound {
                        kappa,
                        method: BoundMethod::GridSearch { resolution: r },
                    }
                } else {
                    let m = search.lhs_samples.max(1);
                    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
                    let strata: Vec<Vec<usize>> = (0..d)
                        .map(|_| {
                            let mut perm: Vec<usize> = (0..m).collect();
                            for i in (1..m).rev() {
                                let j = rng.random_range(0..=i);
                                perm.swap(i, j);
                            }
                            perm
                        })
                        .collect();
                    let mut x = vec![0.0; d];
                    let mut kappa = 0.0f64;
                    for i in 0..m {
                        for (xi, stratum) in x.iter_mut().zip(&strata) {
                            *xi = (stratum[i] as f64 + rng.random::<f64>()) / m as f64;
                        }
                        kappa = kappa.max(diag(&x));
                    }
                    KernelBound {
                        kappa,
                        method: BoundMethod::LatinHypercube { samples: m },
                    }
                }
            }
        }
    }

    /// Checks that `points` is nonempty, of this kernel's dimension and inside
    /// the unit cube.
    pub fn check_sample(&self, points: &IndexSample) -> Result<()> {
        if points.is_empty() {
            return Err(invalid("cannot build a Gram matrix from an empty sample"));
        }
        if points.dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: points.dim(),
            });
        }
        if !points.in_unit_cube() {
            return Err(invalid("sample points must lie in the unit cube"));
        }
        Ok(())
    }

    /// Gram matrix over `points`; with `scaled` every entry carries the `1/n`
    /// factor, giving the matrix that shares its spectrum with the empirical
    /// covariance operator.
    pub fn gram(&self, points: &IndexSample, scaled: bool) -> Result<EmpiricalGram> {
        self.check_sample(points)?;
        let n = points.len();
        let scale = if scaled { 1.0 / n as f64 } else { 1.0 };
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let xj = points.point(j);
            for i in j..n {
                let v = self.eval_unchecked(points.point(i), xj) * scale;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(EmpiricalGram { matrix: m, scaled })
    }
}

/// Settings for the custom-kernel sup search.
#[derive(Debug, Clone)]
pub struct SupSearch {
    pub grid_resolution: usize,
    pub max_grid_dim: usize,
    pub lhs_samples: usize,
    pub seed: u64,
}

impl Default for SupSearch {
    fn default() -> Self {
        Self {
            grid_resolution: 200,
            max_grid_dim: 3,
            lhs_samples: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundMethod {
    Analytic,
    GridSearch { resolution: usize },
    LatinHypercube { samples: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelBound {
    pub kappa: f64,
    pub method: BoundMethod,
}

/// Gram matrix of a kernel over an index sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalGram {
    pub matrix: DMatrix<f64>,
    pub scaled: bool,
}

impl EmpiricalGram {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// PSD tolerance `1e-10 * n * kappa`.
    pub fn psd_tolerance(&self, kappa: f64) -> f64 {
        1e-10 * self.n() as f64 * kappa
    }
}

/// Mean function of a Gaussian process; zero unless stated otherwise.
#[derive(Clone, Default)]
pub enum MeanFunction {
    #[default]
    Zero,
    Constant(f64),
    Custom(Arc<MeanFn>),
}

impl fmt::Debug for MeanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeanFunction::Zero => f.write_str("Zero"),
            MeanFunction::Constant(c) => write!(f, "Constant({c})"),
            MeanFunction::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl MeanFunction {
    pub fn custom(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        MeanFunction::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            MeanFunction::Zero => 0.0,
            MeanFunction::Constant(c) => *c,
            MeanFunction::Custom(f) => f(x),
        }
    }
}

/// Monte Carlo estimate of `||m0 - m1||^2` in `L^2` of the base measure.
pub fn mean_term(m0: &MeanFunction, m1: &MeanFunction, points: &IndexSample) -> Result<f64> {
    if points.is_empty() {
        return Err(invalid("mean term needs a nonempty sample"));
    }
    let sum: f64 = points
        .points()
        .map(|x| {
            let d = m0.eval(x) - m1.eval(x);
            d * d
        })
        .sum();
    Ok(sum / points.len() as f64)
}
