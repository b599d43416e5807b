//! Discrete entropic optimal transport, used to check the Gaussian closed form.
//!
//! One-dimensional Gaussians are discretized on a grid and the problem
//!
//! ```text
//! min_P  <P, C> + eps KL(P || a (x) b),   C_ij = |x_i - y_j|^2
//! ```
//!
//! over couplings of `a` and `b` is solved by Sinkhorn-Knopp iterations on
//! the dual potentials in the log domain.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::divergence::{entropic_w2_squared, GaussianParams, RegParam};
use crate::error::{invalid, Error, Result};
use crate::sampling::grid_1d;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    support: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Weights are renormalized to sum to one.
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(invalid(
                "support and weights must be nonempty and of equal length",
            ));
        }
        if support.iter().chain(&weights).any(|v| !v.is_finite())
            || weights.iter().any(|w| *w < 0.0)
        {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(invalid("weights sum to zero"));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { support, weights })
    }

    pub fn dirac(x: f64) -> Self {
        Self {
            support: vec![x],
            weights: vec![1.0],
        }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x * w)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * (x - m) * (x - m))
            .sum()
    }
}

/// `N(mu, var)` restricted to an `n`-point grid on `[lo, hi]`, with weights
/// proportional to the density at the grid points. The window must cover
/// `mu +- 5 sd`.
pub fn discretize_gaussian_1d(
    mu: f64,
    var: f64,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<DiscreteMeasure> {
    if !(var > 0.0 && var.is_finite()) || !mu.is_finite() {
        return Err(invalid(format!(
            "need finite mu and var > 0, got mu={mu}, var={var}"
        )));
    }
    let sd = var.sqrt();
    if lo > mu - 5.0 * sd || hi < mu + 5.0 * sd {
        return Err(invalid(format!(
            "window [{lo}, {hi}] does not cover mu +- 5 sd = [{}, {}]",
            mu - 5.0 * sd,
            mu + 5.0 * sd
        )));
    }
    let grid = grid_1d(lo, hi, n)?;
    let support = grid.coords().to_vec();
    let weights = support
        .iter()
        .map(|x| (-(x - mu) * (x - mu) / (2.0 * var)).exp())
        .collect();
    DiscreteMeasure::new(support, weights)
}

/// A coupling returned by [`sinkhorn_knopp`].
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub matrix: DMatrix<f64>,
    /// L1 distance between the row sums and `a`.
    pub row_residual: f64,
    /// L1 distance between the column sums and `b`.
    pub col_residual: f64,
    pub iterations: usize,
    /// Row residual after every iteration.
    pub residual_history: Vec<f64>,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn-Knopp for squared-distance cost.
///
/// Each iteration updates the row potential `f` then the column potential
/// `g`, so columns match `b` exactly and convergence is declared once the
/// row residual drops to `tol`.
pub fn sinkhorn_knopp(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
) -> Result<TransportPlan> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(invalid(format!("tol must be positive, got {tol}")));
    }
    let (n, m) = (a.len(), b.len());
    // Column-major storage: column j of `neg_c` is contiguous over i, and
    // column i of `neg_ct` is contiguous over j.
    let neg_c = DMatrix::from_fn(n, m, |i, j| {
        let d = a.support[i] - b.support[j];
        -d * d / epsilon
    });
    let neg_ct = neg_c.transpose();
    let log_a: Vec<f64> = a.weights.iter().map(|w| w.ln()).collect();
    let log_b: Vec<f64> = b.weights.iter().map(|w| w.ln()).collect();

    // Potentials are kept divided by epsilon.
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let row_lse = |g: &[f64], out: &mut Vec<f64>| {
        out.clear();
        out.extend(
            (0..n).map(|i| log_sum_exp(neg_ct.column(i).iter().zip(g).map(|(c, gj)| c + gj))),
        );
    };
    let mut lse = Vec::with_capacity(n);
    row_lse(&g, &mut lse);

    let mut history = Vec::new();
    for it in 1..=max_iter {
        for i in 0..n {
            f[i] = log_a[i] - lse[i];
        }
        for j in 0..m {
            let l = log_sum_exp(neg_c.column(j).iter().zip(&f).map(|(c, fi)| c + fi));
            g[j] = log_b[j] - l;
        }
        row_lse(&g, &mut lse);
        let residual: f64 = (0..n)
            .map(|i| ((f[i] + lse[i]).exp() - a.weights[i]).abs())
            .sum();
        if !residual.is_finite() {
            return Err(Error::NumericalDomain(
                "Sinkhorn residual is not finite".into(),
            ));
        }
        history.push(residual);
        if residual <= tol {
            let matrix = DMatrix::from_fn(n, m, |i, j| (f[i] + g[j] + neg_c[(i, j)]).exp());
            let col_residual = (0..m)
                .map(|j| (matrix.column(j).sum() - b.weights[j]).abs())
                .sum();
            return Ok(TransportPlan {
                matrix,
                row_residual: residual,
                col_residual,
                iterations: it,
                residual_history: history,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: history.last().copied().unwrap_or(f64::NAN),
    })
}

/// `<P, C> + eps KL(P || a (x) b)` with `0 log 0 = 0`.
pub fn entropic_cost(
    plan: &TransportPlan,
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    epsilon: f64,
) -> f64 {
    let mut transport = 0.0;
    let mut kl = 0.0;
    for j in 0..b.len() {
        for i in 0..a.len() {
            let p = plan.matrix[(i, j)];
            if p <= 0.0 {
                continue;
            }
            let d = a.support[i] - b.support[j];
            transport += p * d * d;
            kl += p * (p / (a.weights[i] * b.weights[j])).ln();
        }
    }
    transport + epsilon * kl
}

/// Closed form versus oracle for one pair of centered 1-D Gaussians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleComparison {
    pub var0: f64,
    pub var1: f64,
    pub epsilon: f64,
    pub grid_points: usize,
    pub closed_form: f64,
    pub oracle: f64,
    pub relative_gap: f64,
    pub iterations: usize,
}

/// Solves the discretized problem for `N(mu0, var0)` and `N(mu1, var1)` on a
/// shared grid spanning `+- 6 sd` of the wider Gaussian around both means.
pub fn compare_closed_form(
    (mu0, var0): (f64, f64),
    (mu1, var1): (f64, f64),
    epsilon: f64,
    grid_points: usize,
    tol: f64,
    max_iter: usize,
) -> Result<OracleComparison> {
    let reg = RegParam::new(epsilon)?;
    let closed_form = entropic_w2_squared(
        &GaussianParams::univariate(mu0, var0)?,
        &GaussianParams::univariate(mu1, var1)?,
        reg,
    )?
    .value;
    let sd = var0.max(var1).sqrt();
    let lo = mu0.min(mu1) - 6.0 * sd;
    let hi = mu0.max(mu1) + 6.0 * sd;
    let a = discretize_gaussian_1d(mu0, var0, lo, hi, grid_points)?;
    let b = discretize_gaussian_1d(mu1, var1, lo, hi, grid_points)?;
    let plan = sinkhorn_knopp(&a, &b, epsilon, tol, max_iter)?;
    let oracle = entropic_cost(&plan, &a, &b, epsilon);
    Ok(OracleComparison {
        var0,
        var1,
        epsilon,
        grid_points,
        closed_form,
        oracle,
        relative_gap: (oracle - closed_form).abs() / closed_form.abs(),
        iterations: plan.iterations,
    })
}
