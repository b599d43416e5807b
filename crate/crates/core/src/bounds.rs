//! Error bounds for the marginal estimators, as functions of the kernel
//! sup-bounds `kappa0, kappa1`, the regularization `eps`, the number of
//! marginals `n` and, for the concentration bounds, the level `theta`.
//!
//! | bound | formula | holds |
//! |-------|---------|-------|
//! | [`expected_bound_entropic`] | `(k0 + k1 + 8 k0 k1 / eps) / sqrt(n)` | in expectation |
//! | [`concentration_bound_entropic`] | `sqrt((72 (k0+k1)^2 + 288 k0^2 k1^2 / eps^2) theta / n)` | w.p. `1 - 6 e^-theta` |
//! | [`expected_bound_sinkhorn`] | `4 (k0+k1)^2 / (eps sqrt(n))` | in expectation |
//! | [`concentration_bound_sinkhorn`] | `8 sqrt(2) (k0+k1)^2 / eps * sqrt(theta / n)` | w.p. `1 - 4 e^-theta` |
//!
//! The kappas must be true sup-bounds (see [`crate::kernels::Kernel::sup_bound`]),
//! not values read off a sampled Gram matrix.

use serde::Serialize;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundQuery {
    pub kappa0: f64,
    pub kappa1: f64,
    pub epsilon: f64,
    pub n: usize,
    pub theta: Option<f64>,
}

impl BoundQuery {
    pub fn new(kappa0: f64, kappa1: f64, epsilon: f64, n: usize) -> Self {
        Self {
            kappa0,
            kappa1,
            epsilon,
            n,
            theta: None,
        }
    }

    pub fn with_theta(self, theta: f64) -> Self {
        Self {
            theta: Some(theta),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, k) in [("kappa0", self.kappa0), ("kappa1", self.kappa1)] {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(invalid(format!("{name} must be finite and >= 0, got {k}")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        if let Some(t) = self.theta {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid(format!("theta must be positive, got {t}")));
            }
        }
        Ok(())
    }

    fn theta(&self) -> Result<f64> {
        self.validate()?;
        self.theta
            .ok_or_else(|| invalid("concentration bounds need theta"))
    }

    fn sqrt_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }

    fn kappa_sum(&self) -> f64 {
        self.kappa0 + self.kappa1
    }
}

/// A high-probability bound: the error is at most `bound` with probability at
/// least `confidence`. `vacuous` is set when `confidence <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationBound {
    pub bound: f64,
    pub confidence: f64,
    pub vacuous: bool,
}

impl ConcentrationBound {
    fn new(bound: f64, confidence: f64) -> Self {
        Self {
            bound,
            confidence,
            vacuous: confidence <= 0.0,
        }
    }
}

pub fn expected_bound_entropic(q: &BoundQuery) -> Result<f64> {
    q.validate()?;
    Ok((q.kappa_sum() + 8.0 / q.epsilon * q.kappa0 * q.kappa1) / q.sqrt_n())
}

pub fn concentration_bound_entropic(q: &BoundQuery) -> Result<ConcentrationBound> {
    let theta = q.theta()?;
    let s = q.kappa_sum();
    let p = q.kappa0 * q.kappa1 / q.epsilon;
    let bound = ((72.0 * s * s + 288.0 * p * p) * theta / q.n as f64).sqrt();
    Ok(ConcentrationBound::new(bound, 1.0 - 6.0 * (-theta).exp()))
}

pub fn expected_bound_sinkhorn(q: &BoundQuery) -> Result<f64> {
    q.validate()?;
    let s = q.kappa_sum();
    Ok(4.0 * s * s / (q.epsilon * q.sqrt_n()))
}

pub fn concentration_bound_sinkhorn(q: &BoundQuery) -> Result<ConcentrationBound> {
    let theta = q.theta()?;
    let s = q.kappa_sum();
    let bound = 8.0 * std::f64::consts::SQRT_2 * s * s / q.epsilon * (theta / q.n as f64).sqrt();
    Ok(ConcentrationBound::new(bound, 1.0 - 4.0 * (-theta).exp()))
}

/// All four bounds for one query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundTable {
    pub query: BoundQuery,
    pub expected_entropic: f64,
    pub concentration_entropic: ConcentrationBound,
    pub expected_sinkhorn: f64,
    pub concentration_sinkhorn: ConcentrationBound,
}

pub fn bound_table(q: &BoundQuery) -> Result<BoundTable> {
    Ok(BoundTable {
        query: *q,
        expected_entropic: expected_bound_entropic(q)?,
        concentration_entropic: concentration_bound_entropic(q)?,
        expected_sinkhorn: expected_bound_sinkhorn(q)?,
        concentration_sinkhorn: concentration_bound_sinkhorn(q)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn q(k0: f64, k1: f64, eps: f64, n: usize) -> BoundQuery {
        BoundQuery::new(k0, k1, eps, n)
    }

    #[test]
    fn expected_entropic_examples() {
        assert_relative_eq!(
            expected_bound_entropic(&q(1.0, 1.0, 1.0, 100)).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            expected_bound_entropic(&q(0.0, 3.0, 0.2, 16)).unwrap(),
            0.75,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            expected_bound_entropic(&q(1.0, 1.0, 8.0, 100)).unwrap(),
            0.3,
            epsilon = 1e-15
        );
    }

    #[test]
    fn concentration_entropic_examples() {
        let b = concentration_bound_entropic(&q(1.0, 1.0, 1.0, 100).with_theta(1.0)).unwrap();
        assert_relative_eq!(b.bound, 2.4, epsilon = 1e-14);
        assert_relative_eq!(b.confidence, 1.0 - 6.0 * (-1f64).exp(), epsilon = 1e-15);
        assert!(b.vacuous);
        let b = concentration_bound_entropic(&q(1.0, 1.0, 1.0, 400).with_theta(1.0)).unwrap();
        assert_relative_eq!(b.bound, 1.2, epsilon = 1e-14);
        let tiny = concentration_bound_entropic(&q(1.0, 1.0, 1.0, 100).with_theta(1e-12)).unwrap();
        assert!(tiny.bound < 1e-5);
        assert!(tiny.vacuous);
        assert_relative_eq!(tiny.confidence, -5.0, epsilon = 1e-10);
        let ok = concentration_bound_entropic(&q(1.0, 1.0, 1.0, 100).with_theta(5.0)).unwrap();
        assert!(!ok.vacuous);
    }

    #[test]
    fn expected_sinkhorn_examples() {
        assert_relative_eq!(
            expected_bound_sinkhorn(&q(1.0, 1.0, 1.0, 100)).unwrap(),
            1.6,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            expected_bound_sinkhorn(&q(1.0, 1.0, 16.0, 100)).unwrap(),
            0.1,
            epsilon = 1e-15
        );
        assert_eq!(
            expected_bound_sinkhorn(&q(0.0, 0.0, 1.0, 100)).unwrap(),
            0.0
        );
    }

    #[test]
    fn concentration_sinkhorn_examples() {
        let b = concentration_bound_sinkhorn(&q(1.0, 1.0, 1.0, 100).with_theta(1.0)).unwrap();
        assert_relative_eq!(b.bound, 32.0 * 2f64.sqrt() / 10.0, epsilon = 1e-14);
        assert!((b.bound - 4.5254834).abs() < 1e-7);
        let c =
            concentration_bound_sinkhorn(&q(1.0, 1.0, 1.0, 100).with_theta(400f64.ln())).unwrap();
        assert_relative_eq!(c.confidence, 0.99, epsilon = 1e-14);
        let d = concentration_bound_sinkhorn(&q(2.0, 2.0, 1.0, 100).with_theta(1.0)).unwrap();
        assert_relative_eq!(d.bound, 4.0 * b.bound, epsilon = 1e-13);
    }

    #[test]
    fn invalid_queries() {
        assert!(expected_bound_sinkhorn(&q(-1.0, 1.0, 1.0, 10)).is_err());
        assert!(expected_bound_sinkhorn(&q(1.0, 1.0, 0.0, 10)).is_err());
        assert!(expected_bound_entropic(&q(1.0, 1.0, 1.0, 0)).is_err());
        assert!(concentration_bound_sinkhorn(&q(1.0, 1.0, 1.0, 10)).is_err());
        assert!(concentration_bound_sinkhorn(&q(1.0, 1.0, 1.0, 10).with_theta(0.0)).is_err());
        assert!(expected_bound_entropic(&q(1.0, f64::NAN, 1.0, 10)).is_err());
    }

    #[test]
    fn expected_bounds_halve_when_n_quadruples() {
        for n in [1usize, 7, 100, 2500] {
            let a = q(0.7, 2.0, 0.3, n);
            let b = q(0.7, 2.0, 0.3, 4 * n);
            assert_relative_eq!(
                expected_bound_sinkhorn(&b).unwrap() * 2.0,
                expected_bound_sinkhorn(&a).unwrap(),
                max_relative = 1e-14
            );
            assert_relative_eq!(
                expected_bound_entropic(&b).unwrap() * 2.0,
                expected_bound_entropic(&a).unwrap(),
                max_relative = 1e-14
            );
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn all(q: &BoundQuery) -> [f64; 4] {
            [
                expected_bound_entropic(q).unwrap(),
                concentration_bound_entropic(q).unwrap().bound,
                expected_bound_sinkhorn(q).unwrap(),
                concentration_bound_sinkhorn(q).unwrap().bound,
            ]
        }

        fn le(a: [f64; 4], b: [f64; 4]) -> bool {
            a.iter().zip(&b).all(|(x, y)| *x <= *y * (1.0 + 1e-14))
        }

        proptest! {
            #[test]
            fn monotone(
                k0 in 0.0f64..10.0, k1 in 0.0f64..10.0, eps in 0.01f64..100.0,
                n in 1usize..10_000, theta in 0.01f64..20.0, bump in 1.0f64..5.0,
            ) {
                let base = q(k0, k1, eps, n).with_theta(theta);
                let b = all(&base);
                let more_n = BoundQuery { n: n + 1 + (bump as usize) * n, ..base };
                let more_eps = BoundQuery { epsilon: eps * bump, ..base };
                let more_k0 = BoundQuery { kappa0: k0 * bump + 0.1, ..base };
                let more_k1 = BoundQuery { kappa1: k1 * bump + 0.1, ..base };
                prop_assert!(le(all(&more_n), b));
                prop_assert!(le(all(&more_eps), b));
                prop_assert!(le(b, all(&more_k0)));
                prop_assert!(le(b, all(&more_k1)));
                prop_assert!(le(b, all(&base.with_theta(theta * bump))));
            }
        }
    }
}
