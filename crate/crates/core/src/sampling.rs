//! Index samples on the unit cube.
//!
//! The base measure is uniform on `[0,1]^d`. Uniform samples are drawn with
//! ChaCha8 seeded from a 64-bit integer, so `(seed, n, d)` pins the points
//! bit-for-bit on every platform.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SampleSource {
    UniformIid,
    Grid,
    Explicit,
}

impl fmt::Display for SampleSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SampleSource::UniformIid => "uniform-iid",
            SampleSource::Grid => "grid",
            SampleSource::Explicit => "explicit",
        })
    }
}

/// An ordered set of `d`-dimensional points, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSample {
    coords: Vec<f64>,
    dim: usize,
    seed: u64,
    source: SampleSource,
}

impl IndexSample {
    /// Builds a sample from explicit points. Every coordinate must lie in `[0,1]`.
    pub fn explicit(points: &[Vec<f64>], dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("sample dimension must be at least 1"));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if let Some(c) = p.iter().find(|c| !(0.0..=1.0).contains(*c)) {
                return Err(invalid(format!("coordinate {c} outside [0,1]")));
            }
            coords.extend_from_slice(p);
        }
        Ok(Self {
            coords,
            dim,
            seed: 0,
            source: SampleSource::Explicit,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn source(&self) -> SampleSource {
        self.source
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Raw coordinates, row-major.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub(crate) fn in_unit_cube(&self) -> bool {
        self.coords.iter().all(|c| (0.0..=1.0).contains(c))
    }
}

/// Parses the one-point-per-line text format. Coordinates on a line are
/// separated by whitespace or commas; blank lines and `#` comments are skipped.
impl FromStr for IndexSample {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in s.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let p = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| invalid(format!("line {}: {t:?}: {e}", lineno + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            points.push(p);
        }
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| invalid("sample file contains no points"))?;
        IndexSample::explicit(&points, dim)
    }
}

/// Draws `n` I.I.D. points uniformly from `[0,1]^d`.
pub fn sample_uniform(n: usize, d: usize, seed: u64) -> Result<IndexSample> {
    if d < 1 {
        return Err(invalid("sample dimension must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..n * d).map(|_| rng.random::<f64>()).collect();
    Ok(IndexSample {
        coords,
        dim: d,
        seed,
        source: SampleSource::UniformIid,
    })
}

/// `n` equally spaced points from `lo` to `hi`, both endpoints included.
///
/// Grids are support points for the discrete oracle and may leave `[0,1]`.
pub fn grid_1d(lo: f64, hi: f64, n: usize) -> Result<IndexSample> {
    if n < 2 {
        return Err(invalid(format!("grid needs at least 2 points, got {n}")));
    }
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(invalid(format!(
            "grid bounds must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    let step = (hi - lo) / (n - 1) as f64;
    let mut coords: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
    coords[n - 1] = hi;
    Ok(IndexSample {
        coords,
        dim: 1,
        seed: 0,
        source: SampleSource::Grid,
    })
}

/// Derives an independent seed from a base seed and a key path
/// (e.g. `[d, n, repetition]`) with the SplitMix64 finalizer.
pub fn derive_seed(base: u64, key: &[u64]) -> u64 {
    let mut h = splitmix64(base);
    for &k in key {
        h = splitmix64(h ^ splitmix64(k.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_uniform_sample() {
        let s = sample_uniform(0, 2, 1).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.len(), 0);
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(matches!(
            sample_uniform(3, 0, 1),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn uniform_mean_near_half() {
        let s = sample_uniform(1000, 1, 7).unwrap();
        let mean = s.coords().iter().sum::<f64>() / 1000.0;
        assert!((mean - 0.5).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn uniform_is_deterministic() {
        let a = sample_uniform(50, 3, 11).unwrap();
        let b = sample_uniform(50, 3, 11).unwrap();
        assert_eq!(a.coords(), b.coords());
        let c = sample_uniform(50, 3, 12).unwrap();
        assert_ne!(a.coords(), c.coords());
        assert!(a.in_unit_cube());
    }

    #[test]
    fn uniform_prefix_is_stable_in_n() {
        let a = sample_uniform(10, 2, 5).unwrap();
        let b = sample_uniform(20, 2, 5).unwrap();
        assert_eq!(a.coords(), &b.coords()[..20]);
    }

    #[test]
    fn kolmogorov_smirnov_uniformity() {
        let n = 10_000;
        let d = 3;
        let s = sample_uniform(n, d, 2024).unwrap();
        // 1% critical value of the one-sample KS statistic, asymptotic form.
        let crit = 1.628 / (n as f64).sqrt();
        for axis in 0..d {
            let mut xs: Vec<f64> = s.points().map(|p| p[axis]).collect();
            xs.sort_by(f64::total_cmp);
            let ks = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let hi = (i + 1) as f64 / n as f64 - x;
                    let lo = x - i as f64 / n as f64;
                    hi.max(lo)
                })
                .fold(0.0, f64::max);
            assert!(ks < crit, "axis {axis}: KS {ks} >= {crit}");
        }
    }

    #[test]
    fn grid_endpoints_and_spacing() {
        assert_eq!(grid_1d(0.0, 1.0, 2).unwrap().coords(), &[0.0, 1.0]);
        assert_eq!(
            grid_1d(0.0, 1.0, 5).unwrap().coords(),
            &[0.0, 0.25, 0.5, 0.75, 1.0]
        );
        let g = grid_1d(-6.0, 6.0, 401).unwrap();
        assert_eq!(g.len(), 401);
        for w in g.coords().windows(2) {
            assert!((w[1] - w[0] - 0.03).abs() < 1e-12);
        }
        assert_eq!(g.source(), SampleSource::Grid);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(grid_1d(0.0, 1.0, 1).is_err());
        assert!(grid_1d(1.0, 1.0, 4).is_err());
    }

    #[test]
    fn explicit_validates_domain_and_dimension() {
        assert!(IndexSample::explicit(&[vec![0.2, 1.2]], 2).is_err());
        assert!(IndexSample::explicit(&[vec![0.2]], 2).is_err());
        let s = IndexSample::explicit(&[vec![0.3]], 1).unwrap();
        assert_eq!(s.source(), SampleSource::Explicit);
        assert_eq!(s.point(0), &[0.3]);
    }

    #[test]
    fn parses_text_format() {
        let s: IndexSample = "# pts\n0.1, 0.2\n\n0.3 0.4\n".parse().unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.coords(), &[0.1, 0.2, 0.3, 0.4]);
        assert!("".parse::<IndexSample>().is_err());
        assert!("0.1\n0.2 0.3\n".parse::<IndexSample>().is_err());
        assert!("abc\n".parse::<IndexSample>().is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(1, &[1, 10, 0]);
        let b = derive_seed(1, &[1, 10, 1]);
        let c = derive_seed(2, &[1, 10, 0]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(1, &[1, 10, 0]));
    }
}
