//! Halton-sequence standard-normal draws for maximum simulated likelihood.
//!
//! Draws are generated once per estimation and never change across optimizer
//! iterations: the whole matrix is a pure function of
//! `(n_individuals, n_draws, n_dims, skip)`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::stats::inverse_normal_cdf;

/// Prime bases, one per random-coefficient dimension.
pub const HALTON_PRIMES: [u64; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

/// Hard cap on dimensions: plain (unscrambled) Halton sequences develop
/// strong correlation in higher prime bases.
pub const MAX_DIMS: usize = HALTON_PRIMES.len();

/// Default count of discarded initial Halton points, which are poorly spread.
pub const DEFAULT_SKIP: usize = 100;

/// Radical inverse of `index` in the given base: the base-b digits of `index`
/// reversed and read as a fraction. Lies strictly inside (0, 1) for index >= 1.
pub fn radical_inverse(index: u64, base: u64) -> Result<f64> {
    if index == 0 {
        return Err(Error::invalid(
            "radical_inverse requires index >= 1 (index 0 maps to 0, outside (0,1))",
        ));
    }
    if base < 2 {
        return Err(Error::invalid(format!(
            "radical_inverse requires base >= 2, got {base}"
        )));
    }
    let mut i = index;
    let mut scale = 1.0 / base as f64;
    let mut value = 0.0;
    while i > 0 {
        value += scale * (i % base) as f64;
        i /= base;
        scale /= base as f64;
    }
    Ok(value)
}

/// Per-individual blocks of standard-normal draws, fixed for the lifetime of
/// an estimation.
///
/// Individual `n` (0-based) owns Halton indices
/// `skip + n*R + 1 ..= skip + (n+1)*R`; dimension `d` uses the d-th prime
/// base. Uniform points are mapped to normals through the inverse CDF.
#[derive(Clone, Debug)]
pub struct DrawMatrix {
    n_individuals: usize,
    n_draws: usize,
    n_dims: usize,
    skip: usize,
    values: Vec<f64>,
}

impl DrawMatrix {
    /// Builds the full draw matrix. All counts must be positive and
    /// `n_dims <= 10`.
    pub fn build(n_individuals: usize, n_draws: usize, n_dims: usize, skip: usize) -> Result<Self> {
        if n_individuals == 0 || n_draws == 0 || n_dims == 0 {
            return Err(Error::invalid(
                "draw matrix requires positive individual, draw, and dimension counts",
            ));
        }
        if n_dims > MAX_DIMS {
            return Err(Error::invalid(format!(
                "at most {MAX_DIMS} random dimensions are supported (plain Halton \
                 correlation degrades beyond that), got {n_dims}"
            )));
        }
        let mut values = vec![0.0; n_individuals * n_draws * n_dims];
        for n in 0..n_individuals {
            for r in 0..n_draws {
                let index = (skip + n * n_draws + r + 1) as u64;
                let base = (n * n_draws + r) * n_dims;
                for (d, &prime) in HALTON_PRIMES[..n_dims].iter().enumerate() {
                    let u = radical_inverse(index, prime)?;
                    values[base + d] = inverse_normal_cdf(u)?;
                }
            }
        }
        Ok(DrawMatrix {
            n_individuals,
            n_draws,
            n_dims,
            skip,
            values,
        })
    }

    /// A zero-dimension matrix for models without random coefficients.
    pub fn empty(n_individuals: usize) -> Self {
        DrawMatrix {
            n_individuals,
            n_draws: 1,
            n_dims: 0,
            skip: 0,
            values: Vec::new(),
        }
    }

    pub fn n_individuals(&self) -> usize {
        self.n_individuals
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn skip(&self) -> usize {
        self.skip
    }

    /// The `n_dims` normals for one (individual, draw) pair.
    #[inline]
    pub fn at(&self, individual: usize, draw: usize) -> &[f64] {
        let start = (individual * self.n_draws + draw) * self.n_dims;
        &self.values[start..start + self.n_dims]
    }

    /// Debug dump for audits: one row per (individual, draw, dimension).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "individual,draw,dim,value")?;
        for n in 0..self.n_individuals {
            for r in 0..self.n_draws {
                for (d, v) in self.at(n, r).iter().enumerate() {
                    writeln!(w, "{n},{r},{d},{v}")?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn radical_inverse_known_values() {
        assert_eq!(radical_inverse(1, 2).unwrap(), 0.5);
        assert_eq!(radical_inverse(3, 2).unwrap(), 0.75);
        // 5 in base 3 is 12; reversed 0.21_3 = 2/3 + 1/9 = 7/9.
        assert_abs_diff_eq!(radical_inverse(5, 3).unwrap(), 7.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn radical_inverse_rejects_index_zero() {
        assert!(radical_inverse(0, 2).is_err());
        assert!(radical_inverse(1, 1).is_err());
    }

    #[test]
    fn radical_inverse_stays_in_open_unit_interval() {
        for base in [2u64, 3, 5, 7, 29] {
            for index in 1..5000u64 {
                let u = radical_inverse(index, base).unwrap();
                assert!(u > 0.0 && u < 1.0, "index {index} base {base} gave {u}");
            }
        }
    }

    #[test]
    fn build_matches_hand_derived_example() {
        // One individual, R=2, one dimension, skip=0: indices 1 and 2 in base
        // 2 give uniforms 0.5 and 0.25, hence normals 0 and -0.6745.
        let draws = DrawMatrix::build(1, 2, 1, 0).unwrap();
        assert_eq!(draws.at(0, 0)[0], 0.0);
        assert_abs_diff_eq!(draws.at(0, 1)[0], -0.6744897501960817, epsilon = 1e-12);
    }

    #[test]
    fn build_is_deterministic() {
        let a = DrawMatrix::build(7, 31, 3, 100).unwrap();
        let b = DrawMatrix::build(7, 31, 3, 100).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn individuals_get_disjoint_index_blocks() {
        let skip = 100;
        let r = 5;
        let draws = DrawMatrix::build(3, r, 1, skip).unwrap();
        // Individual 1's draws equal the radical inverses of indices
        // skip + R + 1 ..= skip + 2R, which individual 0 never touches.
        for k in 0..r {
            let expected =
                inverse_normal_cdf(radical_inverse((skip + r + k + 1) as u64, 2).unwrap()).unwrap();
            assert_eq!(draws.at(1, k)[0], expected);
        }
    }

    #[test]
    fn rejects_too_many_dimensions() {
        assert!(DrawMatrix::build(1, 1, 11, 0).is_err());
        assert!(DrawMatrix::build(0, 1, 1, 0).is_err());
        assert!(DrawMatrix::build(1, 0, 1, 0).is_err());
        assert!(DrawMatrix::build(1, 1, 0, 0).is_err());
    }

    #[test]
    fn draw_moments_approach_standard_normal() {
        // 50 individuals x 200 draws = 10,000 points per dimension.
        let draws = DrawMatrix::build(50, 200, 2, DEFAULT_SKIP).unwrap();
        for d in 0..2 {
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            let count = (draws.n_individuals() * draws.n_draws()) as f64;
            for n in 0..draws.n_individuals() {
                for r in 0..draws.n_draws() {
                    let v = draws.at(n, r)[d];
                    assert!(v.is_finite());
                    sum += v;
                    sumsq += v * v;
                }
            }
            let mean = sum / count;
            let var = sumsq / count - mean * mean;
            assert!(mean.abs() < 0.02, "dim {d}: mean {mean}");
            assert!((var - 1.0).abs() < 0.05, "dim {d}: var {var}");
        }
    }
}
