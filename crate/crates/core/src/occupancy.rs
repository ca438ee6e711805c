//! Occupancy: the number of boxes hit when `r` balls are thrown uniformly into
//! `n` boxes. Pathwise this is the number of distinct cards selected during `r`
//! random-to-top shuffles.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};

/// Above this `n * r` the PMF recurrence runs in floating point.
const EXACT_PMF_LIMIT: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyLaw {
    pub n: usize,
    pub r: usize,
    pub mean: f64,
    pub variance: f64,
    /// `pmf[k] = P(K = k)` for `k = 0..=n`.
    pub pmf: Vec<f64>,
}

impl OccupancyLaw {
    pub fn new(n: usize, r: usize) -> Result<Self> {
        let (mean, variance) = occupied_moments(n, r)?;
        Ok(Self {
            n,
            r,
            mean,
            variance,
            pmf: occupied_pmf(n, r)?,
        })
    }

    /// `P(K >= k)`.
    pub fn tail(&self, k: usize) -> f64 {
        self.pmf.iter().skip(k).sum()
    }
}

/// `(1 - x)^r` for `x` in `[0, 1]`, with `0^0 = 1`.
pub(crate) fn complement_pow(x: f64, r: usize) -> f64 {
    if r == 0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        (r as f64 * (-x).ln_1p()).exp()
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidDeckSize(0))
    } else {
        Ok(())
    }
}

/// One draw of the occupancy count, O(r) work after an O(n) bitmap.
pub fn sample_occupied<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Result<usize> {
    check_n(n)?;
    let mut hit = vec![false; n];
    let mut occupied = 0;
    for _ in 0..r {
        let b = rng.random_range(0..n);
        if !hit[b] {
            hit[b] = true;
            occupied += 1;
        }
    }
    Ok(occupied)
}

/// Exact mean and variance:
/// `E K = n - n(1-1/n)^r`,
/// `Var K = n(1-1/n)^r + n(n-1)(1-2/n)^r - n^2 (1-1/n)^(2r)`.
pub fn occupied_moments(n: usize, r: usize) -> Result<(f64, f64)> {
    check_n(n)?;
    let nf = n as f64;
    let empty1 = complement_pow(1.0 / nf, r);
    let empty2 = complement_pow(2.0 / nf, r);
    let mean = nf - nf * empty1;
    let variance = nf * empty1 + nf * (nf - 1.0) * empty2 - nf * nf * empty1 * empty1;
    Ok((mean, variance.max(0.0)))
}

/// Exact PMF of the occupancy count, indexed `0..=n`.
///
/// Forward recurrence in `r`:
/// `P_{r+1}(k) = P_r(k) k/n + P_r(k-1) (n-k+1)/n`.
/// Runs on exact integer counts when `n * r <= 10^4`, in `f64` otherwise.
pub fn occupied_pmf(n: usize, r: usize) -> Result<Vec<f64>> {
    check_n(n)?;
    if n.saturating_mul(r) <= EXACT_PMF_LIMIT {
        return Ok(occupied_pmf_exact(n, r)?
            .iter()
            .map(|p| p.to_f64().expect("finite probability"))
            .collect());
    }
    let nf = n as f64;
    let mut pmf = vec![0.0; n + 1];
    pmf[0] = 1.0;
    // Mass only moves up, so cells below `lo` that fell under the floor
    // can only shrink further and are dropped.
    let mut lo = 0;
    for step in 1..=r {
        let top = step.min(n);
        for k in (lo.max(1)..=top).rev() {
            pmf[k] = pmf[k] * (k as f64 / nf) + pmf[k - 1] * ((n - k + 1) as f64 / nf);
        }
        if lo == 0 {
            pmf[0] = 0.0;
        }
        while lo < top && pmf[lo] < 1e-300 {
            pmf[lo] = 0.0;
            lo += 1;
        }
    }
    Ok(pmf)
}

/// Number of throw sequences of length `r` occupying exactly `k` of `n`
/// boxes, for `k = 0..=n`. They sum to `n^r`.
pub fn occupied_counts(n: usize, r: usize) -> Result<Vec<BigUint>> {
    check_n(n)?;
    let mut counts = vec![BigUint::zero(); n + 1];
    counts[0] = BigUint::one();
    for step in 1..=r {
        let top = step.min(n);
        for k in (1..=top).rev() {
            let stay = &counts[k] * BigUint::from(k);
            let fresh = &counts[k - 1] * BigUint::from(n - k + 1);
            counts[k] = stay + fresh;
        }
        counts[0] = BigUint::zero();
    }
    Ok(counts)
}

/// Exact rational PMF: `occupied_counts / n^r`.
pub fn occupied_pmf_exact(n: usize, r: usize) -> Result<Vec<BigRational>> {
    let counts = occupied_counts(n, r)?;
    let total = num_bigint::BigInt::from(BigUint::from(n).pow(r as u32));
    Ok(counts
        .into_iter()
        .map(|c| BigRational::new(c.into(), total.clone()))
        .collect())
}

/// Asymptotic coefficients at `r = c n`: `E K ~ n (1 - e^-c)` and
/// `Var K ~ n (e^-c - (1 + c) e^-2c)`.
pub fn occupied_clt_params(c: f64) -> Result<(f64, f64)> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::param("c", c, "must be positive and finite"));
    }
    let e = (-c).exp();
    Ok((-(-c).exp_m1(), e - (1.0 + c) * e * e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::shuffle::{all_selection_sequences, apply_fast};

    fn moments_from_pmf(pmf: &[f64]) -> (f64, f64) {
        let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let var = pmf
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - mean).powi(2) * p)
            .sum();
        (mean, var)
    }

    #[test]
    fn moment_examples() {
        assert_eq!(occupied_moments(2, 2).unwrap(), (1.5, 0.25));
        for n in [1, 2, 7, 100] {
            let (m, v) = occupied_moments(n, 1).unwrap();
            assert!((m - 1.0).abs() < 1e-12 && v.abs() < 1e-10, "n={n}");
            assert_eq!(occupied_moments(n, 0).unwrap(), (0.0, 0.0));
        }
        assert!(occupied_moments(0, 3).is_err());
    }

    #[test]
    fn pmf_examples() {
        assert_eq!(occupied_pmf(2, 2).unwrap(), vec![0.0, 0.5, 0.5]);
        let p = occupied_pmf(3, 2).unwrap();
        assert_eq!(p[0], 0.0);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-16);
        assert!((p[2] - 2.0 / 3.0).abs() < 1e-16);
        assert_eq!(p[3], 0.0);
        assert_eq!(occupied_pmf(4, 0).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn exact_counts_match_enumeration() {
        for n in 1..=5 {
            for r in 0..=4 {
                let mut by_k = vec![0u64; n + 1];
                for s in all_selection_sequences(n, r) {
                    by_k[apply_fast(&s).distinct_selected] += 1;
                }
                let counts = occupied_counts(n, r).unwrap();
                let expect: Vec<BigUint> = by_k.into_iter().map(BigUint::from).collect();
                assert_eq!(counts, expect, "n={n} r={r}");
            }
        }
    }

    #[test]
    fn pmf_consistent_with_moments() {
        for n in [1usize, 2, 3, 5, 17, 64, 150, 300] {
            for r in [0usize, 1, 2, 3, 10, 33, 120, 299, 600] {
                let pmf = occupied_pmf(n, r).unwrap();
                let total: f64 = pmf.iter().sum();
                assert!((total - 1.0).abs() < 1e-12, "n={n} r={r} sum={total}");
                assert_eq!(pmf[0] == 1.0, r == 0);
                for (k, p) in pmf.iter().enumerate() {
                    if k > r.min(n) {
                        assert_eq!(*p, 0.0);
                    }
                }
                let (m, v) = moments_from_pmf(&pmf);
                let (em, ev) = occupied_moments(n, r).unwrap();
                assert!((m - em).abs() < 1e-10, "mean n={n} r={r}: {m} vs {em}");
                assert!((v - ev).abs() < 1e-10, "var n={n} r={r}: {v} vs {ev}");
            }
        }
    }

    #[test]
    fn windowed_recurrence_far_past_coupon_collection() {
        let (n, r) = (10_000, 68_255);
        let pmf = occupied_pmf(n, r).unwrap();
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let (m, v) = moments_from_pmf(&pmf);
        let (em, ev) = occupied_moments(n, r).unwrap();
        assert!((m - em).abs() < 1e-8 && (v - ev).abs() < 1e-8, "{m} {em} {v} {ev}");
    }

    #[test]
    fn float_and_exact_recurrences_agree() {
        // 120 * 90 > 10^4 takes the float path; compare with the exact counts.
        let float = occupied_pmf(120, 90).unwrap();
        let exact = occupied_pmf_exact(120, 90).unwrap();
        for (a, b) in float.iter().zip(&exact) {
            assert!((a - b.to_f64().unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn clt_params() {
        let (m, v) = occupied_clt_params(1.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((m - (1.0 - e)).abs() < 1e-15);
        assert!((v - (e - 2.0 * e * e)).abs() < 1e-15);
        assert!((m - 0.632_120_558_828_557_7).abs() < 1e-12);
        assert!((v - 0.097_208_874_698_216_9).abs() < 1e-12);
        let (m, v) = occupied_clt_params(1e-9).unwrap();
        assert!(m < 1e-8 && v.abs() < 1e-8);
        assert!(occupied_clt_params(0.0).is_err());
        assert!(occupied_clt_params(-1.0).is_err());

        let n = 1_000_000;
        let (em, ev) = occupied_moments(n, n).unwrap();
        let (m, v) = occupied_clt_params(1.0).unwrap();
        assert!((em / n as f64 - m).abs() < 1e-3);
        assert!((ev / n as f64 - v).abs() < 1e-3);
    }

    #[test]
    fn sampler_edge_cases() {
        let mut rng = stream(4);
        assert_eq!(sample_occupied(10, 0, &mut rng).unwrap(), 0);
        for _ in 0..100 {
            assert_eq!(sample_occupied(10, 1, &mut rng).unwrap(), 1);
        }
        let draws = 40_000;
        let ones = (0..draws)
            .filter(|_| sample_occupied(2, 2, &mut rng).unwrap() == 1)
            .count();
        let se = (0.25f64 / draws as f64).sqrt();
        assert!((ones as f64 / draws as f64 - 0.5).abs() < 4.0 * se);
    }
}
