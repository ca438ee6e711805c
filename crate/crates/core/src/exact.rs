//! Finite-n closed forms.
//!
//! Convention: `0^0 = 1` everywhere, so `r = 0` gives the identity deck.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::limits;
use crate::occupancy::{self, complement_pow};

/// Above this `k` the alternating sum for `Q` is evaluated in floating point.
const EXACT_Q_LIMIT: usize = 20;

/// Magnitude below which a term of a decreasing alternating series is dropped.
const SERIES_CUTOFF: f64 = 1e-22;

/// Largest fixed-point count tracked by the finite-n law per conditioning
/// value; the conditional mass beyond it is below `1/60!`.
const MAX_TRACKED_FIXED: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    AlternatingSum,
    Convolution,
    Recurrence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactValue {
    pub value: f64,
    pub method: Method,
}

/// A named finite-n quantity, as requested from the command line.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "formula", rename_all = "kebab-case")]
pub enum Formula {
    ExpectedFixedPoints { n: usize, r: usize },
    ExpectedInversions { n: usize, r: usize },
    ExpectedDescents { n: usize, r: usize },
    DescentsVariance { n: usize, r: usize },
    ReturnProbability { n: usize, r: usize, k: usize },
    OccupiedMean { n: usize, r: usize },
    OccupiedVariance { n: usize, r: usize },
    OccupiedPmf { n: usize, r: usize, k: usize },
    QFixedPoints { k: usize, m: usize, s: usize },
    PrefixMax { n: usize, j: usize, m: usize },
    FiniteFixedPointLaw { n: usize, a: f64, l: usize },
    PoissonGeometric { c: f64, l: usize },
}

impl Formula {
    pub fn evaluate(&self) -> Result<ExactValue> {
        use Method::*;
        let (value, method) = match *self {
            Formula::ExpectedFixedPoints { n, r } => (expected_fixed_points(n, r)?, ClosedForm),
            Formula::ExpectedInversions { n, r } => (expected_inversions(n, r), ClosedForm),
            Formula::ExpectedDescents { n, r } => (descents_moments(n, r)?.0, Recurrence),
            Formula::DescentsVariance { n, r } => (descents_moments(n, r)?.1, Recurrence),
            Formula::ReturnProbability { n, r, k } => (return_probability(n, r, k)?, Recurrence),
            Formula::OccupiedMean { n, r } => (occupancy::occupied_moments(n, r)?.0, ClosedForm),
            Formula::OccupiedVariance { n, r } => {
                (occupancy::occupied_moments(n, r)?.1, ClosedForm)
            }
            Formula::OccupiedPmf { n, r, k } => {
                let pmf = occupancy::occupied_pmf(n, r)?;
                (pmf.get(k).copied().unwrap_or(0.0), Recurrence)
            }
            Formula::QFixedPoints { k, m, s } => (q_fixed_points(k, m, s)?, AlternatingSum),
            Formula::PrefixMax { n, j, m } => (prefix_max_pmf(n, j, m)?, ClosedForm),
            Formula::FiniteFixedPointLaw { n, a, l } => {
                let pmf = fixed_point_law_finite(n, a)?;
                (pmf.get(l).copied().unwrap_or(0.0), Convolution)
            }
            Formula::PoissonGeometric { c, l } => (limits::poisson_geometric_pmf(c, l)?, Convolution),
        };
        Ok(ExactValue { value, method })
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidDeckSize(0))
    } else {
        Ok(())
    }
}

/// Probability that card `k` sits in position `k` after `r` shuffles:
/// `((k-1)/n)^r + P(K >= k)/n`, with `K` the occupancy count.
pub fn return_probability(n: usize, r: usize, k: usize) -> Result<f64> {
    check_n(n)?;
    if k == 0 || k > n {
        return Err(Error::IndexOutOfRange {
            index: k,
            lo: 1,
            hi: n,
        });
    }
    let pmf = occupancy::occupied_pmf(n, r)?;
    let tail: f64 = pmf[k..].iter().sum();
    Ok(untouched_probability(n, r, k) + tail / n as f64)
}

/// `((k-1)/n)^r`: none of the cards `k..=n` was ever selected.
fn untouched_probability(n: usize, r: usize, k: usize) -> f64 {
    complement_pow((n - k + 1) as f64 / n as f64, r)
}

/// Return probabilities of every card, sharing one occupancy PMF.
pub fn return_probabilities(n: usize, r: usize) -> Result<Vec<f64>> {
    check_n(n)?;
    let pmf = occupancy::occupied_pmf(n, r)?;
    let mut tail = 0.0;
    let mut out = vec![0.0; n];
    for k in (1..=n).rev() {
        tail += pmf[k];
        out[k - 1] = untouched_probability(n, r, k) + tail / n as f64;
    }
    Ok(out)
}

/// `E F = 1 + sum_{k=0}^{n-2} (k/n)^r`.
pub fn expected_fixed_points(n: usize, r: usize) -> Result<f64> {
    check_n(n)?;
    let nf = n as f64;
    // Smallest terms first.
    let sum: f64 = (0..n.saturating_sub(1))
        .map(|k| complement_pow((nf - k as f64) / nf, r))
        .sum();
    Ok(1.0 + sum)
}

/// `E I = C(n,2)/2 * (1 - ((n-2)/n)^r)`; zero for decks with fewer than two cards.
pub fn expected_inversions(n: usize, r: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let pairs = nf * (nf - 1.0) / 2.0;
    pairs / 2.0 * (1.0 - complement_pow(2.0 / nf, r))
}

/// Mean and variance of the descent count given `K = k` distinct cards
/// selected: `k - 1` adjacent comparisons inside the top block plus the
/// boundary comparison with the smallest of the `m = n - k` unselected
/// cards, which is a descent with probability `m / (m + 1)` and covaries
/// with the last in-block comparison by `-m / (2 (m + 1) (m + 2))`.
fn descents_given_index(n: usize, k: usize) -> (f64, f64) {
    if k == 0 {
        return (0.0, 0.0);
    }
    let kf = k as f64;
    let m = (n - k) as f64;
    let (block_mean, block_var) = if k == 1 { (0.0, 0.0) } else { ((kf - 1.0) / 2.0, (kf + 1.0) / 12.0) };
    let p = m / (m + 1.0);
    let cov = if k == 1 { 0.0 } else { -m / (2.0 * (m + 1.0) * (m + 2.0)) };
    (block_mean + p, block_var + p * (1.0 - p) + 2.0 * cov)
}

/// Exact mean and variance of the number of descents after `r` shuffles,
/// by conditioning on the occupancy count.
pub fn descents_moments(n: usize, r: usize) -> Result<(f64, f64)> {
    let pmf = occupancy::occupied_pmf(n, r)?;
    let (mut first, mut second) = (0.0, 0.0);
    for (k, p) in pmf.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        let (mu, var) = descents_given_index(n, k);
        first += p * mu;
        second += p * (var + mu * mu);
    }
    Ok((first, (second - first * first).max(0.0)))
}

fn ratio(num: usize, den: usize) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn rational_pow(base: &BigRational, r: usize) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..r {
        acc *= base;
    }
    acc
}

/// Rational form of [`expected_fixed_points`].
pub fn expected_fixed_points_exact(n: usize, r: usize) -> Result<BigRational> {
    check_n(n)?;
    let mut acc = BigRational::one();
    for k in 0..n.saturating_sub(1) {
        acc += rational_pow(&ratio(k, n), r);
    }
    Ok(acc)
}

/// Rational form of [`expected_inversions`].
pub fn expected_inversions_exact(n: usize, r: usize) -> BigRational {
    if n < 2 {
        return BigRational::zero();
    }
    let pairs = ratio(n * (n - 1), 4);
    pairs * (BigRational::one() - rational_pow(&ratio(n - 2, n), r))
}

/// Rational form of [`return_probability`].
pub fn return_probability_exact(n: usize, r: usize, k: usize) -> Result<BigRational> {
    check_n(n)?;
    if k == 0 || k > n {
        return Err(Error::IndexOutOfRange {
            index: k,
            lo: 1,
            hi: n,
        });
    }
    let pmf = occupancy::occupied_pmf_exact(n, r)?;
    let tail = pmf[k..]
        .iter()
        .fold(BigRational::zero(), |acc, p| acc + p);
    Ok(rational_pow(&ratio(k - 1, n), r) + tail / BigRational::from_integer(BigInt::from(n)))
}

/// Probability that a uniformly random `(k-1)`-permutation of `[m-1]` has
/// exactly `s` fixed points:
/// `Q(k,m,s) = 1/s! * sum_{t=s}^{k-1} (-1)^{t-s} (k-1)_t / ((t-s)! (m-1)_t)`.
///
/// For `m = k` this is the fixed-point law of a uniform permutation of `[k-1]`.
/// Exact rational arithmetic for `k <= 20`.
pub fn q_fixed_points(k: usize, m: usize, s: usize) -> Result<f64> {
    check_q(k, m)?;
    if s >= k {
        return Ok(0.0);
    }
    if k <= EXACT_Q_LIMIT {
        return Ok(q_fixed_points_exact(k, m, s)?
            .to_f64()
            .expect("finite probability"));
    }
    Ok(q_series(k, m, s))
}

fn check_q(k: usize, m: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::IndexOutOfRange {
            index: 0,
            lo: 1,
            hi: m,
        });
    }
    if m < k {
        return Err(Error::param("m", m as f64, "must be at least k"));
    }
    Ok(())
}

/// Floating-point alternating sum; terms are updated by their ratio and the
/// series is cut once terms fall below `SERIES_CUTOFF`.
fn q_series(k: usize, m: usize, s: usize) -> f64 {
    if s >= k {
        return 0.0;
    }
    // (k-1)_s / ((m-1)_s s!)
    let mut term = 1.0;
    for i in 0..s {
        term *= (k - 1 - i) as f64 / ((m - 1 - i) as f64 * (i + 1) as f64);
    }
    let mut sum = 0.0;
    let mut t = s;
    loop {
        sum += term;
        if t + 1 > k - 1 || term.abs() < SERIES_CUTOFF {
            break;
        }
        term *= -((k - 1 - t) as f64) / ((m - 1 - t) as f64 * (t - s + 1) as f64);
        t += 1;
    }
    sum.clamp(0.0, 1.0)
}

/// Rational form of [`q_fixed_points`].
pub fn q_fixed_points_exact(k: usize, m: usize, s: usize) -> Result<BigRational> {
    check_q(k, m)?;
    if s >= k {
        return Ok(BigRational::zero());
    }
    let mut sum = BigRational::zero();
    let fact = |x: usize| -> BigInt { (1..=x).fold(BigInt::one(), |acc, i| acc * BigInt::from(i)) };
    let falling = |x: usize, len: usize| -> BigInt {
        (0..len).fold(BigInt::one(), |acc, i| acc * BigInt::from(x - i))
    };
    for t in s..k {
        let num = falling(k - 1, t);
        let den = fact(t - s) * falling(m - 1, t);
        let term = BigRational::new(num, den);
        if (t - s) % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    Ok(sum / BigRational::from_integer(fact(s)))
}

/// Number of derangements `D_m`, from `D_m = (m-1)(D_{m-1} + D_{m-2})`.
pub fn derangements(m: usize) -> BigUint {
    let (mut prev, mut cur) = (BigUint::one(), BigUint::zero());
    if m == 0 {
        return prev;
    }
    for i in 2..=m {
        let next = BigUint::from(i - 1) * (&prev + &cur);
        prev = std::mem::replace(&mut cur, next);
    }
    cur
}

/// `D_m / m!` for `m = 0..=max`.
fn derangement_fractions(max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    let (mut sum, mut term) = (0.0, 1.0);
    for i in 0..=max {
        if i > 0 {
            term *= -1.0 / i as f64;
        }
        sum += term;
        out.push(sum);
    }
    out
}

/// Probability that the largest of the first `j` entries of a uniform
/// permutation of `[n]` equals `m`: `C(m-1, j-1) / C(n, j)`.
///
/// Evaluated as `(j/n) * prod_{t<n-m} (n-j-t)/(n-1-t)`; every factor is at
/// most one, so nothing overflows.
pub fn prefix_max_pmf(n: usize, j: usize, m: usize) -> Result<f64> {
    check_n(n)?;
    if j == 0 || j > n {
        return Err(Error::IndexOutOfRange {
            index: j,
            lo: 1,
            hi: n,
        });
    }
    if m == 0 || m > n {
        return Err(Error::IndexOutOfRange {
            index: m,
            lo: 1,
            hi: n,
        });
    }
    if m < j {
        return Ok(0.0);
    }
    let mut p = j as f64 / n as f64;
    for t in 0..n - m {
        p *= (n - j - t) as f64 / (n - 1 - t) as f64;
    }
    Ok(p)
}

/// Number of leading positions `floor(a n)` used by the finite-n law.
pub fn prefix_length(n: usize, a: f64) -> Result<usize> {
    check_n(n)?;
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::param("a", a, "must lie in (0, 1]"));
    }
    let k = (a * n as f64).floor() as usize;
    if k == 0 {
        return Err(Error::param("a", a, "floor(a n) must be at least 1"));
    }
    Ok(k.min(n))
}

/// Exact PMF over `0..=n` of `L = n - max(pi(1..=k)) + #{i <= k : pi(i) = i}`
/// with `k = floor(a n)` and `pi` uniform.
///
/// Conditions on the prefix maximum `m = n - j`. For `m > k` the prefix
/// fixed points follow `Q(k, m, .)`; for `m = k` the prefix is a uniform
/// permutation of `[k]` and the count follows the derangement law of `[k]`.
pub fn fixed_point_law_finite(n: usize, a: f64) -> Result<Vec<f64>> {
    let k = prefix_length(n, a)?;
    let mut pmf = vec![0.0; n + 1];

    // w = P(M = n - j), updated by its ratio in j.
    let mut weight = k as f64 / n as f64;
    for j in 0..n - k {
        if weight == 0.0 {
            break;
        }
        let m = n - j;
        let top = (k - 1).min(MAX_TRACKED_FIXED);
        for s in 0..=top {
            pmf[j + s] += weight * q_series(k, m, s);
        }
        weight *= (n - k - j) as f64 / (n - 1 - j) as f64;
    }

    // M = k: every card of the prefix is at most k.
    let j = n - k;
    let last_weight = prefix_max_pmf(n, k, k)?;
    if last_weight > 0.0 {
        let d = derangement_fractions(k);
        let mut inv_fact = 1.0;
        for s in 0..=k {
            if s > 0 {
                inv_fact /= s as f64;
            }
            pmf[j + s] += last_weight * d[k - s] * inv_fact;
        }
    }
    Ok(pmf)
}
