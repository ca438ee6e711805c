//! Seeded, parallel Monte Carlo runs and the tests applied to them.
//!
//! Trial `t` of a run seeded with `s` always draws from
//! [`substream(s, t)`](crate::rng::substream), and results are collected in
//! trial order, so a run is bitwise reproducible for any worker count.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::decomposition::{
    sample_descents_decomposed, sample_fixed_points_decomposed, sample_inversions_decomposed,
    sample_resampled_deck, Channel,
};
use crate::error::{Error, Result};
use crate::limits::LimitLaw;
use crate::permutation::Permutation;
use crate::rng::{substream, StreamRng};
use crate::shuffle::sample_random_to_top;

/// p-value floor for equality-in-distribution tests.
pub const P_VALUE_FLOOR: f64 = 0.001;

/// Minimum expected count per chi-square cell.
pub const MIN_EXPECTED: f64 = 5.0;

/// Default total variation threshold when none is given.
pub const DEFAULT_TV_THRESHOLD: f64 = 0.05;

macro_rules! tagged_enum {
    ($name:ident, $kind:literal, { $($variant:ident => $tag:literal),+ $(,)? }) => {
        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn tag(&self) -> &'static str {
                match self {
                    $($name::$variant => $tag),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.tag())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let norm = s.trim().to_ascii_lowercase().replace('_', "-");
                $(if norm == $tag {
                    return Ok($name::$variant);
                })+
                Err(Error::UnknownTag { kind: $kind, tag: s.to_string() })
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    FixedPoints,
    Descents,
    Inversions,
}

tagged_enum!(Statistic, "statistic", {
    FixedPoints => "fixed-points",
    Descents => "descents",
    Inversions => "inversions",
});

impl Statistic {
    pub fn of(&self, p: &Permutation) -> u64 {
        match self {
            Statistic::FixedPoints => p.count_fixed_points() as u64,
            Statistic::Descents => p.count_descents() as u64,
            Statistic::Inversions => p.count_inversions(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    /// Simulate the shuffle.
    ShuffleEngine,
    /// Uniform permutation with its bottom block sorted.
    Resampled,
    /// Per-statistic decomposition formula.
    FormulaDirect,
}

tagged_enum!(Sampler, "sampler", {
    ShuffleEngine => "shuffle-engine",
    Resampled => "resampled",
    FormulaDirect => "formula-direct",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GofKind {
    Chi2,
    Ks,
    Tv,
}

tagged_enum!(GofKind, "test", {
    Chi2 => "chi2",
    Ks => "ks",
    Tv => "tv",
});

/// Values observed in a run, kept in trial order alongside either integer
/// multiplicities or sorted real samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDistribution {
    pub seed: Option<u64>,
    samples: Vec<f64>,
    support: Support,
    mean: f64,
    variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "data", rename_all = "kebab-case")]
pub enum Support {
    Counts(BTreeMap<u64, u64>),
    Sorted(Vec<f64>),
}

impl EmpiricalDistribution {
    pub fn from_integers(values: &[u64], seed: Option<u64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut counts = BTreeMap::new();
        for &v in values {
            *counts.entry(v).or_insert(0u64) += 1;
        }
        let samples: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        let (mean, variance) = moments(&samples);
        Ok(Self {
            seed,
            samples,
            support: Support::Counts(counts),
            mean,
            variance,
        })
    }

    pub fn from_reals(values: Vec<f64>, seed: Option<u64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::param("sample", *bad, "must be finite"));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let (mean, variance) = moments(&values);
        Ok(Self {
            seed,
            samples: values,
            support: Support::Sorted(sorted),
            mean,
            variance,
        })
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    /// Values in trial order.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.support, Support::Counts(_))
    }

    pub fn counts(&self) -> Option<&BTreeMap<u64, u64>> {
        match &self.support {
            Support::Counts(c) => Some(c),
            Support::Sorted(_) => None,
        }
    }

    pub fn sorted_values(&self) -> Vec<f64> {
        match &self.support {
            Support::Sorted(s) => s.clone(),
            Support::Counts(c) => c
                .iter()
                .flat_map(|(&v, &k)| std::iter::repeat_n(v as f64, k as usize))
                .collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for a single sample.
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Empirical probability of integer value `v`.
    pub fn frequency(&self, v: u64) -> f64 {
        self.counts()
            .and_then(|c| c.get(&v))
            .map_or(0.0, |&k| k as f64 / self.sample_count() as f64)
    }

    /// `(x - center) / scale` for every sample.
    pub fn standardize(&self, center: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::param("scale", scale, "must be positive and finite"));
        }
        let z = self.samples.iter().map(|x| (x - center) / scale).collect();
        Self::from_reals(z, self.seed)
    }
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let variance = if xs.len() < 2 {
        0.0
    } else {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    (mean, variance)
}

/// Runs `f` once per trial on its own substream; results are in trial order.
/// `workers = None` uses the global rayon pool.
pub fn run_trials<T, F>(trials: usize, seed: u64, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut StreamRng) -> Result<T> + Sync + Send,
{
    let job = || {
        (0..trials)
            .into_par_iter()
            .map(|t| f(&mut substream(seed, t as u64)))
            .collect::<Result<Vec<T>>>()
    };
    match workers {
        None => job(),
        Some(0) => Err(Error::param("workers", 0.0, "must be at least 1")),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(job),
    }
}

/// One draw of `statistic` after `r` shuffles of `n` cards.
pub fn draw_statistic(
    n: usize,
    r: usize,
    statistic: Statistic,
    sampler: Sampler,
    rng: &mut StreamRng,
) -> Result<u64> {
    match sampler {
        Sampler::ShuffleEngine => Ok(statistic.of(&sample_random_to_top(n, r, rng)?.deck)),
        Sampler::Resampled => Ok(statistic.of(&sample_resampled_deck(n, r, rng)?)),
        Sampler::FormulaDirect => Ok(match statistic {
            Statistic::FixedPoints => sample_fixed_points_decomposed(n, r, rng)?,
            Statistic::Descents => sample_descents_decomposed(n, r, Channel::FormulaDirect, rng)?,
            Statistic::Inversions => sample_inversions_decomposed(n, r, rng)?,
        }
        .statistic_value),
    }
}

/// `trials` independent draws of `statistic`, reproducible from `seed`.
pub fn run_experiment(
    n: usize,
    r: usize,
    trials: usize,
    statistic: Statistic,
    sampler: Sampler,
    seed: u64,
    workers: Option<usize>,
) -> Result<EmpiricalDistribution> {
    if n == 0 {
        return Err(Error::InvalidDeckSize(0));
    }
    if trials == 0 {
        return Err(Error::param("trials", 0.0, "must be at least 1"));
    }
    let values = run_trials(trials, seed, workers, |rng| {
        draw_statistic(n, r, statistic, sampler, rng)
    })?;
    EmpiricalDistribution::from_integers(&values, Some(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "threshold", rename_all = "kebab-case")]
pub enum Criterion {
    PValueAbove(f64),
    StatisticBelow(f64),
}

impl Criterion {
    pub fn threshold(&self) -> f64 {
        match self {
            Criterion::PValueAbove(t) | Criterion::StatisticBelow(t) => *t,
        }
    }

    fn holds(&self, stat: f64, p_value: Option<f64>) -> Result<bool> {
        match self {
            Criterion::StatisticBelow(t) => Ok(stat < *t),
            Criterion::PValueAbove(t) => p_value.map(|p| p > *t).ok_or(Error::IncompatibleTest {
                kind: "p-value criterion",
                reason: "the test has no p-value",
            }),
        }
    }
}

/// Run parameters echoed into a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub n: usize,
    pub r: usize,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub name: String,
    pub target: String,
    pub stat: f64,
    pub p_value: Option<f64>,
    pub df: Option<usize>,
    pub criterion: Criterion,
    pub pass: bool,
    pub config: Option<ConfigEcho>,
}

impl TestReport {
    fn new(name: &str, target: String, stat: f64, p_value: Option<f64>, df: Option<usize>, criterion: Criterion) -> Result<Self> {
        let pass = criterion.holds(stat, p_value)?;
        Ok(Self {
            name: name.to_string(),
            target,
            stat,
            p_value,
            df,
            criterion,
            pass,
            config: None,
        })
    }

    /// Re-evaluates `pass` under another criterion.
    pub fn with_criterion(mut self, criterion: Criterion) -> Result<Self> {
        self.pass = criterion.holds(self.stat, self.p_value)?;
        self.criterion = criterion;
        Ok(self)
    }

    pub fn with_config(mut self, config: ConfigEcho) -> Self {
        self.config = Some(config);
        self
    }

    pub fn threshold(&self) -> f64 {
        self.criterion.threshold()
    }
}

impl fmt::Display for TestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {} vs {}: stat={:.6}", self.name, self.target, self.stat)?;
        if let Some(p) = self.p_value {
            write!(f, " p={p:.4}")?;
        }
        match self.criterion {
            Criterion::PValueAbove(t) => write!(f, " (need p > {t})"),
            Criterion::StatisticBelow(t) => write!(f, " (need stat < {t})"),
        }
    }
}

fn default_criterion(kind: GofKind) -> Criterion {
    match kind {
        GofKind::Chi2 | GofKind::Ks => Criterion::PValueAbove(P_VALUE_FLOOR),
        GofKind::Tv => Criterion::StatisticBelow(DEFAULT_TV_THRESHOLD),
    }
}

/// Goodness of fit against a limit law with the default criterion for
/// `kind`: p > 0.001 for chi2 and ks, statistic below 0.05 for tv.
pub fn gof_test(e: &EmpiricalDistribution, law: &LimitLaw, kind: GofKind) -> Result<TestReport> {
    gof_test_with(e, law, kind, default_criterion(kind))
}

pub fn gof_test_with(
    e: &EmpiricalDistribution,
    law: &LimitLaw,
    kind: GofKind,
    criterion: Criterion,
) -> Result<TestReport> {
    let target = law.name();
    match kind {
        GofKind::Chi2 => {
            let counts = discrete_counts(e, "chi2")?;
            require_discrete_law(law, "chi2")?;
            let (stat, df) = chi2_one_sample(counts, e.sample_count(), law);
            TestReport::new("chi2", target, stat, Some(chi2_sf(stat, df)), Some(df), criterion)
        }
        GofKind::Ks => {
            if law.is_discrete() {
                return Err(Error::IncompatibleTest {
                    kind: "ks",
                    reason: "target law must be continuous; standardize and compare to a normal",
                });
            }
            let sorted = e.sorted_values();
            let m = sorted.len() as f64;
            let mut d: f64 = 0.0;
            for (i, &x) in sorted.iter().enumerate() {
                let f = law.cdf(x);
                d = d.max((i + 1) as f64 / m - f).max(f - i as f64 / m);
            }
            TestReport::new("ks", target, d, Some(ks_p_value(d, m)), None, criterion)
        }
        GofKind::Tv => {
            let counts = discrete_counts(e, "tv")?;
            require_discrete_law(law, "tv")?;
            let stat = tv_distance(counts, e.sample_count(), law);
            TestReport::new("tv", target, stat, None, None, criterion)
        }
    }
}

fn discrete_counts<'a>(e: &'a EmpiricalDistribution, kind: &'static str) -> Result<&'a BTreeMap<u64, u64>> {
    e.counts().ok_or(Error::IncompatibleTest {
        kind,
        reason: "sample must be integer valued",
    })
}

fn require_discrete_law(law: &LimitLaw, kind: &'static str) -> Result<()> {
    if law.is_discrete() {
        Ok(())
    } else {
        Err(Error::IncompatibleTest {
            kind,
            reason: "target law must be discrete",
        })
    }
}

/// Target probabilities on `0..len` covering both the law's table and every
/// observed value, plus the law's mass beyond `len`.
fn target_cells(counts: &BTreeMap<u64, u64>, law: &LimitLaw) -> (Vec<f64>, f64) {
    let table = law.pmf_table();
    let max_obs = counts.keys().next_back().map_or(0, |&v| v as usize + 1);
    let len = table.len().max(max_obs);
    let probs: Vec<f64> = (0..len)
        .map(|v| table.get(v).copied().unwrap_or_else(|| law.pmf(v as i64)))
        .collect();
    let rest = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    (probs, rest)
}

fn tv_distance(counts: &BTreeMap<u64, u64>, total: usize, law: &LimitLaw) -> f64 {
    let (probs, rest) = target_cells(counts, law);
    let t = total as f64;
    let l1: f64 = probs
        .iter()
        .enumerate()
        .map(|(v, p)| (counts.get(&(v as u64)).copied().unwrap_or(0) as f64 / t - p).abs())
        .sum();
    0.5 * (l1 + rest)
}

/// Merges adjacent cells left to right until each has `weight >= MIN_EXPECTED`;
/// a short final run joins the previous cell. Each cell is
/// `(weight, payload...)` summed componentwise.
fn merge_cells<const K: usize>(cells: &[[f64; K]], weight: impl Fn(&[f64; K]) -> f64) -> Vec<[f64; K]> {
    let mut out: Vec<[f64; K]> = Vec::new();
    let mut acc = [0.0; K];
    let mut open = false;
    for cell in cells {
        for (a, c) in acc.iter_mut().zip(cell) {
            *a += c;
        }
        open = true;
        if weight(&acc) >= MIN_EXPECTED {
            out.push(acc);
            acc = [0.0; K];
            open = false;
        }
    }
    if open {
        match out.last_mut() {
            Some(last) => {
                for (l, a) in last.iter_mut().zip(&acc) {
                    *l += a;
                }
            }
            None => out.push(acc),
        }
    }
    out
}

fn chi2_one_sample(counts: &BTreeMap<u64, u64>, total: usize, law: &LimitLaw) -> (f64, usize) {
    let (probs, rest) = target_cells(counts, law);
    let t = total as f64;
    let mut cells: Vec<[f64; 2]> = probs
        .iter()
        .enumerate()
        .map(|(v, p)| [counts.get(&(v as u64)).copied().unwrap_or(0) as f64, p * t])
        .collect();
    if let Some(last) = cells.last_mut() {
        last[1] += rest * t;
    }
    let merged = merge_cells(&cells, |c| c[1]);
    let stat = merged
        .iter()
        .filter(|c| c[1] > 0.0)
        .map(|c| (c[0] - c[1]).powi(2) / c[1])
        .sum();
    (stat, merged.len().saturating_sub(1))
}

fn chi2_sf(stat: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    ChiSquared::new(df as f64).map_or(f64::NAN, |d| d.sf(stat))
}

/// Asymptotic p-value of a KS statistic `d` at effective sample size `m`,
/// with the usual `sqrt(m) + 0.12 + 0.11/sqrt(m)` small-sample correction.
pub fn ks_p_value(d: f64, m: f64) -> f64 {
    let s = m.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Theta-function form, fast for small x.
        let y = (-PI * PI / (8.0 * x * x)).exp();
        let mut sum = 0.0;
        for k in 1..=20u32 {
            let e = ((2 * k - 1) * (2 * k - 1)) as i32;
            let term = y.powi(e);
            sum += term;
            if term < 1e-300 {
                break;
            }
        }
        (1.0 - (2.0 * PI).sqrt() / x * sum).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1..=100u32 {
            let term = (-2.0 * (k * k) as f64 * x * x).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Two-sample chi2 (pooled cells with expected count at least 5 in both
/// samples) or two-sample KS, with default criterion p > 0.001.
pub fn two_sample_test(e1: &EmpiricalDistribution, e2: &EmpiricalDistribution, kind: GofKind) -> Result<TestReport> {
    two_sample_test_with(e1, e2, kind, Criterion::PValueAbove(P_VALUE_FLOOR))
}

pub fn two_sample_test_with(
    e1: &EmpiricalDistribution,
    e2: &EmpiricalDistribution,
    kind: GofKind,
    criterion: Criterion,
) -> Result<TestReport> {
    let (n1, n2) = (e1.sample_count() as f64, e2.sample_count() as f64);
    match kind {
        GofKind::Chi2 => {
            let c1 = discrete_counts(e1, "two-sample chi2")?;
            let c2 = discrete_counts(e2, "two-sample chi2")?;
            let mut values: Vec<u64> = c1.keys().chain(c2.keys()).copied().collect();
            values.sort_unstable();
            values.dedup();
            let cells: Vec<[f64; 2]> = values
                .iter()
                .map(|v| [*c1.get(v).unwrap_or(&0) as f64, *c2.get(v).unwrap_or(&0) as f64])
                .collect();
            let total = n1 + n2;
            let smaller = n1.min(n2);
            let merged = merge_cells(&cells, |c| smaller * (c[0] + c[1]) / total);
            if merged.len() < 2 && c1.keys().ne(c2.keys()) {
                return Err(Error::IncompatibleTest {
                    kind: "two-sample chi2",
                    reason: "supports differ but pool into a single cell",
                });
            }
            let stat: f64 = merged
                .iter()
                .map(|c| {
                    let t = c[0] + c[1];
                    let (x1, x2) = (n1 * t / total, n2 * t / total);
                    (c[0] - x1).powi(2) / x1 + (c[1] - x2).powi(2) / x2
                })
                .sum();
            let df = merged.len() - 1;
            TestReport::new("two-sample-chi2", "second sample".into(), stat, Some(chi2_sf(stat, df)), Some(df), criterion)
        }
        GofKind::Ks => {
            let (a, b) = (e1.sorted_values(), e2.sorted_values());
            let (mut i, mut j) = (0usize, 0usize);
            let mut d: f64 = 0.0;
            while i < a.len() && j < b.len() {
                let x = a[i].min(b[j]);
                while i < a.len() && a[i] <= x {
                    i += 1;
                }
                while j < b.len() && b[j] <= x {
                    j += 1;
                }
                d = d.max((i as f64 / n1 - j as f64 / n2).abs());
            }
            let m = n1 * n2 / (n1 + n2);
            TestReport::new("two-sample-ks", "second sample".into(), d, Some(ks_p_value(d, m)), None, criterion)
        }
        GofKind::Tv => Err(Error::IncompatibleTest {
            kind: "two-sample tv",
            reason: "use chi2 or ks",
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub sample_count: usize,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    /// 95% normal-approximation intervals.
    pub mean_ci: (f64, f64),
    pub variance_ci: (f64, f64),
}

const Z95: f64 = 1.959_963_984_540_054;

pub fn summarize(e: &EmpiricalDistribution) -> Result<Summary> {
    let m = e.sample_count();
    if m < 2 {
        return Err(Error::param("sample_count", m as f64, "needs at least two samples"));
    }
    let mean = e.mean();
    let variance = e.variance();
    let mf = m as f64;
    let m4 = e.samples().iter().map(|x| (x - mean).powi(4)).sum::<f64>() / mf;
    let se_mean = (variance / mf).sqrt();
    let se_variance = ((m4 - variance * variance * (mf - 3.0) / (mf - 1.0)).max(0.0) / mf).sqrt();
    Ok(Summary {
        sample_count: m,
        mean,
        variance,
        se_mean,
        se_variance,
        mean_ci: (mean - Z95 * se_mean, mean + Z95 * se_mean),
        variance_ci: (variance - Z95 * se_variance, variance + Z95 * se_variance),
    })
}

fn write_preamble<W: Write>(w: &mut W, preamble: Option<&str>) -> io::Result<()> {
    if let Some(text) = preamble {
        for line in text.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    Ok(())
}

/// `value,count,density` rows, density normalised to a probability
/// distribution. `preamble` lines are written first as `#` comments.
pub fn write_histogram_csv<W: Write>(w: &mut W, e: &EmpiricalDistribution, preamble: Option<&str>) -> io::Result<()> {
    write_preamble(w, preamble)?;
    writeln!(w, "value,count,density")?;
    let total = e.sample_count() as f64;
    match e.support() {
        Support::Counts(counts) => {
            for (v, k) in counts {
                writeln!(w, "{v},{k},{}", *k as f64 / total)?;
            }
        }
        Support::Sorted(sorted) => {
            let mut i = 0;
            while i < sorted.len() {
                let j = i + sorted[i..].iter().take_while(|&&x| x == sorted[i]).count();
                writeln!(w, "{},{},{}", sorted[i], j - i, (j - i) as f64 / total)?;
                i = j;
            }
        }
    }
    Ok(())
}

/// `trial,value` rows in trial order.
pub fn write_samples_csv<W: Write>(w: &mut W, e: &EmpiricalDistribution, preamble: Option<&str>) -> io::Result<()> {
    write_preamble(w, preamble)?;
    writeln!(w, "trial,value")?;
    for (t, x) in e.samples().iter().enumerate() {
        writeln!(w, "{t},{x}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::expected_fixed_points;
    use crate::limits::poisson_geometric_pmf;
    use rand::Rng;
    use statrs::distribution::Normal;

    fn inverse_transform(table: &[f64], rng: &mut StreamRng) -> u64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (v, p) in table.iter().enumerate() {
            acc += p;
            if u < acc {
                return v as u64;
            }
        }
        table.len() as u64
    }

    #[test]
    fn tags_round_trip() {
        for s in Statistic::ALL {
            assert_eq!(s.tag().parse::<Statistic>().unwrap(), *s);
        }
        for s in Sampler::ALL {
            assert_eq!(s.to_string().parse::<Sampler>().unwrap(), *s);
        }
        assert_eq!("fixed_points".parse::<Statistic>().unwrap(), Statistic::FixedPoints);
        assert!(matches!("cycles".parse::<Statistic>(), Err(Error::UnknownTag { .. })));
        assert!("riffle".parse::<Sampler>().is_err());
        assert!("ad".parse::<GofKind>().is_err());
    }

    #[test]
    fn point_mass_with_no_shuffles() {
        let e = run_experiment(12, 0, 1, Statistic::FixedPoints, Sampler::ShuffleEngine, 3, None).unwrap();
        assert_eq!(e.counts().unwrap(), &BTreeMap::from([(12, 1)]));
        assert_eq!(e.variance(), 0.0);
        assert!(run_experiment(12, 0, 0, Statistic::FixedPoints, Sampler::ShuffleEngine, 3, None).is_err());
        assert!(run_experiment(0, 1, 1, Statistic::FixedPoints, Sampler::ShuffleEngine, 3, None).is_err());
    }

    #[test]
    fn small_deck_mean() {
        let e = run_experiment(3, 2, 90_000, Statistic::FixedPoints, Sampler::ShuffleEngine, 11, None).unwrap();
        let s = summarize(&e).unwrap();
        let target = expected_fixed_points(3, 2).unwrap();
        assert!((target - 10.0 / 9.0).abs() < 1e-15);
        assert!((s.mean - target).abs() < 4.0 * s.se_mean);
    }

    #[test]
    fn deterministic_across_worker_counts() {
        for sampler in Sampler::ALL {
            for statistic in Statistic::ALL {
                let run = |w| run_experiment(60, 45, 500, *statistic, *sampler, 99, w).unwrap();
                let a = run(Some(1));
                assert_eq!(a, run(Some(4)));
                assert_eq!(a, run(None));
            }
        }
        assert!(run_experiment(5, 5, 5, Statistic::Descents, Sampler::Resampled, 1, Some(0)).is_err());
    }

    #[test]
    fn empirical_invariants() {
        let e = run_experiment(30, 40, 3000, Statistic::Inversions, Sampler::FormulaDirect, 5, None).unwrap();
        let counts = e.counts().unwrap();
        assert_eq!(counts.values().sum::<u64>(), 3000);
        let mean = counts.iter().map(|(v, k)| *v as f64 * *k as f64).sum::<f64>() / 3000.0;
        let var = counts.iter().map(|(v, k)| (*v as f64 - mean).powi(2) * *k as f64).sum::<f64>() / 2999.0;
        assert!((mean - e.mean()).abs() < 1e-9);
        assert!((var - e.variance()).abs() < 1e-9 * var.max(1.0));
        let z = e.standardize(e.mean(), e.variance().sqrt()).unwrap();
        assert!(z.mean().abs() < 1e-9 && (z.variance() - 1.0).abs() < 1e-9);
        assert!(z.sorted_values().windows(2).all(|w| w[0] <= w[1]));
        assert!(e.standardize(0.0, 0.0).is_err());
        assert!(EmpiricalDistribution::from_integers(&[], None).is_err());
    }

    #[test]
    fn tv_of_exact_draws_is_small() {
        let law = LimitLaw::poisson_geometric(1.0).unwrap();
        let table = law.pmf_table();
        let xs = run_trials(100_000, 17, None, |rng| Ok(inverse_transform(&table, rng))).unwrap();
        let e = EmpiricalDistribution::from_integers(&xs, Some(17)).unwrap();
        let report = gof_test(&e, &law, GofKind::Tv).unwrap();
        assert!(report.stat < 0.01, "{report}");
        assert!(gof_test(&e, &law, GofKind::Chi2).unwrap().pass);
        assert!((e.frequency(0) - poisson_geometric_pmf(1.0, 0).unwrap()).abs() < 0.01);
    }

    #[test]
    fn trivial_gof_cases() {
        let law = LimitLaw::discrete(vec![0.25, 0.5, 0.25]).unwrap();
        let mut xs = vec![0u64; 25];
        xs.extend(vec![1u64; 50]);
        xs.extend(vec![2u64; 25]);
        let e = EmpiricalDistribution::from_integers(&xs, None).unwrap();
        let chi = gof_test(&e, &law, GofKind::Chi2).unwrap();
        assert_eq!(chi.stat, 0.0);
        assert!(chi.pass);
        assert_eq!(gof_test(&e, &law, GofKind::Tv).unwrap().stat, 0.0);

        let point = EmpiricalDistribution::from_integers(&[3; 10], None).unwrap();
        let tv = gof_test(&point, &LimitLaw::discrete(vec![1.0]).unwrap(), GofKind::Tv).unwrap();
        assert_eq!(tv.stat, 1.0);
        assert!(!tv.pass);
    }

    #[test]
    fn incompatible_kinds() {
        let e = EmpiricalDistribution::from_integers(&[1, 2, 3], None).unwrap();
        let z = EmpiricalDistribution::from_reals(vec![0.1, -0.3], None).unwrap();
        let normal = LimitLaw::standard_normal();
        let pg = LimitLaw::poisson_geometric(1.0).unwrap();
        assert!(gof_test(&e, &normal, GofKind::Chi2).is_err());
        assert!(gof_test(&e, &normal, GofKind::Tv).is_err());
        assert!(gof_test(&z, &pg, GofKind::Chi2).is_err());
        assert!(gof_test(&e, &pg, GofKind::Ks).is_err());
        assert!(two_sample_test(&e, &z, GofKind::Chi2).is_err());
        assert!(two_sample_test(&e, &e, GofKind::Tv).is_err());
        let tv = gof_test(&e, &pg, GofKind::Tv).unwrap();
        assert!(tv.with_criterion(Criterion::PValueAbove(0.01)).is_err());
    }

    #[test]
    fn ks_statistic_by_hand() {
        // Samples at the quartiles of N(0,1): sup gap is 1/4.
        let q = Normal::new(0.0, 1.0).unwrap();
        let xs = vec![q.inverse_cdf(0.25), q.inverse_cdf(0.5), q.inverse_cdf(0.75)];
        let e = EmpiricalDistribution::from_reals(xs, None).unwrap();
        let r = gof_test(&e, &LimitLaw::standard_normal(), GofKind::Ks).unwrap();
        assert!((r.stat - 0.25).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_branches_agree() {
        // Evaluate both series directly at points where both converge.
        for x in [0.6, 0.9, 1.1, 1.18, 1.3, 1.6] {
            let theta = {
                let mut s = 0.0;
                for k in 1..=50 {
                    let j = (2 * k - 1) as f64;
                    s += (-j * j * PI * PI / (8.0 * x * x)).exp();
                }
                1.0 - (2.0 * PI).sqrt() / x * s
            };
            let alt = {
                let mut s = 0.0;
                for k in 1..=200i32 {
                    s += (-1f64).powi(k - 1) * (-2.0 * (k * k) as f64 * x * x).exp();
                }
                2.0 * s
            };
            assert!((theta - alt).abs() < 1e-12, "x={x}");
            assert!((kolmogorov_sf(x) - alt).abs() < 1e-12);
        }
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-3);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert!(kolmogorov_sf(10.0) < 1e-80);
    }

    #[test]
    fn two_sample_self_comparison() {
        let e = run_experiment(50, 60, 2000, Statistic::Descents, Sampler::ShuffleEngine, 4, None).unwrap();
        for kind in [GofKind::Chi2, GofKind::Ks] {
            let r = two_sample_test(&e, &e, kind).unwrap();
            assert_eq!(r.stat, 0.0);
            assert!(r.pass);
        }
        let point = EmpiricalDistribution::from_integers(&[2; 40], None).unwrap();
        assert!(two_sample_test(&point, &point, GofKind::Chi2).unwrap().pass);
    }

    #[test]
    fn two_sample_null_and_alternative() {
        let a = run_experiment(100, 150, 30_000, Statistic::FixedPoints, Sampler::ShuffleEngine, 1, None).unwrap();
        let b = run_experiment(100, 150, 30_000, Statistic::FixedPoints, Sampler::ShuffleEngine, 2, None).unwrap();
        for kind in [GofKind::Chi2, GofKind::Ks] {
            let r = two_sample_test(&a, &b, kind).unwrap();
            assert!(r.pass, "{r}");
        }
        // Different shuffle counts are told apart.
        let c = run_experiment(100, 60, 30_000, Statistic::FixedPoints, Sampler::ShuffleEngine, 3, None).unwrap();
        assert!(!two_sample_test(&a, &c, GofKind::Chi2).unwrap().pass);
        assert!(!two_sample_test(&a, &c, GofKind::Ks).unwrap().pass);
    }

    /// Over 200 seeded repetitions a test on samples from its own target law
    /// rejects at level 0.05 no more often than nominal plus four binomial sd.
    #[test]
    fn null_calibration() {
        let reps = 200;
        let limit = (0.05 * reps as f64 + 4.0 * (reps as f64 * 0.05 * 0.95).sqrt()) as usize;
        let pg = LimitLaw::poisson_geometric(1.0).unwrap();
        let table = pg.pmf_table();
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut rejects = [0usize; 2];
        for rep in 0..reps {
            let xs = run_trials(2000, 1000 + rep, None, |rng| Ok(inverse_transform(&table, rng))).unwrap();
            let e = EmpiricalDistribution::from_integers(&xs, None).unwrap();
            rejects[0] += (gof_test(&e, &pg, GofKind::Chi2).unwrap().p_value.unwrap() < 0.05) as usize;
            let zs = run_trials(1000, 5000 + rep, None, |rng| Ok(normal.inverse_cdf(rng.random::<f64>()))).unwrap();
            let z = EmpiricalDistribution::from_reals(zs, None).unwrap();
            let r = gof_test(&z, &LimitLaw::standard_normal(), GofKind::Ks).unwrap();
            rejects[1] += (r.p_value.unwrap() < 0.05) as usize;
        }
        assert!(rejects[0] <= limit, "chi2 rejected {} of {reps}", rejects[0]);
        assert!(rejects[1] <= limit, "ks rejected {} of {reps}", rejects[1]);
    }

    #[test]
    fn summary_values() {
        let e = EmpiricalDistribution::from_integers(&[4, 4], None).unwrap();
        let s = summarize(&e).unwrap();
        assert_eq!((s.mean, s.variance, s.se_mean), (4.0, 0.0, 0.0));
        assert!(summarize(&EmpiricalDistribution::from_integers(&[1], None).unwrap()).is_err());
        let e = EmpiricalDistribution::from_integers(&[1, 2, 3, 4], None).unwrap();
        let s = summarize(&e).unwrap();
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
        assert!((s.se_mean - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!(s.mean_ci.0 < 2.5 && s.mean_ci.1 > 2.5);
    }

    #[test]
    fn csv_output() {
        let e = EmpiricalDistribution::from_integers(&[2, 0, 2, 5], Some(9)).unwrap();
        let mut buf = Vec::new();
        write_histogram_csv(&mut buf, &e, Some("{\"seed\":9}")).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# {\"seed\":9}\nvalue,count,density\n0,1,0.25\n2,2,0.5\n5,1,0.25\n"
        );
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &e.standardize(2.0, 2.0).unwrap(), None).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "trial,value\n0,0\n1,-1\n2,0\n3,1.5\n");
    }
}
