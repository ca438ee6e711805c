//! Experiment configurations, shuffle-count schedules, target laws and the
//! standard verification suites built on [`crate::harness`].

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{
    descents_moments, expected_fixed_points_exact, expected_inversions, expected_inversions_exact,
    fixed_point_law_finite, return_probability_exact,
};
use crate::harness::{
    gof_test_with, run_experiment, summarize, two_sample_test, Criterion, EmpiricalDistribution,
    GofKind, Sampler, Statistic, TestReport,
};
use crate::limits::{
    descents_limit_params, general_clt_variance, inversions_limit_params, poisson_geometric_pmf,
    LimitLaw,
};
use crate::occupancy::{occupied_clt_params, occupied_pmf_exact};
use crate::shuffle::{all_selection_sequences, apply_fast};

pub const DEFAULT_TRIALS: usize = 1000;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Explicit shuffle count.
    Fixed,
    /// `r = round(c n)`.
    Critical,
    /// Statistic-specific schedule past the mixing threshold.
    Mixed,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Fixed => "fixed",
            Regime::Critical => "critical",
            Regime::Mixed => "mixed",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fixed" | "fixed-r" => Ok(Regime::Fixed),
            "critical" => Ok(Regime::Critical),
            "mixed" => Ok(Regime::Mixed),
            _ => Err(Error::UnknownTag {
                kind: "regime",
                tag: s.to_string(),
            }),
        }
    }
}

/// `round(c n)`.
pub fn critical_shuffle_count(n: usize, c: f64) -> Result<usize> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::param("c", c, "must be positive and finite"));
    }
    Ok((c * n as f64).round() as usize)
}

/// Mixed-regime schedule with `c_n = ln ln n`: `ceil(n ln n)` for fixed
/// points, `ceil(n ln n / 2 + n ln ln n)` for descents and
/// `ceil(n ln n / 4 + n ln ln n)` for inversions. Needs `n >= 3` so that
/// `ln ln n > 0`.
pub fn mixed_shuffle_count(n: usize, statistic: Statistic) -> Result<usize> {
    if n < 3 {
        return Err(Error::param("n", n as f64, "mixed schedule needs n >= 3"));
    }
    let nf = n as f64;
    let ln = nf.ln();
    let r = match statistic {
        Statistic::FixedPoints => nf * ln,
        Statistic::Descents => nf * ln / 2.0 + nf * ln.ln(),
        Statistic::Inversions => nf * ln / 4.0 + nf * ln.ln(),
    };
    Ok(r.ceil() as usize)
}

pub const MIXED_SCHEDULE_LABEL: &str = "c_n = ln ln n";

/// A run as read from JSON or flags; unset fields take defaults on
/// [`resolve`](ExperimentConfig::resolve).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub n: Option<usize>,
    pub r: Option<usize>,
    pub c: Option<f64>,
    pub regime: Option<Regime>,
    pub trials: Option<usize>,
    pub statistic: Option<Statistic>,
    pub sampler: Option<Sampler>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<String>,
}

/// A fully determined run. Serialised into every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub experiment: String,
    pub n: usize,
    pub r: usize,
    pub regime: Regime,
    pub c: Option<f64>,
    pub schedule: Option<String>,
    pub trials: usize,
    pub statistic: Statistic,
    pub sampler: Sampler,
    pub seed: u64,
    /// Where outputs go; not part of the reproducible record.
    #[serde(skip)]
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fields set in `other` win.
    pub fn overridden_by(&self, other: &ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            experiment: other.experiment.clone().or_else(|| self.experiment.clone()),
            n: other.n.or(self.n),
            r: other.r.or(self.r),
            c: other.c.or(self.c),
            regime: other.regime.or(self.regime),
            trials: other.trials.or(self.trials),
            statistic: other.statistic.or(self.statistic),
            sampler: other.sampler.or(self.sampler),
            seed: other.seed.or(self.seed),
            workers: other.workers.or(self.workers),
            out: other.out.clone().or_else(|| self.out.clone()),
        }
    }

    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let n = self.n.ok_or_else(|| Error::Config("n is required".into()))?;
        if n == 0 {
            return Err(Error::InvalidDeckSize(0));
        }
        let trials = self.trials.unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        let statistic = self.statistic.unwrap_or(Statistic::FixedPoints);
        let regime = match (self.regime, self.r, self.c) {
            (Some(g), _, _) => g,
            (None, Some(_), None) => Regime::Fixed,
            (None, None, Some(_)) => Regime::Critical,
            (None, Some(_), Some(_)) => {
                return Err(Error::Config("give either r or c, not both".into()))
            }
            (None, None, None) => {
                return Err(Error::Config("give r, c, or a mixed regime".into()))
            }
        };
        let (r, c, schedule) = match regime {
            Regime::Fixed => {
                if self.c.is_some() {
                    return Err(Error::Config("fixed regime takes r, not c".into()));
                }
                let r = self
                    .r
                    .ok_or_else(|| Error::Config("fixed regime needs r".into()))?;
                (r, None, None)
            }
            Regime::Critical => {
                if self.r.is_some() {
                    return Err(Error::Config("critical regime takes c, not r".into()));
                }
                let c = self
                    .c
                    .ok_or_else(|| Error::Config("critical regime needs c".into()))?;
                (critical_shuffle_count(n, c)?, Some(c), None)
            }
            Regime::Mixed => {
                if self.r.is_some() || self.c.is_some() {
                    return Err(Error::Config("mixed regime derives r; drop r and c".into()));
                }
                (
                    mixed_shuffle_count(n, statistic)?,
                    None,
                    Some(MIXED_SCHEDULE_LABEL.to_string()),
                )
            }
        };
        Ok(ResolvedConfig {
            experiment: self
                .experiment
                .clone()
                .unwrap_or_else(|| format!("{statistic}-{regime}")),
            n,
            r,
            regime,
            c,
            schedule,
            trials,
            statistic,
            sampler: self.sampler.unwrap_or(Sampler::ShuffleEngine),
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            out: self.out.clone(),
        })
    }
}

impl ResolvedConfig {
    /// `c` itself, or `r / n` for an explicit shuffle count.
    pub fn effective_c(&self) -> f64 {
        self.c.unwrap_or(self.r as f64 / self.n as f64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centering {
    /// Exact finite-n mean.
    Exact,
    /// Leading-order mean from the limit theorem.
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Standardization {
    pub center: f64,
    pub scale: f64,
    pub centering: Centering,
    /// Leading-order centre, recorded alongside an exact one.
    pub asymptotic_center: f64,
}

/// What a run is compared against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Target {
    pub law: LimitLaw,
    pub kind: GofKind,
    /// Applied to the raw samples before a continuous comparison.
    pub standardization: Option<Standardization>,
}

/// Target law for `statistic` after `r` shuffles of `n` cards.
///
/// Fixed points compare by TV with the Poisson-geometric law at `c`
/// (Poisson(1) in the mixed regime). Descents and inversions compare by KS
/// after standardisation: critical runs to N(0, 1), mixed runs to
/// N(0, 1/12) and N(0, 1/36) with scales `sqrt(n)` and `n^1.5`. Both are
/// centred at their exact finite-n means; the leading-order centres
/// `n(1 - e^-c)/2`, `n/2`, `n^2(1 - e^-2c)/4` and `n^2/4` are recorded too.
pub fn target_law(statistic: Statistic, regime: Regime, n: usize, r: usize, c: f64) -> Result<Target> {
    let nf = n as f64;
    let mixed = regime == Regime::Mixed;
    if !mixed && !(c > 0.0) {
        return Err(Error::param("c", c, "no limit law without shuffles"));
    }
    Ok(match statistic {
        Statistic::FixedPoints => Target {
            law: if mixed {
                LimitLaw::poisson(1.0)?
            } else {
                LimitLaw::poisson_geometric(c)?
            },
            kind: GofKind::Tv,
            standardization: None,
        },
        Statistic::Descents => {
            let (center, _) = descents_moments(n, r)?;
            let (asymptotic_center, scale, law) = if mixed {
                (nf / 2.0, nf.sqrt(), LimitLaw::normal(0.0, 1.0 / 12.0)?)
            } else {
                let (m, v) = descents_limit_params(c)?;
                (m * nf, (v * nf).sqrt(), LimitLaw::standard_normal())
            };
            Target {
                law,
                kind: GofKind::Ks,
                standardization: Some(Standardization {
                    center,
                    scale,
                    centering: Centering::Exact,
                    asymptotic_center,
                }),
            }
        }
        Statistic::Inversions => {
            let center = expected_inversions(n, r);
            let (asymptotic_center, scale, law) = if mixed {
                (nf * nf / 4.0, nf.powf(1.5), LimitLaw::normal(0.0, 1.0 / 36.0)?)
            } else {
                let (m, v) = inversions_limit_params(c)?;
                (m * nf * nf, (v * nf * nf * nf).sqrt(), LimitLaw::standard_normal())
            };
            Target {
                law,
                kind: GofKind::Ks,
                standardization: Some(Standardization {
                    center,
                    scale,
                    centering: Centering::Exact,
                    asymptotic_center,
                }),
            }
        }
    })
}

/// The `test` block of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSummary {
    pub name: String,
    pub target: String,
    pub stat: f64,
    pub p_value: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
}

impl From<&TestReport> for TestSummary {
    fn from(t: &TestReport) -> Self {
        Self {
            name: t.name.clone(),
            target: t.target.clone(),
            stat: t.stat,
            p_value: t.p_value,
            threshold: t.threshold(),
            pass: t.pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub n: usize,
    pub r: usize,
    pub trials: usize,
    pub seed: u64,
    pub statistic: Statistic,
    pub sampler: Sampler,
    pub mean: f64,
    pub variance: f64,
    pub test: Option<TestSummary>,
    pub standardization: Option<Standardization>,
    pub config: ResolvedConfig,
}

pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub raw: EmpiricalDistribution,
    pub standardized: Option<EmpiricalDistribution>,
}

/// Runs `config` and, when its regime has a limit law, tests against it.
/// `criterion` replaces the default pass rule of the test.
pub fn run_configured(
    config: &ResolvedConfig,
    workers: Option<usize>,
    criterion: Option<Criterion>,
) -> Result<ExperimentOutcome> {
    let raw = run_experiment(
        config.n,
        config.r,
        config.trials,
        config.statistic,
        config.sampler,
        config.seed,
        workers,
    )?;
    let c = config.effective_c();
    let target = if config.regime == Regime::Mixed || c > 0.0 {
        Some(target_law(config.statistic, config.regime, config.n, config.r, c)?)
    } else {
        None
    };
    let mut standardized = None;
    let mut test = None;
    let mut standardization = None;
    if let Some(t) = &target {
        let criterion = criterion.unwrap_or(match t.kind {
            GofKind::Tv => Criterion::StatisticBelow(crate::harness::DEFAULT_TV_THRESHOLD),
            _ => Criterion::PValueAbove(crate::harness::P_VALUE_FLOOR),
        });
        let report = match t.standardization {
            Some(s) => {
                let z = raw.standardize(s.center, s.scale)?;
                let rep = gof_test_with(&z, &t.law, t.kind, criterion)?;
                standardized = Some(z);
                rep
            }
            None => gof_test_with(&raw, &t.law, t.kind, criterion)?,
        };
        standardization = t.standardization;
        test = Some(TestSummary::from(&report));
    }
    Ok(ExperimentOutcome {
        report: ExperimentReport {
            experiment: config.experiment.clone(),
            n: config.n,
            r: config.r,
            trials: config.trials,
            seed: config.seed,
            statistic: config.statistic,
            sampler: config.sampler,
            mean: raw.mean(),
            variance: raw.variance(),
            test,
            standardization,
            config: config.clone(),
        },
        raw,
        standardized,
    })
}

/// One line of a verification suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub pass: bool,
    pub stat: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckResult {
    fn from_report(check: String, t: &TestReport) -> Self {
        Self {
            check,
            pass: t.pass,
            stat: t.stat,
            threshold: t.threshold(),
            detail: t.to_string(),
        }
    }

    fn exact(check: String, pass: bool, detail: String) -> Self {
        Self {
            check,
            pass,
            stat: if pass { 0.0 } else { 1.0 },
            threshold: 0.0,
            detail,
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}", self.check, self.detail)
    }
}

fn ratio(num: BigUint, den: &BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den.clone()))
}

/// Exhaustive enumeration of every selection sequence for `n <= max_n`,
/// `r <= max_r`, compared in exact rational arithmetic with the expected
/// fixed points, expected inversions, every return probability and the
/// occupancy PMF.
pub fn brute_suite(max_n: usize, max_r: usize) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for n in 1..=max_n {
        for r in 0..=max_r {
            let total = BigUint::from(n).pow(r as u32);
            let mut fixed_sum = 0u64;
            let mut inv_sum = 0u64;
            let mut returns = vec![0u64; n];
            let mut occupied = vec![0u64; n + 1];
            for s in all_selection_sequences(n, r) {
                let out = apply_fast(&s);
                fixed_sum += out.deck.count_fixed_points() as u64;
                inv_sum += out.deck.count_inversions();
                for (k, c) in out.deck.entries().iter().enumerate() {
                    if *c as usize == k + 1 {
                        returns[k] += 1;
                    }
                }
                occupied[out.distinct_selected] += 1;
            }
            let tag = format!("n={n} r={r}");

            let got = ratio(fixed_sum.into(), &total);
            let want = expected_fixed_points_exact(n, r)?;
            out.push(CheckResult::exact(
                format!("brute expected-fixed-points {tag}"),
                got == want,
                format!("enumerated {got}, formula {want}"),
            ));

            let got = ratio(inv_sum.into(), &total);
            let want = expected_inversions_exact(n, r);
            out.push(CheckResult::exact(
                format!("brute expected-inversions {tag}"),
                got == want,
                format!("enumerated {got}, formula {want}"),
            ));

            let mut mismatch = Vec::new();
            for k in 1..=n {
                let got = ratio(returns[k - 1].into(), &total);
                let want = return_probability_exact(n, r, k)?;
                if got != want {
                    mismatch.push(format!("k={k}: {got} vs {want}"));
                }
            }
            out.push(CheckResult::exact(
                format!("brute return-probabilities {tag}"),
                mismatch.is_empty(),
                if mismatch.is_empty() {
                    format!("all {n} positions agree")
                } else {
                    mismatch.join("; ")
                },
            ));

            let want = occupied_pmf_exact(n, r)?;
            let got: Vec<BigRational> = occupied.iter().map(|&c| ratio(c.into(), &total)).collect();
            out.push(CheckResult::exact(
                format!("brute occupancy-pmf {tag}"),
                got == want,
                format!("{} cells", n + 1),
            ));
        }
    }
    Ok(out)
}

/// Two-sample tests of the shuffle engine against each decomposition
/// sampler. Every sample uses its own seed derived from `seed`.
pub fn decomposition_suite(
    n: usize,
    r: usize,
    trials: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<Vec<CheckResult>> {
    let cases = [
        (Statistic::FixedPoints, Sampler::FormulaDirect, GofKind::Chi2),
        (Statistic::Descents, Sampler::Resampled, GofKind::Chi2),
        (Statistic::Descents, Sampler::FormulaDirect, GofKind::Chi2),
        (Statistic::Inversions, Sampler::FormulaDirect, GofKind::Ks),
    ];
    let mut out = Vec::new();
    for (i, (statistic, sampler, kind)) in cases.into_iter().enumerate() {
        let engine_seed = seed.wrapping_add(2 * i as u64);
        let other_seed = seed.wrapping_add(2 * i as u64 + 1);
        let engine = run_experiment(n, r, trials, statistic, Sampler::ShuffleEngine, engine_seed, workers)?;
        let other = run_experiment(n, r, trials, statistic, sampler, other_seed, workers)?;
        let report = two_sample_test(&engine, &other, kind)?;
        out.push(CheckResult::from_report(
            format!("decomposition {statistic} shuffle-engine vs {sampler} n={n} r={r}"),
            &report,
        ));
    }
    Ok(out)
}

/// `|mean - target| / SE` against `max_se`.
pub fn mean_check(check: String, e: &EmpiricalDistribution, target: f64, max_se: f64) -> Result<CheckResult> {
    let s = summarize(e)?;
    let z = (s.mean - target).abs() / s.se_mean;
    Ok(CheckResult {
        check,
        pass: z <= max_se,
        stat: z,
        threshold: max_se,
        detail: format!("mean {:.6} vs {target:.6}, {z:.3} SE (SE {:.6})", s.mean, s.se_mean),
    })
}

/// `|variance / target - 1|` against `max_rel`.
pub fn variance_check(check: String, e: &EmpiricalDistribution, target: f64, max_rel: f64) -> Result<CheckResult> {
    let v = e.variance();
    let rel = (v / target - 1.0).abs();
    Ok(CheckResult {
        check,
        pass: rel < max_rel,
        stat: rel,
        threshold: max_rel,
        detail: format!("variance {v:.6} vs {target:.6}, relative gap {rel:.4}"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Panel {
    Top,
    Middle,
    Bottom,
}

impl Panel {
    pub const ALL: [Panel; 3] = [Panel::Top, Panel::Middle, Panel::Bottom];

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Panel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Panel::Top => "top",
            Panel::Middle => "middle",
            Panel::Bottom => "bottom",
        })
    }
}

impl FromStr for Panel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "top" => Ok(Panel::Top),
            "middle" => Ok(Panel::Middle),
            "bottom" => Ok(Panel::Bottom),
            _ => Err(Error::UnknownTag {
                kind: "panel",
                tag: s.to_string(),
            }),
        }
    }
}

/// Deck size, trial count and per-panel `c` of each histogram figure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FigureSpec {
    pub figure: u8,
    pub statistic: Statistic,
    pub n: usize,
    pub trials: usize,
    pub c: [f64; 3],
}

pub const FIGURES: [FigureSpec; 3] = [
    FigureSpec {
        figure: 1,
        statistic: Statistic::FixedPoints,
        n: 10_000,
        trials: 2000,
        c: [0.5, 1.0, 2.0],
    },
    FigureSpec {
        figure: 2,
        statistic: Statistic::Descents,
        n: 10_000,
        trials: 2000,
        c: [0.25, 0.5, 1.0],
    },
    FigureSpec {
        figure: 3,
        statistic: Statistic::Inversions,
        n: 1000,
        trials: 1000,
        c: [0.1, 0.25, 1.0],
    },
];

pub fn figure_spec(figure: u8) -> Result<FigureSpec> {
    FIGURES
        .iter()
        .find(|f| f.figure == figure)
        .copied()
        .ok_or_else(|| Error::UnknownTag {
            kind: "figure",
            tag: figure.to_string(),
        })
}

pub const FIGURE_TV_THRESHOLD: f64 = 0.06;
pub const FIGURE2_KS_THRESHOLD: f64 = 0.04;
pub const FIGURE3_KS_THRESHOLD: f64 = 0.06;
pub const MEAN_SE_TOLERANCE: f64 = 4.0;
pub const VARIANCE_REL_TOLERANCE: f64 = 0.15;

/// Checks for one panel of a histogram figure, run on the shuffle engine.
pub fn figure_panel_checks(
    figure: u8,
    panel: Panel,
    seed: u64,
    workers: Option<usize>,
) -> Result<Vec<CheckResult>> {
    let spec = figure_spec(figure)?;
    let c = spec.c[panel.index()];
    let n = spec.n;
    let nf = n as f64;
    let r = critical_shuffle_count(n, c)?;
    let e = run_experiment(n, r, spec.trials, spec.statistic, Sampler::ShuffleEngine, seed, workers)?;
    let tag = format!("figure {figure} {panel} n={n} r={r}");
    let mut out = Vec::new();
    match spec.statistic {
        Statistic::FixedPoints => {
            let crit = Criterion::StatisticBelow(FIGURE_TV_THRESHOLD);
            let pg = LimitLaw::poisson_geometric(c)?;
            out.push(CheckResult::from_report(
                format!("{tag} tv vs {}", pg.name()),
                &gof_test_with(&e, &pg, GofKind::Tv, crit)?,
            ));
            if panel == Panel::Bottom {
                let poisson = LimitLaw::poisson(1.0)?;
                out.push(CheckResult::from_report(
                    format!("{tag} tv vs {}", poisson.name()),
                    &gof_test_with(&e, &poisson, GofKind::Tv, crit)?,
                ));
            }
        }
        Statistic::Descents => {
            let (m, v) = descents_limit_params(c)?;
            out.push(mean_check(format!("{tag} mean"), &e, m * nf, MEAN_SE_TOLERANCE)?);
            out.push(variance_check(format!("{tag} variance"), &e, v * nf, VARIANCE_REL_TOLERANCE)?);
            let t = target_law(spec.statistic, Regime::Critical, n, r, c)?;
            let s = t.standardization.expect("descents standardise");
            let z = e.standardize(s.center, s.scale)?;
            out.push(CheckResult::from_report(
                format!("{tag} ks standardized"),
                &gof_test_with(&z, &t.law, GofKind::Ks, Criterion::StatisticBelow(FIGURE2_KS_THRESHOLD))?,
            ));
        }
        Statistic::Inversions => {
            let (m, _) = inversions_limit_params(c)?;
            out.push(mean_check(format!("{tag} mean"), &e, m * nf * nf, MEAN_SE_TOLERANCE)?);
            let t = target_law(spec.statistic, Regime::Critical, n, r, c)?;
            let s = t.standardization.expect("inversions standardise");
            let z = e.standardize(s.center, s.scale)?;
            out.push(CheckResult::from_report(
                format!("{tag} ks standardized"),
                &gof_test_with(&z, &t.law, GofKind::Ks, Criterion::StatisticBelow(FIGURE3_KS_THRESHOLD))?,
            ));
        }
    }
    Ok(out)
}

pub const MIXED_TV_THRESHOLD: f64 = 0.05;
pub const MIXED_DESCENTS_KS_THRESHOLD: f64 = 0.04;
pub const MIXED_INVERSIONS_KS_THRESHOLD: f64 = 0.06;

/// Mixed-regime comparison with the uniform-permutation limit: fixed points
/// and descents at `n = 10000` (2000 trials), inversions at `n = 1000`
/// (1000 trials).
pub fn mixed_checks(statistic: Statistic, seed: u64, workers: Option<usize>) -> Result<Vec<CheckResult>> {
    let (n, trials, criterion) = match statistic {
        Statistic::FixedPoints => (10_000, 2000, Criterion::StatisticBelow(MIXED_TV_THRESHOLD)),
        Statistic::Descents => (10_000, 2000, Criterion::StatisticBelow(MIXED_DESCENTS_KS_THRESHOLD)),
        Statistic::Inversions => (1000, 1000, Criterion::StatisticBelow(MIXED_INVERSIONS_KS_THRESHOLD)),
    };
    let config = ExperimentConfig {
        n: Some(n),
        regime: Some(Regime::Mixed),
        trials: Some(trials),
        statistic: Some(statistic),
        seed: Some(seed),
        ..Default::default()
    }
    .resolve()?;
    let outcome = run_configured(&config, workers, Some(criterion))?;
    let test = outcome.report.test.expect("mixed regime has a target");
    Ok(vec![CheckResult {
        check: format!("mixed {statistic} n={n} r={}", config.r),
        pass: test.pass,
        stat: test.stat,
        threshold: test.threshold,
        detail: format!("{} vs {}: {:.6} (need < {})", test.name, test.target, test.stat, test.threshold),
    }])
}

/// Fixed-point mean and variance at `r = c n` against the large-n moment
/// limits `1 - e^-c + 1/(e^c - 1)` and `1 - e^-c + e^c/(e^c - 1)^2`.
pub fn fixed_point_moment_checks(
    n: usize,
    c: f64,
    trials: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<Vec<CheckResult>> {
    let r = critical_shuffle_count(n, c)?;
    let e = run_experiment(n, r, trials, Statistic::FixedPoints, Sampler::ShuffleEngine, seed, workers)?;
    let (mean, var) = fixed_point_moment_limits(c)?;
    let tag = format!("fixed-point moments n={n} r={r}");
    Ok(vec![
        mean_check(format!("{tag} mean"), &e, mean, MEAN_SE_TOLERANCE)?,
        variance_check(format!("{tag} variance"), &e, var, VARIANCE_REL_TOLERANCE)?,
    ])
}

/// Limits of the mean and variance of fixed points at `r = c n`.
pub fn fixed_point_moment_limits(c: f64) -> Result<(f64, f64)> {
    let (a, _) = occupied_clt_params(c)?;
    let em1 = c.exp_m1();
    Ok((a + 1.0 / em1, a + c.exp() / (em1 * em1)))
}

/// `general_clt_variance` specialised at the occupancy parameters of `c`
/// against the descents and inversions coefficients, at `points` values of
/// `c` spread geometrically over `[0.05, 10]`.
pub fn algebraic_checks(points: usize, tol: f64) -> Result<Vec<CheckResult>> {
    let mut worst: f64 = 0.0;
    let mut at = 0.0;
    for i in 0..points {
        let c = 0.05 * (200f64).powf(i as f64 / (points.max(2) - 1) as f64);
        let (a, tau2) = occupied_clt_params(c)?;
        let (vd, vi) = general_clt_variance(a, tau2)?;
        let gap = (vd - descents_limit_params(c)?.1)
            .abs()
            .max((vi - inversions_limit_params(c)?.1).abs());
        if gap > worst {
            worst = gap;
            at = c;
        }
    }
    Ok(vec![CheckResult {
        check: format!("algebraic variance specialisation at {points} values of c"),
        pass: worst <= tol,
        stat: worst,
        threshold: tol,
        detail: format!("largest gap {worst:.3e} at c={at:.4}"),
    }])
}

/// Sup-norm distance between the finite-n fixed-point law at
/// `a = 1 - e^-c` and the Poisson-geometric limit.
pub fn finite_law_distance(n: usize, c: f64) -> Result<f64> {
    let a = -(-c).exp_m1();
    let finite = fixed_point_law_finite(n, a)?;
    let mut worst: f64 = 0.0;
    for (l, p) in finite.iter().enumerate() {
        worst = worst.max((p - poisson_geometric_pmf(c, l)?).abs());
    }
    // Mass of the limit beyond the finite support.
    let limit_mass: f64 = (0..finite.len()).map(|l| poisson_geometric_pmf(c, l)).sum::<Result<f64>>()?;
    Ok(worst.max(1.0 - limit_mass))
}

/// Distances at each `n` must decrease and end below `final_tol`.
pub fn convergence_checks(ns: &[usize], c: f64, final_tol: f64) -> Result<Vec<CheckResult>> {
    let d: Vec<f64> = ns.iter().map(|&n| finite_law_distance(n, c)).collect::<Result<_>>()?;
    let monotone = d.windows(2).all(|w| w[1] < w[0]);
    let last = *d.last().unwrap_or(&f64::INFINITY);
    let listing = ns
        .iter()
        .zip(&d)
        .map(|(n, x)| format!("n={n}: {x:.3e}"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(vec![
        CheckResult {
            check: format!("finite-law convergence monotone c={c}"),
            pass: monotone,
            stat: if monotone { 0.0 } else { 1.0 },
            threshold: 0.0,
            detail: listing.clone(),
        },
        CheckResult {
            check: format!("finite-law convergence final gap c={c}"),
            pass: last < final_tol,
            stat: last,
            threshold: final_tol,
            detail: listing,
        },
    ])
}

/// Every limit check: all figure panels, the three mixed-regime checks,
/// fixed-point moments, the algebraic identity and finite-law convergence.
pub fn limits_suite(seed: u64, workers: Option<usize>) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for f in FIGURES {
        for panel in Panel::ALL {
            out.extend(figure_panel_checks(f.figure, panel, seed, workers)?);
        }
    }
    for s in Statistic::ALL {
        out.extend(mixed_checks(*s, seed, workers)?);
    }
    out.extend(fixed_point_moment_checks(10_000, 1.0, 2000, seed, workers)?);
    out.extend(algebraic_checks(20, 1e-12)?);
    out.extend(convergence_checks(&[200, 1000, 5000], 1.0, 0.01)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(json: &str) -> Result<ResolvedConfig> {
        ExperimentConfig::from_json(json)?.resolve()
    }

    #[test]
    fn schedules() {
        assert_eq!(critical_shuffle_count(10_000, 0.25).unwrap(), 2500);
        assert_eq!(critical_shuffle_count(1000, 0.1).unwrap(), 100);
        let n = 10_000f64;
        assert_eq!(
            mixed_shuffle_count(10_000, Statistic::FixedPoints).unwrap(),
            (n * n.ln()).ceil() as usize
        );
        assert_eq!(mixed_shuffle_count(10_000, Statistic::FixedPoints).unwrap(), 92_104);
        assert_eq!(mixed_shuffle_count(10_000, Statistic::Descents).unwrap(), 68_255);
        assert_eq!(mixed_shuffle_count(1000, Statistic::Inversions).unwrap(), 3660);
        assert!(mixed_shuffle_count(2, Statistic::Descents).is_err());
    }

    #[test]
    fn config_resolution() {
        let c = cfg(r#"{"n": 100, "r": 150}"#).unwrap();
        assert_eq!((c.regime, c.r, c.trials, c.seed), (Regime::Fixed, 150, DEFAULT_TRIALS, DEFAULT_SEED));
        let c = cfg(r#"{"n": 1000, "c": 0.25, "statistic": "inversions"}"#).unwrap();
        assert_eq!((c.regime, c.r), (Regime::Critical, 250));
        let c = cfg(r#"{"n": 10000, "regime": "mixed", "statistic": "descents"}"#).unwrap();
        assert_eq!(c.r, 68_255);
        assert_eq!(c.schedule.as_deref(), Some(MIXED_SCHEDULE_LABEL));

        assert!(cfg(r#"{"n": 100, "r": 150, "c": 1.0}"#).is_err());
        assert!(cfg(r#"{"n": 100, "regime": "mixed", "r": 5}"#).is_err());
        assert!(cfg(r#"{"n": 100, "regime": "critical"}"#).is_err());
        assert!(cfg(r#"{"n": 100}"#).is_err());
        assert!(cfg(r#"{"r": 100}"#).is_err());
        assert!(cfg(r#"{"n": 0, "r": 1}"#).is_err());
        assert!(cfg(r#"{"n": 5, "r": 1, "trials": 0}"#).is_err());
        assert!(cfg(r#"{"n": 5, "r": 1, "statistic": "cycles"}"#).is_err());
        assert!(cfg("not json").is_err());
    }

    #[test]
    fn overrides_win() {
        let base = ExperimentConfig::from_json(r#"{"n": 10, "r": 5, "seed": 3}"#).unwrap();
        let flags = ExperimentConfig {
            seed: Some(8),
            ..Default::default()
        };
        let c = base.overridden_by(&flags).resolve().unwrap();
        assert_eq!((c.n, c.r, c.seed), (10, 5, 8));
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = cfg(r#"{"n": 10000, "regime": "mixed", "statistic": "descents", "seed": 4}"#).unwrap();
        let back: ResolvedConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn targets() {
        let t = target_law(Statistic::FixedPoints, Regime::Critical, 100, 100, 1.0).unwrap();
        assert_eq!(t.law, LimitLaw::PoissonGeometric { c: 1.0 });
        let t = target_law(Statistic::FixedPoints, Regime::Mixed, 100, 500, 0.0).unwrap();
        assert_eq!(t.law, LimitLaw::Poisson { rate: 1.0 });
        let t = target_law(Statistic::Inversions, Regime::Mixed, 1000, 3660, 0.0).unwrap();
        let s = t.standardization.unwrap();
        assert_eq!(s.centering, Centering::Exact);
        assert!((s.scale - 1000f64.powf(1.5)).abs() < 1e-6);
        assert!(target_law(Statistic::Descents, Regime::Fixed, 100, 0, 0.0).is_err());
    }

    #[test]
    fn run_configured_without_target() {
        let c = cfg(r#"{"n": 7, "r": 0, "trials": 1}"#).unwrap();
        let o = run_configured(&c, None, None).unwrap();
        assert!(o.report.test.is_none());
        assert_eq!(o.report.mean, 7.0);
    }

    #[test]
    fn small_brute_suite() {
        let checks = brute_suite(3, 3).unwrap();
        assert_eq!(checks.len(), 3 * 4 * 4);
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
    }

    #[test]
    fn moment_limits() {
        let (m, v) = fixed_point_moment_limits(1.0).unwrap();
        assert!((m - 1.214_097_3).abs() < 1e-7);
        assert!((v - 1.552_794_2).abs() < 1e-7);
    }

    #[test]
    fn algebraic_identity() {
        let checks = algebraic_checks(20, 1e-12).unwrap();
        assert!(checks[0].pass, "{}", checks[0]);
    }

    #[test]
    fn panels_parse() {
        assert_eq!("middle".parse::<Panel>().unwrap(), Panel::Middle);
        assert!("left".parse::<Panel>().is_err());
        assert!(figure_spec(4).is_err());
        assert_eq!(figure_spec(3).unwrap().n, 1000);
    }
}
