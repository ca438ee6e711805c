//! Limiting laws and their parameters.
//!
//! Normal limits are exposed as coefficients: descents are centred by
//! `mean_coeff * n` and scaled by `sqrt(var_coeff * n)`, inversions by
//! `mean_coeff * n^2` and `sqrt(var_coeff * n^3)`. Nothing is rescaled
//! implicitly.

use serde::Serialize;
use libm::erfc;

use crate::error::{Error, Result};

/// Tail mass below which discrete tables are truncated.
pub const TAIL_CUTOFF: f64 = 1e-12;

/// Hard cap on discrete table length.
const MAX_TABLE: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LimitLaw {
    /// Independent `Poisson(a) + Geometric(a)` on `{0, 1, ...}`, `a = 1 - e^-c`.
    PoissonGeometric { c: f64 },
    Normal { mean: f64, variance: f64 },
    Poisson { rate: f64 },
    /// Explicit PMF on `0..pmf.len()`.
    Discrete { pmf: Vec<f64> },
}

impl LimitLaw {
    pub fn poisson_geometric(c: f64) -> Result<Self> {
        check_c(c)?;
        Ok(LimitLaw::PoissonGeometric { c })
    }

    pub fn normal(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() || !mean.is_finite() {
            return Err(Error::param("variance", variance, "must be positive and finite"));
        }
        Ok(LimitLaw::Normal { mean, variance })
    }

    pub fn standard_normal() -> Self {
        LimitLaw::Normal {
            mean: 0.0,
            variance: 1.0,
        }
    }

    pub fn poisson(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::param("rate", rate, "must be positive and finite"));
        }
        Ok(LimitLaw::Poisson { rate })
    }

    pub fn discrete(pmf: Vec<f64>) -> Result<Self> {
        let total: f64 = pmf.iter().sum();
        if pmf.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::param("pmf total", total, "must be a probability vector"));
        }
        Ok(LimitLaw::Discrete { pmf })
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, LimitLaw::Normal { .. })
    }

    pub fn name(&self) -> String {
        match self {
            LimitLaw::PoissonGeometric { c } => format!("poisson-geometric(c={c})"),
            LimitLaw::Normal { mean, variance } => format!("normal({mean}, {variance})"),
            LimitLaw::Poisson { rate } => format!("poisson({rate})"),
            LimitLaw::Discrete { pmf } => format!("discrete(len={})", pmf.len()),
        }
    }

    /// Point mass at integer `value`; zero for continuous laws.
    pub fn pmf(&self, value: i64) -> f64 {
        if value < 0 {
            return 0.0;
        }
        let l = value as usize;
        match self {
            LimitLaw::PoissonGeometric { c } => pg_pmf(*c, l),
            LimitLaw::Poisson { rate } => poisson_pmf_unchecked(*rate, l),
            LimitLaw::Discrete { pmf } => pmf.get(l).copied().unwrap_or(0.0),
            LimitLaw::Normal { .. } => 0.0,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            LimitLaw::Normal { mean, variance } => normal_cdf_unchecked(x, *mean, *variance),
            _ => {
                if x < 0.0 {
                    return 0.0;
                }
                let top = x.floor() as usize;
                let table = self.pmf_table();
                if top >= table.len() {
                    return 1.0;
                }
                table[..=top].iter().sum::<f64>().min(1.0)
            }
        }
    }

    /// PMF on `0..len`, where `len` is the first point past which the
    /// remaining mass is below [`TAIL_CUTOFF`] (beyond the mode).
    pub fn pmf_table(&self) -> Vec<f64> {
        match self {
            LimitLaw::Discrete { pmf } => pmf.clone(),
            LimitLaw::Normal { .. } => Vec::new(),
            _ => {
                let mut table = Vec::new();
                let mut acc = 0.0;
                while table.len() < MAX_TABLE {
                    let p = self.pmf(table.len() as i64);
                    acc += p;
                    table.push(p);
                    if 1.0 - acc < TAIL_CUTOFF && table.len() > 1 {
                        break;
                    }
                }
                table
            }
        }
    }
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::param("c", c, "must be positive and finite"));
    }
    Ok(())
}

/// `P(X + Y = l)` for independent `X ~ Poisson(a)`, `Y ~ Geometric(a)` on
/// `{0, 1, ...}` with `P(Y = k) = a (1-a)^k` and `a = 1 - e^-c`:
/// `sum_{j=0}^{l} a (1-a)^j e^-a a^(l-j) / (l-j)!`.
pub fn poisson_geometric_pmf(c: f64, l: usize) -> Result<f64> {
    check_c(c)?;
    Ok(pg_pmf(c, l))
}

fn pg_pmf(c: f64, l: usize) -> f64 {
    let a = -(-c).exp_m1();
    // 1 - a = e^-c, kept exact for large c.
    let log_q = -c;
    let lead = a * (-a).exp();
    // i = l - j runs over the Poisson part; a^i / i! is built up incrementally.
    let mut poisson_part = 1.0;
    let mut sum = 0.0;
    for i in 0..=l {
        if i > 0 {
            poisson_part *= a / i as f64;
        }
        let geometric_part = ((l - i) as f64 * log_q).exp();
        sum += geometric_part * poisson_part;
    }
    lead * sum
}

/// `(mean_coeff, var_coeff)` for descents at `r = c n`:
/// `((1 - e^-c)/2, (1 + 2e^-c - 3(1+c)e^-2c)/12)`.
pub fn descents_limit_params(c: f64) -> Result<(f64, f64)> {
    check_c(c)?;
    let e = (-c).exp();
    let a = -(-c).exp_m1();
    Ok((a / 2.0, (1.0 + 2.0 * e - 3.0 * (1.0 + c) * e * e) / 12.0))
}

/// `(mean_coeff, var_coeff)` for inversions at `r = c n`:
/// `((1 - e^-2c)/4, (1 + 8e^-3c - 9(1+c)e^-4c)/36)`.
pub fn inversions_limit_params(c: f64) -> Result<(f64, f64)> {
    check_c(c)?;
    let e = (-c).exp();
    let a2 = -(-2.0 * c).exp_m1();
    Ok((
        a2 / 4.0,
        (1.0 + 8.0 * e.powi(3) - 9.0 * (1.0 + c) * e.powi(4)) / 36.0,
    ))
}

/// Limit variances of randomly indexed sums whose index `K` has
/// `K/n -> a` and `(K - E K)/sqrt(n) -> N(0, tau2)`:
/// descents `a/12 + tau2/4`, inversions `(1 - (1-a)^3)/36 + (1-a)^2 tau2 / 4`.
pub fn general_clt_variance(a: f64, tau2: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::param("a", a, "must lie in (0, 1)"));
    }
    if !(tau2 >= 0.0) || !tau2.is_finite() {
        return Err(Error::param("tau2", tau2, "must be non-negative and finite"));
    }
    let b = 1.0 - a;
    Ok((
        a / 12.0 + tau2 / 4.0,
        (1.0 - b * b * b) / 36.0 + b * b * tau2 / 4.0,
    ))
}

pub fn poisson_pmf(rate: f64, l: usize) -> Result<f64> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::param("rate", rate, "must be positive and finite"));
    }
    Ok(poisson_pmf_unchecked(rate, l))
}

fn poisson_pmf_unchecked(rate: f64, l: usize) -> f64 {
    let log_p = l as f64 * rate.ln() - rate - statrs::function::gamma::ln_gamma(l as f64 + 1.0);
    log_p.exp()
}

pub fn normal_cdf(x: f64, mean: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::param("variance", variance, "must be positive and finite"));
    }
    Ok(normal_cdf_unchecked(x, mean, variance))
}

fn normal_cdf_unchecked(x: f64, mean: f64, variance: f64) -> f64 {
    0.5 * erfc(-(x - mean) / (2.0 * variance).sqrt())
}
