//! Truncated Weibull and log-normal models for the incubation time, fitted
//! by maximizing the interval-censored likelihood
//! `sum_i log{F(S_i) - F(S_i - E_i)}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::incubation::IncubationData;
use crate::nelder_mead::{minimize, NelderMeadOptions};
use crate::quad::adaptive_gauss_kronrod;

/// `F(x) = (1 - exp(-beta x^alpha)) / (1 - exp(-beta M^alpha))` on `[0, M]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullTruncParams {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "default_upper")]
    pub upper: f64,
}

fn default_upper() -> f64 {
    20.0
}

impl WeibullTruncParams {
    pub fn new(alpha: f64, beta: f64, upper: f64) -> Self {
        Self { alpha, beta, upper }
    }

    fn survival_raw(&self, x: f64) -> f64 {
        (-self.beta * x.powf(self.alpha)).exp()
    }

    fn norm(&self) -> f64 {
        -(-self.beta * self.upper.powf(self.alpha)).exp_m1()
    }

    /// `F(s) - F(r)` for `r < s`, evaluated without cancellation in the left tail.
    pub fn interval(&self, r: f64, s: f64) -> f64 {
        let (r, s) = (r.clamp(0.0, self.upper), s.clamp(0.0, self.upper));
        if s <= r {
            return 0.0;
        }
        let z = self.norm();
        if r == 0.0 {
            return -(-self.beta * s.powf(self.alpha)).exp_m1() / z;
        }
        // exp(-a) - exp(-b) = exp(-a) * (1 - exp(a - b))
        let (a, b) = (self.beta * r.powf(self.alpha), self.beta * s.powf(self.alpha));
        (-a).exp() * -(a - b).exp_m1() / z
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        (-(-p * self.norm()).ln_1p() / self.beta).powf(1.0 / self.alpha)
    }

    pub fn density(&self, x: f64) -> f64 {
        if x <= 0.0 || x > self.upper {
            return 0.0;
        }
        self.alpha * self.beta * x.powf(self.alpha - 1.0) * self.survival_raw(x) / self.norm()
    }

    /// `int_0^M (1 - F(x)) dx`.
    pub fn mean(&self) -> f64 {
        adaptive_gauss_kronrod(&|x| 1.0 - weibull_trunc_cdf(self, x), 0.0, self.upper, 1e-12)
            .expect("smooth integrand")
    }
}

pub fn weibull_trunc_cdf(p: &WeibullTruncParams, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= p.upper {
        1.0
    } else {
        (-(-p.beta * x.powf(p.alpha)).exp_m1() / p.norm()).min(1.0)
    }
}

/// `Phi((log x - alpha) / beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalParams {
    pub alpha: f64,
    pub beta: f64,
}

/// Standard normal CDF through `erfc`, accurate in both tails.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

impl LogNormalParams {
    fn z(&self, x: f64) -> f64 {
        (x.ln() - self.alpha) / self.beta
    }

    /// `F(s) - F(r)` for `r < s`, using upper tails when both are right of the median.
    pub fn interval(&self, r: f64, s: f64) -> f64 {
        if s <= r || s <= 0.0 {
            return 0.0;
        }
        let zs = self.z(s);
        if r <= 0.0 {
            return std_normal_cdf(zs);
        }
        let zr = self.z(r);
        if zr > 0.0 {
            std_normal_cdf(-zr) - std_normal_cdf(-zs)
        } else {
            std_normal_cdf(zs) - std_normal_cdf(zr)
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let n = Normal::standard();
        (self.alpha + self.beta * n.inverse_cdf(p)).exp()
    }

    pub fn mean(&self) -> f64 {
        (self.alpha + 0.5 * self.beta * self.beta).exp()
    }
}

pub fn lognormal_cdf(p: &LogNormalParams, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        std_normal_cdf(p.z(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Weibull,
    Lognormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ParametricModel {
    Weibull(WeibullTruncParams),
    Lognormal(LogNormalParams),
}

impl ParametricModel {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Weibull(p) => weibull_trunc_cdf(p, x),
            Self::Lognormal(p) => lognormal_cdf(p, x),
        }
    }

    pub fn interval(&self, r: f64, s: f64) -> f64 {
        match self {
            Self::Weibull(p) => p.interval(r, s),
            Self::Lognormal(p) => p.interval(r, s),
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            Self::Weibull(w) => w.quantile(p),
            Self::Lognormal(l) => l.quantile(p),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Weibull(w) => w.mean(),
            Self::Lognormal(l) => l.mean(),
        }
    }

    /// Interval-censored log likelihood; `floor` bounds each term from below.
    pub fn log_likelihood(&self, data: &IncubationData, floor: Option<f64>) -> f64 {
        data.exposures()
            .iter()
            .zip(data.onsets())
            .map(|(&e, &s)| {
                let d = self.interval(s - e, s);
                match floor {
                    Some(fl) => d.max(fl).ln(),
                    None => d.ln(),
                }
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricFit {
    pub model: ParametricModel,
    pub loglik: f64,
}

const LIKELIHOOD_FLOOR: f64 = 1e-300;

fn model_from(family: Family, theta: &[f64], upper: f64) -> ParametricModel {
    match family {
        Family::Weibull => ParametricModel::Weibull(WeibullTruncParams::new(theta[0].exp(), theta[1].exp(), upper)),
        Family::Lognormal => ParametricModel::Lognormal(LogNormalParams {
            alpha: theta[0],
            beta: theta[1].exp(),
        }),
    }
}

/// Starting points: moments of the log of the midpoint-imputed incubation
/// times, plus dispersed variants.
fn starts(data: &IncubationData, family: Family, upper: f64) -> Vec<[f64; 2]> {
    let logs: Vec<f64> = data
        .exposures()
        .iter()
        .zip(data.onsets())
        .map(|(&e, &s)| (s - 0.5 * e).clamp(0.05, upper.max(0.1)).ln())
        .collect();
    let m = logs.iter().sum::<f64>() / logs.len() as f64;
    let sd = (logs.iter().map(|l| (l - m).powi(2)).sum::<f64>() / logs.len() as f64)
        .sqrt()
        .max(0.05);
    match family {
        Family::Lognormal => vec![
            [m, sd.ln()],
            [m, (0.5 * sd).ln()],
            [m, (2.0 * sd).ln()],
            [m - sd, sd.ln()],
            [m + sd, sd.ln()],
        ],
        Family::Weibull => {
            let alpha = std::f64::consts::PI / (sd * 6f64.sqrt());
            let median = m.exp();
            let beta_for = |a: f64, med: f64| std::f64::consts::LN_2 / med.powf(a);
            [(alpha, median), (0.5 * alpha, median), (2.0 * alpha, median), (alpha, 0.5 * median), (alpha, 2.0 * median)]
                .iter()
                .map(|&(a, med)| [a.ln(), beta_for(a, med).ln()])
                .collect()
        }
    }
}

/// Maximum likelihood fit of a parametric family by multi-start Nelder-Mead.
pub fn fit_parametric(data: &IncubationData, family: Family) -> Result<ParametricFit> {
    fit_parametric_with(data, family, 20.0)
}

/// As [`fit_parametric`], with truncation point `upper` for the Weibull family.
pub fn fit_parametric_with(data: &IncubationData, family: Family, upper: f64) -> Result<ParametricFit> {
    if data.len() < 2 {
        return Err(Error::invalid("parametric fit needs at least two records"));
    }
    let objective = |theta: &[f64]| {
        if theta.iter().any(|v| !v.is_finite() || v.abs() > 700.0) {
            return f64::INFINITY;
        }
        -model_from(family, theta, upper).log_likelihood(data, Some(LIKELIHOOD_FLOOR))
    };
    let opts = NelderMeadOptions {
        max_evals: 3000,
        f_tol: 1e-13,
        x_tol: 1e-9,
        step: 0.3,
    };
    let results: Vec<_> = starts(data, family, upper)
        .par_iter()
        .map(|s| {
            let first = minimize(objective, s, opts);
            // restart from the best vertex to escape a collapsed simplex
            let second = minimize(objective, &first.x, NelderMeadOptions { step: 0.05, ..opts });
            if second.value <= first.value {
                second
            } else {
                first
            }
        })
        .collect();
    let best = results
        .into_iter()
        .filter(|r| r.value.is_finite())
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| Error::Numerical("no start produced a finite likelihood".into()))?;
    let model = model_from(family, &best.x, upper);
    let loglik = model.log_likelihood(data, None);
    Ok(ParametricFit { model, loglik })
}
