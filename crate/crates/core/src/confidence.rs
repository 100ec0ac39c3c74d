//! Smoothed-bootstrap confidence bands around the SMLE.
//!
//! Bootstrap samples are drawn from the SMLE with pilot bandwidth `h0`, keeping
//! the design fixed. Deviations are centered at `int L_h(t, u) dF~_{n,h0}(u)`,
//! the bootstrap expectation of the smoothing step. Current status bands are
//! Studentized with `S(t) = n^-2 sum_i K_h(t - T_i)^2 (delta_i - F^(T_i))^2`;
//! incubation bands use plain percentiles of the deviations.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{CurrentStatusModel, IncubationModel, SmoothedBootstrapModel};
use crate::current_status::CurrentStatusData;
use crate::error::{Error, Result};
use crate::incubation::IncubationData;
use crate::io;
use crate::kernel::KernelSpec;
use crate::rng::{child_seed, stream, Purpose};
use crate::sim::{gen_current_status, Law, TruthSpec};
use crate::smle::{Smoothable, Smoother};
use crate::stats::quantile_sorted;
use crate::step::StepDistribution;

/// More skipped replicates than this fraction at any grid point is an error.
const MAX_SKIPPED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandMethod {
    Studentized,
    Percentile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBand {
    pub grid: Vec<f64>,
    pub lower: Vec<f64>,
    pub estimate: Vec<f64>,
    pub upper: Vec<f64>,
    pub alpha: f64,
    pub method: BandMethod,
    pub replications: usize,
    pub h: f64,
    pub h0: f64,
    /// Replicate evaluations dropped because the variance estimate vanished.
    pub skipped: usize,
}

impl ConfidenceBand {
    pub fn covers(&self, k: usize, value: f64) -> bool {
        self.lower[k] <= value && value <= self.upper[k]
    }

    /// Columns `t,lower,estimate,upper`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        io::write_rows(
            w,
            &["t", "lower", "estimate", "upper"],
            (0..self.grid.len()).map(|k| vec![self.grid[k], self.lower[k], self.estimate[k], self.upper[k]]),
        )
    }
}

/// Bandwidths, bootstrap size, level and seed of a band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiSettings {
    pub h: f64,
    pub h0: f64,
    #[serde(rename = "B")]
    pub replications: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Domain end `M`; defaults to max T (current status) or 20 (incubation).
    #[serde(default)]
    pub upper: Option<f64>,
}

impl CiSettings {
    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !(self.h0 > 0.0) {
            return Err(Error::invalid("bandwidths must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("level alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if self.replications < 100 {
            return Err(Error::invalid(format!(
                "{} bootstrap replications; at least 100 are required",
                self.replications
            )));
        }
        Ok(())
    }
}

fn check_grid(grid: &[f64], upper: f64) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    if let Some(t) = grid.iter().find(|t| !(0.0..=upper).contains(*t)) {
        return Err(Error::invalid(format!("grid point {t} outside [0, {upper}]")));
    }
    Ok(())
}

/// Type-7 quantiles `(q_{alpha/2}, q_{1-alpha/2})` of each column of `samples`.
fn quantile_pair(mut values: Vec<f64>, alpha: f64) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    (quantile_sorted(&values, alpha / 2.0), quantile_sorted(&values, 1.0 - alpha / 2.0))
}

/// Parts shared by both band types.
struct Setup {
    source: Smoothable,
    smoother: Smoother,
    pilot: Smoother,
    estimate: Vec<f64>,
    center: Vec<f64>,
}

fn setup<M: SmoothedBootstrapModel>(model: &M, grid: &[f64], s: &CiSettings) -> Result<Setup> {
    let upper = model.upper();
    check_grid(grid, upper)?;
    let source = Smoothable::new(&model.mle()?, upper)?;
    let smoother = Smoother::new(s.h, upper)?;
    let pilot = Smoother::new(s.h0, upper)?;
    let estimate = grid.iter().map(|&t| smoother.value(&source, t)).collect();
    let center = grid.iter().map(|&t| smoother.centering(&pilot, &source, t)).collect();
    Ok(Setup {
        source,
        smoother,
        pilot,
        estimate,
        center,
    })
}

/// `n^2 S(t)` from per-time squared kernel weights and a fit on the distinct times.
fn studentizer(kernel_sq: &[(usize, f64)], counts: &[usize], events: &[usize], fit: &[f64]) -> f64 {
    kernel_sq
        .iter()
        .map(|&(g, w)| {
            let (c, e, v) = (counts[g] as f64, events[g] as f64, fit[g]);
            w * (e * (1.0 - v) * (1.0 - v) + (c - e) * v * v)
        })
        .sum()
}

/// Studentized smoothed-bootstrap band for current status data.
pub fn cs_ci_studentized(data: &CurrentStatusData, grid: &[f64], settings: &CiSettings) -> Result<ConfidenceBand> {
    studentized_band(data, grid, settings, true)
}

/// With `strict` unset, grid points where the variance estimate vanishes too
/// often get NaN bounds instead of failing the whole band.
fn studentized_band(
    data: &CurrentStatusData,
    grid: &[f64],
    settings: &CiSettings,
    strict: bool,
) -> Result<ConfidenceBand> {
    settings.validate()?;
    let model = CurrentStatusModel::new(data, settings.upper)?;
    let st = setup(&model, grid, settings)?;
    let design = model.design();
    let n2 = (design.n() as f64).powi(2);
    let kernel = KernelSpec::Triweight;
    let h = settings.h;
    // squared K_h(t - tau_g) for the distinct times tau_g near each grid point
    let kernel_sq: Vec<Vec<(usize, f64)>> = grid
        .iter()
        .map(|&t| {
            let times = design.times();
            let lo = times.partition_point(|&x| x <= t - h);
            let hi = times.partition_point(|&x| x < t + h);
            (lo..hi).map(|g| (g, (kernel.k((t - times[g]) / h) / h).powi(2))).collect()
        })
        .collect();
    let events = design.event_counts(data.deltas());
    let fit = design.fit_values(&events);
    let sd: Vec<f64> = kernel_sq
        .iter()
        .map(|ks| (studentizer(ks, design.counts(), &events, &fit) / n2).sqrt())
        .collect();

    let upper = model.upper();
    let pivots: Vec<Vec<f64>> = (0..settings.replications)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(settings.seed, b as u64, Purpose::Bootstrap);
            let delta = model.draw_indicators(&st.pilot, &st.source, &mut rng);
            let ev = design.event_counts(&delta);
            let values = design.fit_values(&ev);
            let f_star = StepDistribution::from_cdf_values(design.times().to_vec(), &values)?.compact();
            let f_star = Smoothable::new(&f_star, upper)?;
            Ok(grid
                .iter()
                .enumerate()
                .map(|(k, &t)| {
                    let s = studentizer(&kernel_sq[k], design.counts(), &ev, &values) / n2;
                    if s > 0.0 {
                        (st.smoother.value(&f_star, t) - st.center[k]) / s.sqrt()
                    } else {
                        f64::NAN
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut skipped = 0;
    let (mut lower, mut upper_band) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
    for k in 0..grid.len() {
        let w: Vec<f64> = pivots.iter().map(|p| p[k]).filter(|v| !v.is_nan()).collect();
        let dropped = settings.replications - w.len();
        if dropped as f64 > MAX_SKIPPED_FRACTION * settings.replications as f64 {
            if !strict {
                lower.push(f64::NAN);
                upper_band.push(f64::NAN);
                continue;
            }
            return Err(Error::Numerical(format!(
                "variance estimate vanished in {dropped} of {} replicates at t = {}",
                settings.replications, grid[k]
            )));
        }
        skipped += dropped;
        let (q_lo, q_hi) = quantile_pair(w, settings.alpha);
        lower.push((st.estimate[k] - q_hi * sd[k]).clamp(0.0, 1.0));
        upper_band.push((st.estimate[k] - q_lo * sd[k]).clamp(0.0, 1.0));
    }
    if skipped > 0 {
        log::warn!("{skipped} replicate evaluations skipped for a vanishing variance estimate");
    }
    Ok(ConfidenceBand {
        grid: grid.to_vec(),
        lower,
        estimate: st.estimate,
        upper: upper_band,
        alpha: settings.alpha,
        method: BandMethod::Studentized,
        replications: settings.replications,
        h: settings.h,
        h0: settings.h0,
        skipped,
    })
}

/// Percentile smoothed-bootstrap band for incubation data. Bootstrap onsets
/// are redrawn on the lattice `T_i + j E_i` with `E_i` and `T_i` fixed.
pub fn incubation_ci(data: &IncubationData, grid: &[f64], settings: &CiSettings) -> Result<ConfidenceBand> {
    settings.validate()?;
    let model = IncubationModel::new(data, settings.upper.unwrap_or(20.0))?;
    let st = setup(&model, grid, settings)?;
    let upper = model.upper();
    let deviations: Vec<Vec<f64>> = (0..settings.replications)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(settings.seed, b as u64, Purpose::Bootstrap);
            let f_star = Smoothable::new(&model.bootstrap_mle(&st.pilot, &st.source, &mut rng)?, upper)?;
            Ok(grid
                .iter()
                .enumerate()
                .map(|(k, &t)| st.smoother.value(&f_star, t) - st.center[k])
                .collect())
        })
        .collect::<Result<_>>()?;
    let (mut lower, mut upper_band) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
    for k in 0..grid.len() {
        let (p_lo, p_hi) = quantile_pair(deviations.iter().map(|d| d[k]).collect(), settings.alpha);
        lower.push((st.estimate[k] - p_hi).clamp(0.0, 1.0));
        upper_band.push((st.estimate[k] - p_lo).clamp(0.0, 1.0));
    }
    Ok(ConfidenceBand {
        grid: grid.to_vec(),
        lower,
        estimate: st.estimate,
        upper: upper_band,
        alpha: settings.alpha,
        method: BandMethod::Percentile,
        replications: settings.replications,
        h: settings.h,
        h0: settings.h0,
        skipped: 0,
    })
}

/// Band used in a coverage run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageMethod {
    Studentized,
    /// `[0, 1]` at every point; never misses.
    Full,
}

/// Repeated current status samples with a band for each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub truth: TruthSpec,
    pub obs_law: Law,
    pub n: usize,
    pub replications: usize,
    pub grid: Vec<f64>,
    /// Band bandwidth `h = c n^(-1/5)`.
    pub c: f64,
    /// Pilot bandwidth `h0 = c0 n^(-1/9)`.
    pub c0: f64,
    #[serde(rename = "B")]
    pub bootstrap: usize,
    pub alpha: f64,
    pub seed: u64,
    pub upper: f64,
    pub method: CoverageMethod,
}

impl CoverageConfig {
    pub fn h(&self) -> f64 {
        self.c * (self.n as f64).powf(-0.2)
    }

    pub fn h0(&self) -> f64 {
        self.c0 * (self.n as f64).powf(-1.0 / 9.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageTable {
    pub grid: Vec<f64>,
    /// Misses over replications with a defined band; NaN if there are none.
    pub noncoverage: Vec<f64>,
    /// Replications whose band is undefined at the point because the
    /// variance estimate vanished in too many bootstrap samples.
    pub undefined: Vec<usize>,
}

impl CoverageTable {
    /// Columns `t,noncoverage`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        io::write_rows(
            w,
            &["t", "noncoverage"],
            self.grid.iter().zip(&self.noncoverage).map(|(t, v)| vec![*t, *v]),
        )
    }
}

/// Proportion of replications whose band misses the true CDF, per grid point.
/// Points where a band cannot be formed (typically next to the domain ends)
/// are left out of that replication's count rather than failing the run.
pub fn coverage_experiment(config: &CoverageConfig) -> Result<CoverageTable> {
    if config.n == 0 || config.replications == 0 {
        return Err(Error::invalid("sample size and replications must be positive"));
    }
    let settings = |r: usize| CiSettings {
        h: config.h(),
        h0: config.h0(),
        replications: config.bootstrap,
        alpha: config.alpha,
        seed: child_seed(config.seed, 2 * r as u64 + 1),
        upper: Some(config.upper),
    };
    // per point: Some(missed) or None when undefined
    let misses: Vec<Vec<Option<bool>>> = (0..config.replications)
        .into_par_iter()
        .map(|r| -> Result<Vec<Option<bool>>> {
            let data = gen_current_status(
                config.n,
                &config.truth,
                &config.obs_law,
                child_seed(config.seed, 2 * r as u64),
            )?;
            match config.method {
                CoverageMethod::Full => Ok(vec![Some(false); config.grid.len()]),
                CoverageMethod::Studentized => {
                    let band = studentized_band(&data, &config.grid, &settings(r), false)?;
                    Ok((0..config.grid.len())
                        .map(|k| {
                            (!band.lower[k].is_nan()).then(|| !band.covers(k, config.truth.cdf(config.grid[k])))
                        })
                        .collect())
                }
            }
        })
        .collect::<Result<_>>()?;
    let mut noncoverage = Vec::with_capacity(config.grid.len());
    let mut undefined = Vec::with_capacity(config.grid.len());
    for k in 0..config.grid.len() {
        let defined = misses.iter().filter(|m| m[k].is_some()).count();
        let missed = misses.iter().filter(|m| m[k] == Some(true)).count();
        noncoverage.push(if defined == 0 { f64::NAN } else { missed as f64 / defined as f64 });
        undefined.push(config.replications - defined);
    }
    if undefined.iter().any(|&u| u > 0) {
        log::warn!("bands undefined at some grid points; see the undefined counts");
    }
    Ok(CoverageTable {
        grid: config.grid.clone(),
        noncoverage,
        undefined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cs_sample(n: usize, seed: u64) -> CurrentStatusData {
        gen_current_status(
            n,
            &TruthSpec::truncated_exponential(),
            &Law::Uniform { lower: 0.0, upper: 2.0 },
            seed,
        )
        .unwrap()
    }

    fn settings(b: usize, alpha: f64) -> CiSettings {
        CiSettings {
            h: 0.6,
            h0: 0.8,
            replications: b,
            alpha,
            seed: 11,
            upper: Some(2.0),
        }
    }

    fn grid() -> Vec<f64> {
        (1..20).map(|i| i as f64 * 0.1).collect()
    }

    #[test]
    fn preconditions() {
        let d = cs_sample(50, 1);
        assert!(cs_ci_studentized(&d, &grid(), &settings(200, 1.0)).is_err());
        assert!(cs_ci_studentized(&d, &grid(), &settings(200, 0.0)).is_err());
        assert!(cs_ci_studentized(&d, &grid(), &settings(99, 0.05)).is_err());
        assert!(cs_ci_studentized(&d, &[2.5], &settings(200, 0.05)).is_err());
    }

    #[test]
    fn band_is_deterministic_and_ordered() {
        let d = cs_sample(200, 2);
        let a = cs_ci_studentized(&d, &grid(), &settings(150, 0.05)).unwrap();
        let b = cs_ci_studentized(&d, &grid(), &settings(150, 0.05)).unwrap();
        assert_eq!(a, b);
        for k in 0..a.grid.len() {
            assert!(a.lower[k] <= a.upper[k]);
            assert!((0.0..=1.0).contains(&a.lower[k]) && (0.0..=1.0).contains(&a.upper[k]));
            let t = a.grid[k];
            if t > a.h && t < 2.0 - a.h {
                assert!(a.lower[k] <= a.estimate[k] && a.estimate[k] <= a.upper[k], "t = {t}");
            }
        }
    }

    #[test]
    fn larger_alpha_never_widens() {
        let d = cs_sample(200, 3);
        let wide = cs_ci_studentized(&d, &grid(), &settings(150, 0.05)).unwrap();
        let narrow = cs_ci_studentized(&d, &grid(), &settings(150, 0.5)).unwrap();
        for k in 0..wide.grid.len() {
            assert!(narrow.lower[k] >= wide.lower[k] && narrow.upper[k] <= wide.upper[k]);
        }
    }

    #[test]
    fn band_csv_header() {
        let d = cs_sample(60, 4);
        let band = cs_ci_studentized(&d, &[0.5, 1.0], &settings(100, 0.1)).unwrap();
        let mut out = Vec::new();
        band.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("t,lower,estimate,upper\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn percentile_band_of_constant_deviations_has_zero_width() {
        let (lo, hi) = quantile_pair(vec![0.25; 40], 0.05);
        assert_eq!((lo, hi), (0.25, 0.25));
    }

    #[test]
    fn incubation_band_is_ordered() {
        let d = crate::sim::gen_incubation(
            120,
            &TruthSpec::incubation_weibull(),
            &Law::Uniform { lower: 1.0, upper: 30.0 },
            5,
        )
        .unwrap();
        let s = CiSettings {
            h: 4.0,
            h0: 6.0,
            replications: 100,
            alpha: 0.05,
            seed: 3,
            upper: Some(20.0),
        };
        let g: Vec<f64> = (1..20).map(|i| i as f64).collect();
        let band = incubation_ci(&d, &g, &s).unwrap();
        assert_eq!(band.method, BandMethod::Percentile);
        for k in 0..g.len() {
            assert!(band.lower[k] <= band.upper[k]);
        }
        assert_eq!(band, incubation_ci(&d, &g, &s).unwrap());
    }

    fn coverage_config(replications: usize, method: CoverageMethod) -> CoverageConfig {
        CoverageConfig {
            truth: TruthSpec::truncated_exponential(),
            obs_law: Law::Uniform { lower: 0.0, upper: 2.0 },
            n: 100,
            replications,
            grid: vec![0.5, 1.0, 1.5],
            c: 1.5,
            c0: 2.0,
            bootstrap: 100,
            alpha: 0.05,
            seed: 8,
            upper: 2.0,
            method,
        }
    }

    #[test]
    fn single_replication_coverage_is_binary() {
        let t = coverage_experiment(&coverage_config(1, CoverageMethod::Studentized)).unwrap();
        assert!(t.noncoverage.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn boundary_points_are_undefined_not_fatal() {
        let mut cfg = coverage_config(3, CoverageMethod::Studentized);
        cfg.grid = vec![1.0, 1.99];
        let strict = cs_ci_studentized(&cs_sample(100, 1), &cfg.grid, &settings(100, 0.05));
        let t = coverage_experiment(&cfg).unwrap();
        assert_eq!(t.undefined[0], 0);
        if strict.is_err() {
            assert!(t.undefined.iter().sum::<usize>() > 0);
        }
        assert!(t.noncoverage.iter().all(|v| v.is_nan() || (0.0..=1.0).contains(v)));
    }

    #[test]
    fn full_band_never_misses() {
        let t = coverage_experiment(&coverage_config(5, CoverageMethod::Full)).unwrap();
        assert!(t.noncoverage.iter().all(|&v| v == 0.0));
    }
}
