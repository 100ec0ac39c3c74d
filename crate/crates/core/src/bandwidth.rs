//! Bandwidth selection for the SMLE by the smoothed bootstrap.
//!
//! Bootstrap samples are drawn from the SMLE with an undersmoothed pilot
//! bandwidth `h0 = c0 n^(-1/9)`; each candidate `h = c n^(-1/5)` is scored by
//! the mean squared distance between the bootstrap SMLEs and the pilot SMLE,
//! either per target point (local) or summed over a grid (global).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{CurrentStatusModel, IncubationModel, SmoothedBootstrapModel};
use crate::current_status::CurrentStatusData;
use crate::error::{Error, Result};
use crate::incubation::IncubationData;
use crate::rng::{stream, Purpose};
use crate::smle::{Smoothable, Smoother};
use crate::step::StepDistribution;

/// Default candidate constants `0.5, 0.75, ..., 4.0`.
pub fn default_c_grid() -> Vec<f64> {
    (0..15).map(|i| 0.5 + 0.25 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPlan {
    /// Pilot constant: `h0 = c0 n^(-1/9)`.
    pub c0: f64,
    /// Candidate constants: `h = c n^(-1/5)`.
    pub c_grid: Vec<f64>,
    /// Bootstrap replications.
    #[serde(rename = "B")]
    pub replications: usize,
    pub seed: u64,
    pub targets: Vec<f64>,
    /// Right end of the smoothing domain; model-specific default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

impl BandwidthPlan {
    /// Pilot constant 2 and the default candidate grid.
    pub fn current_status(targets: Vec<f64>, replications: usize, seed: u64) -> Self {
        Self {
            c0: 2.0,
            c_grid: default_c_grid(),
            replications,
            seed,
            targets,
            upper: None,
        }
    }

    /// Pilot constant 10 and the default candidate grid scaled by 10,
    /// for incubation times measured in days.
    pub fn incubation(targets: Vec<f64>, replications: usize, seed: u64) -> Self {
        Self {
            c0: 10.0,
            c_grid: default_c_grid().into_iter().map(|c| 10.0 * c).collect(),
            replications,
            seed,
            targets,
            upper: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0) || !self.c0.is_finite() {
            return Err(Error::invalid(format!("pilot constant {} must be positive", self.c0)));
        }
        if self.c_grid.is_empty() {
            return Err(Error::invalid("empty candidate grid"));
        }
        if let Some(c) = self.c_grid.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
            return Err(Error::invalid(format!("candidate constant {c} must be positive")));
        }
        if self.replications == 0 {
            return Err(Error::invalid("at least one bootstrap replication is required"));
        }
        if self.targets.is_empty() {
            return Err(Error::invalid("no target points"));
        }
        Ok(())
    }

    pub fn pilot(&self, n: usize) -> f64 {
        self.c0 * (n as f64).powf(-1.0 / 9.0)
    }

    pub fn candidates(&self, n: usize) -> Vec<f64> {
        let scale = (n as f64).powf(-0.2);
        self.c_grid.iter().map(|c| c * scale).collect()
    }
}

/// Monte Carlo criterion for every candidate and target.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapCriterion {
    pub candidates: Vec<f64>,
    pub pilot: f64,
    pub targets: Vec<f64>,
    /// `values[c][k]`: mean squared deviation at target `k` for candidate `c`.
    pub values: Vec<Vec<f64>>,
}

impl BootstrapCriterion {
    /// Criterion summed over the targets, per candidate.
    pub fn global(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.iter().sum()).collect()
    }

    pub fn select_global(&self) -> f64 {
        self.candidates[argmin(&self.global())]
    }

    pub fn select_local(&self, k: usize) -> f64 {
        let col: Vec<f64> = self.values.iter().map(|v| v[k]).collect();
        self.candidates[argmin(&col)]
    }

    pub fn local_curve(&self) -> Vec<f64> {
        (0..self.targets.len()).map(|k| self.select_local(k)).collect()
    }
}

/// First index of the smallest value.
fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// Evaluates the bootstrap criterion for `model` under `plan`.
pub fn bootstrap_criterion<M: SmoothedBootstrapModel>(model: &M, plan: &BandwidthPlan) -> Result<BootstrapCriterion> {
    plan.validate()?;
    let upper = model.upper();
    if let Some(t) = plan.targets.iter().find(|t| !(**t > 0.0 && **t < upper)) {
        return Err(Error::invalid(format!("target {t} not inside (0, {upper})")));
    }
    let n = model.sample_size();
    let h0 = plan.pilot(n);
    let candidates = plan.candidates(n);
    let source = Smoothable::new(&model.mle()?, upper)?;
    let pilot = Smoother::new(h0, upper)?;
    let reference: Vec<f64> = plan.targets.iter().map(|&t| pilot.value(&source, t)).collect();
    let smoothers = candidates
        .iter()
        .map(|&h| Smoother::new(h, upper))
        .collect::<Result<Vec<_>>>()?;
    let per_replicate: Vec<Vec<f64>> = (0..plan.replications)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(plan.seed, b as u64, Purpose::BandwidthBootstrap);
            let fit = Smoothable::new(&model.bootstrap_mle(&pilot, &source, &mut rng)?, upper)?;
            let mut out = Vec::with_capacity(smoothers.len() * reference.len());
            for s in &smoothers {
                for (&t, &r) in plan.targets.iter().zip(&reference) {
                    let d = s.value(&fit, t) - r;
                    out.push(d * d);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let m = reference.len();
    let mut values = vec![vec![0.0; m]; candidates.len()];
    for rep in &per_replicate {
        for (c, row) in values.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v += rep[c * m + k];
            }
        }
    }
    let b = plan.replications as f64;
    values.iter_mut().flatten().for_each(|v| *v /= b);
    Ok(BootstrapCriterion {
        candidates,
        pilot: h0,
        targets: plan.targets.clone(),
        values,
    })
}

/// Locally optimal bandwidth at `t`; the plan's targets are ignored.
pub fn select_bandwidth_local(data: &CurrentStatusData, t: f64, plan: &BandwidthPlan) -> Result<f64> {
    let plan = BandwidthPlan {
        targets: vec![t],
        ..plan.clone()
    };
    let model = CurrentStatusModel::new(data, plan.upper)?;
    Ok(bootstrap_criterion(&model, &plan)?.select_local(0))
}

/// Locally optimal bandwidths at each of the plan's targets.
pub fn local_bandwidth_curve(data: &CurrentStatusData, plan: &BandwidthPlan) -> Result<Vec<f64>> {
    let model = CurrentStatusModel::new(data, plan.upper)?;
    Ok(bootstrap_criterion(&model, plan)?.local_curve())
}

/// Bandwidth minimizing the criterion summed over `grid`; the plan's targets are ignored.
pub fn select_bandwidth_global(data: &CurrentStatusData, grid: &[f64], plan: &BandwidthPlan) -> Result<f64> {
    let plan = BandwidthPlan {
        targets: grid.to_vec(),
        ..plan.clone()
    };
    let model = CurrentStatusModel::new(data, plan.upper)?;
    Ok(bootstrap_criterion(&model, &plan)?.select_global())
}

/// Global bandwidth for incubation data; the domain end defaults to 20.
pub fn select_incubation_bandwidth(data: &IncubationData, grid: &[f64], plan: &BandwidthPlan) -> Result<f64> {
    let plan = BandwidthPlan {
        targets: grid.to_vec(),
        ..plan.clone()
    };
    let model = IncubationModel::new(data, plan.upper.unwrap_or(20.0))?;
    Ok(bootstrap_criterion(&model, &plan)?.select_global())
}

/// Second derivative at `t` of the SMLE with bandwidth `h0`, an estimate of
/// the derivative of the density. `t` must be at least `h0` from both ends.
pub fn pilot_second_derivative(f_hat: &StepDistribution, h0: f64, t: f64, upper: f64) -> Result<f64> {
    let s = Smoother::new(h0, upper)?;
    if t < h0 || t > upper - h0 {
        return Err(Error::invalid(format!(
            "point {t} closer than {h0} to the boundary of [0, {upper}]"
        )));
    }
    let f = Smoothable::new(f_hat, upper)?;
    Ok(f
        .atoms()
        .iter()
        .zip(f.masses())
        .map(|(&x, &m)| m * s.kernel.dk((t - x) / h0))
        .sum::<f64>()
        / (h0 * h0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::quad::adaptive_on_breaks;
    use crate::sim::{gen_current_status, Law, TruthSpec};

    fn sample(n: usize, seed: u64) -> CurrentStatusData {
        gen_current_status(
            n,
            &TruthSpec::truncated_exponential(),
            &Law::Uniform { lower: 0.0, upper: 2.0 },
            seed,
        )
        .unwrap()
    }

    fn plan(b: usize) -> BandwidthPlan {
        BandwidthPlan {
            upper: Some(2.0),
            ..BandwidthPlan::current_status(vec![0.5, 1.0, 1.5], b, 7)
        }
    }

    #[test]
    fn scaling_exponents() {
        let p = plan(1);
        for n in [500usize, 5000] {
            assert!((p.pilot(n) - 2.0 * (n as f64).powf(-1.0 / 9.0)).abs() < 1e-15);
            for (h, c) in p.candidates(n).iter().zip(&p.c_grid) {
                assert!((h - c * (n as f64).powf(-0.2)).abs() < 1e-15);
            }
        }
        let ratio = p.pilot(5000) / p.pilot(500);
        assert!((ratio.ln() / 10f64.ln() + 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn plan_json_round_trip() {
        let json = r#"{"c0": 2, "c_grid": [1, 1.5], "B": 50, "seed": 3, "targets": [0.5]}"#;
        let p: BandwidthPlan = serde_json::from_str(json).unwrap();
        assert_eq!(p.replications, 50);
        assert_eq!(p.upper, None);
        let back: BandwidthPlan = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn invalid_plans_are_rejected() {
        let d = sample(50, 1);
        let mut p = plan(10);
        p.c_grid.clear();
        assert!(select_bandwidth_global(&d, &[1.0], &p).is_err());
        let mut p = plan(0);
        p.replications = 0;
        assert!(select_bandwidth_local(&d, 1.0, &p).is_err());
        assert!(select_bandwidth_local(&d, 2.5, &plan(10)).is_err());
    }

    #[test]
    fn singleton_grid_returns_the_candidate() {
        let d = sample(100, 2);
        let p = BandwidthPlan {
            c_grid: vec![1.7],
            ..plan(5)
        };
        let h = select_bandwidth_local(&d, 1.0, &p).unwrap();
        assert_eq!(h, 1.7 * 100f64.powf(-0.2));
    }

    #[test]
    fn one_point_global_equals_local() {
        let d = sample(200, 3);
        let p = plan(30);
        assert_eq!(
            select_bandwidth_global(&d, &[0.8], &p).unwrap(),
            select_bandwidth_local(&d, 0.8, &p).unwrap()
        );
    }

    /// Criterion rebuilt from scratch: own indicator draws, own MLE, own smoothing sums.
    fn direct_criterion(d: &CurrentStatusData, p: &BandwidthPlan) -> Vec<Vec<f64>> {
        use rand::Rng;
        let n = d.len();
        let upper = 2.0;
        let smooth = |f: &StepDistribution, h: f64, t: f64| {
            let mut atoms: Vec<(f64, f64)> = f.points().iter().copied().zip(f.masses().iter().copied()).collect();
            let deficit = 1.0 - f.total_mass();
            if deficit > 0.0 {
                atoms.push((upper, deficit));
            }
            let ik = |u: f64| KernelSpec::Triweight.ik(u);
            let v: f64 = atoms
                .iter()
                .map(|&(x, m)| {
                    m * (ik((t - x) / h) - ik((-t - x) / h) + ik((2.0 * upper - x) / h)
                        - ik((2.0 * upper - t - x) / h))
                })
                .sum();
            v.clamp(0.0, 1.0)
        };
        let f_hat = crate::current_status::cs_mle(d).unwrap();
        let h0 = p.c0 * (n as f64).powf(-1.0 / 9.0);
        let reference: Vec<f64> = p.targets.iter().map(|&t| smooth(&f_hat, h0, t)).collect();
        // distinct times in sorted order, as the bootstrap draws them
        let mut times = d.times().to_vec();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let probs: Vec<f64> = times.iter().map(|&t| smooth(&f_hat, h0, t)).collect();
        let mut out = vec![vec![0.0; p.targets.len()]; p.c_grid.len()];
        for b in 0..p.replications {
            let mut rng = stream(p.seed, b as u64, Purpose::BandwidthBootstrap);
            let delta: Vec<bool> = d
                .times()
                .iter()
                .map(|t| {
                    let g = times.partition_point(|x| x < t);
                    rng.random::<f64>() < probs[g]
                })
                .collect();
            let boot = CurrentStatusData::new(d.times().to_vec(), delta).unwrap();
            let f_star = crate::current_status::cs_mle(&boot).unwrap();
            for (c, row) in p.c_grid.iter().zip(out.iter_mut()) {
                let h = c * (n as f64).powf(-0.2);
                for (k, &t) in p.targets.iter().enumerate() {
                    row[k] += (smooth(&f_star, h, t) - reference[k]).powi(2) / p.replications as f64;
                }
            }
        }
        out
    }

    #[test]
    fn criterion_matches_direct_recomputation() {
        let d = sample(60, 4);
        let p = plan(20);
        let model = CurrentStatusModel::new(&d, Some(2.0)).unwrap();
        let crit = bootstrap_criterion(&model, &p).unwrap();
        let direct = direct_criterion(&d, &p);
        for (a, b) in crit.values.iter().flatten().zip(direct.iter().flatten()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let sums: Vec<f64> = direct.iter().map(|r| r.iter().sum()).collect();
        let best = (0..sums.len()).fold(0, |b, i| if sums[i] < sums[b] { i } else { b });
        assert_eq!(crit.select_global(), crit.candidates[best]);
        assert!(crit.values.iter().flatten().all(|&v| v > 0.0));
    }

    #[test]
    fn selection_is_deterministic() {
        let d = sample(150, 5);
        let p = plan(15);
        let a = local_bandwidth_curve(&d, &p).unwrap();
        let b = local_bandwidth_curve(&d, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn second_derivative_of_uniform_is_flat() {
        let m = 2000;
        let atoms: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
        let f = StepDistribution::new(atoms, vec![1.0 / m as f64; m]).unwrap();
        for t in [0.3, 0.5, 0.7] {
            assert!(pilot_second_derivative(&f, 0.2, t, 1.0).unwrap().abs() < 1e-6);
        }
        assert!(pilot_second_derivative(&f, 0.2, 0.1, 1.0).is_err());
    }

    #[test]
    fn second_derivative_matches_quadrature() {
        // h0^-3 int K''((t - y)/h0) F(y) dy
        let f = StepDistribution::new(vec![0.3, 0.45, 0.8, 1.1, 1.3], vec![0.1, 0.25, 0.2, 0.15, 0.2]).unwrap();
        let (h0, t) = (0.4, 0.9);
        let k = KernelSpec::Triweight;
        let g = |y: f64| k.d2k((t - y) / h0) * f.cdf(y) / h0.powi(3);
        let mut breaks = vec![t - h0, t + h0];
        breaks.extend(f.points().iter().copied().filter(|&x| (x - t).abs() < h0));
        breaks.sort_by(f64::total_cmp);
        let oracle = adaptive_on_breaks(&g, &breaks, 1e-13).unwrap();
        let got = pilot_second_derivative(&f, h0, t, 2.0).unwrap();
        assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    }
}
