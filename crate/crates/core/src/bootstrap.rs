//! Smoothed bootstrap: new samples are drawn from a smoothed estimate of the
//! distribution while the design (observation times, exposure windows) stays fixed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::current_status::{CsDesign, CurrentStatusData};
use crate::error::{Error, Result};
use crate::incubation::{inc_mle_report, reduce_to_interval_censoring, IcmOptions, IncubationData};
use crate::smle::{Smoothable, Smoother};
use crate::step::StepDistribution;

/// A model whose data can be regenerated from a smoothed CDF.
pub trait SmoothedBootstrapModel: Sync {
    fn sample_size(&self) -> usize;

    /// Right end `M` of the smoothing domain.
    fn upper(&self) -> f64;

    /// MLE of the original sample, supported in `[0, M]`.
    fn mle(&self) -> Result<StepDistribution>;

    /// Draws one bootstrap sample from the CDF `pilot` applied to `source`
    /// and returns its MLE, supported in `[0, M]`.
    fn bootstrap_mle(&self, pilot: &Smoother, source: &Smoothable, rng: &mut ChaCha8Rng) -> Result<StepDistribution>;
}

/// Current status data with the observation times held fixed.
#[derive(Debug, Clone)]
pub struct CurrentStatusModel {
    data: CurrentStatusData,
    design: CsDesign,
    upper: f64,
}

impl CurrentStatusModel {
    /// `upper` defaults to the largest observation time.
    pub fn new(data: &CurrentStatusData, upper: Option<f64>) -> Result<Self> {
        let design = CsDesign::new(data.times())?;
        let t_max = *design.times().last().unwrap();
        let upper = upper.unwrap_or(t_max);
        if t_max > upper {
            return Err(Error::invalid(format!(
                "observation time {t_max} beyond the domain end {upper}"
            )));
        }
        Ok(Self {
            data: data.clone(),
            design,
            upper,
        })
    }

    pub fn data(&self) -> &CurrentStatusData {
        &self.data
    }

    pub fn design(&self) -> &CsDesign {
        &self.design
    }

    /// Bootstrap indicators `delta*_i ~ Bernoulli(pilot(T_i))`.
    pub fn draw_indicators(&self, pilot: &Smoother, source: &Smoothable, rng: &mut ChaCha8Rng) -> Vec<bool> {
        let p: Vec<f64> = self.design.times().iter().map(|&t| pilot.value(source, t)).collect();
        self.design
            .group()
            .iter()
            .map(|&g| rng.random::<f64>() < p[g])
            .collect()
    }
}

impl SmoothedBootstrapModel for CurrentStatusModel {
    fn sample_size(&self) -> usize {
        self.data.len()
    }

    fn upper(&self) -> f64 {
        self.upper
    }

    fn mle(&self) -> Result<StepDistribution> {
        Ok(self.design.fit(&self.design.event_counts(self.data.deltas())))
    }

    fn bootstrap_mle(&self, pilot: &Smoother, source: &Smoothable, rng: &mut ChaCha8Rng) -> Result<StepDistribution> {
        let delta = self.draw_indicators(pilot, source, rng);
        Ok(self.design.fit(&self.design.event_counts(&delta)))
    }
}

/// Incubation data with the exposures `E_i` and reduced times `T_i` held fixed.
#[derive(Debug, Clone)]
pub struct IncubationModel {
    data: IncubationData,
    t: Vec<f64>,
    upper: f64,
    options: IcmOptions,
}

impl IncubationModel {
    pub fn new(data: &IncubationData, upper: f64) -> Result<Self> {
        if !(upper > 0.0) || !upper.is_finite() {
            return Err(Error::invalid(format!("domain end {upper} must be positive")));
        }
        let view = reduce_to_interval_censoring(data)?;
        Ok(Self {
            data: data.clone(),
            t: view.t,
            upper,
            options: IcmOptions::default(),
        })
    }

    pub fn with_options(mut self, options: IcmOptions) -> Self {
        self.options = options;
        self
    }

    pub fn data(&self) -> &IncubationData {
        &self.data
    }

    /// Onsets `S*_i = T_i + j E_i` with cell `j` drawn with probability
    /// `pilot(T_i + j E_i) - pilot(T_i + (j - 1) E_i)`.
    pub fn draw(&self, pilot: &Smoother, source: &Smoothable, rng: &mut ChaCha8Rng) -> Result<IncubationData> {
        let e = self.data.exposures();
        let mut s = Vec::with_capacity(e.len());
        for (&ti, &ei) in self.t.iter().zip(e) {
            let u: f64 = rng.random();
            let mut j = 0usize;
            loop {
                let b = ti + j as f64 * ei;
                // the pilot equals one from the domain end on, so this terminates
                if u < pilot.value(source, b) {
                    s.push(b);
                    break;
                }
                j += 1;
            }
        }
        IncubationData::new(e.to_vec(), s)
    }

    fn fit(&self, data: &IncubationData) -> Result<StepDistribution> {
        let report = inc_mle_report(data, None, self.options)?;
        Ok(report.estimate.clip_above(self.upper))
    }
}

impl SmoothedBootstrapModel for IncubationModel {
    fn sample_size(&self) -> usize {
        self.data.len()
    }

    fn upper(&self) -> f64 {
        self.upper
    }

    fn mle(&self) -> Result<StepDistribution> {
        self.fit(&self.data)
    }

    fn bootstrap_mle(&self, pilot: &Smoother, source: &Smoothable, rng: &mut ChaCha8Rng) -> Result<StepDistribution> {
        self.fit(&self.draw(pilot, source, rng)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn indicators_follow_the_pilot() {
        let n = 4000;
        let t: Vec<f64> = (0..n).map(|i| 2.0 * (i as f64 + 0.5) / n as f64).collect();
        let data = CurrentStatusData::new(t.clone(), vec![true; n]).unwrap();
        let model = CurrentStatusModel::new(&data, Some(2.0)).unwrap();
        // pilot built from a uniform step distribution approximates F(t) = t / 2
        let atoms: Vec<f64> = (0..400).map(|i| 2.0 * (i as f64 + 0.5) / 400.0).collect();
        let f = StepDistribution::new(atoms, vec![1.0 / 400.0; 400]).unwrap();
        let source = Smoothable::new(&f, 2.0).unwrap();
        let pilot = Smoother::new(0.2, 2.0).unwrap();
        let mut rng = stream(1, 0, Purpose::Bootstrap);
        let d = model.draw_indicators(&pilot, &source, &mut rng);
        let expected: f64 = t.iter().map(|&x| pilot.value(&source, x)).sum();
        let got = d.iter().filter(|&&v| v).count() as f64;
        let sd = (n as f64 * 0.25).sqrt();
        assert!((got - expected).abs() < 4.0 * sd, "{got} vs {expected}");
    }

    #[test]
    fn incubation_draws_stay_on_the_lattice() {
        let data = IncubationData::from_records(&[(2.0, 3.5), (5.0, 1.0), (1.5, 7.2)]).unwrap();
        let model = IncubationModel::new(&data, 10.0).unwrap();
        let f = StepDistribution::new(vec![2.0, 6.0], vec![0.5, 0.5]).unwrap();
        let source = Smoothable::new(&f, 10.0).unwrap();
        let pilot = Smoother::new(1.0, 10.0).unwrap();
        let view = reduce_to_interval_censoring(&data).unwrap();
        let mut rng = stream(2, 0, Purpose::Bootstrap);
        for _ in 0..50 {
            let b = model.draw(&pilot, &source, &mut rng).unwrap();
            assert_eq!(b.exposures(), data.exposures());
            for (i, &s) in b.onsets().iter().enumerate() {
                let j = ((s - view.t[i]) / view.e[i]).round();
                assert!((view.t[i] + j * view.e[i] - s).abs() < 1e-12);
                assert!(s > 0.0 && s <= 10.0 + view.e[i]);
            }
        }
    }
}
