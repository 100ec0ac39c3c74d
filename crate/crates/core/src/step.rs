//! Discrete (sub-)distribution functions with right-continuous evaluation.

use crate::error::{Error, Result};

/// Jump locations with nonnegative masses; total mass at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    points: Vec<f64>,
    masses: Vec<f64>,
    cumulative: Vec<f64>,
}

impl StepDistribution {
    pub fn new(points: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if points.len() != masses.len() {
            return Err(Error::invalid("points and masses differ in length"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite support point"));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("support points must be strictly increasing"));
        }
        if let Some(m) = masses.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
            return Err(Error::invalid(format!("invalid mass {m}")));
        }
        let mut acc = 0.0;
        let cumulative: Vec<f64> = masses
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect();
        if acc > 1.0 + 1e-12 {
            return Err(Error::invalid(format!("total mass {acc} exceeds one")));
        }
        Ok(Self {
            points,
            masses,
            cumulative,
        })
    }

    /// Builds from CDF values at sorted points; negative increments are rejected.
    pub fn from_cdf_values(points: Vec<f64>, values: &[f64]) -> Result<Self> {
        let mut prev = 0.0;
        let mut masses = Vec::with_capacity(values.len());
        for &v in values {
            let d = v - prev;
            if d < -1e-12 {
                return Err(Error::invalid("cdf values decrease"));
            }
            masses.push(d.max(0.0));
            prev = v;
        }
        Self::new(points, masses)
    }

    /// Keeps only atoms with strictly positive mass.
    pub fn compact(&self) -> Self {
        let (points, masses): (Vec<f64>, Vec<f64>) = self
            .points
            .iter()
            .zip(&self.masses)
            .filter(|(_, m)| **m > 0.0)
            .map(|(p, m)| (*p, *m))
            .unzip();
        Self::new(points, masses).expect("subset of a valid distribution")
    }

    /// Moves all mass above `upper` onto `upper`.
    pub fn clip_above(&self, upper: f64) -> Self {
        let k = self.points.partition_point(|&p| p < upper);
        if k == self.points.len() {
            return self.clone();
        }
        let mut points = self.points[..k].to_vec();
        let mut masses = self.masses[..k].to_vec();
        points.push(upper);
        masses.push(self.masses[k..].iter().sum());
        Self::new(points, masses).expect("mass is preserved")
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// CDF value at each support point.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn total_mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Right-continuous CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.points.partition_point(|&p| p <= x);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    /// Left limit `F(x-)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let k = self.points.partition_point(|&p| p < x);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    /// `sum_j g(x_j) m_j`.
    pub fn integrate(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.masses)
            .filter(|(_, m)| **m > 0.0)
            .map(|(&x, &m)| g(x) * m)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_is_right_continuous() {
        let f = StepDistribution::new(vec![1.0, 2.0], vec![0.25, 0.5]).unwrap();
        assert_eq!(f.cdf(0.5), 0.0);
        assert_eq!(f.cdf(1.0), 0.25);
        assert_eq!(f.cdf_left(1.0), 0.0);
        assert_eq!(f.cdf(1.5), 0.25);
        assert_eq!(f.cdf(2.0), 0.75);
        assert_eq!(f.cdf(100.0), 0.75);
        assert_eq!(f.total_mass(), 0.75);
    }

    #[test]
    fn rejects_invalid() {
        assert!(StepDistribution::new(vec![1.0], vec![-0.1]).is_err());
        assert!(StepDistribution::new(vec![1.0, 1.0], vec![0.1, 0.1]).is_err());
        assert!(StepDistribution::new(vec![1.0, 2.0], vec![0.6, 0.6]).is_err());
        assert!(StepDistribution::from_cdf_values(vec![1.0, 2.0], &[0.5, 0.4]).is_err());
    }

    #[test]
    fn compact_drops_zero_masses() {
        let f = StepDistribution::from_cdf_values(vec![1.0, 2.0, 3.0], &[0.0, 0.5, 1.0]).unwrap();
        let c = f.compact();
        assert_eq!(c.points(), &[2.0, 3.0]);
        assert_eq!(c.cdf(2.5), f.cdf(2.5));
    }

    #[test]
    fn clip_moves_tail_mass() {
        let f = StepDistribution::new(vec![1.0, 3.0, 4.0], vec![0.2, 0.3, 0.5]).unwrap();
        let c = f.clip_above(2.0);
        assert_eq!(c.points(), &[1.0, 2.0]);
        assert_eq!(c.masses(), &[0.2, 0.8]);
        assert_eq!(f.clip_above(4.0), f.clip_above(4.0).clip_above(5.0));
        assert_eq!(f.clip_above(5.0), f);
    }
}
