//! Current status data: one inspection time per subject and whether the event
//! had happened by then. The MLE is the left derivative of the greatest convex
//! minorant of the cusum diagram of the indicators sorted by time.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::gcm::{gcm_slopes, CusumDiagram};
use crate::io;
use crate::step::StepDistribution;

#[derive(Debug, Clone, PartialEq)]
pub struct CurrentStatusData {
    t: Vec<f64>,
    delta: Vec<bool>,
}

impl CurrentStatusData {
    pub fn new(t: Vec<f64>, delta: Vec<bool>) -> Result<Self> {
        if t.len() != delta.len() {
            return Err(Error::invalid("times and indicators differ in length"));
        }
        if let Some((i, v)) = t.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid(format!("observation time t[{i}] = {v} must be finite and positive")));
        }
        Ok(Self { t, delta })
    }

    pub fn from_records(records: &[(f64, bool)]) -> Result<Self> {
        Self::new(records.iter().map(|r| r.0).collect(), records.iter().map(|r| r.1).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn deltas(&self) -> &[bool] {
        &self.delta
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Reads `t,delta` CSV; `delta` must be 0 or 1.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let rows = io::read_fields(reader, &["t", "delta"])?;
        let mut t = Vec::with_capacity(rows.len());
        let mut delta = Vec::with_capacity(rows.len());
        for (row, f) in rows {
            let ti = io::parse_finite(&f[0], "t", row)?;
            if ti <= 0.0 {
                return Err(Error::Data {
                    row,
                    msg: format!("column `t`: time must be positive, got {ti}"),
                });
            }
            let d = match f[1].as_str() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Data {
                        row,
                        msg: format!("column `delta`: expected 0 or 1, got `{other}`"),
                    })
                }
            };
            t.push(ti);
            delta.push(d);
        }
        Self::new(t, delta)
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        Self::read_csv(io::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,delta")?;
        for (t, d) in self.t.iter().zip(&self.delta) {
            writeln!(w, "{},{}", io::fmt_f64(*t), u8::from(*d))?;
        }
        Ok(())
    }
}

/// Sorted distinct observation times with multiplicities; reused across
/// bootstrap replicates that only redraw the indicators.
#[derive(Debug, Clone)]
pub struct CsDesign {
    times: Vec<f64>,
    counts: Vec<usize>,
    group: Vec<usize>,
    n: usize,
}

impl CsDesign {
    pub fn new(t: &[f64]) -> Result<Self> {
        if t.is_empty() {
            return Err(Error::invalid("empty current status data"));
        }
        let mut order: Vec<usize> = (0..t.len()).collect();
        order.sort_by(|&a, &b| t[a].total_cmp(&t[b]));
        let mut times: Vec<f64> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        let mut group = vec![0; t.len()];
        for &i in &order {
            if times.last() != Some(&t[i]) {
                times.push(t[i]);
                counts.push(0);
            }
            *counts.last_mut().unwrap() += 1;
            group[i] = times.len() - 1;
        }
        Ok(Self {
            times,
            counts,
            group,
            n: t.len(),
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Index of the distinct time of each original record.
    pub fn group(&self) -> &[usize] {
        &self.group
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of events per distinct time.
    pub fn event_counts(&self, delta: &[bool]) -> Vec<usize> {
        let mut ev = vec![0; self.times.len()];
        for (&g, &d) in self.group.iter().zip(delta) {
            ev[g] += usize::from(d);
        }
        ev
    }

    /// MLE values at the distinct times, given event counts per time.
    pub fn fit_values(&self, events: &[usize]) -> Vec<f64> {
        let n = self.n as f64;
        let (mut cx, mut cy) = (0usize, 0usize);
        let mut x = Vec::with_capacity(self.times.len());
        let mut y = Vec::with_capacity(self.times.len());
        for (&c, &e) in self.counts.iter().zip(events) {
            cx += c;
            cy += e;
            x.push(cx as f64 / n);
            y.push(cy as f64 / n);
        }
        let diagram = CusumDiagram::new(x, y).expect("counts are positive");
        let mut v = gcm_slopes(&diagram).into_inner();
        for s in &mut v {
            *s = s.clamp(0.0, 1.0);
        }
        v
    }

    pub fn fit(&self, events: &[usize]) -> StepDistribution {
        let values = self.fit_values(events);
        StepDistribution::from_cdf_values(self.times.clone(), &values)
            .expect("slopes are nondecreasing in [0, 1]")
            .compact()
    }
}

/// Nonparametric MLE of the event-time distribution.
pub fn cs_mle(data: &CurrentStatusData) -> Result<StepDistribution> {
    let design = CsDesign::new(&data.t)?;
    Ok(design.fit(&design.event_counts(&data.delta)))
}

/// `sum_i delta_i log F(T_i) + (1 - delta_i) log(1 - F(T_i))`.
pub fn cs_log_likelihood(data: &CurrentStatusData, f: impl Fn(f64) -> f64) -> f64 {
    data.t
        .iter()
        .zip(&data.delta)
        .map(|(&t, &d)| {
            let p = f(t);
            if d {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive search over nondecreasing grid values by dynamic programming.
    fn grid_oracle(data: &CurrentStatusData, steps: usize) -> f64 {
        let mut idx: Vec<usize> = (0..data.len()).collect();
        idx.sort_by(|&a, &b| data.times()[a].total_cmp(&data.times()[b]));
        let mut best = vec![0.0f64; steps + 1];
        for &i in &idx {
            let mut run = f64::NEG_INFINITY;
            for g in 0..=steps {
                run = run.max(best[g]);
                let p = g as f64 / steps as f64;
                let ll = if data.deltas()[i] { p.ln() } else { (1.0 - p).ln() };
                best[g] = run + ll;
            }
        }
        best.into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn all_events_and_no_events() {
        let t = vec![0.3, 1.2, 0.7];
        let all = cs_mle(&CurrentStatusData::new(t.clone(), vec![true; 3]).unwrap()).unwrap();
        let none = cs_mle(&CurrentStatusData::new(t.clone(), vec![false; 3]).unwrap()).unwrap();
        for &ti in &t {
            assert_eq!(all.cdf(ti), 1.0);
            assert_eq!(none.cdf(ti), 0.0);
        }
    }

    #[test]
    fn five_record_example_matches_grid_oracle() {
        let data = CurrentStatusData::new(
            vec![0.5, 1.0, 1.5, 2.0, 2.5],
            vec![false, true, false, true, true],
        )
        .unwrap();
        let f = cs_mle(&data).unwrap();
        let expected = [0.0, 0.5, 0.5, 1.0, 1.0];
        for (t, e) in data.times().iter().zip(expected) {
            assert!((f.cdf(*t) - e).abs() < 1e-15);
        }
        let ll = cs_log_likelihood(&data, |t| f.cdf(t));
        let oracle = grid_oracle(&data, 100_000);
        assert!(ll >= oracle - 1e-12);
        assert!(ll - oracle <= 1e-4);
    }

    #[test]
    fn ties_are_merged() {
        let data = CurrentStatusData::new(vec![1.0, 1.0, 2.0], vec![true, false, true]).unwrap();
        let f = cs_mle(&data).unwrap();
        assert!((f.cdf(1.0) - 0.5).abs() < 1e-15);
        assert!((f.cdf(2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_data_is_an_error() {
        assert!(cs_mle(&CurrentStatusData::new(vec![], vec![]).unwrap()).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let data = CurrentStatusData::new(vec![0.25, 1.0 / 3.0], vec![true, false]).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        assert_eq!(CurrentStatusData::read_csv(buf.as_slice()).unwrap(), data);
        let bad = "t,delta\n1.0,1\n2.0,2\n";
        assert!(matches!(
            CurrentStatusData::read_csv(bad.as_bytes()),
            Err(Error::Data { row: 3, .. })
        ));
        let neg = "t,delta\n-1.0,1\n";
        assert!(matches!(
            CurrentStatusData::read_csv(neg.as_bytes()),
            Err(Error::Data { row: 2, .. })
        ));
    }
}
