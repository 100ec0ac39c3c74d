//! Incubation-time data `(E_i, S_i)`: infection uniform on the exposure window
//! `[0, E_i]`, symptom onset `S_i = U_i + V_i`. The likelihood is
//! `sum_i log{F(S_i) - F(S_i - E_i)}`, an interval-censoring likelihood.
//!
//! The MLE puts mass only on the `S_i`. It is computed with the iterative
//! convex minorant algorithm on the values `y_k = F(x_k)` at the distinct
//! onset times `x_k`, with a backtracking line search for guaranteed ascent,
//! and stopped by the Fenchel optimality certificate.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::gcm::pava_weighted;
use crate::io;
use crate::step::StepDistribution;

/// Denominators `F(s) - F(s - e)` at or below this contribute nothing to W and G.
pub const DENOMINATOR_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct IncubationData {
    e: Vec<f64>,
    s: Vec<f64>,
}

impl IncubationData {
    pub fn new(e: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        if e.len() != s.len() {
            return Err(Error::invalid("exposure and onset columns differ in length"));
        }
        for (i, (&ei, &si)) in e.iter().zip(&s).enumerate() {
            if !(ei > 0.0) || !ei.is_finite() {
                return Err(Error::invalid(format!("exposure e[{i}] = {ei} must be finite and positive")));
            }
            if !(si > 0.0) || !si.is_finite() {
                return Err(Error::invalid(format!("onset s[{i}] = {si} must be finite and positive")));
            }
        }
        Ok(Self { e, s })
    }

    pub fn from_records(records: &[(f64, f64)]) -> Result<Self> {
        Self::new(records.iter().map(|r| r.0).collect(), records.iter().map(|r| r.1).collect())
    }

    pub fn exposures(&self) -> &[f64] {
        &self.e
    }

    pub fn onsets(&self) -> &[f64] {
        &self.s
    }

    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    /// Checks exposures are at least `eps` and onsets at most `e + m1`.
    pub fn check_support(&self, eps: f64, m1: f64) -> Result<()> {
        for (i, (&e, &s)) in self.e.iter().zip(&self.s).enumerate() {
            if e < eps {
                return Err(Error::Separation(format!("record {i}: exposure {e} below {eps}")));
            }
            if s > e + m1 {
                return Err(Error::invalid(format!(
                    "record {i}: onset {s} exceeds exposure {e} plus support bound {m1}"
                )));
            }
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let rows = io::read_float_columns(reader, &["e", "s"])?;
        for (row, v) in &rows {
            if v[0] <= 0.0 || v[1] <= 0.0 {
                return Err(Error::Data {
                    row: *row,
                    msg: format!("exposure and onset must be positive, got e={}, s={}", v[0], v[1]),
                });
            }
        }
        Self::new(rows.iter().map(|r| r.1[0]).collect(), rows.iter().map(|r| r.1[1]).collect())
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        Self::read_csv(io::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        io::write_rows(w, &["e", "s"], self.e.iter().zip(&self.s).map(|(e, s)| vec![*e, *s]))
    }

    /// Distinct onset times, ascending.
    pub fn atoms(&self) -> Vec<f64> {
        let mut x = self.s.clone();
        x.sort_by(f64::total_cmp);
        x.dedup();
        x
    }

    fn min_s(&self) -> f64 {
        self.s.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max_i (S_i - E_i)`, the right end of the window where F is identified.
    pub fn t_max(&self) -> f64 {
        self.e
            .iter()
            .zip(&self.s)
            .map(|(e, s)| s - e)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Mixed-case interval-censoring form of the data.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalCensoredView {
    pub t: Vec<f64>,
    pub j: Vec<usize>,
    pub e: Vec<f64>,
}

impl IntervalCensoredView {
    /// Cell boundaries `T_i + j E_i`, `j = 0, 1, ...`, up to the first one at or beyond `upper`.
    pub fn boundaries(&self, i: usize, upper: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut j = 0usize;
        loop {
            let b = self.t[i] + j as f64 * self.e[i];
            out.push(b);
            if b >= upper {
                break;
            }
            j += 1;
        }
        out
    }

    pub fn reconstruct(&self, i: usize) -> f64 {
        self.t[i] + self.j[i] as f64 * self.e[i]
    }
}

/// `T_i = S_i - floor(S_i/E_i) E_i`, `j_i = floor(S_i/E_i)`.
pub fn reduce_to_interval_censoring(data: &IncubationData) -> Result<IntervalCensoredView> {
    let mut t = Vec::with_capacity(data.len());
    let mut j = Vec::with_capacity(data.len());
    for (&e, &s) in data.e.iter().zip(&data.s) {
        if !(e > 0.0) {
            return Err(Error::invalid(format!("exposure {e} must be positive")));
        }
        let mut k = (s / e).floor();
        let mut ti = s - k * e;
        // guard the floor against rounding at cell edges
        if ti < 0.0 {
            k -= 1.0;
            ti = s - k * e;
        } else if ti >= e {
            k += 1.0;
            ti = s - k * e;
        }
        t.push(ti.max(0.0));
        j.push(k as usize);
    }
    Ok(IntervalCensoredView {
        t,
        j,
        e: data.e.clone(),
    })
}

/// `sum_i log{F(S_i) - F(S_i - E_i)}`.
pub fn log_likelihood(f: &StepDistribution, data: &IncubationData) -> f64 {
    data.e
        .iter()
        .zip(&data.s)
        .map(|(&e, &s)| (f.cdf(s) - f.cdf(s - e)).ln())
        .sum()
}

/// Values of `W_{n,F}` at the pooled points `S_i`, `(S_i - E_i)_+` within
/// `[min S, max(S - E)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WProcessSample {
    pub points: Vec<f64>,
    /// Right-continuous values at `points`.
    pub values: Vec<f64>,
    /// Left limits at `points`.
    pub left: Vec<f64>,
    /// Value beyond the window.
    pub total: f64,
}

impl WProcessSample {
    /// Left limit `W(t-)` at an arbitrary `t`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.points.partition_point(|&p| p < t);
        if k == 0 {
            0.0
        } else if k == self.points.len() && t > *self.points.last().unwrap() {
            self.total
        } else {
            self.values[k - 1]
        }
    }
}

struct Jumps {
    points: Vec<f64>,
    jumps: Vec<f64>,
}

/// Jumps of W (`squared = false`) or G (`squared = true`) at the pooled points.
fn process_jumps(f: &StepDistribution, data: &IncubationData, squared: bool) -> Jumps {
    let n = data.len() as f64;
    let lo = data.min_s();
    let hi = data.t_max();
    let mut ev: Vec<(f64, f64)> = Vec::with_capacity(2 * data.len());
    for (&e, &s) in data.e.iter().zip(&data.s) {
        let d = f.cdf(s) - f.cdf(s - e);
        let r = if d > DENOMINATOR_FLOOR {
            if squared {
                1.0 / (d * d)
            } else {
                1.0 / d
            }
        } else {
            0.0
        };
        if s >= lo && s <= hi {
            ev.push((s, r / n));
        }
        let se = s - e;
        if se >= lo && se <= hi {
            ev.push((se, if squared { r / n } else { -r / n }));
        }
    }
    let mut pool: Vec<f64> = data
        .e
        .iter()
        .zip(&data.s)
        .flat_map(|(&e, &s)| [s, (s - e).max(0.0)])
        .filter(|&p| p >= lo && p <= hi)
        .collect();
    pool.sort_by(f64::total_cmp);
    pool.dedup();
    ev.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut jumps = vec![0.0; pool.len()];
    let mut k = 0;
    for (p, v) in ev {
        while pool[k] < p {
            k += 1;
        }
        jumps[k] += v;
    }
    Jumps { points: pool, jumps }
}

/// Samples the process characterizing the MLE.
pub fn w_process(f: &StepDistribution, data: &IncubationData) -> WProcessSample {
    let j = process_jumps(f, data, false);
    let mut values = Vec::with_capacity(j.points.len());
    let mut left = Vec::with_capacity(j.points.len());
    let mut acc = 0.0;
    for d in &j.jumps {
        left.push(acc);
        acc += d;
        values.push(acc);
    }
    WProcessSample {
        points: j.points,
        values,
        left,
        total: acc,
    }
}

/// Weight process `G_{n,F}` at the pooled points (nondecreasing).
pub fn g_process(f: &StepDistribution, data: &IncubationData) -> (Vec<f64>, Vec<f64>) {
    let j = process_jumps(f, data, true);
    let mut acc = 0.0;
    let values = j
        .jumps
        .iter()
        .map(|d| {
            acc += d;
            acc
        })
        .collect();
    (j.points, values)
}

/// `(max_violation, complementarity)` of the optimality conditions:
/// `max_t (W_total - W(t-))_+` and `|int W(t-) dF(t)|`.
pub fn fenchel_gap(f: &StepDistribution, data: &IncubationData) -> (f64, f64) {
    let w = w_process(f, data);
    let mut violation = w.total.max(0.0);
    for &l in &w.left {
        violation = violation.max(w.total - l);
    }
    let comp: f64 = f
        .points()
        .iter()
        .zip(f.masses())
        .map(|(&x, &m)| m * w.left_limit(x))
        .sum();
    (violation, comp.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcmOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IcmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IcmReport {
    pub estimate: StepDistribution,
    pub iterations: usize,
    /// Log likelihood of every accepted iterate, starting value first.
    pub loglik_trace: Vec<f64>,
    pub violation: f64,
    pub complementarity: f64,
    /// Records whose likelihood factor does not depend on F.
    pub dropped: usize,
}

/// Dense Newton steps are skipped while the iterate has more distinct levels than this.
const MAX_POLISH_LEVELS: usize = 400;

const ZERO: u32 = u32::MAX;
const ONE: u32 = u32::MAX - 1;

/// Likelihood in the coordinates `y_k = F(x_k)` of the atoms inside the window.
struct Problem {
    n: f64,
    atoms: Vec<f64>,
    free: usize,
    terms: Vec<(u32, u32)>,
    dropped: usize,
}

impl Problem {
    fn new(data: &IncubationData) -> Self {
        let atoms = data.atoms();
        let t_max = data.t_max();
        let free = atoms.partition_point(|&x| x <= t_max);
        let mut terms = Vec::with_capacity(data.len());
        let mut dropped = 0;
        for (&e, &s) in data.e.iter().zip(&data.s) {
            let ai = atoms.partition_point(|&x| x < s);
            let a = if ai < free { ai as u32 } else { ONE };
            let nb = atoms.partition_point(|&x| x <= s - e);
            let b = if nb == 0 { ZERO } else { (nb - 1) as u32 };
            if a == ONE && b == ZERO {
                dropped += 1;
                continue;
            }
            terms.push((a, b));
        }
        Self {
            n: data.len() as f64,
            atoms,
            free,
            terms,
            dropped,
        }
    }

    #[inline]
    fn val(y: &[f64], k: u32) -> f64 {
        match k {
            ZERO => 0.0,
            ONE => 1.0,
            k => y[k as usize],
        }
    }

    /// Mean log likelihood, `-inf` if some interval probability is not positive.
    fn loglik(&self, y: &[f64]) -> f64 {
        let mut s = 0.0;
        for &(a, b) in &self.terms {
            let d = Self::val(y, a) - Self::val(y, b);
            if !(d > 0.0) {
                return f64::NEG_INFINITY;
            }
            s += d.ln();
        }
        s / self.n
    }

    /// `loglik(to) - loglik(from)` as a sum of `ln(1 + change/d)`, accurate
    /// when the change is far below the rounding level of the log likelihood.
    fn loglik_change(&self, from: &[f64], to: &[f64]) -> f64 {
        let mut s = 0.0;
        for &(a, b) in &self.terms {
            let d0 = Self::val(from, a) - Self::val(from, b);
            let d1 = Self::val(to, a) - Self::val(to, b);
            if !(d1 > 0.0) {
                return f64::NEG_INFINITY;
            }
            s += ((d1 - d0) / d0).ln_1p();
        }
        s / self.n
    }

    /// Gradient and diagonal of the negative Hessian.
    fn derivatives(&self, y: &[f64], g: &mut [f64], w: &mut [f64]) {
        g.iter_mut().for_each(|v| *v = 0.0);
        w.iter_mut().for_each(|v| *v = 0.0);
        for &(a, b) in &self.terms {
            let d = Self::val(y, a) - Self::val(y, b);
            let r = 1.0 / d;
            let r2 = r * r;
            if a < ONE {
                g[a as usize] += r;
                w[a as usize] += r2;
            }
            if b < ONE {
                g[b as usize] -= r;
                w[b as usize] += r2;
            }
        }
        let inv = 1.0 / self.n;
        g.iter_mut().for_each(|v| *v *= inv);
        w.iter_mut().for_each(|v| *v *= inv);
    }

    /// Fenchel quantities from the gradient; the cumulative gradient up to
    /// atom `j - 1` is `W(x_j-)`.
    fn gap(y: &[f64], g: &[f64]) -> (f64, f64) {
        let total: f64 = g.iter().sum();
        let mut violation = total.max(0.0);
        let mut comp = 0.0;
        let mut cum = 0.0;
        let mut prev = 0.0;
        for (k, &gk) in g.iter().enumerate() {
            violation = violation.max(total - cum);
            comp += (y[k] - prev) * cum;
            prev = y[k];
            cum += gk;
        }
        comp += (1.0 - prev) * total;
        (violation, comp.abs())
    }

    /// Newton's method on the levels of `y`, keeping its support (the atoms
    /// where `y` jumps) and merging levels that collide. Returns the number
    /// of Newton steps taken.
    fn polish(&self, y: &mut [f64], max_steps: usize) -> usize {
        let k = y.len();
        let mut block = vec![0usize; k];
        let mut levels: Vec<f64> = Vec::new();
        for i in 0..k {
            if i == 0 || y[i] > y[i - 1] {
                levels.push(y[i]);
            }
            block[i] = levels.len() - 1;
        }
        if levels.len() > MAX_POLISH_LEVELS {
            return 0;
        }
        let mut steps = 0;
        while steps < max_steps {
            let l = levels.len();
            let val = |v: &[f64], idx: u32| match idx {
                ZERO => 0.0,
                ONE => 1.0,
                i => v[block[i as usize]],
            };
            let blk = |idx: u32| if idx >= ONE { usize::MAX } else { block[idx as usize] };
            let change = |from: &[f64], to: &[f64]| {
                let mut s = 0.0;
                for &(a, b) in &self.terms {
                    let d0 = val(from, a) - val(from, b);
                    let d1 = val(to, a) - val(to, b);
                    if !(d1 > 0.0) {
                        return f64::NEG_INFINITY;
                    }
                    s += ((d1 - d0) / d0).ln_1p();
                }
                s / self.n
            };
            let gradient = |v: &[f64]| {
                let mut grad = vec![0.0; l];
                for &(a, b) in &self.terms {
                    let r = 1.0 / (val(v, a) - val(v, b));
                    if a < ONE {
                        grad[blk(a)] += r;
                    }
                    if b < ONE {
                        grad[blk(b)] -= r;
                    }
                }
                grad.iter_mut().for_each(|g| *g /= self.n);
                grad
            };
            let grad = gradient(&levels);
            if grad.iter().all(|g| g.abs() <= 1e-15) {
                break;
            }
            let mut q = nalgebra::DMatrix::<f64>::zeros(l, l);
            for &(a, b) in &self.terms {
                let d = val(&levels, a) - val(&levels, b);
                let r2 = 1.0 / (d * d * self.n);
                let (ba, bb) = (blk(a), blk(b));
                if a < ONE {
                    q[(ba, ba)] += r2;
                }
                if b < ONE {
                    q[(bb, bb)] += r2;
                }
                if a < ONE && b < ONE {
                    q[(ba, bb)] -= r2;
                    q[(bb, ba)] -= r2;
                }
            }
            let rhs = nalgebra::DVector::from_column_slice(&grad);
            let dir = match q.clone().cholesky() {
                Some(c) => c.solve(&rhs),
                None => break,
            };
            let decrement: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
            if !(decrement > 0.0) {
                break;
            }
            // largest step keeping 0 <= v_1 <= ... <= v_L <= 1
            let mut alpha_max = f64::INFINITY;
            let mut hit = None;
            if dir[0] < 0.0 {
                alpha_max = -levels[0] / dir[0];
            }
            for i in 0..l.saturating_sub(1) {
                let closing = dir[i] - dir[i + 1];
                if closing > 0.0 {
                    let a = (levels[i + 1] - levels[i]) / closing;
                    if a < alpha_max {
                        alpha_max = a;
                        hit = Some(i);
                    }
                }
            }
            if dir[l - 1] > 0.0 {
                let a = (1.0 - levels[l - 1]) / dir[l - 1];
                if a < alpha_max {
                    alpha_max = a;
                    hit = None;
                }
            }
            if alpha_max <= 0.0 {
                break;
            }
            let mut alpha = alpha_max.min(1.0);
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = levels.iter().zip(dir.iter()).map(|(v, d)| v + alpha * d).collect();
                let gain = change(&levels, &trial);
                if gain.is_finite() {
                    let g1 = gradient(&trial);
                    let slope: f64 = g1.iter().zip(dir.iter()).map(|(g, d)| g * d).sum();
                    if gain > 0.0 || (slope >= 0.0 && gain >= 0.0) {
                        accepted = Some(trial);
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let Some(mut trial) = accepted else { break };
            steps += 1;
            if alpha == alpha_max && alpha_max < 1.0 {
                if let Some(i) = hit {
                    // merge level i + 1 into level i
                    trial[i + 1] = trial[i];
                    trial.remove(i + 1);
                    for b in block.iter_mut() {
                        if *b > i {
                            *b -= 1;
                        }
                    }
                }
            }
            levels = trial;
            for w in levels.windows(2) {
                debug_assert!(w[0] <= w[1]);
            }
            if decrement < 1e-30 {
                break;
            }
        }
        for i in 0..k {
            y[i] = levels[block[i]];
        }
        steps
    }

    fn estimate(&self, y: &[f64]) -> StepDistribution {
        let mut values: Vec<f64> = y.to_vec();
        values.extend(std::iter::repeat_n(1.0, self.atoms.len() - self.free));
        let mut prev = 0.0;
        let masses: Vec<f64> = values
            .iter()
            .map(|&v| {
                let m = (v - prev).max(0.0);
                prev = prev.max(v);
                m
            })
            .collect();
        let total: f64 = masses.iter().sum();
        let masses = if total > 1.0 {
            masses.iter().map(|m| m / total).collect()
        } else {
            masses
        };
        StepDistribution::new(self.atoms.clone(), masses)
            .expect("monotone values on sorted atoms")
            .compact()
    }
}

/// Nonparametric MLE with the default initializer (uniform masses on the onset times).
pub fn inc_mle(data: &IncubationData, tol: f64, max_iter: usize) -> Result<StepDistribution> {
    inc_mle_report(data, None, IcmOptions { tol, max_iter }).map(|r| r.estimate)
}

/// Nonparametric MLE started from `init`, which must give every record a
/// positive likelihood.
pub fn inc_mle_from(
    data: &IncubationData,
    init: &StepDistribution,
    tol: f64,
    max_iter: usize,
) -> Result<StepDistribution> {
    inc_mle_report(data, Some(init), IcmOptions { tol, max_iter }).map(|r| r.estimate)
}

pub fn inc_mle_report(
    data: &IncubationData,
    init: Option<&StepDistribution>,
    opts: IcmOptions,
) -> Result<IcmReport> {
    if data.is_empty() {
        return Err(Error::invalid("empty incubation data"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let p = Problem::new(data);
    if p.dropped > 0 {
        log::debug!("{} records have a likelihood factor free of F and are ignored", p.dropped);
    }
    let m = p.atoms.len();
    if p.free == 0 {
        // nothing is identified below the first onset: all mass at min S
        let est = StepDistribution::new(vec![p.atoms[0]], vec![1.0])?;
        return Ok(IcmReport {
            estimate: est,
            iterations: 0,
            loglik_trace: vec![0.0],
            violation: 0.0,
            complementarity: 0.0,
            dropped: p.dropped,
        });
    }
    let mut y: Vec<f64> = match init {
        None => (1..=p.free).map(|k| k as f64 / m as f64).collect(),
        Some(f) => p.atoms[..p.free].iter().map(|&x| f.cdf(x)).collect(),
    };
    let mut ll = p.loglik(&y);
    if !ll.is_finite() {
        return Err(Error::invalid("initial distribution gives zero likelihood to some record"));
    }
    let k = p.free;
    let (mut g, mut w) = (vec![0.0; k], vec![0.0; k]);
    let (mut g_trial, mut w_trial) = (vec![0.0; k], vec![0.0; k]);
    let mut target = vec![0.0; k];
    let mut trial = vec![0.0; k];
    let mut trace = vec![ll * p.n];
    p.derivatives(&y, &mut g, &mut w);
    let mut gap = Problem::gap(&y, &g);
    let mut iterations = 0;
    while gap.0 > opts.tol || gap.1 > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                violation: gap.0,
                complementarity: gap.1,
            });
        }
        iterations += 1;
        for i in 0..k {
            target[i] = y[i] + g[i] / w[i];
        }
        let mut z = pava_weighted(&target, &w)?;
        z.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..k {
                trial[i] = y[i] + lambda * (z[i] - y[i]);
            }
            let gain = p.loglik_change(&y, &trial);
            if gain.is_finite() {
                p.derivatives(&trial, &mut g_trial, &mut w_trial);
                let slope: f64 = (0..k).map(|i| g_trial[i] * (z[i] - y[i])).sum();
                if gain > 0.0 || (slope >= 0.0 && gain >= 0.0) {
                    accepted = true;
                    ll += gain;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations,
                violation: gap.0,
                complementarity: gap.1,
            });
        }
        std::mem::swap(&mut y, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
        std::mem::swap(&mut w, &mut w_trial);
        trace.push(ll * p.n);
        gap = Problem::gap(&y, &g);
        if gap.0 > opts.tol || gap.1 > opts.tol {
            // finish the current support exactly; ICM steps change the support
            let mut polished = y.clone();
            if p.polish(&mut polished, 50) > 0 {
                let gain = p.loglik_change(&y, &polished);
                if gain >= 0.0 {
                    y = polished;
                    ll += gain;
                    p.derivatives(&y, &mut g, &mut w);
                    trace.push(ll * p.n);
                    gap = Problem::gap(&y, &g);
                }
            }
        }
    }
    Ok(IcmReport {
        estimate: p.estimate(&y),
        iterations,
        loglik_trace: trace,
        violation: gap.0,
        complementarity: gap.1,
        dropped: p.dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> IncubationData {
        IncubationData::from_records(&[(3.0, 2.0), (2.0, 4.5), (5.0, 6.0), (1.0, 3.5), (4.0, 8.0), (2.5, 5.0)])
            .unwrap()
    }

    #[test]
    fn reduction_examples() {
        let d = IncubationData::from_records(&[(1.0, 0.7), (1.0, 2.3)]).unwrap();
        let v = reduce_to_interval_censoring(&d).unwrap();
        assert!((v.t[0] - 0.7).abs() < 1e-15 && v.j[0] == 0);
        assert!((v.t[1] - 0.3).abs() < 1e-12 && v.j[1] == 2);
        assert!((v.reconstruct(1) - 2.3).abs() < 1e-12);
    }

    #[test]
    fn single_record_puts_mass_at_onset() {
        let d = IncubationData::from_records(&[(2.0, 1.5)]).unwrap();
        let f = inc_mle(&d, 1e-8, 100).unwrap();
        assert_eq!(f.points(), &[1.5]);
        assert_eq!(f.masses(), &[1.0]);
        let w = w_process(&f, &d);
        assert!(w.points.len() <= 2);
    }

    #[test]
    fn g_process_hand_case() {
        let d = IncubationData::from_records(&[(0.5, 1.0), (1.0, 2.5)]).unwrap();
        let f = StepDistribution::new(vec![1.0, 2.5], vec![0.5, 0.5]).unwrap();
        let (pts, g) = g_process(&f, &d);
        // D_1 = F(1) - F(0.5) = 0.5, D_2 = F(2.5) - F(1.5) = 0.5, each 1/D^2 = 4, divided by n = 2
        assert_eq!(pts, vec![1.0, 1.5]);
        assert_eq!(g, vec![2.0, 4.0]);
        let w = w_process(&f, &d);
        assert_eq!(w.values, vec![1.0, 0.0]);
    }

    #[test]
    fn fenchel_from_gradient_matches_w_process() {
        let d = small();
        let p = Problem::new(&d);
        let y: Vec<f64> = (1..=p.free).map(|k| k as f64 / p.atoms.len() as f64).collect();
        let mut g = vec![0.0; p.free];
        let mut w = vec![0.0; p.free];
        p.derivatives(&y, &mut g, &mut w);
        let (v1, c1) = Problem::gap(&y, &g);
        let (v2, c2) = fenchel_gap(&p.estimate(&y), &d);
        assert!((v1 - v2).abs() < 1e-12, "{v1} {v2}");
        assert!((c1 - c2).abs() < 1e-12, "{c1} {c2}");
        assert!(v1 > 0.0);
    }

    #[test]
    fn converges_with_certificate_and_ascent() {
        let d = small();
        let r = inc_mle_report(&d, None, IcmOptions::default()).unwrap();
        assert!(r.violation <= 1e-8 && r.complementarity <= 1e-8);
        for w in r.loglik_trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
        let (v, c) = fenchel_gap(&r.estimate, &d);
        assert!(v <= 1e-8 && c <= 1e-8, "{v} {c}");
        let ll = log_likelihood(&r.estimate, &d);
        assert!((ll - r.loglik_trace.last().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trip() {
        let d = small();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(IncubationData::read_csv(buf.as_slice()).unwrap(), d);
        assert!(matches!(
            IncubationData::read_csv("e,s\n1,2\n0,3\n".as_bytes()),
            Err(Error::Data { row: 3, .. })
        ));
    }
}
