//! Smooth functionals of the estimates: SMLE quantiles, the mean of the MLE,
//! the local limit constant `c_E`, and the adjoint integral equation whose
//! solution gives asymptotic variances.
//!
//! The adjoint operator for incubation data with exposure law `F_E` is
//!
//! ```text
//! (A phi)(v) = int e^{-1} [ (phi(v+e) - phi(v)) / (F(v+e) - F(v))
//!                         - (phi(v) - phi(v-e)) / (F(v) - F(v-e)) ] dF_E(e)
//! ```
//!
//! on `(0, M1)`, with `phi = 0` at and beyond both ends and `F = 0` below `0`,
//! `F = 1` above `M1`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::quad::{adaptive_on_breaks, trapezoid_uniform, PanelRule};
use crate::sim::Law;
use crate::smle::{Bandwidth, SmleCurve};
use crate::step::StepDistribution;

/// Bisection stops once the bracket is this narrow.
const QUANTILE_TOL: f64 = 1e-10;

/// Trapezoid nodes for the exposure integral under a uniform law.
pub const EXPOSURE_NODES: usize = 200;

/// Quantile of a smoothed CDF; `clamped` is set when `p` lies outside the
/// range of the curve and the domain end is returned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub value: f64,
    pub clamped: bool,
}

/// Solves `curve(x) = p` by bisection.
pub fn smle_quantile(curve: &SmleCurve, p: f64) -> Result<QuantileEstimate> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("probability {p} not in (0, 1)")));
    }
    if matches!(curve.bandwidth, Bandwidth::Local(_)) || !curve.is_monotone() {
        return Err(Error::NonMonotone);
    }
    let (mut lo, mut hi) = curve.domain();
    if p <= curve.value_at(lo) {
        return Ok(QuantileEstimate { value: lo, clamped: p < curve.value_at(lo) });
    }
    if p > curve.value_at(hi) {
        return Ok(QuantileEstimate { value: hi, clamped: true });
    }
    while hi - lo > QUANTILE_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if curve.value_at(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(QuantileEstimate {
        value: 0.5 * (lo + hi),
        clamped: false,
    })
}

/// `sum_j x_j m_j`; warns when the distribution is defective.
pub fn mean_of_mle(f_hat: &StepDistribution) -> f64 {
    let deficit = 1.0 - f_hat.total_mass();
    if deficit.abs() > 1e-8 {
        log::warn!("mean of a defective distribution (missing mass {deficit:.3e})");
    }
    f_hat.integrate(|x| x)
}

/// A CDF on `[0, M1]` extended by `0` below and `1` above.
#[derive(Clone, Copy)]
pub struct Cdf<'a> {
    f: &'a (dyn Fn(f64) -> f64 + Sync),
    upper: f64,
}

impl<'a> Cdf<'a> {
    pub fn new(f: &'a (dyn Fn(f64) -> f64 + Sync), upper: f64) -> Result<Self> {
        if !(upper > 0.0) || !upper.is_finite() {
            return Err(Error::invalid(format!("support end {upper} must be positive")));
        }
        Ok(Self { f, upper })
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= self.upper {
            1.0
        } else {
            (self.f)(x)
        }
    }
}

fn separated(exposure: &Law) -> Result<()> {
    exposure.validate()?;
    if exposure.lower() <= 0.0 {
        return Err(Error::Separation(format!(
            "exposure law {exposure:?} is not bounded away from zero"
        )));
    }
    Ok(())
}

/// Limit constant
/// `c_E = int e^{-1} [1/(F0(t0) - F0(t0-e)) + 1/(F0(t0+e) - F0(t0))] dF_E(e)`.
pub fn c_e_constant(f0: Cdf<'_>, exposure: &Law, t0: f64) -> Result<f64> {
    separated(exposure)?;
    let ft = f0.eval(t0);
    if !(ft > 0.0 && ft < 1.0) {
        return Err(Error::invalid(format!("F0({t0}) = {ft} not in (0, 1)")));
    }
    let integrand = |e: f64| {
        let below = ft - f0.eval(t0 - e);
        let above = f0.eval(t0 + e) - ft;
        (1.0 / below + 1.0 / above) / e
    };
    let check = |v: f64| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Separation("zero denominator in the c_E integrand".into()))
        }
    };
    match *exposure {
        Law::Degenerate { at } => check(integrand(at)),
        Law::Uniform { lower, upper } => {
            let mut breaks = vec![lower, upper];
            for b in [t0, f0.upper() - t0] {
                if b > lower && b < upper {
                    breaks.push(b);
                }
            }
            breaks.sort_by(f64::total_cmp);
            let poisoned = std::cell::Cell::new(false);
            let f = |e: f64| {
                let v = integrand(e);
                if !v.is_finite() {
                    poisoned.set(true);
                    return 0.0;
                }
                v
            };
            let v = adaptive_on_breaks(&f, &breaks, 1e-9 * (upper - lower))?;
            if poisoned.get() {
                return Err(Error::Separation("zero denominator in the c_E integrand".into()));
            }
            check(v / (upper - lower))
        }
    }
}

/// Exposure quadrature: nodes and weights of `dF_E`.
fn exposure_rule(exposure: &Law) -> (Vec<f64>, Vec<f64>) {
    match *exposure {
        Law::Degenerate { at } => (vec![at], vec![1.0]),
        Law::Uniform { lower, upper } => {
            let k = EXPOSURE_NODES;
            let de = (upper - lower) / (k - 1) as f64;
            let nodes = (0..k).map(|i| lower + i as f64 * de).collect();
            let weights = (0..k)
                .map(|i| {
                    let w = de / (upper - lower);
                    if i == 0 || i == k - 1 {
                        0.5 * w
                    } else {
                        w
                    }
                })
                .collect();
            (nodes, weights)
        }
    }
}

/// Solution of `A phi = rhs` on a uniform grid over `[0, M1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiSolution {
    pub grid: Vec<f64>,
    /// `phi` at the grid points, zero at both ends.
    pub values: Vec<f64>,
    /// Sup-norm of the residual of the discrete system.
    pub residual: f64,
}

impl PhiSolution {
    /// Linear interpolation, zero outside `[0, M1]`.
    pub fn value(&self, v: f64) -> f64 {
        let m = *self.grid.last().unwrap();
        if v <= 0.0 || v >= m {
            return 0.0;
        }
        let dv = m / (self.grid.len() - 1) as f64;
        let p = v / dv;
        let j = (p.floor() as usize).min(self.grid.len() - 2);
        let a = p - j as f64;
        (1.0 - a) * self.values[j] + a * self.values[j + 1]
    }
}

/// Discretizes the adjoint operator on `grid_size` cells and solves for `phi`.
///
/// `F` is evaluated exactly at the shifted points; `phi` is linearly
/// interpolated between grid nodes.
pub fn solve_phi(f: Cdf<'_>, exposure: &Law, rhs: impl Fn(f64) -> f64, grid_size: usize) -> Result<PhiSolution> {
    separated(exposure)?;
    if grid_size < 2 {
        return Err(Error::invalid("grid needs at least two cells"));
    }
    let m1 = f.upper();
    let n = grid_size;
    let dv = m1 / n as f64;
    let grid: Vec<f64> = (0..=n).map(|i| i as f64 * dv).collect();
    let unknowns = n - 1;
    let (nodes, weights) = exposure_rule(exposure);

    let mut a = DMatrix::<f64>::zeros(unknowns, unknowns);
    let mut b = DVector::<f64>::zeros(unknowns);
    // adds `coef * phi(x)` to row `row`, with `phi` interpolated on the grid
    let add = |a: &mut DMatrix<f64>, row: usize, x: f64, coef: f64| {
        if x <= 0.0 || x >= m1 {
            return;
        }
        let p = x / dv;
        let j = (p.floor() as usize).min(n - 1);
        let w = p - j as f64;
        for (node, share) in [(j, 1.0 - w), (j + 1, w)] {
            if (1..n).contains(&node) && share != 0.0 {
                a[(row, node - 1)] += coef * share;
            }
        }
    };
    for i in 1..n {
        let row = i - 1;
        let v = grid[i];
        let fv = f.eval(v);
        b[row] = rhs(v);
        for (&e, &we) in nodes.iter().zip(&weights) {
            let up = f.eval(v + e) - fv;
            let down = fv - f.eval(v - e);
            if !(up > 0.0 && down > 0.0) {
                return Err(Error::Separation(format!(
                    "F is flat over [{}, {}]; the operator is undefined",
                    v - e,
                    v + e
                )));
            }
            let cu = we / (e * up);
            let cd = we / (e * down);
            add(&mut a, row, v + e, cu);
            add(&mut a, row, v - e, cd);
            a[(row, row)] -= cu + cd;
        }
    }

    let lu = a.clone().lu();
    let u = lu.u();
    let diag: Vec<f64> = u.diagonal().iter().map(|d| d.abs()).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if dmin > 0.0 { dmax / dmin } else { f64::INFINITY };
    if !condition.is_finite() || condition > 1e14 {
        return Err(Error::Singular { condition });
    }
    let x = lu.solve(&b).ok_or(Error::Singular { condition })?;
    let residual = (&a * &x - &b).amax();
    let scale = b.amax();
    if residual > 1e-6 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "integral-equation residual {residual:.3e} above tolerance (rhs scale {scale:.3e})"
        )));
    }
    let mut values = vec![0.0; n + 1];
    values[1..n].copy_from_slice(x.as_slice());
    Ok(PhiSolution { grid, values, residual })
}

/// Asymptotic variance with its discretization diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub sigma2: f64,
    pub grid_size: usize,
    /// `|sigma2(2 grid) - sigma2(grid)| / sigma2(2 grid)`.
    pub refinement_delta: f64,
    /// Residual of the solve at `grid_size`.
    pub residual: f64,
}

fn mean_variance_at(f: Cdf<'_>, exposure: &Law, grid_size: usize) -> Result<(f64, f64)> {
    let phi = solve_phi(f, exposure, |_| 1.0, grid_size)?;
    let dv = f.upper() / grid_size as f64;
    Ok((-trapezoid_uniform(&phi.values, dv), phi.residual))
}

/// Variance `-int phi` of the limit of `sqrt(n) (int x dF_n - int x dF)`,
/// where `A phi = 1`.
pub fn asymptotic_variance_mean(f: Cdf<'_>, exposure: &Law, grid_size: usize) -> Result<VarianceReport> {
    let (sigma2, residual) = mean_variance_at(f, exposure, grid_size)?;
    let (fine, _) = mean_variance_at(f, exposure, 2 * grid_size)?;
    if !(sigma2 > 0.0) {
        return Err(Error::Numerical(format!("non-positive variance {sigma2:.3e}")));
    }
    Ok(VarianceReport {
        sigma2,
        grid_size,
        refinement_delta: ((fine - sigma2) / fine).abs(),
        residual,
    })
}

/// Variance `n^{-1/5} int phi(y) K_h(t - y) dy` of `n^{2/5}` times the SMLE
/// at `t`, where `A phi = -K_h(t - .)`.
pub fn smle_asymptotic_variance(
    f: Cdf<'_>,
    exposure: &Law,
    t: f64,
    h: f64,
    n: usize,
    grid_size: usize,
) -> Result<f64> {
    smle_variance_solution(f, exposure, t, h, n, grid_size).map(|(s, _)| s)
}

/// As [`smle_asymptotic_variance`], also returning the solved `phi`.
pub fn smle_variance_solution(
    f: Cdf<'_>,
    exposure: &Law,
    t: f64,
    h: f64,
    n: usize,
    grid_size: usize,
) -> Result<(f64, PhiSolution)> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("bandwidth {h} must be positive")));
    }
    if !(t - h > 0.0 && t + h < f.upper()) {
        return Err(Error::invalid(format!(
            "kernel support [{}, {}] not inside (0, {})",
            t - h,
            t + h,
            f.upper()
        )));
    }
    let kernel = KernelSpec::Triweight;
    let kh = |v: f64| kernel.k((t - v) / h) / h;
    let phi = solve_phi(f, exposure, |v| -kh(v), grid_size)?;
    let mut breaks: Vec<f64> = vec![t - h];
    breaks.extend(phi.grid.iter().copied().filter(|&g| g > t - h && g < t + h));
    breaks.push(t + h);
    let integral = PanelRule::new(8).integrate(&|y| phi.value(y) * kh(y), &breaks);
    let sigma2 = (n as f64).powf(-0.2) * integral;
    if !(sigma2 > 0.0) {
        return Err(Error::Numerical(format!("non-positive variance {sigma2:.3e}")));
    }
    Ok((sigma2, phi))
}
