//! Kernel smoothing of step distributions on `[0, M]` with reflection at both ends.
//!
//! With `S(a) = sum_j m_j IK((a - x_j)/h)` the boundary-corrected estimate is
//! `S(t) - S(-t) + S(2M) - S(2M - t)`. In the interior this is the plain
//! convolution, near `0` it subtracts the reflected mass and near `M` it adds
//! back what the kernel pushes past the upper end. Any mass missing from a
//! defective distribution is placed at `M`.

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::quad::gauss_legendre;
use crate::step::StepDistribution;

/// Step distribution prepared for smoothing: atoms in `[0, M]` and cumulative masses.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothable {
    x: Vec<f64>,
    m: Vec<f64>,
    cum: Vec<f64>,
    upper: f64,
}

impl Smoothable {
    pub fn new(f: &StepDistribution, upper: f64) -> Result<Self> {
        if !(upper > 0.0) || !upper.is_finite() {
            return Err(Error::invalid(format!("domain upper end {upper} must be positive")));
        }
        if let (Some(&lo), Some(&hi)) = (f.points().first(), f.points().last()) {
            if lo < 0.0 || hi > upper {
                return Err(Error::invalid(format!(
                    "distribution support [{lo}, {hi}] not inside [0, {upper}]"
                )));
            }
        }
        let mut x = Vec::with_capacity(f.len() + 1);
        let mut m = Vec::with_capacity(f.len() + 1);
        for (&p, &w) in f.points().iter().zip(f.masses()) {
            if w > 0.0 {
                x.push(p);
                m.push(w);
            }
        }
        let deficit = 1.0 - f.total_mass();
        if deficit > 0.0 {
            if x.last() == Some(&upper) {
                *m.last_mut().unwrap() += deficit;
            } else {
                x.push(upper);
                m.push(deficit);
            }
        }
        let mut acc = 0.0;
        let cum = m
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self { x, m, cum, upper })
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn atoms(&self) -> &[f64] {
        &self.x
    }

    /// Masses of `atoms()`, including any deficit placed at `M`.
    pub fn masses(&self) -> &[f64] {
        &self.m
    }

    #[inline]
    fn s(&self, kernel: KernelSpec, h: f64, a: f64) -> f64 {
        let lo = self.x.partition_point(|&x| x <= a - h);
        let hi = lo + self.x[lo..].partition_point(|&x| x < a + h);
        let mut s = if lo == 0 { 0.0 } else { self.cum[lo - 1] };
        for j in lo..hi {
            s += self.m[j] * kernel.ik((a - self.x[j]) / h);
        }
        s
    }

    #[inline]
    fn kernel_sum(&self, kernel: KernelSpec, h: f64, a: f64) -> f64 {
        let lo = self.x.partition_point(|&x| x <= a - h);
        let hi = lo + self.x[lo..].partition_point(|&x| x < a + h);
        (lo..hi).map(|j| self.m[j] * kernel.k((a - self.x[j]) / h)).sum::<f64>() / h
    }
}

/// Bandwidth and domain of a smoothed estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoother {
    pub kernel: KernelSpec,
    pub h: f64,
    pub upper: f64,
}

impl Smoother {
    pub fn new(h: f64, upper: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid(format!("bandwidth {h} must be positive")));
        }
        if !(upper > 0.0) || !upper.is_finite() {
            return Err(Error::invalid(format!("domain upper end {upper} must be positive")));
        }
        Ok(Self {
            kernel: KernelSpec::Triweight,
            h,
            upper,
        })
    }

    /// Boundary-corrected value without clamping or pinning.
    #[inline]
    pub fn raw(&self, f: &Smoothable, t: f64) -> f64 {
        let (k, h, m) = (self.kernel, self.h, self.upper);
        f.s(k, h, t) - f.s(k, h, -t) + f.s(k, h, 2.0 * m) - f.s(k, h, 2.0 * m - t)
    }

    /// Smoothed CDF at `t`, exact at both ends and clamped to `[0, 1]`.
    #[inline]
    pub fn value(&self, f: &Smoothable, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t >= self.upper {
            1.0
        } else {
            self.raw(f, t).clamp(0.0, 1.0)
        }
    }

    pub fn eval(&self, f: &Smoothable, t: f64) -> Result<f64> {
        if !(0.0..=self.upper).contains(&t) {
            return Err(Error::invalid(format!(
                "evaluation point {t} outside [0, {}]",
                self.upper
            )));
        }
        Ok(self.value(f, t))
    }

    /// Derivative of the boundary-corrected estimate.
    pub fn density(&self, f: &Smoothable, u: f64) -> f64 {
        let (k, h, m) = (self.kernel, self.h, self.upper);
        f.kernel_sum(k, h, u) + f.kernel_sum(k, h, -u) + f.kernel_sum(k, h, 2.0 * m - u)
    }

    /// `int L_h(t, u) dG(u)` over `[0, M]`, where `L_h` is this smoother's
    /// boundary-corrected kernel and `G` the continuous estimate produced by
    /// `pilot` from `f`. For interior `t` this is `int IK_h(t - u) dG(u)`.
    ///
    /// Computed after integration by parts; the integrand is piecewise
    /// polynomial and each piece is integrated exactly by a 7-point rule.
    pub fn centering(&self, pilot: &Smoother, f: &Smoothable, t: f64) -> f64 {
        let (k, h, m) = (self.kernel, self.h, self.upper);
        let l = |u: f64| {
            k.ik((t - u) / h) - k.ik((-t - u) / h) + k.ik((2.0 * m - u) / h)
                - k.ik((2.0 * m - t - u) / h)
        };
        let dl = |u: f64| {
            (-k.k((t - u) / h) + k.k((-t - u) / h) - k.k((2.0 * m - u) / h)
                + k.k((2.0 * m - t - u) / h))
                / h
        };
        let g = |u: f64| pilot.raw(f, u);
        let windows = [
            (t - h, t + h),
            (-t - h, -t + h),
            (2.0 * m - h, 2.0 * m + h),
            (2.0 * m - t - h, 2.0 * m - t + h),
        ];
        let h0 = pilot.h;
        let mut breaks = vec![0.0, m];
        for &(a, b) in &windows {
            let (a, b) = (a.max(0.0), b.min(m));
            if a >= b {
                continue;
            }
            breaks.push(a);
            breaks.push(b);
            // pilot knots u = x +- h0, -x +- h0, 2M - x +- h0 falling in [a, b]
            for (sign, shift) in [(1.0, 0.0), (-1.0, 0.0), (-1.0, 2.0 * m)] {
                for d in [-h0, h0] {
                    // u = sign * x + shift + d  =>  x = sign * (u - shift - d)
                    let (x1, x2) = (sign * (a - shift - d), sign * (b - shift - d));
                    let (xlo, xhi) = (x1.min(x2), x1.max(x2));
                    let lo = f.x.partition_point(|&x| x < xlo);
                    let hi = f.x.partition_point(|&x| x <= xhi);
                    for &x in &f.x[lo..hi] {
                        breaks.push(sign * x + shift + d);
                    }
                }
            }
        }
        breaks.retain(|u| (0.0..=m).contains(u));
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let (nodes, weights) = gl7();
        let in_window = |u: f64| windows.iter().any(|&(a, b)| u > a && u < b);
        let mut integral = 0.0;
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            if half <= 0.0 || !in_window(mid) {
                continue;
            }
            let s: f64 = nodes
                .iter()
                .zip(weights)
                .map(|(z, wt)| {
                    let u = mid + half * z;
                    wt * g(u) * dl(u)
                })
                .sum();
            integral += half * s;
        }
        l(m) * g(m) - l(0.0) * g(0.0) - integral
    }
}

fn gl7() -> (&'static [f64], &'static [f64]) {
    use std::sync::OnceLock;
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let r = RULE.get_or_init(|| gauss_legendre(7));
    (&r.0, &r.1)
}

/// Smoothed estimate of `f_hat` at `t` with bandwidth `h` on `[0, upper]`.
pub fn smle_eval(f_hat: &StepDistribution, h: f64, t: f64, upper: f64) -> Result<f64> {
    let smoother = Smoother::new(h, upper)?;
    smoother.eval(&Smoothable::new(f_hat, upper)?, t)
}

/// One bandwidth for all points, or one per grid point.
#[derive(Debug, Clone, PartialEq)]
pub enum Bandwidth {
    Global(f64),
    Local(Vec<f64>),
}

/// Smoothed CDF tabulated on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SmleCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: Bandwidth,
    pub upper: f64,
    /// Kept for exact off-grid evaluation under a global bandwidth.
    source: Option<Smoothable>,
}

impl SmleCurve {
    pub fn new(f_hat: &StepDistribution, bandwidth: Bandwidth, grid: &[f64], upper: f64) -> Result<Self> {
        let f = Smoothable::new(f_hat, upper)?;
        let values = match &bandwidth {
            Bandwidth::Global(h) => {
                let s = Smoother::new(*h, upper)?;
                grid.iter().map(|&t| s.eval(&f, t)).collect::<Result<Vec<_>>>()?
            }
            Bandwidth::Local(hs) => {
                if hs.len() != grid.len() {
                    return Err(Error::invalid("one local bandwidth per grid point required"));
                }
                grid.iter()
                    .zip(hs)
                    .map(|(&t, &h)| Smoother::new(h, upper)?.eval(&f, t))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let source = matches!(bandwidth, Bandwidth::Global(_)).then_some(f);
        Ok(Self {
            grid: grid.to_vec(),
            values,
            bandwidth,
            upper,
            source,
        })
    }

    /// Curve from explicit values, e.g. a known CDF tabulated on a grid.
    pub fn from_values(grid: Vec<f64>, values: Vec<f64>, bandwidth: Bandwidth, upper: f64) -> Result<Self> {
        if grid.len() != values.len() || grid.is_empty() {
            return Err(Error::invalid("grid and values must be nonempty and of equal length"));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("grid must be strictly increasing"));
        }
        Ok(Self {
            grid,
            values,
            bandwidth,
            upper,
            source: None,
        })
    }

    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    /// Interval on which [`Self::value_at`] is informative: `[0, M]` for a
    /// smoothed global-bandwidth curve, the table range otherwise.
    pub fn domain(&self) -> (f64, f64) {
        if self.source.is_some() {
            (0.0, self.upper)
        } else {
            (self.grid[0], *self.grid.last().unwrap())
        }
    }

    /// Value at any `t`: exact for a smoothed global-bandwidth curve, otherwise
    /// linear interpolation of the table, constant beyond its ends.
    pub fn value_at(&self, t: f64) -> f64 {
        if let (Some(f), Bandwidth::Global(h)) = (&self.source, &self.bandwidth) {
            let s = Smoother {
                kernel: KernelSpec::Triweight,
                h: *h,
                upper: self.upper,
            };
            return s.value(f, t);
        }
        let k = self.grid.partition_point(|&g| g <= t);
        if k == 0 {
            return self.values[0];
        }
        if k == self.grid.len() {
            return *self.values.last().unwrap();
        }
        let (x0, x1) = (self.grid[k - 1], self.grid[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        v0 + (v1 - v0) * (t - x0) / (x1 - x0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive_gauss_kronrod;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_step(seed: u64, atoms: usize, upper: f64) -> StepDistribution {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.0..upper)).collect();
        x.sort_by(f64::total_cmp);
        x.dedup();
        let w: Vec<f64> = x.iter().map(|_| rng.random_range(0.1..1.0)).collect();
        let tot: f64 = w.iter().sum();
        StepDistribution::new(x, w.iter().map(|v| v / tot).collect()).unwrap()
    }

    /// Riemann-Stieltjes sum of the boundary-corrected kernel against the step CDF.
    fn oracle(f: &StepDistribution, h: f64, t: f64, m: f64) -> f64 {
        let k = KernelSpec::Triweight;
        let l = |x: f64| {
            k.ik((t - x) / h) - k.ik((-t - x) / h) + 1.0 - k.ik((2.0 * m - t - x) / h)
        };
        f.points().iter().zip(f.masses()).map(|(&x, &p)| p * l(x)).sum::<f64>()
    }

    #[test]
    fn point_mass_examples() {
        let f = StepDistribution::new(vec![1.0], vec![1.0]).unwrap();
        assert_eq!(smle_eval(&f, 0.3, 1.0, 2.0).unwrap(), 0.5);
        assert_eq!(smle_eval(&f, 0.3, 1.3, 2.0).unwrap(), 1.0);
        assert_eq!(smle_eval(&f, 0.3, 1.5, 2.0).unwrap(), 1.0);
        assert_eq!(smle_eval(&f, 0.3, 0.7, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn errors_on_bad_arguments() {
        let f = StepDistribution::new(vec![1.0], vec![1.0]).unwrap();
        assert!(smle_eval(&f, 0.0, 1.0, 2.0).is_err());
        assert!(smle_eval(&f, -1.0, 1.0, 2.0).is_err());
        assert!(smle_eval(&f, 0.3, -0.1, 2.0).is_err());
        assert!(smle_eval(&f, 0.3, 2.1, 2.0).is_err());
        assert!(smle_eval(&f, 0.3, 1.0, 0.5).is_err());
    }

    #[test]
    fn matches_stieltjes_sum_for_ten_atoms() {
        for seed in 0..5 {
            let f = random_step(seed, 10, 2.0);
            for i in 0..=100 {
                let t = 2.0 * i as f64 / 100.0;
                let got = smle_eval(&f, 0.4, t, 2.0).unwrap();
                let want = oracle(&f, 0.4, t, 2.0).clamp(0.0, 1.0);
                let want = if i == 100 { 1.0 } else { want };
                assert!((got - want).abs() < 1e-8, "t={t}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn matches_riemann_sum_of_step_cdf() {
        // interior: int IK_h(t - x) dF(x) = int K_h(t - x) F(x) dx
        let f = random_step(3, 10, 2.0);
        let (h, t) = (0.3, 1.0);
        let n = 4_000_000;
        let dx = 2.0 * h / n as f64;
        let k = KernelSpec::Triweight;
        let riemann: f64 = (0..n)
            .map(|i| {
                let x = t - h + (i as f64 + 0.5) * dx;
                k.k((t - x) / h) / h * f.cdf(x) * dx
            })
            .sum();
        let got = smle_eval(&f, h, t, 2.0).unwrap();
        assert!((got - riemann).abs() < 1e-8, "{got} vs {riemann}");
    }

    #[test]
    fn deficit_is_placed_at_upper_end() {
        let f = StepDistribution::new(vec![0.5], vec![0.6]).unwrap();
        let full = StepDistribution::new(vec![0.5, 2.0], vec![0.6, 0.4]).unwrap();
        for t in [0.1, 0.5, 1.0, 1.7, 1.95] {
            assert_eq!(
                smle_eval(&f, 0.4, t, 2.0).unwrap(),
                smle_eval(&full, 0.4, t, 2.0).unwrap()
            );
        }
    }

    #[test]
    fn density_is_derivative() {
        let f = random_step(9, 15, 2.0);
        let sm = Smoother::new(0.5, 2.0).unwrap();
        let s = Smoothable::new(&f, 2.0).unwrap();
        for i in 1..40 {
            let u = i as f64 * 0.05;
            let eps = 1e-6;
            let fd = (sm.raw(&s, u + eps) - sm.raw(&s, u - eps)) / (2.0 * eps);
            assert!((fd - sm.density(&s, u)).abs() < 1e-6);
        }
    }

    #[test]
    fn centering_matches_density_quadrature() {
        let f = random_step(21, 12, 2.0);
        let s = Smoothable::new(&f, 2.0).unwrap();
        let pilot = Smoother::new(0.6, 2.0).unwrap();
        let k = KernelSpec::Triweight;
        for h in [0.2, 0.45] {
            let sm = Smoother::new(h, 2.0).unwrap();
            for i in 0..=20 {
                let t = i as f64 * 0.1;
                let l = |u: f64| {
                    k.ik((t - u) / h) - k.ik((-t - u) / h) + k.ik((4.0 - u) / h)
                        - k.ik((4.0 - t - u) / h)
                };
                let want = adaptive_gauss_kronrod(
                    &|u| l(u) * pilot.density(&s, u),
                    0.0,
                    2.0,
                    1e-12,
                )
                .unwrap();
                let got = sm.centering(&pilot, &s, t);
                assert!((got - want).abs() < 1e-10, "h={h} t={t}: {got} vs {want}");
            }
        }
    }

    proptest! {
        #[test]
        fn boundary_values_exact_and_monotone(seed in 0u64..10_000, h in 0.05f64..1.5) {
            let f = random_step(seed, 8, 2.0);
            prop_assert_eq!(smle_eval(&f, h, 0.0, 2.0).unwrap(), 0.0);
            prop_assert_eq!(smle_eval(&f, h, 2.0, 2.0).unwrap(), 1.0);
            let grid: Vec<f64> = (0..=200).map(|i| i as f64 * 0.01).collect();
            let c = SmleCurve::new(&f, Bandwidth::Global(h), &grid, 2.0).unwrap();
            prop_assert!(c.is_monotone());
            prop_assert!(c.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
