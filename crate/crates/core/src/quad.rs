//! Numerical quadrature: Gauss-Legendre rules, adaptive Gauss-Kronrod, trapezoid.

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Fixed Gauss-Legendre rule applied on consecutive panels between `breaks`.
pub struct PanelRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl PanelRule {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Self { nodes, weights }
    }

    pub fn integrate(&self, f: &impl Fn(f64) -> f64, breaks: &[f64]) -> f64 {
        let mut total = 0.0;
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            let s: f64 = self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(x, wt)| wt * f(mid + half * x))
                .sum();
            total += half * s;
        }
        total
    }
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive 15-point Gauss-Kronrod quadrature to absolute tolerance `tol`.
pub fn adaptive_gauss_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("quadrature limits must be finite"));
    }
    let mut intervals = vec![{
        let (v, e) = gk15(f, lo, hi);
        (lo, hi, v, e)
    }];
    for _ in 0..5000 {
        let err: f64 = intervals.iter().map(|i| i.3).sum();
        if err <= tol {
            let v: f64 = intervals.iter().map(|i| i.2).sum();
            if !v.is_finite() {
                return Err(Error::Numerical("non-finite integrand".into()));
            }
            return Ok(sign * v);
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(k, _)| k)
            .unwrap();
        let (l, r, _, _) = intervals.swap_remove(worst);
        let m = 0.5 * (l + r);
        if m <= l || m >= r {
            break;
        }
        let (v1, e1) = gk15(f, l, m);
        let (v2, e2) = gk15(f, m, r);
        intervals.push((l, m, v1, e1));
        intervals.push((m, r, v2, e2));
    }
    let err: f64 = intervals.iter().map(|i| i.3).sum();
    Err(Error::Numerical(format!(
        "adaptive quadrature did not reach tolerance {tol:.1e} (estimate {err:.1e})"
    )))
}

/// Adaptive quadrature over consecutive panels, `tol` split evenly.
pub fn adaptive_on_breaks(f: &impl Fn(f64) -> f64, breaks: &[f64], tol: f64) -> Result<f64> {
    let panels = breaks.len().saturating_sub(1).max(1) as f64;
    let mut total = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            total += adaptive_gauss_kronrod(f, w[0], w[1], tol / panels)?;
        }
    }
    Ok(total)
}

/// Trapezoid rule for samples on a uniform grid with spacing `dx`.
pub fn trapezoid_uniform(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dx * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}
