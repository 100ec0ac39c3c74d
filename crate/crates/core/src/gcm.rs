//! Greatest convex minorant of a cusum diagram and weighted isotonic regression.
//!
//! Both routines use stack-based pooling of adjacent violators, so they run in
//! linear time. Tied abscissas are rejected here; callers merge ties first by
//! summing their weights.

use crate::error::{Error, Result};

/// Cusum diagram: the implicit origin `(0, 0)` followed by the points `(x[i], y[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct CusumDiagram {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl CusumDiagram {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::EmptyDiagram);
        }
        if x.len() != y.len() {
            return Err(Error::invalid(format!(
                "diagram lengths differ: {} abscissas, {} ordinates",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("diagram contains non-finite values"));
        }
        let mut prev = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            if xi <= prev {
                return Err(Error::AbscissaOrder(format!(
                    "x[{i}] = {xi} does not exceed its predecessor {prev}"
                )));
            }
            prev = xi;
        }
        Ok(Self { x, y })
    }

    /// Diagram with `x` = cumulative weights and `y` = cumulative `weight * value`.
    pub fn from_weighted(values: &[f64], weights: &[f64]) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::invalid("values and weights differ in length"));
        }
        let mut x = Vec::with_capacity(values.len());
        let mut y = Vec::with_capacity(values.len());
        let (mut sx, mut sy) = (0.0, 0.0);
        for (&v, &w) in values.iter().zip(weights) {
            sx += w;
            sy += w * v;
            x.push(sx);
            y.push(sy);
        }
        Self::new(x, y)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Left-continuous slopes of a greatest convex minorant, one per diagram point.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeVector(pub Vec<f64>);

impl SlopeVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Ordinates of the minorant itself at the diagram abscissas.
    pub fn minorant(&self, diagram: &CusumDiagram) -> Vec<f64> {
        let mut prev_x = 0.0;
        let mut acc = 0.0;
        self.0
            .iter()
            .zip(diagram.x())
            .map(|(s, &x)| {
                acc += s * (x - prev_x);
                prev_x = x;
                acc
            })
            .collect()
    }
}

#[derive(Clone, Copy)]
struct Block {
    dx: f64,
    dy: f64,
    len: usize,
}

/// Left-continuous slope of the greatest convex minorant at every `x[i]`.
pub fn gcm_slopes(diagram: &CusumDiagram) -> SlopeVector {
    let mut stack: Vec<Block> = Vec::with_capacity(diagram.len());
    let (mut px, mut py) = (0.0, 0.0);
    for (&x, &y) in diagram.x.iter().zip(&diagram.y) {
        let mut cur = Block {
            dx: x - px,
            dy: y - py,
            len: 1,
        };
        px = x;
        py = y;
        // slope(top) > slope(cur), compared without division
        while let Some(top) = stack.last() {
            if top.dy * cur.dx > cur.dy * top.dx {
                cur.dx += top.dx;
                cur.dy += top.dy;
                cur.len += top.len;
                stack.pop();
            } else {
                break;
            }
        }
        stack.push(cur);
    }
    let mut slopes = Vec::with_capacity(diagram.len());
    for b in &stack {
        let s = b.dy / b.dx;
        slopes.extend(std::iter::repeat_n(s, b.len));
    }
    SlopeVector(slopes)
}

/// Weighted least-squares nondecreasing fit of `values`.
pub fn pava_weighted(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if values.len() != weights.len() {
        return Err(Error::invalid("values and weights differ in length"));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::invalid(format!("nonpositive weight {w}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value"));
    }
    // (weighted mean, total weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let (mut mean, mut weight, mut len) = (v, w, 1usize);
        while let Some(&(m, wt, l)) = blocks.last() {
            if m > mean {
                let total = wt + weight;
                mean = (m * wt + mean * weight) / total;
                weight = total;
                len += l;
                blocks.pop();
            } else {
                break;
            }
        }
        blocks.push((mean, weight, len));
    }
    let mut out = Vec::with_capacity(values.len());
    for (m, _, l) in blocks {
        out.extend(std::iter::repeat_n(m, l));
    }
    Ok(out)
}
