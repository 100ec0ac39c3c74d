//! Smoothing kernel and its integral.

use serde::{Deserialize, Serialize};

/// Kernel family. Only the triweight is provided: it has a polynomial
/// integral and two continuous derivatives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelSpec {
    #[default]
    Triweight,
}

impl KernelSpec {
    /// `K(u)`, zero outside `[-1, 1]`.
    #[inline]
    pub fn k(self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let a = 1.0 - u * u;
        35.0 / 32.0 * a * a * a
    }

    /// `IK(u) = int_{-inf}^u K`.
    #[inline]
    pub fn ik(self, u: f64) -> f64 {
        if u <= -1.0 {
            0.0
        } else if u >= 1.0 {
            1.0
        } else {
            let u2 = u * u;
            0.5 + 35.0 / 32.0 * u * (1.0 - u2 + u2 * u2 * (0.6 - u2 / 7.0))
        }
    }

    /// First derivative `K'(u)`.
    #[inline]
    pub fn dk(self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let a = 1.0 - u * u;
        -105.0 / 16.0 * u * a * a
    }

    /// Second derivative `K''(u)`.
    #[inline]
    pub fn d2k(self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        -105.0 / 16.0 * (1.0 - u * u) * (1.0 - 5.0 * u * u)
    }

    /// `int u^2 K(u) du`.
    pub fn second_moment(self) -> f64 {
        1.0 / 9.0
    }

    /// `int K(u)^2 du`.
    pub fn roughness(self) -> f64 {
        350.0 / 429.0
    }
}

/// `(K(u), IK(u))`.
pub fn kernel_eval(spec: KernelSpec, u: f64) -> (f64, f64) {
    (spec.k(u), spec.ik(u))
}
