//! Monotone piecewise-Gaussian basis for the body of the quantile function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// `L` basis functions over equally spaced knots `0 = κ_1 < … < κ_{L+1} = 1`.
///
/// `L = 1` is the Gaussian case `B_1(τ) = Φ⁻¹(τ)`; otherwise `L` must be even
/// so the middle knot sits at 0.5 and every basis function vanishes there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct QuantileBasis {
    count: usize,
    knots: Vec<f64>,
    /// Φ⁻¹ at each knot; ±∞ at the ends.
    knot_z: Vec<f64>,
}

impl QuantileBasis {
    pub fn new(count: usize) -> Result<Self> {
        if !(count == 1 || (count >= 2 && count % 2 == 0)) {
            return Err(Error::input(format!(
                "basis count must be 1 or an even number >= 2, got {count}"
            )));
        }
        let knots: Vec<f64> = (0..=count).map(|i| i as f64 / count as f64).collect();
        let knot_z = knots.iter().map(|&k| normal::quantile_unclamped(k)).collect();
        Ok(Self {
            count,
            knots,
            knot_z,
        })
    }

    pub fn gaussian() -> Self {
        Self::new(1).expect("L = 1 is valid")
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_gaussian(&self) -> bool {
        self.count == 1
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub(crate) fn knot_z(&self) -> &[f64] {
        &self.knot_z
    }

    /// Index `m` of the segment `[κ_m, κ_{m+1})` (0-based) containing `tau`.
    #[inline]
    pub(crate) fn segment_of(&self, tau: f64) -> usize {
        ((tau * self.count as f64).floor() as usize).min(self.count - 1)
    }

    /// B_l(τ) for 0-based `l`, with τ clamped away from 0 and 1.
    pub(crate) fn value0(&self, tau: f64, l: usize) -> f64 {
        let tau = tau.clamp(normal::TAU_CLAMP, 1.0 - normal::TAU_CLAMP);
        if self.count == 1 {
            return normal::quantile(tau);
        }
        let (lo, hi) = (self.knots[l], self.knots[l + 1]);
        let (zlo, zhi) = (self.knot_z[l], self.knot_z[l + 1]);
        if lo < 0.5 {
            if tau < lo {
                zlo - zhi
            } else if tau < hi {
                normal::quantile(tau) - zhi
            } else {
                0.0
            }
        } else if tau < lo {
            0.0
        } else if tau < hi {
            normal::quantile(tau) - zlo
        } else {
            zhi - zlo
        }
    }
}

impl TryFrom<usize> for QuantileBasis {
    type Error = Error;
    fn try_from(count: usize) -> Result<Self> {
        Self::new(count)
    }
}

impl From<QuantileBasis> for usize {
    fn from(b: QuantileBasis) -> usize {
        b.count
    }
}

/// B_l(τ) with a 1-based basis index `l ∈ 1..=L`.
pub fn basis_value(tau: f64, l: usize, basis: &QuantileBasis) -> Result<f64> {
    if l == 0 || l > basis.len() {
        return Err(Error::input(format!(
            "basis index {l} outside 1..={}",
            basis.len()
        )));
    }
    Ok(basis.value0(tau, l - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert!(QuantileBasis::new(0).is_err());
        assert!(QuantileBasis::new(3).is_err());
        assert!(QuantileBasis::new(4).is_ok());
        assert_eq!(QuantileBasis::new(4).unwrap().knots(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn examples() {
        let g = QuantileBasis::gaussian();
        assert_eq!(basis_value(0.5, 1, &g).unwrap(), 0.0);
        let b4 = QuantileBasis::new(4).unwrap();
        assert_eq!(basis_value(0.3, 3, &b4).unwrap(), 0.0);
        assert_eq!(basis_value(0.9, 2, &b4).unwrap(), 0.0);
        assert!(basis_value(0.3, 0, &b4).is_err());
        assert!(basis_value(0.3, 5, &b4).is_err());
    }

    #[test]
    fn all_vanish_at_median() {
        for l in [2, 4, 6, 8] {
            let b = QuantileBasis::new(l).unwrap();
            for i in 1..=l {
                assert_eq!(basis_value(0.5, i, &b).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn sum_telescopes_to_probit() {
        let b = QuantileBasis::new(6).unwrap();
        for i in 1..100 {
            let tau = i as f64 / 100.0;
            let s: f64 = (1..=6).map(|l| basis_value(tau, l, &b).unwrap()).sum();
            assert!((s - normal::quantile(tau)).abs() < 1e-12);
        }
    }

    #[test]
    fn each_basis_is_nondecreasing() {
        let b = QuantileBasis::new(4).unwrap();
        for l in 1..=4 {
            let mut prev = f64::NEG_INFINITY;
            for i in 1..1000 {
                let v = basis_value(i as f64 / 1000.0, l, &b).unwrap();
                assert!(v >= prev);
                prev = v;
            }
        }
    }
}
