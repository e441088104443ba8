//! Invariant cone of the strictly two-convex region in the eigenvalue plane.
//!
//! `Q(δ₁,δ₂) = {(x,y) : 1+xy ≥ δ₁, x+y ≥ δ₂}` is invariant under translation
//! by `C_τ = {(x,y) : x ≥ 0, x/τ ≤ y ≤ τx}` where `τ = −y₀/x₀` and `(x₀,y₀)`
//! is the corner of `Q` in the second quadrant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConeSolution {
    pub delta1: f64,
    pub delta2: f64,
    pub x0: f64,
    pub y0: f64,
    pub tau: f64,
}

impl ConeSolution {
    /// Smallest constraint margin of `p` with respect to `Q(δ₁,δ₂)`.
    pub fn region_margin(&self, p: (f64, f64)) -> f64 {
        let prod = 1.0 + p.0 * p.1 - self.delta1;
        let sum = p.0 + p.1 - self.delta2;
        prod.min(sum)
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        self.region_margin(p) >= 0.0
    }
}

/// Corner point and cone slope for `δ₁ ∈ (0,1)`, `δ₂ > 0`.
///
/// The corner solves `x + y = δ₂`, `xy = δ₁ − 1`, i.e. the roots of
/// `z² − δ₂z + (δ₁−1)`; the negative root is taken from the product of roots
/// to avoid cancellation.
pub fn cone_slope(delta1: f64, delta2: f64) -> Result<ConeSolution> {
    if !(delta1 > 0.0 && delta1 < 1.0) {
        return Err(Error::invalid(format!("delta1 = {delta1} must lie in (0,1)")));
    }
    if !(delta2 > 0.0 && delta2.is_finite()) {
        return Err(Error::invalid(format!("delta2 = {delta2} must be positive")));
    }
    let disc = delta2 * delta2 + 4.0 * (1.0 - delta1);
    let y0 = 0.5 * (delta2 + disc.sqrt());
    let x0 = (delta1 - 1.0) / y0;
    Ok(ConeSolution {
        delta1,
        delta2,
        x0,
        y0,
        tau: -y0 / x0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub tau_tested: f64,
    pub samples: usize,
    pub violations: usize,
    /// Smallest region margin of `q + c` over all samples.
    pub worst_margin: f64,
}

pub fn cone_invariance_check(c: &ConeSolution, samples: usize, seed: u64) -> InvarianceReport {
    cone_invariance_check_with_tau(c, c.tau, samples, seed)
}

/// Samples `q ∈ Q` and `c ∈ C_tau` and counts translates leaving `Q`.
///
/// A third of the `q` draws lie on the hyperbolic boundary arcs, a third on
/// the segment of `x+y = δ₂` between the corners, and the rest fill a box.
/// Translations have log-uniform magnitude so that small moves near the
/// corner are exercised.
pub fn cone_invariance_check_with_tau(
    c: &ConeSolution,
    tau: f64,
    samples: usize,
    seed: u64,
) -> InvarianceReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let big = 10.0 * c.y0.max(1.0);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for i in 0..samples {
        let q = match i % 3 {
            0 => {
                // hyperbola 1+xy = δ₁ from the corner outwards, either branch
                let x_far = (c.delta1 - 1.0) / big;
                let x = c.x0 + (x_far - c.x0) * rng.random::<f64>();
                let y = (c.delta1 - 1.0) / x;
                if rng.random::<bool>() { (x, y) } else { (y, x) }
            }
            1 => {
                let x = c.x0 + (c.y0 - c.x0) * rng.random::<f64>();
                (x, c.delta2 - x)
            }
            _ => loop {
                let p = (
                    c.x0 + (big - c.x0) * rng.random::<f64>(),
                    c.x0 + (big - c.x0) * rng.random::<f64>(),
                );
                if c.contains(p) {
                    break p;
                }
            },
        };
        let mag = (1e-6f64).ln() + (big.ln() - (1e-6f64).ln()) * rng.random::<f64>();
        let u = mag.exp();
        let slope = match rng.random_range(0..8) {
            0 => tau,
            1 => 1.0 / tau,
            _ => 1.0 / tau + (tau - 1.0 / tau) * rng.random::<f64>(),
        };
        let t = (q.0 + u, q.1 + u * slope);
        let m = c.region_margin(t);
        worst = worst.min(m);
        let scale = 1.0 + t.0.abs() * t.1.abs() + t.0.abs() + t.1.abs();
        if m < -1e-12 * scale {
            violations += 1;
        }
    }
    InvarianceReport {
        tau_tested: tau,
        samples,
        violations,
        worst_margin: worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_half_gives_tau_two() {
        let c = cone_slope(0.5, 0.5).unwrap();
        assert!((c.x0 + 0.5).abs() < 1e-15);
        assert!((c.y0 - 1.0).abs() < 1e-15);
        assert!((c.tau - 2.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_family() {
        for &d in &[0.1, 0.5, 0.9] {
            let c = cone_slope(d, d).unwrap();
            assert!((c.x0 - (d - 1.0)).abs() < 1e-14);
            assert!((c.y0 - 1.0).abs() < 1e-14);
            assert!((c.tau - 1.0 / (1.0 - d)).abs() < 1e-11);
        }
        assert!((cone_slope(0.9, 0.9).unwrap().tau - 10.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_map_round_trip() {
        let c = cone_slope(0.3, 2.5).unwrap();
        assert!((1.0 + c.x0 * c.y0 - 0.3).abs() < 1e-12);
        assert!((c.x0 + c.y0 - 2.5).abs() < 1e-12);
        assert!(-1.0 < c.x0 && c.x0 < 0.0 && c.y0 > 0.0 && c.tau > 1.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(cone_slope(0.0, 1.0).is_err());
        assert!(cone_slope(1.0, 1.0).is_err());
        assert!(cone_slope(0.5, 0.0).is_err());
    }

    #[test]
    fn invariance_and_negative_control() {
        let c = cone_slope(0.5, 0.5).unwrap();
        let r = cone_invariance_check(&c, 20_000, 3);
        assert_eq!(r.violations, 0);

        let c = cone_slope(0.9, 0.9).unwrap();
        let bad = cone_invariance_check_with_tau(&c, 3.0 * c.tau, 20_000, 3);
        assert!(bad.violations > 0);

        // explicit witness: corner plus a steep translation
        let eps = 1e-3;
        let t = (c.x0 + eps, c.y0 + 3.0 * c.tau * eps);
        assert!(c.region_margin(t) < 0.0);
    }

    #[test]
    fn apex_translation_is_identity() {
        let c = cone_slope(0.2, 0.7).unwrap();
        let q = (c.x0, c.y0);
        assert!(c.region_margin((q.0 + 0.0, q.1 + 0.0)).abs() < 1e-12);
    }
}
