use serde::Serialize;

use super::{FlowMode, PotentialState};
use crate::spectral::induced_metric_inverse;

/// Sampled extremes of one state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonitorRecord {
    pub t: f64,
    pub min_star_omega: f64,
    pub min_det_s_frak: f64,
    pub min_pair_sum: f64,
    pub min_pair_prod: f64,
    pub max_d2_norm: f64,
    pub max_d3_norm: f64,
    pub max_dudt: f64,
    /// `sup |Dp|` of the periodic part, or `sup |Du|` in the other modes.
    pub grad_sup: f64,
}

pub fn monitors(s: &PotentialState) -> MonitorRecord {
    let mut rec = MonitorRecord {
        t: s.t,
        min_star_omega: f64::INFINITY,
        min_det_s_frak: f64::INFINITY,
        min_pair_sum: f64::INFINITY,
        min_pair_prod: f64::INFINITY,
        max_d2_norm: 0.0,
        max_d3_norm: 0.0,
        max_dudt: 0.0,
        grad_sup: 0.0,
    };
    for sp in s.spectra() {
        rec.min_star_omega = rec.min_star_omega.min(sp.star_omega);
        rec.min_det_s_frak = rec.min_det_s_frak.min(sp.det_s_frak);
        rec.min_pair_sum = rec.min_pair_sum.min(sp.min_pair_sum);
        rec.min_pair_prod = rec.min_pair_prod.min(sp.min_pair_prod);
        rec.max_d2_norm = rec.max_d2_norm.max(sp.slope_sq().sqrt());
    }
    rec.max_dudt = s.rhs().iter().fold(0.0, |m, v| m.max(v.abs()));
    rec.max_d3_norm = d3_norms(s).into_iter().fold(0.0, f64::max);
    rec.grad_sup = gradient_norms(s).into_iter().fold(0.0, f64::max);
    rec
}

/// `|D³u|` at each node where centered differences of the Hessian exist.
pub fn d3_norms(s: &PotentialState) -> Vec<f64> {
    let d = &s.domain;
    let h = d.h();
    let hs = s.hessians();
    match d.mode {
        FlowMode::Periodic => (0..d.node_count())
            .map(|i| {
                let mut sum = 0.0;
                for k in 0..d.n {
                    let p = &hs[d.wrap(i, k, 1)];
                    let q = &hs[d.wrap(i, k, -1)];
                    for a in 0..d.n {
                        for b in 0..d.n {
                            let g = (p.get(a, b) - q.get(a, b)) / (2.0 * h);
                            sum += g * g;
                        }
                    }
                }
                sum.sqrt()
            })
            .collect(),
        FlowMode::Radial => {
            let n = d.n as f64;
            let mut out = vec![0.0];
            for j in 1..d.resolution - 1 {
                let r = j as f64 * h;
                let u3 = (hs[j + 1].get(0, 0) - hs[j - 1].get(0, 0)) / (2.0 * h);
                let tang = if d.n > 1 { (hs[j].get(0, 0) - hs[j].get(1, 1)) / r } else { 0.0 };
                out.push((u3 * u3 + 3.0 * (n - 1.0) * tang * tang).sqrt());
            }
            out
        }
        FlowMode::Line => (2..d.resolution - 1)
            .map(|j| ((hs[j + 1].get(0, 0) - hs[j - 1].get(0, 0)) / (2.0 * h)).abs())
            .collect(),
    }
}

fn gradient_norms(s: &PotentialState) -> Vec<f64> {
    let d = &s.domain;
    let h = d.h();
    let v = s.values();
    match d.mode {
        FlowMode::Periodic => (0..d.node_count())
            .map(|i| {
                (0..d.n)
                    .map(|a| {
                        let g = (v[d.wrap(i, a, 1)] - v[d.wrap(i, a, -1)]) / (2.0 * h);
                        g * g
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect(),
        _ => (1..d.resolution)
            .map(|j| ((v[j + 1] - v[j - 1]) / (2.0 * h)).abs())
            .collect(),
    }
}

/// Largest defect of `∂ₖ(Σ arctan λᵢ) = gⁱʲ u_{ijk}` with both sides from
/// centered differences; `g = (I + (D²u)²)⁻¹`. Radial profiles are checked on
/// `r ≥ R/8`, since the tangential term loses an order near the axis.
pub fn gradient_identity_check(s: &PotentialState) -> f64 {
    let d = &s.domain;
    let h = d.h();
    let hs = s.hessians();
    let rhs = s.rhs();
    let mut worst = 0.0f64;
    match d.mode {
        FlowMode::Periodic => {
            for i in 0..d.node_count() {
                let g = induced_metric_inverse(&hs[i]);
                for k in 0..d.n {
                    let (p, q) = (d.wrap(i, k, 1), d.wrap(i, k, -1));
                    let lhs = (rhs[p] - rhs[q]) / (2.0 * h);
                    let mut contracted = 0.0;
                    for a in 0..d.n {
                        for b in 0..d.n {
                            contracted += g.get(a, b) * (hs[p].get(a, b) - hs[q].get(a, b)) / (2.0 * h);
                        }
                    }
                    worst = worst.max((lhs - contracted).abs());
                }
            }
        }
        FlowMode::Radial => {
            let n = d.n as f64;
            for j in d.resolution.div_ceil(8).max(1)..d.resolution - 1 {
                let r = j as f64 * h;
                let (u2, u1r) = (hs[j].get(0, 0), if d.n > 1 { hs[j].get(1, 1) } else { 0.0 });
                let u3 = (hs[j + 1].get(0, 0) - hs[j - 1].get(0, 0)) / (2.0 * h);
                let mut contracted = u3 / (1.0 + u2 * u2);
                if d.n > 1 {
                    contracted += (n - 1.0) * (u2 - u1r) / r / (1.0 + u1r * u1r);
                }
                let lhs = (rhs[j + 1] - rhs[j - 1]) / (2.0 * h);
                worst = worst.max((lhs - contracted).abs());
            }
        }
        FlowMode::Line => {
            for j in 2..d.resolution - 1 {
                let u2 = hs[j].get(0, 0);
                let u3 = (hs[j + 1].get(0, 0) - hs[j - 1].get(0, 0)) / (2.0 * h);
                let lhs = (rhs[j + 1] - rhs[j - 1]) / (2.0 * h);
                worst = worst.max((lhs - u3 / (1.0 + u2 * u2)).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{step, FlowDomain};
    use crate::spectral::SymMatrix;
    use std::f64::consts::PI;

    fn sine(m: usize, eps: f64) -> PotentialState {
        let d = FlowDomain::periodic(SymMatrix::from_diag(&[0.5]).unwrap(), PI, m).unwrap();
        let v = (0..d.node_count()).map(|i| eps * d.point(i)[0].sin()).collect();
        PotentialState::new(d, v, 0.0).unwrap()
    }

    #[test]
    fn flat_examples() {
        let d = FlowDomain::periodic(SymMatrix::identity(2).unwrap(), 1.0, 16).unwrap();
        let s = PotentialState::new(d, vec![0.0; 256], 0.0).unwrap();
        let r = monitors(&s);
        assert!((r.min_star_omega - 0.5).abs() < 1e-15);
        assert!((r.min_det_s_frak - 1.0).abs() < 1e-15);
        assert_eq!(r.max_d3_norm, 0.0);
        assert_eq!(gradient_identity_check(&s), 0.0);
    }

    #[test]
    fn d3_decays_for_sine() {
        let mut s = sine(64, 0.2);
        let first = monitors(&s).max_d3_norm;
        let dt = s.domain.stability_limit();
        for _ in 0..400 {
            s = step(&s, dt).unwrap();
        }
        assert!(monitors(&s).max_d3_norm < first);
    }

    #[test]
    fn gradient_identity_converges() {
        let r: Vec<f64> = [64, 128, 256].iter().map(|&m| gradient_identity_check(&sine(m, 0.8))).collect();
        for w in r.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.9, "{r:?}");
        }
    }

    #[test]
    fn radial_gradient_identity_converges() {
        let mk = |m: usize| {
            let d = FlowDomain::radial(3, 2.0, m).unwrap();
            let v = (0..d.node_count())
                .map(|i| {
                    let r = d.point(i)[0];
                    0.4 * r * r + 0.3 * (-r * r).exp()
                })
                .collect();
            gradient_identity_check(&PotentialState::new(d, v, 0.0).unwrap())
        };
        let (a, b) = (mk(64), mk(128));
        assert!((a / b).log2() >= 1.9, "{a} {b}");
    }
}
