//! Mollification of sampled potentials and the booster-plus-smoothing
//! pipeline that turns rough two-convex data into smooth data with
//! quantified lower bounds on `*Ω` and `det𝔖`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{SampledField, MAX_FIELD_DIM};
use crate::geometry::{cone_slope, Booster, BoosterKind};
use crate::spectral::{eigen_sym, two_convexity, Spectrum, SymMatrix};

/// Largest radius tried by [`select_sigma`].
pub const SIGMA_START: f64 = 0.5;

const RADIAL_QUAD_CELLS: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MollifierSpec {
    pub sigma: f64,
    pub n: usize,
}

impl MollifierSpec {
    pub fn new(sigma: f64, n: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma = {sigma} must be positive")));
        }
        if n == 0 || n > MAX_FIELD_DIM {
            return Err(Error::invalid(format!("mollifier dimension {n} outside 1..={MAX_FIELD_DIM}")));
        }
        Ok(MollifierSpec { sigma, n })
    }

    /// `C` with `∫ C exp(1/(|y|²−1)) dy = 1` over the unit ball.
    pub fn normalization(&self) -> f64 {
        let area = match self.n {
            1 => 2.0,
            2 => 2.0 * std::f64::consts::PI,
            _ => 4.0 * std::f64::consts::PI,
        };
        let m = RADIAL_QUAD_CELLS;
        let h = 1.0 / m as f64;
        let g = |s: f64| if s < 1.0 { s.powi(self.n as i32 - 1) * (1.0 / (s * s - 1.0)).exp() } else { 0.0 };
        let mut sum = g(0.0) + g(1.0);
        for i in 1..m {
            sum += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
        }
        1.0 / (area * sum * h / 3.0)
    }
}

/// `C σ^{-n} exp(1/(|x/σ|²−1))` inside the ball, zero outside.
pub fn mollifier_kernel(spec: &MollifierSpec, x: &[f64]) -> f64 {
    spec.normalization() * spec.sigma.powi(-(spec.n as i32)) * bump(spec, x)
}

fn bump(spec: &MollifierSpec, x: &[f64]) -> f64 {
    let s2 = x.iter().map(|v| v * v).sum::<f64>() / (spec.sigma * spec.sigma);
    if s2 >= 1.0 {
        return 0.0;
    }
    (1.0 / (s2 - 1.0)).exp()
}

/// Discrete kernel on a grid of spacing `h`, weights summing to one.
#[derive(Clone, Debug)]
pub struct Mollifier {
    pub spec: MollifierSpec,
    pub h: f64,
    /// Largest offset along any axis, in nodes.
    pub reach: usize,
    offsets: Vec<[isize; MAX_FIELD_DIM]>,
    weights: Vec<f64>,
}

impl Mollifier {
    pub fn new(spec: MollifierSpec, h: f64) -> Result<Self> {
        if !(spec.sigma >= 2.0 * h) {
            return Err(Error::Resolution(format!(
                "sigma = {} is below twice the spacing {h}",
                spec.sigma
            )));
        }
        let reach = (spec.sigma / h).ceil() as isize;
        let n = spec.n;
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let side = 2 * reach + 1;
        for lin in 0..side.pow(n as u32) {
            let mut o = [0isize; MAX_FIELD_DIM];
            let mut rest = lin;
            for a in (0..n).rev() {
                o[a] = rest % side - reach;
                rest /= side;
            }
            let x: Vec<f64> = o[..n].iter().map(|&v| v as f64 * h).collect();
            let w = bump(&spec, &x);
            if w > 0.0 {
                offsets.push(o);
                weights.push(w);
            }
        }
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        let reach = offsets
            .iter()
            .flat_map(|o| o[..n].iter().map(|v| v.unsigned_abs()))
            .max()
            .unwrap_or(0);
        Ok(Mollifier {
            spec,
            h,
            reach,
            offsets,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ w h^n` of the unnormalized kernel, a quadrature of its unit mass.
    pub fn continuous_mass(&self) -> f64 {
        let n = self.spec.n;
        let mut total = 0.0;
        for o in &self.offsets {
            let x: Vec<f64> = o[..n].iter().map(|&v| v as f64 * self.h).collect();
            total += bump(&self.spec, &x);
        }
        let c = self.spec.normalization() * self.spec.sigma.powi(-(n as i32));
        c * total * self.h.powi(n as i32)
    }
}

/// Discrete convolution `η_σ * u`. The result covers the nodes whose kernel
/// support lies inside the input box; Hessians are convolved alongside the
/// values when present.
pub fn mollify(u: &SampledField, spec: &MollifierSpec) -> Result<SampledField> {
    if spec.n != u.dim() {
        return Err(Error::invalid("mollifier and field dimensions differ"));
    }
    let m = Mollifier::new(*spec, u.h())?;
    mollify_with(u, &m)
}

pub fn mollify_with(u: &SampledField, m: &Mollifier) -> Result<SampledField> {
    let dim = u.dim();
    let mut out = u.shrink(m.reach)?;
    let strides: Vec<isize> = (0..dim)
        .map(|a| u.shape()[a + 1..].iter().product::<usize>() as isize)
        .collect();
    let lin_offsets: Vec<isize> = m
        .offsets
        .iter()
        .map(|o| (0..dim).map(|a| o[a] * strides[a]).sum())
        .collect();
    let centers: Vec<usize> = (0..out.len())
        .map(|i| {
            let mut idx = out.multi_index(i);
            for v in idx.iter_mut().take(dim) {
                *v += m.reach;
            }
            u.linear_index(&idx[..dim])
        })
        .collect();
    let src = u.values();
    let values: Vec<f64> = centers
        .par_iter()
        .map(|&c| {
            lin_offsets
                .iter()
                .zip(&m.weights)
                .map(|(&o, &w)| w * src[(c as isize + o) as usize])
                .sum()
        })
        .collect();
    let hessians = u.hessians().map(|hs| {
        centers
            .par_iter()
            .map(|&c| {
                let mut acc = [0.0; 6];
                for (&o, &w) in lin_offsets.iter().zip(&m.weights) {
                    let hm = &hs[(c as isize + o) as usize];
                    let mut k = 0;
                    for a in 0..dim {
                        for b in a..dim {
                            acc[k] += w * hm.get(a, b);
                            k += 1;
                        }
                    }
                }
                let mut k = 0;
                let mut mat = SymMatrix::zeros_unchecked(dim);
                for a in 0..dim {
                    for b in a..dim {
                        mat.set(a, b, acc[k]);
                        k += 1;
                    }
                }
                mat
            })
            .collect::<Vec<_>>()
    });
    out = SampledField::new(out.lower(), out.shape(), out.h(), values)?;
    if let Some(hs) = hessians {
        out = out.with_hessians(hs)?;
    }
    Ok(out)
}

/// Lower bounds the smoothed data must meet inside `B_{k+1}` and the
/// eigenvalue box `[δ₃, 1/δ₃]` required outside it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SigmaTargets {
    /// Minimum of `*Ω` of the unsmoothed data over `B_{k+1}`.
    pub eps1p: f64,
    pub eps2p: f64,
    /// Floor of `*Ω` over the eigenvalue box.
    pub eps1pp: f64,
    pub eps2pp: f64,
    pub delta3: f64,
}

impl SigmaTargets {
    pub fn star_omega_floor(&self) -> f64 {
        (0.5 * self.eps1p).min(self.eps1pp)
    }
    pub fn det_floor(&self) -> f64 {
        (0.5 * self.eps2p).min(self.eps2pp)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigmaTrial {
    pub sigma: f64,
    pub inner_nodes: usize,
    pub outer_nodes: usize,
    pub min_star_omega_inner: f64,
    pub min_det_s_frak_inner: f64,
    pub min_pair_margin_inner: f64,
    /// Smallest distance of an outer eigenvalue inside `[δ₃, 1/δ₃]`
    /// (negative when outside).
    pub box_margin_outer: f64,
    pub worst_node: Vec<f64>,
    pub qualifies: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SigmaSelection {
    pub sigma: f64,
    pub trace: Vec<SigmaTrial>,
    #[serde(skip)]
    pub field: SampledField,
}

/// `ε″` floors of `*Ω` and `det𝔖` over symmetric matrices with spectrum in
/// `[δ₃, 1/δ₃]`, found by scanning the eigenvalue box.
pub fn eps_double_prime(n: usize, delta3: f64) -> Result<(f64, f64)> {
    if !(delta3 > 0.0 && delta3 <= 1.0) {
        return Err(Error::invalid(format!("delta3 = {delta3} must lie in (0,1]")));
    }
    let m = 256;
    let lo = delta3.ln();
    let hi = -lo;
    let grid: Vec<f64> = (0..=m).map(|i| (lo + (hi - lo) * i as f64 / m as f64).exp()).collect();
    let star = grid.iter().map(|l| (1.0 + l * l).powf(-0.5)).fold(f64::INFINITY, f64::min);
    let mut pair = f64::INFINITY;
    for &a in &grid {
        for &b in &grid {
            pair = pair.min((a + b) * (1.0 + a * b) / ((1.0 + a * a) * (1.0 + b * b)));
        }
    }
    let pairs = (n * (n - 1) / 2) as i32;
    Ok((star.powi(n as i32), pair.powi(pairs)))
}

struct NodeCheck {
    inner: bool,
    spectrum: Spectrum,
    x: [f64; MAX_FIELD_DIM],
}

/// Tries `σ = 1/2, 1/4, …` and returns the first (largest) radius whose
/// smoothing of `w` meets the targets on every reported node.
pub fn select_sigma(w: &SampledField, k: f64, targets: &SigmaTargets) -> Result<SigmaSelection> {
    if w.hessians().is_none() {
        return Err(Error::invalid("select_sigma needs Hessians on the field"));
    }
    let radius = k + 1.0;
    let mut trace = Vec::new();
    let mut sigma = SIGMA_START;
    while sigma >= 2.0 * w.h() {
        let spec = MollifierSpec::new(sigma, w.dim())?;
        let smoothed = mollify(w, &spec)?;
        let trial = judge(&smoothed, sigma, radius, targets)?;
        let ok = trial.qualifies;
        trace.push(trial);
        if ok {
            return Ok(SigmaSelection {
                sigma,
                trace,
                field: smoothed,
            });
        }
        sigma *= 0.5;
    }
    let detail = trace
        .iter()
        .map(|t| {
            format!(
                "sigma={}: min*Ω={:.3e} mindet={:.3e} pair={:.3e} box={:.3e} at {:?}",
                t.sigma,
                t.min_star_omega_inner,
                t.min_det_s_frak_inner,
                t.min_pair_margin_inner,
                t.box_margin_outer,
                t.worst_node
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    Err(Error::SigmaSearch(format!(
        "targets *Ω ≥ {:.3e}, det ≥ {:.3e}, box [{:.3e}, {:.3e}]; {detail}",
        targets.star_omega_floor(),
        targets.det_floor(),
        targets.delta3,
        1.0 / targets.delta3
    )))
}

fn judge(f: &SampledField, sigma: f64, radius: f64, t: &SigmaTargets) -> Result<SigmaTrial> {
    let hs = f.hessians().expect("checked by caller");
    let checks: Vec<NodeCheck> = (0..f.len())
        .into_par_iter()
        .map(|i| {
            let x = f.point(i);
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            eigen_sym(&hs[i]).map(|spectrum| NodeCheck {
                inner: r < radius,
                spectrum,
                x,
            })
        })
        .collect::<Result<_>>()?;
    let mut trial = SigmaTrial {
        sigma,
        inner_nodes: 0,
        outer_nodes: 0,
        min_star_omega_inner: f64::INFINITY,
        min_det_s_frak_inner: f64::INFINITY,
        min_pair_margin_inner: f64::INFINITY,
        box_margin_outer: f64::INFINITY,
        worst_node: Vec::new(),
        qualifies: false,
    };
    let mut worst = f64::INFINITY;
    for c in &checks {
        let s = &c.spectrum;
        let score = if c.inner {
            trial.inner_nodes += 1;
            trial.min_star_omega_inner = trial.min_star_omega_inner.min(s.star_omega);
            trial.min_det_s_frak_inner = trial.min_det_s_frak_inner.min(s.det_s_frak);
            let cv = two_convexity(s, true);
            let pm = cv.pair_sum_margin.min(cv.pair_prod_margin);
            trial.min_pair_margin_inner = trial.min_pair_margin_inner.min(pm);
            (s.star_omega - t.star_omega_floor())
                .min(s.det_s_frak - t.det_floor())
                .min(pm)
        } else {
            trial.outer_nodes += 1;
            let l = s.lambdas();
            let m = (l[0] - t.delta3).min(1.0 / t.delta3 - l[l.len() - 1]);
            trial.box_margin_outer = trial.box_margin_outer.min(m);
            m
        };
        if score < worst {
            worst = score;
            trial.worst_node = c.x[..f.dim()].to_vec();
        }
    }
    trial.qualifies = worst >= 0.0 && trial.inner_nodes > 0;
    Ok(trial)
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularizationReport {
    pub eps1: f64,
    pub eps2: f64,
    pub k: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub tau: f64,
    pub delta3: f64,
    pub targets: SigmaTargets,
    pub sigma: f64,
    pub trace: Vec<SigmaTrial>,
    pub max_slope_sq: f64,
    pub slope_sq_bound: f64,
    pub strictly_2convex: bool,
}

#[derive(Clone, Debug)]
pub struct Regularized {
    pub field: SampledField,
    pub report: RegularizationReport,
}

/// Cone parameters `(δ₁, δ₂)` derived from `(ε₁, ε₂)`.
pub fn cone_deltas(eps1: f64, eps2: f64) -> (f64, f64) {
    let inv_sq = eps1.powi(-2);
    let d1 = (eps2 / (2.0 * (inv_sq - 1.0)).sqrt()).min(eps2);
    let d2 = 2.0 * eps2 / (inv_sq + 1.0);
    (d1, d2)
}

/// Adds the outer booster `F_k` to `u0` and mollifies with the radius chosen
/// by [`select_sigma`]. Without Hessians on `u0` they are taken from centered
/// differences, which drops one node per side.
pub fn regularize_initial(u0: &SampledField, eps1: f64, eps2: f64, k: f64) -> Result<Regularized> {
    if !(eps1 > 0.0 && eps1 < 1.0) || !(eps2 > 0.0 && eps2 <= 1.0) {
        return Err(Error::invalid("eps1 must lie in (0,1) and eps2 in (0,1]"));
    }
    let u0 = match u0.hessians() {
        Some(_) => u0.clone(),
        None => u0.fd_hessian()?,
    };
    let n = u0.dim();
    let hs = u0.hessians().expect("present");
    for (i, m) in hs.iter().enumerate() {
        let s = eigen_sym(m)?;
        if s.star_omega < eps1 || s.det_s_frak < eps2 || !two_convexity(&s, false).is_2convex {
            return Err(Error::invalid(format!(
                "initial data violates the eps bounds at {:?}: *Ω = {}, det = {}",
                &u0.point(i)[..n],
                s.star_omega,
                s.det_s_frak
            )));
        }
    }
    let (delta1, delta2) = cone_deltas(eps1, eps2);
    let cone = cone_slope(delta1, delta2)?;
    let tau = cone.tau;
    let booster = Booster::new(BoosterKind::Outer, k, tau, crate::geometry::booster::DEFAULT_THETA)?;
    let slope_sq_bound = 2.0 * (eps1.powi(-2) - 1.0 + n as f64 * tau * tau);
    let big_lambda = slope_sq_bound.sqrt();
    let delta3 = (1.0 + cone.x0).min(1.0 / (1.0 + big_lambda));

    let mut values = u0.values().to_vec();
    let mut w_hs = Vec::with_capacity(u0.len());
    for (i, v) in values.iter_mut().enumerate() {
        let x = &u0.point(i)[..n];
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        *v += booster.value(r);
        w_hs.push(hs[i].add(&booster.hessian_at(x)));
    }
    let w = SampledField::new(u0.lower(), u0.shape(), u0.h(), values)?.with_hessians(w_hs)?;

    let radius = k + 1.0;
    let mut eps1p = f64::INFINITY;
    let mut eps2p = f64::INFINITY;
    for (i, m) in w.hessians().expect("set above").iter().enumerate() {
        let x = w.point(i);
        if x.iter().map(|c| c * c).sum::<f64>().sqrt() < radius {
            let s = eigen_sym(m)?;
            eps1p = eps1p.min(s.star_omega);
            eps2p = eps2p.min(s.det_s_frak);
        }
    }
    if !eps1p.is_finite() {
        return Err(Error::invalid("sampled box misses the ball B_{k+1}"));
    }
    let (eps1pp, eps2pp) = eps_double_prime(n, delta3)?;
    let targets = SigmaTargets {
        eps1p,
        eps2p,
        eps1pp,
        eps2pp,
        delta3,
    };
    let sel = select_sigma(&w, k, &targets)?;
    let mut max_slope_sq = 0.0f64;
    let mut strict = true;
    for m in sel.field.hessians().expect("mollified Hessians") {
        let s = eigen_sym(m)?;
        max_slope_sq = max_slope_sq.max(s.slope_sq());
        strict &= two_convexity(&s, true).is_2convex;
    }
    Ok(Regularized {
        field: sel.field,
        report: RegularizationReport {
            eps1,
            eps2,
            k,
            delta1,
            delta2,
            tau,
            delta3,
            targets,
            sigma: sel.sigma,
            trace: sel.trace,
            max_slope_sq,
            slope_sq_bound,
            strictly_2convex: strict,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_support_and_peak() {
        let spec = MollifierSpec::new(0.5, 2).unwrap();
        assert_eq!(mollifier_kernel(&spec, &[0.5, 0.0]), 0.0);
        assert_eq!(mollifier_kernel(&spec, &[0.4, 0.4]), 0.0);
        let peak = spec.normalization() * 0.5f64.powi(-2) * (-1.0f64).exp();
        assert!((mollifier_kernel(&spec, &[0.0, 0.0]) - peak).abs() < 1e-14 * peak);
    }

    #[test]
    fn kernel_mass_is_one() {
        for n in 1..=3 {
            let h = if n == 3 { 0.015 } else { 0.01 };
            let m = Mollifier::new(MollifierSpec::new(0.3, n).unwrap(), h).unwrap();
            assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((m.continuous_mass() - 1.0).abs() < 1e-6, "n={n}: {}", m.continuous_mass());
        }
    }

    #[test]
    fn under_resolved_kernel_is_rejected() {
        let f = SampledField::centered_box(1, 1.0, 0.1, |x| x[0]).unwrap();
        let spec = MollifierSpec::new(0.15, 1).unwrap();
        assert!(matches!(mollify(&f, &spec), Err(Error::Resolution(_))));
    }

    #[test]
    fn constants_linears_and_quadratics_survive() {
        let a = SymMatrix::from_rows(&[vec![1.0, 0.3], vec![0.3, -0.4]]).unwrap();
        let f = SampledField::centered_box(2, 1.5, 0.05, |x| {
            2.0 + 0.7 * x[0] - x[1] + 0.5 * (a.get(0, 0) * x[0] * x[0] + 2.0 * a.get(0, 1) * x[0] * x[1] + a.get(1, 1) * x[1] * x[1])
        })
        .unwrap()
        .with_hessian_fn(|_| a)
        .unwrap();
        let g = mollify(&f, &MollifierSpec::new(0.4, 2).unwrap()).unwrap();
        for m in g.hessians().unwrap() {
            for i in 0..2 {
                for j in 0..2 {
                    assert!((m.get(i, j) - a.get(i, j)).abs() < 1e-12);
                }
            }
        }
        let fd = g.fd_hessian().unwrap();
        for m in fd.hessians().unwrap() {
            assert!((m.get(0, 1) - 0.3).abs() < 1e-8);
            assert!((m.get(1, 1) + 0.4).abs() < 1e-8);
        }

        let lin = SampledField::centered_box(1, 1.0, 0.01, |x| 3.0 - 2.0 * x[0]).unwrap();
        let g = mollify(&lin, &MollifierSpec::new(0.2, 1).unwrap()).unwrap();
        for i in 0..g.len() {
            let x = g.point(i)[0];
            assert!((g.values()[i] - (3.0 - 2.0 * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn hessian_commutes_with_mollification() {
        let f = SampledField::centered_box(2, 1.5, 0.025, |x| (2.0 * x[0]).sin() * x[1].cos())
            .unwrap()
            .with_hessian_fn(|x| {
                let (s, c) = ((2.0 * x[0]).sin(), x[1].cos());
                let (c2, s1) = ((2.0 * x[0]).cos(), x[1].sin());
                SymMatrix::from_rows(&[vec![-4.0 * s * c, -2.0 * c2 * s1], vec![-2.0 * c2 * s1, -s * c]]).unwrap()
            })
            .unwrap();
        let g = mollify(&f, &MollifierSpec::new(0.2, 2).unwrap()).unwrap();
        let fd = g.fd_hessian().unwrap();
        let conv = g.shrink(1).unwrap();
        let mut worst = 0.0f64;
        for (a, b) in fd.hessians().unwrap().iter().zip(conv.hessians().unwrap()) {
            for i in 0..2 {
                for j in 0..2 {
                    worst = worst.max((a.get(i, j) - b.get(i, j)).abs());
                }
            }
        }
        assert!(worst < 2e-3, "{worst}");
    }

    #[test]
    fn mollification_never_raises_sup_norm() {
        let f = SampledField::centered_box(1, 2.0, 0.01, |x| (7.0 * x[0]).sin().signum()).unwrap();
        let g = mollify(&f, &MollifierSpec::new(0.1, 1).unwrap()).unwrap();
        assert!(g.sup_norm() <= f.sup_norm() + 1e-15);
    }

    #[test]
    fn eps_double_prime_closed_form() {
        for &d in &[0.1, 0.3, 0.9] {
            for n in 1..=3 {
                let (a, b) = eps_double_prime(n, d).unwrap();
                assert!((a - (1.0 + d.powi(-2)).powf(-(n as f64) / 2.0)).abs() < 1e-12);
                let pair = 2.0 * d / (1.0 + d * d);
                assert!((b - pair.powi((n * (n - 1) / 2) as i32)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadratic_pipeline() {
        let u0 = SampledField::centered_box(2, 5.0, 0.1, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]))
            .unwrap()
            .with_hessian_fn(|_| SymMatrix::identity(2).unwrap())
            .unwrap();
        let out = regularize_initial(&u0, 0.49, 0.99, 3.0).unwrap();
        let rep = &out.report;
        assert_eq!(rep.sigma, SIGMA_START);
        assert!(rep.strictly_2convex);
        assert!(rep.max_slope_sq <= rep.slope_sq_bound);
        for m in out.field.hessians().unwrap() {
            let s = eigen_sym(m).unwrap();
            assert!(s.lambdas()[0] >= 1.0 - 1e-12);
            assert!(s.lambdas()[1] <= 1.0 + rep.tau + 1e-9);
        }
    }

    #[test]
    fn impossible_targets_fail_with_report() {
        let w = SampledField::centered_box(1, 4.0, 0.1, |x| 0.5 * x[0] * x[0])
            .unwrap()
            .with_hessian_fn(|_| SymMatrix::identity(1).unwrap())
            .unwrap();
        let t = SigmaTargets {
            eps1p: 2.0,
            eps2p: 2.0,
            eps1pp: 1.0,
            eps2pp: 1.0,
            delta3: 0.5,
        };
        match select_sigma(&w, 1.0, &t) {
            Err(Error::SigmaSearch(msg)) => assert!(msg.contains("sigma=0.5")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn locality_across_k() {
        let mk = |k: f64| {
            let u0 = SampledField::centered_box(1, 10.0, 0.05, |x| 0.3 * x[0] * x[0])
                .unwrap()
                .with_hessian_fn(|_| SymMatrix::from_diag(&[0.6]).unwrap())
                .unwrap();
            regularize_initial(&u0, 0.8, 0.5, k).unwrap()
        };
        let a = mk(4.0);
        let b = mk(8.0);
        let ba = Booster::new(BoosterKind::Outer, 4.0, a.report.tau, 0.05).unwrap();
        let bb = Booster::new(BoosterKind::Outer, 8.0, b.report.tau, 0.05).unwrap();
        let r = 1.0;
        let mut gap = 0.0f64;
        let mut i = 0;
        while (i as f64) * 0.001 <= r + 1.0 {
            let s = i as f64 * 0.001;
            gap = gap.max((ba.value(s) - bb.value(s)).abs());
            i += 1;
        }
        let pick = |f: &SampledField, x: f64| {
            let i = ((x - f.lower()[0]) / f.h()).round() as usize;
            f.values()[i]
        };
        for &x in &[-1.0, -0.5, 0.0, 0.5, 1.0] {
            let d = (pick(&a.field, x) - pick(&b.field, x)).abs();
            assert!(d <= gap + 1e-6, "x={x}: {d} > {gap}");
        }
    }
}
