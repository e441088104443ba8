//! Pointwise algebra behind the preservation estimates, checked on random
//! admissible samples.

pub mod campaign;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Spectrum, MAX_DIM};

pub use campaign::{run_campaign, CampaignConfig, CampaignReport, CheckKind, CheckResult};

/// Pair margins below this are treated as degenerate in division-bearing
/// checks.
pub const DEGENERATE_MARGIN: f64 = 1e-8;

/// Relative tolerance of identities and inequality margins.
pub const MARGIN_TOL: f64 = 1e-12;

/// Default half-width of the eigenvalue box when no `ε₁` is given.
pub const DEFAULT_BOX: f64 = 5.0;

/// Fully symmetric 3-tensor `h_{ijk}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HSample {
    n: usize,
    h: Vec<f64>,
}

impl HSample {
    /// Symmetrizes `raw` (length `n³`, index `(i·n + j)·n + k`) over all
    /// permutations.
    pub fn symmetrized(n: usize, raw: &[f64]) -> Result<Self> {
        if n == 0 || n > MAX_DIM || raw.len() != n * n * n {
            return Err(Error::invalid(format!("need n³ entries for n = {n}")));
        }
        let idx = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
        let mut h = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let s = raw[idx(i, j, k)]
                        + raw[idx(i, k, j)]
                        + raw[idx(j, i, k)]
                        + raw[idx(j, k, i)]
                        + raw[idx(k, i, j)]
                        + raw[idx(k, j, i)];
                    h[idx(i, j, k)] = s / 6.0;
                }
            }
        }
        Ok(HSample { n, h })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::symmetrized(n, &vec![0.0; n * n * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.h[(i * self.n + j) * self.n + k]
    }

    /// `|A|² = Σ_{ijk} h_{ijk}²`.
    pub fn norm_sq(&self) -> f64 {
        self.h.iter().map(|v| v * v).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibleSample {
    pub spectrum: Spectrum,
    pub h: HSample,
}

/// Acceptance region of [`sample_admissible`].
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraints {
    /// Require `λᵢ + λⱼ > 0` and `1 + λᵢλⱼ > 0`.
    #[serde(default)]
    pub strict_2convex: bool,
    /// Require `1 + λᵢλⱼ ≥ 0` only.
    #[serde(default)]
    pub pair_product_nonneg: bool,
    #[serde(default)]
    pub eps1: Option<f64>,
    #[serde(default)]
    pub eps2: Option<f64>,
    /// Half-width of the eigenvalue box when `eps1` is absent.
    #[serde(default)]
    pub box_half_width: Option<f64>,
}

impl Constraints {
    pub fn strict() -> Self {
        Constraints {
            strict_2convex: true,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<f64> {
        if let Some(e1) = self.eps1 {
            if !(e1 > 0.0 && e1 <= 1.0) {
                return Err(Error::Infeasible(format!("eps1 = {e1} outside (0, 1]")));
            }
        }
        if let Some(e2) = self.eps2 {
            if !(e2 > 0.0 && e2 <= 1.0) {
                return Err(Error::Infeasible(format!("eps2 = {e2} outside (0, 1]; det𝔖 never exceeds 1")));
            }
        }
        let half = match (self.eps1, self.box_half_width) {
            (Some(e1), _) => (e1.powi(-2) - 1.0).max(0.0).sqrt(),
            (None, Some(b)) => b,
            (None, None) => DEFAULT_BOX,
        };
        if !(half >= 0.0 && half.is_finite()) {
            return Err(Error::invalid(format!("eigenvalue box half-width {half} invalid")));
        }
        Ok(half)
    }

    pub fn accepts(&self, s: &Spectrum) -> bool {
        if self.strict_2convex && !(s.min_pair_sum > 0.0 && s.min_pair_prod > 0.0) {
            return false;
        }
        if self.pair_product_nonneg && !(s.min_pair_prod >= 0.0) {
            return false;
        }
        if self.eps1.is_some_and(|e| !(s.star_omega >= e)) {
            return false;
        }
        if self.eps2.is_some_and(|e| !(s.det_s_frak >= e)) {
            return false;
        }
        true
    }
}

/// Minimum attempts before a low acceptance rate is reported as infeasible.
pub const MIN_ATTEMPTS: usize = 10_000;

/// Rejection sampler: `λ` uniform on the box `|λᵢ| ≤ Λ`, `h` standard normal
/// then symmetrized. Deterministic in `seed`.
pub fn sample_admissible(n: usize, c: &Constraints, count: usize, seed: u64) -> Result<Vec<AdmissibleSample>> {
    if n == 0 || n > MAX_DIM {
        return Err(Error::invalid(format!("dimension {n} outside 1..={MAX_DIM}")));
    }
    let half = c.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let mut lam = vec![0.0; n];
    let mut raw = vec![0.0; n * n * n];
    while out.len() < count {
        attempts += 1;
        for l in lam.iter_mut() {
            *l = if half > 0.0 { rng.random_range(-half..=half) } else { 0.0 };
        }
        let s = Spectrum::from_eigenvalues(&lam)?;
        if c.accepts(&s) {
            for v in raw.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            out.push(AdmissibleSample {
                spectrum: s,
                h: HSample::symmetrized(n, &raw)?,
            });
        }
        if attempts >= MIN_ATTEMPTS && (out.len() as f64) < 1e-3 * attempts as f64 {
            return Err(Error::Infeasible(format!(
                "acceptance rate {}/{} below 0.1% for n = {n} under {c:?}",
                out.len(),
                attempts
            )));
        }
    }
    Ok(out)
}

/// Value and comparison scale of one check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Margin {
    pub value: f64,
    pub scale: f64,
}

impl Margin {
    fn new(value: f64, scale: f64) -> Self {
        Margin { value, scale }
    }
    /// `value ≥ −tol·scale`.
    pub fn holds(&self) -> bool {
        self.value >= -MARGIN_TOL * self.scale
    }
    /// `|value| ≤ tol·scale`, for identities.
    pub fn is_identity(&self) -> bool {
        self.value.abs() <= MARGIN_TOL * self.scale
    }
}

/// Defects of `(1+a²)(1+b²) = (a+b)² + (1−ab)² = (1+ab)² + (a−b)²`.
pub fn check_sos_identity(a: f64, b: f64) -> (Margin, Margin) {
    let lhs = (1.0 + a * a) * (1.0 + b * b);
    let scale = 1.0 + lhs;
    (
        Margin::new(lhs - ((a + b).powi(2) + (1.0 - a * b).powi(2)), scale),
        Margin::new(lhs - ((1.0 + a * b).powi(2) + (a - b).powi(2)), scale),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StarOmMargins {
    /// `n Σ λᵢ² h_{kii}² − Σ_k |Σᵢ λᵢ h_{kii}|²`.
    pub cauchy_schwarz: Margin,
    /// `Q − G/n` with the quoted lower bound `Q`.
    pub last: Margin,
    pub q: f64,
    pub g: f64,
}

/// The volume-form chain. Rejects samples with `1 + λᵢλⱼ < 0`.
pub fn check_starom_chain(s: &AdmissibleSample) -> Result<StarOmMargins> {
    let n = s.h.n();
    let l = s.spectrum.lambdas();
    if l.len() != n {
        return Err(Error::invalid("spectrum and tensor dimensions differ"));
    }
    if s.spectrum.min_pair_prod < 0.0 {
        return Err(Error::invalid("1 + λᵢλⱼ < 0: hypothesis violated"));
    }
    let h = &s.h;
    let mut q = 0.0;
    for i in 0..n {
        q += (1.0 + l[i] * l[i]) * h.get(i, i, i).powi(2);
        for j in 0..n {
            if j != i {
                q += (3.0 + l[i] * l[i] + 2.0 * l[i] * l[j]) * h.get(i, i, j).powi(2);
            }
        }
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let c = 6.0 + 2.0 * (l[i] * l[j] + l[j] * l[k] + l[k] * l[i]);
                q += c * h.get(i, j, k).powi(2);
            }
        }
    }
    let mut g = 0.0;
    let mut weighted = 0.0;
    for k in 0..n {
        let mut s_k = 0.0;
        for i in 0..n {
            s_k += l[i] * h.get(k, i, i);
            weighted += l[i] * l[i] * h.get(k, i, i).powi(2);
        }
        g += s_k * s_k;
    }
    let nf = n as f64;
    Ok(StarOmMargins {
        cauchy_schwarz: Margin::new(nf * weighted - g, 1.0 + nf * weighted),
        last: Margin::new(q - g / nf, 1.0 + q),
        q,
        g,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetStMargins {
    /// `(n(n−1)/2) Σ g² − |Σ g|²` summed over `k`.
    pub cs_factor: Margin,
    /// Worst defect of the two rewrite identities of `∇ₖ(Sᵢᵢ + Sⱼⱼ)`.
    pub rewrite_identity: Margin,
    /// Worst `2A² + 2B² − (A − B)²` over `k, i < j`.
    pub squared_sum: Margin,
    /// Quoted lower bound minus `2|A|²` and the bracketed pair terms.
    pub logdet_step: Margin,
    /// Quoted lower bound minus `2|A|² + |∇ log det𝔖|²/(n(n−1))`.
    pub last: Margin,
}

/// The `det𝔖` chain. `None` when a pair margin is below
/// [`DEGENERATE_MARGIN`].
pub fn check_detst_chain(s: &AdmissibleSample) -> Result<Option<DetStMargins>> {
    let n = s.h.n();
    let l = s.spectrum.lambdas();
    if l.len() != n || n < 2 {
        return Err(Error::invalid("det𝔖 chain needs matching dimensions n ≥ 2"));
    }
    if !(s.spectrum.min_pair_sum > 0.0 && s.spectrum.min_pair_prod > 0.0) {
        return Err(Error::invalid("sample is not strictly 2-convex"));
    }
    if s.spectrum.min_pair_sum < DEGENERATE_MARGIN || s.spectrum.min_pair_prod < DEGENERATE_MARGIN {
        return Ok(None);
    }
    let h = &s.h;
    let sii: Vec<f64> = l.iter().map(|x| x / (1.0 + x * x)).collect();
    let w: Vec<f64> = l.iter().map(|x| (1.0 - x * x) / (1.0 + x * x)).collect();
    let mut lower = 0.0;
    let mut grad_sq = 0.0;
    let mut cs_rhs = 0.0;
    let mut rewrite_worst = 0.0f64;
    let mut rewrite_scale = 1.0f64;
    let mut sq_worst = f64::INFINITY;
    let mut sq_scale = 1.0f64;
    let mut bracket_sum = 0.0;
    for k in 0..n {
        let mut gk = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (l[i], l[j]);
                let p = (1.0 + a * a) * (1.0 + b * b);
                let (hp, hm) = (h.get(k, i, i) + h.get(k, j, j), h.get(k, i, i) - h.get(k, j, j));
                lower += 4.0 * h.get(k, i, j).powi(2)
                    + p / (a + b).powi(2) * hp * hp
                    + p / (1.0 + a * b).powi(2) * hm * hm;
                let big_a = (1.0 - a * b) / (a + b) * hp;
                let big_b = (a - b) / (1.0 + a * b) * hm;
                bracket_sum += big_a * big_a + big_b * big_b;

                let grad = -(w[i] * h.get(k, i, i) + w[j] * h.get(k, j, j));
                let g = grad / (sii[i] + sii[j]);
                gk += g;
                cs_rhs += g * g;

                let half = 0.5 * (w[i] + w[j]) * hp + 0.5 * (w[i] - w[j]) * hm;
                let full = (1.0 - a * a * b * b) / p * hp - (a * a - b * b) / p * hm;
                let scaled = big_a - big_b;
                // rounding in a+b, 1+ab and Sᵢᵢ+Sⱼⱼ is amplified by the divisions
                let cond = (a.abs() + b.abs()) / (a + b).abs()
                    + (1.0 + (a * b).abs()) / (1.0 + a * b).abs()
                    + (sii[i].abs() + sii[j].abs()) / (sii[i] + sii[j]).abs();
                let terms = (w[i] * h.get(k, i, i)).abs() + (w[j] * h.get(k, j, j)).abs();
                let mag = 1.0
                    + terms
                    + half.abs()
                    + full.abs()
                    + cond * (big_a.abs() + big_b.abs() + g.abs() + terms / (sii[i] + sii[j]).abs());
                let d = (half + grad).abs().max((full + grad).abs()).max((scaled + g).abs());
                if d / mag > rewrite_worst / rewrite_scale {
                    rewrite_worst = d;
                    rewrite_scale = mag;
                }

                let m = 2.0 * big_a * big_a + 2.0 * big_b * big_b - (big_a - big_b).powi(2);
                let ms = 1.0 + 2.0 * big_a * big_a + 2.0 * big_b * big_b;
                if m / ms < sq_worst / sq_scale {
                    sq_worst = m;
                    sq_scale = ms;
                }
            }
        }
        grad_sq += gk * gk;
    }
    let nf = n as f64;
    let pairs = nf * (nf - 1.0) / 2.0;
    let target = 2.0 * h.norm_sq() + grad_sq / (nf * (nf - 1.0));
    Ok(Some(DetStMargins {
        logdet_step: Margin::new(lower - 2.0 * h.norm_sq() - bracket_sum, 1.0 + lower),
        cs_factor: Margin::new(pairs * cs_rhs - grad_sq, 1.0 + pairs * cs_rhs),
        rewrite_identity: Margin::new(rewrite_worst, rewrite_scale),
        squared_sum: Margin::new(sq_worst, sq_scale),
        last: Margin::new(lower - target, 1.0 + lower),
    }))
}

/// Negative of the quadratic form
/// `−6|a|² − 2(1+c)|b|² + (8+2c)⟨a, b⟩` with `a = φ∇w`, `b = w∇|F|²`.
/// At `c = 2` this is `6|a − b|²`.
pub fn check_max_principle_form(a: &[f64], b: &[f64], c: f64) -> Result<Margin> {
    if a.len() != b.len() {
        return Err(Error::invalid("vectors of different length"));
    }
    let aa: f64 = a.iter().map(|x| x * x).sum();
    let bb: f64 = b.iter().map(|x| x * x).sum();
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let value = 6.0 * aa + 2.0 * (1.0 + c) * bb - (8.0 + 2.0 * c) * ab;
    Ok(Margin::new(value, 1.0 + 6.0 * aa + 2.0 * (1.0 + c).abs() * bb + (8.0 + 2.0 * c).abs() * ab.abs()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsBoundReport {
    pub eps1: f64,
    pub eps2: f64,
    pub n: usize,
    pub samples: usize,
    pub worst_slope: f64,
    pub worst_pair_product: f64,
    pub worst_pair_sum: f64,
    /// Raw box draws with `Π(1+λᵢ²) ≤ ε₁⁻²` tested for `Σλᵢ² ≤ ε₁⁻² − 1`.
    pub implication_samples: usize,
    pub worst_implication: f64,
    pub violations: usize,
}

/// Samples strictly 2-convex spectra with `*Ω ≥ ε₁`, `det𝔖 ≥ ε₂` and tests
/// the three deduced eigenvalue bounds.
pub fn check_eps_bound_derivation(eps1: f64, eps2: f64, n: usize, count: usize, seed: u64) -> Result<EpsBoundReport> {
    if !(eps1 > 0.0 && eps1 < 1.0 && eps2 > 0.0 && eps2 < 1.0) {
        return Err(Error::invalid(format!("need ε₁, ε₂ in (0, 1), got {eps1}, {eps2}")));
    }
    let c = Constraints {
        strict_2convex: true,
        eps1: Some(eps1),
        eps2: Some(eps2),
        ..Default::default()
    };
    let samples = sample_admissible(n, &c, count, seed)?;
    let slope = eps1.powi(-2) - 1.0;
    let prod_floor = eps2 / (2.0 * slope).sqrt();
    let sum_floor = 2.0 * eps2 / (eps1.powi(-2) + 1.0);
    let mut rep = EpsBoundReport {
        eps1,
        eps2,
        n,
        samples: samples.len(),
        worst_slope: f64::INFINITY,
        worst_pair_product: f64::INFINITY,
        worst_pair_sum: f64::INFINITY,
        implication_samples: 0,
        worst_implication: f64::INFINITY,
        violations: 0,
    };
    let tol = MARGIN_TOL * (1.0 + slope);
    for s in &samples {
        let sum_sq: f64 = s.spectrum.lambdas().iter().map(|x| x * x).sum();
        let m1 = slope - sum_sq;
        let m2 = s.spectrum.min_pair_prod - prod_floor;
        let m3 = s.spectrum.min_pair_sum - sum_floor;
        rep.worst_slope = rep.worst_slope.min(m1);
        if n > 1 {
            rep.worst_pair_product = rep.worst_pair_product.min(m2);
            rep.worst_pair_sum = rep.worst_pair_sum.min(m3);
        }
        if m1 < -tol || (n > 1 && (m2 < -tol || m3 < -tol)) {
            rep.violations += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let half = slope.sqrt();
    for _ in 0..count {
        let lam: Vec<f64> = (0..n).map(|_| rng.random_range(-half..=half)).collect();
        let prod: f64 = lam.iter().map(|x| 1.0 + x * x).product();
        if prod <= eps1.powi(-2) {
            rep.implication_samples += 1;
            let m = slope - lam.iter().map(|x| x * x).sum::<f64>();
            rep.worst_implication = rep.worst_implication.min(m);
            if m < -tol {
                rep.violations += 1;
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(l: &[f64], raw: &[f64]) -> AdmissibleSample {
        AdmissibleSample {
            spectrum: Spectrum::from_eigenvalues(l).unwrap(),
            h: HSample::symmetrized(l.len(), raw).unwrap(),
        }
    }

    #[test]
    fn symmetrization() {
        let raw: Vec<f64> = (0..27).map(|v| v as f64).collect();
        let h = HSample::symmetrized(3, &raw).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let v = h.get(i, j, k);
                    assert_eq!(v, h.get(j, i, k));
                    assert_eq!(v, h.get(k, j, i));
                    assert_eq!(v, h.get(i, k, j));
                }
            }
        }
    }

    #[test]
    fn sos_examples() {
        let (a, b) = check_sos_identity(0.0, 0.0);
        assert_eq!((a.value, b.value), (0.0, 0.0));
        let (a, b) = check_sos_identity(1.0, 2.0);
        assert_eq!((a.value, b.value), (0.0, 0.0));
        let (a, b) = check_sos_identity(0.7, 0.7);
        assert!(a.is_identity() && b.is_identity());
    }

    #[test]
    fn starom_examples() {
        let z = sample(&[0.3, -0.2], &[0.0; 8]);
        let m = check_starom_chain(&z).unwrap();
        assert_eq!((m.q, m.last.value), (0.0, 0.0));
        let one = sample(&[1.7], &[0.4]);
        let m = check_starom_chain(&one).unwrap();
        assert!((m.last.value - 0.16).abs() < 1e-14);
        assert!(check_starom_chain(&sample(&[3.0, -1.0], &[0.0; 8])).is_err());
    }

    #[test]
    fn detst_examples() {
        let z = sample(&[0.5, 0.8, 1.2], &[0.0; 27]);
        let m = check_detst_chain(&z).unwrap().unwrap();
        assert_eq!(m.last.value, 0.0);
        assert_eq!(m.cs_factor.value, 0.0);

        let raw: Vec<f64> = (0..8).map(|v| (v as f64 * 0.37).sin()).collect();
        let sym = sample(&[1.0, 1.0], &raw);
        let m = check_detst_chain(&sym).unwrap().unwrap();
        assert!(m.rewrite_identity.is_identity());
        // at λ = (1, 1) the bracket vanishes and the margin is the diagonal surplus
        let h = &sym.h;
        let lower: f64 = (0..2)
            .map(|k| {
                4.0 * h.get(k, 0, 1).powi(2)
                    + 4.0 / 4.0 * (h.get(k, 0, 0) + h.get(k, 1, 1)).powi(2)
                    + 4.0 / 4.0 * (h.get(k, 0, 0) - h.get(k, 1, 1)).powi(2)
            })
            .sum();
        assert!((m.last.value - (lower - 2.0 * h.norm_sq())).abs() < 1e-12);
        assert!(m.last.value > 0.0);

        let near = sample(&[0.5, -0.5 + 5e-9], &[0.1; 8]);
        assert!(check_detst_chain(&near).unwrap().is_none());
    }

    #[test]
    fn max_principle_examples() {
        let m = check_max_principle_form(&[0.3, -1.0], &[0.3, -1.0], 2.0).unwrap();
        assert_eq!(m.value, 0.0);
        let m = check_max_principle_form(&[1.0, 0.0], &[0.0, 1.0], 2.0).unwrap();
        assert_eq!(m.value, 12.0);
        let m = check_max_principle_form(&[0.5, 0.0], &[1.0, 0.0], 0.0).unwrap();
        assert!((m.value + 0.5).abs() < 1e-15 && !m.holds());
    }

    #[test]
    fn sampler_contract() {
        let c = Constraints::strict();
        let a = sample_admissible(2, &c, 500, 3).unwrap();
        assert_eq!(a, sample_admissible(2, &c, 500, 3).unwrap());
        assert!(a.iter().all(|s| s.spectrum.min_pair_sum > 0.0 && s.spectrum.min_pair_prod > 0.0));

        let tight = Constraints {
            eps1: Some(0.99),
            ..Default::default()
        };
        let bound = (0.99f64.powi(-2) - 1.0).sqrt();
        assert!((bound - 0.1425).abs() < 1e-4);
        for s in sample_admissible(3, &tight, 200, 1).unwrap() {
            assert!(s.spectrum.lambdas().iter().all(|l| l.abs() <= bound));
        }

        let bad = Constraints {
            eps2: Some(1.5),
            ..Default::default()
        };
        assert!(matches!(sample_admissible(2, &bad, 1, 0), Err(Error::Infeasible(_))));
        let impossible = Constraints {
            strict_2convex: true,
            eps1: Some(0.999),
            eps2: Some(0.999),
            ..Default::default()
        };
        assert!(matches!(sample_admissible(3, &impossible, 10, 0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn eps_filter_rejects_unit_spectrum() {
        let s = Spectrum::from_eigenvalues(&[1.0, 1.0]).unwrap();
        let c = Constraints {
            strict_2convex: true,
            eps1: Some(std::f64::consts::FRAC_1_SQRT_2),
            eps2: Some(0.5),
            ..Default::default()
        };
        assert!(!c.accepts(&s));
        let r = check_eps_bound_derivation(std::f64::consts::FRAC_1_SQRT_2, 0.5, 2, 2000, 11).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.implication_samples > 0);
    }
}
