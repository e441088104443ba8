use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_detst_chain, check_eps_bound_derivation, check_max_principle_form, check_sos_identity,
    check_starom_chain, sample_admissible, Constraints, Margin,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    SosIdentity,
    StaromChain,
    DetstChain,
    MaxPrincipleForm,
    EpsBounds,
}

impl CheckKind {
    pub const ALL: [CheckKind; 5] = [
        CheckKind::SosIdentity,
        CheckKind::StaromChain,
        CheckKind::DetstChain,
        CheckKind::MaxPrincipleForm,
        CheckKind::EpsBounds,
    ];
}

fn default_dims() -> Vec<usize> {
    vec![2, 3]
}
fn default_samples() -> usize {
    100_000
}
fn default_checks() -> Vec<CheckKind> {
    CheckKind::ALL.to_vec()
}
fn default_c() -> f64 {
    2.0
}
fn default_eps1() -> f64 {
    0.5
}
fn default_eps2() -> f64 {
    0.2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_checks")]
    pub checks: Vec<CheckKind>,
    /// Parameter `c` of the maximum-principle form.
    #[serde(default = "default_c")]
    pub form_c: f64,
    /// `(ε₁, ε₂)` for the eigenvalue-bound deductions.
    #[serde(default = "default_eps1")]
    pub eps1: f64,
    #[serde(default = "default_eps2")]
    pub eps2: f64,
    /// Eigenvalue box for the chain checks.
    #[serde(default)]
    pub box_half_width: Option<f64>,
    /// Violations listed per check in the report.
    #[serde(default = "default_listed")]
    pub max_listed: usize,
}

fn default_listed() -> usize {
    10
}

impl Default for CampaignConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: CheckKind,
    pub part: String,
    pub n: usize,
    pub evaluated: usize,
    pub skipped_degenerate: usize,
    pub violations: usize,
    /// Smallest `value / scale` seen (largest defect for identities).
    pub worst_relative: f64,
    pub worst_value: f64,
    pub listed: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CampaignReport {
    pub seed: u64,
    pub samples: usize,
    pub dims: Vec<usize>,
    pub form_c: f64,
    pub results: Vec<CheckResult>,
    pub total_violations: usize,
    pub passed: bool,
}

/// Margins of one evaluation: inequalities, then identities.
struct Eval {
    ineq: Vec<(&'static str, Margin)>,
    ident: Vec<(&'static str, Margin)>,
}

struct Tally {
    part: &'static str,
    identity: bool,
    evaluated: usize,
    violations: usize,
    worst_relative: f64,
    worst_value: f64,
    listed: Vec<String>,
}

impl Tally {
    fn new(part: &'static str, identity: bool) -> Self {
        Tally {
            part,
            identity,
            evaluated: 0,
            violations: 0,
            worst_relative: if identity { 0.0 } else { f64::INFINITY },
            worst_value: if identity { 0.0 } else { f64::INFINITY },
            listed: Vec::new(),
        }
    }

    fn add(&mut self, m: Margin, index: usize, max_listed: usize) {
        self.evaluated += 1;
        let rel = m.value / m.scale;
        let ok = if self.identity {
            if rel.abs() > self.worst_relative {
                self.worst_relative = rel.abs();
                self.worst_value = m.value;
            }
            m.is_identity()
        } else {
            if rel < self.worst_relative {
                self.worst_relative = rel;
                self.worst_value = m.value;
            }
            m.holds()
        };
        if !ok {
            self.violations += 1;
            if self.listed.len() < max_listed {
                self.listed.push(format!("sample {index}: value {:e}, scale {:e}", m.value, m.scale));
            }
        }
    }
}

fn tally_all(
    check: CheckKind,
    n: usize,
    evals: Vec<Option<Eval>>,
    max_listed: usize,
) -> Vec<CheckResult> {
    let mut tallies: Vec<Tally> = Vec::new();
    let mut skipped = 0;
    for (idx, e) in evals.into_iter().enumerate() {
        let Some(e) = e else {
            skipped += 1;
            continue;
        };
        for (part, m, identity) in e
            .ineq
            .into_iter()
            .map(|(p, m)| (p, m, false))
            .chain(e.ident.into_iter().map(|(p, m)| (p, m, true)))
        {
            let t = match tallies.iter_mut().position(|t| t.part == part) {
                Some(i) => &mut tallies[i],
                None => {
                    tallies.push(Tally::new(part, identity));
                    tallies.last_mut().unwrap()
                }
            };
            t.add(m, idx, max_listed);
        }
    }
    tallies
        .into_iter()
        .map(|t| CheckResult {
            check,
            part: t.part.to_string(),
            n,
            evaluated: t.evaluated,
            skipped_degenerate: skipped,
            violations: t.violations,
            worst_relative: t.worst_relative,
            worst_value: t.worst_value,
            listed: t.listed,
        })
        .collect()
}

/// Runs every requested check for every dimension. Samples are drawn
/// sequentially from per-check seeded streams; evaluation is parallel and
/// aggregation follows sample order, so reports are reproducible.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignReport> {
    if cfg.samples == 0 {
        return Err(Error::invalid("samples must be positive"));
    }
    if cfg.dims.is_empty() || cfg.dims.iter().any(|&n| !(2..=crate::spectral::MAX_DIM).contains(&n)) {
        return Err(Error::invalid("dims must lie in 2..=8"));
    }
    if !cfg.form_c.is_finite() {
        return Err(Error::invalid("form_c must be finite"));
    }
    let mut results = Vec::new();
    for &n in &cfg.dims {
        for (ci, &check) in cfg.checks.iter().enumerate() {
            let seed = cfg.seed.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ ((n as u64) << 32) ^ ci as u64;
            let constraints = |strict: bool| Constraints {
                strict_2convex: strict,
                pair_product_nonneg: !strict,
                box_half_width: cfg.box_half_width,
                ..Default::default()
            };
            let evals: Vec<Option<Eval>> = match check {
                CheckKind::SosIdentity => {
                    let s = sample_admissible(n, &constraints(false), cfg.samples, seed)?;
                    s.par_iter()
                        .map(|a| {
                            let l = a.spectrum.lambdas();
                            let mut ident = Vec::new();
                            for i in 0..n {
                                for j in (i + 1)..n {
                                    let (x, y) = check_sos_identity(l[i], l[j]);
                                    ident.push(("sum_of_squares_plus", x));
                                    ident.push(("sum_of_squares_minus", y));
                                }
                            }
                            Some(Eval { ineq: vec![], ident })
                        })
                        .collect()
                }
                CheckKind::StaromChain => {
                    let s = sample_admissible(n, &constraints(false), cfg.samples, seed)?;
                    s.par_iter()
                        .map(|a| {
                            let m = check_starom_chain(a).expect("sampler enforces the hypothesis");
                            Some(Eval {
                                ineq: vec![("cauchy_schwarz", m.cauchy_schwarz), ("final", m.last)],
                                ident: vec![],
                            })
                        })
                        .collect()
                }
                CheckKind::DetstChain => {
                    let s = sample_admissible(n, &constraints(true), cfg.samples, seed)?;
                    s.par_iter()
                        .map(|a| {
                            check_detst_chain(a).expect("sampler enforces strictness").map(|m| Eval {
                                ineq: vec![
                                    ("cs_factor", m.cs_factor),
                                    ("squared_sum", m.squared_sum),
                                    ("logdet_step", m.logdet_step),
                                    ("final", m.last),
                                ],
                                ident: vec![("rewrite_identity", m.rewrite_identity)],
                            })
                        })
                        .collect()
                }
                CheckKind::MaxPrincipleForm => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.samples)
                        .map(|_| {
                            let a = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                            let b = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                            (a, b)
                        })
                        .collect();
                    let c = cfg.form_c;
                    pairs
                        .par_iter()
                        .map(|(a, b)| {
                            let m = check_max_principle_form(a, b, c).expect("equal lengths");
                            let mut ident = vec![];
                            if c == 2.0 {
                                let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                                ident.push(("perfect_square", Margin::new(m.value - 6.0 * d, m.scale)));
                            }
                            Some(Eval {
                                ineq: vec![("form", m)],
                                ident,
                            })
                        })
                        .collect()
                }
                CheckKind::EpsBounds => {
                    let r = check_eps_bound_derivation(cfg.eps1, cfg.eps2, n, cfg.samples, seed)?;
                    let worst = r.worst_slope.min(r.worst_pair_product).min(r.worst_pair_sum).min(r.worst_implication);
                    results.push(CheckResult {
                        check,
                        part: "deduced_bounds".into(),
                        n,
                        evaluated: r.samples + r.implication_samples,
                        skipped_degenerate: 0,
                        violations: r.violations,
                        worst_relative: worst / (1.0 + cfg.eps1.powi(-2) - 1.0),
                        worst_value: worst,
                        listed: vec![],
                    });
                    continue;
                }
            };
            results.extend(tally_all(check, n, evals, cfg.max_listed));
        }
    }
    let total_violations = results.iter().map(|r| r.violations).sum();
    Ok(CampaignReport {
        seed: cfg.seed,
        samples: cfg.samples,
        dims: cfg.dims.clone(),
        form_c: cfg.form_c,
        results,
        total_violations,
        passed: total_violations == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(c: f64) -> CampaignConfig {
        CampaignConfig {
            samples: 3000,
            seed: 5,
            form_c: c,
            ..Default::default()
        }
    }

    #[test]
    fn default_campaign_passes_and_repeats() {
        let a = run_campaign(&small(2.0)).unwrap();
        assert!(a.passed, "{:#?}", a.results);
        let b = run_campaign(&small(2.0)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.results.iter().any(|r| r.part == "rewrite_identity"));
    }

    #[test]
    fn c_zero_is_a_negative_control() {
        let mut cfg = small(0.0);
        cfg.checks = vec![CheckKind::MaxPrincipleForm];
        let r = run_campaign(&cfg).unwrap();
        assert!(!r.passed);
        assert!(r.results[0].violations > 0 && !r.results[0].listed.is_empty());
    }

    #[test]
    fn config_defaults() {
        let c: CampaignConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c.samples, 100_000);
        assert_eq!(c.dims, vec![2, 3]);
        assert!(serde_json::from_str::<CampaignConfig>(r#"{"bogus":1}"#).is_err());
    }
}
