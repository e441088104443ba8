//! Self-expanding solutions `u(x, t) = t·u₁(x/√t)` and the rescaled-flow
//! route to them.
//!
//! `u₁` is an expander when `Σ arctan λᵢ(D²u₁) − u₁ + ½⟨Du₁, x⟩ = 0`. At a
//! general time the same quantity reads `θ − (u − ½⟨Du, y⟩)/t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{run_flow, Checks, FlowDomain, FlowMode, FlowSummary, PotentialState, RunOptions};
use crate::geometry::{Booster, BoosterKind};
use crate::geometry::booster::DEFAULT_THETA;

pub const MIN_PROFILE_RESOLUTION: usize = 64;

/// Fraction of the domain kept clear of the artificial boundary.
pub const WINDOW_FRACTION: f64 = 0.9;

/// Sampled time-one profile on a radial or line grid.
#[derive(Clone, Debug)]
pub struct ExpanderProfile {
    pub state: PotentialState,
}

impl ExpanderProfile {
    pub fn new(state: PotentialState) -> Result<Self> {
        if state.domain.mode == FlowMode::Periodic {
            return Err(Error::invalid("expander profiles live on radial or line grids"));
        }
        Ok(ExpanderProfile { state })
    }

    pub fn from_fn(domain: FlowDomain, f: impl Fn(f64) -> f64) -> Result<Self> {
        let v = (0..domain.node_count()).map(|i| f(domain.point(i)[0])).collect();
        Self::new(PotentialState::new(domain, v, 1.0)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualField {
    /// Node radius (radial) or abscissa (line).
    pub points: Vec<f64>,
    pub residual: Vec<f64>,
    pub sup: f64,
}

/// `du/dr` or `du/dx` at node `j`, one-sided at the outer ends.
fn node_derivative(s: &PotentialState, j: usize) -> f64 {
    let d = &s.domain;
    let v = s.values();
    let h = d.h();
    let last = d.resolution;
    if d.mode == FlowMode::Radial && j == 0 {
        0.0
    } else if j == 0 {
        (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    } else if j == last {
        (3.0 * v[last] - 4.0 * v[last - 1] + v[last - 2]) / (2.0 * h)
    } else {
        (v[j + 1] - v[j - 1]) / (2.0 * h)
    }
}

/// Pointwise `θ − (u − ½⟨Du, y⟩)/t` over nodes with `|y| ≤ radius`.
pub fn residual_at_time(s: &PotentialState, radius: f64) -> Result<ResidualField> {
    let d = &s.domain;
    if d.mode == FlowMode::Periodic {
        return Err(Error::invalid("expander residual needs a radial or line state"));
    }
    if !(s.t > 0.0) {
        return Err(Error::invalid("expander residual needs t > 0"));
    }
    let theta = s.rhs();
    let mut points = Vec::new();
    let mut residual = Vec::new();
    for j in 0..d.node_count() {
        let y = d.point(j)[0];
        if y.abs() > radius * (1.0 + 1e-12) {
            continue;
        }
        let u = s.values()[j];
        let du = node_derivative(s, j);
        points.push(y);
        residual.push(theta[j] - (u - 0.5 * y * du) / s.t);
    }
    let sup = residual.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(ResidualField { points, residual, sup })
}

/// Residual of the profile at every node.
pub fn expander_residual(p: &ExpanderProfile) -> Result<ResidualField> {
    if p.state.domain.resolution < MIN_PROFILE_RESOLUTION {
        return Err(Error::Resolution(format!(
            "expander profiles need at least {MIN_PROFILE_RESOLUTION} cells"
        )));
    }
    let mut one = p.state.clone();
    one.t = 1.0;
    residual_at_time(&one, f64::INFINITY)
}

/// `max |U₀(λx) − λ²U₀(x)| / (1 + |λ²U₀(x)|)` over samples and factors.
pub fn homogeneity_check(u0: impl Fn(&[f64]) -> f64, samples: &[Vec<f64>], lambdas: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for x in samples {
        let base = u0(x);
        for &l in lambdas {
            let scaled: Vec<f64> = x.iter().map(|v| l * v).collect();
            let expect = l * l * base;
            worst = worst.max((u0(&scaled) - expect).abs() / (1.0 + expect.abs()));
        }
    }
    worst
}

/// `u_μ(x, t) = μ⁻²u(μx, μ²t)` on the natural grid: radial and line grids
/// shrink by `μ`, periodic grids keep their nodes and need an integer `μ`.
/// Discrete Hessians are carried over exactly.
pub fn rescale(s: &PotentialState, mu: f64) -> Result<PotentialState> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!("scale factor {mu} must be positive")));
    }
    let d = &s.domain;
    let inv = 1.0 / (mu * mu);
    match d.mode {
        FlowMode::Radial | FlowMode::Line => {
            let nd = FlowDomain {
                half_width: d.half_width / mu,
                ..d.clone()
            };
            let v = s.values().iter().map(|u| u * inv).collect();
            PotentialState::new(nd, v, s.t * inv)
        }
        FlowMode::Periodic => {
            let m = mu.round();
            if (mu - m).abs() > 1e-12 || d.resolution % 2 != 0 {
                return Err(Error::invalid("periodic rescaling needs an integer factor and an even grid"));
            }
            let m = m as usize;
            let nn = d.resolution;
            let shift = (nn / 2) * (m - 1) % nn;
            let map = |j: usize| (m * j + nn - shift) % nn;
            let v = (0..d.node_count())
                .map(|i| {
                    let mut src = 0;
                    let mut rest = i;
                    let mut stride = 1;
                    for _ in 0..d.n {
                        src += map(rest % nn) * stride;
                        rest /= nn;
                        stride *= nn;
                    }
                    s.values()[src] * inv
                })
                .collect();
            PotentialState::new(d.clone(), v, s.t * inv)
        }
    }
}

/// `u_μ` interpolated onto `target`; fails when `μ·target` leaves the source.
pub fn rescale_onto(s: &PotentialState, mu: f64, target: &FlowDomain) -> Result<PotentialState> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!("scale factor {mu} must be positive")));
    }
    if target.mode != s.domain.mode || target.mode == FlowMode::Periodic || target.n != s.domain.n {
        return Err(Error::invalid("target grid must match the source mode and dimension"));
    }
    if mu * target.half_width > s.domain.half_width * (1.0 + 1e-12) {
        return Err(Error::OutOfRange(format!(
            "pulled-back window {} exceeds the source extent {}",
            mu * target.half_width,
            s.domain.half_width
        )));
    }
    let inv = 1.0 / (mu * mu);
    let v = (0..target.node_count())
        .map(|i| s.value_at(&[mu * target.point(i)[0]]).map(|u| u * inv))
        .collect::<Result<Vec<f64>>>()?;
    PotentialState::new(target.clone(), v, s.t * inv)
}

/// Degree-two homogeneous initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", rename_all = "snake_case", deny_unknown_fields)]
pub enum HomogeneousData {
    /// `a|x|²/2`.
    Quadratic { a: f64 },
    /// `a₋x²/2` for `x < 0` and `a₊x²/2` for `x ≥ 0`; one dimension only.
    TwoSided { a_minus: f64, a_plus: f64 },
}

impl HomogeneousData {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            HomogeneousData::Quadratic { a } => 0.5 * a * x.iter().map(|v| v * v).sum::<f64>(),
            HomogeneousData::TwoSided { a_minus, a_plus } => {
                let a = if x[0] < 0.0 { a_minus } else { a_plus };
                0.5 * a * x[0] * x[0]
            }
        }
    }

    fn min_curvature(&self) -> f64 {
        match self {
            HomogeneousData::Quadratic { a } => *a,
            HomogeneousData::TwoSided { a_minus, a_plus } => a_minus.min(*a_plus),
        }
    }
}

fn default_checks() -> Vec<f64> {
    vec![0.25, 0.5, 2.0]
}
fn default_trace_time() -> f64 {
    0.01
}
fn default_tau() -> f64 {
    4.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpanderSetup {
    pub n: usize,
    pub u0: HomogeneousData,
    pub half_width: f64,
    pub resolution: usize,
    /// Inner booster parameter; `None` runs from `U₀` unmodified.
    pub k: Option<f64>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    pub mu_schedule: Vec<f64>,
    /// Residual window at `t = 1`.
    pub window: f64,
    #[serde(default = "default_checks")]
    pub similarity_times: Vec<f64>,
    #[serde(default = "default_trace_time")]
    pub trace_time: f64,
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualRow {
    pub mu: f64,
    pub t: f64,
    pub window: f64,
    pub sup_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimilarityRow {
    pub t: f64,
    pub window: f64,
    pub defect: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceCheck {
    pub t: f64,
    pub window: f64,
    pub defect: f64,
    /// Measured `sup |∂u/∂t|` over the run.
    pub c10: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpanderReport {
    pub homogeneity_defect: f64,
    pub booster_sup: f64,
    pub residual_trace: Vec<ResidualRow>,
    pub trace_monotone: bool,
    pub final_residual: f64,
    pub self_similarity: Vec<SimilarityRow>,
    pub initial_trace: TraceCheck,
    pub all_passed: bool,
}

#[derive(Clone, Debug)]
pub struct ExpanderOutcome {
    pub report: ExpanderReport,
    pub profile: ExpanderProfile,
    pub flow: FlowSummary,
}

impl ExpanderSetup {
    fn validate(&self) -> Result<FlowDomain> {
        let domain = match self.n {
            1 => FlowDomain::line(self.half_width, self.resolution)?,
            _ => FlowDomain::radial(self.n, self.half_width, self.resolution)?,
        };
        if self.n > 1 && matches!(self.u0, HomogeneousData::TwoSided { .. }) {
            return Err(Error::invalid("two-sided data is one-dimensional"));
        }
        if self.n > 1 && !(self.u0.min_curvature() > 0.0) {
            return Err(Error::invalid("U0 must be strictly two-convex away from the origin"));
        }
        if self.mu_schedule.is_empty() || self.mu_schedule.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("mu_schedule must be non-empty and increasing"));
        }
        if !(self.mu_schedule[0] > 0.0) {
            return Err(Error::invalid("mu_schedule entries must be positive"));
        }
        let reach = WINDOW_FRACTION * self.half_width;
        let mu_max = *self.mu_schedule.last().unwrap();
        if !(self.window > 0.0) || mu_max.max(1.0) * self.window > reach {
            return Err(Error::OutOfRange(format!(
                "residual window {} at scale {mu_max} leaves the usable extent {reach}",
                self.window
            )));
        }
        if self.similarity_times.iter().any(|&t| !(t > 0.0 && t.is_finite())) || !(self.trace_time > 0.0) {
            return Err(Error::invalid("check times must be positive"));
        }
        Ok(domain)
    }

    fn sample_points(&self) -> Vec<Vec<f64>> {
        (1..=16)
            .flat_map(|i| {
                let r = self.half_width * i as f64 / 16.0;
                let mut e = vec![0.0; self.n];
                e[0] = r;
                let mut m = e.clone();
                m[0] = -r;
                if self.n > 1 {
                    m[1] = 0.5 * r;
                }
                [e, m]
            })
            .collect()
    }
}

/// Flows `U₀ + E_k` and checks the approach to a self-similar solution.
pub fn converge_to_expander(setup: &ExpanderSetup) -> Result<ExpanderOutcome> {
    let domain = setup.validate()?;
    let u0 = |x: &[f64]| setup.u0.eval(x);
    let homogeneity_defect = homogeneity_check(u0, &setup.sample_points(), &[0.25, 0.5, 2.0, 4.0]);
    if homogeneity_defect > 1e-6 {
        return Err(Error::invalid(format!(
            "U0 is not homogeneous of degree two (defect {homogeneity_defect:e})"
        )));
    }
    let booster = match setup.k {
        Some(k) => Some(Booster::new(BoosterKind::Inner, k, setup.tau, DEFAULT_THETA)?),
        None => None,
    };
    let coord = |i: usize| {
        let p = domain.point(i)[0];
        let mut x = vec![0.0; setup.n];
        x[0] = p;
        x
    };
    let mut booster_sup = 0.0f64;
    let values = (0..domain.node_count())
        .map(|i| {
            let x = coord(i);
            let e = booster.as_ref().map_or(0.0, |b| b.value(x[0].abs()));
            booster_sup = booster_sup.max(e.abs());
            u0(&x) + e
        })
        .collect();
    let start = PotentialState::new(domain.clone(), values, 0.0)?;

    let mut snaps: Vec<f64> = setup.mu_schedule.iter().map(|m| m * m).collect();
    snaps.extend(&setup.similarity_times);
    snaps.extend([1.0, setup.trace_time]);
    snaps.sort_by(f64::total_cmp);
    snaps.dedup();
    let t_end = *snaps.last().unwrap();
    let opts = RunOptions {
        t_end,
        sample_dt: t_end / 100.0,
        dt: setup.dt,
        snapshot_times: snaps.clone(),
        checks: Checks::default(),
        dump_path: None,
    };
    let out = run_flow(start, &opts)?;
    if let Some(v) = out.summary.verdicts.iter().find(|v| !v.passed) {
        return Err(Error::NumericalAbort {
            t: t_end,
            reason: format!("monitor {} violated: {}", v.name, v.detail),
        });
    }
    let at = |t: f64| -> &PotentialState {
        let i = snaps.iter().position(|&s| s == t).expect("snapshot scheduled");
        &out.snapshots[i]
    };

    let residual_trace = setup
        .mu_schedule
        .iter()
        .map(|&mu| {
            let s = at(mu * mu);
            let window = mu * setup.window;
            residual_at_time(s, window).map(|r| ResidualRow {
                mu,
                t: s.t,
                window,
                sup_residual: r.sup,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let trace_monotone = residual_trace
        .windows(2)
        .all(|w| w[1].sup_residual <= 1.1 * w[0].sup_residual + 1e-12);

    let one = at(1.0);
    let reach = WINDOW_FRACTION * setup.half_width;
    let final_residual = residual_at_time(one, setup.window)?.sup;
    let self_similarity = setup
        .similarity_times
        .iter()
        .map(|&t| {
            let s = at(t);
            let window = reach * t.sqrt().min(1.0);
            let mut defect = 0.0f64;
            let mut sup_u = 0.0f64;
            for j in 0..domain.node_count() {
                let y = domain.point(j)[0];
                if y.abs() > window {
                    continue;
                }
                let u = s.values()[j];
                let v = t * one.value_at(&[y / t.sqrt()])?;
                defect = defect.max((u - v).abs());
                sup_u = sup_u.max(u.abs());
            }
            let bound = 1e-6 * (1.0 + sup_u);
            Ok(SimilarityRow {
                t,
                window,
                defect,
                bound,
                passed: defect <= bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let trace_state = at(setup.trace_time);
    let mut defect = 0.0f64;
    for j in 0..domain.node_count() {
        let x = coord(j);
        if x[0].abs() <= setup.window * (1.0 + 1e-12) {
            defect = defect.max((trace_state.values()[j] - u0(&x)).abs());
        }
    }
    let c10 = out.summary.max_dudt;
    let bound = c10 * setup.trace_time * (1.0 + 1e-12);
    let initial_trace = TraceCheck {
        t: setup.trace_time,
        window: setup.window,
        defect,
        c10,
        bound,
        passed: defect <= bound,
    };
    let all_passed = trace_monotone && initial_trace.passed && self_similarity.iter().all(|r| r.passed);
    let mut profile_state = one.clone();
    profile_state.t = 1.0;
    Ok(ExpanderOutcome {
        report: ExpanderReport {
            homogeneity_defect,
            booster_sup,
            residual_trace,
            trace_monotone,
            final_residual,
            self_similarity,
            initial_trace,
            all_passed,
        },
        profile: ExpanderProfile::new(profile_state)?,
        flow: out.summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_expanders_have_zero_residual() {
        let d = FlowDomain::line(3.0, 128).unwrap();
        let c = 0.8f64;
        let p = ExpanderProfile::from_fn(d, |x| 0.5 * c * x * x + c.atan()).unwrap();
        assert!(expander_residual(&p).unwrap().sup < 1e-12);

        let d = FlowDomain::radial(2, 3.0, 128).unwrap();
        let p = ExpanderProfile::from_fn(d, |r| 0.5 * r * r + std::f64::consts::FRAC_PI_2).unwrap();
        assert!(expander_residual(&p).unwrap().sup < 1e-12);

        let d = FlowDomain::radial(3, 3.0, 64).unwrap();
        let p = ExpanderProfile::from_fn(d, |_| 0.0).unwrap();
        assert_eq!(expander_residual(&p).unwrap().sup, 0.0);

        let d = FlowDomain::line(3.0, 32).unwrap();
        let p = ExpanderProfile::from_fn(d, |_| 0.0).unwrap();
        assert!(matches!(expander_residual(&p), Err(Error::Resolution(_))));
    }

    #[test]
    fn homogeneity_examples() {
        let pts: Vec<Vec<f64>> = (1..10).map(|i| vec![0.3 * i as f64, -0.1 * i as f64]).collect();
        let ls = [0.5, 2.0, 3.0];
        let q = |x: &[f64]| 1.5 * x[0] * x[0] - 0.3 * x[0] * x[1] + 0.2 * x[1] * x[1];
        assert!(homogeneity_check(q, &pts, &ls) < 1e-14);
        let angular = |x: &[f64]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            r2 * (2.0 + x[1].atan2(x[0]).sin())
        };
        assert!(homogeneity_check(angular, &pts, &ls) < 1e-13);
        let quartic = |x: &[f64]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            r2 + r2 * r2
        };
        let small = homogeneity_check(quartic, &pts, &[2.0]);
        let large = homogeneity_check(quartic, &pts, &[4.0]);
        assert!(small > 0.1 && large > small);
    }

    #[test]
    fn rescale_examples() {
        let d = FlowDomain::radial(2, 4.0, 64).unwrap();
        let v: Vec<f64> = (0..65).map(|j| (0.3 * d.point(j)[0]).sin() + 0.6 * d.point(j)[0].powi(2)).collect();
        let s = PotentialState::new(d.clone(), v, 0.5).unwrap();
        let same = rescale(&s, 1.0).unwrap();
        assert_eq!(same.values(), s.values());
        let r = rescale(&s, 2.0).unwrap();
        assert_eq!(r.t, 0.125);
        let min_so = |st: &PotentialState| st.spectra().iter().map(|x| x.star_omega).fold(f64::INFINITY, f64::min);
        assert!((min_so(&r) - min_so(&s)).abs() < 1e-10);

        let q = PotentialState::new(d.clone(), (0..65).map(|j| 0.35 * d.point(j)[0].powi(2)).collect(), 1.0).unwrap();
        let target = FlowDomain::radial(2, 1.5, 40).unwrap();
        let rq = rescale_onto(&q, 2.0, &target).unwrap();
        for j in 0..41 {
            assert!((rq.values()[j] - 0.35 * target.point(j)[0].powi(2)).abs() < 1e-12);
        }
        assert!(matches!(rescale_onto(&q, 3.0, &target), Err(Error::OutOfRange(_))));

        let pd = FlowDomain::periodic(crate::spectral::SymMatrix::from_diag(&[0.5]).unwrap(), std::f64::consts::PI, 32).unwrap();
        let pv = (0..32).map(|i| pd.point(i)[0].cos()).collect();
        let ps = PotentialState::new(pd.clone(), pv, 1.0).unwrap();
        let r2 = rescale(&ps, 2.0).unwrap();
        for i in 0..32 {
            let x = pd.point(i)[0];
            assert!((r2.values()[i] - 0.25 * (2.0 * x).cos()).abs() < 1e-14);
        }
        assert!(rescale(&ps, 1.5).is_err());
    }

    fn setup(n: usize, u0: HomogeneousData, k: Option<f64>) -> ExpanderSetup {
        ExpanderSetup {
            n,
            u0,
            half_width: 4.0,
            resolution: 100,
            k,
            tau: 4.0,
            mu_schedule: vec![0.5, 1.0, 1.5],
            window: 1.0,
            similarity_times: default_checks(),
            trace_time: 0.01,
            dt: None,
        }
    }

    #[test]
    fn quadratic_data_is_already_an_expander() {
        let out = converge_to_expander(&setup(1, HomogeneousData::Quadratic { a: 0.6 }, None)).unwrap();
        assert!(out.report.final_residual < 1e-8, "{:?}", out.report);
        assert!(out.report.all_passed, "{:?}", out.report);
    }

    #[test]
    fn two_sided_data_approaches_an_expander() {
        let mut s = setup(
            1,
            HomogeneousData::TwoSided {
                a_minus: 0.2,
                a_plus: 1.0,
            },
            Some(1e40),
        );
        s.half_width = 10.0;
        s.resolution = 250;
        let out = converge_to_expander(&s).unwrap();
        let r = &out.report;
        assert!(r.trace_monotone, "{:?}", r.residual_trace);
        assert!(r.initial_trace.passed, "{:?}", r.initial_trace);
    }

    #[test]
    fn rejects_bad_setups() {
        let mut s = setup(2, HomogeneousData::Quadratic { a: -0.5 }, None);
        assert!(converge_to_expander(&s).is_err());
        s.u0 = HomogeneousData::Quadratic { a: 0.5 };
        s.window = 3.0;
        assert!(matches!(converge_to_expander(&s), Err(Error::OutOfRange(_))));
    }
}
