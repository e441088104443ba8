use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::monitor::{monitors, MonitorRecord};
use super::{step, PotentialState};
use crate::error::{Error, Result};

fn default_tol() -> f64 {
    1e-3
}
fn default_true() -> bool {
    true
}
fn default_window() -> [f64; 2] {
    [0.1, 1.0]
}

/// Verdicts to evaluate after a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    /// `min *Ω`, `min det𝔖` and the pairwise margins never drop below their
    /// initial values by more than `tol_mon`.
    #[serde(default = "default_true")]
    pub preservation: bool,
    /// `sup |Dp|` never increases by more than `tol_mon`.
    #[serde(default)]
    pub gradient: bool,
    /// Upper bound on the fitted slope of `log sup|D³u|` against `log t`.
    #[serde(default)]
    pub decay_slope_max: Option<f64>,
    #[serde(default = "default_window")]
    pub decay_window: [f64; 2],
    /// Upper bound on `sup|D²u|(T) / sup|D²u|(0)`.
    #[serde(default)]
    pub d2_ratio_max: Option<f64>,
    /// Tolerance for `u(T) = u(0) + TΘ` when the initial angle is constant.
    #[serde(default)]
    pub exact_quadratic_tol: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol_mon: f64,
}

impl Default for Checks {
    fn default() -> Self {
        Checks {
            preservation: true,
            gradient: false,
            decay_slope_max: None,
            decay_window: default_window(),
            d2_ratio_max: None,
            exact_quadratic_tol: None,
            tol_mon: default_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub t_end: f64,
    pub sample_dt: f64,
    /// `None` uses the stability limit.
    pub dt: Option<f64>,
    pub snapshot_times: Vec<f64>,
    pub checks: Checks,
    /// Where to write the last good state if the run aborts.
    pub dump_path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowSummary {
    pub steps: usize,
    pub dt: f64,
    pub t_end: f64,
    pub max_dudt: f64,
    pub decay_slope: Option<f64>,
    pub exact_quadratic_residual: Option<f64>,
    pub verdicts: Vec<Verdict>,
    pub all_passed: bool,
}

#[derive(Clone, Debug)]
pub struct FlowOutcome {
    pub records: Vec<MonitorRecord>,
    pub snapshots: Vec<PotentialState>,
    pub final_state: PotentialState,
    pub summary: FlowSummary,
}

fn validate(opts: &RunOptions, limit: f64) -> Result<f64> {
    if !(opts.t_end > 0.0 && opts.t_end.is_finite()) {
        return Err(Error::invalid(format!("t_end = {} must be positive", opts.t_end)));
    }
    if !(opts.sample_dt > 0.0) || opts.t_end / opts.sample_dt > 1e7 {
        return Err(Error::invalid(format!("bad sample interval {}", opts.sample_dt)));
    }
    if opts.snapshot_times.iter().any(|&t| !(0.0..=opts.t_end).contains(&t)) {
        return Err(Error::invalid("snapshot times must lie in [0, t_end]"));
    }
    if !(opts.checks.tol_mon >= 0.0) {
        return Err(Error::invalid("tol_mon must be non-negative"));
    }
    let w = opts.checks.decay_window;
    if !(w[0] > 0.0 && w[1] > w[0]) {
        return Err(Error::invalid("decay window must satisfy 0 < t0 < t1"));
    }
    let dt = opts.dt.unwrap_or(limit);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::Stability { dt, limit });
    }
    Ok(dt)
}

/// Integrates to `t_end`, landing exactly on sample and snapshot times.
pub fn run_flow(initial: PotentialState, opts: &RunOptions) -> Result<FlowOutcome> {
    let dt = validate(opts, initial.domain.stability_limit())?;
    let t0 = initial.t;
    let mut targets: Vec<f64> = opts.snapshot_times.iter().map(|t| t0 + t).collect();
    let samples = (opts.t_end / opts.sample_dt).floor() as usize;
    targets.extend((1..=samples).map(|k| t0 + k as f64 * opts.sample_dt));
    targets.push(t0 + opts.t_end);
    targets.retain(|&t| t > t0 && t <= t0 + opts.t_end * (1.0 + 1e-12));
    targets.sort_by(f64::total_cmp);
    targets.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    let is_snapshot = |t: f64| opts.snapshot_times.iter().any(|&s| (t0 + s - t).abs() <= 1e-12 * (1.0 + t.abs()));

    let rhs0 = initial.rhs();
    let values0 = initial.values().to_vec();
    let mut state = initial;
    let mut records = vec![monitors(&state)];
    let mut snapshots = Vec::new();
    if is_snapshot(t0) {
        snapshots.push(state.clone());
    }
    let mut max_dudt = records[0].max_dudt;
    let mut steps = 0;
    for &target in &targets {
        while state.t < target {
            let remaining = target - state.t;
            let h = if remaining <= dt * (1.0 + 1e-12) { remaining } else { dt.min(remaining) };
            let next = match step(&state, h) {
                Ok(s) => s,
                Err(e) => return Err(abort(&state, e, opts)),
            };
            state = next;
            steps += 1;
            if (state.t - target).abs() <= 1e-12 * (1.0 + target.abs()) {
                state.t = target;
            }
            max_dudt = max_dudt.max(state.rhs().iter().fold(0.0, |m, v| m.max(v.abs())));
        }
        let rec = monitors(&state);
        max_dudt = max_dudt.max(rec.max_dudt);
        records.push(rec);
        if is_snapshot(target) {
            snapshots.push(state.clone());
        }
    }

    let constant_rhs = {
        let (lo, hi) = rhs0.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        hi - lo <= 1e-14 * (1.0 + hi.abs())
    };
    let exact_quadratic_residual = constant_rhs.then(|| {
        let t = state.t - t0;
        state
            .values()
            .iter()
            .zip(&values0)
            .zip(&rhs0)
            .map(|((v, v0), r)| (v - v0 - t * r).abs())
            .fold(0.0, f64::max)
    });
    let decay_slope = fit_decay(&records, t0, opts.checks.decay_window);
    let verdicts = evaluate(&records, &opts.checks, decay_slope, exact_quadratic_residual);
    let all_passed = verdicts.iter().all(|v| v.passed);
    Ok(FlowOutcome {
        summary: FlowSummary {
            steps,
            dt,
            t_end: opts.t_end,
            max_dudt,
            decay_slope,
            exact_quadratic_residual,
            verdicts,
            all_passed,
        },
        records,
        snapshots,
        final_state: state,
    })
}

fn abort(state: &PotentialState, e: Error, opts: &RunOptions) -> Error {
    let Error::NumericalAbort { reason, .. } = e else {
        return e;
    };
    let mut reason = reason;
    if let Some(path) = &opts.dump_path {
        let written = state
            .to_field()
            .and_then(|f| f.write_csv(std::fs::File::create(path)?));
        match written {
            Ok(()) => reason.push_str(&format!("; last good state written to {}", path.display())),
            Err(w) => reason.push_str(&format!("; state dump failed: {w}")),
        }
    }
    Error::NumericalAbort { t: state.t, reason }
}

/// Least-squares slope of `log sup|D³u|` against `log t` on the window.
pub fn fit_decay(records: &[MonitorRecord], t0: f64, window: [f64; 2]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| {
            let t = r.t - t0;
            t >= window[0] * (1.0 - 1e-12) && t <= window[1] * (1.0 + 1e-12) && r.max_d3_norm > 0.0
        })
        .map(|r| ((r.t - t0).ln(), r.max_d3_norm.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn evaluate(
    records: &[MonitorRecord],
    checks: &Checks,
    decay_slope: Option<f64>,
    exact_residual: Option<f64>,
) -> Vec<Verdict> {
    let tol = checks.tol_mon;
    let first = &records[0];
    let mut out = Vec::new();
    if checks.preservation {
        let series: [(&str, fn(&MonitorRecord) -> f64); 4] = [
            ("min_star_omega", |r| r.min_star_omega),
            ("min_det_s_frak", |r| r.min_det_s_frak),
            ("min_pair_sum", |r| r.min_pair_sum),
            ("min_pair_prod", |r| r.min_pair_prod),
        ];
        for (name, get) in series {
            let init = get(first);
            if !init.is_finite() {
                continue;
            }
            let (worst, at) = records
                .iter()
                .map(|r| (get(r), r.t))
                .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
            out.push(Verdict {
                name: format!("{name}_preserved"),
                passed: worst >= init - tol,
                value: worst,
                threshold: init - tol,
                detail: format!("initial {init:.6e}, lowest {worst:.6e} at t = {at:.4}"),
            });
        }
    }
    if checks.gradient {
        let mut running = first.grad_sup;
        let mut worst_jump = f64::NEG_INFINITY;
        for w in records.windows(2) {
            worst_jump = worst_jump.max(w[1].grad_sup - w[0].grad_sup);
            running = running.max(w[1].grad_sup);
        }
        let growth = running - first.grad_sup;
        let value = worst_jump.max(growth);
        out.push(Verdict {
            name: "gradient_non_increasing".into(),
            passed: value <= tol,
            value,
            threshold: tol,
            detail: format!("sup|Dp| from {:.6e} to {:.6e}", first.grad_sup, records.last().unwrap().grad_sup),
        });
    }
    if let Some(max) = checks.d2_ratio_max {
        let last = records.last().unwrap();
        let ratio = if first.max_d2_norm > 0.0 {
            last.max_d2_norm / first.max_d2_norm
        } else {
            f64::INFINITY
        };
        out.push(Verdict {
            name: "d2_ratio".into(),
            passed: ratio <= max,
            value: ratio,
            threshold: max,
            detail: format!("sup|D²u| from {:.6e} to {:.6e}", first.max_d2_norm, last.max_d2_norm),
        });
    }
    if let Some(max) = checks.decay_slope_max {
        let slope = decay_slope.unwrap_or(f64::NAN);
        out.push(Verdict {
            name: "d3_decay_slope".into(),
            passed: slope <= max,
            value: slope,
            threshold: max,
            detail: format!(
                "fit on t in [{}, {}]",
                checks.decay_window[0], checks.decay_window[1]
            ),
        });
    }
    if let Some(tol_q) = checks.exact_quadratic_tol {
        let r = exact_residual.unwrap_or(f64::NAN);
        out.push(Verdict {
            name: "exact_quadratic".into(),
            passed: r <= tol_q,
            value: r,
            threshold: tol_q,
            detail: if exact_residual.is_some() {
                "drift against u0 + tΘ".into()
            } else {
                "initial angle not constant".into()
            },
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{FlowDomain, InitialData};
    use crate::spectral::SymMatrix;
    use std::f64::consts::PI;

    fn opts(t_end: f64) -> RunOptions {
        RunOptions {
            t_end,
            sample_dt: t_end / 10.0,
            dt: None,
            snapshot_times: vec![0.0, t_end / 2.0],
            checks: Checks::default(),
            dump_path: None,
        }
    }

    #[test]
    fn lands_on_sample_times() {
        let d = FlowDomain::periodic(SymMatrix::from_diag(&[1.0]).unwrap(), PI, 32).unwrap();
        let v = (0..32).map(|i| 0.1 * d.point(i)[0].cos()).collect();
        let out = run_flow(PotentialState::new(d, v, 0.0).unwrap(), &opts(0.3)).unwrap();
        assert_eq!(out.records.len(), 11);
        for (k, r) in out.records.iter().enumerate() {
            assert!((r.t - 0.03 * k as f64).abs() < 1e-14);
        }
        assert_eq!(out.snapshots.len(), 2);
        assert_eq!(out.final_state.t, out.records.last().unwrap().t);
        assert!(out.summary.all_passed, "{:?}", out.summary.verdicts);
    }

    #[test]
    fn exact_quadratic_verdict() {
        let a0 = SymMatrix::from_diag(&[1.0, -0.4]).unwrap();
        let d = FlowDomain::periodic(a0, PI, 16).unwrap();
        let mut o = opts(1.0);
        o.checks.exact_quadratic_tol = Some(1e-10);
        let out = run_flow(PotentialState::new(d, vec![0.0; 256], 0.0).unwrap(), &o).unwrap();
        assert!(out.summary.exact_quadratic_residual.unwrap() < 1e-12);
        assert!(out.summary.all_passed);
    }

    #[test]
    fn rejects_unstable_step() {
        let d = FlowDomain::line(1.0, 32).unwrap();
        let s = PotentialState::new(d.clone(), vec![0.0; 33], 0.0).unwrap();
        let mut o = opts(0.1);
        o.dt = Some(2.0 * d.stability_limit());
        assert!(matches!(run_flow(s, &o), Err(Error::Stability { .. })));
    }

    #[test]
    fn smooth_data_decays() {
        let d = FlowDomain::periodic(SymMatrix::from_diag(&[0.5]).unwrap(), PI, 64).unwrap();
        let p = InitialData::Fourier {
            modes: vec![crate::flow::FourierMode {
                amplitude: 0.2,
                wavenumber: vec![1],
                phase: 0.0,
            }],
        }
        .sample(&d, 0)
        .unwrap();
        let mut o = opts(1.0);
        o.checks.gradient = true;
        o.checks.d2_ratio_max = Some(1.0 + 1e-3);
        let out = run_flow(PotentialState::new(d, p, 0.0).unwrap(), &o).unwrap();
        assert!(out.summary.all_passed, "{:?}", out.summary.verdicts);
    }
}
