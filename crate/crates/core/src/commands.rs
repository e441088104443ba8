//! Batch commands: load a config, run one experiment, write artifacts and a
//! manifest into the output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{
    self, BoosterConfig, ConeConfig, ExpanderConfig, FlowConfig, RegularizeConfig, VerifyConfig,
};
use crate::error::{Error, Result};
use crate::expander::converge_to_expander;
use crate::flow::{run_flow, MonitorRecord, PotentialState};
use crate::geometry::{booster_eigen_ratio, booster_profile, booster_uniform_decay, cone_invariance_check, cone_slope};
use crate::inequality::run_campaign;
use crate::regularization::regularize_initial;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Flow,
    Verify,
    Cone,
    Booster,
    Expander,
    Regularize,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Flow => "flow",
            Command::Verify => "verify",
            Command::Cone => "cone",
            Command::Booster => "booster",
            Command::Expander => "expander",
            Command::Regularize => "regularize",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass = 0,
    PropertyFailure = 1,
    InputError = 2,
    NumericalAbort = 3,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

pub fn status_of(e: &Error) -> Status {
    match e {
        Error::NumericalAbort { .. } | Error::Branch(_) => Status::NumericalAbort,
        Error::SigmaSearch(_) => Status::PropertyFailure,
        _ => Status::InputError,
    }
}

#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    /// SHA-256 of the config bytes.
    pub config_digest: String,
    pub seed: Option<u64>,
    pub version: String,
    pub started: String,
    pub finished: String,
    pub exit_code: i32,
    pub message: String,
    pub outputs: Vec<String>,
}

#[derive(Debug)]
pub struct Outcome {
    pub status: Status,
    /// Human-readable lines for the terminal.
    pub lines: Vec<String>,
    /// `None` when the config never loaded.
    pub manifest: Option<RunManifest>,
}

struct Artifacts {
    dir: PathBuf,
    outputs: Vec<PathBuf>,
}

impl Artifacts {
    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<PathBuf> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.write(name, s)
    }
}

struct Ran {
    status: Status,
    seed: Option<u64>,
    lines: Vec<String>,
}

fn pass_if(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::PropertyFailure
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Runs one command. Errors become exit statuses; a manifest is written
/// whenever the config could be read.
pub fn execute(inv: &Invocation) -> Outcome {
    let started = now();
    let bytes = match std::fs::read(&inv.config) {
        Ok(b) => b,
        Err(e) => {
            return Outcome {
                status: Status::InputError,
                lines: vec![format!("cannot read {}: {e}", inv.config.display())],
                manifest: None,
            }
        }
    };
    if let Err(e) = std::fs::create_dir_all(&inv.out_dir) {
        return Outcome {
            status: Status::InputError,
            lines: vec![format!("cannot create {}: {e}", inv.out_dir.display())],
            manifest: None,
        };
    }
    let mut art = Artifacts {
        dir: inv.out_dir.clone(),
        outputs: Vec::new(),
    };
    let text = String::from_utf8_lossy(&bytes);
    let result = match inv.command {
        Command::Flow => flow(&text, inv.seed, &mut art),
        Command::Verify => verify(&text, inv.seed, &mut art),
        Command::Cone => cone(&text, inv.seed, &mut art),
        Command::Booster => booster(&text, &mut art),
        Command::Expander => expander(&text, &mut art),
        Command::Regularize => regularize(&text, &mut art),
    };
    let (ran, message) = match result {
        Ok(r) => {
            let msg = if r.status == Status::Pass { "pass" } else { "property failure" };
            (r, msg.to_string())
        }
        Err(e) => {
            let status = status_of(&e);
            if matches!(e, Error::Json(_) | Error::InvalidInput(_)) && art.outputs.is_empty() {
                return Outcome {
                    status,
                    lines: vec![format!("{}: {e}", inv.config.display())],
                    manifest: None,
                };
            }
            (
                Ran {
                    status,
                    seed: inv.seed,
                    lines: vec![e.to_string()],
                },
                e.to_string(),
            )
        }
    };
    let manifest = RunManifest {
        command: inv.command.name().into(),
        config_path: inv.config.display().to_string(),
        config_digest: digest(&bytes),
        seed: ran.seed,
        version: env!("CARGO_PKG_VERSION").into(),
        started,
        finished: now(),
        exit_code: ran.status.code(),
        message,
        outputs: art.outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let mut lines = ran.lines;
    let mut status = ran.status;
    let written = serde_json::to_string_pretty(&manifest)
        .map_err(Error::from)
        .and_then(|s| std::fs::write(inv.out_dir.join(MANIFEST_NAME), s + "\n").map_err(Error::from));
    if let Err(e) = written {
        lines.push(format!("manifest not written: {e}"));
        status = Status::InputError;
    }
    Outcome {
        status,
        lines,
        manifest: Some(manifest),
    }
}

fn monitor_csv(records: &[MonitorRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn state_csv(s: &PotentialState) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    s.to_field()?.write_csv(&mut buf)?;
    Ok(buf)
}

fn gnuplot(title: &str, csv: &str, x: usize, cols: &[(usize, &str)], logscale: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set title '{title}'");
    if logscale {
        let _ = writeln!(s, "set logscale xy");
    }
    let plots: Vec<String> = cols
        .iter()
        .map(|(c, name)| format!("'{csv}' using {x}:{c} with linespoints title '{name}'"))
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    let _ = writeln!(s, "pause -1");
    s
}

fn flow(text: &str, seed: Option<u64>, art: &mut Artifacts) -> Result<Ran> {
    let mut cfg: FlowConfig = config::parse(text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let domain = cfg.domain.build()?;
    cfg.initial.validate(&domain)?;
    let values = cfg.initial.sample(&domain, cfg.seed)?;
    let dump = art.dir.join("abort_state.csv");
    let start = match PotentialState::new(domain.clone(), values.clone(), 0.0) {
        Ok(s) => s,
        Err(Error::NumericalAbort { t, mut reason }) => {
            let mut buf = Vec::new();
            domain.values_field(&values)?.write_csv(&mut buf)?;
            let path = art.write("abort_state.csv", buf)?;
            reason.push_str(&format!("; initial state written to {}", path.display()));
            return Err(Error::NumericalAbort { t, reason });
        }
        Err(e) => return Err(e),
    };
    let out = match run_flow(start, &cfg.run_options(Some(dump.clone()))) {
        Ok(o) => o,
        Err(e) => {
            if dump.exists() {
                art.outputs.push(dump);
            }
            return Err(e);
        }
    };
    art.write("monitors.csv", monitor_csv(&out.records)?)?;
    art.json("summary.json", &out.summary)?;
    art.write("final_state.csv", state_csv(&out.final_state)?)?;
    for (i, s) in out.snapshots.iter().enumerate() {
        art.write(&format!("snapshot_{i:03}.csv"), state_csv(s)?)?;
    }
    art.write(
        "monitors.gp",
        gnuplot(
            "flow monitors",
            "monitors.csv",
            1,
            &[(2, "min *Omega"), (3, "min det S"), (6, "max |D2u|"), (9, "grad sup")],
            false,
        ),
    )?;
    art.write(
        "decay.gp",
        gnuplot("third-derivative decay", "monitors.csv", 1, &[(7, "max |D3u|")], true),
    )?;
    let mut lines: Vec<String> = out
        .summary
        .verdicts
        .iter()
        .map(|v| format!("{}: {} (value {:e}, threshold {:e})", v.name, verdict_word(v.passed), v.value, v.threshold))
        .collect();
    lines.push(format!("{} steps of dt = {:e}", out.summary.steps, out.summary.dt));
    Ok(Ran {
        status: pass_if(out.summary.all_passed),
        seed: Some(cfg.seed),
        lines,
    })
}

fn verdict_word(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn verify(text: &str, seed: Option<u64>, art: &mut Artifacts) -> Result<Ran> {
    let mut cfg: VerifyConfig = config::parse(text)?;
    if let Some(s) = seed {
        cfg.campaign.seed = s;
    }
    let report = run_campaign(&cfg.campaign)?;
    art.json("report.json", &report)?;
    let mut lines = Vec::new();
    for r in &report.results {
        lines.push(format!(
            "{:?}/{} n={}: {} evaluated, {} violations, worst relative {:e}",
            r.check, r.part, r.n, r.evaluated, r.violations, r.worst_relative
        ));
        for l in &r.listed {
            lines.push(format!("  {l}"));
        }
    }
    Ok(Ran {
        status: pass_if(report.passed),
        seed: Some(cfg.campaign.seed),
        lines,
    })
}

#[derive(Serialize)]
struct ConeArtifact {
    solution: crate::geometry::ConeSolution,
    invariance: crate::geometry::InvarianceReport,
}

fn cone(text: &str, seed: Option<u64>, art: &mut Artifacts) -> Result<Ran> {
    let mut cfg: ConeConfig = config::parse(text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let solution = cone_slope(cfg.delta1, cfg.delta2)?;
    let invariance = cone_invariance_check(&solution, cfg.samples, cfg.seed);
    let ok = invariance.violations == 0;
    let lines = vec![
        format!("tau = {}", solution.tau),
        format!("{} of {} translates left the region", invariance.violations, invariance.samples),
    ];
    art.json("cone.json", &ConeArtifact { solution, invariance })?;
    Ok(Ran {
        status: pass_if(ok),
        seed: Some(cfg.seed),
        lines,
    })
}

#[derive(Serialize)]
struct BoosterArtifact {
    kind: crate::geometry::BoosterKind,
    k: f64,
    tau: f64,
    theta: f64,
    ratio_min: f64,
    ratio_max: f64,
    ratio_within_bounds: bool,
    decay: Vec<crate::geometry::booster::DecayRow>,
    decay_bounds_hold: bool,
}

fn booster(text: &str, art: &mut Artifacts) -> Result<Ran> {
    let cfg: BoosterConfig = config::parse(text)?;
    let p = booster_profile(cfg.kind, cfg.k, cfg.tau, cfg.theta, cfg.grid)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &r in p.r_grid.iter().filter(|&&r| r > 0.0) {
        let q = booster_eigen_ratio(&p, r)?;
        lo = lo.min(q);
        hi = hi.max(q);
    }
    let ratio_ok = lo >= 1.0 / cfg.tau - 1e-9 && hi <= cfg.tau + 1e-9;
    let decay = match &cfg.decay {
        Some(d) => booster_uniform_decay(cfg.kind, cfg.tau, cfg.theta, d.radius, &d.k_list)?,
        None => Vec::new(),
    };
    let decay_ok = decay
        .iter()
        .filter(|r| r.bound_applies)
        .all(|r| r.sup_f <= r.f_bound * (1.0 + 1e-12));
    art.write("booster_profile.csv", p.to_csv())?;
    art.write(
        "booster_profile.gp",
        gnuplot("booster profile", "booster_profile.csv", 1, &[(3, "f"), (4, "f'"), (5, "F")], false),
    )?;
    art.json(
        "booster.json",
        &BoosterArtifact {
            kind: cfg.kind,
            k: cfg.k,
            tau: cfg.tau,
            theta: cfg.theta,
            ratio_min: lo,
            ratio_max: hi,
            ratio_within_bounds: ratio_ok,
            decay,
            decay_bounds_hold: decay_ok,
        },
    )?;
    Ok(Ran {
        status: pass_if(ratio_ok && decay_ok),
        seed: None,
        lines: vec![
            format!("eigen ratio in [{lo}, {hi}]: {}", verdict_word(ratio_ok)),
            format!("decay bounds: {}", verdict_word(decay_ok)),
        ],
    })
}

#[derive(Serialize)]
struct ExpanderArtifact<'a> {
    report: &'a crate::expander::ExpanderReport,
    residual_tol: f64,
    residual_passed: bool,
    flow: &'a crate::flow::FlowSummary,
}

fn expander(text: &str, art: &mut Artifacts) -> Result<Ran> {
    let cfg: ExpanderConfig = config::parse(text)?;
    let out = converge_to_expander(&cfg.expander)?;
    let rep = &out.report;
    let residual_ok = rep.final_residual <= cfg.residual_tol;
    let mut trace = String::from("mu,t,window,sup_residual\n");
    for r in &rep.residual_trace {
        let _ = writeln!(trace, "{:.17e},{:.17e},{:.17e},{:.17e}", r.mu, r.t, r.window, r.sup_residual);
    }
    art.write("residual_trace.csv", trace)?;
    art.write("profile.csv", state_csv(&out.profile.state)?)?;
    art.json(
        "expander.json",
        &ExpanderArtifact {
            report: rep,
            residual_tol: cfg.residual_tol,
            residual_passed: residual_ok,
            flow: &out.flow,
        },
    )?;
    art.write(
        "residual_trace.gp",
        gnuplot("expander residual", "residual_trace.csv", 1, &[(4, "sup residual")], true),
    )?;
    let mut lines = vec![format!(
        "final residual {:e} (tolerance {:e}): {}",
        rep.final_residual,
        cfg.residual_tol,
        verdict_word(residual_ok)
    )];
    for s in &rep.self_similarity {
        lines.push(format!("self-similarity t={}: defect {:e} bound {:e}", s.t, s.defect, s.bound));
    }
    lines.push(format!(
        "initial trace defect {:e} bound {:e}",
        rep.initial_trace.defect, rep.initial_trace.bound
    ));
    Ok(Ran {
        status: pass_if(rep.all_passed && residual_ok),
        seed: None,
        lines,
    })
}

fn regularize(text: &str, art: &mut Artifacts) -> Result<Ran> {
    let cfg: RegularizeConfig = config::parse(text)?;
    let u0 = cfg.input.build()?;
    let out = regularize_initial(&u0, cfg.eps1, cfg.eps2, cfg.k)?;
    let rep = &out.report;
    let ok = rep.strictly_2convex && rep.max_slope_sq <= rep.slope_sq_bound;
    let mut buf = Vec::new();
    out.field.write_csv(&mut buf)?;
    art.write("regularized.csv", buf)?;
    art.json("regularization.json", rep)?;
    Ok(Ran {
        status: pass_if(ok),
        seed: None,
        lines: vec![
            format!("sigma = {}, tau = {}", rep.sigma, rep.tau),
            format!("max |D2w|^2 = {:e} (bound {:e})", rep.max_slope_sq, rep.slope_sq_bound),
            format!("strictly two-convex: {}", rep.strictly_2convex),
        ],
    })
}

/// Path of the manifest written by a run into `out_dir`.
pub fn manifest_path(out_dir: &Path) -> PathBuf {
    out_dir.join(MANIFEST_NAME)
}
