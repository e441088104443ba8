//! Radial booster functions.
//!
//! A radial `F(r)` with `f = F'` has Hessian eigenvalues `f'` (radial) and
//! `f/r` (tangential, multiplicity `n−1`). Prescribing their ratio
//! `u(r) = f'(r) r / f(r)` determines `f` through
//! `f(r) = f(r₀) exp(∫_{r₀}^r u(ρ)/ρ dρ)`, and `F(0) = 0` fixes `F`.
//!
//! The outer kind (`F_k`) ramps `u` from 1 up to `τ` on `[θ, 2θ]` and back to
//! 1 on `[k/2, k]`, anchored at `f(k) = k`, so `D²F_k = I` outside `B_k`.
//! The inner kind (`E_k`) ramps `u` from 1 down to `1/τ` on `[1/k, 2/k]`,
//! anchored at `e(1/k) = 1/k`, so `D²E_k = I` inside `B_{1/k}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SymMatrix;

/// Default inner transition radius of the outer kind.
pub const DEFAULT_THETA: f64 = 0.05;

/// Minimum number of grid cells across each transition layer.
pub const MIN_LAYER_CELLS: usize = 32;

const TABLE_CELLS: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoosterKind {
    Outer,
    Inner,
}

/// `exp(−1/s)` smoothstep: 0 for `s ≤ 0`, 1 for `s ≥ 1`, C^∞ and monotone.
pub fn smoothstep(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / s).exp();
    let b = (-1.0 / (1.0 - s)).exp();
    a / (a + b)
}

#[derive(Clone, Debug)]
enum Shape {
    Const(f64),
    Ramp { from: f64, to: f64 },
}

/// Cumulative log-integral and antiderivative on a log-spaced table.
#[derive(Clone, Debug)]
struct RampTable {
    log_a: f64,
    ds: f64,
    /// `∫_a^{r_j} u(ρ)/ρ dρ`
    log_int: Vec<f64>,
    /// `∫_a^{r_j} f(ρ) dρ`
    area: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Segment {
    a: f64,
    b: f64,
    shape: Shape,
    /// `ln f(a)`; unused for the first segment, which starts at the origin.
    log_f_a: f64,
    /// `F(a)`
    big_f_a: f64,
    table: Option<RampTable>,
}

/// Analytic evaluator of one booster function.
#[derive(Clone, Debug)]
pub struct Booster {
    kind: BoosterKind,
    k: f64,
    tau: f64,
    theta: f64,
    segments: Vec<Segment>,
    /// `f(r) = slope0 · r` on the first segment.
    slope0: f64,
}

impl Booster {
    pub fn new(kind: BoosterKind, k: f64, tau: f64, theta: f64) -> Result<Self> {
        if !(tau >= 1.0 && tau.is_finite()) {
            return Err(Error::invalid(format!("tau = {tau} must be at least 1")));
        }
        if !(k >= 1.0 && k.is_finite()) {
            return Err(Error::invalid(format!("k = {k} must be at least 1")));
        }
        let (breaks, shapes, anchor) = match kind {
            BoosterKind::Outer => {
                if !(theta > 0.0 && theta < 0.1) {
                    return Err(Error::invalid(format!("theta = {theta} must lie in (0, 1/10)")));
                }
                (
                    vec![0.0, theta, 2.0 * theta, k / 2.0, k, f64::INFINITY],
                    vec![
                        Shape::Const(1.0),
                        Shape::Ramp { from: 1.0, to: tau },
                        Shape::Const(tau),
                        Shape::Ramp { from: tau, to: 1.0 },
                        Shape::Const(1.0),
                    ],
                    4usize,
                )
            }
            BoosterKind::Inner => (
                vec![0.0, 1.0 / k, 2.0 / k, f64::INFINITY],
                vec![
                    Shape::Const(1.0),
                    Shape::Ramp { from: 1.0, to: 1.0 / tau },
                    Shape::Const(1.0 / tau),
                ],
                1usize,
            ),
        };
        let mut segments: Vec<Segment> = breaks
            .windows(2)
            .zip(shapes)
            .map(|(w, shape)| Segment {
                a: w[0],
                b: w[1],
                shape,
                log_f_a: 0.0,
                big_f_a: 0.0,
                table: None,
            })
            .collect();
        for seg in segments.iter_mut() {
            if let Shape::Ramp { .. } = seg.shape {
                seg.table = Some(build_log_table(seg));
            }
        }
        // ln f at each breakpoint from the anchor f(r) = r at `breaks[anchor]`
        let anchor_r = breaks[anchor];
        segments[anchor].log_f_a = anchor_r.ln();
        for i in (anchor + 1)..segments.len() {
            let prev = &segments[i - 1];
            let v = prev.log_f_a + seg_log_int(prev, prev.b);
            segments[i].log_f_a = v;
        }
        for i in (1..anchor).rev() {
            let cur = &segments[i];
            let v = segments[i + 1].log_f_a - seg_log_int(cur, cur.b);
            segments[i].log_f_a = v;
        }
        let slope0 = (segments[1].log_f_a - segments[1].a.ln()).exp();
        let mut booster = Booster {
            kind,
            k,
            tau,
            theta,
            segments,
            slope0,
        };
        booster.build_areas();
        Ok(booster)
    }

    fn build_areas(&mut self) {
        let slope0 = self.slope0;
        let a1 = self.segments[1].a;
        self.segments[1].big_f_a = 0.5 * slope0 * a1 * a1;
        for i in 1..self.segments.len() {
            let seg = self.segments[i].clone();
            if let Some(t) = &seg.table {
                let mut area = vec![0.0; t.log_int.len()];
                for j in 1..area.len() {
                    let s0 = t.log_a + (j - 1) as f64 * t.ds;
                    area[j] = area[j - 1] + self.ramp_area(&seg, t, j - 1, s0, s0 + t.ds);
                }
                if let Some(tm) = self.segments[i].table.as_mut() {
                    tm.area = area;
                }
            }
            if i + 1 < self.segments.len() {
                let seg = &self.segments[i];
                let end = self.segment_area(seg, seg.b);
                self.segments[i + 1].big_f_a = seg.big_f_a + end;
            }
        }
    }

    pub fn kind(&self) -> BoosterKind {
        self.kind
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Transition layers `[a, b]` of the ratio profile.
    pub fn layers(&self) -> Vec<(f64, f64)> {
        self.segments
            .iter()
            .filter(|s| matches!(s.shape, Shape::Ramp { .. }))
            .map(|s| (s.a, s.b))
            .collect()
    }

    fn segment_of(&self, r: f64) -> &Segment {
        let i = self.segments.partition_point(|s| s.b <= r);
        &self.segments[i.min(self.segments.len() - 1)]
    }

    /// The ratio profile `u_k(r) = f'(r) r / f(r)`.
    pub fn ratio(&self, r: f64) -> f64 {
        shape_value(self.segment_of(r.max(0.0)), r)
    }

    /// `f = F'`.
    pub fn f(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        if self.is_identity_zone(r) {
            return r;
        }
        let seg = self.segment_of(r);
        if seg.a == 0.0 {
            return self.slope0 * r;
        }
        (seg.log_f_a + seg_log_int(seg, r)).exp()
    }

    /// Tangential eigenvalue `f(r)/r`, with its limit at the origin.
    pub fn f_over_r(&self, r: f64) -> f64 {
        if self.is_identity_zone(r) {
            return 1.0;
        }
        if r <= self.segments[0].b {
            return self.slope0;
        }
        self.f(r) / r
    }

    /// Radial eigenvalue `f'(r) = u(r) f(r)/r`.
    pub fn fprime(&self, r: f64) -> f64 {
        if self.is_identity_zone(r) {
            return 1.0;
        }
        self.ratio(r) * self.f_over_r(r)
    }

    /// `F(r)` with `F(0) = 0`.
    pub fn value(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        let seg = self.segment_of(r);
        if seg.a == 0.0 {
            return 0.5 * self.slope0 * r * r;
        }
        seg.big_f_a + self.segment_area(seg, r)
    }

    /// `D²F(x) = (f/r) I + (f' − f/r) x̂x̂ᵀ`.
    pub fn hessian_at(&self, x: &[f64]) -> SymMatrix {
        let n = x.len();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tang = self.f_over_r(r);
        let rad = self.fprime(r);
        let mut h = SymMatrix::zeros_unchecked(n);
        let d = rad - tang;
        for i in 0..n {
            for j in i..n {
                let mut v = if r > 0.0 && d != 0.0 { d * x[i] * x[j] / (r * r) } else { 0.0 };
                if i == j {
                    v += tang;
                }
                h.set(i, j, v);
            }
        }
        h
    }

    /// `f(r) = r` exactly: outside `B_k` (outer) or inside `B_{1/k}` (inner).
    fn is_identity_zone(&self, r: f64) -> bool {
        match self.kind {
            BoosterKind::Outer => r >= self.k,
            BoosterKind::Inner => r <= 1.0 / self.k,
        }
    }

    /// `∫_{seg.a}^{r} f`.
    fn segment_area(&self, seg: &Segment, r: f64) -> f64 {
        if seg.a == 0.0 {
            return 0.5 * self.slope0 * r * r;
        }
        match (&seg.shape, &seg.table) {
            (Shape::Const(c), _) => {
                let fa = seg.log_f_a.exp();
                let e = c + 1.0;
                fa * seg.a / e * ((r / seg.a).powf(e) - 1.0)
            }
            (Shape::Ramp { .. }, Some(t)) => {
                let s = r.ln();
                let j = (((s - t.log_a) / t.ds).floor().max(0.0) as usize).min(t.log_int.len() - 1);
                let s0 = t.log_a + j as f64 * t.ds;
                t.area[j] + self.ramp_area(seg, t, j, s0, s)
            }
            _ => unreachable!("ramp segments always carry a table"),
        }
    }

    /// Simpson approximation of `∫ f(e^s) e^s ds` over `[s0, s1]` inside
    /// table cell `j`.
    fn ramp_area(&self, seg: &Segment, t: &RampTable, j: usize, s0: f64, s1: f64) -> f64 {
        if s1 <= s0 {
            return 0.0;
        }
        let g = |s: f64| {
            let r = s.exp();
            let li = t.log_int[j] + log_int_within(seg, t.log_a + j as f64 * t.ds, s);
            (seg.log_f_a + li).exp() * r
        };
        let sm = 0.5 * (s0 + s1);
        (s1 - s0) / 6.0 * (g(s0) + 4.0 * g(sm) + g(s1))
    }
}

fn shape_value(seg: &Segment, r: f64) -> f64 {
    match seg.shape {
        Shape::Const(c) => c,
        Shape::Ramp { from, to } => {
            let w = smoothstep((r - seg.a) / (seg.b - seg.a));
            (1.0 - w) * from + w * to
        }
    }
}

fn build_log_table(seg: &Segment) -> RampTable {
    let log_a = seg.a.ln();
    let ds = (seg.b.ln() - log_a) / TABLE_CELLS as f64;
    let mut log_int = vec![0.0; TABLE_CELLS + 1];
    for j in 1..=TABLE_CELLS {
        let s0 = log_a + (j - 1) as f64 * ds;
        log_int[j] = log_int[j - 1] + log_int_within(seg, s0, s0 + ds);
    }
    RampTable {
        log_a,
        ds,
        log_int,
        area: Vec::new(),
    }
}

/// Simpson rule for `∫ u(e^s) ds` on a short interval.
fn log_int_within(seg: &Segment, s0: f64, s1: f64) -> f64 {
    if s1 <= s0 {
        return 0.0;
    }
    let u = |s: f64| shape_value(seg, s.exp());
    let sm = 0.5 * (s0 + s1);
    (s1 - s0) / 6.0 * (u(s0) + 4.0 * u(sm) + u(s1))
}

/// `∫_{seg.a}^{r} u(ρ)/ρ dρ` for `r` inside the segment.
fn seg_log_int(seg: &Segment, r: f64) -> f64 {
    match (&seg.shape, &seg.table) {
        (Shape::Const(c), _) => c * (r / seg.a).ln(),
        (Shape::Ramp { .. }, Some(t)) => {
            let s = r.ln();
            let j = (((s - t.log_a) / t.ds).floor().max(0.0) as usize).min(t.log_int.len() - 1);
            let s0 = t.log_a + j as f64 * t.ds;
            t.log_int[j] + log_int_within(seg, s0, s)
        }
        _ => unreachable!("ramp segments always carry a table"),
    }
}

/// Radial sampling layout of an exported profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GridSpec {
    /// Each transition layer gets `layer_cells`, each other interval
    /// `bulk_cells`.
    Layered {
        r_max: f64,
        layer_cells: usize,
        bulk_cells: usize,
    },
    Uniform { r_max: f64, cells: usize },
}

#[derive(Clone, Debug)]
pub struct BoosterProfile {
    pub booster: Booster,
    pub r_grid: Vec<f64>,
    pub u_of_r: Vec<f64>,
    pub f_of_r: Vec<f64>,
    pub fprime_of_r: Vec<f64>,
    pub big_f_of_r: Vec<f64>,
}

impl BoosterProfile {
    pub fn kind(&self) -> BoosterKind {
        self.booster.kind
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,u,f,fprime,F\n");
        for i in 0..self.r_grid.len() {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                self.r_grid[i], self.u_of_r[i], self.f_of_r[i], self.fprime_of_r[i], self.big_f_of_r[i]
            ));
        }
        out
    }
}

pub fn booster_profile(
    kind: BoosterKind,
    k: f64,
    tau: f64,
    theta: f64,
    grid: GridSpec,
) -> Result<BoosterProfile> {
    let booster = Booster::new(kind, k, tau, theta)?;
    let r_grid = build_grid(&booster, grid)?;
    let u_of_r = r_grid.iter().map(|&r| booster.ratio(r)).collect();
    let f_of_r = r_grid.iter().map(|&r| booster.f(r)).collect();
    let fprime_of_r = r_grid.iter().map(|&r| booster.fprime(r)).collect();
    let big_f_of_r = r_grid.iter().map(|&r| booster.value(r)).collect();
    Ok(BoosterProfile {
        booster,
        r_grid,
        u_of_r,
        f_of_r,
        fprime_of_r,
        big_f_of_r,
    })
}

fn build_grid(b: &Booster, grid: GridSpec) -> Result<Vec<f64>> {
    match grid {
        GridSpec::Uniform { r_max, cells } => {
            if !(r_max > 0.0) || cells == 0 {
                return Err(Error::invalid("uniform grid needs r_max > 0 and cells > 0"));
            }
            let h = r_max / cells as f64;
            for (a, bb) in b.layers() {
                if a < r_max && (bb - a) / h < MIN_LAYER_CELLS as f64 {
                    return Err(Error::Resolution(format!(
                        "layer [{a}, {bb}] spans {:.1} cells, need {MIN_LAYER_CELLS}",
                        (bb - a) / h
                    )));
                }
            }
            Ok((0..=cells).map(|i| i as f64 * h).collect())
        }
        GridSpec::Layered {
            r_max,
            layer_cells,
            bulk_cells,
        } => {
            if !(r_max > 0.0) || bulk_cells == 0 {
                return Err(Error::invalid("layered grid needs r_max > 0 and bulk_cells > 0"));
            }
            if layer_cells < MIN_LAYER_CELLS {
                return Err(Error::Resolution(format!(
                    "{layer_cells} cells per transition layer, need {MIN_LAYER_CELLS}"
                )));
            }
            let mut out = vec![0.0];
            for seg in &b.segments {
                if seg.a >= r_max {
                    break;
                }
                let end = seg.b.min(r_max);
                let cells = if matches!(seg.shape, Shape::Ramp { .. }) { layer_cells } else { bulk_cells };
                let h = (end - seg.a) / cells as f64;
                for i in 1..=cells {
                    out.push(if i == cells { end } else { seg.a + i as f64 * h });
                }
            }
            Ok(out)
        }
    }
}

/// `f'(r)/(f(r)/r)`, which reproduces `u_k(r)`.
pub fn booster_eigen_ratio(p: &BoosterProfile, r: f64) -> Result<f64> {
    let r_max = *p.r_grid.last().unwrap_or(&0.0);
    if !(r > 0.0 && r <= r_max) {
        return Err(Error::OutOfRange(format!("r = {r} outside (0, {r_max}]")));
    }
    Ok(p.booster.fprime(r) / p.booster.f_over_r(r))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayRow {
    pub k: f64,
    pub sup_big_f: f64,
    pub sup_f: f64,
    pub sup_fprime: f64,
    /// `(2/k)^{τ−1} R^τ` (outer) or `(2/k)^{1−1/τ} R^{1/τ}` (inner).
    pub f_bound: f64,
    /// Whether `B_R` sits inside the regime where the bound applies.
    pub bound_applies: bool,
}

/// Sup norms of `F_k`, `f_k` and `f_k'` over `B_R` for each `k`.
pub fn booster_uniform_decay(
    kind: BoosterKind,
    tau: f64,
    theta: f64,
    radius: f64,
    k_list: &[f64],
) -> Result<Vec<DecayRow>> {
    if !(radius > 0.0) {
        return Err(Error::invalid("radius must be positive"));
    }
    let samples = 4000;
    k_list
        .iter()
        .map(|&k| {
            let b = Booster::new(kind, k, tau, theta)?;
            let mut row = DecayRow {
                k,
                sup_big_f: 0.0,
                sup_f: 0.0,
                sup_fprime: 0.0,
                f_bound: 0.0,
                bound_applies: false,
            };
            let mut rs: Vec<f64> = (0..=samples).map(|i| radius * i as f64 / samples as f64).collect();
            for (a, bb) in b.layers() {
                rs.extend([a, bb].iter().filter(|&&v| v <= radius));
            }
            for r in rs {
                row.sup_big_f = row.sup_big_f.max(b.value(r).abs());
                row.sup_f = row.sup_f.max(b.f(r).abs());
                row.sup_fprime = row.sup_fprime.max(b.fprime(r).abs());
            }
            match kind {
                BoosterKind::Outer => {
                    row.f_bound = (2.0 / k).powf(tau - 1.0) * radius.powf(tau);
                    row.bound_applies = radius <= k / 2.0;
                }
                BoosterKind::Inner => {
                    row.f_bound = (2.0 / k).powf(1.0 - 1.0 / tau) * radius.powf(1.0 / tau);
                    row.bound_applies = radius >= 2.0 / k;
                }
            }
            Ok(row)
        })
        .collect()
}
