//! Method-of-lines integration of `u_t = Σᵢ arctan λᵢ(D²u)`.
//!
//! Three discretizations are supported:
//!
//! * `Periodic`: `u = ½xᵀA₀x + p(x)` with `p` periodic on `[-R, R)ⁿ`,
//!   `n ≤ 3`. Only `p` is stored and evolved.
//! * `Radial`: `u(r)` on `[0, R]` for radial data in dimension `n ≤ 8`, with
//!   Hessian eigenvalues `u″` and `u′/r` (multiplicity `n−1`).
//! * `Line`: `u(x)` on `[-R, R]`, `n = 1`.
//!
//! Non-periodic outer nodes copy the Hessian of their neighbour, so they move
//! at the neighbour's rate.

pub mod initial;
pub mod monitor;
pub mod run;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::spectral::{eigen_sym, lagrangian_angle, Spectrum, SymMatrix, MAX_DIM};

pub use initial::{FourierMode, InitialData};
pub use monitor::{gradient_identity_check, monitors, MonitorRecord};
pub use run::{run_flow, Checks, FlowOutcome, FlowSummary, RunOptions, Verdict};

pub const MIN_RESOLUTION: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    Periodic,
    Radial,
    Line,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowDomain {
    pub mode: FlowMode,
    pub n: usize,
    /// Box half-width (periodic, line) or radial extent.
    pub half_width: f64,
    /// Cells per axis.
    pub resolution: usize,
    /// Quadratic background of the periodic mode; zero otherwise.
    pub a0: SymMatrix,
}

impl FlowDomain {
    pub fn periodic(a0: SymMatrix, half_width: f64, resolution: usize) -> Result<Self> {
        Self::checked(FlowMode::Periodic, a0.n(), half_width, resolution, a0)
    }

    pub fn radial(n: usize, half_width: f64, resolution: usize) -> Result<Self> {
        Self::checked(FlowMode::Radial, n, half_width, resolution, SymMatrix::zeros(n)?)
    }

    pub fn line(half_width: f64, resolution: usize) -> Result<Self> {
        Self::checked(FlowMode::Line, 1, half_width, resolution, SymMatrix::zeros(1)?)
    }

    fn checked(mode: FlowMode, n: usize, half_width: f64, resolution: usize, a0: SymMatrix) -> Result<Self> {
        let max_n = match mode {
            FlowMode::Periodic => 3,
            FlowMode::Radial => MAX_DIM,
            FlowMode::Line => 1,
        };
        if n == 0 || n > max_n {
            return Err(Error::invalid(format!("{mode:?} mode supports n in 1..={max_n}, got {n}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::invalid(format!("half-width {half_width} must be positive")));
        }
        if resolution < MIN_RESOLUTION {
            return Err(Error::Resolution(format!(
                "{resolution} cells per axis, need at least {MIN_RESOLUTION}"
            )));
        }
        if resolution > 1 << 24
            || mode == FlowMode::Periodic && resolution.checked_pow(n as u32).is_none_or(|c| c > 1 << 24)
        {
            return Err(Error::invalid("periodic grid too large"));
        }
        if !a0.is_finite() {
            return Err(Error::invalid("non-finite background matrix"));
        }
        Ok(FlowDomain {
            mode,
            n,
            half_width,
            resolution,
            a0,
        })
    }

    pub fn h(&self) -> f64 {
        match self.mode {
            FlowMode::Radial => self.half_width / self.resolution as f64,
            _ => 2.0 * self.half_width / self.resolution as f64,
        }
    }

    /// Largest admissible time step, `h²/(2n)`.
    pub fn stability_limit(&self) -> f64 {
        let h = self.h();
        h * h / (2.0 * self.n as f64)
    }

    pub fn node_count(&self) -> usize {
        match self.mode {
            FlowMode::Periodic => self.resolution.pow(self.n as u32),
            _ => self.resolution + 1,
        }
    }

    /// Spatial dimension of the node grid.
    pub fn grid_dim(&self) -> usize {
        match self.mode {
            FlowMode::Periodic => self.n,
            _ => 1,
        }
    }

    fn multi_index(&self, mut i: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for a in (0..self.grid_dim()).rev() {
            idx[a] = i % self.resolution;
            i /= self.resolution;
        }
        idx
    }

    fn stride(&self, axis: usize) -> usize {
        self.resolution.pow((self.n - 1 - axis) as u32)
    }

    /// Periodic neighbour of node `i` shifted by `delta` along `axis`.
    fn wrap(&self, i: usize, axis: usize, delta: isize) -> usize {
        let idx = self.multi_index(i)[axis] as isize;
        let n = self.resolution as isize;
        let moved = (idx + delta).rem_euclid(n);
        (i as isize + (moved - idx) * self.stride(axis) as isize) as usize
    }

    /// Node coordinates; the radial mode reports `(r, 0, 0)`.
    pub fn point(&self, i: usize) -> [f64; 3] {
        let h = self.h();
        match self.mode {
            FlowMode::Periodic => {
                let idx = self.multi_index(i);
                let mut x = [0.0; 3];
                for a in 0..self.n {
                    x[a] = -self.half_width + idx[a] as f64 * h;
                }
                x
            }
            FlowMode::Radial => [i as f64 * h, 0.0, 0.0],
            FlowMode::Line => [-self.half_width + i as f64 * h, 0.0, 0.0],
        }
    }

    /// `½xᵀA₀x` at node `i` (zero outside the periodic mode).
    pub fn background(&self, i: usize) -> f64 {
        if self.mode != FlowMode::Periodic {
            return 0.0;
        }
        let x = self.point(i);
        let mut s = 0.0;
        for a in 0..self.n {
            for b in 0..self.n {
                s += x[a] * self.a0.get(a, b) * x[b];
            }
        }
        0.5 * s
    }

    fn background_at(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for a in 0..self.n {
            for b in 0..self.n {
                s += x[a] * self.a0.get(a, b) * x[b];
            }
        }
        0.5 * s
    }

    /// Second differences `(u″, u′/r)` at node `j` of a radial profile.
    fn radial_pair(&self, v: &[f64], j: usize) -> (f64, f64) {
        let h = self.h();
        let last = self.resolution;
        let j = if j == last { last - 1 } else { j };
        if j == 0 {
            let d2 = 2.0 * (v[1] - v[0]) / (h * h);
            return (d2, d2);
        }
        let d2 = (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (h * h);
        let d1 = (v[j + 1] - v[j - 1]) / (2.0 * h);
        (d2, d1 / (j as f64 * h))
    }

    fn line_second(&self, v: &[f64], j: usize) -> f64 {
        let h = self.h();
        let j = j.clamp(1, self.resolution - 1);
        (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (h * h)
    }

    /// Discrete Hessian at node `i`. Radial nodes report the diagonal form
    /// at the point `(r, 0, …)`.
    pub fn hessian_at(&self, v: &[f64], i: usize) -> SymMatrix {
        match self.mode {
            FlowMode::Periodic => {
                let h2 = self.h() * self.h();
                let mut m = self.a0;
                for a in 0..self.n {
                    let p = self.wrap(i, a, 1);
                    let q = self.wrap(i, a, -1);
                    m.set(a, a, m.get(a, a) + (v[p] - 2.0 * v[i] + v[q]) / h2);
                    for b in (a + 1)..self.n {
                        let pp = self.wrap(p, b, 1);
                        let pm = self.wrap(p, b, -1);
                        let mp = self.wrap(q, b, 1);
                        let mm = self.wrap(q, b, -1);
                        let d = (v[pp] - v[pm] - v[mp] + v[mm]) / (4.0 * h2);
                        m.set(a, b, m.get(a, b) + d);
                    }
                }
                m
            }
            FlowMode::Radial => {
                let (d2, d1r) = self.radial_pair(v, i);
                let mut m = SymMatrix::zeros_unchecked(self.n);
                m.set(0, 0, d2);
                for a in 1..self.n {
                    m.set(a, a, d1r);
                }
                m
            }
            FlowMode::Line => {
                let mut m = SymMatrix::zeros_unchecked(1);
                m.set(0, 0, self.line_second(v, i));
                m
            }
        }
    }

    /// Full potential on the grid without Hessians; the periodic background
    /// is added back.
    pub fn values_field(&self, values: &[f64]) -> Result<SampledField> {
        if values.len() != self.node_count() {
            return Err(Error::invalid("value count does not match the grid"));
        }
        let h = self.h();
        match self.mode {
            FlowMode::Periodic => {
                let vals = values.iter().enumerate().map(|(i, v)| v + self.background(i)).collect();
                SampledField::new(&vec![-self.half_width; self.n], &vec![self.resolution; self.n], h, vals)
            }
            FlowMode::Radial => SampledField::new(&[0.0], &[self.resolution + 1], h, values.to_vec()),
            FlowMode::Line => SampledField::new(&[-self.half_width], &[self.resolution + 1], h, values.to_vec()),
        }
    }

    fn spectrum_of(&self, m: &SymMatrix) -> Result<Spectrum> {
        match self.mode {
            FlowMode::Periodic if self.n > 1 => eigen_sym(m),
            _ => {
                let mut l = [0.0; MAX_DIM];
                for (a, v) in l.iter_mut().enumerate().take(self.n) {
                    *v = m.get(a, a);
                }
                Spectrum::from_eigenvalues(&l[..self.n])
            }
        }
    }
}

/// Discrete Hessians of a value array on `d`.
pub fn hessian_field(d: &FlowDomain, values: &[f64]) -> Vec<SymMatrix> {
    (0..d.node_count())
        .into_par_iter()
        .map(|i| d.hessian_at(values, i))
        .collect()
}

/// `Σ arctan λᵢ` of the discrete Hessian at every node.
pub fn rhs_field(d: &FlowDomain, values: &[f64]) -> Result<Vec<f64>> {
    (0..d.node_count())
        .into_par_iter()
        .map(|i| {
            let m = d.hessian_at(values, i);
            d.spectrum_of(&m).map(|s| lagrangian_angle(&s))
        })
        .collect::<Result<Vec<f64>>>()
        .map_err(|e| Error::NumericalAbort {
            t: f64::NAN,
            reason: format!("right-hand side failed: {e}"),
        })
}

/// Stored values plus Hessian and spectrum caches.
#[derive(Clone, Debug)]
pub struct PotentialState {
    pub domain: FlowDomain,
    pub t: f64,
    values: Vec<f64>,
    hessians: Vec<SymMatrix>,
    spectra: Vec<Spectrum>,
}

impl PotentialState {
    /// `values` holds `p` in the periodic mode and `u` otherwise.
    pub fn new(domain: FlowDomain, values: Vec<f64>, t: f64) -> Result<Self> {
        if values.len() != domain.node_count() {
            return Err(Error::invalid(format!(
                "{} values for {} nodes",
                values.len(),
                domain.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalAbort {
                t,
                reason: format!("non-finite value at node {i}"),
            });
        }
        let hessians = hessian_field(&domain, &values);
        let spectra = hessians
            .par_iter()
            .map(|m| domain.spectrum_of(m))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::NumericalAbort {
                t,
                reason: e.to_string(),
            })?;
        Ok(PotentialState {
            domain,
            t,
            values,
            hessians,
            spectra,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn hessians(&self) -> &[SymMatrix] {
        &self.hessians
    }
    pub fn spectra(&self) -> &[Spectrum] {
        &self.spectra
    }

    /// Pointwise Lagrangian angle from the cached spectra.
    pub fn rhs(&self) -> Vec<f64> {
        self.spectra.iter().map(lagrangian_angle).collect()
    }

    /// Full potential `u` at node `i`.
    pub fn full_value(&self, i: usize) -> f64 {
        self.values[i] + self.domain.background(i)
    }

    /// `u(x)` by four-point Lagrange interpolation (tensor product in the
    /// periodic mode). Radial states take `|x|`.
    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        let d = &self.domain;
        let h = d.h();
        let n_cells = d.resolution;
        match d.mode {
            FlowMode::Radial | FlowMode::Line => {
                let s = match d.mode {
                    FlowMode::Radial => x.iter().map(|v| v * v).sum::<f64>().sqrt() / h,
                    _ => (x[0] + d.half_width) / h,
                };
                let slack = 1e-9;
                if s < -slack || s > n_cells as f64 + slack {
                    return Err(Error::OutOfRange(format!("point {x:?} outside the domain")));
                }
                let j = s.floor() as isize;
                let lo = if d.mode == FlowMode::Radial { -1 } else { 0 };
                let start = (j - 1).clamp(lo, n_cells as isize - 3);
                let w = lagrange4(s - start as f64);
                Ok((0..4)
                    .map(|m| {
                        let k = (start + m as isize).unsigned_abs();
                        w[m] * self.values[k]
                    })
                    .sum())
            }
            FlowMode::Periodic => {
                let n = d.n;
                let mut starts = [0isize; 3];
                let mut ws = [[0.0; 4]; 3];
                for a in 0..n {
                    let s = (x[a] + d.half_width) / h;
                    let j = s.floor() as isize;
                    starts[a] = j - 1;
                    ws[a] = lagrange4(s - (j - 1) as f64);
                }
                let mut total = 0.0;
                for combo in 0..4usize.pow(n as u32) {
                    let mut rest = combo;
                    let mut weight = 1.0;
                    let mut lin = 0usize;
                    for a in 0..n {
                        let m = rest % 4;
                        rest /= 4;
                        weight *= ws[a][m];
                        let idx = (starts[a] + m as isize).rem_euclid(n_cells as isize) as usize;
                        lin += idx * d.stride(a);
                    }
                    total += weight * self.values[lin];
                }
                Ok(total + d.background_at(x))
            }
        }
    }

    /// Snapshot of the full potential (with Hessians in the periodic mode).
    pub fn to_field(&self) -> Result<SampledField> {
        let d = &self.domain;
        let h = d.h();
        match d.mode {
            FlowMode::Periodic => {
                let vals = (0..d.node_count()).map(|i| self.full_value(i)).collect();
                SampledField::new(&vec![-d.half_width; d.n], &vec![d.resolution; d.n], h, vals)?
                    .with_hessians(self.hessians.clone())
            }
            _ => d.values_field(&self.values),
        }
    }
}

/// Lagrange weights on nodes `0, 1, 2, 3` at position `s`.
fn lagrange4(s: f64) -> [f64; 4] {
    let (a, b, c, e) = (s, s - 1.0, s - 2.0, s - 3.0);
    [
        -b * c * e / 6.0,
        a * c * e / 2.0,
        -a * b * e / 2.0,
        a * b * c / 6.0,
    ]
}

/// One classical Runge–Kutta step of size `dt ≤ h²/(2n)`.
pub fn step(s: &PotentialState, dt: f64) -> Result<PotentialState> {
    let limit = s.domain.stability_limit();
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::Stability { dt, limit });
    }
    let d = &s.domain;
    let v = &s.values;
    let stage = |k: &[f64], c: f64| -> Vec<f64> { v.iter().zip(k).map(|(a, b)| a + c * b).collect() };
    let tag = |e: Error| match e {
        Error::NumericalAbort { reason, .. } => Error::NumericalAbort { t: s.t, reason },
        other => other,
    };
    let k1 = s.rhs();
    let k2 = rhs_field(d, &stage(&k1, 0.5 * dt)).map_err(tag)?;
    let k3 = rhs_field(d, &stage(&k2, 0.5 * dt)).map_err(tag)?;
    let k4 = rhs_field(d, &stage(&k3, dt)).map_err(tag)?;
    let next: Vec<f64> = (0..v.len())
        .map(|i| v[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    PotentialState::new(d.clone(), next, s.t + dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine_state(n_cells: usize, eps: f64) -> PotentialState {
        let a0 = SymMatrix::from_diag(&[0.5]).unwrap();
        let d = FlowDomain::periodic(a0, PI, n_cells).unwrap();
        let v = (0..d.node_count()).map(|i| eps * d.point(i)[0].sin()).collect();
        PotentialState::new(d, v, 0.0).unwrap()
    }

    #[test]
    fn zero_perturbation_keeps_background_hessian() {
        let a0 = SymMatrix::from_rows(&[vec![1.0, 0.2], vec![0.2, -0.4]]).unwrap();
        let d = FlowDomain::periodic(a0, 1.0, 16).unwrap();
        let s = PotentialState::new(d, vec![0.0; 256], 0.0).unwrap();
        assert!(s.hessians().iter().all(|m| *m == a0));
    }

    #[test]
    fn sine_hessian_is_second_order() {
        let errs: Vec<f64> = [32, 64]
            .iter()
            .map(|&m| {
                let s = sine_state(m, 0.3);
                (0..s.domain.node_count())
                    .map(|i| {
                        let x = s.domain.point(i)[0];
                        (s.hessians()[i].get(0, 0) - (0.5 - 0.3 * x.sin())).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.95, "{order}");
    }

    #[test]
    fn rhs_examples() {
        let d = FlowDomain::periodic(SymMatrix::zeros(2).unwrap(), 1.0, 16).unwrap();
        let s = PotentialState::new(d, vec![0.0; 256], 0.0).unwrap();
        assert!(s.rhs().iter().all(|&v| v == 0.0));
        let d = FlowDomain::periodic(SymMatrix::identity(2).unwrap(), 1.0, 16).unwrap();
        let s = PotentialState::new(d, vec![0.0; 256], 0.0).unwrap();
        assert!(s.rhs().iter().all(|&v| (v - PI / 2.0).abs() < 1e-15));
    }

    #[test]
    fn rhs_matches_complex_determinant() {
        let a0 = SymMatrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 0.2]]).unwrap();
        let d = FlowDomain::periodic(a0, PI, 16).unwrap();
        let v = (0..d.node_count())
            .map(|i| {
                let x = d.point(i);
                0.4 * (x[0] + 2.0 * x[1]).sin()
            })
            .collect();
        let s = PotentialState::new(d, v, 0.0).unwrap();
        let r = s.rhs();
        for (i, m) in s.hessians().iter().enumerate() {
            let o = crate::spectral::angle_via_complex_det(m).unwrap();
            assert!((o - r[i]).abs() < 1e-10 * (1.0 + o.abs()));
        }
    }

    #[test]
    fn radial_quadratic_has_identity_hessian() {
        let d = FlowDomain::radial(3, 2.0, 40).unwrap();
        let v = (0..d.node_count()).map(|i| 0.5 * d.point(i)[0].powi(2)).collect();
        let s = PotentialState::new(d, v, 0.0).unwrap();
        for sp in s.spectra() {
            for l in sp.lambdas() {
                assert!((l - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn stability_gate() {
        let s = sine_state(32, 0.1);
        let lim = s.domain.stability_limit();
        assert!(matches!(step(&s, 1.01 * lim), Err(Error::Stability { .. })));
        assert!(step(&s, lim).is_ok());
    }

    #[test]
    fn quadratic_data_drifts_exactly() {
        let a0 = SymMatrix::from_diag(&[1.0, -0.4]).unwrap();
        let d = FlowDomain::periodic(a0, 1.0, 16).unwrap();
        let theta = 1.0f64.atan() + (-0.4f64).atan();
        let mut s = PotentialState::new(d, vec![0.0; 256], 0.0).unwrap();
        let dt = s.domain.stability_limit();
        for _ in 0..50 {
            s = step(&s, dt).unwrap();
        }
        for &v in s.values() {
            assert!((v - s.t * theta).abs() < 1e-13);
        }
        let z = PotentialState::new(
            FlowDomain::periodic(SymMatrix::zeros(1).unwrap(), 1.0, 16).unwrap(),
            vec![0.0; 16],
            0.0,
        )
        .unwrap();
        assert!(step(&z, 1e-3).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spatial_self_convergence() {
        // reference on 256 cells, dt ∝ h²
        let run = |m: usize| {
            let mut s = sine_state(m, 0.5);
            let t_end = 0.1;
            let steps = (t_end / s.domain.stability_limit()).ceil() as usize;
            let dt = t_end / steps as f64;
            for _ in 0..steps {
                s = step(&s, dt).unwrap();
            }
            s
        };
        let fine = run(256);
        let err = |m: usize| {
            let s = run(m);
            (0..s.domain.node_count())
                .map(|i| (s.full_value(i) - fine.value_at(&s.domain.point(i)[..1]).unwrap()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(32), err(64));
        let order = (e1 / e2).log2();
        assert!(order >= 1.9, "order {order}: {e1} {e2}");
    }

    #[test]
    fn interpolation_reproduces_cubics() {
        let d = FlowDomain::line(2.0, 20).unwrap();
        let f = |x: f64| 1.0 - x + 0.3 * x * x - 0.1 * x * x * x;
        let v = (0..d.node_count()).map(|i| f(d.point(i)[0])).collect();
        let s = PotentialState::new(d, v, 0.0).unwrap();
        for &x in &[-2.0, -1.93, 0.0, 0.517, 1.99, 2.0] {
            assert!((s.value_at(&[x]).unwrap() - f(x)).abs() < 1e-12);
        }
        assert!(s.value_at(&[2.1]).is_err());

        let d = FlowDomain::radial(2, 2.0, 20).unwrap();
        let v = (0..d.node_count()).map(|i| 0.7 * d.point(i)[0].powi(2)).collect();
        let s = PotentialState::new(d, v, 0.0).unwrap();
        for &r in &[0.0, 0.03, 0.5, 1.99] {
            assert!((s.value_at(&[r * 0.6, r * 0.8]).unwrap() - 0.7 * r * r).abs() < 1e-12);
        }
    }
}
