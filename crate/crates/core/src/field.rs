//! Scalar fields sampled on uniform boxes in one to three dimensions.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::spectral::SymMatrix;

pub const MAX_FIELD_DIM: usize = 3;

/// Values (and optionally Hessians) at the nodes of a uniform grid.
///
/// Nodes are stored with the last axis varying fastest. Node `idx` sits at
/// `lower[a] + idx[a]·h` along each axis `a`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledField {
    dim: usize,
    lower: [f64; MAX_FIELD_DIM],
    shape: [usize; MAX_FIELD_DIM],
    h: f64,
    values: Vec<f64>,
    hessians: Option<Vec<SymMatrix>>,
}

impl SampledField {
    pub fn new(lower: &[f64], shape: &[usize], h: f64, values: Vec<f64>) -> Result<Self> {
        let dim = lower.len();
        if dim == 0 || dim > MAX_FIELD_DIM || shape.len() != dim {
            return Err(Error::invalid(format!(
                "field dimension must be 1..={MAX_FIELD_DIM} with matching shape"
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!("grid spacing {h} must be positive")));
        }
        if shape.iter().any(|&s| s < 2) {
            return Err(Error::invalid("each axis needs at least two nodes"));
        }
        if lower.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite grid origin"));
        }
        let total = shape
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s))
            .ok_or_else(|| Error::invalid("grid too large"))?;
        if values.len() != total {
            return Err(Error::invalid(format!("{} values for {total} nodes", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite field value"));
        }
        let mut lo = [0.0; MAX_FIELD_DIM];
        let mut sh = [1; MAX_FIELD_DIM];
        lo[..dim].copy_from_slice(lower);
        sh[..dim].copy_from_slice(shape);
        Ok(SampledField {
            dim,
            lower: lo,
            shape: sh,
            h,
            values,
            hessians: None,
        })
    }

    /// Samples `f` at every node.
    pub fn from_fn(lower: &[f64], shape: &[usize], h: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut field = SampledField::new(lower, shape, h, vec![0.0; shape.iter().product()])?;
        for i in 0..field.len() {
            let x = field.point(i);
            field.values[i] = f(&x[..field.dim]);
        }
        if field.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite field value"));
        }
        Ok(field)
    }

    /// Cube `[-half_width, half_width]^dim` with spacing `h`.
    pub fn centered_box(dim: usize, half_width: f64, h: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        if !(half_width > 0.0) || !(h > 0.0) {
            return Err(Error::invalid("box half-width and spacing must be positive"));
        }
        let cells = (2.0 * half_width / h).round() as usize;
        let h = 2.0 * half_width / cells as f64;
        SampledField::from_fn(&vec![-half_width; dim], &vec![cells + 1; dim], h, f)
    }

    pub fn with_hessians(mut self, hessians: Vec<SymMatrix>) -> Result<Self> {
        if hessians.len() != self.len() {
            return Err(Error::invalid("one Hessian per node required"));
        }
        if hessians.iter().any(|m| m.n() != self.dim || !m.is_finite()) {
            return Err(Error::invalid("Hessian dimension mismatch or non-finite entry"));
        }
        self.hessians = Some(hessians);
        Ok(self)
    }

    pub fn with_hessian_fn(self, f: impl Fn(&[f64]) -> SymMatrix) -> Result<Self> {
        let hs = (0..self.len()).map(|i| f(&self.point(i)[..self.dim])).collect();
        self.with_hessians(hs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.dim]
    }
    pub fn lower(&self) -> &[f64] {
        &self.lower[..self.dim]
    }
    pub fn upper(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|a| self.lower[a] + (self.shape[a] - 1) as f64 * self.h)
            .collect()
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn hessians(&self) -> Option<&[SymMatrix]> {
        self.hessians.as_deref()
    }

    pub fn multi_index(&self, mut linear: usize) -> [usize; MAX_FIELD_DIM] {
        let mut idx = [0; MAX_FIELD_DIM];
        for a in (0..self.dim).rev() {
            idx[a] = linear % self.shape[a];
            linear /= self.shape[a];
        }
        idx
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape[..self.dim])
            .fold(0, |acc, (&i, &s)| acc * s + i)
    }

    /// Coordinates of node `linear`; trailing unused axes are zero.
    pub fn point(&self, linear: usize) -> [f64; MAX_FIELD_DIM] {
        let idx = self.multi_index(linear);
        let mut x = [0.0; MAX_FIELD_DIM];
        for a in 0..self.dim {
            x[a] = self.lower[a] + idx[a] as f64 * self.h;
        }
        x
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sub-field dropping `margin` nodes on every side.
    pub fn shrink(&self, margin: usize) -> Result<Self> {
        if self.shape[..self.dim].iter().any(|&s| s < 2 * margin + 2) {
            return Err(Error::Resolution(format!("box too small to drop {margin} nodes per side")));
        }
        let lower: Vec<f64> = (0..self.dim).map(|a| self.lower[a] + margin as f64 * self.h).collect();
        let shape: Vec<usize> = (0..self.dim).map(|a| self.shape[a] - 2 * margin).collect();
        let mut out = SampledField::new(&lower, &shape, self.h, vec![0.0; shape.iter().product()])?;
        let mut hs = self.hessians.as_ref().map(|_| Vec::with_capacity(out.len()));
        for i in 0..out.len() {
            let mut idx = out.multi_index(i);
            for v in idx.iter_mut().take(self.dim) {
                *v += margin;
            }
            let j = self.linear_index(&idx[..self.dim]);
            out.values[i] = self.values[j];
            if let (Some(hs), Some(src)) = (hs.as_mut(), self.hessians.as_ref()) {
                hs.push(src[j]);
            }
        }
        out.hessians = hs;
        Ok(out)
    }

    /// Centered second differences at interior nodes; the result drops one
    /// node per side and carries the difference Hessians.
    pub fn fd_hessian(&self) -> Result<Self> {
        let mut out = self.shrink(1)?;
        out.hessians = None;
        let h2 = self.h * self.h;
        let strides: Vec<usize> = (0..self.dim)
            .map(|a| self.shape[a + 1..self.dim].iter().product())
            .collect();
        let mut hs = Vec::with_capacity(out.len());
        for i in 0..out.len() {
            let mut idx = out.multi_index(i);
            for v in idx.iter_mut().take(self.dim) {
                *v += 1;
            }
            let c = self.linear_index(&idx[..self.dim]);
            let u = &self.values;
            let m = SymMatrix::from_upper(self.dim, |a, b| {
                let (sa, sb) = (strides[a], strides[b]);
                if a == b {
                    (u[c + sa] - 2.0 * u[c] + u[c - sa]) / h2
                } else {
                    (u[c + sa + sb] - u[c + sa - sb] - u[c - sa + sb] + u[c - sa - sb]) / (4.0 * h2)
                }
            })?;
            hs.push(m);
        }
        out.hessians = Some(hs);
        Ok(out)
    }

    /// CSV with columns `x1..xd, u` and, when present, Hessian entries
    /// `h11, h12, ...` over the upper triangle.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=self.dim).map(|a| format!("x{a}")).collect();
        header.push("u".into());
        if self.hessians.is_some() {
            for a in 0..self.dim {
                for b in a..self.dim {
                    header.push(format!("h{}{}", a + 1, b + 1));
                }
            }
        }
        wr.write_record(&header)?;
        for i in 0..self.len() {
            let x = self.point(i);
            let mut rec: Vec<String> = x[..self.dim].iter().map(|v| format!("{v:e}")).collect();
            rec.push(format!("{:e}", self.values[i]));
            if let Some(hs) = &self.hessians {
                for a in 0..self.dim {
                    for b in a..self.dim {
                        rec.push(format!("{:e}", hs[i].get(a, b)));
                    }
                }
            }
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    /// Parses the format written by [`SampledField::write_csv`]. Rows may
    /// come in any order but must fill a uniform grid exactly once.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
        let dim = header.iter().take_while(|c| c.starts_with('x')).count();
        if dim == 0 || dim > MAX_FIELD_DIM {
            return Err(Error::invalid("CSV must start with 1 to 3 coordinate columns x1.."));
        }
        for (a, col) in header.iter().take(dim).enumerate() {
            if *col != format!("x{}", a + 1) {
                return Err(Error::invalid(format!("unexpected column {col:?}")));
            }
        }
        if header.get(dim).map(String::as_str) != Some("u") {
            return Err(Error::invalid("missing value column u"));
        }
        let hcols = dim * (dim + 1) / 2;
        let with_h = match header.len() - dim - 1 {
            0 => false,
            c if c == hcols => {
                let mut k = dim + 1;
                for a in 0..dim {
                    for b in a..dim {
                        if header[k] != format!("h{}{}", a + 1, b + 1) {
                            return Err(Error::invalid(format!("unexpected column {:?}", header[k])));
                        }
                        k += 1;
                    }
                }
                true
            }
            _ => return Err(Error::invalid("wrong number of Hessian columns")),
        };

        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::invalid("ragged CSV row"));
            }
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::invalid(format!("bad number {s:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::invalid("CSV has no data rows"));
        }

        let mut lower = vec![0.0; dim];
        let mut shape = vec![0usize; dim];
        let mut spacing = f64::NAN;
        for a in 0..dim {
            let mut xs: Vec<f64> = rows.iter().map(|r| r[a]).collect();
            xs.sort_by(f64::total_cmp);
            let span = xs[xs.len() - 1] - xs[0];
            let tol = 1e-9 * (1.0 + xs[0].abs().max(xs[xs.len() - 1].abs()));
            xs.dedup_by(|b, a| (*b - *a).abs() <= tol);
            if xs.len() < 2 {
                return Err(Error::invalid(format!("axis x{} has fewer than two nodes", a + 1)));
            }
            let h = span / (xs.len() - 1) as f64;
            if xs.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-6 * h) {
                return Err(Error::invalid(format!("axis x{} is not uniformly spaced", a + 1)));
            }
            if spacing.is_nan() {
                spacing = h;
            } else if (spacing - h).abs() > 1e-6 * h {
                return Err(Error::invalid("axes have different spacings"));
            }
            lower[a] = xs[0];
            shape[a] = xs.len();
        }
        let total = shape
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s))
            .filter(|&t| t == rows.len())
            .ok_or_else(|| Error::invalid("rows do not fill the grid"))?;

        let mut values = vec![f64::NAN; total];
        let mut hs = if with_h { Some(vec![SymMatrix::zeros(dim)?; total]) } else { None };
        let mut field = SampledField::new(&lower, &shape, spacing, vec![0.0; total])?;
        for row in &rows {
            let mut idx = [0usize; MAX_FIELD_DIM];
            for a in 0..dim {
                let f = (row[a] - lower[a]) / spacing;
                let i = f.round();
                if (f - i).abs() > 1e-6 || i < 0.0 || i as usize >= shape[a] {
                    return Err(Error::invalid("row coordinate off the grid"));
                }
                idx[a] = i as usize;
            }
            let j = field.linear_index(&idx[..dim]);
            if !values[j].is_nan() {
                return Err(Error::invalid("duplicate grid node"));
            }
            values[j] = row[dim];
            if let Some(hs) = hs.as_mut() {
                let m = SymMatrix::from_upper(dim, |a, b| {
                    let k = a * dim - a * (a + 1) / 2 + b;
                    row[dim + 1 + k]
                })?;
                hs[j] = m;
            }
        }
        field.values = values;
        if let Some(hs) = hs {
            field = field.with_hessians(hs)?;
        }
        Ok(field)
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        SampledField::read_csv(s.as_bytes())
    }
}
