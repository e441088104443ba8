//! Pointwise spectral geometry of a symmetric Hessian.
//!
//! For a potential `u` with Hessian eigenvalues `λ`, the gradient graph
//! `{(x, Du(x))}` carries the induced metric `I + (D²u)²`. Everything the
//! flow monitors is a symmetric function of `λ`: the Lagrangian angle
//! `Σ arctan λᵢ`, the horizontal volume ratio `*Ω = Π (1+λᵢ²)^{-1/2}` and
//! the two-convexity determinant
//! `det𝔖 = Π_{i<j} (λᵢ+λⱼ)(1+λᵢλⱼ) / ((1+λᵢ²)(1+λⱼ²))`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 8;

const JACOBI_REL_THRESHOLD: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense symmetric matrix of dimension `1..=8`, stored in full with mirror
/// equality enforced by every mutator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    a: [f64; MAX_DIM * MAX_DIM],
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::invalid(format!(
                "matrix dimension {n} outside 1..={MAX_DIM}"
            )));
        }
        Ok(Self::zeros_unchecked(n))
    }

    pub(crate) fn zeros_unchecked(n: usize) -> Self {
        debug_assert!((1..=MAX_DIM).contains(&n));
        SymMatrix {
            n,
            a: [0.0; MAX_DIM * MAX_DIM],
        }
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            m.a[i * MAX_DIM + i] = 1.0;
        }
        Ok(m)
    }

    pub fn from_diag(d: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(d.len())?;
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m.ensure_finite()?;
        Ok(m)
    }

    /// Builds a matrix from row-major data, rejecting asymmetric or
    /// non-finite input.
    pub fn from_row_major(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            for j in 0..n {
                let v = data[i * n + j];
                if v != data[j * n + i] {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
                m.a[i * MAX_DIM + j] = v;
            }
        }
        m.ensure_finite()?;
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut flat = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::invalid("matrix rows must be square"));
            }
            flat.extend_from_slice(r);
        }
        Self::from_row_major(n, &flat)
    }

    /// Fills the upper triangle from `f(i, j)` (with `i <= j`) and mirrors it.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m.ensure_finite()?;
        Ok(m)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * MAX_DIM + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * MAX_DIM + j] = v;
        self.a[j * MAX_DIM + i] = v;
    }

    pub fn is_finite(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.get(i, j).is_finite()))
    }

    fn ensure_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("matrix has non-finite entries"))
        }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.get(i, j).powi(2);
            }
        }
        s.sqrt()
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m.a[i * MAX_DIM + j] += other.get(i, j);
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m.a[i * MAX_DIM + j] *= s;
            }
        }
        m
    }

    /// `self²`, which is again symmetric.
    pub fn square(&self) -> SymMatrix {
        let n = self.n;
        let mut m = SymMatrix::zeros_unchecked(n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..n).map(|k| self.get(i, k) * self.get(k, j)).sum();
                m.set(i, j, v);
            }
        }
        m
    }

    /// `tr(self · other)`.
    pub fn trace_product(&self, other: &SymMatrix) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.get(i, j) * other.get(j, i);
            }
        }
        s
    }
}

/// Sorted eigenvalues together with the derived scalars monitored by the flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spectrum {
    n: usize,
    lambdas: [f64; MAX_DIM],
    pub star_omega: f64,
    pub det_s_frak: f64,
    /// `min_{i≠j} λᵢ+λⱼ`, `+∞` when `n = 1`.
    pub min_pair_sum: f64,
    /// `min_{i≠j} 1+λᵢλⱼ`, `+∞` when `n = 1`.
    pub min_pair_prod: f64,
}

impl Spectrum {
    pub fn from_eigenvalues(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n == 0 || n > MAX_DIM {
            return Err(Error::invalid(format!("spectrum size {n} outside 1..={MAX_DIM}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite eigenvalue"));
        }
        let mut lambdas = [0.0; MAX_DIM];
        lambdas[..n].copy_from_slice(values);
        Ok(Self::from_array(n, lambdas))
    }

    fn from_array(n: usize, mut lambdas: [f64; MAX_DIM]) -> Self {
        // insertion sort keeps ties stable
        for i in 1..n {
            let mut j = i;
            while j > 0 && lambdas[j - 1] > lambdas[j] {
                lambdas.swap(j - 1, j);
                j -= 1;
            }
        }
        let l = &lambdas[..n];
        let prod: f64 = l.iter().map(|x| 1.0 + x * x).product();
        let star_omega = 1.0 / prod.sqrt();
        let mut det = 1.0;
        let mut min_sum = f64::INFINITY;
        let mut min_prod = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                let s = l[i] + l[j];
                let p = 1.0 + l[i] * l[j];
                min_sum = min_sum.min(s);
                min_prod = min_prod.min(p);
                det *= s * p / ((1.0 + l[i] * l[i]) * (1.0 + l[j] * l[j]));
            }
        }
        Spectrum {
            n,
            lambdas,
            star_omega,
            det_s_frak: det,
            min_pair_sum: min_sum,
            min_pair_prod: min_prod,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas[..self.n]
    }

    /// Sum of squared eigenvalues, i.e. `|D²u|²`.
    pub fn slope_sq(&self) -> f64 {
        self.lambdas().iter().map(|x| x * x).sum()
    }
}

/// Eigenvalues plus an orthonormal eigenbasis (column `k` pairs with the
/// `k`-th sorted eigenvalue).
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub spectrum: Spectrum,
    vectors: [f64; MAX_DIM * MAX_DIM],
}

impl EigenDecomposition {
    pub fn vector_component(&self, row: usize, k: usize) -> f64 {
        self.vectors[row * MAX_DIM + k]
    }

    /// `‖B − VΛVᵀ‖_∞` (max-abs entry).
    pub fn reconstruction_residual(&self, b: &SymMatrix) -> f64 {
        let n = b.n();
        let l = self.spectrum.lambdas();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n)
                    .map(|k| self.vector_component(i, k) * l[k] * self.vector_component(j, k))
                    .sum();
                worst = worst.max((b.get(i, j) - v).abs());
            }
        }
        worst
    }
}

/// Symmetric eigen-decomposition: one closed-form rotation for `n = 2`,
/// cyclic Jacobi sweeps for `n ≥ 3`.
pub fn eigen_decompose(b: &SymMatrix) -> Result<EigenDecomposition> {
    if !b.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let n = b.n();
    let mut a = b.a;
    let mut v = [0.0; MAX_DIM * MAX_DIM];
    for i in 0..n {
        v[i * MAX_DIM + i] = 1.0;
    }
    match n {
        1 => {}
        2 => {
            if a[1] != 0.0 {
                rotate(&mut a, &mut v, n, 0, 1);
            }
        }
        _ => {
            let thr = JACOBI_REL_THRESHOLD * b.norm_inf();
            for _ in 0..JACOBI_MAX_SWEEPS {
                let mut off: f64 = 0.0;
                for p in 0..n {
                    for q in (p + 1)..n {
                        off = off.max(a[p * MAX_DIM + q].abs());
                    }
                }
                if off <= thr {
                    break;
                }
                for p in 0..n {
                    for q in (p + 1)..n {
                        if a[p * MAX_DIM + q].abs() > thr {
                            rotate(&mut a, &mut v, n, p, q);
                        }
                    }
                }
            }
        }
    }
    // sort eigenpairs ascending, stable on ties
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * MAX_DIM + i].total_cmp(&a[j * MAX_DIM + j]));
    let mut lambdas = [0.0; MAX_DIM];
    let mut vectors = [0.0; MAX_DIM * MAX_DIM];
    for (k, &src) in order.iter().enumerate() {
        lambdas[k] = a[src * MAX_DIM + src];
        for r in 0..n {
            vectors[r * MAX_DIM + k] = v[r * MAX_DIM + src];
        }
    }
    Ok(EigenDecomposition {
        spectrum: Spectrum::from_array(n, lambdas),
        vectors,
    })
}

fn rotate(a: &mut [f64; MAX_DIM * MAX_DIM], v: &mut [f64; MAX_DIM * MAX_DIM], n: usize, p: usize, q: usize) {
    let apq = a[p * MAX_DIM + q];
    let app = a[p * MAX_DIM + p];
    let aqq = a[q * MAX_DIM + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);
    a[p * MAX_DIM + p] = app - t * apq;
    a[q * MAX_DIM + q] = aqq + t * apq;
    a[p * MAX_DIM + q] = 0.0;
    a[q * MAX_DIM + p] = 0.0;
    for r in 0..n {
        if r != p && r != q {
            let g = a[r * MAX_DIM + p];
            let h = a[r * MAX_DIM + q];
            let np = g - s * (h + g * tau);
            let nq = h + s * (g - h * tau);
            a[r * MAX_DIM + p] = np;
            a[p * MAX_DIM + r] = np;
            a[r * MAX_DIM + q] = nq;
            a[q * MAX_DIM + r] = nq;
        }
        let g = v[r * MAX_DIM + p];
        let h = v[r * MAX_DIM + q];
        v[r * MAX_DIM + p] = g - s * (h + g * tau);
        v[r * MAX_DIM + q] = h + s * (g - h * tau);
    }
}

pub fn eigen_sym(b: &SymMatrix) -> Result<Spectrum> {
    Ok(eigen_decompose(b)?.spectrum)
}

/// `Σᵢ arctan λᵢ`, the right-hand side of the flow.
pub fn lagrangian_angle(s: &Spectrum) -> f64 {
    s.lambdas().iter().map(|l| l.atan()).sum()
}

/// Imaginary logarithm of `det(I+iB)/√det(I+B²)`, computed from complex
/// determinants without any eigenvalues.
///
/// The branch is fixed by continuation along `s ↦ det(I + i s B)`, `s ∈ [0,1]`.
/// The argument moves with speed `Σ λ/(1+s²λ²) ≤ n‖B‖_∞`, so steps of that
/// size never advance it by more than `π/4` and the accumulated principal
/// increments give the continuous branch.
pub fn angle_via_complex_det(b: &SymMatrix) -> Result<f64> {
    if !b.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let n = b.n();
    let speed = n as f64 * b.norm_inf();
    let steps = ((speed / (PI / 4.0)).ceil() as usize).max(1);
    let mut prev = Complex64::new(1.0, 0.0);
    let mut arg = 0.0;
    for j in 1..=steps {
        let s = j as f64 / steps as f64;
        let d = complex_det_i_shift(b, s);
        if !(d.re.is_finite() && d.im.is_finite()) || d.norm() == 0.0 {
            return Err(Error::Branch("degenerate determinant along the path".into()));
        }
        let inc = (d / prev).arg();
        if inc.abs() >= PI / 2.0 {
            return Err(Error::Branch(format!("argument jump {inc} at s = {s}")));
        }
        arg += inc;
        prev = d;
    }
    // the modulus must cancel against √det(I+B²)
    let g = SymMatrix::identity(n)?.add(&b.square());
    let real_part = prev.norm().ln() - 0.5 * real_det(&g).ln();
    if !(real_part.abs() <= 1e-8 * (1.0 + prev.norm().ln().abs())) {
        return Err(Error::Branch(format!(
            "modulus mismatch {real_part:e} between det(I+iB) and det(I+B²)"
        )));
    }
    Ok(arg)
}

/// `det(I + i s B)` by complex LU with partial pivoting.
fn complex_det_i_shift(b: &SymMatrix, s: f64) -> Complex64 {
    let n = b.n();
    let mut m = [[Complex64::new(0.0, 0.0); MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = Complex64::new(if i == j { 1.0 } else { 0.0 }, s * b.get(i, j));
        }
    }
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].norm().total_cmp(&m[y][col].norm()))
            .unwrap_or(col);
        if m[piv][col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if piv != col {
            m.swap(piv, col);
            det = -det;
        }
        let p = m[col][col];
        det *= p;
        for r in (col + 1)..n {
            let f = m[r][col] / p;
            for c in col..n {
                let sub = f * m[col][c];
                m[r][c] -= sub;
            }
        }
    }
    det
}

fn real_det(a: &SymMatrix) -> f64 {
    let n = a.n();
    let mut m = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = a.get(i, j);
        }
    }
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap_or(col);
        if m[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            m.swap(piv, col);
            det = -det;
        }
        let p = m[col][col];
        det *= p;
        for r in (col + 1)..n {
            let f = m[r][col] / p;
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    det
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvexityReport {
    pub is_2convex: bool,
    pub pair_sum_margin: f64,
    pub pair_prod_margin: f64,
}

/// Two-convexity test: `λᵢ+λⱼ ≥ 0` and `1+λᵢλⱼ ≥ 0` for every `i ≠ j`
/// (strict inequalities when `strict`). Vacuous for `n = 1`.
pub fn two_convexity(s: &Spectrum, strict: bool) -> ConvexityReport {
    let (a, b) = (s.min_pair_sum, s.min_pair_prod);
    let ok = if strict { a > 0.0 && b > 0.0 } else { a >= 0.0 && b >= 0.0 };
    ConvexityReport {
        is_2convex: ok,
        pair_sum_margin: a,
        pair_prod_margin: b,
    }
}

/// Eigenvalue bounds implied by `*Ω ≥ eps1` and `det𝔖 ≥ eps2` on the
/// strictly two-convex region.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct EigenBounds {
    pub eps1: f64,
    pub eps2: f64,
    /// Upper bound on `Σ λᵢ²`.
    pub slope_sq_ub: f64,
    /// Lower bound on `1 + λᵢλⱼ`.
    pub pair_prod_lb: f64,
    /// Lower bound on `λᵢ + λⱼ`.
    pub pair_sum_lb: f64,
}

pub fn eigen_bounds_from(eps1: f64, eps2: f64) -> Result<EigenBounds> {
    if !(eps1 > 0.0 && eps1 < 1.0) {
        return Err(Error::invalid(format!("eps1 = {eps1} must lie in (0,1)")));
    }
    if !(eps2 > 0.0 && eps2 <= 1.0) {
        return Err(Error::invalid(format!("eps2 = {eps2} must lie in (0,1]")));
    }
    let inv_sq = eps1.powi(-2);
    let slope = inv_sq - 1.0;
    Ok(EigenBounds {
        eps1,
        eps2,
        slope_sq_ub: slope,
        pair_prod_lb: eps2 / (2.0 * slope).sqrt(),
        pair_sum_lb: 2.0 * eps2 / (inv_sq + 1.0),
    })
}

/// `(I + B²)^{-1}` by Gauss–Jordan elimination.
pub fn induced_metric_inverse(b: &SymMatrix) -> SymMatrix {
    let n = b.n();
    let g = SymMatrix::identity(n).expect("dimension already validated").add(&b.square());
    let mut m = [[0.0; 2 * MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = g.get(i, j);
        }
        m[i][n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap_or(col);
        m.swap(piv, col);
        let p = m[col][col];
        for c in 0..2 * n {
            m[col][c] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    let mut inv = SymMatrix::zeros_unchecked(n);
    for i in 0..n {
        for j in i..n {
            inv.set(i, j, 0.5 * (m[i][n + j] + m[j][n + i]));
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SymMatrix {
        SymMatrix::from_upper(n, |_, _| rng.random_range(-scale..scale)).unwrap()
    }

    #[test]
    fn zero_matrix_spectrum() {
        let s = eigen_sym(&SymMatrix::zeros(2).unwrap()).unwrap();
        assert_eq!(s.lambdas(), &[0.0, 0.0]);
        assert_eq!(s.star_omega, 1.0);
        assert_eq!(s.det_s_frak, 0.0);
    }

    #[test]
    fn two_by_two_closed_form() {
        let b = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let s = eigen_sym(&b).unwrap();
        assert!((s.lambdas()[0] - 1.0).abs() < 1e-15);
        assert!((s.lambdas()[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_input_is_sorted() {
        let s = eigen_sym(&SymMatrix::from_diag(&[3.0, -1.0, 0.5]).unwrap()).unwrap();
        assert_eq!(s.lambdas(), &[-1.0, 0.5, 3.0]);
    }

    #[test]
    fn rejects_non_finite_and_asymmetric() {
        assert!(SymMatrix::from_diag(&[f64::NAN]).is_err());
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).is_err());
        assert!(SymMatrix::zeros(9).is_err());
    }

    #[test]
    fn jacobi_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=MAX_DIM {
            for _ in 0..50 {
                let b = random_sym(&mut rng, n, 5.0);
                let e = eigen_decompose(&b).unwrap();
                let tol = 1e-12 * (1.0 + b.norm_inf());
                assert!(e.reconstruction_residual(&b) <= tol, "n={n}");
                assert!(e.spectrum.lambdas().windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn angle_examples() {
        let z = Spectrum::from_eigenvalues(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(lagrangian_angle(&z), 0.0);
        let one = Spectrum::from_eigenvalues(&[1.0, 1.0]).unwrap();
        assert!((lagrangian_angle(&one) - PI / 2.0).abs() < 1e-15);

        assert_eq!(angle_via_complex_det(&SymMatrix::zeros(3).unwrap()).unwrap(), 0.0);
        let d1 = SymMatrix::from_diag(&[1.0]).unwrap();
        assert!((angle_via_complex_det(&d1).unwrap() - PI / 4.0).abs() < 1e-14);
        let b = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let want = 1f64.atan() + 3f64.atan();
        assert!((angle_via_complex_det(&b).unwrap() - want).abs() < 1e-13);
    }

    #[test]
    fn angle_branch_beyond_pi() {
        // Σ arctan exceeds π, so the principal branch alone would be wrong
        let b = SymMatrix::from_diag(&[50.0, 50.0, 50.0, 50.0]).unwrap();
        let want = 4.0 * 50f64.atan();
        assert!(want > PI);
        assert!((angle_via_complex_det(&b).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn convexity_examples() {
        let r = two_convexity(&Spectrum::from_eigenvalues(&[1.0, 1.0]).unwrap(), true);
        assert!(r.is_2convex);
        assert_eq!((r.pair_sum_margin, r.pair_prod_margin), (2.0, 2.0));

        let r = two_convexity(&Spectrum::from_eigenvalues(&[-2.0, 0.4]).unwrap(), false);
        assert!(!r.is_2convex);
        assert!((r.pair_prod_margin - 0.2).abs() < 1e-15);
        assert!((r.pair_sum_margin + 1.6).abs() < 1e-15);

        let r = two_convexity(&Spectrum::from_eigenvalues(&[-7.0]).unwrap(), true);
        assert!(r.is_2convex);
        assert_eq!(Spectrum::from_eigenvalues(&[-7.0]).unwrap().det_s_frak, 1.0);
    }

    #[test]
    fn eps_bounds_closed_forms() {
        let e1 = 0.5f64.sqrt();
        let b = eigen_bounds_from(e1, 0.5).unwrap();
        assert!((b.slope_sq_ub - 1.0).abs() < 1e-15);
        assert!((b.pair_sum_lb - 1.0 / 3.0).abs() < 1e-15);
        let b2 = eigen_bounds_from(e1, 0.25).unwrap();
        assert!((b.pair_prod_lb - 2.0 * b2.pair_prod_lb).abs() < 1e-15);
        assert!(eigen_bounds_from(1.0, 0.5).is_err());
        assert!(eigen_bounds_from(0.0, 0.5).is_err());
        assert!(eigen_bounds_from(0.5, 1.5).is_err());
    }

    #[test]
    fn metric_inverse_examples() {
        let i2 = induced_metric_inverse(&SymMatrix::zeros(2).unwrap());
        assert_eq!(i2, SymMatrix::identity(2).unwrap());
        let g = induced_metric_inverse(&SymMatrix::from_diag(&[1.0, 2.0]).unwrap());
        assert!((g.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((g.get(1, 1) - 0.2).abs() < 1e-15);
        assert_eq!(g.get(0, 1), 0.0);
    }

    #[test]
    fn angle_derivative_matches_metric_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=4 {
            let b = random_sym(&mut rng, n, 2.0);
            let e = random_sym(&mut rng, n, 1.0);
            let f = |t: f64| lagrangian_angle(&eigen_sym(&b.add(&e.scale(t))).unwrap());
            let exact = induced_metric_inverse(&b).trace_product(&e);
            let err = |t: f64| ((f(t) - f(-t)) / (2.0 * t) - exact).abs();
            let (e1, e2) = (err(1e-2), err(5e-3));
            let order = (e1 / e2).log2();
            assert!(order >= 1.9, "n={n} order={order} errs={e1:e},{e2:e}");
        }
    }
}
