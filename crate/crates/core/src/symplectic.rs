//! Linear symplectic algebra of graphical Lagrangian planes.
//!
//! A graphical plane in ℝⁿ ⊕ ℝⁿ is the graph {p = S q} of a symmetric form S.
//! Planes that are not graphical are carried as 2n×n spanning frames.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-9;
/// Absolute tolerance of the symplectic check.
pub const TOL_SYM: f64 = 1e-10;

/// Rank of `m` counting singular values above `RANK_TOL · (σ_max + 1)`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let thr = RANK_TOL * (smax + 1.0);
    sv.iter().filter(|&&s| s > thr).count()
}

/// Orthonormal basis of the null space of `m` (as columns).
pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    // pad to at least square so the SVD returns a full right basis
    let rows = m.nrows().max(cols);
    let mut padded = DMatrix::zeros(rows, cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let thr = RANK_TOL * (smax + 1.0);
    let null: Vec<usize> = (0..cols)
        .filter(|&i| svd.singular_values[i] <= thr)
        .collect();
    let mut out = DMatrix::zeros(cols, null.len());
    for (c, &i) in null.iter().enumerate() {
        for r in 0..cols {
            out[(r, c)] = vt[(i, r)];
        }
    }
    out
}

/// Symmetric n×n form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymmetricForm(DMatrix<f64>);

impl SymmetricForm {
    pub fn zeros(n: usize) -> Self {
        SymmetricForm(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymmetricForm(DMatrix::identity(n, n))
    }

    pub fn scalar(n: usize, s: f64) -> Self {
        SymmetricForm(DMatrix::identity(n, n) * s)
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        SymmetricForm(m)
    }

    /// Builds a form from rows; rejects asymmetry beyond rounding.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::from_matrix(&m)
    }

    /// Builds a form from a square matrix, mirroring the upper triangle.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.ncols(),
            });
        }
        let scale = 1.0 + m.amax();
        for i in 0..n {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Input(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self::from_upper(m))
    }

    /// Symmetric part of an arbitrary square matrix.
    pub fn symmetrize(m: &DMatrix<f64>) -> Self {
        let s = (m + m.transpose()) * 0.5;
        Self::from_upper(&s)
    }

    fn from_upper(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        SymmetricForm(DMatrix::from_fn(n, n, |i, j| {
            if i <= j {
                m[(i, j)]
            } else {
                m[(j, i)]
            }
        }))
    }

    /// Reads n(n+1)/2 packed upper-triangular entries, row by row.
    pub fn from_packed(n: usize, packed: &[f64]) -> Result<Self> {
        if packed.len() != packed_len(n) {
            return Err(Error::DimensionMismatch {
                expected: packed_len(n),
                found: packed.len(),
            });
        }
        let mut m = DMatrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                m[(i, j)] = packed[k];
                m[(j, i)] = packed[k];
                k += 1;
            }
        }
        Ok(SymmetricForm(m))
    }

    pub fn to_packed(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(packed_len(n));
        for i in 0..n {
            for j in i..n {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    /// α·ℓℓᵀ.
    pub fn outer(alpha: f64, ell: &[f64]) -> Self {
        let n = ell.len();
        SymmetricForm(DMatrix::from_fn(n, n, |i, j| alpha * ell[i] * ell[j]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        match self.dim() {
            0 => 1.0,
            1 => m[(0, 0)],
            2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
            3 => {
                m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                    - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                    + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
            }
            _ => m.clone().determinant(),
        }
    }

    /// Adjugate matrix (transpose of the cofactor matrix).
    pub fn adjugate(&self) -> DMatrix<f64> {
        let n = self.dim();
        let m = &self.0;
        match n {
            0 => DMatrix::zeros(0, 0),
            1 => DMatrix::from_element(1, 1, 1.0),
            2 => DMatrix::from_row_slice(2, 2, &[m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]]),
            _ => DMatrix::from_fn(n, n, |i, j| {
                let minor = m.clone().remove_row(j).remove_column(i);
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                sign * minor.determinant()
            }),
        }
    }

    /// ℓᵀ adj(S) ℓ.
    pub fn adjugate_quadratic(&self, ell: &[f64]) -> f64 {
        let adj = self.adjugate();
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += ell[i] * adj[(i, j)] * ell[j];
            }
        }
        s
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        match self.dim() {
            0 => 0.0,
            1 => self.0[(0, 0)].abs(),
            _ => self
                .0
                .clone()
                .symmetric_eigenvalues()
                .iter()
                .fold(0.0, |a: f64, &v| a.max(v.abs())),
        }
    }

    pub fn max_abs(&self) -> f64 {
        if self.dim() == 0 {
            0.0
        } else {
            self.0.amax()
        }
    }

    /// Quadratic form restricted to the columns of `basis`.
    pub fn restrict(&self, basis: &DMatrix<f64>) -> SymmetricForm {
        Self::symmetrize(&(basis.transpose() * &self.0 * basis))
    }

    /// Pullback GᵀSG under the linear map G.
    pub fn pullback(&self, g: &DMatrix<f64>) -> SymmetricForm {
        Self::symmetrize(&(g.transpose() * &self.0 * g))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymmetricForm {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SymmetricForm::from_rows(&rows)
    }
}

impl From<SymmetricForm> for Vec<Vec<f64>> {
    fn from(s: SymmetricForm) -> Self {
        s.to_rows()
    }
}

impl Add for &SymmetricForm {
    type Output = SymmetricForm;
    fn add(self, o: &SymmetricForm) -> SymmetricForm {
        SymmetricForm(&self.0 + &o.0)
    }
}

impl Sub for &SymmetricForm {
    type Output = SymmetricForm;
    fn sub(self, o: &SymmetricForm) -> SymmetricForm {
        SymmetricForm(&self.0 - &o.0)
    }
}

impl Neg for &SymmetricForm {
    type Output = SymmetricForm;
    fn neg(self) -> SymmetricForm {
        SymmetricForm(-&self.0)
    }
}

impl Mul<f64> for &SymmetricForm {
    type Output = SymmetricForm;
    fn mul(self, s: f64) -> SymmetricForm {
        SymmetricForm(&self.0 * s)
    }
}

pub fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Inverse of `packed_len`, if `len` is triangular.
pub fn dim_from_packed(len: usize) -> Option<usize> {
    (0..=len).find(|&n| packed_len(n) == len)
}

/// α·ℓ² as a form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rank1Form {
    pub alpha: f64,
    pub ell: Vec<f64>,
}

impl Rank1Form {
    pub fn new(alpha: f64, ell: Vec<f64>) -> Result<Self> {
        if alpha != 0.0 && ell.iter().all(|&v| v == 0.0) {
            return Err(Error::Invariant(
                "rank-1 form with nonzero alpha needs a nonzero covector".into(),
            ));
        }
        Ok(Rank1Form { alpha, ell })
    }

    pub fn dim(&self) -> usize {
        self.ell.len()
    }

    pub fn as_form(&self) -> SymmetricForm {
        SymmetricForm::outer(self.alpha, &self.ell)
    }
}

/// Base form plus k rank-1 jumps with independent covectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormalRidge {
    base: SymmetricForm,
    jumps: Vec<Rank1Form>,
}

impl FormalRidge {
    pub fn new(base: SymmetricForm, jumps: Vec<Rank1Form>) -> Result<Self> {
        let n = base.dim();
        if jumps.len() > n {
            return Err(Error::Invariant(format!(
                "{} jumps exceed dimension {n}",
                jumps.len()
            )));
        }
        for j in &jumps {
            if j.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: j.dim(),
                });
            }
        }
        let l = covector_matrix(&jumps, n);
        if numerical_rank(&l) != jumps.len() {
            return Err(Error::Invariant(
                "jump covectors are linearly dependent".into(),
            ));
        }
        Ok(FormalRidge { base, jumps })
    }

    pub fn base(&self) -> &SymmetricForm {
        &self.base
    }

    pub fn jumps(&self) -> &[Rank1Form] {
        &self.jumps
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn order(&self) -> usize {
        self.jumps.len()
    }

    /// True if the base vanishes and every ℓ_j is a multiple of e_j.
    pub fn is_normalized(&self) -> bool {
        if self.base.max_abs() != 0.0 {
            return false;
        }
        self.jumps.iter().enumerate().all(|(j, mu)| {
            let scale = mu.ell.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
            mu.ell
                .iter()
                .enumerate()
                .all(|(i, &v)| (i == j && v != 0.0) || (i != j && v.abs() <= 1e-14 * scale))
        })
    }

    /// Unit covectors with positive leading entry, sorted lexicographically.
    pub fn canonicalize(&self) -> FormalRidge {
        let mut jumps: Vec<Rank1Form> = self
            .jumps
            .iter()
            .map(|mu| {
                let norm = mu.ell.iter().map(|v| v * v).sum::<f64>().sqrt();
                let lead = mu.ell.iter().find(|v| **v != 0.0).copied().unwrap_or(1.0);
                let s = lead.signum() / norm;
                Rank1Form {
                    alpha: mu.alpha * norm * norm,
                    ell: mu.ell.iter().map(|v| v * s).collect(),
                }
            })
            .collect();
        jumps.sort_by(|a, b| {
            a.ell
                .iter()
                .zip(&b.ell)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.alpha.total_cmp(&b.alpha))
        });
        FormalRidge {
            base: self.base.clone(),
            jumps,
        }
    }
}

fn covector_matrix(jumps: &[Rank1Form], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(jumps.len(), n, |j, i| jumps[j].ell[i])
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// dim(λ1 ∩ λ2) = dim ker(λ1 − λ2).
pub fn intersection_dim(l1: &SymmetricForm, l2: &SymmetricForm) -> Result<usize> {
    check_dims(l1.dim(), l2.dim())?;
    let d = l1 - l2;
    Ok(l1.dim() - numerical_rank(d.matrix()))
}

/// |det(l1 − l2)| > margin.
pub fn is_transverse(l1: &SymmetricForm, l2: &SymmetricForm, margin: f64) -> Result<bool> {
    check_dims(l1.dim(), l2.dim())?;
    if margin < 0.0 {
        return Err(Error::Input("margin must be non-negative".into()));
    }
    Ok((l1 - l2).det().abs() > margin)
}

/// λ₀ + Σ_{j∈J} μ_j for every bitmask J in ascending order.
pub fn ridge_planes(r: &FormalRidge) -> Vec<SymmetricForm> {
    let k = r.order();
    let mus: Vec<SymmetricForm> = r.jumps.iter().map(Rank1Form::as_form).collect();
    (0..1usize << k)
        .map(|mask| {
            let mut s = r.base.clone();
            for (j, mu) in mus.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    s = &s + mu;
                }
            }
            s
        })
        .collect()
}

pub fn ridge_transverse_to(r: &FormalRidge, g: &SymmetricForm, margin: f64) -> Result<bool> {
    check_dims(r.dim(), g.dim())?;
    for p in ridge_planes(r) {
        if !is_transverse(&p, g, margin)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The standard form Ω = (0 I; −I 0) on ℝ²ⁿ.
pub fn omega(n: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        o[(i, n + i)] = 1.0;
        o[(n + i, i)] = -1.0;
    }
    o
}

/// max |MᵀΩM − Ω| ≤ TOL_SYM.
pub fn symplectic_check(m: &DMatrix<f64>) -> Result<bool> {
    if m.nrows() != m.ncols() {
        return Err(Error::Input("matrix is not square".into()));
    }
    if m.nrows() % 2 != 0 {
        return Err(Error::Input("matrix has odd dimension".into()));
    }
    let o = omega(m.nrows() / 2);
    let d = m.transpose() * &o * m - &o;
    Ok(d.iter().all(|v| v.abs() <= TOL_SYM))
}

/// 2n×2n matrix preserving Ω, blocks (A B; C D) over base ⊕ fiber.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticMatrix(DMatrix<f64>);

impl SymplecticMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !symplectic_check(&m)? {
            return Err(Error::Invariant("matrix is not symplectic".into()));
        }
        Ok(SymplecticMatrix(m))
    }

    pub fn identity(n: usize) -> Self {
        SymplecticMatrix(DMatrix::identity(2 * n, 2 * n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn half_dim(&self) -> usize {
        self.0.nrows() / 2
    }

    pub fn compose(&self, other: &SymplecticMatrix) -> SymplecticMatrix {
        SymplecticMatrix(&self.0 * &other.0)
    }

    /// M⁻¹ = −Ω Mᵀ Ω.
    pub fn inverse(&self) -> SymplecticMatrix {
        let o = omega(self.half_dim());
        SymplecticMatrix(-(&o * self.0.transpose() * &o))
    }

    pub fn apply(&self, f: &LagrangianFrame) -> LagrangianFrame {
        LagrangianFrame(&self.0 * &f.0)
    }
}

/// (I B; 0 I): fixes the base plane {p = 0} pointwise.
pub fn vertical_shear(b: &SymmetricForm) -> SymplecticMatrix {
    let n = b.dim();
    let mut m = DMatrix::identity(2 * n, 2 * n);
    m.view_mut((0, n), (n, n)).copy_from(b.matrix());
    SymplecticMatrix(m)
}

/// (I 0; S I): sends graph(T) to graph(T + S).
pub fn fiber_shear(s: &SymmetricForm) -> SymplecticMatrix {
    let n = s.dim();
    let mut m = DMatrix::identity(2 * n, 2 * n);
    m.view_mut((n, 0), (n, n)).copy_from(s.matrix());
    SymplecticMatrix(m)
}

/// Lift (q, p) ↦ (G q, G⁻ᵀ p) of an invertible base change.
pub fn base_change(g: &DMatrix<f64>) -> Result<SymplecticMatrix> {
    let n = g.nrows();
    let inv = g
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Input("base change is singular".into()))?;
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(g);
    m.view_mut((n, n), (n, n)).copy_from(&inv.transpose());
    Ok(SymplecticMatrix(m))
}

/// 2n×n matrix whose columns span a plane.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianFrame(DMatrix<f64>);

impl LagrangianFrame {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != 2 * m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: 2 * m.ncols(),
                found: m.nrows(),
            });
        }
        Ok(LagrangianFrame(m))
    }

    /// Columns of [I; S].
    pub fn graph(s: &SymmetricForm) -> Self {
        let n = s.dim();
        let mut m = DMatrix::zeros(2 * n, n);
        m.view_mut((0, 0), (n, n)).fill_with_identity();
        m.view_mut((n, 0), (n, n)).copy_from(s.matrix());
        LagrangianFrame(m)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn half_dim(&self) -> usize {
        self.0.ncols()
    }

    /// The form S with plane = graph(S), if the plane is transverse to the fiber.
    pub fn to_form(&self) -> Result<SymmetricForm> {
        let n = self.half_dim();
        let x = self.0.view((0, 0), (n, n)).into_owned();
        let y = self.0.view((n, 0), (n, n)).into_owned();
        if numerical_rank(&x) < n {
            return Err(Error::Input("plane is not graphical".into()));
        }
        let xinv = x
            .try_inverse()
            .ok_or_else(|| Error::Input("plane is not graphical".into()))?;
        Ok(SymmetricForm::symmetrize(&(y * xinv)))
    }

    /// FᵀΩF vanishes.
    pub fn is_isotropic(&self, tol: f64) -> bool {
        let o = omega(self.half_dim());
        (self.0.transpose() * o * &self.0)
            .iter()
            .all(|v| v.abs() <= tol)
    }
}

/// dim(span F1 ∩ span F2) from ranks.
pub fn frame_intersection_dim(f1: &LagrangianFrame, f2: &LagrangianFrame) -> usize {
    let r1 = numerical_rank(&f1.0);
    let r2 = numerical_rank(&f2.0);
    let mut both = DMatrix::zeros(f1.0.nrows(), f1.0.ncols() + f2.0.ncols());
    both.view_mut((0, 0), f1.0.shape()).copy_from(&f1.0);
    both.view_mut((0, f1.0.ncols()), f2.0.shape())
        .copy_from(&f2.0);
    r1 + r2 - numerical_rank(&both)
}

/// True if `m` maps each plane of `r1` onto the plane of `r2` with the same index.
pub fn maps_planes(m: &SymplecticMatrix, r1: &FormalRidge, r2: &FormalRidge) -> bool {
    let n = r1.dim();
    ridge_planes(r1)
        .iter()
        .zip(ridge_planes(r2).iter())
        .all(|(a, b)| {
            let img = m.apply(&LagrangianFrame::graph(a));
            frame_intersection_dim(&img, &LagrangianFrame::graph(b)) == n
        })
}

/// Base change that brings a ridge to normal form.
#[derive(Clone, Debug)]
pub struct Normalization {
    /// q = G q′.
    pub g: DMatrix<f64>,
    /// Pulled-back base form, removed by a fiber shear.
    pub shear: SymmetricForm,
    pub ridge: FormalRidge,
}

impl Normalization {
    /// Pushes a normalized-coordinate form back to the original coordinates.
    pub fn restore(&self, s: &SymmetricForm) -> SymmetricForm {
        let ginv = self
            .g
            .clone()
            .try_inverse()
            .expect("normalization is invertible");
        (&self.shear + s).pullback(&ginv)
    }

    /// Symplectic map from the original coordinates to the normalized ones.
    pub fn to_normal(&self) -> SymplecticMatrix {
        let lift = base_change(&self.g).expect("normalization is invertible");
        fiber_shear(&-&self.shear).compose(&lift.inverse())
    }
}

pub fn normalize_ridge(r: &FormalRidge) -> Result<Normalization> {
    let n = r.dim();
    let k = r.order();
    let l = covector_matrix(&r.jumps, n);
    if numerical_rank(&l) != k {
        return Err(Error::Invariant(
            "jump covectors are linearly dependent".into(),
        ));
    }
    let g = if r.is_normalized() {
        DMatrix::identity(n, n)
    } else {
        let comp = null_space(&l);
        let mut w = DMatrix::zeros(n, n);
        w.view_mut((0, 0), (k, n)).copy_from(&l);
        for c in 0..n - k {
            for i in 0..n {
                w[(k + c, i)] = comp[(i, c)];
            }
        }
        w.try_inverse()
            .ok_or_else(|| Error::Invariant("jump covectors are linearly dependent".into()))?
    };
    let jumps = r
        .jumps
        .iter()
        .enumerate()
        .map(|(j, mu)| {
            let row = DMatrix::from_row_slice(1, n, &mu.ell) * &g;
            let mut ell = vec![0.0; n];
            ell[j] = row[(0, j)];
            Rank1Form {
                alpha: mu.alpha,
                ell,
            }
        })
        .collect();
    Ok(Normalization {
        shear: r.base.pullback(&g),
        ridge: FormalRidge {
            base: SymmetricForm::zeros(n),
            jumps,
        },
        g,
    })
}

fn normalized_coefficients(r: &FormalRidge) -> Result<Vec<f64>> {
    r.jumps
        .iter()
        .enumerate()
        .map(|(j, mu)| {
            let a = mu.alpha * mu.ell[j] * mu.ell[j];
            if a == 0.0 {
                Err(Error::Invariant(format!("jump {j} has zero coefficient")))
            } else {
                Ok(a)
            }
        })
        .collect()
}

/// Symplectic map sending the J-th plane of `r1` to the J-th plane of `r2`,
/// for ridges in normal form.
pub fn ordered_ridge_isomorphism(r1: &FormalRidge, r2: &FormalRidge) -> Result<SymplecticMatrix> {
    check_dims(r1.dim(), r2.dim())?;
    if r1.order() != r2.order() {
        return Err(Error::Input(format!(
            "ridge orders differ: {} vs {}",
            r1.order(),
            r2.order()
        )));
    }
    if !r1.is_normalized() || !r2.is_normalized() {
        return Err(Error::NormalizationRequired);
    }
    let a = normalized_coefficients(r1)?;
    let b = normalized_coefficients(r2)?;
    let mut d = vec![0.0; r1.dim()];
    for j in 0..a.len() {
        d[j] = 1.0 / b[j] - 1.0 / a[j];
    }
    Ok(vertical_shear(&SymmetricForm::diag(&d)))
}

/// Ordered isomorphism between arbitrary ridges, through their normal forms.
pub fn ridge_isomorphism(r1: &FormalRidge, r2: &FormalRidge) -> Result<SymplecticMatrix> {
    check_dims(r1.dim(), r2.dim())?;
    let n1 = normalize_ridge(r1)?;
    let n2 = normalize_ridge(r2)?;
    let core = ordered_ridge_isomorphism(&n1.ridge, &n2.ridge)?;
    Ok(n2
        .to_normal()
        .inverse()
        .compose(&core)
        .compose(&n1.to_normal()))
}

/// Lagrangian plane in the reduced symplectic space.
#[derive(Clone, Debug)]
pub struct ReducedPlane {
    /// 2m×m frame, coordinates (q_1..q_m, p_1..p_m).
    pub frame: DMatrix<f64>,
    /// Reduced symplectic form Ω′.
    pub omega: DMatrix<f64>,
}

impl ReducedPlane {
    pub fn half_dim(&self) -> usize {
        self.frame.ncols()
    }

    pub fn is_isotropic(&self, tol: f64) -> bool {
        (self.frame.transpose() * &self.omega * &self.frame)
            .iter()
            .all(|v| v.abs() <= tol)
    }

    pub fn to_form(&self) -> Result<SymmetricForm> {
        LagrangianFrame(self.frame.clone()).to_form()
    }
}

/// Image of η ∩ [λ] in [λ]/[λ]^ω for a ridge in normal form.
///
/// The span [λ] of the planes is {p_j = 0, j > k}; its ω-complement is spanned
/// by ∂q_j, j > k, and the quotient has coordinates (q_j, p_j), j ≤ k.
pub fn symplectic_reduction(eta: &LagrangianFrame, r: &FormalRidge) -> Result<ReducedPlane> {
    let n = r.dim();
    check_dims(n, eta.half_dim())?;
    if !r.is_normalized() {
        return Err(Error::NormalizationRequired);
    }
    let k = r.order();
    let f = eta.matrix();
    let y_tail = f.view((n + k, 0), (n - k, n)).into_owned();
    let cap = null_space(&y_tail);
    if cap.ncols() != k {
        return Err(Error::ReductionUndefined(format!(
            "eta meets the span of the ridge planes in dimension {} instead of {k}",
            cap.ncols()
        )));
    }
    let vecs = f * cap;
    let mut frame = DMatrix::zeros(2 * k, k);
    for c in 0..k {
        for j in 0..k {
            frame[(j, c)] = vecs[(j, c)];
            frame[(k + j, c)] = vecs[(n + j, c)];
        }
    }
    let out = ReducedPlane {
        frame,
        omega: omega(k),
    };
    if !out.is_isotropic(1e-10 * (1.0 + f.amax().powi(2))) {
        return Err(Error::ReductionUndefined(
            "reduced plane is not isotropic".into(),
        ));
    }
    Ok(out)
}
