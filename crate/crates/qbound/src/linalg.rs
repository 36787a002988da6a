//! Dense complex kernel: Hermitian eigendecomposition, functions on the
//! support, tensor bookkeeping and Schatten norms.
//!
//! Tensor products are row-major with subsystem 0 the most significant index.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Relative cutoff below which eigenvalues count as outside the support.
pub const SUPPORT_CUT: f64 = 1e-12;

const HERM_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize, m: usize) -> CMat {
    CMat::zeros(n, m)
}

pub fn dag(a: &CMat) -> CMat {
    a.adjoint()
}

pub fn trace(a: &CMat) -> C64 {
    a.trace()
}

/// Hilbert–Schmidt inner product Tr{A†B}.
pub fn inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Re Tr{A B} for Hermitian A, B without forming the product.
pub fn tr_prod_re(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    s
}

/// Computational basis ket |i⟩ in dimension d, as a column.
pub fn ket(d: usize, i: usize) -> CMat {
    let mut v = CMat::zeros(d, 1);
    v[(i, 0)] = r(1.0);
    v
}

pub fn ket_from(entries: &[C64]) -> CMat {
    CMat::from_column_slice(entries.len(), 1, entries)
}

/// |ψ⟩⟨ψ|
pub fn proj(psi: &CMat) -> CMat {
    psi * psi.adjoint()
}

pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> CMat {
    CMat::from_row_iterator(rows, cols, data.iter().map(|&x| r(x)))
}

pub fn diag(vals: &[f64]) -> CMat {
    let n = vals.len();
    let mut m = CMat::zeros(n, n);
    for (i, &v) in vals.iter().enumerate() {
        m[(i, i)] = r(v);
    }
    m
}

pub fn hermitian_residual(a: &CMat) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in i..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.norm()))
}

#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Ascending.
    pub values: Vec<f64>,
    /// Columns are eigenvectors.
    pub vectors: CMat,
}

impl HermitianEig {
    pub fn max(&self) -> f64 {
        *self.values.last().unwrap_or(&0.0)
    }

    pub fn min(&self) -> f64 {
        *self.values.first().unwrap_or(&0.0)
    }

    /// Q f(Λ) Q†
    pub fn rebuild(&self, vals: &[f64]) -> CMat {
        let mut scaled = self.vectors.clone();
        for (j, &v) in vals.iter().enumerate() {
            scaled.column_mut(j).scale_mut(v);
        }
        &scaled * self.vectors.adjoint()
    }

    /// Threshold used for support decisions.
    pub fn cut(&self, rel: f64) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        rel * scale
    }

    /// Projector onto eigenvalues above `rel · max|λ|`.
    pub fn support_projector(&self, rel: f64) -> CMat {
        let t = self.cut(rel);
        let vals: Vec<f64> = self.values.iter().map(|&v| if v > t { 1.0 } else { 0.0 }).collect();
        self.rebuild(&vals)
    }
}

/// Eigendecomposition of a Hermitian matrix. The input is symmetrized
/// before factoring.
pub fn eigh(h: &CMat) -> Result<HermitianEig> {
    if !h.is_square() {
        return Err(Error::Shape(format!("eigh on {}x{}", h.nrows(), h.ncols())));
    }
    let res = hermitian_residual(h);
    if res > HERM_TOL * max_abs(h).max(1.0) {
        return Err(Error::NotHermitian(res));
    }
    Ok(eigh_sym(&hermitian_part(h)))
}

/// Like [`eigh`] but assumes the caller already holds a Hermitian matrix.
pub fn eigh_sym(h: &CMat) -> HermitianEig {
    let n = h.nrows();
    if n == 0 {
        return HermitianEig { values: vec![], vectors: CMat::zeros(0, 0) };
    }
    let se = h.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let values = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vectors.set_column(k, &se.eigenvectors.column(i));
    }
    HermitianEig { values, vectors }
}

pub fn eigvalsh(h: &CMat) -> Vec<f64> {
    eigh_sym(&hermitian_part(h)).values
}

pub fn lambda_max(h: &CMat) -> f64 {
    *eigvalsh(h).last().unwrap_or(&0.0)
}

pub fn lambda_min(h: &CMat) -> f64 {
    *eigvalsh(h).first().unwrap_or(&0.0)
}

/// f applied to the eigenvalues above `rel_cut · max|λ|`; the rest map to 0.
pub fn matrix_fn_on_support<F: Fn(f64) -> f64>(h: &CMat, f: F, rel_cut: f64) -> Result<CMat> {
    if rel_cut < 0.0 {
        return Err(Error::Domain("support cut must be nonnegative".into()));
    }
    let e = eigh(h)?;
    fn_of_eig(&e, f, rel_cut)
}

pub fn fn_of_eig<F: Fn(f64) -> f64>(e: &HermitianEig, f: F, rel_cut: f64) -> Result<CMat> {
    let t = e.cut(rel_cut);
    let mut vals = Vec::with_capacity(e.values.len());
    for &v in &e.values {
        if v > t {
            let y = f(v);
            if !y.is_finite() {
                return Err(Error::Undefined(v));
            }
            vals.push(y);
        } else {
            vals.push(0.0);
        }
    }
    Ok(e.rebuild(&vals))
}

/// Natural log on the support.
pub fn logm(h: &CMat) -> Result<CMat> {
    matrix_fn_on_support(h, f64::ln, SUPPORT_CUT)
}

pub fn log2m(h: &CMat) -> Result<CMat> {
    matrix_fn_on_support(h, f64::log2, SUPPORT_CUT)
}

pub fn sqrtm_psd(h: &CMat) -> CMat {
    let e = eigh_sym(&hermitian_part(h));
    let vals: Vec<f64> = e.values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    e.rebuild(&vals)
}

/// Real power on the support (negative exponents allowed).
pub fn powm_support(h: &CMat, p: f64) -> CMat {
    let e = eigh_sym(&hermitian_part(h));
    let t = e.cut(SUPPORT_CUT);
    let vals: Vec<f64> = e.values.iter().map(|&v| if v > t { v.powf(p) } else { 0.0 }).collect();
    e.rebuild(&vals)
}

/// Fréchet derivative Df_H[X] = V (f^{[1]}(λ_i, λ_j) ∘ V†XV) V†, restricted
/// to the support of H (pairs touching a cut eigenvalue give 0).
pub fn frechet<F, G>(e: &HermitianEig, f: F, df: G, x: &CMat) -> CMat
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let t = e.cut(SUPPORT_CUT);
    let v = &e.vectors;
    let mut y = v.adjoint() * x * v;
    let n = e.values.len();
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (e.values[i], e.values[j]);
            let w = if a <= t || b <= t {
                0.0
            } else if (a - b).abs() <= 1e-12 * a.abs().max(b.abs()) {
                df(0.5 * (a + b))
            } else {
                (f(a) - f(b)) / (a - b)
            };
            y[(i, j)] *= C64::new(w, 0.0);
        }
    }
    v * y * v.adjoint()
}

/// e^{-iHt} for Hermitian H.
pub fn expm_unitary(h: &CMat, t: f64) -> CMat {
    let e = eigh_sym(&hermitian_part(h));
    let n = h.nrows();
    let mut scaled = e.vectors.clone();
    for j in 0..n {
        let ph = C64::from_polar(1.0, -e.values[j] * t);
        scaled.column_mut(j).iter_mut().for_each(|x| *x *= ph);
    }
    scaled * e.vectors.adjoint()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn kron_all(ms: &[CMat]) -> CMat {
    let mut out = CMat::identity(1, 1);
    for m in ms {
        out = out.kronecker(m);
    }
    out
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

fn check_shape(m: &CMat, dims: &[usize]) -> Result<()> {
    let n: usize = dims.iter().product();
    if !m.is_square() || m.nrows() != n || dims.iter().any(|&d| d == 0) {
        return Err(Error::Shape(format!(
            "{}x{} matrix against dims {:?}",
            m.nrows(),
            m.ncols(),
            dims
        )));
    }
    Ok(())
}

fn check_systems(sys: &[usize], n: usize) -> Result<()> {
    for &s in sys {
        if s >= n {
            return Err(Error::Shape(format!("subsystem {s} out of range for {n} systems")));
        }
    }
    Ok(())
}

/// Offsets Σ digit·stride for every multi-index over the listed systems.
fn offsets(dims: &[usize], st: &[usize], sys: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &s in sys {
        let mut next = Vec::with_capacity(out.len() * dims[s]);
        for &o in &out {
            for k in 0..dims[s] {
                next.push(o + k * st[s]);
            }
        }
        out = next;
    }
    out
}

/// Trace out every subsystem not listed in `keep`. Kept systems stay in
/// their original order.
pub fn partial_trace(m: &CMat, dims: &[usize], keep: &[usize]) -> Result<CMat> {
    check_shape(m, dims)?;
    check_systems(keep, dims.len())?;
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    let traced: Vec<usize> = (0..dims.len()).filter(|s| !keep.contains(s)).collect();
    let st = strides(dims);
    let ko = offsets(dims, &st, &keep);
    let to = offsets(dims, &st, &traced);
    let n = ko.len();
    let mut out = CMat::zeros(n, n);
    for (a, &oa) in ko.iter().enumerate() {
        for (b, &ob) in ko.iter().enumerate() {
            let mut s = C64::new(0.0, 0.0);
            for &t in &to {
                s += m[(oa + t, ob + t)];
            }
            out[(a, b)] = s;
        }
    }
    Ok(out)
}

/// Transpose the listed subsystems.
pub fn partial_transpose(m: &CMat, dims: &[usize], sys: &[usize]) -> Result<CMat> {
    check_shape(m, dims)?;
    check_systems(sys, dims.len())?;
    let st = strides(dims);
    let n = m.nrows();
    // digit contribution of the transposed systems for each index
    let part: Vec<usize> = (0..n)
        .map(|i| sys.iter().map(|&s| (i / st[s]) % dims[s] * st[s]).sum())
        .collect();
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let i2 = i - part[i] + part[j];
            let j2 = j - part[j] + part[i];
            out[(i2, j2)] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Index map for reordering subsystems: new system k is old system perm[k].
fn perm_index(dims: &[usize], perm: &[usize]) -> Result<Vec<usize>> {
    let mut seen = vec![false; dims.len()];
    if perm.len() != dims.len() {
        return Err(Error::Shape("permutation length".into()));
    }
    for &p in perm {
        if p >= dims.len() || seen[p] {
            return Err(Error::Shape(format!("bad permutation {perm:?}")));
        }
        seen[p] = true;
    }
    let st_old = strides(dims);
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let st_new = strides(&new_dims);
    let n: usize = dims.iter().product();
    Ok((0..n)
        .map(|i| {
            perm.iter()
                .enumerate()
                .map(|(k, &p)| (i / st_old[p]) % dims[p] * st_new[k])
                .sum()
        })
        .collect())
}

pub fn permute_systems(m: &CMat, dims: &[usize], perm: &[usize]) -> Result<CMat> {
    check_shape(m, dims)?;
    let map = perm_index(dims, perm)?;
    let n = m.nrows();
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(map[i], map[j])] = m[(i, j)];
        }
    }
    Ok(out)
}

pub fn permute_ket(v: &CMat, dims: &[usize], perm: &[usize]) -> Result<CMat> {
    let map = perm_index(dims, perm)?;
    let mut out = CMat::zeros(v.nrows(), 1);
    for i in 0..v.nrows() {
        out[(map[i], 0)] = v[(i, 0)];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schatten {
    One,
    Two,
    Inf,
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

pub fn schatten_norm(m: &CMat, p: Schatten) -> f64 {
    // Hermitian input: eigenvalues are cheaper and more accurate than SVD
    let herm = m.is_square() && hermitian_residual(m) <= 1e-14 * max_abs(m).max(1.0);
    let sv: Vec<f64> = if herm {
        eigvalsh(m).iter().map(|v| v.abs()).collect()
    } else {
        singular_values(m)
    };
    match p {
        Schatten::One => sv.iter().sum(),
        Schatten::Two => sv.iter().map(|s| s * s).sum::<f64>().sqrt(),
        Schatten::Inf => sv.iter().fold(0.0, |a, &b| a.max(b)),
    }
}

pub fn trace_norm(m: &CMat) -> f64 {
    schatten_norm(m, Schatten::One)
}

/// Closest unitary in any unitarily invariant norm: W V† from M = W Σ V†.
pub fn polar_unitary(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

pub fn unitarity_residual(u: &CMat) -> f64 {
    let n = u.ncols();
    max_abs(&(u.adjoint() * u - CMat::identity(n, n)))
}

/// Unnormalized maximally entangled vector Σ_i |i⟩|i⟩.
pub fn upsilon(d: usize) -> CMat {
    let mut v = CMat::zeros(d * d, 1);
    for i in 0..d {
        v[(i * d + i, 0)] = r(1.0);
    }
    v
}

/// |Υ⟩/√d
pub fn max_entangled_ket(d: usize) -> CMat {
    upsilon(d).unscale((d as f64).sqrt())
}

/// Φ_d = |Υ⟩⟨Υ|/d
pub fn max_entangled(d: usize) -> CMat {
    proj(&upsilon(d)).unscale(d as f64)
}

/// Swap operator on C^d ⊗ C^d.
pub fn swap(d: usize) -> CMat {
    let mut s = CMat::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            s[(j * d + i, i * d + j)] = r(1.0);
        }
    }
    s
}

pub fn real_part_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}
