//! Linear-matrix-inequality modelling on top of [`SdpProblem`].
//!
//! Real decision variables y parametrize Hermitian matrices; each
//! `psd(F0 + Σ y_k F_k)` becomes one block of the dual slack
//! Z = C − Σ y_k A_k with C = F0, A_k = −F_k. The multipliers of those
//! blocks are the primal X of the standard form, so both sides of every
//! program come back from one solve.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

use super::{solve, BlockCoeffs, SdpProblem, SdpSolution, SdpStatus};

/// Sparse square matrix keyed by (row, col).
pub type Terms = BTreeMap<(usize, usize), C64>;

fn add_into(dst: &mut Terms, src: &Terms, s: C64) {
    for (&k, &v) in src {
        *dst.entry(k).or_default() += v * s;
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

fn digits(mut i: usize, dims: &[usize]) -> Vec<usize> {
    let mut d = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        d[k] = i % dims[k];
        i /= dims[k];
    }
    d
}

/// Affine Hermitian-matrix expression F0 + Σ y_k F_k.
#[derive(Debug, Clone, Default)]
pub struct Affine {
    pub dim: usize,
    pub constant: Terms,
    pub terms: BTreeMap<usize, Terms>,
}

/// Real affine form c0 + Σ c_k y_k.
#[derive(Debug, Clone, Default)]
pub struct Linear {
    pub constant: f64,
    pub coeffs: BTreeMap<usize, f64>,
}

impl Linear {
    pub fn var(k: usize) -> Self {
        let mut l = Linear::default();
        l.coeffs.insert(k, 1.0);
        l
    }

    pub fn add(mut self, other: &Linear) -> Self {
        self.constant += other.constant;
        for (&k, &v) in &other.coeffs {
            *self.coeffs.entry(k).or_default() += v;
        }
        self
    }

    pub fn scale(mut self, s: f64) -> Self {
        self.constant *= s;
        for v in self.coeffs.values_mut() {
            *v *= s;
        }
        self
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|(&k, v)| v * y[k]).sum::<f64>()
    }
}

impl Affine {
    pub fn zero(dim: usize) -> Self {
        Affine { dim, ..Default::default() }
    }

    pub fn constant(m: &CMat) -> Self {
        let mut a = Affine::zero(m.nrows());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)].norm() > 0.0 {
                    a.constant.insert((i, j), m[(i, j)]);
                }
            }
        }
        a
    }

    pub fn identity(dim: usize) -> Self {
        let mut a = Affine::zero(dim);
        for i in 0..dim {
            a.constant.insert((i, i), C64::new(1.0, 0.0));
        }
        a
    }

    /// y_k · 1
    pub fn scalar_identity(k: usize, dim: usize) -> Self {
        let mut a = Affine::zero(dim);
        let t = a.terms.entry(k).or_default();
        for i in 0..dim {
            t.insert((i, i), C64::new(1.0, 0.0));
        }
        a
    }

    pub fn add(&self, other: &Affine) -> Affine {
        assert_eq!(self.dim, other.dim, "affine dimension mismatch");
        let mut out = self.clone();
        add_into(&mut out.constant, &other.constant, C64::new(1.0, 0.0));
        for (&k, t) in &other.terms {
            add_into(out.terms.entry(k).or_default(), t, C64::new(1.0, 0.0));
        }
        out
    }

    pub fn sub(&self, other: &Affine) -> Affine {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Affine {
        let sc = C64::new(s, 0.0);
        let f = |t: &Terms| t.iter().map(|(&k, &v)| (k, v * sc)).collect::<Terms>();
        Affine {
            dim: self.dim,
            constant: f(&self.constant),
            terms: self.terms.iter().map(|(&k, t)| (k, f(t))).collect(),
        }
    }

    /// Apply a linear map defined on matrix units |r⟩⟨c|.
    fn map_units<F>(&self, out_dim: usize, f: F) -> Affine
    where
        F: Fn(usize, usize, &mut Vec<(usize, usize, C64)>),
    {
        let mut buf = Vec::new();
        let mut apply = |t: &Terms| -> Terms {
            let mut out = Terms::new();
            for (&(r, c), &v) in t {
                buf.clear();
                f(r, c, &mut buf);
                for &(r2, c2, w) in buf.iter() {
                    *out.entry((r2, c2)).or_default() += v * w;
                }
            }
            out.retain(|_, v| v.norm() > 0.0);
            out
        };
        Affine {
            dim: out_dim,
            constant: apply(&self.constant),
            terms: self.terms.iter().map(|(&k, t)| (k, apply(t))).collect(),
        }
    }

    pub fn ptranspose(&self, dims: &[usize], sys: &[usize]) -> Affine {
        let st = strides(dims);
        let part = |i: usize| -> usize { sys.iter().map(|&s| (i / st[s]) % dims[s] * st[s]).sum() };
        self.map_units(self.dim, |r, c, out| {
            let (pr, pc) = (part(r), part(c));
            out.push((r - pr + pc, c - pc + pr, C64::new(1.0, 0.0)));
        })
    }

    pub fn ptrace(&self, dims: &[usize], keep: &[usize]) -> Affine {
        let kdims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
        let kst = strides(&kdims);
        let out_dim: usize = kdims.iter().product();
        let traced: Vec<usize> = (0..dims.len()).filter(|s| !keep.contains(s)).collect();
        self.map_units(out_dim, |r, c, out| {
            let (dr, dc) = (digits(r, dims), digits(c, dims));
            if traced.iter().all(|&s| dr[s] == dc[s]) {
                let ri: usize = keep.iter().enumerate().map(|(k, &s)| dr[s] * kst[k]).sum();
                let ci: usize = keep.iter().enumerate().map(|(k, &s)| dc[s] * kst[k]).sum();
                out.push((ri, ci, C64::new(1.0, 0.0)));
            }
        })
    }

    /// `self` lives on `full_dims[positions]`; tensor the identity onto the
    /// remaining systems of `full_dims`.
    pub fn tensor_identity(&self, full_dims: &[usize], positions: &[usize]) -> Affine {
        let st = strides(full_dims);
        let sdims: Vec<usize> = positions.iter().map(|&p| full_dims[p]).collect();
        let others: Vec<usize> = (0..full_dims.len()).filter(|s| !positions.contains(s)).collect();
        let mut offs = vec![0usize];
        for &o in &others {
            let mut next = Vec::with_capacity(offs.len() * full_dims[o]);
            for &b in &offs {
                for k in 0..full_dims[o] {
                    next.push(b + k * st[o]);
                }
            }
            offs = next;
        }
        let out_dim: usize = full_dims.iter().product();
        let place = |i: usize| -> usize {
            digits(i, &sdims).iter().zip(positions).map(|(&d, &p)| d * st[p]).sum()
        };
        self.map_units(out_dim, |r, c, out| {
            let (pr, pc) = (place(r), place(c));
            for &o in &offs {
                out.push((pr + o, pc + o, C64::new(1.0, 0.0)));
            }
        })
    }

    /// Re Tr{self}
    pub fn trace(&self) -> Linear {
        let tr = |t: &Terms| -> f64 { t.iter().filter(|((r, c), _)| r == c).map(|(_, v)| v.re).sum() };
        Linear {
            constant: tr(&self.constant),
            coeffs: self.terms.iter().map(|(&k, t)| (k, tr(t))).filter(|(_, v)| *v != 0.0).collect(),
        }
    }

    /// Re Tr{H · self} for Hermitian H.
    pub fn inner(&self, h: &CMat) -> Linear {
        let f = |t: &Terms| -> f64 { t.iter().map(|(&(r, c), v)| (h[(c, r)] * v).re).sum() };
        Linear {
            constant: f(&self.constant),
            coeffs: self.terms.iter().map(|(&k, t)| (k, f(t))).filter(|(_, v)| *v != 0.0).collect(),
        }
    }

    /// 1×1 expression from a scalar affine form.
    pub fn from_linear(l: &Linear) -> Affine {
        let mut a = Affine::zero(1);
        if l.constant != 0.0 {
            a.constant.insert((0, 0), C64::new(l.constant, 0.0));
        }
        for (&k, &v) in &l.coeffs {
            a.terms.entry(k).or_default().insert((0, 0), C64::new(v, 0.0));
        }
        a
    }

    pub fn eval(&self, y: &[f64]) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for (&(r, c), &v) in &self.constant {
            m[(r, c)] += v;
        }
        for (&k, t) in &self.terms {
            let s = y[k];
            if s != 0.0 {
                for (&(r, c), &v) in t {
                    m[(r, c)] += v * s;
                }
            }
        }
        m
    }
}

/// Hermitian matrix variable occupying `dim²` real variables.
#[derive(Debug, Clone, Copy)]
pub struct HermVar {
    pub offset: usize,
    pub dim: usize,
}

impl HermVar {
    pub fn affine(&self) -> Affine {
        let n = self.dim;
        let mut a = Affine::zero(n);
        let mut k = self.offset;
        for i in 0..n {
            a.terms.entry(k).or_default().insert((i, i), C64::new(1.0, 0.0));
            k += 1;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let t = a.terms.entry(k).or_default();
                t.insert((i, j), C64::new(1.0, 0.0));
                t.insert((j, i), C64::new(1.0, 0.0));
                k += 1;
                let t = a.terms.entry(k).or_default();
                t.insert((i, j), C64::new(0.0, 1.0));
                t.insert((j, i), C64::new(0.0, -1.0));
                k += 1;
            }
        }
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sense {
    Min,
    Max,
}

/// optimize c0 + cᵀy subject to a list of affine PSD constraints.
#[derive(Debug, Clone)]
pub struct Lmi {
    nvars: usize,
    objective: Linear,
    sense: Sense,
    blocks: Vec<Affine>,
}

#[derive(Debug, Clone)]
pub struct LmiSolution {
    /// Objective at the returned feasible y.
    pub value: f64,
    /// Objective bound certified by the block multipliers.
    pub bound: f64,
    pub y: Vec<f64>,
    /// One multiplier per `psd` block, in insertion order.
    pub multipliers: Vec<CMat>,
    pub status: SdpStatus,
    pub raw: SdpSolution,
}

impl LmiSolution {
    pub fn eval(&self, a: &Affine) -> CMat {
        a.eval(&self.y)
    }

    pub fn scalar(&self, k: usize) -> f64 {
        self.y[k]
    }

    pub fn gap(&self) -> f64 {
        (self.value - self.bound).abs()
    }
}

impl Default for Lmi {
    fn default() -> Self {
        Self::new()
    }
}

impl Lmi {
    pub fn new() -> Self {
        Lmi { nvars: 0, objective: Linear::default(), sense: Sense::Min, blocks: vec![] }
    }

    pub fn scalar(&mut self) -> usize {
        self.nvars += 1;
        self.nvars - 1
    }

    pub fn herm(&mut self, dim: usize) -> HermVar {
        let v = HermVar { offset: self.nvars, dim };
        self.nvars += dim * dim;
        v
    }

    /// Unit-trace Hermitian matrix; the last diagonal entry is eliminated.
    pub fn density(&mut self, dim: usize) -> Affine {
        let h = self.herm(dim);
        let mut a = h.affine();
        let last = h.offset + dim - 1;
        let removed = a.terms.remove(&last);
        debug_assert!(removed.is_some());
        a.constant.insert((dim - 1, dim - 1), C64::new(1.0, 0.0));
        for i in 0..dim - 1 {
            a.terms.get_mut(&(h.offset + i)).unwrap().insert((dim - 1, dim - 1), C64::new(-1.0, 0.0));
        }
        // keep variable numbering dense
        let shift: BTreeMap<usize, Terms> = a
            .terms
            .into_iter()
            .map(|(k, t)| (if k > last { k - 1 } else { k }, t))
            .collect();
        a.terms = shift;
        self.nvars -= 1;
        a
    }

    pub fn psd(&mut self, a: Affine) -> usize {
        self.blocks.push(a);
        self.blocks.len() - 1
    }

    pub fn minimize(&mut self, obj: Linear) {
        self.objective = obj;
        self.sense = Sense::Min;
    }

    pub fn maximize(&mut self, obj: Linear) {
        self.objective = obj;
        self.sense = Sense::Max;
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Standard-form program whose dual is this LMI (as a minimization).
    pub fn to_problem(&self) -> Result<SdpProblem> {
        let sgn = if self.sense == Sense::Min { 1.0 } else { -1.0 };
        let mut p = SdpProblem::new(self.blocks.iter().map(|a| a.dim).collect());
        let mut cons: Vec<BlockCoeffs> = vec![BlockCoeffs::new(); self.nvars];
        for (b, a) in self.blocks.iter().enumerate() {
            for (&(r, c), &v) in &a.constant {
                p.objective.add_raw(b, r, c, v);
            }
            for (&k, t) in &a.terms {
                for (&(r, c), &v) in t {
                    cons[k].add_raw(b, r, c, -v);
                }
            }
        }
        p.objective.prune();
        for (k, mut bc) in cons.into_iter().enumerate() {
            bc.prune();
            if bc.entries.is_empty() {
                return Err(Error::Sdp(format!("variable {k} appears in no constraint block")));
            }
            let ck = self.objective.coeffs.get(&k).copied().unwrap_or(0.0) * sgn;
            p.add_constraint(bc, -ck);
        }
        Ok(p)
    }

    pub fn solve(&self, tol: f64) -> Result<LmiSolution> {
        let p = self.to_problem()?;
        let raw = solve(&p, tol)?;
        let y = raw.dual_multipliers.clone();
        let c0 = self.objective.constant;
        // min c·y  ⇔  max (−c)·y ; dual value = −c·y
        let (value, bound) = match self.sense {
            Sense::Min => (c0 - raw.dual_value, c0 - raw.primal_value),
            Sense::Max => (c0 + raw.dual_value, c0 + raw.primal_value),
        };
        Ok(LmiSolution {
            value,
            bound,
            y,
            multipliers: raw.primal_blocks.clone(),
            status: raw.status,
            raw,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real, lambda_max, max_abs, max_entangled, partial_trace, partial_transpose};

    #[test]
    fn min_t_with_t_identity_above_a() {
        let a = from_real(2, 2, &[1.0, 2.0, 2.0, -3.0]);
        let mut lmi = Lmi::new();
        let t = lmi.scalar();
        lmi.psd(Affine::scalar_identity(t, 2).sub(&Affine::constant(&a)));
        lmi.minimize(Linear::var(t));
        let s = lmi.solve(1e-10).unwrap();
        assert!((s.value - lambda_max(&a)).abs() < 1e-8);
        assert!(s.gap() < 1e-8);
    }

    #[test]
    fn affine_maps_match_dense_kernels() {
        let mut lmi = Lmi::new();
        let v = lmi.herm(4);
        let y: Vec<f64> = (0..16).map(|k| (k as f64 * 0.37).sin()).collect();
        let a = v.affine();
        let m = a.eval(&y);
        let pt = a.ptranspose(&[2, 2], &[1]).eval(&y);
        assert!(max_abs(&(pt - partial_transpose(&m, &[2, 2], &[1]).unwrap())) < 1e-14);
        let tr = a.ptrace(&[2, 2], &[0]).eval(&y);
        assert!(max_abs(&(tr - partial_trace(&m, &[2, 2], &[0]).unwrap())) < 1e-14);
    }

    #[test]
    fn tensor_identity_places_factors() {
        let mut lmi = Lmi::new();
        let v = lmi.herm(2);
        let y = vec![0.3, -0.2, 0.5, 0.1];
        let a = v.affine();
        let m = a.eval(&y);
        let full = a.tensor_identity(&[2, 3], &[0]).eval(&y);
        assert!(max_abs(&(full - m.kronecker(&CMat::identity(3, 3)))) < 1e-15);
        let full = a.tensor_identity(&[3, 2], &[1]).eval(&y);
        assert!(max_abs(&(full - CMat::identity(3, 3).kronecker(&m))) < 1e-15);
    }

    #[test]
    fn density_variable_has_unit_trace() {
        let mut lmi = Lmi::new();
        let rho = lmi.density(3);
        assert_eq!(lmi.nvars(), 8);
        let y: Vec<f64> = (0..8).map(|k| 0.1 * k as f64).collect();
        assert!((rho.eval(&y).trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rai99_overlap_for_qubits() {
        // max Tr{Φ σ} over σ ⪰ 0, ‖T_B σ‖₁ ≤ 1 written with T_B σ = P − N
        let phi = max_entangled(2);
        let mut lmi = Lmi::new();
        let s = lmi.herm(4).affine();
        let p = lmi.herm(4).affine();
        let tb = s.ptranspose(&[2, 2], &[1]);
        lmi.psd(s.clone());
        lmi.psd(p.clone());
        lmi.psd(p.sub(&tb));
        let budget = Affine::identity(1).sub(&Affine::from_linear(&p.trace().scale(2.0).add(&tb.trace().scale(-1.0))));
        lmi.psd(budget);
        lmi.maximize(s.inner(&phi));
        let sol = lmi.solve(1e-9).unwrap();
        assert!((sol.value - 0.5).abs() < 1e-7, "{}", sol.value);
    }
}
