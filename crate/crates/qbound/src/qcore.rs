//! States, channels in Kraus/Choi/Stinespring form, the named channels,
//! Heisenberg–Weyl machinery, covariance checks and teleportation simulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, dag, eigh, eye, kron, max_abs, max_entangled, partial_trace, permute_systems, polar_unitary, proj, r,
    swap, trace_norm, unitarity_residual, upsilon, CMat, C64,
};

const REP_TOL: f64 = 1e-10;
/// Covariance residual accepted by [`covariance_check`].
pub const COV_TOL: f64 = 1e-9;

// ---- states ---------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DensityOperator {
    pub matrix: CMat,
    pub dims: Vec<usize>,
    /// Trace ≤ 1 allowed.
    pub subnormalized: bool,
}

impl DensityOperator {
    pub fn new(matrix: CMat, dims: Vec<usize>) -> Result<Self> {
        Self::build(matrix, dims, false)
    }

    pub fn subnormalized(matrix: CMat, dims: Vec<usize>) -> Result<Self> {
        Self::build(matrix, dims, true)
    }

    fn build(matrix: CMat, dims: Vec<usize>, sub: bool) -> Result<Self> {
        let n: usize = dims.iter().product();
        if !matrix.is_square() || matrix.nrows() != n {
            return Err(Error::Shape(format!("{}x{} state for dims {dims:?}", matrix.nrows(), matrix.ncols())));
        }
        let e = eigh(&matrix)?;
        if e.min() < -1e-10 {
            return Err(Error::NotPsd(e.min()));
        }
        let t = matrix.trace().re;
        if sub {
            if t > 1.0 + 1e-10 {
                return Err(Error::Invalid(format!("trace {t} exceeds 1")));
            }
        } else if (t - 1.0).abs() > 1e-10 {
            return Err(Error::Invalid(format!("trace {t} is not 1")));
        }
        Ok(DensityOperator { matrix: linalg::hermitian_part(&matrix), dims, subnormalized: sub })
    }

    pub fn pure(psi: &CMat, dims: Vec<usize>) -> Result<Self> {
        Self::new(proj(psi), dims)
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityOperator { matrix: eye(d).unscale(d as f64), dims: vec![d], subnormalized: false }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// State file format: subsystem dims and the matrix as rows of [re, im].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateJson {
    pub dims: Vec<usize>,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl DensityOperator {
    pub fn to_json(&self) -> StateJson {
        let m = &self.matrix;
        StateJson {
            dims: self.dims.clone(),
            matrix: (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect(),
        }
    }

    pub fn from_json(j: &StateJson) -> Result<Self> {
        let n = j.matrix.len();
        if j.matrix.iter().any(|row| row.len() != n) {
            return Err(Error::Shape("state matrix must be square".into()));
        }
        let m = CMat::from_fn(n, n, |a, b| c(j.matrix[a][b][0], j.matrix[a][b][1]));
        let h = linalg::hermitian_residual(&m);
        if h > 1e-10 {
            return Err(Error::NotHermitian(h));
        }
        Self::new(m, j.dims.clone())
    }
}

/// F·Φ + (1−F)(1−Φ)/(d²−1) on d⊗d.
pub fn isotropic_state(d: usize, f: f64) -> Result<CMat> {
    in_range("F", f, 0.0, 1.0)?;
    let phi = max_entangled(d);
    let d2 = (d * d) as f64;
    Ok(&phi * C64::new(f, 0.0) + (eye(d * d) - &phi) * C64::new((1.0 - f) / (d2 - 1.0), 0.0))
}

/// p·(antisymmetric projector)/dim + (1−p)·(symmetric projector)/dim on d⊗d.
pub fn werner_state(d: usize, p: f64) -> Result<CMat> {
    in_range("p", p, 0.0, 1.0)?;
    let (one, f) = (eye(d * d), swap(d));
    let df = d as f64;
    let anti = (&one - &f) * C64::new(0.5 / (df * (df - 1.0) / 2.0), 0.0);
    let sym = (&one + &f) * C64::new(0.5 / (df * (df + 1.0) / 2.0), 0.0);
    Ok(anti * C64::new(p, 0.0) + sym * C64::new(1.0 - p, 0.0))
}

// ---- channels -------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    pub in_dim: usize,
    pub out_dim: usize,
    pub kraus: Vec<CMat>,
    /// Σ K†K ⪯ 1 instead of = 1.
    pub sub_operation: bool,
}

#[derive(Debug, Clone)]
pub struct ChoiOperator {
    /// On R ⊗ out, R ≅ in.
    pub matrix: CMat,
    pub in_dim: usize,
    pub out_dim: usize,
}

#[derive(Debug, Clone)]
pub struct IsometricExtension {
    /// in → out ⊗ env
    pub u: CMat,
    pub in_dim: usize,
    pub out_dim: usize,
    pub env_dim: usize,
}

fn check_tp(kraus: &[CMat], din: usize) -> (f64, f64) {
    let mut s = CMat::zeros(din, din);
    for k in kraus {
        s += k.adjoint() * k;
    }
    let dev = max_abs(&(&s - eye(din)));
    let top = linalg::lambda_max(&s);
    (dev, top)
}

impl KrausChannel {
    pub fn new(kraus: Vec<CMat>) -> Result<Self> {
        let ch = Self::unchecked(kraus)?;
        let (dev, _) = check_tp(&ch.kraus, ch.in_dim);
        if dev > REP_TOL {
            return Err(Error::Invalid(format!("Kraus operators not trace preserving (deviation {dev:.2e})")));
        }
        Ok(ch)
    }

    pub fn sub_operation(kraus: Vec<CMat>) -> Result<Self> {
        let mut ch = Self::unchecked(kraus)?;
        let (_, top) = check_tp(&ch.kraus, ch.in_dim);
        if top > 1.0 + REP_TOL {
            return Err(Error::Invalid("Σ K†K exceeds identity".into()));
        }
        ch.sub_operation = true;
        Ok(ch)
    }

    fn unchecked(kraus: Vec<CMat>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| Error::Invalid("empty Kraus list".into()))?;
        let (out_dim, in_dim) = first.shape();
        if kraus.iter().any(|k| k.shape() != (out_dim, in_dim)) {
            return Err(Error::Shape("Kraus operators differ in shape".into()));
        }
        if kraus.iter().any(|k| k.iter().any(|v| !v.re.is_finite() || !v.im.is_finite())) {
            return Err(Error::Invalid("non-finite Kraus entry".into()));
        }
        Ok(KrausChannel { in_dim, out_dim, kraus, sub_operation: false })
    }

    pub fn identity(d: usize) -> Self {
        KrausChannel { in_dim: d, out_dim: d, kraus: vec![eye(d)], sub_operation: false }
    }

    pub fn unitary(u: &CMat) -> Result<Self> {
        if !u.is_square() || unitarity_residual(u) > REP_TOL {
            return Err(Error::Invalid("not unitary".into()));
        }
        Ok(KrausChannel { in_dim: u.ncols(), out_dim: u.nrows(), kraus: vec![u.clone()], sub_operation: false })
    }

    pub fn apply(&self, rho: &CMat) -> Result<CMat> {
        if rho.nrows() != self.in_dim || rho.ncols() != self.in_dim {
            return Err(Error::Shape(format!("input {}x{} for channel on {}", rho.nrows(), rho.ncols(), self.in_dim)));
        }
        let mut out = CMat::zeros(self.out_dim, self.out_dim);
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        Ok(out)
    }

    /// (id_R ⊗ M) on R ⊗ in.
    pub fn apply_on(&self, rho: &CMat, dims: &[usize], sys: usize) -> Result<CMat> {
        let ops: Vec<CMat> = self.kraus.iter().map(|k| lift(k, dims, sys)).collect::<Result<_>>()?;
        let mut out = CMat::zeros(ops[0].nrows(), ops[0].nrows());
        for k in &ops {
            out += k * rho * k.adjoint();
        }
        Ok(out)
    }

    pub fn adjoint_apply(&self, x: &CMat) -> Result<CMat> {
        if x.nrows() != self.out_dim || x.ncols() != self.out_dim {
            return Err(Error::Shape("adjoint input dimension".into()));
        }
        let mut out = CMat::zeros(self.in_dim, self.in_dim);
        for k in &self.kraus {
            out += k.adjoint() * x * k;
        }
        Ok(out)
    }

    /// Kraus representation of M† (a channel exactly when M is unital).
    pub fn adjoint_map(&self) -> KrausChannel {
        KrausChannel {
            in_dim: self.out_dim,
            out_dim: self.in_dim,
            kraus: self.kraus.iter().map(dag).collect(),
            sub_operation: true,
        }
    }

    /// self ∘ first
    pub fn after(&self, first: &KrausChannel) -> Result<KrausChannel> {
        if first.out_dim != self.in_dim {
            return Err(Error::Shape("composition dimension mismatch".into()));
        }
        let mut ks = Vec::with_capacity(self.kraus.len() * first.kraus.len());
        for a in &self.kraus {
            for b in &first.kraus {
                ks.push(a * b);
            }
        }
        Ok(KrausChannel {
            in_dim: first.in_dim,
            out_dim: self.out_dim,
            kraus: ks,
            sub_operation: self.sub_operation || first.sub_operation,
        })
    }

    pub fn tensor(&self, other: &KrausChannel) -> KrausChannel {
        let mut ks = Vec::new();
        for a in &self.kraus {
            for b in &other.kraus {
                ks.push(kron(a, b));
            }
        }
        KrausChannel {
            in_dim: self.in_dim * other.in_dim,
            out_dim: self.out_dim * other.out_dim,
            kraus: ks,
            sub_operation: self.sub_operation || other.sub_operation,
        }
    }

    pub fn is_unital(&self, tol: f64) -> bool {
        self.in_dim == self.out_dim
            && self.apply(&eye(self.in_dim)).map(|m| max_abs(&(m - eye(self.in_dim))) <= tol).unwrap_or(false)
    }

    /// M(1) ⪯ 1
    pub fn is_sub_unital(&self, tol: f64) -> bool {
        self.apply(&eye(self.in_dim)).map(|m| linalg::lambda_max(&m) <= 1.0 + tol).unwrap_or(false)
    }

    pub fn choi(&self) -> ChoiOperator {
        choi_of(self)
    }

    pub fn isometric_extension(&self) -> IsometricExtension {
        let e = self.kraus.len();
        let mut u = CMat::zeros(self.out_dim * e, self.in_dim);
        for (j, k) in self.kraus.iter().enumerate() {
            for o in 0..self.out_dim {
                for i in 0..self.in_dim {
                    u[(o * e + j, i)] = k[(o, i)];
                }
            }
        }
        IsometricExtension { u, in_dim: self.in_dim, out_dim: self.out_dim, env_dim: e }
    }

    /// Channel to the environment of the canonical isometric extension.
    pub fn complementary(&self) -> KrausChannel {
        self.isometric_extension().complementary()
    }
}

/// Embed an operator on subsystem `sys` into the full space.
pub fn lift(op: &CMat, dims: &[usize], sys: usize) -> Result<CMat> {
    if sys >= dims.len() || op.ncols() != dims[sys] {
        return Err(Error::Shape(format!("operator of width {} on subsystem {sys} of {dims:?}", op.ncols())));
    }
    let before: usize = dims[..sys].iter().product();
    let after: usize = dims[sys + 1..].iter().product();
    Ok(kron(&kron(&eye(before), op), &eye(after)))
}

impl IsometricExtension {
    pub fn new(u: CMat, out_dim: usize, env_dim: usize) -> Result<Self> {
        if u.nrows() != out_dim * env_dim {
            return Err(Error::Shape("isometry rows must equal out_dim·env_dim".into()));
        }
        if unitarity_residual(&u) > REP_TOL {
            return Err(Error::Invalid("U†U ≠ 1".into()));
        }
        Ok(IsometricExtension { in_dim: u.ncols(), u, out_dim, env_dim })
    }

    /// Kraus operators ⟨j|_E U.
    pub fn channel(&self) -> KrausChannel {
        let ks = (0..self.env_dim)
            .map(|j| CMat::from_fn(self.out_dim, self.in_dim, |o, i| self.u[(o * self.env_dim + j, i)]))
            .collect();
        KrausChannel { in_dim: self.in_dim, out_dim: self.out_dim, kraus: ks, sub_operation: false }
    }

    /// Kraus operators ⟨o|_B U, landing on E.
    pub fn complementary(&self) -> KrausChannel {
        let ks = (0..self.out_dim)
            .map(|o| CMat::from_fn(self.env_dim, self.in_dim, |j, i| self.u[(o * self.env_dim + j, i)]))
            .collect();
        KrausChannel { in_dim: self.in_dim, out_dim: self.env_dim, kraus: ks, sub_operation: false }
    }

    /// U ρ U† on out ⊗ env.
    pub fn apply(&self, rho: &CMat) -> CMat {
        &self.u * rho * self.u.adjoint()
    }
}

/// J = Σ_ij |i⟩⟨j| ⊗ M(|i⟩⟨j|)
pub fn choi_of(ch: &KrausChannel) -> ChoiOperator {
    let (din, dout) = (ch.in_dim, ch.out_dim);
    let mut j = CMat::zeros(din * dout, din * dout);
    for k in &ch.kraus {
        // (1 ⊗ K)|Υ⟩ has components v[(i, o)] = K[o, i]
        let v = CMat::from_fn(din * dout, 1, |idx, _| k[(idx % dout, idx / dout)]);
        j += &v * v.adjoint();
    }
    ChoiOperator { matrix: j, in_dim: din, out_dim: dout }
}

impl ChoiOperator {
    pub fn new(matrix: CMat, in_dim: usize, out_dim: usize) -> Result<Self> {
        if matrix.nrows() != in_dim * out_dim || !matrix.is_square() {
            return Err(Error::Shape("Choi matrix shape".into()));
        }
        Ok(ChoiOperator { matrix, in_dim, out_dim })
    }

    /// Normalized Choi state J/d_in.
    pub fn state(&self) -> CMat {
        self.matrix.unscale(self.in_dim as f64)
    }

    pub fn is_cptp(&self, tol: f64) -> bool {
        let t = partial_trace(&self.matrix, &[self.in_dim, self.out_dim], &[0]).unwrap();
        max_abs(&(t - eye(self.in_dim))) <= tol && linalg::lambda_min(&self.matrix) >= -tol
    }
}

/// Minimal Kraus set from the eigendecomposition of J.
pub fn channel_of(j: &ChoiOperator) -> Result<KrausChannel> {
    let e = eigh(&j.matrix)?;
    let scale = e.max().abs().max(1.0);
    if e.min() < -1e-10 * scale {
        return Err(Error::NotPsd(e.min()));
    }
    let (din, dout) = (j.in_dim, j.out_dim);
    let cut = 1e-12 * scale;
    let mut ks = Vec::new();
    for (idx, &lam) in e.values.iter().enumerate().rev() {
        if lam <= cut {
            continue;
        }
        let s = lam.sqrt();
        let col = e.vectors.column(idx);
        ks.push(CMat::from_fn(dout, din, |o, i| col[i * dout + o] * s));
    }
    if ks.is_empty() {
        return Err(Error::Invalid("zero Choi operator".into()));
    }
    let (dev, top) = check_tp(&ks, din);
    Ok(KrausChannel { in_dim: din, out_dim: dout, kraus: ks, sub_operation: dev > 1e-9 && top <= 1.0 + 1e-9 })
}

// ---- JSON channel schema ---------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelJson {
    pub in_dim: usize,
    pub out_dim: usize,
    pub kraus: Vec<Vec<Vec<[f64; 2]>>>,
}

impl KrausChannel {
    pub fn to_json(&self) -> ChannelJson {
        ChannelJson {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            kraus: self
                .kraus
                .iter()
                .map(|k| {
                    (0..k.nrows()).map(|i| (0..k.ncols()).map(|j| [k[(i, j)].re, k[(i, j)].im]).collect()).collect()
                })
                .collect(),
        }
    }

    pub fn from_json(j: &ChannelJson) -> Result<Self> {
        let mut ks = Vec::new();
        for k in &j.kraus {
            if k.len() != j.out_dim || k.iter().any(|row| row.len() != j.in_dim) {
                return Err(Error::Shape("Kraus operator does not match in_dim/out_dim".into()));
            }
            ks.push(CMat::from_fn(j.out_dim, j.in_dim, |a, b| c(k[a][b][0], k[a][b][1])));
        }
        KrausChannel::new(ks)
    }
}

// ---- bipartite channels ------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BipartiteChannel {
    pub channel: KrausChannel,
    /// (dA′, dB′)
    pub in_dims: (usize, usize),
    /// (dA, dB)
    pub out_dims: (usize, usize),
}

impl BipartiteChannel {
    pub fn new(channel: KrausChannel, in_dims: (usize, usize), out_dims: (usize, usize)) -> Result<Self> {
        if in_dims.0 * in_dims.1 != channel.in_dim || out_dims.0 * out_dims.1 != channel.out_dim {
            return Err(Error::Shape("bipartite split does not match channel dims".into()));
        }
        Ok(BipartiteChannel { channel, in_dims, out_dims })
    }

    /// Choi operator on L_A A B L_B with L_A ≅ A′, L_B ≅ B′.
    pub fn choi_lab(&self) -> CMat {
        let (da1, db1) = self.in_dims;
        let (da, db) = self.out_dims;
        // native order: L_A L_B A B
        let j = choi_of(&self.channel).matrix;
        permute_systems(&j, &[da1, db1, da, db], &[0, 2, 3, 1]).unwrap()
    }

    pub fn choi_dims(&self) -> [usize; 4] {
        [self.in_dims.0, self.out_dims.0, self.out_dims.1, self.in_dims.1]
    }
}

// ---- group representations ----------------------------------------------------

#[derive(Debug, Clone)]
pub struct GroupRep {
    pub unitaries: Vec<CMat>,
    /// table[g][h] = index of g·h (up to phase), when supplied.
    pub table: Option<Vec<Vec<usize>>>,
}

fn proportional(a: &CMat, b: &CMat) -> bool {
    // a = e^{iθ} b for unitaries: |Tr(b†a)| = dim
    let n = a.nrows() as f64;
    (linalg::inner(b, a).norm() - n).abs() < 1e-9 * n
}

impl GroupRep {
    pub fn new(unitaries: Vec<CMat>, table: Option<Vec<Vec<usize>>>) -> Result<Self> {
        if unitaries.is_empty() {
            return Err(Error::Invalid("empty group".into()));
        }
        let d = unitaries[0].nrows();
        for u in &unitaries {
            if u.nrows() != d || !u.is_square() || unitarity_residual(u) > REP_TOL {
                return Err(Error::Invalid("group element not unitary".into()));
            }
        }
        if let Some(t) = &table {
            let n = unitaries.len();
            if t.len() != n || t.iter().any(|row| row.len() != n || row.iter().any(|&k| k >= n)) {
                return Err(Error::Shape("multiplication table shape".into()));
            }
            for g in 0..n {
                for h in 0..n {
                    if !proportional(&(&unitaries[g] * &unitaries[h]), &unitaries[t[g][h]]) {
                        return Err(Error::Invalid(format!("not closed: {g}·{h}")));
                    }
                }
            }
        }
        Ok(GroupRep { unitaries, table })
    }

    pub fn trivial(n: usize) -> Self {
        GroupRep { unitaries: vec![eye(1); n], table: None }
    }

    pub fn dim(&self) -> usize {
        self.unitaries[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.unitaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unitaries.is_empty()
    }

    /// σ ⊕ 1 on d+1 levels, used for the erasure flag.
    pub fn direct_sum_identity(&self) -> GroupRep {
        let d = self.dim();
        let us = self
            .unitaries
            .iter()
            .map(|u| {
                let mut m = CMat::zeros(d + 1, d + 1);
                m.view_mut((0, 0), (d, d)).copy_from(u);
                m[(d, d)] = r(1.0);
                m
            })
            .collect();
        GroupRep { unitaries: us, table: None }
    }

    /// max ‖(1/|G|) Σ U X U† − Tr(X) π‖ over matrix units X.
    pub fn one_design_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                let mut x = CMat::zeros(d, d);
                x[(a, b)] = r(1.0);
                let mut s = CMat::zeros(d, d);
                for u in &self.unitaries {
                    s += u * &x * u.adjoint();
                }
                s /= r(self.len() as f64);
                let target = if a == b { eye(d).unscale(d as f64) } else { CMat::zeros(d, d) };
                worst = worst.max(max_abs(&(s - target)));
            }
        }
        worst
    }
}

// ---- Heisenberg–Weyl --------------------------------------------------------------

/// X(k)Z(l) with X(k)|j⟩ = |j⊕k⟩ and Z(l)|j⟩ = e^{2πilj/d}|j⟩.
pub fn hw_operator(d: usize, k: usize, l: usize) -> CMat {
    let mut m = CMat::zeros(d, d);
    for j in 0..d {
        let ph = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (l * j) as f64 / d as f64);
        m[((j + k) % d, j)] = ph;
    }
    m
}

/// Elements indexed k·d + l.
pub fn hw_group(d: usize) -> GroupRep {
    let mut us = Vec::with_capacity(d * d);
    for k in 0..d {
        for l in 0..d {
            us.push(hw_operator(d, k, l));
        }
    }
    let table = (0..d * d)
        .map(|g| {
            (0..d * d)
                .map(|h| {
                    let (k1, l1, k2, l2) = (g / d, g % d, h / d, h % d);
                    ((k1 + k2) % d) * d + (l1 + l2) % d
                })
                .collect()
        })
        .collect();
    GroupRep { unitaries: us, table: Some(table) }
}

// ---- the zoo -------------------------------------------------------------------------

fn in_range(name: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if !(v >= lo - 1e-15 && v <= hi + 1e-15) {
        return Err(Error::Domain(format!("{name}={v} outside [{lo}, {hi}]")));
    }
    Ok(())
}

/// D^q(ρ) = (1−q)ρ + qπ, q ∈ [0, d²/(d²−1)].
pub fn depolarizing(d: usize, q: f64) -> Result<KrausChannel> {
    let d2 = (d * d) as f64;
    in_range("q", q, 0.0, d2 / (d2 - 1.0))?;
    let mut ks = vec![eye(d).scale((1.0 - q + q / d2).max(0.0).sqrt())];
    for g in 1..d * d {
        ks.push(hw_operator(d, g / d, g % d).scale((q / d2).sqrt()));
    }
    Ok(KrausChannel { in_dim: d, out_dim: d, kraus: ks, sub_operation: false })
}

/// (1−q)ρ ⊕ q|e⟩⟨e| with |e⟩ the last of d+1 levels.
pub fn erasure(d: usize, q: f64) -> Result<KrausChannel> {
    in_range("q", q, 0.0, 1.0)?;
    let mut keep = CMat::zeros(d + 1, d);
    for i in 0..d {
        keep[(i, i)] = r((1.0 - q).sqrt());
    }
    let mut ks = vec![keep];
    for i in 0..d {
        let mut k = CMat::zeros(d + 1, d);
        k[(d, i)] = r(q.sqrt());
        ks.push(k);
    }
    Ok(KrausChannel { in_dim: d, out_dim: d + 1, kraus: ks, sub_operation: false })
}

/// |ψ⟩ ↦ √(1−q)|ψ⟩_B|e⟩_E + √q|e⟩_B|ψ⟩_E on (d+1) ⊗ (d+1).
pub fn erasure_wiretap_isometry(d: usize, q: f64) -> Result<IsometricExtension> {
    in_range("q", q, 0.0, 1.0)?;
    let n = d + 1;
    let mut u = CMat::zeros(n * n, d);
    for i in 0..d {
        u[(i * n + d, i)] += r((1.0 - q).sqrt());
        u[(d * n + i, i)] += r(q.sqrt());
    }
    Ok(IsometricExtension { u, in_dim: d, out_dim: n, env_dim: n })
}

/// Generalized amplitude damping with loss η and environment parameter θ.
pub fn gadc(eta: f64, theta: f64) -> Result<KrausChannel> {
    in_range("eta", eta, 0.0, 1.0)?;
    in_range("theta", theta, 0.0, 1.0)?;
    let (st, sn) = (theta.sqrt(), (1.0 - theta).sqrt());
    let (se, sl) = (eta.sqrt(), (1.0 - eta).sqrt());
    let ks = vec![
        linalg::from_real(2, 2, &[st, 0.0, 0.0, st * se]),
        linalg::from_real(2, 2, &[0.0, st * sl, 0.0, 0.0]),
        linalg::from_real(2, 2, &[sn * se, 0.0, 0.0, sn]),
        linalg::from_real(2, 2, &[0.0, 0.0, sn * sl, 0.0]),
    ];
    Ok(KrausChannel { in_dim: 2, out_dim: 2, kraus: ks, sub_operation: false })
}

/// Qubit phase |1⟩ → e^{iφ}|1⟩.
pub fn dephasing(phi: f64) -> KrausChannel {
    let mut u = eye(2);
    u[(1, 1)] = C64::from_polar(1.0, phi);
    KrausChannel { in_dim: 2, out_dim: 2, kraus: vec![u], sub_operation: false }
}

fn two_qubit(ch: KrausChannel) -> BipartiteChannel {
    BipartiteChannel { channel: ch, in_dims: (2, 2), out_dims: (2, 2) }
}

/// U_p = √p 1 + i√(1−p) S.
pub fn partial_swap(p: f64) -> Result<BipartiteChannel> {
    in_range("p", p, 0.0, 1.0)?;
    let u = eye(4).scale(p.sqrt()) + swap(2) * c(0.0, (1.0 - p).sqrt());
    Ok(two_qubit(KrausChannel { in_dim: 4, out_dim: 4, kraus: vec![u], sub_operation: false }))
}

/// Partial swap followed by discarding Alice's output.
pub fn partial_swap_traceout(p: f64) -> Result<BipartiteChannel> {
    let ps = partial_swap(p)?;
    let mut ks = Vec::new();
    for k in &ps.channel.kraus {
        for a in 0..2 {
            let bra = kron(&linalg::ket(2, a).adjoint(), &eye(2));
            ks.push(bra * k);
        }
    }
    Ok(BipartiteChannel {
        channel: KrausChannel { in_dim: 4, out_dim: 2, kraus: ks, sub_operation: false },
        in_dims: (2, 2),
        out_dims: (1, 2),
    })
}

/// ρ ↦ p SρS + (1−p) D SρS D† with D = diag(1, e^{iφ}, e^{iφ}, e^{2iφ}).
pub fn swap_then_collective_dephasing(p: f64, phi: f64) -> Result<BipartiteChannel> {
    in_range("p", p, 0.0, 1.0)?;
    let e1 = C64::from_polar(1.0, phi);
    let e2 = C64::from_polar(1.0, 2.0 * phi);
    let mut d = eye(4);
    d[(1, 1)] = e1;
    d[(2, 2)] = e1;
    d[(3, 3)] = e2;
    let s = swap(2);
    let ks = vec![s.scale(p.sqrt()), (&d * &s).scale((1.0 - p).sqrt())];
    Ok(two_qubit(KrausChannel { in_dim: 4, out_dim: 4, kraus: ks, sub_operation: false }))
}

pub fn cnot_unitary() -> CMat {
    linalg::from_real(4, 4, &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.])
}

/// Control on A, target on B.
pub fn cnot() -> BipartiteChannel {
    two_qubit(KrausChannel { in_dim: 4, out_dim: 4, kraus: vec![cnot_unitary()], sub_operation: false })
}

pub fn identity_bipartite(da: usize, db: usize) -> BipartiteChannel {
    BipartiteChannel { channel: KrausChannel::identity(da * db), in_dims: (da, db), out_dims: (da, db) }
}

/// Tr_A on A⊗B, Kraus operators ⟨i|_A ⊗ 1_B.
pub fn partial_trace_channel(da: usize, db: usize) -> KrausChannel {
    let kraus = (0..da).map(|i| kron(&linalg::ket(da, i).adjoint(), &eye(db))).collect();
    KrausChannel { in_dim: da * db, out_dim: db, kraus, sub_operation: false }
}

pub fn swap_channel(d: usize) -> BipartiteChannel {
    BipartiteChannel {
        channel: KrausChannel { in_dim: d * d, out_dim: d * d, kraus: vec![swap(d)], sub_operation: false },
        in_dims: (d, d),
        out_dims: (d, d),
    }
}

/// The two qubit-pair → qubit channels of the zero-error construction.
pub fn zero_error_pair() -> (KrausChannel, KrausChannel) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let k = |i: usize| linalg::ket(2, i);
    let plus = linalg::from_real(2, 1, &[s, s]);
    let minus = linalg::from_real(2, 1, &[s, -s]);
    let two = |a: &CMat, b: &CMat| kron(a, b);
    let b00 = two(&k(0), &k(0)).adjoint();
    let b01 = two(&k(0), &k(1)).adjoint();
    let b10 = two(&k(1), &k(0)).adjoint();
    let b11 = two(&k(1), &k(1)).adjoint();
    let b1p = two(&k(1), &plus).adjoint();
    let b1m = two(&k(1), &minus).adjoint();
    let a1 = vec![
        &k(0) * &b00,
        &k(0) * &b01,
        &k(0) * &b10,
        (&k(0) * &b11).scale(s),
        (&k(1) * &b11).scale(s),
    ];
    let a2 = vec![
        &plus * &b00,
        &plus * &b01,
        &k(1) * &b1p,
        (&k(0) * &b1m).scale(s),
        (&k(1) * &b1m).scale(s),
    ];
    (
        KrausChannel { in_dim: 4, out_dim: 2, kraus: a1, sub_operation: false },
        KrausChannel { in_dim: 4, out_dim: 2, kraus: a2, sub_operation: false },
    )
}

// ---- covariance -------------------------------------------------------------------------

/// max_g ‖(1⊗V_g) J (1⊗V_g)† − (U_gᵀ⊗1) J (U_gᵀ⊗1)†‖ (Choi form of
/// M(UρU†) = V M(ρ) V†).
pub fn covariance_residual(ch: &KrausChannel, in_rep: &GroupRep, out_rep: &GroupRep) -> Result<f64> {
    if in_rep.dim() != ch.in_dim || out_rep.dim() != ch.out_dim || in_rep.len() != out_rep.len() {
        return Err(Error::Shape("representation dims do not match channel".into()));
    }
    let j = choi_of(ch).matrix;
    let mut worst = 0.0f64;
    for (u, v) in in_rep.unitaries.iter().zip(&out_rep.unitaries) {
        let left = kron(&eye(ch.in_dim), v);
        let right = kron(&u.transpose(), &eye(ch.out_dim));
        let a = &left * &j * left.adjoint();
        let b = &right * &j * right.adjoint();
        worst = worst.max(max_abs(&(a - b)));
    }
    Ok(worst)
}

pub fn covariance_check(ch: &KrausChannel, in_rep: &GroupRep, out_rep: &GroupRep) -> bool {
    covariance_residual(ch, in_rep, out_rep).map(|r| r <= COV_TOL).unwrap_or(false)
}

/// Environment unitaries W^g with U∘U^g = (V^g ⊗ W^g)∘U for the canonical
/// isometric extension U = Σ_j L^j ⊗ |j⟩. Returns the unitaries and the
/// worst intertwining residual.
pub fn environment_unitaries(
    ch: &KrausChannel,
    in_rep: &GroupRep,
    out_rep: &GroupRep,
) -> Result<(Vec<CMat>, f64)> {
    let res = covariance_residual(ch, in_rep, out_rep)?;
    if res > COV_TOL {
        return Err(Error::NotCovariant(res));
    }
    let ls = &ch.kraus;
    let e = ls.len();
    // Gram matrix of the Kraus operators
    let gram = CMat::from_fn(e, e, |a, b| linalg::inner(&ls[a], &ls[b]));
    let ginv = gram
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Invalid("Kraus operators linearly dependent".into()))?;
    let iso = ch.isometric_extension();
    let mut ws = Vec::with_capacity(in_rep.len());
    let mut worst = 0.0f64;
    for (ug, vg) in in_rep.unitaries.iter().zip(&out_rep.unitaries) {
        // V† L^j U = Σ_k w_jk L^k ; w_j = G⁻¹ [⟨L^k, V† L^j U⟩]_k
        let mut w = CMat::zeros(e, e);
        for j in 0..e {
            let t = vg.adjoint() * &ls[j] * ug;
            let rhs = CMat::from_fn(e, 1, |k, _| linalg::inner(&ls[k], &t));
            let sol = &ginv * rhs;
            for k in 0..e {
                // W|k⟩ = Σ_j w_jk |j⟩
                w[(j, k)] = sol[(k, 0)];
            }
        }
        let wu = polar_unitary(&w);
        if max_abs(&(&wu - &w)) > 1e-6 {
            return Err(Error::Invalid("environment map not unitarizable (degenerate Kraus set)".into()));
        }
        let lhs = &iso.u * ug;
        let rhs = kron(vg, &wu) * &iso.u;
        worst = worst.max(max_abs(&(lhs - rhs)));
        ws.push(wu);
    }
    Ok((ws, worst))
}

// ---- teleportation simulation ------------------------------------------------------------

/// Input and output representations of a bicovariant bipartite channel:
/// N((U_g⊗V_h)ρ(U_g⊗V_h)†) = (W_gh⊗T_gh) N(ρ) (W_gh⊗T_gh)†.
#[derive(Debug, Clone)]
pub struct Bicovariance {
    pub in_a: GroupRep,
    pub in_b: GroupRep,
    /// out[g][h] = (W, T)
    pub out: Vec<Vec<(CMat, CMat)>>,
}

impl Bicovariance {
    /// Point-to-point covariance viewed as a bipartite channel with trivial B.
    pub fn point_to_point(in_rep: GroupRep, out_rep: &GroupRep) -> Self {
        let out = out_rep.unitaries.iter().map(|v| vec![(v.clone(), eye(1))]).collect();
        Bicovariance { in_a: in_rep, in_b: GroupRep::trivial(1), out }
    }

    /// Read W⊗T off the leading Kraus operator when it is proportional to a
    /// unitary, then verify on the whole channel.
    pub fn from_unitary_part(ch: &BipartiteChannel, in_a: GroupRep, in_b: GroupRep) -> Result<Self> {
        let k0 = &ch.channel.kraus[0];
        let norm2 = (k0.adjoint() * k0)[(0, 0)].re;
        if norm2 <= 0.0 {
            return Err(Error::Invalid("leading Kraus operator vanishes".into()));
        }
        let u = k0.unscale(norm2.sqrt());
        if unitarity_residual(&u) > 1e-9 {
            return Err(Error::Invalid("leading Kraus operator is not a scaled unitary".into()));
        }
        let (da, db) = ch.out_dims;
        let mut out = Vec::with_capacity(in_a.len());
        for ug in &in_a.unitaries {
            let mut row = Vec::with_capacity(in_b.len());
            for vh in &in_b.unitaries {
                let m = &u * kron(ug, vh) * u.adjoint();
                row.push(factor_product(&m, da, db)?);
            }
            out.push(row);
        }
        let cov = Bicovariance { in_a, in_b, out };
        let res = cov.residual(ch)?;
        if res > COV_TOL {
            return Err(Error::NotCovariant(res));
        }
        Ok(cov)
    }

    pub fn residual(&self, ch: &BipartiteChannel) -> Result<f64> {
        let mut ins = Vec::new();
        let mut outs = Vec::new();
        for (g, ug) in self.in_a.unitaries.iter().enumerate() {
            for (h, vh) in self.in_b.unitaries.iter().enumerate() {
                ins.push(kron(ug, vh));
                let (w, t) = &self.out[g][h];
                outs.push(kron(w, t));
            }
        }
        covariance_residual(
            &ch.channel,
            &GroupRep { unitaries: ins, table: None },
            &GroupRep { unitaries: outs, table: None },
        )
    }
}

/// Split M = W ⊗ T (up to phase) via the rank-one realignment.
pub fn factor_product(m: &CMat, da: usize, db: usize) -> Result<(CMat, CMat)> {
    // R[(a1 a2), (b1 b2)] = M[(a1 b1), (a2 b2)]
    let rr = CMat::from_fn(da * da, db * db, |ra, cb| {
        let (a1, a2) = (ra / da, ra % da);
        let (b1, b2) = (cb / db, cb % db);
        m[(a1 * db + b1, a2 * db + b2)]
    });
    let svd = rr.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let s0 = svd.singular_values[0];
    let w = CMat::from_fn(da, da, |a1, a2| u[(a1 * da + a2, 0)] * s0.sqrt());
    let t = CMat::from_fn(db, db, |b1, b2| vt[(0, b1 * db + b2)] * s0.sqrt());
    // rescale to unitaries
    let nw = ((w.adjoint() * &w).trace().re / da as f64).sqrt();
    let (w, t) = (w.unscale(nw), t.scale(nw));
    if max_abs(&(kron(&w, &t) - m)) > 1e-9 {
        return Err(Error::Invalid("operator is not a product".into()));
    }
    Ok((w, t))
}

/// Deterministic teleportation simulation of a bicovariant channel from its
/// resource state N(Φ_{L_A A′} ⊗ Φ_{B′ L_B}). `rho` lives on R ⊗ A′ ⊗ B′;
/// the result lives on R ⊗ A ⊗ B.
pub fn teleport_simulate(ch: &BipartiteChannel, cov: &Bicovariance, rho: &CMat, dr: usize) -> Result<CMat> {
    let (da1, db1) = ch.in_dims;
    let (da, db) = ch.out_dims;
    if cov.in_a.dim() != da1 || cov.in_b.dim() != db1 {
        return Err(Error::Shape("representation dims".into()));
    }
    if rho.nrows() != dr * da1 * db1 {
        return Err(Error::Shape("input state dims".into()));
    }
    for rep in [&cov.in_a, &cov.in_b] {
        let res = rep.one_design_residual();
        if res > 1e-9 {
            return Err(Error::Invalid(format!("representation is not a one-design (residual {res:.2e})")));
        }
    }
    // resource θ on L_A A B L_B
    let theta = ch_resource(ch);
    // ρ ⊗ θ on R A″ B″ L_A A B L_B, reordered to A″ L_A B″ L_B | R A B
    let full = kron(rho, &theta);
    let dims = [dr, da1, db1, da1, da, db, db1];
    let m = permute_systems(&full, &dims, &[1, 3, 2, 6, 0, 4, 5])?;
    let head = da1 * da1 * db1 * db1;
    let rest = dr * da * db;
    let ga = cov.in_a.len() as f64;
    let gb = cov.in_b.len() as f64;
    let phi_a = upsilon(da1).unscale((da1 as f64).sqrt());
    let phi_b = upsilon(db1).unscale((db1 as f64).sqrt());
    let mut out = CMat::zeros(rest, rest);
    for (g, ug) in cov.in_a.unitaries.iter().enumerate() {
        let va = kron(ug, &eye(da1)) * &phi_a;
        for (h, vh) in cov.in_b.unitaries.iter().enumerate() {
            let vb = kron(vh, &eye(db1)) * &phi_b;
            let v = kron(&va, &vb);
            // (⟨v| ⊗ 1) M (|v⟩ ⊗ 1)
            let mut blk = CMat::zeros(rest, rest);
            for i in 0..head {
                let ci = v[(i, 0)].conj();
                if ci.norm() == 0.0 {
                    continue;
                }
                for j in 0..head {
                    let cj = v[(j, 0)];
                    if cj.norm() == 0.0 {
                        continue;
                    }
                    blk += m.view((i * rest, j * rest), (rest, rest)) * (ci * cj);
                }
            }
            let weight = (da1 * da1) as f64 / ga * (db1 * db1) as f64 / gb;
            let (w, t) = &cov.out[g][h];
            let corr = kron(&kron(&eye(dr), w), t);
            out += &corr * blk * corr.adjoint() * r(weight);
        }
    }
    Ok(out)
}

/// N(Φ_{L_A A′} ⊗ Φ_{B′ L_B}) on L_A A B L_B.
pub fn ch_resource(ch: &BipartiteChannel) -> CMat {
    let (da1, db1) = ch.in_dims;
    let (da, db) = ch.out_dims;
    let j = choi_of(&ch.channel).matrix.unscale((da1 * db1) as f64);
    permute_systems(&j, &[da1, db1, da, db], &[0, 2, 3, 1]).unwrap()
}

/// (id_R ⊗ N) on R ⊗ A′ ⊗ B′.
pub fn apply_with_reference(ch: &BipartiteChannel, rho: &CMat, dr: usize) -> Result<CMat> {
    ch.channel.apply_on(rho, &[dr, ch.channel.in_dim], 1)
}

/// Post-selected teleportation: ⟨Υ|(ρ ⊗ J)|Υ⟩ with Υ pairing ρ's system with R.
pub fn choi_simulate(j: &ChoiOperator, rho: &CMat) -> CMat {
    let (din, dout) = (j.in_dim, j.out_dim);
    let full = kron(rho, &j.matrix);
    let ups = upsilon(din);
    let mut out = CMat::zeros(dout, dout);
    for i in 0..din * din {
        let ci = ups[(i, 0)];
        if ci.norm() == 0.0 {
            continue;
        }
        for k in 0..din * din {
            let ck = ups[(k, 0)];
            if ck.norm() == 0.0 {
                continue;
            }
            out += full.view((i * dout, k * dout), (dout, dout)) * (ci * ck);
        }
    }
    out
}

// ---- memory cells -----------------------------------------------------------------------

/// A finite family of channels indexed by symbols, optionally with the
/// isometric extension each channel is read through by an eavesdropper.
#[derive(Debug, Clone)]
pub struct MemoryCell {
    pub symbols: Vec<String>,
    pub channels: Vec<KrausChannel>,
    pub wiretap: Option<Vec<IsometricExtension>>,
}

/// Cell file format: symbol → channel.
pub type CellJson = std::collections::BTreeMap<String, ChannelJson>;

impl MemoryCell {
    /// Symbols default to "0", "1", ….
    pub fn new(channels: Vec<KrausChannel>) -> Result<Self> {
        let symbols = (0..channels.len()).map(|x| x.to_string()).collect();
        Self::with_symbols(symbols, channels)
    }

    pub fn with_symbols(symbols: Vec<String>, channels: Vec<KrausChannel>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Invalid("empty memory cell".into()));
        }
        if symbols.len() != channels.len() {
            return Err(Error::Shape("one symbol per channel".into()));
        }
        let (din, dout) = (channels[0].in_dim, channels[0].out_dim);
        if channels.iter().any(|c| c.in_dim != din || c.out_dim != dout) {
            return Err(Error::Shape("cell channels must share input and output dimensions".into()));
        }
        if channels.iter().any(|c| c.sub_operation) {
            return Err(Error::Invalid("cell channels must be trace preserving".into()));
        }
        Ok(MemoryCell { symbols, channels, wiretap: None })
    }

    /// Attach wiretap isometries; each must trace out to its channel.
    pub fn with_wiretap(mut self, exts: Vec<IsometricExtension>) -> Result<Self> {
        if exts.len() != self.channels.len() {
            return Err(Error::Shape("one isometric extension per symbol".into()));
        }
        for (x, (e, ch)) in exts.iter().zip(&self.channels).enumerate() {
            if e.in_dim != ch.in_dim || e.out_dim != ch.out_dim {
                return Err(Error::Shape(format!("extension {x} has the wrong dimensions")));
            }
            let res = max_abs(&(choi_of(&e.channel()).matrix - choi_of(ch).matrix));
            if res > 1e-10 {
                return Err(Error::Invalid(format!("extension {x} does not reproduce its channel ({res:.2e})")));
            }
        }
        self.wiretap = Some(exts);
        Ok(self)
    }

    /// Wiretap through the canonical Stinespring dilation of every channel.
    pub fn with_canonical_wiretap(mut self) -> Self {
        self.wiretap = Some(self.channels.iter().map(|c| c.isometric_extension()).collect());
        self
    }

    /// {M ∘ U_g}_g.
    pub fn rotated(base: &KrausChannel, rep: &GroupRep) -> Result<Self> {
        let chans = rep
            .unitaries
            .iter()
            .map(|u| base.after(&KrausChannel::unitary(u)?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(chans)
    }

    /// {U_M · U_g}_g with the wiretap carried along.
    pub fn rotated_wiretap(base: &IsometricExtension, rep: &GroupRep) -> Result<Self> {
        let exts: Vec<IsometricExtension> = rep
            .unitaries
            .iter()
            .map(|u| IsometricExtension { u: &base.u * u, ..base.clone() })
            .collect();
        let cell = Self::new(exts.iter().map(|e| e.channel()).collect())?;
        cell.with_wiretap(exts)
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn in_dim(&self) -> usize {
        self.channels[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.channels[0].out_dim
    }

    pub fn to_json(&self) -> CellJson {
        self.symbols.iter().cloned().zip(self.channels.iter().map(|c| c.to_json())).collect()
    }

    /// Symbols come back in sorted order.
    pub fn from_json(j: &CellJson) -> Result<Self> {
        let chans = j.values().map(KrausChannel::from_json).collect::<Result<Vec<_>>>()?;
        Self::with_symbols(j.keys().cloned().collect(), chans)
    }
}

/// Σ_x |x⟩⟨x|_X ⊗ U^x, padding every environment to the largest one.
/// Output order X ⊗ B ⊗ E; returns the isometry and the environment size.
pub fn controlled_isometry(cell: &MemoryCell) -> (CMat, usize) {
    let exts: Vec<IsometricExtension> = match &cell.wiretap {
        Some(w) => w.clone(),
        None => cell.channels.iter().map(|c| c.isometric_extension()).collect(),
    };
    let n = cell.len();
    let (din, dout) = (cell.in_dim(), cell.out_dim());
    let e = exts.iter().map(|x| x.env_dim).max().unwrap_or(1);
    let block = dout * e;
    let mut v = CMat::zeros(n * block, n * din);
    for (x, ext) in exts.iter().enumerate() {
        for o in 0..dout {
            for j in 0..ext.env_dim {
                for i in 0..din {
                    v[(x * block + o * e + j, x * din + i)] = ext.u[(o * ext.env_dim + j, i)];
                }
            }
        }
    }
    (v, e)
}

/// The controlled channel ρ_{XB′} ↦ Σ_x |x⟩⟨x| ⊗ M^x(⟨x|ρ|x⟩) with the
/// classical register as subsystem 0.
pub fn bidirectional_from_cell(cell: &MemoryCell) -> Result<BipartiteChannel> {
    let n = cell.len();
    let (din, dout) = (cell.in_dim(), cell.out_dim());
    if cell.channels.iter().any(|c| c.in_dim != din || c.out_dim != dout) {
        return Err(Error::Shape("inhomogeneous cell".into()));
    }
    let mut ks = Vec::new();
    for (x, ch) in cell.channels.iter().enumerate() {
        let px = proj(&linalg::ket(n, x));
        ks.extend(ch.kraus.iter().map(|k| kron(&px, k)));
    }
    let ch = KrausChannel { in_dim: n * din, out_dim: n * dout, kraus: ks, sub_operation: false };
    BipartiteChannel::new(ch, (n, din), (n, dout))
}

pub fn trace_distance(a: &CMat, b: &CMat) -> f64 {
    0.5 * trace_norm(&(a - b))
}

/// Normalized maximally entangled state, re-exported for callers that only
/// import this module.
pub fn phi(d: usize) -> CMat {
    max_entangled(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, eigvalsh};
    use crate::random;

    #[test]
    fn identity_choi_is_unnormalized_projector() {
        let j = choi_of(&KrausChannel::identity(2));
        assert!(max_abs(&(j.matrix.clone() - proj(&upsilon(2)))) < 1e-15);
        assert!((j.matrix.trace().re - 2.0).abs() < 1e-15);
    }

    #[test]
    fn fully_depolarizing_choi_is_product() {
        let j = choi_of(&depolarizing(2, 1.0).unwrap());
        assert!(max_abs(&(j.matrix - eye(4).scale(0.5))) < 1e-15);
    }

    #[test]
    fn cnot_choi_rank_one_trace_four() {
        let j = choi_of(&cnot().channel);
        let v = eigvalsh(&j.matrix);
        assert!((v[15] - 4.0).abs() < 1e-12);
        assert!(v[..15].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn choi_round_trip() {
        let mut rng = random::rng(3);
        let ch = KrausChannel::new(random::kraus_ops(3, 2, 4, &mut rng)).unwrap();
        let j = choi_of(&ch);
        let back = choi_of(&channel_of(&j).unwrap());
        assert!(max_abs(&(back.matrix - j.matrix)) < 1e-10);
    }

    #[test]
    fn adjoint_of_partial_trace() {
        // Tr_A as a channel A⊗B → B
        let mut ks = Vec::new();
        for a in 0..2 {
            ks.push(kron(&linalg::ket(2, a).adjoint(), &eye(3)));
        }
        let tr = KrausChannel::new(ks).unwrap();
        let mut rng = random::rng(1);
        let rb = random::full_rank_density(3, &mut rng);
        let adj = tr.adjoint_apply(&rb).unwrap();
        assert!(max_abs(&(adj - kron(&eye(2), &rb))) < 1e-14);
    }

    #[test]
    fn depolarizing_is_unital() {
        assert!(depolarizing(3, 0.4).unwrap().is_unital(1e-12));
    }

    #[test]
    fn erasure_environment_gets_sqrt_q_amplitude() {
        let q = 0.3;
        let iso = erasure_wiretap_isometry(2, q).unwrap();
        let psi = linalg::ket_from(&[r(0.6), c(0.0, 0.8)]);
        let env = iso.complementary().apply(&proj(&psi)).unwrap();
        // env = q|ψ⟩⟨ψ| ⊕ (1−q)|e⟩⟨e|
        let mut expect = CMat::zeros(3, 3);
        expect.view_mut((0, 0), (2, 2)).copy_from(&proj(&psi).scale(q));
        expect[(2, 2)] = r(1.0 - q);
        assert!(max_abs(&(env - expect)) < 1e-14);
        // and the B side is the erasure channel
        let b = iso.channel().apply(&proj(&psi)).unwrap();
        let e = erasure(2, q).unwrap().apply(&proj(&psi)).unwrap();
        assert!(max_abs(&(b - e)) < 1e-14);
    }

    #[test]
    fn zero_depolarizing_is_identity() {
        let j = choi_of(&depolarizing(2, 0.0).unwrap());
        assert!(max_abs(&(j.matrix - proj(&upsilon(2)))) < 1e-15);
    }

    #[test]
    fn hw_qubit_bell_basis() {
        let g = hw_group(2);
        let phi = max_entangled(2);
        let states: Vec<CMat> = g
            .unitaries
            .iter()
            .map(|s| {
                let u = kron(s, &eye(2));
                &u * &phi * u.adjoint()
            })
            .collect();
        for a in 0..4 {
            for b in 0..4 {
                let ov = linalg::tr_prod_re(&states[a], &states[b]);
                assert!((ov - if a == b { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        assert!(g.one_design_residual() < 1e-15);
    }

    #[test]
    fn partial_swap_at_zero_swaps() {
        let mut rng = random::rng(5);
        let a = random::full_rank_density(2, &mut rng);
        let b = random::full_rank_density(2, &mut rng);
        let out = partial_swap(0.0).unwrap().channel.apply(&kron(&a, &b)).unwrap();
        assert!(max_abs(&(out - kron(&b, &a))) < 1e-14);
    }

    #[test]
    fn parameter_ranges_enforced() {
        assert!(depolarizing(2, 1.4).is_err());
        assert!(erasure(2, -0.1).is_err());
        assert!(gadc(1.1, 0.5).is_err());
        assert!(partial_swap(2.0).is_err());
    }

    #[test]
    fn covariance_examples() {
        let hw = hw_group(3);
        assert!(covariance_check(&depolarizing(3, 0.7).unwrap(), &hw, &hw));
        let hw2 = hw_group(2);
        assert!(covariance_check(&erasure(2, 0.4).unwrap(), &hw2, &hw2.direct_sum_identity()));
        assert!(covariance_check(&gadc(0.5, 0.5).unwrap(), &hw2, &hw2));
        assert!(!covariance_check(&gadc(0.5, 0.2).unwrap(), &hw2, &hw2));
    }

    #[test]
    fn environment_unitaries_intertwine() {
        let hw = hw_group(2);
        let (ws, res) = environment_unitaries(&depolarizing(2, 0.6).unwrap(), &hw, &hw).unwrap();
        assert_eq!(ws.len(), 4);
        assert!(res <= 1e-8);
        // erasure needs a minimal Kraus set: rebuild through the Choi operator
        let er = channel_of(&choi_of(&erasure(2, 0.3).unwrap())).unwrap();
        let (_, res) = environment_unitaries(&er, &hw, &hw.direct_sum_identity()).unwrap();
        assert!(res <= 1e-8);
        let u = KrausChannel::unitary(&hw_operator(2, 1, 1)).unwrap();
        let (ws, _) = environment_unitaries(&KrausChannel::identity(2), &hw, &hw).unwrap();
        assert!(ws.iter().all(|w| w.nrows() == 1 && (w[(0, 0)].norm() - 1.0).abs() < 1e-12));
        let _ = u;
    }

    #[test]
    fn teleportation_reproduces_cnot() {
        let ch = cnot();
        let cov = Bicovariance::from_unitary_part(&ch, hw_group(2), hw_group(2)).unwrap();
        let mut rng = random::rng(11);
        let rho = random::full_rank_density(4, &mut rng);
        let sim = teleport_simulate(&ch, &cov, &rho, 1).unwrap();
        let direct = ch.channel.apply(&rho).unwrap();
        assert!(trace_distance(&sim, &direct) < 1e-10);
    }

    #[test]
    fn teleportation_with_reference_for_depolarizing() {
        let hw = hw_group(2);
        let dep = depolarizing(2, 0.35).unwrap();
        let ch = BipartiteChannel::new(dep, (2, 1), (2, 1)).unwrap();
        let cov = Bicovariance::point_to_point(hw.clone(), &hw);
        let mut rng = random::rng(2);
        let rho = random::density(4, 2, &mut rng);
        let sim = teleport_simulate(&ch, &cov, &rho, 2).unwrap();
        let direct = apply_with_reference(&ch, &rho, 2).unwrap();
        assert!(trace_distance(&sim, &direct) < 1e-10);
    }

    #[test]
    fn teleportation_rejects_non_design() {
        let ch = BipartiteChannel::new(depolarizing(2, 0.3).unwrap(), (2, 1), (2, 1)).unwrap();
        let half = GroupRep::new(vec![eye(2), hw_operator(2, 1, 0)], None).unwrap();
        let cov = Bicovariance::point_to_point(half.clone(), &half);
        assert!(teleport_simulate(&ch, &cov, &diag(&[1.0, 0.0]), 1).is_err());
    }

    #[test]
    fn post_selected_identity() {
        let mut rng = random::rng(8);
        let ch = KrausChannel::new(random::kraus_ops(2, 3, 2, &mut rng)).unwrap();
        let rho = random::full_rank_density(2, &mut rng);
        let out = choi_simulate(&choi_of(&ch), &rho);
        assert!(max_abs(&(out - ch.apply(&rho).unwrap())) < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let ch = gadc(0.3, 0.2).unwrap();
        let back = KrausChannel::from_json(&ch.to_json()).unwrap();
        assert_eq!(ch, back);
    }

    #[test]
    fn singleton_identity_cell_is_identity() {
        let cell = MemoryCell::new(vec![KrausChannel::identity(2)]).unwrap();
        let bi = bidirectional_from_cell(&cell).unwrap();
        assert_eq!(bi.in_dims, (1, 2));
        let j = choi_of(&bi.channel).matrix;
        assert!(max_abs(&(j - proj(&upsilon(2)))) < 1e-14);
    }

    #[test]
    fn erasure_wiretap_cell_gives_controlled_isometry() {
        let ext = erasure_wiretap_isometry(2, 0.3).unwrap();
        let cell = MemoryCell::new(vec![erasure(2, 0.3).unwrap(), erasure(2, 0.3).unwrap()])
            .unwrap()
            .with_wiretap(vec![ext.clone(), ext])
            .unwrap();
        let (v, e) = controlled_isometry(&cell);
        assert_eq!(e, 3);
        assert_eq!(v.shape(), (2 * 3 * 3, 4));
        assert!(unitarity_residual(&v) < 1e-14);
        // tracing E out of V·V† recovers the controlled channel
        let mut rng = random::rng(5);
        let rho = random::full_rank_density(4, &mut rng);
        // the isometry is coherent in X; the classical control sees only the diagonal blocks
        let mut rho = rho;
        for (a, b) in [(0, 1), (1, 0)] {
            rho.view_mut((2 * a, 2 * b), (2, 2)).fill(C64::new(0.0, 0.0));
        }
        let full = &v * &rho * v.adjoint();
        let xb = partial_trace(&full, &[2, 3, 3], &[0, 1]).unwrap();
        let direct = bidirectional_from_cell(&cell).unwrap().channel.apply(&rho).unwrap();
        assert!(max_abs(&(xb - direct)) < 1e-13);
    }

    #[test]
    fn wiretap_must_match_channel() {
        let cell = MemoryCell::new(vec![erasure(2, 0.3).unwrap()]).unwrap();
        let wrong = erasure_wiretap_isometry(2, 0.4).unwrap();
        assert!(cell.with_wiretap(vec![wrong]).is_err());
        assert!(MemoryCell::new(vec![KrausChannel::identity(2), KrausChannel::identity(3)]).is_err());
    }

    #[test]
    fn rotated_depolarizing_cell_is_covariant() {
        let hw = hw_group(2);
        let cell = MemoryCell::rotated(&depolarizing(2, 0.4).unwrap(), &hw).unwrap();
        let bi = bidirectional_from_cell(&cell).unwrap();
        let lifted = GroupRep::new(hw.unitaries.iter().map(|u| kron(&eye(4), u)).collect(), None).unwrap();
        assert!(covariance_check(&bi.channel, &lifted, &lifted));
        // but not under rotations of the control register
        let flip = GroupRep::new(vec![eye(8), kron(&hw_operator(4, 1, 0), &eye(2))], None).unwrap();
        assert!(!covariance_check(&bi.channel, &flip, &flip));
    }

    #[test]
    fn cell_json_round_trip() {
        let cell = MemoryCell::with_symbols(
            vec!["a".into(), "b".into()],
            vec![gadc(0.3, 0.2).unwrap(), gadc(0.5, 0.2).unwrap()],
        )
        .unwrap();
        let text = serde_json::to_string(&cell.to_json()).unwrap();
        let back = MemoryCell::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.symbols, cell.symbols);
        assert_eq!(back.channels, cell.channels);
    }

    #[test]
    fn isotropic_and_werner_states() {
        let iso = isotropic_state(3, 0.4).unwrap();
        assert!((iso.trace().re - 1.0).abs() < 1e-14);
        assert!((linalg::tr_prod_re(&iso, &max_entangled(3)) - 0.4).abs() < 1e-14);
        let w = werner_state(2, 1.0).unwrap();
        // p = 1 is the singlet
        let singlet = linalg::from_real(4, 1, &[0.0, 1.0, -1.0, 0.0]).unscale(2f64.sqrt());
        assert!(max_abs(&(w - proj(&singlet))) < 1e-14);
        let st = DensityOperator::new(iso, vec![3, 3]).unwrap();
        let back = DensityOperator::from_json(&st.to_json()).unwrap();
        assert!(max_abs(&(back.matrix - st.matrix)) < 1e-15);
    }
}
