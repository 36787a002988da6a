//! Primal–dual path-following for real symmetric block SDPs.
//!
//! primal: min ⟨C,X⟩ s.t. ⟨A_i,X⟩ = b_i, X ⪰ 0
//! dual:   max bᵀy  s.t. Z = C − Σ y_i A_i ⪰ 0
//!
//! HKM search direction, Mehrotra predictor–corrector, infeasible start.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::par;

pub type RMat = DMatrix<f64>;

#[derive(Debug, Clone, Copy)]
pub struct SpEntry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub val: f64,
}

/// Coefficients of one constraint, full symmetric pattern, sorted by block.
#[derive(Debug, Clone, Default)]
pub struct SpCons {
    pub entries: Vec<SpEntry>,
    /// (block, start, end) ranges into `entries`
    pub ranges: Vec<(usize, usize, usize)>,
}

impl SpCons {
    pub fn new(mut entries: Vec<SpEntry>) -> Self {
        entries.sort_by_key(|e| (e.block, e.row, e.col));
        let mut ranges = Vec::new();
        let mut i = 0;
        while i < entries.len() {
            let b = entries[i].block;
            let s = i;
            while i < entries.len() && entries[i].block == b {
                i += 1;
            }
            ranges.push((b, s, i));
        }
        SpCons { entries, ranges }
    }

    fn dot(&self, x: &[RMat]) -> f64 {
        self.entries.iter().map(|e| e.val * x[e.block][(e.row, e.col)]).sum()
    }

    fn norm2(&self) -> f64 {
        self.entries.iter().map(|e| e.val * e.val).sum()
    }

    fn scale(&mut self, s: f64) {
        for e in &mut self.entries {
            e.val *= s;
        }
    }
}

#[derive(Debug, Clone)]
pub struct RealSdp {
    pub blocks: Vec<usize>,
    pub c: Vec<RMat>,
    pub a: Vec<SpCons>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    NumericalLimit,
}

#[derive(Debug, Clone)]
pub struct RawSolution {
    pub status: RawStatus,
    pub x: Vec<RMat>,
    pub y: Vec<f64>,
    pub z: Vec<RMat>,
    pub pobj: f64,
    pub dobj: f64,
    pub pinf: f64,
    pub dinf: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct IpmOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub step_frac: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions { tol: 1e-8, max_iter: 200, step_frac: 0.98 }
    }
}

fn frob(ms: &[RMat]) -> f64 {
    ms.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

fn inner(a: &[RMat], b: &[RMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn sym(m: &RMat) -> RMat {
    (m + m.transpose()) * 0.5
}

fn a_op(p: &RealSdp, x: &[RMat]) -> DVector<f64> {
    DVector::from_iterator(p.a.len(), p.a.iter().map(|ai| ai.dot(x)))
}

fn at_op(p: &RealSdp, y: &[f64]) -> Vec<RMat> {
    let mut out: Vec<RMat> = p.blocks.iter().map(|&n| RMat::zeros(n, n)).collect();
    for (ai, &yi) in p.a.iter().zip(y) {
        if yi == 0.0 {
            continue;
        }
        for e in &ai.entries {
            out[e.block][(e.row, e.col)] += yi * e.val;
        }
    }
    out
}

/// Largest α with M + αD ⪰ 0 given Cholesky factor of M; ∞ if unbounded.
fn max_step(chol: &Cholesky<f64, nalgebra::Dyn>, d: &RMat) -> f64 {
    let l = chol.l();
    let Some(w1) = l.solve_lower_triangular(d) else { return 0.0 };
    let Some(w) = l.solve_lower_triangular(&w1.transpose()) else { return 0.0 };
    let w = sym(&w);
    let lmin = w.symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn step_len(chols: &[Cholesky<f64, nalgebra::Dyn>], d: &[RMat]) -> f64 {
    chols.iter().zip(d).map(|(c, di)| max_step(c, di)).fold(f64::INFINITY, f64::min)
}

fn chol_all(ms: &[RMat]) -> Option<Vec<Cholesky<f64, nalgebra::Dyn>>> {
    ms.iter().map(|m| Cholesky::new(sym(m))).collect()
}

/// Schur complement M_ij = ⟨A_i, X A_j Z⁻¹⟩, lower triangle computed and mirrored.
fn schur(p: &RealSdp, x: &[RMat], zinv: &[RMat]) -> RMat {
    let m = p.a.len();
    let cols: Vec<Vec<(usize, f64)>> = par::map_range(m, |j| {
        let aj = &p.a[j];
        // G_j = X A_j Z⁻¹ on the blocks A_j touches
        let mut g: Vec<Option<RMat>> = vec![None; p.blocks.len()];
        for &(b, s, e) in &aj.ranges {
            let n = p.blocks[b];
            let mut gb = RMat::zeros(n, n);
            for en in &aj.entries[s..e] {
                // gb += v · X[:, r] Z⁻¹[c, :]
                let xc = x[b].column(en.row);
                let zr = zinv[b].row(en.col);
                gb.ger(en.val, &xc, &zr.transpose(), 1.0);
            }
            g[b] = Some(gb);
        }
        let mut col = Vec::new();
        for i in j..m {
            let ai = &p.a[i];
            let mut s = 0.0;
            for &(b, st, en) in &ai.ranges {
                if let Some(gb) = &g[b] {
                    for e in &ai.entries[st..en] {
                        s += e.val * gb[(e.row, e.col)];
                    }
                }
            }
            if s != 0.0 {
                col.push((i, s));
            }
        }
        col
    });
    let mut out = RMat::zeros(m, m);
    for (j, col) in cols.into_iter().enumerate() {
        for (i, v) in col {
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Cholesky of the Schur complement, regularized if needed; solves are
/// refined against the unregularized matrix.
struct Schur {
    m: RMat,
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl Schur {
    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut x = self.chol.solve(rhs);
        let scale = rhs.amax().max(1e-300);
        for _ in 0..4 {
            let r = rhs - &self.m * &x;
            if r.amax() <= 1e-15 * scale {
                break;
            }
            x += self.chol.solve(&r);
        }
        x
    }
}

fn factor_schur(m: RMat) -> Option<Schur> {
    let n = m.nrows();
    let dmax = (0..n).map(|i| m[(i, i)].abs()).fold(0.0f64, f64::max).max(1e-300);
    if let Some(chol) = Cholesky::new(m.clone()) {
        return Some(Schur { m, chol });
    }
    let mut reg = 1e-14 * dmax;
    let mut mr = m.clone();
    for _ in 0..8 {
        for i in 0..n {
            mr[(i, i)] = m[(i, i)] + reg;
        }
        if let Some(chol) = Cholesky::new(mr.clone()) {
            return Some(Schur { m, chol });
        }
        reg *= 100.0;
    }
    None
}

struct Direction {
    dx: Vec<RMat>,
    dy: DVector<f64>,
    dz: Vec<RMat>,
}

fn direction(
    p: &RealSdp,
    x: &[RMat],
    zinv: &[RMat],
    mchol: &Schur,
    rp: &DVector<f64>,
    rd: &[RMat],
    rc: &[RMat],
) -> Direction {
    // M Δy = rp − A(Rc) + A(X Rd Z⁻¹)
    let xrdz: Vec<RMat> = x.iter().zip(rd).zip(zinv).map(|((xb, rb), zb)| xb * rb * zb).collect();
    let rhs = rp - a_op(p, rc) + a_op(p, &xrdz);
    let dy = mchol.solve(&rhs);
    let aty = at_op(p, dy.as_slice());
    let dz: Vec<RMat> = rd.iter().zip(&aty).map(|(r, a)| r - a).collect();
    let dx: Vec<RMat> = rc
        .iter()
        .zip(x)
        .zip(&dz)
        .zip(zinv)
        .map(|(((rcb, xb), dzb), zb)| sym(&(rcb - xb * dzb * zb)))
        .collect();
    Direction { dx, dy, dz }
}

pub fn solve_real(p: &RealSdp, opts: &IpmOptions) -> RawSolution {
    let m = p.a.len();
    let ntot: usize = p.blocks.iter().sum();

    // normalize rows and scale data
    let mut q = p.clone();
    let row_scale: Vec<f64> = q.a.iter().map(|a| a.norm2().sqrt().max(1e-300)).collect();
    for (i, a) in q.a.iter_mut().enumerate() {
        a.scale(1.0 / row_scale[i]);
        q.b[i] /= row_scale[i];
    }
    let bnorm = q.b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cnorm = frob(&q.c);
    let sb = bnorm.max(1.0);
    let sc = cnorm.max(1.0);
    for v in &mut q.b {
        *v /= sb;
    }
    for cb in &mut q.c {
        *cb /= sc;
    }
    let unscale_obj = sb * sc;

    let nf = ntot as f64;
    let xi = (10.0f64).max(nf.sqrt()).max(nf * (1.0 + bnorm / sb));
    let eta = (10.0f64).max(nf.sqrt()).max((1.0 + 1.0f64.max(cnorm / sc)) / nf.sqrt());
    let mut x: Vec<RMat> = q.blocks.iter().map(|&n| RMat::identity(n, n) * xi).collect();
    let mut z: Vec<RMat> = q.blocks.iter().map(|&n| RMat::identity(n, n) * eta).collect();
    let mut y = DVector::<f64>::zeros(m);

    let bvec = DVector::from_vec(q.b.clone());
    let bn1 = 1.0 + bnorm / sb;
    let cn1 = 1.0 + cnorm / sc;

    let mut status = RawStatus::NumericalLimit;
    let mut iter = 0;
    let mut last = (0.0, 0.0, f64::INFINITY, f64::INFINITY);
    let mut stalls = 0;
    while iter < opts.max_iter {
        let ax = a_op(&q, &x);
        let rp = &bvec - &ax;
        let aty = at_op(&q, y.as_slice());
        let rd: Vec<RMat> = q.c.iter().zip(&z).zip(&aty).map(|((c, zb), a)| c - zb - a).collect();
        let pobj = inner(&q.c, &x);
        let dobj = bvec.dot(&y);
        let pinf = rp.norm() / bn1;
        let dinf = frob(&rd) / cn1;
        last = (pobj, dobj, pinf, dinf);
        let (po, dob) = (pobj * unscale_obj, dobj * unscale_obj);
        if (po - dob).abs() <= opts.tol * po.abs().max(1.0) && pinf <= opts.tol && dinf <= opts.tol {
            status = RawStatus::Optimal;
            break;
        }
        // improving rays: scaled data has ‖C‖, ‖b‖ ≤ 1, so huge objectives mean divergence
        if dobj > 1e8 && pinf > opts.tol {
            status = RawStatus::PrimalInfeasible;
            break;
        }
        if pobj < -1e8 && dinf > opts.tol {
            status = RawStatus::DualInfeasible;
            break;
        }
        if !(pobj.is_finite() && dobj.is_finite()) {
            break;
        }

        let Some(zch) = chol_all(&z) else { break };
        let Some(xch) = chol_all(&x) else { break };
        let zinv: Vec<RMat> = zch.iter().map(|c| sym(&c.inverse())).collect();
        let mu = inner(&x, &z) / nf;

        let Some(mchol) = factor_schur(schur(&q, &x, &zinv)) else { break };

        // predictor
        let rc_aff: Vec<RMat> = x.iter().map(|xb| -xb).collect();
        let pred = direction(&q, &x, &zinv, &mchol, &rp, &rd, &rc_aff);
        let ap = (opts.step_frac * step_len(&xch, &pred.dx)).min(1.0);
        let ad = (opts.step_frac * step_len(&zch, &pred.dz)).min(1.0);
        let xa: Vec<RMat> = x.iter().zip(&pred.dx).map(|(a, d)| a + d * ap).collect();
        let za: Vec<RMat> = z.iter().zip(&pred.dz).map(|(a, d)| a + d * ad).collect();
        let mu_aff = inner(&xa, &za) / nf;
        let sigma = (mu_aff / mu).max(0.0).powi(3).min(1.0);

        // corrector
        let rc: Vec<RMat> = x
            .iter()
            .zip(&zinv)
            .zip(pred.dx.iter().zip(&pred.dz))
            .map(|((xb, zb), (dxb, dzb))| zb * (sigma * mu) - xb - dxb * dzb * zb)
            .collect();
        let dir = direction(&q, &x, &zinv, &mchol, &rp, &rd, &rc);
        let ap = (opts.step_frac * step_len(&xch, &dir.dx)).min(1.0);
        let ad = (opts.step_frac * step_len(&zch, &dir.dz)).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            stalls += 1;
            if stalls > 3 {
                break;
            }
        }
        for (xb, d) in x.iter_mut().zip(&dir.dx) {
            *xb += d * ap;
            *xb = sym(xb);
        }
        for (zb, d) in z.iter_mut().zip(&dir.dz) {
            *zb += d * ad;
            *zb = sym(zb);
        }
        y += &dir.dy * ad;
        iter += 1;
    }

    // undo scaling
    let x: Vec<RMat> = x.into_iter().map(|xb| xb * sb).collect();
    let z: Vec<RMat> = z.into_iter().map(|zb| zb * sc).collect();
    let y: Vec<f64> = y.iter().enumerate().map(|(i, &v)| v * sc / row_scale[i]).collect();
    RawSolution {
        status,
        x,
        y,
        z,
        pobj: last.0 * unscale_obj,
        dobj: last.1 * unscale_obj,
        pinf: last.2,
        dinf: last.3,
        iterations: iter,
    }
}

/// Rows of the Gram matrix ⟨A_i, A_j⟩ that are numerically dependent on
/// earlier rows (pivoted Cholesky, relative tolerance).
pub fn dependent_rows(a: &[SpCons], blocks: &[usize], rel_tol: f64) -> Vec<usize> {
    let m = a.len();
    if m == 0 {
        return vec![];
    }
    // cheap exit: every row owns a coefficient position no other row touches
    let mut count = std::collections::HashMap::new();
    for ai in a {
        for e in &ai.entries {
            *count.entry((e.block, e.row, e.col)).or_insert(0usize) += 1;
        }
    }
    if a.iter().all(|ai| ai.entries.iter().any(|e| count[&(e.block, e.row, e.col)] == 1)) {
        return vec![];
    }
    let dense: Vec<Vec<((usize, usize, usize), f64)>> = a
        .iter()
        .map(|ai| ai.entries.iter().map(|e| ((e.block, e.row, e.col), e.val)).collect())
        .collect();
    let _ = blocks;
    let dot = |i: usize, j: usize| -> f64 {
        let (u, v) = (&dense[i], &dense[j]);
        let (mut p, mut q, mut s) = (0, 0, 0.0);
        while p < u.len() && q < v.len() {
            match u[p].0.cmp(&v[q].0) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    s += u[p].1 * v[q].1;
                    p += 1;
                    q += 1;
                }
            }
        }
        s
    };
    let g = RMat::from_fn(m, m, |i, j| dot(i, j));
    // left-looking Cholesky in natural order; rows with tiny pivots are dependent
    let mut l = RMat::zeros(m, m);
    let mut dep = Vec::new();
    let gmax = (0..m).map(|i| g[(i, i)]).fold(0.0f64, f64::max);
    let mut kept: Vec<usize> = Vec::new();
    for i in 0..m {
        let mut d = g[(i, i)];
        for &k in &kept {
            d -= l[(i, k)] * l[(i, k)];
        }
        if d <= rel_tol * gmax {
            dep.push(i);
            continue;
        }
        let piv = d.sqrt();
        l[(i, i)] = piv;
        for r in (i + 1)..m {
            let mut s = g[(r, i)];
            for &k in &kept {
                s -= l[(r, k)] * l[(i, k)];
            }
            l[(r, i)] = s / piv;
        }
        kept.push(i);
    }
    dep
}
