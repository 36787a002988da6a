//! Max-Rains SDPs, PPT-relaxed max-relative entropy of entanglement,
//! Frank–Wolfe Rains quantities, private states and converse arithmetic.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::infomeasures::{binary_entropy, relative_entropy, trace_distance, Base};
use crate::linalg::{
    self, eigh, eye, frechet, hermitian_part, kron, lambda_min, max_entangled, partial_transpose, powm_support,
    proj, trace_norm, CMat, C64, SUPPORT_CUT,
};
use crate::qcore::{BipartiteChannel, KrausChannel};
use crate::sdp::model::{Affine, Lmi, LmiSolution};
use crate::sdp::SdpStatus;

/// Default SDP tolerance for the programs in this module.
pub const SDP_TOL: f64 = 1e-9;

pub(crate) fn need_optimal(sol: &LmiSolution, what: &str) -> Result<()> {
    if sol.status != SdpStatus::Optimal {
        return Err(Error::Sdp(format!("{what}: solver ended with {:?}", sol.status)));
    }
    Ok(())
}

fn check_bipartite(rho: &CMat, dims: [usize; 2]) -> Result<()> {
    if !rho.is_square() || rho.nrows() != dims[0] * dims[1] {
        return Err(Error::Shape(format!("{}x{} state for dims {dims:?}", rho.nrows(), rho.ncols())));
    }
    Ok(())
}

// ---- max-Rains ----------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct RmaxState {
    /// log₂ W, bits
    pub value: f64,
    pub w: f64,
    /// max Tr ρQ side
    pub primal: f64,
    /// min Tr(C+D) side
    pub dual: f64,
    #[serde(skip)]
    pub c: CMat,
    #[serde(skip)]
    pub d: CMat,
    /// Largest violation among C ⪰ 0, D ⪰ 0, T_B(C−D) ⪰ ρ.
    pub witness_residual: f64,
}

/// R_max(A;B)_ρ = log₂ W with W = min{Tr(C+D) : C, D ⪰ 0, T_B(C−D) ⪰ ρ},
/// solved through max{Tr ρQ : Q ⪰ 0, −1 ⪯ T_B Q ⪯ 1}; C and D are the
/// multipliers of the two bounding blocks.
pub fn rmax_state(rho: &CMat, dims: [usize; 2], tol: f64) -> Result<RmaxState> {
    check_bipartite(rho, dims)?;
    let n = rho.nrows();
    let mut lmi = Lmi::new();
    let q = lmi.herm(n).affine();
    let tq = q.ptranspose(&dims, &[1]);
    lmi.psd(q.clone());
    lmi.psd(Affine::identity(n).sub(&tq));
    lmi.psd(Affine::identity(n).add(&tq));
    lmi.maximize(q.inner(rho));
    let sol = lmi.solve(tol)?;
    need_optimal(&sol, "max-Rains state SDP")?;
    let c = hermitian_part(&sol.multipliers[1]);
    let d = hermitian_part(&sol.multipliers[2]);
    let slack = partial_transpose(&(&c - &d), &dims, &[1])? - rho;
    let res = [lambda_min(&c), lambda_min(&d), lambda_min(&hermitian_part(&slack))]
        .iter()
        .fold(0.0f64, |m, &v| m.max(-v));
    let dual = (c.trace() + d.trace()).re;
    let w = sol.value;
    Ok(RmaxState { value: w.log2(), w, primal: sol.value, dual, c, d, witness_residual: res })
}

#[derive(Debug, Clone, Serialize)]
pub struct RmaxChannel {
    /// log₂ Γ
    pub value: f64,
    pub gamma: f64,
    pub gap: f64,
    #[serde(skip)]
    pub v: CMat,
    #[serde(skip)]
    pub y: CMat,
}

/// R_max(M) = log₂ Γ via max{Tr JX : X ⪰ 0, ρ density, −ρ⊗1 ⪯ T_B X ⪯ ρ⊗1};
/// V and Y are the multipliers of the two sandwich blocks.
pub fn rmax_channel(ch: &KrausChannel, tol: f64) -> Result<RmaxChannel> {
    let (din, dout) = (ch.in_dim, ch.out_dim);
    let j = ch.choi().matrix;
    let dims = [din, dout];
    let mut lmi = Lmi::new();
    let x = lmi.herm(din * dout).affine();
    let rho = lmi.density(din);
    let r1 = rho.tensor_identity(&dims, &[0]);
    let tx = x.ptranspose(&dims, &[1]);
    lmi.psd(x.clone());
    lmi.psd(rho);
    lmi.psd(r1.sub(&tx));
    lmi.psd(r1.add(&tx));
    lmi.maximize(x.inner(&j));
    let sol = lmi.solve(tol)?;
    need_optimal(&sol, "max-Rains channel SDP")?;
    Ok(RmaxChannel {
        value: sol.value.log2(),
        gamma: sol.value,
        gap: sol.gap(),
        v: hermitian_part(&sol.multipliers[2]),
        y: hermitian_part(&sol.multipliers[3]),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RmaxBidirectional {
    /// log₂ of the dual (minimization) value
    pub value: f64,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Bidirectional max-Rains information. The primal (max over X and a
/// density ρ_{L_A L_B}) and the dual (min ‖Tr_AB(V+Y)‖_∞) are posed as two
/// separate programs; Choi systems are ordered L_A A B L_B.
pub fn rmax_bidirectional(ch: &BipartiteChannel, tol: f64) -> Result<RmaxBidirectional> {
    let dims = ch.choi_dims();
    let n: usize = dims.iter().product();
    if n > 256 {
        return Err(Error::Domain(format!("total dimension {n} exceeds 256")));
    }
    let j = ch.choi_lab();
    let tsys = [2usize, 3];
    let (dla, dlb) = (dims[0], dims[3]);

    // primal
    let mut lmi = Lmi::new();
    let x = lmi.herm(n).affine();
    let rho = lmi.density(dla * dlb);
    let r1 = rho.tensor_identity(&dims, &[0, 3]);
    let tx = x.ptranspose(&dims, &tsys);
    lmi.psd(x.clone());
    lmi.psd(rho);
    lmi.psd(r1.sub(&tx));
    lmi.psd(r1.add(&tx));
    lmi.maximize(x.inner(&j));
    let p = lmi.solve(tol)?;
    need_optimal(&p, "bidirectional max-Rains primal")?;

    // dual
    let mut lmi = Lmi::new();
    let t = lmi.scalar();
    let v = lmi.herm(n).affine();
    let y = lmi.herm(n).affine();
    lmi.psd(v.clone());
    lmi.psd(y.clone());
    lmi.psd(v.sub(&y).ptranspose(&dims, &tsys).sub(&Affine::constant(&j)));
    let tr = v.add(&y).ptrace(&dims, &[0, 3]);
    lmi.psd(Affine::scalar_identity(t, dla * dlb).sub(&tr));
    lmi.minimize(crate::sdp::model::Linear::var(t));
    let d = lmi.solve(tol)?;
    need_optimal(&d, "bidirectional max-Rains dual")?;

    Ok(RmaxBidirectional { value: d.value.log2(), primal: p.value, dual: d.value, gap: (p.value - d.value).abs() })
}

/// E_max over the PPT relaxation: log₂ min{Tr σ : σ ⪰ ρ, σ ⪰ 0, T_B σ ⪰ 0}.
/// A lower bound on the separable-set quantity.
pub fn emax_ppt(rho: &CMat, dims: [usize; 2], tol: f64) -> Result<f64> {
    check_bipartite(rho, dims)?;
    let n = rho.nrows();
    let mut lmi = Lmi::new();
    let s = lmi.herm(n).affine();
    lmi.psd(s.sub(&Affine::constant(rho)));
    lmi.psd(s.clone());
    lmi.psd(s.ptranspose(&dims, &[1]));
    lmi.minimize(s.trace());
    let sol = lmi.solve(tol)?;
    need_optimal(&sol, "E_max PPT SDP")?;
    Ok(sol.value.log2())
}

/// PPT-relaxed E_max of N(ψ_{L_A A′} ⊗ φ_{B′ L_B}) across L_A A : B L_B for
/// fixed pure inputs; not optimized over inputs.
pub fn emax_ppt_on_inputs(ch: &BipartiteChannel, psi_a: &CMat, phi_b: &CMat, tol: f64) -> Result<f64> {
    let (da1, db1) = ch.in_dims;
    let (da, db) = ch.out_dims;
    let dla = psi_a.nrows() / da1;
    let dlb = phi_b.nrows() / db1;
    if dla * da1 != psi_a.nrows() || dlb * db1 != phi_b.nrows() {
        return Err(Error::Shape("input kets do not factor through the channel inputs".into()));
    }
    let rho = kron(&proj(psi_a), &proj(phi_b));
    let out = ch.channel.apply_on(&rho, &[dla, da1 * db1, dlb], 1)?;
    emax_ppt(&out, [dla * da, db * dlb], tol)
}

// ---- PPT′ and Frank–Wolfe --------------------------------------------------------

/// ‖T_B σ‖₁
pub fn ppt_prime_norm(sigma: &CMat, dims: [usize; 2]) -> Result<f64> {
    Ok(trace_norm(&partial_transpose(sigma, &dims, &[1])?))
}

fn ppt_prime_lmi(dims: [usize; 2]) -> (Lmi, Affine) {
    let n = dims[0] * dims[1];
    let mut lmi = Lmi::new();
    let s = lmi.herm(n).affine();
    let p = lmi.herm(n).affine();
    let tb = s.ptranspose(&dims, &[1]);
    lmi.psd(s.clone());
    lmi.psd(p.clone());
    lmi.psd(p.sub(&tb));
    let budget = p.trace().scale(2.0).add(&tb.trace().scale(-1.0));
    lmi.psd(Affine::identity(1).sub(&Affine::from_linear(&budget)));
    (lmi, s)
}

/// argmin over PPT′ of Tr Gσ, with a bound on the suboptimality of the
/// returned point. Degenerate faces can stall the interior-point method just
/// short of its tolerance; such points are still feasible and are accepted
/// with their certified gap.
pub fn ppt_prime_lmo(g: &CMat, dims: [usize; 2], tol: f64) -> Result<(CMat, f64)> {
    let g = hermitian_part(g);
    let gn = linalg::schatten_norm(&g, linalg::Schatten::Inf);
    if gn == 0.0 {
        return Ok((eye(g.nrows()).unscale(g.nrows() as f64), 0.0));
    }
    let (mut lmi, s) = ppt_prime_lmi(dims);
    lmi.minimize(s.inner(&g.unscale(gn)));
    let sol = lmi.solve(tol)?;
    let scale = sol.value.abs().max(1.0);
    let usable = sol.status == SdpStatus::Optimal
        || (sol.status == SdpStatus::NumericalLimit && sol.raw.dual_residual <= 1e-9 && sol.gap() <= 1e-6 * scale);
    if !usable {
        return Err(Error::Sdp(format!("PPT′ linear minimization: solver ended with {:?}", sol.status)));
    }
    let raw = hermitian_part(&sol.eval(&s));
    // snap onto PPT′ exactly
    let e = linalg::eigh_sym(&raw);
    let clipped = e.rebuild(&e.values.iter().map(|&v| v.max(0.0)).collect::<Vec<_>>());
    let norm = ppt_prime_norm(&clipped, dims)?;
    let point = if norm > 1.0 { clipped.unscale(norm) } else { clipped };
    let moved = linalg::trace_norm(&(&point - &raw)) * gn;
    Ok((point, sol.gap() * gn + moved))
}

/// max Tr{Tσ} over PPT′.
pub fn max_overlap_ppt_prime(target: &CMat, dims: [usize; 2], tol: f64) -> Result<f64> {
    let (mut lmi, s) = ppt_prime_lmi(dims);
    lmi.maximize(s.inner(target));
    let sol = lmi.solve(tol)?;
    need_optimal(&sol, "PPT′ overlap")?;
    Ok(sol.value)
}

#[derive(Debug, Clone, Copy)]
pub struct FwOptions {
    /// Stop once the duality-gap estimate (bits) is below this.
    pub gap_tol: f64,
    pub max_iter: usize,
    pub lmo_tol: f64,
}

impl Default for FwOptions {
    fn default() -> Self {
        FwOptions { gap_tol: 1e-5, max_iter: 500, lmo_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FwResult {
    /// Objective at the final iterate, bits. An upper bound on the minimum.
    pub value: f64,
    /// Certified gap estimate in bits.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub sigma: CMat,
}

/// Smooth convex objective on PPT′.
trait Objective {
    /// +inf outside the domain.
    fn value(&self, s: &CMat) -> f64;
    fn grad(&self, s: &CMat) -> CMat;
    /// Convert an objective value (or lower bound) to bits; monotone.
    fn bits(&self, value: f64) -> f64;
}

struct RelEnt<'a> {
    rho: &'a CMat,
}

impl Objective for RelEnt<'_> {
    fn value(&self, s: &CMat) -> f64 {
        relative_entropy(self.rho, s, Base::Nats).map(|d| d.value()).unwrap_or(f64::INFINITY)
    }

    fn grad(&self, s: &CMat) -> CMat {
        let e = linalg::eigh_sym(&hermitian_part(s));
        -frechet(&e, f64::ln, |x| 1.0 / x, self.rho)
    }

    fn bits(&self, v: f64) -> f64 {
        v / std::f64::consts::LN_2
    }
}

/// Q̃_α(ρ‖σ) for α > 1; minimizing it minimizes D̃_α.
struct SandwichedQ<'a> {
    rho: &'a CMat,
    alpha: f64,
}

impl SandwichedQ<'_> {
    fn beta(&self) -> f64 {
        (1.0 - self.alpha) / (2.0 * self.alpha)
    }
}

impl Objective for SandwichedQ<'_> {
    fn value(&self, s: &CMat) -> f64 {
        let e = linalg::eigh_sym(&hermitian_part(s));
        let cut = e.cut(SUPPORT_CUT);
        let outside = e.values.iter().zip(0..).filter(|(&l, _)| l <= cut).map(|(_, i)| {
            let v = e.vectors.column(i);
            (v.adjoint() * self.rho * v)[(0, 0)].re
        });
        if outside.sum::<f64>() > SUPPORT_CUT {
            return f64::INFINITY;
        }
        crate::infomeasures::sandwiched_quasi(self.rho, s, self.alpha).unwrap_or(f64::INFINITY)
    }

    fn grad(&self, s: &CMat) -> CMat {
        let b = self.beta();
        let e = linalg::eigh_sym(&hermitian_part(s));
        let sb = powm_support(s, b);
        let m = &sb * self.rho * &sb;
        let mp = powm_support(&hermitian_part(&m), self.alpha - 1.0);
        let x = &mp * &sb * self.rho;
        let x = &x + x.adjoint();
        frechet(&e, |l| l.powf(b), |l| b * l.powf(b - 1.0), &x) * C64::new(self.alpha, 0.0)
    }

    fn bits(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return f64::NEG_INFINITY;
        }
        v.log2() / (self.alpha - 1.0)
    }
}

/// ∇_σ Q̃_α(ρ‖σ) for full-rank σ.
pub(crate) fn sandwiched_q_gradient(rho: &CMat, sigma: &CMat, alpha: f64) -> CMat {
    SandwichedQ { rho, alpha }.grad(sigma)
}

fn directional(obj: &dyn Objective, s: &CMat, d: &CMat) -> f64 {
    if !obj.value(s).is_finite() {
        return f64::INFINITY;
    }
    linalg::tr_prod_re(&obj.grad(s), d)
}

/// Exact line search of a convex φ(γ) = f(σ + γd) on [0, γmax]: Illinois
/// regula falsi on the directional derivative, bisecting whenever the
/// derivative is undefined.
fn line_search(obj: &dyn Objective, s: &CMat, d: &CMat, gmax: f64) -> f64 {
    let at = |g: f64| directional(obj, &(s + d * C64::new(g, 0.0)), d);
    let d0 = at(0.0);
    if !(d0 < 0.0) {
        return 0.0;
    }
    let dh = at(gmax);
    if dh <= 0.0 {
        return gmax;
    }
    let (mut lo, mut hi, mut flo, mut fhi) = (0.0, gmax, d0, dh);
    let mut side = 0i8;
    for _ in 0..60 {
        let mid = if fhi.is_finite() { (lo * fhi - hi * flo) / (fhi - flo) } else { 0.5 * (lo + hi) };
        let mid = mid.clamp(lo + 1e-3 * (hi - lo), hi - 1e-3 * (hi - lo));
        let fm = at(mid);
        if fm > 0.0 {
            hi = mid;
            fhi = fm;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        } else {
            lo = mid;
            flo = fm;
            if side == -1 && fhi.is_finite() {
                fhi *= 0.5;
            }
            side = -1;
        }
        if hi - lo <= 1e-12 * gmax || fm.abs() <= 1e-15 {
            break;
        }
    }
    lo
}

enum Target {
    Existing(usize),
    New(CMat),
}

struct ActiveSet {
    atoms: Vec<(CMat, f64)>,
}

impl ActiveSet {
    fn point(&self) -> CMat {
        let n = self.atoms[0].0.nrows();
        let tot: f64 = self.atoms.iter().map(|a| a.1).sum();
        let mut m = CMat::zeros(n, n);
        for (a, w) in &self.atoms {
            m += a * C64::new(w / tot, 0.0);
        }
        m
    }

    fn scores(&self, g: &CMat) -> Vec<f64> {
        self.atoms.iter().map(|(a, _)| linalg::tr_prod_re(g, a)).collect()
    }

    fn away(&self, scores: &[f64]) -> usize {
        (0..scores.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b })
    }

    /// Move weight `step` from atom `from` to `to` (index or new atom).
    fn shift(&mut self, from: usize, to: Target, step: f64) {
        self.atoms[from].1 -= step;
        match to {
            Target::Existing(i) => self.atoms[i].1 += step,
            Target::New(s) => match self.atoms.iter_mut().find(|(a, _)| linalg::max_abs(&(a - &s)) < 1e-10) {
                Some(a) => a.1 += step,
                None => self.atoms.push((s, step)),
            },
        }
        self.atoms.retain(|(_, w)| *w > 1e-15);
    }

    /// Pairwise steps restricted to the current atoms.
    fn correct(&mut self, obj: &dyn Objective, rounds: usize, tol: f64) {
        for _ in 0..rounds {
            if self.atoms.len() < 2 {
                return;
            }
            let sigma = self.point();
            let g = obj.grad(&sigma);
            let sc = self.scores(&g);
            let best = (0..sc.len()).fold(0, |b, i| if sc[i] < sc[b] { i } else { b });
            let worst = self.away(&sc);
            if sc[worst] - sc[best] <= tol {
                return;
            }
            let dir = &self.atoms[best].0 - &self.atoms[worst].0;
            let step = line_search(obj, &sigma, &dir, self.atoms[worst].1);
            if step <= 0.0 {
                return;
            }
            self.shift(worst, Target::Existing(best), step);
        }
    }
}

/// Pairwise Frank–Wolfe over PPT′; after each new vertex the weights on the
/// active set are re-optimized by further pairwise steps.
fn frank_wolfe(obj: &dyn Objective, dims: [usize; 2], start: CMat, opts: FwOptions) -> Result<FwResult> {
    let mut set = ActiveSet { atoms: vec![(start, 1.0)] };
    let mut sigma = set.point();
    let mut value = obj.value(&sigma);
    if !value.is_finite() {
        return Err(Error::Domain("starting point outside the objective domain".into()));
    }
    let mut gap = f64::INFINITY;
    // convexity: f* ≥ f(σ_k) − ⟨∇f(σ_k), σ_k − s_k⟩ at every iterate
    let mut lower = f64::NEG_INFINITY;
    for it in 0..opts.max_iter {
        let g = obj.grad(&sigma);
        let (s, lmo_err) = match ppt_prime_lmo(&g, dims, opts.lmo_tol) {
            Ok(v) => v,
            // `lower` certified by earlier iterates still brackets the minimum
            Err(Error::Sdp(_)) if it > 0 => {
                return Ok(FwResult { value: obj.bits(value), gap, iterations: it, converged: false, sigma });
            }
            Err(e) => return Err(e),
        };
        let lin = linalg::tr_prod_re(&g, &(&sigma - &s)).max(0.0);
        lower = lower.max(value - lin - lmo_err);
        gap = (obj.bits(value) - obj.bits(lower)).max(0.0);
        if gap <= opts.gap_tol {
            return Ok(FwResult { value: obj.bits(value), gap, iterations: it, converged: true, sigma });
        }
        let sc = set.scores(&g);
        let ai = set.away(&sc);
        let dir = &s - &set.atoms[ai].0;
        let step = line_search(obj, &sigma, &dir, set.atoms[ai].1);
        if step > 0.0 {
            set.shift(ai, Target::New(s), step);
        } else {
            let dir = &s - &sigma;
            let step = line_search(obj, &sigma, &dir, 1.0);
            for a in set.atoms.iter_mut() {
                a.1 *= 1.0 - step;
            }
            set.atoms.push((s, step));
            set.atoms.retain(|(_, w)| *w > 1e-15);
        }
        set.correct(obj, 50, 0.01 * lin);
        sigma = set.point();
        let nv = obj.value(&sigma);
        if !nv.is_finite() {
            return Err(Error::NoConvergence("iterate left the objective domain".into()));
        }
        value = nv;
    }
    Ok(FwResult { value: obj.bits(value), gap, iterations: opts.max_iter, converged: false, sigma })
}

fn ppt_shortcut(rho: &CMat, dims: [usize; 2]) -> Result<Option<FwResult>> {
    if ppt_prime_norm(rho, dims)? <= 1.0 + 1e-12 {
        return Ok(Some(FwResult { value: 0.0, gap: 0.0, iterations: 0, converged: true, sigma: rho.clone() }));
    }
    Ok(None)
}

/// min over PPT′ of D(ρ‖σ), bits. The returned value is attained by the
/// returned σ and exceeds the minimum by at most `gap`.
pub fn rains_relative_entropy(rho: &CMat, dims: [usize; 2], opts: FwOptions) -> Result<FwResult> {
    check_bipartite(rho, dims)?;
    if let Some(r) = ppt_shortcut(rho, dims)? {
        return Ok(r);
    }
    let n = rho.nrows();
    frank_wolfe(&RelEnt { rho }, dims, eye(n).unscale(n as f64), opts)
}

/// min over PPT′ of D̃_α(ρ‖σ), α > 1, bits.
pub fn sandwiched_rains(rho: &CMat, dims: [usize; 2], alpha: f64, opts: FwOptions) -> Result<FwResult> {
    check_bipartite(rho, dims)?;
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha={alpha} must exceed 1")));
    }
    if let Some(r) = ppt_shortcut(rho, dims)? {
        return Ok(r);
    }
    let n = rho.nrows();
    frank_wolfe(&SandwichedQ { rho, alpha }, dims, eye(n).unscale(n as f64), opts)
}

// ---- amortization ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct AmortizationReport {
    pub output_rains: f64,
    pub input_rains: f64,
    pub channel_rains: f64,
    /// input + channel − output
    pub slack: f64,
    pub holds: bool,
}

/// R_max(L_A A; B L_B)_{N(ρ)} ≤ R_max(L_A A′; B′ L_B)_ρ + R_max^{2→2}(N) for
/// ρ on L_A A′ B′ L_B.
pub fn amortization_spotcheck(ch: &BipartiteChannel, rho: &CMat, dla: usize, dlb: usize) -> Result<AmortizationReport> {
    let (da1, db1) = ch.in_dims;
    let (da, db) = ch.out_dims;
    if rho.nrows() != dla * da1 * db1 * dlb {
        return Err(Error::Shape("state does not match L_A A′ B′ L_B".into()));
    }
    let out = ch.channel.apply_on(rho, &[dla, da1 * db1, dlb], 1)?;
    let output = rmax_state(&out, [dla * da, db * dlb], SDP_TOL)?.value;
    let input = rmax_state(rho, [dla * da1, db1 * dlb], SDP_TOL)?.value;
    let chan = rmax_bidirectional(ch, SDP_TOL)?.value;
    let slack = input + chan - output;
    Ok(AmortizationReport { output_rains: output, input_rains: input, channel_rains: chan, slack, holds: slack >= -1e-6 })
}

// ---- private states --------------------------------------------------------------------

/// Key dimension K, shield dims and the twisting unitaries U^{ij} on the
/// shield, indexed i·K + j.
#[derive(Debug, Clone)]
pub struct PrivacySpec {
    pub k: usize,
    pub shield_dims: (usize, usize),
    pub twists: Vec<CMat>,
}

impl PrivacySpec {
    pub fn untwisted(k: usize, shield_dims: (usize, usize)) -> Self {
        let n = shield_dims.0 * shield_dims.1;
        PrivacySpec { k, shield_dims, twists: vec![eye(n); k * k] }
    }

    fn twisting(&self) -> Result<CMat> {
        let n = self.shield_dims.0 * self.shield_dims.1;
        if self.twists.len() != self.k * self.k {
            return Err(Error::Shape(format!("need {} twist unitaries", self.k * self.k)));
        }
        let k = self.k;
        let mut u = CMat::zeros(k * k * n, k * k * n);
        for (idx, t) in self.twists.iter().enumerate() {
            if t.nrows() != n || linalg::unitarity_residual(t) > 1e-10 {
                return Err(Error::Invalid(format!("twist {idx} is not a unitary on the shield")));
            }
            u.view_mut((idx * n, idx * n), (n, n)).copy_from(t);
        }
        Ok(u)
    }

    /// Systems K_A K_B R_A R_B.
    pub fn dims(&self) -> [usize; 4] {
        [self.k, self.k, self.shield_dims.0, self.shield_dims.1]
    }
}

/// γ = U(Φ_K ⊗ θ)U† on K_A K_B R_A R_B.
pub fn make_private_state(spec: &PrivacySpec, theta: &CMat) -> Result<CMat> {
    let u = spec.twisting()?;
    if theta.nrows() != spec.shield_dims.0 * spec.shield_dims.1 {
        return Err(Error::Shape("shield state dims".into()));
    }
    Ok(&u * kron(&max_entangled(spec.k), theta) * u.adjoint())
}

/// Π^γ = U(Φ_K ⊗ 1)U†.
pub fn privacy_test_operator(spec: &PrivacySpec) -> Result<CMat> {
    let u = spec.twisting()?;
    let n = spec.shield_dims.0 * spec.shield_dims.1;
    Ok(&u * kron(&max_entangled(spec.k), &eye(n)) * u.adjoint())
}

pub fn privacy_overlap(pi: &CMat, rho: &CMat) -> f64 {
    linalg::tr_prod_re(pi, rho)
}

/// ½‖ρ − γ‖₁, convenient alongside the overlap.
pub fn private_state_distance(rho: &CMat, gamma: &CMat) -> f64 {
    trace_distance(rho, gamma)
}

// ---- converse arithmetic ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConverseKind {
    /// Q ≤ R_max^{2→2} + (1/n) log₂(1/(1−ε))
    StrongRains,
    /// (1/n)log₂K ≤ E_max^{2→2} + (1/n) log₂(1/(1−ε))
    StrongEmax,
    /// Q ≤ R̃_α(θ) + α/(n(α−1)) log₂(1/(1−ε))
    StrongPptSimulable { alpha: f64 },
    /// P ≤ Ẽ_α(θ) + α/(n(α−1)) log₂(1/(1−ε))
    StrongTeleportSimulable { alpha: f64 },
    /// (1−ε)Q ≤ R(θ) + h₂(ε)/n, solved for Q
    Weak,
}

pub fn converse_rate_bounds(kind: ConverseKind, quantity: f64, n: usize, eps: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps={eps} outside (0,1)")));
    }
    let n = n as f64;
    let tail = (1.0 / (1.0 - eps)).log2();
    Ok(match kind {
        ConverseKind::StrongRains | ConverseKind::StrongEmax => quantity + tail / n,
        ConverseKind::StrongPptSimulable { alpha } | ConverseKind::StrongTeleportSimulable { alpha } => {
            if !(alpha > 1.0) {
                return Err(Error::Domain(format!("alpha={alpha} must exceed 1")));
            }
            quantity + alpha / (n * (alpha - 1.0)) * tail
        }
        ConverseKind::Weak => (quantity + binary_entropy(eps) / n) / (1.0 - eps),
    })
}

/// Smallest eigenvalue of a candidate PPT′ point's defining operators.
pub fn ppt_prime_violation(sigma: &CMat, dims: [usize; 2]) -> Result<f64> {
    let e = eigh(&hermitian_part(sigma))?;
    Ok((-e.min()).max(ppt_prime_norm(sigma, dims)? - 1.0).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ket;
    use crate::qcore::{depolarizing, identity_bipartite, swap_channel};

    #[test]
    fn rmax_state_examples() {
        let r = rmax_state(&max_entangled(2), [2, 2], 1e-9).unwrap();
        assert!((r.value - 1.0).abs() < 1e-7, "{}", r.value);
        assert!(r.witness_residual < 1e-8);
        let r3 = rmax_state(&max_entangled(3), [3, 3], 1e-9).unwrap();
        assert!((r3.value - 3f64.log2()).abs() < 1e-7);
        let prod = kron(&proj(&ket(2, 0)), &eye(2).unscale(2.0));
        assert!(rmax_state(&prod, [2, 2], 1e-9).unwrap().value.abs() < 1e-7);
    }

    #[test]
    fn rmax_channel_examples() {
        let id = rmax_channel(&KrausChannel::identity(2), 1e-9).unwrap();
        assert!((id.value - 1.0).abs() < 1e-7);
        let dep = rmax_channel(&depolarizing(2, 1.0).unwrap(), 1e-9).unwrap();
        assert!(dep.value.abs() < 1e-7);
    }

    #[test]
    fn bidirectional_endpoints() {
        let s = rmax_bidirectional(&swap_channel(2), 1e-9).unwrap();
        assert!((s.value - 2.0).abs() < 1e-6 && s.gap < 1e-6, "{s:?}");
        let i = rmax_bidirectional(&identity_bipartite(2, 2), 1e-9).unwrap();
        assert!(i.value.abs() < 1e-6 && i.gap < 1e-6, "{i:?}");
    }

    #[test]
    fn point_to_point_as_bidirectional() {
        let dep = depolarizing(2, 0.3).unwrap();
        let a = rmax_channel(&dep, 1e-9).unwrap().value;
        let b = rmax_bidirectional(&BipartiteChannel::new(dep, (2, 1), (1, 2)).unwrap(), 1e-9).unwrap().value;
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn emax_examples() {
        assert!((emax_ppt(&max_entangled(2), [2, 2], 1e-9).unwrap() - 1.0).abs() < 1e-7);
        let prod = kron(&proj(&ket(2, 1)), &proj(&ket(2, 0)));
        assert!(emax_ppt(&prod, [2, 2], 1e-9).unwrap().abs() < 1e-7);
    }

    #[test]
    fn rai99_identity() {
        for m in [2usize, 3] {
            let v = max_overlap_ppt_prime(&max_entangled(m), [m, m], 1e-9).unwrap();
            assert!((v - 1.0 / m as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn rains_of_phi2() {
        let r = rains_relative_entropy(&max_entangled(2), [2, 2], FwOptions::default()).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.value - 1.0).abs() < 2e-5, "{}", r.value);
        assert!(ppt_prime_violation(&r.sigma, [2, 2]).unwrap() < 1e-8);
    }

    #[test]
    fn ppt_state_short_circuits() {
        let rho = eye(4).unscale(4.0);
        assert_eq!(rains_relative_entropy(&rho, [2, 2], FwOptions::default()).unwrap().value, 0.0);
    }

    #[test]
    fn private_state_basics() {
        let spec = PrivacySpec::untwisted(2, (1, 1));
        let g = make_private_state(&spec, &eye(1)).unwrap();
        let pi = privacy_test_operator(&spec).unwrap();
        assert!((privacy_overlap(&pi, &g) - 1.0).abs() < 1e-12);
        let mixed = eye(4).unscale(4.0);
        assert!((privacy_overlap(&pi, &mixed) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn converse_arithmetic() {
        assert!((converse_rate_bounds(ConverseKind::StrongRains, 0.0, 1, 0.5).unwrap() - 1.0).abs() < 1e-15);
        let v = converse_rate_bounds(ConverseKind::StrongPptSimulable { alpha: 2.0 }, 0.4, 10, 0.1).unwrap();
        assert!((v - (0.4 + 2.0 / 10.0 * (1.0f64 / 0.9).log2())).abs() < 1e-15);
        assert!(converse_rate_bounds(ConverseKind::Weak, 1.0, 1, 1.0).is_err());
    }

    fn fd_check(obj: &dyn Objective, s: &CMat, dir: &CMat) -> (f64, f64) {
        let h = 1e-6;
        let fd = (obj.value(&(s + dir * C64::new(h, 0.0))) - obj.value(&(s - dir * C64::new(h, 0.0)))) / (2.0 * h);
        let an = (obj.grad(s).adjoint() * dir).trace().re;
        (fd, an)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut r = crate::random::rng(7);
        let rho = crate::random::density(4, 2, &mut r);
        let s = crate::random::full_rank_density(4, &mut r);
        let dir = crate::random::hermitian(4, &mut r);
        let (fd, an) = fd_check(&RelEnt { rho: &rho }, &s, &dir);
        assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "{fd} {an}");
        for alpha in [1.5, 2.0, 3.0] {
            let (fd, an) = fd_check(&SandwichedQ { rho: &rho, alpha }, &s, &dir);
            assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "alpha {alpha}: {fd} {an}");
        }
    }

    #[test]
    fn rains_chain_on_generic_state() {
        let mut r = crate::random::rng(3);
        let rho = crate::random::density(4, 2, &mut r);
        let opts = FwOptions { max_iter: 150, ..FwOptions::default() };
        let re = rains_relative_entropy(&rho, [2, 2], opts).unwrap();
        let sa = sandwiched_rains(&rho, [2, 2], 2.0, opts).unwrap();
        let mx = rmax_state(&rho, [2, 2], 1e-9).unwrap().value;
        assert!(re.value <= sa.value + re.gap + sa.gap, "{} {}", re.value, sa.value);
        assert!(sa.value <= mx + sa.gap + 1e-7, "{} {mx}", sa.value);
        assert!(ppt_prime_violation(&re.sigma, [2, 2]).unwrap() < 1e-8);
        assert!(ppt_prime_violation(&sa.sigma, [2, 2]).unwrap() < 1e-8);
    }
}
