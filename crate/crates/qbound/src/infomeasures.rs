//! Entropies, divergences, fidelity and the continuity-bound reports.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, eigh, eye, kron, max_abs, partial_trace, polar_unitary, powm_support, proj, sqrtm_psd, trace_norm, CMat,
    HermitianEig, C64, SUPPORT_CUT,
};
use crate::sdp::model::{Affine, Lmi};
use crate::sdp::SdpStatus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    Bits,
    Nats,
}

impl Base {
    /// Convert a value in nats.
    pub fn from_nats(self, v: f64) -> f64 {
        match self {
            Base::Bits => v / LN_2,
            Base::Nats => v,
        }
    }

    pub fn log(self, x: f64) -> f64 {
        self.from_nats(x.ln())
    }

    pub fn name(self) -> &'static str {
        match self {
            Base::Bits => "bits",
            Base::Nats => "nats",
        }
    }
}

impl std::str::FromStr for Base {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bits" => Ok(Base::Bits),
            "nats" => Ok(Base::Nats),
            _ => Err(Error::Invalid(format!("unknown base {s:?}"))),
        }
    }
}

/// Divergence value; `Infinite` marks a support violation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Div {
    Finite(f64),
    Infinite,
}

impl Div {
    pub fn is_infinite(self) -> bool {
        matches!(self, Div::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Div::Finite(v) => Some(v),
            Div::Infinite => None,
        }
    }

    /// f64 view with `+inf` for the flag.
    pub fn value(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn expect_finite(self, what: &str) -> Result<f64> {
        self.finite().ok_or_else(|| Error::Domain(format!("{what}: support violation")))
    }
}

// ---- scalar helpers -------------------------------------------------------

/// h₂(p) in bits.
pub fn binary_entropy(p: f64) -> f64 {
    let t = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    t(p) + t(1.0 - p)
}

/// g(y) = (y+1)log₂(y+1) − y log₂ y.
pub fn g_fn(y: f64) -> f64 {
    let t = |x: f64| if x <= 0.0 { 0.0 } else { x * x.log2() };
    t(y + 1.0) - t(y)
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

// ---- entropies ------------------------------------------------------------

pub fn entropy(rho: &CMat, base: Base) -> Result<f64> {
    let e = eigh(rho)?;
    let cut = e.cut(SUPPORT_CUT);
    let s: f64 = e.values.iter().filter(|&&l| l > cut).map(|&l| -xlogx(l)).sum();
    Ok(base.from_nats(s).max(0.0))
}

fn marg(rho: &CMat, dims: &[usize], keep: &[usize]) -> Result<CMat> {
    partial_trace(rho, dims, keep)
}

/// S(A|B) = S(AB) − S(B) for ρ on A⊗B.
pub fn conditional_entropy(rho: &CMat, dims: [usize; 2], base: Base) -> Result<f64> {
    Ok(entropy(rho, base)? - entropy(&marg(rho, &dims, &[1])?, base)?)
}

pub fn mutual_information(rho: &CMat, dims: [usize; 2], base: Base) -> Result<f64> {
    let a = marg(rho, &dims, &[0])?;
    let b = marg(rho, &dims, &[1])?;
    Ok(entropy(&a, base)? + entropy(&b, base)? - entropy(rho, base)?)
}

/// I(A;B|C) on A⊗B⊗C.
pub fn conditional_mutual_information(rho: &CMat, dims: [usize; 3], base: Base) -> Result<f64> {
    let ac = marg(rho, &dims, &[0, 2])?;
    let bc = marg(rho, &dims, &[1, 2])?;
    let cc = marg(rho, &dims, &[2])?;
    Ok(entropy(&ac, base)? + entropy(&bc, base)? - entropy(rho, base)? - entropy(&cc, base)?)
}

/// I(A⟩B) = −S(A|B).
pub fn coherent_information(rho: &CMat, dims: [usize; 2], base: Base) -> Result<f64> {
    Ok(-conditional_entropy(rho, dims, base)?)
}

#[derive(Debug, Clone)]
pub struct CQEnsemble {
    pub probs: Vec<f64>,
    pub states: Vec<CMat>,
}

impl CQEnsemble {
    pub fn new(probs: Vec<f64>, states: Vec<CMat>) -> Result<Self> {
        if probs.len() != states.len() || probs.is_empty() {
            return Err(Error::Shape("probabilities and states differ in length".into()));
        }
        let d = states[0].nrows();
        if states.iter().any(|s| s.nrows() != d || s.ncols() != d) {
            return Err(Error::Shape("states of unequal shape".into()));
        }
        if probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::Invalid("negative probability".into()));
        }
        let tot: f64 = probs.iter().sum();
        if (tot - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("probabilities sum to {tot}")));
        }
        Ok(CQEnsemble { probs, states })
    }

    pub fn dim(&self) -> usize {
        self.states[0].nrows()
    }

    pub fn average(&self) -> CMat {
        let d = self.dim();
        let mut m = CMat::zeros(d, d);
        for (p, s) in self.probs.iter().zip(&self.states) {
            m += s * C64::new(*p, 0.0);
        }
        m
    }

    /// Σ_x p(x)|x⟩⟨x| ⊗ ρ_x
    pub fn cq_state(&self) -> CMat {
        let n = self.probs.len();
        let d = self.dim();
        let mut m = CMat::zeros(n * d, n * d);
        for (x, (p, s)) in self.probs.iter().zip(&self.states).enumerate() {
            m.view_mut((x * d, x * d), (d, d)).copy_from(&(s * C64::new(*p, 0.0)));
        }
        m
    }

    /// Same symbols, states mapped through `f`.
    pub fn map<F: Fn(&CMat) -> Result<CMat>>(&self, f: F) -> Result<CQEnsemble> {
        let states = self.states.iter().map(f).collect::<Result<Vec<_>>>()?;
        Ok(CQEnsemble { probs: self.probs.clone(), states })
    }
}

/// I(X;B) of the cq state.
pub fn holevo(ens: &CQEnsemble, base: Base) -> Result<f64> {
    let mut s = entropy(&ens.average(), base)?;
    for (p, st) in ens.probs.iter().zip(&ens.states) {
        if *p > 0.0 {
            s -= p * entropy(st, base)?;
        }
    }
    Ok(s.max(0.0))
}

// ---- divergences ----------------------------------------------------------

struct Supp {
    e: HermitianEig,
    cut: f64,
}

impl Supp {
    fn of(s: &CMat) -> Result<Self> {
        let e = eigh(s)?;
        let cut = e.cut(SUPPORT_CUT);
        Ok(Supp { e, cut })
    }

    fn projector(&self) -> CMat {
        self.e.support_projector(SUPPORT_CUT)
    }

    fn f<F: Fn(f64) -> f64>(&self, f: F) -> CMat {
        let v: Vec<f64> = self.e.values.iter().map(|&l| if l > self.cut { f(l) } else { 0.0 }).collect();
        self.e.rebuild(&v)
    }
}

/// supp ρ ⊄ supp σ, judged by the weight of ρ outside supp σ.
fn support_violated(rho: &CMat, sigma: &Supp) -> bool {
    let p = sigma.projector();
    let out = rho.trace().re - linalg::tr_prod_re(rho, &p);
    let scale = rho.trace().re.abs().max(1e-300);
    out > SUPPORT_CUT * scale
}

pub fn relative_entropy(rho: &CMat, sigma: &CMat, base: Base) -> Result<Div> {
    let ss = Supp::of(sigma)?;
    if support_violated(rho, &ss) {
        return Ok(Div::Infinite);
    }
    let sr = Supp::of(rho)?;
    let a: f64 = sr.e.values.iter().filter(|&&l| l > sr.cut).map(|&l| xlogx(l)).sum();
    let log_s = ss.f(f64::ln);
    let b = linalg::tr_prod_re(rho, &log_s);
    Ok(Div::Finite(base.from_nats(a - b)))
}

pub fn dmax(rho: &CMat, sigma: &CMat, base: Base) -> Result<Div> {
    let ss = Supp::of(sigma)?;
    if support_violated(rho, &ss) {
        return Ok(Div::Infinite);
    }
    let m = ss.f(|l| l.powf(-0.5));
    let lam = linalg::lambda_max(&(&m * rho * &m));
    if lam <= 0.0 {
        return Err(Error::Domain("ρ vanishes on the support of σ".into()));
    }
    Ok(Div::Finite(base.log(lam)))
}

/// Sandwiched Rényi divergence; α = 1 and α = ∞ go to the exact limits.
pub fn sandwiched_renyi(rho: &CMat, sigma: &CMat, alpha: f64, base: Base) -> Result<Div> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha={alpha} must be positive")));
    }
    if alpha.is_infinite() {
        return dmax(rho, sigma, base);
    }
    if (alpha - 1.0).abs() < 1e-9 {
        return relative_entropy(rho, sigma, base);
    }
    let ss = Supp::of(sigma)?;
    if alpha > 1.0 && support_violated(rho, &ss) {
        return Ok(Div::Infinite);
    }
    let beta = (1.0 - alpha) / (2.0 * alpha);
    let sb = ss.f(|l| l.powf(beta));
    let inner = &sb * rho * &sb;
    let lq = log_trace_pow(&inner, alpha)?;
    let Some(lq) = lq else {
        // Q = 0, only possible for α < 1
        return Ok(Div::Infinite);
    };
    let tr = rho.trace().re;
    Ok(Div::Finite(base.from_nats((lq - tr.ln()) / (alpha - 1.0))))
}

/// ln Tr M^α for PSD M, computed relative to λ_max; None when M = 0.
fn log_trace_pow(m: &CMat, alpha: f64) -> Result<Option<f64>> {
    let e = eigh(m)?;
    let top = e.max();
    if top <= 0.0 {
        return Ok(None);
    }
    let cut = top * SUPPORT_CUT;
    let s: f64 = e.values.iter().filter(|&&l| l > cut).map(|&l| (l / top).powf(alpha)).sum();
    Ok(Some(alpha * top.ln() + s.ln()))
}

/// Q̃_α(ρ‖σ) = Tr[(σ^β ρ σ^β)^α], β = (1−α)/2α.
pub fn sandwiched_quasi(rho: &CMat, sigma: &CMat, alpha: f64) -> Result<f64> {
    let beta = (1.0 - alpha) / (2.0 * alpha);
    let sb = powm_support(sigma, beta);
    let inner = &sb * rho * &sb;
    Ok(log_trace_pow(&inner, alpha)?.map(f64::exp).unwrap_or(0.0))
}

/// D_H^ε(ρ‖σ) = −log min{Tr Λσ : 0 ⪯ Λ ⪯ 1, Tr Λρ ≥ 1−ε}.
pub fn hypothesis_testing(rho: &CMat, sigma: &CMat, eps: f64, base: Base, tol: f64) -> Result<Div> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Domain(format!("eps={eps} outside [0,1)")));
    }
    if eps == 0.0 {
        let pr = Supp::of(rho)?.projector();
        let t = linalg::tr_prod_re(&pr, sigma);
        return Ok(if t <= SUPPORT_CUT { Div::Infinite } else { Div::Finite(-base.log(t)) });
    }
    let n = rho.nrows();
    let mut lmi = Lmi::new();
    let lam = lmi.herm(n).affine();
    lmi.psd(lam.clone());
    lmi.psd(Affine::identity(n).sub(&lam));
    let mut one = lam.inner(rho);
    one.constant -= 1.0 - eps;
    lmi.psd(Affine::from_linear(&one));
    lmi.minimize(lam.inner(sigma));
    let sol = lmi.solve(tol)?;
    if sol.status != SdpStatus::Optimal {
        return Err(Error::Sdp(format!("hypothesis test SDP ended with {:?}", sol.status)));
    }
    let v = sol.value;
    Ok(if v <= SUPPORT_CUT { Div::Infinite } else { Div::Finite(-base.log(v)) })
}

/// V(ρ‖σ) = Tr ρ (log ρ − log σ − D)².
pub fn rel_entropy_variance(rho: &CMat, sigma: &CMat, base: Base) -> Result<f64> {
    let ss = Supp::of(sigma)?;
    if support_violated(rho, &ss) {
        return Err(Error::Domain("supp(ρ) ⊄ supp(σ)".into()));
    }
    let sr = Supp::of(rho)?;
    let k = base.from_nats(1.0);
    let l = (sr.f(f64::ln) - ss.f(f64::ln)) * C64::new(k, 0.0);
    let d = linalg::tr_prod_re(rho, &l);
    let centered = &l - eye(rho.nrows()) * C64::new(d, 0.0);
    // restrict to supp ρ so that the 0·log 0 terms vanish
    let p = sr.projector();
    let c = &p * &centered;
    let v = linalg::tr_prod_re(rho, &(c.adjoint() * &c));
    Ok(v.max(0.0))
}

pub fn fidelity(rho: &CMat, sigma: &CMat) -> f64 {
    let a = sqrtm_psd(rho);
    let b = sqrtm_psd(sigma);
    let t = trace_norm(&(a * b));
    t * t
}

pub fn trace_distance(rho: &CMat, sigma: &CMat) -> f64 {
    0.5 * trace_norm(&(rho - sigma))
}

// ---- reports --------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub fidelity: f64,
    pub trace_distance: f64,
    /// T − (1 − √F)
    pub fvg_lower_slack: f64,
    /// √(1−F) − T
    pub fvg_upper_slack: f64,
    /// D(ρ‖σ) − ‖ρ−σ‖₁²/(2 ln 2), bits; +inf under a support violation
    pub pinsker_slack: f64,
}

impl MetricReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.fvg_lower_slack >= -tol && self.fvg_upper_slack >= -tol && self.pinsker_slack >= -tol
    }
}

pub fn metric_checks(rho: &CMat, sigma: &CMat) -> Result<MetricReport> {
    let f = fidelity(rho, sigma).min(1.0);
    let t = trace_distance(rho, sigma);
    let d = relative_entropy(rho, sigma, Base::Bits)?.value();
    let l1 = 2.0 * t;
    Ok(MetricReport {
        fidelity: f,
        trace_distance: t,
        fvg_lower_slack: t - (1.0 - f.sqrt()),
        fvg_upper_slack: (1.0 - f).max(0.0).sqrt() - t,
        pinsker_slack: d - l1 * l1 / (2.0 * LN_2),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AfwReport {
    pub eps: f64,
    pub difference: f64,
    pub bound: f64,
    pub holds: bool,
}

/// |S(A|B)_ρ − S(A|B)_σ| ≤ 2ε log₂ d_A + (1+ε) h₂(ε/(1+ε)), ε = ½‖ρ−σ‖₁.
pub fn afw_check(rho: &CMat, sigma: &CMat, dims: [usize; 2]) -> Result<AfwReport> {
    let eps = trace_distance(rho, sigma);
    let diff = (conditional_entropy(rho, dims, Base::Bits)? - conditional_entropy(sigma, dims, Base::Bits)?).abs();
    let bound = 2.0 * eps * (dims[0] as f64).log2() + (1.0 + eps) * binary_entropy(eps / (1.0 + eps));
    Ok(AfwReport { eps, difference: diff, bound, holds: diff <= bound + 1e-9 })
}

#[derive(Debug, Clone, Serialize)]
pub struct NearMaxEntReport {
    pub applicable: bool,
    /// Fidelity with U_B Φ U_B† for the aligned unitary.
    pub fidelity: f64,
    pub distance: f64,
    pub bound: f64,
    pub holds: bool,
}

fn not_applicable() -> NearMaxEntReport {
    NearMaxEntReport { applicable: false, fidelity: f64::NAN, distance: f64::NAN, bound: f64::NAN, holds: true }
}

/// Coefficient matrix Ψ[a, b] of a ket on A⊗B.
fn coefficients(psi: &CMat, da: usize, db: usize) -> CMat {
    CMat::from_fn(da, db, |a, b| psi[(a * db + b, 0)])
}

/// U_B taking the Schmidt vectors of ψ on B to the conjugated A vectors,
/// so that (1⊗U)|ψ⟩ = Σ √λ_i |u_i⟩|ū_i⟩.
fn schmidt_alignment(psi: &CMat, d: usize) -> (CMat, Vec<f64>) {
    let m = coefficients(psi, d, d);
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    // Ψ = U S V†, |v_i⟩ = conj(V†[i, :])ᵀ on B; target |ū_i⟩
    let target = u.map(|z| z.conj());
    let src = vt.map(|z| z.conj()).transpose();
    let w = target * src.adjoint();
    let s = svd.singular_values.iter().map(|x| x * x).collect();
    (w, s)
}

fn local_on_b(u: &CMat, psi: &CMat, d: usize) -> CMat {
    kron(&eye(d), u) * psi
}

/// Pure ψ_AB (d×d) with S(A) ≥ (1−ε) log₂ d is within (2ε ln d)^{1/4} of Φ
/// after the best local unitary on B.
pub fn eeprop_check(psi: &CMat, d: usize, eps: f64) -> Result<NearMaxEntReport> {
    if psi.nrows() != d * d || psi.ncols() != 1 {
        return Err(Error::Shape("expected a ket on d⊗d".into()));
    }
    let psi = psi.unscale(psi.norm());
    let rho_a = partial_trace(&proj(&psi), &[d, d], &[0])?;
    let sa = entropy(&rho_a, Base::Bits)?;
    if !(eps > 0.0 && eps < 1.0) || sa < (1.0 - eps) * (d as f64).log2() - 1e-12 {
        return Ok(not_applicable());
    }
    let (u, lam) = schmidt_alignment(&psi, d);
    let rotated = local_on_b(&u, &psi, d);
    let phi = linalg::max_entangled(d);
    let f = linalg::tr_prod_re(&phi, &proj(&rotated));
    let predicted = lam.iter().map(|l| l.max(0.0).sqrt()).sum::<f64>().powi(2) / d as f64;
    if (f - predicted).abs() > 1e-9 {
        return Err(Error::Invalid(format!("alignment fidelity {f} differs from Schmidt value {predicted}")));
    }
    let dist = trace_distance(&proj(&rotated), &phi);
    let bound = (2.0 * eps * (d as f64).ln()).powf(0.25);
    Ok(NearMaxEntReport { applicable: true, fidelity: f, distance: dist, bound, holds: dist <= bound + 1e-9 })
}

#[derive(Debug, Clone, Serialize)]
pub struct SquashedSurrogateReport {
    pub applicable: bool,
    pub half_mutual_info: f64,
    /// 2ε log₂|A|
    pub budget: f64,
    /// D(ψ_AE ‖ π_A ⊗ ψ_E), bits
    pub decoupling: f64,
    /// ‖ψ_AE − π_A ⊗ ψ_E‖₁
    pub decoupling_l1: f64,
    pub fidelity: f64,
    pub distance: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Purification |ψ⟩ on A⊗B⊗E with E = rank(ρ).
pub fn purify(rho: &CMat) -> Result<(CMat, usize)> {
    let e = eigh(rho)?;
    let cut = e.cut(SUPPORT_CUT);
    let keep: Vec<usize> = (0..e.values.len()).filter(|&i| e.values[i] > cut).collect();
    let de = keep.len().max(1);
    let n = rho.nrows();
    let mut psi = CMat::zeros(n * de, 1);
    for (k, &i) in keep.iter().enumerate() {
        let s = e.values[i].sqrt();
        for a in 0..n {
            psi[(a * de + k, 0)] = e.vectors[(a, i)] * s;
        }
    }
    Ok((psi, de))
}

/// Maximize ⟨Φ|(1⊗U)†ρ(1⊗U)|Φ⟩ over unitaries U on B by the polar
/// fixed-point iteration, started from the Schmidt alignment of ρ's top
/// eigenvector. The objective is a convex quadratic in U, so each polar
/// step does not decrease it.
pub fn best_local_unitary(rho: &CMat, d: usize) -> Result<(CMat, f64)> {
    let e = eigh(rho)?;
    let top = e.vectors.column(e.values.len() - 1).into_owned();
    let top = CMat::from_column_slice(top.nrows(), 1, top.as_slice());
    let (mut u, _) = schmidt_alignment(&top, d);
    let phi_k = linalg::max_entangled_ket(d);
    let value = |u: &CMat| {
        let w = local_on_b(u, &phi_k, d);
        (w.adjoint() * rho * &w)[(0, 0)].re
    };
    let mut f = value(&u);
    for _ in 0..500 {
        let w = local_on_b(&u, &phi_k, d);
        let g = rho * &w;
        // ∂f/∂Ū[b,a] ∝ g[(a,b)]
        let grad = CMat::from_fn(d, d, |b, a| g[(a * d + b, 0)]);
        let next = polar_unitary(&grad);
        let fn_ = value(&next);
        u = next;
        let done = (fn_ - f).abs() < 1e-15;
        f = fn_;
        if done {
            break;
        }
    }
    Ok((u, f))
}

/// Mutual-information surrogate: premise I(A;B)/2 ≥ (1−ε)log₂|A|; the
/// conclusion ½‖ρ − U Φ U†‖₁ ≤ (2√(ε ln|A|))^{1/2} is checked along the
/// proof chain with an explicit U_B.
pub fn squashed_surrogate_check(rho: &CMat, d: usize, eps: f64) -> Result<SquashedSurrogateReport> {
    if rho.nrows() != d * d {
        return Err(Error::Shape("expected a state on d⊗d".into()));
    }
    let la = (d as f64).log2();
    let half_i = 0.5 * mutual_information(rho, [d, d], Base::Bits)?;
    let applicable = eps > 0.0 && eps < 1.0 && half_i >= (1.0 - eps) * la - 1e-12;
    let (psi, de) = purify(rho)?;
    let psi_ae = partial_trace(&proj(&psi), &[d, d, de], &[0, 2])?;
    let psi_e = partial_trace(&psi_ae, &[d, de], &[1])?;
    let prod = kron(&eye(d).unscale(d as f64), &psi_e);
    let dec = relative_entropy(&psi_ae, &prod, Base::Bits)?.value();
    let dec_l1 = trace_norm(&(&psi_ae - &prod));
    let (u, f) = best_local_unitary(rho, d)?;
    let w = local_on_b(&u, &linalg::max_entangled_ket(d), d);
    let dist = trace_distance(rho, &proj(&w));
    let bound = (2.0 * (eps * (d as f64).ln()).sqrt()).sqrt();
    Ok(SquashedSurrogateReport {
        applicable,
        half_mutual_info: half_i,
        budget: 2.0 * eps * la,
        decoupling: dec,
        decoupling_l1: dec_l1,
        fidelity: f,
        distance: dist,
        bound,
        holds: !applicable || dist <= bound + 1e-9,
    })
}

/// Max |entry| of ρ − σ, for quick equality checks in callers.
pub fn max_diff(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, ket, max_entangled};
    use crate::random;

    #[test]
    fn binary_and_g() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.5) - 1.0).abs() < 1e-15);
        assert!((g_fn(1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn entropy_base_wiring() {
        let pi = eye(3).unscale(3.0);
        assert!((entropy(&pi, Base::Bits).unwrap() - 3f64.log2()).abs() < 1e-12);
        assert!((entropy(&pi, Base::Nats).unwrap() - 3f64.ln()).abs() < 1e-12);
        assert!(entropy(&proj(&ket(3, 1)), Base::Bits).unwrap().abs() < 1e-15);
    }

    #[test]
    fn thermal_truncation_matches_g() {
        // θ(N) = Σ N^n/(N+1)^{n+1} |n⟩⟨n|, N = 1, truncated deep enough
        let n = 80;
        let p: Vec<f64> = (0..n).map(|k| 0.5f64.powi(k as i32 + 1)).collect();
        let s = entropy(&diag(&p), Base::Bits).unwrap();
        assert!((s - 2.0).abs() < 1e-10);
    }

    #[test]
    fn relative_entropy_examples() {
        let z = proj(&ket(2, 0));
        let pi = eye(2).unscale(2.0);
        assert!((relative_entropy(&z, &pi, Base::Bits).unwrap().value() - 1.0).abs() < 1e-12);
        assert!(relative_entropy(&pi, &pi, Base::Bits).unwrap().value().abs() < 1e-12);
        assert!(relative_entropy(&pi, &z, Base::Bits).unwrap().is_infinite());
        assert!((dmax(&z, &pi, Base::Bits).unwrap().value() - 1.0).abs() < 1e-12);
        let phi = max_entangled(3);
        let d = dmax(&phi, &phi.unscale(3.0), Base::Bits).unwrap().value();
        assert!((d - 3f64.log2()).abs() < 1e-10);
    }

    #[test]
    fn renyi_limits() {
        let mut rng = random::rng(4);
        for _ in 0..5 {
            let r = random::full_rank_density(3, &mut rng);
            let s = random::full_rank_density(3, &mut rng);
            let d = relative_entropy(&r, &s, Base::Bits).unwrap().value();
            for a in [1.0 - 1e-4, 1.0 + 1e-4] {
                let v = sandwiched_renyi(&r, &s, a, Base::Bits).unwrap().value();
                assert!((v - d).abs() < 1e-3, "{v} {d}");
            }
            let dm = dmax(&r, &s, Base::Bits).unwrap().value();
            let big = sandwiched_renyi(&r, &s, 1e3, Base::Bits).unwrap().value();
            assert!((big - dm).abs() < 1e-2);
            assert!(sandwiched_renyi(&r, &r, 2.0, Base::Bits).unwrap().value().abs() < 1e-12);
        }
    }

    #[test]
    fn hypothesis_testing_examples() {
        let mut rng = random::rng(6);
        let r = random::full_rank_density(2, &mut rng);
        let v = hypothesis_testing(&r, &r, 0.3, Base::Bits, 1e-9).unwrap().value();
        assert!((v + (0.7f64).log2()).abs() < 1e-6);
        let a = proj(&ket(2, 0));
        let b = proj(&ket(2, 1));
        assert!(hypothesis_testing(&a, &b, 0.0, Base::Bits, 1e-9).unwrap().is_infinite());
    }

    #[test]
    fn information_examples() {
        let phi = max_entangled(3);
        let i = mutual_information(&phi, [3, 3], Base::Bits).unwrap();
        assert!((i - 2.0 * 3f64.log2()).abs() < 1e-10);
        let ci = coherent_information(&phi, [3, 3], Base::Bits).unwrap();
        assert!((ci - 3f64.log2()).abs() < 1e-10);
        let ens = CQEnsemble::new(vec![0.5, 0.5], vec![proj(&ket(2, 0)), proj(&ket(2, 1))]).unwrap();
        assert!((holevo(&ens, Base::Bits).unwrap() - 1.0).abs() < 1e-12);
        assert!(CQEnsemble::new(vec![0.5, 0.6], vec![eye(2), eye(2)]).is_err());
    }

    #[test]
    fn variance_of_diagonal_pair() {
        let p = [0.2f64, 0.5, 0.3];
        let q = [0.4, 0.4, 0.2];
        let llr: Vec<f64> = p.iter().zip(&q).map(|(a, b)| (a / b).log2()).collect();
        let mean: f64 = p.iter().zip(&llr).map(|(a, l)| a * l).sum();
        let var: f64 = p.iter().zip(&llr).map(|(a, l)| a * (l - mean).powi(2)).sum();
        let v = rel_entropy_variance(&diag(&p), &diag(&q), Base::Bits).unwrap();
        assert!((v - var).abs() < 1e-12);
        assert!(rel_entropy_variance(&diag(&p), &diag(&p), Base::Bits).unwrap().abs() < 1e-12);
        assert!(rel_entropy_variance(&diag(&p), &diag(&[0.5, 0.5, 0.0]), Base::Bits).is_err());
    }

    #[test]
    fn metrics() {
        let a = proj(&ket(2, 0));
        let b = proj(&ket(2, 1));
        let m = metric_checks(&a, &b).unwrap();
        assert!(m.fidelity.abs() < 1e-12 && (m.trace_distance - 1.0).abs() < 1e-12);
        let m = metric_checks(&a, &a).unwrap();
        assert!((m.fidelity - 1.0).abs() < 1e-9 && m.trace_distance.abs() < 1e-12);
    }

    #[test]
    fn eeprop_on_phi_and_violated_premise() {
        let phi = linalg::max_entangled_ket(3);
        let r = eeprop_check(&phi, 3, 0.2).unwrap();
        assert!(r.applicable && r.distance < 1e-7 && r.holds);
        let prod = kron(&ket(2, 0), &ket(2, 0));
        assert!(!eeprop_check(&prod, 2, 0.2).unwrap().applicable);
    }

    #[test]
    fn squashed_surrogate_on_phi() {
        let phi = max_entangled(2);
        let r = squashed_surrogate_check(&phi, 2, 0.1).unwrap();
        assert!(r.applicable && r.distance < 1e-7 && r.decoupling.abs() < 1e-9);
        let r = squashed_surrogate_check(&eye(4).unscale(4.0), 2, 0.1).unwrap();
        assert!(!r.applicable);
    }

    #[test]
    fn hypothesis_lmi_uses_one_by_one_block() {
        let a = Affine::from_linear(&crate::sdp::model::Linear::var(0).scale(2.0));
        assert_eq!(a.eval(&[1.5])[(0, 0)], C64::new(3.0, 0.0));
    }
}
