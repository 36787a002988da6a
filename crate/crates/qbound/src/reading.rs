//! Quantum reading: capacities of memory cells, converse terms, private
//! reading rates, the zero-error certificate and the incognito/covert
//! security parameters. Everything is reported in bits.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::infomeasures::{
    conditional_mutual_information, entropy, g_fn, mutual_information, rel_entropy_variance, relative_entropy,
    sandwiched_quasi, Base, CQEnsemble,
};
use crate::linalg::{
    self, eigh_sym, eye, hermitian_part, kron, max_abs, max_entangled, partial_trace, permute_systems, proj, CMat,
    C64,
};
use crate::qcore::{
    choi_of, covariance_residual, depolarizing, gadc, GroupRep, IsometricExtension, KrausChannel, MemoryCell,
    COV_TOL,
};
use crate::rains::sandwiched_q_gradient;

pub use crate::qcore::{bidirectional_from_cell, controlled_isometry};

const LN2: f64 = std::f64::consts::LN_2;

/// Successive-value tolerance for Blahut–Arimoto.
pub const BA_TOL: f64 = 1e-10;
/// Accepted max_x D(θ^x‖θ̄) − χ at the returned distribution, in bits.
pub const BA_KKT_TOL: f64 = 1e-8;
const BA_MAX_ITER: usize = 200_000;
/// Tail mass allowed beyond the Fock cutoff of each thermal state.
pub const FOCK_TAIL: f64 = 1e-12;
const MAX_FOCK: usize = 1 << 20;
/// Stationarity residual for the σ_E minimization inside Ĩ_α.
pub const RENYI_STATIONARITY: f64 = 1e-7;

// ---- environment-parametrized cells -------------------------------------------

/// Cell whose channels are M^x(ρ) = F(ρ ⊗ θ^x).
#[derive(Debug, Clone)]
pub struct EnvCell {
    pub thetas: Vec<CMat>,
    /// Acts on B′ ⊗ E.
    pub interaction: KrausChannel,
    pub in_dim: usize,
    pub env_dim: usize,
}

impl EnvCell {
    pub fn new(thetas: Vec<CMat>, interaction: KrausChannel, in_dim: usize) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::Invalid("no ancillary states".into()));
        }
        let e = thetas[0].nrows();
        if thetas.iter().any(|t| t.nrows() != e || t.ncols() != e) {
            return Err(Error::Shape("ancillary states of unequal size".into()));
        }
        if interaction.in_dim != in_dim * e {
            return Err(Error::Shape("interaction must act on B′ ⊗ E".into()));
        }
        Ok(EnvCell { thetas, interaction, in_dim, env_dim: e })
    }

    /// Kraus form of ρ ↦ F(ρ ⊗ θ^x), from the spectral decomposition of θ^x.
    pub fn channel(&self, x: usize) -> Result<KrausChannel> {
        let th = self.thetas.get(x).ok_or_else(|| Error::Invalid(format!("no symbol {x}")))?;
        let e = eigh_sym(&hermitian_part(th));
        let mut ks = Vec::new();
        for (i, &l) in e.values.iter().enumerate() {
            if l <= 1e-14 {
                continue;
            }
            let col = e.vectors.column(i);
            let v = CMat::from_fn(col.len(), 1, |r, _| col[r] * l.sqrt());
            let attach = kron(&eye(self.in_dim), &v);
            ks.extend(self.interaction.kraus.iter().map(|k| k * &attach));
        }
        Ok(KrausChannel {
            in_dim: self.in_dim,
            out_dim: self.interaction.out_dim,
            kraus: ks,
            sub_operation: self.interaction.sub_operation,
        })
    }

    pub fn cell(&self) -> Result<MemoryCell> {
        MemoryCell::new((0..self.thetas.len()).map(|x| self.channel(x)).collect::<Result<_>>()?)
    }

    /// Worst deviation between F(|i⟩⟨j| ⊗ θ^x) and the derived channel over
    /// the matrix-unit probe basis.
    pub fn probe_residual(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for (x, th) in self.thetas.iter().enumerate() {
            let ch = self.channel(x)?;
            for i in 0..self.in_dim {
                for j in 0..self.in_dim {
                    let unit = &linalg::ket(self.in_dim, i) * linalg::ket(self.in_dim, j).adjoint();
                    let direct = self.interaction.apply(&kron(&unit, th))?;
                    worst = worst.max(max_abs(&(direct - ch.apply(&unit)?)));
                }
            }
        }
        Ok(worst)
    }
}

// ---- covariant cells ----------------------------------------------------------------

/// Entanglement-assisted classical capacity of a covariant base channel,
/// I(R;B) of its normalized Choi state. The input representation must be a
/// one-design.
pub fn covariant_cell_capacity(base: &KrausChannel, in_rep: &GroupRep, out_rep: &GroupRep) -> Result<f64> {
    let design = in_rep.one_design_residual();
    if design > 1e-9 {
        return Err(Error::Domain(format!("input representation is not a one-design ({design:.2e})")));
    }
    let res = covariance_residual(base, in_rep, out_rep)?;
    if res > COV_TOL {
        return Err(Error::NotCovariant(res));
    }
    choi_mutual_information(base)
}

/// I(R;B) of the normalized Choi state, bits.
pub fn choi_mutual_information(ch: &KrausChannel) -> Result<f64> {
    let st = choi_of(ch).state();
    Ok(mutual_information(&st, [ch.in_dim, ch.out_dim], Base::Bits)?.max(0.0))
}

pub fn erasure_cell_capacity(d: usize, q: f64) -> f64 {
    2.0 * (1.0 - q) * (d as f64).log2()
}

pub fn depolarizing_cell_capacity(d: usize, q: f64) -> f64 {
    let d2 = (d * d) as f64;
    let xl = |x: f64| if x <= 0.0 { 0.0 } else { x * x.log2() };
    2.0 * (d as f64).log2() + xl(1.0 - q + q / d2) + (d2 - 1.0) * xl(q / d2)
}

/// Choi states {(id ⊗ M^x)(Φ)} of a cell, the resource ensemble of a
/// jointly teleportation-simulable cell.
pub fn choi_resources(cell: &MemoryCell) -> Vec<CMat> {
    cell.channels.iter().map(|c| choi_of(c).state()).collect()
}

// ---- Blahut–Arimoto ----------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct HolevoCapacity {
    /// bits
    pub capacity: f64,
    pub p: Vec<f64>,
    pub iterations: usize,
    /// max_x D(θ^x‖θ̄) − χ, bits.
    pub kkt_residual: f64,
    pub converged: bool,
    /// χ never decreased (beyond 1e-12) along the iterates.
    pub monotone: bool,
}

/// Maximizes χ(p) = Σ p_x D_x(p) by p_x ← p_x e^{D_x}/Z, where `divs`
/// returns D_x(p) = D(θ^x‖θ̄_p) in nats.
fn blahut_arimoto<F>(n: usize, divs: F) -> Result<HolevoCapacity>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if n == 0 {
        return Err(Error::Invalid("empty alphabet".into()));
    }
    let mut p = vec![1.0 / n as f64; n];
    let mut d = divs(&p)?;
    let chi = |p: &[f64], d: &[f64]| p.iter().zip(d).map(|(a, b)| a * b).sum::<f64>();
    let mut val = chi(&p, &d);
    let mut monotone = true;
    let mut it = 0;
    let mut converged = false;
    let kkt0 = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - val;
    if kkt0 <= 1e-15 {
        converged = true;
    }
    while !converged && it < BA_MAX_ITER {
        let top = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = p.iter().zip(&d).map(|(pi, di)| pi * (di - top).exp()).collect();
        let z: f64 = w.iter().sum();
        let next: Vec<f64> = w.iter().map(|x| x / z).collect();
        let dn = divs(&next)?;
        let vn = chi(&next, &dn);
        if vn < val - 1e-12 {
            monotone = false;
        }
        let step = (vn - val).abs();
        p = next;
        d = dn;
        val = vn;
        it += 1;
        let kkt = (d.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - val) / LN2;
        if step / LN2 < BA_TOL && kkt <= BA_KKT_TOL {
            converged = true;
            break;
        }
    }
    let kkt = (d.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - val) / LN2;
    Ok(HolevoCapacity { capacity: (val / LN2).max(0.0), p, iterations: it, kkt_residual: kkt.max(0.0), converged, monotone })
}

fn average(p: &[f64], states: &[CMat]) -> CMat {
    let d = states[0].nrows();
    let mut m = CMat::zeros(d, d);
    for (pi, s) in p.iter().zip(states) {
        m += s * C64::new(*pi, 0.0);
    }
    m
}

/// max_p I(X;E)_θ over the ancillary states of an environment-parametrized cell.
pub fn env_cell_capacity(states: &[CMat]) -> Result<HolevoCapacity> {
    if states.is_empty() {
        return Err(Error::Invalid("need at least one state".into()));
    }
    CQEnsemble::new(vec![1.0 / states.len() as f64; states.len()], states.to_vec())?;
    blahut_arimoto(states.len(), |p| {
        let bar = average(p, states);
        states
            .iter()
            .map(|s| relative_entropy(s, &bar, Base::Nats)?.expect_finite("D(θ^x‖θ̄)"))
            .collect()
    })
}

fn classical_divs(p: &[f64], dists: &[Vec<f64>]) -> Vec<f64> {
    let m = dists[0].len();
    let bar: Vec<f64> = (0..m).map(|k| p.iter().zip(dists).map(|(pi, d)| pi * d[k]).sum()).collect();
    dists
        .iter()
        .map(|d| d.iter().zip(&bar).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum())
        .collect()
}

// ---- thermal cells ------------------------------------------------------------------

/// Smallest m with (N/(N+1))^{m+1} < `FOCK_TAIL`.
pub fn fock_cutoff(n: f64) -> Result<usize> {
    if !(n >= 0.0) || !n.is_finite() {
        return Err(Error::Domain(format!("mean photon number {n}")));
    }
    if n == 0.0 {
        return Ok(0);
    }
    let r = n / (n + 1.0);
    let est = (FOCK_TAIL.ln() / r.ln()).floor();
    if est > MAX_FOCK as f64 {
        return Err(Error::Domain(format!("Fock cutoff for N = {n} exceeds {MAX_FOCK}")));
    }
    let mut m = (est as usize).saturating_sub(2);
    while r.powi(m as i32 + 1) >= FOCK_TAIL {
        m += 1;
    }
    Ok(m)
}

/// Fock populations N^k/(N+1)^{k+1}, k = 0..=m.
pub fn thermal_populations(n: f64, m: usize) -> Vec<f64> {
    let r = n / (n + 1.0);
    let mut v = Vec::with_capacity(m + 1);
    let mut x = 1.0 / (n + 1.0);
    for _ in 0..=m {
        v.push(x);
        x *= r;
    }
    v
}

/// S(θ(N)) in bits on the truncated Fock space.
pub fn thermal_entropy(n: f64) -> Result<f64> {
    let v = thermal_populations(n, fock_cutoff(n)?);
    Ok(v.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum())
}

/// Holevo capacity of the cell whose ancillary states are thermal with the
/// given mean photon numbers. All states are diagonal in the Fock basis.
pub fn thermal_cell_capacity(ns: &[f64]) -> Result<HolevoCapacity> {
    if ns.is_empty() {
        return Err(Error::Invalid("need at least one mean photon number".into()));
    }
    let mut m = 0;
    for &n in ns {
        m = m.max(fock_cutoff(n)?);
    }
    let dists: Vec<Vec<f64>> = ns.iter().map(|&n| thermal_populations(n, m)).collect();
    blahut_arimoto(ns.len(), |p| Ok(classical_divs(p, &dists)))
}

/// 2 g(N_S), bits.
pub fn energy_constrained_bound(ns: f64) -> Result<f64> {
    if !(ns >= 0.0) {
        return Err(Error::Domain(format!("N_S = {ns}")));
    }
    Ok(2.0 * g_fn(ns))
}

// ---- second order and strong converse ---------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SecondOrder {
    pub capacity: f64,
    /// V(θ_XE‖θ_X⊗θ_E) at the Blahut–Arimoto optimizer, bits².
    pub variance: f64,
    pub phi_inv: f64,
    pub correction: f64,
    pub bound: f64,
    pub p: Vec<f64>,
    pub converged: bool,
}

/// C + √(V/n)·Φ⁻¹(ε). The optimizer set is represented by the single
/// distribution Blahut–Arimoto lands on.
pub fn second_order_bound(states: &[CMat], n: usize, eps: f64) -> Result<SecondOrder> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("ε = {eps} not in (0,1)")));
    }
    let cap = env_cell_capacity(states)?;
    let ens = CQEnsemble::new(cap.p.clone(), states.to_vec())?;
    let joint = ens.cq_state();
    let px = linalg::diag(&cap.p);
    let product = kron(&px, &ens.average());
    let variance = rel_entropy_variance(&joint, &product, Base::Bits)?;
    let phi_inv = if eps == 0.5 { 0.0 } else { Normal::new(0.0, 1.0).unwrap().inverse_cdf(eps) };
    let correction = (variance / n as f64).sqrt() * phi_inv;
    Ok(SecondOrder {
        capacity: cap.capacity,
        variance,
        phi_inv,
        correction,
        bound: cap.capacity + correction,
        p: cap.p,
        converged: cap.converged,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StrongConverse {
    /// Ĩ_α of the cell, bits.
    pub renyi_info: f64,
    /// (1 − 1/α)(R − Ĩ_α)
    pub exponent: f64,
    pub p: Vec<f64>,
    /// Worst inner stationarity residual and the outer simplex gap.
    pub inner_residual: f64,
    pub outer_gap: f64,
    pub converged: bool,
}

impl StrongConverse {
    /// 2^{−n·exponent}, capped at 1.
    pub fn bound(&self, n: usize) -> f64 {
        (-(n as f64) * self.exponent).exp2().min(1.0)
    }
}

fn exp_herm(h: &CMat) -> CMat {
    let e = eigh_sym(&hermitian_part(h));
    let top = e.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let v: Vec<f64> = e.values.iter().map(|l| (l - top).exp()).collect();
    let m = e.rebuild(&v);
    let t = m.trace().re;
    m / C64::new(t, 0.0)
}

fn log_herm(s: &CMat) -> CMat {
    let e = eigh_sym(&hermitian_part(s));
    let v: Vec<f64> = e.values.iter().map(|l| l.max(1e-300).ln()).collect();
    e.rebuild(&v)
}

struct InnerMin {
    value: f64,
    sigma: CMat,
    q: Vec<f64>,
    residual: f64,
    converged: bool,
}

/// min_σ Σ_x p_x Q̃_α(θ^x‖σ) by exponentiated gradient with backtracking.
fn renyi_inner(states: &[CMat], p: &[f64], alpha: f64, start: &CMat) -> Result<InnerMin> {
    let d = states[0].nrows();
    let qs = |s: &CMat| -> Result<Vec<f64>> {
        states.iter().map(|t| sandwiched_quasi(t, s, alpha)).collect()
    };
    let fval = |q: &[f64]| p.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
    let mut sigma = start * C64::new(1.0 - 1e-9, 0.0) + eye(d) * C64::new(1e-9 / d as f64, 0.0);
    let mut q = qs(&sigma)?;
    let mut f = fval(&q);
    let mut eta = 1.0;
    let mut residual = f64::INFINITY;
    for _ in 0..20_000 {
        let mut g = CMat::zeros(d, d);
        for ((t, pi), _) in states.iter().zip(p).zip(&q) {
            if *pi > 0.0 {
                g += sandwiched_q_gradient(t, &sigma, alpha) * C64::new(*pi, 0.0);
            }
        }
        let g = hermitian_part(&g);
        residual = linalg::tr_prod_re(&sigma, &g) - linalg::lambda_min(&g);
        if residual <= RENYI_STATIONARITY {
            return Ok(InnerMin { value: f, sigma, q, residual, converged: true });
        }
        let logs = log_herm(&sigma);
        let mut accepted = false;
        for _ in 0..60 {
            let cand = exp_herm(&(&logs - &g * C64::new(eta, 0.0)));
            let qc = qs(&cand)?;
            let fc = fval(&qc);
            // near the optimum the decrease drops below rounding; the gradient still steers
            if fc <= f + 4.0 * f64::EPSILON * f.abs() {
                sigma = cand;
                q = qc;
                f = fc;
                accepted = true;
                eta *= 1.5;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(InnerMin { value: f, sigma, q, residual, converged: residual <= RENYI_STATIONARITY })
}

/// Ĩ_α(X;E) = min_σ D̃_α(θ_XE‖θ_X⊗σ) = (1/(α−1)) log min_σ Σ_x p_x Q̃_α(θ^x‖σ), bits.
pub fn renyi_mutual_information(states: &[CMat], p: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let inner = renyi_inner(states, p, alpha, &average(p, states))?;
    if !inner.converged {
        return Err(Error::NoConvergence(format!("σ_E minimization stalled at residual {:.2e}", inner.residual)));
    }
    Ok(inner.value.log2() / (alpha - 1.0))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("α = {alpha} must exceed 1")));
    }
    Ok(())
}

/// Strong-converse exponent (1 − 1/α)(R − Ĩ_α) at rate R (bits), with
/// Ĩ_α = max_p Ĩ_α(X;E) found by mirror ascent on the simplex.
pub fn strong_converse_exponent(states: &[CMat], rate: f64, alpha: f64) -> Result<StrongConverse> {
    check_alpha(alpha)?;
    if states.is_empty() {
        return Err(Error::Invalid("need at least one state".into()));
    }
    CQEnsemble::new(vec![1.0 / states.len() as f64; states.len()], states.to_vec())?;
    let n = states.len();
    let objective = |inner: &InnerMin| inner.value.ln() / (alpha - 1.0);
    let mut p = vec![1.0 / n as f64; n];
    let mut inner = renyi_inner(states, &p, alpha, &average(&p, states))?;
    let mut val = objective(&inner);
    let mut worst_inner = inner.residual;
    let mut all_inner = inner.converged;
    let mut eta = 1.0;
    let mut gap = f64::INFINITY;
    for _ in 0..2000 {
        let grad: Vec<f64> = inner.q.iter().map(|q| q / ((alpha - 1.0) * inner.value)).collect();
        let mean: f64 = p.iter().zip(&grad).map(|(a, b)| a * b).sum();
        gap = grad.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - mean;
        if gap <= RENYI_STATIONARITY {
            break;
        }
        let mut moved = false;
        for _ in 0..50 {
            let top = grad.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = p.iter().zip(&grad).map(|(pi, g)| pi * (eta * (g - top)).exp()).collect();
            let z: f64 = w.iter().sum();
            let cand: Vec<f64> = w.iter().map(|x| x / z).collect();
            let ci = renyi_inner(states, &cand, alpha, &inner.sigma)?;
            let cv = objective(&ci);
            if cv > val {
                p = cand;
                worst_inner = worst_inner.max(ci.residual);
                all_inner &= ci.converged;
                inner = ci;
                val = cv;
                eta *= 1.5;
                moved = true;
                break;
            }
            eta *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let renyi_info = (val / LN2).max(0.0);
    Ok(StrongConverse {
        renyi_info,
        exponent: (1.0 - 1.0 / alpha) * (rate - renyi_info),
        p,
        inner_residual: worst_inner,
        outer_gap: gap / LN2,
        converged: all_inner && gap <= RENYI_STATIONARITY,
    })
}

/// Sibson's closed form for commuting states, α/(α−1) log₂ Σ_y (Σ_x p_x W(y|x)^α)^{1/α}.
pub fn sibson_information(w: &[Vec<f64>], p: &[f64], alpha: f64) -> f64 {
    let m = w[0].len();
    let s: f64 = (0..m)
        .map(|y| p.iter().zip(w).map(|(pi, row)| pi * row[y].powf(alpha)).sum::<f64>().powf(1.0 / alpha))
        .sum();
    alpha / (alpha - 1.0) * s.log2()
}

// ---- weak converse objectives --------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeakConverse {
    /// I(XR;B)_τ
    pub nonadaptive: f64,
    /// I(X;B|R)_τ − I(X;B′|R)_ρ
    pub adaptive: f64,
}

fn cq_joint(p: &[f64], states: &[CMat]) -> Result<CMat> {
    Ok(CQEnsemble::new(p.to_vec(), states.to_vec())?.cq_state())
}

/// Pointwise weak-converse objectives for inputs φ^x on R ⊗ B′ (one per
/// symbol, `dr` the reference size).
pub fn weak_converse_objectives(cell: &MemoryCell, p: &[f64], inputs: &[CMat], dr: usize) -> Result<WeakConverse> {
    let n = cell.len();
    if p.len() != n || inputs.len() != n {
        return Err(Error::Shape("one probability and one input per symbol".into()));
    }
    let (din, dout) = (cell.in_dim(), cell.out_dim());
    if inputs.iter().any(|r| r.nrows() != dr * din || r.ncols() != dr * din) {
        return Err(Error::Shape("inputs must live on R ⊗ B′".into()));
    }
    let outs = cell
        .channels
        .iter()
        .zip(inputs)
        .map(|(ch, r)| ch.apply_on(r, &[dr, din], 1))
        .collect::<Result<Vec<_>>>()?;
    let tau = cq_joint(p, &outs)?;
    let rho = cq_joint(p, inputs)?;
    let nonadaptive = mutual_information(&tau, [n * dr, dout], Base::Bits)?;
    // X R B → X B R for I(X;B|R)
    let tau_xbr = permute_systems(&tau, &[n, dr, dout], &[0, 2, 1])?;
    let rho_xbr = permute_systems(&rho, &[n, dr, din], &[0, 2, 1])?;
    let adaptive = conditional_mutual_information(&tau_xbr, [n, dout, dr], Base::Bits)?
        - conditional_mutual_information(&rho_xbr, [n, din, dr], Base::Bits)?;
    Ok(WeakConverse { nonadaptive, adaptive })
}

// ---- private reading --------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PrivateReading {
    /// I(X;L_B B)_ρ
    pub reader: f64,
    /// I(X;E)_ρ
    pub eavesdropper: f64,
    /// reader − eavesdropper
    pub rate: f64,
    /// I(X⟩L_B B)_ω of the purified ensemble.
    pub coherent_info: f64,
}

impl PrivateReading {
    pub fn identity_residual(&self) -> f64 {
        (self.rate - self.coherent_info).abs()
    }
}

/// Wiretap isometries padded to a common environment size.
fn padded_wiretap(cell: &MemoryCell) -> Result<(Vec<CMat>, usize)> {
    let exts: &Vec<IsometricExtension> =
        cell.wiretap.as_ref().ok_or_else(|| Error::Invalid("cell has no wiretap extensions".into()))?;
    let e = exts.iter().map(|x| x.env_dim).max().unwrap_or(1);
    let dout = cell.out_dim();
    let us = exts
        .iter()
        .map(|x| {
            let mut u = CMat::zeros(dout * e, x.in_dim);
            for o in 0..dout {
                for j in 0..x.env_dim {
                    for i in 0..x.in_dim {
                        u[(o * e + j, i)] = x.u[(o * x.env_dim + j, i)];
                    }
                }
            }
            u
        })
        .collect();
    Ok((us, e))
}

/// n = 1 non-adaptive private reading rate I(X;L_B B) − I(X;E) for a pure
/// input ψ on L_B ⊗ B′, together with I(X⟩L_B B) of the coherent version
/// Σ_x √p_x |x⟩ ⊗ (1 ⊗ U^x)|ψ⟩. The two agree for pure inputs.
pub fn private_reading_rate_n1(cell: &MemoryCell, p: &[f64], psi: &CMat, dl: usize) -> Result<PrivateReading> {
    let n = cell.len();
    let (din, dout) = (cell.in_dim(), cell.out_dim());
    if p.len() != n {
        return Err(Error::Shape("one probability per symbol".into()));
    }
    if psi.ncols() != 1 || psi.nrows() != dl * din {
        return Err(Error::Shape("input must be a ket on L_B ⊗ B′".into()));
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Invalid(format!("input ket has norm {norm}")));
    }
    let (us, e) = padded_wiretap(cell)?;
    let branches: Vec<CMat> = us.iter().map(|u| kron(&eye(dl), u) * psi).collect();
    let dims = [dl, dout, e];
    let lb = branches
        .iter()
        .map(|b| partial_trace(&proj(b), &dims, &[0, 1]))
        .collect::<Result<Vec<_>>>()?;
    let env = branches
        .iter()
        .map(|b| partial_trace(&proj(b), &dims, &[2]))
        .collect::<Result<Vec<_>>>()?;
    let reader = crate::infomeasures::holevo(&CQEnsemble::new(p.to_vec(), lb.clone())?, Base::Bits)?;
    let eavesdropper = crate::infomeasures::holevo(&CQEnsemble::new(p.to_vec(), env)?, Base::Bits)?;

    let block = dl * dout * e;
    let mut omega = CMat::zeros(n * block, 1);
    for (x, b) in branches.iter().enumerate() {
        omega.view_mut((x * block, 0), (block, 1)).copy_from(&(b * C64::new(p[x].max(0.0).sqrt(), 0.0)));
    }
    let w_xlb = partial_trace(&proj(&omega), &[n, dl * dout, e], &[0, 1])?;
    let w_lb = partial_trace(&w_xlb, &[n, dl * dout], &[1])?;
    let coherent_info = entropy(&w_lb, Base::Bits)? - entropy(&w_xlb, Base::Bits)?;
    Ok(PrivateReading { reader, eavesdropper, rate: reader - eavesdropper, coherent_info })
}

/// I(X⟩L_B B)_ω alone.
pub fn coherent_info_rate(cell: &MemoryCell, p: &[f64], psi: &CMat, dl: usize) -> Result<f64> {
    Ok(private_reading_rate_n1(cell, p, psi, dl)?.coherent_info)
}

/// The qudit erasure wiretap cell {U_erasure · σ_g} over the d² Heisenberg–Weyl shifts.
pub fn erasure_wiretap_cell(d: usize, q: f64) -> Result<MemoryCell> {
    MemoryCell::rotated_wiretap(&crate::qcore::erasure_wiretap_isometry(d, q)?, &crate::qcore::hw_group(d))
}

// ---- zero-error certificate --------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ZeroErrorReport {
    pub min_eig_p: f64,
    /// ‖Σ α_jk (A^y_j)†A^x_k − P‖ over both orderings of x ≠ y.
    pub cross_residual: f64,
    /// ‖Σ_j (A^x_j)†A^x_j − 1‖ over x.
    pub diagonal_residual: f64,
    pub holds: bool,
}

/// P = |00⟩⟨00| + |01⟩⟨01| + |11⟩⟨11| + |1−⟩⟨1−|.
pub fn zero_error_p() -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let k = |i| linalg::ket(2, i);
    let minus = linalg::from_real(2, 1, &[s, -s]);
    proj(&kron(&k(0), &k(0))) + proj(&kron(&k(0), &k(1))) + proj(&kron(&k(1), &k(1))) + proj(&kron(&k(1), &minus))
}

/// Coefficients α_jk for (A^2_j)† A^1_k.
pub fn zero_error_alpha() -> CMat {
    let r2 = std::f64::consts::SQRT_2;
    let mut a = CMat::zeros(5, 5);
    a[(0, 0)] = C64::new(r2, 0.0);
    a[(1, 1)] = C64::new(r2, 0.0);
    a[(2, 4)] = C64::new(1.0, 0.0);
    a[(3, 2)] = C64::new(1.0, 0.0);
    a[(3, 3)] = C64::new(-2.0 * r2, 0.0);
    a
}

fn kraus_sum(alpha: &CMat, left: &[CMat], right: &[CMat]) -> CMat {
    let d = right[0].ncols();
    let mut s = CMat::zeros(d, d);
    for (j, a) in left.iter().enumerate() {
        for (k, b) in right.iter().enumerate() {
            let c = alpha[(j, k)];
            if c != C64::new(0.0, 0.0) {
                s += a.adjoint() * b * c;
            }
        }
    }
    s
}

/// Verifies the operator identities showing the two-channel cell cannot be
/// read with zero error non-adaptively.
pub fn zero_error_certificate() -> ZeroErrorReport {
    let (a1, a2) = crate::qcore::zero_error_pair();
    let p = zero_error_p();
    let alpha = zero_error_alpha();
    let cross = [
        max_abs(&(kraus_sum(&alpha, &a2.kraus, &a1.kraus) - &p)),
        max_abs(&(kraus_sum(&alpha.adjoint(), &a1.kraus, &a2.kraus) - &p)),
    ];
    let id = CMat::identity(5, 5);
    let diag = [
        max_abs(&(kraus_sum(&id, &a1.kraus, &a1.kraus) - eye(4))),
        max_abs(&(kraus_sum(&id, &a2.kraus, &a2.kraus) - eye(4))),
    ];
    let min_eig_p = linalg::lambda_min(&p);
    let cross_residual = cross[0].max(cross[1]);
    let diagonal_residual = diag[0].max(diag[1]);
    ZeroErrorReport {
        min_eig_p,
        cross_residual,
        diagonal_residual,
        holds: min_eig_p > 0.0 && cross_residual <= 1e-10 && diagonal_residual <= 1e-10,
    }
}

// ---- incognito and covert reading ---------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(tag = "cell", rename_all = "lowercase")]
pub enum SecurePreset {
    /// {depolarizing(d, 1 − η_x)}
    Depolarizing { d: usize, eta0: f64, eta1: f64 },
    /// {gadc(η_x, θ)}
    Gadc { theta: f64, eta0: f64, eta1: f64 },
}

impl SecurePreset {
    pub fn channels(&self) -> Result<(KrausChannel, KrausChannel)> {
        match *self {
            SecurePreset::Depolarizing { d, eta0, eta1 } => {
                if d < 2 {
                    return Err(Error::Domain("depolarizing preset needs d ≥ 2".into()));
                }
                for eta in [eta0, eta1] {
                    if !(0.0..=1.0).contains(&eta) {
                        return Err(Error::Domain(format!("η = {eta} not in [0,1]")));
                    }
                }
                Ok((depolarizing(d, 1.0 - eta0)?, depolarizing(d, 1.0 - eta1)?))
            }
            SecurePreset::Gadc { theta, eta0, eta1 } => Ok((gadc(eta0, theta)?, gadc(eta1, theta)?)),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SecureReading {
    /// D(ω_RB‖ω⁰_RB), bits per site.
    pub d_i: f64,
    /// D(ω_E‖ω⁰_E), bits per site.
    pub d_c: f64,
    pub n_d_i: f64,
    pub n_d_c: f64,
    /// D_I from the Bell-diagonal eigenvalues, depolarizing presets only.
    pub d_i_closed_form: Option<f64>,
}

/// Per-site relative entropies between the mixed codeword output
/// q ω¹ + (1−q) ω⁰ and the blank output ω⁰ under maximally entangled probes,
/// on the reader's port (R B) and on the environment (E).
pub fn secure_reading_deltas(preset: SecurePreset, q: f64, n: usize) -> Result<SecureReading> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("q = {q} not in [0,1]")));
    }
    if n == 0 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    let (m0, m1) = preset.channels()?;
    let mix = |a: &CMat, b: &CMat| a * C64::new(1.0 - q, 0.0) + b * C64::new(q, 0.0);
    let rb0 = choi_of(&m0).state();
    let rb1 = choi_of(&m1).state();
    let d_i = relative_entropy(&mix(&rb0, &rb1), &rb0, Base::Bits)?.expect_finite("D_I")?;
    let pi = eye(m0.in_dim) / C64::new(m0.in_dim as f64, 0.0);
    let e0 = m0.complementary().apply(&pi)?;
    let e1 = m1.complementary().apply(&pi)?;
    let d_c = relative_entropy(&mix(&e0, &e1), &e0, Base::Bits)?.expect_finite("D_C")?;
    let d_i_closed_form = match preset {
        SecurePreset::Depolarizing { d, eta0, eta1 } => Some(depolarizing_incognito_closed_form(d, eta0, eta1, q)),
        SecurePreset::Gadc { .. } => None,
    };
    Ok(SecureReading { d_i, d_c, n_d_i: n as f64 * d_i, n_d_c: n as f64 * d_c, d_i_closed_form })
}

/// Both outputs are Bell diagonal with λ₁ = η + (1−η)/d² once and
/// λ₂ = (1−η)/d² with multiplicity d² − 1.
pub fn depolarizing_incognito_closed_form(d: usize, eta0: f64, eta1: f64, q: f64) -> f64 {
    let d2 = (d * d) as f64;
    let l = |eta: f64| (eta + (1.0 - eta) / d2, (1.0 - eta) / d2);
    let (a0, b0) = l(eta0);
    let (a1, b1) = l(eta1);
    let (am, bm) = ((1.0 - q) * a0 + q * a1, (1.0 - q) * b0 + q * b1);
    let term = |m: f64, z: f64| if m <= 0.0 { 0.0 } else { m * (m / z).log2() };
    term(am, a0) + (d2 - 1.0) * term(bm, b0)
}

/// Φ on R ⊗ B′ for the reading inputs.
pub fn phi_input(d: usize) -> CMat {
    max_entangled(d)
}
