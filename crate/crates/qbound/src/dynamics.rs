//! Lindblad evolution, entropy rates, Markovianity witnesses and the
//! diamond-norm measure of non-unitarity. Entropies here are in nats.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::infomeasures::{entropy, relative_entropy, Base};
use crate::linalg::{self, eigh, eye, hermitian_part, logm, max_abs, trace_norm, CMat, C64};
use crate::par;
use crate::qcore::{gadc, KrausChannel};
use crate::rains::need_optimal;
use crate::sdp::model::{Affine, Lmi};

/// Support projectors along trajectories drop eigenvalues below this times λ_max.
pub const PROJECTOR_CUT: f64 = 1e-10;
/// RK4 local error target (max-entry norm).
pub const EVOLVE_TOL: f64 = 1e-9;
const PSD_FLOOR: f64 = -1e-7;

pub type MatFn = Arc<dyn Fn(f64) -> CMat + Send + Sync>;
pub type RateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct LindbladTerm {
    pub rate: RateFn,
    pub op: MatFn,
}

/// L_t(ρ) = −i[H(t),ρ] + Σ_i γ_i(t)(A_i ρ A_i† − ½{A_i†A_i, ρ}).
#[derive(Clone)]
pub struct LindbladGenerator {
    pub dim: usize,
    pub hamiltonian: Option<MatFn>,
    pub terms: Vec<LindbladTerm>,
}

impl fmt::Debug for LindbladGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LindbladGenerator")
            .field("dim", &self.dim)
            .field("hamiltonian", &self.hamiltonian.is_some())
            .field("terms", &self.terms.len())
            .finish()
    }
}

impl LindbladGenerator {
    pub fn new(dim: usize) -> Self {
        LindbladGenerator { dim, hamiltonian: None, terms: vec![] }
    }

    pub fn with_hamiltonian(mut self, h: MatFn) -> Self {
        self.hamiltonian = Some(h);
        self
    }

    pub fn with_constant_hamiltonian(self, h: CMat) -> Result<Self> {
        self.check_op(&h)?;
        if linalg::hermitian_residual(&h) > 1e-10 {
            return Err(Error::NotHermitian(linalg::hermitian_residual(&h)));
        }
        Ok(self.with_hamiltonian(Arc::new(move |_| h.clone())))
    }

    pub fn with_term(mut self, rate: RateFn, op: MatFn) -> Self {
        self.terms.push(LindbladTerm { rate, op });
        self
    }

    pub fn with_constant_term(self, rate: f64, op: CMat) -> Result<Self> {
        self.check_op(&op)?;
        Ok(self.with_term(Arc::new(move |_| rate), Arc::new(move |_| op.clone())))
    }

    fn check_op(&self, m: &CMat) -> Result<()> {
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::Shape(format!("generator operator must be {0}×{0}", self.dim)));
        }
        Ok(())
    }

    fn ops_at(&self, t: f64) -> Result<(Option<CMat>, Vec<(f64, CMat)>)> {
        let h = self.hamiltonian.as_ref().map(|h| h(t));
        if let Some(h) = &h {
            self.check_op(h)?;
        }
        let mut ts = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            let a = (term.op)(t);
            self.check_op(&a)?;
            ts.push(((term.rate)(t), a));
        }
        Ok((h, ts))
    }

    pub fn apply(&self, t: f64, rho: &CMat) -> Result<CMat> {
        self.check_op(rho)?;
        let (h, ts) = self.ops_at(t)?;
        let mut out = CMat::zeros(self.dim, self.dim);
        if let Some(h) = h {
            out += (&h * rho - rho * &h) * C64::new(0.0, -1.0);
        }
        for (g, a) in ts {
            let ad = a.adjoint();
            let n = &ad * &a;
            out += (&a * rho * &ad - (&n * rho + rho * &n).scale(0.5)).scale(g);
        }
        Ok(out)
    }

    /// Heisenberg-picture generator L_t†.
    pub fn adjoint_apply(&self, t: f64, x: &CMat) -> Result<CMat> {
        self.check_op(x)?;
        let (h, ts) = self.ops_at(t)?;
        let mut out = CMat::zeros(self.dim, self.dim);
        if let Some(h) = h {
            out += (&h * x - x * &h) * C64::new(0.0, 1.0);
        }
        for (g, a) in ts {
            let ad = a.adjoint();
            let n = &ad * &a;
            out += (&ad * x * &a - (&n * x + x * &n).scale(0.5)).scale(g);
        }
        Ok(out)
    }

    /// Matrix of L_t acting on column-stacked vec(ρ).
    pub fn superoperator(&self, t: f64) -> Result<CMat> {
        let d = self.dim;
        let mut s = CMat::zeros(d * d, d * d);
        for k in 0..d * d {
            let mut e = CMat::zeros(d, d);
            e[(k % d, k / d)] = C64::new(1.0, 0.0);
            let col = self.apply(t, &e)?;
            for (r, v) in col.iter().enumerate() {
                s[(r, k)] = *v;
            }
        }
        Ok(s)
    }

    pub fn is_cp_divisible_at(&self, t: f64) -> bool {
        self.terms.iter().all(|term| (term.rate)(t) >= 0.0)
    }

    /// max |L_t(1)|; zero for unital dynamics.
    pub fn unital_residual(&self, t: f64) -> Result<f64> {
        Ok(max_abs(&self.apply(t, &eye(self.dim))?))
    }
}

fn pauli(k: usize) -> CMat {
    let (o, z, i) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    match k {
        1 => CMat::from_row_slice(2, 2, &[z, o, o, z]),
        2 => CMat::from_row_slice(2, 2, &[z, -i, i, z]),
        _ => CMat::from_row_slice(2, 2, &[o, z, z, -o]),
    }
}

/// Qubit pure decoherence, L_t(ρ) = γ(t)/2 (σ_z ρ σ_z − ρ).
pub fn pure_decoherence(gamma: RateFn) -> LindbladGenerator {
    let z = pauli(3);
    LindbladGenerator::new(2).with_term(Arc::new(move |t| 0.5 * gamma(t)), Arc::new(move |_| z.clone()))
}

/// Random generator with `n_terms` jump operators. Rates are
/// a + b sin(c t); with `cp_divisible` they stay nonnegative.
pub fn random_generator(d: usize, n_terms: usize, cp_divisible: bool, rng: &mut crate::random::Rng) -> LindbladGenerator {
    let h = crate::random::hermitian(d, rng);
    let mut gen = LindbladGenerator::new(d).with_constant_hamiltonian(h).expect("shape");
    for _ in 0..n_terms {
        let a = crate::random::ginibre(d, d, rng).unscale((d as f64).sqrt());
        let base = crate::random::uniform(rng, 0.2, 1.0);
        let amp = if cp_divisible { crate::random::uniform(rng, 0.0, base) } else { crate::random::uniform(rng, base, 2.0 * base + 0.5) };
        let freq = crate::random::uniform(rng, 0.5, 3.0);
        gen = gen.with_term(Arc::new(move |t| base + amp * (freq * t).sin()), Arc::new(move |_| a.clone()));
    }
    gen
}

// ---- evolution ------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<CMat>,
    /// ρ̇ = L_t(ρ_t) at each grid point.
    #[serde(skip)]
    pub derivatives: Vec<CMat>,
}

fn rk4(gen: &LindbladGenerator, t: f64, y: &CMat, h: f64) -> Result<CMat> {
    let k1 = gen.apply(t, y)?;
    let k2 = gen.apply(t + 0.5 * h, &(y + k1.scale(0.5 * h)))?;
    let k3 = gen.apply(t + 0.5 * h, &(y + k2.scale(0.5 * h)))?;
    let k4 = gen.apply(t + h, &(y + k3.scale(h)))?;
    Ok(y + (k1 + (k2 + k3).scale(2.0) + k4).scale(h / 6.0))
}

pub fn evolve(gen: &LindbladGenerator, rho0: &CMat, t_grid: &[f64]) -> Result<Trajectory> {
    evolve_with(gen, rho0, t_grid, EVOLVE_TOL)
}

/// Adaptive RK4 with step doubling; the grid only fixes output times.
pub fn evolve_with(gen: &LindbladGenerator, rho0: &CMat, t_grid: &[f64], tol: f64) -> Result<Trajectory> {
    gen.check_op(rho0)?;
    if t_grid.is_empty() {
        return Err(Error::Domain("empty time grid".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("time grid must be finite and strictly increasing".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let mut y = hermitian_part(rho0);
    let mut t = t_grid[0];
    let mut h = (t_grid.last().unwrap() - t).max(1e-3) / 64.0;
    let mut states = Vec::with_capacity(t_grid.len());
    let mut derivs = Vec::with_capacity(t_grid.len());
    states.push(y.clone());
    derivs.push(gen.apply(t, &y)?);
    for &target in &t_grid[1..] {
        while t < target {
            let step = h.min(target - t);
            let full = rk4(gen, t, &y, step)?;
            let mid = rk4(gen, t, &y, 0.5 * step)?;
            let half = rk4(gen, t + 0.5 * step, &mid, 0.5 * step)?;
            let err = max_abs(&(&full - &half)) / 15.0;
            let factor = if err == 0.0 { 4.0 } else { (0.9 * (tol / err).powf(0.2)).clamp(0.1, 4.0) };
            if err <= tol {
                // local extrapolation of the doubled step
                y = hermitian_part(&(&half + (&half - &full).unscale(15.0)));
                t = if target - (t + step) <= 1e-14 * target.abs().max(1.0) { target } else { t + step };
                let lo = linalg::lambda_min(&y);
                if lo < PSD_FLOOR {
                    return Err(Error::NoConvergence(format!("state left the PSD cone at t={t:.6} (λ_min {lo:.3e})")));
                }
                if step == h {
                    h *= factor;
                }
            } else {
                h = step * factor;
                if h < 1e-13 * t.abs().max(1.0) {
                    return Err(Error::NoConvergence(format!("step size underflow at t={t:.6}")));
                }
            }
        }
        states.push(y.clone());
        derivs.push(gen.apply(t, &y)?);
    }
    Ok(Trajectory { times: t_grid.to_vec(), states, derivatives: derivs })
}

// ---- entropy rate and Markov bounds ------------------------------------------

/// dS/dt = −Tr{ρ̇ log ρ}, log taken on the support of ρ.
pub fn entropy_rate(rho: &CMat, rho_dot: &CMat) -> Result<f64> {
    let l = logm(&hermitian_part(rho))?;
    Ok(-linalg::tr_prod_re(&hermitian_part(rho_dot), &l))
}

fn support_projector(rho: &CMat) -> Result<(CMat, bool)> {
    let e = eigh(&hermitian_part(rho))?;
    let cut = e.cut(PROJECTOR_CUT);
    Ok((e.support_projector(PROJECTOR_CUT), e.min() > cut))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MarkovBound {
    /// −Tr{Π_t L_t†(ρ_t)}
    pub projector_form: f64,
    /// Σ_i γ_i(t) ⟨[A_i†, A_i]⟩, only for full-rank ρ_t.
    pub commutator_form: Option<f64>,
}

/// Lower bound on dS/dt valid whenever the dynamics are CP-divisible.
pub fn markov_lower_bound(rho: &CMat, gen: &LindbladGenerator, t: f64) -> Result<MarkovBound> {
    let (pi, full) = support_projector(rho)?;
    let projector_form = -linalg::tr_prod_re(&pi, &gen.adjoint_apply(t, rho)?);
    let commutator_form = if full {
        let (_, ts) = gen.ops_at(t)?;
        Some(ts.iter().map(|(g, a)| {
            let comm = a.adjoint() * a - a * a.adjoint();
            g * linalg::tr_prod_re(rho, &comm)
        }).sum())
    } else {
        None
    };
    Ok(MarkovBound { projector_form, commutator_form })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaussianPreset {
    Amplifier,
    Lossy,
    AdditiveNoise,
}

/// (γ₊, γ₋) for thermal noise with mean photon number n.
pub fn gaussian_rates(preset: GaussianPreset, n: f64) -> (f64, f64) {
    match preset {
        GaussianPreset::Amplifier => (n + 1.0, n),
        GaussianPreset::Lossy => (n, n + 1.0),
        GaussianPreset::AdditiveNoise => (n, n),
    }
}

/// γ₊ − γ₋: the single-mode Markov bound on dS/dt for full-rank states.
pub fn gaussian_markov_bound(gamma_plus: f64, gamma_minus: f64) -> f64 {
    gamma_plus - gamma_minus
}

// ---- witnesses ------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct WitnessSample {
    pub t: f64,
    pub entropy: f64,
    pub rate: f64,
    pub lower_bound: f64,
    /// dS/dt + Tr{Π L†(ρ)}
    pub f_generator: f64,
    /// dS/dt + d/dε Tr{Π M_ε†∘M_ε(ρ)} at ε = 0
    pub f: f64,
}

pub fn witness_f(traj: &Trajectory, gen: &LindbladGenerator) -> Result<Vec<WitnessSample>> {
    let mut out = Vec::with_capacity(traj.times.len());
    for ((&t, rho), dot) in traj.times.iter().zip(&traj.states).zip(&traj.derivatives) {
        let (pi, _) = support_projector(rho)?;
        let rate = entropy_rate(rho, dot)?;
        let lb = -linalg::tr_prod_re(&pi, &gen.adjoint_apply(t, rho)?);
        let forward = linalg::tr_prod_re(&pi, dot);
        out.push(WitnessSample {
            t,
            entropy: entropy(rho, Base::Nats)?,
            rate,
            lower_bound: lb,
            f_generator: rate - lb,
            f: rate + forward - lb,
        });
    }
    Ok(out)
}

pub const WITNESS_CSV_HEADER: &str = "t,S,dS/dt,lower_bound,f(t)";

pub fn witness_csv(samples: &[WitnessSample]) -> String {
    let mut s = String::from(WITNESS_CSV_HEADER);
    s.push('\n');
    for w in samples {
        s.push_str(&format!("{},{},{},{},{}\n", w.t, w.entropy, w.rate, w.lower_bound, w.f));
    }
    s
}

/// ∫ |min(f, 0)| dt by the trapezoid rule.
pub fn negative_area(ts: &[f64], fs: &[f64]) -> f64 {
    ts.windows(2)
        .zip(fs.windows(2))
        .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0].min(0.0).abs() + f[1].min(0.0).abs()))
        .sum()
}

fn positive_area(ts: &[f64], fs: &[f64]) -> f64 {
    ts.windows(2).zip(fs.windows(2)).map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0].max(0.0) + f[1].max(0.0))).sum()
}

/// ½(1 + r n̂·σ⃗) with n̂ at polar angle θ and azimuth φ.
pub fn bloch_state(theta: f64, phi: f64, r: f64) -> CMat {
    let n = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
    let mut m = eye(2);
    for (k, nk) in n.iter().enumerate() {
        m += pauli(k + 1).scale(r * nk);
    }
    m.scale(0.5)
}

const GRID_THETA: usize = 6;
const GRID_PHI: usize = 12;

fn bloch_angles() -> Vec<(f64, f64)> {
    let pi = std::f64::consts::PI;
    let mut v = Vec::with_capacity(GRID_THETA * GRID_PHI);
    for i in 0..GRID_THETA {
        for j in 0..GRID_PHI {
            v.push(((i as f64 + 0.5) * pi / GRID_THETA as f64, 2.0 * pi * j as f64 / GRID_PHI as f64));
        }
    }
    v
}

/// Qubit initial states: a 6×12 grid of pure states, the same points mixed
/// half-and-half with 1/2, and 1/2 itself.
pub fn default_initial_grid() -> Vec<CMat> {
    let angles = bloch_angles();
    let mut v: Vec<CMat> = angles.iter().map(|&(t, p)| bloch_state(t, p, 1.0)).collect();
    v.extend(angles.iter().map(|&(t, p)| bloch_state(t, p, 0.5)));
    v.push(eye(2).scale(0.5));
    v
}

/// Orthogonal pure-state pairs over the same Bloch grid.
pub fn default_pair_grid() -> Vec<(CMat, CMat)> {
    let pi = std::f64::consts::PI;
    bloch_angles()
        .into_iter()
        .map(|(t, p)| (bloch_state(t, p, 1.0), bloch_state(pi - t, p + pi, 1.0)))
        .collect()
}

/// Grid maxima of the two non-Markovianity measures. These are lower
/// bounds on the maxima over all initial states.
#[derive(Debug, Clone, Serialize)]
pub struct NonMarkovMeasures {
    /// Built from dS/dt + Tr{Π L†(ρ)}.
    pub generator: f64,
    /// Built from f(t).
    pub channel: f64,
    pub argmax_generator: usize,
    pub argmax_channel: usize,
    pub grid_size: usize,
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &x)| if x > b.1 { (i, x) } else { b })
}

pub fn nonmarkov_measures(gen: &LindbladGenerator, initial: &[CMat], t_grid: &[f64]) -> Result<NonMarkovMeasures> {
    if initial.is_empty() {
        return Err(Error::Domain("empty initial-state grid".into()));
    }
    let per: Vec<Result<(f64, f64)>> = par::map(initial, |rho0| {
        let traj = evolve(gen, rho0, t_grid)?;
        let w = witness_f(&traj, gen)?;
        let fl: Vec<f64> = w.iter().map(|s| s.f_generator).collect();
        let fm: Vec<f64> = w.iter().map(|s| s.f).collect();
        Ok((negative_area(t_grid, &fl), negative_area(t_grid, &fm)))
    });
    let per: Vec<(f64, f64)> = per.into_iter().collect::<Result<_>>()?;
    let (ig, g) = argmax(&per.iter().map(|p| p.0).collect::<Vec<_>>());
    let (ic, c) = argmax(&per.iter().map(|p| p.1).collect::<Vec<_>>());
    Ok(NonMarkovMeasures { generator: g, channel: c, argmax_generator: ig, argmax_channel: ic, grid_size: initial.len() })
}

// ---- channel families -------------------------------------------------------

/// A family of dynamical maps M_t = M_{t,0}.
pub trait ChannelFamily: Sync {
    fn dim(&self) -> usize;
    fn at(&self, t: f64) -> Result<KrausChannel>;
    /// The intermediate map M_{t+ε,t}.
    fn step(&self, t: f64, eps: f64) -> Result<KrausChannel>;
}

/// Anything that produces ρ(t) from ρ(0) on a time grid.
pub trait StateFamily: Sync {
    fn dim(&self) -> usize;
    fn states(&self, rho0: &CMat, times: &[f64]) -> Result<Vec<CMat>>;
}

impl StateFamily for LindbladGenerator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn states(&self, rho0: &CMat, times: &[f64]) -> Result<Vec<CMat>> {
        Ok(evolve(self, rho0, times)?.states)
    }
}

/// GADC dynamics with p_t = cos²(ωt), η_t = e^{−t}. Increments are taken to
/// be M_ε, which is the model behind the closed-form witness.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GadcFamily {
    pub omega: f64,
}

pub fn gadc_family(omega: f64) -> GadcFamily {
    GadcFamily { omega }
}

impl GadcFamily {
    pub fn p(&self, t: f64) -> f64 {
        (self.omega * t).cos().powi(2)
    }

    pub fn eta(&self, t: f64) -> f64 {
        (-t).exp()
    }

    /// W_t = cos(2ωt)(1 − e^{−t}); ρ_t = diag(1+W_t, 1−W_t)/2 from ρ_0 = 1/2.
    pub fn w(&self, t: f64) -> f64 {
        (2.0 * self.omega * t).cos() * (1.0 - (-t).exp())
    }

    pub fn dw(&self, t: f64) -> f64 {
        let a = 2.0 * self.omega * t;
        -2.0 * self.omega * a.sin() * (1.0 - (-t).exp()) + a.cos() * (-t).exp()
    }

    pub fn entropy(&self, t: f64) -> f64 {
        let w = self.w(t);
        -0.5 * ((1.0 + w) * ((1.0 + w) / 2.0).ln() + (1.0 - w) * ((1.0 - w) / 2.0).ln())
    }

    pub fn entropy_rate(&self, t: f64) -> f64 {
        let w = self.w(t);
        0.5 * self.dw(t) * ((1.0 - w) / (1.0 + w)).ln()
    }

    /// Closed-form witness for ρ_0 = 1/2.
    pub fn f(&self, t: f64) -> f64 {
        self.entropy_rate(t) + self.w(t)
    }
}

impl ChannelFamily for GadcFamily {
    fn dim(&self) -> usize {
        2
    }

    fn at(&self, t: f64) -> Result<KrausChannel> {
        if t < 0.0 {
            return Err(Error::Domain("GADC family is defined for t ≥ 0".into()));
        }
        gadc(self.eta(t), self.p(t))
    }

    fn step(&self, _t: f64, eps: f64) -> Result<KrausChannel> {
        self.at(eps)
    }
}

impl StateFamily for GadcFamily {
    fn dim(&self) -> usize {
        2
    }

    fn states(&self, rho0: &CMat, times: &[f64]) -> Result<Vec<CMat>> {
        times.iter().map(|&t| self.at(t)?.apply(rho0)).collect()
    }
}

const STATE_FD_STEP: f64 = 1e-3;
const EPS_FD_STEP: f64 = 1e-5;

/// ρ̇_t by a fourth-order stencil (forward near t = 0).
fn family_derivative(fam: &dyn ChannelFamily, rho0: &CMat, t: f64) -> Result<CMat> {
    let h = STATE_FD_STEP;
    let at = |s: f64| -> Result<CMat> { fam.at(s)?.apply(rho0) };
    if t >= 2.0 * h {
        let v = (at(t - 2.0 * h)? - at(t + 2.0 * h)? + (at(t + h)? - at(t - h)?).scale(8.0)).unscale(12.0 * h);
        Ok(v)
    } else {
        let f: Vec<CMat> = (0..5).map(|k| at(t + k as f64 * h)).collect::<Result<_>>()?;
        Ok((f[0].scale(-25.0) + f[1].scale(48.0) - f[2].scale(36.0) + f[3].scale(16.0) - f[4].scale(3.0)).unscale(12.0 * h))
    }
}

/// d/dε Tr{Π_t M_ε†∘M_ε(ρ_t)} at ε = 0⁺ by a one-sided Richardson difference.
pub fn increment_derivative(fam: &dyn ChannelFamily, rho_t: &CMat, t: f64) -> Result<f64> {
    let (pi, _) = support_projector(rho_t)?;
    let g = |e: f64| -> Result<f64> {
        let m = fam.step(t, e)?;
        Ok(linalg::tr_prod_re(&pi, &m.adjoint_apply(&m.apply(rho_t)?)?))
    };
    let g0 = linalg::tr_prod_re(&pi, rho_t);
    let h = EPS_FD_STEP;
    let d1 = (g(h)? - g0) / h;
    let d2 = (g(0.5 * h)? - g0) / (0.5 * h);
    Ok(2.0 * d2 - d1)
}

/// f(t) for a channel family, evaluated numerically.
pub fn witness_f_family(fam: &dyn ChannelFamily, rho0: &CMat, times: &[f64]) -> Result<Vec<f64>> {
    times
        .iter()
        .map(|&t| {
            let rho_t = fam.at(t)?.apply(rho0)?;
            let dot = family_derivative(fam, rho0, t)?;
            Ok(entropy_rate(&rho_t, &dot)? + increment_derivative(fam, &rho_t, t)?)
        })
        .collect()
}

/// Grid maximum of ∫|min(f,0)| over initial states; returns (value, argmax).
pub fn nonmarkov_measure_family(fam: &dyn ChannelFamily, initial: &[CMat], times: &[f64]) -> Result<(f64, usize)> {
    if initial.is_empty() {
        return Err(Error::Domain("empty initial-state grid".into()));
    }
    let areas: Vec<Result<f64>> = par::map(initial, |r| Ok(negative_area(times, &witness_f_family(fam, r, times)?)));
    let areas: Vec<f64> = areas.into_iter().collect::<Result<_>>()?;
    let (i, v) = argmax(&areas);
    Ok((v, i))
}

#[derive(Debug, Clone, Serialize)]
pub struct BlpResult {
    /// Grid maximum; a lower bound on the BLP measure.
    pub value: f64,
    pub best_pair: usize,
}

/// ∫_{σ>0} σ dt with σ the centered-difference derivative of the trace distance.
pub fn blp_measure(fam: &dyn StateFamily, pairs: &[(CMat, CMat)], times: &[f64]) -> Result<BlpResult> {
    if pairs.is_empty() || times.len() < 2 {
        return Err(Error::Domain("BLP needs at least one pair and two times".into()));
    }
    let per: Vec<Result<f64>> = par::map(pairs, |(a, b)| {
        let ra = fam.states(a, times)?;
        let rb = fam.states(b, times)?;
        let d: Vec<f64> = ra.iter().zip(&rb).map(|(x, y)| 0.5 * trace_norm(&(x - y))).collect();
        let n = d.len();
        let sigma: Vec<f64> = (0..n)
            .map(|i| {
                let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
                (d[hi] - d[lo]) / (times[hi] - times[lo])
            })
            .collect();
        Ok(positive_area(times, &sigma))
    });
    let per: Vec<f64> = per.into_iter().collect::<Result<_>>()?;
    let (best_pair, value) = argmax(&per);
    Ok(BlpResult { value, best_pair })
}

// ---- entropy change -----------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct EntropyChange {
    /// S(M(ρ)) − S(ρ), nats.
    pub actual: f64,
    /// D(ρ‖M†∘M(ρ)); None unless M(ρ) > 0.
    pub lower: Option<f64>,
    /// Tr{[ρ − M†∘M(ρ)] log ρ}; None unless M is sub-unital and ρ > 0.
    pub upper: Option<f64>,
    /// ‖ρ − M†∘M(ρ)‖₁ ‖log ρ‖_∞, same preconditions as `upper`.
    pub upper_holder: Option<f64>,
}

impl EntropyChange {
    pub fn holds(&self, slack: f64) -> bool {
        self.lower.map_or(true, |l| l <= self.actual + slack)
            && self.upper.map_or(true, |u| self.actual <= u + slack)
            && match (self.upper, self.upper_holder) {
                (Some(u), Some(h)) => u <= h + slack,
                _ => true,
            }
    }
}

pub fn entropy_change_bounds(rho: &CMat, ch: &KrausChannel) -> Result<EntropyChange> {
    let out = ch.apply(rho)?;
    let actual = entropy(&out, Base::Nats)? - entropy(rho, Base::Nats)?;
    let back = ch.adjoint_apply(&out)?;
    let (_, out_full) = support_projector(&out)?;
    let lower = if out_full { Some(relative_entropy(rho, &back, Base::Nats)?.value()) } else { None };
    let (_, rho_full) = support_projector(rho)?;
    let (upper, upper_holder) = if rho_full && ch.is_sub_unital(1e-9) {
        let l = logm(&hermitian_part(rho))?;
        let diff = rho - &back;
        let op = linalg::lambda_max(&l).abs().max(linalg::lambda_min(&l).abs());
        (Some(linalg::tr_prod_re(&diff, &l)), Some(trace_norm(&diff) * op))
    } else {
        (None, None)
    };
    Ok(EntropyChange { actual, lower, upper, upper_holder })
}

// ---- diamond norm -------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct DiamondNorm {
    /// Certified upper value (dual program).
    pub value: f64,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

pub const MAX_DIAMOND_DIM: usize = 16;

/// ‖M_a − M_b‖⋄ for two channels with matching dimensions.
pub fn diamond_norm(a: &KrausChannel, b: &KrausChannel, tol: f64) -> Result<DiamondNorm> {
    if a.in_dim != b.in_dim || a.out_dim != b.out_dim {
        return Err(Error::Shape("diamond norm needs channels with equal dimensions".into()));
    }
    let j = a.choi().matrix - b.choi().matrix;
    diamond_norm_choi(&j, a.in_dim, a.out_dim, tol)
}

/// Diamond norm of a trace-annihilating Hermiticity-preserving map given by
/// its Choi operator (input ⊗ output).
///   primal: 2 max ⟨J, W⟩ over 0 ⪯ W ⪯ ρ ⊗ 1
///   dual:   2 min ‖Tr_out Z‖_∞ over Z ⪰ 0, Z ⪰ J
pub fn diamond_norm_choi(j: &CMat, din: usize, dout: usize, tol: f64) -> Result<DiamondNorm> {
    if din > MAX_DIAMOND_DIM || dout > MAX_DIAMOND_DIM {
        return Err(Error::Domain(format!("diamond norm limited to dimension {MAX_DIAMOND_DIM} per side")));
    }
    if j.nrows() != din * dout || !j.is_square() {
        return Err(Error::Shape("Choi operator shape".into()));
    }
    let j = hermitian_part(j);
    let n = din * dout;
    let dims = [din, dout];

    let mut p = Lmi::new();
    let w = p.herm(n).affine();
    let rho = p.density(din);
    p.psd(w.clone());
    p.psd(rho.tensor_identity(&dims, &[0]).sub(&w));
    p.maximize(w.inner(&j).scale(2.0));
    let ps = p.solve(tol)?;
    need_optimal(&ps, "diamond-norm primal")?;

    let mut d = Lmi::new();
    let z = d.herm(n).affine();
    let t = d.scalar();
    d.psd(z.clone());
    d.psd(z.sub(&Affine::constant(&j)));
    d.psd(Affine::scalar_identity(t, din).sub(&z.ptrace(&dims, &[0])));
    d.minimize(crate::sdp::model::Linear::var(t).scale(2.0));
    let ds = d.solve(tol)?;
    need_optimal(&ds, "diamond-norm dual")?;

    Ok(DiamondNorm { value: ds.value, primal: ps.value, dual: ds.value, gap: ds.value - ps.value })
}

/// ‖M‖_⊘ = ‖id − M†∘M‖⋄ for a unital channel.
pub fn nonunitarity(ch: &KrausChannel, tol: f64) -> Result<DiamondNorm> {
    if ch.in_dim != ch.out_dim || !ch.is_unital(1e-9) {
        return Err(Error::Domain("non-unitarity is defined for unital channels".into()));
    }
    let mm = ch.adjoint_map().after(ch)?;
    diamond_norm(&KrausChannel::identity(ch.in_dim), &mm, tol)
}

/// 2q(2−q)(1−1/d²), the closed form for depolarizing channels.
pub fn depolarizing_nonunitarity(d: usize, q: f64) -> f64 {
    2.0 * q * (2.0 - q) * (1.0 - 1.0 / (d * d) as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitarityGapReport {
    pub delta: f64,
    /// ‖M − U‖⋄
    pub distance: f64,
    pub nonunitarity: f64,
    /// √(2δ) + δ
    pub bound: f64,
    /// distance ≤ δ
    pub premise: bool,
    /// premise ⇒ nonunitarity ≤ bound
    pub holds: bool,
}

pub fn unitarity_gap_check(ch: &KrausChannel, u: &CMat, delta: f64, tol: f64) -> Result<UnitarityGapReport> {
    let uc = KrausChannel::unitary(u)?;
    let distance = diamond_norm(ch, &uc, tol)?.value;
    let nu = nonunitarity(ch, tol)?.value;
    let bound = (2.0 * delta).sqrt() + delta;
    let slack = 1e-6;
    let premise = distance <= delta + slack;
    Ok(UnitarityGapReport { delta, distance, nonunitarity: nu, bound, premise, holds: !premise || nu <= bound + slack })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, ket, proj};
    use crate::qcore::depolarizing;
    use crate::random;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn zero_generator_is_constant() {
        let g = LindbladGenerator::new(2);
        let rho = bloch_state(0.3, 1.0, 0.8);
        let tr = evolve(&g, &rho, &[0.0, 1.0, 2.0]).unwrap();
        assert!(tr.states.iter().all(|s| max_abs(&(s - &rho)) < 1e-15));
    }

    #[test]
    fn pure_decoherence_closed_form() {
        let g = pure_decoherence(Arc::new(|_| 1.0));
        let rho = bloch_state(std::f64::consts::FRAC_PI_2, 0.0, 1.0);
        let ts: Vec<f64> = (0..11).map(|k| 0.3 * k as f64).collect();
        let tr = evolve(&g, &rho, &ts).unwrap();
        for (t, s) in ts.iter().zip(&tr.states) {
            assert!(close(s[(0, 1)].re, 0.5 * (-t).exp(), 1e-8), "{t}");
            assert!(close(s[(0, 0)].re, 0.5, 1e-12));
        }
    }

    #[test]
    fn constant_generator_matches_superoperator_exponential() {
        let mut r = random::rng(11);
        let g = random_generator(3, 2, true, &mut r);
        let g = LindbladGenerator { terms: g.terms.iter().map(|t| { let v = (t.rate)(0.0); LindbladTerm { rate: Arc::new(move |_| v), op: t.op.clone() } }).collect(), ..g };
        let rho = random::full_rank_density(3, &mut r);
        let t = 1.3;
        let tr = evolve(&g, &rho, &[0.0, t]).unwrap();
        let s = g.superoperator(0.0).unwrap().scale(t).exp();
        let v = CMat::from_column_slice(9, 1, rho.as_slice());
        let out = s * v;
        let expect = CMat::from_column_slice(3, 3, out.as_slice());
        let err = max_abs(&(&tr.states[1] - expect));
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn trace_preserved_and_adjoint_consistent() {
        let mut r = random::rng(5);
        let g = random_generator(3, 3, false, &mut r);
        for t in [0.0, 0.7, 2.1] {
            let rho = random::full_rank_density(3, &mut r);
            let x = random::hermitian(3, &mut r);
            assert!(g.apply(t, &rho).unwrap().trace().norm() < 1e-12);
            let lhs = linalg::tr_prod_re(&x, &g.apply(t, &rho).unwrap());
            let rhs = linalg::tr_prod_re(&g.adjoint_apply(t, &x).unwrap(), &rho);
            assert!(close(lhs, rhs, 1e-12));
        }
    }

    #[test]
    fn appendix_entropy_rate_examples() {
        for t in [0.3, 1.0, 2.5] {
            let e = (-t as f64).exp();
            let rho = diag(&[1.0 - e, e]);
            let dot = diag(&[e, -e]);
            // derivative of −(1−e^{−t})ln(1−e^{−t}) + t e^{−t}
            let expect = -e * (1.0 - e).ln() - t * e;
            assert!(close(entropy_rate(&rho, &dot).unwrap(), expect, 1e-12));
        }
        let pi = std::f64::consts::PI;
        for t in [0.0, 0.1, 0.25, 0.4, 0.5] {
            let (c, s) = ((pi * t).cos().powi(2), (pi * t).sin().powi(2));
            let rho = diag(&[c, s]);
            let dot = diag(&[-pi * (2.0 * pi * t).sin(), pi * (2.0 * pi * t).sin()]);
            let expect = if c > 1e-12 && s > 1e-12 { pi * (2.0 * pi * t).sin() * (c.ln() - s.ln()) } else { 0.0 };
            assert!(close(entropy_rate(&rho, &dot).unwrap(), expect, 1e-10), "{t}");
        }
        assert_eq!(entropy_rate(&diag(&[0.5, 0.5]), &CMat::zeros(2, 2)).unwrap(), 0.0);
    }

    #[test]
    fn markov_bound_forms_agree_and_presets() {
        let mut r = random::rng(2);
        let g = random_generator(3, 2, true, &mut r);
        let rho = random::full_rank_density(3, &mut r);
        let b = markov_lower_bound(&rho, &g, 0.4).unwrap();
        assert!(close(b.projector_form, b.commutator_form.unwrap(), 1e-9));
        let unital = pure_decoherence(Arc::new(|_| 0.7));
        let b = markov_lower_bound(&bloch_state(0.4, 0.2, 0.6), &unital, 0.0).unwrap();
        assert!(b.projector_form.abs() < 1e-12);
        let (gp, gm) = gaussian_rates(GaussianPreset::Amplifier, 2.0);
        assert_eq!(gaussian_markov_bound(gp, gm), 1.0);
        let (gp, gm) = gaussian_rates(GaussianPreset::Lossy, 2.0);
        assert_eq!(gaussian_markov_bound(gp, gm), -1.0);
    }

    #[test]
    fn gadc_closed_form_matches_numeric() {
        let fam = gadc_family(5.0);
        assert!(fam.f(0.0).abs() < 1e-15);
        let pi2 = eye(2).scale(0.5);
        let ts = [0.05, 0.3, 1.1, 2.7];
        let num = witness_f_family(&fam, &pi2, &ts).unwrap();
        for (t, v) in ts.iter().zip(num) {
            assert!(close(v, fam.f(*t), 1e-6), "{t}: {v} vs {}", fam.f(*t));
        }
        let rho_t = fam.at(0.3).unwrap().apply(&pi2).unwrap();
        assert!(close(increment_derivative(&fam, &rho_t, 0.3).unwrap(), fam.w(0.3), 1e-7));
    }

    #[test]
    fn gadc_state_matches_w() {
        let fam = gadc_family(5.0);
        for t in [0.2, 1.7] {
            let s = fam.at(t).unwrap().apply(&eye(2).scale(0.5)).unwrap();
            assert!(close(s[(0, 0)].re, 0.5 * (1.0 + fam.w(t)), 1e-14));
        }
    }

    #[test]
    fn gadc_omega_zero_is_nonnegative() {
        let fam = gadc_family(0.0);
        assert!((1..=500).all(|k| fam.f(k as f64 * 0.01) >= -1e-8));
    }

    #[test]
    fn blp_examples() {
        let ts: Vec<f64> = (0..=200).map(|k| k as f64 * 0.02).collect();
        let pairs = default_pair_grid();
        let unitary = LindbladGenerator::new(2).with_constant_hamiltonian(pauli(1)).unwrap();
        assert!(blp_measure(&unitary, &pairs[..6], &ts).unwrap().value < 1e-8);
        assert!(blp_measure(&gadc_family(5.0), &pairs, &ts).unwrap().value < 1e-8);
        // Γ(t) = t + sin 2t; |+⟩ vs |−⟩ has distance e^{−Γ}.
        let g = pure_decoherence(Arc::new(|t| 1.0 + 2.0 * (2.0 * t).cos()));
        let plus = bloch_state(std::f64::consts::FRAC_PI_2, 0.0, 1.0);
        let minus = bloch_state(std::f64::consts::FRAC_PI_2, std::f64::consts::PI, 1.0);
        let b = blp_measure(&g, &[(plus, minus)], &ts).unwrap().value;
        let dist = |t: f64| (-(t + (2.0 * t).sin())).exp();
        let fine: Vec<f64> = (0..=40000).map(|k| dist(k as f64 * 1e-4)).collect();
        let exact: f64 = fine.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum();
        assert!(b > 0.05 && close(b, exact, 2e-3 * (1.0 + exact)), "{b} {exact}");
    }

    #[test]
    fn entropy_change_partial_trace_saturates() {
        let mut r = random::rng(8);
        let rho = random::full_rank_density(4, &mut r);
        let ptr = crate::qcore::partial_trace_channel(2, 2);
        let e = entropy_change_bounds(&rho, &ptr).unwrap();
        assert!(close(e.lower.unwrap(), e.actual, 1e-10));
        assert!(e.upper.is_none());
    }

    #[test]
    fn entropy_change_unitary_and_unital() {
        let mut r = random::rng(9);
        let u = random::unitary(2, &mut r);
        let rho = random::full_rank_density(2, &mut r);
        let e = entropy_change_bounds(&rho, &KrausChannel::unitary(&u).unwrap()).unwrap();
        assert!(e.actual.abs() < 1e-12 && e.lower.unwrap().abs() < 1e-10 && e.upper.unwrap().abs() < 1e-10);
        let ch = depolarizing(2, 0.4).unwrap().after(&KrausChannel::unitary(&u).unwrap()).unwrap();
        let e = entropy_change_bounds(&rho, &ch).unwrap();
        assert!(e.holds(1e-9), "{e:?}");
        assert!(e.actual > 0.0);
    }

    #[test]
    fn preparation_channel_exceeds_the_sub_unital_upper_bound() {
        // C → C², 1 ↦ 1/2: M(1) = 1/2 ⪯ 1, yet ΔS = ln 2 while the bound is 0
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let ks = vec![linalg::from_real(2, 1, &[s, 0.0]), linalg::from_real(2, 1, &[0.0, s])];
        let ch = KrausChannel::new(ks).unwrap();
        assert!(ch.is_sub_unital(1e-12) && !ch.is_unital(1e-12));
        let b = entropy_change_bounds(&eye(1), &ch).unwrap();
        assert!(close(b.actual, std::f64::consts::LN_2, 1e-12));
        assert_eq!(b.upper, Some(0.0));
        assert!(!b.holds(1e-9));
    }

    #[test]
    fn diamond_examples() {
        let id = KrausChannel::identity(2);
        let z = diamond_norm(&id, &id, 1e-9).unwrap();
        assert!(z.value.abs() < 1e-7);
        let d = diamond_norm(&id, &depolarizing(2, 1.0).unwrap(), 1e-9).unwrap();
        assert!(close(d.value, 1.5, 1e-6) && d.gap.abs() < 1e-6, "{d:?}");
        let mut r = random::rng(4);
        let a = KrausChannel::new(random::kraus_ops(2, 2, 2, &mut r)).unwrap();
        let b = KrausChannel::new(random::kraus_ops(2, 2, 2, &mut r)).unwrap();
        let u = KrausChannel::unitary(&random::unitary(2, &mut r)).unwrap();
        let x = diamond_norm(&a, &b, 1e-9).unwrap().value;
        let y = diamond_norm(&a.after(&u).unwrap(), &b.after(&u).unwrap(), 1e-9).unwrap().value;
        assert!(close(x, y, 1e-6), "{x} {y}");
        // distinguishing |0⟩⟨0|-preparation from |1⟩⟨1|-preparation is perfect
        let p0 = KrausChannel::new(vec![proj(&ket(2, 0)), ket(2, 0) * ket(2, 1).adjoint()]).unwrap();
        let p1 = KrausChannel::new(vec![proj(&ket(2, 1)), ket(2, 1) * ket(2, 0).adjoint()]).unwrap();
        assert!(close(diamond_norm(&p0, &p1, 1e-9).unwrap().value, 2.0, 1e-6));
    }

    #[test]
    fn nonunitarity_examples() {
        let mut r = random::rng(1);
        let u = KrausChannel::unitary(&random::unitary(3, &mut r)).unwrap();
        assert!(nonunitarity(&u, 1e-9).unwrap().value.abs() < 1e-6);
        assert!(close(nonunitarity(&depolarizing(2, 1.0).unwrap(), 1e-9).unwrap().value, 1.5, 1e-6));
        let v = nonunitarity(&depolarizing(3, 0.5).unwrap(), 1e-9).unwrap().value;
        assert!(close(v, depolarizing_nonunitarity(3, 0.5), 1e-6));
        let ad = gadc(0.5, 1.0).unwrap();
        assert!(nonunitarity(&ad, 1e-9).is_err());
    }

    #[test]
    fn unitarity_gap_proposition() {
        let id = eye(2);
        for q in [0.01, 0.1, 0.5] {
            let ch = depolarizing(2, q).unwrap();
            let delta = diamond_norm(&ch, &KrausChannel::identity(2), 1e-9).unwrap().value;
            let rep = unitarity_gap_check(&ch, &id, delta, 1e-9).unwrap();
            assert!(rep.premise && rep.holds, "{rep:?}");
        }
    }

    #[test]
    fn csv_has_header() {
        let g = pure_decoherence(Arc::new(|_| 1.0));
        let tr = evolve(&g, &bloch_state(1.0, 0.0, 0.9), &[0.0, 0.5, 1.0]).unwrap();
        let csv = witness_csv(&witness_f(&tr, &g).unwrap());
        assert!(csv.starts_with(WITNESS_CSV_HEADER));
        assert_eq!(csv.lines().count(), 4);
    }
}
