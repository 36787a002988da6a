//! Seeded randomized property suites. Each suite reports its worst
//! violation against a fixed tolerance; the CLI `props` command and the
//! acceptance target both run these.

use serde::Serialize;

use crate::dynamics::{entropy_change_bounds, entropy_rate, evolve, markov_lower_bound, random_generator};
use crate::error::Result;
use crate::infomeasures::{dmax, relative_entropy, sandwiched_renyi, Base};
use crate::linalg::{max_entangled_ket, C64};
use crate::par;
use crate::qcore::{
    apply_with_reference, cnot, depolarizing, hw_group, trace_distance, Bicovariance, BipartiteChannel, KrausChannel,
    MemoryCell,
};
use crate::rains::amortization_spotcheck;
use crate::random::{self, Rng};
use crate::reading::{erasure_cell_capacity, erasure_wiretap_cell, private_reading_rate_n1, zero_error_certificate};

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub instances: usize,
    /// Largest violation seen (0 when every instance holds exactly).
    pub worst: f64,
    pub tol: f64,
    pub pass: bool,
    /// First failure, if any instance errored outright.
    pub error: Option<String>,
}

impl SuiteReport {
    fn from(name: &'static str, tol: f64, results: Vec<Result<f64>>) -> Self {
        let instances = results.len();
        let mut worst = 0.0f64;
        let mut error = None;
        for r in results {
            match r {
                Ok(v) => worst = worst.max(v),
                Err(e) => {
                    if error.is_none() {
                        error = Some(e.to_string());
                    }
                }
            }
        }
        SuiteReport { name, instances, worst, tol, pass: error.is_none() && worst <= tol, error }
    }
}

/// Independent stream per (suite, instance).
fn stream(seed: u64, suite: u64, i: usize) -> Rng {
    random::rng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (suite << 32) ^ i as u64)
}

fn random_channel(din: usize, dout: usize, rng: &mut Rng) -> KrausChannel {
    let nk = din.div_ceil(dout) + (random::uniform(rng, 0.0, 3.0) as usize);
    KrausChannel::new(random::kraus_ops(din, dout, nk, rng)).expect("random isometry is a channel")
}

/// D, D_max and D̃_α (α ∈ {1.5, 2}) never increase under a random channel.
pub fn data_processing(seed: u64, n: usize) -> SuiteReport {
    let res = par::map_range(n, |i| {
        let mut rng = stream(seed, 1, i);
        let d = 2 + i % 2;
        let dout = 2 + (i / 2) % 2;
        let rho = random::density(d, 1 + i % d, &mut rng);
        let sigma = random::full_rank_density(d, &mut rng);
        let ch = random_channel(d, dout, &mut rng);
        let (nr, ns) = (ch.apply(&rho)?, ch.apply(&sigma)?);
        let mut worst = 0.0f64;
        let pairs = [
            (relative_entropy(&nr, &ns, Base::Bits)?, relative_entropy(&rho, &sigma, Base::Bits)?),
            (dmax(&nr, &ns, Base::Bits)?, dmax(&rho, &sigma, Base::Bits)?),
            (sandwiched_renyi(&nr, &ns, 1.5, Base::Bits)?, sandwiched_renyi(&rho, &sigma, 1.5, Base::Bits)?),
            (sandwiched_renyi(&nr, &ns, 2.0, Base::Bits)?, sandwiched_renyi(&rho, &sigma, 2.0, Base::Bits)?),
        ];
        for (after, before) in pairs {
            worst = worst.max(after.value() - before.value());
        }
        Ok(worst)
    });
    SuiteReport::from("data-processing", 1e-8, res)
}

/// lower ≤ ΔS ≤ upper ≤ Hölder bound on sub-unital channels built as
/// mixtures of unitaries after an isometric embedding. The first report
/// covers equal dimensions, where sub-unital means unital; the second covers
/// strictly larger outputs, where M(1) < 1.
pub fn entropy_change_chain(seed: u64, n: usize) -> [SuiteReport; 2] {
    let run = |strict: bool| {
        par::map_range(n, |i| {
            let mut rng = stream(seed, if strict { 8 } else { 2 }, i);
            let din = 2 + i % 2;
            let dout = if strict { din + 1 } else { din };
            let m = 1 + i % 4;
            let w: Vec<f64> = (0..m).map(|_| random::uniform(&mut rng, 0.1, 1.0)).collect();
            let tot: f64 = w.iter().sum();
            let v = random::isometry(dout, din, &mut rng);
            let ks = w
                .iter()
                .map(|wi| random::unitary(dout, &mut rng) * &v * C64::new((wi / tot).sqrt(), 0.0))
                .collect();
            let ch = KrausChannel::new(ks)?;
            let rho = random::full_rank_density(din, &mut rng);
            let b = entropy_change_bounds(&rho, &ch)?;
            let mut worst = 0.0f64;
            if let Some(l) = b.lower {
                worst = worst.max(l - b.actual);
            }
            match (b.upper, b.upper_holder) {
                (Some(u), Some(h)) => worst = worst.max(b.actual - u).max(u - h),
                _ => return Err(crate::error::Error::Invalid("sub-unital instance without an upper bound".into())),
            }
            Ok(worst)
        })
    };
    [
        SuiteReport::from("entropy-change-chain/unital", 1e-9, run(false)),
        SuiteReport::from("entropy-change-chain/strictly-sub-unital", 1e-9, run(true)),
    ]
}

/// R_max of the output never exceeds R_max of the input plus R_max^{2→2}.
pub fn amortization(seed: u64, n: usize) -> SuiteReport {
    let res = par::map_range(n, |i| {
        let mut rng = stream(seed, 3, i);
        let ch = BipartiteChannel::new(random_channel(4, 4, &mut rng), (2, 2), (2, 2))?;
        let rho = random::density(4, 1 + i % 4, &mut rng);
        let r = amortization_spotcheck(&ch, &rho, 1, 1)?;
        Ok((-r.slack).max(0.0))
    });
    SuiteReport::from("amortization", 1e-6, res)
}

/// Teleportation simulation equals direct application for CNOT and for a
/// qubit depolarizing channel with a reference.
pub fn teleportation(seed: u64, n: usize) -> SuiteReport {
    let res = par::map_range(n, |i| {
        let mut rng = stream(seed, 4, i);
        if i % 2 == 0 {
            let ch = cnot();
            let cov = Bicovariance::from_unitary_part(&ch, hw_group(2), hw_group(2))?;
            let rho = random::density(4, 1 + i % 4, &mut rng);
            let sim = crate::qcore::teleport_simulate(&ch, &cov, &rho, 1)?;
            Ok(trace_distance(&sim, &ch.channel.apply(&rho)?))
        } else {
            let q = random::uniform(&mut rng, 0.0, 4.0 / 3.0);
            let hw = hw_group(2);
            let ch = BipartiteChannel::new(depolarizing(2, q)?, (2, 1), (2, 1))?;
            let cov = Bicovariance::point_to_point(hw.clone(), &hw);
            let rho = random::density(4, 1 + i % 4, &mut rng);
            let sim = crate::qcore::teleport_simulate(&ch, &cov, &rho, 2)?;
            Ok(trace_distance(&sim, &apply_with_reference(&ch, &rho, 2)?))
        }
    });
    SuiteReport::from("teleportation-simulation", 1e-8, res)
}

/// dS/dt ≥ −Tr{Π L†(ρ)} along CP-divisible trajectories.
pub fn markov_bound(seed: u64, n: usize) -> SuiteReport {
    let grid: Vec<f64> = (0..=40).map(|k| 0.05 * k as f64).collect();
    let res = par::map_range(n, |i| {
        let mut rng = stream(seed, 5, i);
        let d = 2 + i % 3;
        let gen = random_generator(d, 2, true, &mut rng);
        let rho0 = random::full_rank_density(d, &mut rng);
        let traj = evolve(&gen, &rho0, &grid)?;
        let mut worst = 0.0f64;
        for ((&t, rho), dot) in traj.times.iter().zip(&traj.states).zip(&traj.derivatives) {
            let rate = entropy_rate(rho, dot)?;
            let lb = markov_lower_bound(rho, &gen, t)?.projector_form;
            worst = worst.max(lb - rate);
        }
        Ok(worst)
    });
    SuiteReport::from("markov-lower-bound", 1e-8, res)
}

/// I(X;LB) − I(X;E) = I(X⟩LB) on purified binary ensembles.
pub fn coherent_identity(seed: u64, n: usize) -> SuiteReport {
    let res = par::map_range(n, |i| {
        let mut rng = stream(seed, 6, i);
        let d = 2;
        let nx = 2 + i % 2;
        let chans: Vec<KrausChannel> = (0..nx).map(|_| random_channel(d, d, &mut rng)).collect();
        let cell = MemoryCell::new(chans)?.with_canonical_wiretap();
        let w: Vec<f64> = (0..nx).map(|_| random::uniform(&mut rng, 0.05, 1.0)).collect();
        let tot: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|x| x / tot).collect();
        let psi = random::pure_ket(d * d, &mut rng);
        Ok(private_reading_rate_n1(&cell, &p, &psi, d)?.identity_residual())
    });
    SuiteReport::from("coherent-info-identity", 1e-9, res)
}

/// The erasure wiretap cell leaks nothing (first report) and reads at
/// 2(1−q)log₂ d (second report).
pub fn erasure_wiretap(seed: u64, n: usize) -> [SuiteReport; 2] {
    let res = par::map_range(n, |i| {
        let mut rng = stream(seed, 7, i);
        let d = 2 + i % 2;
        let q = if i < 2 { i as f64 } else { random::uniform(&mut rng, 0.0, 1.0) };
        let cell = erasure_wiretap_cell(d, q)?;
        let p = vec![1.0 / (d * d) as f64; d * d];
        let r = private_reading_rate_n1(&cell, &p, &max_entangled_ket(d), d)?;
        Ok((r.eavesdropper.abs(), (r.rate - erasure_cell_capacity(d, q)).abs()))
    });
    let split = |k: usize| -> Vec<Result<f64>> {
        res.iter().map(|r| r.as_ref().map(|v| if k == 0 { v.0 } else { v.1 }).map_err(Clone::clone)).collect()
    };
    [SuiteReport::from("erasure-wiretap-leakage", 1e-9, split(0)), SuiteReport::from("erasure-wiretap-rate", 1e-8, split(1))]
}

/// min eig P = 1 − 1/√2 and the operator identities of the certificate.
pub fn zero_error() -> SuiteReport {
    let r = zero_error_certificate();
    let dev = (r.min_eig_p - (1.0 - std::f64::consts::FRAC_1_SQRT_2)).abs();
    let worst = dev.max(r.cross_residual).max(r.diagonal_residual);
    SuiteReport::from("zero-error-certificate", 1e-10, vec![Ok(worst)])
}

/// Instance counts of the full run.
pub const DEFAULT_COUNTS: [usize; 7] = [100, 100, 20, 20, 20, 50, 20];

/// Every suite, in a fixed order.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    run_with(seed, DEFAULT_COUNTS)
}

/// Every suite with explicit instance counts, in the order of [`DEFAULT_COUNTS`].
pub fn run_with(seed: u64, c: [usize; 7]) -> Vec<SuiteReport> {
    let mut out = vec![data_processing(seed, c[0])];
    out.extend(entropy_change_chain(seed, c[1] / 2));
    out.extend([
        amortization(seed, c[2]),
        teleportation(seed, c[3]),
        markov_bound(seed, c[4]),
        coherent_identity(seed, c[5]),
    ]);
    out.extend(erasure_wiretap(seed, c[6]));
    out.push(zero_error());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_runs_pass() {
        for r in [
            data_processing(1, 8),
            teleportation(1, 4),
            markov_bound(1, 3),
            coherent_identity(1, 6),
            zero_error(),
        ]
        .into_iter()
        .chain(erasure_wiretap(1, 4))
        .chain([entropy_change_chain(1, 8)[0].clone()])
        {
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn strictly_sub_unital_outputs_break_the_upper_bound() {
        let r = &entropy_change_chain(1, 8)[1];
        assert!(!r.pass && r.error.is_none(), "{r:?}");
    }

    #[test]
    fn streams_are_reproducible() {
        let a = data_processing(9, 5);
        let b = data_processing(9, 5);
        assert_eq!(a.worst.to_bits(), b.worst.to_bits());
    }
}
