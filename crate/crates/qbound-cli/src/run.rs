use std::path::Path;
use std::sync::Arc;

use clap::ValueEnum as _;
use qbound::dynamics::{self, StateFamily, EVOLVE_TOL};
use qbound::error::Error;
use qbound::infomeasures::{entropy, Base};
use qbound::linalg::{max_entangled_ket, CMat};
use qbound::qcore::{
    self, cnot, depolarizing, erasure, gadc, hw_group, identity_bipartite, partial_swap, partial_swap_traceout,
    swap_channel, swap_then_collective_dephasing, BipartiteChannel, CellJson, ChannelJson, DensityOperator,
    KrausChannel, MemoryCell, StateJson, COV_TOL,
};
use qbound::rains::{self, FwOptions, SDP_TOL};
use qbound::reading::{self, SecurePreset, BA_TOL};
use qbound::{par, props};

use crate::args::*;
use crate::output::{Cell, Table};

/// How a run failed; decides the exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad input file or inconsistent flags (exit 2).
    Input(String),
    /// The numerics refused or failed (exit 3).
    Numeric(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numeric(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    pub fn diagnostic(&self, subcommand: &str) -> String {
        let (kind, msg) = match self {
            Failure::Input(m) => ("input", m.clone()),
            Failure::Numeric(e) => (error_kind(e), e.to_string()),
        };
        serde_json::json!({ "error": msg, "kind": kind, "subcommand": subcommand }).to_string()
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Shape(_) => "shape",
        Error::NotHermitian(_) => "not-hermitian",
        Error::NotPsd(_) => "not-psd",
        Error::Domain(_) => "domain",
        Error::Undefined(_) => "undefined",
        Error::NotCovariant(_) => "not-covariant",
        Error::Sdp(_) => "sdp",
        Error::NoConvergence(_) => "no-convergence",
        Error::Invalid(_) => "invalid",
    }
}

pub type Outcome = Result<(Table, bool), Failure>;

pub fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::RainsState(_) => "rains-state",
        Command::RainsChannel(_) => "rains-channel",
        Command::RainsBidir(_) => "rains-bidir",
        Command::Capacity(_) => "capacity",
        Command::PrivateRate(_) => "private-rate",
        Command::SecureRead(_) => "secure-read",
        Command::Dynamics(_) => "dynamics",
        Command::Nonunitarity(_) => "nonunitarity",
        Command::Props(_) => "props",
    }
}

/// Runs one subcommand. The flag is false when the table is complete but
/// reports a failed check (only `props` does this).
pub fn run(cli: &Cli) -> Outcome {
    let c = &cli.common;
    let ok = |t: Table| Ok((t, true));
    match &cli.command {
        Command::RainsState(a) => ok(rains_state(a, c)?),
        Command::RainsChannel(a) => ok(rains_channel(a, c)?),
        Command::RainsBidir(a) => ok(rains_bidir(a, c)?),
        Command::Capacity(a) => ok(capacity(a)?),
        Command::PrivateRate(a) => ok(private_rate(a)?),
        Command::SecureRead(a) => ok(secure_read(a)?),
        Command::Dynamics(a) => ok(dynamics_cmd(a)?),
        Command::Nonunitarity(a) => ok(nonunitarity(a, c)?),
        Command::Props(a) => props_cmd(a, c),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_channel(path: &Path) -> Result<KrausChannel, Failure> {
    Ok(KrausChannel::from_json(&read_json::<ChannelJson>(path)?)?)
}

fn load_cell(path: &Path) -> Result<MemoryCell, Failure> {
    Ok(MemoryCell::from_json(&read_json::<CellJson>(path)?)?)
}

fn sdp_tol(c: &Common) -> f64 {
    c.tol.unwrap_or(SDP_TOL)
}

fn need<T>(v: Option<T>, what: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::Input(format!("{what} is required")))
}

/// Evaluates `f` on every grid point in parallel and keeps grid order; the
/// first error wins.
fn sweep<R: Send, F>(grid: &[f64], f: F) -> Result<Vec<R>, Failure>
where
    F: Fn(f64) -> qbound::error::Result<R> + Sync + Send,
{
    par::map(grid, |&x| f(x)).into_iter().map(|r| r.map_err(Failure::from)).collect()
}

fn rains_state(a: &RainsStateArgs, c: &Common) -> Result<Table, Failure> {
    let tol = sdp_tol(c);
    let mut cols = vec!["p", "R_max", "primal", "dual", "witness_residual"];
    if a.with_rains {
        cols.extend(["rains", "rains_gap", "rains_converged"]);
    }
    let eval = |rho: &CMat, dims: [usize; 2]| -> qbound::error::Result<Vec<Cell>> {
        let r = rains::rmax_state(rho, dims, tol)?;
        let mut row = vec![r.value.into(), r.primal.into(), r.dual.into(), r.witness_residual.into()];
        if a.with_rains {
            let fw = rains::rains_relative_entropy(rho, dims, FwOptions::default())?;
            row.extend([fw.value.into(), fw.gap.into(), fw.converged.into()]);
        }
        Ok(row)
    };
    let (quantity, rows): (String, Vec<(Cell, Vec<Cell>)>) = if let Some(path) = &a.state_json {
        let st = DensityOperator::from_json(&read_json::<StateJson>(path)?)?;
        if st.dims.len() != 2 {
            return Err(Failure::Input("state file must declare two subsystem dims".into()));
        }
        let dims = [st.dims[0], st.dims[1]];
        (format!("R_max(A;B) of {}", path.display()), vec![(Cell::from(""), eval(&st.matrix, dims)?)])
    } else {
        let preset = need(a.state, "--state or --state-json")?;
        let d = a.d;
        let rows = sweep(&a.p_grid.0, |p| {
            let rho = match preset {
                StatePreset::Isotropic => qcore::isotropic_state(d, p)?,
                StatePreset::Werner => qcore::werner_state(d, p)?,
            };
            Ok((Cell::from(p), eval(&rho, [d, d])?))
        })?;
        let name = match preset {
            StatePreset::Isotropic => "isotropic",
            StatePreset::Werner => "werner",
        };
        (format!("R_max(A;B) of {name}(d={d}, p)"), rows)
    };
    let mut t = Table::new(&quantity, "bits", Some(tol), &cols);
    for (p, rest) in rows {
        let mut row = vec![p];
        row.extend(rest);
        t.push(row);
    }
    Ok(t)
}

fn point_channel(kind: PointChannel, d: usize, x: f64, theta: f64) -> qbound::error::Result<KrausChannel> {
    match kind {
        PointChannel::Depolarizing => depolarizing(d, x),
        PointChannel::Erasure => erasure(d, x),
        PointChannel::Gadc => gadc(x, theta),
        PointChannel::AmplitudeDamping => gadc(x, 1.0),
        PointChannel::Identity => Ok(KrausChannel::identity(d)),
    }
}

fn channel_label(kind: PointChannel, d: usize, theta: f64) -> String {
    match kind {
        PointChannel::Depolarizing => format!("depolarizing(d={d}, q)"),
        PointChannel::Erasure => format!("erasure(d={d}, q)"),
        PointChannel::Gadc => format!("gadc(eta, theta={theta})"),
        PointChannel::AmplitudeDamping => "amplitude-damping(eta)".into(),
        PointChannel::Identity => format!("identity(d={d})"),
    }
}

fn rains_channel(a: &RainsChannelArgs, c: &Common) -> Result<Table, Failure> {
    let tol = sdp_tol(c);
    let cols = ["param", "R_max", "Gamma", "gap"];
    let row = |p: Cell, r: rains::RmaxChannel| vec![p, r.value.into(), r.gamma.into(), r.gap.into()];
    if let Some(path) = &a.channel_json {
        let ch = load_channel(path)?;
        let mut t = Table::new(&format!("R_max of {}", path.display()), "bits", Some(tol), &cols);
        t.push(row("".into(), rains::rmax_channel(&ch, tol)?));
        return Ok(t);
    }
    let kind = need(a.channel, "--channel or --channel-json")?;
    let mut t = Table::new(&format!("R_max of {}", channel_label(kind, a.d, a.theta)), "bits", Some(tol), &cols);
    if kind == PointChannel::Identity {
        t.push(row("".into(), rains::rmax_channel(&KrausChannel::identity(a.d), tol)?));
        return Ok(t);
    }
    let res = sweep(&a.grid.0, |x| rains::rmax_channel(&point_channel(kind, a.d, x, a.theta)?, tol))?;
    for (&x, r) in a.grid.0.iter().zip(res) {
        t.push(row(x.into(), r));
    }
    Ok(t)
}

fn bipartite(kind: BipartitePreset, p: f64, phi: f64) -> qbound::error::Result<BipartiteChannel> {
    match kind {
        BipartitePreset::PartialSwap => partial_swap(p),
        BipartitePreset::PartialSwapTraceout => partial_swap_traceout(p),
        BipartitePreset::SwapDephasing => swap_then_collective_dephasing(p, phi),
        BipartitePreset::Swap => Ok(swap_channel(2)),
        BipartitePreset::Identity => Ok(identity_bipartite(2, 2)),
        BipartitePreset::Cnot => Ok(cnot()),
    }
}

fn rains_bidir(a: &RainsBidirArgs, c: &Common) -> Result<Table, Failure> {
    let tol = sdp_tol(c);
    let name = a.channel.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    let mut t = Table::new(&format!("R_max^(2->2) of {name}(p)"), "bits", Some(tol), &["p", "R_max", "primal", "dual", "gap"]);
    let parametrized = matches!(
        a.channel,
        BipartitePreset::PartialSwap | BipartitePreset::PartialSwapTraceout | BipartitePreset::SwapDephasing
    );
    let res = if parametrized {
        sweep(&a.p_grid.0, |p| rains::rmax_bidirectional(&bipartite(a.channel, p, a.phi)?, tol))?
    } else {
        let r = rains::rmax_bidirectional(&bipartite(a.channel, 0.0, a.phi)?, tol)?;
        vec![r; a.p_grid.0.len()]
    };
    for (&p, r) in a.p_grid.0.iter().zip(res) {
        t.push(vec![p.into(), r.value.into(), r.primal.into(), r.dual.into(), r.gap.into()]);
    }
    Ok(t)
}

fn holevo_table(quantity: &str, cap: &reading::HolevoCapacity) -> Table {
    let mut t = Table::new(quantity, "bits", Some(BA_TOL), &["capacity", "iterations", "kkt_residual", "converged", "p"]);
    let p: Vec<String> = cap.p.iter().map(|x| format!("{x}")).collect();
    t.push(vec![
        cap.capacity.into(),
        cap.iterations.into(),
        cap.kkt_residual.into(),
        cap.converged.into(),
        p.join(";").into(),
    ]);
    t
}

fn capacity(a: &CapacityArgs) -> Result<Table, Failure> {
    if let Some(path) = &a.cell_json {
        let cell = load_cell(path)?;
        let cap = reading::env_cell_capacity(&reading::choi_resources(&cell))?;
        return Ok(holevo_table(&format!("Holevo capacity of the Choi ensemble of {}", path.display()), &cap));
    }
    let d = a.d;
    match need(a.cell, "--cell or --cell-json")? {
        CellKind::Erasure => {
            let g = hw_group(d);
            let out = g.direct_sum_identity();
            let res = sweep(&a.q_grid.0, |q| reading::covariant_cell_capacity(&erasure(d, q)?, &g, &out))?;
            let mut t = Table::new(&format!("reading capacity of erasure(d={d}, q) cell"), "bits", Some(COV_TOL), &["q", "capacity", "closed_form"]);
            for (&q, v) in a.q_grid.0.iter().zip(res) {
                t.push(vec![q.into(), v.into(), reading::erasure_cell_capacity(d, q).into()]);
            }
            Ok(t)
        }
        CellKind::Depolarizing => {
            let g = hw_group(d);
            let res = sweep(&a.q_grid.0, |q| reading::covariant_cell_capacity(&depolarizing(d, q)?, &g, &g))?;
            let mut t = Table::new(&format!("reading capacity of depolarizing(d={d}, q) cell"), "bits", Some(COV_TOL), &["q", "capacity", "closed_form"]);
            for (&q, v) in a.q_grid.0.iter().zip(res) {
                t.push(vec![q.into(), v.into(), reading::depolarizing_cell_capacity(d, q).into()]);
            }
            Ok(t)
        }
        CellKind::Identity => {
            let g = hw_group(d);
            let v = reading::covariant_cell_capacity(&KrausChannel::identity(d), &g, &g)?;
            let mut t = Table::new("reading capacity of the identity cell", "bits", Some(COV_TOL), &["d", "capacity", "closed_form"]);
            t.push(vec![d.into(), v.into(), (2.0 * (d as f64).log2()).into()]);
            Ok(t)
        }
        CellKind::Thermal => {
            let cap = reading::thermal_cell_capacity(&a.photons.0)?;
            let ns: Vec<String> = a.photons.0.iter().map(|x| format!("{x}")).collect();
            Ok(holevo_table(&format!("Holevo capacity of thermal cell N=[{}]", ns.join(" ")), &cap))
        }
        CellKind::Energy => {
            let res = sweep(&a.ns_grid.0, reading::energy_constrained_bound)?;
            let mut t = Table::new("energy-constrained reading bound 2g(N_S)", "bits", Some(0.0), &["N_S", "bound"]);
            for (&n, v) in a.ns_grid.0.iter().zip(res) {
                t.push(vec![n.into(), v.into()]);
            }
            Ok(t)
        }
    }
}

const PRIVATE_COLS: [&str; 5] = ["q", "reader", "eavesdropper", "rate", "coherent_info"];

fn private_row(q: Cell, r: &reading::PrivateReading) -> Vec<Cell> {
    vec![q, r.reader.into(), r.eavesdropper.into(), r.rate.into(), r.coherent_info.into()]
}

fn private_rate(a: &PrivateRateArgs) -> Result<Table, Failure> {
    if let Some(path) = &a.cell_json {
        let cell = load_cell(path)?.with_canonical_wiretap();
        let (n, din) = (cell.len(), cell.in_dim());
        let p = vec![1.0 / n as f64; n];
        let r = reading::private_reading_rate_n1(&cell, &p, &max_entangled_ket(din), din)?;
        let mut t = Table::new(&format!("private reading rate of {}", path.display()), "bits", Some(0.0), &PRIVATE_COLS);
        t.push(private_row("".into(), &r));
        return Ok(t);
    }
    let d = a.d;
    let p = vec![1.0 / (d * d) as f64; d * d];
    let res = sweep(&a.q_grid.0, |q| {
        reading::private_reading_rate_n1(&reading::erasure_wiretap_cell(d, q)?, &p, &max_entangled_ket(d), d)
    })?;
    let mut t = Table::new(&format!("private reading rate of erasure-wiretap(d={d}, q)"), "bits", Some(0.0), &PRIVATE_COLS);
    for (&q, r) in a.q_grid.0.iter().zip(&res) {
        t.push(private_row(q.into(), r));
    }
    Ok(t)
}

fn secure_read(a: &SecureReadArgs) -> Result<Table, Failure> {
    let etas = match (&a.eta1, &a.eta1_grid) {
        (Some(e), _) => vec![*e],
        (None, Some(g)) => g.0.clone(),
        (None, None) => return Err(Failure::Input("--eta1 or --eta1-grid is required".into())),
    };
    let preset = |eta1: f64| match a.preset {
        SecureCell::Depolarizing => SecurePreset::Depolarizing { d: a.d, eta0: a.eta0, eta1 },
        SecureCell::Gadc => SecurePreset::Gadc { theta: a.theta, eta0: a.eta0, eta1 },
    };
    let res = sweep(&etas, |e| reading::secure_reading_deltas(preset(e), a.q, a.n))?;
    let label = match a.preset {
        SecureCell::Depolarizing => format!("depolarizing(d={})", a.d),
        SecureCell::Gadc => format!("gadc(theta={})", a.theta),
    };
    let mut t = Table::new(
        &format!("incognito/covert reading of {label}, eta0={}, q={}, N={}", a.eta0, a.q, a.n),
        "bits",
        Some(0.0),
        &["eta1", "D_I", "D_C", "N*D_I", "N*D_C", "D_I_closed_form"],
    );
    for (&e, r) in etas.iter().zip(res) {
        t.push(vec![
            e.into(),
            r.d_i.into(),
            r.d_c.into(),
            r.n_d_i.into(),
            r.n_d_c.into(),
            r.d_i_closed_form.map_or(Cell::from(""), Cell::from),
        ]);
    }
    Ok(t)
}

fn time_grid(t_max: f64, points: usize) -> Result<Vec<f64>, Failure> {
    if points < 2 || !(t_max > 0.0) {
        return Err(Failure::Input("need --points ≥ 2 and --t-max > 0".into()));
    }
    Ok((0..points).map(|k| if k == points - 1 { t_max } else { t_max * k as f64 / (points - 1) as f64 }).collect())
}

fn dynamics_cmd(a: &DynamicsArgs) -> Result<Table, Failure> {
    let cols: Vec<&str> = dynamics::WITNESS_CSV_HEADER.split(',').collect();
    let ts = time_grid(a.t_max, a.points)?;
    match a.preset {
        DynamicsPreset::Gadc => {
            let fam = dynamics::gadc_family(a.omega);
            let rho0 = qbound::linalg::eye(2).unscale(2.0);
            let fs = if a.numeric { dynamics::witness_f_family(&fam, &rho0, &ts)? } else { ts.iter().map(|&t| fam.f(t)).collect() };
            let states = fam.states(&rho0, &ts)?;
            let mut t = Table::new(
                &format!("witness f(t) for gadc family omega={}{}", a.omega, if a.numeric { " (finite differences)" } else { "" }),
                "nats",
                Some(if a.numeric { 1e-6 } else { 0.0 }),
                &cols,
            );
            for ((&tt, f), rho) in ts.iter().zip(fs).zip(&states) {
                let s = if a.numeric { entropy(rho, Base::Nats)? } else { fam.entropy(tt) };
                let rate = fam.entropy_rate(tt);
                t.push(vec![tt.into(), s.into(), rate.into(), (rate - f).into(), f.into()]);
            }
            Ok(t)
        }
        DynamicsPreset::PureDecoherence => {
            let amp = a.amp;
            let gen = dynamics::pure_decoherence(Arc::new(move |t| 1.0 + amp * (2.0 * t).cos()));
            // start just off the pure state, where the entropy rate is unbounded
            let rho0 = dynamics::bloch_state(std::f64::consts::FRAC_PI_2, 0.0, 1.0 - 1e-9);
            let traj = dynamics::evolve(&gen, &rho0, &ts)?;
            let samples = dynamics::witness_f(&traj, &gen)?;
            let mut t = Table::new(&format!("witness f(t) for pure decoherence gamma=1+{amp}cos(2t)"), "nats", Some(EVOLVE_TOL), &cols);
            for w in samples {
                t.push(vec![w.t.into(), w.entropy.into(), w.rate.into(), w.lower_bound.into(), w.f.into()]);
            }
            Ok(t)
        }
    }
}

fn nonunitarity(a: &NonunitarityArgs, c: &Common) -> Result<Table, Failure> {
    let tol = sdp_tol(c);
    let cols = ["q", "nonunitarity", "primal", "closed_form"];
    let row = |q: Cell, r: &dynamics::DiamondNorm, cf: Cell| vec![q, r.value.into(), r.primal.into(), cf];
    if let Some(path) = &a.channel_json {
        let ch = load_channel(path)?;
        let mut t = Table::new(&format!("diamond-norm non-unitarity of {}", path.display()), "none", Some(tol), &cols);
        t.push(row("".into(), &dynamics::nonunitarity(&ch, tol)?, "".into()));
        return Ok(t);
    }
    let kind = need(a.channel, "--channel or --channel-json")?;
    let res = sweep(&a.q_grid.0, |q| dynamics::nonunitarity(&point_channel(kind, a.d, q, a.theta)?, tol))?;
    let mut t = Table::new(&format!("diamond-norm non-unitarity of {}", channel_label(kind, a.d, a.theta)), "none", Some(tol), &cols);
    for (&q, r) in a.q_grid.0.iter().zip(&res) {
        let cf = if kind == PointChannel::Depolarizing { dynamics::depolarizing_nonunitarity(a.d, q).into() } else { Cell::from("") };
        t.push(row(q.into(), r, cf));
    }
    Ok(t)
}

fn props_cmd(a: &PropsArgs, c: &Common) -> Outcome {
    if a.shrink == 0 {
        return Err(Failure::Input("--shrink must be at least 1".into()));
    }
    let counts = props::DEFAULT_COUNTS.map(|n| (n / a.shrink).max(2));
    let reports = props::run_with(c.seed, counts);
    let mut t = Table::new(&format!("property suites, seed={}", c.seed), "mixed", None, &["suite", "instances", "worst", "tol", "pass", "error"]);
    let mut all = true;
    for r in &reports {
        all &= r.pass;
        t.push(vec![r.name.into(), r.instances.into(), r.worst.into(), r.tol.into(), r.pass.into(), r.error.clone().unwrap_or_default().into()]);
    }
    Ok((t, all))
}
