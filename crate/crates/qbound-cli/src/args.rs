use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Parameter grid `start:end:count`, endpoints included. Endpoints accept
/// decimals, fractions such as `4/3`, and multiples of `pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

/// Parse `2.5`, `4/3`, `pi`, `pi/2`, `3pi/4`, `0.5*pi`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty number".into());
    }
    let factor = |t: &str| -> Result<f64, String> {
        let t = t.trim();
        if let Some(head) = t.strip_suffix("pi") {
            let head = head.trim().trim_end_matches('*').trim();
            let k = if head.is_empty() {
                1.0
            } else if head == "-" {
                -1.0
            } else {
                head.parse::<f64>().map_err(|_| format!("bad number {t:?}"))?
            };
            Ok(k * std::f64::consts::PI)
        } else {
            t.parse::<f64>().map_err(|_| format!("bad number {t:?}"))
        }
    };
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let den = factor(b)?;
            if den == 0.0 {
                return Err(format!("division by zero in {s:?}"));
            }
            factor(a)? / den
        }
        None => factor(s)?,
    };
    if !v.is_finite() {
        return Err(format!("{s:?} is not finite"));
    }
    Ok(v)
}

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid {s:?} must be start:end:count"));
    }
    let a = parse_number(parts[0])?;
    let b = parse_number(parts[1])?;
    let n: usize = parts[2].trim().parse().map_err(|_| format!("bad grid count {:?}", parts[2]))?;
    if n == 0 {
        return Err("grid count must be at least 1".into());
    }
    if n == 1 {
        return Ok(Grid(vec![a]));
    }
    Ok(Grid((0..n).map(|k| if k == n - 1 { b } else { a + (b - a) * k as f64 / (n - 1) as f64 }).collect()))
}

/// Comma-separated numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct List(pub Vec<f64>);

fn parse_list(s: &str) -> Result<List, String> {
    s.split(',').map(parse_number).collect::<Result<_, _>>().map(List)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "qbound", version, about = "Capacity bounds, Rains quantities, reading rates and open-system witnesses")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output format. CSV starts with a `# quantity=…; base=…; tol=…` line,
    /// then the column header. JSON carries the same fields and rows.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Seed for randomized commands.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Override the SDP tolerance.
    #[arg(long, global = true, value_parser = parse_number)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Max-Rains information of a bipartite state.
    /// Columns: p, R_max, primal, dual [, rains, rains_gap, rains_converged].
    RainsState(RainsStateArgs),
    /// Max-Rains information of a point-to-point channel.
    /// Columns: param, R_max, Gamma, gap.
    RainsChannel(RainsChannelArgs),
    /// Bidirectional max-Rains information of a bipartite channel.
    /// Columns: p, R_max, primal, dual, gap (primal and dual before the log).
    RainsBidir(RainsBidirArgs),
    /// Reading capacities of memory cells.
    Capacity(CapacityArgs),
    /// Non-adaptive private reading rate at n = 1.
    /// Columns: q, reader, eavesdropper, rate, coherent_info (reader = I(X;LB), eavesdropper = I(X;E)).
    PrivateRate(PrivateRateArgs),
    /// Incognito and covert reading security parameters.
    /// Columns: eta1, D_I, D_C, N*D_I, N*D_C, D_I_closed_form.
    SecureRead(SecureReadArgs),
    /// Entropy-change witness along a dynamical family.
    /// Columns: t, S, dS/dt, lower_bound, f(t).
    Dynamics(DynamicsArgs),
    /// Diamond-norm non-unitarity ‖id − M†∘M‖⋄.
    /// Columns: q, nonunitarity, primal, closed_form.
    Nonunitarity(NonunitarityArgs),
    /// Run the randomized property suites; exits 1 if any suite fails.
    /// Columns: suite, instances, worst, tol, pass, error.
    Props(PropsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatePreset {
    Isotropic,
    Werner,
}

#[derive(Debug, Args)]
pub struct RainsStateArgs {
    #[arg(long, value_enum, conflicts_with = "state_json")]
    pub state: Option<StatePreset>,
    /// State file: {"dims": [dA, dB], "matrix": [[[re, im], …], …]}.
    #[arg(long)]
    pub state_json: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Preset parameter grid (fidelity for isotropic, antisymmetric weight for Werner).
    #[arg(long, value_parser = parse_grid, default_value = "0:1:11")]
    pub p_grid: Grid,
    /// Also run Frank–Wolfe for the Rains relative entropy.
    #[arg(long)]
    pub with_rains: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PointChannel {
    Depolarizing,
    Erasure,
    Gadc,
    AmplitudeDamping,
    Identity,
}

#[derive(Debug, Args)]
pub struct RainsChannelArgs {
    #[arg(long, value_enum, conflicts_with = "channel_json")]
    pub channel: Option<PointChannel>,
    /// Channel file: {"in_dim", "out_dim", "kraus": [[[[re, im], …], …], …]}.
    #[arg(long)]
    pub channel_json: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    /// Sweep of the channel parameter: q (depolarizing, erasure) or eta
    /// (gadc, amplitude-damping). Ignored for identity.
    #[arg(long, value_parser = parse_grid, default_value = "0:1:11")]
    pub grid: Grid,
    /// Environment parameter of the GADC.
    #[arg(long, value_parser = parse_number, default_value = "0.5")]
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BipartitePreset {
    PartialSwap,
    PartialSwapTraceout,
    SwapDephasing,
    Swap,
    Identity,
    Cnot,
}

#[derive(Debug, Args)]
pub struct RainsBidirArgs {
    #[arg(long, value_enum, default_value = "partial-swap")]
    pub channel: BipartitePreset,
    #[arg(long, value_parser = parse_grid, default_value = "0:1:21")]
    pub p_grid: Grid,
    /// Collective dephasing angle for swap-dephasing.
    #[arg(long, value_parser = parse_number, default_value = "pi")]
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CellKind {
    /// Covariant erasure cell; columns q, capacity, closed_form.
    Erasure,
    /// Covariant depolarizing cell; columns q, capacity, closed_form.
    Depolarizing,
    /// Identity cell; columns d, capacity.
    Identity,
    /// Thermal cell over --photons; columns capacity, iterations, kkt, p.
    Thermal,
    /// 2g(N_S) over --ns-grid; columns N_S, bound.
    Energy,
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[arg(long, value_enum, conflicts_with = "cell_json")]
    pub cell: Option<CellKind>,
    /// Cell file: {"symbol": channel, …}. Reports the Holevo capacity of the
    /// cell's Choi-state ensemble; columns capacity, iterations, kkt, p.
    #[arg(long)]
    pub cell_json: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, value_parser = parse_grid, default_value = "0:1:11")]
    pub q_grid: Grid,
    /// Mean photon numbers of the thermal cell, comma separated.
    #[arg(long, value_parser = parse_list, default_value = "0,1")]
    pub photons: List,
    #[arg(long, value_parser = parse_grid, default_value = "0:2:11")]
    pub ns_grid: Grid,
}

#[derive(Debug, Args)]
pub struct PrivateRateArgs {
    /// Cell file; channels are read through their canonical dilations with
    /// uniform p and a maximally entangled input.
    #[arg(long)]
    pub cell_json: Option<PathBuf>,
    /// Erasure wiretap cell dimension (used without --cell-json).
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, value_parser = parse_grid, default_value = "0:1:11")]
    pub q_grid: Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SecureCell {
    Depolarizing,
    Gadc,
}

#[derive(Debug, Args)]
pub struct SecureReadArgs {
    #[arg(long, value_enum)]
    pub preset: SecureCell,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, value_parser = parse_number, default_value = "0.5")]
    pub theta: f64,
    #[arg(long, value_parser = parse_number)]
    pub eta0: f64,
    #[arg(long, value_parser = parse_number, conflicts_with = "eta1_grid")]
    pub eta1: Option<f64>,
    #[arg(long, value_parser = parse_grid)]
    pub eta1_grid: Option<Grid>,
    /// Probability of a non-blank codeword.
    #[arg(long, value_parser = parse_number)]
    pub q: f64,
    /// Number of cells read.
    #[arg(long = "n", default_value_t = 1)]
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DynamicsPreset {
    /// GADC family with p(t) = cos²(ωt), η(t) = e^{−t}, ρ₀ = 1/2.
    Gadc,
    /// Qubit pure decoherence with γ(t) = 1 + a·cos(2t) from |+⟩.
    PureDecoherence,
}

#[derive(Debug, Args)]
pub struct DynamicsArgs {
    #[arg(long, value_enum)]
    pub preset: DynamicsPreset,
    #[arg(long, value_parser = parse_number, default_value = "5")]
    pub omega: f64,
    /// Rate modulation a for pure decoherence.
    #[arg(long, value_parser = parse_number, default_value = "2")]
    pub amp: f64,
    #[arg(long, value_parser = parse_number, default_value = "5")]
    pub t_max: f64,
    #[arg(long, default_value_t = 501)]
    pub points: usize,
    /// Evaluate the GADC witness by finite differences instead of the closed form.
    #[arg(long)]
    pub numeric: bool,
}

#[derive(Debug, Args)]
pub struct NonunitarityArgs {
    #[arg(long, value_enum, conflicts_with = "channel_json")]
    pub channel: Option<PointChannel>,
    #[arg(long)]
    pub channel_json: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, value_parser = parse_grid, default_value = "0:4/3:25")]
    pub q_grid: Grid,
    #[arg(long, value_parser = parse_number, default_value = "0.5")]
    pub theta: f64,
}

#[derive(Debug, Args)]
pub struct PropsArgs {
    /// Instance-count divisor for a faster smoke run.
    #[arg(long, default_value_t = 1)]
    pub shrink: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers() {
        assert_eq!(parse_number("4/3").unwrap(), 4.0 / 3.0);
        assert_eq!(parse_number("pi").unwrap(), std::f64::consts::PI);
        assert_eq!(parse_number("3pi/4").unwrap(), 0.75 * std::f64::consts::PI);
        assert_eq!(parse_number("-0.5").unwrap(), -0.5);
        assert!(parse_number("1/0").is_err());
        assert!(parse_number("abc").is_err());
    }

    #[test]
    fn grids() {
        let g = parse_grid("0:4/3:25").unwrap().0;
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[24], 4.0 / 3.0);
        assert_eq!(parse_grid("0.3:1:1").unwrap().0, vec![0.3]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }
}
