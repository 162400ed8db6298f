use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hyqkd::apps::{
    grover_adjusted_length, key_renewal_feasibility, mosca_check, CipherKeyRequest, MoscaParams, MoscaVerdict, Renewal,
};
use hyqkd::netsim::{preshared_pairs_count, NetworkTopology, NodeRole};
use hyqkd::scenario::{run_scenario, sweep, ExitStatus, Scenario, SweepParam};

#[derive(Parser)]
#[command(name = "hyqkd", version, about = "Seeded BB84 sessions, trusted-relay networks and key-risk arithmetic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the scenario's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report files.
    #[arg(long, env = "HYQKD_OUT_DIR", default_value = "hyqkd-out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario's chained rounds and network requests.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also write per-round quantum transcripts and public-channel logs.
        #[arg(long)]
        transcripts: bool,
    },
    /// Single-round runs over a parameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// One of p_z, transmittance, eve_fraction, threshold.
        #[arg(long)]
        param: String,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Parse a topology file and print its accounting.
    TopologyCheck {
        /// Topology file; alternatively a scenario with a [network] section via --config.
        topology: Option<PathBuf>,
        #[arg(long, conflicts_with = "topology")]
        config: Option<PathBuf>,
    },
    /// Migration urgency and quantum-adjusted key lengths.
    Mosca {
        /// Years the data must stay confidential.
        #[arg(long)]
        shelf_life: f64,
        /// Years needed to migrate.
        #[arg(long)]
        migration: f64,
        /// Years until a cryptographically relevant quantum computer.
        #[arg(long)]
        threat_horizon: f64,
        /// Classical symmetric key length to adjust for quantum search.
        #[arg(long)]
        key_len: Option<usize>,
        /// Cipher key renewal check: key bits, renewal interval (s), QKD rate (bit/s).
        #[arg(long, num_args = 3, value_names = ["BITS", "INTERVAL", "RATE"])]
        renewal: Option<Vec<f64>>,
    },
}

fn fail(status: ExitStatus, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("hyqkd: {message}");
    ExitCode::from(status.code() as u8)
}

fn load(common: &Common) -> Result<Scenario, ExitCode> {
    let mut s = Scenario::load(&common.config).map_err(|e| {
        let status = match e {
            hyqkd::scenario::ScenarioError::Io { .. } => ExitStatus::Io,
            _ => ExitStatus::Config,
        };
        fail(status, format!("{}: {e}", common.config.display()))
    })?;
    if let Some(seed) = common.seed {
        s.seed = seed;
    }
    Ok(s)
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), ExitCode> {
    std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(dir.join(name), body))
        .map_err(|e| fail(ExitStatus::Io, format!("{}: {e}", dir.join(name).display())))
}

fn topology_check(topology: Option<PathBuf>, config: Option<PathBuf>) -> Result<(), ExitCode> {
    let topo = match (topology, config) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(&path).map_err(|e| fail(ExitStatus::Io, format!("{}: {e}", path.display())))?;
            NetworkTopology::parse(&text).map_err(|e| fail(ExitStatus::Config, format!("{}: {e}", path.display())))?
        }
        (None, Some(path)) => {
            let s = Scenario::load(&path).map_err(|e| fail(ExitStatus::Config, format!("{}: {e}", path.display())))?;
            s.topology
                .ok_or_else(|| fail(ExitStatus::Config, format!("{}: no [network] section", path.display())))?
        }
        (None, None) => return Err(fail(ExitStatus::Config, "topology-check needs a topology file or --config")),
    };
    let users: Vec<&str> = topo.nodes().filter(|(_, r)| *r == NodeRole::EndUser).map(|(n, _)| n).collect();
    println!("nodes {}", topo.node_count());
    println!("end users {}", users.len());
    println!("relays {}", topo.node_count() - users.len());
    println!("qkd links {}", topo.qkd_links().count());
    println!("pqc links {}", topo.pqc_links().count());
    println!("preshared pairs for full mesh {}", preshared_pairs_count(topo.node_count() as u64));
    for (i, a) in users.iter().enumerate() {
        for b in &users[i + 1..] {
            let route = |p: Option<Vec<String>>| p.map_or_else(|| "none".to_string(), |p| p.join(">"));
            let qkd = route(topo.qkd_path(a, b).expect("known nodes"));
            let pqc = route(topo.pqc_path(a, b).expect("known nodes"));
            println!("route {a} {b} qkd {qkd} pqc {pqc}");
        }
    }
    Ok(())
}

fn mosca(
    shelf_life: f64,
    migration: f64,
    threat_horizon: f64,
    key_len: Option<usize>,
    renewal: Option<Vec<f64>>,
) -> Result<(), ExitCode> {
    let params = MoscaParams::new(shelf_life, migration, threat_horizon).map_err(|e| fail(ExitStatus::Config, e))?;
    let a = mosca_check(&params);
    let verdict = match a.verdict {
        MoscaVerdict::AtRisk => "at-risk",
        MoscaVerdict::Safe => "safe",
    };
    println!("verdict {verdict}");
    println!("slack {}", a.slack);
    if let Some(n) = key_len {
        let adjusted = grover_adjusted_length(n).map_err(|e| fail(ExitStatus::Config, e))?;
        println!("quantum-adjusted key length {adjusted}");
    }
    if let Some(r) = renewal {
        let req = CipherKeyRequest::new(r[0], r[1], r[2]).map_err(|e| fail(ExitStatus::Config, e))?;
        match key_renewal_feasibility(&req) {
            Renewal::Feasible { headroom } => println!("renewal feasible headroom {headroom}"),
            Renewal::Infeasible { deficit } => println!("renewal infeasible deficit {deficit}"),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Run { common, transcripts } => load(&common).and_then(|s| {
            let out = run_scenario(&s, transcripts);
            out.write_to(&common.out_dir)
                .map_err(|e| fail(ExitStatus::Io, format!("{}: {e}", common.out_dir.display())))?;
            print!("{}", out.files["summary.txt"]);
            if out.status == ExitStatus::Success {
                Ok(())
            } else {
                Err(ExitCode::from(out.status.code() as u8))
            }
        }),
        Command::Sweep { common, param, values } => load(&common).and_then(|s| {
            let param: SweepParam = param.parse().map_err(|e| fail(ExitStatus::Config, e))?;
            let csv = sweep(&s, param, &values).map_err(|e| fail(ExitStatus::Config, e))?;
            write(&common.out_dir, &format!("sweep_{param}.csv"), &csv)?;
            print!("{csv}");
            Ok(())
        }),
        Command::TopologyCheck { topology, config } => topology_check(topology, config),
        Command::Mosca {
            shelf_life,
            migration,
            threat_horizon,
            key_len,
            renewal,
        } => mosca(shelf_life, migration, threat_horizon, key_len, renewal),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
