use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ponsim::addressing::export_node_config;
use ponsim::scenario::{build, run_scenario, select_nodes, Built, ScenarioConfig, ScenarioError};

/// Scenario runner for PON data-centre cells and their core chain.
#[derive(Parser)]
#[command(name = "ponsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario: topology, address plan, reachability.
    Validate { file: PathBuf },
    /// Run every experiment and write one CSV each plus summary.txt.
    Run {
        file: PathBuf,
        /// Output directory (default: the scenario's output.dir, else ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print per-node address and route config.
    Export {
        file: PathBuf,
        /// all, servers, gateways, core, a node id, or a glob over ids.
        #[arg(long)]
        nodes: String,
        /// Write one <node>.conf per node here instead of to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const OK: u8 = 0;
const INVALID: u8 = 1;
const BAD_DOCUMENT: u8 = 2;

fn fail(e: &ScenarioError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_document_error() { BAD_DOCUMENT } else { INVALID })
}

fn load_built(file: &Path) -> Result<(ScenarioConfig, Built), ExitCode> {
    let cfg = ScenarioConfig::load(file).map_err(|e| fail(&e))?;
    let built = build(&cfg).map_err(|e| fail(&e))?;
    Ok((cfg, built))
}

fn validate(file: &Path) -> ExitCode {
    let (_, built) = match load_built(file) {
        Ok(b) => b,
        Err(code) => return code,
    };
    print!("{}", built.report);
    for w in built.topology.warnings() {
        println!("warning: {w}");
    }
    if built.is_ok() {
        ExitCode::from(OK)
    } else {
        ExitCode::from(INVALID)
    }
}

fn run(file: &Path, out: Option<PathBuf>, seed: Option<u64>) -> ExitCode {
    let cfg = match ScenarioConfig::load(file) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let output = match run_scenario(&cfg, seed) {
        Ok(o) => o,
        Err(ScenarioError::Validation(report)) => {
            eprint!("{report}");
            eprintln!("error: scenario does not validate");
            return ExitCode::from(INVALID);
        }
        Err(e) => return fail(&e),
    };
    let dir = out.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    match output.write_to(&dir) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::from(OK)
        }
        Err(e) => fail(&e),
    }
}

fn export(file: &Path, selector: &str, out: Option<PathBuf>) -> ExitCode {
    let (_, built) = match load_built(file) {
        Ok(b) => b,
        Err(code) => return code,
    };
    if !built.is_ok() {
        eprint!("{}", built.report);
        eprintln!("error: scenario does not validate");
        return ExitCode::from(INVALID);
    }
    let selection = match select_nodes(&built.topology, &built.plan, selector) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    if selection.empty_pattern {
        eprintln!("warning: `{selector}` matches no addressed node");
    }
    if let Some(dir) = &out {
        if let Err(source) = std::fs::create_dir_all(dir) {
            return fail(&ScenarioError::Io { path: dir.clone(), source });
        }
    }
    let mut first = true;
    for node in &selection.nodes {
        let doc = match export_node_config(&built.plan, &built.topology, node) {
            Ok(d) => d,
            Err(e) => return fail(&e.into()),
        };
        match &out {
            Some(dir) => {
                let path = dir.join(format!("{node}.conf"));
                if let Err(source) = std::fs::write(&path, doc) {
                    return fail(&ScenarioError::Io { path, source });
                }
                println!("wrote {}", path.display());
            }
            None => {
                if !first {
                    println!();
                }
                print!("{doc}");
            }
        }
        first = false;
    }
    ExitCode::from(OK)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Validate { file } => validate(&file),
        Command::Run { file, out, seed } => run(&file, out, seed),
        Command::Export { file, nodes, out } => export(&file, &nodes, out),
    }
}
