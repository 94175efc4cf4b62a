use clap::{Args, Parser, Subcommand as ClapSubcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use bosonstar::config::parse_config;
use bosonstar::orchestrate::orchestrate;

/// Boson-star Hartree solvers, blow-up sweeps, exact diagonalization and
/// inequality checks.
#[derive(Parser)]
#[command(name = "bosonstar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Extra `key=value` assignment; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Default)]
struct Physics {
    #[arg(long)]
    m: Option<f64>,
    /// Trap exponent of `V = |x|^p`.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, conflicts_with = "p")]
    no_trap: bool,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Gagliardo–Nirenberg optimizer and critical coupling.
    Gn,
    /// Trapped Hartree minimizer at one coupling.
    Hartree {
        #[arg(long)]
        a: Option<f64>,
        #[command(flatten)]
        physics: Physics,
        /// Minimize in the collapse frame, starting from the optimizer.
        #[arg(long)]
        rescaled_frame: bool,
    },
    /// Blow-up ladder below the critical coupling.
    Sweep {
        #[command(flatten)]
        physics: Physics,
    },
    /// Few-boson exact diagonalization against Hartree theory.
    Ed {
        /// Particle numbers, comma separated.
        #[arg(long = "N")]
        particles: Option<String>,
        /// Couplings as fractions of the critical coupling, comma separated.
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        l_max: Option<usize>,
        #[command(flatten)]
        physics: Physics,
    },
    /// Inequality test harness.
    Ineq,
    /// Counting of one-particle bound states.
    Spectrum {
        #[command(flatten)]
        physics: Physics,
        /// Energy levels, comma separated.
        #[arg(long)]
        levels: Option<String>,
    },
}

fn physics_lines(p: &Physics, lines: &mut Vec<String>) {
    if let Some(m) = p.m {
        lines.push(format!("m = {m}"));
    }
    if let Some(v) = p.p {
        lines.push(format!("p = {v}"));
    }
    if p.no_trap {
        lines.push("no_trap = true".into());
    }
}

fn overrides(cli: &Cli) -> Vec<String> {
    let mut lines = Vec::new();
    let name = match &cli.command {
        Command::Gn => "gn",
        Command::Hartree { a, physics, rescaled_frame } => {
            if let Some(a) = a {
                lines.push(format!("a = {a}"));
            }
            physics_lines(physics, &mut lines);
            if *rescaled_frame {
                lines.push("rescaled_frame = true".into());
            }
            "hartree"
        }
        Command::Sweep { physics } => {
            physics_lines(physics, &mut lines);
            "sweep"
        }
        Command::Ed { particles, a, n_max, l_max, physics } => {
            if let Some(n) = particles {
                lines.push(format!("N = {n}"));
            }
            if let Some(a) = a {
                lines.push(format!("a_fractions = {a}"));
            }
            if let Some(l) = l_max {
                lines.push(format!("l_max = {l}"));
            }
            if let Some(n) = n_max {
                lines.push(format!("n_max = {n}"));
            }
            physics_lines(physics, &mut lines);
            "ed"
        }
        Command::Ineq => "ineq",
        Command::Spectrum { physics, levels } => {
            physics_lines(physics, &mut lines);
            if let Some(l) = levels {
                lines.push(format!("levels = {l}"));
            }
            "spectrum"
        }
    };
    lines.insert(0, format!("subcommand = {name}"));
    if let Some(seed) = cli.seed {
        lines.push(format!("seed = {seed}"));
    }
    lines.extend(cli.set.iter().cloned());
    lines
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => String::new(),
    };
    text.push('\n');
    text.push_str(&overrides(&cli).join("\n"));
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match orchestrate(&cfg, &cli.out) {
        Ok(manifest) => {
            for stage in &manifest.stages {
                println!("stage {:<12} {:?} {:.1}s {}", stage.name, stage.status, stage.seconds, stage.message);
            }
            for c in &manifest.checks {
                let mark = if c.pass { "PASS" } else { "FAIL" };
                println!("{mark} {:<32} {:.6e} (target {})", c.name, c.value, c.target);
            }
            if manifest.all_checks_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
