use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use normsolve::run::{install_thread_cap, run, ConfigMap, RunConfig, Task};
use normsolve::Error;

#[derive(Parser)]
#[command(name = "normsolve", version, about = "Normalized solutions of coupled NLS systems")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long = "grid-n", global = true)]
    grid_n: Option<usize>,
    #[arg(long, global = true)]
    rmax: Option<f64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides, same keys as the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// rho0, beta0, K1..K3, q and the threshold inequalities.
    Constants,
    /// Scalar ground state summary {C0, C1, gn_constant}.
    ScalarGround {
        #[arg(long = "N")]
        dim: usize,
        #[arg(long)]
        p: f64,
    },
    /// Local minimizer inside B(rho0).
    SolveLocal,
    /// Mountain-pass critical point (H0).
    SolveMp {
        /// Existing local minimizer record; solved afresh when absent.
        #[arg(long)]
        local: Option<PathBuf>,
    },
    /// Linking critical point (H1).
    SolveLink,
    /// Fibering curve theta(t) to CSV.
    Landscape {
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// m(a1, a2) <= m(d1, d2) + m(a1 - d1, a2 - d2).
    SubaddCheck {
        #[arg(long)]
        d1: Option<f64>,
        #[arg(long)]
        d2: Option<f64>,
        #[arg(long)]
        splits: Option<usize>,
    },
    /// Time evolution of a stored solution.
    Evolve {
        #[arg(long)]
        solution: PathBuf,
        #[arg(long = "T")]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        perturb: Option<f64>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Every property check; JSON report, nonzero exit on any failure.
    PropertySuite {
        /// `desk` or `acceptance`.
        #[arg(long)]
        scale: Option<String>,
    },
    /// Task taken from the config file's `task` key.
    Run,
}

fn build(cli: &Cli) -> Result<RunConfig, Error> {
    let common = &cli.common;
    let mut map = match &common.config {
        Some(path) => ConfigMap::from_file(path)?,
        None => ConfigMap::default(),
    };
    let mut set = |k: &str, v: String| map.set(k, &v);
    if let Some(n) = common.grid_n {
        set("grid_n", n.to_string())?;
    }
    if let Some(r) = common.rmax {
        set("r_max", format!("{r:?}"))?;
    }
    if let Some(t) = common.tol {
        set("tol", format!("{t:?}"))?;
    }
    if let Some(s) = common.seed {
        set("seed", s.to_string())?;
    }
    if let Some(o) = &common.out {
        set("output_dir", toml_string(&o.to_string_lossy()))?;
    }
    let task = match &cli.command {
        Command::Constants => Some(Task::Constants),
        Command::ScalarGround { dim, p } => {
            set("N", dim.to_string())?;
            set("p", format!("{p:?}"))?;
            Some(Task::ScalarGround)
        }
        Command::SolveLocal => Some(Task::SolveLocal),
        Command::SolveMp { local } => {
            if let Some(l) = local {
                set("local", toml_string(&l.to_string_lossy()))?;
            }
            Some(Task::SolveMP)
        }
        Command::SolveLink => Some(Task::SolveLink),
        Command::Landscape { solution } => {
            if let Some(s) = solution {
                set("solution", toml_string(&s.to_string_lossy()))?;
            }
            Some(Task::Landscape)
        }
        Command::SubaddCheck { d1, d2, splits } => {
            for (k, v) in [("d1", d1), ("d2", d2)] {
                if let Some(v) = v {
                    set(k, format!("{v:?}"))?;
                }
            }
            if let Some(s) = splits {
                set("splits", s.to_string())?;
            }
            Some(Task::SubaddCheck)
        }
        Command::Evolve {
            solution,
            t_end,
            dt,
            perturb,
            stride,
        } => {
            set("solution", toml_string(&solution.to_string_lossy()))?;
            for (k, v) in [("T", t_end), ("dt", dt), ("perturb", perturb)] {
                if let Some(v) = v {
                    set(k, format!("{v:?}"))?;
                }
            }
            if let Some(s) = stride {
                set("stride", s.to_string())?;
            }
            Some(Task::Evolve)
        }
        Command::PropertySuite { scale } => {
            if let Some(s) = scale {
                set("scale", toml_string(s))?;
            }
            Some(Task::PropertySuite)
        }
        Command::Run => None,
    };
    for pair in &common.set {
        map.set_pair(pair)?;
    }
    RunConfig::from_map(&map, task)
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match install_thread_cap().and_then(|_| build(&cli)) {
        Err(e) => {
            eprintln!("normsolve: {e}");
            e.exit_code()
        }
        Ok(cfg) => match run(&cfg) {
            Ok(out) => {
                let text = serde_json::to_string_pretty(&out.summary).unwrap_or_default();
                // a closed pipe is not worth a panic
                let _ = writeln!(std::io::stdout(), "{text}");
                for a in &out.artifacts {
                    eprintln!("wrote {}", a.display());
                }
                out.exit_code
            }
            Err(e) => {
                eprintln!("normsolve: {e}");
                e.exit_code()
            }
        },
    };
    ExitCode::from(code as u8)
}
