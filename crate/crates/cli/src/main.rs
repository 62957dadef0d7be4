use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bal_core::analysis::StaircasePlan;
use bal_core::graph::{Graph, GraphFamily};
use bal_core::harness::{
    load_config, prepare, run_experiment, sweep, verify, ExperimentConfig, HarnessError,
    RoundsSpec, SweepGrid,
};
use bal_core::schedule::{check_smoothing, estimate_goodness, spectral_report};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bal", version, about = "Discrete load balancing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a graph from one of the built-in families as an edge list.
    GenGraph(GenGraphArgs),
    /// Run an experiment and write summary.json and trace.jsonl.
    Run(ConfigArgs),
    /// Print λ and the spectral round bound for the configured model.
    Spectral(ConfigArgs),
    /// Check whether the first T rounds are (K, ε)-smoothing.
    Smoothing {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        t: u64,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
    },
    /// Estimate global and local goodness windows.
    Goodness {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long)]
        tau_g: Option<u64>,
        #[arg(long)]
        tau_l: Option<u64>,
        /// Number of start rounds sampled.
        #[arg(long, default_value_t = 20)]
        starts: u64,
    },
    /// Run the invariant suites.
    Verify {
        #[arg(long)]
        suite: Option<String>,
        /// List the registered suites and exit.
        #[arg(long)]
        list: bool,
    },
    /// Run a config over a grid of multipliers, K values and seeds.
    Sweep {
        #[command(flatten)]
        common: ConfigArgs,
        #[arg(long, value_delimiter = ',')]
        multipliers: Vec<f64>,
        #[arg(long = "ks", value_delimiter = ',')]
        ks: Vec<i64>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    multiplier: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Hypercube,
    Cycle,
    Torus,
    Complete,
    RandomRegular,
}

#[derive(Args)]
struct GenGraphArgs {
    #[arg(long)]
    family: Family,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    a: Option<usize>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Check(String),
    Usage(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Check(e.to_string())
        }
    }
}

fn usage(m: impl Into<String>) -> Failure {
    Failure::Usage(m.into())
}

fn load(args: &ConfigArgs) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| usage(format!("{}: {e}", args.config.display())))?;
    let mut cfg = load_config(&text).map_err(|e| usage(e.to_string()))?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        if t == 0 {
            return Err(usage("--trials must be at least 1"));
        }
        cfg.trials = t;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    if let Some(m) = args.multiplier {
        if m.is_nan() || m <= 0.0 {
            return Err(usage("--multiplier must be positive"));
        }
        cfg.rounds = match cfg.rounds {
            RoundsSpec::Staircase { .. } => RoundsSpec::Staircase { multiplier: m },
            _ => RoundsSpec::TauSpectral { multiplier: m },
        };
    }
    Ok(cfg)
}

fn multiplier(cfg: &ExperimentConfig) -> f64 {
    match cfg.rounds {
        RoundsSpec::TauSpectral { multiplier } | RoundsSpec::Staircase { multiplier } => multiplier,
        RoundsSpec::Explicit(_) => bal_core::harness::config::DEFAULT_MULTIPLIER,
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print_json(v: &impl serde::Serialize) {
    emit(&(serde_json::to_string_pretty(v).expect("serialisable") + "\n"));
}

fn gen_graph(a: &GenGraphArgs) -> Result<(), Failure> {
    let need = |v: Option<usize>, name: &str| {
        v.ok_or_else(|| usage(format!("--{name} is required for this family")))
    };
    let family = match a.family {
        Family::Hypercube => GraphFamily::Hypercube {
            d: need(a.d, "d")? as u32,
        },
        Family::Cycle => GraphFamily::Cycle { n: need(a.n, "n")? },
        Family::Torus => GraphFamily::Torus {
            a: need(a.a, "a")?,
            b: need(a.b, "b")?,
        },
        Family::Complete => GraphFamily::Complete { n: need(a.n, "n")? },
        Family::RandomRegular => GraphFamily::RandomRegular {
            n: need(a.n, "n")?,
            d: need(a.d, "d")?,
            seed: a.seed,
        },
    };
    let g = Graph::build(&family).map_err(|e| usage(e.to_string()))?;
    write(&a.out, &g.to_edge_list())?;
    eprintln!(
        "wrote {} nodes, {} edges to {}",
        g.n(),
        g.edge_count(),
        a.out.display()
    );
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Check(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::Check(format!("{}: {e}", path.display())))
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenGraph(a) => gen_graph(&a),
        Command::Run(a) => {
            let cfg = load(&a)?;
            let art = run_experiment(&cfg)?;
            match &cfg.out {
                Some(dir) => {
                    for p in art.write_to(dir)? {
                        eprintln!("wrote {}", p.display());
                    }
                }
                None => emit(&art.summary_json()),
            }
            eprintln!("wall clock: {:.3}s", art.summary.wall_clock_secs);
            match &art.summary.stages {
                Some(st) if st.iter().any(|s| s.passed < art.summary.trials) => {
                    Err(Failure::Check("some staircase stages failed".into()))
                }
                _ => Ok(()),
            }
        }
        Command::Spectral(a) => {
            let cfg = load(&a)?;
            let prep = prepare(&cfg)?;
            let r = spectral_report(&prep.model, cfg.k as f64, multiplier(&cfg), prep.p_min)
                .map_err(|e| Failure::Check(e.to_string()))?;
            print_json(&r);
            Ok(())
        }
        Command::Smoothing { common, t, eps } => {
            let cfg = load(&common)?;
            let prep = prepare(&cfg)?;
            let r = check_smoothing(&prep.model, t, cfg.k as f64, eps);
            print_json(&r);
            if r.pass {
                Ok(())
            } else {
                Err(Failure::Check(format!(
                    "not ({}, {eps})-smoothing after {t} rounds",
                    cfg.k
                )))
            }
        }
        Command::Goodness {
            common,
            tau_g,
            tau_l,
            starts,
        } => {
            let cfg = load(&common)?;
            let prep = prepare(&cfg)?;
            let (tg, tl) = match (tau_g, tau_l) {
                (Some(g), Some(l)) => (g, l),
                _ => {
                    let plan = StaircasePlan::for_model(
                        &prep.model,
                        cfg.k as f64,
                        multiplier(&cfg),
                        prep.p_min,
                    )
                    .map_err(|e| Failure::Check(e.to_string()))?;
                    (
                        tau_g.unwrap_or(plan.tau_global),
                        tau_l.unwrap_or(plan.tau_local),
                    )
                }
            };
            if tg == 0 || tl == 0 {
                return Err(usage("windows must be at least 1"));
            }
            let grid = |top: u64| {
                let mut w: Vec<u64> = std::iter::successors(Some(1u64), |w| Some(w * 2))
                    .take_while(|&w| w < top)
                    .collect();
                w.push(top);
                w
            };
            let starts: Vec<u64> = (0..starts).collect();
            print_json(&estimate_goodness(
                &prep.model,
                &grid(tg),
                &grid(tl),
                &starts,
            ));
            Ok(())
        }
        Command::Verify { suite, list } => {
            if list {
                for s in bal_core::harness::SUITES {
                    emit(&format!("{:<22} {}\n", s.name, s.module));
                }
                return Ok(());
            }
            let results = verify(suite.as_deref())?;
            let mut failed = 0;
            for (name, o) in &results {
                emit(&format!(
                    "{} {name}: {}\n",
                    if o.pass { "PASS" } else { "FAIL" },
                    o.detail
                ));
                failed += usize::from(!o.pass);
            }
            if failed > 0 {
                Err(Failure::Check(format!(
                    "{failed} of {} suites failed",
                    results.len()
                )))
            } else {
                Ok(())
            }
        }
        Command::Sweep {
            common,
            multipliers,
            ks,
            seeds,
        } => {
            let cfg = load(&common)?;
            let rows = sweep(
                &cfg,
                &SweepGrid {
                    multipliers,
                    ks,
                    seeds,
                },
            )?;
            let text = serde_json::to_string_pretty(&rows).expect("serialisable") + "\n";
            match &cfg.out {
                Some(dir) => write(&dir.join("sweep.json"), &text),
                None => {
                    emit(&text);
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
