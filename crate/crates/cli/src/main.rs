//! Command-line entry point: every pipeline stage individually plus the
//! end-to-end run, operating on a run directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hullopt_core::criteria;
use hullopt_core::model::{solve_hifi, Configuration, ModelSpec};
use hullopt_core::pipeline::{
    self, check_run_dir, drive_phase, incumbent_summary, init_run_dir, write_crossval,
    write_history_svg, write_reports, PhaseFamily, PipelineConfig, RunState,
};
use hullopt_core::rom::GprConfig;
use hullopt_core::Error;

#[derive(Parser)]
#[command(
    name = "hullopt",
    about = "Surrogate-assisted structural thickness optimization",
    version
)]
struct Cli {
    /// Run directory all state lives in.
    #[arg(long, global = true, default_value = "run")]
    run_dir: PathBuf,

    /// Machine-readable JSON summaries on stdout.
    #[arg(long, global = true)]
    json: bool,

    /// Override the configured base seed for this invocation.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the per-round BO/PDS time limit (seconds).
    #[arg(long, global = true)]
    time_limit: Option<f64>,

    /// Override the BO iteration budget per round.
    #[arg(long, global = true)]
    max_iters: Option<usize>,

    /// Override the reparameterization schedule with a single target.
    #[arg(long, global = true)]
    params_target: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InitArgs {
    /// Copy an existing model spec instead of writing the built-in demo.
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Columns of the demo grid (smaller is quicker).
    #[arg(long)]
    nx: Option<usize>,
    /// Desk-scale optimizer budgets instead of the reference settings.
    #[arg(long)]
    quick: bool,
}

#[derive(Args)]
struct CrossvalArgs {
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Comma-separated truncation ranks, e.g. 4,6,8.
    #[arg(long, value_delimiter = ',', default_values_t = vec![4usize, 6, 8])]
    ranks: Vec<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Create a run directory with the model and pipeline configs.
    Init(InitArgs),
    /// Draw and solve the initial sample.
    Sample,
    /// High-fidelity solve of one configuration (comma-separated mm values).
    Solve {
        #[arg(long, value_delimiter = ',', required = true)]
        config: Vec<f64>,
    },
    /// Fit the surrogates on the current database and archive them.
    Fit,
    /// Multi-objective rounds with infill validation.
    Moo,
    /// Bayesian-optimization rounds with validation.
    Bo,
    /// Principal-dimensions-search rounds with validation.
    Pds,
    /// One reparameterization step (stage end + refinement).
    Reparam,
    /// The full pipeline end to end.
    Run,
    /// Write the report bundle (CSV always, SVG optionally).
    Report {
        #[arg(long)]
        svg: bool,
    },
    /// K-fold cross-validation error distributions over a rank grid.
    Crossval(CrossvalArgs),
}

/// Exclusive lock on a run directory; one CLI invocation at a time.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(run_dir: &Path) -> Result<Self, Error> {
        check_run_dir(run_dir)?;
        let path = run_dir.join(".lock");
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(mut f) => {
                use std::io::Write;
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "{} is locked by another invocation (remove {} if stale)",
                run_dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn apply_overrides(cli: &Cli, st: &mut RunState) {
    if let Some(seed) = cli.seed {
        st.config.seed = seed;
    }
    if let Some(t) = cli.time_limit {
        st.config.bo.time_limit_secs = Some(t);
        st.config.pds.time_limit_secs = Some(t);
    }
    if let Some(n) = cli.max_iters {
        st.config.bo.max_iters = n;
    }
    if let Some(target) = cli.params_target {
        st.config.reparam.schedule = vec![target];
    }
}

fn open_state(cli: &Cli) -> Result<RunState, Error> {
    check_run_dir(&cli.run_dir)?;
    let mut st = RunState::open(&cli.run_dir)?;
    apply_overrides(cli, &mut st);
    Ok(st)
}

fn print_summary(cli: &Cli, st: &RunState) -> Result<(), Error> {
    let Some(summary) = incumbent_summary(st)? else {
        if cli.json {
            println!("{{\"incumbent\": null}}");
        } else {
            println!("no feasible incumbent yet");
        }
        return Ok(());
    };
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        println!(
            "incumbent: f = {:.3} t, mass = {:.3} t, m_gap = {:.2}%, n_y = {}, n_b = {}, \
             deflection = {:.1} mm, vcg = {:.4} m ({} params, {} HF evals)",
            summary.penalized,
            summary.qois.mass,
            summary.mass_gap_percent,
            summary.qois.n_y,
            summary.qois.n_b,
            summary.qois.deflection,
            summary.qois.vcg,
            summary.n_params,
            summary.hf_evals,
        );
        println!(
            "config: [{}]",
            summary
                .config
                .iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Init(args) => {
            let mut model = match &args.model_file {
                Some(path) => ModelSpec::from_path(path)?,
                None => ModelSpec::demo(),
            };
            if let Some(nx) = args.nx {
                model.grid.nx = nx;
            }
            let mut config = if args.quick {
                PipelineConfig::quick_demo()
            } else {
                PipelineConfig::default_for_demo()
            };
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            if let Some(target) = cli.params_target {
                config.reparam.schedule = vec![target];
            }
            init_run_dir(&cli.run_dir, &model, &config)?;
            println!("initialized run directory {}", cli.run_dir.display());
            Ok(())
        }
        Command::Sample => {
            let _lock = DirLock::acquire(&cli.run_dir)?;
            let mut st = open_state(cli)?;
            drive_phase(&mut st, PhaseFamily::Sample)?;
            println!("database holds {} high-fidelity samples", st.db.len());
            Ok(())
        }
        Command::Solve { config } => {
            let _lock = DirLock::acquire(&cli.run_dir)?;
            let st = open_state(cli)?;
            let configuration = Configuration::new(config.clone());
            let snapshot = solve_hifi(&st.model, &st.space, &configuration)?;
            let qois = st.qois_of(&snapshot, &configuration)?;
            let f = criteria::penalized_mass(&qois, &st.config.penalty);
            if cli.json {
                println!(
                    "{}",
                    serde_json::json!({
                        "config": configuration.values,
                        "n_y": qois.n_y,
                        "n_b": qois.n_b,
                        "deflection_mm": qois.deflection,
                        "mass_t": qois.mass,
                        "vcg_m": qois.vcg,
                        "penalized_t": f,
                    })
                );
            } else {
                println!(
                    "n_y = {}, n_b = {}, deflection = {:.2} mm, mass = {:.3} t, vcg = {:.4} m, \
                     penalized = {:.3} t",
                    qois.n_y, qois.n_b, qois.deflection, qois.mass, qois.vcg, f
                );
            }
            Ok(())
        }
        Command::Fit => {
            let _lock = DirLock::acquire(&cli.run_dir)?;
            let mut st = open_state(cli)?;
            st.fit_surrogate()?;
            let surrogate = st.surrogate.as_ref().unwrap();
            surrogate.save(&cli.run_dir.join("surrogates/current"))?;
            println!(
                "fitted 12 field surrogates + 2 deflection regressors on {} samples, rank {}",
                st.db.len(),
                surrogate.rank
            );
            Ok(())
        }
        Command::Moo => {
            let _lock = DirLock::acquire(&cli.run_dir)?;
            let mut st = open_state(cli)?;
            drive_phase(&mut st, PhaseFamily::Moo)?;
            print_summary(cli, &st)
        }
        Command::Bo => {
            let _lock = DirLock::acquire(&cli.run_dir)?;
            let mut st = open_state(cli)?;
            drive_phase(&mut st, PhaseFamily::Bo)?;
            print_summary(cli, &st)
        }
        Command::Pds => {
            let _lock = DirLock::acquire(&cli.run_dir)?;
            let mut st = open_state(cli)?;
            drive_phase(&mut st, PhaseFamily::Pds)?;
            print_summary(cli, &st)
        }
        Command::Reparam => {
            let _lock = DirLock::acquire(&cli.run_dir)?;
            let mut st = open_state(cli)?;
            drive_phase(&mut st, PhaseFamily::Reparam)?;
            println!(
                "parameterization now has {} parameters",
                st.space.n_params()
            );
            print_summary(cli, &st)
        }
        Command::Run => {
            let _lock = DirLock::acquire(&cli.run_dir)?;
            let mut st = open_state(cli)?;
            while pipeline::step(&mut st)? {}
            write_reports(&st)?;
            print_summary(cli, &st)
        }
        Command::Report { svg } => {
            let _lock = DirLock::acquire(&cli.run_dir)?;
            let st = open_state(cli)?;
            write_reports(&st)?;
            if *svg {
                write_history_svg(&st)?;
            }
            println!(
                "reports written to {}",
                cli.run_dir.join("reports").display()
            );
            print_summary(cli, &st)
        }
        Command::Crossval(args) => {
            let _lock = DirLock::acquire(&cli.run_dir)?;
            let st = open_state(cli)?;
            let gpr = GprConfig {
                restarts: 2,
                max_iters: 60,
                ..st.config.gpr
            };
            let path = write_crossval(&st, &args.ranks, args.folds, &gpr)?;
            println!(
                "cross-validation distributions written to {}",
                path.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("HULLOPT_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage problems are user errors
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
