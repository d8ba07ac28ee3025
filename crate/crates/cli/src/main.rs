use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use elcomp_core::certify::Mode;
use elcomp_core::Settings;

mod commands;
mod report;

use report::Report;

#[derive(Parser, Debug)]
#[command(
    name = "elcomp",
    version,
    about = "Comparison-principle certificates for weakly coupled elliptic systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args, Debug, Clone)]
pub struct Flags {
    /// Collatz-Wielandt width tolerance for eigenvalues.
    #[arg(long, global = true)]
    tol_eig: Option<f64>,
    /// Relative tolerance for the condition margins.
    #[arg(long, global = true)]
    tol_cond: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Largest system the dense oracle will invert.
    #[arg(long, global = true)]
    oracle_max_dof: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Basic)]
    mode: ModeArg,
    /// Write the JSON report here.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// Seed for random probes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ModeArg {
    Basic,
    Sharp,
}

impl Flags {
    fn settings(&self) -> Settings {
        let mut s = Settings::default();
        if let Some(v) = self.tol_eig {
            s.tol_eig = v;
        }
        if let Some(v) = self.tol_cond {
            s.tol_cond = v;
        }
        if let Some(v) = self.max_iter {
            s.max_iter = v;
        }
        if let Some(v) = self.oracle_max_dof {
            s.oracle_max_dof = v;
        }
        s
    }

    fn mode(&self) -> Mode {
        match self.mode {
            ModeArg::Basic => Mode::Basic,
            ModeArg::Sharp => Mode::Sharp,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full certification pipeline.
    Certify {
        problem: PathBuf,
        /// Skip the dense oracle cross-check.
        #[arg(long)]
        no_oracle: bool,
    },
    /// Principal eigenvalue of the full system, the cooperative part or one component.
    Eigen {
        problem: PathBuf,
        /// 1-based species index.
        #[arg(long, conflicts_with = "cooperative")]
        component: Option<usize>,
        #[arg(long)]
        cooperative: bool,
        /// Also scan dyadic sub-rectangles up to this depth.
        #[arg(long)]
        scan: Option<usize>,
    },
    /// Decide inverse-positivity of the assembled system.
    Oracle {
        problem: PathBuf,
        /// Also decide it in the sign-gauged order.
        #[arg(long)]
        gauge: bool,
        /// Random nonnegative right-hand sides instead of the dense inverse.
        #[arg(long, value_name = "T")]
        probe: Option<usize>,
    },
    /// Solve the linear system and write the solution as a field file.
    Solve {
        problem: PathBuf,
        /// Right-hand side `f` read from a field file.
        #[arg(long, value_name = "FILE", conflicts_with = "builtin")]
        rhs_from_file: Option<PathBuf>,
        /// Use `f` and `g` from the problem file.
        #[arg(long)]
        builtin: bool,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Search for and verify a failure construction.
    Counterexample {
        problem: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Sign gauge that makes every coupling nonpositive.
    Gauge { problem: PathBuf },
    /// Coefficients of the linear system satisfied by `sub - super`.
    Linearize {
        problem: PathBuf,
        #[arg(long = "sub", value_name = "FILE")]
        sub: PathBuf,
        #[arg(long = "super", value_name = "FILE")]
        sup: PathBuf,
    },
    /// Certify a quasi-linear problem through its linearization.
    Thm8 {
        problem: PathBuf,
        #[arg(long = "sub", value_name = "FILE")]
        sub: PathBuf,
        #[arg(long = "super", value_name = "FILE")]
        sup: PathBuf,
    },
}

fn configure_threads() {
    if let Some(n) = std::env::var("ELCOMP_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let start = Instant::now();
    let set = cli.flags.settings();
    let mode = cli.flags.mode();
    let mut report = Report::new(&set, mode);
    let outcome = commands::run(&cli.command, &cli.flags, &set, mode, &mut report);
    let code = match outcome {
        Ok(()) => 0,
        Err(e) => {
            report.push_error(&e);
            e.exit_code()
        }
    };
    report.timings.total_ms = start.elapsed().as_secs_f64() * 1e3;
    print!("{}", report.render_text());
    if let Some(path) = &cli.flags.json {
        let text = report.to_json();
        if let Err(e) = std::fs::write(path, text) {
            eprintln!("cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if let Some(first) = report.errors.first() {
        eprintln!("error: {}", first.message);
    }
    ExitCode::from(code as u8)
}
