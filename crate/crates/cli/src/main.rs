//! `ccop`: certify, lift, project and enumerate stationary points of
//! cardinality-constrained programs described in TOML problem files.

mod commands;
mod problem_file;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use ccop_core::Grid;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use commands::{CensusSide, Failure, Method, PointSide, EXIT_INPUT};
use problem_file::{Overrides, ProblemFile, RawTolerances};
use report::SCHEMA;

#[derive(Parser, Debug)]
#[command(name = "ccop", version, about = "Stationary-point certification for cardinality-constrained programs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Feasibility tolerance (overrides the file).
    #[arg(long, global = true)]
    tol_feas: Option<f64>,
    /// Activity tolerance (overrides the file).
    #[arg(long, global = true)]
    tol_act: Option<f64>,
    /// Relative singular-value cutoff (overrides the file).
    #[arg(long, global = true)]
    tol_rank: Option<f64>,
    /// Margin for strict sign and eigenvalue tests (overrides the file).
    #[arg(long, global = true)]
    tol_strict: Option<f64>,
    /// Run T-side operations even when c and eps are inadmissible.
    #[arg(long = "override-assumption1", global = true)]
    override_admissibility: bool,
    #[arg(long, value_enum, default_value_t = Format::Human, global = true)]
    format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Human,
    Machine,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SideArg {
    M,
    T,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CensusSideArg {
    M,
    T,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Quadratic,
    Newton,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Newton starts per axis.
    #[arg(long, default_value_t = 5)]
    grid_points: usize,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    grid_lower: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    grid_upper: f64,
}

impl GridArgs {
    fn grid(&self) -> Grid {
        Grid {
            per_axis: self.grid_points,
            lower: self.grid_lower,
            upper: self.grid_upper,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify a named point on the CCOP (m) or on R(c, eps) (t).
    Certify {
        file: PathBuf,
        #[arg(long)]
        point: String,
        #[arg(long, value_enum, default_value_t = SideArg::M)]
        side: SideArg,
    },
    /// List every T-stationary companion of an M-stationary point.
    Lift {
        file: PathBuf,
        #[arg(long)]
        point: String,
    },
    /// Map a T-stationary point back to the CCOP.
    Project {
        file: PathBuf,
        #[arg(long)]
        point: String,
    },
    /// Enumerate stationary points and run the counting checks.
    Census {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Quadratic)]
        method: MethodArg,
        #[arg(long, value_enum, default_value_t = CensusSideArg::Both)]
        side: CensusSideArg,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Report CC-LICQ, and MPOC-LICQ when the point has a y part.
    CheckLicq {
        file: PathBuf,
        #[arg(long)]
        point: String,
    },
    /// Census of both sides, counting checks and a lift/project round trip.
    Verify {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Quadratic)]
        method: MethodArg,
        #[command(flatten)]
        grid: GridArgs,
    },
}

impl Command {
    fn file(&self) -> &PathBuf {
        match self {
            Command::Certify { file, .. }
            | Command::Lift { file, .. }
            | Command::Project { file, .. }
            | Command::Census { file, .. }
            | Command::CheckLicq { file, .. }
            | Command::Verify { file, .. } => file,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Certify { .. } => "certify",
            Command::Lift { .. } => "lift",
            Command::Project { .. } => "project",
            Command::Census { .. } => "census",
            Command::CheckLicq { .. } => "check-licq",
            Command::Verify { .. } => "verify",
        }
    }
}

fn method(m: MethodArg) -> Method {
    match m {
        MethodArg::Quadratic => Method::Quadratic,
        MethodArg::Newton => Method::Newton,
    }
}

/// Keys of the report body shown in human output, per command.
fn detail_keys(command: &Command) -> &'static [&'static str] {
    match command {
        Command::Certify { .. } => &["certificate", "tolerances"],
        Command::Project { .. } => &["projection", "tolerances"],
        Command::CheckLicq { .. } | Command::Lift { .. } | Command::Census { .. } | Command::Verify { .. } => {
            &["tolerances"]
        }
    }
}

fn run(cli: &Cli) -> Result<report::Outcome, Failure> {
    let g = &cli.global;
    let overrides = Overrides {
        tolerances: RawTolerances {
            tol_feas: g.tol_feas,
            tol_act: g.tol_act,
            tol_rank: g.tol_rank,
            tol_strict: g.tol_strict,
        },
        admissibility: g.override_admissibility,
    };
    let file = ProblemFile::load(cli.command.file(), &overrides)?;
    match &cli.command {
        Command::Certify { point, side, .. } => commands::certify(
            &file,
            point,
            match side {
                SideArg::M => PointSide::M,
                SideArg::T => PointSide::T,
            },
        ),
        Command::Lift { point, .. } => commands::lift_point(&file, point),
        Command::Project { point, .. } => commands::project_point(&file, point),
        Command::Census { method: m, side, grid, .. } => commands::census(
            &file,
            method(*m),
            match side {
                CensusSideArg::M => CensusSide::M,
                CensusSideArg::T => CensusSide::T,
                CensusSideArg::Both => CensusSide::Both,
            },
            &grid.grid(),
        ),
        Command::CheckLicq { point, .. } => commands::check_licq(&file, point),
        Command::Verify { method: m, grid, .. } => commands::verify(&file, method(*m), &grid.grid()),
    }
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(u8::try_from(code).unwrap_or(u8::MAX))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return exit(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(&cli) {
        Ok(outcome) => {
            let text = match cli.global.format {
                Format::Human => outcome.human(detail_keys(&cli.command)),
                Format::Machine => outcome.machine(),
            };
            let _ = stdout.write_all(text.as_bytes());
            exit(outcome.code)
        }
        Err(failure) => {
            let code = failure.code();
            eprintln!("error: {failure}");
            if cli.global.format == Format::Machine {
                let doc = json!({
                    "schema": SCHEMA,
                    "command": cli.command.name(),
                    "exit_code": code,
                    "error": failure.to_string(),
                });
                let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&doc).expect("serializable"));
            }
            exit(code)
        }
    }
}
