//! Command-line front end: analysis, normal forms, parallelizability,
//! field certificates and the example-web catalogue.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 invalid web,
//! 3 internal consistency alarm.

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use websym::atlas::{atlas_entries, find_entry, verify_all, verify_entry, EntryStatus};
use websym::report::{
    analyze, field_from_json, normal_form, parallelizable, to_json, verify_field,
    web_spec_from_json, PipelineError,
};

#[derive(Parser)]
#[command(
    name = "websym",
    version,
    about = "Infinitesimal symmetry algebras of (n+1)-webs of codimension 1, in exact arithmetic"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutputOpt {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveOpts {
    /// Override the web's jet order (default 8, minimum 4).
    #[arg(long)]
    order: Option<u32>,
    /// Cap the component degree of solver unknowns (default order - 1).
    #[arg(long)]
    degree_cap: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: validate, solve, classify, bound checks, profiles.
    Analyze {
        web: PathBuf,
        #[command(flatten)]
        solve: SolveOpts,
        #[command(flatten)]
        output: OutputOpt,
    },
    /// Order-by-order normal form of the extra integral.
    NormalForm {
        web: PathBuf,
        #[arg(long)]
        order: Option<u32>,
        #[command(flatten)]
        output: OutputOpt,
    },
    /// Both parallelizability tests with their agreement verdict.
    Parallelizable {
        web: PathBuf,
        #[arg(long)]
        order: Option<u32>,
        #[command(flatten)]
        output: OutputOpt,
    },
    /// Certificate for one explicit candidate field.
    VerifyField {
        web: PathBuf,
        field: PathBuf,
        #[arg(long)]
        order: Option<u32>,
        #[command(flatten)]
        output: OutputOpt,
    },
    /// Catalogue of example webs.
    Atlas {
        #[command(subcommand)]
        command: AtlasCommand,
    },
}

#[derive(Subcommand)]
enum AtlasCommand {
    /// List the catalogue with claims.
    List {
        #[command(flatten)]
        output: OutputOpt,
    },
    /// Re-verify one entry, or the whole catalogue with --all.
    Verify {
        id: Option<String>,
        #[arg(long)]
        all: bool,
        /// Write one JSON report per entry into this directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version as "errors" with zero-ish
            // semantics; keep those at 0, real usage errors at 1
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    InvalidWeb(String),
    Internal(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::InvalidWeb(m) | CliError::Internal(m) => {
                write!(f, "{m}")
            }
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::InvalidWeb(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::BadInput(m) => CliError::Usage(m),
            PipelineError::InvalidWeb(m) => CliError::InvalidWeb(m),
            PipelineError::Internal(m) => CliError::Internal(m),
        }
    }
}

fn read_json(path: &Path) -> Result<serde_json::Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("bad JSON in {}: {e}", path.display())))
}

fn emit(json: String, out: &OutputOpt) -> Result<(), CliError> {
    match &out.out {
        None => {
            println!("{json}");
            Ok(())
        }
        Some(path) => std::fs::write(path, json + "\n")
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
    }
}

fn load_spec(
    path: &Path,
    order: Option<u32>,
) -> Result<websym::symmetry::WebSpec, CliError> {
    let v = read_json(path)?;
    let mut spec = web_spec_from_json(&v)?;
    if let Some(w) = order {
        spec.order = w;
    }
    Ok(spec)
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Analyze {
            web,
            solve,
            output,
        } => {
            let spec = load_spec(&web, solve.order)?;
            let report = analyze(&spec, solve.degree_cap)?;
            let alarmed = !report.alarms.is_empty();
            emit(to_json(&report), &output)?;
            Ok(if alarmed {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::NormalForm { web, order, output } => {
            let spec = load_spec(&web, order)?;
            let report = normal_form(&spec)?;
            emit(to_json(&report), &output)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Parallelizable { web, order, output } => {
            let spec = load_spec(&web, order)?;
            let report = parallelizable(&spec)?;
            let alarmed = report.alarm;
            emit(to_json(&report), &output)?;
            Ok(if alarmed {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::VerifyField {
            web,
            field,
            order,
            output,
        } => {
            let spec = load_spec(&web, order)?;
            let fv = read_json(&field)?;
            let f = field_from_json(&fv, &spec)?;
            let report = verify_field(&spec, &f)?;
            emit(to_json(&report), &output)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Atlas { command } => match command {
            AtlasCommand::List { output } => {
                let entries = atlas_entries();
                emit(to_json(&entries), &output)?;
                Ok(ExitCode::SUCCESS)
            }
            AtlasCommand::Verify { id, all, out_dir } => run_atlas_verify(id, all, out_dir),
        },
    }
}

fn run_atlas_verify(
    id: Option<String>,
    all: bool,
    out_dir: Option<PathBuf>,
) -> Result<ExitCode, CliError> {
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    if all {
        let sweep = verify_all().map_err(|e| CliError::Internal(e.to_string()))?;
        if let Some(dir) = &out_dir {
            for r in &sweep.reports {
                let path = dir.join(format!("{}.json", r.id));
                std::fs::write(&path, to_json(r) + "\n").map_err(|e| {
                    CliError::Usage(format!("cannot write {}: {e}", path.display()))
                })?;
            }
        }
        for r in &sweep.reports {
            let status = match r.status {
                EntryStatus::Confirmed => "confirmed",
                EntryStatus::Discrepancy => "discrepancy",
                EntryStatus::ComputedOnly => "computed-only",
            };
            println!(
                "{:<20} {:<12} dim={} {}",
                r.id,
                status,
                r.solver_dim,
                if r.diffs.is_empty() {
                    String::new()
                } else {
                    r.diffs.join("; ")
                }
            );
        }
        if !sweep.discrepancies.is_empty() {
            println!("discrepancies: {}", sweep.discrepancies.join(", "));
        }
        if !sweep.alarms.is_empty() {
            eprintln!("alarms:");
            for a in &sweep.alarms {
                eprintln!("  {a}");
            }
            return Ok(ExitCode::from(3));
        }
        Ok(ExitCode::SUCCESS)
    } else {
        let id = id.ok_or_else(|| {
            CliError::Usage("atlas verify needs an entry id or --all".into())
        })?;
        let entry = find_entry(&id).map_err(|e| CliError::Usage(e.to_string()))?;
        let report = verify_entry(&entry).map_err(|e| CliError::Internal(e.to_string()))?;
        let alarmed = !report.alarms.is_empty();
        let json = to_json(&report);
        match &out_dir {
            None => println!("{json}"),
            Some(dir) => {
                let path = dir.join(format!("{}.json", report.id));
                std::fs::write(&path, json + "\n").map_err(|e| {
                    CliError::Usage(format!("cannot write {}: {e}", path.display()))
                })?;
            }
        }
        Ok(if alarmed {
            ExitCode::from(3)
        } else {
            ExitCode::SUCCESS
        })
    }
}
