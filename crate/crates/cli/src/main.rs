use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gptw_core::postulates::PostulateId;
use gptw_cli::document::parse_builtin;
use gptw_cli::{
    check_document, env_seed, reconstruct_document, render_markdown, write_atomic, CliError, ExitStatus, ReportDocument,
    RunOptions, TheoryDocument,
};

#[derive(Parser)]
#[command(name = "gptw", version, about = "Checks generalized probabilistic theories against the reconstruction postulates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Markdown,
}

#[derive(clap::Args)]
struct Output {
    /// Write the JSON report here (atomically).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the markdown rendering here.
    #[arg(long)]
    markdown: Option<PathBuf>,
    /// What to print on stdout.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run postulate checks on a theory document.
    Check {
        path: PathBuf,
        /// Comma-separated subset of cr, tl, nse, all-effects, interact.
        #[arg(long, value_delimiter = ',', default_value = "cr,tl,nse,all-effects,interact")]
        postulates: Vec<PostulateId>,
        /// Tolerance override for every membership and effect test.
        #[arg(long)]
        tol: Option<f64>,
        /// Seed; defaults to $GPTW_SEED, then the document seed, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = gptw_core::postulates::DEFAULT_SAMPLES)]
        samples: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Run the single-gbit reconstruction pipeline.
    Reconstruct {
        path: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = gptw_core::postulates::DEFAULT_SAMPLES)]
        samples: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Print or write the document of a builtin theory.
    Builtin {
        /// qubit, square_gbit, classical(n), ball(d) or quantum(n).
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(report: &ReportDocument, output: &Output) -> Result<(), CliError> {
    let json = report.to_json()?;
    let md = render_markdown(report);
    if let Some(p) = &output.out {
        write_atomic(p, &json)?;
    }
    if let Some(p) = &output.markdown {
        write_atomic(p, &md)?;
    }
    match output.format {
        Format::Json if output.out.is_none() => print!("{json}"),
        Format::Json => {
            for c in &report.checks {
                println!("{:<20} {}", c.report.id, c.report.status.as_str());
            }
        }
        Format::Markdown => print!("{md}"),
    }
    Ok(())
}

fn seed(flag: Option<u64>) -> Result<Option<u64>, CliError> {
    match flag {
        Some(s) => Ok(Some(s)),
        None => env_seed(),
    }
}

fn run(cli: Cli) -> Result<ExitStatus, CliError> {
    match cli.command {
        Command::Check {
            path,
            postulates,
            tol,
            seed: s,
            samples,
            output,
        } => {
            let doc = TheoryDocument::load(&path)?;
            let opts = RunOptions {
                samples,
                tolerance: tol,
                seed: seed(s)?,
            };
            let report = check_document(&doc, &postulates, &opts)?;
            emit(&report, &output)?;
            Ok(report.status.into())
        }
        Command::Reconstruct {
            path,
            seed: s,
            samples,
            output,
        } => {
            let doc = TheoryDocument::load(&path)?;
            let opts = RunOptions {
                samples,
                tolerance: None,
                seed: seed(s)?,
            };
            let report = reconstruct_document(&doc, &opts)?;
            emit(&report, &output)?;
            Ok(report.status.into())
        }
        Command::Builtin { name, out } => {
            let doc = TheoryDocument::builtin(parse_builtin(&name)?)?;
            let json = doc.to_json()?;
            match out {
                Some(p) => write_atomic(&p, &json)?,
                None => print!("{json}"),
            }
            Ok(ExitStatus::Pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(ExitStatus::InputError.code() as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
