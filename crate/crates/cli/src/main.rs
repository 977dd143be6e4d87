use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod io;

/// Design, check and benchmark microcontroller devices.
#[derive(Debug, Parser)]
#[command(name = "wirespec", version, about)]
struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a device from a natural-language description.
    Generate(GenerateArgs),
    /// Check a device document for structural problems.
    Validate {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Run electrical rule checks on a device document.
    Erc(ErcArgs),
    /// Score generated pinouts against the parts knowledge base.
    Score {
        #[command(subcommand)]
        what: ScoreCommand,
    },
    /// Run, review and render the benchmark.
    Bench {
        #[command(subcommand)]
        what: BenchCommand,
    },
    /// Write a device as a flat netlist or a DOT graph.
    Export(ExportArgs),
    /// Look up the parts knowledge base.
    Parts {
        #[command(subcommand)]
        what: PartsCommand,
    },
    /// Serve the HTTP API (and optionally a static UI bundle).
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct ProviderArgs {
    /// replay:<path>, live:<name> or record:<name>:<path>.
    #[arg(long)]
    provider: String,
    /// TOML file describing live providers.
    #[arg(long)]
    providers: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    description_file: PathBuf,
    #[command(flatten)]
    provider: ProviderArgs,
    /// Prompt template JSON; the bundled template when omitted.
    #[arg(long)]
    template: Option<PathBuf>,
    /// Parts knowledge base JSON; the bundled one when omitted.
    #[arg(long)]
    kb: Option<PathBuf>,
    #[arg(long, default_value_t = wirespec::pipeline::DEFAULT_MAX_REFLECTIONS)]
    max_reflections: u32,
    /// Directory for the device, run record, transcript and round artifacts.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ErcArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Comma-separated rule ids; all rules when omitted.
    #[arg(long, value_delimiter = ',')]
    rules: Option<Vec<String>>,
    /// Exit 1 on warnings too.
    #[arg(long)]
    deny_warnings: bool,
}

#[derive(Debug, Subcommand)]
enum ScoreCommand {
    Pinouts {
        #[arg(long)]
        kb: Option<PathBuf>,
        /// JSON object of component name to generated pin names.
        #[arg(long)]
        generated: PathBuf,
        /// JSON array of expert overrides.
        #[arg(long)]
        overrides: Option<PathBuf>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum BenchCommand {
    Run {
        /// Task corpus JSON; the bundled 25 tasks when omitted.
        #[arg(long)]
        tasks: Option<PathBuf>,
        #[command(flatten)]
        provider: ProviderArgs,
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long, default_value_t = wirespec::pipeline::DEFAULT_MAX_REFLECTIONS)]
        max_reflections: u32,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Verdicts {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        verdicts: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Render {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    spec: PathBuf,
    /// flat or graph
    #[arg(long, default_value = "flat")]
    format: wirespec::export::Format,
    /// Used to label supply nets in the flat format.
    #[arg(long)]
    kb: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum PartsCommand {
    Show {
        name: String,
        #[arg(long)]
        kb: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    #[arg(long)]
    providers: Option<PathBuf>,
    #[arg(long)]
    kb: Option<PathBuf>,
    #[arg(long)]
    template: Option<PathBuf>,
    #[arg(long, default_value_t = wirespec::pipeline::DEFAULT_MAX_REFLECTIONS)]
    max_reflections: u32,
    /// Session artifacts directory.
    #[arg(long, default_value = "artifacts")]
    artifacts: PathBuf,
    /// Static UI bundle to serve at /.
    #[arg(long)]
    with_ui: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
