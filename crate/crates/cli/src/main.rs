use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kglab_cli::pipeline::{resolve_out_root, MANIFEST_FILE};
use kglab_cli::{registry, run, CliError, Scenario, ToleranceProfile};

#[derive(Parser)]
#[command(name = "kglab", version, about = "Klein-Gordon pilot-wave scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Root directory for run artifacts [default: $KGLAB_OUT_DIR or ./kglab-out]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// default | strict
    #[arg(long, global = true, default_value = "default")]
    tolerance_profile: ToleranceProfile,

    /// Worker threads for parallel stages (hint only)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, or a bundled scenario by name
    Run { scenario: String },
    /// List bundled scenarios
    List,
    /// Print a bundled scenario
    Describe { name: String },
}

fn load(arg: &str) -> Result<(String, Option<PathBuf>), CliError> {
    let path = PathBuf::from(arg);
    if path.is_file() {
        let text = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(|p| p.to_path_buf());
        return Ok((text, base));
    }
    match registry::get(arg) {
        Some(text) => Ok((text.to_string(), None)),
        None => Err(CliError::UnknownScenario(arg.to_string())),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        // a second global pool cannot be built; the hint is then ignored
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::List => {
            for name in registry::list() {
                println!("{name}");
            }
            Ok(())
        }
        Command::Describe { name } => {
            let text = registry::get(&name).ok_or(CliError::UnknownScenario(name))?;
            print!("{text}");
            Ok(())
        }
        Command::Run { scenario } => {
            let (text, base) = load(&scenario)?;
            let mut sc = Scenario::parse(&text)?;
            if let Some(base) = base {
                sc.resolve_paths(&base);
            }
            let root = resolve_out_root(cli.out_dir);
            let outcome = run(&sc, &text, &root, cli.tolerance_profile)?;
            println!("{}", outcome.dir.join(MANIFEST_FILE).display());
            if outcome.failed_checks.is_empty() {
                Ok(())
            } else {
                Err(CliError::Checks(outcome.failed_checks))
            }
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kglab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
