mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_pairs, RunConfig};

#[derive(Parser)]
#[command(name = "swe", version, about = "Rotating shallow water solver with energy-conserving upwinding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write diagnostics, snapshots and a manifest.
    Run(RunArgs),
    /// Run the property suites on seeded random instances.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random instances per property.
        #[arg(long, default_value_t = 10)]
        instances: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    /// Picard iterations per step.
    #[arg(long)]
    picard: Option<String>,
    /// Stop Picard early below this relative residual.
    #[arg(long)]
    picard_tol: Option<String>,
    /// explicit or implicit
    #[arg(long)]
    mode: Option<String>,
    /// Refinement level (sphere) or cells per side (unit square).
    #[arg(long)]
    refinement: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    diagnostics_every: Option<String>,
    #[arg(long)]
    snapshot_every: Option<String>,
    #[arg(long)]
    quadrature_degree: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Also write the mesh to mesh.txt.
    #[arg(long)]
    dump_mesh: bool,
    /// Any other configuration key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn pairs(&self) -> Result<Vec<(String, String)>, String> {
        let mut p = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                parse_pairs(&text).map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => Vec::new(),
        };
        let flags = [
            ("scenario", &self.scenario),
            ("variant", &self.variant),
            ("scheme", &self.scheme),
            ("dt", &self.dt),
            ("steps", &self.steps),
            ("picard_iterations", &self.picard),
            ("picard_tolerance", &self.picard_tol),
            ("picard_mode", &self.mode),
            ("refinement", &self.refinement),
            ("diagnostics_every", &self.diagnostics_every),
            ("snapshot_every", &self.snapshot_every),
            ("quadrature_degree", &self.quadrature_degree),
            ("seed", &self.seed),
        ];
        p.extend(flags.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))));
        if let Some(out) = &self.out {
            p.push(("out".into(), out.display().to_string()));
        }
        if self.dump_mesh {
            p.push(("dump_mesh".into(), "true".into()));
        }
        for s in &self.set {
            let mut kv = parse_pairs(s).map_err(|e| format!("--set {s}: {e}"))?;
            p.append(&mut kv);
        }
        Ok(p)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let cfg = match args.pairs().and_then(|p| RunConfig::from_pairs(&p).map_err(|e| e.to_string())) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("configuration error: {e}");
                    return ExitCode::from(run::EXIT_CONFIG as u8);
                }
            };
            match run::run(&cfg) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Verify { seed, instances } => match swe_core::verify::run_all(seed, instances) {
            Ok(outcomes) => {
                for o in &outcomes {
                    println!("{o}");
                }
                let failed = outcomes.iter().filter(|o| !o.passed).count();
                println!("{} properties, {failed} failed", outcomes.len());
                if failed == 0 {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::FAILURE
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(run::EXIT_SOLVER as u8)
            }
        },
    }
}
