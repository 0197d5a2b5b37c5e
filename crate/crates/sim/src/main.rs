use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cpdm_sim::{
    describe_stage, list_presets, load_config, resolve, run_experiment, RunOptions, Scenario,
    COLUMNS,
};

fn after_help() -> String {
    format!(
        "Output: <out>/<scenario>.csv and <out>/manifest.json.\n\
         CSV columns, in order:\n  {}\n\n\
         Empty cells are quantities the row's task does not produce. `ber` is 1/n with \
         ber_upper_bound = true when no errors were counted. OSNR values are in a 12.5 GHz \
         reference bandwidth. `seed` and `link_seed` reproduce the point; `status` is ok or failed.\n\n\
         Exit codes: 0 success, 2 configuration error, 3 one or more failed points.\n\
         Every flag can also be set through the CPDM_* variable shown with it.\n\
         Passing a manifest.json as <CONFIG> repeats that run.",
        COLUMNS.join(", ")
    )
}

/// Sweeps the CPDM 8-QAM coherent link simulator over an experiment grid.
#[derive(Parser, Debug)]
#[command(name = "simulate", version, after_help = after_help())]
struct Cli {
    /// Experiment config (TOML) or a previous run's manifest.json.
    #[arg(required_unless_present_any = ["list_presets", "describe"])]
    config: Option<PathBuf>,
    /// Scenario preset; overrides the config file.
    #[arg(long, env = "CPDM_SCENARIO")]
    scenario: Option<String>,
    /// Output directory.
    #[arg(long, env = "CPDM_OUT")]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long, env = "CPDM_SEED")]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "CPDM_THREADS")]
    threads: Option<usize>,
    /// Symbols per tributary.
    #[arg(long, env = "CPDM_N_SYMBOLS")]
    n_symbols: Option<usize>,
    /// Save every buffer after every DSP stage (`<stage index>_<name>_<buffer>.bin`), one directory per point.
    #[arg(long, env = "CPDM_TAP_DIR")]
    tap_dir: Option<PathBuf>,
    /// Print the normalized configuration (defaults applied) and exit.
    #[arg(long)]
    check: bool,
    /// List the built-in scenarios and exit.
    #[arg(long)]
    list_presets: bool,
    /// Print the documentation of a DSP stage or scenario and exit.
    #[arg(long, value_name = "NAME")]
    describe: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if cli.list_presets {
        print!("{}", list_presets());
        return ExitCode::SUCCESS;
    }
    if let Some(name) = &cli.describe {
        return match describe_stage(name) {
            Ok(t) => {
                print!("{t}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        };
    }
    let path = cli.config.expect("required by clap");
    let mut spec = match load_config(&path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = &cli.scenario {
        match Scenario::from_name(s) {
            Some(s) => spec.scenario = s,
            None => {
                let valid: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
                eprintln!(
                    "config error: scenario: unknown `{s}`; valid: {}",
                    valid.join(", ")
                );
                return ExitCode::from(2);
            }
        }
    }
    if let Some(o) = cli.out {
        spec.output_dir = o;
    }
    if let Some(s) = cli.seed {
        spec.master_seed = s;
    }
    if let Some(t) = cli.threads {
        spec.threads = t;
    }
    if let Some(n) = cli.n_symbols {
        spec.n_symbols = n;
    }
    let mut resolved = spec.clone();
    if let Err(e) = resolve(&mut resolved) {
        eprintln!("config error: {e}");
        return ExitCode::from(2);
    }
    if cli.check {
        return match toml::to_string(&resolved) {
            Ok(t) => {
                print!("{t}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        };
    }
    let opts = RunOptions {
        tap_dir: cli.tap_dir,
    };
    match run_experiment(spec, &opts) {
        Ok(out) => {
            println!("{} rows -> {}", out.rows.len(), out.csv.display());
            println!("manifest -> {}", out.manifest.display());
            if out.failed > 0 {
                eprintln!(
                    "{} point(s) failed; see the status and message columns",
                    out.failed
                );
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
