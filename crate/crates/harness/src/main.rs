use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pclm_harness::experiment::{self, write_outputs};
use pclm_harness::{Config, HarnessError, RunOptions};

#[derive(Parser)]
#[command(name = "pclm", version, about = "Run and check prediction-correction Lagrangian experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more configs (concurrently) and write CSV plus summaries.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// run even if parameter conditions fail
        #[arg(long)]
        override_validation: bool,
    },
    /// Check parameter conditions without running.
    Validate {
        config: PathBuf,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare the iterates of two configs.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// largest accepted per-iterate relative deviation
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// compare v-space iterates instead of primal-dual ones
        #[arg(long)]
        v_space: bool,
    },
}

fn load(path: &Path, iters: Option<usize>, seed: Option<u64>) -> Result<Config, HarnessError> {
    let mut cfg = Config::from_file(path)?;
    if let Some(n) = iters {
        cfg.iters = n;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn fail(e: &HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            configs,
            iters,
            seed,
            out,
            override_validation,
        } => {
            let mut loaded = Vec::new();
            for path in &configs {
                match load(path, iters, seed) {
                    Ok(c) => loaded.push(c),
                    Err(e) => return fail(&e),
                }
            }
            let opts = RunOptions { override_validation };
            let results: Vec<_> = std::thread::scope(|s| {
                let handles: Vec<_> = loaded
                    .iter()
                    .map(|cfg| s.spawn(move || experiment::run_experiment(cfg, opts)))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
            });
            let mut code = 0u8;
            for (cfg, res) in loaded.iter().zip(results) {
                match res {
                    Ok(run) => {
                        if let Err(e) = write_outputs(&out, &cfg.name, &run) {
                            return fail(&e);
                        }
                        let mut text = Vec::new();
                        run.summary.write(&mut text).expect("write to memory");
                        print!("{}", String::from_utf8_lossy(&text));
                        if !run.summary.passed() {
                            code = code.max(1);
                        }
                    }
                    Err(e) => {
                        eprintln!("{}: {e}", cfg.name);
                        code = code.max(e.exit_code() as u8);
                    }
                }
            }
            ExitCode::from(code)
        }
        Command::Validate { config, iters, seed } => {
            let cfg = match load(&config, iters, seed) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            match experiment::validate(&cfg) {
                Ok(v) if v.is_empty() => {
                    println!("{}: all conditions hold for k = 0..={}", cfg.name, cfg.iters);
                    ExitCode::SUCCESS
                }
                Ok(v) => {
                    for line in &v {
                        println!("{line}");
                    }
                    ExitCode::from(2)
                }
                Err(e) => fail(&e),
            }
        }
        Command::Compare {
            a,
            b,
            iters,
            seed,
            tol,
            v_space,
        } => {
            let (ca, cb) = match (load(&a, None, seed), load(&b, None, seed)) {
                (Ok(x), Ok(y)) => (x, y),
                (Err(e), _) | (_, Err(e)) => return fail(&e),
            };
            match experiment::compare(&ca, &cb, iters) {
                Ok(c) => {
                    println!(
                        "iters {}: max relative deviation (x, lambda) {:e}, x {:e}, lambda {:e} (abs {:e}), v {:e}",
                        c.iters, c.max_u, c.max_x, c.max_lambda, c.max_lambda_abs, c.max_v
                    );
                    let worst = if v_space { c.max_v } else { c.max_u };
                    if worst <= tol {
                        println!("PASS equivalence within {tol:e}");
                        ExitCode::SUCCESS
                    } else {
                        println!("FAIL equivalence: {worst:e} > {tol:e}");
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(&e),
            }
        }
    }
}
