use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use econet_core::tail::{self, ks_critical_5pct, SizeSample};

use econet::config::{self, RunConfig};
use econet::experiments;
use econet::output;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_CHECK: u8 = 4;

#[derive(Parser)]
#[command(name = "econet", about = "Scale-free trade-network avalanche simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Configuration file (flat `key = value`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Extra diagnostics on stderr.
    #[arg(long, global = true, conflicts_with = "quiet")]
    verbose: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// One pooled run; writes u_t.csv, omega.csv, avalanches.jsonl, fit.json.
    Run,
    /// Cartesian (L, c_th) grid; writes surface.csv.
    Sweep,
    /// F_0 / F_L / F_Omega comparison; writes scenario.json.
    Scenario,
    /// Fit a power-law tail to sizes read from a CSV or JSONL file.
    Fit {
        /// Input file: one size per line (CSV) or an avalanche JSONL log.
        #[arg(long)]
        input: PathBuf,
        /// Exit nonzero when the power-law hypothesis fails the 5% KS bar.
        #[arg(long)]
        check: bool,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

fn cfg_fail(msg: impl ToString) -> Failure {
    Failure { code: EXIT_CONFIG, msg: msg.to_string() }
}

fn run_fail(msg: impl ToString) -> Failure {
    Failure { code: EXIT_RUNTIME, msg: msg.to_string() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn load_config_text(cli: &Cli) -> Result<String, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| cfg_fail("--config PATH is required for this subcommand"))?;
    std::fs::read_to_string(path).map_err(|e| cfg_fail(format!("{}: {e}", path.display())))
}

fn out_dir(cli: &Cli) -> Result<&Path, Failure> {
    cli.out
        .as_deref()
        .ok_or_else(|| cfg_fail("--out DIR is required for this subcommand"))
}

fn apply_seed(cfg: &mut RunConfig, cli: &Cli) {
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    match cli.cmd {
        Cmd::Run => {
            let text = load_config_text(&cli)?;
            let mut cfg = config::parse_run(&text).map_err(|e| cfg_fail(e))?;
            apply_seed(&mut cfg, &cli);
            let dir = out_dir(&cli)?;
            let started = Instant::now();
            let result = experiments::run(&cfg).map_err(|e| run_fail(e))?;
            if cli.verbose {
                eprintln!(
                    "run finished in {:.1}s: {} avalanches, omega_mean = {:.4}",
                    started.elapsed().as_secs_f64(),
                    result.avalanches.len(),
                    result.omega_mean
                );
            }
            if let Some(w) = &result.fit_warning {
                if !cli.quiet {
                    eprintln!("warning: {w}");
                }
            }
            let effective = config::emit_run(&cfg);
            output::write_run(dir, &effective, &result).map_err(|e| run_fail(e))?;
            if !cli.quiet {
                println!("wrote {}", dir.display());
            }
            Ok(0)
        }
        Cmd::Sweep => {
            let text = load_config_text(&cli)?;
            let (mut base, spec) = config::parse_sweep(&text).map_err(|e| cfg_fail(e))?;
            apply_seed(&mut base, &cli);
            let dir = out_dir(&cli)?;
            let surface = experiments::sweep(&spec.l_values, &spec.c_th_values, &base)
                .map_err(|e| run_fail(e))?;
            // normalization is best-effort: tiny grids may be degenerate
            let surface = experiments::normalize_surface(&surface).unwrap_or(surface);
            if cli.verbose {
                for c in &surface.cells {
                    match &c.error {
                        None => eprintln!("cell (L={}, c_th={}): omega_mean = {:.4}", c.l, c.c_th, c.omega_mean),
                        Some(e) => eprintln!("cell (L={}, c_th={}): {e}", c.l, c.c_th),
                    }
                }
            }
            let effective = config::emit_sweep(&base, &spec);
            output::write_surface(dir, &effective, base.seed, &surface).map_err(|e| run_fail(e))?;
            if !cli.quiet {
                println!("wrote {}", dir.join("surface.csv").display());
            }
            Ok(0)
        }
        Cmd::Scenario => {
            let text = load_config_text(&cli)?;
            let (mut base, spec) = config::parse_scenario(&text).map_err(|e| cfg_fail(e))?;
            apply_seed(&mut base, &cli);
            let dir = out_dir(&cli)?;
            let rep = experiments::scenario_triplet(
                &base,
                spec.c_th_final,
                spec.l_min,
                spec.omega_tolerance,
            )
            .map_err(|e| run_fail(e))?;
            if cli.verbose {
                eprintln!(
                    "F_0 omega = {:.4}, F_Omega at L = {} (omega = {:.4})",
                    rep.f_0.omega_mean, rep.l_omega, rep.f_omega.omega_mean
                );
            }
            let effective = config::emit_scenario(&base, &spec);
            output::write_scenario(dir, &effective, base.seed, &rep).map_err(|e| run_fail(e))?;
            if !cli.quiet {
                println!("wrote {}", dir.join("scenario.json").display());
            }
            Ok(0)
        }
        Cmd::Fit { input, check } => {
            let sizes = output::read_sizes(&input).map_err(|e| cfg_fail(e))?;
            let sample = SizeSample::new(sizes).map_err(|e| cfg_fail(e))?;
            match tail::fit(&sample) {
                Ok(f) => {
                    let j = output::fit_json(Some(&f), None);
                    println!("{j:#}");
                    if let Some(dir) = cli.out.as_deref() {
                        std::fs::create_dir_all(dir).map_err(|e| run_fail(e))?;
                        std::fs::write(dir.join("fit.json"), format!("{j:#}\n"))
                            .map_err(|e| run_fail(e))?;
                    }
                    if check && f.ks > ks_critical_5pct(f.n_tail) {
                        return Err(Failure {
                            code: EXIT_CHECK,
                            msg: format!(
                                "power-law hypothesis rejected: ks = {:.4} > {:.4}",
                                f.ks,
                                ks_critical_5pct(f.n_tail)
                            ),
                        });
                    }
                    Ok(0)
                }
                Err(e) => {
                    if check {
                        return Err(Failure { code: EXIT_CHECK, msg: e.to_string() });
                    }
                    println!("{:#}", output::fit_json(None, Some(&e.to_string())));
                    Ok(0)
                }
            }
        }
    }
}
