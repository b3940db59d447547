//! Command-line front end. See `qrelab --help`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qrelab::dmft::{gamma_zero_solve_with, solve_fixed_point, stability_check, SolutionRecord, SolverParams};
use qrelab::dynamics::{classify_game, ClassifyOptions};
use qrelab::experiments::{
    run_boundary, run_cdf, run_extinction_map, run_sweep, CdfOptions, CellStatus, Config, SweepConfig,
};
use qrelab::random_games::{GameParams, PayoffTensor};
use qrelab::{fmt_f64, Error, Result};

#[derive(Parser)]
#[command(name = "qrelab", version, about = "Q-learning on random games and its mean-field theory")]
struct Cli {
    /// TOML configuration (schema "qrelab-config-v1").
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Largest payoff tensor, in elements, any game may allocate.
    #[arg(long, global = true)]
    budget_elements: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify many games per (pair, Γ̂, T) cell; resumable.
    Sweep(SweepArgs),
    /// Rescaled marginals at fixed points, with the mean-field extinction rate.
    Cdf(CdfArgs),
    /// Critical exploration rate along a Γ̂ grid.
    Boundary(BoundaryArgs),
    /// Mean-field extinction rate on a (Γ̂, T) grid.
    ExtinctionMap(MapArgs),
    /// Solve one mean-field point and print its record.
    Solve(SolveArgs),
    /// Sample one game and classify it.
    Classify(ClassifyArgs),
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    games: Option<usize>,
    #[arg(long)]
    starts: Option<usize>,
}

#[derive(Args)]
struct CdfArgs {
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, allow_negative_numbers = true)]
    gamma_hat: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    games: Option<usize>,
    #[arg(long)]
    zero_payoffs: bool,
}

#[derive(Args)]
struct BoundaryArgs {
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    gamma_hat: Option<Vec<f64>>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    gamma_hat: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<f64>>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    gamma_hat: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    quad_nodes: Option<usize>,
    /// Second-moment closure for Γ̂ = 0: "exact" or "published".
    #[arg(long)]
    closure: Option<String>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    gamma_hat: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    starts: Option<usize>,
    /// Also write the sampled tensor to `<out-dir>/game.qret`.
    #[arg(long)]
    dump: bool,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn load(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.out_dir, cli.out_dir.clone());
    set(&mut cfg.budget_elements, cli.budget_elements);
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    match &cli.command {
        Command::Sweep(a) => {
            set(&mut cfg.sweep.games_per_cell, a.games);
            set(&mut cfg.sweep.starts_per_game, a.starts);
        }
        Command::Cdf(a) => {
            let c = &mut cfg.cdf;
            set(&mut c.p, a.p);
            set(&mut c.n, a.n.clone());
            set(&mut c.gamma_hat, a.gamma_hat);
            set(&mut c.t, a.t);
            set(&mut c.games_per_size, a.games);
            c.zero_payoffs |= a.zero_payoffs;
        }
        Command::Boundary(a) => {
            let b = &mut cfg.boundary;
            set(&mut b.p, a.p);
            set(&mut b.gamma_hat, a.gamma_hat.clone());
            set(&mut b.tol, a.tol);
        }
        Command::ExtinctionMap(a) => {
            let m = &mut cfg.extinction_map;
            set(&mut m.p, a.p);
            set(&mut m.gamma_hat, a.gamma_hat.clone());
            set(&mut m.t, a.t.clone());
            set(&mut m.tol, a.tol);
        }
        Command::Solve(a) => {
            let s = &mut cfg.solve;
            set(&mut s.p, a.p);
            set(&mut s.gamma_hat, a.gamma_hat);
            set(&mut s.t, a.t);
            set(&mut s.quad_nodes, a.quad_nodes);
            if let Some(c) = &a.closure {
                s.closure = match c.as_str() {
                    "exact" => qrelab::dmft::MomentClosure::Exact,
                    "published" => qrelab::dmft::MomentClosure::Published,
                    other => return Err(Error::Config(format!("unknown closure {other:?}"))),
                };
            }
        }
        Command::Classify(a) => {
            let c = &mut cfg.classify;
            set(&mut c.p, a.p);
            set(&mut c.n, a.n);
            set(&mut c.gamma_hat, a.gamma_hat);
            set(&mut c.t, a.t);
            set(&mut c.n_starts, a.starts);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let explicit_out = cli.out_dir.as_deref();
    match &cli.command {
        Command::Sweep(_) => {
            let results = run_sweep(&SweepConfig::from_config(&cfg))?;
            println!("{} cells written to {}", results.len(), cfg.out_dir.join("sweep.csv").display());
        }
        Command::Cdf(_) => {
            for r in run_cdf(&CdfOptions::from_config(&cfg))? {
                let theory = r.theoretical_extinction.map_or("nan".into(), fmt_f64);
                println!(
                    "n={} samples={} excluded={} mass_below_0.1={} theory={}",
                    r.n,
                    r.samples.len(),
                    r.n_excluded,
                    fmt_f64(r.mass_below(0.1)),
                    theory
                );
                if let Some(w) = &r.warning {
                    eprintln!("warning: {w}");
                }
            }
        }
        Command::Boundary(_) => {
            let b = &cfg.boundary;
            let rows = run_boundary(b.p, &b.gamma_hat, b.tol, Some(&cfg.out_dir))?;
            let mut failed = 0;
            for r in &rows {
                println!("{} {} {}", fmt_f64(r.gamma_hat), r.t_crit.map_or("-".into(), fmt_f64), r.status);
                failed += usize::from(r.t_crit.is_none());
            }
            if failed > 0 {
                return Err(Error::Bracketing {
                    lo: f64::NAN,
                    hi: f64::NAN,
                    detail: format!("{failed} grid points failed; see boundary.csv"),
                });
            }
        }
        Command::ExtinctionMap(_) => {
            let m = &cfg.extinction_map;
            let cells = run_extinction_map(m.p, &m.gamma_hat, &m.t, m.tol, Some(&cfg.out_dir))?;
            let ok = cells.iter().filter(|c| c.status == CellStatus::Ok).count();
            println!("{ok} of {} cells solved; {}", cells.len(), cfg.out_dir.join("extinction_map.csv").display());
        }
        Command::Solve(_) => {
            let s = &cfg.solve;
            let params = SolverParams { quad_nodes: s.quad_nodes, ..SolverParams::new(s.p, s.gamma_hat * (s.p as f64 - 1.0), s.t) };
            let sol = if params.gamma == 0.0 {
                gamma_zero_solve_with(&params, s.closure)?
            } else {
                solve_fixed_point(&params)?
            };
            let report = stability_check(&sol, &params);
            let record = sol.record();
            let row = record.csv_row(Some(report.stable));
            println!("{}", SolutionRecord::CSV_HEADER.join(","));
            println!("{}", row.join(","));
            println!("margin={}", fmt_f64(report.margin));
            if let Some(dir) = explicit_out {
                fs::create_dir_all(dir)?;
                let mut w = csv::Writer::from_path(dir.join("solve.csv"))?;
                w.write_record(SolutionRecord::CSV_HEADER)?;
                w.write_record(&row)?;
                w.flush()?;
                let mut f = BufWriter::new(File::create(dir.join("solve.json"))?);
                serde_json::to_writer_pretty(&mut f, &record)?;
                writeln!(f)?;
            }
        }
        Command::Classify(_) => {
            let c = &cfg.classify;
            let params = GameParams::from_gamma_hat(c.p, c.n, c.gamma_hat, cfg.seed)?;
            let tensor = PayoffTensor::sample_with_budget(&params, cfg.budget_elements)?;
            let opts = ClassifyOptions { n_starts: c.n_starts, dist_tol: c.dist_tol, seed: cfg.seed, integrator: c.integrator };
            let out = classify_game(&tensor, c.t, &opts);
            println!("label={:?}", out.label);
            println!("converged={}/{}", out.n_converged, out.n_starts);
            println!("max_pairwise_reldist={}", fmt_f64(out.max_pairwise_reldist));
            if let Some(dir) = explicit_out {
                fs::create_dir_all(dir)?;
                let mut f = BufWriter::new(File::create(dir.join("classification.json"))?);
                serde_json::to_writer_pretty(&mut f, &out)?;
                writeln!(f)?;
                if let Command::Classify(a) = &cli.command {
                    if a.dump {
                        tensor.write_dump(BufWriter::new(File::create(dir.join("game.qret"))?))?;
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
