use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pelcov::copula::{self, CopulaParams};
use pelcov::marginals::{self, descriptive_stats, jarque_bera, ljung_box};
use pelcov::monitor::{self, fmt_num, ConfigFile, MissingPolicy};
use pelcov::oracle;
use pelcov::pelcov::{solve, PelcovQuery};
use pelcov::Result;

#[derive(Parser)]
#[command(
    name = "monitor",
    about = "CoVaR/VaR equivalence-level monitoring with a t copula"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit all models and write the per-date monitoring report.
    Run {
        /// Key = value file; flags given here take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        x: Option<PathBuf>,
        #[arg(long)]
        y: Option<PathBuf>,
        /// Risk level; repeat for several.
        #[arg(long = "v")]
        v: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fix innovation degrees of freedom, e.g. `10,10`.
        #[arg(long = "fix-df")]
        fix_df: Option<String>,
        #[arg(long = "drop-missing")]
        drop_missing: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve h(u) = v for one parameter set.
    Pelcov {
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        n: f64,
        #[arg(long)]
        v: f64,
    },
    /// Descriptive statistics of the negative log-returns of a price file.
    Stats {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long = "drop-missing")]
        drop_missing: bool,
    },
    /// Monte-Carlo and brute-force reference computations.
    Oracle {
        #[command(subcommand)]
        cmd: OracleCommand,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Print `size` copula draws as CSV.
    Sample {
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        n: f64,
        #[arg(long, default_value_t = 10)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Window estimate of h(u, v) against the closed form.
    H {
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        n: f64,
        #[arg(long)]
        u: f64,
        #[arg(long)]
        v: f64,
        #[arg(long, default_value_t = 1_000_000)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = oracle::DEFAULT_WINDOW)]
        window: f64,
    },
    /// Roots of h(u) = v by grid scan.
    Roots {
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        n: f64,
        #[arg(long)]
        v: f64,
        #[arg(long, default_value_t = 1_000_000)]
        grid: usize,
    },
}

fn policy(drop: bool) -> MissingPolicy {
    if drop {
        MissingPolicy::Drop
    } else {
        MissingPolicy::Reject
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run {
            config,
            x,
            y,
            v,
            out,
            fix_df,
            drop_missing,
            seed,
        } => {
            let file = match config {
                Some(p) => ConfigFile::load(p)?,
                None => ConfigFile::default(),
            };
            let cli = ConfigFile {
                x,
                y,
                v,
                out,
                fix_df: fix_df.as_deref().map(monitor::parse_df_pair).transpose()?,
                seed,
                drop_missing: drop_missing.then_some(true),
            };
            let cfg = file.merge(cli).into_config()?;
            let report = monitor::run(&cfg)?;
            match &cfg.output_path {
                Some(p) => monitor::emit_csv(&report, p)?,
                None => monitor::write_csv(&report, std::io::stdout().lock())?,
            }
            for line in report.summary_lines() {
                if cfg.output_path.is_some() {
                    println!("{line}");
                } else {
                    eprintln!("{line}");
                }
            }
        }
        Command::Pelcov { rho, n, v } => {
            let params = CopulaParams::new(rho, n)?;
            let s = solve(&PelcovQuery::new(v, params)?);
            let list = |xs: &[f64]| xs.iter().map(|&x| fmt_num(x)).collect::<Vec<_>>().join(",");
            println!("roots={}", list(&s.roots));
            println!("principal={}", fmt_num(s.principal));
            if let Some(r) = s.secondary {
                println!("secondary={}", fmt_num(r));
            }
            println!("v_star={}", fmt_num(s.v_star));
            match s.u_star {
                Some(u) => println!("u_star={}", fmt_num(u)),
                None => println!("u_star=none"),
            }
            println!("L0={}", fmt_num(s.l0));
            println!("L1={}", fmt_num(1.0 - s.l0));
            println!(
                "tail_dependence={}",
                fmt_num(copula::tail_dependence(params))
            );
            let (lo, hi) = s.covar_below_var_region;
            println!("covar_below_var=({},{})", fmt_num(lo), fmt_num(hi));
        }
        Command::Stats { csv, drop_missing } => {
            let loaded = monitor::load_fred_csv(&csv, policy(drop_missing))?;
            let r = marginals::neg_log_returns(&loaded.series)?;
            let s = descriptive_stats(r.values())?;
            println!("series={}", loaded.column);
            println!("n_obs={}", s.count);
            println!("mean={}", fmt_num(s.mean));
            println!("std={}", fmt_num(s.std));
            println!("min={}", fmt_num(s.min));
            println!("max={}", fmt_num(s.max));
            println!("skewness={}", fmt_num(s.skewness));
            println!("excess_kurtosis={}", fmt_num(s.excess_kurtosis));
            println!(
                "jarque_bera_p={}",
                fmt_num(jarque_bera(r.values())?.p_value)
            );
            let sq: Vec<f64> = r.values().iter().map(|x| x * x).collect();
            println!("ljung_box_sq_20_p={}", fmt_num(ljung_box(&sq, 20)?.p_value));
            if loaded.dropped > 0 {
                println!("dropped_missing={}", loaded.dropped);
            }
        }
        Command::Oracle { cmd } => match cmd {
            OracleCommand::Sample { rho, n, size, seed } => {
                let batch = oracle::sample_t_copula(CopulaParams::new(rho, n)?, size, seed)?;
                println!("u,v");
                for (u, v) in batch.pairs {
                    println!("{},{}", fmt_num(u), fmt_num(v));
                }
            }
            OracleCommand::H {
                rho,
                n,
                u,
                v,
                size,
                seed,
                window,
            } => {
                let params = CopulaParams::new(rho, n)?;
                let batch = oracle::sample_t_copula(params, size, seed)?;
                let e = oracle::empirical_h(&batch, u, v, window)?;
                println!("empirical={}", fmt_num(e.value));
                println!("std_error={}", fmt_num(e.std_error));
                println!("count={}", e.count);
                println!("closed_form={}", fmt_num(copula::h(u, v, params)?));
            }
            OracleCommand::Roots { rho, n, v, grid } => {
                let roots = oracle::grid_roots(v, CopulaParams::new(rho, n)?, grid)?;
                println!("count={}", roots.len());
                for r in roots {
                    println!("root={}", fmt_num(r));
                }
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
