use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde_json::json;

use mimo_precoding::harness::channels::generate_channels;
use mimo_precoding::harness::io::{read_channels, write_channels};
use mimo_precoding::harness::report::{export_report, format_sig, summary_table, Format};
use mimo_precoding::harness::scenario::{run_algorithm, run_scenario, Algorithm, ScenarioConfig};
use mimo_precoding::harness::timing::{timing_report, TimingConfig};
use mimo_precoding::model::noise_from_susinr;
use mimo_precoding::{Error, SystemParams};

#[derive(Parser)]
#[command(name = "precoder", version, about = "Multi-user MIMO precoding under per-antenna power constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a channel set and write it to a binary channel file.
    Generate(Common),
    /// Sweep seeds and SUSINR values and report every algorithm's MMSE-IRC SE.
    Run(Common),
    /// Run one optimizer and dump its per-iteration record.
    Trace {
        #[command(flatten)]
        common: Common,
        /// Read the channel from a binary channel file instead of drawing it.
        #[arg(long)]
        channels: Option<PathBuf>,
    },
    /// Time the optimizer relative to a single RZF solve.
    Time(Common),
}

#[derive(Args)]
struct Common {
    /// JSON scenario configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted (required for `generate`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Seeds as a list `1,2,5` or a half-open range `0..40`.
    #[arg(long)]
    seeds: Option<String>,
    /// SUSINR values in dB as a list `0,12,24` or `start:stop:step` (inclusive).
    #[arg(long, allow_hyphen_values = true)]
    susinr: Option<String>,
    /// Comma-separated algorithm names, e.g. `RZF,QN-IRC-ARZF`.
    #[arg(long)]
    algos: Option<String>,
    /// Maximum optimizer iterations.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    tol_grad: Option<f64>,
    #[arg(long)]
    tol_change: Option<f64>,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Error> {
    let bad = || Error::Config(format!("cannot parse seeds {s:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        return Ok((a..b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

fn parse_susinr(s: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::Config(format!("cannot parse SUSINR grid {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts.iter().map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
        let (start, stop, step) = (v[0], v[1], v[2]);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| start + step * i as f64).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

fn scenario(common: &Common) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ScenarioConfig::from_json(&text)?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(s) = &common.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if let Some(s) = &common.susinr {
        cfg.susinr_grid_db = parse_susinr(s)?;
    }
    if let Some(s) = &common.algos {
        cfg.algorithms = s.split(',').map(str::parse).collect::<Result<_, _>>()?;
    }
    if let Some(n) = common.iters {
        cfg.optimizer.lbfgs.max_iters = n;
    }
    if let Some(t) = common.tol_grad {
        cfg.optimizer.lbfgs.tol_grad = t;
    }
    if let Some(t) = common.tol_change {
        cfg.optimizer.lbfgs.tol_change = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn generate(common: &Common) -> Result<ExitCode, Error> {
    let cfg = scenario(common)?;
    let out = common
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("generate needs --out".into()))?;
    let channel = generate_channels(&cfg.dims, cfg.seeds[0], cfg.channel_model)?;
    write_channels(&channel, out)?;
    info!("wrote seed {} to {}", cfg.seeds[0], out.display());
    Ok(ExitCode::SUCCESS)
}

fn run(common: &Common) -> Result<ExitCode, Error> {
    let cfg = scenario(common)?;
    info!(
        "{} seeds x {} SUSINR points x {} algorithms",
        cfg.seeds.len(),
        cfg.susinr_grid_db.len(),
        cfg.algorithms.len()
    );
    let report = run_scenario(&cfg)?;
    match &common.out {
        Some(path) => export_report(&report, common.format, path)?,
        None => print!("{}", mimo_precoding::harness::report::render(&report, common.format)),
    }
    eprint!("{}", summary_table(&report));
    let failures = report.failures().count();
    if failures > 0 {
        for row in report.failures() {
            warn!(
                "seed {} SUSINR {} {}: {}",
                row.seed,
                row.susinr_db,
                row.algorithm,
                row.error.as_deref().unwrap_or("")
            );
        }
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn trace(common: &Common, channels: Option<&Path>) -> Result<ExitCode, Error> {
    let mut cfg = scenario(common)?;
    cfg.optimizer.record_irc = true;
    let algorithm = match (&common.algos, cfg.algorithms.as_slice()) {
        (Some(_), [a]) => *a,
        (Some(_), _) => return Err(Error::Config("trace takes exactly one algorithm".into())),
        (None, _) => Algorithm::QnIrcArzf,
    };
    let channel = match channels {
        Some(path) => read_channels(path)?,
        None => generate_channels(&cfg.dims, cfg.seeds[0], cfg.channel_model)?,
    };
    let susinr = cfg.susinr_grid_db[0];
    let noise = noise_from_susinr(&channel, cfg.power, susinr)?;
    let params = SystemParams::new(cfg.power, noise, channel.dims.total_layers())?;
    let result = run_algorithm(algorithm, &channel, params, &cfg.optimizer)?;
    let Some(trace) = result.trace else {
        return Err(Error::Config(format!("{algorithm} is not an iterative algorithm")));
    };
    let text = match common.format {
        Format::Csv => {
            let mut s = String::from("iteration,objective,grad_norm,step,se_irc_bits\n");
            for r in &trace.records {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.iteration,
                    format_sig(r.objective, 6),
                    format_sig(r.grad_norm, 6),
                    format_sig(r.step, 6),
                    r.se_irc.map(|x| format_sig(x, 6)).unwrap_or_default()
                ));
            }
            s
        }
        Format::Json => {
            let value = json!({
                "algorithm": algorithm,
                "susinr_db": susinr,
                "se_irc_bits": result.se_irc_bits,
                "trace": trace,
            });
            serde_json::to_string_pretty(&value).expect("JSON value") + "\n"
        }
    };
    emit(common.out.as_deref(), &text)?;
    eprintln!(
        "{algorithm}: {} iterations, {:?}, final SE-IRC {:.4}",
        trace.iterations(),
        trace.termination,
        result.se_irc_bits
    );
    Ok(ExitCode::SUCCESS)
}

fn time(common: &Common) -> Result<ExitCode, Error> {
    let cfg = scenario(common)?;
    let timing = TimingConfig {
        dims: cfg.dims.clone(),
        seed: cfg.seeds[0],
        susinr_db: common.susinr.as_ref().map_or(12.0, |_| cfg.susinr_grid_db[0]),
        power: cfg.power,
        iterations: common.iters.unwrap_or(100),
        ..TimingConfig::default()
    };
    let report = timing_report(&timing)?;
    let text = match common.format {
        Format::Csv => report.table(),
        Format::Json => serde_json::to_string_pretty(&report).expect("JSON value") + "\n",
    };
    emit(common.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Generate(c) => generate(c),
        Command::Run(c) => run(c),
        Command::Trace { common, channels } => trace(common, channels.as_deref()),
        Command::Time(c) => time(c),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
