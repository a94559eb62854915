//! SUSINR sweeps comparing precoding algorithms on synthetic channels.
//!
//! Every cell `(seed, SUSINR)` draws the seed's channel, calibrates the
//! noise power to the target SUSINR at `P` and scores each configured
//! algorithm with the same MMSE-IRC spectral efficiency.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::channels::{generate_channels, ChannelModel};
use crate::baselines::{precode, BaselineConfig, BaselineKind};
use crate::error::{Error, Result};
use crate::model::{noise_from_susinr, ChannelSet, SystemDims, SystemParams};
use crate::optimizer::{
    irc_se, lbfgs_maximize, softmax_maximize, ObjectiveKind, ObjectiveSpec, OptimizationTrace,
    OptimizerConfig, StartPoint, Termination,
};
use crate::quality::PrecodingMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "MRT")]
    Mrt,
    #[serde(rename = "ZF")]
    Zf,
    #[serde(rename = "RZF")]
    Rzf,
    #[serde(rename = "ARZF")]
    Arzf,
    #[serde(rename = "QN-CD-RZF")]
    QnCdRzf,
    #[serde(rename = "QN-CD-ARZF")]
    QnCdArzf,
    #[serde(rename = "QN-IRC-RZF")]
    QnIrcRzf,
    #[serde(rename = "QN-IRC-ARZF")]
    QnIrcArzf,
    /// Softmax reparametrization of the CD objective, started from ARZF.
    #[serde(rename = "SOFTMAX-CD-ARZF")]
    SoftmaxCdArzf,
}

impl Algorithm {
    /// The eight algorithms of the standard comparison.
    pub const STANDARD: [Algorithm; 8] = [
        Algorithm::Mrt,
        Algorithm::Zf,
        Algorithm::Rzf,
        Algorithm::Arzf,
        Algorithm::QnCdRzf,
        Algorithm::QnCdArzf,
        Algorithm::QnIrcRzf,
        Algorithm::QnIrcArzf,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Mrt => "MRT",
            Algorithm::Zf => "ZF",
            Algorithm::Rzf => "RZF",
            Algorithm::Arzf => "ARZF",
            Algorithm::QnCdRzf => "QN-CD-RZF",
            Algorithm::QnCdArzf => "QN-CD-ARZF",
            Algorithm::QnIrcRzf => "QN-IRC-RZF",
            Algorithm::QnIrcArzf => "QN-IRC-ARZF",
            Algorithm::SoftmaxCdArzf => "SOFTMAX-CD-ARZF",
        }
    }

    fn plan(&self) -> Plan {
        use Algorithm::*;
        match self {
            Mrt => Plan::Baseline(BaselineKind::Mrt),
            Zf => Plan::Baseline(BaselineKind::Zf),
            Rzf => Plan::Baseline(BaselineKind::Rzf),
            Arzf => Plan::Baseline(BaselineKind::Arzf),
            QnCdRzf => Plan::Projected(ObjectiveKind::Cd, StartPoint::Rzf),
            QnCdArzf => Plan::Projected(ObjectiveKind::Cd, StartPoint::Arzf),
            QnIrcRzf => Plan::Projected(ObjectiveKind::Irc, StartPoint::Rzf),
            QnIrcArzf => Plan::Projected(ObjectiveKind::Irc, StartPoint::Arzf),
            SoftmaxCdArzf => Plan::Softmax(ObjectiveKind::Cd, StartPoint::Arzf),
        }
    }
}

enum Plan {
    Baseline(BaselineKind),
    Projected(ObjectiveKind, StartPoint),
    Softmax(ObjectiveKind, StartPoint),
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_uppercase().replace('_', "-");
        Algorithm::STANDARD
            .iter()
            .chain(std::iter::once(&Algorithm::SoftmaxCdArzf))
            .find(|a| a.name() == wanted)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dims: SystemDims,
    pub seeds: Vec<u64>,
    pub susinr_grid_db: Vec<f64>,
    pub power: f64,
    pub algorithms: Vec<Algorithm>,
    pub channel_model: ChannelModel,
    pub optimizer: OptimizerConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            dims: SystemDims::uniform(64, 8, 4, 2).expect("valid default dims"),
            seeds: (0..40).collect(),
            susinr_grid_db: (0..12).map(|i| -4.0 + 4.0 * i as f64).collect(),
            power: 1.0,
            algorithms: Algorithm::STANDARD.to_vec(),
            channel_model: ChannelModel::IidGaussian,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.seeds.is_empty() || self.susinr_grid_db.is_empty() || self.algorithms.is_empty() {
            return Err(Error::Config(
                "seeds, SUSINR grid and algorithm list must be non-empty".into(),
            ));
        }
        if self.susinr_grid_db.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("SUSINR grid must be finite".into()));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(Error::Config(format!("power must be positive, got {}", self.power)));
        }
        if let ChannelModel::ExpCorrelated { rho } = self.channel_model {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::Config(format!("correlation rho={rho} outside [0, 1)")));
            }
        }
        self.optimizer.lbfgs.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub seed: u64,
    pub susinr_db: f64,
    pub algorithm: Algorithm,
    /// `None` when the cell failed.
    pub se_irc_bits: Option<f64>,
    pub wall_ms: f64,
    pub iterations: usize,
    pub termination: Option<Termination>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub susinr_db: f64,
    pub algorithm: Algorithm,
    pub mean_se_irc_bits: f64,
    /// Successful cells averaged.
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<Aggregate>,
}

impl RunReport {
    pub fn from_rows(rows: Vec<ReportRow>) -> Self {
        let aggregates = aggregate(&rows);
        RunReport { rows, aggregates }
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }

    pub fn mean(&self, susinr_db: f64, algorithm: Algorithm) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|a| a.susinr_db == susinr_db && a.algorithm == algorithm)
            .map(|a| a.mean_se_irc_bits)
    }

    pub fn value(&self, seed: u64, susinr_db: f64, algorithm: Algorithm) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.seed == seed && r.susinr_db == susinr_db && r.algorithm == algorithm)
            .and_then(|r| r.se_irc_bits)
    }
}

/// Means per `(SUSINR, algorithm)` in first-appearance order.
fn aggregate(rows: &[ReportRow]) -> Vec<Aggregate> {
    let mut out: Vec<(Aggregate, f64)> = Vec::new();
    for row in rows {
        let slot = match out
            .iter_mut()
            .position(|(a, _)| a.susinr_db == row.susinr_db && a.algorithm == row.algorithm)
        {
            Some(i) => i,
            None => {
                out.push((
                    Aggregate {
                        susinr_db: row.susinr_db,
                        algorithm: row.algorithm,
                        mean_se_irc_bits: f64::NAN,
                        cells: 0,
                    },
                    0.0,
                ));
                out.len() - 1
            }
        };
        if let Some(se) = row.se_irc_bits {
            out[slot].0.cells += 1;
            out[slot].1 += se;
        }
    }
    out.into_iter()
        .map(|(mut a, sum)| {
            if a.cells > 0 {
                a.mean_se_irc_bits = sum / a.cells as f64;
            }
            a
        })
        .collect()
}

/// Result of running one algorithm on one calibrated channel.
#[derive(Debug, Clone)]
pub struct AlgorithmRun {
    pub precoder: PrecodingMatrix,
    pub se_irc_bits: f64,
    pub trace: Option<OptimizationTrace>,
}

/// Runs `algorithm` and scores the result with MMSE-IRC detection.
pub fn run_algorithm(
    algorithm: Algorithm,
    channel: &ChannelSet,
    params: SystemParams,
    optimizer: &OptimizerConfig,
) -> Result<AlgorithmRun> {
    let (precoder, trace) = match algorithm.plan() {
        Plan::Baseline(kind) => (precode(channel, &BaselineConfig::new(kind, params))?, None),
        Plan::Projected(kind, start) => {
            let spec = ObjectiveSpec::new(kind, channel, params);
            let (w, trace) = lbfgs_maximize(&spec, &with_start(optimizer, start))?;
            (w, Some(trace))
        }
        Plan::Softmax(kind, start) => {
            let spec = ObjectiveSpec::new(kind, channel, params);
            let (w, trace) = softmax_maximize(&spec, &with_start(optimizer, start))?;
            (w, Some(trace))
        }
    };
    let se_irc_bits = irc_se(&precoder.w, channel, &params)?;
    Ok(AlgorithmRun {
        precoder,
        se_irc_bits,
        trace,
    })
}

fn with_start(cfg: &OptimizerConfig, start: StartPoint) -> OptimizerConfig {
    OptimizerConfig {
        start,
        ..cfg.clone()
    }
}

fn failed_row(seed: u64, susinr_db: f64, algorithm: Algorithm, err: &Error) -> ReportRow {
    ReportRow {
        seed,
        susinr_db,
        algorithm,
        se_irc_bits: None,
        wall_ms: 0.0,
        iterations: 0,
        termination: None,
        error: Some(err.to_string()),
    }
}

fn run_cell(
    cfg: &ScenarioConfig,
    seed: u64,
    susinr_db: f64,
    channel: &Result<ChannelSet>,
) -> Vec<ReportRow> {
    let calibrated = channel.as_ref().map_err(clone_error).and_then(|ch| {
        let noise = noise_from_susinr(ch, cfg.power, susinr_db)?;
        Ok((ch, SystemParams::new(cfg.power, noise, cfg.dims.total_layers())?))
    });
    let (channel, params) = match calibrated {
        Ok(c) => c,
        Err(e) => {
            return cfg
                .algorithms
                .iter()
                .map(|&a| failed_row(seed, susinr_db, a, &e))
                .collect()
        }
    };
    cfg.algorithms
        .iter()
        .map(|&algorithm| {
            let start = Instant::now();
            let run = run_algorithm(algorithm, channel, params, &cfg.optimizer);
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            match run {
                Ok(run) => ReportRow {
                    seed,
                    susinr_db,
                    algorithm,
                    se_irc_bits: Some(run.se_irc_bits),
                    wall_ms,
                    iterations: run.trace.as_ref().map_or(0, |t| t.iterations()),
                    termination: run.trace.map(|t| t.termination),
                    error: None,
                },
                Err(e) => failed_row(seed, susinr_db, algorithm, &e),
            }
        })
        .collect()
}

fn clone_error(e: &Error) -> Error {
    Error::Config(format!("channel generation failed: {e}"))
}

/// Runs every `(seed, SUSINR, algorithm)` cell. Cells run in parallel; rows
/// come back ordered by seed, SUSINR and algorithm as configured.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    cfg.validate()?;
    let channels: Vec<Result<ChannelSet>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| generate_channels(&cfg.dims, seed, cfg.channel_model))
        .collect();
    let cells: Vec<(usize, f64)> = (0..cfg.seeds.len())
        .flat_map(|i| cfg.susinr_grid_db.iter().map(move |&s| (i, s)))
        .collect();
    let rows: Vec<ReportRow> = cells
        .par_iter()
        .map(|&(i, susinr)| run_cell(cfg, cfg.seeds[i], susinr, &channels[i]))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(RunReport::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            dims: SystemDims::uniform(8, 2, 2, 1).unwrap(),
            seeds: vec![1, 2],
            susinr_grid_db: vec![0.0, 10.0],
            algorithms: vec![Algorithm::Rzf, Algorithm::QnCdArzf],
            optimizer: OptimizerConfig {
                lbfgs: crate::optimizer::LbfgsSettings {
                    max_iters: 20,
                    ..Default::default()
                },
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn single_cell_single_row() {
        let cfg = ScenarioConfig {
            seeds: vec![3],
            susinr_grid_db: vec![5.0],
            algorithms: vec![Algorithm::Rzf],
            ..small()
        };
        let report = run_scenario(&cfg).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.aggregates.len(), 1);
        assert!(report.rows[0].se_irc_bits.unwrap() > 0.0);
        assert_eq!(report.rows[0].iterations, 0);
    }

    #[test]
    fn rows_ordered_and_complete() {
        let cfg = small();
        let report = run_scenario(&cfg).unwrap();
        assert_eq!(report.rows.len(), 8);
        let keys: Vec<(u64, f64, Algorithm)> =
            report.rows.iter().map(|r| (r.seed, r.susinr_db, r.algorithm)).collect();
        let mut expected = Vec::new();
        for &s in &cfg.seeds {
            for &x in &cfg.susinr_grid_db {
                for &a in &cfg.algorithms {
                    expected.push((s, x, a));
                }
            }
        }
        assert_eq!(keys, expected);
        assert!(report.failures().next().is_none());
        let mean = report.mean(0.0, Algorithm::Rzf).unwrap();
        let direct = (report.value(1, 0.0, Algorithm::Rzf).unwrap()
            + report.value(2, 0.0, Algorithm::Rzf).unwrap())
            / 2.0;
        assert!((mean - direct).abs() < 1e-12);
    }

    #[test]
    fn algorithm_names_parse() {
        for a in Algorithm::STANDARD {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("qn_irc_arzf".parse::<Algorithm>().unwrap(), Algorithm::QnIrcArzf);
        assert!("foo".parse::<Algorithm>().is_err());
    }

    #[test]
    fn config_json_round_trip_and_validation() {
        let cfg = small();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ScenarioConfig::from_json(&text).unwrap(), cfg);
        assert!(ScenarioConfig::from_json(r#"{"seeds": []}"#).is_err());
        assert!(ScenarioConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let partial = ScenarioConfig::from_json(r#"{"seeds": [7], "algorithms": ["ZF"]}"#).unwrap();
        assert_eq!(partial.dims, ScenarioConfig::default().dims);
        assert_eq!(partial.algorithms, vec![Algorithm::Zf]);
    }

    #[test]
    fn per_cell_failures_are_recorded() {
        let cfg = small();
        let broken: Result<ChannelSet> = Err(Error::Config("no channel".into()));
        let rows = run_cell(&cfg, 9, 0.0, &broken);
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.se_irc_bits.is_none() && r.error.is_some()));

        let mut all = run_scenario(&cfg).unwrap().rows;
        all.extend(rows);
        let report = RunReport::from_rows(all);
        assert_eq!(report.failures().count(), 2);
        let agg = report
            .aggregates
            .iter()
            .find(|a| a.susinr_db == 0.0 && a.algorithm == Algorithm::Rzf)
            .unwrap();
        assert_eq!(agg.cells, 2);
    }
}
