//! Wall-time comparison of the optimizer against a single RZF solve.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::channels::{generate_channels, ChannelModel};
use crate::baselines::{rzf, BaselineConfig, BaselineKind};
use crate::error::{Error, Result};
use crate::model::{noise_from_susinr, SystemDims, SystemParams};
use crate::optimizer::{lbfgs_maximize, LbfgsSettings, ObjectiveKind, ObjectiveSpec, OptimizerConfig, StartPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub dims: SystemDims,
    pub seed: u64,
    pub susinr_db: f64,
    pub power: f64,
    /// Iteration budget of the timed optimizer run.
    pub iterations: usize,
    /// Repetitions per measurement; the median is reported.
    pub repeats: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            dims: SystemDims::uniform(64, 8, 4, 2).expect("default dims"),
            seed: 0,
            susinr_db: 12.0,
            power: 1.0,
            iterations: 100,
            repeats: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub label: String,
    pub wall_ms: f64,
    /// Wall time relative to one RZF solve.
    pub ratio: f64,
    /// Cost predicted by the `~3N` model, in RZF units; absent for rows it does not cover.
    pub model_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub rows: Vec<TimingRow>,
    /// Iterations the optimizer actually ran.
    pub iterations_run: usize,
    /// Gradient time over objective time.
    pub gradient_to_value: f64,
}

fn median_ms<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<f64> {
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        std::hint::black_box(f()?);
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

pub fn timing_report(cfg: &TimingConfig) -> Result<TimingReport> {
    cfg.dims.validate()?;
    if cfg.iterations == 0 {
        return Err(Error::Config("timing needs at least one iteration".into()));
    }
    let channel = generate_channels(&cfg.dims, cfg.seed, ChannelModel::IidGaussian)?;
    let noise = noise_from_susinr(&channel, cfg.power, cfg.susinr_db)?;
    let params = SystemParams::new(cfg.power, noise, cfg.dims.total_layers())?;
    let baseline = BaselineConfig::new(BaselineKind::Rzf, params);
    let spec = ObjectiveSpec::new(ObjectiveKind::Cd, &channel, params);
    let w = rzf(&channel, &baseline)?.w;

    let rzf_ms = median_ms(cfg.repeats, || rzf(&channel, &baseline))?;
    let value_ms = median_ms(cfg.repeats, || spec.value(&w))?;
    let grad_ms = median_ms(cfg.repeats, || spec.gradient(&w))?;
    let opt_cfg = OptimizerConfig {
        lbfgs: LbfgsSettings {
            max_iters: cfg.iterations,
            tol_grad: f64::MIN_POSITIVE,
            tol_change: f64::MIN_POSITIVE,
            ..LbfgsSettings::default()
        },
        start: StartPoint::Rzf,
        record_irc: false,
    };
    let mut iterations_run = 0;
    let qn_ms = median_ms(cfg.repeats.min(3), || {
        let (_, trace) = lbfgs_maximize(&spec, &opt_cfg)?;
        iterations_run = trace.iterations();
        Ok(())
    })?;

    let row = |label: &str, ms: f64, model: Option<f64>| TimingRow {
        label: label.to_string(),
        wall_ms: ms,
        ratio: ms / rzf_ms,
        model_ratio: model,
    };
    Ok(TimingReport {
        rows: vec![
            row("RZF", rzf_ms, Some(1.0)),
            row("SE^C value", value_ms, None),
            row("SE^C gradient", grad_ms, None),
            row(&format!("QN-CD-RZF, N={}", cfg.iterations), qn_ms, Some(3.0 * cfg.iterations as f64)),
        ],
        iterations_run,
        gradient_to_value: grad_ms / value_ms,
    })
}

impl TimingReport {
    pub fn table(&self) -> String {
        let mut out = format!("{:<22} {:>12} {:>12} {:>10}\n", "operation", "wall_ms", "x RZF", "model");
        for r in &self.rows {
            let model = r.model_ratio.map(|m| format!("{m:.0}")).unwrap_or_else(|| "-".into());
            out.push_str(&format!("{:<22} {:>12.4} {:>12.2} {:>10}\n", r.label, r.wall_ms, r.ratio, model));
        }
        out.push_str(&format!("gradient / value: {:.2}\n", self.gradient_to_value));
        out.push_str(&format!("iterations run: {}\n", self.iterations_run));
        out
    }
}
