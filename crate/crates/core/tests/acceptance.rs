//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`). The process fails when a
//! criterion fails that is not listed in `KNOWN_FAILURES`; known failures
//! still print FAIL.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use mimo_precoding::baselines::{arzf, rzf, zf, BaselineConfig, BaselineKind};
use mimo_precoding::detection::{conjugate_user, mmse_irc, mmse_irc_covariance};
use mimo_precoding::harness::channels::{generate_channels, iid_matrix, ChannelModel};
use mimo_precoding::harness::io::{decode, encode, file_size, read_channels, write_channels};
use mimo_precoding::harness::report::to_csv;
use mimo_precoding::harness::scenario::{run_algorithm, run_scenario, Algorithm, ScenarioConfig};
use mimo_precoding::linalg::rel_error;
use mimo_precoding::model::noise_from_susinr;
use mimo_precoding::optimizer::lbfgs::{maximize, Ascent, LbfgsSettings};
use mimo_precoding::optimizer::{
    embed, lbfgs_maximize, project, softmax_maximize, unembed, ObjectiveKind, ObjectiveSpec,
    OptimizationTrace, OptimizerConfig, StartPoint,
};
use mimo_precoding::quality::{sinr_conjugate, symbol_sinr};
use mimo_precoding::{CMatrix, ChannelSet, PrecodingMatrix, Result, SystemDims, SystemParams};

/// Criteria expected to fail; see the README section on acceptance results.
const KNOWN_FAILURES: &[u32] = &[3];

struct Check {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

/// Returned precoders and traces from the optimizer runs, checked by criterion 6.
#[derive(Default)]
struct Runs {
    feasible: usize,
    monotone: usize,
    total: usize,
    worst_excess: f64,
}

impl Runs {
    fn record(&mut self, w: &PrecodingMatrix, trace: &OptimizationTrace, power: f64) {
        self.total += 1;
        let excess = w.max_row_power() - power / w.antennas() as f64;
        self.worst_excess = self.worst_excess.max(excess);
        if w.is_feasible(power, 1e-12) {
            self.feasible += 1;
        }
        if trace.is_monotone() {
            self.monotone += 1;
        }
    }

    fn merge(&mut self, other: Runs) {
        self.feasible += other.feasible;
        self.monotone += other.monotone;
        self.total += other.total;
        self.worst_excess = self.worst_excess.max(other.worst_excess);
    }
}

fn calibrated(dims: &SystemDims, seed: u64, susinr_db: f64) -> (ChannelSet, SystemParams) {
    let set = generate_channels(dims, seed, ChannelModel::IidGaussian).unwrap();
    let noise = noise_from_susinr(&set, 1.0, susinr_db).unwrap();
    let params = SystemParams::new(1.0, noise, dims.total_layers()).unwrap();
    (set, params)
}

fn finite_difference(spec: &ObjectiveSpec<'_>, w: &CMatrix, h: f64) -> CMatrix {
    let mut g = CMatrix::zeros(w.nrows(), w.ncols());
    for idx in 0..w.len() {
        let mut parts = [0.0; 2];
        for (p, dir) in [Complex64::new(h, 0.0), Complex64::new(0.0, h)].into_iter().enumerate() {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[idx] += dir;
            wm[idx] -= dir;
            parts[p] = (spec.value(&wp).unwrap() - spec.value(&wm).unwrap()) / (2.0 * h);
        }
        g[idx] = Complex64::new(parts[0], parts[1]);
    }
    g
}

fn criterion_gradients() -> Check {
    let cases = [SystemDims::uniform(8, 2, 2, 1).unwrap(), SystemDims::uniform(16, 4, 4, 2).unwrap()];
    let jobs: Vec<(usize, u64, ObjectiveKind)> = (0..2)
        .flat_map(|d| (0..20).flat_map(move |s| [(d, s, ObjectiveKind::Cd), (d, s, ObjectiveKind::Irc)]))
        .collect();
    let errors: Vec<f64> = jobs
        .par_iter()
        .map(|&(d, seed, kind)| {
            let dims = &cases[d];
            let (set, params) = calibrated(dims, 1000 + seed, 4.0 * (seed % 5) as f64);
            let spec = ObjectiveSpec::new(kind, &set, params);
            // alternate interior and exterior rows around the budget 1/T
            let row_scale = if seed % 2 == 0 { 0.5 } else { 1.6 };
            let scale = row_scale / ((dims.antennas * dims.total_layers()) as f64).sqrt();
            let w = iid_matrix(dims.antennas, dims.total_layers(), 5000 + seed, 1) * Complex64::new(scale, 0.0);
            let fd = finite_difference(&spec, &w, 1e-6);
            let an = spec.gradient(&w).unwrap();
            let diff: f64 = an.iter().zip(fd.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
            let norm: f64 = fd.iter().map(|z| z.norm_sqr()).sum();
            (diff / norm).sqrt()
        })
        .collect();
    let worst = errors.iter().cloned().fold(0.0, f64::max);
    Check {
        id: 1,
        name: "gradient correctness",
        passed: worst <= 1e-5,
        detail: format!("{} pairs, worst relative error {worst:.2e} (tol 1e-5)", errors.len()),
    }
}

fn criterion_improvement(runs: &mut Runs) -> Check {
    let dims = SystemDims::uniform(64, 8, 4, 2).unwrap();
    let cfg = OptimizerConfig::default();
    let cells: Vec<(u64, f64)> = (0..40).flat_map(|s| [0.0, 12.0, 24.0].map(move |db| (s, db))).collect();
    let results: Vec<(f64, f64, Runs)> = cells
        .par_iter()
        .map(|&(seed, db)| {
            let (set, params) = calibrated(&dims, seed, db);
            let base = run_algorithm(Algorithm::Arzf, &set, params, &cfg).unwrap();
            let qn = run_algorithm(Algorithm::QnIrcArzf, &set, params, &cfg).unwrap();
            let mut r = Runs::default();
            r.record(&qn.precoder, qn.trace.as_ref().unwrap(), params.power);
            (base.se_irc_bits, qn.se_irc_bits, r)
        })
        .collect();
    let mut ge = 0;
    let mut gt = 0;
    let mut worst = f64::INFINITY;
    for (base, qn, r) in results {
        ge += (qn >= base) as usize;
        gt += (qn > base) as usize;
        worst = worst.min(qn - base);
        runs.merge(r);
    }
    let n = cells.len();
    Check {
        id: 2,
        name: "monotonic improvement of QN-IRC-ARZF over ARZF",
        passed: ge == n && gt as f64 >= 0.9 * n as f64,
        detail: format!("{ge}/{n} cells >=, {gt}/{n} strictly >, smallest gain {worst:.4} bit/s/Hz"),
    }
}

fn criterion_ordering() -> Check {
    let cfg = ScenarioConfig {
        algorithms: vec![Algorithm::Mrt, Algorithm::Zf, Algorithm::Rzf, Algorithm::Arzf],
        ..ScenarioConfig::default()
    };
    let report = run_scenario(&cfg).unwrap();
    let mut violations = Vec::new();
    for &db in &cfg.susinr_grid_db {
        let m = |a| report.mean(db, a).unwrap();
        let (mrt, zf, rzf, arzf) = (m(Algorithm::Mrt), m(Algorithm::Zf), m(Algorithm::Rzf), m(Algorithm::Arzf));
        if arzf < rzf {
            violations.push(format!("{db} dB ARZF {arzf:.2} < RZF {rzf:.2}"));
        }
        if rzf < zf {
            violations.push(format!("{db} dB RZF {rzf:.2} < ZF {zf:.2}"));
        }
        if db >= 8.0 && zf < mrt {
            violations.push(format!("{db} dB ZF {zf:.2} < MRT {mrt:.2}"));
        }
    }
    Check {
        id: 3,
        name: "baseline ordering of mean SE-IRC",
        passed: violations.is_empty(),
        detail: if violations.is_empty() {
            format!("{} SUSINR points x 40 seeds", cfg.susinr_grid_db.len())
        } else {
            format!("{} violations: {}", violations.len(), violations.join("; "))
        },
    }
}

fn criterion_detection() -> Check {
    let dims = SystemDims::uniform(16, 3, 4, 2).unwrap();
    let mut worst_irc = 0.0f64;
    let mut worst_conj = 0.0f64;
    let mut worst_sinr = 0.0f64;
    for seed in 0..100u64 {
        let (set, params) = calibrated(&dims, 2000 + seed, -4.0 + (seed % 12) as f64 * 4.0);
        let w = project(&iid_matrix(16, 6, 3000 + seed, 0), 1.0);
        let lambda = params.detection_noise();
        for (k, user) in set.users.iter().enumerate() {
            let r = dims.layer_range(k);
            let lemma = mmse_irc(&user.h, &w, r.clone(), lambda).unwrap();
            let cov = mmse_irc_covariance(&user.h, &w, r.clone(), lambda).unwrap();
            worst_irc = worst_irc.max(rel_error(&lemma, &cov));

            let g = conjugate_user(user, k).unwrap();
            worst_conj = worst_conj.max(rel_error(&(&g * &user.h), &user.v_trunc()));

            for (i, l) in r.enumerate() {
                let g_l = g.rows(i, 1).into_owned();
                let cd = symbol_sinr(&w, &user.h, &g_l, params.noise, params.power, l).unwrap();
                let v_l = set.v_trunc.rows(l, 1).into_owned();
                let sc = sinr_conjugate(&w, &v_l, set.s_trunc[l], params.noise, params.power, l).unwrap();
                worst_sinr = worst_sinr.max((cd - sc).abs() / sc.abs().max(1e-300));
            }
        }
    }
    Check {
        id: 4,
        name: "detection equivalences",
        passed: worst_irc <= 1e-10 && worst_conj <= 1e-10 && worst_sinr <= 1e-10,
        detail: format!(
            "100 instances: MMSE-IRC forms {worst_irc:.1e}, G^C H = V~ {worst_conj:.1e}, SINR^C {worst_sinr:.1e}"
        ),
    }
}

fn criterion_degeneracy() -> Check {
    let dims = SystemDims::uniform(16, 4, 3, 2).unwrap();
    let mut worst_zero = 0.0f64;
    let mut worst_unit = 0.0f64;
    for seed in 0..20 {
        let set = generate_channels(&dims, 4000 + seed, ChannelModel::IidGaussian).unwrap();
        let quiet = SystemParams::new(1.0, 0.0, 8).unwrap();
        let cfg = |kind| BaselineConfig::new(kind, quiet);
        let z = zf(&set, &cfg(BaselineKind::Zf)).unwrap().w;
        let r = rzf(&set, &cfg(BaselineKind::Rzf)).unwrap().w;
        let a = arzf(&set, &cfg(BaselineKind::Arzf)).unwrap().w;
        worst_zero = worst_zero.max(rel_error(&a, &r)).max(rel_error(&r, &z));

        let unit = set.with_truncated_singular_values(1.0).unwrap();
        let noisy = SystemParams::new(1.0, 0.3, 8).unwrap();
        let r = rzf(&unit, &BaselineConfig::new(BaselineKind::Rzf, noisy)).unwrap().w;
        let a = arzf(&unit, &BaselineConfig::new(BaselineKind::Arzf, noisy)).unwrap().w;
        worst_unit = worst_unit.max(rel_error(&a, &r));
    }
    Check {
        id: 5,
        name: "degeneracy chain",
        passed: worst_zero <= 1e-10 && worst_unit <= 1e-10,
        detail: format!("sigma^2=0: {worst_zero:.1e}, S~=I: {worst_unit:.1e}"),
    }
}

/// `−‖x − x*‖²` on the real embedding.
struct Toy {
    target: Vec<f64>,
}

impl Ascent for Toy {
    fn dim(&self) -> usize {
        self.target.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(-x.iter().zip(&self.target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let g = x.iter().zip(&self.target).map(|(a, b)| -2.0 * (a - b)).collect();
        Ok((self.value(x)?, g))
    }
}

fn criterion_optimizer(mut runs: Runs) -> Check {
    // projection idempotency, bitwise
    let mut idempotent = true;
    for seed in 0..50 {
        let w = iid_matrix(12, 4, 6000 + seed, 0) * Complex64::new(0.2 + 0.05 * seed as f64, 0.0);
        let p = project(&w, 1.3);
        idempotent &= project(&p, 1.3) == p;
    }

    // toy concave objective with an interior optimum
    let target_w = project(&(iid_matrix(8, 2, 7000, 0) * Complex64::new(0.1, 0.0)), 1.0);
    let toy = Toy { target: embed(&target_w) };
    let settings = LbfgsSettings {
        max_iters: 50,
        tol_grad: 1e-10,
        ..LbfgsSettings::default()
    };
    let out = maximize(&toy, vec![0.0; toy.dim()], &settings, |_| None).unwrap();
    let toy_err = rel_error(&unembed(&out.x, 8, 2), &target_w) * target_w.norm();
    let toy_ok = toy_err <= 1e-6 && out.records.len() - 1 <= 50;

    // scalar boundary case against a 1-D grid search over |w|
    let dims = SystemDims::uniform(1, 1, 1, 1).unwrap();
    let h = CMatrix::from_element(1, 1, Complex64::new(0.8, -0.6));
    let set = ChannelSet::from_channels(&[h], &[1]).unwrap();
    let params = SystemParams::new(1.0, 0.5, 1).unwrap();
    let spec = ObjectiveSpec::new(ObjectiveKind::Cd, &set, params);
    let grid_best = (0..=10_000)
        .map(|i| i as f64 / 10_000.0)
        .map(|r| (r, spec.value(&CMatrix::from_element(1, 1, Complex64::new(r, 0.0))).unwrap()))
        .fold((0.0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
    let start = CMatrix::from_element(1, 1, Complex64::new(0.2, 0.1));
    let cfg = OptimizerConfig {
        start: StartPoint::Custom(start),
        ..OptimizerConfig::default()
    };
    let (w, trace) = lbfgs_maximize(&spec, &cfg).unwrap();
    runs.record(&w, &trace, params.power);
    let reached = w.w[(0, 0)].norm_sqr();
    let boundary_ok = (reached - params.antenna_budget(dims.antennas)).abs() <= 1e-8
        && (grid_best.0 * grid_best.0 - 1.0).abs() <= 1e-8;

    let passed = idempotent && toy_ok && boundary_ok && runs.feasible == runs.total && runs.monotone == runs.total;
    Check {
        id: 6,
        name: "optimizer contracts",
        passed,
        detail: format!(
            "idempotent {idempotent}; toy error {toy_err:.1e} in {} iters; boundary |w|^2 {reached:.10} (grid argmax {}); \
             feasible {}/{} (worst excess {:.1e}); monotone {}/{}",
            out.records.len() - 1,
            grid_best.0,
            runs.feasible,
            runs.total,
            runs.worst_excess,
            runs.monotone,
            runs.total
        ),
    }
}

fn criterion_softmax(runs: &mut Runs) -> Check {
    let dims = SystemDims::uniform(16, 4, 2, 1).unwrap();
    let cfg = OptimizerConfig::default();
    let results: Vec<(f64, f64, usize, usize, Runs)> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let (set, params) = calibrated(&dims, 8000 + seed, 12.0);
            let spec = ObjectiveSpec::new(ObjectiveKind::Cd, &set, params);
            let (wp, tp) = lbfgs_maximize(&spec, &cfg).unwrap();
            let (ws, ts) = softmax_maximize(&spec, &cfg).unwrap();
            let mut r = Runs::default();
            r.record(&wp, &tp, params.power);
            r.record(&ws, &ts, params.power);
            (
                spec.value_at(&wp.w).unwrap(),
                spec.value_at(&ws.w).unwrap(),
                tp.iterations(),
                ts.iterations(),
                r,
            )
        })
        .collect();
    let mut worst = 0.0f64;
    let mut iters_p = 0;
    let mut iters_s = 0;
    for (p, s, ip, is, r) in results {
        worst = worst.max((p - s).abs() / p.abs());
        iters_p += ip;
        iters_s += is;
        runs.merge(r);
    }
    Check {
        id: 7,
        name: "softmax parity",
        passed: worst <= 0.01,
        detail: format!(
            "20 seeds, worst relative SE^C gap {:.3}%; mean iterations projection {:.1}, softmax {:.1}",
            100.0 * worst,
            iters_p as f64 / 20.0,
            iters_s as f64 / 20.0
        ),
    }
}

fn criterion_determinism() -> Check {
    let cfg = ScenarioConfig {
        dims: SystemDims::uniform(16, 4, 2, 1).unwrap(),
        seeds: vec![0, 1, 2],
        susinr_grid_db: vec![0.0, 12.0],
        ..ScenarioConfig::default()
    };
    let strip = |csv: String| {
        csv.lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.remove(4);
                f.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let a = strip(to_csv(&run_scenario(&cfg).unwrap()));
    let b = strip(to_csv(&run_scenario(&cfg).unwrap()));
    let csv_ok = a == b;

    let dims = SystemDims::uniform(64, 8, 4, 2).unwrap();
    let set = generate_channels(&dims, 11, ChannelModel::IidGaussian).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("channels.bin");
    write_channels(&set, &path).unwrap();
    let size = std::fs::metadata(&path).unwrap().len();
    let back = read_channels(&path).unwrap();
    let bits = |s: &ChannelSet| -> Vec<u64> {
        s.users.iter().flat_map(|u| u.h.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()])).collect()
    };
    let round_trip = bits(&back) == bits(&set) && encode(&decode(&encode(&set)).unwrap()) == encode(&set);
    Check {
        id: 8,
        name: "harness determinism",
        passed: csv_ok && round_trip && size == 32_848 && file_size(&dims) == 32_848,
        detail: format!("CSV identical {csv_ok}; bitwise round trip {round_trip}; file size {size} bytes"),
    }
}

fn main() {
    let start = Instant::now();
    let mut runs = Runs::default();
    let mut checks: Vec<(Check, f64)> = Vec::new();
    let mut timed = |f: &mut dyn FnMut() -> Check| {
        let t = Instant::now();
        let c = f();
        checks.push((c, t.elapsed().as_secs_f64()));
    };
    timed(&mut criterion_gradients);
    timed(&mut || criterion_improvement(&mut runs));
    timed(&mut criterion_ordering);
    timed(&mut criterion_detection);
    timed(&mut criterion_degeneracy);
    timed(&mut || criterion_softmax(&mut runs));
    let mut collected = Some(runs);
    timed(&mut || criterion_optimizer(collected.take().expect("runs")));
    timed(&mut criterion_determinism);
    checks.sort_by_key(|(c, _)| c.id);

    for (c, secs) in &checks {
        println!(
            "{} [{}] {}: {} ({secs:.1} s)",
            if c.passed { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            c.detail
        );
    }
    let passed = checks.iter().filter(|(c, _)| c.passed).count();
    println!("{passed}/{} criteria passed in {:.1} s", checks.len(), start.elapsed().as_secs_f64());
    let unexpected: Vec<u32> = checks
        .iter()
        .filter(|(c, _)| !c.passed && !KNOWN_FAILURES.contains(&c.id))
        .map(|(c, _)| c.id)
        .collect();
    for (c, _) in &checks {
        if c.passed && KNOWN_FAILURES.contains(&c.id) {
            println!("criterion {} is listed as a known failure but passed", c.id);
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
