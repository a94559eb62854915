//! CSV and JSON report emission.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use super::scenario::{ReportRow, RunReport};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 6] = [
    "seed",
    "susinr_db",
    "algorithm",
    "se_irc_bits",
    "wall_ms",
    "iterations",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
pub enum Format {
    Csv,
    Json,
}

/// `%g`-style formatting with `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn round_sig(x: f64) -> f64 {
    format_sig(x, 6).parse().unwrap_or(x)
}

fn csv_record(row: &ReportRow) -> [String; 6] {
    [
        row.seed.to_string(),
        format_sig(row.susinr_db, 6),
        row.algorithm.to_string(),
        row.se_irc_bits.map(|x| format_sig(x, 6)).unwrap_or_default(),
        format_sig(row.wall_ms, 6),
        row.iterations.to_string(),
    ]
}

pub fn to_csv(report: &RunReport) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for row in &report.rows {
        w.write_record(csv_record(row)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

pub fn to_json(report: &RunReport) -> Value {
    let rows: Vec<Value> = report
        .rows
        .iter()
        .map(|r| {
            json!({
                "seed": r.seed,
                "susinr_db": round_sig(r.susinr_db),
                "algorithm": r.algorithm,
                "se_irc_bits": r.se_irc_bits.map(round_sig),
                "wall_ms": round_sig(r.wall_ms),
                "iterations": r.iterations,
                "termination": r.termination,
                "error": r.error,
            })
        })
        .collect();
    let aggregates: Vec<Value> = report
        .aggregates
        .iter()
        .map(|a| {
            json!({
                "susinr_db": round_sig(a.susinr_db),
                "algorithm": a.algorithm,
                "mean_se_irc_bits": a.mean_se_irc_bits.is_finite().then(|| round_sig(a.mean_se_irc_bits)),
                "cells": a.cells,
            })
        })
        .collect();
    json!({ "rows": rows, "aggregates": aggregates })
}

pub fn render(report: &RunReport, format: Format) -> String {
    match format {
        Format::Csv => to_csv(report),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&to_json(report)).expect("JSON value");
            s.push('\n');
            s
        }
    }
}

pub fn export_report(report: &RunReport, format: Format, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render(report, format)).map_err(|e| Error::io(path, e))
}

/// Mean-SE table with one row per SUSINR and one column per algorithm.
pub fn summary_table(report: &RunReport) -> String {
    let mut susinr: Vec<f64> = Vec::new();
    let mut algos = Vec::new();
    for a in &report.aggregates {
        if !susinr.contains(&a.susinr_db) {
            susinr.push(a.susinr_db);
        }
        if !algos.contains(&a.algorithm) {
            algos.push(a.algorithm);
        }
    }
    let mut out = format!("{:>8}", "SUSINR");
    for a in &algos {
        out.push_str(&format!(" {:>12}", a.name()));
    }
    out.push('\n');
    for &s in &susinr {
        out.push_str(&format!("{:>8}", format_sig(s, 6)));
        for &a in &algos {
            let v = report.mean(s, a).unwrap_or(f64::NAN);
            out.push_str(&format!(" {v:>12.3}"));
        }
        out.push('\n');
    }
    out
}
