//! Solution files, metrics records and the independent objective evaluator.
//!
//! A solution file holds one `j:value` line per nonzero coefficient, with
//! `j` 1-based and increasing, followed by a single `b0:value` line. Values
//! are written in the shortest form that parses back to the same `f64`.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use svmcut::data::Dataset;
use svmcut::l1::SvmSolution;

use crate::problem::Reg;

pub fn write_solution(w: &mut impl Write, beta: &[f64], beta0: f64) -> Result<()> {
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            writeln!(w, "{}:{}", j + 1, b)?;
        }
    }
    writeln!(w, "b0:{beta0}")?;
    Ok(())
}

pub fn save_solution(path: &Path, sol: &SvmSolution) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_solution(&mut w, &sol.beta, sol.beta0)?;
    w.flush()?;
    Ok(())
}

/// Parses a solution file for a problem with `p` features.
pub fn read_solution(r: impl BufRead, p: usize) -> Result<(Vec<f64>, f64)> {
    let mut beta = vec![0.0; p];
    let mut beta0 = None;
    let mut last = 0;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let at = || format!("solution line {}", lineno + 1);
        ensure!(beta0.is_none(), "{}: content after the b0 line", at());
        let (key, value) = line.split_once(':').ok_or_else(|| anyhow!("{}: expected key:value", at()))?;
        let value: f64 = value.trim().parse().with_context(at)?;
        if key == "b0" {
            beta0 = Some(value);
            continue;
        }
        let j: usize = key.parse().with_context(at)?;
        ensure!(j > last, "{}: indices must be increasing and 1-based", at());
        ensure!(j <= p, "{}: index {j} exceeds p={p}", at());
        beta[j - 1] = value;
        last = j;
    }
    let beta0 = beta0.ok_or_else(|| anyhow!("solution has no b0 line"))?;
    Ok((beta, beta0))
}

pub fn load_solution(path: &Path, p: usize) -> Result<(Vec<f64>, f64)> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_solution(BufReader::new(f), p).with_context(|| format!("reading {}", path.display()))
}

/// Objective split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub objective: f64,
    pub hinge: f64,
    pub penalty: f64,
    pub nonzeros: usize,
}

/// Scores `(beta, beta0)` directly from the rows of the data.
pub fn evaluate(d: &Dataset, reg: &Reg, beta: &[f64], beta0: f64) -> Evaluation {
    let mut hinge = 0.0;
    for i in 0..d.n() {
        let mut score = beta0;
        d.features().for_each_in_row(i, |j, v| score += v * beta[j]);
        hinge += (1.0 - d.labels()[i] * score).max(0.0);
    }
    let penalty = match reg {
        Reg::L1(l) => l * beta.iter().map(|b| b.abs()).sum::<f64>(),
        Reg::Group(gs, l) => {
            let mut total = 0.0;
            for g in gs.groups() {
                total += g.iter().map(|&j| beta[j].abs()).fold(0.0, f64::max);
            }
            l * total
        }
        Reg::Slope(w) => {
            let mut mags: Vec<f64> = beta.iter().map(|b| b.abs()).collect();
            mags.sort_by(|a, b| b.total_cmp(a));
            mags.iter().zip(w.as_slice()).map(|(m, l)| m * l).sum()
        }
    };
    Evaluation {
        objective: hinge + penalty,
        hinge,
        penalty,
        nonzeros: beta.iter().filter(|&&b| b != 0.0).count(),
    }
}

/// One JSON line per solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub command: String,
    pub model: String,
    pub strategy: String,
    pub init: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rep: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<usize>,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub epsilon: f64,
    pub lambda: f64,
    pub lambda_max: f64,
    pub objective: f64,
    pub lp_objective: f64,
    pub certified: bool,
    /// Final number of samples in the working set.
    pub samples: usize,
    /// Final number of features in the working set.
    pub features: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<usize>,
    #[serde(default)]
    pub cuts: usize,
    pub outer_rounds: usize,
    pub pivots: usize,
    pub nonzeros: usize,
    pub seconds: f64,
    pub init_seconds: f64,
}

/// Appends records to `path`, or prints them to stdout.
pub fn emit(records: &[Record], path: Option<&Path>) -> Result<()> {
    let mut lines = String::new();
    for r in records {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    match path {
        Some(path) => {
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .with_context(|| format!("opening {}", path.display()))?;
            f.write_all(lines.as_bytes())?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(lines.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{} line {}", path.display(), lineno + 1))?);
    }
    if out.is_empty() {
        bail!("{} holds no records", path.display());
    }
    Ok(out)
}
