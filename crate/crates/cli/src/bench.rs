//! Method matrix over replications and the ARA summary table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{anyhow, bail, ensure, Context, Result};

use crate::args::Strategy;

/// One entry of `--methods`: a strategy with an optional tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Method {
    pub label: String,
    pub strategy: Strategy,
    pub epsilon: Option<f64>,
}

pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut out: Vec<Method> = Vec::new();
    for token in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (name, eps) = match token.split_once(':') {
            Some((s, e)) => (s, Some(e.parse::<f64>().with_context(|| format!("bad tolerance in {token:?}"))?)),
            None => (token, None),
        };
        let strategy: Strategy = name.parse().map_err(|e| anyhow!("method {token:?}: {e}"))?;
        if let Some(e) = eps {
            ensure!(e > 0.0, "method {token:?}: tolerance must be positive");
        }
        ensure!(out.iter().all(|m| m.label != token), "method {token:?} listed twice");
        out.push(Method {
            label: token.to_string(),
            strategy,
            epsilon: eps,
        });
    }
    ensure!(!out.is_empty(), "no methods given");
    Ok(out)
}

/// The fields of a metrics record the table needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub method: String,
    pub rep: usize,
    pub point: usize,
    pub objective: f64,
    pub seconds: f64,
    pub certified: bool,
}

/// Mean and sample standard deviation across replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub method: String,
    /// Total seconds per replication.
    pub time: Stat,
    /// Percent ARA per replication, averaged over grid points.
    pub ara: Stat,
    pub certified: usize,
    pub solves: usize,
}

/// Builds the table: `f*` is the smallest objective over methods for each
/// replication and grid point, and a method's relative accuracy at that
/// cell is `(f - f*) / f*`.
pub fn ara_table(entries: &[Entry]) -> Result<Vec<Row>> {
    ensure!(!entries.is_empty(), "no records");
    let mut best: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in entries {
        ensure!(e.objective.is_finite(), "non-finite objective for {} rep {}", e.method, e.rep);
        let b = best.entry((e.rep, e.point)).or_insert(f64::INFINITY);
        *b = b.min(e.objective);
    }
    if let Some((&(rep, point), f)) = best.iter().find(|(_, &f)| !(f > 0.0)) {
        bail!("best objective {f} at rep {rep} point {point} is not positive");
    }
    let mut order: Vec<&str> = Vec::new();
    for e in entries {
        if !order.contains(&e.method.as_str()) {
            order.push(&e.method);
        }
    }
    let cells = best.len();
    let reps: Vec<usize> = {
        let mut r: Vec<usize> = best.keys().map(|k| k.0).collect();
        r.dedup();
        r
    };
    order
        .into_iter()
        .map(|method| {
            let mine: Vec<&Entry> = entries.iter().filter(|e| e.method == method).collect();
            ensure!(mine.len() == cells, "method {method} has {} records, expected {cells}", mine.len());
            let mut time = Vec::new();
            let mut ara = Vec::new();
            for &rep in &reps {
                let in_rep: Vec<&&Entry> = mine.iter().filter(|e| e.rep == rep).collect();
                time.push(in_rep.iter().map(|e| e.seconds).sum());
                let rel: f64 = in_rep
                    .iter()
                    .map(|e| {
                        let b = best[&(e.rep, e.point)];
                        (e.objective - b) / b
                    })
                    .sum();
                ara.push(100.0 * rel / in_rep.len() as f64);
            }
            Ok(Row {
                method: method.to_string(),
                time: Stat::of(&time),
                ara: Stat::of(&ara),
                certified: mine.iter().filter(|e| e.certified).count(),
                solves: mine.len(),
            })
        })
        .collect()
}

pub fn render(rows: &[Row]) -> String {
    let width = rows.iter().map(|r| r.method.len()).max().unwrap_or(0).max("method".len());
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>20}  {:>20}  {:>9}", "method", "time [s]", "ARA [%]", "certified");
    for r in rows {
        let time = format!("{:.3} ({:.3})", r.time.mean, r.time.std);
        let ara = format!("{:.3} ({:.3})", r.ara.mean, r.ara.std);
        let cert = format!("{}/{}", r.certified, r.solves);
        let _ = writeln!(out, "{:<width$}  {:>20}  {:>20}  {:>9}", r.method, time, ara, cert);
    }
    out
}
