use std::io::Write;

use crate::error::{Error, Result};
use crate::harness::experiment::{format_sig9, ResultRow};
use crate::meta::Algorithm;

/// Regret statistics of one `(algorithm, T)` group.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub runs: usize,
    pub mean_regret: f64,
    /// Sample standard deviation (`n - 1` denominator); 0 for a single run.
    pub std_regret: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 when `xs` has fewer than two entries.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Groups rows by `(algorithm, T)`, ordered by algorithm's first appearance
/// and then ascending `T`.
pub fn summarize(rows: &[ResultRow]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::Parameter("nothing to summarize".into()));
    }
    let mut algorithms: Vec<Algorithm> = Vec::new();
    for r in rows {
        if !algorithms.contains(&r.algorithm) {
            algorithms.push(r.algorithm);
        }
    }
    let mut out = Vec::new();
    for alg in algorithms {
        let mut horizons: Vec<usize> = rows.iter().filter(|r| r.algorithm == alg).map(|r| r.horizon).collect();
        horizons.sort_unstable();
        horizons.dedup();
        for t in horizons {
            // sorting makes the floating-point sums independent of row order
            let mut regrets: Vec<f64> = rows
                .iter()
                .filter(|r| r.algorithm == alg && r.horizon == t)
                .map(|r| r.regret)
                .collect();
            regrets.sort_by(f64::total_cmp);
            out.push(SummaryRow {
                algorithm: alg,
                horizon: t,
                runs: regrets.len(),
                mean_regret: mean(&regrets),
                std_regret: sample_std(&regrets),
            });
        }
    }
    Ok(out)
}

pub fn write_summary<W: Write>(summary: &[SummaryRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "algorithm,T,runs,mean_regret,std_regret")?;
    for s in summary {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.algorithm,
            s.horizon,
            s.runs,
            format_sig9(s.mean_regret),
            format_sig9(s.std_regret)
        )?;
    }
    Ok(())
}
