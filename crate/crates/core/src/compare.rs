//! QMC-versus-MC convergence sweep.
//!
//! For each `n` in an arithmetic sweep, the Choquet estimator is computed
//! over the first `n` Halton points and over the first `n` points of one
//! seeded pseudo-random stream. Both sequences are nested, so `f` is
//! evaluated once at `n_end` points per method and every row re-sorts a
//! prefix of those values.

use std::io::{BufRead, Write};

use crate::choquet::{estimate_from_values, evaluate, ChoquetError, Method};
use crate::distortion::Distortion;
use crate::format::format_f64;
use crate::integrand::Integrand;
use crate::pointset::PointSet;

pub const CSV_HEADER: &str = "n,qmc,mc,seed";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow {
    pub n: usize,
    pub qmc_value: f64,
    pub mc_value: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sweep {
    pub n_start: usize,
    pub n_end: usize,
    pub n_step: usize,
    pub seed: u64,
    pub start_index: u64,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep {
            n_start: 10_000,
            n_end: 100_000,
            n_step: 10_000,
            seed: 0,
            start_index: 1,
        }
    }
}

impl Sweep {
    /// The `n` values of the sweep, strictly increasing.
    pub fn sizes(&self) -> Vec<usize> {
        (self.n_start..=self.n_end)
            .step_by(self.n_step.max(1))
            .collect()
    }

    fn validate(&self) -> Result<(), ChoquetError> {
        if self.n_start == 0 || self.n_start > self.n_end || self.n_step == 0 {
            return Err(ChoquetError::Domain(format!(
                "sweep needs 1 <= n_start <= n_end and n_step >= 1, got {}..{} step {}",
                self.n_start, self.n_end, self.n_step
            )));
        }
        Ok(())
    }
}

/// Runs the sweep. `progress` is called with each `n` before it is computed.
pub fn compare_sweep(
    f: &Integrand,
    psi: &Distortion,
    sweep: &Sweep,
    mut progress: impl FnMut(usize),
) -> Result<Vec<CompareRow>, ChoquetError> {
    sweep.validate()?;
    let halton = PointSet::halton(f.dim(), sweep.n_end, sweep.start_index)?;
    let random = PointSet::pseudo_random(f.dim(), sweep.n_end, sweep.seed)?;
    let qmc_values = evaluate(f, &halton)?;
    let mc_values = evaluate(f, &random)?;
    sweep
        .sizes()
        .into_iter()
        .map(|n| {
            progress(n);
            let qmc = estimate_from_values(&qmc_values[..n], psi, Method::Qmc)?;
            let mc = estimate_from_values(&mc_values[..n], psi, Method::Mc { seed: sweep.seed })?;
            Ok(CompareRow {
                n,
                qmc_value: qmc.value,
                mc_value: mc.value,
                seed: sweep.seed,
            })
        })
        .collect()
}

pub fn write_compare_csv<W: Write>(rows: &[CompareRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.n,
            format_f64(r.qmc_value),
            format_f64(r.mc_value),
            r.seed
        )?;
    }
    Ok(())
}

pub fn read_compare_csv<R: BufRead>(input: R) -> Result<Vec<CompareRow>, String> {
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == CSV_HEADER => {}
        Some(Ok(h)) => return Err(format!("expected header {CSV_HEADER:?}, got {h:?}")),
        Some(Err(e)) => return Err(e.to_string()),
        None => return Err("empty input".into()),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = |what: &str| format!("line {}: {what} in {line:?}", i + 2);
        if fields.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        rows.push(CompareRow {
            n: fields[0].parse().map_err(|_| bad("bad n"))?,
            qmc_value: fields[1].parse().map_err(|_| bad("bad qmc"))?,
            mc_value: fields[2].parse().map_err(|_| bad("bad mc"))?,
            seed: fields[3].parse().map_err(|_| bad("bad seed"))?,
        });
    }
    Ok(rows)
}
