//! Monte Carlo sweeps over schemes, modes and transmit SNR.
//!
//! For every realization and SNR point the harness designs a precoder for
//! each requested `(scheme, mode)` pair and records one [`ResultRow`]. Rows
//! come out sorted by `(scheme, mode, snr, realization)`, so the CSV output
//! only depends on the configuration.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rsmulticast_core::ao::{self, AoConfig, SolveResult, SolveStatus};
use rsmulticast_core::model::{GroupLayout, MmfProblem, Mode, PrecoderSet, Scheme};
use rsmulticast_core::Error;

use crate::channels::channel_realization;
use crate::solver::ClarabelSolver;

pub const ROWS_HEADER: &str = "scheme,mode,snr_db,alpha,realization,mmf_rate,common_rate,iterations,converged,status";
pub const AGGREGATE_HEADER: &str = "scheme,mode,snr_db,mean_mmf_rate,stddev,n_ok,n_infeasible";

/// Written in place of a value that does not exist (the split of CC, the
/// rates of an infeasible row, the spread of fewer than two samples).
pub const MISSING: &str = "NA";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub antennas: usize,
    pub group_sizes: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub modes: Vec<Mode>,
    pub snr_grid_db: Vec<f64>,
    pub common_threshold: f64,
    pub realizations: usize,
    pub master_seed: u64,
    pub ao: AoConfig,
    /// Seed RS with the NoRS solution of the same scheme, CC with SC and MC
    /// with SC and CC (whichever of them are part of the sweep).
    pub warm_start: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            antennas: 2,
            group_sizes: vec![1, 2, 3],
            schemes: Scheme::ALL.to_vec(),
            modes: Mode::ALL.to_vec(),
            snr_grid_db: (0..=6).map(|i| f64::from(i * 5)).collect(),
            common_threshold: 0.3,
            realizations: 100,
            master_seed: 0,
            ao: AoConfig::default(),
            warm_start: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<GroupLayout, Error> {
        if self.antennas == 0 {
            return Err(Error::InvalidParameter("antennas must be at least 1"));
        }
        if self.realizations == 0 {
            return Err(Error::InvalidParameter("realizations must be at least 1"));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter("snr grid must be non-empty and finite"));
        }
        if self.schemes.is_empty() || self.modes.is_empty() {
            return Err(Error::InvalidParameter("at least one scheme and one mode are required"));
        }
        if !(self.common_threshold >= 0.0 && self.common_threshold.is_finite()) {
            return Err(Error::InvalidParameter("common-rate threshold must be finite and non-negative"));
        }
        self.ao.validate()?;
        GroupLayout::new(&self.group_sizes)
    }
}

/// Transmit power for an SNR in dB at unit noise power.
pub fn snr_to_power(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub mode: Mode,
    pub snr_db: f64,
    /// `None` for CC and for rows without a solution.
    pub alpha: Option<f64>,
    pub realization: usize,
    pub mmf_rate: Option<f64>,
    pub common_rate: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub scheme: Scheme,
    pub mode: Mode,
    pub snr_db: f64,
    /// Over every row that carries a precoder: `Ok` and `MaxItersReached`.
    /// Infeasible rows are left out.
    pub mean_mmf_rate: Option<f64>,
    /// Sample standard deviation over the same rows.
    pub stddev: Option<f64>,
    pub n_ok: usize,
    pub n_infeasible: usize,
    /// Rows that stopped at the iteration cap. Not a CSV column; reported
    /// in the run log.
    pub n_max_iters: usize,
}

fn canonical<T: PartialEq + Copy>(all: &[T], chosen: &[T]) -> Vec<T> {
    all.iter().copied().filter(|x| chosen.contains(x)).collect()
}

/// Solves every requested `(scheme, mode)` pair for one channel and SNR.
/// Returned in the canonical `(scheme, mode)` order, with the full AO
/// result for rows that have one.
pub fn solve_point(
    config: &ExperimentConfig,
    layout: &GroupLayout,
    realization: usize,
    snr_db: f64,
    solver: &ClarabelSolver,
) -> Result<Vec<(ResultRow, Option<SolveResult>)>, Error> {
    let channel = channel_realization(config.antennas, layout.num_users(), config.master_seed, realization as u64);
    let schemes = canonical(&Scheme::ALL, &config.schemes);
    let tx_budget = snr_to_power(snr_db);

    // NoRS first so RS can start from it.
    let mut solved: Vec<(ResultRow, Option<SolveResult>)> = Vec::new();
    for mode in [Mode::NoRs, Mode::Rs] {
        if !config.modes.contains(&mode) {
            continue;
        }
        for &scheme in &schemes {
            let problem = MmfProblem {
                channel: &channel,
                layout,
                scheme,
                tx_budget,
                common_threshold: config.common_threshold,
                mode,
            };
            let warm: Vec<&PrecoderSet> = if config.warm_start {
                solved
                    .iter()
                    .filter(|(r, _)| (r.mode == mode && r.scheme != scheme) || (r.scheme == scheme && r.mode == Mode::NoRs))
                    .filter_map(|(_, res)| res.as_ref().map(|res| &res.precoder))
                    .collect()
            } else {
                Vec::new()
            };
            let entry = match ao::solve_scheme_warm(&problem, &config.ao, solver, &warm) {
                Ok((alpha, result)) => {
                    let row = ResultRow {
                        scheme,
                        mode,
                        snr_db,
                        alpha: scheme.uses_alpha().then_some(alpha),
                        realization,
                        mmf_rate: Some(result.mmf_rate()),
                        common_rate: Some(result.rates.common_rate),
                        iterations: result.iterations,
                        converged: result.converged,
                        status: result.status,
                    };
                    (row, Some(result))
                }
                Err(Error::Infeasible | Error::AllInfeasible | Error::NumericalTrouble) => (
                    ResultRow {
                        scheme,
                        mode,
                        snr_db,
                        alpha: None,
                        realization,
                        mmf_rate: None,
                        common_rate: None,
                        iterations: 0,
                        converged: false,
                        status: SolveStatus::Infeasible,
                    },
                    None,
                ),
                Err(e) => return Err(e),
            };
            solved.push(entry);
        }
    }
    solved.sort_by_key(|(r, _)| (scheme_rank(r.scheme), mode_rank(r.mode)));
    Ok(solved)
}

fn scheme_rank(s: Scheme) -> usize {
    Scheme::ALL.iter().position(|&x| x == s).unwrap_or(usize::MAX)
}

fn mode_rank(m: Mode) -> usize {
    Mode::ALL.iter().position(|&x| x == m).unwrap_or(usize::MAX)
}

/// Runs the whole sweep. Realizations are processed in parallel; the result
/// does not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>, Error> {
    let layout = config.validate()?;
    let solver = ClarabelSolver::default();
    let points: Vec<(usize, usize)> = (0..config.realizations)
        .flat_map(|r| (0..config.snr_grid_db.len()).map(move |s| (r, s)))
        .collect();
    let per_point: Vec<Vec<ResultRow>> = points
        .par_iter()
        .map(|&(r, s)| {
            solve_point(config, &layout, r, config.snr_grid_db[s], &solver)
                .map(|solved| solved.into_iter().map(|(row, _)| row).collect())
        })
        .collect::<Result<_, _>>()?;

    let mut rows: Vec<(usize, usize, ResultRow)> = per_point
        .into_iter()
        .zip(&points)
        .flat_map(|(rows, &(r, s))| rows.into_iter().map(move |row| (s, r, row)))
        .collect();
    rows.sort_by_key(|(s, r, row)| (scheme_rank(row.scheme), mode_rank(row.mode), *s, *r));
    Ok(rows.into_iter().map(|(_, _, row)| row).collect())
}

/// Per-curve statistics, one entry per `(scheme, mode, snr)` in order of
/// first appearance. Rows need not be grouped.
pub fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    let mut out: Vec<AggregateRow> = Vec::new();
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for row in rows {
        let slot = out
            .iter()
            .position(|a| a.scheme == row.scheme && a.mode == row.mode && a.snr_db == row.snr_db);
        let slot = slot.unwrap_or_else(|| {
            out.push(AggregateRow {
                scheme: row.scheme,
                mode: row.mode,
                snr_db: row.snr_db,
                mean_mmf_rate: None,
                stddev: None,
                n_ok: 0,
                n_infeasible: 0,
                n_max_iters: 0,
            });
            samples.push(Vec::new());
            out.len() - 1
        });
        let agg = &mut out[slot];
        match (row.status, row.mmf_rate) {
            (SolveStatus::Infeasible, _) | (_, None) => agg.n_infeasible += 1,
            (status, Some(rate)) => {
                if status == SolveStatus::Ok {
                    agg.n_ok += 1;
                } else {
                    agg.n_max_iters += 1;
                }
                samples[slot].push(rate);
            }
        }
    }
    for (agg, xs) in out.iter_mut().zip(&samples) {
        if xs.is_empty() {
            continue;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        agg.mean_mmf_rate = Some(mean);
        if xs.len() > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            agg.stddev = Some(var.sqrt());
        }
    }
    out
}

/// Ten significant digits.
pub fn format_number(x: f64) -> String {
    format!("{x:.9e}")
}

fn format_opt(x: Option<f64>) -> String {
    x.map_or_else(|| MISSING.to_string(), format_number)
}

pub fn rows_csv(rows: &[ResultRow]) -> String {
    let mut s = String::new();
    s.push_str(ROWS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scheme,
            r.mode.as_str(),
            format_number(r.snr_db),
            format_opt(r.alpha),
            r.realization,
            format_opt(r.mmf_rate),
            format_opt(r.common_rate),
            r.iterations,
            r.converged,
            r.status.as_str(),
        );
    }
    s
}

pub fn aggregate_csv(aggregate: &[AggregateRow]) -> String {
    let mut s = String::new();
    s.push_str(AGGREGATE_HEADER);
    s.push('\n');
    for a in aggregate {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            a.scheme,
            a.mode.as_str(),
            format_number(a.snr_db),
            format_opt(a.mean_mmf_rate),
            format_opt(a.stddev),
            a.n_ok,
            a.n_infeasible,
        );
    }
    s
}

pub const ROWS_FILE: &str = "rows.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

/// Writes `rows.csv` and `aggregate.csv` into `out_dir`, creating it if
/// needed. Returns the two paths.
pub fn emit_csv(rows: &[ResultRow], aggregate: &[AggregateRow], out_dir: &Path) -> io::Result<(PathBuf, PathBuf)> {
    if rows.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "no rows to write"));
    }
    fs::create_dir_all(out_dir)?;
    let rows_path = out_dir.join(ROWS_FILE);
    let agg_path = out_dir.join(AGGREGATE_FILE);
    fs::write(&rows_path, rows_csv(rows))?;
    fs::write(&agg_path, aggregate_csv(aggregate))?;
    Ok((rows_path, agg_path))
}
