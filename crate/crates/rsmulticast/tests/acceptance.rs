//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use rsmulticast::harness::{self, AggregateRow, ExperimentConfig, ResultRow};
use rsmulticast::solver::ClarabelSolver;
use rsmulticast_core::ao::{self, AoConfig, InitStrategy, SolveResult, SolveStatus, CC_ALPHA};
use rsmulticast_core::model::{ChannelRealization, GroupLayout, MmfProblem, Mode, PrecoderSet, Scheme};
use rsmulticast_core::oracle::{self, GridSpec};
use rsmulticast_core::{metrics, subproblem, C64};

const IDENTITY_TOL: f64 = 1e-10;
const RECEIVER_TOL: f64 = 1e-4;
const ORACLE_TOL: f64 = 1e-3;
const TRACE_SLACK: f64 = 1e-6;
const DOMINANCE_SLACK: f64 = 1e-4;
const NORS_GAIN_MAX: f64 = 0.2;
const RS_GAIN_MIN: f64 = 0.4;
const ORDERING_SLACK: f64 = 0.05;
const UNDERLOADED_GAP: f64 = 0.05;
const THRESHOLD_TOL: f64 = 1e-4;
const REALIZATIONS: usize = 20;

struct Outcome {
    pass: bool,
    detail: String,
    elapsed: Duration,
    limit: Duration,
}

fn report(id: usize, name: &str, o: &Outcome) -> bool {
    let pass = o.pass && o.elapsed < o.limit;
    println!(
        "criterion {id:>2} {}: {name} ({}; {:.1} s, limit {} s)",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        o.elapsed.as_secs_f64(),
        o.limit.as_secs()
    );
    pass
}

fn timed(limit_secs: u64, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t = Instant::now();
    let (pass, detail) = f();
    Outcome {
        pass,
        detail,
        elapsed: t.elapsed(),
        limit: Duration::from_secs(limit_secs),
    }
}

/// A random scheme, split, channel and precoder at a random power level.
struct Draw {
    layout: GroupLayout,
    channel: ChannelRealization,
    precoder: PrecoderSet,
}

fn draw(rng: &mut ChaCha8Rng) -> Draw {
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
    let small = Uniform::new_inclusive(1usize, 3).unwrap();
    let antennas = Uniform::new_inclusive(1usize, 4).unwrap().sample(rng);
    let sizes: Vec<usize> = (0..small.sample(rng)).map(|_| small.sample(rng)).collect();
    let layout = GroupLayout::new(&sizes).unwrap();
    let scheme = Scheme::ALL[Uniform::new(0usize, 3).unwrap().sample(rng)];
    let alpha = match scheme {
        Scheme::Cc => CC_ALPHA,
        _ => Uniform::new_inclusive(0.01, 0.99).unwrap().sample(rng),
    };
    let power = 10f64.powf(Uniform::new(-1.0, 3.0).unwrap().sample(rng));
    let column = |rng: &mut ChaCha8Rng| -> Vec<C64> {
        (0..antennas).map(|_| C64::new(normal.sample(rng), normal.sample(rng))).collect()
    };
    let rows = (0..layout.num_users()).map(|_| column(rng)).collect();
    let common = scheme.has_common_column().then(|| column(rng));
    let private = (0..layout.num_groups()).map(|_| column(rng)).collect();
    let raw = PrecoderSet::new(scheme, alpha, common, private, f64::MAX).unwrap();
    let precoder = raw.scaled((power / raw.transmit_power()).sqrt()).with_budget(power * (1.0 + 1e-9));
    Draw {
        layout,
        channel: ChannelRealization::new(rows).unwrap(),
        precoder,
    }
}

fn draws(count: usize, seed: u64) -> Vec<Draw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| draw(&mut rng)).collect()
}

fn rate_mmse_identity() -> (bool, String) {
    let mut worst = 0.0f64;
    for d in draws(1000, 1) {
        let coef = d.precoder.coefficients();
        for n in 0..d.layout.num_users() {
            let h = d.channel.user(n);
            let (r0, rp) = metrics::user_rates(h, &d.precoder, n, &d.layout).unwrap();
            let (e0, ep) = metrics::mmse_values(h, &d.precoder, n, &d.layout).unwrap();
            worst = worst
                .max((-(e0 / coef.common).log2() - r0).abs())
                .max((-(ep / coef.private).log2() - rp).abs());
        }
    }
    (worst <= IDENTITY_TOL, format!("max error {worst:.2e}"))
}

fn wmse_duality() -> (bool, String) {
    let mut worst = 0.0f64;
    for d in draws(1000, 1) {
        let coef = d.precoder.coefficients();
        for n in 0..d.layout.num_users() {
            let h = d.channel.user(n);
            let (w, v) = metrics::mmse_receivers(h, &d.precoder, n, &d.layout).unwrap();
            let (e0, ep) = metrics::mse_values(h, &d.precoder, n, &d.layout, w, v).unwrap();
            let (u0, up) = metrics::optimal_weights(e0, ep).unwrap();
            let (r0, rp) = metrics::user_rates(h, &d.precoder, n, &d.layout).unwrap();
            let x0 = metrics::augmented_wmse(e0, u0, coef.common).unwrap();
            let xp = metrics::augmented_wmse(ep, up, coef.private).unwrap();
            worst = worst.max((x0 - (1.0 - r0)).abs()).max((xp - (1.0 - rp)).abs());
        }
    }
    (worst <= IDENTITY_TOL, format!("max error {worst:.2e}"))
}

fn receiver_oracle() -> (bool, String) {
    // every MMSE equalizer has magnitude at most 1/2
    let grid = GridSpec::new(-1.0, 1.0, 41).unwrap();
    let mut worst = 0.0f64;
    for d in draws(100, 2) {
        let n = d.layout.num_users() - 1;
        let h = d.channel.user(n);
        let (w, v) = metrics::mmse_receivers(h, &d.precoder, n, &d.layout).unwrap();
        let (wg, vg) = oracle::numeric_receiver(h, &d.precoder, n, &d.layout, &grid);
        worst = worst.max((w - wg).norm()).max((v - vg).norm());
    }
    (worst <= RECEIVER_TOL, format!("max distance {worst:.2e}"))
}

fn subproblem_oracle() -> (bool, String) {
    let solver = ClarabelSolver::default();
    let channel = ChannelRealization::new(vec![vec![C64::new(1.0, 0.0)]]).unwrap();
    let layout = GroupLayout::new(&[1]).unwrap();
    let grid = GridSpec::new(0.0, 1.0, 41).unwrap();
    let mut sub_gap = 0.0f64;
    let mut e2e_gap = 0.0f64;
    for mode in Mode::ALL {
        let problem = MmfProblem {
            channel: &channel,
            layout: &layout,
            scheme: Scheme::Cc,
            tx_budget: 1.0,
            common_threshold: 0.0,
            mode,
        };
        let init = ao::initialize_precoder(&channel, &layout, Scheme::Cc, CC_ALPHA, 1.0, InitStrategy::MatchedFilter, 0)
            .unwrap();
        let rx = metrics::receiver_state(&channel, &init, &layout).unwrap();
        let sol = subproblem::solve(&subproblem::assemble(&problem, CC_ALPHA, &rx).unwrap(), &solver).unwrap();
        let g = oracle::grid_subproblem(&problem, CC_ALPHA, &rx, &grid).unwrap().unwrap();
        sub_gap = sub_gap.max((sol.objective - g).abs());

        let result = ao::run_ao(&problem, CC_ALPHA, &AoConfig::default(), &solver).unwrap();
        let g = oracle::grid_end_to_end(&problem, CC_ALPHA, &grid).unwrap().unwrap();
        e2e_gap = e2e_gap.max((result.mmf_rate() - g).abs());
    }
    (
        sub_gap <= ORACLE_TOL && e2e_gap <= ORACLE_TOL,
        format!("subproblem gap {sub_gap:.2e}, end-to-end gap {e2e_gap:.2e}"),
    )
}

type Point = (usize, f64, Vec<(ResultRow, Option<SolveResult>)>);

/// Solves every realization and SNR of `config` through the harness,
/// keeping the AO results next to the rows.
fn sweep(config: &ExperimentConfig) -> Vec<Point> {
    let layout = config.validate().unwrap();
    let jobs: Vec<(usize, f64)> = (0..config.realizations)
        .flat_map(|r| config.snr_grid_db.iter().map(move |&s| (r, s)))
        .collect();
    jobs.into_par_iter()
        .map_init(ClarabelSolver::default, |solver, (r, snr)| {
            (r, snr, harness::solve_point(config, &layout, r, snr, solver).unwrap())
        })
        .collect()
}

/// Rows in the harness's canonical order.
fn rows_of(points: &[Point]) -> Vec<ResultRow> {
    let mut rows: Vec<ResultRow> = points.iter().flat_map(|(_, _, v)| v.iter().map(|(row, _)| row.clone())).collect();
    let rank = |row: &ResultRow| {
        (
            Scheme::ALL.iter().position(|&s| s == row.scheme),
            Mode::ALL.iter().position(|&m| m == row.mode),
            row.snr_db.to_bits(),
            row.realization,
        )
    };
    rows.sort_by_key(rank);
    rows
}

fn mean(aggregate: &[AggregateRow], scheme: Scheme, mode: Mode, snr: f64) -> f64 {
    aggregate
        .iter()
        .find(|a| a.scheme == scheme && a.mode == mode && a.snr_db == snr)
        .and_then(|a| a.mean_mmf_rate)
        .unwrap_or(f64::NAN)
}

fn overloaded_config() -> ExperimentConfig {
    ExperimentConfig {
        antennas: 2,
        group_sizes: vec![1, 2, 3],
        snr_grid_db: vec![20.0, 30.0],
        common_threshold: 0.3,
        realizations: REALIZATIONS,
        ..ExperimentConfig::default()
    }
}

fn ao_ascent(config: &ExperimentConfig, points: &[Point]) -> (bool, String) {
    let snr = 20.0;
    let mut worst = 0.0f64;
    let mut traces = 0usize;
    for (_, _, results) in points.iter().filter(|(_, s, _)| *s == snr) {
        for result in results.iter().filter_map(|(_, res)| res.as_ref()) {
            worst = worst.max(result.max_trace_drop());
            traces += 1;
        }
    }
    // every split the search visits, not only the winner
    let layout = config.validate().unwrap();
    let per_split: Vec<(f64, usize)> = (0..config.realizations)
        .into_par_iter()
        .map_init(ClarabelSolver::default, |solver, r| {
            let channel = rsmulticast::channels::channel_realization(
                config.antennas,
                layout.num_users(),
                config.master_seed,
                r as u64,
            );
            let (mut drop, mut count) = (0.0f64, 0usize);
            for scheme in Scheme::ALL {
                for mode in Mode::ALL {
                    let problem = MmfProblem {
                        channel: &channel,
                        layout: &layout,
                        scheme,
                        tx_budget: harness::snr_to_power(snr),
                        common_threshold: config.common_threshold,
                        mode,
                    };
                    let alphas = if scheme.uses_alpha() { config.ao.alpha_grid.clone() } else { vec![CC_ALPHA] };
                    for alpha in alphas {
                        if let Ok(result) = ao::run_ao(&problem, alpha, &config.ao, solver) {
                            drop = drop.max(result.max_trace_drop());
                            count += 1;
                        }
                    }
                }
            }
            (drop, count)
        })
        .collect();
    for (drop, count) in per_split {
        worst = worst.max(drop);
        traces += count;
    }
    (worst <= TRACE_SLACK, format!("{traces} traces, largest drop {worst:.2e}"))
}

fn rs_dominance(points: &[Point]) -> (bool, String) {
    let mut worst = f64::INFINITY;
    let mut violations = 0usize;
    let mut pairs = 0usize;
    for (_, _, results) in points {
        for scheme in Scheme::ALL {
            let rate = |mode| {
                results
                    .iter()
                    .find(|(r, _)| r.scheme == scheme && r.mode == mode)
                    .and_then(|(r, _)| r.mmf_rate)
            };
            match (rate(Mode::Rs), rate(Mode::NoRs)) {
                (Some(rs), Some(nors)) => {
                    pairs += 1;
                    worst = worst.min(rs - nors);
                    if rs < nors - DOMINANCE_SLACK {
                        violations += 1;
                    }
                }
                (None, Some(_)) => violations += 1,
                _ => {}
            }
        }
    }
    (violations == 0, format!("{pairs} pairs, {violations} violations, min RS - NoRS {worst:.2e}"))
}

fn overloaded_shape(aggregate: &[AggregateRow]) -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for scheme in Scheme::ALL {
        let nors = mean(aggregate, scheme, Mode::NoRs, 30.0) - mean(aggregate, scheme, Mode::NoRs, 20.0);
        let rs = mean(aggregate, scheme, Mode::Rs, 30.0) - mean(aggregate, scheme, Mode::Rs, 20.0);
        pass &= nors <= NORS_GAIN_MAX && rs >= RS_GAIN_MIN;
        parts.push(format!("{scheme} gain NoRS {nors:.3} RS {rs:.3}"));
    }
    for mode in Mode::ALL {
        let [sc, cc, mc] = Scheme::ALL.map(|s| mean(aggregate, s, mode, 30.0));
        pass &= mc >= cc && cc >= sc - ORDERING_SLACK;
        parts.push(format!("{} at 30 dB SC {sc:.3} CC {cc:.3} MC {mc:.3}", mode.as_str()));
    }
    (pass, parts.join(", "))
}

fn underloaded_config() -> ExperimentConfig {
    ExperimentConfig {
        antennas: 6,
        group_sizes: vec![1, 2, 3],
        common_threshold: 0.5,
        realizations: REALIZATIONS,
        ..ExperimentConfig::default()
    }
}

fn underloaded_shape(config: &ExperimentConfig, aggregate: &[AggregateRow]) -> (bool, String) {
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut at = String::new();
    for scheme in Scheme::ALL {
        for &snr in &config.snr_grid_db {
            let rs = mean(aggregate, scheme, Mode::Rs, snr);
            let nors = mean(aggregate, scheme, Mode::NoRs, snr);
            let gap = (rs - nors).abs() / rs;
            pass &= gap <= UNDERLOADED_GAP;
            if !(gap <= worst) {
                worst = gap;
                at = format!("{scheme} at {snr} dB");
            }
        }
    }
    (pass, format!("largest relative gap {:.2}% ({at})", 100.0 * worst))
}

fn common_threshold(sets: &[(&ExperimentConfig, &[ResultRow])]) -> (bool, String) {
    let mut worst = 0.0f64;
    let mut ok = 0usize;
    for (config, rows) in sets {
        for row in rows.iter().filter(|r| r.status == SolveStatus::Ok) {
            let rc = row.common_rate.unwrap_or(f64::NAN);
            let off = (rc - config.common_threshold).abs();
            worst = if off <= worst { worst } else { off };
            ok += 1;
        }
    }
    (worst <= THRESHOLD_TOL, format!("{ok} Ok rows, max |R_c - Rc_th| {worst:.2e}"))
}

fn determinism() -> (bool, String) {
    let config = ExperimentConfig {
        antennas: 2,
        group_sizes: vec![1, 2],
        snr_grid_db: vec![0.0, 15.0],
        realizations: 3,
        master_seed: 21,
        ..ExperimentConfig::default()
    };
    let csv = || {
        let rows = harness::run_experiment(&config).unwrap();
        (harness::rows_csv(&rows), harness::aggregate_csv(&harness::aggregate(&rows)))
    };
    let first = csv();
    let second = csv();
    (first == second, format!("{} + {} bytes compared", first.0.len(), first.1.len()))
}

fn log_counts(label: &str, rows: &[ResultRow]) {
    let count = |s| rows.iter().filter(|r| r.status == s).count();
    eprintln!(
        "{label}: {} rows, {} Ok, {} MaxItersReached, {} Infeasible",
        rows.len(),
        count(SolveStatus::Ok),
        count(SolveStatus::MaxItersReached),
        count(SolveStatus::Infeasible)
    );
}

fn main() -> ExitCode {
    let mut all = true;
    all &= report(1, "rate-MMSE identity", &timed(5, rate_mmse_identity));
    all &= report(2, "WMSE duality", &timed(5, wmse_duality));
    all &= report(3, "receiver oracle", &timed(30, receiver_oracle));
    all &= report(4, "subproblem and end-to-end oracle", &timed(60, subproblem_oracle));

    let over = overloaded_config();
    let t = Instant::now();
    let over_points = sweep(&over);
    let over_sweep = t.elapsed();
    let over_rows = rows_of(&over_points);
    log_counts("overloaded sweep", &over_rows);
    let mut c5 = timed(600, || ao_ascent(&over, &over_points));
    c5.elapsed += over_sweep / 2;
    all &= report(5, "AO ascent", &c5);
    all &= report(6, "RS dominance", &timed(600, || rs_dominance(&over_points)));
    let over_agg = harness::aggregate(&over_rows);
    let mut c7 = timed(45 * 60, || overloaded_shape(&over_agg));
    c7.elapsed += over_sweep;
    all &= report(7, "overloaded reproduction", &c7);

    let under = underloaded_config();
    let t = Instant::now();
    let under_rows = rows_of(&sweep(&under));
    let under_sweep = t.elapsed();
    log_counts("underloaded sweep", &under_rows);
    let under_agg = harness::aggregate(&under_rows);
    let mut c8 = timed(45 * 60, || underloaded_shape(&under, &under_agg));
    c8.elapsed += under_sweep;
    all &= report(8, "underloaded reproduction", &c8);

    all &= report(
        9,
        "common-rate threshold",
        &timed(60, || common_threshold(&[(&over, &over_rows), (&under, &under_rows)])),
    );
    all &= report(10, "determinism", &timed(600, determinism));

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
