//! Alternating optimization of receivers, weights and precoders.
//!
//! Each iteration refreshes the MMSE equalizers and WMSE weights at the
//! current precoder, then solves the convex precoder update. Because the
//! refreshed surrogate is tight at the current precoder, the update's optimal
//! `R_g` can only grow from one iteration to the next.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cone::ConeSolver;
use crate::metrics;
use crate::model::{
    norm_sqr, ChannelRealization, GroupLayout, MmfProblem, PrecoderSet, RateAllocation, Scheme, ALPHA_MAX,
    ALPHA_MIN,
};
use crate::subproblem;
use crate::{Error, Result, C64};

/// Power split recorded on CC precoders, which do not use one.
pub const CC_ALPHA: f64 = 1.0;

/// Tolerance used when re-checking the common-rate threshold on exact rates.
const THRESHOLD_TOL: f64 = 1e-6;

/// Objective cost per bit of common-rate shortfall while restoring
/// feasibility.
pub const RESTORATION_PENALTY: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStrategy {
    /// I.i.d. complex Gaussian columns drawn from the configured seed.
    SeededRandom,
    /// Each group column along the mean channel of its members; `p_0` along
    /// the mean channel of all users.
    MatchedFilter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoConfig {
    /// Stop once successive `R_g` values differ by at most this much.
    pub epsilon: f64,
    pub max_iters: usize,
    pub init: InitStrategy,
    pub seed: u64,
    /// Candidate power splits for SC and MC.
    pub alpha_grid: Vec<f64>,
    /// Number of AO starts per run. Start 0 uses `init`; later starts draw
    /// seeded random precoders. The best converged objective is kept.
    pub starts: usize,
    /// After each update, search along the last move for a point with a
    /// higher exact MMF rate. Off gives the plain AO.
    pub accelerate: bool,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_iters: 200,
            init: InitStrategy::MatchedFilter,
            seed: 0,
            alpha_grid: default_alpha_grid(),
            starts: 1,
            accelerate: true,
        }
    }
}

impl AoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive"));
        }
        if self.max_iters == 0 || self.starts == 0 {
            return Err(Error::InvalidParameter("max_iters and starts must be at least 1"));
        }
        if self.alpha_grid.iter().any(|a| !(ALPHA_MIN..=ALPHA_MAX).contains(a)) {
            return Err(Error::InvalidParameter("alpha grid entries must lie in [0.01, 0.99]"));
        }
        Ok(())
    }
}

/// `{0.05, 0.10, .., 0.95}`.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..20).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolveStatus {
    Ok,
    Infeasible,
    MaxItersReached,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Ok => "Ok",
            SolveStatus::Infeasible => "Infeasible",
            SolveStatus::MaxItersReached => "MaxItersReached",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub precoder: PrecoderSet,
    /// Exact rates at `precoder`.
    pub rates: RateAllocation,
    /// Subproblem objective of every iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub status: SolveStatus,
}

impl SolveResult {
    pub fn mmf_rate(&self) -> f64 {
        self.rates.mmf_rate
    }

    /// Largest drop between consecutive trace entries (0 for a monotone trace).
    pub fn max_trace_drop(&self) -> f64 {
        self.trace.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

fn unit_or_zero(v: Vec<C64>) -> Vec<C64> {
    let norm = libm::sqrt(norm_sqr(&v));
    if norm > 0.0 {
        v.into_iter().map(|z| z / norm).collect()
    } else {
        v
    }
}

fn mean_channel(ch: &ChannelRealization, users: impl Iterator<Item = usize>) -> Vec<C64> {
    let mut acc = vec![C64::new(0.0, 0.0); ch.num_antennas()];
    let mut count = 0usize;
    let mut first = None;
    for n in users {
        first.get_or_insert(n);
        for (a, h) in acc.iter_mut().zip(ch.user(n)) {
            *a += h;
        }
        count += 1;
    }
    if norm_sqr(&acc) == 0.0 {
        if let Some(n) = first {
            return ch.user(n).to_vec();
        }
    }
    acc.iter().map(|z| z / count.max(1) as f64).collect()
}

/// Builds a starting precoder with `transmit_power == tx_budget`.
///
/// Columns get equal norms before a single global rescale onto the budget.
pub fn initialize_precoder(
    ch: &ChannelRealization,
    layout: &GroupLayout,
    scheme: Scheme,
    alpha: f64,
    tx_budget: f64,
    strategy: InitStrategy,
    seed: u64,
) -> Result<PrecoderSet> {
    crate::model::scheme_coefficients(scheme, alpha)?;
    if ch.num_users() != layout.num_users() {
        return Err(Error::DimensionMismatch("channel and layout user counts differ"));
    }
    let m = ch.num_antennas();
    let groups = layout.num_groups();
    if tx_budget == 0.0 {
        return PrecoderSet::zeros(scheme, alpha, m, groups, tx_budget);
    }

    let (common, private) = match strategy {
        InitStrategy::SeededRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draw = |rng: &mut ChaCha8Rng| -> Vec<C64> {
                (0..m)
                    .map(|_| {
                        let re: f64 = StandardNormal.sample(rng);
                        let im: f64 = StandardNormal.sample(rng);
                        C64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
                    })
                    .collect()
            };
            let common = scheme.has_common_column().then(|| draw(&mut rng));
            let private: Vec<_> = (0..groups).map(|_| draw(&mut rng)).collect();
            (common, private)
        }
        InitStrategy::MatchedFilter => {
            let common = scheme
                .has_common_column()
                .then(|| mean_channel(ch, 0..layout.num_users()));
            let private = (0..groups).map(|k| mean_channel(ch, layout.members(k))).collect();
            (common, private)
        }
    };
    let common = common.map(unit_or_zero);
    let private = private.into_iter().map(unit_or_zero).collect();
    let shape = PrecoderSet::new(scheme, alpha, common, private, tx_budget)?;
    let power = shape.transmit_power();
    if !(power > 0.0) {
        return Err(Error::InvalidParameter("initial precoder has no transmit power"));
    }
    Ok(shape.scaled(libm::sqrt(tx_budget / power)))
}

fn exact_rates(problem: &MmfProblem<'_>, precoder: &PrecoderSet) -> Result<RateAllocation> {
    let (common_pool, group_private) = metrics::min_rates(problem.channel, precoder, problem.layout)?;
    metrics::allocate_rates(
        common_pool,
        &group_private,
        problem.common_threshold,
        problem.mode,
        THRESHOLD_TOL,
    )
    .ok_or(Error::Infeasible)
}

/// Moves a precoder that misses the common-rate threshold onto one that
/// meets it, by running the AO on the elastic update. Gives up with
/// [`Error::Infeasible`] once the penalized objective stops improving while
/// the shortfall is still positive.
pub fn restore_feasibility<S: ConeSolver + ?Sized>(
    problem: &MmfProblem<'_>,
    initial: PrecoderSet,
    config: &AoConfig,
    solver: &S,
) -> Result<PrecoderSet> {
    let alpha = initial.alpha();
    let mut precoder = initial;
    let mut previous = f64::INFINITY;
    for _ in 0..config.max_iters {
        let (pool, _) = metrics::min_rates(problem.channel, &precoder, problem.layout)?;
        if pool >= problem.common_threshold {
            return Ok(precoder);
        }
        let rx = metrics::receiver_state(problem.channel, &precoder, problem.layout)?;
        let sp = subproblem::assemble_elastic(problem, alpha, &rx, RESTORATION_PENALTY)?;
        let step = subproblem::solve(&sp, solver)?;
        precoder = step.precoder;
        let cost = RESTORATION_PENALTY * step.threshold_slack - step.objective;
        if step.threshold_slack > 0.0 && previous - cost <= config.epsilon {
            let (pool, _) = metrics::min_rates(problem.channel, &precoder, problem.layout)?;
            if pool >= problem.common_threshold {
                return Ok(precoder);
            }
            return Err(Error::Infeasible);
        }
        previous = cost;
    }
    Err(Error::Infeasible)
}

/// Runs the AO loop from a given precoder. A starting point below the
/// common-rate threshold first goes through [`restore_feasibility`]; the
/// trace only covers the iterations after that.
pub fn run_ao_from<S: ConeSolver + ?Sized>(
    problem: &MmfProblem<'_>,
    initial: PrecoderSet,
    config: &AoConfig,
    solver: &S,
) -> Result<SolveResult> {
    problem.validate()?;
    config.validate()?;
    let alpha = initial.alpha();
    let mut precoder = restore_feasibility(problem, initial, config, solver)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut previous = 0.0;

    for iter in 0..config.max_iters {
        let rx = metrics::receiver_state(problem.channel, &precoder, problem.layout)?;
        let sp = subproblem::assemble(problem, alpha, &rx)?;
        let step = match subproblem::solve(&sp, solver) {
            Ok(step) => step,
            Err(e) if iter == 0 => return Err(e),
            // The current iterate is feasible for the update, so a failure
            // here is numerical; stop at the last good precoder.
            Err(_) => break,
        };
        trace.push(step.objective);
        let last = core::mem::replace(&mut precoder, step.precoder);
        if config.accelerate {
            extrapolate(problem, &last, &mut precoder)?;
        }
        if (step.objective - previous).abs() <= config.epsilon {
            converged = true;
            break;
        }
        previous = step.objective;
    }

    let rates = exact_rates(problem, &precoder)?;
    Ok(SolveResult {
        precoder,
        rates,
        iterations: trace.len(),
        trace,
        converged,
        status: if converged {
            SolveStatus::Ok
        } else {
            SolveStatus::MaxItersReached
        },
    })
}

/// Step lengths tried by [`extrapolate`], in multiples of the last move.
const EXTRAPOLATION_STEPS: [f64; 7] = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];

/// Safeguarded line search along the last move: replaces `current` by the
/// best `current + beta (current - last)` when that raises the exact MMF
/// rate without breaking the common-rate threshold. The next surrogate is
/// tight at whichever point is kept, so the trace stays non-decreasing.
fn extrapolate(problem: &MmfProblem<'_>, last: &PrecoderSet, current: &mut PrecoderSet) -> Result<()> {
    let mut best = match exact_rates(problem, current) {
        Ok(r) => r.mmf_rate,
        Err(Error::Infeasible) => return Ok(()),
        Err(e) => return Err(e),
    };
    let mut chosen = None;
    for beta in EXTRAPOLATION_STEPS {
        let candidate = current
            .scaled(1.0 + beta)
            .try_add(&last.scaled(-beta))?
            .with_budget(problem.tx_budget);
        match exact_rates(problem, &candidate) {
            Ok(r) if r.mmf_rate > best => {
                best = r.mmf_rate;
                chosen = Some(candidate);
            }
            Ok(_) | Err(Error::Infeasible) => {}
            Err(e) => return Err(e),
        }
    }
    if let Some(candidate) = chosen {
        *current = candidate;
    }
    Ok(())
}

fn better(candidate: &SolveResult, incumbent: &Option<SolveResult>) -> bool {
    // Converged results beat unconverged ones, then larger R_g wins.
    incumbent.as_ref().map_or(true, |best| {
        (candidate.converged, candidate.mmf_rate()) > (best.converged, best.mmf_rate())
    })
}

/// Algorithm driver for one power split: initializes, iterates, and keeps
/// the best of `config.starts` starts.
pub fn run_ao<S: ConeSolver + ?Sized>(
    problem: &MmfProblem<'_>,
    alpha: f64,
    config: &AoConfig,
    solver: &S,
) -> Result<SolveResult> {
    config.validate()?;
    let mut best: Option<SolveResult> = None;
    let mut last_err = Error::Infeasible;
    for start in 0..config.starts {
        let (strategy, seed) = match start {
            0 => (config.init, config.seed),
            s => (InitStrategy::SeededRandom, config.seed.wrapping_add(s as u64)),
        };
        let init = initialize_precoder(
            problem.channel,
            problem.layout,
            problem.scheme,
            alpha,
            problem.tx_budget,
            strategy,
            seed,
        )?;
        match run_ao_from(problem, init, config, solver) {
            Ok(result) => {
                if better(&result, &best) {
                    best = Some(result);
                }
            }
            Err(e @ (Error::Infeasible | Error::NumericalTrouble)) => last_err = e,
            Err(e) => return Err(e),
        }
    }
    best.ok_or(last_err)
}

/// Runs the AO for every power split on the grid and keeps the largest
/// converged `R_g`, falling back to unconverged runs when none converged.
///
/// Ties go to the smaller split.
pub fn optimize_alpha<S: ConeSolver + ?Sized>(
    problem: &MmfProblem<'_>,
    config: &AoConfig,
    solver: &S,
) -> Result<(f64, SolveResult)> {
    if !problem.scheme.uses_alpha() {
        return Err(Error::SchemeHasNoAlpha);
    }
    if config.alpha_grid.is_empty() {
        return Err(Error::InvalidParameter("alpha grid is empty"));
    }
    let mut grid = config.alpha_grid.clone();
    grid.sort_by(f64::total_cmp);
    let mut best: Option<(f64, SolveResult)> = None;
    for alpha in grid {
        match run_ao(problem, alpha, config, solver) {
            Ok(result) => {
                if best
                    .as_ref()
                    .map_or(true, |(_, b)| (result.converged, result.mmf_rate()) > (b.converged, b.mmf_rate()))
                {
                    best = Some((alpha, result));
                }
            }
            Err(Error::Infeasible | Error::NumericalTrouble) => {}
            Err(e) => return Err(e),
        }
    }
    best.ok_or(Error::AllInfeasible)
}

/// Designs a precoder for any scheme: CC runs the AO once, SC and MC search
/// the power split. Returns the chosen split alongside the result.
pub fn solve_scheme<S: ConeSolver + ?Sized>(
    problem: &MmfProblem<'_>,
    config: &AoConfig,
    solver: &S,
) -> Result<(f64, SolveResult)> {
    if problem.scheme.uses_alpha() {
        optimize_alpha(problem, config, solver)
    } else {
        run_ao(problem, CC_ALPHA, config, solver).map(|r| (CC_ALPHA, r))
    }
}

/// [`solve_scheme`], then re-runs the AO from each warm start carried over
/// into the problem's scheme with [`PrecoderSet::embed`], keeping the best.
///
/// Warm starts that the scheme cannot express are skipped. Since a carried
/// precoder keeps its rates, seeding the RS problem with the NoRS solution,
/// or MC with CC, means the result is at least as good as the seed.
pub fn solve_scheme_warm<S: ConeSolver + ?Sized>(
    problem: &MmfProblem<'_>,
    config: &AoConfig,
    solver: &S,
    warm: &[&PrecoderSet],
) -> Result<(f64, SolveResult)> {
    let mut best = match solve_scheme(problem, config, solver) {
        Ok(found) => Some(found),
        Err(Error::Infeasible | Error::NumericalTrouble | Error::AllInfeasible) => None,
        Err(e) => return Err(e),
    };
    for seed in warm {
        let mut splits: Vec<f64> = Vec::new();
        if !problem.scheme.uses_alpha() {
            splits.push(CC_ALPHA);
        } else {
            if let Some((alpha, _)) = &best {
                splits.push(*alpha);
            }
            if seed.scheme().uses_alpha() && !splits.contains(&seed.alpha()) {
                splits.push(seed.alpha());
            }
        }
        for alpha in splits {
            let Some(init) = seed.embed(problem.scheme, alpha)? else {
                continue;
            };
            let init = init.with_budget(problem.tx_budget);
            match run_ao_from(problem, init, config, solver) {
                Ok(result) => {
                    let current = best.as_ref().map(|(_, r)| r.clone());
                    if better(&result, &current) {
                        best = Some((alpha, result));
                    }
                }
                Err(Error::Infeasible | Error::NumericalTrouble) => {}
                Err(e) => return Err(e),
            }
        }
    }
    best.ok_or(Error::AllInfeasible)
}
