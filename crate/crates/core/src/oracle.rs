//! Brute-force reference solutions for tiny instances.
//!
//! Everything here is evaluated from the raw precoder columns and channel
//! entries with its own arithmetic; nothing calls into [`crate::metrics`] or
//! [`crate::subproblem`]. The searches are slow on purpose and only meant
//! for tests.
//!
//! The precoder oracles are restricted to a single transmit antenna. There
//! every precoder column is a complex scalar; they are searched as real
//! coefficients times the phase of the first user's channel, so every
//! received amplitude is real. Search coordinates are fractions in
//! `[grid.lo, grid.hi]` (normally `[0, 1]`) of a bound on each column.
//!
//! For the exact rates only `|p_A|` and the `|p_k|` matter, so the search is
//! over non-negative values except for `p_0` of MC, which may have to point
//! against the private columns. This is without loss of generality. The
//! fixed-receiver surrogate rewards matching the equalizers rather than raw
//! gain, so there every column may take either sign. That is exact when the
//! channels and equalizers are real and a heuristic bound otherwise.

use alloc::vec;
use alloc::vec::Vec;

use crate::model::{MmfProblem, Mode, PrecoderSet, ReceiverState, Scheme};
use crate::{Error, Result, C64};

/// Number of zoom rounds after the coarse grid.
pub const REFINEMENT_ROUNDS: usize = 3;
/// Shrink factor of the search window per zoom round.
pub const ZOOM: f64 = 10.0;

/// Uniform grid `lo..=hi` with `steps` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        if !(lo < hi) || steps < 2 {
            return Err(Error::InvalidParameter("grid needs lo < hi and at least two steps"));
        }
        Ok(Self { lo, hi, steps })
    }

    fn points(&self, lo: f64, hi: f64) -> impl Iterator<Item = f64> + '_ {
        let n = self.steps;
        (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
    }
}

/// Minimizes `f` over a box by a coarse grid and zoom rounds. Every round
/// re-centres a window `ZOOM` times narrower on the incumbent.
fn grid_search<F>(dims: usize, lo: f64, hi: f64, grid: &GridSpec, mut f: F) -> Option<(f64, Vec<f64>)>
where
    F: FnMut(&[f64]) -> Option<f64>,
{
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut bounds = vec![(lo, hi); dims];
    let mut half = (hi - lo) / 2.0;
    for round in 0..=REFINEMENT_ROUNDS {
        if round > 0 {
            let Some((_, x)) = &best else { return None };
            half /= ZOOM;
            bounds = x.iter().map(|&c| ((c - half).max(lo), (c + half).min(hi))).collect();
        }
        let axes: Vec<Vec<f64>> = bounds.iter().map(|&(a, b)| grid.points(a, b).collect()).collect();
        let mut idx = vec![0usize; dims];
        let mut x = vec![0.0; dims];
        'outer: loop {
            for d in 0..dims {
                x[d] = axes[d][idx[d]];
            }
            if let Some(value) = f(&x) {
                if best.as_ref().map_or(true, |(b, _)| value < *b) {
                    best = Some((value, x.clone()));
                }
            }
            for d in 0..dims {
                idx[d] += 1;
                if idx[d] < grid.steps {
                    continue 'outer;
                }
                idx[d] = 0;
            }
            break;
        }
    }
    best
}

fn dot_conj(h: &[C64], p: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..h.len() {
        acc += h[i].conj() * p[i];
    }
    acc
}

/// Minimizes the super-common and private MSEs over the equalizer by grid
/// search on `(re, im)` in `[grid.lo, grid.hi]^2`.
pub fn numeric_receiver(
    h: &[C64],
    p: &PrecoderSet,
    user: usize,
    layout: &crate::model::GroupLayout,
    grid: &GridSpec,
) -> (C64, C64) {
    let (b, c) = match p.scheme() {
        Scheme::Cc => (1.0, 1.0),
        _ => (p.alpha(), 1.0 - p.alpha()),
    };
    let mut p_a = vec![C64::new(0.0, 0.0); h.len()];
    if let Some(p0) = p.common_column() {
        p_a.copy_from_slice(p0);
    }
    if p.scheme() != Scheme::Cc {
        for col in p.private_columns() {
            for i in 0..h.len() {
                p_a[i] += col[i];
            }
        }
    }
    let a = dot_conj(h, &p_a);
    let gains: Vec<C64> = p.private_columns().iter().map(|col| dot_conj(h, col)).collect();
    let interference: f64 = gains.iter().map(|g| c * (g.re * g.re + g.im * g.im)).sum();
    let own = gains[layout.group_of(user)];

    let mse_common = |w: C64| {
        let wa = w * a;
        (w.re * w.re + w.im * w.im) * (b * (a.re * a.re + a.im * a.im) + interference + 1.0) - 2.0 * b * wa.re + b
    };
    let mse_private = |v: C64| {
        let vo = v * own;
        (v.re * v.re + v.im * v.im) * (interference + 1.0) - 2.0 * c * vo.re + c
    };
    let argmin = |f: &dyn Fn(C64) -> f64| {
        grid_search(2, grid.lo, grid.hi, grid, |x| Some(f(C64::new(x[0], x[1]))))
            .map(|(_, x)| C64::new(x[0], x[1]))
            .expect("grid is non-empty")
    };
    (argmin(&mse_common), argmin(&mse_private))
}

/// Single-antenna view of a problem: channel gains `|h_n|^2` and the common
/// phase used for every column.
struct ScalarInstance {
    gains: Vec<f64>,
    groups: Vec<usize>,
    members: Vec<Vec<usize>>,
    b: f64,
    c: f64,
    scheme: Scheme,
    budget: f64,
    /// Largest column magnitude any feasible point can have.
    radius: f64,
    /// Same for `p_0` of MC, which can cancel part of the private columns.
    common_radius: f64,
}

impl ScalarInstance {
    fn new(problem: &MmfProblem<'_>, alpha: f64, max_groups: usize, max_users: usize) -> Result<Self> {
        let layout = problem.layout;
        if problem.channel.num_antennas() != 1 || layout.num_groups() > max_groups || layout.num_users() > max_users {
            return Err(Error::TooLarge);
        }
        let (b, c) = match problem.scheme {
            Scheme::Cc => (1.0, 1.0),
            _ => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::AlphaOutOfRange(alpha));
                }
                (alpha, 1.0 - alpha)
            }
        };
        let gains = problem.channel.rows().iter().map(|h| h[0].norm_sqr()).collect();
        let groups = (0..layout.num_users()).map(|n| layout.group_of(n)).collect();
        let members = (0..layout.num_groups()).map(|k| layout.members(k).collect()).collect();
        Ok(Self {
            gains,
            groups,
            members,
            b,
            c,
            scheme: problem.scheme,
            budget: problem.tx_budget,
            radius: libm::sqrt(problem.tx_budget / b.min(c)),
            common_radius: libm::sqrt(problem.tx_budget / b)
                + layout.num_groups() as f64 * libm::sqrt(problem.tx_budget / c),
        })
    }

    /// Column coefficients in matrix order from search coordinates in
    /// `[0, 1]`. Signed columns map `[0, 1]` onto `[-r, r]`.
    fn coefficients(&self, scaled: &[f64], all_signed: bool) -> Vec<f64> {
        scaled
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let mc_common = self.scheme == Scheme::Mc && i == 0;
                let r = if mc_common { self.common_radius } else { self.radius };
                if all_signed || mc_common {
                    (2.0 * s - 1.0) * r
                } else {
                    s * r
                }
            })
            .collect()
    }

    fn columns(&self) -> usize {
        self.members.len() + usize::from(self.scheme != Scheme::Sc)
    }

    /// `(p_A, private columns)` for coefficients in matrix order.
    fn split<'m>(&self, mags: &'m [f64]) -> (f64, &'m [f64]) {
        match self.scheme {
            Scheme::Sc => (mags.iter().sum(), mags),
            Scheme::Cc => (mags[0], &mags[1..]),
            Scheme::Mc => (mags.iter().sum(), &mags[1..]),
        }
    }

    fn power(&self, mags: &[f64]) -> f64 {
        let (agg, private) = self.split(mags);
        self.b * agg * agg + self.c * private.iter().map(|m| m * m).sum::<f64>()
    }
}

/// Best `min_k (x_k + caps_k)` with `x >= 0`, `sum x <= surplus`, by
/// bisection on the common level.
fn level_fill(caps: &[f64], surplus: f64) -> f64 {
    let lowest = caps.iter().copied().fold(f64::INFINITY, f64::min);
    let mut lo = lowest;
    let mut hi = lowest + surplus;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let need: f64 = caps.iter().map(|&a| (mid - a).max(0.0)).sum();
        if need <= surplus {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Best `R_g` of the fixed-receiver WMSE update on a single-antenna
/// instance, by grid search over column magnitudes. `None` when no grid
/// point meets the common-rate threshold.
pub fn grid_subproblem(
    problem: &MmfProblem<'_>,
    alpha: f64,
    rx: &ReceiverState,
    grid: &GridSpec,
) -> Result<Option<f64>> {
    let inst = ScalarInstance::new(problem, alpha, 2, usize::MAX)?;
    if inst.budget == 0.0 {
        return Ok(Some(0.0).filter(|_| problem.common_threshold <= 0.0));
    }
    let phase = {
        let h0 = problem.channel.user(0)[0];
        if h0.norm() > 0.0 {
            h0 / h0.norm()
        } else {
            C64::new(1.0, 0.0)
        }
    };
    let n_users = inst.gains.len();
    let objective = |scaled: &[f64]| -> Option<f64> {
        let mags = inst.coefficients(scaled, true);
        if inst.power(&mags) > inst.budget {
            return None;
        }
        let (agg, private) = inst.split(&mags);
        let mut common_cap = f64::INFINITY;
        let mut private_caps = vec![f64::INFINITY; inst.members.len()];
        for n in 0..n_users {
            let h = problem.channel.user(n)[0];
            // received amplitudes h^* p for the aggregate and each group column
            let recv = |m: f64| h.conj() * phase * m;
            let (w_eq, w) = (rx.common_eq[n], rx.common_weight[n]);
            let mut eps0 = inst.b * (w_eq * recv(agg) - 1.0).norm_sqr() + w_eq.norm_sqr();
            for &m in private {
                eps0 += inst.c * (w_eq * recv(m)).norm_sqr();
            }
            // natural-log WMSE; caps converted back to bits
            let xi0 = w * eps0 - libm::log(inst.b * w);
            common_cap = common_cap.min((1.0 - xi0) / core::f64::consts::LN_2);

            let own = inst.groups[n];
            let (v_eq, v) = (rx.private_eq[n], rx.private_weight[n]);
            let mut epsp = v_eq.norm_sqr();
            for (k, &m) in private.iter().enumerate() {
                let target = if k == own { 1.0 } else { 0.0 };
                epsp += inst.c * (v_eq * recv(m) - target).norm_sqr();
            }
            let xip = v * epsp - libm::log(inst.c * v);
            private_caps[own] = private_caps[own].min((1.0 - xip) / core::f64::consts::LN_2);
        }
        let surplus = common_cap - problem.common_threshold;
        if surplus < 0.0 {
            return None;
        }
        let rg = match problem.mode {
            Mode::Rs => level_fill(&private_caps, surplus),
            Mode::NoRs => private_caps.iter().copied().fold(f64::INFINITY, f64::min),
        };
        Some(-rg)
    };
    Ok(grid_search(inst.columns(), grid.lo, grid.hi, grid, objective).map(|(v, _)| -v))
}

/// Best exact max-min fair rate of a single-antenna instance, by grid
/// search over column magnitudes and, for two groups, the split of the
/// super-common surplus. `None` when the threshold is never met.
pub fn grid_end_to_end(problem: &MmfProblem<'_>, alpha: f64, grid: &GridSpec) -> Result<Option<f64>> {
    let inst = ScalarInstance::new(problem, alpha, 2, 3)?;
    let n_groups = inst.members.len();
    let eval = |mags: &[f64]| -> Option<(f64, Vec<f64>)> {
        let (agg, private) = inst.split(mags);
        let mut r0 = f64::INFINITY;
        let mut rk = vec![f64::INFINITY; n_groups];
        for (n, &g) in inst.gains.iter().enumerate() {
            let interference: f64 = private.iter().map(|m| inst.c * g * m * m).sum();
            let own = inst.groups[n];
            let own_power = inst.c * g * private[own] * private[own];
            let sinr0 = inst.b * g * agg * agg / (1.0 + interference);
            let sinrp = own_power / (1.0 + interference - own_power);
            r0 = r0.min(libm::log2(1.0 + sinr0));
            rk[own] = rk[own].min(libm::log2(1.0 + sinrp));
        }
        let surplus = r0 - problem.common_threshold;
        (surplus >= 0.0).then_some((surplus, rk))
    };
    if inst.budget == 0.0 {
        return Ok(eval(&vec![0.0; inst.columns()]).map(|_| 0.0));
    }

    let split_grid = GridSpec::new(0.0, 1.0, grid.steps)?;
    let objective = |scaled: &[f64]| -> Option<f64> {
        let mags = inst.coefficients(scaled, false);
        if inst.power(&mags) > inst.budget {
            return None;
        }
        let (surplus, rk) = eval(&mags)?;
        let rg = match (problem.mode, n_groups) {
            (Mode::NoRs, _) => rk.iter().copied().fold(f64::INFINITY, f64::min),
            (Mode::Rs, 1) => rk[0] + surplus,
            (Mode::Rs, _) => {
                let value = |t: &[f64]| Some(-((rk[0] + t[0] * surplus).min(rk[1] + (1.0 - t[0]) * surplus)));
                -grid_search(1, 0.0, 1.0, &split_grid, value)?.0
            }
        };
        Some(-rg)
    };
    Ok(grid_search(inst.columns(), grid.lo, grid.hi, grid, objective).map(|(v, _)| -v))
}
