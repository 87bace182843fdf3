//! The convex precoder update solved in every AO iteration.
//!
//! With the equalizers `(W_n, V_n)` and weights `(w_n, v_n)` held fixed, each
//! augmented WMSE is a convex quadratic in the precoder columns. The update
//! uses the natural-log form `w eps - ln(B w)`: with `w = 1/eps^min` that is
//! the form whose minimum over the weight equals `1 - R` (rate in nats), so
//! the constraint is tight at the current precoder and a lower bound on the
//! true rate everywhere else. With a base-2 logarithm the weight `1/eps^min`
//! is not the minimizer and the bound fails. Rate variables stay in bits and
//! are scaled by `ln 2`.
//!
//! For user `n` the super-common WMSE is
//!
//! ```text
//! w (B |W h^H p_A - 1|^2 + C sum_k |W h^H p_k|^2 + |W|^2) - ln(B w)
//! ```
//!
//! and `ln 2 (R_c + sum_k R_{c,k}) <= 1 - xi_{0,n}` becomes `||u||^2 <= t`
//! with `u` linear and `t` affine in the decision vector. That rotated cone
//! is posed as the second-order cone `(t + 1, t - 1, 2u)`. Private
//! constraints are built the same way from the post-SIC MSE, and the power
//! budget is a plain second-order cone.
//!
//! Complex precoder entries are lifted to `(re, im)` pairs. Decision vector
//! layout: precoder columns first (`p_0` when present, then `p_1..p_K`, each
//! antenna as `re, im`), then `R_c`, `R_{c,1..K}`, `R_{1..K}`, `R_g` and, for
//! the elastic variant, the threshold slack.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::LN_2;

use crate::cone::{AffineExpr, ConeKind, ConeProgram, ConeSolver, ConeStatus};
use crate::metrics;
use crate::model::{MmfProblem, Mode, PrecoderSet, RateAllocation, ReceiverState};
use crate::{Error, Result, C64};

/// Index map of the lifted decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub antennas: usize,
    pub groups: usize,
    pub has_common: bool,
    pub has_slack: bool,
}

impl VarLayout {
    pub fn columns(&self) -> usize {
        self.groups + usize::from(self.has_common)
    }

    pub fn precoder_vars(&self) -> usize {
        2 * self.antennas * self.columns()
    }

    /// Real part of entry `i` of matrix column `col`; the imaginary part follows.
    pub fn entry(&self, col: usize, i: usize) -> usize {
        2 * (col * self.antennas + i)
    }

    /// Matrix column holding the private precoder of group `k`.
    pub fn private_col(&self, k: usize) -> usize {
        k + usize::from(self.has_common)
    }

    pub fn common_rate(&self) -> usize {
        self.precoder_vars()
    }

    pub fn group_common_rate(&self, k: usize) -> usize {
        self.common_rate() + 1 + k
    }

    pub fn group_private_rate(&self, k: usize) -> usize {
        self.common_rate() + 1 + self.groups + k
    }

    pub fn mmf_rate(&self) -> usize {
        self.common_rate() + 1 + 2 * self.groups
    }

    /// Slack on the common-rate threshold (elastic variant only).
    pub fn threshold_slack(&self) -> Option<usize> {
        self.has_slack.then(|| self.mmf_rate() + 1)
    }

    pub fn num_vars(&self) -> usize {
        self.mmf_rate() + 1 + usize::from(self.has_slack)
    }
}

/// Assembled per-iteration problem.
#[derive(Debug, Clone)]
pub struct ConicSubproblem {
    pub program: ConeProgram,
    pub vars: VarLayout,
    scheme: crate::model::Scheme,
    alpha: f64,
    tx_budget: f64,
    common_threshold: f64,
    mode: Mode,
    constraints: usize,
}

impl ConicSubproblem {
    /// Number of logical constraints: one per user and stream, two per group,
    /// the threshold, the power budget and, without rate-splitting, one pin
    /// per group.
    pub fn constraint_count(&self) -> usize {
        self.constraints
    }

    /// Number of scalar rate variables (`R_c`, `R_{c,k}`, `R_k`, `R_g`).
    pub fn rate_var_count(&self) -> usize {
        self.vars.mmf_rate() + 1 - self.vars.precoder_vars()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Encodes a precoder and a rate allocation as a decision vector.
    pub fn point(&self, precoder: &PrecoderSet, rates: &RateAllocation) -> Vec<f64> {
        let v = &self.vars;
        let mut x = alloc::vec![0.0; v.num_vars()];
        for (col, column) in precoder.columns().enumerate() {
            for (i, z) in column.iter().enumerate() {
                x[v.entry(col, i)] = z.re;
                x[v.entry(col, i) + 1] = z.im;
            }
        }
        x[v.common_rate()] = rates.common_rate;
        for k in 0..v.groups {
            x[v.group_common_rate(k)] = rates.group_common_rates[k];
            x[v.group_private_rate(k)] = rates.group_private_rates[k];
        }
        x[v.mmf_rate()] = rates.mmf_rate;
        x
    }

    /// Decodes a decision vector.
    pub fn decode(&self, x: &[f64]) -> Result<(PrecoderSet, RateAllocation)> {
        let v = &self.vars;
        let column = |col: usize| -> Vec<C64> {
            (0..v.antennas)
                .map(|i| C64::new(x[v.entry(col, i)], x[v.entry(col, i) + 1]))
                .collect()
        };
        let common = v.has_common.then(|| column(0));
        let private = (0..v.groups).map(|k| column(v.private_col(k))).collect();
        let precoder = PrecoderSet::new(self.scheme, self.alpha, common, private, self.tx_budget)?;
        let rates = RateAllocation {
            common_rate: x[v.common_rate()],
            group_common_rates: (0..v.groups).map(|k| x[v.group_common_rate(k)]).collect(),
            group_private_rates: (0..v.groups).map(|k| x[v.group_private_rate(k)]).collect(),
            mmf_rate: x[v.mmf_rate()],
        };
        Ok((precoder, rates))
    }
}

/// Solver output for one AO step.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub precoder: PrecoderSet,
    /// Rate variables as returned by the solver (WMSE surrogate rates).
    pub rates: RateAllocation,
    /// Optimal `R_g` for the fixed receivers and weights.
    pub objective: f64,
    /// Shortfall below the common-rate threshold; always 0 unless elastic.
    pub threshold_slack: f64,
}

/// `Re` and `Im` of `g^T p_col` as affine expressions of the lifted vector.
fn complex_form(vars: &VarLayout, g: &[C64], col: usize) -> (AffineExpr, AffineExpr) {
    let mut re = AffineExpr::default();
    let mut im = AffineExpr::default();
    for (i, gi) in g.iter().enumerate() {
        let x = vars.entry(col, i);
        re.add_term(x, gi.re).add_term(x + 1, -gi.im);
        im.add_term(x, gi.im).add_term(x + 1, gi.re);
    }
    (re, im)
}

/// Matrix columns summed into the effective super-common beam `p_A`.
fn aggregate_cols(vars: &VarLayout, scheme: crate::model::Scheme) -> Vec<usize> {
    use crate::model::Scheme;
    match scheme {
        Scheme::Sc => (0..vars.groups).map(|k| vars.private_col(k)).collect(),
        Scheme::Cc => alloc::vec![0],
        Scheme::Mc => (0..vars.columns()).collect(),
    }
}

fn sum_forms(vars: &VarLayout, g: &[C64], cols: &[usize]) -> (AffineExpr, AffineExpr) {
    cols.iter().fold((AffineExpr::default(), AffineExpr::default()), |(re, im), &col| {
        let (r, i) = complex_form(vars, g, col);
        (re.plus(&r), im.plus(&i))
    })
}

/// Rotated cone `||u||^2 <= t` as the second-order cone `(t+1, t-1, 2u)`.
fn rotated(t: AffineExpr, u: Vec<AffineExpr>) -> Vec<AffineExpr> {
    let mut rows = Vec::with_capacity(u.len() + 2);
    rows.push(t.clone().plus(&AffineExpr::constant(1.0)));
    rows.push(t.plus(&AffineExpr::constant(-1.0)));
    rows.extend(u.into_iter().map(|e| e.scaled(2.0)));
    rows
}

/// Builds the conic form of the WMSE precoder update.
pub fn assemble(problem: &MmfProblem<'_>, alpha: f64, rx: &ReceiverState) -> Result<ConicSubproblem> {
    build(problem, alpha, rx, None)
}

/// Like [`assemble`], but the common-rate threshold may be missed by a slack
/// `s >= 0` that costs `penalty * s` in the objective. Always feasible.
pub fn assemble_elastic(
    problem: &MmfProblem<'_>,
    alpha: f64,
    rx: &ReceiverState,
    penalty: f64,
) -> Result<ConicSubproblem> {
    if !(penalty > 0.0) {
        return Err(Error::InvalidParameter("slack penalty must be positive"));
    }
    build(problem, alpha, rx, Some(penalty))
}

fn build(problem: &MmfProblem<'_>, alpha: f64, rx: &ReceiverState, penalty: Option<f64>) -> Result<ConicSubproblem> {
    problem.validate()?;
    let coef = crate::model::scheme_coefficients(problem.scheme, alpha)?;
    let layout = problem.layout;
    let ch = problem.channel;
    let n_users = layout.num_users();
    if rx.num_users() != n_users
        || rx.private_eq.len() != n_users
        || rx.common_weight.len() != n_users
        || rx.private_weight.len() != n_users
    {
        return Err(Error::DimensionMismatch("receiver state and layout user counts differ"));
    }
    if rx.common_weight.iter().chain(&rx.private_weight).any(|&w| !(w > 0.0)) {
        return Err(Error::NonPositiveWeight);
    }

    let vars = VarLayout {
        antennas: ch.num_antennas(),
        groups: layout.num_groups(),
        has_common: problem.scheme.has_common_column(),
        has_slack: penalty.is_some(),
    };
    let mut program = ConeProgram {
        var_names: Vec::with_capacity(vars.num_vars()),
        objective: alloc::vec![0.0; vars.num_vars()],
        blocks: Vec::new(),
    };
    for col in 0..vars.columns() {
        let name = match (vars.has_common, col) {
            (true, 0) => format!("p0"),
            _ => format!("p{}", col + usize::from(!vars.has_common)),
        };
        for i in 0..vars.antennas {
            program.var_names.push(format!("re({name}[{i}])"));
            program.var_names.push(format!("im({name}[{i}])"));
        }
    }
    program.var_names.push("Rc".into());
    program.var_names.extend((1..=vars.groups).map(|k| format!("Rc{k}")));
    program.var_names.extend((1..=vars.groups).map(|k| format!("R{k}")));
    program.var_names.push("Rg".into());
    program.objective[vars.mmf_rate()] = -1.0;
    if let (Some(j), Some(penalty)) = (vars.threshold_slack(), penalty) {
        program.var_names.push("slack".into());
        program.objective[j] = penalty;
    }

    let agg_cols = aggregate_cols(&vars, problem.scheme);
    let sqrt_b = libm::sqrt(coef.common);
    let sqrt_c = libm::sqrt(coef.private);

    for n in 0..n_users {
        let h = ch.user(n);
        let own = layout.group_of(n);

        // Super-common stream.
        let w_eq = rx.common_eq[n];
        let w = rx.common_weight[n];
        let g: Vec<C64> = h.iter().map(|hi| w_eq * hi.conj()).collect();
        let sw = libm::sqrt(w);
        let mut u = Vec::with_capacity(2 * (vars.groups + 1));
        let (re, im) = sum_forms(&vars, &g, &agg_cols);
        u.push(re.plus(&AffineExpr::constant(-1.0)).scaled(sw * sqrt_b));
        u.push(im.scaled(sw * sqrt_b));
        for k in 0..vars.groups {
            let (re, im) = complex_form(&vars, &g, vars.private_col(k));
            u.push(re.scaled(sw * sqrt_c));
            u.push(im.scaled(sw * sqrt_c));
        }
        let mut t = AffineExpr::constant(1.0 + libm::log(coef.common * w) - w * w_eq.norm_sqr());
        t.add_term(vars.common_rate(), -LN_2);
        for k in 0..vars.groups {
            t.add_term(vars.group_common_rate(k), -LN_2);
        }
        program.push(ConeKind::SecondOrder, format!("common_wmse[{n}]"), rotated(t, u));

        // Private stream after SIC.
        let v_eq = rx.private_eq[n];
        let v = rx.private_weight[n];
        let g: Vec<C64> = h.iter().map(|hi| v_eq * hi.conj()).collect();
        let sv = libm::sqrt(v) * sqrt_c;
        let mut u = Vec::with_capacity(2 * vars.groups);
        for k in 0..vars.groups {
            let (re, im) = complex_form(&vars, &g, vars.private_col(k));
            let re = if k == own { re.plus(&AffineExpr::constant(-1.0)) } else { re };
            u.push(re.scaled(sv));
            u.push(im.scaled(sv));
        }
        let mut t = AffineExpr::constant(1.0 + libm::log(coef.private * v) - v * v_eq.norm_sqr());
        t.add_term(vars.group_private_rate(own), -LN_2);
        program.push(ConeKind::SecondOrder, format!("private_wmse[{n}]"), rotated(t, u));
    }

    // R_g <= R_{c,k} + R_k
    let mmf_rows = (0..vars.groups)
        .map(|k| {
            let mut e = AffineExpr::default();
            e.add_term(vars.group_common_rate(k), 1.0)
                .add_term(vars.group_private_rate(k), 1.0)
                .add_term(vars.mmf_rate(), -1.0);
            e
        })
        .collect();
    program.push(ConeKind::Nonnegative, "mmf", mmf_rows);
    program.push(
        ConeKind::Nonnegative,
        "group_common_nonneg",
        (0..vars.groups).map(|k| AffineExpr::var(vars.group_common_rate(k), 1.0)).collect(),
    );
    let mut threshold = AffineExpr::var(vars.common_rate(), 1.0);
    threshold.constant = -problem.common_threshold;
    if let Some(j) = vars.threshold_slack() {
        threshold.add_term(j, 1.0);
        program.push(ConeKind::Nonnegative, "slack_nonneg", alloc::vec![AffineExpr::var(j, 1.0)]);
    }
    program.push(ConeKind::Nonnegative, "common_threshold", alloc::vec![threshold]);

    if problem.tx_budget > 0.0 {
        let mut rows = Vec::with_capacity(1 + 2 * vars.antennas * (vars.groups + 1));
        rows.push(AffineExpr::constant(libm::sqrt(problem.tx_budget)));
        for i in 0..vars.antennas {
            let mut re = AffineExpr::default();
            let mut im = AffineExpr::default();
            for &col in &agg_cols {
                re.add_term(vars.entry(col, i), sqrt_b);
                im.add_term(vars.entry(col, i) + 1, sqrt_b);
            }
            rows.push(re);
            rows.push(im);
        }
        for k in 0..vars.groups {
            for i in 0..vars.antennas {
                let x = vars.entry(vars.private_col(k), i);
                rows.push(AffineExpr::var(x, sqrt_c));
                rows.push(AffineExpr::var(x + 1, sqrt_c));
            }
        }
        program.push(ConeKind::SecondOrder, "power", rows);
    } else {
        program.push(
            ConeKind::Zero,
            "power",
            (0..vars.precoder_vars()).map(|j| AffineExpr::var(j, 1.0)).collect(),
        );
    }

    let mut constraints = 2 * n_users + 2 * vars.groups + 2;
    if problem.mode == Mode::NoRs {
        program.push(
            ConeKind::Zero,
            "no_split",
            (0..vars.groups).map(|k| AffineExpr::var(vars.group_common_rate(k), 1.0)).collect(),
        );
        constraints += vars.groups;
    }

    Ok(ConicSubproblem {
        program,
        vars,
        scheme: problem.scheme,
        alpha,
        tx_budget: problem.tx_budget,
        common_threshold: problem.common_threshold,
        mode: problem.mode,
        constraints,
    })
}

/// Lowers `R_c` to the threshold when the solver left it above, handing the
/// freed pool to the groups with RS. Every user constraint keeps the same
/// left-hand side, so the point stays feasible and `R_g` can only grow.
fn settle_common_rate(sp: &ConicSubproblem, rates: &mut RateAllocation) {
    let surplus = rates.common_rate - sp.common_threshold;
    if surplus <= 0.0 {
        return;
    }
    rates.common_rate = sp.common_threshold;
    if sp.mode == Mode::Rs {
        let base: Vec<f64> = rates
            .group_common_rates
            .iter()
            .zip(&rates.group_private_rates)
            .map(|(c, p)| c + p)
            .collect();
        for (c, extra) in rates.group_common_rates.iter_mut().zip(metrics::fill_common_surplus(&base, surplus)) {
            *c += extra;
        }
    }
    let rg = rates
        .group_common_rates
        .iter()
        .zip(&rates.group_private_rates)
        .map(|(c, p)| c + p)
        .fold(f64::INFINITY, f64::min);
    rates.mmf_rate = rates.mmf_rate.max(rg);
}

/// Solves an assembled subproblem with `solver`.
///
/// The returned precoder is scaled back onto the power budget if the solver
/// overshoots it by its feasibility tolerance.
pub fn solve<S: ConeSolver + ?Sized>(sp: &ConicSubproblem, solver: &S) -> Result<SubproblemSolution> {
    let sol = solver.solve(&sp.program);
    match sol.status {
        ConeStatus::Optimal => {}
        ConeStatus::Infeasible => return Err(Error::Infeasible),
        ConeStatus::NumericalTrouble => return Err(Error::NumericalTrouble),
    }
    if sol.x.len() != sp.vars.num_vars() || sol.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalTrouble);
    }
    let (mut precoder, mut rates) = sp.decode(&sol.x)?;
    let power = precoder.transmit_power();
    if power > sp.tx_budget {
        precoder = precoder.scaled(libm::sqrt(sp.tx_budget / power));
    }
    settle_common_rate(sp, &mut rates);
    Ok(SubproblemSolution {
        objective: rates.mmf_rate,
        threshold_slack: sp.vars.threshold_slack().map_or(0.0, |j| sol.x[j].max(0.0)),
        precoder,
        rates,
    })
}
