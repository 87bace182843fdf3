//! Clarabel backend for [`ConeProgram`]s.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use rsmulticast_core::cone::{ConeKind, ConeProgram, ConeSolution, ConeSolver, ConeStatus};

/// Interior-point SOCP solver with tolerances one order below the 1e-6
/// test tolerances.
#[derive(Debug, Clone)]
pub struct ClarabelSolver {
    settings: DefaultSettings<f64>,
}

impl Default for ClarabelSolver {
    fn default() -> Self {
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(200)
            .tol_gap_abs(1e-9)
            .tol_gap_rel(1e-7)
            .tol_feas(1e-8)
            .build()
            .expect("static settings are valid");
        Self { settings }
    }
}

impl ClarabelSolver {
    pub fn with_settings(settings: DefaultSettings<f64>) -> Self {
        Self { settings }
    }
}

/// `A` in compressed-column form plus `b` and the cone list, using
/// `s = b - A x`: each affine row `a^T x + c` becomes `A_row = -a`, `b = c`.
fn lower(program: &ConeProgram) -> (CscMatrix<f64>, Vec<f64>, Vec<SupportedConeT<f64>>) {
    let m = program.num_rows();
    let n = program.num_vars();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut b = Vec::with_capacity(m);
    let mut cones = Vec::with_capacity(program.blocks.len());
    let mut row = 0;
    for block in &program.blocks {
        for expr in &block.rows {
            for &(j, c) in &expr.terms {
                triplets.push((row, j, -c));
            }
            b.push(expr.constant);
            row += 1;
        }
        let dim = block.rows.len();
        cones.push(match block.kind {
            ConeKind::Zero => SupportedConeT::ZeroConeT(dim),
            ConeKind::Nonnegative => SupportedConeT::NonnegativeConeT(dim),
            ConeKind::SecondOrder => SupportedConeT::SecondOrderConeT(dim),
        });
    }
    triplets.sort_by_key(|&(r, c, _)| (c, r));
    let mut colptr = vec![0usize; n + 1];
    let mut rowval = Vec::with_capacity(triplets.len());
    let mut nzval = Vec::with_capacity(triplets.len());
    for &(r, c, v) in &triplets {
        colptr[c + 1] += 1;
        rowval.push(r);
        nzval.push(v);
    }
    for j in 0..n {
        colptr[j + 1] += colptr[j];
    }
    (CscMatrix::new(m, n, colptr, rowval, nzval), b, cones)
}

impl ConeSolver for ClarabelSolver {
    fn solve(&self, program: &ConeProgram) -> ConeSolution {
        let n = program.num_vars();
        let (a, b, cones) = lower(program);
        let p = CscMatrix::<f64>::zeros((n, n));
        let mut solver = match DefaultSolver::new(&p, &program.objective, &a, &b, &cones, self.settings.clone()) {
            Ok(s) => s,
            Err(_) => {
                return ConeSolution {
                    status: ConeStatus::NumericalTrouble,
                    x: Vec::new(),
                }
            }
        };
        solver.solve();
        let status = match solver.solution.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => ConeStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => ConeStatus::Infeasible,
            _ => ConeStatus::NumericalTrouble,
        };
        ConeSolution {
            status,
            x: solver.solution.x.clone(),
        }
    }
}
