//! Sparse second-order-cone programs.
//!
//! A program minimizes `c^T x` subject to a list of blocks, each block being
//! a list of affine expressions of `x` that must lie jointly in a cone:
//!
//! - `Zero`: every expression equals zero,
//! - `Nonnegative`: every expression is `>= 0`,
//! - `SecondOrder`: `e_0 >= ||(e_1, .., e_d)||_2`.
//!
//! The `Display` impl renders the plain-text dump format:
//!
//! ```text
//! # cone program
//! vars <n>
//! var <index> <name>
//! objective <index> <coef>          (one line per nonzero, minimized)
//! block <index> <kind> <dim> <label>
//! row <block> <row> const <value>
//! row <block> <row> <var> <coef>    (one line per nonzero)
//! end
//! ```
//!
//! `kind` is one of `zero`, `nonneg`, `soc`. Numbers are printed with 17
//! significant digits so a dump round-trips exactly.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// `sum_j coef_j x_j + constant`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn var(index: usize, coef: f64) -> Self {
        Self {
            terms: alloc::vec![(index, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, index: usize, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((index, coef));
        }
        self
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for (_, c) in &mut self.terms {
            *c *= factor;
        }
        self.constant *= factor;
        self
    }

    pub fn plus(mut self, other: &AffineExpr) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, c)| c * x[j]).sum::<f64>() + self.constant
    }

    /// Merges duplicate variable indices and drops zero coefficients.
    pub fn compact(mut self) -> Self {
        self.terms.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (j, c) in self.terms {
            match merged.last_mut() {
                Some((last, acc)) if *last == j => *acc += c,
                _ => merged.push((j, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        self.terms = merged;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    Zero,
    Nonnegative,
    SecondOrder,
}

impl ConeKind {
    fn as_str(self) -> &'static str {
        match self {
            ConeKind::Zero => "zero",
            ConeKind::Nonnegative => "nonneg",
            ConeKind::SecondOrder => "soc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeBlock {
    pub kind: ConeKind,
    pub rows: Vec<AffineExpr>,
    pub label: String,
}

impl ConeBlock {
    /// How far the block is from its cone at `x` (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let values = self.rows.iter().map(|r| r.eval(x));
        match self.kind {
            ConeKind::Zero => values.map(f64::abs).fold(0.0, f64::max),
            ConeKind::Nonnegative => values.map(|v| (-v).max(0.0)).fold(0.0, f64::max),
            ConeKind::SecondOrder => {
                let mut values = values;
                let head = values.next().unwrap_or(0.0);
                let tail = libm::sqrt(values.map(|v| v * v).sum::<f64>());
                (tail - head).max(0.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConeProgram {
    pub var_names: Vec<String>,
    /// Minimized.
    pub objective: Vec<f64>,
    pub blocks: Vec<ConeBlock>,
}

impl ConeProgram {
    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn num_rows(&self) -> usize {
        self.blocks.iter().map(|b| b.rows.len()).sum()
    }

    pub fn push(&mut self, kind: ConeKind, label: impl Into<String>, rows: Vec<AffineExpr>) {
        self.blocks.push(ConeBlock {
            kind,
            rows: rows.into_iter().map(AffineExpr::compact).collect(),
            label: label.into(),
        });
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest cone violation over all blocks.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.blocks.iter().map(|b| b.violation(x)).fold(0.0, f64::max)
    }
}

impl fmt::Display for ConeProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# cone program")?;
        writeln!(f, "vars {}", self.num_vars())?;
        for (j, name) in self.var_names.iter().enumerate() {
            writeln!(f, "var {j} {name}")?;
        }
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                writeln!(f, "objective {j} {c:.16e}")?;
            }
        }
        for (b, block) in self.blocks.iter().enumerate() {
            writeln!(f, "block {b} {} {} {}", block.kind.as_str(), block.rows.len(), block.label)?;
            for (r, row) in block.rows.iter().enumerate() {
                writeln!(f, "row {b} {r} const {:.16e}", row.constant)?;
                for &(j, c) in &row.terms {
                    writeln!(f, "row {b} {r} {j} {c:.16e}")?;
                }
            }
        }
        writeln!(f, "end")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeStatus {
    Optimal,
    Infeasible,
    NumericalTrouble,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeSolution {
    pub status: ConeStatus,
    pub x: Vec<f64>,
}

/// A backend able to solve [`ConeProgram`]s.
pub trait ConeSolver {
    fn solve(&self, program: &ConeProgram) -> ConeSolution;
}

impl<S: ConeSolver + ?Sized> ConeSolver for &S {
    fn solve(&self, program: &ConeProgram) -> ConeSolution {
        (**self).solve(program)
    }
}
