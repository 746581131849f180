//! Exact rational linear programming.
//!
//! A dense two-phase tableau simplex over [`Rational`]. Pricing starts with
//! Dantzig's rule and switches permanently to Bland's rule after a streak of
//! degenerate pivots, so the method terminates. Optimal answers are basic
//! solutions (vertices) and carry exact duals; infeasible answers carry a Farkas
//! certificate that can be re-checked with [`FarkasCertificate::verify`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug)]
pub struct Variable {
    pub name: String,
    pub lower: Option<Rational>,
    pub upper: Option<Rational>,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, Rational)>,
    pub sense: Sense,
    pub rhs: Rational,
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub direction: Direction,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<Rational>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum LpError {
    #[error("constraint `{constraint}` references undeclared variable {var}")]
    UnknownVariable { constraint: String, var: usize },
    #[error("variable `{0}` has lower bound above upper bound")]
    InvertedBounds(String),
    #[error("pivot limit of {0} reached")]
    PivotLimit(usize),
    #[error("internal simplex inconsistency: {0}")]
    Internal(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Multipliers combining the constraints (each read in `<=` form) and variable
/// bounds into the contradiction `0 <= rhs` with `rhs < 0`.
///
/// `row_multipliers[k]` multiplies constraint `k` written as `a x <= b` (a `>=`
/// row is negated first); it is nonnegative except on equality rows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FarkasCertificate {
    pub row_multipliers: Vec<Rational>,
    pub lower_bound_multipliers: Vec<Rational>,
    pub upper_bound_multipliers: Vec<Rational>,
    pub combined_rhs: Rational,
}

#[derive(Clone, Debug)]
pub struct LpResult {
    pub status: LpStatus,
    pub primal: Vec<Rational>,
    pub objective: Rational,
    /// One dual per constraint, with `c = A^T duals + reduced_costs`.
    pub duals: Vec<Rational>,
    pub reduced_costs: Vec<Rational>,
    pub certificate: Option<FarkasCertificate>,
    pub extreme_point: bool,
    pub pivots: usize,
}

#[derive(Clone, Debug)]
pub enum Feasibility {
    Feasible(Vec<Rational>),
    Infeasible(FarkasCertificate),
}

impl LinearProgram {
    pub fn new(direction: Direction) -> Self {
        LinearProgram { direction, variables: Vec::new(), constraints: Vec::new(), objective: Vec::new() }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: Option<Rational>, upper: Option<Rational>) -> usize {
        self.variables.push(Variable { name: name.into(), lower, upper });
        self.objective.push(Rational::zero());
        self.variables.len() - 1
    }

    /// Shorthand for a variable with `0 <= v`.
    pub fn add_nonneg(&mut self, name: impl Into<String>) -> usize {
        self.add_var(name, Some(Rational::zero()), None)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, Rational)>,
        sense: Sense,
        rhs: Rational,
    ) -> usize {
        self.constraints.push(Constraint { name: name.into(), terms, sense, rhs });
        self.constraints.len() - 1
    }

    pub fn set_objective_coef(&mut self, var: usize, coef: Rational) {
        self.objective[var] = coef;
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    fn validate(&self) -> Result<(), LpError> {
        for v in &self.variables {
            if let (Some(l), Some(u)) = (&v.lower, &v.upper) {
                if l > u {
                    return Err(LpError::InvertedBounds(v.name.clone()));
                }
            }
        }
        for c in &self.constraints {
            if let Some(&(var, _)) = c.terms.iter().find(|(v, _)| *v >= self.variables.len()) {
                return Err(LpError::UnknownVariable { constraint: c.name.clone(), var });
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[Rational]) -> Rational {
        self.objective.iter().zip(x).filter(|(c, _)| !c.is_zero()).map(|(c, v)| c * v).sum()
    }

    /// Exact feasibility check of a point against every row and bound.
    pub fn is_feasible_point(&self, x: &[Rational]) -> bool {
        if x.len() != self.variables.len() {
            return false;
        }
        let bounds_ok = self
            .variables
            .iter()
            .zip(x)
            .all(|(v, val)| v.lower.as_ref().is_none_or(|l| val >= l) && v.upper.as_ref().is_none_or(|u| val <= u));
        bounds_ok
            && self.constraints.iter().all(|c| {
                let lhs: Rational = c.terms.iter().map(|(v, a)| a * &x[*v]).sum();
                match c.sense {
                    Sense::Le => lhs <= c.rhs,
                    Sense::Ge => lhs >= c.rhs,
                    Sense::Eq => lhs == c.rhs,
                }
            })
    }

    /// Renders the program in CPLEX LP text format for cross-checking with
    /// external solvers. Coefficients are written as decimals; the exact value of
    /// every non-integral coefficient is kept in a trailing comment.
    pub fn to_lp_format(&self) -> String {
        fn term(out: &mut String, first: bool, coef: &Rational, name: &str) {
            let sign = if coef.is_negative() {
                "-"
            } else if first {
                ""
            } else {
                "+"
            };
            let mag = coef.abs();
            if mag.is_integer() {
                let _ = write!(out, " {sign} {mag} {name}");
            } else {
                let _ = write!(out, " {sign} {} {name}", mag.to_decimal_string(17));
            }
        }
        let mut out = String::new();
        out.push_str(match self.direction {
            Direction::Minimize => "Minimize\n obj:",
            Direction::Maximize => "Maximize\n obj:",
        });
        let mut first = true;
        for (i, c) in self.objective.iter().enumerate() {
            if !c.is_zero() {
                term(&mut out, first, c, &self.variables[i].name);
                first = false;
            }
        }
        if first {
            out.push_str(" 0");
        }
        out.push_str("\nSubject To\n");
        for (k, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, " c{k}:");
            let mut first = true;
            for (v, a) in &c.terms {
                term(&mut out, first, a, &self.variables[*v].name);
                first = false;
            }
            if first {
                out.push_str(" 0 x_dummy");
            }
            let op = match c.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, " {op} {} \\ {} rhs={}", c.rhs.to_decimal_string(17), c.name, c.rhs);
        }
        out.push_str("Bounds\n");
        for v in &self.variables {
            match (&v.lower, &v.upper) {
                (Some(l), Some(u)) => {
                    let _ = writeln!(out, " {} <= {} <= {}", l.to_decimal_string(17), v.name, u.to_decimal_string(17));
                }
                (Some(l), None) => {
                    let _ = writeln!(out, " {} >= {}", v.name, l.to_decimal_string(17));
                }
                (None, Some(u)) => {
                    let _ = writeln!(out, " -inf <= {} <= {}", v.name, u.to_decimal_string(17));
                }
                (None, None) => {
                    let _ = writeln!(out, " {} free", v.name);
                }
            }
        }
        out.push_str("End\n");
        out
    }
}

impl FarkasCertificate {
    /// Recomputes the combination from scratch and checks it is a contradiction.
    pub fn verify(&self, lp: &LinearProgram) -> bool {
        if self.row_multipliers.len() != lp.constraints.len()
            || self.lower_bound_multipliers.len() != lp.variables.len()
            || self.upper_bound_multipliers.len() != lp.variables.len()
        {
            return false;
        }
        let mut coef = vec![Rational::zero(); lp.variables.len()];
        let mut rhs = Rational::zero();
        for (c, lam) in lp.constraints.iter().zip(&self.row_multipliers) {
            if lam.is_zero() {
                continue;
            }
            let flip = match c.sense {
                Sense::Le => false,
                Sense::Ge => true,
                Sense::Eq => false,
            };
            if c.sense != Sense::Eq && lam.is_negative() {
                return false;
            }
            let m = if flip { -lam } else { lam.clone() };
            for (v, a) in &c.terms {
                coef[*v] += &m * a;
            }
            rhs += &m * &c.rhs;
        }
        for (v, var) in lp.variables.iter().enumerate() {
            let ml = &self.lower_bound_multipliers[v];
            let mu = &self.upper_bound_multipliers[v];
            if ml.is_negative() || mu.is_negative() {
                return false;
            }
            if !ml.is_zero() {
                let Some(l) = &var.lower else { return false };
                coef[v] -= ml;
                rhs -= ml * l;
            }
            if !mu.is_zero() {
                let Some(u) = &var.upper else { return false };
                coef[v] += mu;
                rhs += mu * u;
            }
        }
        coef.iter().all(Rational::is_zero) && rhs.is_negative() && rhs == self.combined_rhs
    }
}

impl LpResult {
    /// `b^T y` plus the bound terms priced by the reduced costs.
    pub fn dual_objective(&self, lp: &LinearProgram) -> Option<Rational> {
        let mut total: Rational = lp.constraints.iter().zip(&self.duals).map(|(c, y)| &c.rhs * y).sum();
        for (v, d) in lp.variables.iter().zip(&self.reduced_costs) {
            if d.is_zero() {
                continue;
            }
            let at_lower = match lp.direction {
                Direction::Minimize => d.is_positive(),
                Direction::Maximize => d.is_negative(),
            };
            let bound = if at_lower { v.lower.as_ref()? } else { v.upper.as_ref()? };
            total += d * bound;
        }
        Some(total)
    }

    /// Sign conditions of the dual of `lp` at `(duals, reduced_costs)`.
    pub fn is_dual_feasible(&self, lp: &LinearProgram) -> bool {
        let min = lp.direction == Direction::Minimize;
        let rows_ok = lp.constraints.iter().zip(&self.duals).all(|(c, y)| match c.sense {
            Sense::Eq => true,
            Sense::Ge => {
                if min {
                    !y.is_negative()
                } else {
                    !y.is_positive()
                }
            }
            Sense::Le => {
                if min {
                    !y.is_positive()
                } else {
                    !y.is_negative()
                }
            }
        });
        let cols_ok = lp.variables.iter().zip(&self.reduced_costs).all(|(v, d)| {
            if d.is_zero() {
                return true;
            }
            let needs_lower = d.is_positive() == min;
            if needs_lower {
                v.lower.is_some()
            } else {
                v.upper.is_some()
            }
        });
        let stationary = (0..lp.variables.len()).all(|v| {
            let ay: Rational = lp
                .constraints
                .iter()
                .zip(&self.duals)
                .flat_map(|(c, y)| c.terms.iter().filter(move |(u, _)| *u == v).map(move |(_, a)| a * y))
                .sum();
            ay + &self.reduced_costs[v] == lp.objective[v]
        });
        rows_ok && cols_ok && stationary
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RowOrigin {
    Constraint(usize),
    Bound(usize),
}

#[derive(Clone, Debug)]
struct StdRow {
    origin: RowOrigin,
    negated: bool,
    identity_col: usize,
}

struct VarMap {
    shift: Rational,
    cols: Vec<(usize, bool)>,
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    obj: Vec<Rational>,
    basis: Vec<usize>,
    ncols: usize,
    entering_allowed: usize,
    bland: bool,
    degenerate_streak: usize,
    pivots: usize,
    pivot_limit: usize,
}

const DEGENERATE_STREAK_LIMIT: usize = 32;

impl Tableau {
    fn rhs(&self, r: usize) -> &Rational {
        &self.rows[r][self.ncols]
    }

    fn reset_objective(&mut self, cost: &[Rational]) {
        let mut obj: Vec<Rational> = cost.to_vec();
        obj.push(Rational::zero());
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for (c, val) in self.rows[r].iter().enumerate() {
                if !val.is_zero() {
                    obj[c] -= cb * val;
                }
            }
        }
        self.obj = obj;
    }

    fn pivot(&mut self, p: usize, q: usize) {
        self.pivots += 1;
        let piv = self.rows[p][q].clone();
        let inv = piv.recip();
        let mut nz: Vec<(usize, Rational)> = Vec::new();
        for (c, val) in self.rows[p].iter_mut().enumerate() {
            if !val.is_zero() {
                *val *= &inv;
                nz.push((c, val.clone()));
            }
        }
        for (r, row) in self.rows.iter_mut().enumerate() {
            if r == p || row[q].is_zero() {
                continue;
            }
            let f = row[q].clone();
            for (c, v) in &nz {
                row[*c] -= &f * v;
            }
        }
        if !self.obj[q].is_zero() {
            let f = self.obj[q].clone();
            for (c, v) in &nz {
                self.obj[*c] -= &f * v;
            }
        }
        self.basis[p] = q;
    }

    /// Runs primal simplex on the current objective row. `Ok(false)` means unbounded.
    fn optimize(&mut self) -> Result<bool, LpError> {
        loop {
            if self.pivots >= self.pivot_limit {
                return Err(LpError::PivotLimit(self.pivot_limit));
            }
            let entering = if self.bland {
                (0..self.entering_allowed).find(|&c| self.obj[c].is_negative())
            } else {
                let mut best: Option<usize> = None;
                for c in 0..self.entering_allowed {
                    if self.obj[c].is_negative() && best.is_none_or(|b| self.obj[c] < self.obj[b]) {
                        best = Some(c);
                    }
                }
                best
            };
            let Some(q) = entering else { return Ok(true) };
            let mut leave: Option<(usize, Rational)> = None;
            for r in 0..self.rows.len() {
                let a = &self.rows[r][q];
                if !a.is_positive() {
                    continue;
                }
                let ratio = self.rhs(r) / a;
                let better = match &leave {
                    None => true,
                    Some((lr, lratio)) => ratio < *lratio || (ratio == *lratio && self.basis[r] < self.basis[*lr]),
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
            let Some((p, ratio)) = leave else { return Ok(false) };
            if ratio.is_zero() {
                self.degenerate_streak += 1;
                if self.degenerate_streak > DEGENERATE_STREAK_LIMIT {
                    self.bland = true;
                }
            } else {
                self.degenerate_streak = 0;
            }
            self.pivot(p, q);
        }
    }
}

/// Options for the simplex driver.
#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub pivot_limit: usize,
    /// Price with Bland's rule from the first pivot.
    pub bland_only: bool,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { pivot_limit: 2_000_000, bland_only: false }
    }
}

struct StandardForm {
    maps: Vec<VarMap>,
    rows: Vec<StdRow>,
    tableau: Tableau,
    n_struct: usize,
    art_start: usize,
}

fn standard_form(lp: &LinearProgram, opts: SimplexOptions) -> Result<StandardForm, LpError> {
    lp.validate()?;
    let mut maps = Vec::with_capacity(lp.variables.len());
    let mut n_struct = 0;
    let mut bound_rows: Vec<(usize, usize, Rational)> = Vec::new();
    for (v, var) in lp.variables.iter().enumerate() {
        let map = match (&var.lower, &var.upper) {
            (Some(l), upper) => {
                let col = n_struct;
                n_struct += 1;
                if let Some(u) = upper {
                    bound_rows.push((v, col, u - l));
                }
                VarMap { shift: l.clone(), cols: vec![(col, false)] }
            }
            (None, Some(u)) => {
                let col = n_struct;
                n_struct += 1;
                VarMap { shift: u.clone(), cols: vec![(col, true)] }
            }
            (None, None) => {
                let col = n_struct;
                n_struct += 2;
                VarMap { shift: Rational::zero(), cols: vec![(col, false), (col + 1, true)] }
            }
        };
        maps.push(map);
    }

    // (origin, dense coefficients over structural columns, sense, rhs, negated)
    let mut raw: Vec<(RowOrigin, Vec<Rational>, Sense, Rational, bool)> = Vec::new();
    for (k, c) in lp.constraints.iter().enumerate() {
        let mut coefs = vec![Rational::zero(); n_struct];
        let mut rhs = c.rhs.clone();
        for (v, a) in &c.terms {
            let m = &maps[*v];
            if !m.shift.is_zero() {
                rhs -= a * &m.shift;
            }
            for &(col, neg) in &m.cols {
                if neg {
                    coefs[col] -= a;
                } else {
                    coefs[col] += a;
                }
            }
        }
        raw.push((RowOrigin::Constraint(k), coefs, c.sense, rhs, false));
    }
    for (v, col, width) in bound_rows {
        let mut coefs = vec![Rational::zero(); n_struct];
        coefs[col] = Rational::one();
        raw.push((RowOrigin::Bound(v), coefs, Sense::Le, width, false));
    }
    for row in raw.iter_mut() {
        let flip = row.3.is_negative() || (row.3.is_zero() && row.2 == Sense::Ge);
        if flip {
            for a in row.1.iter_mut() {
                if !a.is_zero() {
                    *a = -&*a;
                }
            }
            row.3 = -&row.3;
            row.2 = match row.2 {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
            row.4 = true;
        }
    }

    let n_slack = raw.iter().filter(|r| r.2 != Sense::Eq).count();
    let n_art = raw.iter().filter(|r| r.2 != Sense::Le).count();
    let slack_start = n_struct;
    let art_start = n_struct + n_slack;
    let ncols = art_start + n_art;

    let mut rows = Vec::with_capacity(raw.len());
    let mut std_rows = Vec::with_capacity(raw.len());
    let mut basis = Vec::with_capacity(raw.len());
    let (mut next_slack, mut next_art) = (slack_start, art_start);
    for (origin, coefs, sense, rhs, negated) in raw {
        let mut row = coefs;
        row.resize(ncols + 1, Rational::zero());
        row[ncols] = rhs;
        let identity_col = match sense {
            Sense::Le => {
                row[next_slack] = Rational::one();
                next_slack += 1;
                next_slack - 1
            }
            Sense::Ge => {
                row[next_slack] = -Rational::one();
                next_slack += 1;
                row[next_art] = Rational::one();
                next_art += 1;
                next_art - 1
            }
            Sense::Eq => {
                row[next_art] = Rational::one();
                next_art += 1;
                next_art - 1
            }
        };
        basis.push(identity_col);
        rows.push(row);
        std_rows.push(StdRow { origin, negated, identity_col });
    }

    let tableau = Tableau {
        rows,
        obj: Vec::new(),
        basis,
        ncols,
        entering_allowed: ncols,
        bland: opts.bland_only,
        degenerate_streak: 0,
        pivots: 0,
        pivot_limit: opts.pivot_limit,
    };
    Ok(StandardForm { maps, rows: std_rows, tableau, n_struct, art_start })
}

impl StandardForm {
    /// Phase I. Returns `true` when feasible; leaves no artificial basic at a
    /// nonzero level and bars artificials from re-entering.
    fn phase_one(&mut self) -> Result<bool, LpError> {
        let ncols = self.tableau.ncols;
        if self.art_start == ncols {
            self.tableau.entering_allowed = ncols;
            return Ok(true);
        }
        let mut cost = vec![Rational::zero(); ncols];
        for c in cost.iter_mut().skip(self.art_start) {
            *c = Rational::one();
        }
        self.tableau.reset_objective(&cost);
        self.tableau.entering_allowed = ncols;
        self.tableau.optimize()?;
        let value = -&self.tableau.obj[ncols];
        if value.is_positive() {
            return Ok(false);
        }
        for r in 0..self.tableau.rows.len() {
            if self.tableau.basis[r] < self.art_start {
                continue;
            }
            if let Some(q) = (0..self.art_start).find(|&c| !self.tableau.rows[r][c].is_zero()) {
                self.tableau.pivot(r, q);
            }
        }
        self.tableau.entering_allowed = self.art_start;
        Ok(true)
    }

    fn primal(&self, nvars: usize) -> Vec<Rational> {
        let mut xs = vec![Rational::zero(); self.n_struct];
        for (r, &b) in self.tableau.basis.iter().enumerate() {
            if b < self.n_struct {
                xs[b] = self.tableau.rhs(r).clone();
            }
        }
        (0..nvars)
            .map(|v| {
                let m = &self.maps[v];
                let mut val = m.shift.clone();
                for &(col, neg) in &m.cols {
                    if neg {
                        val -= &xs[col];
                    } else {
                        val += &xs[col];
                    }
                }
                val
            })
            .collect()
    }

    /// Duals of the standard rows for the objective currently in the tableau,
    /// where `cost` gives the column costs used to build that row.
    fn std_duals(&self, cost_of: impl Fn(usize) -> Rational) -> Vec<Rational> {
        self.rows.iter().map(|row| cost_of(row.identity_col) - &self.tableau.obj[row.identity_col]).collect()
    }

    fn certificate(&self, lp: &LinearProgram) -> Result<FarkasCertificate, LpError> {
        let art_start = self.art_start;
        let ystd = self.std_duals(|c| if c >= art_start { Rational::one() } else { Rational::zero() });
        let mut lambda = vec![Rational::zero(); lp.constraints.len()];
        for (row, y) in self.rows.iter().zip(&ystd) {
            if let RowOrigin::Constraint(k) = row.origin {
                let signed = if row.negated { -y } else { y.clone() };
                lambda[k] = match lp.constraints[k].sense {
                    Sense::Ge => signed,
                    Sense::Le | Sense::Eq => -signed,
                };
            }
        }
        let mut coef = vec![Rational::zero(); lp.variables.len()];
        let mut rhs = Rational::zero();
        for (c, lam) in lp.constraints.iter().zip(&lambda) {
            if lam.is_zero() {
                continue;
            }
            let m = if c.sense == Sense::Ge { -lam } else { lam.clone() };
            for (v, a) in &c.terms {
                coef[*v] += &m * a;
            }
            rhs += &m * &c.rhs;
        }
        let mut lower = vec![Rational::zero(); lp.variables.len()];
        let mut upper = vec![Rational::zero(); lp.variables.len()];
        for (v, r) in coef.iter().enumerate() {
            if r.is_positive() {
                let l = lp.variables[v]
                    .lower
                    .as_ref()
                    .ok_or(LpError::Internal("certificate needs a missing lower bound"))?;
                rhs -= r * l;
                lower[v] = r.clone();
            } else if r.is_negative() {
                let u = lp.variables[v]
                    .upper
                    .as_ref()
                    .ok_or(LpError::Internal("certificate needs a missing upper bound"))?;
                rhs -= r * u;
                upper[v] = -r;
            }
        }
        if !rhs.is_negative() {
            return Err(LpError::Internal("phase-one duals do not certify infeasibility"));
        }
        Ok(FarkasCertificate {
            row_multipliers: lambda,
            lower_bound_multipliers: lower,
            upper_bound_multipliers: upper,
            combined_rhs: rhs,
        })
    }
}

/// Solves `lp` exactly. The optimal primal point is a vertex of the feasible region.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpResult, LpError> {
    solve_lp_with(lp, SimplexOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: SimplexOptions) -> Result<LpResult, LpError> {
    let mut sf = standard_form(lp, opts)?;
    let n = lp.variables.len();
    let m = lp.constraints.len();
    if !sf.phase_one()? {
        let cert = sf.certificate(lp)?;
        return Ok(LpResult {
            status: LpStatus::Infeasible,
            primal: Vec::new(),
            objective: Rational::zero(),
            duals: vec![Rational::zero(); m],
            reduced_costs: vec![Rational::zero(); n],
            certificate: Some(cert),
            extreme_point: false,
            pivots: sf.tableau.pivots,
        });
    }

    // Internal objective is always a minimisation.
    let flip = lp.direction == Direction::Maximize;
    let mut cost = vec![Rational::zero(); sf.tableau.ncols];
    for (v, c) in lp.objective.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let c = if flip { -c } else { c.clone() };
        for &(col, neg) in &sf.maps[v].cols {
            cost[col] = if neg { -&c } else { c.clone() };
        }
    }
    sf.tableau.reset_objective(&cost);
    sf.tableau.degenerate_streak = 0;
    if !sf.tableau.optimize()? {
        return Ok(LpResult {
            status: LpStatus::Unbounded,
            primal: sf.primal(n),
            objective: Rational::zero(),
            duals: vec![Rational::zero(); m],
            reduced_costs: vec![Rational::zero(); n],
            certificate: None,
            extreme_point: false,
            pivots: sf.tableau.pivots,
        });
    }

    let primal = sf.primal(n);
    let objective = lp.objective_value(&primal);
    let ystd = sf.std_duals(|c| cost[c].clone());
    let mut duals = vec![Rational::zero(); m];
    for (row, y) in sf.rows.iter().zip(&ystd) {
        if let RowOrigin::Constraint(k) = row.origin {
            let mut val = if row.negated { -y } else { y.clone() };
            if flip {
                val = -val;
            }
            duals[k] = val;
        }
    }
    let mut reduced_costs = lp.objective.clone();
    for (c, y) in lp.constraints.iter().zip(&duals) {
        if y.is_zero() {
            continue;
        }
        for (v, a) in &c.terms {
            reduced_costs[*v] -= a * y;
        }
    }
    Ok(LpResult {
        status: LpStatus::Optimal,
        primal,
        objective,
        duals,
        reduced_costs,
        certificate: None,
        extreme_point: true,
        pivots: sf.tableau.pivots,
    })
}

/// Phase I only: a feasible point, or a Farkas certificate of emptiness.
pub fn solve_feasibility(lp: &LinearProgram) -> Result<Feasibility, LpError> {
    let mut sf = standard_form(lp, SimplexOptions::default())?;
    if sf.phase_one()? {
        Ok(Feasibility::Feasible(sf.primal(lp.variables.len())))
    } else {
        Ok(Feasibility::Infeasible(sf.certificate(lp)?))
    }
}
