//! Solver-agnostic conic program representation.
//!
//! A [`ConicProgram`] is a minimisation problem over bounded (optionally
//! integer) variables with a linear objective, a diagonal quadratic objective
//! part that must be lowered before solving, affine linear rows and
//! second-order cone blocks whose members are affine expressions.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Index of a variable inside a [`ConicProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Sparse affine expression `sum(coef * var) + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn var(v: VarId) -> Self {
        Self::term(v, 1.0)
    }

    pub fn term(v: VarId, coef: f64) -> Self {
        Self {
            terms: vec![(v.0, coef)],
            constant: 0.0,
        }
    }

    /// Adds `coef * v`; zero coefficients are skipped.
    pub fn add(&mut self, v: VarId, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((v.0, coef));
        }
        self
    }

    pub fn with(mut self, v: VarId, coef: f64) -> Self {
        self.add(v, coef);
        self
    }

    pub fn plus_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        for &(j, c) in &other.terms {
            if c * scale != 0.0 {
                self.terms.push((j, c * scale));
            }
        }
        self.constant += other.constant * scale;
        self
    }

    pub fn scaled(&self, scale: f64) -> LinExpr {
        let mut out = LinExpr::new();
        out.add_expr(self, scale);
        out
    }

    /// Merges duplicate variable references and drops exact zeros, keeping
    /// terms sorted by variable index.
    pub fn compact(&mut self) {
        self.terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(j, c) in &self.terms {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += c,
                _ => merged.push((j, c)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        self.terms = merged;
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, c)| c * x[j]).sum::<f64>() + self.constant
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.1 == 0.0)
    }
}

/// Relation of a linear row expression to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sense {
    /// `expr == 0`
    Eq,
    /// `expr <= 0`
    Le,
    /// `expr >= 0`
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub expr: LinExpr,
    pub sense: Sense,
}

/// Second-order cone block `||u||_2 <= t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocBlock {
    pub t: LinExpr,
    pub u: Vec<LinExpr>,
}

impl SocBlock {
    pub fn len(&self) -> usize {
        self.u.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
}

/// Minimise `c'x + sum(q_j x_j^2) + c0` subject to rows, cone blocks and bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProgram {
    pub vars: Vec<Variable>,
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    /// Diagonal quadratic objective terms `(var, a)` meaning `a * x_var^2`.
    /// Must be lowered with [`crate::lower_quadratic_objective`] before solving.
    pub quadratic: Vec<(usize, f64)>,
    pub rows: Vec<Row>,
    pub socs: Vec<SocBlock>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> VarId {
        self.vars.push(Variable {
            lower,
            upper,
            integer: false,
        });
        self.objective.push(cost);
        VarId(self.vars.len() - 1)
    }

    pub fn add_integer_var(&mut self, lower: f64, upper: f64, cost: f64) -> VarId {
        let v = self.add_var(lower, upper, cost);
        self.vars[v.0].integer = true;
        v
    }

    pub fn add_free_var(&mut self, cost: f64) -> VarId {
        self.add_var(f64::NEG_INFINITY, f64::INFINITY, cost)
    }

    pub fn add_objective(&mut self, v: VarId, cost: f64) {
        self.objective[v.0] += cost;
    }

    pub fn add_row(&mut self, mut expr: LinExpr, sense: Sense) -> usize {
        expr.compact();
        self.rows.push(Row { expr, sense });
        self.rows.len() - 1
    }

    pub fn add_soc(&mut self, mut t: LinExpr, mut u: Vec<LinExpr>) -> usize {
        t.compact();
        for e in &mut u {
            e.compact();
        }
        self.socs.push(SocBlock { t, u });
        self.socs.len() - 1
    }

    pub fn integer_vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.integer)
            .map(|(j, _)| j)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.objective.iter().zip(x).map(|(c, v)| c * v).sum();
        let quad: f64 = self.quadratic.iter().map(|&(j, a)| a * x[j] * x[j]).sum();
        lin + quad + self.objective_constant
    }

    /// Checks index ranges, bound ordering and cone sizes.
    pub fn validate(&self) -> Result<()> {
        let n = self.vars.len();
        if self.objective.len() != n {
            return Err(Error::Malformed(format!(
                "objective has {} entries for {} variables",
                self.objective.len(),
                n
            )));
        }
        for (j, v) in self.vars.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(Error::Malformed(format!(
                    "variable {j} has bounds [{}, {}]",
                    v.lower, v.upper
                )));
            }
        }
        let check = |e: &LinExpr, what: &str| -> Result<()> {
            if let Some(&(j, _)) = e.terms.iter().find(|t| t.0 >= n) {
                return Err(Error::Malformed(format!(
                    "{what} references variable {j} of {n}"
                )));
            }
            if !e.constant.is_finite() || e.terms.iter().any(|t| !t.1.is_finite()) {
                return Err(Error::Malformed(format!("{what} has non-finite data")));
            }
            Ok(())
        };
        for (i, r) in self.rows.iter().enumerate() {
            check(&r.expr, &format!("row {i}"))?;
        }
        for (k, s) in self.socs.iter().enumerate() {
            if s.u.is_empty() {
                return Err(Error::Malformed(format!("cone {k} has length 1")));
            }
            check(&s.t, &format!("cone {k}"))?;
            for e in &s.u {
                check(e, &format!("cone {k}"))?;
            }
        }
        for &(j, a) in &self.quadratic {
            if j >= n {
                return Err(Error::Malformed(format!(
                    "quadratic term references variable {j} of {n}"
                )));
            }
            if a < 0.0 || !a.is_finite() {
                return Err(Error::NegativeQuadratic { var: j, coef: a });
            }
        }
        Ok(())
    }

    /// Plain-text dump, one record per line:
    ///
    /// ```text
    /// conic 1
    /// vars <n> rows <m> cones <k>
    /// var <j> <lower> <upper> <int|cont> <cost>
    /// quad <j> <a>
    /// const <c0>
    /// row <i> <eq|le|ge> <constant> <j>:<coef> ...
    /// cone <k> <len> t <constant> <j>:<coef> ... | u <constant> <j>:<coef> ... | ...
    /// ```
    ///
    /// Numbers use Rust's shortest round-trip formatting.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "conic 1");
        let _ = writeln!(
            out,
            "vars {} rows {} cones {}",
            self.vars.len(),
            self.rows.len(),
            self.socs.len()
        );
        for (j, v) in self.vars.iter().enumerate() {
            let _ = writeln!(
                out,
                "var {j} {} {} {} {}",
                v.lower,
                v.upper,
                if v.integer { "int" } else { "cont" },
                self.objective[j]
            );
        }
        for &(j, a) in &self.quadratic {
            let _ = writeln!(out, "quad {j} {a}");
        }
        let _ = writeln!(out, "const {}", self.objective_constant);
        for (i, r) in self.rows.iter().enumerate() {
            let sense = match r.sense {
                Sense::Eq => "eq",
                Sense::Le => "le",
                Sense::Ge => "ge",
            };
            let _ = writeln!(out, "row {i} {sense} {}", expr_text(&r.expr));
        }
        for (k, s) in self.socs.iter().enumerate() {
            let mut line = format!("cone {k} {} t {}", s.len(), expr_text(&s.t));
            for e in &s.u {
                line.push_str(" | u ");
                line.push_str(&expr_text(e));
            }
            let _ = writeln!(out, "{line}");
        }
        out
    }

    /// Order-independent normal form used to compare two programs: rows are
    /// rewritten as `expr <= 0` or `expr == 0` (equalities with a positive
    /// leading coefficient), compacted and sorted; cone blocks are compacted
    /// and sorted.
    pub fn canonical(&self) -> CanonicalProgram {
        let mut eqs = Vec::new();
        let mut les = Vec::new();
        for r in &self.rows {
            let mut e = r.expr.clone();
            e.compact();
            match r.sense {
                Sense::Eq => {
                    if e.terms.first().is_some_and(|t| t.1 < 0.0) {
                        e = e.scaled(-1.0);
                    }
                    eqs.push(e);
                }
                Sense::Le => les.push(e),
                Sense::Ge => les.push(e.scaled(-1.0)),
            }
        }
        let key = |e: &LinExpr| -> Vec<(usize, i64)> {
            e.terms
                .iter()
                .map(|&(j, c)| (j, (c * 1e6).round() as i64))
                .collect()
        };
        eqs.sort_by_key(|e| (key(e), (e.constant * 1e6).round() as i64));
        les.sort_by_key(|e| (key(e), (e.constant * 1e6).round() as i64));
        let mut socs: Vec<SocBlock> = self
            .socs
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.t.compact();
                s.u.iter_mut().for_each(LinExpr::compact);
                s.u.retain(|e| !(e.terms.is_empty() && e.constant == 0.0));
                s
            })
            .collect();
        socs.sort_by_key(|s| key(&s.t));
        let mut quadratic = self.quadratic.clone();
        quadratic.sort_by_key(|q| q.0);
        CanonicalProgram {
            vars: self.vars.clone(),
            objective: self.objective.clone(),
            objective_constant: self.objective_constant,
            quadratic,
            equalities: eqs,
            inequalities: les,
            socs,
        }
    }
}

fn expr_text(e: &LinExpr) -> String {
    let mut s = format!("{}", e.constant);
    for &(j, c) in &e.terms {
        let _ = write!(s, " {j}:{c}");
    }
    s
}

/// Normal form of a [`ConicProgram`], see [`ConicProgram::canonical`].
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalProgram {
    pub vars: Vec<Variable>,
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub quadratic: Vec<(usize, f64)>,
    pub equalities: Vec<LinExpr>,
    pub inequalities: Vec<LinExpr>,
    pub socs: Vec<SocBlock>,
}

impl CanonicalProgram {
    /// Structural equality with every coefficient compared at relative
    /// tolerance `tol`. Returns a description of the first difference.
    pub fn diff(&self, other: &CanonicalProgram, tol: f64) -> Option<String> {
        let close = |a: f64, b: f64| {
            (a == b) || (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
        };
        if self.vars.len() != other.vars.len() {
            return Some(format!(
                "variable count {} vs {}",
                self.vars.len(),
                other.vars.len()
            ));
        }
        for (j, (a, b)) in self.vars.iter().zip(&other.vars).enumerate() {
            if a.integer != b.integer || !close(a.lower, b.lower) || !close(a.upper, b.upper) {
                return Some(format!("variable {j} differs"));
            }
        }
        for (j, (a, b)) in self.objective.iter().zip(&other.objective).enumerate() {
            if !close(*a, *b) {
                return Some(format!("objective coefficient {j}: {a} vs {b}"));
            }
        }
        if !close(self.objective_constant, other.objective_constant) {
            return Some("objective constant differs".into());
        }
        if self.quadratic.len() != other.quadratic.len()
            || self
                .quadratic
                .iter()
                .zip(&other.quadratic)
                .any(|(a, b)| a.0 != b.0 || !close(a.1, b.1))
        {
            return Some("quadratic terms differ".into());
        }
        let exprs = |a: &[LinExpr], b: &[LinExpr], what: &str| -> Option<String> {
            if a.len() != b.len() {
                return Some(format!("{what} count {} vs {}", a.len(), b.len()));
            }
            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                if x.terms.len() != y.terms.len()
                    || !close(x.constant, y.constant)
                    || x
                        .terms
                        .iter()
                        .zip(&y.terms)
                        .any(|(p, q)| p.0 != q.0 || !close(p.1, q.1))
                {
                    return Some(format!("{what} {i} differs"));
                }
            }
            None
        };
        if let Some(d) = exprs(&self.equalities, &other.equalities, "equality") {
            return Some(d);
        }
        if let Some(d) = exprs(&self.inequalities, &other.inequalities, "inequality") {
            return Some(d);
        }
        if self.socs.len() != other.socs.len() {
            return Some(format!(
                "cone count {} vs {}",
                self.socs.len(),
                other.socs.len()
            ));
        }
        for (k, (a, b)) in self.socs.iter().zip(&other.socs).enumerate() {
            if let Some(d) = exprs(std::slice::from_ref(&a.t), std::slice::from_ref(&b.t), "cone head")
            {
                return Some(format!("cone {k}: {d}"));
            }
            if let Some(d) = exprs(&a.u, &b.u, "cone member") {
                return Some(format!("cone {k}: {d}"));
            }
        }
        None
    }
}
