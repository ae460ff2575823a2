//! Conic program container and its lowering to solver standard form.
//!
//! A [`ConicProgram`] is a linear maximization over variables with optional
//! bounds, range-bounded linear rows, second-order cone constraints over
//! affine expressions, and a set of variables marked binary. The JSON
//! serialization of this struct is the interchange schema used by the CLI's
//! `dump-program` command:
//!
//! ```json
//! {
//!   "names": ["x", "t"],
//!   "objective": [0.0, -1.0],
//!   "lower": [0.0, null],  "upper": [null, null],
//!   "rows": [ { "terms": [[0, 1.0]], "lower": null, "upper": 4.0 } ],
//!   "cones": [ { "kind": "Soc", "exprs": [ { "terms": [[1, 1.0]], "constant": 0.0 },
//!                                           { "terms": [[0, 1.0]], "constant": -3.0 } ] } ],
//!   "binaries": [],
//!   "branch_priority": []
//! }
//! ```
//!
//! `null` bounds mean unbounded. A `Soc` cone over expressions
//! `[e0, e1, .., ek]` states `e0 >= sqrt(e1^2 + .. + ek^2)`; an `Rsoc` cone
//! over `[e0, e1, e2, .., ek]` states `2 e0 e1 >= e2^2 + .. + ek^2` with
//! `e0, e1 >= 0`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::cones::ConeDims;
use crate::linalg::CsrMat;

/// Sparse affine expression: sum of (variable, coefficient) terms + constant.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct AffExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffExpr {
    pub fn constant(c: f64) -> Self {
        AffExpr { terms: Vec::new(), constant: c }
    }

    pub fn var(j: usize) -> Self {
        AffExpr { terms: vec![(j, 1.0)], constant: 0.0 }
    }

    pub fn scaled_var(j: usize, coef: f64) -> Self {
        AffExpr { terms: vec![(j, coef)], constant: 0.0 }
    }

    pub fn push(&mut self, j: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((j, coef));
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(j, c)| c * x[j]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeKind {
    Soc,
    Rsoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeConstraint {
    pub kind: ConeKind,
    pub exprs: Vec<AffExpr>,
}

/// Linear row with range bounds; `None` means unbounded on that side.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinRow {
    pub terms: Vec<(usize, f64)>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ProgramError {
    #[error("variable index {0} out of range ({1} variables)")]
    BadIndex(usize, usize),
    #[error("cone needs at least {min} expressions, got {got}")]
    ConeTooSmall { min: usize, got: usize },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("variable {0}: lower bound {1} exceeds upper bound {2}")]
    BadBounds(usize, f64, f64),
    #[error("row {0} has no terms")]
    EmptyRow(usize),
    #[error("duplicate variable {0} in a single expression")]
    DuplicateTerm(usize),
}

/// A linear maximization over a product of boxes, linear rows and
/// second-order cones, with a designated set of binary variables.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct ConicProgram {
    pub names: Vec<String>,
    /// Coefficients of the objective, to be MAXIMIZED.
    pub objective: Vec<f64>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    pub rows: Vec<LinRow>,
    pub cones: Vec<ConeConstraint>,
    pub binaries: BTreeSet<usize>,
    /// Branching tie-break weight per variable (larger branches first).
    pub branch_priority: Vec<(usize, f64)>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: Option<f64>, upper: Option<f64>) -> usize {
        self.names.push(name.into());
        self.objective.push(0.0);
        self.lower.push(lower);
        self.upper.push(upper);
        self.names.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> usize {
        let j = self.add_var(name, Some(0.0), Some(1.0));
        self.binaries.insert(j);
        j
    }

    pub fn set_objective(&mut self, j: usize, coef: f64) {
        self.objective[j] = coef;
    }

    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, lower: Option<f64>, upper: Option<f64>) {
        self.rows.push(LinRow { terms, lower, upper });
    }

    /// terms <= rhs
    pub fn add_le(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.add_row(terms, None, Some(rhs));
    }

    /// terms >= rhs
    pub fn add_ge(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.add_row(terms, Some(rhs), None);
    }

    /// terms == rhs
    pub fn add_eq(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.add_row(terms, Some(rhs), Some(rhs));
    }

    /// e0 >= ||(e1, .., ek)||
    pub fn add_soc(&mut self, exprs: Vec<AffExpr>) {
        self.cones.push(ConeConstraint { kind: ConeKind::Soc, exprs });
    }

    /// 2 e0 e1 >= e2^2 + .. + ek^2, e0 >= 0, e1 >= 0
    pub fn add_rsoc(&mut self, exprs: Vec<AffExpr>) {
        self.cones.push(ConeConstraint { kind: ConeKind::Rsoc, exprs });
    }

    pub fn set_branch_priority(&mut self, j: usize, w: f64) {
        self.branch_priority.push((j, w));
    }

    /// Fix a variable to an exact value (used by branch-and-bound and by
    /// fixed-association runs).
    pub fn fix_var(&mut self, j: usize, value: f64) {
        self.lower[j] = Some(value);
        self.upper[j] = Some(value);
    }

    pub fn validate(&self) -> Result<(), ProgramError> {
        let n = self.n_vars();
        let check_idx = |j: usize| if j < n { Ok(()) } else { Err(ProgramError::BadIndex(j, n)) };
        for (j, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if let (Some(l), Some(u)) = (l, u) {
                if l > u {
                    return Err(ProgramError::BadBounds(j, l, u));
                }
            }
        }
        for v in &self.objective {
            if !v.is_finite() {
                return Err(ProgramError::NonFinite("objective".into()));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.terms.is_empty() {
                return Err(ProgramError::EmptyRow(i));
            }
            let mut seen = BTreeSet::new();
            for &(j, c) in &row.terms {
                check_idx(j)?;
                if !c.is_finite() {
                    return Err(ProgramError::NonFinite(format!("row {i}")));
                }
                if !seen.insert(j) {
                    return Err(ProgramError::DuplicateTerm(j));
                }
            }
        }
        for cone in &self.cones {
            let min = match cone.kind {
                ConeKind::Soc => 2,
                ConeKind::Rsoc => 3,
            };
            if cone.exprs.len() < min {
                return Err(ProgramError::ConeTooSmall { min, got: cone.exprs.len() });
            }
            for e in &cone.exprs {
                let mut seen = BTreeSet::new();
                for &(j, c) in &e.terms {
                    check_idx(j)?;
                    if !c.is_finite() || !e.constant.is_finite() {
                        return Err(ProgramError::NonFinite("cone expression".into()));
                    }
                    if !seen.insert(j) {
                        return Err(ProgramError::DuplicateTerm(j));
                    }
                }
            }
        }
        for &b in &self.binaries {
            check_idx(b)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Lower to the interior-point standard form
    ///   minimize c^T x  s.t.  A x = b,  G x + s = h,  s in (R+^l) x SOC(...).
    ///
    /// Row order of G is deterministic: variable bounds first (lower then
    /// upper, per variable), then linear-row bounds in declaration order
    /// (upper then lower for range rows), then the cones in declaration order
    /// (rotated cones are rotated into standard ones by the orthogonal map
    /// (e0, e1) -> ((e0 + e1)/sqrt2, (e0 - e1)/sqrt2)).
    pub fn to_standard_form(&self) -> StandardForm {
        let n = self.n_vars();
        let c: Vec<f64> = self.objective.iter().map(|v| -v).collect();

        let mut a_rows: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut b = Vec::new();
        let mut g_rows: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut h = Vec::new();

        // variable bounds -> nonneg rows (s = x - l >= 0 encoded as -x <= -l)
        for j in 0..n {
            if let (Some(l), Some(u)) = (self.lower[j], self.upper[j]) {
                if l == u {
                    a_rows.push(vec![(j, 1.0)]);
                    b.push(l);
                    continue;
                }
            }
            if let Some(l) = self.lower[j] {
                g_rows.push(vec![(j, -1.0)]);
                h.push(-l);
            }
            if let Some(u) = self.upper[j] {
                g_rows.push(vec![(j, 1.0)]);
                h.push(u);
            }
        }
        // linear rows
        for row in &self.rows {
            match (row.lower, row.upper) {
                (Some(l), Some(u)) if l == u => {
                    a_rows.push(row.terms.clone());
                    b.push(l);
                }
                (lo, up) => {
                    if let Some(u) = up {
                        g_rows.push(row.terms.clone());
                        h.push(u);
                    }
                    if let Some(l) = lo {
                        g_rows.push(row.terms.iter().map(|&(j, c)| (j, -c)).collect());
                        h.push(-l);
                    }
                }
            }
        }
        let nonneg = g_rows.len();

        // cones: s_i = e_i(x) means the G row is -coef and h is the constant
        let mut socs = Vec::with_capacity(self.cones.len());
        let push_expr = |e: &AffExpr, g_rows: &mut Vec<Vec<(usize, f64)>>, h: &mut Vec<f64>| {
            g_rows.push(e.terms.iter().map(|&(j, c)| (j, -c)).collect());
            h.push(e.constant);
        };
        for cone in &self.cones {
            match cone.kind {
                ConeKind::Soc => {
                    for e in &cone.exprs {
                        push_expr(e, &mut g_rows, &mut h);
                    }
                    socs.push(cone.exprs.len());
                }
                ConeKind::Rsoc => {
                    let s = std::f64::consts::FRAC_1_SQRT_2;
                    let combine = |a: &AffExpr, bx: &AffExpr, sb: f64| {
                        let mut e = AffExpr::constant(s * (a.constant + sb * bx.constant));
                        for &(j, cf) in &a.terms {
                            e.push(j, s * cf);
                        }
                        for &(j, cf) in &bx.terms {
                            e.push(j, s * sb * cf);
                        }
                        e
                    };
                    let head = combine(&cone.exprs[0], &cone.exprs[1], 1.0);
                    let second = combine(&cone.exprs[0], &cone.exprs[1], -1.0);
                    push_expr(&head, &mut g_rows, &mut h);
                    push_expr(&second, &mut g_rows, &mut h);
                    for e in &cone.exprs[2..] {
                        push_expr(e, &mut g_rows, &mut h);
                    }
                    socs.push(cone.exprs.len());
                }
            }
        }

        StandardForm {
            c,
            a: CsrMat::from_rows(n, &a_rows),
            b,
            g: CsrMat::from_rows(n, &g_rows),
            h,
            dims: ConeDims { nonneg, socs },
        }
    }
}

/// Interior-point standard form: minimize c^T x s.t. A x = b, G x + s = h,
/// s in the product cone described by `dims`.
#[derive(Debug, Clone)]
pub struct StandardForm {
    pub c: Vec<f64>,
    pub a: CsrMat,
    pub b: Vec<f64>,
    pub g: CsrMat,
    pub h: Vec<f64>,
    pub dims: ConeDims,
}
