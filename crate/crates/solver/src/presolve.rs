//! Bound-driven presolve.
//!
//! Branch-and-bound fixes binaries by collapsing their bounds, and
//! fixed-association runs pin whole binary blocks. This pass substitutes
//! fixed variables, propagates the consequences (row activity bounds, cone
//! heads forced to zero zeroing their members), and rebuilds a compact
//! program so the interior-point method never sees empty-interior cones such
//! as ||w||^2 <= P * 0.

use crate::program::{AffExpr, ConeConstraint, ConeKind, ConicProgram, LinRow};

const FEAS_TOL: f64 = 1e-9;
const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Presolved {
    pub reduced: ConicProgram,
    /// Per original variable: Some(v) when the presolve pinned it.
    pub fixed: Vec<Option<f64>>,
    /// Original index -> reduced index (None when fixed).
    pub new_index: Vec<Option<usize>>,
    pub infeasible: bool,
    /// Objective contribution of the fixed variables.
    pub objective_offset: f64,
}

impl Presolved {
    /// Reassemble a full-length solution vector from a reduced one.
    pub fn recover(&self, x_reduced: &[f64]) -> Vec<f64> {
        self.fixed
            .iter()
            .zip(&self.new_index)
            .map(|(fx, ni)| match (fx, ni) {
                (Some(v), _) => *v,
                (None, Some(j)) => x_reduced[*j],
                (None, None) => 0.0,
            })
            .collect()
    }
}

struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    fn is_fixed(&self, j: usize) -> bool {
        self.lower[j] == self.upper[j]
    }

    fn fix(&mut self, j: usize, v: f64) -> Result<bool, ()> {
        if v < self.lower[j] - FEAS_TOL * (1.0 + v.abs()) || v > self.upper[j] + FEAS_TOL * (1.0 + v.abs()) {
            return Err(());
        }
        let changed = !self.is_fixed(j);
        self.lower[j] = v;
        self.upper[j] = v;
        Ok(changed)
    }
}

pub fn presolve(prog: &ConicProgram) -> Presolved {
    let n = prog.n_vars();
    let mut bounds = Bounds {
        lower: prog.lower.iter().map(|l| l.unwrap_or(f64::NEG_INFINITY)).collect(),
        upper: prog.upper.iter().map(|u| u.unwrap_or(f64::INFINITY)).collect(),
    };

    let infeasible_result = |prog: &ConicProgram| Presolved {
        reduced: ConicProgram::new(),
        fixed: vec![None; prog.n_vars()],
        new_index: vec![None; prog.n_vars()],
        infeasible: true,
        objective_offset: 0.0,
    };

    for j in 0..n {
        if bounds.lower[j] > bounds.upper[j] {
            return infeasible_result(prog);
        }
    }

    // propagate to a fixpoint (bounded number of sweeps)
    for _ in 0..50 {
        let mut changed = false;
        for row in &prog.rows {
            match propagate_row(row, &mut bounds) {
                Ok(c) => changed |= c,
                Err(()) => return infeasible_result(prog),
            }
        }
        for cone in &prog.cones {
            match propagate_cone(cone, &mut bounds) {
                Ok(c) => changed |= c,
                Err(()) => return infeasible_result(prog),
            }
        }
        if !changed {
            break;
        }
    }

    build_reduced(prog, &bounds).unwrap_or_else(|()| infeasible_result(prog))
}

/// Activity-interval propagation for one row. Fixes a variable when the row
/// pins it (last unfixed variable of an equality, or a binary squeezed to one
/// side of its box). Returns whether any variable changed.
fn propagate_row(row: &LinRow, bounds: &mut Bounds) -> Result<bool, ()> {
    let rl = row.lower.unwrap_or(f64::NEG_INFINITY);
    let ru = row.upper.unwrap_or(f64::INFINITY);
    let mut min_act = 0.0f64;
    let mut max_act = 0.0f64;
    let mut unfixed = 0usize;
    let mut last_unfixed = None;
    for &(j, c) in &row.terms {
        let (lo, hi) = (bounds.lower[j], bounds.upper[j]);
        if bounds.is_fixed(j) {
            min_act += c * lo;
            max_act += c * lo;
        } else {
            unfixed += 1;
            last_unfixed = Some((j, c));
            if c >= 0.0 {
                min_act += c * lo;
                max_act += c * hi;
            } else {
                min_act += c * hi;
                max_act += c * lo;
            }
        }
    }
    let scale = 1.0 + min_act.abs().max(max_act.abs()).min(f64::MAX);
    if min_act > ru + FEAS_TOL * scale || max_act < rl - FEAS_TOL * scale {
        return Err(());
    }
    let mut changed = false;
    if unfixed == 1 && rl == ru {
        let (j, c) = last_unfixed.unwrap();
        let fixed_part: f64 = row
            .terms
            .iter()
            .filter(|&&(k, _)| k != j)
            .map(|&(k, ck)| ck * bounds.lower[k])
            .sum();
        changed |= bounds.fix(j, (rl - fixed_part) / c)?;
    } else if unfixed >= 1 {
        // squeeze each unfixed {0,1}-boxed variable against the activity interval
        for &(j, c) in &row.terms {
            if bounds.is_fixed(j) || !(bounds.lower[j] == 0.0 && bounds.upper[j] == 1.0) {
                continue;
            }
            let (min_other, max_other) = {
                let (lo, hi) = if c >= 0.0 { (0.0, c) } else { (c, 0.0) };
                (min_act - lo, max_act - hi)
            };
            if c > 0.0 {
                if ru.is_finite() && min_other + c > ru + FEAS_TOL * scale {
                    changed |= bounds.fix(j, 0.0)?;
                } else if rl.is_finite() && max_other < rl - FEAS_TOL * scale {
                    changed |= bounds.fix(j, 1.0)?;
                }
            } else if c < 0.0 {
                if rl.is_finite() && max_other + c < rl - FEAS_TOL * scale {
                    changed |= bounds.fix(j, 0.0)?;
                } else if ru.is_finite() && min_other > ru + FEAS_TOL * scale {
                    changed |= bounds.fix(j, 1.0)?;
                }
            }
        }
    }
    Ok(changed)
}

fn expr_value_if_fixed(e: &AffExpr, bounds: &Bounds) -> Option<f64> {
    let mut v = e.constant;
    for &(j, c) in &e.terms {
        if bounds.is_fixed(j) {
            v += c * bounds.lower[j];
        } else {
            return None;
        }
    }
    Some(v)
}

/// When a cone head is pinned at zero, the remaining members must vanish.
fn propagate_cone(cone: &ConeConstraint, bounds: &mut Bounds) -> Result<bool, ()> {
    let heads = match cone.kind {
        ConeKind::Soc => 1,
        ConeKind::Rsoc => 2,
    };
    let mut forced_zero = false;
    for e in &cone.exprs[..heads] {
        if let Some(v) = expr_value_if_fixed(e, bounds) {
            if v < -FEAS_TOL {
                return Err(());
            }
            if v <= ZERO_TOL {
                forced_zero = true;
            }
        }
    }
    if !forced_zero {
        return Ok(false);
    }
    let mut changed = false;
    for e in &cone.exprs[heads..] {
        let unfixed: Vec<&(usize, f64)> =
            e.terms.iter().filter(|&&(j, _)| !bounds.is_fixed(j)).collect();
        match unfixed.len() {
            0 => {
                let v = expr_value_if_fixed(e, bounds).unwrap();
                if v.abs() > FEAS_TOL {
                    return Err(());
                }
            }
            1 => {
                let &(j, c) = unfixed[0];
                let rest: f64 = e.constant
                    + e.terms
                        .iter()
                        .filter(|&&(k, _)| k != j)
                        .map(|&(k, ck)| ck * bounds.lower[k])
                        .sum::<f64>();
                changed |= bounds.fix(j, -rest / c)?;
            }
            _ => {} // multi-variable member; leave to the solver
        }
    }
    Ok(changed)
}

fn build_reduced(prog: &ConicProgram, bounds: &Bounds) -> Result<Presolved, ()> {
    let n = prog.n_vars();
    let mut fixed = vec![None; n];
    let mut new_index = vec![None; n];
    let mut reduced = ConicProgram::new();
    let mut objective_offset = 0.0;

    for j in 0..n {
        if bounds.is_fixed(j) {
            fixed[j] = Some(bounds.lower[j]);
            objective_offset += prog.objective[j] * bounds.lower[j];
        } else {
            let nj = reduced.add_var(
                prog.names[j].clone(),
                bounds.lower[j].is_finite().then_some(bounds.lower[j]),
                bounds.upper[j].is_finite().then_some(bounds.upper[j]),
            );
            reduced.set_objective(nj, prog.objective[j]);
            if prog.binaries.contains(&j) {
                reduced.binaries.insert(nj);
            }
            new_index[j] = Some(nj);
        }
    }
    for &(j, w) in &prog.branch_priority {
        if let Some(nj) = new_index[j] {
            reduced.set_branch_priority(nj, w);
        }
    }

    for row in &prog.rows {
        let mut fixed_part = 0.0;
        let mut terms = Vec::new();
        for &(j, c) in &row.terms {
            match fixed[j] {
                Some(v) => fixed_part += c * v,
                None => terms.push((new_index[j].unwrap(), c)),
            }
        }
        let lower = row.lower.map(|l| l - fixed_part);
        let upper = row.upper.map(|u| u - fixed_part);
        if terms.is_empty() {
            let scale = 1.0 + fixed_part.abs();
            if lower.is_some_and(|l| l > FEAS_TOL * scale) || upper.is_some_and(|u| u < -FEAS_TOL * scale) {
                return Err(());
            }
            continue;
        }
        reduced.add_row(terms, lower, upper);
    }

    'cones: for cone in &prog.cones {
        let mut exprs = Vec::with_capacity(cone.exprs.len());
        for e in &cone.exprs {
            let mut ne = AffExpr::constant(e.constant);
            for &(j, c) in &e.terms {
                match fixed[j] {
                    Some(v) => ne.constant += c * v,
                    None => ne.push(new_index[j].unwrap(), c),
                }
            }
            exprs.push(ne);
        }
        let heads = match cone.kind {
            ConeKind::Soc => 1,
            ConeKind::Rsoc => 2,
        };
        // drop tail members that reduced to an exact zero constant
        let mut kept: Vec<AffExpr> = exprs[..heads].to_vec();
        kept.extend(
            exprs[heads..]
                .iter()
                .filter(|e| !(e.terms.is_empty() && e.constant == 0.0))
                .cloned(),
        );
        let all_const = kept.iter().all(|e| e.terms.is_empty());
        if all_const {
            let vals: Vec<f64> = kept.iter().map(|e| e.constant).collect();
            let ok = match cone.kind {
                ConeKind::Soc => {
                    vals[0] + FEAS_TOL >= vals[1..].iter().map(|v| v * v).sum::<f64>().sqrt()
                }
                ConeKind::Rsoc => {
                    vals[0] >= -FEAS_TOL
                        && vals[1] >= -FEAS_TOL
                        && 2.0 * vals[0] * vals[1] + FEAS_TOL >= vals[2..].iter().map(|v| v * v).sum()
                }
            };
            if ok {
                continue 'cones;
            }
            return Err(());
        }
        if kept.len() <= heads {
            // tail vanished entirely: the cone degenerates to sign constraints
            for e in &kept {
                if !e.terms.is_empty() {
                    reduced.add_ge(e.terms.clone(), -e.constant);
                } else if e.constant < -FEAS_TOL {
                    return Err(());
                }
            }
            continue 'cones;
        }
        reduced.cones.push(ConeConstraint { kind: cone.kind, exprs: kept });
    }

    Ok(Presolved { reduced, fixed, new_index, infeasible: false, objective_offset })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::AffExpr;

    /// ||w||^2 <= P a with a fixed at zero must erase the w block entirely.
    #[test]
    fn zero_power_cone_eliminates_members() {
        let mut p = ConicProgram::new();
        let a = p.add_binary("a");
        let w1 = p.add_var("w1", None, None);
        let w2 = p.add_var("w2", None, None);
        let t = p.add_var("t", None, Some(10.0));
        p.set_objective(t, 1.0);
        p.add_rsoc(vec![
            AffExpr::scaled_var(a, 5.0),
            AffExpr::constant(0.5),
            AffExpr::var(w1),
            AffExpr::var(w2),
        ]);
        p.add_le(vec![(t, 1.0), (w1, -1.0)], 0.0); // t <= w1
        p.fix_var(a, 0.0);
        let pre = presolve(&p);
        assert!(!pre.infeasible);
        assert_eq!(pre.fixed[a], Some(0.0));
        assert_eq!(pre.fixed[w1], Some(0.0));
        assert_eq!(pre.fixed[w2], Some(0.0));
        assert_eq!(pre.reduced.n_vars(), 1); // only t remains
        assert!(pre.reduced.cones.is_empty());
        let x = pre.recover(&[0.0]);
        assert_eq!(x.len(), 4);
    }

    /// Fixing one entry of a sum-to-one row of binaries pins the rest.
    #[test]
    fn column_sum_propagates_binary_fixes() {
        let mut p = ConicProgram::new();
        let a0 = p.add_binary("a0");
        let a1 = p.add_binary("a1");
        let a2 = p.add_binary("a2");
        p.add_eq(vec![(a0, 1.0), (a1, 1.0), (a2, 1.0)], 1.0);
        p.fix_var(a1, 1.0);
        let pre = presolve(&p);
        assert!(!pre.infeasible);
        assert_eq!(pre.fixed[a0], Some(0.0));
        assert_eq!(pre.fixed[a2], Some(0.0));
        assert_eq!(pre.reduced.n_vars(), 0);
    }

    #[test]
    fn conflicting_fixes_are_infeasible() {
        let mut p = ConicProgram::new();
        let a0 = p.add_binary("a0");
        let a1 = p.add_binary("a1");
        p.add_eq(vec![(a0, 1.0), (a1, 1.0)], 1.0);
        p.fix_var(a0, 1.0);
        p.fix_var(a1, 1.0);
        let pre = presolve(&p);
        assert!(pre.infeasible);
    }

    #[test]
    fn fixed_objective_contribution_is_tracked() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x", Some(2.0), Some(2.0));
        let y = p.add_var("y", Some(0.0), Some(1.0));
        p.set_objective(x, 3.0);
        p.set_objective(y, 1.0);
        let pre = presolve(&p);
        assert_eq!(pre.objective_offset, 6.0);
        assert_eq!(pre.reduced.n_vars(), 1);
    }
}
