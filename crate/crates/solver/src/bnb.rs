//! Best-first branch-and-bound over the binary variables of a conic program.
//!
//! The root is the continuous relaxation (binaries in [0,1]). Branching picks
//! the most fractional binary, breaking ties by the caller-supplied branch
//! priority and then by index. Incumbents come from three sources: an
//! optional caller hint (solved with the hinted binaries fixed), rounding of
//! fractional relaxation points repaired against sum-to-one rows, and
//! integral relaxations. Every incumbent is re-solved with its binaries fixed
//! exactly, so reported binary values are exact 0/1 and beams of switched-off
//! pairs are eliminated by the presolve rather than left at interior-point
//! noise level.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::program::ConicProgram;
use crate::{solve_socp_with, KktResiduals, SolveReport, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryStrategy {
    BranchAndBound,
    RelaxRound,
}

#[derive(Debug, Clone)]
pub struct MisocpOptions {
    /// Tolerance handed to the continuous SOCP solves.
    pub socp_tol: f64,
    /// Relative optimality gap at which the search stops.
    pub rel_gap: f64,
    /// Maximum number of node relaxations solved before returning the
    /// incumbent with `NodeLimit` status.
    pub node_limit: usize,
    /// Distance from {0,1} below which a relaxation value counts as integral.
    pub integer_tol: f64,
    pub strategy: BinaryStrategy,
    /// Optional full assignment of the binaries used to seed the incumbent.
    pub hint: Option<Vec<(usize, u8)>>,
}

impl Default for MisocpOptions {
    fn default() -> Self {
        MisocpOptions {
            socp_tol: 1e-7,
            rel_gap: 1e-4,
            node_limit: 200,
            integer_tol: 1e-6,
            strategy: BinaryStrategy::BranchAndBound,
            hint: None,
        }
    }
}

struct Node {
    bound: f64,
    id: u64,
    fixes: Vec<(usize, u8)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.id == other.id
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on bound; FIFO among equal bounds for determinism
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct Incumbent {
    objective: f64,
    report: SolveReport,
}

fn free_binaries(prog: &ConicProgram) -> Vec<usize> {
    prog.binaries
        .iter()
        .copied()
        .filter(|&j| prog.lower[j] != prog.upper[j])
        .collect()
}

fn solve_with_fixes(prog: &ConicProgram, fixes: &[(usize, u8)], tol: f64) -> SolveReport {
    let mut sub = prog.clone();
    for &(j, v) in fixes {
        sub.fix_var(j, v as f64);
    }
    solve_socp_with(&sub, tol).unwrap_or_else(|_| SolveReport::failed(SolveStatus::Numerical))
}

/// Round a relaxation point to a feasible binary assignment. Rows whose terms
/// are all unit-coefficient binaries are treated as assignment rows: an
/// equality to one keeps only the largest entry, a lower bound of one raises
/// the largest entry when rounding left the row empty.
fn round_repair(prog: &ConicProgram, x: &[f64], bins: &[usize]) -> Vec<(usize, u8)> {
    let mut assign: Vec<(usize, u8)> = bins.iter().map(|&j| (j, (x[j] >= 0.5) as u8)).collect();
    let pos: std::collections::HashMap<usize, usize> =
        bins.iter().enumerate().map(|(k, &j)| (j, k)).collect();
    for row in &prog.rows {
        let all_unit_bins = row
            .terms
            .iter()
            .all(|&(j, c)| c == 1.0 && pos.contains_key(&j));
        if !all_unit_bins || row.terms.is_empty() {
            continue;
        }
        let argmax = row
            .terms
            .iter()
            .map(|&(j, _)| j)
            .max_by(|&a, &b| x[a].total_cmp(&x[b]).then_with(|| b.cmp(&a)))
            .unwrap();
        match (row.lower, row.upper) {
            (Some(l), Some(u)) if l == u && l == 1.0 => {
                for &(j, _) in &row.terms {
                    assign[pos[&j]].1 = (j == argmax) as u8;
                }
            }
            (Some(l), _) if l >= 1.0 => {
                let count: u8 = row.terms.iter().map(|&(j, _)| assign[pos[&j]].1).sum();
                if count == 0 {
                    assign[pos[&argmax]].1 = 1;
                }
            }
            _ => {}
        }
    }
    assign
}

fn select_branch_var(prog: &ConicProgram, x: &[f64], bins: &[usize], fixed: &[(usize, u8)]) -> Option<usize> {
    let is_fixed = |j: usize| fixed.iter().any(|&(k, _)| k == j);
    let priority = |j: usize| {
        prog.branch_priority
            .iter()
            .find(|&&(k, _)| k == j)
            .map(|&(_, w)| w)
            .unwrap_or(0.0)
    };
    bins.iter()
        .copied()
        .filter(|&j| !is_fixed(j))
        .min_by(|&a, &b| {
            let fa = (x[a] - 0.5).abs();
            let fb = (x[b] - 0.5).abs();
            fa.total_cmp(&fb)
                .then_with(|| priority(b).total_cmp(&priority(a)))
                .then_with(|| a.cmp(&b))
        })
}

fn is_integral(x: &[f64], bins: &[usize], tol: f64) -> bool {
    bins.iter().all(|&j| (x[j] - x[j].round()).abs() <= tol)
}

fn try_incumbent(
    prog: &ConicProgram,
    fixes: &[(usize, u8)],
    tol: f64,
    incumbent: &mut Option<Incumbent>,
    solves: &mut usize,
) {
    *solves += 1;
    let rep = solve_with_fixes(prog, fixes, tol);
    if rep.status == SolveStatus::Optimal {
        let better = incumbent
            .as_ref()
            .is_none_or(|inc| rep.objective > inc.objective);
        if better {
            *incumbent = Some(Incumbent { objective: rep.objective, report: rep });
        }
    }
}

pub fn solve_misocp_with(prog: &ConicProgram, options: &MisocpOptions) -> SolveReport {
    let bins = free_binaries(prog);
    if bins.is_empty() {
        let mut rep = solve_socp_with(prog, options.socp_tol)
            .unwrap_or_else(|_| SolveReport::failed(SolveStatus::Numerical));
        rep.bnb_nodes = 1;
        return rep;
    }

    let gap_closed = |bound: f64, inc: f64| bound - inc <= options.rel_gap * inc.abs().max(1e-9);

    let mut incumbent: Option<Incumbent> = None;
    let mut solves = 0usize;
    let mut numerical_failures = 0usize;

    if let Some(hint) = &options.hint {
        try_incumbent(prog, hint, options.socp_tol, &mut incumbent, &mut solves);
    }

    // root relaxation
    let root = solve_socp_with(prog, options.socp_tol)
        .unwrap_or_else(|_| SolveReport::failed(SolveStatus::Numerical));
    let mut nodes_solved = 1usize;
    match root.status {
        SolveStatus::Infeasible => {
            let mut rep = root;
            rep.bnb_nodes = nodes_solved;
            return rep;
        }
        SolveStatus::Unbounded => {
            let mut rep = root;
            rep.bnb_nodes = nodes_solved;
            return rep;
        }
        _ => {}
    }
    let root_bound = if root.status == SolveStatus::Optimal { root.objective } else { f64::INFINITY };

    if options.strategy == BinaryStrategy::RelaxRound {
        if let Some(x) = &root.x {
            let assign = round_repair(prog, x, &bins);
            try_incumbent(prog, &assign, options.socp_tol, &mut incumbent, &mut solves);
        }
        return finish(incumbent, root_bound, nodes_solved + solves, options, false);
    }

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut next_id = 0u64;

    if let Some(x) = root.x.as_ref() {
        if root.status == SolveStatus::Optimal && is_integral(x, &bins, options.integer_tol) {
            let assign: Vec<(usize, u8)> = bins.iter().map(|&j| (j, x[j].round() as u8)).collect();
            try_incumbent(prog, &assign, options.socp_tol, &mut incumbent, &mut solves);
            return finish(incumbent, root_bound, nodes_solved + solves, options, true);
        }
        // rounding incumbent from the fractional root
        let assign = round_repair(prog, x, &bins);
        try_incumbent(prog, &assign, options.socp_tol, &mut incumbent, &mut solves);
        if let Some(j) = select_branch_var(prog, x, &bins, &[]) {
            for v in [1u8, 0u8] {
                heap.push(Node { bound: root_bound, id: next_id, fixes: vec![(j, v)] });
                next_id += 1;
            }
        }
    }

    while let Some(node) = heap.pop() {
        if let Some(inc) = &incumbent {
            if gap_closed(node.bound, inc.objective) {
                // best-first order: every remaining node is dominated
                return finish(incumbent, node.bound, nodes_solved, options, true);
            }
        }
        if nodes_solved >= options.node_limit {
            let open_bound = node.bound;
            return finish(incumbent, open_bound, nodes_solved, options, false);
        }
        let rep = solve_with_fixes(prog, &node.fixes, options.socp_tol);
        nodes_solved += 1;
        match rep.status {
            SolveStatus::Infeasible => continue,
            SolveStatus::Optimal => {
                // child bound cannot exceed the parent's (restriction); clip
                // against it to keep the tree monotone under solver noise
                let bound = rep.objective.min(node.bound);
                if let Some(inc) = &incumbent {
                    if gap_closed(bound, inc.objective) {
                        continue;
                    }
                }
                let x = rep.x.as_ref().expect("optimal SOCP carries a point");
                if is_integral(x, &bins, options.integer_tol) {
                    let assign: Vec<(usize, u8)> =
                        bins.iter().map(|&j| (j, x[j].round() as u8)).collect();
                    try_incumbent(prog, &assign, options.socp_tol, &mut incumbent, &mut solves);
                    continue;
                }
                if let Some(j) = select_branch_var(prog, x, &bins, &node.fixes) {
                    for v in [1u8, 0u8] {
                        let mut fixes = node.fixes.clone();
                        fixes.push((j, v));
                        heap.push(Node { bound, id: next_id, fixes });
                        next_id += 1;
                    }
                } else {
                    // all binaries fixed but point not integral: numerical noise
                    let assign = round_repair(prog, x, &bins);
                    try_incumbent(prog, &assign, options.socp_tol, &mut incumbent, &mut solves);
                }
            }
            _ => {
                // numerical trouble: cannot prune this region safely, branch blindly
                numerical_failures += 1;
                let fallback = rep.x.clone();
                let pick = match &fallback {
                    Some(x) => select_branch_var(prog, x, &bins, &node.fixes),
                    None => bins.iter().copied().find(|j| !node.fixes.iter().any(|&(k, _)| k == *j)),
                };
                if let Some(j) = pick {
                    for v in [1u8, 0u8] {
                        let mut fixes = node.fixes.clone();
                        fixes.push((j, v));
                        heap.push(Node { bound: node.bound, id: next_id, fixes });
                        next_id += 1;
                    }
                }
            }
        }
    }

    // tree exhausted; without any feasible leaf, "infeasible" is only safe
    // when no node failed numerically
    if incumbent.is_none() && numerical_failures > 0 {
        let mut rep = SolveReport::failed(SolveStatus::Numerical);
        rep.bnb_nodes = nodes_solved;
        return rep;
    }
    let bound = incumbent.as_ref().map(|i| i.objective).unwrap_or(f64::NEG_INFINITY);
    finish(incumbent, bound, nodes_solved, options, true)
}

fn finish(
    incumbent: Option<Incumbent>,
    remaining_bound: f64,
    nodes: usize,
    options: &MisocpOptions,
    exhausted: bool,
) -> SolveReport {
    match incumbent {
        Some(inc) => {
            let gap_ok = exhausted
                || remaining_bound - inc.objective
                    <= options.rel_gap * inc.objective.abs().max(1e-9);
            let mut rep = inc.report;
            rep.status = if gap_ok { SolveStatus::Optimal } else { SolveStatus::NodeLimit };
            rep.bnb_nodes = nodes;
            rep
        }
        None => {
            let mut rep = SolveReport::failed(if exhausted {
                SolveStatus::Infeasible
            } else {
                SolveStatus::NodeLimit
            });
            rep.residuals = KktResiduals { primal: f64::NAN, dual: f64::NAN, relgap: f64::NAN };
            rep.bnb_nodes = nodes;
            rep
        }
    }
}
