//! Conic optimization for the network design toolkit: a second-order cone
//! program container, a homogeneous self-dual interior-point solver, and a
//! best-first branch-and-bound layer for binary variables.
//!
//! Entry points:
//! - [`solve_socp`] / [`solve_socp_with`]: continuous SOCP (binaries are
//!   treated as relaxed to their [0,1] boxes unless their bounds are fixed).
//! - [`solve_misocp`]: mixed-integer SOCP via branch-and-bound.

pub mod bnb;
pub mod cones;
pub mod ipm;
pub mod linalg;
pub mod presolve;
pub mod program;

pub use bnb::{solve_misocp_with, BinaryStrategy, MisocpOptions};
pub use ipm::{IpmSettings, IpmStatus};
pub use program::{AffExpr, ConeKind, ConicProgram, ProgramError, StandardForm};

use presolve::presolve;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NodeLimit,
    Numerical,
}

#[derive(Debug, Clone, Copy)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub relgap: f64,
}

/// Standard-form data and raw primal-dual vectors of the system actually
/// handed to the interior-point method (after presolve), kept so external
/// scripts can recompute KKT residuals independently.
#[derive(Debug, Clone)]
pub struct StandardCertificate {
    pub form: StandardForm,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub s: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Objective value in the program's maximize sense (NaN without a point).
    pub objective: f64,
    /// Primal point in the original variable space.
    pub x: Option<Vec<f64>>,
    pub residuals: KktResiduals,
    pub iterations: usize,
    pub bnb_nodes: usize,
    pub certificate: Option<StandardCertificate>,
}

impl SolveReport {
    pub(crate) fn failed(status: SolveStatus) -> Self {
        SolveReport {
            status,
            objective: f64::NAN,
            x: None,
            residuals: KktResiduals { primal: f64::NAN, dual: f64::NAN, relgap: f64::NAN },
            iterations: 0,
            bnb_nodes: 0,
            certificate: None,
        }
    }
}

/// Solve the continuous relaxation (or a fully fixed instance) of `prog`
/// with the default 1e-7 tolerance.
pub fn solve_socp(prog: &ConicProgram) -> Result<SolveReport, ProgramError> {
    solve_socp_with(prog, 1e-7)
}

pub fn solve_socp_with(prog: &ConicProgram, tol: f64) -> Result<SolveReport, ProgramError> {
    prog.validate()?;
    let pre = presolve(prog);
    if pre.infeasible {
        return Ok(SolveReport::failed(SolveStatus::Infeasible));
    }
    if pre.reduced.n_vars() == 0 {
        // everything pinned by the presolve; feasibility already verified
        let x = pre.recover(&[]);
        let objective = pre.objective_offset;
        return Ok(SolveReport {
            status: SolveStatus::Optimal,
            objective,
            x: Some(x),
            residuals: KktResiduals { primal: 0.0, dual: 0.0, relgap: 0.0 },
            iterations: 0,
            bnb_nodes: 0,
            certificate: None,
        });
    }
    let sf = pre.reduced.to_standard_form();
    if sf.g.n_rows == 0 {
        return Ok(SolveReport::failed(SolveStatus::Numerical));
    }
    let settings = IpmSettings { tol, ..IpmSettings::default() };
    let sol = ipm::solve_standard(&sf, &settings);
    let report = match sol.status {
        IpmStatus::Optimal | IpmStatus::MaxIter => {
            let x_full = pre.recover(&sol.x);
            let objective: f64 = prog
                .objective
                .iter()
                .zip(&x_full)
                .map(|(c, v)| c * v)
                .sum();
            SolveReport {
                status: if sol.status == IpmStatus::Optimal {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::Numerical
                },
                objective,
                x: Some(x_full),
                residuals: KktResiduals { primal: sol.pres, dual: sol.dres, relgap: sol.relgap },
                iterations: sol.iterations,
                bnb_nodes: 0,
                certificate: Some(StandardCertificate { form: sf, x: sol.x, y: sol.y, z: sol.z, s: sol.s }),
            }
        }
        IpmStatus::PrimalInfeasible => SolveReport::failed(SolveStatus::Infeasible),
        IpmStatus::DualInfeasible => SolveReport::failed(SolveStatus::Unbounded),
        IpmStatus::Numerical => {
            // best iterate attached, with its actual residuals
            let x_full = pre.recover(&sol.x);
            let objective: f64 = prog.objective.iter().zip(&x_full).map(|(c, v)| c * v).sum();
            SolveReport {
                status: SolveStatus::Numerical,
                objective,
                x: Some(x_full),
                residuals: KktResiduals { primal: sol.pres, dual: sol.dres, relgap: sol.relgap },
                iterations: sol.iterations,
                bnb_nodes: 0,
                certificate: Some(StandardCertificate { form: sf, x: sol.x, y: sol.y, z: sol.z, s: sol.s }),
            }
        }
    };
    Ok(report)
}

/// Solve a mixed-integer SOCP by best-first branch-and-bound.
pub fn solve_misocp(prog: &ConicProgram, options: &MisocpOptions) -> Result<SolveReport, ProgramError> {
    prog.validate()?;
    Ok(solve_misocp_with(prog, options))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// maximize w1 + t over ||(w1,w2)||^2 <= 4 a, a binary; with a forced on
    /// by the objective the optimum is w1 = 2.
    fn small_mip() -> ConicProgram {
        let mut p = ConicProgram::new();
        let a = p.add_binary("a");
        let w1 = p.add_var("w1", None, None);
        let w2 = p.add_var("w2", None, None);
        p.set_objective(w1, 1.0);
        p.set_objective(a, -0.5);
        p.add_rsoc(vec![
            AffExpr::scaled_var(a, 4.0),
            AffExpr::constant(0.5),
            AffExpr::var(w1),
            AffExpr::var(w2),
        ]);
        p
    }

    #[test]
    fn misocp_beats_or_matches_enumeration() {
        let p = small_mip();
        let rep = solve_misocp(&p, &MisocpOptions::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal);
        // enumeration: a=0 -> w=0 obj 0; a=1 -> w1=2 obj 1.5
        assert_relative_eq!(rep.objective, 1.5, max_relative = 1e-5);
        let x = rep.x.unwrap();
        assert_eq!(x[0], 1.0); // binary exact after polish
    }

    #[test]
    fn fixed_binaries_degenerate_to_socp() {
        let mut p = small_mip();
        p.fix_var(0, 0.0);
        let rep = solve_misocp(&p, &MisocpOptions::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal);
        assert!(rep.objective.abs() < 1e-6);
        assert_eq!(rep.bnb_nodes, 1);
    }

    #[test]
    fn assignment_row_is_respected() {
        // two binaries, exactly one on; turning on the second pays more
        let mut p = ConicProgram::new();
        let a0 = p.add_binary("a0");
        let a1 = p.add_binary("a1");
        let t = p.add_var("t", Some(0.0), None);
        p.set_objective(t, 1.0);
        p.add_eq(vec![(a0, 1.0), (a1, 1.0)], 1.0);
        // t <= 1*a0 + 3*a1
        p.add_le(vec![(t, 1.0), (a0, -1.0), (a1, -3.0)], 0.0);
        let rep = solve_misocp(&p, &MisocpOptions::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal);
        assert_relative_eq!(rep.objective, 3.0, max_relative = 1e-5);
        let x = rep.x.unwrap();
        assert_eq!((x[a0], x[a1]), (0.0, 1.0));
    }

    #[test]
    fn determinism_identical_reports() {
        let p = small_mip();
        let r1 = solve_misocp(&p, &MisocpOptions::default()).unwrap();
        let r2 = solve_misocp(&p, &MisocpOptions::default()).unwrap();
        assert_eq!(r1.bnb_nodes, r2.bnb_nodes);
        assert_eq!(r1.objective.to_bits(), r2.objective.to_bits());
        assert_eq!(r1.x.unwrap(), r2.x.unwrap());
    }

    #[test]
    fn infeasible_integer_problem_reported() {
        let mut p = ConicProgram::new();
        let a0 = p.add_binary("a0");
        let a1 = p.add_binary("a1");
        p.add_eq(vec![(a0, 1.0), (a1, 1.0)], 1.0);
        p.add_ge(vec![(a0, 1.0)], 2.0); // impossible
        let rep = solve_misocp(&p, &MisocpOptions::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Infeasible);
    }
}
