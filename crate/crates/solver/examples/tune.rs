//! Internal tuning harness: solve a dumped program under varied settings.

use vhetnet_solver::ipm::{solve_standard, IpmSettings};
use vhetnet_solver::presolve::presolve;
use vhetnet_solver::ConicProgram;

fn main() {
    let path = std::env::args().nth(1).expect("usage: tune <program.json>");
    let prog = ConicProgram::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
    let pre = presolve(&prog);
    let sf = pre.reduced.to_standard_form();
    println!("n={} p={} m={} socs={}", sf.c.len(), sf.a.n_rows, sf.g.n_rows, sf.dims.socs.len());
    {
        let rep = vhetnet_solver::solve_socp_with(&prog, 1e-6).unwrap();
        println!(
            "solve_socp       -> {:?} iters {:2} pres {:9.2e} dres {:9.2e} rgap {:9.2e} obj {:.6e}",
            rep.status, rep.iterations, rep.residuals.primal, rep.residuals.dual, rep.residuals.relgap, rep.objective
        );
        if let Some(cert) = &rep.certificate {
            let f = &cert.form;
            let n = f.c.len();
            let mut aty = vec![0.0; n];
            for i in 0..f.a.n_rows {
                let (cols, vals) = f.a.row(i);
                for (c, v) in cols.iter().zip(vals) { aty[*c] += v * cert.y[i]; }
            }
            let mut gtz = vec![0.0; n];
            for i in 0..f.g.n_rows {
                let (cols, vals) = f.g.row(i);
                for (c, v) in cols.iter().zip(vals) { gtz[*c] += v * cert.z[i]; }
            }
            let mut worst: Vec<(f64, usize)> = (0..n)
                .map(|j| ((f.c[j] + aty[j] + gtz[j]).abs(), j))
                .collect();
            worst.sort_by(|a, b| b.0.total_cmp(&a.0));
            for (r, j) in worst.iter().take(5) {
                println!("   coord {j} ({}): res {r:9.2e} c {:9.2e} aty {:9.2e} gtz {:9.2e}",
                    pre.reduced.names.get(*j).map(|s| s.as_str()).unwrap_or("?"),
                    f.c[*j], aty[*j], gtz[*j]);
            }
        }
    }
    for (name, settings) in [
        ("base            ", IpmSettings { verbose: false, ..IpmSettings::default() }),
        ("reg 1e-12       ", IpmSettings { static_reg: 1e-12, verbose: false, ..IpmSettings::default() }),
        ("reg 1e-8        ", IpmSettings { static_reg: 1e-8, verbose: false, ..IpmSettings::default() }),
        ("step 0.95       ", IpmSettings { step_fraction: 0.95, verbose: false, ..IpmSettings::default() }),
        ("step 0.9        ", IpmSettings { step_fraction: 0.90, verbose: false, ..IpmSettings::default() }),
        ("equil 30        ", IpmSettings { equil_rounds: 30, verbose: false, ..IpmSettings::default() }),
        ("equil 0         ", IpmSettings { equil_rounds: 0, verbose: false, ..IpmSettings::default() }),
        ("combo 0.95/1e-12", IpmSettings { step_fraction: 0.95, static_reg: 1e-12, verbose: false, ..IpmSettings::default() }),
    ] {
        let t0 = std::time::Instant::now();
        let sol = solve_standard(&sf, &settings);
        println!(
            "{name} -> {:?} iters {:2} pres {:9.2e} dres {:9.2e} rgap {:9.2e} obj {:.6e}  ({:.1} ms)",
            sol.status, sol.iterations, sol.pres, sol.dres, sol.relgap, -sol.pcost,
            t0.elapsed().as_secs_f64() * 1e3
        );
    }
}

// Appended diagnostic: per-coordinate stationarity breakdown of the final point.
#[allow(dead_code)]
fn unused() {}
