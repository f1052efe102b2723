use shearpf::scenarios::{build_direct_shear, curve_summary, fracture_energy_from_curve, DirectShearConfig};
use shearpf::solver::{run_load_program, SolverConfig};
use std::time::Instant;

fn main() {
    let mut cfg = DirectShearConfig::default();
    cfg.h_band = 2.0e-3;
    cfg.h_coarse = 8.0e-3;
    let sc = build_direct_shear(&cfg).unwrap();
    eprintln!("elements: {}, nodes: {}", sc.problem.model.n_elements(), sc.problem.model.n_nodes());
    let t0 = Instant::now();
    let out = run_load_program(&sc.problem, &SolverConfig::default(), None).unwrap();
    eprintln!("wall: {:.1?} steps {} rejected {} sweeps {} newton {}",
        t0.elapsed(), out.records.len(), out.diagnostics.rejected_steps,
        out.diagnostics.total_sweeps, out.diagnostics.total_newton_iters);
    let curve: Vec<(f64, f64)> = out.records.iter().map(|r| (r.prescribed, r.reaction)).collect();
    for r in out.records.iter().step_by(6) {
        eprintln!("t={:.4} U={:.4}mm F={:.3}kN sw={} dmax={:.3} gap={:.2e} ddrop={:.2e} clip={}",
            r.time, r.prescribed*1e3, r.reaction/1e3, r.sweeps, r.max_d, r.equilibrium_gap, r.d_drop, r.clipped_dofs);
    }
    let s = curve_summary(&curve).unwrap();
    eprintln!("PEAK {:.3} kN at U={:.3} mm; RESIDUAL {:.3} kN", s.peak/1e3, s.peak_u*1e3, s.residual/1e3);
    if let Ok(e) = fracture_energy_from_curve(&curve, s.residual) {
        eprintln!("fracture energy: {:.3} J (theory 14.7 with 10mm notch)", e);
    }
    eprintln!("worst d_drop {:.3e}, worst gap {:.3e}, clipped total {}",
        out.diagnostics.worst_d_drop, out.diagnostics.worst_equilibrium_gap, out.diagnostics.clipped_total);
}
