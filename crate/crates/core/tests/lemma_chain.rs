//! End-to-end run on a small disk: relax the affine seed and run the diagnostics.

use equivar::coxeter::{dihedral_generators, generate_group, orbit_and_stabilizer};
use equivar::field::{build_grid, equivariance_residual, seed_affine, symmetrize};
use equivar::flow::{run_to_equilibrium, FlowConfig};
use equivar::potential::{make_triangle_potential, QSpec};
use equivar::verify::{
    decay_fit, energy_scaling_sweep, kato_check, positivity_check, subharmonic_check, SweepParams,
};
use std::sync::Arc;

#[test]
fn relaxed_triangle_field_passes_the_chain() {
    let grp = generate_group(2, &dihedral_generators(3)).unwrap();
    let orb = orbit_and_stabilizer(&grp, &[1.0, 0.0]).unwrap();
    let spec = make_triangle_potential().unwrap();
    let q = QSpec::distance(&[1.0, 0.0], spec.m);
    let h = 0.1;
    let g = Arc::new(build_grid(2, 6.0, h).unwrap());
    let seed = seed_affine(g, &grp, &orb).unwrap();
    let cfg = FlowConfig::for_grid(h, 2);
    let res = run_to_equilibrium(&seed, &spec, &cfg, &grp).unwrap();

    assert!(res.worst_energy_increase() <= 1e-12);
    assert!(res.max_norm <= spec.m + 0.1);
    // averaging fires only once the residual passes 5h^2, so the stored field may sit just above it
    let eq = equivariance_residual(&res.field, &grp).unwrap();
    assert!(eq <= 1.5 * 5.0 * h * h, "{eq}");
    let sym = symmetrize(&res.field, &grp).unwrap();
    assert!(equivariance_residual(&sym, &grp).unwrap() <= 5.0 * h * h);
    let pos = positivity_check(&res);
    assert!(pos.pass, "{pos:?}");
    assert!(pos.strong_margin > 0.0);

    let sub = subharmonic_check(&res.field, &q, &orb, 100, 3, res.converged).unwrap();
    assert!(sub.pass, "{}", sub.min);
    let kato = kato_check(&res.field, &q, 50, 3).unwrap();
    assert!(kato.pass, "{}", kato.min);
    let fit = decay_fit(&res.field, &orb, 1.0, 2.5).unwrap();
    assert!(fit.k > 0.0 && fit.r2 >= 0.95, "{fit:?}");

    let sweep = energy_scaling_sweep(
        &[3.0, 4.5, 6.0],
        &SweepParams {
            h: 0.2,
            spec: spec.clone(),
            group: grp.clone(),
            orbit: orb.clone(),
            flow: FlowConfig::for_grid(0.2, 2),
            require_convergence: false,
        },
    )
    .unwrap();
    assert!((sweep.slope - 1.0).abs() <= 0.2, "{}", sweep.slope);
}
