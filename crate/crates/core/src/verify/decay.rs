//! Exponential decay away from the mirrors, energy growth in R, and positivity.

use crate::coxeter::{OrbitInfo, ReflectionGroup};
use crate::error::{Error, Result};
use crate::field::{build_grid, energy, seed_affine, VectorField};
use crate::flow::{run_to_equilibrium, FlowConfig, FlowResult};
use crate::potential::PotentialSpec;
use serde::Serialize;
use std::sync::Arc;

/// Fewest nodes a decay fit accepts.
pub const MIN_DECAY_NODES: usize = 50;

const RESIDUAL_FLOOR: f64 = 1e-14;

/// |u - a1| ~ K exp(-k dist_D), with the coefficient of determination of the log fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    #[serde(rename = "K")]
    pub big_k: f64,
    pub k: f64,
    pub r2: f64,
    pub nodes: usize,
}

/// Ordinary least squares y = a + b x; returns (a, b, R^2).
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (a, b, r2)
}

/// Fits log|u - a1| against dist_D over nodes of D with dist_D in [d_min, d_max].
pub fn decay_fit(u: &VectorField, orbit: &OrbitInfo, d_min: f64, d_max: f64) -> Result<DecayFit> {
    let g = &u.grid;
    if !(d_min < d_max) {
        return Err(Error::Precondition(format!(
            "empty decay band [{d_min}, {d_max}]"
        )));
    }
    let a1 = &orbit.base_point;
    let mut deepest: f64 = 0.0;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 0..g.len() {
        let reg = orbit.region(g.point(i));
        if !reg.in_d {
            continue;
        }
        deepest = deepest.max(reg.dist_d);
        if reg.dist_d < d_min || reg.dist_d > d_max {
            continue;
        }
        let r = u.at(i).iter().zip(a1).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if r > RESIDUAL_FLOOR {
            xs.push(reg.dist_d);
            ys.push(r.ln());
        }
    }
    if d_max > deepest + 1e-12 {
        return Err(Error::Precondition(format!(
            "decay band reaches {d_max} but the grid only reaches dist_D = {deepest}"
        )));
    }
    if xs.len() < MIN_DECAY_NODES {
        return Err(Error::InsufficientNodes {
            found: xs.len(),
            needed: MIN_DECAY_NODES,
        });
    }
    let (a, b, r2) = linear_fit(&xs, &ys);
    Ok(DecayFit {
        big_k: a.exp(),
        k: -b,
        r2,
        nodes: xs.len(),
    })
}

/// Inputs shared by every radius of an energy sweep. The mesh width is the
/// same for all radii.
#[derive(Debug, Clone)]
pub struct SweepParams {
    pub h: f64,
    pub spec: PotentialSpec,
    pub group: ReflectionGroup,
    pub orbit: OrbitInfo,
    pub flow: FlowConfig,
    /// Fail with `NoConvergence` when a radius stops short of the residual tolerance.
    pub require_convergence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergySweep {
    pub radii: Vec<f64>,
    pub energies: Vec<f64>,
    pub seed_energies: Vec<f64>,
    pub residuals: Vec<f64>,
    pub converged: Vec<bool>,
    /// Slope of log J against log R for the relaxed fields.
    pub slope: f64,
    pub seed_slope: f64,
}

/// Relaxes the affine seed at every radius (in parallel) and fits log J against log R.
pub fn energy_scaling_sweep(radii: &[f64], params: &SweepParams) -> Result<EnergySweep> {
    if radii.len() < 3 {
        return Err(Error::Precondition(format!(
            "energy sweep needs at least 3 radii, got {}",
            radii.len()
        )));
    }
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Precondition("radii must be positive".into()));
    }
    let n = params.group.dim();
    let runs: Vec<Result<(f64, FlowResult)>> = std::thread::scope(|s| {
        let handles: Vec<_> = radii
            .iter()
            .map(|&r| {
                s.spawn(move || {
                    let grid = Arc::new(build_grid(n, r, params.h)?);
                    let seed = seed_affine(grid, &params.group, &params.orbit)?;
                    let j0 = energy(&seed, &params.spec);
                    let res = run_to_equilibrium(&seed, &params.spec, &params.flow, &params.group)?;
                    Ok((j0, res))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    let mut out = EnergySweep {
        radii: radii.to_vec(),
        energies: Vec::new(),
        seed_energies: Vec::new(),
        residuals: Vec::new(),
        converged: Vec::new(),
        slope: f64::NAN,
        seed_slope: f64::NAN,
    };
    for (&r, run) in radii.iter().zip(runs) {
        let (j0, res) = run?;
        if params.require_convergence && !res.converged {
            return Err(Error::NoConvergence {
                radius: r,
                residual: res.residual,
            });
        }
        out.energies.push(energy(&res.field, &params.spec));
        out.seed_energies.push(j0);
        out.residuals.push(res.residual);
        out.converged.push(res.converged);
    }
    let logr: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let logj: Vec<f64> = out.energies.iter().map(|j| j.ln()).collect();
    let logj0: Vec<f64> = out.seed_energies.iter().map(|j| j.ln()).collect();
    out.slope = linear_fit(&logr, &logj).1;
    out.seed_slope = linear_fit(&logr, &logj0).1;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivityReport {
    /// Minimum over recorded checkpoints of the positivity margin on the closed region.
    pub min: f64,
    /// Margin on interior region nodes at the final step.
    pub strong_margin: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Positivity along a recorded flow; passes when the minimum is at least -5h.
pub fn positivity_check(history: &FlowResult) -> PositivityReport {
    let tolerance = 5.0 * history.field.grid.h();
    let min = history
        .positivity_samples
        .iter()
        .map(|s| s.min)
        .fold(history.positivity_min, f64::min);
    PositivityReport {
        min,
        strong_margin: history.strong_positivity_margin,
        tolerance,
        pass: min >= -tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coxeter::{dihedral_generators, generate_group, orbit_and_stabilizer};
    use crate::field::build_grid;
    use proptest::prelude::*;

    fn triangle_orbit() -> (ReflectionGroup, OrbitInfo) {
        let grp = generate_group(2, &dihedral_generators(3)).unwrap();
        let orb = orbit_and_stabilizer(&grp, &[1.0, 0.0]).unwrap();
        (grp, orb)
    }

    fn planted(k: f64, big_k: f64, h: f64) -> (VectorField, OrbitInfo) {
        let (_, orb) = triangle_orbit();
        let g = Arc::new(build_grid(2, 8.0, h).unwrap());
        let o = orb.clone();
        let u = VectorField::from_fn(g, move |x| {
            let d = o.region(x).dist_d;
            let s = big_k * (-k * d).exp();
            let (c, sn) = (0.3f64.cos(), 0.3f64.sin());
            vec![1.0 + s * c, s * sn]
        });
        (u, orb)
    }

    #[test]
    fn planted_exponent_is_recovered() {
        let (u, orb) = planted(2.0, 1.0, 0.1);
        let fit = decay_fit(&u, &orb, 1.0, 3.0).unwrap();
        assert!((fit.k - 2.0).abs() < 1e-6, "{}", fit.k);
        assert!((fit.big_k - 1.0).abs() < 1e-6);
        assert!((fit.r2 - 1.0).abs() < 1e-6);
        assert!(fit.nodes >= MIN_DECAY_NODES);
    }

    #[test]
    fn constant_field_has_no_band() {
        let (_, orb) = triangle_orbit();
        let g = Arc::new(build_grid(2, 8.0, 0.1).unwrap());
        let u = VectorField::constant(g, &[1.0, 0.0]);
        assert!(matches!(
            decay_fit(&u, &orb, 1.0, 3.0),
            Err(Error::InsufficientNodes { found: 0, .. })
        ));
    }

    #[test]
    fn band_beyond_grid_is_rejected() {
        let (u, orb) = planted(1.0, 1.0, 0.2);
        assert!(matches!(decay_fit(&u, &orb, 1.0, 9.0), Err(Error::Precondition(_))));
        assert!(matches!(decay_fit(&u, &orb, 3.0, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn linear_fit_on_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 0.25 * x).collect();
        let (a, b, r2) = linear_fit(&xs, &ys);
        assert!((a - 1.5).abs() < 1e-14 && (b + 0.25).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sweep_needs_three_radii() {
        let (grp, orb) = triangle_orbit();
        let params = SweepParams {
            h: 0.2,
            spec: crate::potential::make_triangle_potential().unwrap(),
            group: grp,
            orbit: orb,
            flow: FlowConfig::for_grid(0.2, 2),
            require_convergence: false,
        };
        assert!(matches!(
            energy_scaling_sweep(&[4.0, 8.0], &params),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn seed_energy_scales_linearly() {
        let (grp, orb) = triangle_orbit();
        let mut flow = FlowConfig::for_grid(0.2, 2);
        flow.max_steps = 1;
        let params = SweepParams {
            h: 0.2,
            spec: crate::potential::make_triangle_potential().unwrap(),
            group: grp,
            orbit: orb,
            flow,
            require_convergence: false,
        };
        let sw = energy_scaling_sweep(&[4.0, 6.0, 8.0, 12.0], &params).unwrap();
        assert!((sw.seed_slope - 1.0).abs() < 0.2, "{}", sw.seed_slope);
        assert_eq!(sw.energies.len(), 4);
        assert!(sw.converged.iter().all(|c| !c));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn planted_exponents_to_three_digits(k in 0.3f64..4.0, big_k in 0.05f64..3.0) {
            let (u, orb) = planted(k, big_k, 0.2);
            let fit = decay_fit(&u, &orb, 1.0, 3.0).unwrap();
            prop_assert!((fit.k - k).abs() <= 5e-4 * k);
            prop_assert!((fit.big_k - big_k).abs() <= 1e-3 * big_k);
        }
    }
}
