//! Weak-form pairings against random nonnegative bumps.

use super::for_each_in_box;
use crate::coxeter::OrbitInfo;
use crate::error::{Error, Result};
use crate::field::{laplacian, BallGrid, ScalarField, VectorField};
use crate::mat::{dot, norm};
use crate::potential::QSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const PLACEMENT_TRIES: usize = 10_000;

/// Tensor bump prod_k (1 - t_k^2)^2, t_k = (x_k - center_k)/width, on its grid support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub width: f64,
    pub support: Vec<(usize, f64)>,
}

impl Bump {
    pub fn new(grid: &BallGrid, center: &[f64], width: f64) -> Self {
        let mut support = Vec::new();
        for_each_in_box(grid, center, width, |i| {
            let v: f64 = grid
                .point(i)
                .iter()
                .zip(center)
                .map(|(x, c)| {
                    let t = (x - c) / width;
                    let s = (1.0 - t * t).max(0.0);
                    s * s
                })
                .product();
            if v > 0.0 {
                support.push((i, v));
            }
        });
        Bump {
            center: center.to_vec(),
            width,
            support,
        }
    }

    pub fn max(&self) -> f64 {
        self.support.iter().map(|(_, v)| *v).fold(0.0, f64::max)
    }

    /// Natural size of a gradient pairing with this bump: max * width^(n-1).
    pub fn scale(&self, n: usize) -> f64 {
        self.max() * self.width.powi(n as i32 - 1)
    }

    /// sum_i f_i bump_i h^n.
    pub fn pair(&self, f: &[f64], cell: f64) -> f64 {
        self.support.iter().map(|&(i, v)| f[i] * v).sum::<f64>() * cell
    }
}

/// Where random bumps may be placed.
#[derive(Debug, Clone, Copy)]
pub enum BumpRegion<'a> {
    /// Support strictly inside the ball, one cell away from the rim.
    Interior,
    /// Support inside D with dist_D > margin and inside the ball.
    InD { orbit: &'a OrbitInfo, margin: f64 },
}

fn support_box_ok(grid: &BallGrid, center: &[f64], width: f64, region: BumpRegion) -> bool {
    let n = grid.dim();
    let h = grid.h();
    if norm(center) + width * (n as f64).sqrt() > grid.radius() - h {
        return false;
    }
    match region {
        BumpRegion::Interior => true,
        BumpRegion::InD { orbit, margin } => {
            // D is an intersection of half-spaces, so checking the box corners suffices
            (0..1usize << n).all(|mask| {
                let corner: Vec<f64> = (0..n)
                    .map(|k| center[k] + if mask >> k & 1 == 1 { width } else { -width })
                    .collect();
                orbit
                    .region_d_normals
                    .iter()
                    .all(|eta| dot(&corner, eta) > margin)
            })
        }
    }
}

/// A bump with random center and width in [4h, R/4] whose support lies in `region`.
/// Trial `trial` of root seed `seed` always draws the same bump.
pub fn random_bump(grid: &BallGrid, region: BumpRegion, seed: u64, trial: u64) -> Result<Bump> {
    let n = grid.dim();
    let (lo, hi) = (4.0 * grid.h(), (grid.radius() / 4.0).max(4.0 * grid.h()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let r = grid.radius();
    for _ in 0..PLACEMENT_TRIES {
        let width = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-r..r)).collect();
        if support_box_ok(grid, &center, width, region) {
            let b = Bump::new(grid, &center, width);
            if !b.support.is_empty() {
                return Ok(b);
            }
        }
    }
    Err(Error::InsufficientNodes {
        found: 0,
        needed: 1,
    })
}

/// Result of the Kato pairing check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KatoReport {
    /// min over bumps of <Q(u), Lap psi> - <<Lap u, Q_u(u)>, psi>.
    pub min: f64,
    /// Largest |weak - strong| / max(|weak|, |strong|, 1e-300) over bumps, with
    /// strong = <Lap Q(u) - <Lap u, Q_u(u)>, psi>.
    pub strong_weak_gap: f64,
    pub tolerance: f64,
    pub trials: usize,
    pub pass: bool,
}

/// Distributional Kato inequality Lap Q(u) >= <Lap u, Q_u(u)> tested on
/// `trials` random interior bumps.
pub fn kato_check(u: &VectorField, q: &QSpec, trials: usize, seed: u64) -> Result<KatoReport> {
    if trials < 20 {
        return Err(Error::Precondition(format!("kato_check needs at least 20 trials, got {trials}")));
    }
    let g = &u.grid;
    let n = g.dim();
    let cell = g.cell_volume();
    let lap_u = laplacian(u);
    let mut qv = Vec::with_capacity(g.len());
    let mut chain = Vec::with_capacity(g.len());
    let mut grad = vec![0.0; n];
    for i in 0..g.len() {
        qv.push(q.value_and_gradient(u.at(i), &mut grad));
        chain.push(dot(lap_u.at(i), &grad));
    }
    let qf = ScalarField::new(u.grid.clone(), qv)?;
    let lap_q = qf.laplacian();
    let strong_density: Vec<f64> = lap_q.values.iter().zip(&chain).map(|(a, b)| a - b).collect();
    let mut min = f64::INFINITY;
    let mut gap = 0.0f64;
    let mut tolerance = 0.0f64;
    for t in 0..trials {
        let b = random_bump(g, BumpRegion::Interior, seed, t as u64)?;
        let mut dense = vec![0.0; g.len()];
        b.support.iter().for_each(|&(i, w)| dense[i] = w);
        let psi = ScalarField::new(u.grid.clone(), dense)?;
        let lap_psi = psi.laplacian();
        let weak = qf.values.iter().zip(&lap_psi.values).map(|(a, b)| a * b).sum::<f64>() * cell
            - b.pair(&chain, cell);
        let strong = b.pair(&strong_density, cell);
        min = min.min(weak);
        let denom = weak.abs().max(strong.abs()).max(1e-300);
        gap = gap.max((weak - strong).abs() / denom);
        tolerance = tolerance.max(10.0 * g.h() * b.scale(n));
    }
    Ok(KatoReport {
        min,
        strong_weak_gap: gap,
        tolerance,
        trials,
        pass: min >= -tolerance,
    })
}

/// Result of the subharmonicity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubharmonicReport {
    /// min over bumps of -integral grad Q(u) . grad phi.
    pub min: f64,
    /// Smallest pairing divided by the bump's scale.
    pub min_scaled: f64,
    pub tolerance: f64,
    pub trials: usize,
    pub pass: bool,
    pub warnings: Vec<String>,
}

/// Weak subharmonicity of Q(u) in D: -integral grad Q(u) . grad phi >= -10 h scale
/// for random bumps phi supported where dist_D > 2h.
pub fn subharmonic_check(
    u: &VectorField,
    q: &QSpec,
    orbit: &OrbitInfo,
    trials: usize,
    seed: u64,
    equilibrium: bool,
) -> Result<SubharmonicReport> {
    subharmonic_with(u, |v| q.value(v), orbit, trials, seed, equilibrium)
}

pub(crate) fn subharmonic_with(
    u: &VectorField,
    qfun: impl Fn(&[f64]) -> f64,
    orbit: &OrbitInfo,
    trials: usize,
    seed: u64,
    equilibrium: bool,
) -> Result<SubharmonicReport> {
    if trials == 0 {
        return Err(Error::Precondition("subharmonic_check needs at least one trial".into()));
    }
    let g = &u.grid;
    let n = g.dim();
    let cell = g.cell_volume();
    let qf = ScalarField::new(u.grid.clone(), (0..g.len()).map(|i| qfun(u.at(i))).collect())?;
    // summation by parts: -sum_edges dQ dphi / h^2 h^n = <Lap Q, phi>
    let lap_q = qf.laplacian();
    let region = BumpRegion::InD {
        orbit,
        margin: 2.0 * g.h(),
    };
    let mut min = f64::INFINITY;
    let mut min_scaled = f64::INFINITY;
    let mut tolerance = 0.0f64;
    let mut pass = true;
    for t in 0..trials {
        let b = random_bump(g, region, seed, t as u64)?;
        let v = b.pair(&lap_q.values, cell);
        let tol = 10.0 * g.h() * b.scale(n);
        pass &= v >= -tol;
        min = min.min(v);
        min_scaled = min_scaled.min(v / b.scale(n));
        tolerance = tolerance.max(tol);
    }
    let mut warnings = Vec::new();
    if !equilibrium {
        warnings.push("field is not flagged as an equilibrium".into());
    }
    Ok(SubharmonicReport {
        min,
        min_scaled,
        tolerance,
        trials,
        pass,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coxeter::{dihedral_generators, generate_group, orbit_and_stabilizer};
    use crate::field::build_grid;
    use std::sync::Arc;

    fn setup(r: f64, h: f64) -> (Arc<BallGrid>, OrbitInfo, QSpec) {
        let grp = generate_group(2, &dihedral_generators(3)).unwrap();
        let orb = orbit_and_stabilizer(&grp, &[1.0, 0.0]).unwrap();
        (Arc::new(build_grid(2, r, h).unwrap()), orb, QSpec::distance(&[1.0, 0.0], 1.25))
    }

    #[test]
    fn bumps_are_deterministic_and_inside() {
        let (g, orb, _) = setup(6.0, 0.1);
        let region = BumpRegion::InD { orbit: &orb, margin: 0.2 };
        for t in 0..20 {
            let a = random_bump(&g, region, 5, t).unwrap();
            let b = random_bump(&g, region, 5, t).unwrap();
            assert_eq!(a, b);
            assert!(a.width >= 0.4 && a.width <= 1.5);
            for &(i, v) in &a.support {
                assert!(v > 0.0 && v <= 1.0);
                assert!(orb.region(g.point(i)).dist_d > 0.2);
            }
        }
        assert_ne!(random_bump(&g, region, 5, 0).unwrap(), random_bump(&g, region, 5, 1).unwrap());
    }

    #[test]
    fn constant_minimum_gives_zero_pairings() {
        let (g, orb, q) = setup(4.0, 0.1);
        let u = VectorField::constant(g, &[1.0, 0.0]);
        let k = kato_check(&u, &q, 20, 1).unwrap();
        assert_eq!(k.min, 0.0);
        let s = subharmonic_check(&u, &q, &orb, 20, 1, true).unwrap();
        assert_eq!(s.min, 0.0);
        assert!(k.pass && s.pass);
    }

    #[test]
    fn kato_on_smooth_field_away_from_a1() {
        let (g, _, q) = setup(4.0, 0.1);
        let u = VectorField::from_fn(g, |x| vec![-0.5 + 0.2 * x[0].sin(), 0.3 * (0.7 * x[1]).cos()]);
        let k = kato_check(&u, &q, 30, 2).unwrap();
        assert!(k.min >= -1e-8, "{}", k.min);
        assert!(k.strong_weak_gap < 1e-6, "{}", k.strong_weak_gap);
    }

    #[test]
    fn kato_on_field_crossing_a1() {
        let (g, _, q) = setup(4.0, 0.1);
        // 1D profile crossing a1 along the line x1 = 0.37
        let u = VectorField::from_fn(g, |x| vec![1.0 + 0.5 * (x[0] - 0.37), 0.0]);
        let k = kato_check(&u, &q, 50, 3).unwrap();
        assert!(k.pass);
        assert!(k.min >= -1e-10);
    }

    #[test]
    fn kato_rejects_too_few_trials() {
        let (g, _, q) = setup(2.0, 0.1);
        let u = VectorField::constant(g, &[0.0, 0.0]);
        assert!(kato_check(&u, &q, 5, 0).is_err());
    }

    #[test]
    fn negated_monitor_fails_subharmonicity() {
        let (g, orb, q) = setup(4.0, 0.1);
        // Q(u) = 10 |x - (2, 0)| is strongly subharmonic, so -Q fails beyond the tolerance
        let u = VectorField::from_fn(g, |x| vec![1.0 + 10.0 * (x[0] - 2.0), 10.0 * x[1]]);
        let plus = subharmonic_with(&u, |v| q.value(v), &orb, 40, 4, true).unwrap();
        let minus = subharmonic_with(&u, |v| -q.value(v), &orb, 40, 4, true).unwrap();
        assert!(plus.pass);
        assert!(!minus.pass);
        assert!(minus.min < 0.0);
    }
}
