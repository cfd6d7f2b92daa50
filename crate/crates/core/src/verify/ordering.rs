//! Growing the certified set D* with translated copies of the radial barrier sigma.

use super::{for_each_in_box, nodes_in_ball};
use crate::comparison::{Sigma, SigmaConstants};
use crate::coxeter::OrbitInfo;
use crate::error::{Error, Result};
use crate::field::{VectorField, NO_NODE};
use crate::mat::norm;
use crate::potential::{sphere_directions, QSpec};
use serde::Serialize;

/// Starting ball B_radius(center) on which Q(u) <= q_bar is already known.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    /// Nodes of some B_L(xi) where Q(u) exceeds sigma(|x - xi|) + 5h.
    pub violations: usize,
    /// Largest excess Q(u) - sigma over all compared nodes.
    pub worst_excess: f64,
    /// Fraction of D_R nodes in D*.
    pub coverage: f64,
    /// Largest distance to the boundary of D_R among nodes left outside D*; 0 when D* covers D_R.
    pub d0: f64,
    /// Number of barrier balls placed.
    pub balls: usize,
    /// Width of the shell added to D* per ball, max(delta', h).
    pub step: f64,
    pub seed_sup_q: f64,
    pub slack: f64,
}

const DIRECTION_SEED: u64 = 0x5eed;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Distance from x to the boundary of D_R (mirrors of D and the outer sphere); negative outside.
fn depth(orbit: &OrbitInfo, radius: f64, x: &[f64]) -> f64 {
    let reg = orbit.region(x);
    let rim = radius - norm(x);
    if reg.in_d {
        reg.dist_d.min(rim)
    } else {
        -1.0
    }
}

/// Compares Q(u) with sigma on balls B_L(xi) inside D_R whose inner ball
/// B_l(xi) already lies in D*, then adds B_{l + delta'}(xi) to D*. Starts from the seed ball,
/// which must satisfy sup Q(u) <= q_bar, and sweeps until D* stops growing.
///
/// Centres xi are not restricted to nodes: for each node x next to D* the
/// ball is rolled along a fixed set of directions so that x lies just past
/// the rim of B_l(xi). delta' is typically far below the mesh width, so the
/// certified shell is widened to max(delta', h); the comparison itself still
/// runs over all of B_L(xi).
pub fn comparison_ordering_check(
    u: &VectorField,
    q: &QSpec,
    sigma: &Sigma,
    constants: &SigmaConstants,
    orbit: &OrbitInfo,
    seed: &SeedBall,
) -> Result<OrderingReport> {
    let q_bar = sigma.phi.phi1.params.q_bar;
    let barrier = |r: f64| sigma.value(r);
    ordering_with(
        u,
        q,
        &barrier,
        Radii {
            l: sigma.l(),
            big_l: sigma.big_l(),
            delta_prime: constants.delta_prime,
        },
        q_bar,
        orbit,
        seed,
    )
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Radii {
    pub l: f64,
    pub big_l: f64,
    pub delta_prime: f64,
}

pub(crate) fn ordering_with(
    u: &VectorField,
    q: &QSpec,
    barrier: &dyn Fn(f64) -> f64,
    radii: Radii,
    q_bar: f64,
    orbit: &OrbitInfo,
    seed: &SeedBall,
) -> Result<OrderingReport> {
    let g = &u.grid;
    let h = g.h();
    let slack = 5.0 * h;
    let Radii { l, big_l, delta_prime } = radii;
    if !(l > 0.0 && big_l > l && delta_prime > 0.0) {
        return Err(Error::Precondition(format!(
            "barrier radii must satisfy 0 < l < L and delta' > 0, got l = {l}, L = {big_l}, delta' = {delta_prime}"
        )));
    }
    let qv: Vec<f64> = (0..g.len()).map(|i| q.value(u.at(i))).collect();
    let depths: Vec<f64> = (0..g.len())
        .map(|i| depth(orbit, g.radius(), g.point(i)))
        .collect();
    let seed_nodes = nodes_in_ball(g, &seed.center, seed.radius);
    let seed_sup_q = seed_nodes
        .iter()
        .map(|&i| qv[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if seed_nodes.is_empty() || !(seed_sup_q <= q_bar) {
        return Err(Error::SeedBallRejected {
            sup_q: seed_sup_q,
            q_bar,
        });
    }
    let mut certified = vec![false; g.len()];
    for &i in &seed_nodes {
        certified[i] = true;
    }
    let step = delta_prime.max(h);
    let reach = l + step;
    let offset = l + 0.5 * step;
    // the maximum principle on B_L(xi) needs the whole ball inside D_R
    let center_depth = big_l.max(reach);
    let count = if g.dim() == 2 { 64 } else { 64 * g.dim() * g.dim() };
    let dirs = sphere_directions(g.dim(), count, DIRECTION_SEED);
    let l2 = l * l + 1e-9 * h * h;
    let big_l2 = big_l * big_l + 1e-9 * h * h;
    let reach2 = reach * reach + 1e-9 * h * h;
    let (mut violations, mut worst_excess, mut balls) = (0usize, f64::NEG_INFINITY, 0usize);
    let mut xi = vec![0.0; g.dim()];
    loop {
        let mut grew = false;
        for x in 0..g.len() {
            if certified[x] || depths[x] < 0.0 {
                continue;
            }
            if !g.neighbors(x).iter().any(|&j| j != NO_NODE && certified[j as usize]) {
                continue;
            }
            let p = g.point(x);
            // Roll a ball B_l(xi) inside D* until x sits just past its rim.
            let found = dirs.iter().any(|e| {
                for ((c, a), b) in xi.iter_mut().zip(p).zip(e) {
                    *c = a - offset * b;
                }
                if depth(orbit, g.radius(), &xi) < center_depth {
                    return false;
                }
                let mut inside = true;
                for_each_in_box(g, &xi, l, |j| {
                    if inside && !certified[j] && dist2(g.point(j), &xi) <= l2 {
                        inside = false;
                    }
                });
                inside
            });
            if !found {
                continue;
            }
            balls += 1;
            for_each_in_box(g, &xi, big_l, |j| {
                let d2 = dist2(g.point(j), &xi);
                if d2 > big_l2 {
                    return;
                }
                let excess = qv[j] - barrier(d2.sqrt().min(big_l));
                worst_excess = worst_excess.max(excess);
                if excess > slack {
                    violations += 1;
                }
                if d2 <= reach2 && !certified[j] {
                    certified[j] = true;
                    grew = true;
                }
            });
        }
        if !grew {
            break;
        }
    }
    let in_d: Vec<usize> = (0..g.len()).filter(|&i| depths[i] >= 0.0).collect();
    let covered = in_d.iter().filter(|&&i| certified[i]).count();
    let d0 = in_d
        .iter()
        .filter(|&&i| !certified[i])
        .map(|&i| depths[i])
        .fold(0.0, f64::max);
    Ok(OrderingReport {
        violations,
        worst_excess,
        coverage: if in_d.is_empty() { 0.0 } else { covered as f64 / in_d.len() as f64 },
        d0,
        balls,
        step,
        seed_sup_q,
        slack,
    })
}
