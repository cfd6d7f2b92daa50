//! Measure estimate and De Giorgi oscillation on balls inside D.

use super::nodes_in_ball;
use crate::coxeter::OrbitInfo;
use crate::error::{Error, Result};
use crate::field::{BallGrid, VectorField};
use crate::mat::norm;
use crate::potential::{PotentialSpec, QSpec};
use serde::Serialize;

/// Fraction of nodes with v <= 0 in B_radius(center), and sup of v over the
/// half ball B_radius/2(center).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelStatistics {
    pub fraction: f64,
    pub half_sup: f64,
    pub nodes: usize,
    pub half_nodes: usize,
}

/// Statistics of an arbitrary nodal function v on a ball.
pub fn level_statistics(
    grid: &BallGrid,
    v: impl Fn(usize) -> f64,
    center: &[f64],
    radius: f64,
) -> Result<LevelStatistics> {
    let ball = nodes_in_ball(grid, center, radius);
    let half = nodes_in_ball(grid, center, 0.5 * radius);
    if ball.is_empty() || half.is_empty() {
        return Err(Error::InsufficientNodes {
            found: half.len(),
            needed: 1,
        });
    }
    let below = ball.iter().filter(|&&i| v(i) <= 0.0).count();
    let half_sup = half.iter().map(|&i| v(i)).fold(f64::NEG_INFINITY, f64::max);
    Ok(LevelStatistics {
        fraction: below as f64 / ball.len() as f64,
        half_sup,
        nodes: ball.len(),
        half_nodes: half.len(),
    })
}

/// One level of the halving iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegiorgiLevel {
    pub level: usize,
    pub radius: f64,
    /// Bound Q_bar_{i-1} used to normalise v_i.
    pub bound: f64,
    pub fraction: f64,
    /// sup of v_i over the half ball.
    pub sup_v: f64,
    /// sup of Q(u) over the half ball B_{radius/2}.
    pub sup_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegiorgiReport {
    pub center: Vec<f64>,
    pub radius: f64,
    pub measure_fraction: f64,
    pub degiorgi_sup: f64,
    /// min W over nodes of the ball with v >= 0; `None` when there are none.
    pub eps0: Option<f64>,
    /// Empirical mu: the first-level half-ball sup of v.
    pub mu_estimate: f64,
    /// Minimal k with q_bar/2 + mu^k (Q_bar - q_bar/2) < q_bar; `None` if mu >= 1.
    pub k_iter: Option<usize>,
    pub levels: Vec<DegiorgiLevel>,
    /// Per-level suprema strictly decrease until one is below q_bar, and one is.
    pub iteration_ok: bool,
    /// Radius of the last level's half ball, with its sup of Q.
    pub final_radius: f64,
    pub final_sup_q: f64,
}

fn check_ball_in_d(grid: &BallGrid, orbit: &OrbitInfo, center: &[f64], radius: f64) -> Result<()> {
    let depth = orbit.region(center).dist_d;
    let room = grid.radius() - norm(center);
    if depth.min(room) < radius * (1.0 - 1e-12) {
        return Err(Error::BallOutsideD {
            center: center.to_vec(),
            radius,
        });
    }
    Ok(())
}

/// Grid node maximising min(dist_D(x), R - |x|), the centre of the largest
/// ball of D_R around a node.
pub fn deepest_point(grid: &BallGrid, orbit: &OrbitInfo) -> (Vec<f64>, f64) {
    let mut best = (vec![0.0; grid.dim()], f64::NEG_INFINITY);
    for i in 0..grid.len() {
        let x = grid.point(i);
        let d = orbit.region(x).dist_d.min(grid.radius() - norm(x));
        if d > best.1 {
            best = (x.to_vec(), d);
        }
    }
    best
}

/// Measure fraction, half-ball sup and eps0 for v = (Q(u) - q_bar/2)/(Q_bar - q_bar/2)
/// on B_radius(center), followed by the halving iteration.
pub fn measure_and_degiorgi(
    u: &VectorField,
    q: &QSpec,
    center: &[f64],
    radius: f64,
    spec: &PotentialSpec,
    orbit: &OrbitInfo,
) -> Result<DegiorgiReport> {
    let g = &u.grid;
    check_ball_in_d(g, orbit, center, radius)?;
    let qv: Vec<f64> = (0..g.len()).map(|i| q.value(u.at(i))).collect();
    let half_q = 0.5 * spec.q_bar;
    let top = q.q_max;
    if !(top > half_q) {
        return Err(Error::Precondition("Q_bar must exceed q_bar/2".into()));
    }
    let v = |i: usize| (qv[i] - half_q) / (top - half_q);
    let first = level_statistics(g, v, center, radius)?;
    let eps0 = nodes_in_ball(g, center, radius)
        .into_iter()
        .filter(|&i| v(i) >= 0.0)
        .map(|i| spec.value(u.at(i)))
        .fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |a| a.min(w))));
    let mu = first.half_sup;
    let k_iter = (mu < 1.0).then(|| {
        if mu <= 0.0 {
            return 1;
        }
        // smallest k with mu^k < (q_bar/2)/(Q_bar - q_bar/2)
        let target = half_q / (top - half_q);
        let mut k = 1;
        while mu.powi(k as i32) >= target && k < 10_000 {
            k += 1;
        }
        k
    });
    let levels = degiorgi_iteration(g, &qv, center, radius, spec.q_bar, top, k_iter.unwrap_or(1))?;
    let iteration_ok = iteration_decreases(&levels, spec.q_bar);
    let last = levels.last().expect("at least one level");
    Ok(DegiorgiReport {
        center: center.to_vec(),
        radius,
        measure_fraction: first.fraction,
        degiorgi_sup: first.half_sup,
        eps0,
        mu_estimate: mu,
        k_iter,
        final_radius: 0.5 * last.radius,
        final_sup_q: last.sup_q,
        levels,
        iteration_ok,
    })
}

/// Levels i = 1..=k on balls of radius radius/2^(i-1), each normalised by the
/// previous level's bound Q_bar_{i-1} (starting from Q_bar). Stops early once
/// the half ball holds fewer than two nodes.
pub fn degiorgi_iteration(
    grid: &BallGrid,
    qv: &[f64],
    center: &[f64],
    radius: f64,
    q_bar: f64,
    q_max: f64,
    k: usize,
) -> Result<Vec<DegiorgiLevel>> {
    let half_q = 0.5 * q_bar;
    let mut bound = q_max;
    let mut r = radius;
    let mut levels = Vec::new();
    for level in 1..=k.max(1) {
        let scale = bound - half_q;
        if scale <= 0.0 {
            break;
        }
        let st = match level_statistics(grid, |i| (qv[i] - half_q) / scale, center, r) {
            Ok(s) if s.half_nodes >= 2 || level == 1 => s,
            Ok(_) | Err(_) if level > 1 => break,
            Err(e) => return Err(e),
            Ok(s) => s,
        };
        let sup_q = half_q + st.half_sup * scale;
        levels.push(DegiorgiLevel {
            level,
            radius: r,
            bound,
            fraction: st.fraction,
            sup_v: st.half_sup,
            sup_q,
        });
        bound = sup_q;
        r *= 0.5;
        if sup_q < q_bar {
            break;
        }
    }
    Ok(levels)
}

fn iteration_decreases(levels: &[DegiorgiLevel], q_bar: f64) -> bool {
    let mut prev = f64::INFINITY;
    for l in levels {
        if !(l.sup_q < prev) || !(l.sup_v < 1.0) {
            return false;
        }
        if l.sup_q < q_bar {
            return true;
        }
        prev = l.sup_q;
    }
    false
}
