//! Explicit gradient flow u_t = Lap u - W_u(u) on the ball with Neumann data,
//! run to a discrete equilibrium.

use serde::Serialize;

use crate::coxeter::ReflectionGroup;
use crate::error::{Error, Result};
use crate::field::{energy, project_in_place, Accumulator, SymmetrizePlan, VectorField, NO_NODE};
use crate::mat::dot;
use crate::potential::PotentialSpec;

/// Time-stepping parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowConfig {
    pub dt: f64,
    pub max_steps: usize,
    /// Convergence threshold on max_x |Lap u - W_u(u)|.
    pub residual_tol: f64,
    /// Re-symmetrization and positivity-checkpoint period.
    pub k_sym: usize,
    /// Project onto |u| <= M after every step.
    pub clamp: bool,
    /// Group-average at a checkpoint only if the equivariance residual exceeds
    /// this multiple of h^2.
    pub sym_threshold: f64,
    /// Switch from explicit steps to Newton polishing once the residual at a
    /// checkpoint falls below this level; 0 disables the switch.
    pub newton_start: f64,
    pub newton_max_iter: usize,
    /// Stop after this many checkpoints without a 1% residual improvement;
    /// 0 disables the test.
    pub stall_checkpoints: usize,
}

impl FlowConfig {
    /// Defaults for spacing `h` in dimension `n`: dt = 0.2 h^2 / n.
    pub fn for_grid(h: f64, n: usize) -> Self {
        FlowConfig {
            dt: 0.2 * h * h / n as f64,
            max_steps: 400_000,
            residual_tol: 1e-3,
            k_sym: 50,
            clamp: false,
            sym_threshold: 5.0,
            newton_start: 0.0,
            newton_max_iter: 30,
            stall_checkpoints: 200,
        }
    }

    /// Largest stable explicit step for the diffusion part: h^2 / (2n).
    pub fn dt_bound(h: f64, n: usize) -> f64 {
        h * h / (2.0 * n as f64)
    }

    pub fn validate(&self, h: f64, n: usize) -> Result<()> {
        let bound = Self::dt_bound(h, n);
        if !(self.dt > 0.0 && self.dt <= bound) {
            return Err(Error::Precondition(format!(
                "dt = {} must lie in (0, {bound}]",
                self.dt
            )));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::Precondition("residual_tol must be positive".into()));
        }
        if self.k_sym == 0 {
            return Err(Error::Precondition("k_sym must be at least 1".into()));
        }
        Ok(())
    }
}

/// What produced a state in the energy history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Flow,
    Symmetrize,
    Newton,
}

impl StepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepKind::Flow => "flow",
            StepKind::Symmetrize => "symmetrize",
            StepKind::Newton => "newton",
        }
    }
}

/// One entry of the energy history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRecord {
    pub step: usize,
    pub energy: f64,
    pub kind: StepKind,
}

/// A positivity checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivitySample {
    pub step: usize,
    pub min: f64,
}

/// The outcome of [`run_to_equilibrium`].
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub field: VectorField,
    pub energy_history: Vec<EnergyRecord>,
    pub residual: f64,
    pub steps: usize,
    /// Step at which `field` was taken: the last step on convergence, otherwise
    /// the checkpoint with the smallest residual.
    pub field_step: usize,
    pub converged: bool,
    pub positivity_min: f64,
    pub positivity_samples: Vec<PositivitySample>,
    /// min over F nodes at distance >= h from every mirror of min_gamma <u, eta_gamma>, final step.
    pub strong_positivity_margin: f64,
    pub equivariance_residual: f64,
    pub max_norm: f64,
}

impl FlowResult {
    /// Largest increase of J across consecutive explicit flow steps, relative to 1 + |J|.
    pub fn worst_energy_increase(&self) -> f64 {
        self.energy_history
            .windows(2)
            .filter(|w| w[1].kind == StepKind::Flow)
            .map(|w| (w[1].energy - w[0].energy) / (1.0 + w[0].energy.abs()))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Energy changes caused by steps of the given kind, (before, after).
    pub fn jumps(&self, kind: StepKind) -> Vec<(f64, f64)> {
        self.energy_history
            .windows(2)
            .filter(|w| w[1].kind == kind)
            .map(|w| (w[0].energy, w[1].energy))
            .collect()
    }

    /// Number of explicit flow steps taken.
    pub fn flow_steps(&self) -> usize {
        self.energy_history
            .iter()
            .filter(|r| r.kind == StepKind::Flow)
            .count()
            .saturating_sub(1)
    }
}

struct StepStats {
    energy: f64,
    residual: f64,
    max_norm: f64,
}

/// Writes u + dt (Lap u - W_u(u)) into `out` and returns J(u), the residual
/// of u and the largest |out|, all in one pass.
fn step_kernel(u: &VectorField, out: &mut [f64], spec: &PotentialSpec, dt: f64) -> StepStats {
    let g = &u.grid;
    let n = g.dim();
    let inv_h2 = 1.0 / (g.h() * g.h());
    let mut acc = Accumulator::default();
    let mut residual = 0.0f64;
    let mut max_norm = 0.0f64;
    let mut lap = [0.0f64; 3];
    let mut wg = [0.0f64; 3];
    let vals = &u.values;
    for i in 0..g.len() {
        let ui = &vals[i * n..(i + 1) * n];
        let nb = g.neighbors(i);
        lap[..n].iter_mut().for_each(|v| *v = 0.0);
        let mut grad_e = 0.0;
        for (s, &j) in nb.iter().enumerate() {
            if j == NO_NODE {
                continue;
            }
            let uj = &vals[j as usize * n..(j as usize + 1) * n];
            let forward = s % 2 == 0;
            for k in 0..n {
                let d = uj[k] - ui[k];
                lap[k] += d;
                if forward {
                    grad_e += d * d;
                }
            }
        }
        let w = spec.value_and_gradient(ui, &mut wg[..n]);
        acc.add(w + 0.5 * grad_e * inv_h2);
        let mut r2 = 0.0;
        let mut o2 = 0.0;
        for k in 0..n {
            let f = lap[k] * inv_h2 - wg[k];
            r2 += f * f;
            let v = ui[k] + dt * f;
            out[i * n + k] = v;
            o2 += v * v;
        }
        residual = residual.max(r2);
        max_norm = max_norm.max(o2);
    }
    StepStats {
        energy: acc.total() * g.cell_volume(),
        residual: residual.sqrt(),
        max_norm: max_norm.sqrt(),
    }
}

/// max_x |Lap u - W_u(u)|.
pub fn euler_lagrange_residual(u: &VectorField, spec: &PotentialSpec) -> f64 {
    let mut scratch = vec![0.0; u.values.len()];
    step_kernel(u, &mut scratch, spec, 0.0).residual
}

/// One explicit Euler step.
pub fn step(u: &VectorField, spec: &PotentialSpec, cfg: &FlowConfig) -> Result<VectorField> {
    let n = u.dim();
    let mut out = vec![0.0; u.values.len()];
    let stats = step_kernel(u, &mut out, spec, cfg.dt);
    let bound = spec.m + 1.0;
    if !(stats.max_norm <= bound) {
        return Err(Error::StabilityViolation {
            norm: stats.max_norm,
            bound,
        });
    }
    if cfg.clamp {
        project_in_place(&mut out, n, spec.m);
    }
    let next = VectorField {
        grid: u.grid.clone(),
        values: out,
    };
    if cfg!(debug_assertions) && cfg.dt <= FlowConfig::dt_bound(u.grid.h(), n) {
        let after = energy(&next, spec);
        debug_assert!(
            after <= stats.energy + 1e-12 * (1.0 + stats.energy.abs()),
            "energy rose from {} to {after}",
            stats.energy
        );
    }
    Ok(next)
}

/// F(u) = Lap u - W_u(u) into `out`; returns its max nodal norm.
fn el_operator(u: &VectorField, spec: &PotentialSpec, out: &mut [f64]) -> f64 {
    let mut scratch = vec![0.0; u.values.len()];
    step_kernel(u, &mut scratch, spec, 1.0);
    out.iter_mut()
        .zip(scratch.iter().zip(&u.values))
        .for_each(|(o, (a, b))| *o = a - b);
    max_nodal_norm(out, u.dim())
}

fn max_nodal_norm(v: &[f64], n: usize) -> f64 {
    v.chunks(n)
        .map(|c| c.iter().map(|x| x * x).sum::<f64>())
        .fold(0.0, f64::max)
        .sqrt()
}

/// One inexact Newton step on Lap u - W_u(u) = 0 with MINRES inner solves
/// (the Jacobian Lap - W_uu(u) is symmetric but indefinite near saddles),
/// backtracking on the Euclidean residual. Returns the new max residual.
fn newton_step(u: &mut VectorField, spec: &PotentialSpec, current: f64) -> Result<f64> {
    let g = u.grid.clone();
    let n = g.dim();
    let len = u.values.len();
    let mut f = vec![0.0; len];
    el_operator(u, spec, &mut f);
    let f_norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
    let hess: Vec<f64> = (0..g.len())
        .flat_map(|i| spec.hessian(u.at(i)).as_slice().to_vec())
        .collect();
    let inv_h2 = 1.0 / (g.h() * g.h());
    let apply = |v: &[f64], out: &mut [f64]| {
        for i in 0..g.len() {
            let vi = &v[i * n..(i + 1) * n];
            let hi = &hess[i * n * n..(i + 1) * n * n];
            for k in 0..n {
                let mut acc = 0.0;
                for &j in g.neighbors(i) {
                    if j != NO_NODE {
                        acc += v[j as usize * n + k] - vi[k];
                    }
                }
                let hv: f64 = (0..n).map(|m| hi[k * n + m] * vi[m]).sum();
                out[i * n + k] = acc * inv_h2 - hv;
            }
        }
    };
    let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
    let forcing = (0.1f64).min(current.sqrt()).max(1e-6);
    let delta = minres(&apply, &rhs, forcing, 20 * len.min(2000).max(200));
    let mut t = 1.0;
    let mut trial = u.clone();
    let mut ft = vec![0.0; len];
    for _ in 0..12 {
        trial
            .values
            .iter_mut()
            .zip(u.values.iter().zip(&delta))
            .for_each(|(o, (a, d))| *o = a + t * d);
        let r = el_operator(&trial, spec, &mut ft);
        let ft_norm = ft.iter().map(|x| x * x).sum::<f64>().sqrt();
        if ft_norm.is_finite() && ft_norm < f_norm {
            *u = trial;
            return Ok(r);
        }
        t *= 0.5;
    }
    Err(Error::Precondition(
        "Newton polishing failed to reduce the residual".into(),
    ))
}

/// Unpreconditioned MINRES for a symmetric operator, to relative residual `tol`.
fn minres(apply: &dyn Fn(&[f64], &mut [f64]), b: &[f64], tol: f64, max_iter: usize) -> Vec<f64> {
    let len = b.len();
    let dotv = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
    let mut x = vec![0.0; len];
    let beta1 = dotv(b, b).sqrt();
    if beta1 == 0.0 {
        return x;
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let mut v = vec![0.0; len];
    let mut w = vec![0.0; len];
    let mut w1 = vec![0.0; len];
    let mut w2 = vec![0.0; len];
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        v.iter_mut().zip(&y).for_each(|(vi, yi)| *vi = s * yi);
        apply(&v, &mut y);
        if itn >= 2 {
            let c = beta / oldb;
            y.iter_mut().zip(&r1).for_each(|(yi, ri)| *yi -= c * ri);
        }
        let alfa = dotv(&v, &y);
        let c = alfa / beta;
        y.iter_mut().zip(&r2).for_each(|(yi, ri)| *yi -= c * ri);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        oldb = beta;
        beta = dotv(&r2, &r2).sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for k in 0..len {
            w[k] = (v[k] - oldeps * w1[k] - delta * w2[k]) / gamma;
            x[k] += phi * w[k];
        }
        if phibar <= tol * beta1 || beta == 0.0 {
            break;
        }
    }
    x
}

/// min over nodes x in the closed fundamental region of min_gamma <u(x), eta_gamma>.
pub fn positivity_on_f(u: &VectorField, group: &ReflectionGroup) -> f64 {
    let g = &u.grid;
    (0..g.len())
        .filter(|&i| group.in_closure(g.point(i)))
        .map(|i| group.positivity_margin(u.at(i)))
        .fold(f64::INFINITY, f64::min)
}

/// Positivity margin over fundamental-region nodes at distance >= `depth` from every mirror.
pub fn strong_positivity_margin(u: &VectorField, group: &ReflectionGroup, depth: f64) -> f64 {
    let g = &u.grid;
    (0..g.len())
        .filter(|&i| {
            let x = g.point(i);
            group
                .fund_normals()
                .iter()
                .all(|eta| dot(x, eta) >= depth - 1e-12)
        })
        .map(|i| group.positivity_margin(u.at(i)))
        .fold(f64::INFINITY, f64::min)
}

/// Runs the flow from `u0` until the residual drops below tolerance.
///
/// Every `k_sym` steps positivity is recorded and the equivariance residual
/// measured; the field is group-averaged only when that residual exceeds
/// `sym_threshold * h^2`. Averaging unconditionally would re-inject
/// interpolation error of the same order on every checkpoint and the flow
/// would never settle.
pub fn run_to_equilibrium(
    u0: &VectorField,
    spec: &PotentialSpec,
    cfg: &FlowConfig,
    group: &ReflectionGroup,
) -> Result<FlowResult> {
    let n = u0.dim();
    cfg.validate(u0.grid.h(), n)?;
    if group.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: group.dim(),
        });
    }
    if !u0.is_finite() {
        return Err(Error::Precondition("initial field has non-finite values".into()));
    }
    let start_norm = u0.max_norm();
    if start_norm > spec.m * (1.0 + 1e-9) {
        return Err(Error::Precondition(format!(
            "initial field has |u| = {start_norm} above M = {}",
            spec.m
        )));
    }
    let plan = if group.order() > 1 {
        Some(SymmetrizePlan::new(&u0.grid, group)?)
    } else {
        None
    };
    let bound = spec.m + 1.0;
    let mut u = u0.clone();
    let mut next = vec![0.0; u.values.len()];
    let mut history = Vec::new();
    let mut samples = vec![PositivitySample {
        step: 0,
        min: positivity_on_f(&u, group),
    }];
    let mut residual;
    let mut steps = 0;
    let mut converged = false;
    let mut kind = StepKind::Flow;
    let mut polish = false;
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut since_best = 0;
    loop {
        let stats = step_kernel(&u, &mut next, spec, cfg.dt);
        history.push(EnergyRecord {
            step: steps,
            energy: stats.energy,
            kind,
        });
        kind = StepKind::Flow;
        residual = stats.residual;
        if residual <= cfg.residual_tol {
            converged = true;
            break;
        }
        if steps >= cfg.max_steps {
            break;
        }
        if !(stats.max_norm <= bound) {
            return Err(Error::StabilityViolation {
                norm: stats.max_norm,
                bound,
            });
        }
        if cfg.clamp {
            project_in_place(&mut next, n, spec.m);
        }
        std::mem::swap(&mut u.values, &mut next);
        steps += 1;
        if steps % cfg.k_sym != 0 {
            continue;
        }
        samples.push(PositivitySample {
            step: steps,
            min: positivity_on_f(&u, group),
        });
        let current = euler_lagrange_residual(&u, spec);
        if cfg.newton_start > 0.0 && current <= cfg.newton_start {
            residual = current;
            polish = true;
            break;
        }
        if best.as_ref().map_or(true, |b| current < 0.99 * b.0) {
            best = Some((current, steps, u.values.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.stall_checkpoints > 0 && since_best >= cfg.stall_checkpoints {
                break;
            }
        }
        if let Some(plan) = &plan {
            let h = u.grid.h();
            if plan.residual(&u) > cfg.sym_threshold * h * h {
                history.push(EnergyRecord {
                    step: steps,
                    energy: energy(&u, spec),
                    kind: StepKind::Flow,
                });
                u = plan.apply(&u);
                kind = StepKind::Symmetrize;
            }
        }
    }
    if polish {
        history.push(EnergyRecord {
            step: steps,
            energy: energy(&u, spec),
            kind: StepKind::Flow,
        });
        for _ in 0..cfg.newton_max_iter {
            residual = newton_step(&mut u, spec, residual)?;
            steps += 1;
            history.push(EnergyRecord {
                step: steps,
                energy: energy(&u, spec),
                kind: StepKind::Newton,
            });
            samples.push(PositivitySample {
                step: steps,
                min: positivity_on_f(&u, group),
            });
            if residual <= cfg.residual_tol {
                converged = true;
                break;
            }
        }
    }
    let mut best_step = steps;
    if !converged {
        if let Some((r, at, values)) = best {
            if r < residual {
                residual = r;
                best_step = at;
                u.values = values;
            }
        }
    }
    let last = positivity_on_f(&u, group);
    if samples.last().map(|s| s.step) != Some(steps) {
        samples.push(PositivitySample {
            step: steps,
            min: last,
        });
    }
    let positivity_min = samples.iter().map(|s| s.min).fold(f64::INFINITY, f64::min);
    let strong = strong_positivity_margin(&u, group, u.grid.h());
    let equivariance_residual = plan.as_ref().map_or(0.0, |p| p.residual(&u));
    let max_norm = u.max_norm();
    Ok(FlowResult {
        field: u,
        energy_history: history,
        residual,
        steps,
        field_step: best_step,
        converged,
        positivity_min,
        positivity_samples: samples,
        strong_positivity_margin: strong,
        equivariance_residual,
        max_norm,
    })
}
