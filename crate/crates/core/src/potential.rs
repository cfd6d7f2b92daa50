//! Potentials W with their derivatives and constants, the monitor function Q,
//! and sampled checks of the standing hypotheses on (W, Q).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coxeter::{OrbitInfo, ReflectionGroup};
use crate::error::{Error, Result};
use crate::mat::{dot, norm, symmetric_eigenvalues, Mat};

/// One monomial `coef * prod_k u_k^exps[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub exps: Vec<u32>,
}

impl Monomial {
    pub fn new(coef: f64, exps: &[u32]) -> Self {
        Monomial {
            coef,
            exps: exps.to_vec(),
        }
    }
}

/// A polynomial on R^n as a sum of monomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub dim: usize,
    pub terms: Vec<Monomial>,
}

fn ipow(x: f64, e: u32) -> f64 {
    x.powi(e as i32)
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<Monomial>) -> Result<Self> {
        for t in &terms {
            if t.exps.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: t.exps.len(),
                });
            }
            if !t.coef.is_finite() {
                return Err(Error::Precondition(format!(
                    "polynomial coefficient {} is not finite",
                    t.coef
                )));
            }
        }
        Ok(Polynomial { dim, terms })
    }

    /// The triangle potential |z^3 - 1|^2 written out in monomials.
    pub fn triangle() -> Self {
        let t = |c: f64, a: u32, b: u32| Monomial::new(c, &[a, b]);
        Polynomial {
            dim: 2,
            terms: vec![
                t(1.0, 6, 0),
                t(3.0, 4, 2),
                t(3.0, 2, 4),
                t(1.0, 0, 6),
                t(-2.0, 3, 0),
                t(6.0, 1, 2),
                t(1.0, 0, 0),
            ],
        }
    }

    pub fn negated(&self) -> Self {
        Polynomial {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| Monomial::new(-t.coef, &t.exps))
                .collect(),
        }
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * t.exps.iter().zip(u).map(|(&e, &x)| ipow(x, e)).product::<f64>())
            .sum()
    }

    pub fn gradient_into(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        for t in &self.terms {
            for k in 0..self.dim {
                let ek = t.exps[k];
                if ek == 0 {
                    continue;
                }
                let mut p = t.coef * ek as f64 * ipow(u[k], ek - 1);
                for (j, (&e, &x)) in t.exps.iter().zip(u).enumerate() {
                    if j != k {
                        p *= ipow(x, e);
                    }
                }
                out[k] += p;
            }
        }
    }

    pub fn hessian(&self, u: &[f64]) -> Mat {
        let n = self.dim;
        let mut data = vec![0.0; n * n];
        for t in &self.terms {
            for a in 0..n {
                for b in 0..n {
                    let mut exps = t.exps.clone();
                    let mut c = t.coef;
                    for k in [a, b] {
                        if exps[k] == 0 {
                            c = 0.0;
                            break;
                        }
                        c *= exps[k] as f64;
                        exps[k] -= 1;
                    }
                    if c == 0.0 {
                        continue;
                    }
                    data[a * n + b] += c * exps.iter().zip(u).map(|(&e, &x)| ipow(x, e)).product::<f64>();
                }
            }
        }
        Mat::from_rows(n, data)
    }
}

/// How W is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PotentialKind {
    /// W(u) = |z^3 - 1|^2, z = u1 + i u2, evaluated in complex form.
    Triangle,
    Polynomial(Polynomial),
}

/// Value, gradient and optional Hessian of W at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialEval {
    pub w: f64,
    pub grad: Vec<f64>,
    pub hess: Option<Mat>,
}

/// The potential W with its minima and the constants c, q_bar, M.
#[derive(Debug, Clone, Serialize)]
pub struct PotentialSpec {
    pub dim: usize,
    pub kind: PotentialKind,
    pub minima: Vec<Vec<f64>>,
    /// Convexity constant: v^T W_uu v >= 2 c^2 |v|^2 within q_bar of every minimum.
    pub c: f64,
    pub q_bar: f64,
    /// Radius beyond which W increases along rays.
    #[serde(rename = "M")]
    pub m: f64,
}

impl PotentialSpec {
    /// Builds a spec with the given constants and no scans.
    pub fn with_constants(
        dim: usize,
        kind: PotentialKind,
        minima: Vec<Vec<f64>>,
        c: f64,
        q_bar: f64,
        m: f64,
    ) -> Self {
        PotentialSpec {
            dim,
            kind,
            minima,
            c,
            q_bar,
            m,
        }
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        match &self.kind {
            PotentialKind::Triangle => {
                let (fr, fi) = triangle_f(u[0], u[1]);
                fr * fr + fi * fi
            }
            PotentialKind::Polynomial(p) => p.value(u),
        }
    }

    /// Writes W_u(u) into `out` and returns W(u).
    #[inline]
    pub fn value_and_gradient(&self, u: &[f64], out: &mut [f64]) -> f64 {
        match &self.kind {
            PotentialKind::Triangle => {
                let (a, b) = (u[0], u[1]);
                let (fr, fi) = triangle_f(a, b);
                // 2 f conj(f'), f' = 3 z^2
                let (dr, di) = (3.0 * (a * a - b * b), 6.0 * a * b);
                out[0] = 2.0 * (fr * dr + fi * di);
                out[1] = 2.0 * (fi * dr - fr * di);
                fr * fr + fi * fi
            }
            PotentialKind::Polynomial(p) => {
                p.gradient_into(u, out);
                p.value(u)
            }
        }
    }

    pub fn hessian(&self, u: &[f64]) -> Mat {
        match &self.kind {
            PotentialKind::Triangle => {
                let (a, b) = (u[0], u[1]);
                let (fr, fi) = triangle_f(a, b);
                let (dr, di) = (3.0 * (a * a - b * b), 6.0 * a * b);
                let d2 = dr * dr + di * di;
                let (p, q) = (6.0 * a, 6.0 * b);
                let h11 = 2.0 * (d2 + fr * p + fi * q);
                let h12 = 2.0 * (-fr * q + fi * p);
                let h22 = 2.0 * (d2 - fr * p - fi * q);
                Mat::from_rows(2, vec![h11, h12, h12, h22])
            }
            PotentialKind::Polynomial(p) => p.hessian(u),
        }
    }

    pub fn min_hessian_eigenvalue(&self, u: &[f64]) -> f64 {
        symmetric_eigenvalues(&self.hessian(u))[0]
    }
}

#[inline]
fn triangle_f(a: f64, b: f64) -> (f64, f64) {
    (a * a * a - 3.0 * a * b * b - 1.0, 3.0 * a * a * b - b * b * b)
}

/// Value, gradient and optional Hessian of W.
pub fn eval_potential(spec: &PotentialSpec, u: &[f64], want_hessian: bool) -> PotentialEval {
    let mut grad = vec![0.0; spec.dim];
    let w = spec.value_and_gradient(u, &mut grad);
    PotentialEval {
        w,
        grad,
        hess: want_hessian.then(|| spec.hessian(u)),
    }
}

/// The triangle potential |z^3 - 1|^2 with scanned constants.
pub fn make_triangle_potential() -> Result<PotentialSpec> {
    let minima = (0..3)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            vec![t.cos(), t.sin()]
        })
        .collect();
    make_potential(2, PotentialKind::Triangle, minima)
}

/// Builds a spec and scans for c, q_bar and M.
pub fn make_potential(
    dim: usize,
    kind: PotentialKind,
    minima: Vec<Vec<f64>>,
) -> Result<PotentialSpec> {
    if minima.is_empty() {
        return Err(Error::Precondition("potential needs at least one minimum".into()));
    }
    for a in &minima {
        if a.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: a.len(),
            });
        }
    }
    let mut spec = PotentialSpec::with_constants(dim, kind, minima, 0.0, 0.0, 0.0);
    let (c, q_bar) = scan_convexity(&spec)?;
    spec.c = c;
    spec.q_bar = q_bar;
    spec.m = scan_invariant_radius(&spec)?;
    Ok(spec)
}

/// Deterministic directions on the unit sphere: even angles in 2D, seeded
/// random draws otherwise.
pub fn sphere_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    if dim == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    if dim == 2 {
        return (0..count)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = norm(&v);
        if r > 1e-3 && r <= 1.0 {
            out.push(v.iter().map(|x| x / r).collect());
        }
    }
    out
}

const SHELL_STEP: f64 = 0.005;
const SHELL_DIRECTIONS: usize = 64;

/// Largest shell radius around every minimum on which the Hessian stays
/// positive, shrunk by 10%, and the c certified on that ball.
fn scan_convexity(spec: &PotentialSpec) -> Result<(f64, f64)> {
    let dirs = sphere_directions(spec.dim, SHELL_DIRECTIONS * spec.dim.max(1), 11);
    let scale = spec.minima.iter().map(|a| norm(a)).fold(1.0, f64::max);
    let max_shells = (scale / SHELL_STEP).ceil() as usize;
    let mut reach = f64::INFINITY;
    for a in &spec.minima {
        if spec.min_hessian_eigenvalue(a) <= 0.0 {
            return Err(Error::HypothesisScanFailed(format!(
                "Hessian is not positive definite at the minimum {a:?}"
            )));
        }
        let mut last_good = 0.0;
        for k in 1..=max_shells {
            let r = k as f64 * SHELL_STEP;
            let ok = dirs.iter().all(|d| {
                let u: Vec<f64> = a.iter().zip(d).map(|(x, y)| x + r * y).collect();
                spec.min_hessian_eigenvalue(&u) > 0.0
            });
            if !ok {
                break;
            }
            last_good = r;
        }
        reach = reach.min(last_good);
    }
    if reach <= 0.0 {
        return Err(Error::HypothesisScanFailed(
            "no shell around the minima keeps a positive Hessian".into(),
        ));
    }
    let q_bar = 0.9 * reach;
    let lam = min_hessian_on_balls(spec, q_bar, &dirs);
    if lam <= 0.0 {
        return Err(Error::HypothesisScanFailed(format!(
            "minimum Hessian eigenvalue {lam} on the q_bar-balls is not positive"
        )));
    }
    Ok(((lam / 2.0).sqrt(), q_bar))
}

fn min_hessian_on_balls(spec: &PotentialSpec, radius: f64, dirs: &[Vec<f64>]) -> f64 {
    let shells = (radius / SHELL_STEP).ceil().max(1.0) as usize;
    let mut lam = f64::INFINITY;
    for a in &spec.minima {
        lam = lam.min(spec.min_hessian_eigenvalue(a));
        for k in 1..=shells {
            let r = radius * k as f64 / shells as f64;
            for d in dirs {
                let u: Vec<f64> = a.iter().zip(d).map(|(x, y)| x + r * y).collect();
                lam = lam.min(spec.min_hessian_eigenvalue(&u));
            }
        }
    }
    lam
}

/// Radial derivative d/ds W(s u) at s = 1, i.e. <W_u(u), u>.
fn radial_derivative(spec: &PotentialSpec, u: &[f64]) -> f64 {
    let mut g = vec![0.0; spec.dim];
    spec.value_and_gradient(u, &mut g);
    dot(&g, u)
}

/// First radius r_k = max|a_i| (1 + k/4) such that W increases along rays on [r, 4r].
fn scan_invariant_radius(spec: &PotentialSpec) -> Result<f64> {
    let base = spec.minima.iter().map(|a| norm(a)).fold(0.0, f64::max).max(1e-3);
    let dirs = sphere_directions(spec.dim, 256 * spec.dim, 13);
    for k in 1..=40 {
        let r = base * (1.0 + 0.25 * k as f64);
        let ok = (0..=24).all(|j| {
            let s = r * (1.0 + 3.0 * j as f64 / 24.0);
            dirs.iter().all(|d| {
                let u: Vec<f64> = d.iter().map(|x| s * x).collect();
                radial_derivative(spec, &u) >= 0.0
            })
        });
        if ok {
            return Ok(r);
        }
    }
    Err(Error::HypothesisScanFailed(
        "W does not increase along rays at any scanned radius".into(),
    ))
}

/// The monitor function Q(u) = |u - a1| + H(u - a1).
#[derive(Debug, Clone, Serialize)]
pub struct QSpec {
    pub base: Vec<f64>,
    /// Perturbation H as a polynomial in v = u - a1; `None` means H = 0.
    pub h: Option<Polynomial>,
    /// Q_bar = max of Q over |u| <= M.
    pub q_max: f64,
}

impl QSpec {
    /// Default Q = |u - a1|.
    pub fn distance(a1: &[f64], m: f64) -> Self {
        QSpec {
            base: a1.to_vec(),
            h: None,
            q_max: norm(a1) + m,
        }
    }

    /// Q with perturbation H; checks H(0) = 0, H_u(0) = 0 and midpoint convexity.
    pub fn with_perturbation(a1: &[f64], h: Polynomial, m: f64) -> Result<Self> {
        let n = a1.len();
        if h.dim != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: h.dim,
            });
        }
        let zero = vec![0.0; n];
        let mut g = vec![0.0; n];
        h.gradient_into(&zero, &mut g);
        if h.value(&zero).abs() > 1e-12 || norm(&g) > 1e-12 {
            return Err(Error::Precondition(
                "perturbation H must satisfy H(0) = 0 and H_u(0) = 0".into(),
            ));
        }
        let mut q = QSpec {
            base: a1.to_vec(),
            h: Some(h),
            q_max: 0.0,
        };
        q.check_convexity(m + 1.0, 2000, 17)?;
        q.q_max = sphere_directions(n, 512 * n, 19)
            .iter()
            .map(|d| {
                let u: Vec<f64> = d.iter().map(|x| m * x).collect();
                q.value(&u)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(q)
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        let v: Vec<f64> = u.iter().zip(&self.base).map(|(x, a)| x - a).collect();
        let mut q = norm(&v);
        if let Some(h) = &self.h {
            q += h.value(&v);
        }
        q
    }

    /// Q and Q_u, with Q_u(a1) = 0.
    pub fn value_and_gradient(&self, u: &[f64], out: &mut [f64]) -> f64 {
        let n = u.len();
        let mut r2 = 0.0;
        for k in 0..n {
            let v = u[k] - self.base[k];
            out[k] = v;
            r2 += v * v;
        }
        let r = r2.sqrt();
        if r > 0.0 {
            out.iter_mut().for_each(|x| *x /= r);
        } else {
            out.iter_mut().for_each(|x| *x = 0.0);
            return 0.0;
        }
        match &self.h {
            None => r,
            Some(h) => {
                let v: Vec<f64> = u.iter().zip(&self.base).map(|(x, a)| x - a).collect();
                let mut hg = vec![0.0; n];
                h.gradient_into(&v, &mut hg);
                out.iter_mut().zip(&hg).for_each(|(o, g)| *o += g);
                r + h.value(&v)
            }
        }
    }

    /// Midpoint convexity on random pairs in the ball of the given radius.
    pub fn check_convexity(&self, radius: f64, pairs: usize, seed: u64) -> Result<()> {
        let n = self.base.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..pairs {
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-radius..radius)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-radius..radius)).collect();
            let mid: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
            if self.value(&mid) > 0.5 * (self.value(&u) + self.value(&v)) + 1e-12 {
                return Err(Error::NonConvexQ { u, v });
            }
        }
        Ok(())
    }
}

/// (Q, Q_u) at u.
pub fn eval_q(q: &QSpec, u: &[f64]) -> (f64, Vec<f64>) {
    let mut g = vec![0.0; u.len()];
    let v = q.value_and_gradient(u, &mut g);
    (v, g)
}

/// Sampled outcome of the four hypotheses on (W, Q).
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub h1_min_eigenvalue: f64,
    pub h1_c: f64,
    pub h1_pass: bool,
    pub max_w_at_minima: f64,
    pub min_w_off_minima: f64,
    pub g_invariance_max: f64,
    pub h2_min_radial_derivative: f64,
    pub h2_pass: bool,
    pub h3_minima_in_closure: usize,
    pub h3_pass: bool,
    pub h4_min: f64,
    pub h4_violations: Vec<Vec<f64>>,
    pub h4_pass: bool,
    /// min over the q_bar-ball of <Q_u, W_u> / Q, the rate used by the barrier argument.
    pub q_monotone_rate: f64,
}

impl HypothesisReport {
    /// True unless the Q-monotonicity sample failed; a false value flags
    /// downstream subharmonicity results.
    pub fn admissible(&self) -> bool {
        self.h4_pass
    }
}

const H4_TOL: f64 = 1e-10;
const MAX_LISTED_VIOLATIONS: usize = 64;

pub fn check_hypotheses(
    spec: &PotentialSpec,
    q: &QSpec,
    group: &ReflectionGroup,
    orbit: &OrbitInfo,
    samples: usize,
) -> Result<HypothesisReport> {
    if samples < 1000 {
        return Err(Error::Precondition(format!(
            "hypothesis checks need at least 1000 samples, got {samples}"
        )));
    }
    let n = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(0x4859_5054);
    let dirs = sphere_directions(n, samples, 23);

    // H1
    let mut lam = f64::INFINITY;
    let mut rate = f64::INFINITY;
    let mut wg = vec![0.0; n];
    let mut qg = vec![0.0; n];
    for a in &spec.minima {
        lam = lam.min(spec.min_hessian_eigenvalue(a));
    }
    for _ in 0..samples {
        let a = &spec.minima[rng.gen_range(0..spec.minima.len())];
        let d = &dirs[rng.gen_range(0..dirs.len())];
        let r = spec.q_bar * rng.gen::<f64>().sqrt();
        let u: Vec<f64> = a.iter().zip(d).map(|(x, y)| x + r * y).collect();
        lam = lam.min(spec.min_hessian_eigenvalue(&u));
    }
    for d in &dirs {
        for k in 1..=8 {
            let r = spec.q_bar * k as f64 / 8.0;
            let u: Vec<f64> = q.base.iter().zip(d).map(|(x, y)| x + r * y).collect();
            let qv = q.value_and_gradient(&u, &mut qg);
            spec.value_and_gradient(&u, &mut wg);
            rate = rate.min(dot(&qg, &wg) / qv);
        }
    }
    let h1_pass = lam > 0.0 && lam >= 2.0 * spec.c * spec.c * (1.0 - 1e-9);

    // W vanishes exactly on the minima and is invariant
    let max_w_at_minima = spec
        .minima
        .iter()
        .map(|a| spec.value(a).abs())
        .fold(0.0, f64::max);
    let mut min_w_off = f64::INFINITY;
    let mut inv = 0.0f64;
    let box_r = spec.m + 1.0;
    for _ in 0..samples {
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-box_r..box_r)).collect();
        let near = spec
            .minima
            .iter()
            .any(|a| crate::mat::dist(a, &u) < 0.1 * spec.q_bar);
        let w = spec.value(&u);
        if !near {
            min_w_off = min_w_off.min(w);
        }
        for g in group.elements() {
            let gu = g.apply(&u);
            inv = inv.max((spec.value(&gu) - w).abs() / (1.0 + w.abs()));
        }
    }

    // H2
    let h2 = dirs
        .iter()
        .map(|d| {
            let u: Vec<f64> = d.iter().map(|x| spec.m * x).collect();
            radial_derivative(spec, &u)
        })
        .fold(f64::INFINITY, f64::min);

    // H3
    let in_closure = spec
        .minima
        .iter()
        .filter(|a| group.in_closure(a))
        .count();

    // H4 over D intersected with |u| <= M
    let mut h4 = f64::INFINITY;
    let mut violations = Vec::new();
    let mut drawn = 0;
    while drawn < samples {
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-spec.m..spec.m)).collect();
        if norm(&u) > spec.m || !orbit.region(&u).in_d {
            continue;
        }
        if crate::mat::dist(&u, &q.base) < 1e-12 {
            continue;
        }
        drawn += 1;
        q.value_and_gradient(&u, &mut qg);
        spec.value_and_gradient(&u, &mut wg);
        let p = dot(&qg, &wg);
        h4 = h4.min(p);
        if p < -H4_TOL && violations.len() < MAX_LISTED_VIOLATIONS {
            violations.push(u);
        }
    }

    Ok(HypothesisReport {
        h1_min_eigenvalue: lam,
        h1_c: if lam > 0.0 { (lam / 2.0).sqrt() } else { 0.0 },
        h1_pass,
        max_w_at_minima,
        min_w_off_minima: min_w_off,
        g_invariance_max: inv,
        h2_min_radial_derivative: h2,
        h2_pass: h2 >= -H4_TOL,
        h3_minima_in_closure: in_closure,
        h3_pass: in_closure == 1,
        h4_min: h4,
        h4_pass: h4 >= -H4_TOL,
        h4_violations: violations,
        q_monotone_rate: rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coxeter::{dihedral_generators, generate_group, orbit_and_stabilizer};
    use proptest::{prop_assert, proptest};
    use std::sync::OnceLock;

    fn tri() -> PotentialSpec {
        static SPEC: OnceLock<PotentialSpec> = OnceLock::new();
        SPEC.get_or_init(|| make_triangle_potential().unwrap()).clone()
    }

    fn fd_gradient(f: impl Fn(&[f64]) -> f64, u: &[f64], step: f64) -> Vec<f64> {
        (0..u.len())
            .map(|k| {
                let mut p = u.to_vec();
                let mut m = u.to_vec();
                p[k] += step;
                m[k] -= step;
                (f(&p) - f(&m)) / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn triangle_values() {
        let s = tri();
        assert_eq!(s.value(&[1.0, 0.0]), 0.0);
        assert_eq!(s.value(&[0.0, 0.0]), 1.0);
        for a in &s.minima {
            let e = eval_potential(&s, a, false);
            assert!(e.w.abs() < 1e-12);
            assert!(norm(&e.grad) < 1e-12);
        }
    }

    #[test]
    fn triangle_constants() {
        let s = tri();
        // lambda_min = 2(9|z|^4 - 6|z||z^3 - 1|) is positive until about 0.26 from a1
        assert!(s.q_bar > 0.2 && s.q_bar < 0.27, "q_bar = {}", s.q_bar);
        assert!(s.c > 0.3 && s.c < 3.0, "c = {}", s.c);
        assert!((s.m - 1.25).abs() < 1e-12, "M = {}", s.m);
        let lam_a1 = s.min_hessian_eigenvalue(&[1.0, 0.0]);
        assert!((lam_a1 - 18.0).abs() < 1e-10);
    }

    #[test]
    fn closed_form_matches_polynomial_expansion() {
        let s = tri();
        let p = Polynomial::triangle();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut g = vec![0.0; 2];
        let mut gp = vec![0.0; 2];
        for _ in 0..500 {
            let u = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let w = s.value_and_gradient(&u, &mut g);
            p.gradient_into(&u, &mut gp);
            assert!((w - p.value(&u)).abs() <= 1e-11 * (1.0 + w.abs()));
            assert!(crate::mat::dist(&g, &gp) <= 1e-10 * (1.0 + norm(&g)));
            assert!(s.hessian(&u).dist(&p.hessian(&u)) <= 1e-9 * (1.0 + w.abs()));
        }
    }

    #[test]
    fn negated_potential_fails_h1() {
        let base = tri();
        let neg = PotentialSpec::with_constants(
            2,
            PotentialKind::Polynomial(Polynomial::triangle().negated()),
            base.minima.clone(),
            base.c,
            base.q_bar,
            base.m,
        );
        let g = generate_group(2, &dihedral_generators(3)).unwrap();
        let o = orbit_and_stabilizer(&g, &[1.0, 0.0]).unwrap();
        let q = QSpec::distance(&[1.0, 0.0], base.m);
        let r = check_hypotheses(&neg, &q, &g, &o, 1000).unwrap();
        assert!(!r.h1_pass);
        assert!(r.h1_min_eigenvalue < 0.0);
        let scan = make_potential(
            2,
            PotentialKind::Polynomial(Polynomial::triangle().negated()),
            base.minima,
        );
        assert!(matches!(scan, Err(Error::HypothesisScanFailed(_))));
    }

    #[test]
    fn triangle_hypotheses() {
        let s = tri();
        let g = generate_group(2, &dihedral_generators(3)).unwrap();
        let o = orbit_and_stabilizer(&g, &[1.0, 0.0]).unwrap();
        let q = QSpec::distance(&[1.0, 0.0], s.m);
        let r = check_hypotheses(&s, &q, &g, &o, 4000).unwrap();
        assert!(r.h1_pass && r.h1_c > 0.0);
        assert!(r.h2_pass);
        assert!(r.h3_pass);
        assert_eq!(r.h3_minima_in_closure, 1);
        assert!(r.g_invariance_max < 1e-10);
        assert!(r.max_w_at_minima < 1e-12);
        assert!(r.min_w_off_minima > 0.0);
        // inside the q_bar-ball <Q_u, W_u> >= c^2 Q
        assert!(r.q_monotone_rate >= s.c * s.c);
        // Near the origin W_u ~ -6 conj(z)^2, so <Q_u, W_u> ~ 6 r^2 cos(2 theta) < 0
        // for theta in (pi/4, pi/3): the distance monitor is not Q-monotone there.
        assert!(!r.h4_pass);
        assert!(r.h4_violations.iter().all(|u| {
            let t = u[1].atan2(u[0]).abs();
            t > std::f64::consts::FRAC_PI_4 - 0.2
        }));
    }

    #[test]
    fn q_examples() {
        let q = QSpec::distance(&[1.0, 0.0], 2.0);
        let (v, g) = eval_q(&q, &[1.0, 0.0]);
        assert_eq!(v, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
        let r = 2.5;
        let (v, g) = eval_q(&q, &[1.0 + 0.6 * r, 0.8 * r]);
        assert!((v - r).abs() < 1e-14);
        assert!((norm(&g) - 1.0).abs() < 1e-14);
        assert_eq!(q.q_max, 3.0);
    }

    #[test]
    fn perturbed_q_max_by_sampling() {
        // H(v) = 0.1 |v|^2 keeps Q convex; its max over |u| <= 2 is at u = (-2, 0)
        let h = Polynomial::new(2, vec![Monomial::new(0.1, &[2, 0]), Monomial::new(0.1, &[0, 2])])
            .unwrap();
        let q = QSpec::with_perturbation(&[1.0, 0.0], h, 2.0).unwrap();
        assert!((q.q_max - 3.9).abs() < 1e-6);
        let bad = Polynomial::new(2, vec![Monomial::new(-2.0, &[2, 0])]).unwrap();
        assert!(matches!(
            QSpec::with_perturbation(&[1.0, 0.0], bad, 2.0),
            Err(Error::NonConvexQ { .. })
        ));
        let shifted = Polynomial::new(2, vec![Monomial::new(1.0, &[1, 0])]).unwrap();
        assert!(QSpec::with_perturbation(&[1.0, 0.0], shifted, 2.0).is_err());
    }

    #[test]
    fn hessian_symmetric_and_matches_gradient_differences() {
        let s = tri();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let u = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
            let h = s.hessian(&u);
            assert!(h.dist(&h.transpose()) <= 1e-8);
            for k in 0..2 {
                let fd = fd_gradient(
                    |x| {
                        let mut g = vec![0.0; 2];
                        s.value_and_gradient(x, &mut g);
                        g[k]
                    },
                    &u,
                    1e-5,
                );
                for j in 0..2 {
                    assert!((fd[j] - h.get(k, j)).abs() <= 1e-5 * (1.0 + h.get(k, j).abs()));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences(a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let s = tri();
            let u = [a, b];
            let g = eval_potential(&s, &u, false).grad;
            let fd = fd_gradient(|x| s.value(x), &u, 1e-5);
            prop_assert!(crate::mat::dist(&g, &fd) <= 1e-6 * (1.0 + norm(&g)));
        }

        #[test]
        fn w_is_group_invariant(a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let s = tri();
            let g = generate_group(2, &dihedral_generators(3)).unwrap();
            let w = s.value(&[a, b]);
            for e in g.elements() {
                let gu = e.apply(&[a, b]);
                prop_assert!((s.value(&gu) - w).abs() <= 1e-10 * (1.0 + w));
            }
        }

        #[test]
        fn q_is_convex_and_stabilizer_invariant(
            u in proptest::collection::vec(-3.0f64..3.0, 2),
            v in proptest::collection::vec(-3.0f64..3.0, 2),
        ) {
            let q = QSpec::distance(&[1.0, 0.0], 1.25);
            let mid: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
            prop_assert!(q.value(&mid) <= 0.5 * (q.value(&u) + q.value(&v)) + 1e-12);
            let flip = [u[0], -u[1]];
            prop_assert!((q.value(&flip) - q.value(&u)).abs() <= 1e-12);
            if crate::mat::dist(&u, &[1.0, 0.0]) > 1e-9 {
                prop_assert!(q.value(&u) > 0.0);
            }
        }
    }
}
