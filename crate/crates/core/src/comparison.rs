//! Radial comparison functions: the modified-Helmholtz profile inside a ball,
//! the harmonic profile on the surrounding annulus, the harmonic bridge
//! across the glue radius, and the glued barrier sigma.

use crate::error::{Error, Result};
use serde::Serialize;

/// Samples per exported profile.
pub const PROFILE_SAMPLES: usize = 2048;

/// Largest c*l accepted before the regular solution overflows.
pub const MAX_CL: f64 = 700.0;

const DELTA_ITERATIONS: usize = 40;
const L0_SEARCH_LIMIT: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Phi1,
    Phi2,
    Theta,
    Sigma,
}

/// Parameters a profile was built from; unused ones are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ProfileParams {
    pub n: usize,
    pub c: f64,
    pub q_bar: f64,
    pub q_max: f64,
    pub l: f64,
    #[serde(rename = "L")]
    pub big_l: f64,
    pub lambda: f64,
    pub delta: f64,
}

/// A radial function sampled on a uniform grid with exact derivatives at the
/// samples; off-sample values use cubic Hermite interpolation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    pub kind: ProfileKind,
    pub params: ProfileParams,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
}

impl RadialProfile {
    fn sampled(
        kind: ProfileKind,
        params: ProfileParams,
        a: f64,
        b: f64,
        f: impl Fn(f64) -> (f64, f64),
    ) -> Self {
        let radii = uniform(a, b, PROFILE_SAMPLES);
        let (values, derivatives) = radii.iter().map(|&r| f(r)).unzip();
        RadialProfile {
            kind,
            params,
            radii,
            values,
            derivatives,
        }
    }

    pub fn start(&self) -> f64 {
        self.radii[0]
    }

    pub fn end(&self) -> f64 {
        *self.radii.last().expect("profiles are never empty")
    }

    fn locate(&self, r: f64) -> (usize, f64, f64) {
        let a = self.start();
        let step = (self.end() - a) / (self.radii.len() - 1) as f64;
        let k = (((r - a) / step).floor().max(0.0) as usize).min(self.radii.len() - 2);
        let t = (r - self.radii[k]) / step;
        (k, t, step)
    }

    /// Value at r in [start, end]; NaN outside.
    pub fn value(&self, r: f64) -> f64 {
        if !self.contains(r) {
            return f64::NAN;
        }
        let (k, t, s) = self.locate(r);
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (d0, d1) = (self.derivatives[k] * s, self.derivatives[k + 1] * s);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1
    }

    /// First derivative at r in [start, end]; NaN outside.
    pub fn derivative(&self, r: f64) -> f64 {
        if !self.contains(r) {
            return f64::NAN;
        }
        let (k, t, s) = self.locate(r);
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (d0, d1) = (self.derivatives[k] * s, self.derivatives[k + 1] * s);
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * d1)
            / s
    }

    pub fn contains(&self, r: f64) -> bool {
        let tol = 1e-12 * self.end().abs().max(1.0);
        r >= self.start() - tol && r <= self.end() + tol
    }

    /// CSV with header r,value,derivative.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,value,derivative\n");
        for ((r, v), d) in self.radii.iter().zip(&self.values).zip(&self.derivatives) {
            s.push_str(&format!("{r:.16e},{v:.16e},{d:.16e}\n"));
        }
        s
    }
}

fn uniform(a: f64, b: f64, count: usize) -> Vec<f64> {
    let step = (b - a) / (count - 1) as f64;
    (0..count)
        .map(|i| if i + 1 == count { b } else { a + step * i as f64 })
        .collect()
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{name} must be positive, got {v}")))
    }
}

/// Regular solution of psi'' + (n-1)/r psi' = c^2 psi with psi(0) = 1, sampled
/// at `radii` (ascending, starting at 0). Returns (psi, psi').
fn regular_solution(n: usize, c: f64, radii: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let c2 = c * c;
    let rhs = |r: f64, y: [f64; 2]| [y[1], c2 * y[0] - (nf - 1.0) / r * y[1]];
    let series = |r: f64| {
        let r2 = r * r;
        let a = c2 / (2.0 * nf);
        let b = c2 * c2 / (8.0 * nf * (nf + 2.0));
        [1.0 + a * r2 + b * r2 * r2, 2.0 * a * r + 4.0 * b * r2 * r]
    };
    let spacing = radii.get(1).copied().unwrap_or(1.0);
    let r_series = (1e-3 / c).min(0.5 * spacing);
    let h_max = 2e-3 / c;
    let mut values = Vec::with_capacity(radii.len());
    let mut slopes = Vec::with_capacity(radii.len());
    let mut r = r_series;
    let mut y = series(r);
    for &target in radii {
        if target <= r_series {
            let s = series(target);
            values.push(s[0]);
            slopes.push(s[1]);
            continue;
        }
        let span = target - r;
        let steps = (span / h_max).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for _ in 0..steps {
            let k1 = rhs(r, y);
            let k2 = rhs(r + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = rhs(r + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = rhs(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for j in 0..2 {
                y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            r += h;
        }
        r = target;
        values.push(y[0]);
        slopes.push(y[1]);
    }
    (values, slopes)
}

/// phi1 on [0, l]: radial solution of Lap phi = c^2 phi in B_l with phi = q_bar
/// on the boundary.
pub fn solve_phi1(n: usize, c: f64, q_bar: f64, l: f64) -> Result<RadialProfile> {
    if n == 0 {
        return Err(Error::Precondition("dimension must be at least 1".into()));
    }
    check_positive("c", c)?;
    check_positive("q_bar", q_bar)?;
    check_positive("l", l)?;
    if c * l > MAX_CL {
        return Err(Error::Overflow { cl: c * l });
    }
    let radii = uniform(0.0, l, PROFILE_SAMPLES);
    let (psi, dpsi) = regular_solution(n, c, &radii);
    let scale = q_bar / psi[psi.len() - 1];
    Ok(RadialProfile {
        kind: ProfileKind::Phi1,
        params: ProfileParams {
            n,
            c,
            q_bar,
            l,
            ..Default::default()
        },
        radii,
        values: psi.iter().map(|v| v * scale).collect(),
        derivatives: dpsi.iter().map(|v| v * scale).collect(),
    })
}

/// phi1'(l) alone.
pub fn phi1_slope(n: usize, c: f64, q_bar: f64, l: f64) -> Result<f64> {
    let p = solve_phi1(n, c, q_bar, l)?;
    Ok(*p.derivatives.last().expect("nonempty"))
}

/// phi1'' from the equation, at sample k.
pub fn phi1_second_derivative(p: &RadialProfile, k: usize) -> f64 {
    let ProfileParams { n, c, .. } = p.params;
    let r = p.radii[k];
    if r == 0.0 {
        // limit of (n-1)/r phi' is (n-1) phi''(0), so phi''(0) = c^2 phi(0)/n
        return c * c * p.values[k] / n as f64;
    }
    c * c * p.values[k] - (n as f64 - 1.0) / r * p.derivatives[k]
}

/// Largest h with phi1(r) <= exp(h (r - l)) phi1(l) on [0, l], over the samples.
pub fn phi1_exponential_rate(p: &RadialProfile) -> f64 {
    let l = p.end();
    let top = *p.values.last().expect("nonempty");
    p.radii
        .iter()
        .zip(&p.values)
        .filter(|(r, _)| **r < l)
        .map(|(r, v)| (top / v).ln() / (l - r))
        .fold(f64::INFINITY, f64::min)
}

/// Radial fundamental-solution shape: (f(r), f'(r)) with f harmonic in n dims.
fn harmonic_shape(n: usize, r: f64) -> (f64, f64) {
    match n {
        1 => (r, 1.0),
        2 => (r.ln(), 1.0 / r),
        _ => {
            let e = 2.0 - n as f64;
            (-r.powf(e) / (n as f64 - 2.0), r.powf(1.0 - n as f64))
        }
    }
}

/// Radial harmonic function on [a, b] with values va at a and vb at b.
fn harmonic_bridge(n: usize, a: f64, b: f64, va: f64, vb: f64) -> impl Fn(f64) -> (f64, f64) {
    let (fa, _) = harmonic_shape(n, a);
    let (fb, _) = harmonic_shape(n, b);
    let k = (vb - va) / (fb - fa);
    move |r| {
        let (f, df) = harmonic_shape(n, r);
        (va + k * (f - fa), k * df)
    }
}

/// phi2'(r) in closed form.
pub fn phi2_derivative(n: usize, q_bar: f64, q_max: f64, l: f64, big_l: f64, r: f64) -> f64 {
    let jump = q_max - q_bar;
    match n {
        1 => jump / (big_l - l),
        2 => jump / (r * (big_l / l).ln()),
        _ => {
            let m = n as f64 - 2.0;
            m * l.powf(m) * jump / (r.powf(n as f64 - 1.0) * (1.0 - (l / big_l).powf(m)))
        }
    }
}

/// phi2 on [l, L]: harmonic with phi2(l) = q_bar and phi2(L) = q_max.
pub fn phi2_profile(n: usize, q_bar: f64, q_max: f64, l: f64, big_l: f64) -> Result<RadialProfile> {
    if n == 0 {
        return Err(Error::Precondition("dimension must be at least 1".into()));
    }
    if !(l > 0.0 && big_l > l) {
        return Err(Error::DegenerateAnnulus {
            inner: l,
            outer: big_l,
        });
    }
    let f = harmonic_bridge(n, l, big_l, q_bar, q_max);
    Ok(RadialProfile::sampled(
        ProfileKind::Phi2,
        ProfileParams {
            n,
            q_bar,
            q_max,
            l,
            big_l,
            lambda: big_l - l,
            ..Default::default()
        },
        l,
        big_l,
        |r| {
            let (v, _) = f(r);
            (v, phi2_derivative(n, q_bar, q_max, l, big_l, r))
        },
    ))
}

/// phi1 on [0, l] glued to phi2 on [l, L].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GluedProfile {
    pub phi1: RadialProfile,
    pub phi2: RadialProfile,
}

impl GluedProfile {
    pub fn new(n: usize, c: f64, q_bar: f64, q_max: f64, l: f64, big_l: f64) -> Result<Self> {
        Ok(GluedProfile {
            phi1: solve_phi1(n, c, q_bar, l)?,
            phi2: phi2_profile(n, q_bar, q_max, l, big_l)?,
        })
    }

    pub fn l(&self) -> f64 {
        self.phi1.end()
    }

    pub fn value(&self, r: f64) -> f64 {
        if r <= self.l() {
            self.phi1.value(r)
        } else {
            self.phi2.value(r)
        }
    }
}

/// theta on [l - delta, l + delta]: radial harmonic function matching phi at both ends.
pub fn theta_profile(n: usize, phi: &GluedProfile, l: f64, delta: f64) -> Result<RadialProfile> {
    if !(delta > 0.0 && delta < l && l + delta <= phi.phi2.end()) {
        return Err(Error::DegenerateAnnulus {
            inner: l - delta,
            outer: l + delta,
        });
    }
    let (a, b) = (l - delta, l + delta);
    let (va, vb) = (phi.phi1.value(a), phi.phi2.value(b));
    let f = harmonic_bridge(n, a, b, va, vb);
    let p = &phi.phi2.params;
    Ok(RadialProfile::sampled(
        ProfileKind::Theta,
        ProfileParams {
            n,
            c: phi.phi1.params.c,
            q_bar: p.q_bar,
            q_max: p.q_max,
            l,
            big_l: p.big_l,
            lambda: p.lambda,
            delta,
        },
        a,
        b,
        f,
    ))
}

/// The glued barrier: phi outside the annulus (l - delta, l + delta), theta inside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sigma {
    pub phi: GluedProfile,
    pub theta: RadialProfile,
}

impl Sigma {
    pub fn new(phi: GluedProfile, delta: f64) -> Result<Self> {
        let n = phi.phi1.params.n;
        let theta = theta_profile(n, &phi, phi.l(), delta)?;
        Ok(Sigma { phi, theta })
    }

    pub fn l(&self) -> f64 {
        self.phi.l()
    }

    pub fn big_l(&self) -> f64 {
        self.phi.phi2.end()
    }

    pub fn delta(&self) -> f64 {
        self.theta.params.delta
    }

    /// sigma(r) for r in [0, L]; NaN outside.
    pub fn value(&self, r: f64) -> f64 {
        if self.theta.contains(r) {
            self.theta.value(r.clamp(self.theta.start(), self.theta.end()))
        } else {
            self.phi.value(r)
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        if self.theta.contains(r) {
            self.theta.derivative(r.clamp(self.theta.start(), self.theta.end()))
        } else if r <= self.l() {
            self.phi.phi1.derivative(r)
        } else {
            self.phi.phi2.derivative(r)
        }
    }

    /// Largest jump at the two glue radii.
    pub fn glue_mismatch(&self) -> f64 {
        let (a, b) = (self.theta.start(), self.theta.end());
        let left = (self.theta.values[0] - self.phi.phi1.value(a)).abs();
        let right = (self.theta.values[PROFILE_SAMPLES - 1] - self.phi.phi2.value(b)).abs();
        left.max(right)
    }

    pub fn profile(&self) -> RadialProfile {
        let mut params = self.theta.params;
        params.c = self.phi.phi1.params.c;
        RadialProfile::sampled(ProfileKind::Sigma, params, 0.0, self.big_l(), |r| {
            (self.value(r), self.derivative(r))
        })
    }
}

/// Search and gluing options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaOptions {
    /// l / L at the detection radius.
    pub rho: f64,
    /// Multiplicative step of the l0 search.
    pub growth: f64,
    /// Points per open annulus and per ball when checking the clauses.
    pub check_points: usize,
}

impl Default for SigmaOptions {
    fn default() -> Self {
        SigmaOptions {
            rho: 0.5,
            growth: 1.02,
            check_points: 512,
        }
    }
}

/// The three barrier clauses evaluated at one l.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClauseCheck {
    pub l: f64,
    pub phi1_slope: f64,
    pub phi2_slope: f64,
    /// phi1'(l) > phi2'(l) + mu.
    pub slope_gap_ok: bool,
    /// min of phi - theta over the open annulus samples.
    pub theta_margin: f64,
    pub theta_below_ok: bool,
    /// max of sigma over [0, l + delta'].
    pub sigma_sup: f64,
    pub sigma_below_ok: bool,
}

impl ClauseCheck {
    pub fn all(&self) -> bool {
        self.slope_gap_ok && self.theta_below_ok && self.sigma_below_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaConstants {
    pub l0: f64,
    pub lambda: f64,
    pub delta: f64,
    pub q_bar_prime: f64,
    pub delta_prime: f64,
    pub mu: f64,
    pub rho: f64,
    pub checks: Vec<ClauseCheck>,
}

impl SigmaConstants {
    pub fn all_clauses_hold(&self) -> bool {
        self.checks.iter().all(ClauseCheck::all)
    }
}

/// Distance past l at which theta first reaches q_bar, capped at delta.
fn theta_reach(theta: &RadialProfile, q_bar: f64) -> f64 {
    let l = theta.params.l;
    let (mut lo, mut hi) = (l, theta.end());
    if theta.value(hi) < q_bar {
        return hi - l;
    }
    if theta.value(lo) >= q_bar {
        return 0.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if theta.value(mid) < q_bar {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo - l
}

fn clause_check(
    sigma: &Sigma,
    mu: f64,
    delta_prime: f64,
    q_bar_prime: f64,
    points: usize,
) -> ClauseCheck {
    let l = sigma.l();
    let p = &sigma.phi.phi2.params;
    let phi1_slope = *sigma.phi.phi1.derivatives.last().expect("nonempty");
    let phi2_slope = phi2_derivative(p.n, p.q_bar, p.q_max, l, p.big_l, l);
    let (a, b) = (sigma.theta.start(), sigma.theta.end());
    let theta_margin = (1..points)
        .map(|i| {
            let r = a + (b - a) * i as f64 / points as f64;
            sigma.phi.value(r) - sigma.theta.value(r)
        })
        .fold(f64::INFINITY, f64::min);
    let top = l + delta_prime;
    let sigma_sup = (0..=points)
        .map(|i| sigma.value(top * i as f64 / points as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    ClauseCheck {
        l,
        phi1_slope,
        phi2_slope,
        slope_gap_ok: phi1_slope > phi2_slope + mu,
        theta_margin,
        theta_below_ok: theta_margin > 0.0,
        sigma_sup,
        sigma_below_ok: sigma_sup <= q_bar_prime && q_bar_prime < p.q_bar,
    }
}

/// Builds sigma with default options; see [`assemble_sigma_with`].
pub fn assemble_sigma(
    n: usize,
    c: f64,
    q_bar: f64,
    q_max: f64,
    l0_hint: f64,
) -> Result<(RadialProfile, SigmaConstants)> {
    let (sigma, k) = assemble_sigma_with(n, c, q_bar, q_max, l0_hint, &SigmaOptions::default())?;
    Ok((sigma.profile(), k))
}

/// Finds l0 (first l from the hint, growing geometrically, where phi1'(l)
/// beats phi2'(l) with L = l / rho), fixes lambda = l0 (1/rho - 1) and
/// mu = half the gap, then halves delta until theta stays below phi and
/// sigma stays below some q_bar' < q_bar near l, at l0, 2 l0 and 4 l0.
/// Returns sigma at l0 and the constants with the per-l checks.
pub fn assemble_sigma_with(
    n: usize,
    c: f64,
    q_bar: f64,
    q_max: f64,
    l0_hint: f64,
    opts: &SigmaOptions,
) -> Result<(Sigma, SigmaConstants)> {
    check_positive("c", c)?;
    check_positive("q_bar", q_bar)?;
    check_positive("l0_hint", l0_hint)?;
    if !(q_max > q_bar) {
        return Err(Error::Precondition(format!(
            "Q_max = {q_max} must exceed q_bar = {q_bar}"
        )));
    }
    if !(opts.rho > 0.0 && opts.rho < 1.0 && opts.growth > 1.0 && opts.check_points >= 2) {
        return Err(Error::Precondition("invalid sigma options".into()));
    }
    let mut l = l0_hint;
    let mut found = None;
    for _ in 0..L0_SEARCH_LIMIT {
        let d1 = phi1_slope(n, c, q_bar, l)?;
        let d2 = phi2_derivative(n, q_bar, q_max, l, l / opts.rho, l);
        if d1 > d2 {
            found = Some((l, 0.5 * (d1 - d2)));
            break;
        }
        l *= opts.growth;
    }
    let (l0, mu) = found.ok_or_else(|| {
        Error::Precondition(format!("no l0 found within {L0_SEARCH_LIMIT} search steps"))
    })?;
    let lambda = l0 * (1.0 / opts.rho - 1.0);
    let ls = [l0, 2.0 * l0, 4.0 * l0];
    let phis = ls
        .iter()
        .map(|&l| GluedProfile::new(n, c, q_bar, q_max, l, l + lambda))
        .collect::<Result<Vec<_>>>()?;
    let mut delta = 0.5 * l0.min(lambda);
    for _ in 0..DELTA_ITERATIONS {
        let sigmas = phis
            .iter()
            .map(|p| Sigma::new(p.clone(), delta))
            .collect::<Result<Vec<_>>>()?;
        let reach = sigmas
            .iter()
            .map(|s| theta_reach(&s.theta, q_bar))
            .fold(f64::INFINITY, f64::min);
        let delta_prime = 0.5 * reach;
        if delta_prime > 0.0 {
            let q_bar_prime = sigmas
                .iter()
                .map(|s| s.value(s.l() + delta_prime))
                .fold(f64::NEG_INFINITY, f64::max);
            let checks: Vec<_> = sigmas
                .iter()
                .map(|s| clause_check(s, mu, delta_prime, q_bar_prime, opts.check_points))
                .collect();
            if checks.iter().all(ClauseCheck::all) {
                let first = sigmas.into_iter().next().expect("three radii");
                return Ok((
                    first,
                    SigmaConstants {
                        l0,
                        lambda,
                        delta,
                        q_bar_prime,
                        delta_prime,
                        mu,
                        rho: opts.rho,
                        checks,
                    },
                ));
            }
        }
        delta *= 0.5;
    }
    Err(Error::NoAdmissibleDelta {
        iterations: DELTA_ITERATIONS,
    })
}
