//! Finite reflection groups acting on R^n: closure from generating mirrors,
//! the fundamental region F, stabilizers, orbits and the region D around a
//! chosen minimum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mat::{dot, norm, normalized, Mat};

/// Tolerance used to identify two group elements or two points.
pub const DEDUP_TOL: f64 = 1e-9;

/// Default cap on |G| before closure is abandoned.
pub const DEFAULT_CLOSURE_CAP: usize = 1024;

/// Half-space membership slack, relative to max(1, |x|).
const MEMBERSHIP_TOL: f64 = 1e-9;

/// A reflection x -> x - 2<x, eta> eta across the hyperplane orthogonal to `normal`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reflection {
    normal: Vec<f64>,
}

impl Reflection {
    /// Builds a reflection from any nonzero normal; the normal is rescaled to unit length.
    pub fn new(normal: &[f64]) -> Result<Self> {
        let r = norm(normal);
        if !(r.is_finite() && r > 1e-12) {
            return Err(Error::Precondition(format!(
                "reflection normal {normal:?} must be finite and nonzero"
            )));
        }
        Ok(Reflection {
            normal: normalized(normal),
        })
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    pub fn matrix(&self) -> Mat {
        Mat::householder(&self.normal)
    }
}

/// Applies the reflection to `x`.
pub fn reflect(x: &[f64], r: &Reflection) -> Vec<f64> {
    let s = 2.0 * dot(x, &r.normal);
    x.iter().zip(&r.normal).map(|(xi, ei)| xi - s * ei).collect()
}

/// Membership flags and distance to the boundary of D for a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionPoint {
    pub in_f: bool,
    pub in_d: bool,
    pub dist_d: f64,
}

/// A finite group of orthogonal maps generated by reflections.
#[derive(Debug, Clone)]
pub struct ReflectionGroup {
    dim: usize,
    elements: Vec<Mat>,
    generators: Vec<Reflection>,
    /// Indices into `elements` of the reflections (the set Gamma).
    reflections: Vec<usize>,
    /// One oriented unit normal per reflection, in the order of `reflections`.
    fund_normals: Vec<Vec<f64>>,
    seed: Vec<f64>,
}

/// Options for [`generate_group_with`].
#[derive(Debug, Clone)]
pub struct GroupOptions {
    /// Interior point of the fundamental region used to orient the mirrors.
    pub seed: Option<Vec<f64>>,
    pub cap: usize,
}

impl Default for GroupOptions {
    fn default() -> Self {
        GroupOptions {
            seed: None,
            cap: DEFAULT_CLOSURE_CAP,
        }
    }
}

/// Closes the generators under composition with default options.
pub fn generate_group(dim: usize, generators: &[Reflection]) -> Result<ReflectionGroup> {
    generate_group_with(dim, generators, &GroupOptions::default())
}

pub fn generate_group_with(
    dim: usize,
    generators: &[Reflection],
    opts: &GroupOptions,
) -> Result<ReflectionGroup> {
    if dim == 0 {
        return Err(Error::Precondition("dimension must be positive".into()));
    }
    for g in generators {
        if g.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: g.dim(),
            });
        }
    }
    let gens: Vec<Mat> = generators.iter().map(Reflection::matrix).collect();
    let mut elements = vec![Mat::identity(dim)];
    let mut frontier = 0;
    while frontier < elements.len() {
        let e = elements[frontier].clone();
        frontier += 1;
        for s in &gens {
            let p = s.mul(&e);
            if !elements.iter().any(|q| q.dist(&p) <= DEDUP_TOL) {
                if elements.len() >= opts.cap {
                    return Err(Error::ClosureOverflow { cap: opts.cap });
                }
                elements.push(p);
            }
        }
    }

    let identity = Mat::identity(dim);
    let mut reflections = Vec::new();
    let mut normals = Vec::new();
    for (idx, g) in elements.iter().enumerate() {
        if let Some(eta) = reflection_normal(g, &identity) {
            reflections.push(idx);
            normals.push(eta);
        }
    }

    let seed = match &opts.seed {
        Some(s) => {
            if s.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.len(),
                });
            }
            let s = normalized(s);
            if normals.iter().any(|eta| dot(&s, eta).abs() <= 1e-9) {
                return Err(Error::Precondition(format!(
                    "fundamental-region seed {s:?} lies on a mirror"
                )));
            }
            s
        }
        None => default_seed(dim, &normals)?,
    };
    let fund_normals = normals
        .into_iter()
        .map(|eta| {
            if dot(&seed, &eta) < 0.0 {
                eta.iter().map(|x| -x).collect()
            } else {
                eta
            }
        })
        .collect();

    Ok(ReflectionGroup {
        dim,
        elements,
        generators: generators.to_vec(),
        reflections,
        fund_normals,
        seed,
    })
}

/// Returns the unit normal if `g` is a reflection (spectrum {-1, 1, ..., 1}).
fn reflection_normal(g: &Mat, identity: &Mat) -> Option<Vec<f64>> {
    let n = g.dim();
    if g.dist(identity) <= DEDUP_TOL || g.dist(&g.transpose()) > DEDUP_TOL {
        return None;
    }
    if (g.trace() - (n as f64 - 2.0)).abs() > 1e-8 {
        return None;
    }
    // I - g = 2 eta eta^T
    let j = (0..n)
        .max_by(|&a, &b| (1.0 - g.get(a, a)).total_cmp(&(1.0 - g.get(b, b))))
        .expect("nonempty");
    let ej = ((1.0 - g.get(j, j)) / 2.0).sqrt();
    let col: Vec<f64> = (0..n)
        .map(|i| ((if i == j { 1.0 } else { 0.0 }) - g.get(i, j)) / (2.0 * ej))
        .collect();
    Some(normalized(&col))
}

/// A generic direction close to e1, nudged off every mirror.
fn default_seed(dim: usize, normals: &[Vec<f64>]) -> Result<Vec<f64>> {
    let ratios = [
        0.1 * std::f64::consts::SQRT_2,
        0.1 * 3f64.sqrt(),
        0.1 * 5f64.sqrt(),
        std::f64::consts::FRAC_1_PI,
        0.05 * std::f64::consts::E,
    ];
    for s in ratios {
        let v: Vec<f64> = (0..dim).map(|k| s.powi(k as i32)).collect();
        let v = normalized(&v);
        if normals.iter().all(|eta| dot(&v, eta).abs() > 1e-6) {
            return Ok(v);
        }
    }
    Err(Error::Precondition(
        "could not find a default fundamental-region seed off all mirrors".into(),
    ))
}

impl ReflectionGroup {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Mat] {
        &self.elements
    }

    pub fn generators(&self) -> &[Reflection] {
        &self.generators
    }

    /// Indices of the reflections (Gamma) within [`Self::elements`].
    pub fn reflection_indices(&self) -> &[usize] {
        &self.reflections
    }

    /// Oriented normals eta_gamma with F contained in every positive half-space.
    pub fn fund_normals(&self) -> &[Vec<f64>] {
        &self.fund_normals
    }

    pub fn seed(&self) -> &[f64] {
        &self.seed
    }

    /// True if `x` lies in the closed fundamental region.
    pub fn in_closure(&self, x: &[f64]) -> bool {
        let tol = MEMBERSHIP_TOL * norm(x).max(1.0);
        self.fund_normals.iter().all(|eta| dot(x, eta) >= -tol)
    }

    /// True if `x` lies in the open fundamental region.
    pub fn in_interior(&self, x: &[f64]) -> bool {
        let tol = MEMBERSHIP_TOL * norm(x).max(1.0);
        self.fund_normals.iter().all(|eta| dot(x, eta) > tol)
    }

    /// `min_gamma <y, eta_gamma>`, the positivity margin of a value y. `+inf` for {I}.
    pub fn positivity_margin(&self, y: &[f64]) -> f64 {
        self.fund_normals
            .iter()
            .map(|eta| dot(y, eta))
            .fold(f64::INFINITY, f64::min)
    }

    /// Region data with D taken to be F (trivial stabilizer view).
    pub fn region(&self, x: &[f64]) -> RegionPoint {
        half_space_region(x, &self.fund_normals, &self.fund_normals)
    }

    /// Some element g with g x in the closed fundamental region.
    pub fn fold_into_closure(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_margin = f64::NEG_INFINITY;
        for (k, g) in self.elements.iter().enumerate() {
            let y = g.apply(x);
            let m = self.positivity_margin(&y);
            if m >= -MEMBERSHIP_TOL * norm(x).max(1.0) {
                return k;
            }
            if m > best_margin {
                best_margin = m;
                best = k;
            }
        }
        best
    }
}

fn half_space_region(x: &[f64], f_normals: &[Vec<f64>], d_normals: &[Vec<f64>]) -> RegionPoint {
    let tol = MEMBERSHIP_TOL * norm(x).max(1.0);
    let in_f = f_normals.iter().all(|eta| dot(x, eta) > tol);
    let d_min = d_normals
        .iter()
        .map(|eta| dot(x, eta))
        .fold(f64::INFINITY, f64::min);
    let in_d = d_min > tol;
    RegionPoint {
        in_f,
        in_d,
        dist_d: if in_d { d_min } else { 0.0 },
    }
}

/// Stabilizer, orbit and the region D for a base point a1.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitInfo {
    pub base_point: Vec<f64>,
    /// Indices into the group's elements of G_{a1}.
    pub stabilizer: Vec<usize>,
    pub orbit: Vec<Vec<f64>>,
    pub count: usize,
    /// Oriented normals whose positive half-spaces intersect to D.
    pub region_d_normals: Vec<Vec<f64>>,
    /// Reflection indices (into `reflection_indices`) whose mirrors meet D (Gamma').
    pub mirrors_meeting_d: Vec<usize>,
    fund_normals: Vec<Vec<f64>>,
}

impl OrbitInfo {
    pub fn region(&self, x: &[f64]) -> RegionPoint {
        half_space_region(x, &self.fund_normals, &self.region_d_normals)
    }

    pub fn fund_normals(&self) -> &[Vec<f64>] {
        &self.fund_normals
    }

    /// True if `x` lies in the closure of D.
    pub fn in_d_closure(&self, x: &[f64]) -> bool {
        let tol = MEMBERSHIP_TOL * norm(x).max(1.0);
        self.region_d_normals.iter().all(|eta| dot(x, eta) >= -tol)
    }
}

/// Region flags and distance to the boundary of D.
pub fn region_geometry(x: &[f64], info: &OrbitInfo) -> RegionPoint {
    info.region(x)
}

pub fn orbit_and_stabilizer(group: &ReflectionGroup, a1: &[f64]) -> Result<OrbitInfo> {
    if a1.len() != group.dim() {
        return Err(Error::DimensionMismatch {
            expected: group.dim(),
            got: a1.len(),
        });
    }
    if norm(a1) <= DEDUP_TOL {
        return Err(Error::Precondition("base point a1 must be nonzero".into()));
    }
    if !group.in_closure(a1) {
        return Err(Error::NotInClosure { point: a1.to_vec() });
    }

    let mut stabilizer = Vec::new();
    let mut orbit: Vec<Vec<f64>> = Vec::new();
    for (k, g) in group.elements().iter().enumerate() {
        let y = g.apply(a1);
        if crate::mat::dist(&y, a1) <= DEDUP_TOL {
            stabilizer.push(k);
        }
        if !orbit.iter().any(|p| crate::mat::dist(p, &y) <= DEDUP_TOL) {
            orbit.push(y);
        }
    }
    let count = orbit.len();
    if count * stabilizer.len() != group.order() {
        return Err(Error::Precondition(format!(
            "orbit-stabilizer identity failed: {} * {} != {}",
            count,
            stabilizer.len(),
            group.order()
        )));
    }

    // D-closure membership straight from its definition: x in s F-bar for some s in G_{a1}.
    let stab_inverses: Vec<Mat> = stabilizer
        .iter()
        .map(|&k| group.elements()[k].transpose())
        .collect();
    let in_union = |x: &[f64]| stab_inverses.iter().any(|si| group.in_closure(&si.apply(x)));

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d0d0);
    let eps = 1e-3;
    let mut meeting = Vec::new();
    for (ri, eta) in group.fund_normals().iter().enumerate() {
        let mut hits = false;
        for _ in 0..64 {
            let p = random_point_on_mirror(eta, &mut rng);
            let mut probes = vec![p.clone()];
            for sgn in [1.0, -1.0] {
                probes.push(p.iter().zip(eta).map(|(a, b)| a + sgn * eps * b).collect());
                for k in 0..group.dim() {
                    let mut q = p.clone();
                    q[k] += sgn * eps;
                    probes.push(q);
                }
            }
            if probes.iter().all(|q| in_union(q)) {
                hits = true;
                break;
            }
        }
        if hits {
            meeting.push(ri);
        }
    }
    let region_d_normals = group
        .fund_normals()
        .iter()
        .enumerate()
        .filter(|(ri, _)| !meeting.contains(ri))
        .map(|(_, eta)| eta.clone())
        .collect();

    Ok(OrbitInfo {
        base_point: a1.to_vec(),
        stabilizer,
        orbit,
        count,
        region_d_normals,
        mirrors_meeting_d: meeting,
        fund_normals: group.fund_normals().to_vec(),
    })
}

fn random_point_on_mirror(eta: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..eta.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = dot(&v, eta);
        let p: Vec<f64> = v.iter().zip(eta).map(|(a, b)| a - s * b).collect();
        if norm(&p) > 1e-3 {
            return normalized(&p);
        }
    }
}

/// Generators of the dihedral group of order 2m: mirrors at angle pi/m, the
/// first mirror being the x1-axis.
pub fn dihedral_generators(m: usize) -> Vec<Reflection> {
    let theta = std::f64::consts::PI / m as f64;
    vec![
        Reflection::new(&[0.0, 1.0]).expect("unit"),
        Reflection::new(&[theta.sin(), -theta.cos()]).expect("unit"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Independent closure oracle: words in the generators up to a fixed length,
    /// compared as matrices.
    fn brute_force_order(gens: &[Reflection], max_len: usize) -> usize {
        let n = gens[0].dim();
        let mats: Vec<Mat> = gens.iter().map(|g| g.matrix()).collect();
        let mut found = vec![Mat::identity(n)];
        let mut layer = vec![Mat::identity(n)];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &layer {
                for s in &mats {
                    let p = w.mul(s);
                    if !found.iter().any(|q| q.dist(&p) < 1e-9) {
                        found.push(p.clone());
                        next.push(p);
                    }
                }
            }
            layer = next;
        }
        found.len()
    }

    fn d6() -> ReflectionGroup {
        generate_group(2, &dihedral_generators(3)).unwrap()
    }

    #[test]
    fn reflect_examples() {
        let r = Reflection::new(&[0.0, 1.0]).unwrap();
        assert_eq!(reflect(&[3.0, 4.0], &r), vec![3.0, -4.0]);
        assert_eq!(reflect(&[5.0, 0.0], &r), vec![5.0, 0.0]);
        let r = Reflection::new(&[(PI / 3.0).sin(), -(PI / 3.0).cos()]).unwrap();
        let y = reflect(&reflect(&[1.0, 2.0], &r), &r);
        assert!((y[0] - 1.0).abs() < 1e-14 && (y[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn empty_generators_give_trivial_group() {
        let g = generate_group(2, &[]).unwrap();
        assert_eq!(g.order(), 1);
        assert!(g.fund_normals().is_empty());
        let info = orbit_and_stabilizer(&g, &[1.0, 0.0]).unwrap();
        assert_eq!(info.count, 1);
        assert!(info.region(&[0.0, 0.0]).dist_d.is_infinite());
    }

    #[test]
    fn dihedral_orders_match_brute_force() {
        for m in [2, 3, 4, 6] {
            let gens = dihedral_generators(m);
            let g = generate_group(2, &gens).unwrap();
            assert_eq!(g.order(), 2 * m);
            assert_eq!(g.order(), brute_force_order(&gens, 4 * m));
            assert_eq!(g.reflection_indices().len(), m);
        }
    }

    #[test]
    fn closure_overflow_on_irrational_angle() {
        let gens = vec![
            Reflection::new(&[0.0, 1.0]).unwrap(),
            Reflection::new(&[1.0f64.sin(), -1.0f64.cos()]).unwrap(),
        ];
        let err = generate_group(2, &gens).unwrap_err();
        assert_eq!(err, Error::ClosureOverflow { cap: 1024 });
    }

    #[test]
    fn tetrahedral_group_order_24() {
        // A3: mirrors x1 = x2, x2 = x3, x3 = x4 restricted to R^3 via the standard
        // tetrahedral normals.
        let s = 0.5f64.sqrt();
        let gens = vec![
            Reflection::new(&[s, -s, 0.0]).unwrap(),
            Reflection::new(&[0.0, s, -s]).unwrap(),
            Reflection::new(&[s, s, 0.0]).unwrap(),
        ];
        let g = generate_group(3, &gens).unwrap();
        assert_eq!(g.order(), 24);
        assert_eq!(g.reflection_indices().len(), 6);
    }

    #[test]
    fn stabilizer_on_mirror_and_interior() {
        let g = d6();
        let info = orbit_and_stabilizer(&g, &[1.0, 0.0]).unwrap();
        assert_eq!(info.stabilizer.len(), 2);
        assert_eq!(info.count, 3);
        let inner = [(PI / 6.0).cos(), (PI / 6.0).sin()];
        let info = orbit_and_stabilizer(&g, &inner).unwrap();
        assert_eq!(info.stabilizer.len(), 1);
        assert_eq!(info.count, 6);
        // D = F when the stabilizer is trivial
        assert_eq!(info.region_d_normals.len(), g.fund_normals().len());
    }

    #[test]
    fn not_in_closure_rejected() {
        let g = d6();
        let err = orbit_and_stabilizer(&g, &[-1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::NotInClosure { .. }));
    }

    #[test]
    fn mirrors_meeting_d_are_stabilizer_reflections() {
        // Independent route: Gamma' coincides with the reflections fixing a1.
        for m in [2, 3, 4, 6] {
            let g = generate_group(2, &dihedral_generators(m)).unwrap();
            let info = orbit_and_stabilizer(&g, &[1.0, 0.0]).unwrap();
            let expected: Vec<usize> = g
                .reflection_indices()
                .iter()
                .enumerate()
                .filter(|(_, idx)| info.stabilizer.contains(idx))
                .map(|(ri, _)| ri)
                .collect();
            assert_eq!(info.mirrors_meeting_d, expected, "m = {m}");
        }
    }

    #[test]
    fn region_distances() {
        let g = d6();
        let info = orbit_and_stabilizer(&g, &[1.0, 0.0]).unwrap();
        let p = info.region(&[5.0, 0.0]);
        assert!(p.in_d);
        assert!((p.dist_d - 5.0 * (PI / 3.0).sin()).abs() < 1e-12);
        let on_mirror = [2.0 * (PI / 3.0).cos(), 2.0 * (PI / 3.0).sin()];
        let p = info.region(&on_mirror);
        assert!(!p.in_d);
        assert_eq!(p.dist_d, 0.0);
        let p = info.region(&[0.0, 0.0]);
        assert_eq!(p.dist_d, 0.0);
        assert!(!p.in_d);
    }

    #[test]
    fn fundamental_region_partitions_sphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in [3, 4] {
            let g = generate_group(2, &dihedral_generators(m)).unwrap();
            for _ in 0..1000 {
                let t: f64 = rng.gen_range(0.0..2.0 * PI);
                let x = [t.cos(), t.sin()];
                let hits = g
                    .elements()
                    .iter()
                    .filter(|e| g.in_interior(&e.apply(&x)))
                    .count();
                let on_boundary = g.fund_normals().iter().any(|eta| {
                    g.elements()
                        .iter()
                        .any(|e| dot(&e.apply(&x), eta).abs() < 1e-9)
                });
                if !on_boundary {
                    assert_eq!(hits, 1);
                }
            }
        }
    }

    #[test]
    fn group_is_closed_and_orthogonal() {
        let g = generate_group(2, &dihedral_generators(4)).unwrap();
        let id = Mat::identity(2);
        for a in g.elements() {
            assert!(a.transpose().mul(a).dist(&id) < 1e-10);
            for b in g.elements() {
                let p = a.mul(b);
                assert!(g.elements().iter().any(|c| c.dist(&p) < 1e-9));
            }
        }
        for &ri in g.reflection_indices() {
            let r = &g.elements()[ri];
            assert!(r.mul(r).dist(&id) < 1e-12);
        }
    }

    #[test]
    fn d_is_stabilizer_invariant() {
        let g = d6();
        let info = orbit_and_stabilizer(&g, &[1.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let inside = info.region(&x).in_d;
            for &s in &info.stabilizer {
                assert_eq!(info.region(&g.elements()[s].apply(&x)).in_d, inside);
            }
        }
    }
}
