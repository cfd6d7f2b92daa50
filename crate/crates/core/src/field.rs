//! Masked lattice discretization of the ball B_R, vector and scalar fields on
//! it, the discrete Laplacian and energy, group averaging, the affine seed and
//! the projection onto |u| <= M.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::coxeter::{OrbitInfo, ReflectionGroup};
use crate::error::{Error, Result};
use crate::mat::{dot, Mat};
use crate::potential::PotentialSpec;

/// Default cap on the number of grid nodes.
pub const DEFAULT_NODE_CAP: usize = 4_000_000;

/// Marker for a missing neighbor.
pub const NO_NODE: u32 = u32::MAX;

/// Compensated (Neumaier) running sum, so that reductions do not depend on
/// the magnitude ordering of their terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Lattice points h*i with |h*i| <= R, with a neighbor table.
#[derive(Debug, Clone, Serialize)]
pub struct BallGrid {
    dim: usize,
    radius: f64,
    h: f64,
    /// Lattice half-width: indices run over [-half, half] per axis.
    half: i32,
    /// Integer lattice coordinates, `dim` per node.
    index: Vec<i32>,
    /// Physical coordinates, `dim` per node.
    coords: Vec<f64>,
    /// `2 * dim` entries per node, ordered (+e_0, -e_0, +e_1, -e_1, ...).
    neighbors: Vec<u32>,
    /// Box position -> node id, or NO_NODE.
    #[serde(skip)]
    lookup: Vec<u32>,
}

pub fn build_grid(dim: usize, radius: f64, h: f64) -> Result<BallGrid> {
    build_grid_with_cap(dim, radius, h, DEFAULT_NODE_CAP)
}

pub fn build_grid_with_cap(dim: usize, radius: f64, h: f64, cap: usize) -> Result<BallGrid> {
    if !(2..=3).contains(&dim) {
        return Err(Error::Precondition(format!("grids support n = 2 or 3, got {dim}")));
    }
    if !(radius.is_finite() && h.is_finite() && h > 0.0 && h <= radius / 8.0) {
        return Err(Error::Precondition(format!(
            "grid needs 0 < h <= R/8, got R = {radius}, h = {h}"
        )));
    }
    let ratio = radius / h;
    let half = (ratio + 1e-9).floor() as i32;
    let side = (2 * half + 1) as usize;
    let boxed = side.pow(dim as u32);
    let estimate = match dim {
        2 => std::f64::consts::PI * ratio * ratio,
        _ => 4.0 / 3.0 * std::f64::consts::PI * ratio.powi(3),
    };
    if estimate > 1.1 * cap as f64 || boxed > 8 * cap.max(1) {
        return Err(Error::GridTooLarge {
            nodes: estimate as usize,
            cap,
        });
    }
    let r2 = ratio * ratio * (1.0 + 1e-12) + 1e-9;
    let mut lookup = vec![NO_NODE; boxed];
    let mut index = Vec::new();
    let mut coords = Vec::new();
    let mut count = 0usize;
    let mut idx = vec![-half; dim];
    for pos in 0..boxed {
        let mut rem = pos;
        for k in (0..dim).rev() {
            idx[k] = (rem % side) as i32 - half;
            rem /= side;
        }
        let s: f64 = idx.iter().map(|&i| (i as f64) * (i as f64)).sum();
        if s <= r2 {
            lookup[pos] = count as u32;
            index.extend_from_slice(&idx);
            coords.extend(idx.iter().map(|&i| i as f64 * h));
            count += 1;
        }
    }
    if count > cap {
        return Err(Error::GridTooLarge { nodes: count, cap });
    }
    let mut grid = BallGrid {
        dim,
        radius,
        h,
        half,
        index,
        coords,
        neighbors: Vec::new(),
        lookup,
    };
    let mut neighbors = vec![NO_NODE; 2 * dim * count];
    let mut probe = vec![0i32; dim];
    for node in 0..count {
        for k in 0..dim {
            for (s, sign) in [1i32, -1].into_iter().enumerate() {
                probe.copy_from_slice(grid.lattice_index(node));
                probe[k] += sign;
                if let Some(j) = grid.node_at(&probe) {
                    neighbors[node * 2 * dim + 2 * k + s] = j as u32;
                }
            }
        }
    }
    grid.neighbors = neighbors;
    Ok(grid)
}

impl BallGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn point(&self, node: usize) -> &[f64] {
        &self.coords[node * self.dim..(node + 1) * self.dim]
    }

    pub fn lattice_index(&self, node: usize) -> &[i32] {
        &self.index[node * self.dim..(node + 1) * self.dim]
    }

    /// Neighbor ids in the order (+e_0, -e_0, +e_1, ...), NO_NODE where absent.
    pub fn neighbors(&self, node: usize) -> &[u32] {
        let w = 2 * self.dim;
        &self.neighbors[node * w..(node + 1) * w]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.neighbors(node).iter().any(|&j| j == NO_NODE)
    }

    /// Outward staircase normal of a boundary node: the normalized sum of the
    /// directions with a missing neighbor.
    pub fn outward_normal(&self, node: usize) -> Option<Vec<f64>> {
        let nb = self.neighbors(node);
        let mut v = vec![0.0; self.dim];
        for k in 0..self.dim {
            if nb[2 * k] == NO_NODE {
                v[k] += 1.0;
            }
            if nb[2 * k + 1] == NO_NODE {
                v[k] -= 1.0;
            }
        }
        let r = crate::mat::norm(&v);
        if nb.iter().all(|&j| j != NO_NODE) {
            None
        } else if r == 0.0 {
            Some(vec![0.0; self.dim])
        } else {
            Some(v.iter().map(|x| x / r).collect())
        }
    }

    pub fn node_at(&self, idx: &[i32]) -> Option<usize> {
        let side = 2 * self.half + 1;
        let mut pos = 0usize;
        for &i in idx {
            if i < -self.half || i > self.half {
                return None;
            }
            pos = pos * side as usize + (i + self.half) as usize;
        }
        match self.lookup[pos] {
            NO_NODE => None,
            j => Some(j as usize),
        }
    }

    /// Node whose lattice point is nearest to `x`, if it lies in the grid.
    pub fn nearest_node(&self, x: &[f64]) -> Option<usize> {
        let idx: Vec<i32> = x.iter().map(|v| (v / self.h).round() as i32).collect();
        self.node_at(&idx)
    }

    /// Interpolation stencil at `p`: multilinear weights when every cell
    /// corner is a node, otherwise an affine-exact weighted least-norm stencil
    /// over the nodes of the surrounding 4^n block, so accuracy stays second
    /// order next to the staircase boundary. Coordinates within 1e-9 cells of
    /// a lattice plane snap onto it.
    pub fn interpolation_stencil(&self, p: &[f64], out: &mut Vec<(u32, f64)>) {
        out.clear();
        let n = self.dim;
        let mut base = [0i32; 3];
        let mut frac = [0.0f64; 3];
        for k in 0..n {
            let s = p[k] / self.h;
            let r = s.round();
            if (s - r).abs() < 1e-9 {
                base[k] = r as i32;
                frac[k] = 0.0;
            } else {
                let f = s.floor();
                base[k] = f as i32;
                frac[k] = s - f;
            }
        }
        let mut corner = [0i32; 3];
        let mut complete = true;
        for mask in 0..(1usize << n) {
            let mut w = 1.0;
            for k in 0..n {
                if mask >> k & 1 == 1 {
                    w *= frac[k];
                    corner[k] = base[k] + 1;
                } else {
                    w *= 1.0 - frac[k];
                    corner[k] = base[k];
                }
            }
            if w == 0.0 {
                continue;
            }
            match self.node_at(&corner[..n]) {
                Some(j) => out.push((j as u32, w)),
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if complete {
            return;
        }
        out.clear();
        self.boundary_stencil(p, &base[..n], out);
    }

    fn boundary_stencil(&self, p: &[f64], base: &[i32], out: &mut Vec<(u32, f64)>) {
        let n = self.dim;
        let mut cand: Vec<(u32, Vec<f64>, f64)> = Vec::new();
        let mut idx = vec![0i32; n];
        let span = 4usize.pow(n as u32);
        for m in 0..span {
            let mut rem = m;
            for k in 0..n {
                idx[k] = base[k] - 1 + (rem % 4) as i32;
                rem /= 4;
            }
            if let Some(j) = self.node_at(&idx) {
                let d: Vec<f64> = (0..n).map(|k| (self.point(j)[k] - p[k]) / self.h).collect();
                let r2: f64 = d.iter().map(|x| x * x).sum();
                cand.push((j as u32, d, (-r2).exp()));
            }
        }
        // minimize sum w^2 / omega subject to sum w = 1, sum w d = 0
        let rows = n + 1;
        let mut a = nalgebra::DMatrix::<f64>::zeros(rows, rows);
        for (_, d, om) in &cand {
            let v: Vec<f64> = std::iter::once(1.0).chain(d.iter().copied()).collect();
            for r in 0..rows {
                for c in 0..rows {
                    a[(r, c)] += om * v[r] * v[c];
                }
            }
        }
        let mut b = nalgebra::DVector::<f64>::zeros(rows);
        b[0] = 1.0;
        match a.lu().solve(&b) {
            Some(lam) => {
                for (j, d, om) in &cand {
                    let w = om * (lam[0] + d.iter().zip(lam.iter().skip(1)).map(|(x, l)| x * l).sum::<f64>());
                    out.push((*j, w));
                }
            }
            None => {
                if let Some(j) = self.nearest_node(p) {
                    out.push((j as u32, 1.0));
                }
            }
        }
    }
}

/// Per-node vectors in R^n on a grid.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub grid: Arc<BallGrid>,
    /// Flat storage, `dim` entries per node.
    pub values: Vec<f64>,
}

/// Per-node scalars on a grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<BallGrid>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<BallGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: Arc<BallGrid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        ScalarField { grid, values }
    }

    /// Graph Laplacian with missing neighbors contributing nothing.
    pub fn laplacian(&self) -> ScalarField {
        let g = &self.grid;
        let inv_h2 = 1.0 / (g.h() * g.h());
        let values = (0..g.len())
            .map(|i| {
                let c = self.values[i];
                g.neighbors(i)
                    .iter()
                    .filter(|&&j| j != NO_NODE)
                    .map(|&j| self.values[j as usize] - c)
                    .sum::<f64>()
                    * inv_h2
            })
            .collect();
        ScalarField {
            grid: self.grid.clone(),
            values,
        }
    }
}

impl VectorField {
    pub fn new(grid: Arc<BallGrid>, values: Vec<f64>) -> Result<Self> {
        let want = grid.len() * grid.dim();
        if values.len() != want {
            return Err(Error::DimensionMismatch {
                expected: want,
                got: values.len(),
            });
        }
        Ok(VectorField { grid, values })
    }

    pub fn constant(grid: Arc<BallGrid>, v: &[f64]) -> Self {
        let values = (0..grid.len()).flat_map(|_| v.iter().copied()).collect();
        VectorField { grid, values }
    }

    pub fn from_fn(grid: Arc<BallGrid>, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(grid.len() * grid.dim());
        for i in 0..grid.len() {
            values.extend(f(grid.point(i)));
        }
        VectorField { grid, values }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn at(&self, node: usize) -> &[f64] {
        let n = self.dim();
        &self.values[node * n..(node + 1) * n]
    }

    pub fn at_mut(&mut self, node: usize) -> &mut [f64] {
        let n = self.dim();
        &mut self.values[node * n..(node + 1) * n]
    }

    pub fn max_norm(&self) -> f64 {
        let n = self.dim();
        self.values
            .chunks(n)
            .map(|v| dot(v, v).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Value at an arbitrary point of the ball by multilinear interpolation.
    pub fn interpolate(&self, p: &[f64]) -> Vec<f64> {
        let mut st = Vec::with_capacity(8);
        self.grid.interpolation_stencil(p, &mut st);
        let n = self.dim();
        let mut out = vec![0.0; n];
        for &(j, w) in &st {
            for k in 0..n {
                out[k] += w * self.values[j as usize * n + k];
            }
        }
        out
    }

    /// Writes the field as CSV with header x1..xn,u1..un and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut s = String::new();
        let header: Vec<String> = (1..=n)
            .map(|k| format!("x{k}"))
            .chain((1..=n).map(|k| format!("u{k}")))
            .collect();
        s.push_str(&header.join(","));
        s.push('\n');
        for i in 0..self.grid.len() {
            let row: Vec<String> = self
                .grid
                .point(i)
                .iter()
                .chain(self.at(i))
                .map(|v| format!("{v:.16e}"))
                .collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    /// Reads a CSV written by [`Self::to_csv`] onto `grid`; every node must appear once.
    pub fn from_csv(grid: Arc<BallGrid>, text: &str) -> Result<Self> {
        let n = grid.dim();
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::FieldFormat("empty file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let expected: Vec<String> = (1..=n)
            .map(|k| format!("x{k}"))
            .chain((1..=n).map(|k| format!("u{k}")))
            .collect();
        if cols != expected.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::FieldFormat(format!(
                "header {header:?} does not match {}",
                expected.join(",")
            )));
        }
        let mut values = vec![f64::NAN; grid.len() * n];
        let mut seen = vec![false; grid.len()];
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let nums: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|t| t.trim().parse::<f64>()).collect();
            let nums = nums
                .map_err(|e| Error::FieldFormat(format!("line {}: {e}", ln + 1)))?;
            if nums.len() != 2 * n {
                return Err(Error::FieldFormat(format!(
                    "line {}: expected {} columns, got {}",
                    ln + 1,
                    2 * n,
                    nums.len()
                )));
            }
            let node = grid
                .nearest_node(&nums[..n])
                .filter(|&j| crate::mat::dist(grid.point(j), &nums[..n]) <= 1e-6 * grid.h())
                .ok_or_else(|| {
                    Error::FieldFormat(format!("line {}: point is not a grid node", ln + 1))
                })?;
            if seen[node] {
                return Err(Error::FieldFormat(format!("line {}: duplicate node", ln + 1)));
            }
            seen[node] = true;
            values[node * n..(node + 1) * n].copy_from_slice(&nums[n..]);
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::FieldFormat(format!(
                "node at {:?} missing from file",
                grid.point(missing)
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::FieldFormat("non-finite value".into()));
        }
        Ok(VectorField { grid, values })
    }
}

/// Componentwise graph Laplacian; a missing neighbor is a ghost equal to the
/// center value, so constants are annihilated up to the boundary.
pub fn laplacian(u: &VectorField) -> VectorField {
    let g = &u.grid;
    let n = g.dim();
    let inv_h2 = 1.0 / (g.h() * g.h());
    let mut out = vec![0.0; u.values.len()];
    for i in 0..g.len() {
        let c = u.at(i);
        for &j in g.neighbors(i) {
            if j == NO_NODE {
                continue;
            }
            let v = u.at(j as usize);
            for k in 0..n {
                out[i * n + k] += (v[k] - c[k]) * inv_h2;
            }
        }
    }
    VectorField {
        grid: u.grid.clone(),
        values: out,
    }
}

/// Discrete energy: forward-difference Dirichlet term over grid edges plus
/// the nodal potential sum, both weighted by h^n.
pub fn energy(u: &VectorField, spec: &PotentialSpec) -> f64 {
    let g = &u.grid;
    let n = g.dim();
    let inv_h2 = 1.0 / (g.h() * g.h());
    let mut acc = Accumulator::default();
    for i in 0..g.len() {
        let ui = u.at(i);
        let nb = g.neighbors(i);
        let mut e = spec.value(ui);
        for k in 0..n {
            let j = nb[2 * k];
            if j != NO_NODE {
                let uj = u.at(j as usize);
                let d2: f64 = ui.iter().zip(uj).map(|(a, b)| (a - b) * (a - b)).sum();
                e += 0.5 * d2 * inv_h2;
            }
        }
        acc.add(e);
    }
    acc.total() * g.cell_volume()
}

/// Interpolation stencils of every rotated node g x, reusable across calls.
#[derive(Debug, Clone)]
pub struct SymmetrizePlan {
    /// Transposes g^T (= g^{-1}) of the group elements.
    inverses: Vec<Mat>,
    /// stencils[e][node] = interpolation stencil of g_e x_node.
    offsets: Vec<usize>,
    entries: Vec<(u32, f64)>,
    nodes: usize,
}

impl SymmetrizePlan {
    pub fn new(grid: &BallGrid, group: &ReflectionGroup) -> Result<Self> {
        if grid.dim() != group.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                got: group.dim(),
            });
        }
        let mut offsets = Vec::with_capacity(group.order() * grid.len() + 1);
        let mut entries = Vec::new();
        let mut st = Vec::with_capacity(8);
        let mut p = vec![0.0; grid.dim()];
        offsets.push(0);
        for g in group.elements() {
            for i in 0..grid.len() {
                g.apply_into(grid.point(i), &mut p);
                grid.interpolation_stencil(&p, &mut st);
                entries.extend_from_slice(&st);
                offsets.push(entries.len());
            }
        }
        Ok(SymmetrizePlan {
            inverses: group.elements().iter().map(Mat::transpose).collect(),
            offsets,
            entries,
            nodes: grid.len(),
        })
    }

    fn stencil(&self, e: usize, node: usize) -> &[(u32, f64)] {
        let k = e * self.nodes + node;
        &self.entries[self.offsets[k]..self.offsets[k + 1]]
    }

    /// (1/|G|) sum_g g^{-1} u(g x).
    pub fn apply(&self, u: &VectorField) -> VectorField {
        let n = u.dim();
        let mut out = vec![0.0; u.values.len()];
        let mut val = vec![0.0; n];
        let mut rot = vec![0.0; n];
        let scale = 1.0 / self.inverses.len() as f64;
        for (e, ginv) in self.inverses.iter().enumerate() {
            for i in 0..self.nodes {
                val.iter_mut().for_each(|v| *v = 0.0);
                for &(j, w) in self.stencil(e, i) {
                    for k in 0..n {
                        val[k] += w * u.values[j as usize * n + k];
                    }
                }
                ginv.apply_into(&val, &mut rot);
                for k in 0..n {
                    out[i * n + k] += scale * rot[k];
                }
            }
        }
        VectorField {
            grid: u.grid.clone(),
            values: out,
        }
    }

    /// max over g and nodes of |u(g x) - g u(x)|, with u(g x) interpolated.
    pub fn residual(&self, u: &VectorField) -> f64 {
        let n = u.dim();
        let mut val = vec![0.0; n];
        let mut gu = vec![0.0; n];
        let mut worst = 0.0f64;
        for (e, ginv) in self.inverses.iter().enumerate() {
            let g = ginv.transpose();
            for i in 0..self.nodes {
                val.iter_mut().for_each(|v| *v = 0.0);
                for &(j, w) in self.stencil(e, i) {
                    for k in 0..n {
                        val[k] += w * u.values[j as usize * n + k];
                    }
                }
                g.apply_into(u.at(i), &mut gu);
                let d: f64 = val.iter().zip(&gu).map(|(a, b)| (a - b) * (a - b)).sum();
                worst = worst.max(d.sqrt());
            }
        }
        worst
    }
}

/// Group average of u with multilinear interpolation at rotated nodes.
pub fn symmetrize(u: &VectorField, group: &ReflectionGroup) -> Result<VectorField> {
    Ok(SymmetrizePlan::new(&u.grid, group)?.apply(u))
}

/// Equivariance residual max_g |u(g x) - g u(x)|.
pub fn equivariance_residual(u: &VectorField, group: &ReflectionGroup) -> Result<f64> {
    Ok(SymmetrizePlan::new(&u.grid, group)?.residual(u))
}

/// The affine seed: min(d(x, dD), 1) a1 on D, extended equivariantly.
pub fn seed_affine(
    grid: Arc<BallGrid>,
    group: &ReflectionGroup,
    orbit: &OrbitInfo,
) -> Result<VectorField> {
    if grid.dim() != group.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: group.dim(),
        });
    }
    let n = grid.dim();
    let mut values = Vec::with_capacity(grid.len() * n);
    let mut gx = vec![0.0; n];
    for i in 0..grid.len() {
        let x = grid.point(i);
        let mut found = None;
        for g in group.elements() {
            g.apply_into(x, &mut gx);
            if orbit.in_d_closure(&gx) {
                found = Some(g);
                break;
            }
        }
        let g = found.ok_or_else(|| Error::NotInClosure { point: x.to_vec() })?;
        g.apply_into(x, &mut gx);
        let d = orbit
            .region_d_normals
            .iter()
            .map(|eta| dot(&gx, eta))
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
        let s = d.min(1.0);
        let a: Vec<f64> = orbit.base_point.iter().map(|v| s * v).collect();
        values.extend(g.transpose().apply(&a));
    }
    Ok(VectorField { grid, values })
}

/// Nodewise radial projection onto the closed ball of radius M.
pub fn project_to_ball(u: &VectorField, m: f64) -> Result<VectorField> {
    if !(m > 0.0) {
        return Err(Error::Precondition(format!("projection radius must be positive, got {m}")));
    }
    let mut out = u.clone();
    project_in_place(&mut out.values, u.dim(), m);
    Ok(out)
}

pub(crate) fn project_in_place(values: &mut [f64], n: usize, m: f64) {
    for v in values.chunks_mut(n) {
        let r = dot(v, v).sqrt();
        if r > m {
            let s = m / r;
            v.iter_mut().for_each(|x| *x *= s);
        }
    }
}
