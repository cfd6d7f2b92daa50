//! Numerical checks of the estimates behind exponential decay: the Kato
//! inequality, subharmonicity of Q(u), measure and oscillation estimates,
//! ordering against the radial barrier, the decay fit, energy scaling and
//! positivity.

mod decay;
mod degiorgi;
mod ordering;
mod weak;

pub use decay::{
    decay_fit, energy_scaling_sweep, positivity_check, DecayFit, EnergySweep, PositivityReport,
    SweepParams, MIN_DECAY_NODES,
};
pub use degiorgi::{
    deepest_point, degiorgi_iteration, level_statistics, measure_and_degiorgi, DegiorgiLevel,
    DegiorgiReport, LevelStatistics,
};
pub use ordering::{comparison_ordering_check, OrderingReport, SeedBall};
pub use weak::{
    kato_check, random_bump, subharmonic_check, Bump, BumpRegion, KatoReport, SubharmonicReport,
};

use crate::field::BallGrid;
use serde::Serialize;

/// Nodes with |x - center| <= radius (plus a rounding slack), in index order.
pub fn nodes_in_ball(grid: &BallGrid, center: &[f64], radius: f64) -> Vec<usize> {
    let h = grid.h();
    let r2 = radius * radius + 1e-9 * h * h;
    let mut out = Vec::new();
    for_each_in_box(grid, center, radius, |i| {
        let x = grid.point(i);
        let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 <= r2 {
            out.push(i);
        }
    });
    out.sort_unstable();
    out
}

/// Calls `f` on every grid node in the axis-aligned box of half-width `half` around `center`.
pub(crate) fn for_each_in_box(grid: &BallGrid, center: &[f64], half: f64, mut f: impl FnMut(usize)) {
    let n = grid.dim();
    let h = grid.h();
    let lo: Vec<i32> = center.iter().map(|c| ((c - half) / h).ceil() as i32).collect();
    let hi: Vec<i32> = center.iter().map(|c| ((c + half) / h).floor() as i32).collect();
    if lo.iter().zip(&hi).any(|(a, b)| a > b) {
        return;
    }
    let mut idx = lo.clone();
    loop {
        if let Some(i) = grid.node_at(&idx) {
            f(i);
        }
        let mut k = 0;
        loop {
            if k == n {
                return;
            }
            if idx[k] < hi[k] {
                idx[k] += 1;
                break;
            }
            idx[k] = lo[k];
            k += 1;
        }
    }
}

/// Summary of one diagnostics run; fields mirror the report JSON keys.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub kato_min: Option<f64>,
    pub subharmonic_min: Option<f64>,
    pub positivity_min: Option<f64>,
    pub measure_fraction: Option<f64>,
    pub degiorgi_sup: Option<f64>,
    #[serde(rename = "decay_K")]
    pub decay_big_k: Option<f64>,
    pub decay_k: Option<f64>,
    #[serde(rename = "decay_R2")]
    pub decay_r2: Option<f64>,
    pub energy_slope: Option<f64>,
    pub eps0: Option<f64>,
    pub comparison_violations: Option<usize>,
    /// Named pass/fail outcomes of the checks that ran.
    pub checks: Vec<CheckOutcome>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    /// The value must be >= this threshold (or <= when `upper` is set).
    pub threshold: f64,
    pub upper: bool,
    pub pass: bool,
}

impl CheckOutcome {
    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        CheckOutcome {
            name: name.into(),
            value,
            threshold,
            upper: false,
            pass: value >= threshold,
        }
    }

    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        CheckOutcome {
            name: name.into(),
            value,
            threshold,
            upper: true,
            pass: value <= threshold,
        }
    }
}

impl DiagnosticsReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}
