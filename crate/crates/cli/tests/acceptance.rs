//! Acceptance run: one PASS/FAIL line per criterion at the desk-scale setup
//! (dihedral group of order 6, triangle potential, Q = |u - a1|, R = 8, h = 0.1).

use equivar::comparison::{assemble_sigma, phi1_slope, phi2_derivative, solve_phi1};
use equivar::coxeter::{dihedral_generators, generate_group, orbit_and_stabilizer};
use equivar::field::{build_grid, VectorField};
use equivar::flow::{run_to_equilibrium, FlowResult};
use equivar::verify::{
    decay_fit, deepest_point, energy_scaling_sweep, kato_check, level_statistics,
    measure_and_degiorgi, positivity_check, subharmonic_check, SweepParams,
};
use equivar_cli::commands::{build_problem, flow_config, ordering, Problem};
use equivar_cli::config::{parse_config, RunConfig};
use equivar_cli::DEFAULT_CONFIG;
use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

const FINE_H: f64 = 0.05;

struct Setup {
    cfg: RunConfig,
    p: Problem,
}

fn setup() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| {
        let cfg = parse_config(DEFAULT_CONFIG).expect("default config");
        let p = build_problem(&cfg).expect("problem");
        Setup { cfg, p }
    })
}

/// Relaxed affine seed at R = 8, h = 0.1.
fn equilibrium() -> &'static FlowResult {
    static E: OnceLock<FlowResult> = OnceLock::new();
    E.get_or_init(|| {
        let s = setup();
        let g = Arc::new(build_grid(2, s.cfg.radius, s.cfg.h).unwrap());
        let seed = equivar::field::seed_affine(g, &s.p.group, &s.p.orbit).unwrap();
        run_to_equilibrium(&seed, &s.p.spec, &flow_config(&s.cfg), &s.p.group).unwrap()
    })
}

/// The h = 0.1 equilibrium interpolated onto h = 0.05 and relaxed there.
fn fine_equilibrium() -> &'static FlowResult {
    static E: OnceLock<FlowResult> = OnceLock::new();
    E.get_or_init(|| {
        let s = setup();
        let mut cfg = s.cfg.clone();
        cfg.h = FINE_H;
        let coarse = &equilibrium().field;
        let g = Arc::new(build_grid(2, cfg.radius, FINE_H).unwrap());
        let start = VectorField::from_fn(g, |x| coarse.interpolate(x));
        run_to_equilibrium(&start, &s.p.spec, &flow_config(&cfg), &s.p.group).unwrap()
    })
}

type Verdict = (bool, String);

fn criterion_1() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for m in [2usize, 3, 4, 6] {
        let g = generate_group(2, &dihedral_generators(m)).unwrap();
        let o = orbit_and_stabilizer(&g, &[1.0, 0.0]).unwrap();
        ok &= g.order() == 2 * m && o.count * o.stabilizer.len() == g.order();
        if m == 3 {
            ok &= o.count == 3;
        }
        parts.push(format!("m={m}: |G|={} N={} |G_a1|={}", g.order(), o.count, o.stabilizer.len()));
    }
    (ok, parts.join("; "))
}

fn criterion_2() -> Verdict {
    let r = equilibrium();
    let worst = r.worst_energy_increase();
    let ok = worst <= 1e-12 && r.residual <= 1e-3;
    (
        ok,
        format!(
            "worst relative energy increase {worst:.2e} (<= 1e-12), final residual {:.3e} (<= 1e-3), {} steps",
            r.residual, r.steps
        ),
    )
}

fn criterion_3() -> Verdict {
    let r = equilibrium();
    let p = positivity_check(r);
    let ok = p.pass && p.strong_margin > 0.0;
    (
        ok,
        format!(
            "positivity min {:.3e} (>= {:.2}), strong margin {:.3e} (> 0)",
            p.min, -p.tolerance, p.strong_margin
        ),
    )
}

fn criterion_4() -> Verdict {
    let s = setup();
    let r = equilibrium();
    let rep = subharmonic_check(&r.field, &s.p.q, &s.p.orbit, 100, s.cfg.seed, r.converged).unwrap();
    (
        rep.pass,
        format!("min pairing {:.3e} over {} bumps (>= {:.3e})", rep.min, rep.trials, -rep.tolerance),
    )
}

fn criterion_5() -> Verdict {
    let s = setup();
    let eq = kato_check(&equilibrium().field, &s.p.q, 50, s.cfg.seed).unwrap();
    let g = Arc::new(build_grid(2, 4.0, s.cfg.h).unwrap());
    let crossing = VectorField::from_fn(g.clone(), |x| vec![1.0 + 0.5 * (x[0] - 0.37), 0.0]);
    let cr = kato_check(&crossing, &s.p.q, 50, s.cfg.seed).unwrap();
    let away = VectorField::from_fn(g, |x| vec![-0.5 + 0.2 * x[0].sin(), 0.3 * (0.7 * x[1]).cos()]);
    let aw = kato_check(&away, &s.p.q, 50, s.cfg.seed).unwrap();
    let ok = eq.pass && cr.pass && aw.pass && aw.strong_weak_gap <= 1e-6;
    (
        ok,
        format!(
            "equilibrium min {:.3e} (>= {:.3e}); crossing min {:.3e} (>= {:.3e}); away from a1 min {:.3e}, strong/weak gap {:.2e} (<= 1e-6)",
            eq.min, -eq.tolerance, cr.min, -cr.tolerance, aw.min, aw.strong_weak_gap
        ),
    )
}

fn criterion_6() -> Verdict {
    let s = setup();
    let (lo, hi) = (s.cfg.verify.decay_min, s.cfg.verify.decay_max);
    let coarse = decay_fit(&equilibrium().field, &s.p.orbit, lo, hi).unwrap();
    let fine = decay_fit(&fine_equilibrium().field, &s.p.orbit, lo, hi).unwrap();
    let drift = (fine.k - coarse.k).abs() / coarse.k;
    // planted |u - a1| = 0.8 exp(-1.7 dist_D)
    let orbit = s.p.orbit.clone();
    let g = Arc::new(build_grid(2, 8.0, s.cfg.h).unwrap());
    let planted = VectorField::from_fn(g, move |x| {
        let d = orbit.region(x).dist_d;
        vec![1.0 + 0.8 * (-1.7 * d).exp(), 0.0]
    });
    let pf = decay_fit(&planted, &s.p.orbit, lo, hi).unwrap();
    let planted_err = (pf.k - 1.7).abs() / 1.7;
    let ok = coarse.k > 0.0
        && coarse.r2 >= 0.95
        && fine.k > 0.0
        && fine.r2 >= 0.95
        && drift <= 0.15
        && planted_err < 5e-4;
    (
        ok,
        format!(
            "h=0.1: k={:.4} R2={:.4}; h=0.05: k={:.4} R2={:.4}; drift {:.2}% (<= 15%); planted k=1.7 recovered as {:.6}",
            coarse.k,
            coarse.r2,
            fine.k,
            fine.r2,
            100.0 * drift,
            pf.k
        ),
    )
}

fn criterion_7() -> Verdict {
    let s = setup();
    let params = SweepParams {
        h: s.cfg.h,
        spec: s.p.spec.clone(),
        group: s.p.group.clone(),
        orbit: s.p.orbit.clone(),
        flow: flow_config(&s.cfg),
        require_convergence: false,
    };
    let sw = energy_scaling_sweep(&[4.0, 6.0, 8.0, 12.0], &params).unwrap();
    let ok = (0.8..=1.2).contains(&sw.slope);
    let energies: Vec<String> = sw
        .radii
        .iter()
        .zip(&sw.energies)
        .map(|(r, j)| format!("J({r})={j:.4}"))
        .collect();
    (ok, format!("slope {:.4} in [0.8, 1.2]; {}", sw.slope, energies.join(" ")))
}

fn criterion_8() -> Verdict {
    let (c, q_bar, q_max) = (setup().p.spec.c, setup().p.spec.q_bar, setup().p.q.q_max);
    // n = 1 oracle: q_bar cosh(c r) / cosh(c l)
    let mut cosh_err = 0.0f64;
    for &(cc, l) in &[(0.75, 4.0), (1.0, 12.0), (c, 12.0 / c)] {
        let p = solve_phi1(1, cc, q_bar, l).unwrap();
        for (r, v) in p.radii.iter().zip(&p.values) {
            let want = q_bar * (cc * r).cosh() / (cc * l).cosh();
            cosh_err = cosh_err.max(((v - want) / want).abs());
        }
    }
    let l12 = 12.0 / c;
    let slope2 = (phi1_slope(2, c, q_bar, l12).unwrap() - c * q_bar).abs() / (c * q_bar);
    let slope1 = (phi1_slope(1, c, q_bar, l12).unwrap() - c * q_bar).abs() / (c * q_bar);
    let lambda = 2.0;
    let ds: Vec<f64> = [1.0, 2.0, 5.0, 10.0, 50.0, 100.0 * lambda]
        .iter()
        .map(|&l| phi2_derivative(2, q_bar, q_max, l, l + lambda, l))
        .collect();
    let decreasing = ds.windows(2).all(|w| w[1] < w[0]);
    let limit = (q_max - q_bar) / lambda;
    let phi2_err = (ds[ds.len() - 1] - limit).abs() / limit;
    let (_, k) = assemble_sigma(2, c, q_bar, q_max, 0.5).unwrap();
    let clauses = k.all_clauses_hold() && k.checks.len() == 3 && k.q_bar_prime < q_bar;
    let ok = cosh_err <= 1e-8 && slope2 <= 0.01 && decreasing && phi2_err <= 0.01 && clauses;
    (
        ok,
        format!(
            "cosh oracle err {cosh_err:.2e} (<= 1e-8); |phi1'(l) - c q_bar| at cl=12: n=2 {:.2}%, n=1 {:.2e}% (<= 1%); phi2' decreasing {decreasing}, err at l=100 lambda {:.3}% (<= 1%); sigma clauses at l0={:.4}, 2l0, 4l0: {clauses} (q_bar - q_bar' = {:.2e})",
            100.0 * slope2,
            100.0 * slope1,
            100.0 * phi2_err,
            k.l0,
            q_bar - k.q_bar_prime
        ),
    )
}

fn criterion_9() -> Verdict {
    // Q = a (|y|^2 - t) on the unit-scaled ball: fraction t, half-ball sup a (1/4 - t)
    let g = build_grid(2, 8.0, 0.1).unwrap();
    let (center, rad, a, t) = ([0.0, 0.0], 4.0, 0.5, 0.2);
    let st = level_statistics(
        &g,
        |i| {
            let x = g.point(i);
            a * ((x[0] * x[0] + x[1] * x[1]) / (rad * rad) - t)
        },
        &center,
        rad,
    )
    .unwrap();
    let tol = 2.0 / (st.nodes as f64).sqrt();
    let synth_ok =
        (st.fraction - t).abs() <= tol && (st.half_sup - a * (0.25 - t)).abs() <= tol;
    let s = setup();
    let u = &equilibrium().field;
    let (c, _) = deepest_point(&u.grid, &s.p.orbit);
    let d = measure_and_degiorgi(u, &s.p.q, &c, s.cfg.ball_radius(), &s.p.spec, &s.p.orbit).unwrap();
    let sups: Vec<String> = d.levels.iter().map(|l| format!("{:.3e}", l.sup_q)).collect();
    let ok = synth_ok && d.iteration_ok;
    (
        ok,
        format!(
            "synthetic fraction {:.4} vs {t}, half sup {:.4} vs {:.4} (tol {tol:.4}); equilibrium fraction {:.3}, level sups [{}] vs q_bar {}",
            st.fraction,
            st.half_sup,
            a * (0.25 - t),
            d.measure_fraction,
            sups.join(", "),
            s.p.spec.q_bar
        ),
    )
}

fn criterion_10() -> Verdict {
    let s = setup();
    let run = |u: &VectorField, h: f64| {
        let mut cfg = s.cfg.clone();
        cfg.h = h;
        let (c, depth) = deepest_point(&u.grid, &s.p.orbit);
        ordering(&cfg, &s.p, u, &c, depth).unwrap().0
    };
    let a = run(&equilibrium().field, s.cfg.h);
    let b = run(&fine_equilibrium().field, FINE_H);
    let cell = s.cfg.h;
    let ok = a.violations == 0 && b.violations == 0 && (a.d0 - b.d0).abs() <= cell;
    (
        ok,
        format!(
            "violations {} / {}; d0 {:.3} (h=0.1) vs {:.3} (h=0.05), tolerance {cell}; barrier balls placed {} / {}, coverage {:.3} / {:.3}",
            a.violations, b.violations, a.d0, b.d0, a.balls, b.balls, a.coverage, b.coverage
        ),
    )
}

fn run_binary(out: &Path, args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_equivar"))
        .arg("--quiet")
        .arg("--out")
        .arg(out)
        .args(args)
        .status()
        .expect("spawn equivar")
        .code()
        .unwrap_or(-1)
}

/// File name to checksum for every file the manifest lists.
fn checksums(dir: &Path) -> BTreeMap<String, String> {
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| {
            (
                f["path"].as_str().unwrap().to_string(),
                f["sha256"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

fn criterion_11() -> Verdict {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path().join("run");
    let mut sums = Vec::new();
    let mut codes = Vec::new();
    for _ in 0..2 {
        let _ = std::fs::remove_dir_all(&dir);
        for cmd in [&["solve"][..], &["verify"], &["compare"]] {
            let mut args = vec!["--seed", "11"];
            args.extend_from_slice(cmd);
            codes.push(run_binary(&dir, &args));
        }
        // manifests hold wall times; compare the files they list
        sums.push(checksums(&dir));
    }
    let ok = !sums[0].is_empty() && sums[0] == sums[1];
    (
        ok,
        format!(
            "{} files compared, identical: {}; exit codes {:?}",
            sums[0].len(),
            sums[0] == sums[1],
            codes
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("group algebra", criterion_1),
        ("flow dissipation", criterion_2),
        ("positivity", criterion_3),
        ("subharmonicity", criterion_4),
        ("Kato inequality", criterion_5),
        ("exponential decay", criterion_6),
        ("energy scaling", criterion_7),
        ("comparison machinery", criterion_8),
        ("De Giorgi checker", criterion_9),
        ("ordering chain", criterion_10),
        ("determinism", criterion_11),
    ];
    let mut passed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = f();
        if ok {
            passed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!("{passed}/{} criteria pass", criteria.len());
}
