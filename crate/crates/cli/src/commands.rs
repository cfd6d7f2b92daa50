//! The five commands and the module pipelines behind them.

use crate::config::{to_text, GroupConfig, PotentialConfig, RunConfig, Term};
use crate::output::OutputDir;
use crate::CliError;
use equivar::comparison::{assemble_sigma_with, SigmaConstants, SigmaOptions};
use equivar::coxeter::{
    dihedral_generators, generate_group, orbit_and_stabilizer, OrbitInfo, Reflection,
    ReflectionGroup,
};
use equivar::field::{build_grid, energy, seed_affine, BallGrid, VectorField};
use equivar::flow::{
    euler_lagrange_residual, positivity_on_f, run_to_equilibrium, strong_positivity_margin,
    FlowConfig, FlowResult,
};
use equivar::potential::{
    check_hypotheses, make_potential, make_triangle_potential, HypothesisReport, Monomial,
    Polynomial, PotentialKind, PotentialSpec, QSpec,
};
use equivar::verify::{
    comparison_ordering_check, decay_fit, deepest_point, energy_scaling_sweep, kato_check,
    measure_and_degiorgi, subharmonic_check, CheckOutcome, DecayFit,
    DegiorgiReport, DiagnosticsReport, EnergySweep, KatoReport, OrderingReport,
    PositivityReport, SeedBall, SubharmonicReport, SweepParams,
};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

const HYPOTHESIS_SAMPLES: usize = 4000;

/// What a command reports back to `main`.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Names of failed checks; empty on success.
    pub failed: Vec<String>,
    pub out_dir: PathBuf,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failed.is_empty() {
            0
        } else {
            1
        }
    }
}

/// Group, potential, monitor and orbit assembled from a config.
pub struct Problem {
    pub group: ReflectionGroup,
    pub orbit: OrbitInfo,
    pub spec: PotentialSpec,
    pub q: QSpec,
}

fn polynomial(dim: usize, terms: &[Term]) -> equivar::Result<Polynomial> {
    Polynomial::new(
        dim,
        terms.iter().map(|(c, e)| Monomial::new(*c, e)).collect(),
    )
}

pub fn build_group(cfg: &RunConfig) -> equivar::Result<ReflectionGroup> {
    match &cfg.group {
        GroupConfig::Dihedral(m) => generate_group(2, &dihedral_generators(*m)),
        GroupConfig::Normals(v) => {
            let gens = v
                .iter()
                .map(|n| Reflection::new(n))
                .collect::<equivar::Result<Vec<_>>>()?;
            generate_group(cfg.dim(), &gens)
        }
    }
}

pub fn build_problem(cfg: &RunConfig) -> equivar::Result<Problem> {
    let group = build_group(cfg)?;
    let orbit = orbit_and_stabilizer(&group, &cfg.a1)?;
    let spec = match &cfg.potential {
        PotentialConfig::Triangle => make_triangle_potential()?,
        PotentialConfig::Polynomial { terms, minima } => make_potential(
            cfg.dim(),
            PotentialKind::Polynomial(polynomial(cfg.dim(), terms)?),
            minima.clone(),
        )?,
    };
    let q = if cfg.q_terms.is_empty() {
        QSpec::distance(&cfg.a1, spec.m)
    } else {
        QSpec::with_perturbation(&cfg.a1, polynomial(cfg.dim(), &cfg.q_terms)?, spec.m)?
    };
    Ok(Problem {
        group,
        orbit,
        spec,
        q,
    })
}

pub fn flow_config(cfg: &RunConfig) -> FlowConfig {
    let f = &cfg.flow;
    let mut fc = FlowConfig::for_grid(cfg.h, cfg.dim());
    fc.dt = cfg.dt();
    fc.max_steps = f.max_steps;
    fc.residual_tol = f.tol;
    fc.k_sym = f.k_sym;
    fc.clamp = f.clamp;
    fc.sym_threshold = f.sym_threshold;
    fc.newton_start = f.newton_start;
    fc.stall_checkpoints = f.stall_checkpoints;
    fc
}

fn grid(cfg: &RunConfig) -> equivar::Result<Arc<BallGrid>> {
    Ok(Arc::new(build_grid(cfg.dim(), cfg.radius, cfg.h)?))
}

#[derive(Serialize)]
struct GroupReport {
    dim: usize,
    order: usize,
    #[serde(rename = "N")]
    orbit_count: usize,
    stabilizer_order: usize,
    a1: Vec<f64>,
    orbit: Vec<Vec<f64>>,
    reflections: usize,
    fundamental_normals: Vec<Vec<f64>>,
    region_d_normals: Vec<Vec<f64>>,
    mirrors_meeting_d: Vec<usize>,
    elements: Vec<Vec<f64>>,
}

pub fn cmd_group(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let (group, orbit) = out.stage("group", || -> equivar::Result<_> {
        let g = build_group(cfg)?;
        let o = orbit_and_stabilizer(&g, &cfg.a1)?;
        Ok((g, o))
    })?;
    let report = GroupReport {
        dim: group.dim(),
        order: group.order(),
        orbit_count: orbit.count,
        stabilizer_order: orbit.stabilizer.len(),
        a1: cfg.a1.clone(),
        orbit: orbit.orbit.clone(),
        reflections: group.reflection_indices().len(),
        fundamental_normals: group.fund_normals().to_vec(),
        region_d_normals: orbit.region_d_normals.clone(),
        mirrors_meeting_d: orbit.mirrors_meeting_d.clone(),
        elements: group.elements().iter().map(|m| m.as_slice().to_vec()).collect(),
    };
    out.write_json("group.json", &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    let mut failed = Vec::new();
    if orbit.count * orbit.stabilizer.len() != group.order() {
        failed.push("orbit_stabilizer".into());
    }
    Ok(Outcome {
        failed,
        out_dir: PathBuf::new(),
    })
}

#[derive(Serialize)]
struct SolveReport {
    converged: bool,
    residual: f64,
    steps: usize,
    field_step: usize,
    energy: f64,
    seed_energy: f64,
    worst_energy_increase: f64,
    positivity_min: f64,
    strong_positivity_margin: f64,
    equivariance_residual: f64,
    max_norm: f64,
    dt: f64,
    potential: PotentialSpec,
    q_max: f64,
    hypotheses: HypothesisReport,
}

fn energy_history_csv(res: &FlowResult) -> String {
    let mut s = String::from("step,energy,kind\n");
    for r in &res.energy_history {
        let _ = writeln!(s, "{},{:.16e},{}", r.step, r.energy, r.kind.as_str());
    }
    s
}

fn positivity_csv(res: &FlowResult) -> String {
    let mut s = String::from("step,min\n");
    for p in &res.positivity_samples {
        let _ = writeln!(s, "{},{:.16e}", p.step, p.min);
    }
    s
}

/// Starting field for `solve`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    #[default]
    Affine,
    /// Field CSV, on this grid or on the grid of the config stored beside it.
    File(PathBuf),
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Loads a field on `g`; a field stored on another grid is interpolated,
/// which needs that run's config.txt next to the file.
fn load_init(path: &Path, g: Arc<BallGrid>) -> Result<VectorField, CliError> {
    let text = read_text(path)?;
    match VectorField::from_csv(g.clone(), &text) {
        Ok(u) => Ok(u),
        Err(direct) => {
            let beside = path.parent().unwrap_or(Path::new(".")).join("config.txt");
            if !beside.is_file() {
                return Err(direct.into());
            }
            let src_cfg = crate::config::parse_config(&read_text(&beside)?)?;
            let src = VectorField::from_csv(
                Arc::new(build_grid(src_cfg.dim(), src_cfg.radius, src_cfg.h)?),
                &text,
            )?;
            Ok(VectorField::from_fn(g, |x| src.interpolate(x)))
        }
    }
}

pub fn cmd_solve(cfg: &RunConfig, init: &Init, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let p = out.stage("setup", || build_problem(cfg))?;
    let hyp = out.stage("hypotheses", || {
        check_hypotheses(&p.spec, &p.q, &p.group, &p.orbit, HYPOTHESIS_SAMPLES)
    })?;
    if !hyp.admissible() {
        out.note("warning: the Q-monotonicity hypothesis fails on the sample; subharmonicity results are flagged");
    }
    let g = grid(cfg)?;
    let seed = match init {
        Init::Affine => seed_affine(g, &p.group, &p.orbit)?,
        Init::File(path) => load_init(path, g)?,
    };
    let fc = flow_config(cfg);
    let res = out.stage("flow", || run_to_equilibrium(&seed, &p.spec, &fc, &p.group))?;
    out.note(&format!(
        "flow: {} steps, residual {:.3e}, converged {}",
        res.steps, res.residual, res.converged
    ));
    let report = SolveReport {
        converged: res.converged,
        residual: res.residual,
        steps: res.steps,
        field_step: res.field_step,
        energy: energy(&res.field, &p.spec),
        seed_energy: energy(&seed, &p.spec),
        worst_energy_increase: res.worst_energy_increase(),
        positivity_min: res.positivity_min,
        strong_positivity_margin: res.strong_positivity_margin,
        equivariance_residual: res.equivariance_residual,
        max_norm: res.max_norm,
        dt: fc.dt,
        potential: p.spec.clone(),
        q_max: p.q.q_max,
        hypotheses: hyp,
    };
    out.write("field.csv", res.field.to_csv())?;
    out.write("energy_history.csv", energy_history_csv(&res))?;
    out.write("positivity.csv", positivity_csv(&res))?;
    out.write_json("flow_result.json", &report)?;
    if !res.converged {
        out.note("warning: the flow stopped above the residual tolerance; the field is stored as a near-equilibrium");
    }
    let mut failed = Vec::new();
    if res.worst_energy_increase() > 1e-12 {
        failed.push("energy_monotonicity".into());
    }
    Ok(Outcome {
        failed,
        out_dir: PathBuf::new(),
    })
}

/// Sub-reports behind the flat diagnostics summary.
#[derive(Debug, Default, Serialize)]
pub struct VerifyDetails {
    pub residual: Option<f64>,
    pub kato: Option<KatoReport>,
    pub subharmonic: Option<SubharmonicReport>,
    pub positivity: Option<PositivityReport>,
    pub degiorgi: Option<DegiorgiReport>,
    pub decay: Option<DecayFit>,
    pub ordering: Option<OrderingReport>,
    pub sigma: Option<SigmaConstants>,
    pub comparison_rate: Option<f64>,
    #[serde(rename = "comparison_Q_max")]
    pub comparison_q_max: Option<f64>,
}

/// Minimum of the `min` column of a positivity CSV written by `solve`.
fn recorded_positivity(path: &Path) -> Option<f64> {
    let text = std::fs::read_to_string(path).ok()?;
    text.lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(1)?.trim().parse::<f64>().ok())
        .reduce(f64::min)
}

fn decay_scatter_csv(u: &VectorField, orbit: &OrbitInfo) -> String {
    let mut s = String::from("dist_D,log_residual\n");
    let g = &u.grid;
    for i in 0..g.len() {
        let reg = orbit.region(g.point(i));
        if !reg.in_d {
            continue;
        }
        let r: f64 = u
            .at(i)
            .iter()
            .zip(&orbit.base_point)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if r > 1e-14 {
            let _ = writeln!(s, "{:.16e},{:.16e}", reg.dist_d, r.ln());
        }
    }
    s
}

/// Runs every enabled diagnostic on a field; module errors become failed checks.
pub fn diagnostics(
    cfg: &RunConfig,
    p: &Problem,
    u: &VectorField,
    positivity_history: Option<f64>,
    out: &mut OutputDir,
) -> Result<(DiagnosticsReport, VerifyDetails), CliError> {
    let v = &cfg.verify;
    let h = u.grid.h();
    let mut rep = DiagnosticsReport::default();
    let mut det = VerifyDetails::default();
    let residual = euler_lagrange_residual(u, &p.spec);
    det.residual = Some(residual);
    let equilibrium = residual <= cfg.flow.tol;
    let fail = |rep: &mut DiagnosticsReport, name: &str, e: &dyn std::fmt::Display| {
        rep.warnings.push(format!("{name}: {e}"));
        rep.checks.push(CheckOutcome {
            name: name.into(),
            value: f64::NAN,
            threshold: f64::NAN,
            upper: false,
            pass: false,
        });
    };
    if v.kato {
        match out.stage("kato", || kato_check(u, &p.q, v.kato_trials, cfg.seed)) {
            Ok(k) => {
                rep.kato_min = Some(k.min);
                rep.checks.push(CheckOutcome::at_least("kato", k.min, -k.tolerance));
                det.kato = Some(k);
            }
            Err(e) => fail(&mut rep, "kato", &e),
        }
    }
    if v.subharmonic {
        let seed = cfg.seed.wrapping_add(1);
        match out.stage("subharmonic", || {
            subharmonic_check(u, &p.q, &p.orbit, v.subharmonic_trials, seed, equilibrium)
        }) {
            Ok(s) => {
                rep.subharmonic_min = Some(s.min);
                rep.checks
                    .push(CheckOutcome::at_least("subharmonic", s.min, -s.tolerance));
                rep.warnings.extend(s.warnings.iter().cloned());
                det.subharmonic = Some(s);
            }
            Err(e) => fail(&mut rep, "subharmonic", &e),
        }
    }
    if v.positivity {
        let last = positivity_on_f(u, &p.group);
        let min = positivity_history.map_or(last, |m| m.min(last));
        let pr = PositivityReport {
            min,
            strong_margin: strong_positivity_margin(u, &p.group, h),
            tolerance: 5.0 * h,
            pass: min >= -5.0 * h,
        };
        rep.positivity_min = Some(pr.min);
        rep.checks
            .push(CheckOutcome::at_least("positivity", pr.min, -pr.tolerance));
        rep.checks.push(CheckOutcome {
            name: "strong_positivity".into(),
            value: pr.strong_margin,
            threshold: 0.0,
            upper: false,
            pass: pr.strong_margin > 0.0,
        });
        det.positivity = Some(pr);
    }
    let (center, depth) = deepest_point(&u.grid, &p.orbit);
    if v.degiorgi {
        let radius = cfg.ball_radius();
        match out.stage("degiorgi", || {
            measure_and_degiorgi(u, &p.q, &center, radius, &p.spec, &p.orbit)
        }) {
            Ok(d) => {
                rep.measure_fraction = Some(d.measure_fraction);
                rep.degiorgi_sup = Some(d.degiorgi_sup);
                rep.eps0 = d.eps0;
                rep.checks
                    .push(CheckOutcome::at_least("measure_fraction", d.measure_fraction, 0.9));
                rep.checks.push(CheckOutcome {
                    name: "degiorgi_sup".into(),
                    value: d.degiorgi_sup,
                    threshold: 1.0,
                    upper: true,
                    pass: d.degiorgi_sup < 1.0,
                });
                rep.checks.push(CheckOutcome {
                    name: "degiorgi_iteration".into(),
                    value: d.final_sup_q,
                    threshold: p.spec.q_bar,
                    upper: true,
                    pass: d.iteration_ok,
                });
                det.degiorgi = Some(d);
            }
            Err(e) => fail(&mut rep, "degiorgi", &e),
        }
    }
    if v.decay {
        match out.stage("decay", || decay_fit(u, &p.orbit, v.decay_min, v.decay_max)) {
            Ok(f) => {
                rep.decay_big_k = Some(f.big_k);
                rep.decay_k = Some(f.k);
                rep.decay_r2 = Some(f.r2);
                rep.checks.push(CheckOutcome {
                    name: "decay_k".into(),
                    value: f.k,
                    threshold: 0.0,
                    upper: false,
                    pass: f.k > 0.0,
                });
                rep.checks.push(CheckOutcome::at_least("decay_R2", f.r2, 0.95));
                det.decay = Some(f);
            }
            Err(e) => fail(&mut rep, "decay", &e),
        }
        out.write("decay_scatter.csv", decay_scatter_csv(u, &p.orbit))?;
    }
    if v.ordering {
        match out.stage("ordering", || ordering(cfg, p, u, &center, depth)) {
            Ok((o, k, rate, qmax, profile)) => {
                rep.comparison_violations = Some(o.violations);
                rep.checks.push(CheckOutcome::at_most(
                    "comparison_violations",
                    o.violations as f64,
                    0.0,
                ));
                out.write("sigma_profile.csv", profile)?;
                det.ordering = Some(o);
                det.sigma = Some(k);
                det.comparison_rate = Some(rate);
                det.comparison_q_max = Some(qmax);
            }
            Err(e) => fail(&mut rep, "comparison_ordering", &e),
        }
    }
    Ok((rep, det))
}

pub type OrderingParts = (OrderingReport, SigmaConstants, f64, f64, String);

/// Barrier with rate sqrt(q_monotone_rate) and Q_bar capped by sup Q over the
/// closed region, seeded by the De Giorgi half ball of the deepest ball in D_R.
pub fn ordering(
    cfg: &RunConfig,
    p: &Problem,
    u: &VectorField,
    center: &[f64],
    depth: f64,
) -> equivar::Result<OrderingParts> {
    let g = &u.grid;
    let hyp = check_hypotheses(&p.spec, &p.q, &p.group, &p.orbit, HYPOTHESIS_SAMPLES)?;
    let rate = hyp.q_monotone_rate.sqrt();
    let sup_q = (0..g.len())
        .filter(|&i| p.orbit.in_d_closure(g.point(i)))
        .map(|i| p.q.value(u.at(i)))
        .fold(0.0, f64::max);
    let q_max = p.q.q_max.min(sup_q);
    let opts = SigmaOptions {
        rho: cfg.compare.rho,
        ..SigmaOptions::default()
    };
    let (sigma, k) = assemble_sigma_with(
        cfg.dim(),
        rate,
        p.spec.q_bar,
        q_max,
        cfg.compare.l0_hint,
        &opts,
    )?;
    let d = measure_and_degiorgi(u, &p.q, center, depth, &p.spec, &p.orbit)?;
    let seed = SeedBall {
        center: center.to_vec(),
        radius: d.final_radius,
    };
    let o = comparison_ordering_check(u, &p.q, &sigma, &k, &p.orbit, &seed)?;
    Ok((o, k, rate, q_max, sigma.profile().to_csv()))
}

pub fn cmd_verify(
    cfg: &RunConfig,
    field: &Path,
    report: Option<&Path>,
    out: &mut OutputDir,
) -> Result<Outcome, CliError> {
    let p = out.stage("setup", || build_problem(cfg))?;
    let g = grid(cfg)?;
    let text = std::fs::read_to_string(field).map_err(|e| CliError::Io {
        path: field.to_path_buf(),
        source: e,
    })?;
    let u = match VectorField::from_csv(g, &text) {
        Ok(u) => u,
        Err(e) => {
            let rep = DiagnosticsReport {
                checks: vec![CheckOutcome {
                    name: "field".into(),
                    value: f64::NAN,
                    threshold: f64::NAN,
                    upper: false,
                    pass: false,
                }],
                warnings: vec![format!("field: {e}")],
                ..DiagnosticsReport::default()
            };
            write_report(out, report, &rep)?;
            return Ok(Outcome {
                failed: vec!["field".into()],
                out_dir: PathBuf::new(),
            });
        }
    };
    let history = field
        .parent()
        .map(|d| d.join("positivity.csv"))
        .and_then(|p| recorded_positivity(&p));
    let (rep, det) = diagnostics(cfg, &p, &u, history, out)?;
    write_report(out, report, &rep)?;
    out.write_json("verify_details.json", &det)?;
    Ok(Outcome {
        failed: rep
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.clone())
            .collect(),
        out_dir: PathBuf::new(),
    })
}

fn write_report(
    out: &OutputDir,
    report: Option<&Path>,
    rep: &DiagnosticsReport,
) -> Result<(), CliError> {
    match report {
        Some(path) => {
            let mut text = serde_json::to_string_pretty(rep)?;
            text.push('\n');
            std::fs::write(path, text).map_err(|e| CliError::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
        }
        None => {
            out.write_json("verify_report.json", rep)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepReport {
    h: f64,
    #[serde(flatten)]
    sweep: EnergySweep,
    energy_slope: f64,
    target: f64,
}

pub fn cmd_sweep(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let p = out.stage("setup", || build_problem(cfg))?;
    let params = SweepParams {
        h: cfg.h,
        spec: p.spec.clone(),
        group: p.group.clone(),
        orbit: p.orbit.clone(),
        flow: flow_config(cfg),
        require_convergence: cfg.sweep.require_convergence,
    };
    let sw = out.stage("sweep", || energy_scaling_sweep(&cfg.sweep.radii, &params))?;
    let mut csv = String::from("R,energy,seed_energy,residual,converged\n");
    for i in 0..sw.radii.len() {
        let _ = writeln!(
            csv,
            "{},{:.16e},{:.16e},{:.16e},{}",
            sw.radii[i], sw.energies[i], sw.seed_energies[i], sw.residuals[i], sw.converged[i]
        );
    }
    out.write("sweep.csv", csv)?;
    let target = cfg.dim() as f64 - 1.0;
    let slope = sw.slope;
    out.write_json(
        "sweep_report.json",
        &SweepReport {
            h: cfg.h,
            sweep: sw,
            energy_slope: slope,
            target,
        },
    )?;
    let mut failed = Vec::new();
    if !((slope - target).abs() <= 0.2) {
        failed.push("energy_slope".into());
    }
    Ok(Outcome {
        failed,
        out_dir: PathBuf::new(),
    })
}

/// Explicit inputs of `compare`; `None` falls back to the config and then the potential.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompareArgs {
    pub n: Option<usize>,
    pub c: Option<f64>,
    pub q_bar: Option<f64>,
    pub q_max: Option<f64>,
    pub l0_hint: Option<f64>,
}

#[derive(Serialize)]
struct CompareReport {
    n: usize,
    c: f64,
    q_bar: f64,
    #[serde(rename = "Q_max")]
    q_max: f64,
    l0_hint: f64,
    #[serde(rename = "L")]
    big_l: f64,
    glue_mismatch: f64,
    all_clauses_hold: bool,
    constants: SigmaConstants,
}

pub fn cmd_compare(
    cfg: &RunConfig,
    args: &CompareArgs,
    out: &mut OutputDir,
) -> Result<Outcome, CliError> {
    let c = &cfg.compare;
    let need_potential = args.c.or(c.c).is_none()
        || args.q_bar.or(c.q_bar).is_none()
        || args.q_max.or(c.q_max).is_none();
    let p = if need_potential {
        Some(out.stage("setup", || build_problem(cfg))?)
    } else {
        None
    };
    let n = args.n.or(c.n).unwrap_or(cfg.dim());
    let rate = args.c.or(c.c).or(p.as_ref().map(|p| p.spec.c)).unwrap_or_default();
    let q_bar = args
        .q_bar
        .or(c.q_bar)
        .or(p.as_ref().map(|p| p.spec.q_bar))
        .unwrap_or_default();
    let q_max = args
        .q_max
        .or(c.q_max)
        .or(p.as_ref().map(|p| p.q.q_max))
        .unwrap_or_default();
    let l0_hint = args.l0_hint.unwrap_or(c.l0_hint);
    let opts = SigmaOptions {
        rho: c.rho,
        ..SigmaOptions::default()
    };
    let (sigma, k) = out.stage("sigma", || {
        assemble_sigma_with(n, rate, q_bar, q_max, l0_hint, &opts)
    })?;
    out.write("sigma_profile.csv", sigma.profile().to_csv())?;
    out.write("phi1_profile.csv", sigma.phi.phi1.to_csv())?;
    out.write("phi2_profile.csv", sigma.phi.phi2.to_csv())?;
    out.write("theta_profile.csv", sigma.theta.to_csv())?;
    let all = k.all_clauses_hold();
    out.write_json(
        "compare_report.json",
        &CompareReport {
            n,
            c: rate,
            q_bar,
            q_max,
            l0_hint,
            big_l: sigma.big_l(),
            glue_mismatch: sigma.glue_mismatch(),
            all_clauses_hold: all,
            constants: k,
        },
    )?;
    Ok(Outcome {
        failed: if all { Vec::new() } else { vec!["sigma_clauses".into()] },
        out_dir: PathBuf::new(),
    })
}

/// Echo of the effective config, written by every command.
pub fn write_config(out: &OutputDir, cfg: &RunConfig) -> Result<String, CliError> {
    let text = to_text(cfg);
    out.write("config.txt", &text)?;
    Ok(text)
}
