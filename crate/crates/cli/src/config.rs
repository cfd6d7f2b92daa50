//! Flat `key = value` run configuration with dotted section prefixes.
//!
//! Lines are `key = value`; `#` starts a comment. Lists use commas
//! (`a1 = 1, 0`), lists of lists use semicolons (`group.normals = 0,1; 0.866,-0.5`),
//! and polynomial terms are `coef:e1,e2,...` separated by semicolons.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid value for {key}: {msg}")]
    Validation { key: String, msg: String },
}

type Result<T> = std::result::Result<T, ConfigError>;

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        key: key.into(),
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroupConfig {
    /// Dihedral group of order 2m in the plane.
    Dihedral(usize),
    /// Reflection normals spanning R^n.
    Normals(Vec<Vec<f64>>),
}

impl GroupConfig {
    pub fn dim(&self) -> usize {
        match self {
            GroupConfig::Dihedral(_) => 2,
            GroupConfig::Normals(v) => v.first().map_or(0, Vec::len),
        }
    }
}

/// One monomial coef * u1^e1 * ... * un^en.
pub type Term = (f64, Vec<u32>);

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialConfig {
    Triangle,
    Polynomial {
        terms: Vec<Term>,
        minima: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSettings {
    /// `None` selects 0.2 h^2 / n.
    pub dt: Option<f64>,
    pub tol: f64,
    pub max_steps: usize,
    pub k_sym: usize,
    pub clamp: bool,
    pub sym_threshold: f64,
    pub newton_start: f64,
    pub stall_checkpoints: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub kato: bool,
    pub subharmonic: bool,
    pub positivity: bool,
    pub degiorgi: bool,
    pub decay: bool,
    pub ordering: bool,
    pub kato_trials: usize,
    pub subharmonic_trials: usize,
    pub decay_min: f64,
    pub decay_max: f64,
    /// `None` selects R/4.
    pub ball_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub radii: Vec<f64>,
    pub require_convergence: bool,
}

/// Overrides for the comparison construction; unset values come from the potential.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub n: Option<usize>,
    pub c: Option<f64>,
    pub q_bar: Option<f64>,
    pub q_max: Option<f64>,
    pub l0_hint: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub group: GroupConfig,
    pub potential: PotentialConfig,
    pub a1: Vec<f64>,
    /// Perturbation H of the monitor Q = |u - a1| + H(u - a1); empty for the plain distance.
    pub q_terms: Vec<Term>,
    pub radius: f64,
    pub h: f64,
    pub flow: FlowSettings,
    pub verify: VerifyConfig,
    pub sweep: SweepConfig,
    pub compare: CompareConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn dim(&self) -> usize {
        self.group.dim()
    }

    /// Time step after defaults.
    pub fn dt(&self) -> f64 {
        self.flow.dt.unwrap_or(0.2 * self.h * self.h / self.dim() as f64)
    }

    pub fn ball_radius(&self) -> f64 {
        self.verify.ball_radius.unwrap_or(0.25 * self.radius)
    }
}

const KEYS: &[&str] = &[
    "group.dihedral",
    "group.normals",
    "potential.kind",
    "potential.terms",
    "potential.minima",
    "a1",
    "q.terms",
    "grid.R",
    "grid.h",
    "flow.dt",
    "flow.tol",
    "flow.max_steps",
    "flow.k_sym",
    "flow.clamp",
    "flow.sym_threshold",
    "flow.newton_start",
    "flow.stall_checkpoints",
    "verify.kato",
    "verify.subharmonic",
    "verify.positivity",
    "verify.degiorgi",
    "verify.decay",
    "verify.ordering",
    "verify.kato_trials",
    "verify.subharmonic_trials",
    "verify.decay_min",
    "verify.decay_max",
    "verify.ball_radius",
    "sweep.radii",
    "sweep.require_convergence",
    "compare.n",
    "compare.c",
    "compare.q_bar",
    "compare.Q_max",
    "compare.l0_hint",
    "compare.rho",
    "seed",
    "out",
];

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut raw: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: line_no,
            msg: format!("expected `key = value`, got {body:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(ConfigError::Parse {
                line: line_no,
                msg: format!("unknown key {key:?}"),
            });
        };
        if value.is_empty() {
            return Err(ConfigError::Parse {
                line: line_no,
                msg: format!("empty value for {key}"),
            });
        }
        if raw.insert(known, (line_no, value)).is_some() {
            return Err(ConfigError::Parse {
                line: line_no,
                msg: format!("duplicate key {key}"),
            });
        }
    }
    let doc = Doc { raw };
    let cfg = doc.build()?;
    validate(&cfg)?;
    Ok(cfg)
}

struct Doc<'a> {
    raw: BTreeMap<&'a str, (usize, &'a str)>,
}

fn parse_err(line: usize, key: &str, what: &str, value: &str) -> ConfigError {
    ConfigError::Parse {
        line,
        msg: format!("{key}: expected {what}, got {value:?}"),
    }
}

impl Doc<'_> {
    fn get<T>(&self, key: &str, what: &str, f: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        match self.raw.get(key) {
            None => Ok(None),
            Some(&(line, v)) => f(v).map(Some).ok_or_else(|| parse_err(line, key, what, v)),
        }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key, "a number", |v| v.parse().ok())
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key, "a nonnegative integer", |v| v.parse().ok())
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.get(key, "true or false", |v| v.parse().ok())
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key, "a comma-separated list of numbers", parse_list)
    }

    fn lists(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        self.get(key, "semicolon-separated lists of numbers", |v| {
            v.split(';').map(parse_list).collect()
        })
    }

    fn terms(&self, key: &str) -> Result<Option<Vec<Term>>> {
        self.get(key, "terms `coef:e1,e2,...` separated by semicolons", parse_terms)
    }

    fn build(&self) -> Result<RunConfig> {
        let group = match (self.usize("group.dihedral")?, self.lists("group.normals")?) {
            (Some(m), None) => GroupConfig::Dihedral(m),
            (None, Some(v)) => GroupConfig::Normals(v),
            (Some(_), Some(_)) => {
                return Err(invalid("group", "give either group.dihedral or group.normals, not both"))
            }
            (None, None) => return Err(invalid("group", "group.dihedral or group.normals is required")),
        };
        let dim = group.dim();
        let potential = match self.get("potential.kind", "triangle or polynomial", |v| {
            matches!(v, "triangle" | "polynomial").then(|| v.to_string())
        })?
        .as_deref()
        {
            None | Some("triangle") => {
                if self.raw.contains_key("potential.terms") || self.raw.contains_key("potential.minima") {
                    return Err(invalid("potential.terms", "only used with potential.kind = polynomial"));
                }
                PotentialConfig::Triangle
            }
            Some(_) => PotentialConfig::Polynomial {
                terms: self
                    .terms("potential.terms")?
                    .ok_or_else(|| invalid("potential.terms", "required for a polynomial potential"))?,
                minima: self
                    .lists("potential.minima")?
                    .ok_or_else(|| invalid("potential.minima", "required for a polynomial potential"))?,
            },
        };
        let radius = self
            .f64("grid.R")?
            .ok_or_else(|| invalid("grid.R", "required"))?;
        let mut a1 = vec![0.0; dim.max(1)];
        a1[0] = 1.0;
        let d = FlowSettings {
            dt: None,
            tol: 1e-3,
            max_steps: 400_000,
            k_sym: 50,
            clamp: false,
            sym_threshold: 5.0,
            newton_start: 0.0,
            stall_checkpoints: 200,
        };
        let flow = FlowSettings {
            dt: self.f64("flow.dt")?,
            tol: self.f64("flow.tol")?.unwrap_or(d.tol),
            max_steps: self.usize("flow.max_steps")?.unwrap_or(d.max_steps),
            k_sym: self.usize("flow.k_sym")?.unwrap_or(d.k_sym),
            clamp: self.bool("flow.clamp")?.unwrap_or(d.clamp),
            sym_threshold: self.f64("flow.sym_threshold")?.unwrap_or(d.sym_threshold),
            newton_start: self.f64("flow.newton_start")?.unwrap_or(d.newton_start),
            stall_checkpoints: self
                .usize("flow.stall_checkpoints")?
                .unwrap_or(d.stall_checkpoints),
        };
        let verify = VerifyConfig {
            kato: self.bool("verify.kato")?.unwrap_or(true),
            subharmonic: self.bool("verify.subharmonic")?.unwrap_or(true),
            positivity: self.bool("verify.positivity")?.unwrap_or(true),
            degiorgi: self.bool("verify.degiorgi")?.unwrap_or(true),
            decay: self.bool("verify.decay")?.unwrap_or(true),
            ordering: self.bool("verify.ordering")?.unwrap_or(true),
            kato_trials: self.usize("verify.kato_trials")?.unwrap_or(50),
            subharmonic_trials: self.usize("verify.subharmonic_trials")?.unwrap_or(100),
            decay_min: self.f64("verify.decay_min")?.unwrap_or(1.0),
            decay_max: self.f64("verify.decay_max")?.unwrap_or(3.0),
            ball_radius: self.f64("verify.ball_radius")?,
        };
        let sweep = SweepConfig {
            radii: self
                .list("sweep.radii")?
                .unwrap_or_else(|| vec![4.0, 6.0, 8.0, 12.0]),
            require_convergence: self.bool("sweep.require_convergence")?.unwrap_or(false),
        };
        let compare = CompareConfig {
            n: self.usize("compare.n")?,
            c: self.f64("compare.c")?,
            q_bar: self.f64("compare.q_bar")?,
            q_max: self.f64("compare.Q_max")?,
            l0_hint: self.f64("compare.l0_hint")?.unwrap_or(0.5),
            rho: self.f64("compare.rho")?.unwrap_or(0.5),
        };
        Ok(RunConfig {
            group,
            potential,
            a1: self.list("a1")?.unwrap_or(a1),
            q_terms: self.terms("q.terms")?.unwrap_or_default(),
            radius,
            h: self.f64("grid.h")?.unwrap_or(0.1),
            flow,
            verify,
            sweep,
            compare,
            seed: self
                .get("seed", "an unsigned integer", |v| v.parse().ok())?
                .unwrap_or(0),
            out: self
                .get("out", "a path", |v| Some(PathBuf::from(v)))?
                .unwrap_or_else(|| PathBuf::from("out")),
        })
    }
}

fn parse_list(v: &str) -> Option<Vec<f64>> {
    v.split(',').map(|t| t.trim().parse().ok()).collect()
}

fn parse_terms(v: &str) -> Option<Vec<Term>> {
    v.split(';')
        .map(|t| {
            let (coef, exps) = t.split_once(':')?;
            let coef: f64 = coef.trim().parse().ok()?;
            let exps: Option<Vec<u32>> = exps.split(',').map(|e| e.trim().parse().ok()).collect();
            Some((coef, exps?))
        })
        .collect()
}

fn check_finite(key: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("{v} is not finite")))
    }
}

fn check_positive(key: &str, v: f64) -> Result<()> {
    check_finite(key, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("{v} must be positive")))
    }
}

fn check_vectors(key: &str, vs: &[Vec<f64>], dim: usize) -> Result<()> {
    for v in vs {
        if v.len() != dim {
            return Err(invalid(key, format!("expected {dim} components, got {}", v.len())));
        }
        for &x in v {
            check_finite(key, x)?;
        }
    }
    Ok(())
}

fn check_terms(key: &str, terms: &[Term], dim: usize) -> Result<()> {
    for (c, e) in terms {
        check_finite(key, *c)?;
        if e.len() != dim {
            return Err(invalid(key, format!("expected {dim} exponents, got {}", e.len())));
        }
    }
    Ok(())
}

/// Range checks; every failure names its key.
pub fn validate(cfg: &RunConfig) -> Result<()> {
    let dim = cfg.dim();
    match &cfg.group {
        GroupConfig::Dihedral(m) => {
            if !(2..=64).contains(m) {
                return Err(invalid("group.dihedral", format!("m = {m} must lie in [2, 64]")));
            }
        }
        GroupConfig::Normals(v) => {
            if !(1..=4).contains(&dim) {
                return Err(invalid("group.normals", format!("dimension {dim} must lie in [1, 4]")));
            }
            check_vectors("group.normals", v, dim)?;
        }
    }
    match &cfg.potential {
        PotentialConfig::Triangle => {
            if dim != 2 {
                return Err(invalid("potential.kind", "the triangle potential is planar"));
            }
        }
        PotentialConfig::Polynomial { terms, minima } => {
            check_terms("potential.terms", terms, dim)?;
            if minima.is_empty() {
                return Err(invalid("potential.minima", "at least one minimum is required"));
            }
            check_vectors("potential.minima", minima, dim)?;
        }
    }
    check_vectors("a1", std::slice::from_ref(&cfg.a1), dim)?;
    if cfg.a1.iter().all(|&x| x == 0.0) {
        return Err(invalid("a1", "must be nonzero"));
    }
    check_terms("q.terms", &cfg.q_terms, dim)?;
    check_positive("grid.R", cfg.radius)?;
    check_positive("grid.h", cfg.h)?;
    if cfg.h >= cfg.radius {
        return Err(invalid("grid.h", format!("h = {} must be below R = {}", cfg.h, cfg.radius)));
    }
    if let Some(dt) = cfg.flow.dt {
        check_positive("flow.dt", dt)?;
        let bound = cfg.h * cfg.h / (2.0 * dim as f64);
        if dt > bound {
            return Err(invalid(
                "flow.dt",
                format!("dt = {dt} exceeds the stability bound h^2/(2n) = {bound}"),
            ));
        }
    }
    check_positive("flow.tol", cfg.flow.tol)?;
    if cfg.flow.max_steps == 0 {
        return Err(invalid("flow.max_steps", "must be at least 1"));
    }
    if cfg.flow.k_sym == 0 {
        return Err(invalid("flow.k_sym", "must be at least 1"));
    }
    check_positive("flow.sym_threshold", cfg.flow.sym_threshold)?;
    check_finite("flow.newton_start", cfg.flow.newton_start)?;
    if cfg.flow.newton_start < 0.0 {
        return Err(invalid("flow.newton_start", "must be nonnegative"));
    }
    let v = &cfg.verify;
    if v.kato_trials < 20 {
        return Err(invalid("verify.kato_trials", format!("{} is below 20", v.kato_trials)));
    }
    if v.subharmonic_trials == 0 {
        return Err(invalid("verify.subharmonic_trials", "must be at least 1"));
    }
    check_finite("verify.decay_min", v.decay_min)?;
    check_finite("verify.decay_max", v.decay_max)?;
    if !(v.decay_min >= 0.0 && v.decay_min < v.decay_max) {
        return Err(invalid(
            "verify.decay_max",
            format!("band [{}, {}] is empty", v.decay_min, v.decay_max),
        ));
    }
    if let Some(r) = v.ball_radius {
        check_positive("verify.ball_radius", r)?;
    }
    if cfg.sweep.radii.len() < 3 {
        return Err(invalid("sweep.radii", "at least 3 radii are required"));
    }
    for &r in &cfg.sweep.radii {
        check_positive("sweep.radii", r)?;
        if cfg.h >= r {
            return Err(invalid("sweep.radii", format!("R = {r} is not above h = {}", cfg.h)));
        }
    }
    let c = &cfg.compare;
    if let Some(n) = c.n {
        if !(1..=8).contains(&n) {
            return Err(invalid("compare.n", format!("{n} must lie in [1, 8]")));
        }
    }
    for (key, v) in [("compare.c", c.c), ("compare.q_bar", c.q_bar), ("compare.Q_max", c.q_max)] {
        if let Some(v) = v {
            check_positive(key, v)?;
        }
    }
    check_positive("compare.l0_hint", c.l0_hint)?;
    check_finite("compare.rho", c.rho)?;
    if !(c.rho > 0.0 && c.rho < 1.0) {
        return Err(invalid("compare.rho", format!("{} must lie in (0, 1)", c.rho)));
    }
    if cfg.out.as_os_str().is_empty() {
        return Err(invalid("out", "must not be empty"));
    }
    Ok(())
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn fmt_lists(v: &[Vec<f64>]) -> String {
    v.iter().map(|x| fmt_list(x)).collect::<Vec<_>>().join("; ")
}

fn fmt_terms(t: &[Term]) -> String {
    t.iter()
        .map(|(c, e)| {
            let e: Vec<String> = e.iter().map(u32::to_string).collect();
            format!("{c}:{}", e.join(","))
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Canonical text form; `parse_config` of the result yields an equal config.
pub fn to_text(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    match &cfg.group {
        GroupConfig::Dihedral(m) => put("group.dihedral", m.to_string()),
        GroupConfig::Normals(v) => put("group.normals", fmt_lists(v)),
    }
    match &cfg.potential {
        PotentialConfig::Triangle => put("potential.kind", "triangle".into()),
        PotentialConfig::Polynomial { terms, minima } => {
            put("potential.kind", "polynomial".into());
            put("potential.terms", fmt_terms(terms));
            put("potential.minima", fmt_lists(minima));
        }
    }
    put("a1", fmt_list(&cfg.a1));
    if !cfg.q_terms.is_empty() {
        put("q.terms", fmt_terms(&cfg.q_terms));
    }
    put("grid.R", cfg.radius.to_string());
    put("grid.h", cfg.h.to_string());
    let f = &cfg.flow;
    if let Some(dt) = f.dt {
        put("flow.dt", dt.to_string());
    }
    put("flow.tol", f.tol.to_string());
    put("flow.max_steps", f.max_steps.to_string());
    put("flow.k_sym", f.k_sym.to_string());
    put("flow.clamp", f.clamp.to_string());
    put("flow.sym_threshold", f.sym_threshold.to_string());
    put("flow.newton_start", f.newton_start.to_string());
    put("flow.stall_checkpoints", f.stall_checkpoints.to_string());
    let v = &cfg.verify;
    put("verify.kato", v.kato.to_string());
    put("verify.subharmonic", v.subharmonic.to_string());
    put("verify.positivity", v.positivity.to_string());
    put("verify.degiorgi", v.degiorgi.to_string());
    put("verify.decay", v.decay.to_string());
    put("verify.ordering", v.ordering.to_string());
    put("verify.kato_trials", v.kato_trials.to_string());
    put("verify.subharmonic_trials", v.subharmonic_trials.to_string());
    put("verify.decay_min", v.decay_min.to_string());
    put("verify.decay_max", v.decay_max.to_string());
    if let Some(r) = v.ball_radius {
        put("verify.ball_radius", r.to_string());
    }
    put("sweep.radii", fmt_list(&cfg.sweep.radii));
    put("sweep.require_convergence", cfg.sweep.require_convergence.to_string());
    let c = &cfg.compare;
    if let Some(n) = c.n {
        put("compare.n", n.to_string());
    }
    for (k, v) in [("compare.c", c.c), ("compare.q_bar", c.q_bar), ("compare.Q_max", c.q_max)] {
        if let Some(v) = v {
            put(k, v.to_string());
        }
    }
    put("compare.l0_hint", c.l0_hint.to_string());
    put("compare.rho", c.rho.to_string());
    put("seed", cfg.seed.to_string());
    put("out", cfg.out.display().to_string());
    s
}
