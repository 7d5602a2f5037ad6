//! Experiment configuration files.
//!
//! A config is a TOML document:
//!
//! ```toml
//! kind = "moran"
//! seed = 7
//! replicates = 4
//!
//! [params]
//! demes = 20
//! scenario = ["anticorrelated", "constant"]
//! ```
//!
//! An array under `[params]` (other than the keys that are lists by nature,
//! such as `times`) is a sweep: the cartesian product of all sweep axes is
//! expanded into child runs, child `i` getting seed `seed + i`. Moran
//! `scenario` lists are the exception: all scenarios of one parameter
//! combination share that combination's seed.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use fluctsel::domain::Point;
use fluctsel::duals::{LatticeParams, MAX_LATTICE_SITES};
use fluctsel::kernel::UnderlyingCorrelation;
use fluctsel::limits::{DiffusionParams, SpdeParams, SpdeTerms};
use fluctsel::moran::{InitialTypes, MoranConfig, Scenario};
use fluctsel::nonspatial::ScalingSchedule;
use fluctsel::slfv::{RescaleSpec, SlfvParams};
use fluctsel::{EnvironmentKernel, FrequencyField, SpatialDomain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    NonspatialScaling,
    Sde,
    Spde,
    Slfv,
    SlfvRescaled,
    DualityNonspatial,
    DualityLattice,
    Moran,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::NonspatialScaling,
        Kind::Sde,
        Kind::Spde,
        Kind::Slfv,
        Kind::SlfvRescaled,
        Kind::DualityNonspatial,
        Kind::DualityLattice,
        Kind::Moran,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::NonspatialScaling => "nonspatial-scaling",
            Kind::Sde => "sde",
            Kind::Spde => "spde",
            Kind::Slfv => "slfv",
            Kind::SlfvRescaled => "slfv-rescaled",
            Kind::DualityNonspatial => "duality-nonspatial",
            Kind::DualityLattice => "duality-lattice",
            Kind::Moran => "moran",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Keys whose values are lists in their own right rather than sweeps.
    fn list_keys(self) -> &'static [&'static str] {
        match self {
            Kind::SlfvRescaled => &["times"],
            Kind::DualityLattice => &["x0", "dual0"],
            _ => &[],
        }
    }
}

/// A parsed, fully validated config.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub kind: Kind,
    pub seed: u64,
    pub replicates: usize,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub runs: Vec<ChildRun>,
}

impl ExperimentSpec {
    /// Replaces the master seed, re-deriving the child seeds.
    pub fn with_seed(mut self, seed: u64) -> Self {
        for run in &mut self.runs {
            run.seed = seed.wrapping_add(run.seed.wrapping_sub(self.seed));
        }
        self.seed = seed;
        self
    }
}

/// One point of a sweep. `name` is empty when the config has no sweep.
#[derive(Debug, Clone)]
pub struct ChildRun {
    pub name: String,
    pub seed: u64,
    pub job: Job,
}

#[derive(Debug, Clone)]
pub enum Job {
    NonspatialScaling {
        schedule: ScalingSchedule,
        p0: f64,
        horizon: f64,
        record_dt: Option<f64>,
        /// Euler-Maruyama step of the diffusion reference used by `verify`.
        reference_dt: f64,
    },
    Sde {
        params: DiffusionParams,
        p0: f64,
        horizon: f64,
    },
    Spde {
        params: SpdeParams,
        w0: FrequencyField,
        v0: Option<FrequencyField>,
        steps: u64,
        record_every: u64,
    },
    Slfv {
        params: SlfvParams,
        w0: FrequencyField,
        v0: Option<FrequencyField>,
        horizon: f64,
        record_dt: f64,
        log_events: bool,
    },
    SlfvRescaled {
        spec: RescaleSpec,
        kernel: EnvironmentKernel,
        initial: FrequencyField,
        times: Vec<f64>,
    },
    DualityNonspatial {
        x0: f64,
        n0: u64,
        impact: f64,
        selection: f64,
        horizon: f64,
        dt: f64,
    },
    DualityLattice {
        params: LatticeParams,
        x0: Vec<f64>,
        dual0: Vec<u64>,
        horizon: f64,
        dt: f64,
    },
    Moran {
        config: MoranConfig,
        log_events: bool,
    },
}

/// Every problem found in a config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

pub fn parse_config(path: &Path) -> Result<ExperimentSpec, ConfigErrors> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigErrors(vec![format!("{}: {e}", path.display())]))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentSpec, ConfigErrors> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigErrors(vec![format!("malformed TOML: {}", e.message())]))?;
    let empty = Table::new();
    let mut top = Reader::new("", &table);
    let kind = top.required_str("kind").and_then(|name| {
        let kind = Kind::parse(name);
        if kind.is_none() {
            let names: Vec<_> = Kind::ALL.iter().map(|k| k.name()).collect();
            top.fail("kind", format!("unknown experiment kind {name:?}; expected one of {}", names.join(", ")));
        }
        kind
    });
    let seed = top.u64_or("seed", 0);
    let replicates = top.u64_or("replicates", 1) as usize;
    if replicates == 0 {
        top.fail("replicates", "must be at least 1");
    }
    let out = top.opt_str("out").map(PathBuf::from);
    let workers = top.opt_u64("workers").map(|w| w as usize);
    if workers == Some(0) {
        top.fail("workers", "must be at least 1");
    }
    let params = match top.raw("params") {
        None => &empty,
        Some(Value::Table(t)) => t,
        Some(v) => {
            top.fail("params", format!("expected a table, got {}", v.type_str()));
            &empty
        }
    };
    let mut errors = Errors::default();
    errors.extend(top.finish());
    let Some(kind) = kind else {
        return Err(ConfigErrors(errors.0));
    };

    let mut axes = Vec::new();
    let mut scenarios = None;
    for (key, value) in params {
        if let Value::Array(values) = value {
            if kind.list_keys().contains(&key.as_str()) {
                continue;
            }
            if values.is_empty() {
                errors.push(format!("params.{key}: a sweep needs at least one value"));
            } else if kind == Kind::Moran && key == "scenario" {
                scenarios = Some(values.clone());
            } else {
                axes.push((key.clone(), values.clone()));
            }
        }
    }
    let mut runs = Vec::new();
    for (index, combo) in cartesian(&axes).into_iter().enumerate() {
        let child_seed = seed.wrapping_add(index as u64);
        let variants: Vec<Option<&Value>> = match &scenarios {
            Some(list) => list.iter().map(Some).collect(),
            None => vec![None],
        };
        for scenario in variants {
            let mut child = params.clone();
            let mut name = Vec::new();
            for (i, value) in combo.iter().enumerate() {
                child.insert(axes[i].0.clone(), (*value).clone());
                name.push(format!("{}-{}", axes[i].0, label(value)));
            }
            if let Some(s) = scenario {
                child.insert("scenario".into(), s.clone());
                name.push(format!("scenario-{}", label(s)));
            }
            let mut reader = Reader::new("params", &child);
            let job = build(kind, &mut reader, replicates);
            errors.extend(reader.finish());
            if let Some(job) = job {
                runs.push(ChildRun {
                    name: name.join("_"),
                    seed: child_seed,
                    job,
                });
            }
        }
    }
    if !errors.0.is_empty() {
        return Err(ConfigErrors(errors.0));
    }
    Ok(ExperimentSpec {
        kind,
        seed,
        replicates,
        out,
        workers,
        runs,
    })
}

fn label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Float(x) => format!("{x}"),
        other => other.to_string(),
    }
}

fn cartesian<'v>(axes: &'v [(String, Vec<Value>)]) -> Vec<Vec<&'v Value>> {
    let mut combos: Vec<Vec<&Value>> = vec![Vec::new()];
    for (_, values) in axes {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut next = c.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    combos
}

/// Ordered, de-duplicated messages (sweep children repeat the same mistakes).
#[derive(Default)]
struct Errors(Vec<String>);

impl Errors {
    fn push(&mut self, e: String) {
        if !self.0.contains(&e) {
            self.0.push(e);
        }
    }

    fn extend(&mut self, es: Vec<String>) {
        for e in es {
            self.push(e);
        }
    }
}

/// Typed access to one table that remembers which keys were read.
struct Reader<'t> {
    section: String,
    table: &'t Table,
    used: BTreeSet<String>,
    errors: Vec<String>,
}

impl<'t> Reader<'t> {
    fn new(section: &str, table: &'t Table) -> Self {
        Self {
            section: section.to_string(),
            table,
            used: BTreeSet::new(),
            errors: Vec::new(),
        }
    }

    fn path(&self, key: &str) -> String {
        if self.section.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.section)
        }
    }

    fn fail(&mut self, key: &str, msg: impl fmt::Display) {
        let e = format!("{}: {msg}", self.path(key));
        self.errors.push(e);
    }

    fn raw(&mut self, key: &str) -> Option<&'t Value> {
        self.used.insert(key.to_string());
        self.table.get(key)
    }

    fn missing(&mut self, key: &str) {
        self.fail(key, "missing required key");
    }

    fn opt_f64(&mut self, key: &str) -> Option<f64> {
        match self.raw(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            v => {
                let t = v.type_str();
                self.fail(key, format!("expected a number, got {t}"));
                None
            }
        }
    }

    fn f64(&mut self, key: &str) -> Option<f64> {
        if !self.table.contains_key(key) {
            self.used.insert(key.to_string());
            self.missing(key);
            return None;
        }
        self.opt_f64(key)
    }

    fn f64_or(&mut self, key: &str, default: f64) -> f64 {
        self.opt_f64(key).unwrap_or(default)
    }

    fn opt_u64(&mut self, key: &str) -> Option<u64> {
        match self.raw(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            v => {
                let t = v.type_str();
                self.fail(key, format!("expected a non-negative integer, got {t} {v}"));
                None
            }
        }
    }

    fn u64(&mut self, key: &str) -> Option<u64> {
        if !self.table.contains_key(key) {
            self.used.insert(key.to_string());
            self.missing(key);
            return None;
        }
        self.opt_u64(key)
    }

    fn u64_or(&mut self, key: &str, default: u64) -> u64 {
        self.opt_u64(key).unwrap_or(default)
    }

    fn bool_or(&mut self, key: &str, default: bool) -> bool {
        match self.raw(key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(v) => {
                let t = v.type_str();
                self.fail(key, format!("expected a boolean, got {t}"));
                default
            }
        }
    }

    fn opt_str(&mut self, key: &str) -> Option<&'t str> {
        match self.raw(key)? {
            Value::String(s) => Some(s.as_str()),
            v => {
                let t = v.type_str();
                self.fail(key, format!("expected a string, got {t}"));
                None
            }
        }
    }

    fn required_str(&mut self, key: &str) -> Option<&'t str> {
        if !self.table.contains_key(key) {
            self.used.insert(key.to_string());
            self.missing(key);
            return None;
        }
        self.opt_str(key)
    }

    /// A list of numbers; a bare number counts as a one-element list.
    fn f64_list(&mut self, key: &str) -> Option<Vec<f64>> {
        match self.raw(key)? {
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        Value::Float(x) => out.push(*x),
                        Value::Integer(i) => out.push(*i as f64),
                        v => {
                            let t = v.type_str();
                            self.fail(key, format!("expected numbers, found {t}"));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            Value::Float(x) => Some(vec![*x]),
            Value::Integer(i) => Some(vec![*i as f64]),
            v => {
                let t = v.type_str();
                self.fail(key, format!("expected a list of numbers, got {t}"));
                None
            }
        }
    }

    fn u64_list(&mut self, key: &str) -> Option<Vec<u64>> {
        match self.raw(key)? {
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        Value::Integer(i) if *i >= 0 => out.push(*i as u64),
                        v => {
                            self.fail(key, format!("expected non-negative integers, found {v}"));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            v => {
                let t = v.type_str();
                self.fail(key, format!("expected a list of integers, got {t}"));
                None
            }
        }
    }

    fn sub(&mut self, key: &str) -> Option<Reader<'t>> {
        match self.raw(key)? {
            Value::Table(t) => Some(Reader::new(&self.path(key), t)),
            v => {
                let t = v.type_str();
                self.fail(key, format!("expected a table, got {t}"));
                None
            }
        }
    }

    fn absorb(&mut self, other: Reader<'_>) {
        self.errors.extend(other.finish());
    }

    /// Converts a core validation error into a message.
    fn check<T>(&mut self, result: fluctsel::Result<T>) -> Option<T> {
        match result {
            Ok(v) => Some(v),
            Err(e) => {
                let msg = match self.section.as_str() {
                    "" => e.to_string(),
                    s => format!("{s}: {e}"),
                };
                self.errors.push(msg);
                None
            }
        }
    }

    fn require(&mut self, key: &str, ok: bool, constraint: &str) {
        if !ok {
            self.fail(key, constraint);
        }
    }

    /// All collected errors plus one per unknown key.
    fn finish(mut self) -> Vec<String> {
        let unknown: Vec<String> = self
            .table
            .keys()
            .filter(|k| !self.used.contains(*k))
            .cloned()
            .collect();
        for key in unknown {
            self.fail(&key, "unknown key");
        }
        self.errors
    }
}

fn build(kind: Kind, r: &mut Reader<'_>, replicates: usize) -> Option<Job> {
    match kind {
        Kind::NonspatialScaling => nonspatial_scaling(r),
        Kind::Sde => sde(r),
        Kind::Spde => spde(r),
        Kind::Slfv => slfv(r),
        Kind::SlfvRescaled => slfv_rescaled(r),
        Kind::DualityNonspatial => duality_nonspatial(r, replicates),
        Kind::DualityLattice => duality_lattice(r, replicates),
        Kind::Moran => moran(r),
    }
}

fn frequency(r: &mut Reader<'_>, key: &str, default: f64) -> f64 {
    let p = r.f64_or(key, default);
    r.require(key, (0.0..=1.0).contains(&p), "must lie in [0, 1]");
    p
}

fn positive(r: &mut Reader<'_>, key: &str) -> Option<f64> {
    let x = r.f64(key)?;
    r.require(key, x.is_finite() && x > 0.0, "must be positive");
    Some(x)
}

fn nonspatial_scaling(r: &mut Reader<'_>) -> Option<Job> {
    let level = r.f64("level");
    let alpha = r.f64("alpha");
    if let Some(a) = alpha {
        r.require("alpha", a > 0.0 && a < 0.25, "must lie in (0, 1/4)");
    }
    let impact = r.f64_or("impact", 1.0);
    let selection = r.f64_or("selection", 1.0);
    let p0 = frequency(r, "p0", 0.5);
    let horizon = positive(r, "horizon");
    let record_dt = r.opt_f64("record_dt");
    if let Some(dt) = record_dt {
        r.require("record_dt", dt > 0.0, "must be positive");
    }
    let reference_dt = r.f64_or("reference_dt", 1e-3);
    r.require("reference_dt", reference_dt > 0.0, "must be positive");
    let (level, alpha, horizon) = (level?, alpha?, horizon?);
    if !(alpha > 0.0 && alpha < 0.25) {
        return None;
    }
    let schedule = r.check(ScalingSchedule::new(level, alpha, impact, selection))?;
    r.check(DiffusionParams::new(impact, selection, reference_dt))?;
    Some(Job::NonspatialScaling {
        schedule,
        p0,
        horizon,
        record_dt,
        reference_dt,
    })
}

fn sde(r: &mut Reader<'_>) -> Option<Job> {
    let impact = r.f64_or("impact", 1.0);
    let selection = r.f64_or("selection", 1.0);
    let dt = r.f64_or("dt", fluctsel::limits::sde::DEFAULT_DT);
    let p0 = frequency(r, "p0", 0.5);
    let horizon = positive(r, "horizon");
    let params = r.check(DiffusionParams::new(impact, selection, dt))?;
    Some(Job::Sde {
        params,
        p0,
        horizon: horizon?,
    })
}

fn domain(r: &mut Reader<'_>) -> Option<SpatialDomain> {
    let dimension = r.u64("dimension");
    let side = r.f64_or("side", 1.0);
    let cells = r.u64("cells");
    let (d, cells) = (dimension?, cells?);
    r.check(SpatialDomain::with_cells(d as usize, side, cells as usize))
}

fn kernel(r: &mut Reader<'_>, domain: Option<SpatialDomain>) -> Option<EnvironmentKernel> {
    let Some(mut k) = r.sub("kernel") else {
        if r.table.contains_key("kernel") {
            return None;
        }
        return domain.map(EnvironmentKernel::white_lattice);
    };
    let kind = k.opt_str("kind").unwrap_or("white");
    let result = match kind {
        "white" => domain.map(EnvironmentKernel::white_lattice),
        "block" => {
            let blocks = k.u64("blocks");
            let correlation = k.f64("correlation");
            match (domain, blocks, correlation) {
                (Some(d), Some(b), Some(c)) => k.check(EnvironmentKernel::block(d, b as usize, c)),
                _ => None,
            }
        }
        "gaussian-sign" => {
            let length = k.f64("length_scale");
            let underlying = match k.opt_str("underlying").unwrap_or("squared-exponential") {
                "squared-exponential" => Some(UnderlyingCorrelation::SquaredExponential),
                "exponential" => Some(UnderlyingCorrelation::Exponential),
                other => {
                    k.fail("underlying", format!("unknown correlation {other:?}; expected squared-exponential or exponential"));
                    None
                }
            };
            match (domain, length, underlying) {
                (Some(d), Some(l), Some(u)) => k.check(EnvironmentKernel::gaussian_sign(d, l, u)),
                _ => None,
            }
        }
        other => {
            k.fail("kind", format!("unknown kernel {other:?}; expected white, block or gaussian-sign"));
            None
        }
    };
    r.absorb(k);
    result
}

/// Ratio `a / b` as an integer, if it is one.
fn whole_ratio(a: f64, b: f64) -> Option<u64> {
    let q = a / b;
    let n = q.round();
    ((q - n).abs() <= 1e-9 * q.max(1.0) && n >= 1.0).then_some(n as u64)
}

/// `p0 + amplitude·exp(-|x - c|²/(2 width²))` around the centre of the domain.
fn initial_field(r: &mut Reader<'_>, domain: Option<SpatialDomain>) -> Option<FrequencyField> {
    let p0 = frequency(r, "p0", 0.5);
    let amplitude = r.f64_or("bump_amplitude", 0.0);
    let width = r.f64_or("bump_width", 0.1);
    r.require("bump_width", width > 0.0, "must be positive");
    let domain = domain?;
    let c = domain.side() / 2.0;
    let field = FrequencyField::from_fn(domain, |x: Point| {
        let d = domain.displacement(x, [c, if domain.dimension() == 2 { c } else { 0.0 }]);
        let r2 = d[0] * d[0] + d[1] * d[1];
        p0 + amplitude * (-r2 / (2.0 * width * width)).exp()
    });
    r.check(field)
}

/// The tracer marks the whole population in the left half of the domain.
fn tracer_field(r: &mut Reader<'_>, w: &FrequencyField) -> Option<FrequencyField> {
    let half = w.domain().side() / 2.0;
    let values = (0..w.values().len())
        .map(|c| {
            if w.domain().cell_centre(c)[0] < half {
                w.get(c)
            } else {
                0.0
            }
        })
        .collect();
    r.check(FrequencyField::new(*w.domain(), values))
}

fn spde(r: &mut Reader<'_>) -> Option<Job> {
    let domain = domain(r);
    let kernel = kernel(r, domain);
    let impact = r.f64_or("impact", 0.5);
    let selection = r.f64_or("selection", 0.0);
    let radius = positive(r, "radius");
    let dt = positive(r, "dt");
    let horizon = positive(r, "horizon");
    let record_dt = r.opt_f64("record_dt");
    let dim = domain.map_or(1, |d| d.dimension());
    let full = SpdeTerms::full(dim);
    let terms = SpdeTerms {
        reaction: r.bool_or("reaction", full.reaction),
        coloured_noise: r.bool_or("coloured_noise", full.coloured_noise),
        white_noise: r.bool_or("white_noise", full.white_noise),
    };
    let w0 = initial_field(r, domain);
    let tracer = r.bool_or("tracer", false);
    let (kernel, radius, dt, horizon, w0) = (kernel?, radius?, dt?, horizon?, w0?);
    let steps = whole_ratio(horizon, dt);
    if steps.is_none() {
        r.fail("horizon", format!("must be a whole number of time steps dt = {dt}"));
    }
    let record_every = match record_dt {
        None => steps,
        Some(rd) => {
            let k = whole_ratio(rd, dt);
            if k.is_none() {
                r.fail("record_dt", format!("must be a whole number of time steps dt = {dt}"));
            }
            k
        }
    };
    let params = r.check(SpdeParams::new(kernel, impact, selection, radius, dt, terms))?;
    let v0 = if tracer { Some(tracer_field(r, &w0)?) } else { None };
    Some(Job::Spde {
        params,
        w0,
        v0,
        steps: steps?,
        record_every: record_every?,
    })
}

fn slfv(r: &mut Reader<'_>) -> Option<Job> {
    let domain = domain(r);
    let kernel = kernel(r, domain);
    let radius = r.f64("radius");
    let impact = r.f64("impact");
    let selection = r.f64_or("selection", 0.0);
    let env_rate = r.f64_or("env_rate", 1.0);
    let intensity = r.f64_or("intensity", 1.0);
    let horizon = positive(r, "horizon");
    let record_dt = r.opt_f64("record_dt");
    let log_events = r.bool_or("log_events", false);
    let tracer = r.bool_or("tracer", false);
    let w0 = initial_field(r, domain);
    let (kernel, radius, impact, horizon, w0) = (kernel?, radius?, impact?, horizon?, w0?);
    let record_dt = record_dt.unwrap_or(horizon);
    r.require("record_dt", record_dt > 0.0, "must be positive");
    let params = r.check(SlfvParams::new(kernel, radius, impact, selection, env_rate, intensity))?;
    let v0 = if tracer { Some(tracer_field(r, &w0)?) } else { None };
    Some(Job::Slfv {
        params,
        w0,
        v0,
        horizon,
        record_dt,
        log_events,
    })
}

fn slfv_rescaled(r: &mut Reader<'_>) -> Option<Job> {
    let domain = domain(r);
    let kernel = kernel(r, domain);
    let level = r.f64("level");
    let alpha = r.f64("alpha");
    if let Some(a) = alpha {
        r.require("alpha", a > 0.0 && a < 1.0 / 6.0, "must lie in (0, 1/6)");
    }
    let impact = r.f64("impact");
    let selection = r.f64_or("selection", 0.0);
    let radius = r.f64("radius");
    let times = r.f64_list("times");
    if let Some(t) = &times {
        let ok = !t.is_empty()
            && t.iter().all(|x| x.is_finite() && *x >= 0.0)
            && t.windows(2).all(|w| w[0] <= w[1]);
        r.require("times", ok, "must be a non-empty, sorted list of non-negative times");
    }
    let initial = initial_field(r, domain);
    let (kernel, level, alpha, impact, radius, times, initial) =
        (kernel?, level?, alpha?, impact?, radius?, times?, initial?);
    if !(alpha > 0.0 && alpha < 1.0 / 6.0) {
        return None;
    }
    let spec = r.check(RescaleSpec::new(level, alpha, impact, selection, radius))?;
    r.check(spec.params(kernel.clone()))?;
    Some(Job::SlfvRescaled {
        spec,
        kernel,
        initial,
        times,
    })
}

fn duality_time(r: &mut Reader<'_>) -> (Option<f64>, f64) {
    let horizon = r.f64("horizon");
    if let Some(h) = horizon {
        r.require("horizon", h >= 0.0, "must be non-negative");
    }
    let dt = r.f64_or("dt", 1e-4);
    r.require("dt", dt > 0.0, "must be positive");
    (horizon, dt)
}

fn check_duality_rates(r: &mut Reader<'_>, impact: f64, selection: f64) {
    r.require("impact", impact > 0.0 && impact <= 1.0, "must lie in (0, 1]");
    r.require("selection", selection >= 0.0, "must be non-negative");
}

fn duality_nonspatial(r: &mut Reader<'_>, replicates: usize) -> Option<Job> {
    let x0 = r.f64_or("x0", 0.0);
    r.require("x0", (-1.0..=1.0).contains(&x0), "must lie in [-1, 1]");
    let n0 = r.u64_or("n0", 2);
    let impact = r.f64_or("impact", 1.0);
    let selection = r.f64_or("selection", 1.0);
    check_duality_rates(r, impact, selection);
    let (horizon, dt) = duality_time(r);
    if replicates < 2 {
        r.errors.push("replicates: a duality check needs at least 2".into());
    }
    Some(Job::DualityNonspatial {
        x0,
        n0,
        impact,
        selection,
        horizon: horizon?,
        dt,
    })
}

fn duality_lattice(r: &mut Reader<'_>, replicates: usize) -> Option<Job> {
    let sites = r.u64("sites");
    let spacing = r.f64_or("spacing", 1.0);
    let impact = r.f64_or("impact", 1.0);
    let selection = r.f64_or("selection", 1.0);
    check_duality_rates(r, impact, selection);
    let radius = r.f64_or("radius", 0.5);
    let x0 = r.f64_list("x0");
    let dual0 = r.u64_list("dual0");
    let (horizon, dt) = duality_time(r);
    if replicates < 2 {
        r.errors.push("replicates: a duality check needs at least 2".into());
    }
    let sites = sites? as usize;
    if !(2..=MAX_LATTICE_SITES).contains(&sites) {
        r.fail("sites", format!("must lie in 2..={MAX_LATTICE_SITES}"));
        return None;
    }
    let mut x0 = x0?;
    if x0.len() == 1 {
        x0 = vec![x0[0]; sites];
    }
    r.require("x0", x0.len() == sites, "needs one value per site (or a single value)");
    r.require("x0", x0.iter().all(|x| (-1.0..=1.0).contains(x)), "values must lie in [-1, 1]");
    let dual0 = dual0?;
    r.require("dual0", dual0.len() == sites, "needs one count per site");
    let domain = r.check(SpatialDomain::new(1, spacing * sites as f64, spacing))?;
    let params = r.check(LatticeParams::new(&EnvironmentKernel::white_lattice(domain), impact, selection, radius))?;
    Some(Job::DualityLattice {
        params,
        x0,
        dual0,
        horizon: horizon?,
        dt,
    })
}

fn moran(r: &mut Reader<'_>) -> Option<Job> {
    let d = MoranConfig::default();
    let scenario = match r.opt_str("scenario") {
        None if r.table.contains_key("scenario") => None,
        None => Some(d.scenario),
        Some(name) => {
            let s = Scenario::parse(name);
            if s.is_none() {
                let names: Vec<_> = Scenario::ALL.iter().map(|s| s.name()).collect();
                r.fail("scenario", format!("unknown scenario {name:?}; expected one of {}", names.join(", ")));
            }
            s
        }
    };
    let initial = match (r.opt_f64("p0"), r.opt_u64("initial_count")) {
        (Some(_), Some(_)) => {
            r.fail("initial_count", "give either p0 or initial_count, not both");
            d.initial
        }
        (None, Some(k)) => InitialTypes::PerDeme(k as usize),
        (Some(p), None) => InitialTypes::Bernoulli(p),
        (None, None) => d.initial,
    };
    let config = MoranConfig {
        demes: r.u64_or("demes", d.demes as u64) as usize,
        deme_size: r.u64_or("deme_size", d.deme_size as u64) as usize,
        selection: r.f64_or("selection", d.selection),
        env_rate: r.f64_or("env_rate", d.env_rate),
        migration: r.f64_or("migration", d.migration),
        scenario: scenario?,
        initial,
        record_every: r.u64_or("record_every", d.record_every),
        record_dt: r.opt_f64("record_dt"),
        horizon: r.f64_or("horizon", d.horizon),
        stop_at_fixation: r.bool_or("stop_at_fixation", d.stop_at_fixation),
    };
    let log_events = r.bool_or("log_events", false);
    r.check(config.validate())?;
    Some(Job::Moran { config, log_events })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moran_defaults() {
        let spec = parse_config_str("kind = \"moran\"\n").unwrap();
        assert_eq!(spec.runs.len(), 1);
        let Job::Moran { config, .. } = &spec.runs[0].job else {
            panic!("wrong job");
        };
        assert_eq!(
            (config.demes, config.deme_size, config.selection, config.env_rate, config.migration),
            (100, 400, 0.1, 10.0, 1.0)
        );
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse_config_str("kind = \"sde\"\ncolour = 1\n[params]\nhorizon = 1\nbogus = 2\n").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("colour: unknown key"), "{text}");
        assert!(text.contains("params.bogus: unknown key"), "{text}");
    }

    #[test]
    fn all_errors_are_reported() {
        let err = parse_config_str(
            "kind = \"moran\"\nreplicates = 0\n[params]\ndemes = 1\nselection = 2.0\n",
        )
        .unwrap_err();
        assert!(err.0.len() >= 2, "{err}");
        let text = err.to_string();
        assert!(text.contains("replicates") && text.contains("selection"), "{text}");
    }

    #[test]
    fn sweep_seeds() {
        let spec = parse_config_str(
            "kind = \"moran\"\nseed = 10\n[params]\ndemes = [4, 6]\ndeme_size = 5\nscenario = [\"neutral\", \"constant\"]\n",
        )
        .unwrap();
        let seeds: Vec<_> = spec.runs.iter().map(|r| (r.name.as_str(), r.seed)).collect();
        assert_eq!(
            seeds,
            vec![
                ("demes-4_scenario-neutral", 10),
                ("demes-4_scenario-constant", 10),
                ("demes-6_scenario-neutral", 11),
                ("demes-6_scenario-constant", 11),
            ]
        );
        let reseeded = spec.with_seed(100);
        assert_eq!(reseeded.runs[3].seed, 101);
    }

    #[test]
    fn lattice_x0_broadcasts() {
        let spec = parse_config_str(
            "kind = \"duality-lattice\"\nreplicates = 10\n[params]\nsites = 5\nx0 = 0.0\ndual0 = [2, 0, 0, 0, 0]\nhorizon = 0.1\n",
        )
        .unwrap();
        let Job::DualityLattice { x0, .. } = &spec.runs[0].job else {
            panic!("wrong job");
        };
        assert_eq!(x0, &vec![0.0; 5]);
    }
}
