//! Scenario documents.
//!
//! A scenario is one JSON object. Everything is validated up front, and each
//! rejection carries a JSON-pointer path to the offending value. Unknown keys
//! are errors. Optional settings (grid, tolerances, anchors, window, seed,
//! coupling) are filled with their defaults and written back into the echo
//! that goes into the report.

use num_complex::Complex64;
use regdir_core::lap::YGrid;
use regdir_core::matkit::{CMat, Hermitian, MatError, Tolerances};
use regdir_core::models::{LatticeChannel, OperatorModel, RiggedModel, Rigging};
use regdir_core::perturb::{Direction, RegularityConfig};
use regdir_core::verify::Claim;
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

fn fail<T>(path: &str, message: impl Into<String>) -> Result<T, SchemaError> {
    Err(SchemaError {
        path: if path.is_empty() { "/".into() } else { path.into() },
        message: message.into(),
    })
}

fn child(path: &str, key: impl std::fmt::Display) -> String {
    format!("{path}/{key}")
}

/// Flag values that replace or fill scenario keys before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub anchors: Option<Vec<f64>>,
    pub window: Option<(f64, f64)>,
    pub axis: Option<Axis>,
    pub range: Option<(f64, f64, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Lambda,
    R,
    T,
    Y,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Lambda => "lambda",
            Axis::R => "r",
            Axis::T => "t",
            Axis::Y => "y",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "lambda" => Some(Axis::Lambda),
            "r" => Some(Axis::R),
            "t" => Some(Axis::T),
            "y" => Some(Axis::Y),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl SweepSpec {
    /// Linear grid, or geometric for the `y` axis.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        if n == 1 {
            return vec![self.start];
        }
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if i == n - 1 {
                    self.stop
                } else if self.axis == Axis::Y {
                    self.start * (self.stop / self.start).powf(t)
                } else {
                    self.start + t * (self.stop - self.start)
                }
            })
            .collect()
    }
}

/// A scenario built on an explicit model.
#[derive(Debug, Clone)]
pub struct ModelScenario {
    pub model: RiggedModel,
    pub j: Direction,
    pub j_tilde: Option<Direction>,
    pub lambda: f64,
    pub coupling: f64,
    pub flow: Option<(f64, f64)>,
    pub sweep: Option<SweepSpec>,
}

/// A seeded batch of generated embedded scenarios.
#[derive(Debug, Clone)]
pub struct RandomScenario {
    pub claim: Claim,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub enum ScenarioKind {
    Model(Box<ModelScenario>),
    Random(RandomScenario),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub config: RegularityConfig,
    pub seed: u64,
    /// The document with overrides and defaults applied.
    pub echo: Value,
}

const MODEL_KEYS: &[&str] = &[
    "model", "rigging", "J", "J_tilde", "lambda", "coupling", "grid", "anchors", "window", "tol",
    "seed", "flow", "sweep",
];
const RANDOM_KEYS: &[&str] = &["claim", "count", "grid", "anchors", "window", "tol", "seed"];

pub fn parse_str(text: &str, overrides: &Overrides) -> Result<Scenario, SchemaError> {
    let doc: Value = serde_json::from_str(text).or_else(|e| {
        fail(
            "",
            format!("invalid JSON at line {} column {}: {e}", e.line(), e.column()),
        )
    })?;
    parse(doc, overrides)
}

pub fn parse(mut doc: Value, overrides: &Overrides) -> Result<Scenario, SchemaError> {
    let Some(root) = doc.as_object_mut() else {
        return fail("", "scenario must be a JSON object");
    };
    apply_overrides(root, overrides);
    let random = root.contains_key("claim");
    check_keys(root, "", if random { RANDOM_KEYS } else { MODEL_KEYS })?;

    let grid = parse_grid(root)?;
    let tol = parse_tol(root)?;
    let anchors = match root.get("anchors") {
        Some(v) => {
            let a = number_list(v, "/anchors")?;
            if a.is_empty() {
                return fail("/anchors", "expected at least one anchor");
            }
            a
        }
        None => RegularityConfig::default().anchors,
    };
    let window = match root.get("window") {
        Some(v) => {
            let w = number_list(v, "/window")?;
            if w.len() != 2 || w[0] >= w[1] {
                return fail("/window", "expected [a, b] with a < b");
            }
            (w[0], w[1])
        }
        None => RegularityConfig::default().window,
    };
    let seed = match root.get("seed") {
        Some(v) => unsigned(v, "/seed")?,
        None => 0,
    };
    root.insert("grid".into(), serde_json::to_value(grid).expect("grid serializes"));
    root.insert("tol".into(), serde_json::to_value(tol).expect("tolerances serialize"));
    root.insert("anchors".into(), serde_json::to_value(&anchors).expect("numbers"));
    root.insert("window".into(), serde_json::to_value([window.0, window.1]).expect("numbers"));
    root.insert("seed".into(), Value::from(seed));

    let kind = if random {
        let claim = match root.get("claim").and_then(Value::as_str) {
            Some("identity_direction") => Claim::IdentityDirection,
            Some("abs_direction") => Claim::AbsDirection,
            Some("monotone_direction") => Claim::MonotoneDirection,
            _ => {
                return fail(
                    "/claim",
                    "expected \"identity_direction\", \"abs_direction\" or \"monotone_direction\"",
                )
            }
        };
        let count = unsigned(root.get("count").unwrap_or(&Value::Null), "/count")? as usize;
        if count == 0 {
            return fail("/count", "expected a positive count");
        }
        ScenarioKind::Random(RandomScenario { claim, count })
    } else {
        let ms = parse_model_scenario(root, &tol)?;
        root.insert("coupling".into(), Value::from(ms.coupling));
        ScenarioKind::Model(Box::new(ms))
    };

    Ok(Scenario {
        kind,
        config: RegularityConfig {
            grid,
            tol,
            anchors,
            window,
        },
        seed,
        echo: doc,
    })
}

fn apply_overrides(root: &mut Map<String, Value>, o: &Overrides) {
    if let Some(seed) = o.seed {
        root.insert("seed".into(), Value::from(seed));
    }
    if let Some(tol) = o.tol {
        let entry = root
            .entry("tol")
            .or_insert_with(|| Value::Object(Map::new()));
        if let Some(map) = entry.as_object_mut() {
            map.insert("limit".into(), Value::from(tol));
        }
    }
    if let Some(a) = &o.anchors {
        root.insert("anchors".into(), Value::from(a.clone()));
    }
    if let Some((a, b)) = o.window {
        root.insert("window".into(), Value::from(vec![a, b]));
    }
    if o.axis.is_some() || o.range.is_some() {
        let entry = root
            .entry("sweep")
            .or_insert_with(|| Value::Object(Map::new()));
        if let Some(map) = entry.as_object_mut() {
            if let Some(axis) = o.axis {
                map.insert("axis".into(), Value::from(axis.name()));
            }
            if let Some((a, b, n)) = o.range {
                map.insert("range".into(), Value::from(vec![Value::from(a), Value::from(b), Value::from(n)]));
            }
        }
    }
}

fn check_keys(map: &Map<String, Value>, path: &str, allowed: &[&str]) -> Result<(), SchemaError> {
    for key in map.keys() {
        if !allowed.contains(&key.as_str()) {
            return fail(&child(path, key), "unknown key");
        }
    }
    Ok(())
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, SchemaError> {
    v.as_object().map_or_else(|| fail(path, "expected an object"), Ok)
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, SchemaError> {
    v.as_array().map_or_else(|| fail(path, "expected an array"), Ok)
}

fn required<'a>(map: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Value, SchemaError> {
    map.get(key)
        .map_or_else(|| fail(&child(path, key), "missing required key"), Ok)
}

fn number(v: &Value, path: &str) -> Result<f64, SchemaError> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => fail(path, "expected a finite number"),
    }
}

fn unsigned(v: &Value, path: &str) -> Result<u64, SchemaError> {
    v.as_u64()
        .map_or_else(|| fail(path, "expected a non-negative integer"), Ok)
}

fn number_list(v: &Value, path: &str) -> Result<Vec<f64>, SchemaError> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| number(x, &child(path, i)))
        .collect()
}

fn complex(v: &Value, path: &str) -> Result<Complex64, SchemaError> {
    match v.as_array() {
        Some(pair) if pair.len() == 2 => Ok(Complex64::new(
            number(&pair[0], &child(path, 0))?,
            number(&pair[1], &child(path, 1))?,
        )),
        _ => fail(path, "expected a complex number [re, im]"),
    }
}

fn complex_row(v: &Value, path: &str) -> Result<Vec<Complex64>, SchemaError> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| complex(x, &child(path, i)))
        .collect()
}

fn matrix(v: &Value, path: &str) -> Result<CMat, SchemaError> {
    let rows = array(v, path)?;
    if rows.is_empty() {
        return fail(path, "expected a non-empty matrix");
    }
    let parsed = rows
        .iter()
        .enumerate()
        .map(|(i, r)| complex_row(r, &child(path, i)))
        .collect::<Result<Vec<_>, _>>()?;
    let cols = parsed[0].len();
    if cols == 0 {
        return fail(&child(path, 0), "expected a non-empty row");
    }
    if let Some(i) = parsed.iter().position(|r| r.len() != cols) {
        return fail(&child(path, i), format!("expected {cols} entries like row 0"));
    }
    Ok(CMat::from_fn(parsed.len(), cols, |i, j| parsed[i][j]))
}

fn hermitian(v: &Value, path: &str, tol: &Tolerances) -> Result<Hermitian, SchemaError> {
    let m = matrix(v, path)?;
    match Hermitian::new_with(m, tol) {
        Ok(h) => Ok(h),
        Err(MatError::NotSquare { .. }) => fail(path, "matrix is not square"),
        Err(MatError::NotHermitian { asymmetry }) => {
            fail(path, format!("matrix is not Hermitian (asymmetry {asymmetry:e})"))
        }
        Err(e) => fail(path, e.to_string()),
    }
}

fn parse_grid(root: &Map<String, Value>) -> Result<YGrid, SchemaError> {
    let mut grid = YGrid::default();
    if let Some(v) = root.get("grid") {
        let map = object(v, "/grid")?;
        check_keys(map, "/grid", &["y0", "q", "n"])?;
        if let Some(y0) = map.get("y0") {
            grid.y0 = number(y0, "/grid/y0")?;
        }
        if let Some(q) = map.get("q") {
            grid.q = number(q, "/grid/q")?;
        }
        if let Some(n) = map.get("n") {
            grid.n = unsigned(n, "/grid/n")? as usize;
        }
    }
    match grid.validate() {
        Ok(()) => Ok(grid),
        Err(e) => fail("/grid", e.to_string()),
    }
}

fn parse_tol(root: &Map<String, Value>) -> Result<Tolerances, SchemaError> {
    let defaults = serde_json::to_value(Tolerances::default()).expect("tolerances serialize");
    let mut merged = defaults.as_object().expect("struct serializes to an object").clone();
    if let Some(v) = root.get("tol") {
        let map = object(v, "/tol")?;
        for (key, value) in map {
            let path = child("/tol", key);
            if !merged.contains_key(key) {
                return fail(&path, "unknown tolerance");
            }
            if key == "eig_max_sweeps" {
                if unsigned(value, &path)? == 0 {
                    return fail(&path, "expected a positive integer");
                }
            } else if number(value, &path)? <= 0.0 {
                return fail(&path, "expected a positive number");
            }
            merged.insert(key.clone(), value.clone());
        }
    }
    serde_json::from_value(Value::Object(merged)).or_else(|e| fail("/tol", e.to_string()))
}

#[derive(Debug, Clone)]
enum ModelSpec {
    Finite(Hermitian),
    Lattice,
    Sum {
        left: Box<ModelSpec>,
        right: Box<ModelSpec>,
        left_channels: usize,
    },
}

fn parse_model(v: &Value, path: &str, tol: &Tolerances) -> Result<ModelSpec, SchemaError> {
    let map = object(v, path)?;
    let kind = required(map, path, "type")?;
    match kind.as_str() {
        Some("finite_hermitian") => {
            check_keys(map, path, &["type", "H"])?;
            let hp = child(path, "H");
            Ok(ModelSpec::Finite(hermitian(required(map, path, "H")?, &hp, tol)?))
        }
        Some("free_lattice_1d") => {
            check_keys(map, path, &["type"])?;
            Ok(ModelSpec::Lattice)
        }
        Some("direct_sum") => {
            check_keys(map, path, &["type", "left", "right", "left_channels"])?;
            let left = parse_model(required(map, path, "left")?, &child(path, "left"), tol)?;
            let right = parse_model(required(map, path, "right")?, &child(path, "right"), tol)?;
            let left_channels =
                unsigned(required(map, path, "left_channels")?, &child(path, "left_channels"))? as usize;
            Ok(ModelSpec::Sum {
                left: Box::new(left),
                right: Box::new(right),
                left_channels,
            })
        }
        _ => fail(
            &child(path, "type"),
            "expected \"finite_hermitian\", \"free_lattice_1d\" or \"direct_sum\"",
        ),
    }
}

#[derive(Debug, Clone)]
enum ChannelSpec {
    Sites(Vec<(i64, Complex64)>),
    Row(Vec<Complex64>),
}

fn parse_channel(v: &Value, path: &str) -> Result<ChannelSpec, SchemaError> {
    let map = object(v, path)?;
    check_keys(map, path, &["sites", "row"])?;
    match (map.get("sites"), map.get("row")) {
        (Some(sites), None) => {
            let sp = child(path, "sites");
            let list = array(sites, &sp)?;
            if list.is_empty() {
                return fail(&sp, "expected at least one site");
            }
            let mut out = Vec::with_capacity(list.len());
            for (i, entry) in list.iter().enumerate() {
                let ep = child(&sp, i);
                match entry.as_array() {
                    Some(pair) if pair.len() == 2 => {
                        let site = pair[0]
                            .as_i64()
                            .map_or_else(|| fail(&child(&ep, 0), "expected an integer site"), Ok)?;
                        out.push((site, complex(&pair[1], &child(&ep, 1))?));
                    }
                    _ => return fail(&ep, "expected [site, [re, im]]"),
                }
            }
            Ok(ChannelSpec::Sites(out))
        }
        (None, Some(row)) => {
            let rp = child(path, "row");
            let row = complex_row(row, &rp)?;
            if row.is_empty() {
                return fail(&rp, "expected a non-empty row");
            }
            Ok(ChannelSpec::Row(row))
        }
        _ => fail(path, "a channel has exactly one of \"sites\" or \"row\""),
    }
}

fn build(
    spec: &ModelSpec,
    channels: &[(ChannelSpec, String)],
    model_path: &str,
) -> Result<RiggedModel, SchemaError> {
    if channels.is_empty() {
        return fail(model_path, "model part has no rigging channels");
    }
    match spec {
        ModelSpec::Finite(h) => {
            let n = h.dim();
            let mut f = CMat::zeros(channels.len(), n);
            for (i, (ch, path)) in channels.iter().enumerate() {
                match ch {
                    ChannelSpec::Row(row) if row.len() == n => {
                        for (j, &a) in row.iter().enumerate() {
                            f[(i, j)] = a;
                        }
                    }
                    ChannelSpec::Row(row) => {
                        return fail(
                            &child(path, "row"),
                            format!("expected {n} entries to match the model, got {}", row.len()),
                        )
                    }
                    ChannelSpec::Sites(_) => {
                        return fail(path, "channels of a finite model need \"row\"")
                    }
                }
            }
            RiggedModel::new(OperatorModel::finite(h.clone()), Rigging::Matrix(f))
                .or_else(|e| fail(model_path, e.to_string()))
        }
        ModelSpec::Lattice => {
            let mut out = Vec::with_capacity(channels.len());
            for (ch, path) in channels {
                match ch {
                    ChannelSpec::Sites(sites) => out.push(LatticeChannel {
                        sites: sites.clone(),
                    }),
                    ChannelSpec::Row(_) => {
                        return fail(path, "channels of a lattice model need \"sites\"")
                    }
                }
            }
            RiggedModel::new(OperatorModel::FreeLattice1D, Rigging::Lattice(out))
                .or_else(|e| fail(model_path, e.to_string()))
        }
        ModelSpec::Sum {
            left,
            right,
            left_channels,
        } => {
            if *left_channels > channels.len() {
                return fail(
                    &child(model_path, "left_channels"),
                    format!("only {} channels available", channels.len()),
                );
            }
            let (l, r) = channels.split_at(*left_channels);
            let l = build(left, l, &child(model_path, "left"))?;
            let r = build(right, r, &child(model_path, "right"))?;
            Ok(l.direct_sum(&r))
        }
    }
}

fn parse_model_scenario(root: &Map<String, Value>, tol: &Tolerances) -> Result<ModelScenario, SchemaError> {
    let spec = parse_model(required(root, "", "model")?, "/model", tol)?;
    let rigging = object(required(root, "", "rigging")?, "/rigging")?;
    check_keys(rigging, "/rigging", &["channels"])?;
    let list = array(required(rigging, "/rigging", "channels")?, "/rigging/channels")?;
    let channels = list
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let p = child("/rigging/channels", i);
            parse_channel(v, &p).map(|c| (c, p))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let model = build(&spec, &channels, "/model")?;
    let k = model.channels();

    let j = hermitian(required(root, "", "J")?, "/J", tol)?;
    if j.dim() != k {
        return fail("/J", format!("expected a {k}x{k} matrix to match the rigging channels"));
    }
    let j_tilde = match root.get("J_tilde") {
        Some(v) => {
            let jt = hermitian(v, "/J_tilde", tol)?;
            if jt.dim() != k {
                return fail("/J_tilde", format!("expected a {k}x{k} matrix to match the rigging channels"));
            }
            Some(Direction::new(jt))
        }
        None => None,
    };
    let lambda = number(required(root, "", "lambda")?, "/lambda")?;
    let coupling = match root.get("coupling") {
        Some(v) => number(v, "/coupling")?,
        None => 0.0,
    };
    let flow = match root.get("flow") {
        Some(v) => {
            let map = object(v, "/flow")?;
            check_keys(map, "/flow", &["from", "to"])?;
            Some((
                number(required(map, "/flow", "from")?, "/flow/from")?,
                number(required(map, "/flow", "to")?, "/flow/to")?,
            ))
        }
        None => None,
    };
    let sweep = match root.get("sweep") {
        Some(v) => Some(parse_sweep(v)?),
        None => None,
    };
    Ok(ModelScenario {
        model,
        j: Direction::new(j),
        j_tilde,
        lambda,
        coupling,
        flow,
        sweep,
    })
}

fn parse_sweep(v: &Value) -> Result<SweepSpec, SchemaError> {
    let map = object(v, "/sweep")?;
    check_keys(map, "/sweep", &["axis", "range"])?;
    let axis = required(map, "/sweep", "axis")?
        .as_str()
        .and_then(Axis::parse)
        .map_or_else(|| fail("/sweep/axis", "expected \"lambda\", \"r\", \"t\" or \"y\""), Ok)?;
    let range = array(required(map, "/sweep", "range")?, "/sweep/range")?;
    if range.len() != 3 {
        return fail("/sweep/range", "expected [start, stop, points]");
    }
    let start = number(&range[0], "/sweep/range/0")?;
    let stop = number(&range[1], "/sweep/range/1")?;
    let points = unsigned(&range[2], "/sweep/range/2")? as usize;
    if points == 0 || points > 100_000 {
        return fail("/sweep/range/2", "expected between 1 and 100000 points");
    }
    if points > 1 && start >= stop {
        return fail("/sweep/range", "expected start < stop");
    }
    if axis == Axis::Y && start <= 0.0 {
        return fail("/sweep/range/0", "y values must be positive");
    }
    Ok(SweepSpec {
        axis,
        start,
        stop,
        points,
    })
}
