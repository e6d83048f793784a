//! Named experiment runs: configuration, parameter sweeps and result records.
//!
//! A run is described by a [`RunConfig`], resolved against per-experiment
//! defaults, evaluated on every point of the cartesian product of its grid
//! parameters, and reported as one [`ExperimentResult`]. Rows are produced in
//! grid order whatever the thread count.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{
    chsh_optimize, entanglement, entropy_bits, fidelity, logical_entanglement, qfi_phase, BellAxis,
    BellSearch,
};
use crate::circuits::{
    access_parity, access_polarization, generate_entangled, generate_even_control, ifm_run,
    noon_coherent, parity_entangled, parity_entangled_plain, path_qubits,
    polarization_access_target, sv_access, sv_access_target, sv_antisqueeze_to_single_photon,
    sv_generate, sv_target, CircuitReport, IfmInput, IfmOutcome, Sign, SvAccessOptions,
};
use crate::elements::Imperfection;
use crate::error::{Error, Result};
use crate::fock::{ModeLabel, PureState, DEFAULT_EPSILON};
use crate::states::{self, even_norm, odd_norm, CatParams};
use crate::C64;

pub const SCHEMA_VERSION: u32 = 1;

/// Runs whose norm deficit reaches this are reported as not converged.
pub const CONVERGENCE_LIMIT: f64 = 1e-9;

/// Upper bound on the number of points in one sweep.
pub const MAX_GRID_POINTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Generate,
    Duality,
    Bell,
    Ifm,
    Fisher,
    SvGenerate,
    SvAccess,
    ImperfectionSweep,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Generate,
        Experiment::Duality,
        Experiment::Bell,
        Experiment::Ifm,
        Experiment::Fisher,
        Experiment::SvGenerate,
        Experiment::SvAccess,
        Experiment::ImperfectionSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Generate => "generate",
            Experiment::Duality => "duality",
            Experiment::Bell => "bell",
            Experiment::Ifm => "ifm",
            Experiment::Fisher => "fisher",
            Experiment::SvGenerate => "sv-generate",
            Experiment::SvAccess => "sv-access",
            Experiment::ImperfectionSweep => "imperfection-sweep",
        }
    }

    /// Parameter keys the experiment understands.
    pub fn parameter_keys(self) -> &'static [&'static str] {
        match self {
            Experiment::Generate => &["alpha", "alpha_grid", "sign", "even_control"],
            Experiment::Duality => &["alpha", "alpha_grid", "B", "flip_angle", "cphase_angle"],
            Experiment::Bell => &[
                "alpha",
                "alpha_grid",
                "sign",
                "grid_points",
                "refine_iters",
                "radius",
                "axis",
            ],
            Experiment::Ifm => &["state", "bomb", "theta", "reflectivity"],
            Experiment::Fisher => &["alpha", "alpha_grid"],
            Experiment::SvGenerate => &["r", "r_grid", "T", "T_grid"],
            Experiment::SvAccess => &["r", "r_grid", "skip_cswap"],
            Experiment::ImperfectionSweep => &[
                "alpha",
                "B_grid",
                "delta_B_grid",
                "flip_angle",
                "flip_angle_grid",
                "cphase_angle",
                "cphase_angle_grid",
            ],
        }
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Grid parameter: an explicit list, or a string `start:stop:step`
/// (inclusive) or `a,b,c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Spec(String),
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>> {
        let points = match self {
            Grid::Values(v) => v.clone(),
            Grid::Spec(s) => parse_grid(s)?,
        };
        if points.is_empty() {
            return Err(Error::Config("grid has no points".into()));
        }
        if points.len() > MAX_GRID_POINTS {
            return Err(Error::Config(format!(
                "grid has {} points, more than {MAX_GRID_POINTS}",
                points.len()
            )));
        }
        if let Some(bad) = points.iter().find(|x| !x.is_finite()) {
            return Err(Error::Config(format!("grid value {bad} is not finite")));
        }
        Ok(points)
    }
}

fn parse_number(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("`{}` is not a number", s.trim())))
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "range grid `{spec}` must read start:stop:step"
            )));
        }
        let (start, stop, step) = (
            parse_number(parts[0])?,
            parse_number(parts[1])?,
            parse_number(parts[2])?,
        );
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Config(format!(
                "grid step in `{spec}` must be positive"
            )));
        }
        if stop < start {
            return Ok(Vec::new());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if count > MAX_GRID_POINTS {
            return Err(Error::Config(format!("grid `{spec}` has too many points")));
        }
        // multiply rather than accumulate so that points land on round values
        return Ok((0..count).map(|k| start + k as f64 * step).collect());
    }
    spec.split(',').map(parse_number).collect()
}

/// Input kinds of the interaction-free measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IfmKind {
    Entangled,
    Nonmaximal,
    #[serde(alias = "single_photon")]
    SinglePhoton,
}

/// Raw parameters as given in a config file or on the command line. Which
/// keys apply depends on the experiment; see [`Experiment::parameter_keys`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    pub alpha: Option<f64>,
    pub alpha_grid: Option<Grid>,
    pub sign: Option<Sign>,
    pub even_control: Option<bool>,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    #[serde(rename = "B_grid")]
    pub b_grid: Option<Grid>,
    #[serde(rename = "delta_B_grid")]
    pub delta_b_grid: Option<Grid>,
    pub flip_angle: Option<f64>,
    pub flip_angle_grid: Option<Grid>,
    pub cphase_angle: Option<f64>,
    pub cphase_angle_grid: Option<Grid>,
    pub grid_points: Option<usize>,
    pub refine_iters: Option<usize>,
    pub radius: Option<f64>,
    pub axis: Option<BellAxis>,
    pub state: Option<IfmKind>,
    pub bomb: Option<bool>,
    pub theta: Option<f64>,
    pub reflectivity: Option<f64>,
    pub r: Option<f64>,
    pub r_grid: Option<Grid>,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    #[serde(rename = "T_grid")]
    pub t_grid: Option<Grid>,
    pub skip_cswap: Option<bool>,
}

impl Parameters {
    /// Keys that carry a value.
    pub fn given_keys(&self) -> Vec<String> {
        match serde_json::to_value(self) {
            Ok(Value::Object(map)) => map
                .into_iter()
                .filter(|(_, v)| !v.is_null())
                .map(|(k, _)| k)
                .collect(),
            _ => Vec::new(),
        }
    }
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub parameters: Parameters,
    /// Tail mass allowed beyond each mode cutoff.
    #[serde(default = "default_epsilon")]
    pub cutoff_epsilon: f64,
    /// Worker threads for sweeps; all available cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            parameters: Parameters::default(),
            cutoff_epsilon: DEFAULT_EPSILON,
            jobs: None,
            output_path: None,
        }
    }

    pub fn from_value(value: Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff_epsilon > 0.0 && self.cutoff_epsilon < 1.0) {
            return Err(Error::Config(format!(
                "cutoff_epsilon must lie in (0, 1), got {}",
                self.cutoff_epsilon
            )));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        let allowed = self.experiment.parameter_keys();
        for key in self.parameters.given_keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "parameter `{key}` does not apply to experiment `{}`",
                    self.experiment
                )));
            }
        }
        Ok(())
    }
}

/// Named numeric columns of equal length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    /// `data[c]` holds column `c`.
    pub data: Vec<Vec<f64>>,
}

impl Table {
    pub fn rows(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .position(|c| c == name)
            .map(|i| self.data[i].as_slice())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for row in 0..self.rows() {
            w.write_record(self.data.iter().map(|col| format_number(col[row])))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn format_number(x: f64) -> String {
    // shortest repr that round-trips, same as the JSON output
    serde_json::to_string(&x).unwrap_or_else(|_| "NaN".into())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    /// Largest per-mode cutoff used.
    pub cutoff: usize,
    /// Largest norm lost to truncation and pruning over all points.
    pub norm_deficit: f64,
    /// Largest tail mass of an input state beyond its cutoff.
    pub tail_mass: f64,
}

impl Convergence {
    fn merge(self, other: Convergence) -> Convergence {
        Convergence {
            cutoff: self.cutoff.max(other.cutoff),
            norm_deficit: self.norm_deficit.max(other.norm_deficit),
            tail_mass: self.tail_mass.max(other.tail_mass),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema_version: u32,
    pub experiment: Experiment,
    /// The config with every default filled in and grids expanded.
    pub config: Value,
    pub scalars: BTreeMap<String, f64>,
    pub tables: BTreeMap<String, Table>,
    pub convergence: Convergence,
    pub converged: bool,
    pub warnings: Vec<String>,
    /// Seconds since the Unix epoch; the only field that varies between reruns.
    pub timestamp: u64,
}

impl ExperimentResult {
    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.get(name).copied()
    }

    /// `Err(NotConverged)` when the norm deficit reached [`CONVERGENCE_LIMIT`].
    pub fn check_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NotConverged {
                norm_deficit: self.convergence.norm_deficit,
                limit: CONVERGENCE_LIMIT,
            })
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes the JSON record to `path` and each table next to it as
    /// `<stem>_<table>.csv`. Returns every file written.
    pub fn write(&self, path: &Path) -> Result<Vec<PathBuf>> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_json()? + "\n")?;
        let mut written = vec![path.to_path_buf()];
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "result".into());
        for (name, table) in &self.tables {
            let csv_path = path.with_file_name(format!("{stem}_{name}.csv"));
            table.write_csv(&csv_path)?;
            written.push(csv_path);
        }
        Ok(written)
    }
}

/// One evaluated grid point.
#[derive(Clone, Debug, Default)]
struct Point {
    scalars: Vec<(String, f64)>,
    convergence: Convergence,
    warnings: Vec<String>,
}

impl Point {
    fn put(&mut self, name: &str, value: f64) {
        self.scalars.push((name.to_string(), value));
    }

    fn get(&self, name: &str) -> Option<f64> {
        self.scalars.iter().find(|(n, _)| n == name).map(|s| s.1)
    }
}

/// A sweep axis: parameter name and its values.
type Axis = (&'static str, Vec<f64>);

fn cartesian(axes: &[Axis]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, (_, values)| {
        acc.iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

/// Evaluates `eval` on every grid point and assembles the record.
fn sweep(
    axes: &[Axis],
    eval: impl Fn(&[f64]) -> Result<Point> + Sync,
) -> Result<(Vec<Vec<f64>>, Vec<Point>)> {
    let grid = cartesian(axes);
    if grid.len() > MAX_GRID_POINTS {
        return Err(Error::Config(format!(
            "sweep has {} points, more than {MAX_GRID_POINTS}",
            grid.len()
        )));
    }
    let points = grid
        .par_iter()
        .map(|coords| eval(coords))
        .collect::<Result<Vec<_>>>()?;
    Ok((grid, points))
}

struct Outcome {
    resolved: Value,
    axes: Vec<Axis>,
    grid: Vec<Vec<f64>>,
    points: Vec<Point>,
    summary: Vec<(String, f64)>,
}

/// Runs `config` on a thread pool sized by `config.jobs`.
pub fn run(config: &RunConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = config.jobs {
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start {:?} workers: {e}", config.jobs)))?;
    let outcome = pool.install(|| dispatch(config))?;
    assemble(config, outcome)
}

fn assemble(config: &RunConfig, outcome: Outcome) -> Result<ExperimentResult> {
    let Outcome {
        resolved,
        axes,
        grid,
        points,
        summary,
    } = outcome;
    let convergence = points
        .iter()
        .fold(Convergence::default(), |c, p| c.merge(p.convergence));
    let mut warnings = Vec::new();
    for (coords, p) in grid.iter().zip(&points) {
        for w in &p.warnings {
            let at = if axes.is_empty() {
                String::new()
            } else {
                let labels: Vec<String> = axes
                    .iter()
                    .zip(coords)
                    .map(|((name, _), v)| format!("{name}={v}"))
                    .collect();
                format!("[{}] ", labels.join(", "))
            };
            warnings.push(format!("{at}{w}"));
        }
    }
    warnings.dedup();

    let mut scalars = BTreeMap::new();
    let mut tables = BTreeMap::new();
    if axes.is_empty() {
        for (name, value) in &points[0].scalars {
            scalars.insert(name.clone(), *value);
        }
    } else {
        let names: Vec<String> = points[0].scalars.iter().map(|s| s.0.clone()).collect();
        let mut columns: Vec<String> = axes.iter().map(|a| a.0.to_string()).collect();
        columns.extend(names.iter().cloned());
        let mut data: Vec<Vec<f64>> = (0..axes.len())
            .map(|k| grid.iter().map(|c| c[k]).collect())
            .collect();
        for name in &names {
            let col = points
                .iter()
                .map(|p| {
                    p.get(name).ok_or_else(|| {
                        Error::Contract(format!("sweep point is missing scalar `{name}`"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            data.push(col);
        }
        tables.insert("sweep".to_string(), Table { columns, data });
        scalars.insert("points".to_string(), points.len() as f64);
    }
    for (name, value) in summary {
        scalars.insert(name, value);
    }
    if let Some((name, _)) = scalars.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Contract(format!("scalar `{name}` is not finite")));
    }

    let mut echo = serde_json::Map::new();
    echo.insert(
        "experiment".into(),
        serde_json::to_value(config.experiment)?,
    );
    echo.insert("parameters".into(), resolved);
    echo.insert(
        "cutoff_epsilon".into(),
        serde_json::to_value(config.cutoff_epsilon)?,
    );
    if let Some(jobs) = config.jobs {
        echo.insert("jobs".into(), jobs.into());
    }
    if let Some(out) = &config.output_path {
        echo.insert("output_path".into(), out.clone().into());
    }

    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(ExperimentResult {
        schema_version: SCHEMA_VERSION,
        experiment: config.experiment,
        config: Value::Object(echo),
        scalars,
        tables,
        converged: convergence.norm_deficit < CONVERGENCE_LIMIT,
        convergence,
        warnings,
        timestamp,
    })
}

fn dispatch(config: &RunConfig) -> Result<Outcome> {
    let p = &config.parameters;
    let eps = config.cutoff_epsilon;
    match config.experiment {
        Experiment::Generate => run_generate(p, eps),
        Experiment::Duality => run_duality(p, eps),
        Experiment::Bell => run_bell(p, eps),
        Experiment::Ifm => run_ifm(p),
        Experiment::Fisher => run_fisher(p, eps),
        Experiment::SvGenerate => run_sv_generate(p, eps),
        Experiment::SvAccess => run_sv_access(p, eps),
        Experiment::ImperfectionSweep => run_imperfection_sweep(p, eps),
    }
}

/// A parameter that is either held fixed or swept over a grid.
#[derive(Clone, Debug)]
enum Slot {
    Fixed(f64),
    Swept(Vec<f64>),
}

impl Slot {
    /// The scalar, its grid, or the default; giving both is an error.
    fn resolve(name: &str, value: Option<f64>, grid: &Option<Grid>, default: f64) -> Result<Slot> {
        match (value, grid) {
            (Some(_), Some(_)) => Err(Error::Config(format!(
                "`{name}` and `{name}_grid` are mutually exclusive"
            ))),
            (_, Some(g)) => Ok(Slot::Swept(g.points()?)),
            (v, None) => {
                let v = v.unwrap_or(default);
                if !v.is_finite() {
                    return Err(Error::Config(format!("`{name}` must be finite")));
                }
                Ok(Slot::Fixed(v))
            }
        }
    }

    /// Registers a swept slot as a sweep axis and returns its coordinate index.
    fn attach(&self, name: &'static str, axes: &mut Vec<Axis>) -> Option<usize> {
        match self {
            Slot::Fixed(_) => None,
            Slot::Swept(values) => {
                axes.push((name, values.clone()));
                Some(axes.len() - 1)
            }
        }
    }

    fn at(&self, index: Option<usize>, coords: &[f64]) -> f64 {
        match (self, index) {
            (_, Some(i)) => coords[i],
            (Slot::Fixed(v), None) => *v,
            (Slot::Swept(_), None) => unreachable!("swept slots always own an axis"),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Slot::Fixed(v) => serde_json::json!(v),
            Slot::Swept(values) => serde_json::json!(values),
        }
    }
}

fn cat_tail(params: CatParams, cutoff: usize) -> Result<f64> {
    Ok(states::cat_ket(params, cutoff)?.tail)
}

fn convergence_of(state: &PureState, tail_mass: f64) -> Convergence {
    Convergence {
        cutoff: state.register().max_cutoff(),
        norm_deficit: state.norm_deficit(),
        tail_mass,
    }
}

fn strictly_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] > w[0])
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

const DEFAULT_ALPHA: f64 = 1.2;

fn run_generate(p: &Parameters, eps: f64) -> Result<Outcome> {
    let alpha = Slot::resolve("alpha", p.alpha, &p.alpha_grid, DEFAULT_ALPHA)?;
    let sign = p.sign.unwrap_or(Sign::Minus);
    let even = p.even_control.unwrap_or(false);
    if even && p.sign.is_some() {
        return Err(Error::Config(
            "`sign` does not apply to the even-cat control".into(),
        ));
    }
    let resolved = serde_json::json!({
        "alpha": alpha.to_json(),
        "sign": sign,
        "even_control": even,
    });
    let mut axes = Vec::new();
    let ia = alpha.attach("alpha", &mut axes);
    let (grid, points) = sweep(&axes, |c| generate_point(alpha.at(ia, c), sign, even, eps))?;
    Ok(Outcome {
        resolved,
        axes,
        grid,
        points,
        summary: Vec::new(),
    })
}

fn generate_point(alpha: f64, sign: Sign, even: bool, eps: f64) -> Result<Point> {
    let gamma = 2f64.sqrt() * alpha;
    let (rep, input) = if even {
        (generate_even_control(alpha, eps)?, CatParams::even(gamma))
    } else {
        (generate_entangled(alpha, sign, eps)?, CatParams::odd(gamma))
    };
    let s = &rep.output_state;
    let (h, v) = (ModeLabel::h(1), ModeLabel::v(1));
    let ent = entanglement(s, &[h])?;
    let reg = s.register();

    // |α⟩|−α⟩ − |−α⟩|α⟩ (minus), |α⟩|α⟩ − |−α⟩|−α⟩ (plus), |α⟩|−α⟩ + |−α⟩|α⟩ (even)
    let (second, relative) = match (even, sign) {
        (true, _) => (-alpha, 1.0),
        (false, Sign::Minus) => (-alpha, -1.0),
        (false, Sign::Plus) => (alpha, -1.0),
    };
    let ket = |a: f64, m: ModeLabel| -> Result<states::ModeKet> {
        Ok(states::coherent_ket(C64::new(a, 0.0), reg.cutoff_of(m)?))
    };
    let t1 = states::embed_product(reg, &[(h, &ket(alpha, h)?), (v, &ket(second, v)?)])?;
    let t2 = states::embed_product(reg, &[(h, &ket(-alpha, h)?), (v, &ket(-second, v)?)])?;
    let coherent_form = t1.add(&t2.scaled(C64::new(relative, 0.0)))?;

    let mut pt = Point::default();
    pt.put("entropy_HV", ent.entropy_bits);
    pt.put("log_negativity_HV", ent.log_negativity);
    pt.put("fidelity_coherent_form", fidelity(s, &coherent_form)?);
    if even {
        let a = C64::new(alpha, 0.0);
        let (we, wo) = (even_norm(a).powi(-4), odd_norm(a).powi(-4));
        pt.put(
            "entropy_closed_form",
            entropy_bits(&[we / (we + wo), wo / (we + wo)]),
        );
    } else {
        pt.put(
            "fidelity_parity_form",
            fidelity(s, &parity_entangled(reg, h, v, alpha, sign)?)?,
        );
    }
    pt.put("mean_photon_number", s.mean_number(h)? + s.mean_number(v)?);
    pt.put("postselect_probability", rep.postselect_probability);
    pt.convergence = convergence_of(s, cat_tail(input, reg.cutoff_of(h)?)?);
    pt.warnings = rep.warnings;
    Ok(pt)
}

fn imperfection_from(
    b: Option<f64>,
    flip: Option<f64>,
    cphase: Option<f64>,
) -> Result<Imperfection> {
    for (name, v) in [("B", b), ("flip_angle", flip), ("cphase_angle", cphase)] {
        if let Some(x) = v {
            if !x.is_finite() {
                return Err(Error::Config(format!("`{name}` must be finite")));
            }
        }
    }
    Ok(Imperfection {
        displacement_actual: b.map(|x| C64::new(x, 0.0)),
        flip_angle: flip.unwrap_or(PI),
        cphase_angle: cphase.unwrap_or(PI),
    })
}

/// Polarization-access figures of merit for one conditioned output.
fn polarization_scalars(pt: &mut Point, rep: &CircuitReport, alpha: f64, eps: f64) -> Result<()> {
    pt.put("postselect_probability", rep.postselect_probability);
    pt.put("heralded", flag(rep.heralded()));
    if !rep.heralded() {
        // the herald never fires: no conditional state to speak of
        for name in [
            "entropy_paths_polarization",
            "fidelity_polarization",
            "logical_log_negativity",
            "logical_weight",
        ] {
            pt.put(name, 0.0);
        }
        pt.warnings.extend(rep.warnings.iter().cloned());
        return Ok(());
    }
    let s = &rep.output_state;
    let ent = entanglement(s, &[ModeLabel::h(1), ModeLabel::v(1)])?;
    let target = polarization_access_target(alpha, s.register().max_cutoff(), eps)?;
    let logical = logical_entanglement(s, path_qubits(C64::new(alpha * FRAC_1_SQRT_2, 0.0)))?;
    pt.put("entropy_paths_polarization", ent.entropy_bits);
    pt.put("fidelity_polarization", s.reduced_fidelity(&target)?);
    pt.put("logical_log_negativity", logical.log_negativity);
    pt.put("logical_weight", logical.logical_weight);
    pt.put("envelope_overlap", logical.envelope_overlap);
    pt.warnings.extend(rep.warnings.iter().cloned());
    Ok(())
}

fn run_duality(p: &Parameters, eps: f64) -> Result<Outcome> {
    let alpha = Slot::resolve("alpha", p.alpha, &p.alpha_grid, DEFAULT_ALPHA)?;
    let imp = imperfection_from(p.b, p.flip_angle, p.cphase_angle)?;
    let resolved = serde_json::json!({
        "alpha": alpha.to_json(),
        "B": p.b,
        "flip_angle": imp.flip_angle,
        "cphase_angle": imp.cphase_angle,
    });
    let mut axes = Vec::new();
    let ia = alpha.attach("alpha", &mut axes);
    let (grid, points) = sweep(&axes, |c| duality_point(alpha.at(ia, c), imp, eps))?;
    Ok(Outcome {
        resolved,
        axes,
        grid,
        points,
        summary: Vec::new(),
    })
}

fn duality_point(alpha: f64, imp: Imperfection, eps: f64) -> Result<Point> {
    let gen = generate_entangled(alpha, Sign::Minus, eps)?;
    let acc = access_parity(&gen.output_state)?;
    let pol = access_polarization(&gen.output_state, alpha, imp)?;
    let mut pt = Point::default();
    pt.put(
        "entropy_HV",
        entanglement(&gen.output_state, &[ModeLabel::h(1)])?.entropy_bits,
    );
    pt.put(
        "entropy_paths",
        entanglement(&acc.output_state, &[ModeLabel::h(1)])?.entropy_bits,
    );
    polarization_scalars(&mut pt, &pol, alpha, eps)?;
    let reg = gen.output_state.register();
    let tail = cat_tail(CatParams::odd(2f64.sqrt() * alpha), reg.max_cutoff())?;
    pt.convergence = convergence_of(&gen.output_state, tail)
        .merge(convergence_of(&acc.output_state, tail))
        .merge(convergence_of(&pol.output_state, tail));
    Ok(pt)
}

fn run_bell(p: &Parameters, eps: f64) -> Result<Outcome> {
    let alpha = Slot::resolve("alpha", p.alpha, &p.alpha_grid, DEFAULT_ALPHA)?;
    let sign = p.sign.unwrap_or(Sign::Minus);
    let defaults = BellSearch::default();
    let search = BellSearch {
        grid_points: p.grid_points.unwrap_or(defaults.grid_points),
        refine_iters: p.refine_iters.unwrap_or(defaults.refine_iters),
        radius: p.radius.unwrap_or(defaults.radius),
        axis: p.axis.unwrap_or(defaults.axis),
    };
    let resolved = serde_json::json!({
        "alpha": alpha.to_json(),
        "sign": sign,
        "grid_points": search.grid_points,
        "refine_iters": search.refine_iters,
        "radius": search.radius,
        "axis": search.axis,
    });
    let mut axes = Vec::new();
    let ia = alpha.attach("alpha", &mut axes);
    let (grid, points) = sweep(&axes, |c| bell_point(alpha.at(ia, c), sign, &search, eps))?;
    let mut summary = Vec::new();
    if !axes.is_empty() {
        let values: Vec<f64> = points.iter().filter_map(|p| p.get("chsh")).collect();
        summary.push((
            "chsh_strictly_increasing".into(),
            flag(strictly_increasing(&values)),
        ));
        summary.push((
            "chsh_max".into(),
            values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ));
    }
    Ok(Outcome {
        resolved,
        axes,
        grid,
        points,
        summary,
    })
}

fn bell_point(alpha: f64, sign: Sign, search: &BellSearch, eps: f64) -> Result<Point> {
    let s = parity_entangled_plain(alpha, sign, search.radius, eps)?;
    let o = chsh_optimize(&s, search)?;
    let mut pt = Point::default();
    pt.put("chsh", o.value);
    pt.put("chsh_signed", o.signed_value);
    pt.put("chsh_grid", o.grid_value);
    pt.put("tsirelson_gap", 2.0 * 2f64.sqrt() - o.value);
    let st = o.settings;
    for (name, b) in [
        ("beta1", st.beta1),
        ("beta1p", st.beta1p),
        ("beta2", st.beta2),
        ("beta2p", st.beta2p),
    ] {
        pt.put(&format!("{name}_re"), b.re);
        pt.put(&format!("{name}_im"), b.im);
    }
    pt.put("evaluations", o.evaluations as f64);
    let cutoff = s.register().max_cutoff();
    let tail =
        cat_tail(CatParams::even(alpha), cutoff)?.max(cat_tail(CatParams::odd(alpha), cutoff)?);
    pt.convergence = convergence_of(&s, tail);
    Ok(pt)
}

fn run_ifm(p: &Parameters) -> Result<Outcome> {
    let kind = p.state.unwrap_or(IfmKind::Entangled);
    let bomb = p.bomb.unwrap_or(false);
    let input = match kind {
        IfmKind::Entangled => {
            if p.theta.is_some() || p.reflectivity.is_some() {
                return Err(Error::Config(
                    "`theta` and `reflectivity` do not apply to the entangled input".into(),
                ));
            }
            IfmInput::Entangled
        }
        IfmKind::Nonmaximal => {
            if p.reflectivity.is_some() {
                return Err(Error::Config(
                    "`reflectivity` applies to the single-photon input only".into(),
                ));
            }
            IfmInput::Nonmaximal {
                theta: p.theta.unwrap_or(PI / 6.0),
            }
        }
        IfmKind::SinglePhoton => {
            if p.theta.is_some() {
                return Err(Error::Config(
                    "`theta` applies to the nonmaximal input only".into(),
                ));
            }
            IfmInput::SinglePhoton {
                reflectivity: p.reflectivity.unwrap_or(1e-10),
            }
        }
    };
    let resolved = serde_json::json!({ "state": kind, "bomb": bomb, "input": input });
    let out = ifm_run(input, bomb, None)?;
    let pt = ifm_point(&out);
    Ok(Outcome {
        resolved,
        axes: Vec::new(),
        grid: vec![Vec::new()],
        points: vec![pt],
        summary: Vec::new(),
    })
}

fn ifm_point(out: &IfmOutcome) -> Point {
    let mut pt = Point::default();
    for (label, prob) in &out.events {
        pt.put(&format!("event_{label}"), *prob);
    }
    pt.put("p_explode", out.p_explode);
    pt.put("p_same_pol", out.p_same_pol);
    pt.put("p_diff_pol", out.p_diff_pol);
    pt.put("p_other", out.p_other);
    pt.put("p_signal", out.p_signal);
    pt.put("eta", out.eta);
    pt.put("eta_discriminative", out.eta_discriminative);
    // single photons and qubit pairs live in a finite space: nothing truncated
    pt.convergence = Convergence {
        cutoff: 1,
        norm_deficit: 0.0,
        tail_mass: 0.0,
    };
    pt
}

fn run_fisher(p: &Parameters, eps: f64) -> Result<Outcome> {
    let alpha = Slot::resolve("alpha", p.alpha, &p.alpha_grid, DEFAULT_ALPHA)?;
    let resolved = serde_json::json!({ "alpha": alpha.to_json() });
    let mut axes = Vec::new();
    let ia = alpha.attach("alpha", &mut axes);
    let (grid, points) = sweep(&axes, |c| fisher_point(alpha.at(ia, c), eps))?;
    let mut summary = Vec::new();
    if !axes.is_empty() {
        let ratios: Vec<f64> = points
            .iter()
            .filter_map(|p| p.get("qfi_over_nbar_sq"))
            .collect();
        let (lo, hi) = ratios
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            });
        summary.push(("qfi_over_nbar_sq_relative_spread".into(), (hi - lo) / hi));
    }
    Ok(Outcome {
        resolved,
        axes,
        grid,
        points,
        summary,
    })
}

fn fisher_point(alpha: f64, eps: f64) -> Result<Point> {
    if alpha <= 0.0 {
        return Err(Error::InvalidParameter(
            "phase estimation needs alpha > 0".into(),
        ));
    }
    let s = noon_coherent(alpha, eps)?;
    let (m1, m2) = (ModeLabel::plain(1), ModeLabel::plain(2));
    let qfi = qfi_phase(&s, m1)?;
    let nbar = s.mean_number(m1)? + s.mean_number(m2)?;
    let mut pt = Point::default();
    pt.put("qfi", qfi);
    pt.put("mean_photon_number", nbar);
    pt.put("shot_noise_limit", 4.0 * nbar);
    pt.put("qfi_over_shot_noise", qfi / (4.0 * nbar));
    pt.put("qfi_over_nbar_sq", qfi / (nbar * nbar));
    let tail = states::coherent_ket(C64::new(2.0 * alpha, 0.0), s.register().max_cutoff()).tail;
    pt.convergence = convergence_of(&s, tail);
    Ok(pt)
}

const DEFAULT_R: f64 = 0.7;

fn squeezing_tail(r: f64, cutoff: usize) -> Result<f64> {
    let p = states::SqueezeParams { r };
    Ok(states::squeezed_ket(p, cutoff)
        .tail
        .max(states::subtracted_sv_ket(p, cutoff)?.tail))
}

fn run_sv_generate(p: &Parameters, eps: f64) -> Result<Outcome> {
    let r = Slot::resolve("r", p.r, &p.r_grid, DEFAULT_R)?;
    let t = Slot::resolve("T", p.t, &p.t_grid, 0.5)?;
    let resolved = serde_json::json!({ "r": r.to_json(), "T": t.to_json() });
    let mut axes = Vec::new();
    let ir = r.attach("r", &mut axes);
    let it = t.attach("T", &mut axes);
    let (grid, points) = sweep(&axes, |c| sv_generate_point(r.at(ir, c), t.at(it, c), eps))?;
    let mut summary = Vec::new();
    if let (Some(it), None) = (it, ir) {
        let best = grid
            .iter()
            .zip(&points)
            .filter_map(|(c, p)| p.get("entropy_HV").map(|e| (c[it], e)))
            .fold(
                (f64::NAN, f64::NEG_INFINITY),
                |b, x| if x.1 > b.1 { x } else { b },
            );
        summary.push(("T_max_entropy".into(), best.0));
    }
    Ok(Outcome {
        resolved,
        axes,
        grid,
        points,
        summary,
    })
}

fn sv_generate_point(r: f64, t: f64, eps: f64) -> Result<Point> {
    let rep = sv_generate(r, t, eps)?;
    let s = &rep.output_state;
    let cutoff = s.register().max_cutoff();
    let target = sv_target(r, t, cutoff, eps)?;
    let mut pt = Point::default();
    pt.put(
        "entropy_HV",
        entanglement(s, &[ModeLabel::h(1)])?.entropy_bits,
    );
    pt.put("fidelity_target", fidelity(s, &target)?);
    pt.put("postselect_probability", rep.postselect_probability);
    pt.convergence = convergence_of(s, squeezing_tail(r, cutoff)?);
    Ok(pt)
}

fn run_sv_access(p: &Parameters, eps: f64) -> Result<Outcome> {
    let r = Slot::resolve("r", p.r, &p.r_grid, DEFAULT_R)?;
    let options = SvAccessOptions {
        skip_cswap: p.skip_cswap.unwrap_or(false),
    };
    let resolved = serde_json::json!({ "r": r.to_json(), "skip_cswap": options.skip_cswap });
    let mut axes = Vec::new();
    let ir = r.attach("r", &mut axes);
    let (grid, points) = sweep(&axes, |c| sv_access_point(r.at(ir, c), options, eps))?;
    Ok(Outcome {
        resolved,
        axes,
        grid,
        points,
        summary: Vec::new(),
    })
}

fn sv_access_point(r: f64, options: SvAccessOptions, eps: f64) -> Result<Point> {
    let gen = sv_generate(r, 0.5, eps)?;
    let cutoff = gen.output_state.register().max_cutoff();
    let rep = sv_access(&gen.output_state, options)?;
    let s = &rep.output_state;
    let target = sv_access_target(r, cutoff, eps)?;
    let anti = sv_antisqueeze_to_single_photon(r, eps)?;
    let a = &anti.output_state;
    let w = a.amplitude(&[1, 0]) + a.amplitude(&[0, 1]);

    let mut pt = Point::default();
    pt.put("fidelity_target", s.reduced_fidelity(&target)?);
    pt.put(
        "entropy_paths",
        entanglement(s, &[ModeLabel::h(1), ModeLabel::v(1)])?.entropy_bits,
    );
    pt.put("postselect_probability", rep.postselect_probability);
    pt.put("branch_product", rep.branch_product());
    pt.put(
        "fidelity_single_photon",
        w.norm_sqr() / (2.0 * a.norm_sqr()),
    );
    pt.put(
        "entropy_single_photon",
        entanglement(a, &[ModeLabel::plain(1)])?.entropy_bits,
    );
    let tail = squeezing_tail(r, cutoff)?;
    pt.convergence = convergence_of(&gen.output_state, tail)
        .merge(convergence_of(s, tail))
        .merge(convergence_of(
            a,
            squeezing_tail(r, a.register().max_cutoff())?,
        ));
    Ok(pt)
}

fn run_imperfection_sweep(p: &Parameters, eps: f64) -> Result<Outcome> {
    let alpha = p.alpha.unwrap_or(DEFAULT_ALPHA);
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config("`alpha` must be positive".into()));
    }
    let a = alpha * FRAC_1_SQRT_2;
    let given = |g: &Option<Grid>| g.as_ref().map(Grid::points).transpose();
    let b_abs = given(&p.b_grid)?;
    let b_delta = given(&p.delta_b_grid)?;
    let mut flips = given(&p.flip_angle_grid)?;
    let mut cphases = given(&p.cphase_angle_grid)?;
    if b_abs.is_some() && b_delta.is_some() {
        return Err(Error::Config(
            "`B_grid` and `delta_B_grid` are mutually exclusive".into(),
        ));
    }
    if p.flip_angle.is_some() && flips.is_some() {
        return Err(Error::Config(
            "`flip_angle` and `flip_angle_grid` are mutually exclusive".into(),
        ));
    }
    if p.cphase_angle.is_some() && cphases.is_some() {
        return Err(Error::Config(
            "`cphase_angle` and `cphase_angle_grid` are mutually exclusive".into(),
        ));
    }
    let mut b_values =
        b_abs.or_else(|| b_delta.as_ref().map(|d| d.iter().map(|x| a + x).collect()));
    if b_values.is_none() && flips.is_none() && cphases.is_none() {
        b_values = Some([0.0, 0.1, 0.3, 0.6].iter().map(|x| a + x).collect());
    }
    let flip = p.flip_angle.unwrap_or(PI);
    let cphase = p.cphase_angle.unwrap_or(PI);
    let resolved = serde_json::json!({
        "alpha": alpha,
        "B_grid": b_values,
        "flip_angle": flips.as_ref().map_or(serde_json::json!(flip), |g| serde_json::json!(g)),
        "cphase_angle": cphases.as_ref().map_or(serde_json::json!(cphase), |g| serde_json::json!(g)),
    });

    let mut axes: Vec<Axis> = Vec::new();
    let ib = b_values.map(|v| {
        axes.push(("B", v));
        axes.len() - 1
    });
    let ifl = flips.take().map(|v| {
        axes.push(("flip_angle", v));
        axes.len() - 1
    });
    let icp = cphases.take().map(|v| {
        axes.push(("cphase_angle", v));
        axes.len() - 1
    });

    let gen = generate_entangled(alpha, Sign::Minus, eps)?;
    let tail = cat_tail(
        CatParams::odd(2f64.sqrt() * alpha),
        gen.output_state.register().max_cutoff(),
    )?;
    let (grid, points) = sweep(&axes, |c| {
        let imp = Imperfection {
            displacement_actual: ib.map(|i| C64::new(c[i], 0.0)),
            flip_angle: ifl.map_or(flip, |i| c[i]),
            cphase_angle: icp.map_or(cphase, |i| c[i]),
        };
        let rep = access_polarization(&gen.output_state, alpha, imp)?;
        let mut pt = Point::default();
        if let Some(i) = ib {
            pt.put("delta_B", c[i] - a);
        }
        polarization_scalars(&mut pt, &rep, alpha, eps)?;
        pt.convergence =
            convergence_of(&gen.output_state, tail).merge(convergence_of(&rep.output_state, tail));
        Ok(pt)
    })?;

    let negativities: Vec<f64> = points
        .iter()
        .filter_map(|p| p.get("logical_log_negativity"))
        .collect();
    let mut summary = vec![(
        "logical_log_negativity_max".to_string(),
        negativities
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
    )];
    if let (Some(_), 1) = (ib, axes.len()) {
        // order by |B − A| and require the negativity never to rise
        let mut by_offset: Vec<(f64, f64)> = points
            .iter()
            .filter_map(|p| Some((p.get("delta_B")?.abs(), p.get("logical_log_negativity")?)))
            .collect();
        by_offset.sort_by(|x, y| x.0.total_cmp(&y.0));
        let non_increasing = by_offset.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
        summary.push((
            "negativity_non_increasing_in_offset".into(),
            flag(non_increasing),
        ));
    }
    Ok(Outcome {
        resolved,
        axes,
        grid,
        points,
        summary,
    })
}
