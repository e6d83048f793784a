//! `duality`: runs the named experiments of `duality-core` and writes their
//! JSON records (plus CSV side tables for sweeps).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use duality_core::runner::{run, Experiment, RunConfig};
use duality_core::Error;
use serde_json::{json, Map, Value};

#[derive(Parser, Debug)]
#[command(
    name = "duality",
    version,
    about = "Entanglement duality experiments on truncated Fock space"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run config; flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Tail mass tolerated beyond each mode cutoff.
    #[arg(long, global = true, value_name = "EPS")]
    cutoff_epsilon: Option<f64>,

    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Write the JSON record here (CSV tables go next to it); stdout otherwise.
    #[arg(long, global = true, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cat-state generation circuit and its H/V entanglement.
    Generate(GenerateArgs),
    /// Entanglement before and after the parity and polarization access circuits.
    Duality(DualityArgs),
    /// Optimized displaced-parity CHSH value.
    Bell(BellArgs),
    /// Interaction-free measurement probabilities and efficiency.
    Ifm(IfmArgs),
    /// Quantum Fisher information of the displaced parity-entangled state.
    Fisher(FisherArgs),
    /// Squeezed-vacuum generation with a coherent photon subtraction.
    SvGenerate(SvGenerateArgs),
    /// Squeezed-vacuum polarization access pipeline and anti-squeezing.
    SvAccess(SvAccessArgs),
    /// Polarization access under displacement and gate-angle errors.
    ImperfectionSweep(SweepArgs),
    /// Run whatever experiment the --config file names.
    Run,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    alpha: Option<f64>,
    /// Grid `start:stop:step` or `a,b,c`.
    #[arg(long, value_name = "GRID")]
    alpha_grid: Option<String>,
    #[arg(long, value_parser = ["minus", "plus"])]
    sign: Option<String>,
    /// Feed the circuit an even cat instead.
    #[arg(long)]
    even_control: bool,
}

#[derive(Args, Debug)]
struct DualityArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_name = "GRID")]
    alpha_grid: Option<String>,
    /// Actual displacement amplitude (ideal: alpha/√2).
    #[arg(long = "b", value_name = "B")]
    b: Option<f64>,
    #[arg(long)]
    flip_angle: Option<f64>,
    #[arg(long)]
    cphase_angle: Option<f64>,
}

#[derive(Args, Debug)]
struct BellArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_name = "GRID")]
    alpha_grid: Option<String>,
    #[arg(long, value_parser = ["minus", "plus"])]
    sign: Option<String>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    refine_iters: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, value_parser = ["real", "imaginary", "complex"])]
    axis: Option<String>,
}

#[derive(Args, Debug)]
struct IfmArgs {
    #[arg(long, value_parser = ["entangled", "nonmaximal", "single-photon"])]
    state: Option<String>,
    /// Place the absorber in the arm.
    #[arg(long, conflicts_with = "no_bomb")]
    bomb: bool,
    #[arg(long)]
    no_bomb: bool,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    reflectivity: Option<f64>,
}

#[derive(Args, Debug)]
struct FisherArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_name = "GRID")]
    alpha_grid: Option<String>,
}

#[derive(Args, Debug)]
struct SvGenerateArgs {
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, value_name = "GRID")]
    r_grid: Option<String>,
    /// Subtraction weight T of the first mode.
    #[arg(long = "t", value_name = "T")]
    t: Option<f64>,
    #[arg(long = "t-grid", value_name = "GRID")]
    t_grid: Option<String>,
}

#[derive(Args, Debug)]
struct SvAccessArgs {
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, value_name = "GRID")]
    r_grid: Option<String>,
    /// Leave out the controlled swap.
    #[arg(long)]
    skip_cswap: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    alpha: Option<f64>,
    /// Absolute displacement amplitudes.
    #[arg(long = "b-grid", value_name = "GRID", conflicts_with = "delta_b_grid")]
    b_grid: Option<String>,
    /// Displacement offsets from the ideal alpha/√2.
    #[arg(long = "delta-b-grid", value_name = "GRID")]
    delta_b_grid: Option<String>,
    #[arg(long)]
    flip_angle: Option<f64>,
    #[arg(long, value_name = "GRID")]
    flip_angle_grid: Option<String>,
    #[arg(long)]
    cphase_angle: Option<f64>,
    #[arg(long, value_name = "GRID")]
    cphase_angle_grid: Option<String>,
}

/// Collects flag values under their config keys.
#[derive(Default)]
struct Overrides(Vec<(&'static str, Value)>);

impl Overrides {
    fn num(&mut self, key: &'static str, v: Option<f64>) -> &mut Self {
        if let Some(x) = v {
            self.0.push((key, json!(x)));
        }
        self
    }

    fn int(&mut self, key: &'static str, v: Option<usize>) -> &mut Self {
        if let Some(x) = v {
            self.0.push((key, json!(x)));
        }
        self
    }

    fn text(&mut self, key: &'static str, v: &Option<String>) -> &mut Self {
        if let Some(x) = v {
            self.0.push((key, json!(x)));
        }
        self
    }

    fn switch(&mut self, key: &'static str, on: bool) -> &mut Self {
        if on {
            self.0.push((key, json!(true)));
        }
        self
    }
}

impl Command {
    fn experiment(&self) -> Option<Experiment> {
        Some(match self {
            Command::Generate(_) => Experiment::Generate,
            Command::Duality(_) => Experiment::Duality,
            Command::Bell(_) => Experiment::Bell,
            Command::Ifm(_) => Experiment::Ifm,
            Command::Fisher(_) => Experiment::Fisher,
            Command::SvGenerate(_) => Experiment::SvGenerate,
            Command::SvAccess(_) => Experiment::SvAccess,
            Command::ImperfectionSweep(_) => Experiment::ImperfectionSweep,
            Command::Run => return None,
        })
    }

    fn overrides(&self) -> Overrides {
        let mut o = Overrides::default();
        match self {
            Command::Generate(a) => {
                o.num("alpha", a.alpha)
                    .text("alpha_grid", &a.alpha_grid)
                    .text("sign", &a.sign)
                    .switch("even_control", a.even_control);
            }
            Command::Duality(a) => {
                o.num("alpha", a.alpha)
                    .text("alpha_grid", &a.alpha_grid)
                    .num("B", a.b)
                    .num("flip_angle", a.flip_angle)
                    .num("cphase_angle", a.cphase_angle);
            }
            Command::Bell(a) => {
                o.num("alpha", a.alpha)
                    .text("alpha_grid", &a.alpha_grid)
                    .text("sign", &a.sign)
                    .int("grid_points", a.grid_points)
                    .int("refine_iters", a.refine_iters)
                    .num("radius", a.radius)
                    .text("axis", &a.axis);
            }
            Command::Ifm(a) => {
                o.text("state", &a.state)
                    .num("theta", a.theta)
                    .num("reflectivity", a.reflectivity);
                if a.bomb || a.no_bomb {
                    o.0.push(("bomb", json!(a.bomb)));
                }
            }
            Command::Fisher(a) => {
                o.num("alpha", a.alpha).text("alpha_grid", &a.alpha_grid);
            }
            Command::SvGenerate(a) => {
                o.num("r", a.r)
                    .text("r_grid", &a.r_grid)
                    .num("T", a.t)
                    .text("T_grid", &a.t_grid);
            }
            Command::SvAccess(a) => {
                o.num("r", a.r)
                    .text("r_grid", &a.r_grid)
                    .switch("skip_cswap", a.skip_cswap);
            }
            Command::ImperfectionSweep(a) => {
                o.num("alpha", a.alpha)
                    .text("B_grid", &a.b_grid)
                    .text("delta_B_grid", &a.delta_b_grid)
                    .num("flip_angle", a.flip_angle)
                    .text("flip_angle_grid", &a.flip_angle_grid)
                    .num("cphase_angle", a.cphase_angle)
                    .text("cphase_angle_grid", &a.cphase_angle_grid);
            }
            Command::Run => {}
        }
        o
    }
}

/// Keys that a flag for `key` displaces from the config file.
fn displaced_by(key: &str) -> Vec<String> {
    match key {
        "B_grid" => vec!["delta_B_grid".into()],
        "delta_B_grid" => vec!["B_grid".into()],
        k => match k.strip_suffix("_grid") {
            Some(base) => vec![base.to_string()],
            None => vec![format!("{k}_grid")],
        },
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut root = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(map)) => map,
                Ok(_) => {
                    return Err(Error::Config(format!(
                        "{} must hold a JSON object",
                        path.display()
                    )))
                }
                Err(e) => return Err(Error::Config(format!("{}: {e}", path.display()))),
            }
        }
        None => Map::new(),
    };

    match (cli.command.experiment(), root.get("experiment")) {
        (Some(exp), Some(given)) if given != &json!(exp) => {
            return Err(Error::Config(format!(
                "config file names experiment {given} but the subcommand is `{exp}`"
            )));
        }
        (Some(exp), _) => {
            root.insert("experiment".into(), json!(exp));
        }
        (None, Some(_)) => {}
        (None, None) => {
            return Err(Error::Config(
                "`run` needs a --config file that names the experiment".into(),
            ));
        }
    }

    let params = root
        .entry("parameters")
        .or_insert_with(|| Value::Object(Map::new()));
    let Value::Object(params) = params else {
        return Err(Error::Config("`parameters` must be a JSON object".into()));
    };
    for (key, value) in cli.command.overrides().0 {
        for other in displaced_by(key) {
            params.remove(&other);
        }
        params.insert(key.to_string(), value);
    }
    if let Some(eps) = cli.cutoff_epsilon {
        root.insert("cutoff_epsilon".into(), json!(eps));
    }
    if let Some(jobs) = cli.jobs {
        root.insert("jobs".into(), json!(jobs));
    }
    if let Some(out) = &cli.output {
        root.insert("output_path".into(), json!(out.display().to_string()));
    }
    RunConfig::from_value(Value::Object(root))
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let config = build_config(cli)?;
    let result = run(&config)?;
    match &config.output_path {
        Some(path) => {
            for file in result.write(path.as_ref())? {
                eprintln!("wrote {}", file.display());
            }
        }
        None => println!("{}", result.to_json()?),
    }
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    result.check_converged()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = json!({ "error": { "code": e.code(), "message": e.to_string() } });
            eprintln!("{report}");
            ExitCode::from(e.exit_status() as u8)
        }
    }
}
