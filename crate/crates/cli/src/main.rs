use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use gatsbi_core::gtsp::{self, GtspError};
use gatsbi_core::metrics::{render_markdown, RunStatus};
use gatsbi_core::planner::{inspectability_oracle, run, PlannerConfig, PlannerError};
use gatsbi_core::viewgen::{CameraSet, Granularity, ViewConstraint};
use gatsbi_core::world::{load_scene, Pose};
use gatsbi_core::Vec3;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Planner(#[from] PlannerError),
    #[error("{0}")]
    Gtsp(GtspError),
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Parser)]
#[command(name = "gatsbi", about = "Inspection planning over voxel scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan and simulate a full inspection run.
    Run(RunArgs),
    /// Solve a GTSP instance dump.
    Gtsp(GtspArgs),
    /// Count inspectable voxels with the whole scene revealed.
    Oracle(OracleArgs),
}

/// View flags shared by `run` and `oracle`.
#[derive(Args, Default)]
struct ViewFlags {
    #[arg(long)]
    apex_deg: Option<f64>,
    /// Viewing distance range "min,max" in meters.
    #[arg(long)]
    dist: Option<String>,
    /// per-voxel or per-face
    #[arg(long)]
    granularity: Option<String>,
    /// Comma list of fwd, up, down.
    #[arg(long)]
    cameras: Option<String>,
}

impl ViewFlags {
    fn apply(&self, kv: &mut BTreeMap<String, String>) {
        set(kv, "view.apex_deg", &self.apex_deg);
        set(kv, "view.dist", &self.dist);
        set(kv, "view.granularity", &self.granularity);
        set(kv, "view.cameras", &self.cameras);
    }
}

#[derive(Args)]
struct RunArgs {
    /// Flat key=value configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Start pose "x,y,z,yaw_deg".
    #[arg(long)]
    start: Option<String>,
    #[command(flatten)]
    view: ViewFlags,
    #[arg(long)]
    dd: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    rpt: Option<usize>,
    #[arg(long)]
    cruise_mps: Option<f64>,
}

#[derive(Args)]
struct GtspArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct OracleArgs {
    /// Same format as `run --config`; keys the oracle does not use are
    /// ignored so one file serves both commands.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scene: Option<PathBuf>,
    #[command(flatten)]
    view: ViewFlags,
}

fn set<T: ToString>(kv: &mut BTreeMap<String, String>, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        kv.insert(key.to_string(), v.to_string());
    }
}

/// Parses `key = value` lines; `#` starts a comment. A `[section]` line
/// prefixes the keys that follow it.
fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut kv = BTreeMap::new();
    let mut section = String::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = format!("{}.", name.trim());
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return usage(format!("config line {}: expected key=value", n + 1));
        };
        kv.insert(format!("{section}{}", k.trim()), v.trim().to_string());
    }
    Ok(kv)
}

fn load_config(path: &Option<PathBuf>) -> Result<BTreeMap<String, String>, CliError> {
    match path {
        Some(p) => parse_config(&read(p)?),
        None => Ok(BTreeMap::new()),
    }
}

struct Settings {
    kv: BTreeMap<String, String>,
}

impl Settings {
    fn take(&mut self, key: &str) -> Option<String> {
        self.kv.remove(key)
    }

    fn num<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => match v.parse() {
                Ok(x) => Ok(Some(x)),
                Err(_) => usage(format!("{key}: cannot parse `{v}`")),
            },
        }
    }

    fn floats(&mut self, key: &str, n: usize) -> Result<Option<Vec<f64>>, CliError> {
        let Some(v) = self.take(key) else {
            return Ok(None);
        };
        let xs: Result<Vec<f64>, _> = v.split(',').map(|s| s.trim().parse()).collect();
        match xs {
            Ok(xs) if xs.len() == n => Ok(Some(xs)),
            _ => usage(format!("{key}: expected {n} comma-separated numbers, got `{v}`")),
        }
    }

    fn view(&mut self) -> Result<ViewConstraint, CliError> {
        let d = ViewConstraint::default();
        let apex = self
            .num::<f64>("view.apex_deg")?
            .map_or(d.apex_angle(), f64::to_radians);
        let (lo, hi) = match self.floats("view.dist", 2)? {
            Some(v) => (v[0], v[1]),
            None => (d.min_dist(), d.max_dist()),
        };
        let granularity = match self.take("view.granularity") {
            Some(g) => Granularity::parse(&g).ok_or_else(|| CliError::Usage(format!("unknown granularity `{g}`")))?,
            None => d.granularity(),
        };
        let cameras = match self.take("view.cameras") {
            Some(c) => CameraSet::parse(&c).ok_or_else(|| CliError::Usage(format!("unknown camera list `{c}`")))?,
            None => d.cameras(),
        };
        ViewConstraint::new(apex, lo, hi, cameras, granularity).map_err(|e| CliError::Usage(e.to_string()))
    }

    fn planner(&mut self, resolution: f64) -> Result<PlannerConfig, CliError> {
        let mut c = PlannerConfig::new(resolution);
        c.view = self.view()?;
        macro_rules! field {
            ($key:literal, $($f:ident).+) => {
                if let Some(v) = self.num($key)? {
                    c.$($f).+ = v;
                }
            };
        }
        field!("planner.dd_factor", dd_factor);
        field!("planner.max_lazy_replans", max_lazy_replans);
        field!("planner.seed", seed);
        field!("planner.cruise_mps", cruise_mps);
        field!("planner.stall_limit", stall_limit);
        field!("planner.max_iterations", max_iterations);
        field!("solver.max_iterations", solver.max_iterations);
        field!("solver.stall_iterations", solver.stall_iterations);
        field!("rrt.step", rrt.step);
        field!("rrt.rewire_radius", rrt.rewire_radius);
        field!("rrt.max_iterations", rrt.max_iterations);
        field!("rrt.goal_bias", rrt.goal_bias);
        field!("sensor.max_range", sensor.max_range);
        field!("sensor.rays_h", sensor.rays_h);
        field!("sensor.rays_v", sensor.rays_v);
        if let Some(v) = self.num::<f64>("sensor.hfov_deg")? {
            c.sensor.horizontal_fov = v.to_radians();
        }
        if let Some(v) = self.num::<f64>("sensor.vfov_deg")? {
            c.sensor.vertical_fov = v.to_radians();
        }
        if let Some(v) = self.num("planner.rpt")? {
            c.rpt = Some(v);
        }
        c.validate()?;
        Ok(c)
    }

    fn finish(self) -> Result<(), CliError> {
        match self.kv.keys().next() {
            Some(k) => usage(format!("unknown configuration key `{k}`")),
            None => Ok(()),
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, CliError> {
    let mut kv = load_config(&args.config)?;
    set(&mut kv, "scene", &args.scene.as_ref().map(|p| p.display()));
    set(&mut kv, "start", &args.start);
    set(&mut kv, "out", &args.out.as_ref().map(|p| p.display()));
    set(&mut kv, "planner.dd_factor", &args.dd);
    set(&mut kv, "planner.seed", &args.seed);
    set(&mut kv, "planner.rpt", &args.rpt);
    set(&mut kv, "planner.cruise_mps", &args.cruise_mps);
    args.view.apply(&mut kv);
    let mut s = Settings { kv };

    let scene_path = PathBuf::from(
        s.take("scene")
            .ok_or_else(|| CliError::Usage("--scene is required".into()))?,
    );
    let start = s
        .floats("start", 4)?
        .ok_or_else(|| CliError::Usage("--start \"x,y,z,yaw_deg\" is required".into()))?;
    let out = PathBuf::from(s.take("out").unwrap_or_else(|| "out".into()));
    let scene =
        load_scene(&read(&scene_path)?).map_err(|e| CliError::Usage(format!("{}: {e}", scene_path.display())))?;
    let config = s.planner(scene.spec().resolution)?;
    s.finish()?;

    let name = scene_path
        .file_stem()
        .map_or_else(|| "scene".to_string(), |n| n.to_string_lossy().into_owned());
    let pose = Pose::new(Vec3::new(start[0], start[1], start[2]), start[3].to_radians());
    let result = run(&scene, &name, pose, &config)?;

    fs::create_dir_all(&out).map_err(|source| CliError::Io {
        path: out.clone(),
        source,
    })?;
    let report = &result.report;
    write(&out.join("report.json"), &(report.to_json() + "\n"))?;
    let mut trace = String::new();
    for rec in &result.state.trace {
        trace.push_str(&serde_json::to_string(rec).expect("trace serializes"));
        trace.push('\n');
    }
    write(&out.join("trace.jsonl"), &trace)?;
    let mut path = String::from("x,y,z\n");
    for p in &result.state.flown {
        path.push_str(&format!("{},{},{}\n", p.x, p.y, p.z));
    }
    write(&out.join("path.csv"), &path)?;
    write(&out.join("table.md"), &render_markdown(std::slice::from_ref(report)))?;

    println!(
        "{}: {:?}, inspected {}/{} ({} object voxels), {:.2} m, {} iterations",
        report.scene,
        report.status,
        report.inspected,
        report.inspectable_voxels,
        report.object_voxels,
        report.distance_m,
        report.iterations
    );
    Ok(match report.status {
        RunStatus::Finished => ExitCode::SUCCESS,
        RunStatus::Stuck => ExitCode::from(2),
    })
}

fn cmd_gtsp(args: GtspArgs) -> Result<ExitCode, CliError> {
    let inst = gtsp::parse_dump(&read(&args.instance)?).map_err(CliError::Gtsp)?;
    let tour = if args.exact {
        match gtsp::solve_exact(&inst) {
            Err(e @ GtspError::TooLarge { .. }) => {
                eprintln!("error: {e}");
                return Ok(ExitCode::from(3));
            }
            r => r.map_err(CliError::Gtsp)?,
        }
    } else {
        gtsp::solve(&inst, gtsp::SolveBudget::default(), args.seed).map_err(CliError::Gtsp)?
    };
    let order: Vec<String> = tour.order.iter().map(|v| (v + 1).to_string()).collect();
    println!("order {}", order.join(" "));
    println!("cost {}", tour.cost);
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(args: OracleArgs) -> Result<ExitCode, CliError> {
    let mut kv = load_config(&args.config)?;
    set(&mut kv, "scene", &args.scene.as_ref().map(|p| p.display()));
    args.view.apply(&mut kv);
    let mut s = Settings { kv };
    let scene_path = PathBuf::from(
        s.take("scene")
            .ok_or_else(|| CliError::Usage("--scene is required".into()))?,
    );
    let scene =
        load_scene(&read(&scene_path)?).map_err(|e| CliError::Usage(format!("{}: {e}", scene_path.display())))?;
    let view = s.view()?;
    let counts = inspectability_oracle(&scene, &view);
    println!("inspectable {}", counts.inspectable);
    println!("uninspectable {}", counts.uninspectable);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    // clap's own exit code 2 would read as Stuck
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Gtsp(a) => cmd_gtsp(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    })
}
