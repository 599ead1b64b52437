use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use riskocc::edge_service::{serve_lines, serve_tcp, EdgeService};
use riskocc::eval::{load_braking_scenario, run_study};
use riskocc::occupancy::{compute_map, samples_for_map, PgmScale, RiskGrid, SamplePoint};
use riskocc::planner::{collision_free, plan, PlannedPath, PlannerConfig};
use riskocc::render::{overlay_path, render_grid};
use riskocc::scenario::{load_frames, load_map_prior_with, Frame, Maneuver, MapPrior};
use riskocc::{AppConfig, Point2};
use tracing::{info, warn};

use crate::{Cli, CliError, Command, EvalArgs, Format, MapArgs, PlanArgs, ReplayArgs, Scale, SceneArgs, ServeArgs};

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = load_config(cli.config)?;
    match cli.command {
        Command::Map(a) => map(a, &config),
        Command::Plan(a) => plan_cmd(a, &config),
        Command::Replay(a) => replay(a, &config),
        Command::Serve(a) => serve(a, &config),
        Command::Eval(a) => eval(a, config),
    }
}

fn load_config(flag: Option<PathBuf>) -> Result<AppConfig, CliError> {
    let path = std::env::var_os("RISKOCC_CONFIG").map(PathBuf::from).or(flag);
    match path {
        Some(p) => {
            info!(path = %p.display(), "loading config");
            Ok(AppConfig::load(p)?)
        }
        None => Ok(AppConfig::default()),
    }
}

struct Scene {
    map: MapPrior,
    frames: Vec<Frame>,
    samples: Vec<SamplePoint>,
}

fn load_scene(args: &SceneArgs, cfg: &AppConfig) -> Result<Scene, CliError> {
    let map = load_map_prior_with(&args.map_prior, &cfg.risk.weights)?;
    let frames = load_frames(&args.frames)?;
    for f in &frames {
        for note in map.frame_diagnostics(f) {
            warn!(t = f.timestamp, "{note}");
        }
    }
    let samples = samples_for_map(&map)?;
    Ok(Scene { map, frames, samples })
}

fn pick_frame(scene: &Scene, index: usize) -> Result<&Frame, CliError> {
    scene.frames.get(index).ok_or_else(|| {
        CliError::Usage(format!(
            "--frame {index} out of range ({} frames)",
            scene.frames.len()
        ))
    })
}

fn grid_for(scene: &Scene, frame: &Frame, exclude: Option<&str>, cfg: &AppConfig) -> RiskGrid {
    let owned;
    let frame = match exclude {
        Some(id) => {
            owned = frame.without(id);
            &owned
        }
        None => frame,
    };
    compute_map(
        &scene.samples,
        scene.map.sampling.resolution(),
        frame,
        &scene.map.statics,
        &cfg.risk,
    )
}

fn pgm_scale(s: Scale) -> PgmScale {
    match s {
        Scale::Minmax => PgmScale::MinMax,
        Scale::Fixed => PgmScale::Fixed,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

/// Renders the grid outputs for one frame and returns the files written.
fn write_grid(
    out: &Path,
    index: usize,
    grid: &RiskGrid,
    formats: &[Format],
    scale: Scale,
    path: Option<&PlannedPath>,
) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for f in formats {
        let (name, bytes) = match f {
            Format::Csv => (format!("grid_{index:04}.csv"), grid.to_csv().into_bytes()),
            Format::Pgm => (format!("grid_{index:04}.pgm"), grid.to_pgm(pgm_scale(scale))?),
            Format::Ppm => {
                let mut img = render_grid(grid, pgm_scale(scale))?;
                if let Some(p) = path {
                    overlay_path(&mut img, grid, &p.raw)?;
                }
                (format!("grid_{index:04}.ppm"), img.to_ppm())
            }
        };
        let p = out.join(name);
        write_file(&p, &bytes)?;
        written.push(p);
    }
    Ok(written)
}

fn map(a: MapArgs, cfg: &AppConfig) -> Result<(), CliError> {
    let scene = load_scene(&a.scene, cfg)?;
    let frame = pick_frame(&scene, a.frame)?;
    let grid = grid_for(&scene, frame, a.exclude.as_deref(), cfg);
    ensure_dir(&a.scene.out)?;
    for p in write_grid(&a.scene.out, a.frame, &grid, &a.format, a.scale, None)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn plan_for(
    scene: &Scene,
    grid: &RiskGrid,
    icv: Point2,
    maneuver: Maneuver,
    pc: &PlannerConfig,
) -> Result<PlannedPath, CliError> {
    let set = scene
        .map
        .maneuver_sets
        .get(&maneuver)
        .ok_or_else(|| CliError::Invalid(format!("map prior has no `{maneuver}` node set")))?;
    let dest = scene
        .map
        .destination(maneuver)
        .ok_or_else(|| CliError::Invalid(format!("no destination for `{maneuver}`")))?;
    let free = collision_free(set, grid, pc.risk_threshold)?;
    Ok(plan(&free, icv, dest, maneuver, pc)?)
}

fn icv_position(frame: &Frame, id: &str) -> Result<Point2, CliError> {
    frame
        .dynamics
        .iter()
        .find(|d| d.id == id)
        .map(|d| d.position)
        .ok_or_else(|| CliError::Invalid(format!("object `{id}` not in frame t={}", frame.timestamp)))
}

fn path_document(index: usize, t: f64, maneuver: Maneuver, pc: &PlannerConfig, icv: Point2, path: &PlannedPath) -> String {
    let doc = serde_json::json!({
        "frame": index,
        "t": t,
        "maneuver": maneuver,
        "strategy": pc.strategy,
        "icv": [icv.x, icv.y],
        "path": path.to_json_value(),
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("path serializes");
    text.push('\n');
    text
}

fn plan_cmd(a: PlanArgs, cfg: &AppConfig) -> Result<(), CliError> {
    let scene = load_scene(&a.scene, cfg)?;
    let frame = pick_frame(&scene, a.frame)?;
    let icv = match (&a.icv, &a.icv_id) {
        (Some((x, y)), _) => Point2::new(*x, *y),
        (None, Some(id)) => icv_position(frame, id)?,
        (None, None) => return Err(CliError::Usage("one of --icv or --icv-id is required".into())),
    };
    let pc = PlannerConfig {
        strategy: a.strategy.unwrap_or(cfg.planner.strategy),
        ..cfg.planner
    };
    let grid = grid_for(&scene, frame, a.icv_id.as_deref(), cfg);
    let path = plan_for(&scene, &grid, icv, a.maneuver, &pc)?;

    ensure_dir(&a.scene.out)?;
    let json = a.scene.out.join(format!("path_{:04}.json", a.frame));
    write_file(&json, path_document(a.frame, frame.timestamp, a.maneuver, &pc, icv, &path).as_bytes())?;
    let mut img = render_grid(&grid, PgmScale::MinMax)?;
    overlay_path(&mut img, &grid, &path.raw)?;
    let ppm = a.scene.out.join(format!("overlay_{:04}.ppm", a.frame));
    write_file(&ppm, &img.to_ppm())?;
    println!(
        "{:?}: {} nodes, cost {:.6} -> {}",
        path.status,
        path.raw.len(),
        path.total_cost,
        json.display()
    );
    Ok(())
}

struct ReplayItem {
    index: usize,
    grid: RiskGrid,
    plan: Option<Result<(Point2, PlannedPath), CliError>>,
    millis: f64,
}

fn replay(a: ReplayArgs, cfg: &AppConfig) -> Result<(), CliError> {
    let scene = load_scene(&a.scene, cfg)?;
    let n = scene.frames.len();
    let (start, end) = a.range.unwrap_or((None, None));
    let (start, end) = (start.unwrap_or(0), end.unwrap_or(n));
    if start > end || end > n {
        return Err(CliError::Usage(format!("--range {start}:{end} outside 0:{n}")));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = a.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;

    let work = |index: usize| {
        let t0 = Instant::now();
        let frame = &scene.frames[index];
        let grid = grid_for(&scene, frame, a.icv_id.as_deref(), cfg);
        let plan = match (&a.icv_id, a.maneuver) {
            (Some(id), Some(m)) => Some(
                icv_position(frame, id).and_then(|icv| plan_for(&scene, &grid, icv, m, &cfg.planner).map(|p| (icv, p))),
            ),
            _ => None,
        };
        ReplayItem {
            index,
            grid,
            plan,
            millis: t0.elapsed().as_secs_f64() * 1e3,
        }
    };
    let items: Vec<ReplayItem> = pool.install(|| (start..end).into_par_iter().map(work).collect());

    ensure_dir(&a.scene.out)?;
    let mut times = Vec::with_capacity(items.len());
    for item in items {
        let frame = &scene.frames[item.index];
        let path = match item.plan {
            Some(Ok((icv, path))) => {
                let m = a.maneuver.expect("clap requires maneuver with icv-id");
                let doc = path_document(item.index, frame.timestamp, m, &cfg.planner, icv, &path);
                write_file(&a.scene.out.join(format!("path_{:04}.json", item.index)), doc.as_bytes())?;
                Some(path)
            }
            Some(Err(e)) => {
                // one unplannable frame should not stop the replay
                warn!(frame = item.index, "planning failed: {}", e.message());
                None
            }
            None => None,
        };
        write_grid(&a.scene.out, item.index, &item.grid, &a.format, a.scale, path.as_ref())?;
        times.push(item.millis);
    }
    report_timing(&times);
    Ok(())
}

fn report_timing(times: &[f64]) {
    if times.is_empty() {
        println!("frames: 0");
        return;
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let p95 = sorted[((sorted.len() as f64 * 0.95).ceil() as usize).clamp(1, sorted.len()) - 1];
    println!("frames: {}  mean {:.3} ms  p95 {:.3} ms", sorted.len(), mean, p95);
}

fn serve(a: ServeArgs, cfg: &AppConfig) -> Result<(), CliError> {
    let map = load_map_prior_with(&a.map_prior, &cfg.risk.weights)?;
    let service = EdgeService::new(map, *cfg).map_err(|e| CliError::Invalid(e.to_string()))?;
    if a.mode.pipe {
        let mut log = match &a.log {
            Some(p) => Some(BufWriter::new(
                fs::File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
            )),
            None => None,
        };
        let stdin = io::stdin();
        let stdout = io::stdout();
        let stats = serve_lines(
            &service,
            stdin.lock(),
            stdout.lock(),
            log.as_mut().map(|l| l as &mut dyn Write),
        )?;
        info!(lines_in = stats.lines_in, lines_out = stats.lines_out, errors = stats.errors, "session closed");
        return Ok(());
    }
    let addr = a.mode.listen.expect("clap enforces one serve mode");
    if a.log.is_some() {
        warn!("--log applies to pipe mode only");
    }
    serve_tcp(Arc::new(service), addr.as_str())?;
    Ok(())
}

fn eval(a: EvalArgs, mut cfg: AppConfig) -> Result<(), CliError> {
    if let Some(v0) = a.v0 {
        cfg.braking.v0 = v0;
    }
    if let Some(amax) = a.amax {
        cfg.braking.a_max = amax;
    }
    cfg.validate()?;
    let scenario = load_braking_scenario(&a.scenario, &cfg)?;
    let report = run_study(&scenario, &cfg)?;
    ensure_dir(&a.out)?;
    let csv = a.out.join("eval.csv");
    write_file(&csv, report.to_csv().as_bytes())?;
    print!("{}", report.summary());
    println!("report: {}", csv.display());
    Ok(())
}
