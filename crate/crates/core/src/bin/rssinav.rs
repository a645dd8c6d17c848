use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use rssinav::config::{schema_help, LocalizerKind, RunConfig};
use rssinav::dataset::build_dataset;
use rssinav::features::{select_features_with, SelectOptions};
use rssinav::model::{evaluate, load_model, save_model, TrainError};
use rssinav::navctl::{check_stop_and_wait, command_log_csv};
use rssinav::pipeline::{fit_pipeline, PipelineError};
use rssinav::planner::{astar, checkpoints_to_csv, extract_checkpoints, first_heading, Cell, GridMap, Heading};
use rssinav::rfsim::{
    corner_success_rate, generate_synthetic_dataset, reference_world, run_trial, simulate_scan, Localizer,
    REFERENCE_CORNER_CLEARANCE, REFERENCE_CORNER_GOAL, REFERENCE_CORNER_START,
};
use rssinav::scan::{aggregate_resamples, filter_by_ssid, parse_scan_bytes, render_scan_text};
use rssinav::{FingerprintDataset, ModelBundle, Point, ScanSnapshot, SimWorld};

/// Wi-Fi RSSI fingerprint localization and checkpoint navigation toolkit.
#[derive(Parser)]
#[command(name = "rssinav", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// Config file of `key = value` lines (see the key list below).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Set any config key; repeatable. Dedicated flags take precedence.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a directory of scan captures named `<x>_<y>_<rep>.txt` into a dataset CSV.
    Ingest {
        /// Directory containing the scan text files.
        scan_dir: PathBuf,
        /// Output dataset CSV.
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
        /// Comma-separated SSIDs to keep (config key `ssid_allowlist`).
        #[arg(long, value_name = "LIST")]
        ssid: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Report each access point's correlation with x and y and which columns survive.
    SelectFeatures {
        /// Dataset CSV (config key `dataset`).
        dataset: Option<PathBuf>,
        /// Output table `column,pcc_x,pcc_y,kept`.
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
        /// Minimum |PCC| (config key `threshold`).
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Select features, split, normalize and train the position regressor.
    Train {
        /// Dataset CSV (config key `dataset`).
        dataset: Option<PathBuf>,
        /// Output model file.
        #[arg(long, value_name = "FILE")]
        model_out: PathBuf,
        /// Output per-epoch loss CSV.
        #[arg(long, value_name = "CSV")]
        report: PathBuf,
        /// Also write the split as `train.csv` and `test.csv` into this directory.
        #[arg(long, value_name = "DIR")]
        split_dir: Option<PathBuf>,
        /// Seed (config key `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Training epochs (config key `epochs`).
        #[arg(long)]
        epochs: Option<u64>,
        /// Minimum |PCC| (config key `threshold`).
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Score a model on a dataset and write predicted-vs-actual coordinates.
    Evaluate {
        /// Model file (config key `model`).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Dataset CSV (config key `dataset`).
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Output scatter CSV `x_true,y_true,x_pred,y_pred`.
        #[arg(long, value_name = "CSV")]
        scatter: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Plan an A* route and write its checkpoints.
    Plan {
        /// Grid map file (config key `map`); defaults to the map of `--world` or the reference world.
        #[arg(long)]
        map: Option<PathBuf>,
        /// World file whose map is used when no `--map` is given (config key `world`).
        #[arg(long)]
        world: Option<PathBuf>,
        /// Start cell `x,y`.
        #[arg(long, value_parser = parse_cell)]
        start: Cell,
        /// Goal cell `x,y`.
        #[arg(long, value_parser = parse_cell)]
        goal: Cell,
        /// Initial robot heading (east, north, west, south); defaults to the first path step.
        #[arg(long)]
        heading: Option<String>,
        /// Planning clearance in cells (config key `clearance`).
        #[arg(long)]
        clearance: Option<u64>,
        /// Output checkpoint CSV `ix,iy,action`.
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run seeded closed-loop corner trials and report the success rate.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        /// Number of trials (config key `trials`).
        #[arg(long)]
        trials: Option<u64>,
        /// Output per-trial CSV.
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run one closed-loop navigation and write its command log.
    Navigate {
        #[command(flatten)]
        sim: SimArgs,
        /// Output command log CSV `timestamp,left_speed,right_speed,duration,reason`.
        #[arg(long, value_name = "CSV")]
        log: PathBuf,
        /// Output trajectory CSV `x,y,heading`.
        #[arg(long, value_name = "CSV")]
        trajectory: Option<PathBuf>,
        /// Output fix CSV `x_true,y_true,x_pred,y_pred`.
        #[arg(long, value_name = "CSV")]
        fixes: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic dataset (and optionally raw scan files) from a world.
    Generate {
        /// World file (config key `world`); defaults to the reference world.
        #[arg(long)]
        world: Option<PathBuf>,
        /// Output dataset CSV.
        #[arg(long, value_name = "CSV")]
        out: Option<PathBuf>,
        /// Also write `<x>_<y>_<rep>.txt` scan captures into this directory.
        #[arg(long, value_name = "DIR")]
        scan_dir: Option<PathBuf>,
        /// Scans per location (config key `resamples`).
        #[arg(long)]
        resamples: Option<u64>,
        /// Override every access point's shadowing sigma in dB (config key `noise_sigma`).
        #[arg(long)]
        noise_sigma: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Write the built-in reference world file.
    World {
        /// Output world file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SimArgs {
    /// World file (config key `world`); defaults to the reference world.
    #[arg(long)]
    world: Option<PathBuf>,
    /// Model file (config key `model`); required for the model localizer.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Start cell `x,y`; defaults to the reference corner route.
    #[arg(long, value_parser = parse_cell)]
    start: Option<Cell>,
    /// Goal cell `x,y`; defaults to the reference corner route.
    #[arg(long, value_parser = parse_cell)]
    goal: Option<Cell>,
    /// Seed (config key `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Use exact positions instead of the model (same as `localizer = oracle`).
    #[arg(long)]
    oracle: bool,
    /// Override every access point's shadowing sigma in dB (config key `noise_sigma`).
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Planning clearance in cells (config key `clearance`).
    #[arg(long)]
    clearance: Option<u64>,
}

fn parse_cell(s: &str) -> Result<Cell, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let x = x.trim().parse::<i32>().map_err(|e| e.to_string())?;
    let y = y.trim().parse::<i32>().map_err(|e| e.to_string())?;
    Ok(Cell::new(x, y))
}

/// Config file, then `--set` pairs, then the dedicated flags.
fn resolve(common: &Common, flags: &[(&str, Option<String>)]) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(),
    };
    let mut overrides = RunConfig::new();
    for pair in &common.set {
        overrides.set_pair(pair).with_context(|| format!("--set {pair}"))?;
    }
    for (key, value) in flags {
        if let Some(v) = value {
            overrides.set(key, v)?;
        }
    }
    cfg.merge(&overrides);
    Ok(cfg)
}

fn path_flag(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn required_path(cfg: &RunConfig, key: &str) -> Result<PathBuf> {
    cfg.path(key)
        .ok_or_else(|| anyhow!("missing `{key}`: pass it as a flag or set it in the config file"))
}

/// Writes through a temporary file in the destination directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write to {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| anyhow!("cannot write {}: {}", path.display(), e.error))?;
    Ok(())
}

fn dataset_bytes(ds: &FingerprintDataset) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    ds.write_csv(&mut buf)?;
    Ok(buf)
}

fn read_dataset(path: &Path) -> Result<FingerprintDataset> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open dataset {}", path.display()))?;
    rssinav::dataset::FingerprintDataset::read_csv(file).with_context(|| format!("invalid dataset {}", path.display()))
}

fn read_model(path: &Path) -> Result<ModelBundle> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open model {}", path.display()))?;
    load_model(std::io::BufReader::new(file)).with_context(|| format!("invalid model {}", path.display()))
}

fn read_world(path: Option<PathBuf>) -> Result<SimWorld> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(&p).with_context(|| format!("cannot open world {}", p.display()))?;
            rssinav::rfsim::SimWorld::parse(&text).with_context(|| format!("invalid world {}", p.display()))
        }
        None => Ok(reference_world()),
    }
}

/// `<x>_<y>_<rep>.txt` → (x, y, rep).
fn parse_scan_filename(path: &Path) -> Option<(f64, f64, u64)> {
    let name = path.file_name()?.to_str()?;
    let stem = name.strip_suffix(".txt")?;
    let mut parts = stem.split('_');
    let x = parts.next()?.parse().ok()?;
    let y = parts.next()?.parse().ok()?;
    let rep = parts.next()?.parse().ok()?;
    parts.next().is_none().then_some((x, y, rep))
}

fn format_coord(v: f64) -> String {
    format!("{v}")
}

fn cmd_ingest(scan_dir: &Path, out: &Path, cfg: &RunConfig) -> Result<()> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(scan_dir)
        .with_context(|| format!("cannot read scan directory {}", scan_dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no scan files found in {}", scan_dir.display());
    }
    let allow = cfg.list("ssid_allowlist");
    let mut groups: BTreeMap<(u64, u64), (Point, Vec<ScanSnapshot>)> = BTreeMap::new();
    let mut bad = Vec::new();
    for path in &files {
        let Some((x, y, _rep)) = parse_scan_filename(path) else {
            bad.push(format!("{}: file name is not <x>_<y>_<rep>.txt", path.display()));
            continue;
        };
        let parsed = std::fs::read(path)
            .map_err(|e| e.to_string())
            .and_then(|b| parse_scan_bytes(&b).map_err(|e| e.to_string()));
        let entries = match parsed {
            Ok(e) => e,
            Err(reason) => {
                bad.push(format!("{}: {reason}", path.display()));
                continue;
            }
        };
        let entries = match &allow {
            Some(a) => filter_by_ssid(&entries, a),
            None => entries,
        };
        let loc = Point::new(x, y);
        groups
            .entry(row_major_key(x, y))
            .or_insert_with(|| (loc, Vec::new()))
            .1
            .push(ScanSnapshot::new(entries, Some(loc)));
    }
    if !bad.is_empty() {
        for line in &bad {
            eprintln!("{line}");
        }
        bail!("{} malformed scan file(s)", bad.len());
    }
    let mut samples = Vec::with_capacity(groups.len());
    for (loc, snaps) in groups.into_values() {
        samples.push(aggregate_resamples(&snaps).with_context(|| format!("location ({}, {})", loc.x, loc.y))?);
    }
    let ds = build_dataset(&samples)?;
    write_atomic(out, &dataset_bytes(&ds)?)?;
    println!("rows {} columns {}", ds.len(), ds.ap_columns().len());
    Ok(())
}

/// Orders locations row-major (by y, then x) using a bit pattern that sorts like the float.
fn row_major_key(x: f64, y: f64) -> (u64, u64) {
    fn ordered(v: f64) -> u64 {
        let b = v.to_bits();
        if b >> 63 == 1 {
            !b
        } else {
            b | (1 << 63)
        }
    }
    (ordered(y), ordered(x))
}

fn cmd_select(cfg: &RunConfig, out: &Path) -> Result<()> {
    let ds = read_dataset(&required_path(cfg, "dataset")?)?;
    let pc = cfg.pipeline_config();
    let sel = select_features_with(
        &ds,
        pc.threshold,
        SelectOptions {
            min_coverage: pc.min_coverage,
        },
    )?;
    let mut text = String::from("column,pcc_x,pcc_y,kept\n");
    for c in ds.ap_columns() {
        text.push_str(&format!(
            "{c},{},{},{}\n",
            sel.pcc_x[c],
            sel.pcc_y[c],
            u8::from(sel.is_kept(c))
        ));
    }
    write_atomic(out, text.as_bytes())?;
    println!("kept {} of {} columns: {}", sel.kept_columns.len(), ds.ap_columns().len(), sel.kept_columns.join(" "));
    Ok(())
}

fn cmd_train(cfg: &RunConfig, model_out: &Path, report_out: &Path, split_dir: Option<&Path>) -> Result<()> {
    let ds = read_dataset(&required_path(cfg, "dataset")?)?;
    let outcome = match fit_pipeline(&ds, &cfg.pipeline_config()) {
        Ok(o) => o,
        Err(PipelineError::Train(TrainError::DivergenceDetected { epoch, report })) => {
            write_atomic(report_out, report.to_csv().as_bytes())?;
            bail!("training diverged at epoch {epoch}; partial report saved to {}", report_out.display());
        }
        Err(e) => return Err(e.into()),
    };
    let mut model_bytes = Vec::new();
    save_model(&outcome.bundle, &mut model_bytes)?;
    if let Some(dir) = split_dir {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("train.csv"), &dataset_bytes(&outcome.split.train)?)?;
        write_atomic(&dir.join("test.csv"), &dataset_bytes(&outcome.split.test)?)?;
    }
    write_atomic(report_out, outcome.report.to_csv().as_bytes())?;
    write_atomic(model_out, &model_bytes)?;
    let kept = &outcome.bundle.sidecar.selection.kept_columns;
    println!("features {} ({})", kept.len(), kept.join(" "));
    if let Some(fit) = outcome.report.fit {
        println!("train normalized_mae {:.6} mean_error_ft {:.4}", fit.normalized_mae, fit.mean_error_ft);
    }
    match outcome.report.test {
        Some(t) => println!(
            "test normalized_mae {:.6} mae_ft {:.4} mean_error_ft {:.4}",
            t.normalized_mae, t.mae_ft, t.mean_error_ft
        ),
        None => println!("test split is empty"),
    }
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig, scatter: &Path) -> Result<()> {
    let bundle = read_model(&required_path(cfg, "model")?)?;
    let ds = read_dataset(&required_path(cfg, "dataset")?)?;
    if ds.is_empty() {
        bail!("dataset has no rows");
    }
    let (x, y) = match bundle.prepare(&ds) {
        Ok(m) => m,
        Err(rssinav::model::PredictError::MissingColumns(cols)) => {
            bail!("dataset lacks model feature columns: {}", cols.join(", "))
        }
        Err(e) => return Err(e.into()),
    };
    let norm = &bundle.sidecar.normalization;
    let metrics = evaluate(&bundle.model, &x, &y, norm.extent)?;
    let mut text = String::from("x_true,y_true,x_pred,y_pred\n");
    for (i, row) in ds.rows().iter().enumerate() {
        let out = bundle.model.forward(x.row(i), rssinav::model::Mode::Infer)?;
        let p = norm.denormalize_point(Point::new(out[0], out[1]));
        text.push_str(&format!("{},{},{},{}\n", row.x, row.y, p.x, p.y));
    }
    write_atomic(scatter, text.as_bytes())?;
    println!(
        "rows {} normalized_mae {:.6} mae_ft {:.4} mean_error_ft {:.4}",
        metrics.rows, metrics.normalized_mae, metrics.mae_ft, metrics.mean_error_ft
    );
    Ok(())
}

fn cmd_plan(cfg: &RunConfig, start: Cell, goal: Cell, heading: Option<&str>, out: &Path) -> Result<()> {
    let map = match cfg.path("map") {
        Some(p) => {
            let text = std::fs::read_to_string(&p).with_context(|| format!("cannot open map {}", p.display()))?;
            GridMap::parse(&text).with_context(|| format!("invalid map {}", p.display()))?
        }
        None => read_world(cfg.path("world"))?.map,
    };
    let clearance = cfg.integer("clearance").unwrap_or(0);
    let planning = map.inflated(u32::try_from(clearance).unwrap_or(u32::MAX));
    let path = astar(&planning, start, goal)?;
    let initial = match heading {
        Some(h) => Heading::parse(h).ok_or_else(|| anyhow!("unknown heading `{h}`"))?,
        None => first_heading(&path).unwrap_or(Heading::East),
    };
    let checkpoints = extract_checkpoints(&path, initial)?;
    write_atomic(out, checkpoints_to_csv(&checkpoints).as_bytes())?;
    println!("path cost {} checkpoints {}", path.cost(), checkpoints.len());
    Ok(())
}

struct SimSetup {
    world: SimWorld,
    bundle: Option<ModelBundle>,
    start: Cell,
    goal: Cell,
    seed: u64,
    cfg: RunConfig,
}

fn sim_flags(sim: &SimArgs) -> Vec<(&'static str, Option<String>)> {
    vec![
        ("world", path_flag(&sim.world)),
        ("model", path_flag(&sim.model)),
        ("seed", sim.seed.map(|v| v.to_string())),
        ("noise_sigma", sim.noise_sigma.map(|v| v.to_string())),
        ("clearance", sim.clearance.map(|v| v.to_string())),
        ("localizer", sim.oracle.then(|| "oracle".to_string())),
    ]
}

fn sim_setup(sim: &SimArgs, mut cfg: RunConfig) -> Result<SimSetup> {
    let mut world = read_world(cfg.path("world"))?;
    if let Some(sigma) = cfg.float("noise_sigma") {
        if sigma < 0.0 {
            bail!("noise_sigma must be >= 0");
        }
        world = world.with_noise_sigma(sigma);
    }
    let (start, goal) = match (sim.start, sim.goal) {
        (Some(s), Some(g)) => (s, g),
        (None, None) => {
            if cfg.get("clearance").is_none() {
                cfg.set("clearance", &REFERENCE_CORNER_CLEARANCE.to_string())?;
            }
            (REFERENCE_CORNER_START, REFERENCE_CORNER_GOAL)
        }
        _ => bail!("--start and --goal must be given together"),
    };
    let bundle = match cfg.localizer() {
        LocalizerKind::Model => Some(read_model(&required_path(&cfg, "model")?)?),
        _ => None,
    };
    let seed = cfg.seed();
    Ok(SimSetup {
        world,
        bundle,
        start,
        goal,
        seed,
        cfg,
    })
}

fn localizer<'a>(setup: &'a SimSetup) -> Localizer<'a, f64> {
    match (setup.cfg.localizer(), &setup.bundle) {
        (LocalizerKind::Oracle, _) => Localizer::Oracle,
        (LocalizerKind::Gaussian, _) => Localizer::Gaussian {
            sigma_ft: setup.cfg.gaussian_sigma(),
        },
        (LocalizerKind::Model, Some(b)) => Localizer::Model(b),
        (LocalizerKind::Model, None) => unreachable!("model loaded in sim_setup"),
    }
}

fn cmd_simulate(setup: &SimSetup, out: &Path) -> Result<()> {
    let trial_cfg = setup.cfg.trial_config();
    let report = corner_success_rate(
        &setup.world,
        localizer(setup),
        setup.start,
        setup.goal,
        &trial_cfg,
        setup.cfg.trials(),
        setup.seed,
    )?;
    write_atomic(out, report.to_csv().as_bytes())?;
    let err = report
        .mean_fix_error()
        .map_or_else(|| "n/a".to_string(), |e| format!("{e:.4}"));
    println!("trials {} success_rate {:.4} mean_fix_error_ft {err}", report.trials.len(), report.rate);
    Ok(())
}

fn cmd_navigate(setup: &SimSetup, log: &Path, trajectory: Option<&Path>, fixes: Option<&Path>) -> Result<()> {
    let result = run_trial(
        &setup.world,
        localizer(setup),
        setup.start,
        setup.goal,
        &setup.cfg.trial_config(),
        setup.seed,
    )?;
    if let Err(i) = check_stop_and_wait(&result.events) {
        bail!("internal error: command event {i} was not preceded by a fix");
    }
    if let Some(p) = trajectory {
        write_atomic(p, result.trajectory_csv().as_bytes())?;
    }
    if let Some(p) = fixes {
        write_atomic(p, result.fixes_csv().as_bytes())?;
    }
    write_atomic(log, command_log_csv(&result.events).as_bytes())?;
    println!(
        "outcome {} success {} final_error_ft {:.4} fixes {}",
        result.outcome.label(),
        result.success,
        result.final_error,
        result.fixes.len()
    );
    Ok(())
}

fn cmd_generate(cfg: &RunConfig, out: Option<&Path>, scan_dir: Option<&Path>) -> Result<()> {
    if out.is_none() && scan_dir.is_none() {
        bail!("nothing to do: pass --out and/or --scan-dir");
    }
    let mut world = read_world(cfg.path("world"))?;
    if let Some(sigma) = cfg.float("noise_sigma") {
        world = world.with_noise_sigma(sigma);
    }
    let resamples = cfg.resamples();
    if resamples == 0 {
        bail!("resamples must be >= 1");
    }
    let cells = world.map.walkable_cells();
    if let Some(dir) = scan_dir {
        std::fs::create_dir_all(dir)?;
        for (i, &cell) in cells.iter().enumerate() {
            let center: Point = world.map.cell_center(cell);
            for r in 0..resamples {
                let draw = (i * resamples + r) as u64;
                let snap = simulate_scan(&world, center, world.rng_seed, draw)?;
                let name = format!("{}_{}_{}.txt", format_coord(center.x), format_coord(center.y), r + 1);
                write_atomic(&dir.join(name), render_scan_text("wlan0", &snap.entries).as_bytes())?;
            }
        }
        println!("wrote {} scan files to {}", cells.len() * resamples, dir.display());
    }
    if let Some(out) = out {
        let ds = generate_synthetic_dataset(&world, &cells, resamples)?;
        write_atomic(out, &dataset_bytes(&ds)?)?;
        println!("rows {} columns {}", ds.len(), ds.ap_columns().len());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest {
            scan_dir,
            out,
            ssid,
            common,
        } => {
            let cfg = resolve(&common, &[("ssid_allowlist", ssid)])?;
            cmd_ingest(&scan_dir, &out, &cfg)
        }
        Command::SelectFeatures {
            dataset,
            out,
            threshold,
            common,
        } => {
            let cfg = resolve(
                &common,
                &[("dataset", path_flag(&dataset)), ("threshold", threshold.map(|v| v.to_string()))],
            )?;
            cmd_select(&cfg, &out)
        }
        Command::Train {
            dataset,
            model_out,
            report,
            split_dir,
            seed,
            epochs,
            threshold,
            common,
        } => {
            let cfg = resolve(
                &common,
                &[
                    ("dataset", path_flag(&dataset)),
                    ("seed", seed.map(|v| v.to_string())),
                    ("epochs", epochs.map(|v| v.to_string())),
                    ("threshold", threshold.map(|v| v.to_string())),
                ],
            )?;
            cmd_train(&cfg, &model_out, &report, split_dir.as_deref())
        }
        Command::Evaluate {
            model,
            dataset,
            scatter,
            common,
        } => {
            let cfg = resolve(&common, &[("model", path_flag(&model)), ("dataset", path_flag(&dataset))])?;
            cmd_evaluate(&cfg, &scatter)
        }
        Command::Plan {
            map,
            world,
            start,
            goal,
            heading,
            clearance,
            out,
            common,
        } => {
            let cfg = resolve(
                &common,
                &[
                    ("map", path_flag(&map)),
                    ("world", path_flag(&world)),
                    ("clearance", clearance.map(|v| v.to_string())),
                ],
            )?;
            cmd_plan(&cfg, start, goal, heading.as_deref(), &out)
        }
        Command::Simulate {
            sim,
            trials,
            out,
            common,
        } => {
            let mut flags = sim_flags(&sim);
            flags.push(("trials", trials.map(|v| v.to_string())));
            let setup = sim_setup(&sim, resolve(&common, &flags)?)?;
            if setup.cfg.trials() == 0 {
                bail!("trials must be >= 1");
            }
            cmd_simulate(&setup, &out)
        }
        Command::Navigate {
            sim,
            log,
            trajectory,
            fixes,
            common,
        } => {
            let setup = sim_setup(&sim, resolve(&common, &sim_flags(&sim))?)?;
            cmd_navigate(&setup, &log, trajectory.as_deref(), fixes.as_deref())
        }
        Command::Generate {
            world,
            out,
            scan_dir,
            resamples,
            noise_sigma,
            common,
        } => {
            let cfg = resolve(
                &common,
                &[
                    ("world", path_flag(&world)),
                    ("resamples", resamples.map(|v| v.to_string())),
                    ("noise_sigma", noise_sigma.map(|v| v.to_string())),
                ],
            )?;
            cmd_generate(&cfg, out.as_deref(), scan_dir.as_deref())
        }
        Command::World { out } => write_atomic(&out, reference_world::<f64>().to_text().as_bytes()),
    }
}

fn main() -> ExitCode {
    let keys = schema_help();
    let mut command = Cli::command();
    let names: Vec<String> = command
        .get_subcommands()
        .filter(|s| s.get_name() != "world")
        .map(|s| s.get_name().to_string())
        .collect();
    for name in names {
        let keys = keys.clone();
        command = command.mut_subcommand(name, move |sub| sub.after_help(keys));
    }
    let matches = command.get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
