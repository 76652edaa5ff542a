use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use covplan_core::calibration::{
    align_samples, cw_offset, evaluate_metrics, fit_exponents, module_offset, path_loss_pairs, MeasurementSample,
    MetricPair, ModuleCalibration, ModuleSweepRow, PathLossPair, SampleKind,
};
use covplan_core::coverage::{
    coverage_report, simulate_grid, simulate_trajectory, Calibrations, CoverageReport, RunOptions, Simulator,
};
use covplan_core::io::{
    read_measurement_log, read_scene, read_sweep_log, write_grid_csv, write_grid_geojson, write_measurement_log,
    write_trajectory_csv, CalibrationRecord, FittedExponents, FORMAT_VERSION,
};
use covplan_core::{AntennaPattern, Error, Parallelism, PathLossParams, Point2, RadioConfig, Scene, Site};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use serde_json::json;

use crate::config::{CandidateConfig, Project};
use crate::error::{CliError, CliResult, ErrorCode};
use crate::output::OutputSet;
use crate::{Cli, Command, LogKind, SynthLogArgs, SynthSweepArgs};

pub fn configure_threads(threads: Option<usize>) -> CliResult<Parallelism> {
    match threads {
        Some(0) => Err(CliError::config("--threads must be at least 1")),
        Some(1) => Ok(Parallelism::Sequential),
        Some(n) => {
            // Fails only if a pool already exists, which cannot happen here.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(Parallelism::Rayon)
        }
        None => Ok(Parallelism::Rayon),
    }
}

pub fn dispatch(cli: &Cli, mode: Parallelism) -> CliResult<()> {
    // The sweep helper needs no project.
    if let Command::SynthSweep(args) = &cli.command {
        return synth_sweep(cli.global.seed, args);
    }
    let project = Project::load(&cli.global.config)?;
    let ctx = Context {
        out_dir: output_dir(&project, cli.global.out.as_deref()),
        cell_size: cli.global.cell_size,
        seed: cli.global.seed,
        mode,
        project,
    };
    match &cli.command {
        Command::Simulate => simulate(&ctx),
        Command::Calibrate { tx } => calibrate(&ctx, tx.as_deref()),
        Command::Evaluate { calibration, tx } => evaluate(&ctx, calibration.as_deref(), tx.as_deref()),
        Command::Plan { calibration } => plan(&ctx, calibration.as_deref()),
        Command::SynthLog(args) => synth_log(&ctx, args),
        Command::SynthSweep(_) => unreachable!("handled above"),
    }
}

struct Context {
    project: Project,
    out_dir: PathBuf,
    cell_size: Option<f64>,
    seed: u64,
    mode: Parallelism,
}

impl Context {
    fn opts(&self) -> RunOptions<'static> {
        RunOptions {
            parallelism: self.mode,
            progress: None,
        }
    }

    fn scene(&self) -> CliResult<Scene> {
        Ok(read_scene(&self.project.config.scene)?)
    }

    /// Calibration from `explicit`, else from the configured record if any.
    fn calibration(&self, explicit: Option<&Path>) -> CliResult<Option<(Calibrations, PathLossParams)>> {
        let Some(path) = explicit.or(self.project.config.calibration.record.as_deref()) else {
            return Ok(None);
        };
        if !path.is_file() {
            return Err(CliError::missing(path, "calibration record"));
        }
        let record = CalibrationRecord::read(path)?;
        let mut params = self.project.config.propagation.clone();
        if let Some(f) = record.fitted_exponents {
            params.exponent_los = f.los;
            params.exponent_olos = f.olos;
            params.exponent_nlos = f.nlos;
        }
        let cal = Calibrations {
            cw: record.cw,
            module: record.module.unwrap_or_else(ModuleCalibration::identity),
            per_class: record.per_class,
        };
        Ok(Some((cal, params)))
    }

    fn calibration_or_identity(&self, explicit: Option<&Path>) -> CliResult<(Calibrations, PathLossParams)> {
        Ok(self
            .calibration(explicit)?
            .unwrap_or_else(|| (Calibrations::identity(), self.project.config.propagation.clone())))
    }
}

fn output_dir(project: &Project, flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    project.config.output_dir.clone().unwrap_or_else(|| {
        project
            .path
            .parent()
            .unwrap_or(Path::new("."))
            .join("out")
    })
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

/// File-name-safe version of a user label.
fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

// simulate

fn simulate(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.project.config;
    if cfg.transmitters.is_empty() {
        return Err(CliError::config("configuration defines no transmitters").at(&ctx.project.path));
    }
    let grid_spec = ctx.project.grid_spec(ctx.cell_size)?;
    if grid_spec.is_none() && cfg.trajectories.is_empty() {
        return Err(CliError::config("nothing to simulate: define a region or a trajectory").at(&ctx.project.path));
    }
    let scene = ctx.scene()?;
    let (cal, params) = ctx.calibration_or_identity(None)?;
    let mut trajectories = Vec::with_capacity(cfg.trajectories.len());
    for t in &cfg.trajectories {
        trajectories.push((t.name.as_str(), t.points()?));
    }

    let mut out = OutputSet::new();
    let mut summary = Vec::new();
    for t in &cfg.transmitters {
        let site = t.site();
        let sim = Simulator::new(&scene, &site, &cfg.receiver, &params, &cal)?;
        let tag = slug(&t.name);
        let grid = grid_spec.map(|spec| simulate_grid(&sim, spec, ctx.opts()));
        if let Some(grid) = &grid {
            out.add_with(format!("grid_{tag}.csv"), |w| write_grid_csv(w, grid))?;
            out.add_with(format!("grid_{tag}.geojson"), |w| {
                write_grid_geojson(w, grid, cfg.geo_origin.as_ref())
            })?;
        }
        let mut traj_reports = Vec::new();
        for (name, points) in &trajectories {
            let records = simulate_trajectory(&sim, points, ctx.opts())?;
            out.add_with(format!("trajectory_{tag}_{}.csv", slug(name)), |w| {
                write_trajectory_csv(w, &records)
            })?;
            let boundary = covplan_core::coverage::coverage_boundary_distance(&records, &cfg.receiver, &cal.module)?;
            traj_reports.push(json!({ "name": name, "points": records.len(), "boundary_distance_m": boundary }));
        }
        let report = match &grid {
            Some(g) => Some(coverage_report(g, None, &cfg.receiver, &cal.module)?),
            None => None,
        };
        summary.push(json!({
            "transmitter": t.name,
            "grid": report.as_ref().map(|r| json!({
                "covered_fraction": r.covered_fraction,
                "undersupplied_cells": r.undersupplied_cells.len(),
                "threshold_dbm": r.threshold_dbm,
                "mean_margin_db": r.mean_margin_db,
            })),
            "trajectories": traj_reports,
        }));
    }
    out.add("summary.json", json_bytes(&json!({ "transmitters": summary })));
    out.commit(&ctx.out_dir)?;
    Ok(())
}

// calibrate

/// Samples of `kind`, optionally snapped to a trajectory's points. Returns the
/// kept samples with their original log indices, plus the indices skipped as
/// other kinds and as unmatched.
struct Selection {
    samples: Vec<MeasurementSample>,
    indices: Vec<usize>,
    other_kind: Vec<usize>,
    unmatched: Vec<usize>,
}

fn select_samples(project: &Project, log: &[MeasurementSample], kind: SampleKind) -> CliResult<Selection> {
    let (wanted, other_kind): (Vec<usize>, Vec<usize>) = (0..log.len()).partition(|&i| log[i].kind == kind);
    let mut sel = Selection {
        samples: Vec::new(),
        indices: Vec::new(),
        other_kind,
        unmatched: Vec::new(),
    };
    let subset: Vec<MeasurementSample> = wanted.iter().map(|&i| log[i].clone()).collect();
    let cal = &project.config.calibration;
    match cal.align_to_trajectory.as_deref().and_then(|n| project.trajectory(n)) {
        Some(t) => {
            let points = t.points()?;
            let alignment = align_samples(&points, &subset, cal.alignment_gate_m);
            for (si, pi) in alignment.matches {
                let mut s = subset[si].clone();
                s.position = points[pi];
                sel.samples.push(s);
                sel.indices.push(wanted[si]);
            }
            sel.unmatched = alignment.unmatched.iter().map(|&si| wanted[si]).collect();
        }
        None => {
            sel.samples = subset;
            sel.indices = wanted;
        }
    }
    Ok(sel)
}

/// Path-loss pairs for every sample that has a propagation path; samples
/// without one are returned separately by position in `samples`.
fn pairs_with_paths(
    scene: &Scene,
    tx: &Site,
    rx: &RadioConfig,
    params: &PathLossParams,
    samples: &[MeasurementSample],
    mode: Parallelism,
) -> CliResult<(Vec<PathLossPair>, Vec<usize>)> {
    match path_loss_pairs(scene, tx, rx, params, samples, mode) {
        Ok(pairs) => Ok((pairs, Vec::new())),
        Err(Error::NoPathFound) => {
            let mut pairs = Vec::new();
            let mut missing = Vec::new();
            for (i, s) in samples.iter().enumerate() {
                match path_loss_pairs(scene, tx, rx, params, std::slice::from_ref(s), Parallelism::Sequential) {
                    Ok(mut p) => pairs.append(&mut p),
                    Err(Error::NoPathFound) => missing.push(i),
                    Err(e) => return Err(e.into()),
                }
            }
            Ok((pairs, missing))
        }
        Err(e) => Err(e.into()),
    }
}

fn calibrate(ctx: &Context, tx_name: Option<&str>) -> CliResult<()> {
    let project = &ctx.project;
    let cfg = &project.config;
    let cal_cfg = &cfg.calibration;
    let cw_path = cal_cfg
        .cw_log
        .as_deref()
        .ok_or_else(|| CliError::config("calibration.cw_log is not set").at(&project.path))?;
    let scene = ctx.scene()?;
    let tx = project.transmitter(tx_name)?;
    let site = tx.site();
    let rx = &cfg.receiver;
    let base = &cfg.propagation;

    let log = read_measurement_log(cw_path, cfg.geo_origin.as_ref())?;
    if log.is_empty() {
        return Err(CliError::new(ErrorCode::EmptyInput, "CW log has no samples").at(cw_path));
    }
    let sel = select_samples(project, &log, SampleKind::Cw)?;
    if sel.samples.is_empty() {
        return Err(CliError::new(ErrorCode::EmptyInput, "no usable CW samples in log").at(cw_path));
    }
    let (_, no_path) = pairs_with_paths(&scene, &site, rx, base, &sel.samples, ctx.mode)?;
    let usable: Vec<MeasurementSample> = (0..sel.samples.len())
        .filter(|i| !no_path.contains(i))
        .map(|i| sel.samples[i].clone())
        .collect();
    if usable.is_empty() {
        return Err(CliError::new(ErrorCode::NoPathFound, "no CW sample has a propagation path").at(cw_path));
    }

    let before = path_loss_pairs(&scene, &site, rx, base, &usable, ctx.mode)?;
    let (params, fit) = if cal_cfg.fit_exponents {
        let grid = cal_cfg.exponent_grid.grid()?;
        let fit = fit_exponents(&scene, &site, rx, &usable, base, &grid, ctx.mode)?;
        (fit.params.clone(), Some(fit))
    } else {
        (base.clone(), None)
    };
    let pairs = if fit.is_some() {
        path_loss_pairs(&scene, &site, rx, &params, &usable, ctx.mode)?
    } else {
        before.clone()
    };
    let cw = cw_offset(&pairs, cal_cfg.weight, cal_cfg.per_class)?;

    let module = match &cal_cfg.sweep_log {
        Some(p) => {
            let rows = read_sweep_log(p)?;
            if rows.is_empty() {
                return Err(CliError::new(ErrorCode::EmptyInput, "sweep log has no rows").at(p));
            }
            Some(module_offset(&rows)?)
        }
        None => None,
    };

    // In path-loss terms the CW offset is added to the simulated loss.
    let corrected: Vec<MetricPair> = pairs
        .iter()
        .map(|p| {
            let offset = if cal_cfg.per_class { cw.offset_for(p.class) } else { cw.offset_db };
            MetricPair {
                simulated_db: p.simulated_db + offset,
                measured_db: p.measured_db,
                class: p.class,
            }
        })
        .collect();
    let to_metric = |v: &[PathLossPair]| v.iter().copied().map(MetricPair::from).collect::<Vec<_>>();
    let m_before = evaluate_metrics(&to_metric(&before))?;
    let m_fit = match &fit {
        Some(_) => Some(evaluate_metrics(&to_metric(&pairs))?),
        None => None,
    };
    let m_after = evaluate_metrics(&corrected)?;

    let mut table = m_before.table("path loss, default parameters");
    if let Some(m) = &m_fit {
        table.push('\n');
        table.push_str(&m.table("path loss, fitted exponents"));
    }
    table.push('\n');
    table.push_str(&m_after.table("path loss, after CW offset"));

    let record = CalibrationRecord {
        format_version: FORMAT_VERSION,
        cw: cw.clone(),
        module: module.clone(),
        per_class: cal_cfg.per_class,
        fitted_exponents: fit.as_ref().map(|f| FittedExponents {
            los: f.params.exponent_los,
            olos: f.params.exponent_olos,
            nlos: f.params.exponent_nlos,
        }),
    };
    let no_path_log: Vec<usize> = no_path.iter().map(|&i| sel.indices[i]).collect();
    let report = json!({
        "transmitter": tx.name,
        "log_samples": log.len(),
        "used_samples": usable.len(),
        "skipped_other_kind": sel.other_kind,
        "unmatched": sel.unmatched,
        "no_path": no_path_log,
        "cw": cw,
        "module": module,
        "fit": fit.as_ref().map(|f| json!({
            "exponent_los": f.params.exponent_los,
            "exponent_olos": f.params.exponent_olos,
            "exponent_nlos": f.params.exponent_nlos,
            "rmse_before_db": f.rmse_before_db,
            "rmse_after_db": f.rmse_after_db,
        })),
        "metrics": {
            "default": m_before,
            "fitted": m_fit,
            "after_cw": m_after,
        },
    });

    let mut out = OutputSet::new();
    out.add("calibration.toml", record.to_toml());
    out.add("calibration_metrics.txt", table);
    out.add("calibration_report.json", json_bytes(&report));
    out.commit(&ctx.out_dir)?;
    Ok(())
}

// evaluate

fn evaluate(ctx: &Context, calibration: Option<&Path>, tx_name: Option<&str>) -> CliResult<()> {
    let project = &ctx.project;
    let cfg = &project.config;
    let log_path = cfg
        .calibration
        .service_log
        .as_deref()
        .ok_or_else(|| CliError::config("calibration.service_log is not set").at(&project.path))?;
    let (cal, params) = ctx
        .calibration(calibration)?
        .ok_or_else(|| CliError::config("no calibration record given").at(&project.path))?;
    let scene = ctx.scene()?;
    let tx = project.transmitter(tx_name)?;
    let site = tx.site();
    let sim = Simulator::new(&scene, &site, &cfg.receiver, &params, &cal)?;

    let log = read_measurement_log(log_path, cfg.geo_origin.as_ref())?;
    if log.is_empty() {
        return Err(CliError::new(ErrorCode::EmptyInput, "service log has no samples").at(log_path));
    }
    let sel = select_samples(project, &log, SampleKind::Service)?;
    if sel.samples.is_empty() {
        return Err(CliError::new(ErrorCode::EmptyInput, "no usable SERVICE samples in log").at(log_path));
    }
    let points: Vec<Point2> = sel.samples.iter().map(|s| s.position).collect();
    let records = simulate_trajectory(&sim, &points, ctx.opts())?;
    let mut pairs = Vec::with_capacity(records.len());
    let mut no_path = Vec::new();
    for (i, (rec, s)) in records.iter().zip(&sel.samples).enumerate() {
        match rec.evaluation.p_r_dbm {
            // Logged levels are rescaled to the configured transmit power.
            Some(p) => pairs.push(MetricPair {
                simulated_db: p + (s.source_tx_power_dbm - site.radio.tx_power_dbm),
                measured_db: s.rss_dbm,
                class: rec.evaluation.visibility,
            }),
            None => no_path.push(sel.indices[i]),
        }
    }
    if pairs.is_empty() {
        return Err(CliError::new(ErrorCode::NoPathFound, "no SERVICE sample has a propagation path").at(log_path));
    }
    let metrics = evaluate_metrics(&pairs)?;
    let report = json!({
        "transmitter": tx.name,
        "log_samples": log.len(),
        "used_samples": pairs.len(),
        "skipped_other_kind": sel.other_kind,
        "unmatched": sel.unmatched,
        "no_path": no_path,
        "metrics": metrics,
    });
    let mut out = OutputSet::new();
    out.add("evaluation_metrics.txt", metrics.table("received power, calibrated simulation vs SERVICE log"));
    out.add("evaluation_report.json", json_bytes(&report));
    out.commit(&ctx.out_dir)?;
    Ok(())
}

// plan

#[derive(Debug, Serialize)]
struct CandidateResult {
    rank: usize,
    name: String,
    x_m: f64,
    y_m: f64,
    #[serde(flatten)]
    report: CoverageReport,
}

fn candidate_site(project: &Project, c: &CandidateConfig) -> CliResult<Site> {
    let mut radio = c.radio.clone().unwrap_or_else(|| {
        project
            .config
            .transmitters
            .first()
            .map_or_else(|| RadioConfig::its_g5_rsu(0.0), |t| t.radio.clone())
    });
    if let Some(az) = c.boresight_azimuth_deg {
        match &mut radio.pattern {
            AntennaPattern::Omni { .. } => {
                return Err(CliError::config(format!(
                    "candidate {:?} sets a boresight but its antenna is omnidirectional",
                    c.name
                ))
                .at(&project.path))
            }
            AntennaPattern::Panel {
                boresight_azimuth_deg, ..
            }
            | AntennaPattern::Tabulated {
                boresight_azimuth_deg, ..
            } => *boresight_azimuth_deg = az,
        }
    }
    radio.validate()?;
    Ok(Site::new(Point2::new(c.x_m, c.y_m), radio))
}

/// Higher covered fraction first, then the smaller mean margin over the
/// threshold, then configuration order.
fn rank(results: &mut [(usize, CoverageReport)]) {
    results.sort_by(|(ia, a), (ib, b)| {
        b.covered_fraction
            .total_cmp(&a.covered_fraction)
            .then_with(|| {
                let ma = a.mean_margin_db.unwrap_or(f64::INFINITY);
                let mb = b.mean_margin_db.unwrap_or(f64::INFINITY);
                ma.total_cmp(&mb)
            })
            .then(ia.cmp(ib))
    });
}

fn plan(ctx: &Context, calibration: Option<&Path>) -> CliResult<()> {
    let project = &ctx.project;
    let cfg = &project.config;
    if cfg.candidates.is_empty() {
        return Err(CliError::new(ErrorCode::EmptyInput, "configuration lists no candidates").at(&project.path));
    }
    let spec = ctx
        .project
        .grid_spec(ctx.cell_size)?
        .ok_or_else(|| CliError::config("plan needs a [region]").at(&project.path))?;
    let scene = ctx.scene()?;
    let (cal, params) = ctx.calibration_or_identity(calibration)?;
    let trajectory = match cfg.trajectories.first() {
        Some(t) => Some(t.points()?),
        None => None,
    };

    let mut results = Vec::with_capacity(cfg.candidates.len());
    for (i, c) in cfg.candidates.iter().enumerate() {
        let site = candidate_site(project, c)?;
        let sim = Simulator::new(&scene, &site, &cfg.receiver, &params, &cal)?;
        let grid = simulate_grid(&sim, spec, ctx.opts());
        let records = match &trajectory {
            Some(points) => Some(simulate_trajectory(&sim, points, ctx.opts())?),
            None => None,
        };
        let report = coverage_report(&grid, records.as_deref(), &cfg.receiver, &cal.module)?;
        results.push((i, report));
    }
    rank(&mut results);

    let ranked: Vec<CandidateResult> = results
        .into_iter()
        .enumerate()
        .map(|(r, (i, report))| {
            let c = &cfg.candidates[i];
            CandidateResult {
                rank: r + 1,
                name: c.name.clone(),
                x_m: c.x_m,
                y_m: c.y_m,
                report,
            }
        })
        .collect();

    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:<5}{:<20}{:>10}{:>14}{:>14}{:>10}",
        "rank", "candidate", "covered", "boundary_m", "margin_db", "gaps"
    );
    for r in &ranked {
        let opt = |v: Option<f64>, prec: usize| v.map_or_else(|| "-".to_string(), |v| format!("{v:.prec$}"));
        let _ = writeln!(
            text,
            "{:<5}{:<20}{:>10.4}{:>14}{:>14}{:>10}",
            r.rank,
            r.name,
            r.report.covered_fraction,
            opt(r.report.boundary_distance_m, 1),
            opt(r.report.mean_margin_db, 2),
            r.report.undersupplied_cells.len()
        );
    }
    let doc = json!({
        "grid": { "origin_x_m": spec.origin.x, "origin_y_m": spec.origin.y, "cell_size_m": spec.cell_size_m, "rows": spec.rows, "cols": spec.cols },
        "candidates": ranked,
    });
    let mut out = OutputSet::new();
    out.add("plan.json", json_bytes(&doc));
    out.add("plan.txt", text);
    out.commit(&ctx.out_dir)?;
    Ok(())
}

// synthetic data

fn noise(sigma: f64) -> CliResult<Normal<f64>> {
    Normal::new(0.0, sigma).map_err(|e| CliError::new(ErrorCode::NumericDomain, format!("noise sigma {sigma}: {e}")))
}

fn commit_single(path: &Path, bytes: Vec<u8>) -> CliResult<()> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| CliError::config("output path has no file name").at(path))?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut out = OutputSet::new();
    out.add(name, bytes);
    out.commit(dir)?;
    Ok(())
}

fn synth_log(ctx: &Context, args: &SynthLogArgs) -> CliResult<()> {
    let project = &ctx.project;
    let cfg = &project.config;
    let traj = match &args.trajectory {
        Some(n) => project
            .trajectory(n)
            .ok_or_else(|| CliError::config(format!("no trajectory named {n:?}")).at(&project.path))?,
        None => cfg
            .trajectories
            .first()
            .ok_or_else(|| CliError::config("configuration defines no trajectories").at(&project.path))?,
    };
    let scene = ctx.scene()?;
    let tx = project.transmitter(args.tx.as_deref())?;
    let site = tx.site();
    let (cal, params) = match &args.calibration {
        Some(p) => ctx.calibration_or_identity(Some(p))?,
        None => (Calibrations::identity(), cfg.propagation.clone()),
    };
    let sim = Simulator::new(&scene, &site, &cfg.receiver, &params, &cal)?;
    let records = simulate_trajectory(&sim, &traj.points()?, ctx.opts())?;
    let dist = noise(args.noise_db)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let kind = match args.kind {
        LogKind::Cw => SampleKind::Cw,
        LogKind::Service => SampleKind::Service,
    };
    let samples: Vec<MeasurementSample> = records
        .iter()
        .filter_map(|r| {
            let p = r.evaluation.p_r_dbm?;
            Some(MeasurementSample {
                position: r.position,
                rss_dbm: p - args.pl_offset_db + dist.sample(&mut rng),
                kind,
                timestamp: Some(format!("{:.1}", r.index as f64)),
                source_tx_power_dbm: site.radio.tx_power_dbm,
            })
        })
        .collect();
    if samples.is_empty() {
        return Err(CliError::new(ErrorCode::NoPathFound, "no trajectory point has a propagation path"));
    }
    let mut buf = Vec::new();
    write_measurement_log(&mut buf, &samples)
        .map_err(|e| CliError::new(ErrorCode::OutputFailed, e.to_string()).at(&args.output))?;
    commit_single(&args.output, buf)
}

fn synth_sweep(seed: u64, args: &SynthSweepArgs) -> CliResult<()> {
    if args.min_attenuation_db > args.max_attenuation_db {
        return Err(CliError::config("min attenuation exceeds max attenuation"));
    }
    let dist = noise(args.noise_db)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<ModuleSweepRow> = (args.min_attenuation_db..=args.max_attenuation_db)
        .map(|m| {
            let p_spec = args.source_dbm - f64::from(m);
            ModuleSweepRow {
                attenuation_db: f64::from(m),
                p_spec_dbm: p_spec,
                p_module_dbm: p_spec - args.gap_db + dist.sample(&mut rng),
            }
        })
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| CliError::new(ErrorCode::OutputFailed, e.to_string()).at(&args.output);
    w.write_record(["attenuation_db", "p_spec_dbm", "p_module_dbm"]).map_err(io_err)?;
    for r in &rows {
        w.write_record([
            r.attenuation_db.to_string(),
            r.p_spec_dbm.to_string(),
            r.p_module_dbm.to_string(),
        ])
        .map_err(io_err)?;
    }
    let buf = w
        .into_inner()
        .map_err(|e| CliError::new(ErrorCode::OutputFailed, e.to_string()).at(&args.output))?;
    commit_single(&args.output, buf)
}
