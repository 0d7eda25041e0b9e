use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use twave_core::profile::{geometric_grid, reconstruct_with, TravelMap};
use twave_core::verify::{format_number, VerificationReport};
use twave_core::{
    classify_regime, phase_rhs, run_verification, solve_trajectory, validate_params,
    AsymptoteSpec, Error, ModelParams, Target, Trajectory, VerifyOptions,
};

use crate::config::{parse_list, ConfigFile};
use crate::error::{CliError, CliResult};
use crate::{Command, CommonArgs, ParamArgs, ProfileArgs, SweepArgs, TrajectoryArgs, VerifyArgs};

const DEFAULT_THETA_MAX: f64 = 1e6;
const DEFAULT_TRAJECTORY_ROWS: usize = 16;
const DEFAULT_PROFILE_ROWS: usize = 200;
const RATIO_CURVE_POINTS: usize = 100;

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Trajectory(a) => trajectory(a),
        Command::Profile(a) => profile(a),
        Command::Verify(a) => verify(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn load_config(common: &CommonArgs) -> CliResult<ConfigFile> {
    match &common.config {
        Some(path) => ConfigFile::load(path),
        None => Ok(ConfigFile::default()),
    }
}

const PARAM_KEYS: [&str; 5] = ["m", "p", "beta", "b", "k"];

fn param_texts(args: &ParamArgs, cfg: &ConfigFile) -> CliResult<[String; 5]> {
    let flags = [&args.m, &args.p, &args.beta, &args.b, &args.k];
    let mut out: [String; 5] = Default::default();
    for (i, key) in PARAM_KEYS.iter().enumerate() {
        out[i] = flags[i]
            .clone()
            .or_else(|| cfg.raw(key).map(str::to_string))
            .ok_or_else(|| CliError::usage(format!("missing required parameter --{key}")))?;
    }
    Ok(out)
}

fn single_params(args: &ParamArgs, cfg: &ConfigFile) -> CliResult<ModelParams> {
    let texts = param_texts(args, cfg)?;
    let mut raw = [0.0; 5];
    for (i, t) in texts.iter().enumerate() {
        let values = parse_list(PARAM_KEYS[i], t)?;
        if values.len() != 1 {
            return Err(CliError::usage(format!(
                "--{} takes one value here; lists are for sweep",
                PARAM_KEYS[i]
            )));
        }
        raw[i] = values[0];
    }
    Ok(validate_params(raw)?)
}

fn positive(name: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::usage(format!("--{name} must be positive, got {v}")))
    }
}

fn tolerance(name: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(CliError::usage(format!("--{name} must lie in (0, 1), got {v}")))
    }
}

/// Output sink: the named file or standard output.
fn open_out(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        Some(p) => File::create(p)
            .map(|f| Box::new(BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|source| CliError::Io {
                action: "cannot write",
                path: p.to_path_buf(),
                source,
            }),
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn write_all(path: Option<&Path>, text: &str) -> CliResult<()> {
    let io_err = |source| CliError::Io {
        action: "cannot write",
        path: path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf),
        source,
    };
    let mut out = open_out(path)?;
    out.write_all(text.as_bytes()).map_err(io_err)?;
    out.flush().map_err(io_err)
}

fn csv_row(values: &[f64]) -> String {
    let mut row = values
        .iter()
        .map(|&v| format_number(v))
        .collect::<Vec<_>>()
        .join(",");
    row.push('\n');
    row
}

fn out_path(common: &CommonArgs, cfg: &ConfigFile) -> Option<PathBuf> {
    common
        .out
        .clone()
        .or_else(|| cfg.raw("out").map(PathBuf::from))
}

/// Rows at `10^{j/n}` inside the computed range, plus both ends. An end
/// that rounds onto a grid value is replaced by that value.
fn trajectory_rows(traj: &Trajectory, per_decade: usize) -> Vec<f64> {
    let (lo, hi) = (traj.theta_min(), traj.theta_max());
    let near = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b;
    let n = per_decade as f64;
    let first = (lo.log10() * n).floor() as i64;
    let last = (hi.log10() * n).ceil() as i64;
    let mut rows = Vec::new();
    for j in first..=last {
        let theta = 10f64.powf(j as f64 / n);
        if near(theta, lo) || near(theta, hi) {
            rows.push(theta.clamp(lo, hi));
        } else if theta > lo && theta < hi {
            rows.push(theta);
        }
    }
    if !rows.first().is_some_and(|&t| near(t, lo)) {
        rows.insert(0, lo);
    }
    if !rows.last().is_some_and(|&t| near(t, hi)) {
        rows.push(hi);
    }
    rows
}

fn trajectory(a: TrajectoryArgs) -> CliResult<()> {
    let cfg = load_config(&a.common)?;
    let params = single_params(&a.params, &cfg)?;
    let theta_max = positive(
        "theta-max",
        cfg.resolve_or(a.common.theta_max, "theta-max", DEFAULT_THETA_MAX)?,
    )?;
    let tol = tolerance(
        "tol",
        cfg.resolve_or(a.common.tol, "tol", twave_core::phase_plane::DEFAULT_TOL)?,
    )?;
    let per_decade = cfg.resolve_or(a.grid_points, "grid-points", DEFAULT_TRAJECTORY_ROWS)?;
    if per_decade == 0 {
        return Err(CliError::usage("--grid-points must be positive"));
    }
    let traj = solve_trajectory(&params, theta_max, tol)?;
    let mut text = String::from("theta,upsilon,rhs\n");
    for theta in trajectory_rows(&traj, per_decade) {
        let upsilon = traj.eval(theta)?;
        text.push_str(&csv_row(&[theta, upsilon, phase_rhs(&params, theta, upsilon)?]));
    }
    write_all(out_path(&a.common, &cfg).as_deref(), &text)
}

fn profile(a: ProfileArgs) -> CliResult<()> {
    let cfg = load_config(&a.common)?;
    let params = single_params(&a.params, &cfg)?;
    let theta_max = positive(
        "theta-max",
        cfg.resolve_or(a.common.theta_max, "theta-max", DEFAULT_THETA_MAX)?,
    )?;
    let tol = tolerance(
        "tol",
        cfg.resolve_or(a.common.tol, "tol", twave_core::phase_plane::DEFAULT_TOL)?,
    )?;
    let qtol = tolerance("qtol", cfg.resolve_or(a.qtol, "qtol", 1e-10)?)?;
    let rows = cfg.resolve_or(a.grid_points, "grid-points", DEFAULT_PROFILE_ROWS)?;
    if rows == 0 {
        return Err(CliError::usage("--grid-points must be positive"));
    }
    let zero_extension = a.zero_extension || cfg.resolve_or(None, "zero-extension", false)?;
    let speed_frame = cfg.resolve(a.speed_frame, "speed-frame")?;
    let traj = solve_trajectory(&params, theta_max, tol)?;
    let map = TravelMap::new(&traj, qtol)?;
    let reachable = map.z_max();
    let z_min = cfg
        .resolve(a.z_min, "z-min")?
        .unwrap_or_else(|| map.z_seed());
    let z_max = cfg.resolve(a.z_max, "z-max")?.unwrap_or(0.99 * reachable);
    positive("z-min", z_min)?;
    if !(z_max >= z_min) {
        return Err(CliError::usage(format!(
            "--z-max ({z_max}) must not be below --z-min ({z_min})"
        )));
    }
    if z_max > reachable {
        return Err(Error::RangeExceeded {
            value: z_max,
            lo: 0.0,
            hi: reachable,
        }
        .into());
    }
    let grid = if z_max == z_min {
        vec![z_min]
    } else {
        geometric_grid(z_min, z_max, rows.max(2))
    };
    let prof = reconstruct_with(&map, &grid)?;
    let k = params.k();
    let mut header = String::from("z,phi,flux");
    if speed_frame.is_some() {
        header.push_str(",x,u");
    }
    header.push('\n');
    let mut text = header;
    let mut emit = |z: f64, phi: f64, flux: f64| {
        let mut v = vec![z, phi, flux];
        if let Some(t) = speed_frame {
            v.extend([k * t - z, phi]);
        }
        text.push_str(&csv_row(&v));
    };
    if zero_extension {
        for &z in grid.iter().rev() {
            emit(-z, 0.0, 0.0);
        }
    }
    emit(0.0, 0.0, 0.0);
    for (&z, &phi) in prof.zs().iter().zip(prof.phis()) {
        emit(z, phi, twave_core::profile::flux_at_phi(&traj, phi)?);
    }
    write_all(out_path(&a.common, &cfg).as_deref(), &text)
}

fn verify_options(
    common: &CommonArgs,
    qtol: Option<f64>,
    grid_points: Option<usize>,
    cfg: &ConfigFile,
) -> CliResult<VerifyOptions> {
    let d = VerifyOptions::default();
    let opts = VerifyOptions {
        theta_max: positive(
            "theta-max",
            cfg.resolve_or(common.theta_max, "theta-max", d.theta_max)?,
        )?,
        tol: tolerance("tol", cfg.resolve_or(common.tol, "tol", d.tol)?)?,
        qtol: tolerance("qtol", cfg.resolve_or(qtol, "qtol", d.qtol)?)?,
        grid_points: cfg.resolve_or(grid_points, "grid-points", d.grid_points)?,
        ..d
    };
    if opts.grid_points < 7 {
        return Err(CliError::usage("--grid-points must be at least 7"));
    }
    Ok(opts)
}

/// `Y/(A·X^q)` over the whole computed range for each power law.
fn ratio_curves(report: &VerificationReport, opts: &VerifyOptions) -> CliResult<String> {
    let traj = solve_trajectory(&report.params, opts.theta_max, opts.tol)?;
    let map = TravelMap::new(&traj, opts.qtol)?;
    let mut text = String::from("asymptote,target,end,law,x,ratio\n");
    for (i, fit) in report.asymptotes.iter().enumerate() {
        let spec: &AsymptoteSpec = &fit.spec;
        let (lo, hi) = match spec.target {
            Target::Trajectory => (traj.theta_min(), traj.theta_max()),
            Target::Profile => (map.z_seed(), 0.99 * map.z_max()),
        };
        for x in geometric_grid(lo, hi, RATIO_CURVE_POINTS) {
            let y = match spec.target {
                Target::Trajectory => traj.eval(x)?,
                Target::Profile => map.solve_log_phi(x)?.exp(),
            };
            text.push_str(&format!(
                "{i},{},{},{},{},{}\n",
                spec.target.name(),
                spec.end.name(),
                spec.law.name(),
                format_number(x),
                format_number(y / spec.eval(x))
            ));
        }
    }
    Ok(text)
}

fn verify(a: VerifyArgs) -> CliResult<()> {
    let cfg = load_config(&a.common)?;
    let params = single_params(&a.params, &cfg)?;
    let opts = verify_options(&a.common, a.qtol, a.grid_points, &cfg)?;
    let report = run_verification(&params, &opts)?;
    write_all(out_path(&a.common, &cfg).as_deref(), &report.to_document())?;
    let plot = a
        .plot_data
        .clone()
        .or_else(|| cfg.raw("plot-data").map(PathBuf::from));
    if let Some(path) = plot {
        write_all(Some(&path), &ratio_curves(&report, &opts)?)?;
    }
    if report.pass {
        Ok(())
    } else {
        Err(CliError::VerificationFailed(report.status.to_string()))
    }
}

/// One sweep cell's CSV row.
fn sweep_cell(raw: [f64; 5], opts: &VerifyOptions) -> String {
    let mut row = raw.iter().map(|&v| format_number(v)).collect::<Vec<_>>();
    match validate_params(raw) {
        Err(_) => row.extend(["".into(), "".into(), "invalid".into()]),
        Ok(params) => {
            let regime = classify_regime(&params);
            let status = match run_verification(&params, opts) {
                Ok(r) => r.status.to_string(),
                Err(_) => "fail".into(),
            };
            row.extend([
                format!("{}/{}", regime.balance, regime.speed_sign),
                format_number(params.c_star()),
                status,
            ]);
        }
    }
    row.join(",") + "\n"
}

fn sweep(a: SweepArgs) -> CliResult<()> {
    let cfg = load_config(&a.common)?;
    let texts = param_texts(&a.params, &cfg)?;
    let lists = texts
        .iter()
        .zip(PARAM_KEYS)
        .map(|(t, key)| parse_list(key, t))
        .collect::<CliResult<Vec<_>>>()?;
    let opts = verify_options(&a.common, a.qtol, a.grid_points, &cfg)?;
    let workers = cfg.resolve_or(a.workers, "workers", 0)?;
    let mut cells = Vec::new();
    for &m in &lists[0] {
        for &p in &lists[1] {
            for &beta in &lists[2] {
                for &b in &lists[3] {
                    for &k in &lists[4] {
                        cells.push([m, p, beta, b, k]);
                    }
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::usage(format!("--workers: {e}")))?;
    let rows: Vec<String> = pool.install(|| cells.par_iter().map(|&c| sweep_cell(c, &opts)).collect());
    let mut text = String::from("m,p,beta,b,k,regime,c_star,status\n");
    for r in rows {
        text.push_str(&r);
    }
    write_all(out_path(&a.common, &cfg).as_deref(), &text)
}
