//! Command-line wiring: reproducible experiments with persisted outputs.
//!
//! Every run writes the files it promises plus a `manifest` of `key: value`
//! lines recording the exact inputs (model digest included) and outputs.
//! Given the same model, flags and seed, the CSV outputs are byte-identical;
//! `--threads` changes scheduling but never results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::asymptotics::{
    cycle_points, first_passage_set, limit_shape, zero_leak_ellipsoid, ShapeCurve,
};
use crate::error::{Error, Result};
use crate::geometry::{convex_hull, direction_grid, hausdorff};
use crate::green::{green_table, radii, suggested_box_radius, threshold_constants, GreenTable};
use crate::io;
use crate::lattice::norm_i32;
use crate::model::{
    default_horizon, krw_measure, load_model_spec, non_killed_kernel, validate_assumptions,
    JumpKernel, ModelSpec,
};
use crate::sandpile::{radial_extents, shape, stabilize, SandpileState, Shape};
use crate::spectral::BoundarySample;

#[derive(Parser, Debug)]
#[command(
    name = "lasm",
    about = "Leaky sandpile simulation and limit-shape analysis",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Cap on worker threads (0 = all cores). Results never depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Model document (TOML).
    pub model: PathBuf,
    /// Override a color's leakiness, e.g. --m-override 1:100 (repeatable).
    #[arg(long = "m-override", value_name = "COLOR:VALUE")]
    pub m_override: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the walk assumptions up to a reachability horizon.
    Validate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Stabilize N grains and dump the final state and odometer.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "1e6")]
        n: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Source site, comma-separated coordinates (default: origin).
        #[arg(long)]
        source: Option<String>,
        /// Source color, 1-based.
        #[arg(long, default_value_t = 1)]
        color: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate and measure the visited region's radial extents.
    Shape {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "1e6")]
        n: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        dirs: usize,
        #[arg(long, default_value_t = 0.15)]
        tol_angle: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample the predicted limit-shape curve.
    Predict {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0)]
        dirs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulation against prediction: radii ratios and the threshold sandwich.
    Compare {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated grain counts, e.g. 1e6,1e9,1e12.
        #[arg(long, default_value = "1e4,1e6")]
        n: String,
        #[arg(long, default_value_t = 0)]
        dirs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        box_r: Option<i32>,
        #[arg(long)]
        eps_stop: Option<f64>,
        #[arg(long, default_value_t = 0.15)]
        tol_angle: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cycle points of the walk and their convex hull.
    Polytope {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1_000_000)]
        cap: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// The vanishing-leak limiting ellipsoid of the non-killed analogue.
    Ellipsoid {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// First-passage sets A_n and their distance to the limit polytope.
    FirstPassage {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated step counts.
        #[arg(long, default_value = "8,16,32")]
        n: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// PPM slices of the final configuration (and an SVG overlay for d = 2).
    Render {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "1e6")]
        n: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Slice plane for d > 2, e.g. --slice 3=0 (1-based axis).
        #[arg(long)]
        slice: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Run manifest: a `key: value` record of what was consumed and produced.
#[derive(Debug, Default)]
pub struct RunManifest {
    pub command: String,
    pub model_path: String,
    pub model_digest: String,
    pub parameters: Vec<(String, String)>,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
    pub topple_events: Option<u64>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "command: {}", self.command);
        let _ = writeln!(out, "model: {}", self.model_path);
        let _ = writeln!(out, "model_sha256: {}", self.model_digest);
        for (k, v) in &self.parameters {
            let _ = writeln!(out, "{k}: {v}");
        }
        if let Some(events) = self.topple_events {
            let _ = writeln!(out, "topple_events: {events}");
        }
        let _ = writeln!(out, "wall_clock_seconds: {:.3}", self.wall_clock_seconds);
        for o in &self.outputs {
            let _ = writeln!(out, "output: {}", o.display());
        }
        fs::write(path, out).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
    }
}

pub fn parse_manifest(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once(':'))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

fn load_with_overrides(args: &ModelArgs) -> Result<(ModelSpec, String, String)> {
    let text = fs::read_to_string(&args.model)
        .map_err(|e| Error::Parse(format!("{}: {e}", args.model.display())))?;
    let digest = format!("{:x}", Sha256::digest(text.as_bytes()));
    let mut spec = load_model_spec(&text)?;
    if !args.m_override.is_empty() {
        let mut leakiness = spec.leakiness.clone();
        for o in &args.m_override {
            let (color, value) = o.split_once(':').ok_or_else(|| {
                Error::Parse(format!("--m-override expects COLOR:VALUE, got {o}"))
            })?;
            let color: usize = color
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad color in --m-override {o}")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad value in --m-override {o}")))?;
            if color == 0 || color > spec.p {
                return Err(Error::Parse(format!("color {color} out of range")));
            }
            leakiness[color - 1] = value;
        }
        spec = ModelSpec::new(spec.d, spec.p, leakiness, spec.entries.clone())?;
    }
    Ok((spec, digest, args.model.display().to_string()))
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("bad {what}: {s}")))
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',').map(|part| parse_f64(part, what)).collect()
}

fn default_dirs(d: usize, requested: usize) -> usize {
    if requested > 0 {
        return requested;
    }
    match d {
        1 => 2,
        2 => 720,
        3 => 2000,
        _ => 5000,
    }
}

fn ensure_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Validation(format!("{}: {e}", dir.display())))
}

fn parse_source(d: usize, source: &Option<String>) -> Result<Vec<i32>> {
    match source {
        None => Ok(vec![0; d]),
        Some(s) => {
            let coords: Vec<i32> = s
                .split(',')
                .map(|c| c.trim().parse::<i32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse(format!("bad --source {s}")))?;
            if coords.len() != d {
                return Err(Error::Parse(format!(
                    "--source has {} coordinates, model is {d}-dimensional",
                    coords.len()
                )));
            }
            Ok(coords)
        }
    }
}

/// Dispatches a parsed command line. Returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if cli.threads > 0 {
        // Ignore failure: the global pool may already exist in tests.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e @ (Error::Parse(_) | Error::Validation(_))) => {
            eprintln!("{e}");
            2
        }
        Err(e) => {
            eprintln!("{e}");
            3
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Validate { model, horizon } => cmd_validate(model, horizon),
        Command::Simulate {
            model,
            n,
            seed,
            source,
            color,
            out,
        } => cmd_simulate(model, n, seed, source, color, out),
        Command::Shape {
            model,
            n,
            seed,
            dirs,
            tol_angle,
            out,
        } => cmd_shape(model, n, seed, dirs, tol_angle, out),
        Command::Predict { model, dirs, out } => cmd_predict(model, dirs, out),
        Command::Compare {
            model,
            n,
            dirs,
            seed,
            box_r,
            eps_stop,
            tol_angle,
            out,
        } => cmd_compare(model, n, dirs, seed, box_r, eps_stop, tol_angle, out),
        Command::Polytope { model, cap, out } => cmd_polytope(model, cap, out),
        Command::Ellipsoid { model, out } => cmd_ellipsoid(model, out),
        Command::FirstPassage { model, n, out } => cmd_first_passage(model, n, out),
        Command::Render {
            model,
            n,
            seed,
            slice,
            out,
        } => cmd_render(model, n, seed, slice, out),
    }
}

fn cmd_validate(model: ModelArgs, horizon: Option<usize>) -> Result<()> {
    let (spec, digest, _) = load_with_overrides(&model)?;
    let kernel = krw_measure(&spec);
    let horizon = horizon.unwrap_or_else(|| default_horizon(&kernel));
    let report = validate_assumptions(&kernel, horizon);
    println!("model: {} (sha256 {digest})", model.model.display());
    println!("{report}");
    if report.all_hold() {
        println!("assumptions: hold (horizon {horizon})");
    } else {
        println!("assumptions: not fully certified (horizon {horizon})");
    }
    Ok(())
}

struct SimOutcome {
    spec: ModelSpec,
    kernel: JumpKernel,
    final_state: SandpileState,
    odometer: crate::sandpile::Odometer,
    shape: Shape,
    n: f64,
    source: Vec<i32>,
    color0: usize,
}

fn simulate_once(
    model: &ModelArgs,
    n_text: &str,
    seed: u64,
    source: &Option<String>,
    color: usize,
) -> Result<(SimOutcome, String, String)> {
    let (spec, digest, path) = load_with_overrides(model)?;
    let n = parse_f64(n_text, "--n")?;
    if !(n > 0.0) {
        return Err(Error::Parse(format!("--n must be positive, got {n_text}")));
    }
    let source = parse_source(spec.d, source)?;
    if color == 0 || color > spec.p {
        return Err(Error::Parse(format!("--color {color} out of range")));
    }
    let kernel = krw_measure(&spec);
    let initial = SandpileState::point_mass(spec.d, spec.p, n, &source, color - 1);
    let (final_state, odometer) = stabilize(&spec, &initial, seed)?;
    let shape = shape(&odometer);
    Ok((
        SimOutcome {
            spec,
            kernel,
            final_state,
            odometer,
            shape,
            n,
            source,
            color0: color - 1,
        },
        digest,
        path,
    ))
}

fn cmd_simulate(
    model: ModelArgs,
    n: String,
    seed: u64,
    source: Option<String>,
    color: usize,
    out: PathBuf,
) -> Result<()> {
    let start = Instant::now();
    let (sim, digest, path) = simulate_once(&model, &n, seed, &source, color)?;
    ensure_out(&out)?;
    let mut manifest = RunManifest {
        command: "simulate".into(),
        model_path: path,
        model_digest: digest,
        parameters: vec![
            ("n".into(), n.clone()),
            ("seed".into(), seed.to_string()),
            (
                "source".into(),
                sim.source
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("color".into(), (sim.color0 + 1).to_string()),
        ],
        topple_events: Some(sim.final_state.topple_events),
        ..Default::default()
    };
    let final_path = out.join("final.csv");
    io::write_final_csv(&final_path, &sim.final_state)?;
    let odo_path = out.join("odometer.csv");
    io::write_field_csv(
        &odo_path,
        sim.spec.d,
        "emitted",
        &sim.odometer.sorted_entries(),
    )?;
    manifest.outputs = vec![final_path, odo_path];
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&out.join("manifest"))?;
    println!(
        "stabilized N={} in {} bulk topplings over {} sites; leaked {}",
        sim.n,
        sim.final_state.topple_events,
        sim.shape.sites.len(),
        sim.final_state.leaked_total
    );
    Ok(())
}

fn cmd_shape(
    model: ModelArgs,
    n: String,
    seed: u64,
    dirs: usize,
    tol_angle: f64,
    out: PathBuf,
) -> Result<()> {
    let start = Instant::now();
    let (sim, digest, path) = simulate_once(&model, &n, seed, &None, 1)?;
    ensure_out(&out)?;
    let grid = direction_grid(sim.spec.d, default_dirs(sim.spec.d, dirs), 0xD1CE);
    let extents = radial_extents(&sim.shape.union, &grid, tol_angle);
    let mut text = String::new();
    for k in 1..=sim.spec.d {
        let _ = write!(text, "u_{k},");
    }
    let _ = writeln!(text, "inner,outer");
    for (u, ext) in grid.iter().zip(&extents) {
        let coords = u
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",");
        match ext {
            Some((inner, outer)) => {
                let _ = writeln!(text, "{coords},{inner},{outer}");
            }
            None => {
                let _ = writeln!(text, "{coords},,");
            }
        }
    }
    let extents_path = out.join("extents.csv");
    fs::write(&extents_path, text)
        .map_err(|e| Error::Validation(format!("{}: {e}", extents_path.display())))?;
    let sites_path = out.join("shape.csv");
    io::write_field_csv(
        &sites_path,
        sim.spec.d,
        "in_shape",
        &sim.shape
            .sites
            .iter()
            .map(|(x, c)| (x.clone(), *c, 1.0))
            .collect::<Vec<_>>(),
    )?;
    let manifest = RunManifest {
        command: "shape".into(),
        model_path: path,
        model_digest: digest,
        parameters: vec![
            ("n".into(), n),
            ("seed".into(), seed.to_string()),
            ("dirs".into(), grid.len().to_string()),
            ("tol_angle".into(), tol_angle.to_string()),
        ],
        outputs: vec![extents_path, sites_path],
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        topple_events: Some(sim.final_state.topple_events),
    };
    manifest.write(&out.join("manifest"))?;
    Ok(())
}

fn cmd_predict(model: ModelArgs, dirs: usize, out: PathBuf) -> Result<()> {
    let start = Instant::now();
    let (spec, digest, path) = load_with_overrides(&model)?;
    let kernel = krw_measure(&spec);
    ensure_out(&out)?;
    let grid = direction_grid(spec.d, default_dirs(spec.d, dirs), 0xD1CE);
    let sample = BoundarySample::sweep(&kernel, &grid)?;
    let curve = ShapeCurve {
        directions: grid.clone(),
        radii: sample.points.iter().map(|p| 1.0 / p.h).collect(),
        gammas: sample.points.iter().map(|p| p.h).collect(),
        boundary_points: sample.points.iter().map(|p| p.t.clone()).collect(),
    };
    let shape_path = out.join("shape.csv");
    io::write_shape_csv(&shape_path, &curve.directions, &curve.radii, &curve.gammas)?;
    let boundary_path = out.join("boundary.csv");
    io::write_boundary_csv(&boundary_path, &sample)?;
    let manifest = RunManifest {
        command: "predict".into(),
        model_path: path,
        model_digest: digest,
        parameters: vec![("dirs".into(), grid.len().to_string())],
        outputs: vec![shape_path, boundary_path],
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        topple_events: None,
    };
    manifest.write(&out.join("manifest"))?;
    Ok(())
}

/// Green tables for every source color on a common box.
fn all_green_tables(
    kernel: &JumpKernel,
    box_r: i32,
    eps_stop: f64,
) -> Result<Vec<GreenTable>> {
    (0..kernel.p)
        .map(|i0| green_table(kernel, i0, box_r, eps_stop))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_compare(
    model: ModelArgs,
    n: String,
    dirs: usize,
    seed: u64,
    box_r: Option<i32>,
    eps_stop: Option<f64>,
    tol_angle: f64,
    out: PathBuf,
) -> Result<()> {
    let start = Instant::now();
    let (spec, digest, path) = load_with_overrides(&model)?;
    let kernel = krw_measure(&spec);
    let grains = parse_f64_list(&n, "--n")?;
    if grains.is_empty() {
        return Err(Error::Parse("--n list is empty".into()));
    }
    ensure_out(&out)?;
    let grid = direction_grid(spec.d, default_dirs(spec.d, dirs), 0xD1CE);

    // Predicted decay rates.
    let curve = limit_shape(&kernel, &grid)?;
    let gamma_min = curve.gammas.iter().fold(f64::INFINITY, |m, &g| m.min(g));

    // Green tables sized to keep every requested N inside the certified box.
    let n_max = grains.iter().fold(0.0f64, |m, &v| m.max(v));
    let beta_guess = spec.min_threshold();
    let box_r = box_r.unwrap_or_else(|| suggested_box_radius(gamma_min, n_max, beta_guess, 10));
    let eps_stop = eps_stop.unwrap_or(1e-16);
    let tables = all_green_tables(&kernel, box_r, eps_stop)?;
    let (alpha, beta) = threshold_constants(&spec, &tables)?;
    let source_table = &tables[0];

    let mut report = String::new();
    let _ = writeln!(
        report,
        "alpha: {alpha}\nbeta: {beta}\ngamma_min: {gamma_min}\nbox_r: {box_r}\ndirs: {}",
        grid.len()
    );
    let _ = writeln!(
        report,
        "n,max_rel_dev_outer,mean_rel_dev_outer,sandwich_violations,shape_sites,topple_events"
    );
    println!("N, max_u |outer/logN - 1/gamma|/(1/gamma), sandwich violations");

    let mut outputs = Vec::new();
    let mut total_events = 0u64;
    for &n_grains in &grains {
        let initial = SandpileState::point_mass(spec.d, spec.p, n_grains, &vec![0; spec.d], 0);
        let (final_state, odometer) = stabilize(&spec, &initial, seed)?;
        total_events += final_state.topple_events;
        let visited = shape(&odometer);

        // Radial deviation against the predicted curve.
        let extents = radial_extents(&visited.union, &grid, tol_angle);
        let log_n = n_grains.ln();
        let mut max_dev = 0.0f64;
        let mut sum_dev = 0.0f64;
        let mut measured = 0usize;
        for (ext, &gamma) in extents.iter().zip(&curve.gammas) {
            if let Some((_, outer)) = ext {
                let predicted = 1.0 / gamma;
                let dev = (outer / log_n - predicted).abs() / predicted;
                max_dev = max_dev.max(dev);
                sum_dev += dev;
                measured += 1;
            }
        }
        let mean_dev = if measured > 0 {
            sum_dev / measured as f64
        } else {
            f64::NAN
        };

        // Threshold sandwich, exact per site and color.
        let violations = sandwich_violations(
            &spec,
            source_table,
            &odometer,
            n_grains,
            alpha,
            beta,
        )?;

        let _ = writeln!(
            report,
            "{n_grains},{max_dev},{mean_dev},{violations},{},{}",
            visited.sites.len(),
            final_state.topple_events
        );
        println!("{n_grains:>10}: {max_dev:.4}, {violations}");
    }
    let report_path = out.join("compare.csv");
    fs::write(&report_path, report)
        .map_err(|e| Error::Validation(format!("{}: {e}", report_path.display())))?;
    outputs.push(report_path);
    let shape_path = out.join("predicted_shape.csv");
    io::write_shape_csv(&shape_path, &curve.directions, &curve.radii, &curve.gammas)?;
    outputs.push(shape_path);

    let manifest = RunManifest {
        command: "compare".into(),
        model_path: path,
        model_digest: digest,
        parameters: vec![
            ("n".into(), n),
            ("dirs".into(), grid.len().to_string()),
            ("seed".into(), seed.to_string()),
            ("box_r".into(), box_r.to_string()),
            ("eps_stop".into(), eps_stop.to_string()),
            ("tol_angle".into(), tol_angle.to_string()),
            ("alpha".into(), alpha.to_string()),
            ("beta".into(), beta.to_string()),
        ],
        outputs,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        topple_events: Some(total_events),
    };
    manifest.write(&out.join("manifest"))?;
    Ok(())
}

/// Counts sandwich violations: a site with `G > alpha/N` must be in the
/// shape; a site of the shape must have `G >= beta/N`.
pub fn sandwich_violations(
    spec: &ModelSpec,
    table: &GreenTable,
    odometer: &crate::sandpile::Odometer,
    n_grains: f64,
    alpha: f64,
    beta: f64,
) -> Result<usize> {
    let mut violations = 0usize;
    let hi = alpha / n_grains;
    let lo = beta / n_grains;
    if lo <= 10.0 * table.tail_bound {
        return Err(Error::OutOfRange(
            "beta/N below the green noise floor; rebuild with smaller eps_stop".into(),
        ));
    }
    table.for_each(|x, color, g| {
        if g > hi && odometer.topples(x, color) <= 0.0 {
            violations += 1;
        }
    });
    for (x, color) in &shape(odometer).sites {
        if !table.contains(x) {
            violations += 1; // escaped the certified box: count loudly
            continue;
        }
        if table.get(x, *color) < lo {
            violations += 1;
        }
    }
    Ok(violations)
}

fn cmd_polytope(model: ModelArgs, cap: usize, out: PathBuf) -> Result<()> {
    let start = Instant::now();
    let (spec, digest, path) = load_with_overrides(&model)?;
    let kernel = krw_measure(&spec);
    ensure_out(&out)?;
    let x = cycle_points(&kernel, cap)?;
    let mut outputs = Vec::new();
    let points_path = out.join("cycle_points.csv");
    {
        let mut text = String::new();
        for k in 1..=spec.d {
            let _ = write!(text, "x_{k},");
        }
        let _ = writeln!(text, "cycle_length");
        let mut rows: Vec<(Vec<f64>, usize)> = x
            .points
            .iter()
            .cloned()
            .zip(x.cycles.iter().map(|(q, _)| *q))
            .collect();
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (pt, q) in rows {
            let _ = writeln!(
                text,
                "{},{q}",
                pt.iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            );
        }
        fs::write(&points_path, text)
            .map_err(|e| Error::Validation(format!("{}: {e}", points_path.display())))?;
    }
    outputs.push(points_path);
    if spec.d <= 3 {
        let hull = convex_hull(&x.points, spec.d)?;
        let hull_path = out.join("polytope.csv");
        io::write_polytope_csv(&hull_path, &hull)?;
        outputs.push(hull_path);
        println!(
            "{} cycle points, hull with {} vertices",
            x.points.len(),
            hull.vertices.len()
        );
    } else {
        println!(
            "{} cycle points (hull skipped for d = {})",
            x.points.len(),
            spec.d
        );
    }
    let manifest = RunManifest {
        command: "polytope".into(),
        model_path: path,
        model_digest: digest,
        parameters: vec![("cap".into(), cap.to_string())],
        outputs,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        topple_events: None,
    };
    manifest.write(&out.join("manifest"))?;
    Ok(())
}

fn cmd_ellipsoid(model: ModelArgs, out: PathBuf) -> Result<()> {
    let start = Instant::now();
    let (spec, digest, path) = load_with_overrides(&model)?;
    let tilde = non_killed_kernel(&spec);
    ensure_out(&out)?;
    let ellipsoid = zero_leak_ellipsoid(&tilde)?;
    let e_path = out.join("ellipsoid.csv");
    io::write_ellipsoid_csv(&e_path, &ellipsoid)?;
    let manifest = RunManifest {
        command: "ellipsoid".into(),
        model_path: path,
        model_digest: digest,
        parameters: vec![],
        outputs: vec![e_path],
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        topple_events: None,
    };
    manifest.write(&out.join("manifest"))?;
    Ok(())
}

fn cmd_first_passage(model: ModelArgs, n: String, out: PathBuf) -> Result<()> {
    let start = Instant::now();
    let (spec, digest, path) = load_with_overrides(&model)?;
    let kernel = krw_measure(&spec);
    ensure_out(&out)?;
    let steps: Vec<usize> = n
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad --n entry {s}")))
        })
        .collect::<Result<_>>()?;
    let mut outputs = Vec::new();
    let mut report = String::from("n,sites,hausdorff_to_hull\n");
    let hull_samples = if spec.d <= 3 {
        let x = cycle_points(&kernel, 1_000_000)?;
        let hull = convex_hull(&x.points, spec.d)?;
        Some(sample_polytope_boundary(&hull, 24))
    } else {
        None
    };
    for &n_steps in &steps {
        let fp = first_passage_set(&kernel, n_steps)?;
        let fp_path = out.join(format!("a_{n_steps}.csv"));
        io::write_field_csv(
            &fp_path,
            spec.d,
            "reached",
            &fp.sites
                .iter()
                .map(|(x, c)| (x.clone(), *c, 1.0))
                .collect::<Vec<_>>(),
        )?;
        outputs.push(fp_path);
        let dh = match &hull_samples {
            Some(samples) => hausdorff(samples, &fp.scaled)?.to_string(),
            None => String::new(),
        };
        let _ = writeln!(report, "{n_steps},{},{dh}", fp.sites.len());
    }
    let report_path = out.join("first_passage.csv");
    fs::write(&report_path, report)
        .map_err(|e| Error::Validation(format!("{}: {e}", report_path.display())))?;
    outputs.push(report_path);
    let manifest = RunManifest {
        command: "first-passage".into(),
        model_path: path,
        model_digest: digest,
        parameters: vec![("n".into(), n)],
        outputs,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        topple_events: None,
    };
    manifest.write(&out.join("manifest"))?;
    Ok(())
}

/// Boundary samples of a polytope: vertices, edge subdivisions, and facet
/// grids (enough resolution for the Hausdorff measurements used here).
pub fn sample_polytope_boundary(p: &Polytope, per_edge: usize) -> Vec<Vec<f64>> {
    let mut samples = p.vertices.clone();
    for (i, a) in p.vertices.iter().enumerate() {
        for b in p.vertices.iter().skip(i + 1) {
            // Skip non-edges for d = 3 by keeping only pairs sharing 2 facets.
            if p.d == 3 {
                let shared = p
                    .facets
                    .iter()
                    .filter(|f| {
                        let on = |x: &Vec<f64>| {
                            (crate::lattice::dot(&f.normal, x) - f.offset).abs() < 1e-9
                        };
                        on(a) && on(b)
                    })
                    .count();
                if shared < 2 {
                    continue;
                }
            }
            for k in 1..per_edge {
                let t = k as f64 / per_edge as f64;
                samples.push(
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| x + t * (y - x))
                        .collect::<Vec<f64>>(),
                );
            }
        }
    }
    if p.d == 3 {
        for f in &p.facets {
            let on_facet: Vec<&Vec<f64>> = p
                .vertices
                .iter()
                .filter(|v| (crate::lattice::dot(&f.normal, v) - f.offset).abs() < 1e-9)
                .collect();
            if on_facet.len() < 3 {
                continue;
            }
            // Barycentric grid over the facet's vertex fan.
            for i in 1..on_facet.len() - 1 {
                let tri = [on_facet[0], on_facet[i], on_facet[i + 1]];
                let steps = per_edge / 2;
                for a in 0..=steps {
                    for b in 0..=(steps - a) {
                        let c = steps - a - b;
                        let w = [a as f64, b as f64, c as f64].map(|x| x / steps as f64);
                        let pt: Vec<f64> = (0..3)
                            .map(|k| {
                                w[0] * tri[0][k] + w[1] * tri[1][k] + w[2] * tri[2][k]
                            })
                            .collect();
                        samples.push(pt);
                    }
                }
            }
        }
    }
    samples
}

use crate::geometry::Polytope;

fn cmd_render(
    model: ModelArgs,
    n: String,
    seed: u64,
    slice: Option<String>,
    out: PathBuf,
) -> Result<()> {
    let start = Instant::now();
    let (sim, digest, path) = simulate_once(&model, &n, seed, &None, 1)?;
    ensure_out(&out)?;
    let slice_parsed = match &slice {
        None => None,
        Some(s) => {
            let (axis, value) = s
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("--slice expects AXIS=VALUE, got {s}")))?;
            let axis: usize = axis
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad slice axis in {s}")))?;
            let value: i32 = value
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad slice value in {s}")))?;
            if axis == 0 || axis > sim.spec.d {
                return Err(Error::Parse(format!("slice axis {axis} out of range")));
            }
            Some((axis - 1, value))
        }
    };
    let thresholds: Vec<f64> = (0..sim.spec.p).map(|c| sim.spec.threshold(c)).collect();
    let mut outputs = io::render_ppm(&out, "final", &sim.final_state, &thresholds, slice_parsed)?;

    if sim.spec.d == 2 {
        let mut overlay = io::SvgOverlay::new();
        overlay.add_points(
            sim.shape
                .union
                .iter()
                .map(|x| x.iter().map(|&c| c as f64).collect()),
            "black",
        );
        let grid = direction_grid(2, 360, 0xD1CE);
        let curve = limit_shape(&sim.kernel, &grid)?;
        let log_n = sim.n.ln();
        let predicted = curve.as_star_body()?.scaled(log_n);
        overlay.add_star_body(&predicted, "crimson", "log N x predicted curve".into());
        // Large-leakiness polytope and vanishing-leak ellipse, scaled to the
        // same picture for visual comparison.
        if let Ok(x) = cycle_points(&sim.kernel, 1_000_000) {
            if let Ok(hull) = convex_hull(&x.points, 2) {
                if !hull.degenerate {
                    let m_min = sim
                        .spec
                        .leakiness
                        .iter()
                        .copied()
                        .filter(|&m| m > 1.0)
                        .fold(f64::INFINITY, f64::min);
                    let scale = log_n / m_min.ln();
                    let mut ring: Vec<Vec<f64>> = hull
                        .vertices
                        .iter()
                        .map(|v| v.iter().map(|c| c * scale).collect())
                        .collect();
                    ring.sort_by(|a, b| {
                        a[1].atan2(a[0]).partial_cmp(&b[1].atan2(b[0])).unwrap()
                    });
                    overlay.add_curve(ring, "seagreen", "log N / log m x polytope".into());
                }
            }
        }
        if let Ok(e) = zero_leak_ellipsoid(&non_killed_kernel(&sim.spec)) {
            let m_min = sim
                .spec
                .leakiness
                .iter()
                .copied()
                .filter(|&m| m > 1.0)
                .fold(f64::INFINITY, f64::min);
            let scale = log_n / (m_min - 1.0).sqrt();
            let ring: Vec<Vec<f64>> = grid
                .iter()
                .map(|u| {
                    let r = e.radius(u) * scale;
                    u.iter().map(|c| c * r).collect()
                })
                .collect();
            overlay.add_curve(ring, "royalblue", "log N / sqrt(m-1) x ellipsoid".into());
        }
        let svg_path = out.join("overlay.svg");
        overlay.write(&svg_path)?;
        outputs.push(svg_path);
    }

    let max_radius = sim
        .shape
        .union
        .iter()
        .map(|x| norm_i32(x))
        .fold(0.0f64, f64::max);
    let manifest = RunManifest {
        command: "render".into(),
        model_path: path,
        model_digest: digest,
        parameters: vec![
            ("n".into(), n),
            ("seed".into(), seed.to_string()),
            ("slice".into(), slice.unwrap_or_default()),
            ("max_radius".into(), max_radius.to_string()),
        ],
        outputs,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        topple_events: Some(sim.final_state.topple_events),
    };
    manifest.write(&out.join("manifest"))?;
    Ok(())
}
