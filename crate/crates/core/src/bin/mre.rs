//! Command-line harness: single runs, reference trajectories, convergence
//! studies, work-precision tables and gridded-field conversion.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mre_core::bench::{
    run_convergence, run_scheme, run_work_precision, BenchmarkConfig, FieldSpec, Scheme,
};
use mre_core::gridded::{write_grid_series, GridSeries};
use mre_core::reference::reference_trajectory;
use mre_core::stepper::Trajectory;
use mre_core::{Error, FlowField, FullSystem, PseudoGrid, Result};

#[derive(Parser)]
#[command(name = "mre", about = "Inertial particle transport with history effects", version)]
struct Cli {
    /// Seed recorded in metadata; consumed only by randomized test tooling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write it as CSV plus metadata.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also dump the assembled system matrix in Matrix Market format.
        #[arg(long)]
        dump_operator: Option<PathBuf>,
    },
    /// High-resolution reference trajectory with a self-convergence check.
    Reference {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convergence-order study over a resolution ladder.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Error against wall time over a resolution ladder.
    WorkPrecision {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Convert a CSV snapshot stack to the binary gridded-field format.
    GridConvert {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Single-trajectory configuration shared by `run` and `reference`.
#[derive(Debug, Serialize, Deserialize)]
struct RunConfig {
    field: FieldSpec,
    params: mre_core::params::ParamsConfig,
    y0: [f64; 2],
    q0: [f64; 2],
    t_end: f64,
    /// Ignored by `reference`, which always uses the high-order scheme.
    #[serde(default = "default_scheme")]
    scheme: Scheme,
    n: usize,
    #[serde(default = "default_grid_c")]
    grid_c: f64,
}

fn default_scheme() -> Scheme {
    "fd4+imex4".parse().expect("valid scheme name")
}

fn default_grid_c() -> f64 {
    10.0
}

#[derive(Debug, Serialize, Deserialize)]
struct GridConvertConfig {
    /// CSV with header `u,v`, nt*nx*ny rows ordered by snapshot, then grid
    /// row (y index), then column (x index).
    input: PathBuf,
    output_name: String,
    nx: usize,
    ny: usize,
    nt: usize,
    x0: f64,
    y0: f64,
    dx: f64,
    dy: f64,
    t0: f64,
    dt: f64,
}

#[derive(Debug, Serialize)]
struct RunMetadata {
    scheme: String,
    n: usize,
    grid_c: f64,
    dt: f64,
    t_end: f64,
    wall_time_s: f64,
    steps: usize,
    config_sha256: String,
    reference: bool,
    /// Only present for reference runs: maximum distance to the
    /// half-resolution run at shared times.
    #[serde(skip_serializing_if = "Option::is_none")]
    self_diff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<(T, String)> {
    let bytes = fs::read(path)?;
    let hash = hex::encode(Sha256::digest(&bytes));
    Ok((serde_json::from_slice(&bytes)?, hash))
}

fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut out = String::from("t,y1,y2,q1,q2\n");
    for (t, s) in traj.times.iter().zip(&traj.states) {
        out.push_str(&format!(
            "{t:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            s[2], s[3], s[0], s[1]
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn cmd_run(config: &Path, out: &Path, dump: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let (cfg, hash): (RunConfig, _) = read_config(config)?;
    ensure_dir(out)?;
    let field = cfg.field.build()?;
    let params = cfg.params.resolve()?;
    let y0 = Vector2::new(cfg.y0[0], cfg.y0[1]);
    let q0 = Vector2::new(cfg.q0[0], cfg.q0[1]);

    if let Some(path) = dump {
        dump_operator(&cfg, &field, &params, path)?;
    }

    let traj =
        run_scheme(cfg.scheme, &field, &params, y0, q0, cfg.n, cfg.t_end, cfg.grid_c)?;
    write_trajectory_csv(&traj, &out.join("trajectory.csv"))?;
    let meta = RunMetadata {
        scheme: cfg.scheme.to_string(),
        n: cfg.n,
        grid_c: cfg.grid_c,
        dt: cfg.t_end / cfg.n as f64,
        t_end: cfg.t_end,
        wall_time_s: traj.wall_time,
        steps: traj.steps,
        config_sha256: hash,
        reference: false,
        self_diff: None,
        seed,
    };
    fs::write(out.join("metadata.json"), serde_json::to_string_pretty(&meta)?)?;
    println!("wrote {} steps to {}", traj.steps, out.display());
    Ok(())
}

fn dump_operator(
    cfg: &RunConfig,
    field: &FlowField,
    params: &mre_core::MreParams,
    path: &Path,
) -> Result<()> {
    let grid = PseudoGrid::build(cfg.n, cfg.grid_c)?;
    let op = match cfg.scheme {
        Scheme::Fd { order: 4, .. } => mre_core::assemble_fd4(&grid, params)?,
        _ => mre_core::assemble_fd2(&grid, params),
    };
    let sys = FullSystem::new(op, field.clone(), *params);
    let file = fs::File::create(path)?;
    sys.dump_operator(std::io::BufWriter::new(file))
}

fn cmd_reference(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let (cfg, hash): (RunConfig, _) = read_config(config)?;
    ensure_dir(out)?;
    let field = cfg.field.build()?;
    let params = cfg.params.resolve()?;
    let y0 = Vector2::new(cfg.y0[0], cfg.y0[1]);
    let q0 = Vector2::new(cfg.q0[0], cfg.q0[1]);
    let dt = cfg.t_end / cfg.n as f64;
    let reference =
        reference_trajectory(&field, &params, y0, q0, cfg.grid_c, cfg.n, dt, cfg.t_end)?;
    write_trajectory_csv(&reference.trajectory, &out.join("trajectory.csv"))?;
    let meta = RunMetadata {
        scheme: "fd4+imex4".into(),
        n: cfg.n,
        grid_c: cfg.grid_c,
        dt,
        t_end: cfg.t_end,
        wall_time_s: reference.trajectory.wall_time,
        steps: reference.trajectory.steps,
        config_sha256: hash,
        reference: true,
        self_diff: Some(reference.self_diff),
        seed,
    };
    fs::write(out.join("metadata.json"), serde_json::to_string_pretty(&meta)?)?;
    println!(
        "reference at N = {} written; self-convergence distance {:.3e}",
        cfg.n, reference.self_diff
    );
    Ok(())
}

fn cmd_convergence(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let (cfg, hash): (BenchmarkConfig, _) = read_config(config)?;
    ensure_dir(out)?;
    let report = run_convergence(&cfg)?;
    fs::write(out.join("convergence.csv"), report.to_csv())?;
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    let meta = serde_json::json!({
        "config_sha256": hash,
        "config": cfg,
        "seed": seed,
    });
    fs::write(out.join("metadata.json"), serde_json::to_string_pretty(&meta)?)?;
    for r in &report.results {
        match r.order_fit {
            Some(p) => println!("{}: fitted order {p:.2}", r.scheme),
            None => println!("{}: unstable", r.scheme),
        }
    }
    Ok(())
}

fn cmd_work_precision(config: &Path, out: &Path, repeats: usize, seed: Option<u64>) -> Result<()> {
    let (cfg, hash): (BenchmarkConfig, _) = read_config(config)?;
    ensure_dir(out)?;
    let report = run_work_precision(&cfg, repeats)?;
    fs::write(out.join("workprec.csv"), report.to_csv())?;
    let meta = serde_json::json!({
        "config_sha256": hash,
        "config": cfg,
        "repeats": repeats.max(3),
        "seed": seed,
    });
    fs::write(out.join("metadata.json"), serde_json::to_string_pretty(&meta)?)?;
    println!("{} rows written to {}", report.rows.len(), out.display());
    Ok(())
}

fn cmd_grid_convert(config: &Path, out: &Path) -> Result<()> {
    let (cfg, _): (GridConvertConfig, _) = read_config(config)?;
    ensure_dir(out)?;
    let text = fs::read_to_string(&cfg.input)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("u,v") => {}
        other => {
            return Err(Error::Format {
                offset: 0,
                msg: format!("expected header \"u,v\", got {other:?}"),
            })
        }
    }
    let expected = cfg.nt * cfg.nx * cfg.ny;
    let mut u_data = Vec::with_capacity(expected);
    let mut v_data = Vec::with_capacity(expected);
    for (i, line) in lines.enumerate() {
        let (u, v) = line.split_once(',').ok_or_else(|| Error::Format {
            offset: 0,
            msg: format!("row {}: expected two comma-separated values", i + 2),
        })?;
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|e| Error::Format {
                offset: 0,
                msg: format!("row {}: {e}", i + 2),
            })
        };
        u_data.push(parse(u)?);
        v_data.push(parse(v)?);
    }
    if u_data.len() != expected {
        return Err(Error::Format {
            offset: 0,
            msg: format!("expected {expected} data rows, got {}", u_data.len()),
        });
    }
    // CSV order is snapshot-major with rows scanning x fastest, matching the
    // binary layout after regrouping per snapshot.
    let per = cfg.nx * cfg.ny;
    let mut u_blocks = Vec::with_capacity(expected);
    let mut v_blocks = Vec::with_capacity(expected);
    for it in 0..cfg.nt {
        u_blocks.extend_from_slice(&u_data[it * per..(it + 1) * per]);
        v_blocks.extend_from_slice(&v_data[it * per..(it + 1) * per]);
    }
    let g = GridSeries::new(
        cfg.nx, cfg.ny, cfg.nt, cfg.x0, cfg.y0, cfg.dx, cfg.dy, cfg.t0, cfg.dt, u_blocks,
        v_blocks,
    )?;
    let path = out.join(&cfg.output_name);
    write_grid_series(&g, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, out, dump_operator } => {
            cmd_run(config, out, dump_operator.as_deref(), cli.seed)
        }
        Command::Reference { config, out } => cmd_reference(config, out, cli.seed),
        Command::Convergence { config, out } => cmd_convergence(config, out, cli.seed),
        Command::WorkPrecision { config, out, repeats } => {
            cmd_work_precision(config, out, *repeats, cli.seed)
        }
        Command::GridConvert { config, out } => cmd_grid_convert(config, out),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
