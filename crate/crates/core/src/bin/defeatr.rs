use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use log::{error, info, warn};

use defeatr::experiments::verify::{verify_with, VerifyOptions};
use defeatr::experiments::{
    check_records, emit_csv, emit_svg, run_experiment_with, ExperimentConfig, ExperimentError, ExperimentKind,
    PlotKind, ResultRow,
};
use defeatr::mesh::parse_msh;
use defeatr::par::Execution;

#[derive(Parser)]
#[command(name = "defeatr", version, about = "Defeaturing error estimators for 2D Poisson problems")]
struct Cli {
    /// Run every loop sequentially.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep and write `<experiment>.csv` plus SVG plots.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suites.
    Verify {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a summary of a Gmsh 2.2 ASCII mesh.
    MeshInfo { path: PathBuf },
}

const FAILED: u8 = 1;
const USAGE: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let code = match cli.command {
        Command::Run { config, out } => run(exec, &config, out),
        Command::Verify { seed } => verify(exec, seed),
        Command::MeshInfo { path } => mesh_info(&path),
    };
    ExitCode::from(code)
}

fn plots(kind: ExperimentKind) -> &'static [PlotKind] {
    match kind {
        ExperimentKind::DdAngleSweep => &[PlotKind::ErrorVsAlpha],
        _ => &[PlotKind::ErrorVsSize, PlotKind::EffectivityVsSize],
    }
}

fn write_outputs(kind: ExperimentKind, rows: &[ResultRow], dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let csv = dir.join(format!("{}.csv", kind.name()));
    emit_csv(rows, &csv)?;
    info!("wrote {}", csv.display());
    for &plot in plots(kind) {
        let svg = dir.join(format!("{}_{}.svg", kind.name(), plot.name()));
        emit_svg(rows, &svg, plot)?;
        info!("wrote {}", svg.display());
    }
    Ok(())
}

fn run(exec: Execution, path: &Path, out: Option<PathBuf>) -> u8 {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            error!("cannot read {}: {e}", path.display());
            return USAGE;
        }
    };
    let mut config = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            error!("{}: {e}", path.display());
            return USAGE;
        }
    };
    if let Some(dir) = out {
        config.output_dir = dir;
    }

    let start = Instant::now();
    let records = match run_experiment_with(exec, &config) {
        Ok(r) => r,
        Err(ExperimentError::Config(e)) => {
            error!("{}: {e}", path.display());
            return USAGE;
        }
        Err(e) => {
            error!("{e}");
            return FAILED;
        }
    };
    info!(
        "{}: {} rows in {:.1} s",
        config.experiment.name(),
        records.len(),
        start.elapsed().as_secs_f64()
    );

    let rows: Vec<ResultRow> = records.iter().map(|r| r.row.clone()).collect();
    if let Err(e) = write_outputs(config.experiment, &rows, &config.output_dir) {
        error!("{e}");
        return USAGE;
    }
    let failures = check_records(&config, &records);
    for f in &failures {
        warn!("{f}");
    }
    if failures.is_empty() {
        0
    } else {
        FAILED
    }
}

fn verify(exec: Execution, seed: Option<u64>) -> u8 {
    let mut options = VerifyOptions {
        exec,
        ..Default::default()
    };
    if let Some(seed) = seed {
        options.seed = seed;
    }
    let report = verify_with(&options);
    print!("{report}");
    if report.passed() {
        0
    } else {
        FAILED
    }
}

fn mesh_info(path: &Path) -> u8 {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            error!("cannot read {}: {e}", path.display());
            return USAGE;
        }
    };
    let mesh = match parse_msh(&text) {
        Ok(m) => m,
        Err(e) => {
            error!("{}: {e}", path.display());
            return USAGE;
        }
    };
    println!("nodes      {}", mesh.num_nodes());
    println!("triangles  {}", mesh.num_triangles());
    println!("area       {:.6}", mesh.area());
    println!("min angle  {:.3} deg", mesh.min_angle_deg());
    println!("min edge   {:.3e}", mesh.min_edge_length());
    for (tag, facets) in mesh.facet_tags() {
        println!("facets     {tag}: {} edges, length {:.6}", facets.len(), mesh.facet_length(tag));
    }
    for (tag, tris) in mesh.element_tags() {
        println!("region     {tag}: {} triangles, area {:.6}", tris.len(), mesh.region_area(tag));
    }
    match mesh.validate() {
        Ok(()) => 0,
        Err(e) => {
            error!("invalid mesh: {e}");
            FAILED
        }
    }
}
