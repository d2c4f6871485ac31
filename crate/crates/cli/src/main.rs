use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use camtomo_core::harness::{
    dump_slices, emit_plot_data, run_convergence, run_roundtrip, Experiment, ExperimentConfig, RunOptions,
};
use camtomo_core::inversion::RegularizationSchedule;
use camtomo_core::transform::{forward, thin_slab_oracle, Sinogram};
use camtomo_core::Error;

const EXIT_VALIDATION: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "camtomo", version, about = "Cam-tangent Funk-Radon experiments: validate, project, invert")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Check the admissibility conditions and print the table.
    Validate(Common),
    /// Forward-project the phantom and write `sinogram.json`.
    Project(Common),
    /// Reconstruct from a sinogram written for the same geometry.
    Invert {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sinogram: PathBuf,
    },
    /// Validate, project, reconstruct and report errors against the phantom.
    Roundtrip(Common),
    /// Round trips at the configured refinement levels.
    Converge(Common),
    /// Quick consistency checks on a coarse default configuration.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    DefaultCap,
    Funk,
    Cap3,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file. Without it the preset is used.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "default-cap", conflicts_with = "config")]
    preset: Preset,
    /// Largest ε as a multiple of the cam-grid step.
    #[arg(long)]
    eps0: Option<f64>,
    /// Number of ε levels.
    #[arg(long)]
    levels: Option<usize>,
    /// Cam grid shape, e.g. `128x256`.
    #[arg(long, value_parser = parse_shape)]
    grid: Option<Shape>,
    /// Parameter grid shape, e.g. `256x256`.
    #[arg(long, value_parser = parse_shape)]
    surface_grid: Option<Shape>,
    /// Evaluation points per axis.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Continue when validation fails.
    #[arg(long)]
    force: bool,
    /// Write slice CSVs for a few cam nodes and evaluation points into this directory.
    #[arg(long)]
    dump_slices: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct Shape(Vec<usize>);

fn parse_shape(s: &str) -> Result<Shape, String> {
    s.split(['x', ','])
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad grid `{s}`: {e}")))
        .collect::<Result<Vec<_>, _>>()
        .map(Shape)
}

impl Common {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
            None => match self.preset {
                Preset::DefaultCap => ExperimentConfig::default_cap(),
                Preset::Funk => ExperimentConfig::funk(),
                Preset::Cap3 => ExperimentConfig::cap3(),
            },
        };
        if self.eps0.is_some() || self.levels.is_some() {
            let s = cfg.schedule;
            cfg.schedule = RegularizationSchedule::new(self.eps0.unwrap_or(s.eps0), s.step, self.levels.unwrap_or(s.levels))?;
        }
        if let Some(g) = &self.grid {
            cfg.grids.cam = g.0.clone();
        }
        if let Some(g) = &self.surface_grid {
            cfg.grids.surface = g.0.clone();
        }
        if let Some(p) = self.points {
            cfg.grids.points = p;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.outputs.dir = Some(o.clone());
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        cfg.outputs.dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e.root() {
                Error::Validation(_) => EXIT_VALIDATION,
                Error::Io(_) => EXIT_IO,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    1
}

fn validate_first(exp: &Experiment, force: bool) -> anyhow::Result<()> {
    let v = exp.validate()?;
    eprint!("{}", v.table());
    if !v.passed() && !force {
        bail!(Error::Validation("admissibility conditions failed (use --force to continue)".into()));
    }
    Ok(())
}

fn divergence_status(diverging: usize, total: usize) -> u8 {
    if diverging > 0 {
        eprintln!("warning: extrapolation diverging at {diverging} of {total} points");
        EXIT_DIVERGENCE
    } else {
        0
    }
}

fn run(verb: Verb) -> anyhow::Result<u8> {
    match verb {
        Verb::Validate(c) => {
            let cfg = c.config()?;
            let v = Experiment::new(&cfg)?.validate()?;
            print!("{}", v.table());
            Ok(if v.passed() { 0 } else { EXIT_VALIDATION })
        }
        Verb::Project(c) => {
            let cfg = c.config()?;
            let exp = Experiment::new(&cfg)?;
            validate_first(&exp, c.force)?;
            let sampled = exp.sampled()?;
            let projection = exp.project(&sampled)?;
            let dir = c.out_dir(&cfg);
            std::fs::create_dir_all(&dir).map_err(Error::from)?;
            let path = dir.join("sinogram.json");
            projection.sinogram.write_json(&path)?;
            if let Some(d) = &c.dump_slices {
                dump_slices(&exp, &sampled, &projection.sinogram, d, 4)?;
            }
            println!("wrote {} ({} nodes, geometry {})", path.display(), projection.sinogram.len(), exp.geometry_hash());
            Ok(0)
        }
        Verb::Invert { common: c, sinogram } => {
            let cfg = c.config()?;
            let exp = Experiment::new(&cfg)?;
            let sino = Sinogram::<f64>::read_json(&sinogram)?;
            let report = exp.invert(&sino)?;
            let dir = c.out_dir(&cfg);
            emit_plot_data(&report, &dir)?;
            print_metrics(&report);
            Ok(divergence_status(report.diverging_points, report.points.len()))
        }
        Verb::Roundtrip(c) => {
            let cfg = c.config()?;
            let dir = c.out_dir(&cfg);
            let opts = RunOptions { force: c.force, skip_validation: false, output_dir: Some(dir), dump_slices: c.dump_slices.clone() };
            let out = run_roundtrip(&cfg, &opts)?;
            if let Some(v) = &out.validation {
                eprint!("{}", v.table());
            }
            print_metrics(&out.report);
            Ok(divergence_status(out.report.diverging_points, out.report.points.len()))
        }
        Verb::Converge(c) => {
            let cfg = c.config()?;
            let table = run_convergence(&cfg)?;
            println!("{:>8} {:>14} {:>14} {:>12}", "h", "linf", "l2", "calibration");
            for r in &table.rows {
                println!("{:>8.5} {:>14.6e} {:>14.6e} {:>12.6}", r.h, r.linf, r.l2, r.calibration);
            }
            println!("order linf {:.3}, l2 {:.3}, monotone {}", table.order_linf, table.order_l2, table.monotone);
            let dir = c.out_dir(&cfg);
            std::fs::create_dir_all(&dir).map_err(Error::from)?;
            let file = std::fs::File::create(dir.join("convergence.csv")).map_err(Error::from)?;
            table.write_csv(std::io::BufWriter::new(file))?;
            std::fs::write(dir.join("convergence.json"), serde_json::to_string_pretty(&table)?).map_err(Error::from)?;
            Ok(0)
        }
        Verb::Selftest => selftest(),
    }
}

fn print_metrics(report: &camtomo_core::inversion::ReconstructionReport) {
    match &report.metrics {
        Some(m) => println!(
            "points {} | linf {:.4e} | l2 {:.4e} | calibration {:.6} | diverging {}",
            report.points.len(),
            m.linf_rel,
            m.l2_rel,
            m.calibration,
            report.diverging_points
        ),
        None => println!("points {} | diverging {}", report.points.len(), report.diverging_points),
    }
}

fn check(name: &str, ok: bool, detail: String) -> bool {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn selftest() -> anyhow::Result<u8> {
    let mut cfg = ExperimentConfig::default_cap();
    cfg.grids.cam = vec![48, 96];
    cfg.grids.surface = vec![96, 96];
    cfg.grids.points = 8;
    let exp = Experiment::new(&cfg)?;
    let sampled = exp.sampled()?;
    let mut ok = true;

    let p = exp.probe_cam_points(3).remove(1);
    let value = forward(&exp.phantom.field, &p, &exp.cam, &sampled)?;
    let oracle = thin_slab_oracle(&exp.phantom.field, &p, &exp.cam, &exp.surface, 1e-3, 200_000, cfg.seed)?;
    let tol = (0.01 * value.abs()).max(3.0 * oracle.stderr);
    ok &= check("forward vs thin slab", (value - oracle.value).abs() <= tol, format!("{value:.6} vs {:.6} ± {:.1e}", oracle.value, oracle.stderr));

    let out = run_roundtrip(&cfg, &RunOptions { skip_validation: true, ..RunOptions::default() })?;
    let m = out.report.metrics.clone().expect("phantom supplies the truth");
    ok &= check("coarse round trip", m.linf_rel < 0.15, format!("linf {:.3e}, calibration {:.4}", m.linf_rel, m.calibration));

    let v = exp.validate()?;
    ok &= check("default configuration is admissible", v.passed(), format!("{} conditions", v.reports.len()));
    Ok(if ok { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.verb) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
