//! Experiment configuration, phantoms, round-trip and convergence drivers, and output files.

mod config;
mod phantom;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conditions::{validate, ValidationReport};
use crate::error::{Error, Result};
use crate::geometry::{Cam, CamPoint, Hypersurface};
use crate::inversion::{support_points, InversionOptions, ReconstructionReport, Reconstructor};
use crate::slicing::{default_cam_slice_cells, slice_on_cam, slice_on_x, SampledSurface};
use crate::sphere::CamGrid;
use crate::transform::{geometry_hash, project_detailed, Projection, Sinogram};

pub use config::{
    AffineSpec, CamSpec, ConvergenceSpec, ExperimentConfig, GridSpec, MetricSpec, OutputSpec, SurfaceSpec, CONFIG_VERSION,
};
pub use phantom::{bump_profile, make_phantom, BumpSpec, Phantom, PhantomSpec};

/// A configuration turned into geometry, grids and phantom.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub cam: Cam<f64>,
    pub surface: Hypersurface<f64>,
    pub phantom: Phantom,
    pub cam_grid: CamGrid<f64>,
    pub options: InversionOptions,
}

impl Experiment {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.check()?;
        let n = config.n();
        let (cam, surface) = config.geometry()?;
        let phantom = make_phantom(&config.phantom, &config.surface, &surface.domain(), &config.grids.surface)?;
        let cam_grid = CamGrid::product(n, &config.grids.cam)?;
        let options = InversionOptions {
            schedule: config.schedule,
            cam_slice_cells: config.grids.cam_slice.clone().unwrap_or_else(|| default_cam_slice_cells(n)),
        };
        Ok(Self { config: config.clone(), cam, surface, phantom, cam_grid, options })
    }

    pub fn n(&self) -> usize {
        self.config.n()
    }

    pub fn config_hash(&self) -> String {
        self.config.hash()
    }

    pub fn geometry_hash(&self) -> String {
        geometry_hash(&self.cam, &self.surface, &self.config.grids.cam, &self.config.grids.surface)
    }

    pub fn sampled(&self) -> Result<SampledSurface<f64>> {
        SampledSurface::new(self.surface.clone(), &self.config.grids.surface)
    }

    /// Evaluation points: the configured tensor grid over the support box, kept inside the support.
    pub fn eval_points(&self) -> Vec<Vec<f64>> {
        support_points(&self.phantom.field, self.config.grids.points)
    }

    /// `count` deterministic cam points whose slices cross the phantom support.
    pub fn probe_cam_points(&self, count: usize) -> Vec<CamPoint<f64>> {
        let boxes = self.phantom.field.support();
        if boxes.is_empty() {
            return Vec::new();
        }
        let n = self.n();
        (0..count)
            .filter_map(|k| {
                let b = &boxes[k % boxes.len()];
                let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / count as f64;
                let u: Vec<f64> = (0..n)
                    .map(|a| {
                        let mid = 0.5 * (b.lo[a] + b.hi[a]);
                        mid + 0.25 * b.width(a) * (t * (a + 1) as f64).cos()
                    })
                    .collect();
                let x = self.surface.point(&u);
                self.cam.omega_through(&x, 1.7 * t).map(|w| self.cam.point_at(&w))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<ValidationReport> {
        validate(&self.surface, &self.cam, &self.config.conditions)
    }

    pub fn project(&self, sampled: &SampledSurface<f64>) -> Result<Projection<f64>> {
        let mut projection = project_detailed(&self.phantom.field, &self.cam, sampled, &self.cam_grid)?;
        projection.sinogram.meta.config_hash = Some(self.config_hash());
        Ok(projection)
    }

    /// Reconstruction at the evaluation points; the sinogram must carry this geometry's hash.
    pub fn invert(&self, sinogram: &Sinogram<f64>) -> Result<ReconstructionReport> {
        let hash = self.geometry_hash();
        let rec = Reconstructor::new(sinogram, &self.cam, &self.surface, Some(&hash), self.options.clone())?;
        let mut report = rec.grid(&self.eval_points(), Some(&self.phantom.field))?;
        report.config_hash = Some(self.config_hash());
        Ok(report)
    }
}

/// Switches for [`run_roundtrip`].
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Continue when validation fails.
    pub force: bool,
    pub skip_validation: bool,
    pub output_dir: Option<PathBuf>,
    pub dump_slices: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct RoundtripOutcome {
    pub report: ReconstructionReport,
    pub sinogram: Sinogram<f64>,
    pub validation: Option<ValidationReport>,
    pub boundary_touches: usize,
    pub pruned: usize,
    pub written: Vec<PathBuf>,
}

fn failing_conditions(v: &ValidationReport) -> String {
    v.reports
        .iter()
        .filter(|r| r.status != crate::conditions::Status::Pass)
        .map(|r| format!("{} {} (value {:.6e}, witness {:?})", r.condition, r.status, r.value, r.witness))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Validation (unless skipped) then project, reconstruct and write the artifacts.
pub fn run_roundtrip(config: &ExperimentConfig, opts: &RunOptions) -> Result<RoundtripOutcome> {
    let exp = Experiment::new(config).map_err(|e| e.in_stage("setup"))?;
    let validation = if opts.skip_validation {
        None
    } else {
        let v = exp.validate().map_err(|e| e.in_stage("validate"))?;
        if !v.passed() && !opts.force {
            return Err(Error::Validation(failing_conditions(&v)));
        }
        Some(v)
    };
    let sampled = exp.sampled().map_err(|e| e.in_stage("sample"))?;
    let projection = exp.project(&sampled).map_err(|e| e.in_stage("project"))?;
    let mut report = exp.invert(&projection.sinogram).map_err(|e| e.in_stage("invert"))?;
    report.conditions = validation.as_ref().map(|v| serde_json::to_value(v).expect("report serializes"));
    let mut written = Vec::new();
    if let Some(dir) = opts.output_dir.as_ref().or(config.outputs.dir.as_ref()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::from(e).in_stage("write"))?;
        let sino_path = dir.join("sinogram.json");
        projection.sinogram.write_json(&sino_path).map_err(|e| e.in_stage("write"))?;
        written.push(sino_path);
        written.extend(emit_plot_data(&report, dir).map_err(|e| e.in_stage("write"))?);
    }
    if let Some(dir) = &opts.dump_slices {
        written.extend(dump_slices(&exp, &sampled, &projection.sinogram, dir, 4).map_err(|e| e.in_stage("dump"))?);
    }
    Ok(RoundtripOutcome {
        report,
        sinogram: projection.sinogram,
        validation,
        boundary_touches: projection.boundary_touches,
        pruned: projection.pruned,
        written,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub divisor: usize,
    pub cam: Vec<usize>,
    pub surface: Vec<usize>,
    /// Angular step of the cam grid.
    pub h: f64,
    pub linf: f64,
    pub l2: f64,
    pub calibration: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub config_hash: String,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of log error against log h.
    pub order_linf: f64,
    pub order_l2: f64,
    /// Errors never grow by more than 10% from one level to the next finer one.
    pub monotone: bool,
}

impl ConvergenceTable {
    /// `h,linf,l2` per level.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "# config_hash={}", self.config_hash)?;
        writeln!(out, "h,linf,l2")?;
        for r in &self.rows {
            writeln!(out, "{:e},{:e},{:e}", r.h, r.linf, r.l2)?;
        }
        Ok(())
    }
}

/// Slope of the least-squares line through `(log x, log y)`.
pub fn observed_order(h: &[f64], err: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = h.iter().zip(err).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    let m = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    num / den
}

/// Round trips at the configured refinement levels (validation skipped), coarsest first.
pub fn run_convergence(config: &ExperimentConfig) -> Result<ConvergenceTable> {
    let mut rows = Vec::new();
    for &divisor in &config.convergence.divisors {
        let cfg = config.coarsened(divisor);
        let out = run_roundtrip(&cfg, &RunOptions { skip_validation: true, ..RunOptions::default() })?;
        let m = out.report.metrics.clone().expect("phantom supplies the truth");
        rows.push(ConvergenceRow {
            divisor,
            cam: cfg.grids.cam.clone(),
            surface: cfg.grids.surface.clone(),
            h: out.sinogram.spacing(),
            linf: m.linf_rel,
            l2: m.l2_rel,
            calibration: m.calibration,
        });
    }
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let linf: Vec<f64> = rows.iter().map(|r| r.linf).collect();
    let l2: Vec<f64> = rows.iter().map(|r| r.l2).collect();
    let grows = |e: &[f64]| e.windows(2).any(|w| w[1] > 1.1 * w[0]);
    Ok(ConvergenceTable {
        config_hash: config.hash(),
        order_linf: observed_order(&h, &linf),
        order_l2: observed_order(&h, &l2),
        monotone: !grows(&linf) && !grows(&l2),
        rows,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `report.json`, `field.csv` and `normalizer.csv` into `dir`.
pub fn emit_plot_data(report: &ReconstructionReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let report_path = dir.join("report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(report)?)?;
    let field_path = dir.join("field.csv");
    let mut w = create(&field_path)?;
    report.write_csv(&mut w)?;
    w.flush()?;
    let delta_path = dir.join("normalizer.csv");
    let mut w = create(&delta_path)?;
    write_hash_line(&mut w, report)?;
    let mut header: Vec<String> = (0..report.n).map(|i| format!("u{}", i + 1)).collect();
    header.push("delta".into());
    writeln!(w, "{}", header.join(","))?;
    for p in &report.points {
        let mut row: Vec<String> = p.u.iter().map(|v| format!("{v:e}")).collect();
        row.push(format!("{:e}", p.normalizer));
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(vec![report_path, field_path, delta_path])
}

fn write_hash_line(w: &mut impl Write, report: &ReconstructionReport) -> Result<()> {
    if let Some(h) = &report.config_hash {
        writeln!(w, "# config_hash={h}")?;
    }
    writeln!(w, "# geometry_hash={}", report.geometry_hash)?;
    Ok(())
}

/// Slices on X for up to `count` cam nodes with nonzero data and slices on the cam at the first
/// `count` evaluation points, as CSV.
pub fn dump_slices(
    exp: &Experiment,
    sampled: &SampledSurface<f64>,
    sinogram: &Sinogram<f64>,
    dir: &Path,
    count: usize,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let nonzero: Vec<usize> = (0..sinogram.len()).filter(|&k| sinogram.values()[k] != 0.0).collect();
    let stride = (nonzero.len() / count.max(1)).max(1);
    for &k in nonzero.iter().step_by(stride).take(count) {
        let p = exp.cam.point_at(sinogram.node(k));
        let slice = slice_on_x(sampled, &exp.cam, &p, None)?;
        let path = dir.join(format!("slice_x_{k}.csv"));
        slice.dump_csv(&path)?;
        written.push(path);
    }
    for (i, u) in exp.eval_points().iter().take(count).enumerate() {
        let x = exp.surface.point(u);
        let slice = slice_on_cam(&x, &exp.cam, &exp.options.cam_slice_cells)?;
        let path = dir.join(format!("slice_cam_{i}.csv"));
        slice.dump_csv(&path)?;
        written.push(path);
    }
    Ok(written)
}
