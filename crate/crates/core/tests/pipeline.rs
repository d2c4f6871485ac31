use std::path::PathBuf;

use camtomo_core::geometry::{Cam, Hypersurface, ParamBox, StereographicPatch};
use camtomo_core::harness::{run_convergence, run_roundtrip, ConvergenceSpec, Experiment, ExperimentConfig, GridSpec, RunOptions};
use camtomo_core::inversion::{delta_pairing, finite_part, InversionOptions, Reconstructor};
use camtomo_core::slicing::SampledSurface;
use camtomo_core::sphere::CamGrid;
use camtomo_core::transform::{forward, project, Sinogram};
use camtomo_core::Error;
use serde_json::json;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn small() -> ExperimentConfig {
    let mut c = ExperimentConfig::default_cap();
    c.grids = GridSpec { cam: vec![32, 64], surface: vec![64, 64], cam_slice: None, points: 6 };
    c
}

#[test]
fn shipped_configs_match_the_presets() {
    let cases = [
        ("default_cap.toml", ExperimentConfig::default_cap()),
        ("funk.toml", ExperimentConfig::funk()),
        ("cap3.toml", ExperimentConfig::cap3()),
        ("conformal.toml", ExperimentConfig::conformal()),
        ("large_cam.toml", ExperimentConfig::large_cam()),
    ];
    for (file, preset) in cases {
        let loaded = ExperimentConfig::load(&configs_dir().join(file)).unwrap();
        assert_eq!(loaded, preset, "{file}");
        assert_eq!(loaded.hash(), preset.hash(), "{file}");
    }
}

#[test]
fn sinogram_json_round_trip_is_exact() {
    let exp = Experiment::new(&small()).unwrap();
    let sino = exp.project(&exp.sampled().unwrap()).unwrap().sinogram;
    let back = Sinogram::<f64>::from_json(&sino.to_json().unwrap()).unwrap();
    assert_eq!(back.values(), sino.values());
    assert_eq!(back.nodes_flat(), sino.nodes_flat());
    assert_eq!(back.meta, sino.meta);
}

#[test]
fn invert_refuses_a_foreign_sinogram() {
    let a = Experiment::new(&small()).unwrap();
    let sino = a.project(&a.sampled().unwrap()).unwrap().sinogram;
    let mut other = small();
    other.surface = camtomo_core::harness::SurfaceSpec::SphericalCap { n: 2, radius: 1.0, height: 0.35 };
    let b = Experiment::new(&other).unwrap();
    assert!(matches!(b.invert(&sino), Err(Error::HashMismatch { .. })));
}

#[test]
fn failed_validation_stops_the_round_trip_unless_forced() {
    let mut c = ExperimentConfig::large_cam();
    c.grids = small().grids;
    c.conditions = camtomo_core::conditions::ConditionSampling::quick();
    let err = run_roundtrip(&c, &RunOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Validation(_)), "{err}");
    let forced = run_roundtrip(&c, &RunOptions { force: true, ..RunOptions::default() }).unwrap();
    assert!(!forced.validation.unwrap().passed());
}

#[test]
fn outputs_carry_the_config_hash() {
    let c = small();
    let dir = tempfile::tempdir().unwrap();
    let out = run_roundtrip(&c, &RunOptions { skip_validation: true, output_dir: Some(dir.path().into()), ..RunOptions::default() })
        .unwrap();
    let tag = format!("config_hash={}", c.hash());
    for f in ["field.csv", "normalizer.csv"] {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(text.lines().next().unwrap().contains(&tag), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config_hash"], json!(c.hash()));
    let sino = Sinogram::<f64>::read_json(&dir.path().join("sinogram.json")).unwrap();
    assert_eq!(sino.meta.hash, out.report.geometry_hash);
    assert_eq!(sino.meta.config_hash.as_deref(), Some(c.hash().as_str()));
}

#[test]
fn convergence_table_is_reproducible() {
    let mut c = small();
    c.convergence = ConvergenceSpec { divisors: vec![2, 1] };
    let a = run_convergence(&c).unwrap();
    let b = run_convergence(&c).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 2);
    let mut csv = Vec::new();
    a.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3);
    assert!(text.contains("h,linf,l2"));
}

#[test]
fn parity_dispatch_rejects_the_wrong_branch() {
    let exp = Experiment::new(&small()).unwrap();
    let sino = exp.project(&exp.sampled().unwrap()).unwrap().sinogram;
    let x = exp.surface.point(&[0.1, 0.05]);
    assert!(finite_part(&sino, &exp.cam, &x, &exp.options.schedule).is_ok());
    assert!(matches!(delta_pairing(&sino, &exp.cam, &x, &exp.options.schedule), Err(Error::Precondition(_))));
}

#[test]
fn points_outside_the_domain_are_rejected() {
    let exp = Experiment::new(&small()).unwrap();
    let sino = exp.project(&exp.sampled().unwrap()).unwrap().sinogram;
    let rec = Reconstructor::new(&sino, &exp.cam, &exp.surface, None, exp.options.clone()).unwrap();
    assert!(rec.point(&[5.0, 0.0]).is_err());
}

#[test]
fn single_precision_tracks_double_precision() {
    let mut c = small();
    c.grids.points = 3;
    let exp = Experiment::new(&c).unwrap();
    let p = exp.probe_cam_points(4).remove(0);
    let v64 = forward(&exp.phantom.field, &p, &exp.cam, &exp.sampled().unwrap()).unwrap();

    let cam = Cam::<f32>::sphere(vec![0.0; 3], 0.3).unwrap();
    let surface = Hypersurface::new(StereographicPatch::<f32>::spherical_cap(2, 1.0, 0.4).unwrap());
    let sampled = SampledSurface::new(surface.clone(), &c.grids.surface).unwrap();
    let field = camtomo_core::transform::ScalarField::<f32>::new(
        |u: &[f32]| {
            let t = ((u[0] - 0.1).powi(2) + (u[1] - 0.05).powi(2)) / 0.09;
            if t < 1.0 {
                (1.0 - 1.0 / (1.0 - t)).exp()
            } else {
                0.0
            }
        },
        vec![ParamBox::new(vec![-0.2, -0.25], vec![0.4, 0.35])],
        camtomo_core::transform::Smoothness::Infinite,
        json!("bump32"),
    );
    let omega: Vec<f32> = p.omega.iter().map(|&v| v as f32).collect();
    let v32 = forward(&field, &cam.point_at(&omega), &cam, &sampled).unwrap();
    assert!(((v32 as f64) - v64).abs() < 1e-4 * (1.0 + v64.abs()), "{v32} vs {v64}");

    let grid = CamGrid::<f32>::product(2, &c.grids.cam).unwrap();
    let sino = project(&field, &cam, &sampled, &grid).unwrap();
    let rec = Reconstructor::new(&sino, &cam, &surface, None, InversionOptions::for_dim(2)).unwrap();
    let value = rec.point(&[0.1, 0.05]).unwrap().value;
    assert!((value - 1.0).abs() < 0.2, "{value}");
}
