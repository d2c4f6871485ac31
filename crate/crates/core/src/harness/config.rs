use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::conditions::ConditionSampling;
use crate::digest::canonical_hash;
use crate::error::{Error, Result};
use crate::geometry::{
    affine_pushforward, AffineMap, Cam, Chart, ConformalFactor, Hypersurface, Metric, MetricTransport, QuadraticGraph,
    StereographicPatch,
};
use crate::inversion::RegularizationSchedule;
use crate::linalg::Mat;

use super::phantom::{bump_profile, BumpSpec, PhantomSpec};

pub const CONFIG_VERSION: &str = "camtomo-config/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase", deny_unknown_fields)]
pub enum CamSpec {
    /// `matrix` wins over `radius`; `radius` alone is the sphere `A = I/radius²`.
    Ellipsoid {
        center: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<Vec<Vec<f64>>>,
    },
    Point { center: Vec<f64> },
}

impl CamSpec {
    pub fn build(&self) -> Result<Cam<f64>> {
        match self {
            CamSpec::Ellipsoid { center, matrix: Some(m), .. } => Cam::ellipsoid(center.clone(), Mat::from_rows(m)),
            CamSpec::Ellipsoid { center, radius: Some(r), matrix: None } => Cam::sphere(center.clone(), *r),
            CamSpec::Ellipsoid { .. } => Err(Error::Config("ellipsoid cam needs `radius` or `matrix`".into())),
            CamSpec::Point { center } => Ok(Cam::point(center.clone())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSpec {
    /// Patch of the sphere `|x| = radius` in E^{n+1} inscribed in `{x_{n+1} ≥ height}`.
    SphericalCap { n: usize, radius: f64, height: f64 },
    EllipsoidPatch { semi_axes: Vec<f64>, center: Vec<f64>, half_width: f64 },
    /// `x = (u, height + ½ Σ κᵢ uᵢ²)`.
    Graph { height: f64, curvatures: Vec<f64>, half_width: f64 },
}

impl SurfaceSpec {
    pub fn dim(&self) -> usize {
        match self {
            SurfaceSpec::SphericalCap { n, .. } => *n,
            SurfaceSpec::EllipsoidPatch { semi_axes, .. } => semi_axes.len().saturating_sub(1),
            SurfaceSpec::Graph { curvatures, .. } => curvatures.len(),
        }
    }

    pub fn chart(&self) -> Result<Arc<dyn Chart<f64>>> {
        Ok(match self {
            SurfaceSpec::SphericalCap { n, radius, height } => {
                Arc::new(StereographicPatch::spherical_cap(*n, *radius, *height)?)
            }
            SurfaceSpec::EllipsoidPatch { semi_axes, center, half_width } => {
                Arc::new(StereographicPatch::ellipsoid(semi_axes.clone(), center.clone(), *half_width)?)
            }
            SurfaceSpec::Graph { height, curvatures, half_width } => {
                Arc::new(QuadraticGraph::new(*height, curvatures.clone(), *half_width)?)
            }
        })
    }

    /// Semi-axis and center height along x_{n+1} for stereographic charts.
    pub(crate) fn polar_profile(&self) -> Option<(f64, f64)> {
        match self {
            SurfaceSpec::SphericalCap { radius, .. } => Some((*radius, 0.0)),
            SurfaceSpec::EllipsoidPatch { semi_axes, center, .. } => Some((*semi_axes.last()?, *center.last()?)),
            SurfaceSpec::Graph { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    #[default]
    Induced,
    /// `λ(u) · g_induced` with `λ = base + amplitude · bump(u)`.
    ConformalBump { base: f64, bump: BumpSpec },
    /// `λ(u) · g_induced` with λ an expression in `u1, u2, u3`.
    ConformalExpression { expression: String },
}

impl MetricSpec {
    pub fn factor(&self) -> Result<Option<ConformalFactor<f64>>> {
        Ok(match self {
            MetricSpec::Induced => None,
            MetricSpec::ConformalBump { base, bump } => {
                let (b, spec) = (*base, bump.clone());
                Some(ConformalFactor::new(
                    move |u: &[f64]| b + spec.amplitude * bump_profile(&spec.center, spec.width, u),
                    json!({ "base": b, "bump": bump }),
                ))
            }
            MetricSpec::ConformalExpression { expression } => {
                let tree = evalexpr::build_operator_tree(expression).map_err(|e| Error::Expression(e.to_string()))?;
                let probe = expression_value(&tree, &[0.0, 0.0, 0.0])?;
                if !probe.is_finite() {
                    return Err(Error::Expression(format!("`{expression}` is not finite at u = 0")));
                }
                let tree = Arc::new(tree);
                Some(ConformalFactor::new(
                    move |u: &[f64]| expression_value(&tree, u).unwrap_or(f64::NAN),
                    json!({ "expression": expression }),
                ))
            }
        })
    }
}

fn expression_value(tree: &evalexpr::Node, u: &[f64]) -> Result<f64> {
    use evalexpr::{ContextWithMutableVariables, HashMapContext, Value};
    let mut ctx = HashMapContext::new();
    for (i, &v) in u.iter().enumerate() {
        ctx.set_value(format!("u{}", i + 1), Value::Float(v)).map_err(|e| Error::Expression(e.to_string()))?;
    }
    tree.eval_number_with_context(&ctx).map_err(|e| Error::Expression(e.to_string()))
}

/// Optional affine map applied to cam and surface together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSpec {
    pub linear: Vec<Vec<f64>>,
    pub translation: Vec<f64>,
}

impl AffineSpec {
    pub fn build(&self) -> Result<AffineMap<f64>> {
        AffineMap::new(Mat::from_rows(&self.linear), self.translation.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Cam quadrature shape: `[polar, azimuth]` (n = 2) or `[χ, θ, φ]` (n = 3).
    pub cam: Vec<usize>,
    /// Parameter grid cells per axis.
    pub surface: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cam_slice: Option<Vec<usize>>,
    /// Evaluation points per axis over the phantom's support box.
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// Refinement levels as divisors of the configured grids, coarsest first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub divisors: Vec<usize>,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        Self { divisors: vec![4, 2, 1] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub seed: u64,
    pub cam: CamSpec,
    pub surface: SurfaceSpec,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine: Option<AffineSpec>,
    pub grids: GridSpec,
    #[serde(default)]
    pub schedule: RegularizationSchedule,
    pub phantom: PhantomSpec,
    #[serde(default)]
    pub conditions: ConditionSampling,
    #[serde(default)]
    pub convergence: ConvergenceSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn check(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!("unsupported config version `{}`, expected `{CONFIG_VERSION}`", self.version)));
        }
        let n = self.surface.dim();
        if !(2..=3).contains(&n) {
            return Err(Error::UnsupportedDimension(n));
        }
        if self.grids.cam.len() != n || self.grids.surface.len() != n {
            return Err(Error::Config(format!("grids must have {n} entries each")));
        }
        if self.grids.cam_slice.as_ref().is_some_and(|c| c.len() != n) {
            return Err(Error::Config(format!("grids.cam_slice must have {n} entries")));
        }
        if self.grids.points == 0 {
            return Err(Error::Config("grids.points must be positive".into()));
        }
        self.schedule.validate()?;
        if self.convergence.divisors.is_empty() || self.convergence.divisors.contains(&0) {
            return Err(Error::Config("convergence divisors must be positive".into()));
        }
        Ok(())
    }

    /// Hash of the canonical form, without output locations.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("outputs");
        }
        canonical_hash(&v)
    }

    pub fn n(&self) -> usize {
        self.surface.dim()
    }

    /// Cam and surface with metric and affine map applied.
    pub fn geometry(&self) -> Result<(Cam<f64>, Hypersurface<f64>)> {
        let cam = self.cam.build()?;
        let chart = self.surface.chart()?;
        let metric = match self.metric.factor()? {
            Some(f) => Metric::Conformal(f),
            None => Metric::Induced,
        };
        let surface = Hypersurface::from_arc(chart, metric);
        if cam.ambient_dim() != surface.ambient_dim() {
            return Err(Error::Config("cam and surface dimensions disagree".into()));
        }
        match &self.affine {
            Some(a) => affine_pushforward(&cam, &surface, &a.build()?, MetricTransport::Pullback),
            None => Ok((cam, surface)),
        }
    }

    /// Same experiment with every grid divided by `divisor` (at least 4 cells per axis).
    pub fn coarsened(&self, divisor: usize) -> Self {
        let div = |v: &Vec<usize>| v.iter().map(|&c| (c / divisor).max(4)).collect();
        let mut c = self.clone();
        c.grids.cam = div(&self.grids.cam);
        c.grids.surface = div(&self.grids.surface);
        c
    }

    /// Cap `{x₃ ≥ 0.4}` of the unit sphere, cam ball of radius 0.3 at the origin, one bump.
    pub fn default_cap() -> Self {
        Self {
            version: CONFIG_VERSION.into(),
            name: Some("default-cap".into()),
            seed: 7,
            cam: CamSpec::Ellipsoid { center: vec![0.0; 3], radius: Some(0.3), matrix: None },
            surface: SurfaceSpec::SphericalCap { n: 2, radius: 1.0, height: 0.4 },
            metric: MetricSpec::Induced,
            affine: None,
            grids: GridSpec { cam: vec![128, 256], surface: vec![256, 256], cam_slice: None, points: 32 },
            schedule: RegularizationSchedule::default(),
            phantom: PhantomSpec::Bump(BumpSpec { center: vec![0.1, 0.05], width: 0.3, amplitude: 1.0 }),
            conditions: ConditionSampling::default(),
            convergence: ConvergenceSpec::default(),
            outputs: OutputSpec::default(),
        }
    }

    /// Funk case: patch of the unit sphere in `{x₃ ≥ 0.1}` with the point cam at the center.
    pub fn funk() -> Self {
        Self {
            name: Some("funk-hemisphere".into()),
            cam: CamSpec::Point { center: vec![0.0; 3] },
            surface: SurfaceSpec::SphericalCap { n: 2, radius: 1.0, height: 0.1 },
            phantom: PhantomSpec::Bump(BumpSpec { center: vec![0.15, -0.1], width: 0.35, amplitude: 1.0 }),
            ..Self::default_cap()
        }
    }

    /// Default cap with the metric `(1 + 0.3 bump) · g_induced`.
    pub fn conformal() -> Self {
        Self {
            name: Some("default-cap-conformal".into()),
            metric: MetricSpec::ConformalBump {
                base: 1.0,
                bump: BumpSpec { center: vec![0.05, 0.0], width: 0.6, amplitude: 0.3 },
            },
            ..Self::default_cap()
        }
    }

    /// Default cap with a cam of radius 0.5, which breaks condition (E).
    pub fn large_cam() -> Self {
        Self {
            name: Some("large-cam".into()),
            cam: CamSpec::Ellipsoid { center: vec![0.0; 3], radius: Some(0.5), matrix: None },
            ..Self::default_cap()
        }
    }

    /// Odd branch: cap `{x₄ ≥ 0.4}` of the unit 3-sphere, concentric cam ball of radius 0.3.
    pub fn cap3() -> Self {
        Self {
            name: Some("cap3-slow".into()),
            cam: CamSpec::Ellipsoid { center: vec![0.0; 4], radius: Some(0.3), matrix: None },
            surface: SurfaceSpec::SphericalCap { n: 3, radius: 1.0, height: 0.4 },
            grids: GridSpec { cam: vec![32, 32, 64], surface: vec![24, 24, 24], cam_slice: None, points: 4 },
            phantom: PhantomSpec::Bump(BumpSpec { center: vec![0.0; 3], width: 0.3, amplitude: 1.0 }),
            ..Self::default_cap()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_hash() {
        let cfg = ExperimentConfig::default_cap();
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let mut other = cfg.clone();
        other.outputs.dir = Some("elsewhere".into());
        assert_eq!(other.hash(), cfg.hash());
        other.seed = 8;
        assert_ne!(other.hash(), cfg.hash());
    }

    #[test]
    fn field_order_does_not_change_the_hash() {
        let a = r#"
version = "camtomo-config/1"
seed = 1
[cam]
variant = "ellipsoid"
center = [0.0, 0.0, 0.0]
radius = 0.3
[surface]
kind = "spherical_cap"
n = 2
radius = 1.0
height = 0.4
[grids]
cam = [16, 32]
surface = [32, 32]
points = 4
[phantom]
kind = "bump"
center = [0.0, 0.0]
width = 0.2
amplitude = 1.0
"#;
        let b = r#"
seed = 1
version = "camtomo-config/1"
[phantom]
amplitude = 1.0
width = 0.2
kind = "bump"
center = [0.0, 0.0]
[grids]
points = 4
surface = [32, 32]
cam = [16, 32]
[surface]
height = 0.4
radius = 1.0
n = 2
kind = "spherical_cap"
[cam]
radius = 0.3
center = [0.0, 0.0, 0.0]
variant = "ellipsoid"
"#;
        let (ca, cb) = (ExperimentConfig::from_toml(a).unwrap(), ExperimentConfig::from_toml(b).unwrap());
        assert_eq!(ca.hash(), cb.hash());
    }

    #[test]
    fn expression_metric() {
        let m = MetricSpec::ConformalExpression { expression: "1 + 0.5 * u1 * u1".into() };
        let f = m.factor().unwrap().unwrap();
        assert!((f.eval(&[2.0, 0.0]) - 3.0).abs() < 1e-15);
        assert!(MetricSpec::ConformalExpression { expression: "1 +".into() }.factor().is_err());
    }

    #[test]
    fn wrong_version_is_rejected() {
        let mut cfg = ExperimentConfig::default_cap();
        cfg.version = "camtomo-config/0".into();
        assert!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).is_err());
    }
}
