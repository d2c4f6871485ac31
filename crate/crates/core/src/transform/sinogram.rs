use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::digest::canonical_hash;
use crate::error::{Error, Result};
use crate::geometry::{Cam, Hypersurface};
use crate::scalar::Real;
use crate::sphere::CamGrid;

pub const FORMAT_VERSION: &str = "camtomo-sinogram/1";

/// Grid resolutions recorded with a sinogram.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridsMeta {
    pub cam: Vec<usize>,
    pub surface: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinogramMeta {
    pub n: usize,
    pub cam: Value,
    pub surface: Value,
    pub grids: GridsMeta,
    pub hash: String,
    pub version: String,
    /// Hash of the experiment configuration that produced the values, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Descriptor of everything the sinogram values depend on apart from the field.
pub fn geometry_descriptor<T: Real>(
    cam: &Cam<T>,
    surface: &Hypersurface<T>,
    cam_grid: &[usize],
    surface_grid: &[usize],
) -> Value {
    json!({
        "cam": cam.descriptor(),
        "surface": surface.descriptor(),
        "grids": { "cam": cam_grid, "surface": surface_grid },
    })
}

pub fn geometry_hash<T: Real>(cam: &Cam<T>, surface: &Hypersurface<T>, cam_grid: &[usize], surface_grid: &[usize]) -> String {
    canonical_hash(&geometry_descriptor(cam, surface, cam_grid, surface_grid))
}

impl SinogramMeta {
    pub fn new<T: Real>(cam: &Cam<T>, surface: &Hypersurface<T>, cam_grid: &[usize], surface_grid: &[usize]) -> Self {
        Self {
            n: surface.dim(),
            cam: cam.descriptor(),
            surface: surface.descriptor(),
            grids: GridsMeta { cam: cam_grid.to_vec(), surface: surface_grid.to_vec() },
            hash: geometry_hash(cam, surface, cam_grid, surface_grid),
            version: FORMAT_VERSION.to_string(),
            config_hash: None,
        }
    }
}

/// Sampled values of the transform over a cam quadrature grid.
#[derive(Clone, Debug)]
pub struct Sinogram<T> {
    pub meta: SinogramMeta,
    nodes: Vec<T>,
    weights: Vec<T>,
    values: Vec<T>,
    spacing: T,
}

#[derive(Serialize, Deserialize)]
struct SinogramFile {
    meta: SinogramMeta,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    values: Vec<f64>,
}

impl<T: Real> Sinogram<T> {
    pub fn new(meta: SinogramMeta, grid: &CamGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!("{} values for {} cam nodes", values.len(), grid.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sinogram contains non-finite values".into()));
        }
        Ok(Self {
            meta,
            nodes: grid.nodes_flat().to_vec(),
            weights: grid.weights().to_vec(),
            values,
            spacing: grid.spacing(),
        })
    }

    pub fn n(&self) -> usize {
        self.meta.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, k: usize) -> &[T] {
        let d = self.meta.n + 1;
        &self.nodes[k * d..(k + 1) * d]
    }

    pub fn nodes_flat(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Largest angular step of the cam grid.
    pub fn spacing(&self) -> T {
        self.spacing
    }

    /// Same grid and metadata with different values.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::Config("value count does not match the cam grid".into()));
        }
        Ok(Self { values, ..self.clone() })
    }

    pub fn check_hash(&self, expected: &str) -> Result<()> {
        if self.meta.hash != expected {
            return Err(Error::HashMismatch { expected: expected.to_string(), found: self.meta.hash.clone() });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let d = self.meta.n + 1;
        let file = SinogramFile {
            meta: self.meta.clone(),
            nodes: self.nodes.chunks(d).map(|c| c.iter().map(|v| v.as_f64()).collect()).collect(),
            weights: self.weights.iter().map(|v| v.as_f64()).collect(),
            values: self.values.iter().map(|v| v.as_f64()).collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SinogramFile = serde_json::from_str(text)?;
        let grid = CamGrid::<T>::product(file.meta.n, &file.meta.grids.cam)?;
        if file.nodes.len() != grid.len() || file.weights.len() != grid.len() || file.values.len() != grid.len() {
            return Err(Error::Config("sinogram arrays do not match the recorded cam grid".into()));
        }
        let d = file.meta.n + 1;
        if file.nodes.iter().any(|n| n.len() != d) {
            return Err(Error::Config("sinogram node has the wrong dimension".into()));
        }
        Ok(Self {
            meta: file.meta,
            nodes: file.nodes.into_iter().flatten().map(T::lit).collect(),
            weights: file.weights.into_iter().map(T::lit).collect(),
            values: file.values.into_iter().map(T::lit).collect(),
            spacing: grid.spacing(),
        })
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// One row per node: ω components, weight, value.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let d = self.meta.n + 1;
        let mut header: Vec<String> = (0..d).map(|i| format!("omega{}", i + 1)).collect();
        header.push("weight".into());
        header.push("value".into());
        writeln!(out, "# hash={}", self.meta.hash)?;
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row: Vec<String> = self.node(k).iter().map(|v| format!("{:e}", v.as_f64())).collect();
            row.push(format!("{:e}", self.weights[k].as_f64()));
            row.push(format!("{:e}", self.values[k].as_f64()));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}
