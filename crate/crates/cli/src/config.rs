//! Experiment configuration (JSON). Every section has defaults; unknown keys
//! are rejected with the line and column of the offending token.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wavesense::bem::Conductivity;
use wavesense::geometry::{ParametricShape, ShapeKind};
use wavesense::imaging::MaxVariant;
use wavesense::sensing::MeasurementSystem;
use wavesense::wavelet::{Rect, ScalingFilter, WaveletGrid};
use wavesense::Vec2;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub shape: ShapeConfig,
    pub conductivity: f64,
    pub mesh_nodes: usize,
    pub layout: LayoutConfig,
    pub wavelet: WaveletConfig,
    pub mask: MaskConfig,
    pub noise: NoiseConfig,
    pub solver: SolverConfig,
    pub imaging: ImagingConfig,
    pub output: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            shape: ShapeConfig::default(),
            conductivity: 4.0 / 3.0,
            mesh_nodes: 1024,
            layout: LayoutConfig::default(),
            wavelet: WaveletConfig::default(),
            mask: MaskConfig::default(),
            noise: NoiseConfig::default(),
            solver: SolverConfig::default(),
            imaging: ImagingConfig::default(),
            output: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeType {
    Disk,
    Ellipse,
    Flower,
    Fourier,
}

/// Flat shape description; only the fields of `type` are read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeConfig {
    #[serde(rename = "type")]
    pub kind: ShapeType,
    pub radius: f64,
    pub petals: u32,
    pub amplitude: f64,
    pub a: f64,
    pub b: f64,
    pub c0: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
    pub center: [f64; 2],
    pub rotation: f64,
    pub scale: f64,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        ShapeConfig {
            kind: ShapeType::Flower,
            radius: 0.5,
            petals: 5,
            amplitude: 0.3,
            a: 0.6,
            b: 0.3,
            c0: 0.5,
            cos: Vec::new(),
            sin: Vec::new(),
            center: [0.0, 0.0],
            rotation: 0.0,
            scale: 1.0,
        }
    }
}

impl ShapeConfig {
    pub fn build(&self) -> Result<ParametricShape, CliError> {
        let kind = match self.kind {
            ShapeType::Disk => ShapeKind::Disk { radius: self.radius },
            ShapeType::Ellipse => ShapeKind::Ellipse { a: self.a, b: self.b },
            ShapeType::Flower => {
                ShapeKind::Flower { radius: self.radius, petals: self.petals, amplitude: self.amplitude }
            }
            ShapeType::Fourier => ShapeKind::Fourier { c0: self.c0, cos: self.cos.clone(), sin: self.sin.clone() },
        };
        let shape = ParametricShape::new(kind)
            .with_center(Vec2::new(self.center[0], self.center[1]))
            .with_rotation(self.rotation)
            .with_scale(self.scale);
        shape.validate()?;
        Ok(shape)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutType {
    NearField,
    FarField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    #[serde(rename = "type")]
    pub kind: LayoutType,
    /// Near field: `[xmin, ymin, xmax, ymax]` of the transmitter grid.
    pub extent: [f64; 4],
    pub counts: [usize; 2],
    pub standoff: f64,
    /// Far field: circle center, radius and transmitter count.
    pub center: [f64; 2],
    pub radius: f64,
    pub count: usize,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            kind: LayoutType::NearField,
            extent: [-1.0, -1.0, 1.0, 1.0],
            counts: [15, 15],
            standoff: 1e-4,
            center: [0.0, 0.0],
            radius: 3.0,
            count: 64,
        }
    }
}

impl LayoutConfig {
    pub fn build(&self) -> Result<MeasurementSystem, CliError> {
        self.build_kind(self.kind)
    }

    /// Builds the layout of the given kind from the same section.
    pub fn build_kind(&self, kind: LayoutType) -> Result<MeasurementSystem, CliError> {
        Ok(match kind {
            LayoutType::NearField => MeasurementSystem::near_field(rect(self.extent)?, self.counts, self.standoff)?,
            LayoutType::FarField => {
                MeasurementSystem::far_field(Vec2::new(self.center[0], self.center[1]), self.radius, self.count)?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveletConfig {
    /// Number of vanishing moments of the Daubechies filter (1 is Haar).
    pub vanishing_moments: usize,
    pub scale: i32,
    pub omega: [f64; 4],
    /// Fine sampling lattice `2^{−depth}` for the Green coefficients.
    pub depth: u32,
    /// Cascade refinement depth of the scaling-function table.
    pub table_depth: u32,
    /// Clamping radius of the source singularity, in fine lattice steps.
    pub smoothing: f64,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        WaveletConfig {
            vanishing_moments: 6,
            scale: -4,
            omega: [-1.0, -1.0, 1.0, 1.0],
            depth: 9,
            table_depth: 10,
            smoothing: 3.0,
        }
    }
}

impl WaveletConfig {
    pub fn filter(&self) -> Result<ScalingFilter, CliError> {
        Ok(ScalingFilter::daubechies(self.vanishing_moments)?)
    }

    pub fn grid(&self) -> Result<WaveletGrid, CliError> {
        Ok(WaveletGrid::for_filter(self.scale, rect(self.omega)?, &self.filter()?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskConfig {
    pub half_width: u32,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig { half_width: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma0: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { sigma0: 0.1, seed: 7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Masked weighted-ℓ1 estimate of the wavelet matrix.
    L1,
    /// Least-squares estimate of the contracted GPTs.
    Gpt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub mu_scale: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub gpt_order: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { method: Method::L1, mu_scale: 1.0, max_iter: 2000, tol: 1e-6, gpt_order: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PgmEncoding {
    Ascii,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImagingConfig {
    pub variant: Variant,
    pub q: f64,
    pub d: f64,
    pub direct: bool,
    pub pgm: PgmEncoding,
}

impl Default for ImagingConfig {
    fn default() -> Self {
        ImagingConfig { variant: Variant::Prose, q: 0.05, d: 2.0, direct: true, pgm: PgmEncoding::Binary }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Prose,
    Literal,
}

impl From<Variant> for MaxVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Prose => MaxVariant::Prose,
            Variant::Literal => MaxVariant::Literal,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn cond(&self) -> Result<Conductivity, CliError> {
        Ok(Conductivity::new(self.conductivity)?)
    }
}

fn rect(v: [f64; 4]) -> Result<Rect, CliError> {
    Ok(Rect::new(Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3]))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        let c = Config::default();
        assert_eq!(Config::from_json(&c.to_json()).unwrap(), c);
        assert_eq!(Config::from_json("{}").unwrap(), c);
    }

    #[test]
    fn unknown_key_reports_position() {
        let err = Config::from_json("{\n  \"mask\": {\n    \"halfwidth\": 3\n  }\n}").unwrap_err();
        match err {
            CliError::Config { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let c = Config::from_json(r#"{"wavelet": {"scale": -5}, "noise": {"sigma0": 1.0}}"#).unwrap();
        assert_eq!(c.wavelet.scale, -5);
        assert_eq!(c.wavelet.depth, 9);
        assert_eq!(c.noise.seed, 7);
        assert_eq!(c.wavelet.grid().unwrap().counts(), [64, 64]);
    }

    #[test]
    fn invalid_shape_is_rejected() {
        let c = Config::from_json(r#"{"shape": {"type": "flower", "amplitude": 1.2}}"#).unwrap();
        assert!(c.shape.build().is_err());
    }
}
