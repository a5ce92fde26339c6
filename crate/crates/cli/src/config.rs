//! The run configuration: one JSON document, overridable from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use quartic_heat::presets::Preset;
use quartic_heat::{BoundaryKind, CoefficientField, Domain2D};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSpec {
    pub x1: [f64; 2],
    pub x2: [f64; 2],
    pub n1: usize,
    pub n2: usize,
    pub boundary: BoundaryKind,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self { x1: [-3.0, 3.0], x2: [-3.0, 3.0], n1: 97, n2: 97, boundary: BoundaryKind::DirichletRectangle }
    }
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain2D, Failure> {
        Ok(Domain2D::new((self.x1[0], self.x1[1]), (self.x2[0], self.x2[1]), self.n1, self.n2, self.boundary)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedPaths {
    pub alpha: PathBuf,
    pub beta: PathBuf,
    pub gamma: PathBuf,
    #[serde(default)]
    pub w: Option<PathBuf>,
}

/// A shipped preset by name, an inline preset, or CSV tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum CoefficientSpec {
    Named {
        preset: String,
    },
    Tabulated {
        tabulated: TabulatedPaths,
    },
    Inline(Preset),
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        CoefficientSpec::Named { preset: "bilaplacian".into() }
    }
}

impl CoefficientSpec {
    /// Builds the field; tabulated coefficients carry their own grid.
    pub fn build(&self, domain: Domain2D, base: &Path) -> Result<CoefficientField, Failure> {
        match self {
            CoefficientSpec::Named { preset } => Ok(Preset::named(preset)?.build(domain)?),
            CoefficientSpec::Inline(p) => Ok(p.build(domain)?),
            CoefficientSpec::Tabulated { tabulated: t } => {
                let r = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
                let w = t.w.as_deref().map(r);
                Ok(CoefficientField::from_csv(&r(&t.alpha), &r(&t.beta), &r(&t.gamma), w.as_deref(), [None; 3])?)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            CoefficientSpec::Named { preset } => preset.clone(),
            CoefficientSpec::Inline(p) => serde_json::to_value(p)
                .ok()
                .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_owned))
                .unwrap_or_else(|| "inline".into()),
            CoefficientSpec::Tabulated { .. } => "tabulated".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportParams {
    pub theta_scales: Vec<f64>,
    /// Finite-difference step of the good-class test; defaults to twice the grid spacing.
    pub good_class_step: Option<f64>,
}

impl Default for ReportParams {
    fn default() -> Self {
        Self { theta_scales: vec![0.0, 0.05, 0.1, 0.2, 0.4], good_class_step: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgebraParams {
    pub samples_per_regime: usize,
}

impl Default for AlgebraParams {
    fn default() -> Self {
        Self { samples_per_regime: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DistanceChoice {
    Dijkstra,
    Sweeping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistanceParams {
    pub source: [f64; 2],
    pub method: DistanceChoice,
    pub order: usize,
}

impl Default for DistanceParams {
    fn default() -> Self {
        Self { source: [0.0, 0.0], method: DistanceChoice::Dijkstra, order: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    Fourier,
    Cn,
    Krylov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelParams {
    /// Source node `(i, j)`; the centre node when absent.
    pub source: Option<[usize; 2]>,
    pub times: Vec<f64>,
    pub method: KernelChoice,
    pub svg: bool,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self { source: None, times: vec![1e-3, 1e-2, 1e-1], method: KernelChoice::Krylov, svg: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundParams {
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub times: Vec<f64>,
    pub source: [f64; 2],
    /// Kernel method; Fourier for constant fields and Krylov otherwise when absent.
    pub method: Option<KernelChoice>,
    pub stride: usize,
    pub s_used: f64,
}

impl Default for BoundParams {
    fn default() -> Self {
        Self {
            epsilon: 0.02,
            delta: Some(0.05),
            times: (0..13).map(|k| 10f64.powf(-3.0 + 0.25 * k as f64)).collect(),
            source: [0.0, 0.0],
            method: None,
            stride: quartic_heat::bound::DEFAULT_STRIDE,
            s_used: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub coefficients: CoefficientSpec,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub report: ReportParams,
    pub algebra: AlgebraParams,
    pub distance: DistanceParams,
    pub kernel: KernelParams,
    pub bound: BoundParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: DomainSpec::default(),
            coefficients: CoefficientSpec::default(),
            output_dir: PathBuf::from("out"),
            seed: 7,
            report: ReportParams::default(),
            algebra: AlgebraParams::default(),
            distance: DistanceParams::default(),
            kernel: KernelParams::default(),
            bound: BoundParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::Usage(format!("malformed config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
