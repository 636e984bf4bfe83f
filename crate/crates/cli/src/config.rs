//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 1
//! tol = 1e-12                  # flow integration tolerance
//!
//! [model]
//! name = "round_sphere"        # flat_space | flat_torus | round_sphere | surface_of_revolution
//! radius = 1.0                 # model parameters: dim, periods, radius, a, b
//!
//! [checks]
//! select = ["theta_sigma", "kahler_potential"]
//! dbar_convention = "standard" # or "flipped"
//! function = "x3"              # extension test function, model default if absent
//! series_terms = 40
//!
//! [grids]
//! samples = 50                 # verify and extend sample points
//! rho_max = 0.5                # fiber radius of the sampling ball
//! jtensor_points = 8
//! sweep_cap = 2.0
//! covectors = 20
//! resolution = 1e-3
//! loop_sides = 64
//! loop_dense = 40
//! loop_tol = 1e-10
//!
//! [paths]
//! target = [0.0, 1.0]          # sigma as [re, im]
//! waypoints = [[0.5, 0.0], [0.5, 1.0]]
//! chart = "N"
//! q0 = [0.0, 0.0]
//! v0 = [1.0, 0.0]              # or p0
//! dense = 10
//! require_disk = true
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Every section and key is optional; unknown keys are rejected.

use crate::error::{CliError, Result};
use grauert::verify::{DbarConvention, TubeRadiusConfig, VerifyConfig, CHECK_NAMES};
use grauert::{MetricModel, ModelParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub tol: f64,
    pub model: ModelSection,
    pub checks: ChecksSection,
    pub grids: GridsSection,
    pub paths: PathsSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub periods: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksSection {
    pub select: Vec<String>,
    pub dbar_convention: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    pub series_terms: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridsSection {
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_max: Option<f64>,
    pub jtensor_points: usize,
    pub sweep_cap: f64,
    pub covectors: usize,
    pub resolution: f64,
    pub loop_sides: usize,
    pub loop_dense: usize,
    /// Flow tolerance of the disk-loop continuation test.
    pub loop_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub target: [f64; 2],
    pub waypoints: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chart: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<Vec<f64>>,
    pub dense: usize,
    pub require_disk: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            tol: 1e-12,
            model: ModelSection::default(),
            checks: ChecksSection::default(),
            grids: GridsSection::default(),
            paths: PathsSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { name: "flat_torus".into(), dim: None, periods: None, radius: None, a: None, b: None }
    }
}

impl Default for ChecksSection {
    fn default() -> Self {
        ChecksSection {
            select: CHECK_NAMES.iter().map(|s| s.to_string()).collect(),
            dbar_convention: "standard".into(),
            function: None,
            series_terms: grauert::holomorphic_ext::DEFAULT_TERMS,
        }
    }
}

impl Default for GridsSection {
    fn default() -> Self {
        let t = TubeRadiusConfig::default();
        GridsSection {
            samples: 50,
            rho_max: None,
            jtensor_points: 8,
            sweep_cap: t.cap,
            covectors: t.covectors,
            resolution: t.resolution,
            loop_sides: t.sides,
            loop_dense: t.dense,
            loop_tol: t.tol,
        }
    }
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection { target: [0.0, 1.0], waypoints: Vec::new(), chart: None, q0: None, v0: None, p0: None, dense: 10, require_disk: true }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub model: Option<String>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{name}` must be positive and finite, got {x}")))
    }
}

fn nonzero(name: &str, x: usize) -> Result<()> {
    if x == 0 {
        return Err(CliError::Config(format!("`{name}` must be at least 1")));
    }
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<RunConfig> {
        toml::from_str(text).map_err(|source| CliError::Parse { path: path.to_path_buf(), source })
    }

    /// The file at `path`, or the shipped default when `None`.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                RunConfig::parse(&text, p)
            }
            None => RunConfig::parse(DEFAULT_CONFIG, Path::new("<default>")),
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(name) = &o.model {
            if *name != self.model.name {
                // parameters of the old model do not carry over
                self.model = ModelSection { name: name.clone(), ..ModelSection::default() };
                self.checks.function = None;
                self.paths.chart = None;
            }
        }
        if let Some(t) = o.tol {
            self.tol = t;
        }
        if let Some(d) = &o.out {
            self.output.dir = d.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("tol", self.tol)?;
        let g = &self.grids;
        nonzero("grids.samples", g.samples)?;
        nonzero("grids.jtensor_points", g.jtensor_points)?;
        nonzero("grids.covectors", g.covectors)?;
        nonzero("paths.dense", self.paths.dense)?;
        positive("grids.sweep_cap", g.sweep_cap)?;
        positive("grids.resolution", g.resolution)?;
        positive("grids.loop_tol", g.loop_tol)?;
        if let Some(r) = g.rho_max {
            positive("grids.rho_max", r)?;
        }
        if g.loop_sides < 3 || g.loop_dense == 0 {
            return Err(CliError::Config("need grids.loop_sides >= 3 and grids.loop_dense >= 1".into()));
        }
        self.dbar()?;
        for s in &self.checks.select {
            if !CHECK_NAMES.contains(&s.as_str()) {
                return Err(CliError::Config(format!("unknown check `{s}`; known: {}", CHECK_NAMES.join(", "))));
            }
        }
        let terms = self.checks.series_terms;
        if terms == 0 || terms > grauert::holomorphic_ext::MAX_TERMS {
            return Err(CliError::Config(format!("checks.series_terms must be in 1..={}", grauert::holomorphic_ext::MAX_TERMS)));
        }
        for w in self.paths.waypoints.iter().chain([&self.paths.target]) {
            if !(w[0].is_finite() && w[1].is_finite()) {
                return Err(CliError::Config("path points must be finite".into()));
            }
        }
        if self.paths.v0.is_some() && self.paths.p0.is_some() {
            return Err(CliError::Config("give paths.v0 or paths.p0, not both".into()));
        }
        Ok(())
    }

    pub fn dbar(&self) -> Result<DbarConvention> {
        match self.checks.dbar_convention.as_str() {
            "standard" => Ok(DbarConvention::Standard),
            "flipped" => Ok(DbarConvention::Flipped),
            other => Err(CliError::Config(format!("dbar_convention must be `standard` or `flipped`, got `{other}`"))),
        }
    }

    pub fn model(&self) -> Result<MetricModel> {
        let s = &self.model;
        let params = ModelParams { dim: s.dim, periods: s.periods.clone(), radius: s.radius, a: s.a, b: s.b };
        Ok(grauert::catalog(&s.name, &params)?)
    }

    pub fn verify_config(&self) -> Result<VerifyConfig> {
        Ok(VerifyConfig {
            samples: self.grids.samples,
            rho_max: self.grids.rho_max,
            seed: self.seed,
            tol: self.tol,
            dbar: self.dbar()?,
            function: self.checks.function.clone(),
        })
    }

    pub fn tube_config(&self) -> TubeRadiusConfig {
        let g = &self.grids;
        TubeRadiusConfig {
            covectors: g.covectors,
            cap: g.sweep_cap,
            resolution: g.resolution,
            seed: self.seed,
            tol: g.loop_tol,
            sides: g.loop_sides,
            dense: g.loop_dense,
        }
    }

    /// Canonical TOML of the resolved configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical form, leaving out `[output]` so that the
    /// same run written to two places carries the same hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection::default();
        hex::encode(Sha256::digest(c.canonical().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_default_is_valid() {
        let cfg = RunConfig::load(None).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.model.name, "flat_torus");
    }

    #[test]
    fn canonical_form_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.model = ModelSection { name: "round_sphere".into(), radius: Some(2.0), ..ModelSection::default() };
        cfg.paths.v0 = Some(vec![1.0, 0.5]);
        let back = RunConfig::parse(&cfg.canonical(), Path::new("x")).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[model]\nname = \"flat_torus\"\ncolour = 1\n", Path::new("x")).is_err());
        assert!(RunConfig::parse("[plots]\n", Path::new("x")).is_err());
    }

    #[test]
    fn model_override_drops_foreign_parameters() {
        let mut cfg = RunConfig::default();
        cfg.model.periods = Some(vec![1.0, 1.0]);
        cfg.apply(&Overrides { model: Some("round_sphere".into()), ..Overrides::default() });
        assert_eq!(cfg.model.periods, None);
        cfg.model().unwrap();
    }
}
