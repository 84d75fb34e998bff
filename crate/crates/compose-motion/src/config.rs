//! Run configuration: a JSON document validated before any work starts.
//! Unknown keys are rejected at every level.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coupling::{MixingRateDist, PairingPolicy};
use crate::cvae::ModelConfig;
use crate::decouple::DecoupleConfig;
use crate::error::{Error, Result};
use crate::eval::{ClassifierConfig, ExtractorKind};
use crate::motion::{GenParams, SubActionKind};
use crate::render::CameraConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub kinds: Vec<String>,
    pub per_class: usize,
    pub test_per_class: usize,
    pub frames: usize,
    pub fps: f64,
    pub amplitude: f64,
    pub frequency_hz: f64,
    pub jitter_std: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            kinds: vec![
                "arm-wave-left".into(),
                "arm-wave-right".into(),
                "leg-march".into(),
                "leg-kick".into(),
            ],
            per_class: 12,
            test_per_class: 5,
            frames: 16,
            fps: 20.0,
            amplitude: 1.0,
            frequency_hz: 1.0,
            jitter_std: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicyConfig {
    Named(String),
    Explicit { pairs: Vec<(usize, usize)> },
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig::Named("full-class".into())
    }
}

impl PolicyConfig {
    pub fn to_policy(&self) -> Result<PairingPolicy> {
        match self {
            PolicyConfig::Named(n) if n == "full-class" => Ok(PairingPolicy::FullClass),
            PolicyConfig::Named(n) => Err(Error::Config {
                path: "coupling.policy".into(),
                msg: format!("unknown policy `{n}` (expected \"full-class\" or {{\"pairs\": [...]}})"),
            }),
            PolicyConfig::Explicit { pairs } => Ok(PairingPolicy::Allowlist { pairs: pairs.clone() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingConfig {
    /// Mixing-rate distribution spec: gaussian:STD | beta:ALPHA | uniform | fixed:L.
    pub dist: String,
    pub count: usize,
    pub test_count: usize,
    pub policy: PolicyConfig,
    pub use_energy_mask: bool,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        CouplingConfig {
            dist: "gaussian:0.1".into(),
            count: 200,
            test_count: 120,
            policy: PolicyConfig::default(),
            use_energy_mask: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub height: usize,
    pub width: usize,
    pub scale: f64,
    pub principal: (f64, f64),
    pub patch: usize,
    pub rho: f64,
    pub eps_pix: f64,
    pub fill: f64,
    pub thickness: f64,
    pub splat_sigma: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            height: 64,
            width: 64,
            scale: 32.0,
            principal: (32.0, 32.0),
            patch: 8,
            rho: 1.0 / 3.0,
            eps_pix: 1.0,
            fill: 0.5,
            thickness: 2.0,
            splat_sigma: 1.0,
        }
    }
}

impl RenderConfig {
    pub fn camera(&self) -> CameraConfig {
        CameraConfig { height: self.height, width: self.width, scale: self.scale, principal: self.principal }
    }

    pub fn decouple(&self) -> DecoupleConfig {
        DecoupleConfig { patch: self.patch, rho: self.rho, eps_pix: self.eps_pix, fill: self.fill }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    /// mean-fill | patch-regressor
    pub inpainter: String,
    /// Frame stride for refinement evaluation and regressor corpora.
    pub stride: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig { inpainter: "mean-fill".into(), stride: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub extractor: ExtractorKind,
    pub n_pairs: usize,
    pub bootstrap: usize,
    pub gen_per_pair: usize,
    pub lambda: f64,
    pub classifier_hidden: usize,
    pub classifier_epochs: usize,
    pub classifier_lr: f64,
    /// Arm names for the ablate command; empty selects the standard suite.
    pub arms: Vec<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            extractor: ExtractorKind::Handcrafted,
            n_pairs: 200,
            bootstrap: 5,
            gen_per_pair: 20,
            lambda: 0.5,
            classifier_hidden: 32,
            classifier_epochs: 300,
            classifier_lr: 0.05,
            arms: Vec::new(),
        }
    }
}

impl EvalConfig {
    pub fn classifier(&self) -> ClassifierConfig {
        ClassifierConfig {
            hidden: self.classifier_hidden,
            epochs: self.classifier_epochs,
            learning_rate: self.classifier_lr,
        }
    }
}

/// Top-level run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub coupling: CouplingConfig,
    pub render: RenderConfig,
    pub model: ModelConfig,
    pub refine: RefineConfig,
    pub eval: EvalConfig,
    pub seed: u64,
    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: DataConfig::default(),
            coupling: CouplingConfig::default(),
            render: RenderConfig::default(),
            model: ModelConfig::default(),
            refine: RefineConfig::default(),
            eval: EvalConfig::default(),
            seed: 1,
            output_dir: "runs".into(),
        }
    }
}

impl RunConfig {
    pub fn kinds(&self) -> Result<Vec<SubActionKind>> {
        self.data.kinds.iter().map(|n| SubActionKind::from_name(n)).collect()
    }

    pub fn gen_params(&self) -> GenParams {
        GenParams {
            amplitude: self.data.amplitude,
            frequency_hz: self.data.frequency_hz,
            jitter_std: self.data.jitter_std,
        }
    }

    pub fn mixing_dist(&self) -> Result<MixingRateDist> {
        MixingRateDist::parse(&self.coupling.dist)
    }

    /// Cross-field validation beyond what serde enforces.
    pub fn validate(&self) -> Result<()> {
        let kinds = self.kinds()?;
        if kinds.is_empty() {
            return Err(Error::Config { path: "data.kinds".into(), msg: "no sub-action kinds listed".into() });
        }
        if self.data.frames < 2 {
            return Err(Error::Config { path: "data.frames".into(), msg: "frame count must be >= 2".into() });
        }
        if self.data.per_class == 0 || self.data.test_per_class == 0 {
            return Err(Error::Config { path: "data.per_class".into(), msg: "per-class counts must be positive".into() });
        }
        self.mixing_dist().map_err(|e| Error::Config { path: "coupling.dist".into(), msg: e.to_string() })?;
        self.coupling.policy.to_policy()?;
        self.render.camera().validate().map_err(|e| Error::Config { path: "render".into(), msg: e.to_string() })?;
        if self.render.patch == 0
            || self.render.height % self.render.patch != 0
            || self.render.width % self.render.patch != 0
        {
            return Err(Error::Config {
                path: "render.patch".into(),
                msg: format!(
                    "image {}x{} not divisible into {patch}x{patch} regions",
                    self.render.height,
                    self.render.width,
                    patch = self.render.patch
                ),
            });
        }
        if !(self.render.rho > 0.0 && self.render.rho <= 1.0) {
            return Err(Error::Config { path: "render.rho".into(), msg: "rho must be in (0, 1]".into() });
        }
        if self.refine.stride == 0 {
            return Err(Error::Config { path: "refine.stride".into(), msg: "stride must be >= 1".into() });
        }
        if !["mean-fill", "patch-regressor"].contains(&self.refine.inpainter.as_str()) {
            return Err(Error::Config {
                path: "refine.inpainter".into(),
                msg: format!("unknown inpainter `{}`", self.refine.inpainter),
            });
        }
        let mut model = self.model.clone();
        model.frames = self.data.frames;
        model.num_classes = kinds.len();
        model.validate().map_err(|e| Error::Config { path: "model".into(), msg: e.to_string() })?;
        if self.eval.gen_per_pair < 2 {
            return Err(Error::Config { path: "eval.gen_per_pair".into(), msg: "need >= 2 generations per pair".into() });
        }
        if !(0.0..=1.0).contains(&self.eval.lambda) {
            return Err(Error::Config { path: "eval.lambda".into(), msg: "lambda must be in [0,1]".into() });
        }
        Ok(())
    }

    /// Parse a JSON value, rejecting unknown keys, then cross-validate.
    pub fn from_value(value: serde_json::Value) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_value(value)
            .map_err(|e| Error::Config { path: "<config>".into(), msg: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let value = load_config_value(path)?;
        RunConfig::from_value(value)
    }
}

/// Read a config file into a JSON value (object required).
pub fn load_config_value(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config { path: path.display().to_string(), msg: e.to_string() })?;
    if !value.is_object() {
        return Err(Error::Config { path: path.display().to_string(), msg: "config must be a JSON object".into() });
    }
    Ok(value)
}

/// Apply a dotted-path override (`a.b.c=value`) to a JSON value. The value is
/// parsed as JSON when possible, otherwise taken as a string.
pub fn apply_override(value: &mut serde_json::Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::invalid_argument(format!("override `{assignment}` is not key=value")))?;
    let parsed: serde_json::Value =
        serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = value;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cursor.as_object_mut().ok_or_else(|| Error::Config {
            path: parts[..i].join("."),
            msg: "override path traverses a non-object".into(),
        })?;
        if i + 1 == parts.len() {
            obj.insert((*part).to_string(), parsed);
            return Ok(());
        }
        cursor = obj.entry((*part).to_string()).or_insert_with(|| serde_json::json!({}));
    }
    unreachable!("override paths are non-empty")
}
