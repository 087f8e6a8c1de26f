//! Named convolution weights on disk.
//!
//! A bundle directory holds `manifest.toml` plus one tensor container per
//! kernel and bias. Each `[[conv]]` entry names a role:
//!
//! * `eq1_conv_level_<i>` for the mask-guided attention convolution at level `i`
//! * `pafe_pointwise`, `pafe_branch_<k>_dilated`, `pafe_branch_<k>_att`,
//!   `pafe_branch_<k>_val` and `fuse` for the pyramid module (`k` from 1)
//! * `first_layer_<variant>` with variant `cat_he`, `add_he` or `add_p`

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FusionVariant, KernelError, PafeBranch, PafeConfig};
use crate::tensor::{load_tensor, save_tensor, ConvSpec, TensorError};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Tensor {
        path: PathBuf,
        source: TensorError,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("bundle has no conv with role `{0}`")]
    MissingRole(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ConvEntry {
    pub role: String,
    pub kernel: String,
    pub bias: String,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq, Eq)]
struct PafeSection {
    dilation_rates: Vec<usize>,
    #[serde(default)]
    tie_value_to_attention: bool,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pafe: Option<PafeSection>,
    #[serde(default)]
    conv: Vec<ConvEntry>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightBundle {
    convs: BTreeMap<String, ConvSpec>,
    pafe: Option<PafeSection>,
}

impl WeightBundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, role: impl Into<String>, conv: ConvSpec) {
        self.convs.insert(role.into(), conv);
    }

    pub fn get(&self, role: &str) -> Result<&ConvSpec, BundleError> {
        self.convs
            .get(role)
            .ok_or_else(|| BundleError::MissingRole(role.to_string()))
    }

    pub fn roles(&self) -> impl Iterator<Item = &str> {
        self.convs.keys().map(String::as_str)
    }

    pub fn mask_conv_role(level: usize) -> String {
        format!("eq1_conv_level_{level}")
    }

    pub fn first_layer_role(tag: &str) -> String {
        format!("first_layer_{tag}")
    }

    pub fn insert_pafe(&mut self, cfg: &PafeConfig) {
        self.insert("pafe_pointwise", cfg.pointwise.clone());
        for (k, b) in cfg.branches.iter().enumerate() {
            self.insert(format!("pafe_branch_{}_dilated", k + 1), b.conv.clone());
            self.insert(format!("pafe_branch_{}_att", k + 1), b.attention.clone());
            self.insert(format!("pafe_branch_{}_val", k + 1), b.value.clone());
        }
        self.insert("fuse", cfg.fuse.clone());
        self.pafe = Some(PafeSection {
            dilation_rates: cfg.dilation_rates.clone(),
            tie_value_to_attention: cfg.tie_value_to_attention,
        });
    }

    pub fn pafe_config(&self) -> Result<PafeConfig, BundleError> {
        let section = self
            .pafe
            .as_ref()
            .ok_or_else(|| BundleError::Manifest("no [pafe] section".into()))?;
        let branches = (1..=section.dilation_rates.len())
            .map(|k| {
                let attention = self.get(&format!("pafe_branch_{k}_att"))?.clone();
                let value = match self.get(&format!("pafe_branch_{k}_val")) {
                    Ok(v) => v.clone(),
                    Err(_) if section.tie_value_to_attention => attention.clone(),
                    Err(e) => return Err(e),
                };
                Ok(PafeBranch {
                    conv: self.get(&format!("pafe_branch_{k}_dilated"))?.clone(),
                    attention,
                    value,
                })
            })
            .collect::<Result<Vec<_>, BundleError>>()?;
        let cfg = PafeConfig {
            dilation_rates: section.dilation_rates.clone(),
            pointwise: self.get("pafe_pointwise")?.clone(),
            branches,
            fuse: self.get("fuse")?.clone(),
            tie_value_to_attention: section.tie_value_to_attention,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn fusion_variant(&self, tag: &str) -> Result<FusionVariant, BundleError> {
        let conv = self.get(&Self::first_layer_role(tag))?.clone();
        let v = match tag {
            "cat_he" => FusionVariant::CatHe(conv),
            "add_he" => FusionVariant::AddHe(conv),
            "add_p" => FusionVariant::AddP(conv),
            other => return Err(BundleError::Manifest(format!("unknown fusion variant `{other}`"))),
        };
        v.validate()?;
        Ok(v)
    }

    /// Writes the manifest and one container per tensor into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), BundleError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|source| BundleError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut manifest = Manifest {
            pafe: self.pafe.clone(),
            conv: Vec::new(),
        };
        for (role, conv) in &self.convs {
            let entry = ConvEntry {
                role: role.clone(),
                kernel: format!("{role}.kernel.sodt"),
                bias: format!("{role}.bias.sodt"),
                stride: conv.stride,
                padding: conv.padding,
                dilation: conv.dilation,
            };
            for (file, t) in [(&entry.kernel, conv.kernel()), (&entry.bias, conv.bias())] {
                let path = dir.join(file);
                save_tensor(&path, t).map_err(|source| BundleError::Tensor { path, source })?;
            }
            manifest.conv.push(entry);
        }
        let text = toml::to_string_pretty(&manifest).map_err(|e| BundleError::Manifest(e.to_string()))?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|source| BundleError::Io { path, source })
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, BundleError> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|source| BundleError::Io { path, source })?;
        let manifest: Manifest = toml::from_str(&text).map_err(|e| BundleError::Manifest(e.to_string()))?;
        let mut bundle = Self {
            convs: BTreeMap::new(),
            pafe: manifest.pafe,
        };
        for entry in manifest.conv {
            let load = |file: &str| {
                let path = dir.join(file);
                load_tensor(&path).map_err(|source| BundleError::Tensor { path, source })
            };
            let conv = ConvSpec::new(load(&entry.kernel)?, load(&entry.bias)?, entry.stride, entry.padding, entry.dilation)
                .map_err(|e| BundleError::Manifest(format!("role `{}`: {e}", entry.role)))?;
            if bundle.convs.insert(entry.role.clone(), conv).is_some() {
                return Err(BundleError::Manifest(format!("duplicate role `{}`", entry.role)));
            }
        }
        Ok(bundle)
    }
}
