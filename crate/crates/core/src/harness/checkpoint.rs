use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::nn::checkpoint::{decode, encode, VERSION};
use crate::nn::{Activation, Architecture, ParamVector};
use crate::{Error, Result};

/// Sidecar header stored next to the binary checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub layer_dims: Vec<usize>,
    pub omega0: f64,
    #[serde(default = "unit")]
    pub omega_hidden: f64,
    pub activation: Activation,
    pub param_count: usize,
    /// SHA-256 of the config that produced the parameters; empty if none.
    pub config_hash: String,
}

fn unit() -> f64 {
    1.0
}

/// Path of the sidecar header for a checkpoint path.
pub fn header_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".toml");
    PathBuf::from(p)
}

/// Hex SHA-256 of a config's text.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_checkpoint(params: &ParamVector, arch: &Architecture, config_hash: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(params, arch)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let header = CheckpointHeader {
        format_version: VERSION,
        layer_dims: arch.layer_dims().to_vec(),
        omega0: arch.omega0(),
        omega_hidden: arch.omega_hidden(),
        activation: arch.activation(),
        param_count: arch.param_count(),
        config_hash: config_hash.to_string(),
    };
    let hp = header_path(path);
    let text = toml::to_string(&header).expect("header is serializable");
    std::fs::write(&hp, text).map_err(|e| Error::io(hp, e))
}

/// Load parameters and architecture, checking the binary against its header.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ParamVector, Architecture, CheckpointHeader)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (dims, params) = decode(&bytes)?;
    let hp = header_path(path);
    let text = std::fs::read_to_string(&hp).map_err(|e| Error::io(&hp, e))?;
    let header: CheckpointHeader =
        toml::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {}", hp.display(), e.message())))?;
    if header.layer_dims != dims {
        return Err(Error::Checkpoint(format!(
            "header layer_dims {:?} disagree with binary {:?}",
            header.layer_dims, dims
        )));
    }
    if header.param_count != params.len() {
        return Err(Error::Checkpoint(format!(
            "header param_count {} disagrees with binary {}",
            header.param_count,
            params.len()
        )));
    }
    let arch = Architecture::new(dims, header.omega0, header.activation)?.with_omega_hidden(header.omega_hidden)?;
    Ok((params, arch, header))
}
