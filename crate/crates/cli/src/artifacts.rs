//! Run directories: config echo, manifests, checkpoints and CSV outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array1;
use serde::Serialize;
use sha2::{Digest, Sha256};

use near_core::amp::{DiscCoeffs, Discriminator};
use near_core::diffcore::Checkpoint;
use near_core::energy::Standardization;
use near_core::rl::{GaussianPolicy, ValueFunction};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Other(format!("reading {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    /// Excluded from reproducibility comparisons.
    timestamp: String,
    config_sha256: String,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    extra: BTreeMap<String, String>,
}

/// Output directory of one command invocation.
pub struct RunDir {
    pub root: PathBuf,
    command: String,
    seed: u64,
    config_text: String,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    extra: BTreeMap<String, String>,
}

impl RunDir {
    /// Creates `root` and echoes the config text into it.
    pub fn create(root: &Path, command: &str, seed: u64, config_text: &str) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        let run = RunDir {
            root: root.to_path_buf(),
            command: command.to_string(),
            seed,
            config_text: config_text.to_string(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            extra: BTreeMap::new(),
        };
        fs::write(run.root.join(format!("{command}.config.toml")), config_text)?;
        Ok(run)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), CliError> {
        let hash = hash_file(path)?;
        self.inputs.insert(path.display().to_string(), hash);
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.extra.insert(key.to_string(), value.to_string());
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, bytes)?;
        self.outputs.push(name.to_string());
        Ok(path)
    }

    /// Writes `<command>.manifest.json` with hashes of every input and output.
    pub fn finish(self) -> Result<(), CliError> {
        let mut outputs = BTreeMap::new();
        for name in &self.outputs {
            outputs.insert(name.clone(), hash_file(&self.path(name))?);
        }
        let manifest = Manifest {
            command: &self.command,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            config_sha256: sha256_hex(self.config_text.as_bytes()),
            inputs: self.inputs,
            outputs,
            extra: self.extra,
        };
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(self.root.join(format!("{}.manifest.json", self.command)), text)?;
        Ok(())
    }
}

const POLICY: [u8; 4] = *b"PNET";
const LOG_STD: [u8; 4] = *b"PSTD";
const VALUE: [u8; 4] = *b"VNET";
const OBS_MEAN: [u8; 4] = *b"OMEA";
const OBS_SCALE: [u8; 4] = *b"OSCL";
const DISC: [u8; 4] = *b"DNET";
const DISC_COEFFS: [u8; 4] = *b"DCOF";

pub fn policy_checkpoint(policy: &GaussianPolicy, value: &ValueFunction) -> Checkpoint {
    let mut ck = Checkpoint::new();
    ck.put_network(POLICY, &policy.net);
    ck.put_vector(LOG_STD, policy.log_std());
    ck.put_network(VALUE, &value.net);
    ck.put_vector(OBS_MEAN, policy.obs().mean().as_slice().expect("contiguous"));
    ck.put_vector(OBS_SCALE, policy.obs().std().as_slice().expect("contiguous"));
    ck
}

pub fn load_policy(path: &Path) -> Result<GaussianPolicy, CliError> {
    let ck = Checkpoint::load(path)?;
    let obs = Standardization::new(Array1::from(ck.vector(OBS_MEAN)?), Array1::from(ck.vector(OBS_SCALE)?))?;
    Ok(GaussianPolicy::from_net(ck.network(POLICY)?, ck.vector(LOG_STD)?)?.with_obs(obs)?)
}

pub fn disc_checkpoint(disc: &Discriminator) -> Checkpoint {
    let mut ck = Checkpoint::new();
    ck.put_network(DISC, &disc.net);
    let c = disc.coeffs;
    ck.put_vector(DISC_COEFFS, &[c.loss, c.grad_penalty, c.output_reg]);
    ck
}

pub fn load_disc(path: &Path) -> Result<Discriminator, CliError> {
    let ck = Checkpoint::load(path)?;
    let c = ck.vector::<f64>(DISC_COEFFS)?;
    if c.len() != 3 {
        return Err(CliError::Other(format!("{}: malformed discriminator coefficients", path.display())));
    }
    let coeffs = DiscCoeffs { loss: c[0], grad_penalty: c[1], output_reg: c[2] };
    Ok(Discriminator::from_net(ck.network(DISC)?, coeffs)?)
}

/// Renders rows through a CSV writer callback into a byte buffer.
pub fn csv_bytes<F>(write: F) -> Result<Vec<u8>, CliError>
where
    F: FnOnce(&mut Vec<u8>) -> near_core::Result<()>,
{
    let mut out = Vec::new();
    write(&mut out)?;
    Ok(out)
}
