//! Pipeline configuration: a TOML file, then `SCHOOLROOM_*` environment
//! overrides, then command-line flags.
//!
//! Environment keys map onto the TOML tree with `__` between levels, so
//! `SCHOOLROOM_BABBLE__N_SOURCES=4` sets `[babble] n_sources`. Values are
//! parsed as TOML and fall back to plain strings.
//!
//! Relative paths resolve against the config file's directory (or the
//! working directory when no file is given). The master seed fans out to
//! every stage, so the `seed` keys inside stage sections are ignored.

use std::path::{Path, PathBuf};

use schoolroom_core::assemble::{AssemblySpec, Condition, SplitRatios, DEFAULT_SNR_RANGE_DB};
use schoolroom_core::babble::BabbleSpec;
use schoolroom_core::convolve::PartitionConfig;
use schoolroom_core::ess::{ExtractOptions, SweepSpec, WindowAnchor};
use schoolroom_core::room::RirBankSpec;
use schoolroom_core::seed;
use serde::{Deserialize, Serialize};

use crate::wav::Encoding;
use crate::{Error, Result};

pub const ENV_PREFIX: &str = "SCHOOLROOM_";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Utterance table (JSONL).
    pub utterances: Option<PathBuf>,
    /// Embedding file for the utterances.
    pub embeddings: Option<PathBuf>,
    /// Directory of WAV clips voiced by babble sources.
    pub source_pool: Option<PathBuf>,
    /// Directory of WAV event sounds (chairs, playground).
    pub event_pool: Option<PathBuf>,
    /// Existing RIR bank directory; generated when absent.
    pub rir_bank: Option<PathBuf>,
    /// Directory of existing noise tracks; generated when absent.
    pub noise: Option<PathBuf>,
    /// Input manifest for `mix`.
    pub manifest: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractSection {
    pub rir_len_s: f64,
    pub anchor: WindowAnchor,
    pub regularization: f64,
}

impl Default for ExtractSection {
    fn default() -> Self {
        let o = ExtractOptions::default();
        Self {
            rir_len_s: 1.0,
            anchor: o.anchor,
            regularization: o.regularization,
        }
    }
}

impl ExtractSection {
    pub fn options(&self) -> ExtractOptions {
        ExtractOptions {
            anchor: self.anchor,
            regularization: self.regularization,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed. Required, from the file, the environment or `--seed`.
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    /// Corpus sample rate.
    pub sample_rate: u32,
    pub encoding: Encoding,
    pub conditions: Vec<Condition>,
    /// Render noise in the same room as the item's RIR.
    pub matched_acoustics: bool,
    pub snr_range_db: (f64, f64),
    /// Babble tracks to render when not in matched mode.
    pub noise_tracks: usize,
    pub paths: Paths,
    pub sweep: SweepSpec,
    pub extract: ExtractSection,
    pub rir_bank: RirBankSpec,
    pub babble: BabbleSpec,
    pub assembly: AssemblySpec,
    pub splits: SplitRatios,
    pub convolver: PartitionConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: None,
            workers: 0,
            sample_rate: 16_000,
            encoding: Encoding::Float32,
            conditions: Condition::ALL.to_vec(),
            matched_acoustics: false,
            snr_range_db: DEFAULT_SNR_RANGE_DB,
            noise_tracks: 1,
            paths: Paths::default(),
            sweep: SweepSpec::default(),
            extract: ExtractSection::default(),
            rir_bank: RirBankSpec::default(),
            babble: BabbleSpec::default(),
            assembly: AssemblySpec::default(),
            splits: SplitRatios::default(),
            convolver: PartitionConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

/// Command-line values that replace config fields one to one.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    pub conditions: Vec<Condition>,
}

/// Inputs a command may need.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Input {
    Utterances,
    Embeddings,
    SourcePool,
    EventPool,
    RirBank,
    Noise,
    Manifest,
}

fn set_path(table: &mut toml::Table, keys: &[String], value: toml::Value) -> Result<()> {
    let (last, parents) = keys
        .split_last()
        .ok_or_else(|| Error::Config("empty override key".into()))?;
    let mut cur = table;
    for k in parents {
        let entry = cur
            .entry(k.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override path crosses non-table key {k}")))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl PipelineConfig {
    /// Parse a TOML document and apply environment overrides.
    pub fn from_toml(text: &str, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut env: Vec<(String, String)> = env
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|k| (k.to_ascii_lowercase(), v)))
            .collect();
        env.sort();
        for (key, raw) in env {
            let keys: Vec<String> = key.split("__").map(str::to_string).collect();
            set_path(&mut table, &keys, parse_value(&raw))?;
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
    }

    /// Read `path` (or start from defaults) with the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let env = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX) && k != "SCHOOLROOM_LOG");
        let (text, base) = match path {
            Some(p) => {
                if !p.is_file() {
                    return Err(Error::MissingInput(p.into()));
                }
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                (text, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (String::new(), PathBuf::from(".")),
        };
        let mut cfg = Self::from_toml(&text, env)?;
        cfg.base_dir = if base.as_os_str().is_empty() {
            PathBuf::from(".")
        } else {
            base
        };
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(out) = &o.output {
            // Flags are relative to the working directory, not the config.
            self.paths.output = Some(std::path::absolute(out).unwrap_or_else(|_| out.clone()));
        }
        if !o.conditions.is_empty() {
            self.conditions = o.conditions.clone();
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn master_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a master seed is required (seed = ..., SCHOOLROOM_SEED or --seed)".into()))
    }

    /// Seed of one named stage.
    pub fn stage_seed(&self, stage: &str) -> Result<u64> {
        Ok(seed::derive_str(self.master_seed()?, stage))
    }

    pub fn output_dir(&self) -> Result<PathBuf> {
        self.paths
            .output
            .as_deref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| Error::Config("an output path is required (paths.output or --output)".into()))
    }

    fn configured(&self, input: Input) -> (&'static str, Option<&PathBuf>) {
        let p = &self.paths;
        match input {
            Input::Utterances => ("paths.utterances", p.utterances.as_ref()),
            Input::Embeddings => ("paths.embeddings", p.embeddings.as_ref()),
            Input::SourcePool => ("paths.source_pool", p.source_pool.as_ref()),
            Input::EventPool => ("paths.event_pool", p.event_pool.as_ref()),
            Input::RirBank => ("paths.rir_bank", p.rir_bank.as_ref()),
            Input::Noise => ("paths.noise", p.noise.as_ref()),
            Input::Manifest => ("paths.manifest", p.manifest.as_ref()),
        }
    }

    /// Resolved path of an optional input, checked for existence if set.
    pub fn optional(&self, input: Input) -> Result<Option<PathBuf>> {
        match self.configured(input).1 {
            None => Ok(None),
            Some(p) => {
                let p = self.resolve(p);
                if p.exists() {
                    Ok(Some(p))
                } else {
                    Err(Error::MissingInput(p))
                }
            }
        }
    }

    /// Resolved path of a required input.
    pub fn required(&self, input: Input) -> Result<PathBuf> {
        let (key, _) = self.configured(input);
        self.optional(input)?
            .ok_or_else(|| Error::Config(format!("{key} must be set for this command")))
    }

    /// Reject anything that would violate a module invariant.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, e: schoolroom_core::Error| Error::Config(format!("{what}: {e}"));
        self.master_seed()?;
        if self.sample_rate == 0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        let (lo, hi) = self.snr_range_db;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Config(format!("snr_range_db {lo}..{hi} is invalid")));
        }
        if self.conditions.is_empty() {
            return Err(Error::Config("at least one condition is required".into()));
        }
        let mut seen = self.conditions.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.conditions.len() {
            return Err(Error::Config("conditions are listed twice".into()));
        }
        if !self.matched_acoustics && self.noise_tracks == 0 && self.conditions.iter().any(|c| c.uses_noise()) {
            return Err(Error::Config("noise conditions need noise_tracks >= 1".into()));
        }
        self.sweep.validate().map_err(|e| bad("sweep", e))?;
        if !(self.extract.rir_len_s > 0.0 && self.extract.regularization > 0.0) {
            return Err(Error::Config(
                "extract.rir_len_s and extract.regularization must be positive".into(),
            ));
        }
        self.rir_bank.validate().map_err(|e| bad("rir_bank", e))?;
        self.babble.validate().map_err(|e| bad("babble", e))?;
        if self.babble.sample_rate != self.sample_rate {
            return Err(Error::Config(format!(
                "babble.sample_rate {} differs from sample_rate {}",
                self.babble.sample_rate, self.sample_rate
            )));
        }
        self.assembly.validate().map_err(|e| bad("assembly", e))?;
        self.splits.validate().map_err(|e| bad("splits", e))?;
        if self.convolver.partition_len == 0 {
            return Err(Error::Config("convolver.partition_len must be positive".into()));
        }
        Ok(())
    }
}
