use std::path::{Path, PathBuf};

use daclyf_core::episodic::DaclyfConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// The `[run]` table: where outputs go and which seed drives the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 1, output: PathBuf::from("out") }
    }
}

/// A `[run]` table next to the sections of [`DaclyfConfig`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub run: RunSection,
    pub daclyf: DaclyfConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub episodes: Option<usize>,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Validation(e.to_string()))?;
        let run = match table.remove("run") {
            Some(v) => v.try_into().map_err(|e: toml::de::Error| CliError::Validation(format!("[run]: {e}")))?,
            None => RunSection::default(),
        };
        let daclyf =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Validation(e.to_string()))?;
        Ok(Self { run, daclyf })
    }

    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.run.seed = seed;
        }
        if let Some(out) = &o.out {
            self.run.output = out.clone();
        }
        if let Some(n) = o.episodes {
            self.daclyf.trust.episodes = n;
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.daclyf.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        // TOML integers are signed 64-bit.
        for (name, seed) in [("run.seed", self.run.seed), ("plant.seed", self.daclyf.plant.seed)] {
            if seed > i64::MAX as u64 {
                return Err(CliError::Validation(format!("{name} = {seed} exceeds {}", i64::MAX)));
            }
        }
        if self.run.output.as_os_str().is_empty() {
            return Err(CliError::Validation("run.output must not be empty".into()));
        }
        Ok(())
    }

    /// Every resolved value, in the same layout [`RunConfig::parse`] reads.
    pub fn to_table(&self) -> toml::Table {
        let mut table = toml::Table::try_from(self.daclyf).expect("configuration serializes to a table");
        table.insert("run".into(), toml::Value::try_from(&self.run).expect("run section serializes"));
        table
    }
}
