// SPDX-License-Identifier: MIT OR Apache-2.0

//! TOML config files.
//!
//! ```toml
//! threads = 4
//!
//! [detect]
//! p-max = 7
//! h-mix = [27, 54, 80]
//!
//! [ci]
//! method = "all"
//! nb = "adaptive"
//! B = 500
//! ```

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::{BenchArgs, CiArgs, DetectArgs, SimulateArgs};
use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub threads: Option<usize>,
    pub simulate: Option<SimulateArgs>,
    pub detect: Option<DetectArgs>,
    pub ci: Option<CiArgs>,
    pub bench: Option<BenchArgs>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                if v.is_null() {
                    continue;
                }
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => {
            if !t.is_null() {
                *b = t;
            }
        }
    }
}

/// Fills the unset fields of `flags` from `file`.
pub fn merge<T: Serialize + DeserializeOwned>(flags: T, file: Option<T>) -> Result<T, CliError> {
    let Some(file) = file else {
        return Ok(flags);
    };
    let mut base = serde_json::to_value(file)?;
    overlay(&mut base, serde_json::to_value(flags)?);
    Ok(serde_json::from_value(base)?)
}
