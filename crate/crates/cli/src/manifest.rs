//! Run manifests: enough to re-run a command and get the same bytes.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::Command;

pub const TOOL_VERSION: &str = concat!("mzi ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    /// Every argument of the subcommand, defaults filled in.
    pub parameters: BTreeMap<String, Value>,
    pub seed: Option<u64>,
    /// Files written by the run, as given on the command line.
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: &Command, seed: Option<u64>, outputs: Vec<PathBuf>) -> Self {
        let mut value = serde_json::to_value(command).expect("arguments serialize");
        let map = value
            .as_object_mut()
            .expect("subcommand serializes to an object");
        map.remove("command");
        RunManifest {
            command: command.name().to_string(),
            parameters: map.clone().into_iter().collect(),
            seed,
            outputs,
            tool_version: TOOL_VERSION.to_string(),
        }
    }

    /// Rebuilds the subcommand recorded here.
    pub fn command(&self) -> Result<Command, String> {
        let mut map: serde_json::Map<String, Value> = self.parameters.clone().into_iter().collect();
        map.insert("command".into(), Value::String(self.command.clone()));
        serde_json::from_value(Value::Object(map))
            .map_err(|e| format!("manifest does not describe a runnable command: {e}"))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}
