//! On-disk JSON formats: compiled network files and golden records.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use bnforge_core::cpt::CptForm;
use bnforge_core::harness::GoldenRecord;
use bnforge_core::network::{CompiledNetwork, NetworkError, Provenance, StateSpace, Variable};
use serde::{Deserialize, Serialize};

/// Format tag written into every network file.
pub const NETWORK_FORMAT: &str = "bnforge-network";
pub const NETWORK_SCHEMA_VERSION: u32 = 1;

/// Flat network with named parents, written by `compile`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub format: String,
    pub schema_version: u32,
    pub model: Option<String>,
    pub content_hash: String,
    pub variables: Vec<NetworkVariable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkVariable {
    pub name: String,
    pub states: Vec<String>,
    pub ordered: bool,
    pub class: Option<String>,
    pub description: String,
    /// Parent order fixes the row order of `cpt`.
    pub parents: Vec<String>,
    pub fragment: String,
    pub form: CptForm,
    pub cpt: Vec<Vec<f64>>,
}

impl NetworkFile {
    pub fn new(net: &CompiledNetwork, model: Option<String>) -> Self {
        let variables = net
            .variables()
            .iter()
            .enumerate()
            .map(|(i, v)| NetworkVariable {
                name: v.name.clone(),
                states: v.states.states().to_vec(),
                ordered: v.states.is_ordered(),
                class: v.class_ref.clone(),
                description: v.description.clone(),
                parents: net.parent_names(i).into_iter().map(String::from).collect(),
                fragment: net.provenance(i).fragment.clone(),
                form: net.provenance(i).form,
                cpt: net.cpt(i).to_vec(),
            })
            .collect();
        NetworkFile {
            format: NETWORK_FORMAT.to_string(),
            schema_version: NETWORK_SCHEMA_VERSION,
            model,
            content_hash: net.content_hash(),
            variables,
        }
    }

    pub fn to_network(&self) -> Result<CompiledNetwork, NetworkError> {
        let mut variables = Vec::with_capacity(self.variables.len());
        let mut parents = Vec::with_capacity(self.variables.len());
        let mut cpts = Vec::with_capacity(self.variables.len());
        let mut provenance = Vec::with_capacity(self.variables.len());
        for v in &self.variables {
            let mut var = Variable::new(v.name.clone(), StateSpace::new(v.states.iter(), v.ordered)?);
            var.class_ref = v.class.clone();
            var.description = v.description.clone();
            variables.push(var);
            parents.push(v.parents.clone());
            cpts.push(v.cpt.clone());
            provenance.push(Provenance { fragment: v.fragment.clone(), form: v.form });
        }
        CompiledNetwork::new(variables, parents, cpts, provenance)
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output types serialize");
    s.push('\n');
    s
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    {
        let mut f = fs::File::create(tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

pub fn read_golden(path: &Path) -> Result<GoldenRecord, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read golden file {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("golden file {} is malformed: {e}", path.display()))
}
