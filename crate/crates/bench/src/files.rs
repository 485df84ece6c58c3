//! On-disk layout of generated artifacts.
//!
//! ```text
//! <root>/assets.json                  asset pool
//! <root>/<split>.manifest.json        split manifest
//! <root>/<split>/<scenario_id>.json   scenarios
//! <dataset>/<scenario_id>.jsonl       annotated trajectories
//! <dataset>/dataset.json              dataset index
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use aeos_core::io::{load_document, MANIFEST_FORMAT, SCENARIO_FORMAT};
use aeos_core::scengen::{Scenario, SplitManifest, SplitName};

use crate::harness::EvalJob;

pub const DATASET_FORMAT: &str = "aeos-dataset";

pub fn assets_path(root: &Path) -> PathBuf {
    root.join("assets.json")
}

pub fn manifest_path(root: &Path, split: SplitName) -> PathBuf {
    root.join(format!("{split}.manifest.json"))
}

pub fn scenario_path(root: &Path, split: SplitName, scenario_id: &str) -> PathBuf {
    root.join(split.as_str()).join(format!("{scenario_id}.json"))
}

/// Loads a scenario and checks that it was produced under `config_hash`.
pub fn load_scenario(path: &Path, config_hash: &str) -> anyhow::Result<Scenario> {
    let (scenario, hash): (Scenario, String) =
        load_document(path, SCENARIO_FORMAT).with_context(|| path.display().to_string())?;
    if hash != config_hash {
        bail!(
            "{} was generated with config {hash}, current config is {config_hash}",
            path.display()
        );
    }
    Ok(scenario)
}

/// A manifest and the evaluation jobs for its scenarios, resolved relative
/// to the manifest's directory. Scenarios that fail to load become failed
/// jobs; a config-hash mismatch aborts.
pub fn load_split(manifest: &Path, config_hash: &str) -> anyhow::Result<(SplitManifest, Vec<EvalJob>)> {
    let (m, hash): (SplitManifest, String) =
        load_document(manifest, MANIFEST_FORMAT).with_context(|| manifest.display().to_string())?;
    if hash != config_hash {
        bail!("manifest was generated with config {hash}, current config is {config_hash}");
    }
    let root = manifest.parent().unwrap_or(Path::new("."));
    let mut jobs = Vec::with_capacity(m.scenario_ids.len());
    for id in &m.scenario_ids {
        let path = scenario_path(root, m.split, id);
        let scenario = match load_document::<Scenario>(&path, SCENARIO_FORMAT) {
            Ok((_, h)) if h != config_hash => bail!("{} has config hash {h}, expected {config_hash}", path.display()),
            Ok((s, _)) => Ok(s),
            Err(e) => Err(e.to_string()),
        };
        jobs.push(EvalJob {
            split: m.split.as_str().into(),
            scenario_id: id.clone(),
            scenario,
        });
    }
    Ok((m, jobs))
}

/// Annotated trajectories and the scenarios they belong to.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub entries: Vec<DatasetEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub scenario_id: String,
    /// Paths are relative to the index file.
    pub scenario: PathBuf,
    pub trajectory: PathBuf,
}

/// Every scenario file below `dir` (recursively) or a single file, sorted.
pub fn scenario_files(input: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut out = Vec::new();
    let mut stack = vec![input.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).with_context(|| dir.display().to_string())? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "json")
                && !path.file_name().is_some_and(|n| {
                    let n = n.to_string_lossy();
                    n.ends_with(".manifest.json") || n == "assets.json" || n == "dataset.json"
                })
            {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}
