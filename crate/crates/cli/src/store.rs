//! Session store: instances, plans, scenarios, repairs and reports keyed by
//! generated ids, optionally mirrored to a directory of JSON files (one per
//! object plus a counter file).

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use reparo_core::domain::RepairMethod;
use reparo_core::repair::RepairSpec;
use reparo_core::scenario::Scenario;

use crate::ops::{Instance, PlanOutput, RepairOutput};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("id `{0}` already exists")]
    Conflict(String),
    #[error("invalid id `{0}`")]
    InvalidId(String),
    #[error("store i/o: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt store file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    #[serde(flatten)]
    pub instance: Instance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub id: String,
    pub instance_id: String,
    pub output: PlanOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub id: String,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairRecord {
    pub id: String,
    pub plan_id: String,
    pub scenario_id: String,
    pub spec: RepairSpec,
    pub method: RepairMethod,
    pub output: RepairOutput,
}

/// A recoverability evaluation or a two-stage solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub id: String,
    pub instance_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_id: Option<String>,
    pub kind: String,
    pub output: Value,
}

/// Everything the store holds; equal contents mean equal stores.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Contents {
    pub next_id: u64,
    pub instances: BTreeMap<String, InstanceRecord>,
    pub plans: BTreeMap<String, PlanRecord>,
    pub scenarios: BTreeMap<String, ScenarioRecord>,
    pub repairs: BTreeMap<String, RepairRecord>,
    pub reports: BTreeMap<String, ReportRecord>,
}

#[derive(Debug, Default)]
pub struct SessionStore {
    dir: Option<PathBuf>,
    contents: Contents,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    next_id: u64,
}

const KINDS: [&str; 5] = ["instances", "plans", "scenarios", "repairs", "reports"];

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn load_kind<T: DeserializeOwned>(dir: &Path) -> Result<BTreeMap<String, T>, StoreError> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_none_or(|e| e != "json") {
            continue;
        }
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let text = fs::read_to_string(&path)?;
        let value = serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
            path: path.clone(),
            message: e.to_string(),
        })?;
        out.insert(id, value);
    }
    Ok(out)
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a store directory and loads its objects.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        for kind in KINDS {
            fs::create_dir_all(dir.join(kind))?;
        }
        let meta_path = dir.join("store.json");
        let next_id = match fs::read_to_string(&meta_path) {
            Ok(text) => {
                serde_json::from_str::<Meta>(&text)
                    .map_err(|e| StoreError::Corrupt {
                        path: meta_path.clone(),
                        message: e.to_string(),
                    })?
                    .next_id
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => 1,
            Err(e) => return Err(e.into()),
        };
        let contents = Contents {
            next_id,
            instances: load_kind(&dir.join("instances"))?,
            plans: load_kind(&dir.join("plans"))?,
            scenarios: load_kind(&dir.join("scenarios"))?,
            repairs: load_kind(&dir.join("repairs"))?,
            reports: load_kind(&dir.join("reports"))?,
        };
        Ok(Self { dir: Some(dir), contents })
    }

    pub fn contents(&self) -> &Contents {
        &self.contents
    }

    fn fresh_id(&mut self, prefix: &str) -> Result<String, StoreError> {
        let id = format!("{prefix}-{}", self.contents.next_id);
        self.contents.next_id += 1;
        if let Some(dir) = &self.dir {
            write_atomic(&dir.join("store.json"), &serde_json::to_string(&Meta { next_id: self.contents.next_id }).unwrap())?;
        }
        Ok(id)
    }

    /// Writes the record and returns what a reload would read back, which
    /// is what the store keeps in memory (fields such as timings are not
    /// persisted).
    fn persist<T: Serialize + DeserializeOwned>(&self, kind: &str, id: &str, value: T) -> Result<T, StoreError> {
        let text = serde_json::to_string_pretty(&value).expect("records serialize");
        if let Some(dir) = &self.dir {
            write_atomic(&dir.join(kind).join(format!("{id}.json")), &text)?;
        }
        Ok(serde_json::from_str(&text).expect("records read back"))
    }

    /// Adds an instance under `id`, or a generated id when `None`.
    pub fn add_instance(&mut self, id: Option<String>, instance: Instance) -> Result<String, StoreError> {
        let id = match id {
            Some(id) if !valid_id(&id) => return Err(StoreError::InvalidId(id)),
            Some(id) if self.contents.instances.contains_key(&id) => return Err(StoreError::Conflict(id)),
            Some(id) => id,
            None => self.fresh_id("inst")?,
        };
        let rec = InstanceRecord { id: id.clone(), instance };
        let rec = self.persist("instances", &id, rec)?;
        self.contents.instances.insert(id.clone(), rec);
        Ok(id)
    }

    pub fn add_plan(&mut self, instance_id: &str, output: PlanOutput) -> Result<String, StoreError> {
        let id = self.fresh_id("plan")?;
        let rec = PlanRecord {
            id: id.clone(),
            instance_id: instance_id.into(),
            output,
        };
        let rec = self.persist("plans", &id, rec)?;
        self.contents.plans.insert(id.clone(), rec);
        Ok(id)
    }

    pub fn add_scenario(&mut self, scenario: Scenario) -> Result<String, StoreError> {
        let id = self.fresh_id("scen")?;
        let rec = ScenarioRecord { id: id.clone(), scenario };
        let rec = self.persist("scenarios", &id, rec)?;
        self.contents.scenarios.insert(id.clone(), rec);
        Ok(id)
    }

    pub fn add_repair(
        &mut self,
        plan_id: &str,
        scenario_id: &str,
        spec: RepairSpec,
        method: RepairMethod,
        output: RepairOutput,
    ) -> Result<String, StoreError> {
        let id = self.fresh_id("rep")?;
        let rec = RepairRecord {
            id: id.clone(),
            plan_id: plan_id.into(),
            scenario_id: scenario_id.into(),
            spec,
            method,
            output,
        };
        let rec = self.persist("repairs", &id, rec)?;
        self.contents.repairs.insert(id.clone(), rec);
        Ok(id)
    }

    pub fn add_report(&mut self, instance_id: &str, plan_id: Option<&str>, kind: &str, output: Value) -> Result<String, StoreError> {
        let id = self.fresh_id("report")?;
        let rec = ReportRecord {
            id: id.clone(),
            instance_id: instance_id.into(),
            plan_id: plan_id.map(Into::into),
            kind: kind.into(),
            output,
        };
        let rec = self.persist("reports", &id, rec)?;
        self.contents.reports.insert(id.clone(), rec);
        Ok(id)
    }

    pub fn instance(&self, id: &str) -> Option<&InstanceRecord> {
        self.contents.instances.get(id)
    }

    pub fn plan(&self, id: &str) -> Option<&PlanRecord> {
        self.contents.plans.get(id)
    }

    pub fn scenario(&self, id: &str) -> Option<&ScenarioRecord> {
        self.contents.scenarios.get(id)
    }

    pub fn repair(&self, id: &str) -> Option<&RepairRecord> {
        self.contents.repairs.get(id)
    }

    pub fn report(&self, id: &str) -> Option<&ReportRecord> {
        self.contents.reports.get(id)
    }
}

/// Write to a sibling temp file, then rename, so a crash never leaves a
/// half-written record.
fn write_atomic(path: &Path, text: &str) -> io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text)?;
    fs::rename(tmp, path)
}
