//! Action catalog: the component space of executable actions.
//!
//! Catalog file format, one action per line:
//!
//! ```text
//! <id> <verb> <object> <base_duration> <scene,...> [<verb_3sg>]
//! ```
//!
//! The optional trailing column overrides the third-person-singular verb
//! surface form used by sentence templates; a small default inflection rule
//! covers the regular cases.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One executable action and its verb/object decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub action_id: String,
    pub verb: String,
    pub object: String,
    /// Nominal execution time in seconds, before any framerate multiplier.
    pub base_duration: f64,
    /// Scenes in which the action can be executed. Never empty.
    pub valid_scenes: Vec<String>,
    /// Third-person-singular surface form of the verb ("open" -> "opens").
    pub verb_3sg: String,
}

/// Immutable set of [`ActionSpec`]s keyed by action id.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    actions: Vec<ActionSpec>,
    by_id: BTreeMap<String, usize>,
}

/// Regular third-person-singular inflection; irregulars go in the catalog file.
pub fn inflect_3sg(verb: &str) -> String {
    if verb.ends_with('s')
        || verb.ends_with("sh")
        || verb.ends_with("ch")
        || verb.ends_with('x')
        || verb.ends_with('z')
        || verb.ends_with('o')
    {
        format!("{verb}es")
    } else if verb.ends_with('y')
        && !verb
            .chars()
            .rev()
            .nth(1)
            .is_some_and(|c| "aeiou".contains(c))
    {
        format!("{}ies", &verb[..verb.len() - 1])
    } else {
        format!("{verb}s")
    }
}

impl Catalog {
    pub fn new(actions: Vec<ActionSpec>) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        for (idx, spec) in actions.iter().enumerate() {
            if spec.base_duration <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "action {}: base_duration must be > 0, got {}",
                    spec.action_id, spec.base_duration
                )));
            }
            if spec.valid_scenes.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "action {}: valid_scenes must be non-empty",
                    spec.action_id
                )));
            }
            if by_id.insert(spec.action_id.clone(), idx).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate action id {}",
                    spec.action_id
                )));
            }
        }
        Ok(Self { actions, by_id })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut actions = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < 5 || fields.len() > 6 {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: lineno + 1,
                    message: format!("expected 5 or 6 fields, got {}", fields.len()),
                });
            }
            let base_duration: f64 = fields[3].parse().map_err(|_| Error::Parse {
                path: origin.to_string(),
                line: lineno + 1,
                message: format!("bad base_duration {:?}", fields[3]),
            })?;
            let valid_scenes: Vec<String> = fields[4]
                .split(',')
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            let verb = fields[1].to_lowercase();
            let verb_3sg = fields
                .get(5)
                .map(|s| s.to_string())
                .unwrap_or_else(|| inflect_3sg(&verb));
            actions.push(ActionSpec {
                action_id: fields[0].to_string(),
                verb,
                object: fields[2].to_lowercase(),
                base_duration,
                valid_scenes,
                verb_3sg,
            });
        }
        Self::new(actions)
    }

    pub fn get(&self, action_id: &str) -> Option<&ActionSpec> {
        self.by_id.get(action_id).map(|&i| &self.actions[i])
    }

    pub fn require(&self, action_id: &str) -> Result<&ActionSpec> {
        self.get(action_id)
            .ok_or_else(|| Error::UnknownAction(action_id.to_string()))
    }

    pub fn actions(&self) -> &[ActionSpec] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Stable digest of the catalog contents, for run manifests.
    pub fn digest(&self) -> String {
        let mut lines: Vec<String> = self
            .actions
            .iter()
            .map(|a| {
                format!(
                    "{} {} {} {:.6} {} {}",
                    a.action_id,
                    a.verb,
                    a.object,
                    a.base_duration,
                    a.valid_scenes.join(","),
                    a.verb_3sg
                )
            })
            .collect();
        lines.sort();
        crate::seeding::sha256_hex(lines.join("\n").as_bytes())
    }
}
