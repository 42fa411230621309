//! Template-based sentence realization, the pluggable rewriter interface,
//! and alignment of sentences with trace timestamps into annotation records.
//!
//! Template selection is a pure function of the step position and the scene
//! transition: the first action of a video gets the scene-introduction
//! template, an action whose scene differs from the previous one gets the
//! scene-change template, everything else the same-scene template.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::{ActionSpec, Catalog};
use crate::dataset::{AnnotationRecord, Provenance, Split};
use crate::error::{Error, Result};
use crate::trace::ExecutionTrace;

/// The three sentence templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemplateId {
    #[serde(rename = "T1_same_scene")]
    T1SameScene,
    #[serde(rename = "T2_scene_change")]
    T2SceneChange,
    #[serde(rename = "T3_scene_intro")]
    T3SceneIntro,
}

impl TemplateId {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::T1SameScene => "T1_same_scene",
            TemplateId::T2SceneChange => "T2_scene_change",
            TemplateId::T3SceneIntro => "T3_scene_intro",
        }
    }
}

const KNOWN_SLOTS: [&str; 4] = ["verb", "object", "scene", "agent"];

/// Patterns for the three templates, editable via a JSON file.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    patterns: BTreeMap<TemplateId, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        let mut patterns = BTreeMap::new();
        patterns.insert(
            TemplateId::T1SameScene,
            "The {agent} {verb} the {object}.".to_string(),
        );
        patterns.insert(
            TemplateId::T2SceneChange,
            "The {agent} goes to the {scene} and {verb} the {object}.".to_string(),
        );
        patterns.insert(
            TemplateId::T3SceneIntro,
            "In the {scene}, the {agent} {verb} the {object}.".to_string(),
        );
        Self { patterns }
    }
}

impl TemplateSet {
    /// Loads a JSON object mapping template id to pattern.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let raw: BTreeMap<TemplateId, String> =
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: 0,
                message: e.to_string(),
            })?;
        let set = Self { patterns: raw };
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<()> {
        for id in [
            TemplateId::T1SameScene,
            TemplateId::T2SceneChange,
            TemplateId::T3SceneIntro,
        ] {
            let pattern = self
                .patterns
                .get(&id)
                .ok_or_else(|| Error::InvalidArgument(format!("missing template {}", id.as_str())))?;
            for slot in extract_slots(pattern) {
                if !KNOWN_SLOTS.contains(&slot.as_str()) {
                    return Err(Error::InvalidArgument(format!(
                        "template {} declares unknown slot {{{slot}}}",
                        id.as_str()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn pattern(&self, id: TemplateId) -> &str {
        &self.patterns[&id]
    }
}

fn extract_slots(pattern: &str) -> Vec<String> {
    let mut slots = Vec::new();
    let mut rest = pattern;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else {
            break;
        };
        slots.push(rest[open + 1..open + close].to_string());
        rest = &rest[open + close + 1..];
    }
    slots
}

/// Scene information available when realizing one step.
#[derive(Debug, Clone)]
pub struct SceneContext {
    pub current: String,
    pub previous: Option<String>,
}

/// Realizes one action as a sentence, returning the template used.
pub fn realize_sentence(
    templates: &TemplateSet,
    action: &ActionSpec,
    position_in_trace: usize,
    scene_ctx: &SceneContext,
    agent: &str,
) -> Result<(String, TemplateId)> {
    let id = if position_in_trace == 0 {
        TemplateId::T3SceneIntro
    } else if scene_ctx.previous.as_deref() != Some(scene_ctx.current.as_str()) {
        TemplateId::T2SceneChange
    } else {
        TemplateId::T1SameScene
    };
    let mut sentence = templates.pattern(id).to_string();
    let fills = [
        ("{verb}", action.verb_3sg.as_str()),
        ("{object}", action.object.as_str()),
        ("{scene}", scene_ctx.current.as_str()),
        ("{agent}", agent),
    ];
    for (slot, value) in fills {
        if sentence.contains(slot) && value.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "empty value for slot {slot} in template {}",
                id.as_str()
            )));
        }
        sentence = sentence.replace(slot, value);
    }
    if sentence.contains('{') {
        return Err(Error::InvalidArgument(format!(
            "unfilled slot left in {sentence:?}"
        )));
    }
    Ok((sentence, id))
}

/// Sentence rewriting contract. Implementations must either be
/// deterministic under a fixed configuration or say so via
/// [`Rewriter::is_deterministic`].
pub trait Rewriter {
    fn rewrite(&self, sentence: &str) -> Result<String>;

    fn is_deterministic(&self) -> bool {
        true
    }

    /// Identity rewriters keep provenance = template.
    fn is_identity(&self) -> bool {
        false
    }
}

/// Default rewriter: passes sentences through untouched.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityRewriter;

impl Rewriter for IdentityRewriter {
    fn rewrite(&self, sentence: &str) -> Result<String> {
        Ok(sentence.to_string())
    }

    fn is_identity(&self) -> bool {
        true
    }
}

/// Test double replaying a fixed sentence -> sentence map; unmapped
/// sentences pass through.
#[derive(Debug, Clone, Default)]
pub struct RecordedRewriter {
    pub responses: BTreeMap<String, String>,
}

impl Rewriter for RecordedRewriter {
    fn rewrite(&self, sentence: &str) -> Result<String> {
        let out = self
            .responses
            .get(sentence)
            .cloned()
            .unwrap_or_else(|| sentence.to_string());
        if out.is_empty() {
            return Err(Error::InvalidArgument("rewriter produced empty output".into()));
        }
        Ok(out)
    }
}

/// Realizes every step of a trace, applying the rewriter.
pub fn realize_trace(
    templates: &TemplateSet,
    trace: &ExecutionTrace,
    catalog: &Catalog,
    rewriter: &dyn Rewriter,
) -> Result<Vec<String>> {
    let mut sentences = Vec::with_capacity(trace.steps.len());
    let mut previous: Option<String> = None;
    for (k, step) in trace.steps.iter().enumerate() {
        let action = catalog.require(&step.action_id)?;
        let ctx = SceneContext {
            current: step.scene.clone(),
            previous: previous.clone(),
        };
        let (sentence, _) = realize_sentence(templates, action, k, &ctx, &trace.agent)?;
        let rewritten = rewriter.rewrite(&sentence)?;
        if rewritten.is_empty() {
            return Err(Error::InvalidArgument("rewriter produced empty output".into()));
        }
        sentences.push(rewritten);
        previous = Some(step.scene.clone());
    }
    Ok(sentences)
}

/// Aligns sentences with trace steps into annotation records (a bijection
/// between steps and records).
pub fn align(
    trace: &ExecutionTrace,
    sentences: &[String],
    catalog: &Catalog,
    provenance: Provenance,
) -> Result<Vec<AnnotationRecord>> {
    if sentences.len() != trace.steps.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} sentences for {} steps",
            sentences.len(),
            trace.steps.len()
        )));
    }
    let mut records = Vec::with_capacity(sentences.len());
    for (step, sentence) in trace.steps.iter().zip(sentences) {
        let spec = catalog.require(&step.action_id)?;
        records.push(AnnotationRecord {
            video_id: trace.video_id.clone(),
            video_duration: trace.total_duration,
            query: sentence.clone(),
            t_s: step.t_s,
            t_e: step.t_e,
            action_id: step.action_id.clone(),
            verb: spec.verb.clone(),
            object: spec.object.clone(),
            scene: step.scene.clone(),
            agent: trace.agent.clone(),
            split: Split::Unassigned,
            provenance,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TraceStep;

    fn action(verb: &str, object: &str) -> ActionSpec {
        ActionSpec {
            action_id: format!("{verb}-{object}"),
            verb: verb.into(),
            object: object.into(),
            base_duration: 5.0,
            valid_scenes: vec!["kitchen".into()],
            verb_3sg: crate::catalog::inflect_3sg(verb),
        }
    }

    #[test]
    fn first_action_uses_scene_intro() {
        let t = TemplateSet::default();
        let ctx = SceneContext {
            current: "livingroom".into(),
            previous: None,
        };
        let (s, id) = realize_sentence(&t, &action("sit", "sofa"), 0, &ctx, "person").unwrap();
        assert_eq!(id, TemplateId::T3SceneIntro);
        assert_eq!(s, "In the livingroom, the person sits the sofa.");
    }

    #[test]
    fn same_scene_uses_t1() {
        let t = TemplateSet::default();
        let ctx = SceneContext {
            current: "kitchen".into(),
            previous: Some("kitchen".into()),
        };
        let (s, id) = realize_sentence(&t, &action("open", "fridge"), 1, &ctx, "person").unwrap();
        assert_eq!(id, TemplateId::T1SameScene);
        assert_eq!(s, "The person opens the fridge.");
    }

    #[test]
    fn scene_change_uses_t2() {
        let t = TemplateSet::default();
        let ctx = SceneContext {
            current: "bedroom".into(),
            previous: Some("kitchen".into()),
        };
        let (s, id) = realize_sentence(&t, &action("lie", "bed"), 2, &ctx, "person").unwrap();
        assert_eq!(id, TemplateId::T2SceneChange);
        assert_eq!(s, "The person goes to the bedroom and lies the bed.");
    }

    #[test]
    fn template_selection_is_pure_in_position_and_transition() {
        let t = TemplateSet::default();
        for pos in [1usize, 2, 5] {
            let same = SceneContext {
                current: "kitchen".into(),
                previous: Some("kitchen".into()),
            };
            let (_, id) = realize_sentence(&t, &action("open", "fridge"), pos, &same, "p").unwrap();
            assert_eq!(id, TemplateId::T1SameScene);
            let changed = SceneContext {
                current: "bedroom".into(),
                previous: Some("kitchen".into()),
            };
            let (_, id) =
                realize_sentence(&t, &action("open", "fridge"), pos, &changed, "p").unwrap();
            assert_eq!(id, TemplateId::T2SceneChange);
        }
    }

    #[test]
    fn unknown_slot_rejected_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("templates.json");
        std::fs::write(
            &path,
            r#"{"T1_same_scene": "The {ghost} acts.", "T2_scene_change": "x", "T3_scene_intro": "y"}"#,
        )
        .unwrap();
        assert!(TemplateSet::load(&path).is_err());
    }

    fn sample_trace() -> ExecutionTrace {
        ExecutionTrace {
            video_id: "v0".into(),
            scene: "kitchen".into(),
            agent: "person".into(),
            steps: vec![
                TraceStep {
                    action_id: "walk-fridge".into(),
                    t_s: 1.0,
                    t_e: 5.0,
                    scene: "kitchen".into(),
                },
                TraceStep {
                    action_id: "open-fridge".into(),
                    t_s: 6.0,
                    t_e: 12.0,
                    scene: "kitchen".into(),
                },
            ],
            total_duration: 30.0,
        }
    }

    fn sample_catalog() -> Catalog {
        Catalog::new(vec![action("walk", "fridge"), action("open", "fridge")]).unwrap()
    }

    #[test]
    fn align_copies_fields() {
        let trace = sample_trace();
        let sentences = vec!["a".to_string(), "b".to_string()];
        let records = align(&trace, &sentences, &sample_catalog(), Provenance::Template).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[1].t_s, 6.0);
        assert_eq!(records[1].t_e, 12.0);
        assert_eq!(records[1].video_duration, 30.0);
        assert_eq!(records[1].verb, "open");
        for r in &records {
            r.validate(0).unwrap();
        }
    }

    #[test]
    fn align_rejects_length_mismatch() {
        let trace = sample_trace();
        assert!(align(&trace, &["a".to_string()], &sample_catalog(), Provenance::Template).is_err());
    }

    #[test]
    fn align_empty_trace_gives_empty_records() {
        let mut trace = sample_trace();
        trace.steps.clear();
        let records = align(&trace, &[], &sample_catalog(), Provenance::Template).unwrap();
        assert!(records.is_empty());
    }

    #[test]
    fn align_is_a_bijection_on_intervals() {
        let trace = sample_trace();
        let sentences = realize_trace(
            &TemplateSet::default(),
            &trace,
            &sample_catalog(),
            &IdentityRewriter,
        )
        .unwrap();
        let records = align(&trace, &sentences, &sample_catalog(), Provenance::Template).unwrap();
        let mut intervals: Vec<(f64, f64)> = records.iter().map(|r| (r.t_s, r.t_e)).collect();
        intervals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut step_intervals: Vec<(f64, f64)> =
            trace.steps.iter().map(|s| (s.t_s, s.t_e)).collect();
        step_intervals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(intervals, step_intervals);
    }

    #[test]
    fn recorded_rewriter_replays_and_passes_through() {
        let mut rw = RecordedRewriter::default();
        rw.responses.insert(
            "The person opens the fridge.".into(),
            "Someone swings the fridge door open.".into(),
        );
        assert_eq!(
            rw.rewrite("The person opens the fridge.").unwrap(),
            "Someone swings the fridge door open."
        );
        assert_eq!(rw.rewrite("Unmapped.").unwrap(), "Unmapped.");
    }
}
