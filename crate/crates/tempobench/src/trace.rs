//! Deterministic manuscript execution into per-action timestamps, plus
//! export of simulator-style functional programs for users who want to
//! render actual video with an external simulator.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manuscript::ActivityManuscript;

/// One executed action with its interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub action_id: String,
    pub t_s: f64,
    pub t_e: f64,
    pub scene: String,
}

/// Timestamps of one simulated video.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionTrace {
    pub video_id: String,
    pub scene: String,
    pub agent: String,
    pub steps: Vec<TraceStep>,
    pub total_duration: f64,
}

/// Bounds for the random transition gaps between actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapConfig {
    pub gap_min: f64,
    pub gap_max: f64,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self {
            gap_min: 0.0,
            gap_max: 2.0,
        }
    }
}

impl GapConfig {
    fn validate(&self) -> Result<()> {
        if self.gap_min < 0.0 || self.gap_max < self.gap_min {
            return Err(Error::InvalidArgument(format!(
                "gap bounds must satisfy 0 <= gap_min <= gap_max, got [{}, {}]",
                self.gap_min, self.gap_max
            )));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha12Rng) -> f64 {
        if self.gap_max == self.gap_min {
            self.gap_min
        } else {
            rng.gen_range(self.gap_min..self.gap_max)
        }
    }
}

/// Executes a manuscript: step k starts at the previous end plus a random
/// gap; the video gets a lead pad before the first step and a trailing pad
/// after the last, both drawn from the same gap bounds.
pub fn execute(
    manuscript: &ActivityManuscript,
    video_id: &str,
    gaps: GapConfig,
    rng: &mut ChaCha12Rng,
) -> Result<ExecutionTrace> {
    gaps.validate()?;
    let mut steps = Vec::with_capacity(manuscript.actions.len());
    let mut cursor = gaps.draw(rng);
    for (k, action) in manuscript.actions.iter().enumerate() {
        if k > 0 {
            cursor += gaps.draw(rng);
        }
        let t_s = cursor;
        let t_e = cursor + action.duration;
        steps.push(TraceStep {
            action_id: action.action_id.clone(),
            t_s,
            t_e,
            scene: action.scene.clone(),
        });
        cursor = t_e;
    }
    let total_duration = cursor + gaps.draw(rng);
    Ok(ExecutionTrace {
        video_id: video_id.to_string(),
        scene: manuscript.scene.clone(),
        agent: manuscript.agent.clone(),
        steps,
        total_duration,
    })
}

/// Renders the manuscript as a functional-program script: a header comment
/// naming scene and agent, then one `[VERB] <object> (1)` line per action.
pub fn export_program(
    manuscript: &ActivityManuscript,
    catalog: &crate::catalog::Catalog,
) -> Result<String> {
    let mut out = String::new();
    writeln!(
        out,
        "# scene: {} | agent: {}",
        manuscript.scene, manuscript.agent
    )
    .unwrap();
    for action in &manuscript.actions {
        let spec = catalog.require(&action.action_id)?;
        for (label, token) in [("verb", &spec.verb), ("object", &spec.object)] {
            if token.chars().any(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!(
                    "{label} {token:?} of {} contains whitespace",
                    action.action_id
                )));
            }
        }
        writeln!(out, "[{}] <{}> (1)", spec.verb.to_uppercase(), spec.object).unwrap();
    }
    Ok(out)
}
