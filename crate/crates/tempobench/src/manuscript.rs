//! Controllable activity manuscripts: Action Permutation (AP) and Action
//! Duration Diversity (ADD).
//!
//! AP draws random topological orders of a chain, weighting each slot
//! decision by the inverse of how often the candidate has already been
//! placed at that slot (the position ledger), so every action visits every
//! position its constraints allow. ADD assigns each action an independent
//! duration multiplier drawn uniformly from a configured set.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::graph::{ActionChain, ActivityGraph};

/// One action of a manuscript with its resolved duration and scene.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManuscriptAction {
    pub action_id: String,
    pub multiplier: f64,
    /// Effective duration: base_duration * multiplier.
    pub duration: f64,
    pub scene: String,
}

/// An ordered, duration-assigned action sequence ready for execution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivityManuscript {
    pub actions: Vec<ManuscriptAction>,
    pub scene: String,
    pub agent: String,
}

/// Balancing memory for AP: how often each action landed on each slot.
#[derive(Debug, Clone, Default)]
pub struct PositionLedger {
    counts: BTreeMap<(String, usize), u64>,
}

impl PositionLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self, action: &str, slot: usize) -> u64 {
        self.counts
            .get(&(action.to_string(), slot))
            .copied()
            .unwrap_or(0)
    }

    fn bump(&mut self, action: &str, slot: usize) {
        *self.counts.entry((action.to_string(), slot)).or_insert(0) += 1;
    }
}

/// Ordering constraints among the chain's members: precedence edges plus
/// blocker edges flipped into "blocked-before-blocker" requirements.
fn chain_constraints(chain: &ActionChain, graph: &ActivityGraph) -> Result<Vec<Vec<usize>>> {
    let positions: BTreeMap<&str, usize> = chain
        .actions
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut required = vec![Vec::new(); chain.actions.len()];
    for (k, id) in chain.actions.iter().enumerate() {
        let v = graph
            .node_index(id)
            .ok_or_else(|| Error::UnknownAction(id.clone()))?;
        for &p in graph.preconditions_of(id).unwrap_or(&[]) {
            let pid = &graph.ids()[p];
            if let Some(&pk) = positions.get(pid.as_str()) {
                required[k].push(pk);
            }
        }
        // v blocks b => b must precede v when both are present
        for (bk, bid) in chain.actions.iter().enumerate() {
            let b = graph.node_index(bid).unwrap();
            if bk != k && graph.blockers_of(b).contains(&v) {
                required[k].push(bk);
            }
        }
    }
    Ok(required)
}

/// Draws `k` valid orderings of the chain's actions, updating the ledger.
pub fn permute_chain(
    chain: &ActionChain,
    graph: &ActivityGraph,
    k: usize,
    ledger: &mut PositionLedger,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<ActionChain>> {
    if k < 1 {
        return Err(Error::InvalidArgument("permutation count must be >= 1".into()));
    }
    let required = chain_constraints(chain, graph)?;
    let n = chain.actions.len();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let mut placed = vec![false; n];
        let mut order = Vec::with_capacity(n);
        for slot in 0..n {
            let eligible: Vec<usize> = (0..n)
                .filter(|&i| !placed[i] && required[i].iter().all(|&r| placed[r]))
                .collect();
            if eligible.is_empty() {
                // cannot happen for a valid input chain
                return Err(Error::InvalidArgument(format!(
                    "chain admits no valid ordering at slot {slot}: {:?}",
                    chain.actions
                )));
            }
            let weights: Vec<f64> = eligible
                .iter()
                .map(|&i| 1.0 / (1.0 + ledger.count(&chain.actions[i], slot) as f64))
                .collect();
            let total: f64 = weights.iter().sum();
            let mut x = rng.gen_range(0.0..total);
            let mut chosen = *eligible.last().unwrap();
            for (&i, &w) in eligible.iter().zip(&weights) {
                if x < w {
                    chosen = i;
                    break;
                }
                x -= w;
            }
            ledger.bump(&chain.actions[chosen], slot);
            placed[chosen] = true;
            order.push(chain.actions[chosen].clone());
        }
        out.push(ActionChain { actions: order });
    }
    Ok(out)
}

/// Assigns each action an independent multiplier from `multiplier_set` and
/// resolves per-action scenes (the video scene when the action allows it,
/// otherwise a seeded draw from the action's own scenes).
pub fn assign_durations(
    ordering: &ActionChain,
    catalog: &Catalog,
    multiplier_set: &[f64],
    scene: &str,
    agent: &str,
    rng: &mut ChaCha12Rng,
) -> Result<ActivityManuscript> {
    if multiplier_set.is_empty() {
        return Err(Error::InvalidArgument("multiplier set is empty".into()));
    }
    if let Some(&bad) = multiplier_set.iter().find(|&&m| m <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "multiplier set contains non-positive value {bad}"
        )));
    }
    let mut actions = Vec::with_capacity(ordering.actions.len());
    for id in &ordering.actions {
        let spec = catalog.require(id)?;
        let multiplier = multiplier_set[rng.gen_range(0..multiplier_set.len())];
        let action_scene = if spec.valid_scenes.iter().any(|s| s == scene) {
            scene.to_string()
        } else {
            spec.valid_scenes[rng.gen_range(0..spec.valid_scenes.len())].clone()
        };
        actions.push(ManuscriptAction {
            action_id: id.clone(),
            multiplier,
            duration: spec.base_duration * multiplier,
            scene: action_scene,
        });
    }
    Ok(ActivityManuscript {
        actions,
        scene: scene.to_string(),
        agent: agent.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ActionSpec;
    use crate::graph::{build_graph, chain_is_valid, CommonsenseRuleSet};
    use rand_chacha::rand_core::SeedableRng;

    fn catalog_of(ids: &[&str]) -> Catalog {
        Catalog::new(
            ids.iter()
                .map(|id| ActionSpec {
                    action_id: id.to_string(),
                    verb: "do".into(),
                    object: id.to_string(),
                    base_duration: 8.0,
                    valid_scenes: vec!["kitchen".into()],
                    verb_3sg: "does".into(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn graph_with(ids: &[&str], pre: &[(&str, &str)]) -> ActivityGraph {
        let rules = CommonsenseRuleSet::new(
            catalog_of(ids),
            pre.iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            vec![],
        )
        .unwrap();
        build_graph(&rules).unwrap()
    }

    fn chain(ids: &[&str]) -> ActionChain {
        ActionChain {
            actions: ids.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Brute-force oracle: all permutations of the chain that are valid
    /// topological orders under the graph.
    fn enumerate_valid_orders(c: &ActionChain, g: &ActivityGraph) -> Vec<Vec<String>> {
        fn permutations(items: &[String]) -> Vec<Vec<String>> {
            if items.len() <= 1 {
                return vec![items.to_vec()];
            }
            let mut out = Vec::new();
            for i in 0..items.len() {
                let mut rest = items.to_vec();
                let head = rest.remove(i);
                for mut tail in permutations(&rest) {
                    tail.insert(0, head.clone());
                    out.push(tail);
                }
            }
            out
        }
        permutations(&c.actions)
            .into_iter()
            .filter(|p| chain_is_valid(&ActionChain { actions: p.clone() }, g).valid)
            .collect()
    }

    #[test]
    fn singleton_chain_repeats() {
        let g = graph_with(&["A"], &[]);
        let mut ledger = PositionLedger::new();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let perms = permute_chain(&chain(&["A"]), &g, 3, &mut ledger, &mut rng).unwrap();
        assert_eq!(perms.len(), 3);
        assert!(perms.iter().all(|p| p.actions == vec!["A"]));
    }

    #[test]
    fn total_order_is_forced() {
        let g = graph_with(&["A", "B", "C"], &[("A", "B"), ("B", "C")]);
        let mut ledger = PositionLedger::new();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let perms = permute_chain(&chain(&["A", "B", "C"]), &g, 10, &mut ledger, &mut rng).unwrap();
        assert!(perms.iter().all(|p| p.actions == vec!["A", "B", "C"]));
    }

    #[test]
    fn permutations_match_ledger_balanced_target() {
        // A free, B free, C requires A; valid orders: ABC, ACB, BAC.
        // The slot-0 decision balances A vs B; given A first, slot-1
        // balances B vs C. Fixed point: BAC 1/2, ABC 1/4, ACB 1/4.
        let g = graph_with(&["A", "B", "C"], &[("A", "C")]);
        let c = chain(&["A", "B", "C"]);
        let valid = enumerate_valid_orders(&c, &g);
        assert_eq!(valid.len(), 3);

        let mut ledger = PositionLedger::new();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut freq: BTreeMap<Vec<String>, f64> = BTreeMap::new();
        let draws = 600;
        for p in permute_chain(&c, &g, draws, &mut ledger, &mut rng).unwrap() {
            assert!(
                valid.contains(&p.actions),
                "invalid permutation {:?}",
                p.actions
            );
            *freq.entry(p.actions).or_insert(0.0) += 1.0 / draws as f64;
        }
        let target: BTreeMap<Vec<String>, f64> = [
            (vec!["A".to_string(), "B".into(), "C".into()], 0.25),
            (vec!["A".to_string(), "C".into(), "B".into()], 0.25),
            (vec!["B".to_string(), "A".into(), "C".into()], 0.5),
        ]
        .into_iter()
        .collect();
        for (order, t) in target {
            let f = freq.get(&order).copied().unwrap_or(0.0);
            assert!((f - t).abs() < 0.05, "{order:?}: {f} vs target {t}");
        }
    }

    #[test]
    fn position_coverage_within_allowed_slots() {
        let g = graph_with(&["A", "B", "C"], &[("A", "C")]);
        let c = chain(&["A", "B", "C"]);
        let mut ledger = PositionLedger::new();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let mut seen: BTreeMap<(String, usize), bool> = BTreeMap::new();
        for p in permute_chain(&c, &g, 200, &mut ledger, &mut rng).unwrap() {
            for (slot, id) in p.actions.iter().enumerate() {
                seen.insert((id.clone(), slot), true);
            }
        }
        // allowed: A {0,1}, B {0,1,2}, C {1,2}
        for (id, slots) in [("A", vec![0, 1]), ("B", vec![0, 1, 2]), ("C", vec![1, 2])] {
            for slot in slots {
                assert!(
                    seen.contains_key(&(id.to_string(), slot)),
                    "{id} never appeared at slot {slot}"
                );
            }
        }
    }

    #[test]
    fn blocker_edges_constrain_permutations() {
        // close blocks grab: grab must stay before close in every permutation
        let rules = CommonsenseRuleSet::new(
            catalog_of(&["open", "grab", "close"]),
            vec![
                ("open".to_string(), "grab".to_string()),
                ("open".to_string(), "close".to_string()),
            ],
            vec![("close".to_string(), "grab".to_string())],
        )
        .unwrap();
        let g = build_graph(&rules).unwrap();
        let c = chain(&["open", "grab", "close"]);
        let mut ledger = PositionLedger::new();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for p in permute_chain(&c, &g, 100, &mut ledger, &mut rng).unwrap() {
            assert!(chain_is_valid(&p, &g).valid, "invalid {:?}", p.actions);
            let grab = p.actions.iter().position(|a| a == "grab").unwrap();
            let close = p.actions.iter().position(|a| a == "close").unwrap();
            assert!(grab < close);
        }
    }

    #[test]
    fn identity_multiplier_set() {
        let cat = catalog_of(&["A", "B"]);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let m = assign_durations(&chain(&["A", "B"]), &cat, &[1.0], "kitchen", "agent_1", &mut rng)
            .unwrap();
        assert!(m.actions.iter().all(|a| a.duration == 8.0));
    }

    #[test]
    fn multiplier_arithmetic() {
        let cat = catalog_of(&["A"]);
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let m = assign_durations(&chain(&["A"]), &cat, &[0.5], "kitchen", "agent_1", &mut rng)
            .unwrap();
        assert_eq!(m.actions[0].duration, 4.0);
    }

    #[test]
    fn multiplier_frequencies_uniform() {
        let cat = catalog_of(&["A"]);
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let set = [0.5, 1.0, 2.0];
        let mut counts = BTreeMap::new();
        for _ in 0..30_000 {
            let m = assign_durations(&chain(&["A"]), &cat, &set, "kitchen", "agent_1", &mut rng)
                .unwrap();
            *counts
                .entry(format!("{}", m.actions[0].multiplier))
                .or_insert(0u64) += 1;
        }
        for v in counts.values() {
            let f = *v as f64 / 30_000.0;
            assert!((f - 1.0 / 3.0).abs() < 0.01, "freq {f}");
        }
    }

    #[test]
    fn rejects_bad_multiplier_set() {
        let cat = catalog_of(&["A"]);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        assert!(assign_durations(&chain(&["A"]), &cat, &[], "kitchen", "a", &mut rng).is_err());
        assert!(
            assign_durations(&chain(&["A"]), &cat, &[1.0, -0.5], "kitchen", "a", &mut rng).is_err()
        );
    }

    #[test]
    fn add_preserves_order_and_identity() {
        let cat = catalog_of(&["A", "B", "C"]);
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let m = assign_durations(
            &chain(&["C", "A", "B"]),
            &cat,
            &[0.5, 1.5],
            "kitchen",
            "agent_1",
            &mut rng,
        )
        .unwrap();
        let ids: Vec<&str> = m.actions.iter().map(|a| a.action_id.as_str()).collect();
        assert_eq!(ids, vec!["C", "A", "B"]);
    }

    #[test]
    fn determinism_for_fixed_seed_and_ledger() {
        let g = graph_with(&["A", "B", "C"], &[("A", "C")]);
        let c = chain(&["A", "B", "C"]);
        let run = || {
            let mut ledger = PositionLedger::new();
            let mut rng = ChaCha12Rng::seed_from_u64(11);
            permute_chain(&c, &g, 20, &mut ledger, &mut rng)
                .unwrap()
                .into_iter()
                .map(|p| p.actions)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
