//! Commonsense activity graph and logical action chain sampling.
//!
//! Rule file format, one rule per line:
//!
//! ```text
//! PRE <a> BEFORE <b>      # a is a precondition of b
//! BLOCK <a> BLOCKS <b>    # b is invalid once a has happened
//! ```
//!
//! Chains grow by stepwise frontier expansion (randomized topological
//! growth): at each step the eligible candidates are the actions not yet
//! chosen whose preconditions are all in the chain and none of whose
//! blockers are. Candidate draws are re-weighted by inverse selection count
//! so rarely-eligible actions catch up toward uniform coverage.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::{Error, Result};

/// Precondition and blocker rules over a catalog.
#[derive(Debug, Clone)]
pub struct CommonsenseRuleSet {
    pub catalog: Catalog,
    /// (a, b): a must precede b whenever b appears.
    pub preconditions: Vec<(String, String)>,
    /// (a, b): b may not appear after a.
    pub blockers: Vec<(String, String)>,
}

impl CommonsenseRuleSet {
    pub fn new(
        catalog: Catalog,
        preconditions: Vec<(String, String)>,
        blockers: Vec<(String, String)>,
    ) -> Result<Self> {
        for (a, b) in preconditions.iter().chain(&blockers) {
            catalog.require(a)?;
            catalog.require(b)?;
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop rule on {a}")));
            }
        }
        Ok(Self {
            catalog,
            preconditions,
            blockers,
        })
    }

    pub fn load(catalog: Catalog, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(catalog, &text, &path.display().to_string())
    }

    pub fn parse(catalog: Catalog, text: &str, origin: &str) -> Result<Self> {
        let mut pre = Vec::new();
        let mut block = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["PRE", a, "BEFORE", b] => pre.push((a.to_string(), b.to_string())),
                ["BLOCK", a, "BLOCKS", b] => block.push((a.to_string(), b.to_string())),
                _ => {
                    return Err(Error::Parse {
                        path: origin.to_string(),
                        line: lineno + 1,
                        message: format!("unrecognized rule {line:?}"),
                    })
                }
            }
        }
        Self::new(catalog, pre, block)
    }
}

/// Directed acyclic graph of actions with precondition and blocker edges.
#[derive(Debug, Clone)]
pub struct ActivityGraph {
    ids: Vec<String>,
    index: BTreeMap<String, usize>,
    /// preconditions[v] = actions that must be in the chain before v.
    preconditions: Vec<Vec<usize>>,
    /// blockers[v] = actions that forbid v once they have appeared.
    blockers: Vec<Vec<usize>>,
    /// dependents[v] = actions having v as a precondition.
    dependents: Vec<Vec<usize>>,
}

/// Builds the graph from a rule set, verifying acyclicity of the
/// precedence relation.
pub fn build_graph(rules: &CommonsenseRuleSet) -> Result<ActivityGraph> {
    let ids: Vec<String> = rules
        .catalog
        .actions()
        .iter()
        .map(|a| a.action_id.clone())
        .collect();
    let index: BTreeMap<String, usize> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i))
        .collect();
    let n = ids.len();
    let mut preconditions = vec![Vec::new(); n];
    let mut dependents = vec![Vec::new(); n];
    let mut blockers = vec![Vec::new(); n];
    for (a, b) in &rules.preconditions {
        let (ai, bi) = (index[a], index[b]);
        preconditions[bi].push(ai);
        dependents[ai].push(bi);
    }
    for (a, b) in &rules.blockers {
        blockers[index[b]].push(index[a]);
    }

    if let Some(cycle) = find_cycle(n, &dependents) {
        return Err(Error::GraphCycle(
            cycle.into_iter().map(|i| ids[i].clone()).collect(),
        ));
    }

    Ok(ActivityGraph {
        ids,
        index,
        preconditions,
        blockers,
        dependents,
    })
}

/// DFS cycle search over the precedence edges; returns one cycle if any.
fn find_cycle(n: usize, adj: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Gray,
        Black,
    }
    let mut mark = vec![Mark::White; n];
    let mut parent = vec![usize::MAX; n];
    for start in 0..n {
        if mark[start] != Mark::White {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        mark[start] = Mark::Gray;
        while let Some(&mut (v, ref mut ei)) = stack.last_mut() {
            if *ei < adj[v].len() {
                let w = adj[v][*ei];
                *ei += 1;
                match mark[w] {
                    Mark::White => {
                        mark[w] = Mark::Gray;
                        parent[w] = v;
                        stack.push((w, 0));
                    }
                    Mark::Gray => {
                        // reconstruct v -> ... -> w cycle
                        let mut cycle = vec![w];
                        let mut cur = v;
                        while cur != w {
                            cycle.push(cur);
                            cur = parent[cur];
                        }
                        cycle.reverse();
                        return Some(cycle);
                    }
                    Mark::Black => {}
                }
            } else {
                mark[v] = Mark::Black;
                stack.pop();
            }
        }
    }
    None
}

impl ActivityGraph {
    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn edge_count(&self) -> usize {
        self.dependents.iter().map(Vec::len).sum()
    }

    pub fn preconditions_of(&self, id: &str) -> Option<&[usize]> {
        self.index.get(id).map(|&i| self.preconditions[i].as_slice())
    }

    pub fn blockers_of(&self, node: usize) -> &[usize] {
        &self.blockers[node]
    }
}

/// Candidate weighting used while growing a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    /// Weight a candidate by 1 / (1 + times it was selected so far).
    InverseCount,
    /// Plain uniform draw among eligible candidates.
    Uniform,
}

/// Re-weighting memory plus the RNG stream for chain sampling.
#[derive(Debug, Clone)]
pub struct SamplerState {
    pub selection_counts: BTreeMap<String, u64>,
    rng: ChaCha12Rng,
}

impl SamplerState {
    pub fn new(seed: u64) -> Self {
        Self {
            selection_counts: BTreeMap::new(),
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    fn count(&self, id: &str) -> u64 {
        self.selection_counts.get(id).copied().unwrap_or(0)
    }
}

/// An ordered action sequence satisfiable from an empty initial state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActionChain {
    pub actions: Vec<String>,
}

impl ActionChain {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Validity verdict with the first violating action, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainVerdict {
    pub valid: bool,
    pub first_violation: Option<String>,
}

/// Checks that every member's preconditions appear earlier and none of its
/// blockers do. Repeated actions are also flagged (chains never repeat).
pub fn chain_is_valid(chain: &ActionChain, graph: &ActivityGraph) -> ChainVerdict {
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    for id in &chain.actions {
        let Some(v) = graph.node_index(id) else {
            return ChainVerdict {
                valid: false,
                first_violation: Some(id.clone()),
            };
        };
        let ok = !seen.contains(&v)
            && graph.preconditions[v].iter().all(|p| seen.contains(p))
            && graph.blockers[v].iter().all(|b| !seen.contains(b));
        if !ok {
            return ChainVerdict {
                valid: false,
                first_violation: Some(id.clone()),
            };
        }
        seen.insert(v);
    }
    ChainVerdict {
        valid: true,
        first_violation: None,
    }
}

const MAX_RESTARTS: usize = 50;

/// Samples one valid chain of the requested length.
///
/// Dead ends restart the traversal (up to 50 times) with fresh randomness
/// from the same stream before erroring. Selection counts are charged only
/// for the chain actually returned.
pub fn sample_chain(
    graph: &ActivityGraph,
    length: usize,
    state: &mut SamplerState,
    strategy: SamplingStrategy,
) -> Result<ActionChain> {
    if length < 1 {
        return Err(Error::InvalidArgument("chain length must be >= 1".into()));
    }
    if length > graph.node_count() {
        return Err(Error::InvalidArgument(format!(
            "chain length {length} exceeds node count {}",
            graph.node_count()
        )));
    }

    let mut best_partial: Vec<usize> = Vec::new();
    for restart in 0..=MAX_RESTARTS {
        let mut chain: Vec<usize> = Vec::with_capacity(length);
        let mut in_chain = vec![false; graph.node_count()];
        let mut dead = false;
        while chain.len() < length {
            let eligible: Vec<usize> = (0..graph.node_count())
                .filter(|&v| {
                    !in_chain[v]
                        && graph.preconditions[v].iter().all(|&p| in_chain[p])
                        && graph.blockers[v].iter().all(|&b| !in_chain[b])
                })
                .collect();
            if eligible.is_empty() {
                dead = true;
                break;
            }
            let pick = match strategy {
                SamplingStrategy::Uniform => eligible[state.rng.gen_range(0..eligible.len())],
                SamplingStrategy::InverseCount => {
                    let weights: Vec<f64> = eligible
                        .iter()
                        .map(|&v| 1.0 / (1.0 + state.count(&graph.ids[v]) as f64))
                        .collect();
                    let total: f64 = weights.iter().sum();
                    let mut x = state.rng.gen_range(0.0..total);
                    let mut chosen = *eligible.last().unwrap();
                    for (&v, &w) in eligible.iter().zip(&weights) {
                        if x < w {
                            chosen = v;
                            break;
                        }
                        x -= w;
                    }
                    chosen
                }
            };
            chain.push(pick);
            in_chain[pick] = true;
        }
        if !dead {
            for &v in &chain {
                *state
                    .selection_counts
                    .entry(graph.ids[v].clone())
                    .or_insert(0) += 1;
            }
            return Ok(ActionChain {
                actions: chain.into_iter().map(|v| graph.ids[v].clone()).collect(),
            });
        }
        if chain.len() > best_partial.len() {
            best_partial = chain;
        }
        let _ = restart;
    }
    Err(Error::ChainDeadEnd {
        wanted: length,
        got: best_partial.len(),
        restarts: MAX_RESTARTS,
        partial: best_partial
            .into_iter()
            .map(|v| graph.ids[v].clone())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog_of(ids: &[&str]) -> Catalog {
        let actions = ids
            .iter()
            .map(|id| crate::catalog::ActionSpec {
                action_id: id.to_string(),
                verb: "do".into(),
                object: id.to_string(),
                base_duration: 5.0,
                valid_scenes: vec!["kitchen".into()],
                verb_3sg: "does".into(),
            })
            .collect();
        Catalog::new(actions).unwrap()
    }

    fn fridge_rules() -> CommonsenseRuleSet {
        let catalog = catalog_of(&[
            "walk-to-fridge",
            "open-fridge",
            "grab-sandwich",
            "close-fridge",
        ]);
        CommonsenseRuleSet::parse(
            catalog,
            "PRE walk-to-fridge BEFORE open-fridge\n\
             PRE open-fridge BEFORE grab-sandwich\n\
             PRE open-fridge BEFORE close-fridge\n\
             BLOCK close-fridge BLOCKS grab-sandwich\n",
            "test",
        )
        .unwrap()
    }

    #[test]
    fn empty_rules_give_isolated_nodes() {
        let rules = CommonsenseRuleSet::new(catalog_of(&["a", "b", "c"]), vec![], vec![]).unwrap();
        let g = build_graph(&rules).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn fridge_dag_has_three_edges() {
        let g = build_graph(&fridge_rules()).unwrap();
        assert_eq!(g.edge_count(), 3);
        assert_eq!(
            g.preconditions_of("open-fridge").unwrap().len(),
            1
        );
    }

    #[test]
    fn cycle_is_reported_with_members() {
        let catalog = catalog_of(&["a", "b"]);
        let rules = CommonsenseRuleSet::new(
            catalog,
            vec![("a".into(), "b".into()), ("b".into(), "a".into())],
            vec![],
        )
        .unwrap();
        match build_graph(&rules) {
            Err(Error::GraphCycle(members)) => {
                assert!(members.contains(&"a".to_string()));
                assert!(members.contains(&"b".to_string()));
            }
            other => panic!("expected cycle error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_action_in_rule_rejected() {
        let catalog = catalog_of(&["a"]);
        assert!(CommonsenseRuleSet::new(
            catalog,
            vec![("a".into(), "ghost".into())],
            vec![]
        )
        .is_err());
    }

    #[test]
    fn fridge_chain_validity() {
        let g = build_graph(&fridge_rules()).unwrap();
        let ok = ActionChain {
            actions: vec![
                "walk-to-fridge".into(),
                "open-fridge".into(),
                "close-fridge".into(),
            ],
        };
        assert!(chain_is_valid(&ok, &g).valid);

        let bad = ActionChain {
            actions: vec![
                "walk-to-fridge".into(),
                "open-fridge".into(),
                "close-fridge".into(),
                "grab-sandwich".into(),
            ],
        };
        let verdict = chain_is_valid(&bad, &g);
        assert!(!verdict.valid);
        assert_eq!(verdict.first_violation.as_deref(), Some("grab-sandwich"));
    }

    #[test]
    fn empty_chain_is_vacuously_valid() {
        let g = build_graph(&fridge_rules()).unwrap();
        assert!(chain_is_valid(&ActionChain { actions: vec![] }, &g).valid);
    }

    #[test]
    fn forced_single_choice() {
        let catalog = catalog_of(&["a"]);
        let g = build_graph(&CommonsenseRuleSet::new(catalog, vec![], vec![]).unwrap()).unwrap();
        let mut state = SamplerState::new(1);
        let chain = sample_chain(&g, 1, &mut state, SamplingStrategy::InverseCount).unwrap();
        assert_eq!(chain.actions, vec!["a"]);
    }

    #[test]
    fn length_exceeding_node_count_errors() {
        let catalog = catalog_of(&["a", "b"]);
        let g = build_graph(&CommonsenseRuleSet::new(catalog, vec![], vec![]).unwrap()).unwrap();
        let mut state = SamplerState::new(1);
        assert!(sample_chain(&g, 3, &mut state, SamplingStrategy::Uniform).is_err());
    }

    #[test]
    fn restarts_recover_from_dead_ends() {
        // b blocked by a, c requires b: full chains must start with b, so
        // any traversal that picks a first dead-ends and must restart.
        let catalog = catalog_of(&["a", "b", "c"]);
        let rules = CommonsenseRuleSet::new(
            catalog,
            vec![("b".into(), "c".into())],
            vec![("a".into(), "b".into())],
        )
        .unwrap();
        let g = build_graph(&rules).unwrap();
        let mut state = SamplerState::new(3);
        for _ in 0..20 {
            let chain = sample_chain(&g, 3, &mut state, SamplingStrategy::Uniform).unwrap();
            assert!(chain_is_valid(&chain, &g).valid);
            assert_eq!(chain.actions[0], "b");
        }
    }

    #[test]
    fn sampled_chains_are_always_valid() {
        let g = build_graph(&fridge_rules()).unwrap();
        let mut state = SamplerState::new(7);
        for _ in 0..500 {
            let chain = sample_chain(&g, 3, &mut state, SamplingStrategy::InverseCount).unwrap();
            assert!(chain_is_valid(&chain, &g).valid, "invalid: {chain:?}");
            let unique: BTreeSet<_> = chain.actions.iter().collect();
            assert_eq!(unique.len(), chain.actions.len(), "repeat in {chain:?}");
        }
    }

    #[test]
    fn determinism_same_seed_same_chains() {
        let g = build_graph(&fridge_rules()).unwrap();
        let run = |seed| {
            let mut state = SamplerState::new(seed);
            (0..50)
                .map(|_| {
                    sample_chain(&g, 3, &mut state, SamplingStrategy::InverseCount)
                        .unwrap()
                        .actions
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn reweighting_balances_symmetric_successors() {
        // A free; B, C, D each require A
        let catalog = catalog_of(&["A", "B", "C", "D"]);
        let rules = CommonsenseRuleSet::new(
            catalog,
            vec![
                ("A".into(), "B".into()),
                ("A".into(), "C".into()),
                ("A".into(), "D".into()),
            ],
            vec![],
        )
        .unwrap();
        let g = build_graph(&rules).unwrap();
        let mut state = SamplerState::new(99);
        let mut second = BTreeMap::new();
        for _ in 0..10_000 {
            let chain = sample_chain(&g, 2, &mut state, SamplingStrategy::InverseCount).unwrap();
            assert_eq!(chain.actions[0], "A");
            *second.entry(chain.actions[1].clone()).or_insert(0u64) += 1;
        }
        for id in ["B", "C", "D"] {
            let f = second[id] as f64 / 10_000.0;
            assert!((f - 1.0 / 3.0).abs() < 0.02, "{id} at {f}");
        }
    }

    #[test]
    fn reweighting_beats_uniform_on_skewed_fixture() {
        // Six free actions plus three dependents, each requiring a distinct
        // free action. Dependents are rarely eligible under uniform draws;
        // inverse-count weighting picks them nearly every time they are,
        // roughly halving the gap to a uniform action distribution.
        let ids = ["F1", "F2", "F3", "F4", "F5", "F6", "Z1", "Z2", "Z3"];
        let catalog = catalog_of(&ids);
        let rules = CommonsenseRuleSet::new(
            catalog,
            vec![
                ("F1".to_string(), "Z1".to_string()),
                ("F2".to_string(), "Z2".to_string()),
                ("F3".to_string(), "Z3".to_string()),
            ],
            vec![],
        )
        .unwrap();
        let g = build_graph(&rules).unwrap();

        let freq_jsd = |strategy: SamplingStrategy| {
            let mut state = SamplerState::new(4242);
            for _ in 0..20_000 {
                sample_chain(&g, 3, &mut state, strategy).unwrap();
            }
            let total: u64 = state.selection_counts.values().sum();
            let p: Vec<f64> = ids
                .iter()
                .map(|id| state.count(id) as f64 / total as f64)
                .collect();
            let u = vec![1.0 / ids.len() as f64; ids.len()];
            crate::metrics::jsd(&p, &u).unwrap()
        };

        let rw = freq_jsd(SamplingStrategy::InverseCount);
        let un = freq_jsd(SamplingStrategy::Uniform);
        assert!(rw < 0.05, "reweighted JSD {rw} should be near uniform");
        assert!(
            2.0 * rw < un,
            "reweighted {rw} should be well below uniform {un}"
        );
    }

    #[test]
    fn reweighting_converges_to_uniform_when_all_eligible() {
        let ids = ["a", "b", "c", "d", "e", "f"];
        let catalog = catalog_of(&ids);
        let g = build_graph(&CommonsenseRuleSet::new(catalog, vec![], vec![]).unwrap()).unwrap();
        let mut state = SamplerState::new(5);
        for _ in 0..50_000 {
            sample_chain(&g, 2, &mut state, SamplingStrategy::InverseCount).unwrap();
        }
        let total: u64 = state.selection_counts.values().sum();
        let p: Vec<f64> = ids
            .iter()
            .map(|id| state.count(id) as f64 / total as f64)
            .collect();
        let u = vec![1.0 / ids.len() as f64; ids.len()];
        assert!(crate::metrics::jsd(&p, &u).unwrap() < 0.01);
    }
}
