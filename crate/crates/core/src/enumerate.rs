//! Flattening suffix networks into finite lists of endings.
//!
//! A path walks the root graph, descending into a callee on every call arc
//! and returning to the caller when the callee reaches a final state. Cycles
//! are broken at back edges: arcs that close a cycle in a depth-first search
//! of a graph's own states, and call arcs that close a cycle in a
//! depth-first search of the call graph from the root. Each back edge may be
//! taken at most `max_unroll` times on one path.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::hangul::{self, LetterString};
use crate::resources::{ArcLabel, CsId, CsRegistry, Graph, MorphemeArc, SuffixRtn};

pub const DEFAULT_PATH_CAP: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CyclePolicy {
    /// How often one path may take any single back edge.
    pub max_unroll: u32,
    /// Upper bound on accepting paths per root.
    pub max_paths: usize,
}

impl Default for CyclePolicy {
    fn default() -> Self {
        CyclePolicy { max_unroll: 0, max_paths: DEFAULT_PATH_CAP }
    }
}

impl CyclePolicy {
    pub fn with_unroll(max_unroll: u32) -> Self {
        CyclePolicy { max_unroll, ..Self::default() }
    }
}

type CallFrame<'a> = (&'a Graph, Vec<(usize, &'a str)>, usize);

/// A fully expanded sequence of suffix morphemes.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EndingSequence {
    pub surface: LetterString,
    pub morphemes: Vec<MorphemeArc>,
}

impl EndingSequence {
    pub fn empty() -> Self {
        EndingSequence { surface: Vec::new(), morphemes: Vec::new() }
    }

    fn from_morphemes(morphemes: Vec<MorphemeArc>) -> Self {
        let surface = morphemes.iter().flat_map(|m| m.surface.iter().copied()).collect();
        EndingSequence { surface, morphemes }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumerateError {
    #[error("root graph `{0}` not found")]
    RootNotFound(String),
    #[error("graph `{caller}` calls undefined graph `{callee}`")]
    UndefinedGraph { caller: String, callee: String },
    #[error("more than {cap} paths from root `{root}`")]
    PathExplosion { root: String, cap: usize },
    #[error("CS `{cs}`: {source}")]
    InCs { cs: String, source: Box<EnumerateError> },
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum BackEdge<'a> {
    Arc(&'a str, usize),
    Call(&'a str, usize),
}

struct Walker<'a> {
    rtn: &'a SuffixRtn,
    root: &'a str,
    policy: CyclePolicy,
    adjacency: HashMap<&'a str, Vec<Vec<usize>>>,
    back_arcs: HashSet<BackEdge<'a>>,
    used: HashMap<BackEdge<'a>, u32>,
    returns: Vec<(&'a Graph, usize)>,
    morphemes: Vec<&'a MorphemeArc>,
    emitted: usize,
    out: Vec<EndingSequence>,
}

impl<'a> Walker<'a> {
    fn new(rtn: &'a SuffixRtn, root: &'a Graph, policy: CyclePolicy) -> Result<Self, EnumerateError> {
        let mut walker = Walker {
            rtn,
            root: &root.name,
            policy,
            adjacency: HashMap::new(),
            back_arcs: HashSet::new(),
            used: HashMap::new(),
            returns: Vec::new(),
            morphemes: Vec::new(),
            emitted: 0,
            out: Vec::new(),
        };
        walker.find_call_back_edges(root)?;
        Ok(walker)
    }

    /// DFS over the call graph from the root; also records each reached
    /// graph's own back arcs and adjacency.
    fn find_call_back_edges(&mut self, root: &'a Graph) -> Result<(), EnumerateError> {
        // 1 = on the DFS stack, 2 = finished
        let mut color: HashMap<&'a str, u8> = HashMap::new();
        // (graph, its call arcs, next call to visit)
        let mut stack: Vec<CallFrame<'a>> = Vec::new();
        color.insert(&root.name, 1);
        self.index_graph(root);
        stack.push((root, root.calls().collect(), 0));
        while let Some((graph, calls, next)) = stack.last_mut() {
            let graph: &'a Graph = graph;
            if let Some(&(arc, callee)) = calls.get(*next) {
                *next += 1;
                let target = self.rtn.get(callee).ok_or_else(|| EnumerateError::UndefinedGraph {
                    caller: graph.name.clone(),
                    callee: callee.to_string(),
                })?;
                match color.get(callee).copied().unwrap_or(0) {
                    0 => {
                        color.insert(&target.name, 1);
                        self.index_graph(target);
                        stack.push((target, target.calls().collect(), 0));
                    }
                    1 => {
                        self.back_arcs.insert(BackEdge::Call(&graph.name, arc));
                    }
                    _ => {}
                }
            } else {
                color.insert(&graph.name, 2);
                stack.pop();
            }
        }
        Ok(())
    }

    fn index_graph(&mut self, graph: &'a Graph) {
        let adj = graph.adjacency();
        let mut color = vec![0u8; graph.state_count];
        let mut stack = vec![(graph.initial, 0usize)];
        color[graph.initial] = 1;
        while let Some(&mut (state, ref mut next)) = stack.last_mut() {
            if let Some(&arc) = adj[state].get(*next) {
                *next += 1;
                let dst = graph.arcs[arc].dst;
                match color[dst] {
                    0 => {
                        color[dst] = 1;
                        stack.push((dst, 0));
                    }
                    1 => {
                        self.back_arcs.insert(BackEdge::Arc(&graph.name, arc));
                    }
                    _ => {}
                }
            } else {
                color[state] = 2;
                stack.pop();
            }
        }
        self.adjacency.insert(&graph.name, adj);
    }

    fn take(&mut self, edge: BackEdge<'a>) -> bool {
        if !self.back_arcs.contains(&edge) {
            return true;
        }
        let used = self.used.entry(edge).or_insert(0);
        if *used >= self.policy.max_unroll {
            return false;
        }
        *used += 1;
        true
    }

    fn release(&mut self, edge: BackEdge<'a>) {
        if let Some(used) = self.used.get_mut(&edge) {
            *used = used.saturating_sub(1);
        }
    }

    fn visit(&mut self, graph: &'a Graph, state: usize) -> Result<(), EnumerateError> {
        if graph.is_final(state) {
            if let Some((caller, ret)) = self.returns.pop() {
                let result = self.visit(caller, ret);
                self.returns.push((caller, ret));
                result?;
            } else {
                self.emit()?;
            }
        }
        let arcs = self.adjacency[graph.name.as_str()][state].clone();
        for a in arcs {
            let arc = &graph.arcs[a];
            let own = BackEdge::Arc(&graph.name, a);
            if !self.take(own) {
                continue;
            }
            let result = match &arc.label {
                ArcLabel::Morpheme(m) => {
                    self.morphemes.push(m);
                    let r = self.visit(graph, arc.dst);
                    self.morphemes.pop();
                    r
                }
                ArcLabel::Call(callee) => {
                    let call = BackEdge::Call(&graph.name, a);
                    if self.take(call) {
                        let target = self.rtn.get(callee).ok_or_else(|| EnumerateError::UndefinedGraph {
                            caller: graph.name.clone(),
                            callee: callee.clone(),
                        })?;
                        self.returns.push((graph, arc.dst));
                        let r = self.visit(target, target.initial);
                        self.returns.pop();
                        self.release(call);
                        r
                    } else {
                        Ok(())
                    }
                }
                // Rule arcs never occur in validated suffix graphs.
                _ => Ok(()),
            };
            self.release(own);
            result?;
        }
        Ok(())
    }

    fn emit(&mut self) -> Result<(), EnumerateError> {
        self.emitted += 1;
        if self.emitted > self.policy.max_paths {
            return Err(EnumerateError::PathExplosion { root: self.root.to_string(), cap: self.policy.max_paths });
        }
        self.out
            .push(EndingSequence::from_morphemes(self.morphemes.iter().map(|&m| m.clone()).collect()));
        Ok(())
    }
}

/// All accepting paths from `root`, deduplicated and sorted by surface, then
/// by morpheme decomposition.
pub fn enumerate_paths(
    rtn: &SuffixRtn,
    root: &str,
    policy: CyclePolicy,
) -> Result<Vec<EndingSequence>, EnumerateError> {
    let root_graph = rtn.get(root).ok_or_else(|| EnumerateError::RootNotFound(root.to_string()))?;
    let mut walker = Walker::new(rtn, root_graph, policy)?;
    walker.visit(root_graph, root_graph.initial)?;
    let mut out = walker.out;
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// One ending list per CS, computed in parallel and keyed in CS order.
pub fn enumerate_all(
    rtn: &SuffixRtn,
    registry: &CsRegistry,
    policy: CyclePolicy,
) -> Result<BTreeMap<CsId, Vec<EndingSequence>>, EnumerateError> {
    let entries: Vec<_> = registry.iter().collect();
    entries
        .par_iter()
        .map(|(cs, entry)| {
            enumerate_paths(rtn, &entry.root_graph, policy)
                .map(|list| ((*cs).clone(), list))
                .map_err(|e| EnumerateError::InCs { cs: cs.to_string(), source: Box::new(e) })
        })
        .collect()
}

/// Debug listing: `surface<TAB>base1.tag1+base2.tag2+...` per ending, with
/// the empty surface written `0`.
pub fn format_endings(endings: &[EndingSequence]) -> String {
    let mut out = String::new();
    for e in endings {
        if e.surface.is_empty() {
            out.push('0');
        } else {
            out.push_str(&hangul::compose_letters(&e.surface));
        }
        out.push('\t');
        let parts: Vec<String> = e
            .morphemes
            .iter()
            .map(|m| format!("{}.{}", hangul::compose_letters(&m.base), m.tag))
            .collect();
        out.push_str(&parts.join("+"));
        out.push('\n');
    }
    out
}
