//! Iterative select / process / verify / hypothesize loop over pluggable
//! components.
//!
//! [`run_asm`] segments an input with an initially selected algorithm, builds
//! a relational graph of the result and then repeatedly asks a verifier for
//! contradictions. Each contradiction set yields a hypothesis, which drives
//! the selection of another algorithm whose graph is merged into the current
//! one. The loop stops when the graph is consistent, the hypothesis or the
//! selected algorithm repeats, or `max_iterations` passes have run.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub mod synthetic;

pub type RegionId = u32;
pub type Label = u32;
pub type AlgorithmId = String;
pub type Features = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Size,
    Shape,
    Proximity,
    Occurrence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub id: RegionId,
    pub label: Label,
}

/// Output of one algorithm run: labelled regions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub regions: Vec<Region>,
}

/// Labelled regions and the relations between them. A pair of regions
/// carries at most one relation tag.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationalGraph {
    nodes: BTreeMap<RegionId, Label>,
    edges: BTreeMap<(RegionId, RegionId), Relation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingNode(pub RegionId);

impl fmt::Display for MissingNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "edge endpoint {} is not a node", self.0)
    }
}

impl std::error::Error for MissingNode {}

impl RelationalGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_node(&mut self, region: RegionId, label: Label) {
        self.nodes.insert(region, label);
    }

    pub fn insert_edge(&mut self, from: RegionId, to: RegionId, tag: Relation) -> Result<(), MissingNode> {
        for end in [from, to] {
            if !self.nodes.contains_key(&end) {
                return Err(MissingNode(end));
            }
        }
        self.edges.insert((from, to), tag);
        Ok(())
    }

    pub fn label(&self, region: RegionId) -> Option<Label> {
        self.nodes.get(&region).copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (RegionId, Label)> + '_ {
        self.nodes.iter().map(|(&r, &l)| (r, l))
    }

    pub fn edges(&self) -> impl Iterator<Item = (RegionId, RegionId, Relation)> + '_ {
        self.edges.iter().map(|(&(a, b), &t)| (a, b, t))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Union of both graphs; where they disagree on a node label or on the tag
/// of an edge, `new` wins.
pub fn merge_graphs(old: &RelationalGraph, new: &RelationalGraph) -> RelationalGraph {
    let mut merged = old.clone();
    merged.nodes.extend(new.nodes.iter().map(|(&r, &l)| (r, l)));
    merged.edges.extend(new.edges.iter().map(|(&k, &t)| (k, t)));
    merged
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contradiction {
    pub region_id: RegionId,
    pub violated_relation: Relation,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub proposed_label: Label,
    pub target_region: RegionId,
    pub attributes: BTreeMap<String, String>,
}

pub trait FeatureExtractor<I: ?Sized> {
    fn whole(&self, input: &I) -> Features;
    fn region(&self, input: &I, contradictions: &[Contradiction]) -> Features;
}

pub trait Selector {
    fn initial(&self, features: &Features, algorithms: &[AlgorithmId]) -> AlgorithmId;
    fn reselect(&self, features: &Features, hypothesis: &Hypothesis, algorithms: &[AlgorithmId]) -> AlgorithmId;
}

pub trait AlgorithmRegistry<I: ?Sized> {
    fn ids(&self) -> Vec<AlgorithmId>;
    /// `None` when `id` is not registered.
    fn run(&self, id: &str, input: &I) -> Option<Segmentation>;
}

pub trait GraphBuilder {
    fn build(&self, segmentation: &Segmentation) -> RelationalGraph;
}

pub trait Verifier {
    fn verify(&self, graph: &RelationalGraph) -> Vec<Contradiction>;
}

pub trait Hypothesizer {
    fn hypothesize(&self, contradictions: &[Contradiction], graph: &RelationalGraph) -> Hypothesis;
}

pub trait Merger {
    fn merge(&self, old: &RelationalGraph, new: &RelationalGraph) -> RelationalGraph;
}

/// [`merge_graphs`] as a component.
#[derive(Debug, Clone, Copy, Default)]
pub struct OverrideMerger;

impl Merger for OverrideMerger {
    fn merge(&self, old: &RelationalGraph, new: &RelationalGraph) -> RelationalGraph {
        merge_graphs(old, new)
    }
}

pub struct AsmComponents<'a, I: ?Sized> {
    pub feature_extractor: &'a dyn FeatureExtractor<I>,
    pub selector: &'a dyn Selector,
    pub algorithm_registry: &'a dyn AlgorithmRegistry<I>,
    pub graph_builder: &'a dyn GraphBuilder,
    pub verifier: &'a dyn Verifier,
    pub hypothesizer: &'a dyn Hypothesizer,
    pub merger: &'a dyn Merger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitReason {
    /// The verifier found no contradiction.
    NoContradiction,
    /// The hypothesis equals the previous one.
    RepeatedHypothesis,
    /// The selector chose the algorithm that produced the current graph.
    RepeatedAlgorithm,
    /// `max_iterations` loop passes completed.
    IterationLimit,
}

impl ExitReason {
    /// Single-letter code: a, b, c for the loop's own exits, d for the limit.
    pub fn code(&self) -> char {
        match self {
            ExitReason::NoContradiction => 'a',
            ExitReason::RepeatedHypothesis => 'b',
            ExitReason::RepeatedAlgorithm => 'c',
            ExitReason::IterationLimit => 'd',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event_type", content = "payload", rename_all = "snake_case")]
pub enum AsmEvent {
    FeaturesExtracted { features: Features, regional: bool },
    AlgorithmSelected { algorithm: AlgorithmId },
    Processed { algorithm: AlgorithmId, regions: usize },
    GraphBuilt { nodes: usize, edges: usize },
    Verified { contradictions: Vec<Contradiction> },
    HypothesisGenerated { hypothesis: Hypothesis },
    GraphMerged { nodes: usize, edges: usize },
    Exit { reason: ExitReason },
    ContractViolation { detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    #[serde(flatten)]
    pub event: AsmEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsmState {
    pub iteration: usize,
    pub graph: RelationalGraph,
    pub last_hypothesis: Option<Hypothesis>,
    pub last_algorithm: Option<AlgorithmId>,
    pub trace: Vec<TraceRecord>,
    pub exit: Option<ExitReason>,
}

impl AsmState {
    fn record(&mut self, event: AsmEvent) {
        self.trace.push(TraceRecord {
            iteration: self.iteration,
            event,
        });
    }

    /// Trace as JSON lines, one record per event.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.trace {
            out.push_str(&serde_json::to_string(rec).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug)]
pub enum AsmError {
    InvalidIterationLimit,
    /// A component broke its contract; the trace up to the failure is kept.
    ContractViolation { detail: String, state: Box<AsmState> },
}

impl fmt::Display for AsmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AsmError::InvalidIterationLimit => write!(f, "max_iterations must be >= 1"),
            AsmError::ContractViolation { detail, state } => {
                write!(f, "component contract violated at iteration {}: {detail}", state.iteration)
            }
        }
    }
}

impl std::error::Error for AsmError {}

fn violation(mut state: AsmState, detail: String) -> AsmError {
    state.record(AsmEvent::ContractViolation {
        detail: detail.clone(),
    });
    AsmError::ContractViolation {
        detail,
        state: Box::new(state),
    }
}

fn process<I: ?Sized>(
    components: &AsmComponents<'_, I>,
    input: &I,
    algorithm: &str,
    state: &mut AsmState,
) -> Option<RelationalGraph> {
    let segmentation = components.algorithm_registry.run(algorithm, input)?;
    state.record(AsmEvent::Processed {
        algorithm: algorithm.to_owned(),
        regions: segmentation.regions.len(),
    });
    let graph = components.graph_builder.build(&segmentation);
    state.record(AsmEvent::GraphBuilt {
        nodes: graph.node_count(),
        edges: graph.edge_count(),
    });
    Some(graph)
}

pub fn run_asm<I: ?Sized>(
    input: &I,
    components: &AsmComponents<'_, I>,
    max_iterations: usize,
) -> Result<AsmState, AsmError> {
    if max_iterations == 0 {
        return Err(AsmError::InvalidIterationLimit);
    }
    let algorithms = components.algorithm_registry.ids();
    let mut state = AsmState {
        iteration: 0,
        graph: RelationalGraph::new(),
        last_hypothesis: None,
        last_algorithm: None,
        trace: Vec::new(),
        exit: None,
    };

    let features = components.feature_extractor.whole(input);
    state.record(AsmEvent::FeaturesExtracted {
        features: features.clone(),
        regional: false,
    });
    let first = components.selector.initial(&features, &algorithms);
    state.record(AsmEvent::AlgorithmSelected {
        algorithm: first.clone(),
    });
    let Some(graph) = process(components, input, &first, &mut state) else {
        return Err(violation(state, format!("selector returned unknown algorithm `{first}`")));
    };
    state.graph = graph;
    state.last_algorithm = Some(first);

    let reason = loop {
        let contradictions = components.verifier.verify(&state.graph);
        state.record(AsmEvent::Verified {
            contradictions: contradictions.clone(),
        });
        if contradictions.is_empty() {
            break ExitReason::NoContradiction;
        }
        if state.iteration >= max_iterations {
            break ExitReason::IterationLimit;
        }
        if let Some(c) = contradictions
            .iter()
            .find(|c| state.graph.label(c.region_id).is_none())
        {
            let detail = format!("contradiction names region {} absent from the graph", c.region_id);
            return Err(violation(state, detail));
        }

        let hypothesis = components.hypothesizer.hypothesize(&contradictions, &state.graph);
        state.record(AsmEvent::HypothesisGenerated {
            hypothesis: hypothesis.clone(),
        });
        if state.last_hypothesis.as_ref() == Some(&hypothesis) {
            break ExitReason::RepeatedHypothesis;
        }
        state.last_hypothesis = Some(hypothesis.clone());

        let features = components.feature_extractor.region(input, &contradictions);
        state.record(AsmEvent::FeaturesExtracted {
            features: features.clone(),
            regional: true,
        });
        let next = components.selector.reselect(&features, &hypothesis, &algorithms);
        state.record(AsmEvent::AlgorithmSelected {
            algorithm: next.clone(),
        });
        if state.last_algorithm.as_ref() == Some(&next) {
            break ExitReason::RepeatedAlgorithm;
        }

        let Some(new_graph) = process(components, input, &next, &mut state) else {
            return Err(violation(state, format!("selector returned unknown algorithm `{next}`")));
        };
        state.graph = components.merger.merge(&state.graph, &new_graph);
        state.record(AsmEvent::GraphMerged {
            nodes: state.graph.node_count(),
            edges: state.graph.edge_count(),
        });
        state.last_algorithm = Some(next);
        state.iteration += 1;
    };
    state.exit = Some(reason);
    state.record(AsmEvent::Exit { reason });
    Ok(state)
}
