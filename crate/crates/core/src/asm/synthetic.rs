//! Scripted components for exercising [`run_asm`](super::run_asm).
//!
//! A scene knows the label every region should carry. Algorithms are fixed
//! partial labellings, the verifier flags every region whose label differs
//! from the scene, and the hypothesizer proposes the expected label for the
//! first flagged region while recording the label it wants to move away from.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    AlgorithmId, AlgorithmRegistry, AsmComponents, AsmError, AsmState, Contradiction,
    FeatureExtractor, Features, GraphBuilder, Hypothesis, Hypothesizer, Label, OverrideMerger,
    Region, RegionId, Relation, RelationalGraph, Segmentation, Selector, Verifier,
};

/// Names accepted by [`Scenario::bundled`].
pub const SCENARIOS: [&str; 5] = [
    "no-contradiction",
    "stuck-hypothesis",
    "repeat-algorithm",
    "three-fixes",
    "oscillating-hypothesis",
];

pub const DEFAULT_MAX_ITERATIONS: usize = 16;

/// Expected label of every region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticScene {
    pub expected: BTreeMap<RegionId, Label>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedAlgorithm {
    pub id: AlgorithmId,
    pub output: BTreeMap<RegionId, Label>,
}

impl ScriptedAlgorithm {
    fn new(id: &str, output: &[(RegionId, Label)]) -> Self {
        Self {
            id: id.to_owned(),
            output: output.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub scene: SyntheticScene,
    pub algorithms: Vec<ScriptedAlgorithm>,
    pub initial: AlgorithmId,
}

/// On-disk scenario selector: `{"scenario": "<name>", "max_iterations": n}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub scenario: String,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}

impl Scenario {
    pub fn bundled(name: &str) -> Option<Self> {
        let expected: &[(RegionId, Label)] = &[(1, 10), (2, 20), (3, 30), (4, 40)];
        let algorithms = match name {
            "no-contradiction" => vec![ScriptedAlgorithm::new("base", expected)],
            // the only alternative repeats the wrong label, so the same
            // hypothesis comes back on the next pass
            "stuck-hypothesis" => vec![
                ScriptedAlgorithm::new("base", &[(1, 11), (2, 20), (3, 30), (4, 40)]),
                ScriptedAlgorithm::new("alt", &[(1, 11)]),
            ],
            "repeat-algorithm" => vec![ScriptedAlgorithm::new(
                "base",
                &[(1, 11), (2, 20), (3, 30), (4, 40)],
            )],
            "three-fixes" => vec![
                ScriptedAlgorithm::new("base", &[(1, 11), (2, 21), (3, 31), (4, 40)]),
                ScriptedAlgorithm::new("fix-1", &[(1, 10)]),
                ScriptedAlgorithm::new("fix-2", &[(2, 20)]),
                ScriptedAlgorithm::new("fix-3", &[(3, 30)]),
            ],
            // region 1 flips between two wrong labels forever
            "oscillating-hypothesis" => vec![
                ScriptedAlgorithm::new("base", &[(1, 11), (2, 20), (3, 30), (4, 40)]),
                ScriptedAlgorithm::new("flip", &[(1, 12)]),
            ],
            _ => return None,
        };
        Some(Self {
            name: name.to_owned(),
            scene: SyntheticScene {
                expected: expected.iter().copied().collect(),
            },
            initial: "base".to_owned(),
            algorithms,
        })
    }

    pub fn run(&self, max_iterations: usize) -> Result<AsmState, AsmError> {
        let model = SceneModel {
            expected: &self.scene.expected,
        };
        let registry = ScriptedRegistry {
            algorithms: &self.algorithms,
        };
        let selector = ScriptedSelector {
            initial: &self.initial,
            algorithms: &self.algorithms,
        };
        let components = AsmComponents {
            feature_extractor: &CountFeatures,
            selector: &selector,
            algorithm_registry: &registry,
            graph_builder: &ChainGraphBuilder,
            verifier: &model,
            hypothesizer: &model,
            merger: &OverrideMerger,
        };
        super::run_asm(&self.scene, &components, max_iterations)
    }
}

/// Region count for the whole scene; contradiction count and first region
/// for a contradiction set.
pub struct CountFeatures;

impl FeatureExtractor<SyntheticScene> for CountFeatures {
    fn whole(&self, input: &SyntheticScene) -> Features {
        vec![input.expected.len() as f64]
    }

    fn region(&self, _input: &SyntheticScene, contradictions: &[Contradiction]) -> Features {
        vec![
            contradictions.len() as f64,
            contradictions.first().map_or(0.0, |c| f64::from(c.region_id)),
        ]
    }
}

pub struct ScriptedRegistry<'a> {
    algorithms: &'a [ScriptedAlgorithm],
}

impl AlgorithmRegistry<SyntheticScene> for ScriptedRegistry<'_> {
    fn ids(&self) -> Vec<AlgorithmId> {
        self.algorithms.iter().map(|a| a.id.clone()).collect()
    }

    fn run(&self, id: &str, _input: &SyntheticScene) -> Option<Segmentation> {
        let alg = self.algorithms.iter().find(|a| a.id == id)?;
        Some(Segmentation {
            regions: alg
                .output
                .iter()
                .map(|(&id, &label)| Region { id, label })
                .collect(),
        })
    }
}

/// Re-selection order: an algorithm producing the proposed label for the
/// target region, else one producing any label other than the avoided one,
/// else the last algorithm covering the region, else the first registered.
pub struct ScriptedSelector<'a> {
    initial: &'a AlgorithmId,
    algorithms: &'a [ScriptedAlgorithm],
}

impl Selector for ScriptedSelector<'_> {
    fn initial(&self, _features: &Features, _algorithms: &[AlgorithmId]) -> AlgorithmId {
        self.initial.clone()
    }

    fn reselect(&self, _features: &Features, h: &Hypothesis, _algorithms: &[AlgorithmId]) -> AlgorithmId {
        let covering = || {
            self.algorithms
                .iter()
                .filter_map(|a| a.output.get(&h.target_region).map(|&l| (a, l)))
        };
        let avoid: Option<Label> = h.attributes.get("avoid").and_then(|v| v.parse().ok());
        covering()
            .find(|&(_, l)| l == h.proposed_label)
            .or_else(|| covering().find(|&(_, l)| Some(l) != avoid))
            .or_else(|| covering().next_back())
            .map(|(a, _)| a.id.clone())
            .unwrap_or_else(|| self.algorithms[0].id.clone())
    }
}

/// Nodes from the segmentation; proximity edges between consecutive region ids.
pub struct ChainGraphBuilder;

impl GraphBuilder for ChainGraphBuilder {
    fn build(&self, segmentation: &Segmentation) -> RelationalGraph {
        let mut g = RelationalGraph::new();
        for r in &segmentation.regions {
            g.insert_node(r.id, r.label);
        }
        let ids: Vec<RegionId> = g.nodes().map(|(r, _)| r).collect();
        for w in ids.windows(2) {
            g.insert_edge(w[0], w[1], Relation::Proximity)
                .expect("both endpoints were just inserted");
        }
        g
    }
}

pub struct SceneModel<'a> {
    expected: &'a BTreeMap<RegionId, Label>,
}

impl Verifier for SceneModel<'_> {
    fn verify(&self, graph: &RelationalGraph) -> Vec<Contradiction> {
        graph
            .nodes()
            .filter_map(|(region, label)| {
                let want = *self.expected.get(&region)?;
                (want != label).then(|| Contradiction {
                    region_id: region,
                    violated_relation: Relation::Occurrence,
                    detail: format!("label {label} where the model expects {want}"),
                })
            })
            .collect()
    }
}

impl Hypothesizer for SceneModel<'_> {
    fn hypothesize(&self, contradictions: &[Contradiction], graph: &RelationalGraph) -> Hypothesis {
        let target = contradictions[0].region_id;
        let mut attributes = BTreeMap::new();
        if let Some(current) = graph.label(target) {
            attributes.insert("avoid".to_owned(), current.to_string());
        }
        Hypothesis {
            proposed_label: self.expected.get(&target).copied().unwrap_or_default(),
            target_region: target,
            attributes,
        }
    }
}
