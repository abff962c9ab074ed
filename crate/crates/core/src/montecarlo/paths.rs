use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::LatticeModel;
use crate::rng::path_rng;

/// Node index per step `0..=N` of one simulated path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSample {
    pub stream: u64,
    pub nodes: Vec<usize>,
}

/// Samples path `index` of `seed` by inverse transform on each node's
/// outgoing probabilities (in transition order).
pub fn sample_path(model: &LatticeModel, seed: u64, index: u64) -> PathSample {
    let mut rng = path_rng(seed, index);
    let n = model.step_count();
    let mut nodes = Vec::with_capacity(n + 1);
    let mut current = 0usize;
    nodes.push(current);
    for i in 0..n {
        let u: f64 = rng.gen();
        let transitions = &model.node(i, current).transitions;
        let mut cumulative = 0.0;
        let mut chosen = transitions.last().map(|t| t.to).unwrap_or(0);
        for t in transitions {
            cumulative += t.prob;
            if u < cumulative {
                chosen = t.to;
                break;
            }
        }
        current = chosen;
        nodes.push(current);
    }
    PathSample { stream: index, nodes }
}
