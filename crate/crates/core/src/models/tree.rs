//! Binary decision trees shared by the forest and the booster.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "kebab-case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

/// Per-row sufficient statistics and how they score a node.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Objective {
    /// Stats `[weight, weighted positives]`; leaf is the positive fraction.
    Gini,
    /// Stats `[hessian, gradient]`; leaf is the Newton step.
    Newton { l2: f64 },
}

impl Objective {
    fn score(self, s: [f64; 2]) -> f64 {
        match self {
            Objective::Gini => {
                if s[0] <= 0.0 {
                    0.0
                } else {
                    (s[1] * s[1] + (s[0] - s[1]) * (s[0] - s[1])) / s[0]
                }
            }
            Objective::Newton { l2 } => s[1] * s[1] / (s[0] + l2),
        }
    }

    fn leaf(self, s: [f64; 2]) -> f64 {
        match self {
            Objective::Gini => {
                if s[0] <= 0.0 {
                    0.5
                } else {
                    s[1] / s[0]
                }
            }
            Objective::Newton { l2 } => -s[1] / (s[0] + l2),
        }
    }
}

pub(crate) struct TreeParams {
    pub max_depth: usize,
    /// Minimum summed weight (row count for the booster) on each side.
    pub min_leaf: f64,
    /// Features examined per split; `None` examines all.
    pub max_features: Option<usize>,
}

pub(crate) struct Builder<'a, R: Rng> {
    pub rows: &'a [Vec<f64>],
    /// Statistics per row.
    pub stats: &'a [[f64; 2]],
    /// Weight used for `min_leaf` per row.
    pub weight: &'a [f64],
    pub objective: Objective,
    pub params: TreeParams,
    pub rng: R,
}

const MIN_GAIN: f64 = 1e-12;

impl<R: Rng> Builder<'_, R> {
    pub fn build(mut self, indices: Vec<usize>) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        self.grow(&mut tree, indices, 0);
        tree
    }

    fn sums(&self, idx: &[usize]) -> ([f64; 2], f64) {
        let mut s = [0.0; 2];
        let mut w = 0.0;
        for &i in idx {
            s[0] += self.stats[i][0];
            s[1] += self.stats[i][1];
            w += self.weight[i];
        }
        (s, w)
    }

    fn grow(&mut self, tree: &mut Tree, idx: Vec<usize>, depth: usize) -> usize {
        let at = tree.nodes.len();
        let (total, _) = self.sums(&idx);
        tree.nodes.push(Node::Leaf {
            value: self.objective.leaf(total),
        });
        if depth >= self.params.max_depth {
            return at;
        }
        let Some((feature, threshold)) = self.best_split(&idx, total) else {
            return at;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.rows[i][feature] <= threshold);
        let left = self.grow(tree, l, depth + 1);
        let right = self.grow(tree, r, depth + 1);
        tree.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.rows.first().map_or(0, Vec::len);
        let mut all: Vec<usize> = (0..p).collect();
        if let Some(m) = self.params.max_features.filter(|&m| m < p) {
            all.partial_shuffle(&mut self.rng, m);
            all.truncate(m);
            all.sort_unstable();
        }
        all
    }

    fn best_split(&mut self, idx: &[usize], total: [f64; 2]) -> Option<(usize, f64)> {
        if idx.len() < 2 {
            return None;
        }
        let parent = self.objective.score(total);
        let (_, total_w) = self.sums(idx);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for f in self.candidate_features() {
            order.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]).then(a.cmp(&b)));
            let mut left = [0.0; 2];
            let mut left_w = 0.0;
            for k in 0..order.len() - 1 {
                let i = order[k];
                left[0] += self.stats[i][0];
                left[1] += self.stats[i][1];
                left_w += self.weight[i];
                let (lo, hi) = (self.rows[i][f], self.rows[order[k + 1]][f]);
                if lo == hi {
                    continue;
                }
                if left_w < self.params.min_leaf || total_w - left_w < self.params.min_leaf {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let gain = self.objective.score(left) + self.objective.score(right) - parent;
                if gain > MIN_GAIN && best.is_none_or(|b| gain > b.0) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some((gain, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}
