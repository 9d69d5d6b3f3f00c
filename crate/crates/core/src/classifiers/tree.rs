//! CART trees: a Gini classification tree for the random forest and a
//! second-order regression tree for gradient boosting.
//!
//! Samples go left when `x[feature] <= threshold`. Thresholds sit halfway
//! between consecutive distinct values. Among equally good splits the first
//! one found wins (feature order, then ascending threshold).

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features examined per split; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 12,
            min_samples_split: 2,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real, V: Serialize + serde::de::DeserializeOwned")]
pub enum Node<F, V> {
    Split {
        feature: usize,
        threshold: F,
        left: usize,
        right: usize,
    },
    Leaf(V),
}

fn descend<F: Real, V: Copy>(nodes: &[Node<F, V>], row: &[F]) -> V {
    let mut at = 0;
    loop {
        match nodes[at] {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => at = if row[feature] <= threshold { left } else { right },
            Node::Leaf(v) => return v,
        }
    }
}

/// (gain, feature, threshold, left gradient sum, left hessian sum)
type Candidate<F> = (F, usize, F, F, F);

fn midpoint<F: Real>(lo: F, hi: F) -> F {
    let mid = (lo + hi) / F::lit(2.0);
    if mid < hi {
        mid
    } else {
        lo
    }
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

/// Classification tree; leaves hold a class index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct DecisionTree<F> {
    nodes: Vec<Node<F, usize>>,
}

struct ClassBuilder<'a, F, R> {
    x: ArrayView2<'a, F>,
    y: &'a [usize],
    n_classes: usize,
    params: &'a TreeParams,
    rng: &'a mut R,
    nodes: Vec<Node<F, usize>>,
}

impl<F: Real, R: Rng> ClassBuilder<'_, F, R> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.ncols();
        match self.params.max_features {
            Some(m) if m < d => {
                let mut f = sample(self.rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    /// Best (feature, threshold) by weighted child Gini. Splits that leave
    /// impurity unchanged are allowed so that interactions such as XOR
    /// can still be separated further down.
    fn best_split(&mut self, idx: &[usize], parent: f64) -> Option<(usize, F)> {
        let n = idx.len();
        let mut best: Option<(f64, usize, F)> = None;
        let mut sorted: Vec<(F, usize)> = Vec::with_capacity(n);
        for f in self.candidate_features() {
            sorted.clear();
            sorted.extend(idx.iter().map(|&i| (self.x[[i, f]], self.y[i])));
            sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
            let mut left = vec![0usize; self.n_classes];
            let mut right = self.counts(idx);
            for k in 0..n - 1 {
                let label = sorted[k].1;
                left[label] += 1;
                right[label] -= 1;
                if sorted[k].0 == sorted[k + 1].0 {
                    continue;
                }
                let nl = k + 1;
                let nr = n - nl;
                let score = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
                if best.is_none_or(|b| score < b.0) {
                    best = Some((score, f, midpoint(sorted[k].0, sorted[k + 1].0)));
                }
            }
        }
        best.filter(|b| b.0 <= parent + 1e-12).map(|b| (b.1, b.2))
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(super::argmax_lowest(&counts)));
        let impurity = gini(&counts, idx.len());
        if depth >= self.params.max_depth || idx.len() < self.params.min_samples_split || impurity == 0.0 {
            return id;
        }
        if let Some((feature, threshold)) = self.best_split(&idx, impurity) {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[[i, feature]] <= threshold);
            let left = self.grow(l, depth + 1);
            let right = self.grow(r, depth + 1);
            self.nodes[id] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
        }
        id
    }
}

impl<F: Real> DecisionTree<F> {
    /// Fits on the rows listed in `idx` (repeats allowed, as in a bootstrap
    /// sample).
    pub fn fit<R: Rng>(
        params: &TreeParams,
        x: ArrayView2<F>,
        y: &[usize],
        idx: Vec<usize>,
        n_classes: usize,
        rng: &mut R,
    ) -> Self {
        let mut b = ClassBuilder {
            x,
            y,
            n_classes,
            params,
            rng,
            nodes: Vec::new(),
        };
        b.grow(idx, 0);
        DecisionTree { nodes: b.nodes }
    }

    pub fn predict_index(&self, row: &[F]) -> usize {
        descend(&self.nodes, row)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

/// Regression tree fitted to per-sample gradients and hessians; leaves hold
/// the Newton step `-G / (H + lambda)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct RegressionTree<F> {
    nodes: Vec<Node<F, F>>,
}

pub struct RegressionParams<F> {
    pub max_depth: usize,
    pub lambda: F,
    pub min_child_weight: F,
}

struct Open<F> {
    node: usize,
    g: F,
    h: F,
}

impl<F: Real> RegressionTree<F> {
    /// `order[f]` lists all sample indices sorted by feature `f`.
    pub fn fit(
        params: &RegressionParams<F>,
        x: ArrayView2<F>,
        order: &[Vec<usize>],
        grad: &[F],
        hess: &[F],
    ) -> Self {
        let n = grad.len();
        let lambda = params.lambda;
        let score = |g: F, h: F| g * g / (h + lambda);
        let weight = |g: F, h: F| -g / (h + lambda);

        let g0: F = grad.iter().copied().sum();
        let h0: F = hess.iter().copied().sum();
        let mut nodes = vec![Node::Leaf(weight(g0, h0))];
        // slot in `open` for every sample; None once its leaf is final
        let mut slot_of: Vec<Option<usize>> = vec![Some(0); n];
        let mut open = vec![Open { node: 0, g: g0, h: h0 }];

        for _ in 0..params.max_depth {
            if open.is_empty() {
                break;
            }
            let k = open.len();
            let mut best: Vec<Option<Candidate<F>>> = vec![None; k];
            for (f, ord) in order.iter().enumerate() {
                let mut gl = vec![F::zero(); k];
                let mut hl = vec![F::zero(); k];
                let mut prev: Vec<Option<F>> = vec![None; k];
                for &i in ord {
                    let Some(s) = slot_of[i] else { continue };
                    let v = x[[i, f]];
                    if let Some(p) = prev[s] {
                        if v > p {
                            let (gr, hr) = (open[s].g - gl[s], open[s].h - hl[s]);
                            if hl[s] >= params.min_child_weight && hr >= params.min_child_weight {
                                let gain = score(gl[s], hl[s]) + score(gr, hr) - score(open[s].g, open[s].h);
                                if best[s].is_none_or(|b| gain > b.0) {
                                    best[s] = Some((gain, f, midpoint(p, v), gl[s], hl[s]));
                                }
                            }
                        }
                    }
                    gl[s] = gl[s] + grad[i];
                    hl[s] = hl[s] + hess[i];
                    prev[s] = Some(v);
                }
            }

            let mut next = Vec::new();
            let mut remap: Vec<Option<(usize, usize, usize, F)>> = vec![None; k];
            for (s, b) in best.into_iter().enumerate() {
                let Some((gain, feature, threshold, gl, hl)) = b else { continue };
                if gain <= F::lit(1e-12) {
                    continue;
                }
                let (gr, hr) = (open[s].g - gl, open[s].h - hl);
                let left = nodes.len();
                nodes.push(Node::Leaf(weight(gl, hl)));
                nodes.push(Node::Leaf(weight(gr, hr)));
                nodes[open[s].node] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right: left + 1,
                };
                remap[s] = Some((feature, next.len(), next.len() + 1, threshold));
                next.push(Open { node: left, g: gl, h: hl });
                next.push(Open {
                    node: left + 1,
                    g: gr,
                    h: hr,
                });
            }
            for (i, slot) in slot_of.iter_mut().enumerate() {
                if let Some(s) = *slot {
                    *slot = remap[s].map(|(f, l, r, t)| if x[[i, f]] <= t { l } else { r });
                }
            }
            open = next;
        }
        RegressionTree { nodes }
    }

    pub fn predict(&self, row: &[F]) -> F {
        descend(&self.nodes, row)
    }
}

/// Per-feature argsort of the rows of `x`.
pub fn presort<F: Real>(x: ArrayView2<F>) -> Vec<Vec<usize>> {
    (0..x.ncols())
        .map(|f| {
            let mut idx: Vec<usize> = (0..x.nrows()).collect();
            idx.sort_by(|&a, &b| x[[a, f]].partial_cmp(&x[[b, f]]).expect("finite features").then(a.cmp(&b)));
            idx
        })
        .collect()
}
