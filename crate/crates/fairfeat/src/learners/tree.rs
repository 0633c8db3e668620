//! CART decision tree.
//!
//! Exact greedy splits: Gini impurity for classification, sum-of-squares
//! reduction for regression. Ties break toward the lowest feature index,
//! then the lowest threshold, so identical inputs grow identical trees on
//! any platform.

use ndarray::{Array2, ArrayView1};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use crate::dataset::TaskKind;
use crate::rng;

#[derive(Debug, Clone)]
pub(crate) struct TreeConfig {
    pub task: TaskKind,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features considered per split; `None` means all.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone)]
enum Node {
    Split {
        feature: u32,
        /// Rows with value <= threshold go left.
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        /// Regression mean, or classification positive fraction.
        score: f64,
    },
}

#[derive(Debug)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
}

struct WorkItem {
    slot: usize,
    rows: Vec<u32>,
    depth: usize,
}

struct Builder<'a> {
    x: &'a Array2<f64>,
    y: &'a [f64],
    cfg: &'a TreeConfig,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    /// Scratch (value, target) pairs reused across nodes.
    pairs: Vec<(f64, f64)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Tree {
    /// Fit on every row of `x`.
    pub fn fit_all_rows(x: &Array2<f64>, y: &[f64], cfg: &TreeConfig, seed: u64) -> Tree {
        let rows: Vec<u32> = (0..x.nrows() as u32).collect();
        Tree::fit(x, y, rows, cfg, seed)
    }

    /// Fit on the given rows (duplicates allowed, e.g. bootstrap draws).
    pub fn fit(x: &Array2<f64>, y: &[f64], rows: Vec<u32>, cfg: &TreeConfig, seed: u64) -> Tree {
        Tree::fit_with_rng(x, y, rows, cfg, ChaCha8Rng::seed_from_u64(seed))
    }

    /// Fit continuing an existing stream (forest trees pass theirs in
    /// after drawing the bootstrap rows from it).
    pub fn fit_with_rng(
        x: &Array2<f64>,
        y: &[f64],
        rows: Vec<u32>,
        cfg: &TreeConfig,
        rng: ChaCha8Rng,
    ) -> Tree {
        debug_assert!(!rows.is_empty());
        let mut builder = Builder {
            x,
            y,
            cfg,
            rng,
            nodes: vec![Node::Leaf { score: 0.0 }],
            pairs: Vec::new(),
        };
        let mut stack = vec![WorkItem {
            slot: 0,
            rows,
            depth: 0,
        }];
        while let Some(item) = stack.pop() {
            builder.grow(item, &mut stack);
        }
        Tree {
            nodes: builder.nodes,
        }
    }

    fn leaf_score(&self, row: ArrayView1<f64>) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { score } => return *score,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    /// Regression prediction (leaf mean).
    pub fn predict_value(&self, row: ArrayView1<f64>) -> f64 {
        self.leaf_score(row)
    }

    /// Classification positive-fraction of the reached leaf.
    pub fn predict_score(&self, row: ArrayView1<f64>) -> f64 {
        self.leaf_score(row)
    }

    /// Hard 0/1 vote (ties toward 1).
    pub fn predict_label(&self, row: ArrayView1<f64>) -> f64 {
        if self.leaf_score(row) >= 0.5 {
            1.0
        } else {
            0.0
        }
    }
}

impl Builder<'_> {
    fn grow(&mut self, item: WorkItem, stack: &mut Vec<WorkItem>) {
        let WorkItem { slot, rows, depth } = item;
        let n = rows.len();

        let (mean, pure) = self.node_stats(&rows);
        let depth_capped = self.cfg.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || n < 2 * self.cfg.min_leaf {
            self.nodes[slot] = Node::Leaf { score: mean };
            return;
        }

        let split = match self.best_split(&rows) {
            Some(s) => s,
            None => {
                self.nodes[slot] = Node::Leaf { score: mean };
                return;
            }
        };

        let mut left_rows = Vec::with_capacity(n / 2);
        let mut right_rows = Vec::with_capacity(n / 2);
        for &r in &rows {
            if self.x[[r as usize, split.feature]] <= split.threshold {
                left_rows.push(r);
            } else {
                right_rows.push(r);
            }
        }
        debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());

        let left = self.nodes.len();
        self.nodes.push(Node::Leaf { score: 0.0 });
        let right = self.nodes.len();
        self.nodes.push(Node::Leaf { score: 0.0 });
        self.nodes[slot] = Node::Split {
            feature: split.feature as u32,
            threshold: split.threshold,
            left: left as u32,
            right: right as u32,
        };
        // Push right first so the left branch is grown next: the RNG is
        // consumed in a fixed depth-first, left-first order.
        stack.push(WorkItem {
            slot: right,
            rows: right_rows,
            depth: depth + 1,
        });
        stack.push(WorkItem {
            slot: left,
            rows: left_rows,
            depth: depth + 1,
        });
    }

    fn node_stats(&self, rows: &[u32]) -> (f64, bool) {
        let n = rows.len() as f64;
        match self.cfg.task {
            TaskKind::Classification => {
                let pos: f64 = rows.iter().map(|&r| self.y[r as usize]).sum();
                let frac = pos / n;
                (frac, frac == 0.0 || frac == 1.0)
            }
            TaskKind::Regression => {
                let sum: f64 = rows.iter().map(|&r| self.y[r as usize]).sum();
                let mean = sum / n;
                let ss: f64 = rows
                    .iter()
                    .map(|&r| {
                        let d = self.y[r as usize] - mean;
                        d * d
                    })
                    .sum();
                (mean, ss <= 1e-12)
            }
        }
    }

    fn best_split(&mut self, rows: &[u32]) -> Option<BestSplit> {
        let m = self.x.ncols();
        let candidates: Vec<usize> = match self.cfg.max_features {
            Some(k) if k < m => {
                let mut picks = rng::sample_distinct(&mut self.rng, m, k);
                picks.sort_unstable();
                picks
            }
            _ => (0..m).collect(),
        };

        let mut best: Option<BestSplit> = None;
        for feature in candidates {
            self.scan_feature(rows, feature, &mut best);
        }
        best
    }

    /// Scan one feature's sorted values, updating `best` on strict
    /// improvement, which realizes the lowest-index / lowest-threshold
    /// tie rule.
    fn scan_feature(&mut self, rows: &[u32], feature: usize, best: &mut Option<BestSplit>) {
        let n = rows.len();
        self.pairs.clear();
        self.pairs.extend(
            rows.iter()
                .map(|&r| (self.x[[r as usize, feature]], self.y[r as usize])),
        );
        self.pairs
            .sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

        let min_leaf = self.cfg.min_leaf;
        match self.cfg.task {
            TaskKind::Classification => {
                let total_pos: f64 = self.pairs.iter().map(|p| p.1).sum();
                let total = n as f64;
                let mut left_pos = 0.0f64;
                for i in 1..n {
                    left_pos += self.pairs[i - 1].1;
                    let (prev, cur) = (self.pairs[i - 1].0, self.pairs[i].0);
                    if cur <= prev {
                        continue;
                    }
                    if i < min_leaf || n - i < min_leaf {
                        continue;
                    }
                    let ln = i as f64;
                    let rn = total - ln;
                    let right_pos = total_pos - left_pos;
                    // weighted Gini: sum over children of n_c * gini_c,
                    // with n_c * gini_c = 2 * pos * neg / n_c
                    let score = 2.0 * left_pos * (ln - left_pos) / ln
                        + 2.0 * right_pos * (rn - right_pos) / rn;
                    if best.as_ref().is_none_or(|b| score < b.score) {
                        *best = Some(BestSplit {
                            feature,
                            threshold: midpoint(prev, cur),
                            score,
                        });
                    }
                }
            }
            TaskKind::Regression => {
                let total_sum: f64 = self.pairs.iter().map(|p| p.1).sum();
                let total_sq: f64 = self.pairs.iter().map(|p| p.1 * p.1).sum();
                let mut left_sum = 0.0f64;
                let mut left_sq = 0.0f64;
                for i in 1..n {
                    let yv = self.pairs[i - 1].1;
                    left_sum += yv;
                    left_sq += yv * yv;
                    let (prev, cur) = (self.pairs[i - 1].0, self.pairs[i].0);
                    if cur <= prev {
                        continue;
                    }
                    if i < min_leaf || n - i < min_leaf {
                        continue;
                    }
                    let ln = i as f64;
                    let rn = (n - i) as f64;
                    let right_sum = total_sum - left_sum;
                    let right_sq = total_sq - left_sq;
                    // summed squared error of both children
                    let score = (left_sq - left_sum * left_sum / ln)
                        + (right_sq - right_sum * right_sum / rn);
                    if best.as_ref().is_none_or(|b| score < b.score) {
                        *best = Some(BestSplit {
                            feature,
                            threshold: midpoint(prev, cur),
                            score,
                        });
                    }
                }
            }
        }
    }
}

/// Split threshold between two adjacent sorted values.
///
/// Falls back to the lower value when the midpoint rounds up to the upper
/// one, so the `<= threshold` predicate always separates the pair.
fn midpoint(lower: f64, upper: f64) -> f64 {
    let mid = lower + (upper - lower) / 2.0;
    if mid >= upper {
        lower
    } else {
        mid
    }
}
