//! Random forest over CART trees.
//!
//! Each tree trains on its own derived seed, so the forest can be grown
//! concurrently without changing results.

use ndarray::{Array2, ArrayView1};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rayon::prelude::*;

use crate::rng::{self, derive_seed};

use super::tree::{Tree, TreeConfig};

#[derive(Debug)]
pub(crate) struct Forest {
    trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(
        x: &Array2<f64>,
        y: &[f64],
        cfg: &TreeConfig,
        n_trees: usize,
        bootstrap: bool,
        seed: u64,
    ) -> Forest {
        let n = x.nrows();
        let trees: Vec<Tree> = (0..n_trees)
            .into_par_iter()
            .map(|t| {
                let tree_seed = derive_seed(seed, t as u64);
                let mut tree_rng = ChaCha8Rng::seed_from_u64(tree_seed);
                let rows: Vec<u32> = if bootstrap {
                    (0..n)
                        .map(|_| rng::index_below(&mut tree_rng, n) as u32)
                        .collect()
                } else {
                    (0..n as u32).collect()
                };
                // Tree growth continues on the same per-tree stream.
                Tree::fit_with_rng(x, y, rows, cfg, tree_rng)
            })
            .collect();
        Forest { trees }
    }

    /// Fraction of trees voting label 1.
    pub fn vote_fraction(&self, row: ArrayView1<f64>) -> f64 {
        let votes: f64 = self.trees.iter().map(|t| t.predict_label(row)).sum();
        votes / self.trees.len() as f64
    }

    /// Mean of tree predictions.
    pub fn mean_value(&self, row: ArrayView1<f64>) -> f64 {
        let total: f64 = self.trees.iter().map(|t| t.predict_value(row)).sum();
        total / self.trees.len() as f64
    }
}
