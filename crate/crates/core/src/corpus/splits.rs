use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FOLDS: usize = 10;

/// One evaluation round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Ten folds of turn indices. Fold 0 is the validation fold used to pick
/// the state count; each remaining fold is the test set of one round, and
/// training uses every other turn, validation included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TenfoldSplits {
    pub folds: Vec<Vec<usize>>,
}

impl TenfoldSplits {
    pub fn validation(&self) -> &[usize] {
        &self.folds[0]
    }

    /// Training turns while choosing the state count: everything outside
    /// the validation fold.
    pub fn selection_train(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.folds[1..].concat();
        v.sort_unstable();
        v
    }

    pub fn rounds(&self) -> Vec<Round> {
        (1..self.folds.len())
            .map(|r| {
                let mut train: Vec<usize> = self
                    .folds
                    .iter()
                    .enumerate()
                    .filter(|(f, _)| *f != r)
                    .flat_map(|(_, v)| v.iter().copied())
                    .collect();
                train.sort_unstable();
                Round { train, test: self.folds[r].clone() }
            })
            .collect()
    }
}

/// Shuffles `n_turns` indices with `seed` and deals them into ten folds.
pub fn tenfold_splits(n_turns: usize, seed: u64) -> Result<TenfoldSplits> {
    if n_turns < FOLDS {
        return Err(Error::Data(format!("ten-fold splits need at least {FOLDS} turns, got {n_turns}")));
    }
    let mut idx: Vec<usize> = (0..n_turns).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); FOLDS];
    for (k, i) in idx.into_iter().enumerate() {
        folds[k % FOLDS].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(TenfoldSplits { folds })
}
