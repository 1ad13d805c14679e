use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Assignment of every segment to one of `k` stratified folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Fold id per segment index.
    pub assignments: Vec<usize>,
    /// Members of each fold, grouped by ascending class and in shuffled
    /// order within a class.
    pub members: Vec<Vec<usize>>,
}

/// Train / validation / test indices for one held-out fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitTriple {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded per-class shuffle dealt round-robin over the folds. The dealing
/// position carries over between classes so fold totals stay balanced.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("fold count must be at least 2, got {k}")));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; labels.len()];
    let mut members = vec![Vec::new(); k];
    let mut cursor = 0usize;
    for (class, idx) in by_class.iter_mut().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < k {
            warn!("class {class} has {} members for {k} folds; some folds will lack it", idx.len());
        }
        idx.shuffle(&mut rng);
        for &i in idx.iter() {
            let fold = cursor % k;
            assignments[i] = fold;
            members[fold].push(i);
            cursor += 1;
        }
    }
    Ok(FoldPlan {
        k,
        seed,
        assignments,
        members,
    })
}

/// Training set = all other folds; the held-out fold alternates between
/// validation (even positions) and test (odd positions) in class-grouped order,
/// so both halves stay stratified and differ in size by at most one.
pub fn make_split(plan: &FoldPlan, held_out: usize) -> Result<SplitTriple> {
    if held_out >= plan.k {
        return Err(Error::InvalidInput(format!(
            "fold {held_out} does not exist in a {}-fold plan",
            plan.k
        )));
    }
    let train = (0..plan.assignments.len())
        .filter(|&i| plan.assignments[i] != held_out)
        .collect();
    let (mut validation, mut test) = (Vec::new(), Vec::new());
    for (pos, &i) in plan.members[held_out].iter().enumerate() {
        if pos % 2 == 0 {
            validation.push(i);
        } else {
            test.push(i);
        }
    }
    Ok(SplitTriple {
        train,
        validation,
        test,
    })
}
