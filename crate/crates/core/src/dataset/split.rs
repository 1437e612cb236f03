use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// Train/test percentages, e.g. `80:20`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatio {
    train_pct: f64,
    test_pct: f64,
}

impl SplitRatio {
    pub fn new(train_pct: f64, test_pct: f64) -> Result<Self> {
        let ok = train_pct > 0.0 && test_pct > 0.0 && ((train_pct + test_pct) - 100.0).abs() < 1e-9;
        if !ok {
            return Err(Error::Config(format!(
                "split ratio {train_pct}:{test_pct} must be two positive percentages summing to 100"
            )));
        }
        Ok(SplitRatio {
            train_pct,
            test_pct,
        })
    }

    /// From the training fraction in `(0, 1)`.
    pub fn from_train_fraction(f: f64) -> Result<Self> {
        SplitRatio::new(f * 100.0, 100.0 - f * 100.0)
    }

    pub fn train_pct(&self) -> f64 {
        self.train_pct
    }

    pub fn test_pct(&self) -> f64 {
        self.test_pct
    }

    /// `⌊n · train%⌋`, with a 1e-9 nudge for percentages that have no exact
    /// binary form.
    pub fn train_count(&self, n: usize) -> usize {
        ((n as f64 * self.train_pct / 100.0) + 1e-9).floor() as usize
    }
}

impl FromStr for SplitRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [a, b] = parts.as_slice() else {
            return Err(Error::Config(format!(
                "split ratio `{s}` must have the form TRAIN:TEST"
            )));
        };
        let parse = |p: &str| {
            p.parse::<f64>()
                .map_err(|_| Error::Config(format!("split ratio `{s}`: `{p}` is not a number")))
        };
        SplitRatio::new(parse(a)?, parse(b)?)
    }
}

impl fmt::Display for SplitRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.train_pct, self.test_pct)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub ratio: SplitRatio,
    pub seed: u64,
    pub stratified: bool,
}

pub fn split(d: &Dataset, ratio: SplitRatio, seed: u64, stratified: bool) -> Result<SplitPlan> {
    split_labels(d.labels(), d.n_classes(), ratio, seed, stratified)
}

/// Index-level split. Both index lists come back sorted ascending.
pub fn split_labels(
    labels: &[usize],
    n_classes: usize,
    ratio: SplitRatio,
    seed: u64,
    stratified: bool,
) -> Result<SplitPlan> {
    let n = labels.len();
    if n < 2 {
        return Err(Error::Precondition(format!("cannot split {n} rows")));
    }
    let mut rng = rng::seeded(seed);
    let (mut train, mut test) = if stratified {
        stratified_partition(labels, n_classes, ratio, &mut rng)?
    } else {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let cut = ratio.train_count(n);
        let test = perm.split_off(cut);
        (perm, test)
    };
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan {
        train_indices: train,
        test_indices: test,
        ratio,
        seed,
        stratified,
    })
}

fn stratified_partition(
    labels: &[usize],
    n_classes: usize,
    ratio: SplitRatio,
    rng: &mut rng::Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = labels.len();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let present: Vec<usize> = (0..n_classes)
        .filter(|&c| !by_class[c].is_empty())
        .collect();
    if let Some(&c) = present.iter().find(|&&c| by_class[c].len() < 2) {
        return Err(Error::Stratification(format!(
            "class {c} has a single row; use a non-stratified split"
        )));
    }
    let target = n - ratio.train_count(n);
    let sizes: Vec<usize> = present.iter().map(|&c| by_class[c].len()).collect();
    let alloc = allocate_test_counts(&sizes, n, target);

    let mut train = Vec::with_capacity(n - target);
    let mut test = Vec::with_capacity(target);
    for (&c, &t) in present.iter().zip(&alloc) {
        let mut idx = by_class[c].clone();
        idx.shuffle(rng);
        let cut = idx.len() - t;
        test.extend_from_slice(&idx[cut..]);
        train.extend_from_slice(&idx[..cut]);
    }
    Ok((train, test))
}

/// Largest-remainder apportionment of `target` test rows over classes,
/// keeping at least one row of every class on each side.
fn allocate_test_counts(sizes: &[usize], n: usize, target: usize) -> Vec<usize> {
    let quotas: Vec<f64> = sizes
        .iter()
        .map(|&s| target as f64 * s as f64 / n as f64)
        .collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = target.saturating_sub(alloc.iter().sum());
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &c in order.iter().cycle().take(sizes.len() * 2) {
        if left == 0 {
            break;
        }
        if alloc[c] < sizes[c] {
            alloc[c] += 1;
            left -= 1;
        }
    }
    for (a, &s) in alloc.iter_mut().zip(sizes) {
        *a = (*a).clamp(1, s - 1);
    }
    // Re-balance towards the target after clamping.
    loop {
        let total: usize = alloc.iter().sum();
        if total == target {
            break;
        }
        let pick = if total > target {
            (0..sizes.len()).filter(|&c| alloc[c] > 1).max_by(|&a, &b| {
                (alloc[a] as f64 - quotas[a])
                    .partial_cmp(&(alloc[b] as f64 - quotas[b]))
                    .unwrap()
                    .then(b.cmp(&a))
            })
        } else {
            (0..sizes.len())
                .filter(|&c| alloc[c] + 1 < sizes[c])
                .max_by(|&a, &b| {
                    (quotas[a] - alloc[a] as f64)
                        .partial_cmp(&(quotas[b] - alloc[b] as f64))
                        .unwrap()
                        .then(b.cmp(&a))
                })
        };
        match pick {
            Some(c) if total > target => alloc[c] -= 1,
            Some(c) => alloc[c] += 1,
            None => break,
        }
    }
    alloc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl FoldPlan {
    /// `(train, test)` indices with fold `i` held out.
    pub fn train_test(&self, i: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        train.sort_unstable();
        (train, self.folds[i].clone())
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(Error::Precondition(format!(
            "fold count {k} must satisfy 2 <= k <= n = {n}"
        )));
    }
    Ok(())
}

/// Random partition into `k` folds; the first `n % k` folds get one extra row.
pub fn kfold(d: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    let n = d.len();
    check_k(n, k)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::seeded(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = perm[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(FoldPlan { k, folds, seed })
}

/// Class-preserving folds: each class is shuffled, the classes are laid end
/// to end and rows are dealt round-robin, so fold sizes still differ by at most one.
pub fn stratified_kfold(d: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    let n = d.len();
    check_k(n, k)?;
    let mut rng = rng::seeded(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); d.n_classes()];
    for (i, &l) in d.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let mut folds = vec![Vec::new(); k];
    let mut pos = 0;
    for mut idx in by_class {
        idx.shuffle(&mut rng);
        for i in idx {
            folds[pos % k].push(i);
            pos += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { k, folds, seed })
}
