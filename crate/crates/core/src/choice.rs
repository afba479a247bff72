//! Domain types for binary choice systems.
//!
//! Alternatives are addressed by their position in [`ChoiceSystem::labels`].
//! Pair-indexed data (probabilities, counts) is stored once per unordered
//! pair in canonical orientation `a < b`; the reverse orientation is always
//! derived as the complement, so `P(a,b) + P(b,a) = 1` cannot be broken.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported system size. Linear-order enumeration is factorial.
pub const MAX_ALTERNATIVES: usize = 8;

/// The set of alternatives under consideration, in a fixed order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ChoiceSystem {
    labels: Vec<String>,
}

impl ChoiceSystem {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 || labels.len() > MAX_ALTERNATIVES {
            return Err(Error::InvalidSystem(format!(
                "expected between 2 and {MAX_ALTERNATIVES} alternatives, got {}",
                labels.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(Error::InvalidSystem("empty alternative label".into()));
            }
            if labels[..i].contains(l) {
                return Err(Error::InvalidSystem(format!("duplicate label {l:?}")));
            }
        }
        Ok(Self { labels })
    }

    /// System labelled `A`, `B`, `C`, ... of size `n`.
    pub fn lettered(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| ((b'A' + i as u8) as char).to_string()))
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, idx: usize) -> &str {
        &self.labels[idx]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn num_pairs(&self) -> usize {
        num_pairs(self.n())
    }

    /// Resolve an ordered pair of alternatives to its canonical pair, also
    /// reporting whether the given orientation matches the canonical one.
    pub fn pair(&self, x: usize, y: usize) -> Result<(PairIndex, bool)> {
        if x >= self.n() || y >= self.n() {
            return Err(Error::InvalidPair(format!("({x},{y}) out of range for n={}", self.n())));
        }
        PairIndex::oriented(x, y)
    }

    pub fn pair_by_label(&self, x: &str, y: &str) -> Result<(PairIndex, bool)> {
        let xi = self
            .index_of(x)
            .ok_or_else(|| Error::InvalidPair(format!("unknown alternative {x:?}")))?;
        let yi = self
            .index_of(y)
            .ok_or_else(|| Error::InvalidPair(format!("unknown alternative {y:?}")))?;
        self.pair(xi, yi)
    }

    pub fn pair_name(&self, pair: PairIndex) -> String {
        format!("{}{}", self.label(pair.a), self.label(pair.b))
    }
}

impl TryFrom<Vec<String>> for ChoiceSystem {
    type Error = Error;

    fn try_from(labels: Vec<String>) -> Result<Self> {
        Self::new(labels)
    }
}

impl From<ChoiceSystem> for Vec<String> {
    fn from(s: ChoiceSystem) -> Self {
        s.labels
    }
}

pub fn num_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// An unordered pair of alternatives in canonical orientation `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairIndex {
    pub a: usize,
    pub b: usize,
}

impl PairIndex {
    /// Canonical pair for `{x, y}` plus `true` when `(x, y)` is already canonical.
    pub fn oriented(x: usize, y: usize) -> Result<(Self, bool)> {
        match x.cmp(&y) {
            std::cmp::Ordering::Less => Ok((Self { a: x, b: y }, true)),
            std::cmp::Ordering::Greater => Ok((Self { a: y, b: x }, false)),
            std::cmp::Ordering::Equal => {
                Err(Error::InvalidPair(format!("pair of identical alternatives ({x},{x})")))
            }
        }
    }

    /// Position of this pair in the lexicographic canonical enumeration for `n` alternatives.
    pub fn position(&self, n: usize) -> usize {
        // pairs before row a: sum_{i<a} (n-1-i)
        self.a * (2 * n - self.a - 1) / 2 + (self.b - self.a - 1)
    }
}

impl fmt::Display for PairIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

/// All canonical pairs, lexicographic in label order.
pub fn canonical_pairs(system: &ChoiceSystem) -> Vec<PairIndex> {
    pairs_for(system.n())
}

pub(crate) fn pairs_for(n: usize) -> Vec<PairIndex> {
    let mut out = Vec::with_capacity(num_pairs(n));
    for a in 0..n {
        for b in a + 1..n {
            out.push(PairIndex { a, b });
        }
    }
    out
}

/// Precomputed `(x, y) -> (position, canonical?)` lookup for hot loops.
#[derive(Debug, Clone)]
pub(crate) struct PairTable {
    n: usize,
    slots: Vec<(usize, bool)>,
}

impl PairTable {
    pub(crate) fn new(n: usize) -> Self {
        let mut slots = vec![(usize::MAX, false); n * n];
        for x in 0..n {
            for y in 0..n {
                if x != y {
                    let (p, fwd) = PairIndex::oriented(x, y).expect("distinct");
                    slots[x * n + y] = (p.position(n), fwd);
                }
            }
        }
        Self { n, slots }
    }

    /// `P(x over y)` read from a canonical probability slice.
    #[inline]
    pub(crate) fn prob(&self, p: &[f64], x: usize, y: usize) -> f64 {
        let (pos, fwd) = self.slots[x * self.n + y];
        if fwd {
            p[pos]
        } else {
            1.0 - p[pos]
        }
    }
}

/// Binary choice probabilities over every canonical pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryProbVector {
    system: ChoiceSystem,
    p: Vec<f64>,
}

impl BinaryProbVector {
    /// Build from probabilities listed in canonical pair order.
    pub fn new(system: ChoiceSystem, p: Vec<f64>) -> Result<Self> {
        if p.len() != system.num_pairs() {
            return Err(Error::InvalidProbability(format!(
                "expected {} pair probabilities, got {}",
                system.num_pairs(),
                p.len()
            )));
        }
        for (pair, &v) in pairs_for(system.n()).iter().zip(&p) {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidProbability(format!(
                    "P_{} = {v} outside [0,1]",
                    system.pair_name(*pair)
                )));
            }
        }
        Ok(Self { system, p })
    }

    /// Build from `(first, second, P(first over second))` triples given by label.
    /// Every unordered pair must appear exactly once, in either orientation.
    pub fn from_labelled(system: ChoiceSystem, entries: &[(&str, &str, f64)]) -> Result<Self> {
        let mut p = vec![f64::NAN; system.num_pairs()];
        for &(x, y, v) in entries {
            let (pair, fwd) = system.pair_by_label(x, y)?;
            let slot = &mut p[pair.position(system.n())];
            if !slot.is_nan() {
                return Err(Error::InvalidProbability(format!("pair {x}{y} given twice")));
            }
            *slot = if fwd { v } else { 1.0 - v };
        }
        if let Some(i) = p.iter().position(|v| v.is_nan()) {
            let pair = pairs_for(system.n())[i];
            return Err(Error::InvalidProbability(format!(
                "missing pair {}",
                system.pair_name(pair)
            )));
        }
        Self::new(system, p)
    }

    pub fn system(&self) -> &ChoiceSystem {
        &self.system
    }

    /// Canonical-order values.
    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn get(&self, pair: PairIndex) -> f64 {
        self.p[pair.position(self.system.n())]
    }

    /// Probability that `x` is chosen over `y`, for either orientation.
    pub fn prob(&self, x: usize, y: usize) -> Result<f64> {
        let (pair, fwd) = self.system.pair(x, y)?;
        let v = self.get(pair);
        Ok(if fwd { v } else { 1.0 - v })
    }

    /// Apply a relabelling: alternative `i` of `self` becomes alternative
    /// `perm[i]` of the result. The system labels are permuted alongside.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.system.n();
        if !is_permutation(perm, n) {
            return Err(Error::InvalidOrder(format!("{perm:?} is not a permutation of 0..{n}")));
        }
        let mut labels = vec![String::new(); n];
        for (i, &j) in perm.iter().enumerate() {
            labels[j] = self.system.label(i).to_string();
        }
        let system = ChoiceSystem::new(labels)?;
        let mut p = vec![0.0; self.p.len()];
        for pair in pairs_for(n) {
            let (target, fwd) = PairIndex::oriented(perm[pair.a], perm[pair.b])?;
            let v = self.get(pair);
            p[target.position(n)] = if fwd { v } else { 1.0 - v };
        }
        Self::new(system, p)
    }
}

/// Per-pair win counts: the aggregated data vector of a choice experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceDataset {
    system: ChoiceSystem,
    counts: Vec<PairCounts>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub wins_ab: u64,
    pub wins_ba: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.wins_ab + self.wins_ba
    }
}

impl ChoiceDataset {
    /// All-zero counts.
    pub fn empty(system: ChoiceSystem) -> Self {
        let counts = vec![PairCounts::default(); system.num_pairs()];
        Self { system, counts }
    }

    pub fn new(system: ChoiceSystem, counts: Vec<PairCounts>) -> Result<Self> {
        if counts.len() != system.num_pairs() {
            return Err(Error::InvalidDataset(format!(
                "expected {} pair counts, got {}",
                system.num_pairs(),
                counts.len()
            )));
        }
        Ok(Self { system, counts })
    }

    pub fn system(&self) -> &ChoiceSystem {
        &self.system
    }

    pub fn counts(&self) -> &[PairCounts] {
        &self.counts
    }

    pub fn get(&self, pair: PairIndex) -> PairCounts {
        self.counts[pair.position(self.system.n())]
    }

    /// Record one observation of `winner` being chosen over `loser`.
    pub fn record(&mut self, winner: usize, loser: usize) -> Result<()> {
        self.add(winner, loser, 1)
    }

    pub fn add(&mut self, winner: usize, loser: usize, times: u64) -> Result<()> {
        let (pair, fwd) = self.system.pair(winner, loser)?;
        let c = &mut self.counts[pair.position(self.system.n())];
        if fwd {
            c.wins_ab += times;
        } else {
            c.wins_ba += times;
        }
        Ok(())
    }

    pub fn total_observations(&self) -> u64 {
        self.counts.iter().map(PairCounts::total).sum()
    }

    /// Canonical pairs that have no valid observation.
    pub fn empty_pairs(&self) -> Vec<PairIndex> {
        pairs_for(self.system.n())
            .into_iter()
            .zip(&self.counts)
            .filter(|(_, c)| c.total() == 0)
            .map(|(p, _)| p)
            .collect()
    }
}

/// Empirical relative frequency of each canonical orientation.
pub fn point_estimate(data: &ChoiceDataset) -> Result<BinaryProbVector> {
    let mut p = Vec::with_capacity(data.counts.len());
    for (pair, c) in pairs_for(data.system.n()).into_iter().zip(&data.counts) {
        if c.total() == 0 {
            return Err(Error::InvalidDataset(format!(
                "pair {} has no observations",
                data.system.pair_name(pair)
            )));
        }
        p.push(c.wins_ab as f64 / c.total() as f64);
    }
    BinaryProbVector::new(data.system.clone(), p)
}

/// A strict ranking of all alternatives, best first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinearOrder {
    ranking: Vec<usize>,
}

impl LinearOrder {
    pub fn new(ranking: Vec<usize>) -> Result<Self> {
        if !is_permutation(&ranking, ranking.len()) {
            return Err(Error::InvalidOrder(format!("{ranking:?} is not a permutation")));
        }
        Ok(Self { ranking })
    }

    pub fn from_labels<S: AsRef<str>>(system: &ChoiceSystem, labels: &[S]) -> Result<Self> {
        if labels.len() != system.n() {
            return Err(Error::InvalidOrder(format!(
                "ranking has {} entries, system has {}",
                labels.len(),
                system.n()
            )));
        }
        let ranking = labels
            .iter()
            .map(|l| {
                system
                    .index_of(l.as_ref())
                    .ok_or_else(|| Error::InvalidOrder(format!("unknown label {:?}", l.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(ranking)
    }

    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    pub fn len(&self) -> usize {
        self.ranking.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranking.is_empty()
    }

    /// Rank position of each alternative (0 = best).
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.ranking.len()];
        for (rank, &alt) in self.ranking.iter().enumerate() {
            pos[alt] = rank;
        }
        pos
    }

    pub fn prefers(&self, x: usize, y: usize) -> bool {
        let pos = self.positions();
        pos[x] < pos[y]
    }

    pub fn display(&self, system: &ChoiceSystem) -> String {
        self.ranking.iter().map(|&i| system.label(i)).collect::<Vec<_>>().join("")
    }
}

fn is_permutation(xs: &[usize], n: usize) -> bool {
    if xs.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &x in xs {
        if x >= n || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc() -> ChoiceSystem {
        ChoiceSystem::lettered(3).unwrap()
    }

    #[test]
    fn canonical_pairs_small_systems() {
        let pairs = canonical_pairs(&abc());
        assert_eq!(
            pairs,
            vec![PairIndex { a: 0, b: 1 }, PairIndex { a: 0, b: 2 }, PairIndex { a: 1, b: 2 }]
        );
        assert_eq!(canonical_pairs(&ChoiceSystem::lettered(5).unwrap()).len(), 10);
        assert_eq!(
            canonical_pairs(&ChoiceSystem::lettered(2).unwrap()),
            vec![PairIndex { a: 0, b: 1 }]
        );
    }

    #[test]
    fn position_matches_enumeration() {
        for n in 2..=MAX_ALTERNATIVES {
            for (i, p) in pairs_for(n).iter().enumerate() {
                assert_eq!(p.position(n), i);
            }
        }
    }

    #[test]
    fn flipped_pair_maps_to_same_index() {
        let s = ChoiceSystem::lettered(5).unwrap();
        for x in 0..5 {
            for y in 0..5 {
                if x == y {
                    assert!(s.pair(x, y).is_err());
                    continue;
                }
                let (p1, f1) = s.pair(x, y).unwrap();
                let (p2, f2) = s.pair(y, x).unwrap();
                assert_eq!(p1, p2);
                assert_ne!(f1, f2);
            }
        }
    }

    #[test]
    fn system_guards() {
        assert!(ChoiceSystem::lettered(1).is_err());
        assert!(ChoiceSystem::lettered(9).is_err());
        assert!(ChoiceSystem::new(["A", "B", "A"]).is_err());
        assert!(ChoiceSystem::lettered(8).is_ok());
    }

    #[test]
    fn point_estimate_frequencies() {
        let s = abc();
        let counts = vec![
            PairCounts { wins_ab: 20, wins_ba: 0 },
            PairCounts { wins_ab: 10, wins_ba: 10 },
            PairCounts { wins_ab: 16, wins_ba: 4 },
        ];
        let d = ChoiceDataset::new(s, counts).unwrap();
        let p = point_estimate(&d).unwrap();
        assert_eq!(p.values(), &[1.0, 0.5, 0.8]);
    }

    #[test]
    fn point_estimate_rejects_empty_pair() {
        let mut d = ChoiceDataset::empty(abc());
        d.record(0, 1).unwrap();
        d.record(2, 0).unwrap();
        let err = point_estimate(&d).unwrap_err().to_string();
        assert!(err.contains("BC"), "{err}");
    }

    #[test]
    fn complement_is_structural() {
        let p = BinaryProbVector::from_labelled(abc(), &[("A", "B", 0.9), ("C", "A", 0.9), ("B", "C", 0.9)])
            .unwrap();
        assert_eq!(p.values(), &[0.9, 1.0 - 0.9, 0.9]);
        assert!((p.prob(2, 0).unwrap() - 0.9).abs() < 1e-15);
        assert!((p.prob(0, 1).unwrap() + p.prob(1, 0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range_probability() {
        assert!(BinaryProbVector::new(abc(), vec![0.5, 1.2, 0.0]).is_err());
        assert!(BinaryProbVector::new(abc(), vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn linear_order_validation() {
        assert!(LinearOrder::new(vec![2, 0, 1]).is_ok());
        assert!(LinearOrder::new(vec![0, 0, 1]).is_err());
        let o = LinearOrder::from_labels(&abc(), &["C", "A", "B"]).unwrap();
        assert!(o.prefers(2, 0));
        assert!(o.prefers(0, 1));
        assert_eq!(o.display(&abc()), "CAB");
    }

    #[test]
    fn dataset_record_orientation() {
        let mut d = ChoiceDataset::empty(abc());
        d.record(1, 0).unwrap();
        d.record(0, 1).unwrap();
        d.record(0, 1).unwrap();
        assert_eq!(d.get(PairIndex { a: 0, b: 1 }), PairCounts { wins_ab: 2, wins_ba: 1 });
        assert_eq!(d.empty_pairs().len(), 2);
    }
}
