//! Deciding whether a modified run changed the recommendation, and how much
//! the top of the list moved.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineError, Ranking, Roster, TopSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OutcomeError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("k = {k} outside 2..={size}")]
    KOutOfRange { k: usize, size: usize },
    #[error("rankings cover different respondents")]
    RosterMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeClass {
    Unchanged,
    /// The modified top set is a strict subset of the original.
    DroppedFromTie,
    /// The modified top set strictly contains the original.
    AddedToTie,
    Replaced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutcomeComparison {
    pub changed: bool,
    pub classification: OutcomeClass,
}

impl From<OutcomeClass> for OutcomeComparison {
    fn from(classification: OutcomeClass) -> Self {
        OutcomeComparison {
            changed: classification != OutcomeClass::Unchanged,
            classification,
        }
    }
}

/// How two party sets are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartyComparison {
    /// Changed when the sets differ in either direction.
    #[default]
    SetEquality,
    /// Changed only when the modified set holds a party the original lacks.
    Containment,
}

fn is_subset<T: Ord>(small: &[T], big: &[T]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.by_ref().any(|b| b == s))
}

/// Classifies two sorted, deduplicated member lists.
pub fn classify_sorted<T: Ord>(original: &[T], modified: &[T]) -> OutcomeClass {
    if original == modified {
        OutcomeClass::Unchanged
    } else if modified.len() < original.len() && is_subset(modified, original) {
        OutcomeClass::DroppedFromTie
    } else if original.len() < modified.len() && is_subset(original, modified) {
        OutcomeClass::AddedToTie
    } else {
        OutcomeClass::Replaced
    }
}

/// Compares two sorted, deduplicated party lists.
pub fn parties_changed_sorted<T: Ord>(
    original: &[T],
    modified: &[T],
    mode: PartyComparison,
) -> bool {
    match mode {
        PartyComparison::SetEquality => original != modified,
        PartyComparison::Containment => !is_subset(modified, original),
    }
}

/// Candidate-level change; agreement values are ignored.
pub fn candidate_outcome_changed(original: &TopSet, modified: &TopSet) -> OutcomeComparison {
    classify_sorted(original.members(), modified.members()).into()
}

/// Party-level change between two top sets.
pub fn party_outcome_changed(
    original: &TopSet,
    modified: &TopSet,
    roster: &Roster,
    mode: PartyComparison,
) -> Result<bool, OutcomeError> {
    let parties = |set: &TopSet| -> Result<Vec<String>, EngineError> {
        let set: BTreeSet<String> = set
            .members()
            .iter()
            .map(|id| roster.party_of(id).map(str::to_owned))
            .collect::<Result<_, _>>()?;
        Ok(set.into_iter().collect())
    };
    Ok(parties_changed_sorted(
        &parties(original)?,
        &parties(modified)?,
        mode,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankCorrelation {
    pub rho: f64,
    pub k: usize,
    /// Set when either rank vector had zero variance.
    pub degenerate: bool,
}

/// Average (tied) rank positions for agreement percentages, 1 = best.
///
/// Built from a 101-bin histogram so lookups are O(1).
#[derive(Debug, Clone)]
pub struct AgreementRanks {
    /// `above[a]`: respondents with agreement strictly greater than `a`.
    above: [u32; 101],
    count: [u32; 101],
}

impl AgreementRanks {
    pub fn new(agreements: impl IntoIterator<Item = u8>) -> Self {
        let mut count = [0u32; 101];
        for a in agreements {
            count[a as usize] += 1;
        }
        let mut above = [0u32; 101];
        let mut acc = 0;
        for a in (0..=100).rev() {
            above[a] = acc;
            acc += count[a];
        }
        AgreementRanks { above, count }
    }

    #[inline]
    pub fn rank(&self, agreement: u8) -> f64 {
        let a = agreement as usize;
        f64::from(self.above[a]) + (f64::from(self.count[a]) + 1.0) / 2.0
    }
}

/// Average ranks (1-based, ascending values) with ties sharing the mean position.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman correlation of two equal-length vectors: Pearson correlation of
/// their tied ranks. Zero variance on either side gives 1 when the rank
/// vectors are identical and 0 otherwise, flagged degenerate.
pub fn spearman(x: &[f64], y: &[f64]) -> RankCorrelation {
    debug_assert_eq!(x.len(), y.len());
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let k = x.len();
    let n = k as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in rx.iter().zip(&ry) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return RankCorrelation {
            rho: if rx == ry { 1.0 } else { 0.0 },
            k,
            degenerate: true,
        };
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    RankCorrelation {
        rho,
        k,
        degenerate: false,
    }
}

/// Spearman correlation over the original ranking's first `k` respondents,
/// pairing each one's tied rank in the original with its tied rank in the
/// modified ranking.
pub fn topk_rank_correlation(
    original: &Ranking,
    modified: &Ranking,
    k: usize,
) -> Result<RankCorrelation, OutcomeError> {
    let size = original.len();
    if k < 2 || k > size {
        return Err(OutcomeError::KOutOfRange { k, size });
    }
    if modified.len() != size {
        return Err(OutcomeError::RosterMismatch);
    }
    let modified_by_id: HashMap<&str, u8> = modified
        .entries()
        .iter()
        .map(|e| (e.respondent_id.as_str(), e.agreement_pct))
        .collect();
    let orig_ranks = AgreementRanks::new(original.entries().iter().map(|e| e.agreement_pct));
    let mod_ranks = AgreementRanks::new(modified.entries().iter().map(|e| e.agreement_pct));
    let mut x = Vec::with_capacity(k);
    let mut y = Vec::with_capacity(k);
    for e in &original.entries()[..k] {
        let m = *modified_by_id
            .get(e.respondent_id.as_str())
            .ok_or(OutcomeError::RosterMismatch)?;
        x.push(orig_ranks.rank(e.agreement_pct));
        y.push(mod_ranks.rank(m));
    }
    Ok(spearman(&x, &y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Answer, MatchScore, RespondentProfile};
    use proptest::prelude::*;

    fn set(ids: &[&str]) -> TopSet {
        TopSet::new(ids.iter().map(|s| s.to_string()).collect(), 80)
    }

    fn ranking(scores: &[(&str, u8)]) -> Ranking {
        Ranking::from_scores(
            scores
                .iter()
                .map(|&(id, a)| MatchScore {
                    respondent_id: id.into(),
                    total_weighted_distance: 0,
                    disagreement_pct: 100 - a,
                    agreement_pct: a,
                })
                .collect(),
        )
    }

    fn roster(pairs: &[(&str, &str)]) -> Roster {
        Roster::new(
            pairs
                .iter()
                .map(|&(id, party)| RespondentProfile {
                    id: id.into(),
                    name: id.into(),
                    party: party.into(),
                    answers: vec![Answer::new(1).unwrap()],
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn candidate_examples() {
        assert_eq!(
            candidate_outcome_changed(&set(&["A", "B"]), &set(&["A", "B"])),
            OutcomeComparison {
                changed: false,
                classification: OutcomeClass::Unchanged
            }
        );
        let c = candidate_outcome_changed(&set(&["A", "B"]), &set(&["A"]));
        assert!(c.changed);
        assert_eq!(c.classification, OutcomeClass::DroppedFromTie);
        assert_eq!(
            candidate_outcome_changed(&set(&["A", "B"]), &set(&["A", "B", "C"])).classification,
            OutcomeClass::AddedToTie
        );
        assert_eq!(
            candidate_outcome_changed(&set(&["A"]), &set(&["C"])).classification,
            OutcomeClass::Replaced
        );
        assert_eq!(
            candidate_outcome_changed(&set(&["A", "B"]), &set(&["B", "C"])).classification,
            OutcomeClass::Replaced
        );
    }

    #[test]
    fn agreement_value_is_ignored() {
        let a = TopSet::new(vec!["A".into()], 80);
        let b = TopSet::new(vec!["A".into()], 70);
        assert!(!candidate_outcome_changed(&a, &b).changed);
    }

    #[test]
    fn party_examples() {
        let r = roster(&[("A", "X"), ("B", "X"), ("C", "Y"), ("D", "Y")]);
        let eq = PartyComparison::SetEquality;
        assert!(!party_outcome_changed(&set(&["A"]), &set(&["B"]), &r, eq).unwrap());
        assert!(party_outcome_changed(&set(&["A"]), &set(&["C"]), &r, eq).unwrap());
        assert!(party_outcome_changed(&set(&["A", "C"]), &set(&["A"]), &r, eq).unwrap());
        // Containment only fires when a new party appears.
        let c = PartyComparison::Containment;
        assert!(!party_outcome_changed(&set(&["A", "C"]), &set(&["A"]), &r, c).unwrap());
        assert!(party_outcome_changed(&set(&["A"]), &set(&["A", "C"]), &r, c).unwrap());
        assert!(party_outcome_changed(&set(&["A"]), &set(&["Q"]), &r, eq).is_err());
    }

    #[test]
    fn spearman_examples() {
        let same = ranking(&[("a", 90), ("b", 80), ("c", 70), ("d", 10)]);
        for k in 2..=4 {
            assert_eq!(topk_rank_correlation(&same, &same, k).unwrap().rho, 1.0);
        }
        let reversed = ranking(&[("a", 70), ("b", 80), ("c", 90), ("d", 10)]);
        assert_eq!(
            topk_rank_correlation(&same, &reversed, 3).unwrap().rho,
            -1.0
        );
        let swapped = ranking(&[("a", 80), ("b", 90), ("c", 70), ("d", 10)]);
        let r = topk_rank_correlation(&same, &swapped, 3).unwrap();
        // 1 - 6 * (1 + 1) / (3 * (9 - 1))
        assert!((r.rho - 0.5).abs() < 1e-12);
        assert!(!r.degenerate);
    }

    #[test]
    fn k_bounds() {
        let r = ranking(&[("a", 90), ("b", 80)]);
        assert_eq!(
            topk_rank_correlation(&r, &r, 1),
            Err(OutcomeError::KOutOfRange { k: 1, size: 2 })
        );
        assert!(topk_rank_correlation(&r, &r, 3).is_err());
    }

    #[test]
    fn all_tied_is_flagged() {
        let tied = ranking(&[("a", 50), ("b", 50), ("c", 50)]);
        let r = topk_rank_correlation(&tied, &tied, 3).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.rho, 1.0);
        let spread = ranking(&[("a", 90), ("b", 50), ("c", 10)]);
        let r = topk_rank_correlation(&tied, &spread, 3).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.rho, 0.0);
    }

    #[test]
    fn tied_ranks_are_averaged() {
        let r = AgreementRanks::new([90, 80, 80, 70]);
        assert_eq!(r.rank(90), 1.0);
        assert_eq!(r.rank(80), 2.5);
        assert_eq!(r.rank(70), 4.0);
    }

    fn sorted_ids(v: Vec<u8>) -> Vec<u8> {
        let s: BTreeSet<u8> = v.into_iter().collect();
        s.into_iter().collect()
    }

    // Textbook no-ties formula as an independent oracle.
    fn textbook(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    }

    proptest! {
        #[test]
        fn change_detection_is_symmetric(a in prop::collection::vec(0u8..6, 1..6), b in prop::collection::vec(0u8..6, 1..6)) {
            let (a, b) = (sorted_ids(a), sorted_ids(b));
            let ab = classify_sorted(&a, &b);
            let ba = classify_sorted(&b, &a);
            prop_assert_eq!(ab == OutcomeClass::Unchanged, ba == OutcomeClass::Unchanged);
            let swapped = match ab {
                OutcomeClass::DroppedFromTie => OutcomeClass::AddedToTie,
                OutcomeClass::AddedToTie => OutcomeClass::DroppedFromTie,
                other => other,
            };
            prop_assert_eq!(ba, swapped);
        }

        #[test]
        fn party_change_implies_candidate_change(a in prop::collection::vec(0u8..8, 1..5), b in prop::collection::vec(0u8..8, 1..5)) {
            let (a, b) = (sorted_ids(a), sorted_ids(b));
            let party = |ids: &[u8]| sorted_ids(ids.iter().map(|i| i % 3).collect());
            for mode in [PartyComparison::SetEquality, PartyComparison::Containment] {
                if parties_changed_sorted(&party(&a), &party(&b), mode) {
                    prop_assert!(classify_sorted(&a, &b) != OutcomeClass::Unchanged);
                }
            }
        }

        #[test]
        fn self_correlation_is_one(agreements in prop::collection::vec(0u8..=100, 2..40), k in 2usize..40) {
            let ids: Vec<String> = (0..agreements.len()).map(|i| format!("r{i:03}")).collect();
            let r = ranking(&ids.iter().map(String::as_str).zip(agreements.iter().copied()).collect::<Vec<_>>());
            let k = k.min(agreements.len());
            prop_assert_eq!(topk_rank_correlation(&r, &r, k).unwrap().rho, 1.0);
        }

        #[test]
        fn matches_textbook_without_ties(perm in Just((1..=10).collect::<Vec<u8>>()).prop_shuffle(), k in 2usize..=10) {
            let ids: Vec<String> = (0..10).map(|i| format!("r{i}")).collect();
            let orig = ranking(&ids.iter().enumerate().map(|(i, id)| (id.as_str(), 100 - i as u8)).collect::<Vec<_>>());
            let modi = ranking(&ids.iter().zip(&perm).map(|(id, &p)| (id.as_str(), 50 + p)).collect::<Vec<_>>());
            let got = topk_rank_correlation(&orig, &modi, k).unwrap();
            let x: Vec<f64> = (1..=k).map(|i| i as f64).collect();
            // Agreement 50 + p; rank position in the modified list is 11 - p.
            let y: Vec<f64> = perm[..k].iter().map(|&p| f64::from(11 - p)).collect();
            // Positions in the full list are not 1..k; rank them within the top k.
            let mut yr = vec![0.0; k];
            for i in 0..k { yr[i] = 1.0 + y.iter().filter(|&&v| v < y[i]).count() as f64; }
            prop_assert!((got.rho - textbook(&x, &yr)).abs() < 1e-9);
        }
    }
}
