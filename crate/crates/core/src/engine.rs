//! Weighted Likert-distance matching.
//!
//! Every question contributes a penalty looked up from a 3×5 weight table
//! indexed by the user's importance marking and the absolute answer
//! distance. Penalties are summed, normalised by the largest table cell
//! times the number of active questions, ceiled to a whole percentage and
//! flipped into an agreement score.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of distinct answer distances (0..=4).
pub const DISTANCES: usize = 5;
/// Number of importance levels.
pub const LEVELS: usize = 3;
/// Number of cells in a weight table.
pub const CELLS: usize = LEVELS * DISTANCES;
/// Question count of the national questionnaire.
pub const DEFAULT_QUESTION_COUNT: usize = 20;

/// Weights used by the deployed national questionnaire, rows ordered
/// not important, neutral, important.
pub const DEFAULT_WEIGHTS: [[i64; DISTANCES]; LEVELS] = [
    [12, 15, 18, 21, 24],
    [6, 12, 18, 24, 30],
    [0, 9, 18, 27, 36],
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("answer {0} outside the 1..=5 scale")]
    InvalidAnswer(i64),
    #[error("length mismatch: {what} has {actual} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("question mask has no active questions")]
    EmptyMask,
    #[error("active question count must be at least 1")]
    NoActiveQuestions,
    #[error("weight table is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidWeights(Vec<WeightViolation>),
    #[error("roster is empty")]
    EmptyRoster,
    #[error("duplicate respondent id `{0}`")]
    DuplicateId(String),
    #[error("unknown respondent id `{0}`")]
    UnknownId(String),
}

/// A single problem found while validating a weight table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightViolation {
    NegativeCell {
        importance: Importance,
        distance: usize,
        value: i64,
    },
    CellTooLarge {
        importance: Importance,
        distance: usize,
        value: i64,
    },
    ZeroMaximum,
}

impl fmt::Display for WeightViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightViolation::NegativeCell {
                importance,
                distance,
                value,
            } => write!(f, "{}[{distance}] is negative ({value})", importance.key()),
            WeightViolation::CellTooLarge {
                importance,
                distance,
                value,
            } => write!(f, "{}[{distance}] exceeds u32 ({value})", importance.key()),
            WeightViolation::ZeroMaximum => write!(f, "every cell is zero"),
        }
    }
}

/// A Likert answer in 1..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct Answer(u8);

impl Answer {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 5;

    pub fn new(value: i64) -> Result<Self, EngineError> {
        if (Self::MIN as i64..=Self::MAX as i64).contains(&value) {
            Ok(Answer(value as u8))
        } else {
            Err(EngineError::InvalidAnswer(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// All five answers in scale order.
    pub fn all() -> impl Iterator<Item = Answer> {
        (Self::MIN..=Self::MAX).map(Answer)
    }
}

impl TryFrom<i64> for Answer {
    type Error = EngineError;
    fn try_from(value: i64) -> Result<Self, Self::Error> {
        Answer::new(value)
    }
}

impl From<Answer> for u8 {
    fn from(a: Answer) -> u8 {
        a.0
    }
}

/// Importance a user attaches to a question. The ordering only fixes row
/// indices in the weight table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Importance {
    NotImportant,
    Neutral,
    Important,
}

impl Importance {
    pub const ALL: [Importance; LEVELS] = [
        Importance::NotImportant,
        Importance::Neutral,
        Importance::Important,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Key used in weight documents and report files.
    pub fn key(self) -> &'static str {
        match self {
            Importance::NotImportant => "not_important",
            Importance::Neutral => "neutral",
            Importance::Important => "important",
        }
    }

    pub fn from_key(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.key() == s)
    }
}

impl fmt::Display for Importance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Validated 3×5 weight table: no negative cells, at least one positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "WeightsDocument", into = "WeightsDocument")]
pub struct WeightMatrix {
    cells: [[u32; DISTANCES]; LEVELS],
}

impl Default for WeightMatrix {
    fn default() -> Self {
        WeightMatrix::new(DEFAULT_WEIGHTS).expect("default table is valid")
    }
}

impl WeightMatrix {
    pub fn new(cells: [[i64; DISTANCES]; LEVELS]) -> Result<Self, EngineError> {
        validate_weights(&cells).map_err(EngineError::InvalidWeights)?;
        let mut out = [[0u32; DISTANCES]; LEVELS];
        for (row_out, row) in out.iter_mut().zip(cells.iter()) {
            for (o, &c) in row_out.iter_mut().zip(row.iter()) {
                *o = c as u32;
            }
        }
        Ok(WeightMatrix { cells: out })
    }

    /// Cell for `(importance, distance)`.
    ///
    /// Panics if `distance > 4`.
    pub fn weight(&self, distance: u8, importance: Importance) -> u32 {
        assert!(
            (distance as usize) < DISTANCES,
            "distance {distance} out of range 0..=4"
        );
        self.cells[importance.index()][distance as usize]
    }

    pub fn row(&self, importance: Importance) -> [u32; DISTANCES] {
        self.cells[importance.index()]
    }

    pub fn cells(&self) -> [[i64; DISTANCES]; LEVELS] {
        self.cells.map(|row| row.map(i64::from))
    }

    /// Row-major flattening, index `importance * 5 + distance`.
    pub fn flattened(&self) -> [u32; CELLS] {
        let mut flat = [0u32; CELLS];
        for (l, row) in self.cells.iter().enumerate() {
            flat[l * DISTANCES..(l + 1) * DISTANCES].copy_from_slice(row);
        }
        flat
    }

    pub fn global_max(&self) -> u32 {
        self.cells
            .iter()
            .flat_map(|r| r.iter())
            .copied()
            .max()
            .unwrap_or(0)
    }
}

/// Serialized form of a weight table: three named rows of five integers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsDocument {
    pub not_important: [i64; DISTANCES],
    pub neutral: [i64; DISTANCES],
    pub important: [i64; DISTANCES],
}

impl TryFrom<WeightsDocument> for WeightMatrix {
    type Error = EngineError;
    fn try_from(doc: WeightsDocument) -> Result<Self, Self::Error> {
        WeightMatrix::new([doc.not_important, doc.neutral, doc.important])
    }
}

impl From<WeightMatrix> for WeightsDocument {
    fn from(w: WeightMatrix) -> Self {
        let [not_important, neutral, important] = w.cells();
        WeightsDocument {
            not_important,
            neutral,
            important,
        }
    }
}

/// Checks a raw table and reports every violation found.
pub fn validate_weights(cells: &[[i64; DISTANCES]; LEVELS]) -> Result<(), Vec<WeightViolation>> {
    let mut violations = Vec::new();
    for (importance, row) in Importance::ALL.iter().zip(cells.iter()) {
        for (distance, &value) in row.iter().enumerate() {
            if value < 0 {
                violations.push(WeightViolation::NegativeCell {
                    importance: *importance,
                    distance,
                    value,
                });
            } else if value > u32::MAX as i64 {
                violations.push(WeightViolation::CellTooLarge {
                    importance: *importance,
                    distance,
                    value,
                });
            }
        }
    }
    if cells.iter().flatten().all(|&v| v <= 0) {
        violations.push(WeightViolation::ZeroMaximum);
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// A candidate or party together with its questionnaire answers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RespondentProfile {
    pub id: String,
    pub name: String,
    pub party: String,
    pub answers: Vec<Answer>,
}

/// A voter's answers and importance markings.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UserResponse {
    answers: Vec<Answer>,
    importances: Vec<Importance>,
}

impl UserResponse {
    pub fn new(answers: Vec<Answer>, importances: Vec<Importance>) -> Result<Self, EngineError> {
        if answers.len() != importances.len() {
            return Err(EngineError::LengthMismatch {
                what: "importances",
                expected: answers.len(),
                actual: importances.len(),
            });
        }
        Ok(UserResponse {
            answers,
            importances,
        })
    }

    pub fn answers(&self) -> &[Answer] {
        &self.answers
    }

    pub fn importances(&self) -> &[Importance] {
        &self.importances
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }
}

/// Which questions take part in scoring.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuestionMask {
    active: Vec<bool>,
}

impl QuestionMask {
    pub fn new(active: Vec<bool>) -> Result<Self, EngineError> {
        if !active.iter().any(|&a| a) {
            return Err(EngineError::EmptyMask);
        }
        Ok(QuestionMask { active })
    }

    /// Every question active.
    pub fn all(m: usize) -> Self {
        assert!(m > 0, "mask needs at least one question");
        QuestionMask {
            active: vec![true; m],
        }
    }

    pub fn is_active(&self, question: usize) -> bool {
        self.active[question]
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn inactive_indices(&self) -> Vec<usize> {
        self.active
            .iter()
            .enumerate()
            .filter(|(_, &a)| !a)
            .map(|(i, _)| i)
            .collect()
    }
}

/// A validated list of respondents sharing a question count, kept sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<RespondentProfile>", into = "Vec<RespondentProfile>")]
pub struct Roster {
    respondents: Vec<RespondentProfile>,
    question_count: usize,
}

impl Roster {
    pub fn new(mut respondents: Vec<RespondentProfile>) -> Result<Self, EngineError> {
        let first = respondents.first().ok_or(EngineError::EmptyRoster)?;
        let m = first.answers.len();
        let mut seen = HashSet::with_capacity(respondents.len());
        for r in &respondents {
            if r.answers.len() != m {
                return Err(EngineError::LengthMismatch {
                    what: "respondent answers",
                    expected: m,
                    actual: r.answers.len(),
                });
            }
            if !seen.insert(r.id.as_str()) {
                return Err(EngineError::DuplicateId(r.id.clone()));
            }
        }
        if m == 0 {
            return Err(EngineError::NoActiveQuestions);
        }
        respondents.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(Roster {
            respondents,
            question_count: m,
        })
    }

    pub fn respondents(&self) -> &[RespondentProfile] {
        &self.respondents
    }

    pub fn question_count(&self) -> usize {
        self.question_count
    }

    pub fn len(&self) -> usize {
        self.respondents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.respondents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&RespondentProfile> {
        self.respondents
            .binary_search_by(|r| r.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.respondents[i])
    }

    pub fn party_of(&self, id: &str) -> Result<&str, EngineError> {
        self.get(id)
            .map(|r| r.party.as_str())
            .ok_or_else(|| EngineError::UnknownId(id.to_string()))
    }

    /// Distinct party labels, sorted.
    pub fn parties(&self) -> Vec<&str> {
        let mut parties: Vec<&str> = self.respondents.iter().map(|r| r.party.as_str()).collect();
        parties.sort_unstable();
        parties.dedup();
        parties
    }
}

impl TryFrom<Vec<RespondentProfile>> for Roster {
    type Error = EngineError;
    fn try_from(v: Vec<RespondentProfile>) -> Result<Self, Self::Error> {
        Roster::new(v)
    }
}

impl From<Roster> for Vec<RespondentProfile> {
    fn from(r: Roster) -> Self {
        r.respondents
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchScore {
    pub respondent_id: String,
    pub total_weighted_distance: u64,
    pub disagreement_pct: u8,
    pub agreement_pct: u8,
}

/// Respondents in descending agreement order, ties broken by ascending id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    entries: Vec<MatchScore>,
}

impl Ranking {
    /// Sorts `scores` into ranking order.
    pub fn from_scores(mut scores: Vec<MatchScore>) -> Self {
        scores.sort_by(|a, b| {
            b.agreement_pct
                .cmp(&a.agreement_pct)
                .then_with(|| a.respondent_id.cmp(&b.respondent_id))
        });
        Ranking { entries: scores }
    }

    pub fn entries(&self) -> &[MatchScore] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn top_set(&self) -> TopSet {
        top_set(self)
    }
}

/// Respondents sharing the highest agreement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopSet {
    /// Sorted ascending.
    members: Vec<String>,
    agreement_pct: u8,
}

impl TopSet {
    pub fn new(mut members: Vec<String>, agreement_pct: u8) -> Self {
        members.sort();
        members.dedup();
        TopSet {
            members,
            agreement_pct,
        }
    }

    pub fn members(&self) -> &[String] {
        &self.members
    }

    pub fn agreement_pct(&self) -> u8 {
        self.agreement_pct
    }

    pub fn contains(&self, id: &str) -> bool {
        self.members
            .binary_search_by(|m| m.as_str().cmp(id))
            .is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

pub fn answer_distance(u: Answer, p: Answer) -> u8 {
    u.0.abs_diff(p.0)
}

pub fn lookup_weight(weights: &WeightMatrix, distance: u8, importance: Importance) -> u32 {
    weights.weight(distance, importance)
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<(), EngineError> {
    if expected == actual {
        Ok(())
    } else {
        Err(EngineError::LengthMismatch {
            what,
            expected,
            actual,
        })
    }
}

pub fn total_weighted_distance(
    weights: &WeightMatrix,
    user: &UserResponse,
    respondent: &RespondentProfile,
    mask: &QuestionMask,
) -> Result<u64, EngineError> {
    let m = user.len();
    check_len("respondent answers", m, respondent.answers.len())?;
    check_len("question mask", m, mask.len())?;
    Ok(user
        .answers
        .iter()
        .zip(&user.importances)
        .zip(&respondent.answers)
        .zip(&mask.active)
        .filter(|(_, &active)| active)
        .map(|(((&u, &imp), &p), _)| u64::from(weights.weight(answer_distance(u, p), imp)))
        .sum())
}

/// Largest table cell times the number of active questions.
pub fn max_weighted_distance(
    weights: &WeightMatrix,
    active_count: usize,
) -> Result<u64, EngineError> {
    if active_count == 0 {
        return Err(EngineError::NoActiveQuestions);
    }
    let max = weights.global_max();
    if max == 0 {
        return Err(EngineError::InvalidWeights(vec![
            WeightViolation::ZeroMaximum,
        ]));
    }
    Ok(u64::from(max) * active_count as u64)
}

/// `ceil(100 * total / max)`, computed exactly. Requires `total <= max`, `max > 0`.
#[inline]
pub fn disagreement_pct(total: u64, max: u64) -> u8 {
    debug_assert!(max > 0 && total <= max);
    (100 * total).div_ceil(max) as u8
}

#[inline]
pub fn agreement_pct(total: u64, max: u64) -> u8 {
    100 - disagreement_pct(total, max)
}

pub fn agreement(
    weights: &WeightMatrix,
    user: &UserResponse,
    respondent: &RespondentProfile,
    mask: &QuestionMask,
) -> Result<MatchScore, EngineError> {
    let total = total_weighted_distance(weights, user, respondent, mask)?;
    let max = max_weighted_distance(weights, mask.active_count())?;
    let disagreement = disagreement_pct(total, max);
    Ok(MatchScore {
        respondent_id: respondent.id.clone(),
        total_weighted_distance: total,
        disagreement_pct: disagreement,
        agreement_pct: 100 - disagreement,
    })
}

pub fn rank_all(
    weights: &WeightMatrix,
    user: &UserResponse,
    roster: &[RespondentProfile],
    mask: &QuestionMask,
) -> Result<Ranking, EngineError> {
    if roster.is_empty() {
        return Err(EngineError::EmptyRoster);
    }
    let scores = roster
        .iter()
        .map(|r| agreement(weights, user, r, mask))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Ranking::from_scores(scores))
}

/// All respondents at the ranking's maximum agreement. Empty for an empty ranking.
pub fn top_set(ranking: &Ranking) -> TopSet {
    let Some(best) = ranking.entries.first().map(|e| e.agreement_pct) else {
        return TopSet::new(Vec::new(), 0);
    };
    let members = ranking
        .entries
        .iter()
        .take_while(|e| e.agreement_pct == best)
        .map(|e| e.respondent_id.clone())
        .collect();
    TopSet::new(members, best)
}
