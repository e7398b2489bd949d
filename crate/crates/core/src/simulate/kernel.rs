//! Flat-array scoring used by the Monte Carlo loop.
//!
//! For a fixed user × respondent pair the total weighted distance is the dot
//! product of a 15-bin (importance, distance) count histogram with the
//! flattened weight table, so each weight perturbation costs 15 multiply-adds
//! instead of a rescore over every question.

use crate::engine::{
    answer_distance, EngineError, RespondentProfile, Roster, UserResponse, CELLS, DISTANCES,
};

/// Roster answers packed row-major, plus dense party indices.
#[derive(Debug, Clone)]
pub struct PackedRoster {
    answers: Vec<u8>,
    parties: Vec<u16>,
    party_count: usize,
    question_count: usize,
}

impl PackedRoster {
    pub fn new(roster: &Roster) -> Self {
        let names = roster.parties();
        let m = roster.question_count();
        let mut answers = Vec::with_capacity(roster.len() * m);
        let mut parties = Vec::with_capacity(roster.len());
        for r in roster.respondents() {
            answers.extend(r.answers.iter().map(|a| a.value()));
            let p = names
                .binary_search(&r.party.as_str())
                .expect("party list built from this roster");
            parties.push(p as u16);
        }
        PackedRoster {
            answers,
            parties,
            party_count: names.len(),
            question_count: m,
        }
    }

    pub fn len(&self) -> usize {
        self.parties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parties.is_empty()
    }

    pub fn question_count(&self) -> usize {
        self.question_count
    }

    pub fn party_count(&self) -> usize {
        self.party_count
    }

    #[inline]
    pub fn answers(&self, respondent: usize) -> &[u8] {
        let m = self.question_count;
        &self.answers[respondent * m..(respondent + 1) * m]
    }

    #[inline]
    pub fn party(&self, respondent: usize) -> u16 {
        self.parties[respondent]
    }
}

/// A user's answers and importance row indices as bytes.
#[derive(Debug, Clone)]
pub struct PackedUser {
    pub answers: Vec<u8>,
    pub levels: Vec<u8>,
}

impl From<&UserResponse> for PackedUser {
    fn from(u: &UserResponse) -> Self {
        PackedUser {
            answers: u.answers().iter().map(|a| a.value()).collect(),
            levels: u.importances().iter().map(|l| l.index() as u8).collect(),
        }
    }
}

/// Counts of questions per (importance, distance) cell, row-major like
/// [`crate::engine::WeightMatrix::flattened`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DistanceHistogram(pub [u16; CELLS]);

impl DistanceHistogram {
    #[inline]
    pub fn build(user: &PackedUser, respondent_answers: &[u8]) -> Self {
        let mut bins = [0u16; CELLS];
        for ((&u, &l), &p) in user
            .answers
            .iter()
            .zip(&user.levels)
            .zip(respondent_answers)
        {
            bins[l as usize * DISTANCES + u.abs_diff(p) as usize] += 1;
        }
        DistanceHistogram(bins)
    }

    pub fn from_profiles(
        user: &UserResponse,
        respondent: &RespondentProfile,
    ) -> Result<Self, EngineError> {
        if user.len() != respondent.answers.len() {
            return Err(EngineError::LengthMismatch {
                what: "respondent answers",
                expected: user.len(),
                actual: respondent.answers.len(),
            });
        }
        let mut bins = [0u16; CELLS];
        for ((&u, &l), &p) in user
            .answers()
            .iter()
            .zip(user.importances())
            .zip(&respondent.answers)
        {
            bins[l.index() * DISTANCES + answer_distance(u, p) as usize] += 1;
        }
        Ok(DistanceHistogram(bins))
    }

    /// Total weighted distance under a flattened weight table.
    #[inline]
    pub fn total(&self, flat_weights: &[u32; CELLS]) -> u64 {
        self.0
            .iter()
            .zip(flat_weights)
            .map(|(&c, &w)| u64::from(c) * u64::from(w))
            .sum()
    }
}

/// Total over active questions only; `active` has one flag per question.
#[inline]
pub fn masked_total(
    user: &PackedUser,
    respondent_answers: &[u8],
    active: &[bool],
    flat_weights: &[u32; CELLS],
) -> u64 {
    user.answers
        .iter()
        .zip(&user.levels)
        .zip(respondent_answers)
        .zip(active)
        .filter(|(_, &a)| a)
        .map(|(((&u, &l), &p), _)| {
            u64::from(flat_weights[l as usize * DISTANCES + u.abs_diff(p) as usize])
        })
        .sum()
}
