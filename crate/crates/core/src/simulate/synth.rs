//! Synthetic voters and rosters.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::engine::{
    Answer, Importance, RespondentProfile, Roster, UserResponse, DEFAULT_QUESTION_COUNT,
};

/// National roster size: candidates answering the questionnaire.
pub const DEFAULT_RESPONDENTS: usize = 779;
/// Parties standing in the national election.
pub const DEFAULT_PARTIES: usize = 16;

/// Voter answering at random: answers uniform over 1..=5, importances
/// uniform over the three levels, all independent.
pub fn generate_user<R: Rng + ?Sized>(rng: &mut R, m: usize) -> UserResponse {
    let answers = (0..m)
        .map(|_| Answer::new(rng.gen_range(1..=5)).expect("in range"))
        .collect();
    let importances = (0..m)
        .map(|_| Importance::ALL[rng.gen_range(0..3)])
        .collect();
    UserResponse::new(answers, importances).expect("equal lengths")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnswerDistribution {
    Uniform,
    /// Relative frequencies of answers 1..=5, shared by every question.
    Empirical {
        weights: [f64; 5],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticRosterSpec {
    pub respondent_count: usize,
    pub party_count: usize,
    pub question_count: usize,
    pub answer_distribution: AnswerDistribution,
    pub seed: u64,
}

impl Default for SyntheticRosterSpec {
    fn default() -> Self {
        SyntheticRosterSpec {
            respondent_count: DEFAULT_RESPONDENTS,
            party_count: DEFAULT_PARTIES,
            question_count: DEFAULT_QUESTION_COUNT,
            answer_distribution: AnswerDistribution::Uniform,
            seed: 0,
        }
    }
}

impl SyntheticRosterSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidSpec(msg));
        if self.party_count == 0 {
            return bad("party_count must be at least 1".into());
        }
        if self.respondent_count < self.party_count {
            return bad(format!(
                "respondent_count {} is smaller than party_count {}",
                self.respondent_count, self.party_count
            ));
        }
        if self.question_count == 0 {
            return bad("question_count must be at least 1".into());
        }
        if let AnswerDistribution::Empirical { weights } = &self.answer_distribution {
            if weights.iter().any(|w| !w.is_finite() || *w < 0.0)
                || weights.iter().sum::<f64>() <= 0.0
            {
                return bad(format!("invalid answer weights {weights:?}"));
            }
        }
        Ok(())
    }

    /// Party-level mode: every respondent is its own party.
    pub fn is_party_level(&self) -> bool {
        self.respondent_count == self.party_count
    }
}

fn width(n: usize) -> usize {
    n.max(1).to_string().len()
}

/// Builds a roster with zero-padded ids (so id order is index order) and
/// parties assigned round-robin.
pub fn generate_roster(spec: &SyntheticRosterSpec) -> Result<Roster, SimError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sampler = match &spec.answer_distribution {
        AnswerDistribution::Uniform => None,
        AnswerDistribution::Empirical { weights } => {
            Some(WeightedIndex::new(weights).map_err(|e| SimError::InvalidSpec(e.to_string()))?)
        }
    };
    let (rw, pw) = (width(spec.respondent_count), width(spec.party_count));
    let party_level = spec.is_party_level();
    let profiles = (0..spec.respondent_count)
        .map(|i| {
            let answers = (0..spec.question_count)
                .map(|_| {
                    let v = match &sampler {
                        None => rng.gen_range(1..=5),
                        Some(s) => s.sample(&mut rng) as i64 + 1,
                    };
                    Answer::new(v).expect("in range")
                })
                .collect();
            let (id, party) = if party_level {
                let id = format!("P{:0pw$}", i + 1);
                (id.clone(), id)
            } else {
                (
                    format!("C{:0rw$}", i + 1),
                    format!("P{:0pw$}", i % spec.party_count + 1),
                )
            };
            RespondentProfile {
                name: if party_level {
                    format!("Party {}", i + 1)
                } else {
                    format!("Candidate {}", i + 1)
                },
                id,
                party,
                answers,
            }
        })
        .collect();
    Ok(Roster::new(profiles)?)
}
