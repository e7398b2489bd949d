//! Modification families applied to the weight table and the questionnaire.

use std::fmt;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Importance, QuestionMask, UserResponse, WeightMatrix, DISTANCES};

pub use crate::engine::validate_weights;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PerturbError {
    #[error("delta must be a positive integer")]
    ZeroDelta,
    #[error("distance {0} out of range 0..=4")]
    DistanceOutOfRange(u8),
    #[error("cannot drop {n} of {m} questions; at least one must remain")]
    TooManyDrops { n: usize, m: usize },
    #[error("{0} is not a weight perturbation")]
    NotAWeightPerturbation(String),
    #[error("{0} is not a question-drop perturbation")]
    NotADropPerturbation(String),
    #[error("user marked only {available} eligible questions, {needed} needed")]
    NotEnoughEligible { needed: usize, available: usize },
    #[error("weight {0} overflows")]
    Overflow(String),
}

/// Positive integer weight increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Delta(u32);

impl Delta {
    pub fn new(value: u32) -> Result<Self, PerturbError> {
        if value == 0 {
            Err(PerturbError::ZeroDelta)
        } else {
            Ok(Delta(value))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for Delta {
    type Error = PerturbError;
    fn try_from(v: u32) -> Result<Self, Self::Error> {
        Delta::new(v)
    }
}

impl From<Delta> for u32 {
    fn from(d: Delta) -> u32 {
        d.0
    }
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Which questions a drop may remove.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropConditioning {
    Unconditioned,
    Level(Importance),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// Baseline compared against itself.
    Identity,
    /// Add delta to one cell.
    SingleCell {
        distance: u8,
        importance: Importance,
        delta: Delta,
    },
    /// Add delta to all five cells of a row.
    ImportanceRow {
        importance: Importance,
        delta: Delta,
    },
    /// Add delta to every cell.
    Overall { delta: Delta },
    /// Remove `n` questions from scoring.
    DropQuestions {
        n: usize,
        conditioning: DropConditioning,
    },
}

impl Perturbation {
    pub fn kind(&self) -> &'static str {
        match self {
            Perturbation::Identity => "identity",
            Perturbation::SingleCell { .. } => "single",
            Perturbation::ImportanceRow { .. } => "row",
            Perturbation::Overall { .. } => "overall",
            Perturbation::DropQuestions { .. } => "drop",
        }
    }

    pub fn importance(&self) -> Option<Importance> {
        match *self {
            Perturbation::SingleCell { importance, .. }
            | Perturbation::ImportanceRow { importance, .. } => Some(importance),
            Perturbation::DropQuestions {
                conditioning: DropConditioning::Level(l),
                ..
            } => Some(l),
            _ => None,
        }
    }

    pub fn distance(&self) -> Option<u8> {
        match *self {
            Perturbation::SingleCell { distance, .. } => Some(distance),
            _ => None,
        }
    }

    pub fn delta(&self) -> Option<Delta> {
        match *self {
            Perturbation::SingleCell { delta, .. }
            | Perturbation::ImportanceRow { delta, .. }
            | Perturbation::Overall { delta } => Some(delta),
            _ => None,
        }
    }

    pub fn drop_count(&self) -> Option<usize> {
        match *self {
            Perturbation::DropQuestions { n, .. } => Some(n),
            _ => None,
        }
    }

    pub fn is_weight_change(&self) -> bool {
        !matches!(self, Perturbation::DropQuestions { .. })
    }

    /// Checks the variant against a questionnaire of `m` questions.
    pub fn validate(&self, m: usize) -> Result<(), PerturbError> {
        match *self {
            Perturbation::SingleCell { distance, .. } if distance as usize >= DISTANCES => {
                Err(PerturbError::DistanceOutOfRange(distance))
            }
            Perturbation::DropQuestions { n, .. } if n >= m => {
                Err(PerturbError::TooManyDrops { n, m })
            }
            _ => Ok(()),
        }
    }

    /// Stable identifier, also used for seed derivation.
    pub fn id(&self) -> String {
        match *self {
            Perturbation::Identity => "identity".into(),
            Perturbation::SingleCell {
                distance,
                importance,
                delta,
            } => format!("single:{importance}:d{distance}:delta{delta}"),
            Perturbation::ImportanceRow { importance, delta } => {
                format!("row:{importance}:delta{delta}")
            }
            Perturbation::Overall { delta } => format!("overall:delta{delta}"),
            Perturbation::DropQuestions { n, conditioning } => match conditioning {
                DropConditioning::Unconditioned => format!("drop:any:n{n}"),
                DropConditioning::Level(l) => format!("drop:{l}:n{n}"),
            },
        }
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Returns a new table with the perturbation's cells raised by delta.
pub fn apply_weights(
    weights: &WeightMatrix,
    p: &Perturbation,
) -> Result<WeightMatrix, PerturbError> {
    let mut cells = weights.cells();
    match *p {
        Perturbation::Identity => {}
        Perturbation::SingleCell {
            distance,
            importance,
            delta,
        } => {
            if distance as usize >= DISTANCES {
                return Err(PerturbError::DistanceOutOfRange(distance));
            }
            cells[importance.index()][distance as usize] += i64::from(delta.get());
        }
        Perturbation::ImportanceRow { importance, delta } => {
            for c in cells[importance.index()].iter_mut() {
                *c += i64::from(delta.get());
            }
        }
        Perturbation::Overall { delta } => {
            for c in cells.iter_mut().flatten() {
                *c += i64::from(delta.get());
            }
        }
        Perturbation::DropQuestions { .. } => {
            return Err(PerturbError::NotAWeightPerturbation(p.id()));
        }
    }
    WeightMatrix::new(cells).map_err(|_| PerturbError::Overflow(p.id()))
}

/// Draws the questions removed by a drop perturbation, uniformly without
/// replacement from the eligible pool.
pub fn sample_drop_mask<R: Rng + ?Sized>(
    user: &UserResponse,
    p: &Perturbation,
    rng: &mut R,
) -> Result<QuestionMask, PerturbError> {
    let Perturbation::DropQuestions { n, conditioning } = *p else {
        return Err(PerturbError::NotADropPerturbation(p.id()));
    };
    let m = user.len();
    p.validate(m)?;
    let mut active = vec![true; m];
    match conditioning {
        DropConditioning::Unconditioned => {
            for i in index::sample(rng, m, n) {
                active[i] = false;
            }
        }
        DropConditioning::Level(level) => {
            let eligible: Vec<usize> = user
                .importances()
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == level)
                .map(|(i, _)| i)
                .collect();
            if eligible.len() < n {
                return Err(PerturbError::NotEnoughEligible {
                    needed: n,
                    available: eligible.len(),
                });
            }
            for j in index::sample(rng, eligible.len(), n) {
                active[eligible[j]] = false;
            }
        }
    }
    Ok(QuestionMask::new(active).expect("n < m leaves an active question"))
}

/// The sweep families in a fixed order.
pub fn single_cell_sweep(deltas: &[Delta]) -> Vec<Perturbation> {
    let mut out = Vec::with_capacity(deltas.len() * 15);
    for &importance in &Importance::ALL {
        for distance in 0..DISTANCES as u8 {
            for &delta in deltas {
                out.push(Perturbation::SingleCell {
                    distance,
                    importance,
                    delta,
                });
            }
        }
    }
    out
}

pub fn row_sweep(deltas: &[Delta]) -> Vec<Perturbation> {
    Importance::ALL
        .iter()
        .flat_map(|&importance| {
            deltas
                .iter()
                .map(move |&delta| Perturbation::ImportanceRow { importance, delta })
        })
        .collect()
}

pub fn overall_sweep(deltas: &[Delta]) -> Vec<Perturbation> {
    deltas
        .iter()
        .map(|&delta| Perturbation::Overall { delta })
        .collect()
}

pub fn drop_sweep(counts: &[usize]) -> Vec<Perturbation> {
    Importance::ALL
        .iter()
        .flat_map(|&l| {
            counts.iter().map(move |&n| Perturbation::DropQuestions {
                n,
                conditioning: DropConditioning::Level(l),
            })
        })
        .collect()
}
