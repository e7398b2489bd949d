//! Voting-advice matching engine and robustness audit.
//!
//! * [`engine`]: weighted Likert-distance scoring, rankings and top sets.
//! * [`perturb`]: weight-table modifications and question drops.
//! * [`outcomes`]: changed-outcome classification and top-k Spearman correlation.
//! * [`simulate`]: synthetic voters and rosters, the batched Monte Carlo audit.
//! * [`impact`]: votes and mandates implied by a change rate.
//! * [`io`]: roster, weight, config and report file formats.

pub mod engine;
pub mod impact;
pub mod io;
pub mod outcomes;
pub mod perturb;
pub mod simulate;

pub use engine::{
    agreement, answer_distance, lookup_weight, max_weighted_distance, rank_all, top_set,
    total_weighted_distance, Answer, EngineError, Importance, MatchScore, QuestionMask, Ranking,
    RespondentProfile, Roster, TopSet, UserResponse, WeightMatrix,
};
pub use impact::{ElectorateParameters, ImpactEstimate};
pub use outcomes::{
    candidate_outcome_changed, party_outcome_changed, topk_rank_correlation, OutcomeClass,
    OutcomeComparison, PartyComparison, RankCorrelation,
};
pub use perturb::{apply_weights, sample_drop_mask, Delta, DropConditioning, Perturbation};
pub use simulate::{
    aggregate, generate_roster, generate_user, run_audit, run_cell, run_topk_cell, AuditConfig,
    AuditReport, BatchResult, Level, SyntheticRosterSpec,
};
