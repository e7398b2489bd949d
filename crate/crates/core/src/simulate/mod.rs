//! Batched Monte Carlo robustness audit.
//!
//! Every batch draws its synthetic users from a seed derived from
//! `(base_seed, batch)`, so all perturbation cells see the same voters and
//! any single cell can be re-run on its own with identical results. Drop
//! masks come from a per-cell stream derived from `(base_seed, cell id,
//! batch)`. Batches run in parallel and are merged in index order.

pub mod kernel;
mod synth;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use synth::{
    generate_roster, generate_user, AnswerDistribution, SyntheticRosterSpec, DEFAULT_PARTIES,
    DEFAULT_RESPONDENTS,
};

use crate::engine::{
    agreement_pct, EngineError, Roster, UserResponse, WeightMatrix, CELLS, DEFAULT_QUESTION_COUNT,
};
use crate::outcomes::{
    classify_sorted, parties_changed_sorted, spearman, AgreementRanks, OutcomeClass, OutcomeError,
    PartyComparison,
};
use crate::perturb::{
    apply_weights, drop_sweep, overall_sweep, row_sweep, sample_drop_mask, single_cell_sweep,
    Delta, PerturbError, Perturbation,
};
use kernel::{masked_total, DistanceHistogram, PackedRoster, PackedUser};

/// z-value for a two-sided 95% normal interval.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Outcome(#[from] OutcomeError),
    #[error("invalid audit config: {0}")]
    InvalidConfig(String),
    #[error("invalid roster spec: {0}")]
    InvalidSpec(String),
    #[error("need at least 2 batches to aggregate, got {0}")]
    TooFewBatches(usize),
    #[error("cell {0} has fewer than 2 batches with any eligible user")]
    EmptyCell(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub batches: usize,
    pub users_per_batch: usize,
    pub question_count: usize,
    pub delta_sweep: Vec<Delta>,
    pub drop_sweep: Vec<usize>,
    pub k_sweep: Vec<usize>,
    /// Delta used for the top-k single-cell sweep.
    pub topk_delta: Delta,
    pub base_seed: u64,
    pub comparison_mode: PartyComparison,
    pub baseline_weights: WeightMatrix,
}

impl Default for AuditConfig {
    fn default() -> Self {
        let d = |v| Delta::new(v).expect("positive");
        AuditConfig {
            batches: 100,
            users_per_batch: 1000,
            question_count: DEFAULT_QUESTION_COUNT,
            delta_sweep: vec![d(1), d(2), d(3)],
            drop_sweep: (1..=5).collect(),
            k_sweep: (3..=15).collect(),
            topk_delta: d(3),
            base_seed: 0,
            comparison_mode: PartyComparison::SetEquality,
            baseline_weights: WeightMatrix::default(),
        }
    }
}

impl AuditConfig {
    pub fn validate(&self, roster: &Roster) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.batches < 2 {
            return bad(format!("batches must be at least 2, got {}", self.batches));
        }
        if self.users_per_batch == 0 {
            return bad("users_per_batch must be positive".into());
        }
        if self.question_count != roster.question_count() {
            return bad(format!(
                "question_count {} does not match roster with {} answers per respondent",
                self.question_count,
                roster.question_count()
            ));
        }
        Ok(())
    }

    /// Checks the drop and top-k sweeps on top of [`AuditConfig::validate`].
    pub fn validate_sweeps(&self, roster: &Roster) -> Result<(), SimError> {
        self.validate(roster)?;
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if let Some(&n) = self.drop_sweep.iter().find(|&&n| n >= self.question_count) {
            return bad(format!(
                "drop count {n} must be below question_count {}",
                self.question_count
            ));
        }
        if let Some(&k) = self.k_sweep.iter().find(|&&k| k < 2 || k > roster.len()) {
            return bad(format!("k = {k} outside 2..={}", roster.len()));
        }
        Ok(())
    }

    /// Change-rate cells in report order: single cells, rows, overall, drops.
    pub fn change_cells(&self) -> Vec<Perturbation> {
        let mut cells = single_cell_sweep(&self.delta_sweep);
        cells.extend(row_sweep(&self.delta_sweep));
        cells.extend(overall_sweep(&self.delta_sweep));
        cells.extend(drop_sweep(&self.drop_sweep));
        cells
    }

    pub fn topk_cells(&self) -> Vec<Perturbation> {
        if self.k_sweep.is_empty() {
            Vec::new()
        } else {
            single_cell_sweep(&[self.topk_delta])
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Candidate,
    Party,
}

impl Level {
    pub const ALL: [Level; 2] = [Level::Candidate, Level::Party];

    pub fn key(self) -> &'static str {
        match self {
            Level::Candidate => "candidate",
            Level::Party => "party",
        }
    }

    pub fn from_key(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.key() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub perturbation: String,
    pub batch: usize,
    pub level: Level,
    pub trials: u64,
    pub changed: u64,
    pub skips: u64,
    pub change_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub sd: f64,
    pub half_width: f64,
    pub batches: usize,
}

/// Mean across batches with a normal-approximation 95% interval,
/// `1.96 * sd / sqrt(batches)` using the sample standard deviation.
pub fn aggregate(values: &[f64]) -> Result<Aggregate, SimError> {
    let n = values.len();
    if n < 2 {
        return Err(SimError::TooFewBatches(n));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    Ok(Aggregate {
        mean,
        sd,
        half_width: Z_95 * sd / nf.sqrt(),
        batches: n,
    })
}

/// Stable seed for `(base, label, batch)`.
pub fn derive_seed(base: u64, label: &str, batch: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update([0]);
    h.update(label.as_bytes());
    h.update([0]);
    h.update((batch as u64).to_le_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

const USER_STREAM: &str = "users";

/// SHA-256 over a canonical line form of the roster.
pub fn roster_digest(roster: &Roster) -> String {
    let mut h = Sha256::new();
    for r in roster.respondents() {
        h.update(r.id.as_bytes());
        h.update([0x1f]);
        h.update(r.name.as_bytes());
        h.update([0x1f]);
        h.update(r.party.as_bytes());
        h.update([0x1f]);
        h.update(
            r.answers
                .iter()
                .map(|a| b'0' + a.value())
                .collect::<Vec<_>>(),
        );
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub perturbation: Perturbation,
    pub level: Level,
    pub mean_change_pct: f64,
    pub half_width: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub batches: usize,
    pub trials: u64,
    pub skips: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopkSummary {
    pub perturbation: Perturbation,
    pub k: usize,
    pub mean_rho: f64,
    pub half_width: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub batches: usize,
    pub users: u64,
    /// Users whose rank vectors had zero variance.
    pub degenerate: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub base_seed: u64,
    pub config_digest: String,
    pub config: AuditConfig,
    pub baseline_weights: WeightMatrix,
    pub roster_digest: String,
    pub roster_size: usize,
    pub party_count: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub provenance: Provenance,
    pub cells: Vec<CellSummary>,
    pub topk: Vec<TopkSummary>,
}

impl AuditReport {
    pub fn cell(&self, perturbation: &Perturbation, level: Level) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| &c.perturbation == perturbation && c.level == level)
    }

    pub fn topk_cell(&self, perturbation: &Perturbation, k: usize) -> Option<&TopkSummary> {
        self.topk
            .iter()
            .find(|c| &c.perturbation == perturbation && c.k == k)
    }
}

enum CellPlan {
    Weights { flat: [u32; CELLS], max_total: u64 },
    Drop { flat: [u32; CELLS], max_cell: u64 },
}

struct PlannedCell {
    perturbation: Perturbation,
    plan: CellPlan,
    change: bool,
    topk: bool,
}

struct AuditPlan {
    roster: PackedRoster,
    baseline_flat: [u32; CELLS],
    baseline_max: u64,
    cells: Vec<PlannedCell>,
    ks: Vec<usize>,
    k_max: usize,
    users_per_batch: usize,
    base_seed: u64,
    mode: PartyComparison,
}

impl AuditPlan {
    fn new(
        config: &AuditConfig,
        roster: &Roster,
        change: &[Perturbation],
        topk: &[Perturbation],
        ks: &[usize],
    ) -> Result<Self, SimError> {
        config.validate(roster)?;
        let m = config.question_count;
        for &k in ks {
            if k < 2 || k > roster.len() {
                return Err(OutcomeError::KOutOfRange {
                    k,
                    size: roster.len(),
                }
                .into());
            }
        }
        let base = &config.baseline_weights;
        let plan_for = |p: &Perturbation| -> Result<CellPlan, SimError> {
            p.validate(m)?;
            Ok(if p.is_weight_change() {
                let w = apply_weights(base, p)?;
                CellPlan::Weights {
                    flat: w.flattened(),
                    max_total: u64::from(w.global_max()) * m as u64,
                }
            } else {
                CellPlan::Drop {
                    flat: base.flattened(),
                    max_cell: u64::from(base.global_max()),
                }
            })
        };
        let mut cells: Vec<PlannedCell> = Vec::new();
        for p in change {
            cells.push(PlannedCell {
                perturbation: *p,
                plan: plan_for(p)?,
                change: true,
                topk: false,
            });
        }
        for p in topk {
            match cells.iter_mut().find(|c| c.perturbation == *p) {
                Some(c) => c.topk = true,
                None => cells.push(PlannedCell {
                    perturbation: *p,
                    plan: plan_for(p)?,
                    change: false,
                    topk: true,
                }),
            }
        }
        Ok(AuditPlan {
            roster: PackedRoster::new(roster),
            baseline_flat: base.flattened(),
            baseline_max: u64::from(base.global_max()) * m as u64,
            cells,
            ks: ks.to_vec(),
            k_max: ks.iter().copied().max().unwrap_or(0),
            users_per_batch: config.users_per_batch,
            base_seed: config.base_seed,
            mode: config.comparison_mode,
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct CellTally {
    trials: u64,
    candidate: u64,
    party: u64,
    skips: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct TopkTally {
    sum_rho: f64,
    users: u64,
    degenerate: u64,
}

struct BatchTally {
    cells: Vec<CellTally>,
    /// Indexed `[cell][k index]`; empty for cells without top-k.
    topk: Vec<Vec<TopkTally>>,
}

#[derive(Default)]
struct Scratch {
    hist: Vec<DistanceHistogram>,
    base_agree: Vec<u8>,
    base_top: Vec<u32>,
    base_parties: Vec<u16>,
    base_x: Vec<f64>,
    base_order: Vec<u32>,
    mod_agree: Vec<u8>,
    mod_top: Vec<u32>,
    mod_parties: Vec<u16>,
    mod_y: Vec<f64>,
    active: Vec<bool>,
}

fn top_members(agree: &[u8], out: &mut Vec<u32>) {
    out.clear();
    let best = agree.iter().copied().max().unwrap_or(0);
    out.extend(
        agree
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == best)
            .map(|(i, _)| i as u32),
    );
}

fn parties_of(roster: &PackedRoster, members: &[u32], out: &mut Vec<u16>) {
    out.clear();
    out.extend(members.iter().map(|&i| roster.party(i as usize)));
    out.sort_unstable();
    out.dedup();
}

/// First `k` respondents by descending agreement, ascending index.
fn leading(agree: &[u8], k: usize, out: &mut Vec<u32>) {
    out.clear();
    let mut idx: Vec<u32> = (0..agree.len() as u32).collect();
    let key = |&i: &u32| (std::cmp::Reverse(agree[i as usize]), i);
    if k < idx.len() {
        idx.select_nth_unstable_by_key(k, key);
        idx.truncate(k);
    }
    idx.sort_unstable_by_key(key);
    out.extend(idx);
}

fn run_batch(plan: &AuditPlan, batch: usize) -> Result<BatchTally, SimError> {
    let n = plan.roster.len();
    let m = plan.roster.question_count();
    let mut user_rng = ChaCha8Rng::seed_from_u64(derive_seed(plan.base_seed, USER_STREAM, batch));
    let mut cell_rngs: Vec<Option<ChaCha8Rng>> = plan
        .cells
        .iter()
        .map(|c| match c.plan {
            CellPlan::Drop { .. } => Some(ChaCha8Rng::seed_from_u64(derive_seed(
                plan.base_seed,
                &c.perturbation.id(),
                batch,
            ))),
            CellPlan::Weights { .. } => None,
        })
        .collect();
    let mut tally = BatchTally {
        cells: vec![CellTally::default(); plan.cells.len()],
        topk: plan
            .cells
            .iter()
            .map(|c| {
                if c.topk {
                    vec![TopkTally::default(); plan.ks.len()]
                } else {
                    Vec::new()
                }
            })
            .collect(),
    };
    let mut s = Scratch {
        mod_agree: vec![0; n],
        base_agree: vec![0; n],
        ..Default::default()
    };

    for _ in 0..plan.users_per_batch {
        let user: UserResponse = generate_user(&mut user_rng, m);
        let packed = PackedUser::from(&user);
        s.hist.clear();
        s.hist
            .extend((0..n).map(|r| DistanceHistogram::build(&packed, plan.roster.answers(r))));
        for (a, h) in s.base_agree.iter_mut().zip(&s.hist) {
            *a = agreement_pct(h.total(&plan.baseline_flat), plan.baseline_max);
        }
        top_members(&s.base_agree, &mut s.base_top);
        parties_of(&plan.roster, &s.base_top, &mut s.base_parties);
        if plan.k_max > 0 {
            leading(&s.base_agree, plan.k_max, &mut s.base_order);
            let ranks = AgreementRanks::new(s.base_agree.iter().copied());
            s.base_x.clear();
            s.base_x.extend(
                s.base_order
                    .iter()
                    .map(|&i| ranks.rank(s.base_agree[i as usize])),
            );
        }

        for (ci, cell) in plan.cells.iter().enumerate() {
            match &cell.plan {
                CellPlan::Weights { flat, max_total } => {
                    for (a, h) in s.mod_agree.iter_mut().zip(&s.hist) {
                        *a = agreement_pct(h.total(flat), *max_total);
                    }
                }
                CellPlan::Drop { flat, max_cell } => {
                    let rng = cell_rngs[ci].as_mut().expect("drop cells own a stream");
                    let mask = match sample_drop_mask(&user, &cell.perturbation, rng) {
                        Ok(mask) => mask,
                        Err(PerturbError::NotEnoughEligible { .. }) => {
                            tally.cells[ci].skips += 1;
                            continue;
                        }
                        Err(e) => return Err(e.into()),
                    };
                    s.active.clear();
                    s.active.extend_from_slice(mask.active());
                    let max_total = max_cell * mask.active_count() as u64;
                    for (r, a) in s.mod_agree.iter_mut().enumerate() {
                        let t = masked_total(&packed, plan.roster.answers(r), &s.active, flat);
                        *a = agreement_pct(t, max_total);
                    }
                }
            }

            if cell.change {
                top_members(&s.mod_agree, &mut s.mod_top);
                let t = &mut tally.cells[ci];
                t.trials += 1;
                if classify_sorted(&s.base_top, &s.mod_top) != OutcomeClass::Unchanged {
                    t.candidate += 1;
                }
                parties_of(&plan.roster, &s.mod_top, &mut s.mod_parties);
                if parties_changed_sorted(&s.base_parties, &s.mod_parties, plan.mode) {
                    t.party += 1;
                }
            } else {
                tally.cells[ci].trials += 1;
            }

            if cell.topk {
                let ranks = AgreementRanks::new(s.mod_agree.iter().copied());
                s.mod_y.clear();
                s.mod_y.extend(
                    s.base_order
                        .iter()
                        .map(|&i| ranks.rank(s.mod_agree[i as usize])),
                );
                for (ki, &k) in plan.ks.iter().enumerate() {
                    let r = spearman(&s.base_x[..k], &s.mod_y[..k]);
                    let t = &mut tally.topk[ci][ki];
                    t.sum_rho += r.rho;
                    t.users += 1;
                    t.degenerate += u64::from(r.degenerate);
                }
            }
        }
    }
    Ok(tally)
}

fn run_plan(plan: &AuditPlan, batches: usize) -> Result<Vec<BatchTally>, SimError> {
    (0..batches)
        .into_par_iter()
        .map(|b| run_batch(plan, b))
        .collect()
}

fn pct(changed: u64, trials: u64) -> f64 {
    if trials == 0 {
        0.0
    } else {
        100.0 * changed as f64 / trials as f64
    }
}

/// Per-batch change counts for one perturbation, candidate then party
/// level for each batch.
pub fn run_cell(
    config: &AuditConfig,
    roster: &Roster,
    perturbation: &Perturbation,
) -> Result<Vec<BatchResult>, SimError> {
    let plan = AuditPlan::new(config, roster, &[*perturbation], &[], &[])?;
    let tallies = run_plan(&plan, config.batches)?;
    let id = perturbation.id();
    Ok(tallies
        .iter()
        .enumerate()
        .flat_map(|(batch, t)| {
            let c = t.cells[0];
            Level::ALL.map(|level| {
                let changed = match level {
                    Level::Candidate => c.candidate,
                    Level::Party => c.party,
                };
                BatchResult {
                    perturbation: id.clone(),
                    batch,
                    level,
                    trials: c.trials,
                    changed,
                    skips: c.skips,
                    change_pct: pct(changed, c.trials),
                }
            })
        })
        .collect())
}

/// Per-batch mean top-k Spearman correlation for one perturbation.
pub fn run_topk_cell(
    config: &AuditConfig,
    roster: &Roster,
    perturbation: &Perturbation,
    k: usize,
) -> Result<Vec<f64>, SimError> {
    let plan = AuditPlan::new(config, roster, &[], &[*perturbation], &[k])?;
    let tallies = run_plan(&plan, config.batches)?;
    Ok(tallies
        .iter()
        .map(|t| {
            let tk = t.topk[0][0];
            if tk.users == 0 {
                f64::NAN
            } else {
                tk.sum_rho / tk.users as f64
            }
        })
        .collect())
}

/// Full sweep: every change-rate cell at both levels plus the top-k sweep.
pub fn run_audit(config: &AuditConfig, roster: &Roster) -> Result<AuditReport, SimError> {
    let change = config.change_cells();
    let topk = config.topk_cells();
    config.validate_sweeps(roster)?;
    let plan = AuditPlan::new(config, roster, &change, &topk, &config.k_sweep)?;
    let tallies = run_plan(&plan, config.batches)?;

    let mut cells = Vec::with_capacity(change.len() * 2);
    let mut topk_rows = Vec::new();
    for (ci, cell) in plan.cells.iter().enumerate() {
        let per_batch: Vec<CellTally> = tallies.iter().map(|t| t.cells[ci]).collect();
        if cell.change {
            let trials: u64 = per_batch.iter().map(|c| c.trials).sum();
            let skips: u64 = per_batch.iter().map(|c| c.skips).sum();
            for level in Level::ALL {
                let rates: Vec<f64> = per_batch
                    .iter()
                    .filter(|c| c.trials > 0)
                    .map(|c| match level {
                        Level::Candidate => pct(c.candidate, c.trials),
                        Level::Party => pct(c.party, c.trials),
                    })
                    .collect();
                let agg =
                    aggregate(&rates).map_err(|_| SimError::EmptyCell(cell.perturbation.id()))?;
                cells.push(CellSummary {
                    perturbation: cell.perturbation,
                    level,
                    mean_change_pct: agg.mean,
                    half_width: agg.half_width,
                    ci_low: agg.mean - agg.half_width,
                    ci_high: agg.mean + agg.half_width,
                    batches: agg.batches,
                    trials,
                    skips,
                });
            }
        }
        if cell.topk {
            for (ki, &k) in plan.ks.iter().enumerate() {
                let per: Vec<TopkTally> = tallies.iter().map(|t| t.topk[ci][ki]).collect();
                let means: Vec<f64> = per
                    .iter()
                    .filter(|t| t.users > 0)
                    .map(|t| t.sum_rho / t.users as f64)
                    .collect();
                let agg =
                    aggregate(&means).map_err(|_| SimError::EmptyCell(cell.perturbation.id()))?;
                topk_rows.push(TopkSummary {
                    perturbation: cell.perturbation,
                    k,
                    mean_rho: agg.mean,
                    half_width: agg.half_width,
                    ci_low: agg.mean - agg.half_width,
                    ci_high: agg.mean + agg.half_width,
                    batches: agg.batches,
                    users: per.iter().map(|t| t.users).sum(),
                    degenerate: per.iter().map(|t| t.degenerate).sum(),
                });
            }
        }
    }

    Ok(AuditReport {
        provenance: Provenance {
            base_seed: config.base_seed,
            config_digest: config.digest(),
            config: config.clone(),
            baseline_weights: config.baseline_weights,
            roster_digest: roster_digest(roster),
            roster_size: roster.len(),
            party_count: roster.parties().len(),
            notes: Vec::new(),
        },
        cells,
        topk: topk_rows,
    })
}
