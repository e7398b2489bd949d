//! Fixtures shared by the criterion benches.

use vaa_audit_core::simulate::{generate_roster, SyntheticRosterSpec};
use vaa_audit_core::{AuditConfig, Roster};

/// National-size synthetic roster.
pub fn national_roster(seed: u64) -> Roster {
    generate_roster(&SyntheticRosterSpec {
        seed,
        ..Default::default()
    })
    .expect("default spec is valid")
}

/// Small audit config: `batches` × `users` with a trimmed top-k sweep.
pub fn desk_config(batches: usize, users: usize) -> AuditConfig {
    AuditConfig {
        batches,
        users_per_batch: users,
        base_seed: 1,
        k_sweep: vec![3, 15],
        ..Default::default()
    }
}
