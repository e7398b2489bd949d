//! Back-of-envelope conversion from change rates to votes and mandates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Eligible voters, 2022 Danish general election (Statistics Denmark).
pub const ELIGIBLE_VOTERS_2022: u64 = 4_269_048;
/// Turnout, 2022 Danish general election.
pub const TURNOUT_2022: f64 = 0.8416;
/// Share of voters who used a VAA (Danish National Election Study).
pub const VAA_USAGE_2022: f64 = 0.62;
/// Share of VAA users who followed the advice (Danish National Election Study).
pub const FOLLOW_RATE_2022: f64 = 0.45;
/// Typical votes needed for one Folketing mandate, low and high.
pub const VOTES_PER_MANDATE_LOW: u64 = 17_000;
pub const VOTES_PER_MANDATE_HIGH: u64 = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImpactError {
    #[error("{name} = {value} must lie in [0, 1]")]
    FractionOutOfRange { name: &'static str, value: f64 },
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("votes_per_mandate_low ({low}) exceeds votes_per_mandate_high ({high})")]
    MandateBounds { low: u64, high: u64 },
    #[error("change rate {0} outside [0, 100]")]
    RateOutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElectorateParameters {
    pub eligible_voters: u64,
    pub turnout: f64,
    pub vaa_usage: f64,
    pub follow_rate: f64,
    pub votes_per_mandate_low: u64,
    pub votes_per_mandate_high: u64,
}

impl Default for ElectorateParameters {
    fn default() -> Self {
        ElectorateParameters {
            eligible_voters: ELIGIBLE_VOTERS_2022,
            turnout: TURNOUT_2022,
            vaa_usage: VAA_USAGE_2022,
            follow_rate: FOLLOW_RATE_2022,
            votes_per_mandate_low: VOTES_PER_MANDATE_LOW,
            votes_per_mandate_high: VOTES_PER_MANDATE_HIGH,
        }
    }
}

impl ElectorateParameters {
    pub fn validate(&self) -> Result<(), ImpactError> {
        for (name, value) in [
            ("turnout", self.turnout),
            ("vaa_usage", self.vaa_usage),
            ("follow_rate", self.follow_rate),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ImpactError::FractionOutOfRange { name, value });
            }
        }
        if self.eligible_voters == 0 {
            return Err(ImpactError::NonPositive("eligible_voters"));
        }
        if self.votes_per_mandate_low == 0 {
            return Err(ImpactError::NonPositive("votes_per_mandate_low"));
        }
        if self.votes_per_mandate_low > self.votes_per_mandate_high {
            return Err(ImpactError::MandateBounds {
                low: self.votes_per_mandate_low,
                high: self.votes_per_mandate_high,
            });
        }
        Ok(())
    }

    /// `round(eligible * turnout)`.
    pub fn cast_votes(&self) -> u64 {
        (self.eligible_voters as f64 * self.turnout).round() as u64
    }

    /// Voters who used a VAA and followed it:
    /// `round(eligible * turnout * usage * follow)`.
    pub fn affected_pool(&self) -> u64 {
        (self.eligible_voters as f64 * self.turnout * self.vaa_usage * self.follow_rate).round()
            as u64
    }

    /// `(floor(votes / high), floor(votes / low))`.
    pub fn mandate_range(&self, votes: u64) -> (u64, u64) {
        (
            votes / self.votes_per_mandate_high,
            votes / self.votes_per_mandate_low,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactEstimate {
    pub change_rate_pct: f64,
    pub cast_votes: u64,
    pub affected_pool: u64,
    pub votes_affected: u64,
    /// Percent of cast votes.
    pub share_of_cast_pct: f64,
    pub mandates_low: u64,
    pub mandates_high: u64,
}

pub fn affected_pool(params: &ElectorateParameters) -> Result<u64, ImpactError> {
    params.validate()?;
    Ok(params.affected_pool())
}

/// Votes swayed by a change rate and their share of cast votes.
pub fn votes_affected(
    params: &ElectorateParameters,
    change_rate_pct: f64,
) -> Result<(u64, f64), ImpactError> {
    params.validate()?;
    if !(0.0..=100.0).contains(&change_rate_pct) {
        return Err(ImpactError::RateOutOfRange(change_rate_pct));
    }
    let votes = (params.affected_pool() as f64 * change_rate_pct / 100.0).round() as u64;
    let cast = params.cast_votes();
    let share = if cast == 0 {
        0.0
    } else {
        100.0 * votes as f64 / cast as f64
    };
    Ok((votes, share))
}

pub fn mandate_range(params: &ElectorateParameters, votes: u64) -> Result<(u64, u64), ImpactError> {
    params.validate()?;
    Ok(params.mandate_range(votes))
}

pub fn estimate(
    params: &ElectorateParameters,
    change_rate_pct: f64,
) -> Result<ImpactEstimate, ImpactError> {
    let (votes, share) = votes_affected(params, change_rate_pct)?;
    let (mandates_low, mandates_high) = params.mandate_range(votes);
    Ok(ImpactEstimate {
        change_rate_pct,
        cast_votes: params.cast_votes(),
        affected_pool: params.affected_pool(),
        votes_affected: votes,
        share_of_cast_pct: share,
        mandates_low,
        mandates_high,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_pool() {
        let p = ElectorateParameters::default();
        assert_eq!(p.cast_votes(), 3_592_831);
        // 4269048 * 0.8416 * 0.62 * 0.45 = 1002399.8...
        assert_eq!(affected_pool(&p).unwrap(), 1_002_400);
    }

    #[test]
    fn pool_edges() {
        let zero = ElectorateParameters {
            turnout: 0.0,
            ..Default::default()
        };
        assert_eq!(affected_pool(&zero).unwrap(), 0);
        let full = ElectorateParameters {
            turnout: 1.0,
            vaa_usage: 1.0,
            follow_rate: 1.0,
            ..Default::default()
        };
        assert_eq!(affected_pool(&full).unwrap(), ELIGIBLE_VOTERS_2022);
    }

    #[test]
    fn published_vote_counts() {
        let p = ElectorateParameters::default();
        let (v, s) = votes_affected(&p, 1.29).unwrap();
        assert_eq!(v, 12_931);
        assert!((s - 0.36).abs() < 0.01);
        let (v, s) = votes_affected(&p, 9.77).unwrap();
        assert_eq!(v, 97_934);
        assert!((s - 2.73).abs() < 0.01);
        let (v, _) = votes_affected(&p, (30.9 + 21.5 + 12.4) / 3.0).unwrap();
        assert_eq!(v, 216_518);
    }

    #[test]
    fn published_mandates() {
        let p = ElectorateParameters::default();
        assert_eq!(mandate_range(&p, 216_518).unwrap(), (10, 12));
        assert_eq!(mandate_range(&p, 13_000).unwrap(), (0, 0));
        assert_eq!(mandate_range(&p, 98_000).unwrap(), (4, 5));
    }

    #[test]
    fn invalid_parameters() {
        let p = ElectorateParameters {
            turnout: 1.5,
            ..Default::default()
        };
        assert!(affected_pool(&p).is_err());
        let p = ElectorateParameters {
            votes_per_mandate_low: 30_000,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        assert!(votes_affected(&ElectorateParameters::default(), 101.0).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_rate(a in 0.0f64..100.0, b in 0.0f64..100.0) {
            let p = ElectorateParameters::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (e1, e2) = (estimate(&p, lo).unwrap(), estimate(&p, hi).unwrap());
            prop_assert!(e1.votes_affected <= e2.votes_affected);
            prop_assert!(e1.mandates_low <= e2.mandates_low && e1.mandates_high <= e2.mandates_high);
        }

        #[test]
        fn share_is_rate_times_usage_times_follow(rate in 0.0f64..100.0) {
            let p = ElectorateParameters::default();
            let e = estimate(&p, rate).unwrap();
            let identity = rate * p.vaa_usage * p.follow_rate;
            // Rounding the pool and the vote count moves the share by well under 0.001 points.
            prop_assert!((e.share_of_cast_pct - identity).abs() < 1e-3);
            prop_assert!(e.votes_affected <= e.affected_pool && e.affected_pool <= e.cast_votes);
        }

        #[test]
        fn monotone_in_follow_rate(f1 in 0.0f64..=1.0, f2 in 0.0f64..=1.0, rate in 0.0f64..100.0) {
            let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
            let a = estimate(&ElectorateParameters { follow_rate: lo, ..Default::default() }, rate).unwrap();
            let b = estimate(&ElectorateParameters { follow_rate: hi, ..Default::default() }, rate).unwrap();
            prop_assert!(a.votes_affected <= b.votes_affected);
        }
    }
}
