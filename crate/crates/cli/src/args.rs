use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "vaa-audit",
    version,
    about = "Voting-advice matching and robustness audits",
    long_about = "Scores voters against candidate or party rosters with the weighted \
                  Likert-distance algorithm, runs Monte Carlo perturbation audits, \
                  generates synthetic rosters and converts change rates into votes \
                  and mandates.\n\nExit codes: 0 success, 1 usage error, 2 data or validation error."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank a roster for one voter.
    Match(MatchArgs),
    /// Run the perturbation audit and write report files.
    Audit(AuditArgs),
    /// Generate a synthetic roster CSV.
    Synth(SynthArgs),
    /// Convert change rates into affected votes and mandates.
    Impact(ImpactArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PartyMode {
    /// Party sets must be equal.
    Set,
    /// Only a party absent from the original top set counts.
    Containment,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// Roster CSV: id,name,party,a1..am.
    #[arg(long)]
    pub roster: PathBuf,
    /// Questions per respondent.
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    /// Voter document: {"answers":[..],"importances":["important",..]}.
    #[arg(long, conflicts_with_all = ["answers", "importances"], required_unless_present = "answers")]
    pub user: Option<PathBuf>,
    /// Inline answers, comma-separated values in 1..=5.
    #[arg(long, value_delimiter = ',', requires = "importances")]
    pub answers: Option<Vec<i64>>,
    /// Inline importances: important|neutral|not_important (or i|n|ni).
    #[arg(long, value_delimiter = ',', requires = "answers")]
    pub importances: Option<Vec<String>>,
    /// Weight document; defaults to the deployed national table.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Rows to print. Every respondent tied at rank 1 is always shown.
    #[arg(long)]
    pub k: Option<usize>,
    /// Drop invalid roster rows instead of failing.
    #[arg(long)]
    pub lenient: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Audit config JSON (sections: audit, roster, roster_file, electorate).
    #[arg(long, env = "VAA_AUDIT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Base seed (u64), or `random` to draw one and print it. Required.
    #[arg(long)]
    pub seed: String,
    /// Roster CSV; without it a synthetic roster is generated.
    #[arg(long)]
    pub roster: Option<PathBuf>,
    /// Drop invalid roster rows instead of failing.
    #[arg(long)]
    pub lenient: bool,
    /// Batches [default: 100].
    #[arg(long)]
    pub batches: Option<usize>,
    /// Synthetic users per batch [default: 1000].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Questions per respondent [default: 20].
    #[arg(long, conflicts_with = "paper_defaults")]
    pub m: Option<usize>,
    /// Synthetic roster size [default: 779 candidates, 2022 national roster].
    #[arg(long, conflicts_with = "paper_defaults")]
    pub respondents: Option<usize>,
    /// Synthetic party count [default: 16].
    #[arg(long, conflicts_with = "paper_defaults")]
    pub parties: Option<usize>,
    /// Seed for the synthetic roster [default: the audit seed].
    #[arg(long)]
    pub roster_seed: Option<u64>,
    /// Baseline weight document [default: deployed national table].
    #[arg(long, conflicts_with = "paper_defaults")]
    pub weights: Option<PathBuf>,
    /// Weight increments to sweep [default: 1,2,3].
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<u32>>,
    /// Question-drop counts to sweep [default: 1,2,3,4,5].
    #[arg(long, value_delimiter = ',')]
    pub drops: Option<Vec<usize>>,
    /// Top-k list lengths [default: 3..=15].
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    /// Increment used for the top-k sweep [default: 3].
    #[arg(long)]
    pub topk_delta: Option<u32>,
    /// Party-level comparison [default: set].
    #[arg(long, value_enum)]
    pub party_mode: Option<PartyMode>,
    /// Worker threads [default: available parallelism]. Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory for report.csv, report.json, report_topk.csv.
    #[arg(long, default_value = "audit-out")]
    pub out_dir: PathBuf,
    /// Pin m=20, the national weight table, a 779/16 synthetic roster and
    /// the 2022 electorate constants.
    #[arg(long)]
    pub paper_defaults: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Respondents [default: 779, size of the 2022 national candidate roster].
    #[arg(long, default_value_t = 779)]
    pub respondents: usize,
    /// Parties [default: 16]. Equal to --respondents gives a party-level roster.
    #[arg(long, default_value_t = 16)]
    pub parties: usize,
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    #[arg(long)]
    pub seed: u64,
    /// Relative frequencies of answers 1..5 [default: uniform].
    #[arg(long, value_delimiter = ',')]
    pub answer_weights: Option<Vec<f64>>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImpactArgs {
    /// Change rate in percent; repeat or comma-separate for several.
    #[arg(long, value_delimiter = ',', required = true)]
    pub rate: Vec<f64>,
    /// Config JSON whose `electorate` section supplies the parameters.
    #[arg(long, env = "VAA_AUDIT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Eligible voters [default: 4269048, 2022 general election, Statistics Denmark].
    #[arg(long)]
    pub eligible_voters: Option<u64>,
    /// Turnout fraction [default: 0.8416, 2022 general election].
    #[arg(long)]
    pub turnout: Option<f64>,
    /// Fraction of voters using a VAA [default: 0.62, Danish National Election Study].
    #[arg(long)]
    pub vaa_usage: Option<f64>,
    /// Fraction of VAA users following the advice [default: 0.45, Danish National Election Study].
    #[arg(long)]
    pub follow_rate: Option<f64>,
    /// Votes per mandate, low end [default: 17000].
    #[arg(long)]
    pub votes_per_mandate_low: Option<u64>,
    /// Votes per mandate, high end [default: 20000].
    #[arg(long)]
    pub votes_per_mandate_high: Option<u64>,
    /// Ignore config files and use the 2022 electorate constants.
    #[arg(long, conflicts_with_all = ["eligible_voters", "turnout", "vaa_usage", "follow_rate", "votes_per_mandate_low", "votes_per_mandate_high", "config"])]
    pub paper_defaults: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}
