use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context};
use serde::Serialize;
use vaa_audit_core::engine::{Answer, Importance, QuestionMask, UserResponse};
use vaa_audit_core::impact::{estimate, ElectorateParameters};
use vaa_audit_core::io::{self, AuditConfigDocument, IngestMode, ReportPaths};
use vaa_audit_core::simulate::{AnswerDistribution, AuditReport, Level, SyntheticRosterSpec};
use vaa_audit_core::{
    generate_roster, rank_all, run_audit, Delta, PartyComparison, Roster, WeightMatrix,
};

use crate::args::{AuditArgs, Format, ImpactArgs, MatchArgs, PartyMode, SynthArgs};
use crate::CliError;

fn data<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Data(e.into())
}

fn ingest_mode(lenient: bool) -> IngestMode {
    if lenient {
        IngestMode::Lenient
    } else {
        IngestMode::Strict
    }
}

fn load_roster(path: &Path, m: usize, lenient: bool) -> Result<Roster, CliError> {
    let load = io::load_roster_path(path, m, ingest_mode(lenient))
        .with_context(|| format!("loading roster {}", path.display()))
        .map_err(data)?;
    for r in &load.rejected {
        eprintln!("skipped row {} ({}): {}", r.row, r.id, r.reason);
    }
    Ok(load.roster)
}

fn parse_importance(s: &str) -> Option<Importance> {
    match s.trim().to_ascii_lowercase().as_str() {
        "i" | "important" => Some(Importance::Important),
        "n" | "neutral" => Some(Importance::Neutral),
        "ni" | "not_important" | "not-important" => Some(Importance::NotImportant),
        _ => None,
    }
}

fn user_from_args(args: &MatchArgs) -> Result<UserResponse, CliError> {
    if let Some(path) = &args.user {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(data)?;
        return io::parse_user(&text).map_err(data);
    }
    let answers = args.answers.as_deref().unwrap_or_default();
    let importances = args.importances.as_deref().unwrap_or_default();
    let answers = answers
        .iter()
        .map(|&v| Answer::new(v))
        .collect::<Result<Vec<_>, _>>()
        .map_err(data)?;
    let importances = importances
        .iter()
        .map(|s| {
            parse_importance(s).ok_or_else(|| CliError::Usage(format!("unknown importance `{s}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    UserResponse::new(answers, importances).map_err(data)
}

fn load_weights(path: Option<&Path>) -> Result<WeightMatrix, CliError> {
    match path {
        Some(p) => io::load_weights_path(p)
            .with_context(|| format!("loading weights {}", p.display()))
            .map_err(data),
        None => Ok(io::default_weights()),
    }
}

#[derive(Serialize)]
struct MatchRow<'a> {
    rank: usize,
    id: &'a str,
    name: &'a str,
    party: &'a str,
    agreement_pct: u8,
}

pub fn cmd_match(args: MatchArgs) -> Result<(), CliError> {
    let roster = load_roster(&args.roster, args.m, args.lenient)?;
    let user = user_from_args(&args)?;
    if user.len() != args.m {
        return Err(data(anyhow!(
            "voter answered {} questions, roster has {}",
            user.len(),
            args.m
        )));
    }
    let weights = load_weights(args.weights.as_deref())?;
    let ranking = rank_all(
        &weights,
        &user,
        roster.respondents(),
        &QuestionMask::all(args.m),
    )
    .map_err(data)?;
    let top = ranking.top_set();
    let shown = args
        .k
        .unwrap_or(ranking.len())
        .max(top.len())
        .min(ranking.len());

    let mut rows = Vec::with_capacity(shown);
    let mut rank = 1;
    for (i, e) in ranking.entries()[..shown].iter().enumerate() {
        if i > 0 && e.agreement_pct != ranking.entries()[i - 1].agreement_pct {
            rank = i + 1;
        }
        let p = roster
            .get(&e.respondent_id)
            .expect("ranked ids come from the roster");
        rows.push(MatchRow {
            rank,
            id: &p.id,
            name: &p.name,
            party: &p.party,
            agreement_pct: e.agreement_pct,
        });
    }

    let mut out = std::io::stdout().lock();
    match args.format {
        Format::Text => {
            writeln!(
                out,
                "{:>4}  {:<12} {:<24} {:<12} {:>9}",
                "rank", "id", "name", "party", "agreement"
            )?;
            for r in &rows {
                writeln!(
                    out,
                    "{:>4}  {:<12} {:<24} {:<12} {:>8}%",
                    r.rank, r.id, r.name, r.party, r.agreement_pct
                )?;
            }
        }
        Format::Csv => {
            let mut w = csv_writer(&mut out);
            for r in &rows {
                w.serialize(r).map_err(data)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &rows).map_err(data)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

fn parse_seed(raw: &str) -> Result<u64, CliError> {
    if raw == "random" {
        let seed = rand::random::<u64>();
        eprintln!("seed: {seed}");
        Ok(seed)
    } else {
        raw.parse()
            .map_err(|_| CliError::Usage(format!("--seed must be a u64 or `random`, got `{raw}`")))
    }
}

fn deltas(values: &[u32]) -> Result<Vec<Delta>, CliError> {
    values
        .iter()
        .map(|&v| Delta::new(v).map_err(|e| CliError::Usage(format!("--deltas: {e}"))))
        .collect()
}

pub fn cmd_audit(args: AuditArgs) -> Result<(), CliError> {
    let seed = parse_seed(&args.seed)?;
    let mut doc = match &args.config {
        Some(path) => io::load_audit_config(path)
            .with_context(|| format!("loading config {}", path.display()))
            .map_err(data)?,
        None => AuditConfigDocument::default(),
    };
    if args.paper_defaults {
        let pinned = AuditConfigDocument::default();
        doc.audit.question_count = pinned.audit.question_count;
        doc.audit.baseline_weights = pinned.audit.baseline_weights;
        doc.roster.respondent_count = pinned.roster.respondent_count;
        doc.roster.party_count = pinned.roster.party_count;
        doc.roster.question_count = pinned.roster.question_count;
        doc.roster.answer_distribution = AnswerDistribution::Uniform;
        doc.electorate = pinned.electorate;
    }

    let audit = &mut doc.audit;
    audit.base_seed = seed;
    if let Some(v) = args.batches {
        audit.batches = v;
    }
    if let Some(v) = args.batch_size {
        audit.users_per_batch = v;
    }
    if let Some(v) = args.m {
        audit.question_count = v;
        doc.roster.question_count = v;
    }
    if let Some(v) = &args.deltas {
        audit.delta_sweep = deltas(v)?;
    }
    if let Some(v) = &args.drops {
        audit.drop_sweep = v.clone();
    }
    if let Some(v) = &args.ks {
        audit.k_sweep = v.clone();
    }
    if let Some(v) = args.topk_delta {
        audit.topk_delta =
            Delta::new(v).map_err(|e| CliError::Usage(format!("--topk-delta: {e}")))?;
    }
    if let Some(mode) = args.party_mode {
        audit.comparison_mode = match mode {
            PartyMode::Set => PartyComparison::SetEquality,
            PartyMode::Containment => PartyComparison::Containment,
        };
    }
    if let Some(p) = &args.weights {
        audit.baseline_weights = load_weights(Some(p))?;
    }
    if let Some(v) = args.respondents {
        doc.roster.respondent_count = v;
    }
    if let Some(v) = args.parties {
        doc.roster.party_count = v;
    }
    doc.roster.seed = args.roster_seed.unwrap_or(seed);
    doc.electorate.validate().map_err(data)?;

    let roster_file = args.roster.clone().or(doc.roster_file.clone());
    let (roster, note) = match &roster_file {
        Some(path) => {
            let roster = load_roster(path, doc.audit.question_count, args.lenient)?;
            let name = path.file_name().map_or_else(
                || path.display().to_string(),
                |n| n.to_string_lossy().into_owned(),
            );
            (roster, format!("roster file {name}"))
        }
        None => {
            doc.roster.question_count = doc.audit.question_count;
            let roster = generate_roster(&doc.roster).map_err(data)?;
            let note = format!(
                "synthetic roster ({} respondents, {} parties, roster seed {}, uniform answers \
                 unless configured): rates are qualitative and do not reproduce results on real \
                 candidate answers",
                doc.roster.respondent_count, doc.roster.party_count, doc.roster.seed
            );
            (roster, note)
        }
    };
    doc.audit.validate_sweeps(&roster).map_err(data)?;

    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = args.workers {
            if w == 0 {
                return Err(CliError::Usage("--workers must be positive".into()));
            }
            b = b.num_threads(w);
        }
        b.build().map_err(data)?
    };
    let mut report = pool
        .install(|| run_audit(&doc.audit, &roster))
        .map_err(data)?;
    report.provenance.notes.push(note);

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))
        .map_err(data)?;
    let paths = ReportPaths::in_dir(&args.out_dir);
    io::export_report(&report, &paths).map_err(data)?;

    let mut out = std::io::stdout().lock();
    match args.format {
        Format::Text => write!(out, "{}", summary_table(&report))?,
        Format::Csv => io::write_report_csv(&report, &mut out).map_err(data)?,
        Format::Json => write!(out, "{}", io::report_json(&report))?,
    }
    eprintln!(
        "wrote {}, {}, {}",
        paths.csv.display(),
        paths.json.display(),
        paths
            .topk_csv
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default()
    );
    Ok(())
}

fn summary_table(report: &AuditReport) -> String {
    let mut s = String::new();
    let p = &report.provenance;
    let _ = writeln!(
        s,
        "seed {}  config {}  roster {} ({} respondents, {} parties)",
        p.base_seed,
        &p.config_digest[..12],
        &p.roster_digest[..12],
        p.roster_size,
        p.party_count
    );
    for n in &p.notes {
        let _ = writeln!(s, "note: {n}");
    }
    let _ = writeln!(s, "{:<40} {:>16} {:>16}", "cell", "candidate %", "party %");
    for pair in report.cells.chunks(2) {
        let fmt = |c: &vaa_audit_core::simulate::CellSummary| {
            format!("{:6.2} ± {:5.2}", c.mean_change_pct, c.half_width)
        };
        let (cand, party) = match pair {
            [a, b] if a.level == Level::Candidate && b.level == Level::Party => (fmt(a), fmt(b)),
            _ => continue,
        };
        let _ = writeln!(
            s,
            "{:<40} {:>16} {:>16}",
            pair[0].perturbation.id(),
            cand,
            party
        );
    }
    if !report.topk.is_empty() {
        let _ = writeln!(s, "\n{:<40} {:>4} {:>16}", "top-k cell", "k", "mean rho");
        for t in &report.topk {
            let _ = writeln!(
                s,
                "{:<40} {:>4} {:>8.3} ± {:5.3}",
                t.perturbation.id(),
                t.k,
                t.mean_rho,
                t.half_width
            );
        }
    }
    s
}

pub fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let spec = SyntheticRosterSpec {
        respondent_count: args.respondents,
        party_count: args.parties,
        question_count: args.m,
        answer_distribution: match &args.answer_weights {
            None => AnswerDistribution::Uniform,
            Some(w) => AnswerDistribution::Empirical {
                weights: w
                    .as_slice()
                    .try_into()
                    .map_err(|_| CliError::Usage("--answer-weights needs 5 values".into()))?,
            },
        },
        seed: args.seed,
    };
    let roster = generate_roster(&spec).map_err(data)?;
    let mut bytes = Vec::new();
    io::write_roster(&roster, &mut bytes).map_err(data)?;
    match &args.out {
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile_in(dir)?;
            tmp.write_all(&bytes)?;
            tmp.persist(path)
                .with_context(|| format!("writing {}", path.display()))
                .map_err(data)?;
            eprintln!("wrote {} respondents to {}", roster.len(), path.display());
        }
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(())
}

fn tempfile_in(dir: &Path) -> Result<tempfile::NamedTempFile, CliError> {
    tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file in {}", dir.display()))
        .map_err(data)
}

pub fn cmd_impact(args: ImpactArgs) -> Result<(), CliError> {
    let mut params = match (&args.config, args.paper_defaults) {
        (Some(path), false) => {
            io::load_audit_config(path)
                .with_context(|| format!("loading config {}", path.display()))
                .map_err(data)?
                .electorate
        }
        _ => ElectorateParameters::default(),
    };
    if let Some(v) = args.eligible_voters {
        params.eligible_voters = v;
    }
    if let Some(v) = args.turnout {
        params.turnout = v;
    }
    if let Some(v) = args.vaa_usage {
        params.vaa_usage = v;
    }
    if let Some(v) = args.follow_rate {
        params.follow_rate = v;
    }
    if let Some(v) = args.votes_per_mandate_low {
        params.votes_per_mandate_low = v;
    }
    if let Some(v) = args.votes_per_mandate_high {
        params.votes_per_mandate_high = v;
    }
    params.validate().map_err(data)?;
    let estimates = args
        .rate
        .iter()
        .map(|&r| estimate(&params, r))
        .collect::<Result<Vec<_>, _>>()
        .map_err(data)?;

    let mut out = std::io::stdout().lock();
    match args.format {
        Format::Text => {
            writeln!(
                out,
                "cast votes {}  affected pool {}",
                params.cast_votes(),
                params.affected_pool()
            )?;
            writeln!(
                out,
                "{:>8} {:>12} {:>10} {:>10}",
                "rate %", "votes", "share %", "mandates"
            )?;
            for e in &estimates {
                writeln!(
                    out,
                    "{:>8.2} {:>12} {:>10.2} {:>5}-{}",
                    e.change_rate_pct,
                    e.votes_affected,
                    e.share_of_cast_pct,
                    e.mandates_low,
                    e.mandates_high
                )?;
            }
        }
        Format::Csv => {
            let mut w = csv_writer(&mut out);
            for e in &estimates {
                w.serialize(e).map_err(data)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &estimates).map_err(data)?;
            writeln!(out)?;
        }
    }
    Ok(())
}
