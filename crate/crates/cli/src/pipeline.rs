//! Subcommands wiring the core modules end to end.
//!
//! | subcommand    | outputs                                                                 |
//! |---------------|-------------------------------------------------------------------------|
//! | `ingest`      | `ingest_report.json`                                                    |
//! | `train`       | `model.txt`                                                             |
//! | `eval`        | `eval_report.json`                                                      |
//! | `classify`    | `stances.csv`                                                           |
//! | `groups`      | `user_groups.csv`, `group_report.csv`                                   |
//! | `event-study` | `car_curves.csv`, `events_detail.csv`                                   |
//! | `deletions`   | `deletion_histogram.csv`, `deletion_breakdown.csv`, `deleted_stance.csv`, `car_comparison.csv` |
//! | `report`      | all of the above that the inputs allow                                  |
//! | `synth`       | `tweets.jsonl`, `rates.csv`, `events.csv`, `audit.jsonl`, `ground_truth.json` |
//!
//! Subcommands that need stances use `--model` when given and otherwise train
//! a model on the gold-labelled tweets of the archive.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use forexpulse_core::eventstudy::{
    run_event_study, write_car_curves, write_event_details, ClassifiedTweet, StudyResult,
};
use forexpulse_core::ingest::{
    apply_deletion_audit, format_timestamp, parse_event_list, parse_rate_series, read_audit,
    read_tweet_archive, AuditOptions, ParseError,
};
use forexpulse_core::manipulation::{
    car_removal_comparison, deletion_breakdown, write_breakdown, write_car_comparison,
    write_deleted_stance, write_histogram,
};
use forexpulse_core::stance::{blocked_cv, train_two_plane, EvalReport, LabeledExample, PlaneScores};
use forexpulse_core::usergroups::{assign_groups, build_profiles, group_report, GroupFilter, UserProfile};
use forexpulse_core::{
    AnnouncementEvent, FeatureHasher, FeatureVector, RateSeries, Stance, TweetRecord, TwoPlaneModel,
    UserGroup,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{PipelineError, Result};
use crate::output::OutputDir;
use crate::synth::{generate_synthetic, SynthError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Train,
    Eval,
    Classify,
    Groups,
    EventStudy,
    Deletions,
    Report,
    Synth,
}

/// Runs one subcommand and returns the paths it wrote.
pub fn run_command(cfg: &PipelineConfig, command: Command) -> Result<Vec<PathBuf>> {
    check_inputs_exist(cfg)?;
    let mut out = OutputDir::create(&cfg.out)?;
    match command {
        Command::Synth => {
            let data = generate_synthetic(&cfg.synth, &cfg.rules).map_err(|e| match e {
                SynthError::Infeasible(_) => PipelineError::Validation(e.to_string()),
                SynthError::Inconsistent(_) => PipelineError::data("synth", e),
            })?;
            data.write_to(&mut out)?;
        }
        Command::Ingest => {
            if cfg.tweets.is_none() && cfg.rates.is_none() && cfg.events.is_none() {
                return Err(PipelineError::InputNotConfigured("tweets"));
            }
            let corpus = cfg.tweets.is_some().then(|| load_corpus(cfg)).transpose()?;
            let rates = cfg.rates.is_some().then(|| load_rates(cfg)).transpose()?;
            let events = cfg.events.is_some().then(|| load_events(cfg)).transpose()?;
            write_ingest_report(&mut out, corpus.as_ref(), rates.as_ref(), events.as_deref())?;
        }
        Command::Train => {
            let corpus = load_corpus(cfg)?;
            let model = train_on_gold(cfg, &corpus.tweets)?;
            out.write("model.txt", model.to_text().as_bytes())?;
        }
        Command::Eval => {
            let corpus = load_corpus(cfg)?;
            write_eval(cfg, &mut out, &corpus.tweets)?;
        }
        Command::Classify => {
            let corpus = load_corpus(cfg)?;
            let stances = Stances::obtain(cfg, &corpus.tweets)?;
            write_stances(&mut out, &corpus.tweets, &stances)?;
        }
        Command::Groups => {
            let corpus = load_corpus(cfg)?;
            let stances = Stances::obtain(cfg, &corpus.tweets)?;
            write_groups(cfg, &mut out, &corpus.tweets, &stances.labels)?;
        }
        Command::EventStudy => {
            let corpus = load_corpus(cfg)?;
            let rates = load_rates(cfg)?;
            let events = load_events(cfg)?;
            let stances = Stances::obtain(cfg, &corpus.tweets)?;
            let groups = segment(cfg, &corpus.tweets);
            let classified = classified_tweets(&corpus.tweets, &stances.labels, &groups);
            write_event_study(cfg, &mut out, &events, &rates, &classified)?;
        }
        Command::Deletions => {
            let corpus = load_corpus(cfg)?;
            let rates = load_rates(cfg)?;
            let events = load_events(cfg)?;
            let stances = Stances::obtain(cfg, &corpus.tweets)?;
            let groups = segment(cfg, &corpus.tweets);
            write_deletions(cfg, &mut out, &corpus.tweets, &stances.labels, &groups, &events, &rates)?;
        }
        Command::Report => {
            let corpus = load_corpus(cfg)?;
            let rates = cfg.rates.is_some().then(|| load_rates(cfg)).transpose()?;
            let events = cfg.events.is_some().then(|| load_events(cfg)).transpose()?;
            write_ingest_report(&mut out, Some(&corpus), rates.as_ref(), events.as_deref())?;
            let labeled = corpus.tweets.iter().filter(|t| t.gold_label.is_some()).count();
            if labeled >= cfg.folds {
                write_eval(cfg, &mut out, &corpus.tweets)?;
            } else {
                log::warn!("{labeled} labelled tweets, fewer than {} folds: skipping eval", cfg.folds);
            }
            let stances = Stances::obtain(cfg, &corpus.tweets)?;
            if stances.trained {
                out.write("model.txt", stances.model.to_text().as_bytes())?;
            }
            write_stances(&mut out, &corpus.tweets, &stances)?;
            let groups = write_groups(cfg, &mut out, &corpus.tweets, &stances.labels)?;
            if let (Some(rates), Some(events)) = (&rates, &events) {
                let classified = classified_tweets(&corpus.tweets, &stances.labels, &groups);
                write_event_study(cfg, &mut out, events, rates, &classified)?;
                write_deletions(cfg, &mut out, &corpus.tweets, &stances.labels, &groups, events, rates)?;
            } else {
                log::warn!("no --rates/--events: skipping event study and deletion comparison");
            }
        }
    }
    Ok(out.written().to_vec())
}

fn check_inputs_exist(cfg: &PipelineConfig) -> Result<()> {
    for (flag, path) in [
        ("tweets", &cfg.tweets),
        ("rates", &cfg.rates),
        ("events", &cfg.events),
        ("audit", &cfg.audit),
        ("model", &cfg.model),
    ] {
        if let Some(p) = path {
            if !p.is_file() {
                return Err(PipelineError::MissingInput { flag, path: p.clone() });
            }
        }
    }
    Ok(())
}

fn open(path: &Option<PathBuf>, flag: &'static str) -> Result<BufReader<File>> {
    let path = path.as_ref().ok_or(PipelineError::InputNotConfigured(flag))?;
    File::open(path)
        .map(BufReader::new)
        .map_err(|_| PipelineError::MissingInput { flag, path: path.clone() })
}

/// Parsed tweet archive with the deletion audit applied.
pub struct Corpus {
    pub tweets: Vec<TweetRecord>,
    pub parse_errors: Vec<ParseError>,
    pub audit_entries: Option<usize>,
    pub unmatched_audit: Vec<String>,
}

pub fn load_corpus(cfg: &PipelineConfig) -> Result<Corpus> {
    let archive = read_tweet_archive(open(&cfg.tweets, "tweets")?).map_err(|e| PipelineError::data("ingest", e))?;
    for e in &archive.errors {
        log::warn!("tweets line {}: {}", e.line, e.reason);
    }
    let mut corpus = Corpus {
        tweets: archive.records,
        parse_errors: archive.errors,
        audit_entries: None,
        unmatched_audit: Vec::new(),
    };
    if cfg.audit.is_some() {
        let entries = read_audit(open(&cfg.audit, "audit")?).map_err(|e| PipelineError::data("ingest", e))?;
        let options = AuditOptions {
            latest_wins: cfg.audit_latest_wins,
        };
        let outcome = apply_deletion_audit(std::mem::take(&mut corpus.tweets), &entries, options)
            .map_err(|e| PipelineError::data("ingest", e))?;
        corpus.tweets = outcome.tweets;
        corpus.unmatched_audit = outcome.unmatched;
        corpus.audit_entries = Some(entries.len());
    }
    Ok(corpus)
}

pub fn load_rates(cfg: &PipelineConfig) -> Result<RateSeries> {
    parse_rate_series(&cfg.pair, open(&cfg.rates, "rates")?).map_err(|e| PipelineError::data("ingest", e))
}

pub fn load_events(cfg: &PipelineConfig) -> Result<Vec<AnnouncementEvent>> {
    parse_event_list(open(&cfg.events, "events")?).map_err(|e| PipelineError::data("ingest", e))
}

#[derive(Serialize)]
struct TweetSummary {
    records: usize,
    parse_errors: Vec<ParseError>,
    authors: usize,
    labeled: usize,
    retweets: usize,
    deleted: usize,
    deleted_fraction: f64,
    first: Option<String>,
    last: Option<String>,
    audit_entries: Option<usize>,
    unmatched_audit_ids: Vec<String>,
}

#[derive(Serialize)]
struct RateSummary {
    pair: String,
    points: usize,
    first: Option<String>,
    last: Option<String>,
    /// Spacings longer than one minute (market closures, missing data).
    gaps: usize,
}

#[derive(Serialize)]
struct EventSummary {
    events: usize,
    by_source: BTreeMap<String, usize>,
    first: Option<String>,
    last: Option<String>,
}

#[derive(Serialize)]
struct IngestReport {
    tweets: Option<TweetSummary>,
    rates: Option<RateSummary>,
    events: Option<EventSummary>,
}

fn write_ingest_report(
    out: &mut OutputDir,
    corpus: Option<&Corpus>,
    rates: Option<&RateSeries>,
    events: Option<&[AnnouncementEvent]>,
) -> Result<()> {
    let tweets = corpus.map(|c| {
        let deleted = c.tweets.iter().filter(|t| t.deleted).count();
        let authors: std::collections::BTreeSet<&str> = c.tweets.iter().map(|t| t.author_id.as_str()).collect();
        TweetSummary {
            records: c.tweets.len(),
            parse_errors: c.parse_errors.clone(),
            authors: authors.len(),
            labeled: c.tweets.iter().filter(|t| t.gold_label.is_some()).count(),
            retweets: c.tweets.iter().filter(|t| t.is_retweet).count(),
            deleted,
            deleted_fraction: if c.tweets.is_empty() { 0.0 } else { deleted as f64 / c.tweets.len() as f64 },
            first: c.tweets.iter().map(|t| t.timestamp).min().map(format_timestamp),
            last: c.tweets.iter().map(|t| t.timestamp).max().map(format_timestamp),
            audit_entries: c.audit_entries,
            unmatched_audit_ids: c.unmatched_audit.clone(),
        }
    });
    let rates = rates.map(|r| RateSummary {
        pair: r.pair.clone(),
        points: r.len(),
        first: r.points().first().map(|p| format_timestamp(p.timestamp)),
        last: r.points().last().map(|p| format_timestamp(p.timestamp)),
        gaps: r
            .points()
            .windows(2)
            .filter(|w| (w[1].timestamp - w[0].timestamp).num_seconds() > 60)
            .count(),
    });
    let events = events.map(|evs| {
        let mut by_source = BTreeMap::new();
        for e in evs {
            *by_source.entry(e.source.as_str().to_string()).or_insert(0) += 1;
        }
        EventSummary {
            events: evs.len(),
            by_source,
            first: evs.first().map(|e| format_timestamp(e.timestamp)),
            last: evs.last().map(|e| format_timestamp(e.timestamp)),
        }
    });
    out.write_json("ingest_report.json", &IngestReport { tweets, rates, events })
}

fn featurize_all(hasher: &FeatureHasher, tweets: &[TweetRecord]) -> Vec<FeatureVector> {
    tweets.par_iter().map(|t| hasher.featurize(&t.text)).collect()
}

fn labeled_examples(hasher: &FeatureHasher, tweets: &[TweetRecord]) -> Vec<LabeledExample> {
    let labeled: Vec<&TweetRecord> = tweets.iter().filter(|t| t.gold_label.is_some()).collect();
    labeled
        .par_iter()
        .map(|t| LabeledExample {
            timestamp: t.timestamp,
            features: hasher.featurize(&t.text),
            stance: t.gold_label.expect("filtered"),
        })
        .collect()
}

fn hasher(dim: usize) -> Result<FeatureHasher> {
    FeatureHasher::new(dim).map_err(|e| PipelineError::Validation(e.to_string()))
}

fn train_on_gold(cfg: &PipelineConfig, tweets: &[TweetRecord]) -> Result<TwoPlaneModel> {
    let examples = labeled_examples(&hasher(cfg.dim)?, tweets);
    if examples.is_empty() {
        return Err(PipelineError::data(
            "stance",
            "no gold-labelled tweets to train on (and no --model given)",
        ));
    }
    train_two_plane(examples.iter().map(|e| (&e.features, e.stance)), cfg.params)
        .map_err(|e| PipelineError::data("stance", e))
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    dim: usize,
    labeled: usize,
    #[serde(flatten)]
    report: &'a EvalReport,
}

fn write_eval(cfg: &PipelineConfig, out: &mut OutputDir, tweets: &[TweetRecord]) -> Result<()> {
    let examples = labeled_examples(&hasher(cfg.dim)?, tweets);
    let report = blocked_cv(&examples, cfg.folds, cfg.params).map_err(|e| PipelineError::data("stance", e))?;
    out.write_json(
        "eval_report.json",
        &EvalOutput {
            dim: cfg.dim,
            labeled: examples.len(),
            report: &report,
        },
    )
}

/// Predicted stance of every tweet, in archive order.
pub struct Stances {
    pub model: TwoPlaneModel,
    pub trained: bool,
    pub scores: Vec<PlaneScores>,
    pub labels: Vec<Stance>,
}

impl Stances {
    pub fn obtain(cfg: &PipelineConfig, tweets: &[TweetRecord]) -> Result<Self> {
        let (model, trained) = match &cfg.model {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|_| PipelineError::MissingInput {
                    flag: "model",
                    path: path.clone(),
                })?;
                let model = TwoPlaneModel::from_text(&text).map_err(|e| PipelineError::data("stance", e))?;
                if model.dim != cfg.dim {
                    log::warn!("model dimension {} overrides configured dim {}", model.dim, cfg.dim);
                }
                (model, false)
            }
            None => (train_on_gold(cfg, tweets)?, true),
        };
        let features = featurize_all(&hasher(model.dim)?, tweets);
        let scores: Vec<PlaneScores> = features
            .par_iter()
            .map(|v| model.scores(v))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| PipelineError::data("stance", e))?;
        let labels = features
            .iter()
            .map(|v| model.classify(v).expect("dimension checked above"))
            .collect();
        Ok(Stances {
            model,
            trained,
            scores,
            labels,
        })
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("in-memory csv")
}

fn write_stances(out: &mut OutputDir, tweets: &[TweetRecord], stances: &Stances) -> Result<()> {
    let mut w = csv_writer();
    w.write_record(["id", "author_id", "timestamp", "stance", "buy_score", "sell_score", "gold_label"])
        .expect("in-memory csv");
    for ((t, s), label) in tweets.iter().zip(&stances.scores).zip(&stances.labels) {
        w.write_record([
            t.id.clone(),
            t.author_id.clone(),
            format_timestamp(t.timestamp),
            label.to_string(),
            s.buy.to_string(),
            s.sell.to_string(),
            t.gold_label.map(|g| g.to_string()).unwrap_or_default(),
        ])
        .expect("in-memory csv");
    }
    out.write("stances.csv", &finish(w))
}

fn profiles(cfg: &PipelineConfig, tweets: &[TweetRecord]) -> BTreeMap<String, UserProfile> {
    build_profiles(tweets, &cfg.rules)
}

pub fn segment(cfg: &PipelineConfig, tweets: &[TweetRecord]) -> BTreeMap<String, UserGroup> {
    assign_groups(&profiles(cfg, tweets), &cfg.rules)
}

fn write_groups(
    cfg: &PipelineConfig,
    out: &mut OutputDir,
    tweets: &[TweetRecord],
    stances: &[Stance],
) -> Result<BTreeMap<String, UserGroup>> {
    let profiles = profiles(cfg, tweets);
    let groups = assign_groups(&profiles, &cfg.rules);
    let mut w = csv_writer();
    w.write_record([
        "author_id",
        "group",
        "tweets",
        "days_active",
        "retweeted",
        "bot_pattern_tweets",
        "t_rate",
        "retweeted_ratio",
        "t_bot_rate",
    ])
    .expect("in-memory csv");
    for (author, p) in &profiles {
        w.write_record([
            author.clone(),
            groups[author].to_string(),
            p.tweets.to_string(),
            p.days_active.to_string(),
            p.retweeted.to_string(),
            p.bot_pattern_tweets.to_string(),
            p.t_rate().to_string(),
            p.retweeted_ratio().to_string(),
            p.t_bot_rate().to_string(),
        ])
        .expect("in-memory csv");
    }
    out.write("user_groups.csv", &finish(w))?;

    let report = group_report(&profiles, &groups, tweets, stances).map_err(|e| PipelineError::data("usergroups", e))?;
    let mut w = csv_writer();
    w.write_record([
        "group",
        "users",
        "user_share",
        "tweets",
        "tweet_share",
        "buy",
        "hold",
        "sell",
        "buy_share",
        "hold_share",
        "sell_share",
    ])
    .expect("in-memory csv");
    for g in &report.groups {
        w.write_record([
            g.group.to_string(),
            g.users.to_string(),
            g.user_share.to_string(),
            g.tweets.to_string(),
            g.tweet_share.to_string(),
            g.stance_counts[0].to_string(),
            g.stance_counts[1].to_string(),
            g.stance_counts[2].to_string(),
            g.stance_share[0].to_string(),
            g.stance_share[1].to_string(),
            g.stance_share[2].to_string(),
        ])
        .expect("in-memory csv");
    }
    out.write("group_report.csv", &finish(w))?;
    Ok(groups)
}

pub fn classified_tweets(
    tweets: &[TweetRecord],
    stances: &[Stance],
    groups: &BTreeMap<String, UserGroup>,
) -> Vec<ClassifiedTweet> {
    tweets
        .iter()
        .zip(stances)
        .map(|(t, &stance)| ClassifiedTweet {
            id: t.id.clone(),
            timestamp: t.timestamp,
            stance,
            group: groups[&t.author_id],
            deleted: t.deleted,
        })
        .collect()
}

fn write_event_study(
    cfg: &PipelineConfig,
    out: &mut OutputDir,
    events: &[AnnouncementEvent],
    rates: &RateSeries,
    tweets: &[ClassifiedTweet],
) -> Result<()> {
    let results: Vec<StudyResult> = cfg
        .group_filters()?
        .iter()
        .map(|f| run_event_study(events, rates, tweets, f, &cfg.study))
        .collect();
    for r in &results {
        let skipped = r.details.iter().filter(|d| d.skip_reason.is_some()).count();
        if skipped > 0 {
            log::warn!("group {}: {skipped} of {} events skipped", r.group, r.details.len());
        }
    }
    out.write("car_curves.csv", write_car_curves(&results).as_bytes())?;
    out.write("events_detail.csv", write_event_details(&results).as_bytes())
}

#[allow(clippy::too_many_arguments)]
fn write_deletions(
    cfg: &PipelineConfig,
    out: &mut OutputDir,
    tweets: &[TweetRecord],
    stances: &[Stance],
    groups: &BTreeMap<String, UserGroup>,
    events: &[AnnouncementEvent],
    rates: &RateSeries,
) -> Result<()> {
    let report = deletion_breakdown(tweets, groups, stances, &GroupFilter::all(), &cfg.forensics)
        .map_err(|e| PipelineError::data("manipulation", e))?;
    out.write("deletion_histogram.csv", write_histogram(&report.histogram).as_bytes())?;
    out.write("deletion_breakdown.csv", write_breakdown(&report.breakdown).as_bytes())?;
    out.write("deleted_stance.csv", write_deleted_stance(&report.deleted_stance).as_bytes())?;
    let classified = classified_tweets(tweets, stances, groups);
    let comparisons: Vec<_> = cfg
        .group_filters()?
        .iter()
        .map(|f| car_removal_comparison(events, rates, &classified, f, &cfg.study))
        .collect();
    out.write("car_comparison.csv", write_car_comparison(&comparisons).as_bytes())
}

/// Convenience for tests and scripts: the path a subcommand writes `name` to.
pub fn output_path(cfg: &PipelineConfig, name: &str) -> PathBuf {
    Path::new(&cfg.out).join(name)
}
