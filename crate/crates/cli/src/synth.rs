//! Seeded synthetic fixtures: a tweet corpus whose users fall into known
//! groups, a minute rate path with planted post-event abnormal moves, an
//! announcement list, a deletion audit with planted forensic scenarios, and a
//! ground-truth file describing every planted fact.
//!
//! Rate path: `p_j = base + slope·j + bump_j + ε_j` with `ε_j ~ N(0, (σ·base)²)`
//! i.i.d. per minute. After each event the bump rises linearly to
//! `drift_class · p_event` over `drift_minutes`, then falls back to zero over
//! the same span, so it has left the series before the next event.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use forexpulse_core::config::KeyValueFile;
use forexpulse_core::ingest::{
    event_id_for_position, format_timestamp, parse_timestamp, write_event_list,
};
use forexpulse_core::manipulation::edit_distance;
use forexpulse_core::usergroups::{assign_groups, build_profiles};
use forexpulse_core::{
    AnnouncementEvent, DeletionAuditEntry, EventSource, GroupRuleConfig, RatePoint, RateSeries,
    Stance, TweetRecord, UserGroup,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::error::Result as PipelineResult;
use crate::output::OutputDir;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),
    #[error("generated fixture failed its own check: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    #[serde(serialize_with = "ser_time")]
    pub start: DateTime<Utc>,
    pub warmup_days: i64,

    pub robots: usize,
    pub spammers: usize,
    pub companies: usize,
    pub individuals: usize,
    pub others: usize,
    pub robot_tweets: usize,
    pub robot_bot_rate: f64,
    pub spammer_tweets: usize,
    pub spammer_retweeted_ratio: f64,
    pub company_t_rate: f64,
    pub company_retweeted_ratio: f64,
    pub individual_t_rate: f64,
    pub individual_retweeted_ratio: f64,
    pub other_tweets: usize,
    pub other_days: i64,
    pub labeled_fraction: f64,

    pub events: usize,
    pub event_spacing_minutes: i64,
    pub event_polar_tweets: usize,
    pub event_hold_tweets: usize,
    pub drift_minutes: usize,
    pub drift_buy: f64,
    pub drift_hold: f64,
    pub drift_sell: f64,
    pub noise_sigma: f64,
    pub base_price: f64,
    pub baseline_slope: f64,

    pub repost_clusters: usize,
    pub repost_copies: usize,
    pub typos: usize,
    pub retweets: usize,
    pub recommendations: usize,
    pub other_deletions: usize,
}

fn ser_time<S: serde::Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_timestamp(*t))
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 42,
            start: parse_timestamp("2014-01-06T00:00:00Z").expect("valid literal"),
            warmup_days: 31,
            robots: 2,
            spammers: 1,
            companies: 4,
            individuals: 6,
            others: 5,
            robot_tweets: 60,
            robot_bot_rate: 0.9,
            spammer_tweets: 1100,
            spammer_retweeted_ratio: 0.0,
            company_t_rate: 1.0,
            company_retweeted_ratio: 0.5,
            individual_t_rate: 0.3,
            individual_retweeted_ratio: 0.15,
            other_tweets: 5,
            other_days: 10,
            labeled_fraction: 1.0,
            events: 30,
            event_spacing_minutes: 3 * 1440,
            event_polar_tweets: 3,
            event_hold_tweets: 1,
            drift_minutes: 1440,
            drift_buy: 0.001,
            drift_hold: 0.0,
            drift_sell: -0.001,
            noise_sigma: 0.0002,
            base_price: 1.10,
            baseline_slope: 1e-7,
            repost_clusters: 4,
            repost_copies: 3,
            typos: 5,
            retweets: 3,
            recommendations: 6,
            other_deletions: 7,
        }
    }
}

macro_rules! spec_fields {
    ($m:ident) => {
        $m!(seed, warmup_days, robots, spammers, companies, individuals, others, robot_tweets,
            robot_bot_rate, spammer_tweets, spammer_retweeted_ratio, company_t_rate,
            company_retweeted_ratio, individual_t_rate, individual_retweeted_ratio, other_tweets,
            other_days, labeled_fraction, events, event_spacing_minutes, event_polar_tweets,
            event_hold_tweets, drift_minutes, drift_buy, drift_hold, drift_sell, noise_sigma,
            base_price, baseline_slope, repost_clusters, repost_copies, typos, retweets,
            recommendations, other_deletions)
    };
}

impl SyntheticSpec {
    /// Keys accepted in the `[synth]` config section.
    pub fn keys() -> Vec<&'static str> {
        macro_rules! names {
            ($($f:ident),*) => { vec!["start", $(stringify!($f)),*] };
        }
        spec_fields!(names)
    }

    /// Overrides fields from the `[synth]` section of a config file.
    pub fn apply_kv(&mut self, file: &KeyValueFile) -> Result<(), String> {
        macro_rules! take {
            ($($f:ident),*) => {
                $(
                    if let Some(v) = file.parse_value("synth", stringify!($f)).map_err(|e| e.to_string())? {
                        self.$f = v;
                    }
                )*
            };
        }
        spec_fields!(take);
        if let Some(raw) = file.get("synth", "start") {
            self.start = parse_timestamp(raw).map_err(|e| format!("synth.start: {e}"))?;
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::from("[synth]\n");
        out.push_str(&format!("start = {}\n", format_timestamp(self.start)));
        macro_rules! render {
            ($($f:ident),*) => {
                $( out.push_str(&format!("{} = {}\n", stringify!($f), self.$f)); )*
            };
        }
        spec_fields!(render);
        out
    }

    fn end_of_timeline(&self) -> DateTime<Utc> {
        let first = self.first_event();
        let last = first + Duration::minutes(self.event_spacing_minutes * self.events.saturating_sub(1) as i64);
        let tail = if self.events == 0 {
            Duration::days(1)
        } else {
            Duration::minutes(self.event_spacing_minutes) + Duration::days(1)
        };
        last + tail
    }

    fn first_event(&self) -> DateTime<Utc> {
        self.start + Duration::days(self.warmup_days)
    }

    /// Calendar days spanned by the fixture (inclusive).
    pub fn timeline_days(&self) -> i64 {
        (self.end_of_timeline().date_naive() - self.start.date_naive()).num_days() + 1
    }

    /// Checks that every requested user can actually meet its group's rule
    /// under `rules`, and that the event and deletion plans fit the timeline.
    pub fn validate(&self, rules: &GroupRuleConfig) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Infeasible(m));
        let frac = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
        if self.start.timestamp() % 60 != 0 {
            return bad("start must be minute-aligned".into());
        }
        if self.robots > 0 && !(frac(self.robot_bot_rate) && self.robot_bot_rate > rules.bot_rate) {
            return bad(format!(
                "robot_bot_rate {} must be in ({}, 1]",
                self.robot_bot_rate, rules.bot_rate
            ));
        }
        if self.spammers > 0 {
            if self.spammer_tweets as u64 <= rules.spam_tweets {
                return bad(format!(
                    "spammer_tweets {} must exceed {}",
                    self.spammer_tweets, rules.spam_tweets
                ));
            }
            if !(frac(self.spammer_retweeted_ratio)
                && self.spammer_retweeted_ratio < rules.spam_retweeted_ratio)
            {
                return bad(format!(
                    "spammer_retweeted_ratio {} must be in [0, {})",
                    self.spammer_retweeted_ratio, rules.spam_retweeted_ratio
                ));
            }
        }
        let days = self.timeline_days();
        if self.companies > 0 {
            if days as u64 <= rules.company_days + 1 {
                return bad(format!("timeline of {days} days too short for company users"));
            }
            if !(self.company_t_rate.is_finite() && self.company_t_rate > rules.company_t_rate) {
                return bad(format!(
                    "company_t_rate {} must exceed {}",
                    self.company_t_rate, rules.company_t_rate
                ));
            }
            if !(frac(self.company_retweeted_ratio)
                && self.company_retweeted_ratio > rules.company_retweeted_ratio)
            {
                return bad(format!(
                    "company_retweeted_ratio {} must be in ({}, 1]",
                    self.company_retweeted_ratio, rules.company_retweeted_ratio
                ));
            }
        }
        if self.individuals > 0 {
            if days as u64 <= rules.individual_days + 1 {
                return bad(format!("timeline of {days} days too short for individual users"));
            }
            if !(self.individual_t_rate.is_finite() && self.individual_t_rate > 0.0) {
                return bad("individual_t_rate must be positive".into());
            }
            if !(frac(self.individual_retweeted_ratio)
                && self.individual_retweeted_ratio > rules.individual_retweeted_ratio
                && self.individual_retweeted_ratio <= rules.company_retweeted_ratio)
            {
                return bad(format!(
                    "individual_retweeted_ratio {} must be in ({}, {}] so the user is not a company",
                    self.individual_retweeted_ratio,
                    rules.individual_retweeted_ratio,
                    rules.company_retweeted_ratio
                ));
            }
        }
        if self.others > 0 {
            if self.other_tweets == 0 || self.other_tweets as u64 > rules.spam_tweets {
                return bad(format!("other_tweets must be in [1, {}]", rules.spam_tweets));
            }
            if self.other_days < 1
                || self.other_days as u64 > rules.individual_days.min(rules.company_days)
                || self.other_days > days
            {
                return bad(format!(
                    "other_days must be in [1, {}] and fit the timeline",
                    rules.individual_days.min(rules.company_days)
                ));
            }
        }
        if !frac(self.labeled_fraction) {
            return bad("labeled_fraction must be in [0, 1]".into());
        }
        if self.events > 0 {
            if self.drift_minutes == 0 {
                return bad("drift_minutes must be at least 1".into());
            }
            if self.event_spacing_minutes < 2 * self.drift_minutes as i64 + 60 {
                return bad(format!(
                    "event_spacing_minutes {} must be at least 2·drift_minutes + 60",
                    self.event_spacing_minutes
                ));
            }
            if self.event_polar_tweets < 2 {
                return bad("event_polar_tweets must be at least 2".into());
            }
            if self.robots + self.companies + self.individuals == 0 {
                return bad("events need robot, company or individual users to tweet about them".into());
            }
        }
        if self.warmup_days < 1 {
            return bad("warmup_days must be at least 1".into());
        }
        for (name, d) in [("drift_buy", self.drift_buy), ("drift_hold", self.drift_hold), ("drift_sell", self.drift_sell)] {
            if !(d.is_finite() && d.abs() < 0.5) {
                return bad(format!("{name} must be finite with |drift| < 0.5"));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0 && self.noise_sigma < 0.01) {
            return bad("noise_sigma must be in [0, 0.01)".into());
        }
        let minutes = (self.end_of_timeline() - self.start).num_minutes() as f64;
        let lowest = self.base_price + (self.baseline_slope * minutes).min(0.0);
        if !(self.base_price.is_finite() && self.baseline_slope.is_finite() && lowest > 0.1 * self.base_price) {
            return bad("base_price and baseline_slope must keep prices well above zero".into());
        }
        let deletions =
            self.repost_clusters + self.typos + self.retweets + self.recommendations + self.other_deletions;
        if deletions > 0 && self.companies + self.individuals == 0 {
            return bad("deletion scenarios need company or individual users".into());
        }
        if self.repost_clusters > 0 && self.repost_copies < 2 {
            return bad("repost_copies must be at least 2".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventTruth {
    pub event_id: String,
    pub timestamp: String,
    pub source: EventSource,
    pub class: Stance,
    pub drift: f64,
    /// CAR at lag `drift_minutes − 1` of the noise-free path with the trend removed exactly.
    pub expected_final_car: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepostTruth {
    pub author_id: String,
    pub text: String,
    pub tweet_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypoTruth {
    pub deleted_id: String,
    pub replacement_id: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DeletionTruth {
    pub repost_clusters: Vec<RepostTruth>,
    pub typos: Vec<TypoTruth>,
    pub retweets: Vec<String>,
    pub recommendations: Vec<String>,
    pub other: Vec<String>,
    pub total_deleted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub spec: SyntheticSpec,
    pub tweets: usize,
    pub labeled: usize,
    pub rate_points: usize,
    /// author id -> group token
    pub users: BTreeMap<String, String>,
    pub planted_drift: BTreeMap<String, f64>,
    pub events: Vec<EventTruth>,
    pub deletions: DeletionTruth,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub tweets: Vec<TweetRecord>,
    pub rates: RateSeries,
    pub events: Vec<AnnouncementEvent>,
    pub audit: Vec<DeletionAuditEntry>,
    pub truth: GroundTruth,
}

impl SyntheticData {
    pub fn tweets_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.tweets {
            out.push_str(&t.to_json_line());
            out.push('\n');
        }
        out
    }

    pub fn audit_jsonl(&self) -> String {
        let mut out = String::new();
        for a in &self.audit {
            out.push_str(&a.to_json_line());
            out.push('\n');
        }
        out
    }

    /// Group of each author as planted.
    pub fn groups(&self) -> BTreeMap<String, UserGroup> {
        self.truth
            .users
            .iter()
            .map(|(a, g)| (a.clone(), g.parse().expect("tokens written by the generator")))
            .collect()
    }

    pub fn write_to(&self, out: &mut OutputDir) -> PipelineResult<()> {
        out.write("tweets.jsonl", self.tweets_jsonl().as_bytes())?;
        out.write("rates.csv", self.rates.to_csv().as_bytes())?;
        out.write("events.csv", write_event_list(&self.events).as_bytes())?;
        out.write("audit.jsonl", self.audit_jsonl().as_bytes())?;
        out.write_json("ground_truth.json", &self.truth)
    }

    pub fn write_dir(&self, dir: &Path) -> PipelineResult<()> {
        let mut out = OutputDir::create(dir)?;
        self.write_to(&mut out)
    }
}

const BUY_TEXTS: [&str; 4] = [
    "EURUSD bullish breakout, going long above {p}",
    "Buying EUR here, target {p}",
    "Long EURUSD from {p}, stop under {q}",
    "EUR looks strong, bulls in control at {p}",
];
const SELL_TEXTS: [&str; 4] = [
    "EURUSD bearish breakdown, going short below {p}",
    "Selling EUR here, target {p}",
    "Short EURUSD from {p}, stop over {q}",
    "EUR looks weak, bears in control at {p}",
];
const HOLD_TEXTS: [&str; 4] = [
    "Waiting for the data before trading EURUSD at {p}",
    "Range day on EURUSD around {p}, staying flat",
    "No clear direction in EURUSD near {p}, sitting out",
    "EURUSD quiet ahead of the announcement, {p} area",
];
const ROBOT_BUY: [&str; 4] = ["Closed Buy", "Opened Buy", "Buy stop", "Buy limit"];
const ROBOT_SELL: [&str; 4] = ["Closed Sell", "Opened Sell", "Sell stop", "Sell limit"];
const RECOMMEND_BUY: [&str; 2] = ["We are bullish on $EURUSD above {p}", "Time to buy EURUSD at {p}"];
const RECOMMEND_SELL: [&str; 2] = ["We are bearish on $EURUSD under {p}", "Sell EURUSD into resistance at {p}"];
const NEUTRAL_TEXTS: [&str; 4] = [
    "Great discussion at the trading meetup tonight",
    "Thanks for all the follows this week",
    "Coffee first, charts later",
    "Reading about monetary policy on the train",
];
const ADVERT_TEXTS: [&str; 3] = [
    "Free webinar tonight, grab your seat now",
    "Join our VIP channel for daily signals",
    "New course out, early bird price ends soon",
];
const SOURCES: [(EventSource, &str); 6] = [
    (EventSource::Ecb, "ECB monetary policy decision"),
    (EventSource::Ecb, "ECB press conference, Q&A session"),
    (EventSource::Fed, "FOMC statement"),
    (EventSource::Fed, "Fed chair testimony, semi-annual report"),
    (EventSource::Gov, "Eurogroup meeting statement"),
    (EventSource::Gov, "German government budget announcement"),
];
const TOKEN_LETTERS: &[u8] = b"bcdfghjkmnpqrstvwxz";

#[derive(Debug, Clone)]
struct Draft {
    author: usize,
    /// seconds since the fixture start
    t: i64,
    text: String,
    stance: Stance,
    retweet_of: Option<usize>,
    deleted: bool,
    retweeted: bool,
}

struct Gen {
    rng: ChaCha8Rng,
    drafts: Vec<Draft>,
    /// half-open second intervals that background tweets must avoid
    blocked: Vec<(i64, i64)>,
    tokens: BTreeSet<String>,
}

impl Gen {
    fn price_text(&mut self, template: &str) -> String {
        let p = 1.05 + self.rng.random_range(0..2000) as f64 / 10000.0;
        let q = p + self.rng.random_range(-60..60) as f64 / 10000.0;
        template.replace("{p}", &format!("{p:.4}")).replace("{q}", &format!("{q:.4}"))
    }

    fn stance_text(&mut self, stance: Stance) -> String {
        let pool = match stance {
            Stance::Buy => &BUY_TEXTS,
            Stance::Sell => &SELL_TEXTS,
            Stance::Hold => &HOLD_TEXTS,
        };
        let t = *pool.choose(&mut self.rng).expect("nonempty");
        self.price_text(t)
    }

    fn robot_text(&mut self, stance: Stance) -> String {
        let pool = if stance == Stance::Buy { &ROBOT_BUY } else { &ROBOT_SELL };
        let pattern = *pool.choose(&mut self.rng).expect("nonempty");
        let lots = self.rng.random_range(1..50) as f64 / 10.0;
        let p = self.price_text("{p}");
        format!("{pattern} {lots:.1} lots EURUSD {p}")
    }

    /// A fresh consonant-only token, so it can never be a trading word.
    fn token(&mut self) -> String {
        loop {
            let s: String = (0..10)
                .map(|_| TOKEN_LETTERS[self.rng.random_range(0..TOKEN_LETTERS.len())] as char)
                .collect();
            if self.tokens.insert(s.clone()) {
                return s;
            }
        }
    }

    fn is_blocked(&self, lo: i64, hi: i64) -> bool {
        self.blocked.iter().any(|&(a, b)| lo < b && a < hi)
    }

    /// A second in `[lo, hi)` whose `[t, t + len)` avoids blocked intervals.
    fn free_time(&mut self, lo: i64, hi: i64, len: i64) -> Result<i64, SynthError> {
        for _ in 0..10_000 {
            let t = self.rng.random_range(lo..hi.max(lo + 1));
            if !self.is_blocked(t, t + len) {
                return Ok(t);
            }
        }
        Err(SynthError::Infeasible(format!(
            "no free time slot between {lo}s and {hi}s; reduce event density"
        )))
    }

    fn push(&mut self, author: usize, t: i64, text: String, stance: Stance) -> usize {
        self.drafts.push(Draft {
            author,
            t,
            text,
            stance,
            retweet_of: None,
            deleted: false,
            retweeted: false,
        });
        self.drafts.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Robot,
    Spammer,
    Company,
    Individual,
    Other,
}

impl Role {
    fn group(self) -> UserGroup {
        match self {
            Role::Robot => UserGroup::TradingRobot,
            Role::Spammer => UserGroup::Spammer,
            Role::Company => UserGroup::TradingCompany,
            Role::Individual => UserGroup::IndividualTrader,
            Role::Other => UserGroup::Other,
        }
    }
}

fn drift_for(spec: &SyntheticSpec, class: Stance) -> f64 {
    match class {
        Stance::Buy => spec.drift_buy,
        Stance::Hold => spec.drift_hold,
        Stance::Sell => spec.drift_sell,
    }
}

/// Generates the fixture; identical `spec` gives bit-identical output.
pub fn generate_synthetic(spec: &SyntheticSpec, rules: &GroupRuleConfig) -> Result<SyntheticData, SynthError> {
    spec.validate(rules)?;
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        drafts: Vec::new(),
        blocked: Vec::new(),
        tokens: BTreeSet::new(),
    };
    let end = spec.end_of_timeline();
    let horizon_s = (end - spec.start).num_seconds();
    const DAY: i64 = 86_400;

    // Users.
    let mut roles: Vec<Role> = Vec::new();
    for (role, n) in [
        (Role::Robot, spec.robots),
        (Role::Spammer, spec.spammers),
        (Role::Company, spec.companies),
        (Role::Individual, spec.individuals),
        (Role::Other, spec.others),
    ] {
        roles.extend(std::iter::repeat_n(role, n));
    }
    let author_ids: Vec<String> = (0..roles.len()).map(|i| format!("u{:03}", i + 1)).collect();
    let members = |role: Role| -> Vec<usize> { (0..roles.len()).filter(|&i| roles[i] == role).collect() };

    // Events: classes balanced then shuffled, times jittered inside their slot.
    let mut classes: Vec<Stance> = (0..spec.events)
        .map(|i| [Stance::Buy, Stance::Hold, Stance::Sell][i % 3])
        .collect();
    classes.shuffle(&mut g.rng);
    let first_event_s = (spec.first_event() - spec.start).num_seconds();
    let jitter_max = spec.event_spacing_minutes - 2 * spec.drift_minutes as i64 - 60;
    let mut event_times: Vec<i64> = Vec::with_capacity(spec.events);
    let mut event_sources = Vec::with_capacity(spec.events);
    for e in 0..spec.events {
        let jitter = g.rng.random_range(0..=jitter_max.max(0));
        let t = first_event_s + 60 * (e as i64 * spec.event_spacing_minutes + jitter);
        event_times.push(t);
        g.blocked.push((t, t + 3600));
        event_sources.push(*SOURCES.choose(&mut g.rng).expect("nonempty"));
    }

    // Event-window tweets from every tweeting group.
    for (e, &class) in classes.iter().enumerate() {
        let t0 = event_times[e];
        for role in [Role::Robot, Role::Company, Role::Individual] {
            let users = members(role);
            if users.is_empty() {
                continue;
            }
            let mut stances: Vec<Stance> = match class {
                Stance::Buy | Stance::Sell => vec![class; spec.event_polar_tweets],
                Stance::Hold => {
                    let half = spec.event_polar_tweets / 2;
                    [vec![Stance::Buy; half], vec![Stance::Sell; half]].concat()
                }
            };
            if role != Role::Robot {
                stances.extend(std::iter::repeat_n(Stance::Hold, spec.event_hold_tweets));
            }
            for stance in stances {
                let author = *users.choose(&mut g.rng).expect("nonempty");
                let t = t0 + g.rng.random_range(0..3540);
                let text = if role == Role::Robot { g.robot_text(stance) } else { g.stance_text(stance) };
                g.push(author, t, text, stance);
            }
        }
    }

    // Deletion scenarios, assigned round-robin to companies and individuals.
    let deleters: Vec<usize> = members(Role::Company)
        .into_iter()
        .chain(members(Role::Individual))
        .collect();
    let mut next_deleter = 0usize;
    let mut pick_deleter = || {
        let a = deleters[next_deleter % deleters.len()];
        next_deleter += 1;
        a
    };
    let body_lo = DAY;
    let body_hi = horizon_s - DAY;
    let mut planted_typos: Vec<(usize, usize)> = Vec::new();
    for _ in 0..spec.typos {
        let author = pick_deleter();
        let t = g.free_time(body_lo, body_hi, 600)?;
        g.blocked.push((t, t + 600));
        let stance = [Stance::Buy, Stance::Hold, Stance::Sell][g.rng.random_range(0..3)];
        let body = g.stance_text(stance);
        let token = g.token();
        let correct = format!("{body} {token}");
        let typo = delete_two_chars(&mut g.rng, &correct, body.chars().count());
        let d = g.push(author, t, typo, stance);
        g.drafts[d].deleted = true;
        let delay = g.rng.random_range(60..300);
        let r = g.push(author, t + delay, correct, stance);
        planted_typos.push((d, r));
    }
    let mut planted_reposts: Vec<(usize, Vec<usize>)> = Vec::new();
    for _ in 0..spec.repost_clusters {
        let author = pick_deleter();
        let base = *ADVERT_TEXTS.choose(&mut g.rng).expect("nonempty");
        let text = format!("{base} {}", g.token());
        let mut times: Vec<i64> = (0..=spec.repost_copies)
            .map(|_| g.free_time(body_lo, body_hi, 1))
            .collect::<Result<_, _>>()?;
        times.sort_unstable();
        let mut ids = Vec::new();
        for (i, &t) in times.iter().enumerate() {
            let d = g.push(author, t, text.clone(), Stance::Hold);
            // The last copy is the one left standing.
            if i < spec.repost_copies {
                g.drafts[d].deleted = true;
                ids.push(d);
            }
        }
        planted_reposts.push((author, ids));
    }
    let mut planted_retweets = Vec::new();
    for _ in 0..spec.retweets {
        let author = pick_deleter();
        let others: Vec<usize> = deleters.iter().copied().filter(|&u| u != author).collect();
        let original_author = *others.choose(&mut g.rng).unwrap_or(&author);
        let stance = [Stance::Buy, Stance::Hold, Stance::Sell][g.rng.random_range(0..3)];
        let body = format!("{} {}", g.stance_text(stance), g.token());
        let t_orig = g.free_time(body_lo, body_hi - DAY, 1)?;
        let orig = g.push(original_author, t_orig, body.clone(), stance);
        let t_rt = g.free_time(t_orig + 60, t_orig + DAY, 1)?;
        let text = format!("RT @{}: {body}", author_ids[original_author]);
        let rt = g.push(author, t_rt, text, stance);
        g.drafts[rt].retweet_of = Some(orig);
        g.drafts[rt].deleted = true;
        planted_retweets.push(rt);
    }
    let mut planted_recs = Vec::new();
    for _ in 0..spec.recommendations {
        let author = pick_deleter();
        let (stance, pool) = if g.rng.random_bool(0.5) {
            (Stance::Buy, &RECOMMEND_BUY)
        } else {
            (Stance::Sell, &RECOMMEND_SELL)
        };
        let template = *pool.choose(&mut g.rng).expect("nonempty");
        let text = format!("{} {}", g.price_text(template), g.token());
        let t = g.free_time(body_lo, body_hi, 1)?;
        let d = g.push(author, t, text, stance);
        g.drafts[d].deleted = true;
        planted_recs.push(d);
    }
    let mut planted_other = Vec::new();
    for _ in 0..spec.other_deletions {
        let author = pick_deleter();
        let base = *NEUTRAL_TEXTS.choose(&mut g.rng).expect("nonempty");
        let text = format!("{base} {}", g.token());
        let t = g.free_time(body_lo, body_hi, 1)?;
        let d = g.push(author, t, text, Stance::Hold);
        g.drafts[d].deleted = true;
        planted_other.push(d);
    }

    // Background tweets so each user meets its group's profile.
    let total_days = spec.timeline_days() as f64;
    for (u, &role) in roles.iter().enumerate() {
        let fixed = g.drafts.iter().filter(|d| d.author == u).count();
        match role {
            Role::Robot => {
                let r = spec.robot_bot_rate;
                let mut n = spec.robot_tweets.max(fixed).max(1);
                let mut plain = ((n as f64) * (1.0 - r)).floor() as usize;
                if fixed > n - plain {
                    n = ((fixed as f64) / r).ceil() as usize;
                    plain = ((n as f64) * (1.0 - r)).floor() as usize;
                }
                let bots = n - plain - fixed.min(n - plain);
                for i in 0..bots + plain {
                    let t = pinned_time(&mut g, i, 0, horizon_s)?;
                    if i < bots {
                        let stance = if g.rng.random_bool(0.5) { Stance::Buy } else { Stance::Sell };
                        let text = g.robot_text(stance);
                        g.push(u, t, text, stance);
                    } else {
                        let text = format!("Signal scanner refreshed, next run in {} minutes", g.rng.random_range(5..60));
                        g.push(u, t, text, Stance::Hold);
                    }
                }
            }
            Role::Spammer => {
                for i in 0..spec.spammer_tweets.saturating_sub(fixed) {
                    let t = pinned_time(&mut g, i, 0, horizon_s)?;
                    let text = format!("Make money fast with our forex signals, join today {}", g.rng.random_range(100..999));
                    g.push(u, t, text, Stance::Hold);
                }
            }
            Role::Company | Role::Individual => {
                let rate = if role == Role::Company { spec.company_t_rate } else { spec.individual_t_rate };
                let n = ((rate * total_days).ceil() as usize + 1).max(fixed + 2);
                for i in 0..n - fixed {
                    let t = pinned_time(&mut g, i, 0, horizon_s)?;
                    let stance = [Stance::Buy, Stance::Hold, Stance::Sell][g.rng.random_range(0..3)];
                    let text = g.stance_text(stance);
                    g.push(u, t, text, stance);
                }
            }
            Role::Other => {
                let span_days = spec.other_days;
                let max_start = (spec.timeline_days() - span_days).max(0);
                let day0 = g.rng.random_range(0..=max_start);
                let lo = day0 * DAY;
                let hi = ((day0 + span_days) * DAY).min(horizon_s);
                for i in 0..spec.other_tweets {
                    let t = pinned_time(&mut g, i, lo, hi)?;
                    let base = *NEUTRAL_TEXTS.choose(&mut g.rng).expect("nonempty");
                    let text = format!("{base} #{}", g.rng.random_range(1..99));
                    g.push(u, t, text, Stance::Hold);
                }
            }
        }
    }

    // Retweeted flags: an exact share of each user's tweets.
    for (u, &role) in roles.iter().enumerate() {
        let ratio = match role {
            Role::Company => spec.company_retweeted_ratio,
            Role::Individual => spec.individual_retweeted_ratio,
            Role::Spammer => spec.spammer_retweeted_ratio,
            Role::Robot | Role::Other => 0.0,
        };
        let mut own: Vec<usize> = (0..g.drafts.len()).filter(|&i| g.drafts[i].author == u).collect();
        let k = match role {
            Role::Spammer => (ratio * own.len() as f64).floor() as usize,
            _ => (ratio * own.len() as f64).ceil() as usize,
        };
        own.shuffle(&mut g.rng);
        for &i in own.iter().take(k) {
            g.drafts[i].retweeted = true;
        }
    }

    // Order by time and assign ids.
    let mut order: Vec<usize> = (0..g.drafts.len()).collect();
    order.sort_by_key(|&i| (g.drafts[i].t, i));
    let mut id_of = vec![String::new(); g.drafts.len()];
    for (pos, &i) in order.iter().enumerate() {
        id_of[i] = format!("t{:07}", pos + 1);
    }
    let at = |s: i64| spec.start + Duration::seconds(s);
    let mut tweets = Vec::with_capacity(order.len());
    for &i in &order {
        let d = &g.drafts[i];
        let labeled = spec.labeled_fraction >= 1.0 || g.rng.random::<f64>() < spec.labeled_fraction;
        tweets.push(TweetRecord {
            id: id_of[i].clone(),
            author_id: author_ids[d.author].clone(),
            timestamp: at(d.t),
            text: d.text.clone(),
            is_retweet: d.retweet_of.is_some(),
            retweet_of: d.retweet_of.map(|o| id_of[o].clone()),
            retweet_count: if d.retweeted { g.rng.random_range(1..=40) } else { 0 },
            gold_label: labeled.then_some(d.stance),
            deleted: false,
            audit_time: None,
        });
    }
    let audit_time = end + Duration::days(7);
    let audit: Vec<DeletionAuditEntry> = order
        .iter()
        .map(|&i| DeletionAuditEntry {
            tweet_id: id_of[i].clone(),
            alive: !g.drafts[i].deleted,
            checked_at: audit_time,
        })
        .collect();

    // Rate path.
    let n_minutes = (end - spec.start).num_minutes();
    let noise = Normal::new(0.0, spec.noise_sigma * spec.base_price).expect("finite sigma");
    let trend = |j: i64| spec.base_price + spec.baseline_slope * j as f64;
    let dm = spec.drift_minutes as i64;
    let event_minutes: Vec<i64> = event_times.iter().map(|t| t / 60).collect();
    let amplitude: Vec<f64> = event_minutes
        .iter()
        .zip(&classes)
        .map(|(&j, &c)| drift_for(spec, c) * trend(j))
        .collect();
    let bump = |e: usize, j: i64| -> f64 {
        let x = (j - event_minutes[e]) as f64 / dm as f64;
        if x <= 0.0 || x >= 2.0 {
            0.0
        } else if x <= 1.0 {
            amplitude[e] * x
        } else {
            amplitude[e] * (2.0 - x)
        }
    };
    let mut points = Vec::with_capacity(n_minutes as usize + 1);
    let mut active = 0usize;
    for j in 0..=n_minutes {
        while active + 1 < event_minutes.len() && j >= event_minutes[active + 1] {
            active += 1;
        }
        let a = if event_minutes.is_empty() { 0.0 } else { bump(active, j) };
        let eps = if spec.noise_sigma > 0.0 { noise.sample(&mut g.rng) } else { 0.0 };
        points.push(RatePoint {
            timestamp: spec.start + Duration::minutes(j),
            price: trend(j) + a + eps,
        });
    }
    let rates = RateSeries::new("EURUSD", points).map_err(|e| SynthError::Inconsistent(e.to_string()))?;

    let events: Vec<AnnouncementEvent> = event_times
        .iter()
        .enumerate()
        .map(|(e, &t)| AnnouncementEvent {
            event_id: event_id_for_position(e),
            timestamp: at(t),
            source: event_sources[e].0,
            description: event_sources[e].1.to_string(),
        })
        .collect();
    let event_truth = events
        .iter()
        .enumerate()
        .map(|(e, ev)| {
            let p0 = trend(event_minutes[e]);
            let car: f64 = (0..dm)
                .map(|i| {
                    let a0 = bump(e, event_minutes[e] + i);
                    let a1 = bump(e, event_minutes[e] + i + 1);
                    (a1 - a0) / (p0 + a0)
                })
                .sum();
            EventTruth {
                event_id: ev.event_id.clone(),
                timestamp: format_timestamp(ev.timestamp),
                source: ev.source,
                class: classes[e],
                drift: drift_for(spec, classes[e]),
                expected_final_car: car,
            }
        })
        .collect();

    let deletions = DeletionTruth {
        repost_clusters: planted_reposts
            .iter()
            .map(|(a, ids)| RepostTruth {
                author_id: author_ids[*a].clone(),
                text: g.drafts[ids[0]].text.clone(),
                tweet_ids: ids.iter().map(|&i| id_of[i].clone()).collect(),
            })
            .collect(),
        typos: planted_typos
            .iter()
            .map(|&(d, r)| TypoTruth {
                deleted_id: id_of[d].clone(),
                replacement_id: id_of[r].clone(),
            })
            .collect(),
        retweets: planted_retweets.iter().map(|&i| id_of[i].clone()).collect(),
        recommendations: planted_recs.iter().map(|&i| id_of[i].clone()).collect(),
        other: planted_other.iter().map(|&i| id_of[i].clone()).collect(),
        total_deleted: g.drafts.iter().filter(|d| d.deleted).count(),
    };

    let users: BTreeMap<String, String> = roles
        .iter()
        .enumerate()
        .map(|(u, r)| (author_ids[u].clone(), r.group().token().to_string()))
        .collect();
    let truth = GroundTruth {
        spec: spec.clone(),
        tweets: tweets.len(),
        labeled: tweets.iter().filter(|t| t.gold_label.is_some()).count(),
        rate_points: rates.len(),
        users,
        planted_drift: Stance::REPORT_ORDER
            .iter()
            .map(|&s| (s.to_string(), drift_for(spec, s)))
            .collect(),
        events: event_truth,
        deletions,
    };
    let data = SyntheticData {
        tweets,
        rates,
        events,
        audit,
        truth,
    };
    self_check(&data, rules, &order, &g.drafts)?;
    Ok(data)
}

/// The first two tweets of a background batch pin the ends of `[lo, hi)`
/// (first and last day), so activity spans are predictable.
fn pinned_time(g: &mut Gen, i: usize, lo: i64, hi: i64) -> Result<i64, SynthError> {
    const DAY: i64 = 86_400;
    match i {
        0 => g.free_time(lo, (lo + DAY).min(hi), 1),
        1 => g.free_time((hi - DAY).max(lo), hi, 1),
        _ => g.free_time(lo, hi, 1),
    }
}

/// Drops two characters from the first `body_len` characters of `text`,
/// giving an edit distance of exactly 2.
fn delete_two_chars(rng: &mut ChaCha8Rng, text: &str, body_len: usize) -> String {
    let chars: Vec<char> = text.chars().collect();
    let candidates: Vec<usize> = (0..body_len).filter(|&i| chars[i].is_alphabetic()).collect();
    let picked: BTreeSet<usize> = candidates.choose_multiple(rng, 2).copied().collect();
    chars
        .iter()
        .enumerate()
        .filter(|(i, _)| !picked.contains(i))
        .map(|(_, c)| c)
        .collect()
}

/// Guards the ground truth: every user must land in its planted group, and
/// no planted non-typo deletion may look like a typo fix by accident.
fn self_check(
    data: &SyntheticData,
    rules: &GroupRuleConfig,
    order: &[usize],
    drafts: &[Draft],
) -> Result<(), SynthError> {
    let assigned = assign_groups(&build_profiles(&data.tweets, rules), rules);
    for (author, group) in data.groups() {
        if assigned.get(&author) != Some(&group) {
            return Err(SynthError::Inconsistent(format!(
                "user {author} classifies as {:?}, planted as {group}",
                assigned.get(&author)
            )));
        }
    }
    let mut timelines: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in order {
        timelines.entry(drafts[i].author).or_default().push(i);
    }
    let typo_ids: BTreeSet<&str> = data.truth.deletions.typos.iter().map(|t| t.deleted_id.as_str()).collect();
    let id_of = |i: usize| data.tweets[order.iter().position(|&o| o == i).expect("ordered")].id.as_str();
    for tl in timelines.values() {
        for (pos, &i) in tl.iter().enumerate() {
            if !drafts[i].deleted {
                continue;
            }
            let hit = tl[pos + 1..].iter().take(3).position(|&j| {
                let d = edit_distance(&drafts[i].text, &drafts[j].text);
                d > 1 && d < 4
            });
            let planted_typo = typo_ids.contains(id_of(i));
            if hit.is_some() != planted_typo && !drafts[i].text.is_empty() {
                // Reposts are exempt because they are categorized first.
                let is_repost = data
                    .truth
                    .deletions
                    .repost_clusters
                    .iter()
                    .any(|c| c.tweet_ids.iter().any(|x| x == id_of(i)));
                if !is_repost {
                    return Err(SynthError::Inconsistent(format!(
                        "deleted tweet {} has an unplanned typo-rule outcome",
                        id_of(i)
                    )));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            events: 6,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let rules = GroupRuleConfig::default();
        let a = generate_synthetic(&small(), &rules).unwrap();
        let b = generate_synthetic(&small(), &rules).unwrap();
        assert_eq!(a.tweets_jsonl(), b.tweets_jsonl());
        assert_eq!(a.rates.to_csv(), b.rates.to_csv());
        assert_eq!(a.audit_jsonl(), b.audit_jsonl());
        let c = generate_synthetic(&SyntheticSpec { seed: 7, ..small() }, &rules).unwrap();
        assert_ne!(a.tweets_jsonl(), c.tweets_jsonl());
    }

    #[test]
    fn tweets_are_time_ordered_and_deletions_counted() {
        let d = generate_synthetic(&small(), &GroupRuleConfig::default()).unwrap();
        assert!(d.tweets.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        let dead = d.audit.iter().filter(|a| !a.alive).count();
        let spec = small();
        assert_eq!(dead, d.truth.deletions.total_deleted);
        assert_eq!(
            dead,
            spec.repost_clusters * spec.repost_copies
                + spec.typos
                + spec.retweets
                + spec.recommendations
                + spec.other_deletions
        );
    }

    #[test]
    fn infeasible_specs_rejected() {
        let rules = GroupRuleConfig::default();
        for spec in [
            SyntheticSpec { robot_bot_rate: 0.75, ..small() },
            SyntheticSpec { spammer_tweets: 1000, ..small() },
            SyntheticSpec { company_retweeted_ratio: 0.25, ..small() },
            SyntheticSpec { individual_retweeted_ratio: 0.3, ..small() },
            SyntheticSpec { other_days: 31, ..small() },
            SyntheticSpec { event_spacing_minutes: 1440, ..small() },
            SyntheticSpec { repost_copies: 1, ..small() },
        ] {
            assert!(matches!(generate_synthetic(&spec, &rules), Err(SynthError::Infeasible(_))));
        }
    }

    #[test]
    fn kv_round_trip() {
        let spec = SyntheticSpec { events: 9, noise_sigma: 0.0, ..small() };
        let kv = KeyValueFile::parse(&spec.to_kv(), &[]).unwrap();
        let mut back = SyntheticSpec::default();
        back.apply_kv(&kv).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn typo_pairs_differ_by_two() {
        let d = generate_synthetic(&small(), &GroupRuleConfig::default()).unwrap();
        let text = |id: &str| d.tweets.iter().find(|t| t.id == id).unwrap().text.clone();
        for t in &d.truth.deletions.typos {
            assert_eq!(edit_distance(&text(&t.deleted_id), &text(&t.replacement_id)), 2);
        }
    }
}
