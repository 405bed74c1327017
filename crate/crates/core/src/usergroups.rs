//! Author activity profiles and threshold-rule segmentation.
//!
//! Rules are checked in a fixed order and the first match wins:
//! trading robot, spammer, trading company, individual trader, other.
//! Every comparison is strict.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, KeyValueFile};
use crate::ingest::{Stance, TweetRecord};

#[derive(Debug, Error, PartialEq)]
pub enum GroupError {
    #[error("cannot build a profile from zero tweets")]
    EmptyProfile,
    #[error("tweets by several authors passed to one profile: {0} and {1}")]
    MixedAuthors(String, String),
    #[error("authors without a profile: {}", .0.join(", "))]
    MissingProfiles(Vec<String>),
    #[error("{tweets} tweets but {stances} stances")]
    StanceCountMismatch { tweets: usize, stances: usize },
    #[error("invalid group rule config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("unknown user group {0:?}")]
    UnknownGroup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UserGroup {
    #[serde(rename = "robot")]
    TradingRobot,
    #[serde(rename = "spam")]
    Spammer,
    #[serde(rename = "company")]
    TradingCompany,
    #[serde(rename = "individual")]
    IndividualTrader,
    Other,
}

impl UserGroup {
    pub const ALL: [UserGroup; 5] = [
        UserGroup::TradingRobot,
        UserGroup::Spammer,
        UserGroup::TradingCompany,
        UserGroup::IndividualTrader,
        UserGroup::Other,
    ];

    /// The four named groups; `Other` is left out of group-filtered studies by default.
    pub const NAMED: [UserGroup; 4] = [
        UserGroup::TradingRobot,
        UserGroup::Spammer,
        UserGroup::TradingCompany,
        UserGroup::IndividualTrader,
    ];

    pub fn token(self) -> &'static str {
        match self {
            UserGroup::TradingRobot => "robot",
            UserGroup::Spammer => "spam",
            UserGroup::TradingCompany => "company",
            UserGroup::IndividualTrader => "individual",
            UserGroup::Other => "other",
        }
    }
}

impl fmt::Display for UserGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for UserGroup {
    type Err = GroupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UserGroup::ALL
            .into_iter()
            .find(|g| g.token() == s.trim())
            .ok_or_else(|| GroupError::UnknownGroup(s.to_string()))
    }
}

/// Thresholds and bot prefixes for the segmentation rules.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRuleConfig {
    pub bot_patterns: Vec<String>,
    pub bot_rate: f64,
    pub spam_tweets: u64,
    pub spam_retweeted_ratio: f64,
    pub company_days: u64,
    pub company_t_rate: f64,
    pub company_retweeted_ratio: f64,
    pub individual_days: u64,
    pub individual_retweeted_ratio: f64,
}

/// Placeholder prefixes: only "Closed Buy" and "Sell stop" are known robot
/// openings, the other six complete the eight-pattern set.
pub const DEFAULT_BOT_PATTERNS: [&str; 8] = [
    "Closed Buy",
    "Closed Sell",
    "Buy stop",
    "Sell stop",
    "Buy limit",
    "Sell limit",
    "Opened Buy",
    "Opened Sell",
];

impl Default for GroupRuleConfig {
    fn default() -> Self {
        GroupRuleConfig {
            bot_patterns: DEFAULT_BOT_PATTERNS.iter().map(|s| s.to_string()).collect(),
            bot_rate: 0.75,
            spam_tweets: 1000,
            spam_retweeted_ratio: 0.01,
            company_days: 30,
            company_t_rate: 0.5,
            company_retweeted_ratio: 0.25,
            individual_days: 30,
            individual_retweeted_ratio: 0.05,
        }
    }
}

impl GroupRuleConfig {
    pub fn validate(&self) -> Result<(), GroupError> {
        if self.bot_patterns.is_empty() {
            return Err(GroupError::InvalidConfig("bot pattern list is empty".into()));
        }
        let ratios = [
            ("bot_rate", self.bot_rate),
            ("spam_retweeted_ratio", self.spam_retweeted_ratio),
            ("company_t_rate", self.company_t_rate),
            ("company_retweeted_ratio", self.company_retweeted_ratio),
            ("individual_retweeted_ratio", self.individual_retweeted_ratio),
        ];
        for (name, v) in ratios {
            if !(v.is_finite() && v >= 0.0) {
                return Err(GroupError::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Overrides defaults with root-section keys and the `[patterns]` section.
    pub fn from_kv(file: &KeyValueFile) -> Result<Self, GroupError> {
        let mut c = GroupRuleConfig::default();
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = file.parse_value("", stringify!($field))? {
                    c.$field = v;
                }
            };
        }
        take!(bot_rate);
        take!(spam_tweets);
        take!(spam_retweeted_ratio);
        take!(company_days);
        take!(company_t_rate);
        take!(company_retweeted_ratio);
        take!(individual_days);
        take!(individual_retweeted_ratio);
        if let Some(lines) = file.section_lines("patterns") {
            c.bot_patterns = lines.to_vec();
        }
        c.validate()?;
        Ok(c)
    }

    /// Renders the config in the same `key = value` layout it is read from.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("bot_rate = {}\n", self.bot_rate));
        out.push_str(&format!("spam_tweets = {}\n", self.spam_tweets));
        out.push_str(&format!("spam_retweeted_ratio = {}\n", self.spam_retweeted_ratio));
        out.push_str(&format!("company_days = {}\n", self.company_days));
        out.push_str(&format!("company_t_rate = {}\n", self.company_t_rate));
        out.push_str(&format!("company_retweeted_ratio = {}\n", self.company_retweeted_ratio));
        out.push_str(&format!("individual_days = {}\n", self.individual_days));
        out.push_str(&format!(
            "individual_retweeted_ratio = {}\n",
            self.individual_retweeted_ratio
        ));
        out
    }

    pub fn patterns_kv(&self) -> String {
        let mut out = String::from("[patterns]\n");
        for p in &self.bot_patterns {
            out.push_str(p);
            out.push('\n');
        }
        out
    }

    fn is_bot_text(&self, text: &str) -> bool {
        let text = text.trim_start();
        self.bot_patterns.iter().any(|p| text.starts_with(p.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserProfile {
    pub author_id: String,
    pub tweets: u64,
    /// Calendar days from the first to the last tweet, inclusive.
    pub days_active: u64,
    /// Tweets that others retweeted at least once.
    pub retweeted: u64,
    pub bot_pattern_tweets: u64,
}

impl UserProfile {
    pub fn t_rate(&self) -> f64 {
        self.tweets as f64 / self.days_active as f64
    }

    pub fn retweeted_ratio(&self) -> f64 {
        self.retweeted as f64 / self.tweets as f64
    }

    pub fn t_bot_rate(&self) -> f64 {
        self.bot_pattern_tweets as f64 / self.tweets as f64
    }
}

pub fn build_profile<'a, I>(tweets_of_user: I, config: &GroupRuleConfig) -> Result<UserProfile, GroupError>
where
    I: IntoIterator<Item = &'a TweetRecord>,
{
    let mut iter = tweets_of_user.into_iter();
    let first = iter.next().ok_or(GroupError::EmptyProfile)?;
    let mut profile = UserProfile {
        author_id: first.author_id.clone(),
        tweets: 0,
        days_active: 0,
        retweeted: 0,
        bot_pattern_tweets: 0,
    };
    let mut min_date = first.timestamp.date_naive();
    let mut max_date = min_date;
    for t in std::iter::once(first).chain(iter) {
        if t.author_id != profile.author_id {
            return Err(GroupError::MixedAuthors(profile.author_id.clone(), t.author_id.clone()));
        }
        profile.tweets += 1;
        if t.retweet_count > 0 {
            profile.retweeted += 1;
        }
        if config.is_bot_text(&t.text) {
            profile.bot_pattern_tweets += 1;
        }
        let d = t.timestamp.date_naive();
        min_date = min_date.min(d);
        max_date = max_date.max(d);
    }
    profile.days_active = (max_date - min_date).num_days() as u64 + 1;
    Ok(profile)
}

/// Profiles for every author in the corpus, keyed by author id.
pub fn build_profiles(
    tweets: &[TweetRecord],
    config: &GroupRuleConfig,
) -> BTreeMap<String, UserProfile> {
    let mut by_author: BTreeMap<&str, Vec<&TweetRecord>> = BTreeMap::new();
    for t in tweets {
        by_author.entry(t.author_id.as_str()).or_default().push(t);
    }
    by_author
        .into_iter()
        .map(|(author, ts)| {
            let p = build_profile(ts, config).expect("nonempty single-author group");
            (author.to_string(), p)
        })
        .collect()
}

pub fn classify_user(p: &UserProfile, config: &GroupRuleConfig) -> UserGroup {
    let rr = p.retweeted_ratio();
    if p.t_bot_rate() > config.bot_rate {
        UserGroup::TradingRobot
    } else if p.tweets > config.spam_tweets && rr < config.spam_retweeted_ratio {
        UserGroup::Spammer
    } else if p.days_active > config.company_days
        && p.t_rate() > config.company_t_rate
        && rr > config.company_retweeted_ratio
    {
        UserGroup::TradingCompany
    } else if p.days_active > config.individual_days && rr > config.individual_retweeted_ratio {
        UserGroup::IndividualTrader
    } else {
        UserGroup::Other
    }
}

pub fn assign_groups(
    profiles: &BTreeMap<String, UserProfile>,
    config: &GroupRuleConfig,
) -> BTreeMap<String, UserGroup> {
    profiles
        .iter()
        .map(|(a, p)| (a.clone(), classify_user(p, config)))
        .collect()
}

/// A named set of groups used to filter tweets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupFilter {
    pub label: String,
    pub groups: BTreeSet<UserGroup>,
}

impl GroupFilter {
    pub fn single(g: UserGroup) -> Self {
        GroupFilter {
            label: g.token().to_string(),
            groups: [g].into_iter().collect(),
        }
    }

    /// Every group including `Other`.
    pub fn all() -> Self {
        GroupFilter {
            label: "all".into(),
            groups: UserGroup::ALL.into_iter().collect(),
        }
    }

    pub fn allows(&self, g: UserGroup) -> bool {
        self.groups.contains(&g)
    }

    /// Parses a comma-separated list into one filter per entry. `all` selects
    /// every group; an empty list selects each named group separately.
    pub fn parse_list(list: &str) -> Result<Vec<GroupFilter>, GroupError> {
        let tokens: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        if tokens.is_empty() {
            return Ok(UserGroup::NAMED.into_iter().map(GroupFilter::single).collect());
        }
        tokens
            .into_iter()
            .map(|t| {
                if t == "all" {
                    Ok(GroupFilter::all())
                } else {
                    t.parse().map(GroupFilter::single)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStats {
    pub group: UserGroup,
    pub users: u64,
    pub user_share: f64,
    pub tweets: u64,
    pub tweet_share: f64,
    /// Buy, Hold, Sell counts among the group's tweets.
    pub stance_counts: [u64; 3],
    /// Buy, Hold, Sell proportions (all 0 for a group with no tweets).
    pub stance_share: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    pub groups: Vec<GroupStats>,
}

impl GroupReport {
    pub fn get(&self, g: UserGroup) -> &GroupStats {
        self.groups.iter().find(|s| s.group == g).expect("all groups present")
    }
}

/// Per-group user share, tweet share and stance distribution.
/// `stances[i]` is the predicted stance of `tweets[i]`.
pub fn group_report(
    profiles: &BTreeMap<String, UserProfile>,
    groups: &BTreeMap<String, UserGroup>,
    tweets: &[TweetRecord],
    stances: &[Stance],
) -> Result<GroupReport, GroupError> {
    if tweets.len() != stances.len() {
        return Err(GroupError::StanceCountMismatch {
            tweets: tweets.len(),
            stances: stances.len(),
        });
    }
    let missing: BTreeSet<&str> = tweets
        .iter()
        .map(|t| t.author_id.as_str())
        .filter(|a| !profiles.contains_key(*a) || !groups.contains_key(*a))
        .collect();
    if !missing.is_empty() {
        return Err(GroupError::MissingProfiles(missing.into_iter().map(String::from).collect()));
    }
    let mut users = [0u64; 5];
    let mut tweet_counts = [0u64; 5];
    let mut stance_counts = [[0u64; 3]; 5];
    let index = |g: UserGroup| UserGroup::ALL.iter().position(|&x| x == g).expect("known group");
    for author in profiles.keys() {
        if let Some(&g) = groups.get(author) {
            users[index(g)] += 1;
        }
    }
    for (t, s) in tweets.iter().zip(stances) {
        let g = index(groups[&t.author_id]);
        tweet_counts[g] += 1;
        stance_counts[g][s.report_index()] += 1;
    }
    let total_users: u64 = users.iter().sum();
    let total_tweets: u64 = tweet_counts.iter().sum();
    let share = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    let stats = UserGroup::ALL
        .iter()
        .enumerate()
        .map(|(i, &group)| GroupStats {
            group,
            users: users[i],
            user_share: share(users[i], total_users),
            tweets: tweet_counts[i],
            tweet_share: share(tweet_counts[i], total_tweets),
            stance_counts: stance_counts[i],
            stance_share: stance_counts[i].map(|c| share(c, tweet_counts[i])),
        })
        .collect();
    Ok(GroupReport { groups: stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_timestamp;

    fn tweet(id: usize, author: &str, ts: &str, text: &str, rt: u64) -> TweetRecord {
        TweetRecord {
            id: id.to_string(),
            author_id: author.into(),
            timestamp: parse_timestamp(ts).unwrap(),
            text: text.into(),
            is_retweet: false,
            retweet_of: None,
            retweet_count: rt,
            gold_label: None,
            deleted: false,
            audit_time: None,
        }
    }

    fn profile(tweets: u64, days: u64, retweeted: u64, bot: u64) -> UserProfile {
        UserProfile {
            author_id: "u".into(),
            tweets,
            days_active: days,
            retweeted,
            bot_pattern_tweets: bot,
        }
    }

    #[test]
    fn single_tweet_profile() {
        let c = GroupRuleConfig::default();
        let p = build_profile(&[tweet(1, "u", "2014-01-01T10:00:00Z", "hi", 0)], &c).unwrap();
        assert_eq!(p.days_active, 1);
        assert_eq!(p.t_rate(), 1.0);
    }

    #[test]
    fn ten_tweets_over_five_days() {
        let c = GroupRuleConfig::default();
        let ts: Vec<TweetRecord> = (0..10)
            .map(|i| {
                let day = if i < 5 { "01" } else { "05" };
                tweet(i, "u", &format!("2014-01-{day}T{:02}:00:00Z", i + 8), "x", 0)
            })
            .collect();
        let p = build_profile(&ts, &c).unwrap();
        // Jan 5 − Jan 1 = 4 days, inclusive span 5.
        assert_eq!(p.days_active, 5);
        assert_eq!(p.t_rate(), 2.0);
    }

    #[test]
    fn bot_rate_by_prefix() {
        let c = GroupRuleConfig::default();
        let ts = vec![
            tweet(1, "u", "2014-01-01T10:00:00Z", "Closed Buy EURUSD 1.3601", 0),
            tweet(2, "u", "2014-01-01T10:01:00Z", "  Closed Buy EURUSD 1.3611", 0),
            tweet(3, "u", "2014-01-01T10:02:00Z", "Closed Buy 0.2 lots", 0),
            tweet(4, "u", "2014-01-01T10:03:00Z", "closed buy lowercase", 0),
        ];
        let p = build_profile(&ts, &c).unwrap();
        assert_eq!(p.bot_pattern_tweets, 3);
        assert_eq!(p.t_bot_rate(), 0.75);
        // 0.75 is not > 0.75
        assert_ne!(classify_user(&p, &c), UserGroup::TradingRobot);
    }

    #[test]
    fn profile_errors() {
        let c = GroupRuleConfig::default();
        assert_eq!(build_profile(&[], &c), Err(GroupError::EmptyProfile));
        let ts = vec![
            tweet(1, "a", "2014-01-01T10:00:00Z", "x", 0),
            tweet(2, "b", "2014-01-01T10:00:00Z", "x", 0),
        ];
        assert!(matches!(build_profile(&ts, &c), Err(GroupError::MixedAuthors(..))));
    }

    #[test]
    fn rule_examples() {
        let c = GroupRuleConfig::default();
        assert_eq!(classify_user(&profile(10, 5, 0, 8), &c), UserGroup::TradingRobot);
        assert_eq!(classify_user(&profile(1500, 100, 7, 0), &c), UserGroup::Spammer);
        // 60 days, t_rate 0.6, ratio 0.30
        assert_eq!(classify_user(&profile(36, 60, 11, 0), &c), UserGroup::TradingCompany);
        assert_eq!(classify_user(&profile(20, 60, 2, 0), &c), UserGroup::IndividualTrader);
        assert_eq!(classify_user(&profile(20, 10, 5, 0), &c), UserGroup::Other);
    }

    #[test]
    fn parse_config_file() {
        let text = "bot_rate = 0.9\nspam_tweets = 500\n[patterns]\nClosed Buy\nTP hit =\n";
        let kv = KeyValueFile::parse(text, &["patterns"]).unwrap();
        let c = GroupRuleConfig::from_kv(&kv).unwrap();
        assert_eq!(c.bot_rate, 0.9);
        assert_eq!(c.spam_tweets, 500);
        assert_eq!(c.bot_patterns, vec!["Closed Buy".to_string(), "TP hit =".to_string()]);
        assert_eq!(c.company_days, 30);

        let empty = KeyValueFile::parse("[patterns]\n", &["patterns"]).unwrap();
        assert!(GroupRuleConfig::from_kv(&empty).is_err());
        let neg = KeyValueFile::parse("bot_rate = -1\n", &["patterns"]).unwrap();
        assert!(GroupRuleConfig::from_kv(&neg).is_err());

        let round = format!("{}{}", c.to_kv(), c.patterns_kv());
        let kv = KeyValueFile::parse(&round, &["patterns"]).unwrap();
        assert_eq!(GroupRuleConfig::from_kv(&kv).unwrap(), c);
    }

    #[test]
    fn group_tokens() {
        for g in UserGroup::ALL {
            assert_eq!(g.token().parse::<UserGroup>().unwrap(), g);
        }
        let filters = GroupFilter::parse_list("company, individual").unwrap();
        assert_eq!(filters.len(), 2);
        assert_eq!(filters[0].label, "company");
        assert_eq!(GroupFilter::parse_list("").unwrap().len(), 4);
        assert!(GroupFilter::parse_list("bots").is_err());
    }

    #[test]
    fn single_user_report() {
        let c = GroupRuleConfig::default();
        let ts = vec![tweet(1, "u", "2014-01-01T10:00:00Z", "x", 0)];
        let profiles = build_profiles(&ts, &c);
        let groups = assign_groups(&profiles, &c);
        let r = group_report(&profiles, &groups, &ts, &[Stance::Hold]).unwrap();
        let other = r.get(UserGroup::Other);
        assert_eq!(other.user_share, 1.0);
        assert_eq!(other.tweet_share, 1.0);
        assert_eq!(other.stance_share, [0.0, 1.0, 0.0]);
    }

    #[test]
    fn report_requires_profiles() {
        let c = GroupRuleConfig::default();
        let ts = vec![tweet(1, "u", "2014-01-01T10:00:00Z", "x", 0)];
        let err = group_report(&BTreeMap::new(), &BTreeMap::new(), &ts, &[Stance::Hold]).unwrap_err();
        assert_eq!(err, GroupError::MissingProfiles(vec!["u".into()]));
        let profiles = build_profiles(&ts, &c);
        let groups = assign_groups(&profiles, &c);
        assert!(group_report(&profiles, &groups, &ts, &[]).is_err());
    }
}
