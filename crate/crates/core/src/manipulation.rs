//! Deletion forensics.
//!
//! Each deleted tweet is explained by the first matching category, in order:
//!
//! 1. **repost**: same author and identical text deleted at least twice;
//! 2. **typo**: one of the author's next three tweets differs by an edit
//!    distance of 2 or 3 once URLs are replaced by `<url>`;
//! 3. **retweet**: the deleted tweet is itself a retweet;
//! 4. **recommendation**: the text uses trading vocabulary;
//! 5. **unexplained**: everything else.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::eventstudy::{run_event_study, ClassifiedTweet, StudyConfig, StudyResult};
use crate::ingest::{AnnouncementEvent, RateSeries, Stance, TweetRecord};
use crate::text::replace_urls;
use crate::usergroups::{GroupFilter, UserGroup};

#[derive(Debug, Error, PartialEq)]
pub enum ForensicsError {
    #[error("tweet {tweet} by {found} is not by the deleted tweet's author {expected}")]
    ForeignAuthor {
        tweet: String,
        expected: String,
        found: String,
    },
    #[error("{tweets} tweets but {stances} stances")]
    StanceCountMismatch { tweets: usize, stances: usize },
    #[error("no group assigned to author {0}")]
    MissingGroup(String),
}

/// Levenshtein distance over Unicode scalar values.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = (above + 1).min(row[j] + 1).min(diag + usize::from(ca != cb));
            diag = above;
        }
    }
    row[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TypoRuleConfig {
    pub max_following: usize,
    /// Exclusive lower bound on the distance.
    pub min_distance_exclusive: usize,
    /// Exclusive upper bound on the distance.
    pub max_distance_exclusive: usize,
    pub normalize_urls: bool,
}

impl Default for TypoRuleConfig {
    fn default() -> Self {
        TypoRuleConfig {
            max_following: 3,
            min_distance_exclusive: 1,
            max_distance_exclusive: 4,
            normalize_urls: true,
        }
    }
}

impl TypoRuleConfig {
    fn normalize<'a>(&self, text: &'a str) -> std::borrow::Cow<'a, str> {
        if self.normalize_urls {
            replace_urls(text)
        } else {
            std::borrow::Cow::Borrowed(text)
        }
    }

    fn accepts(&self, d: usize) -> bool {
        d > self.min_distance_exclusive && d < self.max_distance_exclusive
    }
}

/// Returns the id of the first of the author's following tweets that looks
/// like a typo fix of `deleted`. `following` must be the same author's later
/// tweets in time order.
pub fn detect_typo_deletion<'a, I>(
    deleted: &TweetRecord,
    following: I,
    config: &TypoRuleConfig,
) -> Result<Option<String>, ForensicsError>
where
    I: IntoIterator<Item = &'a TweetRecord>,
{
    let base = config.normalize(&deleted.text);
    for candidate in following.into_iter().take(config.max_following) {
        if candidate.author_id != deleted.author_id {
            return Err(ForensicsError::ForeignAuthor {
                tweet: candidate.id.clone(),
                expected: deleted.author_id.clone(),
                found: candidate.author_id.clone(),
            });
        }
        if config.accepts(edit_distance(&base, &config.normalize(&candidate.text))) {
            return Ok(Some(candidate.id.clone()));
        }
    }
    Ok(None)
}

fn repost_key(t: &TweetRecord) -> (&str, &str) {
    (t.author_id.as_str(), t.text.trim_end())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RepostCluster {
    pub author_id: String,
    pub text: String,
    pub count: usize,
    pub tweet_ids: Vec<String>,
}

/// Deleted tweets sharing author and text (trailing whitespace ignored),
/// largest clusters first, then by author id.
pub fn find_repost_clusters<'a, I>(deleted: I) -> Vec<RepostCluster>
where
    I: IntoIterator<Item = &'a TweetRecord>,
{
    let mut groups: BTreeMap<(&str, &str), Vec<String>> = BTreeMap::new();
    for t in deleted {
        groups.entry(repost_key(t)).or_default().push(t.id.clone());
    }
    let mut clusters: Vec<RepostCluster> = groups
        .into_iter()
        .filter(|(_, ids)| ids.len() >= 2)
        .map(|((author, text), tweet_ids)| RepostCluster {
            author_id: author.to_string(),
            text: text.to_string(),
            count: tweet_ids.len(),
            tweet_ids,
        })
        .collect();
    clusters.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.author_id.cmp(&b.author_id)));
    clusters
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecommendationLexicon {
    words: BTreeSet<String>,
}

pub const DEFAULT_LEXICON: [&str; 11] = [
    "long", "short", "bear", "bull", "bearish", "bullish", "resistance", "support", "buy", "sell",
    "close",
];

impl Default for RecommendationLexicon {
    fn default() -> Self {
        RecommendationLexicon::new(DEFAULT_LEXICON).expect("default lexicon is nonempty")
    }
}

impl RecommendationLexicon {
    /// Returns `None` for an empty word list.
    pub fn new<I, S>(words: I) -> Option<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: BTreeSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        (!words.is_empty()).then_some(RecommendationLexicon { words })
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

/// Whole-word, case-insensitive lexicon match; words are runs of letters.
pub fn is_recommendation(text: &str, lexicon: &RecommendationLexicon) -> bool {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|w| !w.is_empty())
        .any(|w| lexicon.words.contains(&w.to_lowercase()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DeletionCategory {
    Repost,
    Typo,
    Retweet,
    Recommendation,
    Unexplained,
}

impl DeletionCategory {
    pub const ORDER: [DeletionCategory; 5] = [
        DeletionCategory::Repost,
        DeletionCategory::Typo,
        DeletionCategory::Retweet,
        DeletionCategory::Recommendation,
        DeletionCategory::Unexplained,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DeletionCategory::Repost => "repost",
            DeletionCategory::Typo => "typo",
            DeletionCategory::Retweet => "retweet",
            DeletionCategory::Recommendation => "recommendation",
            DeletionCategory::Unexplained => "unexplained",
        }
    }
}

impl fmt::Display for DeletionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TypoDeletion {
    pub deleted_id: String,
    pub replacement_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct DeletionBreakdown {
    pub total_deleted: usize,
    /// Distinct (author, text) pairs among deleted tweets.
    pub unique_deleted: usize,
    pub repost_clusters: Vec<RepostCluster>,
    pub typo_deletions: Vec<TypoDeletion>,
    pub deleted_retweets: Vec<String>,
    pub recommendation_deletions: Vec<String>,
    pub unexplained: Vec<String>,
    /// Category of every deleted tweet id.
    pub assignments: BTreeMap<String, DeletionCategory>,
}

impl DeletionBreakdown {
    pub fn count(&self, category: DeletionCategory) -> usize {
        match category {
            DeletionCategory::Repost => self.repost_clusters.iter().map(|c| c.count).sum(),
            DeletionCategory::Typo => self.typo_deletions.len(),
            DeletionCategory::Retweet => self.deleted_retweets.len(),
            DeletionCategory::Recommendation => self.recommendation_deletions.len(),
            DeletionCategory::Unexplained => self.unexplained.len(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ForensicsConfig {
    pub typo: TypoRuleConfig,
    pub lexicon: RecommendationLexicon,
}

/// Per-user deleted-fraction histogram row. `bin` is the upper edge in percent:
/// `0` is exactly zero, `10` is (0, 10], ..., `100` is (90, 100].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HistogramRow {
    pub group: UserGroup,
    pub bin: u32,
    pub users: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeletedStanceRow {
    pub group: UserGroup,
    pub stance: Stance,
    pub count: u64,
    /// Deleted tweets of this stance as a percentage of all the group's tweets of this stance.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForensicsReport {
    pub breakdown: DeletionBreakdown,
    pub histogram: Vec<HistogramRow>,
    pub deleted_stance: Vec<DeletedStanceRow>,
}

/// Histogram bin for `deleted` out of `total` tweets.
pub fn deletion_bin(deleted: u64, total: u64) -> u32 {
    if deleted == 0 {
        0
    } else {
        (10 * (10 * deleted).div_ceil(total)) as u32
    }
}

/// Categorizes every deleted tweet whose author is in `scope`.
pub fn categorize_deletions(
    tweets: &[TweetRecord],
    groups: &BTreeMap<String, UserGroup>,
    scope: &GroupFilter,
    config: &ForensicsConfig,
) -> Result<DeletionBreakdown, ForensicsError> {
    let in_scope = |t: &TweetRecord| -> Result<bool, ForensicsError> {
        let g = groups
            .get(&t.author_id)
            .ok_or_else(|| ForensicsError::MissingGroup(t.author_id.clone()))?;
        Ok(scope.allows(*g))
    };
    let mut timelines: BTreeMap<&str, Vec<&TweetRecord>> = BTreeMap::new();
    let mut deleted: Vec<&TweetRecord> = Vec::new();
    for t in tweets {
        if in_scope(t)? {
            timelines.entry(t.author_id.as_str()).or_default().push(t);
            if t.deleted {
                deleted.push(t);
            }
        }
    }
    for tl in timelines.values_mut() {
        tl.sort_by_key(|t| t.timestamp);
    }

    let mut b = DeletionBreakdown {
        total_deleted: deleted.len(),
        unique_deleted: deleted.iter().map(|t| repost_key(t)).collect::<BTreeSet<_>>().len(),
        repost_clusters: find_repost_clusters(deleted.iter().copied()),
        ..DeletionBreakdown::default()
    };
    for c in &b.repost_clusters {
        for id in &c.tweet_ids {
            b.assignments.insert(id.clone(), DeletionCategory::Repost);
        }
    }
    for (author, timeline) in &timelines {
        for (pos, t) in timeline.iter().enumerate() {
            if !t.deleted || b.assignments.contains_key(&t.id) {
                continue;
            }
            debug_assert_eq!(&t.author_id, author);
            let category = if let Some(replacement) =
                detect_typo_deletion(t, timeline[pos + 1..].iter().copied(), &config.typo)?
            {
                b.typo_deletions.push(TypoDeletion {
                    deleted_id: t.id.clone(),
                    replacement_id: replacement,
                });
                DeletionCategory::Typo
            } else if t.is_retweet {
                b.deleted_retweets.push(t.id.clone());
                DeletionCategory::Retweet
            } else if is_recommendation(&t.text, &config.lexicon) {
                b.recommendation_deletions.push(t.id.clone());
                DeletionCategory::Recommendation
            } else {
                b.unexplained.push(t.id.clone());
                DeletionCategory::Unexplained
            };
            b.assignments.insert(t.id.clone(), category);
        }
    }
    Ok(b)
}

/// Full forensic report: categorized deletions, per-group deleted-fraction
/// histogram and the stance breakdown of deleted tweets, all restricted to
/// authors in `scope`. `stances[i]` is the stance of `tweets[i]`.
pub fn deletion_breakdown(
    tweets: &[TweetRecord],
    groups: &BTreeMap<String, UserGroup>,
    stances: &[Stance],
    scope: &GroupFilter,
    config: &ForensicsConfig,
) -> Result<ForensicsReport, ForensicsError> {
    if tweets.len() != stances.len() {
        return Err(ForensicsError::StanceCountMismatch {
            tweets: tweets.len(),
            stances: stances.len(),
        });
    }
    let breakdown = categorize_deletions(tweets, groups, scope, config)?;

    // author -> (deleted, total)
    let mut per_user: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    // group -> stance -> (deleted, total)
    let mut per_stance: BTreeMap<UserGroup, [(u64, u64); 3]> = BTreeMap::new();
    for (t, s) in tweets.iter().zip(stances) {
        let g = groups[&t.author_id];
        if !scope.allows(g) {
            continue;
        }
        let u = per_user.entry(t.author_id.as_str()).or_default();
        u.1 += 1;
        let cell = &mut per_stance.entry(g).or_default()[s.report_index()];
        cell.1 += 1;
        if t.deleted {
            u.0 += 1;
            cell.0 += 1;
        }
    }
    let mut bins: BTreeMap<UserGroup, [u64; 11]> = BTreeMap::new();
    for (author, (d, n)) in &per_user {
        bins.entry(groups[*author]).or_default()[(deletion_bin(*d, *n) / 10) as usize] += 1;
    }

    let scoped: Vec<UserGroup> = UserGroup::ALL.into_iter().filter(|g| scope.allows(*g)).collect();
    let mut histogram = Vec::new();
    let mut deleted_stance = Vec::new();
    for &g in &scoped {
        let counts = bins.get(&g).copied().unwrap_or_default();
        for (i, users) in counts.iter().enumerate() {
            histogram.push(HistogramRow {
                group: g,
                bin: 10 * i as u32,
                users: *users,
            });
        }
        let cells = per_stance.get(&g).copied().unwrap_or_default();
        for stance in Stance::REPORT_ORDER {
            let (d, n) = cells[stance.report_index()];
            deleted_stance.push(DeletedStanceRow {
                group: g,
                stance,
                count: d,
                percent: if n == 0 { 0.0 } else { 100.0 * d as f64 / n as f64 },
            });
        }
    }
    Ok(ForensicsReport {
        breakdown,
        histogram,
        deleted_stance,
    })
}

/// Event studies with and without the deleted tweets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarComparison {
    pub all: StudyResult,
    pub excluded: StudyResult,
}

impl CarComparison {
    /// Per class: `excluded − all` at each lag both curves cover.
    pub fn difference(&self, class: Stance) -> Vec<f64> {
        let a = &self.all.curve(class).mean_car;
        let e = &self.excluded.curve(class).mean_car;
        a.iter().zip(e).map(|(a, e)| e - a).collect()
    }
}

/// Runs the study on all tweets, then again with deleted tweets removed from
/// event typing. Rates are shared, so only event labels can change.
pub fn car_removal_comparison(
    events: &[AnnouncementEvent],
    rates: &RateSeries,
    tweets: &[ClassifiedTweet],
    filter: &GroupFilter,
    config: &StudyConfig,
) -> CarComparison {
    let kept: Vec<ClassifiedTweet> = tweets.iter().filter(|t| !t.deleted).cloned().collect();
    CarComparison {
        all: run_event_study(events, rates, tweets, filter, config),
        excluded: run_event_study(events, rates, &kept, filter, config),
    }
}

fn opt(v: Option<&f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const HISTOGRAM_HEADER: &str = "group,bin,users";
pub const BREAKDOWN_HEADER: &str = "category,count";
pub const DELETED_STANCE_HEADER: &str = "group,stance,count,percent";
pub const CAR_COMPARISON_HEADER: &str = "group,class,lag_min,car_all,car_excluded,diff";

pub fn write_histogram(rows: &[HistogramRow]) -> String {
    let mut out = format!("{HISTOGRAM_HEADER}\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.group, r.bin, r.users));
    }
    out
}

/// Category rows in precedence order, then `total`, `unique` and `repost_clusters`.
pub fn write_breakdown(b: &DeletionBreakdown) -> String {
    let mut out = format!("{BREAKDOWN_HEADER}\n");
    for c in DeletionCategory::ORDER {
        out.push_str(&format!("{},{}\n", c, b.count(c)));
    }
    out.push_str(&format!("total,{}\n", b.total_deleted));
    out.push_str(&format!("unique,{}\n", b.unique_deleted));
    out.push_str(&format!("repost_clusters,{}\n", b.repost_clusters.len()));
    out
}

pub fn write_deleted_stance(rows: &[DeletedStanceRow]) -> String {
    let mut out = format!("{DELETED_STANCE_HEADER}\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.group, r.stance, r.count, r.percent));
    }
    out
}

/// One row per lag covered by either run; missing values are left empty.
pub fn write_car_comparison(comparisons: &[CarComparison]) -> String {
    let mut out = format!("{CAR_COMPARISON_HEADER}\n");
    for c in comparisons {
        for class in Stance::REPORT_ORDER {
            let a = &c.all.curve(class).mean_car;
            let e = &c.excluded.curve(class).mean_car;
            for lag in 0..a.len().max(e.len()) {
                let diff = match (a.get(lag), e.get(lag)) {
                    (Some(x), Some(y)) => (y - x).to_string(),
                    _ => String::new(),
                };
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    c.all.group,
                    class,
                    lag,
                    opt(a.get(lag)),
                    opt(e.get(lag)),
                    diff
                ));
            }
        }
    }
    out
}
