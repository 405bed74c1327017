//! Analytics toolkit relating Forex Twitter activity to EUR-USD price moves.
//!
//! - [`ingest`] parses tweet, rate, event and deletion-audit archives.
//! - [`stance`] featurizes tweets and trains/evaluates the two-plane ordinal classifier.
//! - [`usergroups`] profiles authors and segments them into robots, spammers,
//!   trading companies and individual traders.
//! - [`eventstudy`] fits the market model and aggregates cumulative abnormal
//!   returns per stance-typed announcement.
//! - [`manipulation`] runs deletion forensics (reposts, typos, retweets,
//!   deleted recommendations) and the before/after-deletion CAR comparison.

pub mod config;
pub mod eventstudy;
pub mod ingest;
pub mod manipulation;
pub mod stance;
mod text;
pub mod usergroups;

pub use ingest::{
    AnnouncementEvent, DeletionAuditEntry, EventSource, RatePoint, RateSeries, Stance, TweetRecord,
};
pub use stance::{FeatureHasher, FeatureVector, TrainParams, TwoPlaneModel};
pub use usergroups::{GroupRuleConfig, UserGroup, UserProfile};
