//! Effective pipeline configuration: built-in defaults, overridden by a
//! `key = value` file (`--config` or `FOREXPULSE_CONFIG`), overridden by
//! command-line flags.
//!
//! Root keys name inputs, stance, event-study, group-rule and typo-rule
//! parameters. Line sections: `[patterns]` (bot prefixes, one per line) and
//! `[lexicon]` (recommendation words). `[synth]` holds the fixture generator
//! settings. Relative paths resolve against the working directory.

use std::path::{Path, PathBuf};

use forexpulse_core::config::KeyValueFile;
use forexpulse_core::eventstudy::StudyConfig;
use forexpulse_core::manipulation::{ForensicsConfig, RecommendationLexicon, TypoRuleConfig};
use forexpulse_core::stance::FeatureHasher;
use forexpulse_core::usergroups::GroupFilter;
use forexpulse_core::{GroupRuleConfig, TrainParams};

use crate::error::{PipelineError, Result};
use crate::synth::SyntheticSpec;

pub const CONFIG_ENV: &str = "FOREXPULSE_CONFIG";
pub const DEFAULT_DIM: usize = 1 << 18;

const PIPELINE_KEYS: [&str; 21] = [
    "tweets",
    "rates",
    "events",
    "audit",
    "model",
    "out",
    "pair",
    "dim",
    "lambda",
    "epochs",
    "seed",
    "folds",
    "window_days",
    "horizon",
    "theta",
    "tweet_window_minutes",
    "groups",
    "audit_latest_wins",
    "typo_max_following",
    "typo_normalize_urls",
    "typo_distance_bounds",
];

const RULE_KEYS: [&str; 8] = [
    "bot_rate",
    "spam_tweets",
    "spam_retweeted_ratio",
    "company_days",
    "company_t_rate",
    "company_retweeted_ratio",
    "individual_days",
    "individual_retweeted_ratio",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub tweets: Option<PathBuf>,
    pub rates: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub audit: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: PathBuf,
    pub pair: String,
    pub dim: usize,
    pub params: TrainParams,
    pub folds: usize,
    pub study: StudyConfig,
    /// Comma-separated group filter list as given.
    pub groups: String,
    pub audit_latest_wins: bool,
    pub rules: GroupRuleConfig,
    pub forensics: ForensicsConfig,
    pub synth: SyntheticSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            tweets: None,
            rates: None,
            events: None,
            audit: None,
            model: None,
            out: PathBuf::from("out"),
            pair: "EURUSD".into(),
            dim: DEFAULT_DIM,
            params: TrainParams::default(),
            folds: 10,
            study: StudyConfig::default(),
            groups: String::new(),
            audit_latest_wins: false,
            rules: GroupRuleConfig::default(),
            forensics: ForensicsConfig::default(),
            synth: SyntheticSpec::default(),
        }
    }
}

/// Command-line overrides; `None` keeps the file/default value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tweets: Option<PathBuf>,
    pub rates: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub audit: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub groups: Option<String>,
    pub theta: Option<f64>,
    pub horizon: Option<usize>,
    pub window_days: Option<u32>,
    pub seed: Option<u64>,
    pub folds: Option<usize>,
    pub dim: Option<usize>,
    pub lambda: Option<f64>,
    pub epochs: Option<usize>,
    pub audit_latest_wins: bool,
}

fn invalid(e: impl ToString) -> PipelineError {
    PipelineError::Validation(e.to_string())
}

impl PipelineConfig {
    /// Loads the effective config. `config_path` wins over the environment variable.
    pub fn load(config_path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let env_path = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        let path = config_path.map(Path::to_path_buf).or(env_path);
        let mut cfg = PipelineConfig::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(&path).map_err(|_| PipelineError::MissingInput {
                flag: "config",
                path: path.clone(),
            })?;
            cfg.apply_file(&text)?;
        }
        cfg.apply_overrides(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        let file = KeyValueFile::parse(text, &["patterns", "lexicon"]).map_err(invalid)?;
        for (section, keys) in &file.values {
            let known: Vec<&str> = match section.as_str() {
                "" => PIPELINE_KEYS.iter().chain(RULE_KEYS.iter()).copied().collect(),
                "synth" => SyntheticSpec::keys(),
                other => return Err(invalid(format!("unknown config section [{other}]"))),
            };
            if let Some(k) = keys.keys().find(|k| !known.contains(&k.as_str())) {
                let shown = if section.is_empty() { k.clone() } else { format!("{section}.{k}") };
                return Err(invalid(format!("unknown config key `{shown}`")));
            }
        }
        let path = |key: &str| file.get("", key).map(PathBuf::from);
        macro_rules! value {
            ($key:literal, $target:expr) => {
                if let Some(v) = file.parse_value("", $key).map_err(invalid)? {
                    $target = v;
                }
            };
        }
        self.tweets = path("tweets").or(self.tweets.take());
        self.rates = path("rates").or(self.rates.take());
        self.events = path("events").or(self.events.take());
        self.audit = path("audit").or(self.audit.take());
        self.model = path("model").or(self.model.take());
        if let Some(out) = path("out") {
            self.out = out;
        }
        value!("pair", self.pair);
        value!("dim", self.dim);
        value!("lambda", self.params.lambda);
        value!("epochs", self.params.epochs);
        value!("seed", self.params.seed);
        value!("folds", self.folds);
        value!("window_days", self.study.window_days);
        value!("horizon", self.study.horizon);
        value!("theta", self.study.theta);
        value!("tweet_window_minutes", self.study.tweet_window_minutes);
        value!("groups", self.groups);
        value!("audit_latest_wins", self.audit_latest_wins);
        value!("typo_max_following", self.forensics.typo.max_following);
        value!("typo_normalize_urls", self.forensics.typo.normalize_urls);
        if let Some(raw) = file.get("", "typo_distance_bounds") {
            let (lo, hi) = raw
                .split_once(',')
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
                .ok_or_else(|| invalid(format!("typo_distance_bounds must be `lo, hi`, got {raw:?}")))?;
            self.forensics.typo.min_distance_exclusive = lo;
            self.forensics.typo.max_distance_exclusive = hi;
        }
        self.rules = GroupRuleConfig::from_kv(&file).map_err(invalid)?;
        if let Some(words) = file.section_lines("lexicon") {
            self.forensics.lexicon = RecommendationLexicon::new(words)
                .ok_or_else(|| invalid("[lexicon] section is empty"))?;
        }
        // The generator shares the pipeline seed unless [synth] sets its own.
        self.synth.seed = self.params.seed;
        self.synth.apply_kv(&file).map_err(invalid)?;
        Ok(())
    }

    pub fn apply_overrides(&mut self, o: &Overrides) {
        macro_rules! set {
            ($src:ident, $dst:expr) => {
                if let Some(v) = o.$src.clone() {
                    $dst = v;
                }
            };
        }
        macro_rules! set_opt {
            ($src:ident) => {
                if o.$src.is_some() {
                    self.$src = o.$src.clone();
                }
            };
        }
        set_opt!(tweets);
        set_opt!(rates);
        set_opt!(events);
        set_opt!(audit);
        set_opt!(model);
        set!(out, self.out);
        set!(groups, self.groups);
        set!(theta, self.study.theta);
        set!(horizon, self.study.horizon);
        set!(window_days, self.study.window_days);
        set!(folds, self.folds);
        set!(dim, self.dim);
        set!(lambda, self.params.lambda);
        set!(epochs, self.params.epochs);
        if let Some(seed) = o.seed {
            self.params.seed = seed;
            self.synth.seed = seed;
        }
        self.audit_latest_wins |= o.audit_latest_wins;
    }

    pub fn validate(&self) -> Result<()> {
        FeatureHasher::new(self.dim).map_err(invalid)?;
        self.params.validate().map_err(invalid)?;
        if self.folds < 2 {
            return Err(invalid(format!("folds must be at least 2, got {}", self.folds)));
        }
        if self.study.window_days == 0 {
            return Err(invalid("window_days must be at least 1"));
        }
        if self.study.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        if !(self.study.theta.is_finite() && self.study.theta >= 0.0) {
            return Err(invalid(format!("theta must be a finite value >= 0, got {}", self.study.theta)));
        }
        if self.study.tweet_window_minutes < 1 {
            return Err(invalid("tweet_window_minutes must be at least 1"));
        }
        let t: &TypoRuleConfig = &self.forensics.typo;
        if t.max_following == 0 || t.min_distance_exclusive + 1 >= t.max_distance_exclusive {
            return Err(invalid("typo rule needs max_following >= 1 and a nonempty distance range"));
        }
        self.group_filters()?;
        self.rules.validate().map_err(invalid)?;
        Ok(())
    }

    pub fn group_filters(&self) -> Result<Vec<GroupFilter>> {
        GroupFilter::parse_list(&self.groups).map_err(invalid)
    }

    /// The effective configuration in the file format it is read from.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        for (key, p) in [
            ("tweets", &self.tweets),
            ("rates", &self.rates),
            ("events", &self.events),
            ("audit", &self.audit),
            ("model", &self.model),
        ] {
            if p.is_some() {
                out.push_str(&format!("{key} = {}\n", path(p)));
            }
        }
        out.push_str(&format!("out = {}\n", self.out.display()));
        out.push_str(&format!("pair = {}\n", self.pair));
        out.push_str(&format!("dim = {}\n", self.dim));
        out.push_str(&format!("lambda = {}\n", self.params.lambda));
        out.push_str(&format!("epochs = {}\n", self.params.epochs));
        out.push_str(&format!("seed = {}\n", self.params.seed));
        out.push_str(&format!("folds = {}\n", self.folds));
        out.push_str(&format!("window_days = {}\n", self.study.window_days));
        out.push_str(&format!("horizon = {}\n", self.study.horizon));
        out.push_str(&format!("theta = {}\n", self.study.theta));
        out.push_str(&format!("tweet_window_minutes = {}\n", self.study.tweet_window_minutes));
        out.push_str(&format!("groups = {}\n", self.groups));
        out.push_str(&format!("audit_latest_wins = {}\n", self.audit_latest_wins));
        let t = &self.forensics.typo;
        out.push_str(&format!("typo_max_following = {}\n", t.max_following));
        out.push_str(&format!("typo_normalize_urls = {}\n", t.normalize_urls));
        out.push_str(&format!(
            "typo_distance_bounds = {}, {}\n",
            t.min_distance_exclusive, t.max_distance_exclusive
        ));
        out.push_str(&self.rules.to_kv());
        out.push('\n');
        out.push_str(&self.rules.patterns_kv());
        out.push_str("\n[lexicon]\n");
        for w in self.forensics.lexicon.words() {
            out.push_str(w);
            out.push('\n');
        }
        out.push('\n');
        out.push_str(&self.synth.to_kv());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn show_config_output_round_trips() {
        let mut cfg = PipelineConfig {
            tweets: Some("a/tweets.jsonl".into()),
            groups: "company,individual".into(),
            ..PipelineConfig::default()
        };
        cfg.study.theta = 2.0;
        cfg.rules.bot_patterns = vec!["Closed Buy".into(), "Take profit = hit".into()];
        cfg.forensics.typo.max_following = 5;
        let mut back = PipelineConfig::default();
        back.apply_file(&cfg.to_kv()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn flags_beat_file() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_file("theta = 1\nseed = 5\n").unwrap();
        assert_eq!(cfg.synth.seed, 5);
        cfg.apply_overrides(&Overrides {
            theta: Some(3.0),
            seed: Some(9),
            ..Overrides::default()
        });
        assert_eq!(cfg.study.theta, 3.0);
        assert_eq!(cfg.params.seed, 9);
        assert_eq!(cfg.synth.seed, 9);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = PipelineConfig::default();
        assert!(cfg.apply_file("thta = 1\n").is_err());
        assert!(cfg.apply_file("[extra]\nx = 1\n").is_err());
        assert!(cfg.apply_file("dim = many\n").is_err());
        assert!(cfg.apply_file("[lexicon]\n").is_err());
        let cfg = PipelineConfig { dim: 1000, ..PipelineConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig { folds: 1, ..PipelineConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig { groups: "robots".into(), ..PipelineConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
