//! Event study of EUR-USD around announcements typed by Twitter stance.
//!
//! For each announcement:
//! 1. type it Buy/Hold/Sell from the stance of tweets in the hour after it;
//! 2. fit an OLS trend (the market model) to the prices of the preceding 30 days;
//! 3. take abnormal prices `pab_i = p_i − k·i` over the next `horizon` traded
//!    minutes and abnormal returns `rab_i = (pab_{i+1} − pab_i) / pab_i`;
//! 4. accumulate `CAR_n = Σ_{i≤n} rab_i`.
//!
//! Curves are then averaged per event class. Lags count traded minutes, so
//! market closures do not show up as flat stretches.

use chrono::{DateTime, Duration, Utc};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ingest::{format_timestamp, AnnouncementEvent, RateSeries, Stance};
use crate::usergroups::{GroupFilter, UserGroup};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StudyError {
    #[error("event skipped: {0}")]
    Skipped(String),
    #[error("abnormal price is zero or non-finite at lag {lag}")]
    NumericalDegeneracy { lag: usize },
}

impl StudyError {
    fn reason(&self) -> String {
        match self {
            StudyError::Skipped(r) => r.clone(),
            other => other.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudyConfig {
    pub window_days: u32,
    pub horizon: usize,
    pub theta: f64,
    pub tweet_window_minutes: i64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            window_days: 30,
            horizon: 1440,
            theta: 0.0,
            tweet_window_minutes: 60,
        }
    }
}

/// Linear trend fitted to the prices before an event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketModel {
    /// Price change per minute.
    pub slope: f64,
    /// Fitted price at the event time (unused by the abnormal prices).
    pub intercept: f64,
    pub window_start: DateTime<Utc>,
    pub window_end: DateTime<Utc>,
    pub n_points: usize,
}

fn minutes_between(from: DateTime<Utc>, to: DateTime<Utc>) -> f64 {
    (to - from).num_seconds() as f64 / 60.0
}

/// OLS of price on minutes relative to the event (non-positive, increasing
/// toward the event) over the points in `[event_time − window, event_time]`.
pub fn fit_market_model(
    rates: &RateSeries,
    event_time: DateTime<Utc>,
    window: Duration,
) -> Result<MarketModel, StudyError> {
    let pts = rates.points();
    let window_start = event_time - window;
    let lo = pts.partition_point(|p| p.timestamp < window_start);
    let hi = pts.partition_point(|p| p.timestamp <= event_time);
    let used = &pts[lo..hi];
    if used.len() < 2 {
        return Err(StudyError::Skipped(format!(
            "{} rate points in the market-model window (need 2)",
            used.len()
        )));
    }
    let n = used.len() as f64;
    let xs: Vec<f64> = used.iter().map(|p| minutes_between(event_time, p.timestamp)).collect();
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = used.iter().map(|p| p.price).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, p) in xs.iter().zip(used) {
        let dx = x - mean_x;
        sxy += dx * (p.price - mean_y);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    Ok(MarketModel {
        slope,
        intercept: mean_y - slope * mean_x,
        window_start,
        window_end: event_time,
        n_points: used.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbnormalSeries {
    pub event_id: String,
    pub lag0_time: DateTime<Utc>,
    /// Abnormal prices at lags 0..=H' where H' ≤ horizon is the available length.
    pub pab: Vec<f64>,
    pub rab: Vec<f64>,
    pub horizon: usize,
}

impl AbnormalSeries {
    /// Number of traded-minute lags actually covered.
    pub fn lags(&self) -> usize {
        self.rab.len()
    }
}

/// Abnormal prices and returns after an event. Lag 0 is the first rate point
/// at or within one minute after `event_time`; later lags are the following
/// points, in order, whatever their wall-clock spacing.
pub fn abnormal_series(
    rates: &RateSeries,
    model: &MarketModel,
    event_id: &str,
    event_time: DateTime<Utc>,
    horizon: usize,
) -> Result<AbnormalSeries, StudyError> {
    let pts = rates.points();
    let start = pts.partition_point(|p| p.timestamp < event_time);
    let lag0 = pts
        .get(start)
        .filter(|p| p.timestamp <= event_time + Duration::minutes(1))
        .ok_or_else(|| StudyError::Skipped("no rate point within one minute after the event".into()))?;
    let end = (start + horizon + 1).min(pts.len());
    let pab: Vec<f64> = pts[start..end]
        .iter()
        .enumerate()
        .map(|(i, p)| p.price - model.slope * i as f64)
        .collect();
    if let Some(lag) = pab.iter().position(|v| *v == 0.0 || !v.is_finite()) {
        return Err(StudyError::NumericalDegeneracy { lag });
    }
    let rab = pab.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect();
    Ok(AbnormalSeries {
        event_id: event_id.to_string(),
        lag0_time: lag0.timestamp,
        pab,
        rab,
        horizon,
    })
}

/// Running sums `CAR_n = Σ_{i=0..=n} rab_i`.
pub fn car_curve(rab: &[f64]) -> Vec<f64> {
    rab.iter()
        .scan(0.0, |acc, r| {
            *acc += r;
            Some(*acc)
        })
        .collect()
}

/// A tweet reduced to what event typing needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedTweet {
    pub id: String,
    pub timestamp: DateTime<Utc>,
    pub stance: Stance,
    pub group: UserGroup,
    /// Found deleted by the audit; ignored by the study itself.
    pub deleted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventClassification {
    pub event_id: String,
    pub n_buy: u64,
    pub n_hold: u64,
    pub n_sell: u64,
    pub score: i64,
    pub label: Stance,
    pub window_start: DateTime<Utc>,
    pub window_end: DateTime<Utc>,
}

/// Label from a Buy−Sell score with a neutral band: Buy above `theta`,
/// Sell below `−theta`, Hold otherwise.
pub fn label_from_score(score: i64, theta: f64) -> Stance {
    let s = score as f64;
    if s > theta {
        Stance::Buy
    } else if s < -theta {
        Stance::Sell
    } else {
        Stance::Hold
    }
}

/// Counts stances of allowed-group tweets in `[event, event + window)`.
pub fn classify_event(
    event: &AnnouncementEvent,
    tweets: &[ClassifiedTweet],
    filter: &GroupFilter,
    theta: f64,
    window: Duration,
) -> EventClassification {
    let window_start = event.timestamp;
    let window_end = event.timestamp + window;
    let mut counts = [0u64; 3];
    for t in tweets {
        if t.timestamp >= window_start && t.timestamp < window_end && filter.allows(t.group) {
            counts[t.stance.report_index()] += 1;
        }
    }
    let score = counts[0] as i64 - counts[2] as i64;
    EventClassification {
        event_id: event.event_id.clone(),
        n_buy: counts[0],
        n_hold: counts[1],
        n_sell: counts[2],
        score,
        label: label_from_score(score, theta),
        window_start,
        window_end,
    }
}

/// Mean CAR per lag over the events of one class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarCurve {
    pub group: String,
    pub class_label: Stance,
    pub n_events: usize,
    pub mean_car: Vec<f64>,
    /// Standard error of the mean; `None` where fewer than two events cover the lag.
    pub stderr: Vec<Option<f64>>,
    /// Events covering each lag (non-increasing).
    pub n_at_lag: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventDetail {
    pub event_id: String,
    pub timestamp: DateTime<Utc>,
    pub source: String,
    pub classification: EventClassification,
    pub slope: Option<f64>,
    pub n_points: Option<usize>,
    pub lags: usize,
    pub skip_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub group: String,
    /// Buy, Hold, Sell.
    pub curves: Vec<CarCurve>,
    pub details: Vec<EventDetail>,
}

impl StudyResult {
    pub fn curve(&self, class: Stance) -> &CarCurve {
        &self.curves[class.report_index()]
    }
}

/// Incremental mean/variance; the mean of identical inputs is exactly that input.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn stderr(&self) -> Option<f64> {
        (self.n >= 2).then(|| (self.m2 / (self.n - 1) as f64).sqrt() / (self.n as f64).sqrt())
    }
}

fn aggregate(group: &str, class_label: Stance, cars: &[&[f64]]) -> CarCurve {
    let len = cars.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut acc = vec![Welford::default(); len];
    for car in cars {
        for (w, &v) in acc.iter_mut().zip(car.iter()) {
            w.push(v);
        }
    }
    CarCurve {
        group: group.to_string(),
        class_label,
        n_events: cars.len(),
        mean_car: acc.iter().map(|w| w.mean).collect(),
        stderr: acc.iter().map(Welford::stderr).collect(),
        n_at_lag: acc.iter().map(|w| w.n).collect(),
    }
}

/// Runs the full study for one group filter.
pub fn run_event_study(
    events: &[AnnouncementEvent],
    rates: &RateSeries,
    tweets: &[ClassifiedTweet],
    filter: &GroupFilter,
    config: &StudyConfig,
) -> StudyResult {
    let mut sorted: Vec<&ClassifiedTweet> = tweets.iter().filter(|t| filter.allows(t.group)).collect();
    sorted.sort_by_key(|t| t.timestamp);
    let sorted: Vec<ClassifiedTweet> = sorted.into_iter().cloned().collect();
    let mut ordered: Vec<&AnnouncementEvent> = events.iter().collect();
    ordered.sort_by(|a, b| a.event_id.cmp(&b.event_id));

    let tweet_window = Duration::minutes(config.tweet_window_minutes);
    let market_window = Duration::days(i64::from(config.window_days));
    let per_event: Vec<(EventDetail, Option<Vec<f64>>)> = ordered
        .par_iter()
        .map(|event| {
            let lo = sorted.partition_point(|t| t.timestamp < event.timestamp);
            let hi = sorted.partition_point(|t| t.timestamp < event.timestamp + tweet_window);
            let classification =
                classify_event(event, &sorted[lo..hi], filter, config.theta, tweet_window);
            let mut detail = EventDetail {
                event_id: event.event_id.clone(),
                timestamp: event.timestamp,
                source: event.source.as_str().to_string(),
                classification,
                slope: None,
                n_points: None,
                lags: 0,
                skip_reason: None,
            };
            let outcome = fit_market_model(rates, event.timestamp, market_window).and_then(|m| {
                detail.slope = Some(m.slope);
                detail.n_points = Some(m.n_points);
                abnormal_series(rates, &m, &event.event_id, event.timestamp, config.horizon)
            });
            match outcome {
                Ok(series) if series.lags() > 0 => {
                    detail.lags = series.lags();
                    (detail, Some(car_curve(&series.rab)))
                }
                Ok(_) => {
                    detail.skip_reason = Some("no rate points after lag 0".into());
                    (detail, None)
                }
                Err(e) => {
                    log::info!("event {} skipped: {}", event.event_id, e);
                    detail.skip_reason = Some(e.reason());
                    (detail, None)
                }
            }
        })
        .collect();

    let curves = Stance::REPORT_ORDER
        .iter()
        .map(|&class| {
            let cars: Vec<&[f64]> = per_event
                .iter()
                .filter(|(d, _)| d.classification.label == class)
                .filter_map(|(_, car)| car.as_deref())
                .collect();
            aggregate(&filter.label, class, &cars)
        })
        .collect();
    StudyResult {
        group: filter.label.clone(),
        curves,
        details: per_event.into_iter().map(|(d, _)| d).collect(),
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const CAR_CURVES_HEADER: &str = "group,class,lag_min,mean_car,stderr,n_events";
pub const EVENTS_DETAIL_HEADER: &str =
    "group,event_id,timestamp,source,n_buy,n_hold,n_sell,score,label,slope,n_points,lags,skip_reason";

/// `car_curves.csv`: one row per (group, class, lag); `n_events` is the
/// number of events covering that lag.
pub fn write_car_curves(results: &[StudyResult]) -> String {
    let mut out = String::from(CAR_CURVES_HEADER);
    out.push('\n');
    for r in results {
        for c in &r.curves {
            for lag in 0..c.mean_car.len() {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    c.group,
                    c.class_label,
                    lag,
                    c.mean_car[lag],
                    opt(c.stderr[lag]),
                    c.n_at_lag[lag]
                ));
            }
        }
    }
    out
}

/// `events_detail.csv`: one row per (group, event).
pub fn write_event_details(results: &[StudyResult]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EVENTS_DETAIL_HEADER.split(',')).expect("in-memory csv");
    for r in results {
        for d in &r.details {
            let c = &d.classification;
            w.write_record([
                r.group.clone(),
                d.event_id.clone(),
                format_timestamp(d.timestamp),
                d.source.clone(),
                c.n_buy.to_string(),
                c.n_hold.to_string(),
                c.n_sell.to_string(),
                c.score.to_string(),
                c.label.to_string(),
                opt(d.slope),
                opt(d.n_points),
                d.lags.to_string(),
                d.skip_reason.clone().unwrap_or_default(),
            ])
            .expect("in-memory csv");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{EventSource, RatePoint};
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2014, 3, 3, 12, 0, 0).unwrap()
    }

    /// Minute series starting `before` minutes ahead of t0.
    fn series(before: i64, prices: impl IntoIterator<Item = f64>) -> RateSeries {
        let points = prices
            .into_iter()
            .enumerate()
            .map(|(i, price)| RatePoint {
                timestamp: t0() + Duration::minutes(i as i64 - before),
                price,
            })
            .collect();
        RateSeries::new("EURUSD", points).unwrap()
    }

    /// Textbook slope formula with raw sums, written independently of the fit.
    fn ols_oracle(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    fn event(id: &str, at: DateTime<Utc>) -> AnnouncementEvent {
        AnnouncementEvent {
            event_id: id.into(),
            timestamp: at,
            source: EventSource::Ecb,
            description: String::new(),
        }
    }

    #[test]
    fn exact_line_recovers_slope() {
        let rates = series(100, (0..=100).map(|i| 1.1 + 0.001 * i as f64));
        let m = fit_market_model(&rates, t0(), Duration::days(30)).unwrap();
        assert!((m.slope - 0.001).abs() < 1e-12, "{}", m.slope);
        assert_eq!(m.n_points, 101);
        assert_eq!(m.window_end, t0());
    }

    #[test]
    fn constant_price_zero_slope() {
        let rates = series(50, std::iter::repeat_n(1.25, 51));
        let m = fit_market_model(&rates, t0(), Duration::days(30)).unwrap();
        assert_eq!(m.slope, 0.0);
    }

    #[test]
    fn noisy_series_matches_oracle() {
        let mut state = 12345u64;
        let mut noise = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 1e-3
        };
        let prices: Vec<f64> = (0..300).map(|i| 1.3 - 2e-6 * i as f64 + noise()).collect();
        // drop some minutes to mimic gaps
        let points: Vec<RatePoint> = prices
            .iter()
            .enumerate()
            .filter(|(i, _)| i % 17 != 3)
            .map(|(i, &p)| RatePoint {
                timestamp: t0() + Duration::minutes(i as i64 - 299),
                price: p,
            })
            .collect();
        let xs: Vec<f64> = points.iter().map(|p| (p.timestamp - t0()).num_minutes() as f64).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.price).collect();
        let rates = RateSeries::new("EURUSD", points).unwrap();
        let m = fit_market_model(&rates, t0(), Duration::days(30)).unwrap();
        assert!((m.slope - ols_oracle(&xs, &ys)).abs() < 1e-9);
    }

    #[test]
    fn window_excludes_old_and_future_points() {
        // 3 days of history, 1-day window, plus points after the event
        let rates = series(3 * 1440, (0..(3 * 1440 + 10)).map(|i| if i < 2 * 1440 { 5.0 } else { 1.0 + 1e-4 * i as f64 }));
        let m = fit_market_model(&rates, t0(), Duration::days(1)).unwrap();
        assert_eq!(m.n_points, 1441);
        assert!((m.slope - 1e-4).abs() < 1e-10);
    }

    #[test]
    fn too_few_points_skips() {
        let rates = series(0, [1.1, 1.2]);
        assert!(matches!(
            fit_market_model(&rates, t0(), Duration::days(30)),
            Err(StudyError::Skipped(_))
        ));
    }

    fn model(slope: f64) -> MarketModel {
        MarketModel {
            slope,
            intercept: 0.0,
            window_start: t0() - Duration::days(30),
            window_end: t0(),
            n_points: 2,
        }
    }

    #[test]
    fn trend_fully_explained() {
        let rates = series(0, (0..=10).map(|i| 1.10 + 0.0001 * i as f64));
        let s = abnormal_series(&rates, &model(0.0001), "e", t0(), 10).unwrap();
        assert_eq!(s.pab[0], 1.10);
        for p in &s.pab {
            assert!((p - 1.10).abs() < 1e-12);
        }
        assert!(s.rab.iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn definitional_returns() {
        let rates = series(0, [1.0, 1.1, 1.2]);
        let s = abnormal_series(&rates, &model(0.0), "e", t0(), 1440).unwrap();
        assert_eq!(s.rab.len(), 2);
        assert_eq!(s.pab.len(), s.rab.len() + 1);
        assert!((s.rab[0] - (1.1 - 1.0) / 1.0).abs() < 1e-15);
        assert!((s.rab[1] - (1.2 - 1.1) / 1.1).abs() < 1e-15);
    }

    #[test]
    fn horizon_truncates() {
        let rates = series(0, (0..50).map(|i| 1.0 + i as f64 * 1e-3));
        assert_eq!(abnormal_series(&rates, &model(0.0), "e", t0(), 10).unwrap().lags(), 10);
        assert_eq!(abnormal_series(&rates, &model(0.0), "e", t0(), 1440).unwrap().lags(), 49);
    }

    #[test]
    fn lag_zero_must_be_close() {
        let points = vec![
            RatePoint { timestamp: t0() - Duration::minutes(5), price: 1.0 },
            RatePoint { timestamp: t0() + Duration::minutes(2), price: 1.0 },
        ];
        let rates = RateSeries::new("EURUSD", points).unwrap();
        assert!(matches!(
            abnormal_series(&rates, &model(0.0), "e", t0(), 10),
            Err(StudyError::Skipped(_))
        ));
        let points = vec![
            RatePoint { timestamp: t0() + Duration::minutes(1), price: 1.0 },
            RatePoint { timestamp: t0() + Duration::minutes(2), price: 1.1 },
        ];
        let rates = RateSeries::new("EURUSD", points).unwrap();
        assert_eq!(abnormal_series(&rates, &model(0.0), "e", t0(), 10).unwrap().lags(), 1);
    }

    #[test]
    fn zero_abnormal_price_is_degenerate() {
        let rates = series(0, [1.0, 1.0, 1.0]);
        // pab_2 = 1 − 0.5·2 = 0
        assert_eq!(
            abnormal_series(&rates, &model(0.5), "e", t0(), 10),
            Err(StudyError::NumericalDegeneracy { lag: 2 })
        );
    }

    #[test]
    fn weekend_gap_counts_traded_minutes() {
        let mut points = Vec::new();
        for i in 0..3 {
            points.push(RatePoint { timestamp: t0() + Duration::minutes(i), price: 1.0 + 0.01 * i as f64 });
        }
        for i in 0..3 {
            points.push(RatePoint {
                timestamp: t0() + Duration::days(2) + Duration::minutes(i),
                price: 1.03 + 0.01 * i as f64,
            });
        }
        let rates = RateSeries::new("EURUSD", points).unwrap();
        let s = abnormal_series(&rates, &model(0.01), "e", t0(), 1440).unwrap();
        assert_eq!(s.pab.len(), 6);
        assert!(s.rab.iter().all(|r| r.abs() < 1e-12), "{:?}", s.rab);
    }

    #[test]
    fn car_examples() {
        assert_eq!(car_curve(&[0.0; 5]), vec![0.0; 5]);
        let c = car_curve(&[0.1, -0.1]);
        assert_eq!(c[0], 0.1);
        assert!(c[1].abs() < 1e-17);
        assert!(car_curve(&[]).is_empty());
    }

    proptest! {
        #[test]
        fn car_is_prefix_sum(rab in proptest::collection::vec(-0.01f64..0.01, 1..1000)) {
            let car = car_curve(&rab);
            let mut acc = 0.0;
            for (i, r) in rab.iter().enumerate() {
                acc += r;
                prop_assert!((car[i] - acc).abs() < 1e-12);
                if i > 0 {
                    prop_assert!((car[i] - car[i - 1] - rab[i]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn linear_paths_have_zero_car(offset in 0.5f64..2.0, slope in -1e-5f64..1e-5) {
            let rates = series(600, (0..1200).map(|i| offset + slope * i as f64));
            let m = fit_market_model(&rates, t0(), Duration::days(30)).unwrap();
            let s = abnormal_series(&rates, &m, "e", t0(), 500).unwrap();
            prop_assert!(car_curve(&s.rab).iter().all(|c| c.abs() < 1e-10));
        }
    }

    fn ct(min: i64, stance: Stance, group: UserGroup) -> ClassifiedTweet {
        ClassifiedTweet {
            id: format!("{min}{stance}"),
            timestamp: t0() + Duration::minutes(min),
            stance,
            group,
            deleted: false,
        }
    }

    fn counts_fixture(b: usize, h: usize, s: usize) -> Vec<ClassifiedTweet> {
        let g = UserGroup::TradingCompany;
        let mut v = Vec::new();
        v.extend((0..b).map(|i| ct(i as i64, Stance::Buy, g)));
        v.extend((0..h).map(|i| ct(i as i64, Stance::Hold, g)));
        v.extend((0..s).map(|i| ct(i as i64, Stance::Sell, g)));
        v
    }

    #[test]
    fn event_typing_rule() {
        let e = event("E1", t0());
        let f = GroupFilter::single(UserGroup::TradingCompany);
        let w = Duration::minutes(60);
        let c = classify_event(&e, &counts_fixture(10, 3, 2), &f, 0.0, w);
        assert_eq!((c.score, c.label), (8, Stance::Buy));
        let c = classify_event(&e, &[], &f, 0.0, w);
        assert_eq!((c.n_buy, c.n_hold, c.n_sell, c.label), (0, 0, 0, Stance::Hold));
        let c = classify_event(&e, &counts_fixture(5, 0, 5), &f, 0.0, w);
        assert_eq!((c.score, c.label), (0, Stance::Hold));
        let c = classify_event(&e, &counts_fixture(0, 0, 3), &f, 2.5, w);
        assert_eq!(c.label, Stance::Sell);
        let c = classify_event(&e, &counts_fixture(2, 0, 0), &f, 2.5, w);
        assert_eq!(c.label, Stance::Hold);
    }

    #[test]
    fn event_window_is_half_open_and_filtered() {
        let e = event("E1", t0());
        let f = GroupFilter::single(UserGroup::TradingCompany);
        let tweets = vec![
            ct(-1, Stance::Buy, UserGroup::TradingCompany),
            ct(0, Stance::Buy, UserGroup::TradingCompany),
            ct(59, Stance::Buy, UserGroup::TradingCompany),
            ct(60, Stance::Sell, UserGroup::TradingCompany),
            ct(30, Stance::Sell, UserGroup::TradingRobot),
        ];
        let c = classify_event(&e, &tweets, &f, 0.0, Duration::minutes(60));
        assert_eq!((c.n_buy, c.n_hold, c.n_sell), (2, 0, 0));
        let mut rev = tweets.clone();
        rev.reverse();
        assert_eq!(classify_event(&e, &rev, &f, 0.0, Duration::minutes(60)), c);
    }

    #[test]
    fn single_event_curve_equals_event() {
        let rates = series(100, (0..200).map(|i| 1.0 + 1e-4 * ((i * 7919) % 13) as f64));
        let tweets = vec![ct(5, Stance::Buy, UserGroup::TradingCompany)];
        let f = GroupFilter::single(UserGroup::TradingCompany);
        let cfg = StudyConfig { horizon: 50, ..StudyConfig::default() };
        let r = run_event_study(&[event("E1", t0())], &rates, &tweets, &f, &cfg);
        let m = fit_market_model(&rates, t0(), Duration::days(30)).unwrap();
        let s = abnormal_series(&rates, &m, "E1", t0(), 50).unwrap();
        assert_eq!(r.curve(Stance::Buy).mean_car, car_curve(&s.rab));
        assert_eq!(r.curve(Stance::Buy).n_events, 1);
        assert!(r.curve(Stance::Buy).stderr.iter().all(Option::is_none));
        assert_eq!(r.curve(Stance::Sell).n_events, 0);
        assert!(r.curve(Stance::Sell).mean_car.is_empty());
    }

    #[test]
    fn identical_events_mean_exactly() {
        // Same price pattern repeated around each of three events.
        let pattern: Vec<f64> = (0..300).map(|i| 1.2 + 3e-4 * ((i * 31) % 11) as f64).collect();
        let mut points = Vec::new();
        let mut events = Vec::new();
        for e in 0..3 {
            let base = t0() + Duration::days(10 * e);
            for (i, &p) in pattern.iter().enumerate() {
                points.push(RatePoint { timestamp: base + Duration::minutes(i as i64 - 150), price: p });
            }
            events.push(event(&format!("E{e}"), base));
        }
        let rates = RateSeries::new("EURUSD", points).unwrap();
        let f = GroupFilter::all();
        let cfg = StudyConfig { horizon: 100, window_days: 1, ..StudyConfig::default() };
        let r = run_event_study(&events, &rates, &[], &f, &cfg);
        let hold = r.curve(Stance::Hold);
        assert_eq!(hold.n_events, 3);
        let single = run_event_study(&events[..1], &rates, &[], &f, &cfg);
        assert_eq!(hold.mean_car, single.curve(Stance::Hold).mean_car);
    }

    #[test]
    fn truncated_events_drop_out() {
        let rates = series(100, (0..160).map(|i| 1.0 + 1e-5 * i as f64 + 1e-4 * (i % 3) as f64));
        let events = vec![event("E1", t0()), event("E2", t0() + Duration::minutes(30))];
        let r = run_event_study(&events, &rates, &[], &GroupFilter::all(), &StudyConfig { horizon: 50, ..Default::default() });
        let hold = r.curve(Stance::Hold);
        assert_eq!(hold.n_events, 2);
        assert_eq!(hold.mean_car.len(), 50);
        assert!(hold.n_at_lag.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(hold.n_at_lag[0], 2);
        assert_eq!(*hold.n_at_lag.last().unwrap(), 1);
    }

    #[test]
    fn skipped_events_reported() {
        let rates = series(0, [1.0, 1.1, 1.2]);
        let events = vec![event("E1", t0()), event("E2", t0() + Duration::days(3))];
        let r = run_event_study(&events, &rates, &[], &GroupFilter::all(), &StudyConfig::default());
        assert!(r.curves.iter().all(|c| c.n_events == 0));
        assert!(r.details.iter().all(|d| d.skip_reason.is_some()));
        let csv = write_car_curves(std::slice::from_ref(&r));
        assert_eq!(csv, format!("{CAR_CURVES_HEADER}\n"));
        let detail = write_event_details(&[r]);
        assert!(detail.starts_with(EVENTS_DETAIL_HEADER));
        assert_eq!(detail.lines().count(), 3);
    }
}
