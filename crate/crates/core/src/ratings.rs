//! Two-agency rating timelines, pessimistic combination, and 1-year-forward
//! downgrade labels.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::key::RowKey;

#[derive(Debug, Error)]
pub enum RatingsError {
    #[error("both agency ratings missing")]
    BothMissing,
    #[error("no rating at or before {date} for {pid}")]
    NoCurrentRating { pid: String, date: NaiveDate },
    #[error("no timeline for pid `{0}`")]
    UnknownPid(String),
    #[error("unknown rating symbol `{symbol}` for agency {agency}")]
    UnknownSymbol { agency: &'static str, symbol: String },
    #[error("notch {0} outside the 1..=21 scale")]
    NotchOutOfRange(u8),
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// One step on the unified 21-notch scale: 1 is the best quality (Aaa/AAA),
/// 21 the worst (C/D). Larger is worse.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Notch(u8);

impl Notch {
    pub fn new(value: u8) -> Result<Self, RatingsError> {
        if (1..=21).contains(&value) {
            Ok(Self(value))
        } else {
            Err(RatingsError::NotchOutOfRange(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl std::fmt::Display for Notch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Symbol maps from each agency's long-term scale onto the unified notches.
/// The default is the standard correspondence; alternative maps can be
/// loaded from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NotchScale {
    pub moodys: BTreeMap<String, u8>,
    pub sp: BTreeMap<String, u8>,
}

const MOODYS_SYMBOLS: [&str; 21] = [
    "Aaa", "Aa1", "Aa2", "Aa3", "A1", "A2", "A3", "Baa1", "Baa2", "Baa3", "Ba1", "Ba2", "Ba3",
    "B1", "B2", "B3", "Caa1", "Caa2", "Caa3", "Ca", "C",
];

const SP_SYMBOLS: [&str; 21] = [
    "AAA", "AA+", "AA", "AA-", "A+", "A", "A-", "BBB+", "BBB", "BBB-", "BB+", "BB", "BB-", "B+",
    "B", "B-", "CCC+", "CCC", "CCC-", "CC", "C",
];

impl Default for NotchScale {
    fn default() -> Self {
        let moodys =
            MOODYS_SYMBOLS.iter().enumerate().map(|(i, s)| (s.to_string(), i as u8 + 1)).collect();
        let mut sp: BTreeMap<String, u8> =
            SP_SYMBOLS.iter().enumerate().map(|(i, s)| (s.to_string(), i as u8 + 1)).collect();
        // S&P default shares the worst notch with C
        sp.insert("D".to_string(), 21);
        sp.insert("SD".to_string(), 21);
        Self { moodys, sp }
    }
}

impl NotchScale {
    pub fn load_json(path: impl AsRef<Path>) -> Result<Self, RatingsError> {
        let data = std::fs::read_to_string(path)?;
        serde_json::from_str(&data)
            .map_err(|e| RatingsError::BadRow { row: 0, message: e.to_string() })
    }

    pub fn moodys_notch(&self, symbol: &str) -> Result<Notch, RatingsError> {
        self.moodys
            .get(symbol)
            .copied()
            .map(Notch)
            .ok_or_else(|| RatingsError::UnknownSymbol { agency: "moodys", symbol: symbol.into() })
    }

    pub fn sp_notch(&self, symbol: &str) -> Result<Notch, RatingsError> {
        self.sp
            .get(symbol)
            .copied()
            .map(Notch)
            .ok_or_else(|| RatingsError::UnknownSymbol { agency: "sp", symbol: symbol.into() })
    }

    /// Canonical symbol for a notch (first symbol mapping to it, in map
    /// order). Used when synthesizing rating files.
    pub fn moodys_symbol(&self, notch: Notch) -> Option<&str> {
        MOODYS_SYMBOLS
            .iter()
            .find(|s| self.moodys.get(**s) == Some(&notch.value()))
            .copied()
            .or_else(|| {
                self.moodys.iter().find(|(_, v)| **v == notch.value()).map(|(k, _)| k.as_str())
            })
    }

    pub fn sp_symbol(&self, notch: Notch) -> Option<&str> {
        SP_SYMBOLS
            .iter()
            .find(|s| self.sp.get(**s) == Some(&notch.value()))
            .copied()
            .or_else(|| self.sp.iter().find(|(_, v)| **v == notch.value()).map(|(k, _)| k.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingObservation {
    pub pid: String,
    pub date: NaiveDate,
    pub moodys: Option<Notch>,
    pub sp: Option<Notch>,
}

impl RatingObservation {
    /// Pessimistic combination of the two agencies: the worse (larger) notch.
    pub fn worst(&self) -> Result<Notch, RatingsError> {
        worst_rating(self.moodys, self.sp)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DowngradeLabel {
    pub pid: String,
    pub date: NaiveDate,
    pub current: Notch,
    pub worst_future: Notch,
    pub label: u8,
}

/// Worse of the two agency notches; a single present value passes through.
pub fn worst_rating(moodys: Option<Notch>, sp: Option<Notch>) -> Result<Notch, RatingsError> {
    match (moodys, sp) {
        (Some(m), Some(s)) => Ok(m.max(s)),
        (Some(m), None) => Ok(m),
        (None, Some(s)) => Ok(s),
        (None, None) => Err(RatingsError::BothMissing),
    }
}

/// Label one (pid, date): current rating is the most recent observation at or
/// before `date`; the label is 1 iff some observation within
/// (date, date + horizon_days] is worse. No future observation means no
/// downgrade (label 0).
pub fn label_downgrade(
    timeline: &[RatingObservation],
    date: NaiveDate,
    horizon_days: u64,
) -> Result<DowngradeLabel, RatingsError> {
    let pid = timeline
        .first()
        .map(|o| o.pid.clone())
        .ok_or_else(|| RatingsError::NoCurrentRating { pid: String::new(), date })?;
    let current = timeline
        .iter()
        .filter(|o| o.date <= date)
        .next_back()
        .ok_or_else(|| RatingsError::NoCurrentRating { pid: pid.clone(), date })?
        .worst()?;
    let end = date
        .checked_add_days(Days::new(horizon_days))
        .unwrap_or(NaiveDate::MAX);
    let mut worst_future = current;
    for obs in timeline.iter().filter(|o| o.date > date && o.date <= end) {
        worst_future = worst_future.max(obs.worst()?);
    }
    let label = u8::from(worst_future > current);
    Ok(DowngradeLabel { pid, date, current, worst_future, label })
}

/// Count of labels per calendar year, the corpus-level downgrade summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct YearLabelCount {
    pub year: i32,
    pub label: u8,
    pub count: usize,
}

/// Label every requested (pid, date) observation and tally counts by
/// (year, label).
pub fn build_label_table(
    timelines: &BTreeMap<String, Vec<RatingObservation>>,
    observation_dates: &[RowKey],
    horizon_days: u64,
) -> Result<(Vec<DowngradeLabel>, Vec<YearLabelCount>), RatingsError> {
    let mut labels = Vec::with_capacity(observation_dates.len());
    for key in observation_dates {
        let timeline =
            timelines.get(&key.pid).ok_or_else(|| RatingsError::UnknownPid(key.pid.clone()))?;
        labels.push(label_downgrade(timeline, key.date, horizon_days)?);
    }
    let mut counts: BTreeMap<(u8, i32), usize> = BTreeMap::new();
    for l in &labels {
        *counts.entry((l.label, l.date.year())).or_insert(0) += 1;
    }
    let summary = counts
        .into_iter()
        .map(|((label, year), count)| YearLabelCount { year, label, count })
        .collect();
    Ok((labels, summary))
}

/// Read `pid,date,moodys_symbol,sp_symbol` rows (empty cell = missing) into
/// per-company timelines sorted by date.
pub fn read_ratings_csv(
    path: impl AsRef<Path>,
    scale: &NotchScale,
) -> Result<BTreeMap<String, Vec<RatingObservation>>, RatingsError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut timelines: BTreeMap<String, Vec<RatingObservation>> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2; // header is row 1
        let get = |idx: usize| record.get(idx).unwrap_or("").trim().to_string();
        let pid = get(0);
        if pid.is_empty() {
            return Err(RatingsError::BadRow { row, message: "empty pid".into() });
        }
        let date = get(1)
            .parse::<NaiveDate>()
            .map_err(|e| RatingsError::BadRow { row, message: format!("bad date: {e}") })?;
        let moodys_sym = get(2);
        let sp_sym = get(3);
        let moodys =
            if moodys_sym.is_empty() { None } else { Some(scale.moodys_notch(&moodys_sym)?) };
        let sp = if sp_sym.is_empty() { None } else { Some(scale.sp_notch(&sp_sym)?) };
        if moodys.is_none() && sp.is_none() {
            return Err(RatingsError::BadRow { row, message: "both agency cells empty".into() });
        }
        timelines.entry(pid.clone()).or_default().push(RatingObservation {
            pid,
            date,
            moodys,
            sp,
        });
    }
    for timeline in timelines.values_mut() {
        timeline.sort_by_key(|o| o.date);
    }
    Ok(timelines)
}

pub fn write_labels_csv(path: impl AsRef<Path>, labels: &[DowngradeLabel]) -> Result<(), RatingsError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "pid,date,current_notch,worst_future_notch,label")?;
    for l in labels {
        writeln!(w, "{},{},{},{},{}", l.pid, l.date, l.current, l.worst_future, l.label)?;
    }
    Ok(())
}

pub fn write_label_summary_csv(
    path: impl AsRef<Path>,
    summary: &[YearLabelCount],
) -> Result<(), RatingsError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "year,label,count")?;
    for s in summary {
        writeln!(w, "{},{},{}", s.year, s.label, s.count)?;
    }
    Ok(())
}

/// Read a labels CSV back into a key -> label map for feature joins.
pub fn read_labels_csv(path: impl AsRef<Path>) -> Result<BTreeMap<RowKey, u8>, RatingsError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2;
        let pid = record.get(0).unwrap_or("").to_string();
        let date = record
            .get(1)
            .unwrap_or("")
            .parse::<NaiveDate>()
            .map_err(|e| RatingsError::BadRow { row, message: format!("bad date: {e}") })?;
        let label: u8 = record
            .get(record.len() - 1)
            .unwrap_or("")
            .parse()
            .map_err(|e| RatingsError::BadRow { row, message: format!("bad label: {e}") })?;
        out.insert(RowKey::new(pid, date), label);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(v: u8) -> Notch {
        Notch::new(v).unwrap()
    }

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn obs(day: NaiveDate, worst: u8) -> RatingObservation {
        RatingObservation { pid: "p1".into(), date: day, moodys: Some(n(worst)), sp: None }
    }

    #[test]
    fn worst_rating_examples() {
        assert_eq!(worst_rating(Some(n(7)), Some(n(7))).unwrap(), n(7));
        // B vs a CCC-region notch: the worse (larger) one wins
        assert_eq!(worst_rating(Some(n(15)), Some(n(17))).unwrap(), n(17));
        assert_eq!(worst_rating(None, Some(n(5))).unwrap(), n(5));
        assert!(matches!(worst_rating(None, None), Err(RatingsError::BothMissing)));
    }

    #[test]
    fn worst_rating_is_commutative_idempotent_monotone() {
        for a in 1..=21u8 {
            assert_eq!(worst_rating(Some(n(a)), Some(n(a))).unwrap(), n(a));
            for b in 1..=21u8 {
                assert_eq!(
                    worst_rating(Some(n(a)), Some(n(b))).unwrap(),
                    worst_rating(Some(n(b)), Some(n(a))).unwrap()
                );
                if b < 21 {
                    assert!(
                        worst_rating(Some(n(a)), Some(n(b + 1))).unwrap()
                            >= worst_rating(Some(n(a)), Some(n(b))).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn constant_timeline_is_not_a_downgrade() {
        let t = vec![obs(d(2019, 1, 1), 10), obs(d(2019, 3, 1), 10), obs(d(2019, 6, 1), 10)];
        let l = label_downgrade(&t, d(2019, 3, 1), 365).unwrap();
        assert_eq!(l.label, 0);
        assert_eq!(l.current, n(10));
        assert_eq!(l.worst_future, n(10));
    }

    #[test]
    fn b_to_ccc_within_horizon_is_a_downgrade() {
        let t = vec![obs(d(2019, 1, 1), 15), obs(d(2019, 1, 31), 17)];
        let l = label_downgrade(&t, d(2019, 1, 1), 365).unwrap();
        assert_eq!(l.label, 1);
        assert_eq!(l.current, n(15));
        assert_eq!(l.worst_future, n(17));
    }

    #[test]
    fn upgrades_only_is_label_zero() {
        let t = vec![obs(d(2019, 1, 1), 10), obs(d(2019, 2, 1), 9), obs(d(2019, 5, 1), 8)];
        let l = label_downgrade(&t, d(2019, 1, 1), 365).unwrap();
        assert_eq!(l.label, 0);
        // worst over the window never exceeds current
        assert_eq!(l.worst_future, n(10));
    }

    #[test]
    fn label_is_monotone_in_horizon_and_zero_at_zero() {
        let t = vec![obs(d(2019, 1, 1), 10), obs(d(2019, 9, 1), 12)];
        let date = d(2019, 1, 15);
        assert_eq!(label_downgrade(&t, date, 0).unwrap().label, 0);
        let mut seen_one = false;
        for h in [30u64, 120, 240, 365, 720] {
            let l = label_downgrade(&t, date, h).unwrap().label;
            if seen_one {
                assert_eq!(l, 1, "label must stay 1 as horizon grows");
            }
            seen_one |= l == 1;
        }
        assert!(seen_one);
    }

    #[test]
    fn missing_current_rating_errors() {
        let t = vec![obs(d(2019, 6, 1), 10)];
        assert!(matches!(
            label_downgrade(&t, d(2019, 1, 1), 365),
            Err(RatingsError::NoCurrentRating { .. })
        ));
    }

    #[test]
    fn rating_at_observation_date_counts_as_current() {
        let t = vec![obs(d(2019, 1, 1), 10), obs(d(2019, 2, 1), 12)];
        let l = label_downgrade(&t, d(2019, 2, 1), 365).unwrap();
        // the worse rating is already current on its own date
        assert_eq!(l.current, n(12));
        assert_eq!(l.label, 0);
    }

    #[test]
    fn build_label_table_single_row() {
        let mut timelines = BTreeMap::new();
        timelines.insert("p1".to_string(), vec![obs(d(2019, 1, 1), 10)]);
        let keys = vec![RowKey::new("p1", d(2019, 1, 2))];
        let (labels, summary) = build_label_table(&timelines, &keys, 365).unwrap();
        assert_eq!(labels.len(), 1);
        assert_eq!(labels[0].label, 0);
        assert_eq!(summary, vec![YearLabelCount { year: 2019, label: 0, count: 1 }]);
    }

    #[test]
    fn default_scale_maps_the_paper_example() {
        let scale = NotchScale::default();
        let b = scale.sp_notch("B").unwrap();
        let ccc = scale.sp_notch("CCC").unwrap();
        assert!(ccc > b, "CCC must be worse than B");
        assert_eq!(scale.moodys_notch("Aaa").unwrap(), n(1));
        assert_eq!(scale.sp_notch("AAA").unwrap(), n(1));
        assert_eq!(scale.moodys_notch("C").unwrap(), n(21));
        assert_eq!(scale.sp_notch("D").unwrap(), n(21));
        // symbol round-trip for every notch
        for v in 1..=21u8 {
            let notch = n(v);
            let ms = scale.moodys_symbol(notch).unwrap();
            assert_eq!(scale.moodys_notch(ms).unwrap(), notch);
            let ss = scale.sp_symbol(notch).unwrap();
            assert_eq!(scale.sp_notch(ss).unwrap(), notch);
        }
    }

    #[test]
    fn ratings_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ratings.csv");
        std::fs::write(
            &path,
            "pid,date,moodys_symbol,sp_symbol\np1,2019-01-01,B2,\np1,2019-03-01,,CCC\n",
        )
        .unwrap();
        let scale = NotchScale::default();
        let timelines = read_ratings_csv(&path, &scale).unwrap();
        let t = &timelines["p1"];
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].moodys, Some(n(15)));
        assert_eq!(t[0].sp, None);
        assert_eq!(t[1].sp, Some(n(18)));
        let l = label_downgrade(t, d(2019, 1, 1), 365).unwrap();
        assert_eq!(l.label, 1);
    }
}
