use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Datelike};

use super::index::{EntitySet, StreamIndex};
use super::{mean_std, ColumnSpec, FeatureError, FeatureGroup, FeaturePart};
use crate::graph_core::Block;

const SECS_PER_DAY: u64 = 86_400;

/// Monday-based week number; day 0 (1970-01-01) was a Thursday.
pub fn week_of_day(day: i64) -> i64 {
    (day + 3).div_euclid(7)
}

fn month_and_year(timestamp: u64) -> (i64, i64) {
    let dt = DateTime::from_timestamp(timestamp as i64, 0).expect("timestamp in range");
    let year = dt.year() as i64;
    (year * 12 + dt.month0() as i64, year)
}

const COLUMNS: [(&str, &str); 16] = [
    ("temporal_active_days", "distinct days with any activity"),
    ("temporal_active_weeks", "distinct Monday-based weeks with activity"),
    ("temporal_active_months", "distinct calendar months with activity"),
    ("temporal_active_years", "distinct calendar years with activity"),
    ("temporal_receiving_days", "days on which the entity received"),
    ("temporal_sending_days", "days on which the entity spent"),
    ("temporal_both_days", "days with both receiving and spending"),
    ("temporal_span_days", "last minus first active day, plus one"),
    ("temporal_duration_days", "seconds between first and last activity, in days"),
    ("temporal_active_day_ratio", "active days over span days"),
    ("temporal_counterparties_week_mean", "mean distinct counterparties per active week"),
    ("temporal_counterparties_week_std", "std of distinct counterparties per active week"),
    ("temporal_counterparties_month_mean", "mean distinct counterparties per active month"),
    ("temporal_counterparties_month_std", "std of distinct counterparties per active month"),
    ("temporal_counterparties_year_mean", "mean distinct counterparties per active year"),
    ("temporal_counterparties_year_std", "std of distinct counterparties per active year"),
];

#[derive(Debug, Default)]
struct Activity {
    first: Option<u64>,
    last: u64,
    receiving: BTreeSet<i64>,
    sending: BTreeSet<i64>,
    weeks: BTreeMap<i64, BTreeSet<usize>>,
    months: BTreeMap<i64, BTreeSet<usize>>,
    years: BTreeMap<i64, BTreeSet<usize>>,
}

pub fn extract_temporal_features(blocks: &[Block], entities: &EntitySet) -> Result<FeaturePart, FeatureError> {
    let index = StreamIndex::build(blocks, entities)?;
    Ok(from_index(&index, entities))
}

pub(crate) fn from_index(index: &StreamIndex, entities: &EntitySet) -> FeaturePart {
    let mut acts: Vec<Activity> = (0..entities.len()).map(|_| Activity::default()).collect();
    for t in &index.txs {
        let day = (t.timestamp / SECS_PER_DAY) as i64;
        let week = week_of_day(day);
        let (month, year) = month_and_year(t.timestamp);
        let mut touch = |e: usize, receiving: bool, others: &mut dyn Iterator<Item = usize>| {
            let a = &mut acts[e];
            a.first.get_or_insert(t.timestamp);
            a.last = t.timestamp;
            if receiving {
                a.receiving.insert(day);
            } else {
                a.sending.insert(day);
            }
            let others: Vec<usize> = others.filter(|&o| o != e).collect();
            for (buckets, key) in [(&mut a.weeks, week), (&mut a.months, month), (&mut a.years, year)] {
                buckets.entry(key).or_default().extend(others.iter().copied());
            }
        };
        for &(e, _) in &t.receivers {
            touch(e, true, &mut t.senders.iter().map(|s| s.0));
        }
        for &(e, _) in &t.senders {
            touch(e, false, &mut t.receivers.iter().map(|r| r.0));
        }
    }

    let rows = acts
        .iter()
        .map(|a| {
            let Some(first) = a.first else {
                return vec![0.0; COLUMNS.len()];
            };
            let days: BTreeSet<i64> = a.receiving.union(&a.sending).copied().collect();
            let both = a.receiving.intersection(&a.sending).count();
            let first_day = (first / SECS_PER_DAY) as i64;
            let last_day = (a.last / SECS_PER_DAY) as i64;
            let span = (last_day - first_day + 1) as f64;
            let per = |m: &BTreeMap<i64, BTreeSet<usize>>| {
                mean_std(&m.values().map(|s| s.len() as f64).collect::<Vec<_>>())
            };
            let (wm, ws) = per(&a.weeks);
            let (mm, ms) = per(&a.months);
            let (ym, ys) = per(&a.years);
            vec![
                days.len() as f64,
                a.weeks.len() as f64,
                a.months.len() as f64,
                a.years.len() as f64,
                a.receiving.len() as f64,
                a.sending.len() as f64,
                both as f64,
                span,
                (a.last - first) as f64 / SECS_PER_DAY as f64,
                days.len() as f64 / span,
                wm,
                ws,
                mm,
                ms,
                ym,
                ys,
            ]
        })
        .collect();
    FeaturePart {
        group: FeatureGroup::Temporal,
        entity_ids: entities.ids.clone(),
        columns: COLUMNS.iter().map(|(c, d)| ColumnSpec::new(*c, FeatureGroup::Temporal, *d)).collect(),
        rows,
    }
}
