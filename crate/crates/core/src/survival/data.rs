use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Treatment arm. `Control` is coded 0 and `Treatment` 1 in every file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    Control,
    Treatment,
}

impl Group {
    pub fn index(self) -> usize {
        match self {
            Group::Control => 0,
            Group::Treatment => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Group::Control),
            1 => Some(Group::Treatment),
            _ => None,
        }
    }

    pub const BOTH: [Group; 2] = [Group::Control, Group::Treatment];
}

/// Which subjects an estimator runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stratum {
    Pooled,
    Group(Group),
}

impl Stratum {
    fn admits(self, group: Group) -> bool {
        match self {
            Stratum::Pooled => true,
            Stratum::Group(g) => g == group,
        }
    }
}

/// One trial participant.
///
/// `entry` is calendar time, `event_time` and `dropout_time` are trial times measured
/// from entry. Either may be `+∞` (never observed).
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub entry: f64,
    pub event_time: f64,
    pub dropout_time: f64,
    pub group: Group,
}

impl Subject {
    pub fn new(id: impl Into<String>, entry: f64, event_time: f64, dropout_time: f64, group: Group) -> Result<Self> {
        if !(entry >= 0.0 && entry.is_finite()) {
            return Err(Error::InvalidInput(format!("entry must be finite and >= 0, got {entry}")));
        }
        if !(event_time > 0.0) {
            return Err(Error::InvalidInput(format!("event time must be > 0, got {event_time}")));
        }
        if !(dropout_time > 0.0) {
            return Err(Error::InvalidInput(format!("dropout time must be > 0, got {dropout_time}")));
        }
        Ok(Self { id: id.into(), entry, event_time, dropout_time, group })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    subjects: Vec<Subject>,
}

impl SurvivalDataset {
    pub fn new(subjects: Vec<Subject>) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::InvalidInput("dataset must contain at least one subject".into()));
        }
        Ok(Self { subjects })
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn group_size(&self, group: Group) -> usize {
        self.subjects.iter().filter(|s| s.group == group).count()
    }

    /// Calendar time after which no observation changes any more.
    pub fn completion_time(&self) -> f64 {
        self.subjects
            .iter()
            .map(|s| s.entry + s.event_time.min(s.dropout_time))
            .fold(0.0, f64::max)
    }

    /// The data as observable at calendar time `t`.
    pub fn snapshot(&self, t: f64) -> Snapshot {
        Snapshot::new(self, t)
    }
}

/// Observation for one subject at a given calendar time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    /// Index of the subject in its dataset; stable across snapshots.
    pub subject: usize,
    pub time: f64,
    pub event: bool,
    pub group: Group,
}

/// A dataset administratively censored at a calendar time.
///
/// Records are kept sorted by observed time, events before censorings at ties.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    calendar_time: f64,
    n_total: usize,
    records: Vec<Record>,
}

impl Snapshot {
    fn new(dataset: &SurvivalDataset, t: f64) -> Self {
        let t = t.max(0.0);
        let mut records: Vec<Record> = dataset
            .subjects
            .iter()
            .enumerate()
            .filter(|(_, s)| s.entry <= t)
            .map(|(i, s)| {
                let admin = (t - s.entry).max(0.0);
                let censor = s.dropout_time.min(admin);
                let event = s.event_time <= censor;
                let time = if event { s.event_time } else { censor };
                Record { subject: i, time, event, group: s.group }
            })
            .collect();
        records.sort_by(record_order);
        Self { calendar_time: t, n_total: dataset.len(), records }
    }

    /// Build a snapshot directly from already-censored observations.
    pub fn from_records(calendar_time: f64, n_total: usize, mut records: Vec<Record>) -> Result<Self> {
        if records.iter().any(|r| !(r.time >= 0.0) || !r.time.is_finite()) {
            return Err(Error::InvalidInput("observed times must be finite and >= 0".into()));
        }
        if records.iter().any(|r| r.subject >= n_total) {
            return Err(Error::InvalidInput("subject index exceeds dataset size".into()));
        }
        records.sort_by(record_order);
        Ok(Self { calendar_time, n_total, records })
    }

    pub fn calendar_time(&self) -> f64 {
        self.calendar_time
    }

    /// Size of the underlying dataset (including subjects not yet enrolled).
    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    pub fn group_count(&self, group: Group) -> usize {
        self.records.iter().filter(|r| r.group == group).count()
    }

    pub fn has_both_groups(&self) -> bool {
        self.group_count(Group::Control) > 0 && self.group_count(Group::Treatment) > 0
    }

    /// Number at risk `Y(t, s)`: subjects in the stratum with observed time `>= s`.
    pub fn at_risk(&self, s: f64, stratum: Stratum) -> usize {
        let start = self.records.partition_point(|r| r.time < s);
        self.records[start..].iter().filter(|r| stratum.admits(r.group)).count()
    }

    /// `(time, event)` pairs of one group, in time order.
    pub fn group_observations(&self, group: Group) -> Vec<(f64, bool)> {
        self.records.iter().filter(|r| r.group == group).map(|r| (r.time, r.event)).collect()
    }

    pub(crate) fn stratum_records(&self, stratum: Stratum) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| stratum.admits(r.group))
    }
}

fn record_order(a: &Record, b: &Record) -> Ordering {
    a.time
        .total_cmp(&b.time)
        .then_with(|| b.event.cmp(&a.event))
        .then_with(|| a.subject.cmp(&b.subject))
}
