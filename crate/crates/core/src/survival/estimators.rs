use serde::{Deserialize, Serialize};

use super::data::{Snapshot, Stratum};
use crate::error::{Error, Result};

/// Right-continuous step function of trial time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    jump_times: Vec<f64>,
    values: Vec<f64>,
    initial_value: f64,
}

impl StepFunction {
    pub fn new(initial_value: f64, jump_times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if jump_times.len() != values.len() {
            return Err(Error::InvalidInput("jump times and values differ in length".into()));
        }
        if jump_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("jump times must be strictly increasing".into()));
        }
        Ok(Self { jump_times, values, initial_value })
    }

    pub fn constant(value: f64) -> Self {
        Self { jump_times: Vec::new(), values: Vec::new(), initial_value: value }
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn initial_value(&self) -> f64 {
        self.initial_value
    }

    /// Value at `s`, including a jump located exactly at `s`.
    pub fn value(&self, s: f64) -> f64 {
        let k = self.jump_times.partition_point(|&x| x <= s);
        if k == 0 {
            self.initial_value
        } else {
            self.values[k - 1]
        }
    }

    /// Left limit at `s`: value strictly before `s`.
    pub fn left_limit(&self, s: f64) -> f64 {
        let k = self.jump_times.partition_point(|&x| x < s);
        if k == 0 {
            self.initial_value
        } else {
            self.values[k - 1]
        }
    }
}

/// Distinct event times with event counts and numbers at risk.
pub(crate) struct EventCounts {
    pub time: f64,
    pub events: usize,
    pub at_risk: usize,
}

pub(crate) fn event_counts(snap: &Snapshot, stratum: Stratum) -> Vec<EventCounts> {
    let recs: Vec<_> = snap.stratum_records(stratum).collect();
    let n = recs.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let t = recs[i].time;
        let mut j = i;
        let mut d = 0;
        while j < n && recs[j].time == t {
            if recs[j].event {
                d += 1;
            }
            j += 1;
        }
        if d > 0 {
            out.push(EventCounts { time: t, events: d, at_risk: n - i });
        }
        i = j;
    }
    out
}

fn check_stratum(snap: &Snapshot, stratum: Stratum) -> Result<()> {
    if let Stratum::Group(g) = stratum {
        if snap.group_count(g) == 0 {
            return Err(Error::EmptyGroup(g.index() as u8));
        }
    }
    Ok(())
}

/// Product-limit estimate of `S(s) = P[T >= s]` after the jump at each event time.
///
/// Tied events share the risk set counted before any removal at that time.
pub fn kaplan_meier(snap: &Snapshot, stratum: Stratum) -> Result<StepFunction> {
    check_stratum(snap, stratum)?;
    let counts = event_counts(snap, stratum);
    let mut times = Vec::with_capacity(counts.len());
    let mut values = Vec::with_capacity(counts.len());
    let mut s = 1.0;
    for c in &counts {
        s *= 1.0 - c.events as f64 / c.at_risk as f64;
        times.push(c.time);
        values.push(s);
    }
    Ok(StepFunction { jump_times: times, values, initial_value: 1.0 })
}

/// Nelson-Aalen cumulative hazard: jumps of `d / Y` at each event time.
pub fn nelson_aalen(snap: &Snapshot, stratum: Stratum) -> Result<StepFunction> {
    check_stratum(snap, stratum)?;
    let counts = event_counts(snap, stratum);
    let mut times = Vec::with_capacity(counts.len());
    let mut values = Vec::with_capacity(counts.len());
    let mut a = 0.0;
    for c in &counts {
        a += c.events as f64 / c.at_risk as f64;
        times.push(c.time);
        values.push(a);
    }
    Ok(StepFunction { jump_times: times, values, initial_value: 0.0 })
}
