//! Individual patient data in CSV form.
//!
//! Header `id,time,event,group[,entry]`. Rows without `entry` get their recruitment
//! date imputed: censored rows are assumed to have been followed until the final
//! analysis, uncensored rows get a uniform entry on `[0, t2 - time]`.

use std::io::Read;
use std::path::Path;

use rand::Rng;

use super::data::{Group, Subject, SurvivalDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IpdRecord {
    pub id: String,
    pub time: f64,
    pub event: bool,
    pub group: Group,
    pub entry: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ipd {
    pub records: Vec<IpdRecord>,
}

impl Ipd {
    pub fn has_entries(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.entry.is_some())
    }

    pub fn max_time(&self) -> f64 {
        self.records.iter().map(|r| r.time).fold(0.0, f64::max)
    }

    /// Dataset using the recorded entry column. Censored rows become dropouts at their
    /// observed time, which reproduces the final data at any later calendar time.
    pub fn to_dataset_with_entries(&self) -> Result<SurvivalDataset> {
        let subjects = self
            .records
            .iter()
            .map(|r| {
                let entry = r.entry.ok_or_else(|| {
                    Error::InvalidInput(format!("record {} has no entry time", r.id))
                })?;
                to_subject(r, entry)
            })
            .collect::<Result<Vec<_>>>()?;
        SurvivalDataset::new(subjects)
    }

    /// Uses the entry column when present, otherwise imputes recruitment dates.
    pub fn to_dataset<R: Rng + ?Sized>(&self, t2: f64, rng: &mut R) -> Result<SurvivalDataset> {
        if self.has_entries() {
            self.to_dataset_with_entries()
        } else {
            impute_recruitment(self, t2, rng)
        }
    }
}

fn to_subject(r: &IpdRecord, entry: f64) -> Result<Subject> {
    if r.event {
        Subject::new(r.id.clone(), entry, r.time, f64::INFINITY, r.group)
    } else if r.time > 0.0 {
        Subject::new(r.id.clone(), entry, f64::INFINITY, r.time, r.group)
    } else {
        // Censored at time zero: enrolled at the analysis date, no follow-up yet.
        Subject::new(r.id.clone(), entry, f64::INFINITY, f64::INFINITY, r.group)
    }
}

/// Impute entry dates from final-analysis data observed at calendar time `t2`.
pub fn impute_recruitment<R: Rng + ?Sized>(ipd: &Ipd, t2: f64, rng: &mut R) -> Result<SurvivalDataset> {
    if !(t2 >= ipd.max_time()) {
        return Err(Error::InvalidInput(format!(
            "final analysis time {t2} precedes the largest observed time {}",
            ipd.max_time()
        )));
    }
    let subjects = ipd
        .records
        .iter()
        .map(|r| {
            let entry = if r.event {
                rng.gen::<f64>() * (t2 - r.time)
            } else {
                t2 - r.time
            };
            to_subject(r, entry)
        })
        .collect::<Result<Vec<_>>>()?;
    SurvivalDataset::new(subjects)
}

pub fn read_ipd_file(path: impl AsRef<Path>) -> Result<Ipd> {
    let file = std::fs::File::open(path)?;
    read_ipd(file)
}

pub fn read_ipd<R: Read>(reader: R) -> Result<Ipd> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (id_c, time_c, event_c, group_c) = match (col("id"), col("time"), col("event"), col("group")) {
        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
        _ => {
            return Err(Error::Parse {
                row: 1,
                message: "header must contain id,time,event,group".into(),
            })
        }
    };
    let entry_c = col("entry");
    if let Some(unknown) = headers
        .iter()
        .find(|h| !["id", "time", "event", "group", "entry"].contains(h))
    {
        return Err(Error::Parse { row: 1, message: format!("unknown column '{unknown}'") });
    }

    let mut records = Vec::new();
    for result in rdr.records() {
        let rec = result?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |c: usize| rec.get(c).unwrap_or("");
        let parse_err = |message: String| Error::Parse { row, message };

        let time: f64 = field(time_c)
            .parse()
            .map_err(|_| parse_err(format!("time '{}' is not a number", field(time_c))))?;
        if !(time >= 0.0) || !time.is_finite() {
            return Err(parse_err(format!("time must be finite and >= 0, got {time}")));
        }
        let event = match field(event_c) {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(format!("event must be 0 or 1, got '{other}'"))),
        };
        if event && time == 0.0 {
            return Err(parse_err("event time must be > 0".into()));
        }
        let group = match field(group_c) {
            "0" => Group::Control,
            "1" => Group::Treatment,
            other => return Err(parse_err(format!("group must be 0 or 1, got '{other}'"))),
        };
        let entry = match entry_c.map(field) {
            None | Some("") => None,
            Some(s) => {
                let e: f64 = s.parse().map_err(|_| parse_err(format!("entry '{s}' is not a number")))?;
                if !(e >= 0.0) || !e.is_finite() {
                    return Err(parse_err(format!("entry must be finite and >= 0, got {e}")));
                }
                Some(e)
            }
        };
        records.push(IpdRecord { id: field(id_c).to_string(), time, event, group, entry });
    }
    if records.is_empty() {
        return Err(Error::Parse { row: 1, message: "no data rows".into() });
    }
    Ok(Ipd { records })
}
