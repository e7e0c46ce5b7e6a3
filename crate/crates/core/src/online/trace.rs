use std::collections::BTreeMap;
use std::fmt;

use super::StepRecord;
use crate::error::{Error, Result};
use crate::model::UserId;
use crate::rational::{self, Rational};

/// Version tag written as the first (comment) line of trace CSV files.
pub const TRACE_SCHEMA: &str = "crowdsense-trace/1";

const HEADER: [&str; 7] = ["t", "stage", "threshold", "stage_budget", "committed", "winners", "payments"];

/// Cumulative mechanism state after step `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRow {
    pub t: u32,
    pub stage: u32,
    pub threshold: Rational,
    pub stage_budget: Rational,
    pub committed: Rational,
    /// Ascending.
    pub winners: Vec<UserId>,
    pub payments: BTreeMap<UserId, Rational>,
}

impl TraceRow {
    pub fn from_steps(steps: &[StepRecord]) -> Vec<TraceRow> {
        let mut payments = BTreeMap::new();
        steps
            .iter()
            .map(|step| {
                for update in &step.updates {
                    payments.insert(update.user, update.payment.clone());
                }
                TraceRow {
                    t: step.t,
                    stage: step.stage,
                    threshold: step.threshold.clone(),
                    stage_budget: step.stage_budget.clone(),
                    committed: step.committed.clone(),
                    winners: payments.keys().copied().collect(),
                    payments: payments.clone(),
                }
            })
            .collect()
    }

    fn fields(&self) -> [String; 7] {
        let winners = self.winners.iter().map(|w| w.0.to_string()).collect::<Vec<_>>().join(";");
        let payments = self
            .payments
            .iter()
            .map(|(id, p)| format!("{}:{}", id.0, rational::format(p)))
            .collect::<Vec<_>>()
            .join(";");
        [
            self.t.to_string(),
            self.stage.to_string(),
            rational::format(&self.threshold),
            rational::format(&self.stage_budget),
            rational::format(&self.committed),
            winners,
            payments,
        ]
    }
}

pub fn render_trace_csv(rows: &[TraceRow]) -> Result<String> {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    writer.write_record(HEADER)?;
    for row in rows {
        writer.write_record(row.fields())?;
    }
    let body = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(format!("# {TRACE_SCHEMA}\n{}", String::from_utf8_lossy(&body)))
}

fn parse_id(text: &str, line: usize) -> Result<UserId> {
    text.trim().parse().map(UserId).map_err(|_| Error::Config { line, message: format!("bad user id '{text}'") })
}

fn split_list(text: &str) -> impl Iterator<Item = &str> {
    text.split(';').map(str::trim).filter(|s| !s.is_empty())
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>> {
    let first = text.lines().next().unwrap_or_default();
    if first.trim() != format!("# {TRACE_SCHEMA}") {
        return Err(Error::Config { line: 1, message: format!("expected schema line '# {TRACE_SCHEMA}'") });
    }
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Config { line: 2, message: format!("expected columns {}", HEADER.join(",")) });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |what: &str| Error::Config { line, message: format!("bad {what}") };
        let number = |k: usize, what: &str| record[k].trim().parse::<u32>().map_err(|_| bad(what));
        let value = |k: usize, what: &str| rational::parse(&record[k]).map_err(|_| bad(what));
        let winners = split_list(&record[5]).map(|w| parse_id(w, line)).collect::<Result<Vec<_>>>()?;
        let mut payments = BTreeMap::new();
        for entry in split_list(&record[6]) {
            let (id, amount) = entry.split_once(':').ok_or_else(|| bad("payment entry"))?;
            payments.insert(parse_id(id, line)?, rational::parse(amount).map_err(|_| bad("payment"))?);
        }
        rows.push(TraceRow {
            t: number(0, "t")?,
            stage: number(1, "stage")?,
            threshold: value(2, "threshold")?,
            stage_budget: value(3, "stage_budget")?,
            committed: value(4, "committed")?,
            winners,
            payments,
        });
    }
    Ok(rows)
}

/// First disagreement between two traces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceMismatch {
    pub t: u32,
    pub field: &'static str,
    pub expected: String,
    pub actual: String,
}

impl fmt::Display for TraceMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step t={}: {} expected '{}', got '{}'", self.t, self.field, self.expected, self.actual)
    }
}

pub fn diff_traces(actual: &[TraceRow], expected: &[TraceRow]) -> Option<TraceMismatch> {
    for (a, e) in actual.iter().zip(expected) {
        let (af, ef) = (a.fields(), e.fields());
        if let Some(k) = (0..HEADER.len()).find(|&k| af[k] != ef[k]) {
            return Some(TraceMismatch { t: e.t, field: HEADER[k], expected: ef[k].clone(), actual: af[k].clone() });
        }
    }
    if actual.len() != expected.len() {
        let t = actual.len().min(expected.len()) as u32 + 1;
        return Some(TraceMismatch {
            t,
            field: "length",
            expected: expected.len().to_string(),
            actual: actual.len().to_string(),
        });
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::online::run_omz;
    use crate::rational::int;
    use crate::scenarios::example1;

    #[test]
    fn round_trip() {
        let ex = example1();
        let rows = run_omz(&ex.bids(), &ex.universe, &ex.config).unwrap().rows();
        let text = render_trace_csv(&rows).unwrap();
        assert!(text.starts_with("# crowdsense-trace/1\nt,stage,"));
        assert_eq!(parse_trace_csv(&text).unwrap(), rows);
        assert!(diff_traces(&rows, &rows).is_none());
    }

    #[test]
    fn diff_names_first_step() {
        let ex = example1();
        let rows = run_omz(&ex.bids(), &ex.universe, &ex.config).unwrap().rows();
        let mut bad = rows.clone();
        bad[5].committed = int(7);
        bad[6].committed = int(7);
        let m = diff_traces(&rows, &bad).unwrap();
        assert_eq!((m.t, m.field), (6, "committed"));
        assert_eq!(diff_traces(&rows[..3], &rows).unwrap().field, "length");
    }

    #[test]
    fn rejects_missing_schema() {
        assert!(parse_trace_csv("t,stage\n").is_err());
    }
}
