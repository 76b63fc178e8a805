//! Report rows, their pass rules, and the JSON/CSV renderings.

use std::fmt;
use std::str::FromStr;

use serde_json::{json, Map, Value};

pub const SCHEMA_VERSION: u64 = 1;

/// How a row's `pass` flag follows from its numeric fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `lower ≤ upper + tolerance`
    Le,
    /// `lower < upper`
    Lt,
    /// `lower + 3·ci ≤ upper + tolerance`: a violation needs a 3σ excursion.
    LeMargin,
    /// `lower ≤ upper + 3·ci + tolerance`
    LeSlack,
    /// `|lower − upper| ≤ tolerance`
    Close,
    /// `|lower − upper| ≤ tolerance · max(|lower|, |upper|)`
    RelClose,
    /// `lower ≤ upper + ci + tolerance`: a bracket is consistent.
    Bracket,
}

impl Relation {
    pub fn name(self) -> &'static str {
        match self {
            Relation::Le => "le",
            Relation::Lt => "lt",
            Relation::LeMargin => "le_margin",
            Relation::LeSlack => "le_slack",
            Relation::Close => "close",
            Relation::RelClose => "rel_close",
            Relation::Bracket => "bracket",
        }
    }

    pub fn holds(self, lower: f64, upper: f64, ci: f64, tolerance: f64) -> bool {
        if lower.is_nan() || upper.is_nan() {
            return false;
        }
        match self {
            Relation::Le => lower <= upper + tolerance,
            Relation::Lt => lower < upper,
            Relation::LeMargin => lower + 3.0 * ci <= upper + tolerance,
            Relation::LeSlack => lower <= upper + 3.0 * ci + tolerance,
            Relation::Close => (lower - upper).abs() <= tolerance,
            Relation::RelClose => (lower - upper).abs() <= tolerance * lower.abs().max(upper.abs()),
            Relation::Bracket => lower <= upper + ci + tolerance,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Relation::Le,
            Relation::Lt,
            Relation::LeMargin,
            Relation::LeSlack,
            Relation::Close,
            Relation::RelClose,
            Relation::Bracket,
        ]
        .into_iter()
        .find(|r| r.name() == s)
        .ok_or_else(|| format!("unknown relation {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub case: String,
    pub lower: f64,
    pub upper: f64,
    pub ci_halfwidth: f64,
    pub pass: bool,
    pub elapsed_ms: u64,
    /// Engine invariant the row exercises.
    pub invariant: String,
    pub relation: Relation,
    pub tolerance: f64,
    /// Extra per-row data, emitted in JSON only.
    pub detail: Option<Value>,
}

impl Row {
    pub fn new(case: impl Into<String>, invariant: &str, relation: Relation, lower: f64, upper: f64) -> Self {
        let mut row = Row {
            case: case.into(),
            lower,
            upper,
            ci_halfwidth: 0.0,
            pass: false,
            elapsed_ms: 0,
            invariant: invariant.to_string(),
            relation,
            tolerance: 0.0,
            detail: None,
        };
        row.recompute();
        row
    }

    pub fn ci(mut self, half_width: f64) -> Self {
        self.ci_halfwidth = half_width;
        self.recompute();
        self
    }

    pub fn tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.recompute();
        self
    }

    pub fn detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn elapsed(mut self, ms: u64) -> Self {
        self.elapsed_ms = ms;
        self
    }

    /// Forces a failing row, for engine errors met while building a case.
    pub fn failed(mut self) -> Self {
        self.pass = false;
        self
    }

    pub fn recompute(&mut self) {
        self.pass = self.relation.holds(self.lower, self.upper, self.ci_halfwidth, self.tolerance);
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("case".into(), json!(self.case));
        m.insert("lower".into(), number(self.lower));
        m.insert("upper".into(), number(self.upper));
        m.insert("ci_halfwidth".into(), number(self.ci_halfwidth));
        m.insert("pass".into(), json!(self.pass));
        m.insert("elapsed_ms".into(), json!(self.elapsed_ms));
        m.insert("invariant".into(), json!(self.invariant));
        m.insert("relation".into(), json!(self.relation.name()));
        m.insert("tolerance".into(), number(self.tolerance));
        if let Some(d) = &self.detail {
            m.insert("detail".into(), d.clone());
        }
        Value::Object(m)
    }
}

/// JSON number, with non-finite values spelled `"inf"`, `"-inf"`, `"nan"`.
pub fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn text(x: f64) -> String {
    match number(x) {
        Value::String(s) => s,
        v => v.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub config: Value,
    pub rows: Vec<Row>,
    /// Seconds since the Unix epoch; omitted for reproducible output.
    pub timestamp: Option<u64>,
}

impl Report {
    pub fn new(command: impl Into<String>, config: Value) -> Self {
        Report { command: command.into(), config, rows: Vec::new(), timestamp: None }
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Zeroes wall-clock fields so identical runs render identical bytes.
    pub fn strip_timing(&mut self) {
        self.timestamp = None;
        self.rows.iter_mut().for_each(|r| r.elapsed_ms = 0);
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("schemaVersion".into(), json!(SCHEMA_VERSION));
        m.insert("command".into(), json!(self.command));
        m.insert("config".into(), self.config.clone());
        m.insert("pass".into(), json!(self.all_pass()));
        m.insert("rows".into(), Value::Array(self.rows.iter().map(Row::to_json).collect()));
        if let Some(t) = self.timestamp {
            m.insert("timestamp".into(), json!(t));
        }
        Value::Object(m)
    }

    /// Pretty JSON; object keys come out sorted.
    pub fn render_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("report values serialize");
        s.push('\n');
        s
    }

    pub fn render_csv(&self) -> anyhow::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["case", "lower", "upper", "ci_halfwidth", "pass", "elapsed_ms"])?;
        for r in &self.rows {
            w.write_record([
                r.case.clone(),
                text(r.lower),
                text(r.upper),
                text(r.ci_halfwidth),
                r.pass.to_string(),
                r.elapsed_ms.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations() {
        assert!(Relation::Le.holds(1.0, 1.0, 0.0, 0.0));
        assert!(Relation::Le.holds(1.0, f64::INFINITY, 0.0, 0.0));
        assert!(!Relation::Lt.holds(1.0, 1.0, 0.0, 0.0));
        assert!(Relation::LeMargin.holds(1.0, 1.3, 0.1, 0.0));
        assert!(!Relation::LeMargin.holds(1.0, 1.29, 0.1, 0.0));
        assert!(Relation::LeSlack.holds(1.3, 1.0, 0.1, 0.0));
        assert!(Relation::Close.holds(5.0, 5.0 + 1e-7, 0.0, 1e-6));
        assert!(Relation::RelClose.holds(0.99, 1.0, 0.0, 0.02));
        assert!(!Relation::RelClose.holds(0.97, 1.0, 0.0, 0.02));
        assert!(!Relation::Le.holds(f64::NAN, 1.0, 0.0, 0.0));
        for r in ["le", "lt", "le_margin", "le_slack", "close", "rel_close", "bracket"] {
            assert_eq!(r.parse::<Relation>().unwrap().name(), r);
        }
    }

    #[test]
    fn json_keys_are_sorted_and_infinities_spelled() {
        let mut rep = Report::new("verify test", json!({"seed": 1, "budget": 2}));
        rep.rows.push(Row::new("a", "x", Relation::Le, 1.0, f64::INFINITY));
        let s = rep.render_json();
        assert!(s.contains("\"upper\": \"inf\""));
        let budget = s.find("\"budget\"").unwrap();
        let seed = s.find("\"seed\"").unwrap();
        assert!(budget < seed);
        assert!(s.find("\"command\"").unwrap() < s.find("\"schemaVersion\"").unwrap());
    }

    #[test]
    fn csv_header_and_quoting() {
        let mut rep = Report::new("verify test", json!({}));
        rep.rows.push(Row::new("n=2, flat", "x", Relation::Le, 0.5, 1.0).elapsed(3));
        let s = rep.render_csv().unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("case,lower,upper,ci_halfwidth,pass,elapsed_ms"));
        assert_eq!(lines.next(), Some("\"n=2, flat\",0.5,1.0,0.0,true,3"));
    }
}
