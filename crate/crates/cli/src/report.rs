//! Report rows and their CSV/JSON encodings.

use std::io::{self, Write};

use serde::Serialize;

use crate::config::Format;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub model: &'static str,
    pub params: String,
    pub quantity: String,
    pub value: String,
    pub bound: Option<String>,
    pub holds: Option<bool>,
}

impl Row {
    pub fn new(
        model: &'static str,
        params: impl Into<String>,
        quantity: impl Into<String>,
        value: impl ToString,
    ) -> Self {
        Self {
            model,
            params: params.into(),
            quantity: quantity.into(),
            value: value.to_string(),
            bound: None,
            holds: None,
        }
    }

    pub fn bound(mut self, bound: impl ToString) -> Self {
        self.bound = Some(bound.to_string());
        self
    }

    pub fn holds(mut self, holds: bool) -> Self {
        self.holds = Some(holds);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<Row>,
    /// Deterministic checks whose failure makes the run exit with 1.
    pub failed_checks: Vec<String>,
}

impl Report {
    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    /// Adds a row whose `holds` is a deterministic check.
    pub fn check(&mut self, row: Row) {
        if row.holds == Some(false) {
            let label = if row.quantity == "check" {
                row.params.clone()
            } else {
                format!("{}[{}]", row.quantity, row.params)
            };
            self.failed_checks.push(label);
        }
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: Report) {
        self.rows.extend(other.rows);
        self.failed_checks.extend(other.failed_checks);
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> io::Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    fn write_csv(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "# schema={SCHEMA_VERSION}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "params", "quantity", "value", "bound", "holds"])?;
        for r in &self.rows {
            let holds = r.holds.map(|h| h.to_string()).unwrap_or_default();
            w.write_record([
                r.model,
                &r.params,
                &r.quantity,
                &r.value,
                r.bound.as_deref().unwrap_or(""),
                &holds,
            ])?;
        }
        w.flush()
    }

    fn write_json(&self, out: &mut dyn Write) -> io::Result<()> {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema: u32,
            rows: &'a [Row],
            failed_checks: &'a [String],
        }
        serde_json::to_writer_pretty(
            &mut *out,
            &Doc {
                schema: SCHEMA_VERSION,
                rows: &self.rows,
                failed_checks: &self.failed_checks,
            },
        )?;
        writeln!(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::default();
        r.push(Row::new("er", "n=4;m=2", "mu", "4/5"));
        r.check(
            Row::new("er", "n=4;m=2", "sigma2_bound", 0.16)
                .bound(0.8)
                .holds(true),
        );
        r.check(Row::new("er", "n=4,m=2", "broken", 1).holds(false));
        r
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        sample().write(Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# schema=1");
        assert_eq!(lines[1], "model,params,quantity,value,bound,holds");
        assert_eq!(lines[2], "er,n=4;m=2,mu,4/5,,");
        assert_eq!(lines[3], "er,n=4;m=2,sigma2_bound,0.16,0.8,true");
        assert_eq!(lines[4], "er,\"n=4,m=2\",broken,1,,false");
    }

    #[test]
    fn json_mirrors_csv() {
        let mut buf = Vec::new();
        let report = sample();
        report.write(Format::Json, &mut buf).unwrap();
        let doc: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(doc["schema"], 1);
        assert_eq!(doc["rows"].as_array().unwrap().len(), report.rows.len());
        assert_eq!(doc["rows"][1]["bound"], "0.8");
        assert_eq!(doc["rows"][0]["holds"], serde_json::Value::Null);
        assert_eq!(doc["failed_checks"][0], "broken[n=4,m=2]");
    }
}
