//! Analysis reports: a text rendering for people and CSV for tools. Both
//! are pure functions of the report, so reruns are byte-identical.

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::decimal_sig;
use crate::scenario::Command;
use crate::{Exact, Scalar};

/// Significant digits of the decimal column.
pub const DECIMAL_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Number(Exact),
    Text(String),
}

impl From<Exact> for Cell {
    fn from(v: Exact) -> Self {
        Cell::Number(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn exact(&self) -> String {
        match self {
            Cell::Number(v) => v.render(),
            Cell::Text(t) => t.clone(),
        }
    }

    fn decimal(&self) -> String {
        match self {
            Cell::Number(v) => decimal_sig(v, DECIMAL_DIGITS),
            Cell::Text(_) => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub analysis: Command,
    pub scenario: String,
    /// Effective inputs: scenario parameters and command flags.
    pub inputs: Vec<(String, String)>,
    /// The headline value, when the analysis has one.
    pub value: Option<Exact>,
    pub rows: Vec<(String, Cell)>,
    /// Free-form witnesses such as transcripts.
    pub notes: Vec<String>,
    /// Outcome of a pass/fail check, for analyses that are checks.
    pub check: Option<bool>,
}

impl Report {
    pub fn new(analysis: Command, scenario: impl Into<String>) -> Self {
        Report {
            analysis,
            scenario: scenario.into(),
            inputs: Vec::new(),
            value: None,
            rows: Vec::new(),
            notes: Vec::new(),
            check: None,
        }
    }

    pub fn input(&mut self, key: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.inputs.push((key.into(), value.into()));
        self
    }

    pub fn row(&mut self, key: impl Into<String>, value: impl Into<Cell>) -> &mut Self {
        self.rows.push((key.into(), value.into()));
        self
    }

    /// The first row named `key`.
    pub fn get(&self, key: &str) -> Option<&Cell> {
        self.rows.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn number(&self, key: &str) -> Option<&Exact> {
        match self.get(key)? {
            Cell::Number(v) => Some(v),
            Cell::Text(_) => None,
        }
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        match self.get(key)? {
            Cell::Text(t) => Some(t),
            Cell::Number(_) => None,
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("# compdec report\n");
        out.push_str(
            "# optimum: max over the declared finite machine set; ties go to the first declared\n",
        );
        out.push_str(&format!("analysis: {}\n", self.analysis));
        out.push_str(&format!("scenario: {}\n", self.scenario));
        for (k, v) in &self.inputs {
            out.push_str(&format!("input {k}: {v}\n"));
        }
        if let Some(v) = &self.value {
            out.push_str(&format!(
                "value: {} ({})\n",
                v.render(),
                decimal_sig(v, DECIMAL_DIGITS)
            ));
        }
        if let Some(c) = self.check {
            out.push_str(&format!("check: {}\n", if c { "pass" } else { "FAIL" }));
        }
        let width = self
            .rows
            .iter()
            .map(|(k, _)| k.chars().count())
            .max()
            .unwrap_or(0);
        for (k, v) in &self.rows {
            let pad = " ".repeat(width - k.chars().count());
            match v {
                Cell::Number(_) => {
                    out.push_str(&format!("  {k}{pad}  {} ({})\n", v.exact(), v.decimal()))
                }
                Cell::Text(t) => out.push_str(&format!("  {k}{pad}  {t}\n")),
            }
        }
        for n in &self.notes {
            out.push_str(n);
            out.push('\n');
        }
        out
    }

    /// RFC 4180 rows `key,exact,decimal`; the headline value comes first
    /// under the key `value`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let io = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["key", "exact", "decimal"]).map_err(io)?;
        if let Some(v) = &self.value {
            let c = Cell::Number(v.clone());
            w.write_record(["value".to_string(), c.exact(), c.decimal()])
                .map_err(io)?;
        }
        for (k, v) in &self.rows {
            w.write_record([k.clone(), v.exact(), v.decimal()])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::frac;

    fn sample() -> Report {
        let mut r = Report::new(Command::Voi, "stock-bond");
        r.input("partition", "{s1} {s2}");
        r.value = Some(frac(4, 3));
        r.row("best, s1", "stock").row("eu, bond", frac(1, 1));
        r
    }

    #[test]
    fn text_rendering_shows_exact_and_decimal_values() {
        let text = sample().render();
        assert!(text.contains("value: 4/3 (1.33333333333)\n"), "{text}");
        assert!(text.contains("max over the declared finite machine set"));
        assert!(text.contains("  eu, bond  1 (1)\n"), "{text}");
        assert_eq!(text, sample().render());
    }

    #[test]
    fn csv_quotes_fields_with_commas() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let csv = String::from_utf8(buf).unwrap();
        assert_eq!(
            csv,
            "key,exact,decimal\nvalue,4/3,1.33333333333\n\"best, s1\",stock,\n\"eu, bond\",1,1\n"
        );
    }

    #[test]
    fn rows_are_found_by_key() {
        let r = sample();
        assert_eq!(r.text("best, s1"), Some("stock"));
        assert_eq!(r.number("eu, bond"), Some(&frac(1, 1)));
        assert_eq!(r.number("best, s1"), None);
    }
}
