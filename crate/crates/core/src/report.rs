//! `name=value` report lines.

use std::fmt::Write as _;

/// Formats a float with 9 significant digits.
pub fn fmt_float(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..=9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.8e}")
    }
}

/// Accumulates report lines in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&mut self, name: impl Into<String>, value: impl ToString) -> &mut Self {
        self.lines.push((name.into(), value.to_string()));
        self
    }

    pub fn float(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.lines.push((name.into(), fmt_float(value)));
        self
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.lines.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (n, v) in &self.lines {
            let _ = writeln!(s, "{n}={v}");
        }
        s
    }
}

/// Parses `name=value` lines, skipping blanks and `#` comments.
pub fn parse_report(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}
