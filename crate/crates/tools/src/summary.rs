//! Line-oriented run summaries: one record per line, `key=value` fields
//! separated by spaces. Values containing spaces or quotes are written with
//! Rust string escaping.

use std::fmt::Display;
use std::io::Write;

use cisgraph::pipeline::StageTiming;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    lines: Vec<String>,
}

fn value(v: impl Display) -> String {
    let s = v.to_string();
    if s.is_empty() || s.contains(|c: char| c.is_whitespace() || c == '"' || c == '=') {
        format!("{s:?}")
    } else {
        s
    }
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record and returns it.
    pub fn record(&mut self, fields: &[(&str, &dyn Display)]) -> &str {
        let line = fields
            .iter()
            .map(|(k, v)| format!("{k}={}", value(v)))
            .collect::<Vec<_>>()
            .join(" ");
        self.lines.push(line);
        self.lines.last().unwrap()
    }

    pub fn stage(&mut self, t: &StageTiming) -> &str {
        self.record(&[
            ("stage", &t.stage),
            ("cells", &t.cells),
            ("seconds", &format_args!("{:.6}", t.seconds)),
        ])
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    /// Value of `key` in the first record that has it.
    pub fn get(&self, key: &str) -> Option<&str> {
        let prefix = format!("{key}=");
        self.lines
            .iter()
            .flat_map(|l| l.split(' '))
            .find_map(|f| f.strip_prefix(prefix.as_str()))
    }

    pub fn write(&self, out: &mut (impl Write + ?Sized)) -> std::io::Result<()> {
        for l in &self.lines {
            writeln!(out, "{l}")?;
        }
        Ok(())
    }
}
