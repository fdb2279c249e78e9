use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::format_f64;

/// Line prefix of the header entry that may differ between identical runs.
pub const TIMESTAMP_KEY: &str = "# generated_unix = ";

/// CSV body plus `#` comment lines around it.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Method metadata printed in the header.
    pub notes: Vec<(String, String)>,
    /// Summary lines printed after the body.
    pub footer: Vec<(String, String)>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
            notes: Vec::new(),
            footer: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_f64(&mut self, row: &[f64]) {
        self.push(row.iter().map(|x| format_f64(*x)).collect());
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    pub fn summary(&mut self, key: &str, value: impl ToString) {
        self.footer.push((key.to_string(), value.to_string()));
    }
}

pub fn write_table<W: Write>(
    mut out: W,
    command: &str,
    resolved: &[(String, String)],
    table: &Table,
) -> std::io::Result<()> {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    writeln!(out, "# optothermo {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "# command = {command}")?;
    writeln!(out, "{TIMESTAMP_KEY}{now}")?;
    writeln!(out, "# [config]")?;
    for (k, v) in resolved {
        writeln!(out, "# {k} = {v}")?;
    }
    if !table.notes.is_empty() {
        writeln!(out, "# [numerics]")?;
        for (k, v) in &table.notes {
            writeln!(out, "# {k} = {v}")?;
        }
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&table.columns)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    if !table.footer.is_empty() {
        writeln!(out, "# [summary]")?;
        for (k, v) in &table.footer {
            writeln!(out, "# {k} = {v}")?;
        }
    }
    out.flush()
}
