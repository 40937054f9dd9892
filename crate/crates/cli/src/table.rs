//! CSV tables with a fixed header and 8 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

pub const SIGNIFICANT_DIGITS: usize = 8;

/// Fixed-point rendering with `digits` significant digits.
pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    // The exponent after rounding to `digits` places decides the decimals.
    let sci = format!("{x:.prec$e}", prec = digits.saturating_sub(1));
    let exponent: i32 = sci[sci.find('e').map_or(sci.len(), |i| i + 1)..].parse().unwrap_or(0);
    let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn energy(x: Option<f64>) -> String {
    x.map(|v| sig(v, SIGNIFICANT_DIGITS)).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

/// Writes `text` to `<dir>/<file_name>`, or to stdout without a directory.
pub fn emit(text: &str, dir: Option<&Path>, file_name: &str) -> Result<()> {
    match dir {
        Some(d) => {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
            let path = d.join(file_name);
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            log::info!("wrote {}", path.display());
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}
