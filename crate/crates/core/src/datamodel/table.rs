//! Feature CSV reader and writer.
//!
//! ```text
//! # num_classes=3            (optional; otherwise inferred as max label + 1)
//! subject,trial,window,label,f0,f1,...,f{d-1}
//! 0,0,0,2,1.2500000000000000e0,...
//! ```
//!
//! `label` is `-1` for unlabeled rows. Values are written with 17
//! significant digits so a save/load round trip is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{FeatureRecord, FeatureTable};
use crate::error::{Error, Result};

const CLASSES_PREFIX: &str = "# num_classes=";
const FIXED_COLUMNS: [&str; 4] = ["subject", "trial", "window", "label"];

pub fn load_feature_table(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_feature_table(&text, &path.display().to_string())
}

pub(crate) fn parse_feature_table(text: &str, origin: &str) -> Result<FeatureTable> {
    let fmt_err = |line: usize, message: String| Error::Format {
        path: origin.to_string(),
        line,
        message,
    };

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut declared_classes = None;
    let (header_line, header) = loop {
        match lines.next() {
            None => return Err(fmt_err(1, "missing header".into())),
            Some((n, l)) if l.starts_with(CLASSES_PREFIX) => {
                let c = l[CLASSES_PREFIX.len()..]
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| fmt_err(n, format!("bad num_classes: {e}")))?;
                if c == 0 {
                    return Err(fmt_err(n, "num_classes must be at least 1".into()));
                }
                declared_classes = Some(c);
            }
            Some((n, l)) => break (n, l),
        }
    };

    let cols: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if cols.len() < FIXED_COLUMNS.len() || cols[..4] != FIXED_COLUMNS {
        return Err(fmt_err(
            header_line,
            format!("header must start with {}", FIXED_COLUMNS.join(",")),
        ));
    }
    let dim = cols.len() - 4;
    for (k, c) in cols[4..].iter().enumerate() {
        if *c != format!("f{k}") {
            return Err(fmt_err(
                header_line,
                format!("expected column f{k}, found {c:?}"),
            ));
        }
    }

    let mut records = Vec::new();
    for (n, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 4 {
            return Err(fmt_err(
                n,
                format!("expected {} columns, found {}", dim + 4, fields.len()),
            ));
        }
        let id = |k: usize| -> Result<u32> {
            fields[k]
                .trim()
                .parse::<u32>()
                .map_err(|e| fmt_err(n, format!("column {}: {e}", FIXED_COLUMNS[k])))
        };
        let label_raw: i64 = fields[3]
            .trim()
            .parse()
            .map_err(|e| fmt_err(n, format!("column label: {e}")))?;
        let label = match label_raw {
            -1 => None,
            l if l >= 0 => Some(l as usize),
            l => return Err(fmt_err(n, format!("invalid label {l}"))),
        };
        if let (Some(l), Some(c)) = (label, declared_classes) {
            if l >= c {
                return Err(fmt_err(n, format!("label {l} >= num_classes {c}")));
            }
        }
        let mut features = Vec::with_capacity(dim);
        for (k, f) in fields[4..].iter().enumerate() {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|e| fmt_err(n, format!("column f{k}: {e}")))?;
            if !v.is_finite() {
                return Err(fmt_err(n, format!("column f{k} is not finite")));
            }
            features.push(v);
        }
        records.push(FeatureRecord {
            subject_id: id(0)?,
            trial_id: id(1)?,
            window_id: id(2)?,
            features,
            label,
        });
    }

    let num_classes = declared_classes.unwrap_or_else(|| {
        records
            .iter()
            .filter_map(|r| r.label)
            .max()
            .map_or(1, |m| m + 1)
    });
    FeatureTable::new(records, dim, num_classes)
}

pub fn save_feature_table(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_feature_table(table)).map_err(|e| Error::io(path, e))
}

pub(crate) fn render_feature_table(table: &FeatureTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CLASSES_PREFIX}{}", table.num_classes());
    out.push_str(&FIXED_COLUMNS.join(","));
    for k in 0..table.dim() {
        let _ = write!(out, ",f{k}");
    }
    out.push('\n');
    for r in table.records() {
        let label = r.label.map_or(-1, |l| l as i64);
        let _ = write!(
            out,
            "{},{},{},{}",
            r.subject_id, r.trial_id, r.window_id, label
        );
        for v in &r.features {
            let _ = write!(out, ",{v:.16e}");
        }
        out.push('\n');
    }
    out
}
