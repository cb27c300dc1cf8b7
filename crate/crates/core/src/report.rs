//! Report rendering: 6-significant-digit numbers, CSV tables with a
//! commented header, aligned text tables and TOML records.

use crate::error::{Error, Result};
use crate::profile::DecayProfile;
use serde::Serialize;

/// Significant digits of every rendered float.
pub const SIG_DIGITS: usize = 6;

/// Shortest `%g`-style rendering with [`SIG_DIGITS`] significant digits;
/// non-finite values render as `inf`, `-inf`, `nan`.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..SIG_DIGITS as i32).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim(mant), exp)
    }
}

/// `x` rounded to [`SIG_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    parse_num(&fmt_sig(x)).expect("own rendering parses")
}

/// Inverse of [`fmt_sig`] (also accepts any Rust float literal).
pub fn parse_num(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Config {
        path: "report".into(),
        reason: format!("not a number: `{s}`"),
    })
}

/// Rows of pre-rendered cells under named columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    /// RFC 4180 CSV, preceded by `# `-prefixed header lines.
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut out = String::new();
        for h in header {
            for l in h.lines() {
                out.push_str("# ");
                out.push_str(l);
                out.push('\n');
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf8"));
        out
    }

    /// Parses [`Table::to_csv`] output, skipping header comments.
    pub fn from_csv(text: &str) -> Result<Table> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let bad = |e: csv::Error| Error::Config {
            path: "csv".into(),
            reason: e.to_string(),
        };
        let columns = r.headers().map_err(bad)?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|x| x.iter().map(String::from).collect()))
            .collect::<std::result::Result<_, _>>()
            .map_err(bad)?;
        Ok(Table { columns, rows })
    }

    /// Space-aligned table for terminals.
    pub fn to_text(&self) -> String {
        let mut width: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let s: Vec<String> = cells
                .iter()
                .zip(&width)
                .map(|(c, w)| format!("{c:>w$}", w = *w))
                .collect();
            s.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&self.columns);
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }
}

/// One row of the profile table.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub profile: String,
    pub abscissa: f64,
    pub value: f64,
    pub verdict: crate::Verdict,
}

pub const PROFILE_COLUMNS: [&str; 4] = ["profile", "abscissa", "value", "verdict"];

/// Long-format table of profiles; an empty profile contributes no rows.
pub fn profile_table(profiles: &[&DecayProfile]) -> Table {
    let mut t = Table::new(PROFILE_COLUMNS);
    for p in profiles {
        for (x, v) in p.abscissae.iter().zip(&p.values) {
            t.push(vec![p.label.clone(), fmt_sig(*x), fmt_sig(*v), p.verdict.to_string()]);
        }
    }
    t
}

pub fn profile_rows(rows: &[ProfileRow]) -> Table {
    let mut t = Table::new(PROFILE_COLUMNS);
    for r in rows {
        t.push(vec![r.profile.clone(), fmt_sig(r.abscissa), fmt_sig(r.value), r.verdict.to_string()]);
    }
    t
}

pub fn parse_profile_rows(table: &Table) -> Result<Vec<ProfileRow>> {
    if table.columns != PROFILE_COLUMNS {
        return Err(Error::Config {
            path: "csv".into(),
            reason: format!("expected columns {PROFILE_COLUMNS:?}"),
        });
    }
    table
        .rows
        .iter()
        .map(|r| {
            Ok(ProfileRow {
                profile: r[0].clone(),
                abscissa: parse_num(&r[1])?,
                value: parse_num(&r[2])?,
                verdict: r[3].parse().map_err(|e: String| Error::Config {
                    path: "csv.verdict".into(),
                    reason: e,
                })?,
            })
        })
        .collect()
}

/// TOML rendering of a record with every float rounded to
/// [`SIG_DIGITS`] digits; `header` lines become leading comments.
pub fn record_text<T: Serialize>(header: &[String], record: &T) -> Result<String> {
    let mut v = toml::Value::try_from(record).map_err(|e| Error::Config {
        path: "record".into(),
        reason: e.to_string(),
    })?;
    round_floats(&mut v);
    let mut out = String::new();
    for h in header {
        for l in h.lines() {
            out.push_str("# ");
            out.push_str(l);
            out.push('\n');
        }
    }
    out.push_str(&toml::to_string(&v).map_err(|e| Error::Config {
        path: "record".into(),
        reason: e.to_string(),
    })?);
    Ok(out)
}

fn round_floats(v: &mut toml::Value) {
    match v {
        toml::Value::Float(x) => *x = round_sig(*x),
        toml::Value::Array(a) => a.iter_mut().for_each(round_floats),
        toml::Value::Table(t) => t.iter_mut().for_each(|(_, x)| round_floats(x)),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_digits() {
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333");
        assert_eq!(fmt_sig(2.0), "2");
        assert_eq!(fmt_sig(123456789.0), "1.23457e8");
        assert_eq!(fmt_sig(1.5e-7), "1.5e-7");
        assert_eq!(fmt_sig(-0.00012345678), "-0.000123457");
        assert_eq!(fmt_sig(f64::INFINITY), "inf");
        assert_eq!(fmt_sig(999999.7), "1e6");
        assert_eq!(parse_num("inf").unwrap(), f64::INFINITY);
    }

    #[test]
    fn empty_profile_is_header_only() {
        let p = DecayProfile::from_points("phi", crate::Limit::Zero, vec![], &Default::default());
        let csv = profile_table(&[&p]).to_csv(&[]);
        assert_eq!(csv, "profile,abscissa,value,verdict\n");
    }

    #[test]
    fn infinite_cell_keeps_verdict() {
        let rows = vec![ProfileRow {
            profile: "a".into(),
            abscissa: 0.5,
            value: f64::INFINITY,
            verdict: crate::Verdict::Out,
        }];
        let text = profile_rows(&rows).to_csv(&["cfg".into()]);
        assert!(text.contains("a,0.5,inf,OUT"));
        assert_eq!(parse_profile_rows(&Table::from_csv(&text).unwrap()).unwrap(), rows);
    }
}
