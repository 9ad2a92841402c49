//! Text formats: density CSV and flat key-value reports.
//!
//! Reals are written with 17 significant digits so that they parse back to
//! the same `f64`.

use crate::kkt::{KktCertificate, Multipliers};
use crate::{Error, Result};

pub const DENSITY_HEADER: &str = "z,p";

pub fn format_real(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn write_density_csv(nodes: &[f64], values: &[f64]) -> String {
    let mut out = String::with_capacity(48 * nodes.len() + 4);
    out.push_str(DENSITY_HEADER);
    out.push('\n');
    for (z, p) in nodes.iter().zip(values) {
        out.push_str(&format_real(*z));
        out.push(',');
        out.push_str(&format_real(*p));
        out.push('\n');
    }
    out
}

/// Returns `(nodes, values)`.
pub fn parse_density_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == DENSITY_HEADER => {}
        Some((i, h)) => {
            return Err(Error::Parse(format!("line {}: expected header `z,p`, got `{h}`", i + 1)))
        }
        None => return Err(Error::Parse("empty density file".into())),
    }
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines {
        let mut cols = line.split(',');
        let (Some(z), Some(p), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(Error::Parse(format!("line {}: expected two columns", i + 1)));
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: `{}`: {e}", i + 1, s.trim())))
        };
        nodes.push(parse(z)?);
        values.push(parse(p)?);
    }
    Ok((nodes, values))
}

/// Ordered `key = value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn push_real(&mut self, key: impl Into<String>, value: f64) {
        self.entries.push((key.into(), format_real(value)));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn extend(&mut self, other: Report) {
        self.entries.extend(other.entries);
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Report> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse(format!("line {}: expected `key = value`", i + 1)));
            };
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(Report { entries })
    }
}

pub fn multipliers_report(mult: &Multipliers) -> Report {
    let mut r = Report::new();
    for (i, l) in mult.lambda.iter().enumerate() {
        r.push_real(format!("lambda.{}", i + 1), *l);
    }
    for (j, nu) in mult.nu.iter().enumerate() {
        r.push_real(format!("nu.{}", j + 1), *nu);
    }
    r
}

/// Reads `lambda.i` and `nu.j` keys (1-based, contiguous); other keys are ignored.
pub fn parse_multipliers(report: &Report) -> Result<Multipliers> {
    let collect = |prefix: &str| -> Result<Vec<f64>> {
        let mut found: Vec<(usize, f64)> = Vec::new();
        for (k, v) in report.entries() {
            let Some(idx) = k.strip_prefix(prefix) else { continue };
            let Ok(idx) = idx.parse::<usize>() else { continue };
            let val = v
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("`{k}`: {e}")))?;
            found.push((idx, val));
        }
        found.sort_by_key(|(i, _)| *i);
        for (pos, (i, _)) in found.iter().enumerate() {
            if *i != pos + 1 {
                return Err(Error::Parse(format!("`{prefix}{}` is missing or duplicated", pos + 1)));
            }
        }
        Ok(found.into_iter().map(|(_, v)| v).collect())
    };
    let lambda = collect("lambda.")?;
    if lambda.is_empty() {
        return Err(Error::Parse("no `lambda.N` entries".into()));
    }
    Ok(Multipliers::new(lambda, collect("nu.")?))
}

pub fn certificate_report(cert: &KktCertificate) -> Report {
    let mut r = Report::new();
    r.push("certificate.pass", cert.pass);
    r.push("condition.a_feasibility", cert.condition_a);
    r.push("condition.b_stationarity", cert.condition_b);
    r.push("condition.c_complementary_slackness", cert.condition_c);
    r.push("condition.d_nonnegativity", cert.condition_d);
    r.extend(multipliers_report(&cert.multipliers));
    let eq = &cert.feasibility.equality_residuals;
    for (i, v) in eq.iter().enumerate() {
        if i + 1 == eq.len() {
            r.push_real("residual.normalization", *v);
        } else {
            r.push_real(format!("residual.equality.{}", i + 1), *v);
        }
    }
    for (j, v) in cert.feasibility.inequality_values.iter().enumerate() {
        r.push_real(format!("value.inequality.{}", j + 1), *v);
    }
    r.push_real("residual.stationarity_max", cert.max_stationarity_residual);
    r.push_real("residual.slackness_max", cert.max_slackness);
    r.push_real("nu.min", cert.min_nu);
    r.push_real("theta.min", cert.min_theta.to_f64());
    r.push_real("residual.theta_p_max", cert.max_theta_p);
    r
}
