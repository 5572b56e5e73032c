//! Effect time series and their CSV form (`kind,t,value,stderr`).

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    Total,
    Direct,
    UserLearning,
    Personalization,
}

impl EffectKind {
    pub const ALL: [EffectKind; 4] = [
        EffectKind::Total,
        EffectKind::Direct,
        EffectKind::UserLearning,
        EffectKind::Personalization,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EffectKind::Total => "total",
            EffectKind::Direct => "direct",
            EffectKind::UserLearning => "user_learning",
            EffectKind::Personalization => "personalization",
        }
    }

    /// Maps a series tag (an effect name or an estimator name) to the effect
    /// it targets.
    pub fn from_tag(tag: &str) -> Option<EffectKind> {
        Some(match tag {
            "total" | "ab_total" | "ccd_total" => EffectKind::Total,
            "direct" | "ccd_direct" => EffectKind::Direct,
            "user_learning" | "ccd_learning" | "switch_learning" | "freeze_learning"
            | "clustered_learning" => EffectKind::UserLearning,
            "personalization" | "switch_personalization" | "freeze_personalization" => {
                EffectKind::Personalization
            }
            _ => return None,
        })
    }
}

impl fmt::Display for EffectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EffectKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EffectKind::from_tag(s).ok_or_else(|| Error::Data(format!("unknown effect kind `{s}`")))
    }
}

/// Per-period effect values for t = 1..=T, optionally with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectSeries {
    kind: EffectKind,
    label: Option<String>,
    values: Vec<f64>,
    stderr: Option<Vec<f64>>,
}

impl EffectSeries {
    pub fn new(kind: EffectKind, values: Vec<f64>) -> Self {
        Self { kind, label: None, values, stderr: None }
    }

    pub fn with_stderr(kind: EffectKind, values: Vec<f64>, stderr: Vec<f64>) -> Result<Self> {
        if values.len() != stderr.len() {
            return Err(Error::HorizonMismatch(format!(
                "{} values but {} standard errors",
                values.len(),
                stderr.len()
            )));
        }
        Ok(Self { kind, label: None, values, stderr: Some(stderr) })
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn kind(&self) -> EffectKind {
        self.kind
    }

    /// The tag written to the `kind` column: the label if set, else the kind.
    pub fn tag(&self) -> &str {
        self.label.as_deref().unwrap_or(self.kind.name())
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stderr(&self) -> Option<&[f64]> {
        self.stderr.as_deref()
    }

    /// Value at period `t` (1-based).
    pub fn at(&self, t: usize) -> f64 {
        self.values[t - 1]
    }

    /// Mean of the values over periods `from..=to` (1-based, inclusive).
    pub fn window_mean(&self, from: usize, to: usize) -> f64 {
        let w = &self.values[from - 1..to];
        w.iter().sum::<f64>() / w.len() as f64
    }
}

/// Largest |total_t − (u_t + p_t + s_t)| over the horizon.
pub fn decomposition_residual(
    total: &EffectSeries,
    learning: &EffectSeries,
    personalization: &EffectSeries,
    direct: &EffectSeries,
) -> Result<f64> {
    let h = total.horizon();
    for s in [learning, personalization, direct] {
        if s.horizon() != h {
            return Err(Error::HorizonMismatch(format!(
                "{} has horizon {}, total has {h}",
                s.tag(),
                s.horizon()
            )));
        }
    }
    Ok((0..h)
        .map(|i| {
            (total.values[i]
                - (learning.values[i] + personalization.values[i] + direct.values[i]))
                .abs()
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRow {
    kind: String,
    t: usize,
    value: f64,
    stderr: Option<f64>,
}

pub fn write_series_csv<W: Write>(out: W, series: &[EffectSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if series.is_empty() {
        w.write_record(["kind", "t", "value", "stderr"])?;
    }
    for s in series {
        for (i, &value) in s.values.iter().enumerate() {
            w.serialize(SeriesRow {
                kind: s.tag().to_string(),
                t: i + 1,
                value,
                stderr: s.stderr.as_ref().map(|e| e[i]),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads every series in a `kind,t,value,stderr` file, in order of first
/// appearance. Rows of one series must run t = 1, 2, ... without gaps.
pub fn read_series_csv<R: Read>(input: R) -> Result<Vec<EffectSeries>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["kind", "t", "value", "stderr"] {
        return Err(Error::Data(format!(
            "expected header kind,t,value,stderr, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out: Vec<(String, Vec<f64>, Vec<Option<f64>>)> = Vec::new();
    for (line, row) in r.deserialize::<SeriesRow>().enumerate() {
        let row = row.map_err(|e| Error::Data(format!("row {}: {e}", line + 2)))?;
        let idx = match out.iter().position(|(k, _, _)| *k == row.kind) {
            Some(i) => i,
            None => {
                out.push((row.kind.clone(), Vec::new(), Vec::new()));
                out.len() - 1
            }
        };
        let entry = &mut out[idx];
        if row.t != entry.1.len() + 1 {
            return Err(Error::Data(format!(
                "row {}: series `{}` expected t={}, found t={}",
                line + 2,
                row.kind,
                entry.1.len() + 1,
                row.t
            )));
        }
        entry.1.push(row.value);
        entry.2.push(row.stderr);
    }
    out.into_iter()
        .map(|(tag, values, se)| {
            let kind = EffectKind::from_tag(&tag).unwrap_or(EffectKind::Total);
            let series = if se.iter().all(Option::is_some) && !se.is_empty() {
                EffectSeries::with_stderr(kind, values, se.into_iter().flatten().collect())?
            } else {
                EffectSeries::new(kind, values)
            };
            Ok(if EffectKind::from_tag(&tag) == Some(kind) && tag == kind.name() {
                series
            } else {
                series.labeled(tag)
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stderr_length_must_match() {
        assert!(EffectSeries::with_stderr(EffectKind::Direct, vec![1.0, 2.0], vec![0.1]).is_err());
    }

    #[test]
    fn residual_of_exact_decomposition_is_zero() {
        let u = EffectSeries::new(EffectKind::UserLearning, vec![0.0, 0.5]);
        let p = EffectSeries::new(EffectKind::Personalization, vec![0.25, 0.25]);
        let s = EffectSeries::new(EffectKind::Direct, vec![1.0, 1.0]);
        let t = EffectSeries::new(EffectKind::Total, vec![1.25, 1.75]);
        assert_eq!(decomposition_residual(&t, &u, &p, &s).unwrap(), 0.0);
        let short = EffectSeries::new(EffectKind::Direct, vec![1.0]);
        assert!(decomposition_residual(&t, &u, &p, &short).is_err());
    }

    #[test]
    fn csv_round_trip_keeps_labels_and_stderr() {
        let a = EffectSeries::with_stderr(EffectKind::UserLearning, vec![0.1, 0.2], vec![0.01, 0.02])
            .unwrap()
            .labeled("switch_learning");
        let b = EffectSeries::new(EffectKind::Direct, vec![0.25, 0.25, 0.3]);
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &[a.clone(), b.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("kind,t,value,stderr\n"));
        assert!(text.contains("direct,3,0.3,\n"));
        let back = read_series_csv(&buf[..]).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn gaps_in_t_are_rejected() {
        let text = "kind,t,value,stderr\ndirect,1,0.2,\ndirect,3,0.2,\n";
        let err = read_series_csv(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
    }
}
