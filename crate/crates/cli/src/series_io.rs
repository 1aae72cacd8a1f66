//! Flat-file serialization of series and tables: CSV with `# key=value`
//! provenance lines, and a JSON mirror of the same schema. Floats carry 17
//! significant digits so files re-parse to bit-identical values.

use anyhow::{anyhow, bail, Context};
use num_complex::Complex64;
use std::fmt::Write as _;
use std::path::Path;

use rotor_core::{ComplexSeries, ModelParams, RealSeries, SeriesMeta, TimeSeries};

pub const FORMAT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Round-trip-exact float formatting (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One sample type knows its column names and serialization.
pub trait Sample: Clone {
    fn column_names() -> &'static [&'static str];
    fn to_fields(&self) -> Vec<f64>;
}

impl Sample for f64 {
    fn column_names() -> &'static [&'static str] {
        &["value"]
    }
    fn to_fields(&self) -> Vec<f64> {
        vec![*self]
    }
}

impl Sample for Complex64 {
    fn column_names() -> &'static [&'static str] {
        &["re", "im"]
    }
    fn to_fields(&self) -> Vec<f64> {
        vec![self.re, self.im]
    }
}

fn meta_lines(command: &str, label: &str, meta: &SeriesMeta, out: &mut String) {
    let _ = writeln!(out, "# rotor-dyn-series version={FORMAT_VERSION}");
    let _ = writeln!(out, "# command={command}");
    let _ = writeln!(out, "# label={label}");
    if let Some(p) = &meta.params {
        let _ = writeln!(out, "# param.K={}", fmt_f64(p.kick));
        let _ = writeln!(out, "# param.epsilon={}", fmt_f64(p.interaction));
        let _ = writeln!(out, "# param.kbar={}", fmt_f64(p.kbar));
        let _ = writeln!(out, "# param.M={}", p.m_max);
    }
    if let Some(seed) = meta.seed {
        let _ = writeln!(out, "# seed={seed}");
    }
    for (k, v) in &meta.extra {
        let _ = writeln!(out, "# {k}={v}");
    }
    let _ = writeln!(out, "# timestamp={}", timestamp());
}

fn timestamp() -> String {
    use std::time::{SystemTime, UNIX_EPOCH};
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("unix:{secs}")
}

/// Writes a series as CSV with provenance header lines.
pub fn write_series_csv<T: Sample>(
    path: &Path,
    command: &str,
    series: &TimeSeries<T>,
) -> anyhow::Result<()> {
    let mut out = String::new();
    meta_lines(command, series.label(), &series.meta, &mut out);
    let mut header = String::from("t");
    for c in T::column_names() {
        header.push(',');
        header.push_str(c);
    }
    let _ = writeln!(out, "{header}");
    for (t, v) in series.iter() {
        let mut row = fmt_f64(t);
        for f in v.to_fields() {
            row.push(',');
            row.push_str(&fmt_f64(f));
        }
        let _ = writeln!(out, "{row}");
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// JSON mirror of the CSV schema.
pub fn write_series_json<T: Sample>(
    path: &Path,
    command: &str,
    series: &TimeSeries<T>,
) -> anyhow::Result<()> {
    let mut meta = serde_json::Map::new();
    meta.insert("version".into(), FORMAT_VERSION.into());
    meta.insert("command".into(), command.into());
    meta.insert("label".into(), series.label().into());
    if let Some(p) = &series.meta.params {
        meta.insert("param.K".into(), p.kick.into());
        meta.insert("param.epsilon".into(), p.interaction.into());
        meta.insert("param.kbar".into(), p.kbar.into());
        meta.insert("param.M".into(), (p.m_max as u64).into());
    }
    if let Some(seed) = series.meta.seed {
        meta.insert("seed".into(), seed.into());
    }
    for (k, v) in &series.meta.extra {
        meta.insert(k.clone(), v.clone().into());
    }
    meta.insert("timestamp".into(), timestamp().into());

    let mut columns = vec!["t".to_string()];
    columns.extend(T::column_names().iter().map(|s| s.to_string()));
    let rows: Vec<Vec<f64>> = series
        .iter()
        .map(|(t, v)| {
            let mut row = vec![t];
            row.extend(v.to_fields());
            row
        })
        .collect();

    let doc = serde_json::json!({
        "meta": meta,
        "columns": columns,
        "rows": rows,
    });
    std::fs::write(path, serde_json::to_string_pretty(&doc)?)
        .with_context(|| format!("writing {}", path.display()))
}

/// Parses a CSV series file back into (label, metadata pairs, columns).
pub struct ParsedSeries {
    pub label: String,
    pub meta: Vec<(String, String)>,
    pub column_names: Vec<String>,
    pub times: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
}

pub fn read_series_csv(path: &Path) -> anyhow::Result<ParsedSeries> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut label = String::new();
    let mut meta = Vec::new();
    let mut column_names: Option<Vec<String>> = None;
    let mut times = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some((k, v)) = rest.split_once('=') {
                if k == "label" {
                    label = v.to_string();
                }
                meta.push((k.to_string(), v.to_string()));
            }
            continue;
        }
        match &column_names {
            None => {
                let names: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
                if names.first().map(String::as_str) != Some("t") {
                    bail!("line {}: expected header starting with 't'", lineno + 1);
                }
                columns = vec![Vec::new(); names.len() - 1];
                column_names = Some(names);
            }
            Some(names) => {
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() != names.len() {
                    bail!(
                        "line {}: expected {} fields, found {}",
                        lineno + 1,
                        names.len(),
                        fields.len()
                    );
                }
                let parse = |s: &str| -> anyhow::Result<f64> {
                    s.parse::<f64>()
                        .map_err(|e| anyhow!("line {}: bad float '{s}': {e}", lineno + 1))
                };
                times.push(parse(fields[0])?);
                for (c, f) in columns.iter_mut().zip(&fields[1..]) {
                    c.push(parse(f)?);
                }
            }
        }
    }
    let column_names = column_names.ok_or_else(|| anyhow!("no header row found"))?;
    Ok(ParsedSeries { label, meta, column_names: column_names[1..].to_vec(), times, columns })
}

impl ParsedSeries {
    fn parsed_params(&self) -> Option<ModelParams> {
        let get = |key: &str| -> Option<f64> {
            self.meta
                .iter()
                .rev()
                .find(|(k, _)| k == key)
                .and_then(|(_, v)| v.parse::<f64>().ok())
        };
        let (k, eps, kbar, m) = (
            get("param.K")?,
            get("param.epsilon")?,
            get("param.kbar")?,
            get("param.M")?,
        );
        ModelParams::new(k, eps, kbar, m as usize).ok()
    }

    fn series_meta(&self) -> SeriesMeta {
        let mut meta = SeriesMeta::default();
        meta.params = self.parsed_params();
        meta.seed = self
            .meta
            .iter()
            .find(|(k, _)| k == "seed")
            .and_then(|(_, v)| v.parse().ok());
        meta
    }

    pub fn into_real_series(self) -> anyhow::Result<RealSeries> {
        if self.columns.len() != 1 {
            bail!(
                "expected a single value column, found {:?}",
                self.column_names
            );
        }
        let meta = self.series_meta();
        Ok(RealSeries::from_parts(self.label.clone(), self.times, self.columns.into_iter().next().unwrap(), meta)?)
    }

    pub fn into_complex_series(self) -> anyhow::Result<ComplexSeries> {
        if self.columns.len() != 2 {
            bail!("expected re,im columns, found {:?}", self.column_names);
        }
        let meta = self.series_meta();
        let mut cols = self.columns.into_iter();
        let re = cols.next().unwrap();
        let im = cols.next().unwrap();
        let values = re
            .into_iter()
            .zip(im)
            .map(|(r, i)| Complex64::new(r, i))
            .collect();
        Ok(ComplexSeries::from_parts(self.label.clone(), self.times, values, meta)?)
    }
}

/// Writes a plain table (named columns, f64 rows) with the same provenance
/// header style as the series files.
pub fn write_table_csv(
    path: &Path,
    command: &str,
    label: &str,
    meta: &SeriesMeta,
    column_names: &[&str],
    rows: &[Vec<f64>],
) -> anyhow::Result<()> {
    let mut out = String::new();
    meta_lines(command, label, meta, &mut out);
    let _ = writeln!(out, "{}", column_names.join(","));
    for row in rows {
        if row.len() != column_names.len() {
            bail!("table row width {} != {} columns", row.len(), column_names.len());
        }
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn write_table_json(
    path: &Path,
    command: &str,
    label: &str,
    column_names: &[&str],
    rows: &[Vec<f64>],
) -> anyhow::Result<()> {
    let doc = serde_json::json!({
        "meta": { "version": FORMAT_VERSION, "command": command, "label": label,
                  "timestamp": timestamp() },
        "columns": column_names,
        "rows": rows,
    });
    std::fs::write(path, serde_json::to_string_pretty(&doc)?)
        .with_context(|| format!("writing {}", path.display()))
}
