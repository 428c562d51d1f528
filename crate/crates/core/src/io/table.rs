//! Plain-text tables: `# key=value` header lines, a column-name row, then
//! comma-separated rows. Floats are written in shortest round-trip form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{FitResult, Grid2D, GridAxis, ProbabilityMap};
use crate::signal::SignalTrace;

pub const TRACE_FORMAT: &str = "reporter-trace";
pub const MAP_FORMAT: &str = "reporter-map";
pub const FIT_FORMAT: &str = "reporter-fit";
pub const FORMAT_VERSION: u32 = 1;

/// Header metadata, kept sorted for stable output.
pub type Meta = BTreeMap<String, String>;

struct Table {
    meta: Meta,
    columns: Vec<String>,
    rows: Vec<(usize, Vec<f64>)>,
}

fn render(meta: &Meta, columns: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}={v}");
    }
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn parse_table(text: &str, format: &str) -> Result<Table> {
    let mut meta = Meta::new();
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            let (k, v) = h.split_once('=').ok_or_else(|| Error::Schema {
                message: format!("header line `{line}` is not key=value"),
                line: Some(line_no),
                field: None,
            })?;
            meta.insert(k.trim().to_string(), v.trim().to_string());
            continue;
        }
        match &columns {
            None => columns = Some(line.split(',').map(|s| s.trim().to_string()).collect()),
            Some(cols) => {
                let values = line
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::Schema {
                        message: format!("bad number: {e}"),
                        line: Some(line_no),
                        field: None,
                    })?;
                if values.len() != cols.len() {
                    return Err(Error::Schema {
                        message: format!("expected {} columns, found {}", cols.len(), values.len()),
                        line: Some(line_no),
                        field: None,
                    });
                }
                rows.push((line_no, values));
            }
        }
    }
    check_format(&meta, format)?;
    let columns = columns.ok_or_else(|| Error::schema("missing column-name row"))?;
    Ok(Table {
        meta,
        columns,
        rows,
    })
}

fn check_format(meta: &Meta, format: &str) -> Result<()> {
    let found = meta.get("format").ok_or_else(|| Error::missing_field("format"))?;
    if found != format {
        return Err(Error::Schema {
            message: format!("expected a {format} file, found {found}"),
            line: None,
            field: Some("format".into()),
        });
    }
    let version: u32 = meta
        .get("version")
        .ok_or_else(|| Error::missing_field("version"))?
        .parse()
        .map_err(|_| Error::Schema {
            message: "version is not an integer".into(),
            line: None,
            field: Some("version".into()),
        })?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            kind: format.into(),
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(())
}

fn with_format(meta: &Meta, format: &str) -> Meta {
    let mut m = meta.clone();
    m.insert("format".into(), format.into());
    m.insert("version".into(), FORMAT_VERSION.to_string());
    m
}

/// Trace table; `meta` typically carries units, B, sequence id and seed.
pub fn format_trace(trace: &SignalTrace, meta: &Meta) -> String {
    let mut meta = with_format(meta, TRACE_FORMAT);
    meta.entry("units".into())
        .or_insert_with(|| "abscissa=us;signal=dimensionless;sigma=dimensionless".into());
    if trace.has_sigma() {
        render(
            &meta,
            &["abscissa", "signal", "sigma"],
            (0..trace.len()).map(|i| vec![trace.abscissa[i], trace.signal[i], trace.sigma[i]]),
        )
    } else {
        render(
            &meta,
            &["abscissa", "signal"],
            (0..trace.len()).map(|i| vec![trace.abscissa[i], trace.signal[i]]),
        )
    }
}

pub fn parse_trace(text: &str) -> Result<(SignalTrace, Meta)> {
    let t = parse_table(text, TRACE_FORMAT)?;
    let cols: Vec<&str> = t.columns.iter().map(String::as_str).collect();
    let with_sigma = match cols.as_slice() {
        ["abscissa", "signal"] => false,
        ["abscissa", "signal", "sigma"] => true,
        _ => {
            return Err(Error::Schema {
                message: format!("unexpected columns {cols:?}"),
                line: None,
                field: Some("columns".into()),
            })
        }
    };
    let mut abscissa = Vec::with_capacity(t.rows.len());
    let mut signal = Vec::with_capacity(t.rows.len());
    let mut sigma = Vec::new();
    for (_, r) in &t.rows {
        abscissa.push(r[0]);
        signal.push(r[1]);
        if with_sigma {
            sigma.push(r[2]);
        }
    }
    Ok((SignalTrace::new(abscissa, signal, sigma)?, t.meta))
}

pub fn save_trace(path: impl AsRef<Path>, trace: &SignalTrace, meta: &Meta) -> Result<()> {
    Ok(std::fs::write(path, format_trace(trace, meta))?)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<(SignalTrace, Meta)> {
    parse_trace(&std::fs::read_to_string(path)?)
}

/// Map table: one row per cell with its centre and density.
pub fn format_map(map: &ProbabilityMap, meta: &Meta) -> String {
    let mut meta = with_format(meta, MAP_FORMAT);
    let g = &map.grid;
    meta.insert("label".into(), map.label.clone());
    for (tag, axis) in [("x", &g.x), ("y", &g.y)] {
        meta.insert(format!("{tag}_name"), axis.name.clone());
        meta.insert(format!("{tag}_min"), axis.min.to_string());
        meta.insert(format!("{tag}_max"), axis.max.to_string());
        meta.insert(format!("{tag}_n"), axis.n.to_string());
    }
    render(
        &meta,
        &["x", "y", "density"],
        (0..g.len()).map(|k| {
            let (x, y) = g.center(k);
            vec![x, y, map.density[k]]
        }),
    )
}

pub fn parse_map(text: &str) -> Result<(ProbabilityMap, Meta)> {
    let t = parse_table(text, MAP_FORMAT)?;
    let get = |key: &str| t.meta.get(key).ok_or_else(|| Error::missing_field(key));
    let num = |key: &str| -> Result<f64> {
        get(key)?.parse().map_err(|_| Error::Schema {
            message: format!("`{key}` is not a number"),
            line: None,
            field: Some(key.into()),
        })
    };
    let axis = |tag: &str| -> Result<GridAxis> {
        GridAxis::new(
            get(&format!("{tag}_name"))?,
            num(&format!("{tag}_min"))?,
            num(&format!("{tag}_max"))?,
            num(&format!("{tag}_n"))? as usize,
        )
    };
    let grid = Grid2D::new(axis("x")?, axis("y")?);
    if t.rows.len() != grid.len() {
        return Err(Error::Schema {
            message: format!("map has {} rows for {} cells", t.rows.len(), grid.len()),
            line: None,
            field: None,
        });
    }
    let density = t.rows.iter().map(|(_, r)| r[2]).collect();
    let map = ProbabilityMap {
        grid,
        density,
        label: get("label")?.clone(),
    };
    Ok((map, t.meta))
}

pub fn save_map(path: impl AsRef<Path>, map: &ProbabilityMap, meta: &Meta) -> Result<()> {
    Ok(std::fs::write(path, format_map(map, meta))?)
}

pub fn load_map(path: impl AsRef<Path>) -> Result<(ProbabilityMap, Meta)> {
    parse_map(&std::fs::read_to_string(path)?)
}

#[derive(Serialize, Deserialize)]
struct FitFile {
    format: String,
    version: u32,
    fit: FitResult,
}

/// Fit results as TOML.
pub fn format_fit(fit: &FitResult) -> Result<String> {
    toml::to_string(&FitFile {
        format: FIT_FORMAT.into(),
        version: FORMAT_VERSION,
        fit: fit.clone(),
    })
    .map_err(|e| Error::schema(e.to_string()))
}

/// Checks the top-level `format`/`version` keys of a TOML document before the
/// body is deserialized, so a wrong file type is reported as such.
pub(crate) fn check_toml_header(text: &str, format: &str) -> Result<()> {
    #[derive(Deserialize)]
    struct Header {
        format: Option<String>,
        version: Option<u32>,
    }
    let h: Header = toml::from_str(text).map_err(|e| super::config::toml_error(text, &e))?;
    let mut meta = Meta::new();
    if let Some(f) = h.format {
        meta.insert("format".into(), f);
    }
    if let Some(v) = h.version {
        meta.insert("version".into(), v.to_string());
    }
    check_format(&meta, format)
}

pub fn parse_fit(text: &str) -> Result<FitResult> {
    check_toml_header(text, FIT_FORMAT)?;
    let file: FitFile = toml::from_str(text).map_err(|e| super::config::toml_error(text, &e))?;
    Ok(file.fit)
}

pub fn save_fit(path: impl AsRef<Path>, fit: &FitResult) -> Result<()> {
    Ok(std::fs::write(path, format_fit(fit)?)?)
}

pub fn load_fit(path: impl AsRef<Path>) -> Result<FitResult> {
    parse_fit(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta() -> Meta {
        [("field_gauss", "619"), ("sequence", "eseem1"), ("seed", "7")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn trace_header_and_columns() {
        let t = SignalTrace::new(vec![0.0, 0.5], vec![1.0, -0.25], vec![0.1, 0.1]).unwrap();
        let text = format_trace(&t, &meta());
        assert!(text.contains("# format=reporter-trace\n"));
        assert!(text.contains("# seed=7\n"));
        assert!(text.contains("abscissa,signal,sigma\n0,1,0.1\n0.5,-0.25,0.1\n"));
        let (back, m) = parse_trace(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(m["sequence"], "eseem1");
    }

    #[test]
    fn version_and_format_are_checked() {
        let t = SignalTrace::new(vec![0.0], vec![1.0], vec![]).unwrap();
        let text = format_trace(&t, &Meta::new()).replace("version=1", "version=2");
        assert!(matches!(parse_trace(&text), Err(Error::VersionMismatch { found: 2, .. })));
        let text = format_trace(&t, &Meta::new()).replace("# format=reporter-trace\n", "");
        match parse_trace(&text) {
            Err(Error::Schema { field, .. }) => assert_eq!(field.as_deref(), Some("format")),
            other => panic!("{other:?}"),
        }
        let bad = "# format=reporter-trace\n# version=1\nabscissa,signal\n0,x\n";
        assert!(matches!(parse_trace(bad), Err(Error::Schema { line: Some(4), .. })));
    }

    #[test]
    fn fit_round_trip() {
        let fit = FitResult {
            model: "t1".into(),
            parameters: [("amplitude".to_string(), 1.0), ("t1_s".to_string(), 29.412345678901234)]
                .into_iter()
                .collect(),
            free: vec!["t1_s".into()],
            covariance: vec![vec![5.29]],
            chi2: 31.2,
            reduced_chi2: 1.04,
            dof: 30,
            singular: false,
        };
        let text = format_fit(&fit).unwrap();
        assert_eq!(parse_fit(&text).unwrap(), fit);
        let wrong = text.replace("version = 1", "version = 9");
        assert!(matches!(parse_fit(&wrong), Err(Error::VersionMismatch { found: 9, .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig {
            rng_seed: proptest::test_runner::RngSeed::Fixed(14),
            ..ProptestConfig::default()
        })]

        #[test]
        fn trace_round_trip_is_lossless(
            ys in prop::collection::vec(-1.0f64..1.0, 1..40),
            s in 1e-6f64..1.0,
        ) {
            let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64 * 0.013 + 1e-3).collect();
            let t = SignalTrace::new(xs, ys.clone(), vec![s; ys.len()]).unwrap();
            let (back, _) = parse_trace(&format_trace(&t, &meta())).unwrap();
            prop_assert_eq!(back, t);
        }

        #[test]
        fn map_round_trip_is_lossless(w in prop::collection::vec(0.0f64..10.0, 12)) {
            prop_assume!(w.iter().sum::<f64>() > 0.0);
            let g = Grid2D::new(
                GridAxis::new("x_nm", -1.5, 1.5, 4).unwrap(),
                GridAxis::new("y_nm", 0.1, 0.7, 3).unwrap(),
            );
            let m = ProbabilityMap::from_weights(g, w, "reporter 1").unwrap();
            let (back, _) = parse_map(&format_map(&m, &Meta::new())).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
