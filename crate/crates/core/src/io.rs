//! CSV and JSON formats.
//!
//! Dataset CSV: UTF-8, LF line endings, mandatory header naming at least
//! `z`, `x_obs` and `y` (any order). `x_full` and `r_x` are optional oracle
//! columns. A missing `x_obs` is an empty field (or any configured NA token);
//! `z` and `y` may never be missing. Reals are written with 17 significant
//! digits so a write/parse cycle is exact.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::scenario::{Dataset, ScenarioParams};

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Extra tokens read as missing, in addition to the empty field.
    pub na_tokens: Vec<String>,
}

impl CsvOptions {
    pub fn with_na_token(token: impl Into<String>) -> Self {
        Self {
            na_tokens: vec![token.into()],
        }
    }

    fn is_na(&self, field: &str) -> bool {
        field.is_empty() || self.na_tokens.iter().any(|t| t == field)
    }
}

/// Shortest fixed-width exact form: 17 significant digits in scientific notation.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_error(line: u64, column: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column: column.to_string(),
        message: message.into(),
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::Utf8 { err, .. } => parse_error(line, "", format!("invalid UTF-8: {err}")),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => parse_error(line, "", format!("expected {expected_len} fields, found {len}")),
        other => parse_error(line, "", format!("{other:?}")),
    }
}

struct Columns {
    z: usize,
    x_obs: usize,
    y: usize,
    x_full: Option<usize>,
    r_x: Option<usize>,
}

impl Columns {
    fn from_header(header: &csv::StringRecord) -> Result<Self> {
        let find = |name: &str| -> Result<Option<usize>> {
            let mut hits = header.iter().enumerate().filter(|(_, h)| *h == name);
            let first = hits.next().map(|(i, _)| i);
            if hits.next().is_some() {
                return Err(parse_error(1, name, "duplicate column"));
            }
            Ok(first)
        };
        let need = |name: &str| -> Result<usize> {
            find(name)?.ok_or_else(|| parse_error(1, name, "required column is absent"))
        };
        Ok(Self {
            z: need("z")?,
            x_obs: need("x_obs")?,
            y: need("y")?,
            x_full: find("x_full")?,
            r_x: find("r_x")?,
        })
    }
}

fn parse_real(field: &str, line: u64, column: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_error(line, column, format!("`{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_error(line, column, format!("`{field}` is not finite")));
    }
    Ok(v)
}

fn parse_binary(field: &str, line: u64, column: &str) -> Result<u8> {
    match field {
        "0" => Ok(0),
        "1" => Ok(1),
        _ => Err(parse_error(line, column, format!("`{field}` is not 0 or 1"))),
    }
}

pub fn read_dataset_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let cols = Columns::from_header(&header)?;

    let mut z = Vec::new();
    let mut y = Vec::new();
    let mut x_obs = Vec::new();
    let mut x_full = cols.x_full.map(|_| Vec::new());
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record).map_err(csv_error)? {
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");

        if opts.is_na(field(cols.z)) {
            return Err(parse_error(line, "z", "z may not be missing"));
        }
        if opts.is_na(field(cols.y)) {
            return Err(parse_error(line, "y", "y may not be missing"));
        }
        let zi = parse_binary(field(cols.z), line, "z")?;
        let yi = parse_real(field(cols.y), line, "y")?;
        let xi = match field(cols.x_obs) {
            f if opts.is_na(f) => None,
            f => Some(parse_real(f, line, "x_obs")?),
        };
        if let Some(c) = cols.r_x {
            let r = parse_binary(field(c), line, "r_x")?;
            if (r == 1) != xi.is_none() {
                return Err(parse_error(line, "r_x", "disagrees with x_obs missingness"));
            }
        }
        if let (Some(c), Some(full)) = (cols.x_full, x_full.as_mut()) {
            let f = parse_real(field(c), line, "x_full")?;
            if xi.is_some_and(|x| x.to_bits() != f.to_bits()) {
                return Err(parse_error(line, "x_full", "differs from observed x_obs"));
            }
            full.push(f);
        }
        z.push(zi);
        y.push(yi);
        x_obs.push(xi);
    }
    Dataset::new(z, y, x_obs, x_full)
}

/// Parses an in-memory CSV document.
pub fn parse_dataset_csv(bytes: &[u8], opts: &CsvOptions) -> Result<Dataset> {
    read_dataset_csv(bytes, opts)
}

/// Writes `z,x_obs,y`, plus `x_full,r_x` when `oracle` is set.
pub fn write_dataset_csv<W: Write>(dataset: &Dataset, writer: W, oracle: bool) -> Result<()> {
    let full = match (oracle, dataset.x_full()) {
        (true, None) => {
            return Err(Error::InvalidParameter(
                "oracle columns requested but dataset has no x_full".into(),
            ))
        }
        (true, Some(f)) => Some(f),
        (false, _) => None,
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let map = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidParameter(format!("{other:?}")),
    };
    if full.is_some() {
        w.write_record(["z", "x_obs", "y", "x_full", "r_x"]).map_err(map)?;
    } else {
        w.write_record(["z", "x_obs", "y"]).map_err(map)?;
    }
    for i in 0..dataset.n() {
        let z = dataset.z()[i].to_string();
        let x = dataset.x_obs()[i].map(format_real).unwrap_or_default();
        let y = format_real(dataset.y()[i]);
        match full {
            Some(f) => {
                let r = if dataset.is_missing(i) { "1" } else { "0" };
                w.write_record([z.as_str(), &x, &y, &format_real(f[i]), r])
                    .map_err(map)?
            }
            None => w.write_record([z.as_str(), &x, &y]).map_err(map)?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Scenario config JSON. Absent fields take the default scenario's values;
/// unknown fields are rejected.
pub fn parse_scenario_json(text: &str) -> Result<ScenarioParams> {
    let params: ScenarioParams = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line() as u64,
        column: e.column().to_string(),
        message: e.to_string(),
    })?;
    params.validate()?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::scenario::generate;

    #[test]
    fn write_then_parse_is_exact() {
        let d = generate(&ScenarioParams::default(), 50, &mut RngStream::new(1, 0)).unwrap();
        for oracle in [false, true] {
            let mut buf = Vec::new();
            write_dataset_csv(&d, &mut buf, oracle).unwrap();
            let back = parse_dataset_csv(&buf, &CsvOptions::default()).unwrap();
            let expected = if oracle { d.clone() } else { d.without_oracle() };
            assert_eq!(back, expected);
            let mut again = Vec::new();
            write_dataset_csv(&back, &mut again, oracle).unwrap();
            assert_eq!(buf, again);
        }
    }

    #[test]
    fn header_and_missing_cells() {
        let text = "z,x_obs,y\n1,,2.5\n0,0.5,1\n";
        let d = parse_dataset_csv(text.as_bytes(), &CsvOptions::default()).unwrap();
        assert_eq!(d.x_obs(), &[None, Some(0.5)]);
        let mut buf = Vec::new();
        write_dataset_csv(&d, &mut buf, false).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("z,x_obs,y\n1,,2.5000000000000000e0\n"));
        assert!(!s.contains('\r'));
    }

    #[test]
    fn column_order_and_na_token() {
        let text = "y,z,x_obs\n2.5,1,NA\n1,0,0.5\n";
        assert!(parse_dataset_csv(text.as_bytes(), &CsvOptions::default()).is_err());
        let d = parse_dataset_csv(text.as_bytes(), &CsvOptions::with_na_token("NA")).unwrap();
        assert_eq!(d.n_missing(), 1);
    }

    #[test]
    fn diagnostics_name_line_and_column() {
        let cases = [
            ("z,y\n1,2\n", 1, "x_obs"),
            ("z,x_obs,y\n1,,2\n2,1,1\n", 3, "z"),
            ("z,x_obs,y\n1,,\n", 2, "y"),
            ("z,x_obs,y\n1,abc,2\n", 2, "x_obs"),
            ("z,x_obs,y\n1,inf,2\n", 2, "x_obs"),
            ("z,x_obs,y,r_x\n1,1.0,2,1\n", 2, "r_x"),
            ("z,x_obs,y,x_full\n1,1.0,2,1.5\n", 2, "x_full"),
            ("z,x_obs,z,y\n1,1,1,2\n", 1, "z"),
        ];
        for (text, want_line, want_col) in cases {
            match parse_dataset_csv(text.as_bytes(), &CsvOptions::default()) {
                Err(Error::Parse { line, column, .. }) => {
                    assert_eq!((line, column.as_str()), (want_line, want_col), "{text:?}");
                }
                other => panic!("{text:?}: {other:?}"),
            }
        }
        assert!(matches!(
            parse_dataset_csv(b"z,x_obs,y\n1,2\n", &CsvOptions::default()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_dataset_csv(b"z,x_obs,y\n1,\xff,2\n", &CsvOptions::default()).is_err());
    }

    #[test]
    fn oracle_write_requires_full_column() {
        let d = Dataset::new(vec![0], vec![1.0], vec![None], None).unwrap();
        assert!(write_dataset_csv(&d, Vec::new(), true).is_err());
    }

    #[test]
    fn scenario_json() {
        let p = parse_scenario_json("{}").unwrap();
        assert_eq!(p, ScenarioParams::default());
        assert!(matches!(
            parse_scenario_json(r#"{"p_z": 0.5, "bogus": 1}"#),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_scenario_json(r#"{"p_z": 1.5}"#),
            Err(Error::InvalidParameter(_))
        ));
        let text = serde_json::to_string(&ScenarioParams::default()).unwrap();
        assert_eq!(parse_scenario_json(&text).unwrap(), ScenarioParams::default());
    }
}
