//! Scenario documents: JSON in, [`Scenario`] out.
//!
//! Every rejection carries a JSON pointer to the offending field.

use std::path::Path;

use gauge_forge::gaugemap::{CouplingData, GaugeMapSpec, Generator};
use gauge_forge::tensoralg::Metric;
use gauge_forge::verifier::{FieldExprs, Sampling, Scenario, Tolerances};
use gauge_forge::{Error, FieldExpr};
use nalgebra::DMatrix;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{pointer}: {message}")]
    Field { pointer: String, message: String },
}

impl ConfigError {
    fn field(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Field {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    #[cfg(test)]
    pub fn pointer(&self) -> Option<&str> {
        match self {
            ConfigError::Field { pointer, .. } => Some(pointer),
            ConfigError::Io { .. } => None,
        }
    }
}

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { pointer, message } => ConfigError::Field { pointer, message },
            other => ConfigError::field("", other.to_string()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum MassMatrix {
    Flat(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapDoc {
    generator: Option<Vec<Vec<String>>>,
    lambda: Option<String>,
    shift: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDocument {
    name: Option<String>,
    #[serde(rename = "N")]
    n: usize,
    g: f64,
    mass_matrix: MassMatrix,
    #[serde(default)]
    metric: Metric,
    #[serde(default)]
    allow_non_orthogonal: bool,
    phi: Vec<String>,
    a_raw: [Vec<Vec<String>>; 4],
    b: [Vec<String>; 4],
    #[serde(default)]
    map: MapDoc,
    #[serde(default)]
    sampling: Sampling,
    #[serde(default)]
    tolerances: Tolerances,
}

/// serde_path_to_error paths (`a.b[2]`) as JSON pointers (`/a/b/2`).
fn to_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } | Segment::Enum { variant: key } => {
                out.push_str(&key.replace('~', "~0").replace('/', "~1"))
            }
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

fn expr(src: &str, pointer: String) -> Result<FieldExpr, ConfigError> {
    FieldExpr::parse(src).map_err(|e| ConfigError::field(pointer, e.to_string()))
}

fn exprs(v: &[String], n: usize, pointer: &str) -> Result<Vec<FieldExpr>, ConfigError> {
    if v.len() != n {
        return Err(ConfigError::field(
            pointer,
            format!("expected {n} expressions, found {}", v.len()),
        ));
    }
    v.iter()
        .enumerate()
        .map(|(i, s)| expr(s, format!("{pointer}/{i}")))
        .collect()
}

fn mass_matrix(m: MassMatrix, n: usize) -> Result<DMatrix<f64>, ConfigError> {
    let flat = match m {
        MassMatrix::Flat(v) => v,
        MassMatrix::Rows(rows) => {
            if let Some(i) = rows.iter().position(|r| r.len() != n) {
                return Err(ConfigError::field(
                    format!("/mass_matrix/{i}"),
                    format!("expected {n} entries"),
                ));
            }
            rows.concat()
        }
    };
    if flat.len() != n * n {
        return Err(ConfigError::field(
            "/mass_matrix",
            format!(
                "expected {} entries (row-major {n}×{n}), found {}",
                n * n,
                flat.len()
            ),
        ));
    }
    Ok(DMatrix::from_row_slice(n, n, &flat))
}

fn gauge_map(doc: MapDoc, n: usize) -> Result<GaugeMapSpec, ConfigError> {
    let shift = match &doc.shift {
        Some(v) => exprs(v, n, "/map/shift")?,
        None => GaugeMapSpec::identity(n).shift,
    };
    let generator = match (doc.generator, doc.lambda) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::field(
                "/map",
                "give either generator or lambda, not both",
            ))
        }
        (None, Some(_)) if n != 1 => {
            return Err(ConfigError::field(
                "/map/lambda",
                "lambda is only allowed for N = 1",
            ))
        }
        (None, Some(l)) => Generator::Lambda(expr(&l, "/map/lambda".into())?),
        (Some(rows), None) => {
            if rows.len() != n {
                return Err(ConfigError::field(
                    "/map/generator",
                    format!(
                        "expected {n} rows of the upper triangle, found {}",
                        rows.len()
                    ),
                ));
            }
            Generator::Matrix(
                rows.iter()
                    .enumerate()
                    .map(|(i, r)| exprs(r, n - i, &format!("/map/generator/{i}")))
                    .collect::<Result<_, _>>()?,
            )
        }
        (None, None) => GaugeMapSpec::identity(n).generator,
    };
    let spec = GaugeMapSpec { generator, shift };
    spec.validate()?;
    Ok(spec)
}

pub fn parse_config(text: &str) -> Result<Scenario, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ConfigDocument = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = to_pointer(e.path());
        ConfigError::field(pointer, e.into_inner().to_string())
    })?;
    let n = doc.n;
    if n == 0 || n > gauge_forge::tensoralg::MAX_N {
        return Err(ConfigError::field(
            "/N",
            format!("N must lie in 1..={}", gauge_forge::tensoralg::MAX_N),
        ));
    }
    let m = mass_matrix(doc.mass_matrix, n)?;
    let coupling = if doc.allow_non_orthogonal {
        CouplingData::new_unchecked(doc.g, m, doc.metric)?
    } else {
        CouplingData::new(doc.g, m, doc.metric)?
    };
    let phi = exprs(&doc.phi, n, "/phi")?;
    let mut a_raw: [Vec<Vec<FieldExpr>>; 4] = Default::default();
    let mut b: [Vec<FieldExpr>; 4] = Default::default();
    for mu in 0..4 {
        let rows = &doc.a_raw[mu];
        if rows.len() != n {
            return Err(ConfigError::field(
                format!("/a_raw/{mu}"),
                format!("expected {n} rows, found {}", rows.len()),
            ));
        }
        a_raw[mu] = rows
            .iter()
            .enumerate()
            .map(|(i, r)| exprs(r, n, &format!("/a_raw/{mu}/{i}")))
            .collect::<Result<_, _>>()?;
        b[mu] = exprs(&doc.b[mu], n, &format!("/b/{mu}"))?;
    }
    let scenario = Scenario {
        name: doc.name.unwrap_or_else(|| "config".into()),
        coupling,
        fields: FieldExprs { phi, a_raw, b },
        map: gauge_map(doc.map, n)?,
        sampling: doc.sampling,
        tolerances: doc.tolerances,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_config(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut s = parse_config(&text)?;
    if s.name == "config" {
        if let Some(stem) = path.file_stem() {
            s.name = stem.to_string_lossy().into_owned();
        }
    }
    Ok(s)
}
