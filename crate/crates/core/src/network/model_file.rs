//! Text model files.
//!
//! ```text
//! nlsmt-model 1
//! kind gn                       # linear | standard | tdn | gn
//! input_size 11
//! hidden_size 63
//! hidden_activation sigmoid
//! output_activation identity
//! seed 42                       # or none
//! grouping lm:4 trans-prob:0,1 lex-prob:2,3 wc:5 other-counts:6,7,8,9,10
//! degrees 2,5
//! [mask]
//! 00001100000                   # one row of k 0/1 flags per hidden node
//! ...
//! [hidden_weights]              # one row of k numbers per hidden node
//! [hidden_bias]                 # m numbers
//! [output_weights]              # m numbers
//! [output_bias]                 # 1 number
//! [end]
//! ```
//!
//! A linear model has only `kind linear`, `input_size 11` and a
//! `[weights]` section with eleven numbers. `grouping` and `degrees` are
//! only written for grouped networks. Numbers use the shortest exponent form
//! that parses back to the same bits, so save/load is exact. Blank lines and
//! lines starting with `#` are ignored; so is anything after a `#`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::linear::LinearModel;
use super::params::ModelParams;
use super::topology::{Activation, FeatureGrouping, NetworkTopology, TopologyKind};
use super::{AnyModel, NetworkError};
use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::scalar::Scalar;

const MAGIC: &str = "nlsmt-model 1";

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("line {line}, {field}: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },
    #[error("missing section [{0}]")]
    MissingSection(String),
    #[error("missing header key {0:?}")]
    MissingKey(String),
    #[error("invalid model: {0}")]
    Invalid(#[from] NetworkError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn parse_err(line: usize, field: &str, message: impl Into<String>) -> ModelFileError {
    ModelFileError::Parse {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn fmt_num<S: Scalar>(v: S) -> String {
    format!("{v:e}")
}

fn join_nums<S: Scalar>(vs: &[S]) -> String {
    vs.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(" ")
}

pub fn write_model<S: Scalar, W: Write>(mut out: W, model: &AnyModel<S>) -> io::Result<()> {
    writeln!(out, "{MAGIC}")?;
    match model {
        AnyModel::Linear(m) => {
            writeln!(out, "kind linear")?;
            writeln!(out, "input_size {FEATURE_COUNT}")?;
            writeln!(out, "[weights]")?;
            writeln!(out, "{}", join_nums(m.weights.as_slice()))?;
        }
        AnyModel::Network(p) => {
            let t = p.topology();
            writeln!(out, "kind {}", t.kind().name())?;
            writeln!(out, "input_size {}", t.input_size())?;
            writeln!(out, "hidden_size {}", t.hidden_size())?;
            writeln!(out, "hidden_activation {}", t.hidden_activation().name())?;
            writeln!(out, "output_activation {}", t.output_activation().name())?;
            match p.seed() {
                Some(s) => writeln!(out, "seed {s}")?,
                None => writeln!(out, "seed none")?,
            }
            if let Some(g) = t.grouping() {
                writeln!(out, "grouping {}", g.to_spec())?;
                let d: Vec<String> = t.degrees().iter().map(usize::to_string).collect();
                writeln!(out, "degrees {}", d.join(","))?;
            }
            writeln!(out, "[mask]")?;
            for row in t.mask() {
                let s: String = row.iter().map(|&b| if b { '1' } else { '0' }).collect();
                writeln!(out, "{s}")?;
            }
            writeln!(out, "[hidden_weights]")?;
            let k = t.input_size();
            for j in 0..t.hidden_size() {
                writeln!(out, "{}", join_nums(&p.hidden_weights()[j * k..(j + 1) * k]))?;
            }
            writeln!(out, "[hidden_bias]")?;
            writeln!(out, "{}", join_nums(p.hidden_bias()))?;
            writeln!(out, "[output_weights]")?;
            writeln!(out, "{}", join_nums(p.output_weights()))?;
            writeln!(out, "[output_bias]")?;
            writeln!(out, "{}", fmt_num(p.output_bias()))?;
        }
    }
    writeln!(out, "[end]")?;
    out.flush()
}

pub fn save_model<S: Scalar>(path: &Path, model: &AnyModel<S>) -> Result<(), ModelFileError> {
    let file = File::create(path)?;
    write_model(BufWriter::new(file), model)?;
    Ok(())
}

pub fn load_model<S: Scalar>(path: &Path) -> Result<AnyModel<S>, ModelFileError> {
    read_model(BufReader::new(File::open(path)?))
}

struct Lines {
    lines: Vec<(usize, String)>,
    pos: usize,
}

impl Lines {
    fn peek(&self) -> Option<&(usize, String)> {
        self.lines.get(self.pos)
    }

    fn last_line(&self) -> usize {
        self.lines.last().map(|(n, _)| *n).unwrap_or(0)
    }

    /// Consumes `[name]` and returns the lines up to the next section.
    fn section(&mut self, name: &str) -> Result<Vec<(usize, String)>, ModelFileError> {
        match self.peek() {
            None => return Err(ModelFileError::MissingSection(name.to_string())),
            Some((n, l)) if l != &format!("[{name}]") => {
                return Err(parse_err(*n, name, format!("expected [{name}], found {l:?}")));
            }
            Some(_) => self.pos += 1,
        }
        let mut body = Vec::new();
        while let Some((n, l)) = self.peek() {
            if l.starts_with('[') {
                break;
            }
            body.push((*n, l.clone()));
            self.pos += 1;
        }
        Ok(body)
    }
}

fn parse_numbers<S: Scalar>(
    body: &[(usize, String)],
    field: &str,
    expected: usize,
    fallback_line: usize,
) -> Result<Vec<S>, ModelFileError> {
    let mut out = Vec::with_capacity(expected);
    for (n, l) in body {
        for tok in l.split_whitespace() {
            let v = tok
                .parse::<S>()
                .map_err(|_| parse_err(*n, field, format!("bad number {tok:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(*n, field, "non-finite value"));
            }
            out.push(v);
        }
    }
    if out.len() != expected {
        let line = body.last().map(|(n, _)| *n).unwrap_or(fallback_line);
        return Err(parse_err(
            line,
            field,
            format!("expected {expected} numbers, found {}", out.len()),
        ));
    }
    Ok(out)
}

pub fn read_model<S: Scalar, R: BufRead>(input: R) -> Result<AnyModel<S>, ModelFileError> {
    let mut lines = Vec::new();
    for (i, l) in input.lines().enumerate() {
        let l = l?;
        let content = l.split('#').next().unwrap_or("").trim();
        if !content.is_empty() {
            lines.push((i + 1, content.to_string()));
        }
    }
    let mut cur = Lines { lines, pos: 0 };

    match cur.peek() {
        Some((_, l)) if l == MAGIC => cur.pos += 1,
        Some((n, l)) => return Err(parse_err(*n, "magic", format!("expected {MAGIC:?}, found {l:?}"))),
        None => return Err(parse_err(0, "magic", "empty model file")),
    }

    let mut header: HashMap<String, (usize, String)> = HashMap::new();
    while let Some((n, l)) = cur.peek() {
        if l.starts_with('[') {
            break;
        }
        let (key, value) = l
            .split_once(char::is_whitespace)
            .ok_or_else(|| parse_err(*n, "header", format!("expected 'key value', found {l:?}")))?;
        header.insert(key.to_string(), (*n, value.trim().to_string()));
        cur.pos += 1;
    }
    let get = |key: &str| {
        header
            .get(key)
            .cloned()
            .ok_or_else(|| ModelFileError::MissingKey(key.to_string()))
    };
    let get_usize = |key: &str| -> Result<usize, ModelFileError> {
        let (n, v) = get(key)?;
        v.parse().map_err(|_| parse_err(n, key, format!("bad integer {v:?}")))
    };

    let (kind_line, kind) = get("kind")?;
    let input_size = get_usize("input_size")?;

    if kind == "linear" {
        if input_size != FEATURE_COUNT {
            return Err(parse_err(kind_line, "input_size", "linear models have 11 inputs"));
        }
        let body = cur.section("weights")?;
        let w = parse_numbers::<S>(&body, "weights", FEATURE_COUNT, cur.last_line())?;
        cur.section("end")?;
        let weights = FeatureVector::from_slice(&w).expect("length checked");
        return Ok(AnyModel::Linear(LinearModel::new(weights)));
    }

    let kind = TopologyKind::from_name(&kind)
        .ok_or_else(|| parse_err(kind_line, "kind", format!("unknown kind {kind:?}")))?;
    let hidden_size = get_usize("hidden_size")?;
    let activation = |key: &str| -> Result<Activation, ModelFileError> {
        let (n, v) = get(key)?;
        Activation::from_name(&v).ok_or_else(|| parse_err(n, key, format!("unknown activation {v:?}")))
    };
    let hidden_activation = activation("hidden_activation")?;
    let output_activation = activation("output_activation")?;
    let seed = match header.get("seed") {
        None => None,
        Some((_, v)) if v == "none" => None,
        Some((n, v)) => Some(
            v.parse::<u64>()
                .map_err(|_| parse_err(*n, "seed", format!("bad seed {v:?}")))?,
        ),
    };
    let grouping = match header.get("grouping") {
        Some((n, spec)) => Some(
            FeatureGrouping::from_spec(input_size, spec)
                .map_err(|e| parse_err(*n, "grouping", e.to_string()))?,
        ),
        None if kind == TopologyKind::Grouped => return Err(ModelFileError::MissingKey("grouping".into())),
        None => None,
    };

    let mask_body = cur.section("mask")?;
    if mask_body.len() != hidden_size {
        let line = mask_body.last().map(|(n, _)| *n).unwrap_or(cur.last_line());
        return Err(parse_err(
            line,
            "mask",
            format!("expected {hidden_size} rows, found {}", mask_body.len()),
        ));
    }
    let mut rows = Vec::with_capacity(hidden_size);
    for (n, l) in &mask_body {
        if l.chars().count() != input_size || !l.chars().all(|c| c == '0' || c == '1') {
            return Err(parse_err(*n, "mask", format!("expected {input_size} flags of 0/1")));
        }
        rows.push(l.chars().enumerate().filter(|(_, c)| *c == '1').map(|(i, _)| i).collect());
    }
    let topology = NetworkTopology::from_rows(kind, input_size, rows, grouping)
        .map_err(|e| parse_err(mask_body[0].0, "mask", e.to_string()))?
        .with_hidden_activation(hidden_activation)
        .with_output_activation(output_activation);
    if let Some((n, d)) = header.get("degrees") {
        let listed: Vec<String> = topology.degrees().iter().map(usize::to_string).collect();
        if listed.join(",") != *d {
            return Err(parse_err(*n, "degrees", format!("mask has degrees {}", listed.join(","))));
        }
    }

    let last = cur.last_line();
    let hw = parse_numbers::<S>(&cur.section("hidden_weights")?, "hidden_weights", hidden_size * input_size, last)?;
    let hb = parse_numbers::<S>(&cur.section("hidden_bias")?, "hidden_bias", hidden_size, last)?;
    let ow = parse_numbers::<S>(&cur.section("output_weights")?, "output_weights", hidden_size, last)?;
    let ob = parse_numbers::<S>(&cur.section("output_bias")?, "output_bias", 1, last)?;
    cur.section("end")?;

    let mut params = ModelParams::from_parts(topology, hw, hb, ow, ob[0])?;
    params.set_seed(seed);
    Ok(AnyModel::Network(params))
}
