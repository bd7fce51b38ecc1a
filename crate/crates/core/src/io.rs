//! Versioned CSV layouts. Every file starts with one preamble line
//!
//! ```text
//! # l1euler <kind> v<version> key=value key=value ...
//! ```
//!
//! followed by an ordinary headed CSV table. Readers reject a different
//! kind or a newer version.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::field::{MollifierProfile, MollifierSpec, VortexBlobField};
use crate::flow::FlowMap;
use crate::{Error, Result, Vec2};

pub const FORMAT_VERSION: u32 = 1;

/// Preamble key-value pairs, in file order.
pub type Meta = Vec<(String, String)>;

/// Writes a preamble and a table of serializable rows.
pub fn write_table<R: Serialize>(mut out: impl Write, kind: &str, meta: &[(&str, String)], rows: &[R]) -> Result<()> {
    let mut line = format!("# l1euler {kind} v{FORMAT_VERSION}");
    for (k, v) in meta {
        if k.contains([' ', '=']) || v.contains([' ', '\n']) {
            return Err(Error::Format(format!("preamble entry `{k}={v}` contains a separator")));
        }
        line.push_str(&format!(" {k}={v}"));
    }
    writeln!(out, "{line}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table<R: DeserializeOwned>(input: impl Read, kind: &str) -> Result<(Meta, Vec<R>)> {
    let mut input = BufReader::new(input);
    let mut first = String::new();
    input.read_line(&mut first)?;
    let meta = parse_preamble(first.trim_end(), kind)?;
    let mut rows = Vec::new();
    for rec in csv::Reader::from_reader(input).deserialize() {
        rows.push(rec?);
    }
    Ok((meta, rows))
}

fn parse_preamble(line: &str, kind: &str) -> Result<Meta> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some("#") || parts.next() != Some("l1euler") {
        return Err(Error::Format("missing `# l1euler` preamble".into()));
    }
    let found = parts.next().unwrap_or_default();
    if found != kind {
        return Err(Error::Format(format!("expected a `{kind}` file, found `{found}`")));
    }
    let version = parts
        .next()
        .and_then(|v| v.strip_prefix('v'))
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(|| Error::Format("missing version".into()))?;
    if version > FORMAT_VERSION {
        return Err(Error::Format(format!("version {version} is newer than {FORMAT_VERSION}")));
    }
    parts
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Format(format!("bad preamble entry `{kv}`")))
        })
        .collect()
}

fn meta_value<'a>(meta: &'a Meta, key: &str) -> Result<&'a str> {
    meta.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Format(format!("preamble lacks `{key}`")))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct BlobRow {
    x1: f64,
    x2: f64,
    weight: f64,
}

fn profile_name(p: MollifierProfile) -> &'static str {
    match p {
        MollifierProfile::Gaussian => "gaussian",
        MollifierProfile::CompactBump => "compact_bump",
    }
}

/// Kind `blob_field`: columns x1, x2, weight; preamble blob_scale and
/// mollifier.
pub fn write_field(out: impl Write, field: &VortexBlobField) -> Result<()> {
    let rows: Vec<BlobRow> = field
        .positions()
        .iter()
        .zip(field.weights())
        .map(|(p, &weight)| BlobRow {
            x1: p.x1,
            x2: p.x2,
            weight,
        })
        .collect();
    let meta = [
        ("blob_scale", format!("{:?}", field.blob_scale())),
        ("mollifier", profile_name(field.mollifier().profile).to_string()),
    ];
    write_table(out, "blob_field", &meta, &rows)
}

pub fn read_field(input: impl Read) -> Result<VortexBlobField> {
    let (meta, rows): (_, Vec<BlobRow>) = read_table(input, "blob_field")?;
    let eps: f64 = meta_value(&meta, "blob_scale")?
        .parse()
        .map_err(|_| Error::Format("blob_scale is not a number".into()))?;
    let mollifier = match meta_value(&meta, "mollifier")? {
        "gaussian" => MollifierSpec::gaussian(),
        "compact_bump" => MollifierSpec::compact_bump(),
        other => return Err(Error::Format(format!("unknown mollifier `{other}`"))),
    };
    let positions = rows.iter().map(|r| Vec2::new(r.x1, r.x2)).collect();
    let weights = rows.iter().map(|r| r.weight).collect();
    VortexBlobField::new(positions, weights, eps, mollifier)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowRow {
    pub snapshot: usize,
    pub time: f64,
    pub label: usize,
    pub x1: f64,
    pub x2: f64,
}

/// Kind `flow_map`: the forward states X(t_k, 0, label) of every label at
/// every snapshot; preamble snapshots, labels, and the label grid when
/// there is one.
pub fn write_flow(out: impl Write, flow: &FlowMap) -> Result<()> {
    let mut rows = Vec::with_capacity(flow.times().len() * flow.labels().len());
    for (k, (t, state)) in flow.times().iter().zip(flow.states()).enumerate() {
        for (label, p) in state.iter().enumerate() {
            rows.push(FlowRow {
                snapshot: k,
                time: *t,
                label,
                x1: p.x1,
                x2: p.x2,
            });
        }
    }
    let mut meta = vec![
        ("snapshots", flow.times().len().to_string()),
        ("labels", flow.labels().len().to_string()),
        ("dt", format!("{:?}", flow.config().dt)),
    ];
    if let Some(lg) = flow.labels().label_grid() {
        let g = lg.grid;
        meta.push(("grid_corner", format!("{:?},{:?}", g.corner.x1, g.corner.x2)));
        meta.push(("grid_spacing", format!("{:?}", g.spacing)));
        meta.push(("grid_cells", format!("{}x{}", g.nx, g.ny)));
    }
    write_table(out, "flow_map", &meta, &rows)
}

pub fn read_flow_rows(input: impl Read) -> Result<(Meta, Vec<FlowRow>)> {
    read_table(input, "flow_map")
}
