//! File formats: correspondence tables, ASCII PLY clouds, result records and
//! the ground-truth sidecar written next to synthetic problems.
//!
//! Correspondence files hold one correspondence per row, six numbers
//! `x1 y1 z1 x2 y2 z2` separated by commas or whitespace, with an optional
//! seventh column (`1` = ground-truth inlier, `0` = outlier). Lines starting
//! with `#` are comments, and a non-numeric first row is taken as a header.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::consensus::CorrespondenceSet;
use crate::error::{RansicError, Result};
use crate::geom::{Rotation, SimTransform, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceFile {
    pub corr: CorrespondenceSet,
    pub mask: Option<Vec<bool>>,
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| RansicError::Parse {
        line,
        msg: format!("not a number: {s:?}"),
    })?;
    if !v.is_finite() {
        return Err(RansicError::Parse {
            line,
            msg: format!("non-finite value {s:?}"),
        });
    }
    Ok(v)
}

pub fn read_correspondences<R: BufRead>(reader: R) -> Result<CorrespondenceFile> {
    let mut pairs = Vec::new();
    let mut mask: Vec<bool> = Vec::new();
    let mut arity: Option<usize> = None;
    let mut header_cols: Option<usize> = None;
    let mut seen_data = false;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields = split_fields(trimmed);
        let first_row = !seen_data;
        seen_data = true;
        if first_row && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            header_cols = Some(fields.len());
            continue;
        }
        match arity {
            None if fields.len() == 6 || fields.len() == 7 => arity = Some(fields.len()),
            None => {
                return Err(RansicError::Arity {
                    line: lineno,
                    expected: 6,
                    found: fields.len(),
                })
            }
            Some(a) if a != fields.len() => {
                return Err(RansicError::Arity {
                    line: lineno,
                    expected: a,
                    found: fields.len(),
                })
            }
            Some(_) => {}
        }
        let v: Vec<f64> = fields[..6]
            .iter()
            .map(|f| parse_f64(f, lineno))
            .collect::<Result<_>>()?;
        pairs.push((Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5])));
        if let Some(flag) = fields.get(6) {
            mask.push(match *flag {
                "1" => true,
                "0" => false,
                other => {
                    return Err(RansicError::Parse {
                        line: lineno,
                        msg: format!("inlier flag must be 0 or 1, got {other:?}"),
                    })
                }
            });
        }
    }
    Ok(CorrespondenceFile {
        corr: CorrespondenceSet::new(pairs),
        // a header-only file still says whether a mask column exists
        mask: (arity.or(header_cols) == Some(7)).then_some(mask),
    })
}

pub fn read_correspondences_path(path: impl AsRef<Path>) -> Result<CorrespondenceFile> {
    read_correspondences(BufReader::new(File::open(path)?))
}

/// Writes comma-separated rows with shortest round-trip float formatting.
pub fn write_correspondences<W: Write>(
    mut w: W,
    corr: &CorrespondenceSet,
    mask: Option<&[bool]>,
) -> Result<()> {
    if let Some(m) = mask {
        if m.len() != corr.len() {
            return Err(RansicError::InvalidParam("mask length differs from set".into()));
        }
    }
    match mask {
        Some(_) => writeln!(w, "x1,y1,z1,x2,y2,z2,inlier")?,
        None => writeln!(w, "x1,y1,z1,x2,y2,z2")?,
    }
    for (i, (a, b)) in corr.pairs().iter().enumerate() {
        write!(w, "{},{},{},{},{},{}", a.x, a.y, a.z, b.x, b.y, b.z)?;
        match mask {
            Some(m) => writeln!(w, ",{}", u8::from(m[i]))?,
            None => writeln!(w)?,
        }
    }
    w.flush()?;
    Ok(())
}

enum PlyProperty {
    Scalar(String),
    List,
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

fn ply_header_err(line: usize, msg: impl Into<String>) -> RansicError {
    RansicError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Vertex positions from an ASCII PLY file, in declaration order.
pub fn read_ply_ascii<R: BufRead>(reader: R) -> Result<Vec<Vec3>> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next_line = move || -> Result<Option<(usize, String)>> {
        match lines.next() {
            Some((n, l)) => Ok(Some((n, l?))),
            None => Ok(None),
        }
    };

    match next_line()? {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(ply_header_err(1, "missing 'ply' magic")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut format_seen = false;
    loop {
        let Some((n, line)) = next_line()? else {
            return Err(ply_header_err(0, "unexpected end of header"));
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", _] => format_seen = true,
            ["format", fmt, ..] => {
                return Err(RansicError::UnsupportedFormat(format!("PLY format {fmt}")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| ply_header_err(n, format!("bad element count {count:?}")))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", _, _, _] => elements
                .last_mut()
                .ok_or_else(|| ply_header_err(n, "property before element"))?
                .properties
                .push(PlyProperty::List),
            ["property", _, name] => elements
                .last_mut()
                .ok_or_else(|| ply_header_err(n, "property before element"))?
                .properties
                .push(PlyProperty::Scalar(name.to_string())),
            ["end_header"] => break,
            _ => return Err(ply_header_err(n, format!("unrecognised header line {line:?}"))),
        }
    }
    if !format_seen {
        return Err(ply_header_err(0, "missing format line"));
    }

    let mut points = Vec::new();
    for el in &elements {
        let is_vertex = el.name == "vertex";
        if is_vertex {
            for axis in ["x", "y", "z"] {
                let found = el
                    .properties
                    .iter()
                    .any(|p| matches!(p, PlyProperty::Scalar(name) if name == axis));
                if !found {
                    return Err(ply_header_err(0, format!("vertex has no {axis} property")));
                }
            }
            points.reserve(el.count);
        }
        for _ in 0..el.count {
            let Some((n, line)) = next_line()? else {
                return Err(ply_header_err(0, format!("truncated {} data", el.name)));
            };
            if !is_vertex {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let mut xyz = [None; 3];
            for prop in &el.properties {
                match prop {
                    PlyProperty::Scalar(name) => {
                        let tok = tokens
                            .next()
                            .ok_or_else(|| ply_header_err(n, "too few vertex fields"))?;
                        if let Some(k) = ["x", "y", "z"].iter().position(|a| a == name) {
                            xyz[k] = Some(parse_f64(tok, n)?);
                        }
                    }
                    PlyProperty::List => {
                        let len: usize = tokens
                            .next()
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| ply_header_err(n, "bad list length"))?;
                        for _ in 0..len {
                            tokens.next().ok_or_else(|| ply_header_err(n, "short list"))?;
                        }
                    }
                }
            }
            let [Some(x), Some(y), Some(z)] = xyz else {
                unreachable!("x, y and z presence checked against the header")
            };
            points.push(Vec3::new(x, y, z));
        }
    }
    Ok(points)
}

pub fn read_ply_path(path: impl AsRef<Path>) -> Result<Vec<Vec3>> {
    read_ply_ascii(BufReader::new(File::open(path)?))
}

pub fn write_ply_ascii<W: Write>(mut w: W, points: &[Vec3]) -> Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", points.len())?;
    for axis in ["x", "y", "z"] {
        writeln!(w, "property double {axis}")?;
    }
    writeln!(w, "end_header")?;
    for p in points {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    w.flush()?;
    Ok(())
}

/// One solver run. Error and mask-based fields are `None` when no ground
/// truth was available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub problem: String,
    pub solver: String,
    pub n: usize,
    pub outlier_ratio: f64,
    pub seed: u64,
    pub rot_err_deg: Option<f64>,
    pub scale_err: Option<f64>,
    pub trans_err: Option<f64>,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub samples_drawn: u64,
    pub wall_time_ms: f64,
    pub terminated: bool,
}

/// CSV column order.
pub const RESULT_COLUMNS: [&str; 13] = [
    "problem",
    "solver",
    "n",
    "outlier_ratio",
    "seed",
    "rot_err_deg",
    "scale_err",
    "trans_err",
    "recall",
    "precision",
    "samples_drawn",
    "wall_time_ms",
    "terminated",
];

/// Rounds to 9 significant decimal digits.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

impl ResultRecord {
    /// Copy with every float rounded as it will be written.
    pub fn rounded(&self) -> Self {
        let r = |o: Option<f64>| o.map(round_sig9);
        Self {
            outlier_ratio: round_sig9(self.outlier_ratio),
            rot_err_deg: r(self.rot_err_deg),
            scale_err: r(self.scale_err),
            trans_err: r(self.trans_err),
            recall: r(self.recall),
            precision: r(self.precision),
            wall_time_ms: round_sig9(self.wall_time_ms),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultFormat {
    Csv,
    JsonLines,
}

pub fn write_results<W: Write>(mut w: W, records: &[ResultRecord], format: ResultFormat) -> Result<()> {
    match format {
        ResultFormat::Csv => {
            let mut cw = csv::WriterBuilder::new().has_headers(false).from_writer(w);
            cw.write_record(RESULT_COLUMNS)?;
            for rec in records {
                cw.serialize(rec.rounded())?;
            }
            cw.flush()?;
        }
        ResultFormat::JsonLines => {
            for rec in records {
                serde_json::to_writer(&mut w, &rec.rounded())?;
                writeln!(w)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn read_results<R: Read>(r: R, format: ResultFormat) -> Result<Vec<ResultRecord>> {
    match format {
        ResultFormat::Csv => {
            let mut cr = csv::Reader::from_reader(r);
            cr.deserialize().map(|rec| Ok(rec?)).collect()
        }
        ResultFormat::JsonLines => BufReader::new(r)
            .lines()
            .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|l| Ok(serde_json::from_str(&l?)?))
            .collect(),
    }
}

/// Ground truth sidecar written by `synth` and read by `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub problem: String,
    pub n: usize,
    pub outlier_ratio: f64,
    pub sigma: f64,
    pub seed: u64,
    pub scale: f64,
    /// Row-major.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl GroundTruth {
    pub fn rotation(&self) -> Result<Rotation> {
        Rotation::from_row_slice(&self.rotation)
    }

    pub fn transform(&self) -> Result<SimTransform> {
        let t = &self.translation;
        SimTransform::new(self.scale, self.rotation()?, Vec3::new(t[0], t[1], t[2]))
    }
}

pub fn write_truth<W: Write>(mut w: W, truth: &GroundTruth) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, truth)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_truth<R: Read>(r: R) -> Result<GroundTruth> {
    Ok(serde_json::from_reader(r)?)
}

/// `data.csv` → `data.truth.json`.
pub fn truth_sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("truth.json")
}

pub fn create_buffered(path: impl AsRef<Path>) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}
