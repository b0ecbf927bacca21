//! Point-cloud export (ASCII PLY 1.0 and CSV) and re-import.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back reproduces every sample bit for bit.

use serde::Serialize;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::ImmersionPatch;
use crate::glue::GluedSurface;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Ply,
    Csv,
}

impl Format {
    /// Chosen from the file extension; anything but `.csv` is PLY.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Ply,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ply" => Ok(Format::Ply),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidInput(format!(
                "unknown export format {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointRecord {
    pub patch: u32,
    /// 2n real coordinates (x then y).
    pub coords: Vec<f64>,
    pub params: Vec<f64>,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn header_names(n: usize, m: usize) -> Vec<String> {
    let mut names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    names.extend((0..n).map(|i| format!("y{i}")));
    names.push("patch".into());
    names.extend((0..m).map(|i| format!("u{i}")));
    names
}

/// Collects every valid node of the given patches, tagged with its index.
pub fn records(patches: &[&ImmersionPatch]) -> Vec<PointRecord> {
    let mut out = Vec::new();
    for (id, p) in patches.iter().enumerate() {
        for i in 0..p.len() {
            if p.is_valid(i) {
                out.push(PointRecord {
                    patch: id as u32,
                    coords: p.point(i).to_vec(),
                    params: p.grid().coords(i),
                });
            }
        }
    }
    out
}

/// Writes records of points in C^n with m parameters each.
pub fn write_records(
    records: &[PointRecord],
    n: usize,
    m: usize,
    format: Format,
    path: &Path,
) -> Result<()> {
    let err = io_err(path);
    let file = File::create(path).map_err(&err)?;
    let mut w = BufWriter::new(file);
    let names = header_names(n, m);
    match format {
        Format::Ply => {
            writeln!(w, "ply").map_err(&err)?;
            writeln!(w, "format ascii 1.0").map_err(&err)?;
            writeln!(
                w,
                "comment points of C^{n} as {} real coordinates x0.. then y0..",
                2 * n
            )
            .map_err(&err)?;
            if n == 2 {
                writeln!(
                    w,
                    "comment 4-dimensional points: project to three coordinates for viewing"
                )
                .map_err(&err)?;
            }
            writeln!(w, "element vertex {}", records.len()).map_err(&err)?;
            for name in &names {
                let ty = if name == "patch" { "int" } else { "double" };
                writeln!(w, "property {ty} {name}").map_err(&err)?;
            }
            writeln!(w, "end_header").map_err(&err)?;
        }
        Format::Csv => {
            writeln!(w, "{}", names.join(",")).map_err(&err)?;
        }
    }
    let sep = if format == Format::Csv { "," } else { " " };
    for r in records {
        let mut fields: Vec<String> = r.coords.iter().map(|v| v.to_string()).collect();
        fields.push(r.patch.to_string());
        fields.extend(r.params.iter().map(|v| v.to_string()));
        writeln!(w, "{}", fields.join(sep)).map_err(&err)?;
    }
    w.flush().map_err(&err)
}

/// Writes the outer patch (id 0) and the necks (ids 1..=k).
pub fn export_surface(surface: &GluedSurface, format: Format, path: &Path) -> Result<usize> {
    let mut patches: Vec<&ImmersionPatch> = vec![&surface.outer];
    patches.extend(surface.necks.iter().map(|nk| &nk.patch));
    let recs = records(&patches);
    write_records(&recs, surface.config.n, surface.config.n, format, path)?;
    Ok(recs.len())
}

pub fn export_patch(patch: &ImmersionPatch, format: Format, path: &Path) -> Result<usize> {
    let recs = records(&[patch]);
    write_records(
        &recs,
        patch.ambient_dim() / 2,
        patch.param_dim(),
        format,
        path,
    )?;
    Ok(recs.len())
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::InvalidInput(format!("{}:{line}: {}", path.display(), msg.into()))
}

/// Reads a file written by `write_records` (either format).
pub fn read_point_cloud(path: &Path) -> Result<Vec<PointRecord>> {
    let err = io_err(path);
    let reader = BufReader::new(File::open(path).map_err(&err)?);
    let mut lines = reader.lines().enumerate();
    let mut names: Vec<String> = Vec::new();
    let format = Format::from_path(path);
    match format {
        Format::Ply => {
            for (i, l) in lines.by_ref() {
                let l = l.map_err(&err)?;
                if let Some(rest) = l.strip_prefix("property ") {
                    let name = rest
                        .split_whitespace()
                        .nth(1)
                        .ok_or_else(|| parse_err(path, i + 1, "bad property line"))?;
                    names.push(name.to_string());
                }
                if l == "end_header" {
                    break;
                }
            }
        }
        Format::Csv => {
            if let Some((_, l)) = lines.next() {
                names = l.map_err(&err)?.split(',').map(str::to_string).collect();
            }
        }
    }
    let patch_col = names
        .iter()
        .position(|s| s == "patch")
        .ok_or_else(|| parse_err(path, 1, "no patch column"))?;
    let mut out = Vec::new();
    for (i, l) in lines {
        let l = l.map_err(&err)?;
        if l.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = if format == Format::Csv {
            l.split(',').collect()
        } else {
            l.split_whitespace().collect()
        };
        if fields.len() != names.len() {
            return Err(parse_err(
                path,
                i + 1,
                format!("expected {} fields", names.len()),
            ));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| parse_err(path, i + 1, e.to_string()))
        };
        let coords = fields[..patch_col]
            .iter()
            .map(|s| num(s))
            .collect::<Result<_>>()?;
        let params = fields[patch_col + 1..]
            .iter()
            .map(|s| num(s))
            .collect::<Result<_>>()?;
        let patch = fields[patch_col]
            .parse::<u32>()
            .map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        out.push(PointRecord {
            patch,
            coords,
            params,
        });
    }
    Ok(out)
}

/// Default output path next to a report.
pub fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}
