//! ASCII PLY point clouds. Only the `x`, `y`, `z` properties of the
//! `vertex` element are read; other properties and elements are skipped.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::format::sig9;

struct Element {
    name: String,
    count: usize,
    properties: Vec<String>,
}

/// Reads the vertex positions of an ASCII PLY file.
pub fn read_ply(path: &Path) -> Result<Vec<Point3<f64>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let mut next = || -> Result<Option<(usize, String)>> {
        match lines.next() {
            Some((n, Ok(l))) => Ok(Some((n + 1, l))),
            Some((_, Err(e))) => Err(Error::io(path, e)),
            None => Ok(None),
        }
    };

    match next()? {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(Error::parse(path, 1, "missing `ply` magic line")),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut ascii = false;
    loop {
        let Some((n, line)) = next()? else {
            return Err(Error::parse(path, 0, "header has no `end_header`"));
        };
        let mut words = line.split_whitespace();
        match words.next() {
            Some("format") => {
                let kind = words.next().unwrap_or_default();
                if kind != "ascii" {
                    return Err(Error::parse(path, n, format!("unsupported format `{kind}`, only ascii is read")));
                }
                ascii = true;
            }
            Some("element") => {
                let name = words.next().unwrap_or_default().to_string();
                let count = words
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::parse(path, n, "element count is not an integer"))?;
                elements.push(Element {
                    name,
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(path, n, "property before any element"))?;
                let name = line.split_whitespace().last().unwrap_or_default();
                el.properties.push(name.to_string());
            }
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => return Err(Error::parse(path, n, format!("unknown header keyword `{other}`"))),
        }
    }
    if !ascii {
        return Err(Error::parse(path, 0, "header has no `format` line"));
    }

    let mut points = Vec::new();
    for el in &elements {
        let axes = if el.name == "vertex" {
            let find = |axis: &str| el.properties.iter().position(|p| p == axis);
            match (find("x"), find("y"), find("z")) {
                (Some(x), Some(y), Some(z)) => Some([x, y, z]),
                _ => return Err(Error::parse(path, 0, "vertex element lacks x, y or z")),
            }
        } else {
            None
        };
        points.reserve(if axes.is_some() { el.count } else { 0 });
        for _ in 0..el.count {
            let Some((n, line)) = next()? else {
                return Err(Error::parse(path, 0, format!("file ends inside element `{}`", el.name)));
            };
            let Some(axes) = axes else { continue };
            let values: Vec<&str> = line.split_whitespace().collect();
            let coord = |k: usize| -> Result<f64> {
                values
                    .get(axes[k])
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(path, n, "malformed vertex coordinate"))
            };
            points.push(Point3::new(coord(0)?, coord(1)?, coord(2)?));
        }
    }
    Ok(points)
}

/// Writes points as an ASCII PLY with `double` coordinates.
pub fn write_ply(path: &Path, points: &[Point3<f64>]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    write!(
        out,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        points.len()
    )
    .map_err(io)?;
    for p in points {
        writeln!(out, "{} {} {}", sig9(p.x), sig9(p.y), sig9(p.z)).map_err(io)?;
    }
    out.flush().map_err(io)
}
