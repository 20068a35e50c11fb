//! OFF and OBJ readers, OFF and PLY writers, MatrixMarket dumps.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use cmm_core::{SparseSymmetric, TriangleMesh};

use crate::error::{Error, Result};

fn parse_err(source_name: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source_name.to_string(),
        line,
        message: message.into(),
    }
}

/// Non-blank, non-comment lines with their 1-based line numbers.
fn content_lines<R: BufRead>(reader: R, name: &str) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(name, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push((i + 1, trimmed.to_string()));
    }
    Ok(out)
}

fn numbers<T: std::str::FromStr>(
    fields: &[&str],
    name: &str,
    line: usize,
    what: &str,
) -> Result<Vec<T>> {
    fields
        .iter()
        .map(|f| {
            f.parse::<T>()
                .map_err(|_| parse_err(name, line, format!("bad {what} '{f}'")))
        })
        .collect()
}

pub fn read_off<R: BufRead>(reader: R, name: &str) -> Result<TriangleMesh> {
    let lines = content_lines(reader, name)?;
    let mut it = lines.iter();
    let (hline, header) = it.next().ok_or_else(|| parse_err(name, 1, "empty file"))?;
    let mut tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens[0] != "OFF" {
        return Err(parse_err(name, *hline, "missing OFF header"));
    }
    tokens.remove(0);
    // counts may share the header line
    let (cline, counts) = if tokens.is_empty() {
        let (l, c) = it
            .next()
            .ok_or_else(|| parse_err(name, *hline, "missing counts line"))?;
        (*l, c.split_whitespace().collect::<Vec<_>>())
    } else {
        (*hline, tokens)
    };
    if counts.len() < 2 {
        return Err(parse_err(name, cline, "counts line needs 'N F [E]'"));
    }
    let counts: Vec<usize> = numbers(&counts, name, cline, "count")?;
    let (nv, nf) = (counts[0], counts[1]);

    let mut positions = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, text) = it
            .next()
            .ok_or_else(|| parse_err(name, cline, format!("expected {nv} vertices")))?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(parse_err(name, *l, "vertex needs 3 coordinates"));
        }
        let p: Vec<f64> = numbers(&fields[..3], name, *l, "coordinate")?;
        positions.push([p[0], p[1], p[2]]);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (l, text) = it
            .next()
            .ok_or_else(|| parse_err(name, cline, format!("expected {nf} faces")))?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        let arity: usize = numbers(&fields[..1], name, *l, "face size")?[0];
        if fields.len() < arity + 1 {
            return Err(parse_err(
                name,
                *l,
                format!("face lists fewer than {arity} indices"),
            ));
        }
        let idx: Vec<usize> = numbers(&fields[1..=arity], name, *l, "vertex index")?;
        fan_split(&idx, &mut faces).map_err(|m| parse_err(name, *l, m))?;
    }
    TriangleMesh::new(positions, faces).map_err(Error::Mesh)
}

pub fn read_obj<R: BufRead>(reader: R, name: &str) -> Result<TriangleMesh> {
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for (l, text) in content_lines(reader, name)? {
        let mut fields = text.split_whitespace();
        match fields.next() {
            Some("v") => {
                let rest: Vec<&str> = fields.collect();
                if rest.len() < 3 {
                    return Err(parse_err(name, l, "vertex needs 3 coordinates"));
                }
                let p: Vec<f64> = numbers(&rest[..3], name, l, "coordinate")?;
                positions.push([p[0], p[1], p[2]]);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for f in fields {
                    // "i", "i/t", "i/t/n" or "i//n"
                    let head = f.split('/').next().unwrap_or("");
                    let v: i64 = head
                        .parse()
                        .map_err(|_| parse_err(name, l, format!("bad vertex index '{f}'")))?;
                    let resolved = if v > 0 {
                        v - 1
                    } else if v < 0 {
                        positions.len() as i64 + v
                    } else {
                        return Err(parse_err(name, l, "vertex index 0 is invalid"));
                    };
                    if resolved < 0 {
                        return Err(parse_err(name, l, format!("vertex index {v} out of range")));
                    }
                    idx.push(resolved as usize);
                }
                fan_split(&idx, &mut faces).map_err(|m| parse_err(name, l, m))?;
            }
            // normals, texture coordinates, groups and materials are ignored
            _ => {}
        }
    }
    TriangleMesh::new(positions, faces).map_err(Error::Mesh)
}

/// `(v0, v1, v2), (v0, v2, v3), ...`
fn fan_split(idx: &[usize], faces: &mut Vec<[usize; 3]>) -> std::result::Result<(), String> {
    if idx.len() < 3 {
        return Err(format!("face has {} vertices", idx.len()));
    }
    for i in 1..idx.len() - 1 {
        faces.push([idx[0], idx[i], idx[i + 1]]);
    }
    Ok(())
}

/// Reads `.off` or `.obj` by extension.
pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let name = path.display().to_string();
    match ext.as_deref() {
        Some("off") => read_off(reader, &name),
        Some("obj") => read_obj(reader, &name),
        _ => Err(Error::config(
            "--mesh",
            format!("{name}: expected a .off or .obj file"),
        )),
    }
}

pub fn write_off<W: Write>(mut w: W, mesh: &TriangleMesh) -> std::io::Result<()> {
    writeln!(w, "OFF")?;
    writeln!(
        w,
        "{} {} {}",
        mesh.n_vertices(),
        mesh.n_faces(),
        mesh.n_edges()
    )?;
    for p in mesh.positions() {
        writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
    }
    for f in mesh.faces() {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    w.flush()
}

/// ASCII PLY; `colors` adds per-vertex `red green blue` properties.
pub fn write_ply<W: Write>(
    mut w: W,
    mesh: &TriangleMesh,
    colors: Option<&[[u8; 3]]>,
) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", mesh.n_vertices())?;
    writeln!(w, "property double x")?;
    writeln!(w, "property double y")?;
    writeln!(w, "property double z")?;
    if colors.is_some() {
        writeln!(w, "property uchar red")?;
        writeln!(w, "property uchar green")?;
        writeln!(w, "property uchar blue")?;
    }
    writeln!(w, "element face {}", mesh.n_faces())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;
    for (i, p) in mesh.positions().iter().enumerate() {
        match colors {
            Some(c) => writeln!(
                w,
                "{} {} {} {} {} {}",
                p[0], p[1], p[2], c[i][0], c[i][1], c[i][2]
            )?,
            None => writeln!(w, "{} {} {}", p[0], p[1], p[2])?,
        }
    }
    for f in mesh.faces() {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    w.flush()
}

/// Diverging scale through white: red for positive values, blue for
/// negative, saturated at the largest magnitude.
pub fn diverging_colors(values: &[f64]) -> Vec<[u8; 3]> {
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    values
        .iter()
        .map(|&v| {
            let t = if peak > 0.0 {
                (v / peak).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            let fade = |x: f64| (255.0 * (1.0 - x)).round() as u8;
            if t >= 0.0 {
                [255, fade(t), fade(t)]
            } else {
                [fade(-t), fade(-t), 255]
            }
        })
        .collect()
}

/// Lower triangle in 1-based coordinate format.
pub fn write_matrix_market<W: Write>(mut w: W, m: &SparseSymmetric) -> std::io::Result<()> {
    let lower: Vec<(usize, usize, f64)> = m.iter().filter(|&(i, j, _)| i >= j).collect();
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", m.dim(), m.dim(), lower.len())?;
    for (i, j, v) in lower {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    w.flush()
}

pub fn read_matrix_market<R: BufRead>(reader: R, name: &str) -> Result<SparseSymmetric> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l.map_err(|e| Error::io(name, e))?,
        None => return Err(parse_err(name, 1, "empty file")),
    };
    let banner: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if banner.len() < 5
        || banner[0] != "%%matrixmarket"
        || banner[2] != "coordinate"
        || banner[3] != "real"
        || banner[4] != "symmetric"
    {
        return Err(parse_err(
            name,
            1,
            "expected a real symmetric coordinate matrix",
        ));
    }
    let mut size: Option<usize> = None;
    let mut triplets = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(name, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                let dims: Vec<usize> = numbers(&fields, name, i + 1, "size")?;
                if dims.len() != 3 || dims[0] != dims[1] {
                    return Err(parse_err(name, i + 1, "size line needs 'N N NNZ'"));
                }
                size = Some(dims[0]);
            }
            Some(n) => {
                if fields.len() != 3 {
                    return Err(parse_err(name, i + 1, "entry needs 'i j value'"));
                }
                let ij: Vec<usize> = numbers(&fields[..2], name, i + 1, "index")?;
                let v: f64 = numbers(&fields[2..], name, i + 1, "value")?[0];
                if ij[0] == 0 || ij[1] == 0 || ij[0] > n || ij[1] > n {
                    return Err(parse_err(name, i + 1, "index out of range"));
                }
                triplets.push((ij[0] - 1, ij[1] - 1, v));
            }
        }
    }
    let n = size.ok_or_else(|| parse_err(name, 1, "missing size line"))?;
    SparseSymmetric::from_upper_triplets(n, &triplets).map_err(Error::Mesh)
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}
