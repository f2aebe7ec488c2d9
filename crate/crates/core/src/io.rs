//! Triangle/TetGen `.node` / `.ele` exchange and nodal scalar field files.
//!
//! `.node`: header `N_v d n_attr B`, then rows `idx x_1 … x_d [attr…] [marker]`.
//! `.ele`: header `N d+1 n_attr`, then rows `idx v_0 … v_d [attr…]`.
//! Tokens are whitespace separated and `#` starts a comment. The index base
//! is taken from the first node index (0 or 1); output is always 1-based.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::ZERO;
use crate::mesh::SimplicialMesh;

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines { inner: text.lines().enumerate() }
    }

    /// Next non-empty line with comments stripped, as (1-based line number, tokens).
    fn next_tokens(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let content = line.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = content.split_whitespace().collect();
            if !tokens.is_empty() {
                return Some((i + 1, tokens));
            }
        }
        None
    }
}

fn parse<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::Parse { line, message: format!("cannot parse {what} from '{tok}'") })
}

fn header(lines: &mut Lines, file: &str) -> Result<(usize, Vec<usize>)> {
    let (line, toks) = lines
        .next_tokens()
        .ok_or_else(|| Error::Parse { line: 0, message: format!("empty {file} file") })?;
    let values = toks
        .iter()
        .map(|t| parse::<usize>(t, line, "header field"))
        .collect::<Result<Vec<_>>>()?;
    Ok((line, values))
}

/// Parses a mesh from `.node` and `.ele` contents.
pub fn read_mesh(node_text: &str, ele_text: &str) -> Result<SimplicialMesh> {
    let mut lines = Lines::new(node_text);
    let (hline, h) = header(&mut lines, ".node")?;
    if h.len() < 2 {
        return Err(Error::Parse { line: hline, message: "node header needs at least N_v and d".into() });
    }
    let (nv, dim) = (h[0], h[1]);
    let nattr = h.get(2).copied().unwrap_or(0);
    let has_marker = h.get(3).copied().unwrap_or(0) != 0;
    if dim != 2 && dim != 3 {
        return Err(Error::UnsupportedDimension(dim));
    }

    let mut base = None;
    let mut vertices = Vec::with_capacity(nv);
    let mut markers = Vec::new();
    for i in 0..nv {
        let (line, toks) = lines.next_tokens().ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("expected {nv} vertices, found {i}"),
        })?;
        let need = 1 + dim + nattr + usize::from(has_marker);
        if toks.len() < need {
            return Err(Error::Parse { line, message: format!("expected {need} fields, found {}", toks.len()) });
        }
        let idx: usize = parse(toks[0], line, "vertex index")?;
        let b = *base.get_or_insert(idx);
        if b > 1 {
            return Err(Error::IndexBase(format!("first vertex index is {b}; expected 0 or 1")));
        }
        if idx != b + i {
            return Err(Error::IndexBase(format!(
                "line {line}: vertex index {idx} does not follow a consistent {b}-based numbering"
            )));
        }
        let mut p = ZERO;
        for a in 0..dim {
            p[a] = parse(toks[1 + a], line, "coordinate")?;
        }
        vertices.push(p);
        if has_marker {
            markers.push(parse::<i32>(toks[1 + dim + nattr], line, "boundary marker")?);
        }
    }
    let base = base.unwrap_or(0);

    let mut lines = Lines::new(ele_text);
    let (hline, h) = header(&mut lines, ".ele")?;
    if h.len() < 2 {
        return Err(Error::Parse { line: hline, message: "ele header needs N and nodes per element".into() });
    }
    let (ne, per) = (h[0], h[1]);
    if per != dim + 1 {
        return Err(Error::Parse {
            line: hline,
            message: format!("{per} nodes per element, expected {} for d = {dim}", dim + 1),
        });
    }
    let mut elements = Vec::with_capacity(ne);
    for k in 0..ne {
        let (line, toks) = lines.next_tokens().ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("expected {ne} elements, found {k}"),
        })?;
        if toks.len() < 1 + per {
            return Err(Error::Parse { line, message: format!("expected {} fields", 1 + per) });
        }
        let idx: usize = parse(toks[0], line, "element index")?;
        if idx != base + k {
            return Err(Error::IndexBase(format!(
                "line {line}: element index {idx} is not {base}-based like the node file"
            )));
        }
        let mut e = Vec::with_capacity(per);
        for t in &toks[1..=per] {
            let v: usize = parse(t, line, "vertex index")?;
            if v < base || v >= base + nv {
                return Err(Error::IndexBase(format!(
                    "line {line}: vertex reference {v} outside {base}-based range of {nv} vertices"
                )));
            }
            e.push(v - base);
        }
        elements.push(e);
    }

    let mut mesh = SimplicialMesh::new(dim, vertices, elements)?;
    if has_marker {
        mesh.markers = Some(markers);
    }
    Ok(mesh)
}

/// Serializes a mesh as 1-based `.node` and `.ele` contents with 17
/// significant digits per coordinate.
pub fn write_mesh(mesh: &SimplicialMesh) -> (String, String) {
    let d = mesh.dim();
    let mut node = String::new();
    let has_marker = mesh.markers.is_some();
    let _ = writeln!(node, "{} {} 0 {}", mesh.num_vertices(), d, u8::from(has_marker));
    for (i, v) in mesh.vertices.iter().enumerate() {
        let _ = write!(node, "{}", i + 1);
        for x in &v[..d] {
            let _ = write!(node, " {x:.16e}");
        }
        if let Some(m) = &mesh.markers {
            let _ = write!(node, " {}", m[i]);
        }
        node.push('\n');
    }
    let mut ele = String::new();
    let _ = writeln!(ele, "{} {} 0", mesh.num_elements(), d + 1);
    for (k, e) in mesh.elements().enumerate() {
        let _ = write!(ele, "{}", k + 1);
        for v in e {
            let _ = write!(ele, " {}", v + 1);
        }
        ele.push('\n');
    }
    (node, ele)
}

pub fn read_mesh_files(node: &Path, ele: &Path) -> Result<SimplicialMesh> {
    read_mesh(&fs::read_to_string(node)?, &fs::read_to_string(ele)?)
}

/// Writes `contents` to a sibling `.tmp` file, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_mesh_files(mesh: &SimplicialMesh, node: &Path, ele: &Path) -> Result<()> {
    let (n, e) = write_mesh(mesh);
    write_atomic(node, &n)?;
    write_atomic(ele, &e)
}

/// One value per vertex, whitespace separated, `#` comments allowed.
pub fn read_nodal_field(text: &str, expected: usize) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(expected);
    let mut lines = Lines::new(text);
    while let Some((line, toks)) = lines.next_tokens() {
        for t in toks {
            values.push(parse::<f64>(t, line, "nodal value")?);
        }
    }
    if values.len() != expected {
        return Err(Error::Parse {
            line: 0,
            message: format!("nodal field has {} values, mesh has {expected} vertices", values.len()),
        });
    }
    Ok(values)
}

pub fn write_nodal_field(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 24);
    for v in values {
        let _ = writeln!(s, "{v:.16e}");
    }
    s
}
