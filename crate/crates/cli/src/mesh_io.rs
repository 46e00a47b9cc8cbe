//! Tetgen `.node`/`.ele` files, legacy VTK output, and plain coordinate dumps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anm_core::fem::{TetMesh, Vec3};

use crate::InputError;

/// A mesh read from disk, with the index base used by its files.
#[derive(Clone, Debug)]
pub struct LoadedMesh {
    pub mesh: TetMesh,
    pub base: usize,
}

/// `path` may name the `.node` file, the `.ele` file, or their common stem.
pub fn mesh_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("node") | Some("ele") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let with = |ext: &str| {
        let mut s = stem.clone().into_os_string();
        s.push(".");
        s.push(ext);
        PathBuf::from(s)
    };
    (with("node"), with("ele"))
}

/// Numbered, non-comment lines.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("");
        let f: Vec<&str> = l.split_whitespace().collect();
        (!f.is_empty()).then_some((i + 1, f))
    })
}

fn num<T: std::str::FromStr>(file: &Path, line: usize, field: &str, what: &str) -> Result<T, InputError> {
    field
        .parse()
        .map_err(|_| InputError::at(file, line, format!("cannot read {what} from '{field}'")))
}

fn read(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|e| InputError::new(format!("{}: {e}", path.display())))
}

pub fn parse_node(path: &Path, text: &str) -> Result<(Vec<Vec3>, usize), InputError> {
    let mut lines = data_lines(text);
    let (hl, header) = lines
        .next()
        .ok_or_else(|| InputError::new(format!("{}: empty node file", path.display())))?;
    let count: usize = num(path, hl, header[0], "node count")?;
    if let Some(d) = header.get(1) {
        let dim: usize = num(path, hl, d, "dimension")?;
        if dim != 3 {
            return Err(InputError::at(path, hl, format!("dimension {dim} is not 3")));
        }
    }
    let mut nodes = Vec::with_capacity(count);
    let mut base = 0;
    for (line, f) in lines.by_ref().take(count) {
        if f.len() < 4 {
            return Err(InputError::at(path, line, "expected index and three coordinates"));
        }
        let idx: usize = num(path, line, f[0], "node index")?;
        if nodes.is_empty() {
            base = idx;
            if base > 1 {
                return Err(InputError::at(path, line, format!("first index {idx} is neither 0 nor 1")));
            }
        }
        if idx != base + nodes.len() {
            return Err(InputError::at(path, line, format!("expected node index {}, found {idx}", base + nodes.len())));
        }
        let mut p = [0.0; 3];
        for c in 0..3 {
            p[c] = num(path, line, f[c + 1], "coordinate")?;
        }
        nodes.push(p);
    }
    if nodes.len() != count {
        return Err(InputError::new(format!(
            "{}: header declares {count} nodes, found {}",
            path.display(),
            nodes.len()
        )));
    }
    Ok((nodes, base))
}

pub fn parse_ele(path: &Path, text: &str, base: usize) -> Result<Vec<[usize; 4]>, InputError> {
    let mut lines = data_lines(text);
    let (hl, header) = lines
        .next()
        .ok_or_else(|| InputError::new(format!("{}: empty element file", path.display())))?;
    let count: usize = num(path, hl, header[0], "element count")?;
    if let Some(k) = header.get(1) {
        let k: usize = num(path, hl, k, "nodes per element")?;
        if k != 4 {
            return Err(InputError::at(path, hl, format!("{k}-node elements are not supported")));
        }
    }
    let mut tets = Vec::with_capacity(count);
    for (line, f) in lines.take(count) {
        if f.len() < 5 {
            return Err(InputError::at(path, line, "expected index and four node indices"));
        }
        let mut t = [0; 4];
        for j in 0..4 {
            let v: usize = num(path, line, f[j + 1], "node index")?;
            t[j] = v
                .checked_sub(base)
                .ok_or_else(|| InputError::at(path, line, format!("node index {v} below base {base}")))?;
        }
        tets.push(t);
    }
    if tets.len() != count {
        return Err(InputError::new(format!(
            "{}: header declares {count} elements, found {}",
            path.display(),
            tets.len()
        )));
    }
    Ok(tets)
}

pub fn load_mesh(path: &Path) -> Result<LoadedMesh, InputError> {
    let (np, ep) = mesh_paths(path);
    let (nodes, base) = parse_node(&np, &read(&np)?)?;
    let tets = parse_ele(&ep, &read(&ep)?, base)?;
    let mesh = TetMesh::new(nodes, tets).map_err(|e| InputError::new(format!("{}: {e}", ep.display())))?;
    Ok(LoadedMesh { mesh, base })
}

fn fmt_coord(out: &mut String, p: &Vec3) {
    let _ = write!(out, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2]);
}

pub fn node_text(coords: &[Vec3], base: usize) -> String {
    let mut s = format!("{} 3 0 0\n", coords.len());
    for (i, p) in coords.iter().enumerate() {
        let _ = write!(s, "{} ", i + base);
        fmt_coord(&mut s, p);
        s.push('\n');
    }
    s
}

pub fn ele_text(tets: &[[usize; 4]], base: usize) -> String {
    let mut s = format!("{} 4 0\n", tets.len());
    for (i, t) in tets.iter().enumerate() {
        let _ = writeln!(s, "{} {} {} {} {}", i + base, t[0] + base, t[1] + base, t[2] + base, t[3] + base);
    }
    s
}

/// Writes `<stem>.node` and `<stem>.ele`.
pub fn write_mesh(stem: &Path, coords: &[Vec3], tets: &[[usize; 4]], base: usize) -> std::io::Result<()> {
    let (np, ep) = mesh_paths(stem);
    fs::write(np, node_text(coords, base))?;
    fs::write(ep, ele_text(tets, base))
}

/// Legacy ASCII VTK unstructured grid.
pub fn vtk_text(title: &str, coords: &[Vec3], tets: &[[usize; 4]]) -> String {
    let mut s = format!("# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS {} double\n", coords.len());
    for p in coords {
        fmt_coord(&mut s, p);
        s.push('\n');
    }
    let _ = writeln!(s, "CELLS {} {}", tets.len(), 5 * tets.len());
    for t in tets {
        let _ = writeln!(s, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", tets.len());
    for _ in tets {
        s.push_str("10\n");
    }
    s
}

/// One `x y z` line per node.
pub fn coords_text(coords: &[Vec3]) -> String {
    let mut s = String::with_capacity(coords.len() * 72);
    for p in coords {
        fmt_coord(&mut s, p);
        s.push('\n');
    }
    s
}

pub fn parse_coords(path: &Path, text: &str) -> Result<Vec<Vec3>, InputError> {
    data_lines(text)
        .map(|(line, f)| {
            if f.len() != 3 {
                return Err(InputError::at(path, line, "expected three coordinates"));
            }
            let mut p = [0.0; 3];
            for c in 0..3 {
                p[c] = num(path, line, f[c], "coordinate")?;
            }
            Ok(p)
        })
        .collect()
}

/// One value per line.
pub fn parse_values(path: &Path, text: &str) -> Result<Vec<f64>, InputError> {
    data_lines(text)
        .map(|(line, f)| {
            if f.len() != 1 {
                return Err(InputError::at(path, line, "expected one value"));
            }
            num(path, line, f[0], "value")
        })
        .collect()
}

pub fn values_text(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.17e}\n")).collect()
}

pub fn load_values(path: &Path) -> Result<Vec<f64>, InputError> {
    parse_values(path, &read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NODE: &str = "# unit tet\n4 3 0 0\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1 # apex\n";
    const ELE: &str = "1 4 0\n1 1 2 3 4\n";

    #[test]
    fn one_based_round_trip() {
        let p = Path::new("t.node");
        let (nodes, base) = parse_node(p, NODE).unwrap();
        assert_eq!(base, 1);
        assert_eq!(nodes[3], [0.0, 0.0, 1.0]);
        let tets = parse_ele(p, ELE, base).unwrap();
        assert_eq!(tets, vec![[0, 1, 2, 3]]);
        let (again, b2) = parse_node(p, &node_text(&nodes, base)).unwrap();
        assert_eq!((again, b2), (nodes, 1));
        assert_eq!(parse_ele(p, &ele_text(&tets, 0), 0).unwrap(), tets);
    }

    #[test]
    fn diagnostics_name_the_line() {
        let p = Path::new("bad.node");
        let e = parse_node(p, "2 3 0 0\n0 0 0 0\n1 0 x 0\n").unwrap_err();
        assert!(e.to_string().contains("bad.node:3"), "{e}");
        let e = parse_node(p, "3 3 0 0\n0 0 0 0\n").unwrap_err();
        assert!(e.to_string().contains("declares 3"), "{e}");
        let e = parse_ele(p, "1 10 0\n", 0).unwrap_err();
        assert!(e.to_string().contains("10-node"), "{e}");
    }

    #[test]
    fn vtk_layout() {
        let (nodes, _) = parse_node(Path::new("t"), NODE).unwrap();
        let v = vtk_text("t", &nodes, &[[0, 1, 2, 3]]);
        assert!(v.contains("POINTS 4 double"));
        assert!(v.contains("CELLS 1 5\n4 0 1 2 3"));
        assert!(v.ends_with("CELL_TYPES 1\n10\n"));
        assert_eq!(parse_coords(Path::new("c"), &coords_text(&nodes)).unwrap(), nodes);
    }
}
