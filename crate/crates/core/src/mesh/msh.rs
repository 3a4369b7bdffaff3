//! Reader for Gmsh MSH 2.2 ASCII files.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::{signed_area, Mesh, MeshError, Point};

#[derive(Debug, Error, PartialEq)]
pub enum MshError {
    #[error("line {line}: expected {expected}, found {found:?}")]
    Malformed {
        line: usize,
        expected: &'static str,
        found: String,
    },
    #[error("unsupported MSH version {0} (only 2.2 is accepted)")]
    UnsupportedVersion(String),
    #[error("binary MSH files are not supported")]
    Binary,
    #[error("element {element} references unknown node {node}")]
    UnknownNode { element: usize, node: usize },
    #[error("file contains no triangles")]
    NoTriangles,
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, expected: &'static str) -> Result<&'a str, MshError> {
        loop {
            match self.inner.next() {
                Some((i, l)) => {
                    self.last = i + 1;
                    let l = l.trim();
                    if !l.is_empty() {
                        return Ok(l);
                    }
                }
                None => {
                    return Err(MshError::Malformed {
                        line: self.last + 1,
                        expected,
                        found: "end of file".into(),
                    })
                }
            }
        }
    }

    fn error(&self, expected: &'static str, found: &str) -> MshError {
        MshError::Malformed {
            line: self.last,
            expected,
            found: found.to_string(),
        }
    }

    fn expect(&mut self, header: &'static str) -> Result<(), MshError> {
        let l = self.next(header)?;
        if l == header {
            Ok(())
        } else {
            Err(self.error(header, l))
        }
    }

    fn count(&mut self, expected: &'static str) -> Result<usize, MshError> {
        let l = self.next(expected)?;
        l.parse().map_err(|_| self.error(expected, l))
    }

    fn fields<T: std::str::FromStr>(&mut self, expected: &'static str) -> Result<Vec<T>, MshError> {
        let l = self.next(expected)?;
        l.split_whitespace()
            .map(|f| f.parse::<T>().map_err(|_| self.error(expected, l)))
            .collect()
    }
}

/// Parses an MSH 2.2 ASCII mesh. Line elements (type 1) become facet tags
/// and triangles (type 2) element tags, both named by their physical group.
/// Other element types are ignored and nodes not used by any triangle are
/// dropped, so the returned numbering is dense.
pub fn parse_msh(text: &str) -> Result<Mesh, MshError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    lines.expect("$MeshFormat")?;
    let format = lines.next("version line")?;
    let parts: Vec<&str> = format.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(lines.error("\"2.2 0 8\"", format));
    }
    if parts[0] != "2.2" {
        return Err(MshError::UnsupportedVersion(parts[0].to_string()));
    }
    if parts[1] != "0" {
        return Err(MshError::Binary);
    }
    lines.expect("$EndMeshFormat")?;

    let mut names: HashMap<i64, String> = HashMap::new();
    let mut raw_nodes: HashMap<usize, Point> = HashMap::new();
    let mut lines_by_group: Vec<(i64, usize, [usize; 2])> = Vec::new();
    let mut tris: Vec<(i64, usize, [usize; 3])> = Vec::new();
    let mut seen_nodes = false;
    let mut seen_elements = false;

    while let Ok(header) = lines.next("section header") {
        match header {
            "$PhysicalNames" => {
                let n = lines.count("physical name count")?;
                for _ in 0..n {
                    let l = lines.next("physical name")?;
                    let mut it = l.splitn(3, char::is_whitespace);
                    let (Some(_dim), Some(tag), Some(name)) = (it.next(), it.next(), it.next())
                    else {
                        return Err(lines.error("dim tag \"name\"", l));
                    };
                    let tag: i64 = tag.parse().map_err(|_| lines.error("physical tag", l))?;
                    names.insert(tag, name.trim().trim_matches('"').to_string());
                }
                lines.expect("$EndPhysicalNames")?;
            }
            "$Nodes" => {
                let n = lines.count("node count")?;
                for _ in 0..n {
                    let l = lines.next("node")?;
                    let f: Vec<&str> = l.split_whitespace().collect();
                    if f.len() < 3 {
                        return Err(lines.error("id x y z", l));
                    }
                    let id: usize = f[0].parse().map_err(|_| lines.error("node id", l))?;
                    let x: f64 = f[1].parse().map_err(|_| lines.error("coordinate", l))?;
                    let y: f64 = f[2].parse().map_err(|_| lines.error("coordinate", l))?;
                    raw_nodes.insert(id, Point::new(x, y));
                }
                lines.expect("$EndNodes")?;
                seen_nodes = true;
            }
            "$Elements" => {
                let n = lines.count("element count")?;
                for _ in 0..n {
                    let f: Vec<i64> = lines.fields("element")?;
                    if f.len() < 3 || f.len() < 3 + f[2].max(0) as usize {
                        return Err(lines.error("element record", &format!("{f:?}")));
                    }
                    let (id, kind, ntags) = (f[0] as usize, f[1], f[2] as usize);
                    let physical = if ntags > 0 { f[3] } else { 0 };
                    let vs = &f[3 + ntags..];
                    let want = match kind {
                        1 => 2,
                        2 => 3,
                        _ => continue,
                    };
                    if vs.len() != want {
                        return Err(lines.error("element node list", &format!("{f:?}")));
                    }
                    for &v in vs {
                        if v < 0 || !raw_nodes.contains_key(&(v as usize)) {
                            return Err(MshError::UnknownNode {
                                element: id,
                                node: v.max(0) as usize,
                            });
                        }
                    }
                    if kind == 1 {
                        lines_by_group.push((physical, id, [vs[0] as usize, vs[1] as usize]));
                    } else {
                        tris.push((physical, id, [vs[0] as usize, vs[1] as usize, vs[2] as usize]));
                    }
                }
                lines.expect("$EndElements")?;
                seen_elements = true;
            }
            other if other.starts_with("$End") => {
                return Err(lines.error("section header", other));
            }
            other if other.starts_with('$') => {
                // Unknown section: skip to its end marker.
                let end = format!("$End{}", &other[1..]);
                loop {
                    if lines.next("section end")? == end {
                        break;
                    }
                }
            }
            other => return Err(lines.error("section header", other)),
        }
    }
    if !seen_nodes {
        return Err(lines.error("$Nodes section", "end of file"));
    }
    if !seen_elements || tris.is_empty() {
        return Err(MshError::NoTriangles);
    }

    let mut used: Vec<usize> = tris.iter().flat_map(|t| t.2).collect();
    used.sort_unstable();
    used.dedup();
    let dense: HashMap<usize, usize> = used.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let nodes: Vec<Point> = used.iter().map(|id| raw_nodes[id]).collect();

    let group_name = |g: i64| names.get(&g).cloned().unwrap_or_else(|| g.to_string());
    let mut triangles = Vec::with_capacity(tris.len());
    let mut element_tags: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (t, (group, _, vs)) in tris.iter().enumerate() {
        let mut tri = vs.map(|v| dense[&v]);
        if signed_area(&nodes[tri[0]], &nodes[tri[1]], &nodes[tri[2]]) < 0.0 {
            tri.swap(1, 2);
        }
        triangles.push(tri);
        if *group != 0 {
            element_tags.entry(group_name(*group)).or_default().push(t);
        }
    }
    let mut facet_tags: BTreeMap<String, Vec<[usize; 2]>> = BTreeMap::new();
    for (group, id, [a, b]) in &lines_by_group {
        if *group == 0 {
            continue;
        }
        let (Some(&a), Some(&b)) = (dense.get(a), dense.get(b)) else {
            return Err(MshError::UnknownNode {
                element: *id,
                node: if dense.contains_key(a) { *b } else { *a },
            });
        };
        facet_tags.entry(group_name(*group)).or_default().push([a, b]);
    }
    Ok(Mesh::new(nodes, triangles, facet_tags, element_tags)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n\
$PhysicalNames\n1\n2 1 \"exterior\"\n$EndPhysicalNames\n\
$Nodes\n3\n1 0 0 0\n2 1 0 0\n3 0 1 0\n$EndNodes\n\
$Elements\n1\n1 2 2 1 1 1 2 3\n$EndElements\n";

    #[test]
    fn minimal_file() {
        let mesh = parse_msh(MINIMAL).unwrap();
        assert_eq!(mesh.num_nodes(), 3);
        assert_eq!(mesh.num_triangles(), 1);
        assert_eq!(mesh.region("exterior"), &[0]);
    }

    #[test]
    fn rejects_version_4() {
        let text = MINIMAL.replace("2.2 0 8", "4.1 0 8");
        assert_eq!(
            parse_msh(&text).unwrap_err(),
            MshError::UnsupportedVersion("4.1".into())
        );
    }

    #[test]
    fn rejects_binary() {
        let text = MINIMAL.replace("2.2 0 8", "2.2 1 8");
        assert_eq!(parse_msh(&text).unwrap_err(), MshError::Binary);
    }

    #[test]
    fn rejects_unknown_node() {
        let text = MINIMAL.replace("1 2 2 1 1 1 2 3", "1 2 2 1 1 1 2 7");
        assert_eq!(
            parse_msh(&text).unwrap_err(),
            MshError::UnknownNode { element: 1, node: 7 }
        );
    }

    #[test]
    fn rejects_bad_header() {
        let text = MINIMAL.replace("$Nodes", "$Nodez");
        assert!(parse_msh(&text).is_err());
        let text = MINIMAL.replace("$EndNodes", "$EndNodez");
        assert!(matches!(parse_msh(&text), Err(MshError::Malformed { .. })));
    }

    #[test]
    fn rejects_empty_triangle_set() {
        let text = MINIMAL.replace("1 2 2 1 1 1 2 3", "1 1 2 1 1 1 2");
        assert_eq!(parse_msh(&text).unwrap_err(), MshError::NoTriangles);
    }

    #[test]
    fn flips_clockwise_triangles() {
        let text = MINIMAL.replace("1 2 2 1 1 1 2 3", "1 2 2 1 1 1 3 2");
        let mesh = parse_msh(&text).unwrap();
        assert!(mesh.triangle_area(0) > 0.0);
    }
}
