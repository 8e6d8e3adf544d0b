//! Facet-data text format.
//!
//! ```text
//! NODES <count>
//! <id> <x> <y> <z> <d_p>
//! TETS <count>
//! <id> <n1> <n2> <n3> <n4>
//! FACETS <count>
//! <id> <nI> <nJ> <A_0k> <cx> <cy> <cz> <n0x> <n0y> <n0z> <mx> <my> <mz> <lx> <ly> <lz> [A_k]
//! ```
//!
//! `#` starts a comment. The optional trailing `A_k` column is checked
//! against the derived projected area.

use super::{validate_mesh, FacetRecord, Mesh, Node};
use crate::{Error, Result, Scalar, Vec3};
use std::io::Write;
use std::path::Path;

pub fn load_mesh<T: Scalar>(path: impl AsRef<Path>) -> Result<Mesh<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading mesh {}", path.display()), e))?;
    parse_mesh(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    /// Next non-empty line with comments stripped, as (1-based line, tokens).
    fn next_tokens(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (k, raw) in self.inner.by_ref() {
            let body = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = body.split_whitespace().collect();
            self.last = k + 1;
            if !tokens.is_empty() {
                return Some((k + 1, tokens));
            }
        }
        None
    }
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn num(line: usize, tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| perr(line, format!("expected a number, found `{tok}`")))
}

fn int(line: usize, tok: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| perr(line, format!("expected a non-negative integer, found `{tok}`")))
}

fn header(lines: &mut Lines<'_>, name: &str) -> Result<usize> {
    let (line, toks) = lines
        .next_tokens()
        .ok_or_else(|| perr(lines.last, format!("missing {name} section")))?;
    if toks.len() != 2 || toks[0] != name {
        return Err(perr(line, format!("expected `{name} <count>`")));
    }
    int(line, toks[1])
}

fn rows<'a>(lines: &mut Lines<'a>, count: usize, section: &str) -> Result<Vec<(usize, Vec<&'a str>)>> {
    (0..count)
        .map(|_| {
            lines
                .next_tokens()
                .ok_or_else(|| perr(lines.last, format!("{section}: fewer rows than declared")))
        })
        .collect()
}

pub fn parse_mesh<T: Scalar>(text: &str) -> Result<Mesh<T>> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };

    let n_nodes = header(&mut lines, "NODES")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for (line, t) in rows(&mut lines, n_nodes, "NODES")? {
        if t.len() != 5 {
            return Err(perr(line, format!("node row needs 5 fields, found {}", t.len())));
        }
        let position = Vec3::from_f64([num(line, t[1])?, num(line, t[2])?, num(line, t[3])?]);
        let diameter = T::lit(num(line, t[4])?);
        if !position.is_finite() || !diameter.is_finite() {
            return Err(perr(line, "non-finite node data"));
        }
        if diameter < T::zero() {
            return Err(perr(line, "negative particle diameter"));
        }
        nodes.push(Node {
            id: int(line, t[0])?,
            position,
            diameter,
        });
    }

    let n_tets = header(&mut lines, "TETS")?;
    let mut tets = Vec::with_capacity(n_tets);
    for (line, t) in rows(&mut lines, n_tets, "TETS")? {
        if t.len() != 5 {
            return Err(perr(line, format!("tet row needs 5 fields, found {}", t.len())));
        }
        tets.push((
            int(line, t[0])?,
            [int(line, t[1])?, int(line, t[2])?, int(line, t[3])?, int(line, t[4])?],
        ));
    }

    let n_facets = header(&mut lines, "FACETS")?;
    let mut records = Vec::with_capacity(n_facets);
    let mut written_area = Vec::with_capacity(n_facets);
    for (line, t) in rows(&mut lines, n_facets, "FACETS")? {
        if t.len() != 16 && t.len() != 17 {
            return Err(perr(line, format!("facet row needs 16 or 17 fields, found {}", t.len())));
        }
        let mut v = [0.0; 13];
        for (slot, tok) in v.iter_mut().zip(&t[3..16]) {
            *slot = num(line, tok)?;
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(perr(line, "non-finite facet data"));
        }
        let id = int(line, t[0])?;
        records.push(FacetRecord {
            id,
            node_i: int(line, t[1])?,
            node_j: int(line, t[2])?,
            raw_area: T::lit(v[0]),
            centroid: Vec3::from_f64([v[1], v[2], v[3]]),
            true_normal: Vec3::from_f64([v[4], v[5], v[6]]),
            tangent_m: Vec3::from_f64([v[7], v[8], v[9]]),
            tangent_l: Vec3::from_f64([v[10], v[11], v[12]]),
        });
        if t.len() == 17 {
            written_area.push((id, line, num(line, t[16])?));
        }
    }
    if let Some((line, _)) = lines.next_tokens() {
        return Err(perr(line, "unexpected content after FACETS section"));
    }

    let mesh = Mesh::from_records(nodes, tets, records)?;

    for (id, line, declared) in written_area {
        let f = mesh.facets.iter().find(|f| f.id == id).expect("facet parsed");
        let derived = f.area.as_f64();
        if (declared - derived).abs() > 1e-10 * derived.abs().max(1.0) {
            return Err(Error::FacetInvariant {
                facet: id,
                check: format!(
                    "projected area on line {line}: file has {declared}, A_0k n_k.n_k0 = {derived}"
                ),
            });
        }
    }

    let report = validate_mesh(&mesh);
    if let Some(v) = report.violations.first() {
        return Err(match v.id {
            Some(facet) if is_facet_check(v.kind) => Error::FacetInvariant {
                facet,
                check: format!("{:?}: {}", v.kind, v.detail),
            },
            _ => Error::Mesh(v.to_string()),
        });
    }
    Ok(mesh)
}

fn is_facet_check(kind: super::ViolationKind) -> bool {
    use super::ViolationKind::*;
    matches!(
        kind,
        EdgeLength | NormalAlignment | FrameOrthonormality | TrueNormal | ProjectedArea | CentroidConsistency
    )
}

/// Serialize in the canonical text format. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_mesh<T: Scalar, W: Write>(m: &Mesh<T>, mut w: W) -> std::io::Result<()> {
    let f = |v: T| v.as_f64();
    writeln!(w, "# LDPM facet data")?;
    writeln!(w, "NODES {}", m.nodes.len())?;
    for n in &m.nodes {
        let p = n.position;
        writeln!(w, "{} {} {} {} {}", n.id, f(p.x), f(p.y), f(p.z), f(n.diameter))?;
    }
    writeln!(w, "TETS {}", m.tets.len())?;
    for t in &m.tets {
        let ids = t.nodes.map(|k| m.nodes[k].id);
        writeln!(w, "{} {} {} {} {}", t.id, ids[0], ids[1], ids[2], ids[3])?;
    }
    writeln!(w, "FACETS {}", m.facets.len())?;
    writeln!(w, "# id nI nJ A0 cx cy cz n0x n0y n0z mx my mz lx ly lz Ak")?;
    for k in &m.facets {
        let (c, n0, mm, l) = (k.centroid, k.true_normal, k.tangent_m, k.tangent_l);
        writeln!(
            w,
            "{} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {}",
            k.id,
            m.nodes[k.node_i].id,
            m.nodes[k.node_j].id,
            f(k.raw_area),
            f(c.x),
            f(c.y),
            f(c.z),
            f(n0.x),
            f(n0.y),
            f(n0.z),
            f(mm.x),
            f(mm.y),
            f(mm.z),
            f(l.x),
            f(l.y),
            f(l.z),
            f(k.area),
        )?;
    }
    Ok(())
}
