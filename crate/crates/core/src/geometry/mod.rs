//! LDPM mesh description: particles (nodes), tetrahedra and facets.
//!
//! Facet data is ingested from the text format in [`io`] or synthesized by
//! [`fixture`]. Everything a facet needs for strain evaluation and force
//! assembly (edge length, projected area, local frame, centroid arms) is
//! derived once at construction and stored on the [`Facet`].

mod dofs;
pub mod fixture;
pub mod io;
mod validate;

pub use dofs::{Constraint, ConstraintKind, ConstraintSet, Dof, DofMap, DOFS_PER_NODE};
pub use fixture::{build_fixture, Fixture, LatticeShape, LatticeSpec};
pub use io::{load_mesh, parse_mesh, write_mesh};
pub use validate::{validate_mesh, ValidationReport, Violation, ViolationKind};

use crate::{Error, Result, Scalar, Vec3};
use std::collections::HashMap;

#[derive(Clone, Debug, PartialEq)]
pub struct Node<T> {
    pub id: usize,
    pub position: Vec3<T>,
    /// Particle diameter d_p in mm (zero for virtual nodes).
    pub diameter: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tet<T> {
    pub id: usize,
    /// Node indices (positions in `Mesh::nodes`), positively oriented.
    pub nodes: [usize; 4],
    /// Reference volume V_0 in mm³.
    pub volume: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Facet<T> {
    pub id: usize,
    /// Node indices (positions in `Mesh::nodes`).
    pub node_i: usize,
    pub node_j: usize,
    /// Tetrahedron (index) whose volumetric strain feeds this facet.
    pub tet: Option<usize>,
    /// Edge length l_k = |x_J - x_I|.
    pub length: T,
    pub centroid: Vec3<T>,
    /// Projected area A_k = A_0k (n_k . n_k0).
    pub area: T,
    /// Raw triangle area A_0k.
    pub raw_area: T,
    pub normal: Vec3<T>,
    pub tangent_m: Vec3<T>,
    pub tangent_l: Vec3<T>,
    /// True normal n_k0 of the facet triangle.
    pub true_normal: Vec3<T>,
    /// c_I: node I to centroid.
    pub arm_i: Vec3<T>,
    /// c_J: node J to centroid.
    pub arm_j: Vec3<T>,
}

impl<T: Scalar> Facet<T> {
    /// Local frame P_k = [n, m, l] as columns.
    pub fn frame(&self) -> [Vec3<T>; 3] {
        [self.normal, self.tangent_m, self.tangent_l]
    }
}

/// Facet fields as stored in a file, before derivation.
#[derive(Clone, Debug, PartialEq)]
pub struct FacetRecord<T> {
    pub id: usize,
    pub node_i: usize,
    pub node_j: usize,
    pub raw_area: T,
    pub centroid: Vec3<T>,
    pub true_normal: Vec3<T>,
    pub tangent_m: Vec3<T>,
    pub tangent_l: Vec3<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh<T> {
    pub nodes: Vec<Node<T>>,
    pub tets: Vec<Tet<T>>,
    pub facets: Vec<Facet<T>>,
    /// Cell volume V_I per node (mm³).
    pub cell_volumes: Vec<T>,
}

pub(crate) fn signed_volume<T: Scalar>(p: [Vec3<T>; 4]) -> T {
    (p[1] - p[0]).dot((p[2] - p[0]).cross(p[3] - p[0])) / T::lit(6.0)
}

/// Unit tangent m: global z projected onto the plane normal to `n`, or the
/// global y axis when `n` is (anti)parallel to z.
pub fn default_tangent<T: Scalar>(n: Vec3<T>) -> Vec3<T> {
    let axis = if T::one() - n.z.abs() <= T::lit(1e-6) {
        Vec3::unit(1)
    } else {
        Vec3::unit(2)
    };
    (axis - n * n.dot(axis)).normalized()
}

impl<T: Scalar> Mesh<T> {
    /// Build a mesh from node, tetrahedron (node ids) and facet records
    /// (node ids), deriving all dependent facet quantities.
    pub fn from_records(
        nodes: Vec<Node<T>>,
        tets: Vec<(usize, [usize; 4])>,
        facets: Vec<FacetRecord<T>>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (k, n) in nodes.iter().enumerate() {
            if index.insert(n.id, k).is_some() {
                return Err(Error::Mesh(format!("duplicate node id {}", n.id)));
            }
        }
        let lookup = |id: usize, what: &str| {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::Mesh(format!("{what} references unknown node {id}")))
        };

        let mut mesh_tets = Vec::with_capacity(tets.len());
        for (id, ids) in tets {
            let mut idx = [0; 4];
            for (slot, nid) in idx.iter_mut().zip(ids) {
                *slot = lookup(nid, &format!("tetrahedron {id}"))?;
            }
            let v = signed_volume(idx.map(|k| nodes[k].position));
            mesh_tets.push(Tet { id, nodes: idx, volume: v });
        }

        let mut edge_tets: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tet) in mesh_tets.iter().enumerate() {
            for a in 0..4 {
                for b in (a + 1)..4 {
                    let key = edge_key(tet.nodes[a], tet.nodes[b]);
                    edge_tets.entry(key).or_default().push(t);
                }
            }
        }

        let mut mesh_facets = Vec::with_capacity(facets.len());
        for rec in facets {
            let i = lookup(rec.node_i, &format!("facet {}", rec.id))?;
            let j = lookup(rec.node_j, &format!("facet {}", rec.id))?;
            let xi = nodes[i].position;
            let xj = nodes[j].position;
            let d = xj - xi;
            let length = d.norm();
            if !(length > T::zero()) {
                return Err(Error::FacetInvariant {
                    facet: rec.id,
                    check: "zero edge length".into(),
                });
            }
            let normal = d / length;
            let tet = edge_tets
                .get(&edge_key(i, j))
                .and_then(|cands| parent_tet(&nodes, &mesh_tets, cands, rec.centroid));
            mesh_facets.push(Facet {
                id: rec.id,
                node_i: i,
                node_j: j,
                tet,
                length,
                centroid: rec.centroid,
                area: rec.raw_area * normal.dot(rec.true_normal),
                raw_area: rec.raw_area,
                normal,
                tangent_m: rec.tangent_m,
                tangent_l: rec.tangent_l,
                true_normal: rec.true_normal,
                arm_i: rec.centroid - xi,
                arm_j: rec.centroid - xj,
            });
        }

        let cell_volumes = cell_volumes(nodes.len(), &mesh_tets, &mesh_facets);
        Ok(Self {
            nodes,
            tets: mesh_tets,
            facets: mesh_facets,
            cell_volumes,
        })
    }

    pub fn dof_count(&self) -> usize {
        self.nodes.len() * DOFS_PER_NODE
    }

    pub fn total_volume(&self) -> T {
        if self.tets.is_empty() {
            self.facets
                .iter()
                .map(|f| f.area * f.length / T::lit(3.0))
                .sum()
        } else {
            self.tets.iter().map(|t| t.volume).sum()
        }
    }

    /// Axis-aligned bounding box (min, max).
    pub fn bounds(&self) -> (Vec3<T>, Vec3<T>) {
        let mut lo = Vec3::new(T::infinity(), T::infinity(), T::infinity());
        let mut hi = -lo;
        for n in &self.nodes {
            let p = n.position;
            lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        (lo, hi)
    }

    /// Tetrahedron faces that belong to a single tetrahedron, oriented
    /// outwards, in ascending order of their sorted node triples.
    pub fn boundary_faces(&self) -> Vec<[usize; 3]> {
        let mut faces: HashMap<[usize; 3], (usize, [usize; 3])> = HashMap::new();
        for t in &self.tets {
            let v = t.nodes;
            // Each face with its opposite vertex; winding is fixed up below.
            for (face, opp) in [
                ([v[1], v[2], v[3]], v[0]),
                ([v[0], v[3], v[2]], v[1]),
                ([v[0], v[1], v[3]], v[2]),
                ([v[0], v[2], v[1]], v[3]),
            ] {
                let mut key = face;
                key.sort_unstable();
                let p = |i: usize| self.nodes[i].position;
                let n = (p(face[1]) - p(face[0])).cross(p(face[2]) - p(face[0]));
                let oriented = if n.dot(p(opp) - p(face[0])) > T::zero() {
                    [face[0], face[2], face[1]]
                } else {
                    face
                };
                faces.entry(key).or_insert((0, oriented)).0 += 1;
            }
        }
        let mut out: Vec<([usize; 3], [usize; 3])> = faces
            .into_iter()
            .filter(|(_, (c, _))| *c == 1)
            .map(|(k, (_, f))| (k, f))
            .collect();
        out.sort_unstable();
        out.into_iter().map(|(_, f)| f).collect()
    }

    /// Nodes lying on a boundary face (all nodes when there are no tets).
    pub fn boundary_nodes(&self) -> Vec<bool> {
        if self.tets.is_empty() {
            return vec![true; self.nodes.len()];
        }
        let mut on = vec![false; self.nodes.len()];
        for f in self.boundary_faces() {
            for n in f {
                on[n] = true;
            }
        }
        on
    }

    /// Content hash of the canonical text serialization.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut text = Vec::new();
        write_mesh(self, &mut text).expect("writing to memory");
        Sha256::digest(&text)
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Longest facet edge.
    pub fn max_edge_length(&self) -> T {
        self.facets
            .iter()
            .map(|f| f.length)
            .fold(T::zero(), |a, b| a.max(b))
    }

    pub fn cast<U: Scalar>(&self) -> Mesh<U> {
        let c = |v: T| U::lit(v.as_f64());
        Mesh {
            nodes: self
                .nodes
                .iter()
                .map(|n| Node {
                    id: n.id,
                    position: n.position.cast(),
                    diameter: c(n.diameter),
                })
                .collect(),
            tets: self
                .tets
                .iter()
                .map(|t| Tet {
                    id: t.id,
                    nodes: t.nodes,
                    volume: c(t.volume),
                })
                .collect(),
            facets: self
                .facets
                .iter()
                .map(|f| Facet {
                    id: f.id,
                    node_i: f.node_i,
                    node_j: f.node_j,
                    tet: f.tet,
                    length: c(f.length),
                    centroid: f.centroid.cast(),
                    area: c(f.area),
                    raw_area: c(f.raw_area),
                    normal: f.normal.cast(),
                    tangent_m: f.tangent_m.cast(),
                    tangent_l: f.tangent_l.cast(),
                    true_normal: f.true_normal.cast(),
                    arm_i: f.arm_i.cast(),
                    arm_j: f.arm_j.cast(),
                })
                .collect(),
            cell_volumes: self.cell_volumes.iter().map(|&v| c(v)).collect(),
        }
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Among the tetrahedra sharing a facet's edge, the one containing the facet
/// centroid (largest minimum barycentric coordinate).
fn parent_tet<T: Scalar>(
    nodes: &[Node<T>],
    tets: &[Tet<T>],
    candidates: &[usize],
    centroid: Vec3<T>,
) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for &t in candidates {
        let p = tets[t].nodes.map(|k| nodes[k].position);
        let v = signed_volume(p);
        if !(v.abs() > T::zero()) {
            continue;
        }
        let mut min_bary = T::infinity();
        for k in 0..4 {
            let mut q = p;
            q[k] = centroid;
            min_bary = min_bary.min(signed_volume(q) / v);
        }
        if best.map_or(true, |(_, b)| min_bary > b) {
            best = Some((t, min_bary));
        }
    }
    best.map(|(t, _)| t)
}

/// V_I by equal split of tetrahedron volumes; meshes without tetrahedra fall
/// back to the facet pyramids A_k l_k / 6 on either side of each facet.
fn cell_volumes<T: Scalar>(n_nodes: usize, tets: &[Tet<T>], facets: &[Facet<T>]) -> Vec<T> {
    let mut v = vec![T::zero(); n_nodes];
    if tets.is_empty() {
        for f in facets {
            let share = f.area * f.length / T::lit(6.0);
            v[f.node_i] += share;
            v[f.node_j] += share;
        }
    } else {
        let quarter = T::lit(0.25);
        for t in tets {
            for &n in &t.nodes {
                v[n] += t.volume * quarter;
            }
        }
    }
    v
}
