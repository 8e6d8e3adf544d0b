//! Synthetic verification meshes.
//!
//! Besides the analytic single-facet, chain and single-tetrahedron fixtures,
//! structured lattices are produced for desk-scale benchmarks: particles sit
//! on a (jittered) grid, every grid cube is split into six tetrahedra, and
//! each tetrahedron edge receives the two LDPM facets spanned by the edge
//! point, an adjacent face centroid and the tetrahedron centroid.

use super::{default_tangent, signed_volume, FacetRecord, Mesh, Node};
use crate::{Result, Scalar, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Fixture {
    /// Two particles on the x axis joined by one facet.
    SingleFacet { length: f64, area: f64 },
    /// `count` collinear facets along x.
    TwoParticleChain {
        count: usize,
        #[serde(default = "default_chain_length")]
        length: f64,
        #[serde(default = "default_chain_area")]
        area: f64,
    },
    /// One irregular tetrahedron with its twelve facets.
    SingleTet {
        #[serde(default = "default_tet_size")]
        size: f64,
    },
    Lattice(LatticeSpec),
}

fn default_chain_length() -> f64 {
    100.0
}
fn default_chain_area() -> f64 {
    100.0
}
fn default_tet_size() -> f64 {
    20.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub shape: LatticeShape,
    /// Target grid spacing in mm.
    pub spacing: f64,
    /// Interior-node jitter as a fraction of the spacing (|jitter| < 0.2).
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub seed: u64,
    /// Particle diameter as a fraction of the spacing.
    #[serde(default = "default_diameter_ratio")]
    pub diameter_ratio: f64,
}

fn default_diameter_ratio() -> f64 {
    0.4
}

/// Specimen outlines; the loading axis is z throughout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LatticeShape {
    Prism { width: f64, depth: f64, height: f64 },
    Cylinder { diameter: f64, height: f64 },
    /// Tension specimen of width `width` narrowing along circular arcs to
    /// `neck` at mid-height; thickness along y.
    DogBone {
        width: f64,
        neck: f64,
        thickness: f64,
        height: f64,
    },
    /// Beam spanning x, depth along z, central notch cut from z = 0.
    NotchedBeam {
        length: f64,
        depth: f64,
        thickness: f64,
        notch_depth: f64,
        notch_width: f64,
    },
}

impl LatticeShape {
    fn extent(&self) -> [f64; 3] {
        match *self {
            LatticeShape::Prism { width, depth, height } => [width, depth, height],
            LatticeShape::Cylinder { diameter, height } => [diameter, diameter, height],
            LatticeShape::DogBone {
                width,
                thickness,
                height,
                ..
            } => [width, thickness, height],
            LatticeShape::NotchedBeam {
                length,
                depth,
                thickness,
                ..
            } => [length, thickness, depth],
        }
    }

    /// Whether a grid cube centred at `c` (cube size `h`) belongs to the body.
    fn contains(&self, c: [f64; 3], h: [f64; 3]) -> bool {
        let ext = self.extent();
        match *self {
            LatticeShape::Prism { .. } => true,
            LatticeShape::Cylinder { diameter, .. } => {
                let (dx, dy) = (c[0] - ext[0] / 2.0, c[1] - ext[1] / 2.0);
                (dx * dx + dy * dy).sqrt() <= diameter / 2.0
            }
            LatticeShape::DogBone {
                width,
                neck,
                height,
                ..
            } => {
                let half = dogbone_half_width(width, neck, height, c[2]);
                (c[0] - width / 2.0).abs() <= half + 1e-9 * width
            }
            LatticeShape::NotchedBeam {
                length,
                notch_depth,
                notch_width,
                ..
            } => {
                let in_slot = (c[0] - length / 2.0).abs() < notch_width.max(h[0]) / 2.0;
                !(in_slot && c[2] < notch_depth)
            }
        }
    }
}

/// Half-width of the dog-bone outline at height z: circular arcs of radius R
/// joining the neck at mid-height to the full width at both ends.
pub fn dogbone_half_width(width: f64, neck: f64, height: f64, z: f64) -> f64 {
    let drop = (width - neck) / 2.0;
    let half_h = height / 2.0;
    let radius = (drop * drop + half_h * half_h) / (2.0 * drop);
    let dz = (z - half_h).abs().min(half_h);
    neck / 2.0 + radius - (radius * radius - dz * dz).max(0.0).sqrt()
}

pub fn build_fixture<T: Scalar>(kind: &Fixture) -> Result<Mesh<T>> {
    match kind {
        Fixture::SingleFacet { length, area } => chain(1, *length, *area),
        Fixture::TwoParticleChain {
            count,
            length,
            area,
        } => chain((*count).max(1), *length, *area),
        Fixture::SingleTet { size } => single_tet(*size),
        Fixture::Lattice(spec) => lattice(spec),
    }
}

fn chain<T: Scalar>(count: usize, length: f64, area: f64) -> Result<Mesh<T>> {
    let nodes: Vec<Node<T>> = (0..=count)
        .map(|k| Node {
            id: k,
            position: Vec3::from_f64([k as f64 * length, 0.0, 0.0]),
            diameter: T::lit(0.5 * length),
        })
        .collect();
    let n = Vec3::<T>::unit(0);
    let m = default_tangent(n);
    let facets = (0..count)
        .map(|k| FacetRecord {
            id: k,
            node_i: k,
            node_j: k + 1,
            raw_area: T::lit(area),
            centroid: Vec3::from_f64([(k as f64 + 0.5) * length, 0.0, 0.0]),
            true_normal: n,
            tangent_m: m,
            tangent_l: n.cross(m),
        })
        .collect();
    Mesh::from_records(nodes, Vec::new(), facets)
}

fn single_tet<T: Scalar>(s: f64) -> Result<Mesh<T>> {
    let pts = [
        [0.0, 0.0, 0.0],
        [s, 0.0, 0.0],
        [0.4 * s, 0.9 * s, 0.0],
        [0.3 * s, 0.35 * s, 0.85 * s],
    ];
    let positions: Vec<Vec3<T>> = pts.iter().map(|&p| Vec3::from_f64(p)).collect();
    let diameters = vec![T::lit(0.3 * s); 4];
    tessellate(&positions, &diameters, &[[0, 1, 2, 3]])
}

fn lattice<T: Scalar>(spec: &LatticeSpec) -> Result<Mesh<T>> {
    let ext = spec.shape.extent();
    let cells = ext.map(|e| ((e / spec.spacing).round() as usize).max(1));
    let h = [0, 1, 2].map(|a| ext[a] / cells[a] as f64);
    let (nx, ny, nz) = (cells[0], cells[1], cells[2]);

    let mut active = vec![false; nx * ny * nz];
    let cube = |i: usize, j: usize, k: usize| (k * ny + j) * nx + i;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let c = [
                    (i as f64 + 0.5) * h[0],
                    (j as f64 + 0.5) * h[1],
                    (k as f64 + 0.5) * h[2],
                ];
                active[cube(i, j, k)] = spec.shape.contains(c, h);
            }
        }
    }

    let grid = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    let mut used = vec![false; (nx + 1) * (ny + 1) * (nz + 1)];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if active[cube(i, j, k)] {
                    for c in 0..8 {
                        used[grid(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1))] = true;
                    }
                }
            }
        }
    }
    let mut index = vec![usize::MAX; used.len()];
    let mut positions = Vec::new();
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let g = grid(i, j, k);
                if used[g] {
                    index[g] = positions.len();
                    positions.push([i as f64 * h[0], j as f64 * h[1], k as f64 * h[2]]);
                }
            }
        }
    }

    // Kuhn split: six tetrahedra along the cube diagonal, one per axis order.
    const ORDERS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if !active[cube(i, j, k)] {
                    continue;
                }
                for order in ORDERS {
                    let mut corner = [0usize; 3];
                    let mut ids = [index[grid(i, j, k)]; 4];
                    for (s, &axis) in order.iter().enumerate() {
                        corner[axis] = 1;
                        ids[s + 1] = index[grid(i + corner[0], j + corner[1], k + corner[2])];
                    }
                    tets.push(ids);
                }
            }
        }
    }

    let mut positions: Vec<Vec3<T>> = positions.into_iter().map(Vec3::from_f64).collect();
    for t in tets.iter_mut() {
        if signed_volume(t.map(|k| positions[k])) < T::zero() {
            t.swap(2, 3);
        }
    }

    if spec.jitter != 0.0 {
        let jitter = spec.jitter.clamp(-0.2, 0.2);
        let boundary = boundary_flags(positions.len(), &tets);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for (p, on_boundary) in positions.iter_mut().zip(boundary) {
            let d: [f64; 3] = [0, 1, 2].map(|a| rng.gen_range(-1.0..=1.0) * jitter * h[a]);
            if !on_boundary {
                *p += Vec3::from_f64(d);
            }
        }
    }

    let d = spec.diameter_ratio * h.iter().cloned().fold(f64::INFINITY, f64::min);
    let diameters = vec![T::lit(d); positions.len()];
    tessellate(&positions, &diameters, &tets)
}

fn boundary_flags(n: usize, tets: &[[usize; 4]]) -> Vec<bool> {
    use std::collections::HashMap;
    let mut faces: HashMap<[usize; 3], u32> = HashMap::new();
    for t in tets {
        for skip in 0..4 {
            let mut f: Vec<usize> = (0..4).filter(|&a| a != skip).map(|a| t[a]).collect();
            f.sort_unstable();
            *faces.entry([f[0], f[1], f[2]]).or_default() += 1;
        }
    }
    let mut on = vec![false; n];
    for (f, c) in faces {
        if c == 1 {
            f.iter().for_each(|&k| on[k] = true);
        }
    }
    on
}

/// Build the twelve facets of every tetrahedron and assemble the mesh.
/// Node ids equal indices; tet vertices must be positively oriented.
pub fn tessellate<T: Scalar>(
    positions: &[Vec3<T>],
    diameters: &[T],
    tets: &[[usize; 4]],
) -> Result<Mesh<T>> {
    const EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let third = T::lit(1.0 / 3.0);
    let mut facets = Vec::with_capacity(tets.len() * 12);
    for t in tets {
        let p = t.map(|k| positions[k]);
        let center = (p[0] + p[1] + p[2] + p[3]) * T::lit(0.25);
        for (a, b) in EDGES {
            let (i, j) = (t[a].min(t[b]), t[a].max(t[b]));
            let (xi, xj) = (positions[i], positions[j]);
            let edge = xj - xi;
            let len = edge.norm();
            // Point midway across the gap between the two particle surfaces.
            let (ri, rj) = (diameters[i] * T::half(), diameters[j] * T::half());
            let s = ((len + ri - rj) * T::half() / len).max(T::lit(0.1)).min(T::lit(0.9));
            let edge_point = xi + edge * s;
            for other in (0..4).filter(|&c| c != a && c != b) {
                // Face containing the edge and vertex `other`.
                let face = (p[a] + p[b] + p[other]) * third;
                let cross = (face - edge_point).cross(center - edge_point);
                let area = cross.norm() * T::half();
                let mut n0 = cross / (area * T::two());
                if n0.dot(edge) < T::zero() {
                    n0 = -n0;
                }
                let n = edge / len;
                let m = default_tangent(n);
                facets.push(FacetRecord {
                    id: facets.len(),
                    node_i: i,
                    node_j: j,
                    raw_area: area,
                    centroid: (edge_point + face + center) * third,
                    true_normal: n0,
                    tangent_m: m,
                    tangent_l: n.cross(m),
                });
            }
        }
    }
    let nodes = positions
        .iter()
        .zip(diameters)
        .enumerate()
        .map(|(k, (&position, &diameter))| Node {
            id: k,
            position,
            diameter,
        })
        .collect();
    let tets = tets.iter().enumerate().map(|(k, &t)| (k, t)).collect();
    Mesh::from_records(nodes, tets, facets)
}
