//! Facet kinematics, internal forces, elastic stiffness and lumped mass.
//!
//! Per facet the strain is e = B q with the 3 × 12 operator
//!
//! ```text
//! B_a = (1/l) [ -p_a, -(c_I × p_a), p_a, c_J × p_a ]   for p_a ∈ {n, m, l}
//! ```
//!
//! acting on (u_I, θ_I, u_J, θ_J), and the nodal forces are A l Bᵀ t.

mod sparse;

pub use sparse::{rcm_ordering, Cholesky, SparseSym};

use crate::geometry::{Dof, DofMap, Facet, Mesh, DOFS_PER_NODE};
use crate::material::{facet_update, FacetState, MaterialParams, StrainVec, TractionVec};
use crate::{Error, Result, Scalar, Vec3};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

/// Kinematic state of the whole system.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalState<T> {
    pub q: Vec<T>,
    pub v: Vec<T>,
    pub a: Vec<T>,
    /// Committed facet histories.
    pub facet_states: Vec<FacetState<T>>,
    pub time: T,
}

impl<T: Scalar> GlobalState<T> {
    pub fn at_rest(mesh: &Mesh<T>) -> Self {
        let n = mesh.dof_count();
        Self {
            q: vec![T::zero(); n],
            v: vec![T::zero(); n],
            a: vec![T::zero(); n],
            facet_states: vec![FacetState::virgin(); mesh.facets.len()],
            time: T::zero(),
        }
    }
}

/// Linearized strain map of one facet.
#[derive(Clone, Debug, PartialEq)]
pub struct FacetOperator<T> {
    pub node_i: usize,
    pub node_j: usize,
    /// Rows for the N, M, L strain components over (u_I, θ_I, u_J, θ_J).
    pub rows: [[T; 12]; 3],
    /// A_k l_k (the facet's tributary volume factor).
    pub weight: T,
    pub length: T,
}

impl<T: Scalar> FacetOperator<T> {
    pub fn dofs(&self) -> [usize; 12] {
        let mut d = [0; 12];
        for k in 0..6 {
            d[k] = self.node_i * DOFS_PER_NODE + k;
            d[k + 6] = self.node_j * DOFS_PER_NODE + k;
        }
        d
    }

    #[inline]
    fn gather(&self, q: &[T]) -> [T; 12] {
        let (i, j) = (self.node_i * DOFS_PER_NODE, self.node_j * DOFS_PER_NODE);
        let mut x = [T::zero(); 12];
        x[..6].copy_from_slice(&q[i..i + 6]);
        x[6..].copy_from_slice(&q[j..j + 6]);
        x
    }

    pub fn strain(&self, q: &[T]) -> StrainVec<T> {
        let x = self.gather(q);
        let row = |r: &[T; 12]| r.iter().zip(&x).fold(T::zero(), |s, (a, b)| s + *a * *b);
        StrainVec::new(row(&self.rows[0]), row(&self.rows[1]), row(&self.rows[2]))
    }

    /// Nodal force contributions A l Bᵀ t in `dofs()` order.
    pub fn forces(&self, t: TractionVec<T>) -> [T; 12] {
        let t = [t.n * self.weight, t.m * self.weight, t.l * self.weight];
        let mut f = [T::zero(); 12];
        for (k, fk) in f.iter_mut().enumerate() {
            *fk = self.rows[0][k] * t[0] + self.rows[1][k] * t[1] + self.rows[2][k] * t[2];
        }
        f
    }
}

pub fn facet_operator<T: Scalar>(f: &Facet<T>) -> FacetOperator<T> {
    let inv_l = T::one() / f.length;
    let mut rows = [[T::zero(); 12]; 3];
    for (row, p) in rows.iter_mut().zip(f.frame()) {
        let ci = f.arm_i.cross(p);
        let cj = f.arm_j.cross(p);
        for a in 0..3 {
            row[a] = -p[a] * inv_l;
            row[3 + a] = -ci[a] * inv_l;
            row[6 + a] = p[a] * inv_l;
            row[9 + a] = cj[a] * inv_l;
        }
    }
    FacetOperator {
        node_i: f.node_i,
        node_j: f.node_j,
        rows,
        weight: f.area * f.length,
        length: f.length,
    }
}

pub fn facet_operators<T: Scalar>(mesh: &Mesh<T>) -> Vec<FacetOperator<T>> {
    mesh.facets.iter().map(facet_operator).collect()
}

fn node_vectors<T: Scalar>(q: &[T], node: usize) -> (Vec3<T>, Vec3<T>) {
    let b = node * DOFS_PER_NODE;
    (
        Vec3::new(q[b], q[b + 1], q[b + 2]),
        Vec3::new(q[b + 3], q[b + 4], q[b + 5]),
    )
}

/// Facet strain from the displacement jump at the centroid.
pub fn facet_strain<T: Scalar>(q: &[T], f: &Facet<T>) -> StrainVec<T> {
    let (ui, ti) = node_vectors(q, f.node_i);
    let (uj, tj) = node_vectors(q, f.node_j);
    let jump = (uj + tj.cross(f.arm_j)) - (ui + ti.cross(f.arm_i));
    let [n, m, l] = f.frame().map(|p| p.dot(jump) / f.length);
    StrainVec::new(n, m, l)
}

/// e_V = (V − V_0)/(3 V_0) of tetrahedron `tet` from translated vertices.
pub fn volumetric_strain<T: Scalar>(q: &[T], mesh: &Mesh<T>, tet: usize) -> Result<T> {
    let t = &mesh.tets[tet];
    let p = t.nodes.map(|n| mesh.nodes[n].position + node_vectors(q, n).0);
    let v = crate::geometry::signed_volume(p);
    if !(v > T::zero()) {
        return Err(Error::InvertedTet {
            tet: t.id,
            volume: v.as_f64(),
        });
    }
    Ok((v - t.volume) / (T::lit(3.0) * t.volume))
}

pub fn volumetric_strains<T: Scalar>(q: &[T], mesh: &Mesh<T>) -> Result<Vec<T>> {
    (0..mesh.tets.len()).map(|t| volumetric_strain(q, mesh, t)).collect()
}

/// Output buffers of [`internal_forces`], reused across evaluations.
#[derive(Clone, Debug, Default)]
pub struct InternalForces<T> {
    pub f: Vec<T>,
    /// Trial facet states (strain and traction included).
    pub states: Vec<FacetState<T>>,
    local: Vec<[T; 12]>,
    volumetric: Vec<T>,
}

impl<T: Scalar> InternalForces<T> {
    pub fn new(mesh: &Mesh<T>) -> Self {
        Self {
            f: vec![T::zero(); mesh.dof_count()],
            states: vec![FacetState::virgin(); mesh.facets.len()],
            local: vec![[T::zero(); 12]; mesh.facets.len()],
            volumetric: vec![T::zero(); mesh.tets.len()],
        }
    }

    pub fn tractions(&self) -> impl Iterator<Item = TractionVec<T>> + '_ {
        self.states.iter().map(|s| s.traction)
    }
}

const CHUNK: usize = 256;

/// f_int(q) and trial facet states, evaluated from the committed states.
///
/// Facets are evaluated in parallel and scattered serially in facet order,
/// so the result does not depend on the number of worker threads.
pub fn internal_forces<T: Scalar>(
    mesh: &Mesh<T>,
    ops: &[FacetOperator<T>],
    p: &MaterialParams<T>,
    q: &[T],
    committed: &[FacetState<T>],
    out: &mut InternalForces<T>,
) -> Result<()> {
    let needs_ev = p.law == crate::material::Law::Nonlinear;
    if needs_ev {
        out.volumetric
            .par_iter_mut()
            .enumerate()
            .try_for_each(|(t, ev)| volumetric_strain(q, mesh, t).map(|v| *ev = v))
            .or_else(|_| first_inverted(q, mesh))?;
    }
    let volumetric = &out.volumetric;
    let facets = &mesh.facets;
    let errors: Vec<Option<(usize, Error)>> = out
        .local
        .par_chunks_mut(CHUNK)
        .zip(out.states.par_chunks_mut(CHUNK))
        .enumerate()
        .map(|(c, (local, states))| {
            for (k, (fl, st)) in local.iter_mut().zip(states.iter_mut()).enumerate() {
                let idx = c * CHUNK + k;
                let op = &ops[idx];
                let e = op.strain(q);
                let ev = match (needs_ev, facets[idx].tet) {
                    (true, Some(t)) => volumetric[t],
                    _ => T::zero(),
                };
                match facet_update(&committed[idx], e, ev, op.length, p) {
                    Ok((t, next)) => {
                        *fl = op.forces(t);
                        *st = next;
                    }
                    Err(err) => return Some((idx, err)),
                }
            }
            None
        })
        .collect();
    if let Some((idx, err)) = errors.into_iter().flatten().next() {
        return Err(match err {
            Error::SnapBack { length, lt, .. } => Error::SnapBack {
                facet: Some(facets[idx].id),
                length,
                lt,
            },
            Error::NonFinite(_) => Error::NonFinite(format!("strain of facet {}", facets[idx].id)),
            other => other,
        });
    }
    out.f.iter_mut().for_each(|v| *v = T::zero());
    for (op, fl) in ops.iter().zip(&out.local) {
        let (i, j) = (op.node_i * DOFS_PER_NODE, op.node_j * DOFS_PER_NODE);
        for k in 0..6 {
            out.f[i + k] += fl[k];
            out.f[j + k] += fl[k + 6];
        }
    }
    Ok(())
}

fn first_inverted<T: Scalar>(q: &[T], mesh: &Mesh<T>) -> Result<()> {
    for t in 0..mesh.tets.len() {
        volumetric_strain(q, mesh, t)?;
    }
    Ok(())
}

/// Elastic stiffness K = Σ A l Bᵀ E B, E = E_0 diag(1, α, α).
pub fn assemble_stiffness<T: Scalar>(mesh: &Mesh<T>, p: &MaterialParams<T>) -> SparseSym<T> {
    let ops = facet_operators(mesh);
    let e = [p.e0, p.alpha * p.e0, p.alpha * p.e0];
    let mut trip = Vec::with_capacity(ops.len() * 144);
    for op in &ops {
        let d = op.dofs();
        for r in 0..12 {
            for c in 0..12 {
                let mut v = T::zero();
                for a in 0..3 {
                    v += e[a] * op.rows[a][r] * op.rows[a][c];
                }
                trip.push((d[r], d[c], op.weight * v));
            }
        }
    }
    SparseSym::from_triplets(mesh.dof_count(), &trip, false)
}

/// Diagonal mass: translational ρ V_I, rotational m d_p²/10 (solid sphere).
#[derive(Clone, Debug, PartialEq)]
pub struct DiagMass<T> {
    pub m: Vec<T>,
}

impl<T: Scalar> DiagMass<T> {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Every free DoF must carry mass for explicit integration.
    pub fn check(&self, dofs: &DofMap) -> Result<()> {
        for &i in dofs.free() {
            if !(self.m[i] > T::zero()) {
                return Err(Error::ZeroMass {
                    node: i / DOFS_PER_NODE,
                    dof: i % DOFS_PER_NODE,
                });
            }
        }
        Ok(())
    }

    /// Σ translational mass along x.
    pub fn total_translational(&self) -> T {
        self.m.iter().step_by(DOFS_PER_NODE).copied().sum()
    }
}

pub fn assemble_lumped_mass<T: Scalar>(mesh: &Mesh<T>, p: &MaterialParams<T>) -> DiagMass<T> {
    let rho = p.density();
    let mut m = vec![T::zero(); mesh.dof_count()];
    for (k, node) in mesh.nodes.iter().enumerate() {
        let mass = rho * mesh.cell_volumes[k];
        let inertia = mass * node.diameter * node.diameter / T::lit(10.0);
        for d in Dof::ALL {
            m[DofMap::global(k, d)] = if d.is_translation() { mass } else { inertia };
        }
    }
    DiagMass { m }
}

/// Body force ρ V_I b on translational DoFs (`b` in mm/s²).
pub fn body_force<T: Scalar>(mesh: &Mesh<T>, p: &MaterialParams<T>, b: Vec3<T>) -> Vec<T> {
    let mut f = vec![T::zero(); mesh.dof_count()];
    for (k, v) in mesh.cell_volumes.iter().enumerate() {
        for a in 0..3 {
            f[k * DOFS_PER_NODE + a] = p.density() * *v * b[a];
        }
    }
    f
}

/// Per-facet crack opening (w_N, w_M, w_L, w) in mm.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CrackOpening<T> {
    pub w_n: T,
    pub w_m: T,
    pub w_l: T,
    pub w: T,
}

pub fn crack_opening<T: Scalar>(l: T, e: StrainVec<T>, t: TractionVec<T>, p: &MaterialParams<T>) -> CrackOpening<T> {
    let g = p.alpha * p.e0;
    let w_n = l * (e.n - t.n / p.e0).max(T::zero());
    let w_m = l * (e.m - t.m / g);
    let w_l = l * (e.l - t.l / g);
    CrackOpening {
        w_n,
        w_m,
        w_l,
        w: (w_n * w_n + w_m * w_m + w_l * w_l).sqrt(),
    }
}

pub fn crack_openings<T: Scalar>(
    mesh: &Mesh<T>,
    states: &[FacetState<T>],
    p: &MaterialParams<T>,
) -> Vec<CrackOpening<T>> {
    mesh.facets
        .iter()
        .zip(states)
        .map(|(f, s)| crack_opening(f.length, s.strain, s.traction, p))
        .collect()
}

/// Δt_crit = min over elements of 2/ω_max.
///
/// Each tetrahedron, with the facets it owns and its own share of the lumped
/// mass, is one element; facets without a parent tetrahedron form two-node
/// elements. Prescribed DoFs are excluded. Since the element masses and
/// stiffnesses sum to the global ones, the estimate bounds the global
/// eigenvalue from the safe side.
pub fn critical_timestep<T: Scalar>(
    mesh: &Mesh<T>,
    p: &MaterialParams<T>,
    mass: &DiagMass<T>,
    dofs: &DofMap,
) -> T {
    let ops = facet_operators(mesh);
    let free = dofs.free_mask();
    let rho = p.density().as_f64();
    let stiff = [p.e0, p.alpha * p.e0, p.alpha * p.e0].map(|v| v.as_f64());

    let mut by_tet: Vec<Vec<usize>> = vec![Vec::new(); mesh.tets.len()];
    let mut orphans = Vec::new();
    for (k, f) in mesh.facets.iter().enumerate() {
        match f.tet {
            Some(t) => by_tet[t].push(k),
            None => orphans.push(k),
        }
    }

    let mut lambda_max: f64 = 0.0;
    let mut element = |nodes: &[usize], facets: &[usize], node_mass: &dyn Fn(usize) -> f64| {
        let n = nodes.len() * DOFS_PER_NODE;
        let slot = |node: usize| nodes.iter().position(|&x| x == node).expect("element node");
        let mut k = DMatrix::<f64>::zeros(n, n);
        for &fi in facets {
            let op = &ops[fi];
            let (si, sj) = (slot(op.node_i), slot(op.node_j));
            let local = |r: usize| if r < 6 { si * 6 + r } else { sj * 6 + r - 6 };
            for r in 0..12 {
                for c in 0..12 {
                    let mut v = 0.0;
                    for a in 0..3 {
                        v += stiff[a] * op.rows[a][r].as_f64() * op.rows[a][c].as_f64();
                    }
                    k[(local(r), local(c))] += op.weight.as_f64() * v;
                }
            }
        }
        let mut keep = Vec::new();
        let mut inv_sqrt_m = Vec::new();
        for (s, &node) in nodes.iter().enumerate() {
            let m = node_mass(node);
            let d = mesh.nodes[node].diameter.as_f64();
            for dof in Dof::ALL {
                let g = DofMap::global(node, dof);
                let md = if dof.is_translation() { m } else { m * d * d / 10.0 };
                if free[g] && md > 0.0 {
                    keep.push(s * 6 + dof.index());
                    inv_sqrt_m.push(1.0 / md.sqrt());
                }
            }
        }
        if keep.is_empty() {
            return;
        }
        let a = DMatrix::from_fn(keep.len(), keep.len(), |r, c| {
            k[(keep[r], keep[c])] * inv_sqrt_m[r] * inv_sqrt_m[c]
        });
        let top = SymmetricEigen::new(a).eigenvalues.iter().cloned().fold(0.0, f64::max);
        lambda_max = lambda_max.max(top);
    };

    for (t, facets) in by_tet.iter().enumerate() {
        if facets.is_empty() {
            continue;
        }
        let tet = &mesh.tets[t];
        let share = rho * tet.volume.as_f64() / 4.0;
        element(&tet.nodes, facets, &|_| share);
    }
    let pyramid_shares = mesh.tets.is_empty();
    for &fi in &orphans {
        let f = &mesh.facets[fi];
        let share = rho * (f.area * f.length).as_f64() / 6.0;
        let global = |node: usize| mass.m[node * DOFS_PER_NODE].as_f64();
        if pyramid_shares {
            element(&[f.node_i, f.node_j], &[fi], &|_| share);
        } else {
            element(&[f.node_i, f.node_j], &[fi], &global);
        }
    }
    if lambda_max > 0.0 {
        T::lit(2.0 / lambda_max.sqrt())
    } else {
        T::infinity()
    }
}
