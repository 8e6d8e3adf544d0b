use super::{signed_volume, Mesh};
use crate::Scalar;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    NodeNotFinite,
    NegativeDiameter,
    FacetNodeMissing,
    EdgeLength,
    NormalAlignment,
    FrameOrthonormality,
    TrueNormal,
    ProjectedArea,
    CentroidConsistency,
    TetNodeMissing,
    TetVolume,
    CellVolumeSum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Id of the offending node, facet or tetrahedron (unset for global checks).
    pub id: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.id {
            Some(id) => write!(f, "{:?} (id {id}): {}", self.kind, self.detail),
            None => write!(f, "{:?}: {}", self.kind, self.detail),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    fn push(&mut self, kind: ViolationKind, id: Option<usize>, detail: String) {
        self.violations.push(Violation { kind, id, detail });
    }
}

/// Check every node, facet and tetrahedron invariant; violations are
/// collected, never raised.
pub fn validate_mesh<T: Scalar>(m: &Mesh<T>) -> ValidationReport {
    let mut r = ValidationReport::default();
    let tol = T::tol(1e-10);
    let n_nodes = m.nodes.len();

    for n in &m.nodes {
        if !n.position.is_finite() {
            r.push(ViolationKind::NodeNotFinite, Some(n.id), "position".into());
        }
        if !(n.diameter >= T::zero()) {
            r.push(
                ViolationKind::NegativeDiameter,
                Some(n.id),
                format!("d_p = {}", n.diameter),
            );
        }
    }

    for f in &m.facets {
        let id = Some(f.id);
        if f.node_i >= n_nodes || f.node_j >= n_nodes || f.node_i == f.node_j {
            r.push(
                ViolationKind::FacetNodeMissing,
                id,
                format!("nodes {} / {}", f.node_i, f.node_j),
            );
            continue;
        }
        let xi = m.nodes[f.node_i].position;
        let xj = m.nodes[f.node_j].position;
        let d = xj - xi;
        let len = d.norm();

        if (f.length - len).abs() > tol * len.max(T::one()) {
            r.push(
                ViolationKind::EdgeLength,
                id,
                format!("l_k = {} but |x_J - x_I| = {}", f.length, len),
            );
        }

        let dir = d / len;
        if (f.normal - dir).norm() > tol {
            r.push(
                ViolationKind::NormalAlignment,
                id,
                format!("n_k . edge = {}", f.normal.dot(dir)),
            );
        }

        let p = f.frame();
        let mut worst = T::zero();
        for a in 0..3 {
            for b in 0..3 {
                let target = if a == b { T::one() } else { T::zero() };
                worst = worst.max((p[a].dot(p[b]) - target).abs());
            }
        }
        if worst > tol {
            r.push(
                ViolationKind::FrameOrthonormality,
                id,
                format!("max |P^T P - I| = {worst}"),
            );
        }

        if (f.true_normal.norm() - T::one()).abs() > tol {
            r.push(
                ViolationKind::TrueNormal,
                id,
                format!("|n_k0| = {}", f.true_normal.norm()),
            );
        }

        let expected = f.raw_area * f.normal.dot(f.true_normal);
        if !(f.area > T::zero()) || (f.area - expected).abs() > tol * expected.abs().max(T::one())
        {
            r.push(
                ViolationKind::ProjectedArea,
                id,
                format!("A_k = {} but A_0k n_k.n_k0 = {}", f.area, expected),
            );
        }

        let gap = (xi + f.arm_i - (xj + f.arm_j)).norm();
        if gap > T::tol(1e-9) * f.length.max(T::epsilon()) {
            r.push(
                ViolationKind::CentroidConsistency,
                id,
                format!("|x_I + c_I - x_J - c_J| = {gap}"),
            );
        }
    }

    let mut total = T::zero();
    for t in &m.tets {
        if t.nodes.iter().any(|&k| k >= n_nodes) {
            r.push(ViolationKind::TetNodeMissing, Some(t.id), format!("{:?}", t.nodes));
            continue;
        }
        let v = signed_volume(t.nodes.map(|k| m.nodes[k].position));
        if !(v > T::zero()) || (v - t.volume).abs() > tol * v.abs().max(T::one()) {
            r.push(
                ViolationKind::TetVolume,
                Some(t.id),
                format!("volume {v} (stored {})", t.volume),
            );
        }
        total += t.volume;
    }

    if !m.tets.is_empty() {
        let sum: T = m.cell_volumes.iter().copied().sum();
        if m.cell_volumes.len() != n_nodes || (sum - total).abs() > T::tol(1e-8) * total.abs() {
            r.push(
                ViolationKind::CellVolumeSum,
                None,
                format!("sum V_I = {sum}, solid volume = {total}"),
            );
        }
    }
    r
}
