use crate::{Error, Result, Scalar};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub const DOFS_PER_NODE: usize = 6;

/// Nodal degree of freedom: three translations and three rotations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dof {
    Ux,
    Uy,
    Uz,
    Rx,
    Ry,
    Rz,
}

impl Dof {
    pub const ALL: [Dof; 6] = [Dof::Ux, Dof::Uy, Dof::Uz, Dof::Rx, Dof::Ry, Dof::Rz];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        ["ux", "uy", "uz", "rx", "ry", "rz"][self.index()]
    }

    pub fn is_translation(self) -> bool {
        self.index() < 3
    }
}

impl fmt::Display for Dof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dof {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown dof `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintKind<T> {
    Fixed,
    /// Velocity ramped linearly from zero to `target` over `ramp` seconds.
    Velocity { target: T, ramp: T },
    /// Piecewise-linear force history (time, force), held constant outside.
    Force { history: Vec<(T, T)> },
}

impl<T> ConstraintKind<T> {
    pub fn is_prescribed(&self) -> bool {
        !matches!(self, ConstraintKind::Force { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint<T> {
    /// Node index.
    pub node: usize,
    pub dof: Dof,
    pub kind: ConstraintKind<T>,
}

/// Boundary conditions; each (node, dof) appears at most once.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstraintSet<T> {
    items: Vec<Constraint<T>>,
}

impl<T: Scalar> ConstraintSet<T> {
    pub fn new() -> Self {
        Self { items: Vec::new() }
    }

    /// Add a constraint; a second entry on the same (node, dof) is accepted
    /// only when it is identical to the first.
    pub fn insert(&mut self, c: Constraint<T>) -> Result<()> {
        if let Some(existing) = self
            .items
            .iter()
            .find(|e| e.node == c.node && e.dof == c.dof)
        {
            if existing.kind == c.kind {
                return Ok(());
            }
            return Err(Error::InvalidParameter(format!(
                "conflicting constraints on node {} dof {}",
                c.node, c.dof
            )));
        }
        self.items.push(c);
        Ok(())
    }

    pub fn fix(&mut self, node: usize, dofs: &[Dof]) -> Result<()> {
        for &dof in dofs {
            self.insert(Constraint {
                node,
                dof,
                kind: ConstraintKind::Fixed,
            })?;
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Constraint<T>> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Global numbering `6 * node + dof` with a free / prescribed partition.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    n_nodes: usize,
    prescribed_mask: Vec<bool>,
    free: Vec<usize>,
    prescribed: Vec<usize>,
}

impl DofMap {
    pub fn new<T: Scalar>(n_nodes: usize, constraints: &ConstraintSet<T>) -> Result<Self> {
        let n = n_nodes * DOFS_PER_NODE;
        let mut mask = vec![false; n];
        for c in constraints.iter() {
            if c.node >= n_nodes {
                return Err(Error::InvalidParameter(format!(
                    "constraint on node index {} beyond mesh ({} nodes)",
                    c.node, n_nodes
                )));
            }
            if c.kind.is_prescribed() {
                mask[Self::global(c.node, c.dof)] = true;
            }
        }
        let free = (0..n).filter(|&i| !mask[i]).collect();
        let prescribed = (0..n).filter(|&i| mask[i]).collect();
        Ok(Self {
            n_nodes,
            prescribed_mask: mask,
            free,
            prescribed,
        })
    }

    /// Every dof free.
    pub fn unconstrained(n_nodes: usize) -> Self {
        Self::new::<f64>(n_nodes, &ConstraintSet::new()).expect("empty constraint set")
    }

    #[inline]
    pub fn global(node: usize, dof: Dof) -> usize {
        node * DOFS_PER_NODE + dof.index()
    }

    pub fn len(&self) -> usize {
        self.n_nodes * DOFS_PER_NODE
    }

    pub fn is_empty(&self) -> bool {
        self.n_nodes == 0
    }

    pub fn node_count(&self) -> usize {
        self.n_nodes
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn prescribed(&self) -> &[usize] {
        &self.prescribed
    }

    #[inline]
    pub fn is_prescribed(&self, i: usize) -> bool {
        self.prescribed_mask[i]
    }

    pub fn free_mask(&self) -> Vec<bool> {
        self.prescribed_mask.iter().map(|p| !p).collect()
    }
}
