use crate::assembly::GlobalState;
use crate::geometry::{ConstraintKind, ConstraintSet, DofMap};
use crate::{Error, Result, Scalar};

/// A kinematically driven DoF (fixed DoFs have zero velocity).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prescribed<T> {
    pub dof: usize,
    pub velocity: T,
    pub ramp: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForceHistory<T> {
    pub dof: usize,
    /// (time, force), ascending in time.
    pub points: Vec<(T, T)>,
}

impl<T: Scalar> ForceHistory<T> {
    /// Linear interpolation, constant outside the defined range.
    pub fn at(&self, t: T) -> T {
        let p = &self.points;
        match p.iter().position(|&(ti, _)| ti > t) {
            None => p.last().map_or(T::zero(), |x| x.1),
            Some(0) => p[0].1,
            Some(k) => {
                let ((t0, f0), (t1, f1)) = (p[k - 1], p[k]);
                f0 + (f1 - f0) * (t - t0) / (t1 - t0)
            }
        }
    }
}

/// Displacement, velocity and acceleration of a DoF whose velocity grows
/// linearly from 0 to `v` over `ramp` and stays constant afterwards.
///
/// The ramp acceleration is right-continuous, so it is already `v / ramp`
/// at t = 0; without a ramp the velocity jump happens just after t = 0.
pub fn ramp_motion<T: Scalar>(v: T, ramp: T, t: T) -> (T, T, T) {
    if t < T::zero() || (t == T::zero() && ramp == T::zero()) {
        (T::zero(), T::zero(), T::zero())
    } else if t < ramp {
        (v * t * t / (T::two() * ramp), v * t / ramp, v / ramp)
    } else {
        (v * (t - T::half() * ramp), v, T::zero())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadProgram<T> {
    pub prescribed: Vec<Prescribed<T>>,
    pub forces: Vec<ForceHistory<T>>,
    pub total_time: T,
}

impl<T: Scalar> LoadProgram<T> {
    pub fn from_constraints(constraints: &ConstraintSet<T>, total_time: T) -> Result<Self> {
        if !(total_time > T::zero()) {
            return Err(Error::InvalidParameter(format!("total time must be positive, got {total_time}")));
        }
        let mut prescribed = Vec::new();
        let mut forces = Vec::new();
        for c in constraints.iter() {
            let dof = DofMap::global(c.node, c.dof);
            match &c.kind {
                ConstraintKind::Fixed => prescribed.push(Prescribed {
                    dof,
                    velocity: T::zero(),
                    ramp: T::zero(),
                }),
                ConstraintKind::Velocity { target, ramp } => {
                    if !(*ramp >= T::zero() && *ramp <= total_time) {
                        return Err(Error::InvalidParameter(format!(
                            "ramp {ramp} s on node {} {} must lie in [0, {total_time}]",
                            c.node, c.dof
                        )));
                    }
                    prescribed.push(Prescribed {
                        dof,
                        velocity: *target,
                        ramp: *ramp,
                    });
                }
                ConstraintKind::Force { history } => {
                    let ok = !history.is_empty()
                        && history[0].0 >= T::zero()
                        && history.windows(2).all(|w| w[1].0 > w[0].0)
                        && history.iter().all(|(t, f)| t.is_finite() && f.is_finite());
                    if !ok {
                        return Err(Error::InvalidParameter(format!(
                            "force history on node {} {} must be non-empty, finite and strictly ascending from t >= 0",
                            c.node, c.dof
                        )));
                    }
                    forces.push(ForceHistory {
                        dof,
                        points: history.clone(),
                    });
                }
            }
        }
        prescribed.sort_by_key(|p| p.dof);
        forces.sort_by_key(|f| f.dof);
        Ok(Self {
            prescribed,
            forces,
            total_time,
        })
    }

    /// Overwrite q, q̇, q̈ of the prescribed DoFs with their values at `t`.
    pub fn apply_prescribed(&self, t: T, state: &mut GlobalState<T>) {
        for p in &self.prescribed {
            let (u, v, a) = ramp_motion(p.velocity, p.ramp, t);
            state.q[p.dof] = u;
            state.v[p.dof] = v;
            state.a[p.dof] = a;
        }
    }

    /// Applied nodal forces at `t`.
    pub fn forces_into(&self, t: T, f: &mut [T]) {
        f.iter_mut().for_each(|v| *v = T::zero());
        for h in &self.forces {
            f[h.dof] = h.at(t);
        }
    }
}
