use crate::{Error, Result, Scalar};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// ‖r‖ / max(‖f_ext‖, ‖f_int‖, ‖f_inertia‖).
    ResidualNorm,
    /// ‖Δq‖ / ‖q‖.
    IncrementNorm,
    /// |Δqᵀ r| / W_ref.
    Energy,
    /// √(mean (w_i Δq_i)²) with w_i = 1 / (r_tol |q_i| + a_tol), against 1.
    Wrms,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OnFail {
    #[default]
    AcceptAndFlag,
    Abort,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSpec<T> {
    pub criteria: Vec<Criterion>,
    /// Tolerance of the residual, increment and energy criteria.
    pub tolerance: T,
    pub r_tol: T,
    pub a_tol: T,
    pub max_iter: usize,
    pub on_fail: OnFail,
}

impl<T: Scalar> Default for ConvergenceSpec<T> {
    fn default() -> Self {
        Self {
            criteria: vec![Criterion::ResidualNorm],
            tolerance: T::lit(1e-4),
            r_tol: T::lit(1e-4),
            a_tol: T::lit(1e-6),
            max_iter: 100,
            on_fail: OnFail::AcceptAndFlag,
        }
    }
}

impl<T: Scalar> ConvergenceSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.criteria.is_empty() {
            return Err(Error::InvalidParameter("at least one convergence criterion is required".into()));
        }
        for (name, v) in [("tolerance", self.tolerance), ("r_tol", self.r_tol), ("a_tol", self.a_tol)] {
            if !(v > T::zero()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Criterion values of one check; `None` when not selected or skipped
/// (zero normalizer, or no increment yet).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CriterionValues<T> {
    pub residual: Option<T>,
    pub increment: Option<T>,
    pub energy: Option<T>,
    pub wrms: Option<T>,
}

fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

fn ratio<T: Scalar>(num: T, den: T) -> Option<T> {
    if num == T::zero() {
        Some(T::zero())
    } else if den > T::zero() {
        Some(num / den)
    } else {
        None
    }
}

/// Disjunctive convergence test: passes iff any selected criterion that
/// could be evaluated is below its tolerance (WRMS strictly below 1).
#[allow(clippy::too_many_arguments)]
pub fn check_convergence<T: Scalar>(
    residual: &[T],
    increment: Option<&[T]>,
    q: &[T],
    f_ext: &[T],
    f_int: &[T],
    f_inertia: &[T],
    energy_increment: Option<T>,
    energy_ref: T,
    conv: &ConvergenceSpec<T>,
) -> (bool, CriterionValues<T>) {
    let mut values = CriterionValues::default();
    let mut pass = false;
    for c in &conv.criteria {
        match c {
            Criterion::ResidualNorm => {
                let den = norm(f_ext).max(norm(f_int)).max(norm(f_inertia));
                values.residual = ratio(norm(residual), den);
                pass |= values.residual.is_some_and(|v| v < conv.tolerance);
            }
            Criterion::IncrementNorm => {
                values.increment = increment.and_then(|d| ratio(norm(d), norm(q)));
                pass |= values.increment.is_some_and(|v| v < conv.tolerance);
            }
            Criterion::Energy => {
                values.energy = energy_increment.and_then(|w| ratio(w.abs(), energy_ref));
                pass |= values.energy.is_some_and(|v| v < conv.tolerance);
            }
            Criterion::Wrms => {
                values.wrms = increment.filter(|d| !d.is_empty()).map(|d| {
                    let s = d
                        .iter()
                        .zip(q)
                        .map(|(&di, &qi)| {
                            let w = di / (conv.r_tol * qi.abs() + conv.a_tol);
                            w * w
                        })
                        .sum::<T>();
                    (s / T::lit(d.len() as f64)).sqrt()
                });
                pass |= values.wrms.is_some_and(|v| v < T::one());
            }
        }
    }
    (pass, values)
}
