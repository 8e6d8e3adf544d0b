//! Time integration of M q̈ + f_int(q) = f_ext: explicit central difference,
//! implicit generalized-α (HHT and Newmark as special cases) and
//! displacement-controlled quasi-static Newton.
//!
//! Prescribed DoFs are eliminated from the solved system; their reactions
//! are recovered as f_int + M q̈ − f_ext.

mod convergence;
mod program;

pub use convergence::{check_convergence, ConvergenceSpec, Criterion, CriterionValues, OnFail};
pub use program::{ramp_motion, ForceHistory, LoadProgram, Prescribed};

use crate::assembly::{
    assemble_lumped_mass, assemble_stiffness, critical_timestep, facet_operators, internal_forces,
    Cholesky, DiagMass, FacetOperator, GlobalState, InternalForces, SparseSym,
};
use crate::diagnostics::{energy_balance_error, kinetic_energy, BalanceError, EnergyLedger};
use crate::geometry::{ConstraintSet, DofMap, Mesh, DOFS_PER_NODE};
use crate::material::MaterialParams;
use crate::{Error, Result, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generalized-α coefficients (Chung–Hulbert convention).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenAlphaParams<T> {
    pub alpha_m: T,
    pub alpha_f: T,
    pub gamma: T,
    pub beta: T,
}

/// Optimal parameters for spectral radius ρ∞ at infinite frequency.
pub fn genalpha_from_rho<T: Scalar>(rho: T) -> Result<GenAlphaParams<T>> {
    if !(rho >= T::zero() && rho <= T::one()) {
        return Err(Error::InvalidParameter(format!("rho_inf must lie in [0, 1], got {rho}")));
    }
    let alpha_m = (T::two() * rho - T::one()) / (rho + T::one());
    let alpha_f = rho / (rho + T::one());
    let g = T::one() - alpha_m + alpha_f;
    Ok(GenAlphaParams {
        alpha_m,
        alpha_f,
        gamma: T::half() - alpha_m + alpha_f,
        beta: g * g / T::lit(4.0),
    })
}

/// HHT-α as a generalized-α member: α_m = 0, α_f = −α.
pub fn hht_params<T: Scalar>(alpha: T) -> Result<GenAlphaParams<T>> {
    if !(alpha >= T::lit(-1.0 / 3.0) && alpha <= T::zero()) {
        return Err(Error::InvalidParameter(format!("HHT alpha must lie in [-1/3, 0], got {alpha}")));
    }
    let g = T::one() - alpha;
    Ok(GenAlphaParams {
        alpha_m: T::zero(),
        alpha_f: -alpha,
        gamma: T::half() - alpha,
        beta: g * g / T::lit(4.0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scheme<T> {
    Explicit,
    GenAlpha(GenAlphaParams<T>),
    Static,
}

impl<T> Scheme<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Explicit => "explicit",
            Scheme::GenAlpha(_) => "genalpha",
            Scheme::Static => "static",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport<T> {
    pub step: usize,
    pub time: T,
    /// Linear solves performed (0 for explicit steps).
    pub iterations: usize,
    pub converged: bool,
    pub criteria: CriterionValues<T>,
    /// Summed reaction over the loaded set, per global direction (N).
    pub reaction: [T; 3],
    /// Mean displacement of the loaded set, per global direction (mm).
    pub displacement: [T; 3],
    pub energy: EnergyLedger<T>,
    pub balance: BalanceError<T>,
}

impl<T: Scalar> StepReport<T> {
    pub const CSV_HEADER: &'static str =
        "time,iterations,converged,reaction_x,reaction_y,reaction_z,W_kin,W_int,W_ext,balance_err_pct";

    pub fn csv_row(&self) -> String {
        let [rx, ry, rz] = self.reaction;
        format!(
            "{},{},{},{rx},{ry},{rz},{},{},{},{}",
            self.time,
            self.iterations,
            self.converged,
            self.energy.w_kin,
            self.energy.w_int,
            self.energy.w_ext,
            self.balance.percent
        )
    }
}

/// Random perturbation schedule: every `interval` seconds each free DoF
/// receives an independent uniform(−η/2, η/2) increment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub eta: f64,
    pub interval: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Add uniform(−η/2, η/2) to every free entry of `q`; returns the increment.
pub fn perturb_with<T: Scalar, R: Rng>(q: &mut [T], free: &[usize], eta: T, rng: &mut R) -> Vec<T> {
    let mut delta = vec![T::zero(); q.len()];
    let h = eta.as_f64() / 2.0;
    if h > 0.0 {
        for &i in free {
            let d = T::lit(rng.gen_range(-h..h));
            q[i] += d;
            delta[i] = d;
        }
    }
    delta
}

/// Seeded perturbation of the free displacements and rotations.
pub fn perturb<T: Scalar>(state: &mut GlobalState<T>, dofs: &DofMap, eta: T, seed: u64) -> Result<()> {
    if !(eta >= T::zero()) {
        return Err(Error::InvalidParameter(format!("perturbation eta must be >= 0, got {eta}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perturb_with(&mut state.q, dofs.free(), eta, &mut rng);
    Ok(())
}

/// Mesh, material, boundary conditions and the derived operators of one run.
#[derive(Clone, Debug)]
pub struct System<T> {
    pub mesh: Mesh<T>,
    pub material: MaterialParams<T>,
    pub dofs: DofMap,
    pub program: LoadProgram<T>,
    pub mass: DiagMass<T>,
    ops: Vec<FacetOperator<T>>,
}

impl<T: Scalar> System<T> {
    pub fn new(
        mesh: Mesh<T>,
        material: MaterialParams<T>,
        constraints: &ConstraintSet<T>,
        total_time: T,
    ) -> Result<Self> {
        material.validate()?;
        for f in &mesh.facets {
            material.check_length(Some(f.id), f.length)?;
        }
        let dofs = DofMap::new(mesh.nodes.len(), constraints)?;
        let program = LoadProgram::from_constraints(constraints, total_time)?;
        let mass = assemble_lumped_mass(&mesh, &material);
        let ops = facet_operators(&mesh);
        Ok(Self {
            mesh,
            material,
            dofs,
            program,
            mass,
            ops,
        })
    }

    pub fn operators(&self) -> &[FacetOperator<T>] {
        &self.ops
    }

    pub fn critical_timestep(&self) -> T {
        critical_timestep(&self.mesh, &self.material, &self.mass, &self.dofs)
    }

    /// Initial elastic stiffness over the free DoFs.
    pub fn free_stiffness(&self) -> SparseSym<T> {
        assemble_stiffness(&self.mesh, &self.material).restrict(self.dofs.free())
    }

    fn free_mass(&self) -> Vec<T> {
        self.dofs.free().iter().map(|&i| self.mass.m[i]).collect()
    }
}

/// Owns the evolving state of one run and advances it step by step.
pub struct Solver<'a, T: Scalar> {
    sys: &'a System<T>,
    scheme: Scheme<T>,
    dt: T,
    conv: ConvergenceSpec<T>,
    state: GlobalState<T>,
    /// Internal forces and trial states at the current configuration.
    forces: InternalForces<T>,
    /// Scratch for Newton iterates.
    trial: InternalForces<T>,
    f_ext: Vec<T>,
    reactions: Vec<T>,
    factor: Option<Cholesky<T>>,
    ledger: EnergyLedger<T>,
    energy_guard: T,
    step: usize,
    loaded: Vec<usize>,
    perturbation: Option<(Perturbation, ChaCha8Rng, usize)>,
}

impl<'a, T: Scalar> Solver<'a, T> {
    pub fn new(sys: &'a System<T>, scheme: Scheme<T>, dt: T, conv: ConvergenceSpec<T>) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        conv.validate()?;
        let factor = match scheme {
            Scheme::Explicit => {
                sys.mass.check(&sys.dofs)?;
                let crit = sys.critical_timestep();
                if dt > T::lit(0.9) * crit {
                    log::warn!("explicit time step {dt} s exceeds 0.9 x critical {crit} s");
                }
                None
            }
            Scheme::GenAlpha(p) => {
                let k = sys.free_stiffness();
                let c = (T::one() - p.alpha_m) / (p.beta * dt * dt);
                let d: Vec<T> = sys.free_mass().into_iter().map(|m| c * m).collect();
                Some(Cholesky::factor(&k.scaled_plus_diagonal(T::one() - p.alpha_f, &d))?)
            }
            Scheme::Static => Some(Cholesky::factor(&sys.free_stiffness())?),
        };
        let mut loaded: Vec<usize> = sys
            .program
            .prescribed
            .iter()
            .filter(|p| p.velocity != T::zero() && p.dof % DOFS_PER_NODE < 3)
            .map(|p| p.dof)
            .collect();
        if loaded.is_empty() {
            loaded = sys
                .program
                .prescribed
                .iter()
                .filter(|p| p.dof % DOFS_PER_NODE < 3)
                .map(|p| p.dof)
                .collect();
        }
        let n = sys.mesh.dof_count();
        let mut s = Self {
            sys,
            scheme,
            dt,
            conv,
            state: GlobalState::at_rest(&sys.mesh),
            forces: InternalForces::new(&sys.mesh),
            trial: InternalForces::new(&sys.mesh),
            f_ext: vec![T::zero(); n],
            reactions: vec![T::zero(); n],
            factor,
            ledger: EnergyLedger::default(),
            energy_guard: T::lit(1e-12),
            step: 0,
            loaded,
            perturbation: None,
        };
        s.initialize()?;
        Ok(s)
    }

    pub fn with_perturbation(mut self, p: Perturbation) -> Result<Self> {
        if !(p.eta >= 0.0 && p.interval > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "perturbation needs eta >= 0 and interval > 0, got {} and {}",
                p.eta, p.interval
            )));
        }
        self.perturbation = Some((p, ChaCha8Rng::seed_from_u64(p.seed), 1));
        Ok(self)
    }

    /// |W_ext| below which the balance error is reported as a flagged 0.
    pub fn with_energy_guard(mut self, guard: T) -> Self {
        self.energy_guard = guard;
        self
    }

    /// Restart from the given displacements and velocities of the free DoFs
    /// (prescribed entries are ignored). Only valid before the first step.
    pub fn set_initial_conditions(&mut self, q: &[T], v: &[T]) -> Result<()> {
        let n = self.sys.mesh.dof_count();
        if self.step > 0 || q.len() != n || v.len() != n {
            return Err(Error::InvalidParameter(format!(
                "initial conditions need {n} entries each and must precede the first step"
            )));
        }
        for &i in self.sys.dofs.free() {
            self.state.q[i] = q[i];
            self.state.v[i] = v[i];
        }
        self.initialize()
    }

    pub fn state(&self) -> &GlobalState<T> {
        &self.state
    }

    pub fn system(&self) -> &System<T> {
        self.sys
    }

    pub fn ledger(&self) -> EnergyLedger<T> {
        self.ledger
    }

    pub fn internal(&self) -> &InternalForces<T> {
        &self.forces
    }

    pub fn reactions(&self) -> &[T] {
        &self.reactions
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Steps needed to reach the program's total time.
    pub fn total_steps(&self) -> usize {
        (self.sys.program.total_time / self.dt - T::lit(1e-9)).ceil().to_usize().unwrap_or(0)
    }

    fn time_at(&self, step: usize) -> T {
        T::lit(step as f64) * self.dt
    }

    fn initialize(&mut self) -> Result<()> {
        let t0 = T::zero();
        self.sys.program.apply_prescribed(t0, &mut self.state);
        self.evaluate_current()?;
        self.sys.program.forces_into(t0, &mut self.f_ext);
        match self.scheme {
            Scheme::Static => {
                self.state.v.iter_mut().for_each(|v| *v = T::zero());
                self.state.a.iter_mut().for_each(|a| *a = T::zero());
            }
            _ => {
                for &i in self.sys.dofs.free() {
                    let m = self.sys.mass.m[i];
                    self.state.a[i] = if m > T::zero() {
                        (self.f_ext[i] - self.forces.f[i]) / m
                    } else {
                        T::zero()
                    };
                }
            }
        }
        self.update_reactions();
        self.ledger.w_kin = kinetic_energy(&self.state.v, &self.sys.mass);
        Ok(())
    }

    fn evaluate_current(&mut self) -> Result<()> {
        let sys = self.sys;
        internal_forces(
            &sys.mesh,
            &sys.ops,
            &sys.material,
            &self.state.q,
            &self.state.facet_states,
            &mut self.forces,
        )
    }

    fn update_reactions(&mut self) {
        self.reactions.iter_mut().for_each(|r| *r = T::zero());
        for &i in self.sys.dofs.prescribed() {
            self.reactions[i] = self.forces.f[i] + self.sys.mass.m[i] * self.state.a[i] - self.f_ext[i];
        }
    }

    fn divergence(&self, step: usize, detail: impl Into<String>) -> Error {
        Error::Divergence {
            step,
            detail: detail.into(),
        }
    }

    fn as_divergence(&self, step: usize, e: Error) -> Error {
        match e {
            Error::NonFinite(d) => self.divergence(step, d),
            other => other,
        }
    }

    fn maybe_perturb(&mut self) -> Result<()> {
        let Some((p, rng, next)) = self.perturbation.as_mut() else {
            return Ok(());
        };
        let t = self.state.time.as_f64();
        if t + 1e-9 * self.dt.as_f64() < p.interval * *next as f64 {
            return Ok(());
        }
        *next += 1;
        let f_old = self.forces.f.clone();
        let delta = perturb_with(&mut self.state.q, self.sys.dofs.free(), T::lit(p.eta), rng);
        self.evaluate_current()?;
        self.ledger.w_int += delta
            .iter()
            .zip(f_old.iter().zip(&self.forces.f))
            .map(|(&d, (&a, &b))| T::half() * (a + b) * d)
            .sum::<T>();
        if matches!(self.scheme, Scheme::Explicit) {
            for &i in self.sys.dofs.free() {
                self.state.a[i] = (self.f_ext[i] - self.forces.f[i]) / self.sys.mass.m[i];
            }
        }
        self.update_reactions();
        Ok(())
    }

    /// Advance by one time step.
    pub fn step(&mut self) -> Result<StepReport<T>> {
        self.maybe_perturb()?;
        let step = self.step + 1;
        let q0 = self.state.q.clone();
        let f_int0 = self.forces.f.clone();
        let f_ext0 = self.f_ext.clone();
        let r0 = self.reactions.clone();
        let (iterations, converged, criteria) = match self.scheme {
            Scheme::Explicit => self.explicit_step(step)?,
            Scheme::GenAlpha(p) => self.implicit_step(step, p, &f_int0, &f_ext0)?,
            Scheme::Static => self.static_step(step)?,
        };
        self.state.facet_states.clone_from_slice(&self.forces.states);
        self.state.time = self.time_at(step);
        self.step = step;
        self.update_reactions();

        let mut w_int = T::zero();
        let mut w_ext = T::zero();
        for i in 0..q0.len() {
            let dq = self.state.q[i] - q0[i];
            w_int += (f_int0[i] + self.forces.f[i]) * dq;
            w_ext += (f_ext0[i] + r0[i] + self.f_ext[i] + self.reactions[i]) * dq;
        }
        self.ledger.w_int += T::half() * w_int;
        self.ledger.w_ext += T::half() * w_ext;
        self.ledger.w_kin = kinetic_energy(&self.state.v, &self.sys.mass);
        if !(self.ledger.w_int.is_finite() && self.ledger.w_ext.is_finite() && self.ledger.w_kin.is_finite()) {
            return Err(self.divergence(step, "energy"));
        }

        let mut reaction = [T::zero(); 3];
        let mut displacement = [T::zero(); 3];
        let mut count = [0usize; 3];
        for &i in &self.loaded {
            let c = i % DOFS_PER_NODE;
            reaction[c] += self.reactions[i];
            displacement[c] += self.state.q[i];
            count[c] += 1;
        }
        for c in 0..3 {
            if count[c] > 0 {
                displacement[c] /= T::lit(count[c] as f64);
            }
        }
        Ok(StepReport {
            step,
            time: self.state.time,
            iterations,
            converged,
            criteria,
            reaction,
            displacement,
            energy: self.ledger,
            balance: energy_balance_error(&self.ledger, self.energy_guard),
        })
    }

    fn explicit_step(&mut self, step: usize) -> Result<(usize, bool, CriterionValues<T>)> {
        let dt = self.dt;
        let h = T::half() * dt;
        let sys = self.sys;
        for &i in sys.dofs.free() {
            let v_half = self.state.v[i] + h * self.state.a[i];
            self.state.v[i] = v_half;
            self.state.q[i] += dt * v_half;
        }
        let t1 = self.time_at(step);
        sys.program.apply_prescribed(t1, &mut self.state);
        self.evaluate_current().map_err(|e| self.as_divergence(step, e))?;
        sys.program.forces_into(t1, &mut self.f_ext);
        for &i in sys.dofs.free() {
            let a = (self.f_ext[i] - self.forces.f[i]) / sys.mass.m[i];
            self.state.a[i] = a;
            self.state.v[i] += h * a;
            if !(a.is_finite() && self.state.q[i].is_finite()) {
                return Err(self.divergence(step, format!("dof {i}")));
            }
        }
        Ok((0, true, CriterionValues::default()))
    }

    /// Modified Newton on the free DoFs with the factorized matrix. `residual`
    /// fills r over the free DoFs and the inertia force over all DoFs; the
    /// force norms used for normalization include the prescribed rows, so
    /// reactions count as internal force.
    fn newton(
        &mut self,
        step: usize,
        mut update: impl FnMut(&mut Self, &[T]),
        residual: impl Fn(&Self, &mut [T], &mut [T]),
    ) -> Result<(usize, bool, CriterionValues<T>)> {
        let sys = self.sys;
        let free = sys.dofs.free();
        let nf = free.len();
        let mut r = vec![T::zero(); nf];
        let mut inertia = vec![T::zero(); sys.mesh.dof_count()];
        let mut q = vec![T::zero(); nf];
        let mut delta: Option<Vec<T>> = None;
        let mut iterations = 0;
        loop {
            update(self, delta.as_deref().unwrap_or(&[]));
            let sys = self.sys;
            internal_forces(
                &sys.mesh,
                &sys.ops,
                &sys.material,
                &self.state.q,
                &self.state.facet_states,
                &mut self.trial,
            )
            .map_err(|e| self.as_divergence(step, e))?;
            std::mem::swap(&mut self.forces, &mut self.trial);
            sys.program.forces_into(self.time_at(step), &mut self.f_ext);
            residual(self, &mut r, &mut inertia);
            for (k, &i) in free.iter().enumerate() {
                q[k] = self.state.q[i];
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(self.divergence(step, "residual"));
            }
            let energy_increment = delta
                .as_ref()
                .map(|d| d.iter().zip(&r).map(|(&a, &b)| a * b).sum::<T>().abs());
            let energy_ref = self
                .ledger
                .w_ext
                .abs()
                .max(self.ledger.w_int.abs())
                .max(self.ledger.w_kin);
            let (pass, values) = check_convergence(
                &r,
                delta.as_deref(),
                &q,
                &self.f_ext,
                &self.forces.f,
                &inertia,
                energy_increment,
                energy_ref,
                &self.conv,
            );
            if pass {
                return Ok((iterations, true, values));
            }
            if iterations >= self.conv.max_iter {
                return match self.conv.on_fail {
                    OnFail::AcceptAndFlag => {
                        log::warn!("step {step}: no convergence after {iterations} iterations, accepted");
                        Ok((iterations, false, values))
                    }
                    OnFail::Abort => Err(Error::NonConvergence {
                        step,
                        time: self.time_at(step).as_f64(),
                        iterations,
                    }),
                };
            }
            let mut d: Vec<T> = r.iter().map(|&v| -v).collect();
            self.factor.as_ref().expect("implicit schemes factorize").solve_in_place(&mut d);
            iterations += 1;
            delta = Some(d);
        }
    }

    fn implicit_step(
        &mut self,
        step: usize,
        p: GenAlphaParams<T>,
        f_int0: &[T],
        f_ext0: &[T],
    ) -> Result<(usize, bool, CriterionValues<T>)> {
        let dt = self.dt;
        let sys = self.sys;
        let free = sys.dofs.free();
        let q0: Vec<T> = self.state.q.clone();
        let v0: Vec<T> = self.state.v.clone();
        let a0: Vec<T> = self.state.a.clone();
        let b_dt2 = p.beta * dt * dt;
        let t1 = self.time_at(step);
        sys.program.apply_prescribed(t1, &mut self.state);
        let mut started = false;
        let update = |s: &mut Self, delta: &[T]| {
            for (k, &i) in free.iter().enumerate() {
                if !started {
                    s.state.q[i] = q0[i] + dt * v0[i] + T::half() * dt * dt * a0[i];
                } else {
                    s.state.q[i] += delta[k];
                }
                let a = (s.state.q[i] - q0[i] - dt * v0[i] - (T::half() - p.beta) * dt * dt * a0[i]) / b_dt2;
                s.state.a[i] = a;
                s.state.v[i] = v0[i] + dt * ((T::one() - p.gamma) * a0[i] + p.gamma * a);
            }
            started = true;
        };
        let (am, af) = (p.alpha_m, p.alpha_f);
        let residual = |s: &Self, r: &mut [T], inertia: &mut [T]| {
            for (i, fi) in inertia.iter_mut().enumerate() {
                *fi = s.sys.mass.m[i] * ((T::one() - am) * s.state.a[i] + am * a0[i]);
            }
            for (k, &i) in free.iter().enumerate() {
                let fint = (T::one() - af) * s.forces.f[i] + af * f_int0[i];
                let fext = (T::one() - af) * s.f_ext[i] + af * f_ext0[i];
                r[k] = inertia[i] + fint - fext;
            }
        };
        self.newton(step, update, residual)
    }

    fn static_step(&mut self, step: usize) -> Result<(usize, bool, CriterionValues<T>)> {
        let sys = self.sys;
        let free = sys.dofs.free();
        sys.program.apply_prescribed(self.time_at(step), &mut self.state);
        self.state.v.iter_mut().for_each(|v| *v = T::zero());
        self.state.a.iter_mut().for_each(|a| *a = T::zero());
        let update = |s: &mut Self, delta: &[T]| {
            for (k, &i) in free.iter().enumerate() {
                if let Some(d) = delta.get(k) {
                    s.state.q[i] += *d;
                }
            }
        };
        let residual = |s: &Self, r: &mut [T], inertia: &mut [T]| {
            for (k, &i) in free.iter().enumerate() {
                r[k] = s.forces.f[i] - s.f_ext[i];
            }
            inertia.iter_mut().for_each(|v| *v = T::zero());
        };
        self.newton(step, update, residual)
    }

    /// Run until the program's total time, passing each report to `sink`.
    pub fn run(&mut self, mut sink: impl FnMut(&Self, &StepReport<T>) -> Result<()>) -> Result<()> {
        for _ in self.step..self.total_steps() {
            let report = self.step()?;
            sink(self, &report)?;
        }
        Ok(())
    }
}
