//! Facet constitutive law: fracture in tension with a softening boundary,
//! pore collapse in compression, and frictional shear plasticity.

use crate::{Error, Result, Scalar};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Which facet law to evaluate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Law {
    /// t = E0 diag(1, α, α) e, no history.
    Elastic,
    #[default]
    Nonlinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialParams<T> {
    /// Density in kg/m³.
    pub rho: T,
    #[serde(rename = "E0")]
    pub e0: T,
    pub alpha: T,
    pub sigma_t: T,
    pub lt: T,
    pub rst: T,
    pub nt: T,
    pub sigma_c0: T,
    #[serde(rename = "Hc0_over_E0")]
    pub hc0_over_e0: T,
    #[serde(rename = "Hc1_over_E0")]
    pub hc1_over_e0: T,
    pub kc0: T,
    pub kc1: T,
    pub kc2: T,
    pub kc3: T,
    pub mu0: T,
    pub mu_inf: T,
    #[serde(rename = "sigma_N0")]
    pub sigma_n0: T,
    #[serde(rename = "Ed_over_E0")]
    pub ed_over_e0: T,
    pub beta: T,
    pub kt: T,
    pub ks: T,
    pub kc: T,
    pub rs: T,
    pub law: Law,
}

impl<T: Scalar> Default for MaterialParams<T> {
    fn default() -> Self {
        let l = T::lit;
        Self {
            rho: l(2380.0),
            e0: l(60273.0),
            alpha: l(0.25),
            sigma_t: l(3.44),
            lt: l(500.0),
            rst: l(2.6),
            nt: l(0.4),
            sigma_c0: l(150.0),
            hc0_over_e0: l(0.4),
            hc1_over_e0: l(0.1),
            kc0: l(4.0),
            kc1: l(1.0),
            kc2: l(5.0),
            kc3: l(0.1),
            mu0: l(0.4),
            mu_inf: l(0.0),
            sigma_n0: l(600.0),
            ed_over_e0: l(1.0),
            beta: l(0.0),
            kt: l(0.0),
            ks: l(0.0),
            kc: l(0.0),
            rs: l(0.0),
            law: Law::Nonlinear,
        }
    }
}

impl<T: Scalar> MaterialParams<T> {
    pub fn elastic() -> Self {
        Self {
            law: Law::Elastic,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho", self.rho),
            ("E0", self.e0),
            ("alpha", self.alpha),
            ("sigma_t", self.sigma_t),
            ("lt", self.lt),
            ("rst", self.rst),
            ("sigma_c0", self.sigma_c0),
            ("sigma_N0", self.sigma_n0),
            ("Ed_over_E0", self.ed_over_e0),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.kc0 > T::one()) {
            return Err(Error::InvalidParameter(format!("kc0 must exceed 1, got {}", self.kc0)));
        }
        let nonneg = [
            ("nt", self.nt),
            ("Hc0_over_E0", self.hc0_over_e0),
            ("Hc1_over_E0", self.hc1_over_e0),
            ("kc1", self.kc1),
            ("kc2", self.kc2),
            ("kc3", self.kc3),
            ("mu0", self.mu0),
            ("mu_inf", self.mu_inf),
            ("beta", self.beta),
            ("rs", self.rs),
        ];
        for (name, v) in nonneg {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative, got {v}")));
            }
        }
        for (name, v) in [("kt", self.kt), ("ks", self.ks), ("kc", self.kc)] {
            if v != T::zero() {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v}: only the hysteresis-free case ({name} = 0) is supported"
                )));
            }
        }
        Ok(())
    }

    /// ρ in tonne/mm³.
    pub fn density(&self) -> T {
        self.rho * T::lit(1e-12)
    }

    pub fn sigma_s(&self) -> T {
        self.rst * self.sigma_t
    }

    pub fn hc0(&self) -> T {
        self.hc0_over_e0 * self.e0
    }

    pub fn hc1(&self) -> T {
        self.hc1_over_e0 * self.e0
    }

    pub fn ed(&self) -> T {
        self.ed_over_e0 * self.e0
    }

    /// Compaction strain at the onset of pore collapse.
    pub fn ec0(&self) -> T {
        self.sigma_c0 / self.e0
    }

    pub fn ec1(&self) -> T {
        self.kc0 * self.ec0()
    }

    pub fn ev0(&self) -> T {
        self.kc3 * self.sigma_c0 / self.e0
    }

    /// Reject facets whose edge is not shorter than l_t.
    pub fn check_length(&self, facet: Option<usize>, l: T) -> Result<()> {
        if self.law == Law::Nonlinear && !(l < self.lt) {
            return Err(Error::SnapBack {
                facet,
                length: l.as_f64(),
                lt: self.lt.as_f64(),
            });
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> MaterialParams<U> {
        let c = |v: T| U::lit(v.as_f64());
        MaterialParams {
            rho: c(self.rho),
            e0: c(self.e0),
            alpha: c(self.alpha),
            sigma_t: c(self.sigma_t),
            lt: c(self.lt),
            rst: c(self.rst),
            nt: c(self.nt),
            sigma_c0: c(self.sigma_c0),
            hc0_over_e0: c(self.hc0_over_e0),
            hc1_over_e0: c(self.hc1_over_e0),
            kc0: c(self.kc0),
            kc1: c(self.kc1),
            kc2: c(self.kc2),
            kc3: c(self.kc3),
            mu0: c(self.mu0),
            mu_inf: c(self.mu_inf),
            sigma_n0: c(self.sigma_n0),
            ed_over_e0: c(self.ed_over_e0),
            beta: c(self.beta),
            kt: c(self.kt),
            ks: c(self.ks),
            kc: c(self.kc),
            rs: c(self.rs),
            law: self.law,
        }
    }
}

/// Facet-local (normal, M, L) components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LocalVec<T> {
    pub n: T,
    pub m: T,
    pub l: T,
}

pub type StrainVec<T> = LocalVec<T>;
pub type TractionVec<T> = LocalVec<T>;

impl<T: Scalar> LocalVec<T> {
    pub fn new(n: T, m: T, l: T) -> Self {
        Self { n, m, l }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn to_array(self) -> [T; 3] {
        [self.n, self.m, self.l]
    }

    pub fn dot(self, o: Self) -> T {
        self.n * o.n + self.m * o.m + self.l * o.l
    }

    pub fn is_finite(self) -> bool {
        self.n.is_finite() && self.m.is_finite() && self.l.is_finite()
    }

    pub fn shear_norm(self) -> T {
        self.m.hypot(self.l)
    }
}

/// Per-facet history.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FacetState<T> {
    /// Maximum effective strain reached in tension.
    pub e_max: T,
    pub ep_m: T,
    pub ep_l: T,
    /// Most compressive normal strain reached.
    pub en_min: T,
    /// Strain and traction at the last update.
    pub strain: StrainVec<T>,
    pub traction: TractionVec<T>,
}

impl<T: Scalar> FacetState<T> {
    pub fn virgin() -> Self {
        Self {
            e_max: T::zero(),
            ep_m: T::zero(),
            ep_l: T::zero(),
            en_min: T::zero(),
            strain: LocalVec::zero(),
            traction: LocalVec::zero(),
        }
    }
}

/// Effective strain and coupling angle ω ∈ [−π/2, π/2].
pub fn effective_measures<T: Scalar>(e: StrainVec<T>, p: &MaterialParams<T>) -> (T, T) {
    let shear = (p.alpha * (e.m * e.m + e.l * e.l)).sqrt();
    let eff = e.n.hypot(shear);
    if eff == T::zero() {
        return (eff, T::lit(FRAC_PI_2));
    }
    (eff, e.n.atan2(shear))
}

/// Strength limit σ_0(ω) for the effective traction.
pub fn sigma0<T: Scalar>(omega: T, p: &MaterialParams<T>) -> T {
    let (s, c) = omega.sin_cos();
    let r2 = p.rst * p.rst;
    T::two() * p.sigma_t / (s + (s * s + T::lit(4.0) * p.alpha * c * c / r2).sqrt())
}

/// Softening modulus H_0(ω) for a facet of edge length `l`.
#[allow(non_snake_case)]
pub fn H0<T: Scalar>(omega: T, l: T, p: &MaterialParams<T>) -> Result<T> {
    p.check_length(None, l)?;
    let ht = T::two() * p.e0 / (p.lt / l - T::one());
    let hs = p.rs * p.e0 / p.alpha;
    let x = (T::two() * omega / T::lit(std::f64::consts::PI)).max(T::zero());
    Ok(hs + (ht - hs) * x.powf(p.nt))
}

/// Tensile boundary σ_bt(e_max, ω).
pub fn sigma_bt<T: Scalar>(e_max: T, omega: T, l: T, p: &MaterialParams<T>) -> Result<T> {
    let s0 = sigma0(omega, p);
    let e0 = s0 / p.e0;
    let excess = (e_max - e0).max(T::zero());
    if excess == T::zero() {
        return Ok(s0);
    }
    Ok(s0 * (-H0(omega, l, p)? * excess / s0).exp())
}

/// Initial hardening modulus H_c(r_DV).
pub fn hc<T: Scalar>(r_dv: T, p: &MaterialParams<T>) -> T {
    let (h0, h1) = (p.hc0(), p.hc1());
    (h0 - h1) / (T::one() + p.kc2 * (r_dv - p.kc1).max(T::zero())) + h1
}

/// Deviatoric-to-volumetric strain ratio.
pub fn r_dv<T: Scalar>(e_d: T, e_v: T, p: &MaterialParams<T>) -> T {
    let ev0 = p.ev0();
    if e_v <= T::zero() {
        -e_d.abs() / (e_v - ev0)
    } else {
        e_d.abs() / ev0
    }
}

/// Compressive boundary σ_bc(e_D, e_V) (a positive magnitude).
pub fn sigma_bc<T: Scalar>(e_d: T, e_v: T, p: &MaterialParams<T>) -> T {
    let e_dv = e_v + p.beta * e_d;
    let x = -e_dv;
    if x <= T::zero() {
        return p.sigma_c0;
    }
    let h = hc(r_dv(e_d, e_v, p), p);
    let (ec0, ec1) = (p.ec0(), p.ec1());
    if x <= ec1 {
        p.sigma_c0 + (x - ec0).max(T::zero()) * h
    } else {
        let sc1 = p.sigma_c0 + (ec1 - ec0) * h;
        sc1 * ((x - ec1) * h / sc1).exp()
    }
}

/// Frictional shear strength σ_bs(t_N) for t_N ≤ 0.
pub fn sigma_bs<T: Scalar>(t_n: T, p: &MaterialParams<T>) -> T {
    let dmu = p.mu0 - p.mu_inf;
    // (μ0 − μ∞) σ_N0 (1 − exp(t_N/σ_N0)) via exp_m1, exact at t_N = 0.
    p.sigma_s() - dmu * p.sigma_n0 * (t_n / p.sigma_n0).exp_m1() - p.mu_inf * t_n
}

/// Evaluate the facet law at total strain `e` from the committed `state`.
///
/// Tractions are integrated incrementally from the committed strain and
/// traction, so the result depends only on (`state`, `e`, `e_v`) and Newton
/// iterations can call this repeatedly without drift.
pub fn facet_update<T: Scalar>(
    state: &FacetState<T>,
    e: StrainVec<T>,
    e_v: T,
    l: T,
    p: &MaterialParams<T>,
) -> Result<(TractionVec<T>, FacetState<T>)> {
    if !e.is_finite() || !e_v.is_finite() {
        return Err(Error::NonFinite("facet strain".into()));
    }
    let mut next = *state;
    next.strain = e;
    let t = match p.law {
        Law::Elastic => LocalVec::new(p.e0 * e.n, p.alpha * p.e0 * e.m, p.alpha * p.e0 * e.l),
        Law::Nonlinear if e.n > T::zero() => tension(state, &mut next, e, l, p)?,
        Law::Nonlinear => compression(state, &mut next, e, e_v, p),
    };
    next.traction = t;
    Ok((t, next))
}

fn tension<T: Scalar>(
    old: &FacetState<T>,
    next: &mut FacetState<T>,
    e: StrainVec<T>,
    l: T,
    p: &MaterialParams<T>,
) -> Result<TractionVec<T>> {
    let (eff, omega) = effective_measures(e, p);
    let prev = old.strain;
    let prev_t = old.traction;
    // Base point on the effective traction-strain curve; a compressive normal
    // component in the committed state carries no tensile traction.
    let t_base = (prev_t.n.max(T::zero()).powi(2) + (prev_t.m.powi(2) + prev_t.l.powi(2)) / p.alpha).sqrt();
    let e_base = effective_measures(LocalVec::new(prev.n.max(T::zero()), prev.m, prev.l), p).0;
    let e_max = old.e_max.max(eff);
    let bound = sigma_bt(e_max, omega, l, p)?;
    let t_eff = (t_base + p.e0 * (eff - e_base)).min(bound).max(T::zero());
    next.e_max = e_max;
    let s = t_eff / eff;
    Ok(LocalVec::new(s * e.n, p.alpha * s * e.m, p.alpha * s * e.l))
}

fn compression<T: Scalar>(
    old: &FacetState<T>,
    next: &mut FacetState<T>,
    e: StrainVec<T>,
    e_v: T,
    p: &MaterialParams<T>,
) -> TractionVec<T> {
    let prev = old.strain;
    let prev_t = old.traction;
    let (tn0, en0) = if prev.n <= T::zero() {
        (prev_t.n, prev.n)
    } else {
        (T::zero(), T::zero())
    };
    let stiffness = if -tn0 <= p.sigma_c0 { p.e0 } else { p.ed() };
    let cap = sigma_bc(e.n - e_v, e_v, p);
    let tn = (tn0 + stiffness * (e.n - en0)).min(T::zero()).max(-cap);

    let g = p.alpha * p.e0;
    let mut tm = prev_t.m + g * (e.m - prev.m);
    let mut tl = prev_t.l + g * (e.l - prev.l);
    let limit = sigma_bs(tn, p);
    let mag = tm.hypot(tl);
    if mag > limit {
        let s = limit / mag;
        tm *= s;
        tl *= s;
    }
    next.ep_m = old.ep_m + (e.m - prev.m) - (tm - prev_t.m) / g;
    next.ep_l = old.ep_l + (e.l - prev.l) - (tl - prev_t.l) / g;
    next.en_min = old.en_min.min(e.n);
    LocalVec::new(tn, tm, tl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    fn p() -> MaterialParams<f64> {
        MaterialParams::default()
    }

    /// σ_0 as originally written, with the 0/0 at ω = π/2 left in place.
    fn sigma0_original(w: f64, p: &MaterialParams<f64>) -> f64 {
        let (s, c) = w.sin_cos();
        let k = 2.0 * p.alpha * c * c / (p.rst * p.rst);
        p.sigma_t * (-s + (s * s + 2.0 * k).sqrt()) / k
    }

    #[test]
    fn effective_measures_examples() {
        let (e, w) = effective_measures(LocalVec::new(1e-4, 0.0, 0.0), &p());
        assert_eq!((e, w), (1e-4, FRAC_PI_2));
        let (e, w) = effective_measures(LocalVec::new(0.0, 2e-4, 0.0), &p());
        assert_relative_eq!(e, 1e-4, max_relative = 1e-14);
        assert_eq!(w, 0.0);
        let (e, w) = effective_measures(LocalVec::new(1e-4, 2e-4, 0.0), &p());
        assert_relative_eq!(e, 2f64.sqrt() * 1e-4, max_relative = 1e-14);
        assert_relative_eq!(w, FRAC_PI_4, max_relative = 1e-14);
        assert_eq!(effective_measures(LocalVec::zero(), &p()).1, FRAC_PI_2);
    }

    #[test]
    fn sigma0_limits_and_original_form() {
        let p = p();
        assert_relative_eq!(sigma0(FRAC_PI_2, &p), 3.44, max_relative = 1e-15);
        assert_relative_eq!(sigma0(0.0, &p), 3.44 * 2.6 / 0.5, max_relative = 1e-14);
        for w in [0.1, FRAC_PI_4, 1.2, 1.5] {
            assert_relative_eq!(sigma0(w, &p), sigma0_original(w, &p), max_relative = 1e-12);
        }
    }

    #[test]
    fn softening_modulus() {
        let p = p();
        assert_eq!(H0(0.0, 100.0, &p).unwrap(), 0.0);
        assert_relative_eq!(H0(FRAC_PI_2, 100.0, &p).unwrap(), 30136.5, max_relative = 1e-14);
        assert_relative_eq!(
            H0(FRAC_PI_4, 100.0, &p).unwrap(),
            30136.5 * 0.5f64.powf(0.4),
            max_relative = 1e-14
        );
        assert!(matches!(H0(1.0, 500.0, &p), Err(Error::SnapBack { .. })));
        assert!(matches!(H0(1.0, 600.0, &p), Err(Error::SnapBack { .. })));
    }

    #[test]
    fn tensile_boundary() {
        let p = p();
        assert_eq!(sigma_bt(1e-5, FRAC_PI_2, 100.0, &p).unwrap(), 3.44);
        let v = sigma_bt(2.0 * 3.44 / p.e0, FRAC_PI_2, 100.0, &p).unwrap();
        assert_relative_eq!(v, 3.44 * (-30136.5f64 / 60273.0).exp(), max_relative = 1e-13);
        let mut last = f64::INFINITY;
        for k in 0..40 {
            let b = sigma_bt(1e-4 * 1.5f64.powi(k), 1.0, 100.0, &p).unwrap();
            assert!(b >= 0.0);
            assert!(b <= last);
            last = b;
        }
        assert!(last < 1e-10);
    }

    #[test]
    fn compressive_boundary() {
        let p = p();
        assert_eq!(sigma_bc(0.0, 1e-3, &p), 150.0);
        let ec0 = 150.0 / 60273.0;
        assert_relative_eq!(sigma_bc(0.0, -2.0 * ec0, &p), 210.0, max_relative = 1e-12);
        let ec1 = 4.0 * ec0;
        let below = sigma_bc(0.0, -ec1 * (1.0 - 1e-13), &p);
        let above = sigma_bc(0.0, -ec1 * (1.0 + 1e-13), &p);
        assert_relative_eq!(below, above, max_relative = 1e-9);
        let deep = sigma_bc(0.0, -2.0 * ec1, &p);
        let h = p.hc0();
        let sc1 = 150.0 + (ec1 - ec0) * h;
        assert_relative_eq!(deep, sc1 * (ec1 * h / sc1).exp(), max_relative = 1e-12);
    }

    #[test]
    fn hardening_modulus_and_ratio() {
        let p = p();
        assert_relative_eq!(hc(0.5, &p), 24109.2, max_relative = 1e-12);
        assert_relative_eq!(hc(1e12, &p), 6027.3, max_relative = 1e-9);
        assert_relative_eq!(hc(1.2, &p), 15068.25, max_relative = 1e-12);
        let ev0 = p.ev0();
        assert_eq!(r_dv(0.0, -1e-3, &p), 0.0);
        assert_relative_eq!(r_dv(2.0 * ev0, -ev0, &p), 1.0, max_relative = 1e-14);
        assert_relative_eq!(r_dv(-2.0 * ev0, -ev0, &p), 1.0, max_relative = 1e-14);
        assert_relative_eq!(r_dv(ev0, ev0, &p), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn shear_boundary() {
        let p = p();
        assert_eq!(sigma_bs(0.0, &p), p.rst * p.sigma_t);
        let expect = 8.944 + 0.4 * 600.0 * (1.0 - (-1f64).exp());
        assert_relative_eq!(sigma_bs(-600.0, &p), expect, max_relative = 1e-14);
        assert!((sigma_bs(-600.0, &p) - 160.66).abs() < 0.01);
        let coulomb = MaterialParams { mu0: 0.3, mu_inf: 0.3, ..p.clone() };
        assert_relative_eq!(sigma_bs(-50.0, &coulomb), 8.944 + 15.0, max_relative = 1e-14);
    }

    #[test]
    fn elastic_regime() {
        let p = p();
        let (t, _) = facet_update(&FacetState::virgin(), LocalVec::new(1e-6, 0.0, 0.0), 0.0, 100.0, &p).unwrap();
        assert_relative_eq!(t.n, 0.060273, max_relative = 1e-13);
        assert_eq!((t.m, t.l), (0.0, 0.0));
    }

    #[test]
    fn monotonic_tension_traces_boundary() {
        let p = p();
        let mut s = FacetState::virgin();
        for k in 1..=400 {
            let en = 2.5e-6 * k as f64;
            let (t, next) = facet_update(&s, LocalVec::new(en, 0.0, 0.0), 0.0, 100.0, &p).unwrap();
            let oracle = (p.e0 * en).min(3.44 * (-30136.5 * (en - 3.44 / p.e0).max(0.0) / 3.44).exp());
            assert!(((t.n - oracle) / oracle).abs() < 1e-8, "k={k}: {} vs {oracle}", t.n);
            s = next;
        }
    }

    #[test]
    fn shear_return_under_compression() {
        let p = p();
        let e = LocalVec::new(-1e-4, 1e-2, 0.0);
        let (t, s) = facet_update(&FacetState::virgin(), e, 0.0, 100.0, &p).unwrap();
        assert_relative_eq!(t.n, -p.e0 * 1e-4, max_relative = 1e-13);
        let bs = sigma_bs(t.n, &p);
        assert!((t.m - bs).abs() <= 1e-10 * bs);
        assert_eq!(t.l, 0.0);
        assert_relative_eq!(s.ep_m, 1e-2 - bs / (p.alpha * p.e0), max_relative = 1e-12);
    }

    #[test]
    fn peak_matches_strength_for_radial_paths() {
        let p = p();
        for w in [0.0, FRAC_PI_4, FRAC_PI_2] {
            let dir = LocalVec::new(w.sin(), w.cos() / p.alpha.sqrt(), 0.0);
            let mut s = FacetState::virgin();
            let mut peak: f64 = 0.0;
            let s0 = sigma0(w, &p);
            let mut amps: Vec<f64> = (1..=5000).map(|k| 1e-7 * k as f64).collect();
            amps.push(s0 / p.e0);
            amps.sort_by(f64::total_cmp);
            for a in amps {
                let e = LocalVec::new(a * dir.n, a * dir.m, 0.0);
                let (t, next) = facet_update(&s, e, 0.0, 100.0, &p).unwrap();
                peak = peak.max((t.n * t.n + t.m * t.m / p.alpha).sqrt());
                s = next;
            }
            assert!(((peak - s0) / s0).abs() < 1e-6, "ω={w}: {peak} vs {s0}");
        }
    }

    #[test]
    fn snap_back_is_reported() {
        let r = facet_update(&FacetState::virgin(), LocalVec::new(1e-3, 0.0, 0.0), 0.0, 600.0, &p());
        assert!(matches!(r, Err(Error::SnapBack { .. })));
        let r = facet_update(&FacetState::virgin(), LocalVec::new(f64::NAN, 0.0, 0.0), 0.0, 10.0, &p());
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn f32_instantiation() {
        let p = MaterialParams::<f32>::default();
        let (t, _) = facet_update(&FacetState::virgin(), LocalVec::new(1e-6f32, 0.0, 0.0), 0.0, 100.0, &p).unwrap();
        assert!((t.n - 0.060273).abs() < 1e-6);
    }

    fn strain() -> impl Strategy<Value = LocalVec<f64>> {
        (-2e-3..2e-3f64, -3e-3..3e-3f64, -3e-3..3e-3f64).prop_map(|(n, m, l)| LocalVec::new(n, m, l))
    }

    fn drive(
        path: &[LocalVec<f64>],
        ev: f64,
        p: &MaterialParams<f64>,
    ) -> Vec<(LocalVec<f64>, FacetState<f64>)> {
        let mut s = FacetState::virgin();
        let mut out = Vec::new();
        for &e in path {
            let (t, next) = facet_update(&s, e, ev, 50.0, p).unwrap();
            out.push((t, next));
            s = next;
        }
        out
    }

    proptest! {
        #[test]
        fn tractions_stay_inside_boundaries(path in prop::collection::vec(strain(), 1..40), ev in -5e-3..1e-3f64) {
            let p = p();
            let mut prev = FacetState::virgin();
            for (k, (t, s)) in drive(&path, ev, &p).into_iter().enumerate() {
                let e = path[k];
                prop_assert!(t.is_finite() && s.ep_m.is_finite() && s.ep_l.is_finite());
                prop_assert!(s.e_max >= prev.e_max);
                let tol = 1e-9 * p.sigma_t;
                if e.n > 0.0 {
                    let (_, w) = effective_measures(e, &p);
                    let teff = (t.n * t.n + (t.m * t.m + t.l * t.l) / p.alpha).sqrt();
                    prop_assert!(teff <= sigma_bt(s.e_max, w, 50.0, &p).unwrap() + tol);
                } else {
                    prop_assert!(t.n <= 0.0 && t.n >= -sigma_bc(e.n - ev, ev, &p) - tol);
                    prop_assert!(t.shear_norm() <= sigma_bs(t.n, &p) + tol);
                }
                prev = s;
            }
        }

        #[test]
        fn elastic_inside_boundaries(path in prop::collection::vec(
            (-2e-5..2e-5f64, -4e-5..4e-5f64, -4e-5..4e-5f64), 1..30)) {
            let p = p();
            let path: Vec<_> = path.into_iter().map(|(n, m, l)| LocalVec::new(n, m, l)).collect();
            for (k, (t, s)) in drive(&path, 0.0, &p).into_iter().enumerate() {
                let e = path[k];
                let el = [p.e0 * e.n, p.alpha * p.e0 * e.m, p.alpha * p.e0 * e.l];
                for (a, b) in t.to_array().iter().zip(el) {
                    prop_assert!((a - b).abs() <= 1e-12 * p.sigma_t, "{a} vs {b}");
                }
                prop_assert!(s.ep_m.abs() < 1e-18 && s.ep_l.abs() < 1e-18);
                prop_assert_eq!(sigma_bt(s.e_max, FRAC_PI_2, 50.0, &p).unwrap(), p.sigma_t);
            }
        }

        #[test]
        fn closed_loops_dissipate(mid in prop::collection::vec(strain(), 1..25), sub in 2usize..12) {
            let p = p();
            let mut corners = vec![LocalVec::zero()];
            corners.extend(mid);
            corners.push(LocalVec::zero());
            let mut path = Vec::new();
            for w in corners.windows(2) {
                for k in 1..=sub {
                    let f = k as f64 / sub as f64;
                    path.push(LocalVec::new(
                        w[0].n + f * (w[1].n - w[0].n),
                        w[0].m + f * (w[1].m - w[0].m),
                        w[0].l + f * (w[1].l - w[0].l),
                    ));
                }
            }
            let out = drive(&path, 0.0, &p);
            let mut work = 0.0;
            let mut e_prev = LocalVec::zero();
            let mut t_prev = LocalVec::zero();
            for (k, (t, _)) in out.iter().enumerate() {
                let de = LocalVec::new(path[k].n - e_prev.n, path[k].m - e_prev.m, path[k].l - e_prev.l);
                let tm = LocalVec::new(0.5 * (t.n + t_prev.n), 0.5 * (t.m + t_prev.m), 0.5 * (t.l + t_prev.l));
                work += tm.dot(de);
                e_prev = path[k];
                t_prev = *t;
            }
            prop_assert!(work >= -1e-9, "net work {work}");
        }

        #[test]
        fn sigma_bc_continuous_at_knots(r in 0.0..10.0f64) {
            let p = p();
            let ev0 = p.ev0();
            for x in [0.0, p.ec1()] {
                // e_V = -x with |e_D| chosen so that r_DV = r.
                let ev = -x;
                let ed = r * (x + ev0);
                let lo = sigma_bc(ed, ev * (1.0 - 1e-12) + 1e-300, &p);
                let hi = sigma_bc(ed, ev * (1.0 + 1e-12) - 1e-300, &p);
                prop_assert!(((lo - hi) / hi).abs() < 1e-9);
            }
        }

        #[test]
        fn sigma0_rationalized_agrees(w in 1e-3..1.4f64) {
            let p = p();
            let a = sigma0(w, &p);
            prop_assert!(((a - sigma0_original(w, &p)) / a).abs() < 1e-11);
        }
    }
}
