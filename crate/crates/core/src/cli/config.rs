//! TOML run configuration.
//!
//! ```toml
//! [mesh]
//! path = "specimen.mesh"          # or: fixture = { kind = "single-tet" }
//!
//! [material]                      # any MaterialParams key; omitted keys keep defaults
//! law = "elastic"
//!
//! [solver]
//! kind = "genalpha"               # explicit | genalpha | hht | static
//! rho_inf = 0.8                   # genalpha only (default 0.8)
//! dt = 1e-5                       # optional for explicit: safety * critical step
//! total_time = 0.1
//!
//! [[constraints]]
//! select = { kind = "face", side = "z-" }
//! fix = ["ux", "uy", "uz", "rx", "ry", "rz"]
//!
//! [[constraints]]
//! select = { kind = "face", side = "z+" }
//! velocity = { dof = "uz", value = -5.0, ramp = 0.001 }
//!
//! [output]
//! dir = "out"
//! stride = 10
//! ```
//!
//! Unknown keys are rejected everywhere. See `docs/config.md` for the full
//! schema and the defaults.

use crate::geometry::{build_fixture, load_mesh, Constraint, ConstraintKind, ConstraintSet, Dof, Fixture, Mesh};
use crate::integrators::{genalpha_from_rho, hht_params, ConvergenceSpec, Perturbation, Scheme};
use crate::material::MaterialParams;
use crate::{Error, Result, Vec3};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshSource,
    #[serde(default)]
    pub material: MaterialParams<f64>,
    pub solver: SolverConfig,
    #[serde(default)]
    pub convergence: ConvergenceSpec<f64>,
    #[serde(default)]
    pub constraints: Vec<BoundarySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
    #[serde(default)]
    pub response: ResponseConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Exactly one of `path` and `fixture`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<Fixture>,
}

impl MeshSource {
    pub fn load(&self) -> Result<Mesh<f64>> {
        match (&self.path, &self.fixture) {
            (Some(p), None) => load_mesh(p),
            (None, Some(f)) => build_fixture(f),
            _ => Err(config_err("mesh", "give exactly one of `path` and `fixture`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Explicit,
    Genalpha,
    Hht,
    Static,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Time step in s; the load increment (in program time) for `static`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub total_time: f64,
    /// Fraction of the critical step used when an explicit `dt` is omitted.
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_inf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// |W_ext| in N·mm below which the balance error is not evaluated.
    #[serde(default = "default_guard")]
    pub energy_guard: f64,
}

fn default_safety() -> f64 {
    0.9
}
fn default_guard() -> f64 {
    1e-12
}

impl SolverConfig {
    pub fn new(kind: SolverKind, dt: Option<f64>, total_time: f64) -> Self {
        Self {
            kind,
            dt,
            total_time,
            safety: default_safety(),
            rho_inf: None,
            alpha: None,
            energy_guard: default_guard(),
        }
    }

    pub fn scheme(&self) -> Result<Scheme<f64>> {
        Ok(match self.kind {
            SolverKind::Explicit => Scheme::Explicit,
            SolverKind::Genalpha => Scheme::GenAlpha(genalpha_from_rho(self.rho_inf.unwrap_or(0.8))?),
            SolverKind::Hht => Scheme::GenAlpha(hht_params(self.alpha.unwrap_or(-0.05))?),
            SolverKind::Static => Scheme::Static,
        })
    }

    /// The configured step, or `safety * critical` for explicit runs.
    pub fn time_step(&self, critical: impl FnOnce() -> f64) -> f64 {
        self.dt.unwrap_or_else(|| self.safety * critical())
    }

    fn validate(&self) -> Result<()> {
        if !(self.total_time > 0.0 && self.total_time.is_finite()) {
            return Err(config_err("solver.total_time", "must be positive"));
        }
        match self.dt {
            Some(dt) if !(dt > 0.0 && dt.is_finite()) => return Err(config_err("solver.dt", "must be positive")),
            None if self.kind != SolverKind::Explicit => {
                return Err(config_err("solver.dt", "required unless kind = \"explicit\""))
            }
            _ => {}
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(config_err("solver.safety", "must lie in (0, 1]"));
        }
        if self.rho_inf.is_some() && self.kind != SolverKind::Genalpha {
            return Err(config_err("solver.rho_inf", "only valid with kind = \"genalpha\""));
        }
        if self.alpha.is_some() && self.kind != SolverKind::Hht {
            return Err(config_err("solver.alpha", "only valid with kind = \"hht\""));
        }
        if !(self.energy_guard >= 0.0) {
            return Err(config_err("solver.energy_guard", "must be non-negative"));
        }
        self.scheme().map_err(|e| config_err("solver", e))?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "x-")]
    XMin,
    #[serde(rename = "x+")]
    XMax,
    #[serde(rename = "y-")]
    YMin,
    #[serde(rename = "y+")]
    YMax,
    #[serde(rename = "z-")]
    ZMin,
    #[serde(rename = "z+")]
    ZMax,
}

impl Side {
    fn axis(self) -> usize {
        self as usize / 2
    }

    fn is_max(self) -> bool {
        self as usize % 2 == 1
    }
}

/// Node sets, resolved against the mesh bounding box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Selector {
    All,
    Nodes {
        ids: Vec<usize>,
    },
    /// Nodes within `tol` mm of a bounding-box face.
    Face {
        side: Side,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol: Option<f64>,
    },
    /// The face node closest to the centre of that face.
    FaceCenter {
        side: Side,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol: Option<f64>,
    },
    /// Nodes on boundary faces whose normal is closer to horizontal than
    /// vertical (the mantle of a z-loaded specimen).
    Lateral,
    Nearest {
        point: [f64; 3],
    },
}

fn at<T: Copy>(v: Vec3<T>, axis: usize) -> T {
    [v.x, v.y, v.z][axis]
}

impl Selector {
    /// Ascending, non-empty node list.
    pub fn resolve(&self, mesh: &Mesh<f64>) -> Result<Vec<usize>> {
        let (lo, hi) = mesh.bounds();
        let extent = (hi - lo).norm();
        let default_tol = 1e-6 * extent + 1e-12;
        let on_face = |side: Side, tol: Option<f64>| -> Vec<usize> {
            let a = side.axis();
            let tol = tol.unwrap_or(default_tol);
            mesh.nodes
                .iter()
                .filter(|n| {
                    let x = at(n.position, a);
                    if side.is_max() {
                        x >= at(hi, a) - tol
                    } else {
                        x <= at(lo, a) + tol
                    }
                })
                .map(|n| n.id)
                .collect()
        };
        let nearest = |candidates: &[usize], p: Vec3<f64>| -> Vec<usize> {
            candidates
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let da = (mesh.nodes[a].position - p).norm();
                    let db = (mesh.nodes[b].position - p).norm();
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .into_iter()
                .collect()
        };
        let mut ids = match self {
            Selector::All => (0..mesh.nodes.len()).collect(),
            Selector::Nodes { ids } => {
                if let Some(&bad) = ids.iter().find(|&&i| i >= mesh.nodes.len()) {
                    return Err(Error::Mesh(format!("selected node {bad} does not exist")));
                }
                ids.clone()
            }
            Selector::Face { side, tol } => on_face(*side, *tol),
            Selector::FaceCenter { side, tol } => {
                let mid = (lo + hi) * 0.5;
                let mut c = [mid.x, mid.y, mid.z];
                c[side.axis()] = if side.is_max() { at(hi, side.axis()) } else { at(lo, side.axis()) };
                nearest(&on_face(*side, *tol), Vec3::new(c[0], c[1], c[2]))
            }
            Selector::Lateral => lateral_nodes(mesh, default_tol),
            Selector::Nearest { point } => {
                let all: Vec<usize> = (0..mesh.nodes.len()).collect();
                nearest(&all, Vec3::new(point[0], point[1], point[2]))
            }
        };
        ids.sort_unstable();
        ids.dedup();
        if ids.is_empty() {
            return Err(Error::Mesh(format!("selector {self:?} matches no node")));
        }
        Ok(ids)
    }
}

fn lateral_nodes(mesh: &Mesh<f64>, tol: f64) -> Vec<usize> {
    if mesh.tets.is_empty() {
        let (lo, hi) = mesh.bounds();
        return mesh
            .nodes
            .iter()
            .filter(|n| {
                let p = n.position;
                p.x <= lo.x + tol || p.x >= hi.x - tol || p.y <= lo.y + tol || p.y >= hi.y - tol
            })
            .map(|n| n.id)
            .collect();
    }
    let mut on = vec![false; mesh.nodes.len()];
    for f in mesh.boundary_faces() {
        let p = |i: usize| mesh.nodes[f[i]].position;
        let n = (p(1) - p(0)).cross(p(2) - p(0));
        if n.z.abs() < std::f64::consts::FRAC_1_SQRT_2 * n.norm() {
            f.iter().for_each(|&i| on[i] = true);
        }
    }
    (0..on.len()).filter(|&i| on[i]).collect()
}

/// One boundary-condition block: a node set and what to impose on it.
/// Forces are applied in full to every selected node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub select: Selector,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fix: Vec<Dof>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<VelocitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force: Option<ForceSpec>,
}

impl BoundarySpec {
    pub fn fixed(select: Selector, fix: &[Dof]) -> Self {
        Self {
            select,
            fix: fix.to_vec(),
            velocity: None,
            force: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocitySpec {
    pub dof: Dof,
    /// mm/s (rad/s for rotations).
    pub value: f64,
    /// Duration of the linear start-up, s.
    #[serde(default)]
    pub ramp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceSpec {
    pub dof: Dof,
    /// Piecewise-linear (time s, force N) points.
    pub history: Vec<[f64; 2]>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    #[default]
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Nominal measures: strain = sign·u/length, stress = sign·P/area, where u
/// and P are the loaded-set displacement and summed reaction along `axis`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResponseConfig {
    pub axis: Axis,
    pub area: f64,
    pub length: f64,
    pub sign: f64,
}

impl Default for ResponseConfig {
    fn default() -> Self {
        Self {
            axis: Axis::Z,
            area: 1.0,
            length: 1.0,
            sign: 1.0,
        }
    }
}

/// A recorded DoF value, optionally relative to a second node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorSpec {
    /// The lowest selected node is used.
    pub select: Selector,
    pub dof: Dof,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_to: Option<Selector>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Record every `stride`-th step (plus the last and any non-converged).
    pub stride: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monitor: Option<MonitorSpec>,
    /// Spectrum peaks of the monitor history listed in the summary.
    pub n_peaks: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            stride: 1,
            monitor: None,
            n_peaks: 5,
        }
    }
}

pub(crate) fn config_err(key: impl Into<String>, message: impl ToString) -> Error {
    Error::Config {
        key: key.into(),
        message: message.to_string(),
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mesh.path.is_some() == self.mesh.fixture.is_some() {
            return Err(config_err("mesh", "give exactly one of `path` and `fixture`"));
        }
        self.material.validate().map_err(|e| config_err("material", e))?;
        self.solver.validate()?;
        self.convergence.validate().map_err(|e| config_err("convergence", e))?;
        for (i, b) in self.constraints.iter().enumerate() {
            if b.fix.is_empty() && b.velocity.is_none() && b.force.is_none() {
                return Err(config_err(format!("constraints[{i}]"), "needs `fix`, `velocity` or `force`"));
            }
            if let Some(f) = &b.force {
                if f.history.is_empty() {
                    return Err(config_err(format!("constraints[{i}].force.history"), "must not be empty"));
                }
            }
        }
        if let Some(p) = &self.perturbation {
            if !(p.eta >= 0.0 && p.interval > 0.0) {
                return Err(config_err("perturbation", "needs eta >= 0 and interval > 0"));
            }
        }
        let r = &self.response;
        if !(r.area > 0.0 && r.length > 0.0 && r.sign != 0.0 && r.sign.is_finite()) {
            return Err(config_err("response", "area and length must be positive and sign non-zero"));
        }
        if self.output.stride == 0 {
            return Err(config_err("output.stride", "must be at least 1"));
        }
        Ok(())
    }

    /// Resolve all boundary blocks against `mesh`.
    pub fn constraint_set(&self, mesh: &Mesh<f64>) -> Result<ConstraintSet<f64>> {
        let mut set = ConstraintSet::new();
        for (i, b) in self.constraints.iter().enumerate() {
            let key = format!("constraints[{i}]");
            let nodes = b.select.resolve(mesh).map_err(|e| config_err(format!("{key}.select"), e))?;
            let ramp_ok = b.velocity.map_or(true, |v| v.ramp >= 0.0 && v.ramp <= self.solver.total_time);
            if !ramp_ok {
                return Err(config_err(format!("{key}.velocity.ramp"), "must lie in [0, total_time]"));
            }
            for node in nodes {
                let mut add = |dof, kind| set.insert(Constraint { node, dof, kind }).map_err(|e| config_err(&key, e));
                for &dof in &b.fix {
                    add(dof, ConstraintKind::Fixed)?;
                }
                if let Some(v) = b.velocity {
                    add(
                        v.dof,
                        ConstraintKind::Velocity {
                            target: v.value,
                            ramp: v.ramp,
                        },
                    )?;
                }
                if let Some(f) = &b.force {
                    let history = f.history.iter().map(|p| (p[0], p[1])).collect();
                    add(f.dof, ConstraintKind::Force { history })?;
                }
            }
        }
        Ok(set)
    }
}

/// Parse and validate a config file; a relative mesh path is taken relative
/// to the file's directory.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut cfg = parse_config_str(&text)?;
    if let (Some(mesh), Some(dir)) = (&cfg.mesh.path, path.parent()) {
        if mesh.is_relative() {
            cfg.mesh.path = Some(dir.join(mesh));
        }
    }
    Ok(cfg)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let key = e.span().map(|s| key_at(text, s.start)).unwrap_or_default();
        config_err(key, e.message())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn write_config(cfg: &RunConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| config_err("", e))
}

/// Best-effort dotted key path of the TOML line containing byte `pos`.
fn key_at(text: &str, pos: usize) -> String {
    let mut section = String::new();
    let mut key = String::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if t.starts_with('[') {
            section = t.trim_matches(|c| c == '[' || c == ']').trim().to_owned();
            key.clear();
        } else if let Some((k, _)) = t.split_once('=') {
            key = k.trim().to_owned();
        }
        offset += line.len();
        if offset > pos {
            break;
        }
    }
    match (section.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}
