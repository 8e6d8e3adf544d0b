//! Benchmark presets at desk scale.
//!
//! `scale` multiplies the specimen dimensions and the total time (so the
//! nominal strain range is kept) while the particle spacing stays at
//! [`SPACING`]; velocities and ramp durations are the benchmark values.

use super::config::{
    Axis, BoundarySpec, ForceSpec, MeshSource, MonitorSpec, OutputConfig, ResponseConfig, RunConfig, Selector, Side,
    SolverConfig, SolverKind, VelocitySpec,
};
use crate::geometry::{Dof, Fixture, LatticeShape, LatticeSpec};
use crate::integrators::ConvergenceSpec;
use crate::material::MaterialParams;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

/// Lattice spacing of the synthetic meshes, mm.
pub const SPACING: f64 = 10.0;
const JITTER: f64 = 0.15;

const ALL: [Dof; 6] = Dof::ALL;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    FreeVibration,
    UniaxialStrain,
    DogBone,
    NotchedBend,
    UnconfinedFixed,
    UnconfinedFree,
    /// Elastic two-particle pull, for smoke tests.
    SingleFacet,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::FreeVibration,
        Preset::UniaxialStrain,
        Preset::DogBone,
        Preset::NotchedBend,
        Preset::UnconfinedFixed,
        Preset::UnconfinedFree,
        Preset::SingleFacet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::FreeVibration => "free-vibration",
            Preset::UniaxialStrain => "uniaxial-strain",
            Preset::DogBone => "dog-bone",
            Preset::NotchedBend => "notched-bend",
            Preset::UnconfinedFixed => "unconfined-fixed",
            Preset::UnconfinedFree => "unconfined-free",
            Preset::SingleFacet => "single-facet",
        }
    }

    /// Scale giving a few thousand DoFs with the default spacing.
    pub fn default_scale(self) -> f64 {
        match self {
            Preset::NotchedBend => 0.25,
            _ => 0.5,
        }
    }

    /// The synthetic mesh used when no mesh file is given.
    pub fn fixture(self, scale: f64) -> Fixture {
        let lattice = |shape| {
            Fixture::Lattice(LatticeSpec {
                shape,
                spacing: SPACING,
                jitter: JITTER,
                seed: 1,
                diameter_ratio: 0.4,
            })
        };
        let s = scale;
        match self {
            Preset::FreeVibration | Preset::UnconfinedFixed | Preset::UnconfinedFree => lattice(LatticeShape::Prism {
                width: prism_side(s),
                depth: prism_side(s),
                height: 200.0 * s,
            }),
            Preset::UniaxialStrain => lattice(LatticeShape::Cylinder {
                diameter: 100.0 * s,
                height: 200.0 * s,
            }),
            Preset::DogBone => lattice(LatticeShape::DogBone {
                width: 150.0 * s,
                neck: 50.0 * s,
                thickness: 50.0 * s,
                height: 150.0 * s,
            }),
            Preset::NotchedBend => {
                let (length, depth, thickness) = beam_dims(s);
                lattice(LatticeShape::NotchedBeam {
                    length,
                    depth,
                    thickness,
                    notch_depth: depth / 2.0,
                    notch_width: 4.0 * s,
                })
            }
            Preset::SingleFacet => Fixture::SingleFacet {
                length: 50.0,
                area: 100.0,
            },
        }
    }

    /// Complete run configuration with the explicit solver at 0.9 Δt_crit
    /// (static for the single-facet pull).
    pub fn config(self, scale: f64) -> Result<RunConfig> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {scale}")));
        }
        let s = scale;
        let face = |side| Selector::Face { side, tol: None };
        let center = |side| Selector::FaceCenter { side, tol: None };
        let velocity = |dof, value, ramp| VelocitySpec { dof, value, ramp };
        let pull = |select, fix: &[Dof], v: VelocitySpec| BoundarySpec {
            select,
            fix: fix.to_vec(),
            velocity: Some(v),
            force: None,
        };
        let mut material = MaterialParams::default();
        let mut monitor = None;
        let mut response = ResponseConfig::default();
        let (constraints, total_time) = match self {
            Preset::FreeVibration => {
                material = MaterialParams::elastic();
                let corner = Selector::Nearest {
                    point: [prism_side(s), prism_side(s), 200.0 * s],
                };
                monitor = Some(MonitorSpec {
                    select: corner.clone(),
                    dof: Dof::Ux,
                    relative_to: None,
                });
                response.axis = Axis::X;
                let load = BoundarySpec {
                    select: corner,
                    fix: vec![],
                    velocity: None,
                    force: Some(ForceSpec {
                        dof: Dof::Ux,
                        history: vec![[0.0, 0.0], [0.01, 50.0], [0.01004, 0.0]],
                    }),
                };
                (vec![BoundarySpec::fixed(face(Side::ZMin), &ALL), load], 0.1)
            }
            Preset::UniaxialStrain => {
                let (d, h) = (100.0 * s, 200.0 * s);
                response = nominal(std::f64::consts::PI * d * d / 4.0, h, -1.0);
                // θz stays free on both loaded faces.
                (
                    vec![
                        BoundarySpec::fixed(face(Side::ZMin), &[Dof::Uz, Dof::Rx, Dof::Ry]),
                        pull(face(Side::ZMax), &[Dof::Rx, Dof::Ry], velocity(Dof::Uz, -5.0, 0.001)),
                        BoundarySpec::fixed(Selector::Lateral, &[Dof::Ux, Dof::Uy]),
                    ],
                    0.2 * s,
                )
            }
            Preset::DogBone => {
                let fix = [Dof::Ux, Dof::Uy, Dof::Rx, Dof::Ry];
                response = nominal(50.0 * s * 50.0 * s, 150.0 * s, 1.0);
                (
                    vec![
                        BoundarySpec::fixed(face(Side::ZMin), &[Dof::Ux, Dof::Uy, Dof::Uz, Dof::Rx, Dof::Ry]),
                        pull(face(Side::ZMax), &fix, velocity(Dof::Uz, 1.0, 0.001)),
                    ],
                    0.1 * s,
                )
            }
            Preset::NotchedBend => {
                let (l, d, b) = beam_dims(s);
                let near = |x: f64, z: f64| Selector::Nearest { point: [x, b / 2.0, z] };
                response = nominal(1.0, 1.0, -1.0);
                // Crack-mouth opening across the notch.
                monitor = Some(MonitorSpec {
                    select: near(l / 2.0 + SPACING / 2.0, 0.0),
                    dof: Dof::Ux,
                    relative_to: Some(near(l / 2.0 - SPACING / 2.0, 0.0)),
                });
                (
                    vec![
                        BoundarySpec::fixed(near(0.0, 0.0), &[Dof::Uy, Dof::Uz]),
                        BoundarySpec::fixed(near(l, 0.0), &[Dof::Uy, Dof::Uz]),
                        pull(near(l / 2.0, d), &[Dof::Ux, Dof::Uy], velocity(Dof::Uz, -15.0, 0.002)),
                    ],
                    0.1 * s,
                )
            }
            Preset::UnconfinedFixed => {
                response = nominal(prism_side(s).powi(2), 200.0 * s, -1.0);
                (
                    vec![
                        BoundarySpec::fixed(face(Side::ZMin), &ALL),
                        pull(
                            face(Side::ZMax),
                            &[Dof::Ux, Dof::Uy, Dof::Rx, Dof::Ry, Dof::Rz],
                            velocity(Dof::Uz, -5.0, 0.002),
                        ),
                    ],
                    0.2 * s,
                )
            }
            Preset::UnconfinedFree => {
                response = nominal(prism_side(s).powi(2), 200.0 * s, -1.0);
                let pin = [Dof::Ux, Dof::Uy, Dof::Rz];
                (
                    vec![
                        BoundarySpec::fixed(face(Side::ZMin), &[Dof::Uz, Dof::Rx, Dof::Ry]),
                        BoundarySpec::fixed(center(Side::ZMin), &pin),
                        pull(face(Side::ZMax), &[Dof::Rx, Dof::Ry], velocity(Dof::Uz, -5.0, 0.002)),
                        BoundarySpec::fixed(center(Side::ZMax), &pin),
                    ],
                    0.2 * s,
                )
            }
            Preset::SingleFacet => {
                material = MaterialParams::elastic();
                response = nominal(100.0, 50.0, 1.0);
                response.axis = Axis::X;
                let others = [Dof::Uy, Dof::Uz, Dof::Rx, Dof::Ry, Dof::Rz];
                (
                    vec![
                        BoundarySpec::fixed(Selector::Nodes { ids: vec![0] }, &ALL),
                        pull(Selector::Nodes { ids: vec![1] }, &others, velocity(Dof::Ux, 1e-3, 0.0)),
                    ],
                    1.0,
                )
            }
        };
        let solver = match self {
            Preset::SingleFacet => SolverConfig::new(SolverKind::Static, Some(0.1), total_time),
            _ => SolverConfig::new(SolverKind::Explicit, None, total_time),
        };
        let stride = match self {
            Preset::SingleFacet => 1,
            _ => 50,
        };
        Ok(RunConfig {
            mesh: MeshSource {
                path: None,
                fixture: Some(self.fixture(scale)),
            },
            material,
            solver,
            convergence: ConvergenceSpec::default(),
            constraints,
            perturbation: None,
            response,
            output: OutputConfig {
                dir: PathBuf::from("out").join(self.name()),
                stride,
                monitor,
                n_peaks: 5,
            },
        })
    }
}

/// Cross-section side of the prisms, rounded to an even number of lattice
/// cells so that a node sits at the centre of each end face.
fn prism_side(scale: f64) -> f64 {
    let half_cells = (100.0 * scale / (2.0 * SPACING)).round().max(1.0);
    2.0 * half_cells * SPACING
}

/// Beam of span 4D with an odd number of lattice columns, so that one column
/// is centred on the notch.
fn beam_dims(scale: f64) -> (f64, f64, f64) {
    let depth = 200.0 * scale;
    let mut cells = (4.0 * depth / SPACING).round().max(1.0);
    if cells % 2.0 == 0.0 {
        cells += 1.0;
    }
    (cells * SPACING, depth, 100.0 * scale)
}

fn nominal(area: f64, length: f64, sign: f64) -> ResponseConfig {
    ResponseConfig {
        axis: Axis::Z,
        area,
        length,
        sign,
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|p| p.name()).collect();
            Error::InvalidParameter(format!("unknown preset `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

/// A preset plus the command-line overrides of `bench`.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkSpec {
    pub preset: Preset,
    pub scale: Option<f64>,
    pub mesh: Option<PathBuf>,
    pub solver: Option<SolverKind>,
    /// Required for implicit solvers unless the default `total_time / 500`
    /// is acceptable.
    pub dt: Option<f64>,
    pub total_time: Option<f64>,
    pub out: Option<PathBuf>,
}

impl BenchmarkSpec {
    pub fn new(preset: Preset) -> Self {
        Self {
            preset,
            scale: None,
            mesh: None,
            solver: None,
            dt: None,
            total_time: None,
            out: None,
        }
    }

    pub fn to_config(&self) -> Result<RunConfig> {
        let mut cfg = self.preset.config(self.scale.unwrap_or(self.preset.default_scale()))?;
        if let Some(path) = &self.mesh {
            cfg.mesh = MeshSource {
                path: Some(path.clone()),
                fixture: None,
            };
        }
        if let Some(t) = self.total_time {
            cfg.solver.total_time = t;
        }
        if let Some(kind) = self.solver {
            cfg.solver = SolverConfig::new(kind, cfg.solver.dt, cfg.solver.total_time);
            if kind != SolverKind::Explicit && cfg.solver.dt.is_none() {
                cfg.solver.dt = Some(cfg.solver.total_time / 500.0);
            }
        }
        if self.dt.is_some() {
            cfg.solver.dt = self.dt;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::{parse_config_str, write_config};
    use crate::geometry::build_fixture;

    #[test]
    fn every_preset_round_trips() {
        for p in Preset::ALL {
            let c = p.config(p.default_scale()).unwrap();
            c.validate().unwrap();
            let text = write_config(&c).unwrap();
            assert_eq!(parse_config_str(&text).unwrap(), c, "{p}\n{text}");
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("three-point".parse::<Preset>().is_err());
    }

    #[test]
    fn free_vibration_is_elastic() {
        let c = Preset::FreeVibration.config(0.5).unwrap();
        assert_eq!(c.material.law, crate::material::Law::Elastic);
        assert_eq!(Preset::DogBone.config(0.5).unwrap().material.law, crate::material::Law::Nonlinear);
    }

    #[test]
    fn desk_meshes_are_small() {
        for p in Preset::ALL {
            let mesh: crate::Mesh64 = build_fixture(&p.fixture(p.default_scale())).unwrap();
            let dofs = mesh.dof_count();
            assert!(dofs <= 4000, "{p}: {dofs} DoFs");
            let c = p.config(p.default_scale()).unwrap();
            c.constraint_set(&mesh).unwrap();
        }
    }

    #[test]
    fn unconfined_free_pins_face_centres() {
        let c = Preset::UnconfinedFree.config(0.5).unwrap();
        let mesh: crate::Mesh64 = c.mesh.load().unwrap();
        let set = c.constraint_set(&mesh).unwrap();
        let top = Selector::Face { side: Side::ZMax, tol: None }.resolve(&mesh).unwrap();
        let (lo, hi) = mesh.bounds();
        let mid = (lo + hi) * 0.5;
        for &n in &top {
            let p = mesh.nodes[n].position;
            let centred = (p.x - mid.x).abs() < 1e-9 && (p.y - mid.y).abs() < 1e-9;
            let pinned = set.iter().any(|k| k.node == n && k.dof == Dof::Ux);
            assert_eq!(pinned, centred, "node {n} at {p:?}");
        }
    }

    #[test]
    fn uniaxial_fixes_the_mantle() {
        let c = Preset::UniaxialStrain.config(0.5).unwrap();
        let mesh: crate::Mesh64 = c.mesh.load().unwrap();
        let set = c.constraint_set(&mesh).unwrap();
        let (lo, hi) = mesh.bounds();
        let r = (hi.x - lo.x) / 2.0;
        for n in &mesh.nodes {
            let (dx, dy) = (n.position.x - (lo.x + r), n.position.y - (lo.y + r));
            let outer = (dx * dx + dy * dy).sqrt() > r - 1e-6;
            let fixed = set.iter().any(|k| k.node == n.id && k.dof == Dof::Ux);
            if outer {
                assert!(fixed, "outermost node {} free in x", n.id);
            }
        }
        assert!(set.iter().all(|k| k.dof != Dof::Rz));
    }

    #[test]
    fn overrides() {
        let mut b = BenchmarkSpec::new(Preset::DogBone);
        b.solver = Some(SolverKind::Genalpha);
        let c = b.to_config().unwrap();
        assert_eq!(c.solver.dt, Some(c.solver.total_time / 500.0));
        b.dt = Some(-1.0);
        assert!(b.to_config().is_err());
    }
}
