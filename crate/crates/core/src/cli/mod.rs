//! Run configuration, benchmark presets and file output.
//!
//! A run writes into `output.dir`:
//!
//! | file | content |
//! |------|---------|
//! | `steps.csv` | one [`StepReport`] row per recorded step |
//! | `energy.csv` | `time,W_kin,W_int,W_ext,balance_err_pct,guarded` |
//! | `response.csv` | `time,displacement,force,nominal_strain,nominal_stress[,monitor]` |
//! | `cracks.txt` | `# mesh <hash>`, then `<facet_id> <w_N> <w_M> <w_L> <w>` |
//! | `volumetric.txt` | `# mesh <hash>`, then `<tet_id> <e_V>` |
//! | `spectrum.csv` | monitor spectrum `frequency_hz,amplitude` |
//! | `summary.txt` | `key = value` lines: status, steps, non-converged steps, peaks |
//! | `timing.txt` | wall time (the only file that differs between identical runs) |
//!
//! Rows are streamed while integrating, so on a solver failure everything up
//! to the failing step is kept, the terminal dumps hold the last committed
//! state and the summary records the error.

pub mod config;
pub mod presets;

pub use config::{
    parse_config, parse_config_str, write_config, Axis, BoundarySpec, ForceSpec, MeshSource, MonitorSpec,
    OutputConfig, ResponseConfig, RunConfig, Selector, Side, SolverConfig, SolverKind, VelocitySpec,
};
pub use presets::{BenchmarkSpec, Preset};

use crate::assembly::{crack_openings, volumetric_strains, CrackOpening};
use crate::diagnostics::{fft_peaks, Spectrum};
use crate::geometry::{DofMap, Mesh};
use crate::integrators::{Solver, StepReport, System};
use crate::{Error, Result};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResponseRow {
    pub time: f64,
    pub displacement: f64,
    pub force: f64,
    pub strain: f64,
    pub stress: f64,
    pub monitor: Option<f64>,
}

/// What a run leaves behind, in memory as well as on disk.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub solver: &'static str,
    pub dt: f64,
    pub steps: usize,
    pub non_converged: usize,
    pub wall_time: f64,
    pub mesh_hash: String,
    /// Recorded steps only.
    pub reports: Vec<StepReport<f64>>,
    pub response: Vec<ResponseRow>,
    /// Monitor value at t = 0 and after every step.
    pub monitor: Vec<f64>,
    pub spectrum: Option<Spectrum>,
    pub cracks: Vec<CrackOpening<f64>>,
    /// Largest nominal stress over all steps.
    pub peak_stress: f64,
    /// Largest |balance error| over all steps, %.
    pub max_balance_error: f64,
}

/// Run a configuration, loading its mesh.
pub fn run(cfg: &RunConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let mesh = cfg.mesh.load()?;
    run_with_mesh(cfg, mesh)
}

pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<RunRecord> {
    run(&spec.to_config()?)
}

struct Streams {
    steps: BufWriter<File>,
    energy: BufWriter<File>,
    response: BufWriter<File>,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

impl Streams {
    fn open(dir: &Path, monitor: bool) -> Result<Self> {
        let mut s = Self {
            steps: create(dir, "steps.csv")?,
            energy: create(dir, "energy.csv")?,
            response: create(dir, "response.csv")?,
        };
        let tail = if monitor { ",monitor" } else { "" };
        let io = |e| Error::io("writing headers", e);
        writeln!(s.steps, "{}", StepReport::<f64>::CSV_HEADER).map_err(io)?;
        writeln!(s.energy, "time,W_kin,W_int,W_ext,balance_err_pct,guarded").map_err(io)?;
        writeln!(s.response, "time,displacement,force,nominal_strain,nominal_stress{tail}").map_err(io)?;
        Ok(s)
    }

    fn record(&mut self, r: &StepReport<f64>, row: &ResponseRow) -> std::io::Result<()> {
        writeln!(self.steps, "{}", r.csv_row())?;
        let e = &r.energy;
        writeln!(
            self.energy,
            "{},{},{},{},{},{}",
            r.time, e.w_kin, e.w_int, e.w_ext, r.balance.percent, r.balance.guarded
        )?;
        write!(
            self.response,
            "{},{},{},{},{}",
            row.time, row.displacement, row.force, row.strain, row.stress
        )?;
        match row.monitor {
            Some(m) => writeln!(self.response, ",{m}"),
            None => writeln!(self.response),
        }
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.steps.flush()?;
        self.energy.flush()?;
        self.response.flush()
    }
}

/// Global DoF of the monitor and of its optional reference node.
fn monitor_dofs(cfg: &RunConfig, mesh: &Mesh<f64>) -> Result<Option<(usize, Option<usize>)>> {
    let Some(m) = &cfg.output.monitor else {
        return Ok(None);
    };
    let first = |s: &Selector, key: &str| {
        s.resolve(mesh)
            .map(|ids| DofMap::global(ids[0], m.dof))
            .map_err(|e| config::config_err(key, e))
    };
    let a = first(&m.select, "output.monitor.select")?;
    let b = m
        .relative_to
        .as_ref()
        .map(|s| first(s, "output.monitor.relative_to"))
        .transpose()?;
    Ok(Some((a, b)))
}

/// Run a configuration on an already loaded mesh (the config's mesh source
/// is ignored).
pub fn run_with_mesh(cfg: &RunConfig, mesh: Mesh<f64>) -> Result<RunRecord> {
    let start = Instant::now();
    cfg.validate()?;
    let constraints = cfg.constraint_set(&mesh)?;
    let monitor = monitor_dofs(cfg, &mesh)?;
    let mesh_hash = mesh.content_hash();
    let sys = System::new(mesh, cfg.material.clone(), &constraints, cfg.solver.total_time)?;
    let scheme = cfg.solver.scheme()?;
    let dt = cfg.solver.time_step(|| sys.critical_timestep());
    let mut solver = Solver::new(&sys, scheme, dt, cfg.convergence.clone())?.with_energy_guard(cfg.solver.energy_guard);
    if let Some(p) = cfg.perturbation {
        solver = solver.with_perturbation(p)?;
    }

    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut streams = Streams::open(&dir, monitor.is_some())?;
    let axis = cfg.response.axis.index();
    let resp = &cfg.response;
    let stride = cfg.output.stride;
    let total = solver.total_steps();
    let value = |q: &[f64]| monitor.map(|(a, b)| q[a] - b.map_or(0.0, |b| q[b]));

    let mut rec = RunRecord {
        dir: dir.clone(),
        solver: scheme.name(),
        dt,
        steps: 0,
        non_converged: 0,
        wall_time: 0.0,
        mesh_hash: mesh_hash.clone(),
        reports: Vec::new(),
        response: Vec::new(),
        monitor: value(&solver.state().q).into_iter().collect(),
        spectrum: None,
        cracks: Vec::new(),
        peak_stress: f64::NEG_INFINITY,
        max_balance_error: 0.0,
    };

    let outcome = solver.run(|s, r| {
        let m = value(&s.state().q);
        let row = ResponseRow {
            time: r.time,
            displacement: r.displacement[axis],
            force: r.reaction[axis],
            strain: resp.sign * r.displacement[axis] / resp.length,
            stress: resp.sign * r.reaction[axis] / resp.area,
            monitor: m,
        };
        rec.steps = r.step;
        rec.non_converged += usize::from(!r.converged);
        rec.peak_stress = rec.peak_stress.max(row.stress);
        rec.max_balance_error = rec.max_balance_error.max(r.balance.percent.abs());
        rec.monitor.extend(m);
        if r.step % stride == 0 || !r.converged || r.step == total {
            streams
                .record(r, &row)
                .map_err(|e| Error::io(dir.join("steps.csv").display().to_string(), e))?;
            rec.reports.push(*r);
            rec.response.push(row);
        }
        Ok(())
    });
    streams.flush().map_err(|e| Error::io(dir.display().to_string(), e))?;

    let mesh = &sys.mesh;
    let state = solver.state();
    rec.cracks = crack_openings(mesh, &state.facet_states, &sys.material);
    let mut cracks = format!("# mesh {mesh_hash}\n# facet w_N w_M w_L w\n");
    for (f, c) in mesh.facets.iter().zip(&rec.cracks) {
        let _ = writeln!(cracks, "{} {} {} {} {}", f.id, c.w_n, c.w_m, c.w_l, c.w);
    }
    write_file(&dir, "cracks.txt", &cracks)?;
    if !mesh.tets.is_empty() {
        let mut text = format!("# mesh {mesh_hash}\n# tet e_V\n");
        match volumetric_strains(&state.q, mesh) {
            Ok(ev) => {
                for (t, e) in mesh.tets.iter().zip(ev) {
                    let _ = writeln!(text, "{} {e}", t.id);
                }
            }
            Err(e) => {
                let _ = writeln!(text, "# unavailable: {e}");
            }
        }
        write_file(&dir, "volumetric.txt", &text)?;
    }
    if monitor.is_some() && rec.monitor.len() >= 16 {
        if let Ok(sp) = fft_peaks(&rec.monitor, dt, cfg.output.n_peaks) {
            write_file(&dir, "spectrum.csv", &sp.to_csv())?;
            rec.spectrum = Some(sp);
        }
    }

    let mut summary = String::new();
    let status = match &outcome {
        Ok(()) => "ok".to_owned(),
        Err(e) => format!("failed: {e}"),
    };
    let _ = writeln!(summary, "status = {status}");
    let _ = writeln!(summary, "solver = {}", rec.solver);
    let _ = writeln!(summary, "dt = {dt}");
    let _ = writeln!(summary, "steps = {}", rec.steps);
    let _ = writeln!(summary, "non_converged_steps = {}", rec.non_converged);
    let _ = writeln!(summary, "final_time = {}", state.time);
    let _ = writeln!(summary, "peak_nominal_stress = {}", rec.peak_stress);
    let _ = writeln!(summary, "max_balance_error_pct = {}", rec.max_balance_error);
    let _ = writeln!(summary, "mesh_hash = {mesh_hash}");
    let _ = writeln!(
        summary,
        "nodes = {}\nfacets = {}\ntets = {}\nfree_dofs = {}",
        mesh.nodes.len(),
        mesh.facets.len(),
        mesh.tets.len(),
        sys.dofs.free().len()
    );
    if let Some(sp) = &rec.spectrum {
        for (k, p) in sp.peaks.iter().enumerate() {
            let _ = writeln!(summary, "peak_{} = {} Hz, amplitude {}", k + 1, p.frequency, p.amplitude);
        }
    }
    write_file(&dir, "summary.txt", &summary)?;
    rec.wall_time = start.elapsed().as_secs_f64();
    write_file(&dir, "timing.txt", &format!("wall_time_s = {}\n", rec.wall_time))?;
    outcome.map(|()| rec)
}
