//! Pairwise comparison of per-facet fields (crack openings or volumetric
//! strains): Pearson correlation and NRMSE with optional capping.

use crate::{Error, Result, Scalar};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// One run's field, ordered by element id.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample {
    pub label: String,
    pub ids: Vec<usize>,
    pub values: Vec<f64>,
    /// Hash of the mesh the field was computed on, if recorded.
    pub mesh_hash: Option<String>,
}

impl FieldSample {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        let ids = (0..values.len()).collect();
        Self {
            label: label.into(),
            ids,
            values,
            mesh_hash: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Parse a dump (`<id> ... <value>` per line, value in the last column;
    /// `# mesh <hash>` records the mesh).
    pub fn parse(label: impl Into<String>, text: &str) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        let mut mesh_hash = None;
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                if it.next() == Some("mesh") {
                    mesh_hash = it.next().map(str::to_owned);
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let perr = |m: &str| Error::Parse {
                line: k + 1,
                message: m.to_owned(),
            };
            if toks.len() < 2 {
                return Err(perr("expected `<id> ... <value>`"));
            }
            let id: usize = toks[0].parse().map_err(|_| perr("bad id"))?;
            let v: f64 = toks[toks.len() - 1].parse().map_err(|_| perr("bad value"))?;
            if !v.is_finite() {
                return Err(perr("non-finite value"));
            }
            if by_id.insert(id, v).is_some() {
                return Err(perr("duplicate id"));
            }
        }
        let (ids, values) = by_id.into_iter().unzip();
        Ok(Self {
            label: label.into(),
            ids,
            values,
            mesh_hash,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading field {}", path.display()), e))?;
        let label = path
            .parent()
            .and_then(|d| d.file_name())
            .filter(|_| path.file_stem().is_some_and(|s| s == "cracks" || s == "volumetric"))
            .or_else(|| path.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Self::parse(label, &text)
    }

    fn capped(&self, cap: Option<f64>) -> Vec<f64> {
        match cap {
            Some(c) => self.values.iter().map(|&v| v.min(c)).collect(),
            None => self.values.clone(),
        }
    }
}

fn check_lengths<T>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Field(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Field("fields need at least two values".into()));
    }
    Ok(())
}

/// Product-moment correlation. If exactly one field is constant the result
/// is 0; if both are, the coefficient is undefined and an error is returned.
pub fn pearson<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    check_lengths(a, b)?;
    let n = T::lit(a.len() as f64);
    let ma = a.iter().copied().sum::<T>() / n;
    let mb = b.iter().copied().sum::<T>() / n;
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    match (saa > T::zero(), sbb > T::zero()) {
        (false, false) => Err(Error::Field("correlation undefined for two constant fields".into())),
        (true, true) => Ok((sab / (saa.sqrt() * sbb.sqrt())).max(-T::one()).min(T::one())),
        _ => Ok(T::zero()),
    }
}

/// (100 / w̃) √(mean (a − b)²), in percent.
pub fn nrmse<T: Scalar>(a: &[T], b: &[T], w_ref: T) -> Result<T> {
    check_lengths(a, b)?;
    if !(w_ref > T::zero()) {
        return Err(Error::Field(format!("normalization must be positive, got {w_ref}")));
    }
    let n = T::lit(a.len() as f64);
    let ms = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>() / n;
    Ok(T::lit(100.0) / w_ref * ms.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    PracticallyIdentical,
    Minor,
    Major,
    LargelyDifferent,
}

impl Severity {
    pub fn label(self) -> &'static str {
        match self {
            Severity::PracticallyIdentical => "practically identical",
            Severity::Minor => "minor differences",
            Severity::Major => "major differences",
            Severity::LargelyDifferent => "largely different",
        }
    }
}

/// Class boundaries: correlation ≥ corr[i] and NRMSE < nrmse[i] select class i.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub corr: [f64; 3],
    pub nrmse: [f64; 3],
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            corr: [0.999, 0.9, 0.8],
            nrmse: [1.0, 5.0, 10.0],
        }
    }
}

const CLASSES: [Severity; 3] = [Severity::PracticallyIdentical, Severity::Minor, Severity::Major];

impl Thresholds {
    pub fn classify_correlation(&self, c: f64) -> Severity {
        CLASSES
            .iter()
            .zip(self.corr)
            .find(|(_, t)| c >= *t)
            .map_or(Severity::LargelyDifferent, |(s, _)| *s)
    }

    pub fn classify_nrmse(&self, e: f64) -> Severity {
        CLASSES
            .iter()
            .zip(self.nrmse)
            .find(|(_, t)| e < *t)
            .map_or(Severity::LargelyDifferent, |(s, _)| *s)
    }
}

/// Correlations below the diagonal, NRMSE above it.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonMatrix {
    pub labels: Vec<String>,
    /// Symmetric; `None` on the diagonal.
    pub correlation: Vec<Vec<Option<f64>>>,
    pub nrmse: Vec<Vec<Option<f64>>>,
    /// Normalization w̃ used for NRMSE.
    pub w_ref: f64,
    pub thresholds: Thresholds,
}

impl ComparisonMatrix {
    pub fn correlation_class(&self, i: usize, j: usize) -> Option<Severity> {
        self.correlation[i][j].map(|c| self.thresholds.classify_correlation(c))
    }

    pub fn nrmse_class(&self, i: usize, j: usize) -> Option<Severity> {
        self.nrmse[i][j].map(|e| self.thresholds.classify_nrmse(e))
    }

    /// The cell (i, j): correlation if i > j, NRMSE if i < j.
    pub fn cell(&self, i: usize, j: usize) -> Option<(f64, Severity)> {
        match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.correlation[i][j].zip(self.correlation_class(i, j)),
            std::cmp::Ordering::Less => self.nrmse[i][j].zip(self.nrmse_class(i, j)),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,col,kind,value,class\n");
        let n = self.labels.len();
        for i in 0..n {
            for j in 0..n {
                if let Some((v, c)) = self.cell(i, j) {
                    let kind = if i > j { "correlation" } else { "nrmse_pct" };
                    let _ = writeln!(s, "{},{},{kind},{v},{}", self.labels[i], self.labels[j], c.label());
                }
            }
        }
        s
    }

    /// Aligned table: correlations (lower) and NRMSE % (upper).
    pub fn to_table(&self) -> String {
        let n = self.labels.len();
        let width = self.labels.iter().map(String::len).max().unwrap_or(0).max(10);
        let mut s = format!("{:width$}", "");
        for l in &self.labels {
            let _ = write!(s, " {l:>width$}");
        }
        s.push('\n');
        for i in 0..n {
            let _ = write!(s, "{:width$}", self.labels[i]);
            for j in 0..n {
                let cell = match self.cell(i, j) {
                    Some((v, _)) if i > j => format!("{v:.4}"),
                    Some((v, _)) => format!("{v:.3}%"),
                    None => "-".into(),
                };
                let _ = write!(s, " {cell:>width$}");
            }
            s.push('\n');
        }
        s
    }
}

/// Compare all runs pairwise. w̃ is the maximum of the (capped) reference.
pub fn compare_fields(
    runs: &[FieldSample],
    reference: &str,
    cap: Option<f64>,
    thresholds: Thresholds,
) -> Result<ComparisonMatrix> {
    let r = runs
        .iter()
        .find(|s| s.label == reference)
        .ok_or_else(|| Error::Field(format!("reference `{reference}` not among runs")))?;
    for s in runs {
        if s.ids != r.ids {
            return Err(Error::Field(format!(
                "`{}` and `{}` are defined on different facet sets",
                s.label, r.label
            )));
        }
        if let (Some(a), Some(b)) = (&s.mesh_hash, &r.mesh_hash) {
            if a != b {
                return Err(Error::Field(format!(
                    "`{}` was computed on mesh {a}, reference on {b}",
                    s.label
                )));
            }
        }
    }
    if let Some(c) = cap {
        if !(c > 0.0) {
            return Err(Error::Field(format!("cap must be positive, got {c}")));
        }
    }
    let fields: Vec<Vec<f64>> = runs.iter().map(|s| s.capped(cap)).collect();
    let ref_idx = runs.iter().position(|s| s.label == reference).expect("found above");
    let w_ref = fields[ref_idx].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n = runs.len();
    let mut correlation = vec![vec![None; n]; n];
    let mut err = vec![vec![None; n]; n];
    for i in 0..n {
        for j in 0..i {
            let c = pearson(&fields[i], &fields[j])?;
            let e = nrmse(&fields[i], &fields[j], w_ref)?;
            correlation[i][j] = Some(c);
            correlation[j][i] = Some(c);
            err[i][j] = Some(e);
            err[j][i] = Some(e);
        }
    }
    Ok(ComparisonMatrix {
        labels: runs.iter().map(|s| s.label.clone()).collect(),
        correlation,
        nrmse: err,
        w_ref,
        thresholds,
    })
}
