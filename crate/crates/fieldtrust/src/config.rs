//! Declarative experiment configuration.
//!
//! One TOML file describes a full run: mesh, model source, optional ground
//! truth, measurement design, trust prior, solver settings. The schema is
//! strict (unknown keys are errors) and everything is validated before any
//! computation starts. All quantities are in the dimensionless units of
//! the mesh.

use crate::error::{Error, Result};
use crate::measure::TrustPrior;
use crate::mesh::{Mesh, SourceField};
use crate::trust::SolverOptions;
use nalgebra::DVector;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mesh: MeshSpec,
    /// Source term of the assumed model.
    pub source: SourceSpec,
    /// Where the data really come from; omitted means the model is correct.
    pub truth: Option<TruthSpec>,
    pub measurement: MeasurementSpec,
    #[serde(default = "default_prior")]
    pub prior: TrustPrior,
    #[serde(default)]
    pub solver: SolverOptions,
    pub run: RunSpec,
    pub sweep: Option<SweepSpec>,
    pub convergence: Option<ConvergenceSpec>,
}

fn default_prior() -> TrustPrior {
    TrustPrior::Flat
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    /// `[lo, hi]` per axis; one entry for 1D, two for 2D.
    pub extents: Vec<[f64; 2]>,
    /// Grid nodes per axis, boundaries included.
    pub nodes: Vec<usize>,
}

impl MeshSpec {
    pub fn build(&self) -> Result<Mesh> {
        let extents: Vec<(f64, f64)> = self.extents.iter().map(|e| (e[0], e[1])).collect();
        Mesh::new(&extents, &self.nodes)
    }
}

/// Analytic source families plus a nodal-CSV escape hatch.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum SourceSpec {
    Constant {
        value: f64,
    },
    /// `offset + gradient . x` in mesh coordinates.
    Linear {
        offset: f64,
        gradient: Vec<f64>,
    },
    /// `amplitude * prod_a sin(mode_a pi t_a)` with `t_a` the coordinate
    /// normalized to `[0, 1]` along axis `a`.
    SineProduct {
        amplitude: f64,
        modes: Vec<u32>,
    },
    /// Nodal values from a CSV with header `x[,y],q` in node order.
    Csv {
        path: PathBuf,
    },
}

impl SourceSpec {
    pub fn realize(&self, mesh: &Mesh, base_dir: &Path) -> Result<SourceField> {
        match self {
            SourceSpec::Constant { value } => Ok(SourceField::from_fn(mesh, |_| *value)),
            SourceSpec::Linear { offset, gradient } => {
                if gradient.len() != mesh.dim() {
                    return Err(Error::Config(format!(
                        "linear source gradient has {} entries on a {}d mesh",
                        gradient.len(),
                        mesh.dim()
                    )));
                }
                Ok(SourceField::from_fn(mesh, |x| {
                    offset + x.iter().zip(gradient).map(|(xi, gi)| xi * gi).sum::<f64>()
                }))
            }
            SourceSpec::SineProduct { amplitude, modes } => {
                if modes.len() != mesh.dim() {
                    return Err(Error::Config(format!(
                        "sine_product source has {} modes on a {}d mesh",
                        modes.len(),
                        mesh.dim()
                    )));
                }
                if modes.iter().any(|&m| m == 0) {
                    return Err(Error::Config("sine_product modes must be >= 1".into()));
                }
                let extents = mesh.extents().to_vec();
                let modes = modes.clone();
                let amplitude = *amplitude;
                Ok(SourceField::from_fn(mesh, move |x| {
                    let mut v = amplitude;
                    for (a, &xa) in x.iter().enumerate() {
                        let (lo, hi) = extents[a];
                        let t = (xa - lo) / (hi - lo);
                        v *= (modes[a] as f64 * std::f64::consts::PI * t).sin();
                    }
                    v
                }))
            }
            SourceSpec::Csv { path } => {
                let values = read_nodal_csv(&resolve(base_dir, path), mesh, "q")?;
                SourceField::new(mesh, values)
            }
        }
    }
}

/// Ground truth behind the data. Either a truth source run through the
/// same physics (optionally only partway, via the mismatch scale), or a
/// raw nodal field.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSpec {
    pub source: Option<SourceSpec>,
    /// Interpolation weight `c`: the effective truth source is
    /// `q + c (q_truth - q)`. Defaults to 1.
    pub mismatch_scale: Option<f64>,
    /// Nodal field values from a CSV with header `x[,y],phi`.
    pub field_csv: Option<PathBuf>,
}

impl TruthSpec {
    fn validate(&self) -> Result<()> {
        if self.field_csv.is_some() && (self.source.is_some() || self.mismatch_scale.is_some()) {
            return Err(Error::Config(
                "truth: field_csv cannot be combined with source or mismatch_scale".into(),
            ));
        }
        if self.field_csv.is_none() && self.source.is_none() {
            return Err(Error::Config(
                "truth: give either a source or a field_csv".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSpec {
    pub design: DesignSpec,
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum DesignSpec {
    /// Nested uniform design: interior multiples of `1 / density`.
    Uniform { density: usize },
    /// Locations and data from a CSV with header `x[,y],d`.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub seed: u64,
    #[serde(default)]
    pub beta_grid: BetaGrid,
}

/// Log-spaced grid the trust potential is tabulated on.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BetaGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for BetaGrid {
    fn default() -> Self {
        BetaGrid {
            min: 1e-3,
            max: 1e3,
            points: 101,
        }
    }
}

impl BetaGrid {
    pub fn values(&self) -> Vec<f64> {
        let ratio = self.max / self.min;
        (0..self.points)
            .map(|i| self.min * ratio.powf(i as f64 / (self.points - 1) as f64))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.max > self.min) || self.points < 2 {
            return Err(Error::Config(format!(
                "beta_grid: need 0 < min < max and points >= 2, got [{}, {}] x {}",
                self.min, self.max, self.points
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Mismatch scales, one trust solve per entry.
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    /// Uniform design densities, each dividing the next.
    pub densities: Vec<usize>,
    /// Trust value held fixed throughout the study.
    pub beta: f64,
    /// Overrides the measurement noise for the study only.
    pub noise_sigma: Option<f64>,
}

impl ExperimentConfig {
    /// Parse and validate; returns the config and the directory CSV paths
    /// resolve against.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = Self::parse(&text)?;
        let base = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf();
        Ok((cfg, base))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.mesh.extents.len() != self.mesh.nodes.len() {
            return Err(Error::Config(format!(
                "mesh: {} extents but {} node counts",
                self.mesh.extents.len(),
                self.mesh.nodes.len()
            )));
        }
        if let Some(truth) = &self.truth {
            truth.validate()?;
        }
        if !(self.measurement.noise_sigma > 0.0) {
            return Err(Error::Config("measurement: noise_sigma must be > 0".into()));
        }
        self.run.beta_grid.validate()?;
        if let Some(sweep) = &self.sweep {
            if sweep.scales.is_empty() {
                return Err(Error::Config("sweep: scales must be non-empty".into()));
            }
        }
        if let Some(conv) = &self.convergence {
            if conv.densities.is_empty() {
                return Err(Error::Config("convergence: densities must be non-empty".into()));
            }
            if !(conv.beta > 0.0) {
                return Err(Error::Config("convergence: beta must be > 0".into()));
            }
        }
        Ok(())
    }
}

pub(crate) fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Read per-node values from a CSV with header `x[,y],<name>`, rows in
/// interior-node order, coordinates checked against the mesh.
pub fn read_nodal_csv(path: &Path, mesh: &Mesh, name: &str) -> Result<DVector<f64>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let expected: Vec<String> = match mesh.dim() {
        1 => vec!["x".into(), name.into()],
        _ => vec!["x".into(), "y".into(), name.into()],
    };
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers != expected {
        return Err(Error::Config(format!(
            "{}: expected header {}, got {}",
            path.display(),
            expected.join(","),
            headers.join(",")
        )));
    }
    let span: f64 = mesh
        .extents()
        .iter()
        .map(|(lo, hi)| hi - lo)
        .fold(1.0f64, f64::max);
    let mut values = Vec::with_capacity(mesh.interior_count());
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if row >= mesh.interior_count() {
            return Err(Error::Config(format!(
                "{}: more rows than the {} mesh nodes",
                path.display(),
                mesh.interior_count()
            )));
        }
        let mut fields = Vec::with_capacity(record.len());
        for raw in record.iter() {
            fields.push(raw.trim().parse::<f64>().map_err(|_| {
                Error::Config(format!("{}: row {}: bad number {raw:?}", path.display(), row + 2))
            })?);
        }
        let node = mesh.coord(row);
        for (a, &c) in node.iter().enumerate() {
            if (fields[a] - c).abs() > 1e-9 * span {
                return Err(Error::Config(format!(
                    "{}: row {}: coordinate {} does not match node {} ({c})",
                    path.display(),
                    row + 2,
                    fields[a],
                    row
                )));
            }
        }
        values.push(fields[mesh.dim()]);
    }
    if values.len() != mesh.interior_count() {
        return Err(Error::Config(format!(
            "{}: {} rows for {} mesh nodes",
            path.display(),
            values.len(),
            mesh.interior_count()
        )));
    }
    Ok(DVector::from_vec(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const FULL: &str = r#"
        [mesh]
        extents = [[0.0, 1.0]]
        nodes = [16]

        [source]
        kind = "linear"
        offset = 1.0
        gradient = [2.0]

        [truth]
        source = { kind = "sine_product", amplitude = 3.0, modes = [1] }
        mismatch_scale = 1.0

        [measurement]
        design = { kind = "uniform", density = 8 }
        noise_sigma = 0.05

        [prior]
        kind = "jeffreys"

        [solver]
        damping = 0.4

        [run]
        seed = 7

        [sweep]
        scales = [0.5, 1.0, 2.0, 4.0]

        [convergence]
        densities = [8, 16, 32, 64]
        beta = 1.0
    "#;

    #[test]
    fn full_config_parses() {
        let cfg = ExperimentConfig::parse(FULL).unwrap();
        assert_eq!(cfg.mesh.nodes, vec![16]);
        assert!(matches!(cfg.prior, TrustPrior::Jeffreys));
        assert_eq!(cfg.solver.damping, 0.4);
        assert_eq!(cfg.solver.max_iterations, 200); // default fills in
        assert_eq!(cfg.run.beta_grid.points, 101);
        assert_eq!(cfg.sweep.unwrap().scales.len(), 4);
        let mesh = cfg.mesh.build().unwrap();
        let q = cfg.source.realize(&mesh, Path::new(".")).unwrap();
        // 16 nodes span [0,1] with spacing 1/15; first interior node at 1/15
        assert!((q.values()[0] - (1.0 + 2.0 / 15.0)).abs() < 1e-12);
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::parse(
            r#"
            [mesh]
            extents = [[0.0, 1.0]]
            nodes = [8]
            [source]
            kind = "constant"
            value = 1.0
            [measurement]
            design = { kind = "uniform", density = 4 }
            noise_sigma = 0.1
            [run]
            seed = 0
        "#,
        )
        .unwrap();
        assert!(matches!(cfg.prior, TrustPrior::Flat));
        assert_eq!(cfg.solver.max_iterations, 200);
        let grid = cfg.run.beta_grid.values();
        assert_eq!(grid.len(), 101);
        assert!((grid[0] - 1e-3).abs() < 1e-15);
        assert!((grid[100] - 1e3).abs() < 1e-10);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::parse(
            r#"
            [mesh]
            extents = [[0.0, 1.0]]
            nodes = [8]
            typo_key = 3
            [source]
            kind = "constant"
            value = 1.0
            [measurement]
            design = { kind = "uniform", density = 4 }
            noise_sigma = 0.1
            [run]
            seed = 0
        "#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn contradictory_truth_is_rejected() {
        let text = FULL.replace(
            "source = { kind = \"sine_product\", amplitude = 3.0, modes = [1] }\n        mismatch_scale = 1.0",
            "field_csv = \"phi.csv\"\n        mismatch_scale = 2.0",
        );
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("field_csv"));
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let err = ExperimentConfig::parse(&FULL.replace("nodes = [16]", "nodes = [16, 16]"))
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let cfg = ExperimentConfig::parse(&FULL.replace("gradient = [2.0]", "gradient = [2.0, 1.0]"))
            .unwrap();
        let mesh = cfg.mesh.build().unwrap();
        assert!(cfg.source.realize(&mesh, Path::new(".")).is_err());
    }

    #[test]
    fn nodal_csv_roundtrip_and_validation() {
        let mesh = Mesh::unit_interval(6).unwrap(); // four interior nodes
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "x,q").unwrap();
        for i in 0..4 {
            writeln!(f, "{},{}", mesh.coord(i)[0], (i + 1) as f64).unwrap();
        }
        drop(f);
        let v = read_nodal_csv(&path, &mesh, "q").unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v[2], 3.0);

        // wrong coordinate
        let bad = dir.path().join("bad.csv");
        let mut f = std::fs::File::create(&bad).unwrap();
        writeln!(f, "x,q").unwrap();
        writeln!(f, "0.9,1.0").unwrap();
        drop(f);
        assert!(read_nodal_csv(&bad, &mesh, "q").is_err());

        // wrong header
        let bad2 = dir.path().join("bad2.csv");
        let mut f = std::fs::File::create(&bad2).unwrap();
        writeln!(f, "x,value").unwrap();
        drop(f);
        assert!(read_nodal_csv(&bad2, &mesh, "q").is_err());
    }
}
