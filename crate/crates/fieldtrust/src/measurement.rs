//! Point observations of the field: interpolation rows, noise, data.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::path::Path;

/// Observation model `d = R phi + noise` with iid noise of variance `sigma^2`.
///
/// Each row of `R` interpolates the interior nodal values at one location:
/// linear weights in 1D, bilinear in 2D. Weights that would fall on boundary
/// nodes are dropped because the field vanishes there, so rows near the
/// boundary sum to less than one; all rows are nonnegative and sum to at
/// most one. Duplicate locations are allowed and act as independent
/// replicates.
#[derive(Debug, Clone)]
pub struct MeasurementSetup {
    locations: Vec<Vec<f64>>,
    matrix: DMatrix<f64>,
    noise_sigma: f64,
    data: Option<DVector<f64>>,
}

/// Build the interpolation rows for `locations`, which must lie strictly
/// inside the domain.
pub fn build_measurement(
    mesh: &Mesh,
    locations: &[Vec<f64>],
    noise_sigma: f64,
) -> Result<MeasurementSetup> {
    if !(noise_sigma > 0.0) || !noise_sigma.is_finite() {
        return Err(Error::NonPositiveNoise(noise_sigma));
    }
    let n = mesh.interior_count();
    let mut matrix = DMatrix::<f64>::zeros(locations.len(), n);
    for (row, loc) in locations.iter().enumerate() {
        if loc.len() != mesh.dim() {
            return Err(Error::LengthMismatch {
                what: "observation location",
                expected: mesh.dim(),
                got: loc.len(),
            });
        }
        if !mesh.contains_strictly(loc) {
            return Err(Error::LocationOutsideDomain { index: row });
        }
        for (col, w) in interpolation_weights(mesh, loc) {
            matrix[(row, col)] += w;
        }
    }
    Ok(MeasurementSetup {
        locations: locations.to_vec(),
        matrix,
        noise_sigma,
        data: None,
    })
}

/// Per-axis interpolation cell: full-grid base index and fractional offset.
fn axis_cell(lo: f64, h: f64, nodes: usize, x: f64) -> (usize, f64) {
    let t = (x - lo) / h;
    let mut j = t.floor() as usize;
    if j > nodes - 2 {
        j = nodes - 2;
    }
    (j, t - j as f64)
}

/// Interior-index interpolation weights for one strictly interior location.
fn interpolation_weights(mesh: &Mesh, loc: &[f64]) -> Vec<(usize, f64)> {
    let shape = mesh.interior_shape();
    let ext = mesh.extents();
    let h = mesh.spacing();
    let full_nodes: Vec<usize> = shape.iter().map(|&m| m + 2).collect();
    let mut out = Vec::with_capacity(1 << mesh.dim());
    match mesh.dim() {
        1 => {
            let (j, f) = axis_cell(ext[0].0, h[0], full_nodes[0], loc[0]);
            for (dj, w) in [(0usize, 1.0 - f), (1usize, f)] {
                let full = j + dj;
                if w != 0.0 && full >= 1 && full <= shape[0] {
                    out.push((full - 1, w));
                }
            }
        }
        _ => {
            let (jx, fx) = axis_cell(ext[0].0, h[0], full_nodes[0], loc[0]);
            let (jy, fy) = axis_cell(ext[1].0, h[1], full_nodes[1], loc[1]);
            for (dy, wy) in [(0usize, 1.0 - fy), (1usize, fy)] {
                for (dx, wx) in [(0usize, 1.0 - fx), (1usize, fx)] {
                    let (gx, gy) = (jx + dx, jy + dy);
                    let w = wx * wy;
                    if w != 0.0 && gx >= 1 && gx <= shape[0] && gy >= 1 && gy <= shape[1] {
                        out.push(((gy - 1) * shape[0] + (gx - 1), w));
                    }
                }
            }
        }
    }
    out
}

impl MeasurementSetup {
    pub fn locations(&self) -> &[Vec<f64>] {
        &self.locations
    }

    /// Interpolation matrix `R`, one row per observation.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    /// Noise variance `sigma^2` shared by all observations.
    pub fn noise_variance(&self) -> f64 {
        self.noise_sigma * self.noise_sigma
    }

    pub fn data(&self) -> Option<&DVector<f64>> {
        self.data.as_ref()
    }

    /// Attach an observed data vector.
    pub fn with_data(mut self, data: DVector<f64>) -> Result<Self> {
        if data.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "data vector",
                expected: self.len(),
                got: data.len(),
            });
        }
        self.data = Some(data);
        Ok(self)
    }

    /// Synthesize observations of a known field: `d = R phi + noise`, with
    /// noise drawn from a counter-based generator so a seed fully determines
    /// the data.
    pub fn observe(mut self, phi: &DVector<f64>, seed: u64) -> Result<Self> {
        if phi.len() != self.matrix.ncols() {
            return Err(Error::LengthMismatch {
                what: "field vector",
                expected: self.matrix.ncols(),
                got: phi.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = &self.matrix * phi;
        for v in d.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += self.noise_sigma * z;
        }
        self.data = Some(d);
        Ok(self)
    }

    /// `R' d / sigma^2`, the information-vector contribution of the data.
    pub fn weighted_pullback(&self, residual: &DVector<f64>) -> DVector<f64> {
        self.matrix.transpose() * residual / self.noise_variance()
    }

    /// `R' R / sigma^2`, the information-matrix contribution of the design.
    pub fn information_matrix(&self) -> DMatrix<f64> {
        self.matrix.transpose() * &self.matrix / self.noise_variance()
    }
}

/// Read locations and data from CSV with header `x,d` (1D) or `x,y,d` (2D).
pub fn read_measurement_csv(path: &Path, dim: usize) -> Result<(Vec<Vec<f64>>, DVector<f64>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let expect: Vec<&str> = match dim {
        1 => vec!["x", "d"],
        2 => vec!["x", "y", "d"],
        other => return Err(Error::BadDimension(other)),
    };
    let headers = reader.headers()?.clone();
    let got: Vec<&str> = headers.iter().map(|h| h.trim()).collect();
    if got != expect {
        return Err(Error::Config(format!(
            "measurement CSV header must be `{}`, got `{}`",
            expect.join(","),
            got.join(",")
        )));
    }
    let mut locations = Vec::new();
    let mut data = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != dim + 1 {
            return Err(Error::Config(format!(
                "measurement CSV row {}: expected {} fields, got {}",
                line + 2,
                dim + 1,
                record.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("measurement CSV row {}: {e}", line + 2)))
        };
        let mut loc = Vec::with_capacity(dim);
        for a in 0..dim {
            loc.push(parse(&record[a])?);
        }
        locations.push(loc);
        data.push(parse(&record[dim])?);
    }
    if locations.is_empty() {
        return Err(Error::Empty("measurement CSV"));
    }
    Ok((locations, DVector::from_vec(data)))
}

/// Write locations and data as CSV with header `x,d` or `x,y,d`.
pub fn write_measurement_csv(
    path: &Path,
    locations: &[Vec<f64>],
    data: &DVector<f64>,
) -> Result<()> {
    let dim = locations.first().map(|l| l.len()).unwrap_or(1);
    let mut writer = csv::Writer::from_path(path)?;
    match dim {
        1 => writer.write_record(["x", "d"])?,
        _ => writer.write_record(["x", "y", "d"])?,
    }
    for (loc, d) in locations.iter().zip(data.iter()) {
        let mut row: Vec<String> = loc.iter().map(|v| format!("{v}")).collect();
        row.push(format!("{d}"));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_interpolate_and_sum_to_at_most_one() {
        let mesh = Mesh::unit_interval(9).unwrap(); // h = 1/8
        let locs = vec![vec![0.5], vec![0.31], vec![0.05]];
        let setup = build_measurement(&mesh, &locs, 0.1).unwrap();
        // 0.5 is node 3 (interior): unit row
        let r = setup.matrix();
        assert_eq!(r[(0, 3)], 1.0);
        assert_eq!(r.row(0).sum(), 1.0);
        // interior location: weights sum to 1
        assert!((r.row(1).sum() - 1.0).abs() < 1e-12);
        // 0.05 sits in the first cell, half its weight belongs to the boundary
        assert!(r.row(2).sum() < 1.0);
        for v in r.iter() {
            assert!(*v >= 0.0);
        }
    }

    #[test]
    fn interpolation_is_second_order_accurate() {
        let f = |x: f64| (std::f64::consts::PI * x).sin();
        let err = |nodes: usize| {
            let mesh = Mesh::unit_interval(nodes).unwrap();
            let phi = mesh.sample_fn(|x| f(x[0]));
            let locs: Vec<Vec<f64>> = (1..20).map(|i| vec![i as f64 / 20.0]).collect();
            let setup = build_measurement(&mesh, &locs, 1.0).unwrap();
            let vals = setup.matrix() * &phi;
            locs.iter()
                .zip(vals.iter())
                .map(|(l, &v)| (v - f(l[0])).abs())
                .fold(0.0f64, f64::max)
        };
        // 32 and 63 nodes halve the spacing while keeping every probe point
        // strictly between nodes, so the interpolation error is visible.
        let (e1, e2) = (err(32), err(63));
        assert!(e2 < e1 / 3.0, "e1 = {e1:.3e}, e2 = {e2:.3e}");
    }

    #[test]
    fn bilinear_rows_in_two_dimensions() {
        let mesh = Mesh::unit_square(5).unwrap(); // h = 1/4, 3x3 interior
        let setup = build_measurement(&mesh, &[vec![0.375, 0.625]], 1.0).unwrap();
        let r = setup.matrix();
        // cell corners (0.25, 0.5), (0.5, 0.5), (0.25, 0.75), (0.5, 0.75), all interior
        assert!((r.row(0).sum() - 1.0).abs() < 1e-12);
        let nonzero = r.row(0).iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 4);
        for v in r.row(0).iter() {
            assert!(*v == 0.0 || (*v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_and_outside_locations_rejected() {
        let mesh = Mesh::unit_interval(9).unwrap();
        for bad in [0.0, 1.0, -0.25, 1.5] {
            let err = build_measurement(&mesh, &[vec![bad]], 0.1).unwrap_err();
            assert!(matches!(err, Error::LocationOutsideDomain { index: 0 }));
        }
    }

    #[test]
    fn duplicates_allowed_noise_rejected() {
        let mesh = Mesh::unit_interval(9).unwrap();
        let locs = vec![vec![0.5], vec![0.5], vec![0.5]];
        assert!(build_measurement(&mesh, &locs, 0.1).is_ok());
        assert!(build_measurement(&mesh, &locs, 0.0).is_err());
        assert!(build_measurement(&mesh, &locs, -1.0).is_err());
    }

    #[test]
    fn observation_is_seed_deterministic() {
        let mesh = Mesh::unit_interval(17).unwrap();
        let phi = mesh.sample_fn(|x| x[0] * (1.0 - x[0]));
        let locs: Vec<Vec<f64>> = (1..8).map(|i| vec![i as f64 / 8.0]).collect();
        let a = build_measurement(&mesh, &locs, 0.05)
            .unwrap()
            .observe(&phi, 42)
            .unwrap();
        let b = build_measurement(&mesh, &locs, 0.05)
            .unwrap()
            .observe(&phi, 42)
            .unwrap();
        let c = build_measurement(&mesh, &locs, 0.05)
            .unwrap()
            .observe(&phi, 43)
            .unwrap();
        assert_eq!(a.data().unwrap(), b.data().unwrap());
        assert_ne!(a.data().unwrap(), c.data().unwrap());
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.csv");
        let locs = vec![vec![0.25, 0.5], vec![0.75, 0.125]];
        let data = DVector::from_vec(vec![1.5, -0.25]);
        write_measurement_csv(&path, &locs, &data).unwrap();
        let (read_locs, read_data) = read_measurement_csv(&path, 2).unwrap();
        assert_eq!(read_locs, locs);
        assert_eq!(read_data, data);
        // wrong dimensionality must be a config error
        assert!(read_measurement_csv(&path, 1).is_err());
    }
}
