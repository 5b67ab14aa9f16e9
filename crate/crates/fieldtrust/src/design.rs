//! Geometry of measurement designs: fill distance, separation radius, mesh ratio.
//!
//! The fill distance `h_X = sup_{x in domain} min_{x_i in X} |x - x_i|`
//! controls worst-case posterior contraction; the separation radius
//! `r_X = 1/2 min_{i != j} |x_i - x_j|` controls conditioning. Their ratio
//! measures how far a design is from quasi-uniformity.

use crate::error::{Error, Result};
use serde::Serialize;

/// Fill distance, separation radius, and mesh ratio of a point design.
///
/// `separation_radius` and `mesh_ratio` are absent for designs with fewer
/// than two points: a singleton has no pairwise distance, not a zero one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignMetrics {
    pub fill_distance: f64,
    pub separation_radius: Option<f64>,
    pub mesh_ratio: Option<f64>,
}

/// Probe resolution: the probe lattice is at least this many times finer
/// than the smallest pairwise gap in the design.
const PROBE_REFINEMENT: usize = 16;
/// Per-axis probe cap keeps the 2D sweep bounded.
const PROBE_CAP: usize = 1 << 11;

/// Measure a design against a box domain.
///
/// In 1D the fill distance is exact (largest half-gap or boundary gap of
/// the sorted points). In 2D the supremum is taken over a probe lattice
/// (boundary included) at least 16x finer than the design's smallest gap,
/// so midpoints of uniform designs land exactly on probe nodes.
pub fn design_metrics(extents: &[(f64, f64)], locations: &[Vec<f64>]) -> Result<DesignMetrics> {
    let dim = extents.len();
    if dim == 0 || dim > 2 {
        return Err(Error::BadDimension(dim));
    }
    if locations.is_empty() {
        return Err(Error::Empty("design"));
    }
    for loc in locations {
        if loc.len() != dim {
            return Err(Error::LengthMismatch {
                what: "design location",
                expected: dim,
                got: loc.len(),
            });
        }
    }

    let min_gap = smallest_gap(locations);
    let fill = if dim == 1 {
        fill_exact_1d(extents[0], locations)
    } else {
        fill_lattice_2d(extents, locations, min_gap)
    };

    let separation_radius = min_gap.map(|g| 0.5 * g);
    let mesh_ratio = separation_radius.map(|r| fill / r);
    Ok(DesignMetrics {
        fill_distance: fill,
        separation_radius,
        mesh_ratio,
    })
}

fn fill_exact_1d((lo, hi): (f64, f64), locations: &[Vec<f64>]) -> f64 {
    let mut xs: Vec<f64> = locations.iter().map(|p| p[0]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    let mut fill = (xs[0] - lo).max(hi - xs[xs.len() - 1]);
    for pair in xs.windows(2) {
        fill = fill.max(0.5 * (pair[1] - pair[0]));
    }
    fill
}

fn fill_lattice_2d(
    extents: &[(f64, f64)],
    locations: &[Vec<f64>],
    min_gap: Option<f64>,
) -> f64 {
    let max_extent = extents
        .iter()
        .map(|&(lo, hi)| hi - lo)
        .fold(0.0f64, f64::max);
    let gap = min_gap.unwrap_or(max_extent).max(max_extent * 1e-9);
    let counts: Vec<usize> = extents
        .iter()
        .map(|&(lo, hi)| {
            let want = ((hi - lo) * PROBE_REFINEMENT as f64 / gap).ceil() as usize;
            want.clamp(PROBE_REFINEMENT, PROBE_CAP) + 1
        })
        .collect();

    let mut fill: f64 = 0.0;
    let mut probe = vec![0.0f64; 2];
    let total: usize = counts.iter().product();
    for flat in 0..total {
        let mut rest = flat;
        for a in 0..2 {
            let i = rest % counts[a];
            rest /= counts[a];
            let (lo, hi) = extents[a];
            probe[a] = lo + (hi - lo) * i as f64 / (counts[a] - 1) as f64;
        }
        let nearest = locations
            .iter()
            .map(|p| dist(p, &probe))
            .fold(f64::INFINITY, f64::min);
        fill = fill.max(nearest);
    }
    fill
}

/// Uniform design at the interior multiples of `1/k` of each axis:
/// `k - 1` points per axis, tensorized in 2D.
///
/// Doubling `k` keeps every existing point, so the family `k, 2k, 4k, ...`
/// is nested, with fill distance `1/k` of the extent and mesh ratio 2.
pub fn uniform_nested_design(extents: &[(f64, f64)], k: usize) -> Result<Vec<Vec<f64>>> {
    let dim = extents.len();
    if dim == 0 || dim > 2 {
        return Err(Error::BadDimension(dim));
    }
    if k < 2 {
        return Err(Error::Empty("design density"));
    }
    let axis_points = |(lo, hi): (f64, f64)| -> Vec<f64> {
        (1..k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect()
    };
    let xs = axis_points(extents[0]);
    Ok(match dim {
        1 => xs.into_iter().map(|x| vec![x]).collect(),
        _ => {
            let ys = axis_points(extents[1]);
            let mut pts = Vec::with_capacity(xs.len() * ys.len());
            for &y in &ys {
                for &x in &xs {
                    pts.push(vec![x, y]);
                }
            }
            pts
        }
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn smallest_gap(locations: &[Vec<f64>]) -> Option<f64> {
    if locations.len() < 2 {
        return None;
    }
    let mut g = f64::INFINITY;
    for i in 0..locations.len() {
        for j in (i + 1)..locations.len() {
            g = g.min(dist(&locations[i], &locations[j]));
        }
    }
    Some(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> Vec<(f64, f64)> {
        vec![(0.0, 1.0)]
    }

    #[test]
    fn uniform_grid_including_endpoints() {
        // n points including endpoints: h_X = r_X = 1/(2(n-1)), ratio 1
        for n in [5usize, 9, 17] {
            let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
            let m = design_metrics(&unit(), &pts).unwrap();
            let expect = 0.5 / (n - 1) as f64;
            assert_eq!(m.fill_distance, expect, "n = {n}");
            assert_eq!(m.separation_radius, Some(expect));
            assert_eq!(m.mesh_ratio, Some(1.0));
        }
    }

    #[test]
    fn singleton_has_no_separation() {
        let m = design_metrics(&unit(), &[vec![0.5]]).unwrap();
        assert_eq!(m.fill_distance, 0.5);
        assert_eq!(m.separation_radius, None);
        assert_eq!(m.mesh_ratio, None);
    }

    #[test]
    fn doubling_density_halves_fill() {
        let fills: Vec<f64> = [8usize, 16, 32]
            .iter()
            .map(|&k| {
                let pts = uniform_nested_design(&unit(), k).unwrap();
                design_metrics(&unit(), &pts).unwrap().fill_distance
            })
            .collect();
        assert!((fills[0] - 2.0 * fills[1]).abs() < 1e-12 * fills[0]);
        assert!((fills[1] - 2.0 * fills[2]).abs() < 1e-12 * fills[1]);
        // the interior-multiples family has its largest hole at the boundary
        assert!((fills[0] - 1.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn nested_family_is_nested() {
        for k in [4usize, 8, 16] {
            let coarse = uniform_nested_design(&unit(), k).unwrap();
            let fine = uniform_nested_design(&unit(), 2 * k).unwrap();
            for p in &coarse {
                assert!(
                    fine.iter().any(|q| dist(p, q) < 1e-14),
                    "point {p:?} missing at density {}",
                    2 * k
                );
            }
        }
    }

    #[test]
    fn square_design_metrics() {
        let ext = vec![(0.0, 1.0), (0.0, 1.0)];
        let pts = uniform_nested_design(&ext, 4).unwrap();
        assert_eq!(pts.len(), 9);
        let m = design_metrics(&ext, &pts).unwrap();
        // biggest hole at a domain corner: distance to (1/4, 1/4)
        let corner = (2.0f64 * 0.25 * 0.25).sqrt();
        assert!((m.fill_distance - corner).abs() < 2e-3, "{}", m.fill_distance);
        assert_eq!(m.separation_radius, Some(0.125));
    }

    #[test]
    fn brute_force_oracle_on_scatter() {
        // fixed irregular scatter; oracle recomputes the sup on its own lattice
        let pts: Vec<Vec<f64>> = vec![
            vec![0.13], vec![0.17], vec![0.48], vec![0.52], vec![0.81], vec![0.97],
        ];
        let m = design_metrics(&unit(), &pts).unwrap();
        let mut oracle: f64 = 0.0;
        let probes = 40_000usize;
        for i in 0..=probes {
            let x = i as f64 / probes as f64;
            let nearest = pts
                .iter()
                .map(|p| (p[0] - x).abs())
                .fold(f64::INFINITY, f64::min);
            oracle = oracle.max(nearest);
        }
        assert!((m.fill_distance - oracle).abs() < 1e-3);
        let g = 0.04; // closest pair 0.48/0.52
        assert!((m.separation_radius.unwrap() - g / 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn mesh_ratio_at_least_one(raw in proptest::collection::vec(0.01f64..0.99, 2..12)) {
            // de-duplicate near-coincident points to keep the gap positive
            let mut xs = raw.clone();
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            xs.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            prop_assume!(xs.len() >= 2);
            let pts: Vec<Vec<f64>> = xs.into_iter().map(|x| vec![x]).collect();
            let m = design_metrics(&unit(), &pts).unwrap();
            // the midpoint of the closest pair is at least r_X from every point
            prop_assert!(m.mesh_ratio.unwrap() >= 1.0 - 1e-9);
        }
    }
}
