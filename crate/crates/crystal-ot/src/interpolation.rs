//! Euclidean geodesic flow, displacement interpolation, and entropy
//! convexity along the interpolated curve.
//!
//! The flow `G(x,y)(t) = (1−t)x + t·y` is the consistent choice of constant
//! speed geodesics; pushing a selected plan forward along it at time t gives
//! the displacement interpolant μ_t. Entropy is evaluated on one shared fine
//! grid for all times so defects compare like with like.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::VectorSet;
use crate::measures::{binned_entropy, DiscreteMeasure, GridSpec};
use crate::selection::{select_plan, SelectionResult};
use crate::solver::TransportPlan;

/// Point of the affine flow at time t.
pub fn flow_eval(x: &[f64], y: &[f64], t: f64) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(x.len(), y.len()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("flow time {t} outside [0,1]")));
    }
    Ok(x.iter().zip(y).map(|(a, b)| (1.0 - t) * a + t * b).collect())
}

/// Euclidean norm of the restriction-consistency residual
/// `G(x,y)(s + r(t−s)) − G(G(x,y)(s), G(x,y)(t))(r)`.
///
/// Zero in exact arithmetic for the affine flow; returned to witness
/// floating error.
pub fn flow_consistency_defect(x: &[f64], y: &[f64], s: f64, t: f64, r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) || s >= t {
        return Err(Error::invalid(format!("restriction times must satisfy 0 <= s < t <= 1, got ({s},{t})")));
    }
    let direct = flow_eval(x, y, s + r * (t - s))?;
    let xs = flow_eval(x, y, s)?;
    let xt = flow_eval(x, y, t)?;
    let via = flow_eval(&xs, &xt, r)?;
    Ok(direct
        .iter()
        .zip(&via)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Pushforward of a plan through `G_t`: atoms `G(x_i, y_j)(t)` carrying the
/// plan masses, coincident interpolated points merged.
pub fn interpolate_plan(plan: &TransportPlan, t: f64) -> Result<DiscreteMeasure> {
    let mut atoms = Vec::with_capacity(plan.entries().len());
    let mut weights = Vec::with_capacity(plan.entries().len());
    for e in plan.entries() {
        let x = plan.source().atom(e.source_index);
        let y = plan.target().atom(e.target_index);
        atoms.push(flow_eval(x, y, t)?);
        weights.push(e.mass);
    }
    // The measure constructor merges exact crossings (1e-12).
    DiscreteMeasure::new(atoms, weights)
}

/// Entropy-convexity audit along the interpolated curve.
#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    pub times: Vec<f64>,
    /// Binned entropy of μ_t at each requested time.
    pub entropies: Vec<f64>,
    pub entropy_start: f64,
    pub entropy_end: f64,
    /// `Ent(μ_t) − [(1−t)·Ent(μ0) + t·Ent(μ1) − t(1−t)(K/2)·W₂²]` per time;
    /// nonpositive when the K-convexity inequality holds.
    pub defects: Vec<f64>,
    pub w2_sq: f64,
    pub k: f64,
    /// Primary/secondary values of the selected plan driving the curve.
    pub primary_value: f64,
    pub secondary_value: f64,
}

impl ConvexityReport {
    pub fn max_defect(&self) -> f64 {
        self.defects.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }
}

/// Selects Π(μ,ν), interpolates at each time, and evaluates the K-convexity
/// defect of the binned entropy on the shared fine grid.
///
/// The grid box must contain the convex hull of both supports so every
/// interpolant stays inside.
pub fn check_entropy_convexity(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    generators: &VectorSet,
    times: &[f64],
    fine_grid: &GridSpec,
    k: f64,
) -> Result<ConvexityReport> {
    for atom in mu.atoms().iter().chain(nu.atoms()) {
        if !fine_grid.contains(atom) {
            return Err(Error::invalid(format!(
                "grid box does not contain atom {atom:?}; it must cover the hull of both supports"
            )));
        }
    }
    for &t in times {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("interpolation time {t} outside [0,1]")));
        }
    }
    let selection = select_plan(mu, nu, generators)?;
    convexity_along(&selection, times, fine_grid, k)
}

/// Convexity audit for an already-selected plan.
pub fn convexity_along(
    selection: &SelectionResult,
    times: &[f64],
    fine_grid: &GridSpec,
    k: f64,
) -> Result<ConvexityReport> {
    let plan = &selection.plan;
    let entropy_start = binned_entropy(plan.source(), fine_grid)?;
    let entropy_end = binned_entropy(plan.target(), fine_grid)?;
    let w2_sq = selection.primary_value;

    let mut entropies = Vec::with_capacity(times.len());
    let mut defects = Vec::with_capacity(times.len());
    for &t in times {
        let mu_t = interpolate_plan(plan, t)?;
        let ent = binned_entropy(&mu_t, fine_grid)?;
        let chord = (1.0 - t) * entropy_start + t * entropy_end - t * (1.0 - t) * (k / 2.0) * w2_sq;
        entropies.push(ent);
        defects.push(ent - chord);
    }

    Ok(ConvexityReport {
        times: times.to_vec(),
        entropies,
        entropy_start,
        entropy_end,
        defects,
        w2_sq,
        k,
        primary_value: selection.primary_value,
        secondary_value: selection.secondary_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{crystalline_norm, CostSpec};
    use crate::measures::discretize_density;
    use crate::solver::wasserstein_sq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flow_endpoints_and_midpoint() {
        let x = vec![0.0, 0.0];
        let y = vec![2.0, 2.0];
        assert_eq!(flow_eval(&x, &y, 0.5).unwrap(), vec![1.0, 1.0]);
        assert_eq!(flow_eval(&x, &y, 0.0).unwrap(), x);
        assert_eq!(flow_eval(&x, &y, 1.0).unwrap(), y);
        assert!(flow_eval(&x, &y, 1.5).is_err());
    }

    #[test]
    fn consistency_defect_is_floating_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100_000 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-10.0..10.0)).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.random_range(-10.0..10.0)).collect();
            let s: f64 = rng.random_range(0.0..0.5);
            let t: f64 = rng.random_range(s + 1e-6..1.0);
            let r: f64 = rng.random_range(0.0..1.0);
            let defect = flow_consistency_defect(&x, &y, s, t, r).unwrap();
            assert!(defect <= 1e-12, "defect {defect} at ({s},{t},{r})");
        }
    }

    #[test]
    fn consistency_defect_exact_cases() {
        let x = vec![1.0, -2.0];
        let y = vec![3.5, 4.0];
        assert_eq!(flow_consistency_defect(&x, &y, 0.0, 1.0, 0.3).unwrap(), 0.0);
        assert_eq!(flow_consistency_defect(&x, &x, 0.2, 0.8, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn interpolation_endpoints_recover_marginals() {
        let mu = DiscreteMeasure::new(vec![vec![0.0, 0.0], vec![0.0, 1.0]], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(vec![vec![2.0, 0.0], vec![2.0, 1.0]], vec![0.5, 0.5]).unwrap();
        let plan = TransportPlan::new(mu.clone(), nu.clone(), vec![(0, 0, 0.5), (1, 1, 0.5)]).unwrap();
        assert_eq!(interpolate_plan(&plan, 0.0).unwrap(), mu);
        assert_eq!(interpolate_plan(&plan, 1.0).unwrap(), nu);
        let mid = interpolate_plan(&plan, 0.5).unwrap();
        assert_eq!(mid.atoms(), &[vec![1.0, 0.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn crossing_entries_merge_at_meeting_time() {
        let mu = DiscreteMeasure::new(vec![vec![0.0, 0.0], vec![2.0, 0.0]], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(vec![vec![2.0, 0.0], vec![0.0, 0.0]], vec![0.5, 0.5]).unwrap();
        let crossing = TransportPlan::new(mu, nu, vec![(0, 0, 0.5), (1, 1, 0.5)]).unwrap();
        let mid = interpolate_plan(&crossing, 0.5).unwrap();
        assert_eq!(mid.len(), 1);
        assert_eq!(mid.atom(0), &[1.0, 0.0]);
        assert!((mid.weight(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn interpolation_conserves_mass() {
        let mu = DiscreteMeasure::new(vec![vec![0.0, 0.0], vec![1.0, 3.0]], vec![0.25, 0.75]).unwrap();
        let nu = DiscreteMeasure::new(vec![vec![2.0, 1.0], vec![4.0, 0.0]], vec![0.6, 0.4]).unwrap();
        let selection = select_plan(&mu, &nu, &VectorSet::linf(2)).unwrap();
        for &t in &[0.1, 0.35, 0.7, 0.95] {
            let mu_t = interpolate_plan(&selection.plan, t).unwrap();
            let total: f64 = mu_t.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn segments_are_constant_speed_geodesics() {
        let generators = VectorSet::l1(2);
        let mu = DiscreteMeasure::new(vec![vec![0.0, 0.0], vec![1.0, 3.0]], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(vec![vec![2.0, 1.0], vec![4.0, 0.0]], vec![0.5, 0.5]).unwrap();
        let selection = select_plan(&mu, &nu, &generators).unwrap();
        for e in selection.plan.entries() {
            let x = selection.plan.source().atom(e.source_index);
            let y = selection.plan.target().atom(e.target_index);
            let full: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            let d = crystalline_norm(&full, &generators).unwrap();
            for &(s, t) in &[(0.0, 0.5), (0.25, 0.75), (0.5, 1.0)] {
                let ps = flow_eval(x, y, s).unwrap();
                let pt = flow_eval(x, y, t).unwrap();
                let seg: Vec<f64> = ps.iter().zip(&pt).map(|(a, b)| a - b).collect();
                let dseg = crystalline_norm(&seg, &generators).unwrap();
                assert!((dseg - (t - s) * d).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn wasserstein_along_curve_is_linear() {
        let generators = VectorSet::linf(2);
        let cost = CostSpec::CrystallineSq(generators.clone());
        let mu = DiscreteMeasure::new(vec![vec![0.0, 0.0], vec![0.5, 2.0]], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(vec![vec![3.0, 1.0], vec![4.0, 2.5]], vec![0.5, 0.5]).unwrap();
        let selection = select_plan(&mu, &nu, &generators).unwrap();
        let w = selection.primary_value.sqrt();
        for &(s, t) in &[(0.0, 0.5), (0.5, 1.0), (0.25, 0.75)] {
            let mu_s = interpolate_plan(&selection.plan, s).unwrap();
            let mu_t = interpolate_plan(&selection.plan, t).unwrap();
            let w_st = wasserstein_sq(&mu_s, &mu_t, &cost).unwrap().sqrt();
            assert!(
                (w_st - (t - s) * w).abs() <= 1e-6 * (1.0 + w),
                "W2(mu_{s}, mu_{t}) = {w_st}, expected {}",
                (t - s) * w
            );
        }
    }

    #[test]
    fn translation_has_flat_entropy() {
        // Uniform square translated by (3, 0): the selected plan is the pure
        // translation, so every interpolant is a translate and all entropies
        // agree up to binning alignment.
        let grid8 = GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![8, 8]).unwrap();
        let mu = discretize_density(|_| 1.0, &grid8).unwrap();
        let nu = mu.translate(&[3.0, 0.0]).unwrap();
        // Fine-grid cells are quarter-cells of the discretization, and the
        // shift 3.0 is an integer number of cells, so binning aligns exactly.
        let fine = GridSpec::new(vec![0.0, -0.5], vec![4.0, 1.5], vec![32, 16]).unwrap();
        let report = check_entropy_convexity(
            &mu,
            &nu,
            &VectorSet::linf(2),
            &[0.25, 0.5, 0.75],
            &fine,
            0.0,
        )
        .unwrap();
        assert!((report.entropy_start - report.entropy_end).abs() < 1e-9);
        for (t, defect) in report.times.iter().zip(&report.defects) {
            assert!(defect.abs() < 1e-9, "defect {defect} at t={t}");
        }
    }

    #[test]
    fn defect_vanishes_at_end_times() {
        let grid = GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![4, 4]).unwrap();
        let mu = discretize_density(|_| 1.0, &grid).unwrap();
        let nu = mu.translate(&[2.0, 0.0]).unwrap();
        let fine = GridSpec::new(vec![0.0, 0.0], vec![3.0, 1.0], vec![24, 8]).unwrap();
        let report =
            check_entropy_convexity(&mu, &nu, &VectorSet::linf(2), &[0.0, 1.0], &fine, 0.0)
                .unwrap();
        assert!(report.defects[0].abs() < 1e-12);
        assert!(report.defects[1].abs() < 1e-12);
    }

    #[test]
    fn escaping_grid_is_an_error() {
        let mu = DiscreteMeasure::dirac(vec![0.0, 0.0]);
        let nu = DiscreteMeasure::dirac(vec![5.0, 0.0]);
        let fine = GridSpec::new(vec![0.0, -1.0], vec![1.0, 1.0], vec![4, 4]).unwrap();
        assert!(check_entropy_convexity(
            &mu,
            &nu,
            &VectorSet::linf(2),
            &[0.5],
            &fine,
            0.0
        )
        .is_err());
    }
}
