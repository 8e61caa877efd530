//! Discrete probability measures, grid discretization of densities, and
//! binned entropy.
//!
//! The entropy of a discrete measure is defined only through a grid: atoms
//! are binned into cells and the entropy of the piecewise-constant density
//! `p_i / vol` is reported. The raw discrete entropy is +∞ in the reference
//! sense and is never reported.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CostSpec;

/// Euclidean tolerance below which two atoms are considered the same point.
pub const ATOM_MERGE_TOL: f64 = 1e-12;

/// Weights must sum to one within this tolerance.
pub const WEIGHT_SUM_TOL: f64 = 1e-10;

/// Weighted atoms in R^N summing to probability one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct MeasureWire {
    dim: usize,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure, merging duplicate atoms (within [`ATOM_MERGE_TOL`])
    /// and checking positivity and normalization.
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("measure must have at least one atom"));
        }
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch(atoms.len(), weights.len()));
        }
        let dim = atoms[0].len();
        if dim == 0 {
            return Err(Error::invalid("atoms must have dimension >= 1"));
        }
        let mut merged_atoms: Vec<Vec<f64>> = Vec::with_capacity(atoms.len());
        let mut merged_weights: Vec<f64> = Vec::with_capacity(atoms.len());
        for (atom, w) in atoms.into_iter().zip(weights) {
            if atom.len() != dim {
                return Err(Error::DimensionMismatch(atom.len(), dim));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::invalid(format!("weight {w} is not positive")));
            }
            if atom.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid("atom coordinates must be finite"));
            }
            match merged_atoms.iter().position(|a| sq_dist(a, &atom) <= ATOM_MERGE_TOL * ATOM_MERGE_TOL) {
                Some(k) => merged_weights[k] += w,
                None => {
                    merged_atoms.push(atom);
                    merged_weights.push(w);
                }
            }
        }
        let total: f64 = merged_weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!(
                "weights sum to {total}, expected 1 within {WEIGHT_SUM_TOL}"
            )));
        }
        Ok(DiscreteMeasure { dim, atoms: merged_atoms, weights: merged_weights })
    }

    /// Single unit atom.
    pub fn dirac(point: Vec<f64>) -> Self {
        let dim = point.len();
        DiscreteMeasure { dim, atoms: vec![point], weights: vec![1.0] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Translates every atom by `shift`.
    pub fn translate(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim {
            return Err(Error::DimensionMismatch(shift.len(), self.dim));
        }
        Ok(DiscreteMeasure {
            dim: self.dim,
            atoms: self
                .atoms
                .iter()
                .map(|a| a.iter().zip(shift).map(|(c, s)| c + s).collect())
                .collect(),
            weights: self.weights.clone(),
        })
    }
}

impl<'de> Deserialize<'de> for DiscreteMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = MeasureWire::deserialize(d)?;
        for a in &wire.atoms {
            if a.len() != wire.dim {
                return Err(serde::de::Error::custom(format!(
                    "atom of dimension {} in a dim-{} measure",
                    a.len(),
                    wire.dim
                )));
            }
        }
        DiscreteMeasure::new(wire.atoms, wire.weights).map_err(serde::de::Error::custom)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Axis-aligned box partitioned into rectangular cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells: Vec<usize>,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != cells.len() {
            return Err(Error::invalid("lo, hi, cells must have equal dimension"));
        }
        if lo.is_empty() {
            return Err(Error::invalid("grid must have dimension >= 1"));
        }
        for k in 0..lo.len() {
            if !(hi[k] > lo[k]) {
                return Err(Error::invalid(format!(
                    "grid axis {k}: upper bound {} must exceed lower bound {}",
                    hi[k], lo[k]
                )));
            }
            if cells[k] == 0 {
                return Err(Error::invalid(format!("grid axis {k}: zero cells")));
            }
        }
        Ok(GridSpec { lo, hi, cells })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim())
            .map(|k| (self.hi[k] - self.lo[k]) / self.cells[k] as f64)
            .product()
    }

    /// Doubles the resolution along every axis.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            cells: self.cells.iter().map(|&c| c * 2).collect(),
        }
    }

    /// Center of the cell with the given multi-index.
    pub fn cell_center(&self, index: &[usize]) -> Vec<f64> {
        (0..self.dim())
            .map(|k| {
                let h = (self.hi[k] - self.lo[k]) / self.cells[k] as f64;
                self.lo[k] + (index[k] as f64 + 0.5) * h
            })
            .collect()
    }

    /// Cell index of a point, or `None` if it lies outside the box.
    ///
    /// A coordinate exactly on an interior cell boundary is assigned to the
    /// lower-index cell; the box's own boundary is inclusive.
    pub fn locate(&self, point: &[f64]) -> Option<Vec<usize>> {
        let mut idx = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            let x = point[k];
            if x < self.lo[k] || x > self.hi[k] {
                return None;
            }
            let h = (self.hi[k] - self.lo[k]) / self.cells[k] as f64;
            let u = (x - self.lo[k]) / h;
            // ceil(u) - 1 sends interior boundary points to the lower cell.
            let i = (u.ceil() as isize - 1).clamp(0, self.cells[k] as isize - 1) as usize;
            idx.push(i);
        }
        Some(idx)
    }

    /// Flattens a multi-index row-major.
    pub fn flat_index(&self, index: &[usize]) -> usize {
        let mut flat = 0usize;
        for k in 0..self.dim() {
            flat = flat * self.cells[k] + index[k];
        }
        flat
    }

    fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.cells[k];
            flat /= self.cells[k];
        }
        idx
    }

    /// True when the box contains the point (boundary inclusive).
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && (0..self.dim()).all(|k| point[k] >= self.lo[k] && point[k] <= self.hi[k])
    }
}

/// Samples a nonnegative density at cell centers and normalizes the result
/// to a probability measure with one atom per cell of positive density.
pub fn discretize_density(
    density: impl Fn(&[f64]) -> f64,
    grid: &GridSpec,
) -> Result<DiscreteMeasure> {
    let vol = grid.cell_volume();
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    let total_cells = grid.cell_count();
    for flat in 0..total_cells {
        let idx = grid.unflatten(flat);
        let center = grid.cell_center(&idx);
        let f = density(&center);
        if f < 0.0 {
            return Err(Error::invalid(format!(
                "density negative ({f}) at cell center {center:?}"
            )));
        }
        if f > 0.0 {
            atoms.push(center);
            weights.push(f * vol);
        }
    }
    if atoms.is_empty() {
        return Err(Error::invalid("density is zero at every cell center"));
    }
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    DiscreteMeasure::new(atoms, weights)
}

/// Masses binned per grid cell: `(flat index, mass)` for nonempty cells, in
/// flat-index order.
pub fn bin_masses(mu: &DiscreteMeasure, grid: &GridSpec) -> Result<Vec<(usize, f64)>> {
    if mu.dim() != grid.dim() {
        return Err(Error::DimensionMismatch(mu.dim(), grid.dim()));
    }
    let mut masses: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    for (atom, &w) in mu.atoms().iter().zip(mu.weights()) {
        let idx = grid.locate(atom).ok_or_else(|| {
            Error::invalid(format!("atom {atom:?} lies outside the grid box"))
        })?;
        *masses.entry(grid.flat_index(&idx)).or_insert(0.0) += w;
    }
    Ok(masses.into_iter().collect())
}

/// Entropy of the piecewise-constant density obtained by binning:
/// `Σ_i p_i · log(p_i / vol)` over nonempty cells.
pub fn binned_entropy(mu: &DiscreteMeasure, grid: &GridSpec) -> Result<f64> {
    let vol = grid.cell_volume();
    let mut ent = 0.0;
    for (_, p) in bin_masses(mu, grid)? {
        ent += p * (p / vol).ln();
    }
    Ok(ent)
}

/// One nonempty cell of a binned measure, for CSV export.
#[derive(Debug, Clone, Serialize)]
pub struct BinnedCell {
    pub indices: Vec<usize>,
    pub center: Vec<f64>,
    pub mass: f64,
    pub density: f64,
}

/// Binned density table (one row per nonempty cell).
pub fn binned_cells(mu: &DiscreteMeasure, grid: &GridSpec) -> Result<Vec<BinnedCell>> {
    let vol = grid.cell_volume();
    Ok(bin_masses(mu, grid)?
        .into_iter()
        .map(|(flat, mass)| {
            let indices = grid.unflatten(flat);
            let center = grid.cell_center(&indices);
            BinnedCell { indices, center, mass, density: mass / vol }
        })
        .collect())
}

/// `|∫ c(·,x0) dμ1 − ∫ c(·,x0) dμ2|` — the second-moment diagnostic used to
/// tell Wasserstein convergence from plain weak convergence.
pub fn second_moment_gap(
    mu1: &DiscreteMeasure,
    mu2: &DiscreteMeasure,
    x0: &[f64],
    cost: &CostSpec,
) -> Result<f64> {
    if mu1.dim() != mu2.dim() || mu1.dim() != x0.len() {
        return Err(Error::DimensionMismatch(mu1.dim(), x0.len()));
    }
    let moment = |m: &DiscreteMeasure| -> Result<f64> {
        let mut s = 0.0;
        for (atom, &w) in m.atoms().iter().zip(m.weights()) {
            let c = cost.cost(atom, x0)?.finite().ok_or_else(|| {
                Error::invalid("second moment undefined under a forbidden edge")
            })?;
            s += w * c;
        }
        Ok(s)
    };
    Ok((moment(mu1)? - moment(mu2)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VectorSet;

    fn unit_square_grid(cells: usize) -> GridSpec {
        GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![cells, cells]).unwrap()
    }

    #[test]
    fn uniform_discretization_2x2() {
        let mu = discretize_density(|_| 1.0, &unit_square_grid(2)).unwrap();
        assert_eq!(mu.len(), 4);
        for &w in mu.weights() {
            assert!((w - 0.25).abs() < 1e-15);
        }
        assert!(mu.atoms().iter().any(|a| a == &vec![0.25, 0.25]));
        assert!(mu.atoms().iter().any(|a| a == &vec![0.75, 0.75]));
    }

    #[test]
    fn half_support_discretization() {
        let grid = unit_square_grid(2);
        let mu = discretize_density(|x| if x[1] <= 0.5 { 1.0 } else { 0.0 }, &grid).unwrap();
        assert_eq!(mu.len(), 2);
        for &w in mu.weights() {
            assert!((w - 0.5).abs() < 1e-15);
        }
        for a in mu.atoms() {
            assert!((a[1] - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn single_cell_gaussian_normalizes() {
        let grid = GridSpec::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![1, 1]).unwrap();
        let mu = discretize_density(|x| (-(x[0] * x[0] + x[1] * x[1])).exp(), &grid).unwrap();
        assert_eq!(mu.len(), 1);
        assert_eq!(mu.atom(0), &[0.0, 0.0]);
        assert!((mu.weight(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_density_is_an_error() {
        assert!(discretize_density(|_| 0.0, &unit_square_grid(2)).is_err());
    }

    #[test]
    fn uniform_entropy_is_zero_at_every_refinement() {
        for cells in [2usize, 4, 8, 16, 32] {
            let grid = unit_square_grid(cells);
            let mu = discretize_density(|_| 1.0, &grid).unwrap();
            let ent = binned_entropy(&mu, &grid).unwrap();
            assert!(ent.abs() < 1e-10, "cells={cells}: entropy {ent}");
        }
    }

    #[test]
    fn entropy_single_cell() {
        let grid = unit_square_grid(2);
        let mu = DiscreteMeasure::dirac(vec![0.25, 0.25]);
        let ent = binned_entropy(&mu, &grid).unwrap();
        assert!((ent - 4.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_two_half_cells() {
        let grid = GridSpec::new(vec![0.0], vec![1.0], vec![2]).unwrap();
        let mu = DiscreteMeasure::new(vec![vec![0.25], vec![0.75]], vec![0.5, 0.5]).unwrap();
        let ent = binned_entropy(&mu, &grid).unwrap();
        assert!(ent.abs() < 1e-12);
    }

    #[test]
    fn entropy_atom_outside_grid_errors() {
        let grid = unit_square_grid(2);
        let mu = DiscreteMeasure::dirac(vec![2.0, 0.5]);
        let err = binned_entropy(&mu, &grid).unwrap_err();
        assert!(err.to_string().contains("2.0"));
    }

    #[test]
    fn boundary_atom_goes_to_lower_cell() {
        let grid = GridSpec::new(vec![0.0], vec![1.0], vec![2]).unwrap();
        // 0.5 is the interior boundary: lower-index cell 0.
        assert_eq!(grid.locate(&[0.5]).unwrap(), vec![0]);
        assert_eq!(grid.locate(&[0.0]).unwrap(), vec![0]);
        assert_eq!(grid.locate(&[1.0]).unwrap(), vec![1]);
        assert_eq!(grid.locate(&[0.75]).unwrap(), vec![1]);
        assert!(grid.locate(&[1.5]).is_none());
    }

    #[test]
    fn entropy_refinement_differences_shrink() {
        // Smooth positive density: successive binned-entropy differences
        // decrease across 8 -> 16 -> 32 cells per axis.
        let density = |x: &[f64]| (-(x[0] - 0.4) * (x[0] - 0.4) - (x[1] - 0.6) * (x[1] - 0.6)).exp();
        let mut ents = Vec::new();
        for cells in [8usize, 16, 32, 64] {
            let grid = unit_square_grid(cells);
            let mu = discretize_density(density, &grid).unwrap();
            ents.push(binned_entropy(&mu, &grid).unwrap());
        }
        let d1 = (ents[1] - ents[0]).abs();
        let d2 = (ents[2] - ents[1]).abs();
        let d3 = (ents[3] - ents[2]).abs();
        assert!(d2 <= d1, "{d2} > {d1}");
        assert!(d3 <= d2, "{d3} > {d2}");
    }

    #[test]
    fn entropy_translation_invariance() {
        let grid = unit_square_grid(8);
        let mu = discretize_density(|x| 1.0 + x[0], &grid).unwrap();
        let shift = vec![1.0 / 8.0, 0.0];
        let shifted_grid = GridSpec::new(
            vec![shift[0], 0.0],
            vec![1.0 + shift[0], 1.0],
            vec![8, 8],
        )
        .unwrap();
        let shifted = mu.translate(&shift).unwrap();
        let a = binned_entropy(&mu, &grid).unwrap();
        let b = binned_entropy(&shifted, &shifted_grid).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn discretize_is_mass_preserving() {
        for cells in [3usize, 7, 12] {
            let grid = unit_square_grid(cells);
            let mu = discretize_density(|x| 0.3 + x[0] * x[1], &grid).unwrap();
            let total: f64 = mu.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn duplicate_atoms_merge() {
        let mu = DiscreteMeasure::new(
            vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0]],
            vec![0.25, 0.25, 0.5],
        )
        .unwrap();
        assert_eq!(mu.len(), 2);
        assert!((mu.weight(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bad_weights_rejected() {
        assert!(DiscreteMeasure::new(vec![vec![0.0]], vec![0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![1.0, -0.1]).is_err());
    }

    #[test]
    fn second_moment_gap_examples() {
        let linf = CostSpec::CrystallineSq(VectorSet::linf(2));
        let mu = DiscreteMeasure::dirac(vec![0.0, 0.0]);
        let nu = DiscreteMeasure::dirac(vec![1.0, 0.0]);
        assert_eq!(second_moment_gap(&mu, &mu, &[0.0, 0.0], &linf).unwrap(), 0.0);
        assert_eq!(second_moment_gap(&mu, &nu, &[0.0, 0.0], &linf).unwrap(), 1.0);

        let split = DiscreteMeasure::new(vec![vec![0.0, 0.0], vec![2.0, 0.0]], vec![0.5, 0.5]).unwrap();
        let mid = DiscreteMeasure::dirac(vec![1.0, 0.0]);
        let gap = second_moment_gap(&split, &mid, &[0.0, 0.0], &CostSpec::EuclideanSq).unwrap();
        assert!((gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measure_json_round_trip() {
        let mu = DiscreteMeasure::new(vec![vec![0.0, 1.0], vec![2.0, 3.0]], vec![0.25, 0.75]).unwrap();
        let json = serde_json::to_string(&mu).unwrap();
        let back: DiscreteMeasure = serde_json::from_str(&json).unwrap();
        assert_eq!(mu, back);
    }
}
