//! Scenario configuration: named verification setups read from JSON.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::VectorSet;
use crate::measures::{discretize_density, DiscreteMeasure, GridSpec};

/// Density families available for grid discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityId {
    Uniform,
    /// `exp(-|x|²)` centered at the box midpoint.
    Gaussian,
    /// `1 + x_0 - lo_0`, a tilted positive ramp.
    RampX,
}

impl DensityId {
    pub fn evaluate(self, point: &[f64], grid: &GridSpec) -> f64 {
        match self {
            DensityId::Uniform => 1.0,
            DensityId::Gaussian => {
                let r2: f64 = point
                    .iter()
                    .zip(grid.lo.iter().zip(&grid.hi))
                    .map(|(x, (lo, hi))| {
                        let c = 0.5 * (lo + hi);
                        (x - c) * (x - c)
                    })
                    .sum();
                (-r2).exp()
            }
            DensityId::RampX => 1.0 + point[0] - grid.lo[0],
        }
    }
}

/// Either an explicit measure or a density discretized on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    Explicit {
        #[serde(flatten)]
        measure: DiscreteMeasure,
    },
    Density {
        density: DensityId,
        grid: GridSpec,
    },
}

impl MeasureSpec {
    pub fn realize(&self) -> Result<DiscreteMeasure> {
        match self {
            MeasureSpec::Explicit { measure } => Ok(measure.clone()),
            MeasureSpec::Density { density, grid } => {
                discretize_density(|p| density.evaluate(p, grid), grid)
            }
        }
    }
}

/// A named verification setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub generator: VectorSet,
    pub mu: MeasureSpec,
    pub nu: MeasureSpec,
    /// Interpolation times for the convexity check.
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    /// Shared fine grid for entropy binning; must cover the hull of both
    /// supports.
    pub fine_grid: Option<GridSpec>,
    /// Named tolerance overrides; unnamed checks use their spec defaults.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_times() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}

impl Scenario {
    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let scenario: Scenario = serde_json::from_str(&text)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        Ok(scenario)
    }

    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }
}

fn unit_square(cells: usize) -> GridSpec {
    GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![cells, cells]).expect("valid grid")
}

fn density_spec(density: DensityId, grid: GridSpec) -> MeasureSpec {
    MeasureSpec::Density { density, grid }
}

/// The shipped scenario pack: ℓ∞ and ℓ¹ generators crossed with translation,
/// reshaping, random-atom, and grid-refinement setups.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let mut scenarios = Vec::new();
    for (tag, generator) in [("linf", VectorSet::linf(2)), ("l1", VectorSet::l1(2))] {
        // Translation: uniform unit square moved to [2,3]x[0,1].
        scenarios.push(Scenario {
            name: format!("{tag}-translation"),
            generator: generator.clone(),
            mu: density_spec(DensityId::Uniform, unit_square(16)),
            nu: density_spec(
                DensityId::Uniform,
                GridSpec::new(vec![2.0, 0.0], vec![3.0, 1.0], vec![16, 16]).expect("valid grid"),
            ),
            times: default_times(),
            fine_grid: Some(
                GridSpec::new(vec![-0.5, 0.0], vec![3.5, 1.0], vec![64, 16]).expect("valid grid"),
            ),
            tolerances: BTreeMap::new(),
            seed: 11,
        });
        // Reshaping: unit square to an area-preserving 2x0.5 slab.
        scenarios.push(Scenario {
            name: format!("{tag}-reshaping"),
            generator: generator.clone(),
            mu: MeasureSpec::Density {
                density: DensityId::Uniform,
                grid: GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![16, 32])
                    .expect("valid grid"),
            },
            nu: MeasureSpec::Density {
                density: DensityId::Uniform,
                grid: GridSpec::new(vec![0.0, 0.0], vec![2.0, 0.5], vec![32, 16])
                    .expect("valid grid"),
            },
            times: default_times(),
            fine_grid: Some(
                GridSpec::new(vec![0.0, 0.0], vec![2.0, 1.0], vec![64, 32]).expect("valid grid"),
            ),
            tolerances: BTreeMap::new(),
            seed: 13,
        });
        // Random atoms: seeded small supports, oracle-checkable.
        scenarios.push(Scenario {
            name: format!("{tag}-random-atoms"),
            generator: generator.clone(),
            mu: MeasureSpec::Explicit { measure: seeded_atoms(401 + seed_offset(tag), 5) },
            nu: MeasureSpec::Explicit { measure: seeded_atoms(811 + seed_offset(tag), 4) },
            times: default_times(),
            fine_grid: Some(
                GridSpec::new(vec![-0.5, -0.5], vec![4.5, 4.5], vec![40, 40]).expect("valid grid"),
            ),
            tolerances: BTreeMap::new(),
            seed: 17,
        });
        // Grid refinement: the map-inducedness trend instance.
        scenarios.push(Scenario {
            name: format!("{tag}-grid-refinement"),
            generator,
            mu: density_spec(DensityId::Uniform, unit_square(8)),
            nu: density_spec(
                DensityId::Uniform,
                GridSpec::new(vec![2.0, 0.0], vec![3.0, 1.0], vec![8, 8]).expect("valid grid"),
            ),
            times: default_times(),
            fine_grid: Some(
                GridSpec::new(vec![-0.5, 0.0], vec![3.5, 1.0], vec![64, 16]).expect("valid grid"),
            ),
            tolerances: BTreeMap::new(),
            seed: 19,
        });
    }
    scenarios
}

fn seed_offset(tag: &str) -> u64 {
    if tag == "linf" {
        0
    } else {
        1000
    }
}

/// Random atoms with coordinates uniform in [0,4]² and random positive
/// weights, normalized.
pub fn seeded_atoms(seed: u64, count: usize) -> DiscreteMeasure {
    use rand::Rng;
    let mut rng = super::rng::stream(seed, "seeded-atoms");
    let atoms: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..2).map(|_| rng.random_range(0.0..4.0)).collect())
        .collect();
    let mut weights: Vec<f64> = (0..count).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    DiscreteMeasure::new(atoms, weights).expect("seeded atoms are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_pack_has_eight_scenarios() {
        let pack = builtin_scenarios();
        assert_eq!(pack.len(), 8);
        for s in &pack {
            s.mu.realize().unwrap();
            s.nu.realize().unwrap();
        }
    }

    #[test]
    fn scenario_json_round_trip() {
        let pack = builtin_scenarios();
        let json = serde_json::to_string_pretty(&pack[0]).unwrap();
        let back = Scenario::from_json(&json).unwrap();
        assert_eq!(back.name, pack[0].name);
        assert_eq!(back.seed, pack[0].seed);
    }

    #[test]
    fn explicit_measure_spec_round_trips() {
        let m = seeded_atoms(5, 3);
        let spec = MeasureSpec::Explicit { measure: m.clone() };
        let json = serde_json::to_string(&spec).unwrap();
        let back: MeasureSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.realize().unwrap(), m);
    }
}
