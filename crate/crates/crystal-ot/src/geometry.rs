//! Crystalline (polyhedral) norms and the cost functions built from them.
//!
//! A crystalline norm is `‖x‖ = max_{v ∈ 𝒱} ⟨x, v⟩` over a finite symmetric
//! generator set 𝒱 spanning R^N; its unit ball is a polytope. This module
//! owns the generator set, the squared-distance costs (crystalline,
//! Euclidean, smoothed, restricted), the norm-equivalence constants against
//! the Euclidean norm, and the active-face classification of directions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Componentwise tolerance for detecting duplicate generators.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// Symmetric generator set of a crystalline norm.
///
/// Construction symmetrizes the input: for every `v` the set also contains
/// `-v`. The serialized form lists only the positive half.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    dim: usize,
    /// Full symmetrized generator list; the first `half.len()` entries are
    /// the canonical positive half, followed by their negations.
    vectors: Vec<Vec<f64>>,
    half: usize,
}

#[derive(Serialize, Deserialize)]
struct VectorSetWire {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl VectorSet {
    /// Builds the set 𝒱 = 𝒱̃ ∪ (−𝒱̃) from the given half, checking the
    /// spanning and no-duplicate invariants.
    pub fn new(half: Vec<Vec<f64>>) -> Result<Self> {
        if half.is_empty() {
            return Err(Error::invalid("generator set must be nonempty"));
        }
        let dim = half[0].len();
        if dim == 0 {
            return Err(Error::invalid("generators must have dimension >= 1"));
        }
        for v in &half {
            if v.len() != dim {
                return Err(Error::DimensionMismatch(v.len(), dim));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid("generator coordinates must be finite"));
            }
        }
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(2 * half.len());
        let mut kept_half = 0usize;
        for v in &half {
            if !vectors.iter().any(|w| close(w, v)) {
                vectors.push(v.clone());
                kept_half += 1;
            }
        }
        for i in 0..kept_half {
            let neg: Vec<f64> = vectors[i].iter().map(|c| -c).collect();
            if !vectors.iter().any(|w| close(w, &neg)) {
                vectors.push(neg);
            }
        }
        let set = VectorSet { dim, vectors, half: kept_half };
        if !set.spans() {
            return Err(Error::invalid("generators do not span R^N"));
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All generators, including negations.
    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// The canonical positive half used for serialization.
    pub fn positive_half(&self) -> &[Vec<f64>] {
        &self.vectors[..self.half]
    }

    /// ℓ∞ generator set {±e_1, ..., ±e_N}.
    pub fn linf(dim: usize) -> Self {
        let mut half = Vec::with_capacity(dim);
        for i in 0..dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            half.push(e);
        }
        VectorSet::new(half).expect("standard basis is valid")
    }

    /// Generator set of the ℓ¹ norm in the plane: {±(1,1), ±(1,−1)}.
    /// (Sign patterns generalize this to higher dimension.)
    pub fn l1(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        // All sign patterns with first coordinate fixed to +1 form a half.
        let mut half = Vec::new();
        let patterns = 1usize << (dim - 1);
        for mask in 0..patterns {
            let mut v = vec![1.0; dim];
            for (bit, coord) in v.iter_mut().enumerate().skip(1) {
                if mask >> (bit - 1) & 1 == 1 {
                    *coord = -1.0;
                }
            }
            half.push(v);
        }
        VectorSet::new(half).expect("sign patterns are valid")
    }

    fn spans(&self) -> bool {
        rank(&self.vectors, self.dim) == self.dim
    }
}

impl Serialize for VectorSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        VectorSetWire { dim: self.dim, vectors: self.positive_half().to_vec() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for VectorSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = VectorSetWire::deserialize(d)?;
        for v in &wire.vectors {
            if v.len() != wire.dim {
                return Err(serde::de::Error::custom(format!(
                    "generator of dimension {} in a dim-{} set",
                    v.len(),
                    wire.dim
                )));
            }
        }
        VectorSet::new(wire.vectors).map_err(serde::de::Error::custom)
    }
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= DUPLICATE_TOL)
}

/// Row rank of a set of vectors by Gaussian elimination with partial pivoting.
fn rank(vectors: &[Vec<f64>], dim: usize) -> usize {
    let mut rows: Vec<Vec<f64>> = vectors.to_vec();
    let mut r = 0;
    for col in 0..dim {
        let pivot = (r..rows.len()).max_by(|&a, &b| {
            rows[a][col].abs().partial_cmp(&rows[b][col].abs()).unwrap()
        });
        let Some(p) = pivot else { break };
        if rows[p][col].abs() < 1e-12 {
            continue;
        }
        rows.swap(r, p);
        for i in r + 1..rows.len() {
            let f = rows[i][col] / rows[r][col];
            for c in col..dim {
                rows[i][c] -= f * rows[r][c];
            }
        }
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    r
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn euclidean_norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `‖x‖ = max_{v ∈ 𝒱} ⟨x, v⟩`.
pub fn crystalline_norm(x: &[f64], generators: &VectorSet) -> Result<f64> {
    if x.len() != generators.dim() {
        return Err(Error::DimensionMismatch(x.len(), generators.dim()));
    }
    let mut best = f64::NEG_INFINITY;
    for v in generators.vectors() {
        let s = dot(x, v);
        if s > best {
            best = s;
        }
    }
    Ok(best)
}

/// Finite value or an explicit forbidden-edge marker; never a large float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostValue {
    Finite(f64),
    Forbidden,
}

impl CostValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            CostValue::Finite(v) => Some(v),
            CostValue::Forbidden => None,
        }
    }

    pub fn is_forbidden(self) -> bool {
        matches!(self, CostValue::Forbidden)
    }
}

/// Dual potential values used to restrict a cost to its tight set.
#[derive(Debug, Clone)]
pub struct RestrictionData {
    /// Potential per source atom.
    pub phi: Vec<f64>,
    /// Conjugate potential per target atom.
    pub psi: Vec<f64>,
    /// Tightness tolerance: an edge is allowed when
    /// `phi[i] + psi[j] >= primary(x_i, y_j) - tolerance`.
    pub tolerance: f64,
}

/// A squared-distance cost on R^N.
///
/// The `Restricted` kind evaluates pairs by source/target *index*: the
/// tight-set test needs the potentials of specific atoms, so it is only
/// usable through [`CostSpec::cost_by_index`].
#[derive(Debug, Clone)]
pub enum CostSpec {
    /// d(x,y)² with d the crystalline distance of the generator set.
    CrystallineSq(VectorSet),
    /// |x−y|².
    EuclideanSq,
    /// d_n² = d² + (1/n)·|x−y|², the strongly convex approximation.
    SmoothedSq { generators: VectorSet, n: u32 },
    /// Euclidean² on the dual-tight set of the primary crystalline cost,
    /// forbidden elsewhere.
    Restricted { generators: VectorSet, data: RestrictionData },
}

impl CostSpec {
    pub fn smoothed(generators: VectorSet, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("smoothing index n must be positive"));
        }
        Ok(CostSpec::SmoothedSq { generators, n })
    }

    /// Evaluates the cost on a pair of points. For `Restricted`, the atom
    /// indices select which potentials gate the pair.
    pub fn cost_by_index(&self, x: &[f64], y: &[f64], i: usize, j: usize) -> Result<CostValue> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch(x.len(), y.len()));
        }
        match self {
            CostSpec::CrystallineSq(gen) => {
                let d = crystalline_norm(&diff(x, y), gen)?;
                Ok(CostValue::Finite(d * d))
            }
            CostSpec::EuclideanSq => Ok(CostValue::Finite(sq_dist(x, y))),
            CostSpec::SmoothedSq { generators, n } => {
                let d = crystalline_norm(&diff(x, y), generators)?;
                Ok(CostValue::Finite(d * d + sq_dist(x, y) / f64::from(*n)))
            }
            CostSpec::Restricted { generators, data } => {
                let d = crystalline_norm(&diff(x, y), generators)?;
                let tight = data.phi[i] + data.psi[j] >= d * d - data.tolerance;
                if tight {
                    Ok(CostValue::Finite(sq_dist(x, y)))
                } else {
                    Ok(CostValue::Forbidden)
                }
            }
        }
    }

    /// Position-only evaluation; valid for every kind except `Restricted`.
    pub fn cost(&self, x: &[f64], y: &[f64]) -> Result<CostValue> {
        match self {
            CostSpec::Restricted { .. } => Err(Error::invalid(
                "restricted cost requires atom indices; use cost_by_index",
            )),
            _ => self.cost_by_index(x, y, usize::MAX, usize::MAX),
        }
    }
}

/// Evaluates a cost spec on a pair of points, per the module contract.
pub fn evaluate_cost(spec: &CostSpec, x: &[f64], y: &[f64]) -> Result<CostValue> {
    match spec {
        CostSpec::Restricted { .. } => Err(Error::invalid(
            "restricted cost requires atom indices; use CostSpec::cost_by_index",
        )),
        _ => spec.cost(x, y),
    }
}

fn diff(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Equivalence constants `c_low·|x| ≤ ‖x‖ ≤ c_high·|x|`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EquivalenceConstants {
    pub c_low: f64,
    pub c_high: f64,
    /// False when `c_low` came from multi-start maximization (N > 3) rather
    /// than exact vertex enumeration.
    pub certified: bool,
}

/// Computes the equivalence constants of the crystalline norm against the
/// Euclidean norm.
///
/// `c_high = max_v |v|` is exact. For N ≤ 3, `c_low` is exact: it is the
/// reciprocal of the largest Euclidean norm over the vertices of the unit
/// ball `{x : ⟨x,v⟩ ≤ 1 ∀v}`, enumerated by solving all N×N active-constraint
/// systems. For N > 3 a 64-start projected maximization gives a
/// lower-confidence bound, flagged through `certified`.
pub fn norm_equivalence_constants(generators: &VectorSet) -> Result<EquivalenceConstants> {
    let dim = generators.dim();
    let c_high = generators
        .vectors()
        .iter()
        .map(|v| euclidean_norm(v))
        .fold(0.0_f64, f64::max);
    if c_high <= 0.0 {
        return Err(Error::invalid("generator set has no nonzero vector"));
    }

    if dim <= 3 {
        let r_max = max_vertex_norm(generators)?;
        Ok(EquivalenceConstants { c_low: 1.0 / r_max, c_high, certified: true })
    } else {
        let r_max = max_ball_norm_multistart(generators, 64);
        Ok(EquivalenceConstants { c_low: 1.0 / r_max, c_high, certified: false })
    }
}

/// Largest |x| over the vertices of {x : ⟨x,v⟩ ≤ 1 for all v}.
fn max_vertex_norm(generators: &VectorSet) -> Result<f64> {
    let dim = generators.dim();
    let vs = generators.vectors();
    let m = vs.len();
    let mut best = 0.0_f64;
    let mut combo = vec![0usize; dim];
    enumerate_combinations(m, dim, &mut combo, 0, 0, &mut |active: &[usize]| {
        let mat: Vec<&[f64]> = active.iter().map(|&k| vs[k].as_slice()).collect();
        if let Some(x) = solve_unit_system(&mat) {
            let feasible = vs.iter().all(|v| dot(&x, v) <= 1.0 + 1e-9);
            if feasible {
                let n = euclidean_norm(&x);
                if n > best {
                    best = n;
                }
            }
        }
    });
    if best <= 0.0 {
        return Err(Error::invalid(
            "unit ball has no vertices; generators do not span R^N",
        ));
    }
    Ok(best)
}

fn enumerate_combinations(
    m: usize,
    k: usize,
    combo: &mut Vec<usize>,
    depth: usize,
    start: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if depth == k {
        f(combo);
        return;
    }
    for i in start..m {
        combo[depth] = i;
        enumerate_combinations(m, k, combo, depth + 1, i + 1, f);
    }
}

/// Solves ⟨x, v_k⟩ = 1 for the given square system; `None` when singular.
fn solve_unit_system(rows: &[&[f64]]) -> Option<Vec<f64>> {
    let n = rows.len();
    let mut a: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    let mut b = vec![1.0; n];
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[p][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = a[i][col] / a[col][col];
            for c in col..n {
                a[i][c] -= f * a[col][c];
            }
            b[i] -= f * b[col];
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Multi-start maximization of |x| over the unit ball for N > 3.
fn max_ball_norm_multistart(generators: &VectorSet, starts: usize) -> f64 {
    use rand::Rng;
    use rand::SeedableRng;
    let dim = generators.dim();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x6c6f77); // "low"
    let mut best = 0.0_f64;
    for _ in 0..starts {
        let mut x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        // Project onto the unit sphere of the crystalline norm, then hill-climb
        // along random perturbations, reprojecting each step.
        let scale = |x: &mut Vec<f64>| {
            let n = crystalline_norm(x, generators).unwrap_or(0.0);
            if n > 0.0 {
                for c in x.iter_mut() {
                    *c /= n;
                }
            }
        };
        scale(&mut x);
        let mut cur = euclidean_norm(&x);
        let mut step = 0.5;
        for _ in 0..200 {
            let mut cand: Vec<f64> =
                x.iter().map(|c| c + step * rng.random_range(-1.0..1.0)).collect();
            scale(&mut cand);
            let n = euclidean_norm(&cand);
            if n > cur {
                cur = n;
                x = cand;
            } else {
                step *= 0.9;
            }
        }
        if cur > best {
            best = cur;
        }
    }
    best
}

/// ε-active generators of the direction z − x:
/// `{v ∈ 𝒱 : d(z,x) − ⟨z−x, v⟩ ≤ eps}`.
pub fn face_set<'a>(
    z: &[f64],
    x: &[f64],
    generators: &'a VectorSet,
    eps: f64,
) -> Result<Vec<&'a Vec<f64>>> {
    if z.len() != generators.dim() || x.len() != generators.dim() {
        return Err(Error::DimensionMismatch(z.len(), generators.dim()));
    }
    if eps < 0.0 {
        return Err(Error::invalid("eps must be nonnegative"));
    }
    let w = diff(z, x);
    let d = crystalline_norm(&w, generators)?;
    if d <= 0.0 {
        return Err(Error::invalid("face set undefined at distance zero (z = x)"));
    }
    Ok(generators
        .vectors()
        .iter()
        .filter(|v| d - dot(&w, v) <= eps)
        .collect())
}
