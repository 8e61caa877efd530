//! Secondary-variational plan selection.
//!
//! Among the couplings Π₁(μ,ν) that are optimal for the squared crystalline
//! distance d², the selection Π(μ,ν) minimizes the squared Euclidean cost.
//! Two routes compute it:
//!
//! - the potential-restriction path: take Kantorovich potentials of the
//!   primary solve, restrict to the dual-tight edge set (the cost c̃), and
//!   re-solve under Euclidean²;
//! - the lexicographic path: one solve under `d² + ε·d_eu²` with ε small
//!   enough that the weighted optimum stays on the primary-optimal face.
//!
//! [`select_plan`] runs the first and cross-checks objective values against
//! the second; disagreement beyond tolerance is an error carrying both
//! plans. This module also houses the smoothed-plan approximation sequence
//! and the support audits (double monotonicity, map-inducedness, selection
//! consistency).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CostSpec, RestrictionData, VectorSet};
use crate::harness::oracle::oracle_vertex_enumeration;
use crate::measures::{binned_entropy, DiscreteMeasure, GridSpec};
use crate::solver::{
    solve_kantorovich, solve_table_with, CostTable, DualPotentials, SolveOptions, TransportPlan,
};

/// Objective-agreement tolerance between the two selection methods.
pub const METHOD_AGREEMENT_TOL: f64 = 1e-6;
/// Π₁-membership tolerance: the selected plan's d² cost vs the primary optimum.
pub const PRIMARY_MEMBERSHIP_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionMethod {
    PotentialRestriction,
    LexicographicConstraint,
}

/// Output of a plan selection.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    /// W₂² under the crystalline distance.
    pub primary_value: f64,
    /// Squared Euclidean cost of the selected plan.
    pub secondary_value: f64,
    pub plan: TransportPlan,
    /// Number of edges admitted by the dual-tightness restriction
    /// (`m·n` for the lexicographic method, which restricts nothing).
    pub restricted_edge_count: usize,
    pub method: SelectionMethod,
}

#[derive(Serialize)]
struct SelectionWire<'a> {
    primary_value: f64,
    secondary_value: f64,
    plan: crate::solver::PlanRecord,
    restricted_edge_count: usize,
    method: &'a SelectionMethod,
}

impl Serialize for SelectionResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SelectionWire {
            primary_value: self.primary_value,
            secondary_value: self.secondary_value,
            plan: self.plan.to_record(self.secondary_value),
            restricted_edge_count: self.restricted_edge_count,
            method: &self.method,
        }
        .serialize(s)
    }
}

/// Default tightness tolerance for the restricted cost.
pub fn restriction_tolerance(primary_value: f64) -> f64 {
    1e-7 * (1.0 + primary_value.abs())
}

/// Fallback lexicographic weight when no certified bound is available.
pub fn default_eps_weight(primary_value: f64) -> f64 {
    1e-6 * (1.0 + primary_value.abs())
}

/// Lexicographic weight for an instance: half the certified safety bound
/// when the oracle can enumerate the instance, the fallback default
/// otherwise.
pub fn auto_eps_weight(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    generators: &VectorSet,
    primary_value: f64,
) -> Result<f64> {
    let default = default_eps_weight(primary_value);
    Ok(match lexicographic_eps_bound(mu, nu, generators)? {
        Some(bound) => default.min(bound / 2.0),
        None => default,
    })
}

/// Computes the paper's plan selection Π(μ,ν) by potential restriction and
/// cross-checks the objective values against the lexicographic route.
pub fn select_plan(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    generators: &VectorSet,
) -> Result<SelectionResult> {
    let primary_cost = CostSpec::CrystallineSq(generators.clone());
    let primary = solve_kantorovich(mu, nu, &primary_cost)?;
    let tol = restriction_tolerance(primary.value);
    let plan = restrict_and_resolve(&primary.plan, &primary.potentials, generators, tol)?;

    let primary_of_selected = plan.cost_under(&primary_cost)?;
    if (primary_of_selected - primary.value).abs()
        > PRIMARY_MEMBERSHIP_TOL * (1.0 + primary.value.abs())
    {
        return Err(Error::invalid(format!(
            "internal: restricted plan left the primary-optimal face ({primary_of_selected} vs {})",
            primary.value
        )));
    }
    let secondary_value = plan.cost_under(&CostSpec::EuclideanSq)?;
    let restricted_edge_count =
        tight_edge_count(mu, nu, generators, &primary.potentials, tol)?;

    let lex =
        lexicographic_unvalidated(mu, nu, generators, auto_eps_weight(mu, nu, generators, primary.value)?)?;
    let scale = 1.0 + primary.value.abs() + secondary_value.abs();
    if (lex.primary_value - primary.value).abs() > METHOD_AGREEMENT_TOL * scale
        || (lex.secondary_value - secondary_value).abs() > METHOD_AGREEMENT_TOL * scale
    {
        return Err(Error::MethodDisagreement {
            restricted_primary: primary.value,
            restricted_secondary: secondary_value,
            lexicographic_primary: lex.primary_value,
            lexicographic_secondary: lex.secondary_value,
            restricted_plan: plan.entry_tuples(),
            lexicographic_plan: lex.plan.entry_tuples(),
        });
    }

    Ok(SelectionResult {
        primary_value: primary.value,
        secondary_value,
        plan,
        restricted_edge_count,
        method: SelectionMethod::PotentialRestriction,
    })
}

/// Number of pairs admitted by the dual-tightness test.
fn tight_edge_count(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    generators: &VectorSet,
    duals: &DualPotentials,
    tol: f64,
) -> Result<usize> {
    let primary = CostSpec::CrystallineSq(generators.clone());
    let mut count = 0;
    for i in 0..mu.len() {
        for j in 0..nu.len() {
            let d2 = primary
                .cost_by_index(mu.atom(i), nu.atom(j), i, j)?
                .finite()
                .expect("crystalline cost is always finite");
            if duals.phi[i] + duals.psi[j] >= d2 - tol {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Re-solves under the restricted cost c̃: Euclidean² on the edges where the
/// primary dual is tight, forbidden elsewhere.
pub fn restrict_and_resolve(
    primary: &TransportPlan,
    duals: &DualPotentials,
    generators: &VectorSet,
    tol: f64,
) -> Result<TransportPlan> {
    let restricted = CostSpec::Restricted {
        generators: generators.clone(),
        data: RestrictionData {
            phi: duals.phi.clone(),
            psi: duals.psi.clone(),
            tolerance: tol,
        },
    };
    let solution = solve_kantorovich(primary.source(), primary.target(), &restricted)?;
    Ok(solution.plan)
}

/// Lexicographic selection: a single solve of `min ∫ (d² + ε·d_eu²) dπ`.
///
/// For small supports the safety bound `ε < gap / max d_eu²` is certified by
/// the vertex-enumeration oracle and violating weights are rejected; beyond
/// oracle reach only positivity is enforced.
pub fn select_plan_lexicographic(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    generators: &VectorSet,
    eps_weight: f64,
) -> Result<SelectionResult> {
    if !(eps_weight > 0.0) {
        return Err(Error::invalid("eps_weight must be positive"));
    }
    if let Some(bound) = lexicographic_eps_bound(mu, nu, generators)? {
        if eps_weight >= bound {
            return Err(Error::invalid(format!(
                "eps_weight {eps_weight} is not below the lexicographic safety bound {bound}"
            )));
        }
    }
    lexicographic_unvalidated(mu, nu, generators, eps_weight)
}

/// Certified safety bound `gap / max d_eu²`, when the oracle can run.
///
/// `gap` is the smallest difference between distinct primary vertex values;
/// instances whose vertices all share one primary value have no competing
/// face and the bound is unbounded (`None` is also returned for supports the
/// oracle cannot enumerate).
pub fn lexicographic_eps_bound(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    generators: &VectorSet,
) -> Result<Option<f64>> {
    if mu.len() > 5 || nu.len() > 5 {
        return Ok(None);
    }
    let primary = CostSpec::CrystallineSq(generators.clone());
    let oracle = oracle_vertex_enumeration(mu, nu, &primary, &CostSpec::EuclideanSq)?;
    let Some(gap) = oracle.smallest_primary_gap else {
        return Ok(None);
    };
    let mut max_eu: f64 = 0.0;
    for x in mu.atoms() {
        for y in nu.atoms() {
            let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            max_eu = max_eu.max(d);
        }
    }
    if max_eu <= 0.0 {
        return Ok(None);
    }
    Ok(Some(gap / max_eu))
}

fn lexicographic_unvalidated(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    generators: &VectorSet,
    eps_weight: f64,
) -> Result<SelectionResult> {
    let (m, n) = (mu.len(), nu.len());
    let primary_cost = CostSpec::CrystallineSq(generators.clone());
    let mut vals = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let d2 = primary_cost
                .cost_by_index(mu.atom(i), nu.atom(j), i, j)?
                .finite()
                .expect("crystalline cost is always finite");
            let eu: f64 = mu
                .atom(i)
                .iter()
                .zip(nu.atom(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            vals[i * n + j] = d2 + eps_weight * eu;
        }
    }
    let table = CostTable { m, n, vals, forbidden: None };
    let (solution, _) = solve_table_with(mu, nu, table, &SolveOptions::default())?;
    let plan = solution.plan;
    let primary_value = plan.cost_under(&primary_cost)?;
    let secondary_value = plan.cost_under(&CostSpec::EuclideanSq)?;
    Ok(SelectionResult {
        primary_value,
        secondary_value,
        plan,
        restricted_edge_count: m * n,
        method: SelectionMethod::LexicographicConstraint,
    })
}

/// Optimal plan under the smoothed cost d_n² = d² + (1/n)·d_eu².
///
/// As n grows these plans converge to the selection Π(μ,ν): the d²-cost
/// excess over the primary optimum and the d_eu²-cost shortfall against the
/// secondary optimum both shrink to zero.
pub fn smoothed_plan(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    generators: &VectorSet,
    n: u32,
) -> Result<TransportPlan> {
    let cost = CostSpec::smoothed(generators.clone(), n)?;
    Ok(solve_kantorovich(mu, nu, &cost)?.plan)
}

/// Double-monotonicity audit per support pair.
#[derive(Debug, Clone, Serialize)]
pub struct DoubleMonotonicityReport {
    /// Worst margin of `d²(x,y′)+d²(x′,y) − d²(x,y) − d²(x′,y′)` (negative =
    /// violation of the primary condition).
    pub worst_monot1: f64,
    pub witness_monot1: Vec<(usize, usize)>,
    /// Worst conditional Euclidean margin over pairs where the primary
    /// condition is tight; `None` when no pair is tight.
    pub worst_monot2: Option<f64>,
    pub witness_monot2: Vec<(usize, usize)>,
    pub pairs_checked: usize,
    pub tight_pairs_checked: usize,
}

impl DoubleMonotonicityReport {
    /// True when no margin is below `-tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.worst_monot1 >= -tol && self.worst_monot2.is_none_or(|m| m >= -tol)
    }
}

/// Exhaustively checks, over all pairs of support entries, the primary
/// monotonicity inequality and — where the primary inequality is tight within
/// `tol` — the conditional Euclidean inequality.
pub fn check_double_monotonicity(
    plan: &TransportPlan,
    generators: &VectorSet,
    tol: f64,
) -> Result<DoubleMonotonicityReport> {
    let primary = CostSpec::CrystallineSq(generators.clone());
    let entries = plan.entries();
    let d2 = |i: usize, j: usize| -> Result<f64> {
        Ok(primary
            .cost_by_index(plan.source().atom(i), plan.target().atom(j), i, j)?
            .finite()
            .expect("crystalline cost is always finite"))
    };
    let eu2 = |i: usize, j: usize| -> f64 {
        plan.source()
            .atom(i)
            .iter()
            .zip(plan.target().atom(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };

    let mut report = DoubleMonotonicityReport {
        worst_monot1: f64::INFINITY,
        witness_monot1: Vec::new(),
        worst_monot2: None,
        witness_monot2: Vec::new(),
        pairs_checked: 0,
        tight_pairs_checked: 0,
    };

    for a in 0..entries.len() {
        for b in a + 1..entries.len() {
            let (i, j) = (entries[a].source_index, entries[a].target_index);
            let (ip, jp) = (entries[b].source_index, entries[b].target_index);
            let direct = d2(i, j)? + d2(ip, jp)?;
            let crossed = d2(i, jp)? + d2(ip, j)?;
            let margin1 = crossed - direct;
            report.pairs_checked += 1;
            if margin1 < report.worst_monot1 {
                report.worst_monot1 = margin1;
                report.witness_monot1 = vec![(i, j), (ip, jp)];
            }
            if margin1.abs() <= tol {
                let margin2 = eu2(i, jp) + eu2(ip, j) - eu2(i, j) - eu2(ip, jp);
                report.tight_pairs_checked += 1;
                if report.worst_monot2.is_none_or(|w| margin2 < w) {
                    report.worst_monot2 = Some(margin2);
                    report.witness_monot2 = vec![(i, j), (ip, jp)];
                }
            }
        }
    }
    if !report.worst_monot1.is_finite() {
        report.worst_monot1 = 0.0;
    }
    Ok(report)
}

/// Map-inducedness audit: how far the plan is from being a transport map.
#[derive(Debug, Clone, Serialize)]
pub struct MapReport {
    /// Mass fraction of source atoms whose targets spread beyond the
    /// diameter threshold.
    pub splitting_mass_fraction: f64,
    /// Largest conditional target diameter over source atoms.
    pub worst_diameter: f64,
    /// Source atoms coupling to more than one target.
    pub split_sources: usize,
}

/// Measures, per source atom, the Euclidean diameter of the targets it
/// couples to, and the mass fraction of source atoms whose diameter exceeds
/// `tol_diameter`.
pub fn check_map_induced(plan: &TransportPlan, tol_diameter: f64) -> MapReport {
    let m = plan.source().len();
    let mut targets: Vec<Vec<usize>> = vec![Vec::new(); m];
    for e in plan.entries() {
        targets[e.source_index].push(e.target_index);
    }
    let mut splitting_mass = 0.0;
    let mut worst = 0.0_f64;
    let mut split_sources = 0;
    for (i, tgts) in targets.iter().enumerate() {
        if tgts.len() < 2 {
            continue;
        }
        split_sources += 1;
        let mut diameter = 0.0_f64;
        for a in 0..tgts.len() {
            for b in a + 1..tgts.len() {
                let d: f64 = plan
                    .target()
                    .atom(tgts[a])
                    .iter()
                    .zip(plan.target().atom(tgts[b]))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                diameter = diameter.max(d.sqrt());
            }
        }
        worst = worst.max(diameter);
        if diameter > tol_diameter {
            splitting_mass += plan.source().weight(i);
        }
    }
    MapReport { splitting_mass_fraction: splitting_mass, worst_diameter: worst, split_sources }
}

/// Outcome of the selection-consistency check at a time pair.
#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    /// Σ |lhs − rhs| mass over the union of support pairs.
    pub discrepancy: f64,
    pub lhs_primary: f64,
    pub lhs_secondary: f64,
    pub rhs_primary: f64,
    pub rhs_secondary: f64,
    /// Binned entropies of the two pushforward marginals (the discrete
    /// stand-in for their absolute continuity).
    pub entropy_s: f64,
    pub entropy_t: f64,
}

/// Checks that pushing the reweighted selection forward along the flow to
/// times `(s, t)` lands on the selection of the pushforward marginals.
///
/// `lhs = (G_s, G_t)_#(f·Π(μ,ν))` (normalized internally) is compared with
/// `rhs = Π(lhs-marginals)` both entry-wise (total-variation discrepancy
/// over matched support pairs) and at the level of primary/secondary
/// objective values. Positions that merge under interpolation are merged
/// before comparison.
pub fn check_selection_consistency(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    generators: &VectorSet,
    weight_fn: impl Fn(&[f64], &[f64]) -> f64,
    s: f64,
    t: f64,
    grid: &GridSpec,
) -> Result<ConsistencyReport> {
    let base = select_plan(mu, nu, generators)?;
    check_selection_consistency_with_base(&base, generators, weight_fn, s, t, grid)
}

/// [`check_selection_consistency`] against an already-computed selection,
/// for callers running many weight functions or time pairs per instance.
pub fn check_selection_consistency_with_base(
    base: &SelectionResult,
    generators: &VectorSet,
    weight_fn: impl Fn(&[f64], &[f64]) -> f64,
    s: f64,
    t: f64,
    grid: &GridSpec,
) -> Result<ConsistencyReport> {
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) || s >= t {
        return Err(Error::invalid(format!("time pair must satisfy 0 <= s < t <= 1, got ({s},{t})")));
    }
    let (mu, nu) = (base.plan.source(), base.plan.target());

    // Reweighted plan masses, renormalized to total one.
    let mut masses: Vec<f64> = Vec::with_capacity(base.plan.entries().len());
    for e in base.plan.entries() {
        let f = weight_fn(mu.atom(e.source_index), nu.atom(e.target_index));
        if !f.is_finite() || f < 0.0 {
            return Err(Error::invalid("weight function must be bounded and nonnegative"));
        }
        masses.push(f * e.mass);
    }
    let total: f64 = masses.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("weight function annihilates the plan"));
    }
    for w in masses.iter_mut() {
        *w /= total;
    }

    // Pushforward pairs through (G_s, G_t), merging coincident pairs.
    let interp = |x: &[f64], y: &[f64], r: f64| -> Vec<f64> {
        x.iter().zip(y).map(|(a, b)| (1.0 - r) * a + r * b).collect()
    };
    let mut s_points = PointMerger::new();
    let mut t_points = PointMerger::new();
    let mut lhs: std::collections::BTreeMap<(usize, usize), f64> = std::collections::BTreeMap::new();
    for (e, &w) in base.plan.entries().iter().zip(&masses) {
        if w == 0.0 {
            continue;
        }
        let x = mu.atom(e.source_index);
        let y = nu.atom(e.target_index);
        let si = s_points.insert(interp(x, y, s));
        let ti = t_points.insert(interp(x, y, t));
        *lhs.entry((si, ti)).or_insert(0.0) += w;
    }

    let mut s_weights = vec![0.0; s_points.points.len()];
    let mut t_weights = vec![0.0; t_points.points.len()];
    for (&(si, ti), &w) in &lhs {
        s_weights[si] += w;
        t_weights[ti] += w;
    }
    let mu_s = DiscreteMeasure::new(s_points.points.clone(), s_weights)?;
    let mu_t = DiscreteMeasure::new(t_points.points.clone(), t_weights)?;

    let d2 = CostSpec::CrystallineSq(generators.clone());
    let mut lhs_primary = 0.0;
    let mut lhs_secondary = 0.0;
    for (&(si, ti), &w) in &lhs {
        let x = &s_points.points[si];
        let y = &t_points.points[ti];
        let dc = d2.cost(x, y)?.finite().expect("crystalline cost is always finite");
        let eu: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        lhs_primary += w * dc;
        lhs_secondary += w * eu;
    }

    let rhs = select_plan(&mu_s, &mu_t, generators)?;

    // Atom indices survive measure construction because merging already
    // happened; match supports directly.
    let mut discrepancy = 0.0;
    let mut rhs_map: std::collections::BTreeMap<(usize, usize), f64> =
        std::collections::BTreeMap::new();
    for e in rhs.plan.entries() {
        rhs_map.insert((e.source_index, e.target_index), e.mass);
    }
    let keys: std::collections::BTreeSet<(usize, usize)> =
        lhs.keys().chain(rhs_map.keys()).copied().collect();
    for key in keys {
        let a = lhs.get(&key).copied().unwrap_or(0.0);
        let b = rhs_map.get(&key).copied().unwrap_or(0.0);
        discrepancy += (a - b).abs();
    }

    let entropy_s = binned_entropy(&mu_s, grid)?;
    let entropy_t = binned_entropy(&mu_t, grid)?;

    Ok(ConsistencyReport {
        discrepancy,
        lhs_primary,
        lhs_secondary,
        rhs_primary: rhs.primary_value,
        rhs_secondary: rhs.secondary_value,
        entropy_s,
        entropy_t,
    })
}

/// Merges points within the interpolation merge tolerance, assigning stable
/// indices.
struct PointMerger {
    points: Vec<Vec<f64>>,
}

impl PointMerger {
    fn new() -> Self {
        PointMerger { points: Vec::new() }
    }

    fn insert(&mut self, p: Vec<f64>) -> usize {
        const TOL_SQ: f64 = 1e-24; // (1e-12)², Euclidean
        for (k, q) in self.points.iter().enumerate() {
            let d: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            if d <= TOL_SQ {
                return k;
            }
        }
        self.points.push(p);
        self.points.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> (DiscreteMeasure, DiscreteMeasure, VectorSet) {
        let mu = DiscreteMeasure::new(vec![vec![0.0, 0.0], vec![0.0, 1.0]], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(vec![vec![2.0, 0.0], vec![2.0, 1.0]], vec![0.5, 0.5]).unwrap();
        (mu, nu, VectorSet::linf(2))
    }

    fn is_identity(plan: &TransportPlan) -> bool {
        plan.entries().iter().all(|e| e.source_index == e.target_index)
    }

    #[test]
    fn canonical_tie_break_selects_identity() {
        let (mu, nu, v) = two_by_two();
        let result = select_plan(&mu, &nu, &v).unwrap();
        assert!((result.primary_value - 4.0).abs() < 1e-9);
        assert!((result.secondary_value - 4.0).abs() < 1e-9);
        assert!(is_identity(&result.plan));
        assert_eq!(result.restricted_edge_count, 4);
        assert_eq!(result.method, SelectionMethod::PotentialRestriction);
    }

    #[test]
    fn lexicographic_agrees_on_canonical_instance() {
        let (mu, nu, v) = two_by_two();
        let result = select_plan_lexicographic(&mu, &nu, &v, 1e-3).unwrap();
        assert!((result.primary_value - 4.0).abs() < 1e-9);
        assert!((result.secondary_value - 4.0).abs() < 1e-9);
        assert!(is_identity(&result.plan));
    }

    #[test]
    fn identical_measures_select_identity() {
        let mu = DiscreteMeasure::new(
            vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![3.0, 1.0]],
            vec![0.3, 0.3, 0.4],
        )
        .unwrap();
        let v = VectorSet::l1(2);
        let result = select_plan(&mu, &mu, &v).unwrap();
        assert!(result.primary_value.abs() < 1e-12);
        assert!(result.secondary_value.abs() < 1e-12);
        assert!(is_identity(&result.plan));
    }

    #[test]
    fn dirac_source_forces_product_plan() {
        let mu = DiscreteMeasure::dirac(vec![0.0, 0.0]);
        let nu = DiscreteMeasure::new(vec![vec![1.0, 0.0], vec![2.0, 2.0]], vec![0.25, 0.75]).unwrap();
        let v = VectorSet::linf(2);
        let result = select_plan(&mu, &nu, &v).unwrap();
        assert_eq!(result.plan.entries().len(), 2);
    }

    #[test]
    fn restrict_and_resolve_keeps_unique_plans() {
        let mu = DiscreteMeasure::new(vec![vec![0.0, 0.0], vec![5.0, 5.0]], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(vec![vec![1.0, 0.0], vec![6.0, 5.0]], vec![0.5, 0.5]).unwrap();
        let v = VectorSet::linf(2);
        let primary = solve_kantorovich(&mu, &nu, &CostSpec::CrystallineSq(v.clone())).unwrap();
        let resolved = restrict_and_resolve(
            &primary.plan,
            &primary.potentials,
            &v,
            restriction_tolerance(primary.value),
        )
        .unwrap();
        assert!(resolved.same_support(&primary.plan, 1e-9));
    }

    #[test]
    fn smoothed_plan_picks_identity_at_n10() {
        let (mu, nu, v) = two_by_two();
        let plan = smoothed_plan(&mu, &nu, &v, 10).unwrap();
        assert!(is_identity(&plan));
    }

    #[test]
    fn smoothed_costs_converge() {
        let (mu, nu, v) = two_by_two();
        let selected = select_plan(&mu, &nu, &v).unwrap();
        let primary_cost = CostSpec::CrystallineSq(v.clone());
        let mut prev_p = f64::INFINITY;
        let mut prev_s = f64::INFINITY;
        for &n in &[1u32, 10, 100, 1000] {
            let plan = smoothed_plan(&mu, &nu, &v, n).unwrap();
            let p_excess = plan.cost_under(&primary_cost).unwrap() - selected.primary_value;
            let s_excess =
                (plan.cost_under(&CostSpec::EuclideanSq).unwrap() - selected.secondary_value).abs();
            assert!(p_excess >= -1e-9);
            assert!(p_excess <= prev_p + 1e-9);
            assert!(s_excess <= prev_s + 1e-9);
            prev_p = p_excess;
            prev_s = s_excess;
        }
        assert!(prev_p <= 1e-3 * (1.0 + selected.secondary_value));
        assert!(prev_s <= 1e-3 * (1.0 + selected.secondary_value));
    }

    #[test]
    fn eps_weight_above_bound_rejected() {
        let (mu, nu, v) = two_by_two();
        // Shift one target atom so vertex values differ and a finite bound exists.
        let nu = DiscreteMeasure::new(
            vec![vec![2.0, 0.0], vec![2.0, 1.5]],
            nu.weights().to_vec(),
        )
        .unwrap();
        let bound = lexicographic_eps_bound(&mu, &nu, &v).unwrap();
        if let Some(b) = bound {
            let err = select_plan_lexicographic(&mu, &nu, &v, b * 2.0).unwrap_err();
            assert!(err.to_string().contains("safety bound"));
        }
    }

    #[test]
    fn double_monotonicity_on_selected_plan() {
        let (mu, nu, v) = two_by_two();
        let result = select_plan(&mu, &nu, &v).unwrap();
        let report = check_double_monotonicity(&result.plan, &v, 1e-7).unwrap();
        assert!(report.passes(1e-7));
        // Identity coupling: the cross pair is tight and the Euclidean margin
        // is 5+5-4-4 = 2.
        assert!((report.worst_monot1 - 0.0).abs() < 1e-12);
        assert!((report.worst_monot2.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn double_monotonicity_flags_swap() {
        let (mu, nu, _) = two_by_two();
        let v = VectorSet::linf(2);
        let swap =
            TransportPlan::new(mu, nu, vec![(0, 1, 0.5), (1, 0, 0.5)]).unwrap();
        let report = check_double_monotonicity(&swap, &v, 1e-7).unwrap();
        assert!(!report.passes(1e-7));
        assert!((report.worst_monot2.unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_entry_plan_is_vacuously_monotone() {
        let mu = DiscreteMeasure::dirac(vec![0.0, 0.0]);
        let nu = DiscreteMeasure::dirac(vec![3.0, 1.0]);
        let v = VectorSet::linf(2);
        let plan = TransportPlan::new(mu, nu, vec![(0, 0, 1.0)]).unwrap();
        let report = check_double_monotonicity(&plan, &v, 1e-7).unwrap();
        assert_eq!(report.worst_monot1, 0.0);
        assert!(report.worst_monot2.is_none());
        assert!(report.passes(0.0));
    }

    #[test]
    fn map_report_on_map_and_product() {
        let (mu, nu, v) = two_by_two();
        let selected = select_plan(&mu, &nu, &v).unwrap();
        let report = check_map_induced(&selected.plan, 1e-9);
        assert_eq!(report.splitting_mass_fraction, 0.0);
        assert_eq!(report.split_sources, 0);

        let product = TransportPlan::new(
            mu,
            nu,
            vec![(0, 0, 0.25), (0, 1, 0.25), (1, 0, 0.25), (1, 1, 0.25)],
        )
        .unwrap();
        let report = check_map_induced(&product, 1e-9);
        assert!((report.splitting_mass_fraction - 1.0).abs() < 1e-12);
        assert!((report.worst_diameter - 1.0).abs() < 1e-12);
    }

    #[test]
    fn consistency_identity_restriction() {
        let (mu, nu, v) = two_by_two();
        let grid = GridSpec::new(vec![-1.0, -1.0], vec![3.0, 2.0], vec![8, 8]).unwrap();
        let report =
            check_selection_consistency(&mu, &nu, &v, |_, _| 1.0, 0.0, 1.0, &grid).unwrap();
        assert!(report.discrepancy < 1e-12);
        assert!((report.lhs_secondary - report.rhs_secondary).abs() < 1e-9);
    }

    #[test]
    fn consistency_interior_times() {
        let (mu, nu, v) = two_by_two();
        let grid = GridSpec::new(vec![-1.0, -1.0], vec![3.0, 2.0], vec![8, 8]).unwrap();
        let report =
            check_selection_consistency(&mu, &nu, &v, |_, _| 1.0, 0.25, 0.75, &grid).unwrap();
        assert!(report.discrepancy < 1e-7, "discrepancy {}", report.discrepancy);
    }

    #[test]
    fn consistency_single_entry_indicator() {
        let (mu, nu, v) = two_by_two();
        let grid = GridSpec::new(vec![-1.0, -1.0], vec![3.0, 2.0], vec![8, 8]).unwrap();
        // Indicator of the (0,0)->(2,0) support entry, renormalized internally.
        let report = check_selection_consistency(
            &mu,
            &nu,
            &v,
            |x, _| if x[1].abs() < 1e-9 { 1.0 } else { 0.0 },
            0.25,
            0.75,
            &grid,
        )
        .unwrap();
        assert!(report.discrepancy < 1e-12);
    }

    #[test]
    fn consistency_rejects_bad_times() {
        let (mu, nu, v) = two_by_two();
        let grid = GridSpec::new(vec![-1.0, -1.0], vec![3.0, 2.0], vec![8, 8]).unwrap();
        assert!(
            check_selection_consistency(&mu, &nu, &v, |_, _| 1.0, 0.75, 0.25, &grid).is_err()
        );
    }
}
