//! Exact discrete Kantorovich solver on bipartite supports, dual potential
//! extraction, Wasserstein distance, and cyclical-monotonicity audits.

mod simplex;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{CostSpec, CostValue};
use crate::measures::DiscreteMeasure;

pub(crate) use simplex::CostTable;
use simplex::{SimplexError, SimplexOptions};

/// Marginal sums of a plan must match the measures within this tolerance.
pub const MARGINAL_TOL: f64 = 1e-9;
/// Dual feasibility/tightness tolerance.
pub const DUAL_TOL: f64 = 1e-7;

/// One sparse coupling entry: mass moved from a source atom to a target atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanEntry {
    pub source_index: usize,
    pub target_index: usize,
    pub mass: f64,
}

/// Sparse coupling over support pairs with prescribed marginals.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    source: DiscreteMeasure,
    target: DiscreteMeasure,
    entries: Vec<PlanEntry>,
}

impl TransportPlan {
    /// Builds a plan, checking positivity and marginal conservation.
    pub fn new(
        source: DiscreteMeasure,
        target: DiscreteMeasure,
        entries: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if source.dim() != target.dim() {
            return Err(Error::DimensionMismatch(source.dim(), target.dim()));
        }
        let mut kept = Vec::with_capacity(entries.len());
        for (i, j, mass) in entries {
            if i >= source.len() || j >= target.len() {
                return Err(Error::invalid(format!("entry ({i},{j}) out of range")));
            }
            if !mass.is_finite() || mass <= 0.0 {
                return Err(Error::invalid(format!("entry ({i},{j}) has non-positive mass {mass}")));
            }
            kept.push(PlanEntry { source_index: i, target_index: j, mass });
        }
        let plan = TransportPlan { source, target, entries: kept };
        plan.check_marginals()?;
        Ok(plan)
    }

    fn check_marginals(&self) -> Result<()> {
        let mut row = vec![0.0; self.source.len()];
        let mut col = vec![0.0; self.target.len()];
        for e in &self.entries {
            row[e.source_index] += e.mass;
            col[e.target_index] += e.mass;
        }
        for (i, (&have, &want)) in row.iter().zip(self.source.weights()).enumerate() {
            if (have - want).abs() > MARGINAL_TOL {
                return Err(Error::invalid(format!(
                    "row {i} sums to {have}, source weight is {want}"
                )));
            }
        }
        for (j, (&have, &want)) in col.iter().zip(self.target.weights()).enumerate() {
            if (have - want).abs() > MARGINAL_TOL {
                return Err(Error::invalid(format!(
                    "column {j} sums to {have}, target weight is {want}"
                )));
            }
        }
        Ok(())
    }

    pub fn source(&self) -> &DiscreteMeasure {
        &self.source
    }

    pub fn target(&self) -> &DiscreteMeasure {
        &self.target
    }

    pub fn entries(&self) -> &[PlanEntry] {
        &self.entries
    }

    /// Total cost of the plan under the given cost; errors on forbidden pairs.
    pub fn cost_under(&self, cost: &CostSpec) -> Result<f64> {
        let mut total = 0.0;
        for e in &self.entries {
            let c = cost
                .cost_by_index(
                    self.source.atom(e.source_index),
                    self.target.atom(e.target_index),
                    e.source_index,
                    e.target_index,
                )?
                .finite()
                .ok_or_else(|| {
                    Error::invalid(format!(
                        "plan entry ({},{}) crosses a forbidden edge",
                        e.source_index, e.target_index
                    ))
                })?;
            total += e.mass * c;
        }
        Ok(total)
    }

    /// Entries as plain tuples, sorted by (source, target).
    pub fn entry_tuples(&self) -> Vec<(usize, usize, f64)> {
        self.entries.iter().map(|e| (e.source_index, e.target_index, e.mass)).collect()
    }

    /// Serializable record per the wire format `{"entries": ..., "value": v}`.
    pub fn to_record(&self, value: f64) -> PlanRecord {
        PlanRecord {
            entries: self.entries.iter().map(|e| (e.source_index, e.target_index, e.mass)).collect(),
            value,
        }
    }

    /// True when both plans couple the same pairs with the same masses.
    pub fn same_support(&self, other: &TransportPlan, mass_tol: f64) -> bool {
        if self.entries.len() != other.entries.len() {
            return false;
        }
        let mut a = self.entry_tuples();
        let mut b = other.entry_tuples();
        a.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        b.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        a.iter()
            .zip(&b)
            .all(|(x, y)| x.0 == y.0 && x.1 == y.1 && (x.2 - y.2).abs() <= mass_tol)
    }
}

/// Wire format for a transport plan.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct PlanRecord {
    pub entries: Vec<(usize, usize, f64)>,
    pub value: f64,
}

/// Kantorovich potentials: `phi` per source atom, `psi` per target atom.
#[derive(Debug, Clone, Serialize)]
pub struct DualPotentials {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl DualPotentials {
    /// Checks feasibility on all finite-cost pairs and tightness on the
    /// plan's support.
    pub fn validate(&self, plan: &TransportPlan, cost: &CostSpec) -> Result<()> {
        let (mu, nu) = (plan.source(), plan.target());
        for i in 0..mu.len() {
            for j in 0..nu.len() {
                if let CostValue::Finite(c) =
                    cost.cost_by_index(mu.atom(i), nu.atom(j), i, j)?
                {
                    if self.phi[i] + self.psi[j] > c + DUAL_TOL {
                        return Err(Error::invalid(format!(
                            "dual infeasible on pair ({i},{j}): {} > {c}",
                            self.phi[i] + self.psi[j]
                        )));
                    }
                }
            }
        }
        for e in plan.entries() {
            let (i, j) = (e.source_index, e.target_index);
            let c = cost
                .cost_by_index(mu.atom(i), nu.atom(j), i, j)?
                .finite()
                .ok_or_else(|| Error::invalid("support entry on forbidden edge"))?;
            if self.phi[i] + self.psi[j] < c - DUAL_TOL {
                return Err(Error::invalid(format!(
                    "dual not tight on support pair ({i},{j})"
                )));
            }
        }
        Ok(())
    }

    /// `Σ phi dμ + Σ psi dν`.
    pub fn objective(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let a: f64 = self.phi.iter().zip(mu.weights()).map(|(p, w)| p * w).sum();
        let b: f64 = self.psi.iter().zip(nu.weights()).map(|(p, w)| p * w).sum();
        a + b
    }
}

/// Result of an exact Kantorovich solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub plan: TransportPlan,
    pub value: f64,
    pub potentials: DualPotentials,
}

/// Knobs and diagnostics for a solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Pivot cap; defaults to `50·(m+n)²`.
    pub iteration_cap: Option<usize>,
    /// Record the primal/dual objective after every pivot.
    pub collect_iterates: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { iteration_cap: None, collect_iterates: false }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Iterate {
    pub primal_value: f64,
    pub dual_value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SolveDiagnostics {
    pub pivots: usize,
    pub degenerate_pivots: usize,
    pub bland_activated: bool,
    pub iterates: Vec<Iterate>,
}

pub(crate) fn build_cost_table(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
) -> Result<CostTable> {
    let (m, n) = (mu.len(), nu.len());
    let mut vals = vec![0.0; m * n];
    let mut forbidden: Option<Vec<bool>> = None;
    for i in 0..m {
        for j in 0..n {
            match cost.cost_by_index(mu.atom(i), nu.atom(j), i, j)? {
                CostValue::Finite(c) => vals[i * n + j] = c,
                CostValue::Forbidden => {
                    forbidden.get_or_insert_with(|| vec![false; m * n])[i * n + j] = true;
                }
            }
        }
    }
    Ok(CostTable { m, n, vals, forbidden })
}

/// Solves the Kantorovich problem between `mu` and `nu`.
///
/// Returns a vertex (basic) optimal plan, its cost, and Kantorovich
/// potentials normalized so `phi[0] = 0`, satisfying strong duality within
/// [`DUAL_TOL`].
pub fn solve_kantorovich(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
) -> Result<Solution> {
    solve_kantorovich_with(mu, nu, cost, &SolveOptions::default()).map(|(s, _)| s)
}

/// [`solve_kantorovich`] with explicit options and diagnostics.
pub fn solve_kantorovich_with(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    options: &SolveOptions,
) -> Result<(Solution, SolveDiagnostics)> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch(mu.dim(), nu.dim()));
    }
    let table = build_cost_table(mu, nu, cost)?;
    solve_table_with(mu, nu, table, options)
}

/// Core solve on a prebuilt cost table; used by selection for weighted costs
/// that have no [`CostSpec`] representation.
pub(crate) fn solve_table_with(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    table: CostTable,
    options: &SolveOptions,
) -> Result<(Solution, SolveDiagnostics)> {
    // A source atom with no allowed edge can never be routed.
    if table.forbidden.is_some() {
        for i in 0..table.m {
            if (0..table.n).all(|j| table.is_forbidden(i, j)) {
                return Err(Error::InfeasibleRestricted { source_index: i });
            }
        }
    }

    let cap = options
        .iteration_cap
        .unwrap_or_else(|| 50 * (table.m + table.n) * (table.m + table.n));
    let outcome = simplex::solve(
        mu.weights(),
        nu.weights(),
        &table,
        &SimplexOptions { iteration_cap: cap, collect_iterates: options.collect_iterates },
    )
    .map_err(|SimplexError::IterationCap { iterations }| Error::IterationCap { iterations })?;

    if outcome.forbidden_mass > MARGINAL_TOL {
        return Err(Error::InfeasibleRestricted {
            source_index: outcome.violating_source.unwrap_or(0),
        });
    }

    let plan = TransportPlan::new(mu.clone(), nu.clone(), outcome.entries)?;
    debug_assert!(plan.entries().len() <= mu.len() + nu.len() - 1);
    let potentials = reconstruct_potentials(&plan, &table)?;
    let value = outcome.value;

    let dual_obj = potentials.objective(mu, nu);
    if (dual_obj - value).abs() > DUAL_TOL * (1.0 + value.abs()) {
        return Err(Error::invalid(format!(
            "internal: strong duality violated ({dual_obj} vs {value})"
        )));
    }

    let diagnostics = SolveDiagnostics {
        pivots: outcome.pivots,
        degenerate_pivots: outcome.degenerate_pivots,
        bland_activated: outcome.bland_activated,
        iterates: outcome
            .iterates
            .into_iter()
            .map(|r| Iterate { primal_value: r.primal_value, dual_value: r.dual_value })
            .collect(),
    };
    Ok((Solution { plan, value, potentials }, diagnostics))
}

/// Rebuilds optimal potentials from the optimal plan alone.
///
/// Tightness `phi_i + psi_j = c_ij` is propagated over each connected
/// component of the support graph; the per-component additive freedom is then
/// fixed by the difference constraints `phi_i + psi_j ≤ c_ij` on allowed
/// cross-component pairs (Bellman–Ford on the component graph). Finally the
/// whole dual is shifted so `phi[0] = 0`.
fn reconstruct_potentials(plan: &TransportPlan, table: &CostTable) -> Result<DualPotentials> {
    let (m, n) = (table.m, table.n);
    let nodes = m + n;
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes];
    for e in plan.entries() {
        let c = table.val(e.source_index, e.target_index);
        adj[e.source_index].push((m + e.target_index, c));
        adj[m + e.target_index].push((e.source_index, c));
    }

    let mut phi = vec![0.0; m];
    let mut psi = vec![0.0; n];
    let mut component = vec![usize::MAX; nodes];
    let mut comp_count = 0usize;
    let mut queue = Vec::new();
    for start in 0..nodes {
        if component[start] != usize::MAX {
            continue;
        }
        let cid = comp_count;
        comp_count += 1;
        component[start] = cid;
        if start < m {
            phi[start] = 0.0;
        } else {
            psi[start - m] = 0.0;
        }
        queue.clear();
        queue.push(start);
        let mut head = 0;
        while head < queue.len() {
            let node = queue[head];
            head += 1;
            let node_pot = if node < m { phi[node] } else { psi[node - m] };
            for &(other, c) in &adj[node] {
                if component[other] != usize::MAX {
                    continue;
                }
                component[other] = cid;
                if other < m {
                    phi[other] = c - node_pot;
                } else {
                    psi[other - m] = c - node_pot;
                }
                queue.push(other);
            }
        }
    }

    if comp_count > 1 {
        // delta[a] - delta[b] <= slack(i in a, j in b) for every allowed pair.
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        let mut slack = vec![f64::INFINITY; comp_count * comp_count];
        for i in 0..m {
            for j in 0..n {
                if table.is_forbidden(i, j) {
                    continue;
                }
                let (a, b) = (component[i], component[m + j]);
                if a == b {
                    continue;
                }
                let s = table.val(i, j) - phi[i] - psi[j];
                let k = a * comp_count + b;
                if s < slack[k] {
                    slack[k] = s;
                }
            }
        }
        for a in 0..comp_count {
            for b in 0..comp_count {
                let s = slack[a * comp_count + b];
                if s.is_finite() {
                    edges.push((a, b, s));
                }
            }
        }
        let mut delta = vec![0.0; comp_count];
        for _ in 0..comp_count {
            let mut changed = false;
            for &(a, b, s) in &edges {
                // delta[a] <= delta[b] + s
                if delta[a] > delta[b] + s + 1e-15 {
                    delta[a] = delta[b] + s;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for i in 0..m {
            phi[i] += delta[component[i]];
        }
        for j in 0..n {
            psi[j] -= delta[component[m + j]];
        }
    }

    // Normalize: potentials are defined up to an additive constant.
    let shift = phi[0];
    for p in phi.iter_mut() {
        *p -= shift;
    }
    for p in psi.iter_mut() {
        *p += shift;
    }

    for i in 0..m {
        for j in 0..n {
            if !table.is_forbidden(i, j) && phi[i] + psi[j] > table.val(i, j) + DUAL_TOL {
                return Err(Error::invalid(format!(
                    "internal: reconstructed dual infeasible on pair ({i},{j})"
                )));
            }
        }
    }
    Ok(DualPotentials { phi, psi })
}

/// `W₂²(μ,ν)` under the given squared-distance cost.
pub fn wasserstein_sq(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
) -> Result<f64> {
    Ok(solve_kantorovich(mu, nu, cost)?.value)
}

/// Cyclical-monotonicity audit report.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    /// Most negative cycle margin found (negative = violation).
    pub worst_margin: f64,
    /// Support pairs of the worst cycle, in cycle order.
    pub witness_cycle: Vec<(usize, usize)>,
    pub pairs_checked: usize,
    pub cycles_checked: usize,
}

/// Checks c-cyclical monotonicity of a plan's support: exhaustively over all
/// support-pair swaps (cycles of length 2) and over `trials` random cycles of
/// each length in `3..=max_cycle`.
///
/// The margin of a cycle is `Σ c(x_i, y_{i+1}) − Σ c(x_i, y_i)`; optimal
/// plans keep every margin nonnegative.
pub fn audit_cyclical_monotonicity(
    plan: &TransportPlan,
    cost: &CostSpec,
    max_cycle: usize,
    trials: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    if max_cycle < 2 {
        return Err(Error::invalid("max_cycle must be at least 2"));
    }
    let entries = plan.entries();
    let atom_cost = |i: usize, j: usize| -> Result<f64> {
        cost.cost_by_index(plan.source().atom(i), plan.target().atom(j), i, j)?
            .finite()
            .ok_or_else(|| Error::invalid("audit encountered a forbidden pair"))
    };

    let mut worst = f64::INFINITY;
    let mut witness = Vec::new();
    let mut pairs_checked = 0usize;
    let mut cycles_checked = 0usize;

    for a in 0..entries.len() {
        for b in a + 1..entries.len() {
            let (ea, eb) = (&entries[a], &entries[b]);
            let direct = atom_cost(ea.source_index, ea.target_index)?
                + atom_cost(eb.source_index, eb.target_index)?;
            let swapped = atom_cost(ea.source_index, eb.target_index)?
                + atom_cost(eb.source_index, ea.target_index)?;
            let margin = swapped - direct;
            pairs_checked += 1;
            if margin < worst {
                worst = margin;
                witness = vec![
                    (ea.source_index, ea.target_index),
                    (eb.source_index, eb.target_index),
                ];
            }
        }
    }

    if entries.len() >= 3 && max_cycle >= 3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..trials {
            let len = rng.random_range(3..=max_cycle.min(entries.len()));
            let mut picked: Vec<usize> = Vec::with_capacity(len);
            while picked.len() < len {
                let k = rng.random_range(0..entries.len());
                if !picked.contains(&k) {
                    picked.push(k);
                }
            }
            let mut direct = 0.0;
            let mut shifted = 0.0;
            for (t, &k) in picked.iter().enumerate() {
                let e = &entries[k];
                let next = &entries[picked[(t + 1) % len]];
                direct += atom_cost(e.source_index, e.target_index)?;
                shifted += atom_cost(e.source_index, next.target_index)?;
            }
            let margin = shifted - direct;
            cycles_checked += 1;
            if margin < worst {
                worst = margin;
                witness = picked
                    .iter()
                    .map(|&k| (entries[k].source_index, entries[k].target_index))
                    .collect();
            }
        }
    }

    if !worst.is_finite() {
        // Single-entry plans have no nontrivial cycles.
        worst = 0.0;
    }
    Ok(MonotonicityReport {
        worst_margin: worst,
        witness_cycle: witness,
        pairs_checked,
        cycles_checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VectorSet;

    fn linf() -> CostSpec {
        CostSpec::CrystallineSq(VectorSet::linf(2))
    }

    fn two_by_two() -> (DiscreteMeasure, DiscreteMeasure) {
        let mu = DiscreteMeasure::new(vec![vec![0.0, 0.0], vec![0.0, 1.0]], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(vec![vec![2.0, 0.0], vec![2.0, 1.0]], vec![0.5, 0.5]).unwrap();
        (mu, nu)
    }

    #[test]
    fn single_pair_solve() {
        let mu = DiscreteMeasure::dirac(vec![0.0, 0.0]);
        let nu = DiscreteMeasure::dirac(vec![1.0, 0.0]);
        let sol = solve_kantorovich(&mu, &nu, &linf()).unwrap();
        assert_eq!(sol.plan.entries().len(), 1);
        assert!((sol.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_couplings_cost_four() {
        let (mu, nu) = two_by_two();
        let sol = solve_kantorovich(&mu, &nu, &linf()).unwrap();
        assert!((sol.value - 4.0).abs() < 1e-12);
        sol.potentials.validate(&sol.plan, &linf()).unwrap();
        let dual = sol.potentials.objective(&mu, &nu);
        assert!((dual - sol.value).abs() < 1e-7);
        assert_eq!(sol.potentials.phi[0], 0.0);
    }

    #[test]
    fn identity_solve_is_free() {
        let mu = DiscreteMeasure::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![2.0, 2.0]],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        let sol = solve_kantorovich(&mu, &mu, &linf()).unwrap();
        assert!(sol.value.abs() < 1e-12);
        for e in sol.plan.entries() {
            assert_eq!(e.source_index, e.target_index);
        }
    }

    #[test]
    fn wasserstein_is_symmetric() {
        let (mu, nu) = two_by_two();
        let a = wasserstein_sq(&mu, &nu, &linf()).unwrap();
        let b = wasserstein_sq(&nu, &mu, &linf()).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn l1_distance_value() {
        let mu = DiscreteMeasure::dirac(vec![0.0, 0.0]);
        let nu = DiscreteMeasure::dirac(vec![1.0, 1.0]);
        let l1 = CostSpec::CrystallineSq(VectorSet::l1(2));
        assert!((wasserstein_sq(&mu, &nu, &l1).unwrap() - 4.0).abs() < 1e-12);
        assert!((wasserstein_sq(&mu, &nu, &linf()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn optimal_plan_is_cyclically_monotone() {
        let (mu, nu) = two_by_two();
        let sol = solve_kantorovich(&mu, &nu, &CostSpec::EuclideanSq).unwrap();
        let report =
            audit_cyclical_monotonicity(&sol.plan, &CostSpec::EuclideanSq, 4, 100, 1).unwrap();
        assert!(report.worst_margin >= -1e-7);
    }

    #[test]
    fn swapped_plan_fails_euclidean_audit() {
        let (mu, nu) = two_by_two();
        let swap = TransportPlan::new(
            mu.clone(),
            nu.clone(),
            vec![(0, 1, 0.5), (1, 0, 0.5)],
        )
        .unwrap();
        let report =
            audit_cyclical_monotonicity(&swap, &CostSpec::EuclideanSq, 2, 0, 1).unwrap();
        assert!((report.worst_margin - (-2.0)).abs() < 1e-12, "margin {}", report.worst_margin);
        assert_eq!(report.witness_cycle.len(), 2);
    }

    #[test]
    fn single_entry_plan_audit_is_vacuous() {
        let mu = DiscreteMeasure::dirac(vec![0.0, 0.0]);
        let nu = DiscreteMeasure::dirac(vec![1.0, 0.0]);
        let plan = TransportPlan::new(mu, nu, vec![(0, 0, 1.0)]).unwrap();
        let report = audit_cyclical_monotonicity(&plan, &linf(), 4, 50, 1).unwrap();
        assert_eq!(report.worst_margin, 0.0);
        assert_eq!(report.pairs_checked, 0);
    }

    #[test]
    fn restricted_solve_on_tight_set() {
        use crate::geometry::RestrictionData;
        let (mu, nu) = two_by_two();
        // phi = (0,0), psi = (4,4): all four pairs are tight at d∞² = 4.
        let restricted = CostSpec::Restricted {
            generators: VectorSet::linf(2),
            data: RestrictionData {
                phi: vec![0.0, 0.0],
                psi: vec![4.0, 4.0],
                tolerance: 1e-7,
            },
        };
        let sol = solve_kantorovich(&mu, &nu, &restricted).unwrap();
        // Euclidean² on the tight set picks the identity coupling (4 < 5).
        assert!((sol.value - 4.0).abs() < 1e-9);
        for e in sol.plan.entries() {
            assert_eq!(e.source_index, e.target_index);
        }
    }

    #[test]
    fn infeasible_restricted_names_a_source() {
        use crate::geometry::RestrictionData;
        let (mu, nu) = two_by_two();
        let restricted = CostSpec::Restricted {
            generators: VectorSet::linf(2),
            data: RestrictionData {
                phi: vec![f64::NEG_INFINITY, 0.0],
                psi: vec![4.0, 4.0],
                tolerance: 1e-7,
            },
        };
        match solve_kantorovich(&mu, &nu, &restricted) {
            Err(Error::InfeasibleRestricted { source_index }) => assert_eq!(source_index, 0),
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn weak_duality_along_iterates() {
        let mu = DiscreteMeasure::new(
            vec![vec![0.0, 0.0], vec![1.0, 3.0], vec![4.0, 1.0], vec![2.0, 2.0]],
            vec![0.25, 0.25, 0.25, 0.25],
        )
        .unwrap();
        let nu = DiscreteMeasure::new(
            vec![vec![3.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]],
            vec![0.5, 0.25, 0.25],
        )
        .unwrap();
        let (sol, diag) = solve_kantorovich_with(
            &mu,
            &nu,
            &linf(),
            &SolveOptions { iteration_cap: None, collect_iterates: true },
        )
        .unwrap();
        for it in &diag.iterates {
            assert!(it.dual_value <= it.primal_value + 1e-7);
        }
        if let Some(last) = diag.iterates.last() {
            assert!((last.primal_value - last.dual_value).abs() < 1e-7);
            assert!((last.primal_value - sol.value).abs() < 1e-9);
        }
    }

    #[test]
    fn plan_with_extra_entries_is_constructible() {
        let (mu, nu) = two_by_two();
        // Product coupling: four entries, valid marginals.
        let plan = TransportPlan::new(
            mu,
            nu,
            vec![(0, 0, 0.25), (0, 1, 0.25), (1, 0, 0.25), (1, 1, 0.25)],
        )
        .unwrap();
        assert_eq!(plan.entries().len(), 4);
    }

    #[test]
    fn bad_marginals_rejected() {
        let (mu, nu) = two_by_two();
        assert!(TransportPlan::new(mu, nu, vec![(0, 0, 0.5), (1, 1, 0.25), (1, 0, 0.5)]).is_err());
    }

    #[test]
    fn iteration_cap_errors() {
        let (mu, nu) = two_by_two();
        // A cap of zero still succeeds when the initial basis is already
        // optimal; otherwise the error must carry the pivot count.
        match solve_kantorovich_with(
            &mu,
            &nu,
            &linf(),
            &SolveOptions { iteration_cap: Some(0), collect_iterates: false },
        ) {
            Ok(_) => {}
            Err(Error::IterationCap { iterations }) => assert!(iterations >= 1),
            Err(other) => panic!("unexpected error {other:?}"),
        }
    }
}
