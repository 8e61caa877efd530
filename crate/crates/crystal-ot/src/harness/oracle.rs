//! Brute-force transport-polytope oracle.
//!
//! Every vertex of the transport polytope is the basic solution of some
//! spanning tree of the complete bipartite support graph. Enumerating all
//! spanning trees (with cycle pruning), solving each tree's flows by leaf
//! elimination, and keeping the feasible ones yields every vertex — an
//! evaluation path fully independent of the simplex solver.

use crate::error::{Error, Result};
use crate::geometry::CostSpec;
use crate::measures::DiscreteMeasure;

/// Largest support size the oracle enumerates per side.
pub const ORACLE_LIMIT: usize = 5;

/// Differences below this merge primary vertex values into one level.
const VALUE_MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    /// Minimum primary cost over all couplings.
    pub pi1_value: f64,
    /// Minimum secondary cost over the primary-optimal vertices.
    pub pi2_value: f64,
    /// All secondary-optimal vertices (within tolerance), deduplicated, as
    /// sorted `(i, j, mass)` entry lists.
    pub pi2_plans: Vec<Vec<(usize, usize, f64)>>,
    /// Feasible vertices visited (spanning trees with nonnegative flows).
    pub feasible_vertices: usize,
    /// Sorted distinct primary vertex values (merged within 1e-9).
    pub distinct_primary_values: Vec<f64>,
    /// Smallest gap between consecutive distinct primary values.
    pub smallest_primary_gap: Option<f64>,
}

/// Enumerates all basic feasible solutions and returns the lexicographic
/// optimum value pair together with every plan attaining it.
pub fn oracle_vertex_enumeration(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    primary: &CostSpec,
    secondary: &CostSpec,
) -> Result<OracleOutcome> {
    let (m, n) = (mu.len(), nu.len());
    if m > ORACLE_LIMIT || n > ORACLE_LIMIT {
        return Err(Error::OracleTooLarge { rows: m, cols: n, limit: ORACLE_LIMIT });
    }

    let mut cost_p = vec![0.0; m * n];
    let mut cost_s = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            cost_p[i * n + j] = primary
                .cost_by_index(mu.atom(i), nu.atom(j), i, j)?
                .finite()
                .ok_or_else(|| Error::invalid("oracle requires finite primary costs"))?;
            cost_s[i * n + j] = secondary
                .cost_by_index(mu.atom(i), nu.atom(j), i, j)?
                .finite()
                .ok_or_else(|| Error::invalid("oracle requires finite secondary costs"))?;
        }
    }

    let mut enumerator = TreeEnumerator::new(m, n);
    let mut primary_values: Vec<f64> = Vec::new();
    let mut best_p = f64::INFINITY;
    let mut best_s = f64::INFINITY;
    let mut best_plans: Vec<Vec<(usize, usize, f64)>> = Vec::new();
    let mut feasible = 0usize;

    enumerator.for_each_tree(&mut |edges: &[usize]| {
        let Some(flows) = solve_tree_flows(m, n, edges, mu.weights(), nu.weights()) else {
            return;
        };
        feasible += 1;
        let mut p = 0.0;
        let mut s = 0.0;
        for (&e, &f) in edges.iter().zip(&flows) {
            p += f * cost_p[e];
            s += f * cost_s[e];
        }
        primary_values.push(p);
        if p < best_p - VALUE_MERGE_TOL {
            best_p = p;
            best_s = f64::INFINITY;
            best_plans.clear();
        }
        if p <= best_p + VALUE_MERGE_TOL {
            if p < best_p {
                best_p = p;
            }
            if s < best_s - VALUE_MERGE_TOL {
                best_s = s;
                best_plans.clear();
            }
            if s <= best_s + VALUE_MERGE_TOL {
                if s < best_s {
                    best_s = s;
                }
                let mut entries: Vec<(usize, usize, f64)> = edges
                    .iter()
                    .zip(&flows)
                    .filter(|(_, &f)| f > 1e-12)
                    .map(|(&e, &f)| (e / n, e % n, f))
                    .collect();
                entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
                let duplicate = best_plans.iter().any(|existing| {
                    existing.len() == entries.len()
                        && existing.iter().zip(&entries).all(|(a, b)| {
                            a.0 == b.0 && a.1 == b.1 && (a.2 - b.2).abs() <= VALUE_MERGE_TOL
                        })
                });
                if !duplicate {
                    best_plans.push(entries);
                }
            }
        }
    });

    if feasible == 0 {
        return Err(Error::invalid("no feasible vertex found (internal)"));
    }

    primary_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut distinct: Vec<f64> = Vec::new();
    for v in primary_values {
        if distinct.last().is_none_or(|&last| v - last > VALUE_MERGE_TOL) {
            distinct.push(v);
        }
    }
    let smallest_gap = distinct.windows(2).map(|w| w[1] - w[0]).fold(None, |acc: Option<f64>, g| {
        Some(acc.map_or(g, |a| a.min(g)))
    });

    Ok(OracleOutcome {
        pi1_value: best_p,
        pi2_value: best_s,
        pi2_plans: best_plans,
        feasible_vertices: feasible,
        distinct_primary_values: distinct,
        smallest_primary_gap: smallest_gap,
    })
}

/// Recursive spanning-tree enumeration over the complete bipartite edge set
/// with incremental cycle pruning (union-find with rollback).
struct TreeEnumerator {
    m: usize,
    n: usize,
    parent: Vec<usize>,
    rank: Vec<usize>,
    chosen: Vec<usize>,
}

impl TreeEnumerator {
    fn new(m: usize, n: usize) -> Self {
        TreeEnumerator {
            m,
            n,
            parent: (0..m + n).collect(),
            rank: vec![0; m + n],
            chosen: Vec::with_capacity(m + n - 1),
        }
    }

    fn find(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    /// Unions two roots; returns the absorbed root for rollback.
    fn union(&mut self, a: usize, b: usize) -> (usize, bool) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if self.rank[ra] < self.rank[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        let bumped = self.rank[ra] == self.rank[rb];
        if bumped {
            self.rank[ra] += 1;
        }
        (rb, bumped)
    }

    fn undo(&mut self, absorbed: usize, bumped: bool) {
        let root = self.parent[absorbed];
        self.parent[absorbed] = absorbed;
        if bumped {
            self.rank[root] -= 1;
        }
    }

    fn for_each_tree(&mut self, visit: &mut impl FnMut(&[usize])) {
        let needed = self.m + self.n - 1;
        self.recurse(0, needed, visit);
    }

    fn recurse(&mut self, next_edge: usize, remaining: usize, visit: &mut impl FnMut(&[usize])) {
        if remaining == 0 {
            visit(&self.chosen);
            return;
        }
        let total = self.m * self.n;
        if total - next_edge < remaining {
            return;
        }
        for e in next_edge..total {
            if total - e < remaining {
                break;
            }
            let (i, j) = (e / self.n, self.m + e % self.n);
            if self.find(i) == self.find(j) {
                continue;
            }
            let (absorbed, bumped) = self.union(i, j);
            self.chosen.push(e);
            self.recurse(e + 1, remaining - 1, visit);
            self.chosen.pop();
            self.undo(absorbed, bumped);
        }
    }
}

/// Flows of a spanning tree by leaf elimination; `None` when infeasible.
fn solve_tree_flows(
    m: usize,
    n: usize,
    edges: &[usize],
    supplies: &[f64],
    demands: &[f64],
) -> Option<Vec<f64>> {
    let nodes = m + n;
    let mut balance = vec![0.0; nodes];
    balance[..m].copy_from_slice(supplies);
    for (j, &d) in demands.iter().enumerate() {
        balance[m + j] = -d;
    }

    let mut degree = vec![0usize; nodes];
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (k, &e) in edges.iter().enumerate() {
        let (i, j) = (e / n, m + e % n);
        degree[i] += 1;
        degree[j] += 1;
        incident[i].push(k);
        incident[j].push(k);
    }

    let mut removed_edge = vec![false; edges.len()];
    let mut removed_node = vec![false; nodes];
    let mut flows = vec![0.0; edges.len()];
    let mut leaves: Vec<usize> = (0..nodes).filter(|&v| degree[v] == 1).collect();

    let mut processed = 0usize;
    while let Some(leaf) = leaves.pop() {
        if removed_node[leaf] {
            continue;
        }
        let Some(&k) = incident[leaf].iter().find(|&&k| !removed_edge[k]) else {
            break;
        };
        let e = edges[k];
        let (i, j) = (e / n, m + e % n);
        let other = if leaf == i { j } else { i };
        // A source leaf pushes all its remaining supply over its only edge; a
        // sink leaf pulls all its remaining demand.
        let f = if leaf < m { balance[leaf] } else { -balance[leaf] };
        if f < -1e-12 {
            return None;
        }
        flows[k] = f.max(0.0);
        balance[leaf] = 0.0;
        if leaf < m {
            balance[other] += f; // sink neighbor receives f
        } else {
            balance[other] -= f; // source neighbor loses f
        }
        removed_edge[k] = true;
        removed_node[leaf] = true;
        degree[other] -= 1;
        if degree[other] == 1 {
            leaves.push(other);
        }
        processed += 1;
        if processed == edges.len() {
            break;
        }
    }
    Some(flows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VectorSet;

    #[test]
    fn canonical_two_by_two() {
        let mu = DiscreteMeasure::new(vec![vec![0.0, 0.0], vec![0.0, 1.0]], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(vec![vec![2.0, 0.0], vec![2.0, 1.0]], vec![0.5, 0.5]).unwrap();
        let primary = CostSpec::CrystallineSq(VectorSet::linf(2));
        let out = oracle_vertex_enumeration(&mu, &nu, &primary, &CostSpec::EuclideanSq).unwrap();
        assert!((out.pi1_value - 4.0).abs() < 1e-12);
        assert!((out.pi2_value - 4.0).abs() < 1e-12);
        assert_eq!(out.pi2_plans.len(), 1);
        let plan = &out.pi2_plans[0];
        assert_eq!(plan.len(), 2);
        assert!(plan.iter().all(|&(i, j, _)| i == j));
        // K_{2,2} has four spanning trees; all are feasible here.
        assert_eq!(out.feasible_vertices, 4);
    }

    #[test]
    fn identical_two_atom_measures() {
        let mu = DiscreteMeasure::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![0.5, 0.5]).unwrap();
        let primary = CostSpec::CrystallineSq(VectorSet::linf(2));
        let out = oracle_vertex_enumeration(&mu, &mu, &primary, &CostSpec::EuclideanSq).unwrap();
        assert!(out.pi1_value.abs() < 1e-12);
        assert!(out.pi2_value.abs() < 1e-12);
        assert_eq!(out.pi2_plans.len(), 1);
        assert!(out.pi2_plans[0].iter().all(|&(i, j, _)| i == j));
    }

    #[test]
    fn one_by_k_is_the_product_plan() {
        let mu = DiscreteMeasure::dirac(vec![0.0, 0.0]);
        let nu = DiscreteMeasure::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0]],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        let primary = CostSpec::CrystallineSq(VectorSet::linf(2));
        let out = oracle_vertex_enumeration(&mu, &nu, &primary, &CostSpec::EuclideanSq).unwrap();
        assert_eq!(out.pi2_plans.len(), 1);
        assert_eq!(out.pi2_plans[0].len(), 3);
        assert_eq!(out.feasible_vertices, 1);
    }

    #[test]
    fn oversized_support_is_rejected() {
        let atoms: Vec<Vec<f64>> = (0..6).map(|k| vec![k as f64, 0.0]).collect();
        let mu = DiscreteMeasure::new(atoms, vec![1.0 / 6.0; 6]).unwrap();
        let nu = DiscreteMeasure::dirac(vec![0.0, 0.0]);
        let primary = CostSpec::CrystallineSq(VectorSet::linf(2));
        let err = oracle_vertex_enumeration(&mu, &nu, &primary, &CostSpec::EuclideanSq);
        assert!(matches!(err, Err(Error::OracleTooLarge { .. })));
    }
}
