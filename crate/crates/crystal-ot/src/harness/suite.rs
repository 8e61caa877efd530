//! The verification suite: every module's invariants, run per scenario.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    crystalline_norm, euclidean_norm, norm_equivalence_constants, CostSpec, VectorSet,
};
use crate::interpolation::{convexity_along, flow_consistency_defect, interpolate_plan};
use crate::measures::{binned_entropy, discretize_density, DiscreteMeasure, GridSpec};
use crate::selection::{
    check_double_monotonicity, check_map_induced, check_selection_consistency_with_base,
    select_plan, select_plan_lexicographic, smoothed_plan, SelectionResult,
};
use crate::solver::{
    audit_cyclical_monotonicity, solve_kantorovich_with, wasserstein_sq, SolveOptions,
};

use super::oracle::{oracle_vertex_enumeration, ORACLE_LIMIT};
use super::rng::stream;
use super::scenario::{MeasureSpec, Scenario};

/// One verdict line: a named check, its pass/fail state, and the margin that
/// decided it (positive margins are slack, negative are violations).
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub margin: f64,
    pub detail: String,
}

impl CheckResult {
    fn pass(name: &str, margin: f64, detail: impl Into<String>) -> Self {
        CheckResult { name: name.to_string(), passed: true, margin, detail: detail.into() }
    }

    fn gate(name: &str, margin: f64, tol: f64, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.to_string(),
            passed: margin >= -tol,
            margin,
            detail: detail.into(),
        }
    }

    fn fail(name: &str, detail: impl Into<String>) -> Self {
        CheckResult { name: name.to_string(), passed: false, margin: f64::MIN, detail: detail.into() }
    }
}

/// All check results of one scenario.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictBundle {
    pub scenario: String,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl VerdictBundle {
    /// CSV of metrics: one row per check.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("check,passed,margin\n");
        for c in &self.checks {
            out.push_str(&format!("{},{},{}\n", c.name, c.passed, c.margin));
        }
        out
    }
}

/// Runs the full verification suite on each scenario (scenarios in a worker
/// pool, checks sequentially within a scenario).
pub fn run_suite(scenarios: &[Scenario]) -> Vec<VerdictBundle> {
    scenarios.par_iter().map(run_scenario).collect()
}

fn run_scenario(scenario: &Scenario) -> VerdictBundle {
    let mut checks = Vec::new();
    match scenario_checks(scenario, &mut checks) {
        Ok(()) => {}
        Err(e) => checks.push(CheckResult::fail("scenario/execution", e.to_string())),
    }
    let passed = checks.iter().all(|c| c.passed);
    VerdictBundle { scenario: scenario.name.clone(), seed: scenario.seed, checks, passed }
}

fn scenario_checks(scenario: &Scenario, checks: &mut Vec<CheckResult>) -> Result<()> {
    let generator = &scenario.generator;
    let seed = scenario.seed;

    geometry_checks(generator, seed, checks);
    measure_checks(scenario, checks)?;

    let mu = scenario.mu.realize()?;
    let nu = scenario.nu.realize()?;
    let primary_cost = CostSpec::CrystallineSq(generator.clone());

    // Primary solve with iterate collection for the duality checks.
    let (solution, diagnostics) = solve_kantorovich_with(
        &mu,
        &nu,
        &primary_cost,
        &SolveOptions { iteration_cap: None, collect_iterates: true },
    )?;

    let marginal_dev = worst_marginal_deviation(&solution.plan);
    checks.push(CheckResult::gate(
        "ot/marginal-conservation",
        -(marginal_dev - 1e-9).max(0.0),
        0.0,
        format!("worst marginal deviation {marginal_dev:.3e}"),
    ));

    let weak_duality_margin = diagnostics
        .iterates
        .iter()
        .map(|it| it.primal_value - it.dual_value + 1e-7)
        .fold(f64::INFINITY, f64::min);
    checks.push(CheckResult::gate(
        "ot/weak-duality-iterates",
        if weak_duality_margin.is_finite() { weak_duality_margin } else { 0.0 },
        0.0,
        format!("{} iterates", diagnostics.iterates.len()),
    ));

    let dual_obj = solution.potentials.objective(&mu, &nu);
    let duality_gap = (solution.value - dual_obj).abs();
    checks.push(CheckResult::gate(
        "ot/strong-duality",
        1e-7 * (1.0 + solution.value.abs()) - duality_gap,
        0.0,
        format!("gap {duality_gap:.3e}"),
    ));

    let audit = audit_cyclical_monotonicity(
        &solution.plan,
        &primary_cost,
        5,
        200,
        seed ^ 0xc1c,
    )?;
    checks.push(CheckResult::gate(
        "ot/cyclical-monotonicity",
        audit.worst_margin,
        1e-7,
        format!("{} pairs, {} cycles", audit.pairs_checked, audit.cycles_checked),
    ));

    // Selection pipeline; method disagreement surfaces as a failed check.
    let selection = match select_plan(&mu, &nu, generator) {
        Ok(s) => s,
        Err(e @ Error::MethodDisagreement { .. }) => {
            checks.push(CheckResult::fail("selection/method-agreement", e.to_string()));
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    let lex = select_plan_lexicographic(
        &mu,
        &nu,
        generator,
        crate::selection::auto_eps_weight(&mu, &nu, generator, selection.primary_value)?,
    )?;
    let scale = 1.0 + selection.primary_value.abs() + selection.secondary_value.abs();
    let agreement = (selection.primary_value - lex.primary_value)
        .abs()
        .max((selection.secondary_value - lex.secondary_value).abs());
    checks.push(CheckResult::gate(
        "selection/method-agreement",
        1e-6 * scale - agreement,
        0.0,
        format!("objective difference {agreement:.3e}"),
    ));

    let membership =
        (selection.plan.cost_under(&primary_cost)? - selection.primary_value).abs();
    checks.push(CheckResult::gate(
        "selection/pi1-membership",
        1e-7 * (1.0 + selection.primary_value) - membership,
        0.0,
        format!("primary-cost deviation {membership:.3e}"),
    ));

    oracle_check(&mu, &nu, generator, &selection, checks)?;

    let monotonicity = check_double_monotonicity(&selection.plan, generator, 1e-7)?;
    checks.push(CheckResult::gate(
        "selection/double-monotonicity",
        monotonicity.worst_monot1.min(monotonicity.worst_monot2.unwrap_or(0.0)),
        1e-7,
        format!(
            "{} pairs, {} tight",
            monotonicity.pairs_checked, monotonicity.tight_pairs_checked
        ),
    ));

    smoothed_check(&mu, &nu, generator, &selection, checks)?;
    consistency_checks(&selection, generator, scenario, checks)?;
    map_trend_check(scenario, checks)?;
    interpolation_checks(&selection, generator, scenario, checks)?;
    Ok(())
}

fn geometry_checks(generator: &VectorSet, seed: u64, checks: &mut Vec<CheckResult>) {
    let dim = generator.dim();
    let mut rng = stream(seed, "geometry/triangle");
    let mut worst_triangle = f64::INFINITY;
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let slack = crystalline_norm(&x, generator).unwrap()
            + crystalline_norm(&y, generator).unwrap()
            - crystalline_norm(&sum, generator).unwrap();
        worst_triangle = worst_triangle.min(slack);
    }
    checks.push(CheckResult::gate("geometry/triangle-inequality", worst_triangle, 1e-10, "10^4 pairs"));

    let mut rng = stream(seed, "geometry/symmetry");
    let mut worst_symmetry = 0.0_f64;
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
        let neg: Vec<f64> = x.iter().map(|c| -c).collect();
        let diff = (crystalline_norm(&x, generator).unwrap()
            - crystalline_norm(&neg, generator).unwrap())
        .abs();
        worst_symmetry = worst_symmetry.max(diff);
    }
    checks.push(CheckResult::gate(
        "geometry/symmetry",
        1e-12 - worst_symmetry,
        0.0,
        format!("max |‖x‖-‖-x‖| = {worst_symmetry:.3e}"),
    ));

    let mut rng = stream(seed, "geometry/sandwich");
    let mut worst_sandwich = 0.0_f64;
    for &n in &[1u32, 10, 100, 1000] {
        for _ in 0..1000 {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
            let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
            let w: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
            let d = crystalline_norm(&w, generator).unwrap();
            let eu: f64 = w.iter().map(|c| c * c).sum();
            let dn2 = d * d + eu / f64::from(n);
            let gap = f64::from(n) * (dn2 - d * d);
            worst_sandwich = worst_sandwich.max((gap - eu).abs() / (1.0 + eu));
        }
    }
    checks.push(CheckResult::gate(
        "geometry/smoothing-sandwich",
        1e-12 - worst_sandwich,
        0.0,
        "n in {1,10,100,1000}",
    ));

    let mut rng = stream(seed, "geometry/strong-convexity");
    let mut worst_convexity = f64::INFINITY;
    for &n in &[1u32, 10, 100] {
        let nf = f64::from(n);
        for _ in 0..2000 {
            let w1: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
            let w2: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
            let lam: f64 = rng.random_range(0.01..0.99);
            let mix: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
            let nsq = |w: &[f64]| {
                let d = crystalline_norm(w, generator).unwrap();
                let eu: f64 = w.iter().map(|c| c * c).sum();
                d * d + eu / nf
            };
            let gap: f64 = w1.iter().zip(&w2).map(|(a, b)| (a - b) * (a - b)).sum();
            let slack = lam * nsq(&w1) + (1.0 - lam) * nsq(&w2)
                - lam * (1.0 - lam) / nf * gap
                - nsq(&mix);
            worst_convexity = worst_convexity.min(slack);
        }
    }
    checks.push(CheckResult::gate("geometry/strong-convexity", worst_convexity, 1e-9, "k = 2/n"));

    let constants = norm_equivalence_constants(generator).unwrap();
    let mut rng = stream(seed, "geometry/equivalence");
    let mut worst_eq = f64::INFINITY;
    let mut samples = 0usize;
    while samples < 100_000 {
        let mut u: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = euclidean_norm(&u);
        if norm < 1e-6 {
            continue;
        }
        for c in u.iter_mut() {
            *c /= norm;
        }
        let v = crystalline_norm(&u, generator).unwrap();
        worst_eq = worst_eq.min(v - constants.c_low).min(constants.c_high - v);
        samples += 1;
    }
    checks.push(CheckResult::gate(
        "geometry/equivalence-certified",
        worst_eq,
        1e-9,
        format!("c_low {:.6}, c_high {:.6}", constants.c_low, constants.c_high),
    ));
}

fn measure_checks(scenario: &Scenario, checks: &mut Vec<CheckResult>) -> Result<()> {
    // Mass preservation on the scenario's own densities (or a canonical one).
    let mut worst_mass = 0.0_f64;
    for spec in [&scenario.mu, &scenario.nu] {
        let m = spec.realize()?;
        worst_mass = worst_mass.max((m.weights().iter().sum::<f64>() - 1.0).abs());
    }
    checks.push(CheckResult::gate(
        "measures/mass-preserving",
        1e-10 - worst_mass,
        0.0,
        format!("worst total-mass deviation {worst_mass:.3e}"),
    ));

    let mut worst_uniform = 0.0_f64;
    for cells in [8usize, 16, 32] {
        let grid = GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![cells, cells])?;
        let m = discretize_density(|_| 1.0, &grid)?;
        worst_uniform = worst_uniform.max(binned_entropy(&m, &grid)?.abs());
    }
    checks.push(CheckResult::gate(
        "measures/uniform-entropy-zero",
        1e-10 - worst_uniform,
        0.0,
        "refinements 8, 16, 32",
    ));

    let density = |x: &[f64]| (-(x[0] - 0.4) * (x[0] - 0.4) - (x[1] - 0.6) * (x[1] - 0.6)).exp();
    let mut entropies = Vec::new();
    for cells in [8usize, 16, 32, 64] {
        let grid = GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![cells, cells])?;
        let m = discretize_density(density, &grid)?;
        entropies.push(binned_entropy(&m, &grid)?);
    }
    let d1 = (entropies[1] - entropies[0]).abs();
    let d2 = (entropies[2] - entropies[1]).abs();
    let d3 = (entropies[3] - entropies[2]).abs();
    checks.push(CheckResult::gate(
        "measures/refinement-consistency",
        (d1 - d2).min(d2 - d3),
        1e-12,
        format!("diffs {d1:.3e} -> {d2:.3e} -> {d3:.3e}"),
    ));

    let grid = GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![8, 8])?;
    let m = discretize_density(|x| 1.0 + x[0], &grid)?;
    let shift = vec![1.0 / 8.0, 0.0];
    let shifted_grid = GridSpec::new(vec![1.0 / 8.0, 0.0], vec![1.0 + 1.0 / 8.0, 1.0], vec![8, 8])?;
    let gap = (binned_entropy(&m, &grid)? - binned_entropy(&m.translate(&shift)?, &shifted_grid)?).abs();
    checks.push(CheckResult::gate(
        "measures/translation-invariance",
        1e-10 - gap,
        0.0,
        format!("entropy gap {gap:.3e}"),
    ));
    Ok(())
}

fn worst_marginal_deviation(plan: &crate::solver::TransportPlan) -> f64 {
    let mut row = vec![0.0; plan.source().len()];
    let mut col = vec![0.0; plan.target().len()];
    for e in plan.entries() {
        row[e.source_index] += e.mass;
        col[e.target_index] += e.mass;
    }
    let a = row
        .iter()
        .zip(plan.source().weights())
        .map(|(h, w)| (h - w).abs())
        .fold(0.0_f64, f64::max);
    let b = col
        .iter()
        .zip(plan.target().weights())
        .map(|(h, w)| (h - w).abs())
        .fold(0.0_f64, f64::max);
    a.max(b)
}

fn oracle_check(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    generator: &VectorSet,
    selection: &SelectionResult,
    checks: &mut Vec<CheckResult>,
) -> Result<()> {
    if mu.len() > ORACLE_LIMIT || nu.len() > ORACLE_LIMIT {
        checks.push(CheckResult::pass(
            "selection/oracle-equivalence",
            0.0,
            "skipped: support exceeds oracle limit",
        ));
        return Ok(());
    }
    let out = oracle_vertex_enumeration(
        mu,
        nu,
        &CostSpec::CrystallineSq(generator.clone()),
        &CostSpec::EuclideanSq,
    )?;
    let dev = (selection.primary_value - out.pi1_value)
        .abs()
        .max((selection.secondary_value - out.pi2_value).abs());
    let mut detail = format!("{} feasible vertices", out.feasible_vertices);
    let mut margin = 1e-7 - dev;
    if out.pi2_plans.len() == 1 {
        let reference = crate::solver::TransportPlan::new(
            mu.clone(),
            nu.clone(),
            out.pi2_plans[0].clone(),
        )?;
        if !selection.plan.same_support(&reference, 1e-7) {
            margin = f64::MIN;
            detail.push_str("; unique oracle plan differs entry-wise");
        }
    }
    checks.push(CheckResult::gate("selection/oracle-equivalence", margin, 0.0, detail));
    Ok(())
}

fn smoothed_check(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    generator: &VectorSet,
    selection: &SelectionResult,
    checks: &mut Vec<CheckResult>,
) -> Result<()> {
    let primary_cost = CostSpec::CrystallineSq(generator.clone());
    let mut prev_p = f64::INFINITY;
    let mut prev_s = f64::INFINITY;
    let mut margin = f64::INFINITY;
    for &n in &[1u32, 10, 100, 1000] {
        let plan = smoothed_plan(mu, nu, generator, n)?;
        let p_excess = plan.cost_under(&primary_cost)? - selection.primary_value;
        let s_excess = (plan.cost_under(&CostSpec::EuclideanSq)? - selection.secondary_value).abs();
        margin = margin.min(p_excess + 1e-9); // excess must be nonnegative
        margin = margin.min(prev_p - p_excess + 1e-9); // and nonincreasing
        margin = margin.min(prev_s - s_excess + 1e-9);
        prev_p = p_excess;
        prev_s = s_excess;
    }
    let budget = 1e-3 * (1.0 + selection.secondary_value);
    margin = margin.min(budget - prev_p).min(budget - prev_s);
    checks.push(CheckResult::gate(
        "selection/smoothed-convergence",
        margin,
        0.0,
        format!("final excesses p {prev_p:.3e}, s {prev_s:.3e}"),
    ));
    Ok(())
}

fn consistency_checks(
    selection: &SelectionResult,
    generator: &VectorSet,
    scenario: &Scenario,
    checks: &mut Vec<CheckResult>,
) -> Result<()> {
    let grid = consistency_grid(selection, scenario)?;
    let mut worst_tv = 0.0_f64;
    for &(s, t) in &[(0.0, 0.5), (0.25, 0.75), (0.5, 1.0)] {
        let report = check_selection_consistency_with_base(
            selection,
            generator,
            |_, _| 1.0,
            s,
            t,
            &grid,
        )?;
        worst_tv = worst_tv.max(report.discrepancy);
    }
    checks.push(CheckResult::gate(
        "selection/consistency-uniform-f",
        scenario.tolerance("consistency_tv", 1e-7) - worst_tv,
        0.0,
        format!("worst TV discrepancy {worst_tv:.3e}"),
    ));

    let mut rng = stream(scenario.seed, "selection/consistency-random-f");
    let mut worst_obj = 0.0_f64;
    for _ in 0..20 {
        let a: Vec<f64> = (0..generator.dim()).map(|_| rng.random_range(-0.5..0.5)).collect();
        let b: Vec<f64> = (0..generator.dim()).map(|_| rng.random_range(-0.5..0.5)).collect();
        let c: f64 = rng.random_range(0.5..2.0);
        let (s, t) = (rng.random_range(0.0..0.45), rng.random_range(0.55..1.0));
        let f = |x: &[f64], y: &[f64]| {
            let dx: f64 = x.iter().zip(&a).map(|(v, w)| v * w).sum();
            let dy: f64 = y.iter().zip(&b).map(|(v, w)| v * w).sum();
            (c + dx + dy).max(0.0)
        };
        let report =
            check_selection_consistency_with_base(selection, generator, f, s, t, &grid)?;
        let obj_gap = (report.lhs_secondary - report.rhs_secondary).abs();
        worst_obj = worst_obj.max(obj_gap);
    }
    checks.push(CheckResult::gate(
        "selection/consistency-random-f",
        scenario.tolerance("consistency_objective", 1e-6) - worst_obj,
        0.0,
        format!("worst secondary-objective gap {worst_obj:.3e} over 20 weights"),
    ));
    Ok(())
}

/// A grid covering the hull of both supports, for the consistency report's
/// marginal-entropy diagnostics.
fn consistency_grid(selection: &SelectionResult, scenario: &Scenario) -> Result<GridSpec> {
    if let Some(grid) = &scenario.fine_grid {
        return Ok(grid.clone());
    }
    let dim = selection.plan.source().dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for atom in selection.plan.source().atoms().iter().chain(selection.plan.target().atoms()) {
        for k in 0..dim {
            lo[k] = lo[k].min(atom[k]);
            hi[k] = hi[k].max(atom[k]);
        }
    }
    for k in 0..dim {
        let pad = 0.5 * (hi[k] - lo[k]).max(1.0);
        lo[k] -= pad;
        hi[k] += pad;
    }
    GridSpec::new(lo, hi, vec![16; dim])
}

fn map_trend_check(scenario: &Scenario, checks: &mut Vec<CheckResult>) -> Result<()> {
    let (MeasureSpec::Density { density: dmu, grid: gmu }, MeasureSpec::Density { density: dnu, grid: gnu }) =
        (&scenario.mu, &scenario.nu)
    else {
        checks.push(CheckResult::pass(
            "selection/map-trend",
            0.0,
            "skipped: needs density-based marginals",
        ));
        return Ok(());
    };
    let mut fractions = Vec::new();
    for level in 0..2 {
        let (gm, gn) = if level == 0 {
            (gmu.clone(), gnu.clone())
        } else {
            (gmu.refined(), gnu.refined())
        };
        let cell = gm.cell_volume().powf(1.0 / gm.dim() as f64);
        let mu = discretize_density(|p| dmu.evaluate(p, &gm), &gm)?;
        let nu = discretize_density(|p| dnu.evaluate(p, &gn), &gn)?;
        let selection = select_plan(&mu, &nu, &scenario.generator)?;
        let report = check_map_induced(&selection.plan, 2.0 * cell);
        fractions.push(report.splitting_mass_fraction);
    }
    checks.push(CheckResult::gate(
        "selection/map-trend",
        fractions[0] - fractions[1],
        1e-9,
        format!("splitting fraction {:.4} -> {:.4}", fractions[0], fractions[1]),
    ));
    Ok(())
}

fn interpolation_checks(
    selection: &SelectionResult,
    generator: &VectorSet,
    scenario: &Scenario,
    checks: &mut Vec<CheckResult>,
) -> Result<()> {
    let mut rng = stream(scenario.seed, "interpolation/flow-defect");
    let dim = generator.dim();
    let mut worst_defect = 0.0_f64;
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let s: f64 = rng.random_range(0.0..0.5);
        let t: f64 = rng.random_range(s + 1e-6..1.0);
        let r: f64 = rng.random_range(0.0..1.0);
        worst_defect = worst_defect.max(flow_consistency_defect(&x, &y, s, t, r)?);
    }
    checks.push(CheckResult::gate(
        "interpolation/flow-defect",
        1e-12 - worst_defect,
        0.0,
        format!("max defect {worst_defect:.3e} over 10^4 samples"),
    ));

    let mut worst_mass = 0.0_f64;
    for &t in &scenario.times {
        let mu_t = interpolate_plan(&selection.plan, t)?;
        worst_mass = worst_mass.max((mu_t.weights().iter().sum::<f64>() - 1.0).abs());
    }
    checks.push(CheckResult::gate(
        "interpolation/mass-conservation",
        1e-10 - worst_mass,
        0.0,
        format!("worst mass deviation {worst_mass:.3e}"),
    ));

    let mut worst_speed = 0.0_f64;
    for e in selection.plan.entries() {
        let x = selection.plan.source().atom(e.source_index);
        let y = selection.plan.target().atom(e.target_index);
        let w: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let d = crystalline_norm(&w, generator)?;
        for &(s, t) in &[(0.0, 0.5), (0.25, 0.75), (0.5, 1.0)] {
            // Affine segments scale crystalline length linearly.
            let seg: Vec<f64> = w.iter().map(|c| (t - s) * c).collect();
            let dseg = crystalline_norm(&seg, generator)?;
            worst_speed = worst_speed.max((dseg - (t - s) * d).abs());
        }
    }
    checks.push(CheckResult::gate(
        "interpolation/constant-speed",
        1e-10 - worst_speed,
        0.0,
        format!("worst deviation {worst_speed:.3e}"),
    ));

    let cost = CostSpec::CrystallineSq(generator.clone());
    let w2 = selection.primary_value.max(0.0).sqrt();
    let mut worst_geodesy = 0.0_f64;
    for &(s, t) in &[(0.0, 0.5), (0.5, 1.0), (0.25, 0.75)] {
        let mu_s = interpolate_plan(&selection.plan, s)?;
        let mu_t = interpolate_plan(&selection.plan, t)?;
        let w_st = wasserstein_sq(&mu_s, &mu_t, &cost)?.max(0.0).sqrt();
        worst_geodesy = worst_geodesy.max((w_st - (t - s) * w2).abs());
    }
    checks.push(CheckResult::gate(
        "interpolation/w2-geodesy",
        1e-6 * (1.0 + w2) - worst_geodesy,
        0.0,
        format!("worst |W2(s,t) - |t-s| W2| = {worst_geodesy:.3e}"),
    ));

    if let Some(fine_grid) = &scenario.fine_grid {
        let report = convexity_along(selection, &scenario.times, fine_grid, 0.0)?;
        let max_defect = report.max_defect();
        checks.push(CheckResult::gate(
            "interpolation/entropy-convexity",
            scenario.tolerance("convexity_defect", 0.05) - max_defect,
            0.0,
            format!("max defect {max_defect:.4e} at K=0"),
        ));
    } else {
        checks.push(CheckResult::pass(
            "interpolation/entropy-convexity",
            0.0,
            "skipped: scenario has no fine grid",
        ));
    }
    Ok(())
}
