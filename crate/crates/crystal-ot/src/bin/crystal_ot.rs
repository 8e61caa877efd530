//! Batch CLI over the crystalline optimal-transport library.
//!
//! Exit codes: 0 when every check passes, 1 when any check fails, 2 on
//! configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crystal_ot::geometry::CostSpec;
use crystal_ot::harness::{builtin_scenarios, oracle_vertex_enumeration, run_suite, Scenario};
use crystal_ot::interpolation::{check_entropy_convexity, ConvexityReport};
use crystal_ot::measures::binned_cells;
use crystal_ot::selection::{select_plan, select_plan_lexicographic, smoothed_plan, SelectionResult};
use crystal_ot::solver::solve_kantorovich;

#[derive(Parser)]
#[command(name = "crystal-ot", version, about = "Optimal transport under crystalline norms: solve, select, interpolate, verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Kantorovich problem between a scenario's measures.
    Solve(SolveArgs),
    /// Compute the secondary-variational plan selection.
    Select(SelectArgs),
    /// Interpolate the selection and report entropy-convexity defects.
    Convexity(ConvexityArgs),
    /// Run the verification suite over scenarios (built-in pack by default).
    Verify(VerifyArgs),
    /// Enumerate transport-polytope vertices (small supports only).
    Oracle(OracleArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cost: crystalline, euclidean, or smoothed:<n>.
    #[arg(long, default_value = "crystalline")]
    cost: String,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MethodFlag {
    Restricted,
    Lexicographic,
    Both,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MethodFlag::Both)]
    method: MethodFlag,
    /// Comma-separated smoothing indices; emits a CSV of cost excesses per n.
    #[arg(long)]
    smooth_sequence: Option<String>,
}

#[derive(Args)]
struct ConvexityArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Additional fine-grid refinement levels (each doubles the resolution).
    #[arg(long, default_value_t = 0)]
    grid_refine: u32,
    /// Write the (t, entropy, chord, defect) CSV next to the report.
    #[arg(long, default_value_t = false)]
    emit_plot_data: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Scenario files; the built-in pack runs when none are given.
    #[arg(long)]
    scenario: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override applied to every scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Extra refinement levels for the map-trend scenarios.
    #[arg(long, default_value_t = 0)]
    grid_refine: u32,
    /// Also write binned-density CSVs for both marginals.
    #[arg(long, default_value_t = false)]
    emit_plot_data: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(args) => run_solve(&args),
        Command::Select(args) => run_select(&args),
        Command::Convexity(args) => run_convexity(&args),
        Command::Verify(args) => run_verify(&args),
        Command::Oracle(args) => run_oracle(&args),
    };
    match outcome {
        Ok(all_passed) => {
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn emit(out: &Option<PathBuf>, name: &str, payload: &impl Serialize) -> crystal_ot::Result<()> {
    let json = serde_json::to_string_pretty(payload)?;
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(name), json + "\n")?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn emit_text(out: &Option<PathBuf>, name: &str, text: &str) -> crystal_ot::Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(name), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn parse_cost(spec: &str, scenario: &Scenario) -> crystal_ot::Result<CostSpec> {
    match spec {
        "crystalline" => Ok(CostSpec::CrystallineSq(scenario.generator.clone())),
        "euclidean" => Ok(CostSpec::EuclideanSq),
        other => {
            if let Some(n) = other.strip_prefix("smoothed:") {
                let n: u32 = n
                    .parse()
                    .map_err(|_| crystal_ot::Error::invalid(format!("bad smoothing index {n}")))?;
                CostSpec::smoothed(scenario.generator.clone(), n)
            } else {
                Err(crystal_ot::Error::invalid(format!(
                    "unknown cost {other} (expected crystalline, euclidean, smoothed:<n>)"
                )))
            }
        }
    }
}

fn run_solve(args: &SolveArgs) -> crystal_ot::Result<bool> {
    let scenario = Scenario::load(&args.scenario)?;
    let mu = scenario.mu.realize()?;
    let nu = scenario.nu.realize()?;
    let cost = parse_cost(&args.cost, &scenario)?;
    let solution = solve_kantorovich(&mu, &nu, &cost)?;

    #[derive(Serialize)]
    struct SolveOut {
        scenario: String,
        cost: String,
        plan: crystal_ot::solver::PlanRecord,
        potentials: crystal_ot::solver::DualPotentials,
    }
    emit(
        &args.out,
        &format!("{}-solve.json", scenario.name),
        &SolveOut {
            scenario: scenario.name.clone(),
            cost: args.cost.clone(),
            plan: solution.plan.to_record(solution.value),
            potentials: solution.potentials,
        },
    )?;
    Ok(true)
}

fn run_select(args: &SelectArgs) -> crystal_ot::Result<bool> {
    let scenario = Scenario::load(&args.scenario)?;
    let mu = scenario.mu.realize()?;
    let nu = scenario.nu.realize()?;

    let restricted = select_plan(&mu, &nu, &scenario.generator)?;
    let results: Vec<&SelectionResult> = match args.method {
        MethodFlag::Restricted => vec![&restricted],
        _ => vec![],
    };
    let lex;
    let results = if args.method != MethodFlag::Restricted {
        lex = select_plan_lexicographic(
            &mu,
            &nu,
            &scenario.generator,
            crystal_ot::selection::auto_eps_weight(
                &mu,
                &nu,
                &scenario.generator,
                restricted.primary_value,
            )?,
        )?;
        match args.method {
            MethodFlag::Lexicographic => vec![&lex],
            MethodFlag::Both => vec![&restricted, &lex],
            MethodFlag::Restricted => unreachable!(),
        }
    } else {
        results
    };

    #[derive(Serialize)]
    struct SelectOut<'a> {
        scenario: String,
        results: Vec<&'a SelectionResult>,
    }
    emit(
        &args.out,
        &format!("{}-select.json", scenario.name),
        &SelectOut { scenario: scenario.name.clone(), results },
    )?;

    if let Some(seq) = &args.smooth_sequence {
        let mut csv = String::from("n,primary_excess,secondary_excess\n");
        for tok in seq.split(',') {
            let n: u32 = tok
                .trim()
                .parse()
                .map_err(|_| crystal_ot::Error::invalid(format!("bad smoothing index {tok}")))?;
            let plan = smoothed_plan(&mu, &nu, &scenario.generator, n)?;
            let p = plan.cost_under(&CostSpec::CrystallineSq(scenario.generator.clone()))?
                - restricted.primary_value;
            let s = plan.cost_under(&CostSpec::EuclideanSq)? - restricted.secondary_value;
            csv.push_str(&format!("{n},{p},{s}\n"));
        }
        emit_text(&args.out, &format!("{}-smooth-sequence.csv", scenario.name), &csv)?;
    }
    Ok(true)
}

fn convexity_csv(report: &ConvexityReport) -> String {
    let mut csv = String::from("t,entropy,chord,defect\n");
    for (k, &t) in report.times.iter().enumerate() {
        let chord = (1.0 - t) * report.entropy_start + t * report.entropy_end
            - t * (1.0 - t) * (report.k / 2.0) * report.w2_sq;
        csv.push_str(&format!("{t},{},{chord},{}\n", report.entropies[k], report.defects[k]));
    }
    csv
}

fn run_convexity(args: &ConvexityArgs) -> crystal_ot::Result<bool> {
    let scenario = Scenario::load(&args.scenario)?;
    let mu = scenario.mu.realize()?;
    let nu = scenario.nu.realize()?;
    let Some(mut grid) = scenario.fine_grid.clone() else {
        return Err(crystal_ot::Error::invalid("scenario has no fine_grid"));
    };
    let tolerance = scenario.tolerance("convexity_defect", 0.05);

    let mut all_passed = true;
    for level in 0..=args.grid_refine {
        let report =
            check_entropy_convexity(&mu, &nu, &scenario.generator, &scenario.times, &grid, 0.0)?;
        let passed = report.max_defect() <= tolerance;
        all_passed &= passed;

        #[derive(Serialize)]
        struct ConvexityOut<'a> {
            scenario: String,
            grid_cells: &'a [usize],
            tolerance: f64,
            passed: bool,
            #[serde(flatten)]
            report: &'a ConvexityReport,
        }
        let suffix = if level == 0 { String::new() } else { format!("-r{level}") };
        emit(
            &args.out,
            &format!("{}-convexity{suffix}.json", scenario.name),
            &ConvexityOut {
                scenario: scenario.name.clone(),
                grid_cells: &grid.cells,
                tolerance,
                passed,
                report: &report,
            },
        )?;
        if args.emit_plot_data {
            emit_text(
                &args.out,
                &format!("{}-convexity{suffix}.csv", scenario.name),
                &convexity_csv(&report),
            )?;
        }
        grid = grid.refined();
    }
    Ok(all_passed)
}

fn run_verify(args: &VerifyArgs) -> crystal_ot::Result<bool> {
    let mut scenarios = if args.scenario.is_empty() {
        builtin_scenarios()
    } else {
        let mut loaded = Vec::new();
        for path in &args.scenario {
            loaded.push(Scenario::load(path)?);
        }
        loaded
    };
    if let Some(seed) = args.seed {
        for s in scenarios.iter_mut() {
            s.seed = seed;
        }
    }
    if args.grid_refine > 0 {
        for s in scenarios.iter_mut() {
            if let Some(g) = &s.fine_grid {
                let mut g = g.clone();
                for _ in 0..args.grid_refine {
                    g = g.refined();
                }
                s.fine_grid = Some(g);
            }
        }
    }

    let verdicts = run_suite(&scenarios);
    let mut all_passed = true;
    for verdict in &verdicts {
        all_passed &= verdict.passed;
        for check in &verdict.checks {
            println!(
                "[{}] {} {} (margin {:.3e})",
                verdict.scenario,
                if check.passed { "PASS" } else { "FAIL" },
                check.name,
                check.margin
            );
        }
        emit(&args.out, &format!("{}-verdict.json", verdict.scenario), verdict)?;
        emit_text(
            &args.out,
            &format!("{}-metrics.csv", verdict.scenario),
            &verdict.metrics_csv(),
        )?;
    }
    if args.emit_plot_data {
        for scenario in &scenarios {
            if let Some(grid) = &scenario.fine_grid {
                for (tag, spec) in [("mu", &scenario.mu), ("nu", &scenario.nu)] {
                    let m = spec.realize()?;
                    let mut csv = String::from("indices,center,mass,density\n");
                    for cell in binned_cells(&m, grid)? {
                        csv.push_str(&format!(
                            "{:?},{:?},{},{}\n",
                            cell.indices, cell.center, cell.mass, cell.density
                        ));
                    }
                    emit_text(
                        &args.out,
                        &format!("{}-{tag}-binned.csv", scenario.name),
                        &csv,
                    )?;
                }
            }
        }
    }
    println!("verify: {}", if all_passed { "all checks passed" } else { "FAILURES present" });
    Ok(all_passed)
}

fn run_oracle(args: &OracleArgs) -> crystal_ot::Result<bool> {
    let scenario = Scenario::load(&args.scenario)?;
    let mu = scenario.mu.realize()?;
    let nu = scenario.nu.realize()?;
    let outcome = oracle_vertex_enumeration(
        &mu,
        &nu,
        &CostSpec::CrystallineSq(scenario.generator.clone()),
        &CostSpec::EuclideanSq,
    )?;

    #[derive(Serialize)]
    struct OracleOut {
        scenario: String,
        pi1_value: f64,
        pi2_value: f64,
        pi2_plan_count: usize,
        pi2_plans: Vec<Vec<(usize, usize, f64)>>,
        feasible_vertices: usize,
        distinct_primary_values: Vec<f64>,
    }
    emit(
        &args.out,
        &format!("{}-oracle.json", scenario.name),
        &OracleOut {
            scenario: scenario.name.clone(),
            pi1_value: outcome.pi1_value,
            pi2_value: outcome.pi2_value,
            pi2_plan_count: outcome.pi2_plans.len(),
            pi2_plans: outcome.pi2_plans,
            feasible_vertices: outcome.feasible_vertices,
            distinct_primary_values: outcome.distinct_primary_values,
        },
    )?;
    Ok(true)
}
