//! The `aot` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::alignment::{
    evaluate_accuracy, generate_synthetic_shift, labelwise_aggregate, train_aot_classifier, train_source_only,
    ShiftConfig, TrainConfig, TrainingHistory,
};
use crate::analysis::{active_regions, check_mass_allocation, mass_shift_curve};
use crate::baselines::{pot_lambda_sweep, solve_kantorovich, solve_pot, PotSpec, SweepPoint};
use crate::entropic::{solve_aot_sinkhorn, SinkhornConfig};
use crate::error::{AotError, Result};
use crate::exact::solve_aot_exact_with_tol;
use crate::io::{
    export_heatmap, load_problem, read_json, read_plan, round_sig, table_csv, write_json, write_plan,
    write_table, HeatmapOrder, Method, ProblemFile, ReportDocument,
};
use crate::measures::{CostMatrix, DiscreteMeasure, SolveReport, DEFAULT_TOL};

/// Environment variable overriding both seeds of an `align` config.
pub const SEED_ENV: &str = "AOT_SEED";

/// Number of trailing iterations averaged in the `align` summary.
pub const TAIL_WINDOW: usize = 50;

#[derive(Debug, Parser)]
#[command(name = "aot", version, about = "Adaptive-mass optimal transport between discrete measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ProblemArgs {
    /// Source weights, one number per line
    #[arg(long)]
    mu: PathBuf,
    /// Target weights, one number per line
    #[arg(long)]
    nu: PathBuf,
    /// Cost matrix, comma-separated rows
    #[arg(long)]
    cost: PathBuf,
}

impl ProblemArgs {
    fn load(&self) -> Result<(DiscreteMeasure, DiscreteMeasure, CostMatrix)> {
        load_problem(&ProblemFile {
            mu: self.mu.clone(),
            nu: self.nu.clone(),
            cost: self.cost.clone(),
        })
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one transport problem and report mass, objective and certificates
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_enum, default_value = "aot-exact")]
        method: Method,
        /// Entropic coefficient for aot-sinkhorn
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Mass budget for pot
        #[arg(long)]
        mass: Option<f64>,
        /// Saturation tolerance (exact methods) or stopping tolerance (aot-sinkhorn)
        #[arg(long)]
        tol: Option<f64>,
        /// Report path; printed to stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// Plan CSV path
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Check a stored plan for the sign-based mass allocation and active regions
    Diagnose {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trace transported mass along a cost shift or multiplier grid
    Sweep {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Solve with cost C - t for each t (list `a,b,c` or range `lo:hi:count`)
        #[arg(long, allow_hyphen_values = true, conflicts_with = "lambda_grid", required_unless_present = "lambda_grid")]
        shift_grid: Option<String>,
        /// Solve with cost C+ - lambda, where C+ = C + lambda_c for mixed-sign C
        #[arg(long, allow_hyphen_values = true)]
        lambda_grid: Option<String>,
        /// CSV path; printed to stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train source-only and adaptive-transport classifiers on synthetic shifted blobs
    Align {
        /// JSON with optional `shift` and `train` sections
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

/// Schema of the `align --config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignConfig {
    #[serde(default)]
    pub shift: ShiftConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

/// Contents of `accuracy.json` written by `align`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignSummary {
    pub aot_accuracy: f64,
    pub source_only_accuracy: f64,
    pub mean_mass_last_50: f64,
    pub source_class_mass_last_50: Vec<f64>,
    pub iterations: usize,
    pub shift_seed: u64,
    pub train_seed: u64,
}

/// Parses `a,b,c` or `lo:hi:count` (inclusive, evenly spaced).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| AotError::Validation(format!("invalid grid {spec:?}: {what}"));
    let number = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = match parts.as_slice() {
        [list] => list
            .split(',')
            .map(|s| number(s).ok_or_else(|| bad("expected numbers")))
            .collect::<Result<Vec<_>>>()?,
        [lo, hi, count] => {
            let (lo, hi) = (number(lo).ok_or_else(|| bad("bad start"))?, number(hi).ok_or_else(|| bad("bad end"))?);
            let count: usize = count.trim().parse().map_err(|_| bad("bad count"))?;
            match count {
                0 => return Err(bad("count must be >= 1")),
                1 => vec![lo],
                _ => (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect(),
            }
        }
        _ => return Err(bad("use a,b,c or lo:hi:count")),
    };
    if grid.is_empty() {
        return Err(bad("empty"));
    }
    Ok(grid)
}

// a closed pipe on stdout is not an error worth a panic
fn print_stdout(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_json(value, path),
        None => {
            print_stdout(&(serde_json::to_string_pretty(value).expect("serializable") + "\n"));
            Ok(())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_solve(
    problem: &ProblemArgs,
    method: Method,
    epsilon: f64,
    mass: Option<f64>,
    tol: Option<f64>,
    out: Option<&Path>,
    plan_out: Option<&Path>,
) -> Result<()> {
    let (mu, nu, cost) = problem.load()?;
    let mut params = BTreeMap::new();
    let report: SolveReport = match method {
        Method::AotExact => solve_aot_exact_with_tol(&mu, &nu, &cost, tol.unwrap_or(DEFAULT_TOL))?,
        Method::AotSinkhorn => {
            let config = SinkhornConfig {
                epsilon,
                tol: tol.unwrap_or(SinkhornConfig::default().tol),
                ..SinkhornConfig::default()
            };
            params.insert("epsilon".to_string(), epsilon);
            params.insert("max_iter".to_string(), config.max_iter as f64);
            solve_aot_sinkhorn(&mu, &nu, &cost, &config)?
        }
        Method::Ot => solve_kantorovich(&mu, &nu, &cost)?,
        Method::Pot => {
            let m = mass.ok_or_else(|| AotError::Validation("--method pot requires --mass".into()))?;
            params.insert("mass".to_string(), m);
            solve_pot(&mu, &nu, &PotSpec::new(m, cost.clone())?)?
        }
    };
    params.insert("tol".to_string(), report.summary.tol);

    let active = active_regions(&report.plan, report.summary.tol);
    let theorem1 = match method {
        Method::AotExact => Some(check_mass_allocation(&report.plan, &cost, &mu, &nu, report.summary.tol)?.passed),
        _ => None,
    };
    let doc = ReportDocument::new(method, &report, theorem1, (&active.active_rows, &active.active_cols), params);
    if let Some(path) = plan_out {
        write_plan(&report.plan, path)?;
    }
    emit_json(&doc, out)
}

#[derive(Serialize)]
struct Cell {
    row: usize,
    col: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    mass: Option<f64>,
}

#[derive(Serialize)]
struct DiagnoseDocument {
    objective: f64,
    mass: f64,
    theorem1_passed: bool,
    positive_cost_violations: Vec<Cell>,
    negative_cost_unsaturated: Vec<Cell>,
    active_rows: Vec<usize>,
    active_cols: Vec<usize>,
    inactive_rows: Vec<usize>,
    inactive_cols: Vec<usize>,
    inactive_block_mass: f64,
}

fn run_diagnose(problem: &ProblemArgs, plan_path: &Path, tol: f64, out: Option<&Path>) -> Result<()> {
    let (mu, nu, cost) = problem.load()?;
    let plan = read_plan(plan_path)?;
    let t1 = check_mass_allocation(&plan, &cost, &mu, &nu, tol)?;
    let regions = active_regions(&plan, tol);
    let one_based = |v: &[usize]| v.iter().map(|i| i + 1).collect::<Vec<_>>();
    let inactive_block_mass: f64 = regions
        .inactive_rows
        .iter()
        .flat_map(|&i| regions.inactive_cols.iter().map(move |&j| (i, j)))
        .map(|(i, j)| plan.get(i, j))
        .sum();
    let doc = DiagnoseDocument {
        objective: round_sig(plan.cost_against(&cost)?),
        mass: round_sig(plan.total_mass()),
        theorem1_passed: t1.passed,
        positive_cost_violations: t1
            .positive_violations
            .iter()
            .map(|&(i, j, m)| Cell {
                row: i + 1,
                col: j + 1,
                mass: Some(round_sig(m)),
            })
            .collect(),
        negative_cost_unsaturated: t1
            .negative_unsaturated
            .iter()
            .map(|&(i, j)| Cell {
                row: i + 1,
                col: j + 1,
                mass: None,
            })
            .collect(),
        active_rows: one_based(&regions.active_rows),
        active_cols: one_based(&regions.active_cols),
        inactive_rows: one_based(&regions.inactive_rows),
        inactive_cols: one_based(&regions.inactive_cols),
        inactive_block_mass: round_sig(inactive_block_mass),
    };
    emit_json(&doc, out)
}

fn sweep_rows(points: &[SweepPoint]) -> Vec<Vec<f64>> {
    points.iter().map(|p| vec![p.parameter, p.mass, p.objective]).collect()
}

fn run_sweep(problem: &ProblemArgs, shift: Option<&str>, lambda: Option<&str>, out: Option<&Path>) -> Result<()> {
    let (mu, nu, cost) = problem.load()?;
    let (name, points) = match (shift, lambda) {
        (Some(grid), None) => ("t", mass_shift_curve(&mu, &nu, &cost, &parse_grid(grid)?)?),
        (None, Some(grid)) => {
            let c_plus = if cost.is_nonnegative() { cost.clone() } else { cost.shifted(cost.lambda_c()) };
            ("lambda", pot_lambda_sweep(&mu, &nu, &c_plus, &parse_grid(grid)?)?)
        }
        _ => return Err(AotError::Validation("pass exactly one of --shift-grid and --lambda-grid".into())),
    };
    let header = [name, "mass", "objective"];
    match out {
        Some(path) => write_table(path, &header, &sweep_rows(&points)),
        None => {
            print_stdout(&table_csv(&header, &sweep_rows(&points))?);
            Ok(())
        }
    }
}

fn seed_override() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| AotError::Validation(format!("{SEED_ENV} must be a nonnegative integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn history_rows(history: &TrainingHistory) -> Vec<Vec<f64>> {
    history
        .records
        .iter()
        .map(|r| {
            let mut row = vec![
                r.iteration as f64,
                r.mass,
                r.transport_cost,
                r.source_loss,
                r.solver_iterations as f64,
            ];
            row.extend(&r.source_class_mass);
            row
        })
        .collect()
}

/// Runs the `align` experiment and writes its files into `out_dir`.
pub fn run_align(config: &AlignConfig, out_dir: &Path) -> Result<AlignSummary> {
    let pair = generate_synthetic_shift(&config.shift)?;
    let target = pair.target.unlabeled();
    let (model, history) = train_aot_classifier(&pair.source, &target, &config.train)?;
    let baseline = train_source_only(&pair.source, &config.train)?;
    std::fs::create_dir_all(out_dir).map_err(|e| AotError::io(out_dir, e))?;

    let k = config.shift.num_classes;
    let mut header: Vec<String> =
        ["iteration", "mass", "transport_cost", "source_loss", "solver_iterations"].map(String::from).to_vec();
    header.extend((1..=k).map(|c| format!("class_{c}_mass")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(&out_dir.join("history.csv"), &header, &history_rows(&history))?;

    if let Some(snap) = &history.last_batch {
        let target_labels = snap.target_true.as_ref().unwrap_or(&snap.target_predicted);
        let agg = labelwise_aggregate(&snap.plan, &snap.source_labels, target_labels, k)?;
        export_heatmap(agg.matrix.view(), &out_dir.join("labelwise.csv"), &HeatmapOrder::Input)?;
        let order = HeatmapOrder::LabelSorted {
            row_labels: snap.source_labels.clone(),
            col_labels: target_labels.clone(),
        };
        export_heatmap(snap.plan.mass().view(), &out_dir.join("plan_heatmap.csv"), &order)?;
    }

    let summary = AlignSummary {
        aot_accuracy: round_sig(evaluate_accuracy(&model, &pair.target)?),
        source_only_accuracy: round_sig(evaluate_accuracy(&baseline, &pair.target)?),
        mean_mass_last_50: round_sig(history.mean_mass_tail(TAIL_WINDOW)),
        source_class_mass_last_50: history.mean_source_class_mass_tail(TAIL_WINDOW).into_iter().map(round_sig).collect(),
        iterations: config.train.iterations,
        shift_seed: config.shift.seed,
        train_seed: config.train.seed,
    };
    write_json(&summary, &out_dir.join("accuracy.json"))?;
    Ok(summary)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve {
            problem,
            method,
            epsilon,
            mass,
            tol,
            out,
            plan,
        } => run_solve(&problem, method, epsilon, mass, tol, out.as_deref(), plan.as_deref()),
        Command::Diagnose { problem, plan, tol, out } => run_diagnose(&problem, &plan, tol, out.as_deref()),
        Command::Sweep {
            problem,
            shift_grid,
            lambda_grid,
            out,
        } => run_sweep(&problem, shift_grid.as_deref(), lambda_grid.as_deref(), out.as_deref()),
        Command::Align { config, out_dir } => {
            let mut config: AlignConfig = read_json(&config)?;
            if let Some(seed) = seed_override()? {
                config.shift.seed = seed;
                config.train.seed = seed;
            }
            let s = run_align(&config, &out_dir)?;
            print_stdout(&format!(
                "aot accuracy {} | source-only accuracy {} | mean mass (last {TAIL_WINDOW}) {}\n",
                s.aot_accuracy, s.source_only_accuracy, s.mean_mass_last_50
            ));
            Ok(())
        }
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 1 for bad input, 2 for numerical
/// failures.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("1, 2,3.5").unwrap(), vec![1.0, 2.0, 3.5]);
        assert_eq!(parse_grid("-1:1:5").unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("2:9:1").unwrap(), vec![2.0]);
        for bad in ["", "a", "1:2", "1:2:0", "1:2:x", "nan"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(cli_main(["aot", "--bogus"]), 1);
        assert_eq!(cli_main(["aot", "solve", "--mu", "a"]), 1);
        assert_eq!(cli_main(["aot", "--help"]), 0);
    }

    #[test]
    fn align_config_schema() {
        let cfg: AlignConfig = serde_json::from_str(r#"{"shift": {"K": 3, "d": 2, "per_class": 10,
            "shift_vector": [2, 0], "rotation_angle": 0.5, "outlier_fraction": 0.1, "seed": 1}}"#)
        .unwrap();
        assert_eq!(cfg.train, TrainConfig::default());
        assert!(serde_json::from_str::<AlignConfig>(r#"{"extra": 1}"#).is_err());
    }
}
