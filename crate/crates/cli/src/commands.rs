//! Implementations of the five subcommands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use gridsched_core::engine::{run_dynamics, DynamicsConfig, GameMode};
use gridsched_core::metrics::summarize;
use gridsched_core::model::{PlayerId, Scenario, StrategyProfile};
use gridsched_core::oracle::{brute_force, verify_profile};
use gridsched_core::pricing::{check_regularity, Tariff};
use gridsched_core::scenario::{generate, load, save, GenerationSpec};

use crate::args::{
    CheckPricingArgs, ExperimentArgs, GenerateArgs, ModeArg, OracleArgs, RunArgs, VariantArg,
};
use crate::output::{
    fmt_sig, write_final_starts_csv, write_profile_csv, write_summary_csv, write_trace_csv,
    Provenance, SummaryRow,
};
use crate::CliError;

pub fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let spec = GenerationSpec {
        num_houses: args.houses,
        flexibility: args.flexibility.into(),
        homogeneity: if args.heterogeneous {
            gridsched_core::scenario::Homogeneity::Heterogeneous
        } else {
            gridsched_core::scenario::Homogeneity::Homogeneous
        },
        tariff_threshold_fraction: args.ttf,
        slope_multiplier: args.slope_mult,
        seed: args.seed,
    };
    let scenario = generate(&spec)?;
    save(&scenario, &args.out)?;
    println!(
        "wrote {} ({} houses, {} players)",
        args.out.display(),
        scenario.houses.len(),
        scenario.player_count()
    );
    Ok(())
}

fn dynamics_config(
    mode: GameMode,
    order: crate::args::OrderArg,
    init: crate::args::InitArg,
    seed: u64,
    max_passes: Option<usize>,
    epsilon: f64,
    scenario: &Scenario,
) -> DynamicsConfig {
    DynamicsConfig {
        mode,
        order_policy: order.into(),
        init_policy: init.into(),
        seed,
        max_passes: max_passes.unwrap_or_else(|| (10 * scenario.player_count()).max(1)),
        improvement_epsilon: epsilon,
    }
}

/// Solves a scenario and writes the four result files into `out_dir`.
fn execute_run(
    scenario: &Scenario,
    config: &DynamicsConfig,
    out_dir: &Path,
    label: &str,
    provenance: &Provenance,
    display_seed: u64,
) -> Result<SummaryRow, CliError> {
    std::fs::create_dir_all(out_dir).map_err(CliError::from_io)?;
    let result = run_dynamics(scenario, config)?;
    let metrics = summarize(&result.final_profile, &scenario.tariff);
    let row = SummaryRow::from_result(label, &result, &metrics, display_seed, provenance);
    write_summary_csv(&out_dir.join("summary.csv"), std::slice::from_ref(&row))?;
    write_profile_csv(&out_dir.join("profile.csv"), &metrics.aggregate_profile_kw)?;
    write_trace_csv(&out_dir.join("trace.csv"), &result)?;
    write_final_starts_csv(&out_dir.join("final_starts.csv"), &result)?;
    Ok(row)
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let scenario = load(&args.scenario)?;
    let config = dynamics_config(
        args.mode.into(),
        args.order,
        args.init,
        args.seed,
        args.max_passes,
        args.epsilon,
        &scenario,
    );
    let label = args.label.clone().unwrap_or_else(|| {
        args.scenario
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into())
    });
    let provenance = Provenance {
        flexibility: args.flexibility.clone().unwrap_or_else(|| "-".into()),
        homogeneity: args.homogeneity.clone().unwrap_or_else(|| "-".into()),
        ttf: args.ttf.clone().unwrap_or_else(|| "-".into()),
        slope_mult: args.slope_mult.clone().unwrap_or_else(|| "-".into()),
    };
    let row = execute_run(
        &scenario,
        &config,
        &args.out,
        &label,
        &provenance,
        args.seed,
    )?;
    println!(
        "{label}: mode={} social_cost={} peak={} jfi={} passes={} converged={}",
        row.mode,
        fmt_sig(row.social_cost_eur),
        fmt_sig(row.peak_kw),
        fmt_sig(row.jfi),
        row.passes,
        row.converged
    );
    println!("results in {}", args.out.display());
    if !row.converged && args.strict {
        return Err(CliError::Strict(format!(
            "dynamics did not converge within {} passes",
            config.max_passes
        )));
    }
    Ok(())
}

fn read_run_outputs(dir: &Path) -> Result<(BTreeMap<PlayerId, usize>, GameMode, bool), CliError> {
    let summary_path = dir.join("summary.csv");
    let mut reader = csv::Reader::from_path(&summary_path).map_err(CliError::from_csv)?;
    let headers = reader.headers().map_err(CliError::from_csv)?.clone();
    let col = |name: &str| -> Result<usize, CliError> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Validation(format!(
                "{}: missing column `{name}`",
                summary_path.display()
            ))
        })
    };
    let mode_col = col("mode")?;
    let converged_col = col("converged")?;
    let record = reader
        .records()
        .next()
        .ok_or_else(|| CliError::Validation(format!("{}: no data rows", summary_path.display())))?
        .map_err(CliError::from_csv)?;
    let mode = match &record[mode_col] {
        "sa" => GameMode::SingleAppliance,
        "ma" => GameMode::MultiAppliance,
        other => {
            return Err(CliError::Validation(format!(
                "{}: unknown mode `{other}`",
                summary_path.display()
            )))
        }
    };
    let converged = &record[converged_col] == "true";

    let starts_path = dir.join("final_starts.csv");
    let mut reader = csv::Reader::from_path(&starts_path).map_err(CliError::from_csv)?;
    let mut starts = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(CliError::from_csv)?;
        if record.len() != 3 {
            return Err(CliError::Validation(format!(
                "{}: expected 3 columns per row",
                starts_path.display()
            )));
        }
        let slot: usize = record[2].parse().map_err(|_| {
            CliError::Validation(format!(
                "{}: bad start_slot `{}`",
                starts_path.display(),
                &record[2]
            ))
        })?;
        starts.insert(PlayerId::new(&record[0], &record[1]), slot);
    }
    Ok((starts, mode, converged))
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<(), CliError> {
    let scenario = load(&args.scenario)?;
    let report = brute_force(&scenario, args.mode.into(), args.ceiling)?;
    println!(
        "enumerated {} profiles: optimum={} equilibria={} price_of_anarchy={}",
        report.profile_count_enumerated,
        fmt_sig(report.optimum_cost_eur),
        report.nash_profiles.len(),
        report
            .price_of_anarchy
            .map(fmt_sig)
            .unwrap_or_else(|| "-".into())
    );
    let json = serde_json::to_string_pretty(&report).map_err(CliError::from_other)?;
    match &args.out {
        Some(path) => {
            std::fs::write(path, json + "\n").map_err(CliError::from_io)?;
            println!("report written to {}", path.display());
        }
        None => println!("{json}"),
    }

    if let Some(run_dir) = &args.verify {
        let (starts, mode, converged) = read_run_outputs(run_dir)?;
        let profile = StrategyProfile::new(&scenario, &starts)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        let verification = verify_profile(
            &scenario,
            &profile,
            mode,
            converged,
            args.epsilon,
            args.ceiling,
        )?;
        let json = serde_json::to_string_pretty(&verification).map_err(CliError::from_other)?;
        println!("{json}");
    }
    Ok(())
}

pub fn cmd_check_pricing(args: &CheckPricingArgs) -> Result<(), CliError> {
    let (tariff, default_hi) = match (&args.scenario, args.variant) {
        (Some(_), Some(_)) => {
            return Err(CliError::Validation(
                "pass either --scenario or an inline --variant tariff, not both".into(),
            ))
        }
        (Some(path), None) => {
            let scenario = load(path)?;
            let hi: f64 = scenario.houses.iter().map(|h| h.supply_limit_kw).sum();
            (scenario.tariff, Some(hi))
        }
        (None, Some(variant)) => {
            let missing =
                |name: &str| CliError::Validation(format!("inline tariff requires --{name}"));
            let tariff = match variant {
                VariantArg::PiecewiseAffine => Tariff::piecewise_affine(
                    args.c_min.ok_or_else(|| missing("c-min"))?,
                    args.slope.ok_or_else(|| missing("slope"))?,
                    args.threshold_kw.ok_or_else(|| missing("threshold-kw"))?,
                ),
                VariantArg::PowerLaw => Tariff::power_law(
                    args.alpha.ok_or_else(|| missing("alpha"))?,
                    args.beta.ok_or_else(|| missing("beta"))?,
                ),
            };
            (tariff, None)
        }
        (None, None) => {
            return Err(CliError::Validation(
                "pass --scenario or an inline --variant tariff".into(),
            ))
        }
    };
    let hi = args
        .range_hi
        .or(default_hi)
        .ok_or_else(|| CliError::Validation("inline tariffs need --range-hi".into()))?;
    if hi.is_nan() || hi <= args.range_lo || args.range_lo < 0.0 {
        return Err(CliError::Validation(format!(
            "demand range [{}, {}] is empty or negative",
            args.range_lo, hi
        )));
    }
    if args.samples < 2 {
        return Err(CliError::Validation("--samples must be at least 2".into()));
    }
    let report = check_regularity(&tariff, (args.range_lo, hi), args.samples);
    println!(
        "verdict={} monotone={} derivative_continuous={} condition2={}/{} violated",
        report.verdict,
        report.monotone,
        report.derivative_continuous,
        report.condition2_violated,
        report.condition2_samples_checked
    );
    let json = serde_json::to_string_pretty(&report).map_err(CliError::from_other)?;
    match &args.out {
        Some(path) => {
            std::fs::write(path, json + "\n").map_err(CliError::from_io)?;
            println!("report written to {}", path.display());
        }
        None => println!("{json}"),
    }
    if args.strict && report.verdict == gridsched_core::pricing::RegularityVerdict::Violated {
        return Err(CliError::Strict("tariff verdict is `violated`".into()));
    }
    Ok(())
}

struct Cell {
    label: String,
    spec: GenerationSpec,
    mode: ModeArg,
    seed: u64,
    provenance: Provenance,
}

fn worker_count(cells: usize) -> usize {
    let from_env = std::env::var("GRIDSCHED_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1);
    let default = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    from_env.unwrap_or(default).min(cells.max(1))
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<(), CliError> {
    let mut cells = Vec::new();
    for &houses in &args.houses {
        for &flexibility in &args.flexibility {
            for &homogeneity in &args.homogeneity {
                for &ttf in &args.ttf {
                    for &slope_mult in &args.slope_mult {
                        for &seed in &args.seeds {
                            for &mode in &args.modes {
                                let spec = GenerationSpec {
                                    num_houses: houses,
                                    flexibility: flexibility.into(),
                                    homogeneity: homogeneity.into(),
                                    tariff_threshold_fraction: ttf,
                                    slope_multiplier: slope_mult,
                                    seed,
                                };
                                let label = format!(
                                    "h{houses}_{flexibility}_{homogeneity}_ttf{ttf}_sm{slope_mult}_seed{seed}_{mode}"
                                );
                                cells.push(Cell {
                                    label,
                                    provenance: Provenance {
                                        flexibility: flexibility.to_string(),
                                        homogeneity: homogeneity.to_string(),
                                        ttf: ttf.to_string(),
                                        slope_mult: slope_mult.to_string(),
                                    },
                                    spec,
                                    mode,
                                    seed,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(CliError::Validation("experiment matrix is empty".into()));
    }
    std::fs::create_dir_all(&args.out).map_err(CliError::from_io)?;

    let results: Vec<Mutex<Option<Result<SummaryRow, CliError>>>> =
        (0..cells.len()).map(|_| Mutex::new(None)).collect();
    let next_cell = AtomicUsize::new(0);
    let workers = worker_count(cells.len());
    let out_dir: &PathBuf = &args.out;

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next_cell.fetch_add(1, Ordering::Relaxed);
                if i >= cells.len() {
                    break;
                }
                let cell = &cells[i];
                let outcome = run_cell(cell, out_dir, args.max_passes, args.epsilon);
                *results[i].lock().unwrap() = Some(outcome);
            });
        }
    });

    let mut rows = Vec::with_capacity(cells.len());
    for (cell, slot) in cells.iter().zip(&results) {
        let outcome = slot
            .lock()
            .unwrap()
            .take()
            .expect("every cell was executed");
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => {
                return Err(CliError::Other(format!(
                    "cell {} failed: {}",
                    cell.label,
                    e.message()
                )))
            }
        }
    }
    write_summary_csv(&args.out.join("summary.csv"), &rows)?;
    println!(
        "{} cells done ({} workers); combined summary in {}",
        rows.len(),
        workers,
        args.out.join("summary.csv").display()
    );
    Ok(())
}

fn run_cell(
    cell: &Cell,
    out_root: &Path,
    max_passes: Option<usize>,
    epsilon: f64,
) -> Result<SummaryRow, CliError> {
    let scenario = generate(&cell.spec)?;
    let cell_dir = out_root.join(&cell.label);
    std::fs::create_dir_all(&cell_dir).map_err(CliError::from_io)?;
    save(&scenario, cell_dir.join("scenario.json"))?;
    let config = dynamics_config(
        cell.mode.into(),
        crate::args::OrderArg::Roundrobin,
        crate::args::InitArg::Greedy,
        cell.seed,
        max_passes,
        epsilon,
        &scenario,
    );
    execute_run(
        &scenario,
        &config,
        &cell_dir,
        &cell.label,
        &cell.provenance,
        cell.seed,
    )
}
