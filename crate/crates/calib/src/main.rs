use calib::config::load_config;
use calib::error::{Error, Result};
use calib::experiment::run_experiment;
use calib::models;
use calib::objective::evaluate_candidate;
use calib::report::{emit_report, load_reports};
use calib::sensitivity::{factorial_design, main_effects, rank_and_group};
use calib::space::{apply_scale, ScaleDirection};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "calib", about = "Multiresolution heterogeneous calibration harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic truth watershed and write it with its observations.
    MakeTruth {
        #[arg(long)]
        cells: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Factorial sensitivity screening over the config's parameter space.
    Sensitivity {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 128)]
        max_runs: usize,
        /// Directory for design/responses/effects/ranking files and the
        /// regrouped parameter space (paste into a calibrate config's "space").
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every configuration x trial of an experiment config.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Aggregate persisted trial reports into the CSV report bundle.
    Report {
        #[arg(long = "in")]
        in_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn make_truth(cells: usize, seed: u64, out: &PathBuf) -> Result<()> {
    let truth = models::make_truth(cells, seed)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("truth.json"), serde_json::to_string_pretty(&truth)?)?;
    let mut csv = String::from("day,observed\n");
    for (i, v) in truth.observed.iter().enumerate() {
        csv.push_str(&format!("{i},{v}\n"));
    }
    std::fs::write(out.join("observed.csv"), csv)?;
    println!(
        "wrote truth.json and observed.csv for {cells} cells ({} days) to {}",
        truth.observed.len(),
        out.display()
    );
    Ok(())
}

fn sensitivity(config_path: &PathBuf, max_runs: usize, out: &PathBuf) -> Result<()> {
    let config = load_config(config_path)?;
    let calib::config::ModelSpec::Synthetic { cells, seed, days } = config.model else {
        return Err(Error::Config(
            "sensitivity screening needs the synthetic model".into(),
        ));
    };
    let truth = models::make_truth_with_days(cells, days, seed)?;
    let space = config.resolved_space()?;
    let design = factorial_design(space.len(), max_runs)?;
    let model = models::InitialModel {
        regions: truth.regions.clone(),
        forcing: truth.forcing.clone(),
    };
    let ranges = space.original_ranges();
    let spinup = calib::experiment::SPINUP_DAYS;
    let days_total = truth.forcing.len();
    use rayon::prelude::*;
    let responses: Vec<f64> = design
        .rows
        .par_iter()
        .map(|row| {
            let assignment: Vec<f64> = row
                .iter()
                .zip(space.params.iter().zip(&ranges))
                .map(|(&code, (spec, range))| {
                    let search = if code > 0 { range.hi } else { range.lo };
                    apply_scale(spec, search, ScaleDirection::ToModel)
                })
                .collect::<Result<_>>()?;
            Ok(evaluate_candidate(&model, &assignment, &truth.observed, spinup..days_total)?
                .values[0])
        })
        .collect::<Result<_>>()?;
    let effects = main_effects(&design, &responses)?;
    let g = config.resolved_plan().group_count;
    let (ranking, assignment, fixed) = rank_and_group(&effects, g, 0.01, None)?;

    std::fs::create_dir_all(out)?;
    let mut design_csv = String::from("run,");
    design_csv.push_str(
        &space.params.iter().map(|p| p.name.clone()).collect::<Vec<_>>().join(","),
    );
    design_csv.push('\n');
    for (i, row) in design.rows.iter().enumerate() {
        design_csv.push_str(&format!("{},", i + 1));
        design_csv
            .push_str(&row.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","));
        design_csv.push('\n');
    }
    std::fs::write(out.join("design.csv"), design_csv)?;

    let mut responses_csv = String::from("run,response\n");
    for (i, r) in responses.iter().enumerate() {
        responses_csv.push_str(&format!("{},{r}\n", i + 1));
    }
    std::fs::write(out.join("responses.csv"), responses_csv)?;

    let mut effects_csv = String::from("parameter,main_effect\n");
    for (spec, e) in space.params.iter().zip(&effects) {
        effects_csv.push_str(&format!("{},{e}\n", spec.name));
    }
    std::fs::write(out.join("effects.csv"), effects_csv)?;

    let mut ranking_csv = String::from("rank,parameter,abs_effect,group\n");
    for (rank, (idx, effect)) in ranking.entries.iter().enumerate() {
        ranking_csv.push_str(&format!(
            "{},{},{},{}\n",
            rank + 1,
            space.params[*idx].name,
            effect,
            assignment.groups[idx]
        ));
    }
    for idx in &fixed {
        ranking_csv.push_str(&format!("fixed,{},insensitive,\n", space.params[*idx].name));
    }
    std::fs::write(out.join("ranking.csv"), &ranking_csv)?;

    // Regrouped space, directly usable as the "space" field of a calibrate
    // config. Insensitive parameters land in the last (least influential)
    // group rather than being dropped, so the space stays complete.
    let mut grouped = space.params.clone();
    for (idx, group) in &assignment.groups {
        grouped[*idx].group = *group;
    }
    for idx in &fixed {
        grouped[*idx].group = g;
    }
    std::fs::write(out.join("grouped_space.json"), serde_json::to_string_pretty(&grouped)?)?;

    println!("design: {} runs, {} generators", design.runs(), design.generators.len());
    print!("{ranking_csv}");
    println!("wrote design/responses/effects/ranking/grouped_space to {}", out.display());
    Ok(())
}

fn calibrate(config_path: &PathBuf, out: &PathBuf, jobs: Option<usize>) -> Result<()> {
    if let Some(j) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Error::State(format!("thread pool: {e}")))?;
    }
    let config = load_config(config_path)?;
    let outcome = run_experiment(&config, out)?;
    println!(
        "{} trial reports written to {}",
        outcome.reports.len(),
        out.display()
    );
    for f in &outcome.failures {
        eprintln!("FAILED {} trial {}: {}", f.config, f.trial, f.message);
    }
    if outcome.reports.is_empty() {
        return Err(Error::State("every trial failed".into()));
    }
    Ok(())
}

fn report(in_dir: &PathBuf, out: &PathBuf) -> Result<()> {
    let reports = load_reports(in_dir)?;
    emit_report(&reports, out)?;
    println!("report bundle written to {}", out.display());
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems exit 1; --help/--version exit 0.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match &cli.command {
        Command::MakeTruth { cells, seed, out } => make_truth(*cells, *seed, out),
        Command::Sensitivity { config, max_runs, out } => sensitivity(config, *max_runs, out),
        Command::Calibrate { config, out, jobs } => calibrate(config, out, *jobs),
        Command::Report { in_dir, out } => report(in_dir, out),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(2);
    }
}
