//! Report bundle: aggregates persisted trial reports into CSV tables
//! (scheme comparison, per-group convergence breakdown, NSE checkpoints,
//! evolution traces) and a statistical-test summary.

use crate::error::{Error, Result};
use crate::experiment::{evolution_csv, TrialReport};
use crate::stats::{anova_one_way, rosare, absolute_relative_error, t_test_one_sample, ArePair};
use std::collections::BTreeMap;
use std::path::Path;

pub const TRADITIONAL_NAME: &str = "traditional";

/// Read every `trial_*.json` under the per-configuration subdirectories.
pub fn load_reports(in_dir: &Path) -> Result<Vec<TrialReport>> {
    let mut reports = Vec::new();
    let mut dirs: Vec<_> = std::fs::read_dir(in_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    for dir in dirs {
        let mut files: Vec<_> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.starts_with("trial_") && n.ends_with(".json"))
                    .unwrap_or(false)
            })
            .collect();
        files.sort();
        for file in files {
            let text = std::fs::read_to_string(&file)?;
            let report: TrialReport = serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("{}: {e}", file.display())))?;
            reports.push(report);
        }
    }
    if reports.is_empty() {
        return Err(Error::Argument(format!(
            "no trial reports found under {}",
            in_dir.display()
        )));
    }
    Ok(reports)
}

fn by_config(reports: &[TrialReport]) -> BTreeMap<&str, Vec<&TrialReport>> {
    let mut map: BTreeMap<&str, Vec<&TrialReport>> = BTreeMap::new();
    for r in reports {
        map.entry(r.config.as_str()).or_default().push(r);
    }
    for trials in map.values_mut() {
        trials.sort_by_key(|r| r.trial);
    }
    map
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Per-trial RosARE of a framework configuration against the baseline,
/// pairing trials by index. Trials where no parameter pair is eligible
/// yield no entry.
pub fn rosare_per_trial(framework: &[&TrialReport], baseline: &[&TrialReport]) -> Vec<f64> {
    let base: BTreeMap<usize, &&TrialReport> =
        baseline.iter().map(|r| (r.trial, r)).collect();
    let mut out = Vec::new();
    for f in framework {
        let Some(b) = base.get(&f.trial) else { continue };
        let pairs: Vec<ArePair> = f
            .truth
            .iter()
            .enumerate()
            .filter_map(|(i, truth)| {
                let t = (*truth)?;
                Some(ArePair {
                    framework_error: absolute_relative_error(f.medians_model[i], t),
                    framework_converged: !f.nc_flags[i],
                    baseline_error: absolute_relative_error(b.medians_model[i], t),
                    baseline_converged: !b.nc_flags[i],
                })
            })
            .collect();
        if let Some(r) = rosare(&pairs) {
            out.push(r);
        }
    }
    out
}

fn checkpoint_indices(report: &TrialReport) -> Vec<usize> {
    let c = &report.checkpoints;
    if c.len() >= 4 {
        vec![c[2], c[3], *c.last().unwrap()]
    } else {
        c.clone()
    }
}

fn nse_at(report: &TrialReport, evaluation: usize) -> f64 {
    report.best_nse[evaluation.min(report.best_nse.len()) - 1]
}

/// Emit the full report bundle into `out_dir`.
pub fn emit_report(reports: &[TrialReport], out_dir: &Path) -> Result<()> {
    let groups = by_config(reports);
    let has_framework = groups.keys().any(|&k| k != TRADITIONAL_NAME);
    if has_framework && !groups.contains_key(TRADITIONAL_NAME) {
        return Err(Error::Argument(format!(
            "pairwise metrics need the \"{TRADITIONAL_NAME}\" configuration, which is missing"
        )));
    }
    std::fs::create_dir_all(out_dir)?;
    let baseline = groups.get(TRADITIONAL_NAME);

    // Scheme comparison: one row per metric, one column per configuration.
    let mut table6 = String::from("metric");
    for name in groups.keys() {
        table6.push_str(&format!(",{name}"));
    }
    table6.push('\n');
    table6.push_str("mean_nc");
    for trials in groups.values() {
        table6.push_str(&format!(",{}", mean(trials.iter().map(|r| r.nc_count as f64))));
    }
    table6.push('\n');
    table6.push_str("mean_hb");
    for trials in groups.values() {
        table6.push_str(&format!(",{}", mean(trials.iter().map(|r| r.hb_count as f64))));
    }
    table6.push('\n');
    table6.push_str("mean_rosare");
    for (name, trials) in &groups {
        if *name == TRADITIONAL_NAME {
            table6.push(',');
        } else {
            let values = rosare_per_trial(trials, baseline.unwrap());
            if values.is_empty() {
                table6.push_str(",na");
            } else {
                table6.push_str(&format!(",{}", mean(values.into_iter())));
            }
        }
    }
    table6.push('\n');
    std::fs::write(out_dir.join("table6.csv"), table6)?;

    // Per-group NC breakdown: each framework configuration alongside the
    // baseline recounted under that configuration's grouping.
    let group_count = reports
        .iter()
        .flat_map(|r| r.groups.iter())
        .copied()
        .max()
        .unwrap_or(0);
    let nc_by_group = |r: &TrialReport, grouping: &[usize], g: usize| -> usize {
        r.nc_flags
            .iter()
            .zip(grouping)
            .filter(|(&flag, &grp)| flag && grp == g)
            .count()
    };
    let mut table7 = String::from("group");
    for name in groups.keys().filter(|&&k| k != TRADITIONAL_NAME) {
        table7.push_str(&format!(",{name},{TRADITIONAL_NAME}_under_{name}"));
    }
    table7.push('\n');
    for g in 1..=group_count {
        table7.push_str(&format!("{g}"));
        for (_, trials) in groups.iter().filter(|(&k, _)| k != TRADITIONAL_NAME) {
            let grouping = &trials[0].groups;
            let own = mean(trials.iter().map(|r| nc_by_group(r, grouping, g) as f64));
            table7.push_str(&format!(",{own}"));
            match baseline {
                Some(base) => {
                    let b = mean(base.iter().map(|r| nc_by_group(r, grouping, g) as f64));
                    table7.push_str(&format!(",{b}"));
                }
                None => table7.push(','),
            }
        }
        table7.push('\n');
    }
    std::fs::write(out_dir.join("table7.csv"), table7)?;

    // NSE at the plan's checkpoint evaluations, per trial and averaged.
    let checkpoints = checkpoint_indices(reports.first().expect("reports nonempty"));
    let mut table8 = String::from("config,trial");
    for c in &checkpoints {
        table8.push_str(&format!(",nse_at_{c}"));
    }
    table8.push('\n');
    for (name, trials) in &groups {
        for r in trials {
            table8.push_str(&format!("{name},{}", r.trial));
            for &c in &checkpoints {
                table8.push_str(&format!(",{}", nse_at(r, c)));
            }
            table8.push('\n');
        }
        table8.push_str(&format!("{name},mean"));
        for &c in &checkpoints {
            table8.push_str(&format!(",{}", mean(trials.iter().map(|r| nse_at(r, c)))));
        }
        table8.push('\n');
    }
    std::fs::write(out_dir.join("table8.csv"), table8)?;

    // Evolution traces (one CSV per trial).
    for (name, trials) in &groups {
        let dir = out_dir.join(name);
        std::fs::create_dir_all(&dir)?;
        for r in trials {
            std::fs::write(
                dir.join(format!("evolution_trial_{}.csv", r.trial)),
                evolution_csv(r),
            )?;
        }
    }

    // Statistical tests: ANOVA of final NSE across configurations and a
    // t test of each framework's per-trial RosARE against 0.5.
    let mut stats = String::from("test,statistic,p_value,detail\n");
    if groups.len() >= 2 && reports.len() > groups.len() {
        let samples: Vec<Vec<f64>> = groups
            .values()
            .map(|trials| {
                trials
                    .iter()
                    .map(|r| *r.best_nse.last().expect("nonempty evolution"))
                    .collect()
            })
            .collect();
        match anova_one_way(&samples) {
            Ok(a) => stats.push_str(&format!(
                "anova_final_nse,{},{},df=({}:{})\n",
                a.f_statistic, a.p_value, a.df_between, a.df_within
            )),
            Err(e) => stats.push_str(&format!("anova_final_nse,,,{e}\n")),
        }
    } else {
        stats.push_str("anova_final_nse,,,insufficient configurations or trials\n");
    }
    for (name, trials) in groups.iter().filter(|(&k, _)| k != TRADITIONAL_NAME) {
        let values = rosare_per_trial(trials, baseline.unwrap());
        if values.len() >= 2 {
            match t_test_one_sample(&values, 0.5) {
                Ok(t) => stats.push_str(&format!(
                    "t_rosare_{name},{},{},mean={}\n",
                    t.t_statistic,
                    t.p_value,
                    mean(values.iter().copied())
                )),
                Err(e) => stats.push_str(&format!("t_rosare_{name},,,{e}\n")),
            }
        } else {
            stats.push_str(&format!("t_rosare_{name},,,insufficient eligible trials\n"));
        }
    }
    std::fs::write(out_dir.join("stats.csv"), stats)?;
    Ok(())
}
