//! `verify`: run a spec twice, then apply the checks relevant to its kind.

use std::collections::BTreeMap;
use std::fs;

use anyhow::Result;

use fluctsel::limits::{diffusion_law, DiffusionParams};
use fluctsel::moran::{origin_file_name, EVENTS_FILE, PROPORTIONS_FILE};
use fluctsel::stats::{z_score, Summary};
use fluctsel::RngContract;

use crate::config::{ExperimentSpec, Job, Kind};
use crate::run::{replicate_dir, run_spec, Check, ChildData, RunReport};

const PASS_Z: f64 = 3.0;

pub fn verify(spec: &ExperimentSpec, workers: Option<usize>) -> Result<Vec<Check>> {
    let first_dir = tempfile::tempdir()?;
    let second_dir = tempfile::tempdir()?;
    let first = run_spec(spec, first_dir.path(), workers)?;
    let second = run_spec(spec, second_dir.path(), workers)?;
    let mut checks = Vec::new();
    for child in &first.children {
        for c in &child.checks {
            let name = if child.name.is_empty() {
                c.name.clone()
            } else {
                format!("{}: {}", child.name, c.name)
            };
            checks.push(Check { name, ..c.clone() });
        }
    }
    let same = first.manifest == second.manifest;
    checks.push(Check::statistical(
        "identical checksums on re-run",
        same,
        format!("{} files", first.manifest.len()),
    ));
    match spec.kind {
        Kind::NonspatialScaling => checks.extend(scaling_checks(spec, &first)?),
        Kind::SlfvRescaled => checks.extend(rescaled_checks(spec, &first)),
        Kind::Moran => checks.extend(comparability_checks(spec, &first)?),
        _ => {}
    }
    Ok(checks)
}

/// Rescaled means and variances against the Euler-Maruyama diffusion.
fn scaling_checks(spec: &ExperimentSpec, report: &RunReport) -> Result<Vec<Check>> {
    // Group levels by everything else, so that sweeps over other parameters compare like with like.
    let mut groups: BTreeMap<String, Vec<(f64, Summary, DiffusionParams, f64, f64)>> = BTreeMap::new();
    for (child, out) in spec.runs.iter().zip(&report.children) {
        let Job::NonspatialScaling {
            schedule,
            p0,
            horizon,
            reference_dt,
            ..
        } = &child.job
        else {
            continue;
        };
        let ChildData::Law(s) = &out.data else { continue };
        let key = format!(
            "u={} s={} alpha={} p0={p0} t={horizon}",
            schedule.base_impact, schedule.base_selection, schedule.alpha
        );
        let params = DiffusionParams::new(schedule.base_impact, schedule.base_selection, *reference_dt)?;
        groups
            .entry(key)
            .or_default()
            .push((schedule.level, *s, params, *p0, *horizon));
    }
    let mut checks = Vec::new();
    for (key, mut levels) in groups {
        levels.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (_, _, params, p0, horizon) = levels[0];
        let replicates = spec.replicates.max(2);
        let (law, _) = diffusion_law(&params, p0, horizon, replicates, &RngContract::new(spec.seed))?;
        let em = law.summary;
        let gaps: Vec<(f64, f64)> = levels
            .iter()
            .map(|(_, s, ..)| ((s.mean - em.mean).abs(), (s.variance - em.variance).abs()))
            .collect();
        let (_, top, ..) = levels[levels.len() - 1];
        let zm = z_score(top.mean, top.mean_se, em.mean, em.mean_se);
        let zv = z_score(top.variance, top.variance_se, em.variance, em.variance_se);
        checks.push(Check::statistical(
            format!("{key}: largest level within {PASS_Z} SE of the diffusion"),
            zm.abs() <= PASS_Z && zv.abs() <= PASS_Z,
            format!("z(mean) = {zm:.2}, z(var) = {zv:.2}"),
        ));
        if levels.len() >= 2 {
            let monotone = gaps.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 < w[0].1);
            checks.push(Check::statistical(
                format!("{key}: gaps to the diffusion shrink with the level"),
                monotone,
                format!("{:?}", gaps),
            ));
        }
    }
    Ok(checks)
}

/// Without selection the pairing variance must fall strictly with the level.
fn rescaled_checks(spec: &ExperimentSpec, report: &RunReport) -> Vec<Check> {
    let mut levels: Vec<(f64, f64)> = spec
        .runs
        .iter()
        .zip(&report.children)
        .filter_map(|(child, out)| match (&child.job, &out.data) {
            (Job::SlfvRescaled { spec, .. }, ChildData::Law(s)) if spec.selection() == 0.0 => {
                Some((spec.level(), s.variance))
            }
            _ => None,
        })
        .collect();
    if levels.len() < 2 {
        return Vec::new();
    }
    levels.sort_by(|a, b| a.0.total_cmp(&b.0));
    let decreasing = levels.windows(2).all(|w| w[1].1 < w[0].1);
    vec![Check::statistical(
        "neutral pairing variance decreases strictly with the level",
        decreasing,
        format!("{:?}", levels),
    )]
}

/// Children sharing a seed (scenario variants) must share event logs, and
/// their records when selection is off.
fn comparability_checks(spec: &ExperimentSpec, report: &RunReport) -> Result<Vec<Check>> {
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, child) in spec.runs.iter().enumerate() {
        groups.entry(child.seed).or_default().push(i);
    }
    let mut checks = Vec::new();
    for (seed, members) in groups.into_iter().filter(|(_, m)| m.len() > 1) {
        let Job::Moran { config, log_events } = &spec.runs[members[0]].job else {
            continue;
        };
        let mut files = Vec::new();
        if *log_events {
            files.push(EVENTS_FILE.to_string());
        }
        let neutral = config.selection == 0.0;
        if neutral {
            files.push(PROPORTIONS_FILE.to_string());
            files.extend((0..config.demes).map(origin_file_name));
        }
        if files.is_empty() {
            continue;
        }
        let mut identical = true;
        let mut first_diff = String::new();
        'outer: for r in 0..spec.replicates as u64 {
            for name in &files {
                let read = |i: usize| fs::read(replicate_dir(&report.children[i].dir, r, spec.replicates).join(name));
                let reference = read(members[0])?;
                for &m in &members[1..] {
                    if read(m)? != reference {
                        identical = false;
                        first_diff = format!("{name} differs for {}", report.children[m].name);
                        break 'outer;
                    }
                }
            }
        }
        let what = match (*log_events, neutral) {
            (true, true) => "event logs and records",
            (true, false) => "event logs",
            _ => "records",
        };
        checks.push(Check::statistical(
            format!("seed {seed}: byte-identical {what} across scenarios"),
            identical,
            first_diff,
        ));
    }
    Ok(checks)
}
