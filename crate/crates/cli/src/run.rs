//! Executing a spec: one directory per child run, then the manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use fluctsel::domain::Point;
use fluctsel::duals::{duality_check_lattice, duality_check_nonspatial, write_report_csv, DualityReport};
use fluctsel::limits::io::{write_grid_dump, write_snapshots_csv, Snapshot};
use fluctsel::limits::{diffusion_law, spde_step, tracer_spde_step, ClampCounter, SpdeParams, TracerSpdeState};
use fluctsel::moran::{origin_file_name, parse_rows, run_experiment, Allele, RecordWriters, PROPORTIONS_FILE};
use fluctsel::nonspatial::{run_nonspatial, run_rescaled, write_trajectory_csv};
use fluctsel::parallel::map_replicates;
use fluctsel::slfv::{run_rescaled_slfv, run_slfv, write_event_log, SlfvState};
use fluctsel::stats::Summary;
use fluctsel::{FrequencyField, RngContract, Substream};

use crate::config::{ChildRun, ExperimentSpec, Job};
use crate::manifest::{read_manifest, scan, write_manifest, ManifestEntry, MANIFEST_FILE};

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
    /// Internal invariants make `simulate` fail; statistical checks only `verify`.
    pub invariant: bool,
}

impl Check {
    pub fn invariant(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
            invariant: true,
        }
    }

    pub fn statistical(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
            invariant: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChildData {
    /// Law of the final value (or of the first pairing at the last time).
    Law(Summary),
    Duality(DualityReport),
    Nothing,
}

#[derive(Debug, Clone)]
pub struct ChildReport {
    pub name: String,
    pub dir: PathBuf,
    pub summary: String,
    pub checks: Vec<Check>,
    pub data: ChildData,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub out: PathBuf,
    pub children: Vec<ChildReport>,
    pub manifest: Vec<ManifestEntry>,
}

impl RunReport {
    pub fn invariants_hold(&self) -> bool {
        self.children
            .iter()
            .flat_map(|c| &c.checks)
            .all(|c| c.pass || !c.invariant)
    }
}

/// Directory of replicate `r` inside `dir` (the directory itself for a single replicate).
pub fn replicate_dir(dir: &Path, replicate: u64, replicates: usize) -> PathBuf {
    if replicates == 1 {
        dir.to_path_buf()
    } else {
        dir.join(format!("rep_{replicate:04}"))
    }
}

/// Creates `out`, removes the files of a previous run listed in its manifest
/// and fails if anything else is left or the directory is not writable.
pub fn prepare_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let old = out.join(MANIFEST_FILE);
    if old.exists() {
        let entries = read_manifest(&old).with_context(|| format!("reading {}", old.display()))?;
        for e in entries {
            let path = out.join(&e.path);
            if path.is_file() {
                fs::remove_file(&path).with_context(|| format!("removing {}", path.display()))?;
            }
        }
        fs::remove_file(&old).with_context(|| format!("removing {}", old.display()))?;
    }
    let leftover = scan(out).with_context(|| format!("scanning {}", out.display()))?;
    if let Some(e) = leftover.first() {
        bail!(
            "output directory {} already contains files not produced by a previous run (e.g. {})",
            out.display(),
            e.path
        );
    }
    let probe = out.join(".write-probe");
    File::create(&probe)
        .and_then(|_| fs::remove_file(&probe))
        .with_context(|| format!("output directory {} is not writable", out.display()))?;
    Ok(())
}

/// Runs every child of `spec` into `out` and writes the manifest.
pub fn run_spec(spec: &ExperimentSpec, out: &Path, workers: Option<usize>) -> Result<RunReport> {
    prepare_out_dir(out)?;
    let exec = || -> Vec<Result<ChildReport>> {
        spec.runs
            .par_iter()
            .map(|child| {
                let dir = if child.name.is_empty() {
                    out.to_path_buf()
                } else {
                    out.join(&child.name)
                };
                run_child(child, spec.replicates, &dir).with_context(|| {
                    if child.name.is_empty() {
                        "run failed".to_string()
                    } else {
                        format!("child run {} failed", child.name)
                    }
                })
            })
            .collect()
    };
    let results = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("cannot start worker pool")?
            .install(exec),
        None => exec(),
    };
    let children = results.into_iter().collect::<Result<Vec<_>>>()?;
    let manifest = scan(out).with_context(|| format!("scanning {}", out.display()))?;
    write_manifest(out, &manifest).with_context(|| format!("writing manifest in {}", out.display()))?;
    Ok(RunReport {
        out: out.to_path_buf(),
        children,
        manifest,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))
}

const SUMMARY_HEADER: &str = "count,mean,variance,mean_se,variance_se";

fn summary_row(s: &Summary) -> String {
    format!("{},{:?},{:?},{:?},{:?}", s.count, s.mean, s.variance, s.mean_se, s.variance_se)
}

fn write_values(dir: &Path, values: &[f64]) -> Result<()> {
    write_file(&dir.join("final.csv"), |w| {
        writeln!(w, "replicate,p")?;
        for (r, p) in values.iter().enumerate() {
            writeln!(w, "{r},{p:?}")?;
        }
        Ok(())
    })
}

fn unit_interval_check(values: &[f64]) -> Check {
    let bad = values.iter().filter(|p| !(0.0..=1.0).contains(*p)).count();
    Check::invariant("frequencies in [0, 1]", bad == 0, format!("{bad} values outside"))
}

fn run_child(child: &ChildRun, replicates: usize, dir: &Path) -> Result<ChildReport> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let contract = RngContract::new(child.seed);
    let report = |summary: String, checks: Vec<Check>, data: ChildData| ChildReport {
        name: child.name.clone(),
        dir: dir.to_path_buf(),
        summary,
        checks,
        data,
    };
    match &child.job {
        Job::NonspatialScaling {
            schedule,
            p0,
            horizon,
            record_dt,
            ..
        } => {
            let law = run_rescaled(schedule, *p0, *horizon, replicates, &contract)?;
            write_values(dir, &law.values)?;
            write_file(&dir.join("summary.csv"), |w| {
                writeln!(w, "level,{SUMMARY_HEADER}")?;
                writeln!(w, "{:?},{}", schedule.level, summary_row(&law.summary))
            })?;
            if let Some(dt) = record_dt {
                let params = schedule.params()?;
                let path = run_nonspatial(&params, *p0, *horizon, *dt, &mut contract.replicate(0))?;
                write_file(&dir.join("trajectory.csv"), |w| write_trajectory_csv(w, &path))?;
            }
            let s = law.summary;
            Ok(report(
                format!("mean {:.6} var {:.6} over {} replicates", s.mean, s.variance, s.count),
                vec![unit_interval_check(&law.values)],
                ChildData::Law(s),
            ))
        }
        Job::Sde { params, p0, horizon } => {
            let (law, clamps) = diffusion_law(params, *p0, *horizon, replicates, &contract)?;
            write_values(dir, &law.values)?;
            write_file(&dir.join("summary.csv"), |w| {
                writeln!(w, "{SUMMARY_HEADER},clamp_rate")?;
                writeln!(w, "{},{:?}", summary_row(&law.summary), clamps.rate())
            })?;
            let s = law.summary;
            Ok(report(
                format!("mean {:.6} var {:.6}, clamp rate {:.2e}", s.mean, s.variance, clamps.rate()),
                vec![unit_interval_check(&law.values)],
                ChildData::Law(s),
            ))
        }
        Job::Spde {
            params,
            w0,
            v0,
            steps,
            record_every,
        } => {
            let checks = map_replicates(replicates, |r| {
                run_spde_replicate(params, w0, v0.as_ref(), *steps, *record_every, &contract, r, &replicate_dir(dir, r, replicates))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let checks = merge_checks(checks);
            Ok(report(format!("{steps} steps x {replicates} replicates"), checks, ChildData::Nothing))
        }
        Job::Slfv {
            params,
            w0,
            v0,
            horizon,
            record_dt,
            log_events,
        } => {
            let results = map_replicates(replicates, |r| -> Result<(Vec<Check>, u64)> {
                let rdir = replicate_dir(dir, r, replicates);
                let mut streams = contract.replicate(r);
                let state = SlfvState::initial(params, w0.clone(), v0.clone(), &mut streams.environment, child.seed)?;
                let run = run_slfv(params, state, *horizon, *record_dt, streams, *log_events)?;
                let w: Vec<Snapshot> = run
                    .snapshots
                    .iter()
                    .map(|s| Snapshot {
                        time: s.t,
                        values: s.w.clone(),
                    })
                    .collect();
                write_file(&rdir.join("w.csv"), |f| write_snapshots_csv(f, &w))?;
                let fin = run.final_state.clone();
                write_file(&rdir.join("final.grid"), |f| {
                    write_grid_dump(f, params.domain(), fin.t(), fin.w().values())
                        .map_err(|e| std::io::Error::other(e.to_string()))
                })?;
                let mut checks = vec![unit_interval_check(
                    &run.snapshots.iter().flat_map(|s| s.w.iter().copied()).collect::<Vec<_>>(),
                )];
                if run.snapshots.iter().any(|s| s.v.is_some()) {
                    let v: Vec<Snapshot> = run
                        .snapshots
                        .iter()
                        .map(|s| Snapshot {
                            time: s.t,
                            values: s.v.clone().unwrap_or_default(),
                        })
                        .collect();
                    write_file(&rdir.join("v.csv"), |f| write_snapshots_csv(f, &v))?;
                    let bad = run
                        .snapshots
                        .iter()
                        .map(|s| s.w.iter().zip(s.v.iter().flatten()).filter(|(w, v)| *v > *w || **v < 0.0).count())
                        .sum::<usize>();
                    checks.push(Check::invariant("tracer 0 <= v <= w", bad == 0, format!("{bad} violations")));
                }
                if *log_events {
                    let d = params.domain().dimension();
                    write_file(&rdir.join("events.csv"), |f| write_event_log(f, d, &run.events))?;
                }
                Ok((checks, run.counts.neutral + run.counts.selective))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let events: u64 = results.iter().map(|r| r.1).sum();
            let checks = merge_checks(results.into_iter().map(|r| r.0).collect());
            Ok(report(
                format!("{events} reproduction events over {replicates} replicates"),
                checks,
                ChildData::Nothing,
            ))
        }
        Job::SlfvRescaled {
            spec,
            kernel,
            initial,
            times,
        } => {
            let side = kernel.domain().side();
            let one = |_: Point| 1.0;
            let wave = move |x: Point| (2.0 * std::f64::consts::PI * x[0] / side).cos();
            let functions: [&(dyn Fn(Point) -> f64 + Sync); 2] = [&one, &wave];
            let run = run_rescaled_slfv(spec, kernel.clone(), initial, times, &functions, replicates, &contract)?;
            write_file(&dir.join("pairings.csv"), |w| {
                writeln!(w, "replicate,t,f0,f1")?;
                for (r, rows) in run.values.iter().enumerate() {
                    for (t, row) in run.times.iter().zip(rows) {
                        writeln!(w, "{r},{t:?},{:?},{:?}", row[0], row[1])?;
                    }
                }
                Ok(())
            })?;
            write_file(&dir.join("summary.csv"), |w| {
                writeln!(w, "level,t,function,{SUMMARY_HEADER}")?;
                for (k, t) in run.times.iter().enumerate() {
                    for f in 0..2 {
                        writeln!(w, "{:?},{t:?},f{f},{}", spec.level(), summary_row(&run.summary(k, f)))?;
                    }
                }
                Ok(())
            })?;
            let last = run.summary(run.times.len() - 1, 0);
            let finite = run.values.iter().flatten().flatten().all(|x| x.is_finite());
            Ok(report(
                format!("level {}: var <w, 1> = {:.3e} at t = {}", spec.level(), last.variance, times[times.len() - 1]),
                vec![Check::invariant("pairings finite", finite, "")],
                ChildData::Law(last),
            ))
        }
        Job::DualityNonspatial {
            x0,
            n0,
            impact,
            selection,
            horizon,
            dt,
        } => {
            let r = duality_check_nonspatial(*x0, *n0, *impact, *selection, *horizon, *dt, replicates, &contract)?;
            write_file(&dir.join("report.csv"), |w| write_report_csv(w, &[r]))?;
            Ok(duality_report(r, report))
        }
        Job::DualityLattice {
            params,
            x0,
            dual0,
            horizon,
            dt,
        } => {
            let r = duality_check_lattice(params, x0, dual0, *horizon, *dt, replicates, &contract)?;
            write_file(&dir.join("report.csv"), |w| write_report_csv(w, &[r]))?;
            Ok(duality_report(r, report))
        }
        Job::Moran { config, log_events } => {
            let results = map_replicates(replicates, |r| -> Result<(f64, Option<Allele>, Vec<Check>)> {
                let rdir = replicate_dir(dir, r, replicates);
                let mut writers = RecordWriters::create(&rdir, config.demes, *log_events)?;
                let s = run_experiment(config, &contract, r, Some(&mut writers))?;
                drop(writers);
                let checks = moran_file_checks(&rdir, config.demes)?;
                Ok((s.population.global_proportion(), s.fixed, checks))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            write_file(&dir.join("final.csv"), |w| {
                writeln!(w, "replicate,global,fixed")?;
                for (r, (p, fixed, _)) in results.iter().enumerate() {
                    let f = match fixed {
                        Some(Allele::Lower) => "a",
                        Some(Allele::Upper) => "A",
                        None => "none",
                    };
                    writeln!(w, "{r},{p:?},{f}")?;
                }
                Ok(())
            })?;
            let globals: Vec<f64> = results.iter().map(|r| r.0).collect();
            let s = Summary::of(&globals);
            let checks = merge_checks(results.into_iter().map(|r| r.2).collect());
            Ok(report(
                format!("{}: final global a-proportion {:.4} over {replicates} replicates", config.scenario.name(), s.mean),
                checks,
                ChildData::Law(s),
            ))
        }
    }
}

fn duality_report(r: DualityReport, report: impl Fn(String, Vec<Check>, ChildData) -> ChildReport) -> ChildReport {
    let detail = format!(
        "lhs {:.5} ± {:.5}, rhs {:.5} ± {:.5}, z = {:.2}",
        r.lhs, r.lhs_se, r.rhs, r.rhs_se, r.z_score
    );
    report(
        detail.clone(),
        vec![Check::statistical("duality within 3 SE", r.pass, detail)],
        ChildData::Duality(r),
    )
}

/// Folds per-replicate checks of the same name into one.
fn merge_checks(per_replicate: Vec<Vec<Check>>) -> Vec<Check> {
    let mut merged: Vec<Check> = Vec::new();
    for (r, checks) in per_replicate.into_iter().enumerate() {
        for c in checks {
            match merged.iter_mut().find(|m| m.name == c.name) {
                Some(m) => {
                    if m.pass && !c.pass {
                        m.pass = false;
                        m.detail = format!("replicate {r}: {}", c.detail);
                    }
                }
                None => merged.push(Check {
                    detail: if c.pass { c.detail } else { format!("replicate {r}: {}", c.detail) },
                    ..c
                }),
            }
        }
    }
    merged
}

#[allow(clippy::too_many_arguments)]
fn run_spde_replicate(
    params: &SpdeParams,
    w0: &FrequencyField,
    v0: Option<&FrequencyField>,
    steps: u64,
    record_every: u64,
    contract: &RngContract,
    replicate: u64,
    dir: &Path,
) -> Result<Vec<Check>> {
    let mut rng = contract.stream(Substream::Noise, replicate);
    let mut clamps = ClampCounter::default();
    let dt = params.dt();
    let terms = params.terms();
    let conservative = !terms.reaction && !terms.white_noise && (!terms.coloured_noise || params.selection() == 0.0);
    let mut w_snaps = vec![Snapshot::of(0.0, w0)];
    let mut v_snaps = Vec::new();
    let mut max_drift = 0.0f64;
    let (w_final, v_final) = match v0 {
        None => {
            let mut w = w0.clone();
            for k in 1..=steps {
                let before = w.integral();
                spde_step(&mut w, params, &mut rng, &mut clamps)?;
                max_drift = max_drift.max((w.integral() - before).abs());
                if k % record_every == 0 || k == steps {
                    w_snaps.push(Snapshot::of(k as f64 * dt, &w));
                }
            }
            (w, None)
        }
        Some(v0) => {
            v_snaps.push(Snapshot::of(0.0, v0));
            let mut state = TracerSpdeState::new(w0.clone(), v0.clone())?;
            for k in 1..=steps {
                let before = state.w().integral();
                tracer_spde_step(&mut state, params, &mut rng, &mut clamps)?;
                max_drift = max_drift.max((state.w().integral() - before).abs());
                if k % record_every == 0 || k == steps {
                    w_snaps.push(Snapshot::of(k as f64 * dt, state.w()));
                    v_snaps.push(Snapshot::of(k as f64 * dt, state.v()));
                }
            }
            (state.w().clone(), Some(state.v().clone()))
        }
    };
    let t_end = steps as f64 * dt;
    write_file(&dir.join("w.csv"), |f| write_snapshots_csv(f, &w_snaps))?;
    let grid = |path: &Path, field: &FrequencyField| {
        write_file(path, |f| {
            write_grid_dump(f, params.domain(), t_end, field.values()).map_err(|e| std::io::Error::other(e.to_string()))
        })
    };
    grid(&dir.join("final.grid"), &w_final)?;
    let mut checks = vec![unit_interval_check(w_final.values())];
    if let Some(v) = &v_final {
        write_file(&dir.join("v.csv"), |f| write_snapshots_csv(f, &v_snaps))?;
        grid(&dir.join("final_v.grid"), v)?;
        let bad = v.values().iter().zip(w_final.values()).filter(|(v, w)| v > w).count();
        checks.push(Check::invariant("tracer 0 <= v <= w", bad == 0, format!("{bad} violations")));
    }
    if conservative {
        checks.push(Check::invariant(
            "mass conserved per step",
            max_drift <= 1e-10,
            format!("largest change {max_drift:.3e}"),
        ));
    }
    Ok(checks)
}

/// Column counts and origin partition of the record files in `dir`.
fn moran_file_checks(dir: &Path, demes: usize) -> Result<Vec<Check>> {
    let read = |name: &str| -> Result<Vec<Vec<f64>>> {
        let path = dir.join(name);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(parse_rows(&text)?)
    };
    let props = read(PROPORTIONS_FILE)?;
    let bad_cols = props.iter().filter(|r| r.len() != demes + 2).count();
    let mut sums: Vec<Vec<f64>> = vec![vec![0.0; demes]; props.len()];
    let mut shape_ok = true;
    for g in 0..demes {
        let rows = read(&origin_file_name(g))?;
        if rows.len() != props.len() {
            shape_ok = false;
            continue;
        }
        for (row, sum) in rows.iter().zip(sums.iter_mut()) {
            if row.len() != demes + 1 {
                shape_ok = false;
                continue;
            }
            for d in 0..demes {
                sum[d] += row[d + 1];
            }
        }
    }
    let worst = sums.iter().flatten().map(|s| (s - 1.0).abs()).fold(0.0f64, f64::max);
    Ok(vec![
        Check::invariant(
            "proportion rows have demes + 2 columns",
            bad_cols == 0,
            format!("{bad_cols} malformed rows"),
        ),
        Check::invariant(
            "origin rows partition each deme",
            shape_ok && worst <= 1e-12,
            format!("largest deviation {worst:.3e}"),
        ),
    ])
}
