//! Study execution and artifact emission: CSV reports, a metadata sidecar,
//! and a gnuplot script per study. CSV bodies depend only on (config, seed);
//! wall time lives solely in the sidecar. In-study assertion failures leave
//! the partial outputs in place next to a FAILED marker file.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use tamed_spde::experiments::{
    default_initial_data, make_schedule, run_convergence, run_divergence_contrast, run_gap_study,
    run_moments, ReferenceSpec, Schedule, StudyOpts,
};
use tamed_spde::noise::sample_path;
use tamed_spde::operators::{
    check_coercivity, check_growth, check_interpolation, check_monotonicity,
    render_assumption_report,
};
use tamed_spde::spectral::galerkin_constant;
use tamed_spde::stepper::{integrate, LevelConfig};

use crate::config::{RunConfig, Study};

pub enum Outcome {
    Passed,
    Failed(String),
}

struct StudyOutput {
    /// None when every in-study assertion held.
    failure: Option<String>,
    /// Extra `key = value` lines for the sidecar.
    details: Vec<String>,
}

fn opts(cfg: &RunConfig) -> StudyOpts {
    StudyOpts {
        samples: cfg.samples,
        seed: cfg.seed,
        workers: cfg.workers,
        t: cfg.t,
        guard: cfg.guard,
    }
}

fn build_schedule(cfg: &RunConfig) -> Result<Schedule, String> {
    let p = &cfg.schedule;
    let schedule = match &p.n_list {
        Some(ns) => {
            let m = p.m_list[0];
            let mn: Vec<(usize, usize)> = ns.iter().map(|&n| (m, n)).collect();
            Schedule::from_levels(&cfg.model, &mn, p.rule, p.n_max)
        }
        None => make_schedule(&cfg.model, &p.m_list, p.delta, p.rule, p.n_max),
    };
    schedule.map_err(|e| e.to_string())
}

fn write_file(out: &Path, name: &str, contents: &str) -> Result<(), String> {
    fs::write(out.join(name), contents)
        .map_err(|e| format!("cannot write {}: {e}", out.join(name).display()))
}

/// Gnuplot script plotting estimate (with its standard error where useful)
/// against the level index on a log-scaled y axis.
fn plot_script(title: &str, ylabel: &str, curves: &[(&str, &str)], log_x_tau: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot script; run from this directory");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set ylabel '{ylabel}'");
    if log_x_tau {
        let _ = writeln!(s, "set xlabel 'c(m) tau'");
        let _ = writeln!(s, "set logscale xy");
    } else {
        let _ = writeln!(s, "set xlabel 'level'");
        let _ = writeln!(s, "set logscale y");
    }
    let _ = writeln!(s, "set key left top");
    let mut plots = Vec::new();
    for (file, label) in curves {
        let using = if log_x_tau { "using 6:7" } else { "using 1:7:8 with yerrorlines" };
        let style = if log_x_tau { " with linespoints" } else { "" };
        plots.push(format!("'{file}' skip 1 {using}{style} title '{label}'"));
    }
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

fn run_study(cfg: &RunConfig, out: &Path) -> Result<StudyOutput, String> {
    let o = opts(cfg);
    match cfg.study {
        Study::Moments => {
            let schedule = build_schedule(cfg)?;
            let rep = run_moments(&cfg.model, &schedule, &o, &[1, 2]).map_err(|e| e.to_string())?;
            let mut curves = Vec::new();
            let mut files = Vec::new();
            for table in &rep.tables {
                let file = format!("{}.csv", table.name);
                write_file(out, &file, &table.to_csv())?;
                files.push((file, table.name.clone()));
            }
            for (file, name) in &files {
                curves.push((file.as_str(), name.as_str()));
            }
            write_file(
                out,
                "moments.gp",
                &plot_script("moment estimates per level", "estimate", &curves, false),
            )?;
            let failure = if rep.passed() {
                None
            } else {
                Some(format!(
                    "moment assertions failed: diverged = {}, jensen_shortfall = {:.3e}",
                    rep.diverged, rep.jensen_shortfall
                ))
            };
            Ok(StudyOutput {
                failure,
                details: vec![
                    format!("diverged = {}", rep.diverged),
                    format!("jensen_shortfall = {:.6e}", rep.jensen_shortfall),
                    format!("sup_moment_spread = {:.6e}", rep.sup_moment_spread),
                ],
            })
        }
        Study::Converge => {
            let schedule = build_schedule(cfg)?;
            let reference = ReferenceSpec { m: cfg.reference.0, n: cfg.reference.1 };
            let rep = run_convergence(&cfg.model, &schedule, reference, &o)
                .map_err(|e| e.to_string())?;
            write_file(out, "strong_error.csv", &rep.table.to_csv())?;
            write_file(
                out,
                "convergence.gp",
                &plot_script(
                    "strong error against the reference",
                    "E |u_l(T) - u_ref(T)|^2",
                    &[("strong_error.csv", "strong error")],
                    false,
                ),
            )?;
            let failure = if rep.passed() {
                None
            } else {
                let errs: Vec<String> =
                    rep.table.rows.iter().map(|r| format!("{:.6e}", r.estimate)).collect();
                Some(format!(
                    "error column not monotone within one standard error: [{}], diverged = {}",
                    errs.join(", "),
                    rep.diverged
                ))
            };
            Ok(StudyOutput {
                failure,
                details: vec![
                    format!("reference_m = {}", rep.reference.m),
                    format!("reference_n = {}", rep.reference.n),
                    format!("strictly_decreasing = {}", rep.strictly_decreasing),
                    format!("diverged = {}", rep.diverged),
                ],
            })
        }
        Study::Gap => {
            let schedule = build_schedule(cfg)?;
            let rep = run_gap_study(&cfg.model, &schedule, &o).map_err(|e| e.to_string())?;
            write_file(out, "timestep_gap.csv", &rep.table.to_csv())?;
            write_file(
                out,
                "gap.gp",
                &plot_script(
                    "time-step gap per level",
                    "E int |u - ubar|^2 ds",
                    &[("timestep_gap.csv", "mean gap")],
                    true,
                ),
            )?;
            let failure = if rep.passed() {
                None
            } else {
                Some(format!(
                    "gap slope {:.4} outside [{}, {}]",
                    rep.slope, rep.band_low, rep.band_high
                ))
            };
            Ok(StudyOutput {
                failure,
                details: vec![
                    format!("slope = {:.6}", rep.slope),
                    format!("band_checked = {}", rep.band_checked),
                ],
            })
        }
        Study::Diverge => {
            let c = cfg.contrast;
            let rep = run_divergence_contrast(&cfg.model, c.u0_scale, c.dt, c.steps, &o)
                .map_err(|e| e.to_string())?;
            let mut csv = String::from("scheme,samples,diverged,divergence_fraction,sup_abs,bound\n");
            let _ = writeln!(
                csv,
                "untamed,{},{},{:.16e},NaN,NaN",
                rep.samples, rep.untamed_diverged, rep.untamed_divergence_fraction
            );
            let _ = writeln!(
                csv,
                "tamed,{},{},{:.16e},{:.16e},{:.16e}",
                rep.samples,
                rep.tamed_diverged,
                rep.tamed_diverged as f64 / rep.samples as f64,
                rep.tamed_sup,
                rep.tamed_bound
            );
            write_file(out, "contrast.csv", &csv)?;
            let failure = if rep.passed() {
                None
            } else {
                Some(format!(
                    "tamed scheme violated its bound: {} divergence flags, sup {:.3e} vs bound {:.3e}",
                    rep.tamed_diverged, rep.tamed_sup, rep.tamed_bound
                ))
            };
            Ok(StudyOutput {
                failure,
                details: vec![
                    format!("untamed_divergence_fraction = {}", rep.untamed_divergence_fraction),
                    format!(
                        "untamed_worst_step = {}",
                        rep.untamed_worst_step.map(|s| s.to_string()).unwrap_or_else(|| "none".into())
                    ),
                    format!("tamed_sup = {:.6e}", rep.tamed_sup),
                    format!("tamed_bound = {:.6e}", rep.tamed_bound),
                ],
            })
        }
        Study::Check => {
            let p = &cfg.check;
            let mono = check_monotonicity(&cfg.model, p.m, cfg.samples, p.radius, cfg.seed)
                .map_err(|e| e.to_string())?;
            let coerc = check_coercivity(&cfg.model, p.m, cfg.samples, p.radius, cfg.seed)
                .map_err(|e| e.to_string())?;
            let growth = check_growth(&cfg.model, p.m, cfg.samples, p.radius, cfg.seed)
                .map_err(|e| e.to_string())?;
            let interp = check_interpolation(&cfg.model, &p.m_list, cfg.samples, p.radius, cfg.seed)
                .map_err(|e| e.to_string())?;
            let text = render_assumption_report(&cfg.model, &mono, &coerc, &growth, &interp);
            write_file(out, "assumption_report.txt", &text)?;
            let mut bad: Vec<&str> = Vec::new();
            if !mono.passed() {
                bad.push(mono.label);
            }
            for rep in [&coerc.0, &coerc.1] {
                if !rep.passed() {
                    bad.push(rep.label);
                }
            }
            for rep in &growth {
                if !rep.passed() {
                    bad.push(rep.label);
                }
            }
            let failure = if bad.is_empty() {
                None
            } else {
                Some(format!("inequality violations in: {}", bad.join(", ")))
            };
            Ok(StudyOutput {
                failure,
                details: vec![
                    format!("checkers = monotonicity, coercivity, growth on m = {}", p.m),
                    format!("interpolation_max_drift = {:.6e}", interp.max_drift),
                ],
            })
        }
        Study::Simulate => {
            let p = cfg.simulate;
            let basis = cfg.model.basis(p.m).map_err(|e| e.to_string())?;
            let k = cfg.model.noise_modes(&basis);
            let gc = galerkin_constant(&basis, p.m, cfg.model.p).map_err(|e| e.to_string())?;
            let level = LevelConfig::new(p.m, p.n, k, cfg.t, gc.paper_form)
                .map_err(|e| e.to_string())?;
            let path =
                sample_path(cfg.seed, p.sample, p.n, k, cfg.t).map_err(|e| e.to_string())?;
            let u0 = default_initial_data(&basis);
            let rec = integrate(&cfg.model, &level, &path.view(), &u0, p.scheme, &cfg.guard, true)
                .map_err(|e| e.to_string())?;
            rec.write_snapshot_csv(&out.join("trajectory.csv")).map_err(|e| e.to_string())?;
            write_file(
                out,
                "trajectory.gp",
                &concat!(
                    "# gnuplot script; run from this directory\n",
                    "set datafile separator ','\n",
                    "set title 'first-mode coefficient along the trajectory'\n",
                    "set xlabel 't'\nset ylabel 'coefficient'\n",
                    "plot 'trajectory.csv' skip 1 using 1:2 with lines title 'mode 1'\n"
                )
                .to_string(),
            )?;
            let failure = rec.diverged.map(|step| {
                format!("{} trajectory crossed the divergence threshold at step {step}",
                    p.scheme.name())
            });
            Ok(StudyOutput {
                failure,
                details: vec![
                    format!("scheme = {}", p.scheme.name()),
                    format!("m = {}, n = {}", p.m, p.n),
                    format!("sup_h = {:.6e}", rec.max_h_sq.sqrt()),
                    format!("v1_integral = {:.6e}", rec.v1_integral),
                ],
            })
        }
        Study::Schedule => {
            let schedule = build_schedule(cfg)?;
            let mut csv = String::from("level,m,target_n,n,k,c_exact,c_paper_form,c_m_tau\n");
            for (idx, level) in schedule.levels.iter().enumerate() {
                let basis = cfg.model.basis(level.m).map_err(|e| e.to_string())?;
                let gc =
                    galerkin_constant(&basis, level.m, cfg.model.p).map_err(|e| e.to_string())?;
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{:.16e},{:.16e},{:.16e}",
                    idx,
                    level.m,
                    level.target_n,
                    level.n,
                    level.k,
                    gc.exact,
                    gc.paper_form,
                    level.c_m * cfg.t / level.n as f64
                );
            }
            write_file(out, "schedule.csv", &csv)?;
            Ok(StudyOutput {
                failure: None,
                details: vec![
                    format!("rule = {}", schedule.rule.name()),
                    format!(
                        "delta = {}",
                        schedule.delta.map(|d| d.to_string()).unwrap_or_else(|| "none".into())
                    ),
                    format!("n_max = {}", schedule.n_max),
                ],
            })
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, String> {
    fs::create_dir_all(&cfg.out)
        .map_err(|e| format!("cannot create {}: {e}", cfg.out.display()))?;
    let started = Instant::now();
    let output = run_study(cfg, &cfg.out)?;

    let mut sidecar = String::new();
    let _ = writeln!(sidecar, "study = {}", cfg.study.name());
    let _ = writeln!(sidecar, "model = {}", cfg.model.name());
    let _ = writeln!(sidecar, "seed = {}", cfg.seed);
    let _ = writeln!(sidecar, "samples = {}", cfg.samples);
    let _ = writeln!(sidecar, "workers = {}", cfg.workers);
    let _ = writeln!(sidecar, "t = {}", cfg.t);
    let _ = writeln!(sidecar, "guard_epsilon = {}", cfg.guard.epsilon);
    let _ = writeln!(sidecar, "override_guard = {}", cfg.guard.override_guard);
    for line in &output.details {
        let _ = writeln!(sidecar, "{line}");
    }
    match &output.failure {
        None => {
            let _ = writeln!(sidecar, "status = PASSED");
        }
        Some(msg) => {
            let _ = writeln!(sidecar, "status = FAILED: {msg}");
        }
    }
    let _ = writeln!(sidecar, "wall_time_seconds = {:.3}", started.elapsed().as_secs_f64());
    write_file(&cfg.out, "run_metadata.txt", &sidecar)?;

    let marker = cfg.out.join("FAILED");
    match output.failure {
        None => {
            if marker.exists() {
                let _ = fs::remove_file(&marker);
            }
            Ok(Outcome::Passed)
        }
        Some(msg) => {
            fs::write(&marker, format!("{msg}\n"))
                .map_err(|e| format!("cannot write {}: {e}", marker.display()))?;
            Ok(Outcome::Failed(msg))
        }
    }
}
