//! Strict line-oriented configuration: `section.key = value`, one entry per
//! line, `#` comments. Every key must be known to the selected study, every
//! violation is reported with its line number, and duplicates are rejected
//! citing both occurrences. Unset keys fall back to documented defaults.

use std::collections::HashMap;
use std::path::PathBuf;

use tamed_spde::experiments::ScheduleRule;
use tamed_spde::operators::{Flux, ModelSpec, NoiseKind, NoiseSpec};
use tamed_spde::stepper::{GuardPolicy, Scheme};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Study {
    Simulate,
    Moments,
    Converge,
    Gap,
    Diverge,
    Check,
    Schedule,
}

impl Study {
    pub fn name(&self) -> &'static str {
        match self {
            Study::Simulate => "simulate",
            Study::Moments => "moments",
            Study::Converge => "converge",
            Study::Gap => "gap",
            Study::Diverge => "diverge",
            Study::Check => "check",
            Study::Schedule => "schedule",
        }
    }
}

/// Command-line overrides; each beats the corresponding config key.
/// `workers_env` carries the WORKERS environment variable, which sits
/// between the flag and the config file in precedence.
#[derive(Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub workers: Option<usize>,
    pub workers_env: Option<String>,
    pub out: Option<PathBuf>,
    pub override_guard: bool,
}

#[derive(Clone, Debug)]
pub struct ScheduleParams {
    pub m_list: Vec<usize>,
    pub delta: f64,
    pub rule: ScheduleRule,
    pub n_max: usize,
    /// Explicit step counts for gap studies (fixed m, varying n).
    pub n_list: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug)]
pub struct ContrastParams {
    pub u0_scale: f64,
    pub dt: f64,
    pub steps: usize,
}

#[derive(Clone, Debug)]
pub struct CheckParams {
    pub m: usize,
    pub radius: f64,
    pub m_list: Vec<usize>,
}

#[derive(Clone, Copy, Debug)]
pub struct SimulateParams {
    pub m: usize,
    pub n: usize,
    pub scheme: Scheme,
    pub sample: u64,
}

#[derive(Debug)]
pub struct RunConfig {
    pub study: Study,
    pub model: ModelSpec,
    pub seed: u64,
    pub samples: usize,
    pub workers: usize,
    pub t: f64,
    pub out: PathBuf,
    pub guard: GuardPolicy,
    pub schedule: ScheduleParams,
    pub reference: (usize, usize),
    pub contrast: ContrastParams,
    pub check: CheckParams,
    pub simulate: SimulateParams,
}

struct Entry {
    line: usize,
    value: String,
}

struct Raw {
    entries: Vec<(String, Entry)>,
    index: HashMap<String, usize>,
}

impl Raw {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.index.get(key).map(|&i| &self.entries[i].1)
    }

    fn string(&self, key: &str) -> Option<&str> {
        self.get(key).map(|e| e.value.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, String> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| {
                format!("line {}: `{key} = {}` is not {what}", e.line, e.value)
            }),
        }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, String> {
        self.parse(key, "a number")
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, String> {
        self.parse(key, "a nonnegative integer")
    }

    fn u64(&self, key: &str) -> Result<Option<u64>, String> {
        self.parse(key, "a nonnegative integer")
    }

    fn bool(&self, key: &str) -> Result<Option<bool>, String> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => match e.value.as_str() {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                other => Err(format!("line {}: `{key} = {other}` is not true/false", e.line)),
            },
        }
    }

    fn usize_list(&self, key: &str) -> Result<Option<Vec<usize>>, String> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(|part| part.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| {
                    format!(
                        "line {}: `{key} = {}` is not a comma-separated integer list",
                        e.line, e.value
                    )
                }),
        }
    }

    /// "line N: " prefix from the first present key, for errors raised by
    /// downstream validation of a value combination.
    fn at(&self, keys: &[&str]) -> String {
        for key in keys {
            if let Some(e) = self.get(key) {
                return format!("line {}: ", e.line);
            }
        }
        String::new()
    }
}

fn parse_raw(text: &str) -> Result<Raw, String> {
    let mut raw = Raw { entries: Vec::new(), index: HashMap::new() };
    for (i, line) in text.lines().enumerate() {
        let lno = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (lhs, rhs) = t
            .split_once('=')
            .ok_or_else(|| format!("line {lno}: expected `section.key = value`, got `{t}`"))?;
        let key = lhs.trim();
        let value = rhs.trim().to_string();
        let mut parts = key.split('.');
        let section = parts.next().unwrap_or("");
        let name = parts.next().unwrap_or("");
        let shape_ok = parts.next().is_none()
            && !section.is_empty()
            && !name.is_empty()
            && key.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '.');
        if !shape_ok {
            return Err(format!("line {lno}: key `{key}` is not of the form `section.key`"));
        }
        if let Some(&prev) = raw.index.get(key) {
            return Err(format!(
                "line {lno}: duplicate key `{key}` (first set at line {})",
                raw.entries[prev].1.line
            ));
        }
        raw.index.insert(key.to_string(), raw.entries.len());
        raw.entries.push((key.to_string(), Entry { line: lno, value }));
    }
    Ok(raw)
}

fn allowed_keys(study: Study, model_kind: &str) -> Vec<&'static str> {
    let mut keys = vec![
        "model.kind",
        "noise.kind",
        "noise.sigma0",
        "noise.beta",
        "study.t",
        "study.samples",
        "study.seed",
        "study.workers",
        "study.guard_epsilon",
        "study.override_guard",
    ];
    match model_kind {
        "ginzburg_landau" => keys.extend(["model.dim", "model.p", "model.flux"]),
        "swift_hohenberg" => keys.extend(["model.gamma", "model.p"]),
        "fitzhugh_nagumo" => keys.extend(["model.c1", "model.c2", "model.c3"]),
        _ => {}
    }
    let schedule = ["schedule.m_list", "schedule.delta", "schedule.rule", "schedule.n_max"];
    match study {
        Study::Simulate => {
            keys.extend(["simulate.m", "simulate.n", "simulate.scheme", "simulate.sample"])
        }
        Study::Moments | Study::Schedule => keys.extend(schedule),
        Study::Converge => {
            keys.extend(schedule);
            keys.extend(["reference.m", "reference.n"]);
        }
        Study::Gap => {
            keys.extend(schedule);
            keys.push("schedule.n_list");
        }
        Study::Diverge => keys.extend(["contrast.u0_scale", "contrast.dt", "contrast.steps"]),
        Study::Check => keys.extend(["check.m", "check.radius", "check.m_list"]),
    }
    keys
}

fn build_model(raw: &Raw, study: Study) -> Result<ModelSpec, String> {
    let default_kind = if study == Study::Diverge { "scalar_toy" } else { "ginzburg_landau" };
    let kind = raw.string("model.kind").unwrap_or(default_kind);

    let noise_kind = raw.string("noise.kind");
    let sigma0 = raw.f64("noise.sigma0")?;
    let beta = raw.f64("noise.beta")?;
    let default_noise = |kind: NoiseKind| {
        NoiseSpec::new(kind, sigma0.unwrap_or(0.5), beta.unwrap_or(1.0))
            .map_err(|e| format!("{}{e}", raw.at(&["noise.sigma0", "noise.beta", "noise.kind"])))
    };
    let noise = match noise_kind {
        None => match kind {
            "ginzburg_landau" => default_noise(NoiseKind::PointwiseMultiplicative)?,
            "swift_hohenberg" => default_noise(NoiseKind::Additive)?,
            "fitzhugh_nagumo" => default_noise(NoiseKind::DiagonalMultiplicative)?,
            _ => NoiseSpec::none(),
        },
        Some("none") => NoiseSpec::none(),
        Some("additive") => default_noise(NoiseKind::Additive)?,
        Some("diagonal_multiplicative") => default_noise(NoiseKind::DiagonalMultiplicative)?,
        Some("pointwise_multiplicative") => default_noise(NoiseKind::PointwiseMultiplicative)?,
        Some(other) => {
            return Err(format!(
                "{}noise.kind `{other}` is not one of none, additive, diagonal_multiplicative, \
                 pointwise_multiplicative",
                raw.at(&["noise.kind"])
            ))
        }
    };

    let model = match kind {
        "ginzburg_landau" => {
            let dim = raw.usize("model.dim")?.unwrap_or(1);
            let p = raw.f64("model.p")?.unwrap_or(4.0);
            let flux = match raw.string("model.flux") {
                None | Some("identity") => Flux::Identity,
                Some("sigmoidal") => Flux::Sigmoidal,
                Some(other) => {
                    return Err(format!(
                        "{}model.flux `{other}` is not one of identity, sigmoidal",
                        raw.at(&["model.flux"])
                    ))
                }
            };
            ModelSpec::ginzburg_landau(dim, p, flux, noise)
        }
        "swift_hohenberg" => {
            let gamma = raw.f64("model.gamma")?.unwrap_or(0.5);
            let p = raw.f64("model.p")?.unwrap_or(3.0);
            ModelSpec::swift_hohenberg(gamma, p, noise)
        }
        "fitzhugh_nagumo" => {
            let c1 = raw.f64("model.c1")?.unwrap_or(0.08);
            let c2 = raw.f64("model.c2")?.unwrap_or(0.8);
            let c3 = raw.f64("model.c3")?.unwrap_or(0.7);
            ModelSpec::fitzhugh_nagumo(c1, c2, c3, noise)
        }
        "scalar_toy" => ModelSpec::scalar_toy(noise),
        other => {
            return Err(format!(
                "{}model.kind `{other}` is not one of ginzburg_landau, swift_hohenberg, \
                 fitzhugh_nagumo, scalar_toy",
                raw.at(&["model.kind"])
            ))
        }
    };
    model.map_err(|e| format!("{}{e}", raw.at(&["model.p", "model.dim", "model.kind"])))
}

pub fn build(study: Study, text: Option<&str>, over: &Overrides) -> Result<RunConfig, String> {
    let raw = parse_raw(text.unwrap_or(""))?;

    let default_kind = if study == Study::Diverge { "scalar_toy" } else { "ginzburg_landau" };
    let kind = raw.string("model.kind").unwrap_or(default_kind);
    let allowed = allowed_keys(study, kind);
    let unknown: Vec<String> = raw
        .entries
        .iter()
        .filter(|(key, _)| !allowed.contains(&key.as_str()))
        .map(|(key, e)| {
            format!("line {}: unknown key `{key}` for study `{}`", e.line, study.name())
        })
        .collect();
    if !unknown.is_empty() {
        return Err(unknown.join("; "));
    }

    let model = build_model(&raw, study)?;
    if study == Study::Diverge && model.name() != "scalar_toy" {
        return Err(format!(
            "{}the diverge study runs on model.kind = scalar_toy",
            raw.at(&["model.kind"])
        ));
    }

    let seed = over.seed.map(Ok).unwrap_or_else(|| raw.u64("study.seed").map(|v| v.unwrap_or(0)))?;
    let samples = match over.samples {
        Some(s) => s,
        None => raw.usize("study.samples")?.unwrap_or(200),
    };
    let workers = match (over.workers, &over.workers_env) {
        (Some(w), _) => w,
        (None, Some(env)) => env
            .parse::<usize>()
            .map_err(|_| format!("WORKERS environment variable `{env}` is not an integer"))?,
        (None, None) => raw.usize("study.workers")?.unwrap_or(1),
    };
    if samples == 0 || workers == 0 {
        return Err("study.samples and study.workers must be >= 1".into());
    }
    let t = raw.f64("study.t")?.unwrap_or(1.0);
    if !(t > 0.0) {
        return Err(format!("{}study.t must be positive, got {t}", raw.at(&["study.t"])));
    }
    let epsilon = raw.f64("study.guard_epsilon")?.unwrap_or(1.0);
    if !(epsilon > 0.0) {
        return Err(format!(
            "{}study.guard_epsilon must be positive, got {epsilon}",
            raw.at(&["study.guard_epsilon"])
        ));
    }
    let override_guard =
        over.override_guard || raw.bool("study.override_guard")?.unwrap_or(false);

    let rule = match raw.string("schedule.rule") {
        None | Some("paper_m2") => ScheduleRule::PaperM2,
        Some("exact_c4") => ScheduleRule::ExactC4,
        Some(other) => {
            return Err(format!(
                "{}schedule.rule `{other}` is not one of paper_m2, exact_c4",
                raw.at(&["schedule.rule"])
            ))
        }
    };
    let m_list = raw.usize_list("schedule.m_list")?.unwrap_or_else(|| vec![2, 4, 8]);
    let n_list = raw.usize_list("schedule.n_list")?;
    if let Some(ns) = &n_list {
        if m_list.len() != 1 {
            return Err(format!(
                "{}schedule.n_list needs a single-entry schedule.m_list (fixed cutoff), got {:?}",
                raw.at(&["schedule.n_list"]),
                m_list
            ));
        }
        if ns.is_empty() {
            return Err(format!(
                "{}schedule.n_list must not be empty",
                raw.at(&["schedule.n_list"])
            ));
        }
    }
    let n_max = match raw.usize("schedule.n_max")? {
        Some(n) => n,
        None => n_list.as_ref().map(|ns| ns.iter().copied().max().unwrap()).unwrap_or(16384),
    };
    let delta = raw.f64("schedule.delta")?.unwrap_or(0.5);

    let schedule = ScheduleParams { m_list, delta, rule, n_max, n_list };

    let reference = (
        raw.usize("reference.m")?.unwrap_or(16),
        raw.usize("reference.n")?.unwrap_or(16384),
    );

    let contrast = ContrastParams {
        u0_scale: raw.f64("contrast.u0_scale")?.unwrap_or(5.0),
        dt: raw.f64("contrast.dt")?.unwrap_or(0.1),
        steps: raw.usize("contrast.steps")?.unwrap_or(20),
    };

    let check = CheckParams {
        m: raw.usize("check.m")?.unwrap_or(8),
        radius: raw.f64("check.radius")?.unwrap_or(5.0),
        m_list: raw.usize_list("check.m_list")?.unwrap_or_else(|| vec![4, 8, 16, 32]),
    };

    let simulate = SimulateParams {
        m: raw.usize("simulate.m")?.unwrap_or(8),
        n: raw.usize("simulate.n")?.unwrap_or(256),
        scheme: match raw.string("simulate.scheme") {
            None | Some("tamed") => Scheme::Tamed,
            Some("untamed") => Scheme::Untamed,
            Some("reference") => Scheme::Reference,
            Some(other) => {
                return Err(format!(
                    "{}simulate.scheme `{other}` is not one of tamed, untamed, reference",
                    raw.at(&["simulate.scheme"])
                ))
            }
        },
        sample: raw.u64("simulate.sample")?.unwrap_or(0),
    };

    Ok(RunConfig {
        study,
        model,
        seed,
        samples,
        workers,
        t,
        out: over.out.clone().unwrap_or_else(|| PathBuf::from("reports")),
        guard: GuardPolicy { epsilon, override_guard },
        schedule,
        reference,
        contrast,
        check,
        simulate,
    })
}
