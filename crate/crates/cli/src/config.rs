//! Line-oriented `key = value` run configuration with `[section]`
//! headers, `#` comments, and strict unknown-key rejection. CLI `--set
//! section.key=value` overrides are applied on top of file values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sps_core::model::{DrivePulse, RateSet, StopRule, ToleranceSpec};
use sps_core::optimize::{PulseParam, SimOptions, Solver, SweepParam};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

type Section = BTreeMap<String, String>;

/// Raw parsed file: section → key → value.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    sections: BTreeMap<String, Section>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        let mut current = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError(format!("line {}: malformed section header", lineno + 1)))?;
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected 'key = value'", lineno + 1)))?;
            if current.is_empty() {
                return Err(ConfigError(format!("line {}: key before any [section]", lineno + 1)));
            }
            sections
                .entry(current.clone())
                .or_default()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { sections })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Apply a `section.key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (path, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("override '{assignment}' is not section.key=value")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| ConfigError(format!("override '{assignment}' is not section.key=value")))?;
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    fn section(&self, name: &str) -> Option<&Section> {
        self.sections.get(name)
    }

    fn reject_unknown(&self, name: &str, known: &[&str]) -> Result<(), ConfigError> {
        if let Some(sec) = self.section(name) {
            for key in sec.keys() {
                if !known.contains(&key.as_str()) {
                    let mut msg = format!("[{name}] unknown key '{key}' (known:");
                    for k in known {
                        let _ = write!(msg, " {k}");
                    }
                    msg.push(')');
                    return Err(ConfigError(msg));
                }
            }
        }
        Ok(())
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.section(section).and_then(|s| s.get(key)).map(String::as_str)
    }

    fn get_f64(&self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("[{section}] {key} = '{v}' is not a number"))),
        }
    }

    fn get_u64(&self, section: &str, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("[{section}] {key} = '{v}' is not an integer"))),
        }
    }
}

const RATE_KEYS: &[&str] = &[
    "g", "kappa_in", "kappa_ex", "gamma", "r_u", "r_g", "r_o", "delta_e", "delta_u",
];
const PULSE_KEYS: &[&str] = &[
    "family", "omega_max", "duration", "ramp", "center", "width", "knots", "chirp",
];
const STOP_KEYS: &[&str] = &["t_max", "eps_stop"];
const TOL_KEYS: &[&str] = &["rtol", "atol"];
const RUN_KEYS: &[&str] = &["solver", "seed", "n_samples", "output"];
const SWEEP_KEYS: &[&str] = &[
    "param", "values", "linspace", "logspace", "param2", "values2", "linspace2", "logspace2",
];
const OPT_KEYS: &[&str] = &["mode", "lo", "hi", "tol", "budget", "seed", "free"];

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub rates: RateSet,
    pub pulse: DrivePulse,
    /// None → derive the window per run via `StopRule::auto`.
    pub t_max: Option<f64>,
    pub eps_stop: f64,
    pub tol: ToleranceSpec,
    pub solver: Solver,
    pub seed: u64,
    pub n_samples: u64,
    pub output: Option<String>,
}

impl RunConfig {
    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            tol: self.tol,
            stop: self.t_max.map(|t_max| StopRule { t_max, eps_stop: self.eps_stop }),
            eps_stop: self.eps_stop,
            n_samples: self.n_samples,
            seed: self.seed,
        }
    }
}

pub fn parse_solver(name: &str) -> Result<Solver, ConfigError> {
    match name {
        "amplitudes" => Ok(Solver::Amplitudes),
        "master" => Ok(Solver::Master),
        "montecarlo" => Ok(Solver::MonteCarlo),
        other => Err(ConfigError(format!(
            "unknown solver '{other}' (amplitudes | master | montecarlo)"
        ))),
    }
}

pub fn resolve_run(cfg: &ConfigFile) -> Result<RunConfig, ConfigError> {
    cfg.reject_unknown("rates", RATE_KEYS)?;
    cfg.reject_unknown("pulse", PULSE_KEYS)?;
    cfg.reject_unknown("stop", STOP_KEYS)?;
    cfg.reject_unknown("tolerance", TOL_KEYS)?;
    cfg.reject_unknown("run", RUN_KEYS)?;

    let rates = RateSet {
        g: cfg.get_f64("rates", "g", 1.0)?,
        kappa_in: cfg.get_f64("rates", "kappa_in", 0.0)?,
        kappa_ex: cfg.get_f64("rates", "kappa_ex", 1.0)?,
        gamma: cfg.get_f64("rates", "gamma", 1.0)?,
        r_u: cfg.get_f64("rates", "r_u", 0.0)?,
        r_g: cfg.get_f64("rates", "r_g", 1.0)?,
        r_o: cfg.get_f64("rates", "r_o", 0.0)?,
        delta_e: cfg.get_f64("rates", "delta_e", 0.0)?,
        delta_u: cfg.get_f64("rates", "delta_u", 0.0)?,
    };

    let pulse = resolve_pulse(cfg)?;

    let t_max = match cfg.get("stop", "t_max") {
        None | Some("auto") => None,
        Some(v) => Some(
            v.parse()
                .map_err(|_| ConfigError(format!("[stop] t_max = '{v}' is not a number or 'auto'")))?,
        ),
    };
    let eps_stop = cfg.get_f64("stop", "eps_stop", StopRule::DEFAULT_EPS_STOP)?;

    let tol = ToleranceSpec::new(
        cfg.get_f64("tolerance", "rtol", 1e-9)?,
        cfg.get_f64("tolerance", "atol", 1e-12)?,
    );

    let solver = parse_solver(cfg.get("run", "solver").unwrap_or("master"))?;

    Ok(RunConfig {
        rates,
        pulse,
        t_max,
        eps_stop,
        tol,
        solver,
        seed: cfg.get_u64("run", "seed", 0)?,
        n_samples: cfg.get_u64("run", "n_samples", 10_000)?,
        output: cfg.get("run", "output").map(str::to_string),
    })
}

fn resolve_pulse(cfg: &ConfigFile) -> Result<DrivePulse, ConfigError> {
    let family = cfg.get("pulse", "family").unwrap_or("constant");
    let omega_max = cfg.get_f64("pulse", "omega_max", 1.0)?;
    let duration = cfg.get_f64("pulse", "duration", 10.0)?;
    let chirp = cfg.get_f64("pulse", "chirp", 0.0)?;
    let pulse = match family {
        "constant" => DrivePulse::constant(omega_max, duration),
        "sin2_ramp" => {
            let ramp = cfg.get_f64("pulse", "ramp", duration)?;
            DrivePulse::sin2_ramp(omega_max, duration, ramp)
        }
        "gaussian" => {
            let center = cfg.get_f64("pulse", "center", 0.5 * duration)?;
            let width = cfg.get_f64("pulse", "width", duration / 8.0)?;
            DrivePulse::gaussian(omega_max, duration, center, width)
        }
        "piecewise_linear" => {
            let spec = cfg
                .get("pulse", "knots")
                .ok_or_else(|| ConfigError("[pulse] piecewise_linear requires 'knots'".into()))?;
            let mut knots = Vec::new();
            for item in spec.split(',') {
                let (t, w) = item
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| ConfigError(format!("[pulse] knot '{item}' is not time:omega")))?;
                let t: f64 = t
                    .trim()
                    .parse()
                    .map_err(|_| ConfigError(format!("[pulse] knot time '{t}' is not a number")))?;
                let w: f64 = w
                    .trim()
                    .parse()
                    .map_err(|_| ConfigError(format!("[pulse] knot omega '{w}' is not a number")))?;
                knots.push((t, w));
            }
            DrivePulse::piecewise_linear(knots)
        }
        "vstirap_sin" => DrivePulse::vstirap_sin(omega_max, duration),
        other => {
            return Err(ConfigError(format!(
                "unknown pulse family '{other}' (constant | sin2_ramp | gaussian | piecewise_linear | vstirap_sin)"
            )))
        }
    };
    Ok(pulse.with_chirp(chirp))
}

fn resolve_grid(cfg: &ConfigFile, values: &str, lin: &str, log: &str) -> Result<Option<Vec<f64>>, ConfigError> {
    let parse_list = |v: &str| -> Result<Vec<f64>, ConfigError> {
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| ConfigError(format!("grid entry '{s}' is not a number")))
            })
            .collect()
    };
    if let Some(v) = cfg.get("sweep", values) {
        return Ok(Some(parse_list(v)?));
    }
    for (key, kind) in [(lin, "linspace"), (log, "logspace")] {
        if let Some(v) = cfg.get("sweep", key) {
            let parts = parse_list(v)?;
            if parts.len() != 3 {
                return Err(ConfigError(format!("[sweep] {kind} needs 'lo, hi, n'")));
            }
            let n = parts[2] as usize;
            let grid = if kind == "linspace" {
                sps_core::linspace(parts[0], parts[1], n)
            } else {
                sps_core::logspace(parts[0], parts[1], n)
            };
            return Ok(Some(grid));
        }
    }
    Ok(None)
}

/// Parsed `[sweep]` section: one or two named axes.
pub fn resolve_sweep_axes(cfg: &ConfigFile) -> Result<Vec<(SweepParam, Vec<f64>)>, ConfigError> {
    cfg.reject_unknown("sweep", SWEEP_KEYS)?;
    let name = cfg
        .get("sweep", "param")
        .ok_or_else(|| ConfigError("[sweep] requires 'param'".into()))?;
    let param = SweepParam::parse(name).map_err(|e| ConfigError(e.to_string()))?;
    let grid = resolve_grid(cfg, "values", "linspace", "logspace")?
        .ok_or_else(|| ConfigError("[sweep] requires values, linspace, or logspace".into()))?;
    let mut axes = vec![(param, grid)];
    if let Some(name2) = cfg.get("sweep", "param2") {
        let param2 = SweepParam::parse(name2).map_err(|e| ConfigError(e.to_string()))?;
        let grid2 = resolve_grid(cfg, "values2", "linspace2", "logspace2")?
            .ok_or_else(|| ConfigError("[sweep] param2 requires values2/linspace2/logspace2".into()))?;
        axes.push((param2, grid2));
    }
    Ok(axes)
}

/// Parsed `[optimize]` section.
#[derive(Debug, Clone)]
pub enum OptimizeMode {
    KappaEx { lo: f64, hi: f64, tol: f64 },
    Pulse { free: Vec<(PulseParam, (f64, f64))>, budget: usize, seed: u64 },
}

pub fn resolve_optimize(cfg: &ConfigFile) -> Result<OptimizeMode, ConfigError> {
    cfg.reject_unknown("optimize", OPT_KEYS)?;
    match cfg.get("optimize", "mode").unwrap_or("kappa_ex") {
        "kappa_ex" => Ok(OptimizeMode::KappaEx {
            lo: cfg.get_f64("optimize", "lo", 0.1)?,
            hi: cfg.get_f64("optimize", "hi", 100.0)?,
            tol: cfg.get_f64("optimize", "tol", 1e-3)?,
        }),
        "pulse" => {
            let spec = cfg
                .get("optimize", "free")
                .ok_or_else(|| ConfigError("[optimize] pulse mode requires 'free'".into()))?;
            let mut free = Vec::new();
            for item in spec.split(',') {
                let parts: Vec<&str> = item.trim().split(':').collect();
                if parts.len() != 3 {
                    return Err(ConfigError(format!(
                        "[optimize] free entry '{item}' is not name:lo:hi"
                    )));
                }
                let param = match parts[0].trim() {
                    "omega_max" => PulseParam::OmegaMax,
                    "duration" => PulseParam::Duration,
                    "ramp" => PulseParam::Ramp,
                    "center" => PulseParam::Center,
                    "width" => PulseParam::Width,
                    "chirp" => PulseParam::ChirpRate,
                    other => return Err(ConfigError(format!("[optimize] unknown pulse parameter '{other}'"))),
                };
                let lo: f64 = parts[1]
                    .trim()
                    .parse()
                    .map_err(|_| ConfigError(format!("[optimize] bound '{}' is not a number", parts[1])))?;
                let hi: f64 = parts[2]
                    .trim()
                    .parse()
                    .map_err(|_| ConfigError(format!("[optimize] bound '{}' is not a number", parts[2])))?;
                free.push((param, (lo, hi)));
            }
            Ok(OptimizeMode::Pulse {
                free,
                budget: cfg.get_u64("optimize", "budget", 200)? as usize,
                seed: cfg.get_u64("optimize", "seed", 0)?,
            })
        }
        other => Err(ConfigError(format!("[optimize] unknown mode '{other}' (kappa_ex | pulse)"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sps_core::model::PulseShape;

    #[test]
    fn parses_sections_comments_and_overrides() {
        let text = "# run\n[rates]\ng = 10.0\nkappa_ex = 2.5 # inline\n\n[pulse]\nfamily = vstirap_sin\nduration = 100\n";
        let mut cfg = ConfigFile::parse(text).unwrap();
        cfg.set("rates.kappa_in=1.5").unwrap();
        let run = resolve_run(&cfg).unwrap();
        assert_eq!(run.rates.g, 10.0);
        assert_eq!(run.rates.kappa_ex, 2.5);
        assert_eq!(run.rates.kappa_in, 1.5);
        assert_eq!(run.pulse.duration, 100.0);
        assert!(matches!(run.pulse.shape, PulseShape::VstirapSin));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        let cfg = ConfigFile::parse("[rates]\nnot_a_rate = 1\n").unwrap();
        assert!(resolve_run(&cfg).is_err());
        assert!(ConfigFile::parse("[rates\ng = 1\n").is_err());
        assert!(ConfigFile::parse("g = 1\n").is_err());
        assert!(ConfigFile::parse("[rates]\njust a line\n").is_err());
    }

    #[test]
    fn resolves_sweep_axes() {
        let cfg = ConfigFile::parse("[sweep]\nparam = kappa_ex\nlogspace = 0.5, 8, 5\n").unwrap();
        let axes = resolve_sweep_axes(&cfg).unwrap();
        assert_eq!(axes.len(), 1);
        assert_eq!(axes[0].1.len(), 5);
        assert!((axes[0].1[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn resolves_piecewise_pulse() {
        let cfg = ConfigFile::parse("[pulse]\nfamily = piecewise_linear\nknots = 0:0, 2:1.5, 5:0\n").unwrap();
        let run = resolve_run(&cfg).unwrap();
        assert_eq!(run.pulse.duration, 5.0);
        assert_eq!(run.pulse.omega_max, 1.5);
    }
}
