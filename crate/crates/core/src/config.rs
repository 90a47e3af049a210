//! Sectioned key-value run configuration with dotted overrides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ini::Ini;

use crate::error::{Error, Result};
use crate::geometry::PhysParams;
use crate::limit_lab::{FourierSeries, InitialCondition, SweepConfig};
use crate::spectral::Grid;
use crate::timestepper::{Scheme, StepPolicy, TimeStep};

/// Every accepted `(section, key, default)`, in echo order.
const SCHEMA: &[(&str, &str, &str)] = &[
    ("grid", "n", "128"),
    ("physics", "sigma", "0"),
    ("physics", "rho0", "0"),
    ("physics", "tau", "1"),
    ("physics", "rho1", "0.55"),
    ("physics", "rho2", "0.45"),
    ("physics", "g", "0"),
    ("initial", "theta_mean", "0"),
    ("initial", "theta_cos", ""),
    ("initial", "theta_sin", ""),
    ("initial", "gamma_mean", "0"),
    ("initial", "gamma_cos", ""),
    ("initial", "gamma_sin", ""),
    ("run", "t_end", "0.25"),
    ("run", "scheme", "rk4"),
    ("run", "dt", "auto"),
    ("run", "cfl", "0.5"),
    ("run", "filter_floor", "1e-13"),
    ("run", "monitor_cadence", "10"),
    ("run", "chord_arc_floor", "0.1"),
    ("run", "closure_tolerance", "1e-8"),
    ("run", "probe_trials", "0"),
    ("run", "probe_seed", "0"),
    ("run", "sobolev_index", "4"),
    ("run", "max_steps", "1000000"),
    ("sweep", "pairs", ""),
];

/// A fully resolved configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub grid_size: usize,
    pub params: PhysParams,
    pub initial: InitialCondition,
    pub t_end: f64,
    pub policy: StepPolicy,
    /// `(σ, ρ₀)` for sweeps and probes.
    pub pairs: Vec<(f64, f64)>,
    values: BTreeMap<(String, String), String>,
}

impl PartialEq for RunConfig {
    /// Compares resolved values; spelling differences in the source text are ignored.
    fn eq(&self, other: &Self) -> bool {
        self.grid_size == other.grid_size
            && self.params == other.params
            && self.initial == other.initial
            && self.t_end.to_bits() == other.t_end.to_bits()
            && self.policy == other.policy
            && self.pairs == other.pairs
    }
}

fn schema_index(section: &str, key: &str) -> Option<usize> {
    SCHEMA.iter().position(|(s, k, _)| *s == section && *k == key)
}

/// Line (1-based) where `section.key` is assigned in `text`, if present.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
        } else if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn parse_f64(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.trim().parse().map_err(|_| format!("{v:?} is not a number"))?;
    if !x.is_finite() {
        return Err(format!("{v:?} is not finite"));
    }
    // The echoed form must parse back to the same bits.
    debug_assert_eq!(x.to_string().parse::<f64>().map(f64::to_bits), Ok(x.to_bits()));
    Ok(x)
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(parse_f64).collect()
}

fn parse_pairs(v: &str) -> std::result::Result<Vec<(f64, f64)>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|p| {
            let (s, r) = p.split_once(':').ok_or_else(|| format!("pair {p:?} is not sigma:rho0"))?;
            Ok((parse_f64(s)?, parse_f64(r)?))
        })
        .collect()
}

fn format_list(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str_with(&text, overrides).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_str_with(text: &str, overrides: &[String]) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(format!("line {}: {}", e.line, e.msg)))?;
        let mut values: BTreeMap<(String, String), String> =
            SCHEMA.iter().map(|(s, k, d)| ((s.to_string(), k.to_string()), d.to_string())).collect();
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            for (key, value) in props.iter() {
                if schema_index(section, key).is_none() {
                    let at = locate(text, section, key).map(|l| format!("line {l}: ")).unwrap_or_default();
                    return Err(Error::Config(format!("{at}unknown key {section}.{key}")));
                }
                values.insert((section.to_string(), key.to_string()), value.to_string());
            }
        }
        for o in overrides {
            let (path, value) = o.split_once('=').ok_or_else(|| Error::Config(format!("override {o:?} is not section.key=value")))?;
            let (section, key) = path.trim().split_once('.').ok_or_else(|| Error::Config(format!("override key {path:?} is not section.key")))?;
            if schema_index(section, key).is_none() {
                return Err(Error::Config(format!("override names unknown key {section}.{key}")));
            }
            values.insert((section.to_string(), key.to_string()), value.trim().to_string());
        }
        Self::resolve(values, text)
    }

    fn resolve(values: BTreeMap<(String, String), String>, text: &str) -> Result<Self> {
        let get = |s: &str, k: &str| values[&(s.to_string(), k.to_string())].clone();
        let fail = |s: &str, k: &str, m: String| {
            let at = locate(text, s, k).map(|l| format!("line {l}: ")).unwrap_or_default();
            Error::Config(format!("{at}{s}.{k}: {m}"))
        };
        let num = |s: &str, k: &str| parse_f64(&get(s, k)).map_err(|m| fail(s, k, m));
        let int = |s: &str, k: &str| get(s, k).trim().parse::<u64>().map_err(|_| fail(s, k, format!("{:?} is not a nonnegative integer", get(s, k))));
        let list = |s: &str, k: &str| parse_list(&get(s, k)).map_err(|m| fail(s, k, m));

        let grid_size = int("grid", "n")? as usize;
        Grid::new(grid_size).map_err(|e| fail("grid", "n", e.to_string()))?;
        let params = PhysParams {
            rho0: num("physics", "rho0")?,
            sigma: num("physics", "sigma")?,
            tau: num("physics", "tau")?,
            rho1: num("physics", "rho1")?,
            rho2: num("physics", "rho2")?,
            g: num("physics", "g")?,
        };
        params.validate().map_err(|e| Error::Config(format!("[physics]: {e}")))?;
        let initial = InitialCondition {
            theta: FourierSeries { mean: num("initial", "theta_mean")?, cos: list("initial", "theta_cos")?, sin: list("initial", "theta_sin")? },
            gamma: FourierSeries { mean: num("initial", "gamma_mean")?, cos: list("initial", "gamma_cos")?, sin: list("initial", "gamma_sin")? },
        };
        let dt_text = get("run", "dt");
        let dt = if dt_text.trim().eq_ignore_ascii_case("auto") { TimeStep::Auto } else { TimeStep::Fixed(num("run", "dt")?) };
        let policy = StepPolicy {
            scheme: get("run", "scheme").parse::<Scheme>().map_err(|e| fail("run", "scheme", e.to_string()))?,
            dt,
            cfl_constant: num("run", "cfl")?,
            filter_floor: num("run", "filter_floor")?,
            monitor_cadence: int("run", "monitor_cadence")? as usize,
            chord_arc_floor: num("run", "chord_arc_floor")?,
            closure_tolerance: num("run", "closure_tolerance")?,
            probe_trials: int("run", "probe_trials")? as usize,
            probe_seed: int("run", "probe_seed")?,
            sobolev_index: int("run", "sobolev_index")? as u32,
            max_steps: int("run", "max_steps")? as usize,
        };
        policy.validate().map_err(|e| Error::Config(format!("[run]: {e}")))?;
        let t_end = num("run", "t_end")?;
        if t_end < 0.0 {
            return Err(fail("run", "t_end", "must be nonnegative".into()));
        }
        let pairs = parse_pairs(&get("sweep", "pairs")).map_err(|m| fail("sweep", "pairs", m))?;
        Ok(Self { grid_size, params, initial, t_end, policy, pairs, values })
    }

    /// Canonical text of the effective configuration; parsing it yields an equal config.
    pub fn effective_text(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for (s, k, _) in SCHEMA {
            if *s != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{s}]");
                section = s;
            }
            let raw = &self.values[&(s.to_string(), k.to_string())];
            let canonical = match (*s, *k) {
                ("initial", "theta_cos") => format_list(&self.initial.theta.cos),
                ("initial", "theta_sin") => format_list(&self.initial.theta.sin),
                ("initial", "gamma_cos") => format_list(&self.initial.gamma.cos),
                ("initial", "gamma_sin") => format_list(&self.initial.gamma.sin),
                ("sweep", "pairs") => self.pairs.iter().map(|(a, b)| format!("{a}:{b}")).collect::<Vec<_>>().join(", "),
                ("run", "dt") => match self.policy.dt {
                    TimeStep::Auto => "auto".into(),
                    TimeStep::Fixed(dt) => dt.to_string(),
                },
                ("run", "scheme") => match self.policy.scheme {
                    Scheme::Rk4 => "rk4".into(),
                    Scheme::Imex => "imex".into(),
                },
                _ => match parse_f64(raw) {
                    Ok(x) if raw.trim().parse::<u64>().is_err() => x.to_string(),
                    _ => raw.trim().to_string(),
                },
            };
            let _ = writeln!(out, "{k} = {canonical}");
        }
        out
    }

    pub fn sweep_config(&self, output_dir: Option<&Path>) -> SweepConfig {
        SweepConfig {
            initial: self.initial.clone(),
            base: self.params,
            pairs: self.pairs.clone(),
            grid_size: self.grid_size,
            t_end: self.t_end,
            policy: self.policy,
            output_dir: output_dir.map(Path::to_path_buf),
        }
    }
}
