//! Declarative run configuration: an INI-like key-value format with
//! optional `[curve.<name>]` sections, parsed with line-number
//! diagnostics and validated per execution mode.
//!
//! Global keys apply to every curve; keys inside a `[curve.<name>]`
//! section override them for that curve only. Missing optional keys get
//! the documented defaults (`U_B = 1`, `dt = 0.002`, `t_max = 0.3`,
//! `sample_stride = 10`, `grid_points = 512·L`, `phi_B = 0`).

use std::collections::BTreeMap;
use std::fmt;

/// Execution mode; selects which observables are computed and which
/// configuration keys are required.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    GroundState,
    Quench,
    VisibilityScan,
    Theory,
    SpectrumProjection,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::GroundState => "ground-state",
            Mode::Quench => "quench",
            Mode::VisibilityScan => "visibility-scan",
            Mode::Theory => "theory",
            Mode::SpectrumProjection => "spectrum-projection",
            Mode::Sweep => "sweep",
        }
    }

    fn from_name(name: &str) -> Option<Mode> {
        Some(match name {
            "ground-state" => Mode::GroundState,
            "quench" => Mode::Quench,
            "visibility-scan" => Mode::VisibilityScan,
            "theory" => Mode::Theory,
            "spectrum-projection" => Mode::SpectrumProjection,
            "sweep" => Mode::Sweep,
            _ => return None,
        })
    }
}

/// Configuration failure with the 1-based line it originates from, when
/// a specific line is to blame.
#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError { line: Some(line), message: message.into() }
    }

    fn general(message: impl Into<String>) -> Self {
        ConfigError { line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "config error at line {n}: {}", self.message),
            None => write!(f, "config error: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Fully resolved per-curve parameters. Single-species modes read only
/// the lattice and the B-labelled fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub sites: usize,
    pub n_a: usize,
    pub n_b: usize,
    pub j_a: f64,
    pub u_a: f64,
    pub phi_a: f64,
    pub j_b: f64,
    pub u_b: f64,
    pub phi_b: f64,
    pub v: f64,
    pub dt: f64,
    pub t_max: f64,
    pub sample_stride: usize,
    pub grid_points: usize,
}

/// One named parameter axis: the key to vary and its values, executed
/// in listed order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<f64>,
}

/// One curve of a figure: a parameter set plus an optional sweep axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveConfig {
    pub name: String,
    pub params: Params,
    pub sweep: Option<SweepAxis>,
}

/// A validated run: the mode and the curves to execute.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub curves: Vec<CurveConfig>,
}

const SCENARIO_KEYS: &[&str] = &[
    "L", "N_A", "N_B", "J_A", "U_A", "phi_A", "J_B", "U_B", "phi_B", "V", "dt", "t_max",
    "sample_stride", "grid_points",
];

/// f64-valued scenario keys a sweep axis may name.
const SWEEPABLE_KEYS: &[&str] =
    &["J_A", "U_A", "phi_A", "J_B", "U_B", "phi_B", "V", "dt", "t_max"];

type Section = BTreeMap<String, (String, usize)>;

/// Parse and validate a configuration. `cli_mode` is the mode selected
/// on the command line; a `mode` key in the file must agree with it.
pub fn parse_config(text: &str, cli_mode: Option<Mode>) -> Result<ScenarioConfig, ConfigError> {
    let mut global: Section = Section::new();
    let mut curves: Vec<(String, Section, usize)> = Vec::new();
    let mut mode_entry: Option<(Mode, usize)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(header) = line.strip_prefix('[') {
            let Some(header) = header.strip_suffix(']') else {
                return Err(ConfigError::at(line_no, "unterminated section header"));
            };
            let Some(name) = header.trim().strip_prefix("curve.") else {
                return Err(ConfigError::at(
                    line_no,
                    format!("unknown section '{}'; only [curve.<name>] sections exist", header.trim()),
                ));
            };
            let name = name.trim();
            if name.is_empty()
                || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(ConfigError::at(
                    line_no,
                    format!("curve name '{name}' must be non-empty and use [A-Za-z0-9_-]"),
                ));
            }
            if curves.iter().any(|(n, _, _)| n == name) {
                return Err(ConfigError::at(line_no, format!("duplicate curve '{name}'")));
            }
            curves.push((name.to_string(), Section::new(), line_no));
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::at(line_no, "expected 'key = value' or a [curve.<name>] header"));
        };
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        if key == "mode" {
            if !curves.is_empty() {
                return Err(ConfigError::at(line_no, "'mode' must appear before any curve section"));
            }
            let Some(mode) = Mode::from_name(&value) else {
                return Err(ConfigError::at(
                    line_no,
                    format!(
                        "unknown mode '{value}'; expected one of ground-state, quench, \
                         visibility-scan, theory, spectrum-projection, sweep"
                    ),
                ));
            };
            if mode_entry.is_some() {
                return Err(ConfigError::at(line_no, "duplicate 'mode' key"));
            }
            mode_entry = Some((mode, line_no));
            continue;
        }
        if !SCENARIO_KEYS.contains(&key.as_str()) && key != "sweep.key" && key != "sweep.values" {
            return Err(ConfigError::at(line_no, format!("unknown key '{key}'")));
        }
        let section = match curves.last_mut() {
            Some((_, s, _)) => s,
            None => &mut global,
        };
        if let Some((_, first)) = section.get(&key) {
            return Err(ConfigError::at(
                line_no,
                format!("duplicate key '{key}' (first set at line {first})"),
            ));
        }
        section.insert(key, (value, line_no));
    }

    let mode = match (mode_entry, cli_mode) {
        (Some((m, line)), Some(cli)) if m != cli => {
            return Err(ConfigError::at(
                line,
                format!("config declares mode '{}' but the '{}' command was invoked", m.name(), cli.name()),
            ));
        }
        (Some((m, _)), _) => m,
        (None, Some(cli)) => cli,
        (None, None) => return Err(ConfigError::general("missing 'mode' key")),
    };

    if curves.is_empty() {
        curves.push(("main".to_string(), Section::new(), 0));
    }

    let mut out = Vec::new();
    for (name, overrides, _) in &curves {
        let mut merged = global.clone();
        for (k, v) in overrides {
            merged.insert(k.clone(), v.clone());
        }
        out.push(resolve_curve(mode, name, &merged)?);
    }
    Ok(ScenarioConfig { mode, curves: out })
}

fn parse_f64(section: &Section, key: &str) -> Result<Option<(f64, usize)>, ConfigError> {
    match section.get(key) {
        None => Ok(None),
        Some((text, line)) => match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some((v, *line))),
            _ => Err(ConfigError::at(*line, format!("key '{key}': '{text}' is not a finite number"))),
        },
    }
}

fn parse_usize(section: &Section, key: &str) -> Result<Option<(usize, usize)>, ConfigError> {
    match section.get(key) {
        None => Ok(None),
        Some((text, line)) => match text.parse::<usize>() {
            Ok(v) => Ok(Some((v, *line))),
            Err(_) => {
                Err(ConfigError::at(*line, format!("key '{key}': '{text}' is not a non-negative integer")))
            }
        },
    }
}

fn require<T>(
    value: Option<(T, usize)>,
    key: &str,
    mode: Mode,
) -> Result<(T, usize), ConfigError> {
    value.ok_or_else(|| {
        ConfigError::general(format!("mode '{}' requires key '{key}'", mode.name()))
    })
}

fn resolve_curve(mode: Mode, name: &str, section: &Section) -> Result<CurveConfig, ConfigError> {
    // Lattice size first: the momentum-grid default scales with it.
    let sites = match mode {
        Mode::Theory => parse_usize(section, "L")?.map(|(v, _)| v).unwrap_or(3),
        _ => {
            let (sites, line) = require(parse_usize(section, "L")?, "L", mode)?;
            if sites < 3 {
                return Err(ConfigError::at(
                    line,
                    format!("L = {sites}: a ring needs at least 3 sites (operator-module constraint)"),
                ));
            }
            sites
        }
    };

    let positive = |key: &str, got: Option<(f64, usize)>| -> Result<Option<(f64, usize)>, ConfigError> {
        match got {
            Some((v, line)) if v <= 0.0 => Err(ConfigError::at(
                line,
                format!("key '{key}' must be positive, got {v} (repulsive-interaction invariant for U, attractive quench for V)"),
            )),
            other => Ok(other),
        }
    };
    let non_negative = |key: &str, got: Option<(f64, usize)>| -> Result<Option<(f64, usize)>, ConfigError> {
        match got {
            Some((v, line)) if v < 0.0 => {
                Err(ConfigError::at(line, format!("key '{key}' must be non-negative, got {v}")))
            }
            other => Ok(other),
        }
    };

    let j_a = non_negative("J_A", parse_f64(section, "J_A")?)?;
    let u_a = positive("U_A", parse_f64(section, "U_A")?)?;
    let phi_a = parse_f64(section, "phi_A")?;
    let j_b = non_negative("J_B", parse_f64(section, "J_B")?)?;
    let u_b = positive("U_B", parse_f64(section, "U_B")?)?;
    let phi_b = parse_f64(section, "phi_B")?;
    let v = positive("V", parse_f64(section, "V")?)?;
    let dt = positive("dt", parse_f64(section, "dt")?)?;
    let t_max = positive("t_max", parse_f64(section, "t_max")?)?;
    let n_a = parse_usize(section, "N_A")?;
    let n_b = parse_usize(section, "N_B")?;
    let stride = match parse_usize(section, "sample_stride")? {
        Some((0, line)) => return Err(ConfigError::at(line, "sample_stride must be at least 1")),
        other => other,
    };
    let grid = match parse_usize(section, "grid_points")? {
        Some((n, line)) if n < 8 => {
            return Err(ConfigError::at(line, format!("grid_points = {n}: at least 8 points are needed")))
        }
        other => other,
    };
    for (key, val) in [("N_A", &n_a), ("N_B", &n_b)] {
        if let Some((0, line)) = val {
            return Err(ConfigError::at(*line, format!("{key} must be at least 1")));
        }
    }

    // The sweep axis is resolved first: a swept key counts as provided
    // (each point substitutes its own value).
    let sweep = resolve_sweep(mode, section)?;
    let swept = |key: &str| -> Option<(f64, usize)> {
        sweep.as_ref().and_then(|a| (a.key == key).then(|| (a.values[0], 0)))
    };

    // Mode-specific required keys; everything else falls back to the
    // documented defaults.
    let params = match mode {
        Mode::Theory => Params {
            sites,
            n_a: 0,
            n_b: sites,
            j_a: 0.0,
            u_a: 1.0,
            phi_a: 0.0,
            j_b: 0.0,
            u_b: 1.0,
            phi_b: 0.0,
            v: 1.0,
            dt: 0.002,
            t_max: 0.3,
            sample_stride: 10,
            grid_points: 512 * sites,
        },
        Mode::GroundState | Mode::VisibilityScan => Params {
            sites,
            n_a: 0,
            n_b: require(n_b, "N_B", mode)?.0,
            j_a: 0.0,
            u_a: 1.0,
            phi_a: 0.0,
            j_b: require(j_b, "J_B", mode)?.0,
            u_b: u_b.map(|(v, _)| v).unwrap_or(1.0),
            phi_b: phi_b.map(|(v, _)| v).unwrap_or(0.0),
            v: 1.0,
            dt: dt.map(|(v, _)| v).unwrap_or(0.002),
            t_max: t_max.map(|(v, _)| v).unwrap_or(0.3),
            sample_stride: stride.map(|(v, _)| v).unwrap_or(10),
            grid_points: grid.map(|(v, _)| v).unwrap_or(512 * sites),
        },
        Mode::Quench | Mode::Sweep | Mode::SpectrumProjection => Params {
            sites,
            n_a: require(n_a, "N_A", mode)?.0,
            n_b: require(n_b, "N_B", mode)?.0,
            j_a: require(j_a.or_else(|| swept("J_A")), "J_A", mode)?.0,
            u_a: require(u_a.or_else(|| swept("U_A")), "U_A", mode)?.0,
            phi_a: require(phi_a.or_else(|| swept("phi_A")), "phi_A", mode)?.0,
            j_b: require(j_b.or_else(|| swept("J_B")), "J_B", mode)?.0,
            u_b: u_b.or_else(|| swept("U_B")).map(|(v, _)| v).unwrap_or(1.0),
            phi_b: require(phi_b.or_else(|| swept("phi_B")), "phi_B", mode)?.0,
            v: require(v.or_else(|| swept("V")), "V", mode)?.0,
            dt: dt.or_else(|| swept("dt")).map(|(v, _)| v).unwrap_or(0.002),
            t_max: t_max.or_else(|| swept("t_max")).map(|(v, _)| v).unwrap_or(0.3),
            sample_stride: stride.map(|(v, _)| v).unwrap_or(10),
            grid_points: grid.map(|(v, _)| v).unwrap_or(512 * sites),
        },
    };

    // The closed-form visibility column needs a commensurate bath.
    if mode == Mode::VisibilityScan && params.n_b % params.sites != 0 {
        return Err(ConfigError::general(format!(
            "visibility-scan compares against the integer-filling closed form: \
             N_B = {} atoms on L = {} sites is not an integer filling",
            params.n_b, params.sites
        )));
    }

    Ok(CurveConfig { name: name.to_string(), params, sweep })
}

fn resolve_sweep(mode: Mode, section: &Section) -> Result<Option<SweepAxis>, ConfigError> {
    let key = section.get("sweep.key");
    let values = section.get("sweep.values");
    match mode {
        Mode::Sweep | Mode::VisibilityScan => {}
        _ => {
            if let Some((_, line)) = key.or(values) {
                return Err(ConfigError::at(
                    *line,
                    format!("sweep.* keys are not accepted in mode '{}'", mode.name()),
                ));
            }
            return Ok(None);
        }
    }
    let (key, key_line) = match key {
        Some((k, line)) => (k.clone(), *line),
        None => {
            return Err(ConfigError::general(format!(
                "mode '{}' requires 'sweep.key' and 'sweep.values'",
                mode.name()
            )))
        }
    };
    if mode == Mode::VisibilityScan && key != "phi_B" {
        return Err(ConfigError::at(
            key_line,
            format!("visibility-scan sweeps the Peierls phase; sweep.key must be 'phi_B', got '{key}'"),
        ));
    }
    if !SWEEPABLE_KEYS.contains(&key.as_str()) {
        return Err(ConfigError::at(
            key_line,
            format!("sweep.key '{key}' does not name a sweepable parameter ({})", SWEEPABLE_KEYS.join(", ")),
        ));
    }
    let Some((text, line)) = values else {
        return Err(ConfigError::general(format!(
            "mode '{}' requires 'sweep.values'",
            mode.name()
        )));
    };
    let mut parsed = Vec::new();
    for piece in text.split(',') {
        let piece = piece.trim();
        match piece.parse::<f64>() {
            Ok(v) if v.is_finite() => parsed.push(v),
            _ => {
                return Err(ConfigError::at(
                    *line,
                    format!("sweep.values: '{piece}' is not a finite number"),
                ))
            }
        }
    }
    if parsed.is_empty() {
        return Err(ConfigError::at(*line, "sweep.values must list at least one value"));
    }
    // Axis values obey the same domains as the keys they replace.
    let bad = match key.as_str() {
        "U_A" | "U_B" | "V" | "dt" | "t_max" => parsed.iter().find(|&&v| v <= 0.0),
        "J_A" | "J_B" => parsed.iter().find(|&&v| v < 0.0),
        _ => None,
    };
    if let Some(v) = bad {
        return Err(ConfigError::at(
            *line,
            format!("sweep.values: {v} is outside the domain of key '{key}'"),
        ));
    }
    Ok(Some(SweepAxis { key, values: parsed }))
}

impl Params {
    /// Apply one sweep value; the key is validated at parse time.
    pub fn with_value(&self, key: &str, value: f64) -> Params {
        let mut p = self.clone();
        match key {
            "J_A" => p.j_a = value,
            "U_A" => p.u_a = value,
            "phi_A" => p.phi_a = value,
            "J_B" => p.j_b = value,
            "U_B" => p.u_b = value,
            "phi_B" => p.phi_b = value,
            "V" => p.v = value,
            "dt" => p.dt = value,
            "t_max" => p.t_max = value,
            _ => unreachable!("sweep key '{key}' passed validation"),
        }
        p
    }

    /// λ_A = J_A/U_A.
    pub fn lambda_a(&self) -> f64 {
        self.j_a / self.u_a
    }

    /// λ_B = J_B/U_B.
    pub fn lambda_b(&self) -> f64 {
        self.j_b / self.u_b
    }
}
