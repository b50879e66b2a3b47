//! Run configuration: a TOML file with the sections `coefficients`, `grid`,
//! `solver`, `initial`, `output` and optional per-check sections. Every
//! violation is collected before reporting.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use qbm_core::coefficients::{parse_profile, CoefficientSet};
use qbm_core::fields::{Gaussian2D, Grid1D, Grid2D};
use qbm_core::master_solver::SolverConfig;
use qbm_core::reduction::{FreeWave, RoundtripWindow};
use qbm_core::time_fn::{Interpolation, TimeFn};
use toml::{Table, Value};

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigIssue {
    /// Dotted key path such as `coefficients.q`.
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.path, self.message),
            None => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub csv: bool,
    pub json: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryConfig {
    pub eps: f64,
    pub generators: Vec<String>,
    pub sample_times: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionConfig {
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundtripConfig {
    pub mass: f64,
    pub tau0: Complex64,
    pub window: RoundtripWindow,
    pub waves: Vec<FreeWave>,
}

/// Rescaled reduced equation with constant drift and reaction, and the
/// symmetry `alpha = a + b e^{2RT} + c e^{-2RT}`, `beta` from the Riccati form.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedSymmetryConfig {
    pub drift: f64,
    pub reaction: f64,
    pub alpha: [f64; 3],
    pub beta0: f64,
    pub beta1: f64,
    pub phi0: f64,
    pub grid: Grid1D,
    pub t_end: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub source: PathBuf,
    pub coefficients: CoefficientSet,
    /// Profile specs as written, keyed by coefficient name.
    pub coefficient_specs: BTreeMap<String, String>,
    pub grid: Grid2D,
    pub w_grid: Option<Grid1D>,
    pub solver: SolverConfig,
    pub initial: Gaussian2D,
    pub output: OutputConfig,
    pub symmetry: SymmetryConfig,
    pub reduction: ReductionConfig,
    pub roundtrip: RoundtripConfig,
    pub reduced_symmetry: ReducedSymmetryConfig,
}

/// Line number of every `key =` and `[section]` in the text, plus
/// duplicate-key issues naming both lines.
fn scan_lines(text: &str) -> (BTreeMap<String, usize>, Vec<ConfigIssue>) {
    let mut lines = BTreeMap::new();
    let mut issues = Vec::new();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let n = idx + 1;
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            if let Some(prev) = lines.insert(section.clone(), n) {
                issues.push(ConfigIssue {
                    path: section.clone(),
                    line: Some(n),
                    message: format!("duplicate section, first defined at line {prev}"),
                });
            }
            continue;
        }
        if let Some((key, _)) = line.split_once('=') {
            let key = key.trim().trim_matches('"');
            if key.is_empty() {
                continue;
            }
            let path = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            if let Some(prev) = lines.insert(path.clone(), n) {
                issues.push(ConfigIssue {
                    path,
                    line: Some(n),
                    message: format!(
                        "duplicate key, first defined at line {prev} and again at line {n}"
                    ),
                });
            }
        }
    }
    (lines, issues)
}

struct Reader<'a> {
    root: &'a Table,
    lines: &'a BTreeMap<String, usize>,
    issues: Vec<ConfigIssue>,
}

const SECTIONS: &[(&str, &[&str])] = &[
    (
        "coefficients",
        &[
            "m",
            "hbar",
            "p",
            "q",
            "r",
            "s",
            "omega2",
            "gamma",
            "h",
            "f",
            "interpolation",
        ],
    ),
    (
        "grid",
        &[
            "x_min", "x_max", "nx", "y_min", "y_max", "ny", "w_min", "w_max", "nw",
        ],
    ),
    ("solver", &["dt", "t_end", "stride", "cfl_safety"]),
    (
        "initial",
        &[
            "x0",
            "y0",
            "sigma",
            "sigma_x",
            "sigma_y",
            "rho",
            "amplitude",
        ],
    ),
    ("output", &["dir", "formats"]),
    ("symmetry", &["eps", "generators", "sample_times"]),
    ("reduction", &["sigma"]),
    (
        "roundtrip",
        &[
            "mass", "tau0_re", "tau0_im", "t0", "t1", "w_min", "w_max", "nt", "nw", "waves", "k",
            "chi0", "sigma", "k0",
        ],
    ),
    (
        "reduced_symmetry",
        &[
            "drift", "reaction", "alpha", "beta0", "beta1", "phi0", "w_min", "w_max", "nw",
            "t_end", "sigma",
        ],
    ),
];

impl<'a> Reader<'a> {
    fn issue(&mut self, path: &str, message: impl Into<String>) {
        let line = self.lines.get(path).copied();
        self.issues.push(ConfigIssue {
            path: path.to_string(),
            line,
            message: message.into(),
        });
    }

    fn check_keys(&mut self) {
        for (name, value) in self.root {
            let Some((_, allowed)) = SECTIONS.iter().find(|(s, _)| s == name) else {
                self.issue(name, "unknown section");
                continue;
            };
            let Some(table) = value.as_table() else {
                self.issue(name, "expected a section");
                continue;
            };
            for key in table.keys() {
                if !allowed.contains(&key.as_str()) {
                    self.issue(&format!("{name}.{key}"), "unknown key");
                }
            }
        }
    }

    fn section(&mut self, name: &str, required: bool) -> Option<&'a Table> {
        match self.root.get(name).and_then(Value::as_table) {
            Some(t) => Some(t),
            None => {
                if required {
                    self.issue(name, "missing section");
                }
                None
            }
        }
    }

    fn raw(&self, sec: &str, key: &str) -> Option<&'a Value> {
        self.root
            .get(sec)
            .and_then(Value::as_table)
            .and_then(|t| t.get(key))
    }

    fn number(&mut self, sec: &str, key: &str, default: Option<f64>) -> Option<f64> {
        let path = format!("{sec}.{key}");
        match self.raw(sec, key) {
            Some(Value::Float(v)) if v.is_finite() => Some(*v),
            Some(Value::Integer(v)) => Some(*v as f64),
            Some(_) => {
                self.issue(&path, "expected a finite number");
                None
            }
            None => {
                if default.is_none() {
                    self.issue(&path, "missing required key");
                }
                default
            }
        }
    }

    fn positive(&mut self, sec: &str, key: &str, default: Option<f64>) -> Option<f64> {
        let v = self.number(sec, key, default)?;
        if v > 0.0 {
            Some(v)
        } else {
            self.issue(
                &format!("{sec}.{key}"),
                format!("must be positive, got {v}"),
            );
            None
        }
    }

    fn count(&mut self, sec: &str, key: &str, default: Option<usize>, min: usize) -> Option<usize> {
        let path = format!("{sec}.{key}");
        match self.raw(sec, key) {
            Some(Value::Integer(v)) if *v >= min as i64 => Some(*v as usize),
            Some(Value::Integer(v)) => {
                self.issue(&path, format!("must be at least {min}, got {v}"));
                None
            }
            Some(_) => {
                self.issue(&path, "expected an integer");
                None
            }
            None => {
                if default.is_none() {
                    self.issue(&path, "missing required key");
                }
                default
            }
        }
    }

    fn string(&mut self, sec: &str, key: &str) -> Option<String> {
        match self.raw(sec, key) {
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.issue(&format!("{sec}.{key}"), "expected a string");
                None
            }
            None => None,
        }
    }

    fn strings(&mut self, sec: &str, key: &str) -> Option<Vec<String>> {
        let path = format!("{sec}.{key}");
        match self.raw(sec, key) {
            Some(Value::Array(items)) => {
                let out: Option<Vec<String>> = items
                    .iter()
                    .map(|v| v.as_str().map(str::to_string))
                    .collect();
                if out.is_none() {
                    self.issue(&path, "expected an array of strings");
                }
                out
            }
            Some(_) => {
                self.issue(&path, "expected an array of strings");
                None
            }
            None => None,
        }
    }

    fn numbers(&mut self, sec: &str, key: &str, len: usize) -> Option<Vec<f64>> {
        let path = format!("{sec}.{key}");
        let parsed: Option<Vec<f64>> = match self.raw(sec, key)? {
            Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    Value::Float(f) => Some(*f),
                    Value::Integer(i) => Some(*i as f64),
                    _ => None,
                })
                .collect(),
            _ => None,
        };
        match parsed {
            Some(v) if v.len() == len => Some(v),
            _ => {
                self.issue(&path, format!("expected an array of {len} numbers"));
                None
            }
        }
    }

    /// A profile given as a number or a `const:/exp:/table:` spec.
    fn profile(
        &mut self,
        sec: &str,
        key: &str,
        base: Option<&Path>,
        kind: Interpolation,
    ) -> Option<(TimeFn, String)> {
        let path = format!("{sec}.{key}");
        let spec = match self.raw(sec, key) {
            Some(Value::Float(v)) => format!("const:{v}"),
            Some(Value::Integer(v)) => format!("const:{v}"),
            Some(Value::String(s)) => s.clone(),
            Some(_) => {
                self.issue(&path, "expected a number or a profile spec");
                return None;
            }
            None => {
                self.issue(&path, "missing required profile");
                return None;
            }
        };
        match parse_profile(&spec, base, kind) {
            Ok(f) => Some((f, spec)),
            Err(e) => {
                self.issue(&path, e.to_string());
                None
            }
        }
    }

    fn grid1d(
        &mut self,
        sec: &str,
        keys: [&str; 3],
        required: bool,
        default: Option<(f64, f64, usize)>,
    ) -> Option<Grid1D> {
        let present = keys.iter().any(|k| self.raw(sec, k).is_some());
        if !present && !required {
            return default.and_then(|(a, b, n)| Grid1D::new(a, b, n).ok());
        }
        let d = default
            .map(|(a, b, n)| (Some(a), Some(b), Some(n)))
            .unwrap_or((None, None, None));
        let lo = self.number(sec, keys[0], d.0);
        let hi = self.number(sec, keys[1], d.1);
        let n = self.count(sec, keys[2], d.2, 3);
        let (lo, hi, n) = (lo?, hi?, n?);
        match Grid1D::new(lo, hi, n) {
            Ok(g) => Some(g),
            Err(e) => {
                self.issue(&format!("{sec}.{}", keys[0]), e.to_string());
                None
            }
        }
    }
}

fn coefficients(
    rd: &mut Reader,
    base: Option<&Path>,
) -> Option<(CoefficientSet, BTreeMap<String, String>)> {
    rd.section("coefficients", true)?;
    let kind = match rd.string("coefficients", "interpolation").as_deref() {
        None | Some("cubic") => Interpolation::Cubic,
        Some("linear") => Interpolation::Linear,
        Some(other) => {
            rd.issue(
                "coefficients.interpolation",
                format!("expected `linear` or `cubic`, got `{other}`"),
            );
            Interpolation::Cubic
        }
    };
    let m = rd.positive("coefficients", "m", None);
    let hbar = rd.positive("coefficients", "hbar", Some(1.0));
    let physical = ["omega2", "gamma", "h", "f"];
    let direct = ["p", "q", "r", "s"];
    let any_physical = physical.iter().any(|k| rd.raw("coefficients", k).is_some());
    let any_direct = direct.iter().any(|k| rd.raw("coefficients", k).is_some());
    if any_physical && any_direct {
        rd.issue(
            "coefficients",
            "give either p, q, r, s or omega2, gamma, h, f, not both",
        );
        return None;
    }
    let names = if any_physical { physical } else { direct };
    let mut specs = BTreeMap::new();
    let mut profiles = Vec::new();
    for name in names {
        if let Some((f, spec)) = rd.profile("coefficients", name, base, kind) {
            specs.insert(name.to_string(), spec);
            profiles.push(f);
        }
    }
    let (m, hbar) = (m?, hbar?);
    if profiles.len() != 4 {
        return None;
    }
    let built = if any_physical {
        CoefficientSet::from_physical(
            m,
            hbar,
            &profiles[0],
            &profiles[1],
            &profiles[2],
            &profiles[3],
        )
    } else {
        CoefficientSet::new(
            m,
            hbar,
            profiles[0].clone(),
            profiles[1].clone(),
            profiles[2].clone(),
            profiles[3].clone(),
        )
    };
    match built {
        Ok(cs) => Some((cs, specs)),
        Err(e) => {
            rd.issue("coefficients", e.to_string());
            None
        }
    }
}

fn parse_wave(rd: &mut Reader, name: &str) -> Option<FreeWave> {
    let amp = Complex64::new(1.0, 0.0);
    match name {
        "plane-wave" => Some(FreeWave::PlaneWave {
            amp,
            k: rd.number("roundtrip", "k", Some(1.0))?,
        }),
        "gaussian-packet" => Some(FreeWave::Gaussian {
            amp,
            chi0: rd.number("roundtrip", "chi0", Some(0.0))?,
            sigma: rd.positive("roundtrip", "sigma", Some(1.0))?,
            k0: rd.number("roundtrip", "k0", Some(0.5))?,
        }),
        other => {
            rd.issue("roundtrip.waves", format!("unknown wave `{other}`"));
            None
        }
    }
}

/// Parses and validates configuration text. `source` is recorded and its
/// directory anchors relative table paths.
pub fn parse_config_str(text: &str, source: &Path) -> Result<RunConfig, ConfigErrors> {
    let (lines, mut dupes) = scan_lines(text);
    if !dupes.is_empty() {
        return Err(ConfigErrors(std::mem::take(&mut dupes)));
    }
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].lines().count().max(1));
        ConfigErrors(vec![ConfigIssue {
            path: "<file>".into(),
            line,
            message: e.message().to_string(),
        }])
    })?;
    let base = source.parent();
    let mut rd = Reader {
        root: &root,
        lines: &lines,
        issues: Vec::new(),
    };
    rd.check_keys();

    let coeffs = coefficients(&mut rd, base);

    rd.section("grid", true);
    let gx = rd.grid1d("grid", ["x_min", "x_max", "nx"], true, None);
    let gy = rd.grid1d("grid", ["y_min", "y_max", "ny"], true, None);
    let w_grid = rd.grid1d("grid", ["w_min", "w_max", "nw"], false, None);

    rd.section("solver", true);
    let dt = rd.positive("solver", "dt", None);
    let t_end = rd.number("solver", "t_end", None);
    let stride = rd.count("solver", "stride", Some(10), 1);
    let cfl = rd.positive("solver", "cfl_safety", Some(0.4));
    let solver = match (dt, t_end, stride, cfl) {
        (Some(dt), Some(t_end), Some(snapshot_stride), Some(cfl_safety)) => {
            let c = SolverConfig {
                dt,
                t_end,
                snapshot_stride,
                cfl_safety,
            };
            match c.validate() {
                Ok(()) => Some(c),
                Err(e) => {
                    rd.issue("solver", e.to_string());
                    None
                }
            }
        }
        _ => None,
    };

    let sigma = rd.positive("initial", "sigma", Some(1.0));
    let initial = (|| {
        let sigma = sigma?;
        let g = Gaussian2D {
            x0: rd.number("initial", "x0", Some(0.0))?,
            y0: rd.number("initial", "y0", Some(0.0))?,
            sx: rd.positive("initial", "sigma_x", Some(sigma))?,
            sy: rd.positive("initial", "sigma_y", Some(sigma))?,
            rho: rd.number("initial", "rho", Some(0.0))?,
            amp: rd.number("initial", "amplitude", Some(1.0))?,
        };
        match g.validate() {
            Ok(()) => Some(g),
            Err(e) => {
                rd.issue("initial", e.to_string());
                None
            }
        }
    })();

    let dir = rd.string("output", "dir").map(PathBuf::from);
    let formats = rd
        .strings("output", "formats")
        .unwrap_or_else(|| vec!["csv".into(), "json".into()]);
    for f in &formats {
        if f != "csv" && f != "json" {
            rd.issue("output.formats", format!("unknown format `{f}`"));
        }
    }
    let output = OutputConfig {
        dir,
        csv: formats.iter().any(|f| f == "csv"),
        json: formats.iter().any(|f| f == "json"),
    };

    let symmetry = (|| {
        let generators = rd
            .strings("symmetry", "generators")
            .unwrap_or_else(|| vec!["X1".into(), "X2".into(), "YZ".into()]);
        for g in &generators {
            if !["Y1", "YZ", "X1", "X2", "X3", "X4"].contains(&g.as_str()) {
                rd.issue("symmetry.generators", format!("unknown generator `{g}`"));
            }
        }
        Some(SymmetryConfig {
            eps: rd.number("symmetry", "eps", Some(0.1))?,
            generators,
            sample_times: rd.count("symmetry", "sample_times", Some(9), 2)?,
        })
    })();

    let reduction = rd
        .positive("reduction", "sigma", Some(1.0))
        .map(|sigma| ReductionConfig { sigma });

    let roundtrip = (|| {
        let waves = rd
            .strings("roundtrip", "waves")
            .unwrap_or_else(|| vec!["plane-wave".into(), "gaussian-packet".into()]);
        let waves: Option<Vec<FreeWave>> = waves.iter().map(|w| parse_wave(&mut rd, w)).collect();
        let window = RoundtripWindow {
            t0: rd.number("roundtrip", "t0", Some(0.0))?,
            t1: rd.number("roundtrip", "t1", Some(1.0))?,
            w0: rd.number("roundtrip", "w_min", Some(-3.0))?,
            w1: rd.number("roundtrip", "w_max", Some(3.0))?,
            nt: rd.count("roundtrip", "nt", Some(41), 3)?,
            nw: rd.count("roundtrip", "nw", Some(41), 3)?,
        };
        if !(window.t1 > window.t0 && window.w1 > window.w0) {
            rd.issue("roundtrip", "window bounds must be increasing");
            return None;
        }
        Some(RoundtripConfig {
            mass: rd.positive("roundtrip", "mass", Some(1.0))?,
            tau0: Complex64::new(
                rd.number("roundtrip", "tau0_re", Some(0.0))?,
                rd.number("roundtrip", "tau0_im", Some(0.0))?,
            ),
            window,
            waves: waves?,
        })
    })();

    let reduced_symmetry = (|| {
        let alpha = rd
            .numbers("reduced_symmetry", "alpha", 3)
            .unwrap_or_else(|| vec![1.0, 0.5, 0.0]);
        Some(ReducedSymmetryConfig {
            drift: rd.number("reduced_symmetry", "drift", Some(0.5))?,
            reaction: rd.number("reduced_symmetry", "reaction", Some(0.3))?,
            alpha: [alpha[0], alpha[1], alpha[2]],
            beta0: rd.number("reduced_symmetry", "beta0", Some(1.0))?,
            beta1: rd.number("reduced_symmetry", "beta1", Some(0.0))?,
            phi0: rd.number("reduced_symmetry", "phi0", Some(0.2))?,
            grid: rd.grid1d(
                "reduced_symmetry",
                ["w_min", "w_max", "nw"],
                false,
                Some((-8.0, 8.0, 81)),
            )?,
            t_end: rd.positive("reduced_symmetry", "t_end", Some(0.5))?,
            sigma: rd.positive("reduced_symmetry", "sigma", Some(1.0))?,
        })
    })();

    if !rd.issues.is_empty() {
        return Err(ConfigErrors(rd.issues));
    }
    let (coefficients, coefficient_specs) = coeffs.expect("no issues implies coefficients");
    Ok(RunConfig {
        source: source.to_path_buf(),
        coefficients,
        coefficient_specs,
        grid: Grid2D::new(gx.expect("grid"), gy.expect("grid")),
        w_grid,
        solver: solver.expect("solver"),
        initial: initial.expect("initial"),
        output,
        symmetry: symmetry.expect("symmetry"),
        reduction: reduction.expect("reduction"),
        roundtrip: roundtrip.expect("roundtrip"),
        reduced_symmetry: reduced_symmetry.expect("reduced symmetry"),
    })
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigErrors> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        ConfigErrors(vec![ConfigIssue {
            path: path.display().to_string(),
            line: None,
            message: e.to_string(),
        }])
    })?;
    parse_config_str(&text, path)
}
