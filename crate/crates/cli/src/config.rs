//! Scenario configuration files.
//!
//! The format is a flat sectioned text file:
//!
//! ```text
//! # Caldirola-Kanai oscillator with a cosine drive.
//! [system]
//! preset = damped_harmonic
//! gamma = 0.2
//! omega = 1.0
//! lambda = cos 1.0 2.0
//!
//! [grid]
//! x_min = -16
//! x_max = 16
//! n = 512
//! ```
//!
//! `#` starts a comment anywhere on a line. Sections are `[system]`,
//! `[grid]`, `[time]`, `[initial_state]`, `[outputs]`, and `[units]`; the
//! first four are required. Keys are `name = value` pairs. Coefficient
//! curves (`f`, `omega_sq`, `lambda`) accept
//!
//! ```text
//! poly c0 c1 c2 ...                  # polynomial in t, ascending powers
//! cos A w  |  sin A w  |  exp A r    # A cos(wt), A sin(wt), A e^{rt}
//! piecewise b1 .. bk | c0 c1 | ...   # k breakpoints, k+1 polynomial segments
//! ```
//!
//! Every parse or validation error reports the 1-based line and column of
//! the offending token.

use std::path::Path;

use qat_core::classical::LsodeSpec;
use qat_core::curve::Curve;

use crate::error::CliError;

/// Evaluable coefficient expression from a config file.
#[derive(Debug, Clone)]
pub enum CurveExpr {
    Poly(Vec<f64>),
    Cos { amp: f64, freq: f64 },
    Sin { amp: f64, freq: f64 },
    Exp { amp: f64, rate: f64 },
    Piecewise { breaks: Vec<f64>, segments: Vec<Vec<f64>> },
}

/// Horner evaluation of a polynomial and its derivative.
fn poly_eval(coeffs: &[f64], t: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for &c in coeffs.iter().rev() {
        d = d * t + v;
        v = v * t + c;
    }
    (v, d)
}

impl CurveExpr {
    /// (value, derivative) at time `t`. Piecewise segments use the
    /// one-sided derivative of whichever segment owns `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match self {
            CurveExpr::Poly(c) => poly_eval(c, t),
            CurveExpr::Cos { amp, freq } => {
                (amp * (freq * t).cos(), -amp * freq * (freq * t).sin())
            }
            CurveExpr::Sin { amp, freq } => {
                (amp * (freq * t).sin(), amp * freq * (freq * t).cos())
            }
            CurveExpr::Exp { amp, rate } => {
                let e = amp * (rate * t).exp();
                (e, rate * e)
            }
            CurveExpr::Piecewise { breaks, segments } => {
                let idx = breaks.iter().take_while(|&&b| t >= b).count();
                poly_eval(&segments[idx], t)
            }
        }
    }

    pub fn to_curve(&self) -> Curve {
        let e = self.clone();
        Curve::analytic(move |t| e.eval(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Free,
    DampedParticle,
    Harmonic,
    DampedHarmonic,
}

/// System selection: either a named preset or raw coefficient curves for
/// the damping integral f, the squared frequency, and the drive.
#[derive(Debug, Clone)]
pub enum SystemCfg {
    Preset {
        preset: Preset,
        gamma: f64,
        omega: f64,
        lambda: Option<CurveExpr>,
    },
    Raw {
        f: CurveExpr,
        omega_sq: CurveExpr,
        lambda: Option<CurveExpr>,
    },
}

impl SystemCfg {
    pub fn is_forced(&self) -> bool {
        match self {
            SystemCfg::Preset { lambda, .. } | SystemCfg::Raw { lambda, .. } => lambda.is_some(),
        }
    }

    /// (omega, gamma) when the system is an oscillator preset whose ladder
    /// parameters can be inferred.
    pub fn oscillator_params(&self) -> Option<(f64, f64)> {
        match self {
            SystemCfg::Preset {
                preset: Preset::Harmonic,
                omega,
                ..
            } => Some((*omega, 0.0)),
            SystemCfg::Preset {
                preset: Preset::DampedHarmonic,
                gamma,
                omega,
                ..
            } => Some((*omega, *gamma)),
            _ => None,
        }
    }

    pub fn to_lsode(&self, units: &UnitsCfg) -> LsodeSpec {
        let spec = match self {
            SystemCfg::Preset {
                preset,
                gamma,
                omega,
                lambda,
            } => {
                let (g, w) = (*gamma, *omega);
                let forcing = lambda.as_ref().map(CurveExpr::to_curve);
                match (preset, forcing) {
                    (Preset::Free, None) => LsodeSpec::free(),
                    (Preset::Free, Some(l)) => {
                        LsodeSpec::new("forced_free", Curve::Zero, Curve::Zero, Some(l))
                    }
                    (Preset::DampedParticle, None) => LsodeSpec::damped_particle(g),
                    (Preset::DampedParticle, Some(l)) => LsodeSpec::new(
                        "forced_damped_particle",
                        Curve::analytic(move |t| (g * t, g)),
                        Curve::Zero,
                        Some(l),
                    ),
                    (Preset::Harmonic, None) => LsodeSpec::harmonic(w),
                    (Preset::Harmonic, Some(l)) => LsodeSpec::forced_damped_harmonic(0.0, w, l),
                    (Preset::DampedHarmonic, None) => LsodeSpec::damped_harmonic(g, w),
                    (Preset::DampedHarmonic, Some(l)) => {
                        LsodeSpec::forced_damped_harmonic(g, w, l)
                    }
                }
            }
            SystemCfg::Raw { f, omega_sq, lambda } => LsodeSpec::new(
                "custom",
                f.to_curve(),
                omega_sq.to_curve(),
                lambda.as_ref().map(CurveExpr::to_curve),
            ),
        };
        spec.with_units(units.m, units.hbar)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GridCfg {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    CrankNicolson,
}

#[derive(Debug, Clone, Copy)]
pub struct TimeCfg {
    pub t_max: f64,
    pub samples: usize,
    pub cn_dt: f64,
    pub method: Method,
}

#[derive(Debug, Clone)]
pub enum StateCfg {
    Gaussian { x0: f64, p0: f64, sigma: f64 },
    PlaneWave { k: f64 },
    Eigen { n: u32, omega_tilde: f64, gamma_tilde: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct OutputsCfg {
    pub expectations: bool,
    pub residuals: bool,
    pub algebra_table: bool,
    pub spectrum: bool,
    pub wavefunction_dump: bool,
}

impl Default for OutputsCfg {
    fn default() -> Self {
        OutputsCfg {
            expectations: true,
            residuals: false,
            algebra_table: false,
            spectrum: false,
            wavefunction_dump: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UnitsCfg {
    pub m: f64,
    pub hbar: f64,
}

impl Default for UnitsCfg {
    fn default() -> Self {
        UnitsCfg { m: 1.0, hbar: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub label: String,
    pub system: SystemCfg,
    pub grid: GridCfg,
    pub time: TimeCfg,
    pub state: StateCfg,
    pub outputs: OutputsCfg,
    pub units: UnitsCfg,
}

pub fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());
    parse(&path.display().to_string(), &text, label)
}

// ---------------------------------------------------------------------------
// Lexing: lines -> sections of position-tagged key/value entries.
// ---------------------------------------------------------------------------

/// A whitespace-delimited value token and the 1-based column it starts at.
#[derive(Debug, Clone)]
struct Token {
    col: usize,
    text: String,
}

#[derive(Debug)]
struct Entry {
    key: String,
    line: usize,
    key_col: usize,
    value: Vec<Token>,
}

#[derive(Debug)]
struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

const SECTION_NAMES: [&str; 6] = ["system", "grid", "time", "initial_state", "outputs", "units"];

fn tokens_with_cols(text: &str, offset: usize) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    col: offset + s + 1,
                    text: text[s..i].to_string(),
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            col: offset + s + 1,
            text: text[s..].to_string(),
        });
    }
    out
}

fn lex(path: &str, text: &str) -> Result<Vec<Section>, CliError> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(h) => &raw[..h],
            None => raw,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let first_col = line.len() - line.trim_start().len() + 1;
        if trimmed.starts_with('[') {
            if !trimmed.ends_with(']') || trimmed.len() < 3 {
                return Err(CliError::config(
                    path,
                    Some((line_no, first_col)),
                    "malformed section header (expected `[name]`)",
                ));
            }
            let name = &trimmed[1..trimmed.len() - 1];
            if !SECTION_NAMES.contains(&name) {
                return Err(CliError::config(
                    path,
                    Some((line_no, first_col + 1)),
                    format!(
                        "unknown section `[{name}]` (expected one of [system], [grid], \
                         [time], [initial_state], [outputs], [units])"
                    ),
                ));
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(CliError::config(
                    path,
                    Some((line_no, first_col)),
                    format!("duplicate section `[{name}]`"),
                ));
            }
            sections.push(Section {
                name: name.to_string(),
                line: line_no,
                entries: Vec::new(),
            });
        } else {
            let Some(section) = sections.last_mut() else {
                return Err(CliError::config(
                    path,
                    Some((line_no, first_col)),
                    "key outside any [section]",
                ));
            };
            let Some(eq) = line.find('=') else {
                return Err(CliError::config(
                    path,
                    Some((line_no, first_col)),
                    "expected `key = value`",
                ));
            };
            let key_part = &line[..eq];
            let key = key_part.trim();
            if key.is_empty() {
                return Err(CliError::config(
                    path,
                    Some((line_no, first_col)),
                    "missing key before `=`",
                ));
            }
            if key.split_whitespace().count() != 1 {
                return Err(CliError::config(
                    path,
                    Some((line_no, first_col)),
                    format!("key `{key}` may not contain spaces"),
                ));
            }
            let key_col = key_part.len() - key_part.trim_start().len() + 1;
            if section.entries.iter().any(|e| e.key == key) {
                return Err(CliError::config(
                    path,
                    Some((line_no, key_col)),
                    format!("duplicate key `{key}` in [{}]", section.name),
                ));
            }
            let value = tokens_with_cols(&line[eq + 1..], eq + 1);
            if value.is_empty() {
                return Err(CliError::config(
                    path,
                    Some((line_no, eq + 2)),
                    format!("missing value for `{key}`"),
                ));
            }
            section.entries.push(Entry {
                key: key.to_string(),
                line: line_no,
                key_col,
                value,
            });
        }
    }
    Ok(sections)
}

// ---------------------------------------------------------------------------
// Typed value extraction.
// ---------------------------------------------------------------------------

/// A parsed value remembering where it came from, for later semantic errors.
#[derive(Debug, Clone, Copy)]
struct At<T> {
    v: T,
    line: usize,
    col: usize,
}

fn parse_number(path: &str, tok: &Token, line: usize) -> Result<f64, CliError> {
    tok.text.parse::<f64>().map_err(|_| {
        CliError::config(
            path,
            Some((line, tok.col)),
            format!("expected a number, found `{}`", tok.text),
        )
    })
}

fn single_token<'a>(path: &str, e: &'a Entry) -> Result<&'a Token, CliError> {
    if e.value.len() > 1 {
        return Err(CliError::config(
            path,
            Some((e.line, e.value[1].col)),
            format!("unexpected trailing token `{}`", e.value[1].text),
        ));
    }
    Ok(&e.value[0])
}

fn scalar(path: &str, e: &Entry) -> Result<At<f64>, CliError> {
    let tok = single_token(path, e)?;
    Ok(At {
        v: parse_number(path, tok, e.line)?,
        line: e.line,
        col: tok.col,
    })
}

fn integer(path: &str, e: &Entry) -> Result<At<usize>, CliError> {
    let tok = single_token(path, e)?;
    let v = tok.text.parse::<usize>().map_err(|_| {
        CliError::config(
            path,
            Some((e.line, tok.col)),
            format!("expected a non-negative integer, found `{}`", tok.text),
        )
    })?;
    Ok(At {
        v,
        line: e.line,
        col: tok.col,
    })
}

fn boolean(path: &str, e: &Entry) -> Result<At<bool>, CliError> {
    let tok = single_token(path, e)?;
    let v = match tok.text.as_str() {
        "true" => true,
        "false" => false,
        other => {
            return Err(CliError::config(
                path,
                Some((e.line, tok.col)),
                format!("expected `true` or `false`, found `{other}`"),
            ))
        }
    };
    Ok(At {
        v,
        line: e.line,
        col: tok.col,
    })
}

fn curve(path: &str, e: &Entry) -> Result<CurveExpr, CliError> {
    let head = &e.value[0];
    let rest = &e.value[1..];
    let numbers = |toks: &[Token]| -> Result<Vec<f64>, CliError> {
        toks.iter()
            .map(|t| parse_number(path, t, e.line))
            .collect()
    };
    match head.text.as_str() {
        "poly" => {
            if rest.is_empty() {
                return Err(CliError::config(
                    path,
                    Some((e.line, head.col)),
                    "`poly` needs at least one coefficient",
                ));
            }
            Ok(CurveExpr::Poly(numbers(rest)?))
        }
        kind @ ("cos" | "sin" | "exp") => {
            if rest.len() != 2 {
                return Err(CliError::config(
                    path,
                    Some((e.line, head.col)),
                    format!("`{kind}` takes exactly two numbers (amplitude, rate)"),
                ));
            }
            let a = parse_number(path, &rest[0], e.line)?;
            let b = parse_number(path, &rest[1], e.line)?;
            Ok(match kind {
                "cos" => CurveExpr::Cos { amp: a, freq: b },
                "sin" => CurveExpr::Sin { amp: a, freq: b },
                _ => CurveExpr::Exp { amp: a, rate: b },
            })
        }
        "piecewise" => {
            for t in rest {
                if t.text.contains('|') && t.text != "|" {
                    return Err(CliError::config(
                        path,
                        Some((e.line, t.col)),
                        "separator `|` must be surrounded by spaces",
                    ));
                }
            }
            let mut groups: Vec<Vec<&Token>> = vec![Vec::new()];
            for t in rest {
                if t.text == "|" {
                    groups.push(Vec::new());
                } else {
                    groups.last_mut().unwrap().push(t);
                }
            }
            if groups.len() < 2 || groups[0].is_empty() {
                return Err(CliError::config(
                    path,
                    Some((e.line, head.col)),
                    "`piecewise` needs breakpoints, then `|`-separated coefficient groups",
                ));
            }
            let breaks: Vec<f64> = groups[0]
                .iter()
                .map(|t| parse_number(path, t, e.line))
                .collect::<Result<_, _>>()?;
            if breaks.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CliError::config(
                    path,
                    Some((e.line, groups[0][0].col)),
                    "breakpoints must be strictly increasing",
                ));
            }
            let segments: Vec<Vec<f64>> = groups[1..]
                .iter()
                .map(|g| {
                    if g.is_empty() {
                        return Err(CliError::config(
                            path,
                            Some((e.line, head.col)),
                            "empty coefficient group in `piecewise`",
                        ));
                    }
                    g.iter()
                        .map(|t| parse_number(path, t, e.line))
                        .collect::<Result<Vec<f64>, _>>()
                })
                .collect::<Result<_, _>>()?;
            if segments.len() != breaks.len() + 1 {
                return Err(CliError::config(
                    path,
                    Some((e.line, head.col)),
                    format!(
                        "`piecewise` needs one more coefficient group than breakpoints \
                         (got {}, need {})",
                        segments.len(),
                        breaks.len() + 1
                    ),
                ));
            }
            Ok(CurveExpr::Piecewise { breaks, segments })
        }
        other => Err(CliError::config(
            path,
            Some((e.line, head.col)),
            format!("unknown curve form `{other}` (expected poly, cos, sin, exp, or piecewise)"),
        )),
    }
}

// ---------------------------------------------------------------------------
// Section assembly.
// ---------------------------------------------------------------------------

fn unknown_key(path: &str, section: &str, e: &Entry, known: &[&str]) -> CliError {
    CliError::config(
        path,
        Some((e.line, e.key_col)),
        format!(
            "unknown key `{}` in [{section}] (expected one of: {})",
            e.key,
            known.join(", ")
        ),
    )
}

fn missing_key(path: &str, section: &Section, key: &str) -> CliError {
    CliError::config(
        path,
        Some((section.line, 1)),
        format!("missing key `{key}` in [{}]", section.name),
    )
}

fn parse_system(path: &str, section: &Section) -> Result<SystemCfg, CliError> {
    const KEYS: [&str; 6] = ["preset", "gamma", "omega", "f", "omega_sq", "lambda"];
    let mut preset: Option<At<Preset>> = None;
    let mut gamma: Option<At<f64>> = None;
    let mut omega: Option<At<f64>> = None;
    let mut f_curve: Option<(CurveExpr, usize, usize)> = None;
    let mut omega_sq: Option<CurveExpr> = None;
    let mut lambda: Option<CurveExpr> = None;

    for e in &section.entries {
        match e.key.as_str() {
            "preset" => {
                let tok = single_token(path, e)?;
                let p = match tok.text.as_str() {
                    "free" => Preset::Free,
                    "damped_particle" => Preset::DampedParticle,
                    "harmonic" => Preset::Harmonic,
                    "damped_harmonic" => Preset::DampedHarmonic,
                    other => {
                        return Err(CliError::config(
                            path,
                            Some((e.line, tok.col)),
                            format!(
                                "unknown preset `{other}` (expected free, damped_particle, \
                                 harmonic, or damped_harmonic)"
                            ),
                        ))
                    }
                };
                preset = Some(At {
                    v: p,
                    line: e.line,
                    col: tok.col,
                });
            }
            "gamma" => gamma = Some(scalar(path, e)?),
            "omega" => omega = Some(scalar(path, e)?),
            "f" => {
                f_curve = Some((curve(path, e)?, e.line, e.key_col));
            }
            "omega_sq" => omega_sq = Some(curve(path, e)?),
            "lambda" => lambda = Some(curve(path, e)?),
            _ => return Err(unknown_key(path, "system", e, &KEYS)),
        }
    }

    if let Some(p) = preset {
        if let Some((_, line, col)) = f_curve {
            return Err(CliError::config(
                path,
                Some((line, col)),
                "`f` conflicts with `preset` (use one or the other)",
            ));
        }
        if omega_sq.is_some() {
            return Err(CliError::config(
                path,
                Some((p.line, p.col)),
                "`omega_sq` conflicts with `preset` (use one or the other)",
            ));
        }
        let needs_gamma = matches!(p.v, Preset::DampedParticle | Preset::DampedHarmonic);
        let needs_omega = matches!(p.v, Preset::Harmonic | Preset::DampedHarmonic);
        match (&gamma, needs_gamma) {
            (None, true) => {
                return Err(CliError::config(
                    path,
                    Some((p.line, p.col)),
                    "this preset needs `gamma`",
                ))
            }
            (Some(g), false) => {
                return Err(CliError::config(
                    path,
                    Some((g.line, g.col)),
                    "`gamma` is not used by this preset",
                ))
            }
            _ => {}
        }
        match (&omega, needs_omega) {
            (None, true) => {
                return Err(CliError::config(
                    path,
                    Some((p.line, p.col)),
                    "this preset needs `omega`",
                ))
            }
            (Some(w), false) => {
                return Err(CliError::config(
                    path,
                    Some((w.line, w.col)),
                    "`omega` is not used by this preset",
                ))
            }
            _ => {}
        }
        Ok(SystemCfg::Preset {
            preset: p.v,
            gamma: gamma.map_or(0.0, |g| g.v),
            omega: omega.map_or(0.0, |w| w.v),
            lambda,
        })
    } else {
        if let Some(g) = gamma {
            return Err(CliError::config(
                path,
                Some((g.line, g.col)),
                "`gamma` requires `preset`; raw systems take an `f` curve",
            ));
        }
        if let Some(w) = omega {
            return Err(CliError::config(
                path,
                Some((w.line, w.col)),
                "`omega` requires `preset`; raw systems take an `omega_sq` curve",
            ));
        }
        let Some((f, _, _)) = f_curve else {
            return Err(missing_key(path, section, "preset (or f)"));
        };
        let Some(omega_sq) = omega_sq else {
            return Err(missing_key(path, section, "omega_sq"));
        };
        Ok(SystemCfg::Raw { f, omega_sq, lambda })
    }
}

fn parse_grid(path: &str, section: &Section) -> Result<GridCfg, CliError> {
    const KEYS: [&str; 3] = ["x_min", "x_max", "n"];
    let mut x_min = None;
    let mut x_max = None;
    let mut n = None;
    for e in &section.entries {
        match e.key.as_str() {
            "x_min" => x_min = Some(scalar(path, e)?),
            "x_max" => x_max = Some(scalar(path, e)?),
            "n" => n = Some(integer(path, e)?),
            _ => return Err(unknown_key(path, "grid", e, &KEYS)),
        }
    }
    let x_min = x_min.ok_or_else(|| missing_key(path, section, "x_min"))?;
    let x_max = x_max.ok_or_else(|| missing_key(path, section, "x_max"))?;
    let n = n.ok_or_else(|| missing_key(path, section, "n"))?;
    if x_max.v <= x_min.v {
        return Err(CliError::config(
            path,
            Some((x_max.line, x_max.col)),
            "x_max must exceed x_min",
        ));
    }
    if !n.v.is_power_of_two() {
        return Err(CliError::config(
            path,
            Some((n.line, n.col)),
            "n must be a power of two",
        ));
    }
    if n.v < 8 {
        return Err(CliError::config(
            path,
            Some((n.line, n.col)),
            "n must be at least 8",
        ));
    }
    Ok(GridCfg {
        x_min: x_min.v,
        x_max: x_max.v,
        n: n.v,
    })
}

fn parse_time(path: &str, section: &Section) -> Result<TimeCfg, CliError> {
    const KEYS: [&str; 4] = ["t_max", "samples", "cn_dt", "method"];
    let mut t_max = None;
    let mut samples = None;
    let mut cn_dt: Option<At<f64>> = None;
    let mut method = Method::Exact;
    for e in &section.entries {
        match e.key.as_str() {
            "t_max" => t_max = Some(scalar(path, e)?),
            "samples" => samples = Some(integer(path, e)?),
            "cn_dt" => cn_dt = Some(scalar(path, e)?),
            "method" => {
                let tok = single_token(path, e)?;
                method = match tok.text.as_str() {
                    "exact" => Method::Exact,
                    "cn" => Method::CrankNicolson,
                    other => {
                        return Err(CliError::config(
                            path,
                            Some((e.line, tok.col)),
                            format!("unknown method `{other}` (expected exact or cn)"),
                        ))
                    }
                };
            }
            _ => return Err(unknown_key(path, "time", e, &KEYS)),
        }
    }
    let t_max = t_max.ok_or_else(|| missing_key(path, section, "t_max"))?;
    let samples = samples.ok_or_else(|| missing_key(path, section, "samples"))?;
    if !t_max.v.is_finite() || t_max.v <= 0.0 {
        return Err(CliError::config(
            path,
            Some((t_max.line, t_max.col)),
            "t_max must be positive",
        ));
    }
    if samples.v < 2 {
        return Err(CliError::config(
            path,
            Some((samples.line, samples.col)),
            "samples must be at least 2",
        ));
    }
    if let Some(dt) = &cn_dt {
        if !dt.v.is_finite() || dt.v <= 0.0 {
            return Err(CliError::config(
                path,
                Some((dt.line, dt.col)),
                "cn_dt must be positive",
            ));
        }
    }
    Ok(TimeCfg {
        t_max: t_max.v,
        samples: samples.v,
        cn_dt: cn_dt.map_or(1e-3, |d| d.v),
        method,
    })
}

fn parse_state(
    path: &str,
    section: &Section,
    system: &SystemCfg,
) -> Result<StateCfg, CliError> {
    const KEYS: [&str; 8] = [
        "kind",
        "x0",
        "p0",
        "sigma",
        "k",
        "n",
        "omega_tilde",
        "gamma_tilde",
    ];
    let mut kind: Option<(String, usize, usize)> = None;
    let mut x0 = None;
    let mut p0 = None;
    let mut sigma: Option<At<f64>> = None;
    let mut k = None;
    let mut n: Option<At<usize>> = None;
    let mut omega_tilde: Option<At<f64>> = None;
    let mut gamma_tilde: Option<At<f64>> = None;
    for e in &section.entries {
        match e.key.as_str() {
            "kind" => {
                let tok = single_token(path, e)?;
                kind = Some((tok.text.clone(), e.line, tok.col));
            }
            "x0" => x0 = Some(scalar(path, e)?),
            "p0" => p0 = Some(scalar(path, e)?),
            "sigma" => sigma = Some(scalar(path, e)?),
            "k" => k = Some(scalar(path, e)?),
            "n" => n = Some(integer(path, e)?),
            "omega_tilde" => omega_tilde = Some(scalar(path, e)?),
            "gamma_tilde" => gamma_tilde = Some(scalar(path, e)?),
            _ => return Err(unknown_key(path, "initial_state", e, &KEYS)),
        }
    }
    let (kind, kline, kcol) = kind.ok_or_else(|| missing_key(path, section, "kind"))?;
    let pos = Some((kline, kcol));
    let forbid = |name: &str, present: bool| -> Result<(), CliError> {
        if present {
            Err(CliError::config(
                path,
                pos,
                format!("`{name}` is not used by kind `{kind}`"),
            ))
        } else {
            Ok(())
        }
    };
    match kind.as_str() {
        "gaussian" => {
            forbid("k", k.is_some())?;
            forbid("n", n.is_some())?;
            forbid("omega_tilde", omega_tilde.is_some())?;
            forbid("gamma_tilde", gamma_tilde.is_some())?;
            let x0 = x0.ok_or_else(|| missing_key(path, section, "x0"))?;
            let p0 = p0.ok_or_else(|| missing_key(path, section, "p0"))?;
            let sigma = sigma.ok_or_else(|| missing_key(path, section, "sigma"))?;
            if sigma.v <= 0.0 {
                return Err(CliError::config(
                    path,
                    Some((sigma.line, sigma.col)),
                    "sigma must be positive",
                ));
            }
            Ok(StateCfg::Gaussian {
                x0: x0.v,
                p0: p0.v,
                sigma: sigma.v,
            })
        }
        "plane_wave" => {
            forbid("x0", x0.is_some())?;
            forbid("p0", p0.is_some())?;
            forbid("sigma", sigma.is_some())?;
            forbid("n", n.is_some())?;
            forbid("omega_tilde", omega_tilde.is_some())?;
            forbid("gamma_tilde", gamma_tilde.is_some())?;
            let k = k.ok_or_else(|| missing_key(path, section, "k"))?;
            Ok(StateCfg::PlaneWave { k: k.v })
        }
        "eigen" => {
            forbid("x0", x0.is_some())?;
            forbid("p0", p0.is_some())?;
            forbid("sigma", sigma.is_some())?;
            forbid("k", k.is_some())?;
            let n = n.ok_or_else(|| missing_key(path, section, "n"))?;
            if n.v > 16 {
                return Err(CliError::config(
                    path,
                    Some((n.line, n.col)),
                    "eigen index n must be at most 16",
                ));
            }
            let inferred = system.oscillator_params();
            let (wt, gt) = match (omega_tilde, gamma_tilde, inferred) {
                (Some(w), Some(g), _) => (w.v, g.v),
                (Some(w), None, Some((_, g))) => (w.v, g),
                (None, Some(g), Some((w, _))) => (w, g.v),
                (None, None, Some((w, g))) => (w, g),
                _ => {
                    return Err(CliError::config(
                        path,
                        pos,
                        "kind `eigen` needs omega_tilde and gamma_tilde for this system \
                         (no oscillator preset to infer them from)",
                    ))
                }
            };
            if wt <= gt / 2.0 {
                return Err(CliError::config(
                    path,
                    pos,
                    "kind `eigen` requires omega_tilde > gamma_tilde/2 (discrete branch)",
                ));
            }
            Ok(StateCfg::Eigen {
                n: n.v as u32,
                omega_tilde: wt,
                gamma_tilde: gt,
            })
        }
        other => Err(CliError::config(
            path,
            pos,
            format!("unknown kind `{other}` (expected gaussian, plane_wave, or eigen)"),
        )),
    }
}

fn parse_outputs(path: &str, section: &Section) -> Result<OutputsCfg, CliError> {
    const KEYS: [&str; 5] = [
        "expectations",
        "residuals",
        "algebra_table",
        "spectrum",
        "wavefunction_dump",
    ];
    let mut out = OutputsCfg::default();
    for e in &section.entries {
        let b = match e.key.as_str() {
            "expectations" => &mut out.expectations,
            "residuals" => &mut out.residuals,
            "algebra_table" => &mut out.algebra_table,
            "spectrum" => &mut out.spectrum,
            "wavefunction_dump" => &mut out.wavefunction_dump,
            _ => return Err(unknown_key(path, "outputs", e, &KEYS)),
        };
        *b = boolean(path, e)?.v;
    }
    Ok(out)
}

fn parse_units(path: &str, section: &Section) -> Result<UnitsCfg, CliError> {
    const KEYS: [&str; 2] = ["m", "hbar"];
    let mut units = UnitsCfg::default();
    for e in &section.entries {
        let value = scalar(path, e)?;
        if value.v <= 0.0 {
            return Err(CliError::config(
                path,
                Some((value.line, value.col)),
                format!("{} must be positive", e.key),
            ));
        }
        match e.key.as_str() {
            "m" => units.m = value.v,
            "hbar" => units.hbar = value.v,
            _ => return Err(unknown_key(path, "units", e, &KEYS)),
        }
    }
    Ok(units)
}

pub fn parse(path: &str, text: &str, label: String) -> Result<ScenarioConfig, CliError> {
    let sections = lex(path, text)?;
    let find = |name: &str| sections.iter().find(|s| s.name == name);
    let require = |name: &str| {
        find(name).ok_or_else(|| {
            CliError::config(path, None, format!("missing required section [{name}]"))
        })
    };

    let system = parse_system(path, require("system")?)?;
    let grid = parse_grid(path, require("grid")?)?;
    let time = parse_time(path, require("time")?)?;
    let state = parse_state(path, require("initial_state")?, &system)?;
    let outputs = match find("outputs") {
        Some(s) => parse_outputs(path, s)?,
        None => OutputsCfg::default(),
    };
    let units = match find("units") {
        Some(s) => parse_units(path, s)?,
        None => UnitsCfg::default(),
    };

    if outputs.spectrum {
        let section = find("outputs").expect("spectrum implies [outputs]");
        if system.oscillator_params().is_none() {
            return Err(CliError::config(
                path,
                Some((section.line, 1)),
                "spectrum output requires a harmonic or damped_harmonic preset",
            ));
        }
        if system.is_forced() {
            return Err(CliError::config(
                path,
                Some((section.line, 1)),
                "spectrum output requires an unforced system",
            ));
        }
    }

    Ok(ScenarioConfig {
        label,
        system,
        grid,
        time,
        state,
        outputs,
        units,
    })
}
