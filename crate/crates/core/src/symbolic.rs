//! Closed-form formulas from learned edge activations.
//!
//! Every active edge of a shallow network is probed on its training domain and matched
//! against a fixed library of named functions in the form `c * f(a * x + b) + d`. The
//! inner affine pair is searched on a grid and refined by coordinate descent; the outer
//! pair is solved by least squares. The winner is the best R², except that any candidate
//! within [`TIE_BAND`] of the best and of lower complexity is preferred.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{KanAftError, Result};
use crate::kan::EdgeActivation;
use crate::trainers::TrainedModel;

pub const PROBE_POINTS: usize = 200;
pub const TIE_BAND: f64 = 0.005;
const GRID_STEPS: usize = 41;
const A_MIN: f64 = 0.25;
const A_MAX: f64 = 4.0;
const B_SPAN: f64 = 3.0;

#[derive(Debug, Clone, Copy)]
pub struct CandidateFunction {
    pub name: &'static str,
    pub complexity_rank: u8,
    /// `None` marks an argument outside the function's domain.
    pub evaluate: fn(f64) -> Option<f64>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// The fixed function library, in tie-break order.
pub fn candidate_library() -> Vec<CandidateFunction> {
    vec![
        CandidateFunction { name: "x", complexity_rank: 0, evaluate: |u| finite(u) },
        CandidateFunction { name: "x^2", complexity_rank: 1, evaluate: |u| finite(u * u) },
        CandidateFunction { name: "x^3", complexity_rank: 2, evaluate: |u| finite(u * u * u) },
        CandidateFunction { name: "exp", complexity_rank: 3, evaluate: |u| finite(u.exp()) },
        CandidateFunction {
            name: "log",
            complexity_rank: 3,
            evaluate: |u| if u > 1e-6 { finite(u.ln()) } else { None },
        },
        CandidateFunction { name: "sin", complexity_rank: 4, evaluate: |u| finite(u.sin()) },
        CandidateFunction { name: "cos", complexity_rank: 4, evaluate: |u| finite(u.cos()) },
        CandidateFunction {
            name: "sqrt",
            complexity_rank: 2,
            evaluate: |u| if u >= 0.0 { finite(u.sqrt()) } else { None },
        },
        CandidateFunction { name: "tanh", complexity_rank: 4, evaluate: |u| finite(u.tanh()) },
        CandidateFunction {
            name: "1/x",
            complexity_rank: 5,
            evaluate: |u| if u.abs() > 1e-3 { finite(1.0 / u) } else { None },
        },
        CandidateFunction { name: "abs", complexity_rank: 6, evaluate: |u| finite(u.abs()) },
    ]
}

fn lookup(name: &str) -> Option<CandidateFunction> {
    candidate_library().into_iter().find(|c| c.name == name)
}

/// `c * f(a * x + b) + d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicFit {
    pub function_name: String,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub r_squared: f64,
    /// The probed activation was constant; `c = 0` and `d` holds the constant.
    #[serde(default)]
    pub constant: bool,
}

impl SymbolicFit {
    pub fn eval(&self, x: f64) -> Option<f64> {
        if self.c == 0.0 {
            return Some(self.d);
        }
        let f = lookup(&self.function_name)?;
        (f.evaluate)(self.a * x + self.b).map(|v| self.c * v + self.d)
    }
}

/// Uniform probe grid over `[lo, hi]`.
pub fn probe_grid(lo: f64, hi: f64) -> Vec<f64> {
    (0..PROBE_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / (PROBE_POINTS - 1) as f64)
        .collect()
}

struct Probe {
    xs: Vec<f64>,
    ys: Vec<f64>,
    y_mean: f64,
    sst: f64,
}

/// Least-squares `(c, d)` and R² for one inner affine map, or `None` if the candidate is
/// undefined somewhere on the probe or collapses to a constant.
fn score(probe: &Probe, f: &CandidateFunction, a: f64, b: f64, buf: &mut Vec<f64>) -> Option<(f64, f64, f64)> {
    buf.clear();
    for x in &probe.xs {
        buf.push((f.evaluate)(a * x + b)?);
    }
    let n = buf.len() as f64;
    let u_mean = buf.iter().sum::<f64>() / n;
    let mut suu = 0.0;
    let mut suy = 0.0;
    for (u, y) in buf.iter().zip(&probe.ys) {
        suu += (u - u_mean) * (u - u_mean);
        suy += (u - u_mean) * (y - probe.y_mean);
    }
    if !(suu > 1e-24) || !suu.is_finite() {
        return None;
    }
    let c = suy / suu;
    let d = probe.y_mean - c * u_mean;
    let ssr: f64 = buf
        .iter()
        .zip(&probe.ys)
        .map(|(u, y)| {
            let r = y - (c * u + d);
            r * r
        })
        .sum();
    let r2 = 1.0 - ssr / probe.sst;
    r2.is_finite().then_some((c, d, r2))
}

fn a_grid() -> Vec<f64> {
    let ratio = (A_MAX / A_MIN).ln();
    let mags: Vec<f64> = (0..GRID_STEPS)
        .map(|i| A_MIN * (ratio * i as f64 / (GRID_STEPS - 1) as f64).exp())
        .collect();
    mags.iter().map(|m| -m).chain(mags.iter().copied()).collect()
}

fn b_grid() -> Vec<f64> {
    (0..GRID_STEPS)
        .map(|i| -B_SPAN + 2.0 * B_SPAN * i as f64 / (GRID_STEPS - 1) as f64)
        .collect()
}

/// Best `(a, b, c, d, r2)` for one candidate: coarse grid, then coordinate descent.
fn fit_candidate(probe: &Probe, f: &CandidateFunction) -> Option<(f64, f64, f64, f64, f64)> {
    let mut buf = Vec::with_capacity(probe.xs.len());
    let mut best: Option<(f64, f64, f64, f64, f64)> = None;
    let better = |cand: (f64, f64, f64), cur: &Option<(f64, f64, f64, f64, f64)>| {
        cur.is_none_or(|c| cand.2 > c.4)
    };
    for a in a_grid() {
        for b in b_grid() {
            if let Some(s) = score(probe, f, a, b, &mut buf) {
                if better(s, &best) {
                    best = Some((a, b, s.0, s.1, s.2));
                }
            }
        }
    }
    let (mut a, mut b, mut c, mut d, mut r2) = best?;
    let mut step_a = 0.1 * a.abs();
    let mut step_b = 0.5 * (2.0 * B_SPAN / (GRID_STEPS - 1) as f64);
    for _ in 0..200 {
        let mut improved = false;
        for (da, db) in [(step_a, 0.0), (-step_a, 0.0), (0.0, step_b), (0.0, -step_b)] {
            let (na, nb) = (a + da, b + db);
            if na == 0.0 {
                continue;
            }
            if let Some(s) = score(probe, f, na, nb, &mut buf) {
                if s.2 > r2 {
                    (a, b, c, d, r2) = (na, nb, s.0, s.1, s.2);
                    improved = true;
                }
            }
        }
        if !improved {
            step_a *= 0.5;
            step_b *= 0.5;
            if step_a < 1e-7 && step_b < 1e-7 {
                break;
            }
        }
    }
    Some((a, b, c, d, r2))
}

/// Fits a sampled univariate function `ys = g(xs)` against the library.
pub fn fit_samples(xs: &[f64], ys: &[f64], library: &[CandidateFunction]) -> Result<SymbolicFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(KanAftError::Domain("symbolic fit needs at least 3 matched samples".into()));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(KanAftError::Domain("probe values must be finite".into()));
    }
    let n = ys.len() as f64;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sst: f64 = ys.iter().map(|y| (y - y_mean) * (y - y_mean)).sum();
    let y_max = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if !(sst > 1e-20 * n * (1.0 + y_max * y_max)) {
        return Ok(SymbolicFit {
            function_name: "x".into(),
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: y_mean,
            r_squared: 1.0,
            constant: true,
        });
    }
    let probe = Probe {
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        y_mean,
        sst,
    };
    let fits: Vec<(usize, (f64, f64, f64, f64, f64))> = library
        .iter()
        .enumerate()
        .filter_map(|(i, f)| fit_candidate(&probe, f).map(|r| (i, r)))
        .collect();
    let best_r2 = fits
        .iter()
        .map(|(_, r)| r.4)
        .fold(f64::NEG_INFINITY, f64::max);
    let (idx, (a, b, c, d, r2)) = fits
        .iter()
        .filter(|(_, r)| r.4 >= best_r2 - TIE_BAND)
        .min_by_key(|(i, _)| (library[*i].complexity_rank, *i))
        .copied()
        .ok_or_else(|| KanAftError::Domain("no candidate function fits the probe".into()))?;
    Ok(SymbolicFit {
        function_name: library[idx].name.to_string(),
        a,
        b,
        c,
        d,
        r_squared: r2,
        constant: false,
    })
}

/// Probes `edge` uniformly over `domain` and fits the library.
pub fn fit_symbolic_edge(
    edge: &EdgeActivation,
    domain: (f64, f64),
    library: &[CandidateFunction],
) -> Result<SymbolicFit> {
    let (lo, hi) = domain;
    if !(lo < hi) {
        return Err(KanAftError::Domain(format!("empty probe domain [{lo}, {hi}]")));
    }
    let xs = probe_grid(lo, hi);
    let ys = xs.iter().map(|x| edge.eval(*x)).collect::<Result<Vec<f64>>>()?;
    fit_samples(&xs, &ys, library)
}

/// One additive term of the formula, in original covariate units.
///
/// Identity terms are normalized to `a = 1, b = 0`, so `c` is the slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaTerm {
    pub covariate: String,
    pub input_index: usize,
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub r_squared: f64,
    pub constant: bool,
    /// The fit as found on the standardized input scale.
    pub standardized_fit: SymbolicFit,
}

impl FormulaTerm {
    /// `c * f(a * z + b)`, without the offset `d` (which lives in the intercept).
    pub fn eval(&self, z: f64) -> f64 {
        if self.constant || self.c == 0.0 {
            return 0.0;
        }
        let f = lookup(&self.name).expect("library function");
        (f.evaluate)(self.a * z + self.b).map_or(f64::NAN, |v| self.c * v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicFormula {
    pub terms: Vec<FormulaTerm>,
    pub intercept: f64,
    pub rendered: String,
}

impl SymbolicFormula {
    /// Formula value for raw covariates.
    pub fn eval(&self, z: &[f64]) -> f64 {
        self.intercept
            + self
                .terms
                .iter()
                .map(|t| t.eval(z[t.input_index]))
                .sum::<f64>()
    }
}

/// The central training range of input `i`, clipped to the edge's grid; the full grid
/// when no usable range was recorded.
fn probe_domain(model: &TrainedModel, i: usize, edge: &EdgeActivation) -> (f64, f64) {
    let (glo, ghi) = edge.domain();
    match model.input_domains.get(i) {
        Some(&(lo, hi)) if lo.max(glo) < hi.min(ghi) => (lo.max(glo), hi.min(ghi)),
        _ => {
            let margin = 0.01 * (ghi - glo);
            (glo + margin, ghi - margin)
        }
    }
}

/// Fits every active edge of a shallow model and assembles `log T = sum_i c_i f_i(a_i z_i + b_i) + intercept`.
pub fn extract_formula(model: &TrainedModel) -> Result<SymbolicFormula> {
    let net = &model.network;
    if !net.is_shallow() {
        return Err(KanAftError::UnsupportedShape(format!(
            "formula extraction needs a single-layer network, got shape {:?}",
            net.shape
        )));
    }
    let library = candidate_library();
    let layer = &net.layers[0];
    let mut terms = Vec::new();
    let mut intercept = 0.0;
    for i in 0..layer.in_dim {
        if !layer.is_active(0, i) {
            continue;
        }
        let edge = layer.edge(0, i);
        let fit = fit_symbolic_edge(edge, probe_domain(model, i, edge), &library)?;
        // standardized x = (z - mean) / sd, so a x + b = (a / sd) z + (b - a mean / sd)
        let mean = model.standardization.means[i];
        let sd = model.standardization.sds[i];
        let a_raw = fit.a / sd;
        let b_raw = fit.b - fit.a * mean / sd;
        let (a, b, c, d) = if fit.constant {
            (1.0, 0.0, 0.0, fit.d)
        } else if fit.function_name == "x" {
            (1.0, 0.0, fit.c * a_raw, fit.c * b_raw + fit.d)
        } else {
            (a_raw, b_raw, fit.c, fit.d)
        };
        intercept += d;
        terms.push(FormulaTerm {
            covariate: model.covariate_names[i].clone(),
            input_index: i,
            name: fit.function_name.clone(),
            a,
            b,
            c,
            d,
            r_squared: fit.r_squared,
            constant: fit.constant,
            standardized_fit: fit,
        });
    }
    let rendered = render(&terms, intercept);
    Ok(SymbolicFormula {
        terms,
        intercept,
        rendered,
    })
}

fn signed(v: f64) -> (char, f64) {
    let r = round4(v);
    if r < 0.0 {
        ('-', -r)
    } else {
        ('+', r)
    }
}

fn round4(v: f64) -> f64 {
    let r = (v * 1e4).round() / 1e4;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn inner(t: &FormulaTerm) -> String {
    let (s, b) = signed(t.b);
    format!("{:.4}*{} {} {:.4}", t.a, t.covariate, s, b)
}

fn term_body(t: &FormulaTerm) -> String {
    match t.name.as_str() {
        "x" => t.covariate.clone(),
        "x^2" => format!("({})^2", inner(t)),
        "x^3" => format!("({})^3", inner(t)),
        "1/x" => format!("inv({})", inner(t)),
        name => format!("{name}({})", inner(t)),
    }
}

/// One-line equation, terms in input order with 4-decimal coefficients.
pub fn render(terms: &[FormulaTerm], intercept: f64) -> String {
    let mut out = String::from("log T =");
    let mut first = true;
    for t in terms.iter().filter(|t| !t.constant && round4(t.c) != 0.0) {
        let (s, c) = signed(t.c);
        if first {
            let lead = if s == '-' { "-" } else { "" };
            let _ = write!(out, " {lead}{c:.4}*{}", term_body(t));
            first = false;
        } else {
            let _ = write!(out, " {s} {c:.4}*{}", term_body(t));
        }
    }
    let (s, v) = signed(intercept);
    if first {
        let lead = if s == '-' { "-" } else { "" };
        let _ = write!(out, " {lead}{v:.4}");
    } else {
        let _ = write!(out, " {s} {v:.4}");
    }
    out
}

/// A term recovered from a rendered equation.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTerm {
    pub name: String,
    pub covariate: String,
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedFormula {
    pub terms: Vec<ParsedTerm>,
    pub intercept: f64,
}

fn parse_err(msg: impl Into<String>) -> KanAftError {
    KanAftError::Parse {
        line: 1,
        message: msg.into(),
    }
}

fn num(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(format!("expected a number, found '{s}'")))
}

/// Splits `lhs +- rhs` at top-level ` + ` / ` - ` separators, keeping signs.
fn split_signed(s: &str) -> Vec<(f64, String)> {
    let bytes = s.as_bytes();
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    let mut sign = 1.0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b' ' if depth == 0
                && i + 2 < bytes.len()
                && (bytes[i + 1] == b'+' || bytes[i + 1] == b'-')
                && bytes[i + 2] == b' ' =>
            {
                parts.push((sign, s[start..i].to_string()));
                sign = if bytes[i + 1] == b'-' { -1.0 } else { 1.0 };
                i += 3;
                start = i;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    parts.push((sign, s[start..].to_string()));
    parts
}

fn parse_inner(s: &str) -> Result<(f64, String, f64)> {
    let parts = split_signed(s);
    if parts.len() != 2 {
        return Err(parse_err(format!("malformed argument '{s}'")));
    }
    let (a_str, cov) = parts[0]
        .1
        .split_once('*')
        .ok_or_else(|| parse_err(format!("malformed argument '{s}'")))?;
    Ok((num(a_str)?, cov.trim().to_string(), parts[1].0 * num(&parts[1].1)?))
}

/// Parses the output of [`render`] back into coefficients.
pub fn parse_rendered(text: &str) -> Result<ParsedFormula> {
    let body = text
        .trim()
        .strip_prefix("log T =")
        .ok_or_else(|| parse_err("equation must start with 'log T ='"))?
        .trim();
    let mut terms = Vec::new();
    let mut intercept = None;
    let mut pieces = split_signed(body);
    if let Some(first) = pieces.first_mut() {
        if let Some(rest) = first.1.strip_prefix('-') {
            first.0 = -1.0;
            first.1 = rest.to_string();
        }
    }
    for (sign, piece) in pieces {
        let piece = piece.trim();
        let Some((coef, rest)) = piece.split_once('*') else {
            if intercept.is_some() {
                return Err(parse_err("more than one constant term"));
            }
            intercept = Some(sign * num(piece)?);
            continue;
        };
        let c = sign * num(coef)?;
        let term = if let Some(arg) = rest.strip_prefix('(') {
            let (arg, power) = if let Some(a) = arg.strip_suffix(")^2") {
                (a, "x^2")
            } else if let Some(a) = arg.strip_suffix(")^3") {
                (a, "x^3")
            } else {
                return Err(parse_err(format!("unknown power term '{rest}'")));
            };
            let (a, covariate, b) = parse_inner(arg)?;
            ParsedTerm { name: power.into(), covariate, c, a, b }
        } else if let Some((fname, arg)) = rest.split_once('(') {
            let arg = arg
                .strip_suffix(')')
                .ok_or_else(|| parse_err(format!("unbalanced term '{rest}'")))?;
            let name = if fname == "inv" { "1/x" } else { fname };
            if lookup(name).is_none() {
                return Err(parse_err(format!("unknown function '{fname}'")));
            }
            let (a, covariate, b) = parse_inner(arg)?;
            ParsedTerm { name: name.into(), covariate, c, a, b }
        } else {
            ParsedTerm {
                name: "x".into(),
                covariate: rest.trim().to_string(),
                c,
                a: 1.0,
                b: 0.0,
            }
        };
        terms.push(term);
    }
    Ok(ParsedFormula {
        terms,
        intercept: intercept.ok_or_else(|| parse_err("missing constant term"))?,
    })
}
