//! Regressor signals: expression trees over elementary functions of time,
//! the builtin scenario catalog, and windowed excitation diagnostics.
//!
//! Expressions use a small infix grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | atom
//! atom   := number | 't' | func '(' expr ')' | 'pow' '(' expr ',' expr ')' | '(' expr ')'
//! func   := 'sin' | 'cos' | 'exp'
//! ```

use std::fmt;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::linalg::SquareMatrix;
use crate::types::{EstimationProblem, RegressorSpec};

/// Denominators smaller than this in magnitude are rejected at evaluation.
pub const MIN_DENOMINATOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub enum SignalExpr {
    Const(f64),
    Time,
    Neg(Box<SignalExpr>),
    Add(Box<SignalExpr>, Box<SignalExpr>),
    Sub(Box<SignalExpr>, Box<SignalExpr>),
    Mul(Box<SignalExpr>, Box<SignalExpr>),
    Div(Box<SignalExpr>, Box<SignalExpr>),
    Sin(Box<SignalExpr>),
    Cos(Box<SignalExpr>),
    Exp(Box<SignalExpr>),
    Pow(Box<SignalExpr>, Box<SignalExpr>),
}

impl SignalExpr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser::new(src);
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn constant(c: f64) -> Self {
        SignalExpr::Const(c)
    }

    /// `sin(a t)`
    pub fn sin(a: f64) -> Self {
        SignalExpr::Sin(Box::new(scaled_time(a)))
    }

    /// `cos(a t)`
    pub fn cos(a: f64) -> Self {
        SignalExpr::Cos(Box::new(scaled_time(a)))
    }

    /// `exp(a t)`
    pub fn exp(a: f64) -> Self {
        SignalExpr::Exp(Box::new(scaled_time(a)))
    }

    /// `(1 + t)^p`
    pub fn shifted_power(p: f64) -> Self {
        SignalExpr::Pow(
            Box::new(SignalExpr::Add(
                Box::new(SignalExpr::Const(1.0)),
                Box::new(SignalExpr::Time),
            )),
            Box::new(SignalExpr::Const(p)),
        )
    }

    /// Evaluates at `t`. Division by a near-zero denominator is an error;
    /// other non-finite results are reported by [`RegressorSpec::eval`].
    pub fn eval(&self, t: f64) -> std::result::Result<f64, String> {
        use SignalExpr::*;
        Ok(match self {
            Const(c) => *c,
            Time => t,
            Neg(a) => -a.eval(t)?,
            Add(a, b) => a.eval(t)? + b.eval(t)?,
            Sub(a, b) => a.eval(t)? - b.eval(t)?,
            Mul(a, b) => a.eval(t)? * b.eval(t)?,
            Div(a, b) => {
                let d = b.eval(t)?;
                if d.abs() < MIN_DENOMINATOR {
                    return Err(format!("division by near-zero denominator {d:e}"));
                }
                a.eval(t)? / d
            }
            Sin(a) => a.eval(t)?.sin(),
            Cos(a) => a.eval(t)?.cos(),
            Exp(a) => a.eval(t)?.exp(),
            Pow(a, b) => a.eval(t)?.powf(b.eval(t)?),
        })
    }
}

fn scaled_time(a: f64) -> SignalExpr {
    if a == 1.0 {
        SignalExpr::Time
    } else {
        SignalExpr::Mul(Box::new(SignalExpr::Const(a)), Box::new(SignalExpr::Time))
    }
}

impl std::ops::Add for SignalExpr {
    type Output = SignalExpr;
    fn add(self, rhs: Self) -> Self {
        SignalExpr::Add(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Sub for SignalExpr {
    type Output = SignalExpr;
    fn sub(self, rhs: Self) -> Self {
        SignalExpr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Mul for SignalExpr {
    type Output = SignalExpr;
    fn mul(self, rhs: Self) -> Self {
        SignalExpr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Div for SignalExpr {
    type Output = SignalExpr;
    fn div(self, rhs: Self) -> Self {
        SignalExpr::Div(Box::new(self), Box::new(rhs))
    }
}

impl fmt::Display for SignalExpr {
    // Fully parenthesized binary ops keep the output re-parseable without
    // precedence bookkeeping.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use SignalExpr::*;
        match self {
            Const(c) if *c < 0.0 => write!(f, "({c})"),
            Const(c) => write!(f, "{c}"),
            Time => f.write_str("t"),
            Neg(a) => write!(f, "(-{a})"),
            Add(a, b) => write!(f, "({a}+{b})"),
            Sub(a, b) => write!(f, "({a}-{b})"),
            Mul(a, b) => write!(f, "({a}*{b})"),
            Div(a, b) => write!(f, "({a}/{b})"),
            Sin(a) => write!(f, "sin({a})"),
            Cos(a) => write!(f, "cos({a})"),
            Exp(a) => write!(f, "exp({a})"),
            Pow(a, b) => write!(f, "pow({a},{b})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<SignalExpr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = lhs + self.term()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = lhs - self.term()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<SignalExpr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = lhs * self.unary()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = lhs / self.unary()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<SignalExpr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(match inner {
                SignalExpr::Const(c) => SignalExpr::Const(-c),
                other => SignalExpr::Neg(Box::new(other)),
            });
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<SignalExpr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let ident = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                match ident {
                    "t" => Ok(SignalExpr::Time),
                    "sin" | "cos" | "exp" => {
                        self.expect(b'(')?;
                        let arg = Box::new(self.expr()?);
                        self.expect(b')')?;
                        Ok(match ident {
                            "sin" => SignalExpr::Sin(arg),
                            "cos" => SignalExpr::Cos(arg),
                            _ => SignalExpr::Exp(arg),
                        })
                    }
                    "pow" => {
                        self.expect(b'(')?;
                        let base = self.expr()?;
                        self.expect(b',')?;
                        let exponent = self.expr()?;
                        self.expect(b')')?;
                        Ok(SignalExpr::Pow(Box::new(base), Box::new(exponent)))
                    }
                    _ => {
                        self.pos = start;
                        Err(self.error(format!("unknown identifier '{ident}'")))
                    }
                }
            }
            Some(c) => Err(self.error(format!("unexpected character '{}'", c as char))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<SignalExpr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if self.pos == exp_start {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>().map(SignalExpr::Const).map_err(|_| {
            self.pos = start;
            self.error(format!("bad number '{text}'"))
        })
    }
}

/// Second component shared by examples 2, 4 and 6: a non-PE regressor whose
/// energy decays like `1/(1+t)`.
pub const DECAYING_SINUSOID: &str = "(sin(t)+cos(t))/pow(1+t,0.5) - sin(t)/(2*pow(1+t,1.5))";

/// A builtin scenario: problem data plus the gains used to reproduce it.
#[derive(Debug, Clone)]
pub struct Builtin {
    pub name: &'static str,
    pub problem: EstimationProblem,
    pub tau: f64,
    pub mu: f64,
    pub summary: &'static str,
}

pub const BUILTIN_NAMES: [&str; 6] = [
    "example1", "example2", "example3", "example4", "example5", "example6",
];

/// Returns the exact regressor, true parameters and default gains of a
/// catalog scenario.
pub fn builtin(name: &str) -> Result<Builtin> {
    let (components, theta, tau, mu, summary): (&[&str], &[f64], f64, f64, &str) = match name {
        "example1" => (
            &["1", "sin(t)"],
            &[-2.0, 2.0],
            1.0,
            0.95,
            "PE regressor col(1, sin t); MGE",
        ),
        "example2" => (
            &["1", DECAYING_SINUSOID],
            &[-2.0, 2.0],
            1.0,
            0.95,
            "non-PE decaying sinusoid; MGE",
        ),
        "example3" => (
            &["sin(t)", "cos(t)", "sin(2*t)"],
            &[1.0, 2.0, 3.0],
            1.0,
            0.55,
            "PE regressor col(sin t, cos t, sin 2t); GE vs MGE",
        ),
        "example4" => (
            &["1", DECAYING_SINUSOID],
            &[-2.0, 2.0],
            1.0,
            0.75,
            "non-PE decaying sinusoid; MRE vs MGE+MRE",
        ),
        "example5" => (
            &["1", "exp(-0.25*t)"],
            &[-2.0, 2.0],
            50.0,
            0.75,
            "non-PE col(1, exp(-0.25t)); MRE vs MGE+MRE",
        ),
        "example6" => (
            &["1", "cos(t)", DECAYING_SINUSOID],
            &[1.0, 2.0, 3.0],
            10.0,
            0.95,
            "non-PE q=3; GE, MRE, DREM vs MGE+MRE",
        ),
        other => return Err(Error::ScenarioNotFound(other.to_string())),
    };
    let exprs = components
        .iter()
        .map(|s| SignalExpr::parse(s))
        .collect::<Result<Vec<_>>>()?;
    let regressor = RegressorSpec::new(exprs)?;
    Ok(Builtin {
        name: BUILTIN_NAMES.iter().find(|n| **n == name).unwrap(),
        problem: EstimationProblem::new(regressor, theta.to_vec())?,
        tau,
        mu,
        summary,
    })
}

/// Windowed Gram matrix of the regressor and its smallest eigenvalue.
#[derive(Debug, Clone)]
pub struct ExcitationReport {
    pub window_start: f64,
    pub window_length: f64,
    pub gram: SquareMatrix,
    pub min_eigenvalue: f64,
}

/// Gram integral `∫_t^{t+T} ω ωᵀ dσ` by the composite trapezoid rule.
///
/// When `dt` does not divide `T` the step is shrunk to the next divisor so
/// the window is covered exactly.
pub fn excitation_report(
    spec: &RegressorSpec,
    start: f64,
    window: f64,
    dt: f64,
) -> Result<ExcitationReport> {
    if !(window > 0.0) || !(dt > 0.0) || dt > window / 10.0 {
        return Err(Error::config(format!(
            "excitation window needs T > 0 and 0 < dt <= T/10 (T={window}, dt={dt})"
        )));
    }
    let q = spec.dim();
    let steps = (window / dt).ceil() as usize;
    let h = window / steps as f64;
    let mut gram = SquareMatrix::zeros(q);
    for k in 0..=steps {
        let t = start + k as f64 * h;
        let w = spec.eval(t)?;
        let weight = if k == 0 || k == steps { 0.5 * h } else { h };
        for i in 0..q {
            for j in i..q {
                gram[(i, j)] += weight * w[i] * w[j];
            }
        }
    }
    for i in 0..q {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    let min_eigenvalue = gram.min_symmetric_eigenvalue();
    Ok(ExcitationReport {
        window_start: start,
        window_length: window,
        gram,
        min_eigenvalue,
    })
}

/// The map `t ↦ ρ(t, T)` sampled at `starts`.
pub fn excitation_profile(
    spec: &RegressorSpec,
    starts: &[f64],
    window: f64,
    dt: f64,
    execution: Execution,
) -> Result<Vec<(f64, f64)>> {
    exec::map(execution, starts, |&t| {
        excitation_report(spec, t, window, dt).map(|r| (t, r.min_eigenvalue))
    })
    .into_iter()
    .collect()
}
