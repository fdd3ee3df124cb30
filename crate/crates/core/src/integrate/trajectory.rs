use std::fmt::Write as _;

use thiserror::Error;

use super::dopri::{DenseSegment, Dopri5, IntegratorOptions, StepStats};
use super::OdeSystem;
use crate::error::IntegrateError;

/// Numerical solution with one sample per accepted step and a continuous
/// interpolant over the whole span.
#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    segments: Vec<DenseSegment<N>>,
    pub stats: StepStats,
}

impl<const N: usize> Trajectory<N> {
    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn tf(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn last_state(&self) -> [f64; N] {
        *self.states.last().expect("trajectory is never empty")
    }

    pub fn segments(&self) -> &[DenseSegment<N>] {
        &self.segments
    }

    /// Dense evaluation; `t` is clamped to `[t0, tf]`.
    pub fn eval(&self, t: f64) -> [f64; N] {
        if self.segments.is_empty() {
            return self.states[0];
        }
        let t = t.clamp(self.t0(), self.tf());
        let idx = self
            .segments
            .partition_point(|s| s.t1() < t)
            .min(self.segments.len() - 1);
        self.segments[idx].eval(t)
    }

    /// CSV with the given column names after `t`, 17 significant digits.
    pub fn to_csv(&self, columns: &[&str]) -> String {
        assert_eq!(columns.len(), N, "one column name per state component");
        let mut out = String::with_capacity(self.times.len() * (N + 1) * 25);
        out.push('t');
        for c in columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            let _ = write!(out, "{:.16e}", t);
            for v in x {
                let _ = write!(out, ",{:.16e}", v);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryParseError {
    #[error("empty input")]
    Empty,
    #[error("header must start with `t` and name {expected} columns")]
    BadHeader { expected: usize },
    #[error("line {line}: {msg}")]
    BadRow { line: usize, msg: String },
    #[error("line {line}: times must be strictly increasing")]
    NonMonotone { line: usize },
}

/// Column names and `(t, x)` rows.
pub type ParsedSamples<const N: usize> = (Vec<String>, Vec<(f64, [f64; N])>);

/// Samples `(t, x)` read back from [`Trajectory::to_csv`] output.
pub fn parse_samples<const N: usize>(text: &str) -> Result<ParsedSamples<N>, TrajectoryParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(TrajectoryParseError::Empty)?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() != N + 1 || cols[0] != "t" {
        return Err(TrajectoryParseError::BadHeader { expected: N });
    }
    let names = cols[1..].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (i, line) in lines {
        let mut fields = line.split(',');
        let mut vals = [0.0; N];
        let t = parse_field(fields.next(), i)?;
        for v in vals.iter_mut() {
            *v = parse_field(fields.next(), i)?;
        }
        if fields.next().is_some() {
            return Err(TrajectoryParseError::BadRow {
                line: i + 1,
                msg: "too many fields".into(),
            });
        }
        if !(t > last_t) {
            return Err(TrajectoryParseError::NonMonotone { line: i + 1 });
        }
        last_t = t;
        rows.push((t, vals));
    }
    Ok((names, rows))
}

fn parse_field(field: Option<&str>, line: usize) -> Result<f64, TrajectoryParseError> {
    let s = field.ok_or_else(|| TrajectoryParseError::BadRow {
        line: line + 1,
        msg: "missing field".into(),
    })?;
    let v: f64 = s.trim().parse().map_err(|e| TrajectoryParseError::BadRow {
        line: line + 1,
        msg: format!("{e}"),
    })?;
    if !v.is_finite() {
        return Err(TrajectoryParseError::BadRow {
            line: line + 1,
            msg: "non-finite value".into(),
        });
    }
    Ok(v)
}

/// Integrates `sys` from `x0` over `[t_span.0, t_span.1]`, recording every
/// accepted step.
pub fn integrate<S: OdeSystem<N>, const N: usize>(
    sys: &S,
    x0: [f64; N],
    t_span: (f64, f64),
    opts: IntegratorOptions,
) -> Result<Trajectory<N>, IntegrateError> {
    let (t0, tf) = t_span;
    if !(tf > t0) {
        return Err(IntegrateError::InvalidInput(format!(
            "empty time span [{t0}, {tf}]"
        )));
    }
    let mut stepper = Dopri5::new(sys, t0, x0, opts)?;
    let mut times = vec![t0];
    let mut states = vec![x0];
    let mut segments = Vec::new();
    stepper.run(tf, |seg| {
        times.push(seg.t1());
        states.push(seg.eval_theta(1.0));
        segments.push(*seg);
        true
    })?;
    // eval_theta(1) reproduces the step end exactly up to rounding; use the
    // stepper's own value for the final sample.
    *states.last_mut().unwrap() = *stepper.state();
    Ok(Trajectory {
        times,
        states,
        segments,
        stats: stepper.stats(),
    })
}

/// End state only, without storing the path.
pub fn integrate_endpoint<S: OdeSystem<N>, const N: usize>(
    sys: &S,
    x0: [f64; N],
    t_span: (f64, f64),
    opts: IntegratorOptions,
) -> Result<[f64; N], IntegrateError> {
    let (t0, tf) = t_span;
    if tf == t0 {
        return Ok(x0);
    }
    if !(tf > t0) {
        return Err(IntegrateError::InvalidInput(format!(
            "empty time span [{t0}, {tf}]"
        )));
    }
    let mut stepper = Dopri5::new(sys, t0, x0, opts)?;
    stepper.run(tf, |_| true)?;
    Ok(*stepper.state())
}
