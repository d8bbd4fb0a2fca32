//! Evaluable scalar fields on R^N: compactly supported model functions
//! (torsion profile, power bumps, indicators, smooth bumps, linear
//! combinations) plus sampled 1D data, with the support and smoothness
//! metadata the operators downstream rely on.

use crate::error::{Error, Result};
use crate::special::{frac_constants, FracParams};
use serde::Serialize;
use std::io::BufRead;

/// What pointwise-operator evaluation may assume about a field.
///
/// Ordering matters: a linear combination carries the weakest member tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Smoothness {
    C0,
    C2Interior,
    Analytic,
}

/// A ball in R^N.
#[derive(Debug, Clone, PartialEq)]
pub struct BallSpec {
    center: Vec<f64>,
    radius: f64,
}

impl BallSpec {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidParams("ball center must be non-empty".into()));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParams(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams("ball center must be finite".into()));
        }
        Ok(BallSpec { center, radius })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    fn dist2_to_center(&self, x: &[f64]) -> f64 {
        self.center
            .iter()
            .zip(x)
            .map(|(c, v)| (v - c) * (v - c))
            .sum()
    }

    fn center_norm(&self) -> f64 {
        self.center.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Samples of a 1D function, linearly interpolated, zero outside the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField1D {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl SampledField1D {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::InvalidParams(format!(
                "nodes and values lengths differ: {} vs {}",
                nodes.len(),
                values.len()
            )));
        }
        if nodes.len() < 2 {
            return Err(Error::InvalidParams(
                "a sampled field needs at least two nodes".into(),
            ));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParams(
                "nodes must be strictly increasing".into(),
            ));
        }
        if nodes.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(
                "nodes and values must be finite".into(),
            ));
        }
        Ok(SampledField1D { nodes, values })
    }

    /// Parses the two-column `x,value` format with a mandatory header row.
    pub fn from_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        let mut saw_header = false;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::Csv {
                line: line_no,
                msg: e.to_string(),
            })?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if !saw_header {
                saw_header = true;
                continue;
            }
            let mut parts = trimmed.split(',');
            let x = parts.next().unwrap_or("").trim();
            let v = parts.next().ok_or(Error::Csv {
                line: line_no,
                msg: "expected two comma-separated columns".into(),
            })?;
            if parts.next().is_some() {
                return Err(Error::Csv {
                    line: line_no,
                    msg: "expected exactly two columns".into(),
                });
            }
            let x: f64 = x.parse().map_err(|_| Error::Csv {
                line: line_no,
                msg: format!("cannot parse x value {x:?}"),
            })?;
            let v: f64 = v.trim().parse().map_err(|_| Error::Csv {
                line: line_no,
                msg: format!("cannot parse value {:?}", v.trim()),
            })?;
            if let Some(&last) = nodes.last() {
                if x <= last {
                    return Err(Error::Csv {
                        line: line_no,
                        msg: format!("nodes must be ascending: {x} after {last}"),
                    });
                }
            }
            nodes.push(x);
            values.push(v);
        }
        if !saw_header {
            return Err(Error::Csv {
                line: 1,
                msg: "missing header row".into(),
            });
        }
        SampledField1D::new(nodes, values)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if x < self.nodes[0] || x > self.nodes[n - 1] {
            return 0.0;
        }
        match self.nodes.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => self.values[i],
            Err(i) => {
                let (x0, x1) = (self.nodes[i - 1], self.nodes[i]);
                let t = (x - x0) / (x1 - x0);
                self.values[i - 1] * (1.0 - t) + self.values[i] * t
            }
        }
    }
}

#[derive(Debug, Clone)]
enum FieldKind {
    Zero,
    Torsion { ball: BallSpec, s: f64, gamma: f64 },
    Power { ball: BallSpec, p: f64 },
    Box1D { a: f64, b: f64 },
    Bump { ball: BallSpec },
    LinComb { terms: Vec<(f64, FunctionField)> },
    Sampled { data: SampledField1D },
    PositivePart(Box<FunctionField>),
    NegativePart(Box<FunctionField>),
}

/// An immutable evaluable scalar field on R^N.
///
/// Evaluation is pure and deterministic; cloning is cheap enough for the
/// desk-scale fields the toolkit works with.
#[derive(Debug, Clone)]
pub struct FunctionField {
    dimension: usize,
    support_radius: Option<f64>,
    smoothness: Smoothness,
    kind: FieldKind,
    spec_string: String,
}

fn fmt_reals(xs: &[f64]) -> String {
    xs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl FunctionField {
    /// The identically-zero field.
    pub fn zero(dimension: usize) -> Self {
        FunctionField {
            dimension,
            support_radius: Some(0.0),
            smoothness: Smoothness::Analytic,
            kind: FieldKind::Zero,
            spec_string: "zero()".into(),
        }
    }

    /// The torsion profile `gamma_{N,s} (r^2 - |x - c|^2)_+^s` on the ball.
    pub fn torsion(ball: BallSpec, s: f64) -> Result<Self> {
        let params = FracParams::new(ball.dimension(), s)?;
        let gamma = frac_constants(&params).gamma_ns;
        let spec_string = format!("torsion(center={};r={})", fmt_reals(ball.center()), ball.radius());
        Ok(FunctionField {
            dimension: ball.dimension(),
            support_radius: Some(ball.center_norm() + ball.radius()),
            smoothness: Smoothness::C2Interior,
            kind: FieldKind::Torsion { ball, s, gamma },
            spec_string,
        })
    }

    /// The unnormalized profile `(r^2 - |x - c|^2)_+^p`.
    pub fn power(ball: BallSpec, p: f64) -> Result<Self> {
        if !(p > 0.0) {
            return Err(Error::InvalidParams(format!(
                "power exponent must be positive, got {p}"
            )));
        }
        let spec_string = format!(
            "power(center={};r={};p={})",
            fmt_reals(ball.center()),
            ball.radius(),
            p
        );
        Ok(FunctionField {
            dimension: ball.dimension(),
            support_radius: Some(ball.center_norm() + ball.radius()),
            smoothness: Smoothness::C2Interior,
            kind: FieldKind::Power { ball, p },
            spec_string,
        })
    }

    /// Indicator of the interval [a, b] (one-dimensional).
    pub fn box1d(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidParams(format!(
                "box needs a < b, got a={a} b={b}"
            )));
        }
        Ok(FunctionField {
            dimension: 1,
            support_radius: Some(a.abs().max(b.abs())),
            smoothness: Smoothness::C0,
            kind: FieldKind::Box1D { a, b },
            spec_string: format!("box(a={a};b={b})"),
        })
    }

    /// Smooth compactly supported bump on the ball, scaled so the value is
    /// >= 1 on the concentric half-radius ball (exactly 1 on its boundary).
    pub fn bump(ball: BallSpec) -> Self {
        let spec_string = format!("bump(center={};r={})", fmt_reals(ball.center()), ball.radius());
        FunctionField {
            dimension: ball.dimension(),
            support_radius: Some(ball.center_norm() + ball.radius()),
            smoothness: Smoothness::C2Interior,
            kind: FieldKind::Bump { ball },
            spec_string,
        }
    }

    /// Linear combination; dimension of all members must agree.
    pub fn lincomb(terms: Vec<(f64, FunctionField)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParams("lincomb needs at least one term".into()));
        }
        let dimension = terms[0].1.dimension;
        for (_, f) in &terms {
            if f.dimension != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    got: f.dimension,
                });
            }
        }
        let support_radius = terms
            .iter()
            .map(|(_, f)| f.support_radius)
            .try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r)));
        let smoothness = terms
            .iter()
            .map(|(_, f)| f.smoothness)
            .min()
            .unwrap_or(Smoothness::Analytic);
        let spec_string = format!(
            "lincomb({})",
            terms
                .iter()
                .map(|(c, f)| format!("{}*{}", c, f.spec_string))
                .collect::<Vec<_>>()
                .join("+")
        );
        Ok(FunctionField {
            dimension,
            support_radius,
            smoothness,
            kind: FieldKind::LinComb { terms },
            spec_string,
        })
    }

    /// Linearly interpolated 1D samples, zero outside the node range.
    ///
    /// Tagged `C0`: pointwise fractional-Laplacian evaluation refuses such
    /// fields, kernel integrals and extension evaluation accept them.
    pub fn sampled(data: SampledField1D) -> Self {
        let lo = data.nodes[0];
        let hi = data.nodes[data.nodes.len() - 1];
        FunctionField {
            dimension: 1,
            support_radius: Some(lo.abs().max(hi.abs())),
            smoothness: Smoothness::C0,
            kind: FieldKind::Sampled { data },
            spec_string: "sampled(...)".into(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    /// Radius of a ball around the origin outside which the field vanishes.
    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    /// Canonical field-spec string for reports.
    pub fn spec_string(&self) -> &str {
        &self.spec_string
    }

    /// Checked evaluation.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        Ok(self.value(x))
    }

    /// Unchecked evaluation (dimension must match); the quadrature hot path.
    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dimension);
        match &self.kind {
            FieldKind::Zero => 0.0,
            FieldKind::Torsion { ball, s, gamma } => {
                let q = ball.radius * ball.radius - ball.dist2_to_center(x);
                if q > 0.0 {
                    gamma * q.powf(*s)
                } else {
                    0.0
                }
            }
            FieldKind::Power { ball, p } => {
                let q = ball.radius * ball.radius - ball.dist2_to_center(x);
                if q > 0.0 {
                    q.powf(*p)
                } else {
                    0.0
                }
            }
            FieldKind::Box1D { a, b } => {
                if x[0] >= *a && x[0] <= *b {
                    1.0
                } else {
                    0.0
                }
            }
            FieldKind::Bump { ball } => {
                let t2 = ball.dist2_to_center(x) / (ball.radius * ball.radius);
                if t2 < 1.0 {
                    (4.0 / 3.0 - 1.0 / (1.0 - t2)).exp()
                } else {
                    0.0
                }
            }
            FieldKind::LinComb { terms } => {
                terms.iter().map(|(c, f)| c * f.value(x)).sum()
            }
            FieldKind::Sampled { data } => data.eval(x[0]),
            FieldKind::PositivePart(f) => f.value(x).max(0.0),
            FieldKind::NegativePart(f) => (-f.value(x)).max(0.0),
        }
    }

    /// Convenience for one-dimensional fields.
    pub(crate) fn value1(&self, x: f64) -> f64 {
        self.value(std::slice::from_ref(&x))
    }

    /// Locations in R^1 where the field may fail to be twice differentiable
    /// (support endpoints, sampled nodes, box edges).
    pub(crate) fn kinks_1d(&self) -> Vec<f64> {
        let mut v = Vec::new();
        self.collect_kinks_1d(&mut v);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    fn collect_kinks_1d(&self, out: &mut Vec<f64>) {
        debug_assert_eq!(self.dimension, 1);
        match &self.kind {
            FieldKind::Zero => {}
            FieldKind::Torsion { ball, .. }
            | FieldKind::Power { ball, .. }
            | FieldKind::Bump { ball } => {
                out.push(ball.center[0] - ball.radius);
                out.push(ball.center[0] + ball.radius);
            }
            FieldKind::Box1D { a, b } => {
                out.push(*a);
                out.push(*b);
            }
            FieldKind::LinComb { terms } => {
                for (_, f) in terms {
                    f.collect_kinks_1d(out);
                }
            }
            FieldKind::Sampled { data } => out.extend_from_slice(&data.nodes),
            FieldKind::PositivePart(f) | FieldKind::NegativePart(f) => f.collect_kinks_1d(out),
        }
    }

    /// Radii around `x` at which the field may kink along some ray
    /// (distances to the support spheres of the members).
    pub(crate) fn kink_radii_from(&self, x: &[f64]) -> Vec<f64> {
        let mut v = Vec::new();
        self.collect_kink_radii(x, &mut v);
        v.retain(|r| *r > 0.0);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    fn collect_kink_radii(&self, x: &[f64], out: &mut Vec<f64>) {
        match &self.kind {
            FieldKind::Zero => {}
            FieldKind::Torsion { ball, .. }
            | FieldKind::Power { ball, .. }
            | FieldKind::Bump { ball } => {
                let d = ball.dist2_to_center(x).sqrt();
                out.push((d - ball.radius).abs());
                out.push(d + ball.radius);
            }
            FieldKind::Box1D { a, b } => {
                out.push((x[0] - a).abs());
                out.push((x[0] - b).abs());
            }
            FieldKind::LinComb { terms } => {
                for (_, f) in terms {
                    f.collect_kink_radii(x, out);
                }
            }
            FieldKind::Sampled { data } => {
                for n in &data.nodes {
                    out.push((x[0] - n).abs());
                }
            }
            FieldKind::PositivePart(f) | FieldKind::NegativePart(f) => {
                f.collect_kink_radii(x, out)
            }
        }
    }

    /// Distance from `x` beyond which the field is identically zero, when the
    /// support is bounded.
    pub(crate) fn vanishing_radius_from(&self, x: &[f64]) -> Option<f64> {
        let s = self.support_radius?;
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        Some(norm + s)
    }

    /// The support ball for single-ball builders (torsion, power, bump) and
    /// interval builders; `None` for combinations and the zero field.
    pub fn support_ball(&self) -> Option<BallSpec> {
        match &self.kind {
            FieldKind::Torsion { ball, .. }
            | FieldKind::Power { ball, .. }
            | FieldKind::Bump { ball } => Some(ball.clone()),
            FieldKind::Box1D { a, b } => {
                BallSpec::new(vec![0.5 * (a + b)], 0.5 * (b - a)).ok()
            }
            FieldKind::Sampled { data } => {
                let lo = data.nodes[0];
                let hi = data.nodes[data.nodes.len() - 1];
                BallSpec::new(vec![0.5 * (lo + hi)], 0.5 * (hi - lo)).ok()
            }
            _ => None,
        }
    }
}

/// Pointwise positive and negative parts `(max(f, 0), max(-f, 0))`.
pub fn split_signs(f: &FunctionField) -> (FunctionField, FunctionField) {
    let pos = FunctionField {
        dimension: f.dimension,
        support_radius: f.support_radius,
        smoothness: Smoothness::C0,
        kind: FieldKind::PositivePart(Box::new(f.clone())),
        spec_string: format!("pos({})", f.spec_string),
    };
    let neg = FunctionField {
        dimension: f.dimension,
        support_radius: f.support_radius,
        smoothness: Smoothness::C0,
        kind: FieldKind::NegativePart(Box::new(f.clone())),
        spec_string: format!("neg({})", f.spec_string),
    };
    (pos, neg)
}

/// A deterministic set of probe points covering a field's support.
#[derive(Debug, Clone)]
pub struct ProbePlan {
    points: Vec<Vec<f64>>,
}

impl ProbePlan {
    pub fn from_points(points: Vec<Vec<f64>>) -> Self {
        ProbePlan { points }
    }

    /// Uniform lattice over the support box, plus the 1D kink locations and
    /// their midpoints so plateaus between kinks are always sampled.
    pub fn covering(field: &FunctionField, per_axis: usize) -> Self {
        let s = field.support_radius.unwrap_or(1.0).max(1e-9);
        let m = per_axis.max(2);
        let mut points = Vec::new();
        match field.dimension {
            1 => {
                for i in 0..m {
                    let x = -s + 2.0 * s * (i as f64) / ((m - 1) as f64);
                    points.push(vec![x]);
                }
                let kinks = field.kinks_1d();
                for w in kinks.windows(2) {
                    points.push(vec![0.5 * (w[0] + w[1])]);
                }
                for k in kinks {
                    points.push(vec![k]);
                }
            }
            2 => {
                for i in 0..m {
                    for j in 0..m {
                        let x = -s + 2.0 * s * (i as f64) / ((m - 1) as f64);
                        let y = -s + 2.0 * s * (j as f64) / ((m - 1) as f64);
                        points.push(vec![x, y]);
                    }
                }
            }
            d => {
                // Axis lines through the origin; enough for the radial fields
                // the toolkit builds in higher dimensions.
                for axis in 0..d {
                    for i in 0..m {
                        let mut p = vec![0.0; d];
                        p[axis] = -s + 2.0 * s * (i as f64) / ((m - 1) as f64);
                        points.push(p);
                    }
                }
            }
        }
        ProbePlan { points }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }
}

/// Largest value of the negative part over the probe points: a lower estimate
/// of the true sup norm of `f^-`.
pub fn sup_norm_negative_part(f: &FunctionField, probe: &ProbePlan) -> Result<f64> {
    if probe.points.is_empty() {
        return Err(Error::EmptyProbe);
    }
    let mut worst = 0.0f64;
    for p in &probe.points {
        let v = f.eval(p)?;
        if -v > worst {
            worst = -v;
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Field mini-grammar
//
//   torsion(center=<reals>;r=<real>)
//   power(center=<reals>;r=<real>;p=<real>)
//   box(a=<real>;b=<real>)
//   bump(center=<reals>;r=<real>)
//   lincomb(<real>*<spec>+<real>*<spec>+...)
//   csv(<path>)
//
// Whitespace is insignificant. `torsion` takes its exponent from the ambient
// (N, s) parameters at build time.
// ---------------------------------------------------------------------------

/// Parsed but not yet built field expression.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpecAst {
    Torsion { center: Vec<f64>, r: f64 },
    Power { center: Vec<f64>, r: f64, p: f64 },
    Box1D { a: f64, b: f64 },
    Bump { center: Vec<f64>, r: f64 },
    LinComb(Vec<(f64, FieldSpecAst)>),
    Csv(String),
    Zero,
}

pub fn parse_field_spec(input: &str) -> Result<FieldSpecAst> {
    let compact: String = input.chars().filter(|c| !c.is_whitespace()).collect();
    let ast = parse_expr(&compact)?;
    Ok(ast)
}

fn parse_expr(s: &str) -> Result<FieldSpecAst> {
    let open = s
        .find('(')
        .ok_or_else(|| Error::FieldSpec(format!("missing '(' in {s:?}")))?;
    if !s.ends_with(')') {
        return Err(Error::FieldSpec(format!("missing closing ')' in {s:?}")));
    }
    let head = &s[..open];
    let body = &s[open + 1..s.len() - 1];
    match head {
        "torsion" => {
            let kv = parse_kv(body, &["center", "r"])?;
            Ok(FieldSpecAst::Torsion {
                center: parse_reals(&kv[0])?,
                r: parse_real(&kv[1])?,
            })
        }
        "power" => {
            let kv = parse_kv(body, &["center", "r", "p"])?;
            Ok(FieldSpecAst::Power {
                center: parse_reals(&kv[0])?,
                r: parse_real(&kv[1])?,
                p: parse_real(&kv[2])?,
            })
        }
        "box" => {
            let kv = parse_kv(body, &["a", "b"])?;
            Ok(FieldSpecAst::Box1D {
                a: parse_real(&kv[0])?,
                b: parse_real(&kv[1])?,
            })
        }
        "bump" => {
            let kv = parse_kv(body, &["center", "r"])?;
            Ok(FieldSpecAst::Bump {
                center: parse_reals(&kv[0])?,
                r: parse_real(&kv[1])?,
            })
        }
        "lincomb" => {
            let mut terms = Vec::new();
            for part in split_top_level_plus(body) {
                let star = find_top_level_star(&part).ok_or_else(|| {
                    Error::FieldSpec(format!("lincomb term {part:?} is missing '*'"))
                })?;
                let coef = parse_real(&part[..star])?;
                let sub = parse_expr(&part[star + 1..])?;
                terms.push((coef, sub));
            }
            if terms.is_empty() {
                return Err(Error::FieldSpec("lincomb needs at least one term".into()));
            }
            Ok(FieldSpecAst::LinComb(terms))
        }
        "csv" => {
            if body.is_empty() {
                return Err(Error::FieldSpec("csv needs a path".into()));
            }
            Ok(FieldSpecAst::Csv(body.to_string()))
        }
        "zero" => Ok(FieldSpecAst::Zero),
        other => Err(Error::FieldSpec(format!("unknown builder {other:?}"))),
    }
}

fn parse_kv(body: &str, keys: &[&str]) -> Result<Vec<String>> {
    let parts: Vec<&str> = body.split(';').collect();
    if parts.len() != keys.len() {
        return Err(Error::FieldSpec(format!(
            "expected fields {keys:?}, got {body:?}"
        )));
    }
    let mut out = Vec::with_capacity(keys.len());
    for (part, key) in parts.iter().zip(keys) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::FieldSpec(format!("expected {key}=..., got {part:?}")))?;
        if k != *key {
            return Err(Error::FieldSpec(format!("expected key {key}, got {k:?}")));
        }
        out.push(v.to_string());
    }
    Ok(out)
}

fn parse_real(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::FieldSpec(format!("cannot parse real {s:?}")))
        .and_then(|v| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::FieldSpec(format!("non-finite real {s:?}")))
            }
        })
}

fn parse_reals(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_real).collect()
}

/// Splits on '+' at paren depth 0, treating a '+' right after 'e'/'E' as part
/// of a numeric exponent rather than a term separator.
fn split_top_level_plus(s: &str) -> Vec<String> {
    let bytes = s.as_bytes();
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, &c) in bytes.iter().enumerate() {
        match c {
            b'(' => depth += 1,
            b')' => depth = depth.saturating_sub(1),
            b'+' if depth == 0 && i > 0 => {
                let prev = bytes[i - 1];
                if prev != b'e' && prev != b'E' {
                    parts.push(s[start..i].to_string());
                    start = i + 1;
                }
            }
            _ => {}
        }
    }
    parts.push(s[start..].to_string());
    parts.retain(|p| !p.is_empty());
    parts
}

fn find_top_level_star(s: &str) -> Option<usize> {
    let mut depth = 0usize;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            '*' if depth == 0 => return Some(i),
            _ => {}
        }
    }
    None
}

/// Builds a field from a parsed spec; `params` supplies the torsion exponent
/// and the expected dimension.
pub fn build_field(ast: &FieldSpecAst, params: &FracParams) -> Result<FunctionField> {
    let f = build_inner(ast, params)?;
    if f.dimension() != params.dimension() {
        return Err(Error::DimensionMismatch {
            expected: params.dimension(),
            got: f.dimension(),
        });
    }
    Ok(f)
}

fn build_inner(ast: &FieldSpecAst, params: &FracParams) -> Result<FunctionField> {
    match ast {
        FieldSpecAst::Torsion { center, r } => {
            FunctionField::torsion(BallSpec::new(center.clone(), *r)?, params.s())
        }
        FieldSpecAst::Power { center, r, p } => {
            FunctionField::power(BallSpec::new(center.clone(), *r)?, *p)
        }
        FieldSpecAst::Box1D { a, b } => FunctionField::box1d(*a, *b),
        FieldSpecAst::Bump { center, r } => {
            Ok(FunctionField::bump(BallSpec::new(center.clone(), *r)?))
        }
        FieldSpecAst::LinComb(terms) => {
            let built: Result<Vec<(f64, FunctionField)>> = terms
                .iter()
                .map(|(c, sub)| build_inner(sub, params).map(|f| (*c, f)))
                .collect();
            FunctionField::lincomb(built?)
        }
        FieldSpecAst::Csv(path) => {
            let file = std::fs::File::open(path).map_err(|e| {
                Error::FieldSpec(format!("cannot open csv field file {path:?}: {e}"))
            })?;
            let data = SampledField1D::from_csv(std::io::BufReader::new(file))?;
            Ok(FunctionField::sampled(data))
        }
        FieldSpecAst::Zero => Ok(FunctionField::zero(params.dimension())),
    }
}

/// One-call convenience: parse then build.
pub fn make_field(spec: &str, params: &FracParams) -> Result<FunctionField> {
    build_field(&parse_field_spec(spec)?, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn ball1(c: f64, r: f64) -> BallSpec {
        BallSpec::new(vec![c], r).unwrap()
    }

    #[test]
    fn torsion_values() {
        let f = FunctionField::torsion(ball1(0.0, 1.0), 0.5).unwrap();
        assert!((f.eval(&[0.0]).unwrap() - 1.0).abs() < 1e-14);
        assert!((f.eval(&[0.6]).unwrap() - 0.8).abs() < 1e-14);
        assert_eq!(f.eval(&[1.5]).unwrap(), 0.0);
        assert_eq!(f.eval(&[-2.0]).unwrap(), 0.0);
    }

    #[test]
    fn torsion_matches_formula_across_params() {
        for n in [1usize, 2] {
            for s in [0.25, 0.5, 0.75] {
                let center = vec![0.3; n];
                let ball = BallSpec::new(center.clone(), 1.2).unwrap();
                let f = FunctionField::torsion(ball, s).unwrap();
                let params = FracParams::new(n, s).unwrap();
                let gamma = frac_constants(&params).gamma_ns;
                let x: Vec<f64> = center.iter().map(|c| c + 0.4).collect();
                let d2: f64 = x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
                let want = gamma * (1.2f64 * 1.2 - d2).powf(s);
                let got = f.eval(&x).unwrap();
                assert!(
                    (got - want).abs() <= 1e-14 * want.abs(),
                    "N={n} s={s}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn box_values() {
        let f = FunctionField::box1d(2.0, 3.0).unwrap();
        assert_eq!(f.eval(&[2.5]).unwrap(), 1.0);
        assert_eq!(f.eval(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn bump_at_least_one_on_half_ball() {
        let f = FunctionField::bump(ball1(0.0, 2.0));
        for i in 0..20 {
            let x = -1.0 + 2.0 * (i as f64) / 19.0; // half-radius ball is [-1, 1]
            assert!(f.eval(&[x]).unwrap() >= 1.0 - 1e-12, "bump({x}) < 1");
        }
        assert!((f.eval(&[1.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(f.eval(&[2.5]).unwrap(), 0.0);
    }

    #[test]
    fn lincomb_linearity_and_metadata() {
        let t = FunctionField::torsion(ball1(0.0, 1.0), 0.5).unwrap();
        let g = FunctionField::lincomb(vec![(2.0, t.clone()), (-1.0, t.clone())]).unwrap();
        for x in [-0.7, 0.0, 0.3, 0.9, 2.0] {
            let want = t.eval(&[x]).unwrap();
            assert!((g.eval(&[x]).unwrap() - want).abs() < 1e-14);
        }
        let b = FunctionField::box1d(2.0, 3.0).unwrap();
        let mix = FunctionField::lincomb(vec![(1.0, t), (1.0, b)]).unwrap();
        assert_eq!(mix.smoothness(), Smoothness::C0);
        assert!((mix.support_radius().unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn lincomb_dimension_mismatch() {
        let a = FunctionField::torsion(ball1(0.0, 1.0), 0.5).unwrap();
        let b = FunctionField::torsion(BallSpec::new(vec![0.0, 0.0], 1.0).unwrap(), 0.5).unwrap();
        assert!(FunctionField::lincomb(vec![(1.0, a), (1.0, b)]).is_err());
    }

    #[test]
    fn eval_outside_support_is_exactly_zero() {
        let mut rng = StdRng::seed_from_u64(7);
        let fields = vec![
            FunctionField::torsion(ball1(0.5, 1.0), 0.5).unwrap(),
            FunctionField::power(ball1(-0.2, 0.7), 1.5).unwrap(),
            FunctionField::box1d(2.0, 3.0).unwrap(),
            FunctionField::bump(ball1(1.0, 0.5)),
        ];
        for f in fields {
            let s = f.support_radius().unwrap();
            for _ in 0..10 {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let x = sign * (s + rng.gen_range(0.001..10.0));
                assert_eq!(f.eval(&[x]).unwrap(), 0.0, "{} at {x}", f.spec_string());
            }
        }
    }

    #[test]
    fn split_signs_identity_and_nonnegativity() {
        let t = FunctionField::torsion(ball1(0.0, 1.0), 0.5).unwrap();
        let b = FunctionField::box1d(0.2, 2.0).unwrap();
        let f = FunctionField::lincomb(vec![(1.0, t), (-0.5, b)]).unwrap();
        let (fp, fm) = split_signs(&f);
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..1000 {
            let x = rng.gen_range(-3.0..3.0);
            let v = f.eval(&[x]).unwrap();
            let p = fp.eval(&[x]).unwrap();
            let m = fm.eval(&[x]).unwrap();
            assert!(p >= 0.0 && m >= 0.0);
            assert!((p - m - v).abs() < 1e-14);
        }
    }

    #[test]
    fn sup_norm_negative_part_cases() {
        let t = FunctionField::torsion(ball1(0.0, 1.0), 0.5).unwrap();
        let probe = ProbePlan::covering(&t, 101);
        assert_eq!(sup_norm_negative_part(&t, &probe).unwrap(), 0.0);

        let b = FunctionField::box1d(2.0, 3.0).unwrap();
        let f = FunctionField::lincomb(vec![(1.0, t), (-0.1, b)]).unwrap();
        let probe = ProbePlan::covering(&f, 101);
        let v = sup_norm_negative_part(&f, &probe).unwrap();
        assert!((v - 0.1).abs() < 1e-12, "got {v}");

        let z = FunctionField::zero(1);
        let probe = ProbePlan::covering(&z, 11);
        assert_eq!(sup_norm_negative_part(&z, &probe).unwrap(), 0.0);

        assert!(matches!(
            sup_norm_negative_part(&z, &ProbePlan::from_points(vec![])),
            Err(Error::EmptyProbe)
        ));
    }

    #[test]
    fn eval_dimension_checked() {
        let f = FunctionField::torsion(ball1(0.0, 1.0), 0.5).unwrap();
        assert!(f.eval(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn sampled_interpolation_and_extension() {
        let d = SampledField1D::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 0.0]).unwrap();
        let f = FunctionField::sampled(d);
        assert_eq!(f.eval(&[0.5]).unwrap(), 1.0);
        assert_eq!(f.eval(&[1.0]).unwrap(), 2.0);
        assert_eq!(f.eval(&[-0.5]).unwrap(), 0.0);
        assert_eq!(f.eval(&[2.5]).unwrap(), 0.0);
        assert_eq!(f.smoothness(), Smoothness::C0);
    }

    #[test]
    fn csv_ingestion_ok_and_errors() {
        let ok = "x,value\n0.0,1.0\n1.0,2.0\n2.0,0.5\n";
        let d = SampledField1D::from_csv(ok.as_bytes()).unwrap();
        assert_eq!(d.nodes(), &[0.0, 1.0, 2.0]);

        let bad_order = "x,value\n0.0,1.0\n0.0,2.0\n";
        match SampledField1D::from_csv(bad_order.as_bytes()) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected csv error, got {other:?}"),
        }

        let bad_number = "x,value\n0.0,abc\n";
        match SampledField1D::from_csv(bad_number.as_bytes()) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected csv error, got {other:?}"),
        }
    }

    #[test]
    fn grammar_round_trip() {
        let params = FracParams::new(1, 0.5).unwrap();
        let f = make_field("torsion(center=0; r=1)", &params).unwrap();
        assert!((f.eval(&[0.0]).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(f.spec_string(), "torsion(center=0;r=1)");

        let g = make_field("lincomb(1*torsion(center=0;r=1)+-0.1*box(a=2;b=3))", &params).unwrap();
        assert!((g.eval(&[2.5]).unwrap() + 0.1).abs() < 1e-14);

        let p2 = FracParams::new(2, 0.5).unwrap();
        let h = make_field("power(center=0,0;r=1;p=1.5)", &p2).unwrap();
        assert_eq!(h.dimension(), 2);

        assert!(make_field("box(a=2;b=3)", &p2).is_err()); // dimension mismatch
        assert!(make_field("torsion(center=0)", &params).is_err());
        assert!(make_field("wedge(a=1)", &params).is_err());
    }

    #[test]
    fn grammar_exponent_plus_not_a_separator() {
        let params = FracParams::new(1, 0.5).unwrap();
        let f = make_field("lincomb(1e+0*box(a=2;b=3)+2e-1*box(a=4;b=5))", &params).unwrap();
        assert!((f.eval(&[4.5]).unwrap() - 0.2).abs() < 1e-15);
        assert!((f.eval(&[2.5]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kink_lists() {
        let t = FunctionField::torsion(ball1(0.0, 1.0), 0.5).unwrap();
        assert_eq!(t.kinks_1d(), vec![-1.0, 1.0]);
        let b = FunctionField::box1d(2.0, 3.0).unwrap();
        let f = FunctionField::lincomb(vec![(1.0, t), (1.0, b)]).unwrap();
        assert_eq!(f.kinks_1d(), vec![-1.0, 1.0, 2.0, 3.0]);
        let radii = f.kink_radii_from(&[0.5]);
        assert!(radii.contains(&0.5) && radii.contains(&1.5) && radii.contains(&2.5));
    }
}
