//! Closed-form expressions for fitted graphs.
//!
//! [`to_expression`] mirrors the forward pass node by node, so evaluating the
//! tree reproduces [`Graph::eval`] to rounding. [`render`] is where
//! simplification happens: affine chains are folded into linear
//! combinations and constants are rounded to the requested number of
//! significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{Sample, Value};
use crate::error::{Error, Result};
use crate::graph::{logistic, scale, Graph, InteractionKind, NodeId, NodeOp, Params, Task, REGISTER_CLIP, SINGULARITY_EPSILON};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnaryFn {
    Square,
    Tanh,
    Gaussian,
    Exp,
    Log,
    Inverse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Expression {
    Const {
        value: f64,
    },
    Var {
        name: String,
    },
    /// `name` mapped from its training `[min, max]` onto `[-1, 1]`.
    Scaled {
        name: String,
        min: f64,
        max: f64,
    },
    /// `weights[name] + bias`, or `bias` for a category without a weight.
    Lookup {
        name: String,
        weights: BTreeMap<String, f64>,
        bias: f64,
    },
    Affine {
        w: f64,
        b: f64,
        arg: Box<Expression>,
    },
    Add {
        lhs: Box<Expression>,
        rhs: Box<Expression>,
    },
    Mul {
        lhs: Box<Expression>,
        rhs: Box<Expression>,
    },
    Unary {
        func: UnaryFn,
        arg: Box<Expression>,
    },
    /// `exp(-(lhs² + rhs²))`.
    Gaussian2 {
        lhs: Box<Expression>,
        rhs: Box<Expression>,
    },
    /// Clip to `[lo, hi]`. `inactive` records that the clip never binds
    /// over the training range, in which case rendering omits it.
    Clamp {
        lo: f64,
        hi: f64,
        inactive: bool,
        arg: Box<Expression>,
    },
    Logistic {
        arg: Box<Expression>,
    },
}

/// Builds the expression computed by a fitted graph.
pub fn to_expression(graph: &Graph) -> Result<Expression> {
    if !graph.is_fitted() || !graph.is_initialized() {
        return Err(Error::Precondition("graph must be fitted before conversion to an expression".into()));
    }
    let out = graph.output().ok_or_else(|| Error::InvalidGraph("no output register".into()))?;
    let Params::Affine { w, b } = out.params else {
        return Err(Error::InvalidGraph("output register lacks affine parameters".into()));
    };
    let &[arg] = out.incoming.as_slice() else {
        return Err(Error::InvalidGraph("output register must have one incoming edge".into()));
    };
    graph.topo_order()?;
    let inner = node_expression(graph, arg)?;
    let affine = Expression::Affine { w, b, arg: Box::new(inner) };
    Ok(match graph.task {
        Task::Classifier => Expression::Logistic { arg: Box::new(affine) },
        Task::Regressor => affine,
    })
}

fn node_expression(graph: &Graph, id: NodeId) -> Result<Expression> {
    let node = graph
        .node(id)
        .ok_or_else(|| Error::InvalidGraph(format!("edge to unknown node {id}")))?;
    let arg = |i: usize| -> Result<Box<Expression>> {
        let src = *node
            .incoming
            .get(i)
            .ok_or_else(|| Error::InvalidGraph(format!("node {id} is missing an input")))?;
        Ok(Box::new(node_expression(graph, src)?))
    };
    Ok(match (&node.op, &node.params) {
        (NodeOp::InputRegister { feature, .. }, Params::Scaling { min, max, w, b }) => {
            let lo = scale(*min, *min, *max) * w + b;
            let hi = scale(*max, *min, *max) * w + b;
            Expression::Clamp {
                lo: -REGISTER_CLIP,
                hi: REGISTER_CLIP,
                inactive: lo.abs() <= REGISTER_CLIP && hi.abs() <= REGISTER_CLIP,
                arg: Box::new(Expression::Affine {
                    w: *w,
                    b: *b,
                    arg: Box::new(Expression::Scaled { name: feature.clone(), min: *min, max: *max }),
                }),
            }
        }
        (NodeOp::InputRegister { feature, .. }, Params::Categorical { weights, bias }) => Expression::Lookup {
            name: feature.clone(),
            weights: weights.clone(),
            bias: *bias,
        },
        (NodeOp::Interaction { kind, .. }, params) => {
            let unary = |func| -> Result<Expression> { Ok(Expression::Unary { func, arg: arg(0)? }) };
            match kind {
                InteractionKind::Add => Expression::Add { lhs: arg(0)?, rhs: arg(1)? },
                InteractionKind::Multiply => Expression::Mul { lhs: arg(0)?, rhs: arg(1)? },
                InteractionKind::Gaussian2 => Expression::Gaussian2 { lhs: arg(0)?, rhs: arg(1)? },
                InteractionKind::Linear => {
                    let Params::Affine { w, b } = params else {
                        return Err(Error::InvalidGraph(format!("linear node {id} lacks parameters")));
                    };
                    Expression::Affine { w: *w, b: *b, arg: arg(0)? }
                }
                InteractionKind::Squared => unary(UnaryFn::Square)?,
                InteractionKind::Tanh => unary(UnaryFn::Tanh)?,
                InteractionKind::Gaussian1 => unary(UnaryFn::Gaussian)?,
                InteractionKind::Exp => unary(UnaryFn::Exp)?,
                InteractionKind::Log => unary(UnaryFn::Log)?,
                InteractionKind::Inverse => unary(UnaryFn::Inverse)?,
            }
        }
        _ => return Err(Error::InvalidGraph(format!("node {id} cannot appear inside an expression"))),
    })
}

/// Evaluates `expr` at full precision on one sample.
pub fn eval_expression(expr: &Expression, sample: &Sample) -> Result<f64> {
    let numeric = |name: &str| -> Result<f64> {
        match sample.get(name) {
            Some(Value::Num(x)) => Ok(*x),
            Some(Value::Cat(s)) => Err(Error::Type(format!("variable `{name}` given non-numeric value `{s}`"))),
            Some(Value::Missing) | None => Err(Error::MissingFeature(name.to_string())),
        }
    };
    let v = match expr {
        Expression::Const { value } => *value,
        Expression::Var { name } => numeric(name)?,
        Expression::Scaled { name, min, max } => scale(numeric(name)?, *min, *max),
        Expression::Lookup { name, weights, bias } => {
            let key = match sample.get(name) {
                Some(Value::Cat(s)) => s.clone(),
                Some(Value::Num(x)) => x.to_string(),
                Some(Value::Missing) | None => return Err(Error::MissingFeature(name.clone())),
            };
            match weights.get(&key) {
                Some(wc) => wc + bias,
                None => *bias,
            }
        }
        Expression::Affine { w, b, arg } => eval_expression(arg, sample)? * w + b,
        Expression::Add { lhs, rhs } => eval_expression(lhs, sample)? + eval_expression(rhs, sample)?,
        Expression::Mul { lhs, rhs } => eval_expression(lhs, sample)? * eval_expression(rhs, sample)?,
        Expression::Gaussian2 { lhs, rhs } => {
            let (a, b) = (eval_expression(lhs, sample)?, eval_expression(rhs, sample)?);
            (-(a * a + b * b)).exp()
        }
        Expression::Unary { func, arg } => {
            let a = eval_expression(arg, sample)?;
            match func {
                UnaryFn::Square => a * a,
                UnaryFn::Tanh => a.tanh(),
                UnaryFn::Gaussian => (-(a * a)).exp(),
                UnaryFn::Exp => a.exp(),
                UnaryFn::Log if a <= SINGULARITY_EPSILON => {
                    return Err(Error::Precondition(format!("log of {a}")));
                }
                UnaryFn::Log => a.ln(),
                UnaryFn::Inverse if a.abs() <= SINGULARITY_EPSILON => {
                    return Err(Error::Precondition(format!("inverse of {a}")));
                }
                UnaryFn::Inverse => 1.0 / a,
            }
        }
        Expression::Clamp { lo, hi, arg, .. } => eval_expression(arg, sample)?.clamp(*lo, *hi),
        Expression::Logistic { arg } => logistic(eval_expression(arg, sample)?),
    };
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Latex,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Format::Text),
            "latex" => Ok(Format::Latex),
            _ => Err(Error::InvalidInput(format!("unknown format `{s}`"))),
        }
    }
}

/// Renders `expr` with every constant rounded to `signif` significant
/// digits. Categorical lookups appear as `cat_<feature>(<feature>)` with
/// their tables listed on the lines after the equation.
pub fn render(expr: &Expression, signif: usize, format: Format) -> String {
    let signif = signif.max(1);
    let mut r = Renderer { signif, format, tables: Vec::new() };
    let lin = linearize(expr);
    let mut out = r.lin(&lin);
    for (name, weights, bias) in std::mem::take(&mut r.tables) {
        out.push('\n');
        out.push_str(&r.table(&name, &weights, bias));
    }
    out
}

/// Rounds `x` to `signif` significant digits.
pub fn round_signif(x: f64, signif: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", signif.max(1) - 1, x).parse().unwrap_or(x)
}

/// A sum of scaled non-affine atoms plus a constant.
#[derive(Clone, Debug, PartialEq)]
struct Lin {
    terms: Vec<(f64, Atom)>,
    constant: f64,
}

#[derive(Clone, Debug, PartialEq)]
enum Atom {
    Var(String),
    Lookup(String, BTreeMap<String, f64>, f64),
    Mul(Lin, Lin),
    Unary(UnaryFn, Lin),
    Gaussian2(Lin, Lin),
    Clip(f64, f64, Lin),
    Logistic(Lin),
}

impl Lin {
    fn constant(c: f64) -> Lin {
        Lin { terms: Vec::new(), constant: c }
    }

    fn atom(a: Atom) -> Lin {
        Lin { terms: vec![(1.0, a)], constant: 0.0 }
    }

    fn affine(mut self, w: f64, b: f64) -> Lin {
        for t in &mut self.terms {
            t.0 *= w;
        }
        self.constant = self.constant * w + b;
        self
    }

    fn plus(mut self, other: Lin) -> Lin {
        for (c, a) in other.terms {
            match self.terms.iter_mut().find(|(_, x)| *x == a) {
                Some(t) => t.0 += c,
                None => self.terms.push((c, a)),
            }
        }
        self.constant += other.constant;
        self
    }
}

fn linearize(expr: &Expression) -> Lin {
    match expr {
        Expression::Const { value } => Lin::constant(*value),
        Expression::Var { name } => Lin::atom(Atom::Var(name.clone())),
        Expression::Scaled { name, min, max } => {
            if max > min {
                let a = 2.0 / (max - min);
                Lin::atom(Atom::Var(name.clone())).affine(a, -min * a - 1.0)
            } else {
                Lin::constant(0.0)
            }
        }
        Expression::Lookup { name, weights, bias } => Lin::atom(Atom::Lookup(name.clone(), weights.clone(), *bias)),
        Expression::Affine { w, b, arg } => linearize(arg).affine(*w, *b),
        Expression::Add { lhs, rhs } => linearize(lhs).plus(linearize(rhs)),
        Expression::Mul { lhs, rhs } => Lin::atom(Atom::Mul(linearize(lhs), linearize(rhs))),
        Expression::Unary { func, arg } => Lin::atom(Atom::Unary(*func, linearize(arg))),
        Expression::Gaussian2 { lhs, rhs } => Lin::atom(Atom::Gaussian2(linearize(lhs), linearize(rhs))),
        Expression::Clamp { inactive: true, arg, .. } => linearize(arg),
        Expression::Clamp { lo, hi, arg, .. } => Lin::atom(Atom::Clip(*lo, *hi, linearize(arg))),
        Expression::Logistic { arg } => Lin::atom(Atom::Logistic(linearize(arg))),
    }
}

fn identifier(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

struct Renderer {
    signif: usize,
    format: Format,
    tables: Vec<(String, BTreeMap<String, f64>, f64)>,
}

impl Renderer {
    fn number(&self, x: f64) -> String {
        let r = round_signif(x, self.signif);
        let a = r.abs();
        if a != 0.0 && !(1e-4..1e6).contains(&a) {
            let s = format!("{:.*e}", self.signif - 1, r);
            let (mant, exp) = s.split_once('e').expect("scientific notation has an exponent");
            let mant = if mant.contains('.') {
                mant.trim_end_matches('0').trim_end_matches('.')
            } else {
                mant
            };
            match self.format {
                Format::Text => format!("{mant}e{exp}"),
                Format::Latex => format!("{mant} \\cdot 10^{{{exp}}}"),
            }
        } else {
            format!("{r}")
        }
    }

    fn var(&self, name: &str) -> String {
        match self.format {
            Format::Text => identifier(name),
            Format::Latex => format!("\\mathrm{{{}}}", identifier(name).replace('_', "\\_")),
        }
    }

    fn call(&self, name: &str, arg: &str) -> String {
        match self.format {
            Format::Text => format!("{name}({arg})"),
            Format::Latex => format!("\\operatorname{{{name}}}\\left({arg}\\right)"),
        }
    }

    fn paren(&self, s: &str) -> String {
        match self.format {
            Format::Text => format!("({s})"),
            Format::Latex => format!("\\left({s}\\right)"),
        }
    }

    fn times(&self) -> &'static str {
        match self.format {
            Format::Text => "*",
            Format::Latex => " \\cdot ",
        }
    }

    /// A factor in a product or power: bare when it is a single atom.
    fn factor(&mut self, lin: &Lin) -> String {
        let kept = self.kept_terms(lin);
        let constant = round_signif(lin.constant, self.signif);
        if constant == 0.0 && kept.len() == 1 && round_signif(kept[0].0, self.signif) == 1.0 {
            let atom = kept[0].1.clone();
            self.atom(&atom)
        } else {
            let s = self.lin(lin);
            if kept.is_empty() && constant >= 0.0 {
                s
            } else {
                self.paren(&s)
            }
        }
    }

    fn kept_terms(&self, lin: &Lin) -> Vec<(f64, Atom)> {
        lin.terms
            .iter()
            .filter(|(c, _)| round_signif(*c, self.signif) != 0.0)
            .cloned()
            .collect()
    }

    fn lin(&mut self, lin: &Lin) -> String {
        let mut out = String::new();
        for (c, atom) in self.kept_terms(lin) {
            let c = round_signif(c, self.signif);
            let body = self.atom(&atom);
            let mag = c.abs();
            let term = if mag == 1.0 { body } else { format!("{}{}{}", self.number(mag), self.times(), body) };
            if out.is_empty() {
                if c < 0.0 {
                    out.push('-');
                }
                out.push_str(&term);
            } else {
                let _ = write!(out, " {} {term}", if c < 0.0 { '-' } else { '+' });
            }
        }
        let k = round_signif(lin.constant, self.signif);
        if out.is_empty() {
            return self.number(k);
        }
        if k != 0.0 {
            let _ = write!(out, " {} {}", if k < 0.0 { '-' } else { '+' }, self.number(k.abs()));
        }
        out
    }

    fn atom(&mut self, atom: &Atom) -> String {
        match atom {
            Atom::Var(name) => self.var(name),
            Atom::Lookup(name, weights, bias) => {
                if !self.tables.iter().any(|(n, _, _)| n == name) {
                    self.tables.push((name.clone(), weights.clone(), *bias));
                }
                let f = format!("cat_{}", identifier(name));
                let v = self.var(name);
                match self.format {
                    Format::Text => format!("{f}({v})"),
                    Format::Latex => format!("\\mathrm{{{}}}\\left({v}\\right)", f.replace('_', "\\_")),
                }
            }
            Atom::Mul(a, b) => {
                let (a, b) = (self.factor(a), self.factor(b));
                format!("{a}{}{b}", self.times())
            }
            Atom::Unary(func, a) => match func {
                UnaryFn::Square => {
                    let f = self.factor(a);
                    format!("{f}^2")
                }
                UnaryFn::Tanh => {
                    let s = self.lin(a);
                    self.call("tanh", &s)
                }
                UnaryFn::Exp => {
                    let s = self.lin(a);
                    self.call("exp", &s)
                }
                UnaryFn::Log => {
                    let s = self.lin(a);
                    self.call("log", &s)
                }
                UnaryFn::Gaussian => {
                    let f = self.factor(a);
                    self.call("exp", &format!("-{f}^2"))
                }
                UnaryFn::Inverse => {
                    let s = self.lin(a);
                    match self.format {
                        Format::Text => format!("1/({s})"),
                        Format::Latex => format!("\\frac{{1}}{{{s}}}"),
                    }
                }
            },
            Atom::Gaussian2(a, b) => {
                let (a, b) = (self.factor(a), self.factor(b));
                self.call("exp", &format!("-{a}^2 - {b}^2"))
            }
            Atom::Clip(lo, hi, a) => {
                let s = self.lin(a);
                let (lo, hi) = (self.number(*lo), self.number(*hi));
                self.call("clip", &format!("{s}, {lo}, {hi}"))
            }
            Atom::Logistic(a) => {
                let s = self.lin(a);
                self.call("logistic", &s)
            }
        }
    }

    fn table(&self, name: &str, weights: &BTreeMap<String, f64>, bias: f64) -> String {
        let entries: Vec<String> = weights
            .iter()
            .map(|(c, w)| format!("{c}: {}", self.number(w + bias)))
            .collect();
        let f = format!("cat_{}", identifier(name));
        match self.format {
            Format::Text => format!("{f} = {{{}}}, otherwise {}", entries.join(", "), self.number(bias)),
            Format::Latex => format!(
                "\\mathrm{{{}}} = \\{{{}\\}}, \\text{{otherwise }} {}",
                f.replace('_', "\\_"),
                entries.join(", "),
                self.number(bias)
            ),
        }
    }
}
