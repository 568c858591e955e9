//! Graphs compiled into a flat, index-addressed program for repeated
//! forward and reverse passes.

use std::collections::HashMap;

use super::{
    apply_interaction, interaction_partials, logistic, scale, Graph, InteractionKind, NodeId, NodeOp, ParamId,
    Params, SemanticType, Task, REGISTER_CLIP,
};
use crate::data::{Column, Dataset, Sample, Value};
use crate::error::{Error, Result};

/// A register input already mapped to what its step consumes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum RegisterBinding {
    /// Raw numerical value after the frozen `[-1, 1]` scaling.
    Scaled(f64),
    /// Parameter index of the category weight, `None` if unseen.
    Category(Option<usize>),
}

#[derive(Clone, Debug)]
pub(crate) enum Step {
    Numeric {
        slot: usize,
        w: usize,
        b: usize,
    },
    Categorical {
        slot: usize,
        bias: usize,
    },
    Interaction {
        node: NodeId,
        kind: InteractionKind,
        args: [usize; 2],
        param: usize,
    },
}

#[derive(Clone, Debug)]
struct RegisterInfo {
    feature: String,
    stype: SemanticType,
    min: f64,
    max: f64,
    categories: HashMap<String, usize>,
}

#[derive(Clone, Debug)]
pub(crate) struct Program {
    pub task: Task,
    pub steps: Vec<Step>,
    pub params: Vec<f64>,
    pub param_ids: Vec<ParamId>,
    registers: Vec<RegisterInfo>,
    output_node: NodeId,
    out_arg: usize,
    out_w: usize,
    out_b: usize,
}

/// Rows of a dataset bound to a program's registers.
#[derive(Clone, Debug)]
pub(crate) struct Batch {
    pub width: usize,
    pub inputs: Vec<RegisterBinding>,
    pub targets: Vec<f64>,
    /// Original dataset row of each bound row.
    pub rows: Vec<usize>,
    pub dropped: usize,
    pub unseen: usize,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[RegisterBinding] {
        &self.inputs[i * self.width..(i + 1) * self.width]
    }
}

impl Program {
    pub fn compile(graph: &Graph) -> Result<Program> {
        if !graph.is_initialized() {
            return Err(Error::Uninitialized);
        }
        let order = graph.topo_order()?;
        let mut step_of: HashMap<NodeId, usize> = HashMap::new();
        let mut steps = Vec::new();
        let mut params = Vec::new();
        let mut param_ids = Vec::new();
        let mut registers = Vec::new();
        let mut output = None;

        let push_param = |params: &mut Vec<f64>, ids: &mut Vec<ParamId>, id: ParamId, v: f64| {
            params.push(v);
            ids.push(id);
            params.len() - 1
        };

        for id in order {
            let node = graph.node(id).expect("ordered id exists");
            let arg = |k: usize| -> Result<usize> {
                let src = node
                    .incoming
                    .get(k)
                    .ok_or_else(|| Error::InvalidGraph(format!("node {id} is missing input {k}")))?;
                step_of
                    .get(src)
                    .copied()
                    .ok_or_else(|| Error::InvalidGraph(format!("node {id} reads from non-value node {src}")))
            };
            match (&node.op, &node.params) {
                (NodeOp::InputRegister { feature, stype }, Params::Scaling { min, max, w, b }) => {
                    let w = push_param(&mut params, &mut param_ids, ParamId { node: id, slot: super::ParamSlot::Weight }, *w);
                    let b = push_param(&mut params, &mut param_ids, ParamId { node: id, slot: super::ParamSlot::Bias }, *b);
                    registers.push(RegisterInfo {
                        feature: feature.clone(),
                        stype: *stype,
                        min: *min,
                        max: *max,
                        categories: HashMap::new(),
                    });
                    step_of.insert(id, steps.len());
                    steps.push(Step::Numeric { slot: registers.len() - 1, w, b });
                }
                (NodeOp::InputRegister { feature, stype }, Params::Categorical { weights, bias }) => {
                    let mut categories = HashMap::new();
                    for (c, w) in weights {
                        let idx = push_param(
                            &mut params,
                            &mut param_ids,
                            ParamId { node: id, slot: super::ParamSlot::Category(c.clone()) },
                            *w,
                        );
                        categories.insert(c.clone(), idx);
                    }
                    let bias = push_param(&mut params, &mut param_ids, ParamId { node: id, slot: super::ParamSlot::Bias }, *bias);
                    registers.push(RegisterInfo {
                        feature: feature.clone(),
                        stype: *stype,
                        min: 0.0,
                        max: 0.0,
                        categories,
                    });
                    step_of.insert(id, steps.len());
                    steps.push(Step::Categorical { slot: registers.len() - 1, bias });
                }
                (NodeOp::Interaction { kind, .. }, p) => {
                    if node.incoming.len() != kind.arity() {
                        return Err(Error::InvalidGraph(format!("arity mismatch at node {id}")));
                    }
                    let param = match p {
                        Params::Affine { w, b } if *kind == InteractionKind::Linear => {
                            let w = push_param(&mut params, &mut param_ids, ParamId { node: id, slot: super::ParamSlot::Weight }, *w);
                            push_param(&mut params, &mut param_ids, ParamId { node: id, slot: super::ParamSlot::Bias }, *b);
                            w
                        }
                        Params::Empty if *kind != InteractionKind::Linear => usize::MAX,
                        _ => return Err(Error::InvalidGraph(format!("invalid parameters at node {id}"))),
                    };
                    let a0 = arg(0)?;
                    let a1 = if kind.arity() == 2 { arg(1)? } else { a0 };
                    step_of.insert(id, steps.len());
                    steps.push(Step::Interaction { node: id, kind: *kind, args: [a0, a1], param });
                }
                (NodeOp::OutputRegister { .. }, Params::Affine { w, b }) => {
                    if output.is_some() {
                        return Err(Error::InvalidGraph("more than one output register".into()));
                    }
                    let a = arg(0)?;
                    let w = push_param(&mut params, &mut param_ids, ParamId { node: id, slot: super::ParamSlot::Weight }, *w);
                    let b = push_param(&mut params, &mut param_ids, ParamId { node: id, slot: super::ParamSlot::Bias }, *b);
                    output = Some((id, a, w, b));
                }
                _ => return Err(Error::InvalidGraph(format!("invalid parameters at node {id}"))),
            }
        }
        let (output_node, out_arg, out_w, out_b) =
            output.ok_or_else(|| Error::InvalidGraph("no output register".into()))?;
        Ok(Program {
            task: graph.task,
            steps,
            params,
            param_ids,
            registers,
            output_node,
            out_arg,
            out_w,
            out_b,
        })
    }

    /// Writes `params` back into the graph nodes they were read from.
    pub fn write_back(&self, graph: &mut Graph, params: &[f64]) -> Result<()> {
        for (id, v) in self.param_ids.iter().zip(params) {
            graph.set_param(id, *v)?;
        }
        Ok(())
    }

    fn bind_value(&self, reg: &RegisterInfo, v: &Value) -> Result<(RegisterBinding, bool)> {
        match (reg.stype, v) {
            (_, Value::Missing) => Err(Error::MissingFeature(reg.feature.clone())),
            (SemanticType::Numerical, Value::Num(x)) => Ok((RegisterBinding::Scaled(scale(*x, reg.min, reg.max)), false)),
            (SemanticType::Numerical, Value::Cat(s)) => Err(Error::Type(format!(
                "numerical register `{}` given non-numeric value `{s}`",
                reg.feature
            ))),
            (SemanticType::Categorical, Value::Cat(s)) => {
                let idx = reg.categories.get(s).copied();
                Ok((RegisterBinding::Category(idx), idx.is_none()))
            }
            (SemanticType::Categorical, Value::Num(x)) => {
                let idx = reg.categories.get(&x.to_string()).copied();
                Ok((RegisterBinding::Category(idx), idx.is_none()))
            }
        }
    }

    pub fn bind_sample(&self, sample: &Sample) -> Result<Vec<RegisterBinding>> {
        self.registers
            .iter()
            .map(|reg| {
                let v = sample
                    .get(&reg.feature)
                    .ok_or_else(|| Error::MissingFeature(reg.feature.clone()))?;
                Ok(self.bind_value(reg, v)?.0)
            })
            .collect()
    }

    /// Binds every row of `data`. Rows with a missing register value (or
    /// missing target, when `with_target`) are skipped and counted.
    pub fn bind_dataset(&self, data: &Dataset, target: Option<&str>) -> Result<Batch> {
        let columns: Vec<&Column> = self
            .registers
            .iter()
            .map(|r| data.column(&r.feature).ok_or_else(|| Error::MissingFeature(r.feature.clone())))
            .collect::<Result<_>>()?;
        let target_col = match target {
            Some(t) => Some(
                data.numeric(t)
                    .map_err(|_| Error::InvalidInput(format!("target column `{t}` must be present and numerical")))?,
            ),
            None => None,
        };
        let mut batch = Batch {
            width: self.registers.len(),
            inputs: Vec::with_capacity(self.registers.len() * data.n_rows()),
            targets: Vec::new(),
            rows: Vec::new(),
            dropped: 0,
            unseen: 0,
        };
        let mut row_buf = Vec::with_capacity(self.registers.len());
        'rows: for i in 0..data.n_rows() {
            row_buf.clear();
            let mut unseen = 0;
            for (reg, col) in self.registers.iter().zip(&columns) {
                let v = col.value(i);
                if v == Value::Missing {
                    batch.dropped += 1;
                    continue 'rows;
                }
                let (b, u) = self.bind_value(reg, &v).map_err(|e| e.at_sample(i))?;
                unseen += usize::from(u);
                row_buf.push(b);
            }
            if let Some(tc) = target_col {
                match tc[i] {
                    Some(y) => {
                        if self.task == Task::Classifier && y != 0.0 && y != 1.0 {
                            return Err(Error::InvalidInput(format!(
                                "classifier target must be 0 or 1, found {y} at row {i}"
                            )));
                        }
                        batch.targets.push(y);
                    }
                    None => {
                        batch.dropped += 1;
                        continue 'rows;
                    }
                }
            }
            batch.unseen += unseen;
            batch.inputs.extend_from_slice(&row_buf);
            batch.rows.push(i);
        }
        if batch.dropped > 0 {
            log::info!("skipped {} rows with missing values", batch.dropped);
        }
        if batch.unseen > 0 {
            log::warn!("{} unseen categorical values encoded as bias only", batch.unseen);
        }
        Ok(batch)
    }

    pub fn forward_row(&self, row: &[RegisterBinding], values: &mut Vec<f64>) -> Result<f64> {
        self.forward_with(&self.params, row, values)
    }

    /// Forward pass returning the output pre-activation; `values` receives
    /// every step's value.
    pub fn forward_with(&self, params: &[f64], row: &[RegisterBinding], values: &mut Vec<f64>) -> Result<f64> {
        values.clear();
        for step in &self.steps {
            let v = match *step {
                Step::Numeric { slot, w, b } => {
                    let RegisterBinding::Scaled(s) = row[slot] else {
                        unreachable!("numeric step bound to a category")
                    };
                    (s * params[w] + params[b]).clamp(-REGISTER_CLIP, REGISTER_CLIP)
                }
                Step::Categorical { slot, bias } => match row[slot] {
                    RegisterBinding::Category(Some(c)) => params[c] + params[bias],
                    RegisterBinding::Category(None) => params[bias],
                    RegisterBinding::Scaled(_) => unreachable!("categorical step bound to a number"),
                },
                Step::Interaction { node, kind, args, param } => {
                    let x = [values[args[0]], values[args[1]]];
                    let p: &[f64] = if param == usize::MAX { &[] } else { &params[param..param + 2] };
                    let v = apply_interaction(kind, &x, p).ok_or(Error::Singular { node, kind })?;
                    if !v.is_finite() {
                        return Err(Error::NonFinite { node });
                    }
                    v
                }
            };
            values.push(v);
        }
        let z = params[self.out_w] * values[self.out_arg] + params[self.out_b];
        if !z.is_finite() {
            return Err(Error::NonFinite { node: self.output_node });
        }
        Ok(z)
    }

    /// Accumulates `dz · dz/dθ` into `grad` given a completed forward pass.
    pub fn backward_with(
        &self,
        params: &[f64],
        row: &[RegisterBinding],
        values: &[f64],
        dz: f64,
        grad: &mut [f64],
        adjoint: &mut Vec<f64>,
    ) {
        adjoint.clear();
        adjoint.resize(self.steps.len(), 0.0);
        grad[self.out_w] += dz * values[self.out_arg];
        grad[self.out_b] += dz;
        adjoint[self.out_arg] += dz * params[self.out_w];
        for (i, step) in self.steps.iter().enumerate().rev() {
            let a = adjoint[i];
            if a == 0.0 {
                continue;
            }
            match *step {
                Step::Numeric { slot, w, b } => {
                    let RegisterBinding::Scaled(s) = row[slot] else { unreachable!() };
                    let pre = s * params[w] + params[b];
                    if pre.abs() <= REGISTER_CLIP {
                        grad[w] += a * s;
                        grad[b] += a;
                    }
                }
                Step::Categorical { slot, bias } => {
                    if let RegisterBinding::Category(Some(c)) = row[slot] {
                        grad[c] += a;
                    }
                    grad[bias] += a;
                }
                Step::Interaction { kind, args, param, .. } => {
                    let x = [values[args[0]], values[args[1]]];
                    let p: &[f64] = if param == usize::MAX { &[0.0, 0.0] } else { &params[param..param + 2] };
                    let (dx, dp) = interaction_partials(kind, &x, p, values[i]);
                    adjoint[args[0]] += a * dx[0];
                    if kind.arity() == 2 {
                        adjoint[args[1]] += a * dx[1];
                    }
                    if param != usize::MAX {
                        grad[param] += a * dp[0];
                        grad[param + 1] += a * dp[1];
                    }
                }
            }
        }
    }

    /// Applies the output activation to a pre-activation.
    pub fn finish(&self, z: f64) -> f64 {
        match self.task {
            Task::Classifier => logistic(z),
            Task::Regressor => z,
        }
    }
}
