use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::encoder::{EncoderModel, EncoderTrace};
use super::train::{Gold, Prepared};
use super::{concat, Task};
use crate::extract::{bio_spans, BioTag};
use crate::nn::{prefixed, softmax_xent, Dense, Params, Tensor2};
use crate::text::{Polarity, TokenSpan};
use crate::{Error, Result};

/// AE output classes, in logit order.
pub const AE_TAGS: [BioTag; 3] = [BioTag::B, BioTag::I, BioTag::O];

#[derive(Debug, Clone, PartialEq)]
pub enum TaskHead {
    /// Per-token B/I/O logits.
    Ae(Dense),
    /// Polarity logits on CLS, in [`Polarity::ALL`] order.
    Asc(Dense),
    /// Per-token start and end scores.
    Qa { start: Dense, end: Dense },
}

impl TaskHead {
    pub fn new(task: Task, input_dim: usize, rng: &mut crate::Rng) -> Self {
        match task {
            Task::Ae => TaskHead::Ae(Dense::new(input_dim, 3, rng)),
            Task::Asc => TaskHead::Asc(Dense::new(input_dim, 3, rng)),
            Task::Qa => {
                let start = Dense::new(input_dim, 1, rng);
                let end = Dense::new(input_dim, 1, rng);
                TaskHead::Qa { start, end }
            }
        }
    }

    pub fn task(&self) -> Task {
        match self {
            TaskHead::Ae(_) => Task::Ae,
            TaskHead::Asc(_) => Task::Asc,
            TaskHead::Qa { .. } => Task::Qa,
        }
    }

    pub fn layers(&self) -> Vec<&Dense> {
        match self {
            TaskHead::Ae(d) | TaskHead::Asc(d) => vec![d],
            TaskHead::Qa { start, end } => vec![start, end],
        }
    }

    pub fn layers_mut(&mut self) -> Vec<&mut Dense> {
        match self {
            TaskHead::Ae(d) | TaskHead::Asc(d) => vec![d],
            TaskHead::Qa { start, end } => vec![start, end],
        }
    }

    /// Zeroes the weight columns from `from` on, i.e. those reading the
    /// appended commonsense dimensions.
    pub fn zero_columns_from(&mut self, from: usize) {
        for layer in self.layers_mut() {
            for r in 0..layer.weight.rows() {
                for c in from..layer.weight.cols() {
                    layer.weight.set(r, c, 0.0);
                }
            }
        }
    }
}

impl Params for TaskHead {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        match self {
            TaskHead::Ae(d) => prefixed("ae", d.tensors()),
            TaskHead::Asc(d) => prefixed("asc", d.tensors()),
            TaskHead::Qa { start, end } => {
                let mut out = prefixed("qa_start", start.tensors());
                out.extend(prefixed("qa_end", end.tensors()));
                out
            }
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        match self {
            TaskHead::Ae(d) | TaskHead::Asc(d) => d.tensors_mut(),
            TaskHead::Qa { start, end } => {
                let mut out = start.tensors_mut();
                out.extend(end.tensors_mut());
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComprehensionModel {
    pub encoder: EncoderModel,
    pub head: TaskHead,
}

impl Params for ComprehensionModel {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut out = prefixed("encoder", self.encoder.tensors());
        out.extend(prefixed("head", self.head.tensors()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut out = self.encoder.tensors_mut();
        out.extend(self.head.tensors_mut());
        out
    }
}

/// Head outputs for one input.
#[derive(Debug, Clone, PartialEq)]
pub enum Logits {
    /// One row of B/I/O logits per input token.
    Ae(Vec<Vec<f64>>),
    Asc(Vec<f64>),
    /// Start and end scores over the review segment only.
    Qa { start: Vec<f64>, end: Vec<f64> },
}

struct Forward {
    trace: EncoderTrace,
    augmented: Vec<Vec<f64>>,
    logits: Logits,
}

impl ComprehensionModel {
    fn run(&self, ex: &Prepared) -> Result<Forward> {
        let trace = self.encoder.encode(&ex.input.sequence)?;
        let augmented = concat(&trace.outputs, &ex.appended);
        let logits = match &self.head {
            TaskHead::Ae(d) => Logits::Ae(augmented.iter().map(|x| d.forward(x)).collect::<Result<_>>()?),
            TaskHead::Asc(d) => Logits::Asc(d.forward(&augmented[0])?),
            TaskHead::Qa { start, end } => {
                let review = &augmented[ex.input.review_start..ex.input.review_end];
                let s = review.iter().map(|x| start.forward(x).map(|v| v[0])).collect::<Result<_>>()?;
                let e = review.iter().map(|x| end.forward(x).map(|v| v[0])).collect::<Result<_>>()?;
                Logits::Qa { start: s, end: e }
            }
        };
        Ok(Forward {
            trace,
            augmented,
            logits,
        })
    }

    pub fn logits(&self, ex: &Prepared) -> Result<Logits> {
        Ok(self.run(ex)?.logits)
    }

    /// Loss of one example; parameter gradients are added to `grad` when given.
    pub fn example_loss(&self, ex: &Prepared, grad: Option<&mut ComprehensionModel>) -> Result<f64> {
        let gold = ex.gold.as_ref().ok_or(Error::Empty("gold labels"))?;
        let fwd = self.run(ex)?;
        let n = fwd.augmented.len();
        let width = fwd.augmented.first().map_or(0, Vec::len);
        let mut d_aug = vec![vec![0.0; width]; n];
        let mut loss = 0.0;
        match (&self.head, &fwd.logits, gold) {
            (TaskHead::Ae(d), Logits::Ae(rows), Gold::Ae(labels)) => {
                let mut g_head = grad.as_ref().map(|_| d.zeros_like());
                for (i, label) in labels.iter().enumerate() {
                    let Some(label) = *label else { continue };
                    let (l, dl) = softmax_xent(&rows[i], label)?;
                    loss += l;
                    if let Some(gh) = g_head.as_mut() {
                        d.backward(&fwd.augmented[i], &dl, gh, Some(&mut d_aug[i]));
                    }
                }
                if let (Some(g), Some(gh)) = (grad, g_head) {
                    add_dense(&mut g.head, &gh);
                    self.encoder.backprop(&fwd.trace, &d_aug, &mut g.encoder);
                }
            }
            (TaskHead::Asc(d), Logits::Asc(row), Gold::Asc(label)) => {
                let (l, dl) = softmax_xent(row, *label)?;
                loss += l;
                if let Some(g) = grad {
                    let mut gh = d.zeros_like();
                    d.backward(&fwd.augmented[0], &dl, &mut gh, Some(&mut d_aug[0]));
                    add_dense(&mut g.head, &gh);
                    self.encoder.backprop(&fwd.trace, &d_aug, &mut g.encoder);
                }
            }
            (TaskHead::Qa { start, end }, Logits::Qa { start: s, end: e }, Gold::Qa { start: gs, end: ge }) => {
                let (ls, ds) = softmax_xent(s, *gs)?;
                let (le, de) = softmax_xent(e, *ge)?;
                loss += ls + le;
                if let Some(g) = grad {
                    let off = ex.input.review_start;
                    let (mut g_start, mut g_end) = (start.zeros_like(), end.zeros_like());
                    for k in 0..s.len() {
                        let x = &fwd.augmented[off + k];
                        start.backward(x, &[ds[k]], &mut g_start, Some(&mut d_aug[off + k]));
                        end.backward(x, &[de[k]], &mut g_end, Some(&mut d_aug[off + k]));
                    }
                    if let TaskHead::Qa { start: gs, end: ge } = &mut g.head {
                        add_params(gs, &g_start);
                        add_params(ge, &g_end);
                    }
                    self.encoder.backprop(&fwd.trace, &d_aug, &mut g.encoder);
                }
            }
            _ => return Err(Error::invalid("gold labels do not match the task head")),
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite("task loss"));
        }
        Ok(loss)
    }

    /// Summed loss and gradient over `batch`.
    pub fn batch_loss_and_grad(&self, batch: &[Prepared]) -> Result<(f64, ComprehensionModel)> {
        let mut grad = self.zeros_like();
        let mut total = 0.0;
        for ex in batch {
            total += self.example_loss(ex, Some(&mut grad))?;
        }
        Ok((total, grad))
    }
}

fn add_dense(head: &mut TaskHead, g: &Dense) {
    if let TaskHead::Ae(d) | TaskHead::Asc(d) = head {
        add_params(d, g);
    }
}

fn add_params<P: Params>(acc: &mut P, g: &P) {
    for (a, (_, b)) in acc.tensors_mut().into_iter().zip(g.tensors()) {
        for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
            *x += y;
        }
    }
}

/// Best `(i, j)` spanning at most `max_len` tokens (`i <= j < i + max_len`)
/// maximizing `start[i] + end[j]`. Ties go to the smaller `i`, then the
/// smaller `j`.
pub fn best_span(start: &[f64], end: &[f64], max_len: usize) -> Result<(usize, usize)> {
    if start.is_empty() || start.len() != end.len() {
        return Err(Error::Empty("review segment"));
    }
    if max_len == 0 {
        return Err(Error::invalid("max answer length must be at least one token"));
    }
    let mut best = (0, 0);
    let mut best_score = f64::NEG_INFINITY;
    for i in 0..start.len() {
        let last = (i + max_len - 1).min(end.len() - 1);
        for j in i..=last {
            let s = start[i] + end[j];
            if s > best_score {
                best_score = s;
                best = (i, j);
            }
        }
    }
    Ok(best)
}

/// Argmax tag per token, decoded to spans with orphan `I` promoted to `B`.
pub fn ae_decode(rows: &[Vec<f64>]) -> Vec<TokenSpan> {
    let tags: Vec<BioTag> = rows.iter().map(|r| AE_TAGS[argmax(r)]).collect();
    bio_spans(&tags)
}

/// Argmax polarity; ties resolve positive, then negative, then neutral.
pub fn asc_predict(logits: &[f64]) -> Polarity {
    Polarity::ALL[argmax(logits)]
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
