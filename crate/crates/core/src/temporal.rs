//! Sequential temporal coefficients: a two-layer bidirectional LSTM over
//! per-frame log-mel columns, summarized into one 128-dimensional utterance
//! vector.
//!
//! The forward pass keeps full traces so training can backpropagate through
//! time analytically; the backward pass is checked against finite
//! differences in the tests.

use crate::error::{Error, Result};
use crate::melspec::{SpectrogramKind, SpectrogramMatrix};
use crate::tensor::{sigmoid, Tensor2};
use rand_chacha::ChaCha8Rng;

/// Length of every temporal feature vector.
pub const STC_DIM: usize = 128;

/// Hidden width per direction; two directions concatenate to [`STC_DIM`].
pub const STC_HIDDEN: usize = 64;

/// Gate parameters for one direction of one layer. Rows of `w_x`/`w_h` are
/// laid out `[input, forget, cell, output]`, each `hidden` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub w_x: Tensor2, // 4*hidden x input
    pub w_h: Tensor2, // 4*hidden x hidden
    pub b: Tensor2,   // 1 x 4*hidden
}

impl LstmCellParams {
    pub fn init(input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            w_x: Tensor2::glorot(4 * hidden, input_dim, rng),
            w_h: Tensor2::glorot(4 * hidden, hidden, rng),
            b: Tensor2::zeros(1, 4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.cols()
    }

    fn zeros_like(&self) -> Self {
        Self {
            w_x: Tensor2::zeros(self.w_x.rows(), self.w_x.cols()),
            w_h: Tensor2::zeros(self.w_h.rows(), self.w_h.cols()),
            b: Tensor2::zeros(1, self.b.cols()),
        }
    }
}

/// One LSTM step: gates `i,f,o` are sigmoids, `g` is tanh,
/// `c' = f*c + i*g`, `h' = o*tanh(c')`.
pub fn lstm_cell(
    x: &[f64],
    h: &[f64],
    c: &[f64],
    params: &LstmCellParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let hidden = params.hidden();
    if x.len() != params.input_dim() || h.len() != hidden || c.len() != hidden {
        return Err(Error::ShapeMismatch(format!(
            "lstm cell: input {}, state {}/{} against params {}x{}",
            x.len(),
            h.len(),
            c.len(),
            params.input_dim(),
            hidden
        )));
    }
    let step = step_forward(params, x, h, c);
    Ok((step.h, step.c))
}

/// Everything one step produces, kept for backpropagation.
#[derive(Debug, Clone)]
struct StepTrace {
    gates: Vec<f64>, // activated [i f g o], 4*hidden
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

fn step_forward(params: &LstmCellParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepTrace {
    let hidden = params.hidden();
    let mut z = params.w_x.matvec(x).expect("checked shape");
    let zh = params.w_h.matvec(h_prev).expect("checked shape");
    for ((z, &zh), &b) in z.iter_mut().zip(&zh).zip(params.b.data()) {
        *z += zh + b;
    }
    let mut gates = vec![0.0; 4 * hidden];
    for k in 0..hidden {
        gates[k] = sigmoid(z[k]);
        gates[hidden + k] = sigmoid(z[hidden + k]);
        gates[2 * hidden + k] = z[2 * hidden + k].tanh();
        gates[3 * hidden + k] = sigmoid(z[3 * hidden + k]);
    }
    let mut c = vec![0.0; hidden];
    let mut tanh_c = vec![0.0; hidden];
    let mut h = vec![0.0; hidden];
    for k in 0..hidden {
        c[k] = gates[hidden + k] * c_prev[k] + gates[k] * gates[2 * hidden + k];
        tanh_c[k] = c[k].tanh();
        h[k] = gates[3 * hidden + k] * tanh_c[k];
    }
    StepTrace {
        gates,
        c,
        tanh_c,
        h,
    }
}

/// Forward trace of one direction over a sequence given in processing order.
#[derive(Debug, Clone)]
struct DirectionTrace {
    steps: Vec<StepTrace>,
}

fn run_direction(params: &LstmCellParams, inputs: &[&[f64]]) -> DirectionTrace {
    let hidden = params.hidden();
    let zero = vec![0.0; hidden];
    let mut steps: Vec<StepTrace> = Vec::with_capacity(inputs.len());
    for (s, &x) in inputs.iter().enumerate() {
        let (h_prev, c_prev) = match s {
            0 => (&zero, &zero),
            _ => (&steps[s - 1].h, &steps[s - 1].c),
        };
        steps.push(step_forward(params, x, h_prev, c_prev));
    }
    DirectionTrace { steps }
}

/// BPTT for one direction. `d_h_ext[s]` is the loss gradient arriving at the
/// hidden state of processing step `s` from outside the recurrence. Returns
/// the gradient w.r.t. each step's input.
fn backprop_direction(
    params: &LstmCellParams,
    inputs: &[&[f64]],
    trace: &DirectionTrace,
    d_h_ext: &[Vec<f64>],
    grads: &mut LstmCellParams,
) -> Vec<Vec<f64>> {
    let hidden = params.hidden();
    let steps = trace.steps.len();
    let zero = vec![0.0; hidden];
    let mut d_inputs = vec![vec![0.0; params.input_dim()]; steps];
    let mut d_h_rec = vec![0.0; hidden];
    let mut d_c = vec![0.0; hidden];

    for s in (0..steps).rev() {
        let step = &trace.steps[s];
        let (h_prev, c_prev) = match s {
            0 => (&zero, &zero),
            _ => (&trace.steps[s - 1].h, &trace.steps[s - 1].c),
        };
        let mut dz = vec![0.0; 4 * hidden];
        for k in 0..hidden {
            let i = step.gates[k];
            let f = step.gates[hidden + k];
            let g = step.gates[2 * hidden + k];
            let o = step.gates[3 * hidden + k];
            let dh = d_h_ext[s][k] + d_h_rec[k];
            let d_o = dh * step.tanh_c[k];
            let dc = d_c[k] + dh * o * (1.0 - step.tanh_c[k] * step.tanh_c[k]);
            let d_i = dc * g;
            let d_f = dc * c_prev[k];
            let d_g = dc * i;
            dz[k] = d_i * i * (1.0 - i);
            dz[hidden + k] = d_f * f * (1.0 - f);
            dz[2 * hidden + k] = d_g * (1.0 - g * g);
            dz[3 * hidden + k] = d_o * o * (1.0 - o);
            d_c[k] = dc * f;
        }
        grads.w_x.add_outer(&dz, inputs[s], 1.0);
        grads.w_h.add_outer(&dz, h_prev, 1.0);
        for (b, &d) in grads.b.data_mut().iter_mut().zip(&dz) {
            *b += d;
        }
        d_inputs[s] = params.w_x.matvec_transposed(&dz).expect("checked shape");
        d_h_rec = params.w_h.matvec_transposed(&dz).expect("checked shape");
    }
    d_inputs
}

/// One bidirectional layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLayer {
    pub fwd: LstmCellParams,
    pub bwd: LstmCellParams,
}

/// Stacked bidirectional LSTM. Layer `l > 0` consumes the per-step
/// concatenation of both directions of layer `l - 1`; the utterance summary
/// concatenates the last forward state with the backward state at the first
/// frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub layers: Vec<BiLayer>,
    input_dim: usize,
    hidden: usize,
}

/// Gradients aligned with [`BiLstm::params_mut`] order.
#[derive(Debug, Clone)]
pub struct BiLstmGrads {
    pub layers: Vec<BiLayer>,
}

/// Forward state kept around for the training backward pass.
pub struct BiLstmTrace {
    layer_inputs: Vec<Vec<Vec<f64>>>, // per layer, per time step
    traces: Vec<(DirectionTrace, DirectionTrace)>,
    steps: usize,
}

impl BiLstm {
    pub fn new(input_dim: usize, hidden: usize, n_layers: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let in_dim = if l == 0 { input_dim } else { 2 * hidden };
            layers.push(BiLayer {
                fwd: LstmCellParams::init(in_dim, hidden, rng),
                bwd: LstmCellParams::init(in_dim, hidden, rng),
            });
        }
        Self {
            layers,
            input_dim,
            hidden,
        }
    }

    /// Rebuild a network from deserialized layers, validating that layer
    /// widths chain together.
    pub fn from_layers(layers: Vec<BiLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::ShapeMismatch("network needs at least one layer".into()));
        }
        let input_dim = layers[0].fwd.input_dim();
        let hidden = layers[0].fwd.hidden();
        for (l, layer) in layers.iter().enumerate() {
            let expected_in = if l == 0 { input_dim } else { 2 * hidden };
            for cell in [&layer.fwd, &layer.bwd] {
                if cell.input_dim() != expected_in || cell.hidden() != hidden {
                    return Err(Error::ShapeMismatch(format!(
                        "layer {l} expects {expected_in}-wide input and {hidden} hidden units"
                    )));
                }
            }
        }
        Ok(Self {
            layers,
            input_dim,
            hidden,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        2 * self.hidden
    }

    pub fn zero_grads(&self) -> BiLstmGrads {
        BiLstmGrads {
            layers: self
                .layers
                .iter()
                .map(|l| BiLayer {
                    fwd: l.fwd.zeros_like(),
                    bwd: l.bwd.zeros_like(),
                })
                .collect(),
        }
    }

    /// Utterance summary for a frame sequence (each frame `input_dim` wide).
    pub fn forward(&self, frames: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(frames)?.0)
    }

    /// Forward pass that keeps per-step traces for backpropagation.
    pub fn forward_trace(&self, frames: &[Vec<f64>]) -> Result<(Vec<f64>, BiLstmTrace)> {
        if frames.is_empty() {
            return Err(Error::EmptySequence);
        }
        for f in frames {
            if f.len() != self.input_dim {
                return Err(Error::ShapeMismatch(format!(
                    "frame width {} does not match network input {}",
                    f.len(),
                    self.input_dim
                )));
            }
        }
        let steps = frames.len();
        let mut layer_inputs: Vec<Vec<Vec<f64>>> = vec![frames.to_vec()];
        let mut traces = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = layer_inputs.last().unwrap();
            let fwd_in: Vec<&[f64]> = input.iter().map(|v| v.as_slice()).collect();
            let bwd_in: Vec<&[f64]> = input.iter().rev().map(|v| v.as_slice()).collect();
            let fwd = run_direction(&layer.fwd, &fwd_in);
            let bwd = run_direction(&layer.bwd, &bwd_in);
            let mut output = Vec::with_capacity(steps);
            for t in 0..steps {
                let mut step_out = fwd.steps[t].h.clone();
                step_out.extend_from_slice(&bwd.steps[steps - 1 - t].h);
                output.push(step_out);
            }
            traces.push((fwd, bwd));
            layer_inputs.push(output);
        }
        let (last_fwd, last_bwd) = traces.last().unwrap();
        let mut summary = last_fwd.steps[steps - 1].h.clone();
        summary.extend_from_slice(&last_bwd.steps[steps - 1].h);
        Ok((
            summary,
            BiLstmTrace {
                layer_inputs,
                traces,
                steps,
            },
        ))
    }

    /// Accumulate parameter gradients for a summary gradient.
    pub fn backward(&self, trace: &BiLstmTrace, d_summary: &[f64], grads: &mut BiLstmGrads) {
        let steps = trace.steps;
        let hidden = self.hidden;
        debug_assert_eq!(d_summary.len(), 2 * hidden);

        // External hidden-state gradients per layer, per direction, indexed
        // by processing step.
        let mut d_fwd_ext = vec![vec![0.0; hidden]; steps];
        let mut d_bwd_ext = vec![vec![0.0; hidden]; steps];
        d_fwd_ext[steps - 1].copy_from_slice(&d_summary[..hidden]);
        d_bwd_ext[steps - 1].copy_from_slice(&d_summary[hidden..]);

        for (l, layer) in self.layers.iter().enumerate().rev() {
            let inputs = &trace.layer_inputs[l];
            let fwd_in: Vec<&[f64]> = inputs.iter().map(|v| v.as_slice()).collect();
            let bwd_in: Vec<&[f64]> = inputs.iter().rev().map(|v| v.as_slice()).collect();
            let (fwd_trace, bwd_trace) = &trace.traces[l];
            let d_in_fwd = backprop_direction(
                &layer.fwd,
                &fwd_in,
                fwd_trace,
                &d_fwd_ext,
                &mut grads.layers[l].fwd,
            );
            let d_in_bwd = backprop_direction(
                &layer.bwd,
                &bwd_in,
                bwd_trace,
                &d_bwd_ext,
                &mut grads.layers[l].bwd,
            );
            if l == 0 {
                break;
            }
            // Combine both directions' input gradients into the previous
            // layer's per-step output gradient, then split into halves.
            d_fwd_ext = vec![vec![0.0; hidden]; steps];
            d_bwd_ext = vec![vec![0.0; hidden]; steps];
            for t in 0..steps {
                let from_fwd = &d_in_fwd[t];
                let from_bwd = &d_in_bwd[steps - 1 - t];
                for k in 0..hidden {
                    d_fwd_ext[t][k] = from_fwd[k] + from_bwd[k];
                    d_bwd_ext[steps - 1 - t][k] = from_fwd[hidden + k] + from_bwd[hidden + k];
                }
            }
        }
    }

    /// Mutable parameter tensors in a fixed order (layer-major, forward
    /// before backward, `w_x`, `w_h`, `b`).
    pub fn params_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut out = Vec::with_capacity(self.layers.len() * 6);
        for layer in &mut self.layers {
            out.push(&mut layer.fwd.w_x);
            out.push(&mut layer.fwd.w_h);
            out.push(&mut layer.fwd.b);
            out.push(&mut layer.bwd.w_x);
            out.push(&mut layer.bwd.w_h);
            out.push(&mut layer.bwd.b);
        }
        out
    }

    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.layers.len() * 6);
        for layer in &self.layers {
            for t in [&layer.fwd.w_x, &layer.fwd.w_h, &layer.fwd.b] {
                out.push(t.shape());
            }
            for t in [&layer.bwd.w_x, &layer.bwd.w_h, &layer.bwd.b] {
                out.push(t.shape());
            }
        }
        out
    }

    /// Container records, named `lstm.l<idx>.<dir>.<tensor>`.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for (dir, cell) in [("fwd", &layer.fwd), ("bwd", &layer.bwd)] {
                out.push((format!("lstm.l{l}.{dir}.w_x"), &cell.w_x));
                out.push((format!("lstm.l{l}.{dir}.w_h"), &cell.w_h));
                out.push((format!("lstm.l{l}.{dir}.b"), &cell.b));
            }
        }
        out
    }
}

impl BiLstmGrads {
    pub fn refs(&self) -> Vec<&Tensor2> {
        let mut out = Vec::with_capacity(self.layers.len() * 6);
        for layer in &self.layers {
            out.push(&layer.fwd.w_x);
            out.push(&layer.fwd.w_h);
            out.push(&layer.fwd.b);
            out.push(&layer.bwd.w_x);
            out.push(&layer.bwd.w_h);
            out.push(&layer.bwd.b);
        }
        out
    }
}

/// Temporal coefficients: always 128 finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct StcVector {
    coefficients: Vec<f64>,
}

impl StcVector {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != STC_DIM {
            return Err(Error::ShapeMismatch(format!(
                "STC vector must have {STC_DIM} entries, got {}",
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self { coefficients })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

/// Convert a log-mel spectrogram into a frame sequence, newest frame last,
/// truncated to `max_frames` when given.
pub fn spectrogram_frames(spec: &SpectrogramMatrix, max_frames: Option<usize>) -> Vec<Vec<f64>> {
    let take = match max_frames {
        Some(cap) => spec.cols().min(cap),
        None => spec.cols(),
    };
    (0..take).map(|t| spec.column(t)).collect()
}

/// Utterance-level temporal features from a log-mel spectrogram.
pub fn stc_features(spec: &SpectrogramMatrix, params: &BiLstm) -> Result<StcVector> {
    if spec.kind() != SpectrogramKind::LogMel {
        return Err(Error::ShapeMismatch(
            "temporal features expect a log-mel spectrogram".into(),
        ));
    }
    let frames = spectrogram_frames(spec, None);
    StcVector::new(params.forward(&frames)?)
}
