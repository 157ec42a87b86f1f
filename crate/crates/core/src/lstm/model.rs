use super::{LstmError, LstmParams, ParamVector};
use crate::trace::Pattern;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations of one layer over a sequence, kept for the backward pass.
#[derive(Default)]
struct LayerTape {
    /// `steps × (input + hidden)`: the layer input and previous hidden state.
    xh: Vec<f64>,
    /// `steps × 4·hidden`: activated gates i, f, g, o.
    gates: Vec<f64>,
    /// `(steps + 1) × hidden`, row 0 is the zero initial state.
    cell: Vec<f64>,
    /// `steps × hidden`: tanh of the cell state.
    cell_tanh: Vec<f64>,
    /// `(steps + 1) × hidden`, row 0 is the zero initial state.
    hidden: Vec<f64>,
}

/// Reusable scratch buffers for one forward/backward evaluation.
#[derive(Default)]
struct Workspace {
    tapes: Vec<LayerTape>,
    z: Vec<f64>,
    dz: Vec<f64>,
    dxh: Vec<f64>,
    dh_from_above: Vec<f64>,
    dh_to_below: Vec<f64>,
    dh_next: Vec<f64>,
    dc_next: Vec<f64>,
}

fn check_sequence(sequence: &[f64]) -> Result<(), LstmError> {
    if sequence.is_empty() {
        return Err(LstmError::EmptySequence);
    }
    if let Some(t) = sequence.iter().position(|v| !v.is_finite()) {
        return Err(LstmError::NonFiniteInput(t));
    }
    Ok(())
}

fn run_forward(params: &LstmParams, sequence: &[f64], ws: &mut Workspace) -> f64 {
    let steps = sequence.len();
    ws.tapes
        .resize_with(params.layers.len(), LayerTape::default);

    for (l, layer) in params.layers.iter().enumerate() {
        let (below, rest) = ws.tapes.split_at_mut(l);
        let tape = &mut rest[0];
        let h = layer.hidden;
        let input = layer.input_dim;
        let row = layer.row_len();

        tape.xh.clear();
        tape.xh.resize(steps * row, 0.0);
        tape.gates.clear();
        tape.gates.resize(steps * 4 * h, 0.0);
        tape.cell.clear();
        tape.cell.resize((steps + 1) * h, 0.0);
        tape.cell_tanh.clear();
        tape.cell_tanh.resize(steps * h, 0.0);
        tape.hidden.clear();
        tape.hidden.resize((steps + 1) * h, 0.0);
        ws.z.resize(4 * h, 0.0);

        for t in 0..steps {
            let xh = &mut tape.xh[t * row..(t + 1) * row];
            if l == 0 {
                xh[0] = sequence[t];
            } else {
                let prev = &below[l - 1];
                xh[..input].copy_from_slice(&prev.hidden[(t + 1) * input..(t + 2) * input]);
            }
            xh[input..].copy_from_slice(&tape.hidden[t * h..(t + 1) * h]);

            for (r, z) in ws.z.iter_mut().enumerate() {
                let w = &layer.weights[r * row..(r + 1) * row];
                *z = layer.bias[r] + w.iter().zip(xh.iter()).map(|(a, b)| a * b).sum::<f64>();
            }
            let gates = &mut tape.gates[t * 4 * h..(t + 1) * 4 * h];
            for j in 0..h {
                let i_gate = sigmoid(ws.z[j]);
                let f_gate = sigmoid(ws.z[h + j]);
                let g_gate = ws.z[2 * h + j].tanh();
                let o_gate = sigmoid(ws.z[3 * h + j]);
                gates[j] = i_gate;
                gates[h + j] = f_gate;
                gates[2 * h + j] = g_gate;
                gates[3 * h + j] = o_gate;
                let c = f_gate * tape.cell[t * h + j] + i_gate * g_gate;
                let tc = c.tanh();
                tape.cell[(t + 1) * h + j] = c;
                tape.cell_tanh[t * h + j] = tc;
                tape.hidden[(t + 1) * h + j] = o_gate * tc;
            }
        }
    }

    let top = ws.tapes.last().unwrap();
    let h = params.layers.last().unwrap().hidden;
    let last = &top.hidden[steps * h..(steps + 1) * h];
    params.head.bias[0]
        + params
            .head
            .weights
            .iter()
            .zip(last)
            .map(|(w, x)| w * x)
            .sum::<f64>()
}

/// Accumulates into `grad` the gradient of `d_output · ŷ` for the sequence
/// last passed to [`run_forward`].
fn run_backward(
    params: &LstmParams,
    steps: usize,
    d_output: f64,
    grad: &mut LstmParams,
    ws: &mut Workspace,
) {
    let top_h = params.layers.last().unwrap().hidden;
    {
        let top = ws.tapes.last().unwrap();
        let last = &top.hidden[steps * top_h..(steps + 1) * top_h];
        for (g, x) in grad.head.weights.iter_mut().zip(last) {
            *g += d_output * x;
        }
        grad.head.bias[0] += d_output;
    }

    // Gradient w.r.t. each hidden state of the current layer coming from
    // the layer above (or the head for the top layer).
    ws.dh_from_above.clear();
    ws.dh_from_above.resize(steps * top_h, 0.0);
    for (j, w) in params.head.weights.iter().enumerate() {
        ws.dh_from_above[(steps - 1) * top_h + j] = d_output * w;
    }

    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        let g_layer = &mut grad.layers[l];
        let tape = &ws.tapes[l];
        let h = layer.hidden;
        let input = layer.input_dim;
        let row = layer.row_len();

        ws.dh_next.clear();
        ws.dh_next.resize(h, 0.0);
        ws.dc_next.clear();
        ws.dc_next.resize(h, 0.0);
        ws.dz.resize(4 * h, 0.0);
        ws.dxh.resize(row, 0.0);
        let pass_down = l > 0;
        if pass_down {
            ws.dh_to_below.clear();
            ws.dh_to_below.resize(steps * input, 0.0);
        }

        for t in (0..steps).rev() {
            let gates = &tape.gates[t * 4 * h..(t + 1) * 4 * h];
            for j in 0..h {
                let i_gate = gates[j];
                let f_gate = gates[h + j];
                let g_gate = gates[2 * h + j];
                let o_gate = gates[3 * h + j];
                let tc = tape.cell_tanh[t * h + j];
                let c_prev = tape.cell[t * h + j];

                let dh = ws.dh_from_above[t * h + j] + ws.dh_next[j];
                let dc = ws.dc_next[j] + dh * o_gate * (1.0 - tc * tc);
                ws.dz[j] = dc * g_gate * i_gate * (1.0 - i_gate);
                ws.dz[h + j] = dc * c_prev * f_gate * (1.0 - f_gate);
                ws.dz[2 * h + j] = dc * i_gate * (1.0 - g_gate * g_gate);
                ws.dz[3 * h + j] = dh * tc * o_gate * (1.0 - o_gate);
                ws.dc_next[j] = dc * f_gate;
            }

            let xh = &tape.xh[t * row..(t + 1) * row];
            ws.dxh.fill(0.0);
            for (r, &dz) in ws.dz.iter().enumerate() {
                g_layer.bias[r] += dz;
                let gw = &mut g_layer.weights[r * row..(r + 1) * row];
                for (g, x) in gw.iter_mut().zip(xh) {
                    *g += dz * x;
                }
                let w = &layer.weights[r * row..(r + 1) * row];
                for (d, w) in ws.dxh.iter_mut().zip(w) {
                    *d += dz * w;
                }
            }
            ws.dh_next.copy_from_slice(&ws.dxh[input..]);
            if pass_down {
                ws.dh_to_below[t * input..(t + 1) * input].copy_from_slice(&ws.dxh[..input]);
            }
        }
        if pass_down {
            std::mem::swap(&mut ws.dh_from_above, &mut ws.dh_to_below);
        }
    }
}

/// One-step-ahead prediction from the final top-layer hidden state.
pub fn forward(params: &LstmParams, sequence: &[f64]) -> Result<f64, LstmError> {
    check_sequence(sequence)?;
    let mut ws = Workspace::default();
    Ok(run_forward(params, sequence, &mut ws))
}

pub fn predict_batch(params: &LstmParams, batch: &[Pattern]) -> Result<Vec<f64>, LstmError> {
    let mut ws = Workspace::default();
    batch
        .iter()
        .map(|p| {
            check_sequence(&p.input)?;
            Ok(run_forward(params, &p.input, &mut ws))
        })
        .collect()
}

/// Mean squared error of the predictions over `batch`.
pub fn mse_loss(params: &LstmParams, batch: &[Pattern]) -> Result<f64, LstmError> {
    if batch.is_empty() {
        return Err(LstmError::EmptyBatch);
    }
    let mut ws = Workspace::default();
    let mut total = 0.0;
    for p in batch {
        check_sequence(&p.input)?;
        let residual = run_forward(params, &p.input, &mut ws) - p.target;
        total += residual * residual;
    }
    Ok(total / batch.len() as f64)
}

/// Loss and exact gradient of [`mse_loss`] over `batch`, by
/// backpropagation through every step of each sequence.
pub fn loss_and_gradient(
    params: &LstmParams,
    batch: &[Pattern],
) -> Result<(f64, LstmParams), LstmError> {
    if batch.is_empty() {
        return Err(LstmError::EmptyBatch);
    }
    let mut grad = LstmParams::zeros(&params.shape)?;
    let mut ws = Workspace::default();
    let scale = 2.0 / batch.len() as f64;
    let mut total = 0.0;
    for p in batch {
        check_sequence(&p.input)?;
        let residual = run_forward(params, &p.input, &mut ws) - p.target;
        total += residual * residual;
        run_backward(params, p.input.len(), scale * residual, &mut grad, &mut ws);
    }
    let loss = total / batch.len() as f64;
    if !loss.is_finite() || !grad.is_finite() {
        return Err(LstmError::Overflow(format!(
            "non-finite loss or gradient (loss = {loss})"
        )));
    }
    Ok((loss, grad))
}

pub fn backward(params: &LstmParams, batch: &[Pattern]) -> Result<ParamVector, LstmError> {
    loss_and_gradient(params, batch).map(|(_, g)| g.flatten())
}
