//! LSTM cell with forget/input/output gates over the concatenated
//! `[h_{t-1}, x_t]` input, plus a linear projection to per-node logits.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::init_uniform;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LstmParams {
    /// hidden x (hidden + dim) gate matrices over [h_{t-1}, x_t].
    pub w_forget: Array2<f64>,
    pub w_input: Array2<f64>,
    pub w_cell: Array2<f64>,
    pub w_output: Array2<f64>,
    pub b_forget: Array1<f64>,
    pub b_input: Array1<f64>,
    pub b_cell: Array1<f64>,
    pub b_output: Array1<f64>,
    /// vocab x hidden, hidden-to-logits.
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
    pub use_bias: bool,
}

/// Cached forward activations for backpropagation through time.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    /// T x (hidden + dim), rows [h_{t-1}, x_t].
    pub inputs: Array2<f64>,
    pub forget: Array2<f64>,
    pub input: Array2<f64>,
    pub candidate: Array2<f64>,
    pub output: Array2<f64>,
    /// T x hidden cell states C_t.
    pub cells: Array2<f64>,
    /// T x hidden, C_{t-1} per step (row 0 is the initial cell state).
    pub prev_cells: Array2<f64>,
    pub tanh_cells: Array2<f64>,
    /// T x hidden hidden states h_t.
    pub hidden: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmParams {
    pub fn init(vocab: usize, dim: usize, hidden: usize, use_bias: bool, rng: &mut impl Rng) -> LstmParams {
        let fan_in = hidden + dim;
        LstmParams {
            w_forget: init_uniform((hidden, fan_in), fan_in, rng),
            w_input: init_uniform((hidden, fan_in), fan_in, rng),
            w_cell: init_uniform((hidden, fan_in), fan_in, rng),
            w_output: init_uniform((hidden, fan_in), fan_in, rng),
            b_forget: Array1::zeros(hidden),
            b_input: Array1::zeros(hidden),
            b_cell: Array1::zeros(hidden),
            b_output: Array1::zeros(hidden),
            w_out: init_uniform((vocab, hidden), hidden, rng),
            b_out: Array1::zeros(vocab),
            use_bias,
        }
    }

    pub fn zeros_like(&self) -> LstmParams {
        LstmParams {
            w_forget: Array2::zeros(self.w_forget.raw_dim()),
            w_input: Array2::zeros(self.w_input.raw_dim()),
            w_cell: Array2::zeros(self.w_cell.raw_dim()),
            w_output: Array2::zeros(self.w_output.raw_dim()),
            b_forget: Array1::zeros(self.b_forget.raw_dim()),
            b_input: Array1::zeros(self.b_input.raw_dim()),
            b_cell: Array1::zeros(self.b_cell.raw_dim()),
            b_output: Array1::zeros(self.b_output.raw_dim()),
            w_out: Array2::zeros(self.w_out.raw_dim()),
            b_out: Array1::zeros(self.b_out.raw_dim()),
            use_bias: self.use_bias,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w_forget.nrows()
    }

    pub fn input_size(&self) -> usize {
        self.w_forget.ncols() - self.hidden_size()
    }

    pub fn vocab_size(&self) -> usize {
        self.w_out.nrows()
    }

    /// Trainable parameter count: 4 gate blocks plus the output projection.
    pub fn param_count(&self) -> usize {
        let gates = 4 * self.hidden_size() * (self.w_forget.ncols() + 1);
        let proj = self.w_out.len() + self.b_out.len();
        gates + proj
    }

    pub fn check_input(
        &self,
        xs: &ArrayView2<'_, f64>,
        h0: &Array1<f64>,
        c0: &Array1<f64>,
    ) -> Result<()> {
        if xs.ncols() != self.input_size() {
            return Err(Error::dimension(format!(
                "input rows have {} columns, cell expects {}",
                xs.ncols(),
                self.input_size()
            )));
        }
        if h0.len() != self.hidden_size() || c0.len() != self.hidden_size() {
            return Err(Error::dimension(format!(
                "initial states have {} / {} entries, cell expects {}",
                h0.len(),
                c0.len(),
                self.hidden_size()
            )));
        }
        Ok(())
    }

    /// Runs the recurrence, caching every gate activation backward needs.
    pub fn forward_trace(
        &self,
        xs: &ArrayView2<'_, f64>,
        h0: &Array1<f64>,
        c0: &Array1<f64>,
    ) -> LstmTrace {
        let steps = xs.nrows();
        let hidden = self.hidden_size();
        let width = hidden + self.input_size();

        // x-side gate pre-activations for all steps at once
        let x_cols = s![.., hidden..];
        let mut pre_f = xs.dot(&self.w_forget.slice(x_cols).t());
        let mut pre_i = xs.dot(&self.w_input.slice(x_cols).t());
        let mut pre_c = xs.dot(&self.w_cell.slice(x_cols).t());
        let mut pre_o = xs.dot(&self.w_output.slice(x_cols).t());
        if self.use_bias {
            pre_f += &self.b_forget;
            pre_i += &self.b_input;
            pre_c += &self.b_cell;
            pre_o += &self.b_output;
        }

        let h_cols = s![.., ..hidden];
        let wf_h = self.w_forget.slice(h_cols);
        let wi_h = self.w_input.slice(h_cols);
        let wc_h = self.w_cell.slice(h_cols);
        let wo_h = self.w_output.slice(h_cols);

        let mut trace = LstmTrace {
            inputs: Array2::zeros((steps, width)),
            forget: Array2::zeros((steps, hidden)),
            input: Array2::zeros((steps, hidden)),
            candidate: Array2::zeros((steps, hidden)),
            output: Array2::zeros((steps, hidden)),
            cells: Array2::zeros((steps, hidden)),
            prev_cells: Array2::zeros((steps, hidden)),
            tanh_cells: Array2::zeros((steps, hidden)),
            hidden: Array2::zeros((steps, hidden)),
        };

        let mut h_prev = h0.clone();
        let mut c_prev = c0.clone();
        for t in 0..steps {
            trace.inputs.slice_mut(s![t, ..hidden]).assign(&h_prev);
            trace.inputs.slice_mut(s![t, hidden..]).assign(&xs.row(t));
            trace.prev_cells.row_mut(t).assign(&c_prev);

            let f = (&pre_f.row(t) + &wf_h.dot(&h_prev)).mapv(sigmoid);
            let i = (&pre_i.row(t) + &wi_h.dot(&h_prev)).mapv(sigmoid);
            let g = (&pre_c.row(t) + &wc_h.dot(&h_prev)).mapv(f64::tanh);
            let o = (&pre_o.row(t) + &wo_h.dot(&h_prev)).mapv(sigmoid);

            let c = &(&f * &c_prev) + &(&i * &g);
            let tc = c.mapv(f64::tanh);
            let h = &o * &tc;

            trace.forget.row_mut(t).assign(&f);
            trace.input.row_mut(t).assign(&i);
            trace.candidate.row_mut(t).assign(&g);
            trace.output.row_mut(t).assign(&o);
            trace.cells.row_mut(t).assign(&c);
            trace.tanh_cells.row_mut(t).assign(&tc);
            trace.hidden.row_mut(t).assign(&h);

            h_prev = h;
            c_prev = c;
        }
        trace
    }

    /// Exact gradients given `d_hidden_direct` = dL/dh_t from the logit path.
    /// Returns cell gradients (projection excluded) and dL/dx_t.
    pub fn backward_trace(
        &self,
        xs: &ArrayView2<'_, f64>,
        trace: &LstmTrace,
        d_hidden_direct: &Array2<f64>,
    ) -> (LstmParams, Array2<f64>) {
        let steps = xs.nrows();
        let hidden = self.hidden_size();
        let dim = self.input_size();

        let mut da_f = Array2::zeros((steps, hidden));
        let mut da_i = Array2::zeros((steps, hidden));
        let mut da_c = Array2::zeros((steps, hidden));
        let mut da_o = Array2::zeros((steps, hidden));
        let mut dxs = Array2::zeros((steps, dim));

        let mut dh_carry: Array1<f64> = Array1::zeros(hidden);
        let mut dc_carry: Array1<f64> = Array1::zeros(hidden);
        for t in (0..steps).rev() {
            let dh = &d_hidden_direct.row(t) + &dh_carry;
            let f = trace.forget.row(t);
            let i = trace.input.row(t);
            let g = trace.candidate.row(t);
            let o = trace.output.row(t);
            let tc = trace.tanh_cells.row(t);
            let c_prev = trace.prev_cells.row(t);

            let dao = ndarray::Zip::from(&dh)
                .and(&o)
                .and(&tc)
                .map_collect(|&dh, &o, &tc| dh * tc * o * (1.0 - o));
            let dc = ndarray::Zip::from(&dh)
                .and(&o)
                .and(&tc)
                .map_collect(|&dh, &o, &tc| dh * o * (1.0 - tc * tc))
                + &dc_carry;
            let daf = ndarray::Zip::from(&dc)
                .and(&c_prev)
                .and(&f)
                .map_collect(|&dc, &cp, &f| dc * cp * f * (1.0 - f));
            let dai = ndarray::Zip::from(&dc)
                .and(&g)
                .and(&i)
                .map_collect(|&dc, &g, &i| dc * g * i * (1.0 - i));
            let dac = ndarray::Zip::from(&dc)
                .and(&i)
                .and(&g)
                .map_collect(|&dc, &i, &g| dc * i * (1.0 - g * g));
            dc_carry = ndarray::Zip::from(&dc)
                .and(&f)
                .map_collect(|&dc, &f| dc * f);

            let dz = self.w_forget.t().dot(&daf)
                + self.w_input.t().dot(&dai)
                + self.w_cell.t().dot(&dac)
                + self.w_output.t().dot(&dao);
            dh_carry = dz.slice(s![..hidden]).to_owned();
            dxs.row_mut(t).assign(&dz.slice(s![hidden..]));

            da_f.row_mut(t).assign(&daf);
            da_i.row_mut(t).assign(&dai);
            da_c.row_mut(t).assign(&dac);
            da_o.row_mut(t).assign(&dao);
        }

        let mut grads = self.zeros_like();
        grads.w_forget = da_f.t().dot(&trace.inputs);
        grads.w_input = da_i.t().dot(&trace.inputs);
        grads.w_cell = da_c.t().dot(&trace.inputs);
        grads.w_output = da_o.t().dot(&trace.inputs);
        if self.use_bias {
            grads.b_forget = da_f.sum_axis(Axis(0));
            grads.b_input = da_i.sum_axis(Axis(0));
            grads.b_cell = da_c.sum_axis(Axis(0));
            grads.b_output = da_o.sum_axis(Axis(0));
        }
        (grads, dxs)
    }
}

/// Forward pass: hidden states, cell states, and per-step logits (softmax is
/// applied by the loss). `h0`/`c0` are the initial states, typically zeros.
pub fn lstm_forward(
    params: &LstmParams,
    xs: &ArrayView2<'_, f64>,
    h0: &Array1<f64>,
    c0: &Array1<f64>,
) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
    params.check_input(xs, h0, c0)?;
    let trace = params.forward_trace(xs, h0, c0);
    let mut logits = trace.hidden.dot(&params.w_out.t());
    if params.use_bias {
        logits += &params.b_out;
    }
    Ok((trace.hidden, trace.cells, logits))
}

/// Full BPTT for the LSTM path: gradients for every parameter block plus
/// dL/dx_t for the embedding rows. `dlogits` is dL/do_t from the loss.
pub fn lstm_backward(
    params: &LstmParams,
    xs: &ArrayView2<'_, f64>,
    trace: &LstmTrace,
    dlogits: &Array2<f64>,
) -> Result<(LstmParams, Array2<f64>)> {
    if dlogits.nrows() != xs.nrows() {
        return Err(Error::dimension(format!(
            "{} logit rows for {} input steps",
            dlogits.nrows(),
            xs.nrows()
        )));
    }
    let d_hidden_direct = dlogits.dot(&params.w_out);
    let (mut grads, dxs) = params.backward_trace(xs, trace, &d_hidden_direct);
    grads.w_out = dlogits.t().dot(&trace.hidden);
    if params.use_bias {
        grads.b_out = dlogits.sum_axis(Axis(0));
    }
    Ok((grads, dxs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_params(vocab: usize, dim: usize, hidden: usize) -> LstmParams {
        let width = hidden + dim;
        LstmParams {
            w_forget: Array2::zeros((hidden, width)),
            w_input: Array2::zeros((hidden, width)),
            w_cell: Array2::zeros((hidden, width)),
            w_output: Array2::zeros((hidden, width)),
            b_forget: Array1::zeros(hidden),
            b_input: Array1::zeros(hidden),
            b_cell: Array1::zeros(hidden),
            b_output: Array1::zeros(hidden),
            w_out: Array2::zeros((vocab, hidden)),
            b_out: Array1::zeros(vocab),
            use_bias: true,
        }
    }

    #[test]
    fn zero_params_halve_the_cell_state_each_step() {
        // sigma(0) = 0.5, tanh(0) = 0: C_t = 0.5 C_{t-1}, h_t = 0.5 tanh(C_t)
        let params = zero_params(3, 2, 2);
        let xs = Array2::zeros((4, 2));
        let c0 = Array1::from(vec![0.8, -0.4]);
        let (hs, cs, _) = lstm_forward(&params, &xs.view(), &Array1::zeros(2), &c0).unwrap();
        let mut c_expect = c0.clone();
        for t in 0..4 {
            c_expect *= 0.5;
            for k in 0..2 {
                assert!((cs[[t, k]] - c_expect[k]).abs() < 1e-12);
                assert!((hs[[t, k]] - 0.5 * c_expect[k].tanh()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn saturated_forget_gate_preserves_memory() {
        // b_forget = 50 drives f to 1: C_t ~ C_{t-1} + i * g.
        let mut params = zero_params(3, 2, 2);
        params.b_forget.fill(50.0);
        let xs = Array2::zeros((6, 2));
        let c0 = Array1::from(vec![1.25, -2.5]);
        let (_, cs, _) = lstm_forward(&params, &xs.view(), &Array1::zeros(2), &c0).unwrap();
        // with zero weights g = tanh(0) = 0, so i * g = 0 and C is constant
        for t in 0..6 {
            for k in 0..2 {
                assert!((cs[[t, k]] - c0[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn scalar_hand_case_matches_step_by_step_evaluation() {
        // hidden = dim = 1 with hand-picked weights, two steps.
        let mut params = zero_params(2, 1, 1);
        params.w_forget = ndarray::arr2(&[[0.5, -0.3]]);
        params.w_input = ndarray::arr2(&[[-0.2, 0.7]]);
        params.w_cell = ndarray::arr2(&[[0.4, 0.6]]);
        params.w_output = ndarray::arr2(&[[0.1, -0.5]]);
        params.b_forget[0] = 0.1;
        params.b_input[0] = -0.2;
        params.b_cell[0] = 0.3;
        params.b_output[0] = 0.05;
        let xs = ndarray::arr2(&[[0.8], [-0.4]]);
        let (hs, cs, _) =
            lstm_forward(&params, &xs.view(), &Array1::zeros(1), &Array1::zeros(1)).unwrap();

        let mut h = 0.0f64;
        let mut c = 0.0f64;
        for t in 0..2 {
            let x: f64 = xs[[t, 0]];
            let f = sigmoid(0.5 * h - 0.3 * x + 0.1);
            let i = sigmoid(-0.2 * h + 0.7 * x - 0.2);
            let g = (0.4 * h + 0.6 * x + 0.3).tanh();
            let o = sigmoid(0.1 * h - 0.5 * x + 0.05);
            c = f * c + i * g;
            h = o * c.tanh();
            assert!((cs[[t, 0]] - c).abs() < 1e-12);
            assert!((hs[[t, 0]] - h).abs() < 1e-12);
        }
    }

    #[test]
    fn forced_gates_carry_cell_state_exactly() {
        // f = 1, i = 0 via large opposite biases: C_t = C_0 for all t.
        let mut params = zero_params(2, 1, 3);
        params.b_forget.fill(60.0);
        params.b_input.fill(-60.0);
        let xs = Array2::from_elem((8, 1), 0.7);
        let c0 = Array1::from(vec![0.3, -1.8, 2.2]);
        let (_, cs, _) = lstm_forward(&params, &xs.view(), &Array1::zeros(3), &c0).unwrap();
        for t in 0..8 {
            for k in 0..3 {
                assert_eq!(cs[[t, k]], c0[k]);
            }
        }
    }

    #[test]
    fn param_count_matches_formula() {
        let params = zero_params(7, 3, 4);
        // 4 * h * (h + d + 1) + V * h + V
        assert_eq!(params.param_count(), 4 * 4 * (4 + 3 + 1) + 7 * 4 + 7);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let params = zero_params(3, 2, 2);
        let xs = Array2::zeros((4, 9));
        assert!(
            lstm_forward(&params, &xs.view(), &Array1::zeros(2), &Array1::zeros(2)).is_err()
        );
    }
}
