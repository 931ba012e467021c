//! Vanilla recurrent cell: `s_t = tanh(W_in x_t + W_rec s_{t-1} + b_h)` with
//! a linear projection to per-node logits.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::init_uniform;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RnnParams {
    /// hidden x dim, input-to-hidden.
    pub w_in: Array2<f64>,
    /// hidden x hidden, hidden-to-hidden.
    pub w_rec: Array2<f64>,
    /// vocab x hidden, hidden-to-logits.
    pub w_out: Array2<f64>,
    pub b_h: Array1<f64>,
    pub b_out: Array1<f64>,
    pub use_bias: bool,
}

/// Cached forward activations for backpropagation through time.
#[derive(Debug, Clone)]
pub struct RnnTrace {
    /// T x hidden, s_t per step.
    pub states: Array2<f64>,
    /// T x hidden, s_{t-1} per step (row 0 is the initial state).
    pub prev_states: Array2<f64>,
}

impl RnnParams {
    pub fn init(vocab: usize, dim: usize, hidden: usize, use_bias: bool, rng: &mut impl Rng) -> RnnParams {
        RnnParams {
            w_in: init_uniform((hidden, dim), dim, rng),
            w_rec: init_uniform((hidden, hidden), hidden, rng),
            w_out: init_uniform((vocab, hidden), hidden, rng),
            b_h: Array1::zeros(hidden),
            b_out: Array1::zeros(vocab),
            use_bias,
        }
    }

    pub fn zeros_like(&self) -> RnnParams {
        RnnParams {
            w_in: Array2::zeros(self.w_in.raw_dim()),
            w_rec: Array2::zeros(self.w_rec.raw_dim()),
            w_out: Array2::zeros(self.w_out.raw_dim()),
            b_h: Array1::zeros(self.b_h.raw_dim()),
            b_out: Array1::zeros(self.b_out.raw_dim()),
            use_bias: self.use_bias,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w_rec.nrows()
    }

    pub fn input_size(&self) -> usize {
        self.w_in.ncols()
    }

    pub fn vocab_size(&self) -> usize {
        self.w_out.nrows()
    }

    pub fn check_input(&self, xs: &ArrayView2<'_, f64>, s0: &Array1<f64>) -> Result<()> {
        if xs.ncols() != self.input_size() {
            return Err(Error::dimension(format!(
                "input rows have {} columns, cell expects {}",
                xs.ncols(),
                self.input_size()
            )));
        }
        if s0.len() != self.hidden_size() {
            return Err(Error::dimension(format!(
                "initial state has {} entries, cell expects {}",
                s0.len(),
                self.hidden_size()
            )));
        }
        Ok(())
    }

    /// Runs the recurrence, caching everything backward needs.
    pub fn forward_trace(&self, xs: &ArrayView2<'_, f64>, s0: &Array1<f64>) -> RnnTrace {
        let steps = xs.nrows();
        let hidden = self.hidden_size();
        // input contributions for all steps at once
        let mut pre = xs.dot(&self.w_in.t());
        if self.use_bias {
            pre += &self.b_h;
        }
        let mut states = Array2::zeros((steps, hidden));
        let mut prev_states = Array2::zeros((steps, hidden));
        let mut state = s0.clone();
        for t in 0..steps {
            prev_states.row_mut(t).assign(&state);
            let act = &pre.row(t) + &self.w_rec.dot(&state);
            state = act.mapv(f64::tanh);
            states.row_mut(t).assign(&state);
        }
        RnnTrace {
            states,
            prev_states,
        }
    }

    /// Exact gradients given `d_states_direct` = dL/ds_t from the logit path.
    /// Returns cell gradients (projection excluded) and dL/dx_t.
    pub fn backward_trace(
        &self,
        xs: &ArrayView2<'_, f64>,
        trace: &RnnTrace,
        d_states_direct: &Array2<f64>,
    ) -> (RnnParams, Array2<f64>) {
        let steps = xs.nrows();
        let hidden = self.hidden_size();
        let mut d_acts = Array2::zeros((steps, hidden));
        let mut carry: Array1<f64> = Array1::zeros(hidden);
        for t in (0..steps).rev() {
            let ds = &d_states_direct.row(t) + &carry;
            let s = trace.states.row(t);
            let da = ndarray::Zip::from(&ds)
                .and(&s)
                .map_collect(|&ds, &s| ds * (1.0 - s * s));
            carry = self.w_rec.t().dot(&da);
            d_acts.row_mut(t).assign(&da);
        }
        let mut grads = self.zeros_like();
        grads.w_in = d_acts.t().dot(xs);
        grads.w_rec = d_acts.t().dot(&trace.prev_states);
        if self.use_bias {
            grads.b_h = d_acts.sum_axis(Axis(0));
        }
        let dxs = d_acts.dot(&self.w_in);
        (grads, dxs)
    }
}

/// Forward pass: hidden states and per-step logits (softmax is applied by
/// the loss). `s0` is the initial hidden state, typically zeros.
pub fn rnn_forward(
    params: &RnnParams,
    xs: &ArrayView2<'_, f64>,
    s0: &Array1<f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    params.check_input(xs, s0)?;
    let trace = params.forward_trace(xs, s0);
    let mut logits = trace.states.dot(&params.w_out.t());
    if params.use_bias {
        logits += &params.b_out;
    }
    Ok((trace.states, logits))
}

/// Full BPTT for the RNN path: gradients for every parameter block plus
/// dL/dx_t for the embedding rows. `dlogits` is dL/do_t from the loss.
pub fn rnn_backward(
    params: &RnnParams,
    xs: &ArrayView2<'_, f64>,
    trace: &RnnTrace,
    dlogits: &Array2<f64>,
) -> Result<(RnnParams, Array2<f64>)> {
    if dlogits.nrows() != xs.nrows() {
        return Err(Error::dimension(format!(
            "{} logit rows for {} input steps",
            dlogits.nrows(),
            xs.nrows()
        )));
    }
    let d_states_direct = dlogits.dot(&params.w_out);
    let (mut grads, dxs) = params.backward_trace(xs, trace, &d_states_direct);
    grads.w_out = dlogits.t().dot(&trace.states);
    if params.use_bias {
        grads.b_out = dlogits.sum_axis(Axis(0));
    }
    Ok((grads, dxs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn zero_params(vocab: usize, dim: usize, hidden: usize) -> RnnParams {
        RnnParams {
            w_in: Array2::zeros((hidden, dim)),
            w_rec: Array2::zeros((hidden, hidden)),
            w_out: Array2::zeros((vocab, hidden)),
            b_h: Array1::zeros(hidden),
            b_out: Array1::zeros(vocab),
            use_bias: true,
        }
    }

    #[test]
    fn zero_params_give_zero_states_and_uniform_softmax() {
        let params = zero_params(4, 3, 2);
        let xs = Array2::zeros((5, 3));
        let (states, logits) = rnn_forward(&params, &xs.view(), &Array1::zeros(2)).unwrap();
        assert!(states.iter().all(|&s| s == 0.0));
        assert!(logits.iter().all(|&o| o == 0.0));
    }

    #[test]
    fn scalar_hand_case() {
        // d = hidden = 1, w_in = [1], w_rec = [0], no bias effect: s = tanh(x)
        let mut params = zero_params(2, 1, 1);
        params.w_in[[0, 0]] = 1.0;
        let xs = arr2(&[[0.5]]);
        let (states, _) = rnn_forward(&params, &xs.view(), &Array1::zeros(1)).unwrap();
        assert!((states[[0, 0]] - 0.5f64.tanh()).abs() < 1e-12);
        assert!((states[[0, 0]] - 0.46211715726000974).abs() < 1e-10);
    }

    #[test]
    fn no_recurrence_makes_states_permutation_equivariant() {
        let mut params = zero_params(3, 2, 2);
        params.w_in = arr2(&[[0.3, -0.2], [0.1, 0.8]]);
        params.b_h = Array1::from(vec![0.05, -0.1]);
        let xs = arr2(&[[1.0, 2.0], [-0.5, 0.3], [0.2, 0.9]]);
        let perm = [2usize, 0, 1];
        let xs_perm = arr2(&[[0.2, 0.9], [1.0, 2.0], [-0.5, 0.3]]);
        let (s, _) = rnn_forward(&params, &xs.view(), &Array1::zeros(2)).unwrap();
        let (sp, _) = rnn_forward(&params, &xs_perm.view(), &Array1::zeros(2)).unwrap();
        for (i, &j) in perm.iter().enumerate() {
            for k in 0..2 {
                assert!((sp[[i, k]] - s[[j, k]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let params = zero_params(3, 2, 2);
        let xs = Array2::zeros((4, 5));
        assert!(rnn_forward(&params, &xs.view(), &Array1::zeros(2)).is_err());
        let xs = Array2::zeros((4, 2));
        assert!(rnn_forward(&params, &xs.view(), &Array1::zeros(7)).is_err());
    }

    #[test]
    fn zero_dlogits_give_zero_grads() {
        let mut params = zero_params(3, 2, 2);
        params.w_in = arr2(&[[0.3, -0.2], [0.1, 0.8]]);
        params.w_rec = arr2(&[[0.2, 0.1], [-0.3, 0.4]]);
        let xs = arr2(&[[1.0, 2.0], [-0.5, 0.3]]);
        let trace = params.forward_trace(&xs.view(), &Array1::zeros(2));
        let dlogits = Array2::zeros((2, 3));
        let (grads, dxs) = rnn_backward(&params, &xs.view(), &trace, &dlogits).unwrap();
        assert!(grads.w_in.iter().all(|&g| g == 0.0));
        assert!(grads.w_rec.iter().all(|&g| g == 0.0));
        assert!(grads.w_out.iter().all(|&g| g == 0.0));
        assert!(dxs.iter().all(|&g| g == 0.0));
    }
}
