use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::topology::{Activation, NetworkTopology};
use super::NetworkError;
use crate::scalar::Scalar;

/// Half-width of the uniform interval used by [`ModelParams::init_random`].
pub const INIT_RANGE: f64 = 0.1;

/// Weights and biases of a masked two-layer network.
///
/// Hidden weights are stored densely (`m × k`, row-major); entries outside
/// the topology's mask are zero and no public method can change that.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<S> {
    topology: NetworkTopology,
    hidden_weights: Vec<S>,
    hidden_bias: Vec<S>,
    output_weights: Vec<S>,
    output_bias: S,
    seed: Option<u64>,
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct Forward<S> {
    pub pre_activation: Vec<S>,
    pub hidden: Vec<S>,
    pub output_pre: S,
    pub output: S,
}

fn activate<S: Scalar>(a: Activation, z: S) -> S {
    match a {
        Activation::Sigmoid => z.sigmoid(),
        Activation::Identity => z,
    }
}

/// Derivative expressed through the activation's output value.
fn activate_slope<S: Scalar>(a: Activation, out: S) -> S {
    match a {
        Activation::Sigmoid => out * (S::one() - out),
        Activation::Identity => S::one(),
    }
}

impl<S: Scalar> ModelParams<S> {
    pub fn zeros(topology: NetworkTopology) -> Self {
        let m = topology.hidden_size();
        let k = topology.input_size();
        ModelParams {
            topology,
            hidden_weights: vec![S::zero(); m * k],
            hidden_bias: vec![S::zero(); m],
            output_weights: vec![S::zero(); m],
            output_bias: S::zero(),
            seed: None,
        }
    }

    /// Draws every free parameter i.i.d. from `U[-0.1, 0.1]` with a ChaCha
    /// generator seeded by `seed`. Same inputs give bit-identical output.
    pub fn init_random(topology: NetworkTopology, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Self::zeros(topology);
        let free: Vec<S> = (0..params.free_len())
            .map(|_| S::of(rng.gen_range(-INIT_RANGE..=INIT_RANGE)))
            .collect();
        params.set_free_params(&free);
        params.seed = Some(seed);
        params
    }

    /// Builds parameters from dense arrays, rejecting non-zero values at
    /// masked positions.
    pub fn from_parts(
        topology: NetworkTopology,
        hidden_weights: Vec<S>,
        hidden_bias: Vec<S>,
        output_weights: Vec<S>,
        output_bias: S,
    ) -> Result<Self, NetworkError> {
        let m = topology.hidden_size();
        let k = topology.input_size();
        let check = |what: &'static str, expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(NetworkError::ShapeMismatch { what, expected, found })
            }
        };
        check("hidden weights", m * k, hidden_weights.len())?;
        check("hidden biases", m, hidden_bias.len())?;
        check("output weights", m, output_weights.len())?;
        for j in 0..m {
            for i in 0..k {
                if !topology.is_connected(j, i) && hidden_weights[j * k + i] != S::zero() {
                    return Err(NetworkError::MaskedWeight { hidden: j, input: i });
                }
            }
        }
        Ok(ModelParams {
            topology,
            hidden_weights,
            hidden_bias,
            output_weights,
            output_bias,
            seed: None,
        })
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn set_seed(&mut self, seed: Option<u64>) {
        self.seed = seed;
    }

    pub fn input_size(&self) -> usize {
        self.topology.input_size()
    }

    pub fn hidden_size(&self) -> usize {
        self.topology.hidden_size()
    }

    pub fn hidden_weight(&self, hidden: usize, input: usize) -> S {
        self.hidden_weights[hidden * self.input_size() + input]
    }

    /// Dense `m × k` hidden weights, row-major.
    pub fn hidden_weights(&self) -> &[S] {
        &self.hidden_weights
    }

    pub fn hidden_bias(&self) -> &[S] {
        &self.hidden_bias
    }

    pub fn output_weights(&self) -> &[S] {
        &self.output_weights
    }

    pub fn output_bias(&self) -> S {
        self.output_bias
    }

    /// Sets an unmasked hidden weight.
    pub fn set_hidden_weight(&mut self, hidden: usize, input: usize, value: S) -> Result<(), NetworkError> {
        if !self.topology.is_connected(hidden, input) {
            return Err(NetworkError::MaskedWeight { hidden, input });
        }
        let k = self.input_size();
        self.hidden_weights[hidden * k + input] = value;
        Ok(())
    }

    pub fn set_hidden_bias(&mut self, hidden: usize, value: S) {
        self.hidden_bias[hidden] = value;
    }

    pub fn set_output_weight(&mut self, hidden: usize, value: S) {
        self.output_weights[hidden] = value;
    }

    pub fn set_output_bias(&mut self, value: S) {
        self.output_bias = value;
    }

    /// Number of free (unmasked) parameters.
    pub fn free_len(&self) -> usize {
        self.topology.parameter_count()
    }

    /// Free parameters in a fixed layout: unmasked hidden weights row by
    /// row, hidden biases, output weights, output bias.
    pub fn free_params(&self) -> Vec<S> {
        let k = self.input_size();
        let mut out = Vec::with_capacity(self.free_len());
        for (j, row) in self.topology.rows().iter().enumerate() {
            out.extend(row.iter().map(|&i| self.hidden_weights[j * k + i]));
        }
        out.extend_from_slice(&self.hidden_bias);
        out.extend_from_slice(&self.output_weights);
        out.push(self.output_bias);
        out
    }

    /// Inverse of [`ModelParams::free_params`]. Masked entries stay zero.
    pub fn set_free_params(&mut self, values: &[S]) {
        assert_eq!(values.len(), self.free_len(), "free parameter length");
        let k = self.input_size();
        let m = self.hidden_size();
        let mut it = values.iter().copied();
        for j in 0..m {
            for idx in 0..self.topology.row(j).len() {
                let i = self.topology.row(j)[idx];
                self.hidden_weights[j * k + i] = it.next().unwrap();
            }
        }
        for b in &mut self.hidden_bias {
            *b = it.next().unwrap();
        }
        for w in &mut self.output_weights {
            *w = it.next().unwrap();
        }
        self.output_bias = it.next().unwrap();
    }

    /// Same topology, new free parameters.
    pub fn with_free_params(&self, values: &[S]) -> Self {
        let mut p = Self::zeros(self.topology.clone());
        p.set_free_params(values);
        p
    }

    /// Sum of absolute values of all free parameters.
    pub fn l1_norm(&self) -> S {
        self.free_params().iter().map(|v| v.abs()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.free_params().iter().all(|v| v.is_finite())
    }

    fn check_input(&self, x: &[S]) -> Result<(), NetworkError> {
        if x.len() != self.input_size() {
            return Err(NetworkError::DimensionMismatch {
                expected: self.input_size(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[S]) -> Result<Forward<S>, NetworkError> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[S]) -> Forward<S> {
        let k = self.input_size();
        let hidden_act = self.topology.hidden_activation();
        let mut pre_activation = Vec::with_capacity(self.hidden_size());
        let mut hidden = Vec::with_capacity(self.hidden_size());
        let mut output_pre = self.output_bias;
        for (j, row) in self.topology.rows().iter().enumerate() {
            let w = &self.hidden_weights[j * k..(j + 1) * k];
            let mut z = self.hidden_bias[j];
            for &i in row {
                z += w[i] * x[i];
            }
            let a = activate(hidden_act, z);
            output_pre += self.output_weights[j] * a;
            pre_activation.push(z);
            hidden.push(a);
        }
        Forward {
            pre_activation,
            hidden,
            output_pre,
            output: activate(self.topology.output_activation(), output_pre),
        }
    }

    /// Network score of one feature vector.
    pub fn score(&self, x: &[S]) -> Result<S, NetworkError> {
        self.check_input(x)?;
        Ok(self.score_unchecked(x))
    }

    pub(crate) fn score_unchecked(&self, x: &[S]) -> S {
        let k = self.input_size();
        let hidden_act = self.topology.hidden_activation();
        let mut out = self.output_bias;
        for (j, row) in self.topology.rows().iter().enumerate() {
            let w = &self.hidden_weights[j * k..(j + 1) * k];
            let mut z = self.hidden_bias[j];
            for &i in row {
                z += w[i] * x[i];
            }
            out += self.output_weights[j] * activate(hidden_act, z);
        }
        activate(self.topology.output_activation(), out)
    }

    /// Adds `scale · ∂score/∂θ` to `grad` (free-parameter layout) and
    /// returns the score.
    pub fn accumulate_score_gradient(&self, x: &[S], scale: S, grad: &mut [S]) -> S {
        debug_assert_eq!(grad.len(), self.free_len());
        let f = self.forward_unchecked(x);
        let m = self.hidden_size();
        let out_slope = activate_slope(self.topology.output_activation(), f.output) * scale;
        let hidden_act = self.topology.hidden_activation();

        let weights_len = self.topology.hidden_weight_count();
        let (w_grad, rest) = grad.split_at_mut(weights_len);
        let (hb_grad, rest) = rest.split_at_mut(m);
        let (ow_grad, ob_grad) = rest.split_at_mut(m);

        ob_grad[0] += out_slope;
        let mut offset = 0;
        for (j, row) in self.topology.rows().iter().enumerate() {
            ow_grad[j] += out_slope * f.hidden[j];
            let delta = out_slope * self.output_weights[j] * activate_slope(hidden_act, f.hidden[j]);
            hb_grad[j] += delta;
            for (slot, &i) in row.iter().enumerate() {
                w_grad[offset + slot] += delta * x[i];
            }
            offset += row.len();
        }
        f.output
    }
}

/// Hinge term `max(s(worse) - s(better) + 1, 0)` and its gradient.
///
/// The gradient has the same shape as `params` with zeros at masked
/// positions. When the hinge is inactive (including the kink itself) the
/// gradient is zero.
pub fn backprop_pair<S: Scalar>(
    params: &ModelParams<S>,
    better: &[S],
    worse: &[S],
) -> Result<(S, ModelParams<S>), NetworkError> {
    params.check_input(better)?;
    params.check_input(worse)?;
    let mut grad = vec![S::zero(); params.free_len()];
    let loss = super::accumulate_pair_gradient(params, better, worse, S::one(), &mut grad);
    Ok((loss, params.with_free_params(&grad)))
}
