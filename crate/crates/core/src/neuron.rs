//! Leaky integrate-and-fire dynamics with reset by subtraction.
//!
//! First order:
//!
//! ```text
//! U[t+1] = beta * U[t] + I_in[t+1] - R * U_thr
//! ```
//!
//! Second order routes the input through a decaying synaptic current first:
//!
//! ```text
//! I_syn[t+1] = alpha * I_syn[t] + I_in[t+1]
//! U[t+1]     = beta * U[t] + I_syn[t+1] - R * U_thr
//! ```
//!
//! `R` is 1 when the neuron spiked on the previous step. A spike is emitted
//! when the new potential is strictly above threshold. The potential is
//! never clamped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeuronOrder {
    First,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifParams {
    /// Membrane decay.
    pub beta: f64,
    /// Synaptic decay, second order only.
    pub alpha: f64,
    pub threshold: f64,
    pub order: NeuronOrder,
    /// Steepness of the fast-sigmoid surrogate.
    pub surrogate_slope: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        Self {
            beta: 0.9,
            alpha: 0.9,
            threshold: 1.0,
            order: NeuronOrder::First,
            surrogate_slope: 25.0,
        }
    }
}

impl LifParams {
    pub fn first_order(beta: f64) -> Self {
        Self {
            beta,
            alpha: beta,
            ..Self::default()
        }
    }

    /// Second order with `alpha` initialised to `beta`.
    pub fn second_order(beta: f64) -> Self {
        Self {
            beta,
            alpha: beta,
            order: NeuronOrder::Second,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!("beta {} outside (0, 1)", self.beta)));
        }
        if self.order == NeuronOrder::Second && !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        if !(self.threshold > 0.0) || !self.threshold.is_finite() {
            return Err(Error::Config("threshold must be positive".into()));
        }
        if !(self.surrogate_slope > 0.0) || !self.surrogate_slope.is_finite() {
            return Err(Error::Config("surrogate slope must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LifState {
    pub u: Vec<f64>,
    /// Synaptic currents; all zero and unused for first-order neurons.
    pub i_syn: Vec<f64>,
    pub spiked_prev: Vec<bool>,
}

impl LifState {
    pub fn zeros(n: usize) -> Self {
        Self {
            u: vec![0.0; n],
            i_syn: vec![0.0; n],
            spiked_prev: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// One neuron update. Returns the new `(U, I_syn)`.
#[inline]
pub(crate) fn integrate(
    order: NeuronOrder,
    beta: f64,
    alpha: f64,
    threshold: f64,
    u: f64,
    i_syn: f64,
    input: f64,
    reset: f64,
) -> (f64, f64) {
    match order {
        NeuronOrder::First => (beta * u + input - reset * threshold, 0.0),
        NeuronOrder::Second => {
            let i = alpha * i_syn + input;
            (beta * u + i - reset * threshold, i)
        }
    }
}

/// Advances a layer of neurons by one step.
pub fn lif_step(
    state: &LifState,
    input: &[f64],
    params: &LifParams,
) -> Result<(LifState, Vec<bool>)> {
    let n = state.len();
    if input.len() != n || state.i_syn.len() != n || state.spiked_prev.len() != n {
        return Err(Error::Shape(format!(
            "state width {n} vs input width {}",
            input.len()
        )));
    }
    if input
        .iter()
        .chain(&state.u)
        .chain(&state.i_syn)
        .any(|x| !x.is_finite())
    {
        return Err(Error::Precondition(
            "non-finite neuron input or state".into(),
        ));
    }
    let mut next = LifState::zeros(n);
    for k in 0..n {
        let (u, i) = integrate(
            params.order,
            params.beta,
            params.alpha,
            params.threshold,
            state.u[k],
            state.i_syn[k],
            input[k],
            if state.spiked_prev[k] { 1.0 } else { 0.0 },
        );
        next.u[k] = u;
        next.i_syn[k] = i;
        next.spiked_prev[k] = u > params.threshold;
    }
    let spikes = next.spiked_prev.clone();
    Ok((next, spikes))
}

/// Fast-sigmoid surrogate for d(spike)/dU: `1 / (1 + k|U - U_thr|)^2`.
pub fn surrogate_grad(u: f64, params: &LifParams) -> f64 {
    surrogate(u - params.threshold, params.surrogate_slope)
}

#[inline]
pub(crate) fn surrogate(v: f64, slope: f64) -> f64 {
    let d = 1.0 + slope * v.abs();
    1.0 / (d * d)
}

/// Smooth stand-in for the spike: `0.5 (1 + k v / (1 + k|v|))`, in `(0, 1)`.
#[inline]
pub fn relaxed_spike(v: f64, slope: f64) -> f64 {
    0.5 * (1.0 + slope * v / (1.0 + slope * v.abs()))
}

/// Exact derivative of [`relaxed_spike`], `k/2` times the surrogate.
#[inline]
pub fn relaxed_spike_grad(v: f64, slope: f64) -> f64 {
    0.5 * slope * surrogate(v, slope)
}
