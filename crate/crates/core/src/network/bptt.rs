//! Time-unrolled forward pass and its reverse sweep.
//!
//! The forward pass runs one layer at a time over the whole spike train
//! (layers only feed forward, so this is equivalent to stepping all layers
//! together) and records currents, potentials and outputs on a tape. The
//! backward pass walks the tape from the output layer down, and within a
//! layer from the last step to the first:
//!
//! ```text
//! dL/dU[t] = dL/dO[t] * phi'(U[t] - U_thr) + beta * dL/dU[t+1]
//! dL/dI[t] = dL/dU[t] + alpha * dL/dI[t+1]          (second order)
//! ```
//!
//! The reset gate is always the hard spike `U > U_thr` and carries no
//! gradient. In [`Mode::Surrogate`] the output is that same hard spike and
//! `phi'` is the fast-sigmoid surrogate. In [`Mode::Relaxed`] the output is
//! the smooth fast sigmoid and `phi'` its true derivative; the reset is then
//! piecewise constant, so the gradient is exact wherever no potential sits
//! on the threshold, and can be checked against finite differences.

use ndarray::Array2;

use super::{Network, NetworkParams};
use crate::encoding::SpikeTrain;
use crate::error::{Error, Result};
use crate::neuron::{integrate, relaxed_spike, relaxed_spike_grad, surrogate, NeuronOrder};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Hard threshold forward, surrogate derivative backward.
    Surrogate,
    /// Smooth fast-sigmoid output with its exact derivative.
    Relaxed,
}

/// Per-layer record of one forward pass. Buffers are step-major `[S × width]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTape {
    pub mode: Mode,
    pub steps: usize,
    /// Input to the first layer.
    pub input: Vec<f64>,
    pub currents: Vec<Vec<f64>>,
    pub membrane: Vec<Vec<f64>>,
    /// Synaptic currents; empty for first-order neurons.
    pub synaptic: Vec<Vec<f64>>,
    pub spikes: Vec<Vec<f64>>,
    shapes: Vec<(usize, usize)>,
    fingerprint: u64,
}

impl ForwardTape {
    pub fn output_width(&self) -> usize {
        self.shapes.last().map_or(0, |s| s.1)
    }

    /// Output of the last layer, `[S × out]` step-major.
    pub fn output(&self) -> &[f64] {
        self.spikes.last().map_or(&[], |v| v.as_slice())
    }

    /// Output as a channel-major `[out × S]` array.
    pub fn output_array(&self) -> Array2<f64> {
        let n = self.output_width();
        Array2::from_shape_fn((n, self.steps), |(c, s)| self.output()[s * n + c])
    }

    /// Output as a spike raster; relaxed outputs are thresholded at 0.5.
    pub fn output_spikes(&self, exposure: usize, polarity_doubled: bool) -> Result<SpikeTrain> {
        let n = self.output_width();
        let base = if polarity_doubled { n / 2 } else { n };
        let bits = self.output_array().mapv(|x| u8::from(x > 0.5));
        SpikeTrain::from_bits(bits, exposure, base, polarity_doubled)
    }

    /// Number of stored values; grows linearly with the step count.
    pub fn stored_values(&self) -> usize {
        self.input.len()
            + [&self.currents, &self.membrane, &self.synaptic, &self.spikes]
                .iter()
                .flat_map(|v| v.iter())
                .map(Vec::len)
                .sum::<usize>()
    }
}

fn transpose(w: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; w.len()];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = w[i * cols + j];
        }
    }
    t
}

impl Network {
    /// Runs the network over a spike train from a zero state.
    pub fn forward(&self, input: &SpikeTrain, mode: Mode) -> Result<ForwardTape> {
        if input.channels() != self.spec.input_width {
            return Err(Error::Width(format!(
                "input has {} channels, network expects {}",
                input.channels(),
                self.spec.input_width
            )));
        }
        let steps = input.steps();
        let c = input.channels();
        let mut x = vec![0.0; steps * c];
        for ((ch, s), &b) in input.bits.indexed_iter() {
            x[s * c + ch] = b as f64;
        }
        self.forward_dense(x, steps, mode)
    }

    /// Forward pass over a real-valued step-major input `[S × in]`.
    pub fn forward_dense(&self, input: Vec<f64>, steps: usize, mode: Mode) -> Result<ForwardTape> {
        let p = &self.params;
        let nrn = &self.spec.neuron;
        let (thr, slope) = (nrn.threshold, nrn.surrogate_slope);
        let shapes: Vec<_> = (0..p.num_layers()).map(|l| p.shape(l)).collect();
        if input.len() != steps * shapes[0].0 {
            return Err(Error::Width("input length does not match width".into()));
        }
        let mut tape = ForwardTape {
            mode,
            steps,
            input,
            currents: Vec::new(),
            membrane: Vec::new(),
            synaptic: Vec::new(),
            spikes: Vec::new(),
            shapes: shapes.clone(),
            fingerprint: p.fingerprint(),
        };
        for (l, &(n_in, n_out)) in shapes.iter().enumerate() {
            let wt = transpose(p.weights(l), n_out, n_in);
            let bias = p.bias(l);
            let (beta, alpha) = (p.beta(l), p.alpha(l));
            let x = if l == 0 {
                &tape.input
            } else {
                &tape.spikes[l - 1]
            };
            let mut cur = vec![0.0; steps * n_out];
            let mut mem = vec![0.0; steps * n_out];
            let mut syn = if nrn.order == NeuronOrder::Second {
                vec![0.0; steps * n_out]
            } else {
                Vec::new()
            };
            let mut out = vec![0.0; steps * n_out];
            let mut u = vec![0.0; n_out];
            let mut isyn = vec![0.0; n_out];
            let mut reset = vec![0.0; n_out];
            for s in 0..steps {
                let c = &mut cur[s * n_out..(s + 1) * n_out];
                c.copy_from_slice(bias);
                for (j, &xj) in x[s * n_in..(s + 1) * n_in].iter().enumerate() {
                    if xj != 0.0 {
                        let col = &wt[j * n_out..(j + 1) * n_out];
                        for (ci, &w) in c.iter_mut().zip(col) {
                            *ci += w * xj;
                        }
                    }
                }
                for k in 0..n_out {
                    let (nu, ni) =
                        integrate(nrn.order, beta, alpha, thr, u[k], isyn[k], c[k], reset[k]);
                    u[k] = nu;
                    isyn[k] = ni;
                    let fired = f64::from(u8::from(nu > thr));
                    let o = match mode {
                        Mode::Surrogate => fired,
                        Mode::Relaxed => relaxed_spike(nu - thr, slope),
                    };
                    reset[k] = fired;
                    mem[s * n_out + k] = nu;
                    if !syn.is_empty() {
                        syn[s * n_out + k] = ni;
                    }
                    out[s * n_out + k] = o;
                }
            }
            tape.currents.push(cur);
            tape.membrane.push(mem);
            tape.synaptic.push(syn);
            tape.spikes.push(out);
        }
        Ok(tape)
    }

    /// Gradients of a loss given `dL/d(output)` as a channel-major `[out × S]`
    /// array.
    pub fn backward(&self, tape: &ForwardTape, grad_out: &Array2<f64>) -> Result<NetworkParams> {
        let p = &self.params;
        let shapes: Vec<_> = (0..p.num_layers()).map(|l| p.shape(l)).collect();
        if tape.shapes != shapes || tape.fingerprint != p.fingerprint() {
            return Err(Error::StaleTape(
                "tape was recorded with different parameters".into(),
            ));
        }
        let steps = tape.steps;
        let n_top = tape.output_width();
        if grad_out.dim() != (n_top, steps) {
            return Err(Error::Shape(format!(
                "output gradient {:?} vs output {:?}",
                grad_out.dim(),
                (n_top, steps)
            )));
        }
        let nrn = &self.spec.neuron;
        let (thr, slope) = (nrn.threshold, nrn.surrogate_slope);
        let second = nrn.order == NeuronOrder::Second;
        let relaxed = tape.mode == Mode::Relaxed;
        let mut grads = p.zeros_like();

        // dL/dO for the current layer, step-major
        let mut g_out = vec![0.0; steps * n_top];
        for ((c, s), &g) in grad_out.indexed_iter() {
            g_out[s * n_top + c] = g;
        }

        for l in (0..shapes.len()).rev() {
            let (n_in, n_out) = shapes[l];
            let (beta, alpha) = (p.beta(l), p.alpha(l));
            let wt = transpose(p.weights(l), n_out, n_in);
            let x = if l == 0 {
                &tape.input
            } else {
                &tape.spikes[l - 1]
            };
            let mem = &tape.membrane[l];
            let syn = &tape.synaptic[l];
            let mut g_wt = vec![0.0; n_in * n_out];
            let mut g_b = vec![0.0; n_out];
            let (mut g_beta, mut g_alpha) = (0.0, 0.0);
            let mut g_x = if l > 0 {
                vec![0.0; steps * n_in]
            } else {
                Vec::new()
            };
            let mut gu_next = vec![0.0; n_out];
            let mut gi_next = vec![0.0; n_out];
            let mut gc = vec![0.0; n_out];
            for s in (0..steps).rev() {
                for k in 0..n_out {
                    let go = g_out[s * n_out + k];
                    let v = mem[s * n_out + k] - thr;
                    let dphi = if relaxed {
                        relaxed_spike_grad(v, slope)
                    } else {
                        surrogate(v, slope)
                    };
                    let gu = go * dphi + beta * gu_next[k];
                    if s > 0 {
                        g_beta += gu * mem[(s - 1) * n_out + k];
                    }
                    let g_cur = if second {
                        let gi = gu + alpha * gi_next[k];
                        if s > 0 {
                            g_alpha += gi * syn[(s - 1) * n_out + k];
                        }
                        gi_next[k] = gi;
                        gi
                    } else {
                        gu
                    };
                    gu_next[k] = gu;
                    gc[k] = g_cur;
                    g_b[k] += g_cur;
                }
                let xs = &x[s * n_in..(s + 1) * n_in];
                for (j, &xj) in xs.iter().enumerate() {
                    if xj != 0.0 {
                        let row = &mut g_wt[j * n_out..(j + 1) * n_out];
                        for (r, &g) in row.iter_mut().zip(&gc) {
                            *r += g * xj;
                        }
                    }
                }
                if l > 0 {
                    let gx = &mut g_x[s * n_in..(s + 1) * n_in];
                    for (j, gxj) in gx.iter_mut().enumerate() {
                        let col = &wt[j * n_out..(j + 1) * n_out];
                        *gxj = col.iter().zip(&gc).map(|(w, g)| w * g).sum();
                    }
                }
            }
            grads
                .weights_mut(l)
                .copy_from_slice(&transpose(&g_wt, n_in, n_out));
            grads.bias_mut(l).copy_from_slice(&g_b);
            *grads.beta_logit_mut(l) = g_beta * beta * (1.0 - beta);
            *grads.alpha_logit_mut(l) = if second {
                g_alpha * alpha * (1.0 - alpha)
            } else {
                0.0
            };
            g_out = g_x;
        }
        Ok(grads)
    }
}
