//! The learned update rule: a small fully-connected network with tanh
//! hidden layers and a linear output, exact reverse-mode gradients with
//! respect to every weight and bias, and Adam state over the flattened
//! parameter vector.

use rand::Rng;

use crate::baselines::{adam_step, AdamState};
use crate::error::{Error, Result};

/// Output-layer weights are shrunk at init so the first precoder updates
/// stay close to V_0.
pub const FINAL_LAYER_INIT_SCALE: f64 = 1e-2;

/// Feed-forward network G_theta. Layer `l` maps `dims[l] -> dims[l+1]`;
/// parameters flatten layer by layer, each weight matrix row-major and then
/// its bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateNet {
    dims: Vec<usize>,
    weights: Vec<Vec<f64>>, // weights[l]: dims[l+1] x dims[l], row-major
    biases: Vec<Vec<f64>>,
    theta_adam: AdamState,
}

/// Intermediate activations retained from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTape {
    input: Vec<f64>,
    /// tanh outputs of each hidden layer, in order.
    hidden: Vec<Vec<f64>>,
}

/// Parses a hidden-layer spec such as "40,40" (two hidden layers of 40
/// units). An empty string means no hidden layer, i.e. a single linear map.
pub fn parse_hidden_spec(spec: &str) -> Result<Vec<usize>> {
    let trimmed = spec.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    trimmed
        .split(',')
        .map(|tok| {
            let n: usize = tok
                .trim()
                .parse()
                .map_err(|_| Error::Usage(format!("bad hidden-layer size `{tok}` in `{spec}`")))?;
            if n == 0 {
                return Err(Error::Usage("hidden layers need at least one unit".into()));
            }
            Ok(n)
        })
        .collect()
}

/// Full layer-dimension chain for an update net with the given I/O width.
pub fn layer_dims(io_dim: usize, hidden: &[usize]) -> Vec<usize> {
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(io_dim);
    dims.extend_from_slice(hidden);
    dims.push(io_dim);
    dims
}

impl UpdateNet {
    /// Random initialization: Glorot-uniform hidden weights, output weights
    /// scaled down by [`FINAL_LAYER_INIT_SCALE`], all biases zero, fresh
    /// Adam state with learning rate `theta_lr`.
    pub fn init(dims: &[usize], theta_lr: f64, rng: &mut impl Rng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        if dims.contains(&0) {
            return Err(Error::Config("zero-width layer".into()));
        }
        if !theta_lr.is_finite() || theta_lr <= 0.0 {
            return Err(Error::Config(format!(
                "theta learning rate must be positive, got {theta_lr}"
            )));
        }
        let layers = dims.len() - 1;
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for l in 0..layers {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let scale = if l == layers - 1 {
                FINAL_LAYER_INIT_SCALE
            } else {
                1.0
            };
            let w = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..=limit) * scale)
                .collect();
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        let param_count = weights.iter().map(Vec::len).sum::<usize>()
            + biases.iter().map(Vec::len).sum::<usize>();
        Ok(Self {
            dims: dims.to_vec(),
            weights,
            biases,
            theta_adam: AdamState::new(param_count, theta_lr),
        })
    }

    /// Builds a net from explicit parameters (used by tests and tools).
    pub fn from_parts(
        dims: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
        theta_lr: f64,
    ) -> Result<Self> {
        if dims.len() < 2 || weights.len() != dims.len() - 1 || biases.len() != dims.len() - 1 {
            return Err(Error::Config("layer count mismatch".into()));
        }
        for l in 0..weights.len() {
            if weights[l].len() != dims[l] * dims[l + 1] || biases[l].len() != dims[l + 1] {
                return Err(Error::Config(format!("layer {l} shape mismatch")));
            }
        }
        let param_count = weights.iter().map(Vec::len).sum::<usize>()
            + biases.iter().map(Vec::len).sum::<usize>();
        Ok(Self {
            dims,
            weights,
            biases,
            theta_adam: AdamState::new(param_count, theta_lr),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.theta_adam.len()
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.biases[layer]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.weights[layer]
    }

    /// Flattened parameter vector in the documented order.
    pub fn theta(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.weights.len() {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
        out
    }

    /// Overwrites all parameters from a flat vector (inverse of `theta`).
    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "theta length {} vs parameter count {}",
                theta.len(),
                self.param_count()
            )));
        }
        let mut off = 0;
        for l in 0..self.weights.len() {
            let wl = self.weights[l].len();
            self.weights[l].copy_from_slice(&theta[off..off + wl]);
            off += wl;
            let bl = self.biases[l].len();
            self.biases[l].copy_from_slice(&theta[off..off + bl]);
            off += bl;
        }
        Ok(())
    }

    /// Forward pass; returns the output and the tape needed for
    /// [`backward_params`](Self::backward_params).
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardTape)> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input length {} vs d_0 = {}",
                input.len(),
                self.input_dim()
            )));
        }
        let layers = self.weights.len();
        let mut hidden = Vec::with_capacity(layers.saturating_sub(1));
        let mut act = input.to_vec();
        for l in 0..layers {
            let d_in = self.dims[l];
            let w = &self.weights[l];
            let mut z = self.biases[l].clone();
            for (i, zi) in z.iter_mut().enumerate() {
                let row = &w[i * d_in..(i + 1) * d_in];
                *zi += row.iter().zip(&act).map(|(wij, aj)| wij * aj).sum::<f64>();
            }
            if l + 1 < layers {
                for zi in z.iter_mut() {
                    *zi = zi.tanh();
                }
                hidden.push(z.clone());
            }
            act = z;
        }
        Ok((
            act,
            ForwardTape {
                input: input.to_vec(),
                hidden,
            },
        ))
    }

    /// Exact reverse-mode gradient of `<upstream, G_theta(x)>` with respect
    /// to every weight and bias, with the input treated as a constant.
    pub fn backward_params(&self, tape: &ForwardTape, upstream: &[f64]) -> Result<Vec<f64>> {
        let layers = self.weights.len();
        if upstream.len() != self.output_dim() {
            return Err(Error::Dimension(format!(
                "upstream length {} vs d_L = {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        if tape.input.len() != self.input_dim() || tape.hidden.len() != layers - 1 {
            return Err(Error::Dimension("tape does not match this network".into()));
        }
        for (l, h) in tape.hidden.iter().enumerate() {
            if h.len() != self.dims[l + 1] {
                return Err(Error::Dimension("tape does not match this network".into()));
            }
        }

        let mut grad_w: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut grad_b: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();

        let mut delta = upstream.to_vec(); // output layer is linear
        for l in (0..layers).rev() {
            let d_in = self.dims[l];
            let a_prev: &[f64] = if l == 0 {
                &tape.input
            } else {
                &tape.hidden[l - 1]
            };
            for (i, di) in delta.iter().enumerate() {
                let row = &mut grad_w[l][i * d_in..(i + 1) * d_in];
                for (g, aj) in row.iter_mut().zip(a_prev) {
                    *g = di * aj;
                }
            }
            grad_b[l].copy_from_slice(&delta);
            if l > 0 {
                // push through W_l^T, then the tanh of the layer below
                let w = &self.weights[l];
                let mut next = vec![0.0; d_in];
                for (i, di) in delta.iter().enumerate() {
                    let row = &w[i * d_in..(i + 1) * d_in];
                    for (nj, wij) in next.iter_mut().zip(row) {
                        *nj += wij * di;
                    }
                }
                for (nj, aj) in next.iter_mut().zip(&tape.hidden[l - 1]) {
                    *nj *= 1.0 - aj * aj;
                }
                delta = next;
            }
        }

        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..layers {
            out.extend_from_slice(&grad_w[l]);
            out.extend_from_slice(&grad_b[l]);
        }
        Ok(out)
    }

    /// Ascent update of theta through the owned Adam state:
    /// theta <- theta + lr * AdamDirection(grad).
    pub fn apply_theta_update(&mut self, grad_theta: &[f64]) -> Result<()> {
        let step = adam_step(&mut self.theta_adam, grad_theta)?;
        let mut off = 0;
        for l in 0..self.weights.len() {
            for w in self.weights[l].iter_mut() {
                *w += step[off];
                off += 1;
            }
            for b in self.biases[l].iter_mut() {
                *b += step[off];
                off += 1;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn parse_hidden_specs() {
        assert_eq!(parse_hidden_spec("40,40").unwrap(), vec![40, 40]);
        assert_eq!(parse_hidden_spec("10").unwrap(), vec![10]);
        assert_eq!(parse_hidden_spec("").unwrap(), Vec::<usize>::new());
        assert!(parse_hidden_spec("40,x").is_err());
        assert!(parse_hidden_spec("0").is_err());
    }

    #[test]
    fn parameter_count_for_default_architecture() {
        // [32, 40, 40, 32]: (32*40 + 40) + (40*40 + 40) + (40*32 + 32)
        let dims = layer_dims(32, &[40, 40]);
        let net = UpdateNet::init(&dims, 1e-4, &mut rng(0)).unwrap();
        assert_eq!(net.param_count(), 1320 + 1640 + 1312);
        assert_eq!(net.param_count(), 4272);
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let dims = layer_dims(8, &[10]);
        let a = UpdateNet::init(&dims, 1e-4, &mut rng(42)).unwrap();
        let b = UpdateNet::init(&dims, 1e-4, &mut rng(42)).unwrap();
        assert_eq!(a, b);
        let c = UpdateNet::init(&dims, 1e-4, &mut rng(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_output_is_small() {
        use rand::Rng;
        let dims = layer_dims(32, &[40, 40]);
        let mut r = rng(7);
        for _ in 0..10 {
            let net = UpdateNet::init(&dims, 1e-4, &mut r).unwrap();
            let mut g: Vec<f64> = (0..32).map(|_| r.random_range(-1.0..1.0)).collect();
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in g.iter_mut() {
                *x /= norm;
            }
            let (out, _) = net.forward(&g).unwrap();
            let out_norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(out_norm < 0.1, "||G(g)||/||g|| = {out_norm}");
        }
    }

    #[test]
    fn forward_zero_net_is_zero() {
        let dims = vec![4, 3, 4];
        let net = UpdateNet::from_parts(
            dims.clone(),
            vec![vec![0.0; 12], vec![0.0; 12]],
            vec![vec![0.0; 3], vec![0.0; 4]],
            1e-4,
        )
        .unwrap();
        let (out, _) = net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap();
        assert_eq!(out, vec![0.0; 4]);
    }

    #[test]
    fn forward_identity_single_layer() {
        let mut w = vec![0.0; 9];
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        let net = UpdateNet::from_parts(vec![3, 3], vec![w], vec![vec![0.0; 3]], 1e-4).unwrap();
        let x = [0.25, -1.5, 2.0];
        let (out, _) = net.forward(&x).unwrap();
        assert_eq!(out, x.to_vec());
    }

    #[test]
    fn forward_rejects_bad_input_length() {
        let net = UpdateNet::init(&[4, 4], 1e-4, &mut rng(0)).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension(_))));
    }

    // independent layer-by-layer re-evaluation
    fn forward_oracle(net: &UpdateNet, input: &[f64]) -> Vec<f64> {
        let dims = net.dims();
        let layers = dims.len() - 1;
        let theta = net.theta();
        let mut off = 0;
        let mut act = input.to_vec();
        for l in 0..layers {
            let (d_in, d_out) = (dims[l], dims[l + 1]);
            let w = &theta[off..off + d_in * d_out];
            off += d_in * d_out;
            let b = &theta[off..off + d_out];
            off += d_out;
            let mut z = vec![0.0; d_out];
            for i in 0..d_out {
                let s: f64 = (0..d_in).map(|j| w[i * d_in + j] * act[j]).sum();
                z[i] = b[i] + s;
                if l + 1 < layers {
                    z[i] = z[i].tanh();
                }
            }
            act = z;
        }
        act
    }

    #[test]
    fn forward_matches_oracle() {
        use rand::Rng;
        let dims = layer_dims(6, &[9, 5]);
        let mut r = rng(11);
        let mut net = UpdateNet::init(&dims, 1e-4, &mut r).unwrap();
        // randomize biases too so the check is not trivially zero-biased
        for l in 0..dims.len() - 1 {
            for b in net.biases_mut(l) {
                *b = r.random_range(-0.5..0.5);
            }
        }
        let input: Vec<f64> = (0..6).map(|_| r.random_range(-2.0..2.0)).collect();
        let (out, _) = net.forward(&input).unwrap();
        let want = forward_oracle(&net, &input);
        for (a, b) in out.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_zero_upstream_gives_zero() {
        let dims = layer_dims(4, &[5]);
        let net = UpdateNet::init(&dims, 1e-4, &mut rng(3)).unwrap();
        let (_, tape) = net.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let g = net.backward_params(&tape, &[0.0; 4]).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn backward_linear_layer_closed_form() {
        // single linear layer: grad_W = u x^T, grad_b = u
        let net = UpdateNet::from_parts(
            vec![2, 2],
            vec![vec![0.3, -0.1, 0.7, 0.2]],
            vec![vec![0.05, -0.4]],
            1e-4,
        )
        .unwrap();
        let x = [1.5, -2.5];
        let u = [0.25, -1.0];
        let (_, tape) = net.forward(&x).unwrap();
        let g = net.backward_params(&tape, &u).unwrap();
        let want = [
            u[0] * x[0],
            u[0] * x[1],
            u[1] * x[0],
            u[1] * x[1], // W
            u[0],
            u[1], // b
        ];
        assert_eq!(g, want.to_vec());
    }

    #[test]
    fn backward_matches_finite_differences() {
        use rand::Rng;
        let dims = layer_dims(6, &[8, 7]);
        let mut r = rng(19);
        let mut net = UpdateNet::init(&dims, 1e-4, &mut r).unwrap();
        for l in 0..dims.len() - 1 {
            for b in net.biases_mut(l) {
                *b = r.random_range(-0.3..0.3);
            }
        }
        let input: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
        let upstream: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
        let (_, tape) = net.forward(&input).unwrap();
        let got = net.backward_params(&tape, &upstream).unwrap();

        let theta0 = net.theta();
        let eps = 1e-6;
        let mut probe = net.clone();
        for (i, gi) in got.iter().enumerate() {
            let mut t = theta0.clone();
            t[i] += eps;
            probe.set_theta(&t).unwrap();
            let (hi, _) = probe.forward(&input).unwrap();
            t[i] -= 2.0 * eps;
            probe.set_theta(&t).unwrap();
            let (lo, _) = probe.forward(&input).unwrap();
            let fd: f64 = hi
                .iter()
                .zip(&lo)
                .zip(&upstream)
                .map(|((h, l), u)| u * (h - l) / (2.0 * eps))
                .sum();
            let rel = (gi - fd).abs() / fd.abs().max(1.0);
            assert!(rel < 1e-5, "theta[{i}]: {gi} vs fd {fd}");
        }
    }

    #[test]
    fn theta_update_zero_gradient_is_identity() {
        let dims = layer_dims(3, &[4]);
        let mut net = UpdateNet::init(&dims, 1e-4, &mut rng(5)).unwrap();
        let before = net.theta();
        net.apply_theta_update(&vec![0.0; net.param_count()])
            .unwrap();
        assert_eq!(net.theta(), before);
    }

    #[test]
    fn theta_update_first_step_magnitude() {
        let dims = layer_dims(3, &[4]);
        let mut net = UpdateNet::init(&dims, 1e-4, &mut rng(6)).unwrap();
        let before = net.theta();
        net.apply_theta_update(&vec![1.0; net.param_count()])
            .unwrap();
        for (a, b) in net.theta().iter().zip(&before) {
            assert!(((a - b) - 1e-4).abs() < 1e-11);
        }
    }

    #[test]
    fn theta_updates_drift_monotonically_with_fixed_gradient() {
        let dims = layer_dims(2, &[3]);
        let mut net = UpdateNet::init(&dims, 1e-3, &mut rng(8)).unwrap();
        let start = net.theta();
        let grad: Vec<f64> = (0..net.param_count())
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let mut last = start.clone();
        for _ in 0..100 {
            net.apply_theta_update(&grad).unwrap();
            let now = net.theta();
            for i in 0..now.len() {
                let moved = now[i] - last[i];
                assert!(moved * grad[i] > 0.0, "drift reversed at {i}");
            }
            last = now;
        }
    }

    #[test]
    fn zero_input_propagates_biases_exactly() {
        use rand::Rng;
        let dims = layer_dims(4, &[5, 6]);
        let mut r = rng(13);
        let mut net = UpdateNet::init(&dims, 1e-4, &mut r).unwrap();
        for l in 0..dims.len() - 1 {
            for b in net.biases_mut(l) {
                *b = r.random_range(-0.7..0.7);
            }
        }
        let (out, _) = net.forward(&[0.0; 4]).unwrap();
        let want = forward_oracle(&net, &[0.0; 4]);
        assert_eq!(out, want);
        assert!(
            out.iter().any(|&x| x != 0.0),
            "generic biases must reach the output"
        );
    }
}
