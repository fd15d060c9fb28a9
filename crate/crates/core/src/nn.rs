//! Small fully connected networks with hand-written reverse mode.
//!
//! Parameters of all layers live in one flat buffer: for each layer the
//! row-major weight matrix (`out x in`) followed by the bias vector. Gradients
//! use the same layout, which keeps the optimizer and target updates to plain
//! element-wise loops.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    dims: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
}

/// Per-layer outputs of one forward pass; `values[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    values: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.values.last().expect("cache holds at least the input")
    }
}

impl Mlp {
    /// Builds a network with every parameter set to zero.
    pub fn zeros(dims: &[usize], activations: &[Activation]) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::config(format!("invalid layer widths {dims:?}")));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::ShapeMismatch { expected: dims.len() - 1, got: activations.len() });
        }
        let n = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self { dims: dims.to_vec(), activations: activations.to_vec(), params: vec![0.0; n] })
    }

    /// Uniform initialisation in `±1/sqrt(fan_in)` for weights and biases.
    pub fn random<R: Rng + ?Sized>(dims: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(dims, activations)?;
        let mut offset = 0;
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out + fan_out] {
                *p = rng.random_range(-bound..=bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    /// `hidden` ReLU layers between `input` and `output` units.
    pub fn with_hidden<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        output: usize,
        head: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(output);
        let mut acts = vec![Activation::Relu; hidden.len()];
        acts.push(head);
        Self::random(&dims, &acts, rng)
    }

    pub fn from_parts(dims: Vec<usize>, activations: Vec<Activation>, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(&dims, &activations)?;
        if params.len() != net.params.len() {
            return Err(Error::ShapeMismatch { expected: net.params.len(), got: params.len() });
        }
        net.params = params;
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("at least two widths")
    }

    pub fn same_architecture(&self, other: &Mlp) -> bool {
        self.dims == other.dims && self.activations == other.activations
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize, Activation)> + '_ {
        let mut offset = 0;
        self.dims.windows(2).zip(&self.activations).map(move |(w, &act)| {
            let start = offset;
            offset += w[0] * w[1] + w[1];
            (start, w[0], w[1], act)
        })
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut cache = self.forward_cached(input)?;
        Ok(cache.values.pop().expect("output"))
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        if input.len() != self.input_dim() {
            return Err(Error::ShapeMismatch { expected: self.input_dim(), got: input.len() });
        }
        let mut values = Vec::with_capacity(self.dims.len());
        values.push(input.to_vec());
        for (offset, n_in, n_out, act) in self.layers() {
            let x = values.last().expect("previous layer");
            let (w, rest) = self.params[offset..].split_at(n_in * n_out);
            let b = &rest[..n_out];
            let y: Vec<f64> = w
                .chunks_exact(n_in)
                .zip(b)
                .map(|(row, &bias)| act.apply(row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + bias))
                .collect();
            values.push(y);
        }
        Ok(ForwardCache { values })
    }

    /// Reverse pass for the scalar `output . upstream`.
    ///
    /// Parameter gradients are added into `grads` (same layout as the
    /// parameters) so a batch can be accumulated; the input gradient is returned.
    pub fn backward_into(&self, cache: &ForwardCache, upstream: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        if grads.len() != self.params.len() {
            return Err(Error::ShapeMismatch { expected: self.params.len(), got: grads.len() });
        }
        self.reverse(cache, upstream, Some(grads))
    }

    /// Gradient of `output . upstream` with respect to the input only.
    pub fn input_gradient(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<Vec<f64>> {
        self.reverse(cache, upstream, None)
    }

    fn reverse(&self, cache: &ForwardCache, upstream: &[f64], mut grads: Option<&mut [f64]>) -> Result<Vec<f64>> {
        if upstream.len() != self.output_dim() {
            return Err(Error::ShapeMismatch { expected: self.output_dim(), got: upstream.len() });
        }
        if cache.values.len() != self.dims.len() {
            return Err(Error::ShapeMismatch { expected: self.dims.len(), got: cache.values.len() });
        }
        let layers: Vec<_> = self.layers().collect();
        let mut delta = upstream.to_vec();
        for (l, &(offset, n_in, n_out, act)) in layers.iter().enumerate().rev() {
            let x = &cache.values[l];
            let y = &cache.values[l + 1];
            for (d, &yo) in delta.iter_mut().zip(y) {
                *d *= act.derivative(yo);
            }
            if let Some(grads) = grads.as_deref_mut() {
                let (gw, gb) = grads[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for (o, &d) in delta.iter().enumerate() {
                    gb[o] += d;
                    if d != 0.0 {
                        for (g, &xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                            *g += d * xi;
                        }
                    }
                }
            }
            let w = &self.params[offset..offset + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    for (p, &wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *p += d * wi;
                    }
                }
            }
            delta = prev;
        }
        Ok(delta)
    }

    /// Returns `(parameter gradients, input gradient)` for one sample.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut grads = vec![0.0; self.params.len()];
        let input_grad = self.backward_into(cache, upstream, &mut grads)?;
        Ok((grads, input_grad))
    }
}

/// Polyak averaging: `target <- tau * online + (1 - tau) * target`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if !target.same_architecture(online) {
        return Err(Error::ArchitectureMismatch);
    }
    for (t, &o) in target.params.iter_mut().zip(&online.params) {
        *t = tau * o + (1.0 - tau) * *t;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self {
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step_count: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected descent step: `params -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first_moment.len() {
            return Err(Error::ShapeMismatch { expected: self.first_moment.len(), got: params.len() });
        }
        if grads.len() != params.len() {
            return Err(Error::ShapeMismatch { expected: params.len(), got: grads.len() });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[3, 4, 2], &[Activation::Identity, Activation::Identity]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_affine_layer() {
        let net = Mlp::from_parts(vec![1, 1], vec![Activation::Identity], vec![2.0, 1.0]).unwrap();
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![7.0]);
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::ShapeMismatch { expected: 1, got: 2 })));
    }

    #[test]
    fn tanh_head_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::random(&[4, 8, 3], &[Activation::Relu, Activation::Tanh], &mut rng).unwrap();
        for k in 0..50 {
            let x: Vec<f64> = (0..4).map(|i| ((k * 7 + i) as f64).sin() * 10.0).collect();
            assert!(net.forward(&x).unwrap().iter().all(|y| y.abs() < 1.0));
        }
    }

    #[test]
    fn forward_is_bit_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::with_hidden(5, &[16, 16], 2, Activation::Sigmoid, &mut rng).unwrap();
        let x = [0.1, 0.2, -0.3, 0.4, 0.5];
        let a = net.forward(&x).unwrap();
        let b = net.clone().forward(&x).unwrap();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn linear_layer_gradient_is_outer_product() {
        let net = Mlp::from_parts(
            vec![3, 2],
            vec![Activation::Identity],
            vec![0.5, -1.0, 2.0, 0.0, 3.0, 1.5, 0.1, 0.2],
        )
        .unwrap();
        let x = [1.0, 2.0, -1.0];
        let up = [0.5, -2.0];
        let cache = net.forward_cached(&x).unwrap();
        let (g, gin) = net.backward(&cache, &up).unwrap();
        let expected_w: Vec<f64> = up.iter().flat_map(|u| x.iter().map(move |xi| u * xi)).collect();
        assert_eq!(&g[..6], &expected_w[..]);
        assert_eq!(&g[6..], &up[..]);
        // W^T up
        assert_eq!(gin, vec![0.5 * 0.5 - 2.0 * 0.0, -1.0 * 0.5 - 2.0 * 3.0, 2.0 * 0.5 - 2.0 * 1.5]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::with_hidden(4, &[8], 2, Activation::Tanh, &mut rng).unwrap();
        let cache = net.forward_cached(&[0.3, 0.1, -0.2, 0.9]).unwrap();
        let (g, gin) = net.backward(&cache, &[0.0, 0.0]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        assert!(gin.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn soft_update_examples() {
        let acts = [Activation::Identity];
        let online = Mlp::from_parts(vec![1, 1], acts.to_vec(), vec![2.0, 2.0]).unwrap();
        let zero = Mlp::zeros(&[1, 1], &acts).unwrap();

        let mut t = zero.clone();
        soft_update(&mut t, &online, 1.0).unwrap();
        assert_eq!(t, online);
        let mut t = zero.clone();
        soft_update(&mut t, &online, 0.0).unwrap();
        assert_eq!(t, zero);
        let mut t = zero.clone();
        soft_update(&mut t, &online, 0.5).unwrap();
        assert_eq!(t.params(), &[1.0, 1.0]);

        let mut other = Mlp::zeros(&[1, 2], &acts).unwrap();
        assert!(matches!(soft_update(&mut other, &online, 0.5), Err(Error::ArchitectureMismatch)));
    }

    #[test]
    fn soft_update_twice_equals_combined_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let online = Mlp::with_hidden(3, &[5], 1, Activation::Identity, &mut rng).unwrap();
        let start = Mlp::with_hidden(3, &[5], 1, Activation::Identity, &mut rng).unwrap();
        let tau = 0.3;
        let mut twice = start.clone();
        soft_update(&mut twice, &online, tau).unwrap();
        soft_update(&mut twice, &online, tau).unwrap();
        let mut once = start;
        soft_update(&mut once, &online, 1.0 - (1.0 - tau) * (1.0 - tau)).unwrap();
        for (a, b) in twice.params().iter().zip(once.params()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut p = vec![1.0, -2.0];
        let mut adam = AdamState::new(2, 0.1);
        adam.step(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = vec![0.0, 0.0];
        let mut adam = AdamState::new(2, 0.01);
        adam.step(&mut p, &[3.0, -0.2]).unwrap();
        assert!((p[0] + 0.01).abs() < 1e-8);
        assert!((p[1] - 0.01).abs() < 1e-8);
        assert!(matches!(adam.step(&mut p, &[1.0]), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn adam_minimises_quadratic_bowl() {
        let mut w = vec![1.0];
        let mut adam = AdamState::new(1, 1e-2);
        for _ in 0..500 {
            let g = [2.0 * w[0]];
            adam.step(&mut w, &g).unwrap();
        }
        assert!(w[0].abs() < 1e-3, "w = {}", w[0]);
    }
}
