use crate::numerics::RngStream;

/// Two-layer ReLU network `W₂ relu(W₁x + b₁) + b₂`.
///
/// Parameters live in one flat buffer laid out as `[W₁ | b₁ | W₂ | b₂]`.
/// `W₁` is stored input-major (`W₁[j, h]` at `j·hidden + h`) and `W₂`
/// output-major (`W₂[o, h]` at `o·hidden + h`) so the hot loops run over the
/// hidden units contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    inputs: usize,
    hidden: usize,
    outputs: usize,
    params: Vec<f64>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    pub pre: Vec<f64>,
    pub act: Vec<f64>,
    pub out: Vec<f64>,
    delta: Vec<f64>,
}

impl Mlp {
    pub fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        let len = inputs * hidden + hidden + outputs * hidden + outputs;
        Self { inputs, hidden, outputs, params: vec![0.0; len] }
    }

    /// He-style uniform initialization, zero biases.
    pub fn he_init(inputs: usize, hidden: usize, outputs: usize, rng: &mut RngStream) -> Self {
        let mut net = Self::zeros(inputs, hidden, outputs);
        let bound1 = (6.0 / inputs as f64).sqrt();
        let bound2 = (6.0 / hidden as f64).sqrt();
        let (w1_end, w2_start) = (net.w1_range().end, net.w2_range().start);
        for w in &mut net.params[..w1_end] {
            *w = rng.uniform(-bound1, bound1);
        }
        let w2_end = net.w2_range().end;
        for w in &mut net.params[w2_start..w2_end] {
            *w = rng.uniform(-bound2, bound2);
        }
        net
    }

    pub fn from_params(inputs: usize, hidden: usize, outputs: usize, params: Vec<f64>) -> Option<Self> {
        let net = Self::zeros(inputs, hidden, outputs);
        (params.len() == net.params.len()).then(|| Self { params, ..net })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn w1_range(&self) -> std::ops::Range<usize> {
        0..self.inputs * self.hidden
    }

    fn b1_range(&self) -> std::ops::Range<usize> {
        let s = self.inputs * self.hidden;
        s..s + self.hidden
    }

    fn w2_range(&self) -> std::ops::Range<usize> {
        let s = self.b1_range().end;
        s..s + self.outputs * self.hidden
    }

    fn b2_range(&self) -> std::ops::Range<usize> {
        let s = self.w2_range().end;
        s..s + self.outputs
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cache = MlpCache::default();
        self.forward_cached(x, &mut cache);
        cache.out
    }

    pub fn forward_cached(&self, x: &[f64], cache: &mut MlpCache) {
        assert_eq!(x.len(), self.inputs, "network input width");
        let h = self.hidden;
        cache.pre.clear();
        cache.pre.extend_from_slice(&self.params[self.b1_range()]);
        let w1 = &self.params[self.w1_range()];
        for (j, &xj) in x.iter().enumerate() {
            for (p, &w) in cache.pre.iter_mut().zip(&w1[j * h..(j + 1) * h]) {
                *p += w * xj;
            }
        }
        cache.act.clear();
        cache.act.extend(cache.pre.iter().map(|&p| p.max(0.0)));
        let w2 = &self.params[self.w2_range()];
        let b2 = &self.params[self.b2_range()];
        cache.out.clear();
        cache.out.extend((0..self.outputs).map(|o| {
            let row = &w2[o * h..(o + 1) * h];
            b2[o] + row.iter().zip(&cache.act).map(|(w, a)| w * a).sum::<f64>()
        }));
    }

    /// Accumulates `∂(upstreamᵀ out)/∂params` into `grads` (same layout as
    /// [`Mlp::params`]). The ReLU subgradient at zero is taken as zero.
    pub fn accumulate_gradients(&self, x: &[f64], cache: &mut MlpCache, upstream: &[f64], grads: &mut [f64]) {
        assert_eq!(upstream.len(), self.outputs, "upstream gradient width");
        assert_eq!(grads.len(), self.params.len(), "gradient buffer length");
        let h = self.hidden;
        let (w1r, b1r, w2r, b2r) = (self.w1_range(), self.b1_range(), self.w2_range(), self.b2_range());
        let w2 = &self.params[w2r.clone()];

        let MlpCache { pre, act, delta, .. } = cache;
        delta.clear();
        delta.resize(h, 0.0);
        for (o, &g) in upstream.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grads[b2r.start + o] += g;
            let gw2 = &mut grads[w2r.start + o * h..w2r.start + (o + 1) * h];
            for (gw, &a) in gw2.iter_mut().zip(act.iter()) {
                *gw += g * a;
            }
            for (d, &w) in delta.iter_mut().zip(&w2[o * h..(o + 1) * h]) {
                *d += g * w;
            }
        }
        for (d, &p) in delta.iter_mut().zip(pre.iter()) {
            if p <= 0.0 {
                *d = 0.0;
            }
        }
        for (gb, &d) in grads[b1r].iter_mut().zip(delta.iter()) {
            *gb += d;
        }
        let gw1 = &mut grads[w1r];
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for (gw, &d) in gw1[j * h..(j + 1) * h].iter_mut().zip(delta.iter()) {
                *gw += d * xj;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net_1_1_1(w1: f64, b1: f64, w2: f64, b2: f64) -> Mlp {
        Mlp::from_params(1, 1, 1, vec![w1, b1, w2, b2]).unwrap()
    }

    #[test]
    fn zero_weights_output_bias() {
        let mut net = Mlp::zeros(3, 4, 2);
        let b2 = net.b2_range();
        net.params_mut()[b2].copy_from_slice(&[0.5, -1.5]);
        assert_eq!(net.forward(&[1.0, 2.0, 3.0]), vec![0.5, -1.5]);
    }

    #[test]
    fn single_relu() {
        let net = net_1_1_1(1.0, 0.0, 2.0, 0.0);
        assert_eq!(net.forward(&[3.0]), vec![6.0]);
        assert_eq!(net.forward(&[-3.0]), vec![0.0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = RngStream::new(11);
        let mut net = Mlp::he_init(4, 7, 2, &mut rng);
        for p in net.params_mut().iter_mut() {
            *p += rng.uniform(-0.1, 0.1);
        }
        let x = [0.3, -1.2, 0.8, 0.05];
        let upstream = [0.7, -1.3];
        let mut cache = MlpCache::default();
        net.forward_cached(&x, &mut cache);
        let mut grads = vec![0.0; net.params().len()];
        net.accumulate_gradients(&x, &mut cache, &upstream, &mut grads);

        let objective = |n: &Mlp| -> f64 { n.forward(&x).iter().zip(&upstream).map(|(o, u)| o * u).sum() };
        let h = 1e-6;
        for i in 0..net.params().len() {
            let mut plus = net.clone();
            plus.params_mut()[i] += h;
            let mut minus = net.clone();
            minus.params_mut()[i] -= h;
            let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
            let scale = fd.abs().max(grads[i].abs()).max(1e-8);
            assert!((fd - grads[i]).abs() / scale < 1e-4 || (fd - grads[i]).abs() < 1e-9, "param {i}: {fd} vs {}", grads[i]);
        }
    }
}
