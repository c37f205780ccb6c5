//! Dense layers and sequential MLPs with hand-written reverse-mode
//! (backward) and forward-mode (Jacobian-vector) passes. Everything is
//! double precision; parameter gradients use accumulate semantics so batch
//! sums fall out of repeated calls.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }
}

/// Fully connected layer, weights row-major `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub act: Activation,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize, act: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
            act,
        }
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    fn forward_into(&self, x: &[f64], y: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.in_dim);
        y.clear();
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let z: f64 = self.b[o]
                + row
                    .iter()
                    .zip(x)
                    .map(|(&wi, &xi)| wi * xi)
                    .sum::<f64>();
            y.push(self.act.apply(z));
        }
    }

    /// Reverse step. `d_y` is the loss gradient at this layer's output;
    /// weight and bias gradients are accumulated, `d_x` is overwritten.
    fn backward(&self, x: &[f64], y: &[f64], d_y: &[f64], dw: &mut [f64], db: &mut [f64], d_x: &mut Vec<f64>) {
        d_x.clear();
        d_x.resize(self.in_dim, 0.0);
        for o in 0..self.out_dim {
            let d_pre = d_y[o] * self.act.grad_from_output(y[o]);
            if d_pre == 0.0 {
                continue;
            }
            db[o] += d_pre;
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let drow = &mut dw[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                drow[i] += d_pre * x[i];
                d_x[i] += d_pre * row[i];
            }
        }
    }

    /// Forward-mode step: output tangent from an input tangent `u_x` and a
    /// parameter tangent `(vw, vb)`.
    fn jvp(&self, x: &[f64], y: &[f64], u_x: &[f64], vw: &[f64], vb: &[f64], u_y: &mut Vec<f64>) {
        u_y.clear();
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let vrow = &vw[o * self.in_dim..(o + 1) * self.in_dim];
            let mut u_pre = vb[o];
            for i in 0..self.in_dim {
                u_pre += row[i] * u_x[i] + vrow[i] * x[i];
            }
            u_y.push(u_pre * self.act.grad_from_output(y[o]));
        }
    }
}

/// Sequential stack of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Cached activations of one forward pass: `acts[0]` is the input,
/// `acts[i + 1]` the output of layer `i`.
#[derive(Debug, Clone)]
pub struct Trace {
    pub acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace of an empty mlp")
    }
}

impl Mlp {
    pub fn new(layers: Vec<Dense>) -> Self {
        for pair in layers.windows(2) {
            assert_eq!(pair[0].out_dim, pair[1].in_dim, "layer widths must chain");
        }
        Self { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().expect("empty mlp").in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("empty mlp").out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    pub fn forward_trace(&self, x: &[f64]) -> Trace {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for layer in &self.layers {
            let mut y = Vec::with_capacity(layer.out_dim);
            layer.forward_into(acts.last().unwrap(), &mut y);
            acts.push(y);
        }
        Trace { acts }
    }

    /// Output without keeping intermediate activations.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Accumulate parameter gradients for one sample into `grads` (flat,
    /// layer-major `w` then `b`) and return the input gradient.
    pub fn backward(&self, trace: &Trace, d_out: &[f64], grads: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(grads.len(), self.param_count());
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut pos = 0;
        for layer in &self.layers {
            offsets.push(pos);
            pos += layer.param_count();
        }
        let mut d_cur = d_out.to_vec();
        let mut d_prev = Vec::new();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let start = offsets[idx];
            let (dw, db) = grads[start..start + layer.param_count()].split_at_mut(layer.w.len());
            layer.backward(&trace.acts[idx], &trace.acts[idx + 1], &d_cur, dw, db, &mut d_prev);
            std::mem::swap(&mut d_cur, &mut d_prev);
        }
        d_cur
    }

    /// Output tangent under the flat parameter tangent `v` (same layout as
    /// `backward`'s gradient) and input tangent `u_x`.
    pub fn jvp(&self, trace: &Trace, u_x: &[f64], v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.param_count());
        let mut u_cur = u_x.to_vec();
        let mut u_next = Vec::new();
        let mut pos = 0;
        for (idx, layer) in self.layers.iter().enumerate() {
            let vw = &v[pos..pos + layer.w.len()];
            let vb = &v[pos + layer.w.len()..pos + layer.param_count()];
            layer.jvp(&trace.acts[idx], &trace.acts[idx + 1], &u_cur, vw, vb, &mut u_next);
            std::mem::swap(&mut u_cur, &mut u_next);
            pos += layer.param_count();
        }
        u_cur
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        for layer in &self.layers {
            out.extend_from_slice(&layer.w);
            out.extend_from_slice(&layer.b);
        }
    }

    pub fn read_flat(&mut self, flat: &[f64]) -> usize {
        let mut pos = 0;
        for layer in &mut self.layers {
            let (wlen, blen) = (layer.w.len(), layer.b.len());
            layer.w.copy_from_slice(&flat[pos..pos + wlen]);
            pos += wlen;
            layer.b.copy_from_slice(&flat[pos..pos + blen]);
            pos += blen;
        }
        pos
    }
}

/// Orthogonal-style initialization: Gaussian draws orthonormalized along the
/// shorter dimension, scaled by `gain`.
pub fn orthogonal(in_dim: usize, out_dim: usize, gain: f64, rng: &mut impl Rng) -> Vec<f64> {
    use crate::bamdp::standard_normal;
    let mut m = vec![0.0; in_dim * out_dim];
    for v in &mut m {
        *v = standard_normal(rng);
    }
    // Orthonormalize rows when out <= in, columns otherwise.
    let (vectors, len) = if out_dim <= in_dim {
        (out_dim, in_dim)
    } else {
        (in_dim, out_dim)
    };
    for v in 0..vectors {
        for prev in 0..v {
            let mut dot = 0.0;
            for i in 0..len {
                dot += at(&m, v, i, out_dim, in_dim) * at(&m, prev, i, out_dim, in_dim);
            }
            for i in 0..len {
                let sub = dot * at(&m, prev, i, out_dim, in_dim);
                *at_mut(&mut m, v, i, out_dim, in_dim) -= sub;
            }
        }
        let mut norm = 0.0;
        for i in 0..len {
            norm += at(&m, v, i, out_dim, in_dim).powi(2);
        }
        let norm = norm.sqrt().max(1e-12);
        for i in 0..len {
            *at_mut(&mut m, v, i, out_dim, in_dim) *= gain / norm;
        }
    }
    m
}

#[inline]
fn at(m: &[f64], v: usize, i: usize, out_dim: usize, in_dim: usize) -> f64 {
    if out_dim <= in_dim {
        m[v * in_dim + i] // v-th row, i-th column
    } else {
        m[i * in_dim + v] // v-th column, i-th row
    }
}

#[inline]
fn at_mut(m: &mut [f64], v: usize, i: usize, out_dim: usize, in_dim: usize) -> &mut f64 {
    if out_dim <= in_dim {
        &mut m[v * in_dim + i]
    } else {
        &mut m[i * in_dim + v]
    }
}

pub fn init_dense(in_dim: usize, out_dim: usize, act: Activation, gain: f64, rng: &mut impl Rng) -> Dense {
    Dense {
        in_dim,
        out_dim,
        w: orthogonal(in_dim, out_dim, gain, rng),
        b: vec![0.0; out_dim],
        act,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bamdp::{derive_stream, stream};
    use approx::assert_relative_eq;

    #[test]
    fn single_linear_layer_weight_gradient_equals_input() {
        // y = w x; dL/dw = d_y * x.
        let mut layer = Dense::zeros(3, 1, Activation::Linear);
        layer.w = vec![0.5, -0.25, 2.0];
        let mlp = Mlp::new(vec![layer]);
        let x = [1.5, -2.0, 0.75];
        let trace = mlp.forward_trace(&x);
        let mut grads = vec![0.0; mlp.param_count()];
        mlp.backward(&trace, &[1.0], &mut grads);
        assert_eq!(&grads[0..3], &x);
        assert_eq!(grads[3], 1.0); // bias gradient
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_parameter_gradient() {
        let mut rng = derive_stream(0, stream::INIT, 0, 0);
        let mlp = Mlp::new(vec![
            init_dense(4, 8, Activation::Tanh, 1.0, &mut rng),
            init_dense(8, 2, Activation::Linear, 1.0, &mut rng),
        ]);
        let trace = mlp.forward_trace(&[0.1, -0.2, 0.3, 0.4]);
        let mut grads = vec![0.0; mlp.param_count()];
        mlp.backward(&trace, &[0.0, 0.0], &mut grads);
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradients_are_additive_over_samples() {
        let mut rng = derive_stream(1, stream::INIT, 0, 0);
        let mlp = Mlp::new(vec![
            init_dense(3, 5, Activation::Tanh, 1.0, &mut rng),
            init_dense(5, 2, Activation::Linear, 1.0, &mut rng),
        ]);
        let xs = [[0.2, -0.4, 0.9], [-1.0, 0.5, 0.1]];
        let d = [0.7, -0.3];
        let mut combined = vec![0.0; mlp.param_count()];
        let mut separate = vec![0.0; mlp.param_count()];
        for x in &xs {
            let t = mlp.forward_trace(x);
            mlp.backward(&t, &d, &mut combined);
            let mut one = vec![0.0; mlp.param_count()];
            mlp.backward(&t, &d, &mut one);
            for (s, o) in separate.iter_mut().zip(&one) {
                *s += o;
            }
        }
        for (c, s) in combined.iter().zip(&separate) {
            assert_relative_eq!(c, s, epsilon = 1e-15);
        }
    }

    #[test]
    fn jvp_matches_finite_difference_of_forward() {
        let mut rng = derive_stream(2, stream::INIT, 0, 0);
        let mlp = Mlp::new(vec![
            init_dense(3, 6, Activation::Tanh, 1.0, &mut rng),
            init_dense(6, 4, Activation::Tanh, 1.0, &mut rng),
            init_dense(4, 2, Activation::Linear, 1.0, &mut rng),
        ]);
        let x = [0.3, -0.6, 0.2];
        let n = mlp.param_count();
        let v: Vec<f64> = (0..n).map(|i| ((i * 2654435761) % 17) as f64 / 17.0 - 0.5).collect();
        let trace = mlp.forward_trace(&x);
        let analytic = mlp.jvp(&trace, &[0.0; 3], &v);

        let eps = 1e-6;
        let mut flat = Vec::new();
        mlp.write_flat(&mut flat);
        let mut plus = mlp.clone();
        let mut minus = mlp.clone();
        let flat_plus: Vec<f64> = flat.iter().zip(&v).map(|(p, t)| p + eps * t).collect();
        let flat_minus: Vec<f64> = flat.iter().zip(&v).map(|(p, t)| p - eps * t).collect();
        plus.read_flat(&flat_plus);
        minus.read_flat(&flat_minus);
        let yp = plus.forward(&x);
        let ym = minus.forward(&x);
        for (a, (p, m)) in analytic.iter().zip(yp.iter().zip(&ym)) {
            let numeric = (p - m) / (2.0 * eps);
            assert_relative_eq!(a, &numeric, epsilon = 1e-7, max_relative = 1e-6);
        }
    }

    #[test]
    fn flat_round_trip_is_exact() {
        let mut rng = derive_stream(3, stream::INIT, 0, 0);
        let mlp = Mlp::new(vec![
            init_dense(5, 7, Activation::Tanh, 1.0, &mut rng),
            init_dense(7, 3, Activation::Linear, 0.01, &mut rng),
        ]);
        let mut flat = Vec::new();
        mlp.write_flat(&mut flat);
        let mut other = Mlp::new(vec![
            Dense::zeros(5, 7, Activation::Tanh),
            Dense::zeros(7, 3, Activation::Linear),
        ]);
        let consumed = other.read_flat(&flat);
        assert_eq!(consumed, flat.len());
        assert_eq!(mlp, other);
    }

    #[test]
    fn orthogonal_rows_are_orthonormal() {
        let mut rng = derive_stream(4, stream::INIT, 0, 0);
        let (out_dim, in_dim) = (4, 9);
        let w = orthogonal(in_dim, out_dim, 1.0, &mut rng);
        for a in 0..out_dim {
            for b in 0..out_dim {
                let dot: f64 = (0..in_dim).map(|i| w[a * in_dim + i] * w[b * in_dim + i]).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert_relative_eq!(dot, expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn orthogonal_columns_are_orthonormal_when_tall() {
        let mut rng = derive_stream(5, stream::INIT, 0, 0);
        let (out_dim, in_dim) = (8, 3);
        let w = orthogonal(in_dim, out_dim, 1.0, &mut rng);
        for a in 0..in_dim {
            for b in 0..in_dim {
                let dot: f64 = (0..out_dim).map(|o| w[o * in_dim + a] * w[o * in_dim + b]).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert_relative_eq!(dot, expect, epsilon = 1e-10);
            }
        }
    }
}
