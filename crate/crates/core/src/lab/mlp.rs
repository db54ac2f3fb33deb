//! A small tanh perceptron: two hidden layers (the trunk) and a linear
//! head that can be swapped between classification and feature output.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::numeric::{stream_rng, Matrix, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `out × in`.
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Dense {
    /// Weights drawn from N(0, 1/fan_in), zero bias.
    fn init(fan_in: usize, fan_out: usize, seed: u64, stream: Stream) -> Self {
        let mut rng = stream_rng(seed, stream);
        let scale = 1.0 / (fan_in as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| { let g: f64 = StandardNormal.sample(&mut rng); scale * g })
            .collect();
        Self {
            w: Matrix::from_vec(fan_out, fan_in, data).expect("shape"),
            b: vec![0.0; fan_out],
        }
    }

    fn forward(&self, x: &Matrix) -> Matrix {
        let mut y = x.matmul_t(&self.w);
        for r in 0..y.rows() {
            for (v, b) in y.row_mut(r).iter_mut().zip(&self.b) {
                *v += b;
            }
        }
        y
    }

    fn backward(&self, x: &Matrix, dy: &Matrix) -> (DenseGrad, Matrix) {
        let dw = dy.t_matmul(x);
        let mut db = vec![0.0; self.b.len()];
        for r in 0..dy.rows() {
            for (g, d) in db.iter_mut().zip(dy.row(r)) {
                *g += d;
            }
        }
        let dx = dy.matmul(&self.w);
        (DenseGrad { w: dw, b: db }, dx)
    }

    fn step(&mut self, g: &DenseGrad, lr: f64) {
        self.w.axpy(-lr, &g.w);
        for (b, d) in self.b.iter_mut().zip(&g.b) {
            *b -= lr * d;
        }
    }

    fn is_finite(&self) -> bool {
        self.w.is_finite() && self.b.iter().all(|v| v.is_finite())
    }

    fn hash_into(&self, h: &mut Sha256) {
        for v in self.w.as_slice().iter().chain(&self.b) {
            h.update(v.to_bits().to_le_bytes());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub w: Matrix,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpEncoder {
    pub trunk: [Dense; 2],
    pub head: Dense,
}

/// Activations kept for the backward pass.
pub struct Forward {
    pub h1: Matrix,
    pub h2: Matrix,
    pub out: Matrix,
}

pub struct EncoderGrad {
    pub trunk: [DenseGrad; 2],
    pub head: DenseGrad,
}

fn tanh_in_place(m: &mut Matrix) {
    m.as_mut_slice().iter_mut().for_each(|v| *v = v.tanh());
}

/// `dz = da ⊙ (1 − a²)` for `a = tanh(z)`.
fn tanh_backward(a: &Matrix, da: &Matrix) -> Matrix {
    let data = a
        .as_slice()
        .iter()
        .zip(da.as_slice())
        .map(|(a, d)| d * (1.0 - a * a))
        .collect();
    Matrix::from_vec(a.rows(), a.cols(), data).expect("shape")
}

impl MlpEncoder {
    /// Fresh `inputs → hidden → hidden → outputs` network.
    pub fn new(inputs: usize, hidden: usize, outputs: usize, seed: u64, head_stream: Stream) -> Self {
        Self {
            trunk: [
                Dense::init(inputs, hidden, seed, Stream::TrunkInit),
                Dense::init(hidden, hidden, seed ^ 0x9e37_79b9_7f4a_7c15, Stream::TrunkInit),
            ],
            head: Dense::init(hidden, outputs, seed, head_stream),
        }
    }

    pub fn inputs(&self) -> usize {
        self.trunk[0].w.cols()
    }

    pub fn hidden(&self) -> usize {
        self.trunk[1].w.rows()
    }

    pub fn outputs(&self) -> usize {
        self.head.w.rows()
    }

    /// Drops the current head and attaches a fresh `hidden → outputs` one.
    pub fn replace_head(&mut self, outputs: usize, seed: u64, stream: Stream) {
        self.head = Dense::init(self.hidden(), outputs, seed, stream);
    }

    pub fn forward(&self, x: &Matrix) -> Forward {
        let mut h1 = self.trunk[0].forward(x);
        tanh_in_place(&mut h1);
        let mut h2 = self.trunk[1].forward(&h1);
        tanh_in_place(&mut h2);
        let out = self.head.forward(&h2);
        Forward { h1, h2, out }
    }

    pub fn encode(&self, x: &Matrix) -> Matrix {
        self.forward(x).out
    }

    /// Parameter gradients for upstream gradient `d_out`. With
    /// `head_only` the trunk gradients are left at zero.
    pub fn backward(&self, x: &Matrix, fwd: &Forward, d_out: &Matrix, head_only: bool) -> EncoderGrad {
        let (head, dh2) = self.head.backward(&fwd.h2, d_out);
        if head_only {
            let zero = |l: &Dense| DenseGrad {
                w: Matrix::zeros(l.w.rows(), l.w.cols()),
                b: vec![0.0; l.b.len()],
            };
            return EncoderGrad {
                trunk: [zero(&self.trunk[0]), zero(&self.trunk[1])],
                head,
            };
        }
        let dz2 = tanh_backward(&fwd.h2, &dh2);
        let (g2, dh1) = self.trunk[1].backward(&fwd.h1, &dz2);
        let dz1 = tanh_backward(&fwd.h1, &dh1);
        let (g1, _) = self.trunk[0].backward(x, &dz1);
        EncoderGrad {
            trunk: [g1, g2],
            head,
        }
    }

    /// One gradient-descent step. A frozen trunk is not touched at all.
    pub fn apply(&mut self, g: &EncoderGrad, lr: f64, freeze_trunk: bool) {
        if !freeze_trunk {
            self.trunk[0].step(&g.trunk[0], lr);
            self.trunk[1].step(&g.trunk[1], lr);
        }
        self.head.step(&g.head, lr);
    }

    pub fn is_finite(&self) -> bool {
        self.trunk.iter().all(Dense::is_finite) && self.head.is_finite()
    }

    /// SHA-256 over the bit patterns of every trunk parameter.
    pub fn trunk_checksum(&self) -> String {
        let mut h = Sha256::new();
        for l in &self.trunk {
            l.hash_into(&mut h);
        }
        format!("{:x}", h.finalize())
    }

    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for l in self.trunk.iter().chain(std::iter::once(&self.head)) {
            l.hash_into(&mut h);
        }
        format!("{:x}", h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss(enc: &MlpEncoder, x: &Matrix) -> f64 {
        0.5 * enc.encode(x).as_slice().iter().map(|v| v * v).sum::<f64>()
    }

    fn weight_mut(e: &mut MlpEncoder, layer: usize) -> &mut Matrix {
        match layer {
            0 => &mut e.trunk[0].w,
            1 => &mut e.trunk[1].w,
            _ => &mut e.head.w,
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let enc = MlpEncoder::new(3, 4, 2, 1, Stream::RestrictionHeadInit);
        let x = Matrix::from_vec(2, 3, vec![0.3, -0.2, 0.5, 1.0, 0.1, -0.7]).unwrap();
        let fwd = enc.forward(&x);
        let g = enc.backward(&x, &fwd, &fwd.out, false);
        let h = 1e-6;
        let checks: [(usize, usize, usize, &Matrix); 3] = [
            (0, 1, 2, &g.trunk[0].w),
            (1, 3, 0, &g.trunk[1].w),
            (2, 1, 3, &g.head.w),
        ];
        for (layer, r, c, analytic) in checks {
            let mut plus = enc.clone();
            let mut minus = enc.clone();
            weight_mut(&mut plus, layer).add_at(r, c, h);
            weight_mut(&mut minus, layer).add_at(r, c, -h);
            let fd = (loss(&plus, &x) - loss(&minus, &x)) / (2.0 * h);
            assert!((fd - analytic.get(r, c)).abs() < 1e-7, "layer {layer}: {fd} vs {}", analytic.get(r, c));
        }
    }

    #[test]
    fn frozen_trunk_untouched() {
        let mut enc = MlpEncoder::new(3, 4, 2, 1, Stream::RestrictionHeadInit);
        let before = enc.trunk_checksum();
        let x = Matrix::from_vec(1, 3, vec![0.3, -0.2, 0.5]).unwrap();
        let fwd = enc.forward(&x);
        let g = enc.backward(&x, &fwd, &fwd.out, false);
        enc.apply(&g, 0.1, true);
        assert_eq!(before, enc.trunk_checksum());
        enc.apply(&g, 0.1, false);
        assert_ne!(before, enc.trunk_checksum());
    }
}
