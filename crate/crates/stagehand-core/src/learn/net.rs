//! Dense networks with hand-rolled backprop, Adam, and soft target updates.
//!
//! Everything is generic over the scalar type: training runs in `f32` for
//! speed, while the gradient-check tests instantiate the *same* code in
//! `f64` so the finite-difference oracle is not drowned by rounding error.
//! Hidden layers use tanh (smooth, so finite differences are well-defined
//! everywhere); the output layer is linear.

use ndarray::{Array1, Array2, Axis, NdFloat};
use rand::Rng;

/// Float scalar for network math.
pub trait Scalar: NdFloat {
    fn of(x: f64) -> Self;
}

impl Scalar for f32 {
    fn of(x: f64) -> f32 {
        x as f32
    }
}

impl Scalar for f64 {
    fn of(x: f64) -> f64 {
        x
    }
}

/// One affine layer: `y = x·w + b`, with `w` laid out input × output.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<F> {
    pub w: Array2<F>,
    pub b: Array1<F>,
}

/// A fully-connected network: tanh after every layer except the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    pub layers: Vec<Linear<F>>,
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Debug, Clone)]
pub struct Grads<F> {
    pub layers: Vec<(Array2<F>, Array1<F>)>,
}

/// Activations recorded by a forward pass: `acts[0]` is the input batch,
/// `acts[i+1]` the output of layer `i` (post-tanh for hidden layers), so
/// `acts.last()` is the network output.
#[derive(Debug, Clone)]
pub struct ForwardPass<F> {
    pub acts: Vec<Array2<F>>,
}

impl<F: Scalar> ForwardPass<F> {
    pub fn out(&self) -> &Array2<F> {
        self.acts.last().expect("a forward pass has at least the input")
    }
}

impl<F: Scalar> Mlp<F> {
    /// Build with uniform ±1/√fan_in weights and zero biases.
    pub fn new(dims: &[usize], rng: &mut impl Rng) -> Mlp<F> {
        assert!(dims.len() >= 2, "a network needs an input and an output size");
        let layers = dims
            .windows(2)
            .map(|io| {
                let (n_in, n_out) = (io[0], io[1]);
                let bound = 1.0 / (n_in as f64).sqrt();
                let w = Array2::from_shape_fn((n_in, n_out), |_| {
                    F::of(rng.gen_range(-bound..bound))
                });
                Linear { w, b: Array1::zeros(n_out) }
            })
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").w.ncols()
    }

    /// Forward a batch (rows are samples), recording activations.
    pub fn forward(&self, x: Array2<F>) -> ForwardPass<F> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x);
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&layer.w) + &layer.b;
            if i + 1 < self.layers.len() {
                z.mapv_inplace(|v| v.tanh());
            }
            acts.push(z);
        }
        ForwardPass { acts }
    }

    /// Backpropagate `d_out = ∂L/∂output` through a recorded pass.
    /// Returns parameter gradients and `∂L/∂input` (used to push critic
    /// gradients through an actor's action).
    pub fn backward(&self, pass: &ForwardPass<F>, d_out: Array2<F>) -> (Grads<F>, Array2<F>) {
        let n = self.layers.len();
        let mut grads = vec![None; n];
        let mut delta = d_out;
        for i in (0..n).rev() {
            if i + 1 < n {
                // Hidden output y = tanh(z): ∂L/∂z = ∂L/∂y · (1 − y²).
                let y = &pass.acts[i + 1];
                delta.zip_mut_with(y, |d, &y| *d = *d * (F::of(1.0) - y * y));
            }
            let a_in = &pass.acts[i];
            let dw = a_in.t().dot(&delta);
            let db = delta.sum_axis(Axis(0));
            let d_in = delta.dot(&self.layers[i].w.t());
            grads[i] = Some((dw, db));
            delta = d_in;
        }
        let layers = grads.into_iter().map(|g| g.expect("every layer visited")).collect();
        (Grads { layers }, delta)
    }

    /// All parameters in a fixed order (per layer: `w` row-major, then `b`).
    pub fn flatten(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.w.iter().copied());
            out.extend(l.b.iter().copied());
        }
        out
    }

    /// Overwrite all parameters from [`Mlp::flatten`] order.
    pub fn load_flat(&mut self, flat: &[F]) {
        assert_eq!(flat.len(), self.param_count(), "flat parameter size mismatch");
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            for w in l.w.iter_mut() {
                *w = it.next().expect("counted");
            }
            for b in l.b.iter_mut() {
                *b = it.next().expect("counted");
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }
}

/// Gradient flattened in the same order as [`Mlp::flatten`].
impl<F: Scalar> Grads<F> {
    pub fn flatten(&self) -> Vec<F> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }
}

/// Adam with bias correction (β₁ 0.9, β₂ 0.999, ε 1e-8).
#[derive(Debug, Clone)]
pub struct Adam<F> {
    lr: F,
    beta1: F,
    beta2: F,
    eps: F,
    t: i32,
    m: Vec<(Array2<F>, Array1<F>)>,
    v: Vec<(Array2<F>, Array1<F>)>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(net: &Mlp<F>, lr: f64) -> Adam<F> {
        let zeros: Vec<(Array2<F>, Array1<F>)> = net
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.w.dim()), Array1::zeros(l.b.dim())))
            .collect();
        Adam {
            lr: F::of(lr),
            beta1: F::of(0.9),
            beta2: F::of(0.999),
            eps: F::of(1e-8),
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, net: &mut Mlp<F>, grads: &Grads<F>) {
        self.t += 1;
        let bc1 = F::of(1.0) - self.beta1.powi(self.t);
        let bc2 = F::of(1.0) - self.beta2.powi(self.t);
        let one = F::of(1.0);
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[i];
            let (mw, mb) = &mut self.m[i];
            let (vw, vb) = &mut self.v[i];
            Self::update_tensor(
                layer.w.iter_mut(),
                gw.iter(),
                mw.iter_mut(),
                vw.iter_mut(),
                (self.lr, self.beta1, self.beta2, self.eps, bc1, bc2, one),
            );
            Self::update_tensor(
                layer.b.iter_mut(),
                gb.iter(),
                mb.iter_mut(),
                vb.iter_mut(),
                (self.lr, self.beta1, self.beta2, self.eps, bc1, bc2, one),
            );
        }
    }

    #[allow(clippy::type_complexity)]
    fn update_tensor<'a>(
        p: impl Iterator<Item = &'a mut F>,
        g: impl Iterator<Item = &'a F>,
        m: impl Iterator<Item = &'a mut F>,
        v: impl Iterator<Item = &'a mut F>,
        (lr, b1, b2, eps, bc1, bc2, one): (F, F, F, F, F, F, F),
    ) where
        F: 'a,
    {
        for (((p, &g), m), v) in p.zip(g).zip(m).zip(v) {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// Exponential moving average toward the online network:
/// `target ← (1 − τ)·target + τ·online`, per parameter.
pub fn soft_update<F: Scalar>(target: &mut Mlp<F>, online: &Mlp<F>, tau: f64) {
    let t = F::of(tau);
    let keep = F::of(1.0 - tau);
    for (tl, ol) in target.layers.iter_mut().zip(&online.layers) {
        tl.w.zip_mut_with(&ol.w, |a, &b| *a = keep * *a + t * b);
        tl.b.zip_mut_with(&ol.b, |a, &b| *a = keep * *a + t * b);
    }
}
