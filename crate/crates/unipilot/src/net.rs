//! Dense neural networks with exact backpropagation and ADAM.
//!
//! Everything is generic over [`Scalar`]: `f32` is the training type,
//! `f64` backs the finite-difference oracles in the tests. Batched matrix
//! products go through `matrixmultiply`; the layer math (bias, activations,
//! gradients) lives here.
//!
//! The critic wires the action into its second hidden layer: the first
//! layer sees the observation alone, its output is concatenated with the
//! action and fed onward.

use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::fmt;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Observation vector width.
pub const OBS_DIM: usize = 6;
/// Action vector width.
pub const ACTION_DIM: usize = 2;
/// Hidden-layer width of the full-size networks.
pub const HIDDEN_WIDTH: usize = 200;
/// Variance of the actor weight initialization.
pub const ACTOR_WEIGHT_VARIANCE: f64 = 0.3;
/// Variance of the critic weight initialization.
pub const CRITIC_WEIGHT_VARIANCE: f64 = 0.1;
/// Constant bias initialization.
pub const BIAS_INIT: f64 = 0.1;

/// Floating-point type a network can run on.
pub trait Scalar:
    Float
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Tag stored in checkpoints.
    const DTYPE: &'static str;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// Activation tanh. The `f64` impl is libm-exact; the `f32` impl is a
    /// clamped rational approximation (max abs error ~1e-4 near the clamp,
    /// ~1e-7 elsewhere) that is several times faster on the training path.
    fn tanh_act(self) -> Self;

    /// `c = alpha * a * b + beta * c` on row-major buffers with explicit
    /// strides; see [`gemm`] for the safe wrapper.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";

    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }

    #[inline]
    fn tanh_act(self) -> Self {
        // 7th-order continued-fraction rational; crosses 1 at ~4.9718, so
        // clamping there keeps the output inside [-1, 1] without a jump.
        const CAP: f32 = 4.971_786_9;
        let x = self.clamp(-CAP, CAP);
        let t = x * x;
        let p = x * (135_135.0 + t * (17_325.0 + t * (378.0 + t)));
        let q = 135_135.0 + t * (62_370.0 + t * (3_150.0 + t * 28.0));
        (p / q).clamp(-1.0, 1.0)
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";

    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_f64(self) -> f64 {
        self
    }

    #[inline]
    fn tanh_act(self) -> Self {
        self.tanh()
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// `c(m x n) = alpha * op(a) * op(b) + beta * c` on row-major slices.
///
/// `transpose_a` means `a` is stored `k x m` and used transposed;
/// `transpose_b` means `b` is stored `n x k`.
pub(crate) fn gemm<T: Scalar>(
    transpose_a: bool,
    transpose_b: bool,
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: &[T],
    b: &[T],
    beta: T,
    c: &mut [T],
) {
    assert_eq!(a.len(), m * k, "gemm: lhs size");
    assert_eq!(b.len(), k * n, "gemm: rhs size");
    assert_eq!(c.len(), m * n, "gemm: out size");
    let (rsa, csa) = if transpose_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if transpose_b { (1, k as isize) } else { (n as isize, 1) };
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Linear,
}

/// Fully connected layer, weights stored row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

/// Gradient buffers shaped like one [`DenseLayer`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads<T> {
    pub d_weights: Vec<T>,
    pub d_biases: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    /// Weights sampled from `N(0, weight_std²)`, biases constant.
    pub fn init(
        rng: &mut impl Rng,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        weight_std: f64,
        bias: f64,
    ) -> Self {
        let normal = Normal::new(0.0, weight_std).expect("weight std must be finite");
        let weights = (0..in_dim * out_dim)
            .map(|_| T::from_f64(normal.sample(rng)))
            .collect();
        Self {
            in_dim,
            out_dim,
            activation,
            weights,
            biases: vec![T::from_f64(bias); out_dim],
        }
    }

    /// `y = act(x Wᵀ + b)` for a `batch x in_dim` input.
    pub fn forward_batch(&self, x: &[T], batch: usize) -> Vec<T> {
        assert_eq!(x.len(), batch * self.in_dim, "layer input size");
        let mut y = vec![T::zero(); batch * self.out_dim];
        gemm(
            false,
            true,
            batch,
            self.in_dim,
            self.out_dim,
            T::one(),
            x,
            &self.weights,
            T::zero(),
            &mut y,
        );
        for row in y.chunks_mut(self.out_dim) {
            for (v, b) in row.iter_mut().zip(&self.biases) {
                *v += *b;
            }
        }
        match self.activation {
            Activation::Tanh => y.iter_mut().for_each(|v| *v = v.tanh_act()),
            Activation::Relu => y.iter_mut().for_each(|v| *v = v.max(T::zero())),
            Activation::Linear => {}
        }
        y
    }

    /// Backpropagates `dy` (gradient w.r.t. the layer output) given the
    /// cached input `x` and output `y`. Fills `grads` when provided and
    /// returns the gradient w.r.t. `x`.
    pub fn backward_batch(
        &self,
        x: &[T],
        y: &[T],
        mut dy: Vec<T>,
        batch: usize,
        grads: Option<&mut LayerGrads<T>>,
    ) -> Vec<T> {
        assert_eq!(x.len(), batch * self.in_dim, "layer cached input size");
        assert_eq!(y.len(), batch * self.out_dim, "layer cached output size");
        assert_eq!(dy.len(), batch * self.out_dim, "layer output grad size");
        // dz = dy ⊙ act'(z), with act' recovered from the cached output
        match self.activation {
            Activation::Tanh => {
                for (d, &o) in dy.iter_mut().zip(y) {
                    *d *= T::one() - o * o;
                }
            }
            Activation::Relu => {
                for (d, &o) in dy.iter_mut().zip(y) {
                    if o <= T::zero() {
                        *d = T::zero();
                    }
                }
            }
            Activation::Linear => {}
        }
        if let Some(g) = grads {
            assert_eq!(g.d_weights.len(), self.weights.len(), "grad shape mismatch");
            // dW = dzᵀ x
            gemm(
                true,
                false,
                self.out_dim,
                batch,
                self.in_dim,
                T::one(),
                &dy,
                x,
                T::zero(),
                &mut g.d_weights,
            );
            for b in g.d_biases.iter_mut() {
                *b = T::zero();
            }
            for row in dy.chunks(self.out_dim) {
                for (b, &d) in g.d_biases.iter_mut().zip(row) {
                    *b += d;
                }
            }
        }
        // dx = dz W
        let mut dx = vec![T::zero(); batch * self.in_dim];
        gemm(
            false,
            false,
            batch,
            self.out_dim,
            self.in_dim,
            T::one(),
            &dy,
            &self.weights,
            T::zero(),
            &mut dx,
        );
        dx
    }

    pub fn zero_grads(&self) -> LayerGrads<T> {
        LayerGrads {
            d_weights: vec![T::zero(); self.weights.len()],
            d_biases: vec![T::zero(); self.biases.len()],
        }
    }
}

/// Plain layer stack (used by the actor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T> {
    pub layers: Vec<DenseLayer<T>>,
}

/// Per-layer inputs captured during a forward pass; `xs[i]` feeds layer
/// `i`, `xs[len]` is the final output.
pub struct MlpCache<T> {
    batch: usize,
    xs: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads<T> {
    pub layers: Vec<LayerGrads<T>>,
}

impl<T: Scalar> MlpGrads<T> {
    pub fn tensors(&self) -> Vec<&Vec<T>> {
        self.layers
            .iter()
            .flat_map(|l| [&l.d_weights, &l.d_biases])
            .collect()
    }
}

impl<T: Scalar> Mlp<T> {
    pub fn forward_batch(&self, x: &[T], batch: usize) -> (Vec<T>, MlpCache<T>) {
        let mut xs = Vec::with_capacity(self.layers.len() + 1);
        xs.push(x.to_vec());
        for layer in &self.layers {
            let y = layer.forward_batch(xs.last().unwrap(), batch);
            xs.push(y);
        }
        (xs.last().unwrap().clone(), MlpCache { batch, xs })
    }

    /// Forward pass without gradient bookkeeping.
    pub fn infer(&self, x: &[T], batch: usize) -> Vec<T> {
        let mut cur = x.to_vec();
        for layer in &self.layers {
            cur = layer.forward_batch(&cur, batch);
        }
        cur
    }

    pub fn backward_batch(&self, cache: &MlpCache<T>, d_out: Vec<T>) -> (MlpGrads<T>, Vec<T>) {
        assert_eq!(
            d_out.len(),
            cache.batch * self.layers.last().expect("empty mlp").out_dim,
            "stale or mismatched cache"
        );
        let mut grads = MlpGrads {
            layers: self.layers.iter().map(|l| l.zero_grads()).collect(),
        };
        let mut dy = d_out;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            dy = layer.backward_batch(
                &cache.xs[i],
                &cache.xs[i + 1],
                dy,
                cache.batch,
                Some(&mut grads.layers[i]),
            );
        }
        (grads, dy)
    }

    pub fn param_tensors(&self) -> Vec<&Vec<T>> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weights, &l.biases])
            .collect()
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Vec<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.biases])
            .collect()
    }
}

/// Deterministic policy network; tanh output keeps actions in `[-1, 1]²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorNet<T> {
    pub net: Mlp<T>,
}

impl<T: Scalar> ActorNet<T> {
    /// Arbitrary-size constructor, used by the oracle tests.
    pub fn init_with_dims(
        rng: &mut impl Rng,
        obs_dim: usize,
        hidden: &[usize],
        action_dim: usize,
        weight_std: f64,
        bias: f64,
    ) -> Self {
        let mut dims = vec![obs_dim];
        dims.extend_from_slice(hidden);
        dims.push(action_dim);
        let layers = dims
            .windows(2)
            .map(|w| DenseLayer::init(rng, w[0], w[1], Activation::Tanh, weight_std, bias))
            .collect();
        Self { net: Mlp { layers } }
    }

    pub fn obs_dim(&self) -> usize {
        self.net.layers.first().expect("empty actor").in_dim
    }

    pub fn action_dim(&self) -> usize {
        self.net.layers.last().expect("empty actor").out_dim
    }

    pub fn forward_batch(&self, obs: &[T], batch: usize) -> (Vec<T>, MlpCache<T>) {
        self.net.forward_batch(obs, batch)
    }

    pub fn infer(&self, obs: &[T], batch: usize) -> Vec<T> {
        self.net.infer(obs, batch)
    }

    /// Gradients of `sum(d_action ⊙ action)` w.r.t. the parameters.
    pub fn backward_batch(&self, cache: &MlpCache<T>, d_action: Vec<T>) -> MlpGrads<T> {
        self.net.backward_batch(cache, d_action).0
    }

    pub fn param_tensors(&self) -> Vec<&Vec<T>> {
        self.net.param_tensors()
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Vec<T>> {
        self.net.param_tensors_mut()
    }

    /// Soft update `self ← tau * source + (1 - tau) * self`.
    pub fn blend_from(&mut self, source: &Self, tau: f64) {
        blend_tensors(self.param_tensors_mut(), source.param_tensors(), tau);
    }
}

/// Q-network. The observation enters at the first layer; the action is
/// concatenated onto the first hidden activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticNet<T> {
    pub layer1: DenseLayer<T>,
    pub layer2: DenseLayer<T>,
    pub layer3: DenseLayer<T>,
    pub out: DenseLayer<T>,
}

pub struct CriticCache<T> {
    batch: usize,
    obs: Vec<T>,
    h1: Vec<T>,
    x2: Vec<T>,
    h2: Vec<T>,
    h3: Vec<T>,
    q: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticGrads<T> {
    pub layer1: LayerGrads<T>,
    pub layer2: LayerGrads<T>,
    pub layer3: LayerGrads<T>,
    pub out: LayerGrads<T>,
}

impl<T: Scalar> CriticGrads<T> {
    pub fn tensors(&self) -> Vec<&Vec<T>> {
        [&self.layer1, &self.layer2, &self.layer3, &self.out]
            .into_iter()
            .flat_map(|l| [&l.d_weights, &l.d_biases])
            .collect()
    }
}

impl<T: Scalar> CriticNet<T> {
    pub fn init_with_dims(
        rng: &mut impl Rng,
        obs_dim: usize,
        action_dim: usize,
        hidden: [usize; 3],
        weight_std: f64,
        bias: f64,
    ) -> Self {
        Self {
            layer1: DenseLayer::init(rng, obs_dim, hidden[0], Activation::Tanh, weight_std, bias),
            layer2: DenseLayer::init(
                rng,
                hidden[0] + action_dim,
                hidden[1],
                Activation::Tanh,
                weight_std,
                bias,
            ),
            layer3: DenseLayer::init(rng, hidden[1], hidden[2], Activation::Tanh, weight_std, bias),
            out: DenseLayer::init(rng, hidden[2], 1, Activation::Linear, weight_std, bias),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.layer1.in_dim
    }

    pub fn action_dim(&self) -> usize {
        self.layer2.in_dim - self.layer1.out_dim
    }

    /// Returns one Q value per batch row.
    pub fn forward_batch(&self, obs: &[T], actions: &[T], batch: usize) -> (Vec<T>, CriticCache<T>) {
        let action_dim = self.action_dim();
        assert_eq!(obs.len(), batch * self.obs_dim(), "critic obs size");
        assert_eq!(actions.len(), batch * action_dim, "critic action size");
        let h1 = self.layer1.forward_batch(obs, batch);
        let x2 = concat_cols(&h1, self.layer1.out_dim, actions, action_dim, batch);
        let h2 = self.layer2.forward_batch(&x2, batch);
        let h3 = self.layer3.forward_batch(&h2, batch);
        let q = self.out.forward_batch(&h3, batch);
        (
            q.clone(),
            CriticCache { batch, obs: obs.to_vec(), h1, x2, h2, h3, q },
        )
    }

    pub fn infer(&self, obs: &[T], actions: &[T], batch: usize) -> Vec<T> {
        self.forward_batch(obs, actions, batch).0
    }

    /// Exact gradients of `sum(dq ⊙ q)` w.r.t. parameters and both inputs.
    pub fn backward_batch(
        &self,
        cache: &CriticCache<T>,
        dq: &[T],
    ) -> (CriticGrads<T>, Vec<T>, Vec<T>) {
        let mut grads = CriticGrads {
            layer1: self.layer1.zero_grads(),
            layer2: self.layer2.zero_grads(),
            layer3: self.layer3.zero_grads(),
            out: self.out.zero_grads(),
        };
        let (d_h1, d_action) = self.backward_through_stack(cache, dq, Some(&mut grads));
        let d_obs = self.layer1.backward_batch(
            &cache.obs,
            &cache.h1,
            d_h1,
            cache.batch,
            Some(&mut grads.layer1),
        );
        (grads, d_obs, d_action)
    }

    /// Gradient of `sum(dq ⊙ q)` w.r.t. the action input only. Skips the
    /// parameter-gradient work; used for the actor update.
    pub fn action_gradient(&self, cache: &CriticCache<T>, dq: &[T]) -> Vec<T> {
        self.backward_through_stack(cache, dq, None).1
    }

    /// Shared reverse sweep down to the layer-2 input split.
    fn backward_through_stack(
        &self,
        cache: &CriticCache<T>,
        dq: &[T],
        grads: Option<&mut CriticGrads<T>>,
    ) -> (Vec<T>, Vec<T>) {
        assert_eq!(dq.len(), cache.batch, "stale or mismatched critic cache");
        let (mut g_out, mut g3, mut g2) = (None, None, None);
        if let Some(g) = grads {
            g_out = Some(&mut g.out);
            g3 = Some(&mut g.layer3);
            g2 = Some(&mut g.layer2);
        }
        let d_h3 = self
            .out
            .backward_batch(&cache.h3, &cache.q, dq.to_vec(), cache.batch, g_out);
        let d_h2 = self
            .layer3
            .backward_batch(&cache.h2, &cache.h3, d_h3, cache.batch, g3);
        let d_x2 = self
            .layer2
            .backward_batch(&cache.x2, &cache.h2, d_h2, cache.batch, g2);
        split_cols(&d_x2, self.layer1.out_dim, self.action_dim(), cache.batch)
    }

    pub fn param_tensors(&self) -> Vec<&Vec<T>> {
        [&self.layer1, &self.layer2, &self.layer3, &self.out]
            .into_iter()
            .flat_map(|l| [&l.weights, &l.biases])
            .collect()
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Vec<T>> {
        [&mut self.layer1, &mut self.layer2, &mut self.layer3, &mut self.out]
            .into_iter()
            .flat_map(|l| [&mut l.weights, &mut l.biases])
            .collect()
    }

    pub fn blend_from(&mut self, source: &Self, tau: f64) {
        blend_tensors(self.param_tensors_mut(), source.param_tensors(), tau);
    }
}

/// Full-size actor: 6 → 200 → 200 → 200 → 2, tanh throughout.
pub fn init_actor<T: Scalar>(rng: &mut impl Rng) -> ActorNet<T> {
    ActorNet::init_with_dims(
        rng,
        OBS_DIM,
        &[HIDDEN_WIDTH; 3],
        ACTION_DIM,
        ACTOR_WEIGHT_VARIANCE.sqrt(),
        BIAS_INIT,
    )
}

/// Full-size critic: 6 → 200, (200+2) → 200, 200 → 200, 200 → 1 linear.
pub fn init_critic<T: Scalar>(rng: &mut impl Rng) -> CriticNet<T> {
    CriticNet::init_with_dims(
        rng,
        OBS_DIM,
        ACTION_DIM,
        [HIDDEN_WIDTH; 3],
        CRITIC_WEIGHT_VARIANCE.sqrt(),
        BIAS_INIT,
    )
}

fn concat_cols<T: Scalar>(a: &[T], a_cols: usize, b: &[T], b_cols: usize, batch: usize) -> Vec<T> {
    assert_eq!(a.len(), batch * a_cols);
    assert_eq!(b.len(), batch * b_cols);
    let mut out = Vec::with_capacity(batch * (a_cols + b_cols));
    for i in 0..batch {
        out.extend_from_slice(&a[i * a_cols..(i + 1) * a_cols]);
        out.extend_from_slice(&b[i * b_cols..(i + 1) * b_cols]);
    }
    out
}

fn split_cols<T: Scalar>(x: &[T], a_cols: usize, b_cols: usize, batch: usize) -> (Vec<T>, Vec<T>) {
    assert_eq!(x.len(), batch * (a_cols + b_cols));
    let mut a = Vec::with_capacity(batch * a_cols);
    let mut b = Vec::with_capacity(batch * b_cols);
    for row in x.chunks(a_cols + b_cols) {
        a.extend_from_slice(&row[..a_cols]);
        b.extend_from_slice(&row[a_cols..]);
    }
    (a, b)
}

/// Whether an ADAM step descends or ascends the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

/// ADAM optimizer state for one network's parameter tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(alpha: f64, tensor_lens: &[usize]) -> Self {
        Self {
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: tensor_lens.iter().map(|&l| vec![T::zero(); l]).collect(),
            v: tensor_lens.iter().map(|&l| vec![T::zero(); l]).collect(),
        }
    }

    pub fn for_params(alpha: f64, tensors: &[&Vec<T>]) -> Self {
        let lens: Vec<usize> = tensors.iter().map(|t| t.len()).collect();
        Self::new(alpha, &lens)
    }

    /// One bias-corrected update. `Maximize` negates the gradients.
    pub fn step(&mut self, mut params: Vec<&mut Vec<T>>, grads: Vec<&Vec<T>>, direction: Direction) {
        assert_eq!(params.len(), self.m.len(), "tensor count mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient count mismatch");
        self.t += 1;
        let c1 = T::from_f64(1.0 / (1.0 - self.beta1.powi(self.t as i32)));
        let c2 = T::from_f64(1.0 / (1.0 - self.beta2.powi(self.t as i32)));
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let one_m_b1 = T::from_f64(1.0 - self.beta1);
        let one_m_b2 = T::from_f64(1.0 - self.beta2);
        let alpha = T::from_f64(self.alpha);
        let eps = T::from_f64(self.epsilon);
        let sign = match direction {
            Direction::Minimize => T::one(),
            Direction::Maximize => -T::one(),
        };
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(&grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            assert_eq!(p.len(), m.len(), "parameter/moment shape mismatch");
            assert_eq!(g.len(), m.len(), "gradient/moment shape mismatch");
            for i in 0..p.len() {
                let grad = sign * g[i];
                m[i] = b1 * m[i] + one_m_b1 * grad;
                v[i] = b2 * v[i] + one_m_b2 * grad * grad;
                let m_hat = m[i] * c1;
                let v_hat = v[i] * c2;
                p[i] = p[i] - alpha * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Flat, ordered copy of all parameters of one network (layer order,
/// weights before biases).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBlock<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> ParameterBlock<T> {
    pub fn from_tensors(tensors: &[&Vec<T>]) -> Self {
        let mut values = Vec::with_capacity(tensors.iter().map(|t| t.len()).sum());
        for t in tensors {
            values.extend_from_slice(t);
        }
        Self { values }
    }

    pub fn assign_to(&self, tensors: Vec<&mut Vec<T>>) {
        let total: usize = tensors.iter().map(|t| t.len()).sum();
        assert_eq!(self.values.len(), total, "parameter block size mismatch");
        let mut offset = 0;
        for t in tensors {
            let len = t.len();
            t.copy_from_slice(&self.values[offset..offset + len]);
            offset += len;
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `target ← tau * source + (1 - tau) * target`, element-wise.
pub fn soft_update<T: Scalar>(target: &mut ParameterBlock<T>, source: &ParameterBlock<T>, tau: f64) {
    assert_eq!(target.len(), source.len(), "parameter block shape mismatch");
    blend_slice(&mut target.values, &source.values, tau);
}

fn blend_tensors<T: Scalar>(targets: Vec<&mut Vec<T>>, sources: Vec<&Vec<T>>, tau: f64) {
    assert_eq!(targets.len(), sources.len(), "tensor count mismatch");
    for (t, s) in targets.into_iter().zip(sources) {
        blend_slice(t, s, tau);
    }
}

fn blend_slice<T: Scalar>(target: &mut [T], source: &[T], tau: f64) {
    assert_eq!(target.len(), source.len(), "blend shape mismatch");
    let tau = T::from_f64(tau);
    let keep = T::one() - tau;
    for (t, &s) in target.iter_mut().zip(source) {
        *t = tau * s + keep * *t;
    }
}
