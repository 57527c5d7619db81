use crate::math::{matmul_nn, matmul_nt, matmul_tn_acc, matvec_bias, Mat};
use crate::rng::Rng;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::orthogonal;

/// One dense layer; `w` is (out, in) row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Layer {
    pub w: Mat,
    pub b: Vec<f64>,
}

/// Multilayer perceptron with tanh hidden activations and an identity output
/// layer. `dropout` is the rate applied to hidden activations when a mask
/// draw is supplied; masks use inverted scaling (entries are 0 or 1/(1-p)),
/// so inference without a draw needs no rescaling.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
    pub dropout: f64,
}

/// Per-sample dropout masks for a batch forward pass, one (batch, width)
/// matrix per hidden layer.
#[derive(Clone, Debug)]
pub struct DropoutDraw {
    pub masks: Vec<Mat>,
}

/// A single fixed mask per hidden layer, shared across all inputs. This is
/// what makes a dropout network behave as one concrete ensemble member.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UnitMask {
    pub per_layer: Vec<Vec<f64>>,
}

impl DropoutDraw {
    pub fn sample(net: &MlpParams, batch: usize, rng: &mut Rng) -> Self {
        assert!(net.dropout > 0.0, "mask draw on a dropout-free network");
        let keep_scale = 1.0 / (1.0 - net.dropout);
        let masks = net
            .hidden_widths()
            .iter()
            .map(|&w| {
                let mut m = Mat::zeros(batch, w);
                for v in m.data_mut() {
                    *v = if rng.gen::<f64>() < net.dropout { 0.0 } else { keep_scale };
                }
                m
            })
            .collect();
        DropoutDraw { masks }
    }
}

impl UnitMask {
    pub fn sample(net: &MlpParams, rng: &mut Rng) -> Self {
        assert!(net.dropout > 0.0, "mask draw on a dropout-free network");
        let keep_scale = 1.0 / (1.0 - net.dropout);
        let per_layer = net
            .hidden_widths()
            .iter()
            .map(|&w| {
                (0..w)
                    .map(|_| if rng.gen::<f64>() < net.dropout { 0.0 } else { keep_scale })
                    .collect()
            })
            .collect();
        UnitMask { per_layer }
    }
}

/// Batch forward pass record; everything the backward passes need.
pub struct ForwardCache {
    pub input: Mat,
    /// tanh outputs per hidden layer, before any dropout mask.
    pub act: Vec<Mat>,
    /// Mask values and post-mask outputs when a draw was supplied.
    pub masks: Option<Vec<Mat>>,
    pub masked: Option<Vec<Mat>>,
    pub output: Mat,
}

impl ForwardCache {
    /// What the following layer actually consumed as input.
    fn layer_out(&self, l: usize) -> &Mat {
        match &self.masked {
            Some(m) => &m[l],
            None => &self.act[l],
        }
    }
}

/// Tangent-pass record for the directional derivative machinery.
pub struct JvpCache {
    pub v: Mat,
    /// Pre-activation tangents per hidden layer.
    pub s: Vec<Mat>,
    /// Post-activation tangents per hidden layer.
    pub t: Vec<Mat>,
    /// Tangent of the network output: row b holds (J_x f)(x_b) · v_b.
    pub out: Mat,
}

/// Parameter gradients, shaped like the network.
#[derive(Clone, Debug)]
pub struct LayerGrads {
    pub dw: Mat,
    pub db: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Grads {
    pub layers: Vec<LayerGrads>,
}

impl Grads {
    pub fn zeros_like(net: &MlpParams) -> Self {
        Grads {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    dw: Mat::zeros(l.w.rows(), l.w.cols()),
                    db: vec![0.0; l.b.len()],
                })
                .collect(),
        }
    }

    pub fn scale(&mut self, c: f64) {
        for l in &mut self.layers {
            for v in l.dw.data_mut() {
                *v *= c;
            }
            for v in &mut l.db {
                *v *= c;
            }
        }
    }

    pub fn add(&mut self, other: &Grads) {
        assert_eq!(self.layers.len(), other.layers.len());
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.dw.data_mut().iter_mut().zip(b.dw.data()) {
                *x += y;
            }
            for (x, y) in a.db.iter_mut().zip(&b.db) {
                *x += y;
            }
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &self.layers {
            out.push(l.dw.data());
            out.push(l.db.as_slice());
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            out.push(l.dw.data_mut());
            out.push(l.db.as_mut_slice());
        }
        out
    }

    /// Flat indexing matching `MlpParams::param_get`, for gradient checks.
    pub fn param_get(&self, mut idx: usize) -> f64 {
        for l in &self.layers {
            let wn = l.dw.data().len();
            if idx < wn {
                return l.dw.data()[idx];
            }
            idx -= wn;
            if idx < l.db.len() {
                return l.db[idx];
            }
            idx -= l.db.len();
        }
        panic!("gradient index out of range");
    }
}

impl MlpParams {
    /// Builds a network with orthogonal init: gain sqrt(2) on hidden layers,
    /// `final_gain` on the output layer, zero biases.
    pub fn init(sizes: &[usize], final_gain: f64, dropout: f64, rng: &mut Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        assert!((0.0..1.0).contains(&dropout), "dropout rate must be in [0, 1)");
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for i in 0..sizes.len() - 1 {
            let gain = if i + 2 == sizes.len() { final_gain } else { std::f64::consts::SQRT_2 };
            layers.push(Layer {
                w: orthogonal(sizes[i + 1], sizes[i], gain, rng),
                b: vec![0.0; sizes[i + 1]],
            });
        }
        MlpParams { layers, dropout }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().w.rows()
    }

    fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.w.rows()).collect()
    }

    /// Batch forward. A mask draw may only be supplied when the network has a
    /// nonzero dropout rate; omitting it runs the net in inference mode.
    pub fn forward(&self, input: &Mat, draw: Option<&DropoutDraw>) -> ForwardCache {
        assert_eq!(input.cols(), self.in_dim(), "input width mismatch");
        if let Some(d) = draw {
            assert!(self.dropout > 0.0, "mask draw on a dropout-free network");
            assert_eq!(d.masks.len(), self.layers.len() - 1, "mask layer count mismatch");
        }
        let n = self.layers.len();
        let mut act: Vec<Mat> = Vec::with_capacity(n - 1);
        let mut masked: Vec<Mat> = Vec::new();
        let mut output = None;
        for (l, layer) in self.layers.iter().enumerate() {
            let prev: &Mat = if l == 0 {
                input
            } else if draw.is_some() {
                &masked[l - 1]
            } else {
                &act[l - 1]
            };
            let mut z = matmul_nt(prev, &layer.w);
            z.add_bias(&layer.b);
            if l + 1 == n {
                output = Some(z);
                break;
            }
            z.map_inplace(f64::tanh);
            if let Some(d) = draw {
                assert_eq!(d.masks[l].rows(), z.rows(), "mask batch size mismatch");
                let mut m = z.clone();
                for (v, w) in m.data_mut().iter_mut().zip(d.masks[l].data()) {
                    *v *= w;
                }
                masked.push(m);
            }
            act.push(z);
        }
        ForwardCache {
            input: input.clone(),
            act,
            masks: draw.map(|d| d.masks.clone()),
            masked: if draw.is_some() { Some(masked) } else { None },
            output: output.unwrap(),
        }
    }

    /// Inference-mode batch forward without keeping a cache.
    pub fn infer(&self, input: &Mat) -> Mat {
        self.forward(input, None).output
    }

    /// Single-sample inference.
    pub fn infer1(&self, x: &[f64]) -> Vec<f64> {
        let n = self.layers.len();
        let mut cur = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            cur = matvec_bias(&layer.w, &cur, &layer.b);
            if l + 1 < n {
                for v in &mut cur {
                    *v = v.tanh();
                }
            }
        }
        cur
    }

    /// Batch forward with one fixed mask applied to every row: evaluates a
    /// single ensemble member of a dropout network.
    pub fn infer_shared_mask(&self, input: &Mat, mask: &UnitMask) -> Mat {
        assert!(self.dropout > 0.0, "mask on a dropout-free network");
        assert_eq!(mask.per_layer.len(), self.layers.len() - 1);
        let n = self.layers.len();
        let mut cur = input.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = matmul_nt(&cur, &layer.w);
            z.add_bias(&layer.b);
            if l + 1 < n {
                z.map_inplace(f64::tanh);
                for r in 0..z.rows() {
                    for (v, m) in z.row_mut(r).iter_mut().zip(&mask.per_layer[l]) {
                        *v *= m;
                    }
                }
            }
            cur = z;
        }
        cur
    }

    /// Reverse pass. `d_out` holds dL/d(output) per sample; returns gradients
    /// summed over the batch plus dL/d(input) per sample.
    pub fn backward(&self, cache: &ForwardCache, d_out: &Mat) -> (Grads, Mat) {
        let mut grads = Grads::zeros_like(self);
        let d_input = self.backward_into(cache, d_out, &mut grads);
        (grads, d_input)
    }

    /// Reverse pass accumulating into an existing gradient buffer; returns
    /// dL/d(input).
    pub fn backward_into(&self, cache: &ForwardCache, d_out: &Mat, grads: &mut Grads) -> Mat {
        let n = self.layers.len();
        assert_eq!(d_out.rows(), cache.input.rows(), "upstream batch mismatch");
        assert_eq!(d_out.cols(), self.out_dim(), "upstream width mismatch");
        let mut dz = d_out.clone();
        for l in (0..n).rev() {
            if l + 1 < n {
                // dz holds dL/d(layer output l): undo the mask, then tanh.
                if let Some(masks) = &cache.masks {
                    for (v, m) in dz.data_mut().iter_mut().zip(masks[l].data()) {
                        *v *= m;
                    }
                }
                for (v, a) in dz.data_mut().iter_mut().zip(cache.act[l].data()) {
                    *v *= 1.0 - a * a;
                }
            }
            let prev = if l == 0 { &cache.input } else { cache.layer_out(l - 1) };
            matmul_tn_acc(&dz, prev, &mut grads.layers[l].dw);
            for (db, s) in grads.layers[l].db.iter_mut().zip(dz.col_sums()) {
                *db += s;
            }
            dz = matmul_nn(&dz, &self.layers[l].w);
        }
        dz
    }

    /// Tangent (forward-mode) pass: propagates input directions `v` through
    /// the linearisation of the network around the cached activations. Row b
    /// of the result is the Jacobian-vector product at sample b. Dropout
    /// networks are not supported here; the callers that need this
    /// (discriminator gradient penalties) never use dropout.
    pub fn jvp(&self, cache: &ForwardCache, v: &Mat) -> JvpCache {
        assert!(cache.masked.is_none(), "tangent pass does not support dropout");
        assert_eq!(v.rows(), cache.input.rows());
        assert_eq!(v.cols(), self.in_dim());
        let n = self.layers.len();
        let mut s_list: Vec<Mat> = Vec::with_capacity(n - 1);
        let mut t_list: Vec<Mat> = Vec::with_capacity(n - 1);
        let mut out = None;
        for (l, layer) in self.layers.iter().enumerate() {
            let t_prev: &Mat = if l == 0 { v } else { &t_list[l - 1] };
            let s = matmul_nt(t_prev, &layer.w);
            if l + 1 == n {
                out = Some(s);
                break;
            }
            let mut t = s.clone();
            for (tv, a) in t.data_mut().iter_mut().zip(cache.act[l].data()) {
                *tv *= 1.0 - a * a;
            }
            s_list.push(s);
            t_list.push(t);
        }
        JvpCache { v: v.clone(), s: s_list, t: t_list, out: out.unwrap() }
    }

    /// Reverse-over-forward pass: accumulates d/d(params) of
    /// sum_b <d_tangent_b, tangent_out_b> into `grads`. Together with `jvp`
    /// this yields exact parameter gradients of input-gradient penalties.
    ///
    /// Per hidden layer l (s/t tangents, a = tanh output, d = 1 - a^2), the
    /// tangent t_l = d_l * s_l depends on the parameters both through s_l
    /// (adjoint nu = mu * d) and through a_l inside d_l (adjoint
    /// zeta = (alpha - 2 a * mu * s) * d), each contributing a weight-gradient
    /// term against the previous tangent resp. activation.
    pub fn jvp_backward(&self, cache: &ForwardCache, jc: &JvpCache, d_tangent: &Mat, grads: &mut Grads) {
        let n = self.layers.len();
        assert_eq!(d_tangent.rows(), cache.input.rows());
        assert_eq!(d_tangent.cols(), self.out_dim());
        let last = n - 1;
        let t_prev = if last == 0 { &jc.v } else { &jc.t[last - 1] };
        matmul_tn_acc(d_tangent, t_prev, &mut grads.layers[last].dw);
        if last == 0 {
            return;
        }
        let mut mu = matmul_nn(d_tangent, &self.layers[last].w);
        let mut alpha = Mat::zeros(mu.rows(), mu.cols());
        for l in (0..last).rev() {
            let a = &cache.act[l];
            let s = &jc.s[l];
            let mut nu = mu.clone();
            for (v, av) in nu.data_mut().iter_mut().zip(a.data()) {
                *v *= 1.0 - av * av;
            }
            let mut zeta = alpha;
            for i in 0..zeta.data().len() {
                let av = a.data()[i];
                let d = 1.0 - av * av;
                zeta.data_mut()[i] = (zeta.data()[i] - 2.0 * av * mu.data()[i] * s.data()[i]) * d;
            }
            let t_prev = if l == 0 { &jc.v } else { &jc.t[l - 1] };
            let h_prev = if l == 0 { &cache.input } else { &cache.act[l - 1] };
            matmul_tn_acc(&nu, t_prev, &mut grads.layers[l].dw);
            matmul_tn_acc(&zeta, h_prev, &mut grads.layers[l].dw);
            for (db, z) in grads.layers[l].db.iter_mut().zip(zeta.col_sums()) {
                *db += z;
            }
            if l > 0 {
                mu = matmul_nn(&nu, &self.layers[l].w);
                alpha = matmul_nn(&zeta, &self.layers[l].w);
            } else {
                alpha = zeta;
            }
        }
        let _ = alpha;
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.data().len() + l.b.len()).sum()
    }

    pub fn param_get(&self, mut idx: usize) -> f64 {
        for l in &self.layers {
            let wn = l.w.data().len();
            if idx < wn {
                return l.w.data()[idx];
            }
            idx -= wn;
            if idx < l.b.len() {
                return l.b[idx];
            }
            idx -= l.b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn param_set(&mut self, mut idx: usize, value: f64) {
        for l in &mut self.layers {
            let wn = l.w.data().len();
            if idx < wn {
                l.w.data_mut()[idx] = value;
                return;
            }
            idx -= wn;
            if idx < l.b.len() {
                l.b[idx] = value;
                return;
            }
            idx -= l.b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            out.push(l.w.data_mut());
            out.push(l.b.as_mut_slice());
        }
        out
    }
}
