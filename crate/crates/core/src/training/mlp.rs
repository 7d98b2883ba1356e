//! A fully connected velocity network with SiLU activations and explicit
//! reverse-mode gradients.

use std::f64::consts::TAU;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::flows::{check_dim, VelocityField};
use crate::grid::Grid;
use crate::rng::RngState;

/// Number of time features appended to the input: `t, sin 2 pi t, cos 2 pi t`.
pub const TIME_FEATURES: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>) -> Result<Self> {
        let spec = MlpSpec { input_dim, hidden };
        spec.validate()?;
        Ok(spec)
    }

    /// Two hidden layers of width 256.
    pub fn with_default_widths(input_dim: usize) -> Self {
        MlpSpec { input_dim, hidden: vec![256, 256] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Invalid("MLP input dimension must be positive".into()));
        }
        if self.hidden.is_empty() {
            return Err(Error::Invalid("MLP needs at least one hidden layer".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Invalid("MLP hidden widths must be positive".into()));
        }
        Ok(())
    }

    /// `(fan_out, fan_in)` per layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut fan_in = self.input_dim + TIME_FEATURES;
        for &w in &self.hidden {
            dims.push((w, fan_in));
            fan_in = w;
        }
        dims.push((self.input_dim, fan_in));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(o, i)| o * i + o).sum()
    }
}

/// All weights and biases in one buffer, layer by layer: `W` (row-major,
/// `fan_out x fan_in`) followed by `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    spec: MlpSpec,
    flat: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(spec: &MlpSpec) -> Result<Self> {
        spec.validate()?;
        Ok(MlpParams { spec: spec.clone(), flat: vec![0.0; spec.param_count()] })
    }

    /// Uniform weights in `+-sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(spec: &MlpSpec, rng: &mut RngState) -> Result<Self> {
        let mut params = Self::zeros(spec)?;
        let mut offset = 0;
        for (fan_out, fan_in) in spec.layer_dims() {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut params.flat[offset..offset + fan_out * fan_in] {
                *w = bound * (2.0 * rng.uniform() - 1.0);
            }
            offset += fan_out * fan_in + fan_out;
        }
        Ok(params)
    }

    pub fn from_flat(spec: &MlpSpec, flat: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if flat.len() != spec.param_count() {
            return Err(Error::Invalid(format!("expected {} parameters, got {}", spec.param_count(), flat.len())));
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("parameters must be finite".into()));
        }
        Ok(MlpParams { spec: spec.clone(), flat })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.flat
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    fn layers(&self) -> Vec<(ArrayView2<'_, f64>, ArrayView1<'_, f64>)> {
        let mut out = Vec::new();
        let mut offset = 0;
        for (fan_out, fan_in) in self.spec.layer_dims() {
            let w = ArrayView2::from_shape((fan_out, fan_in), &self.flat[offset..offset + fan_out * fan_in])
                .expect("layout");
            offset += fan_out * fan_in;
            let b = ArrayView1::from(&self.flat[offset..offset + fan_out]);
            offset += fan_out;
            out.push((w, b));
        }
        out
    }

    /// Batched forward pass. Rows of `x` are samples, `t[i]` their times.
    pub fn forward_batch(&self, t: &[f64], x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ForwardCache)> {
        let d = self.spec.input_dim;
        if x.ncols() != d || x.nrows() != t.len() {
            return Err(Error::shape(&[t.len(), d], x.shape()));
        }
        let batch = t.len();
        let mut h0 = Array2::zeros((batch, d + TIME_FEATURES));
        h0.slice_mut(s![.., ..d]).assign(&x);
        for (i, &ti) in t.iter().enumerate() {
            h0[[i, d]] = ti;
            h0[[i, d + 1]] = (TAU * ti).sin();
            h0[[i, d + 2]] = (TAU * ti).cos();
        }
        let layers = self.layers();
        let mut pre = Vec::with_capacity(layers.len() - 1);
        let mut acts = Vec::with_capacity(layers.len());
        acts.push(h0);
        for (w, b) in &layers[..layers.len() - 1] {
            let z = acts.last().expect("input").dot(&w.t()) + b;
            acts.push(z.mapv(silu));
            pre.push(z);
        }
        let (w, b) = layers.last().expect("output layer");
        let out = acts.last().expect("hidden").dot(&w.t()) + b;
        Ok((out, ForwardCache { pre, acts }))
    }

    /// Mean over the batch of `||v_theta(t_i, x_i) - target_i||^2` and its
    /// gradient with respect to every parameter (same layout as the buffer).
    pub fn loss_and_grads(
        &self,
        t: &[f64],
        x: ArrayView2<'_, f64>,
        target: ArrayView2<'_, f64>,
    ) -> Result<(f64, Vec<f64>)> {
        if target.dim() != x.dim() {
            return Err(Error::shape(x.shape(), target.shape()));
        }
        let batch = t.len();
        if batch == 0 {
            return Err(Error::Invalid("empty batch".into()));
        }
        let (out, cache) = self.forward_batch(t, x)?;
        let resid = &out - &target;
        let loss = resid.iter().map(|r| r * r).sum::<f64>() / batch as f64;

        let layers = self.layers();
        let dims = self.spec.layer_dims();
        let offsets: Vec<usize> = dims
            .iter()
            .scan(0, |acc, (o, i)| {
                let start = *acc;
                *acc += o * i + o;
                Some(start)
            })
            .collect();
        let mut grads = vec![0.0; self.flat.len()];
        let mut delta = resid * (2.0 / batch as f64);
        for l in (0..layers.len()).rev() {
            let (fan_out, fan_in) = dims[l];
            let h_prev = &cache.acts[l];
            let gw = delta.t().dot(h_prev);
            let gb = delta.sum_axis(Axis(0));
            let start = offsets[l];
            let (gw_dst, rest) = grads[start..start + fan_out * fan_in + fan_out].split_at_mut(fan_out * fan_in);
            gw_dst.copy_from_slice(gw.as_standard_layout().as_slice().expect("contiguous"));
            rest.copy_from_slice(gb.as_slice().expect("contiguous"));
            if gw_dst.iter().chain(rest.iter()).any(|g| !g.is_finite()) {
                return Err(Error::NonFinite { step: l, context: format!("gradient of layer {l}") });
            }
            if l > 0 {
                let dh = delta.dot(&layers[l].0);
                delta = dh * cache.pre[l - 1].mapv(silu_grad);
            }
        }
        Ok((loss, grads))
    }
}

/// Activations kept from a forward pass: `acts[0]` is the input with time
/// features, `pre[l]` / `acts[l + 1]` the pre- and post-activation of hidden layer `l`.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub pre: Vec<Array2<f64>>,
    pub acts: Vec<Array2<f64>>,
}

#[inline]
fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

#[inline]
pub(crate) fn silu(u: f64) -> f64 {
    u * sigmoid(u)
}

#[inline]
pub(crate) fn silu_grad(u: f64) -> f64 {
    let s = sigmoid(u);
    s * (1.0 + u * (1.0 - s))
}

/// Single-sample forward pass.
pub fn mlp_forward(params: &MlpParams, t: f64, x: &Grid) -> Result<(Grid, ForwardCache)> {
    check_dim(params.spec.input_dim, x)?;
    let row = ArrayView2::from_shape((1, x.len()), x.data()).expect("row");
    let (out, cache) = params.forward_batch(&[t], row)?;
    Ok((Grid::from_parts(out.into_raw_vec_and_offset().0, x.shape().to_vec()), cache))
}

/// Gradients of the mean squared CFM residual. Returns `(loss, grads)`.
pub fn mlp_param_grads(
    params: &MlpParams,
    t_batch: &[f64],
    x_batch: &[Grid],
    target_batch: &[Grid],
) -> Result<(f64, Vec<f64>)> {
    let x = stack(x_batch, params.spec.input_dim)?;
    let target = stack(target_batch, params.spec.input_dim)?;
    params.loss_and_grads(t_batch, x.view(), target.view())
}

pub(crate) fn stack(items: &[Grid], d: usize) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((items.len(), d));
    for (mut row, g) in out.rows_mut().into_iter().zip(items) {
        check_dim(d, g)?;
        row.assign(&Array1::from(g.data().to_vec()));
    }
    Ok(out)
}

/// A trained network used as a velocity field.
#[derive(Clone, Debug)]
pub struct MlpField {
    params: MlpParams,
}

impl MlpField {
    pub fn new(params: MlpParams) -> Self {
        MlpField { params }
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }
}

impl VelocityField for MlpField {
    fn dim(&self) -> usize {
        self.params.spec.input_dim
    }

    fn eval(&self, t: f64, x: &Grid) -> Result<Grid> {
        crate::error::check_unit_interval("t", t)?;
        let (v, _) = mlp_forward(&self.params, t, x)?;
        if !v.is_finite() {
            return Err(Error::NonFinite { step: 0, context: format!("MLP output at t = {t}") });
        }
        Ok(v)
    }

    fn eval_rows(&self, t: f64, rows: &Grid) -> Result<Grid> {
        crate::error::check_unit_interval("t", t)?;
        let d = self.params.spec.input_dim;
        if rows.shape().len() != 2 || rows.shape()[1] != d {
            return Err(Error::shape(&[rows.shape()[0], d], rows.shape()));
        }
        let view = ArrayView2::from_shape((rows.shape()[0], d), rows.data()).expect("rows");
        let times = vec![t; rows.shape()[0]];
        let (out, _) = self.params.forward_batch(&times, view)?;
        let v = Grid::from_parts(out.into_raw_vec_and_offset().0, rows.shape().to_vec());
        if !v.is_finite() {
            return Err(Error::NonFinite { step: 0, context: format!("MLP output at t = {t}") });
        }
        Ok(v)
    }
}
