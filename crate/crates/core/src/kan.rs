//! Kolmogorov-Arnold network: learnable spline activations on every edge,
//! summed at the nodes.
//!
//! Each edge computes `phi(x) = w_b * silu(x) + w_s * spline(x)`. Parameters are
//! exposed as one flat vector laid out layer by layer, edge by edge in row-major
//! `(out, in)` order, each edge contributing `[w_b, w_s, c_0, .., c_{G+k-1}]`.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bspline::{make_grid, LocalBasis, SplineFunction};
use crate::error::{KanAftError, Result};

static REVISION: AtomicU64 = AtomicU64::new(1);

fn next_revision() -> u64 {
    REVISION.fetch_add(1, Ordering::Relaxed)
}

/// Domain used for hidden-layer grids until data-driven ranges are set.
pub const DEFAULT_HIDDEN_RANGE: (f64, f64) = (-2.0, 2.0);

/// Standard deviation of the initial spline coefficients.
pub const INIT_COEF_SD: f64 = 0.1;

pub fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

pub fn silu_deriv(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeActivation {
    pub w_b: f64,
    pub w_s: f64,
    pub spline: SplineFunction,
}

impl EdgeActivation {
    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.w_b * silu(x) + self.w_s * self.spline.eval(x)?)
    }

    /// `d phi / d x`.
    pub fn deriv_x(&self, x: f64) -> f64 {
        self.w_b * silu_deriv(x) + self.w_s * self.spline.deriv_x_unchecked(x)
    }

    fn param_count(&self) -> usize {
        2 + self.spline.coefficients.len()
    }

    pub fn domain(&self) -> (f64, f64) {
        self.spline.knots.domain()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `(out_dim, in_dim)`.
    pub edges: Vec<EdgeActivation>,
    /// Same layout as `edges`; `true` means active.
    pub mask: Vec<bool>,
}

impl KanLayer {
    pub fn edge(&self, out: usize, inp: usize) -> &EdgeActivation {
        &self.edges[out * self.in_dim + inp]
    }

    pub fn is_active(&self, out: usize, inp: usize) -> bool {
        self.mask[out * self.in_dim + inp]
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// Regularization weights: `lambda_entropy` scales the entropy term and
/// `lambda_coef` the L1 norm of the spline coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegConfig {
    pub lambda_entropy: f64,
    pub lambda_coef: f64,
}

impl Default for RegConfig {
    fn default() -> Self {
        RegConfig {
            lambda_entropy: 2.0,
            lambda_coef: 0.1,
        }
    }
}

impl RegConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_entropy >= 0.0) || !(self.lambda_coef >= 0.0) {
            return Err(KanAftError::Config(
                "regularization weights must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KanNetwork {
    pub shape: Vec<usize>,
    pub layers: Vec<KanLayer>,
    pub seed: u64,
    #[serde(skip, default = "next_revision")]
    revision: u64,
}

impl PartialEq for KanNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.layers == other.layers && self.seed == other.seed
    }
}

/// Evaluation of one edge at one sample.
#[derive(Debug, Clone, Copy, Default)]
pub struct EdgeEval {
    pub basis: LocalBasis,
    pub silu: f64,
    pub spline: f64,
    pub value: f64,
}

/// Per-sample intermediates kept by [`KanNetwork::forward`] for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    revision: u64,
    /// `inputs[l]` is the input vector of layer `l`.
    pub inputs: Vec<Vec<f64>>,
    /// `edges[l]` follows the row-major layout of `KanLayer::edges`.
    pub edges: Vec<Vec<EdgeEval>>,
    pub output: f64,
}

/// Gradients in the flat parameter layout of the owning network.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub values: Vec<f64>,
    offsets: Vec<Vec<(usize, usize)>>,
}

impl GradientSet {
    pub fn zeros_like(net: &KanNetwork) -> Self {
        let offsets = net.edge_offsets();
        GradientSet {
            values: vec![0.0; net.param_count()],
            offsets,
        }
    }

    /// Gradient slice `[w_b, w_s, c..]` of edge `idx` (row-major) in layer `layer`.
    pub fn edge(&self, layer: usize, idx: usize) -> &[f64] {
        let (start, end) = self.offsets[layer][idx];
        &self.values[start..end]
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }
}

/// Builds a network with `w_b = w_s = 1` and N(0, 0.1^2) spline coefficients.
///
/// `input_ranges` sets the grid domain of each first-layer edge by input index.
/// Hidden layers start on [`DEFAULT_HIDDEN_RANGE`].
pub fn init_network(
    shape: &[usize],
    intervals: usize,
    degree: usize,
    seed: u64,
    input_ranges: &[(f64, f64)],
) -> Result<KanNetwork> {
    if shape.len() < 2 {
        return Err(KanAftError::Config(
            "network shape needs at least an input and an output layer".into(),
        ));
    }
    if shape.contains(&0) {
        return Err(KanAftError::Config("layer widths must be positive".into()));
    }
    if *shape.last().unwrap() != 1 {
        return Err(KanAftError::Config(
            "the output layer must have width 1".into(),
        ));
    }
    if input_ranges.len() != shape[0] {
        return Err(KanAftError::Shape {
            expected: shape[0],
            got: input_ranges.len(),
        });
    }
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_COEF_SD).expect("valid normal");
    let mut layers = Vec::with_capacity(shape.len() - 1);
    for l in 0..shape.len() - 1 {
        let (in_dim, out_dim) = (shape[l], shape[l + 1]);
        let mut edges = Vec::with_capacity(in_dim * out_dim);
        for _out in 0..out_dim {
            for inp in 0..in_dim {
                let (lo, hi) = if l == 0 {
                    input_ranges[inp]
                } else {
                    DEFAULT_HIDDEN_RANGE
                };
                let kv = make_grid(lo, hi, intervals, degree)?;
                let coefficients = (0..kv.basis_count())
                    .map(|_| normal.sample(&mut rng))
                    .collect();
                edges.push(EdgeActivation {
                    w_b: 1.0,
                    w_s: 1.0,
                    spline: SplineFunction::new(kv, coefficients)?,
                });
            }
        }
        layers.push(KanLayer {
            in_dim,
            out_dim,
            mask: vec![true; edges.len()],
            edges,
        });
    }
    Ok(KanNetwork {
        shape: shape.to_vec(),
        layers,
        seed,
        revision: next_revision(),
    })
}

impl KanNetwork {
    pub fn input_dim(&self) -> usize {
        self.shape[0]
    }

    pub fn is_shallow(&self) -> bool {
        self.layers.len() == 1
    }

    pub fn edge_count(&self) -> usize {
        self.layers.iter().map(|l| l.edges.len()).sum()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.edges.iter())
            .map(EdgeActivation::param_count)
            .sum()
    }

    fn edge_offsets(&self) -> Vec<Vec<(usize, usize)>> {
        let mut offset = 0;
        self.layers
            .iter()
            .map(|layer| {
                layer
                    .edges
                    .iter()
                    .map(|e| {
                        let start = offset;
                        offset += e.param_count();
                        (start, offset)
                    })
                    .collect()
            })
            .collect()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for edge in self.layers.iter().flat_map(|l| l.edges.iter()) {
            out.push(edge.w_b);
            out.push(edge.w_s);
            out.extend_from_slice(&edge.spline.coefficients);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(KanAftError::Shape {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut it = params.iter().copied();
        for edge in self.layers.iter_mut().flat_map(|l| l.edges.iter_mut()) {
            edge.w_b = it.next().unwrap();
            edge.w_s = it.next().unwrap();
            for c in edge.spline.coefficients.iter_mut() {
                *c = it.next().unwrap();
            }
        }
        self.touch();
        Ok(())
    }

    /// Mutable access to one edge; invalidates outstanding forward caches.
    pub fn edge_mut(&mut self, layer: usize, out: usize, inp: usize) -> &mut EdgeActivation {
        self.touch();
        let in_dim = self.layers[layer].in_dim;
        &mut self.layers[layer].edges[out * in_dim + inp]
    }

    pub fn set_mask(&mut self, layer: usize, out: usize, inp: usize, active: bool) {
        self.touch();
        let in_dim = self.layers[layer].in_dim;
        self.layers[layer].mask[out * in_dim + inp] = active;
    }

    fn touch(&mut self) {
        self.revision = next_revision();
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape.len() != self.layers.len() + 1 {
            return Err(KanAftError::Config("shape does not match layer count".into()));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.in_dim != self.shape[l] || layer.out_dim != self.shape[l + 1] {
                return Err(KanAftError::Config(format!("layer {l} dimensions do not chain")));
            }
            if layer.edges.len() != layer.in_dim * layer.out_dim
                || layer.mask.len() != layer.edges.len()
            {
                return Err(KanAftError::Config(format!("layer {l} edge matrix has wrong size")));
            }
            for e in &layer.edges {
                e.spline.knots.validate()?;
                if e.spline.coefficients.len() != e.spline.knots.basis_count()
                    || !e.w_b.is_finite()
                    || !e.w_s.is_finite()
                    || e.spline.coefficients.iter().any(|c| !c.is_finite())
                {
                    return Err(KanAftError::Config(format!("layer {l} has an invalid edge")));
                }
            }
        }
        Ok(())
    }

    /// Prediction for one input vector together with its backward cache.
    pub fn forward(&self, z: &[f64]) -> Result<(f64, ForwardCache)> {
        let mut cache = ForwardCache::default();
        let out = self.forward_into(z, &mut cache)?;
        Ok((out, cache))
    }

    pub fn predict(&self, z: &[f64]) -> Result<f64> {
        let mut cache = ForwardCache::default();
        self.forward_into(z, &mut cache)
    }

    /// Like [`forward`](Self::forward) but reuses the buffers of `cache`.
    pub fn forward_into(&self, z: &[f64], cache: &mut ForwardCache) -> Result<f64> {
        if z.len() != self.shape[0] {
            return Err(KanAftError::Shape {
                expected: self.shape[0],
                got: z.len(),
            });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(KanAftError::Domain("network input must be finite".into()));
        }
        let n_layers = self.layers.len();
        cache.inputs.resize(n_layers + 1, Vec::new());
        cache.edges.resize(n_layers, Vec::new());
        cache.inputs[0].clear();
        cache.inputs[0].extend_from_slice(z);
        for (l, layer) in self.layers.iter().enumerate() {
            let (head, tail) = cache.inputs.split_at_mut(l + 1);
            let input = &head[l];
            let next = &mut tail[0];
            next.clear();
            next.resize(layer.out_dim, 0.0);
            let evals = &mut cache.edges[l];
            evals.clear();
            evals.resize(layer.edges.len(), EdgeEval::default());
            for out in 0..layer.out_dim {
                for inp in 0..layer.in_dim {
                    let idx = out * layer.in_dim + inp;
                    if !layer.mask[idx] {
                        continue;
                    }
                    let edge = &layer.edges[idx];
                    let x = input[inp];
                    if !x.is_finite() {
                        return Err(KanAftError::NumericGuard(format!(
                            "non-finite activation entering layer {l}"
                        )));
                    }
                    let basis = edge.spline.knots.basis_local_unchecked(x);
                    let s = silu(x);
                    let sp = edge.spline.eval_local(&basis);
                    let value = edge.w_b * s + edge.w_s * sp;
                    evals[idx] = EdgeEval {
                        basis,
                        silu: s,
                        spline: sp,
                        value,
                    };
                    next[out] += value;
                }
            }
        }
        cache.output = cache.inputs[n_layers][0];
        cache.revision = self.revision;
        Ok(cache.output)
    }

    /// Gradient of the prediction with respect to every parameter, scaled by `upstream`.
    pub fn backward(&self, cache: &ForwardCache, upstream: f64) -> Result<GradientSet> {
        let mut grads = GradientSet::zeros_like(self);
        self.backward_accumulate(cache, upstream, None, &mut grads)?;
        Ok(grads)
    }

    /// Adds `d(upstream * output + sum_e extra_e * phi_e) / d params` into `grads`.
    ///
    /// `edge_extra[l][idx]` weights the raw output of edge `idx` in layer `l`; it lets
    /// per-edge penalties on activation values share one backward sweep.
    pub fn backward_accumulate(
        &self,
        cache: &ForwardCache,
        upstream: f64,
        edge_extra: Option<&[Vec<f64>]>,
        grads: &mut GradientSet,
    ) -> Result<()> {
        if cache.revision != self.revision {
            return Err(KanAftError::ContractViolation(
                "forward cache is stale: the network changed after the forward pass".into(),
            ));
        }
        if grads.values.len() != self.param_count() {
            return Err(KanAftError::Shape {
                expected: self.param_count(),
                got: grads.values.len(),
            });
        }
        let mut node_grad = vec![upstream];
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &cache.inputs[l];
            let mut prev_grad = vec![0.0; layer.in_dim];
            for out in 0..layer.out_dim {
                for inp in 0..layer.in_dim {
                    let idx = out * layer.in_dim + inp;
                    if !layer.mask[idx] {
                        continue;
                    }
                    let extra = edge_extra.map_or(0.0, |e| e[l][idx]);
                    let g = node_grad[out] + extra;
                    if g == 0.0 {
                        continue;
                    }
                    let edge = &layer.edges[idx];
                    let eval = &cache.edges[l][idx];
                    let off = grads.offsets[l][idx].0;
                    grads.values[off] += g * eval.silu;
                    grads.values[off + 1] += g * eval.spline;
                    let n_coef = edge.spline.coefficients.len() as isize;
                    let gw = g * edge.w_s;
                    for (q, b) in eval.basis.values.iter().enumerate().take(edge.spline.knots.degree() + 1) {
                        let j = eval.basis.first + q as isize;
                        if j >= 0 && j < n_coef {
                            grads.values[off + 2 + j as usize] += gw * b;
                        }
                    }
                    if l > 0 {
                        prev_grad[inp] += g * edge.deriv_x(input[inp]);
                    }
                }
            }
            node_grad = prev_grad;
        }
        Ok(())
    }

    /// Empirical L1 norm (mean absolute output) of every edge over `batch`, per layer.
    pub fn edge_norms(&self, batch: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if batch.is_empty() {
            return Err(KanAftError::Domain("empty batch".into()));
        }
        let mut norms: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.edges.len()]).collect();
        let mut cache = ForwardCache::default();
        for z in batch {
            self.forward_into(z, &mut cache)?;
            accumulate_abs(&cache, &mut norms);
        }
        let n = batch.len() as f64;
        norms.iter_mut().flatten().for_each(|v| *v /= n);
        Ok(norms)
    }

    /// Copy of the network with every edge whose batch L1 norm is below `threshold` masked.
    pub fn prune(&self, threshold: f64, batch: &[Vec<f64>]) -> Result<KanNetwork> {
        if !(threshold >= 0.0) {
            return Err(KanAftError::Domain("pruning threshold must be >= 0".into()));
        }
        let norms = self.edge_norms(batch)?;
        let mut pruned = self.clone();
        for (layer, layer_norms) in pruned.layers.iter_mut().zip(&norms) {
            for (m, norm) in layer.mask.iter_mut().zip(layer_norms) {
                if *norm < threshold {
                    *m = false;
                }
            }
        }
        pruned.touch();
        Ok(pruned)
    }

    /// Re-centres hidden-layer grids on the activations the network currently produces for `batch`.
    /// Coefficients are kept; only the knot domain moves. No-op for shallow networks.
    pub fn fit_hidden_grids(&mut self, batch: &[Vec<f64>]) -> Result<()> {
        if self.layers.len() < 2 || batch.is_empty() {
            return Ok(());
        }
        for l in 1..self.layers.len() {
            let mut lo = vec![f64::INFINITY; self.shape[l]];
            let mut hi = vec![f64::NEG_INFINITY; self.shape[l]];
            let mut cache = ForwardCache::default();
            for z in batch {
                self.forward_into(z, &mut cache)?;
                for (i, v) in cache.inputs[l].iter().enumerate() {
                    lo[i] = lo[i].min(*v);
                    hi[i] = hi[i].max(*v);
                }
            }
            let layer = &mut self.layers[l];
            for out in 0..layer.out_dim {
                for inp in 0..layer.in_dim {
                    let (a, b) = padded_range(lo[inp], hi[inp]);
                    let edge = &mut layer.edges[out * layer.in_dim + inp];
                    let kv = &edge.spline.knots;
                    edge.spline.knots = make_grid(a, b, kv.intervals(), kv.degree())?;
                }
            }
            self.touch();
        }
        Ok(())
    }
}

fn accumulate_abs(cache: &ForwardCache, norms: &mut [Vec<f64>]) {
    for (layer_norms, evals) in norms.iter_mut().zip(&cache.edges) {
        for (n, e) in layer_norms.iter_mut().zip(evals) {
            *n += e.value.abs();
        }
    }
}

/// Data range widened by 1% on each side; degenerate ranges fall back to `x +- 1`.
pub fn padded_range(min: f64, max: f64) -> (f64, f64) {
    let range = max - min;
    if !(range > 1e-12) || !range.is_finite() {
        let c = if min.is_finite() { min } else { 0.0 };
        return (c - 1.0, c + 1.0);
    }
    (min - 0.01 * range, max + 0.01 * range)
}

/// Entropy of the normalized per-edge norms of one layer, with `0 log 0 = 0`.
pub fn layer_entropy(norms: &[f64], mask: &[bool]) -> f64 {
    let total: f64 = norms.iter().zip(mask).filter(|(_, m)| **m).map(|(v, _)| v).sum();
    if total <= 0.0 {
        return 0.0;
    }
    norms
        .iter()
        .zip(mask)
        .filter(|(v, m)| **m && **v > 0.0)
        .map(|(v, _)| {
            let p = v / total;
            -p * p.ln()
        })
        .sum()
}

/// Regularization penalty `sum |Phi_l|_1 + lambda_entropy * sum S(Phi_l) + lambda_coef * sum |C_l|_1`
/// and its gradient over `batch`.
///
/// `|Phi_l|_1` sums the batch-mean absolute outputs of the active edges of layer `l`.
pub fn regularization_loss(
    net: &KanNetwork,
    cfg: &RegConfig,
    batch: &[Vec<f64>],
) -> Result<(f64, GradientSet)> {
    if batch.is_empty() {
        return Err(KanAftError::Domain("regularization needs a non-empty batch".into()));
    }
    let mut caches = Vec::with_capacity(batch.len());
    let mut norms: Vec<Vec<f64>> = net.layers.iter().map(|l| vec![0.0; l.edges.len()]).collect();
    for z in batch {
        let (_, cache) = net.forward(z)?;
        accumulate_abs(&cache, &mut norms);
        caches.push(cache);
    }
    let n = batch.len() as f64;
    norms.iter_mut().flatten().for_each(|v| *v /= n);

    let (value, edge_weights) = reg_value_and_edge_weights(net, cfg, &norms);
    let mut grads = GradientSet::zeros_like(net);
    let mut extra: Vec<Vec<f64>> = net.layers.iter().map(|l| vec![0.0; l.edges.len()]).collect();
    for cache in &caches {
        fill_sign_extra(cache, &edge_weights, 1.0 / n, &mut extra);
        net.backward_accumulate(cache, 0.0, Some(&extra), &mut grads)?;
    }
    add_coef_l1_grad(net, cfg.lambda_coef, 1.0, &mut grads);
    Ok((value, grads))
}

/// Penalty value and `d penalty / d |phi_e|_1` for every edge, given the per-edge norms.
pub(crate) fn reg_value_and_edge_weights(
    net: &KanNetwork,
    cfg: &RegConfig,
    norms: &[Vec<f64>],
) -> (f64, Vec<Vec<f64>>) {
    let mut value = 0.0;
    let mut weights = Vec::with_capacity(net.layers.len());
    for (layer, layer_norms) in net.layers.iter().zip(norms) {
        let total: f64 = layer_norms
            .iter()
            .zip(&layer.mask)
            .filter(|(_, m)| **m)
            .map(|(v, _)| v)
            .sum();
        let entropy = layer_entropy(layer_norms, &layer.mask);
        let coef_l1: f64 = layer
            .edges
            .iter()
            .zip(&layer.mask)
            .filter(|(_, m)| **m)
            .flat_map(|(e, _)| e.spline.coefficients.iter())
            .map(|c| c.abs())
            .sum();
        value += total + cfg.lambda_entropy * entropy + cfg.lambda_coef * coef_l1;
        let w = layer_norms
            .iter()
            .zip(&layer.mask)
            .map(|(v, m)| {
                if !*m {
                    return 0.0;
                }
                // dS/dA_k = -(ln p_k + S) / total
                let ds = if total > 0.0 && *v > 0.0 {
                    -((v / total).ln() + entropy) / total
                } else {
                    0.0
                };
                1.0 + cfg.lambda_entropy * ds
            })
            .collect();
        weights.push(w);
    }
    (value, weights)
}

pub(crate) fn fill_sign_extra(
    cache: &ForwardCache,
    edge_weights: &[Vec<f64>],
    scale: f64,
    extra: &mut [Vec<f64>],
) {
    for ((ex, evals), w) in extra.iter_mut().zip(&cache.edges).zip(edge_weights) {
        for ((x, e), w) in ex.iter_mut().zip(evals).zip(w) {
            *x = scale * w * sign(e.value);
        }
    }
}

pub(crate) fn add_coef_l1_grad(net: &KanNetwork, lambda_coef: f64, scale: f64, grads: &mut GradientSet) {
    if lambda_coef == 0.0 {
        return;
    }
    for (l, layer) in net.layers.iter().enumerate() {
        for (idx, edge) in layer.edges.iter().enumerate() {
            if !layer.mask[idx] {
                continue;
            }
            let off = grads.offsets[l][idx].0 + 2;
            for (q, c) in edge.spline.coefficients.iter().enumerate() {
                grads.values[off + q] += scale * lambda_coef * sign(*c);
            }
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
