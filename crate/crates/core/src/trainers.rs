//! Censoring-aware training of the network on log event times.
//!
//! All three strategies reduce to [`train_weighted_mse`] on some choice of targets and
//! weights:
//!
//! * Buckley-James: censored residuals are replaced by their Kaplan-Meier conditional
//!   expectation, and the fit is repeated until the predictions stop moving.
//! * IPCW: uncensored records are weighted by `1 / G(T-)`, censored records drop out.
//! * Transform: times are mapped to `T*` through integrals of `1 / G`, then fitted
//!   with plain MSE.
//!
//! Every strategy z-scores covariates with training statistics before they reach the
//! network and keeps those statistics in the [`TrainedModel`].

use serde::{Deserialize, Serialize};

use crate::data::{StandardizationStats, SurvivalDataset};
use crate::error::{KanAftError, Result};
use crate::kan::{
    add_coef_l1_grad, fill_sign_extra, init_network, padded_range, reg_value_and_edge_weights,
    ForwardCache, GradientSet, KanNetwork, RegConfig,
};
use crate::metrics::MetricReport;
use crate::optim::{Adam, AdamConfig};
use crate::survival::{
    censoring_km, conditional_residual_expectation, inverse_g_integral, kaplan_meier, Side,
};

/// Floor applied to transformed times before taking logs.
pub const TRANSFORM_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[serde(alias = "bj", alias = "buckley-james")]
    BuckleyJames,
    Ipcw,
    Transform,
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::BuckleyJames => "KAN-AFT-BuckleyJames",
            Strategy::Ipcw => "KAN-AFT-IPCW",
            Strategy::Transform => "KAN-AFT-Transform",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = KanAftError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bj" | "buckley_james" | "buckley-james" => Ok(Strategy::BuckleyJames),
            "ipcw" => Ok(Strategy::Ipcw),
            "transform" => Ok(Strategy::Transform),
            other => Err(KanAftError::Config(format!(
                "unknown strategy '{other}' (expected bj, ipcw or transform)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub strategy: Strategy,
    /// Optimizer epochs per training call (per round for Buckley-James).
    pub epochs: usize,
    pub learning_rate: f64,
    /// Final learning rate as a fraction of `learning_rate` (cosine schedule); 1 keeps it constant.
    pub lr_floor: f64,
    pub max_bj_rounds: usize,
    pub bj_tolerance: f64,
    pub reg: RegConfig,
    /// Overall multiplier on the regularization penalty.
    pub reg_scale: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub grid: usize,
    pub degree: usize,
    /// Hidden layer widths; empty gives the shallow `[p, 1]` network.
    pub hidden: Vec<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        FitConfig {
            strategy: Strategy::BuckleyJames,
            epochs: 1500,
            learning_rate: adam.learning_rate,
            lr_floor: 0.01,
            max_bj_rounds: 20,
            bj_tolerance: 1e-3,
            reg: RegConfig::default(),
            reg_scale: 0.01,
            seed: 0,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            grid: 5,
            degree: 3,
            hidden: Vec::new(),
        }
    }
}

impl FitConfig {
    pub fn with_strategy(strategy: Strategy) -> Self {
        FitConfig {
            strategy,
            ..FitConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(KanAftError::Config(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.lr_floor > 0.0 && self.lr_floor <= 1.0) {
            return bad("lr_floor must lie in (0, 1]");
        }
        if self.max_bj_rounds == 0 {
            return bad("max_bj_rounds must be at least 1");
        }
        if !(self.bj_tolerance > 0.0) {
            return bad("bj_tolerance must be positive");
        }
        if !(self.reg_scale >= 0.0) {
            return bad("reg_scale must be non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam decay rates must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("adam epsilon must be positive");
        }
        if self.grid == 0 {
            return bad("grid must be at least 1");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be positive");
        }
        self.reg.validate()
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub c_index: f64,
    pub mse_log: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: String,
    pub strategy: Strategy,
    pub config: FitConfig,
    pub network: KanNetwork,
    pub covariate_names: Vec<String>,
    pub standardization: StandardizationStats,
    /// Central 98% of each standardized training input; empty for hand-built models.
    #[serde(default)]
    pub input_domains: Vec<(f64, f64)>,
    pub loss_trace: Vec<f64>,
    /// Mean absolute change of the predictions after each Buckley-James round.
    pub bj_convergence_trace: Vec<f64>,
    pub final_train_metrics: Option<TrainMetrics>,
    /// Transform strategy only.
    pub transform_alpha: Option<f64>,
    /// IPCW strategy only: records whose weight needed the positive-G clamp.
    pub ipcw_clamped: usize,
}

impl TrainedModel {
    pub fn input_dim(&self) -> usize {
        self.network.input_dim()
    }

    /// Network output for raw (unstandardized) covariates.
    pub fn predict_log_time(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.input_dim() {
            return Err(KanAftError::Shape {
                expected: self.input_dim(),
                got: z.len(),
            });
        }
        self.network.predict(&self.standardization.apply_row(z))
    }

    pub fn predict_times(&self, data: &SurvivalDataset) -> Result<Vec<f64>> {
        data.covariates
            .iter()
            .map(|z| predict_time(self, z))
            .collect()
    }

    pub fn evaluate(&self, data: &SurvivalDataset) -> Result<MetricReport> {
        let preds = self.predict_times(data)?;
        MetricReport::compute(&data.times, &data.events, &preds)
    }

    /// Masks every edge whose mean absolute activation over `data` falls below `threshold`.
    pub fn prune(&self, threshold: f64, data: &SurvivalDataset) -> Result<TrainedModel> {
        if data.n_covariates() != self.input_dim() {
            return Err(KanAftError::Shape {
                expected: self.input_dim(),
                got: data.n_covariates(),
            });
        }
        let inputs: Vec<Vec<f64>> = data
            .covariates
            .iter()
            .map(|z| self.standardization.apply_row(z))
            .collect();
        Ok(TrainedModel {
            network: self.network.prune(threshold, &inputs)?,
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: TrainedModel = serde_json::from_str(text)?;
        model.network.validate()?;
        if model.standardization.means.len() != model.input_dim()
            || model.covariate_names.len() != model.input_dim()
        {
            return Err(KanAftError::Config(
                "model covariate metadata does not match the network input width".into(),
            ));
        }
        Ok(model)
    }
}

/// `T_hat = exp(KAN(z))` for raw covariates.
pub fn predict_time(model: &TrainedModel, z: &[f64]) -> Result<f64> {
    let log_t = model.predict_log_time(z)?;
    let t = log_t.exp();
    if !(t > 0.0) || !t.is_finite() {
        return Err(KanAftError::NumericGuard(format!(
            "predicted log time {log_t} does not give a positive finite time"
        )));
    }
    Ok(t)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: KanNetwork,
    /// Total loss (weighted MSE plus scaled regularization) before each epoch's update.
    pub loss_trace: Vec<f64>,
}

/// Minimizes `(1/n) sum w_i (y_i - KAN(z_i))^2 + reg_scale * L_R` by full-batch Adam.
pub fn train_weighted_mse(
    net: KanNetwork,
    inputs: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
    cfg: &FitConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = inputs.len();
    if n == 0 {
        return Err(KanAftError::Degenerate("no training records".into()));
    }
    if targets.len() != n || weights.len() != n {
        return Err(KanAftError::Shape {
            expected: n,
            got: targets.len().min(weights.len()),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(KanAftError::Domain("weights must be finite and non-negative".into()));
    }
    if weights.iter().all(|w| *w == 0.0) {
        return Err(KanAftError::Degenerate("all training weights are zero".into()));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(KanAftError::Domain("training targets must be finite".into()));
    }

    let mut net = net;
    let mut adam = Adam::new(cfg.adam(), net.param_count());
    let mut caches = vec![ForwardCache::default(); n];
    let mut residuals = vec![0.0; n];
    let mut grads = GradientSet::zeros_like(&net);
    let mut extra: Vec<Vec<f64>> = net.layers.iter().map(|l| vec![0.0; l.edges.len()]).collect();
    let mut norms: Vec<Vec<f64>> = extra.clone();
    let mut params = net.params();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let inv_n = 1.0 / n as f64;
    let regularize = cfg.reg_scale > 0.0;

    for epoch in 0..cfg.epochs {
        let mut data_loss = 0.0;
        norms.iter_mut().flatten().for_each(|v| *v = 0.0);
        for i in 0..n {
            let pred = net.forward_into(&inputs[i], &mut caches[i])?;
            residuals[i] = pred - targets[i];
            data_loss += weights[i] * residuals[i] * residuals[i];
            if regularize {
                for (ln, evals) in norms.iter_mut().zip(&caches[i].edges) {
                    for (v, e) in ln.iter_mut().zip(evals) {
                        *v += e.value.abs();
                    }
                }
            }
        }
        data_loss *= inv_n;
        let mut loss = data_loss;
        let edge_weights = if regularize {
            norms.iter_mut().flatten().for_each(|v| *v *= inv_n);
            let (reg, w) = reg_value_and_edge_weights(&net, &cfg.reg, &norms);
            loss += cfg.reg_scale * reg;
            Some(w)
        } else {
            None
        };
        if !loss.is_finite() {
            return Err(KanAftError::Divergence { epoch, loss });
        }
        loss_trace.push(loss);

        grads.clear();
        for i in 0..n {
            let upstream = 2.0 * weights[i] * residuals[i] * inv_n;
            match &edge_weights {
                Some(w) => {
                    fill_sign_extra(&caches[i], w, cfg.reg_scale * inv_n, &mut extra);
                    net.backward_accumulate(&caches[i], upstream, Some(&extra), &mut grads)?;
                }
                None => net.backward_accumulate(&caches[i], upstream, None, &mut grads)?,
            }
        }
        if regularize {
            add_coef_l1_grad(&net, cfg.reg.lambda_coef, cfg.reg_scale, &mut grads);
        }
        adam.step_scaled(&mut params, &grads.values, lr_factor(cfg, epoch));
        if params.iter().any(|p| !p.is_finite()) {
            return Err(KanAftError::Divergence {
                epoch,
                loss: f64::NAN,
            });
        }
        net.set_params(&params)?;
    }
    Ok(TrainOutcome {
        network: net,
        loss_trace,
    })
}

/// Cosine annealing from 1 down to `lr_floor` over the epochs of one training call.
fn lr_factor(cfg: &FitConfig, epoch: usize) -> f64 {
    if cfg.epochs <= 1 {
        return 1.0;
    }
    let progress = epoch as f64 / (cfg.epochs - 1) as f64;
    cfg.lr_floor + (1.0 - cfg.lr_floor) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Standardization, network initialization and standardized inputs shared by all strategies.
struct Prepared {
    stats: StandardizationStats,
    inputs: Vec<Vec<f64>>,
    init: KanNetwork,
}

fn prepare(data: &SurvivalDataset, cfg: &FitConfig) -> Result<Prepared> {
    cfg.validate()?;
    data.require_events()?;
    if data.n_covariates() == 0 {
        return Err(KanAftError::Config("dataset has no covariates".into()));
    }
    let stats = StandardizationStats::fit(&data.covariates)?;
    let inputs: Vec<Vec<f64>> = data.covariates.iter().map(|r| stats.apply_row(r)).collect();
    let p = data.n_covariates();
    let ranges: Vec<(f64, f64)> = (0..p)
        .map(|j| {
            let (lo, hi) = inputs
                .iter()
                .map(|r| r[j])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            padded_range(lo, hi)
        })
        .collect();
    let mut shape = vec![p];
    shape.extend(&cfg.hidden);
    shape.push(1);
    let mut init = init_network(&shape, cfg.grid, cfg.degree, cfg.seed, &ranges)?;
    init.fit_hidden_grids(&inputs)?;
    Ok(Prepared {
        stats,
        inputs,
        init,
    })
}

/// Per-column 1% and 99% quantiles (linear interpolation).
fn central_domains(inputs: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let p = inputs.first().map_or(0, Vec::len);
    (0..p)
        .map(|j| {
            let mut col: Vec<f64> = inputs.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            let q = |prob: f64| {
                let pos = prob * (col.len() - 1) as f64;
                let (i, frac) = (pos.floor() as usize, pos.fract());
                let next = col[(i + 1).min(col.len() - 1)];
                col[i] + frac * (next - col[i])
            };
            (q(0.01), q(0.99))
        })
        .collect()
}

fn predict_all(net: &KanNetwork, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut cache = ForwardCache::default();
    inputs.iter().map(|z| net.forward_into(z, &mut cache)).collect()
}

fn finish(
    data: &SurvivalDataset,
    cfg: &FitConfig,
    prepared: Prepared,
    network: KanNetwork,
    loss_trace: Vec<f64>,
) -> Result<TrainedModel> {
    let mut model = TrainedModel {
        version: crate::VERSION.to_string(),
        strategy: cfg.strategy,
        config: cfg.clone(),
        network,
        covariate_names: data.covariate_names.clone(),
        standardization: prepared.stats,
        input_domains: central_domains(&prepared.inputs),
        loss_trace,
        bj_convergence_trace: Vec::new(),
        final_train_metrics: None,
        transform_alpha: None,
        ipcw_clamped: 0,
    };
    model.final_train_metrics = model.evaluate(data).ok().map(|r| TrainMetrics {
        c_index: r.c_index,
        mse_log: r.mse_log,
    });
    Ok(model)
}

/// Iterative Buckley-James imputation on the residual time scale.
///
/// Each round trains from the same seeded initialization, so a round's network depends
/// only on its imputed targets.
pub fn fit_buckley_james(data: &SurvivalDataset, cfg: &FitConfig) -> Result<TrainedModel> {
    let prepared = prepare(data, cfg)?;
    let n = data.len();
    let ones = vec![1.0; n];
    let mut prev = vec![0.0; n];
    let mut trace = Vec::new();
    let mut losses = Vec::new();
    let mut network = prepared.init.clone();
    for _round in 0..cfg.max_bj_rounds {
        let targets = buckley_james_targets(&data.times, &data.events, &prev)?;
        let outcome =
            train_weighted_mse(prepared.init.clone(), &prepared.inputs, &targets, &ones, cfg)?;
        let preds = predict_all(&outcome.network, &prepared.inputs)?;
        let change = preds
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / n as f64;
        if !change.is_finite() {
            return Err(KanAftError::NumericGuard(
                "non-finite change between Buckley-James rounds".into(),
            ));
        }
        trace.push(change);
        losses.extend(outcome.loss_trace);
        network = outcome.network;
        prev = preds;
        if change < cfg.bj_tolerance {
            break;
        }
    }
    let mut model = finish(data, cfg, prepared, network, losses)?;
    model.bj_convergence_trace = trace;
    Ok(model)
}

/// Imputed log-time targets `Y* = Phi + log gamma*` for residuals `gamma = T / exp(Phi)`.
pub fn buckley_james_targets(times: &[f64], events: &[bool], current: &[f64]) -> Result<Vec<f64>> {
    let residuals: Vec<f64> = times
        .iter()
        .zip(current)
        .map(|(t, phi)| t / phi.exp())
        .collect();
    if let Some(r) = residuals.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(KanAftError::NumericGuard(format!(
            "residual time {r} is not positive and finite"
        )));
    }
    let km = kaplan_meier(&residuals, events)?;
    residuals
        .iter()
        .zip(events)
        .zip(current)
        .map(|((r, e), phi)| {
            let imputed = if *e {
                *r
            } else {
                conditional_residual_expectation(&km, *r)?
            };
            Ok(phi + imputed.ln())
        })
        .collect()
}

/// IPCW weights with the number of records that needed clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct IpcwWeights {
    pub weights: Vec<f64>,
    pub clamped: usize,
}

/// `w_i = delta_i / G(T_i-)`, with `G` the censoring Kaplan-Meier curve.
pub fn compute_ipcw_weights(data: &SurvivalDataset) -> Result<IpcwWeights> {
    data.require_events()?;
    let g = censoring_km(&data.times, &data.events)?;
    let floor = g.min_positive().unwrap_or(1.0);
    let mut clamped = 0;
    let weights = data
        .times
        .iter()
        .zip(&data.events)
        .map(|(t, e)| {
            if !*e {
                return Ok(0.0);
            }
            let mut gv = g.eval(*t, Side::Left)?;
            if gv <= 0.0 {
                clamped += 1;
                gv = floor;
            }
            Ok(1.0 / gv)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(IpcwWeights { weights, clamped })
}

pub fn fit_ipcw(data: &SurvivalDataset, cfg: &FitConfig) -> Result<TrainedModel> {
    let w = compute_ipcw_weights(data)?;
    let prepared = prepare(data, cfg)?;
    let targets: Vec<f64> = data.times.iter().map(|t| t.ln()).collect();
    let outcome = train_weighted_mse(
        prepared.init.clone(),
        &prepared.inputs,
        &targets,
        &w.weights,
        cfg,
    )?;
    let mut model = finish(data, cfg, prepared, outcome.network, outcome.loss_trace)?;
    model.ipcw_clamped = w.clamped;
    Ok(model)
}

/// Transformed times `T*` and the tuning constant `alpha` that keeps them non-negative.
pub fn transform_times(data: &SurvivalDataset) -> Result<(Vec<f64>, f64)> {
    data.require_events()?;
    if data.n_events() == data.len() {
        return Ok((data.times.clone(), 0.0));
    }
    let g = censoring_km(&data.times, &data.events)?;
    let integrals = data
        .times
        .iter()
        .map(|t| inverse_g_integral(&g, *t))
        .collect::<Result<Vec<f64>>>()?;
    let g_left = data
        .times
        .iter()
        .map(|t| g.eval(*t, Side::Left))
        .collect::<Result<Vec<f64>>>()?;

    let mut alpha = f64::INFINITY;
    for i in 0..data.len() {
        if !data.events[i] {
            continue;
        }
        if g_left[i] <= 0.0 {
            return Err(KanAftError::UnsupportedTail {
                at: data.times[i],
                time: data.times[i],
            });
        }
        let t = data.times[i];
        let num = integrals[i] - t;
        let den = t / g_left[i] - integrals[i];
        // G(u-) = 1 on [0, T] gives 0/0: that record places no constraint on alpha
        if den <= 0.0 {
            continue;
        }
        alpha = alpha.min(num / den);
    }
    if !alpha.is_finite() {
        alpha = 0.0;
    }
    let mut out = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        let t = data.times[i];
        let phi2 = (1.0 + alpha) * integrals[i];
        let value = if data.events[i] {
            phi2 - alpha * t / g_left[i]
        } else {
            phi2
        };
        if value < -1e-9 || !value.is_finite() {
            return Err(KanAftError::ContractViolation(format!(
                "transformed time {value} for record {i} is negative (alpha = {alpha})"
            )));
        }
        out.push(value);
    }
    Ok((out, alpha))
}

pub fn fit_transform(data: &SurvivalDataset, cfg: &FitConfig) -> Result<TrainedModel> {
    let (t_star, alpha) = transform_times(data)?;
    let prepared = prepare(data, cfg)?;
    let targets: Vec<f64> = t_star.iter().map(|t| t.max(TRANSFORM_FLOOR).ln()).collect();
    let ones = vec![1.0; data.len()];
    let outcome = train_weighted_mse(prepared.init.clone(), &prepared.inputs, &targets, &ones, cfg)?;
    let mut model = finish(data, cfg, prepared, outcome.network, outcome.loss_trace)?;
    model.transform_alpha = Some(alpha);
    Ok(model)
}

/// Dispatches on `cfg.strategy`.
pub fn fit(data: &SurvivalDataset, cfg: &FitConfig) -> Result<TrainedModel> {
    match cfg.strategy {
        Strategy::BuckleyJames => fit_buckley_james(data, cfg),
        Strategy::Ipcw => fit_ipcw(data, cfg),
        Strategy::Transform => fit_transform(data, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(events: Vec<bool>) -> SurvivalDataset {
        SurvivalDataset::new(
            vec![1.0, 2.0, 3.0, 4.0][..events.len()].to_vec(),
            events.clone(),
            (0..events.len()).map(|i| vec![i as f64]).collect(),
            vec!["x".into()],
        )
        .unwrap()
    }

    #[test]
    fn ipcw_weight_examples() {
        let w = compute_ipcw_weights(&tiny(vec![true; 3])).unwrap();
        assert_eq!(w.weights, vec![1.0; 3]);
        let w = compute_ipcw_weights(&tiny(vec![true, false, true])).unwrap();
        assert_eq!(w.weights, vec![1.0, 0.0, 2.0]);
        assert_eq!(w.clamped, 0);
        assert!(matches!(
            compute_ipcw_weights(&tiny(vec![false; 3])),
            Err(KanAftError::Degenerate(_))
        ));
    }

    #[test]
    fn transform_without_censoring_is_identity() {
        let d = tiny(vec![true; 4]);
        let (t, alpha) = transform_times(&d).unwrap();
        assert_eq!(alpha, 0.0);
        assert_eq!(t, d.times);
    }

    #[test]
    fn bj_targets_without_censoring_are_log_times() {
        let t = [0.5, 1.5, 2.5];
        let y = buckley_james_targets(&t, &[true; 3], &[0.0; 3]).unwrap();
        for (a, b) in y.iter().zip(&t) {
            assert_eq!(*a, b.ln());
        }
    }

    #[test]
    fn bj_targets_never_shrink_censored_residuals() {
        let t = [0.5, 1.5, 2.5, 0.7, 3.1];
        let e = [true, false, true, false, true];
        let phi = [0.1, -0.2, 0.3, 0.0, 0.05];
        let y = buckley_james_targets(&t, &e, &phi).unwrap();
        for i in 0..5 {
            assert!(y[i] >= t[i].ln() - 1e-12);
        }
    }

    #[test]
    fn zero_weights_and_bad_config_are_rejected() {
        let net = init_network(&[1, 1], 3, 3, 0, &[(-1.0, 1.0)]).unwrap();
        let cfg = FitConfig::default();
        let err = train_weighted_mse(net.clone(), &[vec![0.0]], &[1.0], &[0.0], &cfg).unwrap_err();
        assert!(matches!(err, KanAftError::Degenerate(_)));
        let bad = FitConfig {
            learning_rate: 0.0,
            ..FitConfig::default()
        };
        assert!(matches!(
            train_weighted_mse(net, &[vec![0.0]], &[1.0], &[1.0], &bad),
            Err(KanAftError::Config(_))
        ));
    }

    #[test]
    fn divergence_reports_epoch() {
        let net = init_network(&[1, 1], 3, 3, 0, &[(-1.0, 1.0)]).unwrap();
        let cfg = FitConfig {
            learning_rate: 1e300,
            epochs: 50,
            ..FitConfig::default()
        };
        let err = train_weighted_mse(net, &[vec![0.3], vec![-0.4]], &[1.0, -1.0], &[1.0, 1.0], &cfg)
            .unwrap_err();
        assert!(matches!(err, KanAftError::Divergence { .. }), "{err:?}");
    }

    #[test]
    fn strategy_names_parse() {
        assert_eq!("bj".parse::<Strategy>().unwrap(), Strategy::BuckleyJames);
        assert_eq!("ipcw".parse::<Strategy>().unwrap(), Strategy::Ipcw);
        assert_eq!("transform".parse::<Strategy>().unwrap(), Strategy::Transform);
        assert!("cox".parse::<Strategy>().is_err());
    }
}
