//! Coordinator identifier and conjunct boundary detector.
//!
//! The identifier is a linear projection of encoder outputs onto `{O, C}`.
//! The detector projects `[h; b]` (encoder output and coordinator flag)
//! onto the six detector labels and decodes with the constrained CRF from
//! [`crate::crf`]. Both train with mini-batch gradient descent in a fixed,
//! seed-controlled order so that a run is reproducible bit for bit.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crf::{self, Constraints, CrfError, CrfParams, Emissions, LossGrad, NUM_LABELS};
use crate::encoder::{DetectorInstance, EncoderError, FlagEncoding, TokenEncoder, TokenVector};
use crate::lexicon::{classify_spans, PairedLexicon};
use crate::schema::{
    decode_labels, Coordination, CoordinatorSpan, DetectorLabel, IdentifierLabel, SchemaError,
    Token, TokenSpan,
};
use crate::treebank::{InstanceError, TrainingInstance};

pub type SharedEncoder = Arc<dyn TokenEncoder + Send + Sync>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Crf(#[from] CrfError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("empty sentence")]
    EmptySentence,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no training data")]
    EmptyData,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

impl From<EncoderError> for TrainError {
    fn from(e: EncoderError) -> Self {
        TrainError::Model(e.into())
    }
}

impl From<CrfError> for TrainError {
    fn from(e: CrfError) -> Self {
        TrainError::Model(e.into())
    }
}

/// Sparse view of a dense feature vector.
type SparseRow = Vec<(u32, f64)>;

fn sparse(values: &[f64]) -> SparseRow {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| (i as u32, *v))
        .collect()
}

/// Dense affine map, weights stored output-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[(u32, f64)], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.weights[k * self.inputs..(k + 1) * self.inputs];
            for &(i, v) in x {
                *o += row[i as usize] * v;
            }
        }
    }

    fn accumulate(grad: &mut Linear, x: &[(u32, f64)], dy: &[f64]) {
        let inputs = grad.inputs;
        for (k, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad.bias[k] += d;
            let row = &mut grad.weights[k * inputs..(k + 1) * inputs];
            for &(i, v) in x {
                row[i as usize] += d * v;
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorLoss {
    /// Sequence-level negative log-likelihood of the constrained CRF.
    #[default]
    CrfNll,
    /// Per-token softmax cross-entropy; transitions stay at zero.
    TokenCe,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss: DetectorLoss,
    pub optimizer: OptimizerKind,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            batch_size: 8,
            epochs: 30,
            seed: 13,
            loss: DetectorLoss::CrfNll,
            optimizer: OptimizerKind::Sgd,
            l2: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return bad("l2 must be non-negative");
        }
        Ok(())
    }
}

/// Mean training loss per sentence before, during and after training.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub initial_loss: f64,
    pub epoch_losses: Vec<f64>,
    pub final_loss: f64,
}

struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    l2: f64,
    step: i32,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Optimizer {
    fn new(cfg: &TrainConfig) -> Self {
        Self {
            kind: cfg.optimizer,
            lr: cfg.learning_rate,
            l2: cfg.l2,
            step: 0,
            moments: Vec::new(),
        }
    }

    fn apply(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], scale: f64) {
        self.step += 1;
        if self.moments.is_empty() {
            self.moments = grads
                .iter()
                .map(|g| (vec![0.0; g.len()], vec![0.0; g.len()]))
                .collect();
        }
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let c1 = 1.0 - libm::pow(b1, self.step as f64);
        let c2 = 1.0 - libm::pow(b2, self.step as f64);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = &mut self.moments[k];
            for i in 0..p.len() {
                let gi = g[i] * scale + self.l2 * p[i];
                match self.kind {
                    OptimizerKind::Sgd => p[i] -= self.lr * gi,
                    OptimizerKind::Adam => {
                        m[i] = b1 * m[i] + (1.0 - b1) * gi;
                        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                        p[i] -= self.lr * (m[i] / c1) / (libm::sqrt(v[i] / c2) + eps);
                    }
                }
            }
        }
    }
}

fn sentence_key(tokens: &[Token]) -> String {
    let mut key = String::new();
    for t in tokens {
        key.push_str(&t.text);
        key.push('\u{1f}');
    }
    key
}

/// Sorts example indices into an order that depends only on content.
fn canonical_order<K: Ord>(keys: Vec<K>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]).then(a.cmp(&b)));
    idx
}

fn batches(order: &mut [usize], batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

fn encode_sparse(encoder: &SharedEncoder, tokens: &[Token]) -> Result<Vec<SparseRow>, ModelError> {
    let vectors = encoder.encode(tokens)?;
    let dim = encoder.dim();
    if let Some(v) = vectors.iter().find(|v| v.values.len() != dim) {
        return Err(ModelError::Dimension {
            expected: dim,
            got: v.values.len(),
        });
    }
    Ok(vectors.iter().map(|v| sparse(&v.values)).collect())
}

/// Token classifier over `{O, C}`.
#[derive(Clone)]
pub struct IdentifierModel {
    encoder: SharedEncoder,
    projection: Linear,
    log: TrainingLog,
}

impl core::fmt::Debug for IdentifierModel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("IdentifierModel")
            .field("encoder", &self.encoder.spec())
            .field("log", &self.log)
            .finish_non_exhaustive()
    }
}

impl IdentifierModel {
    pub fn from_parts(encoder: SharedEncoder, projection: Linear, log: TrainingLog) -> Result<Self, ModelError> {
        if projection.inputs != encoder.dim() {
            return Err(ModelError::Dimension {
                expected: encoder.dim(),
                got: projection.inputs,
            });
        }
        if projection.outputs != IdentifierLabel::ALL.len() {
            return Err(ModelError::Dimension {
                expected: IdentifierLabel::ALL.len(),
                got: projection.outputs,
            });
        }
        Ok(Self {
            encoder,
            projection,
            log,
        })
    }

    pub fn encoder(&self) -> &SharedEncoder {
        &self.encoder
    }

    pub fn projection(&self) -> &Linear {
        &self.projection
    }

    pub fn log(&self) -> &TrainingLog {
        &self.log
    }

    fn logits_sparse(&self, rows: &[SparseRow]) -> Vec<[f64; 2]> {
        rows.iter()
            .map(|x| {
                let mut out = [0.0; 2];
                self.projection.forward(x, &mut out);
                out
            })
            .collect()
    }

    pub fn logits(&self, tokens: &[Token]) -> Result<Vec<[f64; 2]>, ModelError> {
        if tokens.is_empty() {
            return Err(ModelError::EmptySentence);
        }
        Ok(self.logits_sparse(&encode_sparse(&self.encoder, tokens)?))
    }

    /// Per-token argmax; ties go to `O`.
    pub fn predict_labels(&self, tokens: &[Token]) -> Result<Vec<IdentifierLabel>, ModelError> {
        Ok(self
            .logits(tokens)?
            .iter()
            .map(|l| if l[1] > l[0] { IdentifierLabel::C } else { IdentifierLabel::O })
            .collect())
    }

    /// Coordinator spans: maximal `C` runs, kind-classified by the lexicon
    /// rules.
    pub fn identify(&self, tokens: &[Token], lexicon: &PairedLexicon) -> Result<Vec<CoordinatorSpan>, ModelError> {
        let labels = self.predict_labels(tokens)?;
        Ok(classify_spans(tokens, &label_runs(&labels), lexicon))
    }
}

/// Maximal runs of `C`.
pub fn label_runs(labels: &[IdentifierLabel]) -> Vec<TokenSpan> {
    let mut spans = Vec::new();
    let mut open = None;
    for (i, l) in labels.iter().enumerate() {
        match (l, open) {
            (IdentifierLabel::C, None) => open = Some(i),
            (IdentifierLabel::O, Some(s)) => {
                spans.push(TokenSpan { start: s, end: i });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        spans.push(TokenSpan {
            start: s,
            end: labels.len(),
        });
    }
    spans
}

fn softmax_ce(logits: [f64; 2], gold: usize) -> (f64, [f64; 2]) {
    let m = logits[0].max(logits[1]);
    let z = m + libm::log(libm::exp(logits[0] - m) + libm::exp(logits[1] - m));
    let p = [libm::exp(logits[0] - z), libm::exp(logits[1] - z)];
    let mut d = p;
    d[gold] -= 1.0;
    (z - logits[gold], d)
}

/// Trains the identifier with token-level cross-entropy. Sentences that
/// appear in several instances are used once.
pub fn train_identifier(
    data: &[TrainingInstance],
    encoder: SharedEncoder,
    cfg: &TrainConfig,
) -> Result<IdentifierModel, TrainError> {
    cfg.validate()?;
    let mut seen = alloc::collections::BTreeMap::new();
    for inst in data {
        seen.entry(sentence_key(&inst.tokens)).or_insert(inst);
    }
    if seen.is_empty() {
        return Err(TrainError::EmptyData);
    }
    let mut examples = Vec::with_capacity(seen.len());
    for inst in seen.values() {
        inst.check()?;
        let rows = encode_sparse(&encoder, &inst.tokens)?;
        let gold: Vec<usize> = inst.identifier_labels.iter().map(|l| l.index()).collect();
        examples.push((rows, gold));
    }

    let mut model = IdentifierModel {
        projection: Linear::zeros(encoder.dim(), 2),
        encoder,
        log: TrainingLog::default(),
    };
    let loss_of = |model: &IdentifierModel, ex: &(Vec<SparseRow>, Vec<usize>), grad: Option<&mut Linear>| {
        let logits = model.logits_sparse(&ex.0);
        let mut loss = 0.0;
        let mut grad = grad;
        for (t, (l, &g)) in logits.iter().zip(&ex.1).enumerate() {
            let (lt, d) = softmax_ce(*l, g);
            loss += lt;
            if let Some(grad) = grad.as_deref_mut() {
                Linear::accumulate(grad, &ex.0[t], &d);
            }
        }
        loss
    };
    let mean_loss = |model: &IdentifierModel| {
        examples.iter().map(|ex| loss_of(model, ex, None)).sum::<f64>() / examples.len() as f64
    };

    model.log.initial_loss = mean_loss(&model);
    let mut opt = Optimizer::new(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // examples come out of a BTreeMap, already in content order
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut grad = Linear::zeros(model.projection.inputs, 2);
    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        for (b, batch) in batches(&mut order, cfg.batch_size, &mut rng).into_iter().enumerate() {
            grad.weights.fill(0.0);
            grad.bias.fill(0.0);
            let mut batch_loss = 0.0;
            for &i in &batch {
                batch_loss += loss_of(&model, &examples[i], Some(&mut grad));
            }
            if !batch_loss.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    batch: b,
                    loss: batch_loss,
                });
            }
            epoch_loss += batch_loss;
            let scale = 1.0 / batch.len() as f64;
            let p = &mut model.projection;
            opt.apply(
                &mut [&mut p.weights, &mut p.bias],
                &[&grad.weights, &grad.bias],
                scale,
            );
            if !model.projection.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    batch: b,
                    loss: f64::NAN,
                });
            }
        }
        model.log.epoch_losses.push(epoch_loss / examples.len() as f64);
    }
    model.log.final_loss = mean_loss(&model);
    Ok(model)
}

/// Emission scorer plus constrained CRF.
#[derive(Clone)]
pub struct DetectorModel {
    encoder: SharedEncoder,
    flags: FlagEncoding,
    emission: Linear,
    crf: CrfParams,
    loss: DetectorLoss,
    log: TrainingLog,
}

impl core::fmt::Debug for DetectorModel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("DetectorModel")
            .field("encoder", &self.encoder.spec())
            .field("flags", &self.flags)
            .field("loss", &self.loss)
            .field("log", &self.log)
            .finish_non_exhaustive()
    }
}

/// Result of decoding one target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Detection {
    pub coordination: Coordination,
    /// Labels in original (unmarked) coordinates.
    pub labels: Vec<DetectorLabel>,
}

impl DetectorModel {
    pub fn from_parts(
        encoder: SharedEncoder,
        flags: FlagEncoding,
        emission: Linear,
        crf: CrfParams,
        loss: DetectorLoss,
        log: TrainingLog,
    ) -> Result<Self, ModelError> {
        let expected = encoder.dim() + flags.dim();
        if emission.inputs != expected {
            return Err(ModelError::Dimension {
                expected,
                got: emission.inputs,
            });
        }
        if emission.outputs != NUM_LABELS {
            return Err(ModelError::Dimension {
                expected: NUM_LABELS,
                got: emission.outputs,
            });
        }
        Ok(Self {
            encoder,
            flags,
            emission,
            crf,
            loss,
            log,
        })
    }

    pub fn encoder(&self) -> &SharedEncoder {
        &self.encoder
    }

    pub fn flag_encoding(&self) -> FlagEncoding {
        self.flags
    }

    pub fn emission(&self) -> &Linear {
        &self.emission
    }

    pub fn crf(&self) -> &CrfParams {
        &self.crf
    }

    pub fn loss_kind(&self) -> DetectorLoss {
        self.loss
    }

    pub fn log(&self) -> &TrainingLog {
        &self.log
    }

    pub fn instance(
        &self,
        tokens: &[Token],
        target: &CoordinatorSpan,
        coordinators: &[CoordinatorSpan],
    ) -> Result<DetectorInstance, ModelError> {
        Ok(DetectorInstance::new(tokens, target, coordinators, self.flags)?)
    }

    fn features(&self, instance: &DetectorInstance) -> Result<Vec<SparseRow>, ModelError> {
        let h = self.encoder.encode(&instance.marked.tokens)?;
        let dim = self.encoder.dim();
        if h.len() != instance.flags.len() {
            return Err(EncoderError::LengthMismatch {
                left: h.len(),
                right: instance.flags.len(),
            }
            .into());
        }
        h.iter()
            .zip(&instance.flags)
            .map(|(h, b)| {
                if h.values.len() != dim || b.values.len() != self.flags.dim() {
                    return Err(ModelError::Dimension {
                        expected: dim + self.flags.dim(),
                        got: h.values.len() + b.values.len(),
                    });
                }
                let mut row = sparse(&h.values);
                row.extend(
                    b.values
                        .iter()
                        .enumerate()
                        .filter(|(_, v)| **v != 0.0)
                        .map(|(i, v)| ((dim + i) as u32, *v)),
                );
                Ok(row)
            })
            .collect()
    }

    fn emissions_sparse(&self, rows: &[SparseRow]) -> Emissions {
        Emissions::new(
            rows.iter()
                .map(|x| {
                    let mut out = [0.0; NUM_LABELS];
                    self.emission.forward(x, &mut out);
                    out
                })
                .collect(),
        )
    }

    /// `m x 6` emission scores for a marked instance. `C` scores outside
    /// the target are left as computed; decoding masks them.
    pub fn emissions(&self, instance: &DetectorInstance) -> Result<Emissions, ModelError> {
        Ok(self.emissions_sparse(&self.features(instance)?))
    }

    /// Constrained Viterbi decode in marked coordinates.
    pub fn decode(&self, emissions: &Emissions, target_marked: TokenSpan) -> Result<Vec<DetectorLabel>, ModelError> {
        let cons = Constraints::for_marked_target(emissions.len(), target_marked)?;
        Ok(crf::viterbi(emissions, &self.crf, &cons)?.0)
    }

    /// Conjuncts of `target` in `tokens`.
    pub fn detect(
        &self,
        tokens: &[Token],
        target: &CoordinatorSpan,
        coordinators: &[CoordinatorSpan],
    ) -> Result<Detection, ModelError> {
        let instance = self.instance(tokens, target, coordinators)?;
        let em = self.emissions(&instance)?;
        let marked = self.decode(&em, instance.marked.target)?;
        let labels = instance.marked.unmark(&marked);
        let coordination = decode_labels(&labels, target)?;
        Ok(Detection { coordination, labels })
    }
}

fn detector_loss(
    model: &DetectorModel,
    rows: &[SparseRow],
    cons: &Constraints,
    gold: &[DetectorLabel],
) -> Result<LossGrad, CrfError> {
    let em = model.emissions_sparse(rows);
    match model.loss {
        DetectorLoss::CrfNll => crf::nll(&em, &model.crf, cons, gold),
        DetectorLoss::TokenCe => crf::token_cross_entropy(&em, cons, gold),
    }
}

struct DetectorExample {
    rows: Vec<SparseRow>,
    cons: Constraints,
    gold: Vec<DetectorLabel>,
}

/// Trains the detector with gold coordinator positions as flags.
pub fn train_detector(
    data: &[TrainingInstance],
    encoder: SharedEncoder,
    flags: FlagEncoding,
    cfg: &TrainConfig,
) -> Result<DetectorModel, TrainError> {
    train_detector_with(data, encoder, flags, cfg, |inst| Ok(inst.coordinators.clone()))
}

/// Trains the detector, taking the flagged coordinators of each instance
/// from `coordinators_for` (for example an identifier's predictions).
pub fn train_detector_with<F>(
    data: &[TrainingInstance],
    encoder: SharedEncoder,
    flags: FlagEncoding,
    cfg: &TrainConfig,
    coordinators_for: F,
) -> Result<DetectorModel, TrainError>
where
    F: Fn(&TrainingInstance) -> Result<Vec<CoordinatorSpan>, ModelError>,
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(TrainError::EmptyData);
    }
    let mut model = DetectorModel {
        emission: Linear::zeros(encoder.dim() + flags.dim(), NUM_LABELS),
        encoder,
        flags,
        crf: CrfParams::default(),
        loss: cfg.loss,
        log: TrainingLog::default(),
    };

    let keys: Vec<(String, TokenSpan)> = data
        .iter()
        .map(|i| (sentence_key(&i.tokens), i.target.span))
        .collect();
    let mut examples = Vec::with_capacity(data.len());
    for &i in &canonical_order(keys) {
        let inst = &data[i];
        inst.check()?;
        let coords = coordinators_for(inst)?;
        let di = model
            .instance(&inst.tokens, &inst.target, &coords)?
            .with_gold(&inst.labels)?;
        let cons = Constraints::for_marked_target(di.marked.len(), di.marked.target)?;
        examples.push(DetectorExample {
            rows: model.features(&di)?,
            cons,
            gold: di.gold.expect("gold attached"),
        });
    }

    let mean_loss = |model: &DetectorModel| -> Result<f64, CrfError> {
        let mut total = 0.0;
        for ex in &examples {
            total += detector_loss(model, &ex.rows, &ex.cons, &ex.gold)?.loss;
        }
        Ok(total / examples.len() as f64)
    };

    model.log.initial_loss = mean_loss(&model)?;
    let mut opt = Optimizer::new(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut grad = Linear::zeros(model.emission.inputs, NUM_LABELS);
    let train_crf = cfg.loss == DetectorLoss::CrfNll;
    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        for (b, batch) in batches(&mut order, cfg.batch_size, &mut rng).into_iter().enumerate() {
            grad.weights.fill(0.0);
            grad.bias.fill(0.0);
            let mut d_crf = CrfParams::default();
            let mut batch_loss = 0.0;
            for &i in &batch {
                let ex = &examples[i];
                let out = detector_loss(&model, &ex.rows, &ex.cons, &ex.gold)?;
                batch_loss += out.loss;
                for (x, dy) in ex.rows.iter().zip(out.emissions.rows()) {
                    Linear::accumulate(&mut grad, x, dy);
                }
                for j in 0..NUM_LABELS {
                    d_crf.start[j] += out.params.start[j];
                    d_crf.end[j] += out.params.end[j];
                    for k in 0..NUM_LABELS {
                        d_crf.transitions[j][k] += out.params.transitions[j][k];
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    batch: b,
                    loss: batch_loss,
                });
            }
            epoch_loss += batch_loss;
            let scale = 1.0 / batch.len() as f64;
            let DetectorModel { emission, crf, .. } = &mut model;
            if train_crf {
                opt.apply(
                    &mut [
                        &mut emission.weights,
                        &mut emission.bias,
                        &mut crf.start,
                        &mut crf.end,
                        crf.transitions.as_flattened_mut(),
                    ],
                    &[
                        &grad.weights,
                        &grad.bias,
                        &d_crf.start,
                        &d_crf.end,
                        d_crf.transitions.as_flattened(),
                    ],
                    scale,
                );
            } else {
                opt.apply(
                    &mut [&mut emission.weights, &mut emission.bias],
                    &[&grad.weights, &grad.bias],
                    scale,
                );
            }
            let crf_finite = crf
                .start
                .iter()
                .chain(&crf.end)
                .chain(crf.transitions.as_flattened())
                .all(|v| v.is_finite());
            if !emission.is_finite() || !crf_finite {
                return Err(TrainError::Diverged {
                    epoch,
                    batch: b,
                    loss: f64::NAN,
                });
            }
        }
        model.log.epoch_losses.push(epoch_loss / examples.len() as f64);
    }
    model.log.final_loss = mean_loss(&model)?;
    Ok(model)
}

/// Dense token vectors for callers that want to inspect features.
pub fn encoder_output(encoder: &SharedEncoder, tokens: &[Token]) -> Result<Vec<TokenVector>, ModelError> {
    Ok(encoder.encode(tokens)?)
}
