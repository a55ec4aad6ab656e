//! Autoregressive translation policy: a single-layer GRU over a tiny
//! vocabulary, in plain `f64`.
//!
//! One code path drives sampling, greedy decoding, and teacher-forced
//! re-scoring, so a sequence re-scored under unchanged parameters
//! reproduces its sampling log-probabilities bit for bit. Forward
//! passes can record a [`ForwardTrace`] of activations;
//! [`GruPolicy::backprop_trace`] then turns per-token log-probability
//! adjoints into parameter gradients by backpropagation through time.

pub mod checkpoint;
mod vocab;

pub use vocab::{
    Vocabulary, VocabError, BOS_ID, EOS_ID, MAX_VOCAB, N_SPECIAL, PAD_ID,
    THINK_CLOSE_ID, THINK_OPEN_ID, TRANSLATE_CLOSE_ID, TRANSLATE_OPEN_ID, UNK_ID,
};

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PolicyError {
    #[error("logits contained a non-finite value at generation step {step}")]
    NonFiniteLogits { step: usize },
    #[error("non-finite gradient in parameter block {block}")]
    NonFiniteGradient { block: &'static str },
    #[error("prompt must contain at least one token")]
    EmptyPrompt,
    #[error("output sequence must contain at least one token")]
    EmptyOutput,
    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenOutOfRange { id: usize, size: usize },
    #[error("temperature must be positive and finite, got {0}")]
    BadTemperature(f64),
}

/// Parameter blocks in their serialized order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamBlock {
    Embedding,
    UpdateW,
    UpdateB,
    ResetW,
    ResetB,
    CandW,
    CandB,
    OutW,
    OutB,
}

impl ParamBlock {
    pub const ALL: [ParamBlock; 9] = [
        ParamBlock::Embedding,
        ParamBlock::UpdateW,
        ParamBlock::UpdateB,
        ParamBlock::ResetW,
        ParamBlock::ResetB,
        ParamBlock::CandW,
        ParamBlock::CandB,
        ParamBlock::OutW,
        ParamBlock::OutB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamBlock::Embedding => "embedding",
            ParamBlock::UpdateW => "update.weight",
            ParamBlock::UpdateB => "update.bias",
            ParamBlock::ResetW => "reset.weight",
            ParamBlock::ResetB => "reset.bias",
            ParamBlock::CandW => "candidate.weight",
            ParamBlock::CandB => "candidate.bias",
            ParamBlock::OutW => "output.weight",
            ParamBlock::OutB => "output.bias",
        }
    }
}

/// Model parameters. Gate weights are `d x 2d` row-major over the
/// concatenation `[h_prev; x]`; the output projection is `d x v`
/// row-major so `logits[j] = b_out[j] + sum_i h[i] * w_out[i*v + j]`.
///
/// The same layout doubles as a gradient accumulator and as Adam
/// moment storage, hence the [`GradBuffer`] alias.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub d: usize,
    pub v: usize,
    pub embedding: Vec<f64>,
    pub w_update: Vec<f64>,
    pub b_update: Vec<f64>,
    pub w_reset: Vec<f64>,
    pub b_reset: Vec<f64>,
    pub w_cand: Vec<f64>,
    pub b_cand: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: Vec<f64>,
}

pub type GradBuffer = PolicyParams;

/// Uniform limit for token embeddings; large enough that distinct
/// tokens produce distinguishable recurrent trajectories from the
/// first step.
const EMBED_SCALE: f64 = 0.3;
/// Shortest and longest initial memory timescales, in steps. Update
/// gate biases are log-spaced across the units so the state carries a
/// spectrum of decay rates: fast units resolve what just happened,
/// slow units keep the start of the prompt legible through the whole
/// response.
const GATE_TIMESCALE_MIN: f64 = 1.5;
const GATE_TIMESCALE_MAX: f64 = 32.0;

/// Update-gate bias giving a unit an initial memory timescale of
/// roughly `t` steps (`sigmoid(-b) = 1/t`).
fn gate_bias_for_timescale(t: f64) -> f64 {
    -(t - 1.0).ln()
}

fn gate_bias_spectrum(d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| {
            let frac = if d > 1 { i as f64 / (d - 1) as f64 } else { 0.0 };
            let t = GATE_TIMESCALE_MIN * (GATE_TIMESCALE_MAX / GATE_TIMESCALE_MIN).powf(frac);
            gate_bias_for_timescale(t)
        })
        .collect()
}

impl PolicyParams {
    pub fn zeros(d: usize, v: usize) -> Self {
        Self {
            d,
            v,
            embedding: vec![0.0; v * d],
            w_update: vec![0.0; d * 2 * d],
            b_update: vec![0.0; d],
            w_reset: vec![0.0; d * 2 * d],
            b_reset: vec![0.0; d],
            w_cand: vec![0.0; d * 2 * d],
            b_cand: vec![0.0; d],
            w_out: vec![0.0; d * v],
            b_out: vec![0.0; v],
        }
    }

    /// Seeded initialization: weights uniform in `[-0.08, 0.08]`,
    /// biases zero, plus an optional protocol prior of strength
    /// `format_prior` (zero disables it).
    ///
    /// A bias nudge alone cannot work: it raises the marginal rate of
    /// tag tokens but leaves their order random, so a well-formed
    /// response stays astronomically unlikely, every sampled group
    /// scores the same penalty, and group-standardized advantages are
    /// identically zero. The prior instead wires a first-order tag
    /// memory into the recurrence. Hidden coordinates `0..4` act as
    /// markers for the most recently consumed tag: each tag embedding
    /// carries a unit pulse on its marker, the candidate path copies
    /// that pulse in, and the update gate on the marker rows is
    /// nearly closed for ordinary tokens but swings open whenever any
    /// tag arrives, so the previous marker is erased as the new one is
    /// written. The output projection then steers each marker state
    /// toward the next protocol token and away from the rest, and the
    /// output bias opens a think block from the start state. Content
    /// tokens keep their random logits throughout: a fresh policy
    /// emits protocol-shaped responses filled with uniformly random
    /// words, and translation quality itself starts at chance.
    ///
    /// The marker wiring needs `d >= 8`; below that only the
    /// start-state bias is applied.
    pub fn init(d: usize, vocab: &Vocabulary, seed: u64, format_prior: f64) -> Self {
        let v = vocab.size();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let glorot = |fan_in: usize, fan_out: usize| (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut draw = |n: usize, limit: f64| -> Vec<f64> {
            let dist = Uniform::new(-limit, limit);
            (0..n).map(|_| dist.sample(&mut rng)).collect()
        };
        let gate = glorot(2 * d, d);
        let mut params = Self {
            d,
            v,
            embedding: draw(v * d, EMBED_SCALE),
            w_update: draw(d * 2 * d, gate),
            // Negative update-gate biases keep the gates mostly shut,
            // so the hidden state decays slowly and the prompt is
            // still legible when generation starts; with the gate at
            // its symmetric default the state halves every step and a
            // twelve-token source is forgotten before the first output
            // token. Spacing the biases across timescales also lets a
            // linear readout separate tokens by recency, which a single
            // shared decay rate cannot express.
            b_update: gate_bias_spectrum(d),
            w_reset: draw(d * 2 * d, gate),
            b_reset: vec![0.0; d],
            w_cand: draw(d * 2 * d, gate),
            b_cand: vec![0.0; d],
            w_out: draw(d * v, glorot(d, v)),
            b_out: vec![0.0; v],
        };
        if format_prior > 0.0 {
            params.apply_protocol_prior(format_prior);
        }
        params
    }

    fn apply_protocol_prior(&mut self, prior: f64) {
        let (d, v) = (self.d, self.v);
        let tags = Vocabulary::tag_ids();
        self.b_out[THINK_OPEN_ID] += prior;
        if d < 8 {
            return;
        }

        // Marker coordinate m carries "tag m was the last tag seen".
        // The marker subspace (hidden coords 0..4) is reserved: only
        // tag embeddings pulse it and the marker rows of every gate
        // are fully deterministic, so random content activity can
        // never flip a marker.
        const COPY_GAIN: f64 = 3.0;
        const GATE_BIAS: f64 = -3.0;
        const GATE_GAIN: f64 = 6.0;
        let n_markers = tags.len();
        for token in 0..v {
            let is_tag = tags.contains(&token);
            for j in 0..n_markers {
                let pulse = is_tag && token == tags[j];
                self.embedding[token * d + j] = if pulse { 1.0 } else { 0.0 };
            }
        }
        for m in 0..n_markers {
            for j in 0..2 * d {
                self.w_cand[m * 2 * d + j] = if j == d + m { COPY_GAIN } else { 0.0 };
                self.w_update[m * 2 * d + j] =
                    if (d..d + n_markers).contains(&j) { GATE_GAIN } else { 0.0 };
                self.w_reset[m * 2 * d + j] = 0.0;
            }
            self.b_update[m] = GATE_BIAS;
        }

        // Steer each marker state toward the next protocol token.
        // Closing boosts compete with content, so their size is a
        // length prior, not a format prior: the think block should
        // close quickly (its tokens are dead weight for the reward)
        // while the translate block must stay open long enough for the
        // policy to say something. They are deliberately independent
        // of `prior` strength. Structural transitions ("strong") have
        // no content competitor; "suppress" vetoes protocol violations
        // such as EOS inside a block.
        let close_think = 6.0;
        let close_translate = 3.0;
        let strong = 1.6 * prior;
        let suppress = -1.6 * prior;
        let mut set = |marker: usize, token: usize, w: f64| {
            self.w_out[marker * v + token] = w;
        };
        let protocol = [THINK_OPEN_ID, THINK_CLOSE_ID, TRANSLATE_OPEN_ID, TRANSLATE_CLOSE_ID, EOS_ID];
        for m in 0..tags.len() {
            for &tok in &protocol {
                set(m, tok, suppress);
            }
        }
        set(0, THINK_CLOSE_ID, close_think);
        set(1, TRANSLATE_OPEN_ID, strong);
        set(2, TRANSLATE_CLOSE_ID, close_translate);
        set(3, EOS_ID, strong);
    }

    pub fn block(&self, b: ParamBlock) -> &[f64] {
        match b {
            ParamBlock::Embedding => &self.embedding,
            ParamBlock::UpdateW => &self.w_update,
            ParamBlock::UpdateB => &self.b_update,
            ParamBlock::ResetW => &self.w_reset,
            ParamBlock::ResetB => &self.b_reset,
            ParamBlock::CandW => &self.w_cand,
            ParamBlock::CandB => &self.b_cand,
            ParamBlock::OutW => &self.w_out,
            ParamBlock::OutB => &self.b_out,
        }
    }

    pub fn block_mut(&mut self, b: ParamBlock) -> &mut [f64] {
        match b {
            ParamBlock::Embedding => &mut self.embedding,
            ParamBlock::UpdateW => &mut self.w_update,
            ParamBlock::UpdateB => &mut self.b_update,
            ParamBlock::ResetW => &mut self.w_reset,
            ParamBlock::ResetB => &mut self.b_reset,
            ParamBlock::CandW => &mut self.w_cand,
            ParamBlock::CandB => &mut self.b_cand,
            ParamBlock::OutW => &mut self.w_out,
            ParamBlock::OutB => &mut self.b_out,
        }
    }

    pub fn n_params(&self) -> usize {
        ParamBlock::ALL.iter().map(|&b| self.block(b).len()).sum()
    }

    /// Euclidean distance between two parameter sets of equal shape.
    pub fn l2_distance(&self, other: &Self) -> f64 {
        assert_eq!((self.d, self.v), (other.d, other.v), "shape mismatch");
        ParamBlock::ALL
            .iter()
            .map(|&b| {
                self.block(b)
                    .iter()
                    .zip(other.block(b))
                    .map(|(a, o)| (a - o) * (a - o))
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn check_finite(&self) -> Result<(), PolicyError> {
        for b in ParamBlock::ALL {
            if self.block(b).iter().any(|x| !x.is_finite()) {
                return Err(PolicyError::NonFiniteGradient { block: b.name() });
            }
        }
        Ok(())
    }
}

/// Cached activations of one forward pass, sufficient for exact
/// backpropagation through time.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub prompt: Vec<usize>,
    pub outputs: Vec<usize>,
    pub logprobs: Vec<f64>,
    pub temperature: f64,
    steps: Vec<StepCache>,
    preds: Vec<PredCache>,
}

#[derive(Debug, Clone)]
struct StepCache {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    hc: Vec<f64>,
}

#[derive(Debug, Clone)]
struct PredCache {
    h: Vec<f64>,
    probs: Vec<f64>,
}

/// One sampled (or decoded) response with its recorded forward pass.
#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub tokens: Vec<usize>,
    pub logprobs: Vec<f64>,
    pub trace: ForwardTrace,
}

enum Chooser<'a> {
    Sample(&'a mut dyn RngCore),
    Forced(&'a [usize]),
    Greedy,
}

#[derive(Debug, Clone)]
pub struct GruPolicy {
    pub vocab: Vocabulary,
    pub params: PolicyParams,
}

struct Workspace {
    h: Vec<f64>,
    h_next: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    rh: Vec<f64>,
    hc: Vec<f64>,
    logits: Vec<f64>,
    logp: Vec<f64>,
    probs: Vec<f64>,
}

impl Workspace {
    fn new(d: usize, v: usize) -> Self {
        Self {
            h: vec![0.0; d],
            h_next: vec![0.0; d],
            z: vec![0.0; d],
            r: vec![0.0; d],
            rh: vec![0.0; d],
            hc: vec![0.0; d],
            logits: vec![0.0; v],
            logp: vec![0.0; v],
            probs: vec![0.0; v],
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One GRU step: fills `z`, `r`, `rh`, `hc`, `h_next` from `h_prev`
/// and the input embedding `x`.
#[allow(clippy::too_many_arguments)]
fn cell(
    p: &PolicyParams,
    h_prev: &[f64],
    x: &[f64],
    z: &mut [f64],
    r: &mut [f64],
    rh: &mut [f64],
    hc: &mut [f64],
    h_next: &mut [f64],
) {
    let d = p.d;
    for i in 0..d {
        let wu = &p.w_update[i * 2 * d..(i + 1) * 2 * d];
        let wr = &p.w_reset[i * 2 * d..(i + 1) * 2 * d];
        let mut az = p.b_update[i];
        let mut ar = p.b_reset[i];
        for j in 0..d {
            az += wu[j] * h_prev[j] + wu[d + j] * x[j];
            ar += wr[j] * h_prev[j] + wr[d + j] * x[j];
        }
        z[i] = sigmoid(az);
        r[i] = sigmoid(ar);
    }
    for j in 0..d {
        rh[j] = r[j] * h_prev[j];
    }
    for i in 0..d {
        let wc = &p.w_cand[i * 2 * d..(i + 1) * 2 * d];
        let mut ac = p.b_cand[i];
        for j in 0..d {
            ac += wc[j] * rh[j] + wc[d + j] * x[j];
        }
        hc[i] = ac.tanh();
        h_next[i] = (1.0 - z[i]) * h_prev[i] + z[i] * hc[i];
    }
}

impl GruPolicy {
    pub fn new(vocab: Vocabulary, params: PolicyParams) -> Self {
        assert_eq!(
            vocab.size(),
            params.v,
            "vocabulary size does not match parameter shape"
        );
        Self { vocab, params }
    }

    fn embedding(&self, token: usize) -> &[f64] {
        let d = self.params.d;
        &self.params.embedding[token * d..(token + 1) * d]
    }

    fn check_tokens(&self, tokens: &[usize]) -> Result<(), PolicyError> {
        let size = self.params.v;
        for &id in tokens {
            if id >= size {
                return Err(PolicyError::TokenOutOfRange { id, size });
            }
        }
        Ok(())
    }

    fn logits_into(&self, h: &[f64], logits: &mut [f64]) {
        let v = self.params.v;
        logits.copy_from_slice(&self.params.b_out);
        for (i, &hi) in h.iter().enumerate() {
            let row = &self.params.w_out[i * v..(i + 1) * v];
            for j in 0..v {
                logits[j] += hi * row[j];
            }
        }
    }

    /// Temperature-scaled log-softmax; returns an error on non-finite
    /// logits rather than sampling garbage.
    fn logprobs_into(
        logits: &[f64],
        temperature: f64,
        logp: &mut [f64],
        probs: &mut [f64],
        step: usize,
    ) -> Result<(), PolicyError> {
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(PolicyError::NonFiniteLogits { step });
        }
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut lse = 0.0;
        for (lp, &l) in logp.iter_mut().zip(logits) {
            *lp = (l - m) / temperature;
            lse += lp.exp();
        }
        let lse = lse.ln();
        for (p, lp) in probs.iter_mut().zip(logp.iter_mut()) {
            *lp -= lse;
            *p = lp.exp();
        }
        Ok(())
    }

    fn validate_run(&self, prompt: &[usize], temperature: f64) -> Result<(), PolicyError> {
        if prompt.is_empty() {
            return Err(PolicyError::EmptyPrompt);
        }
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(PolicyError::BadTemperature(temperature));
        }
        self.check_tokens(prompt)
    }

    /// Shared driver for sampling, greedy decoding, and teacher
    /// forcing. All three execute the same floating-point operations
    /// per step; only token selection differs.
    fn rollout(
        &self,
        prompt: &[usize],
        max_len: usize,
        temperature: f64,
        mut choose: Chooser<'_>,
    ) -> Result<SampleOutcome, PolicyError> {
        self.validate_run(prompt, temperature)?;
        let limit = match &choose {
            Chooser::Forced(forced) => {
                self.check_tokens(forced)?;
                if forced.is_empty() {
                    return Err(PolicyError::EmptyOutput);
                }
                forced.len()
            }
            _ => {
                if max_len == 0 {
                    return Err(PolicyError::EmptyOutput);
                }
                max_len
            }
        };

        let d = self.params.d;
        let mut ws = Workspace::new(d, self.params.v);
        let mut steps = Vec::with_capacity(prompt.len() + limit);
        let mut preds = Vec::with_capacity(limit);
        let mut outputs = Vec::with_capacity(limit);
        let mut logprobs = Vec::with_capacity(limit);

        let advance = |ws: &mut Workspace, steps: &mut Vec<StepCache>, token: usize| {
            let x = self.embedding(token);
            cell(
                &self.params,
                &ws.h,
                x,
                &mut ws.z,
                &mut ws.r,
                &mut ws.rh,
                &mut ws.hc,
                &mut ws.h_next,
            );
            steps.push(StepCache {
                h_prev: ws.h.clone(),
                z: ws.z.clone(),
                r: ws.r.clone(),
                hc: ws.hc.clone(),
            });
            std::mem::swap(&mut ws.h, &mut ws.h_next);
        };

        for &tok in prompt {
            advance(&mut ws, &mut steps, tok);
        }

        for t in 0..limit {
            self.logits_into(&ws.h, &mut ws.logits);
            Self::logprobs_into(&ws.logits, temperature, &mut ws.logp, &mut ws.probs, t)?;
            let y = match &mut choose {
                Chooser::Sample(rng) => draw(&ws.probs, rng.gen::<f64>()),
                Chooser::Forced(forced) => forced[t],
                Chooser::Greedy => argmax(&ws.probs),
            };
            preds.push(PredCache {
                h: ws.h.clone(),
                probs: ws.probs.clone(),
            });
            outputs.push(y);
            logprobs.push(ws.logp[y]);
            let stop = match &choose {
                Chooser::Forced(_) => t + 1 == limit,
                _ => y == EOS_ID || t + 1 == limit,
            };
            if stop {
                break;
            }
            advance(&mut ws, &mut steps, y);
        }

        let trace = ForwardTrace {
            prompt: prompt.to_vec(),
            outputs: outputs.clone(),
            logprobs: logprobs.clone(),
            temperature,
            steps,
            preds,
        };
        Ok(SampleOutcome {
            tokens: outputs,
            logprobs,
            trace,
        })
    }

    /// Ancestral sampling at the given temperature; stops after an
    /// end-of-sequence token or `max_len` tokens.
    pub fn sample_response(
        &self,
        prompt: &[usize],
        max_len: usize,
        temperature: f64,
        rng: &mut impl RngCore,
    ) -> Result<SampleOutcome, PolicyError> {
        self.rollout(prompt, max_len, temperature, Chooser::Sample(rng))
    }

    /// Deterministic argmax decoding (lowest id wins ties).
    pub fn greedy_response(
        &self,
        prompt: &[usize],
        max_len: usize,
        temperature: f64,
    ) -> Result<SampleOutcome, PolicyError> {
        self.rollout(prompt, max_len, temperature, Chooser::Greedy)
    }

    /// Re-scores a fixed output sequence, recording activations.
    pub fn teacher_trace(
        &self,
        prompt: &[usize],
        outputs: &[usize],
        temperature: f64,
    ) -> Result<ForwardTrace, PolicyError> {
        self.rollout(prompt, usize::MAX, temperature, Chooser::Forced(outputs))
            .map(|o| o.trace)
    }

    /// Per-token log-probabilities of a fixed output sequence without
    /// activation caching (used for reference-policy scoring).
    pub fn sequence_logprobs(
        &self,
        prompt: &[usize],
        outputs: &[usize],
        temperature: f64,
    ) -> Result<Vec<f64>, PolicyError> {
        self.validate_run(prompt, temperature)?;
        self.check_tokens(outputs)?;
        if outputs.is_empty() {
            return Err(PolicyError::EmptyOutput);
        }
        let d = self.params.d;
        let mut ws = Workspace::new(d, self.params.v);
        let advance = |ws: &mut Workspace, token: usize| {
            let x = self.embedding(token);
            cell(
                &self.params,
                &ws.h,
                x,
                &mut ws.z,
                &mut ws.r,
                &mut ws.rh,
                &mut ws.hc,
                &mut ws.h_next,
            );
            std::mem::swap(&mut ws.h, &mut ws.h_next);
        };
        for &tok in prompt {
            advance(&mut ws, tok);
        }
        let mut logprobs = Vec::with_capacity(outputs.len());
        for (t, &y) in outputs.iter().enumerate() {
            self.logits_into(&ws.h, &mut ws.logits);
            Self::logprobs_into(&ws.logits, temperature, &mut ws.logp, &mut ws.probs, t)?;
            logprobs.push(ws.logp[y]);
            if t + 1 < outputs.len() {
                advance(&mut ws, y);
            }
        }
        Ok(logprobs)
    }

    /// Distribution over the next token after `prompt` plus an
    /// already-generated `prefix`.
    pub fn next_token_distribution(
        &self,
        prompt: &[usize],
        prefix: &[usize],
        temperature: f64,
    ) -> Result<Vec<f64>, PolicyError> {
        self.validate_run(prompt, temperature)?;
        self.check_tokens(prefix)?;
        let d = self.params.d;
        let mut ws = Workspace::new(d, self.params.v);
        for &tok in prompt.iter().chain(prefix) {
            let x = self.embedding(tok);
            cell(
                &self.params,
                &ws.h,
                x,
                &mut ws.z,
                &mut ws.r,
                &mut ws.rh,
                &mut ws.hc,
                &mut ws.h_next,
            );
            std::mem::swap(&mut ws.h, &mut ws.h_next);
        }
        self.logits_into(&ws.h, &mut ws.logits);
        Self::logprobs_into(&ws.logits, temperature, &mut ws.logp, &mut ws.probs, 0)?;
        Ok(ws.probs)
    }

    /// Backpropagation through time. `seeds[t]` is dL/d(logprob of
    /// output token `t`); gradients accumulate into `grads` without
    /// zeroing it first. Must be called with the same parameters the
    /// trace was recorded under.
    #[allow(clippy::needless_range_loop)]
    pub fn backprop_trace(&self, trace: &ForwardTrace, seeds: &[f64], grads: &mut GradBuffer) {
        assert_eq!(seeds.len(), trace.outputs.len(), "one seed per output token");
        let p = &self.params;
        let (d, v) = (p.d, p.v);
        let p_len = trace.prompt.len();
        let t_out = trace.outputs.len();
        let n_steps = trace.steps.len();
        debug_assert_eq!(n_steps, p_len + t_out - 1);

        let mut dh = vec![0.0; d];
        let mut dh_prev = vec![0.0; d];
        let mut dx = vec![0.0; d];
        let mut drh = vec![0.0; d];
        let mut dr = vec![0.0; d];
        let mut rh = vec![0.0; d];
        let mut dlogit = vec![0.0; v];

        for k in (0..n_steps + 1).rev() {
            // Output t is predicted from the state reached after step
            // p_len - 1 + t; fold that contribution in before (or, for
            // the final prediction, instead of) stepping backwards.
            if k >= p_len - 1 {
                let t = k - (p_len - 1);
                if t < t_out && seeds[t] != 0.0 {
                    let seed = seeds[t];
                    let pc = &trace.preds[t];
                    let y = trace.outputs[t];
                    for j in 0..v {
                        let indicator = if j == y { 1.0 } else { 0.0 };
                        dlogit[j] = seed * (indicator - pc.probs[j]) / trace.temperature;
                    }
                    for j in 0..v {
                        grads.b_out[j] += dlogit[j];
                    }
                    for i in 0..d {
                        let hi = pc.h[i];
                        let row = &p.w_out[i * v..(i + 1) * v];
                        let grow = &mut grads.w_out[i * v..(i + 1) * v];
                        let mut acc = 0.0;
                        for j in 0..v {
                            grow[j] += hi * dlogit[j];
                            acc += row[j] * dlogit[j];
                        }
                        dh[i] += acc;
                    }
                }
            }
            if k == n_steps {
                continue;
            }

            let sc = &trace.steps[k];
            let token = if k < p_len {
                trace.prompt[k]
            } else {
                trace.outputs[k - p_len]
            };
            let x = &p.embedding[token * d..(token + 1) * d];

            for j in 0..d {
                rh[j] = sc.r[j] * sc.h_prev[j];
            }

            // Candidate state: h_next = (1-z) h_prev + z tanh(W_c [r*h_prev; x] + b_c).
            for i in 0..d {
                let dhc = dh[i] * sc.z[i];
                let dac = dhc * (1.0 - sc.hc[i] * sc.hc[i]);
                grads.b_cand[i] += dac;
                let row = &p.w_cand[i * 2 * d..(i + 1) * 2 * d];
                let grow = &mut grads.w_cand[i * 2 * d..(i + 1) * 2 * d];
                for j in 0..d {
                    grow[j] += dac * rh[j];
                    drh[j] += row[j] * dac;
                    grow[d + j] += dac * x[j];
                    dx[j] += row[d + j] * dac;
                }
            }
            for j in 0..d {
                dr[j] = drh[j] * sc.h_prev[j];
                dh_prev[j] += drh[j] * sc.r[j];
            }
            // Gates.
            for i in 0..d {
                let dz = dh[i] * (sc.hc[i] - sc.h_prev[i]);
                dh_prev[i] += dh[i] * (1.0 - sc.z[i]);
                let daz = dz * sc.z[i] * (1.0 - sc.z[i]);
                let dar = dr[i] * sc.r[i] * (1.0 - sc.r[i]);
                grads.b_update[i] += daz;
                grads.b_reset[i] += dar;
                let wu = &p.w_update[i * 2 * d..(i + 1) * 2 * d];
                let wr = &p.w_reset[i * 2 * d..(i + 1) * 2 * d];
                let gu = &mut grads.w_update[i * 2 * d..(i + 1) * 2 * d];
                let gr = &mut grads.w_reset[i * 2 * d..(i + 1) * 2 * d];
                for j in 0..d {
                    gu[j] += daz * sc.h_prev[j];
                    gr[j] += dar * sc.h_prev[j];
                    dh_prev[j] += wu[j] * daz + wr[j] * dar;
                    gu[d + j] += daz * x[j];
                    gr[d + j] += dar * x[j];
                    dx[j] += wu[d + j] * daz + wr[d + j] * dar;
                }
            }
            let ge = &mut grads.embedding[token * d..(token + 1) * d];
            for j in 0..d {
                ge[j] += dx[j];
            }

            std::mem::swap(&mut dh, &mut dh_prev);
            dh_prev.iter_mut().for_each(|g| *g = 0.0);
            dx.iter_mut().for_each(|g| *g = 0.0);
            drh.iter_mut().for_each(|g| *g = 0.0);
        }
    }
}

fn draw(probs: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (j, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = j;
        }
        cum += p;
        if u < cum {
            return j;
        }
    }
    last_positive
}

fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    let mut best_p = f64::NEG_INFINITY;
    for (j, &p) in probs.iter().enumerate() {
        if p > best_p {
            best = j;
            best_p = p;
        }
    }
    best
}

/// Derives an independent stream key from a master seed and a run
/// coordinate, so every rollout draws from its own statistically
/// separated generator regardless of execution order.
pub fn stream_seed(master: u64, step: u64, prompt_idx: u64, rollout_idx: u64, purpose: u64) -> u64 {
    let mut h = master ^ 0x9e37_79b9_7f4a_7c15;
    for part in [step, prompt_idx, rollout_idx, purpose] {
        h ^= part.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 27;
    }
    h
}

/// ChaCha8 generator for one rollout (or one named auxiliary draw).
pub fn rollout_rng(master: u64, step: u64, prompt_idx: u64, rollout_idx: u64, purpose: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, step, prompt_idx, rollout_idx, purpose))
}
