use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::codebook::Codebook;
use crate::error::{Error, Result};
use crate::seed;

/// Default per-layer codebook sizes, decreasing with depth.
pub const DEFAULT_CODEBOOK_SIZES: [usize; 8] = [8192, 4096, 2048, 1024, 1024, 1024, 1024, 1024];

/// Stochastic codeword selection. With `enabled`, the index is sampled from
/// `softmax(-d^2 / temperature)` via the Gumbel-max trick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GumbelConfig {
    pub temperature: f64,
    pub enabled: bool,
    pub seed: u64,
}

impl Default for GumbelConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            enabled: false,
            seed: 0,
        }
    }
}

impl GumbelConfig {
    pub fn disabled() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.enabled && !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::config(format!(
                "gumbel temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropoutMode {
    /// Every layer from the second on is kept or dropped independently.
    #[default]
    PerLayer,
    /// With probability `1 - keep_prob`, a cut point `r >= 2` is drawn and all layers from `r` on are dropped.
    Suffix,
}

/// Layerwise dropout over the quantizer outputs. The first layer is never dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DropoutConfig {
    pub enabled: bool,
    pub keep_prob_per_layer: f64,
    pub mode: DropoutMode,
    pub seed: u64,
}

impl Default for DropoutConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            keep_prob_per_layer: 0.5,
            mode: DropoutMode::PerLayer,
            seed: 0,
        }
    }
}

impl DropoutConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.keep_prob_per_layer) {
            return Err(Error::config(format!(
                "keep_prob_per_layer must lie in [0, 1], got {}",
                self.keep_prob_per_layer
            )));
        }
        Ok(())
    }

    fn active_layers<R: Rng>(&self, n_layers: usize, rng: &mut R) -> Vec<bool> {
        let mut active = vec![true; n_layers];
        match self.mode {
            DropoutMode::PerLayer => {
                for a in active.iter_mut().skip(1) {
                    *a = rng.gen::<f64>() < self.keep_prob_per_layer;
                }
            }
            DropoutMode::Suffix => {
                if n_layers > 1 && rng.gen::<f64>() >= self.keep_prob_per_layer {
                    let cut = rng.gen_range(1..n_layers);
                    active[cut..].iter_mut().for_each(|a| *a = false);
                }
            }
        }
        active
    }
}

/// Output of quantizing one vector through the stack.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizeResult {
    /// Selected codeword per layer; `None` for layers dropped by layerwise dropout.
    pub indices: Vec<Option<u32>>,
    /// Sum of the selected codewords of the active layers.
    pub quantized: Vec<f64>,
    /// Running residual after each layer (unchanged across dropped layers).
    pub residuals: Vec<Vec<f64>>,
}

impl QuantizeResult {
    pub fn is_active(&self, layer: usize) -> bool {
        self.indices[layer].is_some()
    }

    /// The vector that layer `layer` quantized (or would have quantized).
    pub fn layer_input<'a>(&'a self, input: &'a [f64], layer: usize) -> &'a [f64] {
        if layer == 0 {
            input
        } else {
            &self.residuals[layer - 1]
        }
    }

    /// All indices, if every layer was active.
    pub fn full_indices(&self) -> Option<Vec<u32>> {
        self.indices.iter().copied().collect()
    }
}

/// `||input - quantized||^2`.
///
/// Gradients of the quantizer with respect to its input are taken as the
/// identity by an encoder trained through it; nothing here differentiates.
pub fn commitment_loss(input: &[f64], result: &QuantizeResult) -> Result<f64> {
    if input.len() != result.quantized.len() {
        return Err(Error::shape(format!(
            "input dim {} vs quantized dim {}",
            input.len(),
            result.quantized.len()
        )));
    }
    Ok(input
        .iter()
        .zip(&result.quantized)
        .map(|(x, q)| (x - q) * (x - q))
        .sum())
}

/// Mean of [`commitment_loss`] over a batch.
pub fn batch_commitment_loss(inputs: &[&[f64]], results: &[QuantizeResult]) -> Result<f64> {
    if inputs.len() != results.len() {
        return Err(Error::shape(format!("{} inputs vs {} results", inputs.len(), results.len())));
    }
    if inputs.is_empty() {
        return Err(Error::EmptyInput("empty batch".into()));
    }
    let mut total = 0.0;
    for (x, r) in inputs.iter().zip(results) {
        total += commitment_loss(x, r)?;
    }
    Ok(total / inputs.len() as f64)
}

/// Codeword initialisation strategy for [`RvqStack::init_from_batch`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    /// Uniform sample of batch vectors (without replacement when the batch is large enough).
    #[default]
    Sample,
    KmeansPlusPlus,
}

/// Ordered residual quantizer layers sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct RvqStack {
    layers: Vec<Codebook>,
}

impl RvqStack {
    pub fn new(layers: Vec<Codebook>) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::config("an RVQ stack needs at least one layer"));
        };
        let dim = first.dim();
        if let Some((i, l)) = layers.iter().enumerate().find(|(_, l)| l.dim() != dim) {
            return Err(Error::shape(format!("layer {i} has dimension {}, layer 0 has {dim}", l.dim())));
        }
        Ok(Self { layers })
    }

    /// Initialise layer by layer from a batch: layer `l` draws its codewords
    /// from the residuals the batch leaves after layers `0..l`.
    pub fn init_from_batch(
        sizes: &[usize],
        batch: &[f64],
        dim: usize,
        ema_decay: f64,
        norm_beta: f64,
        method: InitMethod,
        rng_seed: u64,
    ) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::config("codebook sizes must be non-empty and positive"));
        }
        if dim == 0 || batch.len() % dim != 0 {
            return Err(Error::shape(format!("batch length {} not a multiple of dim {dim}", batch.len())));
        }
        let n = batch.len() / dim;
        if n == 0 {
            return Err(Error::EmptyInput("cannot initialise codebooks from an empty batch".into()));
        }
        let mut rng = seed::rng(rng_seed);
        let mut residual = batch.to_vec();
        let mut layers = Vec::with_capacity(sizes.len());
        for &k in sizes {
            let picks = match method {
                InitMethod::Sample => sample_rows(n, k, &mut rng),
                InitMethod::KmeansPlusPlus => kmeans_pp_rows(&residual, dim, k, &mut rng),
            };
            let mut words = Vec::with_capacity(k * dim);
            for p in picks {
                words.extend_from_slice(&residual[p * dim..(p + 1) * dim]);
            }
            let book = Codebook::new(words, dim, ema_decay, norm_beta)?;
            for row in residual.chunks_exact_mut(dim) {
                let j = book.nearest(row);
                for (r, c) in row.iter_mut().zip(book.codeword(j)) {
                    *r -= c;
                }
            }
            layers.push(book);
        }
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Codebook] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Codebook] {
        &mut self.layers
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn dim(&self) -> usize {
        self.layers[0].dim()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.layers.iter().map(Codebook::size).collect()
    }

    /// Keep only the first `n` layers.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.layers.len() {
            return Err(Error::config(format!("cannot keep {n} of {} layers", self.layers.len())));
        }
        Self::new(self.layers[..n].to_vec())
    }

    /// Quantize one vector.
    ///
    /// `draw` identifies this call's random stream: the Gumbel and dropout
    /// generators are seeded from their config seeds mixed with `draw`, and
    /// are independent of each other, so enabling one never changes the
    /// other's draws.
    pub fn quantize(
        &self,
        input: &[f64],
        gumbel: &GumbelConfig,
        dropout: Option<&DropoutConfig>,
        draw: u64,
    ) -> Result<QuantizeResult> {
        if input.len() != self.dim() {
            return Err(Error::shape(format!("input dim {} vs codebook dim {}", input.len(), self.dim())));
        }
        gumbel.validate()?;
        let active = match dropout {
            Some(d) if d.enabled => {
                d.validate()?;
                let mut rng = seed::rng(seed::mix(d.seed, &[draw]));
                d.active_layers(self.layers.len(), &mut rng)
            }
            _ => vec![true; self.layers.len()],
        };
        let mut gumbel_rng = gumbel
            .enabled
            .then(|| seed::rng(seed::mix(gumbel.seed, &[draw])));

        let mut residual = input.to_vec();
        let mut quantized = vec![0.0; input.len()];
        let mut indices = Vec::with_capacity(self.layers.len());
        let mut residuals = Vec::with_capacity(self.layers.len());
        for (layer, book) in self.layers.iter().enumerate() {
            if !active[layer] {
                indices.push(None);
                residuals.push(residual.clone());
                continue;
            }
            let j = match gumbel_rng.as_mut() {
                Some(rng) => gumbel_select(&book.distances(&residual), gumbel.temperature, rng),
                None => book.nearest(&residual),
            };
            for ((r, q), c) in residual.iter_mut().zip(quantized.iter_mut()).zip(book.codeword(j)) {
                *r -= c;
                *q += c;
            }
            indices.push(Some(j as u32));
            residuals.push(residual.clone());
        }
        Ok(QuantizeResult {
            indices,
            quantized,
            residuals,
        })
    }

    /// Deterministic nearest-codeword quantization through every layer.
    pub fn quantize_nearest(&self, input: &[f64]) -> Result<QuantizeResult> {
        self.quantize(input, &GumbelConfig::disabled(), None, 0)
    }

    /// Nearest-codeword indices for every layer.
    pub fn encode_vector(&self, input: &[f64]) -> Result<Vec<u32>> {
        Ok(self
            .quantize_nearest(input)?
            .full_indices()
            .expect("all layers active without dropout"))
    }

    /// Sum of the indexed codewords.
    pub fn decode_indices(&self, indices: &[u32]) -> Result<Vec<f64>> {
        if indices.len() != self.layers.len() {
            return Err(Error::shape(format!(
                "{} indices for {} layers",
                indices.len(),
                self.layers.len()
            )));
        }
        let mut out = vec![0.0; self.dim()];
        for (layer, (&j, book)) in indices.iter().zip(&self.layers).enumerate() {
            if j as usize >= book.size() {
                return Err(Error::IndexOutOfRange {
                    layer,
                    index: j,
                    rows: book.size(),
                });
            }
            for (o, c) in out.iter_mut().zip(book.codeword(j as usize)) {
                *o += c;
            }
        }
        Ok(out)
    }
}

/// Sample an index from `softmax(-d / temperature)` by perturbing the logits
/// with standard Gumbel noise and taking the arg-max.
pub fn gumbel_select<R: Rng + ?Sized>(sq_dists: &[f64], temperature: f64, rng: &mut R) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (j, &d) in sq_dists.iter().enumerate() {
        let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let g = -(-u.ln()).ln();
        let score = -d / temperature + g;
        if score > best_score {
            best_score = score;
            best = j;
        }
    }
    best
}

fn sample_rows<R: Rng>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    if n >= k {
        index::sample(rng, n, k).into_vec()
    } else {
        (0..k).map(|_| rng.gen_range(0..n)).collect()
    }
}

fn kmeans_pp_rows<R: Rng>(data: &[f64], dim: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let n = data.len() / dim;
    let row = |i: usize| &data[i * dim..(i + 1) * dim];
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut picks = vec![rng.gen_range(0..n)];
    let mut best: Vec<f64> = (0..n).map(|i| sq(row(i), row(picks[0]))).collect();
    while picks.len() < k {
        let total: f64 = best.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in best.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        picks.push(next);
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(sq(row(i), row(next)));
        }
    }
    picks
}
