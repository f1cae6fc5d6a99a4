//! Base classifiers `f: ℝᴺ → {0, …, C-1}`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{check_dim, dist2, dot};
use crate::sigma::SigmaField;

pub trait BaseClassifier: Send + Sync {
    fn dim(&self) -> usize;
    fn num_classes(&self) -> usize;
    fn classify(&self, x: &[f64]) -> usize;
}

impl<T: BaseClassifier + ?Sized> BaseClassifier for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn classify(&self, x: &[f64]) -> usize {
        (**self).classify(x)
    }
}

impl<T: BaseClassifier + ?Sized> BaseClassifier for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn classify(&self, x: &[f64]) -> usize {
        (**self).classify(x)
    }
}

/// Always predicts the same class.
#[derive(Clone, Debug)]
pub struct ConstantClass {
    pub dim: usize,
    pub class: usize,
    pub num_classes: usize,
}

impl BaseClassifier for ConstantClass {
    fn dim(&self) -> usize {
        self.dim
    }
    fn num_classes(&self) -> usize {
        self.num_classes
    }
    fn classify(&self, _: &[f64]) -> usize {
        self.class
    }
}

/// Class 1 on `{x : ⟨w, x⟩ > offset}`, class 0 elsewhere.
#[derive(Clone, Debug)]
pub struct LinearHalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl BaseClassifier for LinearHalfSpace {
    fn dim(&self) -> usize {
        self.normal.len()
    }
    fn num_classes(&self) -> usize {
        2
    }
    fn classify(&self, x: &[f64]) -> usize {
        usize::from(dot(&self.normal, x) > self.offset)
    }
}

/// Class 1 on the closed ball, class 0 outside.
#[derive(Clone, Debug)]
pub struct BallIndicator {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BaseClassifier for BallIndicator {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn num_classes(&self) -> usize {
        2
    }
    fn classify(&self, x: &[f64]) -> usize {
        usize::from(dist2(x, &self.center) <= self.radius * self.radius)
    }
}

/// Majority vote among the `k` nearest labeled points; ties go to the
/// smaller label.
#[derive(Clone, Debug)]
pub struct KnnVote {
    data: Dataset,
    k: usize,
}

impl KnnVote {
    pub fn new(data: Dataset, k: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if k == 0 || k > data.len() {
            return Err(Error::Config(format!(
                "k = {k} must be in 1..={}",
                data.len()
            )));
        }
        Ok(Self { data, k })
    }
}

impl BaseClassifier for KnnVote {
    fn dim(&self) -> usize {
        self.data.dim()
    }
    fn num_classes(&self) -> usize {
        self.data.num_classes()
    }
    fn classify(&self, x: &[f64]) -> usize {
        let mut d: Vec<(f64, usize)> = (0..self.data.len())
            .map(|i| (dist2(x, self.data.point(i)), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
        }
        let mut votes = vec![0usize; self.num_classes()];
        for &(_, i) in &d[..self.k] {
            votes[self.data.label(i)] += 1;
        }
        argmax_first(&votes)
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax_first<T: PartialOrd + Copy>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
struct Dense {
    inputs: usize,
    outputs: usize,
    /// Row-major, `outputs × inputs`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            out.push(dot(row, x) + self.bias[o]);
        }
    }
}

/// Gaussian noise added to training inputs.
#[derive(Clone, Debug, Default)]
pub enum Augmentation {
    #[default]
    None,
    Constant(f64),
    /// Per-example standard deviation `σ(x)` from a field.
    Field(SigmaField),
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![20, 20],
            epochs: 300,
            learning_rate: 0.05,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// Small fully connected ReLU network.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct TinyMlp {
    layers: Vec<Dense>,
}

impl TinyMlp {
    pub fn new_random(dim: usize, hidden: &[usize], classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![dim];
        sizes.extend_from_slice(hidden);
        sizes.push(classes);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (i, o) = (w[0], w[1]);
                let he = Normal::new(0.0, (2.0 / i as f64).sqrt()).expect("finite std");
                Dense {
                    inputs: i,
                    outputs: o,
                    weights: (0..i * o).map(|_| he.sample(&mut rng)).collect(),
                    bias: vec![0.0; o],
                }
            })
            .collect();
        Self { layers }
    }

    /// Trains with plain minibatch SGD on softmax cross-entropy.
    pub fn train(data: &Dataset, cfg: &TrainConfig, augmentation: &Augmentation) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
            return Err(Error::Config(
                "batch size and learning rate must be positive".into(),
            ));
        }
        let classes = data.num_classes().max(2);
        let mut net = Self::new_random(data.dim(), &cfg.hidden, classes, cfg.seed);
        let noise_scale: Vec<f64> = match augmentation {
            Augmentation::None => vec![0.0; data.len()],
            Augmentation::Constant(s) => vec![*s; data.len()],
            Augmentation::Field(f) => (0..data.len())
                .map(|i| f.sigma_at(data.point(i)))
                .collect::<Result<_>>()?,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut grads = net.zero_grads();
        let mut input = vec![0.0; data.dim()];
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(cfg.batch_size) {
                for g in grads.iter_mut() {
                    g.0.iter_mut().for_each(|v| *v = 0.0);
                    g.1.iter_mut().for_each(|v| *v = 0.0);
                }
                for &i in batch {
                    for (slot, &v) in input.iter_mut().zip(data.point(i)) {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *slot = v + noise_scale[i] * z;
                    }
                    net.accumulate_gradient(&input, data.label(i), &mut grads);
                }
                let step = cfg.learning_rate / batch.len() as f64;
                for (layer, (gw, gb)) in net.layers.iter_mut().zip(&grads) {
                    layer
                        .weights
                        .iter_mut()
                        .zip(gw)
                        .for_each(|(w, g)| *w -= step * g);
                    layer
                        .bias
                        .iter_mut()
                        .zip(gb)
                        .for_each(|(b, g)| *b -= step * g);
                }
            }
        }
        Ok(net)
    }

    fn zero_grads(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
            .collect()
    }

    fn accumulate_gradient(&self, x: &[f64], label: usize, grads: &mut [(Vec<f64>, Vec<f64>)]) {
        // activations[0] is the input, activations[i + 1] the post-ReLU output of layer i
        let mut acts: Vec<Vec<f64>> = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::new();
            layer.forward(acts.last().expect("input present"), &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(out);
        }
        let logits = &acts[last + 1];
        let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|v| (v - mx).exp()).collect();
        let total: f64 = exps.iter().sum();
        let mut delta: Vec<f64> = exps.iter().map(|e| e / total).collect();
        delta[label] -= 1.0;

        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &acts[i];
            let (gw, gb) = &mut grads[i];
            for o in 0..layer.outputs {
                gb[o] += delta[o];
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += delta[o] * a;
                }
            }
            if i > 0 {
                let mut prev = vec![0.0; layer.inputs];
                for o in 0..layer.outputs {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += delta[o] * w;
                    }
                }
                for (p, a) in prev.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    pub fn accuracy(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = (0..data.len())
            .filter(|&i| self.classify(data.point(i)) == data.label(i))
            .count();
        hits as f64 / data.len() as f64
    }

    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        check_dim(self.dim(), x.len())
    }
}

impl BaseClassifier for TinyMlp {
    fn dim(&self) -> usize {
        self.layers[0].inputs
    }
    fn num_classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }
    fn classify(&self, x: &[f64]) -> usize {
        argmax_first(&self.logits(x))
    }
}
