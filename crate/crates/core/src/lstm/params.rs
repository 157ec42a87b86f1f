use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LstmError, ModelShape};

const CHECKPOINT_MAGIC: &str = "fairfed-lstm-checkpoint v1";

/// Weights of one LSTM layer.
///
/// `weights` stacks the input, forget, cell and output gate blocks in that
/// order; each block is `hidden × (input_dim + hidden)` row-major with the
/// input columns before the recurrent ones. `bias` follows the same gate
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub input_dim: usize,
    pub hidden: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LstmLayer {
    pub(crate) fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            input_dim,
            hidden,
            weights: vec![0.0; 4 * hidden * (input_dim + hidden)],
            bias: vec![0.0; 4 * hidden],
        }
    }

    pub fn row_len(&self) -> usize {
        self.input_dim + self.hidden
    }
}

/// Linear map from the top hidden state to the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputHead {
    /// `output_dim × hidden`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub shape: ModelShape,
    pub layers: Vec<LstmLayer>,
    pub head: OutputHead,
}

impl LstmParams {
    pub fn zeros(shape: &ModelShape) -> Result<Self, LstmError> {
        shape.validate()?;
        let layers = (0..shape.hidden_sizes.len())
            .map(|l| LstmLayer::zeros(shape.layer_input(l), shape.hidden_sizes[l]))
            .collect();
        let top = *shape.hidden_sizes.last().unwrap();
        Ok(Self {
            shape: shape.clone(),
            layers,
            head: OutputHead {
                weights: vec![0.0; shape.output_dim * top],
                bias: vec![0.0; shape.output_dim],
            },
        })
    }

    /// Every scalar in canonical order: per layer its gate weights then
    /// biases, then the head weights and bias.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .chain(&self.head.weights)
            .chain(&self.head.bias)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
            .chain(self.head.weights.iter_mut())
            .chain(self.head.bias.iter_mut())
    }

    pub fn flatten(&self) -> ParamVector {
        ParamVector {
            values: self.iter().copied().collect(),
            shape_tag: self.shape.fingerprint(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    /// Decimal checkpoint text; every value is written in shortest
    /// round-trip form so reloading is bit-exact.
    pub fn to_checkpoint(&self) -> String {
        let hidden: Vec<String> = self
            .shape
            .hidden_sizes
            .iter()
            .map(|h| h.to_string())
            .collect();
        let mut out = String::new();
        let _ = writeln!(out, "{CHECKPOINT_MAGIC}");
        let _ = writeln!(out, "input_dim {}", self.shape.input_dim);
        let _ = writeln!(out, "hidden_sizes {}", hidden.join(" "));
        let _ = writeln!(out, "output_dim {}", self.shape.output_dim);
        let _ = writeln!(out, "parameters {}", self.shape.param_count());
        for v in self.iter() {
            let _ = writeln!(out, "{v:e}");
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self, LstmError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let err = |line: usize, message: &str| LstmError::Checkpoint {
            line,
            message: message.to_string(),
        };
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| err(0, &format!("unexpected end of file, expected {what}")))
        };

        let (line, magic) = next("header")?;
        if magic != CHECKPOINT_MAGIC {
            return Err(err(line, "not a checkpoint file"));
        }
        let mut field = |key: &str| -> Result<(usize, Vec<usize>), LstmError> {
            let (line, text) = next(key)?;
            let rest = text
                .strip_prefix(key)
                .ok_or_else(|| err(line, &format!("expected `{key}`")))?;
            let values = rest
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| err(line, &format!("invalid `{key}` value")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((line, values))
        };
        let (l1, input) = field("input_dim")?;
        let (_, hidden) = field("hidden_sizes")?;
        let (l3, output) = field("output_dim")?;
        let (l4, count) = field("parameters")?;
        let single = |line: usize, v: &[usize]| {
            if v.len() == 1 {
                Ok(v[0])
            } else {
                Err(err(line, "expected a single value"))
            }
        };
        let shape = ModelShape {
            input_dim: single(l1, &input)?,
            hidden_sizes: hidden,
            output_dim: single(l3, &output)?,
        };
        shape.validate()?;
        let count = single(l4, &count)?;
        if count != shape.param_count() {
            return Err(err(l4, "parameter count does not match the shape"));
        }
        let mut values = Vec::with_capacity(count);
        for (line, text) in lines {
            if text.is_empty() {
                continue;
            }
            let v: f64 = text
                .parse()
                .map_err(|_| err(line, "invalid parameter value"))?;
            values.push(v);
        }
        unflatten(
            &ParamVector {
                values,
                shape_tag: shape.fingerprint(),
            },
            &shape,
        )
    }

    pub fn save_checkpoint(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_checkpoint())
    }

    pub fn load_checkpoint(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_checkpoint(&text).map_err(std::io::Error::other)
    }
}

/// Flat parameter list exchanged between clients and the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub shape_tag: String,
}

impl ParamVector {
    pub fn zeros_like(other: &ParamVector) -> Self {
        Self {
            values: vec![0.0; other.values.len()],
            shape_tag: other.shape_tag.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn check_compatible(&self, other: &ParamVector) -> Result<(), LstmError> {
        if self.shape_tag != other.shape_tag {
            return Err(LstmError::ShapeMismatch {
                expected: self.shape_tag.clone(),
                found: other.shape_tag.clone(),
            });
        }
        if self.values.len() != other.values.len() {
            return Err(LstmError::LengthMismatch {
                expected: self.values.len(),
                found: other.values.len(),
            });
        }
        Ok(())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &ParamVector) -> Result<(), LstmError> {
        self.check_compatible(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }
}

pub fn unflatten(vector: &ParamVector, shape: &ModelShape) -> Result<LstmParams, LstmError> {
    if vector.shape_tag != shape.fingerprint() {
        return Err(LstmError::ShapeMismatch {
            expected: shape.fingerprint(),
            found: vector.shape_tag.clone(),
        });
    }
    if vector.values.len() != shape.param_count() {
        return Err(LstmError::LengthMismatch {
            expected: shape.param_count(),
            found: vector.values.len(),
        });
    }
    let mut params = LstmParams::zeros(shape)?;
    for (slot, v) in params.iter_mut().zip(&vector.values) {
        *slot = *v;
    }
    Ok(params)
}

/// Uniform `[-s, s]` weights with `s = 1/sqrt(fan_in)`, zero biases except
/// the forget gate, which starts at 1.
pub fn init_params(shape: &ModelShape, seed: u64) -> Result<LstmParams, LstmError> {
    let mut params = LstmParams::zeros(shape)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in &mut params.layers {
        let s = 1.0 / (layer.row_len() as f64).sqrt();
        for w in &mut layer.weights {
            *w = rng.random_range(-s..=s);
        }
        let h = layer.hidden;
        layer.bias[h..2 * h].fill(1.0);
    }
    let top = *shape.hidden_sizes.last().unwrap();
    let s = 1.0 / (top as f64).sqrt();
    for w in &mut params.head.weights {
        *w = rng.random_range(-s..=s);
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Counts entries by building every matrix and bias explicitly.
    fn count_by_enumeration(input: usize, hidden: &[usize], output: usize) -> usize {
        let mut total = 0;
        let mut prev = input;
        for &h in hidden {
            for _gate in 0..4 {
                total += h * prev; // input weights
                total += h * h; // recurrent weights
                total += h; // bias
            }
            prev = h;
        }
        total + prev * output + output
    }

    #[test]
    fn parameter_count_small_model() {
        let shape = ModelShape::new(vec![4, 4]);
        assert_eq!(count_by_enumeration(1, &[4, 4], 1), 245);
        assert_eq!(shape.param_count(), 245);
        assert_eq!(init_params(&shape, 0).unwrap().flatten().len(), 245);
    }

    #[test]
    fn init_is_deterministic() {
        let shape = ModelShape::new(vec![3, 5]);
        let a = init_params(&shape, 11).unwrap().flatten();
        let b = init_params(&shape, 11).unwrap().flatten();
        let c = init_params(&shape, 12).unwrap().flatten();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn init_ranges_and_forget_bias() {
        let shape = ModelShape::new(vec![4, 2]);
        let p = init_params(&shape, 3).unwrap();
        for layer in &p.layers {
            let s = 1.0 / (layer.row_len() as f64).sqrt();
            assert!(layer.weights.iter().all(|w| w.abs() <= s));
            let h = layer.hidden;
            assert!(layer.bias[..h].iter().all(|&b| b == 0.0));
            assert!(layer.bias[h..2 * h].iter().all(|&b| b == 1.0));
            assert!(layer.bias[2 * h..].iter().all(|&b| b == 0.0));
        }
        assert_eq!(p.head.bias, vec![0.0]);
    }

    #[test]
    fn canonical_order() {
        let shape = ModelShape::new(vec![1]);
        let mut p = LstmParams::zeros(&shape).unwrap();
        // Layer 0: 4 gates × 1 × (1 + 1) weights, then 4 biases, then head.
        p.layers[0].weights = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        p.layers[0].bias = vec![9.0, 10.0, 11.0, 12.0];
        p.head.weights = vec![13.0];
        p.head.bias = vec![14.0];
        let flat = p.flatten().values;
        assert_eq!(flat, (1..=14).map(f64::from).collect::<Vec<_>>());
    }

    #[test]
    fn unflatten_rejects_mismatch() {
        let shape = ModelShape::new(vec![2]);
        let mut v = init_params(&shape, 1).unwrap().flatten();
        let other = ModelShape::new(vec![3]);
        assert!(matches!(
            unflatten(&v, &other),
            Err(LstmError::ShapeMismatch { .. })
        ));
        v.values.pop();
        assert!(matches!(
            unflatten(&v, &shape),
            Err(LstmError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn checkpoint_reload_is_bit_exact() {
        let shape = ModelShape::new(vec![3, 2]);
        let mut p = init_params(&shape, 99).unwrap();
        p.head.bias[0] = 1e-300;
        p.layers[0].weights[0] = -0.1 + 0.2;
        let back = LstmParams::from_checkpoint(&p.to_checkpoint()).unwrap();
        let bits = |q: &LstmParams| q.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&p));
        assert_eq!(back.shape, p.shape);
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        let shape = ModelShape::new(vec![2]);
        let text = init_params(&shape, 1).unwrap().to_checkpoint();
        let truncated: String = text.lines().take(8).map(|l| format!("{l}\n")).collect();
        assert!(LstmParams::from_checkpoint(&truncated).is_err());
        let corrupted = text.replacen("parameters", "params", 1);
        assert!(matches!(
            LstmParams::from_checkpoint(&corrupted),
            Err(LstmError::Checkpoint { line: 5, .. })
        ));
    }

    proptest! {
        #[test]
        fn count_formula_and_round_trip(hidden in prop::collection::vec(1usize..7, 1..4), seed in any::<u64>()) {
            let shape = ModelShape::new(hidden.clone());
            prop_assert_eq!(shape.param_count(), count_by_enumeration(1, &hidden, 1));
            let p = init_params(&shape, seed).unwrap();
            let flat = p.flatten();
            prop_assert_eq!(flat.len(), shape.param_count());
            let back = unflatten(&flat, &shape).unwrap();
            prop_assert_eq!(&back, &p);
            prop_assert_eq!(back.flatten(), flat);
        }
    }
}
