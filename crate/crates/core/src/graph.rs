//! Dense layered networks: affine map plus per-neuron activation, layer by layer.
//!
//! Every neuron accumulates its pre-activation from `+0.0`, adding
//! `weight * input` for inputs in ascending index order, then the bias.
//! Because such an accumulator can never hold `-0.0`, terms with a zero
//! weight never change the sum (for finite inputs). Block-diagonal stacking
//! and zero padding are therefore bitwise transparent, which the compiler
//! relies on.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("layer {layer}: expected input width {expected}, got {actual}")]
    Shape {
        layer: usize,
        expected: usize,
        actual: usize,
    },
    #[error("cannot stack networks of depth {left} and {right}; pad the shallower one with subnets::pad_to_depth")]
    DepthMismatch { left: usize, right: usize },
    #[error("invalid network: {0}")]
    Invalid(ValidationReport),
    #[error("malformed network document: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Neuron activation functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    #[serde(rename = "HS")]
    Heaviside,
    #[serde(rename = "LG")]
    Logistic,
    #[serde(rename = "ReLU")]
    Relu,
    #[serde(rename = "HTAN")]
    HypTan,
    #[serde(rename = "CO")]
    Constant,
    #[serde(rename = "LI")]
    Linear,
}

impl Activation {
    pub const ALL: [Activation; 6] = [
        Activation::Heaviside,
        Activation::Logistic,
        Activation::Relu,
        Activation::HypTan,
        Activation::Constant,
        Activation::Linear,
    ];

    /// Heaviside uses the convention `HS(0) = 1`. NaN propagates through
    /// every activation except `Constant`.
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Heaviside => {
                if x.is_nan() {
                    x
                } else if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Logistic => 1.0 / (1.0 + (-x).exp()),
            Activation::Relu => {
                if x.is_nan() || x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::HypTan => x.tanh(),
            Activation::Constant => 1.0,
            Activation::Linear => x,
        }
    }
}

pub fn activate(kind: Activation, x: f64) -> f64 {
    kind.apply(x)
}

/// One layer: `K` neurons reading `M` inputs. `weights` is stored row-major,
/// one row of length `M` per neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activations: Vec<Activation>,
}

impl Layer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>, activations: Vec<Activation>) -> Self {
        Layer {
            weights,
            bias,
            activations,
        }
    }

    /// A layer with every neuron using the same activation.
    pub fn uniform(weights: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Self {
        let k = bias.len();
        Layer::new(weights, bias, vec![activation; k])
    }

    pub fn width(&self) -> usize {
        self.bias.len()
    }

    pub fn input_width(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    fn forward(&self, index: usize, input: &[f64]) -> Result<Vec<f64>, GraphError> {
        if input.len() != self.input_width() {
            return Err(GraphError::Shape {
                layer: index,
                expected: self.input_width(),
                actual: input.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.bias)
            .zip(&self.activations)
            .map(|((row, &bias), &act)| {
                let mut acc = 0.0;
                for (&w, &x) in row.iter().zip(input) {
                    acc += w * x;
                }
                act.apply(acc + bias)
            })
            .collect())
    }

    fn nonzeros(&self) -> usize {
        self.weights
            .iter()
            .map(|row| row.iter().filter(|&&w| w != 0.0).count())
            .sum()
    }
}

/// Evaluates a single layer; `index` is only used to label shape errors.
pub fn eval_layer(layer: &Layer, index: usize, input: &[f64]) -> Result<Vec<f64>, GraphError> {
    layer.forward(index, input)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoLayers,
    ZeroInputDim,
    EmptyLayer {
        layer: usize,
    },
    LengthMismatch {
        layer: usize,
        rows: usize,
        bias: usize,
        activations: usize,
    },
    RaggedRow {
        layer: usize,
        neuron: usize,
        expected: usize,
        actual: usize,
    },
    Shape {
        layer: usize,
        expects: usize,
        receives: usize,
    },
    NonFiniteWeight {
        layer: usize,
        neuron: usize,
        input: usize,
    },
    NonFiniteBias {
        layer: usize,
        neuron: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::NoLayers => write!(f, "network has no layers"),
            Violation::ZeroInputDim => write!(f, "input_dim must be at least 1"),
            Violation::EmptyLayer { layer } => write!(f, "layer {layer} has no neurons"),
            Violation::LengthMismatch {
                layer,
                rows,
                bias,
                activations,
            } => write!(
                f,
                "layer {layer}: {rows} weight rows, {bias} biases, {activations} activations"
            ),
            Violation::RaggedRow {
                layer,
                neuron,
                expected,
                actual,
            } => write!(
                f,
                "layer {layer} neuron {neuron}: row has {actual} weights, expected {expected}"
            ),
            Violation::Shape {
                layer,
                expects,
                receives,
            } => write!(
                f,
                "layer {layer}: expects input width {expects} but receives {receives}"
            ),
            Violation::NonFiniteWeight {
                layer,
                neuron,
                input,
            } => write!(
                f,
                "layer {layer} neuron {neuron}: non-finite weight from input {input}"
            ),
            Violation::NonFiniteBias { layer, neuron } => {
                write!(f, "layer {layer} neuron {neuron}: non-finite bias")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks a candidate network without constructing it.
pub fn validate_network(input_dim: usize, layers: &[Layer]) -> ValidationReport {
    let mut violations = Vec::new();
    if input_dim == 0 {
        violations.push(Violation::ZeroInputDim);
    }
    if layers.is_empty() {
        violations.push(Violation::NoLayers);
    }
    let mut feeding = input_dim;
    for (l, layer) in layers.iter().enumerate() {
        let rows = layer.weights.len();
        if rows != layer.bias.len() || rows != layer.activations.len() {
            violations.push(Violation::LengthMismatch {
                layer: l,
                rows,
                bias: layer.bias.len(),
                activations: layer.activations.len(),
            });
        }
        if rows == 0 {
            violations.push(Violation::EmptyLayer { layer: l });
        }
        let expected = layer.input_width();
        if expected != feeding {
            violations.push(Violation::Shape {
                layer: l,
                expects: expected,
                receives: feeding,
            });
        }
        for (k, row) in layer.weights.iter().enumerate() {
            if row.len() != expected {
                violations.push(Violation::RaggedRow {
                    layer: l,
                    neuron: k,
                    expected,
                    actual: row.len(),
                });
            }
            for (m, w) in row.iter().enumerate() {
                if !w.is_finite() {
                    violations.push(Violation::NonFiniteWeight {
                        layer: l,
                        neuron: k,
                        input: m,
                    });
                }
            }
        }
        for (k, b) in layer.bias.iter().enumerate() {
            if !b.is_finite() {
                violations.push(Violation::NonFiniteBias {
                    layer: l,
                    neuron: k,
                });
            }
        }
        feeding = rows;
    }
    ValidationReport { violations }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DepthStats {
    pub depth: usize,
    pub max_width: usize,
    pub neuron_count: usize,
    pub weight_nonzeros: usize,
}

impl fmt::Display for DepthStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "depth: {}", self.depth)?;
        writeln!(f, "max_width: {}", self.max_width)?;
        writeln!(f, "neuron_count: {}", self.neuron_count)?;
        write!(f, "weight_nonzeros: {}", self.weight_nonzeros)
    }
}

/// A validated, immutable feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    input_dim: usize,
    layers: Vec<Layer>,
}

impl NetworkGraph {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self, GraphError> {
        let report = validate_network(input_dim, &layers);
        if !report.is_valid() {
            return Err(GraphError::Invalid(report));
        }
        Ok(NetworkGraph { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::width)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    pub fn validate(&self) -> ValidationReport {
        validate_network(self.input_dim, &self.layers)
    }

    pub fn eval(&self, input: &[f64]) -> Result<Vec<f64>, GraphError> {
        if input.len() != self.input_dim {
            return Err(GraphError::Shape {
                layer: 0,
                expected: self.input_dim,
                actual: input.len(),
            });
        }
        let mut x = input.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            x = layer.forward(l, &x)?;
        }
        Ok(x)
    }

    pub fn stats(&self) -> DepthStats {
        DepthStats {
            depth: self.depth(),
            max_width: self.layers.iter().map(Layer::width).max().unwrap_or(0),
            neuron_count: self.layers.iter().map(Layer::width).sum(),
            weight_nonzeros: self.layers.iter().map(Layer::nonzeros).sum(),
        }
    }

    /// Feeds the output of `self` into `next`.
    pub fn then(&self, next: &NetworkGraph) -> Result<NetworkGraph, GraphError> {
        sequential(self, next)
    }

    pub fn to_json(&self) -> String {
        serialize(self)
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        deserialize(text)
    }
}

pub fn eval_network(net: &NetworkGraph, input: &[f64]) -> Result<Vec<f64>, GraphError> {
    net.eval(input)
}

pub fn sequential(first: &NetworkGraph, second: &NetworkGraph) -> Result<NetworkGraph, GraphError> {
    if first.output_dim() != second.input_dim() {
        return Err(GraphError::Shape {
            layer: first.depth(),
            expected: second.input_dim(),
            actual: first.output_dim(),
        });
    }
    let layers = first.layers.iter().chain(&second.layers).cloned().collect();
    NetworkGraph::new(first.input_dim, layers)
}

/// Block-diagonal stacking: `a` reads the low input indices and produces
/// the low output indices.
pub fn parallel(a: &NetworkGraph, b: &NetworkGraph) -> Result<NetworkGraph, GraphError> {
    if a.depth() != b.depth() {
        return Err(GraphError::DepthMismatch {
            left: a.depth(),
            right: b.depth(),
        });
    }
    let mut a_in = a.input_dim;
    let mut b_in = b.input_dim;
    let mut layers = Vec::with_capacity(a.depth());
    for (la, lb) in a.layers.iter().zip(&b.layers) {
        let mut weights = Vec::with_capacity(la.width() + lb.width());
        for row in &la.weights {
            let mut r = row.clone();
            r.resize(a_in + b_in, 0.0);
            weights.push(r);
        }
        for row in &lb.weights {
            let mut r = vec![0.0; a_in];
            r.extend_from_slice(row);
            weights.push(r);
        }
        let bias = la.bias.iter().chain(&lb.bias).copied().collect();
        let activations = la
            .activations
            .iter()
            .chain(&lb.activations)
            .copied()
            .collect();
        layers.push(Layer::new(weights, bias, activations));
        a_in = la.width();
        b_in = lb.width();
    }
    NetworkGraph::new(a.input_dim + b.input_dim, layers)
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activations: Vec<Activation>,
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    input_dim: usize,
    layers: Vec<LayerDoc>,
}

/// Writes the network document. Reals use the shortest decimal that reads
/// back to the same binary64 value.
pub fn serialize(net: &NetworkGraph) -> String {
    let doc = NetworkDoc {
        input_dim: net.input_dim,
        layers: net
            .layers
            .iter()
            .map(|l| LayerDoc {
                weights: l.weights.clone(),
                bias: l.bias.clone(),
                activations: l.activations.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("network document serializes")
}

pub fn deserialize(text: &str) -> Result<NetworkGraph, GraphError> {
    let doc: NetworkDoc = serde_json::from_str(text)?;
    let layers = doc
        .layers
        .into_iter()
        .map(|l| Layer::new(l.weights, l.bias, l.activations))
        .collect();
    NetworkGraph::new(doc.input_dim, layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ident(dim: usize) -> Layer {
        let weights = (0..dim)
            .map(|k| (0..dim).map(|m| if k == m { 1.0 } else { 0.0 }).collect())
            .collect();
        Layer::uniform(weights, vec![0.0; dim], Activation::Linear)
    }

    #[test]
    fn activation_table() {
        assert_eq!(activate(Activation::Relu, -3.0), 0.0);
        assert_eq!(activate(Activation::Heaviside, 0.0), 1.0);
        assert_eq!(activate(Activation::Heaviside, -0.0), 1.0);
        assert_eq!(activate(Activation::Heaviside, -1e-300), 0.0);
        assert_eq!(activate(Activation::Logistic, 0.0), 0.5);
        assert_eq!(activate(Activation::Constant, f64::NAN), 1.0);
        assert!(activate(Activation::Relu, f64::NAN).is_nan());
        assert!(activate(Activation::Heaviside, f64::NAN).is_nan());
        assert!(activate(Activation::HypTan, f64::NAN).is_nan());
        assert_eq!(activate(Activation::Logistic, f64::NEG_INFINITY), 0.0);
        assert_eq!(activate(Activation::Logistic, f64::INFINITY), 1.0);
        assert_eq!(activate(Activation::Relu, f64::INFINITY), f64::INFINITY);
    }

    #[test]
    fn eval_layer_examples() {
        let l = Layer::uniform(vec![vec![2.0]], vec![1.0], Activation::Linear);
        assert_eq!(eval_layer(&l, 0, &[3.0]).unwrap(), vec![7.0]);
        let l = Layer::uniform(vec![vec![1.0, 1.0]], vec![0.0], Activation::Relu);
        assert_eq!(eval_layer(&l, 0, &[-2.0, 1.0]).unwrap(), vec![0.0]);
        let l = Layer::uniform(vec![vec![0.0]], vec![0.0], Activation::Constant);
        assert_eq!(eval_layer(&l, 0, &[5.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn eval_layer_shape_error_names_layer() {
        let l = Layer::uniform(vec![vec![1.0, 1.0]], vec![0.0], Activation::Linear);
        match eval_layer(&l, 4, &[1.0]) {
            Err(GraphError::Shape {
                layer: 4,
                expected: 2,
                actual: 1,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identity_networks() {
        let one = NetworkGraph::new(1, vec![ident(1)]).unwrap();
        assert_eq!(one.eval(&[4.5]).unwrap(), vec![4.5]);
        let two = NetworkGraph::new(2, vec![ident(2), ident(2)]).unwrap();
        assert_eq!(two.eval(&[-1.0, 2.0]).unwrap(), vec![-1.0, 2.0]);
        assert!(two.eval(&[1.0]).is_err());
    }

    #[test]
    fn validation_reports() {
        assert!(validate_network(2, &[ident(2), ident(2)]).is_valid());

        // layer 1 expects 3 inputs but layer 0 has 2 neurons
        let wide = Layer::uniform(vec![vec![1.0, 0.0, 0.0]], vec![0.0], Activation::Linear);
        let r = validate_network(2, &[ident(2), wide]);
        assert_eq!(
            r.violations,
            vec![Violation::Shape {
                layer: 1,
                expects: 3,
                receives: 2
            }]
        );

        let mut bad = ident(2);
        bad.bias[1] = f64::NAN;
        let r = validate_network(2, &[bad]);
        assert_eq!(
            r.violations,
            vec![Violation::NonFiniteBias {
                layer: 0,
                neuron: 1
            }]
        );

        assert_eq!(
            validate_network(1, &[]).violations,
            vec![Violation::NoLayers]
        );
    }

    #[test]
    fn sequential_and_parallel_shapes() {
        let id2 = NetworkGraph::new(2, vec![ident(2)]).unwrap();
        let id3 = NetworkGraph::new(3, vec![ident(3)]).unwrap();
        let both = sequential(&id2, &id2).unwrap();
        assert_eq!(both.depth(), 2);
        assert_eq!(both.eval(&[3.0, -4.0]).unwrap(), vec![3.0, -4.0]);
        assert!(matches!(
            sequential(&id2, &id3),
            Err(GraphError::Shape { .. })
        ));

        let id1 = NetworkGraph::new(1, vec![ident(1)]).unwrap();
        let p = parallel(&id1, &id1).unwrap();
        assert_eq!(p.input_dim(), 2);
        assert_eq!(p.eval(&[5.0, 6.0]).unwrap(), vec![5.0, 6.0]);

        let deep = NetworkGraph::new(1, vec![ident(1), ident(1)]).unwrap();
        assert!(matches!(
            parallel(&id1, &deep),
            Err(GraphError::DepthMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn document_errors() {
        assert!(matches!(
            deserialize(r#"{"input_dim": 1, "layers": []}"#),
            Err(GraphError::Invalid(_))
        ));
        let full = NetworkGraph::new(2, vec![ident(2)]).unwrap().to_json();
        let truncated = &full[..full.len() / 2];
        match deserialize(truncated) {
            Err(GraphError::Parse(e)) => assert!(e.line() > 0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            deserialize(
                r#"{"input_dim": 1, "layers": [{"weights": [[1]], "bias": [0], "activations": ["XX"]}]}"#
            ),
            Err(GraphError::Parse(_))
        ));
    }

    #[test]
    fn document_uses_short_activation_names() {
        let net = NetworkGraph::new(
            1,
            vec![Layer::new(
                vec![vec![0.1]; 6],
                vec![0.0; 6],
                Activation::ALL.to_vec(),
            )],
        )
        .unwrap();
        let text = net.to_json();
        for tag in [
            "\"HS\"", "\"LG\"", "\"ReLU\"", "\"HTAN\"", "\"CO\"", "\"LI\"",
        ] {
            assert!(text.contains(tag), "missing {tag}");
        }
        assert!(text.contains("0.1"));
        assert_eq!(NetworkGraph::from_json(&text).unwrap(), net);
    }

    #[test]
    fn stats_count_nonzeros() {
        let net = NetworkGraph::new(2, vec![ident(2), ident(2)]).unwrap();
        let s = net.stats();
        assert_eq!(s.depth, 2);
        assert_eq!(s.max_width, 2);
        assert_eq!(s.neuron_count, 4);
        assert_eq!(s.weight_nonzeros, 4);
    }
}
