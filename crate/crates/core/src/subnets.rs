//! Primitive building blocks: identity lanes, constants and affine maps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{sequential, Activation, GraphError, Layer, NetworkGraph};

#[derive(Debug, Error)]
pub enum SubnetError {
    #[error("cannot pad a depth-{depth} network to depth {target}")]
    PadTarget { depth: usize, target: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// How a value is carried unchanged through a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PassthroughMode {
    /// One `LI` neuron per value.
    #[default]
    Linear,
    /// Two `ReLU` neurons per value holding `ReLU(x)` and `ReLU(-x)`; the
    /// consumer reads `x` back with weights `(+w, -w)`. Both halves are
    /// computed without rounding, so the pair is lossless.
    ReluPair,
}

impl PassthroughMode {
    /// Neurons used to carry one value.
    pub fn lane_width(self) -> usize {
        match self {
            PassthroughMode::Linear => 1,
            PassthroughMode::ReluPair => 2,
        }
    }
}

/// How `constant_subnet` produces its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantMode {
    /// A single `CO` neuron scaled by the value.
    Constant,
    /// `HS(x) + HS(-x)` scaled by the value. Both Heaviside neurons fire at
    /// `x = 0`, so this variant returns twice the value there.
    HeavisidePair,
}

fn unit_rows(dim: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|k| {
            let mut row = vec![0.0; dim];
            row[k] = scale;
            row
        })
        .collect()
}

/// `dim` values in, the same `dim` values out, through `depth` layers.
///
/// In `ReluPair` mode every layer but the last holds `(ReLU(x), ReLU(-x))`
/// pairs and the last recombines them with a linear layer; a depth-1
/// identity is therefore a single linear layer in either mode.
pub fn identity_subnet(dim: usize, depth: usize, mode: PassthroughMode) -> NetworkGraph {
    assert!(
        dim >= 1 && depth >= 1,
        "identity_subnet needs dim, depth >= 1"
    );
    let layers = match mode {
        PassthroughMode::Linear => (0..depth)
            .map(|_| Layer::uniform(unit_rows(dim, 1.0), vec![0.0; dim], Activation::Linear))
            .collect(),
        PassthroughMode::ReluPair => {
            let mut layers = Vec::with_capacity(depth);
            let mut paired = false;
            for l in 0..depth {
                let last = l + 1 == depth;
                let mut rows = Vec::new();
                for k in 0..dim {
                    // read value k back out of the previous layer
                    let read = |sign: f64| {
                        if paired {
                            let mut r = vec![0.0; 2 * dim];
                            r[2 * k] = sign;
                            r[2 * k + 1] = -sign;
                            r
                        } else {
                            let mut r = vec![0.0; dim];
                            r[k] = sign;
                            r
                        }
                    };
                    rows.push(read(1.0));
                    if !last {
                        rows.push(read(-1.0));
                    }
                }
                let width = rows.len();
                let act = if last {
                    Activation::Linear
                } else {
                    Activation::Relu
                };
                layers.push(Layer::uniform(rows, vec![0.0; width], act));
                paired = !last;
            }
            layers
        }
    };
    NetworkGraph::new(dim, layers).expect("identity layers are well formed")
}

/// A one-input network whose output is `value` for every input.
pub fn constant_subnet(value: f64, mode: ConstantMode) -> Result<NetworkGraph, SubnetError> {
    let hidden = match mode {
        ConstantMode::Constant => Layer::uniform(vec![vec![0.0]], vec![0.0], Activation::Constant),
        ConstantMode::HeavisidePair => Layer::uniform(
            vec![vec![1.0], vec![-1.0]],
            vec![0.0, 0.0],
            Activation::Heaviside,
        ),
    };
    let scale = Layer::uniform(
        vec![vec![value; hidden.width()]],
        vec![0.0],
        Activation::Linear,
    );
    Ok(NetworkGraph::new(1, vec![hidden, scale])?)
}

/// Single linear layer computing `W x + b`.
pub fn affine_subnet(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<NetworkGraph, SubnetError> {
    let input_dim = weights.first().map_or(0, Vec::len);
    Ok(NetworkGraph::new(
        input_dim,
        vec![Layer::uniform(weights, bias, Activation::Linear)],
    )?)
}

/// Appends identity layers so that `depth(result) == target_depth`.
pub fn pad_to_depth(
    net: &NetworkGraph,
    target_depth: usize,
    mode: PassthroughMode,
) -> Result<NetworkGraph, SubnetError> {
    let depth = net.depth();
    if target_depth < depth || target_depth == 0 {
        return Err(SubnetError::PadTarget {
            depth,
            target: target_depth,
        });
    }
    if target_depth == depth {
        return Ok(net.clone());
    }
    let tail = identity_subnet(net.output_dim(), target_depth - depth, mode);
    Ok(sequential(net, &tail)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parallel;

    #[test]
    fn identity_examples() {
        let net = identity_subnet(1, 1, PassthroughMode::Linear);
        assert_eq!(net.eval(&[7.25]).unwrap(), vec![7.25]);

        let net = identity_subnet(1, 3, PassthroughMode::ReluPair);
        assert_eq!(net.depth(), 3);
        let out = net.eval(&[-1e300]).unwrap();
        assert_eq!(out[0].to_bits(), (-1e300f64).to_bits());

        let net = identity_subnet(2, 2, PassthroughMode::ReluPair);
        assert_eq!(net.eval(&[0.0, -0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn relu_pair_layers_hold_pairs() {
        let net = identity_subnet(3, 4, PassthroughMode::ReluPair);
        let widths: Vec<_> = net.layers().iter().map(Layer::width).collect();
        assert_eq!(widths, vec![6, 6, 6, 3]);
        assert!(net.layers()[..3]
            .iter()
            .all(|l| l.activations.iter().all(|&a| a == Activation::Relu)));
    }

    #[test]
    fn constants() {
        let one = constant_subnet(1.0, ConstantMode::Constant).unwrap();
        assert_eq!(one.eval(&[123.0]).unwrap(), vec![1.0]);
        let neg = constant_subnet(-2.5, ConstantMode::Constant).unwrap();
        assert_eq!(neg.eval(&[0.0]).unwrap(), vec![-2.5]);
        assert_eq!(neg.eval(&[f64::MAX]).unwrap(), vec![-2.5]);

        let hs = constant_subnet(1.0, ConstantMode::HeavisidePair).unwrap();
        assert_eq!(hs.eval(&[0.0]).unwrap(), vec![2.0]);
        assert_eq!(hs.eval(&[3.0]).unwrap(), vec![1.0]);
        assert_eq!(hs.eval(&[-3.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn constant_beside_identity() {
        let c = constant_subnet(1.0, ConstantMode::Constant).unwrap();
        let id = identity_subnet(1, c.depth(), PassthroughMode::Linear);
        let p = parallel(&c, &id).unwrap();
        // constant reads the first input, identity the second
        assert_eq!(p.eval(&[0.0, 9.0]).unwrap(), vec![1.0, 9.0]);
    }

    #[test]
    fn affine_examples() {
        let id = affine_subnet(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap();
        assert_eq!(id.eval(&[3.5, -2.0]).unwrap(), vec![3.5, -2.0]);
        let rot = affine_subnet(vec![vec![0.0, 1.0], vec![-1.0, 0.0]], vec![0.0, 0.0]).unwrap();
        assert_eq!(rot.eval(&[1.0, 0.0]).unwrap(), vec![0.0, -1.0]);
        let half = affine_subnet(vec![vec![0.5]], vec![1.0]).unwrap();
        assert_eq!(half.eval(&[4.0]).unwrap(), vec![3.0]);
        assert!(affine_subnet(vec![vec![1.0, 2.0]], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn padding() {
        let net = affine_subnet(vec![vec![0.5, 2.0]], vec![1.0]).unwrap();
        assert_eq!(pad_to_depth(&net, 1, PassthroughMode::Linear).unwrap(), net);
        let padded = pad_to_depth(&net, 3, PassthroughMode::ReluPair).unwrap();
        assert_eq!(padded.depth(), 3);
        assert_eq!(
            padded.eval(&[2.0, -3.0]).unwrap(),
            net.eval(&[2.0, -3.0]).unwrap()
        );
        assert!(matches!(
            pad_to_depth(&net, 0, PassthroughMode::Linear),
            Err(SubnetError::PadTarget {
                depth: 1,
                target: 0
            })
        ));
    }
}
