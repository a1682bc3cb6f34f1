//! Linear layers and feed-forward stacks.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Glorot-uniform matrix in ±sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Tensor::new(vec![rows, cols], data).expect("positive dims")
}

/// y = W x + b with W stored [out, in].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LinearLayer {
    pub fn init(rng: &mut ChaCha8Rng, out_dim: usize, in_dim: usize) -> Self {
        LinearLayer {
            weight: glorot_uniform(rng, out_dim, in_dim, in_dim, out_dim),
            bias: Tensor::zeros(vec![out_dim]),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// Feed-forward stack: ReLU after every layer except the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Ffn {
    pub layers: Vec<LinearLayer>,
}

impl Ffn {
    /// Layer widths interpolate geometrically from `input` to `output`
    /// over `n_layers` weight layers.
    pub fn geometric_widths(input: usize, output: usize, n_layers: usize) -> Vec<usize> {
        assert!(n_layers >= 1 && input >= 1 && output >= 1);
        let ratio = (output as f64 / input as f64).powf(1.0 / n_layers as f64);
        let mut widths = Vec::with_capacity(n_layers + 1);
        widths.push(input);
        for i in 1..n_layers {
            let w = (input as f64 * ratio.powi(i as i32)).round() as usize;
            widths.push(w.max(1));
        }
        widths.push(output);
        widths
    }

    pub fn init(rng: &mut ChaCha8Rng, widths: &[usize]) -> Self {
        let layers = widths
            .windows(2)
            .map(|w| LinearLayer::init(rng, w[1], w[0]))
            .collect();
        Ffn { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim())
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    /// Check that consecutive layer dimensions chain.
    pub fn validate(&self) -> Result<()> {
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Dimension(format!(
                    "ffn layer {} outputs {} but layer {} expects {}",
                    i,
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(())
    }
}

/// Pure forward pass through a layer stack.
pub fn ffn_forward(x: &[f64], ffn: &Ffn) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let input = tape.leaf(Tensor::vector(x.to_vec()));
    let ids = insert_ffn_params(&mut tape, ffn);
    let out = ffn_on_tape(&mut tape, input, &ids)?;
    Ok(tape.value(out).data().to_vec())
}

/// Parameter node ids of one FFN inside a tape.
pub struct FfnNodeIds {
    pub layers: Vec<(NodeId, NodeId)>,
}

pub fn insert_ffn_params(tape: &mut Tape, ffn: &Ffn) -> FfnNodeIds {
    let layers = ffn
        .layers
        .iter()
        .map(|l| (tape.leaf(l.weight.clone()), tape.leaf(l.bias.clone())))
        .collect();
    FfnNodeIds { layers }
}

pub fn ffn_on_tape(tape: &mut Tape, input: NodeId, ids: &FfnNodeIds) -> Result<NodeId> {
    let mut x = input;
    let last = ids.layers.len() - 1;
    for (i, (w, b)) in ids.layers.iter().enumerate() {
        let wx = tape.matvec(*w, x)?;
        let z = tape.add(wx, *b)?;
        x = if i < last { tape.relu(z) } else { z };
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn identity_layer(n: usize) -> LinearLayer {
        let mut w = Tensor::zeros(vec![n, n]);
        for i in 0..n {
            w.set(i, i, 1.0);
        }
        LinearLayer {
            weight: w,
            bias: Tensor::zeros(vec![n]),
        }
    }

    #[test]
    fn identity_weights_pass_positive_input_through() {
        let ffn = Ffn {
            layers: vec![identity_layer(3), identity_layer(3)],
        };
        let y = ffn_forward(&[1.0, 2.0, 0.5], &ffn).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 0.5]);
    }

    #[test]
    fn zero_weights_output_bias() {
        let ffn = Ffn {
            layers: vec![LinearLayer {
                weight: Tensor::zeros(vec![2, 3]),
                bias: Tensor::vector(vec![0.25, -0.75]),
            }],
        };
        let y = ffn_forward(&[9.0, -3.0, 7.0], &ffn).unwrap();
        assert_eq!(y, vec![0.25, -0.75]);
    }

    #[test]
    fn two_layer_hand_computation() {
        // layer 1: W = [[1, 2], [0, -1]], b = [0.5, 0]; relu
        // layer 2: W = [[2, 1]], b = [-1]
        let ffn = Ffn {
            layers: vec![
                LinearLayer {
                    weight: Tensor::new(vec![2, 2], vec![1.0, 2.0, 0.0, -1.0]).unwrap(),
                    bias: Tensor::vector(vec![0.5, 0.0]),
                },
                LinearLayer {
                    weight: Tensor::new(vec![1, 2], vec![2.0, 1.0]).unwrap(),
                    bias: Tensor::vector(vec![-1.0]),
                },
            ],
        };
        // x = [1, -2]: z1 = [1 - 4 + 0.5, 2] = [-2.5, 2]; relu = [0, 2]
        // y = 2*0 + 1*2 - 1 = 1
        let y = ffn_forward(&[1.0, -2.0], &ffn).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let ffn = Ffn {
            layers: vec![identity_layer(3), identity_layer(2)],
        };
        assert!(ffn.validate().is_err());
        assert!(ffn_forward(&[1.0, 2.0, 3.0], &ffn).is_err());
    }

    #[test]
    fn geometric_widths_hit_both_ends() {
        assert_eq!(Ffn::geometric_widths(8, 3, 6), vec![8, 7, 6, 5, 4, 4, 3]);
        assert_eq!(Ffn::geometric_widths(8, 4, 3), vec![8, 6, 5, 4]);
        assert_eq!(Ffn::geometric_widths(16, 16, 6), vec![16; 7]);
        assert_eq!(Ffn::geometric_widths(420, 16, 6), vec![420, 244, 141, 82, 48, 28, 16]);
    }

    #[test]
    fn init_is_seed_deterministic() {
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let a = Ffn::init(&mut r1, &[4, 3, 2]);
        let b = Ffn::init(&mut r2, &[4, 3, 2]);
        assert_eq!(a, b);
        assert_eq!(a.param_count(), 4 * 3 + 3 + 3 * 2 + 2);
    }
}
