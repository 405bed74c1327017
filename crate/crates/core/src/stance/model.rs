//! The two-plane ordinal model, its decision rule and its text file format.

use std::fmt::Write as _;

use super::{FeatureVector, StanceError, TrainParams};
use crate::ingest::Stance;

/// A linear separator `w·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl Plane {
    pub fn zero(dim: usize) -> Self {
        Plane {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn score(&self, v: &FeatureVector) -> f64 {
        v.dot(&self.weights) + self.bias
    }
}

/// Buy-vs-rest and Sell-vs-rest planes over one feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPlaneModel {
    pub dim: usize,
    pub buy: Plane,
    pub sell: Plane,
    pub params: TrainParams,
}

/// Signed scores of a vector against both planes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneScores {
    pub buy: f64,
    pub sell: f64,
}

/// The two-plane decision rule.
///
/// Only the buy plane positive gives Buy, only the sell plane positive gives
/// Sell, neither gives Hold. When both are positive the larger score wins and
/// an exact tie is Hold.
pub fn decide(buy_score: f64, sell_score: f64) -> Stance {
    match (buy_score > 0.0, sell_score > 0.0) {
        (true, false) => Stance::Buy,
        (false, true) => Stance::Sell,
        (false, false) => Stance::Hold,
        (true, true) => {
            if buy_score > sell_score {
                Stance::Buy
            } else if sell_score > buy_score {
                Stance::Sell
            } else {
                Stance::Hold
            }
        }
    }
}

impl TwoPlaneModel {
    pub fn scores(&self, v: &FeatureVector) -> Result<PlaneScores, StanceError> {
        if v.dim() != self.dim {
            return Err(StanceError::DimensionMismatch {
                expected: self.dim,
                found: v.dim(),
            });
        }
        Ok(PlaneScores {
            buy: self.buy.score(v),
            sell: self.sell.score(v),
        })
    }

    pub fn classify(&self, v: &FeatureVector) -> Result<Stance, StanceError> {
        let s = self.scores(v)?;
        Ok(decide(s.buy, s.sell))
    }

    /// Serializes into the `twoplane v1` text format. Floats use the shortest
    /// representation that parses back to the same bits; exact `+0.0`
    /// weights are omitted.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "twoplane v1 D={} lambda={} epochs={} seed={}",
            self.dim, self.params.lambda, self.params.epochs, self.params.seed
        )
        .unwrap();
        for (name, plane) in [("buy", &self.buy), ("sell", &self.sell)] {
            writeln!(out, "{name}_bias {}", plane.bias).unwrap();
            for (i, w) in plane.weights.iter().enumerate() {
                if w.to_bits() != 0 {
                    writeln!(out, "{name} {i} {w}").unwrap();
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, StanceError> {
        let err = |line: usize, reason: String| StanceError::ModelFormat { line, reason };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty model file".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("twoplane") || fields.next() != Some("v1") {
            return Err(err(1, format!("expected `twoplane v1` header, found {header:?}")));
        }
        let mut dim = None;
        let mut lambda = None;
        let mut epochs = None;
        let mut seed = None;
        for f in fields {
            let (k, v) = f
                .split_once('=')
                .ok_or_else(|| err(1, format!("bad header field {f:?}")))?;
            let bad = |e: &dyn std::fmt::Display| err(1, format!("bad value for {k}: {e}"));
            match k {
                "D" => dim = Some(v.parse::<usize>().map_err(|e| bad(&e))?),
                "lambda" => lambda = Some(v.parse::<f64>().map_err(|e| bad(&e))?),
                "epochs" => epochs = Some(v.parse::<usize>().map_err(|e| bad(&e))?),
                "seed" => seed = Some(v.parse::<u64>().map_err(|e| bad(&e))?),
                _ => return Err(err(1, format!("unknown header field {k:?}"))),
            }
        }
        let (Some(dim), Some(lambda), Some(epochs), Some(seed)) = (dim, lambda, epochs, seed) else {
            return Err(err(1, "header must carry D, lambda, epochs and seed".into()));
        };
        let mut buy = Plane::zero(dim);
        let mut sell = Plane::zero(dim);
        let mut seen_bias = [false, false];
        for (no, line) in lines {
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                [tag @ ("buy_bias" | "sell_bias"), value] => {
                    let b: f64 = value
                        .parse()
                        .map_err(|e| err(no, format!("bad bias {value:?}: {e}")))?;
                    let idx = usize::from(*tag == "sell_bias");
                    if seen_bias[idx] {
                        return Err(err(no, format!("duplicate {tag}")));
                    }
                    seen_bias[idx] = true;
                    if idx == 0 {
                        buy.bias = b;
                    } else {
                        sell.bias = b;
                    }
                }
                [tag @ ("buy" | "sell"), index, value] => {
                    let i: usize = index
                        .parse()
                        .map_err(|e| err(no, format!("bad index {index:?}: {e}")))?;
                    if i >= dim {
                        return Err(err(no, format!("index {i} out of range for D={dim}")));
                    }
                    let w: f64 = value
                        .parse()
                        .map_err(|e| err(no, format!("bad weight {value:?}: {e}")))?;
                    let plane = if *tag == "buy" { &mut buy } else { &mut sell };
                    plane.weights[i] = w;
                }
                _ => return Err(err(no, format!("unrecognized line {line:?}"))),
            }
        }
        if !(seen_bias[0] && seen_bias[1]) {
            return Err(err(0, "missing buy_bias or sell_bias".into()));
        }
        Ok(TwoPlaneModel {
            dim,
            buy,
            sell,
            params: TrainParams {
                lambda,
                epochs,
                seed,
            },
        })
    }
}
