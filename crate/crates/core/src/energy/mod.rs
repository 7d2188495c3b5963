//! Vertex-wise unary energies from projected votes, Potts edge energies over
//! the mesh graph, and their minimization by alpha-expansion.

mod expansion;
pub mod maxflow;
mod unary;

pub use expansion::{
    alpha_expansion, energy_of, expansion_move, trace_csv, write_trace_csv, EnergyProblem, ExpansionOptions,
    ExpansionResult, TraceEntry,
};
pub use unary::{accumulate_unary, argmin_labels, normalize_unary, view_unary, UnaryTable, ViewVotes};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights of the vote sources and the smoothness term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    /// Parser term.
    pub lambda_p: f64,
    /// Flow-transfer term.
    pub lambda_o: f64,
    /// Mask term.
    pub lambda_s: f64,
    /// Flow votes relative to parser votes inside a mask score.
    pub lambda_po: f64,
    /// Potts penalty per cut edge.
    pub lambda_b: f64,
    /// Per-pixel weight of manual corrections.
    pub w_man: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        FusionWeights {
            lambda_p: 0.5,
            lambda_o: 0.5,
            lambda_s: 1.0,
            lambda_po: 1.5,
            lambda_b: 1.0,
            w_man: 10.0,
        }
    }
}

impl FusionWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("lambda_p", self.lambda_p),
            ("lambda_o", self.lambda_o),
            ("lambda_s", self.lambda_s),
            ("lambda_po", self.lambda_po),
            ("lambda_b", self.lambda_b),
            ("w_man", self.w_man),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidWeights(format!("{name} = {v}")));
            }
        }
        if self.w_man <= 0.0 {
            return Err(Error::InvalidWeights("w_man must be positive".into()));
        }
        Ok(())
    }

    /// Applies a `name=value` override. Accepts the field names and the short
    /// forms `p`, `o`, `s`, `po`, `b`, `man`.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match key.trim() {
            "lambda_p" | "p" => &mut self.lambda_p,
            "lambda_o" | "o" => &mut self.lambda_o,
            "lambda_s" | "s" => &mut self.lambda_s,
            "lambda_po" | "po" => &mut self.lambda_po,
            "lambda_b" | "b" => &mut self.lambda_b,
            "w_man" | "man" => &mut self.w_man,
            other => return Err(Error::InvalidWeights(format!("unknown weight {other:?}"))),
        };
        *slot = value;
        self.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let mut w = FusionWeights::default();
        assert_eq!(
            (w.lambda_p, w.lambda_o, w.lambda_po, w.lambda_s, w.lambda_b, w.w_man),
            (0.5, 0.5, 1.5, 1.0, 1.0, 10.0)
        );
        w.set("b", 2.0).unwrap();
        assert_eq!(w.lambda_b, 2.0);
        assert!(w.set("nope", 1.0).is_err());
        assert!(w.clone().set("p", -1.0).is_err());
        assert!(w.clone().set("man", 0.0).is_err());
    }
}
