use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::analysis::{rational_from_f64, AnalysisParams};
use crate::primitives::BchSpec;

use super::QotError;

/// How Bob evens out the matched and mismatched untested rounds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionPolicy {
    /// Keep the lowest `n_code` indices of the longer side; fill the shorter
    /// side with the longer side's surplus in ascending order.
    #[default]
    Pad,
    /// Abort unless both sides already hold `n_code` indices.
    Strict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    /// Message length in bits.
    pub lambda: usize,
    /// Retained detected signal rounds.
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    /// BCH code length, 2^m - 1.
    pub n_code: usize,
    pub t_corr: usize,
    /// Fixed click-ratio tolerance. `None` derives one per class from the
    /// class pulse count and `delta`.
    pub epsilon: Option<f64>,
    pub delta: f64,
    pub total_pulses: usize,
    pub partition: PartitionPolicy,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            lambda: 256,
            n: 2044,
            alpha: 0.5,
            beta: 0.95,
            n_code: 511,
            t_corr: 30,
            epsilon: None,
            delta: 1e-3,
            total_pulses: 100_000,
            partition: PartitionPolicy::Pad,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), QotError> {
        self.validate_shape()?;
        self.bch()?;
        Ok(())
    }

    /// All checks except that the BCH code can be built.
    pub fn validate_shape(&self) -> Result<(), QotError> {
        let bad = |m: String| Err(QotError::Params(m));
        if self.lambda == 0 {
            return bad("lambda must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} outside (0, 1)", self.alpha));
        }
        if !(self.beta > 0.5 && self.beta < 1.0) {
            return bad(format!("beta = {} outside (1/2, 1)", self.beta));
        }
        let an = rational_from_f64(self.alpha) * num_rational::BigRational::from_integer(self.n.into());
        if !an.is_integer() {
            return bad(format!("alpha * n = {an} is not an integer"));
        }
        if self.remaining() < 2 * self.n_code {
            return bad(format!(
                "n - alpha*n = {} is below 2 * n_code = {}",
                self.remaining(),
                2 * self.n_code
            ));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta = {} outside (0, 1]", self.delta));
        }
        if let Some(e) = self.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return bad(format!("epsilon = {e} must be a non-negative number"));
            }
        }
        if self.total_pulses < self.n {
            return bad(format!("total_pulses = {} below n = {}", self.total_pulses, self.n));
        }
        if self.total_pulses > u32::MAX as usize {
            return bad("total_pulses exceeds the u32 wire range".into());
        }
        Ok(())
    }

    /// The BCH code fixed by `n_code` and `t_corr`.
    pub fn bch(&self) -> Result<BchSpec, QotError> {
        let m = (self.n_code + 1).trailing_zeros();
        if self.n_code + 1 != 1 << m {
            return Err(QotError::Params(format!("n_code = {} is not 2^m - 1", self.n_code)));
        }
        BchSpec::new(m, self.t_corr).map_err(|e| QotError::Params(e.to_string()))
    }

    pub fn test_size(&self) -> usize {
        (rational_from_f64(self.alpha) * num_rational::BigRational::from_integer(self.n.into()))
            .floor()
            .to_integer()
            .to_usize()
            .unwrap_or(0)
    }

    pub fn remaining(&self) -> usize {
        self.n.saturating_sub(self.test_size())
    }

    /// Matching parameters for the closed-form analysis.
    pub fn analysis(&self, p_e: f64) -> AnalysisParams {
        AnalysisParams {
            lambda: self.lambda as u64,
            n: self.n as u64,
            alpha: rational_from_f64(self.alpha),
            beta: rational_from_f64(self.beta),
            n_code: self.n_code as u64,
            t_corr: self.t_corr as u64,
            p_e: rational_from_f64(p_e),
            s1: 0,
            s2: 0,
            n_pulses: self.total_pulses as u64,
            delta: self.delta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let p = ProtocolParams::default();
        p.validate().unwrap();
        assert_eq!(p.test_size(), 1022);
        assert_eq!(p.bch().unwrap().k_msg, 259);
    }

    #[test]
    fn invariants_enforced() {
        let base = ProtocolParams::default();
        for p in [
            ProtocolParams { beta: 0.5, ..base.clone() },
            ProtocolParams { beta: 1.0, ..base.clone() },
            ProtocolParams { alpha: 0.0, ..base.clone() },
            ProtocolParams { n: 2043, ..base.clone() },
            ProtocolParams { n: 2040, ..base.clone() },
            ProtocolParams { n_code: 500, ..base.clone() },
            ProtocolParams { total_pulses: 100, ..base.clone() },
        ] {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn json_roundtrip_with_defaults() {
        let p: ProtocolParams = serde_json::from_str(r#"{"n": 2400, "partition": "strict"}"#).unwrap();
        assert_eq!(p.n, 2400);
        assert_eq!(p.partition, PartitionPolicy::Strict);
        assert_eq!(p.lambda, 256);
        assert!(serde_json::from_str::<ProtocolParams>(r#"{"bogus": 1}"#).is_err());
    }
}
