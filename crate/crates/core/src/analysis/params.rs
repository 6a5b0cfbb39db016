use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use super::exact::rational_from_f64;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("alpha * n = {0} is not an integer")]
    FractionalTestSize(String),
    #[error("{name} = {value} outside [0, 1]")]
    OutOfRange { name: &'static str, value: String },
    #[error("need n - alpha*n >= N, got {remaining} < {n_code}")]
    TooFewRemaining { remaining: u64, n_code: u64 },
    #[error("need t < N, got t = {t} with N = {n_code}")]
    BadCorrection { t: u64, n_code: u64 },
    #[error("integer parameter {0} must be positive")]
    NonPositive(&'static str),
    #[error("delta must satisfy 0 < delta <= 1, got {0}")]
    BadDelta(f64),
}

/// Inputs to the closed-form expressions. `alpha`, `beta` and `p_e` are
/// exact rationals; `from_f64` style constructors convert decimal inputs to
/// their shortest fraction.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisParams {
    pub lambda: u64,
    pub n: u64,
    pub alpha: BigRational,
    pub beta: BigRational,
    pub n_code: u64,
    pub t_corr: u64,
    pub p_e: BigRational,
    pub s1: u64,
    pub s2: u64,
    pub n_pulses: u64,
    pub delta: f64,
}

impl AnalysisParams {
    /// Reference parameter set: lambda=256, n=2044, alpha=1/2, beta=0.95,
    /// N=511, t=30, at p_e = 0.
    pub fn reference() -> Self {
        AnalysisParams {
            lambda: 256,
            n: 2044,
            alpha: ratio(1, 2),
            beta: ratio(19, 20),
            n_code: 511,
            t_corr: 30,
            p_e: BigRational::zero(),
            s1: 0,
            s2: 0,
            n_pulses: 1_000_000,
            delta: 1e-3,
        }
    }

    /// Small instance with explicit rationals, for tests and oracles.
    pub fn toy(n: u64, alpha: BigRational, beta: BigRational, n_code: u64, t_corr: u64) -> Self {
        AnalysisParams {
            lambda: 1,
            n,
            alpha,
            beta,
            n_code,
            t_corr,
            p_e: BigRational::zero(),
            s1: 0,
            s2: 0,
            n_pulses: 1,
            delta: 1.0,
        }
    }

    pub fn with_p_e(mut self, p_e: BigRational) -> Self {
        self.p_e = p_e;
        self
    }

    pub fn with_p_e_f64(self, p_e: f64) -> Self {
        self.with_p_e(rational_from_f64(p_e))
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        for (name, v) in [("lambda", self.lambda), ("n", self.n), ("N", self.n_code), ("N_pulses", self.n_pulses)] {
            if v == 0 {
                return Err(AnalysisError::NonPositive(name));
            }
        }
        for (name, v) in [("alpha", &self.alpha), ("beta", &self.beta), ("p_e", &self.p_e)] {
            if v.is_negative() || *v > BigRational::one() {
                return Err(AnalysisError::OutOfRange { name, value: v.to_string() });
            }
        }
        let an = &self.alpha * BigRational::from_integer(BigInt::from(self.n));
        if !an.is_integer() {
            return Err(AnalysisError::FractionalTestSize(an.to_string()));
        }
        if self.t_corr >= self.n_code {
            return Err(AnalysisError::BadCorrection { t: self.t_corr, n_code: self.n_code });
        }
        let remaining = self.remaining();
        if remaining < self.n_code {
            return Err(AnalysisError::TooFewRemaining { remaining, n_code: self.n_code });
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(AnalysisError::BadDelta(self.delta));
        }
        Ok(())
    }

    pub(crate) fn checked(&self) -> &Self {
        if let Err(e) = self.validate() {
            panic!("invalid analysis parameters: {e}");
        }
        self
    }

    /// Test-set size alpha * n.
    pub fn test_size(&self) -> u64 {
        (&self.alpha * BigRational::from_integer(BigInt::from(self.n)))
            .floor()
            .to_integer()
            .to_u64()
            .expect("test size fits in u64")
    }

    /// Rounds left after the test, n - alpha * n.
    pub fn remaining(&self) -> u64 {
        self.n.saturating_sub(self.test_size())
    }

    /// beta * alpha * n as an exact rational.
    pub fn pass_threshold(&self) -> BigRational {
        &self.beta * BigRational::from_integer(BigInt::from(self.test_size()))
    }

    /// 2(N - t): matched-bit count Bob needs on both sides.
    pub fn cheat_target(&self) -> u64 {
        2 * (self.n_code - self.t_corr)
    }
}

pub(crate) fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}
