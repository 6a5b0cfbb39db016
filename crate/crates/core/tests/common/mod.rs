#![allow(dead_code)]

pub mod oracles;

use qotmpc::analysis::AnalysisParams;

pub fn params_for(toy: &oracles::Toy, alpha: &num_rational::BigRational) -> AnalysisParams {
    AnalysisParams::toy(toy.n, alpha.clone(), toy.beta.clone(), toy.n_code, toy.t)
}
