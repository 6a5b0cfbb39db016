use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use super::exact::{rational_from_f64, ExactProb};
use super::float;
use super::formulas::{
    cheating_cost, epsilon_min, p_bypass, p_cheat, p_decode_failure, p_fcorrect, p_fpass, CheatingCost, S1Range,
};
use super::params::AnalysisParams;

/// Target for the honest-failure bound used by `max_p_e`.
pub const DEFAULT_FAILURE_BOUND: f64 = 2.3e-9;

#[derive(Clone, Debug, Serialize)]
pub struct InputEcho {
    pub lambda: u64,
    pub n: u64,
    pub alpha: String,
    pub beta: String,
    pub n_code: u64,
    pub t_corr: u64,
    pub p_e: String,
    pub s1: u64,
    pub s2: u64,
    pub n_pulses: u64,
    pub delta: f64,
    pub s1_range: S1Range,
}

#[derive(Clone, Debug, Serialize)]
pub struct FloatCheck {
    pub ln_p_fpass: f64,
    pub p_fcorrect: f64,
    pub ln_p_bypass: f64,
    pub ln_p_cheat: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundSearch {
    pub bound: f64,
    /// Largest p_e meeting the bound, or None when even p_e = 0 misses it.
    pub max_p_e: Option<f64>,
    pub failure_at_zero: ExactProb,
    /// Largest p_e for which P[Bin(N, p_e) > t] alone meets the bound.
    pub max_p_e_decode_only: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub inputs: InputEcho,
    pub epsilon: f64,
    pub p_fpass: ExactProb,
    pub p_fcorrect: ExactProb,
    pub p_failed: ExactProb,
    pub p_decode_failure: ExactProb,
    pub p_bypass: ExactProb,
    pub p_cheat: ExactProb,
    pub cost: CheatingCost,
    pub bound_search: Option<BoundSearch>,
    pub float_check: FloatCheck,
}

/// exact p_fpass + p_fcorrect.
pub fn p_failed(params: &AnalysisParams) -> ExactProb {
    ExactProb::new(p_fpass(params).add(&p_fcorrect(params)))
}

fn bisect_max<F: Fn(&BigRational) -> bool>(ok: F, hi: f64, iters: usize) -> Option<f64> {
    if !ok(&BigRational::zero()) {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, hi);
    if ok(&rational_from_f64(hi)) {
        return Some(hi);
    }
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if ok(&rational_from_f64(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Largest p_e in [0, 1/2] whose exact failure sum is at most `bound`, found
/// by bisection to about 1e-7.
pub fn max_p_e(params: &AnalysisParams, bound: f64) -> BoundSearch {
    let b = rational_from_f64(bound);
    let total = |pe: &BigRational| {
        let p = params.clone().with_p_e(pe.clone());
        p_fpass(&p).add(&p_fcorrect(&p)) <= b
    };
    let decode = |pe: &BigRational| {
        let p = params.clone().with_p_e(pe.clone());
        *p_decode_failure(&p).value() <= b
    };
    BoundSearch {
        bound,
        max_p_e: bisect_max(total, 0.5, 23),
        failure_at_zero: p_failed(&params.clone().with_p_e(BigRational::zero())),
        max_p_e_decode_only: bisect_max(decode, 0.5, 23),
    }
}

impl AnalysisReport {
    pub fn compute(params: &AnalysisParams, range: S1Range, bound: Option<f64>) -> Self {
        let p = params.checked();
        let fpass = p_fpass(p);
        let fcorrect = p_fcorrect(p);
        let failed = ExactProb::new(fpass.add(&fcorrect));
        let bypass = p_bypass(p, p.s1.min(p.n));
        let cheat = p_cheat(p, p.s1, p.s2);
        AnalysisReport {
            inputs: InputEcho {
                lambda: p.lambda,
                n: p.n,
                alpha: p.alpha.to_string(),
                beta: p.beta.to_string(),
                n_code: p.n_code,
                t_corr: p.t_corr,
                p_e: p.p_e.to_string(),
                s1: p.s1,
                s2: p.s2,
                n_pulses: p.n_pulses,
                delta: p.delta,
                s1_range: range,
            },
            epsilon: epsilon_min(p.n_pulses, p.delta).expect("validated"),
            p_decode_failure: p_decode_failure(p),
            float_check: FloatCheck {
                ln_p_fpass: float::ln_p_fpass(p),
                p_fcorrect: float::p_fcorrect(p),
                ln_p_bypass: float::ln_p_bypass(p, p.s1.min(p.n)),
                ln_p_cheat: float::ln_p_cheat(p, p.s1, p.s2),
            },
            p_fpass: fpass,
            p_fcorrect: fcorrect,
            p_failed: failed,
            p_bypass: bypass,
            p_cheat: cheat,
            cost: cheating_cost(p, range),
            bound_search: bound.map(|b| max_p_e(p, b)),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let i = &self.inputs;
        let mut s = String::new();
        let _ = writeln!(s, "inputs");
        let _ = writeln!(
            s,
            "  lambda={} n={} alpha={} beta={} N={} t={} p_e={}",
            i.lambda, i.n, i.alpha, i.beta, i.n_code, i.t_corr, i.p_e
        );
        let _ = writeln!(s, "  s1={} s2={} N_pulses={} delta={} s1_range={:?}", i.s1, i.s2, i.n_pulses, i.delta, i.s1_range);
        let _ = writeln!(s, "epsilon           {:.6e}", self.epsilon);
        let row = |s: &mut String, name: &str, p: &ExactProb| {
            let _ = writeln!(s, "{name:<17} {}  (log2 {:.6})", p.sci(), p.log2());
        };
        row(&mut s, "p_fpass", &self.p_fpass);
        row(&mut s, "p_fcorrect", &self.p_fcorrect);
        row(&mut s, "p_failed", &self.p_failed);
        row(&mut s, "p_decode_failure", &self.p_decode_failure);
        row(&mut s, &format!("p_bypass(s1={})", i.s1), &self.p_bypass);
        row(&mut s, &format!("p_cheat({},{})", i.s1, i.s2), &self.p_cheat);
        let _ = writeln!(
            s,
            "cheating cost     {}  (log2 {:.6}) at s1={} s2={} over {} cells",
            super::exact::scientific(&self.cost.cost, 12),
            self.cost.log2,
            self.cost.s1,
            self.cost.s2,
            self.cost.cells
        );
        if let Some(b) = &self.bound_search {
            let fmt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.6}"));
            let _ = writeln!(
                s,
                "max p_e for p_failed <= {:e}: {}  (p_failed at p_e=0: {}; decode-only limit {})",
                b.bound,
                fmt(b.max_p_e),
                b.failure_at_zero.sci(),
                fmt(b.max_p_e_decode_only)
            );
        }
        let f = &self.float_check;
        let _ = writeln!(
            s,
            "float check       ln p_fpass={:.10e} p_fcorrect={:.10e} ln p_bypass={:.10e} ln p_cheat={:.10e}",
            f.ln_p_fpass, f.p_fcorrect, f.ln_p_bypass, f.ln_p_cheat
        );
        s
    }

    pub fn cost_f64(&self) -> f64 {
        self.cost.cost.to_f64().unwrap_or(f64::INFINITY)
    }
}
