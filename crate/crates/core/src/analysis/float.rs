//! Log-domain double-precision evaluation of the same expressions, used only
//! as a cross-check on the exact path.

use num_traits::ToPrimitive;

use super::params::AnalysisParams;

pub struct LogTables {
    ln_fact: Vec<f64>,
}

impl LogTables {
    pub fn new(max: u64) -> Self {
        let mut ln_fact = Vec::with_capacity(max as usize + 1);
        let mut acc = 0.0f64;
        ln_fact.push(0.0);
        for i in 1..=max {
            acc += (i as f64).ln();
            ln_fact.push(acc);
        }
        LogTables { ln_fact }
    }

    pub fn ln_choose(&self, n: u64, k: u64) -> f64 {
        if k > n {
            return f64::NEG_INFINITY;
        }
        self.ln_fact[n as usize] - self.ln_fact[k as usize] - self.ln_fact[(n - k) as usize]
    }
}

/// ln(sum exp(x_i)).
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// k ln(x) with the convention 0 ln 0 = 0.
fn mul_ln(k: u64, ln_x: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * ln_x
    }
}

fn p_e_logs(p: &AnalysisParams) -> (f64, f64) {
    let pe = p.p_e.to_f64().unwrap();
    (pe.ln(), (1.0 - pe).ln())
}

fn tables(p: &AnalysisParams) -> LogTables {
    LogTables::new(p.n.max(p.n_code) + 1)
}

pub fn ln_p_fpass(p: &AnalysisParams) -> f64 {
    let lt = tables(p);
    let an = p.test_size();
    let hi = p.pass_threshold().floor().to_integer().to_i64().unwrap();
    if hi < 0 {
        return f64::NEG_INFINITY;
    }
    let (lp, lq) = p_e_logs(p);
    let terms: Vec<f64> = (0..=(hi as u64).min(an))
        .map(|i| lt.ln_choose(an, i) + mul_ln(an - i, lp) + mul_ln(i, lq))
        .collect();
    log_sum_exp(&terms)
}

/// The correctness failure, summed directly over the failing outcomes.
pub fn p_fcorrect(p: &AnalysisParams) -> f64 {
    let lt = tables(p);
    let r = p.remaining();
    let nn = p.n_code;
    let need = nn - p.t_corr;
    let (lp, lq) = p_e_logs(p);
    let ln2 = std::f64::consts::LN_2;
    let mut terms = Vec::new();
    let bad: Vec<f64> = (0..need)
        .map(|j| lt.ln_choose(nn, j) + mul_ln(nn - j, lp) + mul_ln(j, lq))
        .collect();
    let lbad = log_sum_exp(&bad);
    for i in (nn + 1)..=r {
        terms.push(lt.ln_choose(r, i) - r as f64 * ln2 + lbad);
    }
    for i in 0..=nn.min(r) {
        let pad = nn - i;
        for j in 0..=i {
            // fewer than need - j of the padded rounds come out right
            let k_hi = need.saturating_sub(j).min(pad + 1);
            if k_hi == 0 {
                continue;
            }
            let ks: Vec<f64> = (0..k_hi).map(|k| lt.ln_choose(pad, k)).collect();
            terms.push(
                lt.ln_choose(r, i) - r as f64 * ln2 + lt.ln_choose(i, j) + mul_ln(i - j, lp) + mul_ln(j, lq)
                    - pad as f64 * ln2
                    + log_sum_exp(&ks),
            );
        }
    }
    log_sum_exp(&terms).exp()
}

pub fn ln_p_bypass(p: &AnalysisParams, s1: u64) -> f64 {
    let lt = tables(p);
    let n = p.n;
    let an = p.test_size();
    let beta = p.beta.to_f64().unwrap();
    let thr = beta * an as f64;
    let ln2 = std::f64::consts::LN_2;
    let mut terms = Vec::new();
    for i in 0..=s1.min(an) {
        let base = lt.ln_choose(s1, i) + lt.ln_choose(n - s1, an - i);
        if base == f64::NEG_INFINITY {
            continue;
        }
        let pass = if (an - i) as f64 >= thr - 1e-9 {
            0.0
        } else {
            let lo = ((i as f64 - (1.0 - beta) * an as f64) - 1e-9).ceil().max(0.0) as u64;
            let js: Vec<f64> = (lo..=i).map(|j| lt.ln_choose(i, j)).collect();
            log_sum_exp(&js) - i as f64 * ln2
        };
        terms.push(base + pass);
    }
    log_sum_exp(&terms) - lt.ln_choose(n, an)
}

pub fn ln_p_cheat(p: &AnalysisParams, s1: u64, s2: u64) -> f64 {
    let d = p.cheat_target() as i64 - s1 as i64 - s2 as i64;
    if d <= 0 {
        return 0.0;
    }
    let lt = tables(p);
    let r = p.remaining();
    let terms: Vec<f64> = (d as u64..=r).map(|i| lt.ln_choose(r, i)).collect();
    log_sum_exp(&terms) - r as f64 * std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_basics() {
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        let lt = LogTables::new(10);
        assert!((lt.ln_choose(10, 3) - 120f64.ln()).abs() < 1e-12);
    }
}
