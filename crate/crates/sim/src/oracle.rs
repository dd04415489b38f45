//! Analytic acceptance rate of a three-verdict majority vote.

use crate::error::{Result, SimError};

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SimError::Input(format!("{name} = {p} is not a probability")))
    }
}

/// Probability that a translation is accepted when it is truly good with
/// probability `g` and each of three independent verdicts is right with
/// probability `q`. Computed by walking all eight verdict triples, then
/// compared with [`closed_form_acceptance_rate`].
pub fn expected_acceptance_rate(g: f64, q: f64) -> Result<f64> {
    check_probability("g", g)?;
    check_probability("q", q)?;
    let mut accepted = 0.0;
    for triple in 0u32..8 {
        let goods = triple.count_ones() as i32;
        if goods < 2 {
            continue;
        }
        let bads = 3 - goods;
        let if_good = q.powi(goods) * (1.0 - q).powi(bads);
        let if_bad = (1.0 - q).powi(goods) * q.powi(bads);
        accepted += g * if_good + (1.0 - g) * if_bad;
    }
    let closed = closed_form_acceptance_rate(g, q);
    if (accepted - closed).abs() > 1e-12 {
        return Err(SimError::Protocol(format!("enumeration {accepted} disagrees with closed form {closed}")));
    }
    Ok(accepted)
}

/// `g·M + (1−g)(1−M)` with `M = q³ + 3q²(1−q)`.
pub fn closed_form_acceptance_rate(g: f64, q: f64) -> f64 {
    let m = q.powi(3) + 3.0 * q * q * (1.0 - q);
    g * m + (1.0 - g) * (1.0 - m)
}

/// Binomial standard error of a rate `p` estimated from `n` trials.
pub fn standard_error(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}
