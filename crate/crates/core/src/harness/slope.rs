//! Log-log slope fits and numeric formatting for trace files.

use super::HarnessError;

/// Powers of two in `[lo, hi]`.
pub fn dyadic_checkpoints(lo: usize, hi: usize) -> Vec<usize> {
    (0..usize::BITS)
        .map(|k| 1usize << k)
        .take_while(|&t| t <= hi)
        .filter(|&t| t >= lo.max(1))
        .collect()
}

/// Least-squares slope of `ln cum[t - 1]` against `ln t` over the dyadic
/// checkpoints in `[t_lo, t_hi]`. `cum[t - 1]` is the cumulative regret after
/// round `t`.
pub fn fit_slope(cum: &[f64], t_lo: usize, t_hi: usize) -> Result<f64, HarnessError> {
    if t_lo < 1 || t_hi <= t_lo {
        return Err(HarnessError::DegenerateTrace(format!("empty window [{t_lo}, {t_hi}]")));
    }
    if t_hi > cum.len() {
        return Err(HarnessError::DegenerateTrace(format!(
            "window ends at {t_hi} but the trace has {} rounds",
            cum.len()
        )));
    }
    let ts = dyadic_checkpoints(t_lo, t_hi);
    if ts.len() < 2 {
        return Err(HarnessError::DegenerateTrace(format!(
            "fewer than two dyadic checkpoints in [{t_lo}, {t_hi}]"
        )));
    }
    let mut points = Vec::with_capacity(ts.len());
    for &t in &ts {
        let r = cum[t - 1];
        if !(r > 0.0 && r.is_finite()) {
            return Err(HarnessError::DegenerateTrace(format!("cumulative regret {r} at t = {t}")));
        }
        points.push(((t as f64).ln(), r.ln()));
    }
    Ok(ols_slope(&points))
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Six significant digits, printed without an exponent. Parsing the string
/// back gives the value that summaries aggregate.
pub fn fmt_sig6(x: f64) -> String {
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        // Normalizes -0.
        return "0".to_string();
    }
    format!("{rounded}")
}

/// The value a [`fmt_sig6`] string denotes.
pub fn sig6(x: f64) -> f64 {
    fmt_sig6(x).parse().expect("formatted float parses")
}
