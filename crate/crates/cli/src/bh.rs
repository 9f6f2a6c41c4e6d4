//! Benjamini–Hochberg step-up procedure.

use crate::CliError;

/// Step-up FDR control at level `q`: sort the p-values ascending, find the
/// largest k with p_(k) <= k·q/m, and reject the k smallest. Adjusted
/// p-values are the running minimum from the top of m·p_(k)/k, capped at 1.
/// Returns (rejection mask, adjusted p-values) in the input order.
pub fn bh_adjust(pvalues: &[f64], q: f64) -> Result<(Vec<bool>, Vec<f64>), CliError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(CliError::Config(format!("FDR level must lie in (0,1), got {q}")));
    }
    for &p in pvalues {
        if !(0.0..=1.0).contains(&p) {
            return Err(CliError::Data(format!("p-value {p} outside [0,1]")));
        }
    }
    let m = pvalues.len();
    if m == 0 {
        return Ok((Vec::new(), Vec::new()));
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].partial_cmp(&pvalues[b]).unwrap());

    // Largest k with p_(k) <= k q / m.
    let mut threshold_rank = 0;
    for (rank, &idx) in order.iter().enumerate() {
        let k = rank + 1;
        if pvalues[idx] <= k as f64 * q / m as f64 {
            threshold_rank = k;
        }
    }

    let mut reject = vec![false; m];
    for &idx in order.iter().take(threshold_rank) {
        reject[idx] = true;
    }

    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &idx) in order.iter().enumerate().rev() {
        let k = rank + 1;
        running = running.min(m as f64 * pvalues[idx] / k as f64).min(1.0);
        adjusted[idx] = running;
    }

    Ok((reject, adjusted))
}
