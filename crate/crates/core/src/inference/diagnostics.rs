//! Convergence diagnostics for retained chains.

use super::InferenceError;

/// Monte Carlo standard error of the chain mean by the batch-means method.
///
/// The chain is cut into `floor(sqrt(n))` consecutive batches of equal
/// length (a trailing remainder is dropped); the MCSE estimate is the
/// standard deviation of the batch means scaled for the batch length.
/// Requires at least 100 draws.
pub fn batch_means_mcse(draws: &[f64]) -> Result<f64, InferenceError> {
    let n = draws.len();
    if n < 100 {
        return Err(InferenceError::ChainTooShort { got: n, need: 100 });
    }
    let n_batches = (n as f64).sqrt().floor() as usize;
    let batch_len = n / n_batches;
    let used = n_batches * batch_len;
    let grand_mean = draws[..used].iter().sum::<f64>() / used as f64;
    let mut ss = 0.0;
    for b in 0..n_batches {
        let batch = &draws[b * batch_len..(b + 1) * batch_len];
        let m = batch.iter().sum::<f64>() / batch_len as f64;
        ss += (m - grand_mean).powi(2);
    }
    let var_of_mean = batch_len as f64 * ss / ((n_batches - 1) as f64 * used as f64);
    Ok(var_of_mean.sqrt())
}

/// Kolmogorov-Smirnov statistic between the first and second halves of a
/// chain — the convergence screen applied per parameter: a large value
/// means the two halves sample visibly different distributions. Requires
/// at least 20 draws.
pub fn half_chain_ks(draws: &[f64]) -> Result<f64, InferenceError> {
    let n = draws.len();
    if n < 20 {
        return Err(InferenceError::ChainTooShort { got: n, need: 20 });
    }
    let half = n / 2;
    let mut a: Vec<f64> = draws[..half].to_vec();
    let mut b: Vec<f64> = draws[n - half..].to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup = 0.0f64;
    while i < half && j < half {
        // Step to the next distinct value and move both empirical CDFs past
        // it together, so ties never inflate the gap.
        let v = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < half && a[i] <= v {
            i += 1;
        }
        while j < half && b[j] <= v {
            j += 1;
        }
        let gap = (i as f64 - j as f64).abs() / half as f64;
        sup = sup.max(gap);
    }
    Ok(sup)
}
