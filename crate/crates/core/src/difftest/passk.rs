//! pass@k: the probability that a k-sized sample of completions contains at
//! least one correct (here: plausible) solution, `1 - C(n-c,k)/C(n,k)`.

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PassKError {
    #[error("pass@k domain error: need 0 <= c <= n and 1 <= k <= n, got n={n} c={c} k={k}")]
    Domain { n: u64, c: u64, k: u64 },
}

/// C(n, k) in exact integer arithmetic; comfortably overflow-free for n <= 100.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc * u128::from(n - k + i) / u128::from(i);
    }
    acc
}

/// Exact-ratio evaluation `(C(n,k) - C(n-c,k)) / C(n,k)`, so results agree
/// bit-for-bit with direct subset enumeration.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, PassKError> {
    if c > n || k < 1 || k > n {
        return Err(PassKError::Domain { n, c, k });
    }
    let total = binomial(n, k);
    let miss = binomial(n - c, k);
    Ok((total - miss) as f64 / total as f64)
}

/// Mean pass@k across tests for each requested k.
pub fn pass_at_k_curve_counts(
    counts: &[(u64, u64)],
    ks: &[u64],
) -> Result<Vec<(u64, f64)>, PassKError> {
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut sum = 0.0;
        for &(n, c) in counts {
            sum += pass_at_k(n, c, k)?;
        }
        out.push((k, sum / counts.len() as f64));
    }
    Ok(out)
}
