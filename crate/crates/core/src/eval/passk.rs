use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PassAtKError {
    #[error("need 1 <= k <= n, got n={n} k={k}")]
    K { n: u64, k: u64 },
    #[error("correct count {c} exceeds sample count {n}")]
    Correct { n: u64, c: u64 },
}

/// Unbiased pass@k estimate `1 - C(n-c, k) / C(n, k)`.
///
/// Evaluated as `1 - prod_{i=n-c+1}^{n} (1 - k/i)`, which never forms a
/// binomial coefficient and so cannot overflow.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, PassAtKError> {
    if k == 0 || k > n {
        return Err(PassAtKError::K { n, k });
    }
    if c > n {
        return Err(PassAtKError::Correct { n, c });
    }
    if n - c < k {
        return Ok(1.0);
    }
    let kf = k as f64;
    let prod: f64 = (n - c + 1..=n).map(|i| 1.0 - kf / i as f64).product();
    Ok(1.0 - prod)
}
