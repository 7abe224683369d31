use super::EvalError;

/// Unbiased pass@k estimate for one problem with `n` samples of which `c`
/// are correct: `1 - C(n-c, k) / C(n, k)`.
///
/// Evaluated as `1 - prod_{i=n-c+1..=n} (1 - k/i)` so large `n` never
/// overflows a binomial. For `k = 1` the estimate is exactly `c / n`.
pub fn pass_at_k(n: usize, c: usize, k: usize) -> Result<f64, EvalError> {
    if k < 1 || k > n {
        return Err(EvalError::KOutOfRange { n, k });
    }
    if c > n {
        return Err(EvalError::COutOfRange { n, c });
    }
    if n - c < k {
        return Ok(1.0);
    }
    if k == 1 {
        return Ok(c as f64 / n as f64);
    }
    let k = k as f64;
    let survive: f64 = (n - c + 1..=n).map(|i| 1.0 - k / i as f64).product();
    Ok(1.0 - survive)
}

/// Mean pass@k over problems, each given as `(task_id, n, c)`.
pub fn aggregate_pass_at_k<'a>(
    results: impl IntoIterator<Item = (&'a str, usize, usize)>,
    k: usize,
) -> Result<f64, EvalError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (task_id, n, c) in results {
        if n < k {
            return Err(EvalError::TooFewSamples {
                task_id: task_id.to_string(),
                n,
                k,
            });
        }
        sum += pass_at_k(n, c, k)?;
        count += 1;
    }
    if count == 0 {
        return Err(EvalError::EmptyResults);
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_circuit_when_every_k_subset_has_a_pass() {
        assert_eq!(pass_at_k(5, 3, 4).unwrap(), 1.0);
        assert_eq!(pass_at_k(1, 1, 1).unwrap(), 1.0);
    }

    #[test]
    fn enumerated_values() {
        // 3 of 10 singletons pass
        assert_eq!(pass_at_k(10, 3, 1).unwrap(), 0.3);
        // 21 of the 252 5-subsets of 10 avoid all 3 correct samples
        assert!((pass_at_k(10, 3, 5).unwrap() - 0.9166666666666666).abs() <= 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(pass_at_k(3, 1, 4), Err(EvalError::KOutOfRange { .. })));
        assert!(matches!(pass_at_k(3, 1, 0), Err(EvalError::KOutOfRange { .. })));
        assert!(matches!(pass_at_k(3, 5, 1), Err(EvalError::COutOfRange { .. })));
    }

    #[test]
    fn aggregate_examples() {
        let rows = [("a", 2, 1), ("b", 2, 0), ("c", 2, 2)];
        assert_eq!(aggregate_pass_at_k(rows, 1).unwrap(), 0.5);
        assert_eq!(aggregate_pass_at_k([("a", 3, 3), ("b", 1, 1)], 1).unwrap(), 1.0);
        assert_eq!(aggregate_pass_at_k([("a", 3, 0), ("b", 1, 0)], 1).unwrap(), 0.0);
        assert!(matches!(aggregate_pass_at_k([], 1), Err(EvalError::EmptyResults)));
        match aggregate_pass_at_k([("ok", 5, 1), ("short", 1, 0)], 2) {
            Err(EvalError::TooFewSamples { task_id, .. }) => assert_eq!(task_id, "short"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn differs_from_biased_power_approximation() {
        let unbiased = pass_at_k(10, 3, 5).unwrap();
        let biased = 1.0 - (1.0 - 0.3f64).powi(5);
        assert!((unbiased - biased).abs() > 0.05);
    }

    #[test]
    fn large_n_stays_finite() {
        let value = pass_at_k(100_000, 50_000, 1_000).unwrap();
        assert!(value.is_finite() && (0.0..=1.0).contains(&value));
    }
}
