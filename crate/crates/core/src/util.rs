//! Small numeric and RNG helpers shared across modules.

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance (divisor n-1). Exactly 0 for an all-equal slice, where
/// naive summation could otherwise round the mean by an ulp.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 || values.iter().all(|&v| v == values[0]) {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

/// Population variance (divisor n), with the same all-equal guard.
pub fn variance_pop(values: &[f64]) -> f64 {
    if values.is_empty() || values.iter().all(|&v| v == values[0]) {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

pub fn std_dev(values: &[f64]) -> f64 {
    variance(values).sqrt()
}

/// Sample lag-1 autocorrelation; `None` when the series has zero variance.
pub fn autocorr1(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let m = mean(values);
    let denom: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    if denom <= 0.0 {
        return None;
    }
    let num: f64 = (1..n).map(|t| (values[t] - m) * (values[t - 1] - m)).sum();
    Some(num / denom)
}

/// Percentile with linear interpolation between order statistics
/// (the convention used by report aggregation). `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&q));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// FNV-1a over bytes. Stable across platforms and releases, so per-job RNG
/// streams derived from (master seed, job key) stay reproducible.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Derive a per-job seed from a master seed and a stable job key.
pub fn derive_seed(master: u64, key: &str) -> u64 {
    let mut bytes = Vec::with_capacity(8 + key.len());
    bytes.extend_from_slice(&master.to_le_bytes());
    bytes.extend_from_slice(key.as_bytes());
    fnv1a64(&bytes)
}
