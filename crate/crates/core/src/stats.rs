//! Small summary statistics over completion rounds.

pub fn mean(xs: &[u64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<u64>() as f64 / xs.len() as f64)
}

/// Middle value; the average of the two middle values for even lengths.
pub fn median(xs: &[u64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_unstable();
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        (v[m - 1] + v[m]) as f64 / 2.0
    })
}

/// Nearest-rank quantile: the smallest value with at least `q` of the data
/// at or below it.
pub fn quantile(xs: &[u64], q: f64) -> Option<u64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_unstable();
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        assert_eq!(median(&[3, 1, 2]), Some(2.0));
        assert_eq!(median(&[4, 1, 2, 3]), Some(2.5));
        assert_eq!(median(&[]), None);
        assert_eq!(mean(&[1, 2, 6]), Some(3.0));
        let xs: Vec<u64> = (1..=10).collect();
        assert_eq!(quantile(&xs, 0.9), Some(9));
        assert_eq!(quantile(&xs, 0.1), Some(1));
        assert_eq!(quantile(&xs, 1.0), Some(10));
        assert_eq!(quantile(&xs, 0.0), Some(1));
    }
}
