use std::collections::{BTreeMap, HashMap};

use num_rational::Ratio;

use super::{EvalError, PredictionRecord};
use crate::response::parse_response;
use crate::reward::{accuracy_reward, RewardConfig};
use crate::table::{TaskInstance, TaskKind};

fn check_counts(n: usize, c: usize, k: usize) -> Result<(), EvalError> {
    if c > n || k == 0 || k > n {
        return Err(EvalError::BadCounts { n, c, k });
    }
    Ok(())
}

/// Unbiased pass@k estimate `1 − C(n−c, k) / C(n, k)` from `n` samples of
/// which `c` are correct, via the product `1 − Π_{i=n−c+1..=n} (1 − k/i)`.
pub fn pass_at_k(n: usize, c: usize, k: usize) -> Result<f64, EvalError> {
    check_counts(n, c, k)?;
    if n - c < k {
        return Ok(1.0);
    }
    let miss: f64 = ((n - c + 1)..=n).map(|i| 1.0 - k as f64 / i as f64).product();
    Ok(1.0 - miss)
}

/// Exact rational value of [`pass_at_k`].
pub fn pass_at_k_exact(n: usize, c: usize, k: usize) -> Result<Ratio<u128>, EvalError> {
    check_counts(n, c, k)?;
    let one = Ratio::from_integer(1u128);
    if n - c < k {
        return Ok(one);
    }
    let miss = ((n - c + 1)..=n).fold(one, |acc, i| {
        acc * Ratio::new((i - k) as u128, i as u128)
    });
    Ok(one - miss)
}

/// Mean pass@k over TQA/TFV instances, for each requested `k`. A sample counts
/// as correct when its accuracy reward is exactly 1. Instances of other tasks
/// are ignored; with no eligible instances the map is empty.
pub fn pass_at_k_report(
    instances: &[TaskInstance],
    predictions: &[PredictionRecord],
    ks: &[usize],
    config: &RewardConfig,
) -> Result<BTreeMap<usize, f64>, EvalError> {
    let by_id: HashMap<&str, &TaskInstance> =
        instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let max_k = ks.iter().copied().max().unwrap_or(0);
    let mut counts = Vec::new();
    for rec in predictions {
        let inst = by_id
            .get(rec.instance_id.as_str())
            .ok_or_else(|| EvalError::UnknownInstance(rec.instance_id.clone()))?;
        if !matches!(inst.task, TaskKind::Tqa | TaskKind::Tfv) {
            continue;
        }
        let n = rec.responses.len();
        if n < max_k {
            return Err(EvalError::InsufficientSamples {
                id: rec.instance_id.clone(),
                n,
                k: max_k,
            });
        }
        let mut c = 0;
        for r in &rec.responses {
            let parsed = parse_response(r, inst.task);
            if accuracy_reward(&parsed, &inst.gold, inst.task, config)? == 1.0 {
                c += 1;
            }
        }
        counts.push((n, c));
    }
    let mut out = BTreeMap::new();
    if counts.is_empty() {
        return Ok(out);
    }
    for &k in ks {
        let mut sum = 0.0;
        for &(n, c) in &counts {
            sum += pass_at_k(n, c, k)?;
        }
        out.insert(k, sum / counts.len() as f64);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert!((pass_at_k(4, 2, 2).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(pass_at_k_exact(4, 2, 2).unwrap(), Ratio::new(5, 6));
        for k in 1..=5 {
            assert_eq!(pass_at_k(5, 0, k).unwrap(), 0.0);
        }
        assert_eq!(pass_at_k(6, 1, 6).unwrap(), 1.0);
        assert_eq!(pass_at_k(6, 0, 6).unwrap(), 0.0);
        assert!((pass_at_k(10, 3, 1).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn bad_counts() {
        assert!(matches!(pass_at_k(3, 4, 1), Err(EvalError::BadCounts { .. })));
        assert!(pass_at_k(3, 1, 0).is_err());
        assert!(pass_at_k(3, 1, 4).is_err());
    }

    #[test]
    fn monotone_on_small_lattice() {
        for n in 1..=32 {
            for c in 0..=n {
                let mut prev = 0.0;
                for k in 1..=n {
                    let v = pass_at_k(n, c, k).unwrap();
                    assert!((0.0..=1.0).contains(&v));
                    assert!(v >= prev - 1e-12, "n={n} c={c} k={k}");
                    if c > 0 {
                        assert!(v >= pass_at_k(n, c - 1, k).unwrap() - 1e-12);
                    }
                    prev = v;
                }
            }
        }
    }
}
