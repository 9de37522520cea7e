//! Copy-count schedules `M_t`.

use crate::error::{Error, Result};

/// Geometric schedule with `steps` batches doubling in size and summing to `total`.
///
/// Batch sizes are apportioned by largest remainder and every batch gets at
/// least one copy, so `total >= steps` is required.
pub fn geometric(total: u64, steps: usize) -> Result<Vec<u64>> {
    if steps == 0 {
        return Err(Error::InvalidConfig("schedule needs at least one step".into()));
    }
    if total < steps as u64 {
        return Err(Error::InvalidConfig(format!(
            "total copies {total} smaller than step count {steps}"
        )));
    }
    let free = total - steps as u64;
    let denom: f64 = (0..steps).map(|t| 2f64.powi(t as i32)).sum();
    let shares: Vec<f64> = (0..steps)
        .map(|t| free as f64 * 2f64.powi(t as i32) / denom)
        .collect();
    let mut out: Vec<u64> = shares.iter().map(|s| s.floor() as u64).collect();
    let mut left = free - out.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..steps).collect();
    order.sort_by(|&a, &b| {
        let ra = shares[a] - shares[a].floor();
        let rb = shares[b] - shares[b].floor();
        rb.total_cmp(&ra).then(b.cmp(&a))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    Ok(out.into_iter().map(|m| m + 1).collect())
}

/// Doubling schedule `start, 2 start, 4 start, ...`.
pub fn doubling(start: u64, steps: usize) -> Vec<u64> {
    (0..steps).map(|t| start << t).collect()
}

/// Copies measured up to and including each step.
pub fn cumulative(schedule: &[u64]) -> Vec<u64> {
    schedule
        .iter()
        .scan(0u64, |acc, &m| {
            *acc += m;
            Some(*acc)
        })
        .collect()
}
