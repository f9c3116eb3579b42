//! Trace- and log-level analyses: unit correlations, task allocation,
//! throughput and colour allocation.

use serde::{Deserialize, Serialize};

use super::trace::HiddenTrace;
use crate::error::{Error, Result};
use crate::ppo::eval::EpisodeRecord;
use crate::stats::{self, Interval};

/// Half-width of the throughput window in steps.
pub const THROUGHPUT_HALF_WINDOW: usize = 25;

/// Minimum episodes for a unit-correlation table.
pub const MIN_CORRELATION_EPISODES: usize = 100;

/// Minimum episodes for an allocation slope.
pub const MIN_ALLOCATION_EPISODES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCorrelation {
    pub unit: usize,
    pub r: f64,
    /// The unit never varied across episodes; `r` is reported as 0.
    pub zero_variance: bool,
}

/// Mean of `h_1..=h_T` for every unit.
pub fn episode_mean(trace: &HiddenTrace) -> Vec<f64> {
    let d = trace.dim();
    let mut m = vec![0.0; d];
    for t in 1..=trace.horizon() {
        for (o, &h) in m.iter_mut().zip(trace.state(t)) {
            *o += h as f64;
        }
    }
    let k = 1.0 / trace.horizon().max(1) as f64;
    m.iter_mut().for_each(|v| *v *= k);
    m
}

/// Pearson correlation of each unit's episode-mean activation with `trait_fn`,
/// sorted by decreasing `|r|`.
pub fn per_unit_correlation<F>(traces: &[HiddenTrace], trait_fn: F) -> Result<Vec<UnitCorrelation>>
where
    F: Fn(&HiddenTrace) -> f64,
{
    if traces.len() < MIN_CORRELATION_EPISODES {
        return Err(Error::Analysis(format!("unit correlations need {MIN_CORRELATION_EPISODES} episodes, got {}", traces.len())));
    }
    let d = traces[0].dim();
    let means: Vec<Vec<f64>> = traces.iter().map(episode_mean).collect();
    let y: Vec<f64> = traces.iter().map(&trait_fn).collect();
    let mut out: Vec<UnitCorrelation> = (0..d)
        .map(|u| {
            let x: Vec<f64> = means.iter().map(|m| m[u]).collect();
            let zero = stats::variance(&x) <= 1e-24;
            let r = if zero { 0.0 } else { stats::pearson(&x, &y).unwrap_or(0.0) };
            UnitCorrelation { unit: u, r, zero_variance: zero }
        })
        .collect();
    out.sort_by(|a, b| b.r.abs().total_cmp(&a.r.abs()).then(a.unit.cmp(&b.unit)));
    Ok(out)
}

/// One episode's point for the allocation regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationPoint {
    /// How much faster the partner is at task 1 than task 2.
    pub advantage: f64,
    /// Fraction of steps the partner was assigned task 1.
    pub task1_fraction: f64,
}

pub fn allocation_points(records: &[EpisodeRecord]) -> Vec<AllocationPoint> {
    records
        .iter()
        .map(|r| AllocationPoint {
            advantage: r.partner.advantage(),
            task1_fraction: r.focus.iter().filter(|&&f| f == 0).count() as f64 / r.focus.len().max(1) as f64,
        })
        .collect()
}

/// Least-squares slope of task-1 fraction on the task-1 advantage, with a
/// 95% bootstrap interval over episodes.
pub fn task_allocation_correlation(points: &[AllocationPoint], seed: u64) -> Result<Interval> {
    if points.len() < MIN_ALLOCATION_EPISODES {
        return Err(Error::Analysis(format!("allocation slope needs {MIN_ALLOCATION_EPISODES} episodes, got {}", points.len())));
    }
    let slope = |idx: &[usize]| {
        let x: Vec<f64> = idx.iter().map(|&i| points[i].advantage).collect();
        let y: Vec<f64> = idx.iter().map(|&i| points[i].task1_fraction).collect();
        stats::ls_slope(&x, &y)
    };
    stats::bootstrap(points.len(), stats::BOOTSTRAP_RESAMPLES, 0.95, seed, slope)
}

/// Least-squares slope of the cumulative reward over `[t - 25, t + 25]`.
///
/// `cumulative[k]` is the reward collected in the first `k` steps, so the
/// series has `horizon + 1` entries.
pub fn throughput(cumulative: &[f64], t: usize) -> Result<f64> {
    let w = THROUGHPUT_HALF_WINDOW;
    let horizon = cumulative.len().saturating_sub(1);
    if t < w || t + w > horizon {
        return Err(Error::Analysis(format!("throughput window [{}, {}] outside [0, {horizon}]", t as i64 - w as i64, t + w)));
    }
    let x: Vec<f64> = (t - w..=t + w).map(|k| k as f64).collect();
    Ok(stats::ls_slope(&x, &cumulative[t - w..=t + w]).unwrap_or(0.0))
}

/// Throughput at every `t` with a full window; entry `k` is for `t = 25 + k`.
pub fn throughput_curve(cumulative: &[f64]) -> Vec<f64> {
    let horizon = cumulative.len().saturating_sub(1);
    let w = THROUGHPUT_HALF_WINDOW;
    if horizon < 2 * w {
        return Vec::new();
    }
    (w..=horizon - w).map(|t| throughput(cumulative, t).unwrap_or(0.0)).collect()
}

/// Mean throughput over `t` in `[from, to)`, clamped to the valid window range.
pub fn mean_throughput(cumulative: &[f64], from: usize, to: usize) -> Result<f64> {
    let horizon = cumulative.len().saturating_sub(1);
    let w = THROUGHPUT_HALF_WINDOW;
    let (a, b) = (from.max(w), to.min(horizon.saturating_sub(w) + 1));
    if a >= b {
        return Err(Error::Analysis(format!("no valid throughput window in [{from}, {to})")));
    }
    Ok((a..b).map(|t| throughput(cumulative, t)).sum::<Result<f64>>()? / (b - a) as f64)
}

/// Fraction of steps in which the coin partner's mode matched its stronger
/// colour. Episodes whose partner is equally skilled at both are skipped.
pub fn correct_colour_fraction(record: &EpisodeRecord) -> Option<f64> {
    let best = record.partner.stronger()?;
    Some(record.focus.iter().filter(|&&f| f as usize == best).count() as f64 / record.focus.len().max(1) as f64)
}

/// Fraction of episodes' steps assigned task 1 within `[from, to)`.
pub fn task1_fraction(records: &[EpisodeRecord], from: usize, to: usize) -> f64 {
    let (mut hit, mut n) = (0usize, 0usize);
    for r in records {
        for &f in r.focus.iter().take(to).skip(from) {
            n += 1;
            hit += (f == 0) as usize;
        }
    }
    hit as f64 / n.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partner::Profile;
    use crate::probe::trace::TraceHeader;

    fn record(partner: Profile, focus: Vec<u8>) -> EpisodeRecord {
        let n = focus.len();
        EpisodeRecord {
            partner,
            seed: 0,
            task_return: 0.0,
            rewards: vec![0.0; n],
            focus,
            switched: vec![false; n],
            ego_actions: vec![0; n],
            events: vec![],
            hidden: vec![],
        }
    }

    #[test]
    fn linear_cumulative_reward_has_constant_throughput() {
        let cum: Vec<f64> = (0..=400).map(|t| 0.05 * t as f64).collect();
        for t in [25, 100, 375] {
            assert!((throughput(&cum, t).unwrap() - 0.05).abs() < 1e-12);
        }
        assert_eq!(throughput(&vec![3.0; 401], 200).unwrap(), 0.0);
        assert!(throughput(&cum, 24).is_err());
        assert!(throughput(&cum, 376).is_err());
    }

    #[test]
    fn unit_step_matches_closed_form() {
        // Step of height 1 at k = t + 5 within the 51-point window:
        // slope = sum (x - xbar) * step / sum (x - xbar)^2.
        let t = 100;
        let cum: Vec<f64> = (0..=200).map(|k| if k >= t + 5 { 1.0 } else { 0.0 }).collect();
        let sxx: f64 = (-25..=25).map(|d: i32| (d * d) as f64).sum();
        let sxy: f64 = (5..=25).map(|d| d as f64).sum();
        assert!((throughput(&cum, t).unwrap() - sxy / sxx).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_random_allocators() {
        let cds = [0u32, 2, 3, 8, 10];
        let mut perfect = Vec::new();
        let mut random = Vec::new();
        let mut k = 0u64;
        for &a in &cds {
            for &b in &cds {
                if a == b {
                    continue;
                }
                let p = Profile::Cooldown { v: [a, b] };
                let frac = if a < b { 1.0 } else { 0.0 };
                perfect.push(AllocationPoint { advantage: p.advantage(), task1_fraction: frac });
                k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                random.push(AllocationPoint { advantage: p.advantage(), task1_fraction: (k >> 11) as f64 / (1u64 << 53) as f64 });
            }
        }
        let good = task_allocation_correlation(&perfect, 0).unwrap();
        assert!(good.estimate > 0.0 && good.lo > 0.0);
        let rnd = task_allocation_correlation(&random, 0).unwrap();
        assert!(rnd.contains(0.0), "{rnd:?}");
        let flat: Vec<_> = perfect.iter().map(|p| AllocationPoint { task1_fraction: 0.5, ..*p }).collect();
        assert_eq!(task_allocation_correlation(&flat, 0).unwrap().estimate, 0.0);
        assert!(task_allocation_correlation(&perfect[..9], 0).is_err());
    }

    #[test]
    fn unit_correlations_recover_planted_units() {
        let traces: Vec<HiddenTrace> = (0..120)
            .map(|i| {
                let x = (i % 9) as f64 / 8.0 - 0.5;
                let mut hidden = vec![0.0f32; 3 * 3];
                for t in 1..3 {
                    hidden[t * 3] = x as f32;
                    hidden[t * 3 + 1] = -x as f32;
                    hidden[t * 3 + 2] = 0.25;
                }
                HiddenTrace {
                    header: TraceHeader {
                        episode: i,
                        seed: i as u64,
                        condition: "multi".into(),
                        layout: "coingame".into(),
                        profile: Profile::Skill { s: [0.5 + x, 0.5 - x] },
                        horizon: 2,
                        hidden_dim: 3,
                        task_return: 0.0,
                    },
                    hidden,
                }
            })
            .collect();
        let c = per_unit_correlation(&traces, |t| t.header.profile.advantage()).unwrap();
        let by_unit = |u: usize| c.iter().find(|x| x.unit == u).unwrap();
        assert!((by_unit(0).r - 1.0).abs() < 1e-6);
        assert!((by_unit(1).r + 1.0).abs() < 1e-6);
        assert!(by_unit(2).zero_variance && by_unit(2).r == 0.0);
        assert!(per_unit_correlation(&traces[..99], |_| 0.0).is_err());
    }

    #[test]
    fn colour_fraction_skips_equal_skills() {
        let r = record(Profile::Skill { s: [0.9, 0.1] }, vec![0, 0, 1, 0]);
        assert_eq!(correct_colour_fraction(&r), Some(0.75));
        assert_eq!(correct_colour_fraction(&record(Profile::Skill { s: [0.5, 0.5] }, vec![0])), None);
        assert_eq!(task1_fraction(&[r], 0, 2), 1.0);
    }
}
