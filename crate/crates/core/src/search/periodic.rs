//! Recurrence scan for periodic-orbit candidates in a float trajectory.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

/// A near-recurrence `s[start + m] ≈ s[start] + 2πj·e_angle`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recurrence {
    pub start: usize,
    pub m: usize,
    /// Signed number of turns; positive means θ increases (counter-clockwise).
    pub j: i32,
    pub gap: f64,
    /// The `m + 1` states `s[start..=start + m]`.
    pub states: Vec<Vec<f64>>,
}

impl Recurrence {
    /// Gap recomputed from the stored states.
    pub fn recompute_gap(&self, angle_index: usize) -> f64 {
        recurrence_gap(&self.states[0], &self.states[self.m], angle_index, self.j)
    }
}

pub fn recurrence_gap(a: &[f64], b: &[f64], angle_index: usize, j: i32) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(k, (x, y))| {
            let shift = if k == angle_index { TAU * j as f64 } else { 0.0 };
            (y - x - shift).abs()
        })
        .fold(0.0, f64::max)
}

fn spread(states: &[Vec<f64>]) -> f64 {
    let p = states[0].len();
    (0..p)
        .map(|k| {
            let (lo, hi) =
                states.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s[k]), hi.max(s[k])));
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Scan a trajectory for the shortest near-recurrence.
///
/// For every period `m` the best `(start, j)` with `j ∈ [-3, 3]` is found;
/// periods whose best gap is within `tol` and whose sub-trajectory actually
/// moves (spread above `tol`) are accepted. Among the first run of
/// consecutive accepted periods the smallest gap wins, which picks the
/// fundamental period rather than one of its multiples.
pub fn detect_periodic_candidate(states: &[Vec<f64>], angle_index: usize, tol: f64) -> Option<Recurrence> {
    let len = states.len();
    if len < 3 {
        return None;
    }
    let mut cluster: Option<Recurrence> = None;
    for m in 1..len {
        let mut best: Option<(usize, i32, f64)> = None;
        for i in 0..len - m {
            let d_angle = states[i + m][angle_index] - states[i][angle_index];
            let j = (d_angle / TAU).round().clamp(-3.0, 3.0) as i32;
            let gap = recurrence_gap(&states[i], &states[i + m], angle_index, j);
            if best.is_none_or(|(_, _, g)| gap < g) {
                best = Some((i, j, gap));
            }
        }
        let accepted = best.filter(|&(i, _, gap)| gap <= tol && spread(&states[i..=i + m]) > tol);
        match (accepted, &mut cluster) {
            (Some((i, j, gap)), None) => {
                cluster = Some(Recurrence { start: i, m, j, gap, states: states[i..=i + m].to_vec() });
            }
            (Some((i, j, gap)), Some(cur)) => {
                if gap < cur.gap {
                    *cur = Recurrence { start: i, m, j, gap, states: states[i..=i + m].to_vec() };
                }
            }
            (None, Some(_)) => break,
            (None, None) => {}
        }
    }
    cluster
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation(m: usize, len: usize, j: f64) -> Vec<Vec<f64>> {
        (0..len)
            .map(|k| {
                let phase = TAU * k as f64 / m as f64;
                vec![j * phase + 0.3 * phase.sin(), 1.0 + 0.2 * phase.cos()]
            })
            .collect()
    }

    #[test]
    fn exact_rotation() {
        let r = detect_periodic_candidate(&rotation(28, 200, 1.0), 0, 0.05).unwrap();
        assert_eq!((r.m, r.j), (28, 1));
        assert!(r.gap < 1e-12);
        assert_eq!(r.states.len(), 29);
        assert_eq!(r.recompute_gap(0), r.gap);
    }

    #[test]
    fn clockwise_rotation() {
        let r = detect_periodic_candidate(&rotation(10, 60, -1.0), 0, 0.05).unwrap();
        assert_eq!((r.m, r.j), (10, -1));
    }

    #[test]
    fn divergent_and_fixed_points() {
        let div: Vec<Vec<f64>> = (0..100).map(|k| vec![0.1 * (k * k) as f64, k as f64]).collect();
        assert!(detect_periodic_candidate(&div, 0, 0.05).is_none());
        let fixed = vec![vec![3.0, 0.0]; 50];
        assert!(detect_periodic_candidate(&fixed, 0, 0.05).is_none());
    }
}
