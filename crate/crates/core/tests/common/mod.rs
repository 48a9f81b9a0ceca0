//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use gaze_ident::segmentation::{Segment, SegmentKind};
use gaze_ident::Trajectory;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// Builds a trajectory along x from per-interval speeds (deg/s).
pub fn from_speeds(rate: f64, speeds: &[f64]) -> Trajectory {
    let mut x = vec![0.0];
    for s in speeds {
        let last = *x.last().unwrap();
        x.push(last + s / rate);
    }
    let n = x.len();
    Trajectory::uniform(rate, x, vec![0.0; n]).unwrap()
}

/// Direct transcription of the IVT rule: label each interval, decide each
/// maximal run, then group equal decisions.
pub fn brute_force_ivt(traj: &Trajectory, vt: f64, mfd: f64) -> Vec<Segment> {
    let rate = traj.rate_hz();
    let (x, y) = (traj.x(), traj.y());
    let n_int = traj.len() - 1;
    let low: Vec<bool> = (0..n_int)
        .map(|i| {
            let v = ((x[i + 1] - x[i]).powi(2) + (y[i + 1] - y[i]).powi(2)).sqrt() * rate;
            v < vt
        })
        .collect();
    // Decide fixation/saccade per interval.
    let mut is_fix = vec![false; n_int];
    let mut run_start = 0;
    for i in 1..=n_int {
        if i == n_int || low[i] != low[run_start] {
            let run_len = i - run_start;
            let fix = low[run_start] && run_len as f64 / rate >= mfd;
            for item in is_fix.iter_mut().take(i).skip(run_start) {
                *item = fix;
            }
            run_start = i;
        }
    }
    // Adjacent fixation runs cannot exist (low runs are maximal), so grouping
    // equal decisions gives maximal saccades and individual fixations.
    let mut out: Vec<Segment> = Vec::new();
    let mut start = 0;
    for i in 1..=n_int {
        if i == n_int || is_fix[i] != is_fix[start] {
            out.push(Segment {
                kind: if is_fix[start] {
                    SegmentKind::Fixation
                } else {
                    SegmentKind::Saccade
                },
                start_idx: start,
                end_idx: i,
                duration_s: 0.0,
            });
            start = i;
        }
    }
    let last = out.len() - 1;
    out[last].end_idx += 1;
    for s in &mut out {
        s.duration_s = (s.end_idx - s.start_idx) as f64 / rate;
    }
    out
}

/// Random trajectory alternating still, drifting and fast chunks.
pub fn random_trajectory(r: &mut ChaCha8Rng, max_len: usize, rate: f64) -> Trajectory {
    let n = r.random_range(2..=max_len);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let (mut px, mut py) = (0.0f64, 0.0f64);
    while x.len() < n {
        let chunk = r.random_range(1..60);
        let speed: f64 = match r.random_range(0..3) {
            0 => 0.0,
            1 => r.random_range(0.0..60.0),
            _ => r.random_range(60.0..600.0),
        };
        let theta = r.random_range(0.0..std::f64::consts::TAU);
        for _ in 0..chunk {
            if x.len() == n {
                break;
            }
            x.push(px);
            y.push(py);
            let jitter = r.random_range(-0.02..0.02);
            px += speed / rate * theta.cos() + jitter;
            py += speed / rate * theta.sin();
        }
    }
    Trajectory::uniform(rate, x, y).unwrap()
}

/// Reference M3S2K: plainly written from the definitions.
pub fn brute_m3s2k(v: &[f64]) -> [f64; 6] {
    let n = v.len();
    let nf = n as f64;
    let mean = v.iter().sum::<f64>() / nf;
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if n.is_multiple_of(2) {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    } else {
        s[(n - 1) / 2]
    };
    let max = s[n - 1];
    let moment = |p: i32| v.iter().map(|x| (x - mean).powi(p)).sum::<f64>() / nf;
    let std = if n > 1 {
        (moment(2) * nf / (nf - 1.0)).sqrt()
    } else {
        0.0
    };
    let skew = if n < 3 || std == 0.0 {
        0.0
    } else {
        moment(3) / moment(2).powf(1.5)
    };
    let kurt = if n < 4 || std == 0.0 {
        0.0
    } else {
        moment(4) / moment(2).powi(2) - 3.0
    };
    [mean, median, max, std, skew, kurt]
}

/// Reference one-way ANOVA via the total/within decomposition.
pub fn brute_anova(values: &[f64], groups: &[usize]) -> f64 {
    let k = groups.iter().copied().max().unwrap() + 1;
    let n = values.len();
    let grand = values.iter().sum::<f64>() / n as f64;
    let sst: f64 = values.iter().map(|v| (v - grand).powi(2)).sum();
    let mut ssw = 0.0;
    for g in 0..k {
        let members: Vec<f64> = values
            .iter()
            .zip(groups)
            .filter(|(_, gg)| **gg == g)
            .map(|(v, _)| *v)
            .collect();
        let m = members.iter().sum::<f64>() / members.len() as f64;
        ssw += members.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let ssb = sst - ssw;
    (ssb / (k - 1) as f64) / (ssw / (n - k) as f64)
}

/// Random ANOVA instance with `k` groups, every group non-empty.
pub fn random_groups(r: &mut ChaCha8Rng) -> (Vec<f64>, Vec<usize>) {
    let k = r.random_range(2..6);
    let mut values = Vec::new();
    let mut groups = Vec::new();
    for g in 0..k {
        let size = r.random_range(2..12);
        let shift = r.random_range(-2.0..2.0);
        for _ in 0..size {
            values.push(shift + r.random_range(-1.0..1.0));
            groups.push(g);
        }
    }
    (values, groups)
}

/// Reference mean and sample SD computed with Welford's recurrence.
pub fn welford(values: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, v) in values.iter().enumerate() {
        let d = v - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (v - mean);
    }
    let sd = if values.len() > 1 {
        (m2 / (values.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Four Gaussian clusters in 10-D, pairwise centre distance 10 sigma.
pub fn four_clusters(seed: u64, per_cluster: usize) -> (Vec<f64>, Vec<String>) {
    use rand_distr::{Distribution, Normal};
    let mut r = rng(seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let offset = 10.0 / 2f64.sqrt();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for c in 0..4 {
        for _ in 0..per_cluster {
            for d in 0..10 {
                let centre = if d == c { offset } else { 0.0 };
                data.push(centre + unit.sample(&mut r));
            }
            labels.push(format!("c{c}"));
        }
    }
    (data, labels)
}
