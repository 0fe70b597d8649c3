//! Interaural time and level differences of one frame of hair-cell output.

use serde::{Deserialize, Serialize};

/// Binaural cue pair of one time-frequency unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinauralFeature {
    /// Interaural time difference in seconds; positive when the left ear leads.
    pub itd: f64,
    /// Interaural level difference in dB; positive when the left ear is louder.
    pub ild: f64,
    pub valid: bool,
}

impl BinauralFeature {
    pub const INVALID: BinauralFeature = BinauralFeature {
        itd: 0.0,
        ild: 0.0,
        valid: false,
    };
}

pub fn frame_energy(frame: &[f64]) -> f64 {
    frame.iter().map(|x| x * x).sum()
}

/// Lag (in samples) of the peak of the normalised cross-correlation
/// `corr(left[n], right[n + lag])` for `|lag| <= max_lag`.
///
/// Each lag correlates only the overlapping samples, with means removed, so
/// swapping the ears negates the lag exactly. Ties go to the smallest `|lag|`,
/// then to the negative lag. With `interpolate` the peak is refined by a
/// parabola through its neighbours.
pub fn itd_lag(left: &[f64], right: &[f64], max_lag: usize, interpolate: bool) -> f64 {
    assert_eq!(left.len(), right.len(), "ITD frames must have equal length");
    let n = left.len();
    if n < 2 {
        return 0.0;
    }
    let max_lag = max_lag.min(n - 2);
    let prefix = |x: &[f64]| {
        let mut s = Vec::with_capacity(n + 1);
        let mut q = Vec::with_capacity(n + 1);
        s.push(0.0);
        q.push(0.0);
        for &v in x {
            s.push(s.last().unwrap() + v);
            q.push(q.last().unwrap() + v * v);
        }
        (s, q)
    };
    let (ls, lq) = prefix(left);
    let (rs, rq) = prefix(right);
    let corr = |lag: isize| -> f64 {
        // overlap: left[a..a+m] with right[b..b+m]
        let (a, b) = if lag >= 0 {
            (0, lag as usize)
        } else {
            ((-lag) as usize, 0)
        };
        let m = n - lag.unsigned_abs();
        let mf = m as f64;
        let cross = dot(&left[a..a + m], &right[b..b + m]);
        let (sl, sr) = (ls[a + m] - ls[a], rs[b + m] - rs[b]);
        let vl = lq[a + m] - lq[a] - sl * sl / mf;
        let vr = rq[b + m] - rq[b] - sr * sr / mf;
        let cov = cross - sl * sr / mf;
        let denom = (vl * vr).sqrt();
        if denom > 0.0 && denom.is_finite() {
            cov / denom
        } else {
            0.0
        }
    };
    let mut best_lag = 0isize;
    let mut best = corr(0);
    for d in 1..=max_lag as isize {
        for lag in [-d, d] {
            let c = corr(lag);
            if c > best {
                best = c;
                best_lag = lag;
            }
        }
    }
    if interpolate && best_lag.unsigned_abs() < max_lag {
        let (cm, cp) = (corr(best_lag - 1), corr(best_lag + 1));
        let curvature = cm - 2.0 * best + cp;
        if curvature < 0.0 {
            let shift = 0.5 * (cm - cp) / curvature;
            return best_lag as f64 + shift.clamp(-0.5, 0.5);
        }
    }
    best_lag as f64
}

/// Dot product with independent partial sums so the loop vectorises.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// ITD in seconds; see [`itd_lag`].
pub fn extract_itd(left: &[f64], right: &[f64], sample_rate: f64, max_itd: f64, interpolate: bool) -> f64 {
    let max_lag = (max_itd * sample_rate).floor() as usize;
    itd_lag(left, right, max_lag, interpolate) / sample_rate
}

/// ILD in dB from frame energies; `None` when either ear's energy is at or
/// below `floor`.
pub fn extract_ild(left: &[f64], right: &[f64], floor: f64) -> Option<f64> {
    ild_from_energies(frame_energy(left), frame_energy(right), floor)
}

pub fn ild_from_energies(e_left: f64, e_right: f64, floor: f64) -> Option<f64> {
    if e_left <= floor || e_right <= floor || e_left <= 0.0 || e_right <= 0.0 {
        return None;
    }
    Some(10.0 * (e_left / e_right).log10())
}
