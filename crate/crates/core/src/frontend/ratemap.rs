/// Leaky integration with time constant `tau` (unity DC gain) followed by a
/// mean over each non-overlapping frame. Trailing partial frames are dropped.
pub fn compute_ratemap(ihc: &[f64], sample_rate: f64, tau: f64, frame_samples: usize) -> Vec<f64> {
    let mut smoothed = ihc.to_vec();
    leaky_integrate(&mut smoothed, sample_rate, tau);
    frame_means(&smoothed, frame_samples)
}

pub fn leaky_integrate(signal: &mut [f64], sample_rate: f64, tau: f64) {
    let a = (-1.0 / (tau * sample_rate)).exp();
    let mut y = 0.0;
    for x in signal.iter_mut() {
        y = (1.0 - a) * *x + a * y;
        *x = y;
    }
}

pub fn frame_means(signal: &[f64], frame_samples: usize) -> Vec<f64> {
    signal
        .chunks_exact(frame_samples)
        .map(|f| f.iter().sum::<f64>() / frame_samples as f64)
        .collect()
}
