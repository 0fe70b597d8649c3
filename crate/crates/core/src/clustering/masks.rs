use super::vonmises::{ln_vm_pdf, log_sum_exp, VonMisesMixture};

/// Per time-frequency unit soft masks, `frames × channels × components`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMaskSet {
    frames: usize,
    channels: usize,
    components: usize,
    weights: Vec<f64>,
    /// Units that received a uniform mask because they had no observation or
    /// every component density underflowed.
    uniform: Vec<bool>,
}

impl SoftMaskSet {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// Mask weights of all components for unit `(k, l)`.
    pub fn unit(&self, k: usize, l: usize) -> &[f64] {
        let i = (k * self.channels + l) * self.components;
        &self.weights[i..i + self.components]
    }

    pub fn get(&self, k: usize, l: usize, c: usize) -> f64 {
        self.unit(k, l)[c]
    }

    pub fn is_uniform(&self, k: usize, l: usize) -> bool {
        self.uniform[k * self.channels + l]
    }

    /// The `frames × channels` mask of one component, frame-major.
    pub fn component_mask(&self, c: usize) -> Vec<f64> {
        self.weights.iter().skip(c).step_by(self.components).copied().collect()
    }
}

/// Normalised component likelihoods for a single azimuth. Mixture weights are
/// deliberately ignored (uniform prior over components).
pub fn mask_weights(phi: f64, mix: &VonMisesMixture, out: &mut [f64]) -> bool {
    for (c, o) in out.iter_mut().enumerate() {
        *o = ln_vm_pdf(phi, mix.means[c], mix.kappas[c]);
    }
    let lse = log_sum_exp(out);
    if !lse.is_finite() {
        out.fill(1.0 / out.len() as f64);
        return false;
    }
    for o in out.iter_mut() {
        *o = (*o - lse).exp();
    }
    true
}

/// Builds soft masks for a `frames × channels` grid from azimuth observations
/// located at `(k, l)` positions. Units with no observation get `1/C`.
pub fn soft_masks(
    frames: usize,
    channels: usize,
    observations: &[f64],
    positions: &[(usize, usize)],
    mix: &VonMisesMixture,
) -> SoftMaskSet {
    let c = mix.components();
    let mut weights = vec![1.0 / c as f64; frames * channels * c];
    let mut uniform = vec![true; frames * channels];
    for (&phi, &(k, l)) in observations.iter().zip(positions) {
        let unit = k * channels + l;
        let ok = mask_weights(phi, mix, &mut weights[unit * c..(unit + 1) * c]);
        uniform[unit] = !ok;
    }
    SoftMaskSet {
        frames,
        channels,
        components: c,
        weights,
        uniform,
    }
}
