//! Self-contained numerical property checks, runnable without any trained
//! artifact. Each check returns a [`Check`] instead of panicking so callers
//! can print a report and decide what a failure means.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::Distribution;

use crate::angle::{circular_distance, deg, rad, wrap};
use crate::clustering::masks::mask_weights;
use crate::clustering::{
    approx_kappa_inverse, bessel_ratio, fit_mixture, vm_pdf, EmConfig, VonMisesMixture, VonMisesSampler,
};
use crate::localization::to_absolute;
use crate::seed;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Check {
    fn finish(name: &'static str, start: Instant, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
            elapsed: start.elapsed(),
        }
    }
}

/// Problem sizes of the randomized checks.
#[derive(Debug, Clone, Copy)]
pub struct SelftestSize {
    pub em_datasets: usize,
    pub recovery_trials: usize,
    pub mask_cases: usize,
    pub wrap_cases: usize,
}

impl SelftestSize {
    pub const FULL: Self = Self {
        em_datasets: 100,
        recovery_trials: 100,
        mask_cases: 10_000,
        wrap_cases: 10_000,
    };
    pub const QUICK: Self = Self {
        em_datasets: 20,
        recovery_trials: 20,
        mask_cases: 10_000,
        wrap_cases: 10_000,
    };
}

/// Trapezoidal quadrature of the density over one period. The rule is
/// spectrally accurate for smooth periodic integrands.
pub fn vm_normalization(kappas: &[f64], points: usize) -> Check {
    let start = Instant::now();
    let h = 2.0 * PI / points as f64;
    let mut worst = 0.0f64;
    for &k in kappas {
        let total: f64 = (0..points).map(|i| vm_pdf(-PI + i as f64 * h, 0.3, k)).sum::<f64>() * h;
        worst = worst.max((total - 1.0).abs());
    }
    Check::finish(
        "vm_pdf integrates to one",
        start,
        worst <= 1e-6,
        format!("max |∫p − 1| = {worst:.2e}"),
    )
}

/// κ with A(κ) = r, found by bisection on the Bessel ratio.
pub fn kappa_by_bisection(r: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while bessel_ratio(hi) < r {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bessel_ratio(mid) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn kappa_inverse_accuracy() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for i in 1..=95 {
        let r = i as f64 / 100.0;
        let k = approx_kappa_inverse(r);
        worst = worst.max((bessel_ratio(k) - r).abs());
        // the oracle κ must itself reproduce r
        worst_oracle = worst_oracle.max((bessel_ratio(kappa_by_bisection(r)) - r).abs());
    }
    Check::finish(
        "kappa inversion matches bisection",
        start,
        worst <= 5e-3 && worst_oracle <= 1e-12,
        format!("max |A(κ̂) − R| = {worst:.2e}, oracle residual {worst_oracle:.1e}"),
    )
}

fn random_mixture<R: Rng>(c: usize, rng: &mut R) -> VonMisesMixture {
    let raw: Vec<f64> = (0..c).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    VonMisesMixture::new(
        raw.iter().map(|w| w / total).collect(),
        (0..c).map(|_| rng.gen_range(-PI..PI)).collect(),
        (0..c).map(|_| rng.gen_range(0.5..50.0)).collect(),
    )
    .expect("valid mixture")
}

fn sample_mixture<R: Rng>(mix: &VonMisesMixture, n: usize, rng: &mut R) -> Vec<f64> {
    let samplers: Vec<VonMisesSampler> = mix
        .means
        .iter()
        .zip(&mix.kappas)
        .map(|(&m, &k)| VonMisesSampler::new(m, k))
        .collect();
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let c = mix
                .weights
                .iter()
                .position(|w| {
                    acc += w;
                    u < acc
                })
                .unwrap_or(mix.components() - 1);
            samplers[c].sample(rng)
        })
        .collect()
}

/// Every EM iteration must not lower the log-likelihood by more than 1e-9.
pub fn em_monotonicity(datasets: usize, master: u64) -> Check {
    let start = Instant::now();
    let cfg = EmConfig::default();
    let mut worst = f64::INFINITY;
    let mut failures = 0;
    for d in 0..datasets {
        let mut rng = seed::rng(master, &[seed::tag("em-monotone"), d as u64]);
        let c = 2 + d % 3;
        let mix = random_mixture(c, &mut rng);
        let obs = sample_mixture(&mix, 500, &mut rng);
        match fit_mixture(&obs, c, rng.gen(), &cfg) {
            Ok(fit) => {
                for w in fit.loglik_history.windows(2) {
                    worst = worst.min(w[1] - w[0]);
                }
            }
            Err(_) => failures += 1,
        }
    }
    Check::finish(
        "EM log-likelihood is monotone",
        start,
        failures == 0 && worst >= -1e-9,
        format!("{datasets} datasets, smallest delta {worst:.2e}, {failures} fit errors"),
    )
}

fn well_separated_means<R: Rng>(rng: &mut R) -> Vec<f64> {
    loop {
        let m: Vec<f64> = (0..3).map(|_| rng.gen_range(-PI..PI)).collect();
        let ok = (0..3).all(|i| (i + 1..3).all(|j| circular_distance(m[i], m[j]) >= rad(60.0)));
        if ok {
            return m;
        }
    }
}

/// Largest matched mean error in degrees over all 3! assignments' best.
fn matched_mean_error(truth: &[f64], fitted: &[f64]) -> f64 {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    PERMS
        .iter()
        .map(|p| {
            (0..3)
                .map(|i| circular_distance(truth[i], fitted[p[i]]))
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
        .to_degrees()
}

/// Fitted means of a 3-component κ = 20 mixture land within 5° of the truth.
pub fn mixture_recovery(trials: usize, master: u64) -> Check {
    let start = Instant::now();
    let cfg = EmConfig::default();
    let mut good = 0;
    for t in 0..trials {
        let mut rng = seed::rng(master, &[seed::tag("recovery"), t as u64]);
        let means = well_separated_means(&mut rng);
        let mix = VonMisesMixture::new(vec![1.0 / 3.0; 3], means.clone(), vec![20.0; 3]).expect("valid mixture");
        let obs = sample_mixture(&mix, 1600, &mut rng);
        if let Ok(fit) = fit_mixture(&obs, 3, rng.gen(), &cfg) {
            if matched_mean_error(&means, &fit.mixture.means) <= 5.0 {
                good += 1;
            }
        }
    }
    let needed = (trials * 95).div_ceil(100);
    Check::finish(
        "3-component mixture recovery",
        start,
        good >= needed,
        format!("{good}/{trials} trials within 5°, need {needed}"),
    )
}

/// Relative-to-absolute azimuth conversion wraps into [−π, π) and inverts.
pub fn wrap_properties(cases: usize, master: u64) -> Check {
    let start = Instant::now();
    let mut rng = seed::rng(master, &[seed::tag("wrap")]);
    let example = deg(to_absolute(rad(170.0), rad(30.0)));
    let mut ok = (example + 160.0).abs() < 1e-9;
    let mut detail = format!("170° + 30° → {example:.6}°");
    for _ in 0..cases {
        let phi = rng.gen_range(-50.0..50.0);
        let psi = rng.gen_range(-50.0..50.0);
        let a = to_absolute(phi, psi);
        let back = to_absolute(a, -psi);
        if !(-PI..PI).contains(&a) || circular_distance(back, wrap(phi)) > 1e-9 || !(-PI..PI).contains(&back) {
            ok = false;
            detail = format!("fails at φ = {phi}, ψ = {psi}: {a} → {back}");
            break;
        }
    }
    Check::finish("azimuth wrap and round trip", start, ok, detail)
}

/// Soft-mask weights of a unit sum to one.
pub fn mask_normalization(cases: usize, master: u64) -> Check {
    let start = Instant::now();
    let mut rng = seed::rng(master, &[seed::tag("masks")]);
    let mut worst = 0.0f64;
    let mut out = [0.0; 4];
    for _ in 0..cases {
        let c = rng.gen_range(1..=4);
        let mix = VonMisesMixture::new(
            vec![1.0 / c as f64; c],
            (0..c).map(|_| rng.gen_range(-PI..PI)).collect(),
            (0..c).map(|_| 10f64.powf(rng.gen_range(-2.0..4.0))).collect(),
        )
        .expect("valid mixture");
        mask_weights(rng.gen_range(-PI..PI), &mix, &mut out[..c]);
        worst = worst.max((out[..c].iter().sum::<f64>() - 1.0).abs());
    }
    Check::finish(
        "soft-mask rows sum to one",
        start,
        worst <= 1e-12,
        format!("{cases} cases, max |Σβ − 1| = {worst:.1e}"),
    )
}

/// All checks at the given size.
pub fn run_all(size: SelftestSize, master: u64) -> Vec<Check> {
    vec![
        vm_normalization(&[0.0, 0.5, 5.0, 50.0, 500.0], 20_000),
        kappa_inverse_accuracy(),
        em_monotonicity(size.em_datasets, master),
        mixture_recovery(size.recovery_trials, master),
        wrap_properties(size.wrap_cases, master),
        mask_normalization(size.mask_cases, master),
    ]
}
