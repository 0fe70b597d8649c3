//! Von Mises mixture clustering of azimuth observations and soft-mask
//! derivation.

pub mod bessel;
pub mod em;
pub mod kmeans;
pub mod masks;
pub mod sampling;
pub mod vonmises;

pub use bessel::bessel_ratio;
pub use em::{align_components, em_fit, fit_mixture, init_from_kmeans, EmConfig, EmFit, Responsibilities};
pub use kmeans::{circular_kmeans, CircularKMeans, KMeansConfig};
pub use masks::{soft_masks, SoftMaskSet};
pub use sampling::VonMisesSampler;
pub use vonmises::{
    approx_kappa_inverse, approx_kappa_inverse_checked, mixture_loglik, vm_pdf, VonMisesMixture, KAPPA_MAX,
};
