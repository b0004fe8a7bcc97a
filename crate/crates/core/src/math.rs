//! Float helpers that work with or without `std`.

#[cfg(any(test, feature = "std"))]
pub(crate) fn exp(x: f64) -> f64 {
    x.exp()
}

#[cfg(not(any(test, feature = "std")))]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[cfg(any(test, feature = "std"))]
pub(crate) fn ln(x: f64) -> f64 {
    x.ln()
}

#[cfg(not(any(test, feature = "std")))]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[cfg(any(test, feature = "std"))]
pub(crate) fn sqrt(x: f64) -> f64 {
    x.sqrt()
}

#[cfg(not(any(test, feature = "std")))]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[cfg(any(test, feature = "std"))]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    x.powf(y)
}

#[cfg(not(any(test, feature = "std")))]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[cfg(any(test, feature = "std"))]
pub(crate) fn round(x: f64) -> f64 {
    x.round()
}

#[cfg(not(any(test, feature = "std")))]
pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

#[cfg(any(test, feature = "std"))]
pub(crate) fn ceil(x: f64) -> f64 {
    x.ceil()
}

#[cfg(not(any(test, feature = "std")))]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[cfg(any(test, feature = "std"))]
pub(crate) fn floor(x: f64) -> f64 {
    x.floor()
}

#[cfg(not(any(test, feature = "std")))]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + exp(-z))
    } else {
        let e = exp(z);
        e / (1.0 + e)
    }
}

/// KL divergence between Bernoulli(p) and Bernoulli(q).
///
/// Callers must keep both arguments strictly inside (0, 1); player
/// probabilities are clamped before they reach this function.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    p * ln(p / q) + (1.0 - p) * ln((1.0 - p) / (1.0 - q))
}

/// Derives independent seed streams from one master seed (splitmix64 mix).
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
