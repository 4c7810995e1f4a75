//! Normal distribution helpers shared by the click model and the statistics.

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard Normal CDF, accurate in relative terms deep into the lower tail.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Mean and variance correction factors of a Gaussian truncated at zero:
/// `v(t) = pdf(t) / cdf(t)` and `w(t) = v(t) * (v(t) + t)`.
pub fn truncated_gaussian_vw(t: f64) -> (f64, f64) {
    let v = if t < -30.0 {
        // Mills-ratio asymptotics; cdf underflows around t = -38.
        let t2 = t * t;
        -t / (1.0 - 1.0 / t2 + 3.0 / (t2 * t2))
    } else {
        norm_pdf(t) / norm_cdf(t)
    };
    let w = (v * (v + t)).clamp(0.0, 1.0);
    (v, w)
}
