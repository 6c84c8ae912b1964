//! Repeaterless secret-key capacity benchmarks: the pure-loss channel
//! capacity, the extended channel bound that absorbs the apparatus losses,
//! and the thermal channel bound that accounts for dark counts.

use crate::error::{Error, Result};
use crate::photonics::{fiber_transmissivity, HardwareParameters};

/// Detection window used for the thermal benchmark's mean photon number.
pub const THERMAL_BENCHMARK_T_W: f64 = 5e-9;

/// Repeaterless bounds at one distance, plus the direct NV transmission rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkSet {
    pub capacity: f64,
    pub extended: f64,
    pub thermal: f64,
    pub direct_nv: f64,
}

/// -log2(1 - eta_f), stable for small eta_f.
pub fn pure_loss_capacity(eta_f: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta_f) {
        return Err(Error::invalid_parameter("eta_f", "must be in [0, 1)"));
    }
    Ok(-(-eta_f).ln_1p() / std::f64::consts::LN_2)
}

/// -log2(1 - eta_f p_app) with p_app = p_ce p_zpl p_det (no window factor).
pub fn extended_channel_bound(eta_f: f64, p_app: f64) -> f64 {
    -(-eta_f * p_app).ln_1p() / std::f64::consts::LN_2
}

/// g(x) = (x+1) log2(x+1) - x log2(x).
fn g(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (x + 1.0) * (x + 1.0).log2() - x * x.log2()
}

/// Thermal channel bound with mean thermal photon number nbar; zero when
/// nbar exceeds eta p / (1 - eta p).
pub fn thermal_bound(eta_f: f64, p_app: f64, nbar: f64) -> f64 {
    let ep = eta_f * p_app;
    if ep <= 0.0 || nbar > ep / (1.0 - ep) {
        return 0.0;
    }
    if nbar == 0.0 {
        return extended_channel_bound(eta_f, p_app);
    }
    (extended_channel_bound(eta_f, p_app) - nbar * ep.log2() - g(nbar)).max(0.0)
}

/// All three analytic bounds at distance L; the thermal one uses a fixed
/// 5 ns window for the dark-count photon number. `direct_nv` is filled in
/// by the caller from the direct-transmission scheme.
pub fn benchmark_set(length_km: f64, params: &HardwareParameters, direct_nv: f64) -> Result<BenchmarkSet> {
    let eta_f = fiber_transmissivity(length_km, params.l0);
    let p_app = params.p_ce * params.p_zpl * params.p_det;
    let nbar = THERMAL_BENCHMARK_T_W * params.d;
    Ok(BenchmarkSet {
        capacity: pure_loss_capacity(eta_f)?,
        extended: extended_channel_bound(eta_f, p_app),
        thermal: thermal_bound(eta_f, p_app, nbar),
        direct_nv,
    })
}
