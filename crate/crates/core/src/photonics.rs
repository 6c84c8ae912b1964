//! Photonic loss and noise scalar models: fiber transmissivity, detection
//! time-window capture, dark counts, squashing depolarization, click
//! probabilities and the von Mises optical-phase dephasing parameter.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// QKD protocol variant; fixes the number of detectors seen by the squashing map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Bb84,
    SixState,
}

impl Protocol {
    /// Number of dark-countable detectors per measurement.
    pub fn detector_count(self) -> u32 {
        match self {
            Protocol::Bb84 => 2,
            Protocol::SixState => 6,
        }
    }
}

/// NV hardware parameter set. Defaults follow the reference platform values.
#[derive(Debug, Clone, PartialEq)]
pub struct HardwareParameters {
    /// Per-attempt carbon dephasing rate offset.
    pub a0: f64,
    /// Per-second carbon dephasing rate.
    pub a1: f64,
    /// Per-attempt carbon depolarizing rate offset.
    pub b0: f64,
    /// Per-second carbon depolarizing rate.
    pub b1: f64,
    /// Electron-spin reset/preparation time (s).
    pub t_prep: f64,
    /// Electron-spin readout fidelity.
    pub f_m: f64,
    /// Two-qubit gate fidelity.
    pub f_g: f64,
    /// Spin-photon entangled-state preparation fidelity.
    pub f_prep: f64,
    /// Photon collection efficiency.
    pub p_ce: f64,
    /// Zero-phonon-line emission fraction.
    pub p_zpl: f64,
    /// Detector efficiency (before window redefinition).
    pub p_det: f64,
    /// Dark counts per second.
    pub d: f64,
    /// NV optical emission decay constant (s).
    pub tau: f64,
    /// Detection window offset after the emission peak (s).
    pub t_w_offset: f64,
    /// Fiber attenuation length (km).
    pub l0: f64,
    /// Fiber refractive index.
    pub n_ri: f64,
    /// Optical phase-noise standard deviation (radians).
    pub delta_phi: f64,
    /// Speed of light in vacuum (km/s).
    pub c_vacuum: f64,
}

pub const C_VACUUM_KM_S: f64 = 299_792.458;

impl Default for HardwareParameters {
    fn default() -> Self {
        Self::table1()
    }
}

impl HardwareParameters {
    /// Near-term NV parameter set (Table 1 values).
    pub fn table1() -> Self {
        HardwareParameters {
            a0: 1.0 / 2000.0,
            a1: 1.0 / 3.0,
            b0: 1.0 / 5000.0,
            b1: 1.0 / 3.0,
            t_prep: 6e-6,
            f_m: 0.95,
            f_g: 0.98,
            f_prep: 0.99,
            p_ce: 0.49,
            p_zpl: 0.46,
            p_det: 0.8,
            d: 10.0,
            tau: 6.48e-9,
            t_w_offset: 1.28e-9,
            l0: 0.542,
            n_ri: 1.44,
            delta_phi: 14.3f64.to_radians(),
            c_vacuum: C_VACUUM_KM_S,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("F_m", self.f_m),
            ("F_g", self.f_g),
            ("F_prep", self.f_prep),
            ("p_ce", self.p_ce),
            ("p_zpl", self.p_zpl),
            ("p_det", self.p_det),
        ];
        for (name, v) in probs {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid_parameter(name, "must be in [0, 1]"));
            }
        }
        let nonneg = [
            ("a0", self.a0),
            ("a1", self.a1),
            ("b0", self.b0),
            ("b1", self.b1),
            ("d", self.d),
            ("delta_phi", self.delta_phi),
            ("t_prep", self.t_prep),
            ("t_w_offset", self.t_w_offset),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) {
                return Err(Error::invalid_parameter(name, "must be nonnegative"));
            }
        }
        let pos = [
            ("tau", self.tau),
            ("L0", self.l0),
            ("n_ri", self.n_ri),
            ("c_vacuum", self.c_vacuum),
        ];
        for (name, v) in pos {
            if !(v > 0.0) {
                return Err(Error::invalid_parameter(name, "must be positive"));
            }
        }
        Ok(())
    }

    /// Applies `key = value` overrides from flat structured text. Angles are in
    /// degrees in the file and converted to radians here.
    pub fn apply_overrides(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::ParameterFile(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::ParameterFile(format!("line {}: bad numeric value for {key}", lineno + 1))
            })?;
            match key {
                "a0" => self.a0 = value,
                "a1" => self.a1 = value,
                "b0" => self.b0 = value,
                "b1" => self.b1 = value,
                "t_prep" => self.t_prep = value,
                "F_m" => self.f_m = value,
                "F_g" => self.f_g = value,
                "F_prep" => self.f_prep = value,
                "p_ce" => self.p_ce = value,
                "p_zpl" => self.p_zpl = value,
                "p_det" => self.p_det = value,
                "d" => self.d = value,
                "tau" => self.tau = value,
                "t_w_offset" => self.t_w_offset = value,
                "L0" => self.l0 = value,
                "n_ri" => self.n_ri = value,
                "delta_phi" => self.delta_phi = value.to_radians(),
                "c_vacuum" => self.c_vacuum = value,
                other => {
                    return Err(Error::ParameterFile(format!(
                        "line {}: unknown key {other}",
                        lineno + 1
                    )))
                }
            }
        }
        self.validate()
    }

    /// Loads the default set with file overrides applied.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ParameterFile(format!("{}: {e}", path.display())))?;
        let mut params = Self::table1();
        params.apply_overrides(&text)?;
        Ok(params)
    }

    /// Serializes as flat key-value text (angles in degrees).
    pub fn to_key_value_text(&self) -> String {
        let mut s = String::new();
        let pairs = [
            ("a0", self.a0),
            ("a1", self.a1),
            ("b0", self.b0),
            ("b1", self.b1),
            ("t_prep", self.t_prep),
            ("F_m", self.f_m),
            ("F_g", self.f_g),
            ("F_prep", self.f_prep),
            ("p_ce", self.p_ce),
            ("p_zpl", self.p_zpl),
            ("p_det", self.p_det),
            ("d", self.d),
            ("tau", self.tau),
            ("t_w_offset", self.t_w_offset),
            ("L0", self.l0),
            ("n_ri", self.n_ri),
            ("delta_phi", self.delta_phi.to_degrees()),
            ("c_vacuum", self.c_vacuum),
        ];
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Per-arm optical budget at a fixed fiber length and detection window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Fiber transmissivity e^(-L/L0).
    pub eta_f: f64,
    /// Probability the photon arrives inside the detection window.
    pub p_in: f64,
    /// Apparatus efficiency p_ce * p_zpl * p_det * p_in.
    pub p_app_prime: f64,
    /// End-to-end detection probability p_app_prime * eta_f.
    pub eta_total: f64,
    /// Dark-count probability per window.
    pub p_d: f64,
}

impl LinkBudget {
    pub fn new(length_km: f64, t_w: f64, params: &HardwareParameters) -> Result<Self> {
        if length_km < 0.0 {
            return Err(Error::invalid_parameter("L", "must be nonnegative"));
        }
        if t_w <= 0.0 {
            return Err(Error::invalid_parameter("t_w", "must be positive"));
        }
        let eta_f = fiber_transmissivity(length_km, params.l0);
        let p_in = window_capture(t_w, params);
        let p_app_prime = params.p_ce * params.p_zpl * params.p_det * p_in;
        Ok(LinkBudget {
            eta_f,
            p_in,
            p_app_prime,
            eta_total: p_app_prime * eta_f,
            p_d: dark_count_probability(t_w, params.d),
        })
    }
}

/// e^(-L/L0).
pub fn fiber_transmissivity(length_km: f64, l0: f64) -> f64 {
    (-length_km / l0).exp()
}

/// Probability that an exponentially distributed emission time falls inside
/// the window [t_offset, t_offset + t_w].
pub fn window_capture(t_w: f64, params: &HardwareParameters) -> f64 {
    let start = (-params.t_w_offset / params.tau).exp();
    // start * (1 - e^{-t_w/tau}), stable for small windows.
    start * (-(-t_w / params.tau).exp_m1())
}

/// Probability of at least one dark count in the window: 1 - e^(-t_w d).
pub fn dark_count_probability(t_w: f64, d: f64) -> f64 {
    -(-t_w * d).exp_m1()
}

/// (1 - p)^k computed via expm1/ln_1p, stable for p ~ 1e-8.
fn pow_one_minus(p: f64, k: u32) -> f64 {
    if p >= 1.0 {
        return 0.0;
    }
    (f64::from(k) * (-p).ln_1p()).exp()
}

/// 1 - (1 - eta p')(1 - p_d)^k with k detectors.
pub fn click_probability(protocol: Protocol, eta_link: f64, p_app_prime: f64, p_d: f64) -> f64 {
    let signal = p_app_prime * eta_link;
    let k = protocol.detector_count();
    if signal >= 1.0 {
        return 1.0;
    }
    -((-signal).ln_1p() + f64::from(k) * (-p_d).ln_1p()).exp_m1()
}

/// Depolarizing parameter of the squashing map:
/// alpha = eta p' (1-p_d)^(k-1) / (1 - (1 - eta p')(1-p_d)^k).
pub fn squash_depolarizing(protocol: Protocol, eta_link: f64, p_app_prime: f64, p_d: f64) -> f64 {
    let signal = p_app_prime * eta_link;
    let k = protocol.detector_count();
    let numerator = signal * pow_one_minus(p_d, k - 1);
    let denominator = click_probability(protocol, eta_link, p_app_prime, p_d);
    if denominator < 1e-300 {
        return 0.0;
    }
    numerator / denominator
}

/// Modified Bessel I0 and I1 scaled by e^{-x}; only the ratio is used.
fn bessel_i01_scaled(x: f64) -> (f64, f64) {
    if x <= 15.0 {
        // Power series I_n(x) = sum (x/2)^{2k+n} / (k! (k+n)!).
        let q = x * x / 4.0;
        let mut i0 = 1.0;
        let mut i1 = x / 2.0;
        let mut t0 = 1.0;
        let mut t1 = x / 2.0;
        for k in 1..200 {
            let kf = k as f64;
            t0 *= q / (kf * kf);
            t1 *= q / (kf * (kf + 1.0));
            i0 += t0;
            i1 += t1;
            if t0 < i0 * 1e-17 && t1 < i1 * 1e-17 {
                break;
            }
        }
        let scale = (-x).exp();
        (i0 * scale, i1 * scale)
    } else {
        // Asymptotic expansion: I_nu(x) ~ e^x/sqrt(2 pi x) sum_k (-1)^k a_k(nu)/x^k,
        // a_k(nu) = prod_{j=1..k} (4 nu^2 - (2j-1)^2) / (k! 8^k). The e^x/sqrt
        // prefactor cancels in the ratio, so it is dropped.
        let sum = |mu: f64| -> f64 {
            let mut acc = 1.0;
            let mut term = 1.0;
            let mut prev = f64::INFINITY;
            for k in 1..60 {
                let kf = k as f64;
                term *= -(mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
                if term.abs() >= prev {
                    break;
                }
                prev = term.abs();
                acc += term;
                if term.abs() < 1e-17 {
                    break;
                }
            }
            acc
        };
        (sum(0.0), sum(4.0))
    }
}

/// Dephasing parameter of von Mises phase noise with concentration
/// kappa = 1/delta_phi^2: lambda = I1(kappa)/(2 I0(kappa)) + 1/2.
pub fn phase_dephasing_parameter(delta_phi: f64) -> f64 {
    if delta_phi == 0.0 {
        return 1.0;
    }
    let kappa = 1.0 / (delta_phi * delta_phi);
    lambda_from_kappa(kappa)
}

pub(crate) fn lambda_from_kappa(kappa: f64) -> f64 {
    if kappa > 1e12 {
        // Ratio -> 1 - 1/(2 kappa); avoids cancellation in the expansion.
        return 1.0 - 0.25 / kappa;
    }
    let (i0, i1) = bessel_i01_scaled(kappa);
    i1 / (2.0 * i0) + 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fiber_transmissivity_examples() {
        assert_eq!(fiber_transmissivity(0.0, 0.542), 1.0);
        assert_relative_eq!(fiber_transmissivity(17.0 * 0.542, 0.542), (-17.0f64).exp());
        assert_relative_eq!(fiber_transmissivity(0.542, 0.542), (-1.0f64).exp());
    }

    #[test]
    fn window_capture_examples() {
        let p = HardwareParameters::table1();
        // Quadrature oracle of the exponential emission density over
        // [1.28, 31.28] ns with tau = 6.48 ns.
        assert_relative_eq!(window_capture(30e-9, &p), 0.81274557702853922, epsilon = 1e-12);
        let mut open = p.clone();
        open.t_w_offset = 0.0;
        assert_relative_eq!(window_capture(1.0, &open), 1.0, epsilon = 1e-15);
        assert!(window_capture(1e-15, &p) < 1e-6);
        // Monotone in t_w and bounded by the offset survival probability.
        let cap = (-p.t_w_offset / p.tau).exp();
        let mut last = 0.0;
        for ns in 1..=60 {
            let v = window_capture(ns as f64 * 1e-9, &p);
            assert!(v > last && v < cap);
            last = v;
        }
    }

    #[test]
    fn redefined_detector_efficiency_bounded() {
        let p = HardwareParameters::table1();
        for ns in 1..=100 {
            let budget = LinkBudget::new(10.0, ns as f64 * 1e-9, &p).unwrap();
            assert!(p.p_det * budget.p_in <= p.p_det);
            assert!(budget.eta_total <= budget.p_app_prime);
        }
    }

    #[test]
    fn dark_count_examples() {
        assert_eq!(dark_count_probability(5e-9, 0.0), 0.0);
        // Series oracle for 1 - e^{-5e-8}.
        assert_relative_eq!(dark_count_probability(5e-9, 10.0), 4.9999998750000021e-8, epsilon = 1e-22);
        assert_relative_eq!(dark_count_probability(1e9, 10.0), 1.0);
    }

    #[test]
    fn squash_examples() {
        for proto in [Protocol::Bb84, Protocol::SixState] {
            assert_relative_eq!(squash_depolarizing(proto, 0.3, 0.5, 0.0), 1.0, epsilon = 1e-15);
            assert_eq!(squash_depolarizing(proto, 0.3, 0.5, 1.0), 0.0);
        }
        // Direct evaluation oracle at eta p' = 1e-6, p_d = 5e-8.
        assert_relative_eq!(
            squash_depolarizing(Protocol::Bb84, 1e-6, 1.0, 5e-8),
            0.90909094834710903,
            epsilon = 1e-12
        );
    }

    #[test]
    fn click_probability_examples() {
        assert_relative_eq!(click_probability(Protocol::Bb84, 0.25, 0.5, 0.0), 0.125);
        // Binomial expansion oracle for 1 - (1 - 5e-8)^6.
        assert_relative_eq!(
            click_probability(Protocol::SixState, 0.0, 0.5, 5e-8),
            2.999999625000025e-7,
            epsilon = 1e-20
        );
        assert_eq!(click_probability(Protocol::Bb84, 1.0, 1.0, 0.3), 1.0);
    }

    #[test]
    fn squash_and_click_match_bernoulli_enumeration() {
        // Brute force over detector outcome tuples: the signal photon lands in
        // one designated detector with probability eta p'; each of the k
        // detectors independently dark-counts with probability p_d.
        let enumerate = |k: u32, signal: f64, p_d: f64| -> (f64, f64) {
            let mut p_click = 0.0;
            let mut p_single_signal = 0.0;
            for photon in [false, true] {
                let wp = if photon { signal } else { 1.0 - signal };
                for mask in 0..(1u32 << k) {
                    let darks = mask.count_ones();
                    let wm = p_d.powi(darks as i32) * (1.0 - p_d).powi((k - darks) as i32);
                    let clicked = photon || darks > 0;
                    if clicked {
                        p_click += wp * wm;
                    }
                    // Squashing keeps full fidelity only when exactly the
                    // signal detector fired and no dark count occurred.
                    if photon && darks == 0 {
                        p_single_signal += wp * wm;
                    }
                }
            }
            (p_click, p_single_signal / p_click)
        };
        let mut idx = 0u32;
        for i in 0..10 {
            for j in 0..10 {
                for l in 0..10 {
                    idx += 1;
                    let eta = i as f64 / 9.0;
                    let p_app = 0.05 + 0.9 * j as f64 / 9.0;
                    let p_d = l as f64 / 9.0 * 0.4;
                    for proto in [Protocol::Bb84, Protocol::SixState] {
                        let k = proto.detector_count();
                        let (click_ref, alpha_ref) = enumerate(k, eta * p_app, p_d);
                        assert_relative_eq!(
                            click_probability(proto, eta, p_app, p_d),
                            click_ref,
                            epsilon = 1e-12,
                            max_relative = 1e-12
                        );
                        if click_ref > 0.0 {
                            // alpha numerator uses (1-p_d)^(k-1): the signal
                            // detector's own dark count is indistinguishable.
                            let alpha = squash_depolarizing(proto, eta, p_app, p_d);
                            let expected = eta * p_app * (1.0 - p_d).powi(k as i32 - 1) / click_ref;
                            assert_relative_eq!(alpha, expected, epsilon = 1e-12, max_relative = 1e-12);
                            assert!(alpha <= alpha_ref / (1.0 - p_d).min(1.0) + 1e-12);
                        }
                    }
                }
            }
        }
        assert_eq!(idx, 1000);
    }

    #[test]
    fn phase_dephasing_examples() {
        assert_relative_eq!(phase_dephasing_parameter(1e6), 0.5, epsilon = 1e-9);
        assert_eq!(phase_dephasing_parameter(0.0), 1.0);
        assert!(phase_dephasing_parameter(1e-9) > 1.0 - 1e-12);
        // Bessel power-series oracle at kappa = 1/(14.3 deg)^2 = 16.0536.
        assert_relative_eq!(
            phase_dephasing_parameter(14.3f64.to_radians()),
            0.98416787831329246,
            epsilon = 1e-12
        );
    }

    #[test]
    fn lambda_matches_high_precision_grid() {
        // High-precision Bessel oracle values for kappa in [1e-3, 1e4].
        let grid = [
            (1e-3, 0.50024999996875001),
            (0.1, 0.52496880199396946),
            (1.0, 0.72319498294826725),
            (5.0, 0.94669156852204261),
            (15.0, 0.98303478199325406),
            (50.0, 0.99497448368924888),
            (1e4, 0.99997499937493749),
        ];
        for (kappa, expected) in grid {
            assert_relative_eq!(lambda_from_kappa(kappa), expected, max_relative = 1e-10);
        }
    }

    #[test]
    fn bessel_branch_switchover_consistent() {
        // Force both branches just around kappa = 15.
        let below = lambda_from_kappa(15.0);
        let above = lambda_from_kappa(15.0000001);
        // Oracle value at 15.0000001: 0.98303478210850206.
        assert_relative_eq!(above, 0.98303478210850206, max_relative = 1e-12);
        assert_relative_eq!(below, 0.98303478199325406, max_relative = 1e-12);
    }

    #[test]
    fn lambda_monotone_decreasing_in_delta_phi() {
        let mut last = 1.0;
        for i in 1..200 {
            let dphi = i as f64 * 0.01;
            let v = phase_dephasing_parameter(dphi);
            assert!(v < last && v > 0.5);
            last = v;
        }
    }

    #[test]
    fn parameter_file_roundtrip_and_overrides() {
        let p = HardwareParameters::table1();
        let text = p.to_key_value_text();
        let mut q = HardwareParameters::table1();
        q.f_m = 0.0;
        q.apply_overrides(&text).unwrap();
        assert_eq!(p, q);

        let mut r = HardwareParameters::table1();
        r.apply_overrides("F_m = 0.98 # telecom\nL0 = 22\n").unwrap();
        assert_eq!(r.f_m, 0.98);
        assert_eq!(r.l0, 22.0);
        assert_eq!(r.p_ce, p.p_ce);

        assert!(HardwareParameters::table1().apply_overrides("bogus = 1").is_err());
        assert!(HardwareParameters::table1().apply_overrides("F_m = 1.5").is_err());
    }

    #[test]
    fn table1_validates() {
        HardwareParameters::table1().validate().unwrap();
    }
}
