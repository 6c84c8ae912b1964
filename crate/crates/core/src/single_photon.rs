//! Single-photon scheme over one sublink: spin-photon state preparation,
//! optical phase dephasing, photon loss to the midway heralding station,
//! non-photon-number-resolving Bell measurement with dark counts, and the
//! resulting yield, accepted two-spin state and QBER.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::keyrate::QberTriple;
use crate::photonics::{
    dark_count_probability, fiber_transmissivity, phase_dephasing_parameter, window_capture,
    HardwareParameters,
};
use crate::state::{
    apply_channel, basis_ket, kron_vec, projector, psi_minus, psi_plus, x_kets, y_kets, CMat,
    DensityMatrix, QuantumChannel,
};

/// Spin labeling: spin-down maps to |0>, spin-up to |1>. The target two-spin
/// state is |Psi+> = (|01> + |10>)/sqrt(2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonLink {
    /// Emission angle of the spin-photon state.
    pub theta: f64,
    /// End-to-end single-arm detection probability p_ce p_zpl sqrt(eta_f) p'_det.
    pub eta: f64,
    /// Optical phase dephasing parameter.
    pub lambda_phase: f64,
    /// Dark-count probability per detector per window.
    pub p_d: f64,
    /// Spin-photon preparation dephasing fidelity.
    pub f_prep: f64,
}

impl SinglePhotonLink {
    /// Builds a link spanning `length_km` with the heralding station midway.
    /// `detection_scale` multiplies each arm's detection probability (1.0 for
    /// the native-wavelength setup; below 1 when frequency conversion is used).
    pub fn new(
        theta: f64,
        length_km: f64,
        t_w: f64,
        params: &HardwareParameters,
        detection_scale: f64,
    ) -> Result<Self> {
        if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::invalid_parameter("theta", "must be in (0, pi/2]"));
        }
        if !(0.0..=1.0).contains(&detection_scale) {
            return Err(Error::invalid_parameter("detection_scale", "must be in [0, 1]"));
        }
        let p_det_prime = params.p_det * window_capture(t_w, params);
        let eta = params.p_ce
            * params.p_zpl
            * fiber_transmissivity(length_km, params.l0).sqrt()
            * p_det_prime
            * detection_scale;
        Ok(SinglePhotonLink {
            theta,
            eta,
            lambda_phase: phase_dephasing_parameter(params.delta_phi),
            p_d: dark_count_probability(t_w, params.d),
            f_prep: params.f_prep,
        })
    }

    /// (p0, p1, p2): left click, right click, no click (without dark counts).
    pub fn outcome_probabilities(&self) -> (f64, f64, f64) {
        let c2 = self.theta.cos().powi(2);
        let p01 = self.eta * c2 * (1.0 - self.eta / 2.0 * c2);
        let p2 = (1.0 - self.eta * c2).powi(2);
        (p01, p01, p2)
    }

    /// Probability of registering a click in exactly one detector.
    pub fn yield_probability(&self) -> f64 {
        let (p0, p1, p2) = self.outcome_probabilities();
        (p0 + p1) * (1.0 - self.p_d) + 2.0 * p2 * self.p_d * (1.0 - self.p_d)
    }

    /// a, b: weights of |Psi+> and |Psi-> in the heralded Bell part.
    pub fn bell_weights(&self) -> (f64, f64) {
        let f = self.f_prep;
        let l = self.lambda_phase;
        let same = f * f + (1.0 - f) * (1.0 - f);
        let cross = 2.0 * f * (1.0 - f);
        (l * same + cross * (1.0 - l), (1.0 - l) * same + cross * l)
    }

    /// Heralded two-spin state rho_0 (single true click, dark-count free).
    pub fn heralded_state(&self) -> Result<DensityMatrix> {
        let (a, b) = self.bell_weights();
        let s2 = self.theta.sin().powi(2);
        let c2 = self.theta.cos().powi(2);
        let denom = 2.0 - self.eta * c2;
        let w_bell = 2.0 * s2 / denom;
        let w_up = c2 * (2.0 - self.eta) / denom;
        let psi_p = DensityMatrix::pure(&psi_plus())?;
        let psi_m = DensityMatrix::pure(&psi_minus())?;
        let up_up = DensityMatrix::pure(&basis_ket(4, 3))?;
        DensityMatrix::mixture(&[(w_bell * a, &psi_p), (w_bell * b, &psi_m), (w_up, &up_up)])
    }

    /// Separable no-click state rho_2 accepted through a dark count.
    pub fn no_click_state(&self) -> Result<DensityMatrix> {
        let s2 = self.theta.sin().powi(2);
        let c2 = self.theta.cos().powi(2);
        let norm = (1.0 - self.eta * c2).powi(2);
        let w00 = s2 * s2 / norm;
        let w_mixed = (1.0 - self.eta) * c2 * s2 / norm;
        let w11 = (1.0 - self.eta).powi(2) * c2 * c2 / norm;
        let kets: Vec<DensityMatrix> = (0..4)
            .map(|i| DensityMatrix::pure(&basis_ket(4, i)))
            .collect::<Result<_>>()?;
        DensityMatrix::mixture(&[
            (w00, &kets[0]),
            (w_mixed, &kets[1]),
            (w_mixed, &kets[2]),
            (w11, &kets[3]),
        ])
    }

    /// Accepted state after a single-detector click, dark counts included.
    pub fn post_selected_state(&self) -> Result<DensityMatrix> {
        let y = self.yield_probability();
        if y <= 0.0 {
            return Err(Error::ZeroYield);
        }
        let (p0, p1, p2) = self.outcome_probabilities();
        let w0 = (p0 + p1) * (1.0 - self.p_d) / y;
        let w2 = 2.0 * p2 * self.p_d * (1.0 - self.p_d) / y;
        let rho0 = self.heralded_state()?;
        let rho2 = self.no_click_state()?;
        DensityMatrix::mixture(&[(w0, &rho0), (w2, &rho2)])
    }

    /// QBER of the post-selected state after both spins are read out with
    /// depolarizing measurement noise F_m.
    pub fn qber(&self, f_m: f64) -> Result<QberTriple> {
        let rho = self.post_selected_state()?;
        qber_of_state(&rho, f_m)
    }
}

/// Applies depolarizing measurement noise F_m to each qubit, then reads the
/// QBER in the three bases against the |Psi+> target (anticorrelated in Z,
/// correlated in X and Y).
pub fn qber_of_state(rho: &DensityMatrix, f_m: f64) -> Result<QberTriple> {
    let noisy = apply_measurement_noise(rho, f_m)?;
    Ok(qber_of_noisy_state(&noisy))
}

/// F_m depolarizing on both qubits of a two-qubit state.
pub fn apply_measurement_noise(rho: &DensityMatrix, f_m: f64) -> Result<DensityMatrix> {
    let ch = QuantumChannel::Depolarizing { lambda: f_m, dim: 2 };
    apply_channel(&apply_channel(rho, &ch, &[0])?, &ch, &[1])
}

/// QBER projectors evaluated directly on a two-qubit state.
pub fn qber_of_noisy_state(rho: &DensityMatrix) -> QberTriple {
    let e_z = rho.expectation(&z_error_projector()).re;
    let e_x = rho.expectation(&x_error_projector()).re;
    let e_y = rho.expectation(&y_error_projector()).re;
    QberTriple { e_x, e_y, e_z }
}

/// |00><00| + |11><11| (Z-basis errors for a Psi+ target).
pub fn z_error_projector() -> CMat {
    projector(&basis_ket(4, 0)) + projector(&basis_ket(4, 3))
}

/// |+-><+-| + |-+><-+| (X-basis errors for a Psi+ target).
pub fn x_error_projector() -> CMat {
    let (plus, minus) = x_kets();
    projector(&kron_vec(&plus, &minus)) + projector(&kron_vec(&minus, &plus))
}

/// |0y 1y><0y 1y| + |1y 0y><1y 0y| (Y-basis errors for a Psi+ target).
pub fn y_error_projector() -> CMat {
    let (zero, one) = y_kets();
    projector(&kron_vec(&zero, &one)) + projector(&kron_vec(&one, &zero))
}

/// Measurement operators of the optical Bell measurement with
/// non-photon-number-resolving detectors, on the two photonic modes.
pub fn bell_povm() -> [CMat; 3] {
    let root_half = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let a0 = projector(&psi_plus()) + projector(&basis_ket(4, 3)) * root_half;
    let a1 = projector(&psi_minus()) + projector(&basis_ket(4, 3)) * root_half;
    let a2 = projector(&basis_ket(4, 0));
    [a0, a1, a2]
}
