//! End-to-end scheme pipelines: SiSQuaRe, single photon, SPADS, SPOTL and
//! direct transmission. Each maps hardware parameters, a scheme
//! configuration and a distance to (yield, QBER, N_modes), and the rate
//! entry point runs the per-scheme protocol selection rule.

use crate::error::{Error, Result};
use crate::keyrate::{
    assemble_rate, bb84_oneway, sixstate_ad, symmetric_sifting, ExtractionBasis, QberTriple,
};
use crate::memory::{decay_rates, Cutoff, GateNoise};
use crate::photonics::{
    click_probability, squash_depolarizing, HardwareParameters, LinkBudget, Protocol,
};
use crate::single_photon::{qber_of_noisy_state, SinglePhotonLink};
use crate::state::{
    apply_channel, lift_operator, pauli_x, pauli_y, pauli_z, phi_minus, phi_plus,
    project_and_renormalize, psi_minus, psi_plus, DensityMatrix, QuantumChannel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    SiSquare,
    SinglePhoton,
    Spads,
    Spotl,
    Direct,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::SiSquare => "sisquare",
            Scheme::SinglePhoton => "single_photon",
            Scheme::Spads => "spads",
            Scheme::Spotl => "spotl",
            Scheme::Direct => "direct",
        }
    }

    /// Number of optical modes per channel use in the rate denominator.
    pub fn n_modes(self) -> u32 {
        match self {
            Scheme::SinglePhoton | Scheme::Spotl => 1,
            Scheme::SiSquare | Scheme::Spads | Scheme::Direct => 2,
        }
    }

    /// Fraction of the total distance between Alice and the repeater.
    pub fn default_position(self) -> f64 {
        match self {
            Scheme::Spads => 2.0 / 3.0,
            _ => 0.5,
        }
    }

    pub fn uses_theta(self) -> bool {
        matches!(self, Scheme::SinglePhoton | Scheme::Spads | Scheme::Spotl)
    }

    pub fn uses_cutoff(self) -> bool {
        matches!(self, Scheme::SiSquare | Scheme::Spads | Scheme::Spotl)
    }
}

/// QKD protocol selection rule applied on top of a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolChoice {
    Bb84AsymOneway,
    SixStateSymAd,
    SixStateAsymAd,
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub theta: f64,
    pub n_star: Cutoff,
    pub t_w: f64,
    /// Repeater position as a fraction of the total distance from Alice.
    pub position: f64,
    pub protocol: ProtocolChoice,
    /// Multiplies each arm's detection probability (frequency conversion).
    pub detection_scale: f64,
}

pub const T_W_MIN: f64 = 5e-9;
pub const T_W_MAX: f64 = 30e-9;

impl SchemeConfig {
    pub fn new(scheme: Scheme) -> Self {
        SchemeConfig {
            scheme,
            theta: std::f64::consts::FRAC_PI_4,
            n_star: Cutoff::Finite(1),
            t_w: T_W_MIN,
            position: scheme.default_position(),
            protocol: ProtocolChoice::Auto,
            detection_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scheme.uses_theta() && !(self.theta > 0.0 && self.theta <= std::f64::consts::FRAC_PI_2)
        {
            return Err(Error::invalid_parameter("theta", "must be in (0, pi/2]"));
        }
        self.n_star.validate()?;
        if !(T_W_MIN - 1e-15..=T_W_MAX + 1e-15).contains(&self.t_w) {
            return Err(Error::invalid_parameter("t_w", "must be in [5 ns, 30 ns]"));
        }
        if !(self.position > 0.0 && self.position < 1.0) {
            return Err(Error::invalid_parameter("position", "must be in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.detection_scale) {
            return Err(Error::invalid_parameter("detection_scale", "must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Raw physical output of a scheme pipeline before protocol post-processing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeOutput {
    pub yield_y: f64,
    pub qber: QberTriple,
    pub n_modes: u32,
}

/// One evaluated operating point of a scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub length_km: f64,
    pub yield_y: f64,
    pub qber: QberTriple,
    pub fraction: f64,
    pub n_modes: u32,
    pub rate: f64,
}

/// E[N_A + N_B] = 1 / (p_A (1 - (1-p_B)^n*)) + 1 / p_B.
pub fn expected_channel_uses(p_a: f64, p_b: f64, n_star: Cutoff) -> Result<f64> {
    for (name, p) in [("p_A", p_a), ("p_B", p_b)] {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invalid_parameter(name, "must be in (0, 1]"));
        }
    }
    n_star.validate()?;
    let reach = match n_star {
        Cutoff::Infinite => 1.0,
        Cutoff::Finite(n) => -((n as f64) * (-p_b).ln_1p()).exp_m1(),
    };
    Ok(1.0 / (p_a * reach) + 1.0 / p_b)
}

/// Bell projectors on the two middle qubits with the Pauli correction Bob
/// applies on each outcome so that the surviving state targets |Psi+>.
fn bell_outcomes() -> [(DensityMatrix, QuantumChannel); 4] {
    let x = QuantumChannel::CustomKraus(vec![pauli_x()]);
    let y = QuantumChannel::CustomKraus(vec![pauli_y()]);
    let z = QuantumChannel::CustomKraus(vec![pauli_z()]);
    let id = QuantumChannel::CustomKraus(vec![crate::state::identity(2)]);
    [
        (DensityMatrix::pure(&phi_plus()).unwrap(), x),
        (DensityMatrix::pure(&phi_minus()).unwrap(), y),
        (DensityMatrix::pure(&psi_plus()).unwrap(), id),
        (DensityMatrix::pure(&psi_minus()).unwrap(), z),
    ]
}

/// Applies the noisy Bell measurement on qubits (1, 2) of the 4-qubit state
/// (ordering A, QR carbon, QR electron, B) and returns the outcome
/// probabilities with the Pauli-corrected Alice-Bob states.
fn bell_swap_outcomes(
    rho: &DensityMatrix,
    gate: &GateNoise,
) -> Result<Vec<(f64, DensityMatrix)>> {
    // rho_fin = Fg^2 Fm^2 rho + Fg^2 (1 - Fm^2) Tr_e (x) I/2
    //         + (1 - Fg^2) Tr_QR (x) I/4,
    // realized as depolarizing(Fm^2) on the electron followed by
    // depolarizing(Fg^2) on the carbon-electron pair.
    let rho = apply_channel(
        rho,
        &QuantumChannel::Depolarizing { lambda: gate.f_bell_meas, dim: 2 },
        &[2],
    )?;
    let rho = apply_channel(
        &rho,
        &QuantumChannel::Depolarizing { lambda: gate.f_bell_gate, dim: 4 },
        &[1, 2],
    )?;
    let mut outcomes = Vec::with_capacity(4);
    for (bell, correction) in bell_outcomes() {
        let proj = lift_operator(bell.matrix(), &[1, 2], 4)?;
        let (state, weight) = project_and_renormalize(&rho, &proj)?;
        let state = match state {
            Some(s) => s,
            None => continue,
        };
        let ab = state.partial_trace(&[0, 3])?;
        let corrected = apply_channel(&ab, &correction, &[1])?;
        outcomes.push((weight, corrected));
    }
    Ok(outcomes)
}

fn weighted_qber(outcomes: &[(f64, DensityMatrix)]) -> QberTriple {
    let mut e = QberTriple { e_x: 0.0, e_y: 0.0, e_z: 0.0 };
    for (w, rho) in outcomes {
        let q = qber_of_noisy_state(rho);
        e.e_x += w * q.e_x;
        e.e_y += w * q.e_y;
        e.e_z += w * q.e_z;
    }
    e
}

/// |Psi+> pair with preparation dephasing F_prep (time-bin spin-photon state).
fn prepared_pair(f_prep: f64) -> Result<DensityMatrix> {
    let rho = DensityMatrix::pure(&psi_plus())?;
    apply_channel(&rho, &QuantumChannel::Dephasing(f_prep), &[0])
}

fn depolarize(rho: &DensityMatrix, lambda: f64, target: usize) -> Result<DensityMatrix> {
    apply_channel(rho, &QuantumChannel::Depolarizing { lambda, dim: 2 }, &[target])
}

fn dephase(rho: &DensityMatrix, lambda: f64, target: usize) -> Result<DensityMatrix> {
    apply_channel(rho, &QuantumChannel::Dephasing(lambda), &[target])
}

/// Storage decoherence averaged over the attempt distribution, applied to
/// the carbon qubit.
fn averaged_storage(
    rho: &DensityMatrix,
    params: &HardwareParameters,
    l_s: f64,
    p_b: f64,
    n_star: Cutoff,
    target: usize,
) -> Result<DensityMatrix> {
    let decay = decay_rates(params, l_s)?;
    let (l1, l2) = decay.averaged_lambdas(p_b, n_star)?;
    let rho = dephase(rho, l1, target)?;
    depolarize(&rho, l2, target)
}

/// SiSQuaRe: time-bin photon to Alice, swap, stored carbon serving Bob's
/// time-bin link, aggregate gate/measurement depolarizing F_g^4 F_m^2.
pub fn sisquare_rates(
    params: &HardwareParameters,
    config: &SchemeConfig,
    length_km: f64,
    protocol: Protocol,
) -> Result<SchemeOutput> {
    config.validate()?;
    let l_a = length_km * config.position;
    let l_b = length_km - l_a;
    let budget_a = LinkBudget::new(l_a, config.t_w, params)?;
    let budget_b = LinkBudget::new(l_b, config.t_w, params)?;
    let scale = config.detection_scale;
    let p_a = click_probability(protocol, budget_a.eta_f, budget_a.p_app_prime * scale, budget_a.p_d);
    let p_b = click_probability(protocol, budget_b.eta_f, budget_b.p_app_prime * scale, budget_b.p_d);
    let alpha_a = squash_depolarizing(protocol, budget_a.eta_f, budget_a.p_app_prime * scale, budget_a.p_d);
    let alpha_b = squash_depolarizing(protocol, budget_b.eta_f, budget_b.p_app_prime * scale, budget_b.p_d);
    if p_a <= 0.0 || p_b <= 0.0 {
        return Err(Error::ZeroYield);
    }

    let gate = GateNoise::from_params(params);
    // Both links carry the spin-photon preparation dephasing; all the states
    // in this pipeline are Bell diagonal, so single-qubit placement of each
    // channel is immaterial. The electron-carbon swap contributes F_g^2 and
    // the gate/measurement aggregate F_gm on top of it.
    let mut rho = prepared_pair(params.f_prep)?;
    rho = dephase(&rho, params.f_prep, 1)?;
    rho = depolarize(&rho, alpha_a, 0)?;
    rho = depolarize(&rho, gate.f_swap, 1)?;
    rho = averaged_storage(&rho, params, 2.0 * l_b, p_b, config.n_star, 1)?;
    rho = depolarize(&rho, alpha_b, 1)?;
    rho = depolarize(&rho, gate.f_gm, 1)?;

    let e_n = expected_channel_uses(p_a, p_b, config.n_star)?;
    Ok(SchemeOutput {
        yield_y: 1.0 / e_n,
        qber: qber_of_noisy_state(&rho),
        n_modes: 2,
    })
}

/// Single-photon scheme over the full distance with the heralding station
/// midway; both end spins are measured immediately with noise F_m.
pub fn single_photon_rates(
    params: &HardwareParameters,
    config: &SchemeConfig,
    length_km: f64,
) -> Result<SchemeOutput> {
    config.validate()?;
    let link = SinglePhotonLink::new(config.theta, length_km, config.t_w, params, config.detection_scale)?;
    let y = link.yield_probability();
    if y <= 0.0 {
        return Err(Error::ZeroYield);
    }
    Ok(SchemeOutput {
        yield_y: y,
        qber: link.qber(params.f_m)?,
        n_modes: 1,
    })
}

/// SPADS: single-photon link on Alice's side (two thirds of the distance),
/// swap into the carbon, time-bin transmission on Bob's side, noisy Bell
/// measurement in the middle node.
pub fn spads_rates(
    params: &HardwareParameters,
    config: &SchemeConfig,
    length_km: f64,
    protocol: Protocol,
) -> Result<SchemeOutput> {
    config.validate()?;
    let l_a = length_km * config.position;
    let l_b = length_km - l_a;
    let link_a = SinglePhotonLink::new(config.theta, l_a, config.t_w, params, config.detection_scale)?;
    let y_a = link_a.yield_probability();
    let budget_b = LinkBudget::new(l_b, config.t_w, params)?;
    let p_app_b = budget_b.p_app_prime * config.detection_scale;
    let p_b = click_probability(protocol, budget_b.eta_f, p_app_b, budget_b.p_d);
    let alpha_b = squash_depolarizing(protocol, budget_b.eta_f, p_app_b, budget_b.p_d);
    if y_a <= 0.0 || p_b <= 0.0 {
        return Err(Error::ZeroYield);
    }

    let gate = GateNoise::from_params(params);
    let mut rho_a = link_a.post_selected_state()?;
    rho_a = depolarize(&rho_a, gate.f_swap, 1)?;
    rho_a = averaged_storage(&rho_a, params, 2.0 * l_b, p_b, config.n_star, 1)?;
    let rho_b = prepared_pair(params.f_prep)?;
    let mut rho = rho_a.tensor(&rho_b);
    rho = depolarize(&rho, params.f_m, 0)?;
    rho = depolarize(&rho, alpha_b, 3)?;
    let outcomes = bell_swap_outcomes(&rho, &gate)?;

    let e_n = expected_channel_uses(y_a, p_b, config.n_star)?;
    Ok(SchemeOutput {
        yield_y: 1.0 / e_n,
        qber: weighted_qber(&outcomes),
        n_modes: 2,
    })
}

/// SPOTL: single-photon links on both sides of a middle repeater, swap,
/// storage decay, noisy Bell measurement, outcome-averaged QBER.
pub fn spotl_rates(
    params: &HardwareParameters,
    config: &SchemeConfig,
    length_km: f64,
) -> Result<SchemeOutput> {
    config.validate()?;
    let l_half = length_km * config.position;
    let link_a = SinglePhotonLink::new(config.theta, l_half, config.t_w, params, config.detection_scale)?;
    let link_b = SinglePhotonLink::new(
        config.theta,
        length_km - l_half,
        config.t_w,
        params,
        config.detection_scale,
    )?;
    let y_a = link_a.yield_probability();
    let y_b = link_b.yield_probability();
    if y_a <= 0.0 || y_b <= 0.0 {
        return Err(Error::ZeroYield);
    }

    let gate = GateNoise::from_params(params);
    let mut rho_a = link_a.post_selected_state()?;
    rho_a = depolarize(&rho_a, gate.f_swap, 1)?;
    // Heralding station halfway through Bob's sublink: L_s = L_B.
    rho_a = averaged_storage(&rho_a, params, length_km - l_half, y_b, config.n_star, 1)?;
    let rho_b = link_b.post_selected_state()?;
    let mut rho = rho_a.tensor(&rho_b);
    rho = depolarize(&rho, params.f_m, 0)?;
    rho = depolarize(&rho, params.f_m, 3)?;
    let outcomes = bell_swap_outcomes(&rho, &gate)?;

    let e_n = expected_channel_uses(y_a, y_b, config.n_star)?;
    Ok(SchemeOutput {
        yield_y: 1.0 / e_n,
        qber: weighted_qber(&outcomes),
        n_modes: 1,
    })
}

/// Direct transmission: Alice's spin-photon pair sent over the full fiber.
pub fn direct_transmission_rates(
    params: &HardwareParameters,
    config: &SchemeConfig,
    length_km: f64,
    protocol: Protocol,
) -> Result<SchemeOutput> {
    config.validate()?;
    let budget = LinkBudget::new(length_km, config.t_w, params)?;
    let p_app = budget.p_app_prime * config.detection_scale;
    let p_click = click_probability(protocol, budget.eta_f, p_app, budget.p_d);
    let alpha_b = squash_depolarizing(protocol, budget.eta_f, p_app, budget.p_d);
    if p_click <= 0.0 {
        return Err(Error::ZeroYield);
    }
    let mut rho = prepared_pair(params.f_prep)?;
    rho = depolarize(&rho, params.f_m, 0)?;
    rho = depolarize(&rho, alpha_b, 1)?;
    Ok(SchemeOutput {
        yield_y: p_click,
        qber: qber_of_noisy_state(&rho),
        n_modes: 2,
    })
}

/// Fraction from the measured-photon protocol rule: the better of fully
/// asymmetric one-way BB84 and the symmetric six-state protocol with
/// advantage distillation (the latter evaluated on its own pipeline since
/// the squashing parameters differ).
fn photonic_protocol_rate<F>(pipeline: F) -> Result<RateCandidate>
where
    F: Fn(Protocol) -> Result<SchemeOutput>,
{
    let out_bb84 = pipeline(Protocol::Bb84)?;
    let r_bb84 = bb84_oneway(&out_bb84.qber);
    let out_six = pipeline(Protocol::SixState)?;
    let r_xy = sixstate_ad(&out_six.qber, ExtractionBasis::Xy).unwrap_or(0.0);
    let r_z = sixstate_ad(&out_six.qber, ExtractionBasis::Z).unwrap_or(0.0);
    let r_six = symmetric_sifting(r_xy, r_xy, r_z);
    let cand_bb84 = RateCandidate::new(out_bb84, r_bb84);
    let cand_six = RateCandidate::new(out_six, r_six);
    Ok(if cand_bb84.rate >= cand_six.rate { cand_bb84 } else { cand_six })
}

struct RateCandidate {
    output: SchemeOutput,
    fraction: f64,
    rate: f64,
}

impl RateCandidate {
    fn new(output: SchemeOutput, fraction: f64) -> Self {
        let rate = assemble_rate(output.yield_y, fraction, output.n_modes);
        RateCandidate { output, fraction, rate }
    }
}

/// Fully asymmetric six-state AD fraction extracted in the basis with the
/// higher QBER.
pub fn asymmetric_ad_fraction(qber: &QberTriple) -> f64 {
    let r_z = sixstate_ad(qber, ExtractionBasis::Z).unwrap_or(0.0);
    let r_xy = sixstate_ad(qber, ExtractionBasis::Xy).unwrap_or(0.0);
    if qber.e_z >= qber.e_xy() {
        debug_assert!(r_z >= r_xy - 1e-9, "higher-QBER basis rule violated");
        r_z
    } else {
        debug_assert!(r_xy >= r_z - 1e-9, "higher-QBER basis rule violated");
        r_xy
    }
}

/// Evaluates one operating point, applying the per-scheme protocol rule.
pub fn scheme_rate(
    params: &HardwareParameters,
    config: &SchemeConfig,
    length_km: f64,
) -> Result<RatePoint> {
    params.validate()?;
    let candidate = match (config.scheme, config.protocol) {
        (Scheme::SiSquare, ProtocolChoice::Auto) => {
            photonic_protocol_rate(|p| sisquare_rates(params, config, length_km, p))?
        }
        (Scheme::Spads, ProtocolChoice::Auto) => {
            photonic_protocol_rate(|p| spads_rates(params, config, length_km, p))?
        }
        (Scheme::Direct, ProtocolChoice::Auto) => {
            photonic_protocol_rate(|p| direct_transmission_rates(params, config, length_km, p))?
        }
        (Scheme::SinglePhoton, ProtocolChoice::Auto) => {
            let out = single_photon_rates(params, config, length_km)?;
            let r = asymmetric_ad_fraction(&out.qber);
            RateCandidate::new(out, r)
        }
        (Scheme::Spotl, ProtocolChoice::Auto) => {
            let out = spotl_rates(params, config, length_km)?;
            let r = asymmetric_ad_fraction(&out.qber);
            RateCandidate::new(out, r)
        }
        (scheme, protocol) => forced_protocol_rate(params, config, length_km, scheme, protocol)?,
    };
    Ok(RatePoint {
        length_km,
        yield_y: candidate.output.yield_y,
        qber: candidate.output.qber,
        fraction: candidate.fraction,
        n_modes: candidate.output.n_modes,
        rate: candidate.rate,
    })
}

fn forced_protocol_rate(
    params: &HardwareParameters,
    config: &SchemeConfig,
    length_km: f64,
    scheme: Scheme,
    protocol: ProtocolChoice,
) -> Result<RateCandidate> {
    let physical = match protocol {
        ProtocolChoice::Bb84AsymOneway => Protocol::Bb84,
        _ => Protocol::SixState,
    };
    let out = match scheme {
        Scheme::SiSquare => sisquare_rates(params, config, length_km, physical)?,
        Scheme::Spads => spads_rates(params, config, length_km, physical)?,
        Scheme::Direct => direct_transmission_rates(params, config, length_km, physical)?,
        Scheme::SinglePhoton => single_photon_rates(params, config, length_km)?,
        Scheme::Spotl => spotl_rates(params, config, length_km)?,
    };
    let fraction = match protocol {
        ProtocolChoice::Bb84AsymOneway => bb84_oneway(&out.qber),
        ProtocolChoice::SixStateSymAd => {
            let r_xy = sixstate_ad(&out.qber, ExtractionBasis::Xy).unwrap_or(0.0);
            let r_z = sixstate_ad(&out.qber, ExtractionBasis::Z).unwrap_or(0.0);
            symmetric_sifting(r_xy, r_xy, r_z)
        }
        ProtocolChoice::SixStateAsymAd => asymmetric_ad_fraction(&out.qber),
        ProtocolChoice::Auto => unreachable!("auto handled by scheme_rate"),
    };
    Ok(RateCandidate::new(out, fraction))
}
