//! Carbon-spin storage decoherence: attempt-dependent dephasing and
//! depolarizing parameters and their truncated-geometric averages over the
//! number of entanglement attempts served while the memory holds a qubit.

use crate::error::{Error, Result};
use crate::photonics::HardwareParameters;
use crate::state::QuantumChannel;

/// Attempt cutoff n*: the memory is reset after this many failed attempts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cutoff {
    Finite(u64),
    Infinite,
}

impl Cutoff {
    pub fn validate(self) -> Result<()> {
        if let Cutoff::Finite(n) = self {
            if n == 0 {
                return Err(Error::invalid_parameter("n_star", "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Per-attempt decay rates of the carbon memory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryDecay {
    /// Dephasing rate per attempt.
    pub a: f64,
    /// Depolarizing rate per attempt.
    pub b: f64,
    /// Signal travel length per attempt (km) that entered the rates.
    pub l_s: f64,
}

impl MemoryDecay {
    pub fn lambda1(&self, n: f64) -> f64 {
        (1.0 + (-self.a * n).exp()) / 2.0
    }

    pub fn lambda2(&self, n: f64) -> f64 {
        (-self.b * n).exp()
    }

    /// Dephasing-then-depolarizing pair after n attempts.
    pub fn storage_channel(&self, n: f64) -> [QuantumChannel; 2] {
        storage_channels(self.lambda1(n), self.lambda2(n))
    }

    /// Effective (lambda1, lambda2) averaged over the truncated-geometric
    /// attempt count with success probability `p_b` and cutoff `n_star`.
    ///
    /// The averaged state is dephasing(l1_eff) then depolarizing(l2_eff) with
    /// l2_eff = <e^(-bn)> and l1_eff = (1 + <e^(-(a+b)n)> / <e^(-bn)>) / 2,
    /// because the average acts linearly on the exponentials, not on the
    /// lambda parameters themselves.
    pub fn averaged_lambdas(&self, p_b: f64, n_star: Cutoff) -> Result<(f64, f64)> {
        let m_b = averaged_exponential(self.b, p_b, n_star)?;
        let m_ab = averaged_exponential(self.a + self.b, p_b, n_star)?;
        Ok(((1.0 + m_ab / m_b) / 2.0, m_b))
    }
}

/// a = a0 + a1 (L_s n_ri / c + t_prep), and likewise for b.
pub fn decay_rates(params: &HardwareParameters, l_s: f64) -> Result<MemoryDecay> {
    if l_s < 0.0 {
        return Err(Error::invalid_parameter("L_s", "must be nonnegative"));
    }
    let attempt_time = l_s * params.n_ri / params.c_vacuum + params.t_prep;
    Ok(MemoryDecay {
        a: params.a0 + params.a1 * attempt_time,
        b: params.b0 + params.b1 * attempt_time,
        l_s,
    })
}

pub fn storage_channels(lambda1: f64, lambda2: f64) -> [QuantumChannel; 2] {
    [
        QuantumChannel::Dephasing(lambda1),
        QuantumChannel::Depolarizing { lambda: lambda2, dim: 2 },
    ]
}

/// <e^(-c n)> over n ~ Geometric(p_b) truncated at n_star (conditioned on
/// success within the cutoff).
pub fn averaged_exponential(c_rate: f64, p_b: f64, n_star: Cutoff) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_b) || p_b == 0.0 {
        return Err(Error::invalid_parameter("p_B", "must be in (0, 1]"));
    }
    if c_rate < 0.0 {
        return Err(Error::invalid_parameter("c_rate", "must be nonnegative"));
    }
    n_star.validate()?;
    let ln_q = (-p_b).ln_1p();
    let e = (-c_rate).exp();
    // 1 - q e^(-c) via expm1 so tiny p_b stays exact.
    let geo = -(ln_q - c_rate).exp_m1();
    match n_star {
        Cutoff::Infinite => Ok(p_b * e / geo),
        Cutoff::Finite(n) => {
            let nf = n as f64;
            let miss = -(nf * ln_q).exp_m1();
            let miss_decayed = -(nf * (ln_q - c_rate)).exp_m1();
            Ok(p_b * e * miss_decayed / (miss * geo))
        }
    }
}

/// Gate and measurement depolarizing fidelities entering the swap and Bell
/// measurement steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateNoise {
    /// Entanglement-swap gate factor F_g^2.
    pub f_swap: f64,
    /// Bell-measurement gate factor F_g^2.
    pub f_bell_gate: f64,
    /// Bell-measurement readout factor F_m^2.
    pub f_bell_meas: f64,
    /// Aggregate swap plus Bell measurement factor F_g^4 F_m^2.
    pub f_gm: f64,
}

impl GateNoise {
    pub fn from_params(params: &HardwareParameters) -> Self {
        let g2 = params.f_g * params.f_g;
        let m2 = params.f_m * params.f_m;
        GateNoise {
            f_swap: g2,
            f_bell_gate: g2,
            f_bell_meas: m2,
            f_gm: g2 * g2 * m2,
        }
    }
}
