//! Event-level Monte-Carlo simulation of the single-photon link and of the
//! cutoff/restart process. Serves as an independent brute-force cross-check
//! of the closed-form yields, error rates and expected channel uses.
//!
//! Sampling procedure for the optical Bell measurement: conditional on
//! exactly one photon surviving to the station, the detectors click left or
//! right with probability 1/2 each. Conditional on two survivors the input
//! is |11> on the photonic modes; the measurement operators capture it with
//! amplitude 1/sqrt(2) each (the photons bunch), so again left and right
//! click with probability 1/2 each and a no-click never occurs. Dark counts
//! are overlaid independently per detector and both-click events are
//! rejected, matching the non-photon-number-resolving model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::memory::Cutoff;
use crate::single_photon::SinglePhotonLink;

/// Number of independent RNG shards; results are deterministic for a fixed
/// seed because the shard count and per-shard streams are fixed.
pub const SHARDS: u64 = 64;

/// Sample mean together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    fn proportion(successes: u64, n: u64) -> Self {
        if n == 0 {
            return Estimate { mean: 0.0, std_err: f64::INFINITY };
        }
        let p = successes as f64 / n as f64;
        Estimate { mean: p, std_err: (p * (1.0 - p) / n as f64).sqrt() }
    }

    /// True when `reference` lies within `sigmas` standard errors of the mean.
    pub fn agrees_with(&self, reference: f64, sigmas: f64) -> bool {
        (self.mean - reference).abs() <= sigmas * self.std_err
    }
}

/// Estimated yield and error rates of the post-selected two-spin state with
/// noiseless readout (measurement depolarizing parameter 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonEstimates {
    pub yield_y: Estimate,
    pub e_z: Estimate,
    pub e_xy: Estimate,
}

/// Detector response of one heralding attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClickPattern {
    Left,
    Right,
    None,
    Both,
}

/// Classical record of one heralding attempt. Tuple order is (Alice side,
/// Bob side) for the emitters and (left, right) for the detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub click_pattern: ClickPattern,
    pub emitted: (bool, bool),
    pub survived: (bool, bool),
    pub dark: (bool, bool),
}

impl TrialOutcome {
    /// Accepted heralding events: exactly one detector clicked.
    pub fn accepted(&self) -> bool {
        matches!(self.click_pattern, ClickPattern::Left | ClickPattern::Right)
    }
}

/// Samples one heralding attempt: emission with probability cos^2(theta)
/// per side (the emitting spin ends up), arm survival with probability eta,
/// beam-splitter interference, and dark counts.
pub fn sample_trial<R: Rng>(link: &SinglePhotonLink, rng: &mut R) -> TrialOutcome {
    let c2 = link.theta.cos().powi(2);
    let emitted = (rng.random::<f64>() < c2, rng.random::<f64>() < c2);
    let survived = (
        emitted.0 && rng.random::<f64>() < link.eta,
        emitted.1 && rng.random::<f64>() < link.eta,
    );
    let true_click = if survived.0 || survived.1 {
        // One survivor: 1/2 each side. Two survivors bunch: again 1/2 each.
        if rng.random::<f64>() < 0.5 {
            (true, false)
        } else {
            (false, true)
        }
    } else {
        (false, false)
    };
    let dark = (rng.random::<f64>() < link.p_d, rng.random::<f64>() < link.p_d);
    let left = true_click.0 || dark.0;
    let right = true_click.1 || dark.1;
    let click_pattern = match (left, right) {
        (true, false) => ClickPattern::Left,
        (false, true) => ClickPattern::Right,
        (false, false) => ClickPattern::None,
        (true, true) => ClickPattern::Both,
    };
    TrialOutcome { click_pattern, emitted, survived, dark }
}

/// For an accepted trial, samples whether a Z-basis and an X-basis readout
/// of the two spins would register an error against the Psi+ target.
///
/// Branches: zero survivors means a dark-count acceptance of a product
/// Z-eigenstate (up where a photon was emitted and lost), which errs in Z
/// when the spins agree and errs in X half the time. Double emission leaves
/// both spins up regardless of which photon heralded. A single emission
/// whose photon heralded is the coherent Bell branch a|Psi+> + b|Psi->; the
/// Psi- parity is the XOR of the two preparation dephasing flips and the
/// optical phase flip, and only flips the X outcome.
fn sample_errors<R: Rng>(link: &SinglePhotonLink, t: &TrialOutcome, rng: &mut R) -> (bool, bool) {
    debug_assert!(t.accepted());
    if !(t.survived.0 || t.survived.1) {
        (t.emitted.0 == t.emitted.1, rng.random::<f64>() < 0.5)
    } else if t.emitted.0 && t.emitted.1 {
        (true, rng.random::<f64>() < 0.5)
    } else {
        let parity = (rng.random::<f64>() >= link.f_prep)
            ^ (rng.random::<f64>() >= link.f_prep)
            ^ (rng.random::<f64>() >= link.lambda_phase);
        (false, parity)
    }
}

fn shard_rng(seed: u64, shard: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

/// Simulates `trials` heralding attempts and estimates the yield and the
/// post-selected QBERs. Deterministic for a fixed seed.
pub fn simulate_single_photon(
    link: &SinglePhotonLink,
    trials: u64,
    seed: u64,
) -> Result<SinglePhotonEstimates> {
    if trials < 10_000 {
        return Err(Error::InvalidArgument("trials must be at least 10^4".into()));
    }
    let per_shard = trials / SHARDS;
    let remainder = trials % SHARDS;
    let (accepted, z_err, x_err) = (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let mut rng = shard_rng(seed, shard);
            let n = per_shard + u64::from(shard < remainder);
            let mut counts = (0u64, 0u64, 0u64);
            for _ in 0..n {
                let t = sample_trial(link, &mut rng);
                if t.accepted() {
                    counts.0 += 1;
                    let (z, x) = sample_errors(link, &t, &mut rng);
                    counts.1 += u64::from(z);
                    counts.2 += u64::from(x);
                }
            }
            counts
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    Ok(SinglePhotonEstimates {
        yield_y: Estimate::proportion(accepted, trials),
        e_z: Estimate::proportion(z_err, accepted),
        e_xy: Estimate::proportion(x_err, accepted),
    })
}

/// Geometric draw: number of Bernoulli(p) attempts up to the first success.
fn geometric<R: Rng>(p: f64, rng: &mut R) -> f64 {
    if p >= 1.0 {
        return 1.0;
    }
    let u: f64 = rng.random();
    ((1.0 - u).ln() / (-p).ln_1p()).floor() + 1.0
}

/// Simulates the restart process: Alice attempts until her link heralds,
/// Bob then attempts up to n* times; on reaching the cutoff everything
/// restarts. Returns the mean total number of channel uses per delivered
/// pair, with its standard error over episodes.
pub fn simulate_restart_process(
    p_a: f64,
    p_b: f64,
    n_star: Cutoff,
    episodes: u64,
    seed: u64,
) -> Result<Estimate> {
    for (name, p) in [("p_a", p_a), ("p_b", p_b)] {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invalid_parameter(name, "must be in (0, 1]"));
        }
    }
    n_star.validate()?;
    if episodes < 10_000 {
        return Err(Error::InvalidArgument("episodes must be at least 10^4".into()));
    }
    let per_shard = episodes / SHARDS;
    let remainder = episodes % SHARDS;
    let (sum, sum_sq) = (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let mut rng = shard_rng(seed, shard);
            let n = per_shard + u64::from(shard < remainder);
            let mut acc = (0.0f64, 0.0f64);
            for _ in 0..n {
                let uses = sample_episode(p_a, p_b, n_star, &mut rng);
                acc.0 += uses;
                acc.1 += uses * uses;
            }
            acc
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = episodes as f64;
    let mean = sum / n;
    let var = ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0);
    Ok(Estimate { mean, std_err: (var / n).sqrt() })
}

fn sample_episode<R: Rng>(p_a: f64, p_b: f64, n_star: Cutoff, rng: &mut R) -> f64 {
    let mut uses = 0.0;
    loop {
        uses += geometric(p_a, rng);
        let k = geometric(p_b, rng);
        match n_star {
            Cutoff::Infinite => {
                uses += k;
                return uses;
            }
            Cutoff::Finite(m) => {
                let m = m as f64;
                if k <= m {
                    uses += k;
                    return uses;
                }
                uses += m;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::expected_channel_uses;
    use approx::assert_relative_eq;

    fn bare_link(theta: f64, eta: f64, lambda: f64, p_d: f64, f_prep: f64) -> SinglePhotonLink {
        SinglePhotonLink { theta, eta, lambda_phase: lambda, p_d, f_prep }
    }

    #[test]
    fn dark_counts_only_at_theta_pi_half() {
        let link = bare_link(std::f64::consts::FRAC_PI_2, 0.4, 0.98, 0.05, 0.99);
        let est = simulate_single_photon(&link, 400_000, 7).unwrap();
        let expected = 2.0 * 0.05 * (1.0 - 0.05);
        assert!(est.yield_y.agrees_with(expected, 4.0), "{est:?} vs {expected}");
        // No emissions, spins both down: every accepted event is a Z error.
        assert_eq!(est.e_z.mean, 1.0);
    }

    #[test]
    fn ideal_arms_at_theta_pi_quarter() {
        let link = bare_link(std::f64::consts::FRAC_PI_4, 1.0, 1.0, 0.0, 1.0);
        let est = simulate_single_photon(&link, 400_000, 11).unwrap();
        assert!(est.yield_y.agrees_with(0.75, 4.0), "{:?}", est.yield_y);
        assert!(est.yield_y.agrees_with(link.yield_probability(), 4.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let link = bare_link(0.9, 0.3, 0.98, 1e-4, 0.99);
        let a = simulate_single_photon(&link, 50_000, 42).unwrap();
        let b = simulate_single_photon(&link, 50_000, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_single_photon(&link, 50_000, 43).unwrap();
        assert!(a != c);
    }

    #[test]
    fn matches_closed_forms_at_a_generic_point() {
        let link = bare_link(0.8, 0.25, 0.9842, 2e-4, 0.99);
        let est = simulate_single_photon(&link, 2_000_000, 5).unwrap();
        let e = link.qber(1.0).unwrap();
        assert!(est.yield_y.agrees_with(link.yield_probability(), 4.0), "{:?}", est.yield_y);
        assert!(est.e_z.agrees_with(e.e_z, 4.0), "{:?} vs {}", est.e_z, e.e_z);
        assert!(est.e_xy.agrees_with(e.e_x, 4.0), "{:?} vs {}", est.e_xy, e.e_x);
    }

    #[test]
    fn rejects_too_few_trials() {
        let link = bare_link(0.8, 0.25, 0.98, 0.0, 0.99);
        assert!(simulate_single_photon(&link, 9_999, 1).is_err());
        assert!(simulate_restart_process(0.5, 0.5, Cutoff::Infinite, 9_999, 1).is_err());
    }

    #[test]
    fn restart_certain_links_use_exactly_two() {
        let est = simulate_restart_process(1.0, 1.0, Cutoff::Finite(1), 10_000, 3).unwrap();
        assert_eq!(est.mean, 2.0);
        assert_eq!(est.std_err, 0.0);
    }

    #[test]
    fn restart_matches_expected_channel_uses() {
        for (p_a, p_b, n_star, seed) in [
            (0.5, 0.5, Cutoff::Finite(1), 21u64),
            (0.3, 0.1, Cutoff::Finite(5), 22),
            (0.05, 0.2, Cutoff::Finite(3), 23),
            (0.4, 0.02, Cutoff::Infinite, 24),
        ] {
            let exact = expected_channel_uses(p_a, p_b, n_star).unwrap();
            let est = simulate_restart_process(p_a, p_b, n_star, 400_000, seed).unwrap();
            assert!(est.agrees_with(exact, 4.0), "{est:?} vs {exact}");
        }
    }

    #[test]
    fn restart_half_half_cutoff_one_is_six() {
        let est = simulate_restart_process(0.5, 0.5, Cutoff::Finite(1), 400_000, 9).unwrap();
        assert!(est.agrees_with(6.0, 4.0), "{est:?}");
    }

    #[test]
    fn huge_cutoff_reduces_to_sum_of_means() {
        let est = simulate_restart_process(0.2, 0.4, Cutoff::Finite(1_000_000), 200_000, 13).unwrap();
        assert!(est.agrees_with(1.0 / 0.2 + 1.0 / 0.4, 4.0), "{est:?}");
        let inf = simulate_restart_process(0.2, 0.4, Cutoff::Infinite, 200_000, 13).unwrap();
        assert_relative_eq!(est.mean, inf.mean, max_relative = 0.01);
    }
}
