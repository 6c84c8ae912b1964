//! The `validate` subcommand: Monte-Carlo oracle suite comparing the
//! event-level simulator against the closed-form single-photon link model
//! and the expected-channel-uses formula. Deterministic for a fixed seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use nvrep_core::mc::{simulate_restart_process, simulate_single_photon};
use nvrep_core::memory::Cutoff;
use nvrep_core::schemes::expected_channel_uses;
use nvrep_core::single_photon::SinglePhotonLink;

use crate::{CliError, ValidateArgs, EXIT_VALIDATION};

const LINK_POINTS: usize = 20;
const LINK_SIGMAS: f64 = 3.0;
const MAX_LINK_OUTLIERS: usize = 1;
const RESTART_SIGMAS: f64 = 4.0;

/// Random but seed-determined operating points across the physical region.
fn sample_points(seed: u64) -> Vec<SinglePhotonLink> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x6e76_7265_7021);
    (0..LINK_POINTS)
        .map(|_| SinglePhotonLink {
            theta: rng.random_range(0.3..std::f64::consts::FRAC_PI_2),
            eta: rng.random_range(0.02..0.9),
            lambda_phase: rng.random_range(0.9..1.0),
            p_d: rng.random_range(0.0..1e-4),
            f_prep: rng.random_range(0.95..1.0),
        })
        .collect()
}

pub fn cmd_validate(args: ValidateArgs) -> Result<u8, CliError> {
    if args.trials < 10_000 {
        return Err(CliError::config("--trials must be at least 10000"));
    }
    let mut failures = 0usize;
    let mut outliers = 0usize;

    println!("single-photon link: {LINK_POINTS} points, {} trials, seed {}", args.trials, args.seed);
    for (i, link) in sample_points(args.seed).iter().enumerate() {
        let est = simulate_single_photon(link, args.trials, args.seed.wrapping_add(i as u64))
            .map_err(CliError::from)?;
        let mut analytic_y = link.yield_probability();
        if args.tamper {
            analytic_y *= 1.05;
        }
        let qber = link.qber(1.0).map_err(CliError::from)?;
        let ok = est.yield_y.agrees_with(analytic_y, LINK_SIGMAS)
            && est.e_z.agrees_with(qber.e_z, LINK_SIGMAS)
            && est.e_xy.agrees_with(qber.e_x, LINK_SIGMAS);
        if !ok {
            outliers += 1;
        }
        println!(
            "point {i:2}: theta={:.4} eta={:.4} Y={:.6e} (analytic {:.6e}) e_z={:.5} ({:.5}) e_xy={:.5} ({:.5}) {}",
            link.theta,
            link.eta,
            est.yield_y.mean,
            analytic_y,
            est.e_z.mean,
            qber.e_z,
            est.e_xy.mean,
            qber.e_x,
            if ok { "ok" } else { "OUTLIER" }
        );
    }
    if outliers > MAX_LINK_OUTLIERS {
        println!("link suite: FAIL ({outliers} points beyond {LINK_SIGMAS} sigma)");
        failures += 1;
    } else {
        println!("link suite: pass ({outliers} outlier(s) tolerated)");
    }

    println!("restart process: {} episodes, {RESTART_SIGMAS} sigma", args.trials);
    for (i, (p_a, p_b, n_star)) in [
        (0.5, 0.5, Cutoff::Finite(1)),
        (0.2, 0.05, Cutoff::Finite(10)),
        (0.03, 0.3, Cutoff::Finite(3)),
        (0.1, 0.02, Cutoff::Infinite),
    ]
    .into_iter()
    .enumerate()
    {
        let exact = expected_channel_uses(p_a, p_b, n_star).map_err(CliError::from)?;
        let est = simulate_restart_process(p_a, p_b, n_star, args.trials, args.seed + 1000 + i as u64)
            .map_err(CliError::from)?;
        let ok = est.agrees_with(exact, RESTART_SIGMAS);
        println!(
            "restart {i}: p_A={p_a} p_B={p_b} n*={} E[N]={:.6} (exact {:.6}) {}",
            match n_star {
                Cutoff::Finite(n) => n.to_string(),
                Cutoff::Infinite => "inf".to_string(),
            },
            est.mean,
            exact,
            if ok { "ok" } else { "FAIL" }
        );
        if !ok {
            failures += 1;
        }
    }

    if failures > 0 {
        println!("validation: FAIL");
        Ok(EXIT_VALIDATION)
    } else {
        println!("validation: PASS");
        Ok(0)
    }
}
