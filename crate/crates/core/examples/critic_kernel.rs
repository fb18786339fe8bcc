//! One transition pushed through each critic kernel by hand.
//!
//! Shows the sampled and expected targets, the clipped target and the
//! per-sample coefficients on grad Q and grad sigma, then what happens to
//! them when rewards are multiplied by 100.

use dsact::critic::{clip_target, compute_targets, grad_coeffs_dsact, update_boundary_scale};
use dsact::distributions::{sample_value, value_head};
use dsact::variants::{grad_coeff_sac, grad_coeffs_v1, DSACV1_BOUNDARY};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() {
    let mut r = ChaCha8Rng::seed_from_u64(0);
    let (gamma, alpha, logp_next) = (0.99, 0.2, -0.8);
    for scale in [1.0, 100.0] {
        let reward = -1.3 * scale;
        let next = value_head(-40.0 * scale, (2.0 * scale).ln());
        let (q, sigma) = (-41.0 * scale, 2.5 * scale);
        let z = sample_value(next, r.sample(StandardNormal));
        let (y_q, y_z) = compute_targets(reward, false, next.q, z, logp_next, alpha, gamma);

        // Boundary and scale after a cold start on this single sample.
        let (b, omega) = update_boundary_scale(0.0, 0.0, &[sigma], 1.0, 3.0).unwrap();
        let clipped = clip_target(y_z, q, b);
        let t = grad_coeffs_dsact(y_q, clipped, q, sigma, 0.0);
        let v1 = grad_coeffs_v1(y_z, clip_target(y_z, q, DSACV1_BOUNDARY), q, sigma);

        println!("reward scale {scale}");
        println!("  y_q {y_q:.3}  y_z {y_z:.3}  b {b:.2}  clipped {clipped:.3}");
        println!(
            "  refined  : omega*g_Q {:+.5}  omega*g_sigma {:+.5}",
            omega * t.g_q,
            omega * t.g_sigma
        );
        println!(
            "  fixed b  :       g_Q {:+.5}        g_sigma {:+.5}",
            v1.g_q, v1.g_sigma
        );
        println!("  mse      :       g_Q {:+.5}", grad_coeff_sac(y_q, q));
    }
    println!("the refined products grow linearly with the scale; the fixed-b ones shrink");
}
