//! The canonical-form realization must reproduce the impulse response of the
//! difference equation it was assembled from, and its data-built state must
//! carry the current measurement in its first block.

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use pcac_core::bocf::{assemble_model, assemble_state, markov_parameters, ModelDims};

fn arx_impulse(theta: &DVector<f64>, nhat: usize, count: usize) -> Vec<f64> {
    // y_k = sum_i (-F_i y_{k-i} + G_i u_{k-i}) with a unit impulse at u_0.
    let mut h = vec![0.0f64; count + 1];
    for k in 1..=count {
        let mut y = 0.0;
        for i in 1..=nhat {
            if k >= i {
                y -= theta[i - 1] * h[k - i];
            }
            if k == i {
                y += theta[nhat + i - 1];
            }
        }
        h[k] = y;
    }
    h
}

#[test]
fn markov_parameters_match_difference_equation_on_fifty_draws() {
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nhat = rng.gen_range(2..8usize);
        let dims = ModelDims { nhat, p: 1, m: 1 };
        let theta = DVector::from_fn(dims.theta_len(), |_, _| rng.gen_range(-0.6..0.6));
        let (a, b, c) = assemble_model(&theta, &dims).unwrap();
        let count = 2 * nhat + 5;
        let markov = markov_parameters(&a, &b, &c, count);
        let h = arx_impulse(&theta, nhat, count);
        for (j, mk) in markov.iter().enumerate() {
            let diff = (mk[(0, 0)] - h[j + 1]).abs();
            assert!(
                diff < 1e-10,
                "seed {seed}, H_{}: realization {} vs recursion {}",
                j + 1,
                mk[(0, 0)],
                h[j + 1]
            );
        }
    }
}

#[test]
fn state_first_block_is_the_measurement_exactly() {
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let nhat = rng.gen_range(2..8usize);
        let dims = ModelDims { nhat, p: 1, m: 1 };
        let theta = DVector::from_fn(dims.theta_len(), |_, _| rng.gen_range(-5.0..5.0));
        let y = DVector::from_element(1, rng.gen_range(-1e6..1e6));
        let past: Vec<DVector<f64>> = (0..nhat)
            .map(|_| DVector::from_element(1, rng.gen_range(-1e3..1e3)))
            .collect();
        let x = assemble_state(&theta, &dims, &y, &past, &past).unwrap();
        // Bitwise equality: the first block is copied, not recomputed.
        assert_eq!(x[0], y[0]);
    }
}
