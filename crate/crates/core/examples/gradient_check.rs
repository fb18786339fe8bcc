//! Backpropagation against central finite differences.

use dsact::numerics::Mlp;
use dsact::oracles::{finite_diff_grad, max_relative_error};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> dsact::Result<()> {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    for sizes in [vec![3, 8, 2], vec![4, 16, 16, 2], vec![2, 5, 1]] {
        let net = Mlp::new(&sizes, &mut r)?;
        let n = 6;
        let x = Array2::from_shape_simple_fn((n, sizes[0]), || r.gen_range(-2.0..2.0));
        let w = Array2::from_shape_simple_fn((n, *sizes.last().unwrap()), || r.gen_range(-1.0..1.0));

        // Objective sum(w * f(x)), so the output gradient is just w.
        let (_, cache) = net.forward(x.view())?;
        let (analytic, _) = net.backward(&cache, w.view())?;
        let numeric = finite_diff_grad(|p| (p.predict(x.view()).unwrap() * &w).sum(), &net, 1e-5);
        println!(
            "{sizes:?}: {} params, max relative error {:.2e}",
            net.num_params(),
            max_relative_error(&analytic, &numeric, 1e-6)
        );
    }
    Ok(())
}
