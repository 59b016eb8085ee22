mod common;

use common::{chain_batch, chain_gap};
use ope_bench::learners::Algorithm;

#[test]
fn every_method_reaches_the_batch_fixed_point() {
    let batch = chain_batch(5, 200);
    for alg in Algorithm::ALL {
        for lambda in [0.0, 0.5, 1.0] {
            let gap = chain_gap(alg, lambda, &batch, 40_000);
            eprintln!("{alg} lambda={lambda}: {gap:.2e}");
            assert!(gap <= 1e-3, "{alg} lambda={lambda}: gap {gap}");
        }
    }
}
