//! Shared fixtures for unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, SiteGeometry};
use crate::mat::Mat;

/// Small random dataset with two patient covariates, two site covariates
/// (intercept + one), and tooth 0 missing for even patients.
pub(crate) fn toy_dataset(n: usize, teeth: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = SiteGeometry::default_for_teeth(teeth).unwrap();
    let j = g.site_count();
    let cells: Vec<Vec<Option<f64>>> = (0..n)
        .map(|i| {
            (0..j)
                .map(|site| {
                    if teeth > 1 && i % 2 == 0 && g.tooth_of(site) == 0 {
                        None
                    } else {
                        Some(rng.gen_range(-1.0..6.0))
                    }
                })
                .collect()
        })
        .collect();
    let x = Mat::from_rows(
        (0..n)
            .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(0.0..1.0)])
            .collect(),
    );
    let z = Mat::from_rows((0..j).map(|_| vec![1.0, rng.gen_range(-1.0..1.0)]).collect());
    Dataset::from_cells(&cells, x, z, g).unwrap()
}
