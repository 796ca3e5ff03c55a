//! Monte-Carlo crossing rates of null random walks against uniform boundaries.

use gnt_core::boundaries::{Boundary, BoundaryFamily, BoundarySpec, BoundaryTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

const WALKS: usize = 10_000;
const HORIZON: u64 = 10_000;
const ALPHA: f64 = 0.05;

fn allowance(alpha: f64) -> f64 {
    alpha + 3.0 * (alpha * (1.0 - alpha) / WALKS as f64).sqrt()
}

fn table(spec: BoundarySpec) -> BoundaryTable {
    spec.compile().unwrap().tabulate(HORIZON)
}

// Fraction of walks crossing each boundary somewhere in 1..=HORIZON.
fn crossing_rates<F>(tables: &[BoundaryTable], seed: u64, mut step: F) -> Vec<f64>
where
    F: FnMut(&mut ChaCha8Rng) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0usize; tables.len()];
    for _ in 0..WALKS {
        let mut crossed = vec![false; tables.len()];
        let mut left = tables.len();
        let mut s = 0.0;
        for k in 1..=HORIZON {
            s += step(&mut rng);
            for (j, t) in tables.iter().enumerate() {
                if !crossed[j] && s > t.value(k) {
                    crossed[j] = true;
                    left -= 1;
                }
            }
            if left == 0 {
                break;
            }
        }
        for (h, c) in hits.iter_mut().zip(&crossed) {
            *h += usize::from(*c);
        }
    }
    hits.into_iter().map(|h| h as f64 / WALKS as f64).collect()
}

#[test]
fn gaussian_walks_respect_gaussian_boundaries() {
    let specs = [
        BoundarySpec::gaussian_linear(ALPHA, HORIZON as f64 / 4.0),
        BoundarySpec::gaussian_stitched(ALPHA),
        BoundarySpec::new(BoundaryFamily::GaussianDiscreteMixture, ALPHA),
        BoundarySpec::new(BoundaryFamily::GaussianInvertedStitching, ALPHA).with_horizon(HORIZON),
    ];
    let tables: Vec<BoundaryTable> = specs.iter().map(|s| table(*s)).collect();
    let rates = crossing_rates(&tables, 11, |r| r.sample::<f64, _>(StandardNormal));
    for (spec, rate) in specs.iter().zip(&rates) {
        println!("{:<28} crossing rate {rate:.4}", spec.family.name());
        assert!(*rate <= allowance(ALPHA), "{} rate {rate}", spec.family.name());
    }
}

#[test]
fn centered_chi_square_two_walks_respect_fisher_boundaries() {
    let specs = [
        BoundarySpec::linear(BoundaryFamily::ExpLinear, ALPHA, HORIZON as f64 / 4.0),
        BoundarySpec::new(BoundaryFamily::GammaCurved, ALPHA),
    ];
    let tables: Vec<BoundaryTable> = specs.iter().map(|s| table(*s)).collect();
    // -2 log U is exponential with mean 2.
    let rates = crossing_rates(&tables, 12, |r| 2.0 * r.sample::<f64, _>(Exp1) - 2.0);
    for (spec, rate) in specs.iter().zip(&rates) {
        println!("{:<28} crossing rate {rate:.4}", spec.family.name());
        assert!(*rate <= allowance(ALPHA), "{} rate {rate}", spec.family.name());
    }
}

#[test]
fn centered_chi_square_one_walks_respect_chi_square_boundaries() {
    let specs = [
        BoundarySpec::linear(BoundaryFamily::ChiSqExpLinear, ALPHA, HORIZON as f64 / 4.0),
        BoundarySpec::new(BoundaryFamily::ChiSqGammaCurved, ALPHA),
    ];
    let tables: Vec<BoundaryTable> = specs.iter().map(|s| table(*s)).collect();
    let rates = crossing_rates(&tables, 13, |r| r.sample::<f64, _>(StandardNormal).powi(2) - 1.0);
    for (spec, rate) in specs.iter().zip(&rates) {
        println!("{:<28} crossing rate {rate:.4}", spec.family.name());
        assert!(*rate <= allowance(ALPHA), "{} rate {rate}", spec.family.name());
    }
}

#[test]
fn linear_boundary_is_nearly_tight_at_its_tuning_point() {
    // The walk started at zero has a real chance of crossing a line tuned to
    // the horizon; the rate is far from zero, so the test above has teeth.
    let tables = [table(BoundarySpec::gaussian_linear(0.2, HORIZON as f64 / 4.0))];
    let rate = crossing_rates(&tables[..], 14, |r| r.sample::<f64, _>(StandardNormal))[0];
    assert!(rate > 0.02 && rate <= allowance(0.2), "rate {rate}");
}
