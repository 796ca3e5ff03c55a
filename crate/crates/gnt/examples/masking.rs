//! Split p-values into a masked part and a bit, then reassemble them.

use gnt_core::masking::{mask, mean_independence_check, unmask};
use gnt_core::MaskScheme;

fn main() -> gnt_core::Result<()> {
    let schemes = [MaskScheme::Tent, MaskScheme::Railway, MaskScheme::Calibrator { c: 0.4 }, MaskScheme::CalibratorMixture];
    for scheme in schemes {
        println!("{scheme:?}");
        for p in [0.001, 0.2, 0.5, 0.9] {
            let pair = mask(p, scheme)?;
            println!("  p={p:<6} masked={:.4} bit={:+.4} unmasked={:.6}", pair.masked, pair.bit, unmask(pair, scheme)?);
        }
        let gap = mean_independence_check(scheme, 200_000, 7)?;
        println!("  largest conditional-mean gap of the bit under uniform p: {gap:.4}");
    }
    Ok(())
}
