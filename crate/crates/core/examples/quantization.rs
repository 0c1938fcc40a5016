//! How far an `N`-point quantization sits from its source, in `d₁`.
//!
//! Grid quantization of `U[0, 1]` attains exactly `1/(4N)`; sampling decays
//! like `N^{-1/2}`. The last columns estimate the grid distance from a large
//! resample, the route available when no closed form exists.

use mfo::quantize::{self, SourceDistribution};

fn main() -> mfo::Result<()> {
    for dist in [SourceDistribution::Uniform { a: 0.0, b: 1.0 }, SourceDistribution::Exponential { rate: 1.0 }] {
        println!("{dist:?}");
        println!("{:>6} {:>12} {:>12} {:>12} {:>10}", "N", "grid d1", "sample d1", "estimate", "stderr");
        for n in [4, 16, 64, 256] {
            let grid = quantize::quantize_grid(&dist, n)?;
            let exact = quantize::exact_d1_1d(&dist, &grid)?;
            let sample = quantize::exact_d1_1d(&dist, &quantize::quantize_sample(&dist, n, 7)?)?;
            let (est, se) = quantize::estimate_d1(&dist, &grid, 200 * n, 11)?;
            println!("{n:>6} {exact:>12.3e} {sample:>12.3e} {est:>12.3e} {se:>10.1e}");
        }
        println!();
    }
    Ok(())
}
