//! Initial-data generation from the config spec (deterministic per seed).

use anyhow::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kslab_core::field::ScalarField;
use kslab_core::model::Params;
use kslab_core::spectral::SpectralOps;

use crate::config::InitSpec;

pub fn build_initial_data(
    spec: &InitSpec,
    params: &Params,
    seed_override: Option<u64>,
) -> anyhow::Result<ScalarField> {
    let grid = params.grid();
    match spec {
        InitSpec::Constant { value } => Ok(ScalarField::constant(grid, *value)),
        InitSpec::Bump {
            height,
            radius,
            center,
        } => Ok(ScalarField::from_fn(grid, |c| {
            let dx = c[0] - center;
            let r2 = (dx * dx + c[1] * c[1]) / (radius * radius);
            if r2 < 1.0 {
                height * (1.0 - 1.0 / (1.0 - r2)).exp()
            } else {
                0.0
            }
        })),
        InitSpec::RandomBand {
            lo,
            hi,
            seed,
            smoothing,
        } => {
            let seed = seed_override
                .or(*seed)
                .context("random-band initial data requires a seed")?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw = ScalarField::from_values(
                grid,
                (0..grid.len()).map(|_| rng.gen_range(0.0..1.0)).collect(),
            )
            .map_err(|e| anyhow::anyhow!(e))?;
            // smooth, then rescale exactly onto [lo, hi]
            let ops = SpectralOps::new(&grid);
            let tau = smoothing.unwrap_or(5.0 * grid.h * grid.h);
            let smooth = ops.diffuse(&raw, tau).map_err(|e| anyhow::anyhow!(e))?;
            let (mn, mx) = (smooth.min(), smooth.max());
            let span = (mx - mn).max(1e-300);
            Ok(smooth.map(|v| lo + (hi - lo) * (v - mn) / span))
        }
    }
}
