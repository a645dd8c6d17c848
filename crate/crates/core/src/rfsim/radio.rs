use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{build_dataset, FingerprintDataset};
use crate::geometry::Point;
use crate::planner::Cell;
use crate::scalar::Scalar;
use crate::scan::{aggregate_resamples, ScanEntry, ScanSnapshot};

use super::world::{AccessPointSim, SimWorld};
use super::SimError;

/// Separates independent noise streams derived from one seed.
#[derive(Debug, Clone, Copy)]
pub(crate) enum NoiseDomain {
    Scan = 1,
    Localizer = 2,
}

/// Counter-based generator: the same (seed, domain, counter) always yields the same draws.
pub(crate) fn noise_rng(seed: u64, domain: NoiseDomain, counter: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (domain as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(counter);
    rng
}

/// Mean received power (dBm) before shadowing and rounding.
pub fn expected_rssi<T: Scalar>(ap: &AccessPointSim<T>, position: Point<T>, reference_distance: T) -> T {
    let d = ap.position.distance(&position).max(reference_distance);
    ap.p0 - T::lit(10.0) * ap.path_loss_exponent * (d / reference_distance).log10()
}

/// One simulated scan at `position` for noise draw `draw`.
///
/// Every AP appears once, in world order, with RSSI rounded to whole dBm and
/// clamped to at most 0.
pub fn simulate_scan<T: Scalar>(
    world: &SimWorld<T>,
    position: Point<T>,
    seed: u64,
    draw: u64,
) -> Result<ScanSnapshot<T>, SimError> {
    let w = T::lit(world.map.width() as f64 * world.map.cell_size());
    let h = T::lit(world.map.height() as f64 * world.map.cell_size());
    if !(position.x >= T::zero() && position.x <= w && position.y >= T::zero() && position.y <= h) {
        return Err(SimError::OutOfBounds {
            x: position.x.to_f64_lossy(),
            y: position.y.to_f64_lossy(),
        });
    }
    let mut rng = noise_rng(seed, NoiseDomain::Scan, draw);
    let entries = world
        .aps
        .iter()
        .map(|ap| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let level = expected_rssi(ap, position, world.reference_distance) + ap.noise_sigma * T::lit(z);
            let rssi = level.round().to_f64_lossy().clamp(-200.0, 0.0) as i32;
            ScanEntry {
                mac: ap.mac.clone(),
                ssid: ap.ssid.clone(),
                rssi,
            }
        })
        .collect();
    Ok(ScanSnapshot::new(entries, Some(position)))
}

/// One aggregated, labeled row per cell, in row-major cell order.
///
/// Cell `i` (after sorting) uses draws `i * resamples .. (i + 1) * resamples`
/// from the world's seed.
pub fn generate_synthetic_dataset<T: Scalar>(
    world: &SimWorld<T>,
    cells: &[Cell],
    resamples: usize,
) -> Result<FingerprintDataset<T>, SimError> {
    if resamples == 0 {
        return Err(SimError::InvalidParameter("resamples must be >= 1".into()));
    }
    let mut ordered = cells.to_vec();
    ordered.sort_by_key(|c| (c.y, c.x));
    let mut rows = Vec::with_capacity(ordered.len());
    for (i, &cell) in ordered.iter().enumerate() {
        let center = world.map.cell_center(cell);
        let snaps = (0..resamples)
            .map(|r| simulate_scan(world, center, world.rng_seed, (i * resamples + r) as u64))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(aggregate_resamples(&snaps).expect("same location, unique MACs"));
    }
    Ok(build_dataset(&rows).expect("labeled snapshots with unique MACs"))
}
