//! Deterministic fixtures shared by the benchmarks.

use qfs_core::geometry::{self, DistanceInterval, IntervalMode, Point};
use qfs_core::{pulses, PairMatrix, PhysicalConstants, RydbergSystem, ScheduleShape};

/// Cheap reproducible stream in [0, 1); keeps the fixtures dependency-free.
fn unit(seed: u64) -> f64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (z ^ (z >> 31)) as f64 / (u64::MAX as f64 + 1.0)
}

/// `cols` discretized columns of `rows` values with `levels` bins each.
pub fn columns(rows: usize, cols: usize, levels: u32) -> Vec<Vec<u32>> {
    (0..cols)
        .map(|c| {
            (0..rows)
                .map(|r| (unit((c * rows + r) as u64) * f64::from(levels)) as u32)
                .collect()
        })
        .collect()
}

/// Rescaled target distances for `n` features with random redundancy.
pub fn targets(n: usize) -> PairMatrix {
    let redundancy = PairMatrix::from_fn(n, |i, j| 0.5 * unit((i * 97 + j) as u64));
    let raw = geometry::raw_distance_matrix(&redundancy, geometry::default_floor(&redundancy));
    let r_b = geometry::blockade_radius(&PhysicalConstants::default());
    geometry::rescale_distances(&raw, DistanceInterval::for_blockade(r_b, IntervalMode::BlockadeFloor))
        .expect("positive distances")
}

/// `n` atoms on a square lattice at 1.2 blockade radii, driven by the
/// default program.
pub fn lattice_system(n: usize) -> RydbergSystem {
    let constants = PhysicalConstants::default();
    let pitch = 1.2 * geometry::blockade_radius(&constants);
    let side = (n as f64).sqrt().ceil() as usize;
    let positions: Vec<Point> = (0..n)
        .map(|i| [(i % side) as f64 * pitch, (i / side) as f64 * pitch])
        .collect();
    let weights: Vec<f64> = (0..n).map(|i| 1.0 - 0.5 * unit(i as u64)).collect();
    let program =
        pulses::build_default_program(&constants, &weights, pulses::DEFAULT_N_STEPS, &ScheduleShape::default())
            .expect("valid default program");
    RydbergSystem::new(positions, constants.c6, program, n).expect("within atom limit")
}
