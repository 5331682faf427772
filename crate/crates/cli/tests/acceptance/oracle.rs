//! Monte-Carlo model of one round as a race of geometric trials. It uses
//! only `rand` draws and shares no code with the simulator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

/// Attempts up to and including the first success.
fn trials(g: &Geometric, rng: &mut ChaCha8Rng) -> u64 {
    g.sample(rng) + 1
}

/// Every node hashes until the first of them succeeds; all stop at once.
/// Returns `(duration, energy)`.
pub fn pow_round(rng: &mut ChaCha8Rng, n: u64, p: f64) -> (u64, u64) {
    let g = Geometric::new(p).unwrap();
    let d = (0..n).map(|_| trials(&g, rng)).min().unwrap();
    (d, n * d)
}

/// Each of the `n / N` teams runs `N` sequential stages at success
/// probability `min(N p, 1)`; one member hashes per tick, and every team
/// stops when the fastest finishes.
pub fn pots_round(rng: &mut ChaCha8Rng, n: u64, group_size: u64, p: f64) -> (u64, u64) {
    let g = Geometric::new((p * group_size as f64).min(1.0)).unwrap();
    let teams = n / group_size;
    let d = (0..teams).map(|_| (0..group_size).map(|_| trials(&g, rng)).sum::<u64>()).min().unwrap();
    (d, teams * d)
}

/// Expected PoTS energy over expected PoW energy, from `samples` rounds of
/// each.
pub fn energy_ratio(seed: u64, samples: u64, n: u64, group_size: u64, p: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut pots, mut pow) = (0u64, 0u64);
    for _ in 0..samples {
        pots += pots_round(&mut rng, n, group_size, p).1;
        pow += pow_round(&mut rng, n, p).1;
    }
    pots as f64 / pow as f64
}
