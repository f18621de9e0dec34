//! Shared setup for the benchmark suite: small deterministic fixtures so the
//! timed bodies measure kernels, not construction.

use evodyn_core::{
    crowding_game, seeded_rng, simplex_point, MemorylessGame, PayoffMechanism, PayoffVector,
    PopulationState, RuleSpec, WashoutFilter,
};

pub fn fixture_state(n: usize) -> PopulationState {
    let mut rng = seeded_rng(0xbe9c);
    simplex_point(n, &mut rng)
}

pub fn fixture_payoffs(n: usize) -> PayoffVector {
    PayoffVector::new((0..n).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.8).collect()).expect("finite")
}

/// The flagship closed loop: crowding game behind the anticipatory filter.
pub fn washout_mechanism(n: usize) -> PayoffMechanism {
    let mut matrix = vec![vec![0.0; n]; n];
    for (i, row) in matrix.iter_mut().enumerate().skip(1) {
        row[i] = 1.0;
    }
    let mut offset = vec![0.0; n];
    offset[0] = -0.4;
    let filter = WashoutFilter::new(5.0, -1.0, matrix, offset).expect("filter");
    PayoffMechanism::washout(crowding_game(n), filter).expect("dissipative loop")
}

/// Dense symmetric game for the equilibrium-enumeration benchmark.
#[allow(clippy::needless_range_loop)] // symmetric fill needs both indices
pub fn symmetric_game(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = -1.0 + 0.3 * (((i * n + j) % 7) as f64 - 3.0) / 3.0;
            a[i][j] = v;
            a[j][i] = v;
        }
    }
    let b = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    (a, b)
}

pub fn rule_battery() -> Vec<(&'static str, RuleSpec)> {
    vec![
        ("smith", RuleSpec::smith()),
        ("replicator_smith", RuleSpec::replicator_smith()),
        ("composite_mix", RuleSpec::composite_mix()),
    ]
}

pub fn plain_crowding(n: usize) -> MemorylessGame {
    crowding_game(n)
}
