//! Brute-force grid cross-check of the equilibrium enumerator.
//!
//! Random symmetric 3-strategy affine games are generated so that every
//! equilibrium lands exactly on the 0.01 barycentric grid: pick an interior
//! grid point `x*`, a symmetric negative-definite matrix `A`, and set
//! `b = v·1 - A·x*` so that all payoffs tie at `x*`. A grid scan then accepts
//! points whose best-response gap is at most twice the numerical evaluation
//! noise, and the accepted set must match the enumerator's output in both
//! directions within 0.02.

use evodyn_core::nash_equilibria_affine;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GRID_STEPS: usize = 100;
/// Twice the worst observed floating-point residue of the gap evaluated at a
/// grid point where the payoffs tie exactly by construction (~1e-16); the
/// smallest gap at any non-equilibrium grid point in this family is ~1e-3.
const ACCEPT_GAP: f64 = 1e-12;
const MATCH_DIST: f64 = 0.02;

struct Game {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

fn gap(game: &Game, x: &[f64]) -> f64 {
    let n = x.len();
    let mut best = f64::NEG_INFINITY;
    let mut avg = 0.0;
    for i in 0..n {
        let f = game.b[i]
            + game.a[i]
                .iter()
                .zip(x)
                .map(|(aij, xj)| aij * xj)
                .sum::<f64>();
        best = best.max(f);
        avg += x[i] * f;
    }
    best - avg
}

/// True when some edge of the simplex carries an equilibrium strictly inside
/// the edge that does not sit on the grid. Solved directly from the 2x2
/// equal-payoff condition so the check is independent of the enumerator.
fn has_off_grid_edge_equilibrium(game: &Game) -> bool {
    for i in 0..3 {
        for j in (i + 1)..3 {
            let k = 3 - i - j;
            // x = t e_i + (1-t) e_j; payoff difference F_i - F_j is affine in t.
            let c1 = game.a[i][i] - game.a[j][i];
            let c0 = game.a[i][j] - game.a[j][j];
            let den = c1 - c0;
            if den.abs() < 1e-12 {
                continue;
            }
            let t = -(c0 + game.b[i] - game.b[j]) / den;
            if !(1e-9..=1.0 - 1e-9).contains(&t) {
                continue;
            }
            let fi = t * game.a[i][i] + (1.0 - t) * game.a[i][j] + game.b[i];
            let fk = t * game.a[k][i] + (1.0 - t) * game.a[k][j] + game.b[k];
            if fk <= fi + 1e-9 && (t * 100.0 - (t * 100.0).round()).abs() > 1e-7 {
                return true;
            }
        }
    }
    false
}

#[allow(clippy::needless_range_loop)] // symmetric fill needs both indices
fn random_grid_aligned_game(rng: &mut ChaCha8Rng) -> Game {
    for _ in 0..1000 {
        // Symmetric negative-definite payoff matrix A = -(I + W) with a small
        // symmetric perturbation W (Gershgorin keeps all eigenvalues below
        // -0.1, so the interior equilibrium is unique).
        let mut w = [[0.0_f64; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let e = rng.gen_range(-0.3..0.3);
                w[i][j] = e;
                w[j][i] = e;
            }
        }
        let mut a = vec![vec![0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = -w[i][j] - if i == j { 1.0 } else { 0.0 };
            }
        }
        // Interior grid point with every coordinate at least 0.05.
        let i = rng.gen_range(5..91_i64);
        let j = rng.gen_range(5..(96 - i));
        let xs = [
            i as f64 / 100.0,
            j as f64 / 100.0,
            (100 - i - j) as f64 / 100.0,
        ];
        // b = v·1 - A·x* makes all payoffs equal to v at x*.
        let v = rng.gen_range(-1.0..1.0);
        let mut b = vec![0.0; 3];
        for r in 0..3 {
            let mut ax = 0.0;
            for c in 0..3 {
                ax += a[r][c] * xs[c];
            }
            b[r] = v - ax;
        }
        let game = Game { a, b };
        if !has_off_grid_edge_equilibrium(&game) {
            return game;
        }
    }
    panic!("game generator failed to produce a grid-aligned game in 1000 draws");
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn enumerator_matches_grid_oracle_on_random_games() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6e61_7368);
    for g in 0..20 {
        let game = random_grid_aligned_game(&mut rng);
        let found = nash_equilibria_affine(&game.a, &game.b, 1e-9)
            .unwrap_or_else(|e| panic!("game {g}: enumerator failed: {e}"));
        assert!(
            !found.points.is_empty(),
            "game {g}: enumerator returned nothing"
        );
        assert!(!found.continuum, "game {g}: unexpected continuum flag");
        for r in &found.residuals {
            assert!(*r <= 1e-9, "game {g}: residual {r} above tolerance");
        }

        let mut accepted: Vec<[f64; 3]> = Vec::new();
        for i in 0..=GRID_STEPS {
            for j in 0..=(GRID_STEPS - i) {
                let x = [
                    i as f64 / 100.0,
                    j as f64 / 100.0,
                    (GRID_STEPS - i - j) as f64 / 100.0,
                ];
                if gap(&game, &x) <= ACCEPT_GAP {
                    accepted.push(x);
                }
            }
        }
        assert!(
            !accepted.is_empty(),
            "game {g}: grid oracle accepted nothing"
        );

        for ne in &found.points {
            let d = accepted
                .iter()
                .map(|p| dist(ne.entries(), p))
                .fold(f64::INFINITY, f64::min);
            assert!(
                d <= MATCH_DIST,
                "game {g}: returned equilibrium {:?} is {d:.4} from the nearest accepted grid point",
                ne.entries()
            );
        }
        for p in &accepted {
            let d = found
                .points
                .iter()
                .map(|ne| dist(ne.entries(), p))
                .fold(f64::INFINITY, f64::min);
            assert!(
                d <= MATCH_DIST,
                "game {g}: accepted grid point {p:?} is {d:.4} from the nearest returned equilibrium"
            );
        }
    }
}

#[test]
fn enumerator_and_oracle_agree_on_a_vertex_equilibrium_game() {
    // Hand-made game where strategy 0 strictly dominates: unique vertex
    // equilibrium at e1, which is itself a grid point.
    let game = Game {
        a: vec![
            vec![-1.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, -1.0],
        ],
        b: vec![2.0, 0.0, 0.0],
    };
    let found = nash_equilibria_affine(&game.a, &game.b, 1e-9).unwrap();
    assert_eq!(found.points.len(), 1);
    assert!(dist(found.points[0].entries(), &[1.0, 0.0, 0.0]) <= 1e-12);

    let mut accepted = 0;
    for i in 0..=GRID_STEPS {
        for j in 0..=(GRID_STEPS - i) {
            let x = [
                i as f64 / 100.0,
                j as f64 / 100.0,
                (GRID_STEPS - i - j) as f64 / 100.0,
            ];
            if gap(&game, &x) <= ACCEPT_GAP {
                accepted += 1;
                assert!(dist(&x, &[1.0, 0.0, 0.0]) <= MATCH_DIST);
            }
        }
    }
    assert_eq!(accepted, 1);
}
