//! Property-based checks of the structural invariants the library is built
//! on: projection validity, excess-payoff orthogonality, shift invariance of
//! best responses, mass conservation of every field, agreement of the two
//! correlation routes, and conic behaviour of rule blends.

use evodyn_core::rules::{correlation_from_rates, edm_field_from_rates, hybrid_rates};
use evodyn_core::{
    best_response_set, correlation, edm_field, excess_payoff, project_to_simplex,
    tellegen_decomposition, CoRule, EpRule, IRule, PayoffVector, PopulationState, RuleSpec,
};
use proptest::prelude::*;

fn rule_pool() -> Vec<RuleSpec> {
    vec![
        RuleSpec::smith(),
        RuleSpec::bnn(),
        RuleSpec::abr(1, 0.1).unwrap(),
        RuleSpec::abr(5, 0.1).unwrap(),
        RuleSpec::polynomial_mix(),
        RuleSpec::replicator_smith(),
        RuleSpec::smith_abr(),
        RuleSpec::composite_mix(),
    ]
}

fn state_strategy(n: usize) -> impl Strategy<Value = PopulationState> {
    prop::collection::vec(1e-3f64..1.0, n).prop_map(|raw| {
        let sum: f64 = raw.iter().sum();
        let scaled: Vec<f64> = raw.iter().map(|v| v / sum).collect();
        project_to_simplex(&scaled, 1e-9).expect("normalized point is on the simplex")
    })
}

fn payoff_strategy(n: usize) -> impl Strategy<Value = PayoffVector> {
    prop::collection::vec(-10.0f64..10.0, n).prop_map(|v| PayoffVector::new(v).unwrap())
}

fn raw_point_strategy() -> impl Strategy<Value = Vec<f64>> {
    (3usize..6).prop_flat_map(|n| prop::collection::vec(-0.2f64..1.2, n))
}

proptest! {
    #[test]
    fn projection_repairs_and_is_idempotent(raw in raw_point_strategy()) {
        let positive_mass: f64 = raw.iter().filter(|v| **v > 0.0).sum();
        prop_assume!(positive_mass >= 0.3);
        let x = match project_to_simplex(&raw, 10.0) {
            Ok(x) => x,
            Err(_) => return Ok(()), // pathological mass distribution
        };
        let sum: f64 = x.entries().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        prop_assert!(x.entries().iter().all(|v| (0.0..=1.0).contains(v)));
        let again = project_to_simplex(x.entries(), 0.0).unwrap();
        prop_assert_eq!(x.entries(), again.entries());
    }

    #[test]
    fn excess_payoff_is_orthogonal_to_the_state(
        x in state_strategy(4),
        p in payoff_strategy(4),
    ) {
        let hat = excess_payoff(&x, &p).unwrap();
        let dot: f64 = x
            .entries()
            .iter()
            .zip(hat.entries())
            .map(|(xi, hi)| xi * hi)
            .sum();
        let scale = p.inf_norm().max(1.0);
        prop_assert!(dot.abs() <= 1e-12 * scale);
    }

    #[test]
    fn best_responses_ignore_payoff_shifts(
        p in payoff_strategy(5),
        shift in -100.0f64..100.0,
    ) {
        let shifted =
            PayoffVector::new(p.entries().iter().map(|v| v + shift).collect()).unwrap();
        prop_assert_eq!(
            best_response_set(&p, 1e-9),
            best_response_set(&shifted, 1e-9)
        );
    }

    #[test]
    fn every_field_conserves_mass(
        x in state_strategy(3),
        p in payoff_strategy(3),
        idx in 0usize..8,
    ) {
        let spec = &rule_pool()[idx];
        let v = edm_field(spec, &x, &p).unwrap();
        let total: f64 = v.velocities().iter().sum();
        let scale = v.inf_norm().max(1.0);
        prop_assert!(total.abs() <= 1e-12 * scale);
    }

    #[test]
    fn correlation_routes_agree(
        x in state_strategy(3),
        p in payoff_strategy(3),
        idx in 0usize..8,
    ) {
        let spec = &rule_pool()[idx];
        let direct = correlation(spec, &x, &p).unwrap();
        let pairwise = tellegen_decomposition(spec, &x, &p).unwrap();
        prop_assert!(
            (direct - pairwise).abs() <= 1e-10 * (1.0 + direct.abs()),
            "direct {} pairwise {}",
            direct,
            pairwise
        );
    }

    #[test]
    fn correlation_is_conic_in_the_weights(
        x in state_strategy(3),
        p in payoff_strategy(3),
        scale in 0.01f64..100.0,
    ) {
        // Scaling every weight scales rates, field, and correlation linearly.
        let base = RuleSpec::new(
            vec![(1.0, IRule::Replicator)],
            vec![(0.5, CoRule::Smith)],
            vec![(2.0, EpRule::Bnn)],
            None,
        )
        .unwrap();
        let scaled = RuleSpec::new(
            vec![(scale, IRule::Replicator)],
            vec![(0.5 * scale, CoRule::Smith)],
            vec![(2.0 * scale, EpRule::Bnn)],
            None,
        )
        .unwrap();
        let rho = correlation(&base, &x, &p).unwrap();
        let rho_scaled = correlation(&scaled, &x, &p).unwrap();
        prop_assert!(
            (rho_scaled - scale * rho).abs() <= 1e-12 * (1.0 + rho.abs() * scale),
            "{} vs {}",
            rho_scaled,
            scale * rho
        );
    }

    #[test]
    fn blended_rates_sum_componentwise(
        x in state_strategy(3),
        p in payoff_strategy(3),
    ) {
        // A two-class blend must equal the weighted sum of each class alone,
        // and so must its induced field and correlation.
        let blend = RuleSpec::new(
            vec![(3.0, IRule::Replicator)],
            vec![(0.25, CoRule::Smith)],
            vec![],
            None,
        )
        .unwrap();
        let imit = RuleSpec::new_unchecked(vec![(3.0, IRule::Replicator)], vec![], vec![], None)
            .unwrap();
        let comp = RuleSpec::new(vec![], vec![(0.25, CoRule::Smith)], vec![], None).unwrap();
        let m_blend = hybrid_rates(&blend, &x, &p).unwrap();
        let m_imit = hybrid_rates(&imit, &x, &p).unwrap();
        let m_comp = hybrid_rates(&comp, &x, &p).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = m_imit.get(i, j) + m_comp.get(i, j);
                prop_assert!((m_blend.get(i, j) - expected).abs() <= 1e-12);
            }
        }
        let v_blend = edm_field_from_rates(&x, &m_blend);
        let rho_blend = correlation_from_rates(&x, &p, &m_blend);
        let rho_sum = correlation_from_rates(&x, &p, &m_imit)
            + correlation_from_rates(&x, &p, &m_comp);
        prop_assert!((rho_blend - rho_sum).abs() <= 1e-10);
        let v_sum: Vec<f64> = edm_field_from_rates(&x, &m_imit)
            .velocities()
            .iter()
            .zip(edm_field_from_rates(&x, &m_comp).velocities())
            .map(|(a, b)| a + b)
            .collect();
        for (a, b) in v_blend.velocities().iter().zip(&v_sum) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
