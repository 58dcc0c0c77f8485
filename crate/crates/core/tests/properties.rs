use lotsizing::engine::ReferenceSolver;
use lotsizing::heuristic::hybrid;
use lotsizing::instgen::{
    assign_retailers, generate, instance_from_json, instance_to_json, solution_from_json, solution_to_json, Balance,
    GenSpec, StorageSite,
};
use lotsizing::validate::{check_feasibility, deviation, improvement};
use lotsizing::model::{echelon_stock, physical_stock, total_cost};
use lotsizing::HeuristicParams;
use proptest::prelude::*;

fn spec_strategy() -> impl Strategy<Value = GenSpec> {
    (
        1usize..4,
        1usize..4,
        1usize..6,
        any::<bool>(),
        prop::option::of(prop::sample::select(vec![1.5, 1.75, 2.0])),
        0usize..3,
        any::<u64>(),
    )
        .prop_map(|(w, extra, t, unbalanced, plant, site, seed)| {
            let mut spec = GenSpec::new(w + extra, w, t, seed);
            spec.balance = if unbalanced { Balance::Unbalanced } else { Balance::Balanced };
            spec.plant_capacity_factor = plant;
            (spec.storage_capacity_site, spec.storage_capacity_factor) = match site {
                0 => (StorageSite::None, None),
                1 => (StorageSite::Warehouses, Some(1.75)),
                _ => (StorageSite::Retailers, Some(1.75)),
            };
            spec
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generation_is_deterministic_and_round_trips(spec in spec_strategy()) {
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(instance_from_json(&instance_to_json(&a)).unwrap(), a);
    }

    #[test]
    fn every_warehouse_serves_a_retailer(spec in spec_strategy()) {
        let network = assign_retailers(&spec).unwrap();
        prop_assert_eq!(network.num_retailers(), spec.num_retailers);
        for w in 0..spec.num_warehouses {
            prop_assert!(network.retailers_of(w).count() >= 1, "warehouse {} has no retailers", w);
        }
    }

    #[test]
    fn echelon_and_physical_stock_are_inverse(spec in spec_strategy(), scale in 0.0f64..100.0) {
        let inst = generate(&spec).unwrap();
        let s: Vec<Vec<f64>> = (0..inst.num_facilities())
            .map(|i| (0..inst.horizon()).map(|t| scale * ((i * 7 + t * 3) % 5) as f64).collect())
            .collect();
        let back = physical_stock(inst.network(), &echelon_stock(inst.network(), &s));
        for (row, orig) in back.iter().zip(&s) {
            for (a, b) in row.iter().zip(orig) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn metrics_are_zero_on_ties_and_signed(a in 1.0f64..1e6, b in 1.0f64..1e6) {
        prop_assert_eq!(deviation(a, a).unwrap(), 0.0);
        prop_assert_eq!(improvement(a, a).unwrap(), 0.0);
        prop_assert_eq!(improvement(a, b).unwrap() > 0.0, b < a);
        prop_assert_eq!(deviation(a, b).unwrap() > 0.0, a > b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn heuristic_solutions_are_feasible_and_consistent(spec in spec_strategy()) {
        let inst = generate(&spec).unwrap();
        let params = HeuristicParams::with_total_budget(2.0);
        match hybrid(&inst, &params, &ReferenceSolver) {
            Ok((sol, report)) => {
                let check = check_feasibility(&inst, &sol).unwrap();
                prop_assert!(check.feasible, "{:?}", check.violations);
                prop_assert!((sol.objective - total_cost(&inst, &sol)).abs() <= 1e-6);
                prop_assert!(report.final_cost <= report.rf_cost);
                let back = solution_from_json(&inst, &solution_to_json(&inst, &sol)).unwrap();
                prop_assert_eq!(back, sol);
            }
            Err(e) => prop_assert!(inst.plant_capacity(0).is_some() || inst.has_storage_capacity(), "{}", e),
        }
    }
}
