use proptest::prelude::*;

use fluctsel::duals::{jump_dual_step, JumpDualState};
use fluctsel::moran::{run_experiment, InitialTypes, MoranConfig, MoranSimulator, Scenario};
use fluctsel::parallel::{map_replicates, map_replicates_sequential};
use fluctsel::slfv::{run_slfv, SlfvParams, SlfvState};
use fluctsel::{EnvironmentKernel, FrequencyField, RngContract, SpatialDomain, Substream};

fn scenario() -> impl Strategy<Value = Scenario> {
    prop::sample::select(Scenario::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn moran_counts_and_origins_stay_consistent(
        demes in 2usize..6,
        deme_size in 2usize..12,
        selection in 0.0f64..1.0,
        scenario in scenario(),
        seed in any::<u64>(),
    ) {
        let config = MoranConfig {
            demes,
            deme_size,
            selection,
            scenario,
            initial: InitialTypes::Bernoulli(0.4),
            horizon: 2.0,
            ..MoranConfig::default()
        };
        let mut sim = MoranSimulator::new(config, &RngContract::new(seed), 0).unwrap();
        let mut last = 0.0;
        for _ in 0..500 {
            let Some(ev) = sim.step() else { break };
            prop_assert!(ev.time >= last);
            last = ev.time;
            let pop = sim.population();
            for d in 0..demes {
                let deme = pop.deme(d);
                prop_assert_eq!(deme.types().len(), deme_size);
                prop_assert!(pop.lower_count(d) <= deme_size);
                let origins: u32 = (0..demes).map(|g| pop.origin_count(d, g)).sum();
                prop_assert_eq!(origins as usize, deme_size);
            }
            // Every individual descends from exactly one founding deme.
            let founders: u32 = (0..demes).flat_map(|d| (0..demes).map(move |g| (d, g)))
                .map(|(d, g)| pop.origin_count(d, g))
                .sum();
            prop_assert_eq!(founders as usize, demes * deme_size);
        }
    }

    #[test]
    fn jump_dual_keeps_parity(n0 in 0u64..12, impact in 0.05f64..1.0, selection in 0.0f64..1.0, seed in any::<u64>()) {
        let mut rng = RngContract::new(seed).stream(Substream::Outcomes, 0);
        let mut state = JumpDualState { n: n0, t: 0.0 };
        for _ in 0..200 {
            let Some(next) = jump_dual_step(state, impact, selection, &mut rng) else { break };
            prop_assert_eq!(next.n % 2, n0 % 2);
            prop_assert!(next.t > state.t);
            state = next;
        }
    }

    #[test]
    fn block_kernels_are_symmetric_with_unit_diagonal(blocks in 1usize..5, correlation in -1.0f64..1.0) {
        let domain = SpatialDomain::with_cells(2, 1.0, 8).unwrap();
        let kernel = EnvironmentKernel::block(domain, blocks, correlation);
        // Any correlation is realisable with two blocks; more blocks restrict negative values.
        prop_assert!(blocks > 2 || kernel.is_ok());
        prop_assume!(kernel.is_ok());
        let kernel = kernel.unwrap();
        for i in 0..domain.cell_count() {
            prop_assert_eq!(kernel.eval_cells(i, i), 1.0);
            for j in 0..domain.cell_count() {
                let g = kernel.eval_cells(i, j);
                prop_assert_eq!(g, kernel.eval_cells(j, i));
                prop_assert!(g.abs() <= 1.0);
            }
        }
    }

    #[test]
    fn slfv_fields_stay_ordered(
        p0 in 0.0f64..1.0,
        tracer in 0.0f64..1.0,
        selection in 0.0f64..1.0,
        correlation in -1.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let domain = SpatialDomain::with_cells(1, 10.0, 40).unwrap();
        let kernel = EnvironmentKernel::block(domain, 2, correlation).unwrap();
        let params = SlfvParams::new(kernel, 0.5, 0.3, selection, 1.0, 1.0).unwrap();
        let w = FrequencyField::constant(domain, p0).unwrap();
        let v = FrequencyField::constant(domain, p0 * tracer).unwrap();
        let contract = RngContract::new(seed);
        let streams = contract.replicate(0);
        let mut env_rng = contract.stream(Substream::Environment, 0);
        let initial = SlfvState::initial(&params, w, Some(v), &mut env_rng, seed).unwrap();
        let run = run_slfv(&params, initial, 0.5, 0.5, streams, false).unwrap();
        let state = run.final_state;
        let v = state.v().unwrap();
        for c in 0..domain.cell_count() {
            let w = state.w().get(c);
            prop_assert!((0.0..=1.0).contains(&w));
            prop_assert!(v.get(c) >= 0.0 && v.get(c) <= w);
        }
    }
}

#[test]
fn replicate_results_do_not_depend_on_the_schedule() {
    let contract = RngContract::new(9);
    let run = |r: u64| {
        let config = MoranConfig {
            demes: 3,
            deme_size: 6,
            horizon: 1.0,
            ..MoranConfig::default()
        };
        run_experiment::<Vec<u8>>(&config, &contract, r, None)
            .unwrap()
            .population
            .global_proportion()
    };
    assert_eq!(map_replicates(64, run), map_replicates_sequential(64, run));
}
