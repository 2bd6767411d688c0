macro_rules! example {
    ($module:ident, $test:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $test() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(degree_laws, degree_laws_runs, "degree_laws.rs");
example!(graph_closure, graph_closure_runs, "graph_closure.rs");
example!(simulate_cascade, simulate_cascade_runs, "simulate_cascade.rs");
example!(mean_field, mean_field_runs, "mean_field.rs");
example!(ode_flow, ode_flow_runs, "ode_flow.rs");
example!(reductions, reductions_runs, "reductions.rs");
example!(contagion_window, contagion_window_runs, "contagion_window.rs");
example!(seeding_strategies, seeding_strategies_runs, "seeding_strategies.rs");
example!(config_run, config_run_runs, "config_run.rs");
