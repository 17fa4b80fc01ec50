// each example doubles as a smoke test

macro_rules! examples {
    ($($name:ident = $path:literal),* $(,)?) => {
        $(
            #[path = $path]
            mod $name;
        )*

        mod run {
            $(
                #[test]
                fn $name() {
                    super::$name::run().unwrap();
                }
            )*
        }
    };
}

examples!(
    acceptance_subset = "../examples/acceptance_subset.rs",
    birman_schwinger_expansion = "../examples/birman_schwinger_expansion.rs",
    config_driven_run = "../examples/config_driven_run.rs",
    counterexample_models = "../examples/counterexample_models.rs",
    cz_kernels_and_atoms = "../examples/cz_kernels_and_atoms.rs",
    d_star_far_field = "../examples/d_star_far_field.rs",
    discrete_spectrum = "../examples/discrete_spectrum.rs",
    dispersive_decay = "../examples/dispersive_decay.rs",
    free_resolvent_kernels = "../examples/free_resolvent_kernels.rs",
    grid_norms_and_weights = "../examples/grid_norms_and_weights.rs",
    lp_bounds_probe = "../examples/lp_bounds_probe.rs",
    multiplier_smoothness = "../examples/multiplier_smoothness.rs",
    potential_builders = "../examples/potential_builders.rs",
    spectral_multipliers = "../examples/spectral_multipliers.rs",
    wave_operator_cross_check = "../examples/wave_operator_cross_check.rs",
    zero_energy_classification = "../examples/zero_energy_classification.rs",
);
