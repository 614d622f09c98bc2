use ntrack_core::harness::{preset, preset_names, run_experiment, RunConfig};

#[test]
fn every_preset_parses_and_validates() {
    let names: Vec<&str> = preset_names().collect();
    assert!(names.len() >= 6);
    for name in names {
        let config = preset(name).unwrap();
        config.validate().unwrap();
        assert_eq!(RunConfig::from_json(&config.to_json()).unwrap(), config, "{name}");
    }
}

#[test]
fn runs_are_bit_reproducible() {
    let mut config = preset("logistic-n10").unwrap();
    config.iterations = 60;
    let a = run_experiment(&config).unwrap();
    let b = run_experiment(&config).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn tuned_comparison_favours_newton_tracking() {
    let record = run_experiment(&preset("compare-n50-tuned").unwrap()).unwrap();
    let hit = |label: &str| record.run(label).unwrap().trace.first_below(1e-6);
    let nt = hit("newton_tracking").expect("newton tracking converges");
    for label in ["gradient_tracking", "extra", "dlm"] {
        let other = hit(label).unwrap_or_else(|| panic!("{label} converges with tuned steps"));
        assert!(nt < other, "newton_tracking {nt} vs {label} {other}");
    }
    // every method agrees with the centralized reference
    for run in &record.runs {
        assert!(run.trace.final_error().unwrap() < 1e-10, "{}", run.label);
    }
}

#[test]
fn communication_cost_counts_gradient_tracking_twice() {
    let mut config = preset("compare-n50-tuned").unwrap();
    config.iterations = 10;
    config.stop_below = None;
    let record = run_experiment(&config).unwrap();
    let scalars = |label: &str| record.run(label).unwrap().total_cost.scalars;
    assert_eq!(scalars("gradient_tracking"), 2 * scalars("extra"));
    assert_eq!(scalars("newton_tracking"), scalars("extra"));
    assert_eq!(scalars("dlm"), scalars("extra"));
    let directed = 2 * record.spectra.edges as u64;
    assert_eq!(scalars("extra"), 10 * directed * 20);
}

#[test]
fn untuned_step_sizes_on_the_large_network() {
    // the first-order baselines are unstable at these step sizes on this data
    let mut config = preset("compare-n100").unwrap();
    config.iterations = 300;
    let record = run_experiment(&config).unwrap();
    let nt = &record.run("newton_tracking").unwrap().trace;
    assert!(!nt.diverged);
    assert!(nt.final_error().unwrap() < 1.0);
    for label in ["gradient_tracking", "extra", "dlm"] {
        let trace = &record.run(label).unwrap().trace;
        assert!(trace.diverged || trace.final_error().unwrap() > 1.0, "{label}");
    }
}
