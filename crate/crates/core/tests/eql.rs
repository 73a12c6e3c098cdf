use rl_lab::study::{eql_scan, real_grid, Study};
use rl_lab::synth::Variant;
use rl_lab::Measure;

/// EQL-optimal outer limit of the Shewhart-synthetic #4 combo (H = 6) on a
/// 0.02 grid around the quoted optimum.
fn best_k2(study: &Study, head_start: bool, measure: Measure, around: f64) -> f64 {
    let grid = real_grid(around - 0.1, around + 0.1, 0.02);
    let cells = study.combo_bundle(Variant::Modified, head_start, 6, &grid).unwrap();
    let (scores, best) = eql_scan(&cells, measure, 5.0, 0.01).unwrap();
    assert!(best > 0 && best + 1 < cells.len(), "optimum on the window edge: {scores:?}");
    cells[best].spec.k2.unwrap()
}

#[test]
fn combo_eql_optima() {
    let study = Study::new(500.0);
    let s4_zero = best_k2(&study, true, Measure::ZeroState, 4.78);
    assert!((s4_zero - 4.78).abs() < 1e-9, "{s4_zero}");
    // Flat optima: one grid step either way is accepted.
    for (hs, m, quoted) in [
        (true, Measure::SteadyState, 3.46),
        (false, Measure::ZeroState, 3.48),
        (false, Measure::SteadyState, 3.48),
    ] {
        let k2 = best_k2(&study, hs, m, quoted);
        assert!((k2 - quoted).abs() <= 0.02 + 1e-9, "{} {}: {k2}", Variant::Modified.label(hs), m.name());
    }
}
