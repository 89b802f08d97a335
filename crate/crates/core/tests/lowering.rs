//! End-to-end checks of the basis lowering: semantic preservation on the
//! real encoding circuits, regression anchors for the counted step, and
//! stability of the sweep tables.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlasolve::blockenc;
use vlasolve::circuit::Circuit;
use vlasolve::lower::{
    count_resources, count_step, lower_to_basis, step_circuit, sweep_csv, sweep_json,
    sweep_report, Strategy,
};
use vlasolve::problem::{make_grid, PlasmaParams};
use vlasolve::sim::StateVector;

/// Lowered circuit applied to |psi, 0...0> must reproduce the source exactly
/// on every amplitude (helpers included: they must come back to zero).
fn probe_matches(src: &Circuit<f64>, low: &Circuit<f64>, tol: f64, seed: u64) -> f64 {
    let n_src = 1usize << src.width();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut amps = vec![Complex::new(0.0, 0.0); 1 << low.width()];
    for a in amps.iter_mut().take(n_src) {
        *a = Complex::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
    }
    let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for a in amps.iter_mut() {
        *a /= norm;
    }
    let mut reference = StateVector::from_amplitudes(low.width(), amps.clone()).unwrap();
    reference.apply_circuit(src);
    let mut got = StateVector::from_amplitudes(low.width(), amps).unwrap();
    got.apply_circuit(low);
    let worst = got
        .amps
        .iter()
        .zip(reference.amps.iter())
        .map(|(g, w)| (g - w).norm())
        .fold(0.0, f64::max);
    assert!(worst <= tol, "worst amplitude deviation {worst:.3e} > {tol:.1e}");
    worst
}

/// Exhaustive version over all basis inputs of the source space.
fn columns_match(src: &Circuit<f64>, low: &Circuit<f64>, tol: f64) {
    for col in 0..1usize << src.width() {
        let mut reference = StateVector::basis(low.width(), col);
        reference.apply_circuit(src);
        let mut got = StateVector::basis(low.width(), col);
        got.apply_circuit(low);
        for (i, (g, w)) in got.amps.iter().zip(reference.amps.iter()).enumerate() {
            assert!((g - w).norm() <= tol, "col {col} row {i}: {g} vs {w}");
        }
    }
}

#[test]
fn encoding_builders_lower_faithfully() {
    let params = PlasmaParams::<f64>::default();
    let grid = make_grid(&params, 3, 2).unwrap();
    let narrow: Vec<(&str, Circuit<f64>)> = vec![
        ("shift_walk", blockenc::zeta_be(&grid).unwrap().circuit),
        ("velocity_diag", blockenc::v_diag_be(&grid).unwrap().circuit),
        ("derivative", blockenc::d_full_be(&grid).unwrap().circuit),
        ("field_coupling", blockenc::ce_be(&grid, &params).unwrap().circuit),
        ("off_diagonal", blockenc::off_diag_be(&grid, &params).unwrap().circuit),
    ];
    for (name, src) in &narrow {
        for s in Strategy::ALL {
            let low = lower_to_basis(src, s).unwrap();
            count_resources(&low).unwrap_or_else(|e| panic!("{name}/{s} not basis: {e}"));
            columns_match(src, &low, 1e-10);
        }
    }
    // the widest sub-builder gets a randomized spot check instead
    let wide = blockenc::f_be(&grid, &params).unwrap().circuit;
    for s in Strategy::ALL {
        let low = lower_to_basis(&wide, s).unwrap();
        probe_matches(&wide, &low, 1e-10, 11);
    }
}

#[test]
fn counted_step_baseline_preserves_semantics() {
    let step = step_circuit::<f64>(3, 2).unwrap();
    let low = lower_to_basis(&step, Strategy::Baseline).unwrap();
    assert_eq!(low.width(), step.width(), "baseline takes no helpers");
    probe_matches(&step, &low, 1e-8, 23);
}

#[test]
fn step_width_is_logical_qubit_count() {
    assert_eq!(step_circuit::<f64>(3, 2).unwrap().width(), 15);
    assert_eq!(step_circuit::<f64>(4, 3).unwrap().width(), 17);
}

#[test]
fn step_counts_anchor_and_dominance() {
    let base = count_step::<f64>(3, 2, Strategy::Baseline).unwrap();
    let opt = count_step::<f64>(3, 2, Strategy::Optimized).unwrap();
    // regression anchors for the counted single step at (3, 2)
    assert_eq!(base.cx_count, 22972);
    assert_eq!(opt.cx_count, 3052);
    assert!(opt.cx_count < base.cx_count);
    assert_eq!(base.ancillas, 0);
    assert!(opt.ancillas > 0);
    assert_eq!(base.width, 15);
    assert_eq!(opt.width, 15, "reported width stays logical");
}

#[test]
fn counts_monotone_in_spatial_resolution() {
    for s in Strategy::ALL {
        let mut prev = 0usize;
        for n_x in 3..=6 {
            let r = count_step::<f64>(n_x, 2, s).unwrap();
            assert!(r.cx_count >= prev, "{s} cx dropped at n_x={n_x}");
            prev = r.cx_count;
        }
    }
}

#[test]
fn sweep_tables_are_sorted_and_stable() {
    let sizes = [(3, 2), (4, 2), (3, 3)];
    let rows = sweep_report::<f64>(&sizes, &Strategy::ALL).unwrap();
    assert_eq!(rows.len(), 6);
    let keys: Vec<_> = rows.iter().map(|r| (r.n_x, r.n_v, r.strategy)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted, "rows must come back sorted");
    for pair in rows.chunks(2) {
        assert_eq!(pair[0].strategy, Strategy::Baseline);
        assert_eq!(pair[1].strategy, Strategy::Optimized);
        assert!(pair[1].cx_count <= pair[0].cx_count);
        assert_eq!(pair[0].width, pair[0].n_x + pair[0].n_v + 10);
    }

    let csv = sweep_csv(&rows);
    assert!(csv.starts_with("n_x,n_v,strategy,cx_count,width,depth\n"));
    assert_eq!(csv.lines().count(), 7);
    let json = sweep_json(&rows);
    assert!(json.contains("\"ancillas\""));

    // a second, fresh computation must be byte-identical
    let again = sweep_report::<f64>(&sizes, &Strategy::ALL).unwrap();
    assert_eq!(sweep_csv(&again), csv);
    assert_eq!(sweep_json(&again), json);
}

#[test]
fn empty_circuit_counts_are_zero() {
    let mut c = Circuit::<f64>::new();
    c.add_register(
        "q",
        4,
        vlasolve::circuit::Interp::Unsigned,
        vlasolve::circuit::RegKind::Data,
    );
    let counts = count_resources(&c).unwrap();
    assert_eq!(counts.cx, 0);
    assert_eq!(counts.singles, 0);
    assert_eq!(counts.depth, 0);
    assert_eq!(counts.width, 4);
}
