use proptest::prelude::*;
use qipf::analysis::*;
use qipf::signals::{gen_sine, normalize};
use qipf::{decompose_stream, EngineConfig, KernelConfig, ModeSpec, QipfTable};

#[derive(Debug)]
struct Table {
    m: usize,
    data: Vec<f64>,
}

impl QipfTable for Table {
    fn rows(&self) -> usize {
        self.data.len() / self.m
    }
    fn num_modes(&self) -> usize {
        self.m
    }
    fn qipf_row(&self, row: usize) -> &[f64] {
        &self.data[row * self.m..(row + 1) * self.m]
    }
}

fn table_strategy() -> impl Strategy<Value = Table> {
    (1usize..8, 1usize..30).prop_flat_map(|(m, n)| {
        prop::collection::vec(0.0f64..10.0, m * n).prop_map(move |data| Table { m, data })
    })
}

proptest! {
    #[test]
    fn dominance_invariant_under_monotone_maps(t in table_strategy()) {
        let h = dominance_histogram(&t).unwrap();
        prop_assert_eq!(h.total(), t.rows());
        let mapped = Table { m: t.m, data: t.data.iter().map(|v| (v + 1.0).ln() * 3.0 + 7.0).collect() };
        prop_assert_eq!(dominance_histogram(&mapped).unwrap().counts, h.counts);
    }

    #[test]
    fn heatmap_rows_in_unit_interval(t in table_strategy(), a in 0.1f64..5.0, b in -3.0f64..3.0) {
        let h = heatmap_matrix(&t).unwrap();
        for k in 1..=t.m {
            let row = h.row(k);
            prop_assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            if !h.constant_rows.contains(&k) {
                prop_assert_eq!(row.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
                prop_assert_eq!(row.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
            }
        }
        let scaled = Table { m: t.m, data: t.data.iter().map(|v| a * v + b).collect() };
        let g = heatmap_matrix(&scaled).unwrap();
        for k in 1..=t.m {
            for (x, y) in h.row(k).iter().zip(g.row(k)) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zeta_ignores_sign(values in prop::collection::vec(-5.0f64..5.0, 30), normalize in prop::bool::ANY) {
        let cfg = SensitivityConfig {
            interval_length: 10,
            state_groups: vec![(1, 1)],
            noise_db: vec![3.0, 9.0, 1.0],
            runs: 1,
            normalize_per_framework: normalize,
            db_draw: None,
            surprise_grid_points: 64,
        };
        let z = sensitivity(&values, &cfg).unwrap().zeta;
        let flipped: Vec<f64> = values.iter().map(|v| -v).collect();
        let zf = sensitivity(&flipped, &cfg).unwrap().zeta;
        prop_assert!(z >= 0.0);
        prop_assert!((z - zf).abs() <= 1e-12 * z.max(1.0));
    }
}

#[test]
fn dominance_same_under_either_hermite_path() {
    let sig = normalize(&gen_sine(100.0, 8000.0, 0.05).unwrap()).unwrap();
    let k = KernelConfig::new(0.3).unwrap();
    let a = decompose_stream(sig.samples(), &EngineConfig::new(k, ModeSpec::new(6))).unwrap();
    let b = decompose_stream(
        sig.samples(),
        &EngineConfig::new(k, ModeSpec::unnormalized(6)),
    )
    .unwrap();
    // ratios, hence eigenvalues, do not depend on the normalization path
    assert_eq!(eigenvalue_curve(&a).unwrap().len(), 6);
    for (x, y) in eigenvalue_curve(&a)
        .unwrap()
        .iter()
        .zip(eigenvalue_curve(&b).unwrap())
    {
        assert!((x - y).abs() < 1e-9);
    }
    assert_eq!(dominance_histogram(&a).unwrap().total(), sig.len() - 1);
}
