use locemp::function_family::{indicator_family, kde_family, monomial_family, Func, FunctionFamily};
use locemp::local_process::{
    chaining_decomposition, expected_s_n, s_n, shift_family, sup_deviation, sup_over_x, to_uniform, window_split,
    BandwidthRange, SupMethod, SupOptions,
};
use locemp::process_gen::{generate, LawMeta, Marginal, ProcessSpec, SamplePath, XMarginal, ZLink};
use locemp::rng::base_stream;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn deviation(path: &SamplePath, x: f64, h: f64, f: &Func) -> f64 {
    s_n(path, x, h, f).unwrap() - expected_s_n(&path.law, x, h, f, path.len()).unwrap()
}

fn paths() -> Vec<SamplePath> {
    vec![
        generate(&ProcessSpec::iid(300, 1)).unwrap(),
        generate(&ProcessSpec::two_state(0.3, 300, 2)).unwrap(),
        generate(&ProcessSpec::gaussian_ar1(0.5, 300, 3).with_marginal(XMarginal::Gaussian)).unwrap(),
        generate(&ProcessSpec::iid(300, 4).with_link(ZLink::TanhRademacher)).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn s_n_is_affine_in_f(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0, x in -0.5f64..1.5, h in 0.001f64..1.0) {
        let path = generate(&ProcessSpec::m_dependent(1, 200, seed)).unwrap();
        let f = Func::Monomial { power: 3, scale: 1.0 };
        let g = Func::Shifted { inner: Box::new(Func::Scaled { inner: Box::new(f.clone()), factor: a }), shift: b };
        let lhs = s_n(&path, x, h, &g).unwrap();
        let rhs = a * s_n(&path, x, h, &f).unwrap() + b * s_n(&path, x, h, &Func::Constant { value: 1.0 }).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn window_sum_grows_with_h_for_nonnegative_f(seed in any::<u64>(), x in 0.0f64..1.0, h1 in 0.001f64..0.5, dh in 0.0f64..0.5) {
        let path = generate(&ProcessSpec::iid(200, seed)).unwrap();
        let f = Func::Monomial { power: 2, scale: 1.0 };
        let raw = |h: f64| s_n(&path, x, h, &f).unwrap() * (path.len() as f64 * h).sqrt();
        prop_assert!(raw(h1 + dh) >= raw(h1) - 1e-12);
    }

    #[test]
    fn window_split_bounds_the_total(seed in any::<u64>(), which in 0usize..4, x in -1.0f64..2.0, h in 0.001f64..1.0) {
        let path = &paths()[which];
        let f = Func::Shifted { inner: Box::new(Func::Indicator { threshold: 0.1 }), shift: -0.5 };
        let x = if seed % 5 == 0 { path.xs[seed as usize % path.len()] } else { x };
        let split = window_split(path, &path.law, x, h, &f).unwrap();
        prop_assert!(split.holds(), "{split:?}");
        prop_assert!((split.total - deviation(path, x, h, &f).abs()).abs() <= 1e-9);
    }

    #[test]
    fn shift_recombines_pointwise(seed in any::<u64>(), which in 0usize..4, x in -1.0f64..2.0, h in 0.001f64..1.0) {
        let path = &paths()[which];
        let fam = monomial_family(3, 1.0).unwrap();
        let split = shift_family(&fam).unwrap();
        let floor = &split.floor.members[0].func;
        let i = seed as usize % fam.len();
        let whole = deviation(path, x, h, &fam.members[i].func);
        let parts = deviation(path, x, h, &split.shifted.members[i].func) + deviation(path, x, h, floor);
        prop_assert!((whole - parts).abs() <= 1e-9 * (1.0 + whole.abs()));
    }
}

#[test]
fn sup_deviation_is_permutation_invariant() {
    let fam = indicator_family(4, -1.0, 1.0).unwrap();
    let range = BandwidthRange::new(0.05, 0.4).unwrap();
    let mut rng = base_stream(9);
    for path in paths().into_iter().filter(|p| p.law.z_link == ZLink::Independent) {
        let base = sup_deviation(&path, &path.law, &range, &fam, 2).unwrap();
        let mut idx: Vec<usize> = (0..path.len()).collect();
        idx.shuffle(&mut rng);
        let shuffled = SamplePath::new(
            idx.iter().map(|&i| path.xs[i]).collect(),
            idx.iter().map(|&i| path.zs[i]).collect(),
            path.law.clone(),
        )
        .unwrap();
        let other = sup_deviation(&shuffled, &shuffled.law, &range, &fam, 2).unwrap();
        assert!((base.sup_value - other.sup_value).abs() <= 1e-12 * base.sup_value);
        assert_eq!(base.argmax, other.argmax);
    }
}

/// The scan dominates a dense `x` sweep and, for the grid method, exceeds it
/// by at most the reported slack plus the sweep's own resolution error.
#[test]
fn sup_over_x_against_dense_sweep() {
    let f = Func::Monomial { power: 1, scale: 1.0 };
    for path in paths() {
        for h in [0.02, 0.2] {
            let scan = sup_over_x(&path, &path.law, h, &f, 1.0, &SupOptions::new(1)).unwrap();
            let (lo, hi) = (
                path.xs.iter().copied().fold(f64::INFINITY, f64::min) - h - 0.1,
                path.xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + h + 0.1,
            );
            let steps = 20_000;
            let step = (hi - lo) / steps as f64;
            let dense = (0..=steps)
                .map(|j| deviation(&path, lo + j as f64 * step, h, &f).abs())
                .fold(0.0, f64::max);
            assert!(dense <= scan.value + scan.slack + 1e-9, "{dense} vs {scan:?}");
            // Centering moves by at most 2 sqrt(n / h) g step between sweep points.
            let sweep_err = 2.0 * (path.len() as f64 / h).sqrt() * path.law.density_sup * step;
            assert!(scan.value <= dense + sweep_err + 1e-9, "{dense} vs {scan:?}");
            assert_eq!(scan.exact, path.law.z_link == ZLink::Independent);
        }
    }
}

#[test]
fn sup_deviation_reports_method_and_slack() {
    let range = BandwidthRange::new(0.05, 0.4).unwrap();
    let fam = kde_family().unwrap();
    for path in paths() {
        let r = sup_deviation(&path, &path.law, &range, &fam, 2).unwrap();
        assert!(r.sup_value.is_finite() && r.sup_value > 0.0);
        assert!(r.bandwidth_slack >= 0.0);
        match r.method {
            SupMethod::ExactBreakpoint => assert_eq!(r.grid_slack, 0.0),
            SupMethod::Grid => assert!(r.grid_slack > 0.0),
        }
        assert!(range.a_n <= r.argmax.h && r.argmax.h < range.b_n);
    }
}

#[test]
fn to_uniform_of_gaussian_path() {
    let path = generate(&ProcessSpec::iid(5000, 11).with_marginal(XMarginal::Gaussian)).unwrap();
    let u = to_uniform(&path);
    assert_eq!(u.law.marginal, Marginal::Uniform01);
    assert!(u.xs.iter().all(|&v| v > 0.0 && v < 1.0));
    let mean = u.xs.iter().sum::<f64>() / u.len() as f64;
    let sigma = (1.0 / 12.0 / u.len() as f64).sqrt();
    assert!((mean - 0.5).abs() < 3.0 * sigma, "{mean}");
    for i in 0..path.len() {
        for j in (i + 1..path.len()).step_by(97) {
            assert_eq!(path.xs[i] < path.xs[j], u.xs[i] < u.xs[j]);
        }
    }
    assert_eq!(u.zs, path.zs);
}

fn uniform_path(xs: Vec<f64>) -> SamplePath {
    let zs = vec![0.0; xs.len()];
    SamplePath::new(xs, zs, LawMeta::new(Marginal::Uniform01, 1.0, ZLink::Independent)).unwrap()
}

/// At `K = L` the right side is only `kappa / sqrt(n)`; two points in one
/// finest cell already exceed it.
#[test]
fn chaining_at_top_level_needs_one_point_per_cell() {
    let one = Func::Constant { value: 1.0 };
    let crowded = uniform_path(vec![0.1, 0.101, 0.6, 0.9]);
    let r = chaining_decomposition(&crowded, &one, 1.0, 2).unwrap();
    assert_eq!((r.top_level, r.deltas.len()), (2, 0));
    assert!(!r.holds && r.lhs > r.rhs, "{r:?}");

    let spread = uniform_path(vec![0.1, 0.3, 0.6, 0.8]);
    let r = chaining_decomposition(&spread, &one, 1.0, 2).unwrap();
    assert!(r.holds, "{r:?}");
    for k in 0..2 {
        assert!(chaining_decomposition(&crowded, &one, 1.0, k).unwrap().holds);
    }
}

#[test]
fn chaining_holds_below_top_level_on_random_paths() {
    let fam = shift_family(&monomial_family(2, 1.0).unwrap()).unwrap().shifted;
    let mut rng = base_stream(21);
    for _ in 0..50 {
        let n = rng.random_range(8..400);
        let path = to_uniform(&generate(&ProcessSpec::m_dependent(2, n, rng.random())).unwrap());
        for m in &fam.members {
            for k in 0..4.min(locemp::local_process::ceil_log2(n)) {
                let r = chaining_decomposition(&path, &m.func, fam.envelope_sup, k).unwrap();
                assert!(r.holds, "n={n} k={k} {r:?}");
            }
        }
    }
}

#[test]
fn signed_family_rejected_by_chaining() {
    let path = to_uniform(&generate(&ProcessSpec::iid(64, 1)).unwrap());
    let fam: FunctionFamily = monomial_family(1, 1.0).unwrap();
    assert!(chaining_decomposition(&path, &fam.members[1].func, 1.0, 1).is_err());
}
