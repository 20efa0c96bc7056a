use locemp::process_gen::{
    generate, Emission, Generator, LawMeta, Marginal, MixtureComponent, ProcessKind, ProcessSpec, XMarginal, ZLink,
};
use locemp::rng::base_stream;
use rand::Rng;

fn all_kinds(n: usize, seed: u64) -> Vec<ProcessSpec> {
    vec![
        ProcessSpec::iid(n, seed),
        ProcessSpec::m_dependent(2, n, seed),
        ProcessSpec::two_state(0.3, n, seed),
        ProcessSpec::gaussian_ar1(0.5, n, seed),
        ProcessSpec::gaussian_ar1(-0.7, n, seed).with_marginal(XMarginal::Gaussian),
        ProcessSpec::iid(n, seed).with_link(ZLink::TanhRademacher),
    ]
}

fn ks_statistic(xs: &[f64], law: &LawMeta) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let g = law.cdf(x);
            ((i + 1) as f64 / n - g).max(g - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[test]
fn same_spec_reproduces_bit_exactly() {
    for spec in all_kinds(500, 42) {
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
        let other = generate(&ProcessSpec { seed: 43, ..spec.clone() }).unwrap();
        assert_ne!(a.xs, other.xs);
    }
}

#[test]
fn iid_small_path_in_unit_interval() {
    let p = generate(&ProcessSpec::iid(3, 7)).unwrap();
    assert_eq!(p.len(), 3);
    assert!(p.xs.iter().all(|x| (0.0..=1.0).contains(x)));
}

/// KS distance below the 1% critical value `1.628 / sqrt(n)`, inflated by the
/// square root of the long-run variance factor for dependent kinds, in at
/// least 95% of seeds.
#[test]
fn marginal_matches_declared_law() {
    let n = 10_000;
    let crit = 1.628 / (n as f64).sqrt();
    let cases: Vec<(ProcessSpec, f64)> = vec![
        (ProcessSpec::iid(n, 0), 1.0),
        (ProcessSpec::m_dependent(1, n, 0), 3.0),
        (ProcessSpec::m_dependent(3, n, 0), 7.0),
        (ProcessSpec::two_state(0.3, n, 0), 1.4 / 0.6),
        (ProcessSpec::gaussian_ar1(0.5, n, 0), 3.0),
        (ProcessSpec::gaussian_ar1(0.5, n, 0).with_marginal(XMarginal::Gaussian), 3.0),
    ];
    for (template, factor) in cases {
        let seeds = 40;
        let below = (0..seeds)
            .filter(|&s| {
                let p = generate(&ProcessSpec { seed: 100 + s, ..template.clone() }).unwrap();
                ks_statistic(&p.xs, &p.law) < crit * f64::sqrt(factor)
            })
            .count();
        assert!(below * 100 >= 95 * seeds as usize, "{:?}: {below}/{seeds}", template.kind);
    }
}

#[test]
fn cdf_is_lipschitz_in_the_density_bound() {
    let laws = vec![
        Marginal::Uniform01,
        Marginal::StdGaussian,
        Marginal::UniformMixture {
            components: vec![
                MixtureComponent { weight: 0.2, lo: 0.0, hi: 0.1 },
                MixtureComponent { weight: 0.8, lo: 0.3, hi: 1.0 },
            ],
        },
    ];
    let mut rng = base_stream(5);
    for m in laws {
        let g = m.density_sup();
        for _ in 0..1000 {
            let x = rng.random_range(-3.0..3.0);
            let h = rng.random_range(0.0..2.0);
            assert!(m.cdf(x + h) - m.cdf(x) <= g * h + 1e-12);
        }
    }
}

#[test]
fn markov_marginal_is_the_stationary_mixture() {
    let spec = ProcessSpec::new(
        ProcessKind::FiniteMarkov {
            transition: vec![vec![0.9, 0.1], vec![0.3, 0.7]],
            emissions: vec![Emission { lo: 0.0, hi: 0.5 }, Emission { lo: 0.5, hi: 1.0 }],
        },
        20_000,
        3,
    );
    let g = Generator::new(&spec).unwrap();
    // pi = (0.75, 0.25): density 1.5 on [0, 1/2) and 0.5 above
    assert!((g.law().density_sup - 1.5).abs() < 1e-12);
    assert!((g.law().cdf(0.5) - 0.75).abs() < 1e-12);
    let p = generate(&spec).unwrap();
    let frac = p.xs.iter().filter(|&&x| x < 0.5).count() as f64 / p.len() as f64;
    assert!((frac - 0.75).abs() < 0.03, "{frac}");
}

#[test]
fn spec_from_toml_for_every_kind() {
    let texts = [
        "kind = \"iid\"\nn = 10",
        "kind = \"m_dependent\"\nm = 2\nseed = 4",
        "kind = \"gaussian_ar1\"\nrho = -0.3\nx_marginal = \"gaussian\"",
        "kind = \"finite_markov\"\ntransition = [[0.5, 0.5], [0.2, 0.8]]\nemissions = [{ lo = 0.0, hi = 0.5 }, { lo = 0.5, hi = 1.0 }]",
    ];
    for t in texts {
        let spec: ProcessSpec = toml::from_str(t).unwrap();
        spec.validate().unwrap();
        generate(&ProcessSpec { n: 50, ..spec }).unwrap();
    }
}
