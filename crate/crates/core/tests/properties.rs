use magdiff::actgraph::{activation_graph, spectral_norm_raw, LayerGeometry};
use magdiff::nn::DenseLayer;
use magdiff::stats::{exact_p_value, ks_statistic};
use magdiff::{
    bonferroni_test, extract_features, ks_two_sample, mean_graph_summaries, Activation,
    FeatureKind, FeatureMatrix, LabeledSet, Network, NormKind, Tensor,
};
use proptest::prelude::*;

fn distinct(values: Vec<f64>) -> Vec<f64> {
    let mut v = values;
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Two samples with no shared values.
fn tie_free_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..25, 2usize..25)
        .prop_flat_map(|(n, m)| {
            (
                prop::collection::vec(-100.0f64..100.0, n + m),
                Just(n),
                any::<u64>(),
            )
        })
        .prop_filter_map("ties", |(pool, n, swap)| {
            if distinct(pool.clone()).len() != pool.len() {
                return None;
            }
            let mut pool = pool;
            let len = pool.len() as u64;
            pool.rotate_left((swap % len) as usize);
            let b = pool.split_off(n);
            Some((pool, b))
        })
}

fn layer_case() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..12, 1usize..12).prop_flat_map(|(n_in, n_out)| {
        (
            Just(n_in),
            Just(n_out),
            prop::collection::vec(-3.0f64..3.0, n_in * n_out),
            prop::collection::vec(-2.0f64..2.0, n_in),
            prop::collection::vec(-2.0f64..2.0, n_in),
            prop::collection::vec(-2.0f64..2.0, n_in),
        )
    })
}

fn geometry(n_in: usize, n_out: usize, w: &[f64]) -> LayerGeometry {
    let layer = DenseLayer::new(
        Tensor::matrix(n_out, n_in, w.to_vec()).unwrap(),
        vec![0.0; n_out],
        Activation::Identity,
    )
    .unwrap();
    LayerGeometry::new(&Network::new(vec![layer], n_out).unwrap(), 0).unwrap()
}

/// Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_max_eigenvalue(mut a: Vec<f64>, k: usize) -> f64 {
    for _ in 0..100 {
        let off: f64 = (0..k)
            .flat_map(|p| (0..k).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[p * k + q].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                let apq = a[p * k + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * k + q] - a[p * k + p]) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let (c, s) = (1.0 / (t * t + 1.0).sqrt(), t / (t * t + 1.0).sqrt());
                for r in 0..k {
                    let (arp, arq) = (a[r * k + p], a[r * k + q]);
                    a[r * k + p] = c * arp - s * arq;
                    a[r * k + q] = s * arp + c * arq;
                }
                for r in 0..k {
                    let (apr, aqr) = (a[p * k + r], a[q * k + r]);
                    a[p * k + r] = c * apr - s * aqr;
                    a[q * k + r] = s * apr + c * aqr;
                }
            }
        }
    }
    (0..k).map(|i| a[i * k + i]).fold(f64::NEG_INFINITY, f64::max)
}

fn gram_oracle(rows: usize, cols: usize, m: &[f64]) -> f64 {
    let mut g = vec![0.0; cols * cols];
    for p in 0..cols {
        for q in 0..cols {
            g[p * cols + q] = (0..rows).map(|r| m[r * cols + p] * m[r * cols + q]).sum();
        }
    }
    jacobi_max_eigenvalue(g, cols).max(0.0).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ks_is_symmetric((a, b) in tie_free_pair()) {
        let ab = ks_two_sample(&a, &b).unwrap();
        let ba = ks_two_sample(&b, &a).unwrap();
        prop_assert_eq!(ab.statistic, ba.statistic);
        prop_assert!((ab.p_value - ba.p_value).abs() <= 1e-12);
    }

    #[test]
    fn ks_ignores_monotone_transforms((a, b) in tie_free_pair()) {
        let f = |v: &[f64]| v.iter().map(|x| (x / 40.0).exp() * 3.0 - 7.0).collect::<Vec<_>>();
        let plain = ks_two_sample(&a, &b).unwrap();
        let mapped = ks_two_sample(&f(&a), &f(&b)).unwrap();
        prop_assert_eq!(plain.statistic, mapped.statistic);
        prop_assert_eq!(plain.p_value, mapped.p_value);
    }

    #[test]
    fn ks_statistic_in_unit_interval((a, b) in tie_free_pair()) {
        let r = ks_two_sample(&a, &b).unwrap();
        prop_assert!(r.statistic > 0.0 && r.statistic <= 1.0);
        prop_assert!((0.0..=1.0).contains(&r.p_value));
        prop_assert_eq!(r.statistic, ks_statistic(&a, &b).unwrap());
    }

    #[test]
    fn exact_p_value_decreases_with_statistic(n in 1usize..30, m in 1usize..30) {
        let mut prev = 1.0f64;
        for d in 0..=(n * m) as u64 {
            let p = exact_p_value(d, n, m);
            prop_assert!(p <= prev + 1e-12, "p({d}) = {p} above {prev}");
            prev = p;
        }
        prop_assert!(exact_p_value(0, n, m) >= 1.0 - 1e-12);
    }

    #[test]
    fn frobenius_collapse_matches_materialised((n_in, n_out, w, x, mu, _) in layer_case()) {
        let geo = geometry(n_in, n_out, &w);
        let fast = geo.diff_norm(&x, &mu, NormKind::Frobenius).unwrap();
        let naive: f64 = (0..n_out)
            .flat_map(|j| (0..n_in).map(move |i| (j, i)))
            .map(|(j, i)| (w[j * n_in + i] * x[i] - w[j * n_in + i] * mu[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        prop_assert!((fast - naive).abs() <= 1e-10 * naive.max(1e-300));
    }

    #[test]
    fn norms_obey_triangle_inequality((n_in, n_out, w, x, y, z) in layer_case()) {
        let geo = geometry(n_in, n_out, &w);
        for norm in [NormKind::Frobenius, NormKind::Spectral, NormKind::SupOperator] {
            let xz = geo.diff_norm(&x, &z, norm).unwrap();
            let xy = geo.diff_norm(&x, &y, norm).unwrap();
            let yz = geo.diff_norm(&y, &z, norm).unwrap();
            prop_assert!(xz <= xy + yz + 1e-9 * (1.0 + xy + yz), "{norm:?}: {xz} > {xy} + {yz}");
            prop_assert_eq!(geo.diff_norm(&x, &x, norm).unwrap(), 0.0);
        }
    }

    #[test]
    fn spectral_bounded_by_frobenius((n_in, n_out, w, x, mu, _) in layer_case()) {
        let geo = geometry(n_in, n_out, &w);
        let spec = geo.diff_norm(&x, &mu, NormKind::Spectral).unwrap();
        let fro = geo.diff_norm(&x, &mu, NormKind::Frobenius).unwrap();
        prop_assert!(spec <= fro * (1.0 + 1e-9) + 1e-12);
        // rank-k matrix: fro <= sqrt(k) * spec
        let k = n_in.min(n_out) as f64;
        prop_assert!(fro <= k.sqrt() * spec * (1.0 + 1e-6) + 1e-9);
    }

    #[test]
    fn spectral_matches_jacobi_oracle(
        (rows, cols, m) in (1usize..9, 1usize..9).prop_flat_map(|(r, c)| {
            (Just(r), Just(c), prop::collection::vec(-5.0f64..5.0, r * c))
        })
    ) {
        let fast = spectral_norm_raw(rows, cols, &m);
        let oracle = gram_oracle(rows, cols, &m);
        prop_assert!((fast - oracle).abs() <= 1e-6 * oracle.max(1e-12), "{fast} vs {oracle}");
    }

    #[test]
    fn sup_operator_is_max_row_sum((n_in, n_out, w, x, mu, _) in layer_case()) {
        let geo = geometry(n_in, n_out, &w);
        let oracle = (0..n_out)
            .map(|j| (0..n_in).map(|i| (w[j * n_in + i] * (x[i] - mu[i])).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        prop_assert!((geo.diff_norm(&x, &mu, NormKind::SupOperator).unwrap() - oracle).abs() <= 1e-12 * (1.0 + oracle));
    }

    #[test]
    fn bonferroni_rejects_iff_min_p_below_threshold(
        cols in 1usize..5,
        n in 5usize..20,
        m in 5usize..20,
        seed in any::<u64>(),
        alpha in 0.01f64..0.2,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |rows: usize, shift: f64| {
            let values: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>() + shift).collect();
            FeatureMatrix::new(FeatureKind::ConfidenceVector, rows, cols, values, "t").unwrap()
        };
        let a = draw(n, 0.0);
        let b = draw(m, 0.3);
        let out = bonferroni_test(&a, &b, alpha).unwrap();
        prop_assert_eq!(out.coordinates.len(), cols);
        prop_assert_eq!(out.reject, out.min_p_value() < alpha / cols as f64);
        for (c, r) in out.coordinates.iter().enumerate() {
            prop_assert_eq!(r, &ks_two_sample(&a.column(c), &b.column(c)).unwrap());
        }
    }
}

/// Small relu network with a fixed seed for the graph tests below.
fn small_net() -> Network {
    Network::mlp(&[6, 5, 4, 3], Activation::Relu, 11).unwrap()
}

fn small_data(count: usize) -> LabeledSet {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let samples = (0..count)
        .map(|_| Tensor::vector((0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
        .collect();
    let labels = (0..count).map(|i| i % 3).collect();
    LabeledSet::new(samples, labels).unwrap()
}

#[test]
fn mean_graph_equals_average_of_graphs() {
    let net = small_net();
    let data = small_data(30);
    for layer in 0..net.layers().len() {
        // subset covers every sample, so the mean is over the full class
        let summaries = mean_graph_summaries(&net, &data, layer, 1000, 0).unwrap();
        for s in &summaries {
            let members: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == s.class).collect();
            assert_eq!(s.sample_count, members.len());
            let graphs: Vec<_> = members
                .iter()
                .map(|&i| activation_graph(&net, &net.forward(&data.samples[i]).unwrap(), layer).unwrap())
                .collect();
            let mean = s.mean_graph(&net).unwrap();
            for (k, v) in mean.entries.iter().enumerate() {
                let avg = graphs.iter().map(|g| g.entries[k]).sum::<f64>() / graphs.len() as f64;
                assert!((v - avg).abs() <= 1e-12, "layer {layer} class {} entry {k}: {v} vs {avg}", s.class);
            }
        }
    }
}

#[test]
fn magdiff_features_match_materialised_graph_distance() {
    let net = small_net();
    let data = small_data(24);
    let layer = 1;
    let summaries = mean_graph_summaries(&net, &data, layer, 1000, 0).unwrap();
    let kind = FeatureKind::Magdiff { layer, norm: NormKind::Frobenius };
    let feats = extract_features(&net, &summaries, &data.samples, kind, "t").unwrap();
    assert_eq!((feats.rows, feats.cols), (24, 3));
    for (r, x) in data.samples.iter().enumerate() {
        let g = activation_graph(&net, &net.forward(x).unwrap(), layer).unwrap();
        for s in &summaries {
            let mean = s.mean_graph(&net).unwrap();
            let dist = g.entries.iter().zip(&mean.entries).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!((feats.row(r)[s.class] - dist).abs() <= 1e-12 * (1.0 + dist));
        }
    }
}

#[test]
fn confidence_vector_rows_are_distributions() {
    let net = small_net();
    let data = small_data(10);
    let feats = extract_features(&net, &[], &data.samples, FeatureKind::ConfidenceVector, "t").unwrap();
    for r in 0..feats.rows {
        let row = feats.row(r);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }
}
