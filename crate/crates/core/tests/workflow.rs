use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use varsphere::averaging::choose_rank;
use varsphere::clustering::{cluster_summary, inertia_ratio, kmeans};
use varsphere::simulation::{rand_index, simulate_sample};
use varsphere::{ClusteringConfig, DistanceKind, RankCriterion, Weights};

fn sample(seed: u64) -> (Weights, Vec<varsphere::Resultant>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = simulate_sample(60, std::f64::consts::FRAC_PI_2, 0.05, &mut rng).unwrap();
    let w = Weights::uniform(60);
    let rs = s.resultants(&w).unwrap();
    (w, rs, s.truth)
}

#[test]
fn well_separated_sample_is_recovered() {
    let (w, rs, truth) = sample(1);
    for distance in [DistanceKind::Chord, DistanceKind::Geodesic] {
        let config = ClusteringConfig {
            distance,
            criterion: RankCriterion::TraceRatio { theta: 1.0 },
            ..ClusteringConfig::new(3)
        };
        let model = kmeans(&rs, &config, &w).unwrap();
        assert_eq!(rand_index(&model.assignments, &truth).unwrap(), 0.0, "{distance:?}");
        assert!(model.converged);
        let ratio = inertia_ratio(&model, &rs, &w).unwrap();
        assert!((ratio - model.between_over_total).abs() < 1e-12);
        assert!(ratio > 0.0 && ratio < 1.0);
    }
}

#[test]
fn plane_cluster_gets_rank_two() {
    let (w, rs, truth) = sample(2);
    let config = ClusteringConfig {
        criterion: RankCriterion::TraceRatio { theta: 0.8 },
        ..ClusteringConfig::new(3)
    };
    let model = kmeans(&rs, &config, &w).unwrap();
    let plane = model.assignments[truth.iter().position(|t| *t == 0).unwrap()];
    assert!(model.ranks[plane] >= 2);
    let summary = cluster_summary(&model, &rs, &w).unwrap();
    assert_eq!(summary.len(), rs.len());
    assert!(summary.iter().all(|m| m.cosine > 0.0 && m.cosine <= 1.0 + 1e-12));
}

#[test]
fn more_clusters_explain_more() {
    let (w, rs, _) = sample(3);
    let mut last = -1.0;
    for l in 1..=4 {
        let config = ClusteringConfig {
            criterion: RankCriterion::Fixed { h: 1 },
            n_starts: 20,
            ..ClusteringConfig::new(l)
        };
        let ratio = kmeans(&rs, &config, &w).unwrap().between_over_total;
        assert!(ratio >= last - 1e-9, "L = {l}: {ratio} < {last}");
        last = ratio;
    }
}

#[test]
fn cattell_on_a_scree() {
    // second differences: 0.167, 0.101, 0.005
    let spectrum = [0.485, 0.197, 0.079, 0.062, 0.05];
    assert_eq!(choose_rank(&spectrum, RankCriterion::Cattell).unwrap(), 2);
}
