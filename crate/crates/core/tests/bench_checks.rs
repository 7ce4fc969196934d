use ngmoe::bench::*;
use ngmoe::randkit::RngStream;

#[test]
fn study1_group_frequencies_match_gating_probabilities() {
    let d = gen_study1(&Study1Design { n_obs: 20_000 }, &mut RngStream::new(1, 0)).unwrap();
    let n = 20_000.0;
    let counts = d.labels.counts();
    for k in 0..4 {
        let expect = d.probs.column(k).sum() / n;
        let freq = counts[k] as f64 / n;
        assert!((freq - expect).abs() < 4.0 * (expect * (1.0 - expect) / n).sqrt(), "group {k}: {freq} vs {expect}");
    }
    for c in 0..STUDY_P {
        assert!(d.x.column(c).mean().abs() < 4.0 / n.sqrt());
    }
}

#[test]
fn study2_design_shapes() {
    for sc in Scenario::ALL {
        let design = Study2Design::new(sc);
        let d = gen_study2(&design, &mut RngStream::new(2, 0)).unwrap();
        assert_eq!(d.data.n(), 300);
        assert_eq!(d.data.p(), design.n_predictors() + 1);
        assert!(d.data.covariates().column(0).iter().all(|v| *v == 1.0));
        assert_eq!(design.true_beta().shape(), (3, design.n_predictors() + 1));
    }
    assert_eq!(Study2Design::new(Scenario::HighSparsity).n_predictors(), 80);
    assert_eq!("well_separated".parse::<Scenario>().unwrap(), Scenario::WellSeparated);
}

#[test]
fn well_separated_bayes_classifier_is_accurate() {
    let design = Study2Design { n_obs: 5000, ..Study2Design::new(Scenario::WellSeparated) };
    let d = gen_study2(&design, &mut RngStream::new(3, 0)).unwrap();
    let tau = true_membership(&d).unwrap();
    let wrong = (0..5000)
        .filter(|&i| {
            let row = tau.row(i);
            let best = (0..4).max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap()).unwrap();
            best != d.labels.as_slice()[i]
        })
        .count();
    assert!((wrong as f64 / 5000.0) < 0.05, "{wrong}");
}

#[test]
fn rmse_of_truth_is_zero_and_decomposes() {
    let truth = study1_true_beta();
    let (z, nz, all, n0, n1) = beta_rmse(&truth, &truth).unwrap();
    assert_eq!((z, nz, all), (0.0, 0.0, 0.0));
    assert_eq!(n0 + n1, 60);
    let mut rng = RngStream::new(4, 0);
    let est = truth.map(|v| v + 0.3 * rng.normal());
    let (z, nz, all, n0, n1) = beta_rmse(&est, &truth).unwrap();
    let lhs = all * all * (n0 + n1) as f64;
    let rhs = z * z * n0 as f64 + nz * nz * n1 as f64;
    assert!((lhs - rhs).abs() < 1e-12);
    // hand computation of the overall RMSE
    let direct = ((&est - &truth).norm_squared() / 60.0).sqrt();
    assert!((all - direct).abs() < 1e-14);
}

#[test]
fn label_matching_undoes_a_renaming() {
    let truth: Vec<usize> = (0..40).map(|i| i % 4).collect();
    let renamed: Vec<usize> = truth.iter().map(|&s| [2, 0, 3, 1][s]).collect();
    let (_, miscl) = match_labels(&renamed, &truth, 4).unwrap();
    assert_eq!(miscl, 0.0);
    let mut noisy = renamed.clone();
    noisy[0] = (noisy[0] + 1) % 4;
    assert!((match_labels(&noisy, &truth, 4).unwrap().1 - 1.0 / 40.0).abs() < 1e-15);
}

#[test]
fn zero_replications_is_an_error() {
    let spec = StudySpec { reps: 0, ..StudySpec::new(StudyKind::Logit { n_obs: 50 }) };
    assert!(run_study(&spec).is_err());
    let spec = StudySpec { bf_k_range: Some(vec![2, 3]), ..StudySpec::new(StudyKind::Moe { scenario: Scenario::WellSeparated }) };
    assert!(run_study(&spec).is_err());
}

#[test]
fn small_study_writes_tables() {
    let spec = StudySpec {
        reps: 2,
        n_burn: 50,
        n_save: 100,
        snapshot_count: 10,
        ..StudySpec::new(StudyKind::Logit { n_obs: 120 })
    };
    let out = run_study(&spec).unwrap();
    assert_eq!(out.reps.len(), 6);
    assert_eq!(out.reference, PriorKind::Ng);
    let ng = out.aggregate.iter().find(|a| a.prior == PriorKind::Ng).unwrap();
    assert_eq!(ng.rel_rmse_zeros, 1.0);
    let dir = tempfile::tempdir().unwrap();
    out.write_csv(dir.path()).unwrap();
    let mut r = csv::Reader::from_path(dir.path().join("replications.csv")).unwrap();
    assert_eq!(r.records().count(), 6);
    assert!(!dir.path().join("log_bf.csv").exists());
    let again = run_study(&spec).unwrap();
    let strip = |o: &StudyOutput| o.reps.iter().map(|r| r.metrics.rmse_overall).collect::<Vec<_>>();
    assert_eq!(strip(&out), strip(&again));
}
