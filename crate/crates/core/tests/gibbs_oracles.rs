mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use ngmoe::gibbs::*;
use ngmoe::model::*;
use ngmoe::randkit::RngStream;

const DRAWS: usize = 100_000;

fn ln_normal(x: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * x * x / var
}

#[test]
fn local_scale_matches_grid_posterior() {
    let mut rng = RngStream::new(101, 0);
    for &(theta, lambda, beta) in &[(0.5, 2.0, 1.0), (0.1, 0.7, 0.3), (1.0, 5.0, -2.0)] {
        let post = |t: f64| ln_normal(beta, 2.0 / lambda * t) + (theta - 1.0) * t.ln() - theta * t;
        let (grid, cdf) = log_grid_cdf(post, 1e-12, 1e4, 400_000);
        let mut d: Vec<f64> = (0..DRAWS).map(|_| draw_tau2(beta, lambda, theta, &mut rng).unwrap()).collect();
        let ks = ks_distance(&mut d, &grid, &cdf);
        assert!(ks < 0.01, "theta={theta} lambda={lambda} beta={beta}: KS {ks}");
    }
}

#[test]
fn global_scale_matches_grid_posterior() {
    let mut rng = RngStream::new(102, 0);
    let beta = [0.5, -1.2, 0.1];
    let tau2 = [0.3, 2.0, 0.05];
    for &(c0, c1) in &[(0.01, 0.01), (2.0, 1.0)] {
        let post = |l: f64| {
            beta.iter().zip(&tau2).map(|(b, t)| ln_normal(*b, 2.0 / l * t)).sum::<f64>() + (c0 - 1.0) * l.ln() - c1 * l
        };
        let (grid, cdf) = log_grid_cdf(post, 1e-8, 1e3, 400_000);
        let mut d: Vec<f64> = (0..DRAWS).map(|_| draw_lambda(&beta, &tau2, c0, c1, &mut rng)).collect();
        let ks = ks_distance(&mut d, &grid, &cdf);
        assert!(ks < 0.01, "c0={c0} c1={c1}: KS {ks}");
    }
}

#[test]
fn occurrence_probability_matches_beta_posterior() {
    // N_k = 10 with 7 ones → Beta(8, 4)
    let y = DMatrix::from_fn(12, 1, |i, _| if i < 7 || i == 10 { 1.0 } else { 0.0 });
    let labels: Vec<usize> = (0..12).map(|i| if i < 10 { 0 } else { 1 }).collect();
    let comps = Components::Bernoulli(BernoulliComponent::uniform(2, 1));
    let mut rng = RngStream::new(103, 0);
    let mut d = Vec::with_capacity(DRAWS);
    for _ in 0..DRAWS {
        let (c, _) = update_components(&comps, &y, &labels, &mut rng).unwrap();
        if let Components::Bernoulli(b) = c {
            d.push(b.gamma[(0, 0)]);
        }
    }
    let (m, v) = mean_var(&d);
    assert!((m - 2.0 / 3.0).abs() < 4.0 * (v / DRAWS as f64).sqrt());
    let var = 8.0 * 4.0 / (144.0 * 13.0);
    assert!((v - var).abs() < 4.0 * var * (2.0 / DRAWS as f64).sqrt() * 1.5);
    let (grid, cdf) = lin_grid_cdf(|g| 7.0 * g.ln() + 3.0 * (1.0 - g).ln(), 1e-9, 1.0 - 1e-9, 200_000);
    assert!(ks_distance(&mut d, &grid, &cdf) < 0.01);
}

#[test]
fn gating_row_matches_normal_conditional() {
    let mut rng = RngStream::new(104, 0);
    let n = 20;
    let x = DMatrix::from_fn(n, 1, |_, _| rng.normal());
    let omega: Vec<f64> = (0..n).map(|i| 0.1 + 0.02 * i as f64).collect();
    let offset: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let is_k: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
    let prior_prec = 0.4;
    // scalar oracle
    let prec = (0..n).map(|i| omega[i] * x[(i, 0)].powi(2)).sum::<f64>() + prior_prec;
    let lin = (0..n).map(|i| x[(i, 0)] * ((if is_k[i] { 0.5 } else { -0.5 }) + omega[i] * offset[i])).sum::<f64>();
    let (m, v) = (lin / prec, 1.0 / prec);
    let cond = beta_conditional(&x, &omega, &offset, &is_k, &[prior_prec]).unwrap();
    assert!((cond.mean[0] - m).abs() < 1e-12);
    let d: Vec<f64> = (0..DRAWS).map(|_| cond.sample(&mut rng)[0]).collect();
    let (em, ev) = mean_var(&d);
    assert!((em - m).abs() < 4.0 * (v / DRAWS as f64).sqrt(), "{em} vs {m}");
    assert!((ev - v).abs() < 4.0 * v * (2.0 / DRAWS as f64).sqrt(), "{ev} vs {v}");
}

#[test]
fn zero_index_local_scale_stays_positive() {
    let mut rng = RngStream::new(105, 0);
    for b in [0.0, 1e-200, 0.5] {
        for _ in 0..1000 {
            let t = draw_tau2(b, 1.0, 0.5, &mut rng).unwrap();
            assert!(t > 0.0 && t.is_finite());
        }
    }
}

#[test]
fn gaussian_mean_is_shrunk_toward_prior() {
    let y = DMatrix::from_column_slice(5, 1, &[2.1, 1.7, 2.6, 1.9, 2.2]);
    let niw = NiwParams::new(DVector::from_element(1, 0.0), 1.0, 3.0, DMatrix::from_element(1, 1, 1.0)).unwrap();
    let post = niw.posterior(&y, &[0, 1, 2, 3, 4]);
    let ybar = y.mean();
    assert!(post.m[0] > 0.0 && post.m[0] < ybar);
    assert!((post.m[0] - 5.0 * ybar / 6.0).abs() < 1e-14);
}

#[test]
fn omega_offsets_at_zero_coefficients() {
    let x = DMatrix::from_element(4, 1, 1.0);
    let data = Dataset::new(DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 1.0, 0.0]), x, true).unwrap();
    let state = ChainState {
        labels: LabelVector::new(vec![0, 1, 0, 1], 2).unwrap(),
        beta: GatingCoefficients::zeros(2, 1),
        prior_state: PriorState::Flat,
        omega: DMatrix::from_element(4, 1, 0.25),
        components: None,
    };
    let mut rng = RngStream::new(106, 0);
    let mut acc = 0.0;
    let reps = 20_000;
    for _ in 0..reps {
        acc += update_omega(&state, &data, &mut rng).sum();
    }
    // PG(1, 0) has mean 1/4
    let mean = acc / (4 * reps) as f64;
    assert!((mean - 0.25).abs() < 4.0 * (1.0f64 / 24.0 / (4 * reps) as f64).sqrt());
}

fn draw_prior(prior: &GatingPrior, x: &DMatrix<f64>, rng: &mut RngStream) -> ChainState {
    let (k, p) = (2, x.ncols());
    let (beta, prior_state) = match prior {
        GatingPrior::Ng(h) => {
            let lambda = rng.gamma(h.c0, h.c1);
            let tau2: Vec<f64> = (0..p).map(|_| rng.gamma(h.theta, h.theta)).collect();
            let b: Vec<f64> = tau2.iter().map(|t| rng.normal() * (2.0 / lambda * t).sqrt()).collect();
            (
                DMatrix::from_row_slice(1, p, &b),
                PriorState::Ng(NgState { tau2: DMatrix::from_row_slice(1, p, &tau2), lambda: DVector::from_element(1, lambda) }),
            )
        }
        GatingPrior::Ssvs(h) => {
            let delta: Vec<u8> = (0..p).map(|_| u8::from(rng.uniform() < h.incl_prob)).collect();
            let b: Vec<f64> =
                delta.iter().map(|d| rng.normal() * if *d == 1 { h.slab_var } else { h.spike_var }.sqrt()).collect();
            (DMatrix::from_row_slice(1, p, &b), PriorState::Ssvs(SsvsState { delta: DMatrix::from_row_slice(1, p, &delta) }))
        }
        GatingPrior::Flat(h) => {
            (DMatrix::from_fn(1, p, |_, _| rng.normal() * h.prior_var.sqrt()), PriorState::Flat)
        }
    };
    let mut b = BernoulliComponent::uniform(k, 2);
    b.a0.fill(2.0);
    b.b0.fill(2.0);
    b.gamma = DMatrix::from_fn(k, 2, |_, _| rng.beta(2.0, 2.0));
    let beta = GatingCoefficients::new(beta).unwrap();
    let labels = draw_labels(&beta, x, rng);
    ChainState { labels, beta, prior_state, omega: DMatrix::from_element(x.nrows(), 1, 0.25), components: Some(Components::Bernoulli(b)) }
}

fn draw_labels(beta: &GatingCoefficients, x: &DMatrix<f64>, rng: &mut RngStream) -> LabelVector {
    let lp = beta.log_probs_matrix(x).unwrap();
    let s = (0..x.nrows()).map(|i| rng.categorical_log(&[lp[(i, 0)], lp[(i, 1)]])).collect();
    LabelVector::new(s, 2).unwrap()
}

fn draw_y(state: &ChainState, rng: &mut RngStream) -> DMatrix<f64> {
    let Some(Components::Bernoulli(b)) = &state.components else { unreachable!() };
    let s = state.labels.as_slice();
    DMatrix::from_fn(s.len(), 2, |i, j| if rng.uniform() < b.gamma[(s[i], j)] { 1.0 } else { 0.0 })
}

fn stats(state: &ChainState) -> Vec<f64> {
    let b = state.beta.matrix();
    let Some(Components::Bernoulli(c)) = &state.components else { unreachable!() };
    let mut v = vec![
        b[(0, 0)],
        b[(0, 1)],
        b[(0, 0)].powi(2),
        c.gamma[(0, 0)],
        c.gamma[(1, 1)],
        state.labels.as_slice().iter().filter(|&&s| s == 0).count() as f64,
    ];
    match &state.prior_state {
        PriorState::Ng(s) => {
            v.push(s.lambda[0].ln());
            v.push(s.tau2[(0, 1)].ln());
        }
        PriorState::Ssvs(s) => v.push(s.delta[(0, 0)] as f64),
        PriorState::Flat => {}
    }
    v
}

/// Marginal-conditional vs successive-conditional simulation: every
/// statistic of the joint (θ, S) must agree between forward sampling from
/// the prior and alternating posterior sweeps with data regeneration.
fn geweke(prior: GatingPrior, seed: u64) {
    let rounds = 100_000;
    let mut rng = RngStream::new(seed, 0);
    let x = DMatrix::from_row_slice(6, 2, &[1.0, -1.2, 1.0, -0.4, 1.0, 0.0, 1.0, 0.3, 1.0, 0.9, 1.0, 1.6]);
    let cfg = ChainConfig { k: 2, prior, bernoulli_a0: 2.0, bernoulli_b0: 2.0, permute: false, ..Default::default() };

    let mut forward: Vec<Vec<f64>> = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        forward.push(stats(&draw_prior(&prior, &x, &mut rng)));
    }

    let mut state = draw_prior(&prior, &x, &mut rng);
    let mut run = RunStats::default();
    let mut chain: Vec<Vec<f64>> = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let y = draw_y(&state, &mut rng);
        let data = Dataset::new(y, x.clone(), true).unwrap();
        sweep(&mut state, &data, &cfg, &mut rng, &mut run).unwrap();
        chain.push(stats(&state));
    }

    for s in 0..forward[0].len() {
        let f: Vec<f64> = forward.iter().map(|r| r[s]).collect();
        let c: Vec<f64> = chain.iter().map(|r| r[s]).collect();
        let (mf, vf) = mean_var(&f);
        let (mc, _) = mean_var(&c);
        let se = (vf / rounds as f64 + batch_se(&c, 100).powi(2)).sqrt();
        let z = (mf - mc) / se;
        assert!(z.abs() < 4.0, "{} statistic {s}: forward {mf}, sweeps {mc}, z = {z}", prior.name());
    }
}

#[test]
fn geweke_ng() {
    geweke(GatingPrior::Ng(NgHyper::new(1.0, 3.0, 3.0).unwrap()), 201);
}

#[test]
fn geweke_ssvs() {
    geweke(GatingPrior::Ssvs(SsvsHyper::new(0.05, 1.0, 0.5).unwrap()), 202);
}

#[test]
fn geweke_flat() {
    geweke(GatingPrior::Flat(FlatHyper { prior_var: 1.0 }), 203);
}

fn bernoulli_data(n: usize, seed: u64) -> Dataset {
    let mut rng = RngStream::new(seed, 0);
    let x = DMatrix::from_fn(n, 2, |_, c| if c == 0 { 1.0 } else { rng.normal() });
    let y = DMatrix::from_fn(n, 3, |i, j| {
        let p = if i % 3 == 0 { [0.9, 0.1, 0.8][j] } else { [0.2, 0.7, 0.3][j] };
        if rng.uniform() < p { 1.0 } else { 0.0 }
    });
    Dataset::new(y, x, true).unwrap()
}

#[test]
fn permutation_frequencies_are_uniform() {
    let data = bernoulli_data(40, 7);
    let cfg = ChainConfig { k: 3, n_burn: 0, n_save: 12_000, snapshot_count: 1, ..Default::default() };
    let store = run_chain(&cfg, &data).unwrap();
    let mut counts = std::collections::HashMap::new();
    for p in &store.permutations {
        *counts.entry(p.clone()).or_insert(0usize) += 1;
    }
    assert_eq!(counts.len(), 6);
    let m = store.len() as f64;
    let se = (1.0 / 6.0 * 5.0 / 6.0 / m).sqrt();
    for (perm, c) in counts {
        assert!((c as f64 / m - 1.0 / 6.0).abs() < 4.0 * se, "{perm:?}: {c}");
    }
}

#[test]
fn chains_are_deterministic_and_persist() {
    let data = bernoulli_data(30, 8);
    let cfg = ChainConfig { k: 2, n_burn: 50, n_save: 200, snapshot_count: 20, seed: 42, ..Default::default() };
    let a = run_chain(&cfg, &data).unwrap();
    let mut b = run_chain(&cfg, &data).unwrap();
    b.stats.runtime_sec = a.stats.runtime_sec;
    assert_eq!(a, b);
    assert_eq!(a.len(), 200);
    assert_eq!(a.snapshots.len(), 20);
    let dir = tempfile::tempdir().unwrap();
    a.save(dir.path()).unwrap();
    let c = DrawsStore::load(dir.path()).unwrap();
    assert_eq!(a.beta, c.beta);
    assert_eq!(a.prior_states, c.prior_states);
    assert_eq!(a.components, c.components);
    assert_eq!(a.labels, c.labels);
    assert_eq!(a.permutations, c.permutations);
    assert_eq!(a.snapshot_iters, c.snapshot_iters);
    assert_eq!(a.snapshots, c.snapshots);
    assert_eq!(a.stats, c.stats);
    assert_eq!(a, c);
    let other = run_chain(&ChainConfig { seed: 43, ..cfg }, &data).unwrap();
    assert_ne!(a.beta, other.beta);
}

#[test]
fn single_component_reduces_to_beta_bernoulli() {
    let data = bernoulli_data(30, 9);
    let cfg = ChainConfig { k: 1, n_burn: 10, n_save: 20_000, snapshot_count: 5, ..Default::default() };
    let store = run_chain(&cfg, &data).unwrap();
    assert!(store.beta.iter().all(|b| b.matrix().nrows() == 0));
    assert!(store.labels.iter().all(|l| l.iter().all(|&s| s == 0)));
    let y = data.responses();
    for j in 0..3 {
        let ones = y.column(j).iter().filter(|v| **v > 0.5).count() as f64;
        let (a, b) = (1.0 + ones, 1.0 + 30.0 - ones);
        let d: Vec<f64> = store
            .components
            .iter()
            .map(|c| match c {
                Components::Bernoulli(g) => g.gamma[(0, j)],
                _ => unreachable!(),
            })
            .collect();
        let (m, _) = mean_var(&d);
        let sd = (a * b / ((a + b).powi(2) * (a + b + 1.0))).sqrt();
        assert!((m - a / (a + b)).abs() < 4.0 * sd / (d.len() as f64).sqrt());
    }
}
