use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softqd::domains::{LinearProjection, LP_BOUND};
use softqd::soft_score::{all_pairs, squad_objective};
use softqd::squad::{
    batch_gradient, knn_indices, logit_jacobian_diag, logit_transform, run_squad, SquadConfig, SquadRunner,
};
use softqd::{evaluate_population, seeded_random_population, Evaluation, Population, Problem, Solution};

const GAMMA_SQ: f64 = 0.1;
const EPS: f64 = 1e-6;

fn logit(b: f64) -> f64 {
    let c = b.clamp(EPS, 1.0 - EPS);
    (c / (1.0 - c)).ln()
}

// Objective written out from its definition, independent of the library code.
fn oracle_batch_objective(evals: &[Evaluation<f64>], batch: &[usize], lists: &[Vec<usize>]) -> f64 {
    let z: Vec<Vec<f64>> = evals
        .iter()
        .map(|e| e.descriptor.iter().map(|&b| logit(b)).collect())
        .collect();
    let mut s = 0.0;
    for &i in batch {
        s += evals[i].quality;
        for &j in &lists[i] {
            let d2: f64 = z[i].iter().zip(&z[j]).map(|(a, b)| (a - b).powi(2)).sum();
            let fi = evals[i].quality.max(0.0);
            let fj = evals[j].quality.max(0.0);
            s -= 0.5 * (fi * fj).sqrt() * (-d2 / GAMMA_SQ).exp();
        }
    }
    s
}

fn random_lp_population(problem: &LinearProjection<f64>, rng: &mut ChaCha8Rng, n: usize) -> Population<f64> {
    let sols = (0..n)
        .map(|_| {
            Solution::new(
                (0..problem.solution_dim())
                    .map(|_| rng.random_range(-8.0..8.0))
                    .collect(),
            )
        })
        .collect();
    evaluate_population(problem, sols).unwrap()
}

fn config(n: usize, m: usize, k: usize) -> SquadConfig {
    SquadConfig {
        population_size: n,
        batch_size: m,
        neighbors: k,
        gamma_sq: GAMMA_SQ,
        ..SquadConfig::default()
    }
}

#[test]
fn batch_gradient_matches_finite_differences() {
    let problem = LinearProjection::<f64>::new(1024, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let pop = random_lp_population(&problem, &mut rng, 8);
        let k = 3;
        let z: Vec<Vec<f64>> = pop
            .descriptors()
            .iter()
            .map(|b| b.iter().map(|&x| logit(x)).collect())
            .collect();
        let lists = knn_indices(&z, k).unwrap();
        let batch = vec![1, 2, 5, 6];
        let cfg = config(8, 4, k);
        let grads = batch_gradient(&pop, &batch, &lists, &problem, &cfg).unwrap();

        for (slot, &a) in batch.iter().enumerate() {
            let coords: Vec<usize> = (0..128)
                .map(|_| rng.random_range(0..1024))
                .filter(|&c| (pop.params(a)[c].abs() - LP_BOUND).abs() > 10.0 * h)
                .collect();
            let mut num = 0.0;
            let mut den = 0.0;
            for &c in &coords {
                let objective_at = |delta: f64| {
                    let mut x = pop.params(a).to_vec();
                    x[c] += delta;
                    let mut evals = pop.evaluations().to_vec();
                    evals[a] = problem.eval(&x);
                    oracle_batch_objective(&evals, &batch, &lists)
                };
                let fd = (objective_at(h) - objective_at(-h)) / (2.0 * h);
                num += (grads[slot][c] - fd).powi(2);
                den += fd * fd;
            }
            let rel = (num / den).sqrt();
            worst = worst.max(rel);
        }
    }
    assert!(worst <= 1e-4, "worst relative error {worst:e}");
}

#[test]
fn logit_jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let b: Vec<f64> = (0..4).map(|_| rng.random_range(0.01..0.99)).collect();
        let jac = logit_jacobian_diag(&b);
        for k in 0..4 {
            let h = 1e-6;
            let mut up = b.clone();
            let mut dn = b.clone();
            up[k] += h;
            dn[k] -= h;
            let fd = (logit_transform(&up, EPS).unwrap()[k] - logit_transform(&dn, EPS).unwrap()[k]) / (2.0 * h);
            assert!(((jac[k] - fd) / fd).abs() <= 1e-6, "b {} jac {} fd {fd}", b[k], jac[k]);
        }
    }
}

#[test]
fn zero_neighbors_gives_quality_gradient() {
    let problem = LinearProjection::<f64>::new(64, 4).unwrap();
    let pop = seeded_random_population(&problem, 6, 5, (-5.12, 5.12)).unwrap();
    let lists = vec![Vec::new(); 6];
    let grads = batch_gradient(&pop, &[0, 3], &lists, &problem, &config(6, 2, 0)).unwrap();
    for (slot, i) in [0, 3].into_iter().enumerate() {
        assert_eq!(grads[slot], problem.eval_with_grads(pop.params(i)).grad_quality);
    }
}

#[test]
fn gradient_is_permutation_equivariant() {
    let problem = LinearProjection::<f64>::new(64, 4).unwrap();
    let pop = seeded_random_population(&problem, 5, 13, (-5.12, 5.12)).unwrap();
    let perm = [3, 0, 4, 1, 2];
    let swapped = Population::from_parts(
        perm.iter().map(|&p| pop.solutions()[p].clone()).collect(),
        perm.iter().map(|&p| pop.evaluations()[p].clone()).collect(),
    )
    .unwrap();
    let cfg = config(5, 5, 4);
    let g = batch_gradient(&pop, &[0, 1, 2, 3, 4], &all_pairs(5), &problem, &cfg).unwrap();
    let gs = batch_gradient(&swapped, &[0, 1, 2, 3, 4], &all_pairs(5), &problem, &cfg).unwrap();
    for (slot, &p) in perm.iter().enumerate() {
        for (a, b) in gs[slot].iter().zip(&g[p]) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}

#[test]
fn runner_updates_only_the_batch_and_re_evaluates() {
    let problem = LinearProjection::<f64>::new(128, 4).unwrap();
    let cfg = config(12, 4, 3);
    let pop = seeded_random_population(&problem, 12, 9, (-5.12, 5.12)).unwrap();
    let mut runner = SquadRunner::new(&problem, &cfg, pop.clone()).unwrap();
    let batches = runner.batches();
    assert_eq!(batches, vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7], vec![8, 9, 10, 11]]);
    runner.step_batch(&batches[1]).unwrap();
    let after = runner.population();
    for i in 0..12 {
        let moved = after.params(i) != pop.params(i);
        assert_eq!(moved, (4..8).contains(&i), "solution {i}");
        assert_eq!(after.evaluations()[i], problem.eval(after.params(i)));
        assert_eq!(runner.adam_state(i).step_count, u64::from((4..8).contains(&i)));
    }
    assert_eq!(runner.evaluations(), 12 + 4);
}

#[test]
fn zero_epochs_returns_initial_population() {
    let problem = LinearProjection::<f64>::new(64, 4).unwrap();
    let cfg = SquadConfig {
        epochs: 0,
        ..config(16, 4, 3)
    };
    let out = run_squad(&problem, &cfg, 4).unwrap();
    let initial = seeded_random_population(&problem, 16, 4, (-5.12, 5.12)).unwrap();
    assert_eq!(out.population, initial);
    assert_eq!(out.records.len(), 1);
    assert_eq!(out.records[0].epoch, 0);
    assert_eq!(out.evaluations, 16);
}

#[test]
fn runs_are_deterministic() {
    let problem = LinearProjection::<f64>::new(64, 4).unwrap();
    let cfg = SquadConfig {
        epochs: 5,
        ..config(16, 4, 3)
    };
    let a = run_squad(&problem, &cfg, 21).unwrap();
    let b = run_squad(&problem, &cfg, 21).unwrap();
    assert_eq!(a.population, b.population);
    let strip = |r: &softqd::squad::IterationRecord| (r.epoch, r.objective_tilde, r.mean_quality, r.max_quality);
    assert_eq!(
        a.records.iter().map(strip).collect::<Vec<_>>(),
        b.records.iter().map(strip).collect::<Vec<_>>()
    );
    let c = run_squad(&problem, &cfg, 22).unwrap();
    assert_ne!(a.population, c.population);
}

#[test]
fn pure_quality_ascent_does_not_lower_the_mean() {
    let problem = LinearProjection::<f64>::new(64, 4).unwrap();
    let cfg = SquadConfig {
        epochs: 50,
        learning_rate: 0.01,
        ..config(32, 8, 0)
    };
    let out = run_squad(&problem, &cfg, 2).unwrap();
    let first = out.records.first().unwrap().mean_quality;
    let last = out.records.last().unwrap().mean_quality;
    assert!(last > first, "{first} -> {last}");
    assert_eq!(out.evaluations, 32 * 51);
}

#[test]
fn knn_matches_sorting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pts: Vec<Vec<f64>> = (0..40)
        .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let lists = knn_indices(&pts, 5).unwrap();
    for (i, list) in lists.iter().enumerate() {
        let mut order: Vec<(f64, usize)> = (0..40)
            .filter(|&j| j != i)
            .map(|j| (pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b).powi(2)).sum(), j))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let expect: Vec<usize> = order[..5].iter().map(|p| p.1).collect();
        assert_eq!(list, &expect);
    }
}

#[test]
fn all_pairs_objective_is_the_pair_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let evals: Vec<Evaluation<f64>> = (0..9)
        .map(|_| {
            Evaluation::new(
                rng.random_range(0.0..10.0),
                vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            )
        })
        .collect();
    let mut expect: f64 = evals.iter().map(|e| e.quality).sum();
    for i in 0..9 {
        for j in i + 1..9 {
            let d2: f64 = evals[i]
                .descriptor
                .iter()
                .zip(&evals[j].descriptor)
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            expect -= (evals[i].quality * evals[j].quality).sqrt() * (-d2 / 0.3).exp();
        }
    }
    let got = squad_objective(&evals, 0.3, &all_pairs(9)).unwrap();
    assert!(
        (got - expect).abs() <= 1e-12 * expect.abs().max(1.0),
        "{got} vs {expect}"
    );
}
