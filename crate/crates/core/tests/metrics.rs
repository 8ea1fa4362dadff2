use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softqd::metrics::{build_cvt, build_cvt_with, compute_metrics_for, vendi_score, CvtArchive, CvtOptions};
use softqd::Evaluation;

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
}

fn kernel(points: &[Vec<f64>], s2: f64) -> Vec<Vec<f64>> {
    let n = points.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d2: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum();
                    (-d2 / s2).exp() / n as f64
                })
                .collect()
        })
        .collect()
}

// Cyclic Jacobi eigenvalues of a symmetric matrix.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j].powi(2))
            .sum();
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

fn vendi_oracle(points: &[Vec<f64>], s2: f64) -> f64 {
    let eig = jacobi_eigenvalues(kernel(points, s2));
    let h: f64 = eig.iter().filter(|&&l| l > 0.0).map(|&l| -l * l.ln()).sum();
    h.exp()
}

#[test]
fn vendi_matches_jacobi_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (n, d) in [(5, 2), (20, 4), (40, 3), (60, 8)] {
        let pts = random_points(&mut rng, n, d);
        let s2 = d as f64 / 6.0;
        let got = vendi_score(&pts, s2).unwrap();
        let want = vendi_oracle(&pts, s2);
        assert!((got - want).abs() <= 1e-8 * want, "n {n} d {d}: {got} vs {want}");
    }
}

#[test]
fn kernel_eigenvalues_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pts = random_points(&mut rng, 30, 4);
    let eig = jacobi_eigenvalues(kernel(&pts, 0.5));
    assert!((eig.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn vendi_invariances() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts = random_points(&mut rng, 25, 4);
    let base = vendi_score(&pts, 0.4).unwrap();
    let mut shuffled = pts.clone();
    shuffled.reverse();
    shuffled.swap(3, 17);
    assert!((vendi_score(&shuffled, 0.4).unwrap() - base).abs() < 1e-9);
    // Repeating every point leaves the kernel spectrum, and so the score, unchanged.
    let doubled: Vec<Vec<f64>> = pts.iter().chain(&pts).cloned().collect();
    assert!((vendi_score(&doubled, 0.4).unwrap() - base).abs() < 1e-8);
    let same = vec![vec![0.3f64, 0.3]; 10];
    assert!((vendi_score(&same, 0.4).unwrap() - 1.0).abs() < 1e-9);
}

fn quantization_error(archive: &CvtArchive<f64>, samples: &[Vec<f64>]) -> f64 {
    samples
        .iter()
        .map(|s| {
            archive
                .centroids()
                .iter()
                .map(|c| c.iter().zip(s).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / samples.len() as f64
}

#[test]
fn cvt_quantization_close_to_larger_sample_run() {
    let opts = CvtOptions {
        samples: 5_000,
        ..CvtOptions::default()
    };
    let fine = CvtOptions {
        samples: 50_000,
        ..CvtOptions::default()
    };
    let a = build_cvt_with::<f64>(2, 32, 5, &opts).unwrap();
    let b = build_cvt_with::<f64>(2, 32, 5, &fine).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let probe = random_points(&mut rng, 20_000, 2);
    let (qa, qb) = (quantization_error(&a, &probe), quantization_error(&b, &probe));
    assert!(qa <= 1.05 * qb, "{qa} vs {qb}");
}

#[test]
fn archive_keeps_per_cell_maximum() {
    let archive = build_cvt::<f64>(3, 20, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let evals: Vec<Evaluation<f64>> = (0..400)
        .map(|_| {
            Evaluation::new(
                rng.random_range(-5.0..50.0),
                (0..3).map(|_| rng.random::<f64>()).collect(),
            )
        })
        .collect();
    let mut arch = archive.clone();
    for (i, e) in evals.iter().enumerate() {
        arch.insert(e, i).unwrap();
    }
    let mut best = vec![f64::NEG_INFINITY; 20];
    for e in &evals {
        let cell = (0..20)
            .min_by(|&i, &j| {
                let di: f64 = archive.centroids()[i]
                    .iter()
                    .zip(&e.descriptor)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                let dj: f64 = archive.centroids()[j]
                    .iter()
                    .zip(&e.descriptor)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                di.total_cmp(&dj).then(i.cmp(&j))
            })
            .unwrap();
        best[cell] = best[cell].max(e.quality);
    }
    for (cell, slot) in arch.cells().iter().enumerate() {
        match slot {
            Some(e) => assert_eq!(e.quality, best[cell]),
            None => assert_eq!(best[cell], f64::NEG_INFINITY),
        }
    }
    let qd: f64 = best.iter().filter(|b| b.is_finite()).sum();
    assert!((arch.qd_score() - qd).abs() < 1e-9);
}

#[test]
fn qd_score_grows_with_insertions() {
    let archive = build_cvt::<f64>(2, 16, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let evals: Vec<Evaluation<f64>> = (0..100)
        .map(|_| Evaluation::new(rng.random_range(0.0..10.0), vec![rng.random(), rng.random()]))
        .collect();
    let mut prev = 0.0;
    for k in 1..=evals.len() {
        let m = compute_metrics_for(&evals[..k], &archive, 0.3).unwrap();
        assert!(m.qd_score >= prev - 1e-12);
        assert!(m.coverage_percent <= 100.0);
        prev = m.qd_score;
    }
}
