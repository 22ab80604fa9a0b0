use mdimpute::{Matrix, RngStream};

const N: usize = 1_000_000;

fn moments(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, v)
}

#[test]
fn standard_normal_moments() {
    let mut rng = RngStream::new(1, 0);
    let xs: Vec<f64> = (0..N).map(|_| rng.draw_normal(0.0, 1.0).unwrap()).collect();
    let (m, v) = moments(&xs);
    assert!(m.abs() < 0.005, "mean {m}");
    assert!((v - 1.0).abs() < 0.01, "var {v}");
}

#[test]
fn shifted_normal_mean() {
    let mut rng = RngStream::new(2, 0);
    let xs: Vec<f64> = (0..N).map(|_| rng.draw_normal(1.0, 1.0).unwrap()).collect();
    let (m, _) = moments(&xs);
    assert!((m - 1.0).abs() < 0.005, "mean {m}");
}

#[test]
fn bernoulli_proportion() {
    let mut rng = RngStream::new(3, 0);
    let ones: usize = (0..N).map(|_| usize::from(rng.draw_bernoulli(0.375).unwrap())).sum();
    let p = ones as f64 / N as f64;
    assert!((p - 0.375).abs() < 0.002, "p {p}");
}

#[test]
fn scaled_inverse_chi_square_mean() {
    // E = df·scale/(df − 2)
    let mut rng = RngStream::new(4, 0);
    let xs: Vec<f64> = (0..N).map(|_| rng.draw_scaled_inv_chisq(10, 1.0).unwrap()).collect();
    let (m, _) = moments(&xs);
    assert!((m - 1.25).abs() < 0.01, "mean {m}");
    assert!(xs.iter().all(|&x| x > 0.0));
}

#[test]
fn scaled_inverse_chi_square_concentrates() {
    let mut rng = RngStream::new(5, 0);
    let s = 3.7;
    for _ in 0..2000 {
        let x = rng.draw_scaled_inv_chisq(1_000_000 - 2, s).unwrap();
        assert!(((x - s) / s).abs() < 0.01, "{x}");
    }
}

fn mvn_cov(cov: &Matrix, seed: u64) -> [[f64; 2]; 2] {
    let mut rng = RngStream::new(seed, 0);
    let draws: Vec<Vec<f64>> = (0..N).map(|_| rng.draw_mvn(&[0.0, 0.0], cov).unwrap()).collect();
    let a: Vec<f64> = draws.iter().map(|d| d[0]).collect();
    let b: Vec<f64> = draws.iter().map(|d| d[1]).collect();
    let c = mdimpute::sample_covariance(&a, &b).unwrap();
    [
        [mdimpute::sample_variance(&a).unwrap(), c],
        [c, mdimpute::sample_variance(&b).unwrap()],
    ]
}

#[test]
fn mvn_identity_moments() {
    let emp = mvn_cov(&Matrix::identity(2), 6);
    assert!((emp[0][0] - 1.0).abs() < 0.01);
    assert!((emp[1][1] - 1.0).abs() < 0.01);
    assert!(emp[0][1].abs() < 0.01);
}

#[test]
fn mvn_correlated_moments() {
    let cov = Matrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]).unwrap();
    let emp = mvn_cov(&cov, 7);
    for i in 0..2 {
        for j in 0..2 {
            assert!((emp[i][j] - cov.get(i, j)).abs() < 0.01, "{emp:?}");
        }
    }
}

#[test]
fn every_distribution_replays_bit_for_bit() {
    let run = || {
        let mut rng = RngStream::new(99, 12);
        let cov = Matrix::from_rows(&[[2.0, 0.3], [0.3, 1.0]]).unwrap();
        let mut out = Vec::new();
        for _ in 0..200 {
            out.push(rng.draw_normal(0.5, 2.0).unwrap().to_bits());
            out.push(u64::from(rng.draw_bernoulli(0.3).unwrap()));
            out.push(rng.draw_scaled_inv_chisq(7, 1.3).unwrap().to_bits());
            out.extend(rng.draw_mvn(&[1.0, -1.0], &cov).unwrap().iter().map(|v| v.to_bits()));
        }
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn independent_threads_match_serial() {
    let draw = |id: u64| {
        let mut rng = RngStream::new(5, id);
        (0..100).map(|_| rng.draw_normal(0.0, 1.0).unwrap().to_bits()).collect::<Vec<_>>()
    };
    let serial: Vec<_> = (0..8).map(draw).collect();
    let handles: Vec<_> = (0..8).map(|id| std::thread::spawn(move || draw(id))).collect();
    let threaded: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert_eq!(serial, threaded);
}
