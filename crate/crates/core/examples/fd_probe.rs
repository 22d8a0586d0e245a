// scratch probe for tuning the finite-difference oracle step sizes
use axisym::specialfn::LegendreCoeffs;
use axisym::{cov_kz, matern_cov, MaternParams, EARTH_RADIUS_KM};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// chordal distance from 4 coordinates (radians)
fn ch4(l1: f64, o1: f64, l2: f64, o2: f64) -> f64 {
    let sd = ((l1 - l2) / 2.0).sin();
    let sl = ((o1 - o2) / 2.0).sin();
    2.0 * EARTH_RADIUS_KM * (sd * sd + l1.cos() * l2.cos() * sl * sl).sqrt()
}

fn fd_once(
    l1: f64,
    o1: f64,
    l2: f64,
    o2: f64,
    m: &MaternParams,
    a: &LegendreCoeffs,
    b: &LegendreCoeffs,
    h: f64,
) -> f64 {
    let c = |x1l: f64, x1o: f64, x2l: f64, x2o: f64| -> f64 {
        matern_cov(ch4(x1l, x1o, x2l, x2o), m).unwrap()
    };
    let coef = |s: usize, lat: f64| -> f64 {
        if s == 0 {
            a.eval(lat.sin())
        } else {
            b.eval(lat.sin())
        }
    };
    let mut total = 0.0;
    for s1 in 0..2usize {
        for s2 in 0..2usize {
            let c1 = coef(s1, l1);
            let c2 = coef(s2, l2);
            if c1 == 0.0 || c2 == 0.0 {
                continue;
            }
            let (d1l, d1o) = if s1 == 0 { (h, 0.0) } else { (0.0, h) };
            let (d2l, d2o) = if s2 == 0 { (h, 0.0) } else { (0.0, h) };
            let quad = c(l1 + d1l, o1 + d1o, l2 + d2l, o2 + d2o)
                - c(l1 + d1l, o1 + d1o, l2 - d2l, o2 - d2o)
                - c(l1 - d1l, o1 - d1o, l2 + d2l, o2 + d2o)
                + c(l1 - d1l, o1 - d1o, l2 - d2l, o2 - d2o);
            total += c1 * c2 * quad / (4.0 * h * h);
        }
    }
    total
}

fn richardson(
    l1: f64,
    o1: f64,
    l2: f64,
    o2: f64,
    m: &MaternParams,
    a: &LegendreCoeffs,
    b: &LegendreCoeffs,
    h: f64,
) -> f64 {
    let d1 = fd_once(l1, o1, l2, o2, m, a, b, h);
    let d2 = fd_once(l1, o1, l2, o2, m, a, b, h / 2.0);
    let d4 = fd_once(l1, o1, l2, o2, m, a, b, h / 4.0);
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d4 - d2) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

fn main() {
    let mut rng = ChaCha12Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut worst_info = String::new();
    let n_cfg = 200;
    for cfg in 0..n_cfg {
        let nu1 = rng.random_range(1.02..3.0f64);
        let beta1 = rng.random_range(300.0..2500.0f64);
        let m = MaternParams::new(10f64.powf(rng.random_range(-4.0..-2.0)), beta1, nu1).unwrap();
        let a = LegendreCoeffs::new(vec![
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ])
        .unwrap();
        let b = LegendreCoeffs::new(vec![
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ])
        .unwrap();
        // configuration with a minimum separation
        let (l1d, l2d, dld);
        loop {
            let c1: f64 = rng.random_range(-75.0..75.0);
            let c2: f64 = rng.random_range(-75.0..75.0);
            let dl: f64 = rng.random_range(-170.0..170.0);
            let d = axisym::chordal_distance(c1, c2, dl).unwrap();
            if d > 400.0 {
                l1d = c1;
                l2d = c2;
                dld = dl;
                break;
            }
        }
        let analytic = cov_kz(l1d, l2d, dld, &m, &a, &b).unwrap();
        let sep = axisym::chordal_distance(l1d, l2d, dld).unwrap();
        let h = (0.08 * m.beta.min(sep) / EARTH_RADIUS_KM).min(0.02);
        let l1 = l1d.to_radians();
        let l2 = l2d.to_radians();
        let dl = dld.to_radians();
        let oracle = richardson(l1, dl, l2, 0.0, &m, &a, &b, h);
        // scale for near-zero crossings
        let v1 = cov_kz(l1d, l1d, 0.0, &m, &a, &b).unwrap();
        let v2 = cov_kz(l2d, l2d, 0.0, &m, &a, &b).unwrap();
        let scale = (v1.abs().max(1e-300) * v2.abs().max(1e-300)).sqrt();
        let denom = oracle.abs().max(1e-6 * scale);
        let err = (analytic - oracle).abs() / denom;
        if err > worst {
            worst = err;
            worst_info = format!(
                "cfg={cfg} nu1={nu1:.3} beta1={beta1:.0} l1={l1d:.1} l2={l2d:.1} dl={dld:.1} \
                 sep={sep:.0} h={h:.5} analytic={analytic:.6e} oracle={oracle:.6e} scale={scale:.3e}"
            );
        }
    }
    println!("worst rel err over {n_cfg} configs: {worst:.3e}");
    println!("{worst_info}");
}
