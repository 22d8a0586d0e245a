// scratch probe for the model-B recovery setup
use axisym::specialfn::LegendreCoeffs;
use axisym::*;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lat_half: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(49.5);
    let spec = ModelSpec::from_letter('B').unwrap();
    let mut truth = ParamVector::neutral(&spec);
    truth.base = MaternParams::new(60.0, 200.0, 1.2).unwrap();
    truth.eps = 2.0;
    truth.k = LegendreCoeffs::new(vec![1.0, 0.5, 0.8, 0.1]).unwrap();
    let grid = GridSpec::new(20, 48, -lat_half, lat_half).unwrap();
    let field = simulate_grid(&spec, &truth, &grid, 606, 1).unwrap().pop().unwrap();
    println!("lat range +-{lat_half}, lat spacing {:.1} km", grid.lat_spacing_km());
    println!("loglik at truth: {:.4}", loglik_fft(&field, &spec, &truth).unwrap());

    let t0 = Instant::now();
    let init = default_init(&spec, &field);
    println!("init: alpha={:.2} beta={:.0} nu={} eps={:.2}",
        init.base.alpha, init.base.beta, init.base.nu, init.eps);
    let fit = fit_mle(&field, &spec, &init, &FitOptions { restarts: 1, ..Default::default() }).unwrap();
    println!("default-init fit ({:?}): loglik {:.4} converged {} iters {}",
        t0.elapsed(), fit.loglik, fit.converged, fit.iterations);
    for (idx, id) in fit.free_ids.iter().enumerate() {
        let est = fit.estimates.get(*id).unwrap();
        let tru = truth.get(*id).unwrap();
        let se = fit.ses[idx];
        match se {
            Some(se) => println!("  {id}: est {est:.4} truth {tru:.4} se {se:.4} z {:.2}", (est - tru).abs() / se),
            None => println!("  {id}: est {est:.4} truth {tru:.4} se NA"),
        }
    }

    let t0 = Instant::now();
    let mut init2 = truth.clone();
    let fit2 = fit_mle(&field, &spec, &init2, &FitOptions { restarts: 1, compute_ses: false, ..Default::default() }).unwrap();
    println!("truth-init fit ({:?}): loglik {:.4} converged {}", t0.elapsed(), fit2.loglik, fit2.converged);
    for id in spec.param_ids() {
        println!("  {id}: est {:.4}", fit2.estimates.get(id).unwrap());
    }
    init2.fixed.clear();
}
