// temporary timing probe
use axisym::*;
use std::time::Instant;

fn main() {
    let spec = ModelSpec::from_letter('H').unwrap();
    let mut p = ParamVector::neutral(&spec);
    p.base = MaternParams::new(73.98, 262.88, 1.26).unwrap();
    p.eps = 0.49;
    p.k = LegendreCoeffs::new(vec![1.0, 0.51, 1.08, 0.22]).unwrap();
    let op = p.op.as_mut().unwrap();
    op.matern = MaternParams::new(4.81e-6, 58.65, 2.25).unwrap();
    op.a = LegendreCoeffs::new(vec![1.0, 2.36, -15.65, 0.62, -17.13, -0.11, -10.42]).unwrap();
    op.b = Some(LegendreCoeffs::new(vec![3.07, -7.18, 13.91, -13.14, 10.90, -7.55, 6.66]).unwrap());
    for n in [288usize, 576, 1152] {
        let grid = GridSpec::new(100, n, -49.5, 49.5).unwrap();
        let field = Field::zeros(grid);
        let t0 = Instant::now();
        let ll = loglik_fft(&field, &spec, &p).unwrap();
        println!("n={n}: {:?}  ll={ll:.3}", t0.elapsed());
    }
}
