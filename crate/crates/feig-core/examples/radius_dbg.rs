use feig_core::map::*;
use num_complex::Complex64;

fn main() {
    let map = solve_feigenbaum(2, 40, 1e-12).unwrap();
    println!("radius {} residual {:e} alpha {}", map.radius, map.residual, map.alpha);
    for rho in [0.8, 1.2, 1.5, 1.8, 2.0, 2.2] {
        let mut worst = 0.0f64;
        for k in 0..64 {
            let z = Complex64::from_polar(rho, k as f64 * std::f64::consts::TAU / 64.0);
            let direct = map.g_series(z);
            let inner = map.g_series(z / map.alpha);
            let via = map.alpha * map.g_series(inner);
            worst = worst.max((direct - via).norm());
        }
        println!("rho {rho}: consistency {worst:.3e}");
    }
}
