use qhahn_core::asymptotics::{identity_checks, steep_descent_check, taylor_check, DescentContour};
use qhahn_core::scaling::{coefficients, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Parameters with `q <= nu < mu <= 1/2` and `theta` below its bound.
fn draw(rng: &mut ChaCha8Rng) -> (ModelParams, f64) {
    let q = rng.gen_range(0.05..0.45);
    let nu = rng.gen_range(q..0.48);
    let mu = rng.gen_range(nu + 0.01..=0.5);
    let bound = ModelParams::new(q, mu, nu).unwrap().theta_bound().min(3.0);
    let theta = rng.gen_range(0.02..0.98 * bound);
    (ModelParams::new(q, mu, nu).unwrap(), theta)
}

#[test]
fn steep_descent_holds_on_random_valid_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let (p, theta) = draw(&mut rng);
        let c = coefficients(&p, theta).unwrap();
        for kind in [DescentContour::C, DescentContour::D] {
            let rep = steep_descent_check(&p, &c, kind, 4096).unwrap();
            assert!(rep.monotone, "{p:?} theta={theta} {kind:?}");
        }
    }
}

#[test]
fn series_identities_on_random_valid_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let (p, theta) = draw(&mut rng);
        let c = coefficients(&p, theta).unwrap();
        let r = identity_checks(&p, &c, &p.series()).unwrap();
        assert!(r.f_identity_residual < 1e-8 && r.one_identity_residual < 1e-8, "{p:?} {theta} {r:?}");
    }
}

#[test]
fn critical_point_on_random_valid_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let (p, theta) = draw(&mut rng);
        let c = coefficients(&p, theta).unwrap();
        let t = taylor_check(&p, &c, 0.5, 0.0, 1e-3).unwrap();
        assert!(t.d1.abs() < 1e-6 * 2.0 * c.chi, "{p:?} {theta} {t:?}");
        assert!(t.d3_residual < 1e-4, "{p:?} {theta} {t:?}");
    }
}
