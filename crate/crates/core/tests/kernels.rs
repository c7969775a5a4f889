use std::f64::consts::PI;

use viscwave_core::kernels::{
    j_decay_check, l2_norm_squared, lq_norm, multiplier, poisson_wave_factorization,
    real_space_kernel,
};
use viscwave_core::{Grid, KernelFamily, KernelKind};

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let whole = (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
    let left = (m - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + m)) + f(m));
    let right = (b - m) / 6.0 * (f(m) + 4.0 * f(0.5 * (m + b)) + f(b));
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, 0.5 * tol, depth - 1) + simpson(f, m, b, 0.5 * tol, depth - 1)
}

// K̂_1(r) written out from the characteristic roots of λ² + rλ + r².
fn viscous_hat(r: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    let w = 0.5 * 3f64.sqrt() * r;
    (-0.5 * r).exp() * w.sin() / w
}

#[test]
fn viscous_square_norms_match_independent_quadrature() {
    let c1_closed = 4.0 / (3.0 * PI) * (PI * 3f64.sqrt() / 6.0 - 0.5 * 2f64.ln());
    let c2_closed = 2f64.ln() / (3.0 * PI);
    let c1: f64 = (0..80)
        .map(|i| {
            simpson(
                &|r| viscous_hat(r).powi(2) / PI,
                i as f64,
                i as f64 + 1.0,
                1e-15,
                40,
            )
        })
        .sum();
    let c2: f64 = (0..80)
        .map(|i| {
            simpson(
                &|r| r * viscous_hat(r).powi(2) / (2.0 * PI),
                i as f64,
                i as f64 + 1.0,
                1e-15,
                40,
            )
        })
        .sum();
    assert!((c1 - c1_closed).abs() < 1e-9, "{c1} vs {c1_closed}");
    assert!((c2 - c2_closed).abs() < 1e-9, "{c2} vs {c2_closed}");
    for (n, c) in [(1, c1), (2, c2)] {
        let got = l2_norm_squared(KernelFamily::ViscousWave, KernelKind::Velocity, 1.0, n).unwrap();
        assert!((got - c).abs() < 1e-9 * c, "n={n}: {got} vs {c}");
    }
}

#[test]
fn viscous_square_norm_scales_with_time() {
    for n in [1usize, 2] {
        let base =
            l2_norm_squared(KernelFamily::ViscousWave, KernelKind::Velocity, 1.0, n).unwrap();
        for t in [0.25, 3.0] {
            let got =
                l2_norm_squared(KernelFamily::ViscousWave, KernelKind::Velocity, t, n).unwrap();
            let want = base * t.powi(2 - n as i32);
            assert!((got - want).abs() < 1e-9 * want, "n={n} t={t}");
        }
    }
}

#[test]
fn multipliers_obey_scaling() {
    for &xi in &[0.0, 0.3, 1.7, 12.0] {
        for &t in &[0.2, 1.0, 4.5] {
            let k = multiplier(KernelFamily::ViscousWave, KernelKind::Velocity, t, xi).unwrap();
            let k1 =
                multiplier(KernelFamily::ViscousWave, KernelKind::Velocity, 1.0, t * xi).unwrap();
            assert!((k - t * k1).abs() < 1e-12 * t.max(1.0));
            let j = multiplier(KernelFamily::ViscousWave, KernelKind::Displacement, t, xi).unwrap();
            let j1 = multiplier(
                KernelFamily::ViscousWave,
                KernelKind::Displacement,
                1.0,
                t * xi,
            )
            .unwrap();
            assert!((j - j1).abs() < 1e-12);
            let w = multiplier(KernelFamily::Wave, KernelKind::Velocity, t, xi).unwrap();
            let w1 = multiplier(KernelFamily::Wave, KernelKind::Velocity, 1.0, t * xi).unwrap();
            assert!((w - t * w1).abs() < 1e-12 * t.max(1.0));
            let h = multiplier(KernelFamily::Heat, KernelKind::Velocity, t, xi).unwrap();
            let h1 =
                multiplier(KernelFamily::Heat, KernelKind::Velocity, 1.0, t.sqrt() * xi).unwrap();
            assert!((h - h1).abs() < 1e-12);
        }
    }
}

#[test]
fn heat_kernel_peak_and_mass() {
    for (n, points) in [(1usize, 1024usize), (2, 256)] {
        let grid = Grid::new(n, 32.0, points).unwrap();
        for t in [0.5, 2.0] {
            let k = real_space_kernel(KernelFamily::Heat, KernelKind::Velocity, t, &grid).unwrap();
            let peak = (4.0 * PI * t).powf(-0.5 * n as f64);
            assert!((k.values()[0] - peak).abs() < 1e-10, "n={n} t={t}");
            let mass = lq_norm(KernelFamily::Heat, KernelKind::Velocity, t, 1.0, &grid).unwrap();
            assert!((mass - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn one_dimensional_wave_kernel_is_half_on_the_light_cone_interior() {
    let grid = Grid::new(1, 16.0, 4096).unwrap();
    let t = 2.0;
    let k = real_space_kernel(KernelFamily::Wave, KernelKind::Velocity, t, &grid).unwrap();
    let inside: Vec<f64> = grid
        .radii()
        .into_iter()
        .zip(k.values())
        .filter(|(r, _)| *r < 0.5 * t)
        .map(|(_, v)| *v)
        .collect();
    let mean = inside.iter().sum::<f64>() / inside.len() as f64;
    assert!((mean - 0.5).abs() < 1e-3, "{mean}");
    let outside = grid
        .radii()
        .into_iter()
        .zip(k.values())
        .filter(|(r, _)| *r > 1.5 * t && *r < 0.5 * grid.extent())
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max);
    assert!(outside < 5e-3, "{outside}");
}

#[test]
fn viscous_kernel_has_unit_time_mass_and_unit_displacement_mass() {
    let grid = Grid::new(1, 64.0, 4096).unwrap();
    for t in [0.5, 1.0] {
        let k =
            real_space_kernel(KernelFamily::ViscousWave, KernelKind::Velocity, t, &grid).unwrap();
        let mass: f64 = k.values().iter().sum::<f64>() * grid.dx();
        assert!((mass - t).abs() < 1e-10);
        let j = real_space_kernel(
            KernelFamily::ViscousWave,
            KernelKind::Displacement,
            t,
            &grid,
        )
        .unwrap();
        let mass: f64 = j.values().iter().sum::<f64>() * grid.dx();
        assert!((mass - 1.0).abs() < 1e-10);
    }
}

#[test]
fn poisson_smoothed_wave_representation() {
    let want = 4.0 / (PI * 3f64.sqrt());
    for grid in [
        Grid::new(1, 64.0, 8192).unwrap(),
        Grid::new(2, 32.0, 256).unwrap(),
    ] {
        let r = poisson_wave_factorization(1.0, &grid).unwrap();
        assert!(r.multiplier_defect < 1e-12);
        assert!(
            (r.constant - want).abs() < 0.01 * want,
            "n={}: {}",
            grid.dim(),
            r.constant
        );
        assert!(r.residual < 0.01, "n={}: {}", grid.dim(), r.residual);
    }
}

#[test]
fn displacement_kernel_decays_at_least_as_fast_as_the_bound() {
    let one = j_decay_check(&Grid::new(1, 64.0, 8192).unwrap(), 2).unwrap();
    assert!(one.passes, "{one:?}");
    let two = j_decay_check(&Grid::new(2, 32.0, 256).unwrap(), 3).unwrap();
    assert!(two.passes, "{two:?}");
    assert!(j_decay_check(&Grid::new(1, 64.0, 1024).unwrap(), 1).is_err());
}
