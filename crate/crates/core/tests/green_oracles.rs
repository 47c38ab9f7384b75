use std::f64::consts::PI;

use nanosqueeze_core::constants::{omega_from_wavelength_nm, NM, SPEED_OF_LIGHT};
use nanosqueeze_core::green::{
    free_space_green, mie_reflection_coefficients, plane_wave_local_field, scattered_green,
    scattered_green_adaptive, spherical_unit_vectors, to_spherical_components, total_green,
    truncation_order, CMat3, Environment, PlaneWave, SeriesOptions, SphereSystem, Vec3,
};
use nanosqueeze_core::materials::DrudeLorentzModel;
use nanosqueeze_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_abs(m: &CMat3) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn gold(r: f64) -> SphereSystem {
    SphereSystem::new(r, DrudeLorentzModel::gold()).unwrap()
}

fn random_exterior(rng: &mut ChaCha8Rng, radius: f64) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if v.norm() > 0.1 {
            return v.normalize() * (radius + rng.gen_range(15.0..200.0));
        }
    }
}

#[test]
fn total_tensor_reciprocity_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let env = Environment::Sphere(gold(60.0));
    let omega = omega_from_wavelength_nm(560.0);
    let opts = SeriesOptions {
        tol: 1e-14,
        ..Default::default()
    };
    for _ in 0..20 {
        let r1 = random_exterior(&mut rng, 60.0);
        let r2 = random_exterior(&mut rng, 60.0);
        let a = total_green(&env, &r1, &r2, omega, &opts).unwrap().matrix;
        let b = total_green(&env, &r2, &r1, omega, &opts).unwrap().matrix;
        let err = max_abs(&(a - b.transpose())) / max_abs(&a);
        assert!(err < 1e-10, "{err:e} at {r1:?} {r2:?}");
    }
}

#[test]
fn free_space_reciprocity_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let omega = omega_from_wavelength_nm(700.0);
    for _ in 0..100 {
        let r1 = random_exterior(&mut rng, 0.0);
        let r2 = random_exterior(&mut rng, 0.0);
        let a = free_space_green(&r1, &r2, omega).unwrap().matrix;
        let b = free_space_green(&r2, &r1, omega).unwrap().matrix;
        assert!(max_abs(&(a - b.transpose())) <= 1e-12 * max_abs(&a));
    }
}

#[test]
fn vanishing_sphere_decouples() {
    let omega = omega_from_wavelength_nm(550.0);
    let s = gold(1e-4);
    let r1 = Vec3::new(20.0, 5.0, 30.0);
    let r2 = Vec3::new(-10.0, 0.0, 25.0);
    let gs = scattered_green_adaptive(&s, &r1, &r2, omega, &SeriesOptions::default())
        .unwrap()
        .matrix;
    let g0 = free_space_green(&r1, &r2, omega).unwrap().matrix;
    assert!(
        max_abs(&gs) < 1e-12 * max_abs(&g0),
        "{}",
        max_abs(&gs) / max_abs(&g0)
    );
    for n in 1..4 {
        let b = mie_reflection_coefficients(&s, n, omega).unwrap();
        assert!(b.b_n.norm() < 1e-15 && b.b_m.norm() < 1e-15);
    }
}

#[test]
fn truncation_doubling_radial_component() {
    // R = 80 nm, emitter 10 nm above the pole, detector 10 nm from the equator
    let s = gold(80.0);
    let omega = omega_from_wavelength_nm(600.0);
    let r_e = Vec3::new(0.0, 0.0, 90.0);
    let r = Vec3::new(90.0, 0.0, 0.0);
    let n = truncation_order(&s, &r, &r_e, omega, 1e-8).unwrap();
    let radial = |g: &CMat3| {
        let er = spherical_unit_vectors(&r)[0];
        let ee = spherical_unit_vectors(&r_e)[0];
        let mut v = C64::new(0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                v += er[i] * g[(i, j)] * ee[j];
            }
        }
        v
    };
    let a = radial(&scattered_green(&s, &r, &r_e, omega, n).unwrap().matrix);
    let b = radial(
        &scattered_green(&s, &r, &r_e, omega, (2 * n).min(200))
            .unwrap()
            .matrix,
    );
    assert!((a - b).norm() < 1e-6 * b.norm(), "n={n} {a} {b}");
}

#[test]
fn near_field_needs_more_orders() {
    let s = gold(80.0);
    // kR = 2
    let omega = 2.0 / (80.0 * NM) * SPEED_OF_LIGHT;
    let far = truncation_order(
        &s,
        &Vec3::new(0.0, 0.0, 5000.0),
        &Vec3::new(5000.0, 0.0, 0.0),
        omega,
        1e-8,
    )
    .unwrap();
    let near = truncation_order(
        &s,
        &Vec3::new(0.0, 0.0, 90.0),
        &Vec3::new(90.0, 0.0, 0.0),
        omega,
        1e-8,
    )
    .unwrap();
    assert!(near > far, "near {near} far {far}");
}

#[test]
fn plane_wave_without_sphere_is_incident_wave() {
    let wave = PlaneWave {
        direction: [0.0, 0.0, -1.0],
        polarization: [1.0, 0.0, 0.0],
    };
    let r = Vec3::new(10.0, 20.0, 30.0);
    let omega = omega_from_wavelength_nm(550.0);
    let e = plane_wave_local_field(
        &Environment::FreeSpace,
        &wave,
        &r,
        omega,
        &SeriesOptions::default(),
    )
    .unwrap();
    let k = omega / SPEED_OF_LIGHT;
    let expected = (C64::new(0.0, -k * 30.0 * NM)).exp();
    assert_eq!(e.y, C64::new(0.0, 0.0));
    assert!((e.x - expected).norm() < 1e-15);
}

#[test]
fn lossless_sphere_scattered_power_balances_extinction() {
    let s = SphereSystem::new(
        90.0,
        DrudeLorentzModel {
            eps_inf: 3.0,
            omega_p: 0.0,
            gamma_p: 0.0,
            lorentz_poles: vec![],
        },
    )
    .unwrap();
    let env = Environment::Sphere(s.clone());
    let omega = omega_from_wavelength_nm(600.0);
    let k = omega / SPEED_OF_LIGHT;
    let wave = PlaneWave {
        direction: [0.0, 0.0, 1.0],
        polarization: [1.0, 0.0, 0.0],
    };
    let mut ext = 0.0;
    for n in 1..40 {
        let b = mie_reflection_coefficients(&s, n, omega).unwrap();
        // B = −a, −b
        ext += (2 * n + 1) as f64 * (-(b.b_n + b.b_m)).re;
    }
    let c_ext = 2.0 * PI / (k * k) * ext;

    // far-zone flux of the scattered field through a sphere of radius ρ
    let rho = 2e5;
    let rho_m = rho * NM;
    let (nt, np) = (96, 96);
    let mut flux = 0.0;
    for it in 0..nt {
        let theta = (it as f64 + 0.5) * PI / nt as f64;
        for ip in 0..np {
            let phi = (ip as f64 + 0.5) * 2.0 * PI / np as f64;
            let r = Vec3::new(
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            ) * rho;
            let total =
                plane_wave_local_field(&env, &wave, &r, omega, &SeriesOptions::default()).unwrap();
            let inc = (C64::new(0.0, k * r.z * NM)).exp();
            let sc = [total.x - inc, total.y, total.z];
            let intensity: f64 = sc.iter().map(|c| c.norm_sqr()).sum();
            flux += intensity * theta.sin() * (PI / nt as f64) * (2.0 * PI / np as f64);
        }
    }
    let c_sca = flux * rho_m * rho_m;
    assert!(
        (c_sca - c_ext).abs() < 1e-3 * c_ext,
        "sca {c_sca:e} ext {c_ext:e}"
    );
}

#[test]
fn plane_wave_and_green_tensor_are_reciprocal() {
    // field at the emitter from a distant dipole equals the distant field of the emitter
    let env = Environment::Sphere(gold(60.0));
    let omega = omega_from_wavelength_nm(550.0);
    let lambda = 550.0;
    let far = Vec3::new(1e5 * lambda, 0.0, 0.0);
    let r_e = Vec3::new(0.0, 0.0, 70.0);
    let opts = SeriesOptions::default();
    let wave = PlaneWave {
        direction: [-1.0, 0.0, 0.0],
        polarization: [0.0, 0.0, 1.0],
    };
    let local = plane_wave_local_field(&env, &wave, &r_e, omega, &opts).unwrap();
    let free = plane_wave_local_field(&Environment::FreeSpace, &wave, &r_e, omega, &opts).unwrap();
    let ratio_drive = (local.z / free.z).norm();

    let g = total_green(&env, &far, &r_e, omega, &opts).unwrap().matrix;
    let g0 = free_space_green(&far, &r_e, omega).unwrap().matrix;
    let col = |m: &CMat3| nanosqueeze_core::green::CVec3::new(m[(0, 2)], m[(1, 2)], m[(2, 2)]);
    let th = to_spherical_components(&col(&g), &far)[1];
    let th0 = to_spherical_components(&col(&g0), &far)[1];
    let ratio_emission = (th / th0).norm();
    assert!(
        (ratio_drive - ratio_emission).abs() < 1e-4 * ratio_drive,
        "{ratio_drive} vs {ratio_emission}"
    );
}

#[test]
fn decay_rate_is_positive_everywhere() {
    let s = gold(60.0);
    let omega = omega_from_wavelength_nm(550.0);
    let k = omega / SPEED_OF_LIGHT;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let r = random_exterior(&mut rng, 60.0);
        let d = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalize();
        let gs = scattered_green_adaptive(&s, &r, &r, omega, &SeriesOptions::default())
            .unwrap()
            .matrix;
        let mut im = k / (6.0 * PI);
        for i in 0..3 {
            for j in 0..3 {
                im += d[i] * gs[(i, j)].im * d[j];
            }
        }
        assert!(im > 0.0);
    }
}
