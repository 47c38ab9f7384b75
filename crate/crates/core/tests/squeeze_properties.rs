use nanosqueeze_core::constants::{omega_from_wavelength_nm, DEBYE};
use nanosqueeze_core::emitter::{decay_rate, default_drive, lamb_shift, rabi_enhancement, Emitter};
use nanosqueeze_core::green::{EffectiveOptions, Environment, SeriesOptions, Vec3};
use nanosqueeze_core::materials::DrudeLorentzModel;
use nanosqueeze_core::squeeze::{field_amplitude, AmplitudeMode, Component};
use nanosqueeze_core::C64;

fn sphere(r: f64) -> Environment {
    Environment::with_radius(r, DrudeLorentzModel::gold()).unwrap()
}

fn emitter(r: f64, s: f64, lambda: f64) -> Emitter {
    Emitter::radial(r, s, lambda, DEBYE, 0.0).unwrap()
}

fn tight() -> EffectiveOptions {
    let mut o = EffectiveOptions::default();
    o.series.tol = 1e-12;
    o
}

#[test]
fn near_field_matches_quasistatic_multipoles() {
    let lambda = 550.0;
    let eps = DrudeLorentzModel::gold()
        .permittivity(omega_from_wavelength_nm(lambda))
        .unwrap();
    let r = 0.5;
    let e = emitter(r, 0.5 * r, lambda);
    let d2 = Vec3::new(0.0, 0.0, -1.5 * r);
    let opts = tight();
    let g = field_amplitude(&e, &sphere(r), &d2, AmplitudeMode::FarField, &opts).unwrap();
    let g0 = field_amplitude(
        &e,
        &Environment::FreeSpace,
        &d2,
        AmplitudeMode::FarField,
        &opts,
    )
    .unwrap();
    let ratio = (g.magnitude(Component::R) / g0.magnitude(Component::R)).powi(2);
    // image multipoles of a radial dipole at distance a, observed on the opposite side at distance b
    let (a, b) = (1.5 * r, 1.5 * r);
    let mut sum = C64::new(1.0, 0.0);
    for l in 1..400 {
        let lf = l as f64;
        let f = lf * (eps - 1.0) / (lf * eps + lf + 1.0);
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        sum -= (a + b).powi(3) / 2.0
            * (lf + 1.0).powi(2)
            * f
            * (r / a).powi(l + 2)
            * (r / b).powi(l + 2)
            / r.powi(3)
            * sign;
    }
    let oracle = sum.norm_sqr();
    assert!((ratio / oracle - 1.0).abs() < 1e-3, "{ratio} vs {oracle}");
}

#[test]
fn modes_agree_far_from_the_emitter() {
    let lambda = 550.0;
    let e = emitter(60.0, 10.0, lambda);
    let env = sphere(60.0);
    let opts = EffectiveOptions::default();
    let k = 2.0 * std::f64::consts::PI / lambda;
    for dir in [
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(1.0, 1.0, 0.5).normalize(),
        Vec3::new(0.0, 0.6, -0.8),
    ] {
        let p = dir * (1e3 / k) * 20.0;
        let full = field_amplitude(&e, &env, &p, AmplitudeMode::Full, &opts).unwrap();
        let far = field_amplitude(&e, &env, &p, AmplitudeMode::FarField, &opts).unwrap();
        let c = Component::Theta.index();
        assert!((full.g[c] - far.g[c]).norm() <= 1e-6 * far.g[c].norm());
    }
}

#[test]
fn phase_is_continuous_along_a_ray() {
    let lambda = 550.0;
    let e = emitter(60.0, 10.0, lambda);
    let env = sphere(60.0);
    let opts = EffectiveOptions::default();
    let dir = Vec3::new(1.0, 0.0, 0.3).normalize();
    let mut last: Option<f64> = None;
    for i in 0..200 {
        let p = dir * (80.0 + 5.0 * i as f64);
        let a = field_amplitude(&e, &env, &p, AmplitudeMode::FarField, &opts).unwrap();
        let phase = a.phase(Component::Theta);
        if let Some(prev) = last {
            let jump = (phase - prev + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU)
                - std::f64::consts::PI;
            assert!(jump.abs() < 0.3, "phase jump {jump} at step {i}");
        }
        last = Some(phase);
    }
}

#[test]
fn decay_enhancement_falls_with_distance() {
    let env = sphere(60.0);
    let opts = SeriesOptions::default();
    let mut prev = f64::INFINITY;
    for i in 0..=55 {
        let e = emitter(60.0, 5.0 + i as f64, 550.0);
        let p = decay_rate(&e, &env, &opts).unwrap() / e.gamma_0();
        assert!(p < prev && p > 1.0, "γ/γ₀ = {p} at s = {}", 5 + i);
        prev = p;
    }
}

#[test]
fn rabi_enhancement_falls_with_distance() {
    let env = sphere(60.0);
    let opts = SeriesOptions::default();
    let mut prev = f64::INFINITY;
    for i in 0..=45 {
        let s = 10.0 + 2.0 * i as f64;
        let e = emitter(60.0, s, 550.0);
        let m = rabi_enhancement(&e, &env, &default_drive(), &opts)
            .unwrap()
            .norm();
        assert!(m < prev, "|Ω/Ω₀| = {m} at s = {s}");
        prev = m;
    }
}

#[test]
fn off_resonant_share_falls_with_distance() {
    let opts = EffectiveOptions::default();
    for r in [45.0, 80.0] {
        let e = emitter(r, 10.0, 800.0);
        let env = sphere(r);
        let mut prev = f64::INFINITY;
        for d in [20.0, 30.0, 45.0, 70.0, 100.0, 150.0, 250.0] {
            let p = Vec3::new(r + d, 0.0, 0.0);
            let full = field_amplitude(&e, &env, &p, AmplitudeMode::Full, &opts)
                .unwrap()
                .g[0];
            let far = field_amplitude(&e, &env, &p, AmplitudeMode::FarField, &opts)
                .unwrap()
                .g[0];
            let share = (full - far).norm() / full.norm();
            assert!(share < prev, "share {share} at {d} nm for R = {r}");
            prev = share;
        }
    }
}

#[test]
fn lamb_shift_is_converged_in_the_quadrature() {
    let e = emitter(60.0, 10.0, 550.0);
    let env = sphere(60.0);
    let base = lamb_shift(&e, &env, &EffectiveOptions::default()).unwrap() - e.omega;
    let mut tighter = tight();
    tighter.rel_tol = 1e-11;
    tighter.max_intervals = 2000;
    let fine = lamb_shift(&e, &env, &tighter).unwrap() - e.omega;
    assert!(base.abs() > 10.0 * e.gamma_0());
    assert!((base - fine).abs() < 1e-6 * fine.abs(), "{base} vs {fine}");
}
