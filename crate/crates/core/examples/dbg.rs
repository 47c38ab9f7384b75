use nanosqueeze_core::constants::DEBYE;
use nanosqueeze_core::emitter::*;
use nanosqueeze_core::green::*;
use nanosqueeze_core::materials::DrudeLorentzModel;
use nanosqueeze_core::squeeze::*;
fn main() {
    let env = Environment::with_radius(200.0, DrudeLorentzModel::gold()).unwrap();
    let e = Emitter::radial(200.0, 10.0, 550.0, DEBYE, 0.0).unwrap();
    for tol in [1e-6, 1e-4] {
        let mut o = EffectiveOptions::default();
        o.series.tol = tol;
        o.rel_tol = 1e-6;
        for p in [
            Vec3::new(-211.2, 0.0, 0.0),
            Vec3::new(-204.8, 0.0, -6.4),
            Vec3::new(0.0, 0.0, -210.0),
        ] {
            for m in [AmplitudeMode::FarField, AmplitudeMode::Full] {
                match field_amplitude(&e, &env, &p, m, &o) {
                    Ok(a) => println!("{tol} {p:?} {m:?} {}", a.g[0]),
                    Err(err) => println!("{tol} {p:?} {m:?} ERR {err}"),
                }
            }
        }
    }
}
