//! Fits the bundled gold table and prints the parameters.
use nanosqueeze_core::materials::{
    fit_drude_lorentz, DrudeLorentzModel, FitOptions, PermittivityTable,
};

fn main() {
    let table = PermittivityTable::gold_johnson_christy();
    let seed = DrudeLorentzModel::gold();
    let report =
        fit_drude_lorentz(&table, &seed, (400.0, 900.0), &FitOptions::default()).expect("fit");
    let m = &report.model;
    println!(
        "iterations {} rms {:.4} max {:.4}",
        report.iterations, report.rms_relative, report.max_relative
    );
    println!("{:e} {:e} {:e}", m.eps_inf, m.omega_p, m.gamma_p);
    for p in &m.lorentz_poles {
        println!("{:e} {:e} {:e}", p.amplitude, p.center, p.width);
    }
    for r in table.rows_in_band((400.0, 900.0)) {
        let e = m.permittivity_at_wavelength(r.wavelength_nm).unwrap();
        println!(
            "{:8.2} table {:8.3} {:7.3}  model {:8.3} {:7.3}",
            r.wavelength_nm, r.eps_re, r.eps_im, e.re, e.im
        );
    }
}
