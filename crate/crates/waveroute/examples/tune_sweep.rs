//! Parameter sweep for the routing bows: reports the global minimum
//! non-junction pair distance of the benchmark arrays for the current
//! WR_TUNE_* environment.

use waveroute::fractal::{generate_coupler_array, FractalSpec};
use waveroute::validate::check_clearance;

fn min_distance(v: &[waveroute::validate::ClearanceViolation]) -> f64 {
    v.iter().map(|x| x.min_distance).fold(f64::INFINITY, f64::min)
}

fn main() {
    // Use a huge clearance so every pair within 6.2 um reports; the minimum
    // over reports is the global minimum pair distance.
    let probe = 5.0;
    let big = std::env::var("WR_SWEEP_BIG").map(|v| v == "1").unwrap_or(false);

    let spec1 = FractalSpec::default();
    let a1 = generate_coupler_array(&spec1, 9, 9, 20.0).unwrap();
    let v1 = check_clearance(&a1, probe, 0.25).unwrap();
    print!("L1-9x9 min {:.3}", min_distance(&v1));

    let spec2 = FractalSpec { layers: 2, ..FractalSpec::default() };
    let side = if big { 15 } else { 8 };
    let a2 = generate_coupler_array(&spec2, side, side, 20.0).unwrap();
    let v2 = check_clearance(&a2, probe, 0.25).unwrap();
    print!(" | L2-{side}x{side} min {:.3}", min_distance(&v2));

    let haar = waveroute::haar::generate_filter_unit(
        &waveroute::haar::KernelSet::default_set(),
        &waveroute::haar::UnitGeometry::default(),
    );
    match haar {
        Ok(_) => println!(" | haar clean"),
        Err(e) => println!(" | haar FAIL ({e})"),
    }
}
