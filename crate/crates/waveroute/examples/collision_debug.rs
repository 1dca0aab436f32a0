//! Scratch diagnostics: classify clearance violations of the default
//! structures by the direction classes of the colliding curves.

use std::collections::BTreeMap;

use waveroute::circuit::{Circuit, ElementRef};
use waveroute::fractal::{generate_coupler_array, FractalSpec};
use waveroute::haar::{KernelSet, UnitGeometry};
use waveroute::validate::check_clearance;

fn class_of(c: &Circuit, seg: u32) -> (i32, i32, u32) {
    let s = &c.segments[seg as usize];
    let a = c.position_of(s.from).unwrap();
    let b = c.position_of(s.to).unwrap();
    let layer = match s.from {
        ElementRef::Node(n) => c.node(n).unwrap().layer,
        _ => 0,
    };
    let d = b - a;
    let norm = |v: f64| -> i32 {
        if v > 1e-6 {
            1
        } else if v < -1e-6 {
            -1
        } else {
            0
        }
    };
    (norm(d.x), norm(d.y), layer)
}

fn main() {
    let spec = FractalSpec { layers: 2, ..FractalSpec::default() };
    let c = generate_coupler_array(&spec, 3, 3, 20.0).unwrap();
    let v = check_clearance(&c, 0.5, 0.25).unwrap();
    println!("fig3b array: {} violations", v.len());
    let mut by_class: BTreeMap<((i32, i32, u32), (i32, i32, u32)), (usize, f64)> = BTreeMap::new();
    for viol in &v {
        let ca = class_of(&c, viol.segments.0 .0);
        let cb = class_of(&c, viol.segments.1 .0);
        let key = if ca <= cb { (ca, cb) } else { (cb, ca) };
        let e = by_class.entry(key).or_insert((0, f64::INFINITY));
        e.0 += 1;
        e.1 = e.1.min(viol.min_distance);
    }
    for ((ca, cb), (count, min)) in &by_class {
        println!("  {ca:?} x {cb:?}: {count} violations, closest {min:.3}");
    }

    println!("\nhaar default unit:");
    let ks = KernelSet::default_set();
    match waveroute::haar::generate_filter_unit(&ks, &UnitGeometry::default()) {
        Ok(_) => println!("  clean"),
        Err(e) => println!("  {e}"),
    }

    // 9x9 single-layer array for comparison
    let spec1 = FractalSpec::default();
    let a1 = generate_coupler_array(&spec1, 9, 9, 20.0).unwrap();
    let v1 = check_clearance(&a1, 0.5, 0.25).unwrap();
    println!("\nfig3a 9x9 L=1 array: {} violations", v1.len());
    let mut by_class1: BTreeMap<((i32, i32, u32), (i32, i32, u32)), (usize, f64)> = BTreeMap::new();
    for viol in &v1 {
        let ca = class_of(&a1, viol.segments.0 .0);
        let cb = class_of(&a1, viol.segments.1 .0);
        let key = if ca <= cb { (ca, cb) } else { (cb, ca) };
        let e = by_class1.entry(key).or_insert((0, f64::INFINITY));
        e.0 += 1;
        e.1 = e.1.min(viol.min_distance);
    }
    for ((ca, cb), (count, min)) in &by_class1 {
        println!("  {ca:?} x {cb:?}: {count} violations, closest {min:.3}");
    }
}
