//! Cross-validation of the two independent projection routes.
//!
//! The rasterizer builds projections from per-pixel fragments in the
//! detector frame; the ray caster intersects every ray with the triangles
//! in the global frame. They share no coverage or interpolation code, so
//! agreement between them checks both.

use meshtomo_core::geometry::{make_icosphere, make_torus, MaterialTable, ScanGeometry};
use meshtomo_core::nalgebra::Point3;
use meshtomo_core::projector::forward_pass;
use meshtomo_core::raycast::cast_forward_full;

struct Agreement {
    touched: usize,
    identical: usize,
    worst: f64,
}

/// Compares two stacks pixelwise. A pixel is *touched* when either route
/// masked it or gave it a nonzero value; it counts as identically covered
/// when both routes left it valid.
fn compare(
    rast: &meshtomo_core::geometry::ProjectionStack,
    cast: &meshtomo_core::geometry::ProjectionStack,
) -> Agreement {
    let mut agg = Agreement {
        touched: 0,
        identical: 0,
        worst: 0.0,
    };
    for i in 0..rast.data.len() {
        let (rv, cv) = (rast.is_valid(i), cast.is_valid(i));
        if rv && cv && rast.data[i] == 0.0 && cast.data[i] == 0.0 {
            continue;
        }
        agg.touched += 1;
        if rv && cv {
            agg.identical += 1;
            agg.worst = agg.worst.max((rast.data[i] - cast.data[i]).abs());
        }
    }
    agg
}

#[test]
fn routes_agree_on_a_nested_two_material_scene() {
    let mut scene = make_icosphere(3, 0.7, Point3::origin());
    let mut inner = make_icosphere(2, 0.35, Point3::new(0.1, 0.05, -0.08));
    inner.set_materials(2, 1);
    scene.merge(&inner);
    let materials = MaterialTable::new(vec![0.0, 0.6, 1.4]).unwrap();
    let geometry = ScanGeometry::circular(6, 10.0, 170.0, 48, 48, 0.04, 2.0).unwrap();

    let rast = forward_pass(&scene, &materials, &geometry).unwrap();
    let cast = cast_forward_full(&scene, &materials, &geometry).unwrap();
    let max_p = cast.stack.max_value();
    assert!(max_p > 1.0, "scene should produce substantial projections");

    let agg = compare(&rast.stack, &cast.stack);
    assert!(agg.touched > 2000, "scene covers {} pixels", agg.touched);
    assert!(
        agg.worst <= 1e-6 * max_p,
        "worst pixel difference {} vs bound {}",
        agg.worst,
        1e-6 * max_p
    );
    assert!(
        agg.identical as f64 >= 0.99 * agg.touched as f64,
        "only {}/{} pixels identically covered",
        agg.identical,
        agg.touched
    );
}

#[test]
fn routes_agree_on_a_torus_with_a_through_hole() {
    // The torus exercises rays with four surface crossings and rays through
    // the hole with none.
    let torus = make_torus(0.45, 0.18, 24, 16);
    let materials = MaterialTable::new(vec![0.0, 1.0]).unwrap();
    let geometry = ScanGeometry::circular(5, 15.0, 160.0, 40, 40, 0.05, 2.0).unwrap();

    let rast = forward_pass(&torus, &materials, &geometry).unwrap();
    let cast = cast_forward_full(&torus, &materials, &geometry).unwrap();
    let max_p = cast.stack.max_value();

    let agg = compare(&rast.stack, &cast.stack);
    assert!(
        agg.worst <= 1e-6 * max_p,
        "worst pixel difference {} vs bound {}",
        agg.worst,
        1e-6 * max_p
    );
    assert!(agg.identical as f64 >= 0.99 * agg.touched as f64);
}

#[test]
fn raycaster_sees_the_torus_tube_and_its_hole() {
    // Face-on view down the z-axis (the torus axis): a ray at the ring
    // radius crosses the tube wall twice and accumulates one tube chord; a
    // ray through the middle passes the hole untouched.
    let torus = make_torus(0.45, 0.18, 48, 30);
    let materials = MaterialTable::new(vec![0.0, 1.0]).unwrap();
    let geometry = ScanGeometry::circular(1, 0.0, 180.0, 21, 21, 0.05, 2.0).unwrap();
    let cast = cast_forward_full(&torus, &materials, &geometry).unwrap();
    // Row 9 keeps the ray off the meridian planes of the tessellation.
    let (row, col) = (9usize, 19usize);
    let p = cast.stack.data[row * 21 + col];
    assert_eq!(cast.hit_counts[row * 21 + col], 2);
    assert!(
        (p - 2.0 * 0.18).abs() < 0.05,
        "tube chord {p} should be near {}",
        2.0 * 0.18
    );
    let center = 10 * 21 + 10;
    assert_eq!(cast.stack.data[center], 0.0);
    assert_eq!(cast.hit_counts[center], 0);
}
