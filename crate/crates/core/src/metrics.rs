//! Error metrics between projection stacks.

use crate::geometry::ProjectionStack;
use crate::{Error, Result};

/// Root of the summed squared difference over pixels valid in both stacks.
///
/// The stacks must share angle count and detector shape. Pixels masked in
/// either stack are skipped, so the metric can compare a reconstruction
/// against reference data that has defective pixels.
pub fn residual_projection_error(a: &ProjectionStack, b: &ProjectionStack) -> Result<f64> {
    let (ga, gb) = (&a.geometry, &b.geometry);
    if ga.n_angles() != gb.n_angles() || ga.rows != gb.rows || ga.cols != gb.cols {
        return Err(Error::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            ga.n_angles(),
            ga.rows,
            ga.cols,
            gb.n_angles(),
            gb.rows,
            gb.cols
        )));
    }
    let mut acc = 0.0;
    for i in 0..a.data.len() {
        if a.is_valid(i) && b.is_valid(i) {
            let d = a.data[i] - b.data[i];
            acc += d * d;
        }
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ScanGeometry;

    fn stack(vals: &[f64]) -> ProjectionStack {
        let geom = ScanGeometry::circular(1, 0.0, 180.0, 2, 2, 0.1, 2.0).unwrap();
        let mut s = ProjectionStack::zeros(geom);
        s.data.copy_from_slice(vals);
        s
    }

    #[test]
    fn residual_is_the_euclidean_distance() {
        let a = stack(&[1.0, 2.0, 3.0, 4.0]);
        let b = stack(&[1.0, 2.0, 0.0, 0.0]);
        let e = residual_projection_error(&a, &b).unwrap();
        assert!((e - 5.0).abs() < 1e-12);
    }

    #[test]
    fn masked_pixels_are_excluded_from_either_side() {
        let a = stack(&[1.0, 2.0, 3.0, 4.0]);
        let mut b = stack(&[1.0, 2.0, 0.0, 4.0]);
        b.mask = Some(vec![true, true, false, true]);
        let e = residual_projection_error(&a, &b).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let a = stack(&[0.0; 4]);
        let geom = ScanGeometry::circular(1, 0.0, 180.0, 1, 4, 0.1, 2.0).unwrap();
        let b = ProjectionStack::zeros(geom);
        assert!(residual_projection_error(&a, &b).is_err());
    }
}
