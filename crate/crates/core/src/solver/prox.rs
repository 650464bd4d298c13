use nalgebra::DVector;

/// `argmin_x c|x|^2 - 2 d.x + lambda |x|`, i.e. `max(0, 1 - lambda / (2|d|)) d / c`.
pub fn group_soft_threshold(d: &DVector<f64>, c: f64, lambda: f64) -> DVector<f64> {
    debug_assert!(c > 0.0);
    let norm = d.norm();
    if norm == 0.0 {
        return DVector::zeros(d.len());
    }
    let shrink = 1.0 - lambda / (2.0 * norm);
    if shrink <= 0.0 {
        DVector::zeros(d.len())
    } else {
        d * (shrink / c)
    }
}
