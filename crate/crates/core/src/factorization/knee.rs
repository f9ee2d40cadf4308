use crate::error::{Error, Result};
use crate::Real;

/// Rank at the knee of a descending scree curve: the 1-based position farthest from
/// the chord joining the first and last points, clamped to `[2, r_max]`. Ties go to
/// the smaller rank; a curve with no bend at all returns 2.
pub fn knee_rank<T: Real>(s: &[T], r_max: usize) -> Result<usize> {
    if s.len() < 3 {
        return Err(Error::invalid(
            "knee selection needs at least 3 singular values",
        ));
    }
    if r_max < 2 {
        return Err(Error::invalid("r_max must be at least 2"));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("singular values"));
    }
    let n = s.len();
    let (x1, y1) = (1.0, s[0].to_f64_lossy());
    let (x2, y2) = (n as f64, s[n - 1].to_f64_lossy());
    let (dx, dy) = (x2 - x1, y2 - y1);
    let norm = dx.hypot(dy);
    let scale = s.iter().map(|v| v.to_f64_lossy().abs()).fold(1.0, f64::max) * n as f64;

    let mut best = (1usize, 0.0f64);
    for (i, v) in s.iter().enumerate() {
        let (x, y) = ((i + 1) as f64, v.to_f64_lossy());
        let d = (dy * x - dx * y + x2 * y1 - y2 * x1).abs() / norm;
        if d > best.1 + 1e-12 * scale {
            best = (i + 1, d);
        }
    }
    Ok(best.0.clamp(2, r_max))
}
