//! Brown-Conrady radial-tangential lens distortion on normalized image
//! coordinates.
//!
//! ```text
//! r² = x² + y²
//! radial = 1 + k1·r² + k2·r⁴ + k3·r⁶
//! xd = x·radial + 2·p1·x·y + p2·(r² + 2·x²)
//! yd = y·radial + p1·(r² + 2·y²) + 2·p2·x·y
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Step size (max-norm) under which the inverse iteration is considered converged.
pub const UNDISTORT_STEP_TOL: f64 = 1e-10;
/// Iteration cap for the inverse mapping.
pub const UNDISTORT_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum UndistortError {
    #[error("undistortion did not converge after {iterations} iterations at ({xd}, {yd})")]
    NotConverged { xd: f64, yd: f64, iterations: usize },
    #[error("distortion Jacobian is singular near ({x}, {y})")]
    Singular { x: f64, y: f64 },
    #[error("({xd}, {yd}) only has a preimage past the fold of the distortion model")]
    Folded { xd: f64, yd: f64 },
}

/// Five-coefficient distortion model. All zeros is an ideal pinhole.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DistortionCoeffs {
    pub k1: f64,
    pub k2: f64,
    pub p1: f64,
    pub p2: f64,
    pub k3: f64,
}

impl DistortionCoeffs {
    /// Build from the OpenCV ordering `[k1, k2, p1, p2, k3]`.
    pub fn from_opencv(c: [f64; 5]) -> Self {
        Self {
            k1: c[0],
            k2: c[1],
            p1: c[2],
            p2: c[3],
            k3: c[4],
        }
    }

    pub fn to_opencv(&self) -> [f64; 5] {
        [self.k1, self.k2, self.p1, self.p2, self.k3]
    }

    pub fn is_zero(&self) -> bool {
        self.to_opencv().iter().all(|&c| c == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.to_opencv().iter().all(|c| c.is_finite())
    }

    #[inline]
    fn radial(&self, r2: f64) -> f64 {
        1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3))
    }

    /// True while both the radial factor and the derivative of the distorted
    /// radius, d(r·radial)/dr, are positive: the model is one-to-one there.
    fn radially_monotone(&self, r2: f64) -> bool {
        let slope = 1.0 + r2 * (3.0 * self.k1 + r2 * (5.0 * self.k2 + 7.0 * self.k3 * r2));
        self.radial(r2) > 0.0 && slope > 0.0
    }

    /// Jacobian of [`distort_normalized`] at `(x, y)` as `[[a, b], [c, d]]`.
    fn jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let r2 = x * x + y * y;
        let radial = self.radial(r2);
        // d(radial)/d(r²)
        let dr = self.k1 + r2 * (2.0 * self.k2 + 3.0 * self.k3 * r2);
        let cross = 2.0 * x * y * dr + 2.0 * self.p1 * x + 2.0 * self.p2 * y;
        [
            [radial + 2.0 * x * x * dr + 2.0 * self.p1 * y + 6.0 * self.p2 * x, cross],
            [cross, radial + 2.0 * y * y * dr + 6.0 * self.p1 * y + 2.0 * self.p2 * x],
        ]
    }
}

/// Apply the distortion model to normalized coordinates.
pub fn distort_normalized(d: &DistortionCoeffs, xn: f64, yn: f64) -> (f64, f64) {
    let r2 = xn * xn + yn * yn;
    let radial = d.radial(r2);
    let xd = xn * radial + 2.0 * d.p1 * xn * yn + d.p2 * (r2 + 2.0 * xn * xn);
    let yd = yn * radial + d.p1 * (r2 + 2.0 * yn * yn) + 2.0 * d.p2 * xn * yn;
    (xd, yd)
}

/// Invert [`distort_normalized`].
///
/// Iterates from `(xd, yd)` with Newton steps on the distortion map until the
/// max-norm step drops below [`UNDISTORT_STEP_TOL`], giving up after
/// [`UNDISTORT_MAX_ITER`] steps. Failure means the input lies outside the
/// region where the model is invertible; a solution on the far side of the
/// fold (where the distorted radius stops growing with r) is also rejected.
pub fn undistort_normalized(
    d: &DistortionCoeffs,
    xd: f64,
    yd: f64,
) -> Result<(f64, f64), UndistortError> {
    if d.is_zero() {
        return Ok((xd, yd));
    }
    let (mut x, mut y) = (xd, yd);
    for _ in 0..UNDISTORT_MAX_ITER {
        let (fx, fy) = distort_normalized(d, x, y);
        let (ex, ey) = (fx - xd, fy - yd);
        let [[a, b], [c, e]] = d.jacobian(x, y);
        let det = a * e - b * c;
        if det.abs() < f64::EPSILON {
            return Err(UndistortError::Singular { x, y });
        }
        let sx = (e * ex - b * ey) / det;
        let sy = (a * ey - c * ex) / det;
        x -= sx;
        y -= sy;
        if !(x.is_finite() && y.is_finite()) {
            break;
        }
        if sx.abs().max(sy.abs()) < UNDISTORT_STEP_TOL {
            if !d.radially_monotone(x * x + y * y) {
                return Err(UndistortError::Folded { xd, yd });
            }
            return Ok((x, y));
        }
    }
    Err(UndistortError::NotConverged {
        xd,
        yd,
        iterations: UNDISTORT_MAX_ITER,
    })
}
