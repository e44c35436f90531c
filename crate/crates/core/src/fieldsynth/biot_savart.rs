//! Exact field of a finite straight current filament.

use crate::error::{Error, Result};
use crate::layoutpower::WireSegment;
use crate::scalar::Real;

/// mu0 / 4pi in microtesla * micrometer / microamp.
pub const MU0_OVER_4PI: f64 = 0.1;

/// Points closer than this to a segment (between its endpoints) are rejected,
/// micrometers.
pub const GUARD_DISTANCE: f64 = 1e-3;

#[inline]
fn sub<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn cross<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
fn dot3<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn norm<T: Real>(a: [T; 3]) -> T {
    dot3(a, a).sqrt()
}

/// Field (Bx, By, Bz) in microtesla at `point` (micrometers) from `seg`
/// carrying its current in microamps.
///
/// With unit direction `u`, `a = P - start` and `b = P - end`:
/// `B = k I (u x a) / |u x a|^2 * (u.a/|a| - u.b/|b|)`.
/// Points on the segment's line but outside its span see zero field.
pub fn biot_savart_segment<T: Real>(seg: &WireSegment<T>, point: [T; 3]) -> Result<[T; 3]> {
    let d = sub(seg.end, seg.start);
    let len = norm(d);
    if len == T::zero() {
        return Ok([T::zero(); 3]);
    }
    let u = d.map(|c| c / len);
    let a = sub(point, seg.start);
    let b = sub(point, seg.end);
    let perp = cross(u, a);
    let dist2 = dot3(perp, perp);
    let guard = T::lit(GUARD_DISTANCE);
    if dist2 < guard * guard {
        let t = dot3(u, a);
        if t >= -guard && t <= len + guard {
            return Err(Error::Singularity {
                distance: dist2.sqrt().to_f64_lossy(),
                guard: GUARD_DISTANCE,
            });
        }
        return Ok([T::zero(); 3]);
    }
    let geom = dot3(u, a) / norm(a) - dot3(u, b) / norm(b);
    let scale = T::lit(MU0_OVER_4PI) * seg.current * geom / dist2;
    Ok(perp.map(|c| c * scale))
}

/// Superposed field of all segments at one point.
pub fn field_at<T: Real>(segments: &[WireSegment<T>], point: [T; 3]) -> Result<[T; 3]> {
    let mut acc = [T::zero(); 3];
    for s in segments {
        let b = biot_savart_segment(s, point)?;
        acc[0] += b[0];
        acc[1] += b[1];
        acc[2] += b[2];
    }
    Ok(acc)
}
