//! Axis-aligned boxes, IoU, and the CIOU regression loss.

use crate::dual::{Dual4, SmoothNum};
use crate::error::{Error, Result};
use crate::num::Real;
use serde::{Deserialize, Serialize};

/// Axis-aligned rectangle in center/size form, scene units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox<F> {
    pub cx: F,
    pub cy: F,
    pub w: F,
    pub h: F,
}

impl<F: Real> BBox<F> {
    pub fn new(cx: F, cy: F, w: F, h: F) -> Result<Self> {
        if !(w > F::zero() && h > F::zero()) {
            return Err(Error::DegenerateBox {
                w: w.to_f64().unwrap_or(f64::NAN),
                h: h.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { cx, cy, w, h })
    }

    /// Corner form `(x1, y1, x2, y2)` with `x1 < x2`, `y1 < y2`.
    pub fn corners(&self) -> (F, F, F, F) {
        let half = F::from_f64_lossy(0.5);
        (
            self.cx - half * self.w,
            self.cy - half * self.h,
            self.cx + half * self.w,
            self.cy + half * self.h,
        )
    }

    pub fn from_corners(x1: F, y1: F, x2: F, y2: F) -> Result<Self> {
        let half = F::from_f64_lossy(0.5);
        Self::new(half * (x1 + x2), half * (y1 + y2), x2 - x1, y2 - y1)
    }

    pub fn area(&self) -> F {
        self.w * self.h
    }

    /// Whether `(x, y)` lies inside the box (half-open on the far edges).
    pub fn contains(&self, x: F, y: F) -> bool {
        let (x1, y1, x2, y2) = self.corners();
        x >= x1 && x < x2 && y >= y1 && y < y2
    }

    /// Box scaled about its own center.
    pub fn scaled(&self, factor: F) -> Self {
        Self {
            cx: self.cx,
            cy: self.cy,
            w: self.w * factor,
            h: self.h * factor,
        }
    }
}

/// Intersection-over-union of two boxes.
pub fn iou<F: Real>(a: &BBox<F>, b: &BBox<F>) -> F {
    let (ax1, ay1, ax2, ay2) = a.corners();
    let (bx1, by1, bx2, by2) = b.corners();
    let iw = (ax2.min(bx2) - ax1.max(bx1)).max(F::zero());
    let ih = (ay2.min(by2) - ay1.max(by1)).max(F::zero());
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= F::zero() {
        F::zero()
    } else {
        inter / union
    }
}

/// CIOU loss written over the [`SmoothNum`] interface so the same formula
/// serves both the plain evaluation and the dual-number gradient.
///
/// `1 - IoU + rho^2/c^2 + alpha_c * v_ar`, where `rho` is the center
/// distance, `c` the diagonal of the smallest enclosing box, `v_ar` the
/// aspect-ratio penalty and `alpha_c = v_ar / ((1 - IoU) + v_ar)` (0 when
/// `v_ar` vanishes).
fn ciou_generic<F: Real, T: SmoothNum<F>>(
    gt: (F, F, F, F),
    px1: T,
    py1: T,
    px2: T,
    py2: T,
) -> T {
    let zero = T::constant(F::zero());
    let one = T::constant(F::one());
    let half = T::constant(F::from_f64_lossy(0.5));
    let (gx1, gy1, gx2, gy2) = gt;
    let gx1 = T::constant(gx1);
    let gy1 = T::constant(gy1);
    let gx2 = T::constant(gx2);
    let gy2 = T::constant(gy2);

    let pw = px2 - px1;
    let ph = py2 - py1;
    let gw = gx2 - gx1;
    let gh = gy2 - gy1;

    let iw = (px2.min(gx2) - px1.max(gx1)).max(zero);
    let ih = (py2.min(gy2) - py1.max(gy1)).max(zero);
    let inter = iw * ih;
    let union = pw * ph + gw * gh - inter;
    let iou = inter / union;

    let cw = px2.max(gx2) - px1.min(gx1);
    let ch = py2.max(gy2) - py1.min(gy1);
    let c2 = cw * cw + ch * ch;

    let pcx = half * (px1 + px2);
    let pcy = half * (py1 + py2);
    let gcx = half * (gx1 + gx2);
    let gcy = half * (gy1 + gy2);
    let dx = pcx - gcx;
    let dy = pcy - gcy;
    let rho2 = dx * dx + dy * dy;

    let pi = F::from_f64_lossy(std::f64::consts::PI);
    let four_over_pi2 = T::constant(F::from_f64_lossy(4.0) / (pi * pi));
    let da = (gw / gh).atan() - (pw / ph).atan();
    let v_ar = four_over_pi2 * da * da;

    let aspect = if v_ar.value() == F::zero() {
        zero
    } else {
        let alpha_c = v_ar / ((one - iou) + v_ar);
        alpha_c * v_ar
    };

    one - iou + rho2 / c2 + aspect
}

fn check_valid<F: Real>(b: &BBox<F>) -> Result<()> {
    if !(b.w > F::zero() && b.h > F::zero()) {
        return Err(Error::DegenerateBox {
            w: b.w.to_f64().unwrap_or(f64::NAN),
            h: b.h.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// CIOU regression loss between a ground-truth and a predicted box.
pub fn ciou_loss<F: Real>(gt: &BBox<F>, pred: &BBox<F>) -> Result<F> {
    check_valid(gt)?;
    check_valid(pred)?;
    let (px1, py1, px2, py2) = pred.corners();
    Ok(ciou_generic(gt.corners(), px1, py1, px2, py2))
}

/// CIOU loss and its exact gradient with respect to the four box offsets
/// `(left, top, right, bottom)` measured from the anchor center `(ax, ay)`.
///
/// The predicted corners are `x1 = ax - left`, `y1 = ay - top`,
/// `x2 = ax + right`, `y2 = ay + bottom`.
pub fn ciou_loss_grad_offsets<F: Real>(
    gt: &BBox<F>,
    ax: F,
    ay: F,
    offsets: [F; 4],
) -> Result<(F, [F; 4])> {
    check_valid(gt)?;
    let [l, t, r, b] = offsets;
    if !(l + r > F::zero() && t + b > F::zero()) {
        return Err(Error::DegenerateBox {
            w: (l + r).to_f64().unwrap_or(f64::NAN),
            h: (t + b).to_f64().unwrap_or(f64::NAN),
        });
    }
    let px1 = Dual4::seeded(ax - l, 0, -F::one());
    let py1 = Dual4::seeded(ay - t, 1, -F::one());
    let px2 = Dual4::seeded(ax + r, 2, F::one());
    let py2 = Dual4::seeded(ay + b, 3, F::one());
    let out = ciou_generic(gt.corners(), px1, py1, px2, py2);
    Ok((out.v, out.d))
}
