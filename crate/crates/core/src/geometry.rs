//! Box areas, intersections and IoU.
//!
//! Extents are derived from the corner coordinates so that identical boxes
//! produce bit-identical intersection and union areas (IoU exactly 1).

use crate::model::BBox;

pub fn area(b: &BBox) -> f64 {
    (b.right() - b.x()) * (b.bottom() - b.y())
}

/// Area of the overlap; 0 for disjoint or edge-touching boxes.
pub fn intersection_area(a: &BBox, b: &BBox) -> f64 {
    let iw = a.right().min(b.right()) - a.x().max(b.x());
    let ih = a.bottom().min(b.bottom()) - a.y().max(b.y());
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    iw * ih
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = intersection_area(a, b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = area(a) + area(b) - inter;
    (inter / union).clamp(0.0, 1.0)
}
