//! Floor-plan geometry: points and axis-aligned rectangles in home-local meters.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Closed axis-aligned rectangle `[min_x, max_x] × [min_y, max_y]`.
///
/// Serialized as `[min_x, min_y, max_x, max_y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    min: Point,
    max: Point,
}

impl Rect {
    /// Returns `None` unless both corners are finite and `min <= max` on each axis.
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Option<Self> {
        let min = Point::new(min_x, min_y);
        let max = Point::new(max_x, max_y);
        (min.is_finite() && max.is_finite() && min_x <= max_x && min_y <= max_y)
            .then_some(Self { min, max })
    }

    pub fn min(&self) -> Point {
        self.min
    }

    pub fn max(&self) -> Point {
        self.max
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains(&other.min) && self.contains(&other.max)
    }

    /// True when the interiors intersect. Rectangles that only share an edge
    /// or a corner do not overlap.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.min.x < other.max.x
            && other.min.x < self.max.x
            && self.min.y < other.max.y
            && other.min.y < self.max.y
    }

    /// Nearest point of the rectangle to `p`.
    pub fn clamp(&self, p: &Point) -> Point {
        Point::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
        )
    }

    pub fn center(&self) -> Point {
        Point::new(
            (self.min.x + self.max.x) / 2.0,
            (self.min.y + self.max.y) / 2.0,
        )
    }
}

impl TryFrom<[f64; 4]> for Rect {
    type Error = String;

    fn try_from([a, b, c, d]: [f64; 4]) -> Result<Self, Self::Error> {
        Rect::new(a, b, c, d)
            .ok_or_else(|| format!("invalid bounds [{a}, {b}, {c}, {d}]: need min <= max"))
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.min.x, r.min.y, r.max.x, r.max.y]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(a: f64, b: f64, c: f64, d: f64) -> Rect {
        Rect::new(a, b, c, d).unwrap()
    }

    #[test]
    fn containment_is_closed() {
        let r = rect(2.0, 0.0, 6.0, 4.0);
        assert!(r.contains(&Point::new(3.3, 2.2)));
        assert!(r.contains(&Point::new(2.0, 4.0)));
        assert!(!r.contains(&Point::new(6.01, 1.0)));
    }

    #[test]
    fn shared_edges_do_not_overlap() {
        let a = rect(0.0, 0.0, 2.0, 4.0);
        let b = rect(2.0, 0.0, 6.0, 4.0);
        assert!(!a.overlaps(&b));
        assert!(a.overlaps(&rect(1.0, 1.0, 3.0, 3.0)));
    }

    #[test]
    fn inverted_bounds_are_rejected() {
        assert!(Rect::new(3.0, 0.0, 1.0, 1.0).is_none());
        assert!(Rect::new(0.0, 0.0, f64::NAN, 1.0).is_none());
        assert!(serde_json::from_str::<Rect>("[1, 1, 0, 0]").is_err());
    }

    #[test]
    fn clamp_pulls_point_to_nearest_edge() {
        let r = rect(0.0, 0.0, 2.0, 2.0);
        assert_eq!(r.clamp(&Point::new(5.0, -1.0)), Point::new(2.0, 0.0));
        assert_eq!(r.clamp(&Point::new(1.0, 1.0)), Point::new(1.0, 1.0));
    }
}
