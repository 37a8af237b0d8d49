use serde::Serialize;

/// A closed interval `[lo, hi]` known to contain an exact value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Enclosure {
    pub lo: f64,
    pub hi: f64,
}

impl Enclosure {
    /// Orders the endpoints if they arrive swapped.
    pub fn new(a: f64, b: f64) -> Self {
        Self {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Image under a nondecreasing map.
    pub fn map_increasing(self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(f(self.lo), f(self.hi))
    }

    /// Image under a nonincreasing map.
    pub fn map_decreasing(self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(f(self.hi), f(self.lo))
    }

    pub fn add(self, other: Self) -> Self {
        Self::new(self.lo + other.lo, self.hi + other.hi)
    }

    /// Intersection; if the two are disjoint (roundoff), the tighter
    /// endpoints are kept in order.
    pub fn intersect(self, other: Self) -> Self {
        Self::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn clamp(self, lo: f64, hi: f64) -> Self {
        Self::new(self.lo.clamp(lo, hi), self.hi.clamp(lo, hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_images() {
        let e = Enclosure::new(0.5, 0.25);
        assert_eq!(e.lo, 0.25);
        let a = e.map_decreasing(f64::acos);
        assert!(a.lo == 0.5_f64.acos() && a.hi == 0.25_f64.acos());
        let s = e.map_increasing(f64::sqrt);
        assert_eq!(s.lo, 0.5);
        assert!((e.add(e).width() - 0.5).abs() < 1e-15);
        assert!(e.contains(0.3) && !e.contains(0.6));
    }
}
