use serde::{Deserialize, Serialize};

use super::FisError;

/// Trapezoidal membership function over a real universe.
///
/// The four abscissae satisfy `a <= b <= c <= d`. Triangles are trapezoids
/// with `b == c`; a crisp singleton collapses all four to one point. The
/// degree is piecewise linear: 0 outside `[a, d]`, 1 on `[b, c]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipFunction {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl MembershipFunction {
    pub fn trapezoid(a: f64, b: f64, c: f64, d: f64) -> Result<Self, FisError> {
        if !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite()) {
            return Err(FisError::InvalidBreakpoints {
                points: vec![a, b, c, d],
                reason: "breakpoints must be finite".into(),
            });
        }
        if !(a <= b && b <= c && c <= d) {
            return Err(FisError::InvalidBreakpoints {
                points: vec![a, b, c, d],
                reason: "breakpoints must be non-decreasing".into(),
            });
        }
        Ok(Self { a, b, c, d })
    }

    pub fn triangle(a: f64, b: f64, c: f64) -> Result<Self, FisError> {
        Self::trapezoid(a, b, b, c)
    }

    pub fn singleton(x: f64) -> Result<Self, FisError> {
        Self::trapezoid(x, x, x, x)
    }

    pub fn breakpoints(&self) -> (f64, f64, f64, f64) {
        (self.a, self.b, self.c, self.d)
    }

    /// Closed support `[a, d]`.
    pub fn support(&self) -> (f64, f64) {
        (self.a, self.d)
    }

    pub fn is_singleton(&self) -> bool {
        self.a == self.d
    }

    /// Membership degree at `x`. Total over all finite inputs.
    pub fn degree(&self, x: f64) -> f64 {
        if x < self.a || x > self.d {
            return 0.0;
        }
        if x >= self.b && x <= self.c {
            return 1.0;
        }
        if x < self.b {
            // a < b here, otherwise x < b implies x < a
            (x - self.a) / (self.b - self.a)
        } else {
            (self.d - x) / (self.d - self.c)
        }
    }

    /// Degree clipped from above, `min(cap, degree(x))`.
    pub fn clipped_degree(&self, x: f64, cap: f64) -> f64 {
        self.degree(x).min(cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trap(a: f64, b: f64, c: f64, d: f64) -> MembershipFunction {
        MembershipFunction::trapezoid(a, b, c, d).unwrap()
    }

    #[test]
    fn plateau_is_exactly_one() {
        let mf = trap(20.8, 20.95, 21.05, 21.2);
        assert_eq!(mf.degree(21.0), 1.0);
        assert_eq!(mf.degree(20.95), 1.0);
        assert_eq!(mf.degree(21.05), 1.0);
    }

    #[test]
    fn outside_support_is_exactly_zero() {
        let mf = trap(20.8, 20.95, 21.05, 21.2);
        assert_eq!(mf.degree(20.0), 0.0);
        assert_eq!(mf.degree(22.0), 0.0);
        assert_eq!(mf.degree(20.8), 0.0);
    }

    #[test]
    fn rising_edge_midpoint() {
        let mf = trap(20.8, 20.95, 21.05, 21.2);
        let x = 20.875;
        assert!((mf.degree(x) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn triangle_peak() {
        let mf = MembershipFunction::triangle(-2.0, -1.0, 0.0).unwrap();
        assert_eq!(mf.degree(-1.0), 1.0);
        assert_eq!(mf.degree(-2.0), 0.0);
        assert!((mf.degree(-1.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singleton_only_hits_its_point() {
        let mf = MembershipFunction::singleton(1.0).unwrap();
        assert_eq!(mf.degree(1.0), 1.0);
        assert_eq!(mf.degree(1.0 + 1e-9), 0.0);
        assert_eq!(mf.degree(0.0), 0.0);
        assert!(mf.is_singleton());
    }

    #[test]
    fn degenerate_vertical_edges() {
        // vertical rising edge: a == b
        let mf = trap(0.0, 0.0, 1.0, 2.0);
        assert_eq!(mf.degree(0.0), 1.0);
        assert_eq!(mf.degree(-0.1), 0.0);
        // vertical falling edge: c == d
        let mf = trap(0.0, 1.0, 2.0, 2.0);
        assert_eq!(mf.degree(2.0), 1.0);
        assert_eq!(mf.degree(2.1), 0.0);
    }

    #[test]
    fn rejects_unordered_breakpoints() {
        assert!(MembershipFunction::trapezoid(1.0, 0.5, 2.0, 3.0).is_err());
        assert!(MembershipFunction::trapezoid(0.0, 1.0, 0.9, 3.0).is_err());
        assert!(MembershipFunction::trapezoid(0.0, 1.0, 2.0, f64::NAN).is_err());
    }
}
