//! Defuzzification of max-aggregated, min-clipped consequent sets.
//!
//! The aggregate of clipped trapezoids is piecewise linear, so its centroid
//! has a closed form: split the axis at every set breakpoint, clip corner and
//! pairwise crossing, then integrate the upper envelope segment by segment.
//! A uniform-grid variant is kept for convergence checks and as a slower
//! drop-in defuzzifier.

use super::MembershipFunction;

/// Consequent set clipped from above by its rule activation.
#[derive(Debug, Clone, Copy)]
pub struct ClippedSet {
    pub mf: MembershipFunction,
    pub cap: f64,
}

impl ClippedSet {
    fn eval(&self, x: f64) -> f64 {
        self.mf.clipped_degree(x, self.cap)
    }

    fn push_breakpoints(&self, out: &mut Vec<f64>) {
        let (a, b, c, d) = self.mf.breakpoints();
        out.extend_from_slice(&[a, b, c, d]);
        // where the cap cuts the rising / falling edges
        if self.cap < 1.0 {
            if a < b {
                out.push(a + self.cap * (b - a));
            }
            if c < d {
                out.push(d - self.cap * (d - c));
            }
        }
    }
}

const AREA_EPS: f64 = 1e-12;

/// Centroid of the pointwise max of the clipped sets, exact up to floating
/// point. Returns `None` when the aggregate has (numerically) zero area, e.g.
/// when nothing fired or only singletons did.
pub fn centroid_exact(sets: &[ClippedSet]) -> Option<f64> {
    let active: Vec<&ClippedSet> = sets.iter().filter(|s| s.cap > 0.0).collect();
    if active.is_empty() {
        return None;
    }

    let mut cuts = Vec::with_capacity(active.len() * 6);
    for s in &active {
        s.push_breakpoints(&mut cuts);
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();

    let mut area = 0.0;
    let mut moment = 0.0;
    let mut inner = Vec::new();
    for win in cuts.windows(2) {
        let (x0, x1) = (win[0], win[1]);
        if x1 <= x0 {
            continue;
        }
        // Every set is linear on [x0, x1]; the envelope can only switch where
        // two of those lines cross.
        inner.clear();
        inner.push(x0);
        for i in 0..active.len() {
            for j in (i + 1)..active.len() {
                let d0 = active[i].eval(x0) - active[j].eval(x0);
                let d1 = active[i].eval(x1) - active[j].eval(x1);
                if d0 * d1 < 0.0 {
                    let t = d0 / (d0 - d1);
                    let x = x0 + t * (x1 - x0);
                    if x > x0 && x < x1 {
                        inner.push(x);
                    }
                }
            }
        }
        inner.push(x1);
        inner.sort_by(|a, b| a.partial_cmp(b).unwrap());

        for seg in inner.windows(2) {
            let (u0, u1) = (seg[0], seg[1]);
            let h = u1 - u0;
            if h <= 0.0 {
                continue;
            }
            let g0 = envelope(&active, u0);
            let g1 = envelope(&active, u1);
            area += 0.5 * (g0 + g1) * h;
            // exact first moment of a linear segment
            moment += h * (u0 * (2.0 * g0 + g1) + u1 * (g0 + 2.0 * g1)) / 6.0;
        }
    }

    if area <= AREA_EPS {
        None
    } else {
        Some(moment / area)
    }
}

fn envelope(sets: &[&ClippedSet], x: f64) -> f64 {
    sets.iter().map(|s| s.eval(x)).fold(0.0, f64::max)
}

/// Centroid by sampling the aggregate on `n` uniform points over `universe`
/// with trapezoid end weights. Converges to [`centroid_exact`] as `n` grows.
pub fn centroid_on_grid(sets: &[ClippedSet], universe: (f64, f64), n: usize) -> Option<f64> {
    assert!(n >= 2, "grid needs at least two points");
    let (lo, hi) = universe;
    let step = (hi - lo) / (n - 1) as f64;
    let mut area = 0.0;
    let mut moment = 0.0;
    for i in 0..n {
        let x = lo + step * i as f64;
        let g = sets
            .iter()
            .map(|s| s.eval(x))
            .fold(0.0, f64::max);
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        area += w * g;
        moment += w * x * g;
    }
    if area * step <= AREA_EPS {
        None
    } else {
        Some(moment / area)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri(a: f64, b: f64, c: f64) -> MembershipFunction {
        MembershipFunction::triangle(a, b, c).unwrap()
    }

    #[test]
    fn symmetric_set_centroid_is_its_center() {
        for cap in [0.2, 0.5, 1.0] {
            let sets = [ClippedSet {
                mf: tri(-2.0, -1.0, 0.0),
                cap,
            }];
            let c = centroid_exact(&sets).unwrap();
            assert!((c - (-1.0)).abs() < 1e-12, "cap {cap} gave {c}");
        }
    }

    #[test]
    fn empty_and_zero_area_give_none() {
        assert!(centroid_exact(&[]).is_none());
        let sets = [ClippedSet {
            mf: tri(0.0, 1.0, 2.0),
            cap: 0.0,
        }];
        assert!(centroid_exact(&sets).is_none());
        let singleton = [ClippedSet {
            mf: MembershipFunction::singleton(1.0).unwrap(),
            cap: 1.0,
        }];
        assert!(centroid_exact(&singleton).is_none());
    }

    #[test]
    fn two_sets_balance() {
        // equal clipped areas around -1 and +1 must balance at 0
        let sets = [
            ClippedSet {
                mf: tri(-2.0, -1.0, 0.0),
                cap: 0.7,
            },
            ClippedSet {
                mf: tri(0.0, 1.0, 2.0),
                cap: 0.7,
            },
        ];
        let c = centroid_exact(&sets).unwrap();
        assert!(c.abs() < 1e-12, "got {c}");
    }

    #[test]
    fn grid_converges_to_exact() {
        let sets = [
            ClippedSet {
                mf: tri(-2.0, -1.0, 0.0),
                cap: 0.8,
            },
            ClippedSet {
                mf: MembershipFunction::trapezoid(-0.5, 0.5, 1.5, 2.0).unwrap(),
                cap: 0.35,
            },
        ];
        let exact = centroid_exact(&sets).unwrap();
        let coarse = centroid_on_grid(&sets, (-3.0, 3.0), 1001).unwrap();
        let fine = centroid_on_grid(&sets, (-3.0, 3.0), 1_000_001).unwrap();
        assert!((coarse - exact).abs() < 1e-3);
        assert!((fine - exact).abs() < 1e-9);
    }

    #[test]
    fn overlapping_sets_use_upper_envelope() {
        // two overlapping clipped triangles; compare exact against a very
        // fine grid as an independent route
        let sets = [
            ClippedSet {
                mf: tri(0.0, 1.0, 2.0),
                cap: 0.9,
            },
            ClippedSet {
                mf: tri(0.5, 1.5, 2.5),
                cap: 0.6,
            },
        ];
        let exact = centroid_exact(&sets).unwrap();
        let fine = centroid_on_grid(&sets, (0.0, 2.5), 2_000_001).unwrap();
        assert!((exact - fine).abs() < 1e-8, "exact {exact} vs grid {fine}");
    }
}
