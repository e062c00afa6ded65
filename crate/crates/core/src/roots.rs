//! Bracketing root finders for monotone scalar problems.
//!
//! Every solver in this crate works on functions that are monotone over the
//! bracket, so plain bisection always converges. The helpers here only add
//! bracket growth and a uniform stopping rule.

/// Stopping rule shared by the bisection routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    /// Stop once `hi - lo <= rel * max(|lo|, |hi|)`.
    pub rel: f64,
    /// Hard cap on halvings.
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rel: 1e-12,
            max_iter: 200,
        }
    }
}

impl Tolerance {
    /// Tight enough that the bracket collapses to a few ulps.
    pub const TIGHT: Tolerance = Tolerance {
        rel: 1e-15,
        max_iter: 200,
    };
}

/// A bracket `[lo, hi]` that was returned by a solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Bisects an increasing function `f` for `f(x) = target` on `[lo, hi]`.
///
/// The caller guarantees `f(lo) <= target <= f(hi)`; the returned bracket
/// still satisfies that ordering. An exact hit collapses the bracket.
pub fn bisect_increasing<F>(mut f: F, target: f64, lo: f64, hi: f64, tol: Tolerance) -> Bracket
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..tol.max_iter {
        let scale = lo.abs().max(hi.abs());
        if hi - lo <= tol.rel * scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // bracket is down to adjacent floats
            break;
        }
        let v = f(mid);
        if v == target {
            return Bracket { lo: mid, hi: mid };
        }
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Bracket { lo, hi }
}

/// Grows `hi` by doubling until `f(hi) >= target`.
///
/// Returns the final `(lo, hi)` pair on success, where `lo` is the last
/// value that was still below the target. On failure returns the last
/// bracket tried.
pub fn grow_upper<F>(mut f: F, target: f64, start: f64, max_doublings: usize) -> Result<Bracket, Bracket>
where
    F: FnMut(f64) -> f64,
{
    let mut lo = 0.0;
    let mut hi = start;
    for _ in 0..=max_doublings {
        if f(hi) >= target {
            return Ok(Bracket { lo, hi });
        }
        lo = hi;
        hi *= 2.0;
    }
    Err(Bracket { lo, hi: lo })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_cube_root() {
        let b = bisect_increasing(|x| x * x * x, 2.0, 0.0, 2.0, Tolerance::TIGHT);
        assert!((b.mid() - 2f64.cbrt()).abs() < 1e-14);
        assert!(b.lo.powi(3) <= 2.0 && b.hi.powi(3) >= 2.0);
    }

    #[test]
    fn bisect_exact_hit_collapses() {
        let b = bisect_increasing(|x| x, 1.0, 0.0, 2.0, Tolerance::default());
        assert_eq!(b.lo, 1.0);
        assert_eq!(b.hi, 1.0);
    }

    #[test]
    fn grow_upper_doubles_until_crossing() {
        let b = grow_upper(|x| x, 10.0, 1.0, 60).unwrap();
        assert_eq!(b.hi, 16.0);
        assert_eq!(b.lo, 8.0);
    }

    #[test]
    fn grow_upper_reports_failure() {
        let err = grow_upper(|_| 0.0, 1.0, 1.0, 3).unwrap_err();
        assert_eq!(err.lo, 8.0);
    }
}
