//! Relaxed logarithmic barrier for one-sided constraints xi >= 0.
//!
//! Outside the relaxation zone (xi >= delta) this is the exact log barrier
//! -mu ln(xi); inside it switches to the quadratic extension
//!
//!   mu/2 * (((xi - 2 delta) / delta)^2 - 1) - mu ln(delta)
//!
//! chosen so value, slope, and curvature all match at the seam, keeping the
//! penalty C^2 and defined for any xi, including infeasible points. The
//! curvature is bounded below by mu / max(xi, delta)^2 > 0, so barrier terms
//! can only add convexity to a Gauss-Newton Hessian.

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Barrier {
    /// Barrier weight mu > 0.
    pub mu: f64,
    /// Relaxation threshold delta > 0.
    pub delta: f64,
}

impl Barrier {
    pub fn new(mu: f64, delta: f64) -> Self {
        assert!(mu > 0.0 && delta > 0.0, "barrier parameters must be positive");
        Barrier { mu, delta }
    }

    pub fn value(&self, xi: f64) -> f64 {
        if xi >= self.delta {
            -self.mu * xi.ln()
        } else {
            let s = (xi - 2.0 * self.delta) / self.delta;
            0.5 * self.mu * (s * s - 1.0) - self.mu * self.delta.ln()
        }
    }

    pub fn grad(&self, xi: f64) -> f64 {
        if xi >= self.delta {
            -self.mu / xi
        } else {
            self.mu * (xi - 2.0 * self.delta) / (self.delta * self.delta)
        }
    }

    pub fn hess(&self, xi: f64) -> f64 {
        if xi >= self.delta {
            self.mu / (xi * xi)
        } else {
            self.mu / (self.delta * self.delta)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Hand value: mu = 1, delta = 0.1, xi = 0.05 lies in the quadratic zone:
    /// 0.5 * ((0.05 - 0.2)/0.1)^2 - 0.5 - ln(0.1) = 1.125 - 0.5 + ln(10).
    #[test]
    fn worked_value_in_quadratic_zone() {
        let b = Barrier::new(1.0, 0.1);
        let expect = 0.625 + 10f64.ln();
        assert_abs_diff_eq!(b.value(0.05), expect, epsilon = 1e-12);
        assert_abs_diff_eq!(b.value(0.05), 2.927585, epsilon = 5e-7);
    }

    #[test]
    fn log_zone_matches_plain_log_barrier() {
        let b = Barrier::new(0.7, 0.2);
        for xi in [0.2, 0.5, 1.0, 10.0] {
            assert_abs_diff_eq!(b.value(xi), -0.7 * xi.ln(), epsilon = 1e-15);
            assert_abs_diff_eq!(b.grad(xi), -0.7 / xi, epsilon = 1e-15);
            assert_abs_diff_eq!(b.hess(xi), 0.7 / (xi * xi), epsilon = 1e-15);
        }
    }

    #[test]
    fn c2_at_the_seam() {
        let b = Barrier::new(1.3, 0.37);
        let d = b.delta;
        let eps = 1e-9;
        assert_abs_diff_eq!(b.value(d - eps), b.value(d + eps), epsilon = 1e-8);
        assert_abs_diff_eq!(b.grad(d - eps), b.grad(d + eps), epsilon = 1e-7);
        assert_abs_diff_eq!(b.hess(d - eps), b.hess(d + eps), epsilon = 1e-7);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = Barrier::new(0.9, 0.25);
        let h = 1e-6;
        // Sample both zones and points straddling the seam. The hess check
        // is looser at the straddle: the stencil spans the seam, where the
        // third derivative jumps, so the FD picks up O(h |hess'|) error.
        for xi in [-0.3, 0.0, 0.1, 0.25 - 1e-7, 0.25 + 1e-7, 0.4, 2.0] {
            let fd_grad = (b.value(xi + h) - b.value(xi - h)) / (2.0 * h);
            let fd_hess = (b.grad(xi + h) - b.grad(xi - h)) / (2.0 * h);
            assert_abs_diff_eq!(fd_grad, b.grad(xi), epsilon = 1e-6);
            assert_abs_diff_eq!(fd_hess, b.hess(xi), epsilon = 1e-4);
        }
    }

    #[test]
    fn curvature_stays_positive_everywhere() {
        let b = Barrier::new(0.05, 0.5);
        for i in -100..100 {
            let xi = i as f64 * 0.1;
            assert!(b.hess(xi) > 0.0);
        }
    }
}
