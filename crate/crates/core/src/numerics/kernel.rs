//! Product smoothing kernels.

/// Univariate kernel shape. Multivariate weights are products over coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Kernel {
    /// `(35/32)(1 - u^2)^3` on `|u| <= 1`.
    #[default]
    Triweight,
    /// `(3/4)(1 - u^2)` on `|u| <= 1`.
    Epanechnikov,
}

impl Kernel {
    #[inline]
    pub fn univariate(self, u: f64) -> f64 {
        if !(u.abs() < 1.0) {
            return 0.0;
        }
        let s = 1.0 - u * u;
        match self {
            Kernel::Triweight => 35.0 / 32.0 * s * s * s,
            Kernel::Epanechnikov => 0.75 * s,
        }
    }

    /// Product kernel on a 2-vector.
    #[inline]
    pub fn product(self, u: [f64; 2]) -> f64 {
        let a = self.univariate(u[0]);
        if a == 0.0 {
            return 0.0;
        }
        a * self.univariate(u[1])
    }
}

/// Multiplicative triweight kernel.
pub fn triweight_kernel(u: [f64; 2]) -> f64 {
    Kernel::Triweight.product(u)
}
