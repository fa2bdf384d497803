//! Spectral kernels: real functions of a Laplacian eigenvalue.

/// A filter response `g(lambda)` on the Laplacian spectrum.
pub trait Kernel {
    fn response(&self, lambda: f64) -> f64;
}

impl<F: Fn(f64) -> f64> Kernel for F {
    fn response(&self, lambda: f64) -> f64 {
        self(lambda)
    }
}

impl Kernel for Box<dyn Kernel + '_> {
    fn response(&self, lambda: f64) -> f64 {
        (**self).response(lambda)
    }
}

impl Kernel for &dyn Kernel {
    fn response(&self, lambda: f64) -> f64 {
        (**self).response(lambda)
    }
}

/// `g(lambda) = c` everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantKernel(pub f64);

impl Kernel for ConstantKernel {
    fn response(&self, _lambda: f64) -> f64 {
        self.0
    }
}

/// Indicator of the half-open interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalKernel {
    pub lo: f64,
    pub hi: f64,
}

impl Kernel for IntervalKernel {
    fn response(&self, lambda: f64) -> f64 {
        if lambda >= self.lo && lambda < self.hi {
            1.0
        } else {
            0.0
        }
    }
}

/// Frame energy `G(lambda) = sum_m g_m(lambda)^2`.
pub fn frame_energy<K: Kernel>(frame: &[K], lambda: f64) -> f64 {
    frame.iter().map(|k| k.response(lambda).powi(2)).sum()
}
