//! Isotropic kernel families and the centering/scaling that maps a point set
//! into the ball of radius 1/2, so every pairwise distance lies in `[0, 1]`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Smallest dimension supported by the harmonic expansion.
pub const MIN_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Cauchy,
    Gaussian,
    Matern15,
    Matern25,
    Custom,
}

impl KernelFamily {
    pub const BUILTIN: [KernelFamily; 4] = [
        KernelFamily::Cauchy,
        KernelFamily::Gaussian,
        KernelFamily::Matern15,
        KernelFamily::Matern25,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Cauchy => "cauchy",
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Matern15 => "matern15",
            KernelFamily::Matern25 => "matern25",
            KernelFamily::Custom => "custom",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cauchy" => Ok(KernelFamily::Cauchy),
            "gaussian" => Ok(KernelFamily::Gaussian),
            "matern15" => Ok(KernelFamily::Matern15),
            "matern25" => Ok(KernelFamily::Matern25),
            other => Err(Error::invalid(format!(
                "unknown kernel '{other}' (expected cauchy, gaussian, matern15, matern25)"
            ))),
        }
    }
}

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A kernel `k(r) = f(r / sigma)` depending only on the distance `r`.
#[derive(Clone)]
pub struct IsotropicKernel {
    family: KernelFamily,
    sigma: f64,
    custom: Option<Profile>,
}

impl fmt::Debug for IsotropicKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IsotropicKernel")
            .field("family", &self.family)
            .field("sigma", &self.sigma)
            .finish()
    }
}

impl IsotropicKernel {
    pub fn new(family: KernelFamily, sigma: f64) -> Result<Self> {
        if family == KernelFamily::Custom {
            return Err(Error::invalid("use IsotropicKernel::custom for custom kernels"));
        }
        check_sigma(sigma)?;
        Ok(Self {
            family,
            sigma,
            custom: None,
        })
    }

    pub fn cauchy(sigma: f64) -> Result<Self> {
        Self::new(KernelFamily::Cauchy, sigma)
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, sigma)
    }

    pub fn matern15(sigma: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern15, sigma)
    }

    pub fn matern25(sigma: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern25, sigma)
    }

    /// A user-supplied profile evaluated at `r / sigma`. Continuity and
    /// smoothness on `[0, inf)` are the caller's responsibility.
    pub fn custom<F>(sigma: f64, profile: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        check_sigma(sigma)?;
        Ok(Self {
            family: KernelFamily::Custom,
            sigma,
            custom: Some(Arc::new(profile)),
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Same profile with a different lengthscale.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self {
            sigma,
            ..self.clone()
        })
    }

    /// Checked evaluation; rejects negative or NaN distances.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::invalid(format!("kernel distance must be >= 0, got {r}")));
        }
        Ok(self.value(r))
    }

    /// Unchecked evaluation for `r >= 0`.
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        let z = r / self.sigma;
        match self.family {
            KernelFamily::Cauchy => 1.0 / (1.0 + z * z),
            KernelFamily::Gaussian => (-(z * z)).exp(),
            KernelFamily::Matern15 => {
                let s = 3f64.sqrt() * z;
                (1.0 + s) * (-s).exp()
            }
            KernelFamily::Matern25 => {
                let s = 5f64.sqrt() * z;
                (1.0 + s + 5.0 / 3.0 * z * z) * (-s).exp()
            }
            KernelFamily::Custom => (self.custom.as_ref().expect("custom profile"))(z),
        }
    }

    /// Even extension `k(|r|)` on the whole real line.
    #[inline]
    pub fn even_value(&self, r: f64) -> f64 {
        self.value(r.abs())
    }

    #[inline]
    pub fn between(&self, x: &[f64], y: &[f64]) -> f64 {
        self.value(distance(x, y))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("lengthscale must be finite and > 0, got {sigma}")));
    }
    Ok(())
}

#[inline]
pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Point sets translated and scaled into the ball of radius 1/2, with the
/// kernel lengthscale adjusted so kernel values are unchanged.
#[derive(Debug, Clone)]
pub struct ScaledProblem {
    pub center: Vec<f64>,
    /// Coordinate multiplier: `x' = scale * (x - center)`.
    pub scale: f64,
    pub kernel: IsotropicKernel,
    pub x: DenseMatrix,
    /// `None` when the second point set is the first one.
    pub y: Option<DenseMatrix>,
}

impl ScaledProblem {
    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn y_points(&self) -> &DenseMatrix {
        self.y.as_ref().unwrap_or(&self.x)
    }

    pub fn is_symmetric(&self) -> bool {
        self.y.is_none()
    }

    /// Maps an original-coordinates point into the scaled frame.
    pub fn map_point(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(&self.center)
            .map(|(v, c)| self.scale * (v - c))
            .collect()
    }
}

/// Centers at the centroid of `X ∪ Y` and scales so the largest centered norm
/// becomes 1/2. A degenerate set (all points identical) keeps scale 1.
pub fn make_scaled_problem(
    kernel: &IsotropicKernel,
    x: &DenseMatrix,
    y: Option<&DenseMatrix>,
) -> Result<ScaledProblem> {
    let d = x.cols();
    if d < MIN_DIM {
        return Err(Error::UnsupportedDimension { dim: d });
    }
    if x.rows() == 0 {
        return Err(Error::invalid("point set X is empty"));
    }
    if let Some(y) = y {
        if y.cols() != d {
            return Err(Error::invalid(format!(
                "point sets have different dimensions: {d} vs {}",
                y.cols()
            )));
        }
        if y.rows() == 0 {
            return Err(Error::invalid("point set Y is empty"));
        }
    }
    if !x.is_finite() || y.is_some_and(|y| !y.is_finite()) {
        return Err(Error::invalid("point coordinates must be finite"));
    }

    let sets: Vec<&DenseMatrix> = std::iter::once(x).chain(y).collect();
    let total: usize = sets.iter().map(|s| s.rows()).sum();
    let mut center = vec![0.0; d];
    for s in &sets {
        for i in 0..s.rows() {
            for (c, v) in center.iter_mut().zip(s.row(i)) {
                *c += v;
            }
        }
    }
    center.iter_mut().for_each(|c| *c /= total as f64);

    let mut max_norm = 0.0_f64;
    for s in &sets {
        for i in 0..s.rows() {
            max_norm = max_norm.max(distance(s.row(i), &center));
        }
    }
    let scale = if max_norm > 0.0 { 0.5 / max_norm } else { 1.0 };

    let map = |s: &DenseMatrix| {
        DenseMatrix::from_fn(s.rows(), d, |i, j| scale * (s[(i, j)] - center[j]))
    };
    Ok(ScaledProblem {
        scale,
        kernel: kernel.with_sigma(kernel.sigma() * scale)?,
        x: map(x),
        y: y.map(map),
        center,
    })
}
