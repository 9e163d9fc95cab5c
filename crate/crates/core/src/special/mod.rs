//! Central and non-central t distribution kernel.
//!
//! All functions are pure. Inputs are validated at this boundary; the
//! crate-internal `central` / `noncentral` submodules work on raw `f64`.

pub(crate) mod beta;
pub(crate) mod central;
pub(crate) mod noncentral;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Degrees of freedom of a t statistic. Positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Dof(f64);

impl Dof {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            domain(format!("degrees of freedom must be positive and finite, got {value}"))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Dof {
    type Error = crate::Error;
    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Dof> for f64 {
    fn from(d: Dof) -> f64 {
        d.0
    }
}

/// Non-centrality parameter δ. Any finite value; `δ = 0` is the central t.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Noncentrality(f64);

impl Noncentrality {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(Self(value))
        } else {
            domain(format!("non-centrality must be finite, got {value}"))
        }
    }

    pub const ZERO: Self = Self(0.0);

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

fn not_nan(x: f64) -> Result<()> {
    if x.is_nan() {
        domain("argument is NaN")
    } else {
        Ok(())
    }
}

fn finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        domain(format!("argument must be finite, got {x}"))
    }
}

fn open_unit(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        domain(format!("probability must lie in (0, 1), got {p}"))
    }
}

/// `P(t_ν <= x)`. Infinite `x` gives exactly 0 or 1.
pub fn t_cdf(x: f64, nu: Dof) -> Result<f64> {
    not_nan(x)?;
    Ok(central::cdf(x, nu.0))
}

/// Upper tail `P(t_ν > x)`, accurate in relative terms for large `x`.
pub fn t_sf(x: f64, nu: Dof) -> Result<f64> {
    not_nan(x)?;
    Ok(central::sf(x, nu.0))
}

/// The `x` with `t_cdf(x) = p`.
pub fn t_quantile(p: f64, nu: Dof) -> Result<f64> {
    open_unit(p)?;
    Ok(-central::isf(p, nu.0))
}

/// The `x` with `t_sf(x) = p`; equals `t_quantile(1 - p)` without rounding `1 - p`.
pub fn t_isf(p: f64, nu: Dof) -> Result<f64> {
    open_unit(p)?;
    Ok(central::isf(p, nu.0))
}

/// Natural log of the central t density.
pub fn t_pdf_log(x: f64, nu: Dof) -> Result<f64> {
    finite(x)?;
    Ok(central::pdf_log(x, nu.0))
}

/// `P(t_{ν,δ} <= x)`.
pub fn nct_cdf(x: f64, nu: Dof, delta: Noncentrality) -> Result<f64> {
    not_nan(x)?;
    Ok(noncentral::cdf(x, nu.0, delta.0))
}

/// `P(t_{ν,δ} > x)`, summed directly rather than as `1 - cdf`.
pub fn nct_sf(x: f64, nu: Dof, delta: Noncentrality) -> Result<f64> {
    not_nan(x)?;
    Ok(noncentral::sf(x, nu.0, delta.0))
}

/// Natural log of the non-central t density.
pub fn nct_pdf_log(x: f64, nu: Dof, delta: Noncentrality) -> Result<f64> {
    finite(x)?;
    Ok(noncentral::pdf_log(x, nu.0, delta.0))
}

/// `ln(ψ_{ν,δ}(x) / ψ_ν(x))`, the log likelihood ratio of the alternative to
/// the null at the t statistic `x`. Finite wherever both densities underflow.
pub fn log_density_ratio(x: f64, nu: Dof, delta: Noncentrality) -> Result<f64> {
    finite(x)?;
    Ok(noncentral::log_ratio(x, nu.0, delta.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nu(v: f64) -> Dof {
        Dof::new(v).unwrap()
    }

    #[test]
    fn dof_validation() {
        assert!(Dof::new(0.0).is_err());
        assert!(Dof::new(-3.0).is_err());
        assert!(Dof::new(f64::INFINITY).is_err());
        assert!(Dof::new(f64::NAN).is_err());
        assert_eq!(Dof::new(122.0).unwrap().get(), 122.0);
        assert!(Noncentrality::new(f64::NAN).is_err());
    }

    #[test]
    fn domain_errors() {
        assert!(t_cdf(f64::NAN, nu(5.0)).is_err());
        assert!(t_quantile(0.0, nu(5.0)).is_err());
        assert!(t_quantile(1.0, nu(5.0)).is_err());
        assert!(t_pdf_log(f64::INFINITY, nu(5.0)).is_err());
        let d = Noncentrality::new(1.0).unwrap();
        assert!(nct_cdf(f64::NAN, nu(5.0), d).is_err());
        assert!(nct_pdf_log(f64::NEG_INFINITY, nu(5.0), d).is_err());
    }

    #[test]
    fn limits_are_exact() {
        assert_eq!(t_cdf(0.0, nu(122.0)).unwrap(), 0.5);
        assert_eq!(t_cdf(f64::INFINITY, nu(5.0)).unwrap(), 1.0);
        assert_eq!(t_cdf(f64::NEG_INFINITY, nu(5.0)).unwrap(), 0.0);
        assert_eq!(t_quantile(0.5, nu(122.0)).unwrap(), 0.0);
        let d3 = Noncentrality::new(3.0).unwrap();
        assert_eq!(nct_cdf(f64::NEG_INFINITY, nu(10.0), d3).unwrap(), 0.0);
        assert_eq!(nct_cdf(f64::INFINITY, nu(10.0), d3).unwrap(), 1.0);
    }

    #[test]
    fn cauchy_density_at_zero() {
        let v = t_pdf_log(0.0, nu(1.0)).unwrap().exp();
        assert!((v - 1.0 / std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn quantile_round_trip() {
        for &n in &[2.0, 10.0, 122.0] {
            for &x in &[-3.0, -1.0, 0.0, 1.0, 3.0] {
                let p = t_cdf(x, nu(n)).unwrap();
                let back = t_quantile(p, nu(n)).unwrap();
                assert!((back - x).abs() < 1e-9, "nu={n} x={x}: {back}");
            }
        }
    }

    #[test]
    fn noncentral_reduces_to_central() {
        for &n in &[2.0, 10.0, 122.0] {
            for &x in &[-2.0, -1.0, 0.0, 1.0, 2.0] {
                let a = nct_cdf(x, nu(n), Noncentrality::ZERO).unwrap();
                let b = t_cdf(x, nu(n)).unwrap();
                assert!((a - b).abs() < 1e-10);
                let a = nct_pdf_log(x, nu(n), Noncentrality::ZERO).unwrap();
                let b = t_pdf_log(x, nu(n)).unwrap();
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn extreme_arguments_stay_in_range() {
        for &n in &[1.0, 2.0, 10.0, 122.0] {
            for &x in &[-1e8, -1e4, 1e4, 1e8] {
                let c = t_cdf(x, nu(n)).unwrap();
                assert!((0.0..=1.0).contains(&c));
                for &d in &[-6.0, 0.0, 3.0, 40.0] {
                    let c = nct_cdf(x, nu(n), Noncentrality::new(d).unwrap()).unwrap();
                    assert!((0.0..=1.0).contains(&c), "{x} {n} {d}: {c}");
                    let l = nct_pdf_log(x, nu(n), Noncentrality::new(d).unwrap()).unwrap();
                    assert!(!l.is_nan(), "{x} {n} {d}");
                }
            }
        }
    }
}
