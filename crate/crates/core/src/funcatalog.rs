//! Scalar functions `f` and their principal-branch complex evaluation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Below this modulus `phi` switches to a cancellation-free series in `sqrt(z)`.
pub const PHI_SMALL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatFn {
    /// `exp(z)`
    Exp,
    /// `exp(-z)`
    ExpNeg,
    /// principal `sqrt(z)`
    Sqrt,
    /// `1 / sqrt(z)`
    InvSqrt,
    /// `(exp(-sqrt(z)) - 1) / z`
    Phi,
    /// `z`
    Identity,
}

impl MatFn {
    pub const ALL: [MatFn; 6] = [
        MatFn::Exp,
        MatFn::ExpNeg,
        MatFn::Sqrt,
        MatFn::InvSqrt,
        MatFn::Phi,
        MatFn::Identity,
    ];

    pub fn token(self) -> &'static str {
        match self {
            MatFn::Exp => "exp",
            MatFn::ExpNeg => "expneg",
            MatFn::Sqrt => "sqrt",
            MatFn::InvSqrt => "invsqrt",
            MatFn::Phi => "phi",
            MatFn::Identity => "identity",
        }
    }

    /// Whether the function has the closed ray `(-inf, 0]` excluded.
    pub fn has_branch_cut(self) -> bool {
        matches!(self, MatFn::Sqrt | MatFn::InvSqrt | MatFn::Phi)
    }

    pub fn domain_constraint(self) -> &'static str {
        if self.has_branch_cut() {
            "z not in (-inf, 0]"
        } else {
            "entire complex plane"
        }
    }

    /// Distance from `z` to the excluded set; infinite for entire functions.
    pub fn distance_to_cut(self, z: C64) -> f64 {
        if !self.has_branch_cut() {
            return f64::INFINITY;
        }
        if z.re <= 0.0 {
            z.im.abs()
        } else {
            z.norm()
        }
    }

    pub fn eval(self, z: C64) -> Result<C64> {
        if self.has_branch_cut() && z.im == 0.0 && z.re <= 0.0 {
            return Err(Error::Domain {
                function: self.token(),
                value: z,
            });
        }
        Ok(match self {
            MatFn::Exp => z.exp(),
            MatFn::ExpNeg => (-z).exp(),
            MatFn::Sqrt => z.sqrt(),
            MatFn::InvSqrt => z.sqrt().inv(),
            MatFn::Phi => phi(z),
            MatFn::Identity => z,
        })
    }
}

fn phi(z: C64) -> C64 {
    let w = z.sqrt();
    if z.norm() < PHI_SMALL {
        // expm1(-w) / w^2 = -1/w + 1/2 - w/6 + w^2/24 - w^3/120 + ...
        let one = C64::new(1.0, 0.0);
        -one / w + 0.5 - w / 6.0 + w * w / 24.0 - w * w * w / 120.0
    } else {
        ((-w).exp() - 1.0) / z
    }
}

impl fmt::Display for MatFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for MatFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MatFn::ALL
            .iter()
            .copied()
            .find(|f| f.token() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown function '{s}'")))
    }
}

/// Free-function form of [`MatFn::eval`].
pub fn eval_scalar(f: MatFn, z: C64) -> Result<C64> {
    f.eval(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn trivial_values() {
        assert_eq!(MatFn::Exp.eval(c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert!((MatFn::InvSqrt.eval(c(4.0, 0.0)).unwrap() - 0.5).norm() < 1e-16);
        assert_eq!(MatFn::Identity.eval(c(-3.0, 2.0)).unwrap(), c(-3.0, 2.0));
    }

    #[test]
    fn phi_at_one() {
        // exp(-1) - 1 to 15 digits (mpmath, 50 digits: -0.63212055882855767840...)
        let v = MatFn::Phi.eval(c(1.0, 0.0)).unwrap();
        assert!((v.re + 0.632_120_558_828_557_7).abs() < 1e-15);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn phi_small_argument_matches_series_and_direct_form() {
        // Just below the switch the direct form still has ~12 good digits.
        let z = c(0.9e-8, 0.45e-8);
        let w = z.sqrt();
        let direct = ((-w).exp() - 1.0) / z;
        assert!((direct - phi(z)).norm() / direct.norm() < 1e-10);
        // Below the switch, compare against a long series (mpmath-free oracle).
        let z = c(1e-12, 3e-13);
        let w = z.sqrt();
        let mut term = C64::new(1.0, 0.0);
        let mut expm1 = C64::new(0.0, 0.0);
        for k in 1..30 {
            term *= -w / k as f64;
            expm1 += term;
        }
        let oracle = expm1 / z;
        let got = MatFn::Phi.eval(z).unwrap();
        assert!((got - oracle).norm() / oracle.norm() < 1e-14);
    }

    #[test]
    fn branch_cut_is_rejected() {
        for f in [MatFn::Sqrt, MatFn::InvSqrt, MatFn::Phi] {
            assert!(matches!(f.eval(c(-1.0, 0.0)), Err(Error::Domain { .. })));
            assert!(f.eval(c(0.0, 0.0)).is_err());
            assert!(f.eval(c(-1.0, 1e-3)).is_ok());
        }
        assert!(MatFn::Exp.eval(c(-1.0, 0.0)).is_ok());
    }

    #[test]
    fn principal_branch() {
        let s = MatFn::Sqrt.eval(c(-4.0, 1e-12)).unwrap();
        assert!(s.re >= 0.0);
        assert!((s - c(0.0, 2.0)).norm() < 1e-6);
    }

    #[test]
    fn tokens_round_trip() {
        for f in MatFn::ALL {
            assert_eq!(f.token().parse::<MatFn>().unwrap(), f);
        }
        assert!("cosh".parse::<MatFn>().is_err());
    }

    proptest! {
        #[test]
        fn real_positive_arguments_give_real_values(x in 1e-6f64..50.0) {
            for f in MatFn::ALL {
                let v = f.eval(c(x, 0.0)).unwrap();
                prop_assert!(v.im.abs() <= 1e-15 * v.norm());
            }
        }

        #[test]
        fn conjugate_symmetry(re in -20.0f64..20.0, im in 1e-6f64..20.0) {
            let z = c(re, im);
            for f in MatFn::ALL {
                let a = f.eval(z.conj()).unwrap();
                let b = f.eval(z).unwrap().conj();
                prop_assert!((a - b).norm() <= 1e-14 * b.norm().max(1e-300));
            }
        }
    }
}
