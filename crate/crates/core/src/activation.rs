//! Activation functions and their derivatives.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Supported activations. Piecewise-linear ones (ReLU, leaky, identity) take
/// derivative 1 at the kink.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Leaky(f64),
    Tanh,
    Erf,
    Softplus,
    Identity,
}

impl Activation {
    #[inline]
    pub fn phi(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Leaky(a) => {
                if x >= 0.0 {
                    x
                } else {
                    a * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Erf => erf(x),
            Activation::Softplus => softplus(x),
            Activation::Identity => x,
        }
    }

    /// Derivative; at the ReLU/leaky kink we use the right limit (slope 1).
    #[inline]
    pub fn dphi(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Leaky(a) => {
                if x >= 0.0 {
                    1.0
                } else {
                    a
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Erf => 2.0 / std::f64::consts::PI.sqrt() * (-x * x).exp(),
            Activation::Softplus => sigmoid(x),
            Activation::Identity => 1.0,
        }
    }

    /// Piecewise-linear activations admit exact Gaussian-moment constants.
    pub fn piecewise_linear_slope(self) -> Option<f64> {
        match self {
            Activation::Relu => Some(0.0),
            Activation::Leaky(a) => Some(a),
            Activation::Identity => Some(1.0),
            _ => None,
        }
    }

    /// Tag byte used in checkpoint files.
    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Leaky(_) => 1,
            Activation::Tanh => 2,
            Activation::Erf => 3,
            Activation::Softplus => 4,
            Activation::Identity => 5,
        }
    }

    pub fn from_tag(tag: u8, leaky_slope: f64) -> Result<Self> {
        Ok(match tag {
            0 => Activation::Relu,
            1 => Activation::Leaky(leaky_slope),
            2 => Activation::Tanh,
            3 => Activation::Erf,
            4 => Activation::Softplus,
            5 => Activation::Identity,
            other => return Err(Error::Format(format!("unknown activation tag {other}"))),
        })
    }

    /// Parse the config spelling: `relu`, `leaky(0.1)`, `tanh`, `erf`,
    /// `softplus`, `identity`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("leaky(").and_then(|r| r.strip_suffix(')')) {
            let a: f64 = rest
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad leaky slope {rest:?}")))?;
            return Ok(Activation::Leaky(a));
        }
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "erf" => Ok(Activation::Erf),
            "softplus" => Ok(Activation::Softplus),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidParameter(format!("unknown activation {other:?}"))),
        }
    }

    pub fn name(self) -> String {
        match self {
            Activation::Relu => "relu".into(),
            Activation::Leaky(a) => format!("leaky({a})"),
            Activation::Tanh => "tanh".into(),
            Activation::Erf => "erf".into(),
            Activation::Softplus => "softplus".into(),
            Activation::Identity => "identity".into(),
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    // ln(1+e^x) without overflow for large |x|.
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Error function, Cody's rational approximations (~1 ulp over f64).
pub fn erf(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.46875 {
        const A: [f64; 5] = [
            3.16112374387056560e0,
            1.13864154151050156e2,
            3.77485237685302021e2,
            3.20937758913846947e3,
            1.85777706184603153e-1,
        ];
        const B: [f64; 4] = [
            2.36012909523441209e1,
            2.44024637934444173e2,
            1.28261652607737228e3,
            2.84423683343917062e3,
        ];
        let z = y * y;
        let mut num = A[4] * z;
        let mut den = z;
        for i in 0..3 {
            num = (num + A[i]) * z;
            den = (den + B[i]) * z;
        }
        x * (num + A[3]) / (den + B[3])
    } else {
        let erfc = if y <= 4.0 {
            const C: [f64; 9] = [
                5.64188496988670089e-1,
                8.88314979438837594e0,
                6.61191906371416295e1,
                2.98635138197400131e2,
                8.81952221241769090e2,
                1.71204761263407058e3,
                2.05107837782607147e3,
                1.23033935479799725e3,
                2.15311535474403846e-8,
            ];
            const D: [f64; 8] = [
                1.57449261107098347e1,
                1.17693950891312499e2,
                5.37181101862009858e2,
                1.62138957456669019e3,
                3.29079923573345963e3,
                4.36261909014324716e3,
                3.43936767414372164e3,
                1.23033935480374942e3,
            ];
            let mut num = C[8] * y;
            let mut den = y;
            for i in 0..7 {
                num = (num + C[i]) * y;
                den = (den + D[i]) * y;
            }
            exp_nxx(y) * (num + C[7]) / (den + D[7])
        } else {
            const P: [f64; 6] = [
                3.05326634961232344e-1,
                3.60344899949804439e-1,
                1.25781726111229246e-1,
                1.60837851487422766e-2,
                6.58749161529837803e-4,
                1.63153871373020978e-2,
            ];
            const Q: [f64; 5] = [
                2.56852019228982242e0,
                1.87295284992346047e0,
                5.27905102951428412e-1,
                6.05183413124413191e-2,
                2.33520497626869185e-3,
            ];
            const SQRPI: f64 = 5.6418958354775628695e-1;
            let z = 1.0 / (y * y);
            let mut num = P[5] * z;
            let mut den = z;
            for i in 0..4 {
                num = (num + P[i]) * z;
                den = (den + Q[i]) * z;
            }
            let r = z * (num + P[4]) / (den + Q[4]);
            if y >= 26.0 {
                0.0
            } else {
                exp_nxx(y) * (SQRPI - r) / y
            }
        };
        if x < 0.0 {
            erfc - 1.0
        } else {
            1.0 - erfc
        }
    }
}

/// exp(-y*y) computed as exp(-hi²)·exp(-(y-hi)(y+hi)) to keep accuracy.
#[inline]
fn exp_nxx(y: f64) -> f64 {
    let hi = (y * 16.0).trunc() / 16.0;
    let del = (y - hi) * (y + hi);
    (-hi * hi).exp() * (-del).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_reference_values() {
        let cases = [
            (0.0, 0.0),
            (0.1, 0.1124629160182849),
            (0.5, 0.5204998778130465),
            (1.0, 0.8427007929497149),
            (2.0, 0.9953222650189527),
            (3.0, 0.9999779095030014),
            (5.0, 0.9999999999984626),
        ];
        for (x, want) in cases {
            assert!((erf(x) - want).abs() < 1e-15, "erf({x})");
            assert!((erf(-x) + want).abs() < 1e-15, "erf(-{x})");
        }
    }

    #[test]
    fn kink_derivative_is_one() {
        assert_eq!(Activation::Relu.dphi(0.0), 1.0);
        assert_eq!(Activation::Leaky(0.3).dphi(0.0), 1.0);
    }

    #[test]
    fn softplus_is_stable_at_extremes() {
        assert!((Activation::Softplus.phi(800.0) - 800.0).abs() < 1e-9);
        assert!(Activation::Softplus.phi(-800.0).abs() < 1e-300);
        assert!((Activation::Softplus.dphi(40.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn activation_parse_round_trip() {
        for act in [
            Activation::Relu,
            Activation::Leaky(0.05),
            Activation::Tanh,
            Activation::Erf,
            Activation::Softplus,
            Activation::Identity,
        ] {
            assert_eq!(Activation::parse(&act.name()).unwrap(), act);
        }
        assert!(Activation::parse("swish").is_err());
    }
}
