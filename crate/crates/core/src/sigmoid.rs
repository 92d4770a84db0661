//! The logistic nonlinearity, its shifted variants and closed-form derivatives.

use crate::error::{Error, Result};

/// Logistic function `1 / (1 + e^{-z})`.
pub fn eval(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `S(z) - S(0)`, odd in `z`.
pub fn eval_shifted(z: f64) -> f64 {
    // tanh form keeps oddness exact in floating point
    0.5 * (0.5 * z).tanh()
}

/// q-th derivative of the logistic at `z`, as a polynomial in `S(z)`.
pub fn deriv(z: f64, q: usize) -> Result<f64> {
    deriv_from_value(eval(z), q)
}

fn deriv_from_value(s: f64, q: usize) -> Result<f64> {
    let s1 = s * (1.0 - s);
    match q {
        0 => Ok(s),
        1 => Ok(s1),
        2 => Ok(s1 * (1.0 - 2.0 * s)),
        3 => Ok(s1 * (1.0 - 6.0 * s + 6.0 * s * s)),
        4 => Ok(s1 * (1.0 - 2.0 * s) * (1.0 - 12.0 * s + 12.0 * s * s)),
        _ => Err(Error::DerivOrder(q)),
    }
}

/// Checks `(S(λx) - S(0))² <= S(λ²x²) - S(0)`.
pub fn square_bound_check(x: f64, lambda: f64) -> bool {
    let lhs = eval_shifted(lambda * x).powi(2);
    let rhs = eval_shifted(lambda * lambda * x * x);
    lhs <= rhs + 1e-15 * rhs.abs().max(f64::MIN_POSITIVE)
}

/// Nonlinearity used by a model. All variants are evaluated at `λ·V`; the
/// threshold of a model is carried by its constant input instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    Logistic,
    /// `1 / (1 + e^{-(z - shift)})`
    ShiftedLogistic { shift: f64 },
    /// Step function, for evaluation only.
    Heaviside,
}

impl Default for Nonlinearity {
    fn default() -> Self {
        Nonlinearity::Logistic
    }
}

impl Nonlinearity {
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            Nonlinearity::Logistic => eval(z),
            Nonlinearity::ShiftedLogistic { shift } => eval(z - shift),
            Nonlinearity::Heaviside => {
                if z > 0.0 {
                    1.0
                } else if z < 0.0 {
                    0.0
                } else {
                    0.5
                }
            }
        }
    }

    /// Value at the origin, `S(0)`.
    pub fn s0(&self) -> f64 {
        self.eval(0.0)
    }

    /// `S(z) - S(0)`.
    pub fn eval_shifted(&self, z: f64) -> f64 {
        match *self {
            Nonlinearity::Logistic => eval_shifted(z),
            _ => self.eval(z) - self.s0(),
        }
    }

    pub fn deriv(&self, z: f64, q: usize) -> Result<f64> {
        match *self {
            Nonlinearity::Logistic => deriv(z, q),
            Nonlinearity::ShiftedLogistic { shift } => deriv(z - shift, q),
            Nonlinearity::Heaviside => Err(Error::NotSmooth("heaviside")),
        }
    }

    /// Value and first derivative at once.
    pub fn eval_d1(&self, z: f64) -> Result<(f64, f64)> {
        let s = match *self {
            Nonlinearity::Logistic => eval(z),
            Nonlinearity::ShiftedLogistic { shift } => eval(z - shift),
            Nonlinearity::Heaviside => return Err(Error::NotSmooth("heaviside")),
        };
        Ok((s, s * (1.0 - s)))
    }

    /// Taylor coefficients `s_q = S^{(q)}(0)` for q = 1..=4.
    pub fn taylor(&self) -> Result<[f64; 4]> {
        Ok([self.deriv(0.0, 1)?, self.deriv(0.0, 2)?, self.deriv(0.0, 3)?, self.deriv(0.0, 4)?])
    }

    /// `sup |S(z) - S(0)|`.
    pub fn shifted_sup(&self) -> f64 {
        let s0 = self.s0();
        s0.max(1.0 - s0)
    }

    /// A primitive of `S(z) - S(0)` vanishing at 0.
    pub fn shifted_primitive(&self, z: f64) -> Result<f64> {
        // ln(1 + e^u) written stably
        let softplus = |u: f64| if u > 0.0 { u + (-u).exp().ln_1p() } else { u.exp().ln_1p() };
        match *self {
            Nonlinearity::Logistic => Ok(softplus(z) - std::f64::consts::LN_2 - 0.5 * z),
            Nonlinearity::ShiftedLogistic { shift } => {
                Ok(softplus(z - shift) - softplus(-shift) - self.s0() * z)
            }
            Nonlinearity::Heaviside => Err(Error::NotSmooth("heaviside")),
        }
    }
}
