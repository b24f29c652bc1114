use serde::{Deserialize, Serialize};

use crate::error::{Result, SolitonError};

/// Dimension and Chern ratio of the line bundle, with the two structure
/// constants the soliton ODE depends on.
///
/// `d` is the real dimension of the Kähler-Einstein base and `q` the ratio
/// `c₁(E) = q·c₁(B)`. The bundle enters the equations only through
/// `A₂ = d(d+2)` and `A₃ = d(d+2)²q²/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonParams {
    d: u32,
    q: f64,
    a2: f64,
    a3: f64,
}

impl SolitonParams {
    pub fn new(d: u32, q: f64) -> Result<Self> {
        if d < 2 {
            return Err(SolitonError::InvalidParams(format!(
                "base dimension d = {d} must be at least 2"
            )));
        }
        if d % 2 != 0 {
            return Err(SolitonError::InvalidParams(format!(
                "base dimension d = {d} is odd; a Kähler base has even real dimension"
            )));
        }
        if !q.is_finite() {
            return Err(SolitonError::InvalidParams(format!(
                "q = {q} is not finite"
            )));
        }
        if q == 0.0 {
            return Err(SolitonError::InvalidParams(
                "q = 0 is the trivial-bundle (Ivey) case, which is out of scope".into(),
            ));
        }
        let df = f64::from(d);
        Ok(Self {
            d,
            q,
            a2: df * (df + 2.0),
            a3: 0.25 * df * (df + 2.0) * (df + 2.0) * q * q,
        })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    /// `d` as a float, for use inside the polynomials.
    pub fn df(&self) -> f64 {
        f64::from(self.d)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn a2(&self) -> f64 {
        self.a2
    }

    pub fn a3(&self) -> f64 {
        self.a3
    }

    /// Limit of `X/Y²` along the germ, `A₂/(2d)`.
    pub fn x_over_y2_limit(&self) -> f64 {
        self.a2 / (2.0 * self.df())
    }

    /// Upper bound `A₂/(A₃(d+2))` on `W²/Y²` in the complete regime.
    pub fn w_bound(&self) -> f64 {
        self.a2 / (self.a3 * (self.df() + 2.0))
    }
}

pub fn make_params(d: u32, q: f64) -> Result<SolitonParams> {
    SolitonParams::new(d, q)
}

/// Constants attached to one member of the soliton family.
///
/// `c` is the maximum scalar curvature 𝒞, `lambda` is `λ = g(0)`, and
/// `big_lambda = 𝒞λ²` is the homothety invariant that labels the family
/// member. `gamma = (Λ + A₂)/2` is the limit of `(1 - Z)/Y²` at the zero
/// section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstIntegralContext {
    pub c: f64,
    pub lambda: f64,
    pub big_lambda: f64,
    pub gamma: f64,
}

impl FirstIntegralContext {
    pub fn new(params: &SolitonParams, big_lambda: f64, lambda: f64) -> Result<Self> {
        if !(big_lambda > 0.0 && big_lambda.is_finite()) {
            return Err(SolitonError::InvalidParams(format!(
                "Lambda = {big_lambda} must be positive and finite"
            )));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(SolitonError::InvalidParams(format!(
                "lambda = {lambda} must be positive and finite"
            )));
        }
        Ok(Self {
            c: big_lambda / (lambda * lambda),
            lambda,
            big_lambda,
            gamma: 0.5 * (big_lambda + params.a2()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_constants() {
        let p = make_params(2, -1.0).unwrap();
        assert_eq!((p.a2(), p.a3()), (8.0, 8.0));
        let p = make_params(2, -2.0).unwrap();
        assert_eq!((p.a2(), p.a3()), (8.0, 32.0));
        let p = make_params(4, -1.0).unwrap();
        assert_eq!((p.a2(), p.a3()), (24.0, 36.0));
    }

    #[test]
    fn rejects_bad_dimensions_and_trivial_bundle() {
        assert!(make_params(0, -1.0).is_err());
        assert!(make_params(3, -1.0).is_err());
        let err = make_params(2, 0.0).unwrap_err().to_string();
        assert!(err.contains("Ivey"), "{err}");
        assert!(make_params(2, f64::NAN).is_err());
    }

    #[test]
    fn context_identities() {
        let p = make_params(2, -1.0).unwrap();
        let ctx = FirstIntegralContext::new(&p, 40.0, 2.0).unwrap();
        assert_eq!(ctx.c, 10.0);
        assert_eq!(ctx.c * ctx.lambda * ctx.lambda, ctx.big_lambda);
        assert_eq!(ctx.gamma, 24.0);
        assert!(FirstIntegralContext::new(&p, -1.0, 1.0).is_err());
        assert!(FirstIntegralContext::new(&p, 1.0, 0.0).is_err());
    }

    #[test]
    fn w_bound_value() {
        let p = make_params(2, -1.0).unwrap();
        assert_eq!(p.w_bound(), 0.25);
    }
}
