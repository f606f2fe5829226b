//! Gamma-family special functions.
//!
//! `ln_gamma` and `digamma` come from `statrs`; the polygamma functions of
//! order one and two use upward recurrence into the asymptotic expansion.

pub use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

const ASYMPTOTIC_FROM: f64 = 10.0;

/// First derivative of the digamma function, ψ′(x), for x > 0.
pub fn trigamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < ASYMPTOTIC_FROM {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli-number tail: B2k / x^(2k+1)
    let tail = inv2
        * (1.0 / 6.0
            + inv2
                * (-1.0 / 30.0
                    + inv2
                        * (1.0 / 42.0
                            + inv2
                                * (-1.0 / 30.0
                                    + inv2 * (5.0 / 66.0 + inv2 * (-691.0 / 2730.0 + inv2 * 7.0 / 6.0))))));
    acc + inv + 0.5 * inv2 + inv * tail
}

/// Second derivative of the digamma function, ψ″(x), for x > 0.
pub fn tetragamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < ASYMPTOTIC_FROM {
        acc -= 2.0 / (x * x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let tail = inv2
        * (-0.5
            + inv2
                * (1.0 / 6.0
                    + inv2
                        * (-1.0 / 6.0
                            + inv2
                                * (3.0 / 10.0
                                    + inv2 * (-5.0 / 6.0 + inv2 * (691.0 / 210.0 - inv2 * 35.0 / 2.0))))));
    acc - inv2 - inv2 * inv + inv2 * tail
}

/// Solves ψ′(a) = target for a > 0.
///
/// Newton's method on 1/ψ′(a), which is close to linear in a, started at
/// a₀ = 1/target + 1/2.
pub fn inverse_trigamma(target: f64) -> Result<f64> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::Numerical(format!(
            "inverse trigamma needs a positive finite argument, got {target}"
        )));
    }
    let mut a = 1.0 / target + 0.5;
    for _ in 0..100 {
        let tri = trigamma(a);
        let step = tri * (1.0 - tri / target) / tetragamma(a);
        let mut next = a + step;
        if next <= 0.0 {
            next = 0.5 * a;
        }
        let delta = (next - a).abs();
        a = next;
        if delta <= 1e-12 * a {
            return Ok(a);
        }
    }
    Err(Error::Numerical(format!(
        "inverse trigamma failed to converge for target {target}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    // (x, lnΓ, ψ, ψ′, ψ″) at 30 significant digits.
    const REFERENCE: &[(f64, f64, f64, f64, f64)] = &[
        (0.001, 6.90717888538385366168368145865, -1000.57557193181027965475671066, 1000001.64253319582734466950415, -2000000002.39763216483324031505),
        (0.1, 2.2527126517342059020062379569, -10.4237549404110762321002953145, 101.433299150792747704652039651, -2001.86145737834367322205083003),
        (0.5, 0.572364942924700087071713675677, -1.963510026021423479440976333, 4.93480220054467930941724549994, -16.8287966442343199955963342612),
        (1.0, 0.0, -0.577215664901532860606512090082, 1.64493406684822643647241516665, -2.40411380631918857079947632302),
        (1.5, -0.120782237635245222345518445782, 0.0364899739785765205590236670012, 0.934802200544679309417245499938, -0.82879664423431999559633426116),
        (2.0, 0.0, 0.422784335098467139393487909918, 0.644934066848226436472415166646, -0.404113806319188570799476323023),
        (3.7, 1.42807232666538812920049835255, 1.16715353936151144094765086066, 0.310037857670038302158248387453, -0.0953953087285540334827211089971),
        (10.0, 12.8018274800814696112077178746, 2.25175258906672110764745616389, 0.105166335681685746122201006908, -0.0110498349708020674621037490668),
        (25.3, 55.7461811835845923336454156382, 3.21091138018253588317620924566, 0.0403171203412564960172770676602, -0.00162525023933959475613669451009),
        (89.0, 309.164193580146921944866777487, 4.48300787177969180713386787278, 0.011299314810238213614635943874, -0.000127673156892205068513685722438),
        (150.5, 602.513954870585411950737877831, 5.01063714593370464716075559716, 0.00666664197569271626797977436187, -0.0000444439506300862470668025122862),
    ];

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn matches_high_precision_reference() {
        for &(x, lg, dg, tg, qg) in REFERENCE {
            assert!(close(ln_gamma(x), lg, 1e-13), "lnΓ({x})");
            assert!(close(digamma(x), dg, 1e-13), "ψ({x})");
            assert!(close(trigamma(x), tg, 1e-13), "ψ′({x}) = {}", trigamma(x));
            assert!(close(tetragamma(x), qg, 1e-12), "ψ″({x}) = {}", tetragamma(x));
        }
    }

    #[test]
    fn inverse_trigamma_round_trips() {
        for &s in &[1e-12, 1e-6, 0.01125, 0.5, 1.0, std::f64::consts::PI.powi(2) / 6.0, 10.0, 1e3, 1e6] {
            let a = inverse_trigamma(s).unwrap();
            assert!(((trigamma(a) - s) / s).abs() < 1e-10, "target {s}: a = {a}");
        }
        let a = inverse_trigamma(std::f64::consts::PI.powi(2) / 6.0).unwrap();
        assert!((a - 1.0).abs() < 1e-10);
    }

    #[test]
    fn inverse_trigamma_rejects_bad_input() {
        assert!(inverse_trigamma(0.0).is_err());
        assert!(inverse_trigamma(-1.0).is_err());
        assert!(inverse_trigamma(f64::NAN).is_err());
    }
}
