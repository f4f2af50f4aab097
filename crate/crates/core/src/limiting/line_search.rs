//! One-dimensional searches for the largest admissible `ℓ ∈ [0, ℓmax]`.
//!
//! All searches assume the admissible set along the line is an interval
//! containing `0`, which is what quasiconcavity of the constraint gives.

use crate::state::State;

/// Largest `ℓ ≤ ℓmax` with `w · (u + ℓ p) ≥ bound`, assuming it holds at 0.
pub fn line_search_linear(weights: &State, u: &State, p: &State, bound: f64, lmax: f64) -> f64 {
    let slope = weights.dot(p);
    if slope >= 0.0 {
        return lmax;
    }
    let room = (weights.dot(u) - bound).max(0.0);
    (room / -slope).min(lmax)
}

/// `c < 0`: the search started outside the admissible set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartsOutside(pub f64);

/// `min(smallest positive root of a ℓ² + b ℓ + c, ℓmax)`.
pub fn line_search_quadratic(coeffs: [f64; 3], lmax: f64) -> Result<f64, StartsOutside> {
    let [a, b, c] = coeffs;
    if c < 0.0 {
        return Err(StartsOutside(c));
    }
    let root = smallest_positive_root(a, b, c).unwrap_or(f64::INFINITY);
    let mut ell = root.min(lmax).max(0.0);
    // The root itself can round to a slightly negative value of g.
    let g = |l: f64| (a * l + b) * l + c;
    let mut shrink = 0;
    while ell > 0.0 && g(ell) < 0.0 && shrink < 8 {
        ell *= 1.0 - 4.0 * f64::EPSILON * (1 << shrink) as f64;
        shrink += 1;
    }
    Ok(ell)
}

fn smallest_positive_root(a: f64, b: f64, c: f64) -> Option<f64> {
    if c == 0.0 {
        // g(0) = 0: admissible only while g grows.
        return if b < 0.0 || (b == 0.0 && a < 0.0) { Some(0.0) } else { positive_root_of_linear(a, b) };
    }
    if a == 0.0 {
        return if b < 0.0 { Some(-c / b) } else { None };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sign = if b >= 0.0 { 1.0 } else { -1.0 };
    let q = -0.5 * (b + sign * disc.sqrt());
    let roots = [q / a, if q != 0.0 { c / q } else { f64::INFINITY }];
    roots.into_iter().filter(|r| *r > 0.0).fold(None, |best, r| Some(best.map_or(r, |b: f64| b.min(r))))
}

/// Roots of `ℓ (a ℓ + b)` beyond zero.
fn positive_root_of_linear(a: f64, b: f64) -> Option<f64> {
    if a < 0.0 && b > 0.0 {
        Some(-b / a)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecantResult {
    pub ell: f64,
    pub iterations: usize,
}

/// Newton-secant bracketing for a concave `g` with `g(0) > 0 > g(ℓr)`.
///
/// The left (secant) iterate never crosses the root, so `g(ℓ) ≥ 0` holds
/// for the returned value whatever the tolerance. `g` returns the value and
/// the derivative.
pub fn newton_secant(g: impl Fn(f64) -> (f64, f64), right: f64, tol: f64, kmax: usize) -> SecantResult {
    let (mut l, mut r) = (0.0, right);
    let (mut gl, _) = g(l);
    let (mut gr, mut dgr) = g(r);
    let mut k = 0;
    while k < kmax && r - l > tol {
        k += 1;
        if gl <= gr {
            break;
        }
        let secant = l - gl * (r - l) / (gr - gl);
        let (value, _) = g(secant);
        if !(secant > l && secant < r) {
            break;
        }
        if value < 0.0 {
            // Rounding put the secant iterate past the root. It still
            // brackets from the right, and a few ulps back is admissible.
            (r, (gr, dgr)) = (secant, g(secant));
            if let Some((back, value)) = nudge_back(&g, secant, l) {
                (l, gl) = (back, value);
            }
            continue;
        }
        (l, gl) = (secant, value);
        if dgr >= 0.0 {
            break;
        }
        let newton = r - gr / dgr;
        if newton <= l {
            break;
        }
        (gr, dgr) = g(newton);
        r = newton;
        if gr >= 0.0 {
            // Newton landed on the admissible side by rounding.
            l = r;
            break;
        }
    }
    SecantResult { ell: l, iterations: k }
}

fn nudge_back(g: &impl Fn(f64) -> (f64, f64), x: f64, floor: f64) -> Option<(f64, f64)> {
    let mut step = 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE);
    for _ in 0..16 {
        let candidate = x - step;
        if candidate <= floor {
            return None;
        }
        let (value, _) = g(candidate);
        if value >= 0.0 {
            return Some((candidate, value));
        }
        step *= 2.0;
    }
    None
}

/// Bisection on the sign of `margin`, returning the admissible lower end.
pub fn bisection(margin: impl Fn(f64) -> bool, lmax: f64, tol: f64) -> f64 {
    if margin(lmax) {
        return lmax;
    }
    let (mut lo, mut hi) = (0.0, lmax);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if margin(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_cases() {
        let w = State::scalar(1.0);
        let u = State::scalar(1.0);
        assert!((line_search_linear(&w, &u, &State::scalar(-1.0), 0.25, 1.0) - 0.75).abs() < 1e-15);
        assert_eq!(line_search_linear(&w, &u, &State::scalar(2.0), 0.25, 1.0), 1.0);
        assert_eq!(line_search_linear(&w, &State::scalar(0.25), &State::scalar(-1.0), 0.25, 1.0), 0.0);
    }

    #[test]
    fn quadratic_cases() {
        // ρ ε along (1,0,1) + ℓ (0,2,0) with ε^min = 0.5: g = 0.5 - 2ℓ².
        let ell = line_search_quadratic([-2.0, 0.0, 0.5], 1.0).unwrap();
        assert!((ell - 0.5).abs() < 1e-15);
        assert_eq!(line_search_quadratic([0.0, 0.0, 1.0], 0.7).unwrap(), 0.7);
        assert_eq!(line_search_quadratic([-1.0, 0.0, 4.0], 0.3).unwrap(), 0.3);
        assert!(line_search_quadratic([1.0, 1.0, -1e-3], 1.0).is_err());
        // Convex with both roots positive: stop at the first one.
        let ell = line_search_quadratic([1.0, -3.0, 2.0], 5.0).unwrap();
        assert!((ell - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_is_safe_on_the_whole_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..2000 {
            let a = rng.gen_range(-5.0..5.0);
            let b = rng.gen_range(-5.0..5.0);
            let c = rng.gen_range(0.0..2.0);
            let ell = line_search_quadratic([a, b, c], 1.0).unwrap();
            for s in 0..=100 {
                let l = ell * s as f64 / 100.0;
                assert!((a * l + b) * l + c >= -1e-14 * (a.abs() + b.abs() + c));
            }
        }
    }

    #[test]
    fn newton_secant_on_known_roots() {
        let res = newton_secant(|l| (1.0 - l * l, -2.0 * l), 2.0, 1e-10, 20);
        assert!(res.ell <= 1.0 && 1.0 - res.ell < 1e-10);
        let affine = newton_secant(|l| (0.5 - l, -1.0), 1.0, 1e-10, 20);
        assert_eq!(affine.ell, 0.5);
        assert_eq!(affine.iterations, 1);
    }

    #[test]
    fn bisection_brackets_from_below() {
        let ell = bisection(|l| l <= 0.3, 1.0, 1e-12);
        assert!(ell <= 0.3 && 0.3 - ell < 1e-12);
        assert_eq!(bisection(|_| true, 0.4, 1e-12), 0.4);
    }
}
