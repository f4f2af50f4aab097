//! Exact Riemann solutions used as reference oracles.
//!
//! These are written from the textbook wave curves and share no code with
//! the wave-speed bounds of the system models.

/// Self-similar Burgers solution `u(ξ)`, `ξ = x / t`.
pub fn burgers_riemann(ul: f64, ur: f64, xi: f64) -> f64 {
    if ul > ur {
        let s = 0.5 * (ul + ur);
        if xi < s {
            ul
        } else {
            ur
        }
    } else if xi <= ul {
        ul
    } else if xi >= ur {
        ur
    } else {
        xi
    }
}

/// Positions (in `ξ`) where the Burgers fan is not smooth.
pub fn burgers_fan_edges(ul: f64, ur: f64) -> Vec<f64> {
    if ul > ur {
        vec![0.5 * (ul + ur)]
    } else {
        vec![ul, ur]
    }
}

pub(crate) const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
pub(crate) const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Mean of `f` over `[a, b]`, with composite Gauss rules on the pieces
/// delimited by `breaks`.
pub fn fan_average(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64]) -> f64 {
    let mut points = vec![a];
    points.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    points.push(b);
    points.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in points.windows(2) {
        let pieces = 16;
        let h = (w[1] - w[0]) / pieces as f64;
        for p in 0..pieces {
            let mid = w[0] + (p as f64 + 0.5) * h;
            for (node, weight) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                total += 0.5 * h * weight * f(mid + 0.5 * h * node);
            }
        }
    }
    total / (b - a)
}

/// Root of an increasing function on `[lo, hi]` with `F(lo) < 0 < F(hi)`,
/// by Newton steps safeguarded with bisection.
fn increasing_root(f: impl Fn(f64) -> (f64, f64), mut lo: f64, mut hi: f64) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (value, slope) = f(x);
        if value == 0.0 {
            return x;
        }
        if value < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - value / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 1e-15 * x.abs().max(f64::MIN_POSITIVE) || hi - lo <= 1e-15 * hi {
            return next;
        }
        x = next;
    }
    x
}

/// Exact solution of the 1D Euler Riemann problem with covolume `b`.
#[derive(Debug, Clone)]
pub struct EulerRiemann {
    pub gamma: f64,
    pub covolume: f64,
    /// `(ρ, v, p)` on each side.
    pub left: [f64; 3],
    pub right: [f64; 3],
    pub p_star: f64,
    pub v_star: f64,
}

impl EulerRiemann {
    fn sound(&self, w: &[f64; 3]) -> f64 {
        (self.gamma * w[2] / (w[0] * (1.0 - self.covolume * w[0]))).sqrt()
    }

    /// Wave curve `f_K(p)` and its derivative.
    fn wave(&self, w: &[f64; 3], p: f64) -> (f64, f64) {
        let g = self.gamma;
        let x = 1.0 - self.covolume * w[0];
        if p > w[2] {
            let a = 2.0 * x / ((g + 1.0) * w[0]);
            let b = (g - 1.0) / (g + 1.0) * w[2];
            let root = (a / (p + b)).sqrt();
            (((p - w[2]) * root), root * (1.0 - 0.5 * (p - w[2]) / (p + b)))
        } else {
            let c = self.sound(w);
            let z = (g - 1.0) / (2.0 * g);
            let ratio = p / w[2];
            (2.0 * c * x / (g - 1.0) * (ratio.powf(z) - 1.0), c * x / (g * w[2]) * ratio.powf(-(g + 1.0) / (2.0 * g)))
        }
    }

    pub fn solve(gamma: f64, covolume: f64, left: [f64; 3], right: [f64; 3]) -> Result<Self, String> {
        let mut s = EulerRiemann { gamma, covolume, left, right, p_star: 0.0, v_star: 0.0 };
        let dv = right[1] - left[1];
        let (cl, cr) = (s.sound(&left), s.sound(&right));
        let (xl, xr) = (1.0 - covolume * left[0], 1.0 - covolume * right[0]);
        if dv >= 2.0 * (cl * xl + cr * xr) / (gamma - 1.0) {
            return Err("data generate vacuum".into());
        }
        let pressure = |p: f64| {
            let (fl, dl) = s.wave(&left, p);
            let (fr, dr) = s.wave(&right, p);
            (fl + fr + dv, dl + dr)
        };
        let mut hi = left[2].max(right[2]);
        while pressure(hi).0 < 0.0 {
            hi *= 2.0;
        }
        let p = increasing_root(pressure, 0.0, hi);
        let (fl, _) = s.wave(&left, p);
        let (fr, _) = s.wave(&right, p);
        s.p_star = p;
        s.v_star = 0.5 * (left[1] + right[1]) + 0.5 * (fr - fl);
        Ok(s)
    }

    /// `|f_L(p*) + f_R(p*) + Δv|`, relative to the velocity scale.
    pub fn pressure_residual(&self) -> f64 {
        let (fl, _) = self.wave(&self.left, self.p_star);
        let (fr, _) = self.wave(&self.right, self.p_star);
        let scale = self.sound(&self.left) + self.sound(&self.right) + self.left[1].abs() + self.right[1].abs();
        (fl + fr + self.right[1] - self.left[1]).abs() / scale
    }

    fn shock_mass_flux(&self, w: &[f64; 3]) -> f64 {
        let g = self.gamma;
        let a = 2.0 * (1.0 - self.covolume * w[0]) / ((g + 1.0) * w[0]);
        let b = (g - 1.0) / (g + 1.0) * w[2];
        ((self.p_star + b) / a).sqrt()
    }

    /// Leftmost and rightmost signal speeds.
    pub fn fan_edges(&self) -> (f64, f64) {
        let left = if self.p_star > self.left[2] {
            self.left[1] - self.shock_mass_flux(&self.left) / self.left[0]
        } else {
            self.left[1] - self.sound(&self.left)
        };
        let right = if self.p_star > self.right[2] {
            self.right[1] + self.shock_mass_flux(&self.right) / self.right[0]
        } else {
            self.right[1] + self.sound(&self.right)
        };
        (left, right)
    }

    pub fn max_speed(&self) -> f64 {
        let (l, r) = self.fan_edges();
        l.abs().max(r.abs())
    }

    /// `(ρ, v, p)` at `ξ = x / t`. Only the ideal-gas (`b = 0`) fan interior is
    /// available in closed form.
    pub fn sample(&self, xi: f64) -> Option<[f64; 3]> {
        if self.covolume != 0.0 {
            return None;
        }
        let g = self.gamma;
        let mu = (g - 1.0) / (g + 1.0);
        let on_left = xi < self.v_star;
        let (w, sign) = if on_left { (self.left, -1.0) } else { (self.right, 1.0) };
        let c = self.sound(&w);
        let ratio = self.p_star / w[2];
        if self.p_star > w[2] {
            let speed = w[1] + sign * self.shock_mass_flux(&w) / w[0];
            let outside = if on_left { xi < speed } else { xi > speed };
            if outside {
                return Some(w);
            }
            let rho = w[0] * (ratio + mu) / (mu * ratio + 1.0);
            Some([rho, self.v_star, self.p_star])
        } else {
            let head = w[1] + sign * c;
            let c_star = c * ratio.powf((g - 1.0) / (2.0 * g));
            let tail = self.v_star + sign * c_star;
            let outside = if on_left { xi < head } else { xi > head };
            let inside_star = if on_left { xi > tail } else { xi < tail };
            if outside {
                Some(w)
            } else if inside_star {
                Some([w[0] * ratio.powf(1.0 / g), self.v_star, self.p_star])
            } else {
                // u ∓ c is linear in ξ inside the fan.
                let v = 2.0 / (g + 1.0) * (-sign * c + 0.5 * (g - 1.0) * w[1] + xi);
                let cf = 2.0 / (g + 1.0) * (c - sign * 0.5 * (g - 1.0) * (w[1] - xi));
                let rho = w[0] * (cf / c).powf(2.0 / (g - 1.0));
                Some([rho, v, w[2] * (cf / c).powf(2.0 * g / (g - 1.0))])
            }
        }
    }
}

/// Exact solution of the 1D shallow-water Riemann problem (wet bed).
#[derive(Debug, Clone)]
pub struct ShallowWaterRiemann {
    pub gravity: f64,
    /// `(h, v)` on each side.
    pub left: [f64; 2],
    pub right: [f64; 2],
    pub h_star: f64,
    pub v_star: f64,
}

impl ShallowWaterRiemann {
    fn wave(&self, w: &[f64; 2], h: f64) -> (f64, f64) {
        let g = self.gravity;
        if h > w[0] {
            let k = (0.5 * g * (h + w[0]) / (h * w[0])).sqrt();
            let dk = 0.5 / k * 0.5 * g * (-1.0 / (h * h));
            ((h - w[0]) * k, k + (h - w[0]) * dk)
        } else {
            (2.0 * ((g * h).sqrt() - (g * w[0]).sqrt()), (g / h).sqrt())
        }
    }

    pub fn solve(gravity: f64, hl: f64, vl: f64, hr: f64, vr: f64) -> Result<Self, String> {
        let mut s = ShallowWaterRiemann { gravity, left: [hl, vl], right: [hr, vr], h_star: 0.0, v_star: 0.0 };
        let dv = vr - vl;
        if dv >= 2.0 * ((gravity * hl).sqrt() + (gravity * hr).sqrt()) {
            return Err("data generate a dry bed".into());
        }
        let height = |h: f64| {
            let (fl, dl) = s.wave(&s.left, h);
            let (fr, dr) = s.wave(&s.right, h);
            (fl + fr + dv, dl + dr)
        };
        let mut hi = hl.max(hr);
        while height(hi).0 < 0.0 {
            hi *= 2.0;
        }
        let h = increasing_root(height, 0.0, hi);
        let (fl, _) = s.wave(&s.left, h);
        let (fr, _) = s.wave(&s.right, h);
        s.h_star = h;
        s.v_star = 0.5 * (vl + vr) + 0.5 * (fr - fl);
        Ok(s)
    }

    fn edge(&self, w: &[f64; 2], sign: f64) -> f64 {
        let g = self.gravity;
        if self.h_star > w[0] {
            w[1] + sign * (0.5 * g * self.h_star * (self.h_star + w[0]) / w[0]).sqrt()
        } else {
            w[1] + sign * (g * w[0]).sqrt()
        }
    }

    pub fn max_speed(&self) -> f64 {
        self.edge(&self.left, -1.0).abs().max(self.edge(&self.right, 1.0).abs())
    }

    /// `(h, v)` at `ξ = x / t`.
    pub fn sample(&self, xi: f64) -> [f64; 2] {
        let g = self.gravity;
        let on_left = xi < self.v_star;
        let (w, sign) = if on_left { (self.left, -1.0) } else { (self.right, 1.0) };
        let head = self.edge(&w, sign);
        let outside = if on_left { xi < head } else { xi > head };
        if outside {
            return w;
        }
        if self.h_star > w[0] {
            return [self.h_star, self.v_star];
        }
        let tail = self.v_star + sign * (g * self.h_star).sqrt();
        let inside_star = if on_left { xi > tail } else { xi < tail };
        if inside_star {
            return [self.h_star, self.v_star];
        }
        // Riemann invariant v ± 2c is constant across the fan and v ∓ c = ξ.
        let invariant = w[1] - sign * 2.0 * (g * w[0]).sqrt();
        let c = sign * (xi - invariant) / 3.0;
        [c * c / g, xi - sign * c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euler_flux(gamma: f64, w: [f64; 3]) -> [f64; 3] {
        let e = w[2] / (gamma - 1.0) + 0.5 * w[0] * w[1] * w[1];
        [w[0] * w[1], w[0] * w[1] * w[1] + w[2], w[1] * (e + w[2])]
    }

    fn euler_conserved(gamma: f64, w: [f64; 3]) -> [f64; 3] {
        [w[0], w[0] * w[1], w[2] / (gamma - 1.0) + 0.5 * w[0] * w[1] * w[1]]
    }

    #[test]
    fn sod_reference_values() {
        let s = EulerRiemann::solve(1.4, 0.0, [1.0, 0.0, 1.0], [0.125, 0.0, 0.1]).unwrap();
        assert!((s.p_star - 0.303_130_178).abs() < 1e-8);
        assert!((s.v_star - 0.927_452_620).abs() < 1e-8);
        assert!(s.pressure_residual() < 1e-12);
        // Shock on the right, rarefaction head on the left.
        let (l, r) = s.fan_edges();
        assert!((l + 1.183_215_957).abs() < 1e-8 && r > 1.75 && r < 1.76);
    }

    #[test]
    fn equal_states_are_constant() {
        let w = [0.8, 0.3, 1.2];
        let s = EulerRiemann::solve(1.4, 0.0, w, w).unwrap();
        let c = (1.4 * 1.2 / 0.8f64).sqrt();
        assert!((s.max_speed() - (0.3 + c)).abs() < 1e-12);
        for xi in [-2.0, 0.0, 0.3, 2.0] {
            let u = s.sample(xi).unwrap();
            assert!((u[0] - w[0]).abs() < 1e-12 && (u[2] - w[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn colliding_flows_stop_in_the_middle() {
        let s = EulerRiemann::solve(1.4, 0.0, [1.0, 2.0, 1.0], [1.0, -2.0, 1.0]).unwrap();
        assert!(s.v_star.abs() < 1e-14);
    }

    #[test]
    fn shocks_satisfy_rankine_hugoniot() {
        let g = 1.4;
        let s = EulerRiemann::solve(g, 0.0, [1.0, 0.0, 1.0], [0.125, 0.0, 0.1]).unwrap();
        let (_, speed) = s.fan_edges();
        let ahead = s.sample(speed + 1e-9).unwrap();
        let behind = s.sample(speed - 1e-9).unwrap();
        let (fa, fb) = (euler_flux(g, ahead), euler_flux(g, behind));
        let (ua, ub) = (euler_conserved(g, ahead), euler_conserved(g, behind));
        for k in 0..3 {
            let residual = (fa[k] - fb[k]) - speed * (ua[k] - ub[k]);
            assert!(residual.abs() < 1e-10, "component {k}: {residual}");
        }
    }

    #[test]
    fn rarefaction_is_isentropic_and_continuous() {
        let g = 1.4;
        let s = EulerRiemann::solve(g, 0.0, [1.0, 0.0, 1.0], [0.125, 0.0, 0.1]).unwrap();
        let (head, _) = s.fan_edges();
        let tail = s.v_star - (g * s.p_star / (s.left[0] * (s.p_star / 1.0f64).powf(1.0 / g))).sqrt();
        for k in 0..=10 {
            let xi = head + (tail - head) * k as f64 / 10.0;
            let w = s.sample(xi).unwrap();
            assert!((w[2] / w[0].powf(g) - 1.0).abs() < 1e-10);
            let c = (g * w[2] / w[0]).sqrt();
            assert!((w[1] + 2.0 * c / (g - 1.0) - 2.0 * (g).sqrt() / (g - 1.0)).abs() < 1e-10);
            assert!((w[1] - c - xi).abs() < 1e-10);
        }
    }

    #[test]
    fn vacuum_is_reported() {
        assert!(EulerRiemann::solve(1.4, 0.0, [1.0, -10.0, 1.0], [1.0, 10.0, 1.0]).is_err());
        assert!(ShallowWaterRiemann::solve(9.81, 1.0, -10.0, 1.0, 10.0).is_err());
    }

    #[test]
    fn dam_break_conserves_across_jumps() {
        let g = 9.81;
        let s = ShallowWaterRiemann::solve(g, 2.0, 0.0, 1.0, 0.0).unwrap();
        let speed = s.edge(&s.right, 1.0);
        let a = s.sample(speed + 1e-9);
        let b = s.sample(speed - 1e-9);
        let mass = (a[0] * a[1] - b[0] * b[1]) - speed * (a[0] - b[0]);
        let momentum = (a[0] * a[1] * a[1] + 0.5 * g * a[0] * a[0] - b[0] * b[1] * b[1] - 0.5 * g * b[0] * b[0])
            - speed * (a[0] * a[1] - b[0] * b[1]);
        assert!(mass.abs() < 1e-10 && momentum.abs() < 1e-10);
        // Fan edge continuity on the left.
        let head = -(g * 2.0f64).sqrt();
        let w = s.sample(head + 1e-12);
        assert!((w[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn fan_average_of_a_step() {
        let avg = fan_average(|x| if x < 0.1 { 1.0 } else { 0.0 }, -0.5, 0.5, &[0.1]);
        assert!((avg - 0.6).abs() < 1e-14);
    }
}
