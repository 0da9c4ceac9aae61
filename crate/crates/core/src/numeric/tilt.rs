//! The one-dimensional exponential tilt `t ↦ exp(a·t + b·t²)` on [0, 1].
//!
//! With `b = 0` everything has a closed form. Otherwise the density is
//! integrated by composite Gauss–Legendre over the window where the exponent
//! is within `WINDOW` of its maximum; the rest of [0, 1] carries relative mass
//! below `exp(-WINDOW)` and is dropped.

use super::quad::gl24;

const WINDOW: f64 = 80.0;
const PANELS_PER_PIECE: usize = 16;
const SERIES_CUTOFF: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Tilt {
    a: f64,
    b: f64,
    panels: Option<Panels>,
}

#[derive(Debug, Clone, PartialEq)]
struct Panels {
    shift: f64,
    center: f64,
    edges: Vec<(f64, f64)>,
    cum: Vec<f64>,
    // E[(t - center)^k] for k = 1..4
    smom: [f64; 4],
}

impl Tilt {
    /// Closed form when `b == 0`, quadrature otherwise.
    pub fn new(a: f64, b: f64) -> Self {
        if b == 0.0 {
            Tilt { a, b, panels: None }
        } else {
            Self::numeric(a, b)
        }
    }

    /// Always build the quadrature tables (needed for third and fourth moments).
    pub fn numeric(a: f64, b: f64) -> Self {
        Tilt {
            a,
            b,
            panels: Some(Panels::build(a, b)),
        }
    }

    pub fn linear(&self) -> f64 {
        self.a
    }

    pub fn quadratic(&self) -> f64 {
        self.b
    }

    fn phi(&self, t: f64) -> f64 {
        self.a * t + self.b * t * t
    }

    /// `log ∫₀¹ exp(a t + b t²) dt`.
    pub fn log_norm(&self) -> f64 {
        match &self.panels {
            None => one_log_norm(self.a),
            Some(p) => p.shift + p.total().ln(),
        }
    }

    pub fn log_density(&self, t: f64) -> f64 {
        self.phi(t) - self.log_norm()
    }

    pub fn density(&self, t: f64) -> f64 {
        self.log_density(t).exp()
    }

    pub fn mean(&self) -> f64 {
        match &self.panels {
            None => one_mean(self.a),
            Some(p) => p.center + p.smom[0],
        }
    }

    pub fn var(&self) -> f64 {
        match &self.panels {
            None => one_var(self.a),
            Some(p) => p.smom[1] - p.smom[0] * p.smom[0],
        }
    }

    /// Mean of `(t, t²)` and their 2×2 covariance `[[var t, cov], [cov, var t²]]`.
    pub fn quad_stats(&self) -> ([f64; 2], [[f64; 2]; 2]) {
        let owned;
        let p = match &self.panels {
            Some(p) => p,
            None => {
                owned = Panels::build(self.a, self.b);
                &owned
            }
        };
        let c = p.center;
        let [s1, s2, s3, s4] = p.smom;
        let var_s = s2 - s1 * s1;
        let cov_s = s3 - s1 * s2;
        let var_s2 = s4 - s2 * s2;
        let mean = [c + s1, c * c + 2.0 * c * s1 + s2];
        let cov12 = cov_s + 2.0 * c * var_s;
        let var2 = var_s2 + 4.0 * c * cov_s + 4.0 * c * c * var_s;
        (mean, [[var_s, cov12], [cov12, var2]])
    }

    /// Distribution function on [0, 1].
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match &self.panels {
            None => one_mass(self.a, 0.0, x),
            Some(p) => p.scaled_cdf(self, x) / p.total(),
        }
    }

    /// Mass of [u, v] ∩ [0, 1].
    pub fn mass(&self, u: f64, v: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let v = v.clamp(0.0, 1.0);
        if v <= u {
            return 0.0;
        }
        match &self.panels {
            None => one_mass(self.a, u, v),
            Some(p) => ((p.scaled_cdf(self, v) - p.scaled_cdf(self, u)) / p.total()).max(0.0),
        }
    }

    /// `log` of [`Tilt::mass`], accurate for small masses when `b == 0`.
    pub fn log_mass(&self, u: f64, v: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let v = v.clamp(0.0, 1.0);
        if v <= u {
            return f64::NEG_INFINITY;
        }
        match &self.panels {
            None => one_log_mass(self.a, u, v),
            Some(_) => self.mass(u, v).ln(),
        }
    }

    /// Inverse distribution function.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match &self.panels {
            None => one_quantile(self.a, u),
            Some(p) => p.quantile(self, u),
        }
    }
}

impl Panels {
    fn build(a: f64, b: f64) -> Self {
        let phi = |t: f64| a * t + b * t * t;
        let mut pts = vec![0.0, 1.0];
        if b != 0.0 {
            let v = -a / (2.0 * b);
            if v > 0.0 && v < 1.0 {
                pts.push(v);
            }
        }
        let shift = pts
            .iter()
            .map(|&t| phi(t))
            .fold(f64::NEG_INFINITY, f64::max);
        let level = shift - WINDOW;
        // roots of b t² + a t - level = 0
        if b == 0.0 {
            if a != 0.0 {
                pts.push(level / a);
            }
        } else {
            let disc = a * a + 4.0 * b * level;
            if disc >= 0.0 {
                let s = disc.sqrt();
                pts.push((-a + s) / (2.0 * b));
                pts.push((-a - s) / (2.0 * b));
            }
        }
        pts.retain(|t| (0.0..=1.0).contains(t));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut edges = Vec::new();
        for w in pts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi - lo <= 0.0 || phi(0.5 * (lo + hi)) < level {
                continue;
            }
            let h = (hi - lo) / PANELS_PER_PIECE as f64;
            for k in 0..PANELS_PER_PIECE {
                let e = if k + 1 == PANELS_PER_PIECE {
                    hi
                } else {
                    lo + h * (k + 1) as f64
                };
                edges.push((lo + h * k as f64, e));
            }
        }
        let center = pts
            .iter()
            .copied()
            .max_by(|x, y| phi(*x).total_cmp(&phi(*y)))
            .unwrap_or(0.5);
        let mut cum = Vec::with_capacity(edges.len() + 1);
        cum.push(0.0);
        let mut raw = [0.0; 4];
        for &(lo, hi) in &edges {
            let g = |t: f64| (phi(t) - shift).exp();
            let m = gl24(g, lo, hi);
            cum.push(cum.last().unwrap() + m);
            for (k, r) in raw.iter_mut().enumerate() {
                *r += gl24(|t| g(t) * (t - center).powi(k as i32 + 1), lo, hi);
            }
        }
        let total = *cum.last().unwrap();
        let smom = raw.map(|r| r / total);
        Panels {
            shift,
            center,
            edges,
            cum,
            smom,
        }
    }

    fn total(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    fn scaled_cdf(&self, t: &Tilt, x: f64) -> f64 {
        let k = self.edges.partition_point(|&(lo, _)| lo <= x);
        if k == 0 {
            return 0.0;
        }
        let (lo, hi) = self.edges[k - 1];
        if x >= hi {
            return self.cum[k];
        }
        self.cum[k - 1] + gl24(|s| (t.phi(s) - self.shift).exp(), lo, x)
    }

    fn quantile(&self, t: &Tilt, u: f64) -> f64 {
        let target = u * self.total();
        let k = self
            .cum
            .partition_point(|&c| c < target)
            .clamp(1, self.edges.len());
        let (mut lo, mut hi) = self.edges[k - 1];
        for _ in 0..200 {
            if hi - lo <= 1e-13 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.scaled_cdf(t, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// `log ∫₀¹ e^{a t} dt`.
pub fn one_log_norm(a: f64) -> f64 {
    if a.abs() < SERIES_CUTOFF {
        a / 2.0 + a * a / 24.0 - a.powi(4) / 2880.0
    } else if a > 0.0 {
        a + (-(-a).exp_m1()).ln() - a.ln()
    } else {
        (-a.exp_m1()).ln() - (-a).ln()
    }
}

/// Mean of the density `a e^{a t}/(e^a - 1)` on [0, 1].
pub fn one_mean(a: f64) -> f64 {
    if a.abs() < SERIES_CUTOFF {
        0.5 + a / 12.0 - a.powi(3) / 720.0 + a.powi(5) / 30240.0
    } else {
        1.0 / (-(-a).exp_m1()) - 1.0 / a
    }
}

pub fn one_var(a: f64) -> f64 {
    if a.abs() < SERIES_CUTOFF {
        1.0 / 12.0 - a * a / 240.0 + a.powi(4) / 6048.0
    } else if a.abs() > 700.0 {
        1.0 / (a * a)
    } else {
        let s = (0.5 * a).sinh();
        1.0 / (a * a) - 1.0 / (4.0 * s * s)
    }
}

/// Mass of [u, v] ⊆ [0, 1] under the one-parameter tilt.
pub fn one_mass(a: f64, u: f64, v: f64) -> f64 {
    if a.abs() < SERIES_CUTOFF {
        let num = (v - u) + a * (v * v - u * u) / 2.0 + a * a * (v.powi(3) - u.powi(3)) / 6.0;
        let den = 1.0 + a / 2.0 + a * a / 6.0;
        return num / den;
    }
    one_log_mass(a, u, v).exp()
}

pub fn one_log_mass(a: f64, u: f64, v: f64) -> f64 {
    if v <= u {
        return f64::NEG_INFINITY;
    }
    if a.abs() < SERIES_CUTOFF {
        return one_mass(a, u, v).ln();
    }
    if a > 0.0 {
        a * (v - 1.0) + (-(-a * (v - u)).exp_m1()).ln() - (-(-a).exp_m1()).ln()
    } else {
        a * u + (a * (v - u)).exp_m1().ln_neg() - a.exp_m1().ln_neg()
    }
}

fn one_quantile(a: f64, u: f64) -> f64 {
    let x = if a.abs() < 1e-8 {
        u
    } else if a > 0.0 {
        1.0 + (u + (1.0 - u) * (-a).exp()).ln() / a
    } else {
        (u * a.exp_m1()).ln_1p() / a
    };
    x.clamp(0.0, 1.0)
}

trait LnNeg {
    fn ln_neg(self) -> f64;
}

impl LnNeg for f64 {
    /// `ln(-x)` for negative `x`.
    fn ln_neg(self) -> f64 {
        (-self).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::quad::adaptive_simpson;

    fn oracle_mass(a: f64, b: f64, u: f64, v: f64) -> f64 {
        let f = |t: f64| (a * t + b * t * t).exp();
        adaptive_simpson(&f, u, v, 1e-14) / adaptive_simpson(&f, 0.0, 1.0, 1e-14)
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for &a in &[-30.0, -2.0, -1e-4, 0.0, 1e-9, 0.5, 4f64.ln(), 7.0, 60.0] {
            let t = Tilt::new(a, 0.0);
            let n = Tilt::numeric(a, 0.0);
            assert!((t.log_norm() - n.log_norm()).abs() < 1e-12, "a={a}");
            assert!((t.mean() - n.mean()).abs() < 1e-12, "a={a}");
            assert!((t.var() - n.var()).abs() < 1e-12, "a={a}");
            for &(u, v) in &[(0.0, 0.3), (0.2, 0.5), (0.5, 1.0)] {
                assert!(
                    (t.mass(u, v) - oracle_mass(a, 0.0, u, v)).abs() < 1e-10,
                    "a={a}"
                );
                assert!(
                    (n.mass(u, v) - oracle_mass(a, 0.0, u, v)).abs() < 1e-10,
                    "a={a}"
                );
            }
        }
    }

    #[test]
    fn quadratic_tilt_matches_simpson() {
        for &(a, b) in &[(1.0, -3.0), (280.0, -200.0), (-5.0, 9.0), (40.0, 30.0)] {
            let t = Tilt::new(a, b);
            for &x in &[0.1, 0.5, 0.7, 0.95] {
                assert!(
                    (t.cdf(x) - oracle_mass(a, b, 0.0, x)).abs() < 1e-10,
                    "{a} {b} {x}"
                );
            }
        }
    }

    #[test]
    fn sharp_gaussian_tilt() {
        // variance 2.1e-5 around 0.3: the two-feature coin at N = 10^4
        let var = 0.3 * 0.7 / 1e4;
        let b = -1.0 / (2.0 * var);
        let a = 0.3 / var;
        let t = Tilt::new(a, b);
        assert!((t.mean() - 0.3).abs() < 1e-12);
        assert!((t.var() - var).abs() < 1e-14);
        let (m, c) = t.quad_stats();
        assert!((m[1] - (0.09 + var)).abs() < 1e-13);
        assert!(c[0][0] > 0.0 && c[0][0] * c[1][1] - c[0][1] * c[0][1] > 0.0);
        assert!((t.quantile(0.5) - 0.3).abs() < 1e-9);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &(a, b) in &[(0.0, 0.0), (3.0, 0.0), (-700.0, 0.0), (2.0, -5.0)] {
            let t = Tilt::new(a, b);
            for &u in &[0.01, 0.3, 0.5, 0.99] {
                let x = t.quantile(u);
                assert!((t.cdf(x) - u).abs() < 1e-9, "{a} {b} {u}");
            }
        }
    }
}
