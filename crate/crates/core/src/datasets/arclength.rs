/// Cumulative arc length of a parametric curve on a uniform trapezoid grid.
#[derive(Clone, Debug)]
pub struct ArcLengthTable {
    t0: f64,
    h: f64,
    cumulative: Vec<f64>,
    speeds: Vec<f64>,
}

impl ArcLengthTable {
    /// Tabulates `s(t) = int_{t0}^{t} speed` on `[t0, t1]` with `steps` trapezoids.
    pub fn new(speed: impl Fn(f64) -> f64, t0: f64, t1: f64, steps: usize) -> Self {
        let h = (t1 - t0) / steps as f64;
        let speeds: Vec<f64> = (0..=steps).map(|k| speed(t0 + h * k as f64)).collect();
        let mut cumulative = Vec::with_capacity(steps + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for w in speeds.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cumulative.push(acc);
        }
        Self {
            t0,
            h,
            cumulative,
            speeds,
        }
    }

    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Arc length at parameter `t` (piecewise-linear speed between grid nodes).
    pub fn length_at(&self, t: f64) -> f64 {
        let steps = self.cumulative.len() - 1;
        let x = ((t - self.t0) / self.h).clamp(0.0, steps as f64);
        let k = (x.floor() as usize).min(steps.saturating_sub(1));
        let frac = x - k as f64;
        let v0 = self.speeds[k];
        let v1 = self.speeds[k + 1];
        // exact integral of the linear speed interpolant over [t_k, t]
        self.cumulative[k] + self.h * (v0 * frac + 0.5 * (v1 - v0) * frac * frac)
    }

    /// Parameter `t` with `s(t) = s`, clamped to the tabulated range.
    pub fn invert(&self, s: f64) -> f64 {
        let steps = self.cumulative.len() - 1;
        let s = s.clamp(0.0, self.total());
        let k = match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(k) => return self.t0 + self.h * k as f64,
            Err(k) => k.saturating_sub(1).min(steps - 1),
        };
        // solve v0 f + (v1 - v0) f^2 / 2 = r / h for f in [0, 1]
        let v0 = self.speeds[k];
        let v1 = self.speeds[k + 1];
        let r = (s - self.cumulative[k]) / self.h;
        let a = 0.5 * (v1 - v0);
        let frac = if a.abs() < 1e-14 * v0.abs().max(1e-300) {
            r / v0
        } else {
            let disc = (v0 * v0 + 4.0 * a * r).max(0.0);
            2.0 * r / (v0 + disc.sqrt())
        };
        self.t0 + self.h * (k as f64 + frac.clamp(0.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_has_length_two_pi() {
        let t = ArcLengthTable::new(|_| 1.0, 0.0, std::f64::consts::TAU, 1000);
        assert!((t.total() - std::f64::consts::TAU).abs() < 1e-12);
        assert!((t.invert(1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invert_is_inverse_of_length() {
        let t = ArcLengthTable::new(|t| (1.0 + t * t).sqrt(), 1.0, 5.0, 10_000);
        for k in 0..=20 {
            let s = t.total() * k as f64 / 20.0;
            let back = t.length_at(t.invert(s));
            assert!((back - s).abs() < 1e-10, "{back} vs {s}");
        }
    }

    #[test]
    fn matches_closed_form_for_archimedean_spiral() {
        let s = |t: f64| 0.5 * (t * (1.0 + t * t).sqrt() + t.asinh());
        let table = ArcLengthTable::new(|t| (1.0 + t * t).sqrt(), 1.0, 5.0, 100_000);
        assert!((table.total() - (s(5.0) - s(1.0))).abs() < 1e-8);
    }
}
