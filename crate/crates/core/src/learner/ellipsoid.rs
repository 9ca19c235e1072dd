//! Central-cut / deep-cut ellipsoid method.

/// `E = {θ : (θ − c)ᵀ P⁻¹ (θ − c) ≤ 1}` with dense row-major `P`.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    dim: usize,
    center: Vec<f64>,
    shape: Vec<f64>,
    log_det: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutResult {
    /// Cut applied with the given depth `α < 1`; negative depths are
    /// shallow cuts, and at `α ≤ −1/N` nothing changes.
    Shrunk { alpha: f64 },
    /// The whole ellipsoid violates the cut.
    Empty,
    /// `aᵀPa` is not positive; the shape matrix lost definiteness.
    Degenerate,
}

impl Ellipsoid {
    pub fn ball(dim: usize, radius: f64) -> Self {
        let mut shape = vec![0.0; dim * dim];
        for i in 0..dim {
            shape[i * dim + i] = radius * radius;
        }
        Ellipsoid {
            dim,
            center: vec![0.0; dim],
            shape,
            log_det: 2.0 * dim as f64 * radius.ln(),
        }
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// `ln det P`; the volume is `V_unit · exp(log_det / 2)`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Geometric-mean semi-axis `exp(log_det / (2N))`.
    pub fn mean_radius(&self) -> f64 {
        (self.log_det / (2.0 * self.dim as f64)).exp()
    }

    /// Keep the half `aᵀθ ≤ b`.
    pub fn cut(&mut self, a: &[f64], b: f64) -> CutResult {
        let n = self.dim;
        let nf = n as f64;
        let mut pa = vec![0.0; n];
        for i in 0..n {
            let row = &self.shape[i * n..(i + 1) * n];
            pa[i] = row.iter().zip(a).map(|(p, q)| p * q).sum();
        }
        let apa: f64 = pa.iter().zip(a).map(|(p, q)| p * q).sum();
        if !(apa > 0.0) || !apa.is_finite() {
            return CutResult::Degenerate;
        }
        let s = apa.sqrt();
        let ac: f64 = a.iter().zip(&self.center).map(|(p, q)| p * q).sum();
        let alpha = (ac - b) / s;
        if alpha >= 1.0 {
            return CutResult::Empty;
        }
        if alpha <= -1.0 / nf {
            // the half-space contains the whole ellipsoid
            return CutResult::Shrunk { alpha };
        }
        if n == 1 {
            // interval [c − √P, c + √P] intersected with the half-line
            let (mut lo, mut hi) = (self.center[0] - s, self.center[0] + s);
            if a[0] > 0.0 {
                hi = hi.min(b / a[0]);
            } else {
                lo = lo.max(b / a[0]);
            }
            self.center[0] = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            self.shape[0] = half * half;
            self.log_det = 2.0 * half.ln();
            return CutResult::Shrunk { alpha };
        }
        let tau = (1.0 + nf * alpha) / (nf + 1.0);
        let sigma = 2.0 * (1.0 + nf * alpha) / ((nf + 1.0) * (1.0 + alpha));
        let factor = nf * nf * (1.0 - alpha * alpha) / (nf * nf - 1.0);
        for i in 0..n {
            self.center[i] -= tau * pa[i] / s;
        }
        let inv = 1.0 / apa;
        for i in 0..n {
            for j in i..n {
                let v = factor * (self.shape[i * n + j] - sigma * pa[i] * pa[j] * inv);
                self.shape[i * n + j] = v;
                self.shape[j * n + i] = v;
            }
        }
        self.log_det += nf * factor.ln() + (1.0 - sigma).ln();
        CutResult::Shrunk { alpha }
    }

    /// Does the ellipsoid contain `θ`? Used by tests only; costs a solve.
    pub fn contains(&self, theta: &[f64]) -> bool {
        let n = self.dim;
        let p = nalgebra::DMatrix::from_row_slice(n, n, &self.shape);
        let d = nalgebra::DVector::from_iterator(n, theta.iter().zip(&self.center).map(|(a, b)| a - b));
        match p.cholesky() {
            Some(ch) => d.dot(&ch.solve(&d)) <= 1.0 + 1e-9,
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_cut_volume_ratio() {
        let mut e = Ellipsoid::ball(3, 1.0);
        let before = e.log_det();
        assert_eq!(e.cut(&[1.0, 0.0, 0.0], 0.0), CutResult::Shrunk { alpha: 0.0 });
        let ratio = ((e.log_det() - before) / 2.0).exp();
        let n = 3.0f64;
        let expected = (n / (n + 1.0)) * (n * n / (n * n - 1.0)).powf((n - 1.0) / 2.0);
        assert!((ratio - expected).abs() < 1e-12);
        assert!(e.center()[0] < 0.0);
    }

    #[test]
    fn keeps_feasible_points() {
        let mut e = Ellipsoid::ball(2, 10.0);
        let target = [0.3, -0.7];
        let cuts = [([1.0, 1.0], 0.0), ([-1.0, 0.2], 0.5), ([0.0, 1.0], -0.5), ([1.0, -3.0], 2.5)];
        for (a, b) in cuts {
            assert!(a[0] * target[0] + a[1] * target[1] <= b);
            e.cut(&a, b);
            assert!(e.contains(&target));
        }
    }

    #[test]
    fn empty_when_all_violated() {
        let mut e = Ellipsoid::ball(2, 1.0);
        assert_eq!(e.cut(&[1.0, 0.0], -2.0), CutResult::Empty);
    }

    #[test]
    fn deep_cut_shrinks_more() {
        let mut central = Ellipsoid::ball(4, 1.0);
        let mut deep = Ellipsoid::ball(4, 1.0);
        central.cut(&[1.0, 0.0, 0.0, 0.0], 0.0);
        deep.cut(&[1.0, 0.0, 0.0, 0.0], -0.5);
        assert!(deep.log_det() < central.log_det());
    }

    #[test]
    fn one_dimensional_interval() {
        let mut e = Ellipsoid::ball(1, 2.0);
        e.cut(&[1.0], 1.0);
        assert!((e.center()[0] + 0.5).abs() < 1e-15);
        assert!(e.contains(&[0.9]) && !e.contains(&[1.1]));
    }
}
