use super::lm::Model;

/// `A e^(−t/T) + c`, parameters `[A, T, c]`.
pub(crate) struct Exponential;

impl Model for Exponential {
    fn n_params(&self) -> usize {
        3
    }

    fn eval(&self, t: f64, p: &[f64], g: &mut [f64]) -> f64 {
        let e = (-t / p[1]).exp();
        g[0] = e;
        g[1] = p[0] * e * t / (p[1] * p[1]);
        g[2] = 1.0;
        p[0] * e + p[2]
    }

    fn clamp(&self, p: &mut [f64]) {
        p[1] = p[1].max(1e-300);
    }
}

/// `[x0, w, h, a]`.
pub(crate) struct Lorentzian;

impl Model for Lorentzian {
    fn n_params(&self) -> usize {
        4
    }

    fn eval(&self, x: f64, p: &[f64], g: &mut [f64]) -> f64 {
        let z = (x - p[0]) / p[1];
        let l = 1.0 / (1.0 + z * z);
        let dz = -2.0 * p[2] * z * l * l;
        g[0] = -dz / p[1];
        g[1] = -dz * z / p[1];
        g[2] = l;
        g[3] = 1.0;
        p[3] + p[2] * l
    }

    fn clamp(&self, p: &mut [f64]) {
        p[1] = p[1].abs().max(1e-300);
    }
}

/// `[x0, w0, γ, h, a]` with `w(x) = w0 (1 + γ tanh((x − x0)/w0))`.
pub(crate) struct SkewedLorentzian;

impl Model for SkewedLorentzian {
    fn n_params(&self) -> usize {
        5
    }

    fn eval(&self, x: f64, p: &[f64], g: &mut [f64]) -> f64 {
        let (x0, w0, gam, h, a) = (p[0], p[1], p[2], p[3], p[4]);
        let u = x - x0;
        let s = (u / w0).tanh();
        let sech2 = 1.0 - s * s;
        let w = w0 * (1.0 + gam * s);
        let z = u / w;
        let l = 1.0 / (1.0 + z * z);
        let dz = -2.0 * h * z * l * l;
        // ∂z/∂x0, ∂z/∂w0, ∂z/∂γ
        let dz_x0 = (-w + u * gam * sech2) / (w * w);
        let dw_w0 = 1.0 + gam * s - gam * sech2 * u / w0;
        g[0] = dz * dz_x0;
        g[1] = dz * (-u / (w * w) * dw_w0);
        g[2] = dz * (-u * w0 * s / (w * w));
        g[3] = l;
        g[4] = 1.0;
        a + h * l
    }

    fn clamp(&self, p: &mut [f64]) {
        p[1] = p[1].abs().max(1e-300);
        p[2] = p[2].clamp(-0.99, 0.99);
    }
}

/// `[A, Ω, T_c1, B, T_c2]`.
pub(crate) struct Rabi;

impl Model for Rabi {
    fn n_params(&self) -> usize {
        5
    }

    fn eval(&self, t: f64, p: &[f64], g: &mut [f64]) -> f64 {
        let (a, om, t1, b, t2) = (p[0], p[1], p[2], p[3], p[4]);
        let s = (0.5 * om * t).sin();
        let e1 = (-t / t1).exp();
        let e2 = (-t / t2).exp();
        g[0] = s * s * e1;
        g[1] = a * 0.5 * t * (om * t).sin() * e1;
        g[2] = a * s * s * e1 * t / (t1 * t1);
        g[3] = 1.0 - e2;
        g[4] = -b * e2 * t / (t2 * t2);
        a * s * s * e1 + b * (1.0 - e2)
    }

    fn clamp(&self, p: &mut [f64]) {
        p[0] = p[0].max(0.0);
        p[1] = p[1].max(1e-300);
        p[2] = p[2].max(1e-300);
        p[3] = p[3].max(0.0);
        p[4] = p[4].max(1e-300);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_jacobian(m: &dyn Model, p: &[f64], xs: &[f64]) {
        let n = m.n_params();
        let mut g = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        for &x in xs {
            m.eval(x, p, &mut g);
            for k in 0..n {
                let h = 1e-6 * p[k].abs().max(1e-3);
                let (mut up, mut dn) = (p.to_vec(), p.to_vec());
                up[k] += h;
                dn[k] -= h;
                let fd = (m.eval(x, &up, &mut scratch) - m.eval(x, &dn, &mut scratch)) / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-6 * (fd.abs() + 1.0), "param {k} at x={x}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        check_jacobian(&Exponential, &[2.0, 0.7, 0.3], &[0.0, 0.4, 1.3, 3.0]);
        check_jacobian(&Lorentzian, &[1.0, 0.4, 3.0, 0.2], &[0.0, 0.9, 1.2, 2.5]);
        check_jacobian(&SkewedLorentzian, &[1.0, 0.4, 0.3, 3.0, 0.2], &[-0.5, 0.9, 1.2, 2.5]);
        check_jacobian(&Rabi, &[5.0, 2.0, 3.0, 2.0, 4.0], &[0.1, 1.0, 2.7, 6.0]);
    }

    #[test]
    fn zero_skew_is_the_plain_lorentzian() {
        let mut g = [0.0; 5];
        let mut h = [0.0; 4];
        for x in [-2.0, 0.1, 0.5, 3.0] {
            let a = SkewedLorentzian.eval(x, &[0.3, 0.5, 0.0, 2.0, 1.0], &mut g);
            let b = Lorentzian.eval(x, &[0.3, 0.5, 2.0, 1.0], &mut h);
            assert!((a - b).abs() < 1e-15);
        }
    }
}
