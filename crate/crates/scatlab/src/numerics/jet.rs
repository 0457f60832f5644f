//! Truncated derivative arithmetic: a `Jet` carries f, f', ..., f^(K) at one point.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    d: Vec<f64>,
}

fn binom(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

impl Jet {
    pub fn constant(c: f64, order: usize) -> Self {
        let mut d = vec![0.0; order + 1];
        d[0] = c;
        Jet { d }
    }

    /// The identity function evaluated at `x`.
    pub fn variable(x: f64, order: usize) -> Self {
        let mut d = vec![0.0; order + 1];
        d[0] = x;
        if order >= 1 {
            d[1] = 1.0;
        }
        Jet { d }
    }

    pub fn from_derivs(d: Vec<f64>) -> Self {
        assert!(!d.is_empty());
        Jet { d }
    }

    pub fn order(&self) -> usize {
        self.d.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.d[0]
    }

    /// m-th derivative, zero beyond the stored order.
    pub fn deriv(&self, m: usize) -> f64 {
        self.d.get(m).copied().unwrap_or(0.0)
    }

    pub fn derivs(&self) -> &[f64] {
        &self.d
    }

    /// d/dx of the jet; loses one order.
    pub fn differentiate(&self) -> Jet {
        if self.d.len() == 1 {
            return Jet { d: vec![0.0] };
        }
        Jet { d: self.d[1..].to_vec() }
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let k = order.min(self.order());
        Jet { d: self.d[..=k].to_vec() }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { d: self.d.iter().map(|v| v * s).collect() }
    }

    pub fn add_const(&self, c: f64) -> Jet {
        let mut d = self.d.clone();
        d[0] += c;
        Jet { d }
    }

    fn common(&self, other: &Jet) -> usize {
        self.order().min(other.order())
    }

    pub fn mul_jet(&self, other: &Jet) -> Jet {
        let k = self.common(other);
        let mut d = vec![0.0; k + 1];
        for (m, dm) in d.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in 0..=m {
                s += binom(m, j) * self.d[j] * other.d[m - j];
            }
            *dm = s;
        }
        Jet { d }
    }

    pub fn div_jet(&self, other: &Jet) -> Jet {
        let k = self.common(other);
        let g0 = other.d[0];
        let mut q = vec![0.0; k + 1];
        for m in 0..=k {
            let mut s = self.d[m];
            for j in 0..m {
                s -= binom(m, j) * q[j] * other.d[m - j];
            }
            q[m] = s / g0;
        }
        Jet { d: q }
    }

    fn exp_with_value(&self, v0: f64, e0: f64) -> Jet {
        // h' = f' h ; v0 is the stored value (e^f or e^f - 1), e0 = e^f
        let k = self.order();
        let mut h = vec![0.0; k + 1];
        h[0] = e0;
        for m in 1..=k {
            let mut s = 0.0;
            for j in 0..m {
                s += binom(m - 1, j) * self.d[j + 1] * h[m - 1 - j];
            }
            h[m] = s;
        }
        h[0] = v0;
        Jet { d: h }
    }

    pub fn exp(&self) -> Jet {
        let e0 = self.d[0].exp();
        self.exp_with_value(e0, e0)
    }

    /// e^f − 1 with full relative precision in the value.
    pub fn exp_m1(&self) -> Jet {
        self.exp_with_value(self.d[0].exp_m1(), self.d[0].exp())
    }

    pub fn ln(&self) -> Jet {
        let mut out = self.differentiate().div_jet(&self.truncate(self.order().saturating_sub(1)));
        out = integrate_const(&out, self.d[0].ln());
        out
    }

    /// ln(1 + f) with full relative precision in the value.
    pub fn ln_1p(&self) -> Jet {
        let one_plus = self.add_const(1.0);
        let der = self.differentiate().div_jet(&one_plus.truncate(self.order().saturating_sub(1)));
        integrate_const(&der, self.d[0].ln_1p())
    }

    pub fn powf(&self, a: f64) -> Jet {
        self.ln().scale(a).exp()
    }

    pub fn sin(&self) -> Jet {
        self.sincos().0
    }

    pub fn cos(&self) -> Jet {
        self.sincos().1
    }

    fn sincos(&self) -> (Jet, Jet) {
        let k = self.order();
        let mut s = vec![0.0; k + 1];
        let mut c = vec![0.0; k + 1];
        s[0] = self.d[0].sin();
        c[0] = self.d[0].cos();
        for m in 1..=k {
            let (mut ss, mut cc) = (0.0, 0.0);
            for j in 0..m {
                let b = binom(m - 1, j) * self.d[j + 1];
                ss += b * c[m - 1 - j];
                cc -= b * s[m - 1 - j];
            }
            s[m] = ss;
            c[m] = cc;
        }
        (Jet { d: s }, Jet { d: c })
    }
}

fn integrate_const(der: &Jet, c: f64) -> Jet {
    let mut d = Vec::with_capacity(der.d.len() + 1);
    d.push(c);
    d.extend_from_slice(&der.d);
    Jet { d }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        let k = self.common(o);
        Jet { d: (0..=k).map(|i| self.d[i] + o.d[i]).collect() }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        let k = self.common(o);
        Jet { d: (0..=k).map(|i| self.d[i] - o.d[i]).collect() }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        self.mul_jet(o)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
