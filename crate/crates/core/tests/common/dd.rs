//! Double-double arithmetic (about 106 bits) for evaluating f64 expressions
//! far below their rounding error.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn scale(self, x: f64) -> Dd {
        self.mul(Dd::from(x))
    }
}

/// `Σ x_k²` in double-double.
pub fn norm2(x: &[f64]) -> Dd {
    x.iter().fold(Dd::ZERO, |acc, &v| acc.add(Dd::from(v).mul(Dd::from(v))))
}

/// `(v - v*)·ω` in double-double.
pub fn normal_component(v: &[f64], vs: &[f64], omega: &[f64]) -> Dd {
    v.iter()
        .zip(vs)
        .zip(omega)
        .fold(Dd::ZERO, |acc, ((&a, &b), &w)| acc.add(Dd::from(a).sub(Dd::from(b)).scale(w)))
}

/// Size of one unit in the last place of `x`.
pub fn ulp(x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        return f64::MIN_POSITIVE;
    }
    let next = f64::from_bits(x.to_bits() + 1);
    next - x
}
