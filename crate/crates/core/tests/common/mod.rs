//! Shared support for the acceptance suite: a pass/fail reporter and an
//! independent double-double Bessel series oracle.

/// Prints one line per criterion: PASS when `pass` is reached, FAIL when
/// the test unwinds first.
pub struct Criterion {
    number: usize,
    name: &'static str,
    done: bool,
}

impl Criterion {
    pub fn new(number: usize, name: &'static str) -> Self {
        Criterion {
            number,
            name,
            done: false,
        }
    }

    pub fn pass(mut self) {
        self.done = true;
        println!("acceptance {:02} {}: PASS", self.number, self.name);
    }
}

impl Drop for Criterion {
    fn drop(&mut self) {
        if !self.done {
            println!("acceptance {:02} {}: FAIL", self.number, self.name);
        }
    }
}

/// Double-double value `hi + lo` with `|lo| <= ulp(hi)/2`, giving roughly
/// 32 significant decimal digits. Only the operations needed by the Bessel
/// series are implemented.
#[derive(Debug, Clone, Copy)]
pub struct Dd {
    hi: f64,
    lo: f64,
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
    pub fn from(v: f64) -> Dd {
        Dd { hi: v, lo: 0.0 }
    }

    pub fn from_prod(a: f64, b: f64) -> Dd {
        let (hi, lo) = two_prod(a, b);
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, other: Dd) -> Dd {
        let (s1, e1) = two_sum(self.hi, other.hi);
        let (s2, e2) = two_sum(self.lo, other.lo);
        let (s1, e1) = quick_two_sum(s1, e1 + s2);
        let (hi, lo) = quick_two_sum(s1, e1 + e2);
        Dd { hi, lo }
    }

    pub fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn mul_f64(self, v: f64) -> Dd {
        let (p, e) = two_prod(self.hi, v);
        let (hi, lo) = quick_two_sum(p, e + self.lo * v);
        Dd { hi, lo }
    }

    pub fn div_f64(self, v: f64) -> Dd {
        let q1 = self.hi / v;
        let (p, e) = two_prod(q1, v);
        // Remainder (self - q1 v) evaluated in double-double.
        let (s, es) = two_sum(self.hi, -p);
        let r = s + (es + self.lo - e);
        let (hi, lo) = quick_two_sum(q1, r / v);
        Dd { hi, lo }
    }
}

/// Euler-Mascheroni constant as a double-double.
const EULER_GAMMA_DD: Dd = Dd {
    hi: 0.5772156649015329,
    lo: -4.942915152430645e-18,
};

/// J0 by its ascending power series in double-double arithmetic. On
/// [1e-6, 50] the cancellation loss is bounded by I0(50) ~ 3e20, leaving an
/// absolute error of order 1e-11 at worst.
pub fn oracle_j0(x: f64) -> f64 {
    let q = Dd::from_prod(x, x).div_f64(4.0);
    let mut term = Dd::from(1.0);
    let mut sum = Dd::from(1.0);
    for k in 1..500u64 {
        term = term.mul(q).div_f64(-((k * k) as f64));
        sum = sum.add(term);
        if term.hi.abs() < 1e-36 {
            break;
        }
    }
    sum.to_f64()
}

/// Y0 by the series `(2/pi)[(ln(x/2) + gamma) J0 + sum_k (-1)^{k+1} H_k
/// q^k / (k!)^2]` with the sums in double-double arithmetic.
pub fn oracle_y0(x: f64) -> f64 {
    let q = Dd::from_prod(x, x).div_f64(4.0);
    let mut term = Dd::from(1.0);
    let mut j0 = Dd::from(1.0);
    let mut harmonic = Dd::from(0.0);
    let mut sum = Dd::from(0.0);
    for k in 1..500u64 {
        term = term.mul(q).div_f64(-((k * k) as f64));
        j0 = j0.add(term);
        harmonic = harmonic.add(Dd::from(1.0).div_f64(k as f64));
        sum = sum.add(term.mul(harmonic).mul_f64(-1.0));
        if term.hi.abs() < 1e-36 {
            break;
        }
    }
    // ln(x/2) in f64 keeps the product error near 1e-16, far below the
    // series cancellation floor.
    let log_term = Dd::from((0.5 * x).ln()).add(EULER_GAMMA_DD);
    let total = log_term.mul(j0).add(sum);
    total.mul_f64(2.0 / std::f64::consts::PI).to_f64()
}
