use serde::{Deserialize, Serialize};

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(!(lo > hi), "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn around(center: f64, margin: f64) -> Self {
        Self::new(center - margin, center + margin)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.lo + o.lo, self.hi + o.hi)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.lo - o.hi, self.hi - o.lo)
    }

    pub fn neg(self) -> Self {
        Self::new(-self.hi, -self.lo)
    }

    pub fn scale(self, w: f64) -> Self {
        if w >= 0.0 {
            Self::new(w * self.lo, w * self.hi)
        } else {
            Self::new(w * self.hi, w * self.lo)
        }
    }

    pub fn shift(self, c: f64) -> Self {
        Self::new(self.lo + c, self.hi + c)
    }

    pub fn mul(self, o: Self) -> Self {
        let c = [
            self.lo * o.lo,
            self.lo * o.hi,
            self.hi * o.lo,
            self.hi * o.hi,
        ];
        Self::new(min4(c), max4(c))
    }

    /// `None` when the divisor contains zero.
    pub fn div(self, o: Self) -> Option<Self> {
        if o.contains(0.0) {
            return None;
        }
        let c = [
            self.lo / o.lo,
            self.lo / o.hi,
            self.hi / o.lo,
            self.hi / o.hi,
        ];
        Some(Self::new(min4(c), max4(c)))
    }

    pub fn exp(self) -> Self {
        Self::new(self.lo.exp(), self.hi.exp())
    }

    /// `None` unless the interval is strictly positive.
    pub fn ln(self) -> Option<Self> {
        (self.lo > 0.0).then(|| Self::new(self.lo.ln(), self.hi.ln()))
    }

    pub fn hull(self, o: Self) -> Self {
        Self::new(self.lo.min(o.lo), self.hi.max(o.hi))
    }
}

fn min4(c: [f64; 4]) -> f64 {
    c.into_iter().fold(f64::INFINITY, f64::min)
}

fn max4(c: [f64; 4]) -> f64 {
    c.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// `{x/y : x ∈ num, y ∈ den}`, or `None` (the trivial interval) when `den`
/// contains zero. On a sign-definite denominator the quotient is monotone in
/// each argument, so the four corners are exact.
pub fn interval_quotient(num: Interval, den: Interval) -> Option<Interval> {
    num.div(den)
}

/// A confidence interval at level `level`.
///
/// The always-valid trivial interval is stored with infinite bounds and goes
/// on the wire as `null` bounds plus `"unbounded": true`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "WireInterval", from = "WireInterval")]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn new(bounds: Interval, level: f64) -> Self {
        Self {
            lower: bounds.lo,
            upper: bounds.hi,
            level,
        }
    }

    pub fn trivial(level: f64) -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            level,
        }
    }

    pub fn from_option(bounds: Option<Interval>, level: f64) -> Self {
        bounds.map_or_else(|| Self::trivial(level), |b| Self::new(b, level))
    }

    pub fn is_trivial(&self) -> bool {
        self.lower == f64::NEG_INFINITY && self.upper == f64::INFINITY
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn bounds(&self) -> Interval {
        Interval::new(self.lower, self.upper)
    }

    /// Divides both bounds by a positive scale.
    pub fn scaled_down(&self, divisor: f64) -> Self {
        debug_assert!(divisor > 0.0);
        Self {
            lower: self.lower / divisor,
            upper: self.upper / divisor,
            level: self.level,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct WireInterval {
    lower: Option<f64>,
    upper: Option<f64>,
    level: f64,
    #[serde(default)]
    unbounded: bool,
}

impl From<ConfidenceInterval> for WireInterval {
    fn from(c: ConfidenceInterval) -> Self {
        let fin = |x: f64| x.is_finite().then_some(x);
        WireInterval {
            lower: fin(c.lower),
            upper: fin(c.upper),
            level: c.level,
            unbounded: c.is_trivial(),
        }
    }
}

impl From<WireInterval> for ConfidenceInterval {
    fn from(w: WireInterval) -> Self {
        ConfidenceInterval {
            lower: w.lower.unwrap_or(f64::NEG_INFINITY),
            upper: w.upper.unwrap_or(f64::INFINITY),
            level: w.level,
        }
    }
}
