//! Two-rule fuzzy match decision over Hamming distance.
//!
//! Rules: distance LOW → MATCH, distance HIGH → NO MATCH. Inference is
//! zero-order Sugeno: the output is the firing-strength-weighted mean of
//! the two singleton consequents.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Upper end of the Hamming distance domain.
pub const MAX_DISTANCE: f64 = 256.0;

#[derive(Debug, Error, PartialEq)]
pub enum FuzzyError {
    #[error("trapezoid breakpoints must be finite and ordered a <= b <= c <= d, got ({0}, {1}, {2}, {3})")]
    UnorderedBreakpoints(f64, f64, f64, f64),
    #[error("singleton_match ({matched}) must exceed singleton_nomatch ({unmatched})")]
    SingletonOrder { matched: f64, unmatched: f64 },
    #[error("cutoff {cutoff} must lie strictly between {lo} and {hi}")]
    Cutoff { cutoff: f64, lo: f64, hi: f64 },
    #[error("LOW and HIGH both vanish at distance {0}")]
    SilentRuleBase(f64),
    #[error("distance {0} outside [0, 256]")]
    DistanceOutOfRange(f64),
    #[error("invalid config line: {0}")]
    Parse(String),
}

/// Trapezoidal membership function with breakpoints `a <= b <= c <= d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapezoidMF {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl TrapezoidMF {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, FuzzyError> {
        let finite = [a, b, c, d].iter().all(|v| v.is_finite());
        if !finite || !(a <= b && b <= c && c <= d) {
            return Err(FuzzyError::UnorderedBreakpoints(a, b, c, d));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn breakpoints(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Membership degree; on a vertical edge the plateau value wins.
    pub fn eval(&self, x: f64) -> f64 {
        if x >= self.b && x <= self.c {
            1.0
        } else if x <= self.a || x >= self.d {
            0.0
        } else if x < self.b {
            (x - self.a) / (self.b - self.a)
        } else {
            (self.d - x) / (self.d - self.c)
        }
    }
}

/// Free-function form of [`TrapezoidMF::eval`].
pub fn mf_eval(mf: &TrapezoidMF, x: f64) -> f64 {
    mf.eval(x)
}

impl fmt::Display for TrapezoidMF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.a, self.b, self.c, self.d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuzzyMatcherConfig {
    low: TrapezoidMF,
    high: TrapezoidMF,
    singleton_match: f64,
    singleton_nomatch: f64,
    cutoff: f64,
}

impl Default for FuzzyMatcherConfig {
    fn default() -> Self {
        Self {
            low: TrapezoidMF {
                a: 0.0,
                b: 0.0,
                c: 10.0,
                d: 15.0,
            },
            high: TrapezoidMF {
                a: 10.0,
                b: 15.0,
                c: MAX_DISTANCE,
                d: MAX_DISTANCE,
            },
            singleton_match: 1.0,
            singleton_nomatch: 0.0,
            cutoff: 0.5,
        }
    }
}

impl FuzzyMatcherConfig {
    /// Validates singleton order, cutoff placement, and that at least one
    /// rule fires everywhere on `[0, 256]`.
    pub fn new(
        low: TrapezoidMF,
        high: TrapezoidMF,
        singleton_match: f64,
        singleton_nomatch: f64,
        cutoff: f64,
    ) -> Result<Self, FuzzyError> {
        if !(singleton_match.is_finite()
            && singleton_nomatch.is_finite()
            && singleton_match > singleton_nomatch)
        {
            return Err(FuzzyError::SingletonOrder {
                matched: singleton_match,
                unmatched: singleton_nomatch,
            });
        }
        if !(cutoff > singleton_nomatch && cutoff < singleton_match) {
            return Err(FuzzyError::Cutoff {
                cutoff,
                lo: singleton_nomatch,
                hi: singleton_match,
            });
        }
        let cfg = Self {
            low,
            high,
            singleton_match,
            singleton_nomatch,
            cutoff,
        };
        if let Some(x) = cfg.silent_point() {
            return Err(FuzzyError::SilentRuleBase(x));
        }
        Ok(cfg)
    }

    /// Default singletons (1, 0) and the given MFs and cutoff.
    pub fn with_sets(low: TrapezoidMF, high: TrapezoidMF, cutoff: f64) -> Result<Self, FuzzyError> {
        Self::new(low, high, 1.0, 0.0, cutoff)
    }

    pub fn low(&self) -> &TrapezoidMF {
        &self.low
    }

    pub fn high(&self) -> &TrapezoidMF {
        &self.high
    }

    pub fn singleton_match(&self) -> f64 {
        self.singleton_match
    }

    pub fn singleton_nomatch(&self) -> f64 {
        self.singleton_nomatch
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// A point of `[0, 256]` where both memberships are zero, if any.
    ///
    /// The zero set of each trapezoid is a union of intervals bounded by its
    /// breakpoints, so probing every breakpoint and every midpoint between
    /// consecutive breakpoints is exhaustive.
    fn silent_point(&self) -> Option<f64> {
        let mut knots: Vec<f64> = self
            .low
            .breakpoints()
            .into_iter()
            .chain(self.high.breakpoints())
            .chain([0.0, MAX_DISTANCE])
            .filter(|v| (0.0..=MAX_DISTANCE).contains(v))
            .collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let mids: Vec<f64> = knots.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        knots
            .into_iter()
            .chain(mids)
            .find(|&x| self.low.eval(x) + self.high.eval(x) <= 0.0)
    }
}

/// Accepts `low=a,b,c,d high=a,b,c,d cutoff=v`; omitted keys keep their
/// defaults.
impl FromStr for FuzzyMatcherConfig {
    type Err = FuzzyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let def = Self::default();
        let (mut low, mut high, mut cutoff) = (def.low, def.high, def.cutoff);
        for field in s.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| FuzzyError::Parse(format!("expected key=value, got {field:?}")))?;
            match key {
                "low" => low = parse_trapezoid(value)?,
                "high" => high = parse_trapezoid(value)?,
                "cutoff" => cutoff = parse_f64(value)?,
                _ => return Err(FuzzyError::Parse(format!("unknown key {key:?}"))),
            }
        }
        Self::with_sets(low, high, cutoff)
    }
}

impl fmt::Display for FuzzyMatcherConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "low={} high={} cutoff={}",
            self.low, self.high, self.cutoff
        )
    }
}

fn parse_f64(s: &str) -> Result<f64, FuzzyError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| FuzzyError::Parse(format!("not a number: {s:?}")))
}

/// Parses `a,b,c,d`.
pub fn parse_trapezoid(s: &str) -> Result<TrapezoidMF, FuzzyError> {
    let vals = s.split(',').map(parse_f64).collect::<Result<Vec<_>, _>>()?;
    match vals[..] {
        [a, b, c, d] => TrapezoidMF::new(a, b, c, d),
        _ => Err(FuzzyError::Parse(format!(
            "expected 4 comma-separated breakpoints, got {s:?}"
        ))),
    }
}

/// Sugeno output for distance `d` in `[0, 256]`.
pub fn sugeno_infer(cfg: &FuzzyMatcherConfig, d: f64) -> Result<f64, FuzzyError> {
    if !(0.0..=MAX_DISTANCE).contains(&d) {
        return Err(FuzzyError::DistanceOutOfRange(d));
    }
    Ok(infer_unchecked(cfg, d))
}

#[inline]
fn infer_unchecked(cfg: &FuzzyMatcherConfig, d: f64) -> f64 {
    let w_low = cfg.low.eval(d);
    let w_high = cfg.high.eval(d);
    let w = w_low + w_high;
    if w <= 0.0 {
        return cfg.singleton_nomatch;
    }
    (w_low * cfg.singleton_match + w_high * cfg.singleton_nomatch) / w
}

/// Match decision: `degree >= cutoff`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub is_match: bool,
    pub degree: f64,
}

pub fn fuzzy_decide(cfg: &FuzzyMatcherConfig, d: f64) -> Result<Decision, FuzzyError> {
    let degree = sugeno_infer(cfg, d)?;
    Ok(Decision {
        is_match: degree >= cfg.cutoff,
        degree,
    })
}

/// Integer-distance form used on the matching hot path.
#[inline]
pub(crate) fn decide_bits(cfg: &FuzzyMatcherConfig, bits: u32) -> Decision {
    debug_assert!(bits <= 256);
    let degree = infer_unchecked(cfg, bits as f64);
    Decision {
        is_match: degree >= cfg.cutoff,
        degree,
    }
}
