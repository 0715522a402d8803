//! Closed-form latency analysis: minimum pipelined NDT, regime
//! classification, the D2D usefulness threshold, breakpoint curves, and the
//! pipelining-gain bounds.

use thiserror::Error;

use crate::model::{Ndt, SystemParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("breakpoint curve requires 0 < r_f < 1, got {0}")]
    UnsupportedRange(f64),
}

/// The fronthaul term of the minimum-NDT maximum: (1 - 2 mu) / r_f.
///
/// Conventions: the term is 0 whenever 1 - 2 mu <= 0 regardless of r_f (with
/// mu >= 1/2 every bit can be cached somewhere, so no fronthaul is required),
/// and +inf when 1 - 2 mu > 0 with r_f = 0 (bits cached nowhere and no way to
/// move them).
pub fn fronthaul_term(mu: f64, r_f: f64) -> f64 {
    let unreachable = 1.0 - 2.0 * mu;
    if unreachable <= 0.0 {
        0.0
    } else if r_f == 0.0 {
        f64::INFINITY
    } else {
        unreachable / r_f
    }
}

/// The combined-resource term: (2 - mu) / (1 + r_f + r_d).
pub fn combined_term(mu: f64, r_f: f64, r_d: f64) -> f64 {
    (2.0 - mu) / (1.0 + r_f + r_d)
}

/// Minimum NDT under pipelined delivery:
/// max{(1 - 2 mu)/r_f, (2 - mu)/(1 + r_f + r_d), 1}.
///
/// The result is at least 1 for every feasible instance and +inf exactly when
/// the instance is infeasible (uncached bits with no fronthaul).
pub fn min_pipelined_ndt(p: &SystemParams) -> Ndt {
    let t1 = fronthaul_term(p.mu, p.r_f);
    let t2 = combined_term(p.mu, p.r_f, p.r_d);
    Ndt(t1.max(t2).max(1.0))
}

/// Which term of the minimum-NDT maximum binds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeTag {
    /// The fronthaul term (1 - 2 mu)/r_f attains the max.
    FronthaulLimited,
    /// The combined edge/fronthaul/D2D term attains the max.
    EdgeD2dLimited,
    /// The ideal floor of 1 attains the max.
    Ideal,
    /// The instance is infeasible (+inf).
    Infeasible,
}

/// Regime classification with an explicit tie flag. Ties are reported rather
/// than broken because the breakpoints of the NDT-vs-mu curve are exactly the
/// tie loci.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Regime {
    pub tag: RegimeTag,
    pub tie: bool,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self.tag {
            RegimeTag::FronthaulLimited => "FronthaulLimited",
            RegimeTag::EdgeD2dLimited => "EdgeD2DLimited",
            RegimeTag::Ideal => "Ideal",
            RegimeTag::Infeasible => "Infeasible",
        }
    }
}

pub fn classify_regime(p: &SystemParams) -> Regime {
    let t1 = fronthaul_term(p.mu, p.r_f);
    let t2 = combined_term(p.mu, p.r_f, p.r_d);
    let ndt = t1.max(t2).max(1.0);
    if ndt.is_infinite() {
        return Regime {
            tag: RegimeTag::Infeasible,
            tie: false,
        };
    }
    let attained = [t1 == ndt, t2 == ndt, ndt == 1.0];
    let tie = attained.iter().filter(|&&a| a).count() >= 2;
    let tag = if ndt == 1.0 {
        RegimeTag::Ideal
    } else if t1 >= t2 {
        RegimeTag::FronthaulLimited
    } else {
        RegimeTag::EdgeD2dLimited
    };
    Regime { tag, tie }
}

/// D2D rate threshold r*_D above which the minimum pipelined NDT no longer
/// depends on r_d. The raw value can be negative (meaning D2D is unnecessary
/// even at rate zero); `clamped` is the raw value floored at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D2dThreshold {
    pub raw: f64,
    pub clamped: f64,
}

/// r*_D(mu, r_f) = min{1 - r_f - mu, r_f (1 + mu)/(1 - 2 mu) - 1} for
/// mu < 1/2 and 1 - r_f - mu for mu >= 1/2. With mu < 1/2 and r_f = 0 the
/// second argument evaluates to -1; the system is infeasible there and the
/// clamped threshold is 0.
pub fn d2d_threshold(p: &SystemParams) -> D2dThreshold {
    let mu = p.mu;
    let r_f = p.r_f;
    let raw = if mu < 0.5 {
        let cap = 1.0 - r_f - mu;
        let crossing = r_f * (1.0 + mu) / (1.0 - 2.0 * mu) - 1.0;
        cap.min(crossing)
    } else {
        1.0 - r_f - mu
    };
    D2dThreshold {
        raw,
        clamped: raw.max(0.0),
    }
}

/// True iff D2D links can reduce the minimum pipelined NDT at all:
/// r_f < 1 and (1 - r_f)/(2 + r_f) <= mu < 1 - r_f.
pub fn is_d2d_beneficial(mu: f64, r_f: f64) -> bool {
    r_f < 1.0 && mu >= (1.0 - r_f) / (2.0 + r_f) && mu < 1.0 - r_f
}

/// One knot of the NDT-vs-mu curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub mu: f64,
    pub ndt: Ndt,
}

/// Piecewise-linear minimum pipelined NDT as a function of mu at fixed rates,
/// represented by its knots. Continuous and non-increasing; the final knot
/// sits at NDT 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakpointCurve {
    pub knots: Vec<Knot>,
    /// Slope of the segment between knots i and i+1.
    pub slopes: Vec<f64>,
}

impl BreakpointCurve {
    /// Linear interpolation between the enclosing knots.
    pub fn eval(&self, mu: f64) -> f64 {
        let first = self.knots.first().expect("curve has knots");
        if mu <= first.mu {
            return first.ndt.value();
        }
        for (i, pair) in self.knots.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            if mu <= b.mu {
                return a.ndt.value() + self.slopes[i] * (mu - a.mu);
            }
        }
        self.knots.last().unwrap().ndt.value()
    }
}

/// Knots of the minimum pipelined NDT over mu in [0, 1] for fixed rates with
/// 0 < r_f < 1. The knot set splits on r_d < (1 - r_f)/2 versus
/// r_d >= (1 - r_f)/2:
///
/// * small r_d: (0, 1/r_f), ((1 - r_f + r_d)/(2 + r_f + 2 r_d),
///   3/(2 + r_f + 2 r_d)), (1 - r_f - r_d, 1), (1, 1);
/// * large r_d: (0, 1/r_f), ((1 - r_f)/2, 1), (1, 1).
pub fn ndt_vs_mu_breakpoints(r_f: f64, r_d: f64) -> Result<BreakpointCurve, AnalysisError> {
    if !(r_f > 0.0 && r_f < 1.0) {
        return Err(AnalysisError::UnsupportedRange(r_f));
    }
    let mut knots = vec![Knot {
        mu: 0.0,
        ndt: Ndt(1.0 / r_f),
    }];
    if r_d < (1.0 - r_f) / 2.0 {
        let crossing = (1.0 - r_f + r_d) / (2.0 + r_f + 2.0 * r_d);
        knots.push(Knot {
            mu: crossing,
            ndt: Ndt(3.0 / (2.0 + r_f + 2.0 * r_d)),
        });
        knots.push(Knot {
            mu: 1.0 - r_f - r_d,
            ndt: Ndt(1.0),
        });
    } else {
        knots.push(Knot {
            mu: (1.0 - r_f) / 2.0,
            ndt: Ndt(1.0),
        });
    }
    knots.push(Knot {
        mu: 1.0,
        ndt: Ndt(1.0),
    });
    let slopes = knots
        .windows(2)
        .map(|pair| {
            let (a, b) = (pair[0], pair[1]);
            if b.mu > a.mu {
                (b.ndt.value() - a.ndt.value()) / (b.mu - a.mu)
            } else {
                0.0
            }
        })
        .collect();
    Ok(BreakpointCurve { knots, slopes })
}

/// Upper bound on the serial-over-pipelined NDT ratio: 2 + mu for low cache
/// capacity (mu < 1/2), 2 - mu for high cache capacity (mu >= 1/2).
pub fn pipelining_gain_bound(mu: f64) -> f64 {
    if mu < 0.5 {
        2.0 + mu
    } else {
        2.0 - mu
    }
}

/// Conditions under which the pipelining-gain bound holds with equality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainEqualityConditions {
    /// mu < 1/2: r_f = 1 - 2 mu exactly and mu <= r_d <= 1.
    LowCache {
        r_f: f64,
        r_d_min: f64,
        r_d_max: f64,
    },
    /// mu >= 1/2: r_f <= 1, r_d <= 1, and r_f + r_d >= 1 - mu.
    HighCache {
        r_f_max: f64,
        r_d_max: f64,
        sum_min: f64,
    },
}

pub fn gain_equality_conditions(mu: f64) -> GainEqualityConditions {
    if mu < 0.5 {
        GainEqualityConditions::LowCache {
            r_f: 1.0 - 2.0 * mu,
            r_d_min: mu,
            r_d_max: 1.0,
        }
    } else {
        GainEqualityConditions::HighCache {
            r_f_max: 1.0,
            r_d_max: 1.0,
            sum_min: 1.0 - mu,
        }
    }
}

/// Constructive serial upper bound from an optimal pipelined policy: running
/// the same fronthaul, edge, and D2D strategies back to back costs at most
/// three times the pipelined NDT.
pub fn serialization_upper_bound(pipelined: Ndt) -> Ndt {
    Ndt(3.0 * pipelined.value())
}
