//! Noise primitives, clamping, the Laplace mechanism and the budget ledger.
//!
//! Samplers use textbook floating-point arithmetic. They are not hardened
//! against floating-point side channels (no snapping); the toolkit measures
//! utility and overhead, not attack resistance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::NoiseSource;

/// Relative slack when comparing cumulative spends against the total, so
/// that e.g. two halves of ε fit in a budget of ε.
const SPEND_SLACK: f64 = 1e-12;

/// A privacy budget `(ε, δ)`. `δ = 0` is pure ε-DP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct PrivacyParams {
    epsilon: f64,
    delta: f64,
}

#[derive(Deserialize)]
struct RawParams {
    epsilon: f64,
    delta: f64,
}

impl TryFrom<RawParams> for PrivacyParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        PrivacyParams::new(raw.epsilon, raw.delta)
    }
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!("ε must be positive and finite, got {epsilon}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::invalid(format!("δ must lie in [0, 1), got {delta}")));
        }
        Ok(PrivacyParams { epsilon, delta })
    }

    /// Pure ε-DP budget.
    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Amount of budget consumed. Unlike [`PrivacyParams`] it may be zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Spend {
    pub epsilon: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub label: String,
    pub epsilon: f64,
    pub delta: f64,
}

/// Sequential-composition ledger for one run: spends add up and may never
/// exceed the total. A charge either lands in full or not at all.
#[derive(Debug, Clone)]
pub struct BudgetLedger {
    total: PrivacyParams,
    spent: Spend,
    entries: Vec<LedgerEntry>,
}

impl BudgetLedger {
    pub fn new(total: PrivacyParams) -> Self {
        BudgetLedger {
            total,
            spent: Spend::default(),
            entries: Vec::new(),
        }
    }

    pub fn total(&self) -> PrivacyParams {
        self.total
    }

    pub fn spent(&self) -> Spend {
        self.spent
    }

    pub fn remaining(&self) -> Spend {
        Spend {
            epsilon: (self.total.epsilon - self.spent.epsilon).max(0.0),
            delta: (self.total.delta - self.spent.delta).max(0.0),
        }
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    fn fits(&self, epsilon: f64, delta: f64) -> bool {
        let eps_cap = self.total.epsilon * (1.0 + SPEND_SLACK);
        let delta_cap = self.total.delta * (1.0 + SPEND_SLACK);
        self.spent.epsilon + epsilon <= eps_cap && self.spent.delta + delta <= delta_cap
    }

    /// Fails without recording anything if the spend does not fit.
    pub fn ensure_available(&self, epsilon: f64, delta: f64) -> Result<()> {
        if self.fits(epsilon, delta) {
            Ok(())
        } else {
            let rem = self.remaining();
            Err(Error::BudgetExhausted {
                requested_epsilon: epsilon,
                requested_delta: delta,
                remaining_epsilon: rem.epsilon,
                remaining_delta: rem.delta,
            })
        }
    }

    pub fn charge(&mut self, label: impl Into<String>, epsilon: f64, delta: f64) -> Result<()> {
        if !(epsilon >= 0.0 && epsilon.is_finite() && delta >= 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("invalid spend ε={epsilon}, δ={delta}")));
        }
        self.ensure_available(epsilon, delta)?;
        self.spent.epsilon += epsilon;
        self.spent.delta += delta;
        self.entries.push(LedgerEntry {
            label: label.into(),
            epsilon,
            delta,
        });
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Laplace,
    Gaussian,
}

/// A zero-mean noise distribution: Laplace with scale `b`, or Gaussian with
/// standard deviation `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    family: NoiseFamily,
    scale: f64,
}

impl NoiseSpec {
    pub fn new(family: NoiseFamily, scale: f64) -> Result<Self> {
        check_scale(scale, "noise scale")?;
        Ok(NoiseSpec { family, scale })
    }

    /// Laplace noise calibrated to `sensitivity / ε`.
    pub fn laplace_for(sensitivity: f64, epsilon: f64) -> Result<Self> {
        check_scale(sensitivity, "sensitivity")?;
        check_scale(epsilon, "ε")?;
        Self::new(NoiseFamily::Laplace, sensitivity / epsilon)
    }

    pub fn family(&self) -> NoiseFamily {
        self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn variance(&self) -> f64 {
        match self.family {
            NoiseFamily::Laplace => 2.0 * self.scale * self.scale,
            NoiseFamily::Gaussian => self.scale * self.scale,
        }
    }

    pub fn sample<R: NoiseSource + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            NoiseFamily::Laplace => laplace_draw(self.scale, rng),
            NoiseFamily::Gaussian => self.scale * rng.standard_normal(),
        }
    }
}

fn check_scale(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must be positive and finite, got {v}")))
    }
}

// Inverse CDF on u = U - 1/2 with U uniform on (0, 1).
fn laplace_draw<R: NoiseSource + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let u = rng.uniform_open() - 0.5;
    if u == 0.0 {
        return 0.0;
    }
    -scale * u.signum() * (-2.0 * u.abs()).ln_1p()
}

/// One draw from Laplace(0, `scale`).
pub fn laplace_sample<R: NoiseSource + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    check_scale(scale, "Laplace scale")?;
    Ok(laplace_draw(scale, rng))
}

/// One draw from Normal(0, `sigma`²).
pub fn gaussian_sample<R: NoiseSource + ?Sized>(sigma: f64, rng: &mut R) -> Result<f64> {
    check_scale(sigma, "Gaussian σ")?;
    Ok(sigma * rng.standard_normal())
}

pub fn clamp(value: f64, lower: f64, upper: f64) -> Result<f64> {
    if !(lower <= upper) {
        return Err(Error::invalid(format!("inverted bounds [{lower}, {upper}]")));
    }
    Ok(value.max(lower).min(upper))
}

/// Adds Laplace(`sensitivity / ε`) noise to `true_value`, charging `ε` to
/// the ledger. Only pure budgets (`δ = 0`) are accepted.
pub fn laplace_mechanism<R: NoiseSource + ?Sized>(
    true_value: f64,
    sensitivity: f64,
    budget: PrivacyParams,
    ledger: &mut BudgetLedger,
    rng: &mut R,
) -> Result<f64> {
    laplace_mechanism_labeled("laplace", true_value, sensitivity, budget, ledger, rng)
}

pub(crate) fn laplace_mechanism_labeled<R: NoiseSource + ?Sized>(
    label: &str,
    true_value: f64,
    sensitivity: f64,
    budget: PrivacyParams,
    ledger: &mut BudgetLedger,
    rng: &mut R,
) -> Result<f64> {
    if budget.delta != 0.0 {
        return Err(Error::invalid("the Laplace mechanism takes a pure budget (δ = 0)"));
    }
    let noise = NoiseSpec::laplace_for(sensitivity, budget.epsilon)?;
    ledger.charge(label, budget.epsilon, 0.0)?;
    Ok(true_value + noise.sample(rng))
}
