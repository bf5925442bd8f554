//! Exact cone-angle data.
//!
//! An angle is stored as the reduced fraction `num/den` of a full turn, so the
//! value in radians is `2π·num/den`. All group-order arithmetic is integer.

use std::cmp::Ordering;
use std::f64::consts::TAU;
use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::surgery::SurgeryKind;
use crate::{Error, Result};

/// A rational multiple of 2π.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i64; 2]", into = "[i64; 2]")]
pub struct RationalAngle {
    num: i64,
    den: i64,
}

impl RationalAngle {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Input("angle denominator is zero".into()));
        }
        let r = Ratio::new(num, den);
        Ok(RationalAngle { num: *r.numer(), den: *r.denom() })
    }

    pub fn from_turns(r: Ratio<i64>) -> Self {
        RationalAngle { num: *r.numer(), den: *r.denom() }
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    /// The angle as a fraction of a full turn.
    pub fn turns(&self) -> Ratio<i64> {
        Ratio::new_raw(self.num, self.den)
    }

    /// The angle in radians.
    pub fn radians(&self) -> f64 {
        TAU * self.num as f64 / self.den as f64
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// True when the angle is an integer multiple of 2π.
    pub fn is_full_turn_multiple(&self) -> bool {
        self.den == 1
    }

    /// Parse `a/b` (or a bare integer) as `2π·a/b`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Input(format!("cannot parse angle '{s}'"));
        match s.split_once('/') {
            Some((a, b)) => {
                let a = a.trim().parse::<i64>().map_err(|_| bad())?;
                let b = b.trim().parse::<i64>().map_err(|_| bad())?;
                if b <= 0 {
                    return Err(bad());
                }
                RationalAngle::new(a, b)
            }
            None => RationalAngle::new(s.parse::<i64>().map_err(|_| bad())?, 1),
        }
    }
}

impl TryFrom<[i64; 2]> for RationalAngle {
    type Error = Error;
    fn try_from(v: [i64; 2]) -> Result<Self> {
        RationalAngle::new(v[0], v[1])
    }
}

impl From<RationalAngle> for [i64; 2] {
    fn from(a: RationalAngle) -> Self {
        [a.num, a.den]
    }
}

impl PartialOrd for RationalAngle {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RationalAngle {
    fn cmp(&self, other: &Self) -> Ordering {
        self.turns().cmp(&other.turns())
    }
}

impl fmt::Display for RationalAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "2π·{}", self.num)
        } else {
            write!(f, "2π·{}/{}", self.num, self.den)
        }
    }
}

/// Genus plus cone angles, sorted in decreasing order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngleDatum {
    pub genus: u32,
    pub angles: Vec<RationalAngle>,
    /// `perm[i]` is the input position of `angles[i]`.
    #[serde(default)]
    pub perm: Vec<usize>,
}

impl AngleDatum {
    /// Sorts the angles in decreasing order, ties broken by input position.
    pub fn new(genus: u32, angles: Vec<RationalAngle>) -> Self {
        let mut idx: Vec<usize> = (0..angles.len()).collect();
        idx.sort_by(|&a, &b| angles[b].cmp(&angles[a]).then(a.cmp(&b)));
        let sorted = idx.iter().map(|&i| angles[i]).collect();
        AngleDatum { genus, angles: sorted, perm: idx }
    }

    pub fn from_pairs(genus: u32, pairs: &[(i64, i64)]) -> Result<Self> {
        let angles = pairs
            .iter()
            .map(|&(a, b)| RationalAngle::new(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(AngleDatum::new(genus, angles))
    }

    pub fn n(&self) -> usize {
        self.angles.len()
    }

    pub fn radians(&self) -> Vec<f64> {
        self.angles.iter().map(|a| a.radians()).collect()
    }

    /// Hypothesis (HYP): no angle is a multiple of 2π, and all are positive.
    pub fn check_hyp(&self) -> Result<()> {
        for a in &self.angles {
            if a.num <= 0 {
                return Err(Error::Precondition(format!("non-positive cone angle {a}")));
            }
            if a.is_full_turn_multiple() {
                return Err(Error::Precondition(format!("cone angle {a} is a multiple of 2π")));
            }
        }
        Ok(())
    }

    /// Checks Gauss–Bonnet and the main regime (g=0 with all angles below
    /// 2π, or g=1 with exactly θ₁ in (2π,4π)).
    pub fn check_admissible(&self) -> Result<()> {
        self.check_hyp()?;
        if !gauss_bonnet_residual(self).is_zero() {
            return Err(Error::Precondition("Gauss–Bonnet fails".into()));
        }
        let one = Ratio::from_integer(1);
        let two = Ratio::from_integer(2);
        match self.genus {
            0 => {
                if self.angles.iter().any(|a| a.turns() >= one) {
                    return Err(Error::Precondition("genus 0 angles must be below 2π".into()));
                }
            }
            1 => {
                let t1 = self.angles[0].turns();
                if !(t1 > one && t1 < two) {
                    return Err(Error::Precondition("θ₁ must lie in (2π,4π)".into()));
                }
                if self.angles[1..].iter().any(|a| a.turns() >= one) {
                    return Err(Error::Precondition("θ₂..θₙ must be below 2π".into()));
                }
            }
            g => return Err(Error::Precondition(format!("genus {g} is outside the main regime"))),
        }
        Ok(())
    }
}

/// Σ(2π − θᵢ) − 2π(2 − 2g), in units of 2π.
pub fn gauss_bonnet_residual(datum: &AngleDatum) -> RationalAngle {
    let mut s = Ratio::from_integer(0i64);
    for a in &datum.angles {
        s += Ratio::from_integer(1) - a.turns();
    }
    s -= Ratio::from_integer(2 - 2 * datum.genus as i64);
    RationalAngle::from_turns(s)
}

/// Order of the cyclic group generated by the `e^{iθᵢ}`.
pub fn minimal_group_order(datum: &AngleDatum) -> Result<u64> {
    datum.check_hyp()?;
    Ok(datum.angles.iter().fold(1i64, |m, a| m.lcm(&a.den)) as u64)
}

/// The label (θ, M) of a leaf F_θ(M).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafLabel {
    #[serde(rename = "angles", with = "datum_angles")]
    pub datum: AngleDatum,
    #[serde(rename = "M")]
    pub big_m: u64,
    #[serde(skip)]
    pub m: u64,
    /// θ₁ = 2π(1 + p/m); `None` in genus 0.
    #[serde(skip)]
    pub p: Option<u64>,
    #[serde(skip)]
    pub q: u64,
}

mod datum_angles {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &AngleDatum, s: S) -> std::result::Result<S::Ok, S::Error> {
        d.angles.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<AngleDatum, D::Error> {
        let angles = Vec::<RationalAngle>::deserialize(d)?;
        Ok(AngleDatum::new(1, angles))
    }
}

impl LeafLabel {
    pub fn n(&self) -> usize {
        self.datum.n()
    }

    /// Recompute the derived fields, e.g. after deserialisation.
    pub fn refresh(self) -> Result<Self> {
        leaf_label(self.datum, self.big_m)
    }
}

/// Builds the label of F_θ(M). Genus-0 data are accepted with `p = None`.
pub fn leaf_label(datum: AngleDatum, big_m: u64) -> Result<LeafLabel> {
    if big_m == 0 {
        return Err(Error::Input("M must be positive".into()));
    }
    datum.check_admissible()?;
    let m = minimal_group_order(&datum)?;
    let p = if datum.genus == 1 {
        let x = (datum.angles[0].turns() - Ratio::from_integer(1)) * Ratio::from_integer(m as i64);
        debug_assert!(x.is_integer());
        Some(x.to_integer() as u64)
    } else {
        None
    };
    Ok(LeafLabel { datum, big_m, m, p, q: m * big_m })
}

/// A surgery that reduces one leaf to another.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionWitness {
    pub parent: LeafLabel,
    pub child: LeafLabel,
    pub kind: SurgeryKind,
}

impl ReductionWitness {
    pub fn new(parent: LeafLabel, child: LeafLabel, kind: SurgeryKind) -> Result<Self> {
        if parent.q % child.q != 0 {
            return Err(Error::Precondition(format!(
                "child holonomy order {} does not divide {}",
                child.q, parent.q
            )));
        }
        Ok(ReductionWitness { parent, child, kind })
    }
}

/// Parse a comma separated list of fractions of 2π.
pub fn parse_angle_list(s: &str) -> Result<Vec<RationalAngle>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(RationalAngle::parse).collect()
}

/// Genus implied by Gauss–Bonnet, if it is a non-negative integer.
pub fn implied_genus(angles: &[RationalAngle]) -> Option<u32> {
    let curv: Ratio<i64> = angles.iter().map(|a| Ratio::from_integer(1) - a.turns()).sum();
    // Σ(1 − tᵢ) = 2 − 2g
    let two_g = Ratio::from_integer(2) - curv;
    if !two_g.is_integer() {
        return None;
    }
    let t = two_g.to_integer();
    if t < 0 || t % 2 != 0 {
        return None;
    }
    Some((t / 2) as u32)
}
