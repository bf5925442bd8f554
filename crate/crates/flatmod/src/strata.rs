//! Codimension-one strata of F_θ(M), the one-dimensional counts and the
//! arithmetic-lattice search.

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::angles::{leaf_label, minimal_group_order, AngleDatum, LeafLabel, RationalAngle};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StratumKind {
    P,
    C,
    K,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumRecord {
    pub kind: StratumKind,
    pub datum: AngleDatum,
    /// M′ of the reduced leaf (C-strata).
    pub child_m: Option<u64>,
    /// (r′, r″) with r′ + r″ = pM (P-strata).
    pub decomposition: Option<(u64, u64)>,
    /// Colliding pair, 1-based (C-strata).
    pub pair: Option<(usize, usize)>,
    pub angle: RationalAngle,
    pub multiplicity: u64,
}

/// A cone point entry of a one-dimensional leaf.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConePoints {
    /// `None` for the exceptional point of θ=(3π,π), M=3, which does not
    /// come from a decomposition of pM.
    pub angle: Option<RationalAngle>,
    pub count: u64,
    pub decomposition: Option<(u64, u64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeafReport {
    pub label: LeafLabel,
    pub m: u64,
    pub p: Option<u64>,
    pub q: u64,
    pub p_strata: Vec<StratumRecord>,
    pub c_strata: Vec<StratumRecord>,
    pub k_strata: Vec<StratumRecord>,
    pub cone_points: Option<Vec<ConePoints>>,
    pub cusps: Option<u64>,
    pub punctures: Option<u64>,
    pub arithmetic_lattice: bool,
}

/// Euler's totient.
pub fn totient(mut n: u64) -> u64 {
    if n == 0 {
        return 0;
    }
    let mut r = n;
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            while n % d == 0 {
                n /= d;
            }
            r -= r / d;
        }
        d += 1;
    }
    if n > 1 {
        r -= r / n;
    }
    r
}

fn divisors(n: u64) -> Vec<u64> {
    (1..=n).filter(|d| n % d == 0).collect()
}

fn turns(a: u64, b: u64) -> RationalAngle {
    RationalAngle::from_turns(Ratio::new(a as i64, b as i64))
}

fn require_torus(label: &LeafLabel) -> Result<u64> {
    match (label.datum.genus, label.p) {
        (1, Some(p)) => Ok(p),
        _ => Err(Error::Precondition("expected a genus-1 leaf".into())),
    }
}

/// θᵢ = 2π kᵢ/m for i ≥ 2.
fn tail_numerators(label: &LeafLabel) -> Vec<u64> {
    label.datum.angles[1..]
        .iter()
        .map(|a| (a.turns() * Ratio::from_integer(label.m as i64)).to_integer() as u64)
        .collect()
}

/// One record for each decomposition pM = r′ + r″ with r′ ≤ r″.
pub fn p_strata(label: &LeafLabel) -> Result<Vec<StratumRecord>> {
    let p = require_torus(label)?;
    let pm = p * label.big_m;
    let q = label.q;
    let tail = tail_numerators(label);
    let mut out = Vec::new();
    for r1 in 1..=pm / 2 {
        let r2 = pm - r1;
        let mut angles = vec![turns(r1, q), turns(r2, q)];
        angles.extend_from_slice(&label.datum.angles[1..]);
        let datum = AngleDatum::new(0, angles);
        let g = tail.iter().fold(r1.gcd(&r2).gcd(&q), |g, k| g.gcd(&(k * label.big_m)));
        out.push(StratumRecord {
            kind: StratumKind::P,
            datum,
            child_m: None,
            decomposition: Some((r1, r2)),
            pair: None,
            angle: turns(r1.lcm(&r2), q),
            multiplicity: totient(g),
        });
    }
    Ok(out)
}

/// Strata where the points k and l (1-based) collide.
pub fn c_strata(label: &LeafLabel, pair: (usize, usize)) -> Result<Vec<StratumRecord>> {
    require_torus(label)?;
    let n = label.n();
    if n < 3 {
        return Err(Error::Precondition("collisions need n ≥ 3".into()));
    }
    let (k, l) = pair;
    if k == l || k == 0 || l == 0 || k > n || l > n {
        return Err(Error::Input(format!("bad pair ({k},{l}) for n={n}")));
    }
    let a = label.datum.angles[k - 1].turns() + label.datum.angles[l - 1].turns();
    let one = Ratio::from_integer(1);
    if a <= one {
        return Ok(Vec::new());
    }
    let new = RationalAngle::from_turns(a - one);
    if new.is_full_turn_multiple() {
        return Ok(Vec::new());
    }
    let mut angles: Vec<RationalAngle> = label
        .datum
        .angles
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k - 1 && *i != l - 1)
        .map(|(_, a)| *a)
        .collect();
    angles.push(new);
    let datum = AngleDatum::new(1, angles);
    let m1 = minimal_group_order(&datum)?;
    let ratio = label.m / m1;
    let target = label.big_m * ratio;
    let out = divisors(target)
        .into_iter()
        .filter(|d| d.lcm(&ratio) == target)
        .map(|mm| StratumRecord {
            kind: StratumKind::C,
            datum: datum.clone(),
            child_m: Some(mm),
            decomposition: None,
            pair: Some((k.min(l), k.max(l))),
            angle: new,
            multiplicity: 1,
        })
        .collect();
    Ok(out)
}

/// All C-strata over every admissible pair.
pub fn all_c_strata(label: &LeafLabel) -> Result<Vec<StratumRecord>> {
    let n = label.n();
    if n < 3 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for k in 1..=n {
        for l in k + 1..=n {
            out.extend(c_strata(label, (k, l))?);
        }
    }
    Ok(out)
}

pub fn k_strata(label: &LeafLabel) -> Result<Vec<StratumRecord>> {
    require_torus(label)?;
    if label.n() != 3 || label.big_m != 1 {
        return Ok(Vec::new());
    }
    Ok(vec![StratumRecord {
        kind: StratumKind::K,
        datum: AngleDatum::new(1, Vec::new()),
        child_m: None,
        decomposition: None,
        pair: None,
        angle: turns(1, 2),
        multiplicity: 1,
    }])
}

fn require_n2(label: &LeafLabel) -> Result<u64> {
    let p = require_torus(label)?;
    if label.n() != 2 {
        return Err(Error::Precondition("one-dimensional counts need n = 2".into()));
    }
    Ok(p)
}

fn is_3pi_pi(label: &LeafLabel) -> bool {
    label.datum.angles == [turns(3, 2), turns(1, 2)]
}

/// Cone points of a one-dimensional leaf, one entry per decomposition.
pub fn dim1_cone_points(label: &LeafLabel) -> Result<Vec<ConePoints>> {
    let p = require_n2(label)?;
    let pm = p * label.big_m;
    let q = label.q;
    let mut out = Vec::new();
    for r1 in 1..=pm / 2 {
        let r2 = pm - r1;
        let phi = totient(r1.gcd(&r2).gcd(&q));
        let l = r1.lcm(&r2);
        let (angle, count) = if r1 == r2 {
            if phi >= 2 {
                (turns(l, q), phi / 2)
            } else {
                (turns(l, 2 * q), 1)
            }
        } else {
            (turns(l, q), phi)
        };
        out.push(ConePoints { angle: Some(angle), count, decomposition: Some((r1, r2)) });
    }
    if is_3pi_pi(label) && label.big_m == 3 {
        out.push(ConePoints { angle: None, count: 1, decomposition: None });
    }
    Ok(out)
}

/// Unordered coprime decompositions of pM.
pub fn dim1_cusps(label: &LeafLabel) -> Result<u64> {
    let p = require_n2(label)?;
    let pm = p * label.big_m;
    Ok((1..=pm / 2).filter(|&r| r.gcd(&(pm - r)) == 1).count() as u64)
}

/// Number of punctures of F_{(3π,π)}(M).
pub fn dim1_punctures_3pi_pi(big_m: u64) -> Result<u64> {
    match big_m {
        0 | 1 => Err(Error::Input("M must be at least 2".into())),
        2 => Ok(2),
        3 | 4 => Ok(3),
        _ => {
            let s: u64 = divisors(big_m).iter().map(|&d| totient(d) * totient(big_m / d)).sum();
            Ok(s / 2)
        }
    }
}

pub fn arithmetic_lattice_flag(label: &LeafLabel) -> bool {
    matches!(label.q, 1 | 2 | 3 | 4 | 6)
}

pub fn leaf_report(label: &LeafLabel) -> Result<LeafReport> {
    let p_str = p_strata(label)?;
    let c_str = all_c_strata(label)?;
    let k_str = k_strata(label)?;
    let (cone_points, cusps, punctures) = if label.n() == 2 {
        let cp = dim1_cone_points(label)?;
        let cu = dim1_cusps(label)?;
        let total = cp.iter().map(|c| c.count).sum::<u64>() + cu;
        (Some(cp), Some(cu), Some(total))
    } else {
        (None, None, None)
    };
    Ok(LeafReport {
        label: label.clone(),
        m: label.m,
        p: label.p,
        q: label.q,
        p_strata: p_str,
        c_strata: c_str,
        k_strata: k_str,
        cone_points,
        cusps,
        punctures,
        arithmetic_lattice: arithmetic_lattice_flag(label),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table1Row {
    pub n: usize,
    pub k: Vec<u64>,
    pub m: u64,
    #[serde(rename = "M")]
    pub big_m: u64,
    pub label: String,
}

/// Rows of the published table, in printed order.
const PUBLISHED: &[(&[u64], u64, u64, &str)] = &[
    (&[5, 2, 2], 3, 1, "a"),
    (&[6, 3, 3], 4, 1, "b"),
    (&[8, 5, 5], 6, 1, "c"),
    (&[7, 3, 2], 4, 1, "d"),
    (&[9, 5, 4], 6, 1, "e"),
    (&[10, 5, 3], 6, 1, "f"),
    (&[11, 5, 2], 6, 1, "g"),
    (&[11, 4, 3], 6, 1, "h"),
    (&[5, 2, 2], 3, 2, "i"),
    (&[7, 3, 3, 3], 4, 1, "j"),
    (&[9, 5, 5, 5], 6, 1, "k"),
    (&[10, 5, 5, 4], 6, 1, "l"),
    (&[11, 5, 4, 4], 6, 1, "m"),
    (&[10, 5, 5, 5, 5], 6, 1, "n"),
    (&[11, 5, 5, 5, 4], 6, 1, "o"),
    (&[11, 5, 5, 5, 5, 5], 6, 1, "p"),
];

fn tuples(n: usize, m: u64, acc: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
    if acc.len() == n {
        out.push(acc.clone());
        return;
    }
    let (lo, hi) = match acc.len() {
        0 => (m + 1, 2 * m - 1),
        1 => (1, m - 1),
        i => (1, acc[i - 1]),
    };
    for k in (lo..=hi).rev() {
        acc.push(k);
        tuples(n, m, acc, out);
        acc.pop();
    }
}

/// Every (θ, M) with genus 1, n ≥ 3 and holonomy order mM ∈ {3, 4, 6}.
///
/// Rows matching the published table carry its letter, others get `-`.
pub fn table1_search() -> Vec<Table1Row> {
    let mut found = Vec::new();
    for q in [3u64, 4, 6] {
        for m in divisors(q) {
            if m < 2 {
                continue;
            }
            let big_m = q / m;
            // k₁ < 2m and kᵢ ≤ m−1 force n ≤ m.
            for n in 3..=m as usize {
                let mut cands = Vec::new();
                tuples(n, m, &mut Vec::new(), &mut cands);
                for k in cands {
                    if k.iter().sum::<u64>() != n as u64 * m {
                        continue;
                    }
                    if k.iter().fold(m, |g, x| g.gcd(x)) != 1 {
                        continue;
                    }
                    found.push((n, k, m, big_m));
                }
            }
        }
    }
    let pos = |k: &[u64], m: u64, mm: u64| PUBLISHED.iter().position(|r| r.0 == k && r.1 == m && r.2 == mm);
    found.sort_by(|a, b| {
        let pa = pos(&a.1, a.2, a.3).unwrap_or(usize::MAX);
        let pb = pos(&b.1, b.2, b.3).unwrap_or(usize::MAX);
        a.0.cmp(&b.0).then(pa.cmp(&pb)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)).then(b.1.cmp(&a.1))
    });
    found.dedup();
    found
        .into_iter()
        .map(|(n, k, m, big_m)| {
            let label = pos(&k, m, big_m).map(|i| PUBLISHED[i].3).unwrap_or("-").to_string();
            Table1Row { n, k, m, big_m, label }
        })
        .collect()
}

/// CSV rendering with header `n,k,m,M,label`; the tuple is quoted.
pub fn table1_csv(rows: &[Table1Row]) -> String {
    let mut s = String::from("n,k,m,M,label\n");
    for r in rows {
        let k: Vec<String> = r.k.iter().map(|x| x.to_string()).collect();
        s.push_str(&format!("{},\"({})\",{},{},{}\n", r.n, k.join(","), r.m, r.big_m, r.label));
    }
    s
}

/// The leaf label of a table row.
pub fn table1_label(row: &Table1Row) -> Result<LeafLabel> {
    let angles = row
        .k
        .iter()
        .map(|&k| RationalAngle::new(k as i64, row.m as i64))
        .collect::<Result<Vec<_>>>()?;
    leaf_label(AngleDatum::new(1, angles), row.big_m)
}
