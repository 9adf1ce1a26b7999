//! Mutual information at a stage: the finite `I_t(a:b)`, the `i`-sum lower
//! bound for prefixes, the sup bound, and the conservation harness.
//!
//! All quantities are read from bounds at one common stage, including the
//! `I(x:y)` inside the `i`-sum. `K_t` are upper bounds, so `I_t` is an
//! estimate with no controlled sign of error.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dyadic::{rarity_of, Dyadic, ExtInt};
use crate::elemfn::Lattice;
use crate::enumerator::{DiscreteBound, Stage};
use crate::error::Result;
use crate::machine::{run_prefix, MachineConfig};
use crate::operator::OperatorSpec;
use crate::prefix::{decode_pair, encode_pair, Prefix};
use crate::randomness::{deficiency, deficiency_semimeasure, lambda_test, regularize, TestValue};
use crate::semimeasure::SemimeasureTable;

/// Default size cap of the `i`-sum: strings of at most 10 bits.
pub const DEFAULT_CAP: usize = 10;

/// Unconditional bound plus conditional bounds at the same stage, built on
/// demand and cached by condition.
#[derive(Debug)]
pub struct InfoContext {
    m: DiscreteBound,
    /// Every `(x, y, I_t(x:y))` whose pair code has mass, length-lex by code.
    pairs: Vec<(Prefix, Prefix, ExtInt)>,
    cond: Mutex<BTreeMap<Prefix, Arc<DiscreteBound>>>,
}

impl InfoContext {
    pub fn new(m: DiscreteBound) -> Self {
        let pairs = m
            .raw_masses()
            .keys()
            .filter_map(|z| {
                let (x, y) = decode_pair(z)?;
                let i = info_from(&m, &x, &y).i;
                Some((x, y, i))
            })
            .collect();
        InfoContext {
            m,
            pairs,
            cond: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn at_stage(t: usize) -> Result<Self> {
        Ok(Self::new(DiscreteBound::at_stage(t)?))
    }

    pub fn stage(&self) -> Stage {
        self.m.stage()
    }

    pub fn unconditional(&self) -> &DiscreteBound {
        &self.m
    }

    /// `m_t(·|y)` at the context stage.
    pub fn conditional(&self, y: &Prefix) -> Arc<DiscreteBound> {
        if let Some(b) = self.cond.lock().unwrap().get(y) {
            return b.clone();
        }
        let b = Arc::new(self.build(y));
        self.cond.lock().unwrap().entry(y.clone()).or_insert(b).clone()
    }

    /// Builds every missing conditional bound, in parallel.
    pub fn prefetch<'a>(&self, ys: impl IntoIterator<Item = &'a Prefix>) {
        let missing: Vec<Prefix> = {
            let have = self.cond.lock().unwrap();
            let mut v: Vec<Prefix> = ys.into_iter().filter(|y| !have.contains_key(*y)).cloned().collect();
            v.sort();
            v.dedup();
            v
        };
        let built: Vec<_> = missing.into_par_iter().map(|y| {
            let b = Arc::new(self.build(&y));
            (y, b)
        }).collect();
        self.cond.lock().unwrap().extend(built);
    }

    fn build(&self, y: &Prefix) -> DiscreteBound {
        let mut b = DiscreteBound::new(MachineConfig::conditional(y.clone()));
        b.advance_to(self.stage().0);
        b
    }
}

/// `I_t(a:b)` with its three components.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FiniteInfo {
    pub stage: usize,
    pub k_a: ExtInt,
    pub k_b: ExtInt,
    pub k_ab: ExtInt,
    /// `K_t(a) + K_t(b) − K_t(a,b)`: `+∞` when only the pair is described,
    /// `−∞` when only the pair is missing, and `+∞` when all three are.
    pub i: ExtInt,
}

fn info_from(m: &DiscreteBound, a: &Prefix, b: &Prefix) -> FiniteInfo {
    let k_a = m.complexity(a);
    let k_b = m.complexity(b);
    let k_ab = m.complexity(&encode_pair(a, b));
    let i = k_a
        .add(k_b)
        .and_then(|s| s.sub(k_ab))
        .unwrap_or(ExtInt::PosInf);
    FiniteInfo {
        stage: m.stage().0,
        k_a,
        k_b,
        k_ab,
        i,
    }
}

pub fn info_finite(a: &Prefix, b: &Prefix, m: &DiscreteBound) -> FiniteInfo {
    info_from(m, a, b)
}

/// `‖⌈Σ m(x|a) m(y|b) 2^I(x:y)⌉‖ − 2` over `|x|, |y| <= cap`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LowerBound {
    pub stage: usize,
    pub cap: usize,
    pub value: ExtInt,
    #[serde(skip)]
    pub sum: BigRational,
    /// Terms with mass on both sides and a finite `I`.
    pub terms: usize,
    /// Terms dropped because `I_t(x:y)` is `+∞` (pair described, a part not).
    pub unbounded: usize,
}

/// Pairs `(x, y)` with `K_t(x, y) = ∞` have `I = −∞` and contribute nothing,
/// so the sum runs over the described pair codes only.
pub fn info_lower_bound(a: &Prefix, b: &Prefix, ctx: &InfoContext, cap: usize) -> LowerBound {
    let ma = ctx.conditional(a);
    let mb = ctx.conditional(b);
    let mut sum = BigRational::zero();
    let (mut terms, mut unbounded) = (0, 0);
    for (x, y, i) in &ctx.pairs {
        if x.len() > cap || y.len() > cap {
            continue;
        }
        let (px, py) = (ma.mass(x), mb.mass(y));
        if px.is_zero() || py.is_zero() {
            continue;
        }
        match i {
            ExtInt::Finite(v) => {
                let w = if *v >= 0 {
                    BigRational::from_integer(BigInt::one() << *v as usize)
                } else {
                    BigRational::new(BigInt::one(), BigInt::one() << v.unsigned_abs() as usize)
                };
                sum += (&px * &py).to_rational() * w;
                terms += 1;
            }
            ExtInt::PosInf => unbounded += 1,
            ExtInt::NegInf => {}
        }
    }
    LowerBound {
        stage: ctx.stage().0,
        cap,
        value: rarity_of(&sum),
        sum,
        terms,
        unbounded,
    }
}

/// `max_x (K_t(x) − K_t(x|a) − K_t(x|b))` and its first witness in
/// length-lex order; `−∞` when no `x` is described by all three bounds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SupBound {
    pub stage: usize,
    pub value: ExtInt,
    pub witness: Option<Prefix>,
}

pub fn info_sup_bound(a: &Prefix, b: &Prefix, ctx: &InfoContext) -> SupBound {
    let ma = ctx.conditional(a);
    let mb = ctx.conditional(b);
    let mut best: (ExtInt, Option<Prefix>) = (ExtInt::NegInf, None);
    for x in ma.raw_masses().keys() {
        let (kb, k) = (mb.complexity(x), ctx.m.complexity(x));
        if !kb.is_finite() || !k.is_finite() {
            continue;
        }
        let v = ExtInt::Finite(k.finite().unwrap() - ma.complexity(x).finite().unwrap() - kb.finite().unwrap());
        if v > best.0 {
            best = (v, Some(x.clone()));
        }
    }
    SupBound {
        stage: ctx.stage().0,
        value: best.0,
        witness: best.1,
    }
}

/// One row of an information report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InfoReport {
    pub a: Prefix,
    pub b: Prefix,
    pub finite: FiniteInfo,
    pub lower: LowerBound,
    pub sup: SupBound,
}

pub fn info_report(a: &Prefix, b: &Prefix, ctx: &InfoContext, cap: usize) -> InfoReport {
    InfoReport {
        a: a.clone(),
        b: b.clone(),
        finite: info_finite(a, b, &ctx.m),
        lower: info_lower_bound(a, b, ctx, cap),
        sup: info_sup_bound(a, b, ctx),
    }
}

/// Reports for a corpus, computed in parallel and returned in input order.
pub fn info_reports(corpus: &[(Prefix, Prefix)], ctx: &InfoContext, cap: usize) -> Vec<InfoReport> {
    ctx.prefetch(corpus.iter().flat_map(|(a, b)| [a, b]));
    corpus.par_iter().map(|(a, b)| info_report(a, b, ctx, cap)).collect()
}

/// Computable string maps exercised by the conservation harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Transform {
    Identity,
    DropLastBit,
    Duplicate,
    /// `a[..h] xor a[h..2h]` with `h = ⌊|a|/2⌋`; the middle bit of an odd
    /// length string is discarded.
    XorHalves,
}

impl Transform {
    pub const ALL: [Transform; 4] = [
        Transform::Identity,
        Transform::DropLastBit,
        Transform::Duplicate,
        Transform::XorHalves,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::DropLastBit => "drop-last-bit",
            Transform::Duplicate => "duplicate",
            Transform::XorHalves => "xor-halves",
        }
    }

    /// `None` where the map is undefined (dropping a bit from `ε`).
    pub fn apply(self, a: &Prefix) -> Option<Prefix> {
        match self {
            Transform::Identity => Some(a.clone()),
            Transform::DropLastBit => a.parent(),
            Transform::Duplicate => Some(a.concat(a)),
            Transform::XorHalves => {
                let h = a.len() / 2;
                let bits = a.bits();
                Some(Prefix::from_bits((0..h).map(|i| bits[i] ^ bits[h + i]).collect()))
            }
        }
    }
}

impl std::str::FromStr for Transform {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        Transform::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| crate::error::Error::Parse(format!("unknown transform {s:?}")))
    }
}

/// One sample of `I(A(a):b) <= I(a:b) + c_A`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConservationRecord {
    pub transform: Transform,
    pub a: Prefix,
    pub b: Prefix,
    pub stage: usize,
    pub before: ExtInt,
    pub after: ExtInt,
    /// `I(a:b) − I(A(a):b)` when both are finite.
    pub slack: Option<i64>,
    /// Why the sample was not evaluated.
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConservationSummary {
    pub transform: Transform,
    pub stage: usize,
    pub evaluated: usize,
    pub skipped: usize,
    /// `max(0, max −slack)`.
    pub constant: i64,
}

pub fn conservation_record(t: Transform, a: &Prefix, b: &Prefix, m: &DiscreteBound) -> ConservationRecord {
    let before = info_finite(a, b, m).i;
    let mut rec = ConservationRecord {
        transform: t,
        a: a.clone(),
        b: b.clone(),
        stage: m.stage().0,
        before,
        after: ExtInt::PosInf,
        slack: None,
        skipped: None,
    };
    let Some(ta) = t.apply(a) else {
        rec.skipped = Some("transform undefined".into());
        return rec;
    };
    rec.after = info_finite(&ta, b, m).i;
    match (before, rec.after) {
        (ExtInt::Finite(x), ExtInt::Finite(y)) => rec.slack = Some(x - y),
        _ => rec.skipped = Some("infinite information".into()),
    }
    rec
}

pub fn conservation_harness(
    t: Transform,
    corpus: &[(Prefix, Prefix)],
    m: &DiscreteBound,
) -> (Vec<ConservationRecord>, ConservationSummary) {
    let records: Vec<_> = corpus.par_iter().map(|(a, b)| conservation_record(t, a, b, m)).collect();
    let summary = summarize(t, m.stage().0, &records);
    (records, summary)
}

fn summarize(t: Transform, stage: usize, records: &[ConservationRecord]) -> ConservationSummary {
    let slacks: Vec<i64> = records.iter().filter_map(|r| r.slack).collect();
    ConservationSummary {
        transform: t,
        stage,
        evaluated: slacks.len(),
        skipped: records.len() - slacks.len(),
        constant: slacks.iter().map(|s| -s).max().unwrap_or(0).max(0),
    }
}

/// `I((a,w):b) − I(a:b) − log T_λ(w)` for `w` drawn uniformly of length `w_len`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AdjunctionSample {
    pub a: Prefix,
    pub b: Prefix,
    pub w: Prefix,
    pub excess: Option<i64>,
}

/// Log term: the `λ`-deficiency of `w`, clamped at zero.
pub fn adjunction_samples(
    corpus: &[(Prefix, Prefix)],
    m: &DiscreteBound,
    draws: usize,
    w_len: usize,
    seed: u64,
) -> Vec<AdjunctionSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<_> = (0..draws)
        .filter_map(|_| {
            let (a, b) = corpus.choose(&mut rng)?.clone();
            let w = Prefix::from_bits((0..w_len).map(|_| rng.gen::<bool>()).collect());
            Some((a, b, w))
        })
        .collect();
    picks
        .into_par_iter()
        .map(|(a, b, w)| {
            let tv = TestValue {
                value: Some(lambda_test(&w, m)),
                stage: m.stage(),
            };
            let log_t = match deficiency(&tv, &w).value {
                ExtInt::Finite(v) => v.max(0),
                _ => 0,
            };
            let joined = info_finite(&encode_pair(&a, &w), &b, m).i;
            let base = info_finite(&a, &b, m).i;
            let excess = match (joined, base) {
                (ExtInt::Finite(j), ExtInt::Finite(i)) => Some(j - i - log_t),
                _ => None,
            };
            AdjunctionSample { a, b, w, excess }
        })
        .collect()
}

/// `d_E(φ|μ)` before and `d_{A(E)}(A(φ)|A(μ))` after a PCT `A`, with the
/// library of `A(μ)` taken as `A` composed after the library of `μ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SemimeasureConservation {
    pub before: ExtInt,
    pub after: ExtInt,
}

#[allow(clippy::too_many_arguments)]
pub fn semimeasure_conservation(
    phi: &SemimeasureTable,
    mu: &SemimeasureTable,
    library: &[OperatorSpec],
    a: &OperatorSpec,
    e: Lattice,
    e_after: Lattice,
    grid: &[Dyadic],
    m: &DiscreteBound,
) -> Result<SemimeasureConservation> {
    let before = deficiency_semimeasure(phi, &regularize(mu, library)?, e, grid, m)?.1;
    let mu_a = a.push_distribution(mu)?;
    let phi_a = a.push_distribution(phi)?;
    let lib_a = library.iter().map(|b| b.compose(a)).collect::<Result<Vec<_>>>()?;
    let after = deficiency_semimeasure(&phi_a, &regularize(&mu_a, &lib_a)?, e_after, grid, m)?.1;
    Ok(SemimeasureConservation { before, after })
}

/// `size` pairs drawn with replacement from the pairs `(a, b)` with
/// `|a|, |b| <= max_len` whose `K_t(a)`, `K_t(b)`, `K_t(a,b)` are all
/// finite at the stage of `m`.
pub fn corpus(m: &DiscreteBound, max_len: usize, size: usize, seed: u64) -> Vec<(Prefix, Prefix)> {
    let described = m.raw_masses();
    let candidates: Vec<(Prefix, Prefix)> = described
        .keys()
        .filter_map(decode_pair)
        .filter(|(a, b)| {
            a.len() <= max_len
                && b.len() <= max_len
                && described.contains_key(a)
                && described.contains_key(b)
        })
        .collect();
    if candidates.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..size).map(|_| candidates.choose(&mut rng).unwrap().clone()).collect()
}

/// One row of the Occam demo: `I_t(x : bin K_t(x))` beside `K_t(bin K_t(x))`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OccamRow {
    pub x: Prefix,
    pub k: ExtInt,
    pub k_of_k: ExtInt,
    pub info: ExtInt,
}

pub fn occam_demo(xs: &[Prefix], m: &DiscreteBound) -> Vec<OccamRow> {
    xs.iter()
        .map(|x| {
            let k = m.complexity(x);
            let (k_of_k, info) = match k.finite() {
                Some(v) => {
                    let kb = binary(v as u128);
                    (m.complexity(&kb), info_finite(x, &kb, m).i)
                }
                None => (ExtInt::PosInf, ExtInt::PosInf),
            };
            OccamRow {
                x: x.clone(),
                k,
                k_of_k,
                info,
            }
        })
        .collect()
}

fn binary(v: u128) -> Prefix {
    let w = (u128::BITS - v.leading_zeros()) as usize;
    Prefix::from_value(v, w)
}

/// Halting bits of the step-bounded machine: bit `i` is set iff the program
/// with length-lex code `i` halts as a discrete program at the stage of `m`.
/// Only an approximation of the halting sequence from below.
pub fn halting_prefix(n: usize, stage: Stage) -> Prefix {
    let cfg = MachineConfig::discrete();
    Prefix::from_bits(
        (0..n as u128)
            .map(|i| {
                let p = Prefix::from_code(i);
                if p.len() > stage.max_len() {
                    return false;
                }
                let r = run_prefix(&p, stage.budget(), &cfg);
                r.halted_output().is_some() && r.bits_consumed == p.len()
            })
            .collect(),
    )
}

/// One row of the halting-sequence demo.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChiRow {
    pub n: usize,
    pub chi: Prefix,
    pub k: ExtInt,
    /// `i(χ_[n] : r)` for a seeded uniform `r` of the same length.
    pub lower_random: ExtInt,
    /// `i(χ_[n] : χ_[n])`.
    pub lower_self: ExtInt,
}

pub fn chi_demo(lengths: &[usize], ctx: &InfoContext, cap: usize, seed: u64) -> Vec<ChiRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lengths
        .iter()
        .map(|&n| {
            let chi = halting_prefix(n, ctx.stage());
            let r = Prefix::from_bits((0..n).map(|_| rng.gen::<bool>()).collect());
            ChiRow {
                n,
                k: ctx.m.complexity(&chi),
                lower_random: info_lower_bound(&chi, &r, ctx, cap).value,
                lower_self: info_lower_bound(&chi, &chi, ctx, cap).value,
                chi,
            }
        })
        .collect()
}
