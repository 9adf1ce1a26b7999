//! Randomness tests and deficiencies.
//!
//! For a computable measure `μ` the stage-`t` Martin-Löf test is
//! `T_μ(x) = Σ_{i ≤ |x|} m_t(x_[i]) / μ(x_[i])`. For semimeasures the test is
//! the mean, under the coarse-grained semimeasure, of a surrogate `t_E^U`
//! built from a regularizing operator `U`. Deficiencies are
//! `‖⌈T⌉‖ - 2`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::dyadic::{lognorm_ext, rarity_of, Dyadic, ExtInt};
use crate::elemfn::{ElemFn, Lattice};
use crate::enumerator::{ContinuousBound, DiscreteBound, Stage};
use crate::error::{Error, Result};
use crate::operator::{normalize_cylinders, Image, OperatorKind, OperatorSpec};
use crate::prefix::Prefix;
use crate::semimeasure::{coarse_grain, mean, SemimeasureTable};

/// Default exponent range of the surrogate grid.
pub const DEFAULT_GRID_EXP: u32 = 6;

/// Stage-`t` lower bound of a test at one prefix. `None` is `+∞`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestValue {
    pub value: Option<BigRational>,
    pub stage: Stage,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Deficiency {
    pub value: ExtInt,
    pub prefix: Prefix,
    pub stage: usize,
}

fn pow2(i: usize) -> BigRational {
    BigRational::from_integer(BigInt::one() << i)
}

/// `T_μ(x)` at the stage of `m`; infinite if some `μ(x_[i]) = 0`.
pub fn ml_test_with(mu: impl Fn(&Prefix) -> Dyadic, x: &Prefix, m: &DiscreteBound) -> TestValue {
    let mut acc = BigRational::zero();
    for i in 0..=x.len() {
        let xi = x.take(i);
        let d = mu(&xi);
        if d.is_zero() {
            return TestValue {
                value: None,
                stage: m.stage(),
            };
        }
        let mi = m.mass(&xi);
        if !mi.is_zero() {
            acc += mi.to_rational() / d.to_rational();
        }
    }
    TestValue {
        value: Some(acc),
        stage: m.stage(),
    }
}

pub fn ml_test(mu: &SemimeasureTable, x: &Prefix, m: &DiscreteBound) -> Result<TestValue> {
    if x.len() > mu.depth() {
        return Err(Error::Depth(format!("prefix {x} deeper than the measure table")));
    }
    Ok(ml_test_with(|y| mu.mass(y).clone(), x, m))
}

/// `T_λ(x) = Σ_{i ≤ |x|} 2^i m_t(x_[i])`.
pub fn lambda_test(x: &Prefix, m: &DiscreteBound) -> BigRational {
    (0..=x.len())
        .filter_map(|i| {
            let mi = m.mass(&x.take(i));
            (!mi.is_zero()).then(|| mi.to_rational() * pow2(i))
        })
        .sum()
}

/// `T_λ` truncated at `depth`, as an elementary function.
pub fn lambda_test_table(m: &DiscreteBound, depth: usize) -> ElemFn {
    let mut prefix_sum = vec![(Prefix::empty(), lambda_test(&Prefix::empty(), m))];
    for i in 1..=depth {
        prefix_sum = prefix_sum
            .into_iter()
            .flat_map(|(x, v)| {
                [false, true].map(|b| {
                    let c = x.child(b);
                    let mc = m.mass(&c);
                    let add = if mc.is_zero() {
                        BigRational::zero()
                    } else {
                        mc.to_rational() * pow2(i)
                    };
                    let s = &v + add;
                    (c, s)
                })
            })
            .collect();
    }
    ElemFn::new(depth, prefix_sum.into_iter().map(|(_, v)| v).collect()).unwrap()
}

/// `‖⌈T⌉‖ - 2`; `-∞` for `T = 0`, `+∞` for an infinite test.
pub fn deficiency(t: &TestValue, x: &Prefix) -> Deficiency {
    Deficiency {
        value: t.value.as_ref().map_or(ExtInt::PosInf, rarity_of),
        prefix: x.clone(),
        stage: t.stage.0,
    }
}

/// `sup_i (‖μ(x_[i])‖ - K_t(x_[i]))`, skipping prefixes not yet described.
pub fn gap_deficiency(mu: impl Fn(&Prefix) -> Dyadic, x: &Prefix, m: &DiscreteBound) -> ExtInt {
    (0..=x.len())
        .filter_map(|i| {
            let xi = x.take(i);
            let k = m.complexity(&xi);
            lognorm_ext(&mu(&xi)).sub(k)
        })
        .max()
        .unwrap_or(ExtInt::NegInf)
}

/// `{0} ∪ {2^j : |j| <= g}`.
pub fn dyadic_grid(g: u32) -> Vec<Dyadic> {
    let mut v = vec![Dyadic::zero()];
    v.extend((1..=g).rev().map(Dyadic::pow2_neg));
    v.extend((0..=g).map(|j| Dyadic::pow2(j)));
    v
}

/// Surrogate `t_E^A` on the lattice of depth `e.depth`.
///
/// By positive homogeneity and closedness under decrease, the sup of
/// `F = {f ∈ E⁺ : A(f) <= T_λ}` is computed coordinatewise:
/// `t(y) = max{c ∈ grid : c·A(1_y) <= T_λ}`. `A(1_y)` is the indicator of
/// the inputs whose image lies in `yΩ`, so `t(y)` is the largest grid value
/// below `T_λ` on every such input cylinder, and the top of the grid when
/// there is none. `T_λ` on a cover cylinder of `A` is read at its prefix,
/// a lower bound for its values on the whole cylinder.
pub fn surrogate_test(
    a: &OperatorSpec,
    e: Lattice,
    grid: &[Dyadic],
    m: &DiscreteBound,
) -> Result<ElemFn> {
    let k = e.depth;
    if a.kind() != OperatorKind::PctDual {
        return Err(Error::Operator("surrogate tests need a PCT".into()));
    }
    if k > a.out_depth() {
        return Err(Error::Depth("lattice deeper than operator output".into()));
    }
    let mut grid: Vec<Dyadic> = grid.to_vec();
    grid.sort();
    grid.dedup();
    let Some(top) = grid.last().cloned() else {
        return Ok(ElemFn::constant(k, BigRational::zero()));
    };
    // smallest T_λ bound over inputs mapping into each depth-k cylinder
    let mut bound: Vec<Option<BigRational>> = vec![None; 1 << k];
    for (c, img) in a.leaves() {
        let Image::Set(s) = img else { unreachable!() };
        let l = lcp_of(s);
        if l.len() < k {
            continue;
        }
        let slot = &mut bound[l.take(k).value() as usize];
        let t = lambda_test(c, m);
        if slot.as_ref().is_none_or(|b| t < *b) {
            *slot = Some(t);
        }
    }
    let values = bound
        .into_iter()
        .map(|b| {
            let c = match b {
                None => top.clone(),
                Some(b) => grid
                    .iter()
                    .rev()
                    .find(|g| g.to_rational() <= b)
                    .cloned()
                    .unwrap_or_else(Dyadic::zero),
            };
            c.to_rational()
        })
        .collect();
    ElemFn::new(k, values)
}

fn lcp_of(s: &[Prefix]) -> Prefix {
    let mut acc = s[0].clone();
    for c in &s[1..] {
        let n = acc.bits().iter().zip(c.bits()).take_while(|(a, b)| a == b).count();
        acc = acc.take(n);
    }
    acc
}

/// `d_E(φ | μ)`: the mean of the surrogate test of `U_μ` under the
/// coarse-grained `φ`, then `‖⌈T⌉‖ - 2`.
pub fn deficiency_semimeasure(
    phi: &SemimeasureTable,
    reg: &RegularizedSM,
    e: Lattice,
    grid: &[Dyadic],
    m: &DiscreteBound,
) -> Result<(BigRational, ExtInt)> {
    let t = surrogate_test(&reg.operator, e, grid, m)?;
    let phi_e = coarse_grain(phi, e)?;
    let total = mean(&phi_e, &t)?;
    let d = rarity_of(&total);
    Ok((total, d))
}

/// An operator evicted because its pushforward of `λ` exceeded `μ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Eviction {
    pub slot: usize,
    pub node: Prefix,
}

/// `ū = U_μ(λ)` for the prefix-dispatch operator over a library.
#[derive(Clone, Debug)]
pub struct RegularizedSM {
    pub source: SemimeasureTable,
    /// Dispatch code of each library slot.
    pub codes: Vec<Prefix>,
    pub evicted: Vec<Eviction>,
    pub operator: OperatorSpec,
    pub result: SemimeasureTable,
}

/// A complete prefix code with `n` words: `0, 10, 110, …, 1^(n-1)`, or the
/// empty word for a single slot.
pub fn dispatch_codes(n: usize) -> Vec<Prefix> {
    if n <= 1 {
        return vec![Prefix::empty()];
    }
    (0..n)
        .map(|i| {
            let mut c = Prefix::repeat(true, i);
            if i + 1 < n {
                c.push(false);
            }
            c
        })
        .collect()
}

/// Routes input `code_i ω` to `A_i(ω)`. A library operator is admitted only
/// if `A_i(λ) <= μ` on every node both tables define; otherwise it is
/// evicted, and its slot (like an empty library) sends every input to the
/// whole output space.
pub fn regularize(mu: &SemimeasureTable, library: &[OperatorSpec]) -> Result<RegularizedSM> {
    let out_depth = mu.depth();
    let codes = dispatch_codes(library.len());
    let mut evicted = Vec::new();
    let mut routes = Vec::new();
    for (i, a) in library.iter().enumerate() {
        let pushed = a.push_distribution(&SemimeasureTable::lambda(a.in_depth()))?;
        let common = pushed.depth().min(mu.depth());
        let bad = Prefix::all_up_to(common).find(|x| pushed.mass(x) > mu.mass(x));
        match bad {
            Some(node) => {
                evicted.push(Eviction { slot: i, node });
                routes.push((codes[i].clone(), whole_space(out_depth)));
            }
            None => routes.push((codes[i].clone(), a.clone())),
        }
    }
    if library.is_empty() {
        routes.push((Prefix::empty(), whole_space(out_depth)));
    }
    let operator = OperatorSpec::dispatch(&routes, out_depth)?;
    let result = operator.push_distribution(&SemimeasureTable::lambda(operator.in_depth()))?;
    Ok(RegularizedSM {
        source: mu.clone(),
        codes,
        evicted,
        operator,
        result,
    })
}

fn whole_space(out_depth: usize) -> OperatorSpec {
    OperatorSpec::pct(0, out_depth, [(Prefix::empty(), normalize_cylinders(&[Prefix::empty()]))])
        .unwrap()
}

impl RegularizedSM {
    /// `μ <= 2ū` on every node of the common depth.
    pub fn within_factor_two(&self) -> bool {
        let d = self.source.depth().min(self.result.depth());
        let two = Dyadic::from_u64(2);
        Prefix::all_up_to(d).all(|x| *self.source.mass(&x) <= &two * self.result.mass(&x))
    }
}

/// The shipped library corpus: named `(μ, library)` pairs at a stage and
/// output depth. Every `μ` is built as a pushforward of `λ` or is `M_t`.
pub fn operator_library(t: usize, depth: usize) -> Result<Vec<(&'static str, SemimeasureTable, Vec<OperatorSpec>)>> {
    let machine = OperatorSpec::monotone_machine(t, depth);
    let mt = ContinuousBound::at_stage(t, depth)?.tree();
    let lambda = SemimeasureTable::lambda(depth);
    let zeros = Prefix::repeat(false, depth);
    Ok(vec![
        ("identity", lambda.clone(), vec![OperatorSpec::identity(depth)]),
        ("identity+shift", lambda, vec![OperatorSpec::identity(depth), OperatorSpec::shift(1, depth)]),
        ("constant", SemimeasureTable::point_mass(&zeros, depth), vec![OperatorSpec::constant(0, depth, &zeros)]),
        ("machine", mt.clone(), vec![machine.clone()]),
        ("machine+identity", mt, vec![machine, OperatorSpec::identity(depth)]),
    ])
}

/// One row of a deficiency report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DeficiencyRow {
    pub prefix: String,
    pub stage: usize,
    pub formula: ExtInt,
    pub gap: ExtInt,
    pub lattice_depth: usize,
}

/// Formula and gap forms of `d(x|λ)` at the stage of `m`.
pub fn lambda_deficiency_row(x: &Prefix, m: &DiscreteBound) -> DeficiencyRow {
    let lam = |y: &Prefix| Dyadic::pow2_neg(y.len() as u32);
    let t = ml_test_with(lam, x, m);
    DeficiencyRow {
        prefix: x.to_string(),
        stage: m.stage().0,
        formula: deficiency(&t, x).value,
        gap: gap_deficiency(lam, x, m),
        lattice_depth: x.len(),
    }
}

/// Exact `λ`-mean of `T_λ` truncated at `depth`.
pub fn lambda_mean_of_test(m: &DiscreteBound, depth: usize) -> BigRational {
    let t = lambda_test_table(m, depth);
    let w = BigRational::new(BigInt::one(), BigInt::one() << depth);
    t.values().iter().sum::<BigRational>() * w
}
