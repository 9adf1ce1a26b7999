//! Operators on sequences and their duals on elementary functions.
//!
//! A [`OperatorSpec`] assigns to every input cylinder of a complete
//! prefix-free cover either a nonempty output set (a PCT, acting on functions
//! by `g(α) = min_{β ∈ A(α)} f(β)`) or an output semimeasure (a concave
//! operator, acting by `g(α) = A(α)(f)`). Output sets are unions of output
//! cylinders, stored as a canonical antichain.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::Zero;

use crate::dyadic::Dyadic;
use crate::elemfn::ElemFn;
use crate::error::{Error, Result};
use crate::machine::{explore, MachineConfig, Status, Visitor, Vm};
use crate::prefix::Prefix;
use crate::semimeasure::{cylinder_minima, mean, SemimeasureTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    PctDual,
    Concave,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Image {
    /// Union of the listed output cylinders; a canonical antichain.
    Set(Vec<Prefix>),
    Table(SemimeasureTable),
}

/// Canonical form of a union of cylinders: sorted, no element extends
/// another, sibling pairs merged into their parent.
pub fn normalize_cylinders(cyls: &[Prefix]) -> Vec<Prefix> {
    let mut v: Vec<Prefix> = cyls.to_vec();
    loop {
        v.sort();
        v.dedup();
        let mut kept: Vec<Prefix> = Vec::with_capacity(v.len());
        for c in &v {
            if !v.iter().any(|d| d != c && d.is_prefix_of(c)) {
                kept.push(c.clone());
            }
        }
        let mut merged = false;
        let mut out = Vec::with_capacity(kept.len());
        let mut i = 0;
        while i < kept.len() {
            let c = &kept[i];
            if let Some(parent) = c.parent() {
                if !c.bit(c.len() - 1) && kept.get(i + 1) == Some(&parent.child(true)) {
                    out.push(parent);
                    merged = true;
                    i += 2;
                    continue;
                }
            }
            out.push(c.clone());
            i += 1;
        }
        v = out;
        if !merged {
            return v;
        }
    }
}

/// `⋃ a ⊆ ⋃ b` for unions of cylinders.
pub fn cylinders_subset(a: &[Prefix], b: &[Prefix]) -> bool {
    a.iter().all(|x| covered(x, b))
}

fn covered(x: &Prefix, b: &[Prefix]) -> bool {
    if b.iter().any(|c| c.is_prefix_of(x)) {
        return true;
    }
    // x may be covered by a finite union of longer cylinders
    let deeper: Vec<&Prefix> = b.iter().filter(|c| x.is_prefix_of(c)).collect();
    if deeper.is_empty() {
        return false;
    }
    covered(&x.child(false), b) && covered(&x.child(true), b)
}

/// Longest common prefix of a nonempty union of cylinders.
fn lcp(cyls: &[Prefix]) -> Prefix {
    let mut it = cyls.iter();
    let mut acc = it.next().cloned().unwrap_or_default();
    for c in it {
        let n = acc
            .bits()
            .iter()
            .zip(c.bits())
            .take_while(|(a, b)| a == b)
            .count();
        acc = acc.take(n);
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperatorSpec {
    kind: OperatorKind,
    in_depth: usize,
    out_depth: usize,
    leaves: BTreeMap<Prefix, Image>,
}

fn check_cover<'a>(keys: impl Iterator<Item = &'a Prefix>, in_depth: usize) -> Result<()> {
    let mut kraft = Dyadic::zero();
    let keys: Vec<&Prefix> = keys.collect();
    for k in &keys {
        if k.len() > in_depth {
            return Err(Error::Operator(format!("input {k} deeper than {in_depth}")));
        }
        kraft = kraft + Dyadic::pow2_neg(k.len() as u32);
    }
    // in lexicographic order an overlapping pair is adjacent
    let mut sorted_lex = keys;
    sorted_lex.sort_by(|a, b| a.bits().cmp(b.bits()));
    if sorted_lex.windows(2).any(|w| w[0].is_prefix_of(w[1])) {
        return Err(Error::Operator("input cylinders overlap".into()));
    }
    if kraft != Dyadic::one() {
        return Err(Error::Operator("input cylinders do not cover Ω".into()));
    }
    Ok(())
}

impl OperatorSpec {
    /// A PCT from output sets on a complete prefix-free cover of the inputs.
    pub fn pct(
        in_depth: usize,
        out_depth: usize,
        leaves: impl IntoIterator<Item = (Prefix, Vec<Prefix>)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (x, set) in leaves {
            if set.is_empty() {
                return Err(Error::Operator(format!("empty output set at {x}")));
            }
            if let Some(c) = set.iter().find(|c| c.len() > out_depth) {
                return Err(Error::Operator(format!("output {c} deeper than {out_depth}")));
            }
            map.insert(x, Image::Set(normalize_cylinders(&set)));
        }
        check_cover(map.keys(), in_depth)?;
        Ok(OperatorSpec {
            kind: OperatorKind::PctDual,
            in_depth,
            out_depth,
            leaves: map,
        })
    }

    /// A PCT from output sets given on every input node of length at most
    /// `in_depth`. Refuses families that are not nested under extension.
    pub fn from_levels(
        in_depth: usize,
        out_depth: usize,
        family: &BTreeMap<Prefix, Vec<Prefix>>,
    ) -> Result<Self> {
        for x in Prefix::all_up_to(in_depth) {
            let set = family
                .get(&x)
                .ok_or_else(|| Error::Operator(format!("missing output set at {x}")))?;
            if set.is_empty() {
                return Err(Error::Operator(format!("empty output set at {x}")));
            }
            if let Some(parent) = x.parent() {
                if !cylinders_subset(set, &family[&parent]) {
                    return Err(Error::Operator(format!("output set at {x} not nested in {parent}")));
                }
            }
        }
        Self::pct(
            in_depth,
            out_depth,
            Prefix::all_of_length(in_depth).map(|x| {
                let s = family[&x].clone();
                (x, s)
            }),
        )
    }

    pub fn concave(
        in_depth: usize,
        out_depth: usize,
        leaves: impl IntoIterator<Item = (Prefix, SemimeasureTable)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (x, t) in leaves {
            if t.depth() != out_depth {
                return Err(Error::Operator(format!("output table at {x} has wrong depth")));
            }
            map.insert(x, Image::Table(t));
        }
        check_cover(map.keys(), in_depth)?;
        Ok(OperatorSpec {
            kind: OperatorKind::Concave,
            in_depth,
            out_depth,
            leaves: map,
        })
    }

    pub fn identity(depth: usize) -> Self {
        Self::pct(depth, depth, Prefix::all_of_length(depth).map(|x| (x.clone(), vec![x]))).unwrap()
    }

    /// Every input goes to `x 0 0 0 ...`.
    pub fn constant(in_depth: usize, out_depth: usize, x: &Prefix) -> Self {
        let target = x
            .concat(&Prefix::repeat(false, out_depth.saturating_sub(x.len())))
            .take(out_depth);
        Self::pct(in_depth, out_depth, [(Prefix::empty(), vec![target])]).unwrap()
    }

    /// Sends `iω` to `A_i(ω)` where `i` ranges over the listed input prefixes
    /// (a complete prefix-free cover) and each operator is a PCT.
    pub fn dispatch(routes: &[(Prefix, OperatorSpec)], out_depth: usize) -> Result<Self> {
        let mut leaves = Vec::new();
        let mut in_depth = 0;
        for (code, op) in routes {
            if op.kind != OperatorKind::PctDual {
                return Err(Error::Operator("dispatch expects PCTs".into()));
            }
            in_depth = in_depth.max(code.len() + op.in_depth);
            for (x, img) in &op.leaves {
                let Image::Set(s) = img else { unreachable!() };
                let s: Vec<Prefix> = s.iter().map(|c| c.take(out_depth)).collect();
                leaves.push((code.concat(x), s));
            }
        }
        Self::pct(in_depth, out_depth, leaves)
    }

    /// The monotone machine as a PCT at a stage: input `α` of length `t` is
    /// mapped to the cylinder of the output produced from `α` within `t²`
    /// steps. Inputs on which the machine stops early are merged into the
    /// shortest cylinder that determines them.
    pub fn monotone_machine(stage: usize, out_depth: usize) -> Self {
        struct Collect {
            max_len: usize,
            out_depth: usize,
            leaves: Vec<(Prefix, Vec<Prefix>)>,
        }
        impl Visitor for Collect {
            fn node(&mut self, path: &[bool], vm: &Vm, status: &Status, _: usize) -> bool {
                let done = *status != Status::NeedsMoreInput || path.len() == self.max_len;
                if done {
                    let out = Prefix::from_slice(vm.output()).take(self.out_depth);
                    self.leaves.push((Prefix::from_slice(path), vec![out]));
                }
                true
            }
        }
        let mut c = Collect {
            max_len: stage,
            out_depth,
            leaves: Vec::new(),
        };
        let budget = (stage * stage) as u64;
        explore(Vm::new(&MachineConfig::monotone()), &[], &[], stage, budget, 0, &mut c);
        Self::pct(stage, out_depth, c.leaves).unwrap()
    }

    /// `B ∘ A` for PCTs: the image of `α` is the union of `B`'s images of
    /// the cylinders in `A(α)`. Cylinders shorter than `B`'s cover use the
    /// union over the cover cells they contain.
    pub fn compose(&self, b: &OperatorSpec) -> Result<OperatorSpec> {
        if self.kind != OperatorKind::PctDual || b.kind != OperatorKind::PctDual {
            return Err(Error::Operator("composition expects PCTs".into()));
        }
        let mut leaves = Vec::with_capacity(self.leaves.len());
        for (x, img) in &self.leaves {
            let Image::Set(s) = img else { unreachable!() };
            let mut out = Vec::new();
            for c in s {
                out.extend(b.image_set(c)?);
            }
            leaves.push((x.clone(), out));
        }
        Self::pct(self.in_depth, b.out_depth, leaves)
    }

    /// Drops the first `k` bits: `α ↦ α[k..]`.
    pub fn shift(k: usize, out_depth: usize) -> Self {
        let in_depth = k + out_depth;
        Self::pct(
            in_depth,
            out_depth,
            Prefix::all_of_length(in_depth).map(|x| {
                let tail = Prefix::from_slice(&x.bits()[k..]);
                (x, vec![tail])
            }),
        )
        .unwrap()
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn in_depth(&self) -> usize {
        self.in_depth
    }

    pub fn out_depth(&self) -> usize {
        self.out_depth
    }

    pub fn leaves(&self) -> impl Iterator<Item = (&Prefix, &Image)> {
        self.leaves.iter()
    }

    /// The cover element containing every sequence starting with `x`, if
    /// `x` is long enough to determine it.
    pub fn leaf_of(&self, x: &Prefix) -> Option<(&Prefix, &Image)> {
        (0..=x.len().min(self.in_depth)).find_map(|k| self.leaves.get_key_value(&x.take(k)))
    }

    /// Output set of the input cylinder `x` (union over the sequences in it).
    pub fn image_set(&self, x: &Prefix) -> Result<Vec<Prefix>> {
        if self.kind != OperatorKind::PctDual {
            return Err(Error::Operator("output sets exist only for PCTs".into()));
        }
        if let Some((_, Image::Set(s))) = self.leaf_of(x) {
            return Ok(s.clone());
        }
        let mut all = Vec::new();
        for (k, img) in self.leaves.range(x.clone()..) {
            if !x.is_prefix_of(k) {
                if k.len() > self.in_depth {
                    break;
                }
                continue;
            }
            if let Image::Set(s) = img {
                all.extend_from_slice(s);
            }
        }
        Ok(normalize_cylinders(&all))
    }

    /// The dual action on elementary functions of depth at most
    /// `out_depth`; the result has depth `in_depth`.
    pub fn apply(&self, f: &ElemFn) -> Result<ElemFn> {
        if f.depth() > self.out_depth {
            return Err(Error::Depth(format!(
                "function depth {} exceeds operator output depth {}",
                f.depth(),
                self.out_depth
            )));
        }
        let mins = cylinder_minima(f, self.out_depth);
        let mut cache: BTreeMap<&Prefix, BigRational> = BTreeMap::new();
        let mut values = Vec::with_capacity(1 << self.in_depth);
        for a in Prefix::all_of_length(self.in_depth) {
            let (k, img) = self.leaf_of(&a).expect("complete cover");
            if let Some(v) = cache.get(k) {
                values.push(v.clone());
                continue;
            }
            let v = match img {
                Image::Set(s) => s.iter().map(|c| mins[c.index()].clone()).min().unwrap(),
                Image::Table(t) => mean(t, f)?,
            };
            cache.insert(k, v.clone());
            values.push(v);
        }
        ElemFn::new(self.in_depth, values)
    }

    /// `ν(z) = φ(A(1_z))`, computed to `out_depth`. Requires
    /// `phi.depth >= in_depth`.
    pub fn push_distribution(&self, phi: &SemimeasureTable) -> Result<SemimeasureTable> {
        if phi.depth() < self.in_depth {
            return Err(Error::Depth(format!(
                "input distribution depth {} below operator input depth {}",
                phi.depth(),
                self.in_depth
            )));
        }
        match self.kind {
            OperatorKind::PctDual => Ok(self.push_pct(phi)),
            OperatorKind::Concave => {
                let phi = phi.truncate(self.in_depth);
                let mut out = SemimeasureTable::zero(self.out_depth);
                for z in Prefix::all_up_to(self.out_depth) {
                    let g = ElemFn::from_fn(self.in_depth, |a| match self.leaf_of(a) {
                        Some((_, Image::Table(t))) => t.mass(&z).to_rational(),
                        _ => unreachable!(),
                    });
                    let m = mean(&phi, &g)?;
                    out.set(&z, Dyadic::from_rational(&m).ok_or(Error::NegativeDyadic)?);
                }
                Ok(out)
            }
        }
    }

    /// `A(1_z)(α) = [A(α) ⊆ zΩ]`, which holds exactly when `z` is a prefix
    /// of the longest common prefix of `A(α)`. The mean is taken with the
    /// lost-mass decomposition of `phi` above `in_depth`.
    fn push_pct(&self, phi: &SemimeasureTable) -> SemimeasureTable {
        let d = self.in_depth;
        let mut node_lcp: Vec<Option<Prefix>> = vec![None; (1usize << (d + 1)) - 1];
        for x in Prefix::all_of_length(d) {
            let Some((_, Image::Set(s))) = self.leaf_of(&x) else {
                unreachable!()
            };
            node_lcp[x.index()] = Some(lcp(s));
        }
        for level in (0..d).rev() {
            for x in Prefix::all_of_length(level) {
                let a = node_lcp[x.child(false).index()].clone().unwrap();
                let b = node_lcp[x.child(true).index()].clone().unwrap();
                node_lcp[x.index()] = Some(lcp(&[a, b]));
            }
        }
        let mut acc: Vec<Dyadic> = vec![Dyadic::zero(); (1usize << (self.out_depth + 1)) - 1];
        for x in Prefix::all_up_to(d) {
            let w = if x.len() == d {
                phi.mass(&x).clone()
            } else {
                phi.lost_mass(&x)
            };
            if w.is_zero() {
                continue;
            }
            let l = node_lcp[x.index()].as_ref().unwrap();
            for k in 0..=l.len().min(self.out_depth) {
                let i = l.take(k).index();
                acc[i] = &acc[i] + &w;
            }
        }
        SemimeasureTable::from_masses_unchecked(self.out_depth, acc).unwrap()
    }
}

/// Determinism of the dual action on a pair of functions:
/// `A(min{f, g}) == min{A(f), A(g)}`.
pub fn is_deterministic_on(a: &OperatorSpec, f: &ElemFn, g: &ElemFn) -> Result<bool> {
    Ok(a.apply(&f.min(g))? == a.apply(f)?.min(&a.apply(g)?))
}

/// Boolean-ness on one function: `A(f³) == A(f)³`, and `A(𝟙) == 𝟙`.
pub fn is_boolean_on(a: &OperatorSpec, f: &ElemFn) -> Result<bool> {
    let one = a.apply(&ElemFn::one())?;
    Ok(one == ElemFn::one() && a.apply(&f.cube())? == a.apply(f)?.cube())
}

/// A general concave operator given, at each input leaf of depth
/// `in_depth`, by finitely many nonnegative linear functionals on the
/// depth-`out_depth` output leaves: `g(α) = min_w Σ_y w(y) f(y)`.
///
/// Weights are integers over the common denominator `2^denom_exp`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinLinearTable {
    pub in_depth: usize,
    pub out_depth: usize,
    pub denom_exp: u32,
    /// `rows[α.value()]` lists the functionals at input leaf `α`.
    pub rows: Vec<Vec<Vec<i64>>>,
}

impl MinLinearTable {
    /// The table of a PCT: one unit functional per output leaf in each set.
    pub fn from_pct(a: &OperatorSpec) -> Result<Self> {
        let (din, dout) = (a.in_depth, a.out_depth);
        let mut rows = Vec::with_capacity(1 << din);
        for x in Prefix::all_of_length(din) {
            let set = a.image_set(&x)?;
            let mut fs = Vec::new();
            for y in Prefix::all_of_length(dout) {
                if set.iter().any(|c| c.is_prefix_of(&y)) {
                    let mut w = vec![0; 1 << dout];
                    w[y.value() as usize] = 1;
                    fs.push(w);
                }
            }
            rows.push(fs);
        }
        Ok(MinLinearTable {
            in_depth: din,
            out_depth: dout,
            denom_exp: 0,
            rows,
        })
    }

    /// Numerators of `A(f)` for an integer-valued `f` at `out_depth`.
    pub fn apply_int(&self, f: &[i64]) -> Vec<i64> {
        self.rows
            .iter()
            .map(|fs| {
                fs.iter()
                    .map(|w| w.iter().zip(f).map(|(a, b)| a * b).sum::<i64>())
                    .min()
                    .unwrap_or(0)
            })
            .collect()
    }

    pub fn apply(&self, f: &ElemFn) -> Result<ElemFn> {
        if f.depth() > self.out_depth {
            return Err(Error::Depth("function deeper than operator output".into()));
        }
        let f = f.lift(self.out_depth)?;
        let denom = BigRational::from_integer((1i64 << self.denom_exp).into());
        let values = self
            .rows
            .iter()
            .map(|fs| {
                fs.iter()
                    .map(|w| {
                        w.iter()
                            .zip(f.values())
                            .map(|(a, b)| BigRational::from_integer((*a).into()) * b)
                            .fold(BigRational::zero(), |s, t| s + t)
                            / &denom
                    })
                    .min()
                    .unwrap_or_else(BigRational::zero)
            })
            .collect();
        ElemFn::new(self.in_depth, values)
    }

    /// `A(min{f, g}) == min{A f, A g}` for integer-valued functions.
    pub fn deterministic_on(&self, f: &[i64], g: &[i64]) -> bool {
        let m: Vec<i64> = f.iter().zip(g).map(|(a, b)| *a.min(b)).collect();
        let (am, af, ag) = (self.apply_int(&m), self.apply_int(f), self.apply_int(g));
        am.iter().zip(af.iter().zip(&ag)).all(|(x, (a, b))| *x == *a.min(b))
    }

    /// `A(f³) == A(f)³` on a `{-1, 0, 1}`-valued `f`, and `A(𝟙) == 𝟙`.
    pub fn boolean_on(&self, f: &[i64]) -> bool {
        let d = 1i128 << self.denom_exp;
        let one = vec![1i64; 1 << self.out_depth];
        if self.apply_int(&one).iter().any(|&v| v as i128 != d) {
            return false;
        }
        let cube: Vec<i64> = f.iter().map(|v| v * v * v).collect();
        let (ac, af) = (self.apply_int(&cube), self.apply_int(f));
        ac.iter()
            .zip(&af)
            .all(|(c, a)| (*c as i128) * d * d == (*a as i128).pow(3))
    }

    /// Reads off `S(α) = {y : A(𝟙 - e_y)(α) = 0}` and returns the PCT with
    /// those output sets, or `None` if some set is empty.
    pub fn reconstruct(&self) -> Option<OperatorSpec> {
        let n = 1usize << self.out_depth;
        let mut leaves = Vec::with_capacity(self.rows.len());
        for (i, fs) in self.rows.iter().enumerate() {
            let mut set = Vec::new();
            for y in 0..n {
                let mut f = vec![1i64; n];
                f[y] = 0;
                let v = fs
                    .iter()
                    .map(|w| w.iter().zip(&f).map(|(a, b)| a * b).sum::<i64>())
                    .min()
                    .unwrap_or(0);
                if v == 0 {
                    set.push(Prefix::from_value(y as u128, self.out_depth));
                }
            }
            if set.is_empty() {
                return None;
            }
            leaves.push((Prefix::from_value(i as u128, self.in_depth), set));
        }
        OperatorSpec::pct(self.in_depth, self.out_depth, leaves).ok()
    }

    /// Exact test that this table is the dual of `a`: the convex hull of
    /// each row's functionals equals the simplex on `A(α)`, i.e. every
    /// functional is a probability vector supported in `A(α)` and every
    /// unit vector of `A(α)` occurs.
    pub fn realized_by(&self, a: &OperatorSpec) -> bool {
        if a.kind != OperatorKind::PctDual
            || a.in_depth != self.in_depth
            || a.out_depth != self.out_depth
        {
            return false;
        }
        let d = 1i64 << self.denom_exp;
        let n = 1usize << self.out_depth;
        for (i, fs) in self.rows.iter().enumerate() {
            let x = Prefix::from_value(i as u128, self.in_depth);
            let Ok(set) = a.image_set(&x) else {
                return false;
            };
            let member: Vec<bool> = (0..n)
                .map(|y| {
                    let y = Prefix::from_value(y as u128, self.out_depth);
                    set.iter().any(|c| c.is_prefix_of(&y))
                })
                .collect();
            for w in fs {
                if w.iter().sum::<i64>() != d || w.iter().any(|&v| v < 0) {
                    return false;
                }
                if w.iter().zip(&member).any(|(&v, &m)| v != 0 && !m) {
                    return false;
                }
            }
            for y in (0..n).filter(|&y| member[y]) {
                let unit = |w: &Vec<i64>| w[y] == d;
                if !fs.iter().any(unit) {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elemfn::rat;
    use proptest::prelude::*;

    fn p(s: &str) -> Prefix {
        s.parse().unwrap()
    }

    #[test]
    fn identity_and_constant() {
        let id = OperatorSpec::identity(2);
        let f = ElemFn::from_ints(2, &[3, 1, 4, 1]).unwrap();
        assert_eq!(id.apply(&f).unwrap(), f);
        let l = SemimeasureTable::lambda(2);
        assert_eq!(id.push_distribution(&l).unwrap(), l);
        let c = OperatorSpec::constant(2, 3, &Prefix::empty());
        let pushed = c.push_distribution(&l).unwrap();
        assert_eq!(*pushed.mass(&p("000")), Dyadic::one());
        assert!(pushed.mass(&p("001")).is_zero());
    }

    #[test]
    fn min_over_output_set() {
        let a = OperatorSpec::pct(1, 1, [(p("0"), vec![p("0"), p("1")]), (p("1"), vec![p("0")])]).unwrap();
        let g = a.apply(&ElemFn::indicator(&p("0"), 1)).unwrap();
        assert_eq!(g.values(), &[rat(0), rat(1)]);
        // (x, y) of the set of 0: the whole space
        assert_eq!(a.image_set(&p("0")).unwrap(), vec![Prefix::empty()]);
    }

    #[test]
    fn constructors_refuse_bad_families() {
        assert!(OperatorSpec::pct(1, 1, [(p("0"), vec![p("0")])]).is_err());
        assert!(OperatorSpec::pct(1, 1, [(p("0"), vec![p("0")]), (p("1"), vec![])]).is_err());
        let mut fam = BTreeMap::new();
        fam.insert(Prefix::empty(), vec![p("0")]);
        fam.insert(p("0"), vec![p("0")]);
        fam.insert(p("1"), vec![p("1")]);
        assert!(OperatorSpec::from_levels(1, 1, &fam).is_err());
        fam.insert(Prefix::empty(), vec![p("0"), p("1")]);
        assert!(OperatorSpec::from_levels(1, 1, &fam).is_ok());
    }

    #[test]
    fn composition_and_shift() {
        let sh = OperatorSpec::shift(1, 2);
        let f = ElemFn::from_ints(2, &[1, 2, 3, 4]).unwrap();
        assert_eq!(sh.apply(&f).unwrap().values()[0b101], rat(2));
        let id = OperatorSpec::identity(3);
        assert_eq!(id.compose(&sh).unwrap(), sh);
        let c = OperatorSpec::constant(1, 3, &p("1"));
        let both = c.compose(&sh).unwrap();
        assert_eq!(both.image_set(&p("0")).unwrap(), vec![p("00")]);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_cylinders(&[p("00"), p("01"), p("1")]), vec![Prefix::empty()]);
        assert_eq!(normalize_cylinders(&[p("0"), p("01"), p("11")]), vec![p("0"), p("11")]);
        assert!(cylinders_subset(&[p("0")], &[p("00"), p("01")]));
        assert!(!cylinders_subset(&[p("0")], &[p("00"), p("1")]));
    }

    #[test]
    fn monotone_machine_pushes_lambda_to_a_semimeasure() {
        let a = OperatorSpec::monotone_machine(8, 6);
        let m = a.push_distribution(&SemimeasureTable::lambda(8)).unwrap();
        assert!(m.check().is_ok());
        assert_eq!(*m.mass(&Prefix::empty()), Dyadic::one());
        // the identity transducer copies everything it reads
        assert!(*m.mass(&p("1011")) >= Dyadic::pow2_neg(8));
    }

    #[test]
    fn concave_push_matches_mixture() {
        let l = SemimeasureTable::lambda(2);
        let pt = SemimeasureTable::point_mass(&p("11"), 2);
        let a = OperatorSpec::concave(1, 2, [(p("0"), l.clone()), (p("1"), pt.clone())]).unwrap();
        let pushed = a.push_distribution(&SemimeasureTable::lambda(1)).unwrap();
        let half = Dyadic::pow2_neg(1);
        for z in Prefix::all_up_to(2) {
            assert_eq!(*pushed.mass(&z), &(l.mass(&z) + pt.mass(&z)) * &half);
        }
        let f = ElemFn::from_ints(2, &[0, 4, 0, 8]).unwrap();
        assert_eq!(a.apply(&f).unwrap().values(), &[rat(3), rat(8)]);
    }

    #[test]
    fn min_linear_round_trip() {
        let a = OperatorSpec::pct(1, 2, [(p("0"), vec![p("0")]), (p("1"), vec![p("11")])]).unwrap();
        let t = MinLinearTable::from_pct(&a).unwrap();
        assert!(t.realized_by(&a));
        assert_eq!(t.reconstruct().unwrap(), a);
        let f = ElemFn::from_ints(2, &[5, 2, 7, 1]).unwrap();
        assert_eq!(t.apply(&f).unwrap(), a.apply(&f).unwrap());
        let mixed = MinLinearTable {
            in_depth: 0,
            out_depth: 1,
            denom_exp: 1,
            rows: vec![vec![vec![1, 1]]],
        };
        assert!(!mixed.deterministic_on(&[1, 0], &[0, 1]));
        assert!(!mixed.boolean_on(&[1, 0]));
    }

    pub(crate) fn arb_pct(din: usize, dout: usize) -> impl Strategy<Value = OperatorSpec> {
        let n = 1usize << dout;
        proptest::collection::vec(1u32..(1u32 << n), 1 << din).prop_map(move |masks| {
            OperatorSpec::pct(
                din,
                dout,
                masks.iter().enumerate().map(|(i, m)| {
                    let set = (0..n)
                        .filter(|y| m >> y & 1 == 1)
                        .map(|y| Prefix::from_value(y as u128, dout))
                        .collect();
                    (Prefix::from_value(i as u128, din), set)
                }),
            )
            .unwrap()
        })
    }

    fn arb_fn(depth: usize) -> impl Strategy<Value = ElemFn> {
        proptest::collection::vec(-4i64..5, 1 << depth)
            .prop_map(move |v| ElemFn::from_ints(depth, &v).unwrap())
    }

    fn arb_sign_fn(depth: usize) -> impl Strategy<Value = ElemFn> {
        proptest::collection::vec(-1i64..=1, 1 << depth)
            .prop_map(move |v| ElemFn::from_ints(depth, &v).unwrap())
    }

    proptest! {
        #[test]
        fn pct_duals_are_deterministic(a in arb_pct(2, 2), f in arb_fn(2), g in arb_fn(1)) {
            prop_assert!(is_deterministic_on(&a, &f, &g).unwrap());
        }

        #[test]
        fn pct_duals_are_boolean(a in arb_pct(2, 2), f in arb_sign_fn(2)) {
            prop_assert!(is_boolean_on(&a, &f).unwrap());
        }

        #[test]
        fn pct_push_is_semimeasure_and_total(a in arb_pct(2, 2)) {
            let pushed = a.push_distribution(&SemimeasureTable::lambda(2)).unwrap();
            prop_assert!(pushed.check().is_ok());
            prop_assert_eq!(pushed.mass(&Prefix::empty()).clone(), Dyadic::one());
            // direct oracle: ν(z) = Σ_α λ(α) [A(α) ⊆ zΩ]
            for z in Prefix::all_up_to(2) {
                let g = a.apply(&ElemFn::indicator(&z, 2)).unwrap();
                let direct: BigRational = g.values().iter().map(|v| v * BigRational::new(1.into(), 4.into())).sum();
                prop_assert_eq!(pushed.mass(&z).to_rational(), direct);
            }
        }

        #[test]
        fn reconstruction_inverts_from_pct(a in arb_pct(2, 2)) {
            let t = MinLinearTable::from_pct(&a).unwrap();
            prop_assert_eq!(t.reconstruct().unwrap(), a.clone());
            prop_assert!(t.realized_by(&a));
        }
    }
}
