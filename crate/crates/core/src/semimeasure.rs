//! Finite-depth (semi)measures on the binary tree, their means, products and
//! coarse graining onto a lattice.

use num_rational::BigRational;
use num_traits::Zero;

use crate::dyadic::Dyadic;
use crate::elemfn::{ElemFn, Lattice};
use crate::error::{Error, Result};
use crate::prefix::Prefix;

/// Masses `μ(x)` for every prefix of length at most `depth`, satisfying
/// `μ(ε) <= 1` and `μ(x) >= μ(x0) + μ(x1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemimeasureTable {
    depth: usize,
    masses: Vec<Dyadic>,
}

fn node_count(depth: usize) -> usize {
    (1usize << (depth + 1)) - 1
}

impl SemimeasureTable {
    /// Validates the table; `masses` is indexed by [`Prefix::index`].
    pub fn new(depth: usize, masses: Vec<Dyadic>) -> Result<Self> {
        let t = Self::from_masses_unchecked(depth, masses)?;
        t.check()?;
        Ok(t)
    }

    pub(crate) fn from_masses_unchecked(depth: usize, masses: Vec<Dyadic>) -> Result<Self> {
        if masses.len() != node_count(depth) {
            return Err(Error::TableSize {
                depth,
                expected: node_count(depth),
                got: masses.len(),
            });
        }
        Ok(SemimeasureTable { depth, masses })
    }

    pub fn from_fn(depth: usize, f: impl Fn(&Prefix) -> Dyadic) -> Result<Self> {
        Self::new(depth, Prefix::all_up_to(depth).map(|x| f(&x)).collect())
    }

    pub fn zero(depth: usize) -> Self {
        SemimeasureTable {
            depth,
            masses: vec![Dyadic::zero(); node_count(depth)],
        }
    }

    /// The uniform measure `λ(x) = 2^-|x|`.
    pub fn lambda(depth: usize) -> Self {
        SemimeasureTable {
            depth,
            masses: Prefix::all_up_to(depth)
                .map(|x| Dyadic::pow2_neg(x.len() as u32))
                .collect(),
        }
    }

    /// The point mass at the sequence `x 0 0 0 ...`.
    pub fn point_mass(x: &Prefix, depth: usize) -> Self {
        let path = x.concat(&Prefix::repeat(false, depth.saturating_sub(x.len())));
        SemimeasureTable {
            depth,
            masses: Prefix::all_up_to(depth)
                .map(|z| {
                    if z.is_prefix_of(&path) {
                        Dyadic::one()
                    } else {
                        Dyadic::zero()
                    }
                })
                .collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn masses(&self) -> &[Dyadic] {
        &self.masses
    }

    pub fn mass(&self, x: &Prefix) -> &Dyadic {
        &self.masses[x.index()]
    }

    pub fn set(&mut self, x: &Prefix, v: Dyadic) {
        self.masses[x.index()] = v;
    }

    /// Checks normalization and the semimeasure inequality at every node.
    pub fn check(&self) -> Result<()> {
        if self.masses[0] > Dyadic::one() {
            return Err(Error::NotSemimeasure("ε (mass exceeds one)".into()));
        }
        if let Some(x) = self.first_violation() {
            return Err(Error::NotSemimeasure(x.to_string()));
        }
        Ok(())
    }

    pub fn first_violation(&self) -> Option<Prefix> {
        Prefix::all_up_to(self.depth.saturating_sub(1))
            .take_while(|x| x.len() < self.depth)
            .find(|x| {
                let kids = self.mass(&x.child(false)) + self.mass(&x.child(true));
                *self.mass(x) < kids
            })
    }

    /// Equality `μ(x) = μ(x0) + μ(x1)` at every internal node.
    pub fn is_measure(&self) -> bool {
        Prefix::all_up_to(self.depth)
            .take_while(|x| x.len() < self.depth)
            .all(|x| *self.mass(&x) == self.mass(&x.child(false)) + self.mass(&x.child(true)))
    }

    /// Nodewise `self <= other` on common depth.
    pub fn le(&self, other: &SemimeasureTable) -> bool {
        let d = self.depth.min(other.depth);
        Prefix::all_up_to(d).all(|x| self.mass(&x) <= other.mass(&x))
    }

    /// `μ(x) - μ(x0) - μ(x1)`, or `μ(x)` at full depth.
    pub fn lost_mass(&self, x: &Prefix) -> Dyadic {
        if x.len() >= self.depth {
            return self.mass(x).clone();
        }
        let kids = self.mass(&x.child(false)) + self.mass(&x.child(true));
        self.mass(x).checked_sub(&kids).unwrap_or_else(|_| Dyadic::zero())
    }

    pub fn truncate(&self, depth: usize) -> SemimeasureTable {
        let depth = depth.min(self.depth);
        SemimeasureTable {
            depth,
            masses: self.masses[..node_count(depth)].to_vec(),
        }
    }

    /// Pointwise scaling by a dyadic factor.
    pub fn scale(&self, w: &Dyadic) -> SemimeasureTable {
        SemimeasureTable {
            depth: self.depth,
            masses: self.masses.iter().map(|m| m * w).collect(),
        }
    }

    /// Masses of the depth-`k` nodes as an elementary function, used when a
    /// table is read as a density.
    pub fn level(&self, k: usize) -> Vec<&Dyadic> {
        Prefix::all_of_length(k).map(|x| &self.masses[x.index()]).collect()
    }
}

/// Mean `μ(f)` of an elementary function.
///
/// With `δ(y) = μ(y) - μ(y0) - μ(y1)` the mass lost at `y` (and `δ(y) = μ(y)`
/// at full depth), the mean is `Σ_y δ(y) · min_{yΩ} f`. It is superadditive
/// and positively homogeneous, linear for measures, and equals
/// `Σ_{|x| = f.depth} μ(x) f(x)` when no mass is lost above `f.depth`.
/// Mixed-sign `f` is only accepted for measures.
pub fn mean(mu: &SemimeasureTable, f: &ElemFn) -> Result<BigRational> {
    let k = f.depth();
    if k > mu.depth() {
        return Err(Error::Depth(format!(
            "function depth {k} exceeds table depth {}",
            mu.depth()
        )));
    }
    if !f.is_nonnegative() && !mu.is_measure() {
        return Err(Error::MixedSign);
    }
    let mut acc: BigRational = Prefix::all_of_length(k)
        .zip(f.values())
        .filter(|(x, _)| !mu.mass(x).is_zero())
        .map(|(x, v)| mu.mass(&x).to_rational() * v)
        .sum();
    // minima of f over the cylinders above depth k, deepest level first
    let mut mins: Vec<BigRational> = f.values().to_vec();
    for level in (0..k).rev() {
        mins = mins.chunks(2).map(|c| c[0].clone().min(c[1].clone())).collect();
        for (x, m) in Prefix::all_of_length(level).zip(&mins) {
            let lost = mu.lost_mass(&x);
            if !lost.is_zero() {
                acc += lost.to_rational() * m;
            }
        }
    }
    Ok(acc)
}

/// `min_{xΩ} f` for every `|x| <= n`, indexed by [`Prefix::index`].
pub(crate) fn cylinder_minima(f: &ElemFn, n: usize) -> Vec<BigRational> {
    let n = n.max(f.depth());
    let mut levels = vec![f.lift(n).unwrap().values().to_vec()];
    for _ in 0..n {
        let next = levels
            .last()
            .unwrap()
            .chunks(2)
            .map(|c| c[0].clone().min(c[1].clone()))
            .collect();
        levels.push(next);
    }
    levels.into_iter().rev().flatten().collect()
}

/// Masses on pairs of prefixes: `ν(x, y)` for `|x| <= n1`, `|y| <= n2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairTable {
    depths: (usize, usize),
    masses: Vec<Dyadic>,
}

impl PairTable {
    pub fn depths(&self) -> (usize, usize) {
        self.depths
    }

    pub fn mass(&self, x: &Prefix, y: &Prefix) -> &Dyadic {
        &self.masses[x.index() * node_count(self.depths.1) + y.index()]
    }

    /// Semimeasure inequality in each coordinate separately.
    pub fn check(&self) -> bool {
        let (n1, n2) = self.depths;
        let xs: Vec<Prefix> = Prefix::all_up_to(n1).collect();
        let ys: Vec<Prefix> = Prefix::all_up_to(n2).collect();
        for x in &xs {
            for y in &ys {
                let m = self.mass(x, y);
                if x.len() < n1 && *m < self.mass(&x.child(false), y) + self.mass(&x.child(true), y) {
                    return false;
                }
                if y.len() < n2 && *m < self.mass(x, &y.child(false)) + self.mass(x, &y.child(true)) {
                    return false;
                }
            }
        }
        true
    }

    /// `Σ_{|y| = k} ν(x, y)`.
    pub fn marginal_x(&self, x: &Prefix, k: usize) -> Dyadic {
        Prefix::all_of_length(k).map(|y| self.mass(x, &y).clone()).sum()
    }

    /// Mean of the product function `f(α) g(β)`, nonnegative factors.
    pub fn mean_rect(&self, f: &ElemFn, g: &ElemFn) -> Result<BigRational> {
        if f.depth() > self.depths.0 || g.depth() > self.depths.1 {
            return Err(Error::Depth("rectangle deeper than pair table".into()));
        }
        if !f.is_nonnegative() || !g.is_nonnegative() {
            return Err(Error::MixedSign);
        }
        let (n1, n2) = self.depths;
        let (fmin, gmin) = (cylinder_minima(f, n1), cylinder_minima(g, n2));
        let mut acc = BigRational::zero();
        for x in Prefix::all_up_to(n1) {
            for y in Prefix::all_up_to(n2) {
                let lost = self.lost_mass(&x, &y);
                if !lost.is_zero() {
                    acc += lost * &fmin[x.index()] * &gmin[y.index()];
                }
            }
        }
        Ok(acc)
    }

    /// Two-dimensional mass lost at `(x, y)`: the inclusion-exclusion of
    /// `ν` over `{x, x0, x1} × {y, y0, y1}`. Nonnegative for products.
    pub fn lost_mass(&self, x: &Prefix, y: &Prefix) -> BigRational {
        let (n1, n2) = self.depths;
        let side = |p: &Prefix, n: usize| {
            let mut v = vec![(p.clone(), 1i64)];
            if p.len() < n {
                v.push((p.child(false), -1));
                v.push((p.child(true), -1));
            }
            v
        };
        let mut acc = BigRational::zero();
        for (a, sa) in side(x, n1) {
            for (b, sb) in side(y, n2) {
                let m = self.mass(&a, &b).to_rational();
                if sa * sb > 0 {
                    acc += m;
                } else {
                    acc -= m;
                }
            }
        }
        acc
    }

    /// The pair table read on Ω through bit interleaving `x1 y1 x2 y2 ...`,
    /// to depth `2 * min(n1, n2)`.
    pub fn interleaved(&self) -> SemimeasureTable {
        let n = self.depths.0.min(self.depths.1);
        let masses = Prefix::all_up_to(2 * n)
            .map(|z| {
                let (x, y) = deinterleave(&z);
                self.mass(&x, &y).clone()
            })
            .collect();
        SemimeasureTable {
            depth: 2 * n,
            masses,
        }
    }
}

/// Splits `x1 y1 x2 y2 ...` into its even and odd positions.
pub fn deinterleave(z: &Prefix) -> (Prefix, Prefix) {
    let mut x = Prefix::empty();
    let mut y = Prefix::empty();
    for (i, &b) in z.bits().iter().enumerate() {
        if i % 2 == 0 {
            x.push(b)
        } else {
            y.push(b)
        }
    }
    (x, y)
}

pub fn interleave(x: &Prefix, y: &Prefix) -> Prefix {
    let mut z = Prefix::empty();
    for i in 0..x.len().max(y.len()) {
        if i < x.len() {
            z.push(x.bit(i));
        }
        if i < y.len() {
            z.push(y.bit(i));
        }
    }
    z
}

/// `(μ ⊗ φ)(x, y) = μ(x) φ(y)`.
pub fn product(mu: &SemimeasureTable, phi: &SemimeasureTable) -> PairTable {
    let mut masses = Vec::with_capacity(mu.masses.len() * phi.masses.len());
    for a in &mu.masses {
        for b in &phi.masses {
            masses.push(a * b);
        }
    }
    PairTable {
        depths: (mu.depth, phi.depth),
        masses,
    }
}

/// The largest measure on the lattice of depth-`E.depth` functions that is
/// dominated by `mu`.
///
/// It keeps `mu` on the depth-`k` nodes, is additive above them, and is set
/// to zero strictly below (those values carry no lattice information).
pub fn coarse_grain(mu: &SemimeasureTable, e: Lattice) -> Result<SemimeasureTable> {
    let k = e.depth;
    if k > mu.depth {
        return Err(Error::Depth(format!(
            "lattice depth {k} exceeds table depth {}",
            mu.depth
        )));
    }
    let mut out = SemimeasureTable::zero(mu.depth);
    for x in Prefix::all_of_length(k) {
        out.set(&x, mu.mass(&x).clone());
    }
    for level in (0..k).rev() {
        for x in Prefix::all_of_length(level) {
            let s = out.mass(&x.child(false)) + out.mass(&x.child(true));
            out.set(&x, s);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elemfn::rat;
    use num_traits::Signed;
    use proptest::prelude::*;

    fn d(n: u64, e: u32) -> Dyadic {
        Dyadic::new(n, e)
    }

    fn p(s: &str) -> Prefix {
        s.parse().unwrap()
    }

    #[test]
    fn lambda_means() {
        let l = SemimeasureTable::lambda(3);
        assert!(l.is_measure());
        assert_eq!(mean(&l, &ElemFn::one()).unwrap(), rat(1));
        assert_eq!(mean(&l, &ElemFn::from_ints(1, &[2, 0]).unwrap()).unwrap(), rat(1));
        assert!(mean(&l, &ElemFn::from_ints(1, &[2, -1]).unwrap()).is_ok());
        assert!(mean(&l, &ElemFn::one().lift(4).unwrap()).is_err());
    }

    #[test]
    fn semimeasure_rejects_mixed_sign() {
        let mu = SemimeasureTable::new(1, vec![d(1, 0), d(1, 1), d(1, 2)]).unwrap();
        assert!(!mu.is_measure());
        assert_eq!(
            mean(&mu, &ElemFn::from_ints(1, &[1, -1]).unwrap()),
            Err(Error::MixedSign)
        );
    }

    #[test]
    fn validation() {
        assert!(SemimeasureTable::new(1, vec![d(1, 1), d(1, 1), d(1, 2)]).is_err());
        assert!(SemimeasureTable::new(0, vec![d(3, 1)]).is_err());
        assert!(SemimeasureTable::new(1, vec![d(1, 0)]).is_err());
    }

    #[test]
    fn product_examples() {
        let l = SemimeasureTable::lambda(2);
        let pt = product(&l, &l);
        assert_eq!(*pt.mass(&p("1"), &p("01")), d(1, 3));
        assert!(pt.check());
        let mu = SemimeasureTable::new(1, vec![d(1, 0), d(1, 1), d(1, 2)]).unwrap();
        let zero = SemimeasureTable::point_mass(&Prefix::empty(), 2);
        let pt = product(&mu, &zero);
        assert_eq!(pt.mass(&p("0"), &p("00")), mu.mass(&p("0")));
        assert!(pt.mass(&p("0"), &p("01")).is_zero());
        assert_eq!(pt.marginal_x(&p("1"), 2), *mu.mass(&p("1")));
    }

    #[test]
    fn coarse_grain_example() {
        let mu = SemimeasureTable::new(1, vec![d(1, 0), d(1, 1), d(1, 2)]).unwrap();
        let nu = coarse_grain(&mu, Lattice::new(1)).unwrap();
        assert_eq!(*nu.mass(&p("0")), d(1, 1));
        assert_eq!(*nu.mass(&p("1")), d(1, 2));
        assert_eq!(*nu.mass(&Prefix::empty()), d(3, 2));
        let l = SemimeasureTable::lambda(3);
        assert_eq!(coarse_grain(&l, Lattice::new(3)).unwrap(), l);
        assert!(coarse_grain(&l, Lattice::new(4)).is_err());
    }

    #[test]
    fn interleaving() {
        assert_eq!(interleave(&p("00"), &p("11")), p("0101"));
        assert_eq!(deinterleave(&p("01011")), (p("001"), p("11")));
        let l = SemimeasureTable::lambda(2);
        assert_eq!(product(&l, &l).interleaved(), SemimeasureTable::lambda(4));
    }

    /// Random semimeasure: each node passes a random share of its mass to
    /// each child, leaving a random deficiency.
    pub(crate) fn arb_semimeasure(depth: usize) -> impl Strategy<Value = SemimeasureTable> {
        proptest::collection::vec((0u64..=8, 0u64..=8), node_count(depth)).prop_map(move |shares| {
            let mut t = SemimeasureTable::zero(depth);
            t.set(&Prefix::empty(), Dyadic::one());
            for x in Prefix::all_up_to(depth.saturating_sub(1)).take_while(|x| x.len() < depth) {
                let m = t.mass(&x).clone();
                let (a, b) = shares[x.index()];
                let (a, b) = if a + b > 8 { (a, 8 - a) } else { (a, b) };
                t.set(&x.child(false), &m * &Dyadic::new(a, 3));
                t.set(&x.child(true), &m * &Dyadic::new(b, 3));
            }
            t
        })
    }

    /// Mass lost at each node times the minimum of `h` over its cylinder,
    /// by direct enumeration of leaves.
    fn brute_mean(t: &SemimeasureTable, h: &ElemFn) -> BigRational {
        let n = t.depth();
        let mut acc = BigRational::zero();
        for y in Prefix::all_up_to(n) {
            let mut lost = t.mass(&y).to_rational();
            if y.len() < n {
                lost -= t.mass(&y.child(false)).to_rational() + t.mass(&y.child(true)).to_rational();
            }
            let min = Prefix::all_of_length(n)
                .filter(|z| y.is_prefix_of(z))
                .map(|z| h.at(&z).clone())
                .min()
                .unwrap();
            acc += lost * min;
        }
        acc
    }

    fn arb_nonneg(depth: usize) -> impl Strategy<Value = ElemFn> {
        proptest::collection::vec(0i64..10, 1 << depth)
            .prop_map(move |v| ElemFn::from_ints(depth, &v).unwrap())
    }

    proptest! {
        #[test]
        fn random_tables_are_semimeasures(t in arb_semimeasure(4)) {
            prop_assert!(t.check().is_ok());
        }

        #[test]
        fn mean_is_superadditive(t in arb_semimeasure(3), f in arb_nonneg(2), g in arb_nonneg(3)) {
            let lhs = mean(&t, &f.add(&g)).unwrap();
            prop_assert_eq!(mean(&t, &f).unwrap(), brute_mean(&t, &f));
            prop_assert_eq!(lhs.clone(), brute_mean(&t, &f.add(&g)));
            prop_assert!(lhs >= mean(&t, &f).unwrap() + mean(&t, &g).unwrap());
        }

        #[test]
        fn mean_matches_level_sum_without_early_loss(f in arb_nonneg(2)) {
            let l = SemimeasureTable::lambda(3);
            let mut t = l.scale(&Dyadic::one());
            // lose mass only below depth 2
            t.set(&Prefix::from_value(0, 3), Dyadic::zero());
            let level: BigRational = Prefix::all_of_length(2)
                .map(|x| t.mass(&x).to_rational() * f.at(&x))
                .sum();
            prop_assert_eq!(mean(&t, &f).unwrap(), level);
        }

        #[test]
        fn product_factorizes_on_rectangles(a in arb_semimeasure(2), b in arb_semimeasure(2),
                                            f in arb_nonneg(2), g in arb_nonneg(1)) {
            let pt = product(&a, &b);
            prop_assert!(pt.check());
            let expanded = brute_mean(&a, &f) * brute_mean(&b, &g);
            prop_assert_eq!(pt.mean_rect(&f, &g).unwrap(), expanded.clone());
            prop_assert_eq!(expanded, mean(&a, &f).unwrap() * mean(&b, &g).unwrap());
            for x in Prefix::all_up_to(2) {
                prop_assert!(pt.marginal_x(&x, 2) <= *a.mass(&x));
            }
        }

        #[test]
        fn coarse_grain_is_dominated_idempotent_measure(t in arb_semimeasure(4), k in 0usize..=4) {
            let nu = coarse_grain(&t, Lattice::new(k)).unwrap();
            prop_assert!(nu.truncate(k).is_measure());
            prop_assert!(nu.truncate(k).le(&t));
            prop_assert!(nu.check().is_ok());
            prop_assert_eq!(coarse_grain(&nu, Lattice::new(k)).unwrap(), nu);
        }

        #[test]
        fn measures_are_fixed_by_coarse_graining(k in 0usize..=3) {
            let l = SemimeasureTable::lambda(3);
            prop_assert_eq!(coarse_grain(&l, Lattice::new(k)).unwrap().truncate(k), l.truncate(k));
        }

        #[test]
        fn product_of_measures_is_measure(k in 0usize..3) {
            let l = SemimeasureTable::lambda(2);
            let pt = product(&l, &l);
            for x in Prefix::all_up_to(2) {
                prop_assert_eq!(pt.marginal_x(&x, k), l.mass(&x).clone());
            }
        }
    }

    #[test]
    fn signed_helper_sanity() {
        assert!(rat(-1).is_negative());
    }
}
