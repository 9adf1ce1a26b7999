//! Elementary functions: rational-valued functions on infinite sequences
//! that depend on a fixed number of leading bits, and the lattices of such
//! functions of bounded depth.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::prefix::Prefix;

/// Pointwise binary operations on elementary functions.
#[derive(Clone, Debug)]
pub enum PointwiseOp {
    Min,
    Max,
    Add,
    /// Multiplies the first argument by a constant; the second is ignored.
    Scale(BigRational),
}

/// A function `Ω → ℚ` depending only on the first `depth` bits, stored as a
/// table indexed by `Prefix::value()` of length-`depth` prefixes.
#[derive(Clone, Debug)]
pub struct ElemFn {
    depth: usize,
    values: Vec<BigRational>,
}

impl ElemFn {
    pub fn new(depth: usize, values: Vec<BigRational>) -> Result<Self> {
        let expected = 1usize << depth;
        if values.len() != expected {
            return Err(Error::TableSize {
                depth,
                expected,
                got: values.len(),
            });
        }
        Ok(ElemFn { depth, values })
    }

    pub fn from_fn(depth: usize, f: impl Fn(&Prefix) -> BigRational) -> Self {
        let values = Prefix::all_of_length(depth).map(|x| f(&x)).collect();
        ElemFn { depth, values }
    }

    pub fn from_ints(depth: usize, ints: &[i64]) -> Result<Self> {
        ElemFn::new(depth, ints.iter().map(|&v| rat(v)).collect())
    }

    pub fn constant(depth: usize, c: BigRational) -> Self {
        ElemFn {
            depth,
            values: vec![c; 1 << depth],
        }
    }

    /// The unity function at depth 0.
    pub fn one() -> Self {
        ElemFn::constant(0, BigRational::one())
    }

    /// `[α ∈ xΩ]` at depth `max(depth, |x|)`.
    pub fn indicator(x: &Prefix, depth: usize) -> Self {
        let depth = depth.max(x.len());
        ElemFn::from_fn(depth, |y| {
            if x.is_prefix_of(y) {
                BigRational::one()
            } else {
                BigRational::zero()
            }
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &[BigRational] {
        &self.values
    }

    /// Value on the cylinder of a length-`depth` prefix.
    pub fn at(&self, x: &Prefix) -> &BigRational {
        debug_assert!(x.len() >= self.depth);
        &self.values[x.take(self.depth).value() as usize]
    }

    /// Value at any sequence starting with `x`, where `|x| >= depth`.
    pub fn eval(&self, x: &Prefix) -> Result<&BigRational> {
        if x.len() < self.depth {
            return Err(Error::Depth(format!(
                "prefix of length {} does not determine a depth-{} function",
                x.len(),
                self.depth
            )));
        }
        Ok(self.at(x))
    }

    /// Re-expresses the function on the finer lattice of depth `new_depth`.
    pub fn lift(&self, new_depth: usize) -> Result<ElemFn> {
        if new_depth < self.depth {
            return Err(Error::CannotCoarsen {
                current: self.depth,
                target: new_depth,
            });
        }
        let shift = new_depth - self.depth;
        let values = (0..1usize << new_depth)
            .map(|i| self.values[i >> shift].clone())
            .collect();
        Ok(ElemFn {
            depth: new_depth,
            values,
        })
    }

    /// Exact pointwise combination at the common (maximum) depth.
    pub fn pointwise(op: &PointwiseOp, f: &ElemFn, g: &ElemFn) -> ElemFn {
        if let PointwiseOp::Scale(c) = op {
            return f.map(|v| v * c);
        }
        let depth = f.depth.max(g.depth);
        let (f, g) = (f.lift(depth).unwrap(), g.lift(depth).unwrap());
        let values = f
            .values
            .iter()
            .zip(&g.values)
            .map(|(a, b)| match op {
                PointwiseOp::Min => a.min(b).clone(),
                PointwiseOp::Max => a.max(b).clone(),
                PointwiseOp::Add => a + b,
                PointwiseOp::Scale(_) => unreachable!(),
            })
            .collect();
        ElemFn { depth, values }
    }

    pub fn min(&self, other: &ElemFn) -> ElemFn {
        ElemFn::pointwise(&PointwiseOp::Min, self, other)
    }

    pub fn max(&self, other: &ElemFn) -> ElemFn {
        ElemFn::pointwise(&PointwiseOp::Max, self, other)
    }

    pub fn add(&self, other: &ElemFn) -> ElemFn {
        ElemFn::pointwise(&PointwiseOp::Add, self, other)
    }

    pub fn scale(&self, c: &BigRational) -> ElemFn {
        ElemFn::pointwise(&PointwiseOp::Scale(c.clone()), self, self)
    }

    pub fn map(&self, f: impl Fn(&BigRational) -> BigRational) -> ElemFn {
        ElemFn {
            depth: self.depth,
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn cube(&self) -> ElemFn {
        self.map(|v| v * v * v)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| !v.is_negative())
    }

    /// Pointwise `self <= other` as functions on Ω.
    pub fn le(&self, other: &ElemFn) -> bool {
        let depth = self.depth.max(other.depth);
        let (a, b) = (self.lift(depth).unwrap(), other.lift(depth).unwrap());
        a.values.iter().zip(&b.values).all(|(x, y)| x <= y)
    }

    /// Smallest depth at which this function can be represented.
    pub fn minimal_depth(&self) -> usize {
        let mut f = self.clone();
        while f.depth > 0 && f.values.chunks(2).all(|c| c[0] == c[1]) {
            f = ElemFn {
                depth: f.depth - 1,
                values: f.values.chunks(2).map(|c| c[0].clone()).collect(),
            };
        }
        f.depth
    }
}

/// Extensional equality: equal after lifting to a common depth.
impl PartialEq for ElemFn {
    fn eq(&self, other: &Self) -> bool {
        let depth = self.depth.max(other.depth);
        self.lift(depth).unwrap().values == other.lift(depth).unwrap().values
    }
}

impl Eq for ElemFn {}

/// The lattice generated by unity and all elementary functions of a given
/// depth. Closure under min, max and rational combinations holds because
/// depth-`n` tables are closed under pointwise operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Lattice {
    pub depth: usize,
}

impl Lattice {
    pub fn new(depth: usize) -> Self {
        Lattice { depth }
    }

    pub fn contains(&self, f: &ElemFn) -> bool {
        f.minimal_depth() <= self.depth
    }
}

pub fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn dyadic_rat(d: &Dyadic) -> BigRational {
    d.to_rational()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f(depth: usize, v: &[i64]) -> ElemFn {
        ElemFn::from_ints(depth, v).unwrap()
    }

    #[test]
    fn lift_examples() {
        assert_eq!(ElemFn::one().lift(2).unwrap().values(), &[rat(1), rat(1), rat(1), rat(1)]);
        let g = f(1, &[2, 0]).lift(2).unwrap();
        assert_eq!(g, f(2, &[2, 2, 0, 0]));
        assert_eq!(g.values(), &[rat(2), rat(2), rat(0), rat(0)]);
        assert!(matches!(
            f(2, &[1, 2, 3, 4]).lift(1),
            Err(Error::CannotCoarsen { current: 2, target: 1 })
        ));
    }

    #[test]
    fn pointwise_examples() {
        assert_eq!(ElemFn::one().min(&ElemFn::one()), ElemFn::one());
        assert_eq!(f(1, &[1, 0]).add(&f(1, &[0, 1])), ElemFn::one());
        let half_quarter = ElemFn::new(
            1,
            vec![
                BigRational::new(1.into(), 2.into()),
                BigRational::new(1.into(), 4.into()),
            ],
        )
        .unwrap();
        let scaled = half_quarter.scale(&rat(3));
        assert_eq!(scaled.values()[0], BigRational::new(3.into(), 2.into()));
        assert_eq!(scaled.values()[1], BigRational::new(3.into(), 4.into()));
    }

    #[test]
    fn extensional_equality_and_lattice() {
        assert_eq!(f(0, &[5]), f(2, &[5, 5, 5, 5]));
        assert_ne!(f(1, &[5, 4]), f(2, &[5, 5, 5, 5]));
        assert!(Lattice::new(1).contains(&f(3, &[1, 1, 1, 1, 2, 2, 2, 2])));
        assert!(!Lattice::new(1).contains(&f(2, &[1, 2, 1, 2])));
        assert!(matches!(ElemFn::from_ints(2, &[1, 2]), Err(Error::TableSize { .. })));
    }

    fn arb_fn(depth: usize) -> impl Strategy<Value = ElemFn> {
        proptest::collection::vec(-8i64..8, 1 << depth).prop_map(move |v| f(depth, &v))
    }

    proptest! {
        #[test]
        fn lift_is_lattice_homomorphism(a in arb_fn(2), b in arb_fn(2), extra in 0usize..3) {
            let d = 2 + extra;
            prop_assert_eq!(a.min(&b).lift(d).unwrap(), a.lift(d).unwrap().min(&b.lift(d).unwrap()));
            prop_assert_eq!(a.max(&b).lift(d).unwrap(), a.lift(d).unwrap().max(&b.lift(d).unwrap()));
            prop_assert_eq!(a.add(&b).lift(d).unwrap(), a.lift(d).unwrap().add(&b.lift(d).unwrap()));
        }

        #[test]
        fn mixed_depth_ops_agree_with_lifted(a in arb_fn(1), b in arb_fn(3)) {
            prop_assert_eq!(a.min(&b), a.lift(3).unwrap().min(&b));
            prop_assert!(a.min(&b).le(&a) && a.min(&b).le(&b));
        }
    }
}
