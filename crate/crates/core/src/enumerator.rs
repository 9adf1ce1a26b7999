//! Dovetailed enumeration of the machines into stage-indexed lower bounds
//! `m_t(x)`, `m_t(x|y)` and `M_t(x)`.
//!
//! Stage `t` runs every program of length at most `t` for `t²` steps. The
//! bounds keep a frontier of program prefixes whose fate is still open
//! (out of budget, or waiting for input at the length limit) and resume only
//! those, so advancing a stage never repeats settled work. Masses are sums of
//! `2^-|p|`, held as integer numerators over `2^MASS_EXP`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::dyadic::{lognorm_ext, Dyadic, ExtInt};
use crate::error::{Error, Result};
use crate::machine::{explore, MachineConfig, Status, Variant, Visitor, Vm, DEFAULT_LENGTH_CAP};
use crate::prefix::Prefix;
use crate::semimeasure::SemimeasureTable;

/// Exponent of the common denominator of all enumerated masses.
pub const MASS_EXP: u32 = 64;

/// Default depth of the continuous bound's tree.
pub const DEFAULT_TREE_DEPTH: usize = 16;

/// Default largest stage shipped with the artifact.
pub const DEFAULT_MAX_STAGE: usize = 18;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Stage(pub usize);

impl Stage {
    /// Longest program run at this stage.
    pub fn max_len(self) -> usize {
        self.0
    }

    /// Step budget of every run at this stage.
    pub fn budget(self) -> u64 {
        (self.0 as u64) * (self.0 as u64)
    }
}

/// A program prefix whose outcome is not final at the current stage.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrontierRecord {
    pub program: Prefix,
    /// First output length not yet credited along this program (monotone
    /// machine only; 0 for the prefix machines).
    pub credit_from: usize,
}

fn weight(len: usize) -> u128 {
    1u128 << (MASS_EXP as usize - len)
}

fn to_dyadic(num: u128) -> Dyadic {
    Dyadic::new(num, MASS_EXP)
}

fn check_cap(stage: usize, cap: usize) -> Result<()> {
    if stage > cap {
        return Err(Error::CapExceeded {
            requested: stage,
            cap,
        });
    }
    Ok(())
}

/// Outcome of resuming one frontier record.
#[derive(Default)]
struct Harvest {
    frontier: Vec<FrontierRecord>,
    halted: Vec<(Prefix, u128)>,
    credits: Vec<(usize, u128)>,
}

struct DiscreteVisitor {
    max_len: usize,
    out: Harvest,
}

impl Visitor for DiscreteVisitor {
    fn node(&mut self, path: &[bool], _vm: &Vm, status: &Status, _: usize) -> bool {
        match status {
            Status::Halted(x) => self.out.halted.push((x.clone(), weight(path.len()))),
            Status::Diverged => {}
            Status::OutOfBudget => self.out.frontier.push(FrontierRecord {
                program: Prefix::from_slice(path),
                credit_from: 0,
            }),
            Status::NeedsMoreInput => {
                if path.len() == self.max_len {
                    self.out.frontier.push(FrontierRecord {
                        program: Prefix::from_slice(path),
                        credit_from: 0,
                    })
                }
            }
        }
        true
    }
}

/// Credits each node with the output prefixes it is the first on its path
/// to reach, which makes `M_t(x) = λ{ω : out_t(ω) extends x}`.
struct ContinuousVisitor {
    max_len: usize,
    depth: usize,
    out: Harvest,
}

impl Visitor for ContinuousVisitor {
    fn node(&mut self, path: &[bool], vm: &Vm, status: &Status, credit_from: usize) -> bool {
        let out = vm.output();
        let top = out.len().min(self.depth);
        let w = weight(path.len());
        for l in credit_from..=top {
            let idx = Prefix::from_slice(&out[..l]).index();
            self.out.credits.push((idx, w));
        }
        if out.len() >= self.depth {
            return false;
        }
        let open = match status {
            Status::Halted(_) | Status::Diverged => false,
            Status::OutOfBudget => true,
            Status::NeedsMoreInput => path.len() == self.max_len,
        };
        if open {
            self.out.frontier.push(FrontierRecord {
                program: Prefix::from_slice(path),
                credit_from: credit_from.max(top + 1),
            });
        }
        true
    }
}

/// Resumes every record in parallel. Each record's results are kept in the
/// order its subtree was walked, and records are concatenated in frontier
/// order, so the merge does not depend on the worker count.
fn resume<V, F>(frontier: &[FrontierRecord], make: F, cfg: &MachineConfig, stage: Stage) -> Vec<Harvest>
where
    V: Visitor + Send,
    F: Fn() -> V + Sync,
    V: Into<Harvest>,
{
    let y = cfg.conditional.clone().unwrap_or_default();
    frontier
        .par_iter()
        .map(|rec| {
            let mut v = make();
            explore(
                Vm::new(cfg),
                rec.program.bits(),
                y.bits(),
                stage.max_len(),
                stage.budget(),
                rec.credit_from,
                &mut v,
            );
            v.into()
        })
        .collect()
}

impl From<DiscreteVisitor> for Harvest {
    fn from(v: DiscreteVisitor) -> Harvest {
        v.out
    }
}

impl From<ContinuousVisitor> for Harvest {
    fn from(v: ContinuousVisitor) -> Harvest {
        v.out
    }
}

fn root_frontier() -> Vec<FrontierRecord> {
    vec![FrontierRecord {
        program: Prefix::empty(),
        credit_from: 0,
    }]
}

/// Lower bound `m_t(x)` (or `m_t(x|y)` for a conditional configuration).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscreteBound {
    cfg: MachineConfig,
    stage: Stage,
    frontier: Vec<FrontierRecord>,
    mass: BTreeMap<Prefix, u128>,
}

impl DiscreteBound {
    /// Stage 0: nothing has run.
    pub fn new(cfg: MachineConfig) -> Self {
        assert!(cfg.variant != Variant::MonotoneContinuous);
        DiscreteBound {
            cfg,
            stage: Stage(0),
            frontier: root_frontier(),
            mass: BTreeMap::new(),
        }
    }

    /// Unconditional bound at stage `t`.
    pub fn at_stage(t: usize) -> Result<Self> {
        Self::at_stage_with(MachineConfig::discrete(), t)
    }

    pub fn at_stage_with(cfg: MachineConfig, t: usize) -> Result<Self> {
        check_cap(t, DEFAULT_LENGTH_CAP)?;
        let mut b = Self::new(cfg);
        b.advance_to(t);
        Ok(b)
    }

    pub(crate) fn from_parts(
        cfg: MachineConfig,
        stage: Stage,
        frontier: Vec<FrontierRecord>,
        mass: BTreeMap<Prefix, u128>,
    ) -> Self {
        DiscreteBound {
            cfg,
            stage,
            frontier,
            mass,
        }
    }

    pub fn advance(&mut self) {
        let next = Stage(self.stage.0 + 1);
        let max_len = next.max_len();
        let harvests = resume(
            &self.frontier,
            || DiscreteVisitor {
                max_len,
                out: Harvest::default(),
            },
            &self.cfg,
            next,
        );
        let mut frontier = Vec::new();
        for h in harvests {
            for (x, w) in h.halted {
                *self.mass.entry(x).or_insert(0) += w;
            }
            frontier.extend(h.frontier);
        }
        frontier.sort();
        self.frontier = frontier;
        self.stage = next;
    }

    pub fn advance_to(&mut self, t: usize) {
        while self.stage.0 < t {
            self.advance();
        }
    }

    pub fn config(&self) -> &MachineConfig {
        &self.cfg
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn frontier(&self) -> &[FrontierRecord] {
        &self.frontier
    }

    /// Numerators over `2^MASS_EXP`, in length-lexicographic order.
    pub fn raw_masses(&self) -> &BTreeMap<Prefix, u128> {
        &self.mass
    }

    pub fn mass(&self, x: &Prefix) -> Dyadic {
        self.mass.get(x).map_or_else(Dyadic::zero, |&n| to_dyadic(n))
    }

    pub fn masses(&self) -> impl Iterator<Item = (&Prefix, Dyadic)> {
        self.mass.iter().map(|(x, &n)| (x, to_dyadic(n)))
    }

    pub fn kraft_sum(&self) -> Dyadic {
        let total: u128 = self.mass.values().sum();
        to_dyadic(total)
    }

    /// `K_t(x)`, infinite when nothing has printed `x` yet.
    pub fn complexity(&self, x: &Prefix) -> ExtInt {
        lognorm_ext(&self.mass(x))
    }
}

pub fn advance_discrete(b: &DiscreteBound) -> DiscreteBound {
    let mut b = b.clone();
    b.advance();
    b
}

/// Lower bound `M_t(x)` for `|x| <= depth` from the monotone machine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContinuousBound {
    stage: Stage,
    depth: usize,
    frontier: Vec<FrontierRecord>,
    /// Dense numerators indexed by [`Prefix::index`].
    tree: Vec<u128>,
}

impl ContinuousBound {
    pub fn new(depth: usize) -> Self {
        ContinuousBound {
            stage: Stage(0),
            depth,
            frontier: root_frontier(),
            tree: vec![0; (1usize << (depth + 1)) - 1],
        }
    }

    pub fn at_stage(t: usize, depth: usize) -> Result<Self> {
        check_cap(t, DEFAULT_LENGTH_CAP)?;
        let mut b = Self::new(depth);
        b.advance_to(t);
        Ok(b)
    }

    pub(crate) fn from_parts(
        stage: Stage,
        depth: usize,
        frontier: Vec<FrontierRecord>,
        tree: Vec<u128>,
    ) -> Self {
        ContinuousBound {
            stage,
            depth,
            frontier,
            tree,
        }
    }

    pub fn advance(&mut self) {
        let next = Stage(self.stage.0 + 1);
        let (max_len, depth) = (next.max_len(), self.depth);
        let harvests = resume(
            &self.frontier,
            || ContinuousVisitor {
                max_len,
                depth,
                out: Harvest::default(),
            },
            &MachineConfig::monotone(),
            next,
        );
        let mut frontier = Vec::new();
        for h in harvests {
            for (i, w) in h.credits {
                self.tree[i] += w;
            }
            frontier.extend(h.frontier);
        }
        frontier.sort();
        self.frontier = frontier;
        self.stage = next;
    }

    pub fn advance_to(&mut self, t: usize) {
        while self.stage.0 < t {
            self.advance();
        }
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn frontier(&self) -> &[FrontierRecord] {
        &self.frontier
    }

    pub fn raw_tree(&self) -> &[u128] {
        &self.tree
    }

    pub fn mass(&self, x: &Prefix) -> Dyadic {
        if x.len() > self.depth {
            return Dyadic::zero();
        }
        to_dyadic(self.tree[x.index()])
    }

    /// The whole tree as an exact semimeasure table.
    pub fn tree(&self) -> SemimeasureTable {
        SemimeasureTable::new(self.depth, self.tree.iter().map(|&n| to_dyadic(n)).collect())
            .expect("enumerated tree is a semimeasure")
    }

    /// `KM_t(x)`; infinite when the mass is 0 or `x` is deeper than the tree.
    pub fn complexity(&self, x: &Prefix) -> ExtInt {
        lognorm_ext(&self.mass(x))
    }
}

pub fn advance_continuous(b: &ContinuousBound) -> ContinuousBound {
    let mut b = b.clone();
    b.advance();
    b
}

/// `2^-2⌈log₂(i+2)⌉`; these weights sum to 1/2.
pub fn mixture_weight(i: usize) -> Dyadic {
    let n = (i + 2) as u64;
    let ceil_log = 64 - (n - 1).leading_zeros();
    Dyadic::pow2_neg(2 * ceil_log)
}

/// `Σ wᵢ μᵢ`, refusing weight sums above 1.
pub fn mixture_semimeasure(components: &[(Dyadic, SemimeasureTable)]) -> Result<SemimeasureTable> {
    let Some((_, first)) = components.first() else {
        return Ok(SemimeasureTable::zero(0));
    };
    let depth = first.depth();
    let total: Dyadic = components.iter().map(|(w, _)| w.clone()).sum();
    if total > Dyadic::one() {
        return Err(Error::WeightSum);
    }
    let mut out = SemimeasureTable::zero(depth);
    for (w, t) in components {
        if t.depth() != depth {
            return Err(Error::Depth("mixture components differ in depth".into()));
        }
        t.check()?;
        for x in Prefix::all_up_to(depth) {
            let m = out.mass(&x) + &(w * t.mass(&x));
            out.set(&x, m);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{enumerate_programs, identity_transducer, literal_program, run_monotone};
    use proptest::prelude::*;

    fn p(s: &str) -> Prefix {
        s.parse().unwrap()
    }

    #[test]
    fn stage_zero_is_empty() {
        let d = DiscreteBound::at_stage(0).unwrap();
        assert!(d.raw_masses().is_empty());
        assert!(d.kraft_sum().is_zero());
        let c = ContinuousBound::at_stage(0, 4).unwrap();
        assert!(c.raw_tree().iter().all(|&n| n == 0));
        assert_eq!(d.complexity(&Prefix::empty()), ExtInt::PosInf);
    }

    #[test]
    fn halt_program_counts_at_stage_one() {
        let d = DiscreteBound::at_stage(1).unwrap();
        assert!(d.mass(&Prefix::empty()) >= Dyadic::pow2_neg(1));
        let c = ContinuousBound::at_stage(1, 4).unwrap();
        assert_eq!(c.mass(&Prefix::empty()), Dyadic::one());
    }

    /// Independent oracle: classify all programs at the stage from scratch.
    fn direct_discrete(t: usize) -> BTreeMap<Prefix, Dyadic> {
        let mut m: BTreeMap<Prefix, Dyadic> = BTreeMap::new();
        if t == 0 {
            return m;
        }
        for (prog, out) in enumerate_programs(t, (t * t) as u64, &MachineConfig::discrete()).unwrap() {
            if let Some(x) = out.halted_output() {
                let e = m.entry(x.clone()).or_insert_with(Dyadic::zero);
                *e = &*e + &Dyadic::pow2_neg(prog.len() as u32);
            }
        }
        m
    }

    /// Independent oracle: `λ{ω : out_t(ω) ⊒ x}` by running every length-`t`
    /// input.
    fn direct_continuous(t: usize, depth: usize) -> Vec<Dyadic> {
        let mut tree = vec![Dyadic::zero(); (1 << (depth + 1)) - 1];
        if t == 0 {
            return tree;
        }
        for a in Prefix::all_of_length(t) {
            let (out, _) = run_monotone(&a, (t * t) as u64);
            for l in 0..=out.len().min(depth) {
                let i = out.take(l).index();
                tree[i] = &tree[i] + &Dyadic::pow2_neg(t as u32);
            }
        }
        tree
    }

    #[test]
    fn resumed_discrete_matches_direct() {
        let mut b = DiscreteBound::new(MachineConfig::discrete());
        for t in 0..=11 {
            b.advance_to(t);
            let got: BTreeMap<Prefix, Dyadic> = b.masses().map(|(x, m)| (x.clone(), m)).collect();
            assert_eq!(got, direct_discrete(t), "stage {t}");
        }
    }

    #[test]
    fn resumed_continuous_matches_direct() {
        let mut b = ContinuousBound::new(6);
        for t in 0..=12 {
            b.advance_to(t);
            let got: Vec<Dyadic> = b.raw_tree().iter().map(|&n| to_dyadic(n)).collect();
            assert_eq!(got, direct_continuous(t, 6), "stage {t}");
        }
    }

    #[test]
    fn identity_transducer_lower_bound() {
        let i0 = identity_transducer().len();
        let t = 10;
        let b = ContinuousBound::at_stage(t, 6).unwrap();
        for x in Prefix::all_up_to((t - i0).min(6)) {
            assert!(b.mass(&x) >= Dyadic::pow2_neg((i0 + x.len()) as u32), "{x}");
        }
    }

    #[test]
    fn literal_programs_bound_complexity() {
        let b = DiscreteBound::at_stage(12).unwrap();
        for x in Prefix::all_up_to(3) {
            let len = literal_program(&x).len();
            if len <= 12 {
                assert!(b.complexity(&x) <= ExtInt::Finite(len as i64 + 1), "{x}");
            }
        }
    }

    #[test]
    fn conditional_bound_sees_y() {
        let y = p("110100");
        let b = DiscreteBound::at_stage_with(MachineConfig::conditional(y.clone()), 7).unwrap();
        // YCOPY HALT is 7 bits
        assert!(b.mass(&y) >= Dyadic::pow2_neg(7));
        assert!(DiscreteBound::at_stage(7).unwrap().mass(&y).is_zero());
    }

    #[test]
    fn stage_cap_refused() {
        assert!(matches!(DiscreteBound::at_stage(99), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn mixture_examples() {
        let l = SemimeasureTable::lambda(3);
        assert_eq!(mixture_semimeasure(&[(Dyadic::one(), l.clone())]).unwrap(), l);
        let half = Dyadic::pow2_neg(1);
        assert_eq!(
            mixture_semimeasure(&[(half.clone(), l.clone()), (half, l.clone())]).unwrap(),
            l
        );
        assert_eq!(
            mixture_semimeasure(&[(Dyadic::one(), l.clone()), (Dyadic::pow2_neg(3), l.clone())]),
            Err(Error::WeightSum)
        );
        let total: Dyadic = (0..1000).map(mixture_weight).sum();
        assert!(total < Dyadic::pow2_neg(1));
        assert_eq!(mixture_weight(0), Dyadic::pow2_neg(2));
        assert_eq!(mixture_weight(2), Dyadic::pow2_neg(4));
    }

    proptest! {
        #[test]
        fn mixture_dominates_components(masses in proptest::collection::vec(0u64..=2, 7)) {
            let pm = SemimeasureTable::point_mass(&Prefix::from_value(masses[0] as u128 % 4, 2), 2);
            let l = SemimeasureTable::lambda(2);
            let w2 = Dyadic::pow2_neg(2);
            let mix = mixture_semimeasure(&[(Dyadic::pow2_neg(1), l.clone()), (w2.clone(), pm.clone())]).unwrap();
            prop_assert!(mix.check().is_ok());
            for x in Prefix::all_up_to(2) {
                prop_assert!(*mix.mass(&x) >= &w2 * pm.mass(&x));
            }
        }
    }
}
