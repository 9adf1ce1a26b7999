//! The toy machine: a small stack-based bit VM that reads its program
//! on demand from a single input tape.
//!
//! Instructions are decoded lazily with a complete prefix code, so every
//! infinite bit stream is a well-formed instruction stream and the set of
//! programs that halt (exactly the bits consumed) is prefix-free. See
//! `INSTRUCTION_SET.md` at the repository root for the normative table.
//!
//! | code          | op        | effect                                                |
//! |---------------|-----------|-------------------------------------------------------|
//! | `0`           | HALT      | stop                                                  |
//! | `10` γ(n)     | LIT n     | copy the next `n` input bits to the output            |
//! | `110`         | SD        | output ← header(\|output\|)·output, mark ← after header |
//! | `1110`        | CAT       | copy input to output forever                          |
//! | `11110`       | DOUBLE    | append output[mark..]                                 |
//! | `111110`      | YCOPY     | append the unread conditional tape                    |
//! | `1111110`     | READ      | push the next input bit                               |
//! | `111111100`   | EMITPOP   | pop a bit, append it                                  |
//! | `111111101`   | SKZ       | pop; if 0 skip the next instruction                   |
//! | `1111111100` 1^k 0 | JMPB k | jump back `k` instructions                          |
//! | `1111111101`  | DUP       | duplicate top of stack                                |
//! | `1111111110`  | NOT       | negate top of stack                                   |
//! | `11111111110` | YREAD     | push the next conditional bit (0 when exhausted)      |
//! | `11111111111` | YEND      | push 1 iff the conditional tape is exhausted          |
//!
//! Every output bit is paid for with at least one step, so output length
//! never exceeds the steps spent. Per-instruction costs are listed in
//! `INSTRUCTION_SET.md`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prefix::{length_header, Prefix};

pub const INSTRUCTION_SET_VERSION: &str = "bitvm-1";

/// Refuse exhaustive enumerations longer than this unless raised explicitly.
pub const DEFAULT_LENGTH_CAP: usize = 24;

const STACK_CAP: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    PrefixDiscrete,
    MonotoneContinuous,
    ConditionalPrefix,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MachineConfig {
    pub variant: Variant,
    /// The `y` in `m(x|y)`, on a separate read-only tape.
    pub conditional: Option<Prefix>,
    pub version: String,
}

impl MachineConfig {
    pub fn discrete() -> Self {
        MachineConfig {
            variant: Variant::PrefixDiscrete,
            conditional: None,
            version: INSTRUCTION_SET_VERSION.to_string(),
        }
    }

    pub fn monotone() -> Self {
        MachineConfig {
            variant: Variant::MonotoneContinuous,
            conditional: None,
            version: INSTRUCTION_SET_VERSION.to_string(),
        }
    }

    pub fn conditional(y: Prefix) -> Self {
        MachineConfig {
            variant: Variant::ConditionalPrefix,
            conditional: Some(y),
            version: INSTRUCTION_SET_VERSION.to_string(),
        }
    }

    fn is_monotone(&self) -> bool {
        self.variant == Variant::MonotoneContinuous
    }

    /// Canonical bytes, used for snapshot hashing.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(self.version.as_bytes());
        out.push(0);
        out.push(match self.variant {
            Variant::PrefixDiscrete => 0,
            Variant::MonotoneContinuous => 1,
            Variant::ConditionalPrefix => 2,
        });
        if let Some(y) = &self.conditional {
            out.extend_from_slice(&(y.len() as u32).to_be_bytes());
            out.extend_from_slice(&y.packed());
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    Halt,
    Lit(u64),
    SelfDelimit,
    Cat,
    Double,
    YCopy,
    Read,
    EmitPop,
    Skz,
    Jmpb(usize),
    Dup,
    Not,
    YRead,
    YEnd,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Lit(n) => write!(f, "LIT {n}"),
            Op::Jmpb(k) => write!(f, "JMPB {k}"),
            other => write!(f, "{}", format!("{other:?}").to_uppercase()),
        }
    }
}

/// Encodes an instruction in the shipped prefix code.
pub fn encode_op(op: Op) -> Prefix {
    let s = |s: &str| s.parse::<Prefix>().unwrap();
    match op {
        Op::Halt => s("0"),
        Op::Lit(n) => s("10").concat(&gamma(n)),
        Op::SelfDelimit => s("110"),
        Op::Cat => s("1110"),
        Op::Double => s("11110"),
        Op::YCopy => s("111110"),
        Op::Read => s("1111110"),
        Op::EmitPop => s("111111100"),
        Op::Skz => s("111111101"),
        Op::Jmpb(k) => {
            let mut p = s("1111111100").concat(&Prefix::repeat(true, k));
            p.push(false);
            p
        }
        Op::Dup => s("1111111101"),
        Op::Not => s("1111111110"),
        Op::YRead => s("11111111110"),
        Op::YEnd => s("11111111111"),
    }
}

/// Elias gamma code of `n >= 1`.
pub fn gamma(n: u64) -> Prefix {
    assert!(n >= 1);
    let width = (64 - n.leading_zeros()) as usize;
    Prefix::repeat(false, width - 1).concat(&Prefix::from_value(n as u128, width))
}

/// Assembles a program from instructions and raw data bits.
#[derive(Clone, Debug, Default)]
pub struct Assembler {
    bits: Prefix,
}

impl Assembler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn op(mut self, op: Op) -> Self {
        self.bits = self.bits.concat(&encode_op(op));
        self
    }

    pub fn data(mut self, bits: &Prefix) -> Self {
        self.bits = self.bits.concat(bits);
        self
    }

    /// `LIT |x|` followed by the bits of `x` (nothing for empty `x`).
    pub fn literal(self, x: &Prefix) -> Self {
        if x.is_empty() {
            self
        } else {
            self.op(Op::Lit(x.len() as u64)).data(x)
        }
    }

    pub fn build(self) -> Prefix {
        self.bits
    }
}

/// The shipped identity transducer prefix: after it, the monotone machine
/// copies its input to the output.
pub fn identity_transducer() -> Prefix {
    encode_op(Op::Cat)
}

/// A shortest straightforward program printing `x` on the prefix machine.
pub fn literal_program(x: &Prefix) -> Prefix {
    Assembler::new().literal(x).op(Op::Halt).build()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Halted(Prefix),
    NeedsMoreInput,
    OutOfBudget,
    /// Provably never halts (self-jump, or CAT on the prefix machine).
    Diverged,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunOutcome {
    pub status: Status,
    pub steps_used: u64,
    pub bits_consumed: usize,
}

impl RunOutcome {
    pub fn halted_output(&self) -> Option<&Prefix> {
        match &self.status {
            Status::Halted(x) => Some(x),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pending {
    None,
    Lit(u64),
    Cat,
}

/// Suspended machine state. The input tape is supplied on each call to
/// [`Vm::run`] and may only grow between calls.
#[derive(Clone, Debug)]
pub struct Vm {
    monotone: bool,
    code: Vec<Op>,
    pc: usize,
    stack: Vec<bool>,
    out: Vec<bool>,
    mark: usize,
    head: usize,
    yhead: usize,
    steps: u64,
    pending: Pending,
    finished: Option<Status>,
}

impl Vm {
    pub fn new(cfg: &MachineConfig) -> Self {
        Vm {
            monotone: cfg.is_monotone(),
            code: Vec::new(),
            pc: 0,
            stack: Vec::new(),
            out: Vec::new(),
            mark: 0,
            head: 0,
            yhead: 0,
            steps: 0,
            pending: Pending::None,
            finished: None,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn bits_consumed(&self) -> usize {
        self.head
    }

    pub fn output(&self) -> &[bool] {
        &self.out
    }

    pub fn output_len(&self) -> usize {
        self.out.len()
    }

    pub fn code(&self) -> &[Op] {
        &self.code
    }

    fn push(&mut self, b: bool) {
        if self.stack.len() == STACK_CAP {
            self.stack.remove(0);
        }
        self.stack.push(b);
    }

    fn pop(&mut self) -> bool {
        self.stack.pop().unwrap_or(false)
    }

    fn take_bit(&mut self, tape: &[bool]) -> Option<bool> {
        let b = tape.get(self.head).copied()?;
        self.head += 1;
        Some(b)
    }

    /// Decodes the next instruction, rolling back the head if the tape runs
    /// out mid-instruction.
    fn decode_next(&mut self, tape: &[bool]) -> bool {
        let save = self.head;
        match self.decode_raw(tape) {
            Some(op) => {
                self.code.push(op);
                true
            }
            None => {
                self.head = save;
                false
            }
        }
    }

    fn decode_raw(&mut self, tape: &[bool]) -> Option<Op> {
        // 1^k prefix selects the opcode class; see the module table.
        let mut ones = 0;
        loop {
            if ones == 10 {
                return Some(if self.take_bit(tape)? { Op::YEnd } else { Op::YRead });
            }
            if !self.take_bit(tape)? {
                break;
            }
            ones += 1;
        }
        Some(match ones {
            0 => Op::Halt,
            1 => {
                let mut zeros = 0u32;
                while !self.take_bit(tape)? {
                    zeros += 1;
                }
                let mut n: u64 = 1;
                for _ in 0..zeros {
                    n = n.saturating_mul(2) | self.take_bit(tape)? as u64;
                }
                Op::Lit(n)
            }
            2 => Op::SelfDelimit,
            3 => Op::Cat,
            4 => Op::Double,
            5 => Op::YCopy,
            6 => Op::Read,
            7 => {
                if self.take_bit(tape)? {
                    Op::Skz
                } else {
                    Op::EmitPop
                }
            }
            8 => {
                if self.take_bit(tape)? {
                    Op::Dup
                } else {
                    let mut k = 0;
                    while self.take_bit(tape)? {
                        k += 1;
                    }
                    Op::Jmpb(k)
                }
            }
            9 => Op::Not,
            _ => unreachable!(),
        })
    }

    /// Output bits appended by `op` in the current state, each charged one
    /// step on top of the instruction itself. LIT and CAT pay per bit as
    /// they stream.
    fn bits_written(&self, op: Op, y: &[bool]) -> u64 {
        match op {
            Op::SelfDelimit if !self.monotone => length_header(self.out.len()).len() as u64,
            Op::Double => (self.out.len() - self.mark.min(self.out.len())) as u64,
            Op::YCopy => (y.len() - self.yhead.min(y.len())) as u64,
            _ => 0,
        }
    }

    /// Runs until halt, divergence, budget exhaustion, or the tape runs out.
    /// Decoding is free; each executed instruction costs one step, plus one
    /// per output bit it writes.
    pub fn run(&mut self, tape: &[bool], y: &[bool], budget: u64) -> Status {
        if let Some(s) = &self.finished {
            return s.clone();
        }
        loop {
            match self.pending {
                Pending::Lit(0) => self.pending = Pending::None,
                Pending::Lit(n) => {
                    if self.head >= tape.len() {
                        return Status::NeedsMoreInput;
                    }
                    if self.steps >= budget {
                        return Status::OutOfBudget;
                    }
                    let b = self.take_bit(tape).unwrap();
                    self.out.push(b);
                    self.steps += 1;
                    self.pending = Pending::Lit(n - 1);
                    continue;
                }
                Pending::Cat => {
                    if self.head >= tape.len() {
                        return Status::NeedsMoreInput;
                    }
                    if self.steps >= budget {
                        return Status::OutOfBudget;
                    }
                    let b = self.take_bit(tape).unwrap();
                    self.out.push(b);
                    self.steps += 1;
                    continue;
                }
                Pending::None => {}
            }
            if self.pc == self.code.len() && !self.decode_next(tape) {
                return Status::NeedsMoreInput;
            }
            let op = self.code[self.pc];
            if op == Op::Skz && self.pc + 1 == self.code.len() && !self.decode_next(tape) {
                return Status::NeedsMoreInput;
            }
            if op == Op::Read && self.head >= tape.len() {
                return Status::NeedsMoreInput;
            }
            let cost = 1 + self.bits_written(op, y);
            if self.steps + cost > budget {
                return Status::OutOfBudget;
            }
            self.steps += cost;
            self.pc += 1;
            match op {
                Op::Halt => {
                    let s = Status::Halted(Prefix::from_slice(&self.out));
                    self.finished = Some(s.clone());
                    return s;
                }
                Op::Lit(n) => self.pending = Pending::Lit(n),
                Op::SelfDelimit => {
                    if !self.monotone {
                        let header = length_header(self.out.len());
                        self.mark = header.len();
                        let mut bits = header.bits().to_vec();
                        bits.extend_from_slice(&self.out);
                        self.out = bits;
                    }
                }
                Op::Cat => {
                    if self.monotone {
                        self.pending = Pending::Cat;
                    } else {
                        self.finished = Some(Status::Diverged);
                        return Status::Diverged;
                    }
                }
                Op::Double => {
                    let seg = self.out[self.mark.min(self.out.len())..].to_vec();
                    self.out.extend(seg);
                }
                Op::YCopy => {
                    let start = self.yhead.min(y.len());
                    self.out.extend_from_slice(&y[start..]);
                    self.yhead = y.len();
                }
                Op::Read => {
                    let b = self.take_bit(tape).unwrap();
                    self.push(b);
                }
                Op::EmitPop => {
                    let b = self.pop();
                    self.out.push(b);
                }
                Op::Skz => {
                    if !self.pop() {
                        self.pc += 1;
                    }
                }
                Op::Jmpb(0) => {
                    self.finished = Some(Status::Diverged);
                    return Status::Diverged;
                }
                Op::Jmpb(k) => self.pc = (self.pc - 1).saturating_sub(k),
                Op::Dup => {
                    let b = self.stack.last().copied().unwrap_or(false);
                    self.push(b);
                }
                Op::Not => {
                    let b = self.pop();
                    self.push(!b);
                }
                Op::YRead => {
                    let b = y.get(self.yhead).copied().unwrap_or(false);
                    self.yhead += 1;
                    self.push(b);
                }
                Op::YEnd => {
                    let end = self.yhead >= y.len();
                    self.push(end);
                }
            }
        }
    }
}

fn outcome(vm: &Vm, status: Status) -> RunOutcome {
    RunOutcome {
        status,
        steps_used: vm.steps(),
        bits_consumed: vm.bits_consumed(),
    }
}

/// Runs the prefix machine (plain or conditional) on a finite bit stream.
pub fn run_prefix(p: &Prefix, budget: u64, cfg: &MachineConfig) -> RunOutcome {
    let mut vm = Vm::new(cfg);
    let y = cfg.conditional.clone().unwrap_or_default();
    let status = vm.run(p.bits(), y.bits(), budget);
    outcome(&vm, status)
}

/// Output of the monotone machine after reading (some of) `p` within
/// `budget` steps, together with the stopping outcome.
pub fn run_monotone(p: &Prefix, budget: u64) -> (Prefix, RunOutcome) {
    let mut vm = Vm::new(&MachineConfig::monotone());
    let status = vm.run(p.bits(), &[], budget);
    (Prefix::from_slice(vm.output()), outcome(&vm, status))
}

/// Human-readable execution trace for debugging.
pub fn trace(p: &Prefix, budget: u64, cfg: &MachineConfig) -> String {
    let mut lines = Vec::new();
    let y = cfg.conditional.clone().unwrap_or_default();
    for b in 0..=budget {
        let mut vm = Vm::new(cfg);
        let status = vm.run(p.bits(), y.bits(), b);
        lines.push(format!(
            "budget={b} steps={} pc={} consumed={} out={} status={status:?}",
            vm.steps(),
            vm.pc,
            vm.bits_consumed(),
            Prefix::from_slice(vm.output()),
        ));
        if status != Status::OutOfBudget {
            break;
        }
    }
    let vm = {
        let mut vm = Vm::new(cfg);
        vm.run(p.bits(), y.bits(), budget);
        vm
    };
    let code: Vec<String> = vm.code().iter().map(|op| op.to_string()).collect();
    lines.push(format!("decoded: {}", code.join("; ")));
    lines.join("\n")
}

/// Per-node callback for [`explore`].
pub trait Visitor {
    /// Called once per explored node (program prefix) with the machine
    /// suspended at that node. `credit_from` is one more than the output
    /// length of the parent node (0 at the walk's root unless resumed).
    /// Returning `false` prunes the node's children.
    fn node(&mut self, path: &[bool], vm: &Vm, status: &Status, credit_from: usize) -> bool;
}

/// Depth-first walk over the program tree: every input stream is extended
/// bit by bit while the machine asks for more input, up to `max_len` bits.
pub fn explore<V: Visitor>(
    root: Vm,
    prefix: &[bool],
    y: &[bool],
    max_len: usize,
    budget: u64,
    credit_from: usize,
    visitor: &mut V,
) {
    let mut path = prefix.to_vec();
    explore_rec(root, &mut path, y, max_len, budget, credit_from, visitor);
}

fn explore_rec<V: Visitor>(
    mut vm: Vm,
    path: &mut Vec<bool>,
    y: &[bool],
    max_len: usize,
    budget: u64,
    credit_from: usize,
    visitor: &mut V,
) {
    let status = vm.run(path, y, budget);
    let expand = visitor.node(path, &vm, &status, credit_from);
    if status == Status::NeedsMoreInput && path.len() < max_len && expand {
        let next = vm.output_len() + 1;
        for b in [false, true] {
            path.push(b);
            explore_rec(vm.clone(), path, y, max_len, budget, next, visitor);
            path.pop();
        }
    }
}

struct LeafCollector {
    max_len: usize,
    leaves: Vec<(Prefix, RunOutcome)>,
}

impl Visitor for LeafCollector {
    fn node(&mut self, path: &[bool], vm: &Vm, status: &Status, _: usize) -> bool {
        let leaf = *status != Status::NeedsMoreInput || path.len() == self.max_len;
        if leaf {
            self.leaves
                .push((Prefix::from_slice(path), outcome(vm, status.clone())));
        }
        true
    }
}

/// Classifies every bit string of length at most `max_len`, skipping
/// descendants of programs that stopped. The result is a complete
/// prefix-free cover, sorted length-lexicographically.
pub fn enumerate_programs(
    max_len: usize,
    budget: u64,
    cfg: &MachineConfig,
) -> Result<Vec<(Prefix, RunOutcome)>> {
    enumerate_programs_capped(max_len, budget, cfg, DEFAULT_LENGTH_CAP)
}

pub fn enumerate_programs_capped(
    max_len: usize,
    budget: u64,
    cfg: &MachineConfig,
    cap: usize,
) -> Result<Vec<(Prefix, RunOutcome)>> {
    if max_len > cap {
        return Err(Error::CapExceeded {
            requested: max_len,
            cap,
        });
    }
    let y = cfg.conditional.clone().unwrap_or_default();
    let mut c = LeafCollector {
        max_len,
        leaves: Vec::new(),
    };
    explore(Vm::new(cfg), &[], y.bits(), max_len, budget, 0, &mut c);
    c.leaves.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(c.leaves)
}
