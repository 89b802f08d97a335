//! Gate-level intermediate representation.
//!
//! Circuits are flat gate lists over a fixed qubit count, with named
//! registers laid over contiguous qubit ranges. Qubit `i` is bit `i` of the
//! basis-state index (little endian), and the first qubit of a register is
//! its least significant bit.
//!
//! The gate set stays deliberately abstract: any gate may carry an arbitrary
//! list of polarity controls, and in-place constant addition is a single
//! opaque gate. The simulator interprets all of this directly; translation
//! to CX + single-qubit gates is a separate lowering concern.

use crate::{Error, Result, Scalar};
use std::fmt::Write as _;

/// A control terminal: the gate fires only when `qubit` holds `on`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Control {
    pub qubit: usize,
    pub on: bool,
}

impl Control {
    pub fn pos(qubit: usize) -> Self {
        Self { qubit, on: true }
    }
    pub fn neg(qubit: usize) -> Self {
        Self { qubit, on: false }
    }
}

/// One gate. `X` with zero, one, or many controls doubles as NOT, CX and
/// multi-controlled X; there is no separate Toffoli variant.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate<T> {
    X { target: usize, controls: Vec<Control> },
    H { target: usize, controls: Vec<Control> },
    Z { target: usize, controls: Vec<Control> },
    Ry { theta: T, target: usize, controls: Vec<Control> },
    Rz { theta: T, target: usize, controls: Vec<Control> },
    Phase { theta: T, target: usize, controls: Vec<Control> },
    /// `|x> -> |x + k mod 2^m>` on the `m` target qubits (first target is
    /// the least significant bit).
    AddConst { k: u64, targets: Vec<usize>, controls: Vec<Control> },
}

impl<T: Scalar> Gate<T> {
    pub fn x(target: usize) -> Self {
        Gate::X { target, controls: vec![] }
    }
    pub fn cx(control: usize, target: usize) -> Self {
        Gate::X { target, controls: vec![Control::pos(control)] }
    }
    pub fn mcx(controls: Vec<Control>, target: usize) -> Self {
        Gate::X { target, controls }
    }
    pub fn h(target: usize) -> Self {
        Gate::H { target, controls: vec![] }
    }
    pub fn z(target: usize) -> Self {
        Gate::Z { target, controls: vec![] }
    }
    pub fn ry(theta: T, target: usize) -> Self {
        Gate::Ry { theta, target, controls: vec![] }
    }
    pub fn rz(theta: T, target: usize) -> Self {
        Gate::Rz { theta, target, controls: vec![] }
    }
    pub fn phase(theta: T, target: usize) -> Self {
        Gate::Phase { theta, target, controls: vec![] }
    }
    pub fn add_const(k: u64, targets: Vec<usize>) -> Self {
        Gate::AddConst { k, targets, controls: vec![] }
    }

    pub fn controls(&self) -> &[Control] {
        match self {
            Gate::X { controls, .. }
            | Gate::H { controls, .. }
            | Gate::Z { controls, .. }
            | Gate::Ry { controls, .. }
            | Gate::Rz { controls, .. }
            | Gate::Phase { controls, .. }
            | Gate::AddConst { controls, .. } => controls,
        }
    }

    fn controls_mut(&mut self) -> &mut Vec<Control> {
        match self {
            Gate::X { controls, .. }
            | Gate::H { controls, .. }
            | Gate::Z { controls, .. }
            | Gate::Ry { controls, .. }
            | Gate::Rz { controls, .. }
            | Gate::Phase { controls, .. }
            | Gate::AddConst { controls, .. } => controls,
        }
    }

    pub fn targets(&self) -> Vec<usize> {
        match self {
            Gate::X { target, .. }
            | Gate::H { target, .. }
            | Gate::Z { target, .. }
            | Gate::Ry { target, .. }
            | Gate::Rz { target, .. }
            | Gate::Phase { target, .. } => vec![*target],
            Gate::AddConst { targets, .. } => targets.clone(),
        }
    }

    /// Every qubit the gate touches, targets first.
    pub fn qubits(&self) -> Vec<usize> {
        let mut q = self.targets();
        q.extend(self.controls().iter().map(|c| c.qubit));
        q
    }

    /// Append controls; the gate then fires only when they all match too.
    pub fn control_on(mut self, extra: &[Control]) -> Self {
        self.controls_mut().extend_from_slice(extra);
        self
    }

    pub fn inverse(&self) -> Self {
        match self {
            Gate::X { .. } | Gate::H { .. } | Gate::Z { .. } => self.clone(),
            Gate::Ry { theta, target, controls } => {
                Gate::Ry { theta: -*theta, target: *target, controls: controls.clone() }
            }
            Gate::Rz { theta, target, controls } => {
                Gate::Rz { theta: -*theta, target: *target, controls: controls.clone() }
            }
            Gate::Phase { theta, target, controls } => {
                Gate::Phase { theta: -*theta, target: *target, controls: controls.clone() }
            }
            Gate::AddConst { k, targets, controls } => {
                let m = targets.len() as u32;
                let modulus = 1u64 << m;
                Gate::AddConst {
                    k: (modulus - (k % modulus)) % modulus,
                    targets: targets.clone(),
                    controls: controls.clone(),
                }
            }
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Gate::X { .. } => "x",
            Gate::H { .. } => "h",
            Gate::Z { .. } => "z",
            Gate::Ry { .. } => "ry",
            Gate::Rz { .. } => "rz",
            Gate::Phase { .. } => "phase",
            Gate::AddConst { .. } => "add",
        }
    }
}

/// Interpretation of a register's bit pattern, used by velocity-style
/// comparisons and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    Unsigned,
    TwosComplement,
}

/// Role of a register inside a block encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegKind {
    Data,
    Block,
    Aux,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub offset: usize,
    pub width: usize,
    pub interp: Interp,
    pub kind: RegKind,
}

impl Register {
    /// Qubits of the register, least significant first.
    pub fn qubits(&self) -> Vec<usize> {
        (self.offset..self.offset + self.width).collect()
    }

    pub fn qubit(&self, bit: usize) -> usize {
        assert!(bit < self.width, "bit {bit} out of register {}", self.name);
        self.offset + bit
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit<T> {
    width: usize,
    registers: Vec<Register>,
    gates: Vec<Gate<T>>,
}

impl<T: Scalar> Default for Circuit<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Circuit<T> {
    pub fn new() -> Self {
        Self { width: 0, registers: vec![], gates: vec![] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn gates(&self) -> &[Gate<T>] {
        &self.gates
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn register(&self, name: &str) -> &Register {
        self.registers
            .iter()
            .find(|r| r.name == name)
            .unwrap_or_else(|| panic!("no register named {name}"))
    }

    /// Allocate a fresh register after all existing qubits.
    pub fn add_register(&mut self, name: &str, width: usize, interp: Interp, kind: RegKind) -> Register {
        assert!(width > 0, "empty register {name}");
        assert!(
            self.registers.iter().all(|r| r.name != name),
            "duplicate register {name}"
        );
        let reg = Register { name: name.into(), offset: self.width, width, interp, kind };
        self.width += width;
        self.registers.push(reg.clone());
        reg
    }

    fn validate(&self, gate: &Gate<T>) -> Result<()> {
        let qs = gate.qubits();
        for &q in &qs {
            if q >= self.width {
                return Err(Error::QubitRange { qubit: q, width: self.width });
            }
        }
        let mut sorted = qs.clone();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(Error::QubitCollision(w[0]));
            }
        }
        if let Gate::AddConst { targets, .. } = gate {
            if targets.is_empty() {
                return Err(Error::Dimension("adder with no targets".into()));
            }
        }
        Ok(())
    }

    pub fn push(&mut self, gate: Gate<T>) -> Result<()> {
        self.validate(&gate)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate<T>>) -> Result<()> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    /// Reverse of the circuit: gates inverted and emitted in reverse order.
    pub fn inverted_gates(&self) -> Vec<Gate<T>> {
        self.gates.iter().rev().map(Gate::inverse).collect()
    }

    /// Freeze to the plain text form; see the module tests for the grammar.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "circuit v1 width {}", self.width);
        for r in &self.registers {
            let interp = match r.interp {
                Interp::Unsigned => "unsigned",
                Interp::TwosComplement => "signed",
            };
            let kind = match r.kind {
                RegKind::Data => "data",
                RegKind::Block => "block",
                RegKind::Aux => "aux",
            };
            let _ = writeln!(out, "reg {} {} {} {} {}", r.name, r.offset, r.width, interp, kind);
        }
        for g in &self.gates {
            let mut line = String::from(g.name());
            match g {
                Gate::Ry { theta, .. } | Gate::Rz { theta, .. } | Gate::Phase { theta, .. } => {
                    let _ = write!(line, " {:.16e}", theta.as_f64());
                }
                Gate::AddConst { k, .. } => {
                    let _ = write!(line, " {k}");
                }
                _ => {}
            }
            for t in g.targets() {
                let _ = write!(line, " t{t}");
            }
            for c in g.controls() {
                let _ = write!(line, " c{}{}", if c.on { '+' } else { '-' }, c.qubit);
            }
            let _ = writeln!(out, "{line}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, msg: &str| Error::CircuitText { line, msg: msg.into() };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty input"))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        let width = match head.as_slice() {
            ["circuit", "v1", "width", w] => {
                w.parse::<usize>().map_err(|_| err(1, "bad width"))?
            }
            _ => return Err(err(1, "expected `circuit v1 width N` header")),
        };
        let mut circ = Circuit::new();
        let mut body: Vec<Gate<T>> = vec![];
        for (idx, raw) in lines {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok[0] == "reg" {
                if tok.len() != 6 {
                    return Err(err(line_no, "register line needs 6 fields"));
                }
                let offset: usize = tok[2].parse().map_err(|_| err(line_no, "bad offset"))?;
                if offset != circ.width {
                    return Err(err(line_no, "registers must be contiguous"));
                }
                let w: usize = tok[3].parse().map_err(|_| err(line_no, "bad width"))?;
                let interp = match tok[4] {
                    "unsigned" => Interp::Unsigned,
                    "signed" => Interp::TwosComplement,
                    _ => return Err(err(line_no, "bad interpretation")),
                };
                let kind = match tok[5] {
                    "data" => RegKind::Data,
                    "block" => RegKind::Block,
                    "aux" => RegKind::Aux,
                    _ => return Err(err(line_no, "bad register kind")),
                };
                circ.add_register(tok[1], w, interp, kind);
                continue;
            }
            let mut pos = 1usize;
            let mut angle: Option<T> = None;
            let mut k: Option<u64> = None;
            match tok[0] {
                "ry" | "rz" | "phase" => {
                    let v: f64 = tok
                        .get(pos)
                        .ok_or_else(|| err(line_no, "missing angle"))?
                        .parse()
                        .map_err(|_| err(line_no, "bad angle"))?;
                    angle = Some(T::of(v));
                    pos += 1;
                }
                "add" => {
                    k = Some(
                        tok.get(pos)
                            .ok_or_else(|| err(line_no, "missing constant"))?
                            .parse()
                            .map_err(|_| err(line_no, "bad constant"))?,
                    );
                    pos += 1;
                }
                "x" | "h" | "z" => {}
                _ => return Err(err(line_no, "unknown gate")),
            }
            let mut targets: Vec<usize> = vec![];
            let mut controls: Vec<Control> = vec![];
            for t in &tok[pos..] {
                if let Some(rest) = t.strip_prefix('t') {
                    targets.push(rest.parse().map_err(|_| err(line_no, "bad target"))?);
                } else if let Some(rest) = t.strip_prefix("c+") {
                    controls.push(Control::pos(rest.parse().map_err(|_| err(line_no, "bad control"))?));
                } else if let Some(rest) = t.strip_prefix("c-") {
                    controls.push(Control::neg(rest.parse().map_err(|_| err(line_no, "bad control"))?));
                } else {
                    return Err(err(line_no, "bad terminal"));
                }
            }
            let single = |targets: &[usize]| -> Result<usize> {
                if targets.len() == 1 {
                    Ok(targets[0])
                } else {
                    Err(err(line_no, "gate takes exactly one target"))
                }
            };
            let gate = match tok[0] {
                "x" => Gate::X { target: single(&targets)?, controls },
                "h" => Gate::H { target: single(&targets)?, controls },
                "z" => Gate::Z { target: single(&targets)?, controls },
                "ry" => Gate::Ry { theta: angle.unwrap(), target: single(&targets)?, controls },
                "rz" => Gate::Rz { theta: angle.unwrap(), target: single(&targets)?, controls },
                "phase" => Gate::Phase { theta: angle.unwrap(), target: single(&targets)?, controls },
                "add" => Gate::AddConst { k: k.unwrap(), targets, controls },
                _ => unreachable!(),
            };
            body.push(gate);
        }
        if circ.width != width {
            // registers may not cover the full width; pad with an anonymous aux range
            if circ.width > width {
                return Err(err(1, "registers overflow declared width"));
            }
            circ.width = width;
        }
        for g in body {
            circ.push(g)?;
        }
        Ok(circ)
    }
}

/// Add `extra` controls to every gate in the list.
pub fn control_all<T: Scalar>(gates: Vec<Gate<T>>, extra: &[Control]) -> Vec<Gate<T>> {
    gates.into_iter().map(|g| g.control_on(extra)).collect()
}

/// Invert a gate list: reversed order, each gate inverted.
pub fn invert_all<T: Scalar>(gates: &[Gate<T>]) -> Vec<Gate<T>> {
    gates.iter().rev().map(Gate::inverse).collect()
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

/// Gates mapping |0..0> on `qubits` to the state with the given real
/// amplitudes (length `2^k`, unit norm). Built as a binary tree of
/// multiplexed Y rotations, splitting on the most significant qubit first;
/// signs are absorbed into the leaf rotation angles via `atan2`.
pub fn state_prep<T: Scalar>(qubits: &[usize], amps: &[T]) -> Result<Vec<Gate<T>>> {
    let k = qubits.len();
    if amps.len() != 1 << k {
        return Err(Error::AmplitudeLength { got: amps.len(), need: 1 << k });
    }
    let nrm = amps.iter().map(|a| *a * *a).sum::<T>().sqrt();
    if (nrm - T::one()).abs() > T::of(1e-10) {
        return Err(Error::NotNormalized(nrm.as_f64()));
    }
    let mut gates = vec![];
    prep_level(qubits, amps, &mut vec![], &mut gates);
    Ok(gates)
}

/// Recursive step: rotate the top qubit of `qubits` by the branch-mass
/// angle under the accumulated control pattern, then recurse into both
/// halves. `pattern` holds controls on already-prepared (higher) qubits.
fn prep_level<T: Scalar>(
    qubits: &[usize],
    amps: &[T],
    pattern: &mut Vec<Control>,
    out: &mut Vec<Gate<T>>,
) {
    let k = qubits.len();
    if k == 0 {
        return;
    }
    let top = qubits[k - 1];
    let half = amps.len() / 2;
    let (lo, hi) = amps.split_at(half);
    let theta = if k == 1 {
        // leaf: the two signed amplitudes themselves
        if lo[0] == T::zero() && hi[0] == T::zero() {
            return;
        }
        T::of(2.0) * hi[0].atan2(lo[0])
    } else {
        let r0 = lo.iter().map(|a| *a * *a).sum::<T>().sqrt();
        let r1 = hi.iter().map(|a| *a * *a).sum::<T>().sqrt();
        if r0 == T::zero() && r1 == T::zero() {
            return;
        }
        T::of(2.0) * r1.atan2(r0)
    };
    if theta != T::zero() {
        out.push(Gate::Ry { theta, target: top, controls: pattern.clone() });
    }
    if k == 1 {
        return;
    }
    let rest = &qubits[..k - 1];
    let r0 = lo.iter().map(|a| *a * *a).sum::<T>().sqrt();
    let r1 = hi.iter().map(|a| *a * *a).sum::<T>().sqrt();
    if r0 > T::zero() {
        let scaled: Vec<T> = lo.iter().map(|a| *a / r0).collect();
        pattern.push(Control::neg(top));
        prep_level(rest, &scaled, pattern, out);
        pattern.pop();
    }
    if r1 > T::zero() {
        let scaled: Vec<T> = hi.iter().map(|a| *a / r1).collect();
        pattern.push(Control::pos(top));
        prep_level(rest, &scaled, pattern, out);
        pattern.pop();
    }
}

/// Gates realizing `<0|_flag U |0>_flag = diag(eta)` over the `qubits`
/// index: a multiplexed Y rotation writing each `eta_m` into the flag's
/// |1> amplitude, then X on the flag to move it back to |0>.
pub fn amplitude_assign<T: Scalar>(qubits: &[usize], flag: usize, etas: &[T]) -> Result<Vec<Gate<T>>> {
    let k = qubits.len();
    if etas.len() != 1 << k {
        return Err(Error::AmplitudeLength { got: etas.len(), need: 1 << k });
    }
    let mut gates = vec![];
    for (m, eta) in etas.iter().enumerate() {
        if eta.abs() > T::one() + T::of(1e-12) {
            return Err(Error::AmplitudeRange(eta.as_f64()));
        }
        if *eta == T::zero() {
            continue;
        }
        let clamped = eta.min(T::one()).max(-T::one());
        let theta = T::of(2.0) * clamped.asin();
        let controls: Vec<Control> = qubits
            .iter()
            .enumerate()
            .map(|(bit, &q)| Control { qubit: q, on: (m >> bit) & 1 == 1 })
            .collect();
        gates.push(Gate::Ry { theta, target: flag, controls });
    }
    gates.push(Gate::x(flag));
    Ok(gates)
}

/// In-place `|x> -> |x + k mod 2^m>` over the target qubits (LSB first).
pub fn inplace_add_const<T: Scalar>(targets: &[usize], k: u64) -> Gate<T> {
    Gate::add_const(k, targets.to_vec())
}

/// Comparisons available to [`xor_predicate`]. The signed variants read the
/// register in two's complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Eq(u64),
    Ne(u64),
    GtZero,
    LeZero,
}

/// One conjunct: a register (as its qubit list, LSB first) and a comparison
/// on its value.
#[derive(Debug, Clone)]
pub struct Condition {
    pub qubits: Vec<usize>,
    pub cmp: Comparison,
}

/// Literal pattern: polarity per qubit; empty means the constant true.
type Term = Vec<Control>;

fn eq_term(qubits: &[usize], value: u64) -> Term {
    qubits
        .iter()
        .enumerate()
        .map(|(bit, &q)| Control { qubit: q, on: (value >> bit) & 1 == 1 })
        .collect()
}

fn condition_terms(cond: &Condition) -> Vec<Term> {
    let q = &cond.qubits;
    let w = q.len();
    match cond.cmp {
        Comparison::Eq(v) => vec![eq_term(q, v)],
        // !Eq = true XOR Eq
        Comparison::Ne(v) => vec![vec![], eq_term(q, v)],
        // v > 0 <=> (sign = 0) XOR (v == 0)
        Comparison::GtZero => vec![vec![Control::neg(q[w - 1])], eq_term(q, 0)],
        // v <= 0 <=> (sign = 1) XOR (v == 0)
        Comparison::LeZero => vec![vec![Control::pos(q[w - 1])], eq_term(q, 0)],
    }
}

/// Merge two literal conjunctions; `None` when polarities conflict (the
/// combined term is identically false and drops out of the XOR).
fn merge_terms(a: &Term, b: &Term) -> Option<Term> {
    let mut out = a.clone();
    for lit in b {
        match out.iter().find(|o| o.qubit == lit.qubit) {
            Some(o) if o.on != lit.on => return None,
            Some(_) => {}
            None => out.push(*lit),
        }
    }
    Some(out)
}

/// Flip `target` exactly when all conditions hold.
///
/// Each comparison expands into an XOR of literal conjunctions; the
/// conjunction of conditions is their product, again an XOR of terms. Every
/// surviving term becomes one (multi-controlled) X on the target, so the
/// construction needs no scratch qubits.
pub fn xor_predicate<T: Scalar>(conditions: &[Condition], target: usize) -> Vec<Gate<T>> {
    let mut terms: Vec<Term> = vec![vec![]];
    for cond in conditions {
        let factors = condition_terms(cond);
        let mut next = vec![];
        for t in &terms {
            for f in &factors {
                if let Some(m) = merge_terms(t, f) {
                    next.push(m);
                }
            }
        }
        terms = next;
    }
    terms
        .into_iter()
        .map(|controls| Gate::X { target, controls })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    type G = Gate<f64>;

    #[test]
    fn push_validates_ranges_and_collisions() {
        let mut c = Circuit::<f64>::new();
        c.add_register("a", 2, Interp::Unsigned, RegKind::Data);
        assert!(c.push(G::x(1)).is_ok());
        assert!(matches!(c.push(G::x(2)), Err(Error::QubitRange { qubit: 2, .. })));
        assert!(matches!(c.push(G::cx(1, 1)), Err(Error::QubitCollision(1))));
        let bad = Gate::AddConst { k: 1, targets: vec![0, 1], controls: vec![Control::pos(0)] };
        assert!(matches!(c.push(bad), Err(Error::QubitCollision(0))));
    }

    #[test]
    fn gate_inverses() {
        let ry = G::ry(0.7, 3);
        assert_eq!(ry.inverse(), G::ry(-0.7, 3));
        let add = Gate::<f64>::add_const(5, vec![0, 1, 2]);
        assert_eq!(add.inverse(), Gate::add_const(3, vec![0, 1, 2]));
        let add0 = Gate::<f64>::add_const(0, vec![0, 1]);
        assert_eq!(add0.inverse(), Gate::add_const(0, vec![0, 1]));
        assert_eq!(G::x(2).inverse(), G::x(2));
    }

    #[test]
    fn invert_all_reverses_order() {
        let gates = vec![G::h(0), G::ry(0.5, 1)];
        let inv = invert_all(&gates);
        assert_eq!(inv, vec![G::ry(-0.5, 1), G::h(0)]);
    }

    #[test]
    fn state_prep_rejects_unnormalized() {
        assert!(matches!(
            state_prep::<f64>(&[0, 1], &[0.5, 0.5, 0.5, 0.0]),
            Err(Error::NotNormalized(_))
        ));
        assert!(matches!(
            state_prep::<f64>(&[0], &[1.0, 0.0, 0.0]),
            Err(Error::AmplitudeLength { .. })
        ));
    }

    #[test]
    fn amplitude_assign_rejects_out_of_range() {
        assert!(matches!(
            amplitude_assign::<f64>(&[0], 1, &[0.5, 1.5]),
            Err(Error::AmplitudeRange(_))
        ));
    }

    #[test]
    fn xor_predicate_eq_is_single_mcx() {
        let g: Vec<G> = xor_predicate(
            &[Condition { qubits: vec![0, 1, 2], cmp: Comparison::Eq(5) }],
            7,
        );
        assert_eq!(g.len(), 1);
        assert_eq!(
            g[0],
            Gate::X {
                target: 7,
                controls: vec![Control::pos(0), Control::neg(1), Control::pos(2)]
            }
        );
    }

    /// Oracle: evaluate the emitted XOR terms on every assignment and
    /// compare against direct evaluation of the conditions.
    #[test]
    fn xor_predicate_truth_table() {
        let width = 5usize;
        let signed = |bits: u64, w: usize| -> i64 {
            let m = 1u64 << w;
            if (bits >> (w - 1)) & 1 == 1 { bits as i64 - m as i64 } else { bits as i64 }
        };
        let cases: Vec<Vec<Condition>> = vec![
            vec![Condition { qubits: vec![0, 1], cmp: Comparison::Ne(0) }],
            vec![Condition { qubits: vec![0, 1, 2], cmp: Comparison::GtZero }],
            vec![Condition { qubits: vec![0, 1, 2], cmp: Comparison::LeZero }],
            vec![
                Condition { qubits: vec![0, 1], cmp: Comparison::Eq(3) },
                Condition { qubits: vec![2, 3], cmp: Comparison::GtZero },
                Condition { qubits: vec![4], cmp: Comparison::Eq(0) },
            ],
            vec![
                Condition { qubits: vec![0, 1], cmp: Comparison::Ne(2) },
                Condition { qubits: vec![2, 3], cmp: Comparison::LeZero },
            ],
        ];
        for conds in &cases {
            let gates: Vec<G> = xor_predicate(conds, 9);
            for assign in 0u64..(1 << width) {
                let bit = |q: usize| (assign >> q) & 1 == 1;
                let want = conds.iter().all(|c| {
                    let val = c
                        .qubits
                        .iter()
                        .enumerate()
                        .fold(0u64, |acc, (i, &q)| acc | ((bit(q) as u64) << i));
                    match c.cmp {
                        Comparison::Eq(v) => val == v,
                        Comparison::Ne(v) => val != v,
                        Comparison::GtZero => signed(val, c.qubits.len()) > 0,
                        Comparison::LeZero => signed(val, c.qubits.len()) <= 0,
                    }
                });
                let got = gates
                    .iter()
                    .filter(|g| g.controls().iter().all(|c| bit(c.qubit) == c.on))
                    .count()
                    % 2
                    == 1;
                assert_eq!(got, want, "conds {conds:?} assing {assign:b}");
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let mut c = Circuit::<f64>::new();
        c.add_register("x", 3, Interp::Unsigned, RegKind::Data);
        c.add_register("v", 2, Interp::TwosComplement, RegKind::Data);
        c.add_register("b", 1, Interp::Unsigned, RegKind::Block);
        c.push(G::h(0)).unwrap();
        c.push(G::ry(-0.123456789012345678, 3).control_on(&[Control::neg(1)])).unwrap();
        c.push(G::phase(std::f64::consts::FRAC_PI_2, 5)).unwrap();
        c.push(Gate::AddConst { k: 7, targets: vec![0, 1, 2], controls: vec![Control::pos(4)] })
            .unwrap();
        c.push(G::mcx(vec![Control::pos(0), Control::neg(3)], 5)).unwrap();
        let text = c.to_text();
        let back = Circuit::<f64>::from_text(&text).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn text_parser_reports_line_numbers() {
        let text = "circuit v1 width 2\nreg a 0 2 unsigned data\nfrob t0\n";
        match Circuit::<f64>::from_text(text) {
            Err(Error::CircuitText { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(Circuit::<f64>::from_text("").is_err());
        // width smaller than register coverage
        let bad = "circuit v1 width 1\nreg a 0 2 unsigned data\n";
        assert!(Circuit::<f64>::from_text(bad).is_err());
    }

    #[test]
    fn control_all_appends() {
        let gates = vec![G::x(0), G::ry(1.0, 1)];
        let out = control_all(gates, &[Control::pos(5)]);
        assert!(out.iter().all(|g| g.controls().contains(&Control::pos(5))));
    }
}
