//! Lowering from the gate IR to the {CX, single-qubit} basis, plus resource
//! accounting over the lowered circuits.
//!
//! Two strategies are exposed and both produce circuits that act exactly like
//! the source (ancillas, when present, must start in and are returned to
//! `|0>`):
//!
//! * [`Strategy::Baseline`] is a rigid textbook translation. It allocates no
//!   helper qubits: multi-controlled gates expand through the quadratic
//!   square-root-of-X recursion on their own wires, and constant adders
//!   always go through the Fourier basis.
//! * [`Strategy::Optimized`] may allocate clean helper qubits from a shared
//!   pool (reported separately from the logical width), picks the cheaper
//!   adder style per instance, and lowers in two stages: first to
//!   {CX, Toffoli, singles} where adjacent inverse pairs are cancelled, then
//!   Toffolis are expanded and the cancellation pass runs once more.
//!
//! Cost model used for the per-instance choices, in CX counts (single-qubit
//! gates are free). All decisions are made from this table so the reported
//! counts are reproducible:
//!
//! | primitive                                   | CX                  |
//! |---------------------------------------------|---------------------|
//! | controlled phase (1 control)                | 2                   |
//! | Toffoli                                     | 6                   |
//! | k-controlled X, clean chain (k >= 3)        | 6 (2(k-2) + 1)      |
//! | k-controlled X, borrowed-wire chain         | 24 (k-2)            |
//! | m-qubit Fourier adder, no controls          | 2 m (m-1)           |
//! | m-qubit ripple adder (m+1 clean helpers)    | 16 m + constant load|

use crate::blockenc::full_be_for_counting;
use crate::circuit::{Circuit, Control, Gate, Interp, RegKind};
use crate::problem::{make_grid, PlasmaParams};
use crate::qsvt::qsvt_step;
use crate::{Error, Result, Scalar};
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

/// Cancellation passes look at most this many gates back past commuting
/// neighbours; keeps the pass linear on long diagonal runs.
const PEEPHOLE_WINDOW: usize = 128;

/// Lowering strategy selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Baseline,
    Optimized,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::Baseline, Strategy::Optimized];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::Optimized => "optimized",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Strategy::Baseline),
            "optimized" => Ok(Strategy::Optimized),
            other => Err(Error::Config(format!(
                "unknown strategy {other:?}; expected \"baseline\" or \"optimized\""
            ))),
        }
    }
}

/// Gate tallies over a lowered circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisCounts {
    pub cx: usize,
    pub singles: usize,
    pub width: usize,
    /// Layers of an as-soon-as-possible schedule.
    pub depth: usize,
}

/// One row of a resource sweep. `width` is the logical step width; helper
/// qubits added by lowering are reported in `ancillas`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResourceReport {
    pub n_x: usize,
    pub n_v: usize,
    pub strategy: Strategy,
    pub cx_count: usize,
    pub width: usize,
    pub depth: usize,
    pub ancillas: usize,
}

/// Lower a circuit to {CX, single-qubit} gates. The result keeps the source
/// registers; when helper qubits were taken a trailing `lower_anc` register
/// holds them, sized to the peak concurrent use.
pub fn lower_to_basis<T: Scalar>(src: &Circuit<T>, strategy: Strategy) -> Result<Circuit<T>> {
    let mut em = Emitter::new(strategy, src.width());
    for g in src.gates() {
        em.lower_gate(g);
    }
    debug_assert_eq!(em.pool.free.len(), em.pool.total, "helper qubit leaked");
    let gates = match strategy {
        Strategy::Baseline => em.out,
        Strategy::Optimized => peephole(expand_toffolis(peephole(em.out))),
    };
    let mut c = Circuit::new();
    for r in src.registers() {
        c.add_register(&r.name, r.width, r.interp, r.kind);
    }
    if em.pool.total > 0 {
        c.add_register("lower_anc", em.pool.total, Interp::Unsigned, RegKind::Block);
    }
    c.extend(gates)?;
    Ok(c)
}

/// Tally a lowered circuit. Rejects anything outside the basis: X with more
/// than one or with negated controls, controlled non-X gates, adders.
pub fn count_resources<T: Scalar>(c: &Circuit<T>) -> Result<BasisCounts> {
    let mut cx = 0usize;
    let mut singles = 0usize;
    let mut frontier = vec![0usize; c.width()];
    let mut depth = 0usize;
    for g in c.gates() {
        let ok = match g {
            Gate::X { controls, .. } => match controls.as_slice() {
                [] => {
                    singles += 1;
                    true
                }
                [c] if c.on => {
                    cx += 1;
                    true
                }
                _ => false,
            },
            Gate::AddConst { .. } => false,
            _ => {
                if g.controls().is_empty() {
                    singles += 1;
                    true
                } else {
                    false
                }
            }
        };
        if !ok {
            return Err(Error::NonBasisGate(format!("{g:?}")));
        }
        let qs = g.qubits();
        let layer = 1 + qs.iter().map(|&q| frontier[q]).max().unwrap_or(0);
        for &q in &qs {
            frontier[q] = layer;
        }
        depth = depth.max(layer);
    }
    Ok(BasisCounts { cx, singles, width: c.width(), depth })
}

/// One counted unit of the solve: the signal step (projector phase, encoding,
/// mirrored phase, inverse encoding) at the given grid size, built without
/// the dense reference matrix.
pub fn step_circuit<T: Scalar>(n_x: usize, n_v: usize) -> Result<Circuit<T>> {
    let params = PlasmaParams::default();
    let grid = make_grid(&params, n_x, n_v)?;
    let be = full_be_for_counting(&grid, &params)?;
    let w = be.circuit.width();
    // Any angle works; counts do not depend on the rotation values.
    qsvt_step(&be, T::FRAC_PI_4(), w)
}

/// Lower one step at the given size and tally it.
pub fn count_step<T: Scalar>(n_x: usize, n_v: usize, strategy: Strategy) -> Result<ResourceReport> {
    let step = step_circuit::<T>(n_x, n_v)?;
    let lowered = lower_to_basis(&step, strategy)?;
    let counts = count_resources(&lowered)?;
    Ok(ResourceReport {
        n_x,
        n_v,
        strategy,
        cx_count: counts.cx,
        width: step.width(),
        depth: counts.depth,
        ancillas: lowered.width() - step.width(),
    })
}

/// Count every size under every strategy; rows come back sorted by
/// `(n_x, n_v, strategy)`. Purely circuit-level, nothing is simulated.
pub fn sweep_report<T: Scalar>(
    sizes: &[(usize, usize)],
    strategies: &[Strategy],
) -> Result<Vec<ResourceReport>> {
    let mut rows = Vec::with_capacity(sizes.len() * strategies.len());
    for &(n_x, n_v) in sizes {
        for &s in strategies {
            rows.push(count_step::<T>(n_x, n_v, s)?);
        }
    }
    rows.sort_by_key(|r| (r.n_x, r.n_v, r.strategy));
    Ok(rows)
}

/// Render sweep rows as CSV with the fixed header.
pub fn sweep_csv(rows: &[ResourceReport]) -> String {
    let mut out = String::from("n_x,n_v,strategy,cx_count,width,depth\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n_x, r.n_v, r.strategy, r.cx_count, r.width, r.depth
        ));
    }
    out
}

/// Render sweep rows as JSON (includes the helper-qubit column).
pub fn sweep_json(rows: &[ResourceReport]) -> String {
    let mut s = serde_json::to_string_pretty(rows).expect("report serializes");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// cost table

/// CX cost of a k-controlled X under the optimized strategy.
fn mcx_cost_opt(k: usize) -> usize {
    match k {
        0 => 0,
        1 => 1,
        2 => 6,
        _ => 6 * (2 * (k - 2) + 1),
    }
}

/// CX cost of a phase over m qubits under the optimized strategy, and
/// whether the and-fold form (compute the conjunction onto a helper, phase
/// it, uncompute) beats the halving recursion.
fn mcphase_cost_opt(m: usize) -> (usize, bool) {
    match m {
        0 | 1 => (0, false),
        2 => (2, false),
        _ => {
            let rec = 4 + 2 * mcx_cost_opt(m - 2) + mcphase_cost_opt(m - 1).0;
            let fold = 2 + 2 * mcx_cost_opt(m - 1);
            if fold < rec {
                (fold, true)
            } else {
                (rec, false)
            }
        }
    }
}

/// CX cost of the Fourier-basis adder: m targets, c controls, constant kk.
fn qft_adder_cost(m: usize, c: usize, kk: u64) -> usize {
    let mut cost = 2 * m * (m - 1);
    for i in 0..m {
        if reduced_angle_num(kk, i) != 0 {
            cost += mcphase_cost_opt(c + 1).0;
        }
    }
    cost
}

/// CX cost of the ripple adder: m targets, c controls, constant kk. Needs
/// m + 1 clean helpers; the constant is loaded and unloaded bit by bit.
fn ripple_adder_cost(m: usize, c: usize, kk: u64) -> usize {
    16 * m + 2 * (kk.count_ones() as usize) * mcx_cost_opt(c)
}

/// kk mod 2^(i+1), the numerator of the phase applied to target bit i.
fn reduced_angle_num(kk: u64, i: usize) -> u64 {
    if i >= 63 {
        kk
    } else {
        kk & ((1u64 << (i + 1)) - 1)
    }
}

// ---------------------------------------------------------------------------
// emission

/// Clean helper qubits, allocated past the source width. `total` is the peak
/// concurrent use and becomes the `lower_anc` register width.
#[derive(Debug, Clone)]
struct Pool {
    base: usize,
    free: Vec<usize>,
    total: usize,
}

impl Pool {
    fn alloc(&mut self) -> usize {
        self.free.pop().unwrap_or_else(|| {
            let q = self.base + self.total;
            self.total += 1;
            q
        })
    }

    fn release(&mut self, q: usize) {
        debug_assert!(q >= self.base && q < self.base + self.total);
        self.free.push(q);
    }
}

struct Emitter<T> {
    strategy: Strategy,
    /// In the optimized two-stage pipeline Toffolis survive stage one.
    keep_toffoli: bool,
    pool: Pool,
    out: Vec<Gate<T>>,
}

impl<T: Scalar> Emitter<T> {
    fn new(strategy: Strategy, src_width: usize) -> Self {
        Emitter {
            strategy,
            keep_toffoli: strategy == Strategy::Optimized,
            pool: Pool { base: src_width, free: vec![], total: 0 },
            out: vec![],
        }
    }

    fn put(&mut self, g: Gate<T>) {
        self.out.push(g);
    }

    fn cx(&mut self, c: usize, t: usize) {
        self.put(Gate::cx(c, t));
    }

    /// Dispatch one IR gate. Negated controls are wrapped in X on both
    /// sides so every construction below sees positive controls only.
    fn lower_gate(&mut self, g: &Gate<T>) {
        if let Gate::AddConst { k, targets, .. } = g {
            let kk = reduced_const(*k, targets.len());
            if kk == 0 {
                return;
            }
        }
        let mut pos: Vec<usize> = g.controls().iter().map(|c| c.qubit).collect();
        pos.sort_unstable();
        let neg: Vec<usize> =
            g.controls().iter().filter(|c| !c.on).map(|c| c.qubit).collect();
        for &q in &neg {
            self.put(Gate::x(q));
        }
        match g {
            Gate::X { target, .. } => self.mcx(&pos, *target, &[]),
            Gate::H { target, .. } => {
                if pos.is_empty() {
                    self.put(Gate::h(*target));
                } else {
                    self.mch(&pos, *target);
                }
            }
            Gate::Z { target, .. } => {
                if pos.is_empty() {
                    self.put(Gate::z(*target));
                } else {
                    let mut qs = pos.clone();
                    qs.push(*target);
                    self.mcphase(T::PI(), &qs);
                }
            }
            Gate::Ry { theta, target, .. } => self.rot_ctrl(false, *theta, &pos, *target),
            Gate::Rz { theta, target, .. } => self.rot_ctrl(true, *theta, &pos, *target),
            Gate::Phase { theta, target, .. } => {
                if pos.is_empty() {
                    self.put(Gate::phase(*theta, *target));
                } else {
                    let mut qs = pos.clone();
                    qs.push(*target);
                    self.mcphase(*theta, &qs);
                }
            }
            Gate::AddConst { k, targets, .. } => {
                self.adder(reduced_const(*k, targets.len()), targets, &pos);
            }
        }
        for &q in &neg {
            self.put(Gate::x(q));
        }
    }

    // -- multi-controlled X ------------------------------------------------

    /// X on `t` under positive controls `cs`. `dirty` lists wires known idle
    /// here whose state may be borrowed (and is restored); only the baseline
    /// path uses them, the optimized path draws clean helpers from the pool.
    fn mcx(&mut self, cs: &[usize], t: usize, dirty: &[usize]) {
        match cs.len() {
            0 => self.put(Gate::x(t)),
            1 => self.cx(cs[0], t),
            2 => self.toffoli(cs[0], cs[1], t),
            k => match self.strategy {
                Strategy::Optimized => self.mcx_clean_chain(cs, t),
                Strategy::Baseline => {
                    if dirty.len() >= k - 2 {
                        self.mcx_dirty_chain(cs, t, &dirty[..k - 2]);
                    } else if !dirty.is_empty() {
                        self.mcx_split(cs, t, dirty);
                    } else {
                        self.mcx_no_anc(cs, t);
                    }
                }
            },
        }
    }

    /// Conjunction ladder over k-2 clean helpers: 2(k-2)+1 Toffolis.
    fn mcx_clean_chain(&mut self, cs: &[usize], t: usize) {
        let k = cs.len();
        let a: Vec<usize> = (0..k - 2).map(|_| self.pool.alloc()).collect();
        self.toffoli(cs[0], cs[1], a[0]);
        for i in 1..=k - 3 {
            self.toffoli(cs[i + 1], a[i - 1], a[i]);
        }
        self.toffoli(cs[k - 1], a[k - 3], t);
        for i in (1..=k - 3).rev() {
            self.toffoli(cs[i + 1], a[i - 1], a[i]);
        }
        self.toffoli(cs[0], cs[1], a[0]);
        for &q in a.iter().rev() {
            self.pool.release(q);
        }
    }

    /// Doubled-V ladder over k-2 borrowed wires in arbitrary state:
    /// 4(k-2) Toffolis, borrowed wires restored.
    fn mcx_dirty_chain(&mut self, cs: &[usize], t: usize, a: &[usize]) {
        let k = cs.len();
        debug_assert_eq!(a.len(), k - 2);
        for _ in 0..2 {
            self.toffoli(cs[k - 1], a[k - 3], t);
            for i in (1..=k - 3).rev() {
                self.toffoli(cs[i + 1], a[i - 1], a[i]);
            }
            self.toffoli(cs[0], cs[1], a[0]);
            for i in 1..=k - 3 {
                self.toffoli(cs[i + 1], a[i - 1], a[i]);
            }
        }
    }

    /// Split through one borrowed wire `b`: with A = first half onto b and
    /// B = (second half and b) onto t, emit B A B A. Each piece sees enough
    /// idle wires from the other half to use the borrowed-wire chain.
    fn mcx_split(&mut self, cs: &[usize], t: usize, dirty: &[usize]) {
        let k = cs.len();
        let b = dirty[0];
        let m1 = k.div_ceil(2);
        let (first, second) = cs.split_at(m1);
        let mut b_controls = second.to_vec();
        b_controls.push(b);
        let mut a_dirty = second.to_vec();
        a_dirty.push(t);
        a_dirty.extend_from_slice(&dirty[1..]);
        let mut b_dirty = first.to_vec();
        b_dirty.extend_from_slice(&dirty[1..]);
        for _ in 0..2 {
            self.mcx(&b_controls, t, &b_dirty);
            self.mcx(first, b, &a_dirty);
        }
    }

    /// No spare wires at all: peel the last control with a controlled
    /// square root of X, borrowing only the target for the inner chains.
    fn mcx_no_anc(&mut self, cs: &[usize], t: usize) {
        let k = cs.len();
        self.cx_root(cs[k - 1], t, 0.5);
        self.mcx(&cs[..k - 1], cs[k - 1], &[t]);
        self.cx_root(cs[k - 1], t, -0.5);
        self.mcx(&cs[..k - 1], cs[k - 1], &[t]);
        self.mc_root(&cs[..k - 1], t, 0.5);
    }

    /// X^s under all of `cs`, by the same halving recursion.
    fn mc_root(&mut self, cs: &[usize], t: usize, s: f64) {
        let k = cs.len();
        if k == 1 {
            self.cx_root(cs[0], t, s);
            return;
        }
        self.cx_root(cs[k - 1], t, s / 2.0);
        self.mcx(&cs[..k - 1], cs[k - 1], &[t]);
        self.cx_root(cs[k - 1], t, -s / 2.0);
        self.mcx(&cs[..k - 1], cs[k - 1], &[t]);
        self.mc_root(&cs[..k - 1], t, s / 2.0);
    }

    /// Controlled X^s from X^s = H diag(1, e^{i pi s}) H; two CX.
    fn cx_root(&mut self, c: usize, t: usize, s: f64) {
        self.put(Gate::h(t));
        self.cp(T::PI() * T::of(s), c, t);
        self.put(Gate::h(t));
    }

    fn toffoli(&mut self, c1: usize, c2: usize, t: usize) {
        let (lo, hi) = if c1 < c2 { (c1, c2) } else { (c2, c1) };
        if self.keep_toffoli {
            self.put(Gate::mcx(vec![Control::pos(lo), Control::pos(hi)], t));
        } else {
            toffoli_network(&mut self.out, lo, hi, t);
        }
    }

    // -- diagonal gates ------------------------------------------------------

    /// Phase e^{i theta} exactly on the all-ones state of `qs`.
    fn mcphase(&mut self, theta: T, qs: &[usize]) {
        match qs.len() {
            0 => {}
            1 => self.put(Gate::phase(theta, qs[0])),
            2 => self.cp(theta, qs[0], qs[1]),
            m => {
                let fold = self.strategy == Strategy::Optimized && mcphase_cost_opt(m).1;
                if fold {
                    let a = self.pool.alloc();
                    self.mcx(&qs[..m - 1], a, &[]);
                    self.cp(theta, a, qs[m - 1]);
                    self.mcx(&qs[..m - 1], a, &[]);
                    self.pool.release(a);
                } else {
                    self.mcphase_rec(theta, qs);
                }
            }
        }
    }

    /// Halve the angle: phase(theta/2) on the last pair straddling a
    /// multi-controlled X, then recurse with the pair's first wire dropped.
    fn mcphase_rec(&mut self, theta: T, qs: &[usize]) {
        let m = qs.len();
        let t = qs[m - 1];
        let cl = qs[m - 2];
        let rest = &qs[..m - 2];
        let half = theta * T::of(0.5);
        self.cp(half, cl, t);
        self.mcx(rest, cl, &[t]);
        self.cp(-half, cl, t);
        self.mcx(rest, cl, &[t]);
        let mut tail = rest.to_vec();
        tail.push(t);
        self.mcphase(half, &tail);
    }

    /// Controlled phase from two CX and three phase singles; exact.
    fn cp(&mut self, theta: T, a: usize, b: usize) {
        let half = theta * T::of(0.5);
        self.put(Gate::phase(half, a));
        self.put(Gate::phase(half, b));
        self.cx(a, b);
        self.put(Gate::phase(-half, b));
        self.cx(a, b);
    }

    // -- controlled rotations ------------------------------------------------

    /// Controlled Ry or Rz by the half-angle sandwich: the multi-controlled
    /// X conjugation flips the second half-rotation's sign on the fire
    /// branch and cancels it otherwise.
    fn rot_ctrl(&mut self, z_axis: bool, theta: T, cs: &[usize], t: usize) {
        let mk = |th: T| if z_axis { Gate::rz(th, t) } else { Gate::ry(th, t) };
        if cs.is_empty() {
            self.put(mk(theta));
            return;
        }
        let half = theta * T::of(0.5);
        self.put(mk(half));
        self.mcx(cs, t, &[]);
        self.put(mk(-half));
        self.mcx(cs, t, &[]);
    }

    /// Controlled H via H = Ry(-pi/4) X Ry(pi/4); exact.
    fn mch(&mut self, cs: &[usize], t: usize) {
        self.put(Gate::ry(T::FRAC_PI_4(), t));
        self.mcx(cs, t, &[]);
        self.put(Gate::ry(-T::FRAC_PI_4(), t));
    }

    // -- adders ----------------------------------------------------------------

    /// In-place constant addition, controls already positive, kk reduced
    /// and nonzero.
    fn adder(&mut self, kk: u64, targets: &[usize], cs: &[usize]) {
        let m = targets.len();
        let ripple = self.strategy == Strategy::Optimized
            && ripple_adder_cost(m, cs.len(), kk) < qft_adder_cost(m, cs.len(), kk);
        if ripple {
            self.ripple_add(kk, targets, cs);
        } else {
            self.qft_add(kk, targets, cs);
        }
    }

    /// Fourier-basis adder: transform, phase each bit by 2 pi kk / 2^{i+1},
    /// transform back. Only the middle phases carry the controls.
    fn qft_add(&mut self, kk: u64, targets: &[usize], cs: &[usize]) {
        self.qft(targets);
        for (i, &q) in targets.iter().enumerate() {
            let r = reduced_angle_num(kk, i);
            if r == 0 {
                continue;
            }
            let denom = (1u128 << (i + 1)) as f64;
            let angle = T::of(2.0) * T::PI() * T::of(r as f64) / T::of(denom);
            if cs.is_empty() {
                self.put(Gate::phase(angle, q));
            } else {
                let mut qs = cs.to_vec();
                qs.push(q);
                self.mcphase(angle, &qs);
            }
        }
        self.iqft(targets);
    }

    fn qft(&mut self, qs: &[usize]) {
        let m = qs.len();
        for i in (0..m).rev() {
            self.put(Gate::h(qs[i]));
            for l in (0..i).rev() {
                let angle = T::PI() / T::of((1u128 << (i - l)) as f64);
                self.cp(angle, qs[l], qs[i]);
            }
        }
    }

    fn iqft(&mut self, qs: &[usize]) {
        let m = qs.len();
        for i in 0..m {
            for l in 0..i {
                let angle = -T::PI() / T::of((1u128 << (i - l)) as f64);
                self.cp(angle, qs[l], qs[i]);
            }
            self.put(Gate::h(qs[i]));
        }
    }

    /// Ripple-carry adder over m + 1 clean helpers: load the constant into
    /// a helper register (under the gate's controls), run the carry chain,
    /// unload. Adding zero is the identity, so controls touch only the load.
    fn ripple_add(&mut self, kk: u64, targets: &[usize], cs: &[usize]) {
        let m = targets.len();
        let konst: Vec<usize> = (0..m).map(|_| self.pool.alloc()).collect();
        let carry = self.pool.alloc();
        let load = |em: &mut Self| {
            for (i, &q) in konst.iter().enumerate() {
                if (kk >> i) & 1 == 1 {
                    em.mcx(cs, q, &[]);
                }
            }
        };
        load(self);
        // majority sweep up, then unmajority back down writing the sums
        for i in 0..m {
            let c_in = if i == 0 { carry } else { konst[i - 1] };
            self.cx(konst[i], targets[i]);
            self.cx(konst[i], c_in);
            self.toffoli(c_in, targets[i], konst[i]);
        }
        for i in (0..m).rev() {
            let c_in = if i == 0 { carry } else { konst[i - 1] };
            self.toffoli(c_in, targets[i], konst[i]);
            self.cx(konst[i], c_in);
            self.cx(c_in, targets[i]);
        }
        load(self);
        self.pool.release(carry);
        for &q in konst.iter().rev() {
            self.pool.release(q);
        }
    }
}

/// The standard six-CX Toffoli network; exact, no global phase.
fn toffoli_network<T: Scalar>(out: &mut Vec<Gate<T>>, c1: usize, c2: usize, t: usize) {
    let q = T::FRAC_PI_4();
    out.push(Gate::h(t));
    out.push(Gate::cx(c2, t));
    out.push(Gate::phase(-q, t));
    out.push(Gate::cx(c1, t));
    out.push(Gate::phase(q, t));
    out.push(Gate::cx(c2, t));
    out.push(Gate::phase(-q, t));
    out.push(Gate::cx(c1, t));
    out.push(Gate::phase(q, c2));
    out.push(Gate::phase(q, t));
    out.push(Gate::h(t));
    out.push(Gate::cx(c1, c2));
    out.push(Gate::phase(q, c1));
    out.push(Gate::phase(-q, c2));
    out.push(Gate::cx(c1, c2));
}

fn expand_toffolis<T: Scalar>(gates: Vec<Gate<T>>) -> Vec<Gate<T>> {
    let mut out = Vec::with_capacity(gates.len());
    for g in gates {
        match &g {
            Gate::X { target, controls } if controls.len() == 2 => {
                toffoli_network(&mut out, controls[0].qubit, controls[1].qubit, *target);
            }
            _ => out.push(g),
        }
    }
    out
}

fn reduced_const(k: u64, m: usize) -> u64 {
    if m >= 64 {
        k
    } else {
        k & ((1u64 << m) - 1)
    }
}

// ---------------------------------------------------------------------------
// cancellation

fn is_diagonal<T: Scalar>(g: &Gate<T>) -> bool {
    matches!(g, Gate::Z { .. } | Gate::Rz { .. } | Gate::Phase { .. })
}

fn is_x_kind<T: Scalar>(g: &Gate<T>) -> bool {
    matches!(g, Gate::X { .. })
}

/// Single target of a lowered gate (every lowered gate has one).
fn sole_target<T: Scalar>(g: &Gate<T>) -> usize {
    match g {
        Gate::X { target, .. }
        | Gate::H { target, .. }
        | Gate::Z { target, .. }
        | Gate::Ry { target, .. }
        | Gate::Rz { target, .. }
        | Gate::Phase { target, .. } => *target,
        Gate::AddConst { targets, .. } => targets[0],
    }
}

fn touches<T: Scalar>(g: &Gate<T>, q: usize) -> bool {
    if g.controls().iter().any(|c| c.qubit == q) {
        return true;
    }
    match g {
        Gate::AddConst { targets, .. } => targets.contains(&q),
        _ => sole_target(g) == q,
    }
}

/// Sound (not complete) commutation test: diagonals always commute, X-kind
/// gates commute unless one's target is the other's control, a diagonal
/// commutes with anything whose target it does not touch, and everything
/// else requires disjoint supports. Adders are never moved across.
fn commutes<T: Scalar>(a: &Gate<T>, b: &Gate<T>) -> bool {
    if matches!(a, Gate::AddConst { .. }) || matches!(b, Gate::AddConst { .. }) {
        return false;
    }
    let da = is_diagonal(a);
    let db = is_diagonal(b);
    if da && db {
        return true;
    }
    if da {
        return !touches(a, sole_target(b));
    }
    if db {
        return !touches(b, sole_target(a));
    }
    if is_x_kind(a) && is_x_kind(b) {
        return !a.controls().iter().any(|c| c.qubit == sole_target(b))
            && !b.controls().iter().any(|c| c.qubit == sole_target(a));
    }
    // remaining kinds (H, Ry) commute only when fully disjoint
    let at = sole_target(a);
    !touches(b, at)
        && !a.controls().iter().any(|c| touches(b, c.qubit))
        && !b.controls().iter().any(|c| touches(a, c.qubit))
}

fn is_self_inverse<T: Scalar>(g: &Gate<T>) -> bool {
    match g {
        Gate::X { .. } => true,
        Gate::H { controls, .. } | Gate::Z { controls, .. } => controls.is_empty(),
        _ => false,
    }
}

/// Cancel self-inverse pairs and merge uncontrolled rotations, looking back
/// past commuting gates within a bounded window. Pure and deterministic.
fn peephole<T: Scalar>(gates: Vec<Gate<T>>) -> Vec<Gate<T>> {
    let mut out: Vec<Gate<T>> = Vec::with_capacity(gates.len());
    'next: for g in gates {
        let rotation = g.controls().is_empty()
            && matches!(g, Gate::Ry { .. } | Gate::Rz { .. } | Gate::Phase { .. });
        if rotation {
            let mut j = out.len();
            let stop = out.len().saturating_sub(PEEPHOLE_WINDOW);
            while j > stop {
                j -= 1;
                if let Some(merged) = merge_rotation(&out[j], &g) {
                    match merged {
                        Some(m) => out[j] = m,
                        None => {
                            out.remove(j);
                        }
                    }
                    continue 'next;
                }
                if !commutes(&out[j], &g) {
                    break;
                }
            }
            out.push(g);
            continue;
        }
        if is_self_inverse(&g) {
            let mut j = out.len();
            let stop = out.len().saturating_sub(PEEPHOLE_WINDOW);
            while j > stop {
                j -= 1;
                if out[j] == g {
                    out.remove(j);
                    continue 'next;
                }
                if !commutes(&out[j], &g) {
                    break;
                }
            }
        }
        out.push(g);
    }
    out
}

/// If `a` and `b` are same-axis uncontrolled rotations on one target,
/// return the merge: `Some(None)` when the angles cancel exactly.
#[allow(clippy::option_option)]
fn merge_rotation<T: Scalar>(a: &Gate<T>, b: &Gate<T>) -> Option<Option<Gate<T>>> {
    if !a.controls().is_empty() {
        return None;
    }
    let sum = match (a, b) {
        (Gate::Ry { theta: x, target: ta, .. }, Gate::Ry { theta: y, target: tb, .. })
            if ta == tb =>
        {
            Gate::ry(*x + *y, *ta)
        }
        (Gate::Rz { theta: x, target: ta, .. }, Gate::Rz { theta: y, target: tb, .. })
            if ta == tb =>
        {
            Gate::rz(*x + *y, *ta)
        }
        (Gate::Phase { theta: x, target: ta, .. }, Gate::Phase { theta: y, target: tb, .. })
            if ta == tb =>
        {
            Gate::phase(*x + *y, *ta)
        }
        _ => return None,
    };
    let zero = match &sum {
        Gate::Ry { theta, .. } | Gate::Rz { theta, .. } | Gate::Phase { theta, .. } => {
            *theta == T::zero()
        }
        _ => false,
    };
    Some(if zero { None } else { Some(sum) })
}
