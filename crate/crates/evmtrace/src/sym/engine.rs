//! Depth-first symbolic exploration of a contract over up to `depth`
//! consecutive invocations by one attacker-controlled sender. Branches on
//! symbolic conditions are dispatched to the SMT solver; paths that would
//! need unsupported reasoning (symbolic addresses, alias analysis, …) are
//! pruned and counted. Violations of the selected trace property yield
//! `Candidate`s carrying fully concrete transactions derived from the
//! solver model, ready for concrete replay.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::path::PathBuf;
use std::rc::Rc;
use std::time::{Duration, Instant};

use primitive_types::{H256, U256};

use crate::bytecode::{decode, Opcode, Program};
use crate::chainstate::{AccountState, ChainState, Message};
use crate::interp::GAS_STUB;
use crate::properties::{state_image, Category};
use crate::smt::backend::{model_satisfies, Solver, SolverError, SolverResult};
use crate::sym::expr::{
    apply1, apply2, apply3, concrete, hash, var, Env, Op1, Op2, Op3, Origin, SymValue,
};
use crate::sym::state::{
    fresh_blockhash, fresh_ext_return, PruneReason, StepResult, SymLabel, SymState,
};
use crate::word::{self, Address, Word};

/// Wei granted to a zero-balance subject so leak searches have something to
/// leak (mirrors what validation does before replay).
pub const ENDOWMENT_WEI: u64 = 1_000_000_000_000_000_000;

const MAX_PATH_STEPS: usize = 100_000;
const STACK_LIMIT: usize = 1024;
/// Bound on where a calldata load may start; keeps witnesses small.
const CALLDATA_OFFSET_BOUND: u64 = 65_536;

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    /// Maximum invocations explored in sequence.
    pub depth: u32,
    pub max_call_depth: u32,
    pub max_cfg_nodes: u32,
    pub solver_timeout: Duration,
    pub max_time: Duration,
    /// Number of concrete witnesses when a symbolic calldata offset must be
    /// pinned.
    pub array_bound: u32,
    /// Upper bound on CALLDATASIZE models, in bytes.
    pub calldata_cap: u64,
    pub memoize: bool,
    /// External SMT solver binary; `None` uses the built-in solver.
    pub solver_path: Option<PathBuf>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            depth: 3,
            max_call_depth: 3,
            max_cfg_nodes: 60,
            solver_timeout: Duration::from_secs(10),
            max_time: Duration::from_secs(300),
            array_bound: 2,
            calldata_cap: 1024,
            memoize: true,
            solver_path: None,
        }
    }
}

impl AnalysisConfig {
    pub fn solver(&self) -> Solver {
        match &self.solver_path {
            Some(p) => Solver::process(p.clone(), self.solver_timeout),
            None => Solver::builtin(self.solver_timeout),
        }
    }
}

/// A property violation with concrete replay inputs extracted from the
/// solver model.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub category: Category,
    pub attacker: Address,
    /// One message per invocation, in execution order.
    pub messages: Vec<Message>,
    pub flagged_label: String,
    pub flagged_at_depth: u32,
    pub path_digest: H256,
    /// Model block numbers/timestamps per invocation; replay adopts them
    /// when they exceed the snapshot's.
    pub block_numbers: Vec<u64>,
    pub timestamps: Vec<u64>,
}

#[derive(Debug, Clone, Default)]
pub struct ExplorationStats {
    pub paths_explored: u64,
    pub pruned: BTreeMap<PruneReason, u64>,
    pub solver_queries: u64,
    pub elapsed: Duration,
    /// True when the wall-clock budget cut exploration short.
    pub budget_hit: bool,
}

#[derive(Debug)]
pub struct Exploration {
    pub candidates: Vec<Candidate>,
    /// Some single-invocation path with CALLVALUE > 0 reached a valid halt.
    pub accepts_ether: bool,
    /// Some explored path reached a label that releases Ether.
    pub release_reachable: bool,
    pub stats: ExplorationStats,
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("subject {0:?} has no code")]
    NoCode(Address),
    #[error("{0}")]
    Solver(String),
}

/// How environment opcodes resolve: fresh symbolic inputs, or one fixed
/// concrete message (used for differential testing against the concrete
/// interpreter).
enum ExecMode {
    Symbolic,
    Concrete(Message),
}

enum Flow {
    Continue,
    /// Successor states replacing the current one.
    Fork(Vec<SymState>),
    ValidEnd,
    SelfKillEnd,
    /// REVERT / INVALID / bad jump: a dead path, backtrack silently.
    DeadEnd,
}

enum Sat {
    Model(Env),
    Unsat,
    Unknown,
}

pub fn explore(
    chain: &ChainState,
    subject: Address,
    category: Category,
    cfg: &AnalysisConfig,
) -> Result<Exploration, EngineError> {
    let code = chain.code(subject).ok_or(EngineError::NoCode(subject))?;
    let program = Rc::new(decode(code));
    let mut eng = Engine::new(chain, subject, program, category, cfg.clone(), ExecMode::Symbolic);
    eng.run()?;
    Ok(Exploration {
        candidates: eng.candidates,
        accepts_ether: eng.accepts_ether,
        release_reachable: eng.release_reachable,
        stats: eng.stats,
    })
}

/// Result of symbolically executing one fully concrete invocation; every
/// expression in it is constant.
#[derive(Debug)]
pub struct ConcreteRun {
    pub labels: Vec<SymLabel>,
    pub storage: BTreeMap<Word, Word>,
    pub valid: bool,
}

/// Runs a single invocation with all environment inputs bound to `msg` and
/// the chain's block context. No solver is consulted: every branch folds
/// concretely. Exists to be compared step-for-step with the concrete
/// interpreter.
pub fn run_concrete_invocation(
    chain: &ChainState,
    subject: Address,
    msg: &Message,
    cfg: &AnalysisConfig,
) -> Result<ConcreteRun, EngineError> {
    let code = chain.code(subject).ok_or(EngineError::NoCode(subject))?;
    let program = Rc::new(decode(code));
    let mut one_shot = cfg.clone();
    one_shot.depth = 1;
    one_shot.memoize = false;
    let mut eng = Engine::new(
        chain,
        subject,
        program,
        Category::Greedy,
        one_shot,
        ExecMode::Concrete(msg.clone()),
    );
    eng.run()?;
    Ok(eng.concrete_run.expect("concrete mode records its run"))
}

struct Engine<'a> {
    chain: &'a ChainState,
    subject: Address,
    program: Rc<Program>,
    snapshot: AccountState,
    category: Category,
    cfg: AnalysisConfig,
    solver: Solver,
    mode: ExecMode,
    started: Instant,
    memo: HashSet<H256>,
    stats: ExplorationStats,
    candidates: Vec<Candidate>,
    accepts_ether: bool,
    release_reachable: bool,
    /// Set once a safety candidate is found; stops the search.
    stop: bool,
    fatal: Option<String>,
    concrete_run: Option<ConcreteRun>,
}

impl<'a> Engine<'a> {
    fn new(
        chain: &'a ChainState,
        subject: Address,
        program: Rc<Program>,
        category: Category,
        cfg: AnalysisConfig,
        mode: ExecMode,
    ) -> Self {
        let solver = cfg.solver();
        Engine {
            chain,
            subject,
            program,
            snapshot: chain.account(subject),
            category,
            cfg,
            solver,
            mode,
            started: Instant::now(),
            memo: HashSet::new(),
            stats: ExplorationStats::default(),
            candidates: Vec::new(),
            accepts_ether: false,
            release_reachable: false,
            stop: false,
            fatal: None,
            concrete_run: None,
        }
    }

    fn symbolic(&self) -> bool {
        matches!(self.mode, ExecMode::Symbolic)
    }

    fn initial_state(&self) -> SymState {
        let balance = match &self.mode {
            ExecMode::Concrete(msg) => {
                concrete(self.snapshot.balance + msg.value)
            }
            ExecMode::Symbolic => {
                // A penniless subject is endowed so leak paths exist, the
                // same way validation funds it before replay.
                let bal = if self.snapshot.balance.is_zero()
                    && self.category != Category::Greedy
                {
                    U256::from(ENDOWMENT_WEI)
                } else {
                    self.snapshot.balance
                };
                concrete(bal)
            }
        };
        let mut st = SymState::new(balance);
        if self.symbolic() {
            self.assume_attacker_identity(&mut st);
            self.begin_invocation(&mut st, false);
        }
        st
    }

    /// The attacker is an externally owned account holding no role in the
    /// contract: nonzero, 160-bit, distinct from the subject's address and
    /// every value in its initial storage, and from every code-bearing
    /// account.
    fn assume_attacker_identity(&self, st: &mut SymState) {
        let caller = var(Origin::Caller);
        st.assume(apply2(
            Op2::Lt,
            caller.clone(),
            concrete(U256::one() << 160),
        ));
        st.assume(apply2(Op2::Gt, caller.clone(), concrete(0u64)));
        let mut taken: Vec<Word> = state_image(self.chain, self.subject);
        for (addr, acct) in &self.chain.accounts {
            if acct.is_contract() {
                taken.push(word::address_word(*addr));
            }
        }
        taken.sort();
        taken.dedup();
        for v in taken {
            if v.is_zero() {
                continue;
            }
            st.assume(apply1(
                Op1::IsZero,
                apply2(Op2::Eq, caller.clone(), concrete(v)),
            ));
        }
    }

    /// Installs the per-invocation environment variables and their framing
    /// constraints: monotone block number/timestamp, bounded call value,
    /// bounded calldata size.
    fn begin_invocation(&self, st: &mut SymState, restart: bool) {
        if restart {
            st.restart_invocation();
        }
        let i = st.inv;
        let horizon = U256::one() << 40;

        let n = var(Origin::Number { inv: i });
        let n_prev = if i == 1 {
            concrete(self.chain.block.number)
        } else {
            var(Origin::Number { inv: i - 1 })
        };
        st.assume(apply2(Op2::Gt, n.clone(), n_prev));
        st.assume(apply2(
            Op2::Lt,
            n,
            concrete(U256::from(self.chain.block.number) + horizon),
        ));

        let t = var(Origin::Timestamp { inv: i });
        let t_prev = if i == 1 {
            concrete(self.chain.block.timestamp)
        } else {
            var(Origin::Timestamp { inv: i - 1 })
        };
        st.assume(apply2(Op2::Gt, t.clone(), t_prev));
        st.assume(apply2(
            Op2::Lt,
            t,
            concrete(U256::from(self.chain.block.timestamp) + horizon),
        ));

        if self.category != Category::Prodigal {
            let v = var(Origin::CallValue { inv: i });
            st.assume(apply2(Op2::Lt, v.clone(), concrete(U256::one() << 64)));
            st.balance = apply2(Op2::Add, st.balance.clone(), v);
        }

        let sz = var(Origin::CallDataSize { inv: i });
        st.assume(apply2(Op2::Lt, sz, concrete(self.cfg.calldata_cap + 1)));
    }

    fn out_of_time(&self) -> bool {
        self.started.elapsed() > self.cfg.max_time
    }

    fn run(&mut self) -> Result<(), EngineError> {
        let mut worklist = vec![self.initial_state()];
        while let Some(mut st) = worklist.pop() {
            if self.stop || self.fatal.is_some() {
                break;
            }
            if self.out_of_time() {
                self.stats.budget_hit = true;
                break;
            }
            let mut steps = 0usize;
            loop {
                steps += 1;
                if steps > MAX_PATH_STEPS {
                    self.prune(PruneReason::Unsupported("path step limit".into()));
                    break;
                }
                if steps % 256 == 0 && self.out_of_time() {
                    self.stats.budget_hit = true;
                    self.prune(PruneReason::Unsupported("analysis time".into()));
                    break;
                }
                match self.step(&mut st) {
                    Ok(Flow::Continue) => {}
                    Ok(Flow::Fork(succs)) => {
                        worklist.extend(succs);
                        break;
                    }
                    Ok(Flow::ValidEnd) => {
                        self.on_valid_end(&st);
                        if self.symbolic() && !self.stop && st.inv < self.cfg.depth {
                            self.begin_invocation(&mut st, true);
                            continue;
                        }
                        self.finish_path(&st, true);
                        break;
                    }
                    Ok(Flow::SelfKillEnd) => {
                        self.finish_path(&st, true);
                        break;
                    }
                    Ok(Flow::DeadEnd) => {
                        self.finish_path(&st, false);
                        break;
                    }
                    Err(reason) => {
                        self.prune(reason);
                        break;
                    }
                }
            }
        }
        if let Some(msg) = self.fatal.take() {
            return Err(EngineError::Solver(msg));
        }
        self.stats.elapsed = self.started.elapsed();
        Ok(())
    }

    fn prune(&mut self, reason: PruneReason) {
        *self.stats.pruned.entry(reason).or_default() += 1;
        self.stats.paths_explored += 1;
    }

    fn finish_path(&mut self, st: &SymState, valid: bool) {
        self.stats.paths_explored += 1;
        if let ExecMode::Concrete(_) = self.mode {
            let storage = st
                .storage
                .iter()
                .filter_map(|(k, v)| v.as_concrete().map(|w| (*k, w)))
                .collect();
            self.concrete_run = Some(ConcreteRun {
                labels: st.trace.clone(),
                storage,
                valid,
            });
        }
    }

    /// One-invocation deposit check: can this valid final state be reached
    /// with a strictly positive call value?
    fn on_valid_end(&mut self, st: &SymState) {
        if !self.symbolic()
            || self.category != Category::Greedy
            || self.accepts_ether
            || st.inv != 1
        {
            return;
        }
        let deposit = apply2(
            Op2::Gt,
            var(Origin::CallValue { inv: 1 }),
            concrete(0u64),
        );
        if let Ok(Some(env)) = self.flag_query(st, &[deposit]) {
            self.accepts_ether = true;
            let c = self.build_candidate(st, &env, "deposit accepted".into());
            self.candidates.push(c);
        }
    }

    fn check_sat(&mut self, query: &[SymValue]) -> Sat {
        self.stats.solver_queries += 1;
        match self.solver.check(query) {
            Ok(SolverResult::Sat(env)) => {
                if model_satisfies(query, &env) {
                    Sat::Model(env)
                } else {
                    // A model the evaluator rejects is a solver defect; be
                    // conservative and treat the query as undecided.
                    Sat::Unknown
                }
            }
            Ok(SolverResult::Unsat) => Sat::Unsat,
            Ok(SolverResult::Unknown(_)) => Sat::Unknown,
            Err(SolverError::Unavailable(e)) => {
                self.fatal = Some(e);
                Sat::Unknown
            }
        }
    }

    /// Satisfiability of the path constraint extended with `extra`;
    /// Unknown means "no witness", never a pruned path.
    fn flag_query(&mut self, st: &SymState, extra: &[SymValue]) -> StepResult<Option<Env>> {
        let mut query = st.constraints.clone();
        for e in extra {
            match e.as_concrete() {
                Some(w) if word::is_truthy(w) => {}
                Some(_) => return Ok(None),
                None => query.push(e.clone()),
            }
        }
        match self.check_sat(&query) {
            Sat::Model(env) => Ok(Some(env)),
            Sat::Unsat | Sat::Unknown => Ok(None),
        }
    }

    fn build_candidate(&self, st: &SymState, env: &Env, flagged_label: String) -> Candidate {
        let attacker = match &self.mode {
            ExecMode::Concrete(m) => m.sender,
            ExecMode::Symbolic => word::to_address(
                env.vars.get(&Origin::Caller).copied().unwrap_or_default(),
            ),
        };
        let mut messages = Vec::new();
        let mut block_numbers = Vec::new();
        let mut timestamps = Vec::new();
        for i in 1..=st.inv {
            let value = if self.category == Category::Prodigal {
                U256::zero()
            } else {
                env.vars
                    .get(&Origin::CallValue { inv: i })
                    .copied()
                    .unwrap_or_default()
            };
            let mut words: Vec<(u64, Word)> = env
                .vars
                .iter()
                .filter_map(|(o, w)| match o {
                    Origin::CallDataWord { inv, index } if *inv == i => Some((*index, *w)),
                    _ => None,
                })
                .collect();
            words.sort();
            let modeled_size = env
                .vars
                .get(&Origin::CallDataSize { inv: i })
                .map_or(0, |w| w.low_u64())
                .min(self.cfg.calldata_cap);
            let needed = words.iter().map(|(o, _)| o + 32).max().unwrap_or(0);
            let len = modeled_size.max(needed) as usize;
            let mut data = vec![0u8; len];
            for (off, w) in words {
                let off = off as usize;
                data[off..off + 32].copy_from_slice(&w.to_big_endian());
            }
            messages.push(Message {
                sender: attacker,
                recipient: self.subject,
                value,
                data,
            });
            block_numbers.push(
                env.vars
                    .get(&Origin::Number { inv: i })
                    .map_or(0, |w| w.low_u64()),
            );
            timestamps.push(
                env.vars
                    .get(&Origin::Timestamp { inv: i })
                    .map_or(0, |w| w.low_u64()),
            );
        }
        Candidate {
            category: self.category,
            attacker,
            messages,
            flagged_label,
            flagged_at_depth: st.inv,
            path_digest: st.memo_key(),
            block_numbers,
            timestamps,
        }
    }

    // ------------------------------------------------------------------
    // Environment values, mode-dependent.

    fn env_caller(&self) -> SymValue {
        match &self.mode {
            ExecMode::Concrete(m) => concrete(word::address_word(m.sender)),
            ExecMode::Symbolic => var(Origin::Caller),
        }
    }

    fn env_callvalue(&self, st: &SymState) -> SymValue {
        match &self.mode {
            ExecMode::Concrete(m) => concrete(m.value),
            ExecMode::Symbolic => {
                if self.category == Category::Prodigal {
                    concrete(0u64)
                } else {
                    var(Origin::CallValue { inv: st.inv })
                }
            }
        }
    }

    // ------------------------------------------------------------------

    fn step(&mut self, st: &mut SymState) -> StepResult<Flow> {
        let Some(instr) = self.program.instr_at(st.pc).cloned() else {
            return Ok(Flow::ValidEnd); // implicit STOP
        };
        let op = instr.opcode;
        if !op.is_implemented() {
            return Err(PruneReason::UnimplementedOpcode);
        }
        let next_pc = st.pc + 1 + instr.immediate.as_ref().map_or(0, |i| i.len());

        macro_rules! pop {
            () => {
                st.stack.pop().ok_or(PruneReason::StackUnderflow)?
            };
        }
        macro_rules! push {
            ($v:expr) => {{
                if st.stack.len() >= STACK_LIMIT {
                    return Err(PruneReason::Unsupported("stack overflow".into()));
                }
                st.stack.push($v);
            }};
        }
        macro_rules! bin {
            ($op:expr) => {{
                let a = pop!();
                let b = pop!();
                push!(apply2($op, a, b));
            }};
        }

        use Opcode::*;
        match op {
            Stop => return Ok(Flow::ValidEnd),
            Add => bin!(Op2::Add),
            Mul => bin!(Op2::Mul),
            Sub => bin!(Op2::Sub),
            Div => bin!(Op2::Div),
            Sdiv => bin!(Op2::Sdiv),
            Mod => bin!(Op2::Mod),
            Smod => bin!(Op2::Smod),
            Exp => bin!(Op2::Exp),
            Signextend => bin!(Op2::Signextend),
            Lt => bin!(Op2::Lt),
            Gt => bin!(Op2::Gt),
            Slt => bin!(Op2::Slt),
            Sgt => bin!(Op2::Sgt),
            Eq => bin!(Op2::Eq),
            And => bin!(Op2::And),
            Or => bin!(Op2::Or),
            Xor => bin!(Op2::Xor),
            Byte => bin!(Op2::Byte),
            Addmod | Mulmod => {
                let a = pop!();
                let b = pop!();
                let n = pop!();
                let o = if op == Addmod { Op3::Addmod } else { Op3::Mulmod };
                push!(apply3(o, a, b, n));
            }
            Iszero => {
                let a = pop!();
                push!(apply1(Op1::IsZero, a));
            }
            Not => {
                let a = pop!();
                push!(apply1(Op1::Not, a));
            }
            Sha3 => {
                let off = concrete_usize(&pop!(), PruneReason::SymbolicMemoryAddress)?;
                let len = concrete_usize(&pop!(), PruneReason::SymbolicMemoryAddress)?;
                match st.read_concrete_bytes(off, len) {
                    Ok(bytes) => push!(concrete(word::keccak_word(&bytes))),
                    Err(PruneReason::MemoryShape) => {
                        let words = st.read_words(off, len)?;
                        push!(hash(words));
                    }
                    Err(e) => return Err(e),
                }
            }
            Address => push!(concrete(word::address_word(self.subject))),
            Balance => {
                let a = pop!();
                let Some(w) = a.as_concrete() else {
                    return Err(PruneReason::Unsupported(
                        "balance of symbolic address".into(),
                    ));
                };
                let addr = word::to_address(w);
                if addr == self.subject {
                    push!(st.balance.clone());
                } else {
                    push!(concrete(self.chain.balance(addr)));
                }
            }
            Origin | Caller => push!(self.env_caller()),
            Callvalue => push!(self.env_callvalue(st)),
            Calldataload => {
                let off = pop!();
                match off.as_concrete() {
                    Some(w) => {
                        if w > U256::from(CALLDATA_OFFSET_BOUND) {
                            // Way out of range: reads zero.
                            push!(concrete(0u64));
                        } else {
                            let v = self.calldata_word(st, w.as_u64());
                            push!(v);
                        }
                    }
                    None => {
                        // Pin the offset to concrete witnesses and fork.
                        let succs = self.resolve_dynamic_array(st, &off)?;
                        return Ok(Flow::Fork(succs));
                    }
                }
            }
            Calldatasize => match &self.mode {
                ExecMode::Concrete(m) => push!(concrete(m.data.len() as u64)),
                ExecMode::Symbolic => {
                    push!(var(crate::sym::expr::Origin::CallDataSize { inv: st.inv }))
                }
            },
            Calldatacopy => {
                let dest = concrete_usize(&pop!(), PruneReason::SymbolicMemoryAddress)?;
                let src = concrete_usize(&pop!(), PruneReason::SymbolicMemoryAddress)?;
                let len = concrete_usize(&pop!(), PruneReason::SymbolicMemoryAddress)?;
                match &self.mode {
                    ExecMode::Concrete(m) => {
                        let bytes: Vec<u8> = (0..len)
                            .map(|i| m.data.get(src + i).copied().unwrap_or(0))
                            .collect();
                        write_concrete_bytes(st, dest, &bytes)?;
                    }
                    ExecMode::Symbolic => {
                        if len % 32 != 0 {
                            return Err(PruneReason::MemoryShape);
                        }
                        for k in (0..len).step_by(32) {
                            let w = self.calldata_word(st, (src + k) as u64);
                            st.mstore(dest + k, w)?;
                        }
                    }
                }
            }
            Codesize => push!(concrete(self.program.raw.len() as u64)),
            Codecopy => {
                let dest = concrete_usize(&pop!(), PruneReason::SymbolicMemoryAddress)?;
                let src = concrete_usize(&pop!(), PruneReason::SymbolicMemoryAddress)?;
                let len = concrete_usize(&pop!(), PruneReason::SymbolicMemoryAddress)?;
                let bytes: Vec<u8> = (0..len)
                    .map(|i| self.program.raw.get(src + i).copied().unwrap_or(0))
                    .collect();
                write_concrete_bytes(st, dest, &bytes)?;
            }
            Blockhash => {
                let n = pop!();
                match &self.mode {
                    ExecMode::Concrete(_) => {
                        let h = match n.as_concrete() {
                            Some(w) if w <= U256::from(u64::MAX) => {
                                self.chain.block.blockhash(w.as_u64())
                            }
                            _ => U256::zero(),
                        };
                        push!(concrete(h));
                    }
                    // Block hashes are outside anyone's control: always a
                    // fresh unconstrained variable.
                    ExecMode::Symbolic => {
                        let h = fresh_blockhash(st);
                        push!(h);
                    }
                }
            }
            Coinbase => push!(concrete(word::address_word(self.chain.block.coinbase))),
            Timestamp => match &self.mode {
                ExecMode::Concrete(_) => push!(concrete(self.chain.block.timestamp)),
                ExecMode::Symbolic => {
                    push!(var(crate::sym::expr::Origin::Timestamp { inv: st.inv }))
                }
            },
            Number => match &self.mode {
                ExecMode::Concrete(_) => push!(concrete(self.chain.block.number)),
                ExecMode::Symbolic => {
                    push!(var(crate::sym::expr::Origin::Number { inv: st.inv }))
                }
            },
            Pop => {
                pop!();
            }
            Mload => {
                let off = concrete_usize(&pop!(), PruneReason::SymbolicMemoryAddress)?;
                let v = st.mload(off)?;
                push!(v);
            }
            Mstore => {
                let off = concrete_usize(&pop!(), PruneReason::SymbolicMemoryAddress)?;
                let v = pop!();
                st.mstore(off, v)?;
            }
            Mstore8 => {
                let off = concrete_usize(&pop!(), PruneReason::SymbolicMemoryAddress)?;
                let v = pop!();
                st.mstore8(off, v)?;
            }
            Sload => {
                let key = pop!()
                    .as_concrete()
                    .ok_or(PruneReason::SymbolicStorageKey)?;
                let value = st.storage_read(key, &self.snapshot);
                push!(value.clone());
                st.trace.push(SymLabel::SLoad { key, value });
            }
            Sstore => {
                let key = pop!()
                    .as_concrete()
                    .ok_or(PruneReason::SymbolicStorageKey)?;
                let value = pop!();
                st.storage_write(key, value.clone());
                st.trace.push(SymLabel::SStore { key, value });
            }
            Jump => {
                let dest = pop!()
                    .as_concrete()
                    .ok_or(PruneReason::SymbolicJumpTarget)?;
                self.take_jump(st, dest)?;
            }
            Jumpi => {
                let dest = pop!()
                    .as_concrete()
                    .ok_or(PruneReason::SymbolicJumpTarget)?;
                let cond = pop!();
                match cond.as_concrete() {
                    Some(w) => {
                        if word::is_truthy(w) {
                            self.take_jump(st, dest)?;
                        } else {
                            st.pc = next_pc;
                        }
                    }
                    None => return self.branch(st, dest, next_pc, cond),
                }
                return Ok(Flow::Continue);
            }
            Pc => push!(concrete(instr.offset as u64)),
            Msize => push!(concrete(st.concrete_mem.len() as u64)),
            Gas => push!(concrete(GAS_STUB)),
            Jumpdest => {}
            Push(_) => {
                let imm = instr.padded_immediate().expect("push has immediate");
                push!(concrete(U256::from_big_endian(&imm)));
            }
            Dup(n) => {
                let n = n as usize;
                if st.stack.len() < n {
                    return Err(PruneReason::StackUnderflow);
                }
                let v = st.stack[st.stack.len() - n].clone();
                push!(v);
            }
            Swap(n) => {
                let n = n as usize;
                if st.stack.len() < n + 1 {
                    return Err(PruneReason::StackUnderflow);
                }
                let top = st.stack.len() - 1;
                st.stack.swap(top, top - n);
            }
            Return => {
                let _off = pop!();
                let _len = pop!();
                return Ok(Flow::ValidEnd);
            }
            Revert | Invalid | Unknown(_) => return Ok(Flow::DeadEnd),
            Call | Callcode | Delegatecall | Suicide => {
                return self.call_family(st, op, next_pc);
            }
            Create | Staticcall | Extcodesize | Extcodecopy | Gasprice | Log(_)
            | Difficulty | Gaslimit => unreachable!("filtered by is_implemented"),
        }

        if !matches!(op, Jump | Jumpi) {
            st.pc = next_pc;
        }
        Ok(Flow::Continue)
    }

    /// A calldata word: concrete from the bound message, or a per-offset
    /// variable with the size constrained to cover the read.
    fn calldata_word(&self, st: &mut SymState, off: u64) -> SymValue {
        match &self.mode {
            ExecMode::Concrete(m) => {
                let mut buf = [0u8; 32];
                for (i, slot) in buf.iter_mut().enumerate() {
                    *slot = m.data.get(off as usize + i).copied().unwrap_or(0);
                }
                concrete(U256::from_big_endian(&buf))
            }
            ExecMode::Symbolic => {
                let size = var(Origin::CallDataSize { inv: st.inv });
                st.assume(apply2(Op2::Gt, size, concrete(off + 31)));
                var(Origin::CallDataWord {
                    inv: st.inv,
                    index: off,
                })
            }
        }
    }

    fn take_jump(&mut self, st: &mut SymState, dest: Word) -> StepResult<()> {
        if dest > U256::from(usize::MAX as u64) {
            return Err(PruneReason::InvalidJump);
        }
        let dest = dest.as_usize();
        if !self.program.is_jumpdest(dest) {
            return Err(PruneReason::InvalidJump);
        }
        st.cfg_nodes += 1;
        if st.cfg_nodes > self.cfg.max_cfg_nodes {
            return Err(PruneReason::CfgNodeBudget);
        }
        st.pc = dest;
        if self.cfg.memoize && !self.memo.insert(st.memo_key()) {
            return Err(PruneReason::Memoized);
        }
        Ok(())
    }

    /// Symbolic conditional jump: each side that the solver can satisfy
    /// becomes a successor. An undecided side kills the whole branch point.
    fn branch(
        &mut self,
        st: &mut SymState,
        dest: Word,
        next_pc: usize,
        cond: SymValue,
    ) -> StepResult<Flow> {
        let not_cond = apply1(Op1::IsZero, cond.clone());
        let mut q = st.constraints.clone();
        q.push(cond.clone());
        let taken_sat = self.check_sat(&q);
        *q.last_mut().unwrap() = not_cond.clone();
        let fall_sat = self.check_sat(&q);
        if matches!(taken_sat, Sat::Unknown) || matches!(fall_sat, Sat::Unknown) {
            return Err(PruneReason::SolverUnknown);
        }

        let mut succs = Vec::new();
        if matches!(fall_sat, Sat::Model(_)) {
            let mut fall = st.clone();
            fall.assume(not_cond);
            fall.pc = next_pc;
            succs.push(fall);
        }
        if matches!(taken_sat, Sat::Model(_)) {
            let mut taken = st.clone();
            taken.assume(cond);
            match self.take_jump(&mut taken, dest) {
                Ok(()) => succs.push(taken), // explored first (LIFO)
                Err(e) if succs.is_empty() => return Err(e),
                Err(e) => self.prune(e),
            }
        }
        Ok(Flow::Fork(succs))
    }

    /// Pins a symbolic calldata offset to up to `array_bound` solver
    /// witnesses, forking one successor per witness with the offset
    /// re-pushed as a constant.
    fn resolve_dynamic_array(
        &mut self,
        st: &SymState,
        offset: &SymValue,
    ) -> StepResult<Vec<SymState>> {
        let in_range = apply2(
            Op2::Lt,
            offset.clone(),
            concrete(CALLDATA_OFFSET_BOUND),
        );
        let mut query = st.constraints.clone();
        query.push(in_range.clone());
        let mut succs = Vec::new();
        for _ in 0..self.cfg.array_bound {
            let env = match self.check_sat(&query) {
                Sat::Model(env) => env,
                Sat::Unsat => break,
                Sat::Unknown => {
                    if succs.is_empty() {
                        return Err(PruneReason::SolverUnknown);
                    }
                    break;
                }
            };
            let Ok(w) = crate::sym::expr::eval(offset, &env) else {
                return Err(PruneReason::SolverUnknown);
            };
            let mut succ = st.clone();
            succ.assume(in_range.clone());
            succ.assume(apply2(Op2::Eq, offset.clone(), concrete(w)));
            succ.stack.push(concrete(w));
            succs.push(succ);
            // Exclude this witness and ask again.
            query.push(apply1(
                Op1::IsZero,
                apply2(Op2::Eq, offset.clone(), concrete(w)),
            ));
        }
        Ok(succs)
    }

    fn call_family(&mut self, st: &mut SymState, op: Opcode, next_pc: usize) -> StepResult<Flow> {
        macro_rules! pop {
            () => {
                st.stack.pop().ok_or(PruneReason::StackUnderflow)?
            };
        }
        if op == Opcode::Suicide {
            let beneficiary = pop!();
            st.trace.push(SymLabel::Suicide {
                beneficiary: beneficiary.clone(),
            });
            if self.symbolic() {
                self.check_suicide_flags(st, &beneficiary)?;
                if self.category == Category::Greedy && !self.release_reachable {
                    if self.flag_query(st, &[])?.is_some() {
                        self.release_reachable = true;
                    }
                }
            }
            return Ok(Flow::SelfKillEnd);
        }

        if let ExecMode::Concrete(_) = self.mode {
            // The differential corpus never reaches these; refusing keeps
            // the comparison honest instead of diverging quietly.
            return Err(PruneReason::Unsupported("call in concrete mode".into()));
        }

        st.call_count += 1;
        if st.call_count > self.cfg.max_call_depth {
            return Err(PruneReason::CallDepthBudget);
        }

        let _gas = pop!();
        let target = pop!();
        let value = match op {
            Opcode::Call | Opcode::Callcode => pop!(),
            _ => concrete(0u64),
        };
        let _in_off = pop!();
        let _in_len = pop!();
        let out_off = pop!();
        let out_len = pop!();

        match op {
            Opcode::Call => {
                // Premise: can't send more than the contract holds.
                st.assume(apply1(
                    Op1::IsZero,
                    apply2(Op2::Gt, value.clone(), st.balance.clone()),
                ));
                st.balance = apply2(Op2::Sub, st.balance.clone(), value.clone());
                st.trace.push(SymLabel::Call {
                    target: target.clone(),
                    value: value.clone(),
                });
                self.check_call_flags(st, &target, &value, false)?;
            }
            Opcode::Callcode => {
                // Value stays with the contract; the risk is the borrowed
                // code itself.
                st.trace.push(SymLabel::Call {
                    target: target.clone(),
                    value: value.clone(),
                });
                self.check_call_flags(st, &target, &value, true)?;
            }
            Opcode::Delegatecall => {
                st.trace.push(SymLabel::DelegateCall {
                    target: target.clone(),
                });
                self.check_call_flags(st, &target, &value, true)?;
            }
            _ => unreachable!(),
        }

        // Outside code is not simulated: the status is a fresh variable,
        // and any return-data region becomes fresh symbolic words.
        let ret = fresh_ext_return(st);
        if st.stack.len() >= STACK_LIMIT {
            return Err(PruneReason::Unsupported("stack overflow".into()));
        }
        st.stack.push(ret);
        let out_len = concrete_usize(&out_len, PruneReason::SymbolicMemoryAddress)?;
        if out_len > 0 {
            let out_off = concrete_usize(&out_off, PruneReason::SymbolicMemoryAddress)?;
            if out_len % 32 != 0 {
                return Err(PruneReason::MemoryShape);
            }
            for k in (0..out_len).step_by(32) {
                let w = fresh_ext_return(st);
                st.mstore(out_off + k, w)?;
            }
        }
        st.pc = next_pc;
        Ok(Flow::Continue)
    }

    /// Property checks at a CALL/CALLCODE/DELEGATECALL label. `code_grant`
    /// marks labels that hand the attacker code execution rather than Ether
    /// directly (no positive-value requirement).
    fn check_call_flags(
        &mut self,
        st: &SymState,
        target: &SymValue,
        value: &SymValue,
        code_grant: bool,
    ) -> StepResult<()> {
        if self.category == Category::Prodigal && !self.stop {
            let to_attacker = apply2(Op2::Eq, target.clone(), var(Origin::Caller));
            let mut conds = vec![to_attacker];
            if !code_grant {
                conds.push(apply2(Op2::Gt, value.clone(), concrete(0u64)));
            }
            if let Some(env) = self.flag_query(st, &conds)? {
                let c = self.build_candidate(st, &env, "ether sent to attacker".into());
                self.candidates.push(c);
                self.stop = true;
            }
        }
        if self.category == Category::Greedy && !self.release_reachable {
            let conds = if code_grant {
                vec![]
            } else {
                vec![apply2(Op2::Gt, value.clone(), concrete(0u64))]
            };
            if self.flag_query(st, &conds)?.is_some() {
                self.release_reachable = true;
            }
        }
        Ok(())
    }

    fn check_suicide_flags(&mut self, st: &SymState, beneficiary: &SymValue) -> StepResult<()> {
        if self.category == Category::Suicidal && !self.stop {
            if let Some(env) = self.flag_query(st, &[])? {
                let c = self.build_candidate(st, &env, "self-destruct reachable".into());
                self.candidates.push(c);
                self.stop = true;
            }
        }
        if self.category == Category::Prodigal && !self.stop {
            let to_attacker = apply2(Op2::Eq, beneficiary.clone(), var(Origin::Caller));
            if let Some(env) = self.flag_query(st, &[to_attacker])? {
                let c = self.build_candidate(st, &env, "self-destruct pays attacker".into());
                self.candidates.push(c);
                self.stop = true;
            }
        }
        Ok(())
    }
}

fn concrete_usize(v: &SymValue, reason: PruneReason) -> StepResult<usize> {
    let w = v.as_concrete().ok_or(reason.clone())?;
    if w > U256::from(1u64 << 22) {
        return Err(reason);
    }
    Ok(w.as_usize())
}

/// Writes concrete bytes into path memory, clearing fully covered symbolic
/// words and pruning on partial overlap.
fn write_concrete_bytes(st: &mut SymState, dest: usize, bytes: &[u8]) -> StepResult<()> {
    if bytes.is_empty() {
        return Ok(());
    }
    let end = dest + bytes.len();
    let overlapping: Vec<usize> = st
        .sym_mem
        .range(dest.saturating_sub(31)..end)
        .map(|(&o, _)| o)
        .collect();
    for o in overlapping {
        if o >= dest && o + 32 <= end {
            st.sym_mem.remove(&o);
        } else if o + 32 > dest && o < end {
            return Err(PruneReason::MemoryShape);
        }
    }
    // Grow via a 32-byte aligned store, then write raw.
    st.mstore(end.saturating_sub(1) / 32 * 32, concrete(0u64))?;
    if st.concrete_mem.len() < end {
        st.concrete_mem.resize(end.div_ceil(32) * 32, 0);
    }
    st.concrete_mem[dest..end].copy_from_slice(bytes);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::Asm;
    use crate::bytecode::Opcode;
    use crate::chainstate::addr;
    use crate::interp::{run_transaction, Label, DEFAULT_STEP_LIMIT};
    use crate::properties::{greedy_classify, GreedyClass};

    fn subject() -> Address {
        addr("0x00000000000000000000000000000000000000c1")
    }

    fn chain_with(code: Vec<u8>, balance: u64) -> ChainState {
        let mut chain = ChainState::default();
        let acct = chain.account_mut(subject());
        acct.code = Some(code);
        acct.balance = U256::from(balance);
        chain
    }

    fn cfg(depth: u32) -> AnalysisConfig {
        AnalysisConfig {
            depth,
            ..AnalysisConfig::default()
        }
    }

    /// CALL(gas, CALLER, 1 wei, no data, no return).
    fn send_one_wei_to_caller() -> Asm {
        Asm::new()
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push(1u64)
            .op(Opcode::Caller)
            .push(100_000u64)
            .op(Opcode::Call)
    }

    #[test]
    fn unconditional_send_to_caller_is_prodigal_at_depth_one() {
        let chain = chain_with(
            send_one_wei_to_caller().op(Opcode::Stop).assemble(),
            10,
        );
        let ex = explore(&chain, subject(), Category::Prodigal, &cfg(1)).unwrap();
        assert_eq!(ex.candidates.len(), 1);
        let c = &ex.candidates[0];
        assert_eq!(c.flagged_at_depth, 1);
        assert_eq!(c.messages.len(), 1);
        assert!(c.messages[0].value.is_zero());
        assert_ne!(c.attacker, subject());
        assert_ne!(c.attacker, Address::default());
        assert!(c.block_numbers[0] > chain.block.number);
    }

    #[test]
    fn caller_suicide_is_both_suicidal_and_prodigal() {
        let code = Asm::new().op(Opcode::Caller).op(Opcode::Suicide).assemble();
        let chain = chain_with(code, 5);
        let s = explore(&chain, subject(), Category::Suicidal, &cfg(1)).unwrap();
        assert_eq!(s.candidates.len(), 1);
        let p = explore(&chain, subject(), Category::Prodigal, &cfg(1)).unwrap();
        assert_eq!(p.candidates.len(), 1);
    }

    /// Owner-gated kill switch where anyone can become owner first: safe in
    /// one transaction, killable in two.
    fn takeover_then_kill() -> Vec<u8> {
        Asm::new()
            // selector 1: claim ownership
            .push(0u64)
            .op(Opcode::Calldataload)
            .push(1u64)
            .op(Opcode::Eq)
            .jumpi_to("claim")
            // selector 2: kill if owner
            .push(0u64)
            .op(Opcode::Calldataload)
            .push(2u64)
            .op(Opcode::Eq)
            .jumpi_to("kill_check")
            .op(Opcode::Stop)
            .label("claim")
            .op(Opcode::Caller)
            .push(0u64)
            .op(Opcode::Sstore)
            .op(Opcode::Stop)
            .label("kill_check")
            .push(0u64)
            .op(Opcode::Sload)
            .op(Opcode::Caller)
            .op(Opcode::Eq)
            .jumpi_to("kill")
            .op(Opcode::Invalid)
            .label("kill")
            .op(Opcode::Caller)
            .op(Opcode::Suicide)
            .assemble()
    }

    #[test]
    fn guarded_kill_needs_two_invocations() {
        let mut chain = chain_with(takeover_then_kill(), 0);
        // Slot 0 holds an owner; the attacker is constrained away from it.
        let owner = word::address_word(addr("0x00000000000000000000000000000000000000ee"));
        chain.account_mut(subject()).storage_set(U256::zero(), owner);

        let d1 = explore(&chain, subject(), Category::Suicidal, &cfg(1)).unwrap();
        assert!(d1.candidates.is_empty());

        let d2 = explore(&chain, subject(), Category::Suicidal, &cfg(2)).unwrap();
        assert_eq!(d2.candidates.len(), 1);
        let c = &d2.candidates[0];
        assert_eq!(c.flagged_at_depth, 2);
        assert_eq!(c.messages.len(), 2);
        // First message selects "claim", second selects "kill".
        assert_eq!(U256::from_big_endian(&c.messages[0].data[..32]), U256::one());
        assert_eq!(U256::from_big_endian(&c.messages[1].data[..32]), U256::from(2u64));
        assert!(c.block_numbers[1] > c.block_numbers[0]);
        assert!(c.timestamps[1] > c.timestamps[0]);
    }

    #[test]
    fn stop_only_contract_accepts_ether_and_never_releases() {
        let chain = chain_with(Asm::new().op(Opcode::Stop).assemble(), 0);
        let ex = explore(&chain, subject(), Category::Greedy, &cfg(2)).unwrap();
        assert!(ex.accepts_ether);
        assert!(!ex.release_reachable);
        assert_eq!(ex.candidates.len(), 1);
        assert!(ex.candidates[0].messages[0].value > U256::zero());
        let program = decode(chain.code(subject()).unwrap());
        assert_eq!(greedy_classify(&program, ex.accepts_ether), GreedyClass::CategoryI);
    }

    #[test]
    fn payment_gated_send_is_not_prodigal_but_can_release() {
        let code = Asm::new()
            .op(Opcode::Callvalue)
            .jumpi_to("send")
            .op(Opcode::Stop)
            .label("send")
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .push(0u64)
            .op(Opcode::Callvalue)
            .op(Opcode::Caller)
            .push(100_000u64)
            .op(Opcode::Call)
            .op(Opcode::Stop)
            .assemble();
        let chain = chain_with(code, 3);
        // Prodigal fixes CALLVALUE to zero, so the send is unreachable.
        let p = explore(&chain, subject(), Category::Prodigal, &cfg(1)).unwrap();
        assert!(p.candidates.is_empty());
        // Greedy sees the same branch as reachable with a deposit.
        let g = explore(&chain, subject(), Category::Greedy, &cfg(1)).unwrap();
        assert!(g.accepts_ether);
        assert!(g.release_reachable);
        let program = decode(chain.code(subject()).unwrap());
        assert_eq!(greedy_classify(&program, g.accepts_ether), GreedyClass::CategoryII);
    }

    #[test]
    fn infinite_loop_hits_cfg_budget() {
        // The counter changes every iteration, so memoization can't cut
        // the loop; only the jump budget can.
        let code = Asm::new()
            .push(0u64)
            .label("top")
            .push(1u64)
            .op(Opcode::Add)
            .jump_to("top")
            .assemble();
        let chain = chain_with(code, 1);
        let ex = explore(&chain, subject(), Category::Prodigal, &cfg(1)).unwrap();
        assert!(ex.candidates.is_empty());
        assert!(ex.stats.pruned.contains_key(&PruneReason::CfgNodeBudget));
    }

    #[test]
    fn reconverging_branches_are_memoized() {
        // Both sides of the branch jump to the same tail with identical
        // state; the second arrival is cut off.
        let code = Asm::new()
            .push(0u64)
            .op(Opcode::Calldataload)
            .jumpi_to("a")
            .jump_to("tail")
            .label("a")
            .jump_to("tail")
            .label("tail")
            .op(Opcode::Stop)
            .assemble();
        let chain = chain_with(code, 1);
        let on = explore(&chain, subject(), Category::Suicidal, &cfg(1)).unwrap();
        assert!(on.stats.pruned.contains_key(&PruneReason::Memoized));
        let off = explore(
            &chain,
            subject(),
            Category::Suicidal,
            &AnalysisConfig { memoize: false, ..cfg(1) },
        )
        .unwrap();
        assert!(off.stats.paths_explored > on.stats.paths_explored - 1);
        assert!(off.candidates.is_empty() && on.candidates.is_empty());
    }

    #[test]
    fn analyzing_a_codeless_account_fails() {
        let chain = ChainState::default();
        assert!(matches!(
            explore(&chain, subject(), Category::Prodigal, &cfg(1)),
            Err(EngineError::NoCode(_))
        ));
    }

    #[test]
    fn concrete_mode_agrees_with_interpreter() {
        // Store the first calldata word under key 7, read it back, branch
        // on a masked selector byte.
        let code = Asm::new()
            .push(0u64)
            .op(Opcode::Calldataload)
            .push(7u64)
            .op(Opcode::Sstore)
            .push(7u64)
            .op(Opcode::Sload)
            .push(1u64)
            .op(Opcode::And)
            .jumpi_to("odd")
            .op(Opcode::Stop)
            .label("odd")
            .push(42u64)
            .push(8u64)
            .op(Opcode::Sstore)
            .op(Opcode::Stop)
            .assemble();
        let chain = chain_with(code, 0);
        for seed in [0u64, 1, 2, 0xdead_beef] {
            let mut data = vec![0u8; 32];
            data[24..32].copy_from_slice(&seed.to_be_bytes());
            let msg = Message {
                sender: addr("0x00000000000000000000000000000000000000aa"),
                recipient: subject(),
                value: U256::zero(),
                data,
            };
            let sym = run_concrete_invocation(&chain, subject(), &msg, &cfg(1)).unwrap();
            let mut funded = chain.fork();
            funded.account_mut(msg.sender).balance = U256::from(1u64);
            let conc = run_transaction(&funded, &msg, DEFAULT_STEP_LIMIT).unwrap();

            assert_eq!(sym.valid, conc.halt.is_valid());
            let conc_labels: Vec<&Label> = conc.trace.significant_labels().collect();
            assert_eq!(sym.labels.len(), conc_labels.len());
            for (s, c) in sym.labels.iter().zip(conc_labels) {
                match (s, c) {
                    (
                        SymLabel::SStore { key, value },
                        Label::SStore { key: ck, value: cv },
                    )
                    | (
                        SymLabel::SLoad { key, value },
                        Label::SLoad { key: ck, value: cv },
                    ) => {
                        assert_eq!(key, ck);
                        assert_eq!(value.as_concrete(), Some(*cv));
                    }
                    other => panic!("label mismatch: {other:?}"),
                }
            }
            let conc_storage = &conc.state.account(subject()).storage;
            for (k, v) in &sym.storage {
                assert_eq!(conc_storage.get(k).copied().unwrap_or_default(), *v);
            }
        }
    }

    #[test]
    fn candidate_replays_to_an_actual_kill() {
        let mut chain = chain_with(takeover_then_kill(), 4);
        let owner = word::address_word(addr("0x00000000000000000000000000000000000000ee"));
        chain.account_mut(subject()).storage_set(U256::zero(), owner);
        let ex = explore(&chain, subject(), Category::Suicidal, &cfg(2)).unwrap();
        let c = &ex.candidates[0];

        let mut replay = chain.fork();
        replay.account_mut(c.attacker).balance = U256::from(1u64);
        let r = crate::interp::run_sequence(&replay, &c.messages, DEFAULT_STEP_LIMIT).unwrap();
        assert!(r.halts.iter().all(|h| h.is_valid()));
        assert!(r.state.code(subject()).is_none());
    }
}
