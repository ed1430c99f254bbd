//! The simulated cluster: closed-loop clients, one coordinator per host and
//! `max(hosts, rf)` replica nodes, driven by the event [`Kernel`].
//!
//! An operation's life: the client starts it (and any pre-delay) at its
//! scheduled time, the request crosses the local hop to the host's
//! coordinator, which stamps writes and fans out to all `rf` replicas. Each
//! replica applies or serves the request after its service time and answers;
//! the coordinator completes after `required_acks` answers and the client
//! records the response after the local hop back plus any post-delay.
//!
//! All random draws for an operation are taken from the issuing client's
//! streams when the operation starts, so the protocol outcome of one client's
//! operation never depends on how many events other clients generated.

use crate::kernel::Kernel;
use crate::netmodel::NetworkProfile;
use crate::policy::{Decision, PolicySpec};
use crate::rng::RngStream;
use crate::store::{
    replicas_for, PendingOp, ReadRepair, ReplicaResponse, ReplicaState, Versioned, WriteStamp,
};
use crate::trace::{Trace, TraceMeta};
use crate::types::{ConsistencyLevel, OpKind, OperationRecord, SimTime};
use crate::workload::{next_op_kind, KeySampler, WorkloadConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub hosts: usize,
    pub rf: usize,
    pub read_repair: ReadRepair,
}

impl ClusterConfig {
    /// Replica nodes; at least `rf` so every key has a full replica set.
    pub fn nodes(&self) -> usize {
        self.hosts.max(self.rf)
    }
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig { hosts: 6, rf: 3, read_repair: ReadRepair::None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub cluster: ClusterConfig,
    pub net: NetworkProfile,
    pub workload: WorkloadConfig,
    pub policy: PolicySpec,
    /// Keep the per-operation protocol ledger (tests and invariant checks).
    pub keep_ledger: bool,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.cluster.hosts == 0 {
            return Err("cluster needs at least one host".into());
        }
        if self.cluster.rf == 0 {
            return Err("replication factor must be positive".into());
        }
        self.workload.validate()?;
        self.policy.validate()
    }
}

/// Protocol-level truth about one operation, in true virtual time.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub op_id: u64,
    pub client_id: u32,
    pub kind: OpKind,
    pub key: u64,
    pub level: ConsistencyLevel,
    /// Client began the operation (including its pre-delay).
    pub start: SimTime,
    /// Coordinator received the request.
    pub dispatch: SimTime,
    /// Coordinator collected the required acks.
    pub completed: SimTime,
    /// Client finished (after the local hop and any post-delay).
    pub finish: SimTime,
    /// Version written, or version returned by a read.
    pub version: Versioned,
    /// Replicas whose answers completed the operation, in arrival order.
    pub answered_by: Vec<usize>,
}

pub struct SimOutput {
    pub trace: Trace,
    pub ledger: Vec<LedgerEntry>,
    pub replicas: Vec<ReplicaState>,
    pub rf: usize,
    /// Transaction-phase operations completed.
    pub completed_ops: usize,
    pub duration_us: i64,
    pub events: u64,
}

impl SimOutput {
    pub fn throughput(&self) -> f64 {
        if self.duration_us == 0 {
            0.0
        } else {
            self.completed_ops as f64 * 1e6 / self.duration_us as f64
        }
    }

    /// True when every replica of every key holds the same version.
    pub fn converged(&self) -> bool {
        let nodes = self.replicas.len();
        self.replicas.iter().flat_map(|r| r.iter()).all(|(key, _)| {
            let mut set = replicas_for(key, nodes, self.rf);
            let first = self.replicas[set.next().unwrap()].serve_read(key);
            set.all(|n| self.replicas[n].serve_read(key) == first)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Load,
    Transaction,
}

#[derive(Debug)]
enum Event {
    ClientStart { client: u32 },
    CoordinatorRecv { op: usize },
    ReplicaProcess { op: usize, slot: usize },
    CoordinatorAck { op: usize, slot: usize, version: Versioned },
    ClientFinish { op: usize },
    RepairApply { node: usize, key: u64, version: Versioned },
}

#[derive(Debug, Clone, Copy)]
struct LegDelays {
    request: i64,
    service: i64,
    response: i64,
}

struct OpState {
    op_id: u64,
    client: u32,
    key: u64,
    kind: OpKind,
    phase: Phase,
    /// Value written (writes only).
    value_id: u64,
    decision: Decision,
    hop_out: i64,
    replicas: Vec<usize>,
    legs: Vec<LegDelays>,
    pending: PendingOp,
    stamp: Option<WriteStamp>,
    start: SimTime,
    dispatch: SimTime,
    completed: SimTime,
    answers: usize,
    newest_seen: Versioned,
    repaired: Vec<bool>,
}

struct Client {
    id: u32,
    host: usize,
    wl_rng: RngStream,
    policy_rng: RngStream,
    net_rng: RngStream,
    skew_us: i64,
    next_due_us: f64,
}

/// Slab of in-flight operations; slots are reused once an operation has
/// heard from all its replicas.
#[derive(Default)]
struct OpSlab {
    slots: Vec<Option<OpState>>,
    free: Vec<usize>,
}

impl OpSlab {
    fn insert(&mut self, op: OpState) -> usize {
        match self.free.pop() {
            Some(i) => {
                self.slots[i] = Some(op);
                i
            }
            None => {
                self.slots.push(Some(op));
                self.slots.len() - 1
            }
        }
    }

    fn get(&self, i: usize) -> &OpState {
        self.slots[i].as_ref().expect("live operation")
    }

    fn get_mut(&mut self, i: usize) -> &mut OpState {
        self.slots[i].as_mut().expect("live operation")
    }

    fn release_if_done(&mut self, i: usize, client_done: bool) {
        let op = self.get(i);
        if client_done && op.answers == op.replicas.len() {
            self.slots[i] = None;
            self.free.push(i);
        }
    }
}

pub struct Simulation {
    cfg: SimConfig,
    kernel: Kernel<Event>,
    replicas: Vec<ReplicaState>,
    clients: Vec<Client>,
    ops: OpSlab,
    /// Ops whose client side has finished but which still await replica answers.
    client_done: Vec<bool>,
    repair_rngs: Vec<RngStream>,
    /// `None` only for an empty keyspace, which admits no transaction ops.
    key_sampler: Option<KeySampler>,
    phase: Phase,
    next_op_id: u64,
    next_value_id: u64,
    next_writer_seq: u64,
    load_cursor: u64,
    txn_start: SimTime,
    txn_end: SimTime,
    interval_us: f64,
    records: Vec<OperationRecord>,
    ledger: Vec<LedgerEntry>,
    load_ops: usize,
    completed_ops: usize,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, String> {
        cfg.validate()?;
        let nodes = cfg.cluster.nodes();
        let per_host = cfg.workload.clients_per_host;
        let clients = (0..cfg.cluster.hosts as u32 * per_host)
            .map(|id| {
                let stream = |what: &str| RngStream::new(cfg.seed, format!("client/{id}/{what}"));
                let mut skew_rng = stream("skew");
                let bound = cfg.workload.skew_bound_us;
                Client {
                    id,
                    host: (id / per_host) as usize,
                    wl_rng: stream("workload"),
                    policy_rng: stream("policy"),
                    net_rng: stream("net"),
                    skew_us: if bound > 0 { skew_rng.range_inclusive(-bound, bound) } else { 0 },
                    next_due_us: 0.0,
                }
            })
            .collect();
        let repair_rngs = (0..nodes)
            .map(|n| RngStream::new(cfg.seed, format!("coordinator/{n}/repair")))
            .collect();
        let key_sampler = if cfg.workload.dist.keyspace() == 0 {
            None
        } else {
            Some(cfg.workload.dist.sampler()?)
        };
        let interval_us = cfg.workload.interval_us();
        Ok(Simulation {
            kernel: Kernel::new(),
            replicas: vec![ReplicaState::new(); nodes],
            clients,
            ops: OpSlab::default(),
            client_done: Vec::new(),
            repair_rngs,
            key_sampler,
            phase: Phase::Load,
            next_op_id: 1,
            next_value_id: 1,
            next_writer_seq: 1,
            load_cursor: 0,
            txn_start: SimTime::ZERO,
            txn_end: SimTime::ZERO,
            interval_us,
            records: Vec::new(),
            ledger: Vec::new(),
            load_ops: 0,
            completed_ops: 0,
            cfg,
        })
    }

    pub fn now(&self) -> SimTime {
        self.kernel.now()
    }

    pub fn replicas(&self) -> &[ReplicaState] {
        &self.replicas
    }

    /// Writes every key once (at level ALL, unthrottled) and runs until all
    /// messages have been delivered. Returns the number of load records.
    pub fn run_load_phase(&mut self) -> usize {
        self.phase = Phase::Load;
        let ids: Vec<u32> = self.clients.iter().map(|c| c.id).collect();
        for id in ids {
            self.schedule(self.now(), Event::ClientStart { client: id });
        }
        self.drain();
        self.load_ops = self.records.len();
        self.load_ops
    }

    /// Runs the throttled transaction phase for the configured duration and
    /// then lets in-flight operations and messages finish.
    pub fn run_transaction_phase(&mut self) {
        self.phase = Phase::Transaction;
        self.txn_start = self.now();
        self.txn_end = self.txn_start + (self.cfg.workload.duration_s * 1e6).round() as i64;
        let per_host = self.cfg.workload.clients_per_host;
        let stagger = self.interval_us / per_host as f64;
        let start = self.txn_start.micros() as f64;
        for c in &mut self.clients {
            c.next_due_us = start + (c.id % per_host) as f64 * stagger;
        }
        let firsts: Vec<(u32, f64)> = self.clients.iter().map(|c| (c.id, c.next_due_us)).collect();
        for (id, due) in firsts {
            let at = SimTime(due.round() as i64);
            if at < self.txn_end {
                self.schedule(at, Event::ClientStart { client: id });
            }
        }
        self.drain();
    }

    pub fn finish(mut self) -> SimOutput {
        self.records.sort_by_key(|r| r.op_id);
        self.ledger.sort_by_key(|e| e.op_id);
        let duration_us = self.txn_end - self.txn_start;
        SimOutput {
            trace: Trace {
                meta: TraceMeta {
                    config_digest: String::new(),
                    seed: self.cfg.seed,
                    duration_us,
                    load_ops: self.load_ops,
                },
                records: self.records,
            },
            ledger: self.ledger,
            replicas: self.replicas,
            rf: self.cfg.cluster.rf,
            completed_ops: self.completed_ops,
            duration_us,
            events: self.kernel.dispatched(),
        }
    }

    fn schedule(&mut self, at: SimTime, ev: Event) {
        self.kernel
            .schedule(at, ev)
            .expect("simulation scheduled an event in the past");
    }

    fn drain(&mut self) {
        while let Some((_, ev)) = self.kernel.pop_until(SimTime(i64::MAX)) {
            self.handle(ev);
        }
    }

    fn handle(&mut self, ev: Event) {
        match ev {
            Event::ClientStart { client } => self.client_start(client),
            Event::CoordinatorRecv { op } => self.coordinator_recv(op),
            Event::ReplicaProcess { op, slot } => self.replica_process(op, slot),
            Event::CoordinatorAck { op, slot, version } => self.coordinator_ack(op, slot, version),
            Event::ClientFinish { op } => self.client_finish(op),
            Event::RepairApply { node, key, version } => {
                self.replicas[node].apply_write(key, version);
            }
        }
    }

    fn client_start(&mut self, client_id: u32) {
        let now = self.now();
        let phase = self.phase;
        let nodes = self.cfg.cluster.nodes();
        let rf = self.cfg.cluster.rf;
        let client = &mut self.clients[client_id as usize];

        let (key, kind, decision) = match phase {
            Phase::Load => {
                if self.load_cursor >= self.cfg.workload.dist.keyspace() {
                    return;
                }
                let key = self.load_cursor;
                self.load_cursor += 1;
                (key, OpKind::Write, Decision::plain(ConsistencyLevel::All))
            }
            Phase::Transaction => {
                let sampler = self.key_sampler.as_ref().expect("validated: transaction ops need keys");
                let key = sampler.next_key(&mut client.wl_rng);
                let kind = next_op_kind(self.cfg.workload.read_fraction, &mut client.wl_rng);
                let decision = self.cfg.policy.select(kind, &mut client.policy_rng);
                (key, kind, decision)
            }
        };

        let net = &self.cfg.net;
        let rng = &mut client.net_rng;
        let hop_in = net.local_hop.sample(rng);
        let hop_out = net.local_hop.sample(rng);
        let service = match kind {
            OpKind::Read => &net.service.read,
            OpKind::Write => &net.service.write,
        };
        let replicas: Vec<usize> = replicas_for(key, nodes, rf).collect();
        let legs = replicas
            .iter()
            .map(|_| LegDelays {
                request: net.one_way.sample(rng),
                service: service.sample(rng),
                response: net.one_way.sample(rng),
            })
            .collect();

        let op_id = self.next_op_id;
        self.next_op_id += 1;
        let value_id = if kind == OpKind::Write {
            self.next_value_id += 1;
            self.next_value_id - 1
        } else {
            0
        };
        let required = decision.level.required_acks(rf);
        let arrive = now + decision.pre_delay_us + hop_in;
        let slot = self.ops.insert(OpState {
            op_id,
            client: client_id,
            key,
            kind,
            phase,
            value_id,
            decision,
            hop_out,
            repaired: vec![false; replicas.len()],
            replicas,
            legs,
            pending: PendingOp::new(op_id, kind, key, required),
            stamp: None,
            start: now,
            dispatch: arrive,
            completed: SimTime::ZERO,
            answers: 0,
            newest_seen: Versioned::INITIAL,
        });
        if self.client_done.len() <= slot {
            self.client_done.resize(slot + 1, false);
        }
        self.client_done[slot] = false;
        self.schedule(arrive, Event::CoordinatorRecv { op: slot });
    }

    fn coordinator_recv(&mut self, slot: usize) {
        let now = self.now();
        let seq = self.next_writer_seq;
        let op = self.ops.get_mut(slot);
        debug_assert_eq!(op.dispatch, now);
        if op.kind == OpKind::Write {
            op.stamp = Some(WriteStamp { ts: now, writer_seq: seq });
            self.next_writer_seq += 1;
        }
        let arrivals: Vec<SimTime> = op
            .legs
            .iter()
            .map(|l| now + l.request + l.service)
            .collect();
        for (i, at) in arrivals.into_iter().enumerate() {
            self.schedule(at, Event::ReplicaProcess { op: slot, slot: i });
        }
    }

    fn replica_process(&mut self, slot: usize, leg: usize) {
        let op = self.ops.get(slot);
        let node = op.replicas[leg];
        let version = match op.kind {
            OpKind::Write => {
                let v = Versioned {
                    value_id: op.value_id,
                    stamp: op.stamp.expect("write stamped at dispatch"),
                };
                self.replicas[node].apply_write(op.key, v);
                v
            }
            OpKind::Read => self.replicas[node].serve_read(op.key),
        };
        let back = op.legs[leg].response;
        self.schedule(self.now() + back, Event::CoordinatorAck { op: slot, slot: leg, version });
    }

    fn coordinator_ack(&mut self, slot: usize, leg: usize, version: Versioned) {
        let now = self.now();
        let repair_mode = self.cfg.cluster.read_repair;
        let op = self.ops.get_mut(slot);
        let node = op.replicas[leg];
        op.answers += 1;
        op.newest_seen = op.newest_seen.newer(version);
        let outcome = op.pending.record(ReplicaResponse { node, version });
        if outcome.is_some() {
            op.completed = now;
            let finish = now + op.hop_out + op.decision.post_delay_us;
            self.schedule(finish, Event::ClientFinish { op: slot });
        }

        let op = self.ops.get(slot);
        if repair_mode == ReadRepair::Async && op.kind == OpKind::Read && op.pending.completed {
            let best = op.newest_seen;
            let stale: Vec<(usize, usize)> = op
                .pending
                .received
                .iter()
                .filter(|r| r.version.stamp < best.stamp)
                .filter_map(|r| {
                    let leg = op.replicas.iter().position(|&n| n == r.node)?;
                    (!op.repaired[leg]).then_some((leg, r.node))
                })
                .collect();
            let (coordinator, key) = (self.clients[op.client as usize].host, op.key);
            for (leg, target) in stale {
                self.ops.get_mut(slot).repaired[leg] = true;
                let rng = &mut self.repair_rngs[coordinator];
                let delay = self.cfg.net.one_way.sample(rng) + self.cfg.net.service.write.sample(rng);
                self.schedule(now + delay, Event::RepairApply { node: target, key, version: best });
            }
        }
        self.ops.release_if_done(slot, self.client_done[slot]);
    }

    fn client_finish(&mut self, slot: usize) {
        let now = self.now();
        let op = self.ops.get(slot);
        let client = &self.clients[op.client as usize];
        let outcome = op.pending.outcome.expect("completed before client finish");
        let value_id = match op.kind {
            OpKind::Write => op.value_id,
            OpKind::Read => outcome.value_id,
        };
        self.records.push(OperationRecord {
            op_id: op.op_id,
            client_id: op.client,
            key: op.key,
            kind: op.kind,
            value_id,
            invoke: op.start + client.skew_us,
            response: now + client.skew_us,
            level: op.decision.level,
            pre_delay_us: op.decision.pre_delay_us,
            post_delay_us: op.decision.post_delay_us,
        });
        if self.cfg.keep_ledger {
            let answered_by = op.pending.received[..op.pending.required_acks]
                .iter()
                .map(|r| r.node)
                .collect();
            self.ledger.push(LedgerEntry {
                op_id: op.op_id,
                client_id: op.client,
                kind: op.kind,
                key: op.key,
                level: op.decision.level,
                start: op.start,
                dispatch: op.dispatch,
                completed: op.completed,
                finish: now,
                version: outcome,
                answered_by,
            });
        }
        debug_assert_eq!(op.completed + op.hop_out + op.decision.post_delay_us, now);
        let (client_id, phase) = (op.client, op.phase);
        if phase == Phase::Transaction {
            self.completed_ops += 1;
        }
        self.client_done[slot] = true;
        self.ops.release_if_done(slot, true);

        match self.phase {
            Phase::Load => self.schedule(now, Event::ClientStart { client: client_id }),
            Phase::Transaction => {
                let interval = self.interval_us;
                let client = &mut self.clients[client_id as usize];
                client.next_due_us += interval;
                let at = SimTime(client.next_due_us.round() as i64).max(now);
                if at < self.txn_end {
                    self.schedule(at, Event::ClientStart { client: client_id });
                }
            }
        }
    }
}

/// Runs the load phase and then the transaction phase.
pub fn simulate(cfg: SimConfig) -> Result<SimOutput, String> {
    let mut sim = Simulation::new(cfg)?;
    sim.run_load_phase();
    sim.run_transaction_phase();
    Ok(sim.finish())
}
