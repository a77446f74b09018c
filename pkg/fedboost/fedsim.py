"""Deterministic discrete-event simulation of federated boosting.

Clients boost locally on their shard, buffer the learners they train and
upload the buffer every ``interval`` local rounds. In the asynchronous modes
the server aggregates each upload as it arrives, decaying stale learners,
re-evaluates the ensemble on its validation split, runs the interval
controller and answers the uploader only. The synchronous baseline runs one
local round per client per global round behind a barrier.

Time is virtual. Events are processed in (time, kind, client_id) order with
kinds ordered ClientRoundStart < UploadArrival < BroadcastArrival.

Message sizes used for byte counts:

* upload: 24-byte header + 40 bytes per learner;
* broadcast: 24-byte header + 16 bytes (interval, aggregation count)
  + 8 bytes per ensemble member the recipient has not seen yet.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .boostcore import (
    DEFAULT_EPS_FLOOR,
    BufferedLearner,
    Ensemble,
    accumulate_margin,
    clamp_error,
    learner_weight,
    sign,
    update_distribution,
)
from .datagen import Dataset, concat_datasets, generate_gaussians, partition_dirichlet, split_validation
from .exceptions import InvalidArgumentError
from .metrics import detect_convergence
from .models.config_model import ExperimentConfig, Mode, SchedulerParams
from .models.trace_model import LocalRound, MetricsRecord, RoundOutcome, SimTrace, StopReason
from .scheduler import SchedulerState, next_interval
from .stump import DistributionVector, train_stump
from .utils.logger import log, log_and_raise_error, log_debug
from .utils.rng import stream

HEADER_BYTES = 24
LEARNER_BYTES = 40
BROADCAST_BODY_BYTES = 16
MEMBER_DELTA_BYTES = 8


def upload_bytes(learners: int) -> int:
    return HEADER_BYTES + LEARNER_BYTES * learners


def broadcast_bytes(new_members: int) -> int:
    return HEADER_BYTES + BROADCAST_BODY_BYTES + MEMBER_DELTA_BYTES * new_members


class EventKind(IntEnum):
    CLIENT_ROUND_START = 0
    UPLOAD_ARRIVAL = 1
    BROADCAST_ARRIVAL = 2


@dataclass(frozen=True)
class UploadPayload:
    learners: Tuple[BufferedLearner, ...]


@dataclass(frozen=True)
class BroadcastPayload:
    """Ensemble snapshot, interval and aggregation count sent to one client."""

    ensemble: Ensemble
    interval: int
    aggregation_count: int
    new_members: int


@dataclass(frozen=True)
class SimEvent:
    time: float
    kind: EventKind
    client_id: int
    payload: Union[UploadPayload, BroadcastPayload, None] = None


class EventQueue:
    """Events ordered by (time, kind, client_id), then by insertion."""

    def __init__(self):
        self._heap: List[tuple] = []
        self._counter = itertools.count()
        self.last_time = 0.0

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, event: SimEvent) -> None:
        if event.time < self.last_time:
            log_and_raise_error(f"Event at {event.time} scheduled in the past (now {self.last_time}).")
        heapq.heappush(self._heap, (event.time, int(event.kind), event.client_id, next(self._counter), event))

    def peek_time(self) -> float:
        return self._heap[0][0]

    def pop(self) -> SimEvent:
        event = heapq.heappop(self._heap)[-1]
        self.last_time = event.time
        return event


@dataclass
class ClientState:
    """A simulated client. Mutated in place by the client operations."""

    client_id: int
    shard: Dataset
    dist: DistributionVector
    compute_time: float
    link_latency: float
    dropout_prob: float
    rng: np.random.Generator = field(repr=False)
    burst_persistence: Optional[float] = None
    buffer: List[BufferedLearner] = field(default_factory=list)
    rounds_until_sync: int = 0
    snapshot_round: int = 0
    interval: int = 1
    clock: float = 0.0
    next_seq: int = 0
    rounds_run: int = 0
    dropped_last: bool = False
    uploading: bool = False
    last_round: Optional[LocalRound] = None


def client_local_round(client: ClientState, eps_floor: float = DEFAULT_EPS_FLOOR) -> ClientState:
    """
    Run one local boosting round.

    The round takes ``compute_time`` of virtual time whatever happens. It is
    dropped with probability ``dropout_prob`` (``burst_persistence`` right
    after a dropped round, when set); a dropped round does not count toward
    the interval. A learner with raw error >= 0.5 is discarded and leaves the
    distribution untouched but the round still counts. Otherwise the learner
    is buffered and the distribution reweighted with its undecayed weight.

    Args:
        client: the client; must not be waiting on an upload.
        eps_floor: error clamping floor for the learner weight.

    Returns:
        The same, updated, client. ``client.last_round`` describes the round.
    """
    if client.uploading:
        log_and_raise_error(f"Client {client.client_id} cannot train while its upload is in flight.", InvalidArgumentError)
    drop_probability = client.dropout_prob
    if client.burst_persistence is not None and client.dropped_last:
        drop_probability = client.burst_persistence
    dropped = client.rng.random() < drop_probability
    client.clock += client.compute_time
    client.rounds_run += 1

    if dropped:
        client.dropped_last = True
        client.last_round = LocalRound(
            time=client.clock, client_id=client.client_id, round_index=client.rounds_run, outcome=RoundOutcome.DROPPED
        )
        return client

    client.dropped_last = False
    stump, raw_error = train_stump(client.shard, client.dist)
    if raw_error >= 0.5:
        outcome, alpha = RoundOutcome.DISCARDED, None
    else:
        outcome, alpha = RoundOutcome.TRAINED, learner_weight(raw_error, eps_floor)
        client.buffer.append(
            BufferedLearner(
                stump=stump,
                epsilon=clamp_error(raw_error, eps_floor),
                alpha=alpha,
                client_id=client.client_id,
                snapshot_round=client.snapshot_round,
                local_seq=client.next_seq,
            )
        )
        client.next_seq += 1
        client.dist = update_distribution(client.dist, stump, alpha, client.shard).dist
    client.rounds_until_sync = max(0, client.rounds_until_sync - 1)
    client.last_round = LocalRound(
        time=client.clock,
        client_id=client.client_id,
        round_index=client.rounds_run,
        outcome=outcome,
        raw_error=raw_error,
        alpha=alpha,
    )
    return client


def flush_and_upload(client: ClientState, now: float) -> Optional[SimEvent]:
    """
    Send the whole buffer to the server once the countdown reaches zero.

    An empty buffer sends nothing and restarts the countdown from the
    client's current interval.

    Args:
        client: the client; its countdown must be zero.
        now: virtual time of the flush.

    Returns:
        The UploadArrival event (at now + link latency), or None.
    """
    if client.rounds_until_sync != 0:
        log_and_raise_error(
            f"Client {client.client_id} flushed with {client.rounds_until_sync} rounds left.", InvalidArgumentError
        )
    if not client.buffer:
        client.rounds_until_sync = client.interval
        return None
    event = SimEvent(
        time=now + client.link_latency,
        kind=EventKind.UPLOAD_ARRIVAL,
        client_id=client.client_id,
        payload=UploadPayload(learners=tuple(client.buffer)),
    )
    client.buffer = []
    client.uploading = True
    return event


@dataclass(frozen=True)
class ServerState:
    """The aggregator: global ensemble, aggregation counter, controller and running margins."""

    ensemble: Ensemble
    aggregation_count: int
    scheduler: SchedulerState
    validation: Dataset
    training: Optional[Dataset] = None
    validation_margin: np.ndarray = field(default=None, repr=False, compare=False)  # type: ignore
    training_margin: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    known_members: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.validation_margin is None:
            object.__setattr__(self, "validation_margin", np.zeros(len(self.validation)))
        if self.training is not None and self.training_margin is None:
            object.__setattr__(self, "training_margin", np.zeros(len(self.training)))

    @property
    def validation_error(self) -> float:
        return _error_from_margin(self.validation_margin, self.validation)

    @property
    def training_error(self) -> float:
        if self.training is None:
            return float("nan")
        return _error_from_margin(self.training_margin, self.training)


def _error_from_margin(margin: np.ndarray, dataset: Dataset) -> float:
    return float(np.count_nonzero(sign(margin) != dataset.labels)) / len(dataset)


def _apply_learners(server: ServerState, learners: Sequence[BufferedLearner]) -> ServerState:
    """Append learners as one aggregation, decaying each by its staleness."""
    count = server.aggregation_count + 1
    members = [server.ensemble.member_for(learner, (count - 1) - learner.snapshot_round) for learner in learners]
    validation_margin = server.validation_margin
    training_margin = server.training_margin
    for member in members:
        validation_margin = accumulate_margin(validation_margin, member, server.validation.features)
        if server.training is not None:
            training_margin = accumulate_margin(training_margin, member, server.training.features)
    return replace(
        server,
        ensemble=server.ensemble.extend(members),
        aggregation_count=count,
        validation_margin=validation_margin,
        training_margin=training_margin,
    )


def _broadcast_to(server: ServerState, client_id: int, time: float) -> Tuple[ServerState, SimEvent]:
    new_members = len(server.ensemble) - server.known_members.get(client_id, 0)
    event = SimEvent(
        time=time,
        kind=EventKind.BROADCAST_ARRIVAL,
        client_id=client_id,
        payload=BroadcastPayload(
            ensemble=server.ensemble,
            interval=server.scheduler.interval,
            aggregation_count=server.aggregation_count,
            new_members=new_members,
        ),
    )
    known = dict(server.known_members)
    known[client_id] = len(server.ensemble)
    return replace(server, known_members=known), event


def server_aggregate(
    server: ServerState, arrival: SimEvent, params: SchedulerParams, reply_latency: float
) -> Tuple[ServerState, SimEvent]:
    """
    Aggregate one upload.

    Each learner's staleness is (aggregation count after this one - 1) minus
    its snapshot round, floored at 0. The ensemble error on the validation
    split then drives the interval controller, and the new ensemble, interval
    and count go back to the uploader only.

    Args:
        server: current server state.
        arrival: an UploadArrival event.
        params: interval controller settings.
        reply_latency: uploader's one-way link latency.

    Returns:
        The new server state and the BroadcastArrival event for the uploader.
    """
    if arrival.kind != EventKind.UPLOAD_ARRIVAL or not isinstance(arrival.payload, UploadPayload):
        log_and_raise_error(f"Server can only aggregate uploads, got {arrival.kind.name}.", InvalidArgumentError)
    server = _apply_learners(server, arrival.payload.learners)
    server = replace(server, scheduler=next_interval(server.scheduler, params, server.validation_error))
    return _broadcast_to(server, arrival.client_id, arrival.time + reply_latency)


def server_aggregate_round(
    server: ServerState, arrivals: Sequence[SimEvent], now: float, reply_latencies: Mapping[int, float]
) -> Tuple[ServerState, List[SimEvent]]:
    """
    Aggregate one synchronous global round and broadcast to every client.

    Learners are appended in client_id order, then local_seq order; all were
    trained against the previous aggregation, so none is decayed.

    Args:
        server: current server state.
        arrivals: the round's UploadArrival events.
        now: virtual time at which the barrier closed.
        reply_latencies: one-way link latency of every client, by id.

    Returns:
        The new server state and one BroadcastArrival per client.
    """
    learners = [
        learner
        for arrival in sorted(arrivals, key=lambda e: e.client_id)
        for learner in arrival.payload.learners  # type: ignore
    ]
    server = _apply_learners(server, learners)
    broadcasts = []
    for client_id in sorted(reply_latencies):
        server, event = _broadcast_to(server, client_id, now + reply_latencies[client_id])
        broadcasts.append(event)
    return server, broadcasts


@dataclass(frozen=True)
class ClientProfile:
    client_id: int
    compute_time: float
    link_latency: float
    dropout_prob: float


@dataclass(frozen=True)
class Federation:
    """Data and client resources shared by every mode of one experiment."""

    training: Dataset
    validation: Dataset
    shards: Tuple[Dataset, ...]
    profiles: Tuple[ClientProfile, ...]
    dropout_seed: int
    burst_persistence: Optional[float] = None

    def new_clients(self) -> List[ClientState]:
        """Fresh client states; each client's dropout stream restarts from its seed."""
        return [
            ClientState(
                client_id=profile.client_id,
                shard=shard,
                dist=DistributionVector.uniform(len(shard)),
                compute_time=profile.compute_time,
                link_latency=profile.link_latency,
                dropout_prob=profile.dropout_prob,
                rng=stream(self.dropout_seed, "dropout", profile.client_id),
                burst_persistence=self.burst_persistence,
            )
            for profile, shard in zip(self.profiles, self.shards)
        ]


def prepare_federation(config: ExperimentConfig) -> Federation:
    """
    Generate the data, hold out validation, partition it and draw client resources.

    Each client draws, in client order, compute time, link latency and
    dropout probability uniformly from the configured ranges on the
    ``latency`` stream.
    """
    spec = config.dataset
    dataset = generate_gaussians(spec.n, spec.dimension, spec.sigma, spec.seed, spec.positive_fraction)
    training, validation = split_validation(dataset, spec.validation_fraction, spec.seed)
    shards = partition_dirichlet(
        training, config.partition.clients, config.partition.concentration, config.partition.seed
    )
    heterogeneity = config.heterogeneity
    rng = stream(heterogeneity.seed, "latency")
    profiles = []
    for client_id in range(len(shards)):
        profiles.append(
            ClientProfile(
                client_id=client_id,
                compute_time=float(rng.uniform(*heterogeneity.compute_time)),
                link_latency=float(rng.uniform(*heterogeneity.link_latency)),
                dropout_prob=float(rng.uniform(*heterogeneity.dropout)),
            )
        )
    return Federation(
        training=concat_datasets(shards),
        validation=validation,
        shards=tuple(shards),
        profiles=tuple(profiles),
        dropout_seed=heterogeneity.seed,
        burst_persistence=heterogeneity.burst_persistence,
    )


class FederationSimulator:
    """Event loop shared by the asynchronous modes and the synchronous baseline."""

    def __init__(self, config: ExperimentConfig, federation: Federation):
        self.config = config
        self.mode = Mode(config.mode)
        self.params = config.scheduler_params
        self.eps_floor = config.algorithm.eps_floor
        self.clients: Dict[int, ClientState] = {c.client_id: c for c in federation.new_clients()}
        self.queue = EventQueue()
        self.uploads = 0
        self.broadcasts = 0
        self.bytes = 0
        self.records: List[MetricsRecord] = []
        self.events: List[SimEvent] = []
        self.local_rounds: List[LocalRound] = []
        self.stop_reason: Optional[StopReason] = None
        self.barrier: Dict[int, Tuple[float, Optional[SimEvent]]] = {}

        initial_interval = 1 if self.mode == Mode.SYNCHRONOUS else config.algorithm.initial_interval
        self.server = ServerState(
            ensemble=Ensemble(decay_lambda=config.algorithm.decay_lambda),
            aggregation_count=0,
            scheduler=SchedulerState.initial(initial_interval, self.params),
            validation=federation.validation,
            training=federation.training,
        )

    @property
    def synchronous(self) -> bool:
        return self.mode == Mode.SYNCHRONOUS

    def run(self) -> SimTrace:
        """Process events until a stop condition holds."""
        log(
            "Starting simulation.",
            mode=self.mode.value,
            clients=len(self.clients),
            max_aggregations=self.config.stop.max_aggregations,
        )
        if not self.synchronous:
            # the first evaluation only primes the controller
            self.server = replace(
                self.server, scheduler=next_interval(self.server.scheduler, self.params, self.server.validation_error)
            )
        for client_id, client in self.clients.items():
            self.server, event = _broadcast_to(self.server, client_id, client.link_latency)
            self._send_broadcast(event)
        self._record(0.0)

        while self.stop_reason is None:
            if not self.queue:
                self.stop_reason = StopReason.IDLE
                break
            if self.queue.peek_time() > self.config.stop.max_virtual_time:
                self.stop_reason = StopReason.MAX_VIRTUAL_TIME
                break
            event = self.queue.pop()
            self.events.append(event)
            if event.kind == EventKind.CLIENT_ROUND_START:
                self._on_round_start(event)
            elif event.kind == EventKind.UPLOAD_ARRIVAL:
                self._on_upload(event)
            else:
                self._on_broadcast(event)

        convergence = self.config.convergence
        trace = SimTrace(
            mode=self.mode.value,
            records=tuple(self.records),
            ensemble=self.server.ensemble,
            events=tuple(self.events),
            local_rounds=tuple(self.local_rounds),
            stop_reason=self.stop_reason,
            converged_at=detect_convergence(
                self.records, convergence.target_error, convergence.plateau_tol, convergence.window
            ),
        )
        log(
            "Simulation finished.",
            mode=trace.mode,
            stop_reason=trace.stop_reason.value,
            aggregations=trace.aggregations,
            virtual_time=self.records[-1].virtual_time,
            converged_at=trace.converged_at,
        )
        return trace

    def _send_broadcast(self, event: SimEvent) -> None:
        self.broadcasts += 1
        self.bytes += broadcast_bytes(event.payload.new_members)  # type: ignore
        self.queue.push(event)

    def _send_upload(self, event: SimEvent) -> None:
        self.uploads += 1
        self.bytes += upload_bytes(len(event.payload.learners))  # type: ignore
        self.queue.push(event)

    def _schedule_round(self, client: ClientState, time: float) -> None:
        self.queue.push(SimEvent(time=time, kind=EventKind.CLIENT_ROUND_START, client_id=client.client_id))

    def _record(self, time: float) -> None:
        server = self.server
        self.records.append(
            MetricsRecord(
                aggregation_index=server.aggregation_count,
                virtual_time=float(time),
                cumulative_uploads=self.uploads,
                cumulative_broadcasts=self.broadcasts,
                cumulative_bytes=self.bytes,
                validation_error=server.validation_error,
                training_error=server.training_error,
                current_interval=server.scheduler.interval,
            )
        )
        log_debug(
            "Aggregated.",
            mode=self.mode.value,
            aggregation=server.aggregation_count,
            vtime=time,
            val_err=self.records[-1].validation_error,
            interval=server.scheduler.interval,
        )
        convergence = self.config.convergence
        if self.config.stop.on_convergence and (
            detect_convergence(self.records, convergence.target_error, convergence.plateau_tol, convergence.window)
            is not None
        ):
            self.stop_reason = StopReason.CONVERGED
        elif server.aggregation_count >= self.config.stop.max_aggregations:
            self.stop_reason = StopReason.MAX_AGGREGATIONS

    def _on_broadcast(self, event: SimEvent) -> None:
        client = self.clients[event.client_id]
        payload: BroadcastPayload = event.payload  # type: ignore
        client.snapshot_round = payload.aggregation_count
        client.interval = 1 if self.synchronous else payload.interval
        client.rounds_until_sync = client.interval
        client.uploading = False
        client.clock = event.time
        self._schedule_round(client, event.time)

    def _on_round_start(self, event: SimEvent) -> None:
        client = self.clients[event.client_id]
        client.clock = event.time
        client_local_round(client, self.eps_floor)
        self.local_rounds.append(client.last_round)  # type: ignore

        upload = flush_and_upload(client, client.clock) if client.rounds_until_sync == 0 else None
        if upload is not None:
            self._send_upload(upload)
        elif self.synchronous:
            self._resolve_barrier(client.client_id, client.clock, None)
        else:
            self._schedule_round(client, client.clock)

    def _on_upload(self, event: SimEvent) -> None:
        if self.synchronous:
            self._resolve_barrier(event.client_id, event.time, event)
            return
        client = self.clients[event.client_id]
        self.server, broadcast = server_aggregate(self.server, event, self.params, client.link_latency)
        self._send_broadcast(broadcast)
        self._record(event.time)

    def _resolve_barrier(self, client_id: int, time: float, upload: Optional[SimEvent]) -> None:
        """Close the global round once every client has uploaded or finished without a learner."""
        self.barrier[client_id] = (time, upload)
        if len(self.barrier) < len(self.clients):
            return
        close_time = max(t for t, _ in self.barrier.values())
        arrivals = [e for _, e in self.barrier.values() if e is not None]
        self.barrier = {}
        if close_time > self.config.stop.max_virtual_time:
            self.stop_reason = StopReason.MAX_VIRTUAL_TIME
            return
        if not arrivals:
            # nobody uploaded: the round times out and every client retries
            for client in self.clients.values():
                client.rounds_until_sync = 1
                client.clock = close_time
                self._schedule_round(client, close_time)
            return
        latencies = {client_id: client.link_latency for client_id, client in self.clients.items()}
        self.server, broadcasts = server_aggregate_round(self.server, arrivals, close_time, latencies)
        for broadcast in broadcasts:
            self._send_broadcast(broadcast)
        self._record(close_time)


def run_simulation(config: ExperimentConfig) -> SimTrace:
    """
    Simulate the configured mode from scratch.

    Args:
        config: validated experiment config.

    Returns:
        The complete trace; identical configs give identical traces.
    """
    if Mode(config.mode) == Mode.SYNCHRONOUS:
        return mode_synchronous_baseline(config)
    return FederationSimulator(config, prepare_federation(config)).run()


def mode_synchronous_baseline(config: ExperimentConfig) -> SimTrace:
    """Simulate the barrier-synchronized baseline on the same data and clients as ``config``."""
    config = config.with_mode(Mode.SYNCHRONOUS)
    return FederationSimulator(config, prepare_federation(config)).run()


__all__ = [
    "ClientState",
    "EventKind",
    "EventQueue",
    "Federation",
    "FederationSimulator",
    "ServerState",
    "SimEvent",
    "client_local_round",
    "flush_and_upload",
    "mode_synchronous_baseline",
    "prepare_federation",
    "run_simulation",
    "server_aggregate",
    "server_aggregate_round",
]
