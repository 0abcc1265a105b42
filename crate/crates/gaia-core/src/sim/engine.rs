//! The discrete-event loop behind `run_trace`.
//!
//! Three event classes share the clock: request completions, controller
//! reevaluation ticks, and request arrivals. At equal times completions are
//! processed first (so a tick sees every sample up to and including its own
//! timestamp), then ticks, then arrivals (an arrival exactly at a switch
//! timestamp is served by the new revision).

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rand_core::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use crate::analyzer::ExecutionMode;
use crate::controller::{
    self, ControllerConfig, FunctionState, Registry, SwitchError, SwitchTarget, Verdict,
};
use crate::telemetry::{Backend, Sample, TelemetryConfig, TelemetryStore};

use super::{
    deploy, place, BusySpan, DecisionRecord, Deployment, ModeEvent, NodeSpec, RequestRecord,
    RequestTrace, ScenarioResult, SimError, UtilSeries, WorkloadModel,
};

/// Everything a scenario run needs.
#[derive(Debug, Clone)]
pub struct SimInputs {
    pub cluster: Vec<NodeSpec>,
    /// Initial mode and workload per function, keyed by function id.
    pub functions: BTreeMap<String, (ExecutionMode, WorkloadModel)>,
    pub trace: RequestTrace,
    pub controller: ControllerConfig,
    pub telemetry: TelemetryConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
enum EventKind {
    Completion {
        function_id: String,
        instance_id: u32,
        index: u64,
        parameter: i64,
        arrival_ms: f64,
        cold: bool,
        backend: Backend,
        node_id: String,
    },
    Tick,
    Arrival {
        index: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Event {
    /// (time bits, class rank, sequence) — a total order. Times are finite
    /// and non-negative, so the IEEE bit pattern preserves ordering.
    key: (u64, u8, u64),
    time: f64,
    kind: EventKind,
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

fn rank(kind: &EventKind) -> u8 {
    match kind {
        EventKind::Completion { .. } => 0,
        EventKind::Tick => 1,
        EventKind::Arrival { .. } => 2,
    }
}

#[derive(Debug)]
struct Instance {
    id: u32,
    node: String,
    backend: Backend,
    cold_consumed: bool,
    /// When the instance can first serve (after its cold start).
    ready_at: f64,
    /// Serial instances: completion time of the request being served.
    busy_until: f64,
    in_flight: usize,
}

impl Instance {
    fn new(id: u32, node: String, backend: Backend, created_at: f64) -> Self {
        Instance {
            id,
            node,
            backend,
            cold_consumed: false,
            ready_at: created_at,
            busy_until: created_at,
            in_flight: 0,
        }
    }
}

#[derive(Debug, Clone)]
struct Queued {
    index: u64,
    arrival_ms: f64,
    parameter: i64,
}

#[derive(Debug)]
struct FnRuntime {
    workload: WorkloadModel,
    deployment: Deployment,
    active: Instance,
    draining: Vec<Instance>,
    queue: VecDeque<Queued>,
    next_instance_id: u32,
}

/// A raw (possibly overlapping) busy interval of one instance.
#[derive(Debug, Clone)]
struct RawSpan {
    function_id: String,
    instance_id: u32,
    backend: Backend,
    node_id: String,
    start_ms: f64,
    end_ms: f64,
}

struct Core {
    cluster: Vec<NodeSpec>,
    fns: BTreeMap<String, FnRuntime>,
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
    seed: u64,
    mode_events: Vec<ModeEvent>,
    raw_spans: Vec<RawSpan>,
    completed: Vec<RequestRecord>,
    pending_arrivals: usize,
    in_flight: usize,
    queued: usize,
}

/// Values needed to schedule one service, extracted under a short borrow.
struct ServicePlan {
    q: Queued,
    begin: f64,
    cold: bool,
    cold_ms: f64,
    base_service_ms: f64,
    jitter_pct: f64,
    backend: Backend,
    node: String,
    instance_id: u32,
}

impl Core {
    fn push_event(&mut self, time: f64, kind: EventKind) {
        let key = (time.to_bits(), rank(&kind), self.seq);
        self.seq += 1;
        self.heap.push(Reverse(Event { key, time, kind }));
    }

    /// Per-request service-time jitter, a deterministic function of
    /// (seed, function, request index) so reruns and deployment-mode
    /// variants of one scenario draw identical factors.
    fn jitter_factor(&self, function_id: &str, index: u64, pct: f64) -> f64 {
        if pct == 0.0 {
            return 1.0;
        }
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in function_id.bytes() {
            h = (h ^ b as u64).wrapping_mul(0x1000_0000_01b3);
        }
        let mut rng =
            Pcg64::seed_from_u64(self.seed ^ h ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let unit = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        1.0 + (pct / 100.0) * (2.0 * unit - 1.0)
    }

    fn load_map(&self) -> BTreeMap<String, usize> {
        let mut load = BTreeMap::new();
        for rt in self.fns.values() {
            *load.entry(rt.active.node.clone()).or_insert(0) += 1;
            for d in &rt.draining {
                *load.entry(d.node.clone()).or_insert(0) += 1;
            }
        }
        load
    }

    fn schedule_service(&mut self, function_id: &str, plan: ServicePlan) {
        let factor = self.jitter_factor(function_id, plan.q.index, plan.jitter_pct);
        let completion = plan.begin + plan.cold_ms + plan.base_service_ms * factor;
        {
            let rt = self.fns.get_mut(function_id).expect("runtime exists");
            if rt.workload.unbounded_concurrency {
                rt.active.in_flight += 1;
            } else {
                rt.active.busy_until = completion;
                rt.active.in_flight = 1;
            }
        }
        self.in_flight += 1;
        self.raw_spans.push(RawSpan {
            function_id: function_id.to_string(),
            instance_id: plan.instance_id,
            backend: plan.backend,
            node_id: plan.node.clone(),
            start_ms: plan.begin,
            end_ms: completion,
        });
        self.push_event(
            completion,
            EventKind::Completion {
                function_id: function_id.to_string(),
                instance_id: plan.instance_id,
                index: plan.q.index,
                parameter: plan.q.parameter,
                arrival_ms: plan.q.arrival_ms,
                cold: plan.cold,
                backend: plan.backend,
                node_id: plan.node,
            },
        );
    }

    /// Serial instance: start the queue head if the active instance is free.
    fn start_next_serial(&mut self, function_id: &str) {
        let plan = {
            let rt = self.fns.get_mut(function_id).expect("runtime exists");
            if rt.workload.unbounded_concurrency || rt.active.in_flight > 0 || rt.queue.is_empty() {
                return;
            }
            let q = rt.queue.pop_front().expect("checked non-empty");
            let cold = !rt.active.cold_consumed;
            if cold {
                rt.active.cold_consumed = true;
            }
            let backend = rt.active.backend;
            ServicePlan {
                begin: q.arrival_ms.max(rt.active.busy_until),
                cold,
                cold_ms: if cold {
                    rt.workload.cold_start_ms(backend)
                } else {
                    0.0
                },
                base_service_ms: rt.workload.service(backend).eval(q.parameter),
                jitter_pct: rt.workload.jitter_pct,
                backend,
                node: rt.active.node.clone(),
                instance_id: rt.active.id,
                q,
            }
        };
        self.queued -= 1;
        self.schedule_service(function_id, plan);
    }

    /// Unbounded concurrency: requests start as soon as the instance is
    /// ready; the first one triggers (and pays) the cold start.
    fn start_concurrent(&mut self, function_id: &str, q: Queued) {
        let (plan, cold_span) = {
            let rt = self.fns.get_mut(function_id).expect("runtime exists");
            let cold = !rt.active.cold_consumed;
            let mut cold_span = None;
            if cold {
                rt.active.cold_consumed = true;
                rt.active.ready_at = q.arrival_ms + rt.workload.cold_start_ms(rt.active.backend);
                cold_span = Some(RawSpan {
                    function_id: function_id.to_string(),
                    instance_id: rt.active.id,
                    backend: rt.active.backend,
                    node_id: rt.active.node.clone(),
                    start_ms: q.arrival_ms,
                    end_ms: rt.active.ready_at,
                });
            }
            let backend = rt.active.backend;
            let plan = ServicePlan {
                begin: q.arrival_ms.max(rt.active.ready_at),
                cold,
                cold_ms: 0.0,
                base_service_ms: rt.workload.service(backend).eval(q.parameter),
                jitter_pct: rt.workload.jitter_pct,
                backend,
                node: rt.active.node.clone(),
                instance_id: rt.active.id,
                q,
            };
            (plan, cold_span)
        };
        if let Some(span) = cold_span {
            self.raw_spans.push(span);
        }
        self.schedule_service(function_id, plan);
    }

    fn on_arrival(&mut self, function_id: &str, q: Queued) {
        let unbounded = self
            .fns
            .get(function_id)
            .expect("runtime exists")
            .workload
            .unbounded_concurrency;
        if unbounded {
            self.start_concurrent(function_id, q);
        } else {
            let rt = self.fns.get_mut(function_id).expect("runtime exists");
            rt.queue.push_back(q);
            self.queued += 1;
            self.start_next_serial(function_id);
        }
    }

    fn on_completion(&mut self, ev_time: f64, kind: &EventKind) {
        let EventKind::Completion {
            function_id,
            instance_id,
            index,
            parameter,
            arrival_ms,
            cold,
            backend,
            node_id,
        } = kind
        else {
            unreachable!("on_completion called with a completion event")
        };
        self.completed.push(RequestRecord {
            index: *index,
            function_id: function_id.clone(),
            parameter: *parameter,
            arrival_ms: *arrival_ms,
            completion_ms: ev_time,
            latency_ms: ev_time - arrival_ms,
            backend: *backend,
            node_id: node_id.clone(),
            cold_start: *cold,
        });
        self.in_flight -= 1;
        {
            let rt = self.fns.get_mut(function_id).expect("runtime exists");
            if rt.active.id == *instance_id {
                rt.active.in_flight -= 1;
            } else if let Some(pos) = rt.draining.iter().position(|d| d.id == *instance_id) {
                rt.draining[pos].in_flight -= 1;
                if rt.draining[pos].in_flight == 0 {
                    rt.draining.remove(pos);
                    let node = rt.active.node.clone();
                    let warm = rt.active.cold_consumed;
                    rt.deployment.instances = vec![(node, warm)];
                }
            }
        }
        self.start_next_serial(function_id);
    }
}

impl SwitchTarget for Core {
    fn redeploy(
        &mut self,
        function_id: &str,
        target: Backend,
        now_ms: f64,
    ) -> Result<(), SwitchError> {
        let load = self.load_map();
        let node = match place(&self.cluster, target, &load) {
            Ok(n) => n,
            Err(_) => {
                self.mode_events.push(ModeEvent::Failed {
                    at_ms: now_ms,
                    function_id: function_id.to_string(),
                    target,
                    reason: "no eligible node".into(),
                });
                return Err(SwitchError::NoEligibleNode(target));
            }
        };
        let (revision, from) = {
            let rt = self.fns.get_mut(function_id).expect("runtime exists");
            let id = rt.next_instance_id;
            rt.next_instance_id += 1;
            let old = std::mem::replace(
                &mut rt.active,
                Instance::new(id, node.clone(), target, now_ms),
            );
            let from = old.backend;
            rt.deployment.revision += 1;
            rt.deployment.active_backend = target;
            rt.deployment.mode = match target {
                Backend::Gpu => ExecutionMode::GpuPreferred,
                Backend::Cpu => ExecutionMode::CpuPreferred,
            };
            rt.deployment.instances = vec![(node, false)];
            if old.in_flight > 0 {
                // Ongoing requests finish on the departing instance.
                rt.deployment
                    .instances
                    .push((old.node.clone(), old.cold_consumed));
                rt.draining.push(old);
            }
            (rt.deployment.revision, from)
        };
        self.mode_events.push(ModeEvent::Switched {
            at_ms: now_ms,
            function_id: function_id.to_string(),
            from,
            to: target,
            revision,
        });
        // Queued-but-unstarted requests migrate to the new revision.
        self.start_next_serial(function_id);
        Ok(())
    }
}

/// Run one scenario to completion.
pub fn run_trace(inputs: &SimInputs) -> Result<ScenarioResult, SimError> {
    for entry in inputs.trace.entries() {
        if !inputs.functions.contains_key(&entry.function_id) {
            return Err(SimError::UndeployedFunction(entry.function_id.clone()));
        }
    }

    let mut telemetry = TelemetryStore::new(inputs.telemetry.clone());
    let mut registry = Registry::new();
    let mut core = Core {
        cluster: inputs.cluster.clone(),
        fns: BTreeMap::new(),
        heap: BinaryHeap::new(),
        seq: 0,
        seed: inputs.seed,
        mode_events: Vec::new(),
        raw_spans: Vec::new(),
        completed: Vec::new(),
        pending_arrivals: inputs.trace.len(),
        in_flight: 0,
        queued: 0,
    };

    let mut load = BTreeMap::new();
    for (fid, (mode, workload)) in &inputs.functions {
        workload
            .validate()
            .map_err(|message| SimError::InvalidWorkload {
                function_id: fid.clone(),
                message,
            })?;
        let deployment = deploy(fid, *mode, &inputs.cluster, &load)?;
        *load.entry(deployment.instances[0].0.clone()).or_insert(0) += 1;
        let instance = Instance::new(
            0,
            deployment.instances[0].0.clone(),
            deployment.active_backend,
            0.0,
        );
        core.fns.insert(
            fid.clone(),
            FnRuntime {
                workload: workload.clone(),
                deployment,
                active: instance,
                draining: Vec::new(),
                queue: VecDeque::new(),
                next_instance_id: 1,
            },
        );
        registry.insert(FunctionState::new(fid.clone(), *mode));
        telemetry.register(fid.clone());
    }

    for (i, entry) in inputs.trace.entries().iter().enumerate() {
        core.push_event(entry.at_ms, EventKind::Arrival { index: i as u64 });
    }
    let period = inputs.controller.reevaluation_period_ms as f64;
    if !inputs.trace.is_empty() {
        core.push_event(period, EventKind::Tick);
    }

    let mut decisions: Vec<DecisionRecord> = Vec::new();

    while let Some(Reverse(ev)) = core.heap.pop() {
        match &ev.kind {
            EventKind::Arrival { index } => {
                let entry = &inputs.trace.entries()[*index as usize];
                core.pending_arrivals -= 1;
                core.on_arrival(
                    &entry.function_id.clone(),
                    Queued {
                        index: *index,
                        arrival_ms: entry.at_ms,
                        parameter: entry.parameter,
                    },
                );
            }
            EventKind::Completion {
                function_id,
                cold,
                backend,
                ..
            } => {
                let (function_id, cold, backend) = (function_id.clone(), *cold, *backend);
                core.on_completion(ev.time, &ev.kind);
                let latency_ms = core
                    .completed
                    .last()
                    .expect("completion just recorded")
                    .latency_ms;
                telemetry
                    .record(Sample {
                        function_id,
                        timestamp_ms: ev.time,
                        latency_ms,
                        backend,
                        cold_start: cold,
                    })
                    .expect("functions are registered");
            }
            EventKind::Tick => {
                let actions = controller::reevaluate_all(
                    &mut registry,
                    &mut telemetry,
                    &inputs.controller,
                    ev.time,
                    &mut core,
                );
                for (fid, action) in actions {
                    let verdict = if !action.applied && action.verdict != Verdict::KeepMode {
                        "failed_switch".to_string()
                    } else {
                        action.verdict.as_str().to_string()
                    };
                    decisions.push(DecisionRecord {
                        at_ms: ev.time,
                        function_id: fid,
                        verdict,
                        rationale: action.rationale,
                        request_rate: action.inputs.request_rate,
                        latency_ms: action.inputs.latency_ms,
                        saved_cpu_latency: action.inputs.saved_cpu_latency,
                        saved_gpu_latency: action.inputs.saved_gpu_latency,
                    });
                }
                if core.pending_arrivals > 0 || core.in_flight > 0 || core.queued > 0 {
                    core.push_event(ev.time + period, EventKind::Tick);
                }
            }
        }
        debug_assert_eq!(
            core.completed.len() + core.in_flight + core.queued + core.pending_arrivals,
            inputs.trace.len(),
            "request conservation at t={}",
            ev.time
        );
    }

    let mut requests = core.completed;
    requests.sort_by_key(|r| r.index);
    let end_ms = requests
        .iter()
        .map(|r| r.completion_ms)
        .fold(0.0f64, f64::max);

    let busy = merge_spans(&core.fns, core.raw_spans);
    let series = build_series(&busy, end_ms);

    let deployments = core
        .fns
        .into_iter()
        .map(|(fid, rt)| (fid, rt.deployment))
        .collect::<BTreeMap<_, _>>();

    Ok(ScenarioResult {
        requests,
        decisions,
        mode_events: core.mode_events,
        busy,
        series,
        arrivals: inputs.trace.len(),
        end_ms,
        deployments,
    })
}

/// Union per-instance raw spans into maximal busy intervals carrying the
/// workload's resource profile.
fn merge_spans(fns: &BTreeMap<String, FnRuntime>, raw: Vec<RawSpan>) -> Vec<BusySpan> {
    let mut grouped: BTreeMap<(String, u32), Vec<&RawSpan>> = BTreeMap::new();
    for span in &raw {
        grouped
            .entry((span.function_id.clone(), span.instance_id))
            .or_default()
            .push(span);
    }
    let mut out = Vec::new();
    for ((fid, _instance), mut spans) in grouped {
        let workload = &fns[&fid].workload;
        spans.sort_by(|a, b| a.start_ms.partial_cmp(&b.start_ms).expect("finite times"));
        let mut current: Option<BusySpan> = None;
        for s in spans {
            match current.as_mut() {
                Some(c) if s.start_ms <= c.end_ms => {
                    c.end_ms = c.end_ms.max(s.end_ms);
                }
                _ => {
                    if let Some(done) = current.take() {
                        out.push(done);
                    }
                    current = Some(BusySpan {
                        function_id: fid.clone(),
                        backend: s.backend,
                        node_id: s.node_id.clone(),
                        start_ms: s.start_ms,
                        end_ms: s.end_ms,
                        cpu_cores: workload.cpu_cores_used,
                        ram_gb: workload.ram_gb_used,
                        gpu_util_pct: if s.backend == Backend::Gpu {
                            workload.gpu_util_pct
                        } else {
                            0.0
                        },
                    });
                }
            }
        }
        if let Some(done) = current.take() {
            out.push(done);
        }
    }
    out.sort_by(|a, b| {
        a.start_ms
            .partial_cmp(&b.start_ms)
            .expect("finite times")
            .then_with(|| a.function_id.cmp(&b.function_id))
    });
    out
}

/// Per-second utilization from busy spans; second `s` covers `[s, s+1)`.
fn build_series(busy: &[BusySpan], end_ms: f64) -> UtilSeries {
    let seconds = (end_ms / 1000.0).ceil() as usize;
    let mut series = UtilSeries {
        cpu_cores: vec![0.0; seconds],
        ram_gb: vec![0.0; seconds],
        gpu_pct: vec![0.0; seconds],
    };
    for span in busy {
        let first = (span.start_ms / 1000.0).floor() as usize;
        let last = ((span.end_ms / 1000.0).ceil() as usize).min(seconds);
        for s in first..last {
            let lo = (s as f64) * 1000.0;
            let hi = lo + 1000.0;
            let overlap = (span.end_ms.min(hi) - span.start_ms.max(lo)).max(0.0) / 1000.0;
            if overlap <= 0.0 {
                continue;
            }
            series.cpu_cores[s] += overlap * span.cpu_cores;
            series.ram_gb[s] += overlap * span.ram_gb;
            series.gpu_pct[s] += overlap * span.gpu_util_pct;
        }
    }
    series
}
