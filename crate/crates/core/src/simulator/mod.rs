//! Discrete-event simulation of one zone's queueing network.
//!
//! Vehicles arrive as a Poisson stream of rate `λ_v` with SoC class drawn
//! from `p`. A class-`i` vehicle (`i >= 1`) serves as it is with probability
//! `q_i` and otherwise joins the partial-charging queue (`C` servers, each
//! exponential with rate `n μ_c`) to gain one class. A depleted vehicle goes
//! to the full-charging station (one server, rate `μ_c`) with probability
//! `q_0` and to the partial-charging queue otherwise. Once ready, a vehicle
//! of class `i` picks sub-class `j` from row `i` of `Π`. Each vehicle makes
//! at most one charging decision per visit.
//!
//! Customers arrive as one Poisson stream of rate `Σλ_c` with class drawn in
//! proportion to `λ_c`; response time runs from arrival until a vehicle is
//! committed.
//!
//! In [`SimMode::AnalyticalMM1`] a ready vehicle that finds its sub-class
//! queue empty is discarded, so every customer queue sees a Poisson stream of
//! service opportunities and behaves exactly as an M/M/1 queue. In
//! [`SimMode::VehicleFlow`] such vehicles wait in a per-sub-class pool.
//!
//! Replication `r` draws from `ChaCha8Rng::seed_from_u64(seed + r)`
//! (wrapping), so traces are reproducible across platforms. Replications run
//! in parallel and are aggregated in replication order.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};
use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zone::{
    argmax_first, check_stability, effective_service_rates, DecisionSet, ZoneConfig,
};

pub const MIN_HORIZON: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    #[serde(rename = "analytical_mm1")]
    AnalyticalMM1,
    VehicleFlow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Customer services completed (all classes together) before a run stops.
    pub horizon_customers: u64,
    /// Fraction of completions discarded before statistics start.
    pub warmup_fraction: f64,
    pub replications: usize,
    pub seed: u64,
    pub mode: SimMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon_customers: 1_000_000,
            warmup_fraction: 0.1,
            replications: 10,
            seed: 0,
            mode: SimMode::AnalyticalMM1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_customers < MIN_HORIZON {
            return Err(Error::invalid(
                "sim.horizon_customers",
                format!("must be at least {MIN_HORIZON}"),
            ));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::invalid("sim.warmup_fraction", "must lie in [0, 1)"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("sim.replications", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QueueStat {
    /// Time-average number in the system (waiting plus in service).
    pub mean_length: f64,
    /// Time-average fraction of busy servers.
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueStats {
    pub customer: Vec<QueueStat>,
    pub partial_charging: QueueStat,
    pub full_station: QueueStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub mode: SimMode,
    pub replications: usize,
    /// Mean response time per class (minutes), averaged over replications.
    pub mean_response: Vec<f64>,
    /// Normal-approximation 95% half-width across replications; infinite
    /// with a single replication.
    pub ci95_halfwidth: Vec<f64>,
    /// Class with the largest mean response (zero-based, lowest on ties).
    pub max_class: usize,
    pub queue_stats: QueueStats,
    /// Measured customer arrival rate per class.
    pub arrival_rate: Vec<f64>,
    /// Measured rate of vehicles becoming service-ready.
    pub ready_vehicle_rate: f64,
    /// Completions counted after warmup, per class, summed over replications.
    pub completions: Vec<u64>,
    pub events_processed: u64,
    /// The decisions fail the stability check.
    pub unstable: bool,
    /// Per class: the mean ignores customers still waiting at the end of a
    /// run of an unstable configuration.
    pub censored: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    VehicleArrival,
    CustomerArrival,
    PartialDone,
    FullDone,
}

impl Kind {
    fn label(self) -> &'static str {
        match self {
            Kind::VehicleArrival => "vehicle_arrival",
            Kind::CustomerArrival => "customer_arrival",
            Kind::PartialDone => "partial_done",
            Kind::FullDone => "full_done",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

/// Raw statistics of one replication.
#[derive(Debug, Clone)]
struct RunStats {
    response_sum: Vec<f64>,
    completions: Vec<u64>,
    arrivals: Vec<u64>,
    customer_area: Vec<f64>,
    customer_busy: Vec<f64>,
    partial_area: f64,
    partial_busy: f64,
    full_area: f64,
    full_busy: f64,
    ready: u64,
    measured_time: f64,
    events: u64,
}

struct Zone<'a> {
    cfg: &'a ZoneConfig,
    d: &'a DecisionSet,
    mode: SimMode,
    soc: WeightedIndex<f64>,
    class: WeightedIndex<f64>,
    rows: Vec<WeightedIndex<f64>>,
    total_demand: f64,
}

impl<'a> Zone<'a> {
    fn new(cfg: &'a ZoneConfig, d: &'a DecisionSet, mode: SimMode) -> Result<Self> {
        let weights = |what: &'static str, w: &[f64]| {
            WeightedIndex::new(w.iter().copied())
                .map_err(|e| Error::invalid(what, format!("cannot sample from {w:?}: {e}")))
        };
        Ok(Self {
            cfg,
            d,
            mode,
            soc: weights("p", cfg.p())?,
            class: weights("lambda_c", cfg.lambda_c())?,
            rows: d
                .pi()
                .iter()
                .map(|row| weights("pi", row))
                .collect::<Result<_>>()?,
            total_demand: cfg.total_demand(),
        })
    }

    fn run(
        &self,
        sim: &SimConfig,
        seed: u64,
        mut trace: Option<&mut dyn Write>,
    ) -> Result<RunStats> {
        let cfg = self.cfg;
        let n = cfg.n();
        let q = self.d.q();
        let c = cfg.c_points() as usize;
        let partial_rate = n as f64 * cfg.mu_c();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let exp = |rng: &mut ChaCha8Rng, rate: f64| -> f64 {
            let e: f64 = Exp1.sample(rng);
            e / rate
        };

        let warmup = (sim.warmup_fraction * sim.horizon_customers as f64).floor() as u64;
        let max_events = sim.horizon_customers.saturating_mul(1000);

        let mut heap: BinaryHeap<Reverse<Event>> = BinaryHeap::new();
        let mut seq = 0u64;
        let mut push = |heap: &mut BinaryHeap<Reverse<Event>>, time: f64, kind: Kind| {
            heap.push(Reverse(Event { time, seq, kind }));
            seq += 1;
        };

        // Arrival times of waiting customers per class.
        let mut waiting: Vec<VecDeque<f64>> = vec![VecDeque::new(); n];
        // Idle ready vehicles per sub-class (vehicle-flow mode only).
        let mut pool = vec![0u64; n];
        // Target rows of vehicles in the partial-charging system, FIFO.
        let mut partial_queue: VecDeque<usize> = VecDeque::new();
        let mut partial_in_service: Vec<usize> = Vec::with_capacity(c);
        let mut full_count = 0usize;

        let mut stats = RunStats {
            response_sum: vec![0.0; n],
            completions: vec![0; n],
            arrivals: vec![0; n],
            customer_area: vec![0.0; n],
            customer_busy: vec![0.0; n],
            partial_area: 0.0,
            partial_busy: 0.0,
            full_area: 0.0,
            full_busy: 0.0,
            ready: 0,
            measured_time: 0.0,
            events: 0,
        };

        let mut done = 0u64;
        let mut measuring = warmup == 0;
        let mut last = 0.0_f64;

        let t0 = exp(&mut rng, cfg.lambda_v());
        push(&mut heap, t0, Kind::VehicleArrival);
        let t0 = exp(&mut rng, self.total_demand);
        push(&mut heap, t0, Kind::CustomerArrival);

        while done < sim.horizon_customers {
            let Some(Reverse(ev)) = heap.pop() else {
                return Err(Error::Internal("event list ran dry".into()));
            };
            debug_assert!(
                ev.time >= last,
                "event at {} precedes clock {}",
                ev.time,
                last
            );
            stats.events += 1;
            if stats.events > max_events {
                return Err(Error::Internal(format!(
                    "no progress after {max_events} events; the decisions starve every class"
                )));
            }
            let now = ev.time;
            if measuring {
                let dt = now - last;
                stats.measured_time += dt;
                for i in 0..n {
                    let len = waiting[i].len() as f64;
                    stats.customer_area[i] += dt * len;
                    if len > 0.0 {
                        stats.customer_busy[i] += dt;
                    }
                }
                let in_partial = (partial_queue.len() + partial_in_service.len()) as f64;
                stats.partial_area += dt * in_partial;
                stats.partial_busy += dt * partial_in_service.len() as f64 / c as f64;
                stats.full_area += dt * full_count as f64;
                if full_count > 0 {
                    stats.full_busy += dt;
                }
            }
            last = now;

            // Sub-class whose queue gains a service opportunity, if any.
            let mut ready_row: Option<usize> = None;
            let trace_class: usize;
            let trace_queue: &str;
            match ev.kind {
                Kind::VehicleArrival => {
                    let t = now + exp(&mut rng, cfg.lambda_v());
                    push(&mut heap, t, Kind::VehicleArrival);
                    let s = self.soc.sample(&mut rng);
                    trace_class = s;
                    let keep = rng.random::<f64>() < q[s];
                    if s == 0 && keep {
                        full_count += 1;
                        trace_queue = "full";
                        if full_count == 1 {
                            let t = now + exp(&mut rng, cfg.mu_c());
                            push(&mut heap, t, Kind::FullDone);
                        }
                    } else if keep {
                        trace_queue = "ready";
                        ready_row = Some(s - 1);
                    } else {
                        trace_queue = "partial";
                        if partial_in_service.len() < c {
                            partial_in_service.push(s);
                            let t = now + exp(&mut rng, partial_rate);
                            push(&mut heap, t, Kind::PartialDone);
                        } else {
                            partial_queue.push_back(s);
                        }
                    }
                }
                Kind::CustomerArrival => {
                    let t = now + exp(&mut rng, self.total_demand);
                    push(&mut heap, t, Kind::CustomerArrival);
                    let j = self.class.sample(&mut rng);
                    trace_class = j + 1;
                    trace_queue = "customer";
                    if measuring {
                        stats.arrivals[j] += 1;
                    }
                    if self.mode == SimMode::VehicleFlow && pool[j] > 0 {
                        pool[j] -= 1;
                        done += 1;
                        if measuring {
                            stats.completions[j] += 1;
                        }
                    } else {
                        waiting[j].push_back(now);
                    }
                }
                Kind::PartialDone => {
                    // Servers are exchangeable, so the finishing vehicle is
                    // picked uniformly among those in service.
                    let k = rng.random_range(0..partial_in_service.len());
                    let row = partial_in_service.swap_remove(k);
                    trace_class = row + 1;
                    trace_queue = "partial";
                    if let Some(next) = partial_queue.pop_front() {
                        partial_in_service.push(next);
                        let t = now + exp(&mut rng, partial_rate);
                        push(&mut heap, t, Kind::PartialDone);
                    }
                    ready_row = Some(row);
                }
                Kind::FullDone => {
                    full_count -= 1;
                    trace_class = n;
                    trace_queue = "full";
                    if full_count > 0 {
                        let t = now + exp(&mut rng, cfg.mu_c());
                        push(&mut heap, t, Kind::FullDone);
                    }
                    ready_row = Some(n - 1);
                }
            }

            if let Some(row) = ready_row {
                if measuring {
                    stats.ready += 1;
                }
                let j = self.rows[row].sample(&mut rng);
                if let Some(arrived) = waiting[j].pop_front() {
                    done += 1;
                    if measuring {
                        stats.response_sum[j] += now - arrived;
                        stats.completions[j] += 1;
                    }
                } else if self.mode == SimMode::VehicleFlow {
                    pool[j] += 1;
                }
            }

            if let Some(w) = trace.as_deref_mut() {
                writeln!(
                    w,
                    "{now:.9}\t{}\t{trace_class}\t{trace_queue}",
                    ev.kind.label()
                )?;
            }
            if !measuring && done >= warmup {
                measuring = true;
            }
        }
        Ok(stats)
    }
}

fn check_inputs(cfg: &ZoneConfig, d: &DecisionSet, sim: &SimConfig) -> Result<()> {
    sim.validate()?;
    d.check_dims(cfg)?;
    if sim.mode == SimMode::AnalyticalMM1 {
        let rates = effective_service_rates(cfg, d)?;
        if let Some(i) = rates.lambda_vs.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::invalid(
                "decisions",
                format!("class {} receives no vehicles", i + 1),
            ));
        }
    }
    Ok(())
}

/// Runs `sim.replications` independent replications and aggregates them.
pub fn simulate(cfg: &ZoneConfig, d: &DecisionSet, sim: &SimConfig) -> Result<SimReport> {
    check_inputs(cfg, d, sim)?;
    let zone = Zone::new(cfg, d, sim.mode)?;
    let runs: Vec<RunStats> = (0..sim.replications)
        .into_par_iter()
        .map(|r| zone.run(sim, sim.seed.wrapping_add(r as u64), None))
        .collect::<Result<_>>()?;
    let unstable = !check_stability(cfg, d, 0.0)?.is_stable();
    Ok(aggregate(cfg, d, sim, &runs, unstable))
}

/// Runs replication 0 only and writes one tab-separated line per event:
/// `time, event kind, class, queue`.
pub fn simulate_traced(
    cfg: &ZoneConfig,
    d: &DecisionSet,
    sim: &SimConfig,
    out: &mut dyn Write,
) -> Result<SimReport> {
    check_inputs(cfg, d, sim)?;
    let zone = Zone::new(cfg, d, sim.mode)?;
    let run = zone.run(sim, sim.seed, Some(out))?;
    let unstable = !check_stability(cfg, d, 0.0)?.is_stable();
    let single = SimConfig {
        replications: 1,
        ..sim.clone()
    };
    Ok(aggregate(cfg, d, &single, &[run], unstable))
}

fn aggregate(
    cfg: &ZoneConfig,
    d: &DecisionSet,
    sim: &SimConfig,
    runs: &[RunStats],
    unstable: bool,
) -> SimReport {
    let n = cfg.n();
    let reps = runs.len() as f64;
    let per_rep_mean = |i: usize, r: &RunStats| {
        if r.completions[i] > 0 {
            r.response_sum[i] / r.completions[i] as f64
        } else {
            f64::NAN
        }
    };
    let mut mean_response = vec![0.0; n];
    let mut ci = vec![0.0; n];
    for i in 0..n {
        let xs: Vec<f64> = runs.iter().map(|r| per_rep_mean(i, r)).collect();
        let m = xs.iter().sum::<f64>() / reps;
        mean_response[i] = m;
        ci[i] = if runs.len() > 1 {
            let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1.0);
            1.96 * (var / reps).sqrt()
        } else {
            f64::INFINITY
        };
    }
    let avg = |f: &dyn Fn(&RunStats) -> f64| runs.iter().map(f).sum::<f64>() / reps;
    let time_avg = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let customer = (0..n)
        .map(|i| QueueStat {
            mean_length: avg(&|r| time_avg(r.customer_area[i], r.measured_time)),
            utilization: avg(&|r| time_avg(r.customer_busy[i], r.measured_time)),
        })
        .collect();
    let queue_stats = QueueStats {
        customer,
        partial_charging: QueueStat {
            mean_length: avg(&|r| time_avg(r.partial_area, r.measured_time)),
            utilization: avg(&|r| time_avg(r.partial_busy, r.measured_time)),
        },
        full_station: QueueStat {
            mean_length: avg(&|r| time_avg(r.full_area, r.measured_time)),
            utilization: avg(&|r| time_avg(r.full_busy, r.measured_time)),
        },
    };
    let margins = effective_service_rates(cfg, d)
        .map(|r| r.margins)
        .unwrap_or_else(|_| vec![0.0; n]);
    let comparable: Vec<f64> = mean_response
        .iter()
        .map(|m| if m.is_nan() { f64::INFINITY } else { *m })
        .collect();
    SimReport {
        mode: sim.mode,
        replications: runs.len(),
        max_class: argmax_first(&comparable).0,
        mean_response,
        ci95_halfwidth: ci,
        queue_stats,
        arrival_rate: (0..n)
            .map(|i| avg(&|r| time_avg(r.arrivals[i] as f64, r.measured_time)))
            .collect(),
        ready_vehicle_rate: avg(&|r| time_avg(r.ready as f64, r.measured_time)),
        completions: (0..n)
            .map(|i| runs.iter().map(|r| r.completions[i]).sum())
            .collect(),
        events_processed: runs.iter().map(|r| r.events).sum(),
        unstable,
        censored: margins.iter().map(|m| !(*m > 0.0)).collect(),
    }
}

/// Simulated against analytic response times for both modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    /// `1 / (λ_vs - λ_c)` per class.
    pub analytic: Vec<f64>,
    pub analytical_mm1: SimReport,
    pub vehicle_flow: SimReport,
    /// `|simulated - analytic| / analytic` per class.
    pub analytical_mm1_error: Vec<f64>,
    pub vehicle_flow_error: Vec<f64>,
}

pub fn compare_sim_vs_analytic(
    cfg: &ZoneConfig,
    d: &DecisionSet,
    sim: &SimConfig,
) -> Result<Divergence> {
    let analytic = crate::zone::analytic_response_times(cfg, d)?.per_class;
    let run = |mode| {
        simulate(
            cfg,
            d,
            &SimConfig {
                mode,
                ..sim.clone()
            },
        )
    };
    let analytical_mm1 = run(SimMode::AnalyticalMM1)?;
    let vehicle_flow = run(SimMode::VehicleFlow)?;
    let err = |rep: &SimReport| -> Vec<f64> {
        rep.mean_response
            .iter()
            .zip(&analytic)
            .map(|(s, a)| (s - a).abs() / a)
            .collect()
    };
    Ok(Divergence {
        analytical_mm1_error: err(&analytical_mm1),
        vehicle_flow_error: err(&vehicle_flow),
        analytic,
        analytical_mm1,
        vehicle_flow,
    })
}
