#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{aggregate, broadcast, local_loss_modifier, sample_clients, scaffold_control_update};
use super::{ClientUpdate, ServerHyper, ServerState, ServerStrategy};
use crate::data::TaskData;
use crate::meta::{local_update, tto_curve, ClientState, FederationContext, LocalUpdateResult, MetaHyperparams, TtoSettings};
use crate::metrics::privacy_metrics;
use crate::nn::{Architecture, ParamVector};
use crate::rng::{self, SimRng};
use crate::{Error, Result};

const STREAM_SAMPLE: u64 = 1;
const STREAM_LOCAL: u64 = 2;

/// Held-out evaluation during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    /// Evaluate every `cadence` rounds (and after the last); 0 disables.
    pub cadence: usize,
    /// TTO steps applied to each held-out task before measuring.
    pub tto_steps: usize,
    pub tto: TtoSettings,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { cadence: 10, tto_steps: 64, tto: TtoSettings::default() }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingSetup {
    pub arch: Architecture,
    pub theta0: ParamVector,
    pub clients: Vec<ClientState>,
    pub test_tasks: Vec<TaskData>,
    pub meta: MetaHyperparams,
    pub strategy: ServerStrategy,
    pub hyper: ServerHyper,
    pub rounds: usize,
    pub participants: usize,
    pub seed: u64,
    pub eval: EvalSettings,
}

/// Per-round summary; privacy metrics are means over the round's participants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub psnr_p: f64,
    pub ssim_p: f64,
    pub gamma: f64,
    pub mean_abs_delta_l: f64,
    /// Privacy budget spent so far: `sum |dL| / N`.
    pub consumed_budget: f64,
}

impl RoundLog {
    /// `PSNR - PSNR_p` on evaluation rounds.
    pub fn delta(&self) -> Option<f64> {
        self.psnr.map(|p| p - self.psnr_p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClientRoundLog {
    pub round: usize,
    pub client_id: usize,
    pub psnr_p: f64,
    pub ssim_p: f64,
    pub gamma: f64,
    pub mean_delta_l: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub server: ServerState,
    pub rounds: Vec<RoundLog>,
    pub clients: Vec<ClientRoundLog>,
}

impl TrainingOutcome {
    pub fn theta(&self) -> &ParamVector {
        &self.server.theta
    }
}

/// Random stream a client uses for its local update in `round`.
pub fn client_rng(seed: u64, round: usize, client_id: usize) -> SimRng {
    rng::derive(seed, &[STREAM_LOCAL, round as u64, client_id as u64])
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Mean reconstruction quality of `w` on the client's own query sets.
fn client_privacy(w: &ParamVector, arch: &Architecture, client: &ClientState) -> Result<(f64, f64)> {
    let mut ps = Vec::with_capacity(client.tasks.len());
    let mut ss = Vec::with_capacity(client.tasks.len());
    for t in &client.tasks {
        let (p, s) = privacy_metrics(w, arch, &t.query, &t.dims)?;
        ps.push(p);
        ss.push(s);
    }
    Ok((mean(ps), mean(ss)))
}

fn evaluate(theta: &ParamVector, arch: &Architecture, tasks: &[TaskData], eval: &EvalSettings) -> Result<(f64, f64)> {
    let run = |t: &TaskData| tto_curve(theta, arch, t, &[eval.tto_steps], &eval.tto).map(|c| c[0]);
    #[cfg(feature = "parallel")]
    let points: Vec<_> = tasks.par_iter().map(run).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let points: Vec<_> = tasks.iter().map(run).collect::<Result<_>>()?;
    Ok((mean(points.iter().map(|p| p.psnr)), mean(points.iter().map(|p| p.ssim))))
}

fn validate(setup: &TrainingSetup) -> Result<()> {
    let n = setup.clients.len();
    if n == 0 {
        return Err(Error::Empty("no clients".into()));
    }
    if setup.participants == 0 || setup.participants > n {
        return Err(Error::arg(
            "participants",
            format!("need 1 <= M <= N, got M={}, N={n}", setup.participants),
        ));
    }
    if let Some((i, c)) = setup.clients.iter().enumerate().find(|(i, c)| c.id != *i) {
        return Err(Error::arg("clients", format!("client at position {i} has id {}", c.id)));
    }
    if setup.eval.cadence > 0 && setup.test_tasks.is_empty() {
        return Err(Error::Empty("evaluation enabled but there are no test tasks".into()));
    }
    setup.theta0.check_len("theta0", setup.arch.param_count())?;
    setup.meta.validate()
}

/// Run `R` rounds: broadcast, local updates of the sampled clients (in
/// parallel when enabled), aggregation, then logging.
///
/// Every random draw comes from a stream derived from `(seed, round,
/// client_id)`, and aggregation sums in client-id order, so the outcome is
/// independent of the number of worker threads.
pub fn run_training(setup: &TrainingSetup) -> Result<TrainingOutcome> {
    validate(setup)?;
    let n = setup.clients.len();
    let arch = &setup.arch;
    let mut server = ServerState::new(setup.theta0.clone(), setup.strategy, setup.hyper, n);
    let mut c_local: Vec<Option<ParamVector>> = vec![None; n];
    let mut sample_rng = rng::derive(setup.seed, &[STREAM_SAMPLE]);
    let mut rounds = Vec::with_capacity(setup.rounds);
    let mut client_logs = Vec::with_capacity(setup.rounds * setup.participants);
    let mut spent = 0.0;

    for r in 0..setup.rounds {
        let ids = sample_clients(n, setup.participants, &mut sample_rng)?;
        let start = broadcast(&server);
        let ctx = FederationContext {
            n_clients: n,
            rounds: setup.rounds,
            participants: setup.participants,
            round: r,
        };
        let work = |&id: &usize| -> Result<(LocalUpdateResult, (f64, f64))> {
            let client = &setup.clients[id];
            let modifier = local_loss_modifier(&server, c_local[id].as_ref());
            let mut local_rng = client_rng(setup.seed, r, id);
            let res = local_update(&start, arch, client, &setup.meta, &ctx, &modifier, &mut local_rng)?;
            let privacy = client_privacy(&res.w_e, arch, client)?;
            Ok((res, privacy))
        };
        #[cfg(feature = "parallel")]
        let results: Vec<_> = ids.par_iter().map(work).collect::<Result<_>>()?;
        #[cfg(not(feature = "parallel"))]
        let results: Vec<_> = ids.iter().map(work).collect::<Result<_>>()?;

        let mut updates = Vec::with_capacity(ids.len());
        for (&id, (res, (psnr_p, ssim_p))) in ids.iter().zip(&results) {
            let c_delta = (server.strategy == ServerStrategy::Scaffold).then(|| {
                let zeros = ParamVector::zeros(start.len());
                let old = c_local[id].as_ref().unwrap_or(&zeros);
                let (next, delta) = scaffold_control_update(
                    old,
                    &server.c_global,
                    &start,
                    &res.w_e,
                    setup.meta.outer_steps,
                    setup.meta.lambda_o,
                );
                c_local[id] = Some(next);
                delta
            });
            updates.push(ClientUpdate {
                client_id: id,
                w_e: res.w_e.clone(),
                alpha: setup.clients[id].weight,
                local_steps: res.local_steps,
                c_delta,
            });
            spent += res.delta_l_trace.iter().map(|d| d.abs()).sum::<f64>() / n as f64;
            client_logs.push(ClientRoundLog {
                round: r,
                client_id: id,
                psnr_p: *psnr_p,
                ssim_p: *ssim_p,
                gamma: mean(res.gamma_trace.iter().copied()),
                mean_delta_l: mean(res.delta_l_trace.iter().copied()),
            });
        }
        server = aggregate(&server, &updates)?;

        let eval_now = setup.eval.cadence > 0 && ((r + 1) % setup.eval.cadence == 0 || r + 1 == setup.rounds);
        let (psnr, ssim) = if eval_now {
            let (p, s) = evaluate(&server.theta, arch, &setup.test_tasks, &setup.eval)?;
            (Some(p), Some(s))
        } else {
            (None, None)
        };
        rounds.push(RoundLog {
            round: r,
            psnr,
            ssim,
            psnr_p: mean(results.iter().map(|(_, p)| p.0)),
            ssim_p: mean(results.iter().map(|(_, p)| p.1)),
            gamma: mean(results.iter().flat_map(|(u, _)| u.gamma_trace.iter().copied())),
            mean_abs_delta_l: mean(results.iter().flat_map(|(u, _)| u.delta_l_trace.iter().map(|d| d.abs()))),
            consumed_budget: spent,
        });
    }
    Ok(TrainingOutcome { server, rounds, clients: client_logs })
}
