//! Monte Carlo velocity-jump process whose law is the kinetic equation.
//!
//! A particle flies with velocity `ε^{1-α} v` for an exponential time of
//! rate `λ_ε(v)/ε^α`, `λ_ε(v) = 1 + ε^{α-1} ∫Φ(v', v, c) M(v') dv'`, then
//! draws a new velocity from `(1 + ε^{α-1} Φ(·, v, c)) M`.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::equilibrium::{EquilibriumSpec, TurningKernel, VelocityQuadrature};
use crate::error::{Error, Result};
use crate::grid::{MacroField, TorusGrid};
use crate::vector::Vec2;

/// Draws a velocity from M by inverse-CDF sampling of |v| and a uniform
/// direction.
pub fn sample_from_m<R: Rng + ?Sized>(spec: &EquilibriumSpec, rng: &mut R) -> Vec2 {
    let r = spec.radial_quantile(rng.gen::<f64>());
    if spec.dim() == 1 {
        if rng.gen::<bool>() {
            [r, 0.0]
        } else {
            [-r, 0.0]
        }
    } else {
        let theta = 2.0 * PI * rng.gen::<f64>();
        [r * theta.cos(), r * theta.sin()]
    }
}

/// A post-jump velocity together with the number of proposals it took.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostJump {
    pub v: Vec2,
    pub proposals: u32,
}

/// The turning process for a fixed kernel, field value and ε.
pub struct ParticleModel<'a> {
    spec: EquilibriumSpec,
    kernel: &'a dyn TurningKernel,
    quad: &'a VelocityQuadrature,
    c: Vec2,
    eps: f64,
    eps_factor: f64,
    accept_scale: f64,
}

impl std::fmt::Debug for ParticleModel<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParticleModel")
            .field("kernel", &self.kernel.name())
            .field("c", &self.c)
            .field("eps", &self.eps)
            .finish_non_exhaustive()
    }
}

impl<'a> ParticleModel<'a> {
    /// `quad` is used for the loss moment in λ_ε when the kernel does not
    /// make it vanish.
    pub fn new(
        quad: &'a VelocityQuadrature,
        kernel: &'a dyn TurningKernel,
        c: Vec2,
        eps: f64,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::param("epsilon", format!("must be positive, got {eps}")));
        }
        let spec = *quad.spec();
        let eps_factor = eps.powf(spec.alpha() - 1.0);
        let bound = eps_factor * kernel.phi_bound(c);
        if bound >= 1.0 {
            return Err(Error::NonContraction(bound));
        }
        Ok(ParticleModel {
            spec,
            kernel,
            quad,
            c,
            eps,
            eps_factor,
            accept_scale: 1.0 + bound,
        })
    }

    pub fn spec(&self) -> &EquilibriumSpec {
        &self.spec
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Guaranteed acceptance probability of the rejection sampler.
    pub fn acceptance_bound(&self) -> f64 {
        (2.0 - self.accept_scale) / self.accept_scale
    }

    /// λ_ε(v) = 1 + ε^{α-1} ∫ Φ(v', v, c) M(v') dv'.
    pub fn turning_rate(&self, v: Vec2) -> f64 {
        if self.kernel.loss_moment_vanishes() {
            return 1.0;
        }
        let moment: f64 = self
            .quad
            .nodes()
            .iter()
            .zip(self.quad.weights_m())
            .map(|(&vp, &w)| w * self.kernel.phi(vp, v, self.c))
            .sum();
        1.0 + self.eps_factor * moment
    }

    /// Rejection sampling from M with acceptance
    /// `(1 + ε^{α-1} Φ(v, v_prev, c)) / (1 + ε^{α-1} Φ̄)`.
    pub fn post_jump<R: Rng + ?Sized>(&self, v_prev: Vec2, rng: &mut R) -> PostJump {
        let mut proposals = 0;
        loop {
            proposals += 1;
            let v = sample_from_m(&self.spec, rng);
            let weight = 1.0 + self.eps_factor * self.kernel.phi(v, v_prev, self.c);
            if rng.gen::<f64>() * self.accept_scale < weight {
                return PostJump { v, proposals };
            }
        }
    }
}

/// One post-jump draw; see [`ParticleModel::post_jump`].
pub fn sample_post_jump<R: Rng + ?Sized>(
    quad: &VelocityQuadrature,
    kernel: &dyn TurningKernel,
    c: Vec2,
    eps: f64,
    v_prev: Vec2,
    rng: &mut R,
) -> Result<PostJump> {
    Ok(ParticleModel::new(quad, kernel, c, eps)?.post_jump(v_prev, rng))
}

/// Where particles start.
#[derive(Debug, Clone)]
pub enum InitialPositions {
    Origin,
    /// Sampled from a nonnegative density on the torus.
    Density(MacroField),
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub n_particles: usize,
    pub t_final: f64,
    /// Extra output times in (0, T); 0 and T are always recorded.
    pub snapshot_times: Vec<f64>,
    pub initial: InitialPositions,
    pub seed: u64,
}

/// Positions (unwrapped) and velocities at time t.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub t: f64,
    pub positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ParticleRun {
    pub snapshots: Vec<ParticleEnsemble>,
    pub jumps: u64,
    pub proposals: u64,
    pub wall_time_s: f64,
}

impl ParticleRun {
    pub fn initial(&self) -> &ParticleEnsemble {
        &self.snapshots[0]
    }

    pub fn final_ensemble(&self) -> &ParticleEnsemble {
        self.snapshots.last().expect("the final time is always recorded")
    }

    /// Per-particle displacement between t = 0 and snapshot `idx`.
    pub fn displacements(&self, idx: usize) -> Vec<Vec2> {
        self.snapshots[idx]
            .positions
            .iter()
            .zip(&self.initial().positions)
            .map(|(a, b)| [a[0] - b[0], a[1] - b[1]])
            .collect()
    }

    /// Accepted over proposed post-jump velocities.
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.jumps as f64 / self.proposals as f64
        }
    }
}

struct Trace {
    states: Vec<(Vec2, Vec2)>,
    jumps: u64,
    proposals: u64,
}

fn position_sampler(initial: &InitialPositions) -> Result<Option<(TorusGrid, Vec<f64>)>> {
    match initial {
        InitialPositions::Origin => Ok(None),
        InitialPositions::Density(rho) => {
            if rho.values().iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::param("init", "initial density must be nonnegative"));
            }
            let mut cdf = Vec::with_capacity(rho.values().len());
            let mut acc = 0.0;
            for v in rho.values() {
                acc += v;
                cdf.push(acc);
            }
            if !(acc > 0.0) {
                return Err(Error::param("init", "initial density has no mass"));
            }
            for x in cdf.iter_mut() {
                *x /= acc;
            }
            Ok(Some((*rho.grid(), cdf)))
        }
    }
}

/// Event-driven simulation, parallel over particles. Particle `i` uses the
/// ChaCha8 stream `i` of `seed`, so results do not depend on scheduling.
pub fn simulate(model: &ParticleModel<'_>, config: &SimulationConfig) -> Result<ParticleRun> {
    if config.n_particles == 0 {
        return Err(Error::param("n_p", "need at least one particle"));
    }
    if !(config.t_final > 0.0 && config.t_final.is_finite()) {
        return Err(Error::param("time.T", format!("must be positive, got {}", config.t_final)));
    }
    let start = Instant::now();
    let mut times: Vec<f64> = config
        .snapshot_times
        .iter()
        .copied()
        .filter(|t| *t > 0.0 && *t < config.t_final)
        .collect();
    times.push(0.0);
    times.push(config.t_final);
    times.sort_by(f64::total_cmp);
    times.dedup();

    let sampler = position_sampler(&config.initial)?;
    let speed = model.eps.powf(1.0 - model.spec.alpha());
    let time_scale = model.eps.powf(model.spec.alpha());
    let dim = model.spec.dim();

    let traces: Vec<Trace> = (0..config.n_particles)
        .into_par_iter()
        .map(|id| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(id as u64);
            let mut x = match &sampler {
                None => [0.0, 0.0],
                Some((grid, cdf)) => {
                    let u: f64 = rng.gen();
                    let cell = cdf.partition_point(|&p| p <= u).min(cdf.len() - 1);
                    let h = grid.spacing();
                    let corner = grid.point(cell);
                    let jitter = [rng.gen::<f64>() * h, if dim == 2 { rng.gen::<f64>() * h } else { 0.0 }];
                    [corner[0] + jitter[0], corner[1] + jitter[1]]
                }
            };
            let mut v = sample_from_m(&model.spec, &mut rng);
            let mut t = 0.0;
            let mut trace = Trace { states: Vec::with_capacity(times.len()), jumps: 0, proposals: 0 };
            for &target in &times {
                loop {
                    let rate = model.turning_rate(v) / time_scale;
                    let tau = -(1.0 - rng.gen::<f64>()).ln() / rate;
                    if t + tau >= target {
                        // the remaining run time is memoryless and redrawn after the snapshot
                        let dt = target - t;
                        x = [x[0] + speed * v[0] * dt, x[1] + speed * v[1] * dt];
                        t = target;
                        trace.states.push((x, v));
                        break;
                    }
                    x = [x[0] + speed * v[0] * tau, x[1] + speed * v[1] * tau];
                    t += tau;
                    let jump = model.post_jump(v, &mut rng);
                    v = jump.v;
                    trace.jumps += 1;
                    trace.proposals += u64::from(jump.proposals);
                }
            }
            trace
        })
        .collect();

    let snapshots = times
        .iter()
        .enumerate()
        .map(|(k, &t)| ParticleEnsemble {
            t,
            positions: traces.iter().map(|tr| tr.states[k].0).collect(),
            velocities: traces.iter().map(|tr| tr.states[k].1).collect(),
        })
        .collect();
    Ok(ParticleRun {
        snapshots,
        jumps: traces.iter().map(|t| t.jumps).sum(),
        proposals: traces.iter().map(|t| t.proposals).sum(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Histogram of the wrapped positions, normalized to unit mass.
pub fn empirical_density(ensemble: &ParticleEnsemble, grid: &TorusGrid) -> Result<MacroField> {
    if ensemble.is_empty() {
        return Err(Error::Insufficient("empty ensemble".into()));
    }
    let mut counts = vec![0.0; grid.len()];
    for x in &ensemble.positions {
        if !(x[0].is_finite() && x[1].is_finite()) {
            return Err(Error::NonFinite { t: ensemble.t, state: Box::new(vec![x[0], x[1]]) });
        }
        counts[grid.cell_of(*x)] += 1.0;
    }
    let scale = 1.0 / (ensemble.len() as f64 * grid.cell_volume());
    MacroField::new(*grid, counts.into_iter().map(|c| c * scale).collect(), ensemble.t)
}

/// Least-squares slope of log P(|X| > R) against log R, for R between the
/// empirical quantiles at exceedance probabilities `p_high` and `p_low`.
pub fn tail_exponent(samples: &[f64], p_high: f64, p_low: f64) -> Result<f64> {
    if !(0.0 < p_low && p_low < p_high && p_high < 1.0) {
        return Err(Error::param("tail range", format!("need 0 < {p_low} < {p_high} < 1")));
    }
    let n = samples.len();
    let mut mags: Vec<f64> = samples.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let (hi, lo) = ((p_high * n as f64) as usize, (p_low * n as f64).ceil() as usize);
    if lo < 10 || hi <= lo {
        return Err(Error::Insufficient(format!("{n} samples are too few for the tail range")));
    }
    let levels = 24;
    let ratio = (hi as f64 / lo as f64).powf(1.0 / (levels - 1) as f64);
    let points: Vec<(f64, f64)> = (0..levels)
        .map(|j| {
            let rank = (lo as f64 * ratio.powi(j)).round() as usize;
            let r = mags[rank - 1];
            (r.ln(), (rank as f64 / n as f64).ln())
        })
        .collect();
    let mx = points.iter().map(|p| p.0).sum::<f64>() / levels as f64;
    let my = points.iter().map(|p| p.1).sum::<f64>() / levels as f64;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Insufficient("degenerate tail sample".into()));
    }
    Ok(sxy / sxx)
}

/// Sample mean and its standard error.
pub fn mean_with_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}
