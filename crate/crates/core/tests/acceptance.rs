//! Acceptance criteria 1-8. Every reference value is computed here from
//! closed forms or independent quadrature; the library is only the system
//! under test. Prints one PASS/FAIL line per criterion and exits nonzero if
//! any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use levykin::collision::drift_u;
use levykin::equilibrium::{
    solve_feps, DecayKernel, EquilibriumSpec, SimpleKernel, TurningKernel, VelocityQuadrature,
};
use levykin::fractional::{
    constant_a, constant_c_norm, frac_laplacian_integral, frac_laplacian_spectral, LimitConstants,
};
use levykin::grid::{MacroField, SpectralTransform, TorusGrid};
use levykin::harness::{run_sweep, RunConfig, SweepConfig};
use levykin::particles::{empirical_density, simulate, InitialPositions, ParticleModel, SimulationConfig};
use levykin::solvers::{kinetic_solve, KineticProblem, TurningField};
use levykin::symbols::{chi_diagnostics, symbol_eps_with, weak_form_residual, PlaneWave};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

const ALPHA: f64 = 1.5;
const SEED: u64 = 20261018;

// tolerances
const CONST_TOL: f64 = 1e-8;
const C_NORM_TOL: f64 = 1e-6;
const DUALITY_TOL: f64 = 1e-4;
const SYMBOL_ORDER_MIN: f64 = 0.35;
const FEPS_TOL: f64 = 1e-10;
const MASS_DRIFT_TOL: f64 = 1e-10;
const SWEEP_BUDGET_S: f64 = 600.0;
const HIST_L1_TOL: f64 = 0.05;
const TAIL_TOL: f64 = 0.1;
const DRIFT_SIGMAS: f64 = 3.0;
const PARTICLE_BUDGET_S: f64 = 300.0;
const CHI_ORDER: (f64, f64) = (0.85, 1.15);
const FRAC_ORDER_TOL: f64 = 0.15;

// ---------------------------------------------------------------- oracles

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            loop {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    let (mut q0, mut q1) = (1.0, x);
                    for k in 2..=n {
                        let q2 = ((2 * k - 1) as f64 * x * q1 - (k - 1) as f64 * q0) / k as f64;
                        q0 = q1;
                        q1 = q2;
                    }
                    let d = n as f64 * (x * q1 - q0) / (x * x - 1.0);
                    return (x, 2.0 / ((1.0 - x * x) * d * d));
                }
            }
        })
        .collect()
}

struct Panels {
    rule: Vec<(f64, f64)>,
}

impl Panels {
    fn new() -> Self {
        Panels { rule: gauss_legendre(20) }
    }

    /// ∫ f over [a, b] split at `cuts`.
    fn integrate<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64, cuts: &[f64]) -> f64 {
        let mut points: Vec<f64> = cuts.iter().copied().filter(|c| *c > a && *c < b).collect();
        points.push(a);
        points.push(b);
        points.sort_by(f64::total_cmp);
        points
            .windows(2)
            .map(|w| {
                let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
                half * self.rule.iter().map(|(x, wt)| wt * f(mid + half * x)).sum::<f64>()
            })
            .sum()
    }

    /// ∫_R g(v) M(v) dv for the flat-core equilibrium in one dimension,
    /// with `breaks` where g is not smooth.
    fn against_m<G: Fn(f64) -> f64>(&self, g: G, breaks: &[f64]) -> f64 {
        let gam = ALPHA / (2.0 * (ALPHA + 1.0));
        let core = self.integrate(&|v| g(v), -1.0, 1.0, breaks);
        // |v| = t^{-1/α}: |v|^{-1-α} d|v| = dt / α
        let mut cuts: Vec<f64> = (0..=64).map(|j| 10f64.powf(-16.0 + 16.0 * j as f64 / 64.0)).collect();
        cuts.extend(breaks.iter().filter(|b| b.abs() > 1.0).map(|b| b.abs().powf(-ALPHA)));
        let tail = |sign: f64| {
            self.integrate(&|t: f64| if t > 0.0 { g(sign * t.powf(-1.0 / ALPHA)) } else { 0.0 }, 0.0, 1.0, &cuts)
                / ALPHA
        };
        gam * (core + tail(1.0) + tail(-1.0))
    }
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = x.iter().zip(y).map(|(a, b)| (a.ln(), b.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn closed_gamma(alpha: f64) -> f64 {
    alpha / (2.0 * (alpha + 1.0))
}

fn closed_b(alpha: f64) -> f64 {
    closed_gamma(alpha) * (alpha + 1.0) / (alpha - 1.0)
}

fn closed_a(alpha: f64) -> f64 {
    closed_gamma(alpha) * PI / (0.5 * PI * alpha).sin()
}

fn closed_c_norm(alpha: f64) -> f64 {
    2f64.powf(alpha) * gamma(0.5 * (1.0 + alpha)) / (PI.sqrt() * gamma(-0.5 * alpha).abs())
}

// ------------------------------------------------------------- criteria

struct Verdict {
    ok: bool,
    notes: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Verdict { ok: true, notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, note: String) {
        self.ok &= ok;
        self.notes.push(if ok { note } else { format!("!! {note}") });
    }
}

fn flat() -> EquilibriumSpec {
    EquilibriumSpec::flat(1, ALPHA).unwrap()
}

fn constants() -> Verdict {
    let mut v = Verdict::new();
    let k = LimitConstants::compute(&flat()).unwrap();
    v.check((k.gamma - 0.3).abs() <= CONST_TOL, format!("gamma {:.10}", k.gamma));
    v.check((k.b - 1.5).abs() <= CONST_TOL, format!("B {:.10}", k.b));
    let a_ref = 0.3 * 2f64.sqrt() * PI;
    v.check((k.a - a_ref).abs() <= CONST_TOL, format!("A {:.10} vs 0.3 sqrt(2) pi {a_ref:.10}", k.a));
    // the rounded literal, to its last digit
    v.check((k.a - 1.3328649).abs() <= 5e-8, "A rounds to 1.3328649".into());
    v.check((k.c_norm - 0.299206).abs() <= C_NORM_TOL, format!("c_norm {:.8}", k.c_norm));
    let mut worst: f64 = 0.0;
    for alpha in [1.1, 1.25, 1.5, 1.75, 1.9] {
        let spec = EquilibriumSpec::flat(1, alpha).unwrap();
        let a = constant_a(&spec).unwrap();
        let c = constant_c_norm(1, alpha).unwrap();
        worst = worst
            .max((c * a - gamma(alpha + 1.0) * closed_gamma(alpha)).abs())
            .max((c - closed_c_norm(alpha)).abs())
            .max((a - closed_a(alpha)).abs());
    }
    v.check(worst <= CONST_TOL, format!("c A = Gamma(a+1) gamma, worst {worst:.1e}"));
    v
}

/// (-Δ)^{α/2} φ(x) = (1/π) ∫_0^∞ ξ^α Re(φ̂(ξ) e^{iξx}) dξ for real φ,
/// with ξ = s² to remove the ξ^α singularity.
fn fourier_oracle(panels: &Panels, hat: &dyn Fn(f64) -> (f64, f64), x: f64) -> f64 {
    let f = |s: f64| {
        let xi = s * s;
        let (re, im) = hat(xi);
        2.0 * s * xi.powf(ALPHA) * (re * (xi * x).cos() - im * (xi * x).sin())
    };
    let cuts: Vec<f64> = (1..48).map(|j| j as f64 * 6.0 / 48.0).collect();
    panels.integrate(&f, 0.0, 6.0, &cuts) / PI
}

type RealFn = Box<dyn Fn(f64) -> f64>;
type ComplexFn = Box<dyn Fn(f64) -> (f64, f64)>;

fn duality() -> Verdict {
    let mut v = Verdict::new();
    let panels = Panels::new();
    let sp = PI.sqrt();
    let cases: Vec<(&str, RealFn, ComplexFn)> = vec![
        ("gauss", Box::new(|x| (-x * x).exp()), Box::new(move |k| (sp * (-k * k / 4.0).exp(), 0.0))),
        (
            "shifted",
            Box::new(|x| (-(x - 0.5f64).powi(2) / 4.0).exp()),
            Box::new(move |k| {
                let m = 2.0 * sp * (-k * k).exp();
                (m * (0.5 * k).cos(), -m * (0.5 * k).sin())
            }),
        ),
        ("odd", Box::new(|x| x * (-x * x).exp()), Box::new(move |k| (0.0, -0.5 * sp * k * (-k * k / 4.0).exp()))),
        (
            "modulated",
            Box::new(|x| (-x * x).exp() * (2.0 * x).cos()),
            Box::new(move |k| (0.5 * sp * ((-(k - 2.0) * (k - 2.0) / 4.0).exp() + (-(k + 2.0) * (k + 2.0) / 4.0).exp()), 0.0)),
        ),
        ("sech", Box::new(|x| 1.0 / x.cosh()), Box::new(|k| (PI / (0.5 * PI * k).cosh(), 0.0))),
    ];
    let grid = TorusGrid::new(1, 1 << 13, 2.0 * PI * 64.0).unwrap();
    let transform = SpectralTransform::new(grid);
    let origin = grid.point(grid.n() / 2)[0];
    let idx: Vec<usize> = [-37i64, -11, 0, 9, 30].iter().map(|o| (grid.n() as i64 / 2 + o) as usize).collect();
    for (name, phi, hat) in &cases {
        let field = MacroField::from_fn(grid, 0.0, |x| phi(x[0] - origin));
        let spectral = frac_laplacian_spectral(&field, &transform, ALPHA);
        let (mut d_si, mut d_so, mut scale) = (0.0f64, 0.0f64, 0.0f64);
        for &i in &idx {
            let x = grid.point(i)[0] - origin;
            let oracle = fourier_oracle(&panels, hat.as_ref(), x);
            let integral = frac_laplacian_integral(|y| phi(y[0]), 1, ALPHA, [x, 0.0]).unwrap();
            d_si = d_si.max((spectral.values()[i] - integral).abs());
            d_so = d_so.max((spectral.values()[i] - oracle).abs());
            scale = scale.max(oracle.abs());
        }
        v.check(d_si / scale <= DUALITY_TOL, format!("{name} {:.1e}", d_si / scale));
        v.check(d_so / scale <= DUALITY_TOL, format!("{name} vs Fourier integral {:.1e}", d_so / scale));
    }
    v
}

/// S_ε(k, p) for the simple kernel, N = 1, k, c > 0 scalars.
fn symbol_oracle(panels: &Panels, eps: f64, k: f64, p: f64, c: f64) -> (f64, f64) {
    let ea = eps.powf(ALPHA);
    let d = |v: f64| (1.0 + ea * p).powi(2) + (eps * v * k).powi(2);
    let re = panels.against_m(|v| (p + ea * p * p + eps.powf(2.0 - ALPHA) * (v * k).powi(2)) / d(v), &[0.0]);
    let im = panels.against_m(|v| c * k * v.abs() / d(v), &[0.0]);
    (re, im)
}

fn symbols() -> Verdict {
    let mut v = Verdict::new();
    let panels = Panels::new();
    let spec = flat();
    let quad = VelocityQuadrature::build(&spec, 16, 64).unwrap();
    let k = LimitConstants::compute(&spec).unwrap();
    let limit = (1.0 + closed_a(ALPHA), closed_b(ALPHA));
    let eps: Vec<f64> = (3..=10).map(|j| 2f64.powi(-j)).collect();
    let mut gaps = Vec::new();
    let mut worst_vs_oracle: f64 = 0.0;
    for &e in &eps {
        let s = symbol_eps_with(&k, &quad, [1.0, 0.0], e, [1.0, 0.0], 1.0).unwrap();
        let (re, im) = symbol_oracle(&panels, e, 1.0, 1.0, 1.0);
        worst_vs_oracle = worst_vs_oracle.max((s.real_part - re).abs().max((s.imag_part - im).abs()));
        gaps.push((s.real_part - limit.0).hypot(s.imag_part - limit.1));
    }
    v.check(worst_vs_oracle <= 1e-8, format!("symbol vs quadrature {worst_vs_oracle:.1e}"));
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    v.check(monotone, format!("gaps {:.3e} -> {:.3e} monotone {monotone}", gaps[0], gaps[7]));
    let order = ls_slope(&eps, &gaps);
    v.check(order >= SYMBOL_ORDER_MIN, format!("order {order:.3}"));
    v
}

/// Q_ε(f) at the nodes, assembled from Φ directly.
fn q_eps(quad: &VelocityQuadrature, kernel: &dyn TurningKernel, c: [f64; 2], eps: f64, f: &[f64]) -> Vec<f64> {
    let s = eps.powf(ALPHA - 1.0);
    let (nodes, w, m) = (quad.nodes(), quad.weights_plain(), quad.m_values());
    let rho: f64 = w.iter().zip(f).map(|(a, b)| a * b).sum();
    (0..nodes.len())
        .map(|i| {
            let gain: f64 = (0..nodes.len()).map(|j| w[j] * kernel.phi(nodes[i], nodes[j], c) * f[j]).sum();
            let loss: f64 = (0..nodes.len()).map(|j| w[j] * m[j] * kernel.phi(nodes[j], nodes[i], c)).sum();
            rho * m[i] - f[i] + s * (m[i] * gain - f[i] * loss)
        })
        .collect()
}

fn perturbed_equilibrium() -> Verdict {
    let mut v = Verdict::new();
    let quad = VelocityQuadrature::build(&flat(), 16, 64).unwrap();
    let c = [1.0, 0.0];
    let kernels: [&dyn TurningKernel; 2] = [&SimpleKernel, &DecayKernel];
    for kernel in kernels {
        for eps in [0.2f64, 0.1, 0.05] {
            let feps = solve_feps(&quad, kernel, c, eps, 1e-15).unwrap();
            let q = q_eps(&quad, kernel, c, eps, &feps.values);
            let residual: f64 = quad.weights_plain().iter().zip(&q).map(|(w, x)| w * x.abs()).sum();
            let s = eps.powf(ALPHA - 1.0) * kernel.phi_bound(c);
            let (lo, hi) = ((1.0 - s) / (1.0 + s), (1.0 + s) / (1.0 - s));
            let inside = feps
                .values
                .iter()
                .zip(quad.m_values())
                .all(|(f, m)| f / m >= lo - 1e-13 && f / m <= hi + 1e-13);
            let name = kernel.name();
            v.check(residual <= FEPS_TOL && feps.residual <= FEPS_TOL, format!("{name} eps {eps} residual {residual:.1e}"));
            v.check(inside, format!("{name} eps {eps} bounds"));
            if name == "simple" {
                let dev = quad
                    .nodes()
                    .iter()
                    .zip(quad.m_values())
                    .zip(&feps.values)
                    .map(|((x, m), f)| (f - m * (1.0 + eps.powf(ALPHA - 1.0) * x[0].signum())).abs())
                    .fold(0.0, f64::max);
                v.check(dev <= FEPS_TOL, format!("closed form eps {eps} {dev:.1e}"));
            }
        }
    }
    v.notes = vec![if v.ok {
        "residual, bounds and closed form hold for simple and decay kernels at eps 0.2, 0.1, 0.05".into()
    } else {
        v.notes.iter().filter(|n| n.starts_with("!!")).cloned().collect::<Vec<_>>().join("; ")
    }];
    v
}

fn coercivity() -> Verdict {
    let mut v = Verdict::new();
    let quad = VelocityQuadrature::build(&flat(), 16, 32).unwrap();
    let (w, m, nodes) = (quad.weights_plain(), quad.m_values(), quad.nodes());
    let c = [1.0, 0.0];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let kernels: [&dyn TurningKernel; 2] = [&SimpleKernel, &DecayKernel];
    let (mut trials, mut failures) = (0, 0);
    for kernel in kernels {
        for eps in [0.2f64, 0.1, 0.05] {
            let s = eps.powf(ALPHA - 1.0);
            let feps = solve_feps(&quad, kernel, c, eps, 1e-15).unwrap();
            let f_eps = &feps.values;
            let min_rate = nodes
                .iter()
                .flat_map(|a| nodes.iter().map(move |b| 1.0 + s * kernel.phi(*a, *b, c)))
                .fold(f64::INFINITY, f64::min);
            let max_ratio = f_eps.iter().zip(m).map(|(f, mm)| f / mm).fold(0.0, f64::max);
            let nu = min_rate / max_ratio;
            for _ in 0..100 {
                let mass: f64 = rng.gen_range(-2.0..2.0);
                let f: Vec<f64> = m.iter().map(|mm| mm * (mass + rng.gen_range(-1.0..1.0))).collect();
                let q = q_eps(&quad, kernel, c, eps, &f);
                let rho: f64 = w.iter().zip(&f).map(|(a, b)| a * b).sum();
                let lhs: f64 = (0..f.len()).map(|i| -w[i] * q[i] * f[i] / f_eps[i]).sum();
                let rhs: f64 = nu * (0..f.len()).map(|i| w[i] * (f[i] - rho * f_eps[i]).powi(2) / f_eps[i]).sum::<f64>();
                trials += 1;
                if lhs < rhs {
                    failures += 1;
                }
            }
        }
    }
    v.check(failures == 0, format!("{failures} violations in {trials} trials"));
    v
}

fn kinetic_limit() -> Verdict {
    let mut v = Verdict::new();
    let start = Instant::now();
    let spec = flat();
    let quad = VelocityQuadrature::build(&spec, 16, 64).unwrap();
    let length = 2.0 * PI * 8.0;
    let grid = TorusGrid::new(1, 512, length).unwrap();
    let kappa = 2.0 * PI / length;
    let t = 0.5;
    let rho_in = MacroField::from_fn(grid, 0.0, |x| 1.0 + 0.5 * (kappa * x[0]).cos());
    // ρ = 1 + ½ e^{-A κ^α t} cos(κ(x - u t)), u = B c
    let (a, u) = (closed_a(ALPHA), closed_b(ALPHA));
    let exact = MacroField::from_fn(grid, t, |x| 1.0 + 0.5 * (-a * kappa.powf(ALPHA) * t).exp() * (kappa * (x[0] - u * t)).cos());
    let eps = [0.2, 0.1, 0.05, 0.025];
    let mut errors = Vec::new();
    let mut micro = Vec::new();
    for &e in &eps {
        let run = kinetic_solve(&KineticProblem::new(&quad, &SimpleKernel, TurningField::Constant([1.0, 0.0]), e, rho_in.clone(), t, 1e-3))
            .unwrap();
        let diff: f64 = run.final_density().values().iter().zip(exact.values()).map(|(p, q)| (p - q).powi(2)).sum();
        let norm: f64 = exact.values().iter().map(|q| q * q).sum();
        errors.push((diff / norm).sqrt());
        let d = &run.diagnostics;
        let drift = d.mass.iter().map(|mm| (mm - d.mass[0]).abs()).fold(0.0, f64::max);
        v.check(drift <= MASS_DRIFT_TOL, format!("eps {e} mass drift {drift:.1e}"));
        let nonincreasing = d.weighted_l2.windows(2).all(|w| w[1] <= w[0]);
        v.check(nonincreasing, format!("eps {e} weighted L2 nonincreasing"));
        micro.push(d.micro_residual.iter().copied().fold(0.0, f64::max));
    }
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    v.check(decreasing, format!("rel_l2 {:?}", errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()));
    let bounded = micro.iter().all(|r| r.is_finite() && *r <= 2.0 * micro[0]);
    v.check(bounded, format!("micro residual max {:.3}", micro.iter().copied().fold(0.0, f64::max)));

    let report = run_sweep(&SweepConfig::new(RunConfig::default()).unwrap()).unwrap();
    let agree = report.rows.len() == 4
        && report.rows.iter().zip(&errors).all(|(r, e)| (r.rel_l2_error - e).abs() <= 1e-6 * e);
    v.check(agree, "sweep report matches the closed-form comparison".into());
    let elapsed = start.elapsed().as_secs_f64();
    v.check(elapsed <= SWEEP_BUDGET_S, format!("{elapsed:.1} s"));
    let keep: Vec<String> = v.notes.iter().filter(|n| n.starts_with("!!") || !n.starts_with("eps")).cloned().collect();
    v.notes = keep;
    v
}

fn particles() -> Verdict {
    let mut v = Verdict::new();
    let start = Instant::now();
    let spec = flat();
    let quad = VelocityQuadrature::build(&spec, 16, 64).unwrap();
    let (a, b) = (closed_a(ALPHA), closed_b(ALPHA));
    let u = drift_u(&SimpleKernel, [1.0, 0.0], &quad).unwrap().u[0];
    v.check((u - b).abs() < 1e-8, format!("u = {u:.8}"));
    let length = 2.0 * PI * 8.0;
    let kappa = 2.0 * PI / length;
    let grid = TorusGrid::new(1, 512, length).unwrap();
    let rho_in = MacroField::from_fn(grid, 0.0, |x| 1.0 + 0.5 * (kappa * x[0]).cos());
    let t = 0.5;
    let eps = 0.05;
    let n = 100_000;
    let model = ParticleModel::new(&quad, &SimpleKernel, [1.0, 0.0], eps).unwrap();
    let run = simulate(
        &model,
        &SimulationConfig { n_particles: n, t_final: t, snapshot_times: vec![], initial: InitialPositions::Density(rho_in), seed: SEED },
    )
    .unwrap();
    let cells = 64;
    let coarse = TorusGrid::new(1, cells, length).unwrap();
    let h = coarse.spacing();
    let hist = empirical_density(run.final_ensemble(), &coarse).unwrap();
    let decay = 0.5 * (-a * kappa.powf(ALPHA) * t).exp();
    let l1: f64 = (0..cells)
        .map(|j| {
            let (lo, hi) = (j as f64 * h - b * t, (j + 1) as f64 * h - b * t);
            let avg = (1.0 + decay * ((kappa * hi).sin() - (kappa * lo).sin()) / (kappa * h)) / length;
            (hist.values()[j] - avg).abs() * h
        })
        .sum();
    v.check(l1 <= HIST_L1_TOL, format!("histogram L1 {l1:.4}"));
    let dx: Vec<f64> = run.displacements(run.snapshots.len() - 1).iter().map(|d| d[0]).collect();
    let mean = dx.iter().sum::<f64>() / n as f64;
    let sd = (dx.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let se = sd / (n as f64).sqrt();
    v.check((mean - b * t).abs() <= DRIFT_SIGMAS * se, format!("drift {mean:.4} +- {se:.4} vs {:.4}", b * t));

    let free = ParticleModel::new(&quad, &SimpleKernel, [0.0, 0.0], eps).unwrap();
    let run = simulate(
        &free,
        &SimulationConfig { n_particles: n, t_final: t, snapshot_times: vec![], initial: InitialPositions::Origin, seed: SEED + 1 },
    )
    .unwrap();
    let mut mags: Vec<f64> = run.displacements(1).iter().map(|d| d[0].abs()).collect();
    mags.sort_by(|x, y| y.total_cmp(x));
    // log P(|X| > r) against log r for exceedance probabilities in [1e-3, 3e-2]
    let ranks: Vec<usize> = (0..20).map(|j| (100.0 * 30f64.powf(j as f64 / 19.0)).round() as usize).collect();
    let r: Vec<f64> = ranks.iter().map(|&k| mags[k - 1]).collect();
    let p: Vec<f64> = ranks.iter().map(|&k| k as f64 / n as f64).collect();
    let slope = ls_slope(&r, &p);
    v.check((slope + ALPHA).abs() <= TAIL_TOL, format!("tail slope {slope:.3}"));
    let elapsed = start.elapsed().as_secs_f64();
    v.check(elapsed <= PARTICLE_BUDGET_S, format!("{elapsed:.1} s"));
    v
}

fn chi() -> Verdict {
    let mut v = Verdict::new();
    let panels = Panels::new();
    let spec = flat();
    let quad = VelocityQuadrature::build(&spec, 16, 64).unwrap();
    let k = LimitConstants::compute(&spec).unwrap();
    let omega = 0.8;
    let wave = PlaneWave::new([1.0, 0.0], omega, 0.0);
    let eps: Vec<f64> = (4..=8).map(|j| 2f64.powi(-j)).collect();
    let mut dev = [vec![], vec![], vec![]];
    let mut gap = vec![];
    let mut worst: f64 = 0.0;
    for &e in &eps {
        let d = chi_diagnostics(&wave, &k, &quad, e, [0.0, 0.0], 0.0).unwrap();
        // sup over 16 phases of ∫ M |χ - φ|, ∫ M |∂(χ - φ)|
        let (mut d0, mut d1) = (0.0f64, 0.0f64);
        for j in 0..16 {
            let psi = 2.0 * PI * j as f64 / 16.0;
            let (s, c) = psi.sin_cos();
            let mut breaks = vec![0.0];
            if c != 0.0 {
                breaks.push(-s / c / e);
            }
            if s != 0.0 {
                breaks.push(c / s / e);
            }
            d0 = d0.max(panels.against_m(|x| { let a = e * x; (a * s + a * a * c).abs() / (1.0 + a * a) }, &breaks));
            d1 = d1.max(panels.against_m(|x| { let a = e * x; (a * c - a * a * s).abs() / (1.0 + a * a) }, &breaks));
        }
        worst = worst.max(((d.dev_0 - d0) / d0).abs()).max(((d.dev_t - omega * d1) / d1).abs()).max(((d.dev_x - d1) / d1).abs());
        dev[0].push(d.dev_0);
        dev[1].push(d.dev_t);
        dev[2].push(d.dev_x);
        gap.push((d.frac_term + closed_a(ALPHA)).abs());
    }
    v.check(worst <= 1e-6, format!("deviations vs quadrature {worst:.1e}"));
    for (name, series) in ["dev_0", "dev_t", "dev_x"].iter().zip(&dev) {
        let order = ls_slope(&eps, series);
        v.check((CHI_ORDER.0..=CHI_ORDER.1).contains(&order), format!("{name} order {order:.3}"));
    }
    let order = ls_slope(&eps, &gap);
    v.check((order - (2.0 - ALPHA)).abs() <= FRAC_ORDER_TOL, format!("frac_term gap order {order:.3}"));

    let grid = TorusGrid::new(1, 64, 16.0 * PI).unwrap();
    let rho = MacroField::from_fn(grid, 0.0, |x| 1.0 + 0.5 * (x[0] / 8.0).cos());
    let mut residuals = Vec::new();
    for (e, dt) in [(0.2, 0.02), (0.1, 0.01), (0.05, 0.005), (0.025, 0.0025)] {
        let run = kinetic_solve(
            &KineticProblem::new(&quad, &SimpleKernel, TurningField::Constant([1.0, 0.0]), e, rho.clone(), 0.5, dt)
                .with_probes(vec![1]),
        )
        .unwrap();
        residuals.push(weak_form_residual(&run, &SimpleKernel, &quad, 1, 0.5).unwrap().residual);
    }
    let decreasing = residuals.windows(2).all(|w| w[1] < w[0]);
    v.check(decreasing, format!("weak form {:?}", residuals.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>()));
    v
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 8] = [
        ("constants", constants),
        ("fractional Laplacian duality", duality),
        ("symbol convergence", symbols),
        ("perturbed equilibrium", perturbed_equilibrium),
        ("coercivity", coercivity),
        ("kinetic to macroscopic limit", kinetic_limit),
        ("particle cross-check", particles),
        ("chi diagnostics", chi),
    ];
    let mut all = true;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = std::panic::catch_unwind(run).unwrap_or_else(|_| Verdict { ok: false, notes: vec!["panicked".into()] });
        all &= verdict.ok;
        println!(
            "criterion {} {} [{}]: {} ({:.1} s)",
            i + 1,
            if verdict.ok { "PASS" } else { "FAIL" },
            name,
            verdict.notes.join("; "),
            start.elapsed().as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
