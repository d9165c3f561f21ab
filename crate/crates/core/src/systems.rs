//! Seeded simulators for the benchmark systems: a linear modal model,
//! switched anharmonic oscillators and a Kuramoto network with random
//! coupling strengths.
//!
//! Every simulator is a pure function of its config. Randomness comes from
//! ChaCha8 seeded with the config seed, one fixed stream per noise source.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{KromError, Result};
use crate::linalg::CMatrix;
use crate::snapshots::{Representation, SnapshotMatrix, SnapshotMeta};

const STREAM_MODES: u64 = 1;
const STREAM_EIGENVALUES: u64 = 2;
const STREAM_MEASUREMENT: u64 = 3;
const STREAM_ACTIONS: u64 = 4;
const STREAM_ANGLES: u64 = 5;
const STREAM_PERMUTATIONS: u64 = 6;
const STREAM_JUMPS: u64 = 7;
const STREAM_FREQUENCIES: u64 = 8;
const STREAM_COUPLING: u64 = 9;
const STREAM_FORCING: u64 = 10;

/// Generator for one named noise source of a run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn invalid(msg: String) -> KromError {
    KromError::InvalidArgument(msg)
}

fn normal(std: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, std).map_err(|e| invalid(format!("normal distribution with std {std}: {e}")))
}

fn named(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}{i}"))
}

fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_final > 0.0 && t_final.is_finite()) {
        return Err(invalid(format!("need dt > 0 and t_final > 0, got {dt}, {t_final}")));
    }
    let n = (t_final / dt).round();
    if n < 1.0 {
        return Err(invalid(format!("t_final {t_final} shorter than one step {dt}")));
    }
    Ok(n as usize)
}

// ---------------------------------------------------------------------------
// Linear modal model

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModalConfig {
    pub j_true: usize,
    pub n: usize,
    pub noise_std: f64,
    pub n_steps: usize,
    pub seed: u64,
}

impl LinearModalConfig {
    /// Ten modes in 20 dimensions, noise std 0.25, 500 steps.
    pub fn reference(seed: u64) -> Self {
        Self {
            j_true: 10,
            n: 20,
            noise_std: 0.25,
            n_steps: 500,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.j_true < 1 || self.n < self.j_true {
            return Err(invalid(format!(
                "need 1 <= j_true <= n, got j_true={} n={}",
                self.j_true, self.n
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(invalid(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        if self.n_steps < 2 {
            return Err(invalid(format!("need at least 2 steps, got {}", self.n_steps)));
        }
        Ok(())
    }
}

/// Modes (columns) and eigenvalues that generated a linear modal trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalTruth {
    pub modes: CMatrix,
    pub eigenvalues: Vec<Complex64>,
}

/// Random unit-norm real modes and unit-modulus eigenvalues.
pub fn draw_modal_truth(cfg: &LinearModalConfig) -> Result<ModalTruth> {
    cfg.validate()?;
    let unit = Uniform::new_inclusive(-1.0, 1.0);
    let mut rng = stream_rng(cfg.seed, STREAM_MODES);
    let mut modes = CMatrix::zeros(cfg.n, cfg.j_true);
    for j in 0..cfg.j_true {
        let mut col: Vec<f64> = (0..cfg.n).map(|_| unit.sample(&mut rng)).collect();
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(KromError::Numerical("drew an all-zero mode".into()));
        }
        col.iter_mut().for_each(|x| *x /= norm);
        for (i, x) in col.into_iter().enumerate() {
            modes[(i, j)] = Complex64::new(x, 0.0);
        }
    }
    let mut rng = stream_rng(cfg.seed, STREAM_EIGENVALUES);
    let mut eigenvalues = Vec::with_capacity(cfg.j_true);
    while eigenvalues.len() < cfg.j_true {
        let z = Complex64::new(unit.sample(&mut rng), unit.sample(&mut rng));
        if z.norm() > 0.0 {
            eigenvalues.push(z / z.norm());
        }
    }
    Ok(ModalTruth { modes, eigenvalues })
}

/// `x(t) = sum_j m_j lambda_j^t + xi(t)` for `t = 0..n_steps`, with `xi`
/// i.i.d. `N(0, noise_std^2)` in every coordinate.
pub fn simulate_linear_from_truth(
    truth: &ModalTruth,
    noise_std: f64,
    n_steps: usize,
    seed: u64,
) -> Result<SnapshotMatrix> {
    let n = truth.modes.nrows();
    if truth.eigenvalues.len() != truth.modes.ncols() {
        return Err(KromError::Dimension("eigenvalue count differs from mode count".into()));
    }
    let mut values = CMatrix::zeros(n, n_steps);
    let mut powers = vec![Complex64::new(1.0, 0.0); truth.eigenvalues.len()];
    for t in 0..n_steps {
        for (j, p) in powers.iter().enumerate() {
            for i in 0..n {
                values[(i, t)] += truth.modes[(i, j)] * p;
            }
        }
        for (p, l) in powers.iter_mut().zip(&truth.eigenvalues) {
            *p *= l;
        }
    }
    if noise_std > 0.0 {
        let dist = normal(noise_std)?;
        let mut rng = stream_rng(seed, STREAM_MEASUREMENT);
        for t in 0..n_steps {
            for i in 0..n {
                values[(i, t)].re += dist.sample(&mut rng);
            }
        }
    }
    SnapshotMatrix::new(values, SnapshotMeta::raw(n, 1.0))
}

pub fn simulate_linear_modal(cfg: &LinearModalConfig) -> Result<(SnapshotMatrix, ModalTruth)> {
    let truth = draw_modal_truth(cfg)?;
    let x = simulate_linear_from_truth(&truth, cfg.noise_std, cfg.n_steps, cfg.seed)?;
    Ok((x, truth))
}

// ---------------------------------------------------------------------------
// Switched anharmonic oscillators

/// Permutation dynamics `p(t) = P^floor(t) p`, `q(t) = Q^floor(t) q`, where a
/// permutation matrix is stored as the index map `(P v)_i = v[perm[i]]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationState {
    pub p: Vec<usize>,
    pub q: Vec<usize>,
    pub p_matrix: Vec<usize>,
    pub q_matrix: Vec<usize>,
}

fn is_permutation(v: &[usize]) -> bool {
    let mut seen = vec![false; v.len()];
    v.iter().all(|&i| i < v.len() && !std::mem::replace(&mut seen[i], true))
}

fn apply(perm: &[usize], v: &[usize]) -> Vec<usize> {
    perm.iter().map(|&i| v[i]).collect()
}

impl PermutationState {
    pub fn new(p: Vec<usize>, q: Vec<usize>, p_matrix: Vec<usize>, q_matrix: Vec<usize>) -> Result<Self> {
        let n = p.len();
        if n == 0 || [&q, &p_matrix, &q_matrix].iter().any(|v| v.len() != n) {
            return Err(KromError::Dimension("permutations must share a non-zero length".into()));
        }
        if ![&p, &q, &p_matrix, &q_matrix].iter().all(|v| is_permutation(v)) {
            return Err(invalid("not a permutation of 0..n".into()));
        }
        Ok(Self { p, q, p_matrix, q_matrix })
    }

    fn random(n: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut draw = || {
            let mut v: Vec<usize> = (0..n).collect();
            v.shuffle(rng);
            v
        };
        let (p, q, pm, qm) = (draw(), draw(), draw(), draw());
        Self {
            p,
            q,
            p_matrix: pm,
            q_matrix: qm,
        }
    }
}

/// `(p(t), q(t))` and the single undirected edge `(p_0(t), q_0(t))`.
pub fn step_permutation(state: &PermutationState, t: f64) -> Result<(Vec<usize>, Vec<usize>, (usize, usize))> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("permutation time must be >= 0, got {t}")));
    }
    let k = t.floor() as u64;
    let mut p = state.p.clone();
    let mut q = state.q.clone();
    for _ in 0..k {
        p = apply(&state.p_matrix, &p);
        q = apply(&state.q_matrix, &q);
    }
    let edge = (p[0], q[0]);
    Ok((p, q, edge))
}

/// Oscillator frequency as a function of action; nondecreasing with `f(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrequencyFn {
    /// `f(I) = I`
    #[default]
    Identity,
    /// `f(I) = scale * I`, `scale >= 0`
    Linear { scale: f64 },
    /// `f(I) = sign(I) |I|^exponent`, `exponent > 0`
    Power { exponent: f64 },
}

impl FrequencyFn {
    pub fn eval(&self, action: f64) -> f64 {
        match *self {
            FrequencyFn::Identity => action,
            FrequencyFn::Linear { scale } => scale * action,
            FrequencyFn::Power { exponent } => action.signum() * action.abs().powf(exponent),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            FrequencyFn::Linear { scale } if !(scale >= 0.0 && scale.is_finite()) => {
                Err(invalid(format!("frequency scale must be >= 0, got {scale}")))
            }
            FrequencyFn::Power { exponent } if !(exponent > 0.0 && exponent.is_finite()) => {
                Err(invalid(format!("frequency exponent must be > 0, got {exponent}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnharmonicConfig {
    pub n_osc: usize,
    pub dt: f64,
    pub t_final: f64,
    pub coupling_c: f64,
    pub lambda_exp: f64,
    pub noise_std: f64,
    pub seed: u64,
    #[serde(default)]
    pub frequency: FrequencyFn,
}

impl AnharmonicConfig {
    /// Ten oscillators, dt 0.05, 20 s, c = 0.5, rate 1, jump noise 0.05.
    pub fn reference(seed: u64) -> Self {
        Self {
            n_osc: 10,
            dt: 0.05,
            t_final: 20.0,
            coupling_c: 0.5,
            lambda_exp: 1.0,
            noise_std: 0.05,
            seed,
            frequency: FrequencyFn::Identity,
        }
    }

    fn validate(&self) -> Result<usize> {
        if self.n_osc < 1 {
            return Err(invalid("need at least one oscillator".into()));
        }
        if !(self.coupling_c > 0.0 && self.coupling_c < 1.0) {
            return Err(invalid(format!("coupling must lie in (0, 1), got {}", self.coupling_c)));
        }
        if !(self.lambda_exp > 0.0 && self.lambda_exp.is_finite()) {
            return Err(invalid(format!("exponential rate must be > 0, got {}", self.lambda_exp)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(invalid(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        self.frequency.validate()?;
        step_count(self.t_final, self.dt)
    }
}

/// Exchange of action across the undirected edge `(i, j)`; a self-loop
/// changes nothing.
pub fn coupling_jump(actions: &mut [f64], edge: (usize, usize), c: f64) {
    let (i, j) = edge;
    if i != j {
        let (ai, aj) = (actions[i], actions[j]);
        actions[j] = aj + c * (ai - aj);
        actions[i] = ai + c * (aj - ai);
    }
}

/// Actions and angles sampled every `dt` on `[0, t_final]`.
///
/// At each integer time `k` (just after the sample at `t = k`) the edge
/// `(p_0(k), q_0(k))` exchanges action and every oscillator receives an
/// independent `N(0, noise_std^2)` kick. Between jumps actions are constant
/// and angles advance exactly by `f(I) dt`, reported mod 1.
pub fn simulate_anharmonic(cfg: &AnharmonicConfig) -> Result<SnapshotMatrix> {
    let n_steps = cfg.validate()?;
    let n = cfg.n_osc;
    let exp = Exp::new(cfg.lambda_exp).map_err(|e| invalid(format!("exponential rate: {e}")))?;
    let mut actions: Vec<f64> = {
        let mut rng = stream_rng(cfg.seed, STREAM_ACTIONS);
        (0..n).map(|_| exp.sample(&mut rng)).collect()
    };
    let mut angles: Vec<f64> = {
        let mut rng = stream_rng(cfg.seed, STREAM_ANGLES);
        (0..n).map(|_| rng.gen::<f64>()).collect()
    };
    let perms = PermutationState::random(n, &mut stream_rng(cfg.seed, STREAM_PERMUTATIONS));
    let kicks = normal(cfg.noise_std.max(f64::MIN_POSITIVE))?;
    let mut jump_rng = stream_rng(cfg.seed, STREAM_JUMPS);

    let (mut p, mut q) = (perms.p.clone(), perms.q.clone());
    let mut next_jump = 0u64;
    let tol = 1e-9 * cfg.dt;

    let mut values = CMatrix::zeros(2 * n, n_steps + 1);
    let record = |values: &mut CMatrix, col: usize, actions: &[f64], angles: &[f64]| {
        for i in 0..n {
            values[(i, col)] = Complex64::new(actions[i], 0.0);
            values[(n + i, col)] = Complex64::new(wrap(angles[i], 1.0), 0.0);
        }
    };
    record(&mut values, 0, &actions, &angles);

    for s in 1..=n_steps {
        let mut a = (s - 1) as f64 * cfg.dt;
        let b = s as f64 * cfg.dt;
        while (next_jump as f64) < b - tol {
            let k = next_jump as f64;
            for (th, &act) in angles.iter_mut().zip(&actions) {
                *th += cfg.frequency.eval(act) * (k - a).max(0.0);
            }
            a = a.max(k);
            coupling_jump(&mut actions, (p[0], q[0]), cfg.coupling_c);
            if cfg.noise_std > 0.0 {
                for act in actions.iter_mut() {
                    *act += kicks.sample(&mut jump_rng);
                }
            }
            p = apply(&perms.p_matrix, &p);
            q = apply(&perms.q_matrix, &q);
            next_jump += 1;
        }
        for (th, &act) in angles.iter_mut().zip(&actions) {
            *th = wrap(*th + cfg.frequency.eval(act) * (b - a), 1.0);
        }
        record(&mut values, s, &actions, &angles);
    }

    let coord_names = named("I", n).chain(named("theta", n)).collect();
    SnapshotMatrix::new(
        values,
        SnapshotMeta {
            dt: cfg.dt,
            t0: 0.0,
            coord_names,
            representation: Representation::Raw,
            period: None,
        },
    )
}

// ---------------------------------------------------------------------------
// Kuramoto network

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KuramotoConfig {
    pub n_osc: usize,
    pub dt: f64,
    pub t_final: f64,
    pub coupling_k: f64,
    pub zeta_std: f64,
    /// Variance of the per-step frequency perturbation.
    pub xi_var: f64,
    pub omega_range: (f64, f64),
    pub seed: u64,
}

impl KuramotoConfig {
    /// Ten oscillators, dt 0.05, 20 s, K = 5, zeta ~ N(0, 1), xi variance
    /// 0.25, natural frequencies in [0.25, 0.75].
    pub fn reference(seed: u64) -> Self {
        Self {
            n_osc: 10,
            dt: 0.05,
            t_final: 20.0,
            coupling_k: 5.0,
            zeta_std: 1.0,
            xi_var: 0.25,
            omega_range: (0.25, 0.75),
            seed,
        }
    }

    fn validate(&self) -> Result<usize> {
        if self.n_osc < 2 {
            return Err(invalid(format!("need at least 2 oscillators, got {}", self.n_osc)));
        }
        if !(self.zeta_std >= 0.0 && self.zeta_std.is_finite()) {
            return Err(invalid(format!("zeta_std must be >= 0, got {}", self.zeta_std)));
        }
        if !(self.xi_var >= 0.0 && self.xi_var.is_finite()) {
            return Err(invalid(format!("xi_var must be >= 0, got {}", self.xi_var)));
        }
        let (lo, hi) = self.omega_range;
        if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
            return Err(invalid(format!("invalid frequency range ({lo}, {hi})")));
        }
        if !self.coupling_k.is_finite() {
            return Err(invalid("coupling K must be finite".into()));
        }
        step_count(self.t_final, self.dt)
    }
}

/// Symmetric coupling perturbations `zeta_ij = zeta_ji ~ N(0, zeta_std^2)`,
/// zero on the diagonal.
pub fn draw_coupling(cfg: &KuramotoConfig) -> Result<Vec<Vec<f64>>> {
    let n = cfg.n_osc;
    let mut zeta = vec![vec![0.0; n]; n];
    if cfg.zeta_std > 0.0 {
        let dist = normal(cfg.zeta_std)?;
        let mut rng = stream_rng(cfg.seed, STREAM_COUPLING);
        for i in 0..n {
            for j in (i + 1)..n {
                let z = dist.sample(&mut rng);
                zeta[i][j] = z;
                zeta[j][i] = z;
            }
        }
    }
    Ok(zeta)
}

/// Forward-Euler Kuramoto network sampled every `dt` on `[0, t_final]`:
/// `theta_i += dt (omega_i + xi_i + sum_j (K + zeta_ij)/N sin(theta_j - theta_i))`
/// with `xi_i` drawn fresh each step. Angles are reported in `[0, 2 pi)`.
pub fn simulate_kuramoto(cfg: &KuramotoConfig) -> Result<SnapshotMatrix> {
    let n_steps = cfg.validate()?;
    let n = cfg.n_osc;
    let (lo, hi) = cfg.omega_range;
    let omega: Vec<f64> = {
        let mut rng = stream_rng(cfg.seed, STREAM_FREQUENCIES);
        (0..n).map(|_| if lo < hi { rng.gen_range(lo..=hi) } else { lo }).collect()
    };
    let mut theta: Vec<f64> = {
        let mut rng = stream_rng(cfg.seed, STREAM_ANGLES);
        (0..n).map(|_| rng.gen_range(0.0..TAU)).collect()
    };
    let zeta = draw_coupling(cfg)?;
    let forcing = normal(cfg.xi_var.sqrt().max(f64::MIN_POSITIVE))?;
    let mut rng = stream_rng(cfg.seed, STREAM_FORCING);

    let mut values = CMatrix::zeros(n, n_steps + 1);
    let record = |values: &mut CMatrix, col: usize, theta: &[f64]| {
        for (i, th) in theta.iter().enumerate() {
            values[(i, col)] = Complex64::new(wrap(*th, TAU), 0.0);
        }
    };
    record(&mut values, 0, &theta);
    let inv_n = 1.0 / n as f64;
    let mut rate = vec![0.0; n];
    for s in 1..=n_steps {
        for i in 0..n {
            let mut coupling = 0.0;
            for j in 0..n {
                if j != i {
                    coupling += (cfg.coupling_k + zeta[i][j]) * inv_n * (theta[j] - theta[i]).sin();
                }
            }
            let xi = if cfg.xi_var > 0.0 { forcing.sample(&mut rng) } else { 0.0 };
            rate[i] = omega[i] + xi + coupling;
        }
        for (th, r) in theta.iter_mut().zip(&rate) {
            *th += cfg.dt * r;
        }
        record(&mut values, s, &theta);
    }
    SnapshotMatrix::new(
        values,
        SnapshotMeta {
            dt: cfg.dt,
            t0: 0.0,
            coord_names: named("theta", n).collect(),
            representation: Representation::Raw,
            period: None,
        },
    )
}

/// `x mod period` in `[0, period)`.
fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_permutation_twice() {
        let state = PermutationState::new(vec![0, 1, 2], vec![0, 1, 2], vec![1, 2, 0], vec![0, 1, 2]).unwrap();
        let (p, q, edge) = step_permutation(&state, 2.0).unwrap();
        assert_eq!(p, vec![2, 0, 1]);
        assert_eq!(q, vec![0, 1, 2]);
        assert_eq!(edge, (2, 0));
        let (p15, _, _) = step_permutation(&state, 1.5).unwrap();
        assert_eq!(p15, vec![1, 2, 0]);
    }

    #[test]
    fn identity_permutations_keep_edge() {
        let id = vec![0, 1, 2, 3];
        let state = PermutationState::new(vec![3, 1, 2, 0], vec![2, 0, 1, 3], id.clone(), id).unwrap();
        for t in 0..6 {
            assert_eq!(step_permutation(&state, t as f64).unwrap().2, (3, 2));
        }
        assert!(PermutationState::new(vec![0, 0], vec![0, 1], vec![0, 1], vec![0, 1]).is_err());
    }

    #[test]
    fn jump_examples() {
        let mut a = [1.0, 0.0];
        coupling_jump(&mut a, (0, 1), 0.5);
        assert_eq!(a, [0.5, 0.5]);
        let mut b = [0.3, 0.7, 1.1];
        coupling_jump(&mut b, (1, 1), 0.5);
        assert_eq!(b, [0.3, 0.7, 1.1]);
    }

    #[test]
    fn wrap_stays_below_period() {
        assert_eq!(wrap(-1e-18, TAU), 0.0);
        assert!((wrap(TAU + 0.5, TAU) - 0.5).abs() < 1e-12);
    }
}
