//! The dual objective as a self-contained problem instance: pseudo reward,
//! initial distribution, data occupancy and MDP, with exact loss, analytic
//! gradient, and plain gradient descent.

use serde::{Deserialize, Serialize};

use crate::dice::DiceConfig;
use crate::error::{CoreError, Result};
use crate::mdp::{advantage, OccupancyMeasure, TabularMdp};
use crate::types::{DensityRatio, PseudoReward, PseudoValue, SaTable};

/// Advantages are clipped to +/- this multiple of (1 + alpha) before the
/// exponential, keeping exp() inside double range.
pub const ADVANTAGE_CLIP_SCALE: f64 = 50.0;

/// One fully-specified instance of the dual problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiceProblem {
    reward: PseudoReward,
    initial_dist: Vec<f64>,
    data_occ: OccupancyMeasure,
    mdp: TabularMdp,
    cfg: DiceConfig,
}

/// Result of a single gradient step.
#[derive(Debug, Clone)]
pub struct GdStep {
    pub next: PseudoValue,
    /// Loss at the point the step was taken from.
    pub loss: f64,
    /// Gradient norm at the same point.
    pub grad_norm: f64,
}

/// Iterate snapshot recorded by the optimizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptRecord {
    pub iteration: usize,
    pub nu: PseudoValue,
    pub loss: f64,
    pub grad_norm: f64,
}

/// Optimization trace; always contains the initial point and the final
/// iterate, plus every `record_every`-th iterate in between.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptTrace {
    pub records: Vec<OptRecord>,
}

impl OptTrace {
    pub fn final_record(&self) -> &OptRecord {
        self.records.last().expect("trace is never empty")
    }

    pub fn final_nu(&self) -> &PseudoValue {
        &self.final_record().nu
    }

    /// Writes one JSON object per recorded iterate. `ratio_errors`, when
    /// given, must align with `records` and fills the oracle-error field.
    pub fn write_jsonl<W: std::io::Write>(
        &self,
        mut w: W,
        ratio_errors: Option<&[f64]>,
    ) -> Result<()> {
        if let Some(errs) = ratio_errors {
            if errs.len() != self.records.len() {
                return Err(CoreError::DimensionMismatch(format!(
                    "{} ratio errors for {} records",
                    errs.len(),
                    self.records.len()
                )));
            }
        }
        #[derive(Serialize)]
        struct Row {
            iteration: usize,
            loss: f64,
            grad_norm: f64,
            #[serde(skip_serializing_if = "Option::is_none")]
            ratio_error: Option<f64>,
        }
        for (i, rec) in self.records.iter().enumerate() {
            let row = Row {
                iteration: rec.iteration,
                loss: rec.loss,
                grad_norm: rec.grad_norm,
                ratio_error: ratio_errors.map(|e| e[i]),
            };
            serde_json::to_writer(&mut w, &row)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

impl DiceProblem {
    pub fn new(
        reward: PseudoReward,
        initial_dist: Vec<f64>,
        data_occ: OccupancyMeasure,
        mdp: TabularMdp,
        cfg: DiceConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if (cfg.gamma - mdp.discount()).abs() > 1e-12 {
            return Err(CoreError::InvalidArgument(format!(
                "config gamma {} does not match MDP discount {}",
                cfg.gamma,
                mdp.discount()
            )));
        }
        if initial_dist.len() != mdp.n_states() {
            return Err(CoreError::DimensionMismatch(
                "initial distribution does not match MDP".into(),
            ));
        }
        if data_occ.n_states() != mdp.n_states() || data_occ.n_actions() != mdp.n_actions() {
            return Err(CoreError::DimensionMismatch(
                "data occupancy does not match MDP".into(),
            ));
        }
        if data_occ.support_mask().iter().all(|&m| !m) {
            return Err(CoreError::EmptySupport("data occupancy is all zero".into()));
        }
        if !reward.table().covers(&data_occ.support_mask()) {
            return Err(CoreError::SupportViolation(
                "pseudo reward undefined somewhere on the data support".into(),
            ));
        }
        Ok(Self {
            reward,
            initial_dist,
            data_occ,
            mdp,
            cfg,
        })
    }

    /// Builds the exact-distribution variant: r = log(dE / dU), mu from the
    /// MDP itself.
    pub fn exact(
        expert_occ: &OccupancyMeasure,
        data_occ: OccupancyMeasure,
        mdp: TabularMdp,
        cfg: DiceConfig,
    ) -> Result<Self> {
        let reward = crate::dice::pseudo_reward_exact(expert_occ, &data_occ)?;
        let initial_dist = mdp.initial_dist().to_vec();
        Self::new(reward, initial_dist, data_occ, mdp, cfg)
    }

    pub fn reward(&self) -> &PseudoReward {
        &self.reward
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn data_occ(&self) -> &OccupancyMeasure {
        &self.data_occ
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    pub fn cfg(&self) -> &DiceConfig {
        &self.cfg
    }

    pub fn n_states(&self) -> usize {
        self.mdp.n_states()
    }

    pub fn advantage(&self, nu: &PseudoValue) -> Result<SaTable> {
        advantage(nu, &self.reward, &self.mdp)
    }

    fn check_nu(&self, nu: &PseudoValue) -> Result<()> {
        if nu.len() != self.mdp.n_states() {
            return Err(CoreError::DimensionMismatch(format!(
                "nu has {} states, MDP has {}",
                nu.len(),
                self.mdp.n_states()
            )));
        }
        Ok(())
    }

    /// L(nu), evaluated with max-subtracted log-sum-exp over the data
    /// support.
    pub fn loss(&self, nu: &PseudoValue) -> Result<f64> {
        self.check_nu(nu)?;
        let scale = 1.0 + self.cfg.alpha;
        let adv = self.advantage(nu)?;
        let mut max_x = f64::NEG_INFINITY;
        for (s, a, value) in adv.iter_supported() {
            let mass = self.data_occ.get(s, a);
            if mass <= 0.0 {
                continue;
            }
            max_x = max_x.max(value / scale);
        }
        if max_x == f64::NEG_INFINITY {
            return Err(CoreError::EmptySupport("loss support is empty".into()));
        }
        let mut sum = 0.0;
        for (s, a, value) in adv.iter_supported() {
            let mass = self.data_occ.get(s, a);
            if mass <= 0.0 {
                continue;
            }
            let term = mass * f64::exp(value / scale - max_x);
            if !term.is_finite() {
                return Err(CoreError::NonFinite {
                    context: "dice loss".into(),
                    state: s,
                    action: a,
                });
            }
            sum += term;
        }
        let linear: f64 = self
            .initial_dist
            .iter()
            .zip(nu.values())
            .map(|(m, v)| m * v)
            .sum();
        let loss = (1.0 - self.cfg.gamma) * linear + scale * (max_x + sum.ln());
        if !loss.is_finite() {
            return Err(CoreError::NonFinite {
                context: "dice loss".into(),
                state: 0,
                action: 0,
            });
        }
        Ok(loss)
    }

    /// Analytic gradient of L:
    /// (1 - gamma) mu + sum_{s,a} p(s,a) (gamma P(.|s,a) - e_s), where p is
    /// the softmax distribution dU(s,a) exp(A/(1+alpha)) / Z.
    pub fn gradient(&self, nu: &PseudoValue) -> Result<Vec<f64>> {
        Ok(self.loss_and_gradient(nu)?.1)
    }

    /// Computes loss and gradient in one pass over the support.
    pub fn loss_and_gradient(&self, nu: &PseudoValue) -> Result<(f64, Vec<f64>)> {
        self.check_nu(nu)?;
        let scale = 1.0 + self.cfg.alpha;
        let gamma = self.cfg.gamma;
        let adv = self.advantage(nu)?;

        let mut max_x = f64::NEG_INFINITY;
        for (s, a, value) in adv.iter_supported() {
            if self.data_occ.get(s, a) > 0.0 {
                max_x = max_x.max(value / scale);
            }
        }
        if max_x == f64::NEG_INFINITY {
            return Err(CoreError::EmptySupport("loss support is empty".into()));
        }

        let mut z = 0.0;
        let mut grad: Vec<f64> = self
            .initial_dist
            .iter()
            .map(|m| (1.0 - gamma) * m)
            .collect();
        let mut weighted = vec![0.0; self.mdp.n_states() * self.mdp.n_actions()];
        for (s, a, value) in adv.iter_supported() {
            let mass = self.data_occ.get(s, a);
            if mass <= 0.0 {
                continue;
            }
            let term = mass * f64::exp(value / scale - max_x);
            if !term.is_finite() {
                return Err(CoreError::NonFinite {
                    context: "dice gradient".into(),
                    state: s,
                    action: a,
                });
            }
            weighted[crate::types::sa_index(s, a, self.mdp.n_actions())] = term;
            z += term;
        }
        for (s, a, _) in adv.iter_supported() {
            let p = weighted[crate::types::sa_index(s, a, self.mdp.n_actions())] / z;
            if p == 0.0 {
                continue;
            }
            grad[s] -= p;
            for (s_next, &prob) in self.mdp.transition_row(s, a).iter().enumerate() {
                if prob > 0.0 {
                    grad[s_next] += gamma * p * prob;
                }
            }
        }

        let linear: f64 = self
            .initial_dist
            .iter()
            .zip(nu.values())
            .map(|(m, v)| m * v)
            .sum();
        let loss = (1.0 - gamma) * linear + scale * (max_x + z.ln());
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(CoreError::NonFinite {
                context: "dice loss/gradient".into(),
                state: 0,
                action: 0,
            });
        }
        Ok((loss, grad))
    }

    /// Density ratio w = exp(A_nu / (1 + alpha)) on the reward support.
    /// Advantages beyond +/- 50 (1 + alpha) are clipped and counted.
    pub fn density_ratio(&self, nu: &PseudoValue) -> Result<DensityRatio> {
        let scale = 1.0 + self.cfg.alpha;
        let clip = ADVANTAGE_CLIP_SCALE * scale;
        let adv = self.advantage(nu)?;
        let mut clip_count = 0usize;
        let ratio = adv.map(|value| {
            let clipped = value.clamp(-clip, clip);
            f64::exp(clipped / scale)
        });
        for (_, _, value) in adv.iter_supported() {
            if value.abs() > clip {
                clip_count += 1;
            }
        }
        if clip_count > 0 {
            log::debug!("density ratio clipped {clip_count} advantages");
        }
        DensityRatio::new(ratio, clip_count)
    }

    /// One gradient-descent step from `nu` with step size `eta`.
    pub fn gd_step(&self, nu: &PseudoValue, eta: f64) -> Result<GdStep> {
        let (loss, grad) = self.loss_and_gradient(nu)?;
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let next: Vec<f64> = nu
            .values()
            .iter()
            .zip(&grad)
            .map(|(v, g)| v - eta * g)
            .collect();
        Ok(GdStep {
            next: PseudoValue::new(next)?,
            loss,
            grad_norm,
        })
    }

    /// Plain gradient descent for `cfg.iterations` steps.
    ///
    /// Records the initial point, every `record_every`-th iterate, and the
    /// final one. A step size above 1 / L_f is allowed but logged, since
    /// the descent guarantee only covers eta <= 1 / L_f.
    pub fn optimize_nu(&self, nu0: &PseudoValue, record_every: usize) -> Result<OptTrace> {
        self.check_nu(nu0)?;
        let eta = self.cfg.effective_step_size();
        let safe = 1.0 / self.cfg.smoothness_constant();
        if eta > safe * (1.0 + 1e-12) {
            log::warn!("step size {eta} exceeds 1/L_f = {safe}; descent not guaranteed");
        }
        let stride = record_every.max(1);
        let total = self.cfg.iterations;
        let mut records = Vec::with_capacity(total / stride + 2);
        let mut nu = nu0.clone();
        for iteration in 0..total {
            let step = self.gd_step(&nu, eta).map_err(|e| match e {
                CoreError::NonFinite { .. } => CoreError::DivergedAt {
                    what: "loss/gradient".into(),
                    iteration,
                },
                other => other,
            })?;
            if iteration % stride == 0 {
                records.push(OptRecord {
                    iteration,
                    nu: nu.clone(),
                    loss: step.loss,
                    grad_norm: step.grad_norm,
                });
            }
            nu = step.next;
        }
        let (loss, grad) = self.loss_and_gradient(&nu)?;
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        records.push(OptRecord {
            iteration: total,
            nu,
            loss,
            grad_norm,
        });
        Ok(OptTrace { records })
    }

    /// Gradient descent until the gradient norm drops below `grad_tol` or
    /// `max_iters` steps elapse. Returns the final iterate and the number
    /// of steps taken.
    pub fn optimize_until(
        &self,
        nu0: &PseudoValue,
        max_iters: usize,
        grad_tol: f64,
    ) -> Result<(PseudoValue, usize)> {
        self.check_nu(nu0)?;
        let eta = self.cfg.effective_step_size();
        let mut nu = nu0.clone();
        for iteration in 0..max_iters {
            let step = self.gd_step(&nu, eta).map_err(|e| match e {
                CoreError::NonFinite { .. } => CoreError::DivergedAt {
                    what: "loss/gradient".into(),
                    iteration,
                },
                other => other,
            })?;
            if step.grad_norm < grad_tol {
                return Ok((nu, iteration));
            }
            nu = step.next;
        }
        Ok((nu, max_iters))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dice::{smoothness_constant, DiceConfig};
    use crate::mdp::{occupancy_measure, Policy};
    use crate::rng::derive_rng;
    use crate::types::sa_index;
    use rand::Rng;

    pub(crate) fn random_problem(
        seed: u64,
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        alpha: f64,
    ) -> DiceProblem {
        let mut rng = derive_rng(seed, "dice-test", "instance", 0);
        let mut transitions = vec![vec![vec![0.0; n_states]; n_actions]; n_states];
        for s in 0..n_states {
            for a in 0..n_actions {
                let mut row: Vec<f64> = (0..n_states)
                    .map(|_| -f64::ln(1.0 - rng.gen::<f64>()))
                    .collect();
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= sum);
                transitions[s][a] = row;
            }
        }
        let mut mu: Vec<f64> = (0..n_states)
            .map(|_| -f64::ln(1.0 - rng.gen::<f64>()))
            .collect();
        let s: f64 = mu.iter().sum();
        mu.iter_mut().for_each(|v| *v /= s);
        let mdp = TabularMdp::new(n_states, n_actions, transitions, mu, gamma, None).unwrap();

        let mut d: Vec<f64> = (0..n_states * n_actions)
            .map(|_| -f64::ln(1.0 - rng.gen::<f64>()))
            .collect();
        let mass: f64 = d.iter().sum();
        d.iter_mut().for_each(|v| *v /= mass);
        let data_occ = OccupancyMeasure::new(n_states, n_actions, d).unwrap();

        let reward_values: Vec<f64> = (0..n_states * n_actions)
            .map(|_| rng.gen::<f64>() * 4.0 - 2.0)
            .collect();
        let reward =
            PseudoReward::new(SaTable::full(n_states, n_actions, reward_values).unwrap());

        let cfg = DiceConfig::new(alpha, gamma, None, 100).unwrap();
        DiceProblem::new(reward, mdp.initial_dist().to_vec(), data_occ, mdp, cfg).unwrap()
    }

    fn random_nu(seed: u64, n: usize) -> PseudoValue {
        let mut rng = derive_rng(seed, "dice-test", "nu", 0);
        PseudoValue::new((0..n).map(|_| rng.gen::<f64>() * 10.0 - 5.0).collect()).unwrap()
    }

    /// Independent oracle: evaluates the defining expression term by term,
    /// without the log-sum-exp rearrangement, using Kahan summation.
    fn loss_oracle(problem: &DiceProblem, nu: &PseudoValue) -> f64 {
        let cfg = problem.cfg();
        let scale = 1.0 + cfg.alpha;
        let mdp = problem.mdp();
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                let mass = problem.data_occ().get(s, a);
                if mass <= 0.0 {
                    continue;
                }
                let r = problem.reward().table().get(s, a).unwrap();
                let mut next = 0.0;
                for s2 in 0..mdp.n_states() {
                    next += mdp.transition_row(s, a)[s2] * nu.values()[s2];
                }
                let adv = r + cfg.gamma * next - nu.values()[s];
                let term = mass * f64::exp(adv / scale);
                let y = term - comp;
                let t = sum + y;
                comp = (t - sum) - y;
                sum = t;
            }
        }
        let linear: f64 = problem
            .initial_dist()
            .iter()
            .zip(nu.values())
            .map(|(m, v)| m * v)
            .sum();
        (1.0 - cfg.gamma) * linear + scale * sum.ln()
    }

    #[test]
    fn zero_nu_zero_reward_gives_zero_loss() {
        let base = random_problem(1, 3, 2, 0.9, 0.1);
        let reward = PseudoReward::new(SaTable::constant(3, 2, 0.0));
        let problem = DiceProblem::new(
            reward,
            base.initial_dist().to_vec(),
            base.data_occ().clone(),
            base.mdp().clone(),
            *base.cfg(),
        )
        .unwrap();
        let loss = problem.loss(&PseudoValue::zeros(3)).unwrap();
        assert!(loss.abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn loss_is_shift_invariant() {
        let problem = random_problem(2, 5, 3, 0.95, 0.05);
        let nu = random_nu(3, 5);
        let base = problem.loss(&nu).unwrap();
        for c in [0.1, -3.0, 25.0] {
            let shifted = problem.loss(&nu.shifted(c)).unwrap();
            assert!(
                (shifted - base).abs() <= 1e-9 * (1.0 + c.abs()),
                "shift {c}: {base} vs {shifted}"
            );
        }
    }

    #[test]
    fn loss_matches_term_by_term_oracle() {
        for seed in 0..5 {
            let problem = random_problem(10 + seed, 3, 2, 0.9, 0.05);
            let nu = random_nu(20 + seed, 3);
            let got = problem.loss(&nu).unwrap();
            let want = loss_oracle(&problem, &nu);
            assert!(
                (got - want).abs() <= 1e-11 * (1.0 + want.abs()),
                "seed {seed}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn gradient_is_orthogonal_to_ones() {
        let problem = random_problem(4, 6, 3, 0.99, 0.01);
        for seed in 0..100 {
            let nu = random_nu(100 + seed, 6);
            let grad = problem.gradient(&nu).unwrap();
            let dot: f64 = grad.iter().sum();
            assert!(dot.abs() <= 1e-8, "seed {seed}: <grad, 1> = {dot}");
        }
    }

    #[test]
    fn gradient_closed_form_at_zero_with_uniform_data() {
        // With nu = 0, r = 0 and uniform dU, the softmax weights equal dU.
        let n_states = 3;
        let n_actions = 2;
        let base = random_problem(5, n_states, n_actions, 0.8, 0.2);
        let uniform = OccupancyMeasure::new(
            n_states,
            n_actions,
            vec![1.0 / 6.0; 6],
        )
        .unwrap();
        let problem = DiceProblem::new(
            PseudoReward::new(SaTable::constant(n_states, n_actions, 0.0)),
            base.initial_dist().to_vec(),
            uniform.clone(),
            base.mdp().clone(),
            *base.cfg(),
        )
        .unwrap();
        let grad = problem.gradient(&PseudoValue::zeros(n_states)).unwrap();
        let mut want: Vec<f64> = problem
            .initial_dist()
            .iter()
            .map(|m| (1.0 - 0.8) * m)
            .collect();
        for s in 0..n_states {
            for a in 0..n_actions {
                let p = uniform.get(s, a);
                want[s] -= p;
                for (s2, &prob) in problem.mdp().transition_row(s, a).iter().enumerate() {
                    want[s2] += 0.8 * p * prob;
                }
            }
        }
        for (g, w) in grad.iter().zip(&want) {
            assert!((g - w).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let problem = random_problem(6, 4, 2, 0.9, 0.05);
        let nu = random_nu(7, 4);
        let grad = problem.gradient(&nu).unwrap();
        let h = 1e-5;
        for i in 0..4 {
            let mut plus = nu.values().to_vec();
            plus[i] += h;
            let mut minus = nu.values().to_vec();
            minus[i] -= h;
            let fd = (problem.loss(&PseudoValue::new(plus).unwrap()).unwrap()
                - problem.loss(&PseudoValue::new(minus).unwrap()).unwrap())
                / (2.0 * h);
            let rel = (grad[i] - fd).abs() / fd.abs().max(1e-6);
            assert!(rel <= 1e-5, "coord {i}: analytic {} vs fd {fd}", grad[i]);
        }
    }

    #[test]
    fn loss_is_convex_along_chords() {
        let problem = random_problem(8, 5, 2, 0.9, 0.05);
        for seed in 0..100 {
            let x = random_nu(500 + seed, 5);
            let y = random_nu(600 + seed, 5);
            let lx = problem.loss(&x).unwrap();
            let ly = problem.loss(&y).unwrap();
            for lambda in [0.25, 0.5, 0.75] {
                let mid = PseudoValue::new(
                    x.values()
                        .iter()
                        .zip(y.values())
                        .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                        .collect(),
                )
                .unwrap();
                let lm = problem.loss(&mid).unwrap();
                assert!(
                    lm <= lambda * lx + (1.0 - lambda) * ly + 1e-10,
                    "chord violated at seed {seed}, lambda {lambda}"
                );
            }
        }
    }

    #[test]
    fn gradient_is_lipschitz_with_lemma_constant() {
        let gamma = 0.9;
        let alpha = 0.05;
        let problem = random_problem(9, 5, 3, gamma, alpha);
        let lf = smoothness_constant(gamma, alpha);
        for seed in 0..100 {
            let x = random_nu(700 + seed, 5);
            let y = random_nu(800 + seed, 5);
            let gx = problem.gradient(&x).unwrap();
            let gy = problem.gradient(&y).unwrap();
            let num: f64 = gx
                .iter()
                .zip(&gy)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let den = x.l2_distance(&y);
            assert!(
                num <= lf * den * (1.0 + 1e-8),
                "seed {seed}: ratio {}",
                num / den
            );
        }
    }

    #[test]
    fn descent_is_monotone_at_safe_step() {
        let problem = random_problem(11, 6, 2, 0.95, 0.1);
        let trace = problem
            .optimize_nu(&random_nu(12, 6), 1)
            .unwrap();
        for pair in trace.records.windows(2) {
            assert!(
                pair[1].loss <= pair[0].loss + 1e-12,
                "loss rose from {} to {}",
                pair[0].loss,
                pair[1].loss
            );
        }
    }

    #[test]
    fn optimizer_is_stationary_at_minimizer() {
        let problem = random_problem(13, 4, 2, 0.9, 0.1);
        let (star, _) = problem
            .optimize_until(&PseudoValue::zeros(4), 2_000_000, 1e-13)
            .unwrap();
        let short = DiceProblem::new(
            problem.reward().clone(),
            problem.initial_dist().to_vec(),
            problem.data_occ().clone(),
            problem.mdp().clone(),
            problem.cfg().with_iterations(50),
        )
        .unwrap();
        let trace = short.optimize_nu(&star, 1).unwrap();
        assert!(trace.final_nu().linf_distance(&star) < 1e-9);
    }

    #[test]
    fn final_loss_reaches_oracle_optimum() {
        let problem = random_problem(14, 3, 2, 0.9, 0.05);
        // Oracle optimum: long runs from several starts agree by convexity.
        let mut best = f64::INFINITY;
        for seed in 0..3 {
            let start = if seed == 0 {
                PseudoValue::zeros(3)
            } else {
                random_nu(900 + seed, 3)
            };
            let (nu, _) = problem.optimize_until(&start, 1_000_000, 1e-12).unwrap();
            best = best.min(problem.loss(&nu).unwrap());
        }
        let long = DiceProblem::new(
            problem.reward().clone(),
            problem.initial_dist().to_vec(),
            problem.data_occ().clone(),
            problem.mdp().clone(),
            problem.cfg().with_iterations(20_000),
        )
        .unwrap();
        let trace = long.optimize_nu(&PseudoValue::zeros(3), 1000).unwrap();
        assert!(
            trace.final_record().loss <= best + 1e-8,
            "final {} vs oracle {best}",
            trace.final_record().loss
        );
    }

    #[test]
    fn ratio_is_one_for_zero_advantage() {
        let base = random_problem(15, 3, 2, 0.9, 0.1);
        // gamma = 0 and nu = 0 make A = r; with r = 0 the ratio is 1.
        let mdp = TabularMdp::new(
            3,
            2,
            base.mdp().transitions().clone(),
            base.mdp().initial_dist().to_vec(),
            0.0,
            None,
        )
        .unwrap();
        let cfg = DiceConfig::new(0.1, 0.0, None, 10).unwrap();
        let problem = DiceProblem::new(
            PseudoReward::new(SaTable::constant(3, 2, 0.0)),
            mdp.initial_dist().to_vec(),
            base.data_occ().clone(),
            mdp,
            cfg,
        )
        .unwrap();
        let ratio = problem.density_ratio(&PseudoValue::zeros(3)).unwrap();
        for (_, _, w) in ratio.table().iter_supported() {
            assert_eq!(w, 1.0);
        }
        assert_eq!(ratio.clip_count, 0);
    }

    #[test]
    fn ratio_shift_scales_uniformly() {
        let problem = random_problem(16, 4, 2, 0.9, 0.05);
        let nu = random_nu(17, 4);
        let base = problem.density_ratio(&nu).unwrap();
        let c = 1.7;
        let shifted = problem.density_ratio(&nu.shifted(c)).unwrap();
        let factor = f64::exp((0.9 - 1.0) * c / 1.05);
        for ((_, _, b), (_, _, s)) in base
            .table()
            .iter_supported()
            .zip(shifted.table().iter_supported())
        {
            assert!((s - b * factor).abs() <= 1e-12 * (1.0 + b));
        }
    }

    #[test]
    fn ratio_matches_term_by_term_oracle() {
        let problem = random_problem(18, 3, 3, 0.85, 0.2);
        let nu = random_nu(19, 3);
        let ratio = problem.density_ratio(&nu).unwrap();
        for s in 0..3 {
            for a in 0..3 {
                let r = problem.reward().table().get(s, a).unwrap();
                let mut next = 0.0;
                for s2 in 0..3 {
                    next += problem.mdp().transition_row(s, a)[s2] * nu.values()[s2];
                }
                let adv = r + 0.85 * next - nu.values()[s];
                let want = f64::exp(adv / 1.2);
                let got = ratio.table().get(s, a).unwrap();
                assert!((got - want).abs() <= 1e-12 * (1.0 + want));
            }
        }
    }

    #[test]
    fn ratio_clipping_guards_overflow() {
        let base = random_problem(20, 2, 2, 0.9, 0.0);
        let reward = PseudoReward::new(SaTable::constant(2, 2, 500.0));
        let problem = DiceProblem::new(
            reward,
            base.initial_dist().to_vec(),
            base.data_occ().clone(),
            base.mdp().clone(),
            *base.cfg(),
        )
        .unwrap();
        let ratio = problem.density_ratio(&PseudoValue::zeros(2)).unwrap();
        assert_eq!(ratio.clip_count, 4);
        for (_, _, w) in ratio.table().iter_supported() {
            assert!(w.is_finite());
            assert!((w - f64::exp(50.0)).abs() < 1e-9 * f64::exp(50.0));
        }
    }

    #[test]
    fn masked_pairs_are_ignored_by_the_loss() {
        // Zero out one data-occupancy entry; the reward may be undefined
        // there and the loss must not touch it.
        let n_states = 2;
        let n_actions = 2;
        let base = random_problem(21, n_states, n_actions, 0.9, 0.1);
        let mut d = base.data_occ().values().to_vec();
        d[sa_index(1, 1, n_actions)] = 0.0;
        let mass: f64 = d.iter().sum();
        d.iter_mut().for_each(|v| *v /= mass);
        let data_occ = OccupancyMeasure::new(n_states, n_actions, d).unwrap();
        let support = data_occ.support_mask();
        let reward = PseudoReward::new(
            SaTable::with_support(
                n_states,
                n_actions,
                vec![0.5, -0.2, 0.3, f64::NAN],
                support,
            )
            .unwrap(),
        );
        let problem = DiceProblem::new(
            reward,
            base.initial_dist().to_vec(),
            data_occ,
            base.mdp().clone(),
            *base.cfg(),
        )
        .unwrap();
        let nu = random_nu(22, n_states);
        assert!(problem.loss(&nu).unwrap().is_finite());
        assert!(problem.gradient(&nu).unwrap().iter().all(|g| g.is_finite()));
    }

    #[test]
    fn jsonl_trace_export_includes_errors() {
        let problem = random_problem(23, 3, 2, 0.9, 0.1);
        let short = DiceProblem::new(
            problem.reward().clone(),
            problem.initial_dist().to_vec(),
            problem.data_occ().clone(),
            problem.mdp().clone(),
            problem.cfg().with_iterations(4),
        )
        .unwrap();
        let trace = short.optimize_nu(&PseudoValue::zeros(3), 1).unwrap();
        let errs: Vec<f64> = trace.records.iter().map(|r| r.loss).collect();
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf, Some(&errs)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), trace.records.len());
        assert!(text.lines().all(|l| l.contains("ratio_error")));
    }
}
