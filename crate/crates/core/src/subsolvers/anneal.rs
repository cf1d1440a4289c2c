//! Single-bit-flip simulated annealing on a maximization QUBO, standing in
//! for an Ising processing unit.

use rand::Rng;

use crate::qubo::Qubo;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    /// Geometric cooling from the largest single-flip gain down to 0.5.
    Auto,
    Geometric { t_start: f64, t_end: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnealParams {
    pub sweeps: usize,
    pub restarts: usize,
    pub schedule: Schedule,
}

impl Default for AnnealParams {
    fn default() -> Self {
        Self {
            sweeps: 2000,
            restarts: 8,
            schedule: Schedule::Auto,
        }
    }
}

impl AnnealParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.sweeps == 0 || self.restarts == 0 {
            return Err("sweeps and restarts must be at least 1".into());
        }
        if let Schedule::Geometric { t_start, t_end } = self.schedule {
            if !(t_start > 0.0 && t_end > 0.0 && t_end <= t_start) {
                return Err(format!("bad temperatures {t_start} -> {t_end}"));
            }
        }
        Ok(())
    }

    fn temperatures(&self, q: &Qubo) -> (f64, f64) {
        match self.schedule {
            Schedule::Geometric { t_start, t_end } => (t_start, t_end),
            Schedule::Auto => {
                let adj = q.couplings();
                let hottest = (0..q.var_count())
                    .map(|v| {
                        let l = q.linear().get(&v).copied().unwrap_or(0).abs();
                        l + adj[v].iter().map(|&(_, c)| c.abs()).sum::<i64>()
                    })
                    .max()
                    .unwrap_or(1)
                    .max(1) as f64;
                (hottest, 0.5f64.min(hottest))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnealResult {
    pub bits: Vec<bool>,
    pub value: i64,
}

/// Best assignment seen over all restarts. Deterministic for a given rng state.
pub fn qubo_anneal<R: Rng + ?Sized>(q: &Qubo, params: &AnnealParams, rng: &mut R) -> AnnealResult {
    let n = q.var_count();
    if n == 0 {
        return AnnealResult {
            bits: Vec::new(),
            value: q.constant(),
        };
    }
    let adj = q.couplings();
    let linear: Vec<i64> = (0..n).map(|v| q.linear().get(&v).copied().unwrap_or(0)).collect();
    let (t_start, t_end) = params.temperatures(q);
    let sweeps = params.sweeps.max(1);
    let ratio = if sweeps > 1 {
        (t_end / t_start).powf(1.0 / (sweeps - 1) as f64)
    } else {
        1.0
    };

    let mut best = AnnealResult {
        bits: vec![false; n],
        value: q.constant(),
    };
    for _ in 0..params.restarts.max(1) {
        let mut bits: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        let mut value = q.evaluate(&bits);
        // field[v] = l_v + sum_w q_vw b_w
        let mut field = linear.clone();
        for v in 0..n {
            for &(w, c) in &adj[v] {
                if bits[w] {
                    field[v] += c;
                }
            }
        }
        if value > best.value {
            best = AnnealResult {
                bits: bits.clone(),
                value,
            };
        }
        let mut temp = t_start;
        for _ in 0..sweeps {
            for v in 0..n {
                let sign = if bits[v] { -1 } else { 1 };
                let delta = sign * field[v];
                let accept = delta >= 0 || rng.gen::<f64>() < (delta as f64 / temp).exp();
                if !accept {
                    continue;
                }
                bits[v] = !bits[v];
                value += delta;
                for &(w, c) in &adj[v] {
                    field[w] += sign * c;
                }
                if value > best.value {
                    best.value = value;
                    best.bits.copy_from_slice(&bits);
                }
            }
            temp *= ratio;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::{for_each_assignment, VarRole};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frustrated() -> Qubo {
        let mut q = Qubo::new(0);
        let vars: Vec<usize> = (0..6).map(|arc| q.add_var(VarRole::Interdict { arc })).collect();
        for (i, &v) in vars.iter().enumerate() {
            q.add_linear(v, 3 - i as i64);
            for &w in &vars[i + 1..] {
                q.add_quadratic(v, w, if (v + w) % 3 == 0 { 2 } else { -3 });
            }
        }
        q
    }

    #[test]
    fn finds_small_optimum() {
        let q = frustrated();
        let mut opt = i64::MIN;
        for_each_assignment(&q, |_, v| opt = opt.max(v)).unwrap();
        let params = AnnealParams {
            sweeps: 200,
            restarts: 4,
            schedule: Schedule::Auto,
        };
        let r = qubo_anneal(&q, &params, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(r.value, opt);
        assert_eq!(q.evaluate(&r.bits), r.value);
    }

    #[test]
    fn empty_qubo() {
        let mut q = Qubo::new(0);
        q.add_constant(4);
        let r = qubo_anneal(&q, &AnnealParams::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(r.bits.is_empty());
        assert_eq!(r.value, 4);
    }

    #[test]
    fn deterministic_per_seed() {
        let q = frustrated();
        let p = AnnealParams {
            sweeps: 50,
            restarts: 2,
            schedule: Schedule::Geometric {
                t_start: 5.0,
                t_end: 0.1,
            },
        };
        let a = qubo_anneal(&q, &p, &mut ChaCha8Rng::seed_from_u64(9));
        let b = qubo_anneal(&q, &p, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn params_validation() {
        assert!(AnnealParams::default().validate().is_ok());
        let bad = AnnealParams {
            sweeps: 0,
            ..AnnealParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
