//! Value iteration on Tiger's one-dimensional belief MDP. The belief is the
//! probability the tiger sits behind the left door; listening branches on
//! the two observations, opening a door resets the belief to uniform (the
//! tiger is resampled). Used as the in-repo optimality reference.

/// Tiger actions in oracle order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TigerAction {
    Listen,
    OpenLeft,
    OpenRight,
}

#[derive(Debug, Clone)]
pub struct TigerOracle {
    /// Optimal value at the uniform belief.
    pub value_at_uniform: f64,
    /// Value per belief-grid node.
    pub values: Vec<f64>,
    /// Greedy action per belief-grid node.
    pub greedy: Vec<TigerAction>,
    pub iterations: usize,
    pub residual: f64,
}

struct BeliefMdp {
    accuracy: f64,
    discount: f64,
    grid: Vec<f64>,
}

impl BeliefMdp {
    fn interpolate(&self, values: &[f64], p: f64) -> f64 {
        let n = self.grid.len();
        let x = p.clamp(0.0, 1.0) * (n - 1) as f64;
        let lo = (x.floor() as usize).min(n - 2);
        let frac = x - lo as f64;
        values[lo] * (1.0 - frac) + values[lo + 1] * frac
    }

    /// Action values at belief `p` = P(tiger left).
    fn action_values(&self, values: &[f64], p: f64) -> [f64; 3] {
        let acc = self.accuracy;
        // Listening: hear-left arrives with the marginal probability under
        // the current belief; the posterior follows Bayes' rule.
        let p_hear_left = acc * p + (1.0 - acc) * (1.0 - p);
        let p_hear_right = 1.0 - p_hear_left;
        let post_left = acc * p / p_hear_left;
        let post_right = (1.0 - acc) * p / p_hear_right;
        let listen = -1.0
            + self.discount
                * (p_hear_left * self.interpolate(values, post_left)
                    + p_hear_right * self.interpolate(values, post_right));
        let v_uniform = self.interpolate(values, 0.5);
        let open_left = p * -100.0 + (1.0 - p) * 10.0 + self.discount * v_uniform;
        let open_right = p * 10.0 + (1.0 - p) * -100.0 + self.discount * v_uniform;
        [listen, open_left, open_right]
    }
}

/// Run value iteration to a Bellman residual below `tolerance`.
pub fn tiger_value_iteration(
    accuracy: f64,
    discount: f64,
    grid_points: usize,
    tolerance: f64,
) -> TigerOracle {
    assert!(accuracy > 0.5 && accuracy <= 1.0);
    assert!((0.0..1.0).contains(&discount), "oracle needs discount < 1");
    assert!(grid_points >= 3);
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| i as f64 / (grid_points - 1) as f64)
        .collect();
    let mdp = BeliefMdp { accuracy, discount, grid };

    let mut values = vec![0.0; grid_points];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let max_iterations = 200_000;
    while residual > tolerance && iterations < max_iterations {
        let next: Vec<f64> = mdp
            .grid
            .iter()
            .map(|&p| {
                let av = mdp.action_values(&values, p);
                av.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        residual = values
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        iterations += 1;
    }

    let greedy: Vec<TigerAction> = mdp
        .grid
        .iter()
        .map(|&p| {
            let av = mdp.action_values(&values, p);
            let mut best = 0;
            for i in 1..3 {
                if av[i] > av[best] {
                    best = i;
                }
            }
            [TigerAction::Listen, TigerAction::OpenLeft, TigerAction::OpenRight][best]
        })
        .collect();
    let value_at_uniform = mdp.interpolate(&values, 0.5);
    TigerOracle { value_at_uniform, values, greedy, iterations, residual }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_parameters_land_in_the_reference_band() {
        let oracle = tiger_value_iteration(0.85, 0.95, 1001, 1e-8);
        assert!(
            (18.4..=19.6).contains(&oracle.value_at_uniform),
            "V*(uniform) = {}",
            oracle.value_at_uniform
        );
        assert!(oracle.residual <= 1e-8);
    }

    #[test]
    fn myopic_agent_listens_at_uniform() {
        // discount 0: V*(uniform) = max(-1, -45, -45) = -1.
        let oracle = tiger_value_iteration(0.85, 0.0, 101, 1e-12);
        assert!((oracle.value_at_uniform - -1.0).abs() < 1e-9);
        assert_eq!(oracle.greedy[50], TigerAction::Listen);
    }

    #[test]
    fn certainty_opens_the_correct_door() {
        let oracle = tiger_value_iteration(0.85, 0.95, 1001, 1e-8);
        // p = 1: tiger left for sure, open the right door; p = 0 mirrors.
        assert_eq!(*oracle.greedy.last().unwrap(), TigerAction::OpenRight);
        assert_eq!(oracle.greedy[0], TigerAction::OpenLeft);
    }

    #[test]
    fn value_is_symmetric_around_uniform() {
        let oracle = tiger_value_iteration(0.85, 0.95, 1001, 1e-8);
        let n = oracle.values.len();
        for i in 0..n {
            let mirrored = oracle.values[n - 1 - i];
            assert!((oracle.values[i] - mirrored).abs() < 1e-6);
        }
    }
}
