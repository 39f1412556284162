//! Network utilities of the rate vector and their gradients.
//!
//! Both utilities are separable, `u(r) = Σ_j u_j(r_j)`, which the bandwidth
//! optimizer exploits for cheap line searches.

/// Relative clamp applied to the M/M/1 service margin in the delay gradient.
pub const DELAY_CLAMP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub enum UtilitySpec {
    /// Minus the traffic-weighted M/M/1 delay, `-Σ_j λ_j / (r_j - λ_j)^+`
    /// with `λ_j` the offered load in bits/s.
    Delay {
        /// Packet arrival rates (packets/s).
        arrivals: Vec<f64>,
        /// Mean packet length (bits).
        packet_bits: f64,
    },
    /// `d + Σ_j c_j r_j`.
    WeightedSumRate { weights: Vec<f64>, offset: f64 },
}

impl UtilitySpec {
    pub fn delay(arrivals: Vec<f64>, packet_bits: f64) -> Self {
        UtilitySpec::Delay { arrivals, packet_bits }
    }

    pub fn weighted_sum_rate(weights: Vec<f64>) -> Self {
        UtilitySpec::WeightedSumRate { weights, offset: 0.0 }
    }

    pub fn n_devices(&self) -> usize {
        match self {
            UtilitySpec::Delay { arrivals, .. } => arrivals.len(),
            UtilitySpec::WeightedSumRate { weights, .. } => weights.len(),
        }
    }

    /// Per-device term `u_j(r_j)`; `-inf` marks an unstable queue.
    #[inline]
    pub fn term(&self, j: usize, r: f64) -> f64 {
        match self {
            UtilitySpec::Delay { arrivals, packet_bits } => {
                let load = arrivals[j] * packet_bits;
                let margin = r - load;
                if margin > 0.0 {
                    -load / margin
                } else {
                    f64::NEG_INFINITY
                }
            }
            UtilitySpec::WeightedSumRate { weights, .. } => weights[j] * r,
        }
    }

    /// Exact derivative of `u_j`; `+inf` where the delay term is infinite.
    #[inline]
    pub fn term_derivative(&self, j: usize, r: f64) -> f64 {
        match self {
            UtilitySpec::Delay { arrivals, packet_bits } => {
                let load = arrivals[j] * packet_bits;
                let margin = r - load;
                if margin > 0.0 {
                    load / (margin * margin)
                } else {
                    f64::INFINITY
                }
            }
            UtilitySpec::WeightedSumRate { weights, .. } => weights[j],
        }
    }

    pub fn value(&self, r: &[f64]) -> f64 {
        let base = match self {
            UtilitySpec::WeightedSumRate { offset, .. } => *offset,
            UtilitySpec::Delay { .. } => 0.0,
        };
        r.iter().enumerate().fold(base, |acc, (j, &rj)| acc + self.term(j, rj))
    }

    /// Gradient used to linearize the utility. For the delay utility the
    /// service margin `μ_j - a_j` (packets/s) is clamped below at
    /// `DELAY_CLAMP · a_j`, which keeps starved devices at large but finite
    /// weight.
    pub fn gradient(&self, r: &[f64]) -> Vec<f64> {
        match self {
            UtilitySpec::Delay { arrivals, packet_bits } => {
                delay_gradient(r, arrivals, *packet_bits, DELAY_CLAMP)
            }
            UtilitySpec::WeightedSumRate { weights, .. } => weights.clone(),
        }
    }

    /// Devices whose queue would be unstable at rates `r`.
    pub fn infeasible_devices(&self, r: &[f64]) -> Vec<usize> {
        (0..r.len()).filter(|&j| self.term(j, r[j]) == f64::NEG_INFINITY).collect()
    }

    /// Offered loads in bits/s, when the utility constrains rates.
    pub fn loads(&self) -> Option<Vec<f64>> {
        match self {
            UtilitySpec::Delay { arrivals, packet_bits } => {
                Some(arrivals.iter().map(|a| a * packet_bits).collect())
            }
            UtilitySpec::WeightedSumRate { .. } => None,
        }
    }

    /// Nondecreasing in every coordinate.
    pub fn is_monotone(&self) -> bool {
        match self {
            UtilitySpec::Delay { .. } => true,
            UtilitySpec::WeightedSumRate { weights, .. } => weights.iter().all(|&c| c >= 0.0),
        }
    }
}

/// Traffic-weighted M/M/1 delay utility of rates `r` (bits/s).
pub fn delay_utility(r: &[f64], arrivals: &[f64], packet_bits: f64) -> f64 {
    r.iter()
        .zip(arrivals)
        .map(|(&rj, &a)| {
            let margin = rj / packet_bits - a;
            if margin > 0.0 {
                -a / margin
            } else {
                f64::NEG_INFINITY
            }
        })
        .sum()
}

/// `c_j = a_j / max(μ_j - a_j, clamp · a_j)^2 / L`.
pub fn delay_gradient(r: &[f64], arrivals: &[f64], packet_bits: f64, clamp: f64) -> Vec<f64> {
    r.iter()
        .zip(arrivals)
        .map(|(&rj, &a)| {
            let margin = (rj / packet_bits - a).max(clamp * a);
            a / (margin * margin) / packet_bits
        })
        .collect()
}

/// Per-AP energy cost `-price · Σ_i (P_i + 1{P_i > 0} C_i)`.
pub fn energy_cost(power: &[f64], price: f64, maintenance: &[f64]) -> f64 {
    let total: f64 = power
        .iter()
        .zip(maintenance)
        .map(|(&p, &c)| p + if p > 0.0 { c } else { 0.0 })
        .sum();
    -price * total
}
