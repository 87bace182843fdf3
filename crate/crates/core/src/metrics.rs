//! Closed-form link metrics for a fixed precoder.
//!
//! All rates are in bits per channel use. The super-common stream is decoded
//! first by every user and removed by perfect SIC before the private stream
//! of the user's own group is decoded.

use alloc::vec::Vec;

use crate::model::{inner, ChannelRealization, GroupLayout, Mode, PrecoderSet, RateAllocation, ReceiverState};
use crate::{Error, Result, C64};

/// Per-user effective noises, rates and minimum MSEs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserMetrics {
    /// `r_{0,n}`: interference plus noise while decoding the super-common stream.
    pub r0: f64,
    /// `r_{p,n}`: interference plus noise after SIC.
    pub rp: f64,
    pub rate_common: f64,
    pub rate_private: f64,
    pub mmse_common: f64,
    pub mmse_private: f64,
}

/// Received amplitudes `h^H p_A` and `h^H p_k` seen by one user.
#[derive(Debug, Clone)]
struct Projections {
    common: f64,
    private: f64,
    aggregate: C64,
    per_group: Vec<C64>,
    own: usize,
}

impl Projections {
    fn new(h: &[C64], p: &PrecoderSet, user: usize, layout: &GroupLayout) -> Result<Self> {
        if h.len() != p.num_antennas() {
            return Err(Error::DimensionMismatch("channel and precoder antenna counts differ"));
        }
        if p.num_groups() != layout.num_groups() {
            return Err(Error::DimensionMismatch("precoder and layout group counts differ"));
        }
        if user >= layout.num_users() {
            return Err(Error::DimensionMismatch("user index outside the layout"));
        }
        let coef = p.coefficients();
        Ok(Self {
            common: coef.common,
            private: coef.private,
            aggregate: inner(h, &p.aggregate()),
            per_group: p.private_columns().iter().map(|col| inner(h, col)).collect(),
            own: layout.group_of(user),
        })
    }

    fn r0(&self) -> f64 {
        self.private * self.per_group.iter().map(|z| z.norm_sqr()).sum::<f64>() + 1.0
    }

    fn own_gain(&self) -> f64 {
        self.per_group[self.own].norm_sqr()
    }

    fn rp(&self) -> f64 {
        // Summing the other groups directly keeps rp >= 1 exactly.
        let others: f64 = self
            .per_group
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != self.own)
            .map(|(_, z)| z.norm_sqr())
            .sum();
        self.private * others + 1.0
    }
}

/// `(r_{0,n}, r_{p,n})`.
pub fn effective_noises(h: &[C64], p: &PrecoderSet, user: usize, layout: &GroupLayout) -> Result<(f64, f64)> {
    let proj = Projections::new(h, p, user, layout)?;
    Ok((proj.r0(), proj.rp()))
}

/// `(R_{0,n}, R_{p,n})`.
pub fn user_rates(h: &[C64], p: &PrecoderSet, user: usize, layout: &GroupLayout) -> Result<(f64, f64)> {
    let proj = Projections::new(h, p, user, layout)?;
    let r0 = proj.r0();
    let rp = proj.rp();
    let common = libm::log2(1.0 + proj.common * proj.aggregate.norm_sqr() / r0);
    let private = libm::log2(1.0 + proj.private * proj.own_gain() / rp);
    Ok((common, private))
}

/// `(R_0, [R_1..R_K])`: the super-common rate decodable by everyone and the
/// private rate decodable by every member of each group.
pub fn min_rates(ch: &ChannelRealization, p: &PrecoderSet, layout: &GroupLayout) -> Result<(f64, Vec<f64>)> {
    if ch.num_users() != layout.num_users() {
        return Err(Error::DimensionMismatch("channel and layout user counts differ"));
    }
    let mut common = f64::INFINITY;
    let mut private = alloc::vec![f64::INFINITY; layout.num_groups()];
    for n in 0..layout.num_users() {
        let (r0n, rpn) = user_rates(ch.user(n), p, n, layout)?;
        common = common.min(r0n);
        let k = layout.group_of(n);
        private[k] = private[k].min(rpn);
    }
    Ok((common, private))
}

/// Closed-form MMSE equalizers `(W_n, V_n)`.
pub fn mmse_receivers(h: &[C64], p: &PrecoderSet, user: usize, layout: &GroupLayout) -> Result<(C64, C64)> {
    let proj = Projections::new(h, p, user, layout)?;
    let r0 = proj.r0();
    let w = proj.aggregate.conj() * proj.common / (proj.common * proj.aggregate.norm_sqr() + r0);
    let v = proj.per_group[proj.own].conj() * proj.private / r0;
    Ok((w, v))
}

/// MSEs `(eps_0, eps_p)` for arbitrary equalizers.
pub fn mse_values(
    h: &[C64],
    p: &PrecoderSet,
    user: usize,
    layout: &GroupLayout,
    w: C64,
    v: C64,
) -> Result<(f64, f64)> {
    let proj = Projections::new(h, p, user, layout)?;
    let b = proj.common;
    let c = proj.private;
    let interference = c * proj.per_group.iter().map(|z| z.norm_sqr()).sum::<f64>();

    let eps0 = w.norm_sqr() * (b * proj.aggregate.norm_sqr() + interference + 1.0)
        - 2.0 * (w * proj.aggregate * b).re
        + b;
    let epsp = v.norm_sqr() * (interference + 1.0) - 2.0 * (v * proj.per_group[proj.own] * c).re + c;
    Ok((eps0, epsp))
}

/// Minimum MSEs `(eps_0^min, eps_p^min)`.
pub fn mmse_values(h: &[C64], p: &PrecoderSet, user: usize, layout: &GroupLayout) -> Result<(f64, f64)> {
    let proj = Projections::new(h, p, user, layout)?;
    let eps0 = 1.0 / (1.0 / proj.common + proj.aggregate.norm_sqr() / proj.r0());
    let epsp = 1.0 / (1.0 / proj.private + proj.own_gain() / proj.rp());
    Ok((eps0, epsp))
}

/// Optimal WMSE weights `(w, v)`: reciprocals of the minimum MSEs.
pub fn optimal_weights(eps0_min: f64, epsp_min: f64) -> Result<(f64, f64)> {
    for eps in [eps0_min, epsp_min] {
        if !(eps > 0.0) {
            return Err(Error::NonPositiveMse(eps));
        }
    }
    Ok((1.0 / eps0_min, 1.0 / epsp_min))
}

/// Augmented weighted MSE `weight * eps - log2(coeff * weight)`.
pub fn augmented_wmse(eps: f64, weight: f64, coeff: f64) -> Result<f64> {
    if !(weight > 0.0 && coeff > 0.0) {
        return Err(Error::NonPositiveWeight);
    }
    Ok(weight * eps - libm::log2(coeff * weight))
}

/// Max-min fair group rate `min_k (R_{c,k} + min_{i in G_k} R_{p,i})`.
pub fn mmf_objective(layout: &GroupLayout, group_common: &[f64], per_user_private: &[f64]) -> Result<f64> {
    if group_common.len() != layout.num_groups() {
        return Err(Error::LengthMismatch {
            expected: layout.num_groups(),
            got: group_common.len(),
        });
    }
    if per_user_private.len() != layout.num_users() {
        return Err(Error::LengthMismatch {
            expected: layout.num_users(),
            got: per_user_private.len(),
        });
    }
    Ok((0..layout.num_groups())
        .map(|k| {
            let worst = layout.members(k).map(|i| per_user_private[i]).fold(f64::INFINITY, f64::min);
            group_common[k] + worst
        })
        .fold(f64::INFINITY, f64::min))
}

pub fn user_metrics(h: &[C64], p: &PrecoderSet, user: usize, layout: &GroupLayout) -> Result<UserMetrics> {
    let (r0, rp) = effective_noises(h, p, user, layout)?;
    let (rate_common, rate_private) = user_rates(h, p, user, layout)?;
    let (mmse_common, mmse_private) = mmse_values(h, p, user, layout)?;
    Ok(UserMetrics {
        r0,
        rp,
        rate_common,
        rate_private,
        mmse_common,
        mmse_private,
    })
}

/// MMSE equalizers and optimal weights for every user at precoder `p`.
pub fn receiver_state(ch: &ChannelRealization, p: &PrecoderSet, layout: &GroupLayout) -> Result<ReceiverState> {
    if ch.num_users() != layout.num_users() {
        return Err(Error::DimensionMismatch("channel and layout user counts differ"));
    }
    let n = layout.num_users();
    let mut state = ReceiverState {
        common_eq: Vec::with_capacity(n),
        private_eq: Vec::with_capacity(n),
        common_weight: Vec::with_capacity(n),
        private_weight: Vec::with_capacity(n),
    };
    for user in 0..n {
        let h = ch.user(user);
        let (w_eq, v_eq) = mmse_receivers(h, p, user, layout)?;
        let (eps0, epsp) = mmse_values(h, p, user, layout)?;
        let (w, v) = optimal_weights(eps0, epsp)?;
        state.common_eq.push(w_eq);
        state.private_eq.push(v_eq);
        state.common_weight.push(w);
        state.private_weight.push(v);
    }
    Ok(state)
}

/// Splits `surplus` over the groups to maximize `min_k (x_k + base_k)` with
/// `x_k >= 0`, `sum x_k <= surplus`. Returns the split.
pub fn fill_common_surplus(base: &[f64], surplus: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..base.len()).collect();
    order.sort_by(|&a, &b| base[a].total_cmp(&base[b]));

    let surplus = surplus.max(0.0);
    // Raise the lowest `j` groups to a common level until the budget runs out.
    let mut level = match order.first() {
        Some(&k) => base[k],
        None => return Vec::new(),
    };
    let mut remaining = surplus;
    let mut raised = 0;
    while raised < order.len() {
        raised += 1;
        let next = order.get(raised).map(|&k| base[k]);
        match next {
            Some(next_level) if (next_level - level) * raised as f64 <= remaining => {
                remaining -= (next_level - level) * raised as f64;
                level = next_level;
            }
            _ => {
                level += remaining / raised as f64;
                break;
            }
        }
    }
    base.iter().map(|&b| (level - b).max(0.0)).collect()
}

/// Best rate allocation supported by exact rates `(R_0, R_k)`.
///
/// The common message takes exactly `threshold`; in RS mode the rest of the
/// super-common pool is water-filled over the weakest groups. Returns `None`
/// when `R_0 < threshold - tol`.
pub fn allocate_rates(
    common_pool: f64,
    group_private: &[f64],
    threshold: f64,
    mode: Mode,
    tol: f64,
) -> Option<RateAllocation> {
    if common_pool < threshold - tol {
        return None;
    }
    let group_common = match mode {
        Mode::Rs => fill_common_surplus(group_private, common_pool - threshold),
        Mode::NoRs => alloc::vec![0.0; group_private.len()],
    };
    let mmf_rate = group_common
        .iter()
        .zip(group_private)
        .map(|(a, b)| a + b)
        .fold(f64::INFINITY, f64::min);
    Some(RateAllocation {
        common_rate: threshold,
        group_common_rates: group_common,
        group_private_rates: group_private.to_vec(),
        mmf_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Scheme;
    use alloc::vec;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn cc_unit() -> (GroupLayout, PrecoderSet) {
        let layout = GroupLayout::new(&[1]).unwrap();
        let p = PrecoderSet::new(Scheme::Cc, 0.5, Some(vec![c(1.0)]), vec![vec![c(1.0)]], 2.0).unwrap();
        (layout, p)
    }

    #[test]
    fn effective_noise_examples() {
        let (layout, p) = cc_unit();
        assert_eq!(effective_noises(&[c(1.0)], &p, 0, &layout).unwrap(), (2.0, 1.0));

        let zero = PrecoderSet::zeros(Scheme::Mc, 0.3, 1, 1, 1.0).unwrap();
        assert_eq!(effective_noises(&[c(1.0)], &zero, 0, &layout).unwrap(), (1.0, 1.0));

        let two = GroupLayout::new(&[1, 1]).unwrap();
        let sc = PrecoderSet::new(Scheme::Sc, 0.5, None, vec![vec![c(1.0)], vec![c(1.0)]], 1.0).unwrap();
        assert_eq!(effective_noises(&[c(1.0)], &sc, 0, &two).unwrap(), (2.0, 1.5));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (layout, p) = cc_unit();
        assert!(matches!(
            effective_noises(&[c(1.0), c(0.0)], &p, 0, &layout),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(user_rates(&[c(1.0)], &p, 3, &layout).is_err());
    }

    #[test]
    fn user_rate_examples() {
        let (layout, p) = cc_unit();
        let (r0, rp) = user_rates(&[c(1.0)], &p, 0, &layout).unwrap();
        assert!((r0 - libm::log2(1.5)).abs() < 1e-15);
        assert!((r0 - 0.5849625007).abs() < 1e-9);
        assert!((rp - 1.0).abs() < 1e-15);

        let zero = PrecoderSet::zeros(Scheme::Cc, 0.5, 1, 1, 1.0).unwrap();
        assert_eq!(user_rates(&[c(1.0)], &zero, 0, &layout).unwrap(), (0.0, 0.0));

        let layout = GroupLayout::new(&[1]).unwrap();
        let orth = PrecoderSet::new(
            Scheme::Cc,
            0.5,
            Some(vec![c(1.0), c(0.0)]),
            vec![vec![c(1.0), c(0.0)]],
            1.0,
        )
        .unwrap();
        assert_eq!(user_rates(&[c(0.0), c(2.0)], &orth, 0, &layout).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn min_rates_take_group_minimum() {
        let layout = GroupLayout::new(&[2]).unwrap();
        let p = PrecoderSet::new(Scheme::Cc, 0.5, Some(vec![c(1.0)]), vec![vec![c(1.0)]], 2.0).unwrap();
        let ch = ChannelRealization::new(vec![vec![c(1.0)], vec![c(0.5)]]).unwrap();
        let (r0, rk) = min_rates(&ch, &p, &layout).unwrap();
        let (a0, ap) = user_rates(ch.user(0), &p, 0, &layout).unwrap();
        let (b0, bp) = user_rates(ch.user(1), &p, 1, &layout).unwrap();
        assert_eq!(r0, a0.min(b0));
        assert_eq!(rk, vec![ap.min(bp)]);
        assert!(r0 <= a0 && r0 <= b0);
    }

    #[test]
    fn receiver_and_mse_examples() {
        let (layout, p) = cc_unit();
        let h = [c(1.0)];
        let (w, v) = mmse_receivers(&h, &p, 0, &layout).unwrap();
        assert!((w - c(1.0 / 3.0)).norm() < 1e-15);
        assert!((v - c(0.5)).norm() < 1e-15);

        let (eps0, epsp) = mse_values(&h, &p, 0, &layout, w, v).unwrap();
        assert!((eps0 - 2.0 / 3.0).abs() < 1e-15);
        assert!((epsp - 0.5).abs() < 1e-15);

        let sc = PrecoderSet::new(Scheme::Sc, 0.3, None, vec![vec![c(0.7)]], 1.0).unwrap();
        let (e0, ep) = mse_values(&h, &sc, 0, &layout, c(0.0), c(0.0)).unwrap();
        assert!((e0 - 0.3).abs() < 1e-15 && (ep - 0.7).abs() < 1e-15);

        let zero = PrecoderSet::zeros(Scheme::Cc, 0.5, 1, 1, 1.0).unwrap();
        assert_eq!(mmse_receivers(&h, &zero, 0, &layout).unwrap(), (c(0.0), c(0.0)));
    }

    #[test]
    fn mmse_value_examples() {
        let (layout, p) = cc_unit();
        let (e0, ep) = mmse_values(&[c(1.0)], &p, 0, &layout).unwrap();
        assert!((e0 - 2.0 / 3.0).abs() < 1e-15 && (ep - 0.5).abs() < 1e-15);

        let zero = PrecoderSet::zeros(Scheme::Mc, 0.25, 1, 1, 1.0).unwrap();
        let (e0, ep) = mmse_values(&[c(1.0)], &zero, 0, &layout).unwrap();
        assert!((e0 - 0.25).abs() < 1e-15 && (ep - 0.75).abs() < 1e-15);
    }

    #[test]
    fn weights_and_wmse_examples() {
        let (w, v) = optimal_weights(2.0 / 3.0, 0.5).unwrap();
        assert!((w - 1.5).abs() < 1e-15 && v == 2.0);
        let (w, v) = optimal_weights(0.25, 0.75).unwrap();
        assert!((w - 4.0).abs() < 1e-15 && (v - 1.0 / 0.75).abs() < 1e-15);
        assert_eq!(optimal_weights(0.0, 1.0), Err(Error::NonPositiveMse(0.0)));
        assert_eq!(optimal_weights(1.0, -2.0), Err(Error::NonPositiveMse(-2.0)));

        let xi0 = augmented_wmse(2.0 / 3.0, 1.5, 1.0).unwrap();
        assert!((xi0 - (1.0 - libm::log2(1.5))).abs() < 1e-15);
        assert!((xi0 - 0.41503749927884376).abs() < 1e-12);
        assert_eq!(augmented_wmse(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(augmented_wmse(0.5, 2.0, 1.0).unwrap(), 0.0);
        assert_eq!(augmented_wmse(0.5, 0.0, 1.0), Err(Error::NonPositiveWeight));
        assert_eq!(augmented_wmse(0.5, 1.0, -1.0), Err(Error::NonPositiveWeight));
    }

    #[test]
    fn mmf_objective_examples() {
        let layout = GroupLayout::new(&[1, 1]).unwrap();
        assert!((mmf_objective(&layout, &[0.2, 0.0], &[0.3, 0.6]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(mmf_objective(&layout, &[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);

        let layout = GroupLayout::new(&[1, 2]).unwrap();
        assert_eq!(mmf_objective(&layout, &[0.0, 0.0], &[0.9, 0.4, 0.7]).unwrap(), 0.4);
        assert!(matches!(
            mmf_objective(&layout, &[0.0], &[0.9, 0.4, 0.7]),
            Err(Error::LengthMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn surplus_fill_levels_weakest_groups() {
        let split = fill_common_surplus(&[0.3, 0.6, 1.0], 0.5);
        // level L with (L-0.3)+(L-0.6) = 0.5 -> L = 0.7
        assert!((split[0] - 0.4).abs() < 1e-12);
        assert!((split[1] - 0.1).abs() < 1e-12);
        assert_eq!(split[2], 0.0);
        let split = fill_common_surplus(&[0.5, 0.2], 2.0);
        assert!((split[0] + 0.5 - (split[1] + 0.2)).abs() < 1e-12);
        assert!((split.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert_eq!(fill_common_surplus(&[1.0, 2.0], 0.0), vec![0.0, 0.0]);
    }

    #[test]
    fn allocation_respects_threshold() {
        let rates = allocate_rates(1.0, &[0.2, 0.4], 0.3, Mode::Rs, 1e-9).unwrap();
        assert_eq!(rates.common_rate, 0.3);
        assert!((rates.mmf_rate - 0.65).abs() < 1e-12);
        let nors = allocate_rates(1.0, &[0.2, 0.4], 0.3, Mode::NoRs, 1e-9).unwrap();
        assert_eq!(nors.mmf_rate, 0.2);
        assert!(allocate_rates(0.2, &[0.2], 0.3, Mode::Rs, 1e-9).is_none());
    }
}
