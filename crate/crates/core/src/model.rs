//! Domain types: group layouts, coding schemes, precoders and channels.
//!
//! Users and groups are indexed from zero. Group `k` in this crate is the
//! `(k + 1)`-th multicast group; the super-common precoder of the CC and MC
//! schemes is stored separately from the per-group columns.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use crate::{Error, Result, C64};

/// Lower edge of the power-split range accepted by searches and configs.
pub const ALPHA_MIN: f64 = 0.01;
/// Upper edge of the power-split range accepted by searches and configs.
pub const ALPHA_MAX: f64 = 0.99;

/// Partition of `N` users into `K` multicast groups, sizes non-decreasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupLayout {
    group_sizes: Vec<usize>,
    user_to_group: Vec<usize>,
    offsets: Vec<usize>,
}

impl GroupLayout {
    /// Builds a canonical layout: sizes are sorted ascending and users are
    /// assigned contiguously, group by group.
    pub fn new(group_sizes: &[usize]) -> Result<Self> {
        if group_sizes.is_empty() || group_sizes.iter().any(|&g| g == 0) {
            return Err(Error::EmptyGroups);
        }
        let mut sizes = group_sizes.to_vec();
        sizes.sort_unstable();

        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut user_to_group = Vec::with_capacity(sizes.iter().sum());
        offsets.push(0);
        for (k, &g) in sizes.iter().enumerate() {
            user_to_group.extend(core::iter::repeat(k).take(g));
            offsets.push(user_to_group.len());
        }
        Ok(Self {
            group_sizes: sizes,
            user_to_group,
            offsets,
        })
    }

    pub fn num_users(&self) -> usize {
        self.user_to_group.len()
    }

    pub fn num_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    /// The group map `mu(n)`.
    pub fn group_of(&self, user: usize) -> usize {
        self.user_to_group[user]
    }

    /// Users belonging to group `k`.
    pub fn members(&self, group: usize) -> Range<usize> {
        self.offsets[group]..self.offsets[group + 1]
    }
}

/// How the super-common stream is combined with the private streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Super-common symbol superposed on every private stream.
    Sc,
    /// Super-common symbol on its own precoder column.
    Cc,
    /// Both: a dedicated column plus superposition on the private streams.
    Mc,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Sc, Scheme::Cc, Scheme::Mc];

    /// Whether the precoder carries a dedicated super-common column `p_0`.
    pub fn has_common_column(self) -> bool {
        !matches!(self, Scheme::Sc)
    }

    /// Whether the scheme depends on the power split `alpha`.
    pub fn uses_alpha(self) -> bool {
        !matches!(self, Scheme::Cc)
    }

    pub fn column_count(self, groups: usize) -> usize {
        groups + usize::from(self.has_common_column())
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Sc => "SC",
            Scheme::Cc => "CC",
            Scheme::Mc => "MC",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "SC" | "sc" => Some(Scheme::Sc),
            "CC" | "cc" => Some(Scheme::Cc),
            "MC" | "mc" => Some(Scheme::Mc),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Rate-splitting on (RS) or off (NoRS, every `R_{c,k}` pinned to zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Rs,
    NoRs,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Rs, Mode::NoRs];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Rs => "RS",
            Mode::NoRs => "NoRS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "RS" | "rs" => Some(Mode::Rs),
            "NoRS" | "NORS" | "nors" | "noRS" => Some(Mode::NoRs),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Power coefficients `(B, C)` multiplying the super-common and private
/// stream powers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub common: f64,
    pub private: f64,
}

pub fn scheme_coefficients(scheme: Scheme, alpha: f64) -> Result<Coefficients> {
    match scheme {
        Scheme::Cc => Ok(Coefficients {
            common: 1.0,
            private: 1.0,
        }),
        Scheme::Sc | Scheme::Mc => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::AlphaOutOfRange(alpha));
            }
            Ok(Coefficients {
                common: alpha,
                private: 1.0 - alpha,
            })
        }
    }
}

/// Precoding matrix of one scheme plus its power split and budget.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    scheme: Scheme,
    alpha: f64,
    common: Option<Vec<C64>>,
    private: Vec<Vec<C64>>,
    tx_budget: f64,
}

impl PrecoderSet {
    /// `common` must be present exactly when the scheme has a `p_0` column.
    pub fn new(
        scheme: Scheme,
        alpha: f64,
        common: Option<Vec<C64>>,
        private: Vec<Vec<C64>>,
        tx_budget: f64,
    ) -> Result<Self> {
        scheme_coefficients(scheme, alpha)?;
        if private.is_empty() {
            return Err(Error::DimensionMismatch("precoder needs at least one group column"));
        }
        if common.is_some() != scheme.has_common_column() {
            return Err(Error::DimensionMismatch("common column does not match scheme"));
        }
        let m = private[0].len();
        if m == 0 {
            return Err(Error::DimensionMismatch("precoder columns must be non-empty"));
        }
        if private.iter().chain(common.iter()).any(|c| c.len() != m) {
            return Err(Error::DimensionMismatch("precoder columns differ in length"));
        }
        if !(tx_budget >= 0.0 && tx_budget.is_finite()) {
            return Err(Error::InvalidParameter("transmit budget must be finite and non-negative"));
        }
        Ok(Self {
            scheme,
            alpha,
            common,
            private,
            tx_budget,
        })
    }

    pub fn zeros(scheme: Scheme, alpha: f64, antennas: usize, groups: usize, tx_budget: f64) -> Result<Self> {
        let zero = vec![C64::new(0.0, 0.0); antennas];
        let common = scheme.has_common_column().then(|| zero.clone());
        Self::new(scheme, alpha, common, vec![zero; groups], tx_budget)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tx_budget(&self) -> f64 {
        self.tx_budget
    }

    pub fn num_antennas(&self) -> usize {
        self.private[0].len()
    }

    pub fn num_groups(&self) -> usize {
        self.private.len()
    }

    pub fn coefficients(&self) -> Coefficients {
        scheme_coefficients(self.scheme, self.alpha).expect("validated at construction")
    }

    /// `p_0`, present for CC and MC.
    pub fn common_column(&self) -> Option<&[C64]> {
        self.common.as_deref()
    }

    /// `p_{k+1}`, the private column of group `k`.
    pub fn private_column(&self, group: usize) -> &[C64] {
        &self.private[group]
    }

    pub fn private_columns(&self) -> &[Vec<C64>] {
        &self.private
    }

    /// All columns in matrix order: `p_0` first when present, then groups.
    pub fn columns(&self) -> impl Iterator<Item = &[C64]> {
        self.common.iter().chain(self.private.iter()).map(Vec::as_slice)
    }

    /// The effective super-common beam `p_A`.
    pub fn aggregate(&self) -> Vec<C64> {
        let mut acc = match (&self.common, self.scheme) {
            (Some(p0), _) => p0.clone(),
            (None, _) => vec![C64::new(0.0, 0.0); self.num_antennas()],
        };
        if self.scheme != Scheme::Cc {
            for col in &self.private {
                for (a, p) in acc.iter_mut().zip(col) {
                    *a += p;
                }
            }
        }
        acc
    }

    /// Average transmit power `B ||p_A||^2 + C sum_k ||p_k||^2`.
    pub fn transmit_power(&self) -> f64 {
        let coef = self.coefficients();
        let aggregate = norm_sqr(&self.aggregate());
        let private: f64 = self.private.iter().map(|c| norm_sqr(c)).sum();
        coef.common * aggregate + coef.private * private
    }

    /// Multiplies every column by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |c: &Vec<C64>| c.iter().map(|z| z * factor).collect::<Vec<_>>();
        Self {
            scheme: self.scheme,
            alpha: self.alpha,
            common: self.common.as_ref().map(scale),
            private: self.private.iter().map(scale).collect(),
            tx_budget: self.tx_budget,
        }
    }

    /// The precoder of another scheme that transmits the same signal: same
    /// super-common beam `sqrt(B) p_A`, same private beams `sqrt(C) p_k`, hence
    /// the same rates and power. `None` when the target cannot express it
    /// (SC only reproduces SC at the same split).
    pub fn embed(&self, scheme: Scheme, alpha: f64) -> Result<Option<Self>> {
        let target = scheme_coefficients(scheme, alpha)?;
        let source = self.coefficients();
        let private_gain = libm::sqrt(source.private / target.private);
        let private: Vec<Vec<C64>> = self
            .private
            .iter()
            .map(|c| c.iter().map(|z| z * private_gain).collect())
            .collect();
        let common_gain = libm::sqrt(source.common / target.common);
        let mut common: Vec<C64> = self.aggregate().iter().map(|z| z * common_gain).collect();
        match scheme {
            Scheme::Cc => {}
            Scheme::Mc => {
                for col in &private {
                    for (a, p) in common.iter_mut().zip(col) {
                        *a -= p;
                    }
                }
            }
            Scheme::Sc => {
                if self.scheme != Scheme::Sc || self.alpha != alpha {
                    return Ok(None);
                }
                return Ok(Some(self.clone()));
            }
        }
        Self::new(scheme, alpha, Some(common), private, self.tx_budget).map(Some)
    }

    /// Same columns with a different power budget. Columns are rescaled
    /// down if they would exceed it.
    pub fn with_budget(&self, tx_budget: f64) -> Self {
        let power = self.transmit_power();
        let mut out = if power > tx_budget && power > 0.0 {
            self.scaled(libm::sqrt(tx_budget / power))
        } else {
            self.clone()
        };
        out.tx_budget = tx_budget;
        out
    }

    /// Column-wise sum of two precoders of identical shape and scheme.
    pub fn try_add(&self, other: &Self) -> Result<Self> {
        if self.scheme != other.scheme
            || self.num_groups() != other.num_groups()
            || self.num_antennas() != other.num_antennas()
        {
            return Err(Error::DimensionMismatch("precoder shapes differ"));
        }
        let add = |a: &Vec<C64>, b: &Vec<C64>| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
        Ok(Self {
            scheme: self.scheme,
            alpha: self.alpha,
            common: self.common.as_ref().zip(other.common.as_ref()).map(|(a, b)| add(a, b)),
            private: self.private.iter().zip(&other.private).map(|(a, b)| add(a, b)).collect(),
            tx_budget: self.tx_budget,
        })
    }
}

pub(crate) fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `a^H b`.
pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// One draw of the downlink channel: row `n` is `h_n`. Noise variance is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    rows: Vec<Vec<C64>>,
}

impl ChannelRealization {
    pub fn new(rows: Vec<Vec<C64>>) -> Result<Self> {
        let m = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || m == 0 {
            return Err(Error::DimensionMismatch("channel needs at least one user and one antenna"));
        }
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch("channel rows differ in length"));
        }
        if rows.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFiniteChannel);
        }
        Ok(Self { rows })
    }

    pub fn num_users(&self) -> usize {
        self.rows.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.rows[0].len()
    }

    pub fn user(&self, n: usize) -> &[C64] {
        &self.rows[n]
    }

    pub fn rows(&self) -> &[Vec<C64>] {
        &self.rows
    }

    pub const NOISE_VARIANCE: f64 = 1.0;
}

/// Per-user equalizers and WMSE weights for a fixed precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverState {
    /// `W_n`, the super-common equalizer.
    pub common_eq: Vec<C64>,
    /// `V_n`, the post-SIC private equalizer.
    pub private_eq: Vec<C64>,
    /// `w_n > 0`.
    pub common_weight: Vec<f64>,
    /// `v_n > 0`.
    pub private_weight: Vec<f64>,
}

impl ReceiverState {
    pub fn num_users(&self) -> usize {
        self.common_eq.len()
    }
}

/// Rates in bits per channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct RateAllocation {
    /// `R_c`, rate of the system-wide common message.
    pub common_rate: f64,
    /// `R_{c,k}`, common parts of the multicast messages.
    pub group_common_rates: Vec<f64>,
    /// `R_k`, private rate of each group.
    pub group_private_rates: Vec<f64>,
    /// `R_g`, the max-min fair group rate.
    pub mmf_rate: f64,
}

impl RateAllocation {
    pub fn zero(groups: usize) -> Self {
        Self {
            common_rate: 0.0,
            group_common_rates: vec![0.0; groups],
            group_private_rates: vec![0.0; groups],
            mmf_rate: 0.0,
        }
    }
}

/// One max-min fair design problem: a channel draw, its grouping and the
/// scheme, budget, common-rate threshold and splitting mode to design for.
#[derive(Debug, Clone, Copy)]
pub struct MmfProblem<'a> {
    pub channel: &'a ChannelRealization,
    pub layout: &'a GroupLayout,
    pub scheme: Scheme,
    /// `E_tx`, equal to the transmit SNR since the noise variance is 1.
    pub tx_budget: f64,
    /// `R_c^th`, the minimum rate of the system-wide common message.
    pub common_threshold: f64,
    pub mode: Mode,
}

impl MmfProblem<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.channel.num_users() != self.layout.num_users() {
            return Err(Error::DimensionMismatch("channel and layout user counts differ"));
        }
        if !(self.tx_budget >= 0.0 && self.tx_budget.is_finite()) {
            return Err(Error::InvalidParameter("transmit budget must be finite and non-negative"));
        }
        if !(self.common_threshold >= 0.0 && self.common_threshold.is_finite()) {
            return Err(Error::InvalidParameter("common-rate threshold must be finite and non-negative"));
        }
        Ok(())
    }
}
