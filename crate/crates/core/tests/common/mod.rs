#![allow(dead_code)]

use proptest::prelude::*;
use rsmulticast_core::model::{ChannelRealization, GroupLayout, PrecoderSet, Scheme};
use rsmulticast_core::C64;

pub fn complex() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| C64::new(re, im))
}

pub fn column(m: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec(complex(), m)
}

pub fn scheme() -> impl Strategy<Value = Scheme> {
    prop::sample::select(Scheme::ALL.to_vec())
}

/// A random instance: layout, channel and a precoder of the given scheme.
#[derive(Debug, Clone)]
pub struct Instance {
    pub layout: GroupLayout,
    pub channel: ChannelRealization,
    pub precoder: PrecoderSet,
}

pub fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=4, prop::collection::vec(1usize..=3, 1..=3), scheme(), 0.05..0.95f64).prop_flat_map(
        |(m, sizes, scheme, alpha)| {
            let layout = GroupLayout::new(&sizes).unwrap();
            let n = layout.num_users();
            let k = layout.num_groups();
            (
                prop::collection::vec(column(m), n),
                column(m),
                prop::collection::vec(column(m), k),
            )
                .prop_map(move |(rows, common, private)| {
                    let common = scheme.has_common_column().then_some(common);
                    let alpha = if scheme == Scheme::Cc { 1.0 } else { alpha };
                    Instance {
                        layout: layout.clone(),
                        channel: ChannelRealization::new(rows).unwrap(),
                        precoder: PrecoderSet::new(scheme, alpha, common, private, 100.0).unwrap(),
                    }
                })
        },
    )
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
