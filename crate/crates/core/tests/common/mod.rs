#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use secure_slp::channel::{sample_realization, ChannelRealization, LinkGeometry, Substream};
use secure_slp::geometry::{PskConstellation, QosParams};
use secure_slp::precoders::PrecoderInput;

pub struct Instance {
    pub channel: ChannelRealization,
    pub symbols: Vec<Complex64>,
    pub psk: PskConstellation,
    pub qos: QosParams,
}

impl Instance {
    pub fn input(&self) -> PrecoderInput<'_> {
        PrecoderInput {
            channel: &self.channel,
            symbols: &self.symbols,
            psk: self.psk,
            qos: self.qos,
        }
    }
}

/// Random channel and symbols for trial `t` of a fixed test stream.
pub fn instance(
    seed: u64,
    t: u64,
    antennas: usize,
    users: usize,
    order: usize,
    rho: f64,
    gamma_e_db: f64,
) -> Instance {
    let geometry = LinkGeometry::new(antennas, users, rho).unwrap();
    let mut rng = Substream::new(seed, 99).rng(t);
    let channel = sample_realization(&geometry, &mut rng).unwrap();
    let psk = PskConstellation::new(order).unwrap();
    let symbols = (0..users).map(|_| psk.point(rng.gen_range(0..order))).collect();
    Instance {
        channel,
        symbols,
        psk,
        qos: QosParams::new(10.0, gamma_e_db).unwrap(),
    }
}
