#![allow(dead_code)]

//! Test-only helpers shared by the integration suites.

/// splitmix64, mirrored by `tests/oracles/shapiro_wilk_reference.py` so both
/// sides draw identical samples.
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn exponential(&mut self) -> f64 {
        -(1.0 - self.uniform()).ln()
    }
}

pub fn sample(kind: &str, n: usize, seed: u64) -> Vec<f64> {
    let mut g = SplitMix64::new(seed);
    (0..n)
        .map(|_| match kind {
            "normal" => g.normal(),
            "uniform" => g.uniform(),
            "exponential" => g.exponential(),
            other => panic!("unknown distribution {other}"),
        })
        .collect()
}

/// Reference values from scipy.stats.shapiro (scipy 1.15.3):
/// (distribution, n, seed, W, p).
pub const SHAPIRO_REFERENCE: &[(&str, usize, u64, f64, f64)] = &[
    ("normal", 10, 1000, 0.8766689394909791, 0.119462324223506),
    ("uniform", 10, 1001, 0.9370192974978307, 0.5203477206268887),
    ("exponential", 10, 1002, 0.8162247907727626, 0.02281196410487873),
    ("normal", 50, 1003, 0.9846007718076195, 0.7543133289751461),
    ("uniform", 50, 1004, 0.9289677996840786, 0.005051642439736175),
    ("exponential", 50, 1005, 0.7347086620640055, 3.674304487590384e-08),
    ("normal", 500, 1006, 0.9944317414002765, 0.06569267405949292),
    ("uniform", 500, 1007, 0.9508691631160632, 7.768207440445777e-12),
    ("exponential", 500, 1008, 0.8410369141071409, 5.590848160849953e-22),
    ("normal", 5000, 1009, 0.9995972456632647, 0.40936401025798697),
    ("uniform", 5000, 1010, 0.9525672630874784, 1.733318154456717e-37),
    ("exponential", 5000, 1011, 0.8159610664470589, 4.99555137550565e-60),
    ("normal", 10, 1012, 0.9580737418863267, 0.763704665605786),
    ("uniform", 10, 1013, 0.9602415581703682, 0.7886235117672526),
    ("normal", 50, 1014, 0.9904261242030508, 0.9555962059456853),
    ("uniform", 50, 1015, 0.9491493016570507, 0.03148064661250518),
    ("normal", 500, 1016, 0.9959466317191132, 0.22802728979365705),
    ("uniform", 500, 1017, 0.9490731724945412, 4.272330409050996e-12),
    ("normal", 5000, 1018, 0.9996933153859604, 0.686459825015744),
    ("uniform", 5000, 1019, 0.9560661202823871, 2.2362176562533107e-36),
    ("normal", 50, 7, 0.9557755898455358, 0.05917777406799055),
    ("uniform", 100, 11, 0.9539042377243742, 0.0015136910219580957),
];
