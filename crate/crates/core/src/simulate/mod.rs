//! Data-generating processes and Monte Carlo studies.
//!
//! Every replication draws from its own ChaCha streams derived from the
//! master seed and the replication index, so results do not depend on how
//! replications are scheduled across threads.

pub mod dgp;
pub mod study;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use dgp::{gen_sample, DgpSpec, ErrorDist, Innovation, Regressor, Sample, TestFunction};
pub use study::{
    coverage_study, dev_scaling_study, k_rule, rate_study, rate_study_synthetic, stability_study, CoverageConfig,
    CoverageReport, DevScalingConfig, DevScalingReport, KRule, RateConfig, RateReport, StabilityConfig,
    StabilityReport,
};

/// Stream used for regressor draws.
pub const STREAM_X: u64 = 0;
/// Stream used for error draws.
pub const STREAM_EPS: u64 = 1;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for `(master seed, replication, stream)`.
pub fn stream_rng(master: u64, rep: u64, stream: u64) -> ChaCha8Rng {
    let key = splitmix(splitmix(master) ^ splitmix(rep.wrapping_add(0xA5A5_0000)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(stream);
    rng
}
