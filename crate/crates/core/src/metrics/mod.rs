//! Link metrics: synchronization and error counting, OSNR, link budget and
//! report serialization.

pub mod ber;
pub mod export;
pub mod osnr;
pub mod report;
pub mod sync;

pub use ber::{count_ber, measure, q_factor_db, BerEstimate, MeasureConfig, Measurement};
pub use export::{cluster_rms_spread, export_constellation, export_stokes, stokes};
pub use osnr::{
    budget_constant_db, measure_osnr, osnr_margin, osnr_max_achievable, osnr_required,
    power_spectral_density, OsnrMethod, OsnrSearch, RequiredOsnr, BUDGET_CONSTANT_DB,
    REF_BANDWIDTH_HZ,
};
pub use report::{write_csv, LinkReport};
pub use sync::{realign, synchronize, StreamAlignment, SyncConfig, SyncResult};
