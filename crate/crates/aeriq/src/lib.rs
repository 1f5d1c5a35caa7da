//! Drive-test toolkit for narrowband LTE downlink measurements.
//!
//! The crate covers the full measurement chain used when a moving receiver
//! (for example one carried by a small aircraft) records short I/Q segments
//! of an LTE carrier and the recordings are post-processed into a
//! propagation model:
//!
//! * [`sigmf`] — SigMF recordings of segmented I/Q captures and GPS tracks.
//! * [`lte`] — 1.4 MHz LTE downlink numerology, synchronization signals,
//!   cell-specific reference signals, and OFDM (de)modulation.
//! * [`resample`] — rational-ratio polyphase resampling between capture and
//!   baseband rates.
//! * [`synth`] — synthesis of downlink frames and channel impairments for
//!   closed-loop testing.
//! * [`sync`] — carrier-frequency-offset estimation and PSS/SSS cell search.
//! * [`chanest`] — least-squares channel estimation on CRS pilots and RSRP.
//! * [`geo`] — WGS-84 geometry between a transmit tower and a GPS track.
//! * [`propmodel`] — free-space and two-ray path loss, model fitting, and
//!   shadowing statistics.
//! * [`pipeline`] — file-to-file commands tying the above together, shared
//!   by the `aeriq` command-line tool.

pub mod chanest;
pub mod geo;
pub mod lte;
pub mod pipeline;
pub mod propmodel;
pub mod resample;
pub mod sigmf;
pub mod sync;
pub mod synth;

pub use num_complex::Complex64;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/signal-model.md")]
    mod signal_model {}
    #[doc = include_str!("../../../book/src/synchronization.md")]
    mod synchronization {}
    #[doc = include_str!("../../../book/src/channel-estimation.md")]
    mod channel_estimation {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/propagation.md")]
    mod propagation {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline_guide {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
