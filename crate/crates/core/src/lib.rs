//! Procedural cutscene cinematography in the statistical style of a film
//! director.
//!
//! The design-time pipeline runs markers → collision proxies → technique
//! selection → camera placement → storyboard; [`playback`] turns a storyboard
//! into a per-frame camera track at runtime.

pub mod config;
pub mod dataset;
pub mod demo;
pub mod geometry;
pub mod math;
pub mod placement;
pub mod playback;
pub mod preview;
pub mod project;
pub mod proxy;
pub mod rng;
pub mod scene;
pub mod selection;
pub mod storyboard;
