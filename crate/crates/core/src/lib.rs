//! Synthetic, VQA-labelled datasets of digital measurement devices.
//!
//! The pipeline runs in five stages:
//!
//! 1. **Dictionaries** – enumerate the legal readouts of each unit and range.
//! 2. **Display** – redraw the value regions of a real screen photo with
//!    sampled readouts in seven-segment faces.
//! 3. **Renderer** – sample camera, pose and lighting, check full visibility,
//!    drive a 3D engine, and post-process into masks and motion blur.
//! 4. **Composer** – paste foregrounds onto real backgrounds at scored or
//!    random placements, with aspect and minimum-area correction.
//! 5. **Labeling** – emit question/answer pairs from the recorded readouts.
//!
//! [`evaluation`] scores model predictions with ANLS and one-word accuracies.

pub mod composer;
pub mod decimal;
pub mod dictionaries;
pub mod evaluation;
pub mod display;
pub mod imageio;
pub mod labeling;
pub mod pipeline;
pub mod renderer;
pub mod rng;
pub mod sample;
