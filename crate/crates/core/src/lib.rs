//! Modeling and fabrication planning for laser-machined superelastic
//! nitinol living hinges.
//!
//! * [`material`]: bilinear superelastic law and fitting from tensile data.
//! * [`mechanics`]: torque-angle response of rectangular and profiled hinges.
//! * [`lasercal`]: etch-rate calibration and machining-setting selection.
//! * [`planner`]: depth maps, layer slicing, raster toolpaths, tolerance checks.
//! * [`bench`]: torque-trial filtering, aggregation and model comparison.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod material;
pub mod mechanics;
pub mod roots;
pub mod toolpath;
pub mod lasercal;
pub mod planner;
pub mod bench;
