//! waveroute: a geometry compiler and optical power-flow simulator for
//! 3D-printed photonic waveguide interconnects.
//!
//! The crate builds fractal fan-out couplers and Haar convolution filter
//! circuits as explicit 3D waveguide geometry, checks manufacturability
//! (clearance, bend radius, aspect ratio), simulates incoherent power flow
//! with a three-component loss model, analyzes footprint scaling, and
//! exports netlists, tube meshes, and writer toolpaths.
//!
//! Everything is micrometers and dB. Circuits are immutable value types;
//! all operations are pure functions, safe to call concurrently.

pub mod circuit;
pub mod error;
pub mod fractal;
pub mod geom;
pub mod haar;
pub mod io;
pub mod optics;
pub mod scaling;
pub mod validate;

pub use circuit::{BifurcationNode, Circuit, ElementRef, NodeId, Port, PortId, PortRole, Segment, SegmentId};
pub use error::{Error, Result};
pub use fractal::{
    branch_angle, generate_coupler, generate_coupler_array, layer_dimensions, BranchAngles,
    Chirality, FractalSpec, LayerDims,
};
pub use geom::{
    make_bend, make_curve, min_pair_distance, sample_path, Point3, Vec3, WaveguidePath,
    DEFAULT_DIAMETER, DEFAULT_SAMPLE_PITCH,
};
pub use haar::{
    assignment_space_size, connection_count, generate_filter_unit, optimize_port_assignment,
    tile_filter_array, FilterUnit, HaarKernel, KernelSet, UnitGeometry,
};
pub use optics::{
    calibrate_losses, haar_convolve, mode_count, propagate_power, reverse_characterize,
    splitting_histogram, FeatureMap, LossComponents, LossModel, PowerMap, SplitModel,
};
pub use scaling::{footprint, scaling_report, Footprint, ScalingMode, ScalingModel, ScalingRow};
pub use validate::{
    check_aspect_ratio, check_bend_radius, check_clearance, validate_circuit, ClearanceViolation,
    ValidateOptions, ValidationReport,
};
