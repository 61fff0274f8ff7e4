//! rectops — certified numerics for rectangular operator spaces.
//!
//! The crate decides complete contractivity, computes cb-norms, certifies
//! rectangular extreme points and boundary representations, runs the triple
//! dilation pipeline, tests membership and separation for rectangular matrix
//! convex sets, and carries two smaller toolboxes: polynomial multipliers
//! between weighted Hardy-type spaces on the disc, and matrix gauges with the
//! idempotent-range product.
//!
//! The primary interface is the `examples/` directory — one runnable example
//! per capability:
//!
//! ```text
//! cargo run --release --example cc_check
//! cargo run --release --example cb_norm_bisect
//! cargo run --release --example choi_analysis
//! cargo run --release --example sdp_feasibility
//! cargo run --release --example hull_membership
//! cargo run --release --example polar_separation
//! cargo run --release --example krein_milman
//! cargo run --release --example extreme_points
//! cargo run --release --example dilation_pipeline
//! cargo run --release --example uep_boundary
//! cargo run --release --example triple_envelope
//! cargo run --release --example rkhs_multipliers
//! cargo run --release --example gauge_products
//! ```
//!
//! A thin binary (`rectops`) exposes the same capabilities as subcommands with
//! JSON input/output for scripting; `rectops --help` lists them.

pub mod error;
pub mod num;
pub mod sdp;

pub mod opspace;

pub mod cpmaps;

pub mod rectconvex;

pub mod boundary;

pub mod rkhs;

pub mod gauge;

pub mod cli;

pub use error::{Error, Result};
