//! Volumetric annotation core: image stack I/O, stylus brush editing,
//! incremental marching cubes and mesh optimization.

pub mod annotation;
pub mod cache;
pub mod error;
pub mod imaging;
pub mod mesh;
pub mod stack;
pub mod surface;
pub mod volume;

pub use error::{AnnotationError, ExtractError, MeshError, VolumeError};
pub use mesh::TriangleMesh;
pub use volume::{Axis, Dims, MaskVolume, SliceImage, SliceRef, Spacing, VoxelVolume, Window};
