//! Toolkit for turning per-slice scored 2D detections into ranked 3D
//! lesion candidates, evaluating segmentations against ground truth, and
//! preprocessing/augmenting prostate MRI volumes.

pub mod assembly;
pub mod augment;
pub mod detections;
pub mod error;
pub mod metaimage;
pub mod metrics;
pub mod phantom;
pub mod preprocess;
pub mod rle;
pub mod volume;

pub use assembly::{AssemblyConfig, DetectionPool, Lesion3D, ProstateSliceDecision};
pub use augment::{AugmentConfig, AugmentMode, AugmentRecord};
pub use error::{Error, Result};
pub use metaimage::{load_mask, load_volume, save_mask, save_volume, ElementType};
pub use metrics::{MetricsReport, ReportMode, SurfacePointSet};
pub use phantom::{Phantom, PhantomSpec};
pub use preprocess::{RegisterOpts, ResizeSpec, RigidTransform2D};
pub use rle::RleMask;
pub use volume::{BBox, CaseCounts, Detection, Image2, Mask, Mask2, Volume};
