pub mod corrdata;
pub mod error;
pub mod momentmat;
pub mod physmodels;
pub mod sdpcore;
pub mod seporacle;
pub mod witnesslab;

pub use corrdata::{Axis, CollectiveMoments, CorrelationDataset, Label};
pub use error::{Error, Result};
