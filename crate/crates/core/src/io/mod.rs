//! File formats: skeleton streams, ground truth, detection records, NTU
//! skeleton files, model archives, and the synthetic gesture generator.

pub mod archive;
pub mod ntu;
pub mod stream;
pub mod synth;

pub use archive::{load_model, save_model, ModelArchive, FORMAT_VERSION};
pub use ntu::{parse_ntu_skeleton, write_ntu_skeleton};
pub use stream::{
    parse_ground_truth, parse_stream, write_ground_truth, write_stream, EventRecord, Person, StreamFrame, StreamReader,
};
pub use synth::{synth_gestures, SynthConfig, SynthDataset};
