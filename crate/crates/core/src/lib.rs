pub mod imaging;
pub mod matching;
pub mod segmentation;
pub mod time;
pub mod transform;
pub mod pipeline;
pub mod store;
pub mod dispatcher;
pub mod gateway;
