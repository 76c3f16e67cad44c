//! Pipeline assembly: frames, template components, the wire protocol for
//! external components, and the chat session.

pub mod chat;
pub mod frame;
pub mod nlu;
pub mod protocol;
pub mod templates;

pub use frame::SemanticFrame;
pub use nlu::TemplateNlu;
pub use templates::TemplateSet;
