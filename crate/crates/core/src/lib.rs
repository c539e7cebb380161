//! Engine for discovering app functionalities by exploring a GUI, distilling
//! executions into behavioral evidence, synthesizing executable
//! precondition/interaction/postcondition properties from that evidence,
//! checking them with randomized property-based testing, and refining
//! properties that produce spurious violations.

pub mod artifacts;
pub mod backend;
pub mod explore;
pub mod fixtures;
pub mod gui;
pub mod oracle;
pub mod pipeline;
pub mod property;
pub mod refine;
pub mod runner;
pub mod synthesis;
pub mod testkit;

pub use backend::{AppModel, Backend, BackendError, ReplayAnchor, SimulatedSession};
pub use gui::{Event, EventType, GuiState, Trace, Transition, UiContext, Widget, WidgetSignature};
pub use property::{
    CheckResult, InteractionScript, PredicateExpr, Property, Selector,
};
