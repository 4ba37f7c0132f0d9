//! System composition: managers, subordinates, configuration registers and
//! the bus guard.

pub mod guard;
pub mod manager;
pub mod registers;
pub mod subordinate;
pub mod system;

pub use guard::{GuardError, GuardState};
pub use manager::{Activation, Manager, ManagerKind, ManagerSpec, ManagerStats, Mix};
pub use registers::{RegError, RegLayout, RegisterFile};
pub use subordinate::{FaultBehavior, FaultInjection, FaultTrigger, SubStats, Subordinate, SubordinateSpec};
pub use system::{ErealmHw, IrealmHw, ManagerDef, Platform, PlatformError, PlatformSpec, SubordinateDef};
