pub mod erealm;
pub mod harness;
pub mod interconnect;
pub mod irealm;
pub mod platform;
pub mod protocol;
pub mod simkernel;
