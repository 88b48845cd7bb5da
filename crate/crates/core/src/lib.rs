//! Memory-aware scheduling of tree-shaped task graphs on shared-memory
//! processors: the tree model, sequential baselines, lower bounds, the
//! parallel heuristics, an exact schedule simulator and tree generators.

pub mod bench;
pub mod bounds;
pub mod generators;
pub mod schedule;
pub mod schedulers;
pub mod sequential;
pub mod simulator;
pub mod transforms;
pub mod tree;

pub use schedule::Schedule;
pub use schedulers::{Heuristic, ScheduleError};
pub use sequential::NodeOrder;
pub use tree::{NodeId, TaskTree, TreeBuilder, Weights};
