//! Schedulability analysis of CAN message sets and evolutionary synthesis
//! of response-time tests.
//!
//! * [`model`]: messages, message sets, task graphs.
//! * [`gen`]: seeded message-set corpus generator.
//! * [`io`]: CSV and JSON formats with provenance headers.
//! * [`analysis`]: the S1 test, its closed forms and the exact busy-period
//!   test.
//! * [`formula`]: expression IR, grammar and genotype mapping.
//! * [`sim`]: non-preemptive fixed-priority bus simulator.
//! * [`ga`]: generic generational genetic algorithm.
//! * [`evolve`]: grammatical evolution of tests and test/scenario
//!   co-evolution.
//! * [`alloc`]: evolutionary task allocation with schedulability fitness.

pub mod alloc;
pub mod analysis;
pub mod evolve;
pub mod formula;
pub mod ga;
pub mod gen;
pub mod io;
pub mod model;
pub mod sim;
