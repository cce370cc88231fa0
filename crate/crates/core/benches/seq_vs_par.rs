//! Criterion comparison of the data-parallel and sequential execution paths.
//! Filled in once the residual/cone pipelines are complete.

fn main() {}
