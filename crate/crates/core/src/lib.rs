//! Regularized multi-task learning solved by backward-forward splitting,
//! with an asynchronous block-coordinate engine (AMTL), a synchronous
//! baseline (SMTL), a deterministic network-delay simulator and a threaded
//! runtime.
//!
//! ```no_run
//! use amtl_core::prelude::*;
//!
//! let problem = gen_synthetic(&SyntheticSpec::new(5, 100, 50, 7)).unwrap();
//! let eta = 1.0 / problem.lipschitz().unwrap();
//! let policy = StepPolicy::new(eta, 1e-4, 0.9, 10);
//! let config = RunConfig::new(Mode::Amtl, 10, policy, 7)
//!     .with_delay(DelayModel::new(5.0, 5.0, 7));
//! let result = run(&problem, &config).unwrap();
//! println!("makespan {:.3}s objective {}", result.makespan(), result.final_objective);
//! ```

pub mod data;
pub mod error;
pub mod model;
pub mod numerics;
pub mod operators;
pub mod runtime;
pub mod scheduler;
pub mod trace;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::data::{gen_synthetic, gen_synthetic_with_truth, load_csv_dir, write_csv_dir, SyntheticSpec};
    pub use crate::error::{Error, Result};
    pub use crate::model::{loss_gradient, loss_value, objective, LossKind, MtlProblem, Regularizer, TaskDataset};
    pub use crate::numerics::{gemm, gemv, lipschitz_bound, thin_svd, DenseMatrix, SvdFactors};
    pub use crate::operators::{
        backward_forward_block, km_update, optimality_residual, prox, prox_l21, prox_nuclear, recover_w,
        BackwardForward, BlockCandidate, ProxResult,
    };
    pub use crate::runtime::{
        measure_staleness, run, run_amtl, run_smtl, sample_delay, Clock, CostModel, DelayModel, Mode, RunConfig,
        UpdateEvent,
    };
    pub use crate::scheduler::{dynamic_multiplier, km_step_size, DelayHistory, StepPolicy};
    pub use crate::trace::{compare_report, export_csv, ComparisonSummary, RunResult, RunSummary};
}
