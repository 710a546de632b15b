pub mod metrics;
pub mod oracles;
pub mod run;
pub mod seeds;
pub mod stream;

pub use metrics::{acc_bwt, kendall_tau, pearson, AccuracyMatrix};
pub use oracles::{finite_eps_second_order, loo_retrain_delta, OracleConfig};
pub use run::{run_continual, HarnessConfig, Reweight, RunReport, TrainConfig};
pub use seeds::{named_rng, RngStream};
pub use stream::{make_stream, StreamSource, StreamSpec, Task, TaskStream};
