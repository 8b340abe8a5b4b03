pub mod ablate;
pub mod evaluate;
pub mod grad_check;
pub mod lambda_trace;
pub mod oracle_check;
pub mod train;
