pub mod bench_act;
pub mod eval;
pub mod gradcheck;
pub mod infer;
pub mod train;
