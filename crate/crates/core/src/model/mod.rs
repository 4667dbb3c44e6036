//! Observations, datasets, parameter vectors and basis expansions.

mod basis;
mod data;

pub(crate) use basis::dot;
pub use basis::{
    design_matrix, eval_basis, eval_function, BasisSpec, CubicBSpline, DesignMatrix, FunctionParam, Term,
    DOMAIN_TOLERANCE,
};
pub use data::{
    read_dataset_csv, read_dataset_csv_path, CsvLayout, Dataset, LabelSet, Observation, ObservationKind,
    ObservationSampler, ParamVector, RealFn, Reference,
};
