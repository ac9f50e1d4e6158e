pub mod alpha;
pub mod concavity;
pub mod domain;
pub mod error;
pub mod euler_lagrange;
pub mod experiments;
pub mod lattice;
pub mod tasep;
pub mod variational;

pub use alpha::{AlphaField, Profile};
pub use domain::{gamma, gamma_derivatives, LipschitzPath, RectangleDomain};
pub use concavity::{check_condition, gamma_ratio_sup, hessian_eigen_check, ConcavityReport};
pub use error::{Error, Result};
pub use euler_lagrange::{el_rhs, shoot, solve_bvp, BvpOptions, ShootingSolution};
pub use lattice::{lpp_solve, path_sup_distance, sample_rewards, DirectedPath, LatticeSpec, RewardField};
pub use tasep::{convexity_check, gstar_curve, tasep_crossing_time, GStarCurve, TasepConfig};
pub use variational::{functional_eval, riemann_upper, variational_dp, DiscretizedPathSpace, VariationalSolution};
