//! Collision maps, upper-echelon classes, tree forests and the Duhamel integrand.

pub mod forest;
pub mod integrand;
pub mod maps;

pub use forest::{build_tree_graph, InternalNode, Tree, TreeForest, Vertex};
pub use integrand::{
    class_integral_check, duhamel_integrand_from_state, evaluate_duhamel_integrand, evaluate_tree_factors,
    expand_theta_kernels, stationary_state, tree_map, ClassIntegralReport, ClassIntegralRow, ThetaFactor,
    ThetaTableau, ThetaTerm, TreeFactors,
};
pub use maps::{
    collision_map_count, enumerate_collision_maps, path_to_representative, upper_echelon_classes, write_class_csv,
    CollisionMap, EchelonClass, MAX_ENUMERATION,
};
