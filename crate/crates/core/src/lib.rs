//! Numerical constructions on the Weil-Petersson universal Teichmueller
//! space at desk scale: quasiconformal Beltrami solves on a truncated disc,
//! the Gauss equation for maximal-disc conformal factors, induced Gauss maps,
//! the Mess correspondence, and finite-dimensional symplectic pairings with
//! finite-difference validation of their variational identities.

pub mod annulus;
pub mod beltrami;
pub mod cauchy;
pub mod deform;
pub mod diff;
pub mod differentials;
pub mod error;
pub mod field;
pub mod gauss;
pub mod grid;
pub mod hyperbolic;
pub mod mess;
pub mod moebius;
pub mod riemann;
pub mod surface;

pub use beltrami::{group_law, reflect_extension, right_translation_pullback, schwarzian, solve_beltrami, BeltramiCoefficient, Normalization, QCMap};
pub use differentials::{wp_inner, QuadDifferential, TangentField};
pub use deform::{ahlfors_defect, energy_first_variation, energy_second_variation, energy_variation_fd, lie_energy_density_closed, lie_hopf_closed, lie_mu_f_closed, mu_h_dot_closed, pm_variations, pullback_tangent, unpullback, DeformationScenario, LieEngine, LieQuantity, LieReport, TargetDirection};
pub use error::{GaussError, GeometryError, MessError, PipelineError, SolveError, SurfaceError};
pub use gauss::{curvature, solve_gauss, ConformalFactor};
pub use field::{ComplexField, RealField};
pub use surface::{anti_holomorphic_energy, beltrami_of_f, build_pair, harmonic_residual, hopf_differential, total_curvature_integral, InducedGaussPair, Sign};
pub use grid::{make_grid, DiscGrid};
pub use mess::{mess_forward, mess_pointwise_invert, section_point, CotangentPoint, MessForwardData, MessImage};
pub use hyperbolic::hyperbolic_density;
