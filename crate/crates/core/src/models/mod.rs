//! Closed-form local ridge models.

mod curve;
mod earthquake;
mod export;
mod profile;
mod ridge;

pub use curve::{sampling, signed_area_between, transversality_margin, GraphOver, RidgyCurve};
pub use earthquake::{
    earthquake_generating, earthquake_tectonic_field, plate_hessian, Earthquake, EarthquakeFault,
};
pub use export::{curve_csv, curves_svg, ridge_piece_curve, ViewBox};
pub use profile::{cusp_to_ridge, fold_to_ridge, GeneratingProfile};
pub use ridge::{model_ridge_pieces, Coord, ModelRidge, RidgePiece};
