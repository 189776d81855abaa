use std::fmt;

use thiserror::Error;

/// Lattice location attached to an error raised while processing a net.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Site {
    Vertex(Vec<usize>),
    Quad { base: Vec<usize>, axes: (usize, usize) },
    Hexahedron { base: Vec<usize> },
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::Vertex(u) => write!(f, "vertex {u:?}"),
            Site::Quad { base, axes } => {
                write!(f, "quad {base:?} (axes {},{})", axes.0 + 1, axes.1 + 1)
            }
            Site::Hexahedron { base } => write!(f, "hexahedron {base:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("diagonals are parallel, their intersection is at infinity")]
    DegenerateQuad,
    #[error("points are not planar (residual {residual:.3e})")]
    NotPlanar { residual: f64 },
    #[error("three consecutive vertices are collinear")]
    CollinearTriple,
    #[error("diagonal intersection coincides with a vertex")]
    VertexOnDiagonal,
    #[error("simplex vertices are not in general position")]
    GeneralPositionViolated,
    #[error("division point {index} is not on its edge line")]
    PointOffLine { index: usize },
    #[error("points are not concircular (residual {residual:.3e})")]
    NotConcircular { residual: f64 },
    #[error("consecutive points coincide")]
    CoincidentPoints,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vector is not isotropic (residual {residual:.3e})")]
    NotOnLightCone { residual: f64 },
    #[error("e0 component vanishes, the point is at infinity")]
    ZeroE0Component,
    #[error("lattice dimension {found} is too low, at least {required} required")]
    DimensionTooLow { required: usize, found: usize },
    #[error("net is not a discrete Koenigs net (residual {residual:.3e})")]
    NotKoenigs { residual: f64 },
    #[error("vertex function vanishes")]
    ZeroNu,
    #[error("equal values of nu on the white diagonal, coefficient is singular")]
    EqualNuOnWhiteDiagonal,
    #[error("last homogeneous component vanishes, projected point at infinity")]
    VanishingLastComponent,
    #[error("sign pattern of nu does not alternate along the chosen axis")]
    NotAlternating,
    #[error("cross-ratios do not factorize (residual {residual:.3e})")]
    InconsistentCrossRatios { residual: f64 },
    #[error("net is not circular (residual {residual:.3e})")]
    NotCircular { residual: f64 },
    #[error("dual one-form is not closed (residual {residual:.3e})")]
    FormNotClosed { residual: f64 },
    #[error("edge of zero length")]
    ZeroEdge,
    #[error("equal labels on a quad, the new vertex is at infinity")]
    EqualLabels,
    #[error("zero-length leg in the three-leg equation")]
    ZeroLeg,
    #[error("metric function vanishes")]
    ZeroMetric,
    #[error("difference of the white diagonal vertices is isotropic")]
    NullDiagonalDifference,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{source} at {site}")]
    At { site: Site, source: Box<Error> },
}

impl Error {
    pub fn at(self, site: Site) -> Error {
        match self {
            e @ Error::At { .. } => e,
            e => Error::At {
                site,
                source: Box::new(e),
            },
        }
    }

    /// Innermost error, with any location wrapper removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::At { source, .. } => source.root(),
            e => e,
        }
    }

    /// Machine-readable category name.
    pub fn category(&self) -> &'static str {
        match self.root() {
            Error::DegenerateQuad => "DegenerateQuad",
            Error::NotPlanar { .. } => "NotPlanar",
            Error::CollinearTriple => "CollinearTriple",
            Error::VertexOnDiagonal => "VertexOnDiagonal",
            Error::GeneralPositionViolated => "GeneralPositionViolated",
            Error::PointOffLine { .. } => "PointOffLine",
            Error::NotConcircular { .. } => "NotConcircular",
            Error::CoincidentPoints => "CoincidentPoints",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NotOnLightCone { .. } => "NotOnLightCone",
            Error::ZeroE0Component => "ZeroE0Component",
            Error::DimensionTooLow { .. } => "DimensionTooLow",
            Error::NotKoenigs { .. } => "NotKoenigs",
            Error::ZeroNu => "ZeroNu",
            Error::EqualNuOnWhiteDiagonal => "EqualNuOnWhiteDiagonal",
            Error::VanishingLastComponent => "VanishingLastComponent",
            Error::NotAlternating => "NotAlternating",
            Error::InconsistentCrossRatios { .. } => "InconsistentCrossRatios",
            Error::NotCircular { .. } => "NotCircular",
            Error::FormNotClosed { .. } => "FormNotClosed",
            Error::ZeroEdge => "ZeroEdge",
            Error::EqualLabels => "EqualLabels",
            Error::ZeroLeg => "ZeroLeg",
            Error::ZeroMetric => "ZeroMetric",
            Error::NullDiagonalDifference => "NullDiagonalDifference",
            Error::InvalidInput(_) => "InvalidInput",
            Error::At { .. } => unreachable!(),
        }
    }

    /// True for failures caused by degenerate geometry rather than malformed input
    /// or a failed property check.
    pub fn is_degeneracy(&self) -> bool {
        matches!(
            self.root(),
            Error::DegenerateQuad
                | Error::CollinearTriple
                | Error::VertexOnDiagonal
                | Error::GeneralPositionViolated
                | Error::CoincidentPoints
                | Error::ZeroE0Component
                | Error::ZeroNu
                | Error::EqualNuOnWhiteDiagonal
                | Error::VanishingLastComponent
                | Error::ZeroEdge
                | Error::EqualLabels
                | Error::ZeroLeg
                | Error::ZeroMetric
                | Error::NullDiagonalDifference
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
