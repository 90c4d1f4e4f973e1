#pragma once

// Every numerical tolerance used by the library and its tests lives here.

namespace s2wb::tol {

// sym-core
inline constexpr double kOrthogonality = 1e-12;    // |Q^T Q - I|_max
inline constexpr double kReconstruction = 1e-10;   // |Q D Q^T - M|_max / (1 + |M|_max)
inline constexpr double kEuler = 1e-10;            // sum lambda_i sigma_{k-1,i} = k sigma_k, relative
inline constexpr double kTraceNormIdentity = 1e-12;
inline constexpr double kGradientNormIdentity = 1e-10;
inline constexpr double kFiniteDifference = 1e-6;  // relative, central differences

// sigma2-op
inline constexpr double kOnManifold = 1e-9;        // |sigma_2 - 1| for an OperatorPoint
inline constexpr double kFormulaAgreement = 1e-10;

// jacobi-cert
inline constexpr double kSampleManifold = 1e-10;   // |sigma_2 - 1| for a ConstraintSample
inline constexpr double kFloorSlack = 1e-12;       // min lambda >= -K - slack
inline constexpr double kTangency = 1e-10;
inline constexpr double kTangencyPrecondition = 1e-9;
inline constexpr double kGram = 1e-10;
inline constexpr double kDiscriminantSlack = 1e-10;
inline constexpr double kDegenerateGradient = 1e-12;
inline constexpr double kProjectedFormAgreement = 1e-8;
inline constexpr double kExcessFloor = -1e-9;
inline constexpr double kDetBoundSlack = 1e-8;
inline constexpr double kSamplerMinRestTrace = 1e-6;
inline constexpr double kSamplerStarvation = 0.999;  // rejection fraction over a window
inline constexpr long kSamplerWindow = 100000;

// legendre-lewy
inline constexpr double kTransformResidual = 1e-9;
inline constexpr double kTraceIdentity = 1e-10;
inline constexpr double kQuotientIdentity = 1e-9;
inline constexpr double kConcavitySlack = 1e-10;
inline constexpr double kKbarFloorOffset = 1e-6;    // Kbar >= K + 1 + offset

// fd-solver
inline constexpr double kQuadraticStencil = 1e-12;
inline constexpr double kLinearSolve = 1e-12;
inline constexpr double kBranchTraceFloor = 0.70710678118654752;  // sqrt(2)/2
inline constexpr double kDampingFloor = 1.0 / 1048576.0;           // 2^-20
inline constexpr double kRefinementShrink = 1.8;
inline constexpr double kOscillationRefinement = 0.10;

}  // namespace s2wb::tol
