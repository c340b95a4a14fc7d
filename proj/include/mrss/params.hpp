#pragma once

// Parameter set of the mixed-response model and its unconstrained block coordinates.

#include <string>
#include <vector>

#include "mrss/lgss.hpp"
#include "mrss/model.hpp"

namespace mrss {

inline constexpr double kTransitionBound = 1.0 - 1e-6;

struct ParameterSet {
  Matrix lambda;               // channels x states; structural cells hold their fixed value
  Matrix beta;                 // channels x covariates
  std::vector<Vector> T_diag;  // per group, all states (inactive entries unused)
  Vector c;                    // states
  Matrix Q;                    // states x states
  Vector H_diag;               // channels; used for Gaussian channels only

  // Shapes match the spec; Throws LayoutMismatch otherwise.
  void check_layout(const MrssSpec& spec) const;
};

enum class Block { LambdaBeta, Transition, Intercept, Variance };
const char* block_name(Block b);

// Number of free parameters (counted for AIC and LRT degrees of freedom).
int n_params(const MrssSpec& spec);
int block_size(const MrssSpec& spec, Block block);

// Unconstrained coordinates of a block and the inverse map. unpack writes only the block's
// entries of `psi`; everything else is left unchanged.
Vector pack(const MrssSpec& spec, const ParameterSet& psi, Block block);
void unpack(const MrssSpec& spec, Block block, const Vector& u, ParameterSet& psi);

// Free/fixed pattern of every parameter; two specs are nested when each free parameter of the
// smaller one is free in the larger one.
struct ParameterMask {
  std::vector<std::vector<char>> lambda_free;
  std::vector<std::vector<char>> beta_free;
  std::vector<std::vector<char>> q_free;  // lower triangle incl. diagonal
  std::vector<std::vector<char>> t_free;  // groups x states
  std::vector<char> h_free;
};
ParameterMask parameter_mask(const MrssSpec& spec);
// True when every free entry of `nested` is free in `full` (same dimensions required).
bool mask_contains(const ParameterMask& full, const ParameterMask& nested);

// Q from the lower-triangular factor with log diagonal; entries of the factor for independent
// pairs are solved so that the corresponding Q entries are exactly zero.
Matrix q_from_factor(const MrssSpec& spec, const Matrix& factor_free);

// Heuristic starting point: Q = I, T = 0.5, free loadings 0.1 (fixed cells at their value),
// beta channelwise least squares on link-transformed data, H = residual variance, c = 0.
ParameterSet heuristic_seed(const MrssSpec& spec, const std::vector<SubjectData>& subjects);

// Sign of each state column is chosen so that its first free loading is nonnegative, unless the
// column has a fixed nonzero loading. Flips the state's noise covariances and intercept with it.
void canonicalize_signs(const MrssSpec& spec, ParameterSet& psi);

}  // namespace mrss
