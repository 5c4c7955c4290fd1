#pragma once

#include <cstdint>
#include <string>

#include "lowdim/measure.hpp"
#include "lowdim/regularizer.hpp"

namespace lowdim {

struct DecodeOpts {
  double tol = 1e-9;        // relative primal-dual residual target
  double gap_tol = 1e-9;    // alternative stop: certified relative duality gap
  int max_iter = 200000;
  double feas_tol = 1e-6;   // relative slack on the data-fit ball
  int check_every = 10;
};

struct DecodeResult {
  Vector x_star;
  double objective = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  double certificate = 0.0;      // relative primal-dual gap estimate
  double primal_residual = 0.0;  // diagnostics at exit
  double dual_residual = 0.0;
};

// min f(z) subject to ||Az - y|| <= eps, by primal-dual (Chambolle-Pock)
// splitting with fixed steps from a power-iteration estimate of ||A||.
// Non-convergence is reported, never silent.
DecodeResult decode_convex(const MeasureOp& A, const Vector& y, double eps, const Regularizer& f,
                           DecodeOpts opts = {});

// Weak-duality certificate for any iterate: f(z) minus the dual value of the
// rescaled dual candidate u. Nonnegative for feasible z up to rounding.
double decode_duality_gap(const MeasureOp& A, const Vector& y, double eps, const Regularizer& f,
                          const Vector& z, const Vector& u);

// Ideal decoder at desk scale: enumerates admissible supports (all sizes up
// to k_j per level), least-squares fits each, and returns the feasible
// support minimizing (support size, residual), ties to enumeration order.
DecodeResult decode_ideal_small(const MeasureOp& A, const Vector& y, double eps,
                                const LevelsModel& model, std::size_t budget = 1000000);

std::string decode_result_to_json(const DecodeResult& r);

}  // namespace lowdim
