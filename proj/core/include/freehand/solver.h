// Copyright 2026 The Freehand Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Concave pairwise-comparison likelihoods over a linear parameterization,
// and the projected ascent used for every continuous fit in the library.
//
// A comparison group is a distinct pair of compared items with difference
// vector z = phi(item1) - phi(item0) and label counts n1 (item1 preferred)
// and n0. Its contribution is n1 log Phi(z.x) + n0 log(1 - Phi(z.x)).

#ifndef FREEHAND_SOLVER_H_
#define FREEHAND_SOLVER_H_

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

#include "freehand/preference.h"

namespace freehand {

struct MleOptions {
  int max_iters = 5000;
  double grad_tol = 1e-8;
  double initial_step = 1.0;
  int restarts = 1;
  bool keep_trace = false;
};

struct TraceRow {
  int iteration;
  double objective;
  double grad_norm;
};

// Intersection of a coordinate box, a centered Euclidean ball and slabs
// lo <= <row, x> <= hi. Unused pieces are left infinite/empty.
class ParamDomain {
 public:
  explicit ParamDomain(int dim = 0);

  static ParamDomain Box(int dim, double lo, double hi);
  static ParamDomain Ball(int dim, double radius);

  // Single-coordinate slabs are folded into the box.
  void AddSlab(const Eigen::VectorXd& row, double lo, double hi);
  void SetBall(double radius) { radius_ = radius; }

  int dim() const { return dim_; }
  Eigen::VectorXd Project(const Eigen::VectorXd& x) const;
  bool Contains(const Eigen::VectorXd& x, double tol = 1e-9) const;
  // True if coordinate i sits on a box face that `direction` pushes across.
  bool BlockedByBox(const Eigen::VectorXd& x, int i, double direction) const;
  bool box_only() const;
  double radius() const { return radius_; }

 private:
  void Simplify();

  int dim_;
  Eigen::VectorXd lo_, hi_;
  double radius_ = std::numeric_limits<double>::infinity();
  std::vector<Eigen::VectorXd> slab_rows_;
  std::vector<double> slab_lo_, slab_hi_;
};

struct ComparisonGroup {
  Eigen::VectorXd z;
  double n1 = 0.0;
  double n0 = 0.0;
};

class ComparisonLikelihood {
 public:
  ComparisonLikelihood(int dim, std::vector<ComparisonGroup> groups,
                       LinkFunction link);

  int dim() const { return dim_; }
  double Value(const Eigen::VectorXd& x) const;
  // Gradient and the Fisher information (a PSD stand-in for the negative
  // Hessian; exact for the sigmoid link).
  double Derivatives(const Eigen::VectorXd& x, Eigen::VectorXd* grad,
                     Eigen::MatrixXd* fisher) const;

 private:
  int dim_;
  std::vector<ComparisonGroup> groups_;
  LinkFunction link_;
  bool sigmoid_;
};

struct SolveResult {
  Eigen::VectorXd x;
  double objective = 0.0;  // l(x) - t * <g, x>
  double loglik = 0.0;     // l(x)
  int iterations = 0;
  double grad_norm = 0.0;  // ||x - P(x + grad)||
  bool converged = false;
  std::vector<TraceRow> trace;
};

// Maximizes l(x) - t * <g, x> over the domain, starting from P(x0). Newton
// steps on the free coordinates, with a projected-gradient fallback and
// backtracking by halving; stops once ||x - P(x + grad)|| <= grad_tol.
// Does not throw on non-convergence; callers decide.
SolveResult MaximizePenalized(const ComparisonLikelihood& lik,
                              const ParamDomain& domain,
                              const Eigen::VectorXd& g, double t,
                              const Eigen::VectorXd& x0,
                              const MleOptions& opts);

}  // namespace freehand

#endif  // FREEHAND_SOLVER_H_
