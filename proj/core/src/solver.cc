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

#include "freehand/solver.h"

#include <algorithm>
#include <cmath>
#include <utility>

#include "freehand/errors.h"

namespace freehand {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxDykstraSweeps = 20000;
constexpr double kEps = std::numeric_limits<double>::epsilon();

}  // namespace

ParamDomain::ParamDomain(int dim)
    : dim_(dim),
      lo_(Eigen::VectorXd::Constant(dim, -kInf)),
      hi_(Eigen::VectorXd::Constant(dim, kInf)) {}

ParamDomain ParamDomain::Box(int dim, double lo, double hi) {
  ParamDomain d(dim);
  d.lo_.setConstant(lo);
  d.hi_.setConstant(hi);
  return d;
}

ParamDomain ParamDomain::Ball(int dim, double radius) {
  ParamDomain d(dim);
  d.radius_ = radius;
  return d;
}

void ParamDomain::AddSlab(const Eigen::VectorXd& row, double lo, double hi) {
  int nonzero = 0, index = -1;
  for (int i = 0; i < dim_; ++i) {
    if (row(i) != 0.0) {
      ++nonzero;
      index = i;
    }
  }
  if (nonzero == 0) {
    if (lo > 0.0 || hi < 0.0) throw InvalidInput("empty parameter domain");
    return;
  }
  if (nonzero == 1) {
    double c = row(index), a = lo / c, b = hi / c;
    if (c < 0) std::swap(a, b);
    lo_(index) = std::max(lo_(index), a);
    hi_(index) = std::min(hi_(index), b);
    if (lo_(index) > hi_(index)) throw InvalidInput("empty parameter domain");
  } else {
    slab_rows_.push_back(row);
    slab_lo_.push_back(lo);
    slab_hi_.push_back(hi);
  }
  Simplify();
}

void ParamDomain::Simplify() {
  // A ball that contains the whole box adds nothing.
  if (!std::isfinite(radius_) || !slab_rows_.empty()) return;
  double corner = 0.0;
  for (int i = 0; i < dim_; ++i) {
    double m = std::max(std::abs(lo_(i)), std::abs(hi_(i)));
    if (!std::isfinite(m)) return;
    corner += m * m;
  }
  if (std::sqrt(corner) <= radius_) radius_ = kInf;
}

bool ParamDomain::box_only() const {
  return !std::isfinite(radius_) && slab_rows_.empty();
}

Eigen::VectorXd ParamDomain::Project(const Eigen::VectorXd& x) const {
  auto clamp = [&](const Eigen::VectorXd& y) {
    return Eigen::VectorXd(y.cwiseMax(lo_).cwiseMin(hi_));
  };
  auto ball = [&](const Eigen::VectorXd& y) {
    double n = y.norm();
    return n > radius_ ? Eigen::VectorXd(y * (radius_ / n)) : y;
  };
  const bool has_box =
      lo_.array().isFinite().any() || hi_.array().isFinite().any();
  const bool has_ball = std::isfinite(radius_);
  if (slab_rows_.empty() && !(has_box && has_ball)) {
    return has_ball ? ball(x) : clamp(x);
  }
  if (slab_rows_.empty()) {
    // Box and centered ball: the projection is clamp(x / (1 + lambda)) for
    // the smallest lambda >= 0 that lands inside the ball.
    Eigen::VectorXd y = clamp(x);
    if (y.norm() <= radius_) return y;
    double lo = 0.0, hi = 1.0;
    while (clamp(x / (1.0 + hi)).norm() > radius_ && hi < 1e300) hi *= 2.0;
    for (int k = 0; k < 200 && hi - lo > 1e-15 * (1.0 + hi); ++k) {
      double mid = 0.5 * (lo + hi);
      (clamp(x / (1.0 + mid)).norm() > radius_ ? lo : hi) = mid;
    }
    return clamp(x / (1.0 + hi));
  }
  // Dykstra's alternating projections over box, ball and each slab.
  const int pieces = 2 + static_cast<int>(slab_rows_.size());
  std::vector<Eigen::VectorXd> corr(pieces, Eigen::VectorXd::Zero(dim_));
  Eigen::VectorXd y = x;
  for (int sweep = 0; sweep < kMaxDykstraSweeps; ++sweep) {
    Eigen::VectorXd start = y;
    for (int k = 0; k < pieces; ++k) {
      Eigen::VectorXd z = y + corr[k];
      Eigen::VectorXd p;
      if (k == 0) {
        p = clamp(z);
      } else if (k == 1) {
        p = ball(z);
      } else {
        const auto& row = slab_rows_[k - 2];
        double v = row.dot(z), n2 = row.squaredNorm();
        p = z;
        if (v < slab_lo_[k - 2]) p += ((slab_lo_[k - 2] - v) / n2) * row;
        if (v > slab_hi_[k - 2]) p += ((slab_hi_[k - 2] - v) / n2) * row;
      }
      corr[k] = z - p;
      y = p;
    }
    if ((y - start).norm() <= 1e-15 * (1.0 + y.norm())) break;
  }
  return y;
}

bool ParamDomain::Contains(const Eigen::VectorXd& x, double tol) const {
  for (int i = 0; i < dim_; ++i) {
    if (x(i) < lo_(i) - tol || x(i) > hi_(i) + tol) return false;
  }
  if (x.norm() > radius_ * (1.0 + tol) + tol) return false;
  for (std::size_t k = 0; k < slab_rows_.size(); ++k) {
    double v = slab_rows_[k].dot(x);
    if (v < slab_lo_[k] - tol || v > slab_hi_[k] + tol) return false;
  }
  return true;
}

bool ParamDomain::BlockedByBox(const Eigen::VectorXd& x, int i,
                               double direction) const {
  const double eps = 1e-12;
  if (direction < 0 && x(i) <= lo_(i) + eps * (1.0 + std::abs(lo_(i)))) {
    return true;
  }
  return direction > 0 && x(i) >= hi_(i) - eps * (1.0 + std::abs(hi_(i)));
}

ComparisonLikelihood::ComparisonLikelihood(int dim,
                                           std::vector<ComparisonGroup> groups,
                                           LinkFunction link)
    : dim_(dim),
      groups_(std::move(groups)),
      link_(std::move(link)),
      sigmoid_(link_.name == "sigmoid") {}

double ComparisonLikelihood::Value(const Eigen::VectorXd& x) const {
  double total = 0.0;
  for (const auto& gr : groups_) {
    double delta = gr.z.dot(x);
    if (gr.n1 > 0) total += gr.n1 * link_.LogProb(delta);
    if (gr.n0 > 0) total += gr.n0 * link_.LogComplement(delta);
  }
  return total;
}

double ComparisonLikelihood::Derivatives(const Eigen::VectorXd& x,
                                         Eigen::VectorXd* grad,
                                         Eigen::MatrixXd* fisher) const {
  grad->setZero(dim_);
  fisher->setZero(dim_, dim_);
  double total = 0.0;
  for (const auto& gr : groups_) {
    double delta = gr.z.dot(x);
    if (gr.n1 > 0) total += gr.n1 * link_.LogProb(delta);
    if (gr.n0 > 0) total += gr.n0 * link_.LogComplement(delta);
    double slope, weight;
    if (sigmoid_) {
      double p = Sigmoid(delta);
      slope = gr.n1 * (1.0 - p) - gr.n0 * p;
      weight = (gr.n1 + gr.n0) * p * (1.0 - p);
    } else {
      double p = link_.forward(delta), dp = link_.derivative(delta);
      slope = gr.n1 * dp / std::max(p, kLogClamp) -
              gr.n0 * dp / std::max(1.0 - p, kLogClamp);
      weight = (gr.n1 + gr.n0) * dp * dp / std::max(p * (1.0 - p), kLogClamp);
    }
    *grad += slope * gr.z;
    fisher->selfadjointView<Eigen::Lower>().rankUpdate(gr.z, weight);
  }
  *fisher = fisher->selfadjointView<Eigen::Lower>();
  return total;
}

namespace {

// Maximizes l(x) - t <g, x> - (lambda / 2) |x|^2 over the domain.
SolveResult NewtonAscent(const ComparisonLikelihood& lik,
                         const ParamDomain& domain, const Eigen::VectorXd& g,
                         double t, double lambda, const Eigen::VectorXd& x0,
                         const MleOptions& opts) {
  const int n = lik.dim();
  auto objective = [&](const Eigen::VectorXd& y, double* ll) {
    *ll = lik.Value(y);
    return *ll - t * g.dot(y) - 0.5 * lambda * y.squaredNorm();
  };
  SolveResult res;
  Eigen::VectorXd x = domain.Project(x0);
  Eigen::VectorXd grad(n);
  Eigen::MatrixXd fisher(n, n);
  double eta = -1.0;
  for (int it = 0;; ++it) {
    double ll = lik.Derivatives(x, &grad, &fisher);
    grad -= t * g + lambda * x;
    fisher.diagonal().array() += lambda;
    double obj = ll - t * g.dot(x) - 0.5 * lambda * x.squaredNorm();
    double gn = (x - domain.Project(x + grad)).norm();
    res.iterations = it;
    res.objective = obj;
    res.loglik = ll;
    res.grad_norm = gn;
    if (opts.keep_trace) res.trace.push_back({it, obj, gn});
    if (gn <= opts.grad_tol) {
      res.converged = true;
      break;
    }
    if (it >= opts.max_iters) break;

    // Newton direction on coordinates not pinned by the box. The Fisher
    // matrix is singular along directions the data cannot see, so the ridge
    // grows until a step is accepted.
    std::vector<int> free;
    for (int i = 0; i < n; ++i) {
      if (!domain.BlockedByBox(x, i, grad(i))) free.push_back(i);
    }
    const int m = static_cast<int>(free.size());
    Eigen::MatrixXd sub(m, m);
    Eigen::VectorXd rhs(m);
    for (int a = 0; a < m; ++a) {
      rhs(a) = grad(free[a]);
      for (int b = 0; b < m; ++b) sub(a, b) = fisher(free[a], free[b]);
    }
    const double scale =
        m > 0 ? 1.0 + sub.diagonal().cwiseAbs().maxCoeff() : 1.0;
    bool accepted = false;
    Eigen::VectorXd next;
    double next_obj = 0.0, next_ll = 0.0;
    for (double ridge = 1e-10 * scale;
         m > 0 && !accepted && ridge < 1e8 * scale; ridge *= 1e3) {
      Eigen::MatrixXd reg = sub;
      reg.diagonal().array() += ridge;
      Eigen::VectorXd step_free = reg.ldlt().solve(rhs);
      Eigen::VectorXd dir = Eigen::VectorXd::Zero(n);
      for (int a = 0; a < m; ++a) dir(free[a]) = step_free(a);
      if (!dir.allFinite()) continue;
      double step = 1.0;
      for (int k = 0; k < 30 && !accepted; ++k, step *= 0.5) {
        next = domain.Project(x + step * dir);
        double moved = grad.dot(next - x);
        if (moved <= 0.0) continue;
        next_obj = objective(next, &next_ll);
        accepted = next_obj > obj && next_obj >= obj + 1e-4 * moved;
      }
      if (!accepted) {
        // Near the optimum the objective change drops below its rounding
        // error; take the full step if it is flat to that precision and
        // shrinks the stationarity measure.
        next = domain.Project(x + dir);
        next_obj = objective(next, &next_ll);
        if (std::abs(next_obj - obj) <= 64 * kEps * (1.0 + std::abs(obj))) {
          Eigen::VectorXd g2(n);
          Eigen::MatrixXd f2(n, n);
          lik.Derivatives(next, &g2, &f2);
          g2 -= t * g + lambda * next;
          accepted = (next - domain.Project(next + g2)).norm() < 0.5 * gn;
        }
      }
    }
    if (!accepted) {
      // Projected gradient with a sufficient-increase test.
      if (eta <= 0.0) {
        eta =
            opts.initial_step / (1.0 + fisher.diagonal().cwiseAbs().maxCoeff());
      }
      for (int k = 0; k < 80 && !accepted; ++k) {
        next = domain.Project(x + eta * grad);
        Eigen::VectorXd diff = next - x;
        next_obj = objective(next, &next_ll);
        if (diff.squaredNorm() == 0.0) break;
        accepted =
            next_obj > obj &&
            next_obj >= obj + grad.dot(diff) - diff.squaredNorm() / (2.0 * eta);
        if (!accepted) eta *= 0.5;
      }
      if (accepted) eta *= 2.0;
    }
    if (!accepted) break;  // stalled at floating-point resolution
    x = std::move(next);
  }
  res.x = x;
  return res;
}

}  // namespace

SolveResult MaximizePenalized(const ComparisonLikelihood& lik,
                              const ParamDomain& domain,
                              const Eigen::VectorXd& g, double t,
                              const Eigen::VectorXd& x0,
                              const MleOptions& opts) {
  const double radius = domain.radius();
  if (!std::isfinite(radius)) {
    return NewtonAscent(lik, domain, g, t, 0.0, x0, opts);
  }
  // The ball moves into a multiplier: |x(lambda)| decreases in lambda, so
  // bisect for the smallest lambda >= 0 with |x(lambda)| <= radius.
  ParamDomain relaxed = domain;
  relaxed.SetBall(std::numeric_limits<double>::infinity());
  int iterations = 0;
  auto solve = [&](double lambda, const Eigen::VectorXd& start) {
    SolveResult r = NewtonAscent(lik, relaxed, g, t, lambda, start, opts);
    iterations += r.iterations;
    return r;
  };
  SolveResult best = solve(0.0, domain.Project(x0));
  if (best.x.norm() > radius) {
    // Illinois regula falsi on phi(lambda) = |x(lambda)| - radius, keeping
    // the feasible end.
    double lo = 0.0, hi = 1.0;
    double f_lo = best.x.norm() - radius;
    SolveResult at_hi = solve(hi, best.x);
    while (at_hi.x.norm() > radius && hi < 1e12) {
      lo = hi;
      f_lo = at_hi.x.norm() - radius;
      hi *= 4.0;
      at_hi = solve(hi, at_hi.x);
    }
    double f_hi = at_hi.x.norm() - radius;
    int side = 0;
    for (int k = 0; k < 200 && hi - lo > 1e-14 * (1.0 + hi); ++k) {
      if (f_hi >= -1e-12 * radius) break;
      double mid = hi - f_hi * (hi - lo) / (f_hi - f_lo);
      const double width = hi - lo;
      if (!(mid > lo + 1e-3 * width && mid < hi - 1e-3 * width)) {
        mid = 0.5 * (lo + hi);
      }
      SolveResult r = solve(mid, at_hi.x);
      const double f = r.x.norm() - radius;
      if (f > 0.0) {
        lo = mid;
        f_lo = f;
        if (side == -1) f_hi *= 0.5;
        side = -1;
      } else {
        hi = mid;
        f_hi = f;
        at_hi = std::move(r);
        if (side == 1) f_lo *= 0.5;
        side = 1;
      }
    }
    best = std::move(at_hi);
  }
  // Report against the original problem.
  SolveResult res;
  res.x = domain.Project(best.x);
  Eigen::VectorXd grad(lik.dim());
  Eigen::MatrixXd fisher(lik.dim(), lik.dim());
  res.loglik = lik.Derivatives(res.x, &grad, &fisher);
  grad -= t * g;
  res.objective = res.loglik - t * g.dot(res.x);
  res.grad_norm = (res.x - domain.Project(res.x + grad)).norm();
  res.iterations = iterations;
  res.converged =
      best.converged &&
      res.grad_norm <= std::max(opts.grad_tol, 1e-9 * (1.0 + grad.norm()));
  res.trace = std::move(best.trace);
  return res;
}

}  // namespace freehand
