// Copyright 2026 The dauction Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dauction/clearing.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <utility>

#include "dauction/indifference.h"

namespace dauction {
namespace {

constexpr double kArmijo = 0.25;
constexpr double kFractionToBoundary = 0.99;
constexpr double kMinStep = 1e-14;
// A line search that fails with a decrement above this has hit the
// precision floor of the Newton system rather than the central path.
constexpr double kStallDecrement = 1e-6;
constexpr int kRefinements = 2;
constexpr double kDirectionTolerance = 1e-10;

// Barrier for one agent's constraint u_i(w) >= u_i(x_i), written as
// slack(w) > 0. Cobb-Douglas uses the single smooth slack
// sum_j a_j ln w_j - c; the linear families use rows A w - b.
class AgentBarrier {
 public:
  static AgentBarrier Build(const UtilityFunction& u, const Vector& x) {
    AgentBarrier b;
    const Eigen::Index n = x.size();
    if (const auto* cd = u.cobb_douglas()) {
      b.smooth_ = true;
      b.alpha_ = cd->alpha;
      b.alpha_sum_ = cd->alpha.sum();
      return b;
    }
    if (const auto* le = u.leontief()) {
      const double floor = (le->alpha.array() * x.array()).minCoeff();
      b.rows_ = le->alpha.asDiagonal();
      b.rhs_ = Vector::Constant(n, floor);
      return b;
    }
    const auto& phi = u.piecewise_linear()->phi;
    if (!phi.bounded() || phi.knots().size() < 2) {
      throw MarketError(ErrorCode::kUnsupportedUtility,
                        "unsupported utility family: piecewise-linear "
                        "valuations need a bounded domain with interior");
    }
    const double floor = x[0] + phi(x[1]);
    const auto& z = phi.knots();
    const auto& v = phi.values();
    const auto pieces = static_cast<Eigen::Index>(z.size() - 1);
    b.rows_.resize(pieces + 2, 2);
    b.rhs_.resize(pieces + 2);
    for (Eigen::Index k = 0; k < pieces; ++k) {
      const double slope = (v[k + 1] - v[k]) / (z[k + 1] - z[k]);
      b.rows_(k, 0) = 1.0;
      b.rows_(k, 1) = slope;
      b.rhs_[k] = floor - (v[k] - slope * z[k]);
    }
    b.rows_.row(pieces) << 0.0, 1.0;
    b.rhs_[pieces] = z.front();
    b.rows_.row(pieces + 1) << 0.0, -1.0;
    b.rhs_[pieces + 1] = -z.back();
    return b;
  }

  int num_constraints() const {
    return smooth_ ? 1 : static_cast<int>(rows_.rows());
  }

  // Slacks at the start point x + shift; false if not strictly positive.
  bool Start(const Vector& x, const Vector& shift) {
    w_ = x + shift;
    if (smooth_) {
      if ((w_.array() <= 0.0).any()) return false;
      slack_ = Vector(1);
      // Relative form keeps full precision for small shifts.
      slack_[0] = (alpha_.array() * (shift.array() / x.array()).log1p()).sum();
      return slack_[0] > 0.0;
    }
    slack_ = rows_ * w_ - rhs_;
    return (slack_.array() > 0.0).all();
  }

  const Vector& w() const { return w_; }
  bool smooth() const { return smooth_; }
  const Matrix& rows() const { return rows_; }
  const Vector& rhs() const { return rhs_; }
  const Vector& slack() const { return slack_; }

  // Gradient of the barrier and H^-1.
  void Derivatives(Vector& grad, Matrix& hinv) const {
    const Eigen::Index n = w_.size();
    if (smooth_) {
      const double s = slack_[0];
      grad = -(alpha_.array() / w_.array()).matrix() / s;
      // H = diag(a/(s w^2)) + v v^T with v = a/(s w); Sherman-Morrison.
      const double denom = s + alpha_sum_;
      hinv = s * (w_.array().square() / alpha_.array()).matrix().asDiagonal();
      hinv.noalias() -= (s / denom) * w_ * w_.transpose();
      return;
    }
    const Vector inv = slack_.cwiseInverse();
    grad = -rows_.transpose() * inv;
    // H = B^T B with B = S^-1 A. Inverting through the QR factor of B keeps
    // the conditioning at cond(B) rather than cond(B)^2.
    const Matrix scaled = inv.asDiagonal() * rows_;
    const Eigen::HouseholderQR<Matrix> qr(scaled);
    const Matrix r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    const Matrix r_inv = r.triangularView<Eigen::Upper>().solve(
        Matrix::Identity(n, n));
    hinv = r_inv * r_inv.transpose();
  }

  // H v, formed from the slacks directly rather than through H^-1.
  Vector HessianTimes(const Vector& v) const {
    if (smooth_) {
      const double s = slack_[0];
      const Vector rel = (v.array() / w_.array()).matrix();
      const double c = alpha_.dot(rel) / (s * s);
      return ((alpha_.array() * rel.array() / w_.array()) / s).matrix() +
             c * (alpha_.array() / w_.array()).matrix();
    }
    const Vector scaled =
        ((rows_ * v).array() / slack_.array().square()).matrix();
    return rows_.transpose() * scaled;
  }

  // dw^T H dw, summed termwise so that it stays accurate when t is large.
  double Curvature(const Vector& dw) const {
    if (smooth_) {
      const double s = slack_[0];
      const Vector rel = (dw.array() / w_.array()).matrix();
      const double v = alpha_.dot(rel) / s;
      return (alpha_.array() * rel.array().square()).sum() / s + v * v;
    }
    return ((rows_ * dw).array() / slack_.array()).square().sum();
  }

  // Largest step keeping the linear slacks (or w > 0) positive.
  double MaxStep(const Vector& dw) const {
    double step = kInf;
    if (smooth_) {
      for (Eigen::Index j = 0; j < dw.size(); ++j) {
        if (dw[j] < 0.0) step = std::min(step, -w_[j] / dw[j]);
      }
      return step;
    }
    const Vector rate = rows_ * dw;
    for (Eigen::Index k = 0; k < rate.size(); ++k) {
      if (rate[k] < 0.0) step = std::min(step, -slack_[k] / rate[k]);
    }
    return step;
  }

  // Change of the barrier value for a step, written into `trial`; false if
  // the step leaves the domain.
  bool Trial(const Vector& dw, double step, Vector& trial, double& change) const {
    if (smooth_) {
      const Vector ratio = (step * dw.array() / w_.array()).matrix();
      if ((ratio.array() <= -1.0).any()) return false;
      const double ds = (alpha_.array() * ratio.array().log1p()).sum();
      trial = Vector::Constant(1, slack_[0] + ds);
      if (!(trial[0] > 0.0) || ds / slack_[0] <= -1.0) return false;
      change = -std::log1p(ds / slack_[0]);
      return true;
    }
    const Vector ds = step * (rows_ * dw);
    trial = slack_ + ds;
    if (!(trial.array() > 0.0).all()) return false;
    change = -(ds.array() / slack_.array()).log1p().sum();
    return true;
  }

  void Accept(const Vector& dw, double step, Vector trial) {
    w_ += step * dw;
    slack_ = std::move(trial);
  }

 private:
  bool smooth_ = false;
  Vector alpha_;
  double alpha_sum_ = 0.0;
  Matrix rows_;
  Vector rhs_;
  Vector w_;
  Vector slack_;
};

Vector Row(const Matrix& m, int i) { return m.row(i).transpose(); }

struct PolishedPoint {
  std::vector<Vector> w;
  double r = 0.0;
  Vector price;
};

// Active-set polish for agents whose constraints are all linear. Rows with
// t s^2 < 1 (multiplier estimate above the slack) are taken as tight and
// the optimality system
//   sum_i w_i + r g = e,  a_k . w_i = b_k (tight k),
//   p = sum_k lambda_k a_k (per agent),  g . p = 1
// is solved directly. The result replaces the barrier point only if it is
// feasible, dual feasible and no worse.
std::optional<PolishedPoint> PolishLinear(
    const std::vector<AgentBarrier>& agents, const Vector& g,
    const Vector& total, double t, double r_barrier) {
  const int n = static_cast<int>(agents.size());
  const int m = static_cast<int>(g.size());
  std::vector<std::vector<Eigen::Index>> active(n);
  int num_active = 0;
  for (int i = 0; i < n; ++i) {
    if (agents[i].smooth()) return std::nullopt;
    const Vector& slack = agents[i].slack();
    for (Eigen::Index k = 0; k < slack.size(); ++k) {
      if (t * slack[k] * slack[k] < 1.0) active[i].push_back(k);
    }
    num_active += static_cast<int>(active[i].size());
  }
  const int nw = n * m;
  const int unknowns = nw + 1 + m + num_active;
  const int equations = m + num_active + nw + 1;
  Matrix a = Matrix::Zero(equations, unknowns);
  Vector b = Vector::Zero(equations);
  const int r_col = nw;
  const int p_col = nw + 1;
  int row = 0;
  for (int j = 0; j < m; ++j, ++row) {
    for (int i = 0; i < n; ++i) a(row, i * m + j) = 1.0;
    a(row, r_col) = g[j];
    b[row] = total[j];
  }
  int lambda_col = p_col + m;
  for (int i = 0; i < n; ++i) {
    const Matrix& rows = agents[i].rows();
    for (Eigen::Index k : active[i]) {
      a.block(row, i * m, 1, m) = rows.row(k);
      b[row] = agents[i].rhs()[k];
      ++row;
    }
    for (int j = 0; j < m; ++j, ++row) {
      a(row, p_col + j) = 1.0;
      for (std::size_t q = 0; q < active[i].size(); ++q) {
        a(row, lambda_col + static_cast<int>(q)) = -rows(active[i][q], j);
      }
    }
    lambda_col += static_cast<int>(active[i].size());
  }
  a.block(row, p_col, 1, m) = g.transpose();
  b[row] = 1.0;

  const Vector z = a.colPivHouseholderQr().solve(b);
  const double scale = 1.0 + total.cwiseAbs().maxCoeff();
  if (!z.allFinite() || (a * z - b).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    return std::nullopt;
  }
  if ((z.tail(num_active).array() < -1e-10).any()) return std::nullopt;
  PolishedPoint out;
  out.r = z[r_col];
  out.price = z.segment(p_col, m);
  for (int i = 0; i < n; ++i) {
    out.w.push_back(z.segment(i * m, m));
    const Vector slack = agents[i].rows() * out.w.back() - agents[i].rhs();
    if ((slack.array() < -1e-12 * scale).any()) return std::nullopt;
  }
  if (out.r < r_barrier - 1e-9 * scale) return std::nullopt;
  return out;
}

// Completes an outcome from the price and per-agent trades d_i (any
// representatives modulo g): canonical trades, payments, post-trade
// holdings and oracle surpluses.
void FinishOutcome(const ClearingProblem& problem, const Matrix& d,
                   double oracle_tolerance, ClearingOutcome& out) {
  const MarketScenario& sc = problem.scenario();
  const Vector& g = sc.numeraire();
  const int n = sc.num_agents();
  const int m = sc.num_assets();
  out.trades.resize(n, m);
  for (int i = 0; i < n; ++i) {
    const Vector di = Row(d, i);
    out.trades.row(i) = (di - (g.dot(di) / g.squaredNorm()) * g).transpose();
  }
  const Vector drift = out.trades.colwise().sum().transpose() / n;
  out.trades.rowwise() -= drift.transpose();

  out.payments.resize(n);
  out.agent_surplus.resize(n);
  out.post_allocation.resize(n, m);
  for (int i = 0; i < n; ++i) {
    const Vector xbar = Row(out.trades, i);
    const Vector xi = problem.holding(i);
    out.payments[i] = out.price.dot(xbar);
    out.post_allocation.row(i) =
        (xi + xbar - out.payments[i] * g).transpose();
    const IndifferenceOracle oracle(sc.agent(i).utility, xi, g,
                                    oracle_tolerance);
    out.agent_surplus[i] = oracle.ReservationPrice(xbar) - out.payments[i];
  }
  out.total_surplus = out.agent_surplus.sum();
}

void AssertInvariants(const ClearingOutcome& out,
                      const ClearingProblem& problem) {
  const auto violations = OutcomeInvariantViolations(out, problem);
  if (violations.empty()) return;
  std::string msg = "clearing invariant violated: " + violations.front();
  if (violations.size() > 1) {
    msg += " (+" + std::to_string(violations.size() - 1) + " more)";
  }
  throw MarketError(ErrorCode::kInvariantViolation, msg);
}

ClearingOutcome NoTradeOutcome(const ClearingProblem& problem) {
  const MarketScenario& sc = problem.scenario();
  ClearingOutcome out;
  const Vector& g = sc.numeraire();
  // Any normalized supergradient works; the agent's own is the natural one.
  out.price = g / g.squaredNorm();
  if (InDomainInterior(sc.agent(0).utility, problem.holding(0))) {
    const Vector q = UtilitySupergradient(sc.agent(0).utility,
                                          problem.holding(0));
    if (q.dot(g) > 0.0) out.price = q / q.dot(g);
  }
  out.trades = Matrix::Zero(sc.num_agents(), sc.num_assets());
  out.payments = Vector::Zero(sc.num_agents());
  out.agent_surplus = Vector::Zero(sc.num_agents());
  out.post_allocation = problem.allocation();
  out.total_surplus = 0.0;
  out.stats.method = "no-trade";
  return out;
}

}  // namespace

ClearingProblem::ClearingProblem(const MarketScenario& scenario,
                                 Allocation allocation)
    : scenario_(&scenario), allocation_(std::move(allocation)) {
  if (!IsFeasible(scenario, allocation_, 1e-8)) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "allocation is not feasible for the scenario");
  }
  floors_.resize(scenario.num_agents());
  for (int i = 0; i < scenario.num_agents(); ++i) {
    floors_[i] = UtilityValue(scenario.agent(i).utility, holding(i));
    if (!std::isfinite(floors_[i])) {
      throw MarketError(ErrorCode::kInvalidArgument,
                        "holding of agent '" + scenario.agent(i).id +
                            "' is outside its utility domain");
    }
  }
}

ClearingOutcome SolveClearing(const ClearingProblem& problem,
                              const SolverOptions& options) {
  const MarketScenario& sc = problem.scenario();
  const int n = sc.num_agents();
  const int m = sc.num_assets();
  const Vector& g = sc.numeraire();
  if (n == 1) return NoTradeOutcome(problem);

  std::vector<AgentBarrier> agents;
  agents.reserve(n);
  int constraints = 0;
  for (int i = 0; i < n; ++i) {
    agents.push_back(AgentBarrier::Build(sc.agent(i).utility,
                                         problem.holding(i)));
    constraints += agents.back().num_constraints();
  }

  const Matrix& x = problem.allocation();
  const Vector total = x.colwise().sum().transpose();
  const double eps =
      options.start_shift * (1.0 + x.cwiseAbs().maxCoeff());
  for (int i = 0; i < n; ++i) {
    if (!agents[i].Start(problem.holding(i), eps * g)) {
      throw MarketError(ErrorCode::kInfeasibleStart,
                        "infeasible-start failure: agent '" +
                            sc.agent(i).id +
                            "' has no strictly feasible start along g");
    }
  }
  double r = -n * eps;

  std::vector<Vector> grad(n), rho(n), dw(n), step_dw(n), trial(n);
  Vector step_nu;
  double step_dr = 0.0;
  std::vector<Matrix> hinv(n);
  Vector nu = Vector::Zero(m);
  double t = options.t_initial;
  int newton = 0;
  int outer = 0;
  double gap = constraints / t;
  // Multiplier estimate of the last properly centered iterate.
  Vector centered_price;

  for (;;) {
    // Centering by equality-constrained Newton steps.
    bool stalled = false;
    double decrement2 = 0.0;
    for (;;) {
      Vector residual = total - r * g;
      Matrix big_m = Matrix::Zero(m, m);
      for (int i = 0; i < n; ++i) {
        agents[i].Derivatives(grad[i], hinv[i]);
        residual -= agents[i].w();
        big_m += hinv[i];
      }
      // Newton system: H_i dw_i + nu = rho_i, sum_i dw_i + dr g = rho_e,
      // g.nu = rho_g, solved through the Schur complement M = sum H_i^-1.
      // M and H_i lose about t^2 in conditioning along the central path, so
      // the solution is refined against residuals formed without inverses.
      const Eigen::LDLT<Matrix> ldlt(big_m);
      const Vector y1 = ldlt.solve(g);
      const double gy1 = g.dot(y1);
      double dr = 0.0;
      nu.setZero();
      for (int i = 0; i < n; ++i) dw[i].setZero(m);
      double last_error = kInf;
      double eq_error = kInf;
      for (int pass = 0; pass <= kRefinements + 1; ++pass) {
        Vector rho_e = residual - dr * g;
        const double rho_g = t - g.dot(nu);
        Vector rhs = Vector::Zero(m);
        double error = std::abs(rho_g);
        for (int i = 0; i < n; ++i) {
          rho[i] = -grad[i] - nu;
          if (pass > 0) rho[i] -= agents[i].HessianTimes(dw[i]);
          rho_e -= dw[i];
          rhs += hinv[i] * rho[i];
          error = std::max(error, rho[i].cwiseAbs().maxCoeff());
        }
        const double eq = rho_e.cwiseAbs().maxCoeff();
        error = std::max(error, eq);
        // Refinement only helps while the solve is a contraction. Pass 0
        // measures the zero guess and pass 1 the plain solve.
        if (pass >= 2 && !(error < last_error)) {
          for (int i = 0; i < n; ++i) dw[i] -= step_dw[i];
          dr -= step_dr;
          nu -= step_nu;
          break;
        }
        last_error = error;
        eq_error = eq;
        if (pass == kRefinements + 1) break;
        const Vector y2 = ldlt.solve(rhs - rho_e);
        step_dr = (rho_g - g.dot(y2)) / gy1;
        step_nu = y2 + step_dr * y1;
        for (int i = 0; i < n; ++i) {
          step_dw[i] = hinv[i] * (rho[i] - step_nu);
          dw[i] += step_dw[i];
        }
        dr += step_dr;
        nu += step_nu;
      }
      // A direction that misses the equality constraints would let the
      // merit function trade feasibility for surplus; past this point the
      // Newton system is below working precision.
      if (!(eq_error <= kDirectionTolerance * (1.0 + total.cwiseAbs().maxCoeff()))) {
        stalled = true;
        decrement2 = kInf;
        break;
      }
      decrement2 = 0.0;
      for (int i = 0; i < n; ++i) decrement2 += agents[i].Curvature(dw[i]);
      // Directional derivative of the merit function, -t dr + sum grad.dw,
      // rewritten with the Newton equations. The residual term accounts for
      // whatever rounding has left off the equality manifold.
      const double slope = -decrement2 - nu.dot(residual);
      if (!std::isfinite(decrement2)) {
        throw MarketError(ErrorCode::kUnbounded,
                          "unbounded: Newton system became singular");
      }
      if (decrement2 / 2.0 <= options.newton_tol) break;
      if (++newton > options.max_newton_iterations) {
        throw MarketError(ErrorCode::kMaxIterations,
                          "max-iterations: Newton iteration limit reached");
      }

      double step = 1.0;
      for (int i = 0; i < n; ++i) {
        step = std::min(step, kFractionToBoundary * agents[i].MaxStep(dw[i]));
      }
      bool accepted = false;
      for (; slope < 0.0 && step >= kMinStep; step *= 0.5) {
        double change = -t * step * dr;
        bool inside = true;
        for (int i = 0; i < n && inside; ++i) {
          double ci = 0.0;
          inside = agents[i].Trial(dw[i], step, trial[i], ci);
          change += ci;
        }
        if (inside && change <= kArmijo * step * slope) {
          accepted = true;
          break;
        }
      }
      // No decrease at machine precision: the point is as central as it
      // gets at this t.
      if (!accepted) {
        stalled = true;
        break;
      }
      double wmax = 0.0;
      for (int i = 0; i < n; ++i) {
        agents[i].Accept(dw[i], step, std::move(trial[i]));
        wmax = std::max(wmax, agents[i].w().cwiseAbs().maxCoeff());
      }
      r += step * dr;
      if (wmax > options.divergence_bound) {
        throw MarketError(ErrorCode::kUnbounded,
                          "unbounded: iterates exceed the divergence bound");
      }
    }
    const bool precision_floor =
        stalled && decrement2 / 2.0 > kStallDecrement;
    if (precision_floor) {
      if (centered_price.size() == 0) {
        throw MarketError(ErrorCode::kUnbounded,
                          "unbounded: Newton system became singular");
      }
      break;
    }
    centered_price = nu / t;
    gap = constraints / t;
    if (gap <= options.tol_surplus * std::max(1.0, std::abs(r))) break;
    t *= options.t_factor;
    ++outer;
  }

  ClearingOutcome out;
  out.price = centered_price;
  out.stats.price_normalization_error = std::abs(g.dot(out.price) - 1.0);
  out.price /= g.dot(out.price);
  std::vector<Vector> w(n);
  for (int i = 0; i < n; ++i) w[i] = agents[i].w();
  out.stats.method = "barrier";
  // Linear families lose precision before the gap closes; their optimum is
  // a vertex that the active set pins down exactly.
  if (auto polished = PolishLinear(agents, g, total, t, r)) {
    w = std::move(polished->w);
    r = polished->r;
    out.price = polished->price;
    out.stats.method = "barrier/polished";
  }

  Matrix d(n, m);
  Vector residual = total - r * g;
  for (int i = 0; i < n; ++i) {
    d.row(i) = (w[i] - problem.holding(i)).transpose();
    residual -= w[i];
  }
  FinishOutcome(problem, d, options.oracle_tolerance, out);
  out.stats.outer_iterations = outer + 1;
  out.stats.newton_iterations = newton;
  out.stats.duality_gap = gap;
  out.stats.equality_residual = residual.cwiseAbs().maxCoeff();
  out.stats.barrier_surplus = r;
  AssertInvariants(out, problem);
  return out;
}

ClearingOutcome SolveClearingCashReduced(const ClearingProblem& problem,
                                         double tol) {
  const MarketScenario& sc = problem.scenario();
  const int n = sc.num_agents();
  const int m = sc.num_assets();
  const Vector& g = sc.numeraire();
  if (m < 2 || g[0] != 1.0 || !g.tail(m - 1).isZero(0.0)) {
    throw MarketError(ErrorCode::kInvalidArgument,
                      "cash reduction needs the numeraire (1, 0, ..., 0)");
  }
  Matrix alpha(n, m);
  for (int i = 0; i < n; ++i) {
    const auto* cd = sc.agent(i).utility.cobb_douglas();
    if (cd == nullptr) {
      throw MarketError(ErrorCode::kUnsupportedUtility,
                        "unsupported utility family: cash reduction is "
                        "implemented for Cobb-Douglas agents");
    }
    alpha.row(i) = cd->alpha.transpose();
  }
  const Matrix& x = problem.allocation();
  const int k = m - 1;

  // ln e_i(p) = sum_j a_ij ln(p_j x_ij / a_ij) at the utility of x_i.
  auto expenditures = [&](const Vector& p) {
    Vector e(n);
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < m; ++j) {
        s += alpha(i, j) * std::log(p[j] * x(i, j) / alpha(i, j));
      }
      e[i] = std::exp(s);
    }
    return e;
  };
  auto objective = [&](const Vector& p) {
    return (x * p).sum() - expenditures(p).sum();
  };
  auto full = [&](const Vector& q) {
    Vector p(m);
    p[0] = 1.0;
    p.tail(k) = q;
    return p;
  };

  Vector q = Vector::Ones(k);
  int iterations = 0;
  for (;; ++iterations) {
    if (iterations > 200) {
      throw MarketError(ErrorCode::kMaxIterations,
                        "max-iterations: reduced dual did not converge");
    }
    const Vector p = full(q);
    const Vector e = expenditures(p);
    Vector grad = Vector::Zero(k);
    Matrix hess = Matrix::Zero(k, k);
    for (int i = 0; i < n; ++i) {
      const Vector a = alpha.row(i).tail(k).transpose();
      const Vector aq = a.cwiseQuotient(q);
      grad += x.row(i).tail(k).transpose() - e[i] * aq;
      hess += e[i] * Matrix(aq.cwiseQuotient(q).asDiagonal());
      hess -= e[i] * aq * aq.transpose();
    }
    const Vector dq = -hess.ldlt().solve(grad);
    const double decrement2 = -grad.dot(dq);
    if (decrement2 / 2.0 <= tol) break;
    double step = 1.0;
    for (int j = 0; j < k; ++j) {
      if (dq[j] < 0.0) step = std::min(step, kFractionToBoundary * -q[j] / dq[j]);
    }
    const double h0 = objective(p);
    while (step >= kMinStep &&
           objective(full(q + step * dq)) > h0 - kArmijo * step * decrement2) {
      step *= 0.5;
    }
    if (step < kMinStep) break;
    q += step * dq;
  }

  ClearingOutcome out;
  out.price = full(q);
  const Vector e = expenditures(out.price);
  Matrix d = Matrix::Zero(n, m);
  for (int i = 0; i < n; ++i) {
    for (int j = 1; j < m; ++j) {
      d(i, j) = alpha(i, j) * e[i] / out.price[j] - x(i, j);
    }
  }
  out.trades = d;
  const Vector drift = out.trades.colwise().sum().transpose() / n;
  out.trades.rowwise() -= drift.transpose();
  out.payments.resize(n);
  out.agent_surplus.resize(n);
  out.post_allocation.resize(n, m);
  for (int i = 0; i < n; ++i) {
    const Vector xbar = Row(out.trades, i);
    out.payments[i] = out.price.dot(xbar);
    out.post_allocation.row(i) =
        (problem.holding(i) + xbar - out.payments[i] * g).transpose();
    out.agent_surplus[i] = out.price.dot(problem.holding(i)) - e[i];
  }
  out.total_surplus = out.agent_surplus.sum();
  out.stats.method = "cash-reduced-dual";
  out.stats.newton_iterations = iterations;
  out.stats.outer_iterations = 1;
  out.stats.equality_residual = out.trades.colwise().sum().cwiseAbs().maxCoeff();
  out.stats.barrier_surplus = out.total_surplus;
  AssertInvariants(out, problem);
  return out;
}

bool OrderBookRouteApplies(const MarketScenario& scenario) {
  const Vector& g = scenario.numeraire();
  if (scenario.num_assets() != 2 || !(g[0] > 0.0) || g[1] != 0.0) {
    return false;
  }
  for (const AgentSpec& agent : scenario.agents()) {
    const auto* pl = agent.utility.piecewise_linear();
    if (pl == nullptr || !pl->phi.bounded()) return false;
  }
  return true;
}

ClearingOutcome SolveClearingByOrderBook(const ClearingProblem& problem,
                                         TieRule tie_rule) {
  const MarketScenario& sc = problem.scenario();
  if (!OrderBookRouteApplies(sc)) {
    throw MarketError(ErrorCode::kUnsupportedUtility,
                      "unsupported utility family: the order-book route needs "
                      "two assets, a cash numeraire and bounded "
                      "piecewise-linear valuations");
  }
  const int n = sc.num_agents();
  const double g0 = sc.numeraire()[0];
  std::map<std::string, int> index;
  std::vector<LimitOrder> orders;
  for (int i = 0; i < n; ++i) {
    index[sc.agent(i).id] = i;
    const auto& phi = sc.agent(i).utility.piecewise_linear()->phi;
    for (LimitOrder& o :
         OrdersFromValuation(phi, problem.allocation()(i, 1), sc.agent(i).id)) {
      o.price /= g0;
      orders.push_back(std::move(o));
    }
  }
  const LimitOrderBook book(std::move(orders),
                            LimitOrderBook::Validation::kAllowTouching);
  const SingleAssetClearing clearing = ClearSingleAsset(book, tie_rule);

  double unit_price = 0.0;
  if (clearing.price) {
    unit_price = *clearing.price;
  } else if (std::isfinite(clearing.price_lo)) {
    unit_price = clearing.price_lo;
  } else if (std::isfinite(clearing.price_hi)) {
    unit_price = clearing.price_hi;
  }
  Matrix d = Matrix::Zero(n, 2);
  for (std::size_t k = 0; k < book.orders().size(); ++k) {
    const LimitOrder& o = book.orders()[k];
    const double q = clearing.fills[k];
    d(index.at(o.agent), 1) += o.side == Side::kBuy ? q : -q;
  }
  ClearingOutcome out;
  out.price = Vector(2);
  out.price << 1.0 / g0, unit_price;
  FinishOutcome(problem, d, 1e-12, out);
  out.stats.method = std::string("order-book/") + TieRuleName(tie_rule);
  out.stats.outer_iterations = 1;
  out.stats.barrier_surplus = clearing.surplus;
  AssertInvariants(out, problem);
  return out;
}

std::vector<std::string> OutcomeInvariantViolations(
    const ClearingOutcome& outcome, const ClearingProblem& problem,
    double tol) {
  const MarketScenario& sc = problem.scenario();
  const Vector& g = sc.numeraire();
  std::vector<std::string> out;
  auto fmt = [](const std::string& what, double value) {
    std::ostringstream os;
    os.precision(3);
    os << what << " (" << std::scientific << value << ")";
    return os.str();
  };
  const double balance = outcome.trades.colwise().sum().cwiseAbs().maxCoeff();
  if (!(balance <= tol)) out.push_back(fmt("trades do not sum to zero", balance));
  const double norm_err = std::abs(g.dot(outcome.price) - 1.0);
  if (!(norm_err <= tol)) {
    out.push_back(fmt("numeraire is not priced at 1", norm_err));
  }
  const Vector moved = outcome.post_allocation.colwise().sum().transpose() -
                       problem.allocation().colwise().sum().transpose();
  const double conservation = moved.cwiseAbs().maxCoeff();
  if (!(conservation <= tol)) {
    out.push_back(fmt("post-trade allocation is not feasible", conservation));
  }
  for (int i = 0; i < sc.num_agents(); ++i) {
    const std::string& id = sc.agent(i).id;
    if (!(outcome.agent_surplus[i] >= -tol)) {
      out.push_back(fmt("negative surplus for agent '" + id + "'",
                        outcome.agent_surplus[i]));
    }
    const double before = problem.floors()[i];
    const double after =
        UtilityValue(sc.agent(i).utility, Row(outcome.post_allocation, i));
    if (!(after >= before - tol)) {
      out.push_back(fmt("agent '" + id + "' is worse off", before - after));
    }
  }
  return out;
}

bool SlaterReport::ok() const {
  return std::all_of(assets.begin(), assets.end(),
                     [](const SlaterAsset& a) { return a.ok(); });
}

SlaterReport CheckSlater(const MarketScenario& scenario, const Allocation& x,
                         double eps) {
  SlaterReport report;
  report.eps = eps;
  const int m = scenario.num_assets();
  report.assets.resize(m);
  auto finite_price = [](const IndifferenceOracle& oracle, const Vector& y) {
    try {
      return std::isfinite(oracle.ReservationPrice(y));
    } catch (const MarketError&) {
      return false;
    }
  };
  for (int i = 0; i < scenario.num_agents(); ++i) {
    const Vector xi = Row(x, i);
    if (!std::isfinite(UtilityValue(scenario.agent(i).utility, xi))) continue;
    const IndifferenceOracle oracle(scenario.agent(i).utility, xi,
                                    scenario.numeraire());
    for (int j = 0; j < m; ++j) {
      SlaterAsset& a = report.assets[j];
      const Vector unit = eps * Vector::Unit(m, j);
      if (a.buyer < 0 && finite_price(oracle, unit)) a.buyer = i;
      if (a.seller < 0 && finite_price(oracle, -unit)) a.seller = i;
    }
  }
  return report;
}

RecessionReport CheckRecession(const MarketScenario& scenario) {
  bool any_linear = false;
  for (const AgentSpec& agent : scenario.agents()) {
    if (agent.utility.piecewise_linear()) any_linear = true;
  }
  if (!any_linear) {
    return {true, "recession cones lie in the nonnegative orthant"};
  }
  // Two assets: every cone is an arc of directions [lo, hi] around the cash
  // axis (angle 0) with -pi < lo <= 0 <= hi < pi.
  const int n = scenario.num_agents();
  std::vector<double> lo(n), hi(n);
  for (int i = 0; i < n; ++i) {
    const auto* pl = scenario.agent(i).utility.piecewise_linear();
    if (pl == nullptr) {
      lo[i] = 0.0;
      hi[i] = std::numbers::pi / 2.0;
      continue;
    }
    const auto& phi = pl->phi;
    hi[i] = phi.right_slope() ? std::atan2(1.0, -*phi.right_slope()) : 0.0;
    lo[i] = phi.left_slope() ? std::atan2(-1.0, *phi.left_slope()) : 0.0;
  }
  constexpr double kTouch = 1e-12;
  for (int i = 0; i < n; ++i) {
    double others_lo = kInf;
    double others_hi = kNegInf;
    for (int k = 0; k < n; ++k) {
      if (k == i) continue;
      others_lo = std::min(others_lo, lo[k]);
      others_hi = std::max(others_hi, hi[k]);
    }
    if (others_lo == kInf) continue;
    // The others' cones generate the arc [others_lo, others_hi] (the whole
    // plane beyond width pi); -C_i is the arc opposite [lo_i, hi_i].
    const bool plane = others_hi - others_lo > std::numbers::pi + kTouch;
    if (plane || others_hi >= lo[i] + std::numbers::pi - kTouch ||
        others_lo <= hi[i] - std::numbers::pi + kTouch) {
      return {false, "agent '" + scenario.agent(i).id +
                         "' can absorb a nonzero reallocation that all other "
                         "agents also accept without bound"};
    }
  }
  return {true, "recession cones admit no nonzero balanced direction"};
}

bool KktReport::Passes(const Vector& price, double balance_tol) const {
  return max_supergradient_violation <= 1e-6 * (1.0 + price.norm()) &&
         balance_residual <= balance_tol &&
         price_normalization_error <= balance_tol;
}

KktReport VerifyKkt(const ClearingOutcome& outcome,
                    const ClearingProblem& problem, int directions,
                    std::uint64_t seed) {
  const MarketScenario& sc = problem.scenario();
  const Vector& g = sc.numeraire();
  const int m = sc.num_assets();
  KktReport report;
  report.directions_per_agent = directions;
  report.balance_residual =
      outcome.trades.colwise().sum().cwiseAbs().maxCoeff();
  report.price_normalization_error = std::abs(g.dot(outcome.price) - 1.0);
  report.max_supergradient_violation = kNegInf;
  Rng rng(seed);
  for (int i = 0; i < sc.num_agents(); ++i) {
    const Vector xi = problem.holding(i);
    const IndifferenceOracle oracle(sc.agent(i).utility, xi, g);
    const Vector xbar = Row(outcome.trades, i);
    const double base = oracle.ReservationPrice(xbar);
    const double scale = 1.0 + xi.cwiseAbs().maxCoeff();
    for (int s = 0; s < directions; ++s) {
      Vector dir(m);
      for (int j = 0; j < m; ++j) dir[j] = rng.Normal();
      // Magnitudes log-uniform over six decades below the holding scale.
      const double size = scale * std::pow(10.0, -6.0 * rng.Uniform01());
      const Vector step = size * dir.normalized();
      const double value = oracle.ReservationPrice(xbar + step);
      const double violation = value - base - outcome.price.dot(step);
      if (violation > report.max_supergradient_violation) {
        report.max_supergradient_violation = violation;
        report.worst_agent = i;
      }
    }
  }
  if (directions == 0 || sc.num_agents() == 0) {
    report.max_supergradient_violation = 0.0;
  }
  return report;
}

}  // namespace dauction
