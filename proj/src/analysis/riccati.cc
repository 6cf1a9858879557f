#include "hpo/analysis/riccati.h"

#include <Eigen/Dense>
#include <stdexcept>

#include "hpo/autodiff/ops.h"

namespace hpo::analysis {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                          Eigen::RowMajor>;

Mat ToEigen(const ad::Tensor& t) {
  if (t.rank() != 2) throw std::invalid_argument("riccati: expected a matrix");
  Mat m(t.dim(0), t.dim(1));
  std::copy(t.data().begin(), t.data().end(), m.data());
  return m;
}

ad::Tensor FromEigen(const Mat& m) {
  return ad::Tensor::Matrix(m.rows(), m.cols(),
                            std::vector<double>(m.data(), m.data() + m.size()));
}

}  // namespace

RiccatiSolution RiccatiSolve(const ad::Tensor& A, const ad::Tensor& B,
                             const ad::Tensor& Q, const ad::Tensor& R,
                             std::size_t steps) {
  const Mat a = ToEigen(A), b = ToEigen(B), q = ToEigen(Q), r = ToEigen(R);
  const auto n = a.rows();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n ||
      r.rows() != b.cols() || r.cols() != b.cols()) {
    throw std::invalid_argument("riccati: inconsistent matrix shapes");
  }
  RiccatiSolution sol;
  sol.K.resize(steps);
  sol.P.resize(steps + 1);
  Mat P = q;
  sol.P[steps] = FromEigen(P);
  for (std::size_t t = steps; t-- > 0;) {
    const Mat inner = r + b.transpose() * P * b;
    Eigen::FullPivLU<Mat> lu(inner);
    if (!lu.isInvertible()) {
      throw std::domain_error("riccati: singular R + B'PB at t=" +
                              std::to_string(t));
    }
    const Mat K = lu.solve(b.transpose() * P * a);
    Mat next = q + a.transpose() * P * (a - b * K);
    P = 0.5 * (next + next.transpose());
    sol.K[t] = FromEigen(K);
    sol.P[t] = FromEigen(P);
  }
  return sol;
}

RiccatiSolution SlqrRiccati(const envs::SlqrParams& params, std::size_t mode) {
  if (mode >= params.B.size()) {
    throw std::out_of_range("riccati: mode " + std::to_string(mode) +
                            " out of range");
  }
  if (params.T == 0) throw std::invalid_argument("riccati: empty horizon");
  return RiccatiSolve(params.A, params.B[mode], params.Q, params.R,
                      params.T - 1);
}

double QuadraticCost(const ad::Tensor& P, std::span<const double> s0) {
  const Mat p = ToEigen(P);
  if (static_cast<std::size_t>(p.rows()) != s0.size()) {
    throw std::invalid_argument("riccati: state dimension mismatch");
  }
  Eigen::Map<const Eigen::VectorXd> s(s0.data(), s0.size());
  return s.dot(p * s);
}

double RiccatiExpectedCost(const envs::SlqrParams& params, std::size_t mode,
                           const std::vector<envs::Scenario>& scenarios) {
  if (scenarios.empty()) throw std::invalid_argument("riccati: no scenarios");
  const RiccatiSolution sol = SlqrRiccati(params, mode);
  double total = 0.0;
  for (const auto& s : scenarios) {
    total += QuadraticCost(sol.P[0], s.initial_state.data());
  }
  return total / static_cast<double>(scenarios.size());
}

double SimulateRiccati(const envs::Slqr& env, std::size_t mode,
                       const std::vector<envs::Scenario>& scenarios) {
  if (scenarios.empty()) throw std::invalid_argument("riccati: no scenarios");
  const auto& params = env.params();
  const RiccatiSolution sol = SlqrRiccati(params, mode);
  const std::size_t n = scenarios.size();
  const std::size_t p = params.p;
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  ad::Tensor state = envs::StackInitialStates(scenarios, rows);
  const std::vector<int> modes(n, static_cast<int>(mode));
  std::vector<std::vector<double>> costs(n);
  for (std::size_t t = 0; t < params.T; ++t) {
    ad::Tensor b = ad::Tensor::Zeros({n, p});
    if (t + 1 < params.T) b = -ad::MatMul(state, ad::Transpose(sol.K[t]));
    const envs::StepOutput out = env.Step(
        state, modes, b, envs::StackDisturbances(scenarios, rows, t));
    for (std::size_t i = 0; i < n; ++i) costs[i].push_back(out.cost.at(i));
    state = out.next_state;
  }
  double total = 0.0;
  for (const auto& c : costs) total += env.ReportedCost(c);
  return total / static_cast<double>(n);
}

SingleModeBaseline BestSingleModeBaseline(
    const envs::Slqr& env, const std::vector<envs::Scenario>& scenarios) {
  SingleModeBaseline best;
  for (std::size_t j = 0; j < env.num_modes(); ++j) {
    const double c = SimulateRiccati(env, j, scenarios);
    best.per_mode.push_back(c);
    if (j == 0 || c < best.cost) {
      best.cost = c;
      best.mode = j;
    }
  }
  return best;
}

}  // namespace hpo::analysis
