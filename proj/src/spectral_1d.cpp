#include "q3dw/spectral_1d.hpp"

#include "io_util.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace q3dw {

namespace {

void check_positive(const Coefficient& c, double length, const char* name) {
  const int samples = 1001;
  for (int i = 0; i < samples; ++i) {
    const double x = length * i / (samples - 1);
    const double v = c(x);
    if (!(v > 0.0) || !std::isfinite(v)) {
      std::ostringstream msg;
      msg << name << " must be positive and finite, got " << v << " at x = " << x;
      throw ConfigError(msg.str());
    }
    if (c.is_constant()) break;
  }
}


}  // namespace

void HeatProblem1D::validate() const {
  if (!(length > 0.0) || !std::isfinite(length)) throw ConfigError("interval length must be positive");
  check_positive(lambda, length, "lambda");
  check_positive(cv, length, "c_v");
  if (!left.value || !right.value) throw ConfigError("boundary data missing");
  if (!initial) throw ConfigError("initial condition missing");
}

SparseMatrix constraint_matrix(const HeatProblem1D& problem, const IntervalBasis& basis) {
  const int n = basis.size();
  std::vector<Triplet> trip;
  auto add_row = [&](int row, const EndCondition& end, bool right) {
    Vector r;
    if (end.kind == EndCondition::Kind::dirichlet) {
      r = endpoint_values(basis, right);
    } else {
      if (!basis.family().has_derivative())
        throw std::invalid_argument("insufficient regularity: Neumann rows need N >= 3");
      r = -problem.lambda(right ? basis.right() : basis.left()) * endpoint_derivatives(basis, right);
    }
    for (int k = 0; k < n; ++k)
      if (r(k) != 0.0) trip.emplace_back(row, k, r(k));
  };
  add_row(0, problem.left, false);
  add_row(1, problem.right, true);
  SparseMatrix b(2, n);
  b.setFromTriplets(trip.begin(), trip.end());
  return b;
}

Vector constraint_values(const HeatProblem1D& problem, double t) {
  Vector b(2);
  b << problem.left.value(t), problem.right.value(t);
  return b;
}

Vector load_vector(const HeatProblem1D& problem, const IntervalBasis& basis, double t, int quad_depth) {
  if (!problem.source) return Vector::Zero(basis.size());
  const auto& q = problem.source;
  return basis.project([&](double x) { return q(x, t); }, quad_depth);
}

SemiDiscreteSystem assemble(const HeatProblem1D& problem, const IntervalBasis& basis, int quad_depth) {
  problem.validate();
  if (std::abs(basis.left()) > 1e-12 || std::abs(basis.right() - problem.length) > 1e-12 * problem.length) {
    std::ostringstream msg;
    msg << "basis interval [" << basis.left() << ", " << basis.right() << "] does not match problem interval [0, "
        << problem.length << "]";
    throw std::invalid_argument(msg.str());
  }
  SemiDiscreteSystem sys;
  sys.A = stiffness_matrix(basis, problem.lambda, BoundaryTerms{}, quad_depth);
  sys.M = mass_matrix(basis, problem.cv, quad_depth);
  sys.B = constraint_matrix(problem, basis);

  auto basis_copy = std::make_shared<const IntervalBasis>(basis);
  if (!problem.source) {
    const int n = basis.size();
    sys.rhs = [n](double) { return Vector(Vector::Zero(n)); };
  } else if (!problem.source_time_dependent) {
    auto fixed = std::make_shared<const Vector>(load_vector(problem, basis, 0.0, quad_depth));
    sys.rhs = [fixed](double) { return *fixed; };
  } else {
    auto q = problem.source;
    sys.rhs = [basis_copy, q, quad_depth](double t) {
      return basis_copy->project([&](double x) { return q(x, t); }, quad_depth);
    };
  }
  auto left = problem.left.value, right = problem.right.value;
  sys.b = [left, right](double t) {
    Vector b(2);
    b << left(t), right(t);
    return b;
  };
  return sys;
}

ImplicitEulerStepper::ImplicitEulerStepper(const SemiDiscreteSystem& system, double dt)
    : m_(system.M), rhs_(system.rhs), b_(system.b), dt_(dt),
      solver_((dt > 0.0 ? SparseMatrix(system.M + dt * system.A) : SparseMatrix(system.M)), system.B) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("time step must be positive");
}

Vector ImplicitEulerStepper::step(const Vector& u, const Vector& rhs_next, const Vector& b_next) const {
  if (u.size() != m_.rows()) throw std::invalid_argument("coefficient vector length does not match system");
  return solver_.solve(m_ * u + dt_ * rhs_next, b_next);
}

Vector ImplicitEulerStepper::step(const Vector& u, double t) const { return step(u, rhs_(t + dt_), b_(t + dt_)); }

Vector step(const SemiDiscreteSystem& system, const Vector& u, double t, double dt) {
  return ImplicitEulerStepper(system, dt).step(u, t);
}

Vector enforce_constraints(const SparseMatrix& b_mat, const Vector& b, const Vector& u) {
  if (b_mat.rows() == 0) return u;
  Matrix bd(b_mat);
  Vector r = b - bd * u;
  Matrix gram = bd * bd.transpose();
  Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw NumericError("constraint rows are dependent");
  return u + bd.transpose() * ldlt.solve(r);
}

Vector initial_coefficients(const HeatProblem1D& problem, const IntervalBasis& basis, const SemiDiscreteSystem& system,
                            int quad_depth) {
  Vector u = basis.project(problem.initial, quad_depth);
  return enforce_constraints(system.B, system.b(0.0), u);
}

Trajectory solve(const HeatProblem1D& problem, const IntervalBasis& basis, double dt, int n_steps, int quad_depth) {
  if (n_steps < 0) throw std::invalid_argument("step count must be non-negative");
  SemiDiscreteSystem sys = assemble(problem, basis, quad_depth);
  Trajectory traj;
  Vector u = initial_coefficients(problem, basis, sys, quad_depth);
  traj.times.push_back(0.0);
  traj.coefficients.push_back(u);
  if (n_steps == 0) return traj;
  ImplicitEulerStepper stepper(sys, dt);
  for (int i = 0; i < n_steps; ++i) {
    u = stepper.step(u, i * dt);
    traj.times.push_back((i + 1) * dt);
    traj.coefficients.push_back(u);
  }
  return traj;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory) {
  auto out = detail::open_output(path);
  const int n = trajectory.coefficients.empty() ? 0 : static_cast<int>(trajectory.coefficients.front().size());
  out << "time";
  for (int k = 0; k < n; ++k) out << ",u_" << k;
  out << "\n";
  for (std::size_t i = 0; i < trajectory.times.size(); ++i) {
    out << trajectory.times[i];
    for (int k = 0; k < n; ++k) out << "," << trajectory.coefficients[i](k);
    out << "\n";
  }
  detail::check_written(out, path);
}

void write_samples_csv(const std::filesystem::path& path, const Trajectory& trajectory, const IntervalBasis& basis,
                       std::span<const double> grid) {
  auto out = detail::open_output(path);
  out << "time,x,theta\n";
  for (std::size_t i = 0; i < trajectory.times.size(); ++i) {
    Vector v = basis.evaluate(trajectory.coefficients[i], grid);
    for (std::size_t k = 0; k < grid.size(); ++k) out << trajectory.times[i] << "," << grid[k] << "," << v(k) << "\n";
  }
  detail::check_written(out, path);
}

}  // namespace q3dw
