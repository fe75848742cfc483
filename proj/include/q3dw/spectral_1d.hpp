#pragma once

#include "q3dw/galerkin.hpp"
#include "q3dw/saddle.hpp"

#include <filesystem>
#include <functional>

namespace q3dw {

using TimeFunction = std::function<double(double)>;
using SpaceTimeFunction = std::function<double(double, double)>;

// theta = value(t) (Dirichlet) or -lambda theta' = value(t) (Neumann).
struct EndCondition {
  enum class Kind { dirichlet, neumann };
  Kind kind = Kind::dirichlet;
  TimeFunction value = [](double) { return 0.0; };

  static EndCondition dirichlet(TimeFunction f) { return {Kind::dirichlet, std::move(f)}; }
  static EndCondition neumann(TimeFunction f) { return {Kind::neumann, std::move(f)}; }
};

struct HeatProblem1D {
  double length = 1.0;
  Coefficient lambda{1.0};
  Coefficient cv{1.0};
  SpaceTimeFunction source;  // empty means q = 0
  bool source_time_dependent = false;
  EndCondition left, right;
  ScalarFunction initial = [](double) { return 0.0; };

  // Throws ConfigError on non-positive materials or a non-positive length.
  void validate() const;
};

// A u + M u' = rhs(t) subject to B u = b(t).
struct SemiDiscreteSystem {
  SparseMatrix A, M, B;
  std::function<Vector(double)> rhs;
  std::function<Vector(double)> b;

  int dof_count() const { return static_cast<int>(M.rows()); }
};

// Galerkin system in the basis; A carries the boundary term at both ends and
// B holds one row per end: point values (Dirichlet) or -lambda phi' (Neumann).
SemiDiscreteSystem assemble(const HeatProblem1D& problem, const IntervalBasis& basis, int quad_depth = 12);

// Load vector <q(., t), phi_n>; zero when the problem has no source.
Vector load_vector(const HeatProblem1D& problem, const IntervalBasis& basis, double t, int quad_depth = 12);

// Constraint rows and values without assembling the matrices.
SparseMatrix constraint_matrix(const HeatProblem1D& problem, const IntervalBasis& basis);
Vector constraint_values(const HeatProblem1D& problem, double t);

// Implicit Euler on [[M + dt A, B^T], [B, 0]] with a single factorization.
class ImplicitEulerStepper {
 public:
  ImplicitEulerStepper(const SemiDiscreteSystem& system, double dt);

  double dt() const { return dt_; }
  // u(t) -> u(t + dt).
  Vector step(const Vector& u, double t) const;
  // Same, with the load and constraint values at t + dt already evaluated.
  Vector step(const Vector& u, const Vector& rhs_next, const Vector& b_next) const;

 private:
  SparseMatrix m_;
  std::function<Vector(double)> rhs_, b_;
  double dt_;
  SaddlePointSolver solver_;
};

Vector step(const SemiDiscreteSystem& system, const Vector& u, double t, double dt);

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> coefficients;
};

// Smallest change to u that satisfies B u = b.
Vector enforce_constraints(const SparseMatrix& b_mat, const Vector& b, const Vector& u);

// Projection of the initial condition, corrected onto the constraints at t = 0.
Vector initial_coefficients(const HeatProblem1D& problem, const IntervalBasis& basis, const SemiDiscreteSystem& system,
                            int quad_depth = 12);

Trajectory solve(const HeatProblem1D& problem, const IntervalBasis& basis, double dt, int n_steps,
                 int quad_depth = 12);

// CSV: header time,u_0,...,u_{n-1}.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory);
// CSV in long form: header time,x,theta.
void write_samples_csv(const std::filesystem::path& path, const Trajectory& trajectory, const IntervalBasis& basis,
                       std::span<const double> grid);

}  // namespace q3dw
