#pragma once

#include "q3dw/fem_2d.hpp"
#include "q3dw/galerkin.hpp"
#include "q3dw/saddle.hpp"
#include "q3dw/spectral_1d.hpp"

#include <Eigen/SparseCholesky>

#include <memory>

namespace q3dw {

// DoF k = n * anz + m: cross-section node n outer, longitudinal index m
// inner. Matrices with anzfe rows and anz columns hold the same data row-major.
Vector flatten(const Matrix& u);
Matrix unflatten(const Vector& v, int anzfe, int anz);

SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b);

using VolumeFunction = std::function<double(double x, double y, double z)>;
using VolumeTimeFunction = std::function<double(double x, double y, double z, double t)>;

// Front (z = 0) or back (z = L) face: theta = value (Dirichlet) or
// -lambda d theta/dz = value (Neumann).
struct FaceCondition {
  enum class Kind { dirichlet, neumann };
  Kind kind = Kind::dirichlet;
  PlaneTimeFunction value = [](double, double, double) { return 0.0; };

  static FaceCondition dirichlet(PlaneTimeFunction f) { return {Kind::dirichlet, std::move(f)}; }
  static FaceCondition neumann(PlaneTimeFunction f) { return {Kind::neumann, std::move(f)}; }
};

// Dirichlet data on the hull nodes of boundary edges with this marker
// (-1: the whole hull). Hull parts without an entry are insulated.
struct HullDirichlet {
  int marker = -1;
  VolumeTimeFunction value = [](double, double, double, double) { return 0.0; };
};

// lambda = lambda_xy(region) lambda_z(z), cv = cv_xy(region) cv_z(z),
// q = q_xy(x, y, t) q_z(z, t).
struct HeatProblem3D {
  Mesh2D mesh;
  double length = 1.0;
  Coefficient lambda_z{1.0};
  Coefficient cv_z{1.0};
  // q_xy from per-region weights when not empty, otherwise from source_xy.
  std::map<int, double> source_regions;
  PlaneTimeFunction source_xy;
  SpaceTimeFunction source_z;  // empty: no source
  bool source_time_dependent = false;
  FaceCondition front, back;
  std::vector<HullDirichlet> hull;
  VolumeFunction initial = [](double, double, double) { return 0.0; };
  // When set, theta0 = initial_xy(x, y) initial_z(z) and initial is ignored;
  // avoids one longitudinal projection per node.
  PlaneFunction initial_xy;
  ScalarFunction initial_z;

  void validate() const;
  bool has_source() const { return static_cast<bool>(source_z) && (!source_regions.empty() || source_xy); }
};

// Semi-discrete tensor system A u + M u' = q(t) with
//   A = fe_A (x) z_M_lambda + fe_M_lambda (x) z_A,  M = fe_M_cv (x) z_M_cv,
// front/back rows z_B on every node off the Dirichlet hull and full
// longitudinal rows on hull nodes. Used for both the static and the adaptive
// longitudinal frames.
struct Q3DSystem {
  int anzfe = 0, anz = 0;
  SparseMatrix fe_A, fe_M_cv, fe_M_lambda;
  SparseMatrix z_A, z_M_lambda, z_M_cv;
  SparseMatrix z_B;
  std::vector<int> hull_nodes;  // sorted
  std::function<Matrix(double)> z_b;          // anzfe x z_B.rows()
  std::function<Matrix(double)> hull_values;  // hull_nodes.size() x anz
  std::function<Matrix(double)> rhs;          // anzfe x anz
  // Hull nodes whose Dirichlet data disagrees with the front/back Dirichlet data.
  int conflicts = 0;

  int dof_count() const { return anzfe * anz; }
  std::vector<int> free_nodes() const;

  // Explicit sparse forms in the flattened layout.
  SparseMatrix A() const;
  SparseMatrix M() const;
  SparseMatrix B() const;
  Vector b(double t) const;
  Vector load(double t) const { return flatten(rhs(t)); }
};

Q3DSystem assemble_q3d(const HeatProblem3D& problem, const IntervalBasis& basis, int quad_depth = 12);

// s_fe(t) (x) s_sf(t), flattened.
Vector assemble_rhs(const HeatProblem3D& problem, const IntervalBasis& basis, double t, int quad_depth = 12);

// Longitudinal projection of theta0 on every node, then corrected onto the
// constraints at t = 0.
Matrix initial_coefficients(const HeatProblem3D& problem, const IntervalBasis& basis, const Q3DSystem& system,
                            int quad_depth = 12);
Matrix enforce_constraints(const Q3DSystem& system, const Matrix& u, double t);

// Implicit Euler on the tensor system. With lambda_z proportional to cv_z the
// constrained longitudinal space is diagonalized once and every mode is one
// sparse SPD cross-section solve; otherwise the flattened saddle-point system
// is factored directly.
class TensorStepper {
 public:
  enum class Method { automatic, modal, saddle };

  TensorStepper(const Q3DSystem& system, double dt, Method method = Method::automatic);

  bool modal() const { return modal_; }
  Matrix step(const Matrix& u, double t) const;

 private:
  void setup_modal();
  void setup_saddle();

  Q3DSystem sys_;
  double dt_;
  bool modal_ = false;
  // modal
  double rho_ = 1.0;
  std::vector<int> free_;
  SparseMatrix select_;  // free x anzfe
  Matrix z_, v_, part_;  // null space of z_B, modal vectors, particular solution map
  Vector mu_;
  std::vector<std::unique_ptr<Eigen::SimplicialLDLT<SparseMatrix>>> modes_;
  // saddle
  SparseMatrix m_flat_;
  std::unique_ptr<SaddlePointSolver> saddle_;
};

struct Probe {
  std::string name;
  double x = 0.0, y = 0.0, z = 0.0;
};

// Point evaluation of a coefficient matrix: FE interpolation times basis values.
class Sampler {
 public:
  Sampler(const Mesh2D& mesh, const IntervalBasis& basis) : mesh_(&mesh), basis_(&basis) {}
  double operator()(const Matrix& u, double x, double y, double z) const;
  // theta at (x, y) for every z.
  Vector z_profile(const Matrix& u, double x, double y, std::span<const double> zs) const;
  // Nodal cross-section field at z.
  Vector cross_section(const Matrix& u, double z) const;

 private:
  const Mesh2D* mesh_;
  const IntervalBasis* basis_;
};

struct Q3DOptions {
  int quad_depth = 12;
  std::vector<Probe> probes;
  bool keep_states = false;
  TensorStepper::Method method = TensorStepper::Method::automatic;
};

struct Q3DResult {
  std::vector<double> times;
  std::vector<std::vector<double>> probe_values;  // [probe][time]
  std::vector<Matrix> states;                     // all steps when keep_states, else the last one
  bool modal = false;
};

Q3DResult solve_q3d(const HeatProblem3D& problem, const IntervalBasis& basis, double dt, int n_steps,
                    const Q3DOptions& options = {});

// CSV writers: time,<probe names>; z,theta; node,x,y,theta.
void write_probe_csv(const std::filesystem::path& path, const std::vector<double>& times,
                     const std::vector<Probe>& probes, const std::vector<std::vector<double>>& values);
void write_profile_csv(const std::filesystem::path& path, std::span<const double> zs, const Vector& theta);
void write_cross_section_csv(const std::filesystem::path& path, const Mesh2D& mesh, const Vector& theta);

}  // namespace q3dw
