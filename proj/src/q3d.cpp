#include "q3dw/q3d.hpp"

#include "io_util.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace q3dw {

Vector flatten(const Matrix& u) {
  Vector v(u.size());
  for (Eigen::Index n = 0; n < u.rows(); ++n) v.segment(n * u.cols(), u.cols()) = u.row(n).transpose();
  return v;
}

Matrix unflatten(const Vector& v, int anzfe, int anz) {
  if (v.size() != static_cast<Eigen::Index>(anzfe) * anz) throw std::invalid_argument("vector size is not anzfe * anz");
  Matrix u(anzfe, anz);
  for (int n = 0; n < anzfe; ++n) u.row(n) = v.segment(static_cast<Eigen::Index>(n) * anz, anz).transpose();
  return u;
}

SparseMatrix kron(const SparseMatrix& a, const SparseMatrix& b) {
  SparseMatrix k = Eigen::kroneckerProduct(a, b);
  k.makeCompressed();
  return k;
}

namespace {

void check_coefficient(const Coefficient& c, double length, const char* name) {
  for (int i = 0; i <= 200; ++i) {
    const double v = c(length * i / 200.0);
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive along the interval");
  }
}

SparseMatrix unit_rows(const std::vector<int>& rows, int cols) {
  SparseMatrix s(static_cast<Eigen::Index>(rows.size()), cols);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < rows.size(); ++i) t.emplace_back(static_cast<int>(i), rows[i], 1.0);
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

// Area-weighted mean of lambda_xy over the elements around each node.
Vector nodal_lambda(const Mesh2D& mesh) {
  Vector num = Vector::Zero(mesh.node_count()), den = Vector::Zero(mesh.node_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    const double a = mesh.area(e);
    const double l = mesh.materials.at(mesh.regions[e]).lambda;
    for (int v : mesh.triangles[e]) {
      num[v] += a * l;
      den[v] += a;
    }
  }
  return num.cwiseQuotient(den);
}

double face_z(const HeatProblem3D& p, int end) { return end == 0 ? 0.0 : p.length; }

// Longitudinal projection of f(z) for every node in nodes.
Matrix project_nodes(const Mesh2D& mesh, const std::vector<int>& nodes, const IntervalBasis& basis,
                     const SparseMatrix& proj, const std::vector<double>& grid,
                     const std::function<double(double, double, double)>& f) {
  Matrix out(static_cast<Eigen::Index>(nodes.size()), basis.size());
  Vector samples(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& p = mesh.nodes[nodes[i]];
    for (std::size_t g = 0; g < grid.size(); ++g) samples[g] = f(p.x, p.y, grid[g]);
    out.row(i) = (proj * samples).transpose();
  }
  return out;
}

}  // namespace

void HeatProblem3D::validate() const {
  if (!(length > 0.0) || !std::isfinite(length)) throw ConfigError("length must be positive");
  mesh.validate();
  check_coefficient(lambda_z, length, "lambda_z");
  check_coefficient(cv_z, length, "cv_z");
  for (const auto& [region, w] : source_regions) {
    if (!mesh.materials.count(region))
      throw ConfigError("source refers to unknown region " + std::to_string(region));
    if (!std::isfinite(w)) throw ConfigError("source weight must be finite");
  }
  for (const auto& h : hull) {
    if (!h.value) throw ConfigError("hull Dirichlet condition without a value");
    if (h.marker >= 0 && mesh.boundary_nodes(h.marker).empty())
      throw ConfigError("no boundary edges carry hull marker " + std::to_string(h.marker));
  }
  if (!front.value || !back.value) throw ConfigError("front and back conditions need a value");
}

std::vector<int> Q3DSystem::free_nodes() const {
  std::vector<int> out;
  std::size_t h = 0;
  for (int n = 0; n < anzfe; ++n) {
    while (h < hull_nodes.size() && hull_nodes[h] < n) ++h;
    if (h < hull_nodes.size() && hull_nodes[h] == n) continue;
    out.push_back(n);
  }
  return out;
}

SparseMatrix Q3DSystem::A() const {
  SparseMatrix a = kron(fe_A, z_M_lambda);
  a += kron(fe_M_lambda, z_A);
  return a;
}

SparseMatrix Q3DSystem::M() const { return kron(fe_M_cv, z_M_cv); }

SparseMatrix Q3DSystem::B() const {
  SparseMatrix front_back = kron(unit_rows(free_nodes(), anzfe), z_B);
  SparseMatrix id(anz, anz);
  id.setIdentity();
  SparseMatrix hull = kron(unit_rows(hull_nodes, anzfe), id);
  SparseMatrix out(front_back.rows() + hull.rows(), dof_count());
  std::vector<Triplet> t;
  for (int k = 0; k < front_back.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(front_back, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < hull.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(hull, k); it; ++it)
      t.emplace_back(front_back.rows() + it.row(), it.col(), it.value());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

Vector Q3DSystem::b(double t) const {
  const auto free = free_nodes();
  const Matrix zb = z_b(t);
  const int nb = static_cast<int>(z_B.rows());
  Vector out(static_cast<Eigen::Index>(free.size()) * nb + static_cast<Eigen::Index>(hull_nodes.size()) * anz);
  for (std::size_t i = 0; i < free.size(); ++i) out.segment(i * nb, nb) = zb.row(free[i]).transpose();
  if (!hull_nodes.empty()) {
    const Matrix hv = hull_values(t);
    const Eigen::Index off = static_cast<Eigen::Index>(free.size()) * nb;
    for (std::size_t i = 0; i < hull_nodes.size(); ++i) out.segment(off + i * anz, anz) = hv.row(i).transpose();
  }
  return out;
}

Q3DSystem assemble_q3d(const HeatProblem3D& problem, const IntervalBasis& basis, int quad_depth) {
  problem.validate();
  if (std::abs(basis.left()) > 1e-12 || std::abs(basis.right() - problem.length) > 1e-12 * problem.length)
    throw ConfigError("longitudinal basis must live on [0, length]");

  auto fe = assemble_fem(problem.mesh);
  Q3DSystem s;
  s.anzfe = fe.node_count;
  s.anz = basis.size();
  s.fe_A = fe.A;
  s.fe_M_cv = fe.M_cv;
  s.fe_M_lambda = fe.M_lambda;
  s.z_A = stiffness_matrix(basis, problem.lambda_z, {}, quad_depth);
  s.z_M_lambda = mass_matrix(basis, problem.lambda_z, quad_depth);
  s.z_M_cv = mass_matrix(basis, problem.cv_z, quad_depth);

  // Front row 0, back row 1.
  const FaceCondition* faces[2] = {&problem.front, &problem.back};
  std::vector<Triplet> bt;
  for (int end = 0; end < 2; ++end) {
    const bool right = end == 1;
    Vector row = faces[end]->kind == FaceCondition::Kind::dirichlet
                     ? endpoint_values(basis, right)
                     : Vector(-problem.lambda_z(face_z(problem, end)) * endpoint_derivatives(basis, right));
    for (int m = 0; m < s.anz; ++m)
      if (row[m] != 0.0) bt.emplace_back(end, m, row[m]);
  }
  s.z_B.resize(2, s.anz);
  s.z_B.setFromTriplets(bt.begin(), bt.end());

  const Mesh2D& mesh = problem.mesh;
  const Vector lam = nodal_lambda(mesh);
  const FaceCondition front = problem.front, back = problem.back;
  std::vector<Node> nodes = mesh.nodes;
  s.z_b = [front, back, lam, nodes](double t) {
    Matrix out(static_cast<Eigen::Index>(nodes.size()), 2);
    const FaceCondition* f[2] = {&front, &back};
    for (int end = 0; end < 2; ++end)
      for (std::size_t n = 0; n < nodes.size(); ++n) {
        double v = f[end]->value(nodes[n].x, nodes[n].y, t);
        if (f[end]->kind == FaceCondition::Kind::neumann) v /= lam[n];
        out(n, end) = v;
      }
    return out;
  };

  // Hull Dirichlet nodes; a later entry wins on shared nodes.
  std::map<int, int> hull_owner;
  for (std::size_t h = 0; h < problem.hull.size(); ++h)
    for (int n : mesh.boundary_nodes(problem.hull[h].marker)) hull_owner[n] = static_cast<int>(h);
  for (const auto& [n, h] : hull_owner) s.hull_nodes.push_back(n);
  const int anz = s.anz;
  if (!s.hull_nodes.empty()) {
    auto proj = std::make_shared<const SparseMatrix>(basis.projection_matrix(quad_depth));
    auto grid = std::make_shared<const std::vector<double>>(basis.quadrature_grid(quad_depth));
    auto hull = problem.hull;
    std::vector<std::pair<Node, int>> pts;
    for (const auto& [n, h] : hull_owner) pts.push_back({mesh.nodes[n], h});
    s.hull_values = [proj, grid, hull, pts, anz](double t) {
      Matrix out(static_cast<Eigen::Index>(pts.size()), anz);
      Vector samples(static_cast<Eigen::Index>(grid->size()));
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& [p, h] = pts[i];
        for (std::size_t g = 0; g < grid->size(); ++g) samples[g] = hull[h].value(p.x, p.y, (*grid)[g], t);
        out.row(i) = (*proj * samples).transpose();
      }
      return out;
    };
    for (const auto& [n, h] : hull_owner)
      for (int end = 0; end < 2; ++end) {
        const FaceCondition& f = end == 0 ? problem.front : problem.back;
        if (f.kind != FaceCondition::Kind::dirichlet) continue;
        const Node& p = mesh.nodes[n];
        const double hv = problem.hull[h].value(p.x, p.y, face_z(problem, end), 0.0);
        const double fv = f.value(p.x, p.y, 0.0);
        if (std::abs(hv - fv) > 1e-9 * std::max({1.0, std::abs(hv), std::abs(fv)})) {
          ++s.conflicts;
          break;
        }
      }
  } else {
    s.hull_values = [](double) { return Matrix(0, 0); };
  }

  const int anzfe = s.anzfe;
  if (!problem.has_source()) {
    s.rhs = [anzfe, anz](double) { return Matrix(Matrix::Zero(anzfe, anz)); };
  } else {
    auto problem_copy = std::make_shared<const HeatProblem3D>(problem);
    auto basis_copy = std::make_shared<const IntervalBasis>(basis);
    auto outer = [problem_copy, basis_copy, quad_depth](double t) {
      const HeatProblem3D& p = *problem_copy;
      Vector s_fe = !p.source_regions.empty()
                        ? region_load_vector(p.mesh, p.source_regions)
                        : load_vector(p.mesh, [&](double x, double y) { return p.source_xy(x, y, t); });
      Vector s_z = basis_copy->project([&](double z) { return p.source_z(z, t); }, quad_depth);
      return Matrix(s_fe * s_z.transpose());
    };
    if (problem.source_time_dependent) {
      s.rhs = outer;
    } else {
      auto fixed = std::make_shared<const Matrix>(outer(0.0));
      s.rhs = [fixed](double) { return *fixed; };
    }
  }
  return s;
}

Vector assemble_rhs(const HeatProblem3D& problem, const IntervalBasis& basis, double t, int quad_depth) {
  if (!problem.has_source()) return Vector::Zero(static_cast<Eigen::Index>(problem.mesh.node_count()) * basis.size());
  Vector s_fe = !problem.source_regions.empty()
                    ? region_load_vector(problem.mesh, problem.source_regions)
                    : load_vector(problem.mesh, [&](double x, double y) { return problem.source_xy(x, y, t); });
  Vector s_z = basis.project([&](double z) { return problem.source_z(z, t); }, quad_depth);
  return flatten(s_fe * s_z.transpose());
}

Matrix enforce_constraints(const Q3DSystem& system, const Matrix& u, double t) {
  Matrix out = u;
  const Matrix zb = system.z_b(t);
  Matrix zbd = Matrix(system.z_B);
  // Minimal row corrections u_n += z_B^T (z_B z_B^T)^-1 (b_n - z_B u_n).
  Eigen::LDLT<Matrix> gram(zbd * zbd.transpose());
  for (int n : system.free_nodes()) {
    Vector r = zb.row(n).transpose() - zbd * out.row(n).transpose();
    out.row(n) += (zbd.transpose() * gram.solve(r)).transpose();
  }
  if (!system.hull_nodes.empty()) {
    const Matrix hv = system.hull_values(t);
    for (std::size_t i = 0; i < system.hull_nodes.size(); ++i) out.row(system.hull_nodes[i]) = hv.row(i);
  }
  return out;
}

Matrix initial_coefficients(const HeatProblem3D& problem, const IntervalBasis& basis, const Q3DSystem& system,
                            int quad_depth) {
  Matrix u;
  if (problem.initial_xy && problem.initial_z) {
    Vector xy = interpolate(problem.mesh, problem.initial_xy);
    Vector z = basis.project(problem.initial_z, quad_depth);
    u = xy * z.transpose();
  } else {
    std::vector<int> all(problem.mesh.node_count());
    for (int n = 0; n < problem.mesh.node_count(); ++n) all[n] = n;
    u = project_nodes(problem.mesh, all, basis, basis.projection_matrix(quad_depth), basis.quadrature_grid(quad_depth),
                      problem.initial);
  }
  return enforce_constraints(system, u, 0.0);
}

TensorStepper::TensorStepper(const Q3DSystem& system, double dt, Method method) : sys_(system), dt_(dt) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (method != Method::saddle) {
    setup_modal();
    if (!modal_ && method == Method::modal)
      throw ConfigError("modal stepping needs lambda_z proportional to cv_z");
  }
  if (!modal_) setup_saddle();
}

void TensorStepper::setup_modal() {
  const Matrix mzl(sys_.z_M_lambda), mzc(sys_.z_M_cv);
  rho_ = mzl.trace() / mzc.trace();
  if (!((mzl - rho_ * mzc).norm() <= 1e-11 * mzl.norm())) return;

  const Matrix zb(sys_.z_B);
  const int anz = sys_.anz, nb = static_cast<int>(zb.rows());
  Eigen::HouseholderQR<Matrix> qr(zb.transpose());
  Matrix q = qr.householderQ() * Matrix::Identity(anz, anz);
  z_ = q.rightCols(anz - nb);
  part_ = zb.transpose() * (zb * zb.transpose()).inverse();

  const Matrix s1 = z_.transpose() * mzc * z_;
  const Matrix s2 = z_.transpose() * Matrix(sys_.z_A) * z_;
  if ((s2 - s2.transpose()).norm() > 1e-9 * std::max(1.0, s2.norm())) return;
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> eig(0.5 * (s2 + s2.transpose()), s1);
  if (eig.info() != Eigen::Success) return;
  v_ = eig.eigenvectors();
  mu_ = eig.eigenvalues();

  free_ = sys_.free_nodes();
  select_ = unit_rows(free_, sys_.anzfe);
  SparseMatrix st = select_.transpose();
  SparseMatrix mcv = select_ * sys_.fe_M_cv * st;
  SparseMatrix a = select_ * sys_.fe_A * st;
  SparseMatrix ml = select_ * sys_.fe_M_lambda * st;
  modes_.clear();
  for (Eigen::Index i = 0; i < mu_.size(); ++i) {
    SparseMatrix k = mcv + (dt_ * rho_) * a + (dt_ * mu_[i]) * ml;
    auto f = std::make_unique<Eigen::SimplicialLDLT<SparseMatrix>>(k);
    if (f->info() != Eigen::Success) {
      modes_.clear();
      return;
    }
    modes_.push_back(std::move(f));
  }
  modal_ = true;
}

void TensorStepper::setup_saddle() {
  m_flat_ = sys_.M();
  SparseMatrix k = m_flat_ + dt_ * sys_.A();
  saddle_ = std::make_unique<SaddlePointSolver>(k, sys_.B());
}

Matrix TensorStepper::step(const Matrix& u, double t) const {
  const double t1 = t + dt_;
  if (u.rows() != sys_.anzfe || u.cols() != sys_.anz) throw std::invalid_argument("coefficient matrix has wrong shape");
  if (!modal_) {
    Vector f = m_flat_ * flatten(u) + dt_ * flatten(sys_.rhs(t1));
    return unflatten(saddle_->solve(f, sys_.b(t1)), sys_.anzfe, sys_.anz);
  }

  Matrix u0(sys_.anzfe, sys_.anz);
  const Matrix zb = sys_.z_b(t1);
  for (int n : free_) u0.row(n) = (part_ * zb.row(n).transpose()).transpose();
  if (!sys_.hull_nodes.empty()) {
    const Matrix hv = sys_.hull_values(t1);
    for (std::size_t i = 0; i < sys_.hull_nodes.size(); ++i) u0.row(sys_.hull_nodes[i]) = hv.row(i);
  }

  // With symmetric mass factors, M u <-> Mcv U Mzcv and A u <-> A U Mzl + Ml U Az^T.
  Matrix res = sys_.fe_M_cv * (u - u0) * sys_.z_M_cv + dt_ * sys_.rhs(t1);
  res -= dt_ * (sys_.fe_A * u0 * sys_.z_M_lambda + sys_.fe_M_lambda * (u0 * Matrix(sys_.z_A.transpose())));
  Matrix r = (select_ * res) * z_ * v_;

  Matrix x(r.rows(), r.cols());
  for (Eigen::Index i = 0; i < r.cols(); ++i) x.col(i) = modes_[i]->solve(r.col(i));
  Matrix out = u0;
  Matrix y = x * v_.transpose() * z_.transpose();
  for (std::size_t i = 0; i < free_.size(); ++i) out.row(free_[i]) += y.row(i);
  return out;
}

double Sampler::operator()(const Matrix& u, double x, double y, double z) const {
  return evaluate(*mesh_, u * basis_->values_at(z), x, y);
}

Vector Sampler::z_profile(const Matrix& u, double x, double y, std::span<const double> zs) const {
  // Nodal weights of (x, y), then the longitudinal expansion of that row.
  const int e = mesh_->locate(x, y);
  if (e < 0) throw std::out_of_range("point outside the cross-section");
  Vector w = Vector::Zero(mesh_->node_count());
  const auto& tri = mesh_->triangles[e];
  for (int k = 0; k < 3; ++k) {
    Vector unit = Vector::Zero(mesh_->node_count());
    unit[tri[k]] = 1.0;
    w[tri[k]] = evaluate(*mesh_, unit, x, y);
  }
  Vector row = u.transpose() * w;
  return basis_->evaluate(row, zs);
}

Vector Sampler::cross_section(const Matrix& u, double z) const { return u * basis_->values_at(z); }

Q3DResult solve_q3d(const HeatProblem3D& problem, const IntervalBasis& basis, double dt, int n_steps,
                    const Q3DOptions& options) {
  if (n_steps < 0) throw ConfigError("n_steps must be non-negative");
  Q3DSystem sys = assemble_q3d(problem, basis, options.quad_depth);
  Matrix u = initial_coefficients(problem, basis, sys, options.quad_depth);
  Sampler sample(problem.mesh, basis);

  Q3DResult r;
  r.probe_values.resize(options.probes.size());
  auto record = [&](double t) {
    r.times.push_back(t);
    for (std::size_t p = 0; p < options.probes.size(); ++p) {
      const auto& pr = options.probes[p];
      r.probe_values[p].push_back(sample(u, pr.x, pr.y, pr.z));
    }
    if (options.keep_states) r.states.push_back(u);
  };
  record(0.0);
  if (n_steps > 0) {
    TensorStepper stepper(sys, dt, options.method);
    r.modal = stepper.modal();
    for (int i = 0; i < n_steps; ++i) {
      u = stepper.step(u, i * dt);
      if (!u.allFinite()) throw NumericError("non-finite coefficients at step " + std::to_string(i + 1));
      record((i + 1) * dt);
    }
  }
  if (!options.keep_states) r.states.push_back(u);
  return r;
}

void write_probe_csv(const std::filesystem::path& path, const std::vector<double>& times,
                     const std::vector<Probe>& probes, const std::vector<std::vector<double>>& values) {
  auto out = detail::open_output(path);
  out << "time";
  for (const auto& p : probes) out << ',' << p.name;
  out << '\n';
  for (std::size_t i = 0; i < times.size(); ++i) {
    out << times[i];
    for (std::size_t p = 0; p < probes.size(); ++p) out << ',' << values.at(p).at(i);
    out << '\n';
  }
  detail::check_written(out, path);
}

void write_profile_csv(const std::filesystem::path& path, std::span<const double> zs, const Vector& theta) {
  auto out = detail::open_output(path);
  out << "z,theta\n";
  for (std::size_t i = 0; i < zs.size(); ++i) out << zs[i] << ',' << theta[static_cast<Eigen::Index>(i)] << '\n';
  detail::check_written(out, path);
}

void write_cross_section_csv(const std::filesystem::path& path, const Mesh2D& mesh, const Vector& theta) {
  auto out = detail::open_output(path);
  out << "node,x,y,theta\n";
  for (int n = 0; n < mesh.node_count(); ++n)
    out << n << ',' << mesh.nodes[n].x << ',' << mesh.nodes[n].y << ',' << theta[n] << '\n';
  detail::check_written(out, path);
}

}  // namespace q3dw
