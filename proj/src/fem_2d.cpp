#include "q3dw/fem_2d.hpp"

#include "io_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

namespace q3dw {

namespace {

double signed_area(const Node& a, const Node& b, const Node& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

// Gradients of the three barycentric functions, rows = local nodes.
Eigen::Matrix<double, 3, 2> gradients(const Mesh2D& mesh, int e) {
  const auto& t = mesh.triangles[e];
  const Node &a = mesh.nodes[t[0]], &b = mesh.nodes[t[1]], &c = mesh.nodes[t[2]];
  const double two_area = 2.0 * signed_area(a, b, c);
  Eigen::Matrix<double, 3, 2> g;
  g << b.y - c.y, c.x - b.x, c.y - a.y, a.x - c.x, a.y - b.y, b.x - a.x;
  return g / two_area;
}

std::string strip_comment(const std::string& line) {
  auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

}  // namespace

double Mesh2D::area(int e) const {
  const auto& t = triangles.at(e);
  return signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
}

Node Mesh2D::centroid(int e) const {
  const auto& t = triangles.at(e);
  return {(nodes[t[0]].x + nodes[t[1]].x + nodes[t[2]].x) / 3.0, (nodes[t[0]].y + nodes[t[1]].y + nodes[t[2]].y) / 3.0};
}

void Mesh2D::build_boundary() {
  std::unordered_map<std::uint64_t, int> marker_of;
  for (std::size_t i = 0; i < boundary_edges.size(); ++i)
    marker_of[edge_key(boundary_edges[i][0], boundary_edges[i][1])] =
        i < boundary_markers.size() ? boundary_markers[i] : 0;
  std::unordered_map<std::uint64_t, int> uses;
  std::vector<std::array<int, 2>> order;
  for (const auto& t : triangles)
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      if (uses[edge_key(a, b)]++ == 0) order.push_back({a, b});
    }
  boundary_edges.clear();
  boundary_markers.clear();
  for (const auto& e : order) {
    const auto key = edge_key(e[0], e[1]);
    if (uses[key] != 1) continue;
    boundary_edges.push_back(e);
    auto it = marker_of.find(key);
    boundary_markers.push_back(it == marker_of.end() ? 0 : it->second);
  }
}

std::vector<int> Mesh2D::boundary_nodes(int marker) const {
  std::set<int> s;
  for (std::size_t i = 0; i < boundary_edges.size(); ++i)
    if (marker < 0 || boundary_markers[i] == marker) s.insert(boundary_edges[i].begin(), boundary_edges[i].end());
  return {s.begin(), s.end()};
}

int Mesh2D::locate(double x, double y) const {
  for (int e = 0; e < element_count(); ++e) {
    const auto& t = triangles[e];
    const Node p{x, y};
    const double a = area(e);
    const double l0 = signed_area(p, nodes[t[1]], nodes[t[2]]) / a;
    const double l1 = signed_area(nodes[t[0]], p, nodes[t[2]]) / a;
    const double l2 = 1.0 - l0 - l1;
    const double eps = -1e-12;
    if (l0 >= eps && l1 >= eps && l2 >= eps) return e;
  }
  return -1;
}

void Mesh2D::validate() const {
  std::vector<std::string> problems;
  if (nodes.empty()) problems.push_back("mesh has no nodes");
  if (triangles.empty()) problems.push_back("mesh has no elements");
  if (regions.size() != triangles.size()) problems.push_back("one region id per element expected");

  double scale = 0.0;
  for (const auto& n : nodes) scale = std::max({scale, std::abs(n.x), std::abs(n.y)});
  const double tol = 1e-12 * std::max(scale, 1e-300);
  std::map<std::pair<long long, long long>, int> seen;
  for (int i = 0; i < node_count(); ++i) {
    if (!std::isfinite(nodes[i].x) || !std::isfinite(nodes[i].y)) {
      problems.push_back("node " + std::to_string(i) + " has non-finite coordinates");
      continue;
    }
    auto key = std::make_pair(std::llround(nodes[i].x / tol), std::llround(nodes[i].y / tol));
    auto [it, fresh] = seen.emplace(key, i);
    if (!fresh) problems.push_back("duplicate node: " + std::to_string(i) + " coincides with " + std::to_string(it->second));
  }
  std::vector<char> used(nodes.size(), 0);
  for (int e = 0; e < element_count(); ++e) {
    const auto& t = triangles[e];
    bool ok = true;
    for (int v : t)
      if (v < 0 || v >= node_count()) {
        problems.push_back("element " + std::to_string(e) + " references unknown node");
        ok = false;
      }
    if (!ok) continue;
    for (int v : t) used[v] = 1;
    const double a = area(e);
    if (!(a > 0.0)) {
      std::ostringstream msg;
      msg << "element " << e << " is inverted or degenerate (signed area " << a << ")";
      problems.push_back(msg.str());
    }
    if (e < static_cast<int>(regions.size()) && !materials.count(regions[e]))
      problems.push_back("element " + std::to_string(e) + " uses unknown region " + std::to_string(regions[e]));
  }
  for (const auto& [id, m] : materials)
    if (!(m.lambda > 0.0) || !(m.cv > 0.0) || !std::isfinite(m.lambda) || !std::isfinite(m.cv))
      problems.push_back("region " + std::to_string(id) + " needs positive lambda and cv");
  for (int i = 0; i < node_count(); ++i)
    if (!used[i]) problems.push_back("node " + std::to_string(i) + " is not used by any element");

  // Conformity: no node may lie inside a boundary edge (a hanging node
  // leaves the neighbouring edges unmatched).
  if (problems.empty()) {
    Mesh2D copy = *this;
    copy.build_boundary();
    for (const auto& be : copy.boundary_edges) {
      const Node &a = nodes[be[0]], &b = nodes[be[1]];
      const double len2 = (b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y);
      for (int i = 0; i < node_count(); ++i) {
        if (i == be[0] || i == be[1]) continue;
        const Node& p = nodes[i];
        if (p.x < std::min(a.x, b.x) - tol || p.x > std::max(a.x, b.x) + tol || p.y < std::min(a.y, b.y) - tol ||
            p.y > std::max(a.y, b.y) + tol)
          continue;
        const double s = ((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / len2;
        const double cross = std::abs(signed_area(a, b, p)) * 2.0 / std::sqrt(len2);
        if (s > 1e-9 && s < 1 - 1e-9 && cross < 1e-9 * std::sqrt(len2)) {
          problems.push_back("hanging node " + std::to_string(i) + " on edge " + std::to_string(be[0]) + "-" +
                             std::to_string(be[1]));
          break;
        }
      }
      if (problems.size() > 50) break;
    }
  }
  if (!problems.empty()) {
    std::ostringstream msg;
    msg << "invalid mesh:";
    for (std::size_t i = 0; i < std::min<std::size_t>(problems.size(), 20); ++i) msg << "\n  " << problems[i];
    if (problems.size() > 20) msg << "\n  ... " << problems.size() - 20 << " more";
    throw ConfigError(msg.str());
  }
}

Mesh2D parse_mesh(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw ConfigError(source + ":" + std::to_string(line_no) + ": " + what);
  };

  std::unordered_map<long long, int> node_index;
  std::set<long long> element_ids;
  Mesh2D mesh;
  struct RawElement {
    long long n[3];
    int region;
    int line;
  };
  std::vector<RawElement> elements;
  struct RawEdge {
    long long a, b;
    int marker, line;
  };
  std::vector<RawEdge> edges;
  std::string section;
  long long remaining = 0;
  std::map<std::string, bool> done;

  while (std::getline(in, raw)) {
    ++line_no;
    std::istringstream ls(strip_comment(raw));
    std::string first;
    if (!(ls >> first)) continue;
    if (remaining == 0) {
      if (first != "NODES" && first != "ELEMENTS" && first != "REGIONS" && first != "BOUNDARY")
        fail("expected a section header (NODES, ELEMENTS, REGIONS, BOUNDARY), got '" + first + "'");
      if (done[first]) fail("section " + first + " appears twice");
      done[first] = true;
      if (!(ls >> remaining) || remaining < 0) fail("section " + first + " needs a non-negative count");
      std::string extra;
      if (ls >> extra) fail("unexpected text after section header");
      section = first;
      continue;
    }
    std::istringstream rs(strip_comment(raw));
    std::string extra;
    if (section == "NODES") {
      long long id;
      Node n;
      if (!(rs >> id >> n.x >> n.y) || (rs >> extra)) fail("node line must be 'id x y'");
      if (node_index.count(id)) fail("duplicate node id " + std::to_string(id));
      node_index[id] = mesh.node_count();
      mesh.nodes.push_back(n);
    } else if (section == "ELEMENTS") {
      long long id;
      RawElement e;
      if (!(rs >> id >> e.n[0] >> e.n[1] >> e.n[2] >> e.region) || (rs >> extra))
        fail("element line must be 'id n1 n2 n3 region'");
      if (!element_ids.insert(id).second) fail("duplicate element id " + std::to_string(id));
      e.line = line_no;
      elements.push_back(e);
    } else if (section == "REGIONS") {
      int id;
      Material m;
      if (!(rs >> id >> m.lambda >> m.cv) || (rs >> extra)) fail("region line must be 'id lambda cv'");
      if (mesh.materials.count(id)) fail("duplicate region id " + std::to_string(id));
      if (!(m.lambda > 0.0) || !(m.cv > 0.0)) fail("region " + std::to_string(id) + " needs positive lambda and cv");
      mesh.materials[id] = m;
    } else {
      RawEdge e;
      if (!(rs >> e.a >> e.b >> e.marker) || (rs >> extra)) fail("boundary line must be 'n1 n2 marker'");
      e.line = line_no;
      edges.push_back(e);
    }
    --remaining;
  }
  if (remaining > 0) {
    line_no = std::max(line_no, 1);
    fail("section " + section + " ended early, " + std::to_string(remaining) + " lines missing");
  }
  for (const char* s : {"NODES", "ELEMENTS", "REGIONS"})
    if (!done[s]) {
      line_no = std::max(line_no, 1);
      fail(std::string("missing section ") + s);
    }

  for (const auto& e : elements) {
    std::array<int, 3> t;
    for (int k = 0; k < 3; ++k) {
      auto it = node_index.find(e.n[k]);
      if (it == node_index.end()) {
        line_no = e.line;
        fail("element references unknown node " + std::to_string(e.n[k]));
      }
      t[k] = it->second;
    }
    if (!mesh.materials.count(e.region)) {
      line_no = e.line;
      fail("element uses unknown region " + std::to_string(e.region));
    }
    mesh.triangles.push_back(t);
    mesh.regions.push_back(e.region);
    const double a = mesh.area(mesh.element_count() - 1);
    if (!(a > 0.0)) {
      line_no = e.line;
      std::ostringstream msg;
      msg << "element is inverted or degenerate (signed area " << a << ")";
      fail(msg.str());
    }
  }
  for (const auto& e : edges) {
    auto ia = node_index.find(e.a), ib = node_index.find(e.b);
    if (ia == node_index.end() || ib == node_index.end()) {
      line_no = e.line;
      fail("boundary edge references unknown node");
    }
    mesh.boundary_edges.push_back({ia->second, ib->second});
    mesh.boundary_markers.push_back(e.marker);
  }
  const std::size_t listed = mesh.boundary_edges.size();
  mesh.build_boundary();
  if (listed > 0) {
    std::set<std::uint64_t> real;
    for (const auto& be : mesh.boundary_edges) real.insert(edge_key(be[0], be[1]));
    for (const auto& e : edges)
      if (!real.count(edge_key(node_index[e.a], node_index[e.b]))) {
        line_no = e.line;
        fail("listed boundary edge is not on the mesh boundary");
      }
  }
  mesh.validate();
  return mesh;
}

Mesh2D load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read mesh file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_mesh(buf.str(), path.string());
}

void write_mesh(const std::filesystem::path& path, const Mesh2D& mesh) {
  auto out = detail::open_output(path);
  out << "NODES " << mesh.node_count() << "\n";
  for (int i = 0; i < mesh.node_count(); ++i) out << i + 1 << " " << mesh.nodes[i].x << " " << mesh.nodes[i].y << "\n";
  out << "ELEMENTS " << mesh.element_count() << "\n";
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto& t = mesh.triangles[e];
    out << e + 1 << " " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << " " << mesh.regions[e] << "\n";
  }
  out << "REGIONS " << mesh.materials.size() << "\n";
  for (const auto& [id, m] : mesh.materials) out << id << " " << m.lambda << " " << m.cv << "\n";
  std::vector<std::size_t> marked;
  for (std::size_t i = 0; i < mesh.boundary_markers.size(); ++i)
    if (mesh.boundary_markers[i] != 0) marked.push_back(i);
  if (!marked.empty()) {
    out << "BOUNDARY " << marked.size() << "\n";
    for (auto i : marked)
      out << mesh.boundary_edges[i][0] + 1 << " " << mesh.boundary_edges[i][1] + 1 << " " << mesh.boundary_markers[i]
          << "\n";
  }
  detail::check_written(out, path);
}

namespace {

// Tensor grid over break points with per-band cell counts; region(ix, iy)
// gives the region of cell (ix, iy).
Mesh2D tensor_mesh(const std::vector<double>& xs, const std::vector<double>& ys,
                   const std::function<int(double, double)>& region_at, std::map<int, Material> materials) {
  Mesh2D mesh;
  const int nx = static_cast<int>(xs.size()) - 1, ny = static_cast<int>(ys.size()) - 1;
  for (int iy = 0; iy <= ny; ++iy)
    for (int ix = 0; ix <= nx; ++ix) mesh.nodes.push_back({xs[ix], ys[iy]});
  auto id = [nx](int ix, int iy) { return iy * (nx + 1) + ix; };
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      const int r = region_at(0.5 * (xs[ix] + xs[ix + 1]), 0.5 * (ys[iy] + ys[iy + 1]));
      // Alternate the diagonal so the mesh has no preferred direction.
      if ((ix + iy) % 2 == 0) {
        mesh.triangles.push_back({id(ix, iy), id(ix + 1, iy), id(ix + 1, iy + 1)});
        mesh.triangles.push_back({id(ix, iy), id(ix + 1, iy + 1), id(ix, iy + 1)});
      } else {
        mesh.triangles.push_back({id(ix, iy), id(ix + 1, iy), id(ix, iy + 1)});
        mesh.triangles.push_back({id(ix + 1, iy), id(ix + 1, iy + 1), id(ix, iy + 1)});
      }
      mesh.regions.push_back(r);
      mesh.regions.push_back(r);
    }
  mesh.materials = std::move(materials);
  mesh.build_boundary();
  mesh.validate();
  return mesh;
}

void append_band(std::vector<double>& pts, double to, int cells) {
  const double from = pts.back();
  for (int i = 1; i <= cells; ++i) pts.push_back(i == cells ? to : from + (to - from) * i / cells);
}

}  // namespace

Mesh2D rectangle_mesh(double x0, double x1, double y0, double y1, int nx, int ny, Material material) {
  if (nx < 1 || ny < 1 || !(x1 > x0) || !(y1 > y0)) throw std::invalid_argument("invalid rectangle mesh parameters");
  std::vector<double> xs{x0}, ys{y0};
  append_band(xs, x1, nx);
  append_band(ys, y1, ny);
  return tensor_mesh(xs, ys, [](double, double) { return 1; }, {{1, material}});
}

int insulation_region(const RutherfordGeometry& g) { return g.cables + 1; }

Node cable_center(const RutherfordGeometry& g, int c) {
  if (c < 0 || c >= g.cables) throw std::out_of_range("cable index out of range");
  return {g.insulation + c * (g.cable_width + g.insulation) + 0.5 * g.cable_width,
          g.insulation + 0.5 * g.cable_height};
}

Mesh2D rutherford_mesh(const RutherfordGeometry& g) {
  if (g.cables < 1 || g.cable_cells_x < 1 || g.cable_cells_y < 1 || g.insulation_cells < 1 || !(g.cable_width > 0) ||
      !(g.cable_height > 0) || !(g.insulation > 0))
    throw std::invalid_argument("invalid Rutherford geometry");
  std::vector<double> xs{0.0}, ys{0.0};
  for (int c = 0; c < g.cables; ++c) {
    append_band(xs, xs.back() + g.insulation, g.insulation_cells);
    append_band(xs, xs.back() + g.cable_width, g.cable_cells_x);
  }
  append_band(xs, xs.back() + g.insulation, g.insulation_cells);
  append_band(ys, g.insulation, g.insulation_cells);
  append_band(ys, g.insulation + g.cable_height, g.cable_cells_y);
  append_band(ys, 2 * g.insulation + g.cable_height, g.insulation_cells);

  std::map<int, Material> materials;
  for (int c = 1; c <= g.cables; ++c) materials[c] = g.cable;
  materials[insulation_region(g)] = g.insulation_material;
  auto region_at = [&g](double x, double y) {
    if (y > g.insulation && y < g.insulation + g.cable_height)
      for (int c = 0; c < g.cables; ++c) {
        const double left = g.insulation + c * (g.cable_width + g.insulation);
        if (x > left && x < left + g.cable_width) return c + 1;
      }
    return insulation_region(g);
  };
  return tensor_mesh(xs, ys, region_at, materials);
}

Eigen::Matrix3d element_stiffness(const Mesh2D& mesh, int e) {
  auto g = gradients(mesh, e);
  return mesh.area(e) * g * g.transpose();
}

Eigen::Matrix3d element_mass(const Mesh2D& mesh, int e) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Constant(1.0) + Eigen::Matrix3d::Identity();
  return mesh.area(e) / 12.0 * m;
}

Fem2DSystem assemble_fem(const Mesh2D& mesh) {
  mesh.validate();
  std::vector<Triplet> ta, tc, tl;
  const int ne = mesh.element_count();
  ta.reserve(9 * ne);
  tc.reserve(9 * ne);
  tl.reserve(9 * ne);
  for (int e = 0; e < ne; ++e) {
    const Material& mat = mesh.materials.at(mesh.regions[e]);
    Eigen::Matrix3d k = element_stiffness(mesh, e), m = element_mass(mesh, e);
    const auto& t = mesh.triangles[e];
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        ta.emplace_back(t[a], t[b], mat.lambda * k(a, b));
        tc.emplace_back(t[a], t[b], mat.cv * m(a, b));
        tl.emplace_back(t[a], t[b], mat.lambda * m(a, b));
      }
  }
  Fem2DSystem sys;
  sys.node_count = mesh.node_count();
  const int n = sys.node_count;
  sys.A.resize(n, n);
  sys.M_cv.resize(n, n);
  sys.M_lambda.resize(n, n);
  sys.A.setFromTriplets(ta.begin(), ta.end());
  sys.M_cv.setFromTriplets(tc.begin(), tc.end());
  sys.M_lambda.setFromTriplets(tl.begin(), tl.end());
  return sys;
}

Vector load_vector(const Mesh2D& mesh, const PlaneFunction& q) {
  Vector s = Vector::Zero(mesh.node_count());
  if (!q) return s;
  static const double bary[3][3] = {{2.0 / 3, 1.0 / 6, 1.0 / 6}, {1.0 / 6, 2.0 / 3, 1.0 / 6}, {1.0 / 6, 1.0 / 6, 2.0 / 3}};
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto& t = mesh.triangles[e];
    const double w = mesh.area(e) / 3.0;
    for (const auto& l : bary) {
      double x = 0.0, y = 0.0;
      for (int k = 0; k < 3; ++k) {
        x += l[k] * mesh.nodes[t[k]].x;
        y += l[k] * mesh.nodes[t[k]].y;
      }
      const double v = q(x, y);
      if (!std::isfinite(v)) throw NumericError("non-finite source value in cross-section load");
      for (int k = 0; k < 3; ++k) s(t[k]) += w * v * l[k];
    }
  }
  return s;
}

Vector region_load_vector(const Mesh2D& mesh, const std::map<int, double>& weight) {
  Vector s = Vector::Zero(mesh.node_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    auto it = weight.find(mesh.regions[e]);
    if (it == weight.end()) continue;
    for (int v : mesh.triangles[e]) s(v) += it->second * mesh.area(e) / 3.0;
  }
  return s;
}

Vector interpolate(const Mesh2D& mesh, const PlaneFunction& f) {
  Vector v(mesh.node_count());
  for (int i = 0; i < mesh.node_count(); ++i) v(i) = f(mesh.nodes[i].x, mesh.nodes[i].y);
  return v;
}

double evaluate(const Mesh2D& mesh, const Vector& field, double x, double y) {
  const int e = mesh.locate(x, y);
  if (e < 0) throw std::out_of_range("point outside the cross-section mesh");
  const auto& t = mesh.triangles[e];
  const Node p{x, y};
  const double a = mesh.area(e);
  const double l0 = signed_area(p, mesh.nodes[t[1]], mesh.nodes[t[2]]) / a;
  const double l1 = signed_area(mesh.nodes[t[0]], p, mesh.nodes[t[2]]) / a;
  return l0 * field(t[0]) + l1 * field(t[1]) + (1.0 - l0 - l1) * field(t[2]);
}

Vector gradient_magnitudes(const Mesh2D& mesh, const Vector& field) {
  Vector g(mesh.element_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    auto d = gradients(mesh, e);
    const auto& t = mesh.triangles[e];
    Eigen::Vector3d v(field(t[0]), field(t[1]), field(t[2]));
    g(e) = (d.transpose() * v).norm();
  }
  return g;
}

}  // namespace q3dw
