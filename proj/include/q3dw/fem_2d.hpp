#pragma once

#include "q3dw/types.hpp"

#include <array>
#include <filesystem>
#include <map>

namespace q3dw {

struct Material {
  double lambda = 1.0;  // W m^-1 K^-1
  double cv = 1.0;      // J m^-3 K^-1
};

struct Node {
  double x = 0.0, y = 0.0;
};

// Triangulated cross-section. Node and element ids from the file are
// replaced by 0-based positions; region ids are kept.
struct Mesh2D {
  std::vector<Node> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> regions;  // per triangle
  std::map<int, Material> materials;
  // Edges used by exactly one triangle, with marker 0 unless the file sets one.
  std::vector<std::array<int, 2>> boundary_edges;
  std::vector<int> boundary_markers;

  int node_count() const { return static_cast<int>(nodes.size()); }
  int element_count() const { return static_cast<int>(triangles.size()); }
  double area(int e) const;
  Node centroid(int e) const;

  // Recomputes boundary_edges from the topology, keeping known markers.
  void build_boundary();
  // Nodes on boundary edges with the given marker (any marker when < 0).
  std::vector<int> boundary_nodes(int marker = -1) const;
  // Index of a triangle containing (x, y), or -1.
  int locate(double x, double y) const;

  // Throws ConfigError listing every problem found.
  void validate() const;
};

// Text format, '#' starts a comment:
//   NODES n      then n lines: id x y
//   ELEMENTS m   then m lines: id n1 n2 n3 region
//   REGIONS r    then r lines: id lambda cv
//   BOUNDARY b   (optional) then b lines: n1 n2 marker
// Throws ConfigError with line numbers on parse or validation failures and
// IoError when the file cannot be read.
Mesh2D load_mesh(const std::filesystem::path& path);
Mesh2D parse_mesh(const std::string& text, const std::string& source = "<string>");
void write_mesh(const std::filesystem::path& path, const Mesh2D& mesh);

// nx x ny cells on [x0, x1] x [y0, y1], each split into two triangles; one
// region with the given material.
Mesh2D rectangle_mesh(double x0, double x1, double y0, double y1, int nx, int ny, Material material = {});

struct RutherfordGeometry {
  double cable_width = 1.5e-3;
  double cable_height = 15e-3;
  double insulation = 0.1e-3;
  int cables = 3;
  Material cable{235.6, 314.1};
  Material insulation_material{0.1, 750.0};
  // Cells across one cable, along the cable height, and across an insulation layer.
  int cable_cells_x = 8;
  int cable_cells_y = 42;
  int insulation_cells = 1;
};

// Region ids: 1 .. cables for the cables from left to right, cables + 1 for
// the insulation.
Mesh2D rutherford_mesh(const RutherfordGeometry& geometry = {});
int insulation_region(const RutherfordGeometry& geometry);
// Centre of cable c (0-based, left to right).
Node cable_center(const RutherfordGeometry& geometry, int c);

using PlaneFunction = std::function<double(double x, double y)>;
using PlaneTimeFunction = std::function<double(double x, double y, double t)>;

struct Fem2DSystem {
  SparseMatrix A;         // int lambda_xy grad b_n . grad b_m
  SparseMatrix M_cv;      // int cv_xy b_n b_m
  SparseMatrix M_lambda;  // int lambda_xy b_n b_m
  int node_count = 0;
};

Fem2DSystem assemble_fem(const Mesh2D& mesh);

// Element-local P1 matrices of triangle e with unit coefficient.
Eigen::Matrix3d element_stiffness(const Mesh2D& mesh, int e);
Eigen::Matrix3d element_mass(const Mesh2D& mesh, int e);

// s_m = int q b_m dA with the 3-point rule at (2/3, 1/6, 1/6) and permutations.
Vector load_vector(const Mesh2D& mesh, const PlaneFunction& q);
// Same with q = weight(region) per element, exact for piecewise constants.
Vector region_load_vector(const Mesh2D& mesh, const std::map<int, double>& weight);

// Nodal interpolation and point evaluation of a nodal field.
Vector interpolate(const Mesh2D& mesh, const PlaneFunction& f);
double evaluate(const Mesh2D& mesh, const Vector& field, double x, double y);
// Constant gradient magnitude of a nodal field on every element.
Vector gradient_magnitudes(const Mesh2D& mesh, const Vector& field);

}  // namespace q3dw
