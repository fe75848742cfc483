// q3dw command line: solve, sweep, mesh-gen, wavelet-dump.
#include "q3dw/bench.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;
using namespace q3dw;

namespace {

struct ConfigSource {
  std::string config;
  std::string preset;
  std::string out;
  std::vector<std::string> overrides;
};

void add_source_options(CLI::App* cmd, ConfigSource& s) {
  auto* c = cmd->add_option("--config", s.config, "INI config file");
  auto* p = cmd->add_option("--preset", s.preset, "named preset under presets/");
  c->excludes(p);
  cmd->add_option("--out", s.out, "output directory (overrides run.output and Q3DW_OUTPUT_ROOT)");
  cmd->add_option("--set", s.overrides, "override a key, section.key=value");
}

bench::RunConfig resolve(const ConfigSource& s) {
  if (s.config.empty() && s.preset.empty()) throw ConfigError("one of --config or --preset is required");
  bench::RunConfig c = bench::load_config(s.config.empty() ? bench::preset_path(s.preset) : fs::path(s.config));
  for (const auto& o : s.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + o + "'");
    c = bench::with_override(c, o.substr(0, eq), o.substr(eq + 1));
  }
  return c;
}

std::optional<fs::path> cli_out(const ConfigSource& s) {
  return s.out.empty() ? std::nullopt : std::optional<fs::path>(s.out);
}

void print_summary(const bench::RunSummary& s) {
  std::cout << s.label << ": dofs=" << s.dofs << " max_active=" << s.max_active_dofs;
  if (s.errors)
    std::cout << std::setprecision(6) << " norm_inf_coeff=" << s.errors->norm_inf_coeff
              << " norm_max_grid=" << s.errors->norm_max_grid;
  std::cout << '\n';
}

void dump_wavelet(int n, const fs::path& out_dir) {
  const auto f = make_family(n);
  fs::create_directories(out_dir);
  std::ofstream filters(out_dir / "filters.csv");
  filters << std::setprecision(17) << "k,h,g\n";
  for (std::size_t k = 0; k < f->lowpass().size(); ++k)
    filters << k << ',' << f->lowpass()[k] << ',' << f->highpass()[k] << '\n';
  std::ofstream cascade(out_dir / "cascade.csv");
  cascade << std::setprecision(17) << (f->has_derivative() ? "y,phi,psi,dphi\n" : "y,phi,psi\n");
  for (std::size_t i = 0; i < f->phi_samples().size(); ++i) {
    cascade << i * f->spacing() << ',' << f->phi_samples()[i] << ',' << f->psi_samples()[i];
    if (f->has_derivative()) cascade << ',' << f->dphi_samples()[i];
    cascade << '\n';
  }
  if (!filters || !cascade) throw IoError("failed writing into " + out_dir.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wavelet Galerkin heat conduction solvers (1-D spectral/adaptive, quasi-3-D, adaptive quasi-3-D)"};
  app.require_subcommand(1);

  ConfigSource solve_src, sweep_src;
  auto* solve = app.add_subcommand("solve", "run one configuration (a config with [sweep] runs the sweep)");
  solve->alias("run");
  add_source_options(solve, solve_src);
  auto* sweep = app.add_subcommand("sweep", "run every value of the config's [sweep] section");
  add_source_options(sweep, sweep_src);

  auto* mesh_gen = app.add_subcommand("mesh-gen", "write a generated cross-section mesh");
  mesh_gen->require_subcommand(1);
  std::string mesh_out;
  RutherfordGeometry geo;
  auto* ruth = mesh_gen->add_subcommand("rutherford", "three-cable insulated stack");
  ruth->add_option("--out", mesh_out, "mesh file")->required();
  ruth->add_option("--cells-x", geo.cable_cells_x, "cells across one cable")->capture_default_str();
  ruth->add_option("--cells-y", geo.cable_cells_y, "cells along the cable height")->capture_default_str();
  ruth->add_option("--insulation-cells", geo.insulation_cells, "cells across the insulation")->capture_default_str();
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  int nx = 10, ny = 10;
  Material mat;
  auto* rect = mesh_gen->add_subcommand("rectangle", "uniform triangulated rectangle, one region");
  rect->add_option("--out", mesh_out, "mesh file")->required();
  rect->add_option("--x0", x0)->capture_default_str();
  rect->add_option("--x1", x1)->capture_default_str();
  rect->add_option("--y0", y0)->capture_default_str();
  rect->add_option("--y1", y1)->capture_default_str();
  rect->add_option("--nx", nx)->capture_default_str();
  rect->add_option("--ny", ny)->capture_default_str();
  rect->add_option("--lambda", mat.lambda)->capture_default_str();
  rect->add_option("--cv", mat.cv)->capture_default_str();

  int dump_n = 6;
  std::string dump_out = "wavelet";
  auto* dump = app.add_subcommand("wavelet-dump", "write filters and cascade samples of a Daubechies family");
  dump->add_option("-n,--n", dump_n, "vanishing moments")->capture_default_str();
  dump->add_option("--out", dump_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*solve || *sweep) {
      const ConfigSource& src = *solve ? solve_src : sweep_src;
      const bench::RunConfig c = resolve(src);
      const fs::path out = bench::resolve_output(c, cli_out(src));
      if (c.sweep) {
        for (const auto& s : bench::run_sweep(c, out)) print_summary(s);
      } else if (*sweep) {
        throw ConfigError("config " + c.name + " has no [sweep] section");
      } else {
        print_summary(bench::run(c, out));
      }
      std::cout << "wrote " << out.string() << '\n';
    } else if (*ruth) {
      write_mesh(mesh_out, rutherford_mesh(geo));
    } else if (*rect) {
      write_mesh(mesh_out, rectangle_mesh(x0, x1, y0, y1, nx, ny, mat));
    } else if (*dump) {
      dump_wavelet(dump_n, dump_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return bench::exit_code_for(e);
  }
  return 0;
}
