#include "msbayes/io.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "msbayes/errors.hpp"

namespace msbayes {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_nodal_csv(const std::string& path, const FineGrid& grid, const Eigen::VectorXd& values) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (int n = 0; n < grid.num_nodes(); ++n) {
    const auto [x, y] = grid.node_coord(n);
    out << format_double(x) << ',' << format_double(y) << ',' << format_double(values[n]) << '\n';
  }
}

Eigen::VectorXd read_nodal_csv(const std::string& path, const FineGrid& grid) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  Eigen::VectorXd v(grid.num_nodes());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (n >= grid.num_nodes()) throw FormatError("too many rows in " + path);
    const auto pos = line.rfind(',');
    if (pos == std::string::npos) throw FormatError("malformed row in " + path);
    v[n++] = std::stod(line.substr(pos + 1));
  }
  if (n != grid.num_nodes()) throw FormatError("expected " + std::to_string(grid.num_nodes()) + " rows in " + path);
  return v;
}

void write_heatmap_png(const std::string& path, int width, int height, const std::vector<double>& values) {
  if (static_cast<int>(values.size()) != width * height) throw ConfigError("heatmap size mismatch");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;

  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw DataError("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng failed writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(width);
  for (int r = height - 1; r >= 0; --r) {
    for (int c = 0; c < width; ++c) {
      const double v = values[static_cast<std::size_t>(r) * width + c];
      const double s = span > 0 ? (v - lo) / span : 0.0;
      row[c] = static_cast<png_byte>(std::clamp(static_cast<int>(s * 255.0 + 0.5), 0, 255));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_nodal_heatmap(const std::string& path, const FineGrid& grid, const Eigen::VectorXd& values) {
  const int side = grid.nodes_per_side();
  write_heatmap_png(path, side, side, std::vector<double>(values.data(), values.data() + values.size()));
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw DataError("cannot create directory " + path + ": " + ec.message());
}

}  // namespace msbayes
